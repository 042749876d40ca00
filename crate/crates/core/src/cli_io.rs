//! Command-line entry points, configuration parsing, and emission of
//! CSV/JSON results and SVG phase diagrams.
//!
//! Emitted files are a pure function of the experiment config: floats are
//! written with 17 significant digits (exact round-trip for 64-bit floats),
//! rows follow the deterministic (d, replicate, index) order, and the
//! `wall_ms` column is a reserved placeholder (always 0) so outputs stay
//! byte-identical across thread counts; real timings go to stderr.

use crate::harness::{
    self, fit_rate, sweep, AggregateRow, ExperimentConfig, HarnessError, MeasureSet, PhaseDiagram,
    TrialRecord,
};
use crate::oracles::{self, OracleError, RateQuantity};
use crate::regime::{self, RegimeError, RegimeLabel};
use crate::sampler::BasisSpec;
use crate::spike_model::{ScalingLaw, SpectrumKind, SpectrumSpec, Tier};
use clap::error::ErrorKind as ClapErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{Map, Value};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Schema version stamped into every result file.
pub const SCHEMA_VERSION: &str = "1";

/// Exact raw-results CSV header.
pub const RESULTS_HEADER: &str =
    "d,n,replicate,seed,j,eigen_ratio,abs_inner,inner_sq,subspace_cos,path,wall_ms";
/// Exact aggregate CSV header.
pub const AGGREGATE_HEADER: &str = "d,n,j,measure,mean,stderr,count";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("validation error at `{key}`: {message}")]
    Validation { key: String, message: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Regime(#[from] RegimeError),
}

impl CliError {
    fn validation(key: &str, message: impl Into<String>) -> Self {
        CliError::Validation {
            key: key.to_string(),
            message: message.into(),
        }
    }

    /// Process exit code: 1 for configuration/usage problems, 2 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Validation { .. } | CliError::Io(_) => 1,
            CliError::Regime(_) => 1,
            CliError::Oracle(err) => match err {
                OracleError::DomainError(_)
                | OracleError::BoundaryCase(_)
                | OracleError::Regime(_)
                | OracleError::Spectrum(_) => 1,
                OracleError::MissingScores => 2,
            },
            CliError::Harness(err) => match err {
                HarnessError::BadConfig(_) | HarnessError::Regime(_) => 1,
                _ => 2,
            },
        }
    }
}

/// Output format for result files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

/// Metadata of an emitted result set.
#[derive(Debug, Clone)]
pub struct ResultFile {
    pub format: OutputFormat,
    pub schema_version: &'static str,
    pub results_path: PathBuf,
    pub aggregates_path: PathBuf,
}

// ---------------------------------------------------------------------------
// Config parsing
// ---------------------------------------------------------------------------

/// Parses and validates an experiment config from a UTF-8 JSON file.
///
/// Required keys: spec, law, d_grid, master_seed. Defaults: replicates 10,
/// dist gaussian, basis identity, all measures, output_dir "out". Unknown
/// keys anywhere are rejected by name.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path)?;
    let value: Value = serde_json::from_str(&text).map_err(|e| CliError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    config_from_value(&value)
}

/// Builds a validated config from parsed JSON.
pub fn config_from_value(value: &Value) -> Result<ExperimentConfig, CliError> {
    let root = as_object(value, "config")?;
    check_keys(
        root,
        "config",
        &[
            "spec",
            "law",
            "d_grid",
            "replicates",
            "dist",
            "basis",
            "master_seed",
            "measures",
            "output_dir",
        ],
    )?;

    let spec = parse_spec(require(root, "spec")?)?;
    let law = parse_law(require(root, "law")?)?;
    let d_grid = parse_d_grid(require(root, "d_grid")?)?;
    let master_seed = parse_u64(require(root, "master_seed")?, "master_seed")?;

    let replicates = match root.get("replicates") {
        None => 10,
        Some(v) => {
            let r = parse_usize(v, "replicates")?;
            if r == 0 {
                return Err(CliError::validation("replicates", "must be at least 1"));
            }
            r
        }
    };
    let dist = match root.get("dist") {
        None => Default::default(),
        Some(v) => {
            let s = as_str(v, "dist")?;
            match s {
                "gaussian" => crate::sampler::ScoreDistribution::Gaussian,
                "rademacher" => crate::sampler::ScoreDistribution::Rademacher,
                "scaled_uniform" => crate::sampler::ScoreDistribution::ScaledUniform,
                other => {
                    return Err(CliError::validation(
                        "dist",
                        format!("unknown distribution {other:?}"),
                    ))
                }
            }
        }
    };
    let basis = match root.get("basis") {
        None => BasisSpec::Identity,
        Some(v) => parse_basis(v)?,
    };
    let measures = match root.get("measures") {
        None => MeasureSet::all(),
        Some(v) => {
            let arr = as_array(v, "measures")?;
            let names: Vec<String> = arr
                .iter()
                .map(|x| as_str(x, "measures").map(|s| s.to_string()))
                .collect::<Result<_, _>>()?;
            MeasureSet::from_names(&names).map_err(|m| CliError::validation("measures", m))?
        }
    };
    let output_dir = match root.get("output_dir") {
        None => PathBuf::from("out"),
        Some(v) => PathBuf::from(as_str(v, "output_dir")?),
    };

    let mut config = ExperimentConfig::new(spec, law, d_grid, master_seed);
    config.replicates = replicates;
    config.dist = dist;
    config.basis = basis;
    config.measures = measures;
    config.output_dir = output_dir;
    config
        .validate()
        .map_err(|e| CliError::validation("config", e.to_string()))?;
    Ok(config)
}

fn parse_spec(value: &Value) -> Result<SpectrumSpec, CliError> {
    let obj = as_object(value, "spec")?;
    let kind_value = obj
        .get("kind")
        .ok_or_else(|| CliError::validation("spec.kind", "missing required key"))?;
    let kind_str = as_str(kind_value, "spec.kind")?;

    let kind = match kind_str {
        "single_spike" => {
            check_keys(obj, "spec", &["kind", "alpha", "base_level", "zero_tail"])?;
            let alpha = parse_f64(require(obj, "spec.alpha")?, "spec.alpha")?;
            SpectrumKind::SingleSpike { alpha }
        }
        "multi_spike" => {
            check_keys(
                obj,
                "spec",
                &["kind", "alpha", "constants", "base_level", "zero_tail"],
            )?;
            let alpha = parse_f64(require(obj, "spec.alpha")?, "spec.alpha")?;
            let arr = as_array(require(obj, "spec.constants")?, "spec.constants")?;
            let constants: Vec<f64> = arr
                .iter()
                .map(|v| parse_f64(v, "spec.constants"))
                .collect::<Result<_, _>>()?;
            for pair in constants.windows(2) {
                if !(pair[0] > pair[1]) {
                    return Err(CliError::validation(
                        "spec.constants",
                        format!(
                            "constants must strictly decrease and exceed 1, got {} then {}",
                            pair[0], pair[1]
                        ),
                    ));
                }
            }
            SpectrumKind::MultiSpike { alpha, constants }
        }
        "tiered" => {
            check_keys(obj, "spec", &["kind", "tiers", "base_level", "zero_tail"])?;
            let arr = as_array(require(obj, "spec.tiers")?, "spec.tiers")?;
            let mut tiers = Vec::with_capacity(arr.len());
            for v in arr {
                let t = as_object(v, "spec.tiers")?;
                check_keys(t, "spec.tiers", &["exponent", "multiplicity"])?;
                tiers.push(Tier {
                    exponent: parse_f64(require(t, "spec.tiers.exponent")?, "spec.tiers.exponent")?,
                    multiplicity: parse_usize(
                        require(t, "spec.tiers.multiplicity")?,
                        "spec.tiers.multiplicity",
                    )?,
                });
            }
            SpectrumKind::Tiered { tiers }
        }
        "explicit" => {
            check_keys(obj, "spec", &["kind", "values", "base_level", "zero_tail"])?;
            let arr = as_array(require(obj, "spec.values")?, "spec.values")?;
            let values: Vec<f64> = arr
                .iter()
                .map(|v| parse_f64(v, "spec.values"))
                .collect::<Result<_, _>>()?;
            SpectrumKind::Explicit { values }
        }
        other => {
            return Err(CliError::validation(
                "spec.kind",
                format!("unknown spectrum kind {other:?}"),
            ))
        }
    };

    let base_level = match obj.get("base_level") {
        None => 1.0,
        Some(v) => parse_f64(v, "spec.base_level")?,
    };
    let zero_tail = match obj.get("zero_tail") {
        None => 0,
        Some(v) => parse_usize(v, "spec.zero_tail")?,
    };
    let spec = SpectrumSpec {
        kind,
        base_level,
        zero_tail,
    };
    spec.validate()
        .map_err(|e| CliError::validation("spec", e.to_string()))?;
    Ok(spec)
}

fn parse_law(value: &Value) -> Result<ScalingLaw, CliError> {
    let obj = as_object(value, "law")?;
    check_keys(obj, "law", &["gamma", "fixed_n", "d_values"])?;
    let gamma = match obj.get("gamma") {
        None => 0.0,
        Some(v) => {
            let g = parse_f64(v, "law.gamma")?;
            if !(g >= 0.0) {
                return Err(CliError::validation("law.gamma", "must be >= 0"));
            }
            g
        }
    };
    let fixed_n = match obj.get("fixed_n") {
        None => None,
        Some(v) => {
            let n = parse_usize(v, "law.fixed_n")?;
            if n < 2 {
                return Err(CliError::validation("law.fixed_n", "must be at least 2"));
            }
            Some(n)
        }
    };
    if fixed_n.is_none() && obj.get("gamma").is_none() {
        return Err(CliError::validation(
            "law",
            "either gamma or fixed_n must be given",
        ));
    }
    let d_values = match obj.get("d_values") {
        None => Vec::new(),
        Some(v) => as_array(v, "law.d_values")?
            .iter()
            .map(|x| parse_usize(x, "law.d_values"))
            .collect::<Result<_, _>>()?,
    };
    Ok(ScalingLaw {
        gamma,
        fixed_n,
        d_values,
    })
}

fn parse_basis(value: &Value) -> Result<BasisSpec, CliError> {
    match value {
        Value::String(s) if s == "identity" => Ok(BasisSpec::Identity),
        Value::String(s) => Err(CliError::validation(
            "basis",
            format!("unknown basis {s:?} (use \"identity\" or {{\"haar\": {{\"seed\": N}}}})"),
        )),
        Value::Object(obj) => {
            check_keys(obj, "basis", &["haar"])?;
            let haar = as_object(require(obj, "basis.haar")?, "basis.haar")?;
            check_keys(haar, "basis.haar", &["seed"])?;
            let seed = parse_u64(require(haar, "basis.haar.seed")?, "basis.haar.seed")?;
            Ok(BasisSpec::Haar { seed })
        }
        _ => Err(CliError::validation("basis", "must be a string or object")),
    }
}

fn parse_d_grid(value: &Value) -> Result<Vec<usize>, CliError> {
    let arr = as_array(value, "d_grid")?;
    if arr.is_empty() {
        return Err(CliError::validation("d_grid", "must be nonempty"));
    }
    let grid: Vec<usize> = arr
        .iter()
        .map(|v| parse_usize(v, "d_grid"))
        .collect::<Result<_, _>>()?;
    for pair in grid.windows(2) {
        if pair[0] >= pair[1] {
            return Err(CliError::validation(
                "d_grid",
                "values must be strictly increasing",
            ));
        }
    }
    if grid[0] < 2 {
        return Err(CliError::validation("d_grid", "every d must be at least 2"));
    }
    Ok(grid)
}

fn as_object<'v>(value: &'v Value, key: &str) -> Result<&'v Map<String, Value>, CliError> {
    value
        .as_object()
        .ok_or_else(|| CliError::validation(key, "expected an object"))
}

fn as_array<'v>(value: &'v Value, key: &str) -> Result<&'v Vec<Value>, CliError> {
    value
        .as_array()
        .ok_or_else(|| CliError::validation(key, "expected an array"))
}

fn as_str<'v>(value: &'v Value, key: &str) -> Result<&'v str, CliError> {
    value
        .as_str()
        .ok_or_else(|| CliError::validation(key, "expected a string"))
}

fn parse_f64(value: &Value, key: &str) -> Result<f64, CliError> {
    value
        .as_f64()
        .filter(|v| v.is_finite())
        .ok_or_else(|| CliError::validation(key, "expected a finite number"))
}

fn parse_u64(value: &Value, key: &str) -> Result<u64, CliError> {
    value
        .as_u64()
        .ok_or_else(|| CliError::validation(key, "expected a nonnegative integer"))
}

fn parse_usize(value: &Value, key: &str) -> Result<usize, CliError> {
    Ok(parse_u64(value, key)? as usize)
}

fn require<'v>(obj: &'v Map<String, Value>, dotted: &str) -> Result<&'v Value, CliError> {
    let key = dotted.rsplit('.').next().expect("nonempty key");
    obj.get(key)
        .ok_or_else(|| CliError::validation(dotted, "missing required key"))
}

fn check_keys(obj: &Map<String, Value>, scope: &str, allowed: &[&str]) -> Result<(), CliError> {
    for key in obj.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(CliError::Validation {
                key: format!("{scope}.{key}"),
                message: "unknown key".into(),
            });
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Result emission
// ---------------------------------------------------------------------------

/// 17-significant-digit scientific form: exact round-trip for f64.
fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt_f64(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// Writes the raw per-trial rows and the per-(d, index) aggregates under
/// `dir` as results.{csv|json} and aggregates.{csv|json}.
pub fn emit_results(
    records: &[TrialRecord],
    aggregates: &[AggregateRow],
    format: OutputFormat,
    dir: &Path,
) -> Result<ResultFile, CliError> {
    fs::create_dir_all(dir)?;
    let (results_path, aggregates_path) = match format {
        OutputFormat::Csv => (dir.join("results.csv"), dir.join("aggregates.csv")),
        OutputFormat::Json => (dir.join("results.json"), dir.join("aggregates.json")),
    };
    match format {
        OutputFormat::Csv => {
            fs::write(&results_path, results_csv(records))?;
            fs::write(&aggregates_path, aggregates_csv(aggregates))?;
        }
        OutputFormat::Json => {
            fs::write(&results_path, results_json(records)?)?;
            fs::write(&aggregates_path, aggregates_json(aggregates)?)?;
        }
    }
    Ok(ResultFile {
        format,
        schema_version: SCHEMA_VERSION,
        results_path,
        aggregates_path,
    })
}

fn results_csv(records: &[TrialRecord]) -> String {
    let mut out = String::new();
    out.push_str(RESULTS_HEADER);
    out.push('\n');
    for record in records {
        for row in &record.measures {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},0",
                record.d,
                record.n,
                record.replicate,
                record.seed,
                row.index + 1,
                opt_f64(row.eigen_ratio),
                opt_f64(row.abs_inner),
                opt_f64(row.inner_sq),
                opt_f64(row.subspace_cos),
                record.path,
            );
        }
    }
    out
}

fn aggregates_csv(aggregates: &[AggregateRow]) -> String {
    let mut out = String::new();
    out.push_str(AGGREGATE_HEADER);
    out.push('\n');
    for row in aggregates {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            row.d,
            row.n,
            row.index + 1,
            row.measure,
            fmt_f64(row.mean),
            fmt_f64(row.stderr),
            row.count,
        );
    }
    out
}

fn results_json(records: &[TrialRecord]) -> Result<String, CliError> {
    let rows: Vec<Value> = records
        .iter()
        .flat_map(|record| {
            record.measures.iter().map(move |row| {
                serde_json::json!({
                    "d": record.d,
                    "n": record.n,
                    "replicate": record.replicate,
                    "seed": record.seed,
                    "j": row.index + 1,
                    "eigen_ratio": row.eigen_ratio,
                    "abs_inner": row.abs_inner,
                    "inner_sq": row.inner_sq,
                    "subspace_cos": row.subspace_cos,
                    "path": record.path,
                    "wall_ms": 0.0,
                })
            })
        })
        .collect();
    let doc = serde_json::json!({ "schema_version": SCHEMA_VERSION, "rows": rows });
    serde_json::to_string_pretty(&doc).map_err(|e| CliError::Validation {
        key: "results".into(),
        message: e.to_string(),
    })
}

fn aggregates_json(aggregates: &[AggregateRow]) -> Result<String, CliError> {
    let rows: Vec<Value> = aggregates
        .iter()
        .map(|row| {
            serde_json::json!({
                "d": row.d,
                "n": row.n,
                "j": row.index + 1,
                "measure": row.measure,
                "mean": row.mean,
                "stderr": row.stderr,
                "count": row.count,
            })
        })
        .collect();
    let doc = serde_json::json!({ "schema_version": SCHEMA_VERSION, "rows": rows });
    serde_json::to_string_pretty(&doc).map_err(|e| CliError::Validation {
        key: "aggregates".into(),
        message: e.to_string(),
    })
}

// ---------------------------------------------------------------------------
// SVG phase diagram
// ---------------------------------------------------------------------------

const SVG_CELL: f64 = 40.0;
const SVG_ML: f64 = 64.0;
const SVG_MT: f64 = 24.0;
const SVG_MR: f64 = 24.0;
const SVG_MB: f64 = 56.0;

/// Renders the phase diagram as a standalone SVG 1.1 document: one grayscale
/// rect per grid node (white = 0, dark = 1), a dashed line on the
/// alpha + gamma = 1 boundary, circles marking Boundary-labeled nodes, axis
/// labels, and a text legend.
pub fn emit_phase_svg(diagram: &PhaseDiagram, path: &Path) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, phase_svg_string(diagram))?;
    Ok(())
}

/// Builds the SVG document text.
pub fn phase_svg_string(diagram: &PhaseDiagram) -> String {
    let nrows = diagram.gammas.len();
    let ncols = diagram.alphas.len();
    let width = SVG_ML + ncols as f64 * SVG_CELL + SVG_MR;
    let height = SVG_MT + nrows as f64 * SVG_CELL + SVG_MB;

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width:.1}" height="{height:.1}" viewBox="0 0 {width:.1} {height:.1}">"#
    );

    // Heatmap cells: one rect per node, white = 0, dark = 1.
    for (row, line) in diagram.mean_inner_sq.iter().enumerate() {
        for (col, &value) in line.iter().enumerate() {
            let shade = (255.0 * (1.0 - value.clamp(0.0, 1.0))).round() as u8;
            let x = SVG_ML + col as f64 * SVG_CELL;
            let y = SVG_MT + row as f64 * SVG_CELL;
            let _ = writeln!(
                svg,
                r#"<rect x="{x:.1}" y="{y:.1}" width="{SVG_CELL:.1}" height="{SVG_CELL:.1}" fill="rgb({shade},{shade},{shade})"/>"#
            );
        }
    }

    // Boundary glyphs on nodes the classifier marks as boundary cases.
    for (row, line) in diagram.labels.iter().enumerate() {
        for (col, label) in line.iter().enumerate() {
            if *label == RegimeLabel::Boundary {
                let cx = SVG_ML + (col as f64 + 0.5) * SVG_CELL;
                let cy = SVG_MT + (row as f64 + 0.5) * SVG_CELL;
                let _ = writeln!(
                    svg,
                    r##"<circle cx="{cx:.1}" cy="{cy:.1}" r="5.0" fill="none" stroke="#cc2222" stroke-width="1.5"/>"##
                );
            }
        }
    }

    // Dashed overlay on the alpha + gamma = 1 line, clipped to the grid
    // extremes and drawn in cell-center coordinates.
    let a_min = diagram.alphas.first().copied().unwrap_or(0.0);
    let a_max = diagram.alphas.last().copied().unwrap_or(0.0);
    let g_min = diagram.gammas.last().copied().unwrap_or(0.0);
    let g_max = diagram.gammas.first().copied().unwrap_or(0.0);
    let a_lo = a_min.max(1.0 - g_max);
    let a_hi = a_max.min(1.0 - g_min);
    if a_lo <= a_hi && ncols > 0 && nrows > 0 {
        let x_of = |alpha: f64| {
            if a_max > a_min {
                SVG_ML
                    + 0.5 * SVG_CELL
                    + (alpha - a_min) / (a_max - a_min) * (ncols - 1) as f64 * SVG_CELL
            } else {
                SVG_ML + 0.5 * SVG_CELL
            }
        };
        let y_of = |gamma: f64| {
            if g_max > g_min {
                SVG_MT
                    + 0.5 * SVG_CELL
                    + (g_max - gamma) / (g_max - g_min) * (nrows - 1) as f64 * SVG_CELL
            } else {
                SVG_MT + 0.5 * SVG_CELL
            }
        };
        let (x1, y1) = (x_of(a_lo), y_of(1.0 - a_lo));
        let (x2, y2) = (x_of(a_hi), y_of(1.0 - a_hi));
        let _ = writeln!(
            svg,
            r##"<line x1="{x1:.1}" y1="{y1:.1}" x2="{x2:.1}" y2="{y2:.1}" stroke="#cc2222" stroke-width="1.5" stroke-dasharray="6 4"/>"##
        );
    }

    // Axis tick labels and titles.
    for (col, alpha) in diagram.alphas.iter().enumerate() {
        let x = SVG_ML + (col as f64 + 0.5) * SVG_CELL;
        let y = SVG_MT + nrows as f64 * SVG_CELL + 14.0;
        let _ = writeln!(
            svg,
            r#"<text x="{x:.1}" y="{y:.1}" font-size="10" text-anchor="middle">{alpha}</text>"#
        );
    }
    for (row, gamma) in diagram.gammas.iter().enumerate() {
        let x = SVG_ML - 6.0;
        let y = SVG_MT + (row as f64 + 0.5) * SVG_CELL + 3.0;
        let _ = writeln!(
            svg,
            r#"<text x="{x:.1}" y="{y:.1}" font-size="10" text-anchor="end">{gamma}</text>"#
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">alpha (spike exponent)</text>"#,
        SVG_ML + ncols as f64 * SVG_CELL / 2.0,
        height - 24.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="14.0" y="{:.1}" font-size="12" text-anchor="middle" transform="rotate(-90 14.0 {:.1})">gamma (sample exponent)</text>"#,
        SVG_MT + nrows as f64 * SVG_CELL / 2.0,
        SVG_MT + nrows as f64 * SVG_CELL / 2.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="middle">mean squared inner product: white = 0, black = 1; circles mark boundary nodes</text>"#,
        width / 2.0,
        height - 8.0
    );
    svg.push_str("</svg>\n");
    svg
}

// ---------------------------------------------------------------------------
// CLI
// ---------------------------------------------------------------------------

#[derive(Parser, Debug)]
#[command(
    name = "spike-pca",
    version,
    about = "Monte Carlo lab for PCA consistency under spiked covariance models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the configured sweep and emit raw + aggregate result files.
    Simulate(SimulateArgs),
    /// Run the (alpha, gamma) phase-diagram experiment and emit an SVG.
    PhaseDiagram(PhaseArgs),
    /// Sweep the d-grid and regress the measured response on the predicted rate.
    RateCheck(RateArgs),
    /// Print the symbolic regime classification without simulating.
    Classify(ClassifyArgs),
    /// Evaluate a named closed form.
    Oracle {
        #[command(subcommand)]
        which: OracleCommand,
    },
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's output_dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: SPIKE_PCA_THREADS or all cores).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
}

#[derive(Args, Debug)]
struct PhaseArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Alpha grid nodes.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0])]
    alpha_grid: Vec<f64>,
    /// Gamma grid nodes.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5])]
    gamma_grid: Vec<f64>,
    /// Dimension at which each node is simulated.
    #[arg(long, default_value_t = 300)]
    d: usize,
}

#[derive(Args, Debug)]
struct RateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    /// 1-based eigenvector index to check.
    #[arg(long, default_value_t = 1)]
    index: usize,
}

#[derive(Args, Debug)]
struct ClassifyArgs {
    #[arg(long)]
    config: PathBuf,
}

#[derive(Subcommand, Debug)]
enum OracleCommand {
    /// Squared inner-product limit at the proportional boundary.
    Nadler {
        #[arg(long)]
        lambda1: f64,
        #[arg(long)]
        c: f64,
    },
    /// Extreme noise eigenvalue edges (largest, smallest).
    BaiYin {
        #[arg(long)]
        c: f64,
    },
    /// One draw from the HDLSS boundary law chi2_n/(chi2_n + c).
    JungSample {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        c: f64,
        #[arg(long)]
        seed: u64,
    },
    /// Finite-d noise eigenvalue mass for a flat non-spike spectrum.
    KConst {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        spikes: usize,
        #[arg(long, default_value_t = 1.0)]
        base: f64,
    },
}

/// CLI entry point. Returns the process exit code: 0 on success, 1 on
/// validation/usage errors, 2 on numerical failure.
pub fn cli_main(argv: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ClapErrorKind::DisplayHelp | ClapErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(args) => {
            let mut config = parse_config(&args.config)?;
            if let Some(seed) = args.seed {
                config.master_seed = seed;
            }
            if let Some(out) = args.out {
                config.output_dir = out;
            }
            in_pool(args.threads, || cmd_simulate(&config, args.format))
        }
        Command::PhaseDiagram(args) => {
            let mut config = parse_config(&args.config)?;
            if let Some(seed) = args.seed {
                config.master_seed = seed;
            }
            if let Some(out) = args.out {
                config.output_dir = out;
            }
            let alpha = args.alpha_grid.clone();
            let gamma = args.gamma_grid.clone();
            let d = args.d;
            in_pool(args.threads, || cmd_phase(&config, &alpha, &gamma, d))
        }
        Command::RateCheck(args) => {
            let mut config = parse_config(&args.config)?;
            if let Some(seed) = args.seed {
                config.master_seed = seed;
            }
            if let Some(out) = args.out {
                config.output_dir = out;
            }
            if args.index == 0 {
                return Err(CliError::validation("index", "indices are 1-based"));
            }
            let index = args.index - 1;
            in_pool(args.threads, || cmd_rate_check(&config, index))
        }
        Command::Classify(args) => {
            let config = parse_config(&args.config)?;
            cmd_classify(&config)
        }
        Command::Oracle { which } => cmd_oracle(which),
    }
}

/// Runs `body` inside a rayon pool sized by --threads or the
/// SPIKE_PCA_THREADS env var; without either, the default pool is used.
fn in_pool<F>(threads: Option<usize>, body: F) -> Result<(), CliError>
where
    F: FnOnce() -> Result<(), CliError> + Send,
{
    let threads = threads.or_else(|| {
        std::env::var("SPIKE_PCA_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    match threads {
        None => body(),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t.max(1))
                .build()
                .map_err(|e| CliError::Validation {
                    key: "threads".into(),
                    message: e.to_string(),
                })?;
            pool.install(body)
        }
    }
}

fn cmd_simulate(config: &ExperimentConfig, format: OutputFormat) -> Result<(), CliError> {
    let outcome = sweep(config)?;
    let files = emit_results(
        &outcome.records,
        &outcome.aggregates,
        format,
        &config.output_dir,
    )?;
    let total_ms: f64 = outcome.records.iter().map(|r| r.wall_ms).sum();
    eprintln!(
        "{} trials in {:.1} ms total; results -> {}, aggregates -> {}",
        outcome.records.len(),
        total_ms,
        files.results_path.display(),
        files.aggregates_path.display()
    );
    if !outcome.failures.is_empty() {
        eprintln!("{} trial(s) failed:", outcome.failures.len());
        for f in &outcome.failures {
            eprintln!("  d={} replicate={}: {}", f.d, f.replicate, f.message);
        }
        return Err(CliError::Harness(HarnessError::InvariantViolation(
            format!("{} trial(s) failed", outcome.failures.len()),
        )));
    }
    Ok(())
}

fn cmd_phase(
    config: &ExperimentConfig,
    alpha_grid: &[f64],
    gamma_grid: &[f64],
    d: usize,
) -> Result<(), CliError> {
    let diagram = harness::phase_diagram(
        alpha_grid,
        gamma_grid,
        d,
        config.replicates,
        config.master_seed,
    )?;
    fs::create_dir_all(&config.output_dir)?;
    let path = config.output_dir.join("phase_diagram.svg");
    emit_phase_svg(&diagram, &path)?;
    eprintln!("phase diagram -> {}", path.display());
    Ok(())
}

fn cmd_rate_check(config: &ExperimentConfig, index: usize) -> Result<(), CliError> {
    let mut rates = Vec::with_capacity(config.d_grid.len());
    let mut quantity = None;
    for &d in &config.d_grid {
        let p = oracles::predict_rate(&config.spec, &config.law, d, index)?;
        quantity = Some(p.quantity);
        rates.push((d, p.rate));
    }
    let quantity = quantity.expect("nonempty grid");

    let outcome = sweep(config)?;
    let selector = |record: &TrialRecord| -> Option<f64> {
        let row = record.measures.iter().find(|m| m.index == index)?;
        match quantity {
            RateQuantity::ConsistencyGap => row.abs_inner.map(|v| 1.0 - v),
            RateQuantity::StrongInconsistencyLevel => row.abs_inner,
            RateQuantity::SubspaceGap => row.subspace_cos.map(|v| 1.0 - v),
        }
    };
    let fit = fit_rate(&outcome.records, &rates, selector)?;
    println!(
        "quantity: {}",
        match quantity {
            RateQuantity::ConsistencyGap => "consistency gap (1 - |inner|)",
            RateQuantity::StrongInconsistencyLevel => "strong-inconsistency level (|inner|)",
            RateQuantity::SubspaceGap => "subspace gap (1 - cos)",
        }
    );
    println!("slope: {}", fit.slope);
    println!("intercept: {}", fit.intercept);
    println!("r_squared: {}", fit.r_squared);
    println!("o_constant: {}", fit.o_constant);
    println!("n_points: {}", fit.n_points);
    println!("dropped: {}", fit.dropped);
    Ok(())
}

fn cmd_classify(config: &ExperimentConfig) -> Result<(), CliError> {
    let report = regime::classify(&config.spec, &config.law)?;
    println!(
        "family: {}",
        match report.family {
            crate::regime::AsymptoticFamily::GrowingN => "growing sample size",
            crate::regime::AsymptoticFamily::FixedN => "fixed sample size (HDLSS)",
        }
    );
    let d_ref = *config.d_grid.last().expect("validated nonempty");
    for tier in &report.tiers {
        let lo = tier.indices.start + 1;
        let hi = tier.indices.end;
        let span = if lo == hi {
            format!("u_hat[{lo}]")
        } else {
            format!("u_hat[{lo}..{hi}]")
        };
        let rate = match oracles::predict_rate(&config.spec, &config.law, d_ref, tier.indices.start)
        {
            Ok(p) => format!(
                "rate {:.6} at d={d_ref}{}",
                p.rate,
                if p.approximate { " (approximate)" } else { "" }
            ),
            Err(OracleError::BoundaryCase(_)) => "limit law only, no rate".to_string(),
            Err(e) => return Err(e.into()),
        };
        println!(
            "{span}: {} (exponent {:.4}, governing {:.4}); {rate}",
            tier.label, tier.exponent, tier.governing_exponent
        );
    }
    println!("noise block: {}", report.noise_label);
    Ok(())
}

fn cmd_oracle(which: OracleCommand) -> Result<(), CliError> {
    match which {
        OracleCommand::Nadler { lambda1, c } => {
            println!("{}", oracles::nadler_limit(lambda1, c)?);
        }
        OracleCommand::BaiYin { c } => {
            if !(c >= 0.0) {
                return Err(CliError::validation("c", "must be nonnegative"));
            }
            let (largest, smallest) = oracles::bai_yin_edges(c);
            println!("{largest} {smallest}");
        }
        OracleCommand::JungSample { n, c, seed } => {
            if n == 0 {
                return Err(CliError::validation("n", "must be at least 1"));
            }
            println!("{}", oracles::jung_limit_draw(n, c, seed));
        }
        OracleCommand::KConst { d, n, spikes, base } => {
            if d == 0 || n == 0 || spikes >= d {
                return Err(CliError::validation(
                    "k-const",
                    "need d > spikes >= 0 and n >= 1",
                ));
            }
            let k = base * (d - spikes) as f64 / (n as f64 * d as f64);
            println!("{k}");
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::aggregate;
    use crate::spike_model::SpectrumSpec;

    fn minimal_config_json() -> &'static str {
        r#"{
            "spec": {"kind": "single_spike", "alpha": 1.0},
            "law": {"gamma": 0.5},
            "d_grid": [100],
            "master_seed": 1
        }"#
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let value: Value = serde_json::from_str(minimal_config_json()).unwrap();
        let config = config_from_value(&value).unwrap();
        assert_eq!(config.replicates, 10);
        assert_eq!(config.dist, crate::sampler::ScoreDistribution::Gaussian);
        assert_eq!(config.basis, BasisSpec::Identity);
        assert_eq!(config.measures, MeasureSet::all());
        assert_eq!(config.output_dir, PathBuf::from("out"));
        assert_eq!(config.spec, SpectrumSpec::single_spike(1.0));
    }

    #[test]
    fn increasing_constants_are_rejected_by_name() {
        let text = r#"{
            "spec": {"kind": "multi_spike", "alpha": 1.0, "constants": [2.0, 3.0]},
            "law": {"gamma": 0.5},
            "d_grid": [100],
            "master_seed": 1
        }"#;
        let value: Value = serde_json::from_str(text).unwrap();
        let err = config_from_value(&value).unwrap_err();
        match err {
            CliError::Validation { key, .. } => assert_eq!(key, "spec.constants"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_key_is_rejected_by_name() {
        let text = r#"{
            "spec": {"kind": "single_spike", "alpha": 1.0},
            "law": {"gamma": 0.5},
            "d_grid": [100],
            "master_seed": 1,
            "alpha_max": 2.0
        }"#;
        let value: Value = serde_json::from_str(text).unwrap();
        let err = config_from_value(&value).unwrap_err();
        match err {
            CliError::Validation { key, .. } => assert_eq!(key, "config.alpha_max"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn syntax_error_carries_position() {
        let err = serde_json::from_str::<Value>("{\n  \"spec\": }").unwrap_err();
        let cli = CliError::Parse {
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        };
        assert_eq!(cli.exit_code(), 1);
        assert!(format!("{cli}").contains("line 2"));
    }

    #[test]
    fn float_format_round_trips() {
        for x in [
            1.0,
            -1.0 / 3.0,
            0.1,
            123456.789e-12,
            9.999999999999999e99,
            5e-324,
        ] {
            let s = fmt_f64(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{x} -> {s} -> {back}");
        }
    }

    fn tiny_records() -> Vec<TrialRecord> {
        let mut config = ExperimentConfig::new(
            SpectrumSpec::single_spike(1.0),
            ScalingLaw::growing(0.5),
            vec![20, 40],
            3,
        );
        config.replicates = 2;
        sweep(&config).unwrap().records
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let records = tiny_records();
        let csv = results_csv(&records);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), RESULTS_HEADER);
        let mut parsed_rows = 0;
        for line in lines {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), 11);
            parsed_rows += 1;
        }
        let expected_rows: usize = records.iter().map(|r| r.measures.len()).sum();
        assert_eq!(parsed_rows, expected_rows);

        // Numeric cells parse back to the exact bits that were written.
        let mut line_iter = csv.lines().skip(1);
        for record in &records {
            for row in &record.measures {
                let line = line_iter.next().unwrap();
                let fields: Vec<&str> = line.split(',').collect();
                if let Some(expected) = row.abs_inner {
                    let got: f64 = fields[6].parse().unwrap();
                    assert_eq!(got.to_bits(), expected.to_bits());
                }
                if let Some(expected) = row.subspace_cos {
                    let got: f64 = fields[8].parse().unwrap();
                    assert_eq!(got.to_bits(), expected.to_bits());
                }
            }
        }
    }

    #[test]
    fn json_has_documented_keys() {
        let records = tiny_records();
        let aggregates = aggregate(&records);
        let doc: Value = serde_json::from_str(&results_json(&records).unwrap()).unwrap();
        assert_eq!(doc["schema_version"], "1");
        let row = &doc["rows"][0];
        for key in [
            "d",
            "n",
            "replicate",
            "seed",
            "j",
            "eigen_ratio",
            "abs_inner",
            "inner_sq",
            "subspace_cos",
            "path",
            "wall_ms",
        ] {
            assert!(row.get(key).is_some(), "missing key {key}");
        }
        let agg: Value = serde_json::from_str(&aggregates_json(&aggregates).unwrap()).unwrap();
        assert_eq!(agg["schema_version"], "1");
        for key in ["d", "n", "j", "measure", "mean", "stderr", "count"] {
            assert!(agg["rows"][0].get(key).is_some(), "missing key {key}");
        }
    }

    #[test]
    fn svg_structure_counts() {
        let diagram = PhaseDiagram {
            alphas: vec![0.0, 2.0],
            gammas: vec![1.5, 0.0],
            mean_inner_sq: vec![vec![0.0, 1.0], vec![0.25, 0.75]],
            labels: vec![
                vec![RegimeLabel::Consistent, RegimeLabel::Consistent],
                vec![
                    RegimeLabel::StronglyInconsistent,
                    RegimeLabel::StronglyInconsistent,
                ],
            ],
            d: 300,
            replicates: 5,
        };
        let svg = phase_svg_string(&diagram);
        assert_eq!(svg.matches("<rect ").count(), 4);
        assert_eq!(svg.matches("<line ").count(), 1);
        assert!(svg.starts_with("<?xml"));
        assert!(svg.contains(r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1""#));
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn svg_all_ones_is_darkest() {
        let diagram = PhaseDiagram {
            alphas: vec![0.0, 1.0],
            gammas: vec![1.0, 0.0],
            mean_inner_sq: vec![vec![1.0, 1.0], vec![1.0, 1.0]],
            labels: vec![
                vec![RegimeLabel::Boundary, RegimeLabel::Consistent],
                vec![RegimeLabel::StronglyInconsistent, RegimeLabel::Boundary],
            ],
            d: 100,
            replicates: 1,
        };
        let svg = phase_svg_string(&diagram);
        assert_eq!(svg.matches(r#"fill="rgb(0,0,0)""#).count(), 4);
        // Boundary nodes get circle glyphs.
        assert_eq!(svg.matches("<circle ").count(), 2);
    }

    #[test]
    fn oracle_nadler_prints_cited_value() {
        // The CLI prints f64 via Display; check the exact text.
        let v = oracles::nadler_limit(2.0, 0.5).unwrap();
        assert_eq!(format!("{v}"), "0.3333333333333333");
    }
}
