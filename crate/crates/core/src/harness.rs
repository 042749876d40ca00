//! Monte Carlo experiment runner: trial execution, grid sweeps, rate
//! regression, and phase-diagram assembly.
//!
//! The full result set is a pure function of the experiment config. Every
//! trial derives its own seed from (master seed, grid index, replicate), so
//! parallel and serial schedules produce identical records.

use crate::eigencore::{
    dual_eigen, sample_cov, sym_eigen, wielandt_check_all, EigenError, EigenResult,
    SymMatrix,
};
use crate::metrics::{self, ConsistencyMeasures, MetricsError};
use crate::oracles::OracleError;
use crate::regime::{region_grid, RegimeError, RegimeLabel};
use crate::sampler::{synthesize, BasisSpec, Dataset, ScoreDistribution};
use crate::spike_model::{ScalingLaw, SpectrumError, SpectrumSpec};
use ndarray::s;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;
use thiserror::Error;

/// Fraction of eligible trials spot-checked against the eigenvalue sandwich:
/// one in twenty.
const WIELANDT_SPOT_DIVISOR: u64 = 20;
const WIELANDT_SPOT_SALT: u64 = 0x5749_454c_414e_4454;
/// Trials at or above this order skip the spot check (three dense
/// eigendecompositions would dominate the trial cost).
const WIELANDT_SPOT_MAX_ORDER: usize = 200;
/// Responses at the floating-point floor are excluded from log fits.
const RESPONSE_FLOOR: f64 = 1e-14;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Eigen(#[from] EigenError),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Regime(#[from] RegimeError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("need at least {need} distinct grid points with positive responses, have {have}")]
    InsufficientPoints { have: usize, need: usize },
    #[error("all responses were at or below the floating-point floor ({dropped} dropped)")]
    NonPositiveResponse { dropped: usize },
    #[error("runtime invariant violated: {0}")]
    InvariantViolation(String),
    #[error("bad experiment config: {0}")]
    BadConfig(String),
}

/// Published 64-bit finalizer (splitmix64). Normative for seed derivation so
/// results are reproducible across implementations and thread schedules.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Trial seed = mix64(master XOR mix64(grid_index * 2^61 + replicate)).
#[inline]
pub fn derive_seed(master_seed: u64, grid_index: u64, replicate: u64) -> u64 {
    mix64(master_seed ^ mix64(grid_index.wrapping_mul(1u64 << 61).wrapping_add(replicate)))
}

/// Which measures a sweep records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasureSet {
    pub eigen_ratio: bool,
    pub abs_inner: bool,
    pub inner_sq: bool,
    pub subspace_cos: bool,
}

impl Default for MeasureSet {
    fn default() -> Self {
        Self::all()
    }
}

impl MeasureSet {
    pub fn all() -> Self {
        Self {
            eigen_ratio: true,
            abs_inner: true,
            inner_sq: true,
            subspace_cos: true,
        }
    }

    pub fn from_names(names: &[String]) -> Result<Self, String> {
        let mut set = Self {
            eigen_ratio: false,
            abs_inner: false,
            inner_sq: false,
            subspace_cos: false,
        };
        for name in names {
            match name.as_str() {
                "eigen_ratio" => set.eigen_ratio = true,
                "abs_inner" => set.abs_inner = true,
                "inner_sq" => set.inner_sq = true,
                "subspace_cos" => set.subspace_cos = true,
                other => return Err(format!("unknown measure {other:?}")),
            }
        }
        Ok(set)
    }

    pub fn names(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.eigen_ratio {
            out.push("eigen_ratio");
        }
        if self.abs_inner {
            out.push("abs_inner");
        }
        if self.inner_sq {
            out.push("inner_sq");
        }
        if self.subspace_cos {
            out.push("subspace_cos");
        }
        out
    }
}

/// Full description of a Monte Carlo experiment.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub spec: SpectrumSpec,
    pub law: ScalingLaw,
    pub d_grid: Vec<usize>,
    pub replicates: usize,
    pub dist: ScoreDistribution,
    pub basis: BasisSpec,
    pub master_seed: u64,
    pub measures: MeasureSet,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn new(spec: SpectrumSpec, law: ScalingLaw, d_grid: Vec<usize>, master_seed: u64) -> Self {
        Self {
            spec,
            law,
            d_grid,
            replicates: 10,
            dist: ScoreDistribution::Gaussian,
            basis: BasisSpec::Identity,
            master_seed,
            measures: MeasureSet::all(),
            output_dir: PathBuf::from("out"),
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.spec
            .validate()
            .map_err(|e| HarnessError::BadConfig(e.to_string()))?;
        if self.replicates == 0 {
            return Err(HarnessError::BadConfig("replicates must be >= 1".into()));
        }
        if self.d_grid.is_empty() {
            return Err(HarnessError::BadConfig("d_grid must be nonempty".into()));
        }
        for pair in self.d_grid.windows(2) {
            if pair[0] >= pair[1] {
                return Err(HarnessError::BadConfig(
                    "d_grid must be strictly increasing".into(),
                ));
            }
        }
        if self.d_grid[0] < 2 {
            return Err(HarnessError::BadConfig("every d must be at least 2".into()));
        }
        if let Some(n) = self.law.fixed_n {
            if n < 2 {
                return Err(HarnessError::BadConfig("fixed_n must be at least 2".into()));
            }
        }
        Ok(())
    }
}

/// Per-replicate measurements for one synthesized dataset.
///
/// Equality compares results only; `wall_ms` is observability, not part of
/// the deterministic result set.
#[derive(Debug, Clone, Serialize)]
pub struct TrialRecord {
    pub d: usize,
    pub n: usize,
    pub replicate: usize,
    pub seed: u64,
    pub path: &'static str,
    pub wall_ms: f64,
    pub measures: Vec<ConsistencyMeasures>,
}

impl PartialEq for TrialRecord {
    fn eq(&self, other: &Self) -> bool {
        self.d == other.d
            && self.n == other.n
            && self.replicate == other.replicate
            && self.seed == other.seed
            && self.path == other.path
            && self.measures == other.measures
    }
}

/// Coordinates and message of a failed trial.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TrialFailure {
    pub d: usize,
    pub replicate: usize,
    pub message: String,
}

/// Mean and standard error of one measure at one (d, index) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub d: usize,
    pub n: usize,
    pub index: usize,
    pub measure: &'static str,
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
}

/// Outcome of a sweep: successful records in deterministic (d, replicate)
/// order, failures with their coordinates, and per-(d, index) aggregates.
#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub records: Vec<TrialRecord>,
    pub failures: Vec<TrialFailure>,
    pub aggregates: Vec<AggregateRow>,
}

/// Ordinary least squares fit of log mean response against log predicted
/// rate, plus the empirical O-constant max_d response/rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
    pub o_constant: f64,
    pub dropped: usize,
}

/// Runs one seeded trial: synthesizes a dataset, eigendecomposes through the
/// cheaper path (dual when n < d/4), and measures the configured quantities
/// against the known population structure.
pub fn run_trial(
    config: &ExperimentConfig,
    d: usize,
    replicate: usize,
) -> Result<TrialRecord, HarnessError> {
    let grid_index = config
        .d_grid
        .iter()
        .position(|x| *x == d)
        .ok_or_else(|| HarnessError::BadConfig(format!("d={d} is not on the grid")))?;
    let seed = derive_seed(config.master_seed, grid_index as u64, replicate as u64);
    let start = Instant::now();

    let dataset = synthesize(&config.spec, &config.law, d, config.dist, &config.basis, seed)?;
    let n = dataset.sample_size();
    let eigen = if n * 4 < d {
        dual_eigen(&dataset.x.view())?
    } else {
        sym_eigen(&sample_cov(&dataset.x.view())?)?
    };

    let measures = collect_measures(config, d, &dataset, &eigen)?;
    wielandt_spot_check(&config.spec, &dataset, seed).map_err(|e| {
        HarnessError::InvariantViolation(format!("trial d={d} replicate={replicate}: {e}"))
    })?;

    Ok(TrialRecord {
        d,
        n,
        replicate,
        seed,
        path: eigen.path.as_str(),
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
        measures,
    })
}

fn collect_measures(
    config: &ExperimentConfig,
    d: usize,
    dataset: &Dataset,
    eigen: &EigenResult,
) -> Result<Vec<ConsistencyMeasures>, HarnessError> {
    let tiers = config.spec.tier_index(d)?;
    let m = tiers.spike_count();
    let d_eff = config.spec.effective_dimension(d);
    let rank_bound = dataset.sample_size().min(d_eff).min(eigen.values.len());
    let want = config.measures;

    let mut indices: Vec<usize> = (0..m.min(rank_bound)).collect();
    // Noise spot indices: the first two past the spikes and the last within
    // the rank bound. The noise statements are uniform, so spots suffice.
    for cand in [m, m + 1, rank_bound.saturating_sub(1)] {
        if cand >= m && cand < rank_bound && !indices.contains(&cand) {
            indices.push(cand);
        }
    }
    indices.sort_unstable();

    let mut out = Vec::with_capacity(indices.len());
    for j in indices {
        let tier = tiers.tier_of(j).expect("tier sets cover 0..d");
        let is_spike = j < m;
        let lambda = dataset.spectrum[j];

        let eigen_ratio = (want.eigen_ratio && lambda > 0.0).then(|| eigen.values[j] / lambda);

        let mut abs_inner = None;
        let mut inner_sq = None;
        let mut subspace_cos = None;
        let mut subspace_cos_sq = None;
        if let Some(v) = eigen.vector(j) {
            if is_spike && (want.abs_inner || want.inner_sq) {
                let u = dataset.basis.column(d, j);
                let ai = metrics::abs_inner(&v, &u.view())?;
                if want.abs_inner {
                    abs_inner = Some(ai);
                }
                if want.inner_sq {
                    inner_sq = Some(ai * ai);
                }
            }
            if want.subspace_cos {
                let angle = metrics::subspace_cos(&v, tiers.set(tier), &dataset.basis)?;
                subspace_cos = Some(angle.cos);
                subspace_cos_sq = Some(angle.cos_sq);
            }
        }

        out.push(ConsistencyMeasures {
            index: j,
            tier,
            is_spike,
            eigen_ratio,
            abs_inner,
            inner_sq,
            subspace_cos,
            subspace_cos_sq,
        });
    }
    Ok(out)
}

/// On a deterministic one-in-twenty subset of small trials, splits the dual
/// matrix into its spike and noise parts and verifies the eigenvalue
/// sandwich at every rank.
fn wielandt_spot_check(
    spec: &SpectrumSpec,
    dataset: &Dataset,
    seed: u64,
) -> Result<(), HarnessError> {
    let d = dataset.dim();
    let n = dataset.sample_size();
    if d > WIELANDT_SPOT_MAX_ORDER || n > WIELANDT_SPOT_MAX_ORDER {
        return Ok(());
    }
    if mix64(seed ^ WIELANDT_SPOT_SALT) % WIELANDT_SPOT_DIVISOR != 0 {
        return Ok(());
    }
    let Some(scores) = dataset.scores.as_ref() else {
        return Ok(());
    };
    let m = spec.tier_index(d)?.spike_count();

    let weighted = |range: std::ops::Range<usize>| -> Result<SymMatrix, HarnessError> {
        let mut block = scores.slice(s![range.clone(), ..]).to_owned();
        for (offset, j) in range.enumerate() {
            let w = dataset.spectrum[j].sqrt();
            for v in block.row_mut(offset) {
                *v *= w;
            }
        }
        let sym = block.t().dot(&block) / n as f64;
        Ok(SymMatrix::new(sym)?)
    };
    let a = weighted(0..m)?;
    let b = weighted(m..d)?;

    for (j, bounds) in wielandt_check_all(&a, &b)?.iter().enumerate() {
        if !bounds.holds {
            return Err(HarnessError::InvariantViolation(format!(
                "eigenvalue sandwich violated at rank {j}: {} not in [{}, {}]",
                bounds.observed, bounds.lower, bounds.upper
            )));
        }
    }
    Ok(())
}

/// Runs every (d, replicate) trial of the config, in parallel. Successful
/// records come back in (d, replicate) order regardless of schedule; failed
/// trials are reported with their exact coordinates.
pub fn sweep(config: &ExperimentConfig) -> Result<SweepOutcome, HarnessError> {
    config.validate()?;
    let mut pairs = Vec::with_capacity(config.d_grid.len() * config.replicates);
    for (gi, &d) in config.d_grid.iter().enumerate() {
        for rep in 0..config.replicates {
            pairs.push((gi, d, rep));
        }
    }
    let mut results: Vec<(usize, usize, Result<TrialRecord, HarnessError>)> = pairs
        .par_iter()
        .map(|&(gi, d, rep)| (gi, rep, run_trial(config, d, rep)))
        .collect();
    results.sort_by_key(|(gi, rep, _)| (*gi, *rep));

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (gi, rep, outcome) in results {
        match outcome {
            Ok(record) => records.push(record),
            Err(err) => failures.push(TrialFailure {
                d: config.d_grid[gi],
                replicate: rep,
                message: err.to_string(),
            }),
        }
    }
    let aggregates = aggregate(&records);
    Ok(SweepOutcome {
        records,
        failures,
        aggregates,
    })
}

/// Mean and standard error per (d, index, measure), in deterministic order.
pub fn aggregate(records: &[TrialRecord]) -> Vec<AggregateRow> {
    let mut cells: BTreeMap<(usize, usize, &'static str), (usize, Vec<f64>)> = BTreeMap::new();
    for record in records {
        for row in &record.measures {
            for (name, value) in [
                ("abs_inner", row.abs_inner),
                ("eigen_ratio", row.eigen_ratio),
                ("inner_sq", row.inner_sq),
                ("subspace_cos", row.subspace_cos),
            ] {
                if let Some(v) = value {
                    cells
                        .entry((record.d, row.index, name))
                        .or_insert_with(|| (record.n, Vec::new()))
                        .1
                        .push(v);
                }
            }
        }
    }
    cells
        .into_iter()
        .map(|((d, index, measure), (n, values))| {
            let count = values.len();
            let mean = values.iter().sum::<f64>() / count as f64;
            let stderr = if count > 1 {
                let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                    / (count - 1) as f64;
                (var / count as f64).sqrt()
            } else {
                0.0
            };
            AggregateRow {
                d,
                n,
                index,
                measure,
                mean,
                stderr,
                count,
            }
        })
        .collect()
}

/// OLS slope of log mean response against log predicted rate across the
/// d-grid. Slope near 1 means the predicted rate is sharp; the returned
/// O-constant is the largest observed response/rate ratio.
///
/// Responses at the floating-point floor are dropped (and counted) before
/// averaging, so they cannot leverage the fit to minus infinity.
pub fn fit_rate<F>(
    records: &[TrialRecord],
    rates: &[(usize, f64)],
    response: F,
) -> Result<RateFit, HarnessError>
where
    F: Fn(&TrialRecord) -> Option<f64>,
{
    let mut dropped = 0usize;
    let mut groups: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let rate_of: BTreeMap<usize, f64> = rates.iter().copied().collect();
    let mut seen_any = false;
    for record in records {
        if !rate_of.contains_key(&record.d) {
            continue;
        }
        if let Some(v) = response(record) {
            seen_any = true;
            if v <= RESPONSE_FLOOR {
                dropped += 1;
            } else {
                groups.entry(record.d).or_default().push(v);
            }
        }
    }
    if groups.is_empty() {
        if seen_any {
            return Err(HarnessError::NonPositiveResponse { dropped });
        }
        return Err(HarnessError::InsufficientPoints { have: 0, need: 3 });
    }
    if groups.len() < 3 {
        return Err(HarnessError::InsufficientPoints {
            have: groups.len(),
            need: 3,
        });
    }

    let mut xs = Vec::with_capacity(groups.len());
    let mut ys = Vec::with_capacity(groups.len());
    let mut o_constant: f64 = 0.0;
    for (d, values) in &groups {
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let rate = rate_of[d];
        xs.push(rate.ln());
        ys.push(mean.ln());
        o_constant = o_constant.max(mean / rate);
    }

    let n_points = xs.len();
    let nf = n_points as f64;
    let x_bar = xs.iter().sum::<f64>() / nf;
    let y_bar = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - x_bar) * (x - x_bar)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(ys.iter())
        .map(|(x, y)| (x - x_bar) * (y - y_bar))
        .sum();
    if sxx == 0.0 {
        return Err(HarnessError::BadConfig(
            "predicted rates are constant across the grid; nothing to regress".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = y_bar - slope * x_bar;
    let ss_tot: f64 = ys.iter().map(|y| (y - y_bar) * (y - y_bar)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(ys.iter())
        .map(|(x, y)| {
            let fit = intercept + slope * x;
            (y - fit) * (y - fit)
        })
        .sum();
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };

    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        n_points,
        o_constant,
        dropped,
    })
}

/// Mean squared inner product of the first sample and population
/// eigenvectors over an (alpha, gamma) grid, with the symbolic region label
/// attached to each node. Rows are gamma-descending, columns alpha-ascending.
#[derive(Debug, Clone)]
pub struct PhaseDiagram {
    pub alphas: Vec<f64>,
    /// Gamma values in descending order, one per row.
    pub gammas: Vec<f64>,
    pub mean_inner_sq: Vec<Vec<f64>>,
    pub labels: Vec<Vec<RegimeLabel>>,
    pub d: usize,
    pub replicates: usize,
}

/// Runs the single-spike phase-diagram experiment: at each (alpha, gamma)
/// node, synthesizes `replicates` datasets at dimension `d` and averages the
/// squared inner product of the leading eigenvector pair.
pub fn phase_diagram(
    alpha_grid: &[f64],
    gamma_grid: &[f64],
    d: usize,
    replicates: usize,
    master_seed: u64,
) -> Result<PhaseDiagram, HarnessError> {
    if alpha_grid.is_empty() || gamma_grid.is_empty() {
        return Err(HarnessError::BadConfig("empty phase grid".into()));
    }
    if replicates == 0 {
        return Err(HarnessError::BadConfig("replicates must be >= 1".into()));
    }
    let mut gammas = gamma_grid.to_vec();
    gammas.sort_by(|a, b| b.partial_cmp(a).expect("finite gamma"));
    let alphas = alpha_grid.to_vec();

    let labels = region_grid(&alphas, &gammas, &SpectrumSpec::single_spike(0.0))?;

    let ncols = alphas.len();
    let mut tasks = Vec::with_capacity(gammas.len() * ncols * replicates);
    for (row, &gamma) in gammas.iter().enumerate() {
        for (col, &alpha) in alphas.iter().enumerate() {
            let node = (row * ncols + col) as u64;
            for rep in 0..replicates {
                tasks.push((row, col, alpha, gamma, node, rep));
            }
        }
    }

    let mut outcomes: Vec<(usize, usize, usize, Result<f64, HarnessError>)> = tasks
        .par_iter()
        .map(|&(row, col, alpha, gamma, node, rep)| {
            let value = phase_node_inner_sq(alpha, gamma, d, node, rep, master_seed);
            (row, col, rep, value)
        })
        .collect();
    outcomes.sort_by_key(|(row, col, rep, _)| (*row, *col, *rep));

    let mut sums = vec![vec![0.0f64; ncols]; gammas.len()];
    for (row, col, _rep, value) in outcomes {
        sums[row][col] += value?;
    }
    let mean_inner_sq: Vec<Vec<f64>> = sums
        .into_iter()
        .map(|row| row.into_iter().map(|s| s / replicates as f64).collect())
        .collect();

    Ok(PhaseDiagram {
        alphas,
        gammas,
        mean_inner_sq,
        labels,
        d,
        replicates,
    })
}

fn phase_node_inner_sq(
    alpha: f64,
    gamma: f64,
    d: usize,
    node: u64,
    rep: usize,
    master_seed: u64,
) -> Result<f64, HarnessError> {
    let spec = SpectrumSpec::single_spike(alpha);
    let law = ScalingLaw::growing(gamma);
    let seed = derive_seed(master_seed, node, rep as u64);
    let dataset = synthesize(&spec, &law, d, ScoreDistribution::Gaussian, &BasisSpec::Identity, seed)?;
    let n = dataset.sample_size();
    let eigen = if n * 4 < d {
        dual_eigen(&dataset.x.view())?
    } else {
        sym_eigen(&sample_cov(&dataset.x.view())?)?
    };
    let v = eigen.vector(0).ok_or_else(|| {
        HarnessError::InvariantViolation("leading eigenvector missing".into())
    })?;
    let inner = dataset.basis.inner(&v, 0).abs().clamp(0.0, 1.0);
    Ok(inner * inner)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> ExperimentConfig {
        let mut config = ExperimentConfig::new(
            SpectrumSpec::single_spike(1.0),
            ScalingLaw::growing(0.5),
            vec![20, 40, 60],
            7,
        );
        config.replicates = 5;
        config
    }

    #[test]
    fn mix64_is_a_bijection_probe() {
        // Distinct inputs must keep distinct outputs (spot check).
        let mut seen = std::collections::HashSet::new();
        for i in 0..10_000u64 {
            assert!(seen.insert(mix64(i)));
        }
    }

    #[test]
    fn seed_derivation_separates_coordinates() {
        let a = derive_seed(1, 0, 0);
        let b = derive_seed(1, 0, 1);
        let c = derive_seed(1, 1, 0);
        let d = derive_seed(2, 0, 0);
        assert!(a != b && a != c && a != d && b != c);
        assert_eq!(derive_seed(1, 0, 0), a);
    }

    #[test]
    fn flat_spectrum_trial_has_unit_ratios() {
        let mut config = ExperimentConfig::new(
            SpectrumSpec::single_spike(0.0),
            ScalingLaw::fixed(20),
            vec![20],
            3,
        );
        config.replicates = 1;
        let record = run_trial(&config, 20, 0).unwrap();
        assert_eq!(record.n, 20);
        // Square aspect: sample-to-population ratios live on a bounded bulk
        // around 1 with no preferred direction.
        for row in &record.measures {
            let ratio = row.eigen_ratio.unwrap();
            assert!((0.0..6.0).contains(&ratio), "isotropic ratio out of bulk: {ratio}");
        }
        let top = record.measures[0].eigen_ratio.unwrap();
        assert!(top > 0.5, "leading isotropic ratio collapsed: {top}");
    }

    #[test]
    fn deep_hdlss_trial_is_consistent() {
        let mut config = ExperimentConfig::new(
            SpectrumSpec::single_spike(2.0),
            ScalingLaw::fixed(10),
            vec![1000],
            3,
        );
        config.replicates = 2;
        let record = run_trial(&config, 1000, 0).unwrap();
        assert_eq!(record.path, "dual");
        let spike = &record.measures[0];
        let sq = spike.inner_sq.unwrap();
        assert!(sq > 0.8, "deep-consistency inner_sq {sq}");
    }

    #[test]
    fn trials_are_deterministic() {
        let config = small_config();
        let a = run_trial(&config, 40, 2).unwrap();
        let b = run_trial(&config, 40, 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sweep_cardinality_and_order() {
        let config = small_config();
        let outcome = sweep(&config).unwrap();
        assert_eq!(outcome.records.len(), 15);
        assert!(outcome.failures.is_empty());
        let coords: Vec<(usize, usize)> = outcome
            .records
            .iter()
            .map(|r| (r.d, r.replicate))
            .collect();
        let mut sorted = coords.clone();
        sorted.sort();
        assert_eq!(coords, sorted);
    }

    #[test]
    fn sweep_is_schedule_independent() {
        let config = small_config();
        let serial = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| sweep(&config))
            .unwrap();
        let parallel = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| sweep(&config))
            .unwrap();
        assert_eq!(serial.records, parallel.records);
        assert_eq!(serial.aggregates, parallel.aggregates);
    }

    #[test]
    fn sweep_reports_failure_coordinates() {
        // d = 3 cannot hold 3 spikes plus a base entry; d = 24 can.
        let mut config = ExperimentConfig::new(
            SpectrumSpec::multi_spike(1.0, vec![8.0, 4.0, 2.0]),
            ScalingLaw::growing(0.5),
            vec![3, 24],
            1,
        );
        config.replicates = 2;
        let outcome = sweep(&config).unwrap();
        assert_eq!(outcome.records.len(), 2);
        assert_eq!(outcome.failures.len(), 2);
        for (rep, failure) in outcome.failures.iter().enumerate() {
            assert_eq!(failure.d, 3);
            assert_eq!(failure.replicate, rep);
        }
    }

    #[test]
    fn nonzero_count_bounded_by_rank() {
        let mut config = ExperimentConfig::new(
            SpectrumSpec::single_spike(1.0),
            ScalingLaw::fixed(5),
            vec![40],
            3,
        );
        config.replicates = 1;
        let record = run_trial(&config, 40, 0).unwrap();
        assert!(record.measures.iter().all(|r| r.index < 5));
        for row in &record.measures {
            if let Some(ratio) = row.eigen_ratio {
                assert!(ratio > 0.0);
            }
        }
    }

    #[test]
    fn fit_rate_recovers_exact_power_laws() {
        let config = small_config();
        let records = sweep(&config).unwrap().records;
        // Synthetic response equal to the rate itself: slope 1, r^2 = 1.
        let rates: Vec<(usize, f64)> = config
            .d_grid
            .iter()
            .map(|&d| (d, (d as f64).powf(-0.5)))
            .collect();
        let fit = fit_rate(&records, &rates, |r| Some((r.d as f64).powf(-0.5))).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert!((fit.o_constant - 1.0).abs() < 1e-12);
        // Response = rate^2: slope 2.
        let fit = fit_rate(&records, &rates, |r| Some((r.d as f64).powf(-1.0))).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
    }

    #[test]
    fn fit_rate_needs_three_points() {
        let config = small_config();
        let records = sweep(&config).unwrap().records;
        let rates = vec![(20usize, 0.5), (40usize, 0.25)];
        assert!(matches!(
            fit_rate(&records, &rates, |r| Some(r.d as f64)),
            Err(HarnessError::InsufficientPoints { have: 2, need: 3 })
        ));
    }

    #[test]
    fn fit_rate_drops_floor_responses() {
        let config = small_config();
        let records = sweep(&config).unwrap().records;
        let rates: Vec<(usize, f64)> = config.d_grid.iter().map(|&d| (d, d as f64)).collect();
        let err = fit_rate(&records, &rates, |_| Some(1e-20)).unwrap_err();
        assert!(matches!(err, HarnessError::NonPositiveResponse { dropped: 15 }));
    }

    #[test]
    fn consistency_gap_shrinks_along_grid() {
        // Monotone coherence: mean gap nonincreasing up to two standard errors.
        let mut config = ExperimentConfig::new(
            SpectrumSpec::single_spike(1.0),
            ScalingLaw::growing(0.75),
            vec![50, 100, 200],
            11,
        );
        config.replicates = 5;
        let outcome = sweep(&config).unwrap();
        let mut stats: Vec<(f64, f64)> = Vec::new();
        for &d in &config.d_grid {
            let gaps: Vec<f64> = outcome
                .records
                .iter()
                .filter(|r| r.d == d)
                .map(|r| 1.0 - r.measures[0].abs_inner.unwrap())
                .collect();
            let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
            let var = gaps.iter().map(|g| (g - mean) * (g - mean)).sum::<f64>()
                / (gaps.len() - 1) as f64;
            stats.push((mean, (var / gaps.len() as f64).sqrt()));
        }
        for pair in stats.windows(2) {
            let (m0, s0) = pair[0];
            let (m1, s1) = pair[1];
            assert!(
                m1 <= m0 + 2.0 * (s0 + s1),
                "gap grew beyond noise: {m0}±{s0} -> {m1}±{s1}"
            );
        }
    }

    #[test]
    fn phase_diagram_shape_and_extremes() {
        let diagram = phase_diagram(&[0.0, 2.0], &[0.0, 1.0], 60, 3, 5).unwrap();
        assert_eq!(diagram.gammas, vec![1.0, 0.0]);
        assert_eq!(diagram.mean_inner_sq.len(), 2);
        assert_eq!(diagram.mean_inner_sq[0].len(), 2);
        // Deep grey corner (alpha 2, gamma 1) vs deep white corner (0, 0).
        assert!(diagram.mean_inner_sq[0][1] > 0.85);
        assert!(diagram.mean_inner_sq[1][0] < 0.15);
        // Overlay matches the symbolic grid.
        let expected = region_grid(&diagram.alphas, &diagram.gammas, &SpectrumSpec::single_spike(0.0))
            .unwrap();
        assert_eq!(diagram.labels, expected);
    }
}
