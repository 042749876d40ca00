//! Theorem-driven classification of a model configuration into consistency,
//! subspace-consistency, strong-inconsistency, and boundary regions, per
//! eigenvector index.
//!
//! Classification is exponent-symbolic: for power-law spectra and sample
//! growth, every governing ratio is d raised to a known exponent, so the
//! region is the sign of that exponent. No finite-d thresholding is involved.

use crate::spike_model::{ScalingLaw, SpectrumKind, SpectrumSpec, TierIndex};
use serde::Serialize;
use std::fmt;
use std::ops::Range;
use thiserror::Error;

/// Tolerance for deciding that an exponent sits exactly on a boundary.
/// Absorbs float round-off in sums like alpha + gamma.
const EXPONENT_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum RegimeError {
    #[error("unsupported spec for symbolic classification: {0}")]
    UnsupportedSpec(String),
}

/// Asymptotic family governing which theorem clauses apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AsymptoticFamily {
    /// Sample size grows with the dimension (gamma > 0).
    GrowingN,
    /// Sample size is pinned while the dimension grows (the HDLSS domain).
    FixedN,
}

/// How d/n behaves along the path, for growing-n clauses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DimRegime {
    /// d/n -> 0 (gamma > 1).
    SampleDominated,
    /// d/n -> infinity (gamma < 1).
    DimensionDominated,
    /// d/n tends to a nonzero constant (gamma = 1); rate statements here are
    /// approximate.
    Proportional,
}

/// Region label for one eigenvector index (or one tier).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RegimeLabel {
    Consistent,
    SubspaceConsistent(usize),
    StronglyInconsistent,
    Boundary,
}

impl RegimeLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegimeLabel::Consistent => "consistent",
            RegimeLabel::SubspaceConsistent(_) => "subspace_consistent",
            RegimeLabel::StronglyInconsistent => "strongly_inconsistent",
            RegimeLabel::Boundary => "boundary",
        }
    }
}

impl fmt::Display for RegimeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegimeLabel::SubspaceConsistent(l) => write!(f, "subspace_consistent(tier {l})"),
            other => f.write_str(other.as_str()),
        }
    }
}

/// One spike tier under the active asymptotic family.
#[derive(Debug, Clone, Serialize)]
pub struct TierRegime {
    /// 0-based tier number.
    pub tier: usize,
    /// 0-based index range of the eigenvalues in this tier.
    pub indices: Range<usize>,
    /// Growth exponent of the tier's eigenvalues.
    pub exponent: f64,
    /// Exponent of the governing ratio (d/(n lambda) or d/lambda); its sign
    /// decides the region.
    pub governing_exponent: f64,
    pub label: RegimeLabel,
}

/// Classification of a configuration: per-tier and per-index labels plus the
/// collective label for the noise block.
#[derive(Debug, Clone, Serialize)]
pub struct RegimeReport {
    pub family: AsymptoticFamily,
    /// d/n profile; only meaningful for the growing-n family.
    pub dim_regime: Option<DimRegime>,
    pub gamma: f64,
    pub tiers: Vec<TierRegime>,
    pub spike_count: usize,
    pub noise_label: RegimeLabel,
}

impl RegimeReport {
    /// Label for eigenvector index `j` (0-based).
    pub fn label_for(&self, j: usize) -> RegimeLabel {
        for t in &self.tiers {
            if t.indices.contains(&j) {
                return t.label;
            }
        }
        self.noise_label
    }

    /// Tier regime containing index `j`, if `j` is a spike index.
    pub fn tier_for(&self, j: usize) -> Option<&TierRegime> {
        self.tiers.iter().find(|t| t.indices.contains(&j))
    }

    /// Tier index sets over dimension `d`, matching the family's tier
    /// structure (order-merged tiers under fixed n).
    pub fn tier_index(&self, d: usize) -> TierIndex {
        let mut sets: Vec<Range<usize>> = self.tiers.iter().map(|t| t.indices.clone()).collect();
        sets.push(self.spike_count..d);
        TierIndex::from_ranges(sets)
    }
}

/// Per-tier exponent structure of a power-law spec, under the tier notion the
/// family needs: tiers by limit for growing n (distinct multi-spike constants
/// stay separate), tiers by order for fixed n (equal exponents merge).
fn family_tiers(
    spec: &SpectrumSpec,
    family: AsymptoticFamily,
) -> Result<Vec<(f64, usize)>, RegimeError> {
    let raw: Vec<(f64, usize)> = match &spec.kind {
        SpectrumKind::SingleSpike { alpha } => vec![(*alpha, 1)],
        SpectrumKind::MultiSpike { alpha, constants } => {
            constants.iter().map(|_| (*alpha, 1)).collect()
        }
        SpectrumKind::Tiered { tiers } => {
            tiers.iter().map(|t| (t.exponent, t.multiplicity)).collect()
        }
        SpectrumKind::Explicit { .. } => {
            return Err(RegimeError::UnsupportedSpec(
                "explicit spectra carry no exponent structure".into(),
            ))
        }
    };
    match family {
        AsymptoticFamily::GrowingN => Ok(raw),
        AsymptoticFamily::FixedN => {
            // With n fixed, only the order of magnitude separates eigenvalues:
            // tiers with equal exponents collapse into one.
            let mut merged: Vec<(f64, usize)> = Vec::new();
            for (e, q) in raw {
                match merged.last_mut() {
                    Some((le, lq)) if (*le - e).abs() <= EXPONENT_TOL => *lq += q,
                    _ => merged.push((e, q)),
                }
            }
            Ok(merged)
        }
    }
}

/// Classifies a power-law configuration into its consistency regions.
///
/// Growing n: the sign of 1 - gamma - exponent decides each tier; singleton
/// tiers land in individual consistency, wider tiers in subspace consistency.
/// Fixed n: the sign of 1 - exponent decides, with equal-order spikes merged
/// into one subspace-consistent tier. Noise-block indices are collectively
/// strongly inconsistent. Zero population eigenvalues are handled upstream by
/// the effective dimension, which leaves power-law exponents unchanged.
pub fn classify(spec: &SpectrumSpec, law: &ScalingLaw) -> Result<RegimeReport, RegimeError> {
    spec.validate()
        .map_err(|e| RegimeError::UnsupportedSpec(e.to_string()))?;
    let family = if law.is_fixed_n() {
        AsymptoticFamily::FixedN
    } else {
        AsymptoticFamily::GrowingN
    };
    let gamma = law.gamma;
    let tiers_exp = family_tiers(spec, family)?;

    let dim_regime = match family {
        AsymptoticFamily::FixedN => None,
        AsymptoticFamily::GrowingN => Some(if (gamma - 1.0).abs() <= EXPONENT_TOL {
            DimRegime::Proportional
        } else if gamma > 1.0 {
            DimRegime::SampleDominated
        } else {
            DimRegime::DimensionDominated
        }),
    };

    let mut tiers = Vec::with_capacity(tiers_exp.len());
    let mut at = 0usize;
    for (l, (exponent, mult)) in tiers_exp.iter().enumerate() {
        let governing = match family {
            AsymptoticFamily::GrowingN => 1.0 - gamma - exponent,
            AsymptoticFamily::FixedN => 1.0 - exponent,
        };
        let label = if governing.abs() <= EXPONENT_TOL {
            RegimeLabel::Boundary
        } else if governing < 0.0 {
            if *mult == 1 {
                RegimeLabel::Consistent
            } else {
                RegimeLabel::SubspaceConsistent(l)
            }
        } else {
            RegimeLabel::StronglyInconsistent
        };
        tiers.push(TierRegime {
            tier: l,
            indices: at..at + mult,
            exponent: *exponent,
            governing_exponent: governing,
            label,
        });
        at += mult;
    }

    Ok(RegimeReport {
        family,
        dim_regime,
        gamma,
        tiers,
        spike_count: at,
        noise_label: RegimeLabel::StronglyInconsistent,
    })
}

/// Classification of the first spike over an (alpha, gamma) grid.
///
/// Rows are gamma values in descending order (for rendering with gamma
/// increasing upward); columns are alpha values in the given order. The
/// template's alpha is replaced node by node, so it must be an
/// alpha-parameterized spec (single- or multi-spike).
pub fn region_grid(
    alpha_values: &[f64],
    gamma_values: &[f64],
    spec_template: &SpectrumSpec,
) -> Result<Vec<Vec<RegimeLabel>>, RegimeError> {
    if alpha_values.is_empty() || gamma_values.is_empty() {
        return Err(RegimeError::UnsupportedSpec("empty grid".into()));
    }
    let mut gammas: Vec<f64> = gamma_values.to_vec();
    gammas.sort_by(|a, b| b.partial_cmp(a).expect("finite gamma"));

    let mut rows = Vec::with_capacity(gammas.len());
    for &g in &gammas {
        let mut row = Vec::with_capacity(alpha_values.len());
        for &a in alpha_values {
            let spec = with_alpha(spec_template, a)?;
            let law = ScalingLaw::growing(g);
            let report = classify(&spec, &law)?;
            row.push(report.label_for(0));
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Clones the template with its spike growth exponent replaced.
pub fn with_alpha(template: &SpectrumSpec, alpha: f64) -> Result<SpectrumSpec, RegimeError> {
    let mut spec = template.clone();
    match &mut spec.kind {
        SpectrumKind::SingleSpike { alpha: a } => *a = alpha,
        SpectrumKind::MultiSpike { alpha: a, .. } => *a = alpha,
        _ => {
            return Err(RegimeError::UnsupportedSpec(
                "grid templates must be alpha-parameterized (single or multi spike)".into(),
            ))
        }
    }
    Ok(spec)
}
