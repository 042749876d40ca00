//! Declarative population spectrum construction for single, multiple-distinct,
//! and tiered spike models, plus tier index sets and gap ratios.

use serde::{Deserialize, Serialize};
use std::ops::Range;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpectrumError {
    #[error("spikes plus zero tail do not fit in dimension {d}: {spikes} spikes, {zero_tail} zeros")]
    SpecTooLarge { spikes: usize, zero_tail: usize, d: usize },
    #[error("spectrum is not nonincreasing: {0}")]
    NotMonotone(String),
    #[error("division by a zero tier representative")]
    ZeroDivision,
    #[error("invalid spectrum spec: {0}")]
    InvalidSpec(String),
}

/// One tier of a tiered spectrum: `multiplicity` eigenvalues growing as
/// d^exponent times the base level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tier {
    pub exponent: f64,
    pub multiplicity: usize,
}

/// Shape of the population eigenvalue ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpectrumKind {
    /// One spike growing as d^alpha over a flat base.
    SingleSpike { alpha: f64 },
    /// m spikes c_j * d^alpha with constants c_1 > c_2 > ... > 1.
    MultiSpike { alpha: f64, constants: Vec<f64> },
    /// Groups of equal eigenvalues with strictly decreasing growth exponents.
    Tiered { tiers: Vec<Tier> },
    /// Leading eigenvalues given literally; the remainder is filled with the
    /// base level.
    Explicit { values: Vec<f64> },
}

/// Declarative description of the population eigenvalue ladder.
///
/// `base_level` is the common level of the non-spike eigenvalues (default 1).
/// `zero_tail` forces that many trailing eigenvalues to exactly zero, which
/// shrinks the effective dimension seen by the regime classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSpec {
    #[serde(flatten)]
    pub kind: SpectrumKind,
    #[serde(default = "default_base_level")]
    pub base_level: f64,
    #[serde(default)]
    pub zero_tail: usize,
}

fn default_base_level() -> f64 {
    1.0
}

impl SpectrumSpec {
    pub fn single_spike(alpha: f64) -> Self {
        Self {
            kind: SpectrumKind::SingleSpike { alpha },
            base_level: 1.0,
            zero_tail: 0,
        }
    }

    pub fn multi_spike(alpha: f64, constants: Vec<f64>) -> Self {
        Self {
            kind: SpectrumKind::MultiSpike { alpha, constants },
            base_level: 1.0,
            zero_tail: 0,
        }
    }

    /// Multi-spike with the default constants c_j = 2^(m-j+1), which satisfy
    /// c_j > c_{j+1} > 1.
    pub fn multi_spike_default_constants(alpha: f64, m: usize) -> Self {
        let constants = (0..m).map(|j| 2f64.powi((m - j) as i32)).collect();
        Self::multi_spike(alpha, constants)
    }

    pub fn tiered(tiers: Vec<Tier>) -> Self {
        Self {
            kind: SpectrumKind::Tiered { tiers },
            base_level: 1.0,
            zero_tail: 0,
        }
    }

    pub fn explicit(values: Vec<f64>) -> Self {
        Self {
            kind: SpectrumKind::Explicit { values },
            base_level: 1.0,
            zero_tail: 0,
        }
    }

    pub fn with_base_level(mut self, base_level: f64) -> Self {
        self.base_level = base_level;
        self
    }

    pub fn with_zero_tail(mut self, zero_tail: usize) -> Self {
        self.zero_tail = zero_tail;
        self
    }

    /// Number of leading eigenvalues treated as spikes.
    pub fn spike_count(&self) -> usize {
        match &self.kind {
            SpectrumKind::SingleSpike { .. } => 1,
            SpectrumKind::MultiSpike { constants, .. } => constants.len(),
            SpectrumKind::Tiered { tiers } => tiers.iter().map(|t| t.multiplicity).sum(),
            SpectrumKind::Explicit { values } => values.len(),
        }
    }

    /// Checks the structural invariants that do not depend on the dimension.
    pub fn validate(&self) -> Result<(), SpectrumError> {
        if !(self.base_level > 0.0) || !self.base_level.is_finite() {
            return Err(SpectrumError::InvalidSpec(format!(
                "base_level must be a positive real, got {}",
                self.base_level
            )));
        }
        match &self.kind {
            SpectrumKind::SingleSpike { alpha } => {
                if !(*alpha >= 0.0) {
                    return Err(SpectrumError::InvalidSpec(format!(
                        "alpha must be >= 0, got {alpha}"
                    )));
                }
            }
            SpectrumKind::MultiSpike { alpha, constants } => {
                if !(*alpha >= 0.0) {
                    return Err(SpectrumError::InvalidSpec(format!(
                        "alpha must be >= 0, got {alpha}"
                    )));
                }
                if constants.is_empty() {
                    return Err(SpectrumError::InvalidSpec(
                        "constants must be nonempty".into(),
                    ));
                }
                for pair in constants.windows(2) {
                    if !(pair[0] > pair[1]) {
                        return Err(SpectrumError::NotMonotone(format!(
                            "constants must strictly decrease, got {} then {}",
                            pair[0], pair[1]
                        )));
                    }
                }
                let last = *constants.last().expect("nonempty");
                if !(last > 1.0) {
                    return Err(SpectrumError::InvalidSpec(format!(
                        "constants must all exceed 1, got {last}"
                    )));
                }
            }
            SpectrumKind::Tiered { tiers } => {
                if tiers.is_empty() {
                    return Err(SpectrumError::InvalidSpec("tiers must be nonempty".into()));
                }
                for t in tiers {
                    if t.multiplicity == 0 {
                        return Err(SpectrumError::InvalidSpec(
                            "tier multiplicity must be >= 1".into(),
                        ));
                    }
                }
                for pair in tiers.windows(2) {
                    if !(pair[0].exponent > pair[1].exponent) {
                        return Err(SpectrumError::NotMonotone(format!(
                            "tier exponents must strictly decrease, got {} then {}",
                            pair[0].exponent, pair[1].exponent
                        )));
                    }
                }
            }
            SpectrumKind::Explicit { values } => {
                if values.is_empty() {
                    return Err(SpectrumError::InvalidSpec("values must be nonempty".into()));
                }
                if values.iter().any(|v| !(*v >= 0.0)) {
                    return Err(SpectrumError::InvalidSpec(
                        "explicit values must be nonnegative".into(),
                    ));
                }
                for pair in values.windows(2) {
                    if !(pair[0] >= pair[1]) {
                        return Err(SpectrumError::NotMonotone(format!(
                            "explicit values must be nonincreasing, got {} then {}",
                            pair[0], pair[1]
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Population eigenvalues for dimension `d`, nonincreasing, with the
    /// trailing `zero_tail` entries set to exactly zero.
    pub fn build_spectrum(&self, d: usize) -> Result<Vec<f64>, SpectrumError> {
        self.validate()?;
        self.check_fits(d)?;
        let base = self.base_level;
        let df = d as f64;
        let mut spectrum = vec![base; d];
        match &self.kind {
            SpectrumKind::SingleSpike { alpha } => {
                spectrum[0] = df.powf(*alpha);
            }
            SpectrumKind::MultiSpike { alpha, constants } => {
                for (j, c) in constants.iter().enumerate() {
                    spectrum[j] = c * df.powf(*alpha);
                }
            }
            SpectrumKind::Tiered { tiers } => {
                let mut at = 0;
                for t in tiers {
                    let level = base * df.powf(t.exponent);
                    for slot in spectrum.iter_mut().skip(at).take(t.multiplicity) {
                        *slot = level;
                    }
                    at += t.multiplicity;
                }
            }
            SpectrumKind::Explicit { values } => {
                spectrum[..values.len()].copy_from_slice(values);
            }
        }
        for slot in spectrum.iter_mut().skip(d - self.zero_tail) {
            *slot = 0.0;
        }
        for (i, pair) in spectrum.windows(2).enumerate() {
            if !(pair[0] >= pair[1]) {
                return Err(SpectrumError::NotMonotone(format!(
                    "built spectrum decreases at index {i}: {} then {}",
                    pair[0], pair[1]
                )));
            }
        }
        Ok(spectrum)
    }

    /// Index sets H_1..H_{r+1}: spike tiers followed by the remainder tier.
    /// Ranges are 0-based and partition 0..d.
    pub fn tier_index(&self, d: usize) -> Result<TierIndex, SpectrumError> {
        self.validate()?;
        self.check_fits(d)?;
        let mut sets = Vec::new();
        let mut at = 0usize;
        match &self.kind {
            SpectrumKind::SingleSpike { .. } => {
                sets.push(0..1);
                at = 1;
            }
            SpectrumKind::MultiSpike { constants, .. } => {
                // Distinct constants give distinct limits: singleton tiers.
                for j in 0..constants.len() {
                    sets.push(j..j + 1);
                }
                at = constants.len();
            }
            SpectrumKind::Tiered { tiers } => {
                for t in tiers {
                    sets.push(at..at + t.multiplicity);
                    at += t.multiplicity;
                }
            }
            SpectrumKind::Explicit { values } => {
                // Leading values above the base level are spikes; runs of
                // equal values form one tier.
                let mut j = 0;
                while j < values.len() && values[j] > self.base_level {
                    let mut k = j + 1;
                    while k < values.len() && values[k] == values[j] {
                        k += 1;
                    }
                    sets.push(j..k);
                    j = k;
                }
                at = j;
            }
        }
        sets.push(at..d);
        Ok(TierIndex { sets })
    }

    /// Dimension after removing the exactly-zero eigenvalues; the quantity
    /// all regime ratios are computed against.
    pub fn effective_dimension(&self, d: usize) -> usize {
        d.saturating_sub(self.zero_tail)
    }

    fn check_fits(&self, d: usize) -> Result<(), SpectrumError> {
        let spikes = self.spike_count();
        let too_large = match &self.kind {
            // Explicit values are the spectrum itself, so they may reach d.
            SpectrumKind::Explicit { .. } => spikes + self.zero_tail > d,
            _ => spikes + self.zero_tail >= d,
        };
        if too_large || self.zero_tail >= d {
            return Err(SpectrumError::SpecTooLarge {
                spikes,
                zero_tail: self.zero_tail,
                d,
            });
        }
        Ok(())
    }
}

/// How the sample size co-varies with the dimension: n ~ d^gamma, unless a
/// fixed sample size overrides it (the HDLSS mode).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingLaw {
    #[serde(default)]
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_n: Option<usize>,
    /// Optional dimension grid carried with the law for standalone use;
    /// experiment configs hold the authoritative grid.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub d_values: Vec<usize>,
}

impl ScalingLaw {
    pub fn growing(gamma: f64) -> Self {
        Self {
            gamma,
            fixed_n: None,
            d_values: Vec::new(),
        }
    }

    pub fn fixed(n: usize) -> Self {
        Self {
            gamma: 0.0,
            fixed_n: Some(n),
            d_values: Vec::new(),
        }
    }

    /// Sample size at dimension `d`: the fixed override if present, otherwise
    /// max(2, round(d^gamma)).
    pub fn resolve_n(&self, d: usize) -> usize {
        match self.fixed_n {
            Some(n) => n,
            None => {
                let raw = (d as f64).powf(self.gamma).round();
                (raw as usize).max(2)
            }
        }
    }

    /// True when the law pins the sample size (fixed n, or gamma = 0 which
    /// resolves to a constant).
    pub fn is_fixed_n(&self) -> bool {
        self.fixed_n.is_some() || self.gamma == 0.0
    }
}

/// Contiguous, disjoint, ordered index ranges H_1..H_{r+1} covering 0..d.
/// The last range is the non-spike remainder.
#[derive(Debug, Clone, PartialEq)]
pub struct TierIndex {
    sets: Vec<Range<usize>>,
}

impl TierIndex {
    pub fn from_ranges(sets: Vec<Range<usize>>) -> Self {
        Self { sets }
    }

    pub fn sets(&self) -> &[Range<usize>] {
        &self.sets
    }

    pub fn set(&self, l: usize) -> Range<usize> {
        self.sets[l].clone()
    }

    /// Number of spike tiers r (the remainder tier excluded).
    pub fn spike_tier_count(&self) -> usize {
        self.sets.len() - 1
    }

    /// Total spike count m.
    pub fn spike_count(&self) -> usize {
        self.sets[self.sets.len() - 1].start
    }

    /// The remainder tier H_{r+1}.
    pub fn noise_range(&self) -> Range<usize> {
        self.sets[self.sets.len() - 1].clone()
    }

    /// Tier containing index `j`, if any.
    pub fn tier_of(&self, j: usize) -> Option<usize> {
        self.sets.iter().position(|r| r.contains(&j))
    }
}

/// Gap ratios a_l = max_{k <= l} delta_{k+1}/delta_k over tier
/// representatives, where delta_l is the first eigenvalue of tier l and the
/// remainder tier's representative closes the ladder.
pub fn gap_ratios(spectrum: &[f64], tiers: &TierIndex) -> Result<Vec<f64>, SpectrumError> {
    let r = tiers.spike_tier_count();
    let mut reps = Vec::with_capacity(r + 1);
    for l in 0..=r {
        let range = tiers.set(l);
        let rep = spectrum[range.start];
        reps.push(rep);
    }
    for &rep in reps.iter().take(r) {
        if rep == 0.0 {
            return Err(SpectrumError::ZeroDivision);
        }
    }
    let mut out = Vec::with_capacity(r);
    let mut running: f64 = 0.0;
    for l in 0..r {
        running = running.max(reps[l + 1] / reps[l]);
        out.push(running);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_spike_spectrum() {
        let spec = SpectrumSpec::single_spike(1.0);
        let s = spec.build_spectrum(100).unwrap();
        assert_eq!(s[0], 100.0);
        assert!(s[1..].iter().all(|v| *v == 1.0));
        assert_eq!(s.len(), 100);
    }

    #[test]
    fn multi_spike_spectrum() {
        let spec = SpectrumSpec::multi_spike(1.0, vec![4.0, 2.0]);
        let s = spec.build_spectrum(10).unwrap();
        assert_eq!(&s[..2], &[40.0, 20.0]);
        assert!(s[2..].iter().all(|v| *v == 1.0));
    }

    #[test]
    fn flat_spectrum_at_zero_alpha() {
        let spec = SpectrumSpec::single_spike(0.0);
        let s = spec.build_spectrum(5).unwrap();
        assert_eq!(s, vec![1.0; 5]);
    }

    #[test]
    fn tiered_spectrum_levels() {
        let spec = SpectrumSpec::tiered(vec![
            Tier { exponent: 1.0, multiplicity: 2 },
            Tier { exponent: 0.5, multiplicity: 1 },
        ]);
        let s = spec.build_spectrum(10).unwrap();
        assert_eq!(s[0], 10.0);
        assert_eq!(s[1], 10.0);
        assert!((s[2] - 10f64.sqrt()).abs() < 1e-15);
        assert!(s[3..].iter().all(|v| *v == 1.0));
    }

    #[test]
    fn zero_tail_is_applied() {
        let spec = SpectrumSpec::single_spike(1.0).with_zero_tail(40);
        let s = spec.build_spectrum(100).unwrap();
        assert_eq!(s.iter().filter(|v| **v == 0.0).count(), 40);
        assert!(s[..60].iter().all(|v| *v > 0.0));
        assert_eq!(spec.effective_dimension(100), 60);
    }

    #[test]
    fn effective_dimension_boundary() {
        let spec = SpectrumSpec::single_spike(1.0).with_zero_tail(3);
        assert_eq!(spec.effective_dimension(5), 2);
        let plain = SpectrumSpec::single_spike(0.5);
        assert_eq!(plain.effective_dimension(100), 100);
    }

    #[test]
    fn spec_too_large_rejected() {
        let spec = SpectrumSpec::multi_spike(1.0, vec![4.0, 2.0]).with_zero_tail(8);
        assert!(matches!(
            spec.build_spectrum(10),
            Err(SpectrumError::SpecTooLarge { .. })
        ));
    }

    #[test]
    fn bad_constants_rejected() {
        let spec = SpectrumSpec::multi_spike(1.0, vec![2.0, 3.0]);
        assert!(matches!(
            spec.build_spectrum(10),
            Err(SpectrumError::NotMonotone(_))
        ));
        let spec = SpectrumSpec::multi_spike(1.0, vec![2.0, 1.0]);
        assert!(matches!(
            spec.build_spectrum(10),
            Err(SpectrumError::InvalidSpec(_))
        ));
    }

    #[test]
    fn explicit_padding_and_monotonicity() {
        let spec = SpectrumSpec::explicit(vec![5.0, 2.0]);
        let s = spec.build_spectrum(4).unwrap();
        assert_eq!(s, vec![5.0, 2.0, 1.0, 1.0]);
        let bad = SpectrumSpec::explicit(vec![5.0, 0.5]);
        assert!(matches!(bad.build_spectrum(4), Err(SpectrumError::NotMonotone(_))));
    }

    #[test]
    fn explicit_may_fill_whole_dimension() {
        let spec = SpectrumSpec::explicit(vec![5.0, 0.0, 0.0, 0.0]);
        let s = spec.build_spectrum(4).unwrap();
        assert_eq!(s, vec![5.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn resolve_n_examples() {
        assert_eq!(ScalingLaw::growing(0.5).resolve_n(100), 10);
        assert_eq!(ScalingLaw::fixed(10).resolve_n(12345), 10);
        assert_eq!(ScalingLaw::growing(0.0).resolve_n(100), 2);
        assert_eq!(ScalingLaw::growing(1.5).resolve_n(300), 5196);
    }

    #[test]
    fn tier_index_tiered() {
        let spec = SpectrumSpec::tiered(vec![
            Tier { exponent: 1.0, multiplicity: 2 },
            Tier { exponent: 0.5, multiplicity: 1 },
        ]);
        let t = spec.tier_index(10).unwrap();
        assert_eq!(t.sets(), &[0..2, 2..3, 3..10]);
        assert_eq!(t.spike_count(), 3);
        assert_eq!(t.spike_tier_count(), 2);
    }

    #[test]
    fn tier_index_single_and_multi() {
        let t = SpectrumSpec::single_spike(1.0).tier_index(5).unwrap();
        assert_eq!(t.sets(), &[0..1, 1..5]);
        let t = SpectrumSpec::multi_spike(1.0, vec![8.0, 4.0, 2.0])
            .tier_index(8)
            .unwrap();
        assert_eq!(t.sets(), &[0..1, 1..2, 2..3, 3..8]);
    }

    #[test]
    fn tier_index_explicit_groups_equal_leaders() {
        let spec = SpectrumSpec::explicit(vec![6.0, 6.0, 2.0]);
        let t = spec.tier_index(5).unwrap();
        assert_eq!(t.sets(), &[0..2, 2..3, 3..5]);
    }

    #[test]
    fn gap_ratios_multi_spike() {
        let spec = SpectrumSpec::multi_spike(1.0, vec![4.0, 2.0]);
        let s = spec.build_spectrum(10).unwrap();
        let t = spec.tier_index(10).unwrap();
        let a = gap_ratios(&s, &t).unwrap();
        assert_eq!(a.len(), 2);
        assert!((a[0] - 0.5).abs() < 1e-15);
        assert!((a[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn gap_ratios_equal_spike_tier() {
        let spec = SpectrumSpec::explicit(vec![10.0, 10.0]);
        let s = spec.build_spectrum(6).unwrap();
        let t = spec.tier_index(6).unwrap();
        let a = gap_ratios(&s, &t).unwrap();
        assert_eq!(a, vec![0.1]);
    }

    #[test]
    fn gap_ratios_single_spike_two_level_ladder() {
        let spec = SpectrumSpec::single_spike(1.0);
        let d = 50;
        let s = spec.build_spectrum(d).unwrap();
        let t = spec.tier_index(d).unwrap();
        let a = gap_ratios(&s, &t).unwrap();
        assert!((a[0] - 1.0 / d as f64).abs() < 1e-15);
    }

    #[test]
    fn default_constants_satisfy_ordering() {
        let spec = SpectrumSpec::multi_spike_default_constants(1.0, 3);
        assert_eq!(
            spec.kind,
            SpectrumKind::MultiSpike { alpha: 1.0, constants: vec![8.0, 4.0, 2.0] }
        );
        spec.validate().unwrap();
    }
}
