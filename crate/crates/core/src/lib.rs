//! Simulation and verification laboratory for PCA consistency under
//! high-dimensional spiked covariance models.
//!
//! The crate synthesizes data from declarative population spectra, computes
//! sample eigenstructure (directly or through the dual covariance matrix),
//! measures eigenvector angles against the population basis, classifies
//! asymptotic regimes by exponent arithmetic, and runs seeded Monte Carlo
//! sweeps that check closed-form limits and convergence rates.

pub mod cli_io;
pub mod eigencore;
pub mod harness;
pub mod metrics;
pub mod oracles;
pub mod regime;
pub mod sampler;
pub mod spike_model;

pub use eigencore::{
    dual_eigen, sample_cov, sym_eigen, wielandt_check, wielandt_check_all, EigenPath, EigenResult,
    SymMatrix,
};
pub use harness::{
    derive_seed, fit_rate, mix64, phase_diagram, run_trial, sweep, ExperimentConfig, MeasureSet,
    PhaseDiagram, RateFit, SweepOutcome, TrialRecord,
};
pub use metrics::{abs_inner, eigen_ratios, subspace_cos, ConsistencyMeasures, SubspaceAngle};
pub use oracles::{
    bai_yin_edges, hdlss_constants, jung_limit_draw, jung_limit_draws, nadler_limit, predict_rate,
    HdlssConstants, RatePrediction, RateQuantity,
};
pub use regime::{classify, region_grid, AsymptoticFamily, RegimeLabel, RegimeReport};
pub use sampler::{
    haar_orthogonal, sample_scores, synthesize, Basis, BasisSpec, Dataset, ScoreDistribution,
};
pub use spike_model::{gap_ratios, ScalingLaw, SpectrumKind, SpectrumSpec, Tier, TierIndex};
