//! Convergence, homogeneity and dispersion analytics on holdings and return panels.

pub mod dispersion;
mod error;
pub mod halflife;
pub mod panel;
pub mod rho;
pub mod similarity;
pub mod thirteenf;

pub use dispersion::{
    return_dispersion, simulate_fund_panel, AlphaUnitMap, DispersionReport, DispersionSeries, FundPanel, FundPanelConfig,
};
pub use error::{AnalyticsError, Result};
pub use halflife::{estimate_half_life, FitMethod, FitStatus, HalfLifeEstimate};
pub use panel::{quarter_labels, Group, GroupFilter, HoldingsPanel, SparseWeights};
pub use rho::{planted_homogeneity_panel, rho_pca, rho_sync};
pub use similarity::{convergence_index, convergence_series, cosine_similarity, sparse_cosine, ConvergenceSeries, PairIndex};
pub use thirteenf::{generate_synthetic_13f, generate_synthetic_13f_detailed, ConvergenceTargets, SyntheticThirteenF};
