//! Competitive AI-adoption game and the efficiency–fragility welfare curves.
mod equilibrium;
mod error;
mod incentive;
mod welfare;

pub use equilibrium::{
    find_equilibria, multi_equilibrium_fixture, red_queen_check, tatonnement, EquilibriumKind, EquilibriumPoint,
    EquilibriumSet, RedQueenReport, RedQueenVerdict,
};
pub use error::{GameError, Result};
pub use incentive::{adoption_incentive, ai_alpha_per_capita, alpha_advantage, best_response_share, human_alpha};
pub use welfare::{
    optimal_phis, overinvestment_wedge, overinvestment_wedge_from, welfare_eff, welfare_stab, WelfareCurve,
    WelfareSim,
};
