//! Track-access charge (TAC) pricing for freight rail corridors.
//!
//! `railtac` couples a mesoscopic discrete-event simulator of freight trains
//! with a road/rail logit split, and searches for the access charges that
//! maximize infrastructure-manager revenue net of monetized road externalities.
//!
//! The pieces, bottom up:
//!
//! * [`network`]: corridor graph, daily residual-capacity schedules, paths.
//! * [`demand`]: OD demand, rail generalized cost, logit split, train filling.
//! * [`pricing`]: charge schemes and their decision-vector encoding.
//! * [`simulator`]: the packet event engine.
//! * [`evaluation`]: objective value and KPI table from a simulation.
//! * [`optimizer`]: pattern search and grid scan over bounded charges.
//! * [`appraisal`]: externality savings, NPV and benefit-cost ratios.
//! * [`scenario`]: JSON scenario files.
//!
//! ```
//! use railtac::{pricing::TacScheme, scenario::Scenario, simulator};
//!
//! let scenario = Scenario::tutorial();
//! let result = simulator::run(&scenario, &TacScheme::proportional(0.1)).unwrap();
//! assert!(result.completed_trips().count() > 0);
//! ```

pub mod appraisal;
pub mod demand;
pub mod evaluation;
pub mod network;
pub mod optimizer;
pub mod pricing;
pub mod scenario;
pub mod simulator;

use thiserror::Error;

/// Any failure raised while building, simulating or optimizing a scenario.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Network(#[from] network::NetworkError),
    #[error(transparent)]
    Demand(#[from] demand::DemandError),
    #[error(transparent)]
    Pricing(#[from] pricing::PricingError),
    #[error(transparent)]
    Simulation(#[from] simulator::SimError),
    #[error(transparent)]
    Evaluation(#[from] evaluation::EvaluationError),
    #[error(transparent)]
    Optimize(#[from] optimizer::OptimizeError),
    #[error(transparent)]
    Appraisal(#[from] appraisal::AppraisalError),
    #[error(transparent)]
    Scenario(#[from] scenario::ScenarioError),
}

// The guide's code listings run as doctests so they cannot drift from the API.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/network.md")]
    mod network {}
    #[doc = include_str!("../../../book/src/demand.md")]
    mod demand {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/objective.md")]
    mod objective {}
    #[doc = include_str!("../../../book/src/optimization.md")]
    mod optimization {}
    #[doc = include_str!("../../../book/src/appraisal.md")]
    mod appraisal {}
    #[doc = include_str!("../../../book/src/scenario-files.md")]
    mod scenario_files {}
}
