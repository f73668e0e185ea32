//! Aggregation of expert probability forecasts over a binary state, and
//! exact worst-case (regret) analysis of aggregation schemes against
//! adversarial information structures.
//!
//! The crate is organized around a small number of domain objects:
//!
//! * [`model::InformationStructure`] — a finite joint distribution over a
//!   binary state and a profile of expert signals. This is the adversary's
//!   pure strategy. Conditionally independent structures get their own
//!   compact representation, [`model::CondIndepStructure`].
//! * [`schemes::AggregationScheme`] — a map from a vector of forecasts in
//!   `[0,1]^n` to a single forecast.
//! * [`loss::MixedAdversary`] — a finitely supported distribution over
//!   information structures, used for lower-bound witnesses.
//!
//! On top of these, [`loss`] computes exact and Monte-Carlo relative losses
//! (scheme loss minus omniscient loss), [`adversary`] solves the adversary's
//! best-reply optimization problems for the Blackwell-ordered and
//! conditionally-independent families, [`constructions`] builds every named
//! adversarial instance, and [`many_experts`] checks the many-expert
//! impossibility bounds at desk scale.
//!
//! ```
//! use forecast_agg::constructions::xor_structure;
//! use forecast_agg::schemes::AggregationScheme;
//! use forecast_agg::relative_loss;
//!
//! // each signal alone is uninformative, the pair reveals the state:
//! // even the best constant forecast loses 1/4 against the omniscient view
//! let report = relative_loss(&xor_structure(), &AggregationScheme::Constant(0.5)).unwrap();
//! assert_eq!(report.relative_loss, 0.25);
//! ```

pub mod adversary;
pub mod constructions;
pub mod loss;
pub mod many_experts;
pub mod model;
pub mod schemes;
mod simplex;

pub use adversary::{optimize_blackwell, optimize_ci, DummyPrior, OptResult};
pub use constructions::ChainSpec;
pub use loss::{relative_loss, min_loss_against_mixture, LossReport, MixedAdversary};
pub use model::{CondIndepStructure, InformationStructure, PosteriorMartingale, Probability};
pub use schemes::{Aggregator, AggregationScheme};
