//! Competitive influence maximization between a true-information party and
//! a false-information party on a social graph.
//!
//! Users hold binomial Subjective Logic opinions ([`opinion`]) that evolve as
//! BFS cascades ([`propagation`]) spread the parties' seed opinions. Each
//! party picks one seed per round with a heuristic ([`strategies`]) or a PPO
//! agent ([`rl`]) that learns which heuristic to fire; [`baselines`] adapts
//! STORM and C-STORM to the same environment and [`harness`] runs the
//! experiment matrices.

pub mod baselines;
pub mod error;
pub mod harness;
pub mod network;
pub mod opinion;
pub mod population;
pub mod propagation;
pub mod rl;
pub mod seeding;
pub mod strategies;

pub use error::{Error, Result};
pub use network::{Graph, ObservableGraph};
pub use opinion::{Evidence, Opinion, OpinionModel, TrustModel};
pub use population::{Party, PopulationState};
pub use propagation::{EpisodeConfig, RoundLog, SeedAgent};
pub use strategies::{Scheme, StrategyKind};
