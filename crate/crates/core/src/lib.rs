//! Multi-source test-time adaptation as a bandit problem.
//!
//! `K` source models compete to be adapted on a stream of span-prediction
//! instances. Two selection frameworks are provided:
//!
//! - [`bandit`]: UCB over single models with binary (exact-match) feedback,
//!   plus a variant that asks for a preference between a model's top-2 spans.
//! - [`dueling`]: Co-UCB over model pairs with preference feedback, where the
//!   preferred span of a duel is used to update both models.
//!
//! [`feedback`] simulates the user, [`environment`] provides synthetic
//! adaptive models, [`metrics`] does regret and reward accounting, and
//! [`harness`] wires everything into seeded, replayable experiment runs.

pub mod bandit;
pub mod dueling;
pub mod environment;
pub mod error;
pub mod feedback;
pub mod harness;
pub mod metrics;

pub(crate) mod index;

pub use bandit::{ArmId, MabLedger};
pub use dueling::{DuelLedger, PairId, TotalCountRule};
pub use environment::{AdaptRule, DomainProfile, InstanceSampler, SyntheticModel, TaskInstance};
pub use error::{Error, Result};
pub use feedback::{GoldSpan, NoiseChannel, PreferenceLabel, Span, SpanPrediction};
pub use harness::{run_experiment, run_sweep, write_outputs, ExperimentConfig, PolicyKind, RunResult, SweepSpec};
pub use metrics::{RunRecord, StepRecord};
