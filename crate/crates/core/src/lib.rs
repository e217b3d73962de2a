//! Pool-based active-learning benchmark engine.
//!
//! The crate implements the full experiment pipeline: dataset loading and
//! synthetic generation ([`data`]), a three-stream seeding protocol
//! ([`seeding`]), softmax classifiers with mini-batch retraining ([`model`]),
//! eight query strategies ([`strategies`]), a privileged greedy oracle with
//! curve forecasting ([`oracle`]), the acquisition loop and result records
//! ([`harness`]), and the statistical evaluation layer ([`stats`]).
//!
//! Everything downstream of a seed triple is deterministic: a repetition is a
//! pure function of its configuration and seeds, and rerunning it reproduces
//! accuracy curves bit for bit.

pub mod data;
pub mod error;
pub mod harness;
pub mod model;
pub mod oracle;
pub mod seeding;
pub mod stats;
pub mod strategies;

pub use error::{Error, Result};
