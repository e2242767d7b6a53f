//! LM rate of mismatched decoding over discrete memoryless channels, and its
//! maximization over the channel input distribution by alternating double
//! maximization of a dual objective.
//!
//! The [`channel`] module builds the IQ-imbalance AWGN experiments, [`dual`]
//! holds the objective and its closed-form block updates, [`solver`] runs the
//! alternating loop, and [`oracle`] provides independent reference values.
//! [`config`] and [`experiment`] read TOML experiment descriptions and write
//! their results; [`verify`] compares the solver with the oracles.

pub mod angle;
pub mod channel;
pub mod config;
pub mod dual;
pub mod error;
pub mod experiment;
pub mod info;
mod logsum;
pub mod oracle;
mod root;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
pub use info::{
    entropy, joint_from_input, mutual_information, JointDistribution, MetricMatrix,
    ProbabilityVector, TransitionMatrix,
};
