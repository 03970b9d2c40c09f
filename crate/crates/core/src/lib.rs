//! Multi-advisor reinforcement learning.
//!
//! A task's reward is split across advisors, each learning a tabular
//! Q-function over its own projected state. An aggregator sums the
//! weighted advisor values and acts greedily on the sum.

pub mod advisors;
pub mod approx;
pub mod aggregator;
pub mod attractor;
pub mod decomposition;
pub mod env;
pub mod harness;
pub mod mdp;
pub mod targets;
