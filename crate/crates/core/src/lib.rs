//! Epistemic-state engine for gating autonomous actions.
//!
//! A seeded world simulator feeds unreliable, spoofable evidence channels;
//! agents hold credences over class partitions, and every consequential
//! action is gated on a verdict about what the agent knows: justified true
//! belief, counterfactual tracking, aptness and reflective knowledge.

pub mod agent;
pub mod doxastics;
pub mod epistemics;
pub mod evidence;
pub mod harness;
pub mod hnpm;
pub mod policy;
pub mod rng;
pub mod worldsim;
