//! Multi-agent grid navigation laboratory.
//!
//! A decentralized, partially observable path-planning stack for 8-connected
//! grid worlds with mixed cooperative/non-cooperative dynamic obstacles:
//!
//! - [`grid`] — the deterministic world model (maps, entities, simultaneous
//!   stepping with occupancy and collision rules)
//! - [`guide`] — A* global planning, reference paths and waypoint tracking
//! - [`obs`] — the 3-channel egocentric observation image and waypoint feature
//! - [`reward`] — per-step reward composition with the off-route penalty
//! - [`planner`] — D* lite incremental replanning, the LRA* baseline
//!   coordinator, and the dynamic-obstacle controller
//! - [`nn`] — the policy/value network with exact manual gradients
//! - [`evo`] — per-agent advantage actor-critic plus evolutionary selection
//! - [`harness`] — curriculum training, evaluation campaigns, traces and
//!   rendering

pub mod checkpoint;
pub mod evo;
pub mod grid;
pub mod guide;
pub mod harness;
pub mod nn;
pub mod obs;
pub mod planner;
pub mod reward;
pub mod seeding;
