//! Simulation laboratory for neuro-adaptive sliding-mode consensus of
//! higher-order leader-follower multi-agent systems.

pub mod barrier;
pub mod config;
pub mod controller;
pub mod dnn;
pub mod graph;
pub mod linalg;
pub mod output;
pub mod plant;
pub mod sim;
pub mod sliding;
