pub mod config;
pub mod convex;
pub mod error;
pub mod exact;
pub mod fixtures;
pub mod fpl;
pub mod gridworld;
pub mod io;
pub mod mdp;
pub mod reward;
