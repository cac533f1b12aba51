//! Max-min multi-objective reinforcement learning on tabular models.
//!
//! The max-min problem `max_pi min_k J_k(pi)` is solved three ways: as a
//! linear program over occupancy measures, by convex minimization over
//! simplex weights of the scalarized optimal value, and model-free by a soft
//! Q-learner whose weights follow a smoothed zeroth-order gradient.

pub mod agent;
pub mod env;
pub mod error;
pub mod harness;
pub mod lp;
pub mod momdp;
pub mod rng;
pub mod solvers;
pub mod weights;

pub use error::{Error, Result};
