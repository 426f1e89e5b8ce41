//! Minimal abductive explanations for feedforward ReLU networks.
//!
//! A network is encoded as a mixed-integer linear program in one of two ways
//! (indicator constraints or big-M), and a deletion-based search finds a
//! subset-minimal set of feature values that entails the network's prediction.

pub mod bench;
pub mod dataset;
pub mod encoding;
pub mod error;
pub mod explain;
pub mod milp;
pub mod model;
pub mod solver;
