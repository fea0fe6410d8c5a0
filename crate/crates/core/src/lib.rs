//! Physics-informed neural networks for the minimal surface equation
//! `-div(∇u / sqrt(1 + |∇u|²)) = f` with Dirichlet frame data on boxes of
//! dimension 2 to 4.

pub mod autodiff;
pub mod boundary;
pub mod error;
pub mod interface;
pub mod network;
pub mod optimizer;
pub mod oracle_fdm;
pub mod pde_loss;
pub mod sampling;
pub mod trainer;

pub use error::{Error, Result};
