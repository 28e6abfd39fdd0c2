pub mod ansatz;
pub mod channels;
pub mod config;
pub mod contraction;
pub mod decay;
pub mod deepvqe;
pub mod error;
pub mod forging;
pub mod httn;
pub mod linalg;
pub mod optimize;
pub mod random;
pub mod tensors;
pub mod tolerance;

pub use error::{Error, Result};
