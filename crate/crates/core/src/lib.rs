//! Extreme-value margins combined with a GAN-learned spatial dependence
//! structure for gridded block maxima, plus the Brown–Resnick baseline and
//! extremal-dependence diagnostics.

pub mod brown_resnick;
pub mod dependence;
pub mod error;
pub mod experiment;
pub mod gev;
pub mod grid;
pub mod margins;
pub mod optim;
pub mod pipeline;
pub mod registry;
pub mod special;
pub mod synthetic;

pub use error::{Error, Result};
pub use evtgan_nnet as nnet;
