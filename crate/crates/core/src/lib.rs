pub mod bessel;
pub mod cli;
pub mod config;
pub mod erc_profile;
pub mod error;
pub mod image;
pub mod io;
pub mod metrics;
pub mod phantom;
pub mod report;
pub mod rician;
pub mod rng;
pub mod sampler;

pub use error::{Error, Result};
pub use image::Image;
