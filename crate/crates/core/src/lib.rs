//! Energy-efficiency model for multi-cell massive MIMO downlink with MRT
//! precoding, MMSE channel estimation and pilot contamination, together with
//! Monte Carlo validation and antenna and power optimizers.

pub mod bench;
pub mod channel_mc;
pub mod closed_form;
pub mod error;
pub mod optimizer;
pub mod scenario;

pub use error::{Error, Result};
