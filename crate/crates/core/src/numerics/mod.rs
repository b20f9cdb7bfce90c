//! Special functions and the random-number contract.

mod rng;
mod special;

pub use rng::{sample_beta, BetaSampler, RngStream, StreamDomain};
pub use special::{
    ln_beta, ln_beta_pdf, ln_gamma, log_binomial_coefficient, regularized_incomplete_beta,
    std_normal_cdf, std_normal_pdf, std_normal_quantile, std_normal_sf,
};
