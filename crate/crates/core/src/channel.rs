//! Rician block-fading channel with log-normal shadowing and distance path
//! loss.
//!
//! Variance convention: `CN(m, v)` has total variance `v`, split evenly
//! between the real and imaginary parts. The scatter term of a Rician link is
//! parameterized by `sigma2`, the variance per real dimension, so a
//! coefficient `h = mu + sigma * (a + j b)` with `a, b ~ N(0, 1)` has
//! `E|h|^2 = |mu|^2 + 2 sigma2`, and `P = 2 sigma2 (K + 1)`,
//! `K = |mu|^2 / (2 sigma2)` hold exactly.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::buffer::ReceivedBuffer;
use crate::config::RadioConfig;
use crate::error::{Error, Result};

/// Large- and small-scale parameters shared by every replica of one device
/// activation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    /// Transmitter distance in meters.
    pub d: f64,
    /// Linear shadowing gain.
    pub gamma: f64,
    /// Average received power in watts.
    pub p_rx: f64,
    /// Line-of-sight component.
    pub mu: Complex64,
    /// Scatter variance per real dimension.
    pub sigma2: f64,
    /// Linear Rician factor.
    pub k: f64,
}

/// One channel vector, a coefficient per receive antenna.
pub type ChannelRealization = Vec<Complex64>;

/// Received power at distance `d` without shadowing or fading, scaled from
/// the free-space reference power at `d_ref`.
pub fn reference_power(radio: &RadioConfig) -> f64 {
    radio.p_t * (radio.lambda_c / (4.0 * PI * radio.d_ref)).powi(2)
}

/// Path-loss and shadowing stage. `shadow_draw` is the standard normal
/// variate behind the log-normal gain. Returns a budget with `d`, `gamma`
/// and `p_rx` set; the Rician fields are zero until [`LinkBudget::with_rician`].
pub fn received_power(d: f64, radio: &RadioConfig, shadow_draw: f64) -> Result<LinkBudget> {
    if d.is_nan() || d <= 0.0 {
        return Err(Error::NonPositiveDistance(d));
    }
    let gamma = 10f64.powf(radio.sigma_db * shadow_draw / 10.0);
    let p_rx = reference_power(radio) * gamma * (radio.d_ref / d).powf(radio.beta);
    Ok(LinkBudget {
        d,
        gamma,
        p_rx,
        mu: Complex64::new(0.0, 0.0),
        sigma2: 0.0,
        k: 0.0,
    })
}

/// Splits received power `p` into a LoS term of phase `phase` and a scatter
/// variance for Rician factor `k`.
pub fn rician_params(p: f64, k: f64, phase: f64) -> (Complex64, f64) {
    let sigma2 = p / (2.0 * (k + 1.0));
    let mu = Complex64::from_polar((2.0 * k * sigma2).sqrt(), phase);
    (mu, sigma2)
}

impl LinkBudget {
    pub fn with_rician(mut self, k: f64, phase: f64) -> Self {
        let (mu, sigma2) = rician_params(self.p_rx, k, phase);
        self.mu = mu;
        self.sigma2 = sigma2;
        self.k = k;
        self
    }

    /// Draws distance, shadowing and LoS phase for a new device.
    pub fn draw<R: Rng + ?Sized>(radio: &RadioConfig, rng: &mut R) -> Self {
        let d = rng.random_range(radio.d_min..radio.d_max());
        let z: f64 = rng.sample(StandardNormal);
        let phase = rng.random_range(0.0..2.0 * PI);
        received_power(d, radio, z)
            .expect("distance is at least d_min > 0")
            .with_rician(radio.k_linear(), phase)
    }

    /// Rician factor recomputed from `mu` and `sigma2`.
    pub fn k_from_params(&self) -> f64 {
        self.mu.norm_sqr() / (2.0 * self.sigma2)
    }
}

/// Independent small-scale draw across `antennas` receive antennas.
pub fn draw_channel<R: Rng + ?Sized>(budget: &LinkBudget, antennas: usize, rng: &mut R) -> ChannelRealization {
    let sigma = budget.sigma2.sqrt();
    (0..antennas)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            budget.mu + Complex64::new(re, im) * sigma
        })
        .collect()
}

/// Adds `CN(0, sigma_w2)` noise to every sample.
pub fn apply_awgn<R: Rng + ?Sized>(buffer: &mut ReceivedBuffer, sigma_w2: f64, rng: &mut R) {
    if sigma_w2 == 0.0 {
        return;
    }
    let s = (sigma_w2 / 2.0).sqrt();
    for x in buffer.as_mut_slice() {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *x += Complex64::new(re * s, im * s);
    }
}
