//! Closed-form SNR predictors.

use crate::error::{GiError, Result};

/// Symbols of the SNR laws. `p` is the incident photons per pixel over the
/// whole experiment; `None`-like infinite budgets are spelled `f64::INFINITY`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryParams {
    pub j: f64,
    pub n: f64,
    pub mu_a: f64,
    pub sigma_a: f64,
    pub mu_t: f64,
    pub sigma_t: f64,
    pub p: f64,
    pub sigma_p: f64,
    pub sigma_m: f64,
}

impl TheoryParams {
    /// True when `σ_A` exceeds the binary-mask bound `sqrt(μ_A(1 − μ_A))`.
    pub fn exceeds_binary_bound(&self) -> bool {
        self.sigma_a > (self.mu_a * (1.0 - self.mu_a)).sqrt() * (1.0 + 1e-12)
    }

    fn pixels(&self) -> f64 {
        self.n * self.n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TheoryFamily {
    Random,
    Ortho,
}

/// Artefact RMSE for random masks: `sqrt(n²(μ_T² + σ_T²)/J)`.
pub fn rmse0_random(p: &TheoryParams) -> f64 {
    (p.pixels() * (p.mu_t * p.mu_t + p.sigma_t * p.sigma_t) / p.j).sqrt()
}

/// Artefact RMSE for a partial orthogonal basis: `sqrt((n² − J)σ_T²/n²)`.
pub fn rmse0_ortho(p: &TheoryParams) -> f64 {
    let npx = p.pixels();
    if p.j >= npx {
        0.0
    } else {
        ((npx - p.j) * p.sigma_t * p.sigma_t / npx).sqrt()
    }
}

pub fn theory_snr0_random(p: &TheoryParams) -> f64 {
    1.0 / rmse0_random(p)
}

/// Infinite when no masks are missing.
pub fn theory_snr0_ortho(p: &TheoryParams) -> f64 {
    let r = rmse0_ortho(p);
    if r == 0.0 {
        f64::INFINITY
    } else {
        1.0 / r
    }
}

/// Shot-noise RMSE `sqrt(σ_p² μ_A μ_T n² / (P σ_A²))`.
pub fn rmse_poisson(p: &TheoryParams) -> f64 {
    (p.sigma_p * p.sigma_p * p.mu_a * p.mu_t * p.pixels() / (p.p * p.sigma_a * p.sigma_a)).sqrt()
}

/// Per-measurement noise RMSE `sqrt(J σ_m² / (P² σ_A²))`.
pub fn rmse_gaussian(p: &TheoryParams) -> f64 {
    (p.j * p.sigma_m * p.sigma_m / (p.p * p.p * p.sigma_a * p.sigma_a)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseTheory {
    pub rmse0: f64,
    pub rmsep: f64,
    pub rmsem: f64,
    pub snr: f64,
}

/// The three RMSE components and the combined SNR.
pub fn theory_snr_noise(p: &TheoryParams, family: TheoryFamily) -> NoiseTheory {
    let rmse0 = match family {
        TheoryFamily::Random => rmse0_random(p),
        TheoryFamily::Ortho => rmse0_ortho(p),
    };
    let rmsep = rmse_poisson(p);
    let rmsem = rmse_gaussian(p);
    let total = (rmse0 * rmse0 + rmsep * rmsep + rmsem * rmsem).sqrt();
    NoiseTheory {
        rmse0,
        rmsep,
        rmsem,
        snr: if total == 0.0 { f64::INFINITY } else { 1.0 / total },
    }
}

/// Mask count at which the random-mask artefact and per-measurement noise
/// terms are equal, for a fixed photon budget `P`.
pub fn j_opt(p: &TheoryParams) -> Result<f64> {
    if !(p.sigma_m > 0.0) {
        return Err(GiError::invalid("J_opt needs sigma_m > 0"));
    }
    Ok(p.p * p.n * p.sigma_a * (p.mu_t * p.mu_t + p.sigma_t * p.sigma_t).sqrt() / p.sigma_m)
}

/// Multipliers taking a ghost-imaging SNR to the conventional one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonRatios {
    /// Scanning probe, per-measurement noise: `sqrt(J / (n⁴ σ_A²))`.
    pub sp_gauss: f64,
    /// Direct imaging, per-measurement noise: `sqrt(J μ_A² / σ_A²)`.
    pub di_gauss: f64,
    /// Scanning probe, shot noise: `sqrt(μ_A / σ_A²)`.
    pub sp_poisson: f64,
    /// Direct imaging, shot noise: `sqrt(n² μ_A² / σ_A²)`.
    pub di_poisson: f64,
}

pub fn comparison_ratios(p: &TheoryParams) -> ComparisonRatios {
    let s2 = p.sigma_a * p.sigma_a;
    ComparisonRatios {
        sp_gauss: (p.j / (p.n.powi(4) * s2)).sqrt(),
        di_gauss: (p.j * p.mu_a * p.mu_a / s2).sqrt(),
        sp_poisson: (p.mu_a / s2).sqrt(),
        di_poisson: (p.n * p.n * p.mu_a * p.mu_a / s2).sqrt(),
    }
}
