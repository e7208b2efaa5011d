use crate::error::{GiError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseKind {
    None,
    Poisson,
    Gaussian,
    Both,
}

impl NoiseKind {
    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::None => "none",
            NoiseKind::Poisson => "poisson",
            NoiseKind::Gaussian => "gaussian",
            NoiseKind::Both => "both",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(NoiseKind::None),
            "poisson" => Some(NoiseKind::Poisson),
            "gaussian" => Some(NoiseKind::Gaussian),
            "both" => Some(NoiseKind::Both),
            _ => None,
        }
    }
}

/// Measurement noise channel.
///
/// `sigma_p` scales shot noise so that a count with expectation `λ` has
/// variance `sigma_p² λ`. `sigma_m` is an additive Gaussian std in photons.
/// Each sigma is ignored unless its kind is active.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub sigma_p: f64,
    pub sigma_m: f64,
}

impl NoiseSpec {
    pub const NONE: NoiseSpec = NoiseSpec {
        kind: NoiseKind::None,
        sigma_p: 0.0,
        sigma_m: 0.0,
    };

    pub fn none() -> Self {
        Self::NONE
    }

    pub fn poisson(sigma_p: f64) -> Self {
        NoiseSpec {
            kind: NoiseKind::Poisson,
            sigma_p,
            sigma_m: 0.0,
        }
    }

    pub fn gaussian(sigma_m: f64) -> Self {
        NoiseSpec {
            kind: NoiseKind::Gaussian,
            sigma_p: 0.0,
            sigma_m,
        }
    }

    pub fn both(sigma_p: f64, sigma_m: f64) -> Self {
        NoiseSpec {
            kind: NoiseKind::Both,
            sigma_p,
            sigma_m,
        }
    }

    pub fn has_poisson(&self) -> bool {
        matches!(self.kind, NoiseKind::Poisson | NoiseKind::Both)
    }

    pub fn has_gaussian(&self) -> bool {
        matches!(self.kind, NoiseKind::Gaussian | NoiseKind::Both)
    }

    /// Effective Poisson scale (0 when shot noise is off).
    pub fn eff_sigma_p(&self) -> f64 {
        if self.has_poisson() {
            self.sigma_p
        } else {
            0.0
        }
    }

    pub fn eff_sigma_m(&self) -> f64 {
        if self.has_gaussian() {
            self.sigma_m
        } else {
            0.0
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.has_poisson() && !(self.sigma_p > 0.0 && self.sigma_p.is_finite()) {
            return Err(GiError::invalid(format!("sigma_p must be positive, got {}", self.sigma_p)));
        }
        if self.has_gaussian() && !(self.sigma_m >= 0.0 && self.sigma_m.is_finite()) {
            return Err(GiError::invalid(format!("sigma_m must be >= 0, got {}", self.sigma_m)));
        }
        Ok(())
    }
}

/// Bucket signals `b_j` with acquisition metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct BucketVector {
    pub values: Vec<f64>,
    pub exposure_s: f64,
    pub noise: NoiseSpec,
    /// Expected photons per unit of `Σ A_j T` (that is `B t0 Δ²`).
    pub photon_scale: f64,
}

impl BucketVector {
    pub fn new(values: Vec<f64>, exposure_s: f64, photon_scale: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(GiError::invalid("bucket vector must hold at least one value"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(GiError::invalid("bucket values must be finite"));
        }
        if !(photon_scale > 0.0 && photon_scale.is_finite()) {
            return Err(GiError::invalid(format!("photon scale must be positive, got {photon_scale}")));
        }
        Ok(BucketVector {
            values,
            exposure_s,
            noise: NoiseSpec::NONE,
            photon_scale,
        })
    }

    /// Unit photon scale; handy for oracles working in raw `Σ A T` units.
    pub fn unit(values: Vec<f64>) -> Result<Self> {
        BucketVector::new(values, 1.0, 1.0)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// `b_j − ⟨b⟩`.
    pub fn centered(&self) -> Vec<f64> {
        let m = self.mean();
        self.values.iter().map(|v| v - m).collect()
    }
}
