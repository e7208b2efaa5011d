//! Photon budget, noisy bucket forward model and the conventional baselines.

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::ensemble::MaskEnsemble;
use crate::error::{GiError, Result};
use crate::image::{dot, Image};
use crate::seed::Seed;
use crate::types::{BucketVector, NoiseSpec};

/// Above this expectation Poisson draws use the normal approximation.
pub const POISSON_NORMAL_CUTOFF: f64 = 1e6;

/// Illumination bookkeeping: flux `B` (photons/s/mm²), exposure per mask
/// `t0`, mask count `J` and pixel pitch `Δ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonBudget {
    pub flux_b: f64,
    pub t0_s: f64,
    pub j: usize,
    pub pitch_mm: f64,
}

impl PhotonBudget {
    pub fn new(flux_b: f64, t0_s: f64, j: usize, pitch_mm: f64) -> Result<Self> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if !ok(flux_b) || !ok(t0_s) || !ok(pitch_mm) || j == 0 {
            return Err(GiError::invalid(format!(
                "photon budget needs positive B, t0, pitch and J >= 1 (B={flux_b}, t0={t0_s}, pitch={pitch_mm}, J={j})"
            )));
        }
        Ok(PhotonBudget {
            flux_b,
            t0_s,
            j,
            pitch_mm,
        })
    }

    /// Budget with fixed total time `tau`, split evenly over `J` masks.
    pub fn with_total_time(flux_b: f64, tau_s: f64, j: usize, pitch_mm: f64) -> Result<Self> {
        if j == 0 {
            return Err(GiError::invalid("J must be >= 1"));
        }
        PhotonBudget::new(flux_b, tau_s / j as f64, j, pitch_mm)
    }

    /// Unit photon scale (`B t0 Δ² = 1`), for noise-free oracles.
    pub fn unit(j: usize) -> Self {
        PhotonBudget {
            flux_b: 1.0,
            t0_s: 1.0,
            j,
            pitch_mm: 1.0,
        }
    }

    /// Expected photons per pixel per measurement at unit transmission.
    pub fn photon_scale(&self) -> f64 {
        self.flux_b * self.t0_s * self.pitch_mm * self.pitch_mm
    }

    /// Incident photons per pixel over the whole experiment.
    pub fn p(&self) -> f64 {
        self.flux_b * self.j as f64 * self.t0_s * self.pitch_mm * self.pitch_mm
    }

    pub fn tau_s(&self) -> f64 {
        self.j as f64 * self.t0_s
    }
}

/// `b_j = (B t0 Δ²) Σ A_j T`, no noise.
pub fn expected_buckets(t: &Image, ens: &MaskEnsemble, budget: &PhotonBudget) -> Result<BucketVector> {
    if t.n() != ens.n() {
        return Err(GiError::DimensionMismatch {
            what: "object side vs mask side",
            expected: ens.n(),
            actual: t.n(),
        });
    }
    if budget.j != ens.j() {
        return Err(GiError::DimensionMismatch {
            what: "budget J vs ensemble J",
            expected: ens.j(),
            actual: budget.j,
        });
    }
    let ps = budget.photon_scale();
    let obj = t.as_slice();
    let mut values = Vec::with_capacity(ens.j());
    ens.fold_masks(
        Vec::new,
        |acc: &mut Vec<f64>, _, mask| acc.push(ps * dot(mask, obj)),
        |part| values.extend(part),
    );
    BucketVector::new(values, budget.t0_s, ps)
}

pub(crate) fn sample_poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> f64 {
    if lambda <= 0.0 {
        0.0
    } else if lambda > POISSON_NORMAL_CUTOFF {
        let z: f64 = StandardNormal.sample(rng);
        (lambda + lambda.sqrt() * z).round().max(0.0)
    } else {
        Poisson::new(lambda).expect("finite positive rate").sample(rng)
    }
}

/// One noisy realisation of an expected photon count.
pub fn noisy_count<R: Rng + ?Sized>(expected: f64, noise: &NoiseSpec, rng: &mut R) -> f64 {
    let mut v = expected;
    if noise.has_poisson() {
        let s2 = noise.sigma_p * noise.sigma_p;
        v = s2 * sample_poisson(expected / s2, rng);
    }
    if noise.has_gaussian() && noise.sigma_m > 0.0 {
        let z: f64 = StandardNormal.sample(rng);
        v += noise.sigma_m * z;
    }
    v
}

fn check_counts(values: &[f64], noise: &NoiseSpec) -> Result<()> {
    noise.validate()?;
    if noise.has_poisson() {
        if let Some(i) = values.iter().position(|&v| v < 0.0) {
            return Err(GiError::invalid(format!(
                "negative expected count {} at index {i} with shot noise active",
                values[i]
            )));
        }
    }
    Ok(())
}

/// Draw noise independently for every bucket; measurement `j` uses stream `seed.child(j)`.
pub fn apply_noise(b: &BucketVector, noise: &NoiseSpec, seed: &Seed) -> Result<BucketVector> {
    check_counts(&b.values, noise)?;
    let values = b
        .values
        .iter()
        .enumerate()
        .map(|(j, &v)| noisy_count(v, noise, &mut seed.child(j as u64).rng()))
        .collect();
    Ok(BucketVector {
        values,
        exposure_s: b.exposure_s,
        noise: *noise,
        photon_scale: b.photon_scale,
    })
}

fn per_pixel_image(t: &Image, dose: f64, noise: &NoiseSpec, seed: &Seed, what: &str) -> Result<Image> {
    if !(dose > 0.0 && dose.is_finite()) {
        return Err(GiError::invalid(format!("{what} must be positive, got {dose}")));
    }
    let expected: Vec<f64> = t.as_slice().iter().map(|&v| dose * v).collect();
    check_counts(&expected, noise)?;
    let pixels = expected
        .iter()
        .enumerate()
        .map(|(i, &lam)| noisy_count(lam, noise, &mut seed.child(i as u64).rng()) / dose)
        .collect();
    Image::new(t.n(), pixels, t.pitch_mm())
}

/// Pixelated detector receiving `d_px` incident photons per pixel; returns
/// the transmission estimate.
pub fn simulate_direct(t: &Image, d_px: f64, noise: &NoiseSpec, seed: &Seed) -> Result<Image> {
    per_pixel_image(t, d_px, noise, seed, "direct-imaging dose")
}

/// Raster scan with `dwell_photons` incident on each pixel. Shares the
/// per-pixel model and seed path with [`simulate_direct`].
pub fn simulate_scan_probe(t: &Image, dwell_photons: f64, noise: &NoiseSpec, seed: &Seed) -> Result<Image> {
    per_pixel_image(t, dwell_photons, noise, seed, "dwell photons")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::masks::{gen_pinhole_scan, gen_random_binary};
    use crate::stats::mean_std;
    use crate::types::NoiseKind;
    use crate::MaskFamily;

    #[test]
    fn budget_bookkeeping() {
        let b = PhotonBudget::new(4.1e5, 0.01, 4096, 1.0 / 64.0).unwrap();
        assert!((b.p() - 4.1e5 * 4096.0 * 0.01 / 4096.0).abs() < 1e-9);
        assert!((b.tau_s() - 40.96).abs() < 1e-12);
        let c = PhotonBudget::with_total_time(4.1e5, 82.0, 1000, 1.0 / 64.0).unwrap();
        assert!((c.p() - 4.1e5 * 82.0 / 4096.0).abs() < 1e-9);
        assert!(PhotonBudget::new(-1.0, 1.0, 1, 1.0).is_err());
    }

    #[test]
    fn ones_and_zeros() {
        let ones = MaskEnsemble::from_images(&[Image::constant(4, 1.0)], MaskFamily::RandomBinary).unwrap();
        let b = expected_buckets(&Image::constant(4, 1.0), &ones, &PhotonBudget::unit(1)).unwrap();
        assert_eq!(b.values, vec![16.0]);
        let ens = gen_random_binary(4, 10, 0.5, &Seed::new(1)).unwrap();
        let z = expected_buckets(&Image::zeros(4), &ens, &PhotonBudget::unit(10)).unwrap();
        assert!(z.values.iter().all(|&v| v == 0.0));
        assert_eq!(z.noise.kind, NoiseKind::None);
        assert!(expected_buckets(&Image::zeros(5), &ens, &PhotonBudget::unit(10)).is_err());
    }

    #[test]
    fn pinhole_sifts() {
        let t = Image::from_pixels(2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let b = expected_buckets(&t, &gen_pinhole_scan(2).unwrap(), &PhotonBudget::unit(4)).unwrap();
        assert_eq!(b.values, vec![0.1, 0.2, 0.3, 0.4]);
    }

    #[test]
    fn none_noise_is_identity() {
        let b = BucketVector::unit(vec![1.0, 2.5, 0.0]).unwrap();
        let out = apply_noise(&b, &NoiseSpec::none(), &Seed::new(3)).unwrap();
        assert_eq!(out.values, b.values);
    }

    #[test]
    fn large_poisson_rate() {
        let b = BucketVector::unit(vec![1e6; 20]).unwrap();
        let out = apply_noise(&b, &NoiseSpec::poisson(1.0), &Seed::new(4)).unwrap();
        assert!(out.values.iter().all(|v| (v - 1e6).abs() < 5e3));
    }

    #[test]
    fn gaussian_mean_is_zero() {
        let b = BucketVector::unit(vec![0.0; 10_000]).unwrap();
        let out = apply_noise(&b, &NoiseSpec::gaussian(1.54), &Seed::new(5)).unwrap();
        let (m, s) = mean_std(&out.values);
        assert!(m.abs() < 0.08, "{m}");
        assert!((s - 1.54).abs() < 0.05);
    }

    #[test]
    fn poisson_scale_sets_variance() {
        let b = BucketVector::unit(vec![400.0; 20_000]).unwrap();
        let out = apply_noise(&b, &NoiseSpec::poisson(2.0), &Seed::new(6)).unwrap();
        let (m, s) = mean_std(&out.values);
        // var = sigma_p^2 * lambda = 1600
        assert!((m - 400.0).abs() < 4.0 * 40.0 / (20_000f64).sqrt());
        assert!((s - 40.0).abs() < 1.0);
    }

    #[test]
    fn negative_rate_rejected() {
        let b = BucketVector::unit(vec![-1.0]).unwrap();
        assert!(apply_noise(&b, &NoiseSpec::poisson(1.0), &Seed::new(0)).is_err());
        assert!(apply_noise(&b, &NoiseSpec::gaussian(1.0), &Seed::new(0)).is_ok());
    }

    #[test]
    fn direct_and_scan_probe() {
        let t = Image::constant(64, 0.5);
        assert_eq!(simulate_direct(&t, 10.0, &NoiseSpec::none(), &Seed::new(1)).unwrap(), t);
        assert!(simulate_direct(&t, 0.0, &NoiseSpec::none(), &Seed::new(1)).is_err());
        assert!(simulate_scan_probe(&t, -2.0, &NoiseSpec::none(), &Seed::new(1)).is_err());

        let noisy = simulate_direct(&t, 1e4, &NoiseSpec::poisson(1.0), &Seed::new(2)).unwrap();
        let (_, s) = crate::image_stats(&noisy);
        assert!((s - (0.5f64 / 1e4).sqrt()).abs() < 0.0007, "{s}");

        let noise = NoiseSpec::both(1.0, 1.54);
        let sp = simulate_scan_probe(&t, 7.99, &noise, &Seed::new(9)).unwrap();
        let di = simulate_direct(&t, 7.99, &noise, &Seed::new(9)).unwrap();
        assert_eq!(sp, di);
    }
}
