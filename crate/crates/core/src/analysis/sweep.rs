//! Monte-Carlo parameter sweeps comparing simulated and predicted SNR.

use rand::seq::index::sample;
use rand::Rng;

use crate::analysis::metrics::{rmse, snr_from_rmse};
use crate::analysis::theory::{theory_snr_noise, TheoryFamily, TheoryParams};
use crate::ensemble::MaskEnsemble;
use crate::error::{GiError, Result};
use crate::forward::{apply_noise, expected_buckets, PhotonBudget};
use crate::image::Image;
use crate::masks::{gen_random_binary, gen_random_gray, gen_ura_scan, is_prime};
use crate::recon::{landweber, scaled_xc_multi};
use crate::seed::Seed;
use crate::stats::image_stats;
use crate::types::{BucketVector, NoiseKind, NoiseSpec};

/// Support slack for the scaled-uniform object generator (see gray masks).
const OBJECT_SUPPORT_SLACK: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepParam {
    J,
    N,
    MuA,
    SigmaA,
    MuT,
    SigmaT,
    /// Photons per pixel per measurement, `B t0 Δ²`.
    PhotonsPerMeasurement,
}

impl SweepParam {
    pub const ALL: [SweepParam; 7] = [
        SweepParam::J,
        SweepParam::N,
        SweepParam::MuA,
        SweepParam::SigmaA,
        SweepParam::MuT,
        SweepParam::SigmaT,
        SweepParam::PhotonsPerMeasurement,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::J => "j",
            SweepParam::N => "n",
            SweepParam::MuA => "mu_a",
            SweepParam::SigmaA => "sigma_a",
            SweepParam::MuT => "mu_t",
            SweepParam::SigmaT => "sigma_t",
            SweepParam::PhotonsPerMeasurement => "p_per_j",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        SweepParam::ALL.into_iter().find(|p| p.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BudgetMode {
    /// Fixed exposure per mask: the dose grows with `J`.
    ConstantT0,
    /// Fixed total time split over the masks.
    ConstantTau,
    /// No noise at all.
    NoiseFree,
}

impl BudgetMode {
    pub fn name(self) -> &'static str {
        match self {
            BudgetMode::ConstantT0 => "constant_t0",
            BudgetMode::ConstantTau => "constant_tau",
            BudgetMode::NoiseFree => "noise_free",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [BudgetMode::ConstantT0, BudgetMode::ConstantTau, BudgetMode::NoiseFree]
            .into_iter()
            .find(|m| m.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepFamily {
    /// Binary masks when `σ_A` sits on the binary bound, uniform gray otherwise.
    Random,
    /// Cyclic URA translations; needs prime `n`, `J < n²` uses a random subset.
    Ortho,
}

impl SweepFamily {
    pub fn name(self) -> &'static str {
        match self {
            SweepFamily::Random => "random",
            SweepFamily::Ortho => "ortho",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "random" => Some(SweepFamily::Random),
            "ortho" => Some(SweepFamily::Ortho),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReconMethod {
    Xc,
    Landweber,
}

impl ReconMethod {
    pub fn name(self) -> &'static str {
        match self {
            ReconMethod::Xc => "xc",
            ReconMethod::Landweber => "ixc",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "xc" => Some(ReconMethod::Xc),
            "ixc" | "landweber" => Some(ReconMethod::Landweber),
            _ => None,
        }
    }
}

/// Values of the swept quantities at one grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub n: usize,
    pub j: usize,
    pub mu_a: f64,
    pub sigma_a: f64,
    pub mu_t: f64,
    pub sigma_t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub name: String,
    pub varied: SweepParam,
    pub values: Vec<f64>,
    pub base: SweepPoint,
    pub flux_b: f64,
    pub t0_s: f64,
    pub tau_s: f64,
    pub sigma_p: f64,
    pub sigma_m: f64,
    pub budget: BudgetMode,
    pub families: Vec<SweepFamily>,
    pub noise: Vec<NoiseKind>,
    pub recon: Vec<ReconMethod>,
    pub landweber_alpha: f64,
    pub landweber_iters: usize,
    pub seeds: usize,
    pub root_seed: Seed,
}

/// One sweep result row.
#[derive(Debug, Clone, PartialEq)]
pub struct SnrRecord {
    pub sweep_name: String,
    pub varied_param: String,
    pub value: f64,
    pub family: String,
    pub recon: String,
    pub noise: String,
    pub seed: u64,
    pub snr_sim: f64,
    pub snr_theory: f64,
    pub rmse0: f64,
    pub rmsep: f64,
    pub rmsem: f64,
}

/// Uniform random object scaled and offset to mean `mu_t`, std `sigma_t`.
pub fn gen_uniform_object(n: usize, mu_t: f64, sigma_t: f64, seed: &Seed) -> Result<Image> {
    let w = sigma_t * 3f64.sqrt();
    if !(sigma_t >= 0.0) || mu_t - w < -OBJECT_SUPPORT_SLACK || mu_t + w > 1.0 + OBJECT_SUPPORT_SLACK {
        return Err(GiError::invalid(format!(
            "object statistics mu_T={mu_t}, sigma_T={sigma_t} leave [0, 1]"
        )));
    }
    let mut rng = seed.rng();
    let px = (0..n * n)
        .map(|_| (mu_t + w * (2.0 * rng.random::<f64>() - 1.0)).clamp(0.0, 1.0))
        .collect();
    Image::from_pixels(n, px)
}

impl SweepConfig {
    pub fn point(&self, value: f64) -> Result<SweepPoint> {
        let mut p = self.base;
        let as_count = |v: f64, what: &str| -> Result<usize> {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(GiError::invalid(format!("{what} must be a positive integer, got {v}")))
            }
        };
        match self.varied {
            SweepParam::J => p.j = as_count(value, "J")?,
            SweepParam::N => p.n = as_count(value, "n")?,
            SweepParam::MuA => p.mu_a = value,
            SweepParam::SigmaA => p.sigma_a = value,
            SweepParam::MuT => p.mu_t = value,
            SweepParam::SigmaT => p.sigma_t = value,
            SweepParam::PhotonsPerMeasurement => {}
        }
        Ok(p)
    }

    fn budget(&self, p: &SweepPoint, value: f64) -> Result<PhotonBudget> {
        let pitch = 1.0 / p.n as f64;
        match (self.varied, self.budget) {
            (SweepParam::PhotonsPerMeasurement, _) => {
                if !(value > 0.0) {
                    return Err(GiError::invalid("photons per measurement must be positive"));
                }
                PhotonBudget::new(value / (self.t0_s * pitch * pitch), self.t0_s, p.j, pitch)
            }
            (_, BudgetMode::ConstantTau) => PhotonBudget::with_total_time(self.flux_b, self.tau_s, p.j, pitch),
            _ => PhotonBudget::new(self.flux_b, self.t0_s, p.j, pitch),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(GiError::invalid("sweep needs at least one value"));
        }
        if self.families.is_empty() || self.recon.is_empty() || self.seeds == 0 {
            return Err(GiError::invalid("sweep needs families, recon methods and seeds"));
        }
        if self.budget != BudgetMode::NoiseFree && self.noise.is_empty() {
            return Err(GiError::invalid("noisy sweep needs at least one noise kind"));
        }
        for &v in &self.values {
            self.point(v)?;
        }
        Ok(())
    }
}

fn is_binary_point(p: &SweepPoint) -> bool {
    (p.sigma_a - (p.mu_a * (1.0 - p.mu_a)).sqrt()).abs() < 1e-9
}

/// Mask ensemble for a sweep point.
pub fn sweep_ensemble(family: SweepFamily, p: &SweepPoint, seed: &Seed) -> Result<MaskEnsemble> {
    match family {
        SweepFamily::Random if is_binary_point(p) => gen_random_binary(p.n, p.j, p.mu_a, seed),
        SweepFamily::Random => gen_random_gray(p.n, p.j, p.mu_a, p.sigma_a, seed),
        SweepFamily::Ortho => {
            if !is_prime(p.n) || p.n < 3 {
                return Err(GiError::invalid(format!("orthogonal sweeps need a prime side, got n={}", p.n)));
            }
            let full = gen_ura_scan(p.n)?;
            let npx = p.n * p.n;
            if p.j > npx {
                return Err(GiError::invalid(format!("orthogonal family has only {npx} masks, J={}", p.j)));
            }
            if p.j == npx {
                return Ok(full);
            }
            let mut idx = sample(&mut seed.rng(), npx, p.j).into_vec();
            idx.sort_unstable();
            full.subset(idx)
        }
    }
}

fn noise_spec(kind: NoiseKind, cfg: &SweepConfig) -> NoiseSpec {
    match kind {
        NoiseKind::None => NoiseSpec::none(),
        NoiseKind::Poisson => NoiseSpec::poisson(cfg.sigma_p),
        NoiseKind::Gaussian => NoiseSpec::gaussian(cfg.sigma_m),
        NoiseKind::Both => NoiseSpec::both(cfg.sigma_p, cfg.sigma_m),
    }
}

/// Run every grid point, family, seed, noise kind and reconstruction in a
/// fixed order.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SnrRecord>> {
    cfg.validate()?;
    let root = cfg.root_seed.derive("sweep").derive(&cfg.name);
    let kinds: Vec<NoiseKind> = if cfg.budget == BudgetMode::NoiseFree {
        vec![NoiseKind::None]
    } else {
        cfg.noise.clone()
    };
    let mut out = Vec::new();
    for (pi, &value) in cfg.values.iter().enumerate() {
        let point = cfg.point(value)?;
        let budget = cfg.budget(&point, value)?;
        for s in 0..cfg.seeds {
            let rep = root.derive(&format!("point{pi}")).child(s as u64);
            let object = gen_uniform_object(point.n, point.mu_t, point.sigma_t, &rep.derive("object"))?;
            let (mu_t, sigma_t) = image_stats(&object);
            for &family in &cfg.families {
                let fam_seed = rep.derive(family.name());
                let ens = sweep_ensemble(family, &point, &fam_seed.derive("masks"))?;
                let clean = expected_buckets(&object, &ens, &budget)?;
                let buckets = kinds
                    .iter()
                    .map(|&k| apply_noise(&clean, &noise_spec(k, cfg), &fam_seed.derive(k.name())))
                    .collect::<Result<Vec<BucketVector>>>()?;
                let refs: Vec<&BucketVector> = buckets.iter().collect();
                let xcs = if cfg.recon.contains(&ReconMethod::Xc) {
                    scaled_xc_multi(&ens, &refs)?
                } else {
                    Vec::new()
                };
                for (ki, &kind) in kinds.iter().enumerate() {
                    let spec = noise_spec(kind, cfg);
                    let tp = TheoryParams {
                        j: point.j as f64,
                        n: point.n as f64,
                        mu_a: ens.mu_a(),
                        sigma_a: ens.sigma_a(),
                        mu_t,
                        sigma_t,
                        p: if cfg.budget == BudgetMode::NoiseFree {
                            f64::INFINITY
                        } else {
                            budget.p()
                        },
                        sigma_p: spec.eff_sigma_p(),
                        sigma_m: spec.eff_sigma_m(),
                    };
                    let tf = match family {
                        SweepFamily::Random => TheoryFamily::Random,
                        SweepFamily::Ortho => TheoryFamily::Ortho,
                    };
                    let th = theory_snr_noise(&tp, tf);
                    for &method in &cfg.recon {
                        let recon = match method {
                            ReconMethod::Xc => xcs[ki].clone(),
                            ReconMethod::Landweber => {
                                landweber(&ens, &buckets[ki], cfg.landweber_alpha, cfg.landweber_iters, None)?
                            }
                        };
                        let r = rmse(recon.as_slice(), object.as_slice());
                        out.push(SnrRecord {
                            sweep_name: cfg.name.clone(),
                            varied_param: cfg.varied.name().to_string(),
                            value,
                            family: ens.family().name().to_string(),
                            recon: method.name().to_string(),
                            noise: kind.name().to_string(),
                            seed: rep.value,
                            snr_sim: snr_from_rmse(r),
                            snr_theory: th.snr,
                            rmse0: th.rmse0,
                            rmsep: th.rmsep,
                            rmsem: th.rmsem,
                        });
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Simulated RMSE split into artefact, shot-noise and per-measurement parts.
///
/// The reconstruction is linear in the buckets, so each noise channel is
/// isolated by differencing against the noise-free reconstruction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmseComponents {
    pub rmse0: f64,
    pub rmsep: f64,
    pub rmsem: f64,
}

pub fn rmse_components(
    ens: &MaskEnsemble,
    object: &Image,
    budget: &PhotonBudget,
    sigma_p: f64,
    sigma_m: f64,
    seed: &Seed,
) -> Result<RmseComponents> {
    let clean = expected_buckets(object, ens, budget)?;
    let bp = apply_noise(&clean, &NoiseSpec::poisson(sigma_p), &seed.derive("poisson"))?;
    let bm = apply_noise(&clean, &NoiseSpec::gaussian(sigma_m), &seed.derive("gaussian"))?;
    let r = scaled_xc_multi(ens, &[&clean, &bp, &bm])?;
    Ok(RmseComponents {
        rmse0: rmse(r[0].as_slice(), object.as_slice()),
        rmsep: rmse(r[1].as_slice(), r[0].as_slice()),
        rmsem: rmse(r[2].as_slice(), r[0].as_slice()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> SweepConfig {
        SweepConfig {
            name: "t".into(),
            varied: SweepParam::J,
            values: vec![64.0, 256.0],
            base: SweepPoint {
                n: 8,
                j: 64,
                mu_a: 0.5,
                sigma_a: 0.5,
                mu_t: 0.5,
                sigma_t: 0.2887,
            },
            flux_b: 4.1e5,
            t0_s: 0.01,
            tau_s: 82.0,
            sigma_p: 1.0,
            sigma_m: 1.0,
            budget: BudgetMode::NoiseFree,
            families: vec![SweepFamily::Random],
            noise: vec![],
            recon: vec![ReconMethod::Xc],
            landweber_alpha: 1.0,
            landweber_iters: 10,
            seeds: 2,
            root_seed: Seed::new(1),
        }
    }

    #[test]
    fn object_generator() {
        let t = gen_uniform_object(64, 0.5, 0.2887, &Seed::new(3)).unwrap();
        let (m, s) = image_stats(&t);
        assert!((m - 0.5).abs() < 0.02 && (s - 0.2887).abs() < 0.01);
        assert!(gen_uniform_object(8, 0.2, 0.3, &Seed::new(3)).is_err());
    }

    #[test]
    fn deterministic_rows() {
        let a = run_sweep(&cfg()).unwrap();
        let b = run_sweep(&cfg()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 4);
        assert!(a.iter().all(|r| r.noise == "none" && r.rmsep == 0.0 && r.snr_sim > 0.0));
    }

    #[test]
    fn ortho_needs_prime_side() {
        let mut c = cfg();
        c.families = vec![SweepFamily::Ortho];
        assert!(run_sweep(&c).is_err());
        c.base.n = 7;
        c.values = vec![20.0, 49.0];
        let rows = run_sweep(&c).unwrap();
        assert_eq!(rows[0].family, "ura_scan");
        assert_eq!(rows[2].snr_theory, f64::INFINITY);
        c.values = vec![50.0];
        assert!(run_sweep(&c).is_err());
    }

    #[test]
    fn invalid_grid() {
        let mut c = cfg();
        c.values = vec![10.5];
        assert!(run_sweep(&c).is_err());
        c.values.clear();
        assert!(run_sweep(&c).is_err());
    }

    #[test]
    fn landweber_rows_and_noise() {
        let mut c = cfg();
        c.budget = BudgetMode::ConstantT0;
        c.noise = vec![NoiseKind::Poisson, NoiseKind::Both];
        c.recon = vec![ReconMethod::Xc, ReconMethod::Landweber];
        c.seeds = 1;
        let rows = run_sweep(&c).unwrap();
        assert_eq!(rows.len(), 2 * 2 * 2);
        assert!(rows.iter().any(|r| r.recon == "ixc"));
        assert!(rows.iter().filter(|r| r.noise == "both").all(|r| r.rmsem > 0.0));
    }
}
