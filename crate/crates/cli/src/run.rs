//! Command execution and output files.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use ghostbench_core::analysis::{
    fit_gaussian_image, gen_uniform_object, psf, rmse_snr, run_sweep, BudgetMode, ReconMethod, SnrRecord,
    SweepConfig, SweepFamily, SweepParam, SweepPoint,
};
use ghostbench_core::ccd::{
    gen_sandpaper_speckle, make_stencil, run_zhang, Mitigation, ZhangExperiment, ZhangOptions, ZHANG_FOV_MM,
};
use ghostbench_core::forward::{apply_noise, expected_buckets, PhotonBudget};
use ghostbench_core::masks::{
    blur_masks, gen_hadamard, gen_pinhole_scan, gen_random_binary, gen_random_gray, gen_ura_scan,
};
use ghostbench_core::recon::{compute_gamma, landweber, pinv_recon, scaled_xc};
use ghostbench_core::{BucketVector, GiError, Image, MaskEnsemble, NoiseKind, NoiseSpec, Seed};
use thiserror::Error;

use crate::config::{Command, ConfigError, RunConfig};
use crate::pgm::{write_pgm, Window};

pub const CSV_HEADER: &str =
    "sweep_name,varied_param,value,family,recon,noise,seed,snr_sim,snr_theory,rmse0,rmsep,rmsem";

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Numeric(#[from] GiError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Numeric(GiError::InvalidParameter(_) | GiError::DimensionMismatch { .. }) => 2,
            RunError::Numeric(_) => 3,
            RunError::Io { .. } => 4,
        }
    }
}

fn invalid(msg: impl Into<String>) -> RunError {
    RunError::Config(ConfigError::Invalid(msg.into()))
}

/// Collects outputs so the manifest can list them.
struct Outputs {
    dir: PathBuf,
    written: Vec<String>,
}

impl Outputs {
    fn create(dir: &Path) -> Result<Self, RunError> {
        fs::create_dir_all(dir).map_err(|source| RunError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, f: impl FnOnce(&mut BufWriter<fs::File>) -> io::Result<()>) -> Result<(), RunError> {
        let path = self.dir.join(name);
        let io_err = |source| RunError::Io {
            path: path.clone(),
            source,
        };
        let mut w = BufWriter::new(fs::File::create(&path).map_err(io_err)?);
        f(&mut w).map_err(io_err)?;
        w.flush().map_err(io_err)?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn image(&mut self, name: &str, img: &Image, win: Window) -> Result<(), RunError> {
        self.write(name, |w| write_pgm(w, img.n(), img.n(), img.as_slice(), win))
    }

    fn text(&mut self, name: &str, body: &str) -> Result<(), RunError> {
        self.write(name, |w| w.write_all(body.as_bytes()))
    }

    /// The manifest is itself a runnable config.
    fn finish(mut self, cfg: &RunConfig) -> Result<(), RunError> {
        let mut body = cfg.serialize();
        body.push('\n');
        for f in &self.written {
            let _ = writeln!(body, "# output: {f}");
        }
        self.text("manifest.txt", &body)
    }
}

pub fn build_ensemble(cfg: &RunConfig, seed: &Seed) -> Result<MaskEnsemble, RunError> {
    let n = cfg.usize("n")?;
    let j = cfg.usize("j")?;
    let (mu, sigma) = (cfg.f64("mu_a"), cfg.f64("sigma_a"));
    let seed = seed.derive("masks");
    Ok(match cfg.str("family") {
        "random_binary" => gen_random_binary(n, j, mu, &seed)?,
        "random_gray" => gen_random_gray(n, j, mu, sigma, &seed)?,
        "blurred" => blur_masks(&gen_random_binary(n, j, mu, &seed)?, cfg.f64("blur_sigma_px"))?,
        "hadamard" => gen_hadamard(n)?,
        "ura_scan" => gen_ura_scan(n)?,
        "pinhole_scan" => gen_pinhole_scan(n)?,
        "sandpaper" => gen_sandpaper_speckle(j, n, ZHANG_FOV_MM, &seed)?,
        other => {
            return Err(invalid(format!(
                "unknown family `{other}` (random_binary, random_gray, blurred, hadamard, ura_scan, pinhole_scan, sandpaper)"
            )))
        }
    })
}

fn build_object(cfg: &RunConfig, n: usize, seed: &Seed) -> Result<Image, RunError> {
    match cfg.str("object") {
        "uniform" => Ok(gen_uniform_object(n, cfg.f64("mu_t"), cfg.f64("sigma_t"), &seed.derive("object"))?),
        "stencil" => Ok(make_stencil(n, 0.0)?),
        other => Err(invalid(format!("unknown object `{other}` (uniform, stencil)"))),
    }
}

fn noise_spec(cfg: &RunConfig) -> Result<NoiseSpec, RunError> {
    let (sp, sm) = (cfg.f64("sigma_p"), cfg.f64("sigma_m"));
    let spec = match NoiseKind::parse(cfg.str("noise")) {
        Some(NoiseKind::None) => NoiseSpec::none(),
        Some(NoiseKind::Poisson) => NoiseSpec::poisson(sp),
        Some(NoiseKind::Gaussian) => NoiseSpec::gaussian(sm),
        Some(NoiseKind::Both) => NoiseSpec::both(sp, sm),
        None => return Err(invalid(format!("unknown noise `{}`", cfg.str("noise")))),
    };
    spec.validate()?;
    Ok(spec)
}

/// Object, ensemble and measured buckets shared by `simulate` and `reconstruct`.
fn measure(cfg: &RunConfig, root: &Seed) -> Result<(MaskEnsemble, Image, BucketVector), RunError> {
    let ens = build_ensemble(cfg, root)?;
    let object = build_object(cfg, ens.n(), root)?;
    let budget = PhotonBudget::new(cfg.f64("flux_b"), cfg.f64("t0_s"), ens.j(), 1.0 / ens.n() as f64)?;
    let clean = expected_buckets(&object, &ens, &budget)?;
    let b = apply_noise(&clean, &noise_spec(cfg)?, &root.derive("noise"))?;
    Ok((ens, object, b))
}

fn write_buckets(w: &mut impl Write, b: &BucketVector) -> io::Result<()> {
    writeln!(w, "index,value")?;
    for (i, v) in b.values.iter().enumerate() {
        writeln!(w, "{i},{v}")?;
    }
    Ok(())
}

fn read_buckets(path: &Path) -> Result<Vec<f64>, RunError> {
    let text = fs::read_to_string(path).map_err(|source| RunError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            l.split(',')
                .nth(1)
                .and_then(|v| v.trim().parse::<f64>().ok())
                .ok_or_else(|| invalid(format!("{}: bad bucket row {}", path.display(), i + 2)))
        })
        .collect()
}

fn run_masks(cfg: &RunConfig, out: &mut Outputs, root: &Seed) -> Result<(), RunError> {
    let ens = build_ensemble(cfg, root)?;
    for k in 0..cfg.usize("export")?.min(ens.j()) {
        out.image(&format!("mask_{k:05}.pgm"), &ens.mask(k), Window::TRANSMISSION)?;
    }
    let mut s = String::new();
    let _ = writeln!(s, "family = {}", ens.family());
    let _ = writeln!(s, "n = {}\nj = {}", ens.n(), ens.j());
    let _ = writeln!(s, "mu_a = {}\nsigma_a = {}", ens.mu_a(), ens.sigma_a());
    let _ = writeln!(s, "gamma = {}", compute_gamma(&ens));
    out.text("stats.txt", &s)
}

fn run_simulate(cfg: &RunConfig, out: &mut Outputs, root: &Seed) -> Result<(), RunError> {
    let (_, object, b) = measure(cfg, root)?;
    out.image("object.pgm", &object, Window::TRANSMISSION)?;
    out.write("buckets.csv", |w| write_buckets(w, &b))
}

fn run_reconstruct(cfg: &RunConfig, out: &mut Outputs, root: &Seed) -> Result<(), RunError> {
    let (ens, object, mut b) = measure(cfg, root)?;
    if cfg.str("buckets") != "-" {
        let values = read_buckets(Path::new(cfg.str("buckets")))?;
        if values.len() != ens.j() {
            return Err(invalid(format!("{} buckets for {} masks", values.len(), ens.j())));
        }
        b = BucketVector::new(values, b.exposure_s, b.photon_scale)?;
    }
    let recon = match ReconMethod::parse(cfg.str("recon")) {
        Some(ReconMethod::Xc) => scaled_xc(&ens, &b)?,
        Some(ReconMethod::Landweber) => landweber(&ens, &b, cfg.f64("alpha"), cfg.usize("iters")?, None)?,
        None if cfg.str("recon") == "pinv" => pinv_recon(&ens, &b)?,
        None => return Err(invalid(format!("unknown recon `{}` (xc, ixc, pinv)", cfg.str("recon")))),
    };
    let (rmse, snr) = rmse_snr(&recon, &object)?;
    out.image("object.pgm", &object, Window::TRANSMISSION)?;
    out.image("recon.pgm", &recon, Window::TRANSMISSION)?;
    out.text("metrics.txt", &format!("rmse = {rmse}\nsnr = {snr}\n"))
}

fn run_psf(cfg: &RunConfig, out: &mut Outputs, root: &Seed) -> Result<(), RunError> {
    let ens = build_ensemble(cfg, root)?;
    let p = psf(&ens);
    let fit = fit_gaussian_image(&p, cfg.f64("fit_radius"));
    out.image("psf.pgm", &p, Window::fit(p.as_slice()))?;
    out.text(
        "psf_fit.txt",
        &format!(
            "amplitude = {}\nsigma_px = {}\noffset = {}\nresidual = {}\nfwhm_px = {}\n",
            fit.amplitude,
            fit.sigma,
            fit.offset,
            fit.residual,
            fit.fwhm()
        ),
    )
}

fn parse_list<T>(cfg: &RunConfig, key: &str, parse: impl Fn(&str) -> Option<T>) -> Result<Vec<T>, RunError> {
    cfg.strs(key)
        .iter()
        .map(|s| parse(s).ok_or_else(|| invalid(format!("`{key}`: unknown entry `{s}`"))))
        .collect()
}

pub fn sweep_config(cfg: &RunConfig) -> Result<SweepConfig, RunError> {
    let varied = cfg.str("varied");
    Ok(SweepConfig {
        name: cfg.str("name").to_string(),
        varied: SweepParam::parse(varied).ok_or_else(|| invalid(format!("unknown sweep parameter `{varied}`")))?,
        values: cfg.floats("values").to_vec(),
        base: SweepPoint {
            n: cfg.usize("n")?,
            j: cfg.usize("j")?,
            mu_a: cfg.f64("mu_a"),
            sigma_a: cfg.f64("sigma_a"),
            mu_t: cfg.f64("mu_t"),
            sigma_t: cfg.f64("sigma_t"),
        },
        flux_b: cfg.f64("flux_b"),
        t0_s: cfg.f64("t0_s"),
        tau_s: cfg.f64("tau_s"),
        sigma_p: cfg.f64("sigma_p"),
        sigma_m: cfg.f64("sigma_m"),
        budget: BudgetMode::parse(cfg.str("budget"))
            .ok_or_else(|| invalid(format!("unknown budget `{}`", cfg.str("budget"))))?,
        families: parse_list(cfg, "families", SweepFamily::parse)?,
        noise: parse_list(cfg, "noise", NoiseKind::parse)?,
        recon: parse_list(cfg, "recon", ReconMethod::parse)?,
        landweber_alpha: cfg.f64("alpha"),
        landweber_iters: cfg.usize("iters")?,
        seeds: cfg.usize("seeds")?,
        root_seed: Seed::new(cfg.seed),
    })
}

pub fn write_csv(w: &mut impl Write, rows: &[SnrRecord]) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.sweep_name,
            r.varied_param,
            r.value,
            r.family,
            r.recon,
            r.noise,
            r.seed,
            r.snr_sim,
            r.snr_theory,
            r.rmse0,
            r.rmsep,
            r.rmsem
        )?;
    }
    Ok(())
}

fn run_sweep_cmd(cfg: &RunConfig, out: &mut Outputs) -> Result<(), RunError> {
    let sc = sweep_config(cfg)?;
    if sc.name.contains(',') {
        return Err(invalid("sweep name must not contain commas"));
    }
    let rows = run_sweep(&sc)?;
    out.write("sweep.csv", |w| write_csv(w, &rows))
}

fn run_zhang_cmd(cfg: &RunConfig, out: &mut Outputs, root: &Seed) -> Result<(), RunError> {
    let exp = cfg.str("experiment");
    let experiment = ZhangExperiment::parse(exp).ok_or_else(|| invalid(format!("unknown experiment `{exp}` (i, ii, iii)")))?;
    let fov = cfg.usize("fov_px")?;
    let binning = experiment.ccd(true).binning;
    let rows = fov.div_ceil(binning);
    let mitigation = match cfg.str("mitigation") {
        "none" => Mitigation::None,
        "crop" => Mitigation::CropSmear { rows: 0..rows },
        "darkfield" => Mitigation::DarkfieldSubtract {
            signal: 0..rows,
            dark: rows..2 * rows,
        },
        other => return Err(invalid(format!("unknown mitigation `{other}` (none, crop, darkfield)"))),
    };
    let t0 = cfg.f64("t0_s");
    let opts = ZhangOptions {
        experiment,
        shutter: cfg.bool("shutter"),
        j: cfg.usize("j")?,
        fov_px: fov,
        t0_s: (t0 > 0.0).then_some(t0),
        mitigation,
    };
    let art = run_zhang(&opts, root)?;
    out.image("stencil.pgm", &art.stencil, Window::TRANSMISSION)?;
    if let Some(r) = &art.reconstruction {
        out.image("recon.pgm", r, Window::fit(r.as_slice()))?;
    }
    if let Some(b) = &art.buckets {
        out.write("buckets.csv", |w| write_buckets(w, b))?;
    }
    if let Some(f) = &art.frame {
        out.write("frame.pgm", |w| write_pgm(w, f.cols, f.rows, &f.data, Window::fit(&f.data)))?;
    }
    Ok(())
}

/// Execute one command and write its outputs plus `manifest.txt`.
pub fn run(cfg: &RunConfig) -> Result<(), RunError> {
    let mut out = Outputs::create(&cfg.output_dir)?;
    // shared across commands so `reconstruct` rebuilds the masks and object `simulate` used
    let root = Seed::new(cfg.seed);
    log::info!("running {} with seed {}", cfg.command.name(), cfg.seed);
    match cfg.command {
        Command::Masks => run_masks(cfg, &mut out, &root)?,
        Command::Simulate => run_simulate(cfg, &mut out, &root)?,
        Command::Reconstruct => run_reconstruct(cfg, &mut out, &root)?,
        Command::Psf => run_psf(cfg, &mut out, &root)?,
        Command::Sweep => run_sweep_cmd(cfg, &mut out)?,
        Command::Zhang => run_zhang_cmd(cfg, &mut out, &root)?,
    }
    out.finish(cfg)
}
