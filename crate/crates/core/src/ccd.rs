//! Sandpaper speckle, the XGI stencil and a shutterless CCD read-out model.
//!
//! Geometry follows a 5 mm field of view imaged at 20 µm per sensor pixel
//! (250 px) on a 1296-row sensor. Charge packets are clocked towards row 0;
//! without a shutter every packet keeps integrating the scene rows it crosses
//! on its way to the register.

use std::ops::Range;
use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::psf::{fit_gaussian, summed_autocorrelation};
use crate::ensemble::{EnsembleHints, MaskEnsemble, MaskFamily, MaskSource};
use crate::error::{GiError, Result};
use crate::forward::sample_poisson;
use crate::image::{dot, Image};
use crate::masks::{blur_in_place, gaussian_taps};
use crate::recon::scaled_xc;
use crate::seed::Seed;
use crate::types::{BucketVector, NoiseSpec};

/// Photons per second per unbinned pixel at full transmission.
pub const ZHANG_RATE: f64 = 120.0;
pub const ZHANG_PITCH_MM: f64 = 0.02;
pub const ZHANG_FOV_PX: usize = 250;
pub const ZHANG_FOV_MM: f64 = 5.0;
/// Speckle blur. The intensity correlation then has a FWHM of about
/// `2.355·√2·σ` ≈ 0.39 mm.
pub const SANDPAPER_SIGMA_MM: f64 = 0.117;
/// Dark/electronic term `DARK_GAIN · Poisson(DARK_RATE · (t0 + t1))` per output pixel.
pub const DARK_GAIN: f64 = 0.01;
pub const DARK_RATE: f64 = 100.0;

/// Rectangular frame of real values, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Frame {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Frame {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn row_sum(&self, rows: Range<usize>) -> f64 {
        self.data[rows.start * self.cols..rows.end * self.cols].iter().sum()
    }
}

/// Which end of the sensor the read-out register sits at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReadoutOrder {
    /// Row 0 is read first (default).
    TowardRowZero,
    TowardLastRow,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CcdConfig {
    /// Sensor rows before binning.
    pub rows: usize,
    /// Sensor columns before binning.
    pub cols: usize,
    /// Full-frame read-out time `t1`.
    pub readout_s: f64,
    pub binning: usize,
    /// Charge cleared before the exposure starts; otherwise packets also carry
    /// what they picked up while the previous frame was clocked out.
    pub cleared_before_exposure: bool,
    pub rotation_deg: f64,
    /// Mechanical shutter closed during read-out.
    pub shutter: bool,
    pub order: ReadoutOrder,
    /// Sensor row and column of the scene's top-left pixel (unbinned).
    pub fov_row_offset: usize,
    pub fov_col_offset: usize,
}

impl CcdConfig {
    /// Full-resolution read-out. 1296 rows rather than the nominal 1300 so the
    /// 8×8 binned mode divides evenly.
    pub fn pixis_full() -> Self {
        CcdConfig {
            rows: 1296,
            cols: 1340,
            readout_s: 0.93,
            binning: 1,
            cleared_before_exposure: true,
            rotation_deg: 0.0,
            shutter: false,
            order: ReadoutOrder::TowardRowZero,
            fov_row_offset: 0,
            fov_col_offset: 0,
        }
    }

    pub fn pixis_binned() -> Self {
        CcdConfig {
            readout_s: 0.12,
            binning: 8,
            ..CcdConfig::pixis_full()
        }
    }

    pub fn binned_rows(&self) -> usize {
        self.rows / self.binning
    }

    pub fn binned_cols(&self) -> usize {
        self.cols.div_ceil(self.binning)
    }

    pub fn validate(&self) -> Result<()> {
        if self.binning == 0 || self.rows == 0 || self.cols == 0 {
            return Err(GiError::invalid("sensor size and binning must be positive"));
        }
        if self.rows % self.binning != 0 {
            return Err(GiError::invalid(format!(
                "rows ({}) must be divisible by binning ({})",
                self.rows, self.binning
            )));
        }
        if !(self.readout_s >= 0.0) {
            return Err(GiError::invalid("read-out time must be >= 0"));
        }
        Ok(())
    }

    /// Read-out position of binned row `r` (0 = first read).
    fn read_rank(&self, r: usize) -> usize {
        match self.order {
            ReadoutOrder::TowardRowZero => r,
            ReadoutOrder::TowardLastRow => self.binned_rows() - 1 - r,
        }
    }

    /// Coefficient of each binned row's rate in the sum over `summed` rows
    /// (read-out ranks), with the shutter and clearing settings applied.
    pub fn row_weights(&self, t0: f64, summed: &Range<usize>) -> Vec<f64> {
        let rb = self.binned_rows();
        let dwell = self.readout_s / rb as f64;
        (0..rb)
            .map(|row| {
                let k = self.read_rank(row);
                let mut w = if summed.contains(&k) { t0 } else { 0.0 };
                if !self.shutter {
                    // packets read after k pass over it on their way out
                    let after = summed.end.saturating_sub(summed.start.max(k + 1));
                    w += dwell * after as f64;
                    if !self.cleared_before_exposure {
                        let before = summed.end.min(k).saturating_sub(summed.start);
                        w += dwell * before as f64;
                    }
                }
                w
            })
            .collect()
    }
}

/// Expected charge after exposure `t0` and a shutterless read-out:
/// `Q(r,c) = t0·rate(r,c) + (t1/R)·Σ_{k<r} rate(k,c)` in read-out order.
pub fn readout_smear(rate: &Frame, t0: f64, ccd: &CcdConfig) -> Result<Frame> {
    ccd.validate()?;
    if rate.rows != ccd.binned_rows() || rate.cols != ccd.binned_cols() {
        return Err(GiError::invalid(format!(
            "rate frame {}x{} does not match the binned sensor {}x{}",
            rate.rows,
            rate.cols,
            ccd.binned_rows(),
            ccd.binned_cols()
        )));
    }
    if rate.data.iter().any(|&v| v < 0.0) {
        return Err(GiError::invalid("photon rates must be non-negative"));
    }
    let rb = rate.rows;
    let dwell = ccd.readout_s / rb as f64;
    let mut out = Frame::zeros(rb, rate.cols);
    for c in 0..rate.cols {
        let total: f64 = (0..rb).map(|r| rate.get(r, c)).sum();
        let mut prefix = 0.0;
        for rank in 0..rb {
            let r = match ccd.order {
                ReadoutOrder::TowardRowZero => rank,
                ReadoutOrder::TowardLastRow => rb - 1 - rank,
            };
            let here = rate.get(r, c);
            let mut q = t0 * here;
            if !ccd.shutter {
                q += dwell * prefix;
                if !ccd.cleared_before_exposure {
                    q += dwell * (total - prefix - here);
                }
            }
            *out.at_mut(r, c) = q;
            prefix += here;
        }
    }
    Ok(out)
}

/// Drop a scene (rates per unbinned pixel) onto the sensor and bin it.
pub fn place_scene(scene: &Image, ccd: &CcdConfig) -> Result<Frame> {
    ccd.validate()?;
    let n = scene.n();
    if ccd.fov_row_offset + n > ccd.rows || ccd.fov_col_offset + n > ccd.cols {
        return Err(GiError::invalid(format!(
            "{n}px scene at ({}, {}) does not fit a {}x{} sensor",
            ccd.fov_row_offset, ccd.fov_col_offset, ccd.rows, ccd.cols
        )));
    }
    let b = ccd.binning;
    let mut f = Frame::zeros(ccd.binned_rows(), ccd.binned_cols());
    for y in 0..n {
        for x in 0..n {
            *f.at_mut((ccd.fov_row_offset + y) / b, (ccd.fov_col_offset + x) / b) += scene.get(x, y);
        }
    }
    Ok(f)
}

/// Binned read-out row of every scene pixel, row-major over the scene.
fn scene_rows(n: usize, ccd: &CcdConfig) -> Vec<usize> {
    (0..n * n).map(|p| (ccd.fov_row_offset + p / n) / ccd.binning).collect()
}

/// One detector frame: Poisson counts of `ZHANG_RATE·T·A` integrated over the
/// exposure (and the read-out when shutterless), plus the dark term.
pub fn zhang_frame(t: &Image, mask: &Image, t0: f64, ccd: &CcdConfig, seed: &Seed) -> Result<Frame> {
    t.check_same_size(mask)?;
    let rate = t
        .as_slice()
        .iter()
        .zip(mask.as_slice())
        .map(|(a, b)| ZHANG_RATE * a * b)
        .collect();
    let rate = Image::new(t.n(), rate, t.pitch_mm())?;
    let expected = readout_smear(&place_scene(&rate, ccd)?, t0, ccd)?;
    let dark_mean = DARK_RATE * (t0 + ccd.readout_s);
    let mut out = Frame::zeros(expected.rows, expected.cols);
    for r in 0..expected.rows {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.child_value(r as u64));
        for c in 0..expected.cols {
            let primary = sample_poisson(expected.get(r, c), &mut rng);
            let dark = DARK_GAIN * sample_poisson(dark_mean, &mut rng);
            *out.at_mut(r, c) = primary + dark;
        }
    }
    Ok(out)
}

/// How frame pixels are reduced to a bucket value.
#[derive(Debug, Clone, PartialEq)]
pub enum Mitigation {
    None,
    /// Sum only these binned rows (the object rows), dropping the smear above.
    CropSmear { rows: Range<usize> },
    /// Sum `signal` rows after subtracting each column's mean over `dark` rows.
    DarkfieldSubtract { signal: Range<usize>, dark: Range<usize> },
}

fn check_rows(r: &Range<usize>, rows: usize) -> Result<()> {
    if r.start >= r.end || r.end > rows {
        return Err(GiError::invalid(format!("row range {r:?} invalid for {rows} rows")));
    }
    Ok(())
}

pub fn frame_to_bucket(frame: &Frame, mitigation: &Mitigation) -> Result<f64> {
    match mitigation {
        Mitigation::None => Ok(frame.sum()),
        Mitigation::CropSmear { rows } => {
            check_rows(rows, frame.rows)?;
            Ok(frame.row_sum(rows.clone()))
        }
        Mitigation::DarkfieldSubtract { signal, dark } => {
            check_rows(signal, frame.rows)?;
            check_rows(dark, frame.rows)?;
            let ratio = signal.len() as f64 / dark.len() as f64;
            Ok(frame.row_sum(signal.clone()) - ratio * frame.row_sum(dark.clone()))
        }
    }
}

/// One bucket channel: a scene, an exposure, a sensor and a reduction.
#[derive(Debug, Clone)]
pub struct ZhangChannel {
    pub scene: Image,
    pub t0: f64,
    pub ccd: CcdConfig,
    pub mitigation: Mitigation,
    pub seed: Seed,
}

struct Region {
    weights: Vec<f64>,
    dark_pixels: f64,
    coef: f64,
}

impl ZhangChannel {
    /// Summed regions as (read-out rank range, coefficient).
    fn regions(&self) -> Result<Vec<(Range<usize>, f64)>> {
        let rb = self.ccd.binned_rows();
        let to_rank = |r: &Range<usize>| -> Range<usize> {
            match self.ccd.order {
                ReadoutOrder::TowardRowZero => r.clone(),
                ReadoutOrder::TowardLastRow => rb - r.end..rb - r.start,
            }
        };
        Ok(match &self.mitigation {
            Mitigation::None => vec![(0..rb, 1.0)],
            Mitigation::CropSmear { rows } => {
                check_rows(rows, rb)?;
                vec![(to_rank(rows), 1.0)]
            }
            Mitigation::DarkfieldSubtract { signal, dark } => {
                check_rows(signal, rb)?;
                check_rows(dark, rb)?;
                if signal.start < dark.end && dark.start < signal.end {
                    return Err(GiError::invalid("signal and dark regions must not overlap"));
                }
                vec![
                    (to_rank(signal), 1.0),
                    (to_rank(dark), -(signal.len() as f64) / dark.len() as f64),
                ]
            }
        })
    }

    fn build(&self) -> Result<Vec<Region>> {
        self.ccd.validate()?;
        let n = self.scene.n();
        if self.ccd.fov_row_offset + n > self.ccd.rows || self.ccd.fov_col_offset + n > self.ccd.cols {
            return Err(GiError::invalid("scene does not fit the sensor"));
        }
        let rows = scene_rows(n, &self.ccd);
        let cols = self.ccd.binned_cols() as f64;
        self.regions()?
            .into_iter()
            .map(|(range, coef)| {
                let rw = self.ccd.row_weights(self.t0, &range);
                let weights = self
                    .scene
                    .as_slice()
                    .iter()
                    .zip(&rows)
                    .map(|(&t, &r)| ZHANG_RATE * t * rw[r])
                    .collect();
                Ok(Region {
                    weights,
                    dark_pixels: range.len() as f64 * cols,
                    coef,
                })
            })
            .collect()
    }

    /// Exposure-weighted photons per unit of `Σ A T` at unit transmission.
    fn photon_scale(&self, regions: &[Region]) -> f64 {
        let t_sum = self.scene.sum();
        let w: f64 = regions[0].weights.iter().sum();
        if t_sum > 0.0 && w > 0.0 {
            w / t_sum
        } else {
            ZHANG_RATE * self.t0
        }
    }
}

/// Bucket values for every channel, sharing one pass over the masks.
///
/// Summing a frame of independent Poisson pixels is itself Poisson with the
/// summed mean, so each region is drawn directly from its expected total
/// (`Σ rate·weight`) instead of materialising frames.
pub fn zhang_buckets(ens: &MaskEnsemble, channels: &[ZhangChannel]) -> Result<Vec<BucketVector>> {
    let built = channels.iter().map(|c| c.build()).collect::<Result<Vec<_>>>()?;
    for c in channels {
        if c.scene.n() != ens.n() {
            return Err(GiError::DimensionMismatch {
                what: "scene side vs mask side",
                expected: ens.n(),
                actual: c.scene.n(),
            });
        }
    }
    let flat: Vec<&Region> = built.iter().flatten().collect();
    let nr = flat.len();
    let mut expected: Vec<f64> = Vec::with_capacity(ens.j() * nr);
    ens.fold_masks(
        Vec::new,
        |acc: &mut Vec<f64>, _, mask| {
            for r in &flat {
                acc.push(dot(mask, &r.weights));
            }
        },
        |part| expected.extend(part),
    );
    let mut out = Vec::with_capacity(channels.len());
    let mut offset = 0;
    for (ch, regions) in channels.iter().zip(&built) {
        let dark_mean = DARK_RATE * (ch.t0 + ch.ccd.readout_s);
        let values = (0..ens.j())
            .map(|j| {
                let mut rng = ChaCha8Rng::seed_from_u64(ch.seed.child_value(j as u64));
                regions
                    .iter()
                    .enumerate()
                    .map(|(k, reg)| {
                        let lam = expected[j * nr + offset + k];
                        let primary = sample_poisson(lam, &mut rng);
                        let dark = DARK_GAIN * sample_poisson(dark_mean * reg.dark_pixels, &mut rng);
                        reg.coef * (primary + dark)
                    })
                    .sum()
            })
            .collect();
        let mut b = BucketVector::new(values, ch.t0, ch.photon_scale(regions))?;
        b.noise = NoiseSpec::poisson(1.0);
        out.push(b);
        offset += regions.len();
    }
    Ok(out)
}

#[derive(Debug)]
struct SandpaperSource {
    n: usize,
    j: usize,
    taps: Vec<(usize, f64)>,
    seed: Seed,
}

impl MaskSource for SandpaperSource {
    fn side(&self) -> usize {
        self.n
    }
    fn count(&self) -> usize {
        self.j
    }
    fn render(&self, index: usize, out: &mut [f64]) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed.child_value(index as u64));
        for v in out.iter_mut() {
            *v = (rng.next_u32() >> 31) as f64;
        }
        blur_in_place(out, self.n, &self.taps, &mut Vec::new());
        let (lo, hi) = out
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
        // each mask is stretched to [0.5, 1]
        let span = hi - lo;
        for v in out.iter_mut() {
            *v = if span > 0.0 { 0.5 + 0.5 * (*v - lo) / span } else { 0.75 };
        }
    }
}

/// 50% binary masks blurred to 0.4 mm FWHM speckle, each rescaled to [0.5, 1].
pub fn gen_sandpaper_speckle(j: usize, n: usize, fov_mm: f64, seed: &Seed) -> Result<MaskEnsemble> {
    if n < 2 || j == 0 || !(fov_mm > 0.0) {
        return Err(GiError::invalid("sandpaper speckle needs n >= 2, J >= 1 and a positive field of view"));
    }
    let pitch = fov_mm / n as f64;
    let src = SandpaperSource {
        n,
        j,
        taps: gaussian_taps(SANDPAPER_SIGMA_MM / pitch, n),
        seed: seed.clone(),
    };
    MaskEnsemble::from_source(Arc::new(src), MaskFamily::Blurred, pitch, EnsembleHints::default())
}

#[derive(Debug, Clone, PartialEq)]
pub struct G2Profile {
    /// `(radius in pixels, g²)` averaged over integer-radius rings.
    pub radial: Vec<(f64, f64)>,
    pub max: f64,
    /// FWHM of the fitted Gaussian bump, absent when there is no bump.
    pub fwhm_mm: Option<f64>,
}

/// Second-order intensity correlation `⟨A(p)A(p+r)⟩/(⟨A(p)⟩⟨A(p+r)⟩)`,
/// averaged over reference points and directions.
pub fn g2_profile(ens: &MaskEnsemble) -> Result<G2Profile> {
    let n = ens.n();
    let abar = Image::from_raw(n, ens.pixel_mean().to_vec(), ens.pitch_mm());
    if abar.sum() <= 0.0 {
        return Err(GiError::Degenerate("g2 of an all-dark ensemble".into()));
    }
    let num = summed_autocorrelation(ens, false);
    let den = crate::fft::convolve(abar.as_slice(), &reversed(abar.as_slice(), n), n);
    let j = ens.j() as f64;
    let g2: Vec<f64> = num.iter().zip(&den).map(|(a, d)| (a / j) / d).collect();
    let g2 = Image::from_raw(n, g2, ens.pitch_mm()).centered();

    let c = (n / 2) as f64;
    let rmax = n / 2;
    let mut ring = vec![(0.0, 0usize); rmax + 1];
    let radius = (n / 4).max(2) as f64;
    let (mut r2s, mut ys) = (Vec::new(), Vec::new());
    for y in 0..n {
        for x in 0..n {
            let d2 = (x as f64 - c).powi(2) + (y as f64 - c).powi(2);
            let k = d2.sqrt().round() as usize;
            if k <= rmax {
                ring[k].0 += g2.get(x, y);
                ring[k].1 += 1;
            }
            if d2 <= radius * radius {
                r2s.push(d2);
                ys.push(g2.get(x, y));
            }
        }
    }
    let radial = ring
        .iter()
        .enumerate()
        .filter(|(_, (_, cnt))| *cnt > 0)
        .map(|(k, (s, cnt))| (k as f64, s / *cnt as f64))
        .collect();
    let max = g2.get(n / 2, n / 2);
    let fit = fit_gaussian(&r2s, &ys, 0.2, radius);
    let fwhm_mm = (fit.amplitude > 1e-12 && fit.residual.is_finite())
        .then(|| fit.fwhm() * ens.pitch_mm());
    Ok(G2Profile { radial, max, fwhm_mm })
}

fn reversed(a: &[f64], n: usize) -> Vec<f64> {
    // b(p) = a(−p), so a ∗ b is the correlation of a with itself
    let mut out = vec![0.0; n * n];
    for y in 0..n {
        for x in 0..n {
            out[((n - y) % n) * n + (n - x) % n] = a[y * n + x];
        }
    }
    out
}

fn in_x(u: f64, v: f64, w: f64, h: f64, stroke: f64) -> bool {
    let len = (w * w + h * h).sqrt();
    let d1 = (h * u - w * v).abs() / len;
    let d2 = (h * (w - u) - w * v).abs() / len;
    d1 <= stroke / 2.0 || d2 <= stroke / 2.0
}

fn in_g(u: f64, v: f64, w: f64, h: f64, s: f64) -> bool {
    let left = u < s;
    let top = v < s;
    let bottom = v > h - s;
    let right_low = u > w - s && v > h / 2.0 - s / 2.0;
    let bar = (v - h / 2.0).abs() < s / 2.0 && u > w / 2.0;
    left || top || bottom || right_low || bar
}

fn in_i(u: f64, v: f64, w: f64, h: f64, s: f64) -> bool {
    (u - w / 2.0).abs() < s / 2.0 || v < s || v > h - s
}

/// Binary "XGI" stencil filling a 5 mm field: letters 2.5 mm high with
/// strokes 1/6.5 of the letter height, transmitting inside the glyphs.
/// Rotation uses bilinear resampling about the centre.
pub fn make_stencil(n: usize, rotation_deg: f64) -> Result<Image> {
    if n < 64 {
        return Err(GiError::invalid(format!("stencil needs n >= 64, got {n}")));
    }
    let nf = n as f64;
    let h = nf / 2.0;
    let s = h / 6.5;
    let (wx, wg, wi, gap) = (0.6 * h, 0.6 * h, 0.3 * h, 0.1 * h);
    let total = wx + wg + wi + 2.0 * gap;
    let x0 = (nf - total) / 2.0;
    let y0 = (nf - h) / 2.0;
    let glyphs: [(f64, f64, fn(f64, f64, f64, f64, f64) -> bool); 3] =
        [(x0, wx, in_x), (x0 + wx + gap, wg, in_g), (x0 + wx + wg + 2.0 * gap, wi, in_i)];
    let mut px = vec![0.0; n * n];
    for y in 0..n {
        for x in 0..n {
            let (fx, fy) = (x as f64 + 0.5, y as f64 + 0.5);
            let v = fy - y0;
            if !(0.0..h).contains(&v) {
                continue;
            }
            for &(gx, gw, inside) in &glyphs {
                let u = fx - gx;
                if (0.0..gw).contains(&u) && inside(u, v, gw, h, s) {
                    px[y * n + x] = 1.0;
                }
            }
        }
    }
    let pitch = ZHANG_FOV_MM / nf;
    let flat = Image::new(n, px, pitch)?;
    if rotation_deg == 0.0 {
        return Ok(flat);
    }
    Ok(rotate(&flat, rotation_deg))
}

/// Bilinear rotation about the image centre; outside samples are 0.
pub fn rotate(img: &Image, degrees: f64) -> Image {
    let n = img.n();
    let c = n as f64 / 2.0;
    let (sin, cos) = degrees.to_radians().sin_cos();
    let sample = |x: f64, y: f64| -> f64 {
        if x < 0.0 || y < 0.0 || x > (n - 1) as f64 || y > (n - 1) as f64 {
            return 0.0;
        }
        let (x0, y0) = (x.floor() as usize, y.floor() as usize);
        let (x1, y1) = ((x0 + 1).min(n - 1), (y0 + 1).min(n - 1));
        let (fx, fy) = (x - x0 as f64, y - y0 as f64);
        let top = img.get(x0, y0) * (1.0 - fx) + img.get(x1, y0) * fx;
        let bot = img.get(x0, y1) * (1.0 - fx) + img.get(x1, y1) * fx;
        top * (1.0 - fy) + bot * fy
    };
    let mut out = vec![0.0; n * n];
    for y in 0..n {
        for x in 0..n {
            let (dx, dy) = (x as f64 + 0.5 - c, y as f64 + 0.5 - c);
            // inverse map: rotate the output coordinate back into the source
            let sx = cos * dx + sin * dy + c - 0.5;
            let sy = -sin * dx + cos * dy + c - 0.5;
            out[y * n + x] = sample(sx, sy).clamp(0.0, 1.0);
        }
    }
    Image::from_raw(n, out, img.pitch_mm())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ZhangExperiment {
    /// Ghost image, J = 10⁴, t0 = 150 ms, 8×8 binning.
    I,
    /// Ghost image, J = 10⁴, t0 = 1 µs, 8×8 binning.
    II,
    /// Direct image, t0 = 10 ms, full resolution, stencil rotated 60°.
    III,
}

impl ZhangExperiment {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "i" | "1" => Some(ZhangExperiment::I),
            "ii" | "2" => Some(ZhangExperiment::II),
            "iii" | "3" => Some(ZhangExperiment::III),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ZhangExperiment::I => "i",
            ZhangExperiment::II => "ii",
            ZhangExperiment::III => "iii",
        }
    }

    pub fn t0_s(self) -> f64 {
        match self {
            ZhangExperiment::I => 0.150,
            ZhangExperiment::II => 1e-6,
            ZhangExperiment::III => 0.010,
        }
    }

    pub fn ccd(self, shutter: bool) -> CcdConfig {
        let base = match self {
            ZhangExperiment::III => CcdConfig {
                rotation_deg: 60.0,
                ..CcdConfig::pixis_full()
            },
            _ => CcdConfig::pixis_binned(),
        };
        CcdConfig { shutter, ..base }
    }
}

/// Knobs for [`run_zhang`]; the defaults reproduce the experiments.
#[derive(Debug, Clone, PartialEq)]
pub struct ZhangOptions {
    pub experiment: ZhangExperiment,
    pub shutter: bool,
    pub j: usize,
    pub fov_px: usize,
    pub t0_s: Option<f64>,
    pub mitigation: Mitigation,
}

impl ZhangOptions {
    pub fn new(experiment: ZhangExperiment, shutter: bool) -> Self {
        ZhangOptions {
            experiment,
            shutter,
            j: 10_000,
            fov_px: ZHANG_FOV_PX,
            t0_s: None,
            mitigation: Mitigation::None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ZhangArtifacts {
    pub stencil: Image,
    pub buckets: Option<BucketVector>,
    pub reconstruction: Option<Image>,
    pub frame: Option<Frame>,
}

/// Ghost images for experiments (i) and (ii), the raw frame for (iii).
pub fn run_zhang(opts: &ZhangOptions, seed: &Seed) -> Result<ZhangArtifacts> {
    let exp = opts.experiment;
    let ccd = exp.ccd(opts.shutter);
    let t0 = opts.t0_s.unwrap_or(exp.t0_s());
    let stencil = make_stencil(opts.fov_px, ccd.rotation_deg)?;
    if exp == ZhangExperiment::III {
        let ones = Image::new(opts.fov_px, vec![1.0; opts.fov_px * opts.fov_px], stencil.pitch_mm())?;
        let frame = zhang_frame(&stencil, &ones, t0, &ccd, &seed.derive("frame"))?;
        return Ok(ZhangArtifacts {
            stencil,
            buckets: None,
            reconstruction: None,
            frame: Some(frame),
        });
    }
    let ens = gen_sandpaper_speckle(opts.j, opts.fov_px, ZHANG_FOV_MM, &seed.derive("speckle"))?;
    let channel = ZhangChannel {
        scene: stencil.clone(),
        t0,
        ccd,
        mitigation: opts.mitigation.clone(),
        seed: seed.derive("detector"),
    };
    let b = zhang_buckets(&ens, std::slice::from_ref(&channel))?.pop().unwrap();
    let recon = scaled_xc(&ens, &b)?;
    Ok(ZhangArtifacts {
        stencil,
        buckets: Some(b),
        reconstruction: Some(recon),
        frame: None,
    })
}
