//! Mask generators for every family and the mean-corrected Gram matrix.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ensemble::{EnsembleHints, MaskEnsemble, MaskFamily, MaskSource};
use crate::error::{GiError, Result};
use crate::image::Image;
use crate::seed::Seed;

/// Gray masks whose scaled-uniform support leaves [0, 1] by less than this are
/// accepted and clamped; `σ = 0.2887` at `μ = 0.5` is the usual rounded
/// spelling of the unit uniform.
const GRAY_SUPPORT_SLACK: f64 = 1e-3;

/// Gram matrices above this size trigger a warning.
pub const DEFAULT_GRAM_BUDGET_BYTES: usize = 1 << 30;

fn check_side(n: usize) -> Result<()> {
    if n < 2 {
        return Err(GiError::invalid(format!("mask side must be >= 2, got {n}")));
    }
    Ok(())
}

fn check_count(j: usize) -> Result<()> {
    if j == 0 {
        return Err(GiError::invalid("J must be >= 1"));
    }
    Ok(())
}

fn mask_rng(seed: &Seed, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.child_value(index as u64))
}

#[derive(Debug)]
struct RandomBinarySource {
    n: usize,
    j: usize,
    threshold: u64,
    seed: Seed,
}

impl MaskSource for RandomBinarySource {
    fn side(&self) -> usize {
        self.n
    }
    fn count(&self) -> usize {
        self.j
    }
    fn render(&self, index: usize, out: &mut [f64]) {
        let mut rng = mask_rng(&self.seed, index);
        for v in out.iter_mut() {
            *v = if (rng.next_u32() as u64) < self.threshold { 1.0 } else { 0.0 };
        }
    }
}

/// Each pixel independently 1 with probability `mu_a`, else 0.
pub fn gen_random_binary(n: usize, j: usize, mu_a: f64, seed: &Seed) -> Result<MaskEnsemble> {
    check_side(n)?;
    check_count(j)?;
    if !(0.0..=1.0).contains(&mu_a) {
        return Err(GiError::invalid(format!("mu_A must lie in [0, 1], got {mu_a}")));
    }
    // 32-bit threshold: mu = 1 maps to 2^32, above every draw
    let threshold = (mu_a * 4_294_967_296.0).round() as u64;
    let src = RandomBinarySource {
        n,
        j,
        threshold,
        seed: seed.clone(),
    };
    MaskEnsemble::from_source(Arc::new(src), MaskFamily::RandomBinary, 1.0 / n as f64, EnsembleHints::default())
}

#[derive(Debug)]
struct RandomGraySource {
    n: usize,
    j: usize,
    mu: f64,
    half_width: f64,
    seed: Seed,
}

impl MaskSource for RandomGraySource {
    fn side(&self) -> usize {
        self.n
    }
    fn count(&self) -> usize {
        self.j
    }
    fn render(&self, index: usize, out: &mut [f64]) {
        let mut rng = mask_rng(&self.seed, index);
        for v in out.iter_mut() {
            let u: f64 = rng.random();
            *v = (self.mu + self.half_width * (2.0 * u - 1.0)).clamp(0.0, 1.0);
        }
    }
}

/// Uniform gray masks scaled and offset to mean `mu_a`, std `sigma_a`.
pub fn gen_random_gray(n: usize, j: usize, mu_a: f64, sigma_a: f64, seed: &Seed) -> Result<MaskEnsemble> {
    check_side(n)?;
    check_count(j)?;
    if !(0.0..=1.0).contains(&mu_a) || !(sigma_a >= 0.0) {
        return Err(GiError::invalid(format!("bad gray mask statistics mu={mu_a} sigma={sigma_a}")));
    }
    // uniform on [mu - w, mu + w] has std w/sqrt(3)
    let half_width = sigma_a * 3f64.sqrt();
    if mu_a - half_width < -GRAY_SUPPORT_SLACK || mu_a + half_width > 1.0 + GRAY_SUPPORT_SLACK {
        return Err(GiError::invalid(format!(
            "sigma_A={sigma_a} too large for mu_A={mu_a}: uniform support leaves [0, 1] (max {:.4})",
            mu_a.min(1.0 - mu_a) / 3f64.sqrt()
        )));
    }
    let src = RandomGraySource {
        n,
        j,
        mu: mu_a,
        half_width,
        seed: seed.clone(),
    };
    MaskEnsemble::from_source(Arc::new(src), MaskFamily::RandomGray, 1.0 / n as f64, EnsembleHints::default())
}

/// Periodic 1D Gaussian, truncated at 6σ, folded onto an `n`-cycle.
/// Returns `(offset, weight)` taps with the zero offset removed; weights of
/// all taps including the centre sum to one.
pub(crate) fn gaussian_taps(sigma: f64, n: usize) -> Vec<(usize, f64)> {
    let r = (6.0 * sigma).ceil() as i64;
    let mut folded = vec![0.0; n];
    for d in -r..=r {
        let w = (-(d * d) as f64 / (2.0 * sigma * sigma)).exp();
        folded[d.rem_euclid(n as i64) as usize] += w;
    }
    let total: f64 = folded.iter().sum();
    folded
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, &w)| w > 0.0)
        .map(|(k, &w)| (k, w / total))
        .collect()
}

/// Separable periodic blur of one row-major `n×n` image in place.
///
/// Written as `v + Σ w_k (v[x−k] − v[x])` so that constant inputs come back
/// bit-for-bit unchanged.
pub(crate) fn blur_in_place(img: &mut [f64], n: usize, taps: &[(usize, f64)], scratch: &mut Vec<f64>) {
    scratch.resize(n * n, 0.0);
    for y in 0..n {
        let row = &img[y * n..(y + 1) * n];
        let out = &mut scratch[y * n..(y + 1) * n];
        for x in 0..n {
            let c = row[x];
            let mut acc = 0.0;
            for &(k, w) in taps {
                let xs = if x >= k { x - k } else { x + n - k };
                acc += w * (row[xs] - c);
            }
            out[x] = c + acc;
        }
    }
    for y in 0..n {
        for x in 0..n {
            let c = scratch[y * n + x];
            let mut acc = 0.0;
            for &(k, w) in taps {
                let ys = if y >= k { y - k } else { y + n - k };
                acc += w * (scratch[ys * n + x] - c);
            }
            img[y * n + x] = c + acc;
        }
    }
}

#[derive(Debug)]
pub(crate) struct BlurredSource {
    pub(crate) inner: Arc<dyn MaskSource>,
    pub(crate) taps: Vec<(usize, f64)>,
}

impl MaskSource for BlurredSource {
    fn side(&self) -> usize {
        self.inner.side()
    }
    fn count(&self) -> usize {
        self.inner.count()
    }
    fn render(&self, index: usize, out: &mut [f64]) {
        self.inner.render(index, out);
        let mut scratch = Vec::new();
        blur_in_place(out, self.side(), &self.taps, &mut scratch);
        // a convex combination, but rounding may step a hair outside [0, 1]
        out.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    }
}

/// Periodic Gaussian blur of an arbitrary image.
pub fn blur_image(img: &Image, sigma_px: f64) -> Result<Image> {
    if !(sigma_px > 0.0 && sigma_px.is_finite()) {
        return Err(GiError::invalid(format!("blur sigma must be positive, got {sigma_px}")));
    }
    let mut px = img.as_slice().to_vec();
    blur_in_place(&mut px, img.n(), &gaussian_taps(sigma_px, img.n()), &mut Vec::new());
    Image::new(img.n(), px, img.pitch_mm())
}

/// Convolve every mask with a unit-sum Gaussian of std `sigma_g_px` pixels.
pub fn blur_masks(ens: &MaskEnsemble, sigma_g_px: f64) -> Result<MaskEnsemble> {
    if !(sigma_g_px > 0.0 && sigma_g_px.is_finite()) {
        return Err(GiError::invalid(format!("blur sigma must be positive, got {sigma_g_px}")));
    }
    let src = BlurredSource {
        inner: ens.source().clone(),
        taps: gaussian_taps(sigma_g_px, ens.n()),
    };
    MaskEnsemble::from_source(Arc::new(src), MaskFamily::Blurred, ens.pitch_mm(), EnsembleHints::default())
}

#[derive(Debug)]
struct HadamardSource {
    n: usize,
}

impl MaskSource for HadamardSource {
    fn side(&self) -> usize {
        self.n
    }
    fn count(&self) -> usize {
        self.n * self.n
    }
    fn render(&self, index: usize, out: &mut [f64]) {
        // Sylvester ordering: H[j][i] = (-1)^popcount(j & i)
        for (i, v) in out.iter_mut().enumerate() {
            *v = if (index & i).count_ones() % 2 == 0 { 1.0 } else { 0.0 };
        }
    }
}

/// The `n²` rows of `(H + 1)/2` for the Sylvester Hadamard matrix, as masks.
pub fn gen_hadamard(n: usize) -> Result<MaskEnsemble> {
    if n < 2 || !n.is_power_of_two() {
        return Err(GiError::invalid(format!("Hadamard masks need n a power of two, got {n}")));
    }
    let npx = (n * n) as f64;
    let hints = EnsembleHints {
        exact_gamma: Some(npx / 4.0),
        // pixel 0 is lit in every mask, so it carries no correlation signal
        lit_pixel: Some(0),
    };
    MaskEnsemble::from_source(Arc::new(HadamardSource { n }), MaskFamily::Hadamard, 1.0 / n as f64, hints)
}

pub fn is_prime(p: usize) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= p {
        if p % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Base pattern `s(a, b) = χ(a + b√d)`, the quadratic character of GF(p²)
/// with `d` a non-residue mod `p`. Values in {−1, 0, +1}, zero only at the origin.
///
/// The additive group of GF(p²) is Z_p × Z_p, so cyclic shifts are field
/// translations and the character's periodic autocorrelation is `p² − 1` at
/// zero shift and `−1` everywhere else.
pub(crate) fn quadratic_character_pattern(p: usize) -> Vec<i8> {
    let mut is_square = vec![false; p];
    for x in 1..p {
        is_square[x * x % p] = true;
    }
    let d = (1..p).find(|&v| !is_square[v]).expect("odd prime has a non-residue");
    let mut s = vec![0i8; p * p];
    for b in 0..p {
        for a in 0..p {
            let norm = (a * a + (p - d) * (b * b % p)) % p;
            s[b * p + a] = if norm == 0 {
                0
            } else if is_square[norm] {
                1
            } else {
                -1
            };
        }
    }
    s
}

#[derive(Debug)]
struct UraSource {
    p: usize,
    base: Vec<f64>,
}

impl MaskSource for UraSource {
    fn side(&self) -> usize {
        self.p
    }
    fn count(&self) -> usize {
        self.p * self.p
    }
    fn render(&self, index: usize, out: &mut [f64]) {
        let p = self.p;
        let (dx, dy) = (index % p, index / p);
        for y in 0..p {
            let sy = (y + p - dy) % p;
            for x in 0..p {
                let sx = (x + p - dx) % p;
                out[y * p + x] = self.base[sy * p + sx];
            }
        }
    }
}

/// All `p²` cyclic translations of a `p×p` pattern with two-valued periodic
/// autocorrelation. Values are `(1 + s)/2` ∈ {0, ½, 1}; the single ½ pixel
/// per mask is what makes the sidelobes exactly flat.
pub fn gen_ura_scan(p: usize) -> Result<MaskEnsemble> {
    if p < 3 || !is_prime(p) {
        return Err(GiError::invalid(format!("URA scan needs an odd prime side, got {p}")));
    }
    let base = quadratic_character_pattern(p)
        .into_iter()
        .map(|s| (1.0 + s as f64) / 2.0)
        .collect();
    let npx = (p * p) as f64;
    let hints = EnsembleHints {
        exact_gamma: Some(npx / 4.0),
        lit_pixel: None,
    };
    MaskEnsemble::from_source(Arc::new(UraSource { p, base }), MaskFamily::UraScan, 1.0 / p as f64, hints)
}

#[derive(Debug)]
struct PinholeSource {
    n: usize,
}

impl MaskSource for PinholeSource {
    fn side(&self) -> usize {
        self.n
    }
    fn count(&self) -> usize {
        self.n * self.n
    }
    fn render(&self, index: usize, out: &mut [f64]) {
        out.fill(0.0);
        out[index] = 1.0;
    }
}

/// Raster scan of a single open pixel.
pub fn gen_pinhole_scan(n: usize) -> Result<MaskEnsemble> {
    check_side(n)?;
    let hints = EnsembleHints {
        exact_gamma: Some(1.0),
        lit_pixel: None,
    };
    MaskEnsemble::from_source(Arc::new(PinholeSource { n }), MaskFamily::PinholeScan, 1.0 / n as f64, hints)
}

/// `G[i][j] = Σ Ã_i Ã_j` with `Ã = A − ⟨A⟩` (per-pixel ensemble mean).
pub fn gram_mean_corrected(ens: &MaskEnsemble) -> DMatrix<f64> {
    gram_mean_corrected_with_budget(ens, DEFAULT_GRAM_BUDGET_BYTES)
}

pub fn gram_mean_corrected_with_budget(ens: &MaskEnsemble, budget_bytes: usize) -> DMatrix<f64> {
    let (j, npx) = (ens.j(), ens.pixels());
    let bytes = (j * npx + j * j) * std::mem::size_of::<f64>();
    if bytes > budget_bytes {
        log::warn!("Gram matrix for J={j}, N={npx} needs {bytes} bytes (budget {budget_bytes})");
    }
    let mean = ens.pixel_mean();
    let mut centered = DMatrix::<f64>::zeros(j, npx);
    let mut buf = vec![0.0; npx];
    for r in 0..j {
        ens.render(r, &mut buf);
        for (c, (&a, &m)) in buf.iter().zip(mean).enumerate() {
            centered[(r, c)] = a - m;
        }
    }
    &centered * centered.transpose()
}
