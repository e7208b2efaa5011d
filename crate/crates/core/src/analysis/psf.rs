//! Green's functions, the PSF and Gaussian fitting of radial profiles.

use rustfft::num_complex::Complex64;

use crate::ensemble::MaskEnsemble;
use crate::error::{GiError, Result};
use crate::fft::{convolve, Fft2};
use crate::image::Image;
use crate::recon::adjoint_mean_corrected;

/// Green's function `G(x,y) = Σ_j Ã_j(x*,y*) Ã_j(x,y)` of the adjoint at one point.
pub fn greens(ens: &MaskEnsemble, xs: usize, ys: usize) -> Result<Image> {
    let n = ens.n();
    if xs >= n || ys >= n {
        return Err(GiError::OutOfRange { x: xs, y: ys, n });
    }
    let p = ys * n + xs;
    let abar = ens.pixel_mean()[p];
    let mut weights = Vec::with_capacity(ens.j());
    ens.fold_masks(
        Vec::new,
        |acc: &mut Vec<f64>, _, mask| acc.push(mask[p] - abar),
        |part| weights.extend(part),
    );
    Ok(Image::from_raw(n, adjoint_mean_corrected(ens, &weights), ens.pitch_mm()))
}

/// `Σ_j A_j ⋆ A_j` (periodic autocorrelation, origin at index 0), optionally
/// of the mean-corrected masks.
pub(crate) fn summed_autocorrelation(ens: &MaskEnsemble, mean_corrected: bool) -> Vec<f64> {
    let n = ens.n();
    let npx = n * n;
    let fft = Fft2::new(n);
    let abar = ens.pixel_mean();
    let mut power = vec![0.0; npx];
    ens.fold_masks(
        || (vec![0.0; npx], vec![Complex64::default(); npx], Vec::new()),
        |(acc, buf, scratch), _, mask| {
            for ((b, &m), &a) in buf.iter_mut().zip(mask).zip(abar) {
                *b = Complex64::new(if mean_corrected { m - a } else { m }, 0.0);
            }
            fft.forward(buf, scratch);
            for (p, c) in acc.iter_mut().zip(buf.iter()) {
                *p += c.norm_sqr();
            }
        },
        |(acc, _, _)| {
            for (p, a) in power.iter_mut().zip(&acc) {
                *p += a;
            }
        },
    );
    let mut spec: Vec<Complex64> = power.iter().map(|&p| Complex64::new(p, 0.0)).collect();
    fft.inverse(&mut spec, &mut Vec::new());
    spec.iter().map(|c| c.re).collect()
}

/// Expected Green's function, `(1/N) Σ_j Ã_j ⋆ Ã_j`, centred so zero shift
/// sits at `(n/2, n/2)`.
pub fn psf(ens: &MaskEnsemble) -> Image {
    let npx = ens.pixels() as f64;
    let corr: Vec<f64> = summed_autocorrelation(ens, true).iter().map(|v| v / npx).collect();
    Image::from_raw(ens.n(), corr, ens.pitch_mm()).centered()
}

/// Undo [`Image::centered`].
pub(crate) fn uncentered(img: &Image) -> Vec<f64> {
    let n = img.n();
    let h = n / 2;
    let mut out = vec![0.0; n * n];
    for y in 0..n {
        for x in 0..n {
            out[y * n + x] = img.get((x + h) % n, (y + h) % n);
        }
    }
    out
}

/// Periodic convolution `T ∗ PSF` with a centred PSF.
pub fn predict_via_psf(t: &Image, psf: &Image) -> Result<Image> {
    t.check_same_size(psf)?;
    let out = convolve(t.as_slice(), &uncentered(psf), t.n());
    Ok(Image::from_raw(t.n(), out, t.pitch_mm()))
}

/// Least-squares fit of `a·exp(−r²/2s²) + c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianFit {
    pub amplitude: f64,
    pub sigma: f64,
    pub offset: f64,
    pub residual: f64,
}

impl GaussianFit {
    pub fn fwhm(&self) -> f64 {
        2.0 * (2.0 * std::f64::consts::LN_2).sqrt() * self.sigma
    }
}

fn linear_part(r2: &[f64], y: &[f64], s: f64) -> (f64, f64, f64) {
    // y ≈ a g + c: normal equations of a two-column least squares
    let k = -0.5 / (s * s);
    let (mut sg, mut sgg, mut sy, mut sgy) = (0.0, 0.0, 0.0, 0.0);
    for (&r, &v) in r2.iter().zip(y) {
        let g = (k * r).exp();
        sg += g;
        sgg += g * g;
        sy += v;
        sgy += g * v;
    }
    let m = r2.len() as f64;
    let det = sgg * m - sg * sg;
    let (a, c) = if det.abs() < 1e-300 {
        (0.0, sy / m)
    } else {
        ((m * sgy - sg * sy) / det, (sgg * sy - sg * sgy) / det)
    };
    let res = r2
        .iter()
        .zip(y)
        .map(|(&r, &v)| {
            let e = v - a * (k * r).exp() - c;
            e * e
        })
        .sum();
    (a, c, res)
}

/// Fit an isotropic Gaussian plus constant to samples at squared radii `r2`,
/// with the width searched in `[s_lo, s_hi]`.
pub fn fit_gaussian(r2: &[f64], y: &[f64], s_lo: f64, s_hi: f64) -> GaussianFit {
    assert_eq!(r2.len(), y.len());
    let cost = |s: f64| linear_part(r2, y, s).2;
    // coarse log grid, then golden-section refinement around the best node
    let steps = 200;
    let ratio = (s_hi / s_lo).powf(1.0 / steps as f64);
    let (mut best_i, mut best_c) = (0, f64::INFINITY);
    for i in 0..=steps {
        let c = cost(s_lo * ratio.powi(i as i32));
        if c < best_c {
            best_c = c;
            best_i = i;
        }
    }
    let mut lo = (s_lo * ratio.powi(best_i as i32 - 1)).max(s_lo);
    let mut hi = (s_lo * ratio.powi(best_i as i32 + 1)).min(s_hi);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let a = hi - phi * (hi - lo);
        let b = lo + phi * (hi - lo);
        if cost(a) < cost(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    let s = 0.5 * (lo + hi);
    let (amplitude, offset, residual) = linear_part(r2, y, s);
    GaussianFit {
        amplitude,
        sigma: s,
        offset,
        residual,
    }
}

/// Fit a Gaussian to every pixel of a centred image within `radius` pixels of
/// the centre. Width is in pixels.
pub fn fit_gaussian_image(img: &Image, radius: f64) -> GaussianFit {
    let n = img.n();
    let c = (n / 2) as f64;
    let (mut r2, mut y) = (Vec::new(), Vec::new());
    for yy in 0..n {
        for xx in 0..n {
            let d2 = (xx as f64 - c).powi(2) + (yy as f64 - c).powi(2);
            if d2 <= radius * radius {
                r2.push(d2);
                y.push(img.get(xx, yy));
            }
        }
    }
    fit_gaussian(&r2, &y, 0.2, radius)
}
