//! Reconstruction: cross-correlation, γ scaling, mean restoration, Landweber
//! iteration and a dense pseudo-inverse for small problems.

use nalgebra::{DMatrix, DVector};

use crate::ensemble::MaskEnsemble;
use crate::error::{GiError, Result};
use crate::image::{axpy, dot, Image};
use crate::types::BucketVector;

/// Default pixel limit for [`pinv_recon`].
pub const PINV_PIXEL_LIMIT: usize = 4096;

/// Ridge added to the normal matrix, relative to its mean diagonal.
pub const PINV_RIDGE: f64 = 1e-10;

/// Landweber stops when the residual has grown this many times in a row.
const DIVERGENCE_PATIENCE: usize = 10;

/// Dense masks are used by the iterative solver below this many values.
const DENSE_LIMIT: usize = 1 << 24;

fn check_j(ens: &MaskEnsemble, len: usize) -> Result<()> {
    if ens.j() != len {
        return Err(GiError::DimensionMismatch {
            what: "bucket count vs ensemble J",
            expected: ens.j(),
            actual: len,
        });
    }
    Ok(())
}

/// `Σ_j A_j (b_j − ⟨b⟩)` for several bucket channels in one pass over the masks.
pub fn xc_multi(ens: &MaskEnsemble, channels: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
    for c in channels {
        check_j(ens, c.len())?;
    }
    let npx = ens.pixels();
    let centered: Vec<Vec<f64>> = channels
        .iter()
        .map(|c| {
            let m = c.iter().sum::<f64>() / c.len() as f64;
            c.iter().map(|v| v - m).collect()
        })
        .collect();
    let nc = channels.len();
    let mut out = vec![vec![0.0; npx]; nc];
    // pixel tiles keep the per-channel sums cache resident while a chunk streams
    const TILE: usize = 1024;
    ens.fold_mask_chunks(
        |range, masks| {
            let mut acc = vec![0.0; nc * npx];
            for lo in (0..npx).step_by(TILE) {
                let hi = (lo + TILE).min(npx);
                for (c, w) in centered.iter().enumerate() {
                    let dst = &mut acc[c * npx + lo..c * npx + hi];
                    for (k, j) in range.clone().enumerate() {
                        axpy(w[j], &masks[k * npx + lo..k * npx + hi], dst);
                    }
                }
            }
            acc
        },
        |acc| {
            for (c, o) in out.iter_mut().enumerate() {
                for (a, b) in o.iter_mut().zip(&acc[c * npx..(c + 1) * npx]) {
                    *a += b;
                }
            }
        },
    );
    Ok(out)
}

/// Unscaled cross-correlation image `Σ_j A_j (b_j − ⟨b⟩)`.
pub fn xc(ens: &MaskEnsemble, b: &BucketVector) -> Result<Image> {
    let mut out = xc_multi(ens, &[&b.values])?;
    Ok(Image::from_raw(ens.n(), out.pop().unwrap(), ens.pitch_mm()))
}

/// Adjoint-to-object scale.
///
/// Uses the analytic value for orthogonal families. Otherwise it is the
/// integral of the PSF, which collapses to `(1/N) Σ_j (s_j − s̄)²` with `s_j`
/// the mask sums, so no correlation has to be formed. Constant-sum ensembles
/// without an analytic value therefore get γ = 0.
pub fn compute_gamma(ens: &MaskEnsemble) -> f64 {
    if let Some(g) = ens.hints().exact_gamma {
        return g;
    }
    psf_integral(ens)
}

/// `Σ_{x,y} PSF(x,y)` in closed form.
pub fn psf_integral(ens: &MaskEnsemble) -> f64 {
    let sums = ens.mask_sums();
    let mean = sums.iter().sum::<f64>() / sums.len() as f64;
    sums.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / ens.pixels() as f64
}

fn usable_gamma(ens: &MaskEnsemble) -> Result<f64> {
    let g = compute_gamma(ens);
    if !(g > 1e-12 * ens.j() as f64) {
        return Err(GiError::Degenerate(format!(
            "gamma = {g} for a {} ensemble of {} masks",
            ens.family(),
            ens.j()
        )));
    }
    Ok(g)
}

/// Put back the object mean lost by the mean-corrected operator.
///
/// Constant-sum ensembles lose the flat component, restored as `⟨b⟩/k`.
/// Ensembles with a pixel lit in every mask lose that pixel instead; it is
/// recovered from `⟨b⟩ = Σ ⟨A⟩ T`.
pub(crate) fn restore_mean(ens: &MaskEnsemble, b: &BucketVector, img: &mut [f64]) {
    let mean_b = b.mean() / b.photon_scale;
    if let Some(k) = ens.constant_sum() {
        if k > 0.0 {
            let c = mean_b / k;
            img.iter_mut().for_each(|v| *v += c);
        }
    } else if let Some(u) = ens.hints().lit_pixel {
        let abar = ens.pixel_mean();
        let known = dot(abar, img) - abar[u] * img[u];
        img[u] = (mean_b - known) / abar[u];
    }
}

/// Cross-correlation in transmission units: `xc / (γ B t0 Δ²)` plus mean restoration.
pub fn scaled_xc(ens: &MaskEnsemble, b: &BucketVector) -> Result<Image> {
    let mut out = scaled_xc_multi(ens, &[b])?;
    Ok(out.pop().unwrap())
}

/// [`scaled_xc`] for several bucket vectors sharing one pass over the masks.
pub fn scaled_xc_multi(ens: &MaskEnsemble, bs: &[&BucketVector]) -> Result<Vec<Image>> {
    let gamma = usable_gamma(ens)?;
    let channels: Vec<&[f64]> = bs.iter().map(|b| b.values.as_slice()).collect();
    let raw = xc_multi(ens, &channels)?;
    Ok(raw
        .into_iter()
        .zip(bs)
        .map(|(mut img, b)| {
            let s = 1.0 / (gamma * b.photon_scale);
            img.iter_mut().for_each(|v| *v *= s);
            restore_mean(ens, b, &mut img);
            Image::from_raw(ens.n(), img, ens.pitch_mm())
        })
        .collect())
}

/// Mean-corrected forward operator `Ã` (rows `A_j − ⟨A⟩`).
enum Operator<'a> {
    Dense(DMatrix<f64>),
    Streaming(&'a MaskEnsemble),
}

impl<'a> Operator<'a> {
    fn new(ens: &'a MaskEnsemble) -> Self {
        if ens.j() * ens.pixels() <= DENSE_LIMIT {
            Operator::Dense(centered_matrix(ens))
        } else {
            Operator::Streaming(ens)
        }
    }

    fn forward(&self, t: &[f64]) -> Vec<f64> {
        match self {
            Operator::Dense(m) => (m * DVector::from_column_slice(t)).as_slice().to_vec(),
            Operator::Streaming(ens) => forward_mean_corrected(ens, t),
        }
    }

    fn adjoint(&self, v: &[f64]) -> Vec<f64> {
        match self {
            Operator::Dense(m) => (m.tr_mul(&DVector::from_column_slice(v))).as_slice().to_vec(),
            Operator::Streaming(ens) => adjoint_mean_corrected(ens, v),
        }
    }
}

/// `J × N` matrix of mean-corrected masks.
pub fn centered_matrix(ens: &MaskEnsemble) -> DMatrix<f64> {
    let npx = ens.pixels();
    let mean = ens.pixel_mean();
    let mut m = DMatrix::<f64>::zeros(ens.j(), npx);
    let mut buf = vec![0.0; npx];
    for r in 0..ens.j() {
        ens.render(r, &mut buf);
        for c in 0..npx {
            m[(r, c)] = buf[c] - mean[c];
        }
    }
    m
}

/// `(Ã t)_j = Σ (A_j − ⟨A⟩) t`.
pub fn forward_mean_corrected(ens: &MaskEnsemble, t: &[f64]) -> Vec<f64> {
    let offset = dot(ens.pixel_mean(), t);
    let mut out = Vec::with_capacity(ens.j());
    ens.fold_masks(
        Vec::new,
        |acc: &mut Vec<f64>, _, mask| acc.push(dot(mask, t) - offset),
        |part| out.extend(part),
    );
    out
}

/// `(Ã† v)(x,y) = Σ_j (A_j − ⟨A⟩) v_j`.
pub fn adjoint_mean_corrected(ens: &MaskEnsemble, v: &[f64]) -> Vec<f64> {
    let npx = ens.pixels();
    let mut out = vec![0.0; npx];
    ens.fold_masks(
        || vec![0.0; npx],
        |acc, j, mask| axpy(v[j], mask, acc),
        |acc| {
            for (o, a) in out.iter_mut().zip(&acc) {
                *o += a;
            }
        },
    );
    let total: f64 = v.iter().sum();
    for (o, m) in out.iter_mut().zip(ens.pixel_mean()) {
        *o -= m * total;
    }
    out
}

fn centered_buckets(b: &BucketVector) -> Vec<f64> {
    let m = b.mean();
    b.values.iter().map(|v| (v - m) / b.photon_scale).collect()
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Landweber iteration `t ← t + (α/2γ) Ã†(b̃ − Ã t)` on buckets in
/// transmission units, mean restored at the end.
pub fn landweber(ens: &MaskEnsemble, b: &BucketVector, alpha: f64, iters: usize, init: Option<&Image>) -> Result<Image> {
    check_j(ens, b.len())?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(GiError::invalid(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    if iters == 0 {
        return Err(GiError::invalid("landweber needs at least one iteration"));
    }
    let gamma = usable_gamma(ens)?;
    let npx = ens.pixels();
    let mut t = match init {
        Some(img) => {
            if img.n() != ens.n() {
                return Err(GiError::DimensionMismatch {
                    what: "initial image side",
                    expected: ens.n(),
                    actual: img.n(),
                });
            }
            img.as_slice().to_vec()
        }
        None => vec![0.0; npx],
    };
    let bt = centered_buckets(b);
    let op = Operator::new(ens);
    let step = alpha / (2.0 * gamma);
    let mut last = f64::INFINITY;
    let mut growth = 0;
    for it in 0..iters {
        let mut r = op.forward(&t);
        for (ri, bi) in r.iter_mut().zip(&bt) {
            *ri = bi - *ri;
        }
        let rn = norm(&r);
        if rn > last {
            growth += 1;
            if growth >= DIVERGENCE_PATIENCE {
                return Err(GiError::Divergence {
                    iteration: it,
                    residual: rn,
                });
            }
        } else {
            growth = 0;
        }
        last = rn;
        if rn == 0.0 {
            break;
        }
        axpy(step, &op.adjoint(&r), &mut t);
    }
    if init.is_none() {
        restore_mean(ens, b, &mut t);
    }
    Ok(Image::from_raw(ens.n(), t, ens.pitch_mm()))
}

/// Least-squares (minimum-norm when under-determined) solution of `Ã t = b̃`
/// with a small ridge, mean restored as in [`scaled_xc`].
pub fn pinv_recon(ens: &MaskEnsemble, b: &BucketVector) -> Result<Image> {
    pinv_recon_with_limit(ens, b, PINV_PIXEL_LIMIT)
}

pub fn pinv_recon_with_limit(ens: &MaskEnsemble, b: &BucketVector, pixel_limit: usize) -> Result<Image> {
    check_j(ens, b.len())?;
    let npx = ens.pixels();
    if npx > pixel_limit {
        return Err(GiError::TooLarge {
            pixels: npx,
            limit: pixel_limit,
        });
    }
    let a = centered_matrix(ens);
    let bt = DVector::from_vec(centered_buckets(b));
    let t = if ens.j() >= npx {
        let mut normal = a.tr_mul(&a);
        add_ridge(&mut normal)?;
        let rhs = a.tr_mul(&bt);
        normal.cholesky().ok_or(GiError::Singular)?.solve(&rhs)
    } else {
        let mut dual = &a * a.transpose();
        add_ridge(&mut dual)?;
        let y = dual.cholesky().ok_or(GiError::Singular)?.solve(&bt);
        a.tr_mul(&y)
    };
    let mut t = t.as_slice().to_vec();
    if ens.constant_sum().is_some() {
        // flat images are in the null space; the ridge leaves round-off there
        let m = t.iter().sum::<f64>() / npx as f64;
        t.iter_mut().for_each(|v| *v -= m);
    }
    restore_mean(ens, b, &mut t);
    Ok(Image::from_raw(ens.n(), t, ens.pitch_mm()))
}

fn add_ridge(m: &mut DMatrix<f64>) -> Result<()> {
    let dim = m.nrows();
    let eps = PINV_RIDGE * m.trace() / dim as f64;
    if !(eps > 0.0) {
        return Err(GiError::Singular);
    }
    for i in 0..dim {
        m[(i, i)] += eps;
    }
    Ok(())
}
