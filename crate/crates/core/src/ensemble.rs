//! Mask ensembles.
//!
//! Ensembles are usually far too large to hold in memory (65536 masks of
//! 64×64 is 2 GB), so masks are rendered on demand from a [`MaskSource`] and
//! every statistic the rest of the crate needs is cached in one pass at
//! construction.

use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{GiError, Result};
use crate::image::Image;

/// Masks per work item. Fixed so that reductions happen in the same order
/// whatever the thread count.
pub(crate) const CHUNK: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MaskFamily {
    RandomBinary,
    RandomGray,
    Blurred,
    Hadamard,
    UraScan,
    PinholeScan,
}

impl MaskFamily {
    pub fn name(self) -> &'static str {
        match self {
            MaskFamily::RandomBinary => "random_binary",
            MaskFamily::RandomGray => "random_gray",
            MaskFamily::Blurred => "blurred",
            MaskFamily::Hadamard => "hadamard",
            MaskFamily::UraScan => "ura_scan",
            MaskFamily::PinholeScan => "pinhole_scan",
        }
    }

    /// True for the families whose full ensembles are orthogonal under the
    /// mean-corrected inner product.
    pub fn is_orthogonal(self) -> bool {
        matches!(self, MaskFamily::Hadamard | MaskFamily::UraScan | MaskFamily::PinholeScan)
    }
}

impl fmt::Display for MaskFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Procedural generator of `count()` masks of side `side()`.
///
/// `render` must be a pure function of `index`: it is called from many
/// threads and more than once per mask.
pub trait MaskSource: Send + Sync + fmt::Debug {
    fn side(&self) -> usize;
    fn count(&self) -> usize;
    fn render(&self, index: usize, out: &mut [f64]);
}

/// Masks held in memory.
#[derive(Debug, Clone)]
pub struct StoredMasks {
    n: usize,
    data: Vec<f64>,
}

impl StoredMasks {
    pub fn new(n: usize, masks: &[Image]) -> Result<Self> {
        let mut data = Vec::with_capacity(masks.len() * n * n);
        for m in masks {
            if m.n() != n {
                return Err(GiError::DimensionMismatch {
                    what: "mask side",
                    expected: n,
                    actual: m.n(),
                });
            }
            data.extend_from_slice(m.as_slice());
        }
        Ok(StoredMasks { n, data })
    }
}

impl MaskSource for StoredMasks {
    fn side(&self) -> usize {
        self.n
    }
    fn count(&self) -> usize {
        self.data.len() / (self.n * self.n)
    }
    fn render(&self, index: usize, out: &mut [f64]) {
        let npx = self.n * self.n;
        out.copy_from_slice(&self.data[index * npx..(index + 1) * npx]);
    }
}

/// A subset of another source's masks, in the given order.
#[derive(Debug)]
pub struct SubsetSource {
    inner: Arc<dyn MaskSource>,
    indices: Vec<usize>,
}

impl MaskSource for SubsetSource {
    fn side(&self) -> usize {
        self.inner.side()
    }
    fn count(&self) -> usize {
        self.indices.len()
    }
    fn render(&self, index: usize, out: &mut [f64]) {
        self.inner.render(self.indices[index], out)
    }
}

/// Construction-time facts a generator knows analytically.
#[derive(Debug, Clone, Copy, Default)]
pub struct EnsembleHints {
    /// Exact adjoint-to-inverse scale for orthogonal families.
    pub exact_gamma: Option<f64>,
    /// A pixel that is 1 in every mask (Hadamard DC pixel).
    pub lit_pixel: Option<usize>,
}

/// Ordered set of `J` masks with cached statistics.
#[derive(Clone)]
pub struct MaskEnsemble {
    source: Arc<dyn MaskSource>,
    n: usize,
    j: usize,
    family: MaskFamily,
    pitch_mm: f64,
    mu_a: f64,
    sigma_a: f64,
    mask_sums: Vec<f64>,
    pixel_mean: Vec<f64>,
    constant_sum: Option<f64>,
    hints: EnsembleHints,
}

impl fmt::Debug for MaskEnsemble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MaskEnsemble")
            .field("family", &self.family)
            .field("n", &self.n)
            .field("j", &self.j)
            .field("mu_a", &self.mu_a)
            .field("sigma_a", &self.sigma_a)
            .field("constant_sum", &self.constant_sum)
            .finish()
    }
}

struct StatsAcc {
    pixel_sum: Vec<f64>,
    sums: Vec<f64>,
    shifted: f64,
    shifted_sq: f64,
    lo: f64,
    hi: f64,
}

impl MaskEnsemble {
    /// Render every mask once and cache the ensemble statistics.
    pub fn from_source(
        source: Arc<dyn MaskSource>,
        family: MaskFamily,
        pitch_mm: f64,
        hints: EnsembleHints,
    ) -> Result<Self> {
        let n = source.side();
        let j = source.count();
        if n < 2 {
            return Err(GiError::invalid(format!("mask side must be >= 2, got {n}")));
        }
        if j == 0 {
            return Err(GiError::invalid("ensemble needs at least one mask"));
        }
        if !(pitch_mm > 0.0) {
            return Err(GiError::invalid("pitch must be positive"));
        }
        let npx = n * n;

        // shift by the mean of mask 0 so σ² comes out without cancellation
        let mut first = vec![0.0; npx];
        source.render(0, &mut first);
        let shift = first.iter().sum::<f64>() / npx as f64;

        let mut pixel_sum = vec![0.0; npx];
        let mut mask_sums = Vec::with_capacity(j);
        let (mut s1, mut s2) = (0.0, 0.0);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let src = &*source;
        ordered_chunks(
            j,
            |range| {
                let mut acc = StatsAcc {
                    pixel_sum: vec![0.0; npx],
                    sums: Vec::with_capacity(range.len()),
                    shifted: 0.0,
                    shifted_sq: 0.0,
                    lo: f64::INFINITY,
                    hi: f64::NEG_INFINITY,
                };
                let mut buf = vec![0.0; npx];
                for idx in range {
                    src.render(idx, &mut buf);
                    let mut s = 0.0;
                    for (p, &v) in acc.pixel_sum.iter_mut().zip(&buf) {
                        *p += v;
                        s += v;
                        let d = v - shift;
                        acc.shifted += d;
                        acc.shifted_sq += d * d;
                        acc.lo = acc.lo.min(v);
                        acc.hi = acc.hi.max(v);
                    }
                    acc.sums.push(s);
                }
                acc
            },
            |acc| {
                for (p, v) in pixel_sum.iter_mut().zip(&acc.pixel_sum) {
                    *p += v;
                }
                mask_sums.extend_from_slice(&acc.sums);
                s1 += acc.shifted;
                s2 += acc.shifted_sq;
                lo = lo.min(acc.lo);
                hi = hi.max(acc.hi);
            },
        );
        if !(lo >= 0.0 && hi <= 1.0) {
            return Err(GiError::invalid(format!(
                "mask values must lie in [0, 1], found range [{lo}, {hi}]"
            )));
        }
        let total = (j * npx) as f64;
        let m1 = s1 / total;
        let mu_a = shift + m1;
        let sigma_a = (s2 / total - m1 * m1).max(0.0).sqrt();
        let pixel_mean = pixel_sum.iter().map(|s| s / j as f64).collect();
        let constant_sum = detect_constant_sum(&mask_sums);

        Ok(MaskEnsemble {
            source,
            n,
            j,
            family,
            pitch_mm,
            mu_a,
            sigma_a,
            mask_sums,
            pixel_mean,
            constant_sum,
            hints,
        })
    }

    /// Ensemble from in-memory masks, default pitch `1/n`.
    pub fn from_images(masks: &[Image], family: MaskFamily) -> Result<Self> {
        let n = masks
            .first()
            .ok_or_else(|| GiError::invalid("ensemble needs at least one mask"))?
            .n();
        let stored = StoredMasks::new(n, masks)?;
        MaskEnsemble::from_source(Arc::new(stored), family, 1.0 / n as f64, EnsembleHints::default())
    }

    /// Masks `indices` of this ensemble, as a new ensemble with fresh statistics.
    ///
    /// The exact scale of an orthogonal family is kept: a subset of an
    /// orthogonal basis still inverts on the span it covers with the same scale.
    pub fn subset(&self, indices: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.j) {
            return Err(GiError::invalid(format!("subset index {bad} out of range for J={}", self.j)));
        }
        let src = SubsetSource {
            inner: self.source.clone(),
            indices,
        };
        let hints = EnsembleHints {
            exact_gamma: self.hints.exact_gamma,
            lit_pixel: self.hints.lit_pixel,
        };
        MaskEnsemble::from_source(Arc::new(src), self.family, self.pitch_mm, hints)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn pixels(&self) -> usize {
        self.n * self.n
    }

    pub fn j(&self) -> usize {
        self.j
    }

    pub fn family(&self) -> MaskFamily {
        self.family
    }

    pub fn pitch_mm(&self) -> f64 {
        self.pitch_mm
    }

    pub fn mu_a(&self) -> f64 {
        self.mu_a
    }

    pub fn sigma_a(&self) -> f64 {
        self.sigma_a
    }

    pub fn constant_sum(&self) -> Option<f64> {
        self.constant_sum
    }

    pub fn hints(&self) -> EnsembleHints {
        self.hints
    }

    pub fn source(&self) -> &Arc<dyn MaskSource> {
        &self.source
    }

    /// Per-mask pixel sums `s_j`.
    pub fn mask_sums(&self) -> &[f64] {
        &self.mask_sums
    }

    /// Per-pixel ensemble mean `⟨A(x,y)⟩`.
    pub fn pixel_mean(&self) -> &[f64] {
        &self.pixel_mean
    }

    pub fn render(&self, index: usize, out: &mut [f64]) {
        self.source.render(index, out)
    }

    pub fn mask(&self, index: usize) -> Image {
        let mut buf = vec![0.0; self.pixels()];
        self.render(index, &mut buf);
        Image::from_raw(self.n, buf, self.pitch_mm)
    }

    /// Stream over all masks in deterministic chunks.
    ///
    /// `init` creates a per-chunk accumulator, `visit` folds one mask into it
    /// and `merge` receives the accumulators in mask order.
    pub fn fold_masks<T: Send>(
        &self,
        init: impl Fn() -> T + Sync,
        visit: impl Fn(&mut T, usize, &[f64]) + Sync,
        merge: impl FnMut(T),
    ) {
        let npx = self.pixels();
        let src = &*self.source;
        ordered_chunks(
            self.j,
            |range| {
                let mut acc = init();
                let mut buf = vec![0.0; npx];
                for idx in range {
                    src.render(idx, &mut buf);
                    visit(&mut acc, idx, &buf);
                }
                acc
            },
            merge,
        );
    }
}

impl MaskEnsemble {
    /// Like [`fold_masks`](Self::fold_masks) but `visit` sees a whole chunk
    /// at once: the index range and the masks packed row after row.
    pub fn fold_mask_chunks<T: Send>(
        &self,
        visit: impl Fn(Range<usize>, &[f64]) -> T + Sync,
        merge: impl FnMut(T),
    ) {
        let npx = self.pixels();
        let src = &*self.source;
        ordered_chunks(
            self.j,
            |range| {
                let mut buf = vec![0.0; range.len() * npx];
                for (k, idx) in range.clone().enumerate() {
                    src.render(idx, &mut buf[k * npx..(k + 1) * npx]);
                }
                visit(range, &buf)
            },
            merge,
        );
    }
}

/// `(μ_A, σ_A, k)` over all `J·n²` samples.
pub fn ensemble_stats(ens: &MaskEnsemble) -> (f64, f64, Option<f64>) {
    (ens.mu_a, ens.sigma_a, ens.constant_sum)
}

fn detect_constant_sum(sums: &[f64]) -> Option<f64> {
    let first = sums[0];
    let tol = 1e-9 * first.abs().max(f64::MIN_POSITIVE);
    if sums.iter().all(|s| (s - first).abs() <= tol) {
        Some(first)
    } else {
        None
    }
}

/// Map fixed-size chunks of `0..count` in parallel and hand the results to
/// `fold` in chunk order.
pub(crate) fn ordered_chunks<T: Send>(
    count: usize,
    map: impl Fn(Range<usize>) -> T + Sync,
    mut fold: impl FnMut(T),
) {
    let nchunks = count.div_ceil(CHUNK);
    // chunks in flight at once; only bounds memory, never changes the result
    let group = 2 * rayon::current_num_threads();
    let mut start = 0;
    while start < nchunks {
        let end = (start + group).min(nchunks);
        let parts: Vec<T> = (start..end)
            .into_par_iter()
            .map(|c| map(c * CHUNK..((c + 1) * CHUNK).min(count)))
            .collect();
        parts.into_iter().for_each(&mut fold);
        start = end;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_stats(masks: &[Image]) -> (f64, f64) {
        let all: Vec<f64> = masks.iter().flat_map(|m| m.as_slice().to_vec()).collect();
        crate::stats::mean_std(&all)
    }

    #[test]
    fn all_ones() {
        let masks = vec![Image::constant(4, 1.0); 3];
        let ens = MaskEnsemble::from_images(&masks, MaskFamily::RandomBinary).unwrap();
        assert_eq!(ensemble_stats(&ens), (1.0, 0.0, Some(16.0)));
    }

    #[test]
    fn stats_match_brute_force() {
        let masks: Vec<Image> = (0..70)
            .map(|j| {
                let px = (0..9).map(|i| ((i * 7 + j * 13) % 11) as f64 / 10.0).collect();
                Image::from_pixels(3, px).unwrap()
            })
            .collect();
        let ens = MaskEnsemble::from_images(&masks, MaskFamily::RandomGray).unwrap();
        let (m, s) = brute_stats(&masks);
        assert!((ens.mu_a() - m).abs() <= 1e-12 * m);
        assert!((ens.sigma_a() - s).abs() <= 1e-12 * s);
        assert_eq!(ens.mask_sums().len(), 70);
        assert_eq!(ens.constant_sum(), None);
    }

    #[test]
    fn rejects_out_of_range_values() {
        let masks = vec![Image::constant(2, 1.5)];
        assert!(MaskEnsemble::from_images(&masks, MaskFamily::RandomGray).is_err());
    }

    #[test]
    fn fold_visits_in_order() {
        let masks: Vec<Image> = (0..100).map(|j| Image::constant(2, j as f64 / 100.0)).collect();
        let ens = MaskEnsemble::from_images(&masks, MaskFamily::RandomGray).unwrap();
        let mut seen = Vec::new();
        ens.fold_masks(Vec::new, |acc, idx, m| acc.push((idx, m[0])), |part| seen.extend(part));
        assert_eq!(seen.len(), 100);
        assert!(seen.iter().enumerate().all(|(i, &(idx, v))| i == idx && v == i as f64 / 100.0));
    }

    #[test]
    fn subset_keeps_order() {
        let masks: Vec<Image> = (0..5).map(|j| Image::constant(2, j as f64 / 5.0)).collect();
        let ens = MaskEnsemble::from_images(&masks, MaskFamily::RandomGray).unwrap();
        let sub = ens.subset(vec![4, 1]).unwrap();
        assert_eq!(sub.j(), 2);
        assert_eq!(sub.mask(0).get(0, 0), 0.8);
        assert!(ens.subset(vec![5]).is_err());
    }
}
