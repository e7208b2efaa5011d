use crate::error::Result;
use crate::image::Image;

/// Root-mean-square difference between a reconstruction and the truth, and
/// the SNR `1/RMSE` (infinite for a perfect match).
pub fn rmse_snr(estimate: &Image, truth: &Image) -> Result<(f64, f64)> {
    estimate.check_same_size(truth)?;
    let r = rmse(estimate.as_slice(), truth.as_slice());
    Ok((r, snr_from_rmse(r)))
}

pub fn rmse(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let ss: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (ss / a.len() as f64).sqrt()
}

pub fn snr_from_rmse(r: f64) -> f64 {
    if r == 0.0 {
        f64::INFINITY
    } else {
        1.0 / r
    }
}
