use crate::error::{GiError, Result};

/// Square grid of real values, stored row-major (`index = y * n + x`).
///
/// Used for object transmission, reconstructions, photon-rate scenes and PSFs.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    n: usize,
    pixels: Vec<f64>,
    pitch_mm: f64,
}

impl Image {
    pub fn new(n: usize, pixels: Vec<f64>, pitch_mm: f64) -> Result<Self> {
        if n < 2 {
            return Err(GiError::invalid(format!("image side must be >= 2, got {n}")));
        }
        if pixels.len() != n * n {
            return Err(GiError::DimensionMismatch {
                what: "pixel count",
                expected: n * n,
                actual: pixels.len(),
            });
        }
        if !(pitch_mm > 0.0 && pitch_mm.is_finite()) {
            return Err(GiError::invalid(format!("pixel pitch must be positive, got {pitch_mm}")));
        }
        if let Some(bad) = pixels.iter().position(|v| !v.is_finite()) {
            return Err(GiError::invalid(format!("non-finite pixel at index {bad}")));
        }
        Ok(Image { n, pixels, pitch_mm })
    }

    /// Image with the default pitch of `1/n` mm (a 1 mm field of view).
    pub fn from_pixels(n: usize, pixels: Vec<f64>) -> Result<Self> {
        Image::new(n, pixels, 1.0 / n as f64)
    }

    pub fn constant(n: usize, value: f64) -> Self {
        Image::from_pixels(n, vec![value; n * n]).expect("constant image is valid")
    }

    pub fn zeros(n: usize) -> Self {
        Image::constant(n, 0.0)
    }

    /// Unit impulse at `(x, y)`.
    pub fn delta(n: usize, x: usize, y: usize) -> Self {
        let mut img = Image::zeros(n);
        img.pixels[y * n + x] = 1.0;
        img
    }

    pub(crate) fn from_raw(n: usize, pixels: Vec<f64>, pitch_mm: f64) -> Self {
        debug_assert_eq!(pixels.len(), n * n);
        Image { n, pixels, pitch_mm }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pitch_mm(&self) -> f64 {
        self.pitch_mm
    }

    pub fn with_pitch(mut self, pitch_mm: f64) -> Self {
        assert!(pitch_mm > 0.0);
        self.pitch_mm = pitch_mm;
        self
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.n + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.pixels[y * self.n + x] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.pixels
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.pixels
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.pixels
    }

    pub fn sum(&self) -> f64 {
        self.pixels.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.len() as f64
    }

    pub fn dot(&self, other: &Image) -> f64 {
        dot(&self.pixels, &other.pixels)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Image {
        Image::from_raw(self.n, self.pixels.iter().map(|&v| f(v)).collect(), self.pitch_mm)
    }

    pub fn scaled(&self, factor: f64) -> Image {
        self.map(|v| v * factor)
    }

    /// `alpha * self + beta * other`.
    pub fn combine(&self, alpha: f64, other: &Image, beta: f64) -> Result<Image> {
        self.check_same_size(other)?;
        let pixels = self
            .pixels
            .iter()
            .zip(&other.pixels)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        Ok(Image::from_raw(self.n, pixels, self.pitch_mm))
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.pixels
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Transmission images must be non-negative.
    pub fn validate_transmission(&self) -> Result<()> {
        match self.pixels.iter().position(|&v| v < 0.0) {
            Some(i) => Err(GiError::invalid(format!(
                "transmission must be non-negative (pixel {i} = {})",
                self.pixels[i]
            ))),
            None => Ok(()),
        }
    }

    pub fn check_same_size(&self, other: &Image) -> Result<()> {
        if self.n != other.n {
            return Err(GiError::DimensionMismatch {
                what: "image side",
                expected: self.n,
                actual: other.n,
            });
        }
        Ok(())
    }

    /// Cyclic shift so that pixel `(0, 0)` moves to the image centre `(n/2, n/2)`.
    pub fn centered(&self) -> Image {
        let n = self.n;
        let h = n / 2;
        let mut out = vec![0.0; n * n];
        for y in 0..n {
            for x in 0..n {
                out[((y + h) % n) * n + (x + h) % n] = self.pixels[y * n + x];
            }
        }
        Image::from_raw(n, out, self.pitch_mm)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    // four accumulators: keeps the reduction order fixed and lets the loop vectorise
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let k = 4 * i;
        acc[0] += a[k] * b[k];
        acc[1] += a[k + 1] * b[k + 1];
        acc[2] += a[k + 2] * b[k + 2];
        acc[3] += a[k + 3] * b[k + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for k in 4 * chunks..a.len() {
        s += a[k] * b[k];
    }
    s
}

pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
