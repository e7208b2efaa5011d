//! 16-bit binary PGM (P5) with the display window stored in a comment.

use std::io::{self, Read, Write};

/// Linear grey-scale window: `lo` maps to 0, `hi` to 65535.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    pub const TRANSMISSION: Window = Window { lo: 0.0, hi: 1.0 };

    /// Data range, widened when flat.
    pub fn fit(values: &[f64]) -> Window {
        let (lo, hi) = values
            .iter()
            .filter(|v| v.is_finite())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
        if !lo.is_finite() {
            return Window::TRANSMISSION;
        }
        if hi > lo {
            Window { lo, hi }
        } else {
            Window { lo, hi: lo + 1.0 }
        }
    }
}

pub fn write_pgm<W: Write>(mut w: W, width: usize, height: usize, data: &[f64], win: Window) -> io::Result<()> {
    assert_eq!(data.len(), width * height, "pixel count does not match dimensions");
    write!(w, "P5\n# window {} {}\n{width} {height}\n65535\n", win.lo, win.hi)?;
    let span = win.hi - win.lo;
    let mut buf = Vec::with_capacity(2 * data.len());
    for &v in data {
        let q = if v.is_nan() { 0.0 } else { ((v - win.lo) / span * 65535.0).round().clamp(0.0, 65535.0) };
        buf.extend_from_slice(&(q as u16).to_be_bytes());
    }
    w.write_all(&buf)
}

/// Decoded image: dimensions, window and de-quantised values.
#[derive(Debug, Clone, PartialEq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub window: Window,
    pub data: Vec<f64>,
}

fn bad(msg: &str) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.to_string())
}

pub fn read_pgm<R: Read>(mut r: R) -> io::Result<Pgm> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut pos = 0;
    let mut window = Window::TRANSMISSION;
    let mut fields = Vec::new();
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos >= bytes.len() {
            return Err(bad("truncated PGM header"));
        }
        if bytes[pos] == b'#' {
            let end = bytes[pos..].iter().position(|&b| b == b'\n').map_or(bytes.len(), |e| pos + e);
            let comment = String::from_utf8_lossy(&bytes[pos + 1..end]);
            let parts: Vec<&str> = comment.split_whitespace().collect();
            if let ["window", lo, hi] = parts.as_slice() {
                window = Window {
                    lo: lo.parse().map_err(|_| bad("bad window"))?,
                    hi: hi.parse().map_err(|_| bad("bad window"))?,
                };
            }
            pos = end;
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    if fields[0] != "P5" || fields[3] != "65535" {
        return Err(bad("only 16-bit P5 images are supported"));
    }
    let width: usize = fields[1].parse().map_err(|_| bad("bad width"))?;
    let height: usize = fields[2].parse().map_err(|_| bad("bad height"))?;
    let body = &bytes[pos + 1..];
    if body.len() != 2 * width * height {
        return Err(bad("pixel data length does not match header"));
    }
    let span = window.hi - window.lo;
    let data = body
        .chunks_exact(2)
        .map(|c| window.lo + u16::from_be_bytes([c[0], c[1]]) as f64 / 65535.0 * span)
        .collect();
    Ok(Pgm {
        width,
        height,
        window,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let mut out = Vec::new();
        write_pgm(&mut out, 2, 1, &[0.0, 1.0], Window::TRANSMISSION).unwrap();
        assert_eq!(&out[..], b"P5\n# window 0 1\n2 1\n65535\n\x00\x00\xff\xff");
    }

    #[test]
    fn clamps_outside_window() {
        let mut out = Vec::new();
        write_pgm(&mut out, 3, 1, &[-2.0, 5.0, f64::NAN], Window::TRANSMISSION).unwrap();
        let p = read_pgm(&out[..]).unwrap();
        assert_eq!(p.data, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn flat_window() {
        assert_eq!(Window::fit(&[3.0, 3.0]), Window { lo: 3.0, hi: 4.0 });
    }

    proptest! {
        #[test]
        fn round_trip_within_quantisation(
            data in prop::collection::vec(-5.0f64..5.0, 12),
        ) {
            let win = Window::fit(&data);
            let mut out = Vec::new();
            write_pgm(&mut out, 4, 3, &data, win).unwrap();
            let p = read_pgm(&out[..]).unwrap();
            prop_assert_eq!((p.width, p.height), (4, 3));
            prop_assert_eq!(p.window, win);
            let step = (win.hi - win.lo) / 65535.0;
            for (a, b) in p.data.iter().zip(&data) {
                prop_assert!((a - b).abs() <= 0.5 * step + 1e-12);
            }
        }
    }
}
