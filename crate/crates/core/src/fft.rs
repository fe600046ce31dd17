//! Radix-2 complex FFT on power-of-two lengths, applied axis by axis to
//! `d`-dimensional arrays stored with axis 0 varying fastest.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{invalid, Result};

/// Precomputed twiddles and bit-reversal table for one length.
#[derive(Debug, Clone)]
pub struct Fft {
    n: usize,
    cos: Vec<f64>,
    sin: Vec<f64>,
    rev: Vec<usize>,
}

impl Fft {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            return Err(invalid("FFT length must be a power of two"));
        }
        let bits = n.trailing_zeros();
        let rev = (0..n)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
            .collect();
        let half = n / 2;
        let cos = (0..half).map(|k| libm::cos(2.0 * PI * k as f64 / n as f64)).collect();
        let sin = (0..half).map(|k| libm::sin(2.0 * PI * k as f64 / n as f64)).collect();
        Ok(Self { n, cos, sin, rev })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// In-place transform. `inverse` uses the conjugate twiddles and divides by `n`.
    pub fn transform(&self, re: &mut [f64], im: &mut [f64], inverse: bool) {
        let n = self.n;
        debug_assert!(re.len() == n && im.len() == n);
        for i in 0..n {
            let j = self.rev[i];
            if j > i {
                re.swap(i, j);
                im.swap(i, j);
            }
        }
        let sign = if inverse { 1.0 } else { -1.0 };
        let mut len = 2;
        while len <= n {
            let step = n / len;
            let half = len / 2;
            for start in (0..n).step_by(len) {
                for k in 0..half {
                    let wr = self.cos[k * step];
                    let wi = sign * self.sin[k * step];
                    let a = start + k;
                    let b = a + half;
                    let tr = re[b] * wr - im[b] * wi;
                    let ti = re[b] * wi + im[b] * wr;
                    re[b] = re[a] - tr;
                    im[b] = im[a] - ti;
                    re[a] += tr;
                    im[a] += ti;
                }
            }
            len *= 2;
        }
        if inverse {
            let s = 1.0 / n as f64;
            for (r, i) in re.iter_mut().zip(im.iter_mut()) {
                *r *= s;
                *i *= s;
            }
        }
    }

    /// Transform of a `d`-dimensional `n^d` array along every axis.
    pub fn transform_nd(&self, d: usize, re: &mut [f64], im: &mut [f64], inverse: bool) {
        let n = self.n;
        let total = n.pow(d as u32);
        debug_assert!(re.len() == total && im.len() == total);
        let mut stride = 1;
        for _axis in 0..d {
            let lines = total / n;
            // Lines along this axis: start = outer * stride * n + inner.
            let transformed = crate::par::map(lines, |line| {
                let inner = line % stride;
                let outer = line / stride;
                let base = outer * stride * n + inner;
                let mut lr = vec![0.0; n];
                let mut li = vec![0.0; n];
                for j in 0..n {
                    lr[j] = re[base + j * stride];
                    li[j] = im[base + j * stride];
                }
                self.transform(&mut lr, &mut li, inverse);
                (lr, li)
            });
            for (line, (lr, li)) in transformed.into_iter().enumerate() {
                let inner = line % stride;
                let outer = line / stride;
                let base = outer * stride * n + inner;
                for j in 0..n {
                    re[base + j * stride] = lr[j];
                    im[base + j * stride] = li[j];
                }
            }
            stride *= n;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(re: &[f64], im: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = re.len();
        let mut outr = vec![0.0; n];
        let mut outi = vec![0.0; n];
        for k in 0..n {
            for j in 0..n {
                let ang = -2.0 * PI * (k * j) as f64 / n as f64;
                outr[k] += re[j] * libm::cos(ang) - im[j] * libm::sin(ang);
                outi[k] += re[j] * libm::sin(ang) + im[j] * libm::cos(ang);
            }
        }
        (outr, outi)
    }

    #[test]
    fn matches_naive_dft() {
        for n in [1usize, 2, 8, 32] {
            let fft = Fft::new(n).unwrap();
            let re0: Vec<f64> = (0..n).map(|i| libm::sin(i as f64 * 1.3) + 0.2 * i as f64).collect();
            let im0: Vec<f64> = (0..n).map(|i| libm::cos(i as f64 * 0.7)).collect();
            let (er, ei) = naive_dft(&re0, &im0);
            let mut re = re0.clone();
            let mut im = im0.clone();
            fft.transform(&mut re, &mut im, false);
            for k in 0..n {
                assert!((re[k] - er[k]).abs() < 1e-10 && (im[k] - ei[k]).abs() < 1e-10);
            }
            fft.transform(&mut re, &mut im, true);
            for k in 0..n {
                assert!((re[k] - re0[k]).abs() < 1e-12 && (im[k] - im0[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn nd_transform_of_plane_wave() {
        let n = 8;
        let fft = Fft::new(n).unwrap();
        let mut re = vec![0.0; n * n];
        let mut im = vec![0.0; n * n];
        for j in 0..n {
            for i in 0..n {
                re[i + n * j] = libm::cos(2.0 * PI * (i as f64 + 2.0 * j as f64) / n as f64);
            }
        }
        fft.transform_nd(2, &mut re, &mut im, false);
        let half = (n * n) as f64 / 2.0;
        for j in 0..n {
            for i in 0..n {
                let expected = if (i, j) == (1, 2) || (i, j) == (n - 1, n - 2) { half } else { 0.0 };
                assert!((re[i + n * j] - expected).abs() < 1e-10, "{i} {j}");
                assert!(im[i + n * j].abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(Fft::new(12).is_err());
        assert!(Fft::new(0).is_err());
    }
}
