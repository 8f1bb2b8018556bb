//! Iterative radix-2 complex FFT.
//!
//! Every grid in the crate has a power-of-two node count, so a single
//! radix-2 plan covers all transforms. Forward uses `e^{-2 pi i jk/n}`;
//! [`FftPlan::inverse`] is normalized by `1/n`.

use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;

use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct FftPlan {
    n: usize,
    twiddles: Vec<Complex64>,
    bitrev: Vec<usize>,
}

impl FftPlan {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::Input("FFT length must be a power of two"));
        }
        let twiddles = (0..n / 2)
            .map(|k| {
                let theta = -2.0 * PI * k as f64 / n as f64;
                Complex64::new(libm::cos(theta), libm::sin(theta))
            })
            .collect();
        let bits = n.trailing_zeros();
        let bitrev = (0..n)
            .map(|i| {
                if bits == 0 {
                    0
                } else {
                    i.reverse_bits() >> (usize::BITS - bits)
                }
            })
            .collect();
        Ok(Self {
            n,
            twiddles,
            bitrev,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, false);
    }

    /// Inverse transform including the `1/n` factor.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, true);
        let scale = 1.0 / self.n as f64;
        for z in data.iter_mut() {
            *z *= scale;
        }
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.n;
        assert_eq!(data.len(), n, "FFT buffer length mismatch");
        for i in 0..n {
            let j = self.bitrev[i];
            if j > i {
                data.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let stride = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..half {
                    let mut w = self.twiddles[k * stride];
                    if inverse {
                        w = w.conj();
                    }
                    let a = data[start + k];
                    let b = data[start + k + half] * w;
                    data[start + k] = a + b;
                    data[start + k + half] = a - b;
                }
            }
            len <<= 1;
        }
    }
}

/// Forward transform of real samples.
pub fn forward_real(plan: &FftPlan, values: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    plan.forward(&mut buf);
    buf
}

/// Inverse transform keeping only the real part.
pub fn inverse_real(plan: &FftPlan, mut spectrum: Vec<Complex64>) -> Vec<f64> {
    plan.inverse(&mut spectrum);
    spectrum.into_iter().map(|z| z.re).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(j, &v)| {
                        let th = -2.0 * PI * (j * k) as f64 / n as f64;
                        v * Complex64::new(th.cos(), th.sin())
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn matches_naive_dft() {
        let n = 32;
        let x: Vec<Complex64> = (0..n)
            .map(|j| Complex64::new((j as f64 * 0.37).sin(), (j as f64 * 1.3).cos()))
            .collect();
        let plan = FftPlan::new(n).unwrap();
        let mut y = x.clone();
        plan.forward(&mut y);
        let z = naive_dft(&x);
        for (a, b) in y.iter().zip(&z) {
            assert!((a - b).norm() < 1e-12);
        }
        plan.inverse(&mut y);
        for (a, b) in y.iter().zip(&x) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(FftPlan::new(12).is_err());
        assert!(FftPlan::new(1).is_ok());
    }
}
