//! Orthonormal DCT-II and its inverse (DCT-III), computed through a single
//! complex FFT of the even/odd reordered input. Works for any length.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use super::fft;
use crate::error::{Error, Result};

fn scale(k: usize, n: usize) -> f64 {
    if k == 0 {
        (1.0 / n as f64).sqrt()
    } else {
        (2.0 / n as f64).sqrt()
    }
}

/// Orthonormal DCT-II.
pub fn dct2(signal: &[f64]) -> Result<Vec<f64>> {
    let n = signal.len();
    if n == 0 {
        return Err(Error::invalid("dct2 of an empty signal"));
    }
    let mut v: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); n];
    for i in 0..n.div_ceil(2) {
        v[i].re = signal[2 * i];
    }
    for i in 0..n / 2 {
        v[n - 1 - i].re = signal[2 * i + 1];
    }
    fft::forward_complex(n).process(&mut v);
    Ok((0..n)
        .map(|k| {
            let twiddle = Complex64::from_polar(1.0, -PI * k as f64 / (2 * n) as f64);
            scale(k, n) * (twiddle * v[k]).re
        })
        .collect())
}

/// Inverse of [`dct2`] (orthonormal DCT-III).
pub fn idct2(coeffs: &[f64]) -> Result<Vec<f64>> {
    let n = coeffs.len();
    if n == 0 {
        return Err(Error::invalid("idct2 of empty coefficients"));
    }
    let unscaled: Vec<f64> = coeffs
        .iter()
        .enumerate()
        .map(|(k, c)| c / scale(k, n))
        .collect();
    let mut v: Vec<Complex64> = (0..n)
        .map(|k| {
            let mirror = if k == 0 { 0.0 } else { unscaled[n - k] };
            let twiddle = Complex64::from_polar(1.0, PI * k as f64 / (2 * n) as f64);
            twiddle * Complex64::new(unscaled[k], -mirror)
        })
        .collect();
    fft::inverse_complex(n).process(&mut v);
    let mut out = vec![0.0; n];
    let norm = 1.0 / n as f64;
    for i in 0..n.div_ceil(2) {
        out[2 * i] = v[i].re * norm;
    }
    for i in 0..n / 2 {
        out[2 * i + 1] = v[n - 1 - i].re * norm;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Direct O(n^2) evaluation of the orthonormal DCT-II definition.
    fn dct2_direct(x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                scale(k, n)
                    * x.iter()
                        .enumerate()
                        .map(|(i, v)| {
                            v * (PI * k as f64 * (2 * i + 1) as f64 / (2 * n) as f64).cos()
                        })
                        .sum::<f64>()
            })
            .collect()
    }

    fn pseudo_random(n: usize, seed: u64) -> Vec<f64> {
        let mut s = seed;
        (0..n)
            .map(|_| {
                s = s
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                (s >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
            })
            .collect()
    }

    #[test]
    fn matches_direct_definition() {
        for n in [1, 2, 3, 7, 16, 33, 100] {
            let x = pseudo_random(n, n as u64);
            let fast = dct2(&x).unwrap();
            let slow = dct2_direct(&x);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-11, "n={n}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn round_trip_1300() {
        let x = pseudo_random(1300, 42);
        let y = idct2(&dct2(&x).unwrap()).unwrap();
        let err = x
            .iter()
            .zip(&y)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-9, "max error {err}");
    }

    #[test]
    fn round_trip_up_to_8192() {
        for n in [4097, 8192] {
            let x = pseudo_random(n, 7);
            let y = idct2(&dct2(&x).unwrap()).unwrap();
            let err = x
                .iter()
                .zip(&y)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(err <= 1e-9, "n={n}: max error {err}");
        }
    }

    #[test]
    fn one_hot_is_a_sampled_cosine() {
        let n = 1300;
        let k = 17;
        let mut c = vec![0.0; n];
        c[k] = 1.0;
        let y = idct2(&c).unwrap();
        for (i, v) in y.iter().enumerate() {
            let expected =
                scale(k, n) * (PI * k as f64 * (2 * i + 1) as f64 / (2 * n) as f64).cos();
            assert!((v - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_has_only_dc() {
        let c = dct2(&[0.3; 64]).unwrap();
        assert!((c[0] - 0.3 * 8.0).abs() < 1e-12);
        assert!(c[1..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn empty_is_rejected() {
        assert!(dct2(&[]).is_err());
        assert!(idct2(&[]).is_err());
    }

    proptest! {
        #[test]
        fn inverse_property(x in prop::collection::vec(-1.0f64..1.0, 1..600)) {
            let y = idct2(&dct2(&x).unwrap()).unwrap();
            for (a, b) in x.iter().zip(&y) {
                prop_assert!((a - b).abs() <= 1e-9);
            }
        }
    }
}
