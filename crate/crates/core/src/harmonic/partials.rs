use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coefficients of the frequency-dependent loss law
/// `sigma(f) = pi * (b0 + b1 sqrt(f) + b2 f^3 + b3 f)` (per second, `f` in Hz).
///
/// `b0` and `b3` also absorb the soundboard losses, which enter the law as a
/// constant and a term linear in frequency.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DampingCoeffs {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
}

impl DampingCoeffs {
    pub const fn new(b0: f64, b1: f64, b2: f64, b3: f64) -> Self {
        Self { b0, b1, b2, b3 }
    }

    /// Element-wise modulus; this is how unconstrained values are mapped onto
    /// valid coefficients.
    pub fn abs(self) -> Self {
        Self::new(self.b0.abs(), self.b1.abs(), self.b2.abs(), self.b3.abs())
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.b0, self.b1, self.b2, self.b3]
    }

    pub fn from_array(b: [f64; 4]) -> Self {
        Self::new(b[0], b[1], b[2], b[3])
    }

    pub fn is_valid(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite() && *v >= 0.0)
    }

    /// Decay rate in 1/s at frequency `freq` (Hz).
    pub fn sigma_per_second(&self, freq: f64) -> f64 {
        PI * (self.b0 + self.b1 * freq.sqrt() + self.b2 * freq.powi(3) + self.b3 * freq)
    }
}

/// Stiff-string partial frequencies `f_m = m F0 (1 + B m^2)` for `m = 1..=count`,
/// stopping before the first one at or above `nyquist`.
pub fn partial_frequencies(
    f0: f64,
    inharmonicity: f64,
    count: usize,
    nyquist: f64,
) -> Result<Vec<f64>> {
    if !(f0 > 0.0 && f0.is_finite()) {
        return Err(Error::invalid(format!("F0 must be positive, got {f0}")));
    }
    if !(inharmonicity >= 0.0 && inharmonicity.is_finite()) {
        return Err(Error::invalid(format!(
            "inharmonicity must be non-negative, got {inharmonicity}"
        )));
    }
    if count == 0 {
        return Err(Error::invalid("need at least one partial"));
    }
    if f0 >= nyquist {
        return Err(Error::invalid(format!(
            "F0 {f0} Hz is not below Nyquist {nyquist} Hz"
        )));
    }
    Ok((1..=count)
        .map(|m| partial_frequency(f0, inharmonicity, m))
        .take_while(|f| *f < nyquist)
        .collect())
}

#[inline]
pub(crate) fn partial_frequency(f0: f64, inharmonicity: f64, m: usize) -> f64 {
    let m = m as f64;
    m * f0 * (1.0 + inharmonicity * m * m)
}

/// Default partial count: every partial below 0.45 x sample rate, at most 100.
pub fn default_partial_count(f0: f64, inharmonicity: f64, sample_rate: u32) -> usize {
    let limit = 0.45 * sample_rate as f64;
    (1..=100)
        .take_while(|m| partial_frequency(f0, inharmonicity, *m) < limit)
        .count()
        .max(1)
}

/// Per-sample decay rates: the amplitude of partial `m` at sample `n` is
/// `alpha_m exp(-sigma_m n)`.
pub fn decay_rates(frequencies: &[f64], damping: &DampingCoeffs, sample_rate: u32) -> Vec<f64> {
    frequencies
        .iter()
        .map(|f| damping.sigma_per_second(*f) / sample_rate as f64)
        .collect()
}
