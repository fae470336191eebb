//! Longitudinal ("phantom") partials derived from the transverse ones.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartialFamily {
    Vertical,
    Horizontal,
    PhantomEvenVertical,
    PhantomEvenHorizontal,
    PhantomOddVertical,
    PhantomOddHorizontal,
}

impl PartialFamily {
    pub fn is_phantom(self) -> bool {
        !matches!(self, PartialFamily::Vertical | PartialFamily::Horizontal)
    }
}

/// One family of exponentially decaying sinusoids.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialSet {
    pub frequencies: Vec<f64>,
    pub amplitudes: Vec<f64>,
    /// Per sample.
    pub decay_rates: Vec<f64>,
    pub family: PartialFamily,
}

impl PartialSet {
    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    /// Checks the set against its invariants for a given Nyquist frequency.
    pub fn validate(&self, nyquist: f64) -> Result<()> {
        let n = self.frequencies.len();
        if self.amplitudes.len() != n || self.decay_rates.len() != n {
            return Err(Error::invalid("partial set arrays differ in length"));
        }
        if self.frequencies.iter().any(|f| !(*f > 0.0 && *f < nyquist)) {
            return Err(Error::invalid("partial frequency outside (0, nyquist)"));
        }
        if self.frequencies.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid(
                "partial frequencies not strictly increasing",
            ));
        }
        if self.amplitudes.iter().any(|a| !(a.abs() <= 1.0)) {
            return Err(Error::invalid("partial amplitude magnitude above 1"));
        }
        if self.decay_rates.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::invalid("negative decay rate"));
        }
        Ok(())
    }
}

/// Lowest admissible phantom frequency relative to F0.
pub const PHANTOM_MIN_RATIO: f64 = 10.0;

/// Even and odd phantom families of both polarizations, keeping only
/// components at or above `10 F0` and below `nyquist`. Empty families are
/// omitted.
pub fn phantom_partials(
    vertical: &PartialSet,
    horizontal: &PartialSet,
    f0: f64,
    nyquist: f64,
) -> Vec<PartialSet> {
    phantom_partials_above(vertical, horizontal, PHANTOM_MIN_RATIO * f0, nyquist)
}

/// Like [`phantom_partials`] with an explicit admission floor in Hz.
pub fn phantom_partials_above(
    vertical: &PartialSet,
    horizontal: &PartialSet,
    min_frequency: f64,
    nyquist: f64,
) -> Vec<PartialSet> {
    let admit = |f: f64| f >= min_frequency && f < nyquist && f > 0.0;
    let mut out = Vec::with_capacity(4);
    for (source, even, odd) in [
        (
            vertical,
            PartialFamily::PhantomEvenVertical,
            PartialFamily::PhantomOddVertical,
        ),
        (
            horizontal,
            PartialFamily::PhantomEvenHorizontal,
            PartialFamily::PhantomOddHorizontal,
        ),
    ] {
        // doubling: 2f, alpha^2, 2 sigma
        let mut triples: Vec<(f64, f64, f64)> = (0..source.len())
            .map(|m| {
                (
                    2.0 * source.frequencies[m],
                    source.amplitudes[m] * source.amplitudes[m],
                    2.0 * source.decay_rates[m],
                )
            })
            .filter(|t| admit(t.0))
            .collect();
        out.push(collect_family(&mut triples, even));

        // neighbours |n - m| = 1: f_n +- f_m, alpha_n alpha_m, sigma_n + sigma_m
        let mut triples = Vec::new();
        for m in 0..source.len().saturating_sub(1) {
            let (fa, fb) = (source.frequencies[m], source.frequencies[m + 1]);
            let amp = source.amplitudes[m] * source.amplitudes[m + 1];
            let decay = source.decay_rates[m] + source.decay_rates[m + 1];
            for f in [fa + fb, fb - fa] {
                if admit(f) {
                    triples.push((f, amp, decay));
                }
            }
        }
        out.push(collect_family(&mut triples, odd));
    }
    out.retain(|s| !s.is_empty());
    out
}

fn collect_family(triples: &mut [(f64, f64, f64)], family: PartialFamily) -> PartialSet {
    triples.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut set = PartialSet {
        frequencies: Vec::with_capacity(triples.len()),
        amplitudes: Vec::with_capacity(triples.len()),
        decay_rates: Vec::with_capacity(triples.len()),
        family,
    };
    for &(f, a, s) in triples.iter() {
        // a sum and a difference can coincide exactly; keep the first
        if set.frequencies.last() == Some(&f) {
            continue;
        }
        set.frequencies.push(f);
        set.amplitudes.push(a);
        set.decay_rates.push(s);
    }
    set
}
