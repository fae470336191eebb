//! Band-limited resampling with a Kaiser-windowed sinc kernel (beta = 8,
//! 64 taps per output phase measured at the lower of the two rates).

use std::f64::consts::PI;
use std::sync::OnceLock;

use super::AudioBuffer;
use crate::error::{Error, Result};

const KAISER_BETA: f64 = 8.0;
const HALF_TAPS: usize = 32;
/// Passband edge as a fraction of the lower Nyquist frequency. Places the
/// kernel's transition band below the new Nyquist instead of straddling it.
const ROLLOFF: f64 = 0.9;
const TABLE_DENSITY: usize = 512;

/// Modified Bessel function of the first kind, order zero (power series).
pub(crate) fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn kernel_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let norm = bessel_i0(KAISER_BETA);
        (0..=HALF_TAPS * TABLE_DENSITY + 1)
            .map(|i| {
                let u = i as f64 / TABLE_DENSITY as f64;
                let r = u / HALF_TAPS as f64;
                if r >= 1.0 {
                    return 0.0;
                }
                let window = bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / norm;
                let x = ROLLOFF * u;
                let sinc = if x == 0.0 {
                    1.0
                } else {
                    (PI * x).sin() / (PI * x)
                };
                ROLLOFF * sinc * window
            })
            .collect()
    })
}

/// Kernel value at distance `u`, in units of the lower rate's sample period.
fn kernel(table: &[f64], u: f64) -> f64 {
    let pos = u.abs() * TABLE_DENSITY as f64;
    let i = pos as usize;
    if i + 1 >= table.len() {
        return 0.0;
    }
    let frac = pos - i as f64;
    table[i] + (table[i + 1] - table[i]) * frac
}

/// Converts `signal` to `target_rate`. Output length is
/// `round(len * target_rate / source_rate)`.
pub fn resample(signal: &AudioBuffer, target_rate: u32) -> Result<AudioBuffer> {
    if target_rate == 0 {
        return Err(Error::invalid("target rate must be positive"));
    }
    let source_rate = signal.sample_rate();
    if target_rate == source_rate {
        return Ok(signal.clone());
    }
    let ratio = target_rate as f64 / source_rate as f64;
    let out_len = (signal.len() as f64 * ratio).round() as usize;
    // kernel is stretched when downsampling so its cutoff follows the new Nyquist
    let scale = ratio.min(1.0);
    let half_width = HALF_TAPS as f64 / scale;
    let table = kernel_table();
    let x = signal.samples();
    let samples = (0..out_len)
        .map(|i| {
            let t = i as f64 / ratio;
            let lo = ((t - half_width).ceil().max(0.0)) as usize;
            let hi = ((t + half_width).floor() as usize).min(x.len().saturating_sub(1));
            let mut acc = 0.0;
            for (k, v) in x.iter().enumerate().take(hi + 1).skip(lo) {
                acc += v * kernel(table, (t - k as f64) * scale);
            }
            acc * scale
        })
        .collect();
    Ok(AudioBuffer::from_parts(samples, target_rate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::stft;

    fn sine(freq: f64, rate: u32, len: usize) -> AudioBuffer {
        AudioBuffer::new(
            (0..len)
                .map(|n| (2.0 * PI * freq * n as f64 / rate as f64).sin())
                .collect(),
            rate,
        )
        .unwrap()
    }

    #[test]
    fn bessel_matches_reference_values() {
        assert!((bessel_i0(0.0) - 1.0).abs() < 1e-15);
        assert!((bessel_i0(1.0) - 1.266_065_877_752_008_4).abs() < 1e-14);
        assert!((bessel_i0(8.0) - 427.564_115_721_804_74).abs() < 1e-9);
    }

    #[test]
    fn same_rate_is_identity() {
        let x = sine(440.0, 24_000, 1000);
        assert_eq!(resample(&x, 24_000).unwrap(), x);
    }

    #[test]
    fn output_length_is_rounded_ratio() {
        let x = sine(440.0, 44_100, 44_101);
        assert_eq!(resample(&x, 24_000).unwrap().len(), 24_001);
        let x = sine(440.0, 16_000, 333);
        assert_eq!(resample(&x, 24_000).unwrap().len(), 500);
    }

    #[test]
    fn passband_sine_keeps_its_frequency() {
        let y = resample(&sine(1000.0, 48_000, 48_000), 24_000).unwrap();
        let spec = stft(&y.slice(4000, 8096), 4096, 3072).unwrap();
        let frame = spec.frame(0);
        let peak = (0..frame.len())
            .max_by(|a, b| frame[*a].total_cmp(&frame[*b]))
            .unwrap();
        let expected = 1000.0 / spec.bin_spacing();
        assert!(
            (peak as f64 - expected).abs() <= 1.0,
            "peak bin {peak}, expected {expected}"
        );
    }

    #[test]
    fn above_new_nyquist_is_rejected() {
        let x = sine(13_000.0, 48_000, 48_000);
        let y = resample(&x, 24_000).unwrap();
        // steady state only: both ends see a truncated kernel
        let inner = &y.samples()[200..y.len() - 200];
        let p_out = inner.iter().map(|v| v * v).sum::<f64>() / inner.len() as f64;
        let p_in = x.energy() / x.len() as f64;
        let db = 10.0 * (p_out / p_in).log10();
        assert!(db <= -60.0, "attenuation only {db:.1} dB");
    }

    #[test]
    fn upsampling_preserves_amplitude() {
        let y = resample(&sine(500.0, 16_000, 16_000), 24_000).unwrap();
        let inner = &y.samples()[500..y.len() - 500];
        let rms = (inner.iter().map(|v| v * v).sum::<f64>() / inner.len() as f64).sqrt();
        assert!(
            (rms - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-3,
            "rms {rms}"
        );
    }

    #[test]
    fn deterministic() {
        let x = sine(3000.0, 44_100, 5000);
        assert_eq!(resample(&x, 24_000).unwrap(), resample(&x, 24_000).unwrap());
    }
}
