#![allow(dead_code)]

use std::path::{Path, PathBuf};

use spectral_piano::audio::{dct2, write_wav, AudioBuffer, BitDepth, MODEL_RATE};
use spectral_piano::harmonic::{default_partial_count, DampingCoeffs, PolarizationParams};
use spectral_piano::model::{key_frequency, NoteModel, VelocityBank};
use spectral_piano::noise::{NoiseModel, NOISE_BINS};
use spectral_piano::synth::{render_note, RenderOptions};
use spectral_piano::transient::TransientModel;

pub const B: f64 = 3e-4;

/// A plausible note: decaying partial amplitudes scaled by velocity, light
/// noise and a short transient.
pub fn note(key: u8, velocity: u8, seconds: f64) -> NoteModel {
    let f0 = key_frequency(key);
    let h = default_partial_count(f0, B, MODEL_RATE);
    let gain = velocity as f64 / 127.0;
    let params = PolarizationParams {
        f0,
        inharmonicity: B,
        delta_f: 0.2,
        alpha_v: (1..=h).map(|m| 0.2 * gain / m as f64).collect(),
        alpha_h: (1..=h).map(|m| 0.1 * gain / m as f64).collect(),
    };
    let mut model = NoteModel::new(
        key,
        velocity,
        params,
        DampingCoeffs::new(0.5, 1e-2, 1e-10, 1e-4),
    )
    .unwrap();
    let frames = ((seconds * MODEL_RATE as f64) as usize).div_ceil(2048);
    model.noise = NoiseModel {
        frame_size: 2048,
        filter_magnitudes: vec![vec![0.5; NOISE_BINS]; frames],
        means: vec![0.0; frames],
        amplitudes: (0..frames)
            .map(|i| 2e-3 * gain * (-(i as f64) / 4.0).exp())
            .collect(),
        seed: 11,
        stream: key as u64 * 128 + velocity as u64,
    };
    let burst: Vec<f64> = (0..1300)
        .map(|n| 0.2 * gain * (n as f64 * 1.1).sin() * (-(n as f64) / 80.0).exp())
        .collect();
    model.transient = TransientModel::new(dct2(&burst).unwrap(), 1.0).unwrap();
    model
}

pub fn bank(key: u8, velocities: &[u8], seconds: f64) -> VelocityBank {
    VelocityBank::new(
        key,
        velocities.iter().map(|v| note(key, *v, seconds)).collect(),
    )
    .unwrap()
}

pub fn save_bank(dir: &Path, bank: &VelocityBank) -> PathBuf {
    let path = dir.join(format!("{}.stn.json", bank.key_id));
    bank.save(&path).unwrap();
    path
}

/// Writes `<key>_<velocity>.wav` for each velocity, rendered from `note`.
pub fn write_targets(dir: &Path, key: u8, velocities: &[u8], seconds: f64, noise: bool) {
    let len = (seconds * MODEL_RATE as f64) as usize;
    for v in velocities {
        let options = RenderOptions {
            noise,
            ..RenderOptions::default()
        };
        let audio = render_note(&note(key, *v, seconds), len, &options).unwrap();
        write_wav(
            dir.join(format!("{key}_{v}.wav")),
            &audio,
            BitDepth::Float32,
        )
        .unwrap();
    }
}

pub fn read(path: &Path) -> AudioBuffer {
    spectral_piano::audio::read_wav(path).unwrap().0
}
