//! Writes `60_<velocity>.wav` targets rendered from a hand-built note, for
//! trying `spiano fit` without recordings.
//!
//! ```text
//! cargo run --example synthetic_targets -- <out_dir>
//! ```

use std::path::PathBuf;

use spectral_piano::audio::{dct2, write_wav, BitDepth, MODEL_RATE};
use spectral_piano::harmonic::{default_partial_count, DampingCoeffs, PolarizationParams};
use spectral_piano::model::{key_frequency, NoteModel};
use spectral_piano::noise::{NoiseModel, NOISE_BINS};
use spectral_piano::synth::{render_note, RenderOptions};
use spectral_piano::transient::TransientModel;

const KEY: u8 = 60;
const VELOCITIES: [u8; 3] = [40, 80, 110];
const SECONDS: f64 = 3.0;

fn note(velocity: u8, len: usize) -> spectral_piano::Result<NoteModel> {
    let f0 = key_frequency(KEY);
    let h = default_partial_count(f0, 3e-4, MODEL_RATE);
    let gain = velocity as f64 / 127.0;
    let params = PolarizationParams {
        f0,
        inharmonicity: 3e-4,
        delta_f: 0.2,
        alpha_v: (1..=h).map(|m| 0.2 * gain / m as f64).collect(),
        alpha_h: (1..=h).map(|m| 0.1 * gain / m as f64).collect(),
    };
    let mut model = NoteModel::new(
        KEY,
        velocity,
        params,
        DampingCoeffs::new(0.5, 1e-2, 1e-10, 1e-4),
    )?;
    model.damping_h = DampingCoeffs::new(0.2, 5e-3, 1e-10, 5e-5);
    let frames = len.div_ceil(2048);
    model.noise = NoiseModel {
        frame_size: 2048,
        filter_magnitudes: vec![vec![0.5; NOISE_BINS]; frames],
        means: vec![0.0; frames],
        amplitudes: (0..frames)
            .map(|i| 2e-3 * gain * (-(i as f64) / 4.0).exp())
            .collect(),
        seed: 11,
        stream: velocity as u64,
    };
    let burst: Vec<f64> = (0..1300)
        .map(|n| 0.2 * gain * (n as f64 * 1.1).sin() * (-(n as f64) / 80.0).exp())
        .collect();
    model.transient = TransientModel::new(dct2(&burst)?, 1.0)?;
    Ok(model)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| ".".into()));
    std::fs::create_dir_all(&out)?;
    let len = (SECONDS * MODEL_RATE as f64) as usize;
    for v in VELOCITIES {
        let audio = render_note(&note(v, len)?, len, &RenderOptions::default())?;
        let path = out.join(format!("{KEY}_{v}.wav"));
        write_wav(&path, &audio, BitDepth::Float32)?;
        println!("{}", path.display());
    }
    Ok(())
}
