use std::path::PathBuf;

use spectral_piano::audio::{AudioBuffer, MODEL_RATE};
use spectral_piano::model::MODEL_EXTENSION;
use spectral_piano::synth::{render_note, RenderOptions};

use crate::render::load_bank;
use crate::{check_velocity, duration_samples, run, write_float_wav, CommandResult};

#[derive(Debug, Clone)]
pub struct TrichordArgs {
    /// Directory holding one `<key>.stn.json` bank per key.
    pub model_dir: PathBuf,
    pub keys: [u8; 3],
    pub velocities: [u8; 3],
    pub duration_secs: f64,
    pub out: PathBuf,
    pub seed: Option<u64>,
    /// Scale the mix to unit peak instead of clipping it.
    pub normalize: bool,
}

/// Bank file name for `key` inside a model directory.
pub fn bank_name(key: u8) -> String {
    format!("{key}.{MODEL_EXTENSION}")
}

/// Sum of the three independently rendered notes, clipped to [-1, 1] or
/// peak-normalized. No coupling between the notes is modelled.
pub fn cmd_trichord(args: &TrichordArgs) -> CommandResult {
    run(|log| {
        let len = duration_samples(args.duration_secs)?;
        let options = RenderOptions {
            seed: args.seed,
            ..RenderOptions::default()
        };
        let mut mix = vec![0.0; len];
        for (key, velocity) in args.keys.iter().zip(&args.velocities) {
            check_velocity(*velocity)?;
            let bank = load_bank(&args.model_dir.join(bank_name(*key)), *key)?;
            let note = render_note(&bank.interpolate(*velocity), len, &options)?;
            mix.iter_mut()
                .zip(note.samples())
                .for_each(|(m, s)| *m += s);
        }
        let peak = mix.iter().fold(0.0f64, |p, v| p.max(v.abs()));
        if args.normalize && peak > 0.0 {
            mix.iter_mut().for_each(|v| *v /= peak);
        } else {
            mix.iter_mut().for_each(|v| *v = v.clamp(-1.0, 1.0));
        }
        let out = write_float_wav(&args.out, &AudioBuffer::new(mix, MODEL_RATE)?)?;
        log.line(format!(
            "uncoupled sum of keys {:?} at velocities {:?}, peak {peak:.4}",
            args.keys, args.velocities
        ));
        Ok(vec![out])
    })
}
