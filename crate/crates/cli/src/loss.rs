use std::path::PathBuf;

use spectral_piano::analysis::estimate_partial_peaks;
use spectral_piano::audio::AudioBuffer;
use spectral_piano::losses::{
    cent_loss, multires_stft_loss, rms_mae_loss, LossReport, CENT_PARTIALS, HARMONIC_WINDOWS,
    NOISE_WINDOWS, TRANSIENT_WINDOWS, TRICHORD_WINDOWS,
};
use spectral_piano::model::key_frequency;

use crate::{load_audio, run, write_text, CommandResult, Failure};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowPreset {
    Harmonic,
    Transient,
    Noise,
    Trichord,
}

impl WindowPreset {
    pub fn windows(self) -> &'static [usize] {
        match self {
            WindowPreset::Harmonic => &HARMONIC_WINDOWS,
            WindowPreset::Transient => &TRANSIENT_WINDOWS,
            WindowPreset::Noise => &NOISE_WINDOWS,
            WindowPreset::Trichord => &TRICHORD_WINDOWS,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LossArgs {
    pub pred: PathBuf,
    pub target: PathBuf,
    pub preset: WindowPreset,
    /// Key whose partials the cent loss compares; without it the cent column is NaN.
    pub key: Option<u8>,
    pub out: PathBuf,
}

fn partial_frequencies(signal: &AudioBuffer, key: u8) -> Result<Vec<f64>, Failure> {
    Ok(
        estimate_partial_peaks(signal, key_frequency(key), CENT_PARTIALS)?
            .iter()
            .map(|p| p.frequency)
            .collect(),
    )
}

/// Compares two WAV files and writes a one-row [`LossReport`] CSV.
pub fn cmd_loss(args: &LossArgs) -> CommandResult {
    run(|log| {
        let pred = load_audio(&args.pred).map_err(|f| f.context(args.pred.display()))?;
        let target = load_audio(&args.target).map_err(|f| f.context(args.target.display()))?;
        let stft = multires_stft_loss(&pred, &target, args.preset.windows())?;
        let cents = match args.key {
            Some(key) => cent_loss(
                &partial_frequencies(&pred, key)?,
                &partial_frequencies(&target, key)?,
                CENT_PARTIALS,
            )?,
            None => f64::NAN,
        };
        let report = LossReport {
            stft_loss: stft.value,
            rms_loss: rms_mae_loss(&pred, &target),
            cent_loss: cents,
            per_resolution: stft.per_resolution,
        };
        log.line(format!(
            "stft {:.6e}, rms {:.6e}, cents {:.6e}",
            report.stft_loss, report.rms_loss, report.cent_loss
        ));
        let csv = format!("{}\n{}\n", report.csv_header(), report.csv_row());
        Ok(vec![write_text(&args.out, &csv)?])
    })
}
