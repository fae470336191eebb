use std::path::PathBuf;

use spectral_piano::analysis::{estimate_b, estimate_partial_peaks, hpss_decompose, HpssConfig};
use spectral_piano::losses::CENT_PARTIALS;
use spectral_piano::model::key_frequency;

use crate::{ensure_dir, load_audio, run, write_float_wav, write_text, CommandResult};

#[derive(Debug, Clone)]
pub struct AnalyzeArgs {
    pub wav: PathBuf,
    pub key: u8,
    pub out_dir: PathBuf,
    /// Partials used for the peak table and the pairwise B estimates.
    pub partials: usize,
    pub hpss: HpssConfig,
}

impl AnalyzeArgs {
    pub fn new(wav: impl Into<PathBuf>, key: u8, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            wav: wav.into(),
            key,
            out_dir: out_dir.into(),
            partials: CENT_PARTIALS,
            hpss: HpssConfig::default(),
        }
    }
}

/// Writes `peaks.csv`, `inharmonicity.csv` and the three decomposition
/// components as `harmonic.wav`, `transient.wav` and `noise.wav`.
pub fn cmd_analyze(args: &AnalyzeArgs) -> CommandResult {
    run(|log| {
        let signal = load_audio(&args.wav)?;
        let f0 = key_frequency(args.key);
        let peaks = estimate_partial_peaks(&signal, f0, args.partials)?;
        let estimate = estimate_b(&peaks)?;
        let targets = hpss_decompose(&signal, &args.hpss)?;
        ensure_dir(&args.out_dir)?;

        let mut table = String::from("partial,frequency_hz,magnitude_db\n");
        for p in &peaks {
            table += &format!("{},{},{}\n", p.partial, p.frequency, p.magnitude_db);
        }
        let mut b = String::from("kind,m,j,b\n");
        for ((m, j), v) in estimate.pairs.iter().zip(&estimate.samples) {
            b += &format!("pair,{m},{j},{v:e}\n");
        }
        b += &format!("mean,,,{:e}\n", estimate.mean);

        let dir = &args.out_dir;
        let artifacts = vec![
            write_text(&dir.join("peaks.csv"), &table)?,
            write_text(&dir.join("inharmonicity.csv"), &b)?,
            write_float_wav(&dir.join("harmonic.wav"), &targets.harmonic)?,
            write_float_wav(&dir.join("transient.wav"), &targets.transient)?,
            write_float_wav(&dir.join("noise.wav"), &targets.noise)?,
        ];
        log.line(format!(
            "key {} (F0 {f0:.3} Hz): {} peaks, {} pair estimates, B_init {:.6e}",
            args.key,
            peaks.len(),
            estimate.samples.len(),
            estimate.mean
        ));
        Ok(artifacts)
    })
}
