use std::path::{Path, PathBuf};

use rayon::prelude::*;
use spectral_piano::analysis::{
    aggregate_b, estimate_b, estimate_partial_peaks, hpss_decompose, HpssConfig,
};
use spectral_piano::audio::AudioBuffer;
use spectral_piano::fitting::{fit_note, initial_model, EpochRecord, NoteFit, NoteFitConfig};
use spectral_piano::losses::CENT_PARTIALS;
use spectral_piano::model::{key_frequency, VelocityBank};

use crate::{check_velocity, ensure_dir, load_audio, run, write_text, CommandResult, Failure};

#[derive(Debug, Clone)]
pub struct FitArgs {
    pub wav_dir: PathBuf,
    pub key: u8,
    pub velocities: Vec<u8>,
    pub out_model: PathBuf,
    /// Stop after the inharmonicity stage.
    pub stage1_only: bool,
    pub config: NoteFitConfig,
    pub hpss: HpssConfig,
}

impl FitArgs {
    pub fn new(
        wav_dir: impl Into<PathBuf>,
        key: u8,
        velocities: Vec<u8>,
        out_model: impl Into<PathBuf>,
    ) -> Self {
        Self {
            wav_dir: wav_dir.into(),
            key,
            velocities,
            out_model: out_model.into(),
            stage1_only: false,
            config: NoteFitConfig::default(),
            hpss: HpssConfig::default(),
        }
    }
}

/// `<key>_<velocity>.wav`
pub fn input_name(key: u8, velocity: u8) -> String {
    format!("{key}_{velocity}.wav")
}

fn history_csv(history: &[EpochRecord]) -> String {
    let mut out =
        String::from("stage,epoch,lr,train_loss,validation_loss,stft_loss,rms_loss,cent_loss\n");
    for r in history {
        out += &format!(
            "{},{},{:e},{:e},{:e},{:e},{:e},{:e}\n",
            r.stage,
            r.epoch,
            r.lr,
            r.train_loss,
            r.validation_loss,
            r.report.stft_loss,
            r.report.rms_loss,
            r.report.cent_loss
        );
    }
    out
}

fn history_path(out_model: &Path, key: u8, velocity: u8) -> PathBuf {
    let dir = out_model.parent().unwrap_or(Path::new("."));
    dir.join(format!("{key}_{velocity}_history.csv"))
}

/// Fits one model per velocity and writes them as a bank, plus one history
/// CSV per velocity next to it.
pub fn cmd_fit(args: &FitArgs) -> CommandResult {
    run(|log| {
        if args.velocities.is_empty() {
            return Err(Failure::usage("no velocities given"));
        }
        for v in &args.velocities {
            check_velocity(*v)?;
        }
        let mut inputs: Vec<(u8, AudioBuffer)> = Vec::new();
        for v in &args.velocities {
            let path = args.wav_dir.join(input_name(args.key, *v));
            if !path.is_file() {
                return Err(Failure::data(format!("missing input {}", path.display())));
            }
            inputs.push((
                *v,
                load_audio(&path).map_err(|f| f.context(path.display()))?,
            ));
        }

        let f0 = key_frequency(args.key);
        let groups = inputs
            .iter()
            .map(|(v, signal)| {
                estimate_partial_peaks(signal, f0, CENT_PARTIALS)
                    .and_then(|peaks| estimate_b(&peaks))
                    .map(|e| e.samples)
                    .map_err(|e| Failure::from(e).context(format!("velocity {v}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let b_init = aggregate_b(&groups)?;
        log.line(format!(
            "key {} (F0 {f0:.3} Hz): B_init {b_init:.6e}",
            args.key
        ));

        let mut config = args.config.clone();
        config.stage1_only = args.stage1_only;
        let fits: Vec<NoteFit> = inputs
            .par_iter()
            .map(|(v, signal)| -> Result<NoteFit, Failure> {
                let (mut init, _) =
                    initial_model(signal, args.key, *v, f0, b_init, &config.tracker)?;
                init.metadata.hpss = args.hpss.clone();
                let targets = hpss_decompose(signal, &args.hpss)?;
                Ok(fit_note(&targets, &init, &config)?)
            })
            .zip(&inputs)
            .map(|(r, (v, _))| r.map_err(|f| f.context(format!("velocity {v}"))))
            .collect::<Result<Vec<_>, _>>()?;

        if let Some(dir) = args
            .out_model
            .parent()
            .filter(|d| !d.as_os_str().is_empty())
        {
            ensure_dir(dir)?;
        }
        let mut artifacts = Vec::new();
        for fit in &fits {
            let m = &fit.model;
            log.line(format!(
                "velocity {}: B {:.6e}, delta_f {:.4} Hz, cents {:.3e}, stage-2 loss {:.4e} -> {:.4e}",
                m.velocity, m.inharmonicity, m.delta_f, fit.cent_loss, fit.stage2.initial_loss, fit.stage2.final_loss
            ));
            artifacts.push(write_text(
                &history_path(&args.out_model, args.key, m.velocity),
                &history_csv(&fit.history),
            )?);
        }
        let bank = VelocityBank::new(args.key, fits.into_iter().map(|f| f.model).collect())?;
        bank.save(&args.out_model)?;
        artifacts.push(args.out_model.clone());
        Ok(artifacts)
    })
}
