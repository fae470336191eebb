use std::path::PathBuf;

use spectral_piano::model::VelocityBank;
use spectral_piano::synth::{render_note, RenderOptions};

use crate::{check_velocity, duration_samples, run, write_float_wav, CommandResult, Failure};

#[derive(Debug, Clone)]
pub struct RenderArgs {
    pub model: PathBuf,
    pub key: u8,
    pub velocity: u8,
    pub duration_secs: f64,
    pub out: PathBuf,
    pub no_phantoms: bool,
    pub no_noise: bool,
    pub no_transient: bool,
    pub seed: Option<u64>,
}

impl RenderArgs {
    pub fn new(
        model: impl Into<PathBuf>,
        key: u8,
        velocity: u8,
        duration_secs: f64,
        out: impl Into<PathBuf>,
    ) -> Self {
        Self {
            model: model.into(),
            key,
            velocity,
            duration_secs,
            out: out.into(),
            no_phantoms: false,
            no_noise: false,
            no_transient: false,
            seed: None,
        }
    }

    pub fn options(&self) -> RenderOptions {
        RenderOptions {
            harmonic: true,
            phantoms: !self.no_phantoms,
            transient: !self.no_transient,
            noise: !self.no_noise,
            seed: self.seed,
        }
    }
}

pub(crate) fn load_bank(path: &std::path::Path, key: u8) -> Result<VelocityBank, Failure> {
    let bank = VelocityBank::load(path).map_err(|e| Failure::from(e).context(path.display()))?;
    if bank.key_id != key {
        return Err(Failure::data(format!(
            "unknown key {key}: {} holds key {}",
            path.display(),
            bank.key_id
        )));
    }
    Ok(bank)
}

/// Renders one note to a 32-bit float WAV at the model rate.
pub fn cmd_render(args: &RenderArgs) -> CommandResult {
    run(|log| {
        check_velocity(args.velocity)?;
        let len = duration_samples(args.duration_secs)?;
        let bank = load_bank(&args.model, args.key)?;
        let model = bank.interpolate(args.velocity);
        let audio = render_note(&model, len, &args.options())?;
        let out = write_float_wav(&args.out, &audio)?;
        log.line(format!(
            "key {} velocity {}: {len} samples",
            args.key, args.velocity
        ));
        Ok(vec![out])
    })
}
