use std::path::PathBuf;
use std::time::Instant;

use spectral_piano::audio::MODEL_RATE;
use spectral_piano::model::NoteModel;
use spectral_piano::synth::{render_note, RenderOptions};

use crate::render::load_bank;
use crate::{duration_samples, run, CommandResult, Failure};

#[derive(Debug, Clone)]
pub struct BenchArgs {
    pub model: PathBuf,
    pub key: u8,
    /// Velocity to render; the middle bank entry when absent.
    pub velocity: Option<u8>,
    pub duration_secs: f64,
}

impl BenchArgs {
    pub fn new(model: impl Into<PathBuf>, key: u8) -> Self {
        Self {
            model: model.into(),
            key,
            velocity: None,
            duration_secs: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchReport {
    pub samples: usize,
    pub seconds: f64,
    pub samples_per_second: f64,
    /// Audio duration over wall-clock render time.
    pub rt_factor: f64,
}

/// Times one full render of `model`.
pub fn bench_render(model: &NoteModel, samples: usize) -> Result<BenchReport, Failure> {
    let start = Instant::now();
    let audio = render_note(model, samples, &RenderOptions::default())?;
    let seconds = start.elapsed().as_secs_f64().max(f64::MIN_POSITIVE);
    std::hint::black_box(audio);
    Ok(BenchReport {
        samples,
        seconds,
        samples_per_second: samples as f64 / seconds,
        rt_factor: samples as f64 / MODEL_RATE as f64 / seconds,
    })
}

/// Reports render throughput and real-time factor.
pub fn cmd_bench(args: &BenchArgs) -> CommandResult {
    run(|log| {
        let len = duration_samples(args.duration_secs)?;
        let bank = load_bank(&args.model, args.key)?;
        let model = match args.velocity {
            Some(v) => bank.interpolate(v),
            None => bank.entries[bank.entries.len() / 2].clone(),
        };
        let r = bench_render(&model, len)?;
        log.line(format!(
            "key {} velocity {}: {} samples in {:.4} s, {:.0} samples/s, RT factor {:.2}",
            args.key, model.velocity, r.samples, r.seconds, r.samples_per_second, r.rt_factor
        ));
        Ok(Vec::new())
    })
}
