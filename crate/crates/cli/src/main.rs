use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use spectral_piano_cli::{
    cmd_analyze, cmd_bench, cmd_fit, cmd_loss, cmd_render, cmd_trichord, AnalyzeArgs, BenchArgs,
    CommandResult, FitArgs, LossArgs, RenderArgs, TrichordArgs, WindowPreset, EXIT_USAGE,
    THREADS_ENV,
};

#[derive(Parser)]
#[command(
    name = "spiano",
    version,
    about = "Fit and render sines + transient + noise piano models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Peak table, inharmonicity estimates and component WAVs for one note.
    Analyze {
        wav: PathBuf,
        #[arg(long)]
        key: u8,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Fit a velocity bank from `<key>_<velocity>.wav` files.
    Fit {
        wav_dir: PathBuf,
        #[arg(long)]
        key: u8,
        #[arg(long, value_delimiter = ',', required = true)]
        velocities: Vec<u8>,
        #[arg(long, short)]
        out: PathBuf,
        /// Last stage to run: 1 fits inharmonicity only, 2 fits everything.
        #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(1..=2))]
        stage: u8,
        /// Epoch cap for the amplitude and damping stage.
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Render one note to a 32-bit float WAV.
    Render {
        model: PathBuf,
        #[arg(long)]
        key: u8,
        #[arg(long)]
        velocity: u8,
        #[arg(long, default_value_t = 4.0)]
        duration: f64,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long)]
        no_phantoms: bool,
        #[arg(long)]
        no_noise: bool,
        #[arg(long)]
        no_transient: bool,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Loss terms between a prediction and a target WAV, as CSV.
    Loss {
        pred: PathBuf,
        target: PathBuf,
        #[arg(long, value_enum, default_value_t = Preset::Harmonic)]
        preset: Preset,
        /// Key whose first partials feed the cent loss.
        #[arg(long)]
        key: Option<u8>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Uncoupled sum of three rendered notes.
    Trichord {
        /// Directory of `<key>.stn.json` banks.
        model_dir: PathBuf,
        #[arg(long, num_args = 3, required = true)]
        keys: Vec<u8>,
        #[arg(long, num_args = 3, required = true)]
        velocities: Vec<u8>,
        #[arg(long, default_value_t = 4.0)]
        duration: f64,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Scale to unit peak instead of clipping.
        #[arg(long)]
        normalize: bool,
    },
    /// Time a render and report the real-time factor.
    Bench {
        model: PathBuf,
        #[arg(long)]
        key: u8,
        #[arg(long)]
        velocity: Option<u8>,
        #[arg(long, default_value_t = 10.0)]
        duration: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Harmonic,
    Transient,
    Noise,
    Trichord,
}

impl From<Preset> for WindowPreset {
    fn from(p: Preset) -> Self {
        match p {
            Preset::Harmonic => WindowPreset::Harmonic,
            Preset::Transient => WindowPreset::Transient,
            Preset::Noise => WindowPreset::Noise,
            Preset::Trichord => WindowPreset::Trichord,
        }
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = value
        .parse()
        .map_err(|_| format!("{THREADS_ENV}={value} is not a thread count"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| e.to_string())
}

fn execute(command: Command) -> CommandResult {
    match command {
        Command::Analyze { wav, key, out } => cmd_analyze(&AnalyzeArgs::new(wav, key, out)),
        Command::Fit {
            wav_dir,
            key,
            velocities,
            out,
            stage,
            epochs,
        } => {
            let mut args = FitArgs::new(wav_dir, key, velocities, out);
            args.stage1_only = stage == 1;
            if let Some(n) = epochs {
                args.config.stage2.max_epochs = n;
            }
            cmd_fit(&args)
        }
        Command::Render {
            model,
            key,
            velocity,
            duration,
            out,
            no_phantoms,
            no_noise,
            no_transient,
            seed,
        } => {
            let mut args = RenderArgs::new(model, key, velocity, duration, out);
            args.no_phantoms = no_phantoms;
            args.no_noise = no_noise;
            args.no_transient = no_transient;
            args.seed = seed;
            cmd_render(&args)
        }
        Command::Loss {
            pred,
            target,
            preset,
            key,
            out,
        } => cmd_loss(&LossArgs {
            pred,
            target,
            preset: preset.into(),
            key,
            out,
        }),
        Command::Trichord {
            model_dir,
            keys,
            velocities,
            duration,
            out,
            seed,
            normalize,
        } => cmd_trichord(&TrichordArgs {
            model_dir,
            keys: [keys[0], keys[1], keys[2]],
            velocities: [velocities[0], velocities[1], velocities[2]],
            duration_secs: duration,
            out,
            seed,
            normalize,
        }),
        Command::Bench {
            model,
            key,
            velocity,
            duration,
        } => cmd_bench(&BenchArgs {
            model,
            key,
            velocity,
            duration_secs: duration,
        }),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { 0 });
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_USAGE as u8);
    }
    let result = execute(cli.command);
    if result.is_success() {
        print!("{}", result.log);
        for path in &result.artifacts {
            println!("wrote {}", path.display());
        }
    } else {
        eprint!("{}", result.log);
    }
    ExitCode::from(result.exit_code as u8)
}
