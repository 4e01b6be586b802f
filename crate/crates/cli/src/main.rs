mod commands;
mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pcd_core::PcdError;

use config::{CommonFlags, Settings};

#[derive(Parser, Debug)]
#[command(name = "pcd", version, about = "Crack artifact detection for rendered 3D mesh snapshots")]
struct Cli {
    #[command(flatten)]
    flags: CommonFlags,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Crack map of one frame pair; prints CAS.
    Detect {
        reference: PathBuf,
        distorted: PathBuf,
        /// Where to write the 8-bit crack map PNG.
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Crop both frames to the object bounding box first.
        #[arg(long)]
        crop: bool,
    },
    /// Base and crack-weighted scores of a frame sequence pair.
    Score {
        ref_dir: PathBuf,
        dist_dir: PathBuf,
        /// lumapsnr, ssim, gms, or all.
        #[arg(long, default_value = "all")]
        metric: String,
    },
    /// SRCC/PLCC of every metric against the MOS of a dataset manifest.
    Evaluate {
        manifest: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Comma-separated metrics (lumapsnr, ssim, gms, cas) or all.
        #[arg(long, default_value = "all")]
        metric: String,
    },
    /// Crack maps of the four detector variants.
    Ablate {
        reference: PathBuf,
        distorted: PathBuf,
        out_dir: PathBuf,
    },
    /// Times the detector on random frames.
    Bench {
        #[arg(long, default_value_t = 650)]
        width: usize,
        #[arg(long, default_value_t = 550)]
        height: usize,
        #[arg(long, default_value_t = 20)]
        iterations: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Thresholded quality map of a base model (the simple detectors the
    /// crack map is compared against).
    Baseline {
        reference: PathBuf,
        distorted: PathBuf,
        /// ssim, gms, gmsd (GMS deviation map), or lumapsnr.
        #[arg(long)]
        model: String,
        #[arg(long)]
        threshold: f64,
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Also write the raw quality map in QMAP format.
        #[arg(long)]
        qmap: Option<PathBuf>,
    },
    /// Crack-weighted pooling of an externally computed QMAP quality map.
    Pool {
        qmap: PathBuf,
        reference: PathBuf,
        distorted: PathBuf,
    },
}

fn exit_code(err: &PcdError) -> u8 {
    match err {
        PcdError::Io { .. } | PcdError::Image { .. } => 1,
        PcdError::Dimension { .. }
        | PcdError::Parameter(_)
        | PcdError::EmptyObject { .. }
        | PcdError::Format { .. } => 2,
        PcdError::UndefinedCorrelation(_) | PcdError::Fit { .. } => 3,
    }
}

fn run(cli: Cli) -> Result<(), PcdError> {
    let settings = Settings::resolve(&cli.flags)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Detect {
            reference,
            distorted,
            out: map_path,
            crop,
        } => commands::detect(&settings, &reference, &distorted, map_path.as_deref(), crop, &mut out),
        Command::Score {
            ref_dir,
            dist_dir,
            metric,
        } => commands::score(&settings, &ref_dir, &dist_dir, &metric, &mut out),
        Command::Evaluate {
            manifest,
            out_dir,
            metric,
        } => commands::evaluate(&settings, &manifest, &out_dir, &metric, &mut out),
        Command::Ablate {
            reference,
            distorted,
            out_dir,
        } => commands::ablate(&settings, &reference, &distorted, &out_dir, &mut out),
        Command::Bench {
            width,
            height,
            iterations,
            seed,
        } => commands::bench(&settings, width, height, iterations, seed, &mut out),
        Command::Baseline {
            reference,
            distorted,
            model,
            threshold,
            out: map_path,
            qmap,
        } => commands::baseline(
            &reference,
            &distorted,
            &model,
            threshold,
            map_path.as_deref(),
            qmap.as_deref(),
            &mut out,
        ),
        Command::Pool {
            qmap,
            reference,
            distorted,
        } => commands::pool(&settings, &qmap, &reference, &distorted, &mut out),
    }?;
    out.flush().map_err(|e| PcdError::Io {
        path: PathBuf::from("<stdout>"),
        source: e,
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
