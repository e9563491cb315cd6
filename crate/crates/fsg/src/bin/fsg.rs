//! Command-line front end. All pipeline logic lives in the library's `run`
//! module; this binary only parses flags, layers them over an optional
//! config file, and maps errors onto the exit-code contract:
//! 0 success, 1 runtime/data error, 2 usage error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fsg::run::{self, EvalConfig, GenDataConfig, Resolve, TrainConfig};

#[derive(Parser)]
#[command(name = "fsg", version, about = "Fuzzy-depth soft-grasping pipeline")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a labeled synthetic dataset plus a manifest.
    GenData {
        /// Output dataset directory.
        #[arg(long)]
        out: PathBuf,
        /// Flat key=value config file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Number of samples.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Square frame side, px.
        #[arg(long)]
        side: Option<usize>,
        /// Comma-separated opaque,specular,transparent,flat weights.
        #[arg(long)]
        material_mix: Option<String>,
    },
    /// Train a network on a dataset directory.
    Train {
        /// Dataset directory (from gen-data).
        #[arg(long)]
        data: PathBuf,
        /// Output checkpoint path.
        #[arg(long)]
        out: PathBuf,
        /// Optional metrics JSON path.
        #[arg(long)]
        metrics: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Input mode: fsg | rgbd_no_height | depth_only.
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Held-out fraction in [0, 1).
        #[arg(long)]
        eval_fraction: Option<f64>,
    },
    /// Run a checkpoint on one stored sample; write plan JSON and overlay.
    Infer {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Dataset directory holding the sample.
        #[arg(long)]
        data: PathBuf,
        /// Sample id inside the dataset directory.
        #[arg(long)]
        id: String,
        /// Output plan JSON path.
        #[arg(long)]
        out_plan: PathBuf,
        /// Output overlay PNG path.
        #[arg(long)]
        out_overlay: PathBuf,
    },
    /// Benchmark a checkpoint on freshly generated corrupted scenes.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Output report JSON path.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Number of scenes.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Input mode: fsg | rgbd_no_height | depth_only.
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        side: Option<usize>,
        #[arg(long)]
        material_mix: Option<String>,
    },
}

/// Collects the flags that were actually given as key=value overrides.
macro_rules! overrides {
    ($(($key:literal, $opt:expr)),* $(,)?) => {{
        let mut v: Vec<(String, String)> = Vec::new();
        $(if let Some(x) = $opt { v.push(($key.to_string(), x.to_string())); })*
        v
    }};
}

fn dispatch(cmd: Cmd) -> Result<(), (u8, String)> {
    let usage = |e: fsg::error::FsgError| (2u8, e.to_string());
    let runtime = |e: fsg::error::FsgError| (1u8, e.to_string());
    match cmd {
        Cmd::GenData {
            out,
            config,
            n,
            seed,
            side,
            material_mix,
        } => {
            let over = overrides![
                ("n_samples", n),
                ("seed", seed),
                ("side", side),
                ("material_mix", material_mix),
            ];
            let cfg = GenDataConfig::resolve(config.as_deref(), &over).map_err(usage)?;
            run::gen_data(&out, &cfg).map(|_| ()).map_err(runtime)
        }
        Cmd::Train {
            data,
            out,
            metrics,
            config,
            mode,
            epochs,
            batch_size,
            learning_rate,
            seed,
            eval_fraction,
        } => {
            let over = overrides![
                ("mode", mode),
                ("epochs", epochs),
                ("batch_size", batch_size),
                ("learning_rate", learning_rate),
                ("seed", seed),
                ("eval_fraction", eval_fraction),
            ];
            let cfg = TrainConfig::resolve(config.as_deref(), &over).map_err(usage)?;
            run::train(&data, &out, metrics.as_deref(), &cfg)
                .map(|_| ())
                .map_err(runtime)
        }
        Cmd::Infer {
            checkpoint,
            data,
            id,
            out_plan,
            out_overlay,
        } => run::infer(&checkpoint, &data, &id, &out_plan, &out_overlay)
            .map(|_| ())
            .map_err(runtime),
        Cmd::Eval {
            checkpoint,
            out,
            config,
            n,
            seed,
            mode,
            side,
            material_mix,
        } => {
            let over = overrides![
                ("n_scenes", n),
                ("seed", seed),
                ("mode", mode),
                ("side", side),
                ("material_mix", material_mix),
            ];
            let cfg = EvalConfig::resolve(config.as_deref(), &over).map_err(usage)?;
            run::eval(&checkpoint, &out, &cfg).map(|_| ()).map_err(runtime)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
