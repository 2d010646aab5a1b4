//! `lifelong`: build and maintain a lifelong LiDAR map from mapping sessions.
//!
//! Exit codes: 0 success, 1 pipeline failure, 2 invalid input or usage.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "lifelong", version, about = "Lifelong LiDAR map maintenance with per-point ephemerality")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug, Default)]
pub struct Common {
    /// Pipeline configuration (`key = value` lines); defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads; 0 uses every core. Outputs do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Build the base map from a first session.
    Init {
        session: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Session id recorded in the lineage (default: directory name).
        #[arg(long)]
        id: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Align, clean and merge a new session into an existing map.
    Update {
        archive: PathBuf,
        session: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Delta map output (default: `<output>.delta`).
        #[arg(long)]
        delta: Option<PathBuf>,
        #[arg(long)]
        id: Option<String>,
        /// Skip loop detection: 12 reals, row-major 3×4 local-to-map transform for scan 0.
        #[arg(long, allow_hyphen_values = true)]
        init_transform: Option<String>,
        /// Proceed even if the archive was built with a different configuration.
        #[arg(long)]
        force: bool,
        /// Write per-scan alignment diagnostics here.
        #[arg(long)]
        diagnostics: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Keep only points whose global ephemerality is below a threshold.
    ExtractStatic {
        archive: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Threshold in (0, 1); defaults to the configured tau_g.
        #[arg(long)]
        tau_g: Option<f64>,
        /// Write ASCII PLY instead of the archive format.
        #[arg(long)]
        ascii: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Replay or roll back a session's delta map.
    Delta {
        #[command(subcommand)]
        action: DeltaAction,
    },
    /// Per-cell change frequency over one or more delta maps.
    Heatmap {
        #[arg(required = true)]
        deltas: Vec<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
        /// Cell size in meters (default: coverage_cell).
        #[arg(long)]
        cell: Option<f64>,
        /// Minimum |Δε_g| counted as a change (default: heatmap_floor).
        #[arg(long)]
        floor: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Alignment or cleaning metrics.
    Eval {
        #[command(subcommand)]
        mode: EvalMode,
    },
    /// Render a scene into labeled session directories.
    Synth {
        /// Scene spec file, or a built-in scene: `parking-lot`, `alignment`.
        scene: String,
        out: PathBuf,
        /// Overrides the scene's random seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated 1-based session indices (default: all).
        #[arg(long, value_delimiter = ',')]
        sessions: Vec<usize>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Subcommand)]
enum DeltaAction {
    /// Apply a delta to the archive it was computed from.
    Replay {
        archive: PathBuf,
        delta: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        force: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Undo a delta on the archive it produced.
    Rollback {
        archive: PathBuf,
        delta: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum LabelScheme {
    /// Labels written by `synth`: class code in the low 16 bits.
    Synth,
    /// Semantic labels in the low 16 bits; 252 and above are moving.
    SemanticKitti,
}

#[derive(Subcommand)]
enum EvalMode {
    /// AC, RMSE and CD between two clouds.
    Align {
        /// Archive, ASCII PLY, or session directory (points at poses.txt).
        pred: PathBuf,
        /// Archive, ASCII PLY, or session directory (gt_poses.txt when present).
        gt: PathBuf,
        /// Inlier gate in meters (default: sigma_inlier).
        #[arg(long)]
        sigma: Option<f64>,
        /// Print a table instead of a single record.
        #[arg(long)]
        table: bool,
        #[command(flatten)]
        common: Common,
    },
    /// PR, RR and F1 of a cleaned cloud against a labeled session.
    Clean {
        /// Cleaned cloud: archive or ASCII PLY.
        pred: PathBuf,
        /// Labeled session directory; points are placed with its poses.txt.
        gt: PathBuf,
        /// Match radius in meters (default: match_radius).
        #[arg(long)]
        match_radius: Option<f64>,
        #[arg(long, value_enum, default_value_t = LabelScheme::Synth)]
        labels: LabelScheme,
        #[arg(long)]
        table: bool,
        #[command(flatten)]
        common: Common,
    },
}

fn run(cli: Cli) -> commands::Outcome {
    use commands::*;
    match cli.command {
        Command::Init {
            session,
            output,
            id,
            common,
        } => init(&common, &session, &output, id),
        Command::Update {
            archive,
            session,
            output,
            delta,
            id,
            init_transform,
            force,
            diagnostics,
            common,
        } => update(
            &common,
            &UpdateArgs {
                archive,
                session,
                output,
                delta,
                id,
                init_transform,
                force,
                diagnostics,
            },
        ),
        Command::ExtractStatic {
            archive,
            output,
            tau_g,
            ascii,
            common,
        } => extract_static(&common, &archive, &output, tau_g, ascii),
        Command::Delta { action } => match action {
            DeltaAction::Replay {
                archive,
                delta,
                output,
                force,
                common,
            } => delta_replay(&common, &archive, &delta, &output, force),
            DeltaAction::Rollback {
                archive,
                delta,
                output,
                common,
            } => delta_rollback(&common, &archive, &delta, &output),
        },
        Command::Heatmap {
            deltas,
            output,
            cell,
            floor,
            common,
        } => heatmap(&common, &deltas, &output, cell, floor),
        Command::Eval { mode } => match mode {
            EvalMode::Align {
                pred,
                gt,
                sigma,
                table,
                common,
            } => eval_align(&common, &pred, &gt, sigma, table),
            EvalMode::Clean {
                pred,
                gt,
                match_radius,
                labels,
                table,
                common,
            } => eval_clean(&common, &pred, &gt, match_radius, labels, table),
        },
        Command::Synth {
            scene,
            out,
            seed,
            sessions,
            common,
        } => synth(&common, &scene, &out, seed, &sessions),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            for line in &failure.details {
                eprintln!("  {line}");
            }
            ExitCode::from(failure.code)
        }
    }
}
