use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "qsf", version, about = "Robust single-qubit flip synthesis: STA, QSL, PPO and GRAPE")]
pub struct Cli {
    /// Seed for every random stream of the run.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Directory receiving all artifacts and the run manifest.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,

    /// Worker threads (falls back to QSF_THREADS, then the core count).
    #[arg(long, global = true, env = "QSF_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Inverse-engineered pulses.
    #[command(subcommand)]
    Sta(StaCommand),
    /// Series quantum speed limit.
    Qsl(QslArgs),
    /// Simulate a pulse file and write the population trajectory.
    Sim(SimArgs),
    /// Robustness scan of a pulse file over a grid of systematic errors.
    Scan(ScanArgs),
    /// Reinforcement-learning pulse discovery.
    #[command(subcommand)]
    Drl(DrlCommand),
    /// Gradient ascent pulse engineering baseline.
    Grape(GrapeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct FieldArgs {
    /// Rabi frequency in MHz (Omega = 2 pi * value * 1e6 rad/s).
    #[arg(long, default_value_t = 20.0)]
    pub omega_mhz: f64,

    /// Detuning bound in units of Omega.
    #[arg(long, default_value_t = 1.5)]
    pub delta_max: f64,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub field: FieldArgs,

    /// Trajectory samples used for synthesis.
    #[arg(long, default_value_t = 2001)]
    pub samples: usize,

    /// Piecewise-constant steps of the written pulse.
    #[arg(long, default_value_t = 2000)]
    pub steps: usize,
}

#[derive(Debug, Subcommand)]
pub enum StaCommand {
    /// Polynomial-trigonometric ansatz with parameter a.
    Ansatz {
        #[arg(long)]
        a: f64,
        #[command(flatten)]
        synth: SynthArgs,
    },
    /// Global-phase series with coefficients alpha_1..alpha_n.
    Series {
        /// Comma-separated coefficients; empty for eta = 2 theta.
        #[arg(long, default_value = "", allow_hyphen_values = true)]
        alphas: String,
        #[command(flatten)]
        synth: SynthArgs,
    },
    /// Minimize the first-order error integral over a or alpha_1.
    Optimize {
        #[arg(long, value_enum)]
        route: RouteArg,
        /// Error channel to cancel: delta (detuning) or omega (Rabi).
        #[arg(long)]
        target: String,
        #[command(flatten)]
        synth: SynthArgs,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RouteArg {
    Ansatz,
    Series,
}

#[derive(Debug, Args)]
pub struct QslArgs {
    /// Minimize over this many coefficients (1..=10).
    #[arg(long, conflicts_with = "alphas")]
    pub order: Option<usize>,

    /// Evaluate the bound for fixed comma-separated coefficients.
    #[arg(long, allow_hyphen_values = true)]
    pub alphas: Option<String>,

    #[arg(long, default_value_t = 20.0)]
    pub omega_mhz: f64,
}

#[derive(Debug, Args)]
pub struct ErrorArgs {
    /// Detuning error relative to the pulse's delta_max.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub delta_err: f64,

    /// Relative Rabi-frequency error.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub omega_err: f64,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    #[arg(long)]
    pub pulse: PathBuf,
    #[command(flatten)]
    pub errors: ErrorArgs,
    #[arg(long, default_value = "sim_trajectory.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[arg(long)]
    pub pulse: PathBuf,

    /// min:max:count of delta_delta / delta_max, or a single value.
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    pub delta_grid: String,

    /// min:max:count of delta_omega, or a single value.
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    pub omega_grid: String,

    #[arg(long, default_value = "scan.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum ErrorMode {
    None,
    SingleDelta,
    SingleOmega,
    Hybrid,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum ScheduleArg {
    Trivial,
    Pretrain,
    Finetune,
}

#[derive(Debug, Clone, Args)]
pub struct EnvArgs {
    /// Environment config JSON; replaces the flags below when given.
    #[arg(long)]
    pub env: Option<PathBuf>,

    #[command(flatten)]
    pub field: FieldArgs,

    #[arg(long, default_value_t = 20)]
    pub n_steps: usize,

    /// Pulse duration in ns.
    #[arg(long, default_value_t = 60.6)]
    pub time_ns: f64,

    #[arg(long, value_enum, default_value_t = ErrorMode::None)]
    pub errors: ErrorMode,

    /// Half-width of the uniform error range.
    #[arg(long, default_value_t = 0.2)]
    pub error_range: f64,

    /// Reward schedule; defaults to the phase's own.
    #[arg(long, value_enum)]
    pub schedule: Option<ScheduleArg>,

    /// Population threshold of the fine-tune reward.
    #[arg(long, default_value_t = 0.997)]
    pub threshold: f64,

    /// Extra reward at the first and last step during fine-tuning.
    #[arg(long)]
    pub boundary_bonus: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct PpoArgs {
    /// PPO config JSON; flags below override its fields.
    #[arg(long)]
    pub ppo: Option<PathBuf>,

    #[arg(long)]
    pub episodes: Option<usize>,

    #[arg(long)]
    pub learning_rate: Option<f64>,

    /// Disable the moving-average plateau stop.
    #[arg(long)]
    pub no_plateau: bool,
}

#[derive(Debug, Subcommand)]
pub enum DrlCommand {
    /// Train from scratch (linear-sweep reward unless --schedule says otherwise).
    Pretrain {
        #[command(flatten)]
        env: EnvArgs,
        #[command(flatten)]
        ppo: PpoArgs,
    },
    /// Continue from a checkpoint with the sparse terminal reward.
    Finetune {
        #[command(flatten)]
        env: EnvArgs,
        #[command(flatten)]
        ppo: PpoArgs,
        #[arg(long)]
        checkpoint_in: Option<PathBuf>,
        /// Start from a fresh network when no checkpoint is given.
        #[arg(long)]
        allow_fresh: bool,
    },
    /// Extract and score the deterministic pulse of a checkpoint.
    Evaluate {
        #[command(flatten)]
        env: EnvArgs,
        #[arg(long)]
        checkpoint_in: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct GrapeArgs {
    /// GRAPE config JSON; replaces the flags below when given.
    #[arg(long)]
    pub config: Option<PathBuf>,

    #[command(flatten)]
    pub field: GrapeFieldArgs,

    #[arg(long, default_value_t = 20)]
    pub m_steps: usize,

    #[arg(long, default_value_t = 55.0)]
    pub time_ns: f64,

    /// linear:<|Delta|max / Omega>, constant:<Delta / Omega> or custom:<pulse.json>.
    #[arg(long, default_value = "linear:2.5", allow_hyphen_values = true)]
    pub init: String,

    /// Step size for amplitudes in units of Omega.
    #[arg(long, default_value_t = 1.0)]
    pub learning_rate: f64,

    #[arg(long, default_value_t = 5000)]
    pub max_iterations: usize,

    #[arg(long, default_value_t = 0.999)]
    pub target: f64,

    #[arg(long)]
    pub no_line_search: bool,
}

#[derive(Debug, Clone, Args)]
pub struct GrapeFieldArgs {
    #[arg(long, default_value_t = 20.0)]
    pub omega_mhz: f64,

    /// Amplitude clip in units of Omega.
    #[arg(long, default_value_t = 10.0)]
    pub delta_max: f64,
}
