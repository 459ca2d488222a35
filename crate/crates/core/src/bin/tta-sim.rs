use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tta_bandit_core::environment::PassageRange;
use tta_bandit_core::harness::{run_labeled, run_sweep, write_outputs, ExperimentConfig, PolicyKind, SweepParam, SweepSpec};
use tta_bandit_core::metrics::overall_reward;
use tta_bandit_core::{AdaptRule, Error, TotalCountRule};

/// Multi-source test-time adaptation simulator (UCB and Co-UCB).
#[derive(Parser)]
#[command(name = "tta-sim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Run one experiment per value of a swept parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        param: SweepParam,
        /// Comma-separated values, e.g. `0,0.1,0.3`.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
}

#[derive(Args)]
struct Common {
    /// TOML config file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct Overrides {
    #[arg(long, value_enum)]
    policy: Option<PolicyKind>,
    /// Comma-separated initial skills, one per source model.
    #[arg(long, value_delimiter = ',')]
    initial_skills: Option<Vec<f64>>,
    /// Keep only the first N source models.
    #[arg(long)]
    num_sources: Option<usize>,
    #[arg(long)]
    stream_length: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    learning_gain: Option<f64>,
    #[arg(long)]
    perturb_width: Option<usize>,
    #[arg(long)]
    top2_degradation: Option<f64>,
    #[arg(long)]
    passage_min: Option<usize>,
    #[arg(long)]
    passage_max: Option<usize>,
    #[arg(long)]
    noise_rate: Option<f64>,
    /// Nine comma-separated entries of the row-major 3x3 relabelling matrix (order >, <, =).
    #[arg(long, value_delimiter = ',')]
    transition: Option<Vec<f64>>,
    /// Update only the selection policy; skills stay fixed.
    #[arg(long)]
    policy_only: bool,
    /// Set N to the last batch size instead of accumulating it.
    #[arg(long)]
    last_batch_total: bool,
    /// Treat every preferred span as a correct label.
    #[arg(long)]
    literal_adapt: bool,
    /// Skip the regret column against current skills.
    #[arg(long)]
    no_dynamic_regret: bool,
    #[arg(long)]
    probe_every: Option<usize>,
    #[arg(long)]
    probe_size: Option<usize>,
    #[arg(long)]
    preference_samples: Option<usize>,
}

fn load(common: &Common) -> Result<ExperimentConfig, Error> {
    let mut c = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
                path: path.clone(),
                source,
            })?;
            ExperimentConfig::from_toml_str(&text)?
        }
        None => ExperimentConfig::default(),
    };
    let o = &common.overrides;
    if let Some(v) = o.policy {
        c.policy = v;
    }
    if let Some(v) = &o.initial_skills {
        c.profile.initial_skills = v.clone();
    }
    if let Some(k) = o.num_sources {
        if k == 0 || k > c.profile.initial_skills.len() {
            return Err(Error::Config(format!(
                "--num-sources {k} must be in [1, {}]",
                c.profile.initial_skills.len()
            )));
        }
        c.profile.initial_skills.truncate(k);
    }
    if let Some(v) = o.stream_length {
        c.profile.stream_length = v;
    }
    if let Some(v) = o.batch_size {
        c.profile.batch_size = v;
    }
    if let Some(v) = o.seed {
        c.profile.seed = v;
    }
    if let Some(v) = o.learning_gain {
        c.learning_gain = v;
    }
    if let Some(v) = o.perturb_width {
        c.perturb_width = v;
    }
    if let Some(v) = o.top2_degradation {
        c.top2_degradation = v;
    }
    c.passage = PassageRange {
        min: o.passage_min.unwrap_or(c.passage.min),
        max: o.passage_max.unwrap_or(c.passage.max),
    };
    if let Some(v) = o.noise_rate {
        c.noise.noise_rate = v;
    }
    if let Some(v) = &o.transition {
        if v.len() != 9 {
            return Err(Error::Config(format!("--transition needs 9 entries, got {}", v.len())));
        }
        for (row, chunk) in c.noise.transition.iter_mut().zip(v.chunks(3)) {
            row.copy_from_slice(chunk);
        }
    }
    c.policy_only |= o.policy_only;
    if o.last_batch_total {
        c.total_count_rule = TotalCountRule::LastBatch;
    }
    if o.literal_adapt {
        c.adapt_rule = AdaptRule::Literal;
    }
    if o.no_dynamic_regret {
        c.dynamic_regret = false;
    }
    if let Some(v) = o.probe_every {
        c.probe_every = v;
    }
    if let Some(v) = o.probe_size {
        c.probe_size = v;
    }
    if let Some(v) = o.preference_samples {
        c.preference_samples = v;
    }
    c.validate()?;
    Ok(c)
}

fn execute(command: Command) -> Result<PathBuf, Error> {
    let (results, out) = match command {
        Command::Run { common } => {
            let config = load(&common)?;
            let label = format!("{}-seed{}", config.policy, config.profile.seed);
            (vec![run_labeled(&config, label, None)?], common.out)
        }
        Command::Sweep { common, param, values } => {
            let base = load(&common)?;
            (run_sweep(&base, &SweepSpec::new(param, values))?, common.out)
        }
    };
    write_outputs(&results, &out)?;
    for r in &results {
        println!(
            "{}: best arm {} (skill {:.4}), overall reward {}, static regret {:.2}, {:.2?}",
            r.label,
            r.record.best_arm,
            r.record.best_arm_skill(),
            overall_reward(&r.record),
            r.record.static_regret(),
            r.elapsed
        );
    }
    Ok(out)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // bad flags are configuration errors; exit 2 is reserved for I/O
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli.command) {
        Ok(out) => {
            println!("outputs written to {}", Path::new(&out).display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("tta-sim: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
