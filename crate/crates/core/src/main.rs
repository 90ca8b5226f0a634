use std::fs;
use std::io::{self, BufReader};
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use slcim::harness::{
    self, bench_runtime, emit_report, load_dataset, read_results, write_report, write_results, write_runs,
    write_timings, Axis, ExperimentSpec, Layout, Metric, Opponent, TrainingProfile,
};
use slcim::rl::{save_params, self_play, train_agent, write_learning_curve, ActionMode, TrainSpec};
use slcim::strategies::Scheme;
use slcim::{OpinionModel, TrustModel};

#[derive(Parser)]
#[command(name = "slcim", version, about = "Competitive influence maximization with Subjective Logic opinions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one true-party policy against a false-party strategy.
    Train(TrainArgs),
    /// Evaluate an experiment matrix and write runs.csv / results.csv.
    Eval(EvalArgs),
    /// Evaluate along one sweep axis.
    Sweep(SweepArgs),
    /// Time evaluation episodes per scheme.
    Bench(BenchArgs),
    /// Pivot a results.csv into a table or figure layout.
    Report(ReportArgs),
}

/// Options shared by every command that builds an experiment.
#[derive(Args, Clone)]
struct Common {
    /// Experiment config file (`key = value` with [sections]); flags override it.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Edge-list dataset.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory holding trained policies.
    #[arg(long)]
    policy_dir: Option<PathBuf>,
    /// Fail instead of training when a policy file is missing.
    #[arg(long)]
    no_train: bool,
    /// Rounds per episode.
    #[arg(long)]
    rounds: Option<usize>,
    /// PPO updates per trained policy.
    #[arg(long)]
    updates: Option<usize>,
    /// Rollout episodes per PPO update.
    #[arg(long)]
    episodes_per_update: Option<usize>,
    /// PPO epochs per update.
    #[arg(long)]
    epochs: Option<usize>,
    /// Actor step size.
    #[arg(long)]
    actor_lr: Option<f64>,
    /// Critic step size.
    #[arg(long)]
    critic_lr: Option<f64>,
    /// Community count for C-STORM.
    #[arg(long)]
    communities: Option<usize>,
}

impl Common {
    fn build(&self) -> anyhow::Result<ExperimentSpec> {
        let mut spec = match &self.spec {
            Some(path) => ExperimentSpec::from_config_file(path).with_context(|| format!("reading {}", path.display()))?,
            None => ExperimentSpec::default(),
        };
        if let Some(v) = &self.dataset {
            spec.dataset = v.clone();
        }
        if let Some(v) = self.seed {
            spec.master_seed = v;
        }
        if let Some(v) = &self.policy_dir {
            spec.policy_dir = Some(v.clone());
        }
        if self.no_train {
            spec.auto_train = false;
        }
        if let Some(v) = self.rounds {
            spec.env.rounds = v;
        }
        if let Some(v) = self.updates {
            spec.training.ppo.updates = v;
        }
        if let Some(v) = self.episodes_per_update {
            spec.training.ppo.episodes_per_update = v;
        }
        if let Some(v) = self.epochs {
            spec.training.ppo.epochs = v;
        }
        if let Some(v) = self.actor_lr {
            spec.training.ppo.actor_lr = v;
        }
        if let Some(v) = self.critic_lr {
            spec.training.ppo.critic_lr = v;
        }
        if let Some(v) = self.communities {
            spec.communities = v;
        }
        Ok(spec)
    }
}

#[derive(Args)]
struct MatrixArgs {
    /// Comma-separated schemes: drim-a, drim-na, storm, cstorm.
    #[arg(long, value_delimiter = ',')]
    schemes: Option<Vec<Scheme>>,
    /// Comma-separated opinion models: uom, hom, nom.
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<OpinionModel>>,
    /// Comma-separated false-party strategies: af, bf, sgf, cf, random, drl.
    #[arg(long, value_delimiter = ',')]
    fp: Option<Vec<Opponent>>,
    /// Evaluation runs per cell.
    #[arg(long)]
    runs: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl MatrixArgs {
    fn apply(&self, spec: &mut ExperimentSpec) {
        if let Some(v) = &self.schemes {
            spec.schemes = v.clone();
        }
        if let Some(v) = &self.models {
            spec.models = v.clone();
        }
        if let Some(v) = &self.fp {
            spec.opponents = v.clone();
        }
        if let Some(v) = self.runs {
            spec.runs = v;
        }
        if let Some(v) = &self.out {
            spec.out_dir = v.clone();
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value = "drim-a")]
    scheme: Scheme,
    /// af, bf, sgf, cf, random, or drl (self-play opponent).
    #[arg(long, default_value = "cf")]
    opponent: Opponent,
    #[arg(long, default_value = "uom")]
    model: OpinionModel,
    /// Where to write the policy; defaults to the policy directory's naming.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Learning-curve CSV (update, mean_return, entropy, party).
    #[arg(long)]
    curve: Option<PathBuf>,
    /// Run alternating self-play for both parties instead (writes <out>.tp and <out>.fp).
    #[arg(long)]
    self_play: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    matrix: MatrixArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    matrix: MatrixArgs,
    /// ip, p_nv or prior_a.
    #[arg(long)]
    axis: Axis,
    /// `start:end` (step 1) or `start:end:step`; defaults to the axis grid.
    #[arg(long)]
    range: Option<String>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_delimiter = ',', default_values = ["drim-na", "drim-a", "cstorm", "storm"])]
    schemes: Vec<Scheme>,
    #[arg(long, default_value = "uom")]
    model: OpinionModel,
    #[arg(long, default_value = "cf")]
    fp: Opponent,
    /// Timed episodes per scheme (one extra warm-up episode is discarded).
    #[arg(long, default_value_t = 20)]
    episodes: usize,
    /// CSV output; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// table1, fig2, fig3a, fig3b, fig3c or table2.
    #[arg(long)]
    layout: Layout,
    /// results.csv files to combine.
    #[arg(long, num_args = 1.., required = true)]
    input: Vec<PathBuf>,
    /// Report decided n_true instead of n_true.
    #[arg(long)]
    decided: bool,
    /// CSV output; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_range(text: &str) -> anyhow::Result<Vec<f64>> {
    let parts: Vec<f64> = text
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("bad range {text:?}"))?;
    let (start, end, step) = match parts[..] {
        [s, e] => (s, e, 1.0),
        [s, e, st] => (s, e, st),
        _ => bail!("range must be start:end or start:end:step"),
    };
    if !(step > 0.0) || end < start {
        bail!("empty range {text:?}");
    }
    let count = ((end - start) / step + 1e-9).floor() as usize + 1;
    // round to tame accumulated float error in the printed grid values
    Ok((0..count).map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9).collect())
}

fn write_outputs(spec: &ExperimentSpec, out: &harness::ExperimentOutput) -> anyhow::Result<()> {
    fs::create_dir_all(&spec.out_dir)?;
    write_runs(&out.records, fs::File::create(spec.out_dir.join("runs.csv"))?)?;
    write_results(&out.rows, fs::File::create(spec.out_dir.join("results.csv"))?)?;
    for row in &out.rows {
        let c = row.cell;
        println!(
            "{:<8} {:<4} fp={:<7} {}={:<4} n_true={:>8.1} ± {:<6.1} decided={:>8.1}",
            c.scheme.name(),
            c.model.name(),
            c.opponent.name(),
            c.axis.name(),
            c.value,
            row.mean_n_true,
            row.std_n_true,
            row.mean_decided_true
        );
    }
    println!("wrote {}", spec.out_dir.join("results.csv").display());
    Ok(())
}

fn run_eval(spec: &ExperimentSpec) -> anyhow::Result<()> {
    let graph = load_dataset(&spec.dataset)?;
    let out = harness::evaluate(&graph, spec, &spec.store())?;
    write_outputs(spec, &out)
}

fn train(args: TrainArgs) -> anyhow::Result<()> {
    let spec = args.common.build()?;
    let graph = load_dataset(&spec.dataset)?;
    let env = slcim::EpisodeConfig {
        model: TrustModel::new(args.model),
        ..spec.env.clone()
    };
    let TrainingProfile { ppo, self_play: schedule } = spec.training.clone();
    if args.self_play {
        let out = self_play(&graph, args.scheme, args.scheme, &env, &ppo, schedule, spec.master_seed)?;
        let base = args.out.unwrap_or_else(|| PathBuf::from("selfplay"));
        save_params(&out.tp, base.with_extension("tp.bin"))?;
        save_params(&out.fp, base.with_extension("fp.bin"))?;
        if let Some(path) = args.curve {
            write_learning_curve(&out.curve, fs::File::create(path)?)?;
        }
        return Ok(());
    }
    let store = spec.store();
    let opponent = store.opponent_spec(&graph, args.model, args.opponent, ActionMode::Sample)?;
    let train_spec = TrainSpec {
        communities: spec.communities,
        ..TrainSpec::new(args.scheme, opponent, env, ppo, spec.master_seed)
    };
    let out = train_agent(&graph, &train_spec)?;
    if let Some(last) = out.curve.last() {
        println!(
            "update {}: mean return {:.2}, entropy {:.3}",
            last.update, last.mean_return, last.entropy
        );
    }
    let key = harness::policies::tp_key(args.scheme, args.model, args.opponent);
    match args.out {
        Some(path) => save_params(&out.params, &path)?,
        None => {
            store.insert(&key, out.params.clone())?;
        }
    }
    if let Some(path) = args.curve {
        write_learning_curve(&out.curve, fs::File::create(path)?)?;
    }
    Ok(())
}

fn bench(args: BenchArgs) -> anyhow::Result<()> {
    let spec = args.common.build()?;
    let graph = load_dataset(&spec.dataset)?;
    let timings = bench_runtime(
        &graph,
        &spec.store(),
        &args.schemes,
        args.model,
        args.fp,
        &spec.env,
        args.episodes,
        spec.master_seed,
    )?;
    match args.out {
        Some(path) => write_timings(&timings, fs::File::create(path)?)?,
        None => write_timings(&timings, io::stdout())?,
    }
    Ok(())
}

fn report(args: ReportArgs) -> anyhow::Result<()> {
    let mut rows = Vec::new();
    for path in &args.input {
        let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
        rows.extend(read_results(BufReader::new(file))?);
    }
    let metric = if args.decided { Metric::DecidedTrue } else { Metric::NTrue };
    let report = emit_report(&rows, args.layout, metric)?;
    match args.out {
        Some(path) => write_report(&report, fs::File::create(path)?)?,
        None => write_report(&report, io::stdout())?,
    }
    Ok(())
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var(harness::THREADS_ENV) {
        let n: usize = v
            .parse()
            .with_context(|| format!("{} must be a thread count, got {v:?}", harness::THREADS_ENV))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    init_threads()?;
    match Cli::parse().command {
        Command::Train(args) => train(args),
        Command::Eval(args) => {
            let mut spec = args.common.build()?;
            args.matrix.apply(&mut spec);
            run_eval(&spec)
        }
        Command::Sweep(args) => {
            let mut spec = args.common.build()?;
            args.matrix.apply(&mut spec);
            spec.axis = args.axis;
            spec.grid = match &args.range {
                Some(r) => parse_range(r)?,
                None => args.axis.default_grid(),
            };
            if args.matrix.models.is_none() && args.common.spec.is_none() {
                spec.models = vec![OpinionModel::Uom];
            }
            run_eval(&spec)
        }
        Command::Bench(args) => bench(args),
        Command::Report(args) => report(args),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("1:5").unwrap(), vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(parse_range("0.2:1.0:0.2").unwrap(), vec![0.2, 0.4, 0.6, 0.8, 1.0]);
        assert!(parse_range("5:1").is_err());
        assert!(parse_range("1").is_err());
    }
}
