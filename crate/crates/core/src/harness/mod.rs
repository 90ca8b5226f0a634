//! Experiment matrices, aggregation, timing and CSV output.
//!
//! An [`ExperimentSpec`] names a set of schemes, opinion models and
//! false-party strategies plus an optional sweep axis. [`run_experiment`]
//! plays `runs` evaluation episodes for every coordinate, each with a seed
//! derived from the master seed and the coordinate tuple, and reduces them
//! to one [`ResultRow`] per coordinate in enumeration order.

pub mod config;
pub mod policies;
pub mod report;

use std::fmt;
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

pub use config::ConfigFile;
pub use policies::{Opponent, PolicyStore, TrainingProfile};
pub use report::{emit_report, read_results, write_report, Layout, Metric, Report};

use crate::error::{Error, Result};
use crate::network::{load_edge_list, EdgeListFormat, Graph};
use crate::opinion::{OpinionModel, TrustModel};
use crate::propagation::{run_episode, EpisodeConfig};
use crate::rl::{ActionMode, PpoConfig};
use crate::seeding::{derive_seed, label_hash};
use crate::strategies::Scheme;

/// Environment variable overriding the worker-thread count.
pub const THREADS_ENV: &str = "SLCIM_THREADS";

pub const IP_GRID: [f64; 5] = [1.0, 2.0, 3.0, 4.0, 5.0];
pub const P_NV_GRID: [f64; 5] = [0.2, 0.4, 0.6, 0.8, 1.0];
pub const PRIOR_GRID: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

/// Parameter varied across sweep points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    None,
    /// True-party propagation waves per round.
    Ip,
    PNv,
    Prior,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::None => "none",
            Axis::Ip => "ip",
            Axis::PNv => "p_nv",
            Axis::Prior => "prior_a",
        }
    }

    pub fn default_grid(self) -> Vec<f64> {
        match self {
            Axis::None => vec![0.0],
            Axis::Ip => IP_GRID.to_vec(),
            Axis::PNv => P_NV_GRID.to_vec(),
            Axis::Prior => PRIOR_GRID.to_vec(),
        }
    }

    /// Applies sweep value `v` to an episode configuration.
    pub fn apply(self, env: &EpisodeConfig, v: f64) -> Result<EpisodeConfig> {
        let mut env = env.clone();
        match self {
            Axis::None => {}
            Axis::Ip => {
                if v < 1.0 || v.fract() != 0.0 {
                    return Err(Error::param("ip", format!("{v} is not a positive integer")));
                }
                env.tp_waves = v as usize;
            }
            Axis::PNv => env.p_nv = v,
            Axis::Prior => {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::param("prior_a", format!("{v} outside [0, 1]")));
                }
                env.population.prior_a = v;
            }
        }
        env.validate()?;
        Ok(env)
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" | "" => Ok(Axis::None),
            "ip" => Ok(Axis::Ip),
            "p_nv" | "pnv" | "observability" => Ok(Axis::PNv),
            "prior" | "prior_a" => Ok(Axis::Prior),
            other => Err(Error::param("axis", format!("unknown sweep axis {other:?}"))),
        }
    }
}

/// One evaluation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub schemes: Vec<Scheme>,
    pub models: Vec<OpinionModel>,
    pub opponents: Vec<Opponent>,
    pub runs: usize,
    pub axis: Axis,
    pub grid: Vec<f64>,
    pub dataset: PathBuf,
    pub out_dir: PathBuf,
    pub policy_dir: Option<PathBuf>,
    pub auto_train: bool,
    pub master_seed: u64,
    pub env: EpisodeConfig,
    pub training: TrainingProfile,
    pub communities: usize,
    pub eval_mode: ActionMode,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            schemes: Scheme::ALL.to_vec(),
            models: OpinionModel::ALL.to_vec(),
            opponents: Opponent::ALL.to_vec(),
            runs: 20,
            axis: Axis::None,
            grid: Axis::None.default_grid(),
            dataset: PathBuf::from("data/urv_standin.edges"),
            out_dir: PathBuf::from("results"),
            policy_dir: Some(PathBuf::from("policies")),
            auto_train: true,
            master_seed: 2024,
            env: EpisodeConfig::default(),
            training: TrainingProfile::default(),
            communities: crate::rl::DEFAULT_COMMUNITIES,
            eval_mode: ActionMode::Greedy,
        }
    }
}

const KNOWN_KEYS: &[(&str, &str)] = &[
    ("experiment", "schemes"),
    ("experiment", "models"),
    ("experiment", "fp"),
    ("experiment", "runs"),
    ("experiment", "master_seed"),
    ("experiment", "rounds"),
    ("experiment", "communities"),
    ("experiment", "eval_mode"),
    ("sweep", "axis"),
    ("sweep", "values"),
    ("paths", "dataset"),
    ("paths", "out"),
    ("paths", "policies"),
    ("training", "auto_train"),
    ("training", "updates"),
    ("training", "episodes_per_update"),
    ("training", "epochs"),
    ("training", "hidden"),
    ("training", "actor_lr"),
    ("training", "critic_lr"),
    ("training", "gamma"),
    ("training", "clip_epsilon"),
    ("training", "entropy_coef"),
    ("training", "phase_updates"),
    ("training", "alternations"),
];

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::param("runs", "need at least one run"));
        }
        if self.grid.is_empty() {
            return Err(Error::param("grid", "sweep grid is empty"));
        }
        if self.schemes.is_empty() || self.models.is_empty() || self.opponents.is_empty() {
            return Err(Error::param("spec", "schemes, models and fp lists must be nonempty"));
        }
        for &v in &self.grid {
            self.axis.apply(&self.env, v)?;
        }
        self.training.ppo.validate()
    }

    /// Overlays the values present in `cfg` onto `self`.
    pub fn apply_config(&mut self, cfg: &ConfigFile) -> Result<()> {
        cfg.check_known(KNOWN_KEYS)?;
        if let Some(v) = cfg.list("experiment", "schemes")? {
            self.schemes = v;
        }
        if let Some(v) = cfg.list("experiment", "models")? {
            self.models = v;
        }
        if let Some(v) = cfg.list("experiment", "fp")? {
            self.opponents = v;
        }
        if let Some(v) = cfg.value("experiment", "runs")? {
            self.runs = v;
        }
        if let Some(v) = cfg.value("experiment", "master_seed")? {
            self.master_seed = v;
        }
        if let Some(v) = cfg.value("experiment", "rounds")? {
            self.env.rounds = v;
        }
        if let Some(v) = cfg.value("experiment", "communities")? {
            self.communities = v;
        }
        if let Some(v) = cfg.value::<String>("experiment", "eval_mode")? {
            self.eval_mode = parse_mode(&v)?;
        }
        if let Some(axis) = cfg.value::<Axis>("sweep", "axis")? {
            self.axis = axis;
            self.grid = axis.default_grid();
        }
        if let Some(v) = cfg.list("sweep", "values")? {
            self.grid = v;
        }
        if let Some(v) = cfg.value::<String>("paths", "dataset")? {
            self.dataset = v.into();
        }
        if let Some(v) = cfg.value::<String>("paths", "out")? {
            self.out_dir = v.into();
        }
        if let Some(v) = cfg.value::<String>("paths", "policies")? {
            self.policy_dir = (!v.is_empty()).then(|| v.into());
        }
        if let Some(v) = cfg.value("training", "auto_train")? {
            self.auto_train = v;
        }
        let ppo = &mut self.training.ppo;
        macro_rules! overlay {
            ($($key:ident),*) => {
                $(if let Some(v) = cfg.value("training", stringify!($key))? {
                    ppo.$key = v;
                })*
            };
        }
        overlay!(updates, episodes_per_update, epochs, hidden, actor_lr, critic_lr, gamma, clip_epsilon, entropy_coef);
        if let Some(v) = cfg.value("training", "phase_updates")? {
            self.training.self_play.phase_updates = v;
        }
        if let Some(v) = cfg.value("training", "alternations")? {
            self.training.self_play.alternations = v;
        }
        Ok(())
    }

    pub fn from_config_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut spec = Self::default();
        spec.apply_config(&ConfigFile::parse(&text)?)?;
        Ok(spec)
    }

    /// Every evaluation coordinate in deterministic order.
    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for &scheme in &self.schemes {
            for &model in &self.models {
                for &opponent in &self.opponents {
                    for &value in &self.grid {
                        cells.push(Cell {
                            scheme,
                            model,
                            opponent,
                            axis: self.axis,
                            value,
                        });
                    }
                }
            }
        }
        cells
    }

    pub fn store(&self) -> PolicyStore {
        PolicyStore::new(
            self.policy_dir.clone(),
            self.auto_train,
            self.training.clone(),
            self.env.clone(),
            self.master_seed,
            self.communities,
        )
    }
}

pub fn parse_mode(s: &str) -> Result<ActionMode> {
    match s.trim().to_ascii_lowercase().as_str() {
        "greedy" => Ok(ActionMode::Greedy),
        "sample" => Ok(ActionMode::Sample),
        other => Err(Error::param("eval_mode", format!("{other:?} is neither greedy nor sample"))),
    }
}

/// Full coordinate tuple of a result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub scheme: Scheme,
    pub model: OpinionModel,
    pub opponent: Opponent,
    pub axis: Axis,
    pub value: f64,
}

impl Cell {
    /// Seed of evaluation run `run`.
    pub fn run_seed(&self, master: u64, run: usize) -> u64 {
        derive_seed(
            master,
            &[
                label_hash(self.scheme.name()),
                label_hash(self.model.name()),
                label_hash(self.opponent.name()),
                label_hash(self.axis.name()),
                self.value.to_bits(),
                run as u64,
            ],
        )
    }

    pub fn env(&self, base: &EpisodeConfig) -> Result<EpisodeConfig> {
        let env = EpisodeConfig {
            model: TrustModel::new(self.model),
            ..base.clone()
        };
        self.axis.apply(&env, self.value)
    }
}

/// Outcome of one evaluation episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunRecord {
    pub cell: Cell,
    pub run: usize,
    pub seed: u64,
    pub n_true: usize,
    pub n_false: usize,
    pub decided_true: usize,
    pub decided_false: usize,
    pub seconds: f64,
}

/// Aggregate of one coordinate over its runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResultRow {
    pub cell: Cell,
    pub runs: usize,
    pub mean_n_true: f64,
    pub std_n_true: f64,
    pub mean_n_false: f64,
    pub mean_decided_true: f64,
    pub std_decided_true: f64,
    pub mean_seconds: f64,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Reduces consecutive records of the same cell into result rows.
pub fn aggregate(records: &[RunRecord]) -> Vec<ResultRow> {
    let mut rows: Vec<ResultRow> = Vec::new();
    let mut start = 0;
    while start < records.len() {
        let cell = records[start].cell;
        let end = start + records[start..].iter().take_while(|r| r.cell == cell).count();
        let group = &records[start..end];
        let col = |f: fn(&RunRecord) -> f64| group.iter().map(f).collect::<Vec<_>>();
        let (mean_n_true, std_n_true) = mean_std(&col(|r| r.n_true as f64));
        let (mean_n_false, _) = mean_std(&col(|r| r.n_false as f64));
        let (mean_decided_true, std_decided_true) = mean_std(&col(|r| r.decided_true as f64));
        let (mean_seconds, _) = mean_std(&col(|r| r.seconds));
        rows.push(ResultRow {
            cell,
            runs: group.len(),
            mean_n_true,
            std_n_true,
            mean_n_false,
            mean_decided_true,
            std_decided_true,
            mean_seconds,
        });
        start = end;
    }
    rows
}

pub fn load_dataset(path: &Path) -> Result<Graph> {
    let file = fs::File::open(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("dataset {}: {e}", path.display())))
    })?;
    let format = if path.extension().is_some_and(|e| e == "mtx") {
        EdgeListFormat::MatrixMarket
    } else {
        EdgeListFormat::default()
    };
    load_edge_list(BufReader::new(file), format)
}

/// Everything an experiment produced.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub records: Vec<RunRecord>,
    pub rows: Vec<ResultRow>,
}

/// Plays every (cell, run) episode and aggregates. Policies are fetched
/// from (or trained into) `store` first.
pub fn evaluate(graph: &Graph, spec: &ExperimentSpec, store: &PolicyStore) -> Result<ExperimentOutput> {
    spec.validate()?;
    let cells = spec.cells();
    let needs: Vec<_> = cells.iter().map(|c| (c.scheme, c.model, c.opponent)).collect();
    store.prepare(graph, &needs)?;

    let jobs: Vec<(Cell, usize)> = cells
        .iter()
        .flat_map(|&c| (0..spec.runs).map(move |r| (c, r)))
        .collect();
    let records = jobs
        .par_iter()
        .map(|&(cell, run)| {
            let seed = cell.run_seed(spec.master_seed, run);
            let env = cell.env(&spec.env)?.with_seed(seed);
            let mut tp = store.tp_agent(graph, cell.scheme, cell.model, cell.opponent, spec.eval_mode)?;
            let mut fp = store.fp_agent(graph, cell.model, cell.opponent, spec.eval_mode)?;
            let start = Instant::now();
            let out = run_episode(graph, &env, fp.as_mut(), &mut tp)?;
            let seconds = start.elapsed().as_secs_f64();
            Ok(RunRecord {
                cell,
                run,
                seed,
                n_true: out.n_true,
                n_false: out.n_false,
                decided_true: out.decided_true,
                decided_false: out.decided_false,
                seconds,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = aggregate(&records);
    Ok(ExperimentOutput { records, rows })
}

/// Loads the dataset, evaluates, and writes `runs.csv` and `results.csv`
/// into the output directory.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    let graph = load_dataset(&spec.dataset)?;
    let store = spec.store();
    let out = evaluate(&graph, spec, &store)?;
    fs::create_dir_all(&spec.out_dir)?;
    write_runs(&out.records, fs::File::create(spec.out_dir.join("runs.csv"))?)?;
    write_results(&out.rows, fs::File::create(spec.out_dir.join("results.csv"))?)?;
    Ok(out)
}

const COORD_HEADER: [&str; 5] = ["scheme", "model", "fp", "axis", "value"];

fn coord_fields(c: &Cell) -> [String; 5] {
    [
        c.scheme.name().to_string(),
        c.model.name().to_string(),
        c.opponent.name().to_string(),
        c.axis.name().to_string(),
        c.value.to_string(),
    ]
}

/// Raw per-run CSV. `seconds` is the only timing column.
pub fn write_runs<W: Write>(records: &[RunRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = COORD_HEADER.to_vec();
    header.extend(["run", "seed", "n_true", "n_false", "decided_true", "decided_false", "seconds"]);
    w.write_record(&header)?;
    for r in records {
        let mut rec = coord_fields(&r.cell).to_vec();
        rec.extend([
            r.run.to_string(),
            r.seed.to_string(),
            r.n_true.to_string(),
            r.n_false.to_string(),
            r.decided_true.to_string(),
            r.decided_false.to_string(),
            r.seconds.to_string(),
        ]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Aggregated CSV. `mean_seconds` is the only timing column.
pub fn write_results<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = COORD_HEADER.to_vec();
    header.extend([
        "runs",
        "mean_n_true",
        "std_n_true",
        "mean_n_false",
        "mean_decided_true",
        "std_decided_true",
        "mean_seconds",
    ]);
    w.write_record(&header)?;
    for r in rows {
        let mut rec = coord_fields(&r.cell).to_vec();
        rec.extend([
            r.runs.to_string(),
            r.mean_n_true.to_string(),
            r.std_n_true.to_string(),
            r.mean_n_false.to_string(),
            r.mean_decided_true.to_string(),
            r.std_decided_true.to_string(),
            r.mean_seconds.to_string(),
        ]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Mean wall-clock seconds per episode for one scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timing {
    pub scheme: Scheme,
    pub episodes: usize,
    pub mean_seconds: f64,
    pub std_seconds: f64,
}

/// Times `episodes` sequential evaluation episodes per scheme against
/// `opponent` under `model`, after one untimed warm-up episode. Schemes are
/// interleaved episode by episode so that drift in machine load affects
/// them alike.
pub fn bench_runtime(
    graph: &Graph,
    store: &PolicyStore,
    schemes: &[Scheme],
    model: OpinionModel,
    opponent: Opponent,
    base: &EpisodeConfig,
    episodes: usize,
    master_seed: u64,
) -> Result<Vec<Timing>> {
    if episodes == 0 {
        return Err(Error::param("episodes", "timing needs at least one episode"));
    }
    let needs: Vec<_> = schemes.iter().map(|&s| (s, model, opponent)).collect();
    store.prepare(graph, &needs)?;
    let env = EpisodeConfig {
        model: TrustModel::new(model),
        ..base.clone()
    };
    let mut samples = vec![Vec::with_capacity(episodes); schemes.len()];
    for e in 0..=episodes {
        let cfg = env.with_seed(derive_seed(master_seed, &[label_hash("bench"), e as u64]));
        for (i, &scheme) in schemes.iter().enumerate() {
            let mut tp = store.tp_agent(graph, scheme, model, opponent, ActionMode::Greedy)?;
            let mut fp = store.fp_agent(graph, model, opponent, ActionMode::Greedy)?;
            let start = Instant::now();
            run_episode(graph, &cfg, fp.as_mut(), &mut tp)?;
            let seconds = start.elapsed().as_secs_f64();
            if e > 0 {
                samples[i].push(seconds);
            }
        }
    }
    Ok(schemes
        .iter()
        .zip(samples)
        .map(|(&scheme, s)| {
            let (mean_seconds, std_seconds) = mean_std(&s);
            Timing {
                scheme,
                episodes,
                mean_seconds,
                std_seconds,
            }
        })
        .collect())
}

pub fn write_timings<W: Write>(timings: &[Timing], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["scheme", "episodes", "mean_seconds", "std_seconds"])?;
    for t in timings {
        w.write_record([
            t.scheme.name().to_string(),
            t.episodes.to_string(),
            t.mean_seconds.to_string(),
            t.std_seconds.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Default PPO settings reduced for quick smoke runs.
pub fn quick_ppo() -> PpoConfig {
    PpoConfig {
        updates: 20,
        episodes_per_update: 4,
        epochs: 10,
        ..Default::default()
    }
}
