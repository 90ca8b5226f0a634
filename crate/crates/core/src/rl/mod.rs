//! PPO actor-critic agents that learn which seeding heuristic to fire.
//!
//! The policy observes the normalized `(edges among free nodes, max free
//! degree)` pair right before its own selection and outputs a distribution
//! over its scheme's action list ([`action_space`]). Training alternates
//! rollout collection against a fixed opponent with clipped PPO updates.

pub mod mlp;
pub mod params_io;
pub mod ppo;

use std::io::Write;
use std::sync::Arc;

use rand::RngCore;
use rayon::prelude::*;

pub use params_io::{load_params, read_params, save_params, write_params};
pub use ppo::{
    loss_and_grad, normalized_advantages, policy_forward, ppo_update, Diagnostics, Gradients, PolicyParams,
    PpoConfig, Sample,
};

use crate::baselines::CommunityFilter;
use crate::error::{Error, Result};
use crate::network::{Graph, ObservableGraph};
use crate::population::Party;
use crate::propagation::{discounted_returns, run_episode, EpisodeConfig, FixedAgent, Observation, SeedAgent};
use crate::seeding::derive_seed;
use crate::strategies::{action_space, select_seed, Scheme, Selection, StrategyKind};

/// Default community count for C-STORM's candidate restriction.
pub const DEFAULT_COMMUNITIES: usize = 8;

/// One learner decision: what it saw, what it did, what it earned.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub t: usize,
    pub state: [f64; 2],
    pub action: usize,
    pub log_prob: f64,
    pub value: f64,
    pub reward: f64,
}

/// The learner's steps of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub party: Party,
    pub steps: Vec<Transition>,
    /// Final `(n_true, n_false)` by projected belief.
    pub final_counts: (usize, usize),
}

impl Trajectory {
    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    pub fn samples(&self, gamma: f64) -> Vec<Sample> {
        let rewards: Vec<f64> = self.steps.iter().map(|s| s.reward).collect();
        let returns = discounted_returns(&rewards, gamma);
        self.steps
            .iter()
            .zip(returns)
            .map(|(s, ret)| Sample {
                state: s.state,
                action: s.action,
                log_prob: s.log_prob,
                ret,
                value: s.value,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionMode {
    /// Draw from the policy distribution (training).
    Sample,
    /// Take the most probable action (evaluation).
    Greedy,
}

/// A scheme's policy together with how it is executed.
#[derive(Debug, Clone)]
pub struct PolicySpec {
    pub scheme: Scheme,
    pub params: Arc<PolicyParams>,
    pub mode: ActionMode,
    /// Community count used when `scheme` is C-STORM.
    pub communities: usize,
}

impl PolicySpec {
    pub fn new(scheme: Scheme, params: Arc<PolicyParams>, mode: ActionMode) -> Self {
        Self {
            scheme,
            params,
            mode,
            communities: DEFAULT_COMMUNITIES,
        }
    }

    pub fn agent(&self) -> Result<PolicyAgent> {
        let mut agent = PolicyAgent::new(self.scheme, self.params.clone(), self.mode)?;
        if self.scheme == Scheme::CStorm {
            agent = agent.with_filter(CommunityFilter::new(self.communities)?);
        }
        Ok(agent)
    }
}

/// Seed agent driven by a trained policy.
pub struct PolicyAgent {
    scheme: Scheme,
    params: Arc<PolicyParams>,
    mode: ActionMode,
    filter: Option<CommunityFilter>,
    record: Option<Vec<Transition>>,
}

impl PolicyAgent {
    pub fn new(scheme: Scheme, params: Arc<PolicyParams>, mode: ActionMode) -> Result<Self> {
        let expected = action_space(scheme).len();
        if params.actions() != expected {
            return Err(Error::ShapeMismatch {
                expected: format!("{expected} actions for {scheme}"),
                found: format!("{} actions", params.actions()),
            });
        }
        Ok(Self {
            scheme,
            params,
            mode,
            filter: None,
            record: None,
        })
    }

    pub fn with_filter(mut self, filter: CommunityFilter) -> Self {
        self.filter = Some(filter);
        self
    }

    /// Keeps every decision for later retrieval with [`Self::take_record`].
    pub fn recording(mut self) -> Self {
        self.record = Some(Vec::new());
        self
    }

    pub fn take_record(&mut self) -> Vec<Transition> {
        self.record.as_mut().map(std::mem::take).unwrap_or_default()
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }
}

impl SeedAgent for PolicyAgent {
    fn label(&self) -> String {
        self.scheme.name().to_string()
    }

    fn begin_episode(&mut self, graph: &ObservableGraph) -> Result<()> {
        if let Some(record) = &mut self.record {
            record.clear();
        }
        match &mut self.filter {
            Some(f) => f.begin_episode(graph),
            None => Ok(()),
        }
    }

    fn select(&mut self, party: Party, obs: &Observation<'_>, rng: &mut dyn RngCore) -> Result<Option<Selection>> {
        let state = obs.features;
        let (action, log_prob, value) = match self.mode {
            ActionMode::Sample => self.params.act(&state, rng)?,
            ActionMode::Greedy => {
                let probs = policy_forward(&self.params, &state)?;
                let a = ppo::argmax(&probs);
                (a, probs[a].ln(), self.params.value(&state))
            }
        };
        let kind = action_space(self.scheme)[action];
        let pool = self.filter.as_ref().and_then(|f| f.pool(obs.view.pop));
        let selection = select_seed(kind, party, &obs.view, pool.as_deref(), rng);
        if let Some(record) = &mut self.record {
            record.push(Transition {
                t: obs.t,
                state,
                action,
                log_prob,
                value,
                reward: 0.0,
            });
        }
        Ok(selection)
    }
}

/// Who sits on the other side of the table.
#[derive(Debug, Clone)]
pub enum AgentSpec {
    Fixed(StrategyKind),
    Policy(PolicySpec),
}

impl AgentSpec {
    pub fn build(&self) -> Result<Box<dyn SeedAgent>> {
        Ok(match self {
            AgentSpec::Fixed(kind) => Box::new(FixedAgent(*kind)),
            AgentSpec::Policy(spec) => Box::new(spec.agent()?),
        })
    }

    /// CLI name: the heuristic's name, or `drl` for a policy.
    pub fn name(&self) -> &'static str {
        match self {
            AgentSpec::Fixed(kind) => kind.name(),
            AgentSpec::Policy(_) => "drl",
        }
    }
}

/// Plays one episode per seed with `learner` sampling on `party`'s side.
/// Episodes run in parallel; the output order follows `episode_seeds`.
pub fn collect_rollouts(
    graph: &Graph,
    env: &EpisodeConfig,
    learner: &PolicySpec,
    party: Party,
    opponent: &AgentSpec,
    episode_seeds: &[u64],
) -> Result<Vec<Trajectory>> {
    episode_seeds
        .par_iter()
        .map(|&seed| {
            let mut agent = learner.agent()?.recording();
            let mut other = opponent.build()?;
            let cfg = env.with_seed(seed);
            let outcome = match party {
                Party::True => run_episode(graph, &cfg, other.as_mut(), &mut agent)?,
                Party::False => run_episode(graph, &cfg, &mut agent, other.as_mut())?,
            };
            let mut steps = agent.take_record();
            let rewards = outcome.rewards(party);
            if rewards.len() != steps.len() {
                return Err(Error::param(
                    "trajectory",
                    format!("{} decisions but {} rewards", steps.len(), rewards.len()),
                ));
            }
            for (step, r) in steps.iter_mut().zip(rewards) {
                step.reward = r;
            }
            Ok(Trajectory {
                party,
                steps,
                final_counts: (outcome.n_true, outcome.n_false),
            })
        })
        .collect()
}

/// Learning-curve entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub update: usize,
    pub party: Party,
    /// Mean undiscounted episode reward of the rollouts feeding this update.
    pub mean_return: f64,
    pub entropy: f64,
}

pub fn write_learning_curve<W: Write>(curve: &[CurvePoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["update", "mean_return", "entropy", "party"])?;
    for p in curve {
        w.write_record([
            p.update.to_string(),
            p.mean_return.to_string(),
            p.entropy.to_string(),
            p.party.name().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Everything needed to train one side.
#[derive(Debug, Clone)]
pub struct TrainSpec {
    pub scheme: Scheme,
    pub party: Party,
    pub opponent: AgentSpec,
    pub env: EpisodeConfig,
    pub ppo: PpoConfig,
    pub rng_seed: u64,
    pub communities: usize,
}

impl TrainSpec {
    pub fn new(scheme: Scheme, opponent: AgentSpec, env: EpisodeConfig, ppo: PpoConfig, rng_seed: u64) -> Self {
        Self {
            scheme,
            party: Party::True,
            opponent,
            env,
            ppo,
            rng_seed,
            communities: DEFAULT_COMMUNITIES,
        }
    }

    pub fn initial_params(&self) -> PolicyParams {
        PolicyParams::init(action_space(self.scheme).len(), self.ppo.hidden, derive_seed(self.rng_seed, &[0]))
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub params: PolicyParams,
    pub curve: Vec<CurvePoint>,
}

/// Trains for `spec.ppo.updates` updates starting from `init` (or a fresh
/// initialization). `update_offset` shifts the curve's update numbers and
/// the episode seeds, so that consecutive calls never replay an episode.
pub fn train_from(
    graph: &Graph,
    spec: &TrainSpec,
    init: Option<PolicyParams>,
    update_offset: usize,
) -> Result<TrainOutput> {
    spec.ppo.validate()?;
    spec.env.validate()?;
    let mut params = init.unwrap_or_else(|| spec.initial_params());
    if params.actions() != action_space(spec.scheme).len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} actions", action_space(spec.scheme).len()),
            found: format!("{} actions", params.actions()),
        });
    }
    let mut curve = Vec::with_capacity(spec.ppo.updates);
    for u in 0..spec.ppo.updates {
        let update = update_offset + u;
        let seeds: Vec<u64> = (0..spec.ppo.episodes_per_update)
            .map(|e| derive_seed(spec.rng_seed, &[1, update as u64, e as u64]))
            .collect();
        let learner = PolicySpec {
            communities: spec.communities,
            ..PolicySpec::new(spec.scheme, Arc::new(params.clone()), ActionMode::Sample)
        };
        let trajectories = collect_rollouts(graph, &spec.env, &learner, spec.party, &spec.opponent, &seeds)?;
        let mean_return =
            trajectories.iter().map(Trajectory::total_reward).sum::<f64>() / trajectories.len() as f64;
        let batch: Vec<Sample> = trajectories.iter().flat_map(|t| t.samples(spec.ppo.gamma)).collect();
        let diag = ppo_update(&mut params, &batch, &spec.ppo)?;
        log::debug!(
            "{} {} update {update}: return {mean_return:.2} entropy {:.3} value loss {:.2} clipped {:.2}",
            spec.scheme,
            spec.party,
            diag.entropy,
            diag.value_loss,
            diag.clip_fraction
        );
        curve.push(CurvePoint {
            update,
            party: spec.party,
            mean_return,
            entropy: diag.entropy,
        });
    }
    Ok(TrainOutput { params, curve })
}

/// Trains a fresh policy for `spec.party` against `spec.opponent`.
pub fn train_agent(graph: &Graph, spec: &TrainSpec) -> Result<TrainOutput> {
    train_from(graph, spec, None, 0)
}

/// Alternating-freeze schedule for policy-vs-policy training.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SelfPlayConfig {
    /// Updates per phase.
    pub phase_updates: usize,
    /// Number of (TP phase, FP phase) alternations.
    pub alternations: usize,
}

impl Default for SelfPlayConfig {
    fn default() -> Self {
        Self {
            phase_updates: 25,
            alternations: 4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SelfPlayOutput {
    pub tp: PolicyParams,
    pub fp: PolicyParams,
    pub curve: Vec<CurvePoint>,
}

/// Trains both parties by alternately freezing one side: the true party
/// learns against the frozen false party for `phase_updates` updates, then
/// the roles swap, `alternations` times. `ppo.updates` is ignored.
pub fn self_play(
    graph: &Graph,
    tp_scheme: Scheme,
    fp_scheme: Scheme,
    env: &EpisodeConfig,
    ppo: &PpoConfig,
    schedule: SelfPlayConfig,
    rng_seed: u64,
) -> Result<SelfPlayOutput> {
    if schedule.phase_updates == 0 || schedule.alternations == 0 {
        return Err(Error::param("self_play", "phases and alternations must be positive"));
    }
    let phase_ppo = PpoConfig {
        updates: schedule.phase_updates,
        ..ppo.clone()
    };
    let mut tp = PolicyParams::init(action_space(tp_scheme).len(), ppo.hidden, derive_seed(rng_seed, &[10]));
    let mut fp = PolicyParams::init(action_space(fp_scheme).len(), ppo.hidden, derive_seed(rng_seed, &[11]));
    let mut curve = Vec::new();
    let mut offset = 0;
    for round in 0..schedule.alternations as u64 {
        for party in [Party::True, Party::False] {
            let (scheme, other_scheme, learner, frozen) = match party {
                Party::True => (tp_scheme, fp_scheme, &mut tp, &fp),
                Party::False => (fp_scheme, tp_scheme, &mut fp, &tp),
            };
            let opponent = AgentSpec::Policy(PolicySpec::new(
                other_scheme,
                Arc::new(frozen.clone()),
                ActionMode::Sample,
            ));
            let spec = TrainSpec {
                party,
                ..TrainSpec::new(scheme, opponent, env.clone(), phase_ppo.clone(), derive_seed(rng_seed, &[12, round]))
            };
            let out = train_from(graph, &spec, Some(learner.clone()), offset)?;
            *learner = out.params;
            curve.extend(out.curve);
            offset += schedule.phase_updates;
        }
    }
    Ok(SelfPlayOutput { tp, fp, curve })
}
