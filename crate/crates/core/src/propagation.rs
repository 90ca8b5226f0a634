//! Cascade engine and round orchestration.
//!
//! An episode is `k` rounds. In each round the false party picks a seed and
//! spreads `fp_waves` BFS waves, then the true party does the same with
//! `tp_waves` waves. Steps are numbered `t = 1..=2k`; odd steps belong to
//! the false party.

use std::io::Write;
use std::time::{Duration, Instant};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::network::{mask_network, Graph, ObservableGraph};
use crate::opinion::TrustModel;
use crate::population::{init_population, Party, PopulationConfig, PopulationState};
use crate::seeding::derive_seed;
use crate::strategies::{select_seed, PlanningStats, PlanningView, Selection, StrategyKind};

/// Which seeds start a propagation wave.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaveOrigin {
    AllSeeds,
    NewestSeed,
}

/// Second state component: degree of free nodes, or their degree into the
/// free set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FreeDegreeMode {
    Full,
    IntoFree,
}

/// Counts feeding the instant reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardBasis {
    /// Aligned users with vacuity below 0.5.
    Decided,
    /// All users by projected belief.
    Raw,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeConfig {
    pub rounds: usize,
    pub tp_waves: usize,
    pub fp_waves: usize,
    pub model: TrustModel,
    pub p_nv: f64,
    pub rng_seed: u64,
    pub propagate_on_masked: bool,
    pub wave_origin: WaveOrigin,
    pub free_degree: FreeDegreeMode,
    pub reward_basis: RewardBasis,
    pub population: PopulationConfig,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            rounds: 50,
            tp_waves: 2,
            fp_waves: 1,
            model: TrustModel::default(),
            p_nv: 1.0,
            rng_seed: 0,
            propagate_on_masked: false,
            wave_origin: WaveOrigin::AllSeeds,
            free_degree: FreeDegreeMode::Full,
            reward_basis: RewardBasis::Decided,
            population: PopulationConfig::default(),
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::param("rounds", "need at least one round"));
        }
        if self.tp_waves == 0 || self.fp_waves == 0 {
            return Err(Error::param("waves", "each party propagates at least once"));
        }
        if !(0.0..=1.0).contains(&self.p_nv) {
            return Err(Error::param("p_nv", format!("{} outside [0, 1]", self.p_nv)));
        }
        self.model.validate()
    }

    pub fn with_seed(&self, rng_seed: u64) -> Self {
        Self {
            rng_seed,
            ..self.clone()
        }
    }

    pub fn waves(&self, party: Party) -> usize {
        match party {
            Party::True => self.tp_waves,
            Party::False => self.fp_waves,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundLog {
    pub t: usize,
    pub party: Party,
    pub strategy: Option<StrategyKind>,
    pub seed: Option<usize>,
    pub fallback: bool,
    pub n_true: usize,
    pub n_false: usize,
    pub decided_true: usize,
    pub decided_false: usize,
    pub reward: f64,
}

impl RoundLog {
    pub fn round(&self) -> usize {
        self.t.div_ceil(2)
    }
}

/// Writes round logs as `episode,t,party,strategy,seed_id,n_true,n_false,reward`.
pub fn write_round_logs<W: Write>(episodes: &[(usize, &[RoundLog])], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "episode", "t", "party", "strategy", "seed_id", "n_true", "n_false", "reward",
    ])?;
    for (episode, logs) in episodes {
        for log in *logs {
            w.write_record([
                episode.to_string(),
                log.t.to_string(),
                log.party.name().to_string(),
                log.strategy.map_or("none".into(), |s| s.name().to_string()),
                log.seed.map_or(String::new(), |s| s.to_string()),
                log.n_true.to_string(),
                log.n_false.to_string(),
                log.reward.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Everything an agent sees at its decision point.
pub struct Observation<'a> {
    pub view: PlanningView<'a>,
    /// Normalized `(edges among free nodes, max free-node degree)`.
    pub features: [f64; 2],
    pub t: usize,
}

/// A seed-selection policy for one party.
pub trait SeedAgent {
    fn label(&self) -> String;

    /// Called once per episode after masking, before the first round.
    fn begin_episode(&mut self, _graph: &ObservableGraph) -> Result<()> {
        Ok(())
    }

    fn select(
        &mut self,
        party: Party,
        obs: &Observation<'_>,
        rng: &mut dyn RngCore,
    ) -> Result<Option<Selection>>;
}

/// A party that always fires the same heuristic (or a random one).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixedAgent(pub StrategyKind);

impl SeedAgent for FixedAgent {
    fn label(&self) -> String {
        self.0.name().to_string()
    }

    fn select(
        &mut self,
        party: Party,
        obs: &Observation<'_>,
        rng: &mut dyn RngCore,
    ) -> Result<Option<Selection>> {
        Ok(select_seed(self.0, party, &obs.view, None, rng))
    }
}

/// Reusable BFS buffers.
#[derive(Debug, Default)]
pub struct WaveScratch {
    stamp: u32,
    visited: Vec<u32>,
    in_frontier: Vec<u32>,
    frontier: Vec<usize>,
    next: Vec<usize>,
}

impl WaveScratch {
    fn reset(&mut self, n: usize) {
        if self.visited.len() != n {
            self.visited = vec![0; n];
            self.in_frontier = vec![0; n];
            self.stamp = 0;
        }
        self.stamp = self.stamp.wrapping_add(2);
        if self.stamp < 2 {
            self.visited.iter_mut().for_each(|x| *x = 0);
            self.in_frontier.iter_mut().for_each(|x| *x = 0);
            self.stamp = 2;
        }
    }
}

/// One BFS wave of `party`'s information.
///
/// Receivers read with `p_read`; a reader fuses the opinion of every
/// frontier neighbour (ascending id) and forwards with `p_share`. Seeds and
/// frozen users never update; each user is reached at most once per wave.
/// Returns the number of users whose opinion changed.
pub fn propagate_wave(
    state: &mut PopulationState,
    g: &Graph,
    party: Party,
    model: &TrustModel,
    origin: WaveOrigin,
    rng: &mut dyn RngCore,
    scratch: &mut WaveScratch,
) -> usize {
    let n = state.len();
    let seeds = state.seeds(party);
    if seeds.is_empty() {
        return 0;
    }
    scratch.reset(n);
    // frontier membership of the current level uses `stamp`, the next `stamp + 1`
    let mut level_mark = scratch.stamp;
    let visit_mark = scratch.stamp;
    scratch.frontier.clear();
    match origin {
        WaveOrigin::AllSeeds => scratch.frontier.extend_from_slice(seeds),
        WaveOrigin::NewestSeed => scratch.frontier.push(*seeds.last().expect("non-empty")),
    }
    for &s in &scratch.frontier {
        scratch.visited[s] = visit_mark;
        scratch.in_frontier[s] = level_mark;
    }

    let mut updated = 0;
    let mut receivers = Vec::new();
    while !scratch.frontier.is_empty() {
        receivers.clear();
        for &s in &scratch.frontier {
            for &r in g.neighbors(s) {
                if scratch.visited[r] != visit_mark {
                    scratch.visited[r] = visit_mark;
                    receivers.push(r);
                }
            }
        }
        receivers.sort_unstable();

        let next_mark = level_mark.wrapping_add(1);
        scratch.next.clear();
        for &r in &receivers {
            if state.is_seed(r) {
                continue;
            }
            let profile = *state.profile(r);
            if !rng.gen_bool(profile.p_read) {
                continue;
            }
            if !state.is_frozen(r) && receive(state, g, r, model, &scratch.in_frontier, level_mark) {
                updated += 1;
            }
            if rng.gen_bool(profile.p_share) {
                scratch.next.push(r);
            }
        }
        for &r in &scratch.next {
            scratch.in_frontier[r] = next_mark;
        }
        std::mem::swap(&mut scratch.frontier, &mut scratch.next);
        level_mark = next_mark;
    }
    // keep the stamp pair disjoint from the marks used in this wave
    scratch.stamp = level_mark;
    updated
}

fn receive(
    state: &mut PopulationState,
    g: &Graph,
    r: usize,
    model: &TrustModel,
    in_frontier: &[u32],
    level_mark: u32,
) -> bool {
    let mut op = *state.opinion(r);
    let before = op;
    for &s in g.neighbors(r) {
        if in_frontier[s] != level_mark {
            continue;
        }
        op = model.refresh(&op);
        if op.u() <= model.t_u {
            state.freeze(r);
            break;
        }
        let sender = *state.opinion(s);
        let c = model.trust_coefficient(&op, &sender);
        match op.fuse(&sender, c) {
            Ok(next) => op = next,
            Err(_) => {
                state.freeze(r);
                break;
            }
        }
    }
    if op != before {
        // bypass the frozen check: a latch set above still keeps the refreshed value
        state.set_opinion_unchecked(r, op);
        true
    } else {
        false
    }
}

/// `(edges among free nodes, max degree of a free node)` on the observable graph.
pub fn extract_state(
    state: &PopulationState,
    g: &ObservableGraph,
    mode: FreeDegreeMode,
) -> (usize, usize) {
    let edges = g
        .edges()
        .iter()
        .filter(|&&(u, v)| state.is_free(u) && state.is_free(v))
        .count();
    let max_degree = (0..state.len())
        .filter(|&v| state.is_free(v))
        .map(|v| match mode {
            FreeDegreeMode::Full => g.neighbors(v).len(),
            FreeDegreeMode::IntoFree => {
                g.neighbors(v).iter().filter(|&&w| state.is_free(w)).count()
            }
        })
        .max()
        .unwrap_or(0);
    (edges, max_degree)
}

/// `n_t − n_{t−2}` for `party`, with the false party's first step measured
/// against `t = 0`. `history[t]` holds `(n_true, n_false)` after step `t`.
pub fn instant_reward(history: &[(usize, usize)], party: Party, t: usize) -> Result<f64> {
    let owner = if t % 2 == 1 { Party::False } else { Party::True };
    if t == 0 || owner != party || t >= history.len() {
        return Err(Error::RewardUndefined {
            party: party.name(),
            t,
        });
    }
    let pick = |(nt, nf): (usize, usize)| match party {
        Party::True => nt as f64,
        Party::False => nf as f64,
    };
    let prev = t.saturating_sub(2);
    Ok(pick(history[t]) - pick(history[prev]))
}

/// `Σ_{t ≥ start} γ^{t − start + 1} R_t`.
pub fn discounted_return(rewards: &[f64], start: usize, gamma: f64) -> f64 {
    rewards
        .iter()
        .skip(start)
        .enumerate()
        .map(|(i, r)| gamma.powi(i as i32 + 1) * r)
        .sum()
}

/// Discounted returns for every start index, computed backwards.
pub fn discounted_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for i in (0..rewards.len()).rev() {
        acc = gamma * (rewards[i] + acc);
        out[i] = acc;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOutcome {
    pub logs: Vec<RoundLog>,
    pub n_true: usize,
    pub n_false: usize,
    pub decided_true: usize,
    pub decided_false: usize,
    pub elapsed: Duration,
}

impl EpisodeOutcome {
    pub fn rewards(&self, party: Party) -> Vec<f64> {
        self.logs
            .iter()
            .filter(|l| l.party == party)
            .map(|l| l.reward)
            .collect()
    }
}

/// A single running episode.
pub struct Episode<'g> {
    cfg: EpisodeConfig,
    graph: &'g Graph,
    observable: ObservableGraph,
    stats: PlanningStats,
    pop: PopulationState,
    dynamics: ChaCha8Rng,
    agent_rngs: [ChaCha8Rng; 2],
    scratch: WaveScratch,
    norm: (f64, f64),
    history: Vec<(usize, usize)>,
    logs: Vec<RoundLog>,
    t: usize,
}

impl<'g> Episode<'g> {
    pub fn new(graph: &'g Graph, cfg: &EpisodeConfig) -> Result<Self> {
        cfg.validate()?;
        let seed = cfg.rng_seed;
        let pop = init_population(graph.node_count(), derive_seed(seed, &[1]), &cfg.population)?;
        let observable = mask_network(graph, cfg.p_nv, derive_seed(seed, &[2]))?;
        let stats = PlanningStats::new(&observable);
        let (e0, d0) = extract_state(&pop, &observable, cfg.free_degree);
        let mut ep = Self {
            cfg: cfg.clone(),
            graph,
            observable,
            stats,
            pop,
            dynamics: ChaCha8Rng::seed_from_u64(derive_seed(seed, &[3])),
            agent_rngs: [
                ChaCha8Rng::seed_from_u64(derive_seed(seed, &[4])),
                ChaCha8Rng::seed_from_u64(derive_seed(seed, &[5])),
            ],
            scratch: WaveScratch::default(),
            norm: (e0 as f64, d0 as f64),
            history: Vec::with_capacity(2 * cfg.rounds + 1),
            logs: Vec::with_capacity(2 * cfg.rounds),
            t: 0,
        };
        let n0 = ep.counts();
        ep.history.push(n0);
        Ok(ep)
    }

    pub fn population(&self) -> &PopulationState {
        &self.pop
    }

    pub fn observable(&self) -> &ObservableGraph {
        &self.observable
    }

    pub fn logs(&self) -> &[RoundLog] {
        &self.logs
    }

    pub fn history(&self) -> &[(usize, usize)] {
        &self.history
    }

    fn counts(&self) -> (usize, usize) {
        match self.cfg.reward_basis {
            RewardBasis::Decided => self.pop.decided_counts(),
            RewardBasis::Raw => self.pop.influence_counts(),
        }
    }

    /// Normalized state features.
    pub fn features(&self) -> [f64; 2] {
        let (e, d) = extract_state(&self.pop, &self.observable, self.cfg.free_degree);
        let norm = |x: usize, base: f64| if base > 0.0 { x as f64 / base } else { 0.0 };
        [norm(e, self.norm.0), norm(d, self.norm.1)]
    }

    fn step(&mut self, party: Party, agent: &mut dyn SeedAgent) -> Result<()> {
        self.t += 1;
        let features = self.features();
        let obs = Observation {
            view: PlanningView {
                pop: &self.pop,
                graph: &self.observable,
                stats: &self.stats,
            },
            features,
            t: self.t,
        };
        let slot = match party {
            Party::True => 0,
            Party::False => 1,
        };
        let selection = agent.select(party, &obs, &mut self.agent_rngs[slot])?;
        if let Some(sel) = selection {
            self.pop.promote_seed(sel.node, party)?;
            if sel.fallback {
                log::debug!("t={} {party}: fell back to {} -> {}", self.t, sel.strategy, sel.node);
            }
        }
        let spread_graph = if self.cfg.propagate_on_masked {
            self.observable.graph()
        } else {
            self.graph
        };
        for _ in 0..self.cfg.waves(party) {
            propagate_wave(
                &mut self.pop,
                spread_graph,
                party,
                &self.cfg.model,
                self.cfg.wave_origin,
                &mut self.dynamics,
                &mut self.scratch,
            );
        }
        let counts = self.counts();
        self.history.push(counts);
        let reward = instant_reward(&self.history, party, self.t)?;
        let (n_true, n_false) = self.pop.influence_counts();
        let (decided_true, decided_false) = self.pop.decided_counts();
        self.logs.push(RoundLog {
            t: self.t,
            party,
            strategy: selection.map(|s| s.strategy),
            seed: selection.map(|s| s.node),
            fallback: selection.map_or(false, |s| s.fallback),
            n_true,
            n_false,
            decided_true,
            decided_false,
            reward,
        });
        Ok(())
    }

    /// One round: the false party moves first, then the true party.
    pub fn run_round(&mut self, fp: &mut dyn SeedAgent, tp: &mut dyn SeedAgent) -> Result<()> {
        if self.t / 2 >= self.cfg.rounds {
            return Err(Error::param("round", "episode already finished"));
        }
        self.step(Party::False, fp)?;
        self.step(Party::True, tp)
    }

    pub fn run(mut self, fp: &mut dyn SeedAgent, tp: &mut dyn SeedAgent) -> Result<EpisodeOutcome> {
        let start = Instant::now();
        fp.begin_episode(&self.observable)?;
        tp.begin_episode(&self.observable)?;
        for _ in 0..self.cfg.rounds {
            self.run_round(fp, tp)?;
        }
        let (n_true, n_false) = self.pop.influence_counts();
        let (decided_true, decided_false) = self.pop.decided_counts();
        Ok(EpisodeOutcome {
            logs: self.logs,
            n_true,
            n_false,
            decided_true,
            decided_false,
            elapsed: start.elapsed(),
        })
    }
}

/// Convenience wrapper: builds and runs one episode.
pub fn run_episode(
    graph: &Graph,
    cfg: &EpisodeConfig,
    fp: &mut dyn SeedAgent,
    tp: &mut dyn SeedAgent,
) -> Result<EpisodeOutcome> {
    Episode::new(graph, cfg)?.run(fp, tp)
}
