//! Seed-selection heuristics shared by both parties and used as the action
//! set of the learning agents.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::network::ObservableGraph;
use crate::population::{Party, PopulationState};

/// Hop radius of the sub-greedy neighbourhood count.
pub const SUBGREEDY_HOPS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StrategyKind {
    /// Active first: largest `p_read · p_share`.
    Af,
    /// Blocking first: opponent-adjacent node with most free neighbours.
    Bf,
    /// Sub-greedy first: most nodes within two hops.
    Sgf,
    /// Centrality first: largest degree.
    Cf,
    /// Uniformly random member of the full action set.
    Random,
}

impl StrategyKind {
    pub const FIXED: [StrategyKind; 4] = [
        StrategyKind::Af,
        StrategyKind::Bf,
        StrategyKind::Sgf,
        StrategyKind::Cf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Af => "af",
            StrategyKind::Bf => "bf",
            StrategyKind::Sgf => "sgf",
            StrategyKind::Cf => "cf",
            StrategyKind::Random => "random",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "af" => Ok(StrategyKind::Af),
            "bf" => Ok(StrategyKind::Bf),
            "sgf" => Ok(StrategyKind::Sgf),
            "cf" => Ok(StrategyKind::Cf),
            "random" => Ok(StrategyKind::Random),
            other => Err(Error::param("strategy", format!("unknown strategy `{other}`"))),
        }
    }
}

/// Seed-selection schemes compared in the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    DrimA,
    DrimNa,
    Storm,
    CStorm,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::DrimA, Scheme::DrimNa, Scheme::CStorm, Scheme::Storm];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::DrimA => "drim-a",
            Scheme::DrimNa => "drim-na",
            Scheme::Storm => "storm",
            Scheme::CStorm => "cstorm",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "drim-a" => Ok(Scheme::DrimA),
            "drim-na" => Ok(Scheme::DrimNa),
            "storm" => Ok(Scheme::Storm),
            "cstorm" | "c-storm" => Ok(Scheme::CStorm),
            other => Err(Error::param("scheme", format!("unknown scheme `{other}`"))),
        }
    }
}

/// Ordered action list of a scheme; policy output `i` fires entry `i`.
pub fn action_space(scheme: Scheme) -> &'static [StrategyKind] {
    use StrategyKind::*;
    match scheme {
        Scheme::DrimA => &[Af, Bf, Sgf, Cf],
        Scheme::DrimNa => &[Bf, Sgf, Cf],
        Scheme::Storm | Scheme::CStorm => &[Cf, Bf],
    }
}

/// Static per-episode statistics of the observable graph.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanningStats {
    pub degree: Vec<usize>,
    pub two_hop: Vec<usize>,
}

impl PlanningStats {
    pub fn new(g: &ObservableGraph) -> Self {
        Self {
            degree: (0..g.node_count()).map(|v| g.neighbors(v).len()).collect(),
            two_hop: g.hop_counts(SUBGREEDY_HOPS),
        }
    }
}

/// What a party sees when it picks a seed.
#[derive(Clone, Copy)]
pub struct PlanningView<'a> {
    pub pop: &'a PopulationState,
    pub graph: &'a ObservableGraph,
    pub stats: &'a PlanningStats,
}

impl<'a> PlanningView<'a> {
    fn candidate(&self, v: usize, pool: Option<&[bool]>) -> bool {
        !self.pop.is_seed(v) && pool.map_or(true, |p| p[v])
    }

    fn argmax_by(&self, pool: Option<&[bool]>, score: impl Fn(usize) -> f64) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for v in 0..self.pop.len() {
            if !self.candidate(v, pool) {
                continue;
            }
            let s = score(v);
            if best.map_or(true, |(_, b)| s > b) {
                best = Some((v, s));
            }
        }
        best.map(|(v, _)| v)
    }
}

/// Applies one fixed heuristic. `pool`, when given, further restricts the
/// non-seed candidates. Returns `None` when no candidate exists.
pub fn select_fixed(
    kind: StrategyKind,
    party: Party,
    view: &PlanningView<'_>,
    pool: Option<&[bool]>,
) -> Option<usize> {
    match kind {
        StrategyKind::Af => view.argmax_by(pool, |v| view.pop.profile(v).activity()),
        StrategyKind::Cf => view.argmax_by(pool, |v| view.stats.degree[v] as f64),
        StrategyKind::Sgf => view.argmax_by(pool, |v| view.stats.two_hop[v] as f64),
        StrategyKind::Bf => blocking_first(party, view, pool),
        StrategyKind::Random => None,
    }
}

fn blocking_first(party: Party, view: &PlanningView<'_>, pool: Option<&[bool]>) -> Option<usize> {
    let n = view.pop.len();
    let opponent = party.opponent();
    let mut adjacent = vec![false; n];
    for v in (0..n).filter(|&v| view.pop.belongs_to(v, opponent)) {
        for &w in view.graph.neighbors(v) {
            adjacent[w] = true;
        }
    }
    let mut best: Option<(usize, usize)> = None;
    for v in (0..n).filter(|&v| adjacent[v] && view.candidate(v, pool)) {
        let free = view
            .graph
            .neighbors(v)
            .iter()
            .filter(|&&w| view.pop.is_free(w))
            .count();
        if best.map_or(true, |(_, b)| free > b) {
            best = Some((v, free));
        }
    }
    best.map(|(v, _)| v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Selection {
    /// Heuristic that produced the seed (after resolving Random and fallbacks).
    pub strategy: StrategyKind,
    pub node: usize,
    pub fallback: bool,
}

/// Selects a seed with the fallback chain SGF → CF → lowest-id free node →
/// lowest-id non-seed node. `pool` restrictions are tried first, then dropped.
pub fn select_seed(
    kind: StrategyKind,
    party: Party,
    view: &PlanningView<'_>,
    pool: Option<&[bool]>,
    rng: &mut dyn RngCore,
) -> Option<Selection> {
    let kind = match kind {
        StrategyKind::Random => {
            let actions = action_space(Scheme::DrimA);
            actions[rng.gen_range(0..actions.len())]
        }
        k => k,
    };
    if let Some(node) = select_fixed(kind, party, view, pool) {
        return Some(Selection {
            strategy: kind,
            node,
            fallback: false,
        });
    }
    let pools: &[Option<&[bool]>] = if pool.is_some() { &[pool, None] } else { &[None] };
    for &p in pools {
        for fb in [StrategyKind::Sgf, StrategyKind::Cf] {
            if let Some(node) = select_fixed(fb, party, view, p) {
                return Some(Selection {
                    strategy: fb,
                    node,
                    fallback: true,
                });
            }
        }
    }
    let n = view.pop.len();
    (0..n)
        .find(|&v| !view.pop.is_seed(v) && view.pop.is_free(v))
        .or_else(|| (0..n).find(|&v| !view.pop.is_seed(v)))
        .map(|node| Selection {
            strategy: kind,
            node,
            fallback: true,
        })
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::network::Graph;
    use crate::opinion::Opinion;
    use crate::population::{init_population, PopulationConfig, Role, UserProfile};

    fn setup(g: &Graph) -> (PopulationState, ObservableGraph, PlanningStats) {
        let pop = init_population(g.node_count(), 3, &PopulationConfig::default()).unwrap();
        let og = ObservableGraph::full(g);
        let stats = PlanningStats::new(&og);
        (pop, og, stats)
    }

    fn star() -> Graph {
        Graph::from_edges(5, (1..5).map(|l| (0, l))).unwrap()
    }

    #[test]
    fn centrality_picks_star_center() {
        let g = star();
        let (pop, og, stats) = setup(&g);
        let view = PlanningView { pop: &pop, graph: &og, stats: &stats };
        assert_eq!(select_fixed(StrategyKind::Cf, Party::True, &view, None), Some(0));
    }

    #[test]
    fn subgreedy_on_path() {
        let g = Graph::from_edges(5, (0..4).map(|i| (i, i + 1))).unwrap();
        let (pop, og, stats) = setup(&g);
        // brute-force 2-hop counts: a=2, b=3, c=4, d=3, e=2
        assert_eq!(stats.two_hop, vec![2, 3, 4, 3, 2]);
        let view = PlanningView { pop: &pop, graph: &og, stats: &stats };
        assert_eq!(select_fixed(StrategyKind::Sgf, Party::True, &view, None), Some(2));
    }

    #[test]
    fn blocking_counts_candidate_free_neighbours() {
        let g = star();
        let (mut pop, og, stats) = setup(&g);
        pop.promote_seed(0, Party::False).unwrap();
        let view = PlanningView { pop: &pop, graph: &og, stats: &stats };
        assert_eq!(select_fixed(StrategyKind::Bf, Party::True, &view, None), Some(1));
        // FP has no true-aligned opponents to block yet
        assert_eq!(select_fixed(StrategyKind::Bf, Party::False, &view, None), None);
    }

    #[test]
    fn active_first_uses_behaviour() {
        let g = star();
        let profiles = (0..5)
            .map(|user_id| UserProfile {
                user_id,
                role: Role::Legitimate,
                p_read: if user_id == 3 { 1.0 } else { 0.5 },
                p_share: 0.5,
            })
            .collect();
        let pop = PopulationState::from_parts(profiles, vec![Opinion::vacuous(0.5); 5]).unwrap();
        let og = ObservableGraph::full(&g);
        let stats = PlanningStats::new(&og);
        let view = PlanningView { pop: &pop, graph: &og, stats: &stats };
        assert_eq!(select_fixed(StrategyKind::Af, Party::True, &view, None), Some(3));
    }

    #[test]
    fn seeds_are_never_selected() {
        let g = star();
        let (mut pop, og, stats) = setup(&g);
        pop.promote_seed(0, Party::True).unwrap();
        let view = PlanningView { pop: &pop, graph: &og, stats: &stats };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for kind in StrategyKind::FIXED {
            let sel = select_seed(kind, Party::False, &view, None, &mut rng).unwrap();
            assert_ne!(sel.node, 0);
        }
    }

    #[test]
    fn fallback_when_blocking_has_no_targets() {
        let g = star();
        let (pop, og, stats) = setup(&g);
        let view = PlanningView { pop: &pop, graph: &og, stats: &stats };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let sel = select_seed(StrategyKind::Bf, Party::False, &view, None, &mut rng).unwrap();
        assert!(sel.fallback);
        assert_eq!(sel.strategy, StrategyKind::Sgf);
        assert_eq!(sel.node, 0);
    }

    #[test]
    fn pool_restriction_then_global() {
        let g = star();
        let (pop, og, stats) = setup(&g);
        let view = PlanningView { pop: &pop, graph: &og, stats: &stats };
        let pool = [false, false, true, true, false];
        assert_eq!(select_fixed(StrategyKind::Cf, Party::True, &view, Some(&pool)), Some(2));
    }

    #[test]
    fn action_spaces() {
        assert_eq!(action_space(Scheme::DrimA).len(), 4);
        assert_eq!(action_space(Scheme::DrimNa).len(), 3);
        assert_eq!(action_space(Scheme::DrimA)[0], StrategyKind::Af);
        assert_eq!(action_space(Scheme::Storm), &[StrategyKind::Cf, StrategyKind::Bf]);
    }

    #[test]
    fn random_frequencies() {
        let g = Graph::from_edges(40, (0..39).map(|i| (i, i + 1))).unwrap();
        let (mut pop, og, stats) = setup(&g);
        pop.promote_seed(10, Party::False).unwrap();
        let view = PlanningView { pop: &pop, graph: &og, stats: &stats };
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let draws = 8000;
        let mut counts = [0usize; 4];
        for _ in 0..draws {
            let sel = select_seed(StrategyKind::Random, Party::True, &view, None, &mut rng).unwrap();
            assert!(!sel.fallback);
            counts[StrategyKind::FIXED.iter().position(|&k| k == sel.strategy).unwrap()] += 1;
        }
        // multinomial(8000, 1/4): sd ≈ 38.7
        for c in counts {
            assert!((c as f64 - 2000.0).abs() < 3.0 * 38.73, "{counts:?}");
        }
    }

    #[test]
    fn names_round_trip() {
        for k in [
            StrategyKind::Af,
            StrategyKind::Bf,
            StrategyKind::Sgf,
            StrategyKind::Cf,
            StrategyKind::Random,
        ] {
            assert_eq!(k.name().parse::<StrategyKind>().unwrap(), k);
        }
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
    }
}
