use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use slcim::network::Graph;
use slcim::opinion::{Evidence, Opinion, OpinionModel, TrustModel};
use slcim::population::{init_population, Party, PopulationConfig, PopulationState, Role, UserProfile};
use slcim::propagation::{
    propagate_wave, run_episode, Episode, EpisodeConfig, FixedAgent, WaveOrigin, WaveScratch,
};
use slcim::StrategyKind;

fn graph() -> impl Strategy<Value = Graph> {
    (2usize..40).prop_flat_map(|n| {
        prop::collection::vec((0..n, 0..n), 0..3 * n).prop_map(move |edges| Graph::from_edges(n, edges).unwrap())
    })
}

fn legit() -> Opinion {
    Opinion::from_evidence(Evidence::new(1.0, 1.0, 101.0).unwrap(), 0.5).unwrap()
}

fn uniform_pop(n: usize, p: f64) -> PopulationState {
    let profiles = (0..n)
        .map(|user_id| UserProfile {
            user_id,
            role: Role::Legitimate,
            p_read: p,
            p_share: p,
        })
        .collect();
    PopulationState::from_parts(profiles, vec![legit(); n]).unwrap()
}

fn component(g: &Graph, start: usize) -> Vec<bool> {
    let mut seen = vec![false; g.node_count()];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(v) = stack.pop() {
        for &w in g.neighbors(v) {
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen
}

fn model() -> impl Strategy<Value = OpinionModel> {
    prop::sample::select(OpinionModel::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn waves_respect_seeds_and_keep_opinions_valid(
        g in graph(),
        m in model(),
        pop_seed in any::<u64>(),
        wave_seed in any::<u64>(),
        picks in prop::collection::vec(any::<prop::sample::Index>(), 1..6),
    ) {
        let n = g.node_count();
        let mut pop = init_population(n, pop_seed, &PopulationConfig::default()).unwrap();
        for (k, idx) in picks.iter().enumerate() {
            let v = idx.index(n);
            let party = if k % 2 == 0 { Party::True } else { Party::False };
            let _ = pop.promote_seed(v, party);
        }
        let before = pop.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(wave_seed);
        let mut scratch = WaveScratch::default();
        let trust = TrustModel::new(m);
        for party in [Party::False, Party::True, Party::True] {
            let changed = propagate_wave(&mut pop, &g, party, &trust, WaveOrigin::AllSeeds, &mut rng, &mut scratch);
            prop_assert!(changed <= n);
        }
        for v in 0..n {
            let op = pop.opinion(v);
            prop_assert!((op.b() + op.d() + op.u() - 1.0).abs() < 1e-9);
            if before.is_seed(v) || before.is_frozen(v) {
                prop_assert_eq!(op, before.opinion(v));
            }
            prop_assert!(op.u() <= before.opinion(v).u() + 1e-12 || m == OpinionModel::Uom);
        }
    }

    #[test]
    fn nom_cascade_covers_the_seed_component(g in graph(), seed_idx in any::<prop::sample::Index>(), wave_seed in any::<u64>()) {
        let n = g.node_count();
        let s = seed_idx.index(n);
        let mut pop = uniform_pop(n, 1.0);
        pop.promote_seed(s, Party::True).unwrap();
        let before = pop.clone();
        propagate_wave(
            &mut pop,
            &g,
            Party::True,
            &TrustModel::new(OpinionModel::Nom),
            WaveOrigin::AllSeeds,
            &mut ChaCha8Rng::seed_from_u64(wave_seed),
            &mut WaveScratch::default(),
        );
        let reach = component(&g, s);
        for v in 0..n {
            let changed = pop.opinion(v) != before.opinion(v);
            prop_assert_eq!(changed, reach[v] && v != s, "node {}", v);
        }
    }

    #[test]
    fn silent_population_never_changes(g in graph(), wave_seed in any::<u64>()) {
        let n = g.node_count();
        let mut pop = uniform_pop(n, 0.0);
        pop.promote_seed(0, Party::True).unwrap();
        let before = pop.clone();
        propagate_wave(
            &mut pop,
            &g,
            Party::True,
            &TrustModel::default(),
            WaveOrigin::AllSeeds,
            &mut ChaCha8Rng::seed_from_u64(wave_seed),
            &mut WaveScratch::default(),
        );
        prop_assert_eq!(pop, before);
    }
}

fn ring(n: usize) -> Graph {
    Graph::from_edges(n, (0..n).flat_map(|i| [(i, (i + 1) % n), (i, (i + 5) % n)])).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn episodes_are_reproducible_and_rewards_telescope(
        seed in any::<u64>(),
        m in model(),
        tp in prop::sample::select(StrategyKind::FIXED.to_vec()),
        fp in prop::sample::select(vec![StrategyKind::Af, StrategyKind::Bf, StrategyKind::Random]),
    ) {
        let g = ring(80);
        let cfg = EpisodeConfig { rounds: 10, rng_seed: seed, model: TrustModel::new(m), ..Default::default() };
        let a = run_episode(&g, &cfg, &mut FixedAgent(fp), &mut FixedAgent(tp)).unwrap();
        let b = run_episode(&g, &cfg, &mut FixedAgent(fp), &mut FixedAgent(tp)).unwrap();
        prop_assert_eq!(&a.logs, &b.logs);

        let mut ep = Episode::new(&g, &cfg).unwrap();
        for _ in 0..cfg.rounds {
            ep.run_round(&mut FixedAgent(fp), &mut FixedAgent(tp)).unwrap();
        }
        let h = ep.history();
        let last = h.len() - 1;
        let tp_sum: f64 = a.rewards(Party::True).iter().sum();
        let fp_sum: f64 = a.rewards(Party::False).iter().sum();
        prop_assert_eq!(tp_sum, h[last].0 as f64 - h[0].0 as f64);
        prop_assert_eq!(fp_sum, h[last - 1].1 as f64 - h[0].1 as f64);

        // seed sets stay disjoint, one seed per party per step
        let seeds: Vec<usize> = a.logs.iter().filter_map(|l| l.seed).collect();
        let mut unique = seeds.clone();
        unique.sort_unstable();
        unique.dedup();
        prop_assert_eq!(unique.len(), seeds.len());
        prop_assert_eq!(seeds.len(), 2 * cfg.rounds);
        for log in &a.logs {
            prop_assert!(log.n_true + log.n_false == g.node_count());
            prop_assert!(log.decided_true <= log.n_true && log.decided_false <= log.n_false);
        }
    }
}
