use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

use slcim::network::Graph;
use slcim::population::Party;
use slcim::propagation::EpisodeConfig;
use slcim::rl::{
    collect_rollouts, loss_and_grad, normalized_advantages, policy_forward, ppo_update, ActionMode, AgentSpec,
    PolicyParams, PolicySpec, PpoConfig, Sample,
};
use slcim::strategies::{action_space, Scheme};
use slcim::StrategyKind;

fn batch(params: &PolicyParams, n: usize, seed: u64) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let state = [(i as f64 * 0.37).sin().abs(), (i as f64 * 0.11).cos().abs()];
            let (action, log_prob, value) = params.act(&state, &mut rng).unwrap();
            Sample {
                state,
                action,
                log_prob,
                ret: (i % 3) as f64 - 0.5 * action as f64,
                value,
            }
        })
        .collect()
}

#[test]
fn analytic_gradient_matches_finite_differences() {
    let cfg = PpoConfig {
        hidden: 8,
        ..PpoConfig::default()
    };
    let h = 1e-5;
    for b in 0..5u64 {
        let mut params = PolicyParams::init(4, cfg.hidden, 100 + b);
        // spread the actor head so the probabilities are not all equal
        for p in params.actor.params_mut().iter_mut().rev().take(36) {
            *p *= 40.0;
        }
        let samples = batch(&params, 12, b);
        let adv = normalized_advantages(&samples);
        let (_, grads, _) = loss_and_grad(&params, &samples, &adv, &cfg);

        let actor_len = params.actor.params().len();
        let critic_len = params.critic.params().len();
        for k in 0..10 {
            let (is_actor, idx) = if k % 2 == 0 {
                (true, (k * 37 + b as usize * 11) % actor_len)
            } else {
                (false, (k * 29 + b as usize * 7) % critic_len)
            };
            let loss_at = |delta: f64| {
                let mut p = params.clone();
                if is_actor {
                    p.actor.params_mut()[idx] += delta;
                } else {
                    p.critic.params_mut()[idx] += delta;
                }
                loss_and_grad(&p, &samples, &adv, &cfg).0
            };
            let numeric = (loss_at(h) - loss_at(-h)) / (2.0 * h);
            let analytic = if is_actor { grads.actor[idx] } else { grads.critic[idx] };
            let scale = numeric.abs().max(analytic.abs()).max(1e-6);
            assert!(
                (numeric - analytic).abs() / scale < 1e-4,
                "batch {b} coord {k}: numeric {numeric} analytic {analytic}"
            );
        }
    }
}

#[test]
fn bandit_policy_concentrates_on_the_rewarded_arm() {
    let cfg = PpoConfig {
        hidden: 16,
        epochs: 10,
        actor_lr: 0.05,
        critic_lr: 0.01,
        ..PpoConfig::default()
    };
    let mut params = PolicyParams::init(4, cfg.hidden, 7);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let state = [0.5, 0.5];
    let mut reached = None;
    for update in 0..200 {
        let samples: Vec<Sample> = (0..32)
            .map(|_| {
                let (action, log_prob, value) = params.act(&state, &mut rng).unwrap();
                let ret = if action == 2 { 1.0 } else { 0.0 };
                Sample {
                    state,
                    action,
                    log_prob,
                    ret,
                    value,
                }
            })
            .collect();
        ppo_update(&mut params, &samples, &cfg).unwrap();
        if policy_forward(&params, &state).unwrap()[2] > 0.95 {
            reached = Some(update);
            break;
        }
    }
    assert!(reached.is_some(), "arm probability {:?}", policy_forward(&params, &state).unwrap());
}

#[test]
fn positive_advantage_raises_the_taken_action() {
    let cfg = PpoConfig {
        hidden: 8,
        epochs: 1,
        actor_lr: 0.1,
        ..PpoConfig::default()
    };
    let mut params = PolicyParams::init(3, cfg.hidden, 3);
    let state = [0.2, 0.9];
    let before = policy_forward(&params, &state).unwrap();
    let mk = |action: usize, ret: f64| Sample {
        state,
        action,
        log_prob: before[action].ln(),
        ret,
        value: 0.0,
    };
    ppo_update(&mut params, &[mk(1, 1.0), mk(0, 0.0), mk(2, 0.0)], &cfg).unwrap();
    let after = policy_forward(&params, &state).unwrap();
    assert!(after[1] > before[1], "{before:?} -> {after:?}");
}

fn small_graph() -> Graph {
    let n = 150;
    Graph::from_edges(n, (0..n).flat_map(|i| [(i, (i + 1) % n), (i, (i * 7 + 3) % n), (i, (i + 13) % n)])).unwrap()
}

#[test]
fn rollouts_have_one_step_per_turn_and_are_reproducible() {
    let g = small_graph();
    let env = EpisodeConfig::default();
    let params = Arc::new(PolicyParams::init(action_space(Scheme::DrimA).len(), 16, 1));
    let spec = PolicySpec::new(Scheme::DrimA, params, ActionMode::Sample);
    let opp = AgentSpec::Fixed(StrategyKind::Cf);
    let seeds = [11, 12, 13];
    let a = collect_rollouts(&g, &env, &spec, Party::True, &opp, &seeds).unwrap();
    let b = collect_rollouts(&g, &env, &spec, Party::True, &opp, &seeds).unwrap();
    assert_eq!(a, b);
    for traj in &a {
        assert_eq!(traj.steps.len(), env.rounds);
        // the true party moves on even steps
        assert!(traj.steps.iter().all(|s| s.t % 2 == 0));
        assert_eq!(traj.samples(0.95).len(), env.rounds);
        assert!(traj.steps.iter().all(|s| (0..action_space(Scheme::DrimA).len()).contains(&s.action)));
    }
    let fp = collect_rollouts(&g, &env, &spec, Party::False, &opp, &seeds[..1]).unwrap();
    assert!(fp[0].steps.iter().all(|s| s.t % 2 == 1));
    assert_eq!(fp[0].steps.len(), env.rounds);
}
