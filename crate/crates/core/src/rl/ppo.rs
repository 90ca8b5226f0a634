use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::mlp::{ForwardCache, Mlp};
use crate::error::{Error, Result};

pub const STATE_DIM: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct PpoConfig {
    pub gamma: f64,
    pub clip_epsilon: f64,
    pub epochs: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub episodes_per_update: usize,
    pub updates: usize,
    pub entropy_coef: f64,
    pub hidden: usize,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            gamma: 0.95,
            clip_epsilon: 0.2,
            epochs: 80,
            actor_lr: 3e-4,
            critic_lr: 1e-3,
            episodes_per_update: 8,
            updates: 200,
            entropy_coef: 0.01,
            hidden: 64,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gamma", self.gamma),
            ("clip_epsilon", self.clip_epsilon),
            ("actor_lr", self.actor_lr),
            ("critic_lr", self.critic_lr),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, format!("{v} must be positive")));
            }
        }
        if self.gamma >= 1.0 {
            return Err(Error::param("gamma", "must be below 1"));
        }
        if self.clip_epsilon >= 1.0 {
            return Err(Error::param("clip_epsilon", "must be below 1"));
        }
        if self.entropy_coef < 0.0 {
            return Err(Error::param("entropy_coef", "must be non-negative"));
        }
        for (name, v) in [
            ("epochs", self.epochs),
            ("episodes_per_update", self.episodes_per_update),
            ("updates", self.updates),
            ("hidden", self.hidden),
        ] {
            if v == 0 {
                return Err(Error::param(name, "must be positive"));
            }
        }
        Ok(())
    }
}

/// Actor and critic weights.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub actor: Mlp,
    pub critic: Mlp,
}

impl PolicyParams {
    /// `2 → H → H → actions` actor (softmax head) and `2 → H → H → 1` critic.
    pub fn init(actions: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            actor: Mlp::init(&[STATE_DIM, hidden, hidden, actions], 0.01, &mut rng),
            critic: Mlp::init(&[STATE_DIM, hidden, hidden, 1], 1.0, &mut rng),
        }
    }

    pub fn actions(&self) -> usize {
        self.actor.output_dim()
    }

    pub fn hidden(&self) -> usize {
        self.actor.sizes()[1]
    }

    pub fn value(&self, state: &[f64; 2]) -> f64 {
        self.critic.forward(state)[0]
    }

    /// Samples an action; returns `(action, log-probability, value)`.
    pub fn act<R: Rng + ?Sized>(&self, state: &[f64; 2], rng: &mut R) -> Result<(usize, f64, f64)> {
        let probs = policy_forward(self, state)?;
        let mut x = rng.gen::<f64>();
        let mut action = probs.len() - 1;
        for (i, p) in probs.iter().enumerate() {
            if x < *p {
                action = i;
                break;
            }
            x -= p;
        }
        Ok((action, probs[action].ln(), self.value(state)))
    }

    pub fn greedy(&self, state: &[f64; 2]) -> Result<usize> {
        let probs = policy_forward(self, state)?;
        Ok(argmax(&probs))
    }
}

pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - lse).collect()
}

/// Action distribution for a normalized state.
pub fn policy_forward(params: &PolicyParams, state: &[f64; 2]) -> Result<Vec<f64>> {
    if !state.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite("policy input"));
    }
    let probs: Vec<f64> = log_softmax(&params.actor.forward(state))
        .into_iter()
        .map(f64::exp)
        .collect();
    if !probs.iter().all(|p| p.is_finite()) {
        return Err(Error::NonFinite("policy output"));
    }
    Ok(probs)
}

/// One learner decision with its outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub state: [f64; 2],
    pub action: usize,
    pub log_prob: f64,
    pub ret: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Diagnostics {
    /// Mean clipped surrogate objective (to be maximized).
    pub surrogate: f64,
    pub value_loss: f64,
    pub entropy: f64,
    /// Fraction of samples whose clipped term was the active minimum.
    pub clip_fraction: f64,
}

/// Gradients of the loss with respect to actor and critic parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub actor: Vec<f64>,
    pub critic: Vec<f64>,
}

/// Return-minus-value advantages normalized to zero mean and unit variance.
pub fn normalized_advantages(batch: &[Sample]) -> Vec<f64> {
    let raw: Vec<f64> = batch.iter().map(|s| s.ret - s.value).collect();
    let n = raw.len().max(1) as f64;
    let mean = raw.iter().sum::<f64>() / n;
    let var = raw.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    raw.iter().map(|a| (a - mean) / (std + 1e-8)).collect()
}

/// Loss `−surrogate − c_H·entropy + value MSE` and its analytic gradient.
pub fn loss_and_grad(
    params: &PolicyParams,
    batch: &[Sample],
    advantages: &[f64],
    cfg: &PpoConfig,
) -> (f64, Gradients, Diagnostics) {
    let n = batch.len() as f64;
    let eps = cfg.clip_epsilon;
    let mut grads = Gradients {
        actor: vec![0.0; params.actor.params().len()],
        critic: vec![0.0; params.critic.params().len()],
    };
    let mut diag = Diagnostics::default();
    let mut cache = ForwardCache::default();
    let mut d_logits = vec![0.0; params.actions()];

    for (s, &adv) in batch.iter().zip(advantages) {
        let logp = log_softmax(params.actor.forward_cached(&s.state, &mut cache));
        let probs: Vec<f64> = logp.iter().map(|l| l.exp()).collect();
        let ratio = (logp[s.action] - s.log_prob).exp();
        let clipped = ratio.clamp(1.0 - eps, 1.0 + eps);
        let unclipped_obj = ratio * adv;
        let clipped_obj = clipped * adv;
        let d_ratio = if unclipped_obj <= clipped_obj {
            adv
        } else {
            diag.clip_fraction += 1.0;
            0.0
        };
        let entropy: f64 = -probs.iter().zip(&logp).map(|(p, l)| p * l).sum::<f64>();
        diag.surrogate += unclipped_obj.min(clipped_obj);
        diag.entropy += entropy;

        for (k, d) in d_logits.iter_mut().enumerate() {
            let onehot = if k == s.action { 1.0 } else { 0.0 };
            let d_surr = d_ratio * ratio * (onehot - probs[k]);
            let d_ent = -probs[k] * (logp[k] + entropy);
            *d = -(d_surr + cfg.entropy_coef * d_ent) / n;
        }
        params.actor.backward(&cache, &d_logits, &mut grads.actor);

        let v = params.critic.forward_cached(&s.state, &mut cache)[0];
        diag.value_loss += (v - s.ret).powi(2);
        params.critic.backward(&cache, &[2.0 * (v - s.ret) / n], &mut grads.critic);
    }
    diag.surrogate /= n;
    diag.value_loss /= n;
    diag.entropy /= n;
    diag.clip_fraction /= n;
    let loss = -diag.surrogate - cfg.entropy_coef * diag.entropy + diag.value_loss;
    (loss, grads, diag)
}

/// Runs `cfg.epochs` full-batch gradient steps of clipped PPO. Returns the
/// diagnostics of the first epoch.
pub fn ppo_update(params: &mut PolicyParams, batch: &[Sample], cfg: &PpoConfig) -> Result<Diagnostics> {
    if batch.is_empty() {
        return Err(Error::param("batch", "PPO update needs at least one sample"));
    }
    let advantages = normalized_advantages(batch);
    let mut first = None;
    for _ in 0..cfg.epochs {
        let (loss, grads, diag) = loss_and_grad(params, batch, &advantages, cfg);
        if !loss.is_finite() {
            return Err(Error::NonFinite("PPO loss"));
        }
        first.get_or_insert(diag);
        for (p, g) in params.actor.params_mut().iter_mut().zip(&grads.actor) {
            *p -= cfg.actor_lr * g;
        }
        for (p, g) in params.critic.params_mut().iter_mut().zip(&grads.critic) {
            *p -= cfg.critic_lr * g;
        }
    }
    Ok(first.expect("epochs > 0"))
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;

    #[test]
    fn forward_is_a_distribution() {
        let params = PolicyParams::init(4, 16, 3);
        for state in [[0.0, 0.0], [1.0, 1.0], [0.3, 0.9], [-5.0, 12.0]] {
            let p = policy_forward(&params, &state).unwrap();
            assert_abs_diff_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
            assert!(p.iter().all(|&x| x > 0.0));
            assert_eq!(p, policy_forward(&params, &state).unwrap());
        }
        assert!(policy_forward(&params, &[f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn zero_head_is_uniform() {
        let mut params = PolicyParams::init(3, 8, 1);
        let sizes = params.actor.sizes().to_vec();
        let n = params.actor.params().len();
        let head = Mlp::param_count_for(&sizes[..sizes.len() - 1]);
        params.actor.params_mut()[head..n].iter_mut().for_each(|x| *x = 0.0);
        let p = policy_forward(&params, &[0.4, 0.2]).unwrap();
        for x in p {
            assert_abs_diff_eq!(x, 1.0 / 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_advantage_leaves_actor_nearly_still() {
        let mut params = PolicyParams::init(3, 8, 5);
        let before = params.actor.clone();
        let batch: Vec<Sample> = (0..6)
            .map(|i| {
                let state = [0.1 * i as f64, 0.5];
                let (action, log_prob, value) = params.act(&state, &mut ChaCha8Rng::seed_from_u64(i)).unwrap();
                Sample { state, action, log_prob, ret: 1.0, value }
            })
            .collect();
        let cfg = PpoConfig {
            epochs: 5,
            entropy_coef: 0.0,
            ..Default::default()
        };
        // identical raw advantages normalize to zero
        let batch: Vec<Sample> = batch.iter().map(|s| Sample { ret: s.value + 2.0, ..*s }).collect();
        ppo_update(&mut params, &batch, &cfg).unwrap();
        assert_eq!(params.actor, before);
    }

    #[test]
    fn empty_batch_rejected() {
        let mut params = PolicyParams::init(2, 4, 0);
        assert!(ppo_update(&mut params, &[], &PpoConfig::default()).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(PpoConfig::default().validate().is_ok());
        let bad = PpoConfig {
            clip_epsilon: 1.2,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = PpoConfig {
            epochs: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
