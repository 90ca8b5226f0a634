//! Where trained policies come from: memory, disk, or a fresh training run.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::network::Graph;
use crate::opinion::{OpinionModel, TrustModel};
use crate::propagation::{EpisodeConfig, FixedAgent, SeedAgent};
use crate::rl::{
    load_params, save_params, self_play, train_agent, ActionMode, AgentSpec, PolicyAgent, PolicyParams,
    PolicySpec, PpoConfig, SelfPlayConfig, TrainSpec,
};
use crate::seeding::{derive_seed, label_hash};
use crate::strategies::{action_space, Scheme, StrategyKind};

/// The false party's strategy in an experiment cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Opponent {
    Fixed(StrategyKind),
    /// The self-play trained false-party policy.
    Drl,
}

impl Opponent {
    pub const ALL: [Opponent; 6] = [
        Opponent::Fixed(StrategyKind::Af),
        Opponent::Fixed(StrategyKind::Bf),
        Opponent::Fixed(StrategyKind::Sgf),
        Opponent::Fixed(StrategyKind::Cf),
        Opponent::Fixed(StrategyKind::Random),
        Opponent::Drl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Opponent::Fixed(kind) => kind.name(),
            Opponent::Drl => "drl",
        }
    }
}

impl fmt::Display for Opponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Opponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("drl") {
            return Ok(Opponent::Drl);
        }
        s.parse().map(Opponent::Fixed)
    }
}

/// PPO settings plus the self-play schedule for the DRL opponent.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingProfile {
    pub ppo: PpoConfig,
    pub self_play: SelfPlayConfig,
}

/// Scheme of the self-play false party.
pub const DRL_OPPONENT_SCHEME: Scheme = Scheme::DrimA;

/// Policies keyed by role, scheme, opinion model and opponent.
///
/// Lookups go memory → `dir/<key>.bin` → training (when enabled), and
/// trained policies are written back to `dir`. Training always uses the
/// base episode configuration with the cell's opinion model.
pub struct PolicyStore {
    dir: Option<PathBuf>,
    auto_train: bool,
    profile: TrainingProfile,
    env: EpisodeConfig,
    master_seed: u64,
    communities: usize,
    cache: Mutex<HashMap<String, Arc<PolicyParams>>>,
}

pub fn tp_key(scheme: Scheme, model: OpinionModel, opponent: Opponent) -> String {
    format!("tp-{}-{}-vs-{}", scheme.name(), model.name(), opponent.name())
}

pub fn fp_key(model: OpinionModel) -> String {
    format!("fp-drl-{}", model.name())
}

impl PolicyStore {
    pub fn new(
        dir: Option<PathBuf>,
        auto_train: bool,
        profile: TrainingProfile,
        env: EpisodeConfig,
        master_seed: u64,
        communities: usize,
    ) -> Self {
        Self {
            dir,
            auto_train,
            profile,
            env,
            master_seed,
            communities,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn path_for(&self, key: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{key}.bin")))
    }

    /// Puts `params` under `key` in memory (and on disk when a directory is set).
    pub fn insert(&self, key: &str, params: PolicyParams) -> Result<Arc<PolicyParams>> {
        if let Some(path) = self.path_for(key) {
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            save_params(&params, &path)?;
        }
        let params = Arc::new(params);
        self.cache.lock().expect("policy cache").insert(key.to_string(), params.clone());
        Ok(params)
    }

    fn cached(&self, key: &str) -> Option<Arc<PolicyParams>> {
        self.cache.lock().expect("policy cache").get(key).cloned()
    }

    fn fetch(
        &self,
        key: &str,
        actions: usize,
        train: impl FnOnce() -> Result<PolicyParams>,
    ) -> Result<Arc<PolicyParams>> {
        if let Some(p) = self.cached(key) {
            return Ok(p);
        }
        if let Some(path) = self.path_for(key) {
            if path.exists() {
                let params = Arc::new(load_params(&path, Some(actions))?);
                self.cache.lock().expect("policy cache").insert(key.to_string(), params.clone());
                return Ok(params);
            }
            if !self.auto_train {
                return Err(Error::MissingPolicy(path));
            }
        } else if !self.auto_train {
            return Err(Error::MissingPolicy(PathBuf::from(format!("{key}.bin"))));
        }
        log::info!("training {key}");
        let params = train()?;
        self.insert(key, params)
    }

    fn training_env(&self, model: OpinionModel) -> EpisodeConfig {
        EpisodeConfig {
            model: TrustModel::new(model),
            ..self.env.clone()
        }
    }

    fn train_seed(&self, key: &str) -> u64 {
        derive_seed(self.master_seed, &[label_hash("train"), label_hash(key)])
    }

    /// The self-play false-party policy for `model`.
    pub fn fp_params(&self, graph: &Graph, model: OpinionModel) -> Result<Arc<PolicyParams>> {
        let key = fp_key(model);
        let actions = action_space(DRL_OPPONENT_SCHEME).len();
        self.fetch(&key, actions, || {
            let out = self_play(
                graph,
                DRL_OPPONENT_SCHEME,
                DRL_OPPONENT_SCHEME,
                &self.training_env(model),
                &self.profile.ppo,
                self.profile.self_play,
                self.train_seed(&key),
            )?;
            Ok(out.fp)
        })
    }

    pub fn opponent_spec(&self, graph: &Graph, model: OpinionModel, opponent: Opponent, mode: ActionMode) -> Result<AgentSpec> {
        Ok(match opponent {
            Opponent::Fixed(kind) => AgentSpec::Fixed(kind),
            Opponent::Drl => AgentSpec::Policy(PolicySpec {
                communities: self.communities,
                ..PolicySpec::new(DRL_OPPONENT_SCHEME, self.fp_params(graph, model)?, mode)
            }),
        })
    }

    /// The true-party policy of `scheme` trained against `opponent`.
    pub fn tp_params(
        &self,
        graph: &Graph,
        scheme: Scheme,
        model: OpinionModel,
        opponent: Opponent,
    ) -> Result<Arc<PolicyParams>> {
        let key = tp_key(scheme, model, opponent);
        self.fetch(&key, action_space(scheme).len(), || {
            let spec = TrainSpec {
                communities: self.communities,
                ..TrainSpec::new(
                    scheme,
                    self.opponent_spec(graph, model, opponent, ActionMode::Sample)?,
                    self.training_env(model),
                    self.profile.ppo.clone(),
                    self.train_seed(&key),
                )
            };
            Ok(train_agent(graph, &spec)?.params)
        })
    }

    pub fn tp_agent(
        &self,
        graph: &Graph,
        scheme: Scheme,
        model: OpinionModel,
        opponent: Opponent,
        mode: ActionMode,
    ) -> Result<PolicyAgent> {
        let params = self.tp_params(graph, scheme, model, opponent)?;
        PolicySpec {
            communities: self.communities,
            ..PolicySpec::new(scheme, params, mode)
        }
        .agent()
    }

    pub fn fp_agent(
        &self,
        graph: &Graph,
        model: OpinionModel,
        opponent: Opponent,
        mode: ActionMode,
    ) -> Result<Box<dyn SeedAgent>> {
        match opponent {
            Opponent::Fixed(kind) => Ok(Box::new(FixedAgent(kind))),
            Opponent::Drl => self.opponent_spec(graph, model, opponent, mode)?.build(),
        }
    }

    /// Loads or trains every policy the given cells need, in parallel:
    /// self-play opponents first, then the true-party policies.
    pub fn prepare(&self, graph: &Graph, needs: &[(Scheme, OpinionModel, Opponent)]) -> Result<()> {
        let unique: BTreeSet<(Scheme, OpinionModel, Opponent)> = needs.iter().copied().collect();
        let drl_models: BTreeSet<OpinionModel> = unique
            .iter()
            .filter(|(_, _, o)| *o == Opponent::Drl)
            .map(|&(_, m, _)| m)
            .collect();
        drl_models
            .into_par_iter()
            .map(|m| self.fp_params(graph, m).map(drop))
            .collect::<Result<Vec<()>>>()?;
        unique
            .into_par_iter()
            .map(|(s, m, o)| self.tp_params(graph, s, m, o).map(drop))
            .collect::<Result<Vec<()>>>()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn opponent_names_round_trip() {
        for o in Opponent::ALL {
            assert_eq!(o.name().parse::<Opponent>().unwrap(), o);
        }
        assert!("mystery".parse::<Opponent>().is_err());
    }

    #[test]
    fn missing_policy_without_training() {
        let dir = tempfile::tempdir().unwrap();
        let store = PolicyStore::new(
            Some(dir.path().to_path_buf()),
            false,
            TrainingProfile::default(),
            EpisodeConfig::default(),
            1,
            2,
        );
        let g = Graph::from_edges(4, [(0, 1), (1, 2), (2, 3)]).unwrap();
        let err = store
            .tp_params(&g, Scheme::DrimA, OpinionModel::Uom, Opponent::Fixed(StrategyKind::Cf))
            .unwrap_err();
        assert!(matches!(err, Error::MissingPolicy(p) if p.ends_with("tp-drim-a-uom-vs-cf.bin")));

        let key = tp_key(Scheme::DrimNa, OpinionModel::Uom, Opponent::Fixed(StrategyKind::Cf));
        let params = PolicyParams::init(3, 8, 0);
        store.insert(&key, params.clone()).unwrap();
        let fresh = PolicyStore::new(
            Some(dir.path().to_path_buf()),
            false,
            TrainingProfile::default(),
            EpisodeConfig::default(),
            1,
            2,
        );
        let loaded = fresh
            .tp_params(&g, Scheme::DrimNa, OpinionModel::Uom, Opponent::Fixed(StrategyKind::Cf))
            .unwrap();
        assert_eq!(*loaded, params);
    }
}
