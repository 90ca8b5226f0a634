//! STORM and C-STORM adapted to this environment.
//!
//! Both are PPO agents over the action list `[CF, BF]` that observe the same
//! two-feature state as the DRIM schemes. C-STORM additionally partitions
//! the observable graph into spectral communities once per episode and,
//! before every selection, restricts candidates to the community holding
//! the most free nodes.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::network::{cached_communities, ObservableGraph};
use crate::population::PopulationState;
use crate::rl::{ActionMode, PolicyAgent, PolicyParams};
use crate::strategies::Scheme;

/// Seed of the k-means stage of community detection. Fixed so that every
/// episode on the same observable graph sees the same partition.
pub const COMMUNITY_SEED: u64 = 0x5eed_c0de;

/// Restricts candidates to the community with the most free nodes.
#[derive(Debug, Clone)]
pub struct CommunityFilter {
    k: usize,
    labels: Option<Arc<Vec<usize>>>,
}

impl CommunityFilter {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::param("communities", "need at least one community"));
        }
        Ok(Self { k, labels: None })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref().map(Vec::as_slice)
    }

    pub fn begin_episode(&mut self, graph: &ObservableGraph) -> Result<()> {
        self.labels = Some(cached_communities(graph.graph(), self.k, COMMUNITY_SEED)?);
        Ok(())
    }

    /// The community (lowest label on ties) with the most free nodes.
    pub fn target_community(&self, pop: &PopulationState) -> Option<usize> {
        let labels = self.labels.as_ref()?;
        let mut free = vec![0usize; self.k];
        for (v, &label) in labels.iter().enumerate() {
            if pop.is_free(v) && !pop.is_seed(v) {
                free[label] += 1;
            }
        }
        let mut best = 0;
        for (c, &count) in free.iter().enumerate() {
            if count > free[best] {
                best = c;
            }
        }
        Some(best)
    }

    /// Candidate mask of the target community; `None` before the first episode.
    pub fn pool(&self, pop: &PopulationState) -> Option<Vec<bool>> {
        let target = self.target_community(pop)?;
        let labels = self.labels.as_ref()?;
        Some(labels.iter().map(|&l| l == target).collect())
    }
}

pub fn storm_agent(params: Arc<PolicyParams>, mode: ActionMode) -> Result<PolicyAgent> {
    PolicyAgent::new(Scheme::Storm, params, mode)
}

pub fn cstorm_agent(params: Arc<PolicyParams>, mode: ActionMode, k: usize) -> Result<PolicyAgent> {
    Ok(PolicyAgent::new(Scheme::CStorm, params, mode)?.with_filter(CommunityFilter::new(k)?))
}
