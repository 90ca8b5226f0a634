//! Per-user state: roles, reading/sharing behaviour, and evolving opinions.

use std::fmt;
use std::io::Write;

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::opinion::{
    evidence_opinion, Opinion, FALSE_SEED_EVIDENCE, LEGITIMATE_EVIDENCE, TRUE_SEED_EVIDENCE,
};

/// Engagement levels shared by the reading and sharing probabilities.
pub const BEHAVIOR_LEVELS: [f64; 4] = [1.0, 0.5, 0.25, 0.1];

/// Vacuity at or above which a user counts as free (not yet aligned).
pub const FREE_VACUITY: f64 = 0.5;

// P(b) = 0.5 is reached through a sum of fractions; keep the boundary
// stable under rounding.
const BOUNDARY_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Party {
    True,
    False,
}

impl Party {
    pub fn opponent(self) -> Party {
        match self {
            Party::True => Party::False,
            Party::False => Party::True,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Party::True => "tp",
            Party::False => "fp",
        }
    }
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    TrueSeed,
    FalseSeed,
    Legitimate,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::TrueSeed => "tip",
            Role::FalseSeed => "fip",
            Role::Legitimate => "legitimate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Alignment {
    TrueAligned,
    FalseAligned,
    /// Reserved for reports; [`classify`] never returns it.
    Undecided,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserProfile {
    pub user_id: usize,
    pub role: Role,
    pub p_read: f64,
    pub p_share: f64,
}

impl UserProfile {
    pub fn activity(&self) -> f64 {
        self.p_read * self.p_share
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PopulationConfig {
    /// Base rate given to every legitimate user.
    pub prior_a: f64,
    /// Relative weights of [`BEHAVIOR_LEVELS`] for `p_read`.
    pub read_weights: [f64; 4],
    /// Relative weights of [`BEHAVIOR_LEVELS`] for `p_share`.
    pub share_weights: [f64; 4],
}

impl Default for PopulationConfig {
    fn default() -> Self {
        Self {
            prior_a: 0.5,
            read_weights: [1.0; 4],
            share_weights: [1.0; 4],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PopulationState {
    profiles: Vec<UserProfile>,
    opinions: Vec<Opinion>,
    frozen: Vec<bool>,
    seeds: [Vec<usize>; 2],
}

fn party_slot(party: Party) -> usize {
    match party {
        Party::True => 0,
        Party::False => 1,
    }
}

pub fn init_population(n: usize, rng_seed: u64, cfg: &PopulationConfig) -> Result<PopulationState> {
    if n == 0 {
        return Err(Error::EmptyPopulation);
    }
    if !(0.0..=1.0).contains(&cfg.prior_a) {
        return Err(Error::param("prior_a", format!("{} outside [0, 1]", cfg.prior_a)));
    }
    let read = WeightedIndex::new(cfg.read_weights)
        .map_err(|e| Error::param("read_weights", e.to_string()))?;
    let share = WeightedIndex::new(cfg.share_weights)
        .map_err(|e| Error::param("share_weights", e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let profiles = (0..n)
        .map(|user_id| UserProfile {
            user_id,
            role: Role::Legitimate,
            p_read: BEHAVIOR_LEVELS[read.sample(&mut rng)],
            p_share: BEHAVIOR_LEVELS[share.sample(&mut rng)],
        })
        .collect();
    Ok(PopulationState {
        profiles,
        opinions: vec![evidence_opinion(LEGITIMATE_EVIDENCE, cfg.prior_a); n],
        frozen: vec![false; n],
        seeds: [Vec::new(), Vec::new()],
    })
}

impl PopulationState {
    /// Builds a state from explicit parts, all users legitimate.
    pub fn from_parts(profiles: Vec<UserProfile>, opinions: Vec<Opinion>) -> Result<Self> {
        if profiles.is_empty() {
            return Err(Error::EmptyPopulation);
        }
        if profiles.len() != opinions.len() {
            return Err(Error::param(
                "opinions",
                format!("{} opinions for {} profiles", opinions.len(), profiles.len()),
            ));
        }
        let n = profiles.len();
        Ok(Self {
            profiles,
            opinions,
            frozen: vec![false; n],
            seeds: [Vec::new(), Vec::new()],
        })
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn profiles(&self) -> &[UserProfile] {
        &self.profiles
    }

    pub fn profile(&self, user: usize) -> &UserProfile {
        &self.profiles[user]
    }

    pub fn opinions(&self) -> &[Opinion] {
        &self.opinions
    }

    pub fn opinion(&self, user: usize) -> &Opinion {
        &self.opinions[user]
    }

    pub fn is_frozen(&self, user: usize) -> bool {
        self.frozen[user]
    }

    pub fn is_seed(&self, user: usize) -> bool {
        self.profiles[user].role != Role::Legitimate
    }

    /// Seeds of `party` in promotion order.
    pub fn seeds(&self, party: Party) -> &[usize] {
        &self.seeds[party_slot(party)]
    }

    pub fn is_free(&self, user: usize) -> bool {
        self.opinions[user].u() >= FREE_VACUITY
    }

    /// Whether `user`'s projected stance favours `party` strictly.
    pub fn belongs_to(&self, user: usize, party: Party) -> bool {
        let (pb, pd) = self.opinions[user].project();
        match party {
            Party::True => pb > 0.5 + BOUNDARY_EPS,
            Party::False => pd > 0.5 + BOUNDARY_EPS,
        }
    }

    pub fn promote_seed(&mut self, user: usize, party: Party) -> Result<()> {
        let profile = self.profiles.get_mut(user).ok_or(Error::NodeOutOfRange {
            index: user,
            n: self.opinions.len(),
        })?;
        if profile.role != Role::Legitimate {
            return Err(Error::AlreadySeed {
                user,
                role: profile.role.name(),
            });
        }
        let (role, opinion) = match party {
            Party::True => (Role::TrueSeed, evidence_opinion(TRUE_SEED_EVIDENCE, 1.0)),
            Party::False => (Role::FalseSeed, evidence_opinion(FALSE_SEED_EVIDENCE, 0.0)),
        };
        profile.role = role;
        self.opinions[user] = opinion;
        self.frozen[user] = true;
        self.seeds[party_slot(party)].push(user);
        Ok(())
    }

    /// Replaces a legitimate user's opinion. Seeds and frozen users are left
    /// untouched; returns whether the write happened.
    pub fn set_opinion(&mut self, user: usize, op: Opinion) -> bool {
        if self.is_seed(user) || self.frozen[user] {
            return false;
        }
        self.opinions[user] = op;
        true
    }

    pub(crate) fn set_opinion_unchecked(&mut self, user: usize, op: Opinion) {
        debug_assert!(!self.is_seed(user));
        self.opinions[user] = op;
    }

    pub(crate) fn freeze(&mut self, user: usize) {
        self.frozen[user] = true;
    }

    /// `(n_true, n_false)` under the partition of [`classify`].
    pub fn influence_counts(&self) -> (usize, usize) {
        let n_true = self
            .opinions
            .iter()
            .filter(|op| classify(op) == Alignment::TrueAligned)
            .count();
        (n_true, self.len() - n_true)
    }

    /// Counts restricted to users with vacuity below the free threshold.
    pub fn decided_counts(&self) -> (usize, usize) {
        self.opinions
            .iter()
            .filter(|op| op.u() < FREE_VACUITY)
            .fold((0, 0), |(t, f), op| match classify(op) {
                Alignment::TrueAligned => (t + 1, f),
                _ => (t, f + 1),
            })
    }

    pub fn free_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.is_free(i)).collect()
    }

    /// Candidate with the largest `p_read · p_share`; lowest id on ties.
    pub fn most_active_user(&self, candidates: impl IntoIterator<Item = usize>) -> Result<usize> {
        let mut best: Option<(usize, f64)> = None;
        for c in candidates {
            let score = self.profiles[c].activity();
            match best {
                Some((id, s)) if s > score || (s == score && id < c) => {}
                _ => best = Some((c, score)),
            }
        }
        best.map(|(id, _)| id).ok_or(Error::EmptyCandidates)
    }

    /// Writes `user_id,role,p_read,p_share,b,d,u,a` rows.
    pub fn write_snapshot<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["user_id", "role", "p_read", "p_share", "b", "d", "u", "a"])?;
        for (p, op) in self.profiles.iter().zip(&self.opinions) {
            w.write_record([
                p.user_id.to_string(),
                p.role.name().to_string(),
                p.p_read.to_string(),
                p.p_share.to_string(),
                op.b().to_string(),
                op.d().to_string(),
                op.u().to_string(),
                op.a().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// True-aligned iff `P(b) ≥ 0.5`, false-aligned otherwise.
pub fn classify(op: &Opinion) -> Alignment {
    let (pb, _) = op.project();
    if pb + BOUNDARY_EPS >= 0.5 {
        Alignment::TrueAligned
    } else {
        Alignment::FalseAligned
    }
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;

    fn population(n: usize) -> PopulationState {
        init_population(n, 7, &PopulationConfig::default()).unwrap()
    }

    fn with_activity(products: &[(f64, f64)]) -> PopulationState {
        let profiles = products
            .iter()
            .enumerate()
            .map(|(user_id, &(p_read, p_share))| UserProfile {
                user_id,
                role: Role::Legitimate,
                p_read,
                p_share,
            })
            .collect();
        PopulationState::from_parts(profiles, vec![Opinion::vacuous(0.5); products.len()]).unwrap()
    }

    #[test]
    fn init_is_uncertain_and_legitimate() {
        let pop = population(3);
        assert_eq!(pop.len(), 3);
        for (p, op) in pop.profiles().iter().zip(pop.opinions()) {
            assert_eq!(p.role, Role::Legitimate);
            assert!(BEHAVIOR_LEVELS.contains(&p.p_read));
            assert!(BEHAVIOR_LEVELS.contains(&p.p_share));
            assert_abs_diff_eq!(op.b(), 1.0 / 103.0, epsilon = 1e-15);
            assert_abs_diff_eq!(op.d(), 1.0 / 103.0, epsilon = 1e-15);
            assert_abs_diff_eq!(op.u(), 101.0 / 103.0, epsilon = 1e-15);
        }
        assert_eq!(population(1133).len(), 1133);
    }

    #[test]
    fn init_rejects_bad_input() {
        assert!(matches!(
            init_population(0, 1, &PopulationConfig::default()),
            Err(Error::EmptyPopulation)
        ));
        let cfg = PopulationConfig {
            prior_a: 1.2,
            ..Default::default()
        };
        assert!(init_population(5, 1, &cfg).is_err());
    }

    #[test]
    fn behavior_levels_roughly_uniform() {
        let pop = population(8000);
        for level in BEHAVIOR_LEVELS {
            let n = pop.profiles().iter().filter(|p| p.p_read == level).count() as f64;
            // binomial(8000, 1/4): sd ≈ 38.7
            assert!((n - 2000.0).abs() < 4.0 * 38.8, "level {level}: {n}");
        }
    }

    #[test]
    fn promotion_sets_seed_opinions() {
        let mut pop = population(10);
        pop.promote_seed(5, Party::True).unwrap();
        let op = pop.opinion(5);
        assert_abs_diff_eq!(op.b(), 100.0 / 103.0, epsilon = 1e-15);
        assert_abs_diff_eq!(op.d(), 1.0 / 103.0, epsilon = 1e-15);
        assert_abs_diff_eq!(op.u(), 2.0 / 103.0, epsilon = 1e-15);
        assert_eq!(op.a(), 1.0);
        pop.promote_seed(7, Party::False).unwrap();
        let op = pop.opinion(7);
        assert_abs_diff_eq!(op.b(), 1.0 / 103.0, epsilon = 1e-15);
        assert_abs_diff_eq!(op.d(), 100.0 / 103.0, epsilon = 1e-15);
        assert_eq!(op.a(), 0.0);

        assert!(matches!(
            pop.promote_seed(5, Party::True),
            Err(Error::AlreadySeed { user: 5, .. })
        ));
        assert!(pop.promote_seed(5, Party::False).is_err());
        assert_eq!(pop.seeds(Party::True), &[5]);
        assert_eq!(pop.seeds(Party::False), &[7]);
        assert!(!pop.set_opinion(5, Opinion::vacuous(0.5)));
    }

    #[test]
    fn classification_and_counts() {
        let pop = population(10);
        assert_eq!(classify(pop.opinion(0)), Alignment::TrueAligned);
        assert_eq!(pop.influence_counts(), (10, 0));
        assert_eq!(pop.decided_counts(), (0, 0));

        let mut pop = population(4);
        pop.promote_seed(0, Party::True).unwrap();
        pop.promote_seed(1, Party::True).unwrap();
        pop.promote_seed(2, Party::False).unwrap();
        pop.promote_seed(3, Party::False).unwrap();
        assert_eq!(pop.influence_counts(), (2, 2));
        assert_eq!(pop.decided_counts(), (2, 2));
        assert_eq!(classify(pop.opinion(0)), Alignment::TrueAligned);
        assert_eq!(classify(pop.opinion(2)), Alignment::FalseAligned);
    }

    #[test]
    fn free_node_sets() {
        let pop = population(6);
        assert_eq!(pop.free_nodes(), (0..6).collect::<Vec<_>>());

        let mut pop = with_activity(&[(1.0, 1.0); 2]);
        pop.set_opinion(0, Opinion::new(0.2, 0.2, 0.6, 0.5));
        pop.set_opinion(1, Opinion::new(0.3, 0.3, 0.4, 0.5));
        assert_eq!(pop.free_nodes(), vec![0]);

        let mut pop = with_activity(&[(1.0, 1.0); 3]);
        for i in 0..3 {
            pop.set_opinion(i, Opinion::new(1.0, 0.0, 0.0, 0.5));
        }
        assert!(pop.free_nodes().is_empty());
    }

    #[test]
    fn most_active_picks_product_then_lowest_id() {
        let pop = with_activity(&[(0.5, 0.5), (1.0, 1.0), (1.0, 0.1)]);
        assert_eq!(pop.most_active_user([0, 1, 2]).unwrap(), 1);
        let pop = with_activity(&[(0.1, 1.0), (1.0, 0.5), (0.5, 1.0)]);
        assert_eq!(pop.most_active_user([2, 1]).unwrap(), 1);
        assert_eq!(pop.most_active_user([2]).unwrap(), 2);
        assert!(pop.most_active_user(std::iter::empty()).is_err());
    }

    #[test]
    fn snapshot_has_documented_columns() {
        let mut pop = population(2);
        pop.promote_seed(1, Party::False).unwrap();
        let mut buf = Vec::new();
        pop.write_snapshot(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "user_id,role,p_read,p_share,b,d,u,a");
        assert!(lines.nth(1).unwrap().starts_with("1,fip,"));
    }
}
