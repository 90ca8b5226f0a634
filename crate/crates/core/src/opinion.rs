//! Binomial Subjective Logic opinions and the operators used by the
//! opinion-update models.
//!
//! An [`Opinion`] is a point `(b, d, u)` on the 2-simplex plus a base rate
//! `a`. Belief `b` favours the true information, disbelief `d` the false
//! one, and `u` is vacuity (uncertainty from missing evidence).

use std::fmt;

use crate::error::{Error, Result};

const SIMPLEX_TOL: f64 = 1e-9;
const RENORM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Opinion {
    b: f64,
    d: f64,
    u: f64,
    a: f64,
}

impl Opinion {
    pub fn try_new(b: f64, d: f64, u: f64, a: f64) -> Result<Self> {
        let invalid = |reason| Error::InvalidOpinion { b, d, u, a, reason };
        if ![b, d, u, a].iter().all(|x| x.is_finite()) {
            return Err(invalid("non-finite component"));
        }
        if ![b, d, u, a].iter().all(|x| (0.0..=1.0).contains(x)) {
            return Err(invalid("component outside [0, 1]"));
        }
        if (b + d + u - 1.0).abs() > SIMPLEX_TOL {
            return Err(invalid("b + d + u != 1"));
        }
        Ok(Self { b, d, u, a })
    }

    /// Panicking constructor for literals known to be valid.
    pub fn new(b: f64, d: f64, u: f64, a: f64) -> Self {
        Self::try_new(b, d, u, a).expect("invalid opinion literal")
    }

    /// The vacuous opinion `(0, 0, 1, a)`.
    pub fn vacuous(a: f64) -> Self {
        Self {
            b: 0.0,
            d: 0.0,
            u: 1.0,
            a,
        }
    }

    pub fn from_evidence(ev: Evidence, a: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&a) {
            return Err(Error::param("a", format!("base rate {a} outside [0, 1]")));
        }
        let total = ev.r + ev.s + ev.w;
        Ok(Self {
            b: ev.r / total,
            d: ev.s / total,
            u: ev.w / total,
            a,
        })
    }

    #[inline]
    pub fn b(&self) -> f64 {
        self.b
    }
    #[inline]
    pub fn d(&self) -> f64 {
        self.d
    }
    #[inline]
    pub fn u(&self) -> f64 {
        self.u
    }
    #[inline]
    pub fn a(&self) -> f64 {
        self.a
    }

    /// Projected belief and disbelief `(b + a·u, d + (1 − a)·u)`.
    #[inline]
    pub fn project(&self) -> (f64, f64) {
        (self.b + self.a * self.u, self.d + (1.0 - self.a) * self.u)
    }

    /// Relative mass balance of belief and disbelief; zero when both are zero.
    pub fn balance(&self) -> f64 {
        let sum = self.b + self.d;
        if sum <= 0.0 {
            0.0
        } else {
            1.0 - (self.b - self.d).abs() / sum
        }
    }

    /// Uncertainty mass caused by conflicting evidence.
    pub fn dissonance(&self) -> f64 {
        ((self.b + self.d) * self.balance()).clamp(0.0, 1.0)
    }

    /// Trust-discounts this opinion by `c`.
    pub fn discount(&self, c: f64) -> Self {
        if c == 1.0 {
            // exact identity; 1 − (1 − u) may round away from u
            return *self;
        }
        Self {
            b: c * self.b,
            d: c * self.d,
            u: 1.0 - c * (1.0 - self.u),
            a: self.a,
        }
    }

    /// Consensus of `self` with `other` discounted by trust `c`.
    ///
    /// Fails when `1 − c(1 − u_i)(1 − u_j)` vanishes, i.e. both opinions are
    /// dogmatic and `c = 1`.
    pub fn fuse(&self, other: &Opinion, c: f64) -> Result<Self> {
        let beta = 1.0 - c * (1.0 - self.u) * (1.0 - other.u);
        if beta.abs() < f64::EPSILON {
            return Err(Error::DegenerateFusion);
        }
        // vacuity of the discounted sender
        let ud = 1.0 - c * (1.0 - other.u);
        let b = (self.b * ud + c * other.b * self.u) / beta;
        let d = (self.d * ud + c * other.d * self.u) / beta;
        let u = self.u * ud / beta;

        let a_den = beta - self.u * ud;
        let a = if a_den.abs() < f64::EPSILON {
            self.a
        } else {
            ((self.a - (self.a + other.a) * self.u) * ud + other.a * self.u) / a_den
        };
        Ok(Self::renormalized(b, d, u, a.clamp(0.0, 1.0)))
    }

    /// Re-expresses the opinion with the largest vacuity that leaves its
    /// projected probabilities unchanged.
    pub fn vacuity_maximize(&self) -> Self {
        let (pb, pd) = self.project();
        let a = self.a;
        let u = if a <= 0.0 {
            pd
        } else if a >= 1.0 {
            pb
        } else {
            (pb / a).min(pd / (1.0 - a))
        }
        .clamp(0.0, 1.0);
        let b = (pb - a * u).max(0.0);
        let d = (pd - (1.0 - a) * u).max(0.0);
        Self::renormalized(b, d, u, a)
    }

    fn renormalized(b: f64, d: f64, u: f64, a: f64) -> Self {
        let (b, d, u) = (b.max(0.0), d.max(0.0), u.max(0.0));
        let sum = b + d + u;
        if (sum - 1.0).abs() > RENORM_TOL {
            Self {
                b: b / sum,
                d: d / sum,
                u: u / sum,
                a,
            }
        } else {
            Self { b, d, u, a }
        }
    }
}

impl fmt::Display for Opinion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(b={:.4}, d={:.4}, u={:.4}, a={:.4})",
            self.b, self.d, self.u, self.a
        )
    }
}

/// Evidence counts behind an opinion: supporting `r`, refuting `s`, and the
/// non-informative prior weight `w`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evidence {
    r: f64,
    s: f64,
    w: f64,
}

impl Evidence {
    pub fn new(r: f64, s: f64, w: f64) -> Result<Self> {
        let ok = r.is_finite() && s.is_finite() && w.is_finite() && r >= 0.0 && s >= 0.0 && w > 0.0;
        if ok {
            Ok(Self { r, s, w })
        } else {
            Err(Error::InvalidEvidence { r, s, w })
        }
    }

    pub fn r(&self) -> f64 {
        self.r
    }
    pub fn s(&self) -> f64 {
        self.s
    }
    pub fn w(&self) -> f64 {
        self.w
    }
}

/// Legitimate users start almost vacuous.
pub const LEGITIMATE_EVIDENCE: (f64, f64, f64) = (1.0, 1.0, 101.0);
/// Seeds of the true party.
pub const TRUE_SEED_EVIDENCE: (f64, f64, f64) = (100.0, 1.0, 2.0);
/// Seeds of the false party.
pub const FALSE_SEED_EVIDENCE: (f64, f64, f64) = (1.0, 100.0, 2.0);

pub fn opinion_from_evidence(ev: Evidence, a: f64) -> Result<Opinion> {
    Opinion::from_evidence(ev, a)
}

pub(crate) fn evidence_opinion((r, s, w): (f64, f64, f64), a: f64) -> Opinion {
    Opinion::from_evidence(Evidence { r, s, w }, a).expect("constant evidence is valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OpinionModel {
    /// Uncertainty-based trust with vacuity maximization.
    Uom,
    /// Homophily (cosine similarity) trust.
    Hom,
    /// No trust filter.
    Nom,
}

impl OpinionModel {
    pub const ALL: [OpinionModel; 3] = [OpinionModel::Uom, OpinionModel::Hom, OpinionModel::Nom];

    pub fn name(&self) -> &'static str {
        match self {
            OpinionModel::Uom => "uom",
            OpinionModel::Hom => "hom",
            OpinionModel::Nom => "nom",
        }
    }
}

impl fmt::Display for OpinionModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for OpinionModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uom" => Ok(OpinionModel::Uom),
            "hom" => Ok(OpinionModel::Hom),
            "nom" => Ok(OpinionModel::Nom),
            other => Err(Error::param("opinion model", format!("unknown model `{other}`"))),
        }
    }
}

/// An opinion model together with its thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrustModel {
    pub kind: OpinionModel,
    /// Vacuity threshold below which the UOM refresh may fire.
    pub xi: f64,
    /// Dissonance threshold above which the UOM refresh fires.
    pub t_d: f64,
    /// Users whose vacuity drops to this level stop updating.
    pub t_u: f64,
}

impl TrustModel {
    pub fn new(kind: OpinionModel) -> Self {
        Self {
            kind,
            xi: 0.01,
            t_d: 0.6,
            t_u: 0.01,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("xi", self.xi), ("t_d", self.t_d), ("t_u", self.t_u)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::param(name, format!("{v} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Trust that receiver `i` places in sender `j`.
    pub fn trust_coefficient(&self, i: &Opinion, j: &Opinion) -> f64 {
        match self.kind {
            OpinionModel::Uom => (1.0 - i.u) * (1.0 - j.u),
            OpinionModel::Hom => {
                let ni = i.b.hypot(i.d);
                let nj = j.b.hypot(j.d);
                if ni == 0.0 || nj == 0.0 {
                    0.0
                } else {
                    ((i.b * j.b + i.d * j.d) / (ni * nj)).clamp(0.0, 1.0)
                }
            }
            OpinionModel::Nom => 1.0,
        }
    }

    /// Vacuity-maximizes a near-dogmatic, highly dissonant opinion under UOM.
    /// Other models and opinions pass through unchanged.
    pub fn refresh(&self, op: &Opinion) -> Opinion {
        if self.kind == OpinionModel::Uom && op.u < self.xi && op.dissonance() > self.t_d {
            op.vacuity_maximize()
        } else {
            *op
        }
    }
}

impl Default for TrustModel {
    fn default() -> Self {
        Self::new(OpinionModel::Uom)
    }
}
