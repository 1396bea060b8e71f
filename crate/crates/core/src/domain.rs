//! Shared domain types, the closed-form singlet predictions, and the
//! correlation statistics used everywhere else.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::ops::{Add, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Normalization tolerance for probability tables.
pub const PMF_TOLERANCE: f64 = 1e-12;

/// An angle in radians, kept in the canonical range `[0, 2π)`.
///
/// Arithmetic wraps mod 2π. Operations that only care about polarization
/// (period π) reduce further themselves.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(from = "f64", into = "f64")]
pub struct Angle(f64);

impl Angle {
    pub const ZERO: Angle = Angle(0.0);

    pub fn new(radians: f64) -> Self {
        let r = radians.rem_euclid(TAU);
        // rem_euclid can round up to exactly TAU for tiny negative inputs.
        if r >= TAU {
            Angle(0.0)
        } else {
            Angle(r)
        }
    }

    pub fn from_degrees(deg: f64) -> Self {
        Angle::new(deg.to_radians())
    }

    #[inline]
    pub fn radians(self) -> f64 {
        self.0
    }

    /// Smallest non-negative representative of the angle modulo π.
    pub fn mod_pi(self) -> f64 {
        if self.0 >= PI {
            self.0 - PI
        } else {
            self.0
        }
    }
}

impl From<f64> for Angle {
    fn from(r: f64) -> Self {
        Angle::new(r)
    }
}

impl From<Angle> for f64 {
    fn from(a: Angle) -> f64 {
        a.0
    }
}

impl Add for Angle {
    type Output = Angle;
    fn add(self, rhs: Angle) -> Angle {
        Angle::new(self.0 + rhs.0)
    }
}

impl Sub for Angle {
    type Output = Angle;
    fn sub(self, rhs: Angle) -> Angle {
        Angle::new(self.0 - rhs.0)
    }
}

impl Neg for Angle {
    type Output = Angle;
    fn neg(self) -> Angle {
        Angle::new(-self.0)
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Which two-photon singlet the predictions refer to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SingletKind {
    /// P(+,+) = ½cos²θ
    Correlated,
    /// P(+,+) = ½sin²θ
    Anticorrelated,
}

/// A dichotomic outcome, encoded repo-wide as +1 / −1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Plus,
    Minus,
}

impl Outcome {
    pub fn value(self) -> i8 {
        match self {
            Outcome::Plus => 1,
            Outcome::Minus => -1,
        }
    }

    pub fn from_value(v: i64) -> Option<Outcome> {
        match v {
            1 => Some(Outcome::Plus),
            -1 => Some(Outcome::Minus),
            _ => None,
        }
    }

    pub fn flipped(self) -> Outcome {
        match self {
            Outcome::Plus => Outcome::Minus,
            Outcome::Minus => Outcome::Plus,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Plus => "+1",
            Outcome::Minus => "-1",
        })
    }
}

/// Joint probabilities of the outcome pairs (+,+), (+,−), (−,+), (−,−).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointPmf {
    pub p_pp: f64,
    pub p_pm: f64,
    pub p_mp: f64,
    pub p_mm: f64,
}

impl JointPmf {
    pub fn new(p_pp: f64, p_pm: f64, p_mp: f64, p_mm: f64) -> Result<Self> {
        let pmf = JointPmf { p_pp, p_pm, p_mp, p_mm };
        let cells = pmf.cells();
        if cells.iter().any(|p| p.is_nan() || *p < 0.0) {
            return Err(Error::InvalidPmf(format!("negative or NaN entry in {cells:?}")));
        }
        let total: f64 = cells.iter().sum();
        if (total - 1.0).abs() > PMF_TOLERANCE {
            return Err(Error::InvalidPmf(format!("entries sum to {total}")));
        }
        Ok(pmf)
    }

    /// The singlet joint PMF at relative angle `theta`.
    pub fn singlet(theta: Angle, kind: SingletKind) -> Self {
        let pp = qm_joint_prediction(theta, kind);
        JointPmf {
            p_pp: pp,
            p_pm: 0.5 - pp,
            p_mp: 0.5 - pp,
            p_mm: pp,
        }
    }

    pub fn uniform() -> Self {
        JointPmf {
            p_pp: 0.25,
            p_pm: 0.25,
            p_mp: 0.25,
            p_mm: 0.25,
        }
    }

    /// Product distribution with P(A=+) = `a_plus` and P(B=+) = `b_plus`.
    pub fn product(a_plus: f64, b_plus: f64) -> Self {
        JointPmf {
            p_pp: a_plus * b_plus,
            p_pm: a_plus * (1.0 - b_plus),
            p_mp: (1.0 - a_plus) * b_plus,
            p_mm: (1.0 - a_plus) * (1.0 - b_plus),
        }
    }

    pub fn cells(&self) -> [f64; 4] {
        [self.p_pp, self.p_pm, self.p_mp, self.p_mm]
    }

    pub fn get(&self, a: Outcome, b: Outcome) -> f64 {
        match (a, b) {
            (Outcome::Plus, Outcome::Plus) => self.p_pp,
            (Outcome::Plus, Outcome::Minus) => self.p_pm,
            (Outcome::Minus, Outcome::Plus) => self.p_mp,
            (Outcome::Minus, Outcome::Minus) => self.p_mm,
        }
    }

    pub fn marginal_a_plus(&self) -> f64 {
        self.p_pp + self.p_pm
    }

    pub fn marginal_b_plus(&self) -> f64 {
        self.p_pp + self.p_mp
    }

    /// Outer product of this PMF's marginals.
    pub fn marginal_product(&self) -> Self {
        JointPmf::product(self.marginal_a_plus(), self.marginal_b_plus())
    }

    pub fn correlation(&self) -> f64 {
        self.p_pp + self.p_mm - self.p_pm - self.p_mp
    }

    pub fn total_variation(&self, other: &JointPmf) -> f64 {
        0.5 * self
            .cells()
            .iter()
            .zip(other.cells())
            .map(|(p, q)| (p - q).abs())
            .sum::<f64>()
    }
}

/// Counting table for one experimental setting.
///
/// The four `n_*` cells count coincidences, i.e. trials where both sides
/// produced a single-channel detection. Side counts partition every emitted
/// pair into single, double or miss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CountTable {
    pub n_pp: u64,
    pub n_pm: u64,
    pub n_mp: u64,
    pub n_mm: u64,
    pub singles_a: u64,
    pub singles_b: u64,
    pub doubles_a: u64,
    pub doubles_b: u64,
    pub misses_a: u64,
    pub misses_b: u64,
    pub n_pairs: u64,
}

impl CountTable {
    /// Table holding only coincidence cells, every pair a coincidence.
    pub fn from_cells(n_pp: u64, n_pm: u64, n_mp: u64, n_mm: u64) -> Self {
        let n = n_pp + n_pm + n_mp + n_mm;
        CountTable {
            n_pp,
            n_pm,
            n_mp,
            n_mm,
            singles_a: n,
            singles_b: n,
            n_pairs: n,
            ..Default::default()
        }
    }

    pub fn coincidences(&self) -> u64 {
        self.n_pp + self.n_pm + self.n_mp + self.n_mm
    }

    /// Records a trial in which both sides produced a single outcome.
    pub fn record_coincidence(&mut self, a: Outcome, b: Outcome) {
        match (a, b) {
            (Outcome::Plus, Outcome::Plus) => self.n_pp += 1,
            (Outcome::Plus, Outcome::Minus) => self.n_pm += 1,
            (Outcome::Minus, Outcome::Plus) => self.n_mp += 1,
            (Outcome::Minus, Outcome::Minus) => self.n_mm += 1,
        }
    }

    pub fn cell(&self, a: Outcome, b: Outcome) -> u64 {
        match (a, b) {
            (Outcome::Plus, Outcome::Plus) => self.n_pp,
            (Outcome::Plus, Outcome::Minus) => self.n_pm,
            (Outcome::Minus, Outcome::Plus) => self.n_mp,
            (Outcome::Minus, Outcome::Minus) => self.n_mm,
        }
    }

    /// Empirical joint PMF over the coincidence cells.
    pub fn empirical_pmf(&self) -> Result<JointPmf> {
        let n = self.coincidences();
        if n == 0 {
            return Err(Error::NoCoincidences);
        }
        let n = n as f64;
        Ok(JointPmf {
            p_pp: self.n_pp as f64 / n,
            p_pm: self.n_pm as f64 / n,
            p_mp: self.n_mp as f64 / n,
            p_mm: self.n_mm as f64 / n,
        })
    }

    /// Table with the roles of A and B exchanged.
    pub fn transposed(&self) -> Self {
        CountTable {
            n_pp: self.n_pp,
            n_pm: self.n_mp,
            n_mp: self.n_pm,
            n_mm: self.n_mm,
            singles_a: self.singles_b,
            singles_b: self.singles_a,
            doubles_a: self.doubles_b,
            doubles_b: self.doubles_a,
            misses_a: self.misses_b,
            misses_b: self.misses_a,
            n_pairs: self.n_pairs,
        }
    }

    pub fn merge(&mut self, other: &CountTable) {
        self.n_pp += other.n_pp;
        self.n_pm += other.n_pm;
        self.n_mp += other.n_mp;
        self.n_mm += other.n_mm;
        self.singles_a += other.singles_a;
        self.singles_b += other.singles_b;
        self.doubles_a += other.doubles_a;
        self.doubles_b += other.doubles_b;
        self.misses_a += other.misses_a;
        self.misses_b += other.misses_b;
        self.n_pairs += other.n_pairs;
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.coincidences();
        if c > self.singles_a.min(self.singles_b) {
            return Err(Error::config(format!(
                "coincidences ({c}) exceed singles ({}, {})",
                self.singles_a, self.singles_b
            )));
        }
        if self.singles_a + self.doubles_a + self.misses_a != self.n_pairs {
            return Err(Error::config("side A counts do not partition n_pairs"));
        }
        if self.singles_b + self.doubles_b + self.misses_b != self.n_pairs {
            return Err(Error::config("side B counts do not partition n_pairs"));
        }
        Ok(())
    }
}

/// Probability of (+,+) for the singlet at relative analyzer angle `theta`.
pub fn qm_joint_prediction(theta: Angle, kind: SingletKind) -> f64 {
    let c = theta.radians().cos();
    let c2 = c * c;
    match kind {
        SingletKind::Correlated => 0.5 * c2,
        SingletKind::Anticorrelated => 0.5 * (1.0 - c2),
    }
}

/// Product of the single-side probabilities P(A=+|α)·P(B=+|β).
///
/// Singlet marginals are uniform, so this is ¼ for every setting.
pub fn qm_marginal_prediction(_alpha: Angle, _beta: Angle) -> f64 {
    0.5 * 0.5
}

/// Correlation estimate from a counting table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    /// E = (n_pp + n_mm − n_pm − n_mp) / coincidences
    pub e: f64,
    /// P(A = B) = (1 + E) / 2
    pub match_probability: f64,
    pub coincidences: u64,
    /// Binomial standard error of E, sqrt((1 − E²) / n).
    pub std_error: f64,
}

pub fn correlation(counts: &CountTable) -> Result<Correlation> {
    let n = counts.coincidences();
    if n == 0 {
        return Err(Error::NoCoincidences);
    }
    let agree = (counts.n_pp + counts.n_mm) as f64;
    let disagree = (counts.n_pm + counts.n_mp) as f64;
    let nf = n as f64;
    let e = (agree - disagree) / nf;
    Ok(Correlation {
        e,
        match_probability: agree / nf,
        coincidences: n,
        std_error: correlation_std_error(e, n),
    })
}

/// Standard error of a correlation estimate `e` from `n` coincidences.
pub fn correlation_std_error(e: f64, n: u64) -> f64 {
    if n == 0 {
        return f64::INFINITY;
    }
    ((1.0 - e * e).max(0.0) / n as f64).sqrt()
}

/// CHSH combination S = E(a,b) − E(a,b′) + E(a′,b) + E(a′,b′).
pub fn chsh(e_ab: f64, e_ab2: f64, e_a2b: f64, e_a2b2: f64) -> f64 {
    e_ab - e_ab2 + e_a2b + e_a2b2
}
