//! Partitioned-disk preparations.
//!
//! A [`DiskPreparation`] splits the circle into labeled sectors; spinning a
//! pointer (drawing a uniform λ) and reading off the sector labels samples the
//! joint PMF the partition embodies. Splitting the disk into one disk per side
//! keeps the joint statistics only as long as both sides read the *same* λ and
//! the same parameters. [`SamplingMode`] and [`KnowledgePolicy`] cover the ways
//! that can fail.
//!
//! Layout convention: sectors are laid out from angle 0 in the order
//! (+,+), (+,−), (−,+), (−,−). Arcs are half-open `[start, start + length)`,
//! and lookup picks the last non-empty sector whose stored start is ≤ λ, so a
//! joint disk and its split halves compare against identical boundary values.

use std::f64::consts::{PI, TAU};
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{Angle, CountTable, JointPmf, Outcome, SingletKind};
use crate::error::{Error, Result};
use crate::rng;

/// Tolerance on partition coverage (sum of arc lengths vs 2π).
pub const PARTITION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sector {
    pub start: Angle,
    pub length: f64,
    pub outcome_a: Outcome,
    pub outcome_b: Outcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSector {
    pub start: Angle,
    pub length: f64,
    pub outcome: Outcome,
}

/// A joint preparation: a partition of the circle into labeled sectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiskPreparation {
    sectors: Vec<Sector>,
}

/// One side's half of a split disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitDisk {
    sectors: Vec<SplitSector>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingMode {
    /// One λ per trial, read by both sides.
    SharedLambda,
    /// Each side draws its own λ.
    IndependentLambdas,
}

/// How a side treats the analyzer parameter it cannot see.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "policy", content = "value")]
pub enum KnowledgePolicy {
    BothKnown,
    AssumeZero,
    AssumeFixed(Angle),
    /// Fresh uniform guess every trial.
    AssumeRandom,
    /// Same draws as `AssumeRandom`, but the run is an expectation over the
    /// unknown parameter rather than a guess.
    IntegrateOver,
}

impl KnowledgePolicy {
    fn is_random(self) -> bool {
        matches!(self, KnowledgePolicy::AssumeRandom | KnowledgePolicy::IntegrateOver)
    }

    /// The value this side uses for the remote parameter whose true value is
    /// `truth`. `draw` is consulted only for random policies.
    fn assumed(self, truth: Angle, draw: impl FnOnce() -> Angle) -> Angle {
        match self {
            KnowledgePolicy::BothKnown => truth,
            KnowledgePolicy::AssumeZero => Angle::ZERO,
            KnowledgePolicy::AssumeFixed(v) => v,
            KnowledgePolicy::AssumeRandom | KnowledgePolicy::IntegrateOver => draw(),
        }
    }
}

fn check_partition(arcs: impl Iterator<Item = (f64, f64)>) -> Result<()> {
    let mut expected_start = 0.0;
    let mut first = true;
    for (start, length) in arcs {
        if !(0.0..=TAU).contains(&length) {
            return Err(Error::config(format!("arc length {length} outside [0, 2π]")));
        }
        if first && start != 0.0 {
            return Err(Error::config("partition must start at angle 0"));
        }
        if (start - expected_start).abs() > PARTITION_TOLERANCE {
            return Err(Error::config(format!(
                "arc starting at {start} leaves a gap or overlap (expected {expected_start})"
            )));
        }
        expected_start = start + length;
        first = false;
    }
    if first {
        return Err(Error::config("partition has no arcs"));
    }
    if (expected_start - TAU).abs() > PARTITION_TOLERANCE {
        return Err(Error::config(format!("arcs cover {expected_start}, not 2π")));
    }
    Ok(())
}

/// Index of the last non-empty arc whose start is ≤ λ.
fn locate(arcs: impl Iterator<Item = (f64, f64)>, lambda: f64) -> usize {
    let mut found = None;
    for (i, (start, length)) in arcs.enumerate() {
        if length <= 0.0 {
            continue;
        }
        if start <= lambda || found.is_none() {
            found = Some(i);
        } else {
            break;
        }
    }
    found.expect("validated partition has a non-empty arc")
}

impl DiskPreparation {
    pub fn new(sectors: Vec<Sector>) -> Result<Self> {
        check_partition(sectors.iter().map(|s| (s.start.radians(), s.length)))?;
        Ok(DiskPreparation { sectors })
    }

    pub fn sectors(&self) -> &[Sector] {
        &self.sectors
    }

    pub fn lookup(&self, lambda: Angle) -> &Sector {
        let i = locate(
            self.sectors.iter().map(|s| (s.start.radians(), s.length)),
            lambda.radians(),
        );
        &self.sectors[i]
    }

    /// The joint PMF implied by the arc lengths (probability = arc / 2π).
    pub fn joint_pmf(&self) -> JointPmf {
        let mut cells = [0.0; 4];
        for s in &self.sectors {
            cells[cell_index(s.outcome_a, s.outcome_b)] += s.length / TAU;
        }
        JointPmf {
            p_pp: cells[0],
            p_pm: cells[1],
            p_mp: cells[2],
            p_mm: cells[3],
        }
    }
}

impl fmt::Display for DiskPreparation {
    /// One sector per line: `start length outcome_a outcome_b`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# start length outcome_a outcome_b")?;
        for s in &self.sectors {
            writeln!(f, "{} {} {} {}", s.start, s.length, s.outcome_a, s.outcome_b)?;
        }
        Ok(())
    }
}

impl SplitDisk {
    pub fn new(sectors: Vec<SplitSector>) -> Result<Self> {
        check_partition(sectors.iter().map(|s| (s.start.radians(), s.length)))?;
        Ok(SplitDisk { sectors })
    }

    pub fn sectors(&self) -> &[SplitSector] {
        &self.sectors
    }

    pub fn sample(&self, lambda: Angle) -> Outcome {
        let i = locate(
            self.sectors.iter().map(|s| (s.start.radians(), s.length)),
            lambda.radians(),
        );
        self.sectors[i].outcome
    }

    /// Fraction of the circle labeled `+`.
    pub fn plus_fraction(&self) -> f64 {
        self.sectors
            .iter()
            .filter(|s| s.outcome == Outcome::Plus)
            .map(|s| s.length)
            .sum::<f64>()
            / TAU
    }

    /// Builds a split disk from `(end, outcome)` runs laid out from 0,
    /// dropping empty runs.
    fn from_runs(runs: &[(f64, Outcome)]) -> Self {
        let mut sectors = Vec::with_capacity(runs.len());
        let mut start = 0.0;
        for &(end, outcome) in runs {
            if end > start {
                sectors.push(SplitSector {
                    start: Angle::new(start),
                    length: end - start,
                    outcome,
                });
                start = end;
            }
        }
        SplitDisk { sectors }
    }

    /// Text table, one sector per line: `start length outcome`.
    pub fn to_table(&self, side: &str) -> String {
        let mut out = format!("# side {side}: start length outcome\n");
        for s in &self.sectors {
            out.push_str(&format!("{} {} {}\n", s.start, s.length, s.outcome));
        }
        out
    }
}

fn cell_index(a: Outcome, b: Outcome) -> usize {
    match (a, b) {
        (Outcome::Plus, Outcome::Plus) => 0,
        (Outcome::Plus, Outcome::Minus) => 1,
        (Outcome::Minus, Outcome::Plus) => 2,
        (Outcome::Minus, Outcome::Minus) => 3,
    }
}

/// Four-sector disk reproducing the singlet joint PMF at relative angle θ.
pub fn build_singlet_disk(theta: Angle, kind: SingletKind) -> DiskPreparation {
    let c = theta.radians().cos();
    let cos2 = c * c;
    let sin2 = 1.0 - cos2;
    let (same, differ) = match kind {
        SingletKind::Anticorrelated => (PI * sin2, PI * cos2),
        SingletKind::Correlated => (PI * cos2, PI * sin2),
    };
    use Outcome::{Minus, Plus};
    let layout = [
        (same, Plus, Plus),
        (differ, Plus, Minus),
        (differ, Minus, Plus),
        (same, Minus, Minus),
    ];
    let mut start = 0.0;
    let sectors = layout
        .iter()
        .map(|&(length, outcome_a, outcome_b)| {
            let s = Sector {
                start: Angle::new(start),
                length,
                outcome_a,
                outcome_b,
            };
            start += length;
            s
        })
        .collect();
    DiskPreparation { sectors }
}

/// Reads the outcome pair of the sector containing λ.
pub fn sample_disk(disk: &DiskPreparation, lambda: Angle) -> (Outcome, Outcome) {
    let s = disk.lookup(lambda);
    (s.outcome_a, s.outcome_b)
}

/// Projects a joint disk onto each side, merging adjacent arcs that carry
/// the same outcome. Sector starts are copied, not recomputed.
pub fn split(disk: &DiskPreparation) -> (SplitDisk, SplitDisk) {
    let project = |pick: fn(&Sector) -> Outcome| {
        let mut out: Vec<SplitSector> = Vec::new();
        for s in disk.sectors.iter().filter(|s| s.length > 0.0) {
            let outcome = pick(s);
            match out.last_mut() {
                Some(last) if last.outcome == outcome => last.length += s.length,
                _ => out.push(SplitSector {
                    start: s.start,
                    length: s.length,
                    outcome,
                }),
            }
        }
        SplitDisk { sectors: out }
    };
    (project(|s| s.outcome_a), project(|s| s.outcome_b))
}

fn uniform_lambda<R: Rng + ?Sized>(rng: &mut R) -> Angle {
    Angle::new(rng.random::<f64>() * TAU)
}

/// Samples two split disks `n` times. Every trial is a coincidence.
pub fn sample_separated(da: &SplitDisk, db: &SplitDisk, mode: SamplingMode, n: u64, seed: u64) -> CountTable {
    let mut rng = rng::stream(seed, 0);
    let mut counts = CountTable::default();
    for _ in 0..n {
        let (la, lb) = match mode {
            SamplingMode::SharedLambda => {
                let l = uniform_lambda(&mut rng);
                (l, l)
            }
            SamplingMode::IndependentLambdas => (uniform_lambda(&mut rng), uniform_lambda(&mut rng)),
        };
        counts.record_coincidence(da.sample(la), db.sample(lb));
    }
    counts.singles_a = n;
    counts.singles_b = n;
    counts.n_pairs = n;
    counts
}

/// Samples the joint disk directly, `n` uniform λ.
pub fn sample_joint(disk: &DiskPreparation, n: u64, seed: u64) -> CountTable {
    let mut rng = rng::stream(seed, 0);
    let mut counts = CountTable::default();
    for _ in 0..n {
        let (a, b) = sample_disk(disk, uniform_lambda(&mut rng));
        counts.record_coincidence(a, b);
    }
    counts.singles_a = n;
    counts.singles_b = n;
    counts.n_pairs = n;
    counts
}

/// Exact joint PMF of two split disks read with a shared λ, by summing the
/// lengths of the intervals between consecutive boundaries of either disk.
pub fn shared_lambda_pmf(da: &SplitDisk, db: &SplitDisk) -> JointPmf {
    let mut cuts: Vec<f64> = da
        .sectors
        .iter()
        .chain(&db.sectors)
        .filter(|s| s.length > 0.0)
        .map(|s| s.start.radians())
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts.push(TAU);
    let mut cells = [0.0; 4];
    for w in cuts.windows(2) {
        let lambda = Angle::new(w[0]);
        cells[cell_index(da.sample(lambda), db.sample(lambda))] += w[1] - w[0];
    }
    JointPmf {
        p_pp: cells[0] / TAU,
        p_pm: cells[1] / TAU,
        p_mp: cells[2] / TAU,
        p_mm: cells[3] / TAU,
    }
}

/// Split disks whose construction depends on the analyzer parameters α, β and
/// on what each side knows about the other's parameter.
///
/// Side A builds its half from a singlet disk at `α − β̂`, side B from one at
/// `α̂ − β`, where the hats are each side's assumed value of the remote
/// parameter under its policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamDisks {
    pub alpha: Angle,
    pub beta: Angle,
    pub policy_a: KnowledgePolicy,
    pub policy_b: KnowledgePolicy,
    pub kind: SingletKind,
}

pub fn build_param_disks(
    alpha: Angle,
    beta: Angle,
    policy_a: KnowledgePolicy,
    policy_b: KnowledgePolicy,
    kind: SingletKind,
) -> ParamDisks {
    ParamDisks {
        alpha,
        beta,
        policy_a,
        policy_b,
        kind,
    }
}

impl ParamDisks {
    /// The joint the experiment is supposed to sample: the singlet at α − β.
    pub fn target(&self) -> JointPmf {
        JointPmf::singlet(self.alpha - self.beta, self.kind)
    }

    pub fn is_random(&self) -> bool {
        self.policy_a.is_random() || self.policy_b.is_random()
    }

    /// Whether the sampled table is an expectation over unknown parameters.
    pub fn is_expectation(&self) -> bool {
        self.policy_a == KnowledgePolicy::IntegrateOver || self.policy_b == KnowledgePolicy::IntegrateOver
    }

    fn splits_for(&self, beta_hat: Angle, alpha_hat: Angle) -> (SplitDisk, SplitDisk) {
        let (a, _) = split(&build_singlet_disk(self.alpha - beta_hat, self.kind));
        let (_, b) = split(&build_singlet_disk(alpha_hat - self.beta, self.kind));
        (a, b)
    }

    /// The split disks for one trial. Random policies draw their guess from
    /// `rng` (A's guess first); deterministic ones never touch it.
    pub fn realize<R: Rng + ?Sized>(&self, rng: &mut R) -> (SplitDisk, SplitDisk) {
        let beta_hat = self.policy_a.assumed(self.beta, || uniform_lambda(rng));
        let alpha_hat = self.policy_b.assumed(self.alpha, || uniform_lambda(rng));
        self.splits_for(beta_hat, alpha_hat)
    }

    /// The fixed split disks, if neither policy is random.
    pub fn deterministic_splits(&self) -> Option<(SplitDisk, SplitDisk)> {
        if self.is_random() {
            return None;
        }
        let beta_hat = self.policy_a.assumed(self.beta, || unreachable!());
        let alpha_hat = self.policy_b.assumed(self.alpha, || unreachable!());
        Some(self.splits_for(beta_hat, alpha_hat))
    }

    /// Exact shared-λ joint PMF. Random policies are integrated over their
    /// assumed value with an `resolution`-point midpoint rule per side.
    pub fn expected_pmf(&self, resolution: usize) -> JointPmf {
        let grid = |p: KnowledgePolicy, truth: Angle| -> Vec<Angle> {
            if p.is_random() {
                (0..resolution)
                    .map(|k| Angle::new((k as f64 + 0.5) * TAU / resolution as f64))
                    .collect()
            } else {
                vec![p.assumed(truth, || unreachable!())]
            }
        };
        let betas = grid(self.policy_a, self.beta);
        let alphas = grid(self.policy_b, self.alpha);
        let weight = 1.0 / (betas.len() * alphas.len()) as f64;
        let mut acc = [0.0; 4];
        for &bh in &betas {
            for &ah in &alphas {
                let (a, b) = self.splits_for(bh, ah);
                for (slot, p) in acc.iter_mut().zip(shared_lambda_pmf(&a, &b).cells()) {
                    *slot += weight * p;
                }
            }
        }
        JointPmf {
            p_pp: acc[0],
            p_pm: acc[1],
            p_mp: acc[2],
            p_mm: acc[3],
        }
    }
}

/// Shared-λ sampling of parameter-dependent split disks.
pub fn sample_param_disks(disks: &ParamDisks, n: u64, seed: u64) -> CountTable {
    let mut rng = rng::stream(seed, 0);
    let fixed = disks.deterministic_splits();
    let mut counts = CountTable::default();
    for _ in 0..n {
        let (a, b) = match &fixed {
            Some((a, b)) => {
                let l = uniform_lambda(&mut rng);
                (a.sample(l), b.sample(l))
            }
            None => {
                let (da, db) = disks.realize(&mut rng);
                let l = uniform_lambda(&mut rng);
                (da.sample(l), db.sample(l))
            }
        };
        counts.record_coincidence(a, b);
    }
    counts.singles_a = n;
    counts.singles_b = n;
    counts.n_pairs = n;
    counts
}

/// Split disks for B's setting pinned to 0: B reads `+` on `[0, π)`, A reads
/// `+` on `[π cos²α, π cos²α + π)`. Shared-λ sampling yields the
/// anticorrelated singlet at θ = α.
pub fn build_bell_special(alpha: Angle) -> (SplitDisk, SplitDisk) {
    let c = alpha.radians().cos();
    let offset = PI * c * c;
    let a = SplitDisk::from_runs(&[
        (offset, Outcome::Minus),
        (offset + PI, Outcome::Plus),
        (TAU, Outcome::Minus),
    ]);
    let b = SplitDisk::from_runs(&[(PI, Outcome::Plus), (TAU, Outcome::Minus)]);
    (a, b)
}
