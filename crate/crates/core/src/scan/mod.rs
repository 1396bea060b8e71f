//! Experiment orchestration: angle scans, CHSH runs, and the diagnostics that
//! expose threshold miscalibration (singles asymmetry and coincidence-rate
//! modulation).
//!
//! Every scan step and CHSH setting draws from its own ChaCha stream derived
//! from `(seed, index)`, so results do not depend on thread scheduling.

pub mod analytic;

use std::f64::consts::{FRAC_PI_4, FRAC_PI_8, PI};
use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{chsh, correlation, Angle, Correlation, CountTable};
use crate::error::{Error, Result};
use crate::optics::{simulate_pairs, SourceModel, StationConfig};
use crate::rng;

pub use analytic::{analytic_correlation, analytic_modulation, analytic_rates, AnalyticRates};

pub const DEFAULT_STEPS: usize = 33;
pub const DEFAULT_PAIRS_PER_STEP: u64 = 100_000;

/// Columns of the scan CSV.
pub const SCAN_CSV_HEADER: &str =
    "b_angle_rad,n_pp,n_pm,n_mp,n_mm,singles_a,singles_b,doubles_a,doubles_b,misses_a,misses_b,match_prob,E";

/// `n_steps` evenly spaced B angles covering `[0, π]` inclusive.
pub fn uniform_b_angles(n_steps: usize) -> Vec<Angle> {
    let last = n_steps.saturating_sub(1).max(1) as f64;
    (0..n_steps).map(|k| Angle::new(k as f64 * PI / last)).collect()
}

/// (max − min) / mean of a list of rates; 0 for an all-zero list.
pub fn modulation_of(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    if mean > 0.0 {
        (max - min) / mean
    } else {
        0.0
    }
}

/// Threshold calibrations shown in the figure presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Both sides at 0.5: classical correlations.
    Figure6,
    /// A at 0.5, B at 0.92: super-quantum correlations.
    Figure7,
    /// A at 0.5, B at 0.75, A's analyzer at 0.
    Figure8Left,
    /// A at 0.5, B at 0.75, A's analyzer at π/4.
    Figure8Right,
}

impl Preset {
    /// `(threshold A, threshold B, A's analyzer angle)`
    pub fn calibration(self) -> (f64, f64, Angle) {
        match self {
            Preset::Figure6 => (0.5, 0.5, Angle::ZERO),
            Preset::Figure7 => (0.5, 0.92, Angle::ZERO),
            Preset::Figure8Left => (0.5, 0.75, Angle::ZERO),
            Preset::Figure8Right => (0.5, 0.75, Angle::new(FRAC_PI_4)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub source: SourceModel,
    pub station_a: StationConfig,
    /// Calibration of B; its angle is replaced by each scan angle.
    pub station_b: StationConfig,
    pub b_angles: Vec<Angle>,
    pub pairs_per_step: u64,
    pub seed: u64,
}

impl ScanConfig {
    /// Isotropic source, noiseless and fully efficient stations.
    pub fn ideal(alpha: Angle, t_a: f64, t_b: f64, seed: u64) -> Self {
        ScanConfig {
            source: SourceModel::IsotropicOrthogonalPairs,
            station_a: StationConfig::ideal(alpha, t_a),
            station_b: StationConfig::ideal(Angle::ZERO, t_b),
            b_angles: uniform_b_angles(DEFAULT_STEPS),
            pairs_per_step: DEFAULT_PAIRS_PER_STEP,
            seed,
        }
    }

    pub fn preset(preset: Preset, seed: u64) -> Self {
        let (t_a, t_b, alpha) = preset.calibration();
        ScanConfig::ideal(alpha, t_a, t_b, seed)
    }

    pub fn validate(&self) -> Result<()> {
        self.station_a.validate()?;
        self.station_b.validate()?;
        if self.b_angles.len() < 2 {
            return Err(Error::config("a scan needs at least 2 steps"));
        }
        if self.pairs_per_step == 0 {
            return Err(Error::config("pairs_per_step must be ≥ 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanStep {
    pub b_angle: Angle,
    pub counts: CountTable,
    /// `None` when the step produced no coincidences.
    pub correlation: Option<Correlation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub steps: Vec<ScanStep>,
    /// Total B singles over total A singles; `None` if A never clicked alone.
    pub singles_ratio: Option<f64>,
    pub coincidence_modulation: f64,
}

impl ScanResult {
    fn from_steps(steps: Vec<ScanStep>) -> Self {
        let (sa, sb) = steps.iter().fold((0u64, 0u64), |(a, b), s| {
            (a + s.counts.singles_a, b + s.counts.singles_b)
        });
        let singles_ratio = (sa > 0).then(|| sb as f64 / sa as f64);
        let coincidences: Vec<f64> = steps.iter().map(|s| s.counts.coincidences() as f64).collect();
        ScanResult {
            steps,
            singles_ratio,
            coincidence_modulation: modulation_of(&coincidences),
        }
    }

    pub fn totals(&self) -> CountTable {
        let mut t = CountTable::default();
        for s in &self.steps {
            t.merge(&s.counts);
        }
        t
    }

    /// Writes the per-step table. Undefined match probability and E are
    /// written as empty fields.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{SCAN_CSV_HEADER}")?;
        for s in &self.steps {
            let c = &s.counts;
            let (m, e) = match &s.correlation {
                Some(k) => (k.match_probability.to_string(), k.e.to_string()),
                None => (String::new(), String::new()),
            };
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                s.b_angle,
                c.n_pp,
                c.n_pm,
                c.n_mp,
                c.n_mm,
                c.singles_a,
                c.singles_b,
                c.doubles_a,
                c.doubles_b,
                c.misses_a,
                c.misses_b,
                m,
                e
            )?;
        }
        Ok(())
    }
}

pub fn run_scan(cfg: &ScanConfig) -> Result<ScanResult> {
    cfg.validate()?;
    let steps = cfg
        .b_angles
        .par_iter()
        .enumerate()
        .map(|(i, &b_angle)| {
            let mut r = rng::stream(cfg.seed, i as u64);
            let station_b = cfg.station_b.with_angle(b_angle);
            let counts = simulate_pairs(cfg.source, &cfg.station_a, &station_b, cfg.pairs_per_step, &mut r);
            ScanStep {
                b_angle,
                counts,
                correlation: correlation(&counts).ok(),
            }
        })
        .collect();
    Ok(ScanResult::from_steps(steps))
}

/// Total B singles over total A singles.
pub fn singles_asymmetry(result: &ScanResult) -> Result<f64> {
    result
        .singles_ratio
        .ok_or_else(|| Error::config("scan recorded no A singles"))
}

/// (max − min)/mean of the per-step coincidence totals.
pub fn coincidence_modulation(result: &ScanResult) -> f64 {
    result.coincidence_modulation
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChshConfig {
    pub source: SourceModel,
    /// Calibration of A; the angle comes from `a_angles`.
    pub station_a: StationConfig,
    pub station_b: StationConfig,
    /// `[a, a′]`
    pub a_angles: [Angle; 2],
    /// `[b, b′]`
    pub b_angles: [Angle; 2],
    pub pairs_per_setting: u64,
    pub seed: u64,
}

/// Standard CHSH angles `[a, a′]` and `[b, b′]`: (0, π/4) and (π/8, 3π/8).
pub fn standard_chsh_angles() -> ([Angle; 2], [Angle; 2]) {
    (
        [Angle::ZERO, Angle::new(FRAC_PI_4)],
        [Angle::new(FRAC_PI_8), Angle::new(3.0 * FRAC_PI_8)],
    )
}

impl ChshConfig {
    pub fn ideal(t_a: f64, t_b: f64, pairs_per_setting: u64, seed: u64) -> Self {
        let (a_angles, b_angles) = standard_chsh_angles();
        ChshConfig {
            source: SourceModel::IsotropicOrthogonalPairs,
            station_a: StationConfig::ideal(Angle::ZERO, t_a),
            station_b: StationConfig::ideal(Angle::ZERO, t_b),
            a_angles,
            b_angles,
            pairs_per_setting,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.station_a.validate()?;
        self.station_b.validate()?;
        if self.pairs_per_setting == 0 {
            return Err(Error::config("pairs_per_setting must be ≥ 1"));
        }
        Ok(())
    }
}

/// Setting order used throughout: (a,b), (a,b′), (a′,b), (a′,b′).
pub const CHSH_SETTINGS: [(usize, usize); 4] = [(0, 0), (0, 1), (1, 0), (1, 1)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChshSetting {
    pub a: Angle,
    pub b: Angle,
    pub counts: CountTable,
    pub correlation: Correlation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChshReport {
    /// In [`CHSH_SETTINGS`] order.
    pub settings: [ChshSetting; 4],
    pub s: f64,
    pub s_std_error: f64,
}

impl ChshReport {
    /// Builds the report from four tables in [`CHSH_SETTINGS`] order.
    pub fn from_tables(a_angles: [Angle; 2], b_angles: [Angle; 2], tables: [CountTable; 4]) -> Result<Self> {
        let mut settings = Vec::with_capacity(4);
        for (&(i, j), counts) in CHSH_SETTINGS.iter().zip(tables) {
            settings.push(ChshSetting {
                a: a_angles[i],
                b: b_angles[j],
                counts,
                correlation: correlation(&counts)?,
            });
        }
        let settings: [ChshSetting; 4] = settings.try_into().expect("four settings");
        let e: Vec<f64> = settings.iter().map(|s| s.correlation.e).collect();
        let s_std_error = settings
            .iter()
            .map(|s| s.correlation.std_error.powi(2))
            .sum::<f64>()
            .sqrt();
        Ok(ChshReport {
            s: chsh(e[0], e[1], e[2], e[3]),
            s_std_error,
            settings,
        })
    }

    pub fn abs_s(&self) -> f64 {
        self.s.abs()
    }

    pub fn e_values(&self) -> [f64; 4] {
        [0, 1, 2, 3].map(|k| self.settings[k].correlation.e)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "a_rad,b_rad,n_pp,n_pm,n_mp,n_mm,singles_a,singles_b,E,std_error")?;
        for s in &self.settings {
            let c = &s.counts;
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                s.a,
                s.b,
                c.n_pp,
                c.n_pm,
                c.n_mp,
                c.n_mm,
                c.singles_a,
                c.singles_b,
                s.correlation.e,
                s.correlation.std_error
            )?;
        }
        Ok(())
    }
}

pub fn run_chsh(cfg: &ChshConfig) -> Result<ChshReport> {
    cfg.validate()?;
    let tables: Vec<CountTable> = CHSH_SETTINGS
        .par_iter()
        .enumerate()
        .map(|(k, &(i, j))| {
            let mut r = rng::stream(cfg.seed, k as u64);
            simulate_pairs(
                cfg.source,
                &cfg.station_a.with_angle(cfg.a_angles[i]),
                &cfg.station_b.with_angle(cfg.b_angles[j]),
                cfg.pairs_per_setting,
                &mut r,
            )
        })
        .collect();
    ChshReport::from_tables(cfg.a_angles, cfg.b_angles, tables.try_into().expect("four tables"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathologyConfig {
    pub basis: Angle,
    pub alpha: Angle,
    pub station_a: StationConfig,
    pub station_b: StationConfig,
    pub b_angles: Vec<Angle>,
    pub pairs_per_step: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathologyReport {
    pub fixed_basis: ScanResult,
    /// Same scan with the isotropic source, for reference.
    pub isotropic: ScanResult,
    pub a_double_rate: f64,
    pub a_miss_rate: f64,
    pub a_single_rate: f64,
    /// Largest |match probability difference| over steps where both scans
    /// had coincidences; `None` if there were no such steps.
    pub max_match_deviation: Option<f64>,
}

/// B-scan with a fixed-basis source, compared against the isotropic source.
pub fn pathology_probe(cfg: &PathologyConfig) -> Result<PathologyReport> {
    let scan = |source| ScanConfig {
        source,
        station_a: cfg.station_a.with_angle(cfg.alpha),
        station_b: cfg.station_b,
        b_angles: cfg.b_angles.clone(),
        pairs_per_step: cfg.pairs_per_step,
        seed: cfg.seed,
    };
    let fixed_basis = run_scan(&scan(SourceModel::FixedBasisHV { basis: cfg.basis }))?;
    let isotropic = run_scan(&scan(SourceModel::IsotropicOrthogonalPairs))?;
    let totals = fixed_basis.totals();
    let n = totals.n_pairs as f64;
    let max_match_deviation = fixed_basis
        .steps
        .iter()
        .zip(&isotropic.steps)
        .filter_map(|(f, i)| Some((f.correlation?.match_probability - i.correlation?.match_probability).abs()))
        .reduce(f64::max);
    Ok(PathologyReport {
        a_double_rate: totals.doubles_a as f64 / n,
        a_miss_rate: totals.misses_a as f64 / n,
        a_single_rate: totals.singles_a as f64 / n,
        max_match_deviation,
        fixed_basis,
        isotropic,
    })
}
