use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use eprb_core::scan::Preset;
use eprb_core::{Angle, SingletKind};
use serde::{Deserialize, Serialize};

use crate::angle::parse_angle;

#[derive(Debug, Parser)]
#[command(name = "eprb", version, about = "Threshold-detector EPRB simulation lab")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Master RNG seed [default: 0]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory [default: out]
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// TOML config file: flat keys plus [station_a] / [station_b] tables.
    /// Flags override file values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a partitioned-disk preparation (joint, split, parameterized)
    DiskDemo(DiskDemoArgs),
    /// Scan B's analyzer over [0, π] and tabulate coincidences
    Scan(ScanArgs),
    /// CHSH statistic at four analyzer settings
    Chsh(ChshArgs),
    /// Fixed-basis source against the isotropic one
    Pathology(PathologyArgs),
    /// Time-tagged event files
    #[command(subcommand)]
    Events(EventsCommand),
    /// Re-run a command from its manifest and check the outputs match
    Replay(ReplayArgs),
}

#[derive(Debug, Subcommand)]
pub enum EventsCommand {
    /// Generate per-side event files and the true pairing
    Gen(EventsGenArgs),
    /// Window-match two event files into per-setting count tables
    Match(EventsMatchArgs),
}

fn angle(s: &str) -> Result<Angle, String> {
    parse_angle(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    /// Joint disk, one pointer
    #[value(name = "1")]
    Joint,
    /// Split disks, shared λ
    #[value(name = "2")]
    SplitShared,
    /// Split disks, independent λ
    #[value(name = "3")]
    SplitIndependent,
    /// Parameter-dependent disks, both parameters known to both sides
    #[value(name = "4")]
    SharedParams,
    /// Parameter-dependent disks, remote parameter handled by a policy
    #[value(name = "5")]
    UnsharedParams,
    /// B pinned to 0, A's arc offset by π cos²α
    Special,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Anticorrelated,
    Correlated,
}

impl From<Kind> for SingletKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Anticorrelated => SingletKind::Anticorrelated,
            Kind::Correlated => SingletKind::Correlated,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyName {
    BothKnown,
    AssumeZero,
    /// Uses --assumed (or --assumed-a / --assumed-b)
    AssumeFixed,
    AssumeRandom,
    IntegrateOver,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceName {
    /// Uniform polarization, B orthogonal to A
    Isotropic,
    /// Polarization 0 or π/2 relative to --basis
    FixedBasis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PresetName {
    /// Thresholds 0.5 / 0.5
    Figure6,
    /// Thresholds 0.5 / 0.92
    Figure7,
    /// Thresholds 0.5 / 0.75, A at 0
    Figure8Left,
    /// Thresholds 0.5 / 0.75, A at π/4
    Figure8Right,
}

impl From<PresetName> for Preset {
    fn from(p: PresetName) -> Self {
        match p {
            PresetName::Figure6 => Preset::Figure6,
            PresetName::Figure7 => Preset::Figure7,
            PresetName::Figure8Left => Preset::Figure8Left,
            PresetName::Figure8Right => Preset::Figure8Right,
        }
    }
}

/// Detector calibration for both stations. Thresholds have no default.
#[derive(Debug, Clone, Args)]
pub struct StationArgs {
    /// Detection threshold at A, in [0, 1]
    #[arg(long)]
    pub ta: Option<f64>,
    /// Detection threshold at B, in [0, 1]
    #[arg(long)]
    pub tb: Option<f64>,
    /// Gaussian noise σ added to each channel at A [default: 0]
    #[arg(long)]
    pub sigma_a: Option<f64>,
    /// Gaussian noise σ added to each channel at B [default: 0]
    #[arg(long)]
    pub sigma_b: Option<f64>,
    /// Detection efficiency at A, in (0, 1] [default: 1]
    #[arg(long)]
    pub eff_a: Option<f64>,
    /// Detection efficiency at B, in (0, 1] [default: 1]
    #[arg(long)]
    pub eff_b: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SourceArgs {
    /// Photon-pair source [default: isotropic]
    #[arg(long, value_enum)]
    pub source: Option<SourceName>,
    /// Basis angle of the fixed-basis source [default: 0]
    #[arg(long, value_parser = angle, allow_hyphen_values = true)]
    pub basis: Option<Angle>,
}

/// Analyzer settings for CHSH-style runs.
#[derive(Debug, Clone, Args)]
pub struct SettingArgs {
    /// A's first setting [default: 0]
    #[arg(long, value_parser = angle, allow_hyphen_values = true)]
    pub a1: Option<Angle>,
    /// A's second setting [default: pi/4]
    #[arg(long, value_parser = angle, allow_hyphen_values = true)]
    pub a2: Option<Angle>,
    /// B's first setting [default: pi/8]
    #[arg(long, value_parser = angle, allow_hyphen_values = true)]
    pub b1: Option<Angle>,
    /// B's second setting [default: 3pi/8]
    #[arg(long, value_parser = angle, allow_hyphen_values = true)]
    pub b2: Option<Angle>,
}

#[derive(Debug, Clone, Args)]
pub struct DiskDemoArgs {
    /// Which preparation to sample
    #[arg(long, value_enum)]
    pub figure: Option<Figure>,
    /// Relative angle θ for figures 1-3 (radians or pi expression)
    #[arg(long, value_parser = angle, allow_hyphen_values = true)]
    pub theta: Option<Angle>,
    /// A's analyzer angle for figures 4, 5 and special
    #[arg(long, value_parser = angle, allow_hyphen_values = true)]
    pub alpha: Option<Angle>,
    /// B's analyzer angle for figures 4 and 5
    #[arg(long, value_parser = angle, allow_hyphen_values = true)]
    pub beta: Option<Angle>,
    /// Singlet kind [default: anticorrelated]
    #[arg(long, value_enum)]
    pub kind: Option<Kind>,
    /// Number of trials [default: 1000000]
    #[arg(long)]
    pub n: Option<u64>,
    /// Knowledge policy for both sides (figure 5)
    #[arg(long, value_enum)]
    pub policy: Option<PolicyName>,
    /// A's policy for the unseen β (overrides --policy)
    #[arg(long, value_enum)]
    pub policy_a: Option<PolicyName>,
    /// B's policy for the unseen α (overrides --policy)
    #[arg(long, value_enum)]
    pub policy_b: Option<PolicyName>,
    /// Assumed remote angle for assume-fixed on both sides
    #[arg(long, value_parser = angle, allow_hyphen_values = true)]
    pub assumed: Option<Angle>,
    /// A's assumed β under assume-fixed (overrides --assumed)
    #[arg(long, value_parser = angle, allow_hyphen_values = true)]
    pub assumed_a: Option<Angle>,
    /// B's assumed α under assume-fixed (overrides --assumed)
    #[arg(long, value_parser = angle, allow_hyphen_values = true)]
    pub assumed_b: Option<Angle>,
}

#[derive(Debug, Clone, Args)]
pub struct ScanArgs {
    /// Bind thresholds and A's angle to a figure's calibration. Explicit
    /// flags and config values take precedence.
    #[arg(long, value_enum)]
    pub preset: Option<PresetName>,
    #[command(flatten)]
    pub stations: StationArgs,
    #[command(flatten)]
    pub source: SourceArgs,
    /// A's analyzer angle [default: 0, or the preset's]
    #[arg(long, value_parser = angle, allow_hyphen_values = true)]
    pub alpha: Option<Angle>,
    /// Number of B angles, evenly spaced over [0, π] [default: 33]
    #[arg(long)]
    pub steps: Option<usize>,
    /// Pairs per B angle [default: 100000]
    #[arg(long)]
    pub pairs: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct ChshArgs {
    #[command(flatten)]
    pub stations: StationArgs,
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub settings: SettingArgs,
    /// Pairs per setting [default: 100000]
    #[arg(long)]
    pub pairs: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct PathologyArgs {
    /// Basis angle of the fixed-basis source [default: 0]
    #[arg(long, value_parser = angle, allow_hyphen_values = true)]
    pub basis: Option<Angle>,
    /// A's analyzer angle [default: 0]
    #[arg(long, value_parser = angle, allow_hyphen_values = true)]
    pub alpha: Option<Angle>,
    /// Detection threshold at A [default: 0.5]
    #[arg(long)]
    pub ta: Option<f64>,
    /// Detection threshold at B [default: 0.5]
    #[arg(long)]
    pub tb: Option<f64>,
    /// Gaussian noise σ at A [default: 0]
    #[arg(long)]
    pub sigma_a: Option<f64>,
    /// Gaussian noise σ at B [default: 0]
    #[arg(long)]
    pub sigma_b: Option<f64>,
    /// Detection efficiency at A [default: 1]
    #[arg(long)]
    pub eff_a: Option<f64>,
    /// Detection efficiency at B [default: 1]
    #[arg(long)]
    pub eff_b: Option<f64>,
    /// Number of B angles over [0, π] [default: 33]
    #[arg(long)]
    pub steps: Option<usize>,
    /// Pairs per B angle [default: 20000]
    #[arg(long)]
    pub pairs: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct EventsGenArgs {
    #[command(flatten)]
    pub stations: StationArgs,
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub settings: SettingArgs,
    /// Mean pair emission rate, per second [default: 10000]
    #[arg(long)]
    pub rate: Option<f64>,
    /// Timing jitter σ per side, nanoseconds [default: 10]
    #[arg(long)]
    pub jitter_ns: Option<f64>,
    /// Emission time span, seconds [default: 1]
    #[arg(long)]
    pub duration: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct EventsMatchArgs {
    /// Side A event file
    #[arg(long)]
    pub a: Option<PathBuf>,
    /// Side B event file
    #[arg(long)]
    pub b: Option<PathBuf>,
    /// Coincidence window, nanoseconds
    #[arg(long)]
    pub window: Option<u64>,
    /// Ground-truth pairing to score the matches against
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    /// Manifest written by an earlier run
    pub manifest: PathBuf,
}
