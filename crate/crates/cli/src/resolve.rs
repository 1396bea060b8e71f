//! Flags + config file → a fully resolved [`RunConfig`].
//!
//! Precedence: flag, then config file, then preset (scan only), then the
//! documented default. Detection thresholds have no default outside
//! `pathology`.

use std::path::{Path, PathBuf};

use eprb_core::disks::{build_param_disks, KnowledgePolicy};
use eprb_core::eventio::GeneratorConfig;
use eprb_core::optics::{SourceModel, StationConfig};
use eprb_core::scan::{
    standard_chsh_angles, uniform_b_angles, ChshConfig, PathologyConfig, Preset, ScanConfig, DEFAULT_PAIRS_PER_STEP,
    DEFAULT_STEPS,
};
use eprb_core::{Angle, SingletKind};

use crate::args::{
    Cli, Command, DiskDemoArgs, EventsCommand, EventsGenArgs, EventsMatchArgs, Figure, Kind, PolicyName, ScanArgs,
    SettingArgs, SourceArgs, SourceName, StationArgs,
};
use crate::file::{file_angle, FileConfig, StationFile};
use crate::run::{DiskDemoConfig, DiskSetup, EventsGenConfig, EventsMatchConfig, RunConfig, ScanRun};
use crate::Usage;

pub const DEFAULT_OUT: &str = "out";
pub const DEFAULT_DISK_TRIALS: u64 = 1_000_000;
pub const DEFAULT_PATHOLOGY_PAIRS: u64 = 20_000;
pub const DEFAULT_PATHOLOGY_THRESHOLD: f64 = 0.5;
pub const DEFAULT_RATE: f64 = 1e4;
pub const DEFAULT_JITTER_NS: f64 = 10.0;
pub const DEFAULT_DURATION: f64 = 1.0;

pub enum Plan {
    Run { seed: u64, out: PathBuf, run: RunConfig },
    Replay { manifest: PathBuf, out: PathBuf },
}

pub fn plan(cli: &Cli) -> Result<Plan, Usage> {
    if let Command::Replay(r) = &cli.command {
        if cli.global.seed.is_some() || cli.global.config.is_some() {
            return Err(Usage("replay takes its seed and config from the manifest".into()));
        }
        let out = cli.global.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
        return Ok(Plan::Replay {
            manifest: r.manifest.clone(),
            out,
        });
    }
    let file = match &cli.global.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let seed = cli.global.seed.or(file.seed).unwrap_or(0);
    let out = cli
        .global
        .out
        .clone()
        .or_else(|| file.out.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let run = match &cli.command {
        Command::DiskDemo(a) => disk_demo(a, &file, seed)?,
        Command::Scan(a) => scan(a, &file, seed)?,
        Command::Chsh(a) => chsh(a, &file, seed)?,
        Command::Pathology(a) => pathology(a, &file, seed)?,
        Command::Events(EventsCommand::Gen(a)) => events_gen(a, &file, seed)?,
        Command::Events(EventsCommand::Match(a)) => events_match(a, &file)?,
        Command::Replay(_) => unreachable!("handled above"),
    };
    Ok(Plan::Run { seed, out, run })
}

fn core(e: eprb_core::Error) -> Usage {
    Usage(e.to_string())
}

fn pick_angle(flag: Option<Angle>, file: &FileConfig, key: &str) -> Result<Option<Angle>, Usage> {
    let spec = match key {
        "theta" => &file.theta,
        "alpha" => &file.alpha,
        "beta" => &file.beta,
        "basis" => &file.basis,
        "assumed" => &file.assumed,
        "assumed_a" => &file.assumed_a,
        "assumed_b" => &file.assumed_b,
        "a1" => &file.a1,
        "a2" => &file.a2,
        "b1" => &file.b1,
        "b2" => &file.b2,
        _ => unreachable!("unknown angle key {key}"),
    };
    Ok(match flag {
        Some(a) => Some(a),
        None => file_angle(spec, key)?,
    })
}

fn positive<T: PartialOrd + Default + std::fmt::Display>(value: T, what: &str) -> Result<T, Usage> {
    if value > T::default() {
        Ok(value)
    } else {
        Err(Usage(format!("{what} must be positive, got {value}")))
    }
}

struct StationInputs<'a> {
    side: &'a str,
    threshold: Option<f64>,
    sigma: Option<f64>,
    eff: Option<f64>,
    file: &'a StationFile,
}

fn station(s: StationInputs, fallback_threshold: Option<f64>) -> Result<StationConfig, Usage> {
    let threshold = s.threshold.or(s.file.threshold).or(fallback_threshold).ok_or_else(|| {
        Usage(format!(
            "no detection threshold for station {}: pass --t{}, set `threshold` under [station_{}] in the config, or use a preset",
            s.side.to_uppercase(),
            s.side,
            s.side
        ))
    })?;
    let cfg = StationConfig {
        angle: Angle::ZERO,
        threshold,
        noise_sigma: s.sigma.or(s.file.noise_sigma).unwrap_or(0.0),
        efficiency: s.eff.or(s.file.efficiency).unwrap_or(1.0),
    };
    cfg.validate()
        .map_err(|e| Usage(format!("station {}: {e}", s.side.to_uppercase())))?;
    Ok(cfg)
}

fn stations(
    a: &StationArgs,
    file: &FileConfig,
    fallback: (Option<f64>, Option<f64>),
) -> Result<(StationConfig, StationConfig), Usage> {
    let sa = station(
        StationInputs {
            side: "a",
            threshold: a.ta,
            sigma: a.sigma_a,
            eff: a.eff_a,
            file: &file.station_a,
        },
        fallback.0,
    )?;
    let sb = station(
        StationInputs {
            side: "b",
            threshold: a.tb,
            sigma: a.sigma_b,
            eff: a.eff_b,
            file: &file.station_b,
        },
        fallback.1,
    )?;
    Ok((sa, sb))
}

fn source(a: &SourceArgs, file: &FileConfig) -> Result<SourceModel, Usage> {
    let basis = pick_angle(a.basis, file, "basis")?.unwrap_or(Angle::ZERO);
    Ok(match a.source.or(file.source).unwrap_or(SourceName::Isotropic) {
        SourceName::Isotropic => SourceModel::IsotropicOrthogonalPairs,
        SourceName::FixedBasis => SourceModel::FixedBasisHV { basis },
    })
}

fn settings(a: &SettingArgs, file: &FileConfig) -> Result<([Angle; 2], [Angle; 2]), Usage> {
    let (sa, sb) = standard_chsh_angles();
    Ok((
        [
            pick_angle(a.a1, file, "a1")?.unwrap_or(sa[0]),
            pick_angle(a.a2, file, "a2")?.unwrap_or(sa[1]),
        ],
        [
            pick_angle(a.b1, file, "b1")?.unwrap_or(sb[0]),
            pick_angle(a.b2, file, "b2")?.unwrap_or(sb[1]),
        ],
    ))
}

fn policy(name: PolicyName, assumed: Option<Angle>, side: &str) -> Result<KnowledgePolicy, Usage> {
    Ok(match name {
        PolicyName::BothKnown => KnowledgePolicy::BothKnown,
        PolicyName::AssumeZero => KnowledgePolicy::AssumeZero,
        PolicyName::AssumeFixed => KnowledgePolicy::AssumeFixed(assumed.ok_or_else(|| {
            Usage(format!(
                "assume-fixed for side {side} needs --assumed or --assumed-{}",
                side.to_lowercase()
            ))
        })?),
        PolicyName::AssumeRandom => KnowledgePolicy::AssumeRandom,
        PolicyName::IntegrateOver => KnowledgePolicy::IntegrateOver,
    })
}

fn disk_demo(a: &DiskDemoArgs, file: &FileConfig, seed: u64) -> Result<RunConfig, Usage> {
    let figure = match a.figure {
        Some(f) => f,
        None => file
            .figure()?
            .ok_or_else(|| Usage("disk-demo needs --figure (1-5 or special)".into()))?,
    };
    let kind: SingletKind = a.kind.or(file.kind).unwrap_or(Kind::Anticorrelated).into();
    let n = positive(a.n.or(file.n).unwrap_or(DEFAULT_DISK_TRIALS), "--n")?;
    let require = |v: Option<Angle>, flag: &str| v.ok_or_else(|| Usage(format!("this figure needs --{flag}")));
    let theta = pick_angle(a.theta, file, "theta")?;
    let alpha = pick_angle(a.alpha, file, "alpha")?;
    let beta = pick_angle(a.beta, file, "beta")?;
    let setup = match figure {
        Figure::Joint => DiskSetup::Joint {
            theta: require(theta, "theta")?,
            kind,
        },
        Figure::SplitShared => DiskSetup::SplitShared {
            theta: require(theta, "theta")?,
            kind,
        },
        Figure::SplitIndependent => DiskSetup::SplitIndependent {
            theta: require(theta, "theta")?,
            kind,
        },
        Figure::SharedParams => DiskSetup::SharedParams {
            disks: build_param_disks(
                require(alpha, "alpha")?,
                require(beta, "beta")?,
                KnowledgePolicy::BothKnown,
                KnowledgePolicy::BothKnown,
                kind,
            ),
        },
        Figure::UnsharedParams => {
            let both = a.policy.or(file.policy);
            let pa = a.policy_a.or(file.policy_a).or(both);
            let pb = a.policy_b.or(file.policy_b).or(both);
            let (Some(pa), Some(pb)) = (pa, pb) else {
                return Err(Usage("figure 5 needs --policy (or --policy-a and --policy-b)".into()));
            };
            let assumed = pick_angle(a.assumed, file, "assumed")?;
            let assumed_a = pick_angle(a.assumed_a, file, "assumed_a")?.or(assumed);
            let assumed_b = pick_angle(a.assumed_b, file, "assumed_b")?.or(assumed);
            DiskSetup::UnsharedParams {
                disks: build_param_disks(
                    require(alpha, "alpha")?,
                    require(beta, "beta")?,
                    policy(pa, assumed_a, "A")?,
                    policy(pb, assumed_b, "B")?,
                    kind,
                ),
            }
        }
        Figure::Special => {
            if kind != SingletKind::Anticorrelated {
                return Err(Usage("the special construction is anticorrelated only".into()));
            }
            DiskSetup::Special {
                alpha: require(alpha, "alpha")?,
            }
        }
    };
    Ok(RunConfig::DiskDemo(DiskDemoConfig { setup, n, seed }))
}

fn scan(a: &ScanArgs, file: &FileConfig, seed: u64) -> Result<RunConfig, Usage> {
    let preset: Option<Preset> = a.preset.or(file.preset).map(Into::into);
    let calibration = preset.map(Preset::calibration);
    let (mut station_a, station_b) = stations(&a.stations, file, (calibration.map(|c| c.0), calibration.map(|c| c.1)))?;
    station_a.angle = pick_angle(a.alpha, file, "alpha")?
        .or(calibration.map(|c| c.2))
        .unwrap_or(Angle::ZERO);
    let steps = a.steps.or(file.steps).unwrap_or(DEFAULT_STEPS);
    if steps < 2 {
        return Err(Usage(format!("--steps must be at least 2, got {steps}")));
    }
    let cfg = ScanConfig {
        source: source(&a.source, file)?,
        station_a,
        station_b,
        b_angles: uniform_b_angles(steps),
        pairs_per_step: positive(a.pairs.or(file.pairs).unwrap_or(DEFAULT_PAIRS_PER_STEP), "--pairs")?,
        seed,
    };
    cfg.validate().map_err(core)?;
    Ok(RunConfig::Scan(ScanRun { preset, scan: cfg }))
}

fn chsh(a: &crate::args::ChshArgs, file: &FileConfig, seed: u64) -> Result<RunConfig, Usage> {
    let (station_a, station_b) = stations(&a.stations, file, (None, None))?;
    let (a_angles, b_angles) = settings(&a.settings, file)?;
    let cfg = ChshConfig {
        source: source(&a.source, file)?,
        station_a,
        station_b,
        a_angles,
        b_angles,
        pairs_per_setting: positive(a.pairs.or(file.pairs).unwrap_or(DEFAULT_PAIRS_PER_STEP), "--pairs")?,
        seed,
    };
    cfg.validate().map_err(core)?;
    Ok(RunConfig::Chsh(cfg))
}

fn pathology(a: &crate::args::PathologyArgs, file: &FileConfig, seed: u64) -> Result<RunConfig, Usage> {
    let st = StationArgs {
        ta: a.ta,
        tb: a.tb,
        sigma_a: a.sigma_a,
        sigma_b: a.sigma_b,
        eff_a: a.eff_a,
        eff_b: a.eff_b,
    };
    let fallback = Some(DEFAULT_PATHOLOGY_THRESHOLD);
    let (station_a, station_b) = stations(&st, file, (fallback, fallback))?;
    let steps = a.steps.or(file.steps).unwrap_or(DEFAULT_STEPS);
    if steps < 2 {
        return Err(Usage(format!("--steps must be at least 2, got {steps}")));
    }
    Ok(RunConfig::Pathology(PathologyConfig {
        basis: pick_angle(a.basis, file, "basis")?.unwrap_or(Angle::ZERO),
        alpha: pick_angle(a.alpha, file, "alpha")?.unwrap_or(Angle::ZERO),
        station_a,
        station_b,
        b_angles: uniform_b_angles(steps),
        pairs_per_step: positive(a.pairs.or(file.pairs).unwrap_or(DEFAULT_PATHOLOGY_PAIRS), "--pairs")?,
        seed,
    }))
}

fn events_gen(a: &EventsGenArgs, file: &FileConfig, seed: u64) -> Result<RunConfig, Usage> {
    let (station_a, station_b) = stations(&a.stations, file, (None, None))?;
    let (settings_a, settings_b) = settings(&a.settings, file)?;
    let jitter_ns = a.jitter_ns.or(file.jitter_ns).unwrap_or(DEFAULT_JITTER_NS);
    let generator = GeneratorConfig {
        source: source(&a.source, file)?,
        station_a,
        station_b,
        settings_a,
        settings_b,
        mean_rate: a.rate.or(file.rate).unwrap_or(DEFAULT_RATE),
        jitter_sigma: jitter_ns * 1e-9,
    };
    generator.validate().map_err(core)?;
    let duration = a.duration.or(file.duration).unwrap_or(DEFAULT_DURATION);
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Usage(format!("--duration must be positive, got {duration}")));
    }
    Ok(RunConfig::EventsGen(EventsGenConfig {
        generator,
        duration,
        seed,
    }))
}

fn absolute(path: &Path) -> Result<PathBuf, Usage> {
    std::fs::canonicalize(path).map_err(|e| Usage(format!("{}: {e}", path.display())))
}

fn events_match(a: &EventsMatchArgs, file: &FileConfig) -> Result<RunConfig, Usage> {
    let events_a =
        a.a.clone()
            .or_else(|| file.events_a.clone())
            .ok_or_else(|| Usage("events match needs --a <file>".into()))?;
    let events_b =
        a.b.clone()
            .or_else(|| file.events_b.clone())
            .ok_or_else(|| Usage("events match needs --b <file>".into()))?;
    let window_ns = a
        .window
        .or(file.window)
        .ok_or_else(|| Usage("events match needs --window <ns>".into()))?;
    let truth = a.truth.clone().or_else(|| file.truth.clone());
    let mut cfg = EventsMatchConfig {
        events_a: absolute(&events_a)?,
        events_b: absolute(&events_b)?,
        truth: truth.as_deref().map(absolute).transpose()?,
        window_ns,
        inputs: Vec::new(),
    };
    cfg.digest_inputs().map_err(|e| Usage(format!("{e:#}")))?;
    Ok(RunConfig::EventsMatch(cfg))
}
