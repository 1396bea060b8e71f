//! Resolved run configurations and their execution.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use eprb_core::disks::{
    build_bell_special, build_singlet_disk, sample_joint, sample_param_disks, sample_separated, shared_lambda_pmf,
    split, ParamDisks, SamplingMode,
};
use eprb_core::domain::{chsh, correlation, Correlation};
use eprb_core::eventio::{
    generate_streams, match_coincidences, read_events, read_truth, write_events, write_truth, GeneratorConfig,
};
use eprb_core::scan::{
    pathology_probe, run_chsh, run_scan, ChshConfig, PathologyConfig, Preset, ScanConfig, ScanResult, CHSH_SETTINGS,
};
use eprb_core::{Angle, CountTable, JointPmf, Outcome, SingletKind};
use serde::{Deserialize, Serialize};

use crate::manifest::{config_hash, sha256_file, FileDigest, Manifest};

pub const SUMMARY_FILE: &str = "summary.txt";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", content = "config", rename_all = "kebab-case")]
pub enum RunConfig {
    DiskDemo(DiskDemoConfig),
    Scan(ScanRun),
    Chsh(ChshConfig),
    Pathology(PathologyConfig),
    EventsGen(EventsGenConfig),
    EventsMatch(EventsMatchConfig),
}

impl RunConfig {
    pub fn name(&self) -> &'static str {
        match self {
            RunConfig::DiskDemo(_) => "disk-demo",
            RunConfig::Scan(_) => "scan",
            RunConfig::Chsh(_) => "chsh",
            RunConfig::Pathology(_) => "pathology",
            RunConfig::EventsGen(_) => "events-gen",
            RunConfig::EventsMatch(_) => "events-match",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "figure", rename_all = "kebab-case")]
pub enum DiskSetup {
    Joint { theta: Angle, kind: SingletKind },
    SplitShared { theta: Angle, kind: SingletKind },
    SplitIndependent { theta: Angle, kind: SingletKind },
    SharedParams { disks: ParamDisks },
    UnsharedParams { disks: ParamDisks },
    Special { alpha: Angle },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiskDemoConfig {
    pub setup: DiskSetup,
    pub n: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRun {
    pub preset: Option<Preset>,
    pub scan: ScanConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventsGenConfig {
    pub generator: GeneratorConfig,
    /// Seconds of emission.
    pub duration: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventsMatchConfig {
    pub events_a: PathBuf,
    pub events_b: PathBuf,
    pub truth: Option<PathBuf>,
    pub window_ns: u64,
    /// Digests of the input files at the time of the original run.
    pub inputs: Vec<FileDigest>,
}

impl EventsMatchConfig {
    pub fn input_paths(&self) -> Vec<&Path> {
        let mut v = vec![self.events_a.as_path(), self.events_b.as_path()];
        v.extend(self.truth.as_deref());
        v
    }

    pub fn digest_inputs(&mut self) -> Result<()> {
        self.inputs = self
            .input_paths()
            .into_iter()
            .map(|p| FileDigest::of(p, p.to_path_buf()))
            .collect::<Result<_>>()?;
        Ok(())
    }
}

struct Produced {
    files: Vec<&'static str>,
    summary: String,
}

/// Runs `run`, writes its outputs, summary and manifest into `out`.
pub fn execute(run: &RunConfig, seed: u64, out: &Path) -> Result<Manifest> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let produced = match run {
        RunConfig::DiskDemo(c) => disk_demo(c, out)?,
        RunConfig::Scan(c) => scan(c, out)?,
        RunConfig::Chsh(c) => chsh_run(c, out)?,
        RunConfig::Pathology(c) => pathology(c, out)?,
        RunConfig::EventsGen(c) => events_gen(c, out)?,
        RunConfig::EventsMatch(c) => events_match(c, out)?,
    };
    let summary = format!(
        "command = {}\nseed = {seed}\nconfig_hash = {}\n{}",
        run.name(),
        config_hash(run),
        produced.summary
    );
    write_file(&out.join(SUMMARY_FILE), summary.as_bytes())?;
    print!("{summary}");
    let mut files = produced.files;
    files.push(SUMMARY_FILE);
    let manifest = Manifest::new(seed, run.clone(), out, &files)?;
    manifest.write(out)?;
    Ok(manifest)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn pmf_line(p: &JointPmf) -> String {
    format!("p_pp={} p_pm={} p_mp={} p_mm={}", p.p_pp, p.p_pm, p.p_mp, p.p_mm)
}

fn disk_demo(cfg: &DiskDemoConfig, out: &Path) -> Result<Produced> {
    let (n, seed) = (cfg.n, cfg.seed);
    let split_tables = |a: &eprb_core::disks::SplitDisk, b: &eprb_core::disks::SplitDisk| {
        format!("{}{}", a.to_table("A"), b.to_table("B"))
    };
    let (label, table, counts, exact, target) = match &cfg.setup {
        DiskSetup::Joint { theta, kind } => {
            let d = build_singlet_disk(*theta, *kind);
            (
                "1 joint",
                d.to_string(),
                sample_joint(&d, n, seed),
                d.joint_pmf(),
                JointPmf::singlet(*theta, *kind),
            )
        }
        DiskSetup::SplitShared { theta, kind } => {
            let (a, b) = split(&build_singlet_disk(*theta, *kind));
            let counts = sample_separated(&a, &b, SamplingMode::SharedLambda, n, seed);
            (
                "2 split, shared λ",
                split_tables(&a, &b),
                counts,
                shared_lambda_pmf(&a, &b),
                JointPmf::singlet(*theta, *kind),
            )
        }
        DiskSetup::SplitIndependent { theta, kind } => {
            let (a, b) = split(&build_singlet_disk(*theta, *kind));
            let counts = sample_separated(&a, &b, SamplingMode::IndependentLambdas, n, seed);
            let exact = JointPmf::product(a.plus_fraction(), b.plus_fraction());
            (
                "3 split, independent λ",
                split_tables(&a, &b),
                counts,
                exact,
                JointPmf::singlet(*theta, *kind),
            )
        }
        DiskSetup::SharedParams { disks } | DiskSetup::UnsharedParams { disks } => {
            let label = if matches!(cfg.setup, DiskSetup::SharedParams { .. }) {
                "4 shared parameters"
            } else {
                "5 unshared parameters"
            };
            let table = match disks.deterministic_splits() {
                Some((a, b)) => split_tables(&a, &b),
                None => "# disks rebuilt every trial from a uniform guess of the unseen angle\n".to_string(),
            };
            (
                label,
                table,
                sample_param_disks(disks, n, seed),
                disks.expected_pmf(256),
                disks.target(),
            )
        }
        DiskSetup::Special { alpha } => {
            let (a, b) = build_bell_special(*alpha);
            let counts = sample_separated(&a, &b, SamplingMode::SharedLambda, n, seed);
            let target = JointPmf::singlet(*alpha, SingletKind::Anticorrelated);
            (
                "special",
                split_tables(&a, &b),
                counts,
                shared_lambda_pmf(&a, &b),
                target,
            )
        }
    };
    let empirical = counts.empirical_pmf()?;

    write_file(&out.join("disk.txt"), table.as_bytes())?;
    let mut w = create(&out.join("counts.csv"))?;
    writeln!(w, "outcome_a,outcome_b,count,frequency,target")?;
    for (a, b) in [
        (Outcome::Plus, Outcome::Plus),
        (Outcome::Plus, Outcome::Minus),
        (Outcome::Minus, Outcome::Plus),
        (Outcome::Minus, Outcome::Minus),
    ] {
        writeln!(
            w,
            "{a},{b},{},{},{}",
            counts.cell(a, b),
            empirical.get(a, b),
            target.get(a, b)
        )?;
    }
    w.flush()?;

    let mut s = String::new();
    writeln!(s, "figure = {label}")?;
    writeln!(s, "n = {n}")?;
    writeln!(s, "target = {}", pmf_line(&target))?;
    writeln!(s, "exact = {}", pmf_line(&exact))?;
    writeln!(s, "empirical = {}", pmf_line(&empirical))?;
    writeln!(s, "tv_target = {}", empirical.total_variation(&target))?;
    writeln!(s, "tv_exact = {}", empirical.total_variation(&exact))?;
    writeln!(
        s,
        "tv_marginal_product = {}",
        empirical.total_variation(&target.marginal_product())
    )?;
    Ok(Produced {
        files: vec!["disk.txt", "counts.csv"],
        summary: s,
    })
}

fn or_undefined(x: Option<f64>) -> String {
    x.map_or_else(|| "undefined".to_string(), |v| v.to_string())
}

fn write_scan_csv(result: &ScanResult, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    result.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn scan(cfg: &ScanRun, out: &Path) -> Result<Produced> {
    let result = run_scan(&cfg.scan)?;
    write_scan_csv(&result, &out.join("scan.csv"))?;
    let c = &cfg.scan;
    let mut s = String::new();
    if let Some(p) = cfg.preset {
        writeln!(s, "preset = {}", serde_json::to_value(p)?.as_str().unwrap_or_default())?;
    }
    writeln!(s, "threshold_a = {}", c.station_a.threshold)?;
    writeln!(s, "threshold_b = {}", c.station_b.threshold)?;
    writeln!(s, "alpha = {}", c.station_a.angle)?;
    writeln!(s, "steps = {}", c.b_angles.len())?;
    writeln!(s, "pairs_per_step = {}", c.pairs_per_step)?;
    writeln!(s, "singles_ratio = {}", or_undefined(result.singles_ratio))?;
    writeln!(s, "coincidence_modulation = {}", result.coincidence_modulation)?;
    Ok(Produced {
        files: vec!["scan.csv"],
        summary: s,
    })
}

fn chsh_run(cfg: &ChshConfig, out: &Path) -> Result<Produced> {
    let report = run_chsh(cfg)?;
    let mut w = create(&out.join("chsh.csv"))?;
    report.write_csv(&mut w)?;
    w.flush()?;
    let mut s = String::new();
    writeln!(s, "threshold_a = {}", cfg.station_a.threshold)?;
    writeln!(s, "threshold_b = {}", cfg.station_b.threshold)?;
    writeln!(s, "pairs_per_setting = {}", cfg.pairs_per_setting)?;
    for x in &report.settings {
        writeln!(
            s,
            "E({}, {}) = {} ± {}",
            x.a, x.b, x.correlation.e, x.correlation.std_error
        )?;
    }
    writeln!(s, "S = {}", report.s)?;
    writeln!(s, "abs_S = {}", report.abs_s())?;
    writeln!(s, "S_std_error = {}", report.s_std_error)?;
    Ok(Produced {
        files: vec!["chsh.csv"],
        summary: s,
    })
}

fn pathology(cfg: &PathologyConfig, out: &Path) -> Result<Produced> {
    let report = pathology_probe(cfg)?;
    let mut w = create(&out.join("pathology.csv"))?;
    let mut header_done = false;
    for (label, result) in [("fixed-basis", &report.fixed_basis), ("isotropic", &report.isotropic)] {
        let mut buf = Vec::new();
        result.write_csv(&mut buf)?;
        let text = String::from_utf8(buf)?;
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        if !header_done {
            writeln!(w, "source,{header}")?;
            header_done = true;
        }
        for line in lines {
            writeln!(w, "{label},{line}")?;
        }
    }
    w.flush()?;
    let mut s = String::new();
    writeln!(s, "basis = {}", cfg.basis)?;
    writeln!(s, "alpha = {}", cfg.alpha)?;
    writeln!(s, "threshold_a = {}", cfg.station_a.threshold)?;
    writeln!(s, "noise_sigma_a = {}", cfg.station_a.noise_sigma)?;
    writeln!(s, "a_double_rate = {}", report.a_double_rate)?;
    writeln!(s, "a_miss_rate = {}", report.a_miss_rate)?;
    writeln!(s, "a_single_rate = {}", report.a_single_rate)?;
    writeln!(s, "max_match_deviation = {}", or_undefined(report.max_match_deviation))?;
    Ok(Produced {
        files: vec!["pathology.csv"],
        summary: s,
    })
}

fn events_gen(cfg: &EventsGenConfig, out: &Path) -> Result<Produced> {
    let g = generate_streams(&cfg.generator, cfg.duration, cfg.seed)?;
    write_events(&out.join("events_a.csv"), &g.a)?;
    write_events(&out.join("events_b.csv"), &g.b)?;
    write_truth(&out.join("truth.csv"), &g.truth)?;
    let mut s = String::new();
    writeln!(s, "pairs_emitted = {}", g.n_pairs)?;
    writeln!(s, "records_a = {}", g.a.len())?;
    writeln!(s, "records_b = {}", g.b.len())?;
    writeln!(s, "doubles_a = {}", g.doubles_a)?;
    writeln!(s, "doubles_b = {}", g.doubles_b)?;
    writeln!(s, "true_pairs = {}", g.truth.len())?;
    Ok(Produced {
        files: vec!["events_a.csv", "events_b.csv", "truth.csv"],
        summary: s,
    })
}

fn events_match(cfg: &EventsMatchConfig, out: &Path) -> Result<Produced> {
    for recorded in &cfg.inputs {
        let now = sha256_file(&recorded.path)?;
        if now != recorded.sha256 {
            bail!(
                "input {} has changed since the manifest was written",
                recorded.path.display()
            );
        }
    }
    let a = read_events(&cfg.events_a)?;
    let b = read_events(&cfg.events_b)?;
    let m = match_coincidences(&a, &b, cfg.window_ns)?;

    let tables = m.chsh_tables();
    let corr: Vec<Option<Correlation>> = tables.iter().map(|t| correlation(t).ok()).collect();
    let mut w = create(&out.join("matched.csv"))?;
    writeln!(
        w,
        "setting_a,setting_b,n_pp,n_pm,n_mp,n_mm,singles_a,singles_b,coincidences,E,std_error"
    )?;
    for ((&(i, j), t), c) in CHSH_SETTINGS.iter().zip(&tables).zip(&corr) {
        let (e, se) = match c {
            Some(c) => (c.e.to_string(), c.std_error.to_string()),
            None => (String::new(), String::new()),
        };
        writeln!(
            w,
            "{i},{j},{},{},{},{},{},{},{},{e},{se}",
            t.n_pp,
            t.n_pm,
            t.n_mp,
            t.n_mm,
            t.singles_a,
            t.singles_b,
            t.coincidences()
        )?;
    }
    w.flush()?;
    let mut w = create(&out.join("pairs.csv"))?;
    writeln!(w, "index_a,index_b")?;
    for (i, j) in &m.pairs {
        writeln!(w, "{i},{j}")?;
    }
    w.flush()?;

    let mut s = String::new();
    writeln!(s, "events_a = {}", cfg.events_a.display())?;
    writeln!(s, "events_b = {}", cfg.events_b.display())?;
    writeln!(s, "window_ns = {}", cfg.window_ns)?;
    writeln!(s, "records_a = {}", a.len())?;
    writeln!(s, "records_b = {}", b.len())?;
    writeln!(s, "matched = {}", m.pairs.len())?;
    let mut total = CountTable::default();
    for ((&(i, j), t), c) in CHSH_SETTINGS.iter().zip(&tables).zip(&corr) {
        total.merge(&CountTable::from_cells(t.n_pp, t.n_pm, t.n_mp, t.n_mm));
        writeln!(s, "E[{i}{j}] = {}", or_undefined(c.map(|c| c.e)))?;
    }
    let defined: Option<Vec<Correlation>> = corr.iter().copied().collect();
    match defined {
        Some(c) => {
            let se = c.iter().map(|c| c.std_error.powi(2)).sum::<f64>().sqrt();
            writeln!(s, "S = {}", chsh(c[0].e, c[1].e, c[2].e, c[3].e))?;
            writeln!(s, "S_std_error = {se}")?;
        }
        None => writeln!(s, "S = undefined")?,
    }
    if let Some(path) = &cfg.truth {
        let truth = read_truth(path)?;
        let (recovered, accidental) = m.score(&truth);
        writeln!(s, "true_pairs = {}", truth.len())?;
        writeln!(s, "recovered_fraction = {recovered}")?;
        writeln!(s, "accidental_fraction = {accidental}")?;
    }
    Ok(Produced {
        files: vec!["matched.csv", "pairs.csv"],
        summary: s,
    })
}

/// Re-runs the manifest's command into `out` and checks every recorded
/// output against its digest.
pub fn replay(manifest_path: &Path, out: &Path) -> Result<Manifest> {
    let original = Manifest::read(manifest_path)?;
    if original.config_hash != config_hash(&original.run) {
        bail!(
            "manifest {} does not match its own config hash",
            manifest_path.display()
        );
    }
    if original.tool_version != crate::manifest::TOOL_VERSION {
        eprintln!(
            "warning: manifest written by version {}, replaying with {}",
            original.tool_version,
            crate::manifest::TOOL_VERSION
        );
    }
    let fresh = execute(&original.run, original.seed, out)?;
    let differing: Vec<String> = original
        .outputs
        .iter()
        .filter(|o| !fresh.outputs.contains(o))
        .map(|o| o.path.display().to_string())
        .collect();
    if !differing.is_empty() {
        bail!("replay outputs differ from the manifest: {}", differing.join(", "));
    }
    println!("replay: {} outputs identical", original.outputs.len());
    Ok(fresh)
}
