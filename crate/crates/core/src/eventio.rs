//! Time-tagged event files and coincidence-window matching.
//!
//! Each side of a simulated run is written as its own CSV file of detections
//! (`t_ns,setting,channel`, sorted by time, LF endings), the way a real
//! experiment logs raw time tags. Coincidences are then re-derived from the
//! two files alone by matching time stamps within a window.

use std::collections::HashSet;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::domain::{Angle, CountTable, Outcome};
use crate::error::{Error, Result};
use crate::optics::{emit_pair, measure_pair, SourceModel, StationConfig, StationOutcome};
use crate::rng;

pub const EVENT_HEADER: &str = "t_ns,setting,channel";
pub const TRUTH_HEADER: &str = "pair_id,index_a,index_b";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EventRecord {
    pub t_ns: u64,
    /// Which of the side's two analyzer angles was active (0 or 1).
    pub setting: u8,
    pub channel: Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub source: SourceModel,
    /// Calibration of A; the angle comes from `settings_a`.
    pub station_a: StationConfig,
    pub station_b: StationConfig,
    pub settings_a: [Angle; 2],
    pub settings_b: [Angle; 2],
    /// Pairs per second.
    pub mean_rate: f64,
    /// Detection latency spread per side, in seconds.
    pub jitter_sigma: f64,
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        self.station_a.validate()?;
        self.station_b.validate()?;
        if !(self.mean_rate > 0.0 && self.mean_rate.is_finite()) {
            return Err(Error::config(format!("mean rate {} must be > 0", self.mean_rate)));
        }
        if !(self.jitter_sigma >= 0.0 && self.jitter_sigma.is_finite()) {
            return Err(Error::config(format!("jitter {} must be ≥ 0", self.jitter_sigma)));
        }
        Ok(())
    }
}

/// A pair detected on both sides, with its record index in each stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TruePair {
    pub pair_id: u64,
    pub index_a: usize,
    pub index_b: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedStreams {
    pub a: Vec<EventRecord>,
    pub b: Vec<EventRecord>,
    pub truth: Vec<TruePair>,
    pub n_pairs: u64,
    /// Double clicks have no channel and are not written.
    pub doubles_a: u64,
    pub doubles_b: u64,
}

fn seconds_to_ns(s: f64) -> u64 {
    (s * 1e9).round() as u64
}

/// Simulates `duration` seconds of emission and returns both sides' records.
///
/// Emissions form a Poisson process at `mean_rate`. Each side picks one of
/// its two settings uniformly per event; a single-channel detection is
/// recorded at the emission time plus `|N(0, jitter_sigma)|`.
pub fn generate_streams(cfg: &GeneratorConfig, duration: f64, seed: u64) -> Result<GeneratedStreams> {
    cfg.validate()?;
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::config(format!("duration {duration} must be > 0")));
    }
    let mut r = rng::stream(seed, 0);
    let gaps = Exp::new(cfg.mean_rate).map_err(|e| Error::config(e.to_string()))?;
    let jitter = (cfg.jitter_sigma > 0.0).then(|| Normal::new(0.0, cfg.jitter_sigma).expect("validated jitter"));

    // (pair_id, record) per side
    let mut side_a = Vec::new();
    let mut side_b = Vec::new();
    let (mut doubles_a, mut doubles_b) = (0, 0);
    let mut t = 0.0;
    let mut pair_id = 0u64;
    loop {
        t += gaps.sample(&mut r);
        if t >= duration {
            break;
        }
        let pair = emit_pair(cfg.source, pair_id, t, &mut r);
        let sa = r.random_range(0..2u8);
        let sb = r.random_range(0..2u8);
        let (oa, ob) = measure_pair(
            &pair,
            &cfg.station_a.with_angle(cfg.settings_a[sa as usize]),
            &cfg.station_b.with_angle(cfg.settings_b[sb as usize]),
            &mut r,
        );
        let emitted = seconds_to_ns(t);
        for (outcome, setting, out, doubles) in [
            (oa, sa, &mut side_a, &mut doubles_a),
            (ob, sb, &mut side_b, &mut doubles_b),
        ] {
            let delay = jitter.map_or(0, |j| seconds_to_ns(j.sample(&mut r).abs()));
            match outcome.single() {
                Some(channel) => out.push((
                    pair_id,
                    EventRecord {
                        t_ns: emitted + delay,
                        setting,
                        channel,
                    },
                )),
                None if outcome == StationOutcome::Double => *doubles += 1,
                None => {}
            }
        }
        pair_id += 1;
    }

    let order = |v: &mut Vec<(u64, EventRecord)>| v.sort_by_key(|(id, rec)| (rec.t_ns, *id));
    order(&mut side_a);
    order(&mut side_b);

    let mut index_b = vec![usize::MAX; pair_id as usize];
    for (i, (id, _)) in side_b.iter().enumerate() {
        index_b[*id as usize] = i;
    }
    let mut truth: Vec<TruePair> = side_a
        .iter()
        .enumerate()
        .filter_map(|(i, (id, _))| {
            let j = index_b[*id as usize];
            (j != usize::MAX).then_some(TruePair {
                pair_id: *id,
                index_a: i,
                index_b: j,
            })
        })
        .collect();
    truth.sort_by_key(|p| p.pair_id);

    Ok(GeneratedStreams {
        a: side_a.into_iter().map(|(_, r)| r).collect(),
        b: side_b.into_iter().map(|(_, r)| r).collect(),
        truth,
        n_pairs: pair_id,
        doubles_a,
        doubles_b,
    })
}

pub fn write_events_to<W: Write>(mut w: W, records: &[EventRecord]) -> io::Result<()> {
    writeln!(w, "{EVENT_HEADER}")?;
    for r in records {
        writeln!(w, "{},{},{}", r.t_ns, r.setting, r.channel.value())?;
    }
    w.flush()
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_events(path: &Path, records: &[EventRecord]) -> Result<()> {
    let f = File::create(path).map_err(io_err(path))?;
    write_events_to(BufWriter::new(f), records).map_err(io_err(path))
}

/// Parses an event file. `path` is only used in error messages.
pub fn read_events_from<R: BufRead>(reader: R, path: &Path) -> Result<Vec<EventRecord>> {
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut lines = reader.lines();
    match lines.next() {
        Some(Ok(h)) if h == EVENT_HEADER => {}
        Some(Ok(h)) => return Err(parse_err(1, format!("expected header `{EVENT_HEADER}`, found `{h}`"))),
        Some(Err(e)) => return Err(io_err(path)(e)),
        None => return Err(parse_err(1, "empty file".into())),
    }
    let mut out = Vec::new();
    for (k, line) in lines.enumerate() {
        let lineno = k + 2;
        let line = line.map_err(io_err(path))?;
        let fields: Vec<&str> = line.split(',').collect();
        let [t, s, c] = fields[..] else {
            return Err(parse_err(lineno, format!("expected 3 fields, found {}", fields.len())));
        };
        let t_ns = t
            .parse::<u64>()
            .map_err(|e| parse_err(lineno, format!("t_ns `{t}`: {e}")))?;
        let setting = match s {
            "0" => 0,
            "1" => 1,
            _ => return Err(parse_err(lineno, format!("setting `{s}` is not 0 or 1"))),
        };
        let channel = c
            .parse::<i64>()
            .ok()
            .and_then(Outcome::from_value)
            .ok_or_else(|| parse_err(lineno, format!("channel `{c}` is not +1 or -1")))?;
        out.push(EventRecord { t_ns, setting, channel });
    }
    Ok(out)
}

pub fn read_events(path: &Path) -> Result<Vec<EventRecord>> {
    let f = File::open(path).map_err(io_err(path))?;
    read_events_from(BufReader::new(f), path)
}

pub fn write_truth(path: &Path, truth: &[TruePair]) -> Result<()> {
    let f = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(f);
    let mut body = || -> io::Result<()> {
        writeln!(w, "{TRUTH_HEADER}")?;
        for p in truth {
            writeln!(w, "{},{},{}", p.pair_id, p.index_a, p.index_b)?;
        }
        w.flush()
    };
    body().map_err(io_err(path))
}

pub fn read_truth(path: &Path) -> Result<Vec<TruePair>> {
    let f = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (k, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if k == 0 {
            if line != TRUTH_HEADER {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: 1,
                    msg: format!("expected header `{TRUTH_HEADER}`"),
                });
            }
            continue;
        }
        let nums: Vec<u64> = line
            .split(',')
            .map(|f| f.parse::<u64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: k + 1,
                msg: e.to_string(),
            })?;
        let [pair_id, a, b] = nums[..] else {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: k + 1,
                msg: "expected 3 fields".into(),
            });
        };
        out.push(TruePair {
            pair_id,
            index_a: a as usize,
            index_b: b as usize,
        });
    }
    Ok(out)
}

fn check_sorted(records: &[EventRecord]) -> Result<()> {
    match records.windows(2).position(|w| w[1].t_ns < w[0].t_ns) {
        Some(i) => Err(Error::Unsorted { index: i + 1 }),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    /// Indexed `[setting_a][setting_b]`.
    ///
    /// Side counts come from the files alone: `singles_*` is the number of
    /// records with that setting, and since emitted pairs are not observable
    /// `n_pairs` is taken as the larger of the two, with misses making up
    /// the difference on the quieter side.
    pub tables: [[CountTable; 2]; 2],
    /// Matched `(index_a, index_b)` record pairs in time order.
    pub pairs: Vec<(usize, usize)>,
}

impl MatchResult {
    /// The four tables in CHSH setting order (a,b), (a,b′), (a′,b), (a′,b′).
    pub fn chsh_tables(&self) -> [CountTable; 4] {
        crate::scan::CHSH_SETTINGS.map(|(i, j)| self.tables[i][j])
    }

    /// `(fraction of true pairs recovered, fraction of matches that are accidental)`
    pub fn score(&self, truth: &[TruePair]) -> (f64, f64) {
        let truth: HashSet<(usize, usize)> = truth.iter().map(|p| (p.index_a, p.index_b)).collect();
        let hits = self.pairs.iter().filter(|p| truth.contains(p)).count();
        let recovered = if truth.is_empty() {
            1.0
        } else {
            hits as f64 / truth.len() as f64
        };
        let accidental = if self.pairs.is_empty() {
            0.0
        } else {
            (self.pairs.len() - hits) as f64 / self.pairs.len() as f64
        };
        (recovered, accidental)
    }
}

/// Pairs records from two time-sorted streams whose time stamps differ by at
/// most `window_ns`, each record used at most once, in one merge pass.
///
/// At each step the earliest unconsumed record of each stream is compared.
/// If they are within the window they are matched, unless the next record
/// on the earlier record's side is strictly closer to the later record, in
/// which case the earlier record is left unmatched. The rule is mirror
/// symmetric, so swapping the streams swaps the roles in the result.
pub fn match_coincidences(a: &[EventRecord], b: &[EventRecord], window_ns: u64) -> Result<MatchResult> {
    check_sorted(a)?;
    check_sorted(b)?;
    let mut pairs = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        let (ta, tb) = (a[i].t_ns, b[j].t_ns);
        if ta.saturating_add(window_ns) < tb {
            i += 1;
            continue;
        }
        if tb.saturating_add(window_ns) < ta {
            j += 1;
            continue;
        }
        let gap = ta.abs_diff(tb);
        if ta < tb && i + 1 < a.len() && a[i + 1].t_ns.abs_diff(tb) < gap {
            i += 1;
            continue;
        }
        if tb < ta && j + 1 < b.len() && b[j + 1].t_ns.abs_diff(ta) < gap {
            j += 1;
            continue;
        }
        pairs.push((i, j));
        i += 1;
        j += 1;
    }

    let mut tables = [[CountTable::default(); 2]; 2];
    for &(i, j) in &pairs {
        tables[a[i].setting as usize][b[j].setting as usize].record_coincidence(a[i].channel, b[j].channel);
    }
    let per_setting = |recs: &[EventRecord]| {
        let mut n = [0u64; 2];
        for r in recs {
            n[r.setting as usize] += 1;
        }
        n
    };
    let (na, nb) = (per_setting(a), per_setting(b));
    for (sa, row) in tables.iter_mut().enumerate() {
        for (sb, t) in row.iter_mut().enumerate() {
            t.singles_a = na[sa];
            t.singles_b = nb[sb];
            t.n_pairs = na[sa].max(nb[sb]);
            t.misses_a = t.n_pairs - t.singles_a;
            t.misses_b = t.n_pairs - t.singles_b;
        }
    }
    Ok(MatchResult { tables, pairs })
}
