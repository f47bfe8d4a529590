//! Scenario files, repetition runner and output writers behind the `hpar`
//! binary.
//!
//! Config files are line based: `key = value`, `#` starts a comment, and
//! `traffic` and `node` lines may repeat.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::thread;

use anyhow::{bail, Context};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::geometry::{Axis, Position, Zone};
use crate::simcore::{
    run_with, Coverage, DropReason, MetricsRecord, Mobility, Protocol, RunOptions, RunOutput, ScenarioConfig,
    TrafficFlow,
};

pub const METRICS_FORMAT_VERSION: u32 = 1;

pub const METRICS_COLUMNS: [&str; 12] = [
    "seed",
    "protocol",
    "delivery_rate",
    "mean_latency_s",
    "transmissions",
    "participating_nodes",
    "anonymity_set_mean",
    "src_ident_rate",
    "dst_ident_rate",
    "drops_ttl",
    "drops_unreachable",
    "drops_loss",
];

/// Every config key with its default and meaning, in canonical order.
pub const CONFIG_KEYS: &[(&str, &str, &str)] = &[
    ("area", "required", "deployment area width,height in meters"),
    ("nodes", "required", "node count"),
    ("range", "required", "radio range in meters"),
    ("seed", "required", "master random seed"),
    ("protocol", "hpar", "hpar or gpsr"),
    ("k", "4", "anonymity target: nodes per destination zone"),
    ("m", "3", "holders per packet when hold_release is on"),
    ("c", "3", "cover senders per notify-and-go"),
    ("notify_window", "0.1", "notify-and-go window in seconds"),
    (
        "jitter_max",
        "0",
        "per-hop forwarding delay bound in seconds (0 disables)",
    ),
    ("notify_and_go", "true", "source cover transmissions"),
    (
        "hold_release",
        "false",
        "buffer packets in the destination zone until the next one",
    ),
    ("hello_interval", "1", "beacon period in seconds"),
    ("pseudonym_period", "30", "pseudonym rotation period in seconds"),
    (
        "mobility",
        "static",
        "static, or random_waypoint SPEED_MIN,SPEED_MAX,PAUSE",
    ),
    ("mobility_step", "1", "mobility update period in seconds"),
    ("duration", "100", "simulated seconds"),
    ("bitrate", "2000000", "link rate in bits per second"),
    ("loss", "0", "per-receiver frame loss probability"),
    ("max_retries", "3", "DATA resends after a missing confirmation"),
    (
        "confirm_timeout",
        "auto",
        "seconds, or auto (4x the estimated one-way bound)",
    ),
    ("ttl", "auto", "hop limit, or auto"),
    (
        "crypto_setup_cost",
        "0.005",
        "one-off session setup latency at the source in seconds",
    ),
    ("observer", "global", "global, or region X0,Y0,X1,Y1"),
    ("first_axis", "vertical", "orientation of the first partition split"),
    ("node", "random", "repeatable X,Y; when given, one line per node"),
    ("traffic", "none", "repeatable SRC,DST,START,PERIOD,SIZE,COUNT"),
];

fn config_err(line: usize, key: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        line,
        key: key.to_string(),
        reason: reason.into(),
    }
}

fn parse_f64(line: usize, key: &str, v: &str) -> Result<f64> {
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(config_err(line, key, format!("expected a number, got `{v}`"))),
    }
}

fn parse_int<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse::<T>()
        .map_err(|_| config_err(line, key, format!("expected a non-negative integer, got `{v}`")))
}

fn parse_bool(line: usize, key: &str, v: &str) -> Result<bool> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(config_err(line, key, format!("expected true or false, got `{v}`"))),
    }
}

fn parse_list(line: usize, key: &str, v: &str, n: usize) -> Result<Vec<f64>> {
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    if parts.len() != n {
        return Err(config_err(
            line,
            key,
            format!("expected {n} comma-separated values, got {}", parts.len()),
        ));
    }
    parts.iter().map(|p| parse_f64(line, key, p)).collect()
}

fn parse_traffic(line: usize, v: &str) -> Result<TrafficFlow> {
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    if parts.len() != 6 {
        return Err(config_err(
            line,
            "traffic",
            format!("expected src,dst,start,period,size,count, got {} values", parts.len()),
        ));
    }
    Ok(TrafficFlow {
        src: parse_int(line, "traffic", parts[0])?,
        dst: parse_int(line, "traffic", parts[1])?,
        start: parse_f64(line, "traffic", parts[2])?,
        period: parse_f64(line, "traffic", parts[3])?,
        size: parse_int(line, "traffic", parts[4])?,
        count: parse_int(line, "traffic", parts[5])?,
    })
}

/// Parses and validates a scenario file.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let mut values: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
    let mut traffic = Vec::new();
    let mut positions = Vec::new();
    let mut node_line = 0;
    let mut traffic_line = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(config_err(line, content, "expected `key = value`"));
        };
        let (key, value) = (key.trim(), value.trim());
        if !CONFIG_KEYS.iter().any(|(k, _, _)| *k == key) {
            return Err(config_err(line, key, "unknown key"));
        }
        match key {
            "traffic" => {
                traffic.push(parse_traffic(line, value)?);
                traffic_line = line;
            }
            "node" => {
                let xy = parse_list(line, key, value, 2)?;
                positions.push(Position::new(xy[0], xy[1]));
                node_line = line;
            }
            _ => {
                if let Some((first, _)) = values.insert(key, (line, value)) {
                    return Err(config_err(line, key, format!("already set on line {first}")));
                }
            }
        }
    }
    let required = |key: &str| {
        values
            .get(key)
            .copied()
            .ok_or_else(|| config_err(0, key, "missing required key"))
    };

    let (line, v) = required("area")?;
    let wh = parse_list(line, "area", v, 2)?;
    let area = Zone::with_size(wh[0], wh[1]).map_err(|e| config_err(line, "area", e.to_string()))?;
    let (line, v) = required("nodes")?;
    let nodes: usize = parse_int(line, "nodes", v)?;
    let (line, v) = required("range")?;
    let range = parse_f64(line, "range", v)?;
    let (line, v) = required("seed")?;
    let seed: u64 = parse_int(line, "seed", v)?;

    let mut cfg = ScenarioConfig::new(area, nodes, range, seed);
    cfg.traffic = traffic;
    cfg.positions = positions;
    for (&key, &(line, v)) in &values {
        match key {
            "protocol" => {
                cfg.protocol = match v {
                    "hpar" => Protocol::Hpar,
                    "gpsr" => Protocol::GpsrBaseline,
                    _ => return Err(config_err(line, key, format!("expected hpar or gpsr, got `{v}`"))),
                }
            }
            "k" => cfg.k = parse_int(line, key, v)?,
            "m" => cfg.m = parse_int(line, key, v)?,
            "c" => cfg.c = parse_int(line, key, v)?,
            "notify_window" => cfg.notify_window = parse_f64(line, key, v)?,
            "jitter_max" => cfg.jitter_max = parse_f64(line, key, v)?,
            "notify_and_go" => cfg.notify_and_go = parse_bool(line, key, v)?,
            "hold_release" => cfg.hold_release = parse_bool(line, key, v)?,
            "hello_interval" => cfg.hello_interval = parse_f64(line, key, v)?,
            "pseudonym_period" => cfg.pseudonym_period = parse_f64(line, key, v)?,
            "mobility" => {
                cfg.mobility = if v == "static" {
                    Mobility::Static
                } else if let Some(rest) = v.strip_prefix("random_waypoint") {
                    let p = parse_list(line, key, rest.trim(), 3)?;
                    Mobility::RandomWaypoint {
                        speed_min: p[0],
                        speed_max: p[1],
                        pause: p[2],
                    }
                } else {
                    return Err(config_err(
                        line,
                        key,
                        format!("expected static or random_waypoint, got `{v}`"),
                    ));
                }
            }
            "mobility_step" => cfg.mobility_step = parse_f64(line, key, v)?,
            "duration" => cfg.duration = parse_f64(line, key, v)?,
            "bitrate" => cfg.bitrate = parse_f64(line, key, v)?,
            "loss" => cfg.loss = parse_f64(line, key, v)?,
            "max_retries" => cfg.max_retries = parse_int(line, key, v)?,
            "confirm_timeout" => {
                cfg.confirm_timeout = if v == "auto" {
                    None
                } else {
                    Some(parse_f64(line, key, v)?)
                }
            }
            "ttl" => {
                cfg.ttl = if v == "auto" {
                    None
                } else {
                    Some(parse_int(line, key, v)?)
                }
            }
            "crypto_setup_cost" => cfg.crypto_setup_cost = parse_f64(line, key, v)?,
            "observer" => {
                cfg.observer = if v == "global" {
                    Coverage::Global
                } else if let Some(rest) = v.strip_prefix("region") {
                    let p = parse_list(line, key, rest.trim(), 4)?;
                    let zone = Zone::new(Position::new(p[0], p[1]), Position::new(p[2], p[3]))
                        .map_err(|e| config_err(line, key, e.to_string()))?;
                    Coverage::Region(zone)
                } else {
                    return Err(config_err(line, key, format!("expected global or region, got `{v}`")));
                }
            }
            "first_axis" => {
                cfg.first_axis = match v {
                    "vertical" => Axis::Vertical,
                    "horizontal" => Axis::Horizontal,
                    _ => {
                        return Err(config_err(
                            line,
                            key,
                            format!("expected vertical or horizontal, got `{v}`"),
                        ))
                    }
                }
            }
            _ => {}
        }
    }
    cfg.validate().map_err(|e| match e {
        Error::Parameter { name, reason } => {
            let key = match name {
                "speed_min" | "speed_max" | "pause" => "mobility",
                other => other,
            };
            let line = match key {
                "node" => node_line,
                "traffic" => traffic_line,
                _ => values.get(key).map_or(0, |(l, _)| *l),
            };
            config_err(line, key, reason)
        }
        other => other,
    })?;
    Ok(cfg)
}

/// Canonical text for `cfg`; parsing it yields an identical config.
pub fn emit_config(cfg: &ScenarioConfig) -> String {
    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k} = {v}");
    };
    kv("area", format!("{},{}", cfg.area.width(), cfg.area.height()));
    kv("nodes", cfg.node_count.to_string());
    kv("range", cfg.radio_range.to_string());
    kv("seed", cfg.seed.to_string());
    kv("protocol", cfg.protocol.as_str().to_string());
    kv("k", cfg.k.to_string());
    kv("m", cfg.m.to_string());
    kv("c", cfg.c.to_string());
    kv("notify_window", cfg.notify_window.to_string());
    kv("jitter_max", cfg.jitter_max.to_string());
    kv("notify_and_go", cfg.notify_and_go.to_string());
    kv("hold_release", cfg.hold_release.to_string());
    kv("hello_interval", cfg.hello_interval.to_string());
    kv("pseudonym_period", cfg.pseudonym_period.to_string());
    kv(
        "mobility",
        match cfg.mobility {
            Mobility::Static => "static".to_string(),
            Mobility::RandomWaypoint {
                speed_min,
                speed_max,
                pause,
            } => format!("random_waypoint {speed_min},{speed_max},{pause}"),
        },
    );
    kv("mobility_step", cfg.mobility_step.to_string());
    kv("duration", cfg.duration.to_string());
    kv("bitrate", cfg.bitrate.to_string());
    kv("loss", cfg.loss.to_string());
    kv("max_retries", cfg.max_retries.to_string());
    kv(
        "confirm_timeout",
        cfg.confirm_timeout.map_or("auto".to_string(), |t| t.to_string()),
    );
    kv("ttl", cfg.ttl.map_or("auto".to_string(), |t| t.to_string()));
    kv("crypto_setup_cost", cfg.crypto_setup_cost.to_string());
    kv(
        "observer",
        match cfg.observer {
            Coverage::Global => "global".to_string(),
            Coverage::Region(z) => {
                let (a, b) = (z.min_corner(), z.max_corner());
                format!("region {},{},{},{}", a.x, a.y, b.x, b.y)
            }
        },
    );
    kv(
        "first_axis",
        match cfg.first_axis {
            Axis::Vertical => "vertical",
            Axis::Horizontal => "horizontal",
        }
        .to_string(),
    );
    for p in &cfg.positions {
        kv("node", format!("{},{}", p.x, p.y));
    }
    for f in &cfg.traffic {
        kv(
            "traffic",
            format!("{},{},{},{},{},{}", f.src, f.dst, f.start, f.period, f.size, f.count),
        );
    }
    s
}

/// Help text listing every key and its default.
pub fn config_help() -> String {
    let mut s = String::from("Config keys (key = value, # comments):\n");
    for (k, d, doc) in CONFIG_KEYS {
        let _ = writeln!(s, "  {k:<18} default {d:<9} {doc}");
    }
    s
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunManifest {
    pub config_path: PathBuf,
    pub out_dir: PathBuf,
    pub repetitions: u32,
    /// Repetition `i` runs with seed `seed_base + i`; the config's seed when `None`.
    pub seed_base: Option<u64>,
}

/// Runs `reps` repetitions of `cfg`, seeds `seed_base..seed_base + reps`, on
/// worker threads. Results come back in seed order.
pub fn run_repetitions(cfg: &ScenarioConfig, reps: u32, seed_base: u64, options: RunOptions) -> Result<Vec<RunOutput>> {
    let seeds: Vec<u64> = (0..reps as u64).map(|i| seed_base.wrapping_add(i)).collect();
    let workers = thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(seeds.len().max(1));
    let chunks: Vec<&[u64]> = seeds.chunks(seeds.len().div_ceil(workers).max(1)).collect();
    let results: Vec<Result<Vec<RunOutput>>> = thread::scope(|s| {
        let handles: Vec<_> = chunks
            .iter()
            .map(|chunk| {
                s.spawn(move || {
                    chunk
                        .iter()
                        .map(|&seed| {
                            let mut c = cfg.clone();
                            c.seed = seed;
                            run_with(&c, options)
                                .map_err(|e| Error::Scenario(format!("repetition with seed {seed}: {e}")))
                        })
                        .collect()
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    });
    let mut out = Vec::with_capacity(seeds.len());
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

/// The row written to metrics.csv, in [`METRICS_COLUMNS`] order.
pub fn metrics_row(m: &MetricsRecord) -> Vec<String> {
    vec![
        m.seed.to_string(),
        m.protocol.as_str().to_string(),
        fmt_opt(m.delivery_rate),
        fmt_opt(m.mean_latency),
        m.transmissions_total.to_string(),
        m.participating_nodes.to_string(),
        fmt_opt(m.anonymity.anonymity_set_mean),
        fmt_opt(m.anonymity.src_ident_rate),
        fmt_opt(m.anonymity.dst_ident_rate),
        m.drops(DropReason::Ttl).to_string(),
        m.drops(DropReason::Unreachable).to_string(),
        (m.drops(DropReason::Loss) + m.drops(DropReason::LinkBreak)).to_string(),
    ]
}

/// Numeric metrics columns (everything after seed and protocol).
pub fn metric_values(m: &MetricsRecord) -> Vec<(&'static str, Option<f64>)> {
    metrics_row(m)
        .into_iter()
        .zip(METRICS_COLUMNS)
        .skip(2)
        .map(|(v, name)| (name, v.parse::<f64>().ok()))
        .collect()
}

pub fn write_metrics_csv<W: Write>(out: W, records: &[&MetricsRecord]) -> anyhow::Result<()> {
    let mut out = out;
    writeln!(out, "# hpar metrics format {METRICS_FORMAT_VERSION}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(METRICS_COLUMNS)?;
    for m in records {
        w.write_record(metrics_row(m))?;
    }
    w.flush()?;
    Ok(())
}

/// Mean and two-sided 95% Student-t interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stat {
    pub n: usize,
    pub mean: f64,
    pub ci95_low: Option<f64>,
    pub ci95_high: Option<f64>,
}

pub fn summarize(values: &[f64]) -> Option<Stat> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let (mut lo, mut hi) = (None, None);
    if n >= 2 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
            .expect("positive degrees of freedom")
            .inverse_cdf(0.975);
        let half = t * (var / n as f64).sqrt();
        lo = Some(mean - half);
        hi = Some(mean + half);
    }
    Some(Stat {
        n,
        mean,
        ci95_low: lo,
        ci95_high: hi,
    })
}

fn summarize_columns(records: &[&MetricsRecord]) -> BTreeMap<&'static str, Option<Stat>> {
    let mut cols: BTreeMap<&'static str, Vec<f64>> = BTreeMap::new();
    for name in &METRICS_COLUMNS[2..] {
        cols.insert(name, Vec::new());
    }
    for m in records {
        for (name, v) in metric_values(m) {
            if let Some(v) = v {
                cols.get_mut(name).expect("known column").push(v);
            }
        }
    }
    cols.into_iter().map(|(k, v)| (k, summarize(&v))).collect()
}

#[derive(Serialize)]
struct Tagged<'a, T: Serialize> {
    seed: u64,
    #[serde(flatten)]
    event: &'a T,
}

#[derive(Serialize)]
struct RunSummary<'a> {
    format_version: u32,
    repetitions: usize,
    seeds: Vec<u64>,
    metrics: BTreeMap<&'static str, Option<Stat>>,
    config: &'a str,
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("cannot write {}", path.display()))?,
    ))
}

/// Writes metrics.csv, trace.jsonl, observations.jsonl and summary.json.
pub fn write_outputs(dir: &Path, cfg: &ScenarioConfig, outputs: &[RunOutput]) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let records: Vec<&MetricsRecord> = outputs.iter().map(|o| &o.metrics).collect();
    let mut f = create(&dir.join("metrics.csv"))?;
    write_metrics_csv(&mut f, &records)?;
    f.flush()?;

    let mut f = create(&dir.join("trace.jsonl"))?;
    for o in outputs {
        for e in &o.trace {
            serde_json::to_writer(
                &mut f,
                &Tagged {
                    seed: o.metrics.seed,
                    event: e,
                },
            )?;
            f.write_all(b"\n")?;
        }
    }
    f.flush()?;

    let mut f = create(&dir.join("observations.jsonl"))?;
    for o in outputs {
        let mut buf = Vec::new();
        o.observations.write_jsonl(&mut buf)?;
        for line in buf.split(|&b| b == b'\n').filter(|l| !l.is_empty()) {
            let _ = write!(f, "{{\"seed\":{},", o.metrics.seed);
            f.write_all(&line[1..])?;
            f.write_all(b"\n")?;
        }
    }
    f.flush()?;

    let text = emit_config(cfg);
    let summary = RunSummary {
        format_version: METRICS_FORMAT_VERSION,
        repetitions: outputs.len(),
        seeds: records.iter().map(|m| m.seed).collect(),
        metrics: summarize_columns(&records),
        config: &text,
    };
    let mut f = create(&dir.join("summary.json"))?;
    serde_json::to_writer_pretty(&mut f, &summary)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

pub fn load_config(path: &Path) -> anyhow::Result<ScenarioConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_config(&text).with_context(|| format!("{}", path.display()))
}

/// Executes a manifest and writes its output files.
pub fn run_scenario(manifest: &RunManifest) -> anyhow::Result<Vec<MetricsRecord>> {
    if manifest.repetitions == 0 {
        bail!("repetitions must be at least 1");
    }
    let cfg = load_config(&manifest.config_path)?;
    let base = manifest.seed_base.unwrap_or(cfg.seed);
    let outputs = run_repetitions(&cfg, manifest.repetitions, base, RunOptions::default())?;
    write_outputs(&manifest.out_dir, &cfg, &outputs)?;
    Ok(outputs.into_iter().map(|o| o.metrics).collect())
}

/// Fields a comparison may vary; everything else must match.
fn strip_protocol_fields(cfg: &ScenarioConfig, from: &ScenarioConfig) -> ScenarioConfig {
    let mut c = cfg.clone();
    c.protocol = from.protocol;
    c.k = from.k;
    c.m = from.m;
    c.c = from.c;
    c.notify_window = from.notify_window;
    c.jitter_max = from.jitter_max;
    c.notify_and_go = from.notify_and_go;
    c.hold_release = from.hold_release;
    c.crypto_setup_cost = from.crypto_setup_cost;
    c.confirm_timeout = from.confirm_timeout;
    c.ttl = from.ttl;
    c
}

/// Rejects config pairs that differ in anything but protocol and
/// countermeasure settings.
pub fn check_paired(a: &ScenarioConfig, b: &ScenarioConfig) -> Result<()> {
    let b2 = strip_protocol_fields(b, a);
    if b2 == *a {
        return Ok(());
    }
    let ea: BTreeSet<String> = emit_config(a).lines().map(String::from).collect();
    let eb: BTreeSet<String> = emit_config(&b2).lines().map(String::from).collect();
    let diff: Vec<String> = ea
        .symmetric_difference(&eb)
        .map(|l| l.split(" = ").next().unwrap_or("").to_string())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    Err(Error::Scenario(format!(
        "configs differ in topology or traffic ({}); comparison would be unpaired",
        diff.join(", ")
    )))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairedRow {
    pub seed: u64,
    pub a: MetricsRecord,
    pub b: MetricsRecord,
}

impl PairedRow {
    /// `b - a` for each numeric column; `None` when either side is missing.
    pub fn deltas(&self) -> Vec<(&'static str, Option<f64>)> {
        metric_values(&self.a)
            .into_iter()
            .zip(metric_values(&self.b))
            .map(|((name, a), (_, b))| (name, a.zip(b).map(|(a, b)| b - a)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub rows: Vec<PairedRow>,
}

impl Comparison {
    pub fn delta_summary(&self) -> BTreeMap<&'static str, Option<Stat>> {
        let mut cols: BTreeMap<&'static str, Vec<f64>> = BTreeMap::new();
        for r in &self.rows {
            for (name, d) in r.deltas() {
                let e = cols.entry(name).or_default();
                if let Some(d) = d {
                    e.push(d);
                }
            }
        }
        cols.into_iter().map(|(k, v)| (k, summarize(&v))).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> anyhow::Result<()> {
        let mut out = out;
        writeln!(out, "# hpar comparison format {METRICS_FORMAT_VERSION}")?;
        let mut w = csv::Writer::from_writer(out);
        let names: Vec<&str> = METRICS_COLUMNS[2..].to_vec();
        let mut header = vec!["seed".to_string(), "protocol_a".to_string(), "protocol_b".to_string()];
        for n in &names {
            header.push(format!("{n}_a"));
            header.push(format!("{n}_b"));
            header.push(format!("{n}_delta"));
        }
        w.write_record(&header)?;
        for r in &self.rows {
            let mut row = vec![
                r.seed.to_string(),
                r.a.protocol.as_str().to_string(),
                r.b.protocol.as_str().to_string(),
            ];
            for (((_, a), (_, b)), (_, d)) in metric_values(&r.a).into_iter().zip(metric_values(&r.b)).zip(r.deltas()) {
                row.push(fmt_opt(a));
                row.push(fmt_opt(b));
                row.push(fmt_opt(d));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs both configs on identical seeds and pairs the results.
pub fn compare(a: &ScenarioConfig, b: &ScenarioConfig, reps: u32, seed_base: u64) -> Result<Comparison> {
    check_paired(a, b)?;
    let opts = RunOptions {
        trace: false,
        audit: false,
    };
    let ra = run_repetitions(a, reps, seed_base, opts)?;
    let rb = run_repetitions(b, reps, seed_base, opts)?;
    Ok(Comparison {
        rows: ra
            .into_iter()
            .zip(rb)
            .map(|(x, y)| PairedRow {
                seed: x.metrics.seed,
                a: x.metrics,
                b: y.metrics,
            })
            .collect(),
    })
}

#[derive(Serialize)]
struct ComparisonSummary<'a> {
    format_version: u32,
    repetitions: usize,
    deltas: BTreeMap<&'static str, Option<Stat>>,
    config_a: &'a str,
    config_b: &'a str,
}

pub fn write_comparison(dir: &Path, a: &ScenarioConfig, b: &ScenarioConfig, cmp: &Comparison) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let mut f = create(&dir.join("comparison.csv"))?;
    cmp.write_csv(&mut f)?;
    f.flush()?;
    let (ta, tb) = (emit_config(a), emit_config(b));
    let summary = ComparisonSummary {
        format_version: METRICS_FORMAT_VERSION,
        repetitions: cmp.rows.len(),
        deltas: cmp.delta_summary(),
        config_a: &ta,
        config_b: &tb,
    };
    let mut f = create(&dir.join("summary.json"))?;
    serde_json::to_writer_pretty(&mut f, &summary)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}
