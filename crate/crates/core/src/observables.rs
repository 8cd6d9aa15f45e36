//! Event logs, state-count time series and ensemble averages.
//!
//! On disk a log is CSV preceded by `#` metadata lines:
//!
//! ```text
//! # spreadsim event log v1
//! # nodes=5
//! # states=S,I
//! # seed=7
//! # run=0
//! # model_digest=3f1c...
//! # final_time=2.0000000000000000e0
//! # termination=horizon
//! # records=1
//! # initial=1x1,0x4
//! time,node,from,to
//! 1.2500000000000000e0,3,0,1
//! ```
//!
//! `initial` is the run-length encoded initial state vector. Times are written
//! with 17 significant digits, which round-trips every `f64`.

use std::fmt::Write as _;
use std::io::{self, BufWriter, Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::engine::{EventRecord, Termination};
use crate::model::StateId;

const MAGIC: &str = "# spreadsim event log v1";
const COLUMNS: &str = "time,node,from,to";

#[derive(Debug, thiserror::Error)]
pub enum ObservablesError {
    #[error("byte {offset}: {msg}")]
    Parse { offset: usize, msg: String },
    #[error("record {index}: node {node} is in state {actual}, record says {claimed}")]
    Replay {
        index: usize,
        node: u32,
        actual: StateId,
        claimed: StateId,
    },
    #[error("grid point {0} lies outside the recorded run")]
    Range(f64),
    #[error("cannot aggregate: {0}")]
    Aggregation(String),
    #[error("invalid log: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogHeader {
    pub nodes: usize,
    pub state_names: Vec<String>,
    pub seed: u64,
    pub run: u64,
    pub model_digest: String,
    pub final_time: f64,
    pub termination: Termination,
}

impl LogHeader {
    pub fn state_count(&self) -> usize {
        self.state_names.len()
    }
}

/// A complete single-run trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct EventLog {
    pub header: LogHeader,
    pub initial: Vec<StateId>,
    pub records: Vec<EventRecord>,
}

impl EventLog {
    pub fn initial_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.header.state_count()];
        for &s in &self.initial {
            counts[s as usize] += 1;
        }
        counts
    }

    /// Replays every record from the initial states, checking that each
    /// record's source state matches, and returns the final states.
    pub fn replay(&self) -> Result<Vec<StateId>, ObservablesError> {
        let mut states = self.initial.clone();
        for (index, r) in self.records.iter().enumerate() {
            let actual = states[r.node as usize];
            if actual != r.from {
                return Err(ObservablesError::Replay {
                    index,
                    node: r.node,
                    actual,
                    claimed: r.from,
                });
            }
            states[r.node as usize] = r.to;
        }
        Ok(states)
    }

    /// Checks ranges, time ordering and replay consistency.
    pub fn validate(&self) -> Result<(), ObservablesError> {
        let n = self.header.nodes;
        let m = self.header.state_count();
        let invalid = |msg: String| Err(ObservablesError::Invalid(msg));
        if self.initial.len() != n {
            return invalid(format!(
                "{} initial states for {n} nodes",
                self.initial.len()
            ));
        }
        if self.initial.iter().any(|&s| s as usize >= m) {
            return invalid("initial state out of range".into());
        }
        let mut last = 0.0;
        for (i, r) in self.records.iter().enumerate() {
            if r.node as usize >= n || r.from as usize >= m || r.to as usize >= m {
                return invalid(format!("record {i} out of range"));
            }
            if !(r.time >= last) {
                return invalid(format!("record {i} goes back in time"));
            }
            last = r.time;
        }
        if last > self.header.final_time {
            return invalid("record after the final time".into());
        }
        self.replay().map(|_| ())
    }

    pub fn write<W: Write>(&self, w: W) -> Result<(), ObservablesError> {
        for name in &self.header.state_names {
            if name.is_empty() || name.contains([',', '\n', '\r']) {
                return Err(ObservablesError::Invalid(format!(
                    "state name {name:?} cannot be stored"
                )));
            }
        }
        let mut w = BufWriter::new(w);
        let h = &self.header;
        writeln!(w, "{MAGIC}")?;
        writeln!(w, "# nodes={}", h.nodes)?;
        writeln!(w, "# states={}", h.state_names.join(","))?;
        writeln!(w, "# seed={}", h.seed)?;
        writeln!(w, "# run={}", h.run)?;
        writeln!(w, "# model_digest={}", h.model_digest)?;
        writeln!(w, "# final_time={:.16e}", h.final_time)?;
        writeln!(w, "# termination={}", h.termination)?;
        writeln!(w, "# records={}", self.records.len())?;
        writeln!(w, "# initial={}", encode_runs(&self.initial))?;
        writeln!(w, "{COLUMNS}")?;
        for r in &self.records {
            writeln!(w, "{:.16e},{},{},{}", r.time, r.node, r.from, r.to)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_text(&self) -> Result<String, ObservablesError> {
        let mut buf = Vec::new();
        self.write(&mut buf)?;
        Ok(String::from_utf8(buf).expect("log text is ASCII"))
    }

    pub fn write_path(&self, path: impl AsRef<Path>) -> Result<(), ObservablesError> {
        self.write(std::fs::File::create(path)?)
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self, ObservablesError> {
        let mut text = String::new();
        r.read_to_string(&mut text)?;
        parse_log(&text)
    }

    pub fn read_path(path: impl AsRef<Path>) -> Result<Self, ObservablesError> {
        Self::read(std::fs::File::open(path)?)
    }

    /// SHA-256 of the serialized log, hex encoded.
    pub fn digest(&self) -> Result<String, ObservablesError> {
        let mut hasher = HashWriter(Sha256::new());
        self.write(&mut hasher)?;
        Ok(hex::encode(hasher.0.finalize()))
    }
}

struct HashWriter(Sha256);

impl Write for HashWriter {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.0.update(buf);
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

fn encode_runs(states: &[StateId]) -> String {
    let mut out = String::new();
    let mut i = 0;
    while i < states.len() {
        let s = states[i];
        let mut j = i;
        while j < states.len() && states[j] == s {
            j += 1;
        }
        if !out.is_empty() {
            out.push(',');
        }
        let _ = write!(out, "{s}x{}", j - i);
        i = j;
    }
    out
}

struct Lines<'a> {
    text: &'a str,
    offset: usize,
}

impl<'a> Lines<'a> {
    /// Next line and its starting byte offset. A final line without a
    /// newline counts as truncated.
    fn next(&mut self) -> Option<(usize, &'a str, bool)> {
        if self.offset >= self.text.len() {
            return None;
        }
        let start = self.offset;
        let rest = &self.text[start..];
        match rest.find('\n') {
            Some(k) => {
                self.offset += k + 1;
                Some((start, rest[..k].trim_end_matches('\r'), true))
            }
            None => {
                self.offset = self.text.len();
                Some((start, rest, false))
            }
        }
    }
}

fn parse_err(offset: usize, msg: impl Into<String>) -> ObservablesError {
    ObservablesError::Parse {
        offset,
        msg: msg.into(),
    }
}

fn expect_line<'a>(
    lines: &mut Lines<'a>,
    what: &str,
) -> Result<(usize, &'a str), ObservablesError> {
    match lines.next() {
        Some((off, line, true)) => Ok((off, line)),
        Some((off, _, false)) => Err(parse_err(off, format!("truncated {what}"))),
        None => Err(parse_err(lines.text.len(), format!("missing {what}"))),
    }
}

fn header_field<'a>(
    lines: &mut Lines<'a>,
    key: &str,
) -> Result<(usize, &'a str), ObservablesError> {
    let (off, line) = expect_line(lines, key)?;
    let value = line
        .strip_prefix("# ")
        .and_then(|l| l.strip_prefix(key))
        .and_then(|l| l.strip_prefix('='))
        .ok_or_else(|| parse_err(off, format!("expected `# {key}=`")))?;
    Ok((off, value))
}

fn num<T: std::str::FromStr>(off: usize, v: &str, key: &str) -> Result<T, ObservablesError> {
    v.parse()
        .map_err(|_| parse_err(off, format!("bad {key} {v:?}")))
}

fn parse_log(text: &str) -> Result<EventLog, ObservablesError> {
    let mut lines = Lines { text, offset: 0 };
    let (off, line) = expect_line(&mut lines, "header")?;
    if line != MAGIC {
        return Err(parse_err(off, "not a spreadsim event log"));
    }
    let mut field = |key: &str| header_field(&mut lines, key);
    let (o, v) = field("nodes")?;
    let nodes: usize = num(o, v, "nodes")?;
    let (o, v) = field("states")?;
    let state_names: Vec<String> = v.split(',').map(str::to_string).collect();
    if state_names.iter().any(String::is_empty) {
        return Err(parse_err(o, "empty state name"));
    }
    let (o, v) = field("seed")?;
    let seed: u64 = num(o, v, "seed")?;
    let (o, v) = field("run")?;
    let run: u64 = num(o, v, "run")?;
    let (_, v) = field("model_digest")?;
    let model_digest = v.to_string();
    let (o, v) = field("final_time")?;
    let final_time: f64 = num(o, v, "final_time")?;
    let (o, v) = field("termination")?;
    let termination: Termination = v.parse().map_err(|e: String| parse_err(o, e))?;
    let (o, v) = field("records")?;
    let record_count: usize = num(o, v, "records")?;
    let (o, v) = field("initial")?;
    let initial = decode_runs(v, nodes).map_err(|msg| parse_err(o, msg))?;
    let (o, line) = expect_line(&mut lines, "column header")?;
    if line != COLUMNS {
        return Err(parse_err(o, format!("expected `{COLUMNS}`")));
    }

    let mut records = Vec::with_capacity(record_count);
    while let Some((off, line, terminated)) = lines.next() {
        if !terminated {
            return Err(parse_err(off, "truncated record"));
        }
        records.push(parse_record(line).map_err(|msg| parse_err(off, msg))?);
    }
    if records.len() != record_count {
        return Err(parse_err(
            text.len(),
            format!(
                "header promises {record_count} records, found {}",
                records.len()
            ),
        ));
    }
    let log = EventLog {
        header: LogHeader {
            nodes,
            state_names,
            seed,
            run,
            model_digest,
            final_time,
            termination,
        },
        initial,
        records,
    };
    log.validate()?;
    Ok(log)
}

fn decode_runs(v: &str, nodes: usize) -> Result<Vec<StateId>, String> {
    let mut states = Vec::with_capacity(nodes);
    for part in v.split(',').filter(|p| !p.is_empty()) {
        let (s, len) = part
            .split_once('x')
            .ok_or_else(|| format!("bad run {part:?}"))?;
        let s: StateId = s.parse().map_err(|_| format!("bad state {s:?}"))?;
        let len: usize = len.parse().map_err(|_| format!("bad run length {len:?}"))?;
        if states.len() + len > nodes {
            return Err("initial states exceed node count".into());
        }
        states.extend(std::iter::repeat_n(s, len));
    }
    if states.len() != nodes {
        return Err(format!("{} initial states for {nodes} nodes", states.len()));
    }
    Ok(states)
}

fn parse_record(line: &str) -> Result<EventRecord, String> {
    let mut it = line.split(',');
    let mut next = || it.next().ok_or_else(|| format!("short record {line:?}"));
    let time = next()?
        .parse()
        .map_err(|_| format!("bad time in {line:?}"))?;
    let node = next()?
        .parse()
        .map_err(|_| format!("bad node in {line:?}"))?;
    let from = next()?
        .parse()
        .map_err(|_| format!("bad state in {line:?}"))?;
    let to = next()?
        .parse()
        .map_err(|_| format!("bad state in {line:?}"))?;
    if it.next().is_some() {
        return Err(format!("extra fields in {line:?}"));
    }
    Ok(EventRecord {
        time,
        node,
        from,
        to,
    })
}

/// `points` evenly spaced times from 0 to `t_max` inclusive.
pub fn uniform_grid(t_max: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..points)
            .map(|k| {
                if k + 1 == points {
                    t_max
                } else {
                    t_max * k as f64 / (points - 1) as f64
                }
            })
            .collect(),
    }
}

/// Per-state counts of a single run sampled on a time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    pub grid: Vec<f64>,
    pub state_names: Vec<String>,
    pub nodes: usize,
    /// Row-major, `grid.len() × state_names.len()`.
    pub counts: Vec<u64>,
}

impl TimeSeries {
    pub fn row(&self, k: usize) -> &[u64] {
        let m = self.state_names.len();
        &self.counts[k * m..(k + 1) * m]
    }

    pub fn write_csv<W: Write>(&self, w: W) -> io::Result<()> {
        let mut w = BufWriter::new(w);
        writeln!(w, "t,{}", self.state_names.join(","))?;
        for (k, t) in self.grid.iter().enumerate() {
            write!(w, "{t}")?;
            for c in self.row(k) {
                write!(w, ",{c}")?;
            }
            writeln!(w)?;
        }
        w.flush()
    }
}

/// Compartment counts after all events with time `<= t`, for every `t` in
/// the non-decreasing `grid`.
///
/// Points past the final time are answered with the final counts when the
/// run was absorbed and rejected otherwise.
pub fn counts_on_grid(log: &EventLog, grid: &[f64]) -> Result<TimeSeries, ObservablesError> {
    let m = log.header.state_count();
    let absorbed = log.header.termination == Termination::Absorbed;
    let mut states = log.initial.clone();
    let mut current = log.initial_counts();
    let mut counts = Vec::with_capacity(grid.len() * m);
    let mut next = 0;
    let mut prev = f64::NEG_INFINITY;
    for &t in grid {
        if !(t >= prev) || t < 0.0 {
            return Err(ObservablesError::Range(t));
        }
        prev = t;
        if t > log.header.final_time && !absorbed {
            return Err(ObservablesError::Range(t));
        }
        while next < log.records.len() && log.records[next].time <= t {
            let r = log.records[next];
            let actual = states[r.node as usize];
            if actual != r.from {
                return Err(ObservablesError::Replay {
                    index: next,
                    node: r.node,
                    actual,
                    claimed: r.from,
                });
            }
            states[r.node as usize] = r.to;
            current[r.from as usize] -= 1;
            current[r.to as usize] += 1;
            next += 1;
        }
        counts.extend_from_slice(&current);
    }
    Ok(TimeSeries {
        grid: grid.to_vec(),
        state_names: log.header.state_names.clone(),
        nodes: log.header.nodes,
        counts,
    })
}

/// Mean and sample standard deviation of compartment fractions across runs.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleSeries {
    pub grid: Vec<f64>,
    pub state_names: Vec<String>,
    pub runs: u64,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl EnsembleSeries {
    pub fn mean_row(&self, k: usize) -> &[f64] {
        let m = self.state_names.len();
        &self.mean[k * m..(k + 1) * m]
    }

    pub fn std_row(&self, k: usize) -> &[f64] {
        let m = self.state_names.len();
        &self.std[k * m..(k + 1) * m]
    }

    /// Mean fraction of `state` along the grid.
    pub fn column(&self, state: usize) -> Vec<f64> {
        let m = self.state_names.len();
        (0..self.grid.len())
            .map(|k| self.mean[k * m + state])
            .collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> io::Result<()> {
        let mut w = BufWriter::new(w);
        let stds: Vec<String> = self
            .state_names
            .iter()
            .map(|s| format!("{s}_std"))
            .collect();
        writeln!(w, "t,{},{}", self.state_names.join(","), stds.join(","))?;
        for (k, t) in self.grid.iter().enumerate() {
            write!(w, "{t}")?;
            for v in self.mean_row(k).iter().chain(self.std_row(k)) {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        w.flush()
    }
}

/// Streaming fold over runs. Sums are kept as integers, so the result does
/// not depend on the order in which runs are added or merged.
#[derive(Clone, Debug)]
pub struct EnsembleAccumulator {
    grid: Vec<f64>,
    state_names: Vec<String>,
    nodes: usize,
    runs: u64,
    sum: Vec<u64>,
    sum_sq: Vec<u128>,
}

impl EnsembleAccumulator {
    pub fn new(grid: Vec<f64>, state_names: Vec<String>, nodes: usize) -> Self {
        let cells = grid.len() * state_names.len();
        Self {
            grid,
            state_names,
            nodes,
            runs: 0,
            sum: vec![0; cells],
            sum_sq: vec![0; cells],
        }
    }

    pub fn runs(&self) -> u64 {
        self.runs
    }

    fn check(&self, grid: &[f64], names: &[String], nodes: usize) -> Result<(), ObservablesError> {
        if grid != self.grid.as_slice() {
            return Err(ObservablesError::Aggregation("grids differ".into()));
        }
        if names != self.state_names.as_slice() {
            return Err(ObservablesError::Aggregation("state sets differ".into()));
        }
        if nodes != self.nodes {
            return Err(ObservablesError::Aggregation(format!(
                "node counts differ ({nodes} vs {})",
                self.nodes
            )));
        }
        Ok(())
    }

    pub fn add(&mut self, series: &TimeSeries) -> Result<(), ObservablesError> {
        self.check(&series.grid, &series.state_names, series.nodes)?;
        for ((s, q), &c) in self
            .sum
            .iter_mut()
            .zip(&mut self.sum_sq)
            .zip(&series.counts)
        {
            *s += c;
            *q += c as u128 * c as u128;
        }
        self.runs += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &EnsembleAccumulator) -> Result<(), ObservablesError> {
        self.check(&other.grid, &other.state_names, other.nodes)?;
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.sum_sq.iter_mut().zip(&other.sum_sq) {
            *a += b;
        }
        self.runs += other.runs;
        Ok(())
    }

    pub fn finish(&self) -> Result<EnsembleSeries, ObservablesError> {
        if self.runs == 0 {
            return Err(ObservablesError::Aggregation("no runs".into()));
        }
        let r = self.runs as u128;
        let n = self.nodes as f64;
        let mean = self
            .sum
            .iter()
            .map(|&s| s as f64 / (self.runs as f64 * n))
            .collect();
        let std = self
            .sum
            .iter()
            .zip(&self.sum_sq)
            .map(|(&s, &q)| {
                if r < 2 {
                    return 0.0;
                }
                // R·Σc² − (Σc)² is exact in integers.
                let centered = r * q - s as u128 * s as u128;
                (centered as f64 / (r * (r - 1)) as f64).sqrt() / n
            })
            .collect();
        Ok(EnsembleSeries {
            grid: self.grid.clone(),
            state_names: self.state_names.clone(),
            runs: self.runs,
            mean,
            std,
        })
    }
}

/// Element-wise mean of compartment fractions over runs sharing one grid.
pub fn ensemble_mean(runs: &[TimeSeries]) -> Result<EnsembleSeries, ObservablesError> {
    let first = runs
        .first()
        .ok_or_else(|| ObservablesError::Aggregation("no runs".into()))?;
    let mut acc =
        EnsembleAccumulator::new(first.grid.clone(), first.state_names.clone(), first.nodes);
    for r in runs {
        acc.add(r)?;
    }
    acc.finish()
}
