//! In-process MapReduce simulator.
//!
//! Shuffle keys are hashed onto `machines` virtual machines. Every mapper
//! emission is one remote message; reducers report their own local
//! (intra-machine) copy-adds through [`ReduceContext::add_local`]. Reducer
//! keys are processed in sorted order, values within a key in sorted order,
//! so outputs and stats do not depend on the worker count.

use std::fmt;
use std::fs::File;
use std::hash::Hash;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};

use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};
use xxhash_rust::xxh64::xxh64;

use crate::error::{Error, Result};
use crate::model::{Cell, SegmentKey};

pub const DEFAULT_SPILL_THRESHOLD: usize = 10_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub machines: usize,
    pub seed: u64,
    /// Inter-phase outputs above this many rows go to a temp file.
    pub spill_threshold: usize,
    /// Reducer worker threads; results do not depend on this.
    pub workers: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            machines: 16,
            seed: 0,
            spill_threshold: DEFAULT_SPILL_THRESHOLD,
            workers: 1,
        }
    }
}

impl SimConfig {
    pub fn new(machines: usize, seed: u64) -> Result<Self> {
        let config = SimConfig {
            machines,
            seed,
            ..SimConfig::default()
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn with_spill_threshold(mut self, rows: usize) -> Self {
        self.spill_threshold = rows;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.machines == 0 {
            return Err(Error::SimConfig("machines must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::SimConfig("workers must be at least 1".into()));
        }
        Ok(())
    }
}

/// Stable byte serialization of a shuffle key, the input to [`shard`].
pub trait ShuffleKey {
    fn write_key_bytes(&self, out: &mut Vec<u8>);
}

impl ShuffleKey for SegmentKey {
    fn write_key_bytes(&self, out: &mut Vec<u8>) {
        for c in self.cells() {
            out.extend_from_slice(&c.raw().to_le_bytes());
        }
    }
}

impl ShuffleKey for [Cell] {
    fn write_key_bytes(&self, out: &mut Vec<u8>) {
        for c in self {
            out.extend_from_slice(&c.raw().to_le_bytes());
        }
    }
}

impl ShuffleKey for u64 {
    fn write_key_bytes(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
}

impl ShuffleKey for String {
    fn write_key_bytes(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(self.as_bytes());
    }
}

/// Machine for a shuffle key: seeded xxh64 of the key bytes, mapped onto
/// `[0, machines)` by multiply-shift.
pub fn shard<K: ShuffleKey + ?Sized>(key: &K, config: &SimConfig) -> usize {
    let mut buf = Vec::with_capacity(64);
    key.write_key_bytes(&mut buf);
    let h = xxh64(&buf, config.seed);
    ((h as u128 * config.machines as u128) >> 64) as usize
}

pub struct Emitter<K, V> {
    buf: Vec<(K, V)>,
}

impl<K, V> Emitter<K, V> {
    pub fn emit(&mut self, key: K, value: V) {
        self.buf.push((key, value));
    }
}

pub struct ReduceContext<O> {
    outputs: Vec<O>,
    local_msgs: u64,
}

impl<O> ReduceContext<O> {
    pub fn emit(&mut self, output: O) {
        self.outputs.push(output);
    }

    pub fn add_local(&mut self, n: u64) {
        self.local_msgs += n;
    }
}

/// Exact rational, kept unreduced.
#[derive(Clone, Copy, Debug, Default)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    pub fn new(num: u64, den: u64) -> Self {
        Ratio { num, den }
    }

    pub fn value(self) -> Option<f64> {
        (self.den != 0).then(|| self.num as f64 / self.den as f64)
    }
}

impl PartialEq for Ratio {
    fn eq(&self, other: &Self) -> bool {
        self.num as u128 * other.den as u128 == other.num as u128 * self.den as u128
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PhaseStats {
    pub phase: usize,
    pub input_rows: u64,
    pub remote_msgs: u64,
    pub output_rows: u64,
    pub local_msgs: u64,
    pub reducer_keys: u64,
    /// "max #nodes per key": outputs produced under one reducer key.
    pub max_output_rows_per_key: u64,
    pub max_local_msgs_per_key: u64,
    pub machine_rows: Vec<u64>,
    pub machine_local_msgs: Vec<u64>,
}

impl PhaseStats {
    pub fn phase_blowup(&self) -> Ratio {
        Ratio::new(self.output_rows, self.input_rows)
    }

    pub fn local_per_remote(&self) -> Ratio {
        Ratio::new(self.local_msgs, self.remote_msgs)
    }

    fn empty(phase: usize, machines: usize) -> Self {
        PhaseStats {
            phase,
            machine_rows: vec![0; machines],
            machine_local_msgs: vec![0; machines],
            ..PhaseStats::default()
        }
    }
}

/// Counters for a whole run, one entry per executed phase (or round).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunStats {
    pub algorithm: String,
    pub phases: Vec<PhaseStats>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Totals {
    pub input_rows: u64,
    pub remote_msgs: u64,
    pub output_rows: u64,
    pub local_msgs: u64,
    pub max_output_rows_per_key: u64,
    pub max_local_msgs_per_key: u64,
    pub machine_rows: Vec<u64>,
    pub machine_local_msgs: Vec<u64>,
}

impl RunStats {
    pub fn new(algorithm: impl Into<String>) -> Self {
        RunStats {
            algorithm: algorithm.into(),
            phases: Vec::new(),
        }
    }

    pub fn totals(&self) -> Totals {
        let mut t = Totals::default();
        for p in &self.phases {
            t.input_rows += p.input_rows;
            t.remote_msgs += p.remote_msgs;
            t.output_rows += p.output_rows;
            t.local_msgs += p.local_msgs;
            t.max_output_rows_per_key = t.max_output_rows_per_key.max(p.max_output_rows_per_key);
            t.max_local_msgs_per_key = t.max_local_msgs_per_key.max(p.max_local_msgs_per_key);
            add_into(&mut t.machine_rows, &p.machine_rows);
            add_into(&mut t.machine_local_msgs, &p.machine_local_msgs);
        }
        t
    }

    /// Fraction of messages that were local, not counting the one
    /// unavoidable remote message per original input row.
    pub fn locality_excluding_input(&self) -> Option<f64> {
        let t = self.totals();
        let raw_inputs = self.phases.first().map_or(0, |p| p.input_rows);
        let remote = t.remote_msgs.saturating_sub(raw_inputs);
        let all = t.local_msgs + remote;
        (all != 0).then(|| t.local_msgs as f64 / all as f64)
    }
}

fn add_into(acc: &mut Vec<u64>, xs: &[u64]) {
    if acc.len() < xs.len() {
        acc.resize(xs.len(), 0);
    }
    for (a, x) in acc.iter_mut().zip(xs) {
        *a += x;
    }
}

/// Max over mean of a per-machine load vector; 1.0 is perfect balance.
pub fn balance_ratio(loads: &[u64]) -> Option<f64> {
    let total: u64 = loads.iter().sum();
    if loads.is_empty() || total == 0 {
        return None;
    }
    let max = *loads.iter().max().unwrap() as f64;
    Some(max * loads.len() as f64 / total as f64)
}

struct KeyOutcome<O> {
    machine: usize,
    outputs: Vec<O>,
    local_msgs: u64,
}

/// Runs one simulated MapReduce phase.
///
/// The mapper may emit any number of pairs per input; each counts as a
/// remote message. Outputs are returned in reducer-key order.
pub fn run_mapreduce<T, K, V, O, M, R>(
    phase: usize,
    inputs: impl IntoIterator<Item = Result<T>>,
    mut mapper: M,
    reducer: R,
    config: &SimConfig,
) -> Result<(Vec<O>, PhaseStats)>
where
    K: ShuffleKey + Hash + Eq + Ord + fmt::Debug + Send + Sync,
    V: Ord + Send,
    O: Send,
    M: FnMut(T, &mut Emitter<K, V>) -> Result<()>,
    R: Fn(&K, Vec<V>, &mut ReduceContext<O>) -> Result<()> + Sync,
{
    config.validate()?;
    let mut stats = PhaseStats::empty(phase, config.machines);

    let mut shuffle: FxHashMap<K, Vec<V>> = FxHashMap::default();
    let mut emitter = Emitter { buf: Vec::new() };
    for input in inputs {
        let input = input?;
        stats.input_rows += 1;
        mapper(input, &mut emitter)?;
        stats.remote_msgs += emitter.buf.len() as u64;
        for (k, v) in emitter.buf.drain(..) {
            shuffle.entry(k).or_default().push(v);
        }
    }

    let mut groups: Vec<(K, Vec<V>)> = shuffle.into_iter().collect();
    groups.par_sort_unstable_by(|a, b| a.0.cmp(&b.0));
    stats.reducer_keys = groups.len() as u64;

    let reduce_one = |(key, mut values): (K, Vec<V>)| -> Result<KeyOutcome<O>> {
        values.sort_unstable();
        let mut ctx = ReduceContext {
            outputs: Vec::new(),
            local_msgs: 0,
        };
        reducer(&key, values, &mut ctx).map_err(|e| Error::Reducer {
            key: format!("{key:?}"),
            source: Box::new(e),
        })?;
        Ok(KeyOutcome {
            machine: shard(&key, config),
            outputs: ctx.outputs,
            local_msgs: ctx.local_msgs,
        })
    };

    let outcomes: Vec<Result<KeyOutcome<O>>> = if config.workers > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| Error::SimConfig(e.to_string()))?;
        pool.install(|| groups.into_par_iter().map(reduce_one).collect())
    } else {
        groups.into_iter().map(reduce_one).collect()
    };

    let mut outputs = Vec::new();
    for outcome in outcomes {
        let outcome = outcome?;
        let rows = outcome.outputs.len() as u64;
        stats.output_rows += rows;
        stats.local_msgs += outcome.local_msgs;
        stats.max_output_rows_per_key = stats.max_output_rows_per_key.max(rows);
        stats.max_local_msgs_per_key = stats.max_local_msgs_per_key.max(outcome.local_msgs);
        stats.machine_rows[outcome.machine] += rows;
        stats.machine_local_msgs[outcome.machine] += outcome.local_msgs;
        outputs.extend(outcome.outputs);
    }
    Ok((outputs, stats))
}

/// Materialized output of one phase, kept in memory or spilled to an
/// anonymous temp file when it exceeds the configured row threshold.
pub enum PhaseStore {
    Memory(Vec<(SegmentKey, i64)>),
    Spilled {
        file: File,
        rows: usize,
        width: usize,
    },
}

impl PhaseStore {
    pub fn new(rows: Vec<(SegmentKey, i64)>, config: &SimConfig) -> Result<Self> {
        if rows.len() <= config.spill_threshold {
            return Ok(PhaseStore::Memory(rows));
        }
        let width = rows.first().map_or(0, |(k, _)| k.len());
        let file = tempfile::tempfile().map_err(|e| Error::io("creating spill file", e))?;
        let mut w = BufWriter::new(file);
        let mut write = || -> std::io::Result<()> {
            for (key, count) in &rows {
                debug_assert_eq!(key.len(), width);
                for c in key.cells() {
                    w.write_all(&c.raw().to_le_bytes())?;
                }
                w.write_all(&count.to_le_bytes())?;
            }
            w.flush()
        };
        write().map_err(|e| Error::io("writing spill file", e))?;
        let mut file = w
            .into_inner()
            .map_err(|e| Error::io("writing spill file", e.into_error()))?;
        file.seek(SeekFrom::Start(0))
            .map_err(|e| Error::io("rewinding spill file", e))?;
        Ok(PhaseStore::Spilled {
            file,
            rows: rows.len(),
            width,
        })
    }

    pub fn len(&self) -> usize {
        match self {
            PhaseStore::Memory(v) => v.len(),
            PhaseStore::Spilled { rows, .. } => *rows,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_spilled(&self) -> bool {
        matches!(self, PhaseStore::Spilled { .. })
    }

    pub fn into_rows(self) -> Box<dyn Iterator<Item = Result<(SegmentKey, i64)>> + Send> {
        match self {
            PhaseStore::Memory(v) => Box::new(v.into_iter().map(Ok)),
            PhaseStore::Spilled { file, rows, width } => {
                let mut r = BufReader::new(file);
                let mut buf = vec![0u8; width * 4 + 8];
                Box::new((0..rows).map(move |_| {
                    r.read_exact(&mut buf)
                        .map_err(|e| Error::io("reading spill file", e))?;
                    let key = SegmentKey::new(
                        buf[..width * 4]
                            .chunks_exact(4)
                            .map(|b| Cell::from_raw(u32::from_le_bytes(b.try_into().unwrap()))),
                    );
                    let count = i64::from_le_bytes(buf[width * 4..].try_into().unwrap());
                    Ok((key, count))
                }))
            }
        }
    }
}

/// Formats with K/M/G/T suffixes and one decimal, e.g. `24.9G`.
pub fn format_si(n: u64) -> String {
    const UNITS: [&str; 5] = ["K", "M", "G", "T", "P"];
    if n < 1000 {
        return n.to_string();
    }
    let mut v = n as f64;
    let mut unit = "";
    for u in UNITS {
        if v < 999.95 {
            break;
        }
        v /= 1000.0;
        unit = u;
    }
    format!("{v:.1}{unit}")
}

fn format_ratio(r: Ratio) -> String {
    r.value()
        .map_or_else(|| "-".to_string(), |v| format!("{v:.1}"))
}

fn format_balance(loads: &[u64]) -> String {
    balance_ratio(loads).map_or_else(|| "-".to_string(), |v| format!("{v:.2}"))
}

/// Text rendering: one row per phase plus a totals row.
pub fn render_stats(stats: &RunStats) -> String {
    let header = [
        "phase",
        "#input rows",
        "#remote msgs",
        "#output rows",
        "#local msgs",
        "phase blow-up",
        "#local/#remote",
        "max #nodes per key",
        "max #local msgs per key",
        "machine rows max/mean",
        "machine local max/mean",
    ];
    let mut rows: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
    for p in &stats.phases {
        rows.push(vec![
            p.phase.to_string(),
            format_si(p.input_rows),
            format_si(p.remote_msgs),
            format_si(p.output_rows),
            format_si(p.local_msgs),
            format_ratio(p.phase_blowup()),
            format_ratio(p.local_per_remote()),
            format_si(p.max_output_rows_per_key),
            format_si(p.max_local_msgs_per_key),
            format_balance(&p.machine_rows),
            format_balance(&p.machine_local_msgs),
        ]);
    }
    if stats.phases.len() > 1 {
        let t = stats.totals();
        rows.push(vec![
            "total".to_string(),
            format_si(t.input_rows),
            format_si(t.remote_msgs),
            format_si(t.output_rows),
            format_si(t.local_msgs),
            String::new(),
            String::new(),
            format_si(t.max_output_rows_per_key),
            format_si(t.max_local_msgs_per_key),
            format_balance(&t.machine_rows),
            format_balance(&t.machine_local_msgs),
        ]);
    }

    let widths: Vec<usize> = (0..header.len())
        .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = format!("run stats ({})\n", stats.algorithm);
    for (i, row) in rows.iter().enumerate() {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(cell, w)| format!("{cell:>w$}"))
            .collect();
        out.push_str(line.join(" | ").trim_end());
        out.push('\n');
        if i == 0 {
            let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
            out.push_str(&rule.join("-+-"));
            out.push('\n');
        }
    }
    if let Some(loc) = stats.locality_excluding_input() {
        out.push_str(&format!(
            "local share of messages (excluding one per input row): {:.1}%\n",
            loc * 100.0
        ));
    }
    let t = stats.totals();
    if let Some(b) = balance_ratio(&t.machine_local_msgs) {
        out.push_str(&format!(
            "machine balance (max/mean local msgs over {} machines): {b:.2}\n",
            t.machine_local_msgs.len()
        ));
    }
    out
}

#[derive(Serialize)]
struct PhaseRecord<'a> {
    algorithm: &'a str,
    phase: usize,
    input_rows: u64,
    remote_msgs: u64,
    output_rows: u64,
    local_msgs: u64,
    phase_blowup: Option<f64>,
    local_per_remote: Option<f64>,
    reducer_keys: u64,
    max_output_rows_per_key: u64,
    max_local_msgs_per_key: u64,
    machine_rows: &'a [u64],
    machine_local_msgs: &'a [u64],
}

/// Machine-readable stats: one JSON object per phase, one per line.
pub fn write_stats_jsonl(stats: &RunStats, mut out: impl Write) -> Result<()> {
    for p in &stats.phases {
        let record = PhaseRecord {
            algorithm: &stats.algorithm,
            phase: p.phase,
            input_rows: p.input_rows,
            remote_msgs: p.remote_msgs,
            output_rows: p.output_rows,
            local_msgs: p.local_msgs,
            phase_blowup: p.phase_blowup().value(),
            local_per_remote: p.local_per_remote().value(),
            reducer_keys: p.reducer_keys,
            max_output_rows_per_key: p.max_output_rows_per_key,
            max_local_msgs_per_key: p.max_local_msgs_per_key,
            machine_rows: &p.machine_rows,
            machine_local_msgs: &p.machine_local_msgs,
        };
        serde_json::to_writer(&mut out, &record)
            .map_err(|e| Error::io("writing stats", e.into()))?;
        out.write_all(b"\n")
            .map_err(|e| Error::io("writing stats", e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sum_reducer(k: &u64, vs: Vec<i64>, ctx: &mut ReduceContext<(u64, i64)>) -> Result<()> {
        ctx.emit((*k, vs.iter().sum()));
        Ok(())
    }

    #[test]
    fn shard_is_deterministic_and_in_range() {
        let c = SimConfig::new(7, 42).unwrap();
        for k in 0u64..1000 {
            let m = shard(&k, &c);
            assert!(m < 7);
            assert_eq!(m, shard(&k, &c));
        }
        let one = SimConfig::new(1, 9).unwrap();
        assert!((0u64..100).all(|k| shard(&k, &one) == 0));
    }

    #[test]
    fn shard_is_stable_across_platforms() {
        // Frozen from xxh64 of the little-endian key bytes.
        let c = SimConfig::new(400, 0).unwrap();
        let got: Vec<usize> = (0u64..5).map(|k| shard(&k, &c)).collect();
        let expected: Vec<usize> = (0u64..5)
            .map(|k| ((xxh64(&k.to_le_bytes(), 0) as u128 * 400) >> 64) as usize)
            .collect();
        assert_eq!(got, expected);
        assert_eq!(xxh64(b"", 0), 0xEF46DB3751D8E999);
    }

    #[test]
    fn shard_balances_uniform_keys() {
        let c = SimConfig::new(16, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut loads = vec![0u64; 16];
        for _ in 0..100_000 {
            loads[shard(&rng.random::<u64>(), &c)] += 1;
        }
        let ratio = balance_ratio(&loads).unwrap();
        assert!(ratio <= 1.25, "max/mean {ratio}");
    }

    #[test]
    fn identity_map_sum_reduce() {
        let c = SimConfig::new(4, 0).unwrap();
        let inputs = vec![Ok((5u64, 1i64)), Ok((5, 2))];
        let (out, stats) = run_mapreduce(
            1,
            inputs,
            |(k, v), e: &mut Emitter<u64, i64>| {
                e.emit(k, v);
                Ok(())
            },
            sum_reducer,
            &c,
        )
        .unwrap();
        assert_eq!(out, vec![(5, 3)]);
        assert_eq!(stats.remote_msgs, 2);
        assert_eq!(stats.input_rows, 2);
        assert_eq!(stats.output_rows, 1);
        assert_eq!(stats.reducer_keys, 1);
    }

    #[test]
    fn empty_input_gives_zero_stats() {
        let c = SimConfig::new(3, 0).unwrap();
        let (out, stats) = run_mapreduce(
            1,
            Vec::<Result<(u64, i64)>>::new(),
            |(k, v), e: &mut Emitter<u64, i64>| {
                e.emit(k, v);
                Ok(())
            },
            sum_reducer,
            &c,
        )
        .unwrap();
        assert!(out.is_empty());
        assert_eq!(stats, PhaseStats::empty(1, 3));
    }

    #[test]
    fn results_independent_of_workers_and_conserve_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data: Vec<(u64, i64)> = (0..5000)
            .map(|_| (rng.random_range(0..300), rng.random_range(-50..50)))
            .collect();
        let run = |workers| {
            let c = SimConfig::new(8, 11).unwrap().with_workers(workers);
            run_mapreduce(
                2,
                data.iter().copied().map(Ok),
                |(k, v), e: &mut Emitter<u64, i64>| {
                    e.emit(k, v);
                    Ok(())
                },
                |k: &u64, vs: Vec<i64>, ctx: &mut ReduceContext<(u64, i64)>| {
                    ctx.add_local(vs.len() as u64);
                    ctx.emit((*k, vs.iter().sum()));
                    Ok(())
                },
                &c,
            )
            .unwrap()
        };
        let (a, sa) = run(1);
        let (b, sb) = run(4);
        assert_eq!(a, b);
        assert_eq!(sa, sb);
        assert!(a.windows(2).all(|w| w[0].0 < w[1].0));
        let total_in: i64 = data.iter().map(|d| d.1).sum();
        let total_out: i64 = a.iter().map(|d| d.1).sum();
        assert_eq!(total_in, total_out);
        assert_eq!(sa.machine_rows.iter().sum::<u64>(), sa.output_rows);
        assert_eq!(sa.machine_local_msgs.iter().sum::<u64>(), sa.local_msgs);
        assert!(sa.max_local_msgs_per_key <= sa.local_msgs);
    }

    #[test]
    fn reducer_error_carries_key() {
        let c = SimConfig::default();
        let err = run_mapreduce(
            1,
            vec![Ok(9u64)],
            |k, e: &mut Emitter<u64, i64>| {
                e.emit(k, 0);
                Ok(())
            },
            |_: &u64, _: Vec<i64>, _: &mut ReduceContext<()>| {
                Err(Error::Overflow { key: "x".into() })
            },
            &c,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Reducer { ref key, .. } if key == "9"));
    }

    #[test]
    fn zero_machines_rejected() {
        assert!(SimConfig::new(0, 0).is_err());
    }

    #[test]
    fn spill_round_trips() {
        let rows: Vec<(SegmentKey, i64)> = (0..100u32)
            .map(|i| (SegmentKey::from_raw(&[i, 0, i % 7]), i as i64 - 50))
            .collect();
        let c = SimConfig::default().with_spill_threshold(10);
        let store = PhaseStore::new(rows.clone(), &c).unwrap();
        assert!(store.is_spilled());
        assert_eq!(store.len(), 100);
        let back: Vec<_> = store.into_rows().collect::<Result<_>>().unwrap();
        assert_eq!(back, rows);
        let mem = PhaseStore::new(rows.clone(), &SimConfig::default()).unwrap();
        assert!(!mem.is_spilled());
    }

    #[test]
    fn si_formatting() {
        assert_eq!(format_si(0), "0");
        assert_eq!(format_si(999), "999");
        assert_eq!(format_si(1000), "1.0K");
        assert_eq!(format_si(24_900_000_000), "24.9G");
        assert_eq!(format_si(1_750_000), "1.8M");
        assert_eq!(format_si(999_990), "1.0M");
    }

    fn phase(phase: usize, input: u64, output: u64, local: u64) -> PhaseStats {
        PhaseStats {
            phase,
            input_rows: input,
            remote_msgs: input,
            output_rows: output,
            local_msgs: local,
            reducer_keys: 1,
            max_output_rows_per_key: output,
            max_local_msgs_per_key: local,
            machine_rows: vec![output],
            machine_local_msgs: vec![local],
        }
    }

    #[test]
    fn render_three_phase_table() {
        // Rounded per-phase figures of a published 3-phase run; totals re-add them.
        let stats = RunStats {
            algorithm: "batched".into(),
            phases: vec![
                phase(1, 24_900_000_000, 1_800_000_000, 4_500_000_000),
                phase(2, 1_800_000_000, 5_300_000_000, 8_000_000_000),
                phase(3, 5_300_000_000, 35_000_000_000, 45_600_000_000),
            ],
        };
        let text = render_stats(&stats);
        let lines: Vec<&str> = text.lines().collect();
        // title, header, rule, 3 phases, totals, locality, balance
        assert_eq!(lines.len(), 9, "{text}");
        assert!(lines[3].contains("24.9G"));
        assert!(lines[5].contains("35.0G") && lines[5].contains("6.6") && lines[5].contains("8.6"));
        assert!(
            lines[6].trim_start().starts_with("total")
                && lines[6].contains("32.0G")
                && lines[6].contains("58.1G")
        );
        assert!(text.contains("89.1%"), "{text}");
        let t = stats.totals();
        assert_eq!(t.input_rows, 32_000_000_000);
    }

    #[test]
    fn render_single_phase_has_no_totals() {
        let stats = RunStats {
            algorithm: "x".into(),
            phases: vec![phase(1, 10, 20, 30)],
        };
        let text = render_stats(&stats);
        assert_eq!(
            text.lines()
                .filter(|l| l.trim_start().starts_with("total"))
                .count(),
            0
        );
        assert_eq!(text.lines().nth(3).unwrap().split('|').count(), 11);
    }

    #[test]
    fn stats_jsonl_has_one_record_per_phase() {
        let stats = RunStats {
            algorithm: "batched".into(),
            phases: vec![phase(1, 10, 5, 2), phase(2, 5, 15, 12)],
        };
        let mut buf = Vec::new();
        write_stats_jsonl(&stats, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let recs: Vec<serde_json::Value> = text
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[1]["phase_blowup"], 3.0);
        assert_eq!(recs[1]["local_per_remote"], 12.0 / 5.0);
        assert_eq!(recs[0]["max_local_msgs_per_key"], 2);
    }
}
