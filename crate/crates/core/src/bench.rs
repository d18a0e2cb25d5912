//! Timing sweep over generated instances.

use std::io::Write;
use std::time::Instant;

use serde::Serialize;

use crate::coloring::{find_with, FindOptions};
use crate::error::{Error, Result};
use crate::feasibility::decide;
use crate::gen::{generate, GenSpec, IntervalModel, PeriodMix};
use crate::model::{Normalized, PeriodPolicy};
use crate::schedule::{synthesize, Schedule};
use crate::validator::validate;

pub const CSV_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub min_streams: usize,
    pub max_streams: usize,
    pub switches: u32,
    pub period_exponents: PeriodMix,
    pub model: IntervalModel,
    pub seed: u64,
    pub repeats: usize,
    pub warmup: usize,
    pub parallel: bool,
    pub max_attempts: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            min_streams: 1000,
            max_streams: 8000,
            switches: 32,
            period_exponents: PeriodMix::uniform(0..=10),
            model: IntervalModel::HubBiased,
            seed: 0,
            repeats: 3,
            warmup: 1,
            parallel: false,
            max_attempts: 1000,
        }
    }
}

impl BenchConfig {
    /// Doubling stream counts from `min_streams`, always ending at
    /// `max_streams`.
    pub fn sweep(&self) -> Vec<usize> {
        let mut counts = Vec::new();
        let mut c = self.min_streams.max(1).min(self.max_streams);
        while c < self.max_streams {
            counts.push(c);
            c *= 2;
        }
        counts.push(self.max_streams);
        counts
    }
}

/// One CSV row. Timings are medians in milliseconds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub schema_version: u32,
    pub stream_count: usize,
    pub switches: u32,
    pub max_period: u64,
    pub replications: u64,
    pub feasible: bool,
    pub decide_ms: f64,
    pub find_ms: f64,
    pub synth_ms: f64,
    pub validate_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Sample {
    decide: f64,
    find: f64,
    synth: f64,
    validate: f64,
}

fn ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Runs decide, find, synthesize and validate once on both directions.
fn run_once(normalized: &Normalized, options: &FindOptions) -> Result<(bool, Sample)> {
    let mut sample = Sample::default();
    let mut feasible = true;
    for instance in normalized.directions() {
        let t = Instant::now();
        let verdict = decide(instance);
        sample.decide += ms(t);
        if !verdict.is_feasible() {
            feasible = false;
            continue;
        }
        let t = Instant::now();
        let (coloring, _) = find_with(instance, options)?;
        sample.find += ms(t);
        let t = Instant::now();
        let schedule: Schedule = synthesize(&coloring, instance)?;
        sample.synth += ms(t);
        let t = Instant::now();
        let report = validate(&schedule, instance)?;
        sample.validate += ms(t);
        if !report.passed() {
            return Err(Error::Internal(format!(
                "synthesized schedule failed validation with {} violations",
                report.violations.len()
            )));
        }
    }
    Ok((feasible, sample))
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        (xs[m - 1] + xs[m]) / 2.0
    }
}

/// Benchmarks one generated instance.
pub fn bench_one(config: &BenchConfig, stream_count: usize) -> Result<BenchRow> {
    let mut spec = GenSpec::new(
        config.switches,
        stream_count,
        config.period_exponents.clone(),
    );
    spec.model = config.model;
    spec.seed = config.seed.wrapping_add(stream_count as u64);
    spec.feasible_only = true;
    spec.max_attempts = config.max_attempts;
    let normalized = generate(&spec)?.normalize(PeriodPolicy::Reject)?;
    let options = FindOptions {
        parallel: config.parallel,
        trace: false,
    };

    for _ in 0..config.warmup {
        run_once(&normalized, &options)?;
    }
    let mut feasible = true;
    let mut samples = Vec::new();
    for _ in 0..config.repeats.max(1) {
        let (f, s) = run_once(&normalized, &options)?;
        feasible &= f;
        samples.push(s);
    }
    let pick = |f: fn(&Sample) -> f64| median(samples.iter().map(f).collect());
    Ok(BenchRow {
        schema_version: CSV_SCHEMA_VERSION,
        stream_count,
        switches: config.switches,
        max_period: normalized
            .directions()
            .iter()
            .map(|i| i.hyperperiod())
            .max()
            .unwrap_or(1),
        replications: normalized
            .directions()
            .iter()
            .map(|i| i.replication_count())
            .sum(),
        feasible,
        decide_ms: pick(|s| s.decide),
        find_ms: pick(|s| s.find),
        synth_ms: pick(|s| s.synth),
        validate_ms: pick(|s| s.validate),
        total_ms: pick(|s| s.decide + s.find + s.synth + s.validate),
    })
}

pub fn bench(config: &BenchConfig) -> Result<Vec<BenchRow>> {
    config
        .sweep()
        .into_iter()
        .map(|c| bench_one(config, c))
        .collect()
}

pub fn write_csv<W: Write>(rows: &[BenchRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    w.flush()?;
    Ok(())
}
