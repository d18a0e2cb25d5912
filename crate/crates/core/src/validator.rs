//! Schedule and coloring audits that do not trust the scheduler.
//!
//! [`validate`] rebuilds port occupancy from injection times alone and
//! reports every conflict, broken no-wait chain, window miss and missing
//! replication. [`replay`] is a second, deliberately naive checker that
//! unrolls two hyperperiods in absolute time.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::coloring::GoodColoring;
use crate::error::{Error, Result};
use crate::model::{Instance, Normalized};
use crate::schedule::{wrap_slot, Schedule, ScheduleDocument};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    PortConflict,
    NotNoWait,
    WindowViolation,
    MissingReplication,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub streams: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub replications: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direction: Option<String>,
    /// Physical egress port, e.g. `P_{2,3}`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub port: Option<String>,
    /// Normalized link index.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub link: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slot: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layer: Option<u64>,
    pub detail: String,
}

impl Violation {
    fn new(kind: ViolationKind, detail: String) -> Self {
        Self {
            kind,
            streams: Vec::new(),
            replications: Vec::new(),
            direction: None,
            port: None,
            link: None,
            slot: None,
            layer: None,
            detail,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub verdict: Verdict,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    fn from_violations(violations: Vec<Violation>) -> Self {
        Self {
            verdict: if violations.is_empty() {
                Verdict::Pass
            } else {
                Verdict::Fail
            },
            violations,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn count(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }
}

/// Audits one direction's schedule against its instance.
pub fn validate(schedule: &Schedule, instance: &Instance) -> Result<ValidationReport> {
    if schedule.direction != instance.direction() {
        return Err(Error::SchemaMismatch(format!(
            "schedule is {}, instance is {}",
            schedule.direction,
            instance.direction()
        )));
    }
    if schedule.hyperperiod != instance.hyperperiod() {
        return Err(Error::SchemaMismatch(format!(
            "schedule hyperperiod {} differs from instance hyperperiod {}",
            schedule.hyperperiod,
            instance.hyperperiod()
        )));
    }
    let index: HashMap<&str, usize> = instance
        .streams()
        .iter()
        .enumerate()
        .map(|(i, s)| (s.id.as_str(), i))
        .collect();
    let mut ords = Vec::with_capacity(schedule.entries.len());
    for e in &schedule.entries {
        let ord = *index
            .get(e.stream.as_str())
            .ok_or_else(|| Error::SchemaMismatch(format!("unknown stream {:?}", e.stream)))?;
        ords.push(ord);
    }

    let topology = instance.topology();
    let direction = instance.direction();
    let p = instance.hyperperiod();
    let mut violations = Vec::new();
    let tag = |mut v: Violation| {
        v.direction = Some(direction.to_string());
        v
    };

    // replication bookkeeping
    let mut seen: Vec<Vec<u64>> = vec![Vec::new(); instance.len()];
    for (e, &ord) in schedule.entries.iter().zip(&ords) {
        seen[ord].push(e.replication);
    }
    for (ord, s) in instance.streams().iter().enumerate() {
        let expected = s.replications(p);
        let reps = &mut seen[ord];
        reps.sort_unstable();
        let ok = reps.len() as u64 == expected
            && reps.iter().enumerate().all(|(i, &r)| r == i as u64 + 1);
        if !ok {
            let mut v = Violation::new(
                ViolationKind::MissingReplication,
                format!("expected replications 1..={expected}, found {reps:?}"),
            );
            v.streams.push(s.id.clone());
            violations.push(tag(v));
        }
    }

    // windows and hop chains
    let mut hops: Vec<Vec<u64>> = Vec::with_capacity(schedule.entries.len());
    for (e, &ord) in schedule.entries.iter().zip(&ords) {
        let s = &instance.streams()[ord];
        let lo = (e.replication.saturating_sub(1)) * s.period + 1;
        let hi = e.replication * s.period;
        let layer = (e.injection_time + 1).checked_sub(s.a as u64);
        if e.replication == 0 || !matches!(layer, Some(l) if l >= lo && l <= hi) {
            let mut v = Violation::new(
                ViolationKind::WindowViolation,
                format!(
                    "injection time {} gives layer {}, window is [{lo}, {hi}]",
                    e.injection_time,
                    layer.map_or("<1".to_owned(), |l| l.to_string())
                ),
            );
            v.streams.push(s.id.clone());
            v.replications.push(e.replication);
            v.layer = layer;
            violations.push(tag(v));
        }

        let len = (s.b - s.a) as u64;
        let times = match &e.hop_slots {
            None => (0..len).map(|h| e.injection_time + h).collect(),
            Some(given) => {
                let chained = given.len() as u64 == len
                    && given.first() == Some(&e.injection_time)
                    && given.windows(2).all(|w| w[1] == w[0] + 1);
                if !chained {
                    let mut v = Violation::new(
                        ViolationKind::NotNoWait,
                        format!(
                            "hop slots {given:?} are not consecutive from {}",
                            e.injection_time
                        ),
                    );
                    v.streams.push(s.id.clone());
                    v.replications.push(e.replication);
                    violations.push(tag(v));
                }
                given.clone()
            }
        };
        hops.push(times);
    }

    // exclusive use of each (link, slot mod P)
    let mut cells: Vec<(u32, u64, usize)> = Vec::new();
    for (idx, (times, &ord)) in hops.iter().zip(&ords).enumerate() {
        let s = &instance.streams()[ord];
        for (h, &t) in times.iter().enumerate() {
            let link = s.a + h as u32;
            if link < s.b {
                cells.push((link, wrap_slot(t, p), idx));
            }
        }
    }
    cells.sort_unstable();
    let mut i = 0;
    while i < cells.len() {
        let mut j = i + 1;
        while j < cells.len() && cells[j].0 == cells[i].0 && cells[j].1 == cells[i].1 {
            j += 1;
        }
        if j - i > 1 {
            let (link, slot, _) = cells[i];
            let mut v = Violation::new(
                ViolationKind::PortConflict,
                format!("{} replications share link {link} in slot {slot}", j - i),
            );
            for &(_, _, idx) in &cells[i..j] {
                v.streams.push(schedule.entries[idx].stream.clone());
                v.replications.push(schedule.entries[idx].replication);
            }
            v.port = Some(topology.port(direction, link).to_string());
            v.link = Some(link);
            v.slot = Some(slot);
            violations.push(tag(v));
        }
        i = j;
    }

    Ok(ValidationReport::from_violations(violations))
}

/// Audits both directions of a document. A direction with streams but no
/// schedule counts as missing all of its replications.
pub fn validate_document(
    document: &ScheduleDocument,
    normalized: &Normalized,
) -> Result<ValidationReport> {
    let n = normalized.topology().switches();
    if document.switches != n {
        return Err(Error::SchemaMismatch(format!(
            "document is for {} switches, instance has {n}",
            document.switches
        )));
    }
    let mut violations = Vec::new();
    for instance in normalized.directions() {
        let report = match document.get(instance.direction()) {
            Some(s) => validate(s, instance)?,
            None if instance.is_empty() => continue,
            None => {
                let empty = Schedule {
                    hyperperiod: instance.hyperperiod(),
                    direction: instance.direction(),
                    entries: Vec::new(),
                };
                validate(&empty, instance)?
            }
        };
        violations.extend(report.violations);
    }
    Ok(ValidationReport::from_violations(violations))
}

/// Checks window and properness conditions of a layer assignment directly.
pub fn check_coloring(coloring: &GoodColoring, instance: &Instance) -> Result<ValidationReport> {
    if coloring.hyperperiod() != instance.hyperperiod() || coloring.stream_count() != instance.len()
    {
        return Err(Error::SchemaMismatch(format!(
            "coloring covers {} streams over {}, instance has {} over {}",
            coloring.stream_count(),
            coloring.hyperperiod(),
            instance.len(),
            instance.hyperperiod()
        )));
    }
    let p = instance.hyperperiod();
    let mut violations = Vec::new();
    let mut by_layer: BTreeMap<u64, Vec<(u32, u32, usize, u64)>> = BTreeMap::new();
    for (ord, s) in instance.streams().iter().enumerate() {
        let layers = coloring.layers_of(ord);
        if layers.len() as u64 != s.replications(p) {
            let mut v = Violation::new(
                ViolationKind::MissingReplication,
                format!(
                    "{} layers for {} replications",
                    layers.len(),
                    s.replications(p)
                ),
            );
            v.streams.push(s.id.clone());
            violations.push(v);
        }
        for (i, &layer) in layers.iter().enumerate() {
            let rep = i as u64 + 1;
            if layer < (rep - 1) * s.period + 1 || layer > rep * s.period {
                let mut v = Violation::new(
                    ViolationKind::WindowViolation,
                    format!(
                        "layer {layer} outside [{}, {}]",
                        (rep - 1) * s.period + 1,
                        rep * s.period
                    ),
                );
                v.streams.push(s.id.clone());
                v.replications.push(rep);
                v.layer = Some(layer);
                violations.push(v);
            }
            let r = s.interval();
            by_layer
                .entry(layer)
                .or_default()
                .push((r.first, r.last, ord, rep));
        }
    }
    // within a layer the intervals must be pairwise disjoint
    for (layer, mut spans) in by_layer {
        spans.sort_unstable();
        let mut reach: Option<(u32, usize, u64)> = None;
        for &(first, last, ord, rep) in &spans {
            if let Some((end, o, r)) = reach {
                if first <= end {
                    let mut v = Violation::new(
                        ViolationKind::PortConflict,
                        format!("overlapping streams share layer {layer}"),
                    );
                    v.streams = vec![
                        instance.streams()[o].id.clone(),
                        instance.streams()[ord].id.clone(),
                    ];
                    v.replications = vec![r, rep];
                    v.layer = Some(layer);
                    v.link = Some(first);
                    violations.push(v);
                }
            }
            if reach.is_none_or(|(end, _, _)| last > end) {
                reach = Some((last, ord, rep));
            }
        }
    }
    Ok(ValidationReport::from_violations(violations))
}

/// Outcome of the absolute-time replay.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ReplayOutcome {
    /// Pairs of transmissions on one port at one instant.
    pub collisions: u64,
    /// Period windows with zero or several emissions, plus emissions outside
    /// every window.
    pub emission_faults: u64,
    /// Replications that pause between hops.
    pub waiting: u64,
}

impl ReplayOutcome {
    pub fn accepted(&self) -> bool {
        self.collisions == 0 && self.emission_faults == 0 && self.waiting == 0
    }
}

/// Replays the periodic schedule over two hyperperiods of absolute time and
/// counts collisions, wrongly timed emissions and waiting frames.
/// Replication labels are ignored; only the stated times matter.
pub fn replay(schedule: &Schedule, instance: &Instance) -> ReplayOutcome {
    let p = instance.hyperperiod();
    let streams: HashMap<&str, usize> = instance
        .streams()
        .iter()
        .enumerate()
        .map(|(i, s)| (s.id.as_str(), i))
        .collect();
    let mut out = ReplayOutcome::default();

    let mut emissions: Vec<Vec<u64>> = vec![Vec::new(); instance.len()];
    let mut trains: Vec<(usize, Vec<u64>)> = Vec::new();
    for e in &schedule.entries {
        let Some(&ord) = streams.get(e.stream.as_str()) else {
            out.emission_faults += 1;
            continue;
        };
        let s = &instance.streams()[ord];
        emissions[ord].push(e.injection_time);
        let hops = (s.b - s.a) as usize;
        let times: Vec<u64> = match &e.hop_slots {
            Some(given) => given.clone(),
            None => (0..hops as u64).map(|h| e.injection_time + h).collect(),
        };
        if times.len() != hops
            || times.first() != Some(&e.injection_time)
            || times.windows(2).any(|w| w[1] != w[0] + 1)
        {
            out.waiting += 1;
        }
        trains.push((ord, times));
    }

    for (ord, s) in instance.streams().iter().enumerate() {
        let a = s.a as u64;
        let windows = s.replications(p);
        let mut count = vec![0u64; windows as usize];
        for &t in &emissions[ord] {
            if t < a || t >= a + p {
                out.emission_faults += 1;
            } else {
                count[((t - a) / s.period) as usize] += 1;
            }
        }
        out.emission_faults += count.iter().filter(|&&c| c != 1).count() as u64;
    }

    // steady state: every train has repeated at least once before `start`
    let start = trains
        .iter()
        .flat_map(|(_, t)| t.iter().copied())
        .max()
        .unwrap_or(0);
    let mut busy: HashMap<(u32, u64), u32> = HashMap::new();
    for (ord, times) in &trains {
        let s = &instance.streams()[*ord];
        for (h, &t) in times.iter().enumerate() {
            let link = s.a + h as u32;
            let mut at = t + (start - t) / p * p;
            if at < start {
                at += p;
            }
            while at < start + 2 * p {
                let hits = busy.entry((link, at)).or_insert(0);
                out.collisions += *hits as u64;
                *hits += 1;
                at += p;
            }
        }
    }
    out
}
