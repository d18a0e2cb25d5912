//! Domain types for streams on a daisy chain, and the ingestion path that
//! turns raw endpoint/period records into normalized single-direction
//! instances.
//!
//! Switches are numbered `1..=n`. Link `l` joins switch `l` and `l + 1`, so
//! the chain has links `1..=n-1`. A normalized stream always runs left to
//! right from `a` to `b` and occupies the links `a..=b-1`. Right-to-left
//! traffic is mirrored (`switch -> n + 1 - switch`) so both directions share
//! one code path; the mirror is undone when ports are named.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

/// Largest supported period exponent. Loads are `sum(P / p_s)` and must fit
/// in a `u64`.
pub const MAX_PERIOD_EXPONENT: u32 = 32;

/// A daisy chain of `n >= 2` switches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Topology {
    switches: u32,
}

impl Topology {
    pub fn new(switches: u32) -> Result<Self> {
        if switches < 2 {
            return Err(Error::TooFewSwitches(switches));
        }
        Ok(Self { switches })
    }

    pub fn switches(&self) -> u32 {
        self.switches
    }

    pub fn link_count(&self) -> u32 {
        self.switches - 1
    }

    /// Links in normalized coordinates, `1..=n-1`.
    pub fn links(&self) -> impl Iterator<Item = u32> {
        1..self.switches
    }

    /// Maps a switch to its mirror image on the chain.
    pub fn mirror(&self, switch: u32) -> u32 {
        self.switches + 1 - switch
    }

    /// Physical egress port used by traffic in `direction` on normalized
    /// link `link`.
    pub fn port(&self, direction: Direction, link: u32) -> Port {
        match direction {
            Direction::LeftToRight => Port {
                from: link,
                to: link + 1,
            },
            Direction::RightToLeft => Port {
                from: self.mirror(link),
                to: self.mirror(link + 1),
            },
        }
    }

    /// Physical link index (`i` for the cable between switch `i` and `i+1`)
    /// behind a normalized link.
    pub fn physical_link(&self, direction: Direction, link: u32) -> u32 {
        match direction {
            Direction::LeftToRight => link,
            Direction::RightToLeft => self.switches - link,
        }
    }
}

/// Egress port `P_{from,to}` of switch `from` towards switch `to`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Port {
    pub from: u32,
    pub to: u32,
}

impl fmt::Display for Port {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P_{{{},{}}}", self.from, self.to)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "ltr")]
    LeftToRight,
    #[serde(rename = "rtl")]
    RightToLeft,
}

impl Direction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::LeftToRight => "ltr",
            Direction::RightToLeft => "rtl",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A contiguous run of links, both ends inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinkRange {
    pub first: u32,
    pub last: u32,
}

impl LinkRange {
    pub fn new(first: u32, last: u32) -> Self {
        debug_assert!(first <= last);
        Self { first, last }
    }

    pub fn contains(&self, link: u32) -> bool {
        self.first <= link && link <= self.last
    }

    pub fn len(&self) -> u32 {
        self.last - self.first + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn overlaps(&self, other: &LinkRange) -> bool {
        self.first <= other.last && other.first <= self.last
    }

    pub fn links(&self) -> impl Iterator<Item = u32> {
        self.first..=self.last
    }
}

/// A stream as it appears in an instance file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawStream {
    pub id: String,
    pub src_switch: u32,
    pub dst_switch: u32,
    pub period: u64,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl RawStream {
    pub fn new(id: impl Into<String>, src_switch: u32, dst_switch: u32, period: u64) -> Self {
        Self {
            id: id.into(),
            src_switch,
            dst_switch,
            period,
            extra: Map::new(),
        }
    }
}

/// The JSON ingestion format. Unknown fields survive a round trip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub switches: u32,
    pub streams: Vec<RawStream>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl InstanceFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn normalize(&self, policy: PeriodPolicy) -> Result<Normalized> {
        let topology = Topology::new(self.switches)?;
        let mut normalized = normalize(topology, &self.streams, policy)?;
        normalized.extra = self.extra.clone();
        Ok(normalized)
    }
}

/// How periods that are not powers of two are handled at ingestion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeriodPolicy {
    Reject,
    /// Largest power of two not above the period.
    #[default]
    RoundDown,
    /// Nearest power of two on a logarithmic scale.
    RoundNearest,
}

impl PeriodPolicy {
    /// Returns the power-of-two period chosen for `period`, or `None` if
    /// the policy rejects it. `period` must be positive.
    pub fn apply(&self, period: u64) -> Option<u64> {
        debug_assert!(period > 0);
        if period.is_power_of_two() {
            return Some(period);
        }
        let below = 1u64 << (63 - period.leading_zeros());
        match self {
            PeriodPolicy::Reject => None,
            PeriodPolicy::RoundDown => Some(below),
            PeriodPolicy::RoundNearest => {
                // p vs sqrt(below * 2 below); equality is impossible for integers
                let p = period as u128;
                let lo = below as u128;
                if p * p > 2 * lo * lo {
                    below.checked_mul(2)
                } else {
                    Some(below)
                }
            }
        }
    }
}

/// A normalized stream: runs from switch `a` to switch `b > a` and has a
/// power-of-two period.
#[derive(Debug, Clone, PartialEq)]
pub struct Stream {
    pub id: String,
    pub a: u32,
    pub b: u32,
    pub period: u64,
    pub extra: Map<String, Value>,
}

impl Stream {
    pub fn new(id: impl Into<String>, a: u32, b: u32, period: u64) -> Self {
        Self {
            id: id.into(),
            a,
            b,
            period,
            extra: Map::new(),
        }
    }

    /// `log2(period)`.
    pub fn exponent(&self) -> u32 {
        self.period.trailing_zeros()
    }

    /// Links traversed, `[a, b - 1]`.
    pub fn interval(&self) -> LinkRange {
        LinkRange::new(self.a, self.b - 1)
    }

    /// Number of replications inside a hyperperiod.
    pub fn replications(&self, hyperperiod: u64) -> u64 {
        hyperperiod / self.period
    }
}

/// Endpoints and period exponent of a stream, packed for linear scans.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub a: u32,
    pub b: u32,
    pub exp: u32,
}

/// Single-direction set of normalized streams on a chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    topology: Topology,
    direction: Direction,
    streams: Vec<Stream>,
    spans: Vec<Span>,
    hyperperiod: u64,
    k_star: u32,
}

impl Instance {
    pub fn new(topology: Topology, direction: Direction, streams: Vec<Stream>) -> Result<Self> {
        let n = topology.switches();
        let mut seen = HashSet::with_capacity(streams.len());
        for s in &streams {
            if !(s.a < s.b && s.a >= 1 && s.b <= n) {
                return Err(Error::BadNormalizedStream {
                    id: s.id.clone(),
                    a: s.a,
                    b: s.b,
                    switches: n,
                });
            }
            check_period(&s.id, s.period)?;
            if !seen.insert(s.id.as_str()) {
                return Err(Error::DuplicateStreamId(s.id.clone()));
            }
        }
        let hyperperiod = hyperperiod(&streams);
        let spans = streams
            .iter()
            .map(|s| Span {
                a: s.a,
                b: s.b,
                exp: s.exponent(),
            })
            .collect();
        Ok(Self {
            topology,
            direction,
            streams,
            spans,
            hyperperiod,
            k_star: hyperperiod.trailing_zeros(),
        })
    }

    /// Like [`Instance::new`] but schedules over `horizon`, a power of two
    /// no smaller than any period. Sub-instances produced by splitting a
    /// hyperperiod in half keep the halved horizon even when no stream
    /// has that period.
    pub fn with_horizon(
        topology: Topology,
        direction: Direction,
        streams: Vec<Stream>,
        horizon: u64,
    ) -> Result<Self> {
        let mut inst = Self::new(topology, direction, streams)?;
        if !horizon.is_power_of_two()
            || horizon < inst.hyperperiod
            || horizon.trailing_zeros() > MAX_PERIOD_EXPONENT
        {
            return Err(Error::Precondition(format!(
                "horizon {horizon} must be a power of two between {} and 2^{MAX_PERIOD_EXPONENT}",
                inst.hyperperiod
            )));
        }
        inst.hyperperiod = horizon;
        inst.k_star = horizon.trailing_zeros();
        Ok(inst)
    }

    /// Left-to-right instance from `(id, a, b, period)` tuples.
    pub fn chain<I, S>(switches: u32, streams: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, u32, u32, u64)>,
        S: Into<String>,
    {
        let streams = streams
            .into_iter()
            .map(|(id, a, b, p)| Stream::new(id, a, b, p))
            .collect();
        Self::new(Topology::new(switches)?, Direction::LeftToRight, streams)
    }

    pub fn empty(topology: Topology, direction: Direction) -> Self {
        Self {
            topology,
            direction,
            streams: Vec::new(),
            spans: Vec::new(),
            hyperperiod: 1,
            k_star: 0,
        }
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn streams(&self) -> &[Stream] {
        &self.streams
    }

    /// Same order as [`Instance::streams`].
    pub fn spans(&self) -> &[Span] {
        &self.spans
    }

    pub fn len(&self) -> usize {
        self.streams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.streams.is_empty()
    }

    pub fn hyperperiod(&self) -> u64 {
        self.hyperperiod
    }

    pub fn k_star(&self) -> u32 {
        self.k_star
    }

    /// Indices of the streams with period `2^level`.
    pub fn class(&self, level: u32) -> impl Iterator<Item = usize> + '_ {
        self.streams
            .iter()
            .enumerate()
            .filter(move |(_, s)| s.exponent() == level)
            .map(|(i, _)| i)
    }

    /// Original `(src_switch, dst_switch)` of a stream of this instance.
    pub fn endpoints(&self, stream: &Stream) -> (u32, u32) {
        match self.direction {
            Direction::LeftToRight => (stream.a, stream.b),
            Direction::RightToLeft => (
                self.topology.mirror(stream.a),
                self.topology.mirror(stream.b),
            ),
        }
    }

    /// Streams in their raw, un-mirrored form.
    pub fn to_raw_streams(&self) -> Vec<RawStream> {
        self.streams
            .iter()
            .map(|s| {
                let (src, dst) = self.endpoints(s);
                RawStream {
                    id: s.id.clone(),
                    src_switch: src,
                    dst_switch: dst,
                    period: s.period,
                    extra: s.extra.clone(),
                }
            })
            .collect()
    }

    /// Total replications `sum(P / p_s)`.
    pub fn replication_count(&self) -> u64 {
        self.streams
            .iter()
            .map(|s| s.replications(self.hyperperiod))
            .sum()
    }
}

/// Both directions of an ingested instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub ltr: Instance,
    pub rtl: Instance,
    /// Unknown top-level fields of the source file.
    pub extra: Map<String, Value>,
}

impl Normalized {
    pub fn topology(&self) -> Topology {
        self.ltr.topology()
    }

    pub fn get(&self, direction: Direction) -> &Instance {
        match direction {
            Direction::LeftToRight => &self.ltr,
            Direction::RightToLeft => &self.rtl,
        }
    }

    pub fn directions(&self) -> [&Instance; 2] {
        [&self.ltr, &self.rtl]
    }
}

fn check_period(id: &str, period: u64) -> Result<()> {
    if period == 0 {
        return Err(Error::ZeroPeriod { id: id.to_owned() });
    }
    if !period.is_power_of_two() {
        return Err(Error::NotPowerOfTwo {
            id: id.to_owned(),
            period,
        });
    }
    if period.trailing_zeros() > MAX_PERIOD_EXPONENT {
        return Err(Error::PeriodTooLarge {
            id: id.to_owned(),
            period,
            max_exponent: MAX_PERIOD_EXPONENT,
        });
    }
    Ok(())
}

/// Splits raw streams by direction, mirrors right-to-left traffic and
/// applies the period policy.
pub fn normalize(
    topology: Topology,
    raw: &[RawStream],
    policy: PeriodPolicy,
) -> Result<Normalized> {
    let n = topology.switches();
    let mut ltr = Vec::new();
    let mut rtl = Vec::new();
    for r in raw {
        for (field, value) in [("src_switch", r.src_switch), ("dst_switch", r.dst_switch)] {
            if value < 1 || value > n {
                return Err(Error::SwitchOutOfRange {
                    id: r.id.clone(),
                    field,
                    value,
                    switches: n,
                });
            }
        }
        if r.src_switch == r.dst_switch {
            return Err(Error::SameEndpoints {
                id: r.id.clone(),
                switch: r.src_switch,
            });
        }
        if r.period == 0 {
            return Err(Error::ZeroPeriod { id: r.id.clone() });
        }
        let period = policy.apply(r.period).ok_or_else(|| Error::NotPowerOfTwo {
            id: r.id.clone(),
            period: r.period,
        })?;
        let mut stream = if r.src_switch < r.dst_switch {
            Stream::new(r.id.clone(), r.src_switch, r.dst_switch, period)
        } else {
            Stream::new(
                r.id.clone(),
                topology.mirror(r.src_switch),
                topology.mirror(r.dst_switch),
                period,
            )
        };
        stream.extra = r.extra.clone();
        if r.src_switch < r.dst_switch {
            ltr.push(stream);
        } else {
            rtl.push(stream);
        }
    }
    // ids must be unique across both directions, not just within one
    let mut seen = HashSet::with_capacity(raw.len());
    for r in raw {
        if !seen.insert(r.id.as_str()) {
            return Err(Error::DuplicateStreamId(r.id.clone()));
        }
    }
    Ok(Normalized {
        ltr: Instance::new(topology, Direction::LeftToRight, ltr)?,
        rtl: Instance::new(topology, Direction::RightToLeft, rtl)?,
        extra: Map::new(),
    })
}

/// Hyperperiod of power-of-two periods: their maximum, which is also their
/// LCM. The empty set has hyperperiod 1.
pub fn hyperperiod(streams: &[Stream]) -> u64 {
    streams.iter().map(|s| s.period).max().unwrap_or(1)
}
