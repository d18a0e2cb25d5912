//! Seeded random instance generation.

use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Map;

use crate::error::{Error, Result};
use crate::model::{InstanceFile, RawStream, MAX_PERIOD_EXPONENT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntervalModel {
    /// Ordered (source, destination) pairs drawn uniformly.
    Uniform,
    /// Every stream starts or ends at switch 1.
    #[default]
    HubBiased,
}

impl FromStr for IntervalModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "hub" | "hub-biased" => Ok(Self::HubBiased),
            other => Err(Error::InvalidGenSpec(format!(
                "unknown interval model {other:?}"
            ))),
        }
    }
}

/// Weighted set of period exponents, written `0,1,2` or `0:3,4:1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodMix(pub Vec<(u32, u32)>);

impl PeriodMix {
    pub fn uniform(exponents: impl IntoIterator<Item = u32>) -> Self {
        Self(exponents.into_iter().map(|k| (k, 1)).collect())
    }

    pub fn max_exponent(&self) -> u32 {
        self.0.iter().map(|&(k, _)| k).max().unwrap_or(0)
    }
}

impl FromStr for PeriodMix {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidGenSpec(format!("bad period mix {s:?}"));
        let mut mix = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, w) = match part.split_once(':') {
                Some((k, w)) => (k.parse().map_err(|_| bad())?, w.parse().map_err(|_| bad())?),
                None => (part.parse().map_err(|_| bad())?, 1),
            };
            mix.push((k, w));
        }
        Ok(Self(mix))
    }
}

impl fmt::Display for PeriodMix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(k, w)| format!("{k}:{w}")).collect();
        f.write_str(&parts.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenSpec {
    pub switches: u32,
    pub stream_count: usize,
    pub period_exponents: PeriodMix,
    pub model: IntervalModel,
    pub seed: u64,
    /// Redraw each stream until both directions stay feasible.
    pub feasible_only: bool,
    /// Draws allowed per stream when `feasible_only` is set.
    pub max_attempts: u64,
}

impl GenSpec {
    pub fn new(switches: u32, stream_count: usize, period_exponents: PeriodMix) -> Self {
        Self {
            switches,
            stream_count,
            period_exponents,
            model: IntervalModel::default(),
            seed: 0,
            feasible_only: false,
            max_attempts: 1000,
        }
    }

    fn check(&self) -> Result<()> {
        if self.switches < 2 {
            return Err(Error::InvalidGenSpec(format!(
                "need at least 2 switches, got {}",
                self.switches
            )));
        }
        if self.period_exponents.0.is_empty()
            || self.period_exponents.0.iter().all(|&(_, w)| w == 0)
        {
            return Err(Error::InvalidGenSpec(
                "period mix has no positive weight".into(),
            ));
        }
        if self.period_exponents.max_exponent() > MAX_PERIOD_EXPONENT {
            return Err(Error::InvalidGenSpec(format!(
                "period exponent above {MAX_PERIOD_EXPONENT}"
            )));
        }
        if self.feasible_only && self.max_attempts == 0 {
            return Err(Error::InvalidGenSpec(
                "max_attempts must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Draws an instance. With `feasible_only`, a stream is admitted only if the
/// weighted link loads of its direction stay within capacity, so the result
/// always passes the feasibility test.
pub fn generate(spec: &GenSpec) -> Result<InstanceFile> {
    spec.check()?;
    let n = spec.switches;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let weights: Vec<u32> = spec.period_exponents.0.iter().map(|&(_, w)| w).collect();
    let pick = WeightedIndex::new(&weights).map_err(|e| Error::InvalidGenSpec(e.to_string()))?;

    // Loads in units of 1 / 2^kmax; a period-2^k stream costs 2^(kmax-k)
    // on every link it crosses, and each link holds at most 2^kmax.
    let kmax = spec.period_exponents.max_exponent();
    let capacity = 1u64 << kmax;
    let mut loads = [vec![0u64; n as usize], vec![0u64; n as usize]];

    let mut streams = Vec::with_capacity(spec.stream_count);
    let mut attempts = 0u64;
    for i in 0..spec.stream_count {
        let mut tries = 0u64;
        loop {
            tries += 1;
            attempts += 1;
            let k = spec.period_exponents.0[pick.sample(&mut rng)].0;
            let (src, dst) = endpoints(spec.model, n, &mut rng);
            if spec.feasible_only {
                let (lo, hi, dir) = if src < dst {
                    (src, dst, 0)
                } else {
                    (dst, src, 1)
                };
                let cost = 1u64 << (kmax - k);
                let span = (lo as usize)..(hi as usize);
                if loads[dir][span.clone()]
                    .iter()
                    .any(|&l| l + cost > capacity)
                {
                    if tries >= spec.max_attempts {
                        return Err(Error::GenerationExhausted {
                            attempts,
                            placed: i,
                            requested: spec.stream_count,
                        });
                    }
                    continue;
                }
                loads[dir][span].iter_mut().for_each(|l| *l += cost);
            }
            streams.push(RawStream::new(format!("s{}", i + 1), src, dst, 1u64 << k));
            break;
        }
    }
    Ok(InstanceFile {
        switches: n,
        streams,
        extra: Map::new(),
    })
}

fn endpoints(model: IntervalModel, n: u32, rng: &mut ChaCha8Rng) -> (u32, u32) {
    match model {
        IntervalModel::Uniform => {
            let src = rng.random_range(1..=n);
            let mut dst = rng.random_range(1..n);
            if dst >= src {
                dst += 1;
            }
            (src, dst)
        }
        IntervalModel::HubBiased => {
            let other = rng.random_range(2..=n);
            if rng.random_bool(0.5) {
                (other, 1)
            } else {
                (1, other)
            }
        }
    }
}
