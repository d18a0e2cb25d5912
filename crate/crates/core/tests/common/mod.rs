#![allow(dead_code)]

use chainsched::model::{
    Direction, Instance, Normalized, PeriodPolicy, RawStream, Stream, Topology,
};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random streams in both directions, periods drawn from `periods`.
pub fn random_raw(rng: &mut ChaCha8Rng, n: u32, count: usize, periods: &[u64]) -> Vec<RawStream> {
    (0..count)
        .map(|i| {
            let src = rng.random_range(1..=n);
            let mut dst = rng.random_range(1..n);
            if dst >= src {
                dst += 1;
            }
            let p = periods[rng.random_range(0..periods.len())];
            RawStream::new(format!("s{i:02}"), src, dst, p)
        })
        .collect()
}

pub fn normalized(n: u32, raw: &[RawStream]) -> Normalized {
    chainsched::model::normalize(Topology::new(n).unwrap(), raw, PeriodPolicy::Reject).unwrap()
}

/// A left-to-right instance in which every link carries exactly `P`
/// replications: each residue class of layers is handed to one period and
/// its links are cut into random segments, each switch being a cut point
/// with probability `cut`. A class is halved with probability `split`.
pub fn saturated(rng: &mut ChaCha8Rng, n: u32, k_star: u32, cut: f64, split: f64) -> Instance {
    let p = 1u64 << k_star;
    let mut streams = Vec::new();
    // exponents of the residue classes still to be assigned
    let mut classes = vec![0u32];
    while let Some(k) = classes.pop() {
        if k < k_star && rng.random_bool(split) {
            classes.push(k + 1);
            classes.push(k + 1);
            continue;
        }
        // the class at exponent k: tile links 1..n-1 with segments
        let mut cuts: Vec<u32> = (2..n).filter(|_| rng.random_bool(cut)).collect();
        cuts.insert(0, 1);
        cuts.push(n);
        for w in cuts.windows(2) {
            let id = format!("p{:03}", streams.len());
            streams.push(Stream::new(id, w[0], w[1], 1u64 << k));
        }
    }
    // top class must exist so that the hyperperiod is P
    if !streams.iter().any(|s| s.period == p) {
        return saturated(rng, n, k_star, cut, split);
    }
    streams.shuffle(rng);
    Instance::new(Topology::new(n).unwrap(), Direction::LeftToRight, streams).unwrap()
}

/// Greedy coloring of intervals sorted by left end; returns the number of
/// colors, which equals the maximum overlap for interval graphs.
pub fn greedy_colors(intervals: &[(u32, u32)]) -> usize {
    let mut sorted = intervals.to_vec();
    sorted.sort_unstable();
    // end of the last interval in each color
    let mut ends: Vec<u32> = Vec::new();
    for (first, last) in sorted {
        match ends.iter().position(|&e| e < first) {
            Some(c) => ends[c] = last,
            None => ends.push(last),
        }
    }
    ends.len()
}

/// Highest number of intervals covering one link.
pub fn max_overlap(intervals: &[(u32, u32)]) -> usize {
    let top = intervals.iter().map(|&(_, l)| l).max().unwrap_or(0) as usize;
    (1..=top)
        .map(|x| {
            intervals
                .iter()
                .filter(|&&(f, l)| f as usize <= x && x <= l as usize)
                .count()
        })
        .max()
        .unwrap_or(0)
}
