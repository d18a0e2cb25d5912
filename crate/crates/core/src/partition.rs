//! Splitting the longest-period streams between the two halves of the
//! hyperperiod.
//!
//! Every link must keep, in each half, at most its residual capacity of
//! top-period streams. A 2-coloring of the intervals whose color classes
//! differ by at most one at every link puts at most `ceil(d/2)` streams of a
//! link with coverage `d` in either half, which is enough whenever a
//! fractional split exists. Such a coloring comes from orienting an Eulerian
//! decomposition of the endpoint multigraph.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::feasibility::load_profile;
use crate::model::{Instance, LinkRange};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Side {
    A,
    B,
}

/// Two-colors `intervals` so that at every link the two classes cover it a
/// number of times differing by at most one. Output is aligned with the
/// input and depends only on it.
pub fn balanced_bipartition(intervals: &[LinkRange]) -> Vec<Side> {
    let m = intervals.len();
    if m == 0 {
        return Vec::new();
    }

    // Interval [first, last] becomes an edge first -- last+1; it crosses
    // the cut after link l exactly when it covers l.
    let mut coords: Vec<u32> = intervals
        .iter()
        .flat_map(|r| [r.first, r.last + 1])
        .collect();
    coords.sort_unstable();
    coords.dedup();
    let vertex = |c: u32| coords.binary_search(&c).expect("coordinate was inserted");

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by_key(|&i| (intervals[i].first, intervals[i].last, i));

    let mut ends: Vec<(usize, usize)> = order
        .iter()
        .map(|&i| (vertex(intervals[i].first), vertex(intervals[i].last + 1)))
        .collect();

    let v_count = coords.len();
    let mut degree = vec![0usize; v_count];
    for &(u, v) in &ends {
        degree[u] += 1;
        degree[v] += 1;
    }
    // Consecutive odd vertices get a dummy edge; these spans are disjoint so
    // each cut sees at most one dummy.
    let odd: Vec<usize> = (0..v_count).filter(|&v| degree[v] % 2 == 1).collect();
    debug_assert!(odd.len().is_multiple_of(2));
    for pair in odd.chunks_exact(2) {
        ends.push((pair[0], pair[1]));
        degree[pair[0]] += 1;
        degree[pair[1]] += 1;
    }

    // CSR adjacency in edge order
    let mut start = vec![0usize; v_count + 1];
    for v in 0..v_count {
        start[v + 1] = start[v] + degree[v];
    }
    let mut fill = start.clone();
    let mut adj = vec![0usize; start[v_count]];
    for (e, &(u, v)) in ends.iter().enumerate() {
        adj[fill[u]] = e;
        fill[u] += 1;
        adj[fill[v]] = e;
        fill[v] += 1;
    }

    let mut used = vec![false; ends.len()];
    let mut cursor = start.clone();
    let mut forward = vec![false; ends.len()];
    for origin in 0..v_count {
        loop {
            let mut at = origin;
            let mut moved = false;
            // Closed trail from `origin`: with all degrees even it can only
            // get stuck where it started.
            loop {
                while cursor[at] < start[at + 1] && used[adj[cursor[at]]] {
                    cursor[at] += 1;
                }
                if cursor[at] == start[at + 1] {
                    break;
                }
                let e = adj[cursor[at]];
                used[e] = true;
                moved = true;
                let (u, v) = ends[e];
                if at == u {
                    forward[e] = true;
                    at = v;
                } else {
                    at = u;
                }
            }
            debug_assert_eq!(at, origin);
            if !moved {
                break;
            }
        }
    }

    let mut sides = vec![Side::A; m];
    for (pos, &i) in order.iter().enumerate() {
        sides[i] = if forward[pos] { Side::A } else { Side::B };
    }
    sides
}

/// Largest difference between the two classes' coverage over all links.
pub fn pointwise_discrepancy(intervals: &[LinkRange], sides: &[Side]) -> u64 {
    let mut events: Vec<(u32, i64)> = Vec::with_capacity(2 * intervals.len());
    for (r, side) in intervals.iter().zip(sides) {
        let w = if *side == Side::A { 1 } else { -1 };
        events.push((r.first, w));
        events.push((r.last + 1, -w));
    }
    events.sort_unstable();
    let mut balance = 0i64;
    let mut worst = 0u64;
    let mut i = 0;
    while i < events.len() {
        let at = events[i].0;
        while i < events.len() && events[i].0 == at {
            balance += events[i].1;
            i += 1;
        }
        worst = worst.max(balance.unsigned_abs());
    }
    worst
}

/// Per-link room left for top-period streams in each half,
/// `2^(k*-1) - c_{k*-1,l}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CapacityVector {
    caps: Vec<i64>,
}

impl CapacityVector {
    pub fn new(caps: Vec<i64>) -> Self {
        Self { caps }
    }

    pub fn get(&self, link: u32) -> i64 {
        self.caps[link as usize - 1]
    }

    pub fn as_slice(&self) -> &[i64] {
        &self.caps
    }
}

/// Residual capacities of the lower levels of `instance`.
pub fn residual_capacities(instance: &Instance) -> Result<CapacityVector> {
    let k = instance.k_star();
    if k == 0 {
        return Err(Error::Precondition(
            "a level-0 instance has no lower half".into(),
        ));
    }
    let lower = load_profile(instance, k - 1)?;
    let half = 1i64 << (k - 1);
    Ok(CapacityVector::new(
        lower.loads().iter().map(|&c| half - c as i64).collect(),
    ))
}

/// Split of the top-period class; indices refer to `instance.streams()`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct Bipartition {
    pub group_a: Vec<usize>,
    pub group_b: Vec<usize>,
}

impl Bipartition {
    pub fn side_of(&self, stream: usize) -> Option<Side> {
        if self.group_a.binary_search(&stream).is_ok() {
            Some(Side::A)
        } else if self.group_b.binary_search(&stream).is_ok() {
            Some(Side::B)
        } else {
            None
        }
    }
}

/// Splits the period-`2^k*` streams so that each half respects
/// `capacities` on every link.
pub fn split_top_level(instance: &Instance, capacities: &CapacityVector) -> Result<Bipartition> {
    let links = instance.topology().link_count() as usize;
    if capacities.as_slice().len() != links {
        return Err(Error::Precondition(format!(
            "capacity vector has {} entries for {} links",
            capacities.as_slice().len(),
            links
        )));
    }
    let streams = instance.streams();
    let mut top: Vec<usize> = instance.class(instance.k_star()).collect();
    top.sort_by(|&x, &y| {
        let (s, t) = (&streams[x], &streams[y]);
        (s.a, s.b, &s.id).cmp(&(t.a, t.b, &t.id))
    });
    let intervals: Vec<LinkRange> = top.iter().map(|&i| streams[i].interval()).collect();

    let demand = coverage(&intervals, links, |_| true);
    for link in 1..=links as u32 {
        let d = demand[link as usize - 1];
        let c = capacities.get(link);
        if c < (d + 1) / 2 {
            return Err(Error::Precondition(format!(
                "link {link}: residual capacity {c} cannot hold half of {d} top-period streams"
            )));
        }
    }

    let sides = balanced_bipartition(&intervals);
    for side in [Side::A, Side::B] {
        let load = coverage(&intervals, links, |i| sides[i] == side);
        if let Some(l) = (0..links).find(|&l| load[l] > capacities.as_slice()[l]) {
            return Err(Error::Internal(format!(
                "split puts {} streams on link {} in half {:?}, capacity {}",
                load[l],
                l + 1,
                side,
                capacities.as_slice()[l]
            )));
        }
    }

    let mut split = Bipartition::default();
    for (pos, &i) in top.iter().enumerate() {
        match sides[pos] {
            Side::A => split.group_a.push(i),
            Side::B => split.group_b.push(i),
        }
    }
    split.group_a.sort_unstable();
    split.group_b.sort_unstable();
    Ok(split)
}

fn coverage(intervals: &[LinkRange], links: usize, keep: impl Fn(usize) -> bool) -> Vec<i64> {
    let mut diff = vec![0i64; links + 1];
    for (i, r) in intervals.iter().enumerate() {
        if keep(i) {
            diff[r.first as usize - 1] += 1;
            diff[r.last as usize] -= 1;
        }
    }
    let mut run = 0;
    diff[..links]
        .iter()
        .map(|d| {
            run += d;
            run
        })
        .collect()
}
