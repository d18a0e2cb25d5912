//! Window-constrained layer assignment by recursive halving.
//!
//! A layer assignment gives replication `i` of stream `s` a layer in
//! `[(i-1)*p_s + 1, i*p_s]` such that streams sharing a link never share a
//! layer. The solver splits the longest-period streams between the two
//! halves of the hyperperiod, solves both halves at half the horizon and
//! stitches the results. When every stream has the same period this is plain
//! interval-graph coloring, handled by the same recursion.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::feasibility::decide;
use crate::model::{Instance, LinkRange, Stream};
use crate::partition::{balanced_bipartition, Bipartition, Side};

/// Layers for every replication of every stream, stored flat.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoodColoring {
    hyperperiod: u64,
    offsets: Vec<usize>,
    layers: Vec<u64>,
}

impl GoodColoring {
    /// Wraps a flat layer vector laid out stream by stream in instance
    /// order, `P / p_s` entries per stream.
    pub fn from_flat(instance: &Instance, layers: Vec<u64>) -> Result<Self> {
        let offsets = offsets_for(instance);
        if *offsets.last().unwrap() != layers.len() {
            return Err(Error::Internal(format!(
                "coloring has {} entries, instance needs {}",
                layers.len(),
                offsets.last().unwrap()
            )));
        }
        Ok(Self {
            hyperperiod: instance.hyperperiod(),
            offsets,
            layers,
        })
    }

    pub fn empty(hyperperiod: u64) -> Self {
        Self {
            hyperperiod,
            offsets: vec![0],
            layers: Vec::new(),
        }
    }

    pub fn hyperperiod(&self) -> u64 {
        self.hyperperiod
    }

    pub fn stream_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn entry_count(&self) -> usize {
        self.layers.len()
    }

    /// Layers of all replications of stream `stream`, replication 1 first.
    pub fn layers_of(&self, stream: usize) -> &[u64] {
        &self.layers[self.offsets[stream]..self.offsets[stream + 1]]
    }

    /// Layer of replication `replication` (1-based).
    pub fn layer(&self, stream: usize, replication: u64) -> Option<u64> {
        if replication == 0 || stream >= self.stream_count() {
            return None;
        }
        self.layers_of(stream)
            .get(replication as usize - 1)
            .copied()
    }

    pub fn as_flat(&self) -> &[u64] {
        &self.layers
    }

    /// `"streamId#i" -> layer`, in instance order.
    pub fn to_json_map(&self, instance: &Instance) -> Map<String, Value> {
        let mut map = Map::new();
        for (ord, s) in instance.streams().iter().enumerate() {
            for (i, &layer) in self.layers_of(ord).iter().enumerate() {
                map.insert(format!("{}#{}", s.id, i + 1), Value::from(layer));
            }
        }
        map
    }
}

fn offsets_for(instance: &Instance) -> Vec<usize> {
    let p = instance.hyperperiod();
    let mut offsets = Vec::with_capacity(instance.len() + 1);
    offsets.push(0);
    let mut acc = 0usize;
    for s in instance.streams() {
        acc += s.replications(p) as usize;
        offsets.push(acc);
    }
    offsets
}

#[derive(Debug, Clone, Default)]
pub struct FindOptions {
    /// Solve the two halves of each split on the rayon pool.
    pub parallel: bool,
    /// Collect per-level statistics.
    pub trace: bool,
}

/// Aggregate statistics of one recursion level.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LevelTrace {
    pub level: u32,
    /// Non-empty sub-problems solved at this level.
    pub calls: u64,
    /// Shorter-period streams passed down unchanged to both halves.
    pub carried: u64,
    /// Top-period streams split between the halves.
    pub split: u64,
    pub group_a: u64,
    pub group_b: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct FindTrace {
    /// Number of halvings below the top level that were reached.
    pub depth: u32,
    /// Levels from `k*` down to 0.
    pub levels: Vec<LevelTrace>,
}

struct TraceSink {
    top: u32,
    // calls, carried, split, a, b per level
    counters: Vec<[AtomicU64; 5]>,
}

impl TraceSink {
    fn new(top: u32) -> Self {
        Self {
            top,
            counters: (0..=top).map(|_| Default::default()).collect(),
        }
    }

    fn record(&self, level: u32, carried: usize, split: usize, a: usize, b: usize) {
        let c = &self.counters[level as usize];
        for (slot, v) in c.iter().zip([1, carried, split, a, b]) {
            slot.fetch_add(v as u64, Ordering::Relaxed);
        }
    }

    fn finish(self) -> FindTrace {
        let mut levels = Vec::new();
        let mut lowest = self.top;
        for level in (0..=self.top).rev() {
            let [calls, carried, split, a, b] = self.counters[level as usize]
                .each_ref()
                .map(|x| x.load(Ordering::Relaxed));
            if calls > 0 {
                lowest = level;
            }
            levels.push(LevelTrace {
                level,
                calls,
                carried,
                split,
                group_a: a,
                group_b: b,
            });
        }
        FindTrace {
            depth: self.top - lowest,
            levels,
        }
    }
}

/// A stream as seen inside the recursion; `exp` drops as it is relabeled.
#[derive(Debug, Clone, Copy)]
struct Item {
    first: u32,
    last: u32,
    exp: u32,
}

impl Item {
    fn of(stream: &Stream) -> Self {
        let r = stream.interval();
        Self {
            first: r.first,
            last: r.last,
            exp: stream.exponent(),
        }
    }

    fn range(&self) -> LinkRange {
        LinkRange::new(self.first, self.last)
    }
}

struct Ctx {
    parallel: bool,
    trace: Option<TraceSink>,
}

const PARALLEL_CUTOFF: usize = 512;

/// Computes a good layer assignment of a feasible instance.
pub fn find(instance: &Instance) -> Result<GoodColoring> {
    find_with(instance, &FindOptions::default()).map(|(c, _)| c)
}

pub fn find_with(
    instance: &Instance,
    options: &FindOptions,
) -> Result<(GoodColoring, Option<FindTrace>)> {
    if let crate::feasibility::Feasibility::Infeasible {
        link,
        load,
        capacity,
    } = decide(instance)
    {
        return Err(Error::Precondition(format!(
            "instance is infeasible: link {link} has load {load} > {capacity}"
        )));
    }
    let ctx = Ctx {
        parallel: options.parallel,
        trace: options.trace.then(|| TraceSink::new(instance.k_star())),
    };
    let items: Vec<Item> = instance.streams().iter().map(Item::of).collect();
    let layers = solve(&items, instance.k_star(), &ctx)?;
    let coloring = GoodColoring::from_flat(instance, layers)?;
    Ok((coloring, ctx.trace.map(TraceSink::finish)))
}

fn solve(items: &[Item], level: u32, ctx: &Ctx) -> Result<Vec<u64>> {
    if items.is_empty() {
        return Ok(Vec::new());
    }
    if level == 0 {
        debug_assert!(
            pairwise_disjoint(items),
            "level-0 sub-problem has overlapping streams"
        );
        if let Some(t) = &ctx.trace {
            t.record(0, 0, items.len(), items.len(), 0);
        }
        return Ok(vec![1; items.len()]);
    }

    let (carried, top): (Vec<usize>, Vec<usize>) =
        (0..items.len()).partition(|&i| items[i].exp < level);
    let top_ranges: Vec<LinkRange> = top.iter().map(|&i| items[i].range()).collect();
    check_residual(items, &carried, &top_ranges, level)?;
    let sides = balanced_bipartition(&top_ranges);
    verify_split(items, &carried, &top_ranges, &sides, level)?;

    let lowered = |side: Side| -> Vec<Item> {
        carried
            .iter()
            .map(|&i| items[i])
            .chain(
                top.iter()
                    .zip(&sides)
                    .filter(|(_, s)| **s == side)
                    .map(|(&i, _)| Item {
                        exp: level - 1,
                        ..items[i]
                    }),
            )
            .collect()
    };

    if let Some(t) = &ctx.trace {
        let a = sides.iter().filter(|s| **s == Side::A).count();
        t.record(level, carried.len(), top.len(), a, top.len() - a);
    }

    let (half_a, half_b) = if top.is_empty() {
        // both halves are the same sub-problem
        let half = solve(&lowered(Side::A), level - 1, ctx)?;
        (half.clone(), half)
    } else {
        let (sub_a, sub_b) = (lowered(Side::A), lowered(Side::B));
        if ctx.parallel && items.len() >= PARALLEL_CUTOFF {
            let (ra, rb) = rayon::join(
                || solve(&sub_a, level - 1, ctx),
                || solve(&sub_b, level - 1, ctx),
            );
            (ra?, rb?)
        } else {
            (
                solve(&sub_a, level - 1, ctx)?,
                solve(&sub_b, level - 1, ctx)?,
            )
        }
    };

    let top_sides: Vec<Option<Side>> = {
        let mut v = vec![None; items.len()];
        for (&i, &s) in top.iter().zip(&sides) {
            v[i] = Some(s);
        }
        v
    };
    stitch(items, level, &top_sides, &half_a, &half_b)
}

/// Combines the two half-horizon solutions. Sub-problem layout: carried
/// items first in item order, then that half's top items in item order.
fn stitch(
    items: &[Item],
    level: u32,
    top_sides: &[Option<Side>],
    half_a: &[u64],
    half_b: &[u64],
) -> Result<Vec<u64>> {
    let half = 1u64 << (level - 1);
    let carried_len: usize = items
        .iter()
        .zip(top_sides)
        .filter(|(_, s)| s.is_none())
        .map(|(it, _)| 1usize << (level - 1 - it.exp))
        .sum();
    let count = |side: Side| top_sides.iter().filter(|s| **s == Some(side)).count();
    if half_a.len() != carried_len + count(Side::A) || half_b.len() != carried_len + count(Side::B)
    {
        return Err(Error::Internal(format!(
            "half colorings have {} and {} entries, expected {} and {}",
            half_a.len(),
            half_b.len(),
            carried_len + count(Side::A),
            carried_len + count(Side::B)
        )));
    }

    let total: usize = items.iter().map(|it| 1usize << (level - it.exp)).sum();
    let mut out = Vec::with_capacity(total);
    let mut carried_at = 0usize;
    let mut a_at = carried_len;
    let mut b_at = carried_len;
    for (it, side) in items.iter().zip(top_sides) {
        match side {
            None => {
                let reps = 1usize << (level - 1 - it.exp);
                out.extend_from_slice(&half_a[carried_at..carried_at + reps]);
                out.extend(
                    half_b[carried_at..carried_at + reps]
                        .iter()
                        .map(|l| l + half),
                );
                carried_at += reps;
            }
            Some(Side::A) => {
                out.push(half_a[a_at]);
                a_at += 1;
            }
            Some(Side::B) => {
                out.push(half_b[b_at] + half);
                b_at += 1;
            }
        }
    }
    Ok(out)
}

/// Sorted, deduplicated endpoint coordinates: segment `j` covers links
/// `coords[j]..coords[j+1]`.
fn segment_coords(items: &[Item]) -> Vec<u32> {
    let mut coords: Vec<u32> = items
        .iter()
        .flat_map(|it| [it.first, it.last + 1])
        .collect();
    coords.sort_unstable();
    coords.dedup();
    coords
}

/// Weighted coverage per segment; `weight` of `None` skips the item.
fn segment_sums(coords: &[u32], ranges: impl Iterator<Item = (LinkRange, i64)>) -> Vec<i64> {
    let mut diff = vec![0i64; coords.len()];
    for (r, w) in ranges {
        let lo = coords.binary_search(&r.first).unwrap();
        let hi = coords.binary_search(&(r.last + 1)).unwrap();
        diff[lo] += w;
        diff[hi] -= w;
    }
    let mut run = 0;
    diff.iter()
        .map(|d| {
            run += d;
            run
        })
        .collect()
}

fn residual(items: &[Item], carried: &[usize], level: u32, coords: &[u32]) -> Vec<i64> {
    let half = 1i64 << (level - 1);
    let lower = segment_sums(
        coords,
        carried
            .iter()
            .map(|&i| (items[i].range(), 1i64 << (level - 1 - items[i].exp))),
    );
    lower.iter().map(|c| half - c).collect()
}

fn check_residual(items: &[Item], carried: &[usize], top: &[LinkRange], level: u32) -> Result<()> {
    let coords = segment_coords(items);
    let room = residual(items, carried, level, &coords);
    let demand = segment_sums(&coords, top.iter().map(|r| (*r, 1)));
    for j in 0..coords.len().saturating_sub(1) {
        if room[j] < (demand[j] + 1) / 2 {
            return Err(Error::Precondition(format!(
                "level {level}: links {}..{} have residual capacity {} for {} top-period streams",
                coords[j],
                coords[j + 1] - 1,
                room[j],
                demand[j]
            )));
        }
    }
    Ok(())
}

fn verify_split(
    items: &[Item],
    carried: &[usize],
    top: &[LinkRange],
    sides: &[Side],
    level: u32,
) -> Result<()> {
    let coords = segment_coords(items);
    let room = residual(items, carried, level, &coords);
    for side in [Side::A, Side::B] {
        let load = segment_sums(
            &coords,
            top.iter()
                .zip(sides)
                .filter(|(_, s)| **s == side)
                .map(|(r, _)| (*r, 1)),
        );
        for j in 0..coords.len().saturating_sub(1) {
            if load[j] > room[j] {
                return Err(Error::Internal(format!(
                    "level {level}: half {side:?} gets {} streams on links {}..{}, room {}",
                    load[j],
                    coords[j],
                    coords[j + 1] - 1,
                    room[j]
                )));
            }
        }
    }
    Ok(())
}

fn pairwise_disjoint(items: &[Item]) -> bool {
    let mut r: Vec<(u32, u32)> = items.iter().map(|it| (it.first, it.last)).collect();
    r.sort_unstable();
    r.windows(2).all(|w| w[0].1 < w[1].0)
}

/// The two half-horizon sub-instances of a split: shorter-period streams in
/// instance order, then the group's top-period streams (period halved) in
/// instance order.
pub fn halves(instance: &Instance, split: &Bipartition) -> Result<(Instance, Instance)> {
    let k = instance.k_star();
    if k == 0 {
        return Err(Error::Precondition(
            "a level-0 instance cannot be halved".into(),
        ));
    }
    let streams = instance.streams();
    let carried: Vec<Stream> = streams
        .iter()
        .filter(|s| s.exponent() < k)
        .cloned()
        .collect();
    let build = |group: &[usize]| -> Result<Instance> {
        let mut v = carried.clone();
        let mut group = group.to_vec();
        group.sort_unstable();
        for &i in &group {
            let s = streams
                .get(i)
                .ok_or_else(|| Error::Precondition(format!("no stream {i}")))?;
            if s.exponent() != k {
                return Err(Error::Precondition(format!(
                    "stream {:?} is not top-period",
                    s.id
                )));
            }
            v.push(Stream {
                period: s.period / 2,
                ..s.clone()
            });
        }
        Instance::with_horizon(
            instance.topology(),
            instance.direction(),
            v,
            instance.hyperperiod() / 2,
        )
    };
    Ok((build(&split.group_a)?, build(&split.group_b)?))
}

/// Stitches good colorings of the two [`halves`] into a good coloring of
/// `instance` over its full hyperperiod.
pub fn merge(
    instance: &Instance,
    split: &Bipartition,
    half_a: &GoodColoring,
    half_b: &GoodColoring,
) -> Result<GoodColoring> {
    let k = instance.k_star();
    if k == 0 {
        return Err(Error::Precondition(
            "a level-0 instance has no halves to merge".into(),
        ));
    }
    if instance.is_empty() {
        return Ok(GoodColoring::empty(instance.hyperperiod()));
    }
    let half = instance.hyperperiod() / 2;
    if half_a.hyperperiod() != half || half_b.hyperperiod() != half {
        return Err(Error::Precondition(format!(
            "half colorings span {} and {}, expected {half}",
            half_a.hyperperiod(),
            half_b.hyperperiod()
        )));
    }
    let items: Vec<Item> = instance.streams().iter().map(Item::of).collect();
    let mut sides = vec![None; items.len()];
    for (i, s) in instance.streams().iter().enumerate() {
        if s.exponent() == k {
            sides[i] = Some(split.side_of(i).ok_or_else(|| {
                Error::Precondition(format!("top-period stream {:?} is in neither group", s.id))
            })?);
        }
    }
    let layers = stitch(&items, k, &sides, half_a.as_flat(), half_b.as_flat())?;
    GoodColoring::from_flat(instance, layers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Direction, Topology};
    use crate::partition::{residual_capacities, split_top_level};

    /// Windows plus pairwise properness, quadratic and self-contained.
    fn is_good(inst: &Instance, c: &GoodColoring) -> bool {
        let p = inst.hyperperiod();
        let mut placed = Vec::new();
        for (ord, s) in inst.streams().iter().enumerate() {
            let layers = c.layers_of(ord);
            if layers.len() as u64 != p / s.period {
                return false;
            }
            for (i, &l) in layers.iter().enumerate() {
                let i = i as u64 + 1;
                if l < (i - 1) * s.period + 1 || l > i * s.period {
                    return false;
                }
                placed.push((s.interval(), l));
            }
        }
        for x in 0..placed.len() {
            for y in x + 1..placed.len() {
                if placed[x].1 == placed[y].1 && placed[x].0.overlaps(&placed[y].0) {
                    return false;
                }
            }
        }
        true
    }

    #[test]
    fn forced_windows() {
        let inst =
            Instance::chain(3, [("s1", 1, 2, 2u64), ("s2", 1, 2, 2), ("s3", 2, 3, 1)]).unwrap();
        let c = find(&inst).unwrap();
        let mut first = vec![c.layer(0, 1).unwrap(), c.layer(1, 1).unwrap()];
        first.sort();
        assert_eq!(first, vec![1, 2]);
        assert_eq!(c.layers_of(2), &[1, 2]);
        assert!(is_good(&inst, &c));
    }

    #[test]
    fn three_streams_period_two() {
        let inst =
            Instance::chain(4, [("s1", 1, 4, 2u64), ("s2", 1, 2, 2), ("s3", 2, 4, 2)]).unwrap();
        let c = find(&inst).unwrap();
        assert!(is_good(&inst, &c));
        assert_ne!(c.layer(0, 1), c.layer(1, 1));
        assert_ne!(c.layer(0, 1), c.layer(2, 1));
    }

    #[test]
    fn empty_and_single() {
        let inst = Instance::empty(Topology::new(4).unwrap(), Direction::LeftToRight);
        assert_eq!(find(&inst).unwrap().entry_count(), 0);
        let inst = Instance::chain(4, [("s", 1, 4, 4u64)]).unwrap();
        let c = find(&inst).unwrap();
        assert_eq!(c.layers_of(0), &[1]);
    }

    #[test]
    fn infeasible_is_rejected() {
        let inst =
            Instance::chain(4, [("s1", 1, 4, 2u64), ("s2", 1, 3, 2), ("s3", 2, 4, 1)]).unwrap();
        assert!(matches!(find(&inst), Err(Error::Precondition(_))));
    }

    #[test]
    fn stitch_formula_branches() {
        // p = 1 at k = 1: both replications come from the halves
        let items = [Item {
            first: 1,
            last: 1,
            exp: 0,
        }];
        assert_eq!(stitch(&items, 1, &[None], &[1], &[1]).unwrap(), vec![1, 2]);
        // group b at k = 2: layer 2 of the half becomes 4
        let items = [Item {
            first: 1,
            last: 1,
            exp: 2,
        }];
        assert_eq!(
            stitch(&items, 2, &[Some(Side::B)], &[], &[2]).unwrap(),
            vec![4]
        );
        assert_eq!(stitch(&[], 2, &[], &[], &[]).unwrap(), Vec::<u64>::new());
        assert!(matches!(
            stitch(&items, 2, &[Some(Side::B)], &[], &[]),
            Err(Error::Internal(_))
        ));
    }

    #[test]
    fn public_merge_matches_manual_recursion() {
        let inst = Instance::chain(
            5,
            [
                ("x", 1, 5, 4u64),
                ("y", 2, 3, 2),
                ("z", 3, 5, 2),
                ("w", 1, 2, 4),
                ("v", 4, 5, 4),
            ],
        )
        .unwrap();
        let split = split_top_level(&inst, &residual_capacities(&inst).unwrap()).unwrap();
        let (ha, hb) = halves(&inst, &split).unwrap();
        assert_eq!(ha.hyperperiod(), 2);
        let merged = merge(&inst, &split, &find(&ha).unwrap(), &find(&hb).unwrap()).unwrap();
        assert!(is_good(&inst, &merged));
        assert!(is_good(&inst, &find(&inst).unwrap()));
    }

    #[test]
    fn merge_rejects_wrong_horizon() {
        let inst = Instance::chain(3, [("x", 1, 3, 2u64)]).unwrap();
        let split = Bipartition {
            group_a: vec![0],
            group_b: vec![],
        };
        let wrong = GoodColoring::empty(2);
        assert!(merge(&inst, &split, &wrong, &wrong).is_err());
    }

    #[test]
    fn trace_reports_depth() {
        let inst = Instance::chain(4, [("a", 1, 4, 8u64), ("b", 2, 3, 2), ("c", 1, 2, 2)]).unwrap();
        let (c, trace) = find_with(
            &inst,
            &FindOptions {
                trace: true,
                parallel: false,
            },
        )
        .unwrap();
        assert!(is_good(&inst, &c));
        let trace = trace.unwrap();
        assert_eq!(trace.depth, 3);
        assert_eq!(trace.levels[0].level, 3);
        assert_eq!(trace.levels[0].calls, 1);
        assert_eq!(trace.levels[0].split, 1);
        assert_eq!(trace.levels[0].carried, 2);
    }

    #[test]
    fn json_map_keys() {
        let inst = Instance::chain(4, [("s", 1, 2, 1u64), ("t", 3, 4, 2)]).unwrap();
        let c = find(&inst).unwrap();
        let m = c.to_json_map(&inst);
        assert_eq!(m.keys().collect::<Vec<_>>(), vec!["s#1", "s#2", "t#1"]);
    }
}
