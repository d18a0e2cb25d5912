//! Exhaustive search for a good coloring. Exponential; meant for tiny
//! instances and for cross-checking [`crate::feasibility::decide`].

use crate::coloring::GoodColoring;
use crate::error::{Error, Result};
use crate::model::Instance;

pub const DEFAULT_NODE_BUDGET: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleOutcome {
    Found(GoodColoring),
    ExhaustedInfeasible,
    BudgetExceeded { nodes_explored: u64 },
}

impl OracleOutcome {
    pub fn label(&self) -> &'static str {
        match self {
            OracleOutcome::Found(_) => "found",
            OracleOutcome::ExhaustedInfeasible => "exhausted-infeasible",
            OracleOutcome::BudgetExceeded { .. } => "budget-exceeded",
        }
    }
}

struct Slot {
    ord: usize,
    first: usize,
    last: usize,
    lo: u64,
    hi: u64,
}

/// Backtracking over replications ordered by (stream id, replication),
/// layers tried in ascending order. Each tentative placement counts as one
/// node against `node_budget`.
pub fn brute_force(instance: &Instance, node_budget: u64) -> Result<OracleOutcome> {
    if node_budget == 0 {
        return Err(Error::InvalidBudget);
    }
    let p = instance.hyperperiod();
    let links = instance.topology().link_count() as usize;

    let mut order: Vec<usize> = (0..instance.len()).collect();
    order.sort_by(|&x, &y| instance.streams()[x].id.cmp(&instance.streams()[y].id));
    let mut slots = Vec::new();
    for &ord in &order {
        let s = &instance.streams()[ord];
        let r = s.interval();
        for rep in 1..=s.replications(p) {
            slots.push(Slot {
                ord,
                first: r.first as usize - 1,
                last: r.last as usize - 1,
                lo: (rep - 1) * s.period + 1,
                hi: rep * s.period,
            });
        }
    }

    // busy[(layer - 1) * links + link - 1]
    let mut busy = vec![false; p as usize * links];
    let mut chosen = vec![0u64; slots.len()];
    let mut nodes = 0u64;
    let mut depth = 0usize;
    let fits = |busy: &[bool], slot: &Slot, layer: u64| {
        let base = (layer as usize - 1) * links;
        busy[base + slot.first..=base + slot.last]
            .iter()
            .all(|b| !b)
    };
    let mark = |busy: &mut [bool], slot: &Slot, layer: u64, value: bool| {
        let base = (layer as usize - 1) * links;
        busy[base + slot.first..=base + slot.last]
            .iter_mut()
            .for_each(|b| *b = value);
    };

    while depth < slots.len() {
        let slot = &slots[depth];
        let start = if chosen[depth] == 0 {
            slot.lo
        } else {
            chosen[depth] + 1
        };
        let mut placed = false;
        for layer in start..=slot.hi {
            nodes += 1;
            if nodes > node_budget {
                return Ok(OracleOutcome::BudgetExceeded {
                    nodes_explored: node_budget,
                });
            }
            if fits(&busy, slot, layer) {
                mark(&mut busy, slot, layer, true);
                chosen[depth] = layer;
                placed = true;
                break;
            }
        }
        if placed {
            depth += 1;
            continue;
        }
        chosen[depth] = 0;
        if depth == 0 {
            return Ok(OracleOutcome::ExhaustedInfeasible);
        }
        depth -= 1;
        mark(&mut busy, &slots[depth], chosen[depth], false);
    }

    let mut per_stream: Vec<Vec<u64>> = vec![Vec::new(); instance.len()];
    for (slot, &layer) in slots.iter().zip(&chosen) {
        per_stream[slot.ord].push(layer);
    }
    let flat = per_stream.into_iter().flatten().collect();
    Ok(OracleOutcome::Found(GoodColoring::from_flat(
        instance, flat,
    )?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feasibility::decide;
    use crate::validator::check_coloring;

    #[test]
    fn finds_three_stream_example() {
        let inst =
            Instance::chain(4, [("s1", 1, 4, 2u64), ("s2", 1, 2, 2), ("s3", 2, 4, 2)]).unwrap();
        let OracleOutcome::Found(c) = brute_force(&inst, DEFAULT_NODE_BUDGET).unwrap() else {
            panic!("expected a coloring");
        };
        assert_eq!(c.as_flat(), &[1, 2, 2]);
        assert!(check_coloring(&c, &inst).unwrap().passed());
    }

    #[test]
    fn refutes_overload() {
        let inst =
            Instance::chain(4, [("s1", 1, 4, 2u64), ("s2", 1, 3, 2), ("s3", 2, 4, 1)]).unwrap();
        assert_eq!(
            brute_force(&inst, DEFAULT_NODE_BUDGET).unwrap(),
            OracleOutcome::ExhaustedInfeasible
        );
        assert!(!decide(&inst).is_feasible());
    }

    #[test]
    fn empty_instance_found() {
        let inst = Instance::chain(2, Vec::<(&str, u32, u32, u64)>::new()).unwrap();
        assert!(matches!(
            brute_force(&inst, 1).unwrap(),
            OracleOutcome::Found(_)
        ));
    }

    #[test]
    fn budget_reported() {
        let inst =
            Instance::chain(4, [("s1", 1, 4, 2u64), ("s2", 1, 3, 2), ("s3", 2, 4, 1)]).unwrap();
        assert_eq!(
            brute_force(&inst, 2).unwrap(),
            OracleOutcome::BudgetExceeded { nodes_explored: 2 }
        );
        assert!(matches!(brute_force(&inst, 0), Err(Error::InvalidBudget)));
    }
}
