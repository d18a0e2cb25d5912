//! Weighted link loads and the existence test for no-wait schedules.
//!
//! At level `k` a stream of period `2^i <= 2^k` weighs `2^(k-i)`, the number
//! of its replications inside a window of length `2^k`. An instance admits a
//! no-wait schedule exactly when no link carries more than `2^k*` at the top
//! level.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::Instance;

/// Loads `c_{k,l}` of every link at one level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LoadProfile {
    level: u32,
    loads: Vec<u64>,
}

impl LoadProfile {
    pub fn level(&self) -> u32 {
        self.level
    }

    /// Load of link `link` (1-based).
    pub fn load(&self, link: u32) -> u64 {
        self.loads[link as usize - 1]
    }

    /// Loads in link order, `loads()[0]` being link 1.
    pub fn loads(&self) -> &[u64] {
        &self.loads
    }

    pub fn capacity(&self) -> u64 {
        1u64 << self.level
    }
}

/// Loads at `level` by a difference-array sweep over the stream intervals.
pub fn load_profile(instance: &Instance, level: u32) -> Result<LoadProfile> {
    if level > instance.k_star() {
        return Err(Error::LevelOutOfRange {
            level,
            k_star: instance.k_star(),
        });
    }
    let links = instance.topology().link_count() as usize;
    let mut diff = vec![0i128; links + 1];
    for s in instance.spans() {
        if s.exp > level {
            continue;
        }
        let w = 1i128 << (level - s.exp);
        diff[s.a as usize - 1] += w;
        diff[s.b as usize - 1] -= w;
    }
    let mut running = 0i128;
    let loads = diff[..links]
        .iter()
        .map(|d| {
            running += d;
            running as u64
        })
        .collect();
    Ok(LoadProfile { level, loads })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Feasibility {
    Feasible,
    /// Leftmost overloaded link, in normalized coordinates.
    Infeasible {
        link: u32,
        load: u64,
        capacity: u64,
    },
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible)
    }
}

pub fn decide(instance: &Instance) -> Feasibility {
    let profile = load_profile(instance, instance.k_star()).expect("top level is always in range");
    let capacity = profile.capacity();
    match profile.loads.iter().position(|&l| l > capacity) {
        None => Feasibility::Feasible,
        Some(i) => Feasibility::Infeasible {
            link: i as u32 + 1,
            load: profile.loads[i],
            capacity,
        },
    }
}
