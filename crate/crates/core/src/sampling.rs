//! Seeded random topologies and change sets for randomized validation.
//!
//! Every sampled change set is non-islanding in the target topology and in
//! each single-change state, so its extended-superposition basis exists.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, RngCore};

use crate::grid::{BranchIdx, BusbarAssignment, Grid, SubIdx, Terminal, TopologyChange};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ChangeKind {
    Disconnect,
    Reconnect,
    Split,
    Merge,
}

impl ChangeKind {
    pub const ALL: [ChangeKind; 4] = [
        ChangeKind::Disconnect,
        ChangeKind::Reconnect,
        ChangeKind::Split,
        ChangeKind::Merge,
    ];

    pub fn of(change: &TopologyChange) -> Self {
        match change {
            TopologyChange::Disconnect(_) => ChangeKind::Disconnect,
            TopologyChange::Reconnect(_) => ChangeKind::Reconnect,
            TopologyChange::Split(..) => ChangeKind::Split,
            TopologyChange::Merge(_) => ChangeKind::Merge,
        }
    }
}

/// Substation terminals that are ends of connected branches.
fn connected_ends(grid: &Grid, sub: SubIdx) -> Vec<Terminal> {
    grid.substation(sub)
        .terminals()
        .iter()
        .filter(|t| matches!(t, Terminal::BranchEnd(b, _) if grid.branch(*b).is_connected()))
        .copied()
        .collect()
}

/// Random busbar-two assignment for `sub` with at least one connected branch
/// end on each busbar. `None` when the substation has fewer than two
/// connected branch ends.
pub fn random_assignment(grid: &Grid, sub: SubIdx, rng: &mut impl Rng) -> Option<BusbarAssignment> {
    let mut ends = connected_ends(grid, sub);
    if ends.len() < 2 {
        return None;
    }
    ends.shuffle(rng);
    let k = rng.random_range(1..ends.len());
    let mut two: Vec<Terminal> = ends[..k].to_vec();
    for t in grid.substation(sub).terminals() {
        let anchored = matches!(t, Terminal::BranchEnd(b, _) if grid.branch(*b).is_connected());
        if !anchored && rng.random_bool(0.5) {
            two.push(*t);
        }
    }
    Some(BusbarAssignment::new(two))
}

/// Random change of `kind` applicable to `grid`.
fn candidate(grid: &Grid, kind: ChangeKind, rng: &mut impl Rng) -> Option<TopologyChange> {
    match kind {
        ChangeKind::Disconnect => {
            let b: Vec<BranchIdx> = (0..grid.branches().len())
                .map(BranchIdx)
                .filter(|&b| grid.branch(b).is_connected())
                .collect();
            b.choose(rng).map(|&b| TopologyChange::Disconnect(b))
        }
        ChangeKind::Reconnect => {
            let b: Vec<BranchIdx> = (0..grid.branches().len())
                .map(BranchIdx)
                .filter(|&b| !grid.branch(b).is_connected())
                .collect();
            b.choose(rng).map(|&b| TopologyChange::Reconnect(b))
        }
        ChangeKind::Split => {
            let subs: Vec<SubIdx> = (0..grid.substations().len())
                .map(SubIdx)
                .filter(|&s| !grid.substation(s).is_split() && connected_ends(grid, s).len() >= 3)
                .collect();
            let s = *subs.choose(rng)?;
            random_assignment(grid, s, rng).map(|a| TopologyChange::Split(s, a))
        }
        ChangeKind::Merge => {
            let subs: Vec<SubIdx> = (0..grid.substations().len())
                .map(SubIdx)
                .filter(|&s| grid.substation(s).is_split())
                .collect();
            subs.choose(rng).map(|&s| TopologyChange::Merge(s))
        }
    }
}

/// True when the target and every single-change state stay connected.
pub fn is_admissible(grid: &Grid, changes: &[TopologyChange]) -> bool {
    let distinct: std::collections::HashSet<_> = changes.iter().map(|c| c.target()).collect();
    distinct.len() == changes.len()
        && grid.apply_change_set(changes).is_ok()
        && changes
            .iter()
            .all(|c| grid.apply_change_set(std::slice::from_ref(c)).is_ok())
}

/// Random reference topology: `outages` branch disconnections and `splits`
/// substation splits applied to `grid`, keeping it connected.
pub fn random_reference(
    grid: &Grid,
    outages: usize,
    splits: usize,
    rng: &mut impl Rng,
) -> (Grid, Vec<TopologyChange>) {
    let mut current = grid.clone();
    let mut applied = Vec::new();
    let plan = std::iter::repeat_n(ChangeKind::Disconnect, outages).chain(std::iter::repeat_n(ChangeKind::Split, splits));
    for kind in plan {
        for _ in 0..50 {
            let Some(c) = candidate(&current, kind, rng) else { break };
            if let Ok(next) = current.apply_change_set(std::slice::from_ref(&c)) {
                current = next;
                applied.push(c);
                break;
            }
        }
    }
    (current, applied)
}

/// Random admissible change set of `size` changes whose kinds are drawn from
/// `kinds`. Gives up after `attempts` tries.
pub fn random_change_set(
    grid: &Grid,
    size: usize,
    kinds: &[ChangeKind],
    rng: &mut impl Rng,
    attempts: usize,
) -> Option<Vec<TopologyChange>> {
    'attempt: for _ in 0..attempts {
        let mut changes: Vec<TopologyChange> = Vec::with_capacity(size);
        for _ in 0..size {
            let kind = *kinds.choose(rng)?;
            let mut found = None;
            for _ in 0..20 {
                if let Some(c) = candidate(grid, kind, rng) {
                    if changes.iter().all(|x| x.target() != c.target()) {
                        found = Some(c);
                        break;
                    }
                }
            }
            match found {
                Some(c) => changes.push(c),
                None => continue 'attempt,
            }
        }
        if is_admissible(grid, &changes) {
            return Some(changes);
        }
    }
    None
}

/// One randomized validation case: a reference topology and a change set.
#[derive(Debug, Clone)]
pub struct Sample {
    pub reference: Grid,
    /// Changes that turn the base grid into `reference`.
    pub reference_changes: Vec<TopologyChange>,
    pub changes: Vec<TopologyChange>,
}

/// Draws references with a few outages and splits, so that all four change
/// kinds are available, then a change set of 1 to `max_size` changes.
#[derive(Debug, Clone)]
pub struct Sampler {
    pub max_size: usize,
    pub reference_outages: usize,
    pub reference_splits: usize,
}

impl Default for Sampler {
    fn default() -> Self {
        Self {
            max_size: 4,
            reference_outages: 2,
            reference_splits: 2,
        }
    }
}

impl Sampler {
    pub fn sample(&self, grid: &Grid, rng: &mut impl RngCore) -> Sample {
        loop {
            let (reference, reference_changes) =
                random_reference(grid, self.reference_outages, self.reference_splits, rng);
            let size = rng.random_range(1..=self.max_size.max(1));
            if let Some(changes) = random_change_set(&reference, size, &ChangeKind::ALL, rng, 50) {
                return Sample {
                    reference,
                    reference_changes,
                    changes,
                };
            }
        }
    }
}
