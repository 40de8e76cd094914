//! In-memory grid model and the topology-change vocabulary.
//!
//! A [`Grid`] is a set of substations connected by branches. Every substation
//! owns two busbars joined by a single coupler. While the coupler is closed the
//! two busbars form one electrical bus and every terminal sits on
//! [`Busbar::One`]; opening the coupler (a [`TopologyChange::Split`]) moves the
//! chosen terminals to [`Busbar::Two`] and materializes a second electrical bus.
//!
//! Grids are immutable values: [`Grid::apply_change_set`] returns a new grid.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;
use std::hash::{DefaultHasher, Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::GridError;

/// Index of a substation inside its [`Grid`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SubIdx(pub usize);

/// Index of a branch inside its [`Grid`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BranchIdx(pub usize);

/// Index of an injection (generator or load) inside its [`Grid`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InjIdx(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Busbar {
    One,
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Coupler {
    Closed,
    Open,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BranchStatus {
    Connected,
    Disconnected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    From,
    To,
}

/// Something that plugs into a substation busbar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Terminal {
    BranchEnd(BranchIdx, Side),
    Injection(InjIdx),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub id: String,
    pub from: SubIdx,
    pub to: SubIdx,
    /// Series susceptance `1/x` in per-unit. Finite and nonzero.
    pub susceptance: f64,
    pub status: BranchStatus,
    pub from_busbar: Busbar,
    pub to_busbar: Busbar,
}

impl Branch {
    pub fn is_connected(&self) -> bool {
        self.status == BranchStatus::Connected
    }

    pub fn end(&self, side: Side) -> (SubIdx, Busbar) {
        match side {
            Side::From => (self.from, self.from_busbar),
            Side::To => (self.to, self.to_busbar),
        }
    }
}

/// A generator or load. `p` is in per-unit, positive for generation.
#[derive(Debug, Clone, PartialEq)]
pub struct Injection {
    pub id: String,
    pub sub: SubIdx,
    pub busbar: Busbar,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Substation {
    pub id: String,
    pub coupler: Coupler,
    terminals: Vec<Terminal>,
}

impl Substation {
    pub fn terminals(&self) -> &[Terminal] {
        &self.terminals
    }

    pub fn is_split(&self) -> bool {
        self.coupler == Coupler::Open
    }
}

/// Terminals of one substation that go to busbar two on a split. Every other
/// terminal of the substation stays on busbar one.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct BusbarAssignment {
    busbar_two: BTreeSet<Terminal>,
}

impl BusbarAssignment {
    pub fn new(busbar_two: impl IntoIterator<Item = Terminal>) -> Self {
        Self {
            busbar_two: busbar_two.into_iter().collect(),
        }
    }

    pub fn busbar_two(&self) -> &BTreeSet<Terminal> {
        &self.busbar_two
    }

    pub fn busbar_of(&self, terminal: &Terminal) -> Busbar {
        if self.busbar_two.contains(terminal) {
            Busbar::Two
        } else {
            Busbar::One
        }
    }

    /// True when one of the two busbars would end up empty, which makes the
    /// split electrically meaningless.
    pub fn is_trivial_for(&self, sub: &Substation) -> bool {
        let on_two = sub
            .terminals
            .iter()
            .filter(|t| self.busbar_two.contains(t))
            .count();
        on_two == 0 || on_two == sub.terminals.len()
    }
}

/// One unitary topology change.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TopologyChange {
    Disconnect(BranchIdx),
    Reconnect(BranchIdx),
    Split(SubIdx, BusbarAssignment),
    Merge(SubIdx),
}

/// The asset a change acts on. Two changes of one ST change set must not share
/// a target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ChangeTarget {
    Branch(BranchIdx),
    Substation(SubIdx),
}

impl TopologyChange {
    pub fn target(&self) -> ChangeTarget {
        match self {
            TopologyChange::Disconnect(b) | TopologyChange::Reconnect(b) => ChangeTarget::Branch(*b),
            TopologyChange::Split(s, _) | TopologyChange::Merge(s) => ChangeTarget::Substation(*s),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            TopologyChange::Disconnect(_) => "disconnect",
            TopologyChange::Reconnect(_) => "reconnect",
            TopologyChange::Split(..) => "split",
            TopologyChange::Merge(_) => "merge",
        }
    }
}

impl fmt::Display for TopologyChange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TopologyChange::Disconnect(b) => write!(f, "disconnect(branch #{})", b.0),
            TopologyChange::Reconnect(b) => write!(f, "reconnect(branch #{})", b.0),
            TopologyChange::Split(s, a) => {
                write!(f, "split(sub #{}, {} terminals on busbar 2)", s.0, a.busbar_two.len())
            }
            TopologyChange::Merge(s) => write!(f, "merge(sub #{})", s.0),
        }
    }
}

/// An electrical bus of the current topology.
#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: String,
    pub substation: SubIdx,
    pub busbar: Busbar,
    /// Net injection in per-unit.
    pub injection: f64,
}

/// Mapping from busbars to electrical bus numbers for one topology.
///
/// Busbar one of substation `s` is bus `s`. Busbar two of each split
/// substation gets a bus number past the substation count, in substation order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BusLayout {
    bus_count: usize,
    second_busbar: Vec<Option<u32>>,
    slack_bus: usize,
}

impl BusLayout {
    pub fn bus_count(&self) -> usize {
        self.bus_count
    }

    pub fn slack_bus(&self) -> usize {
        self.slack_bus
    }

    pub fn bus_of(&self, sub: SubIdx, busbar: Busbar) -> usize {
        match busbar {
            Busbar::One => sub.0,
            Busbar::Two => self.second_busbar[sub.0].map_or(sub.0, |b| b as usize),
        }
    }

    /// Substation and busbar owning an electrical bus.
    pub fn busbar_of_bus(&self, bus: usize) -> (SubIdx, Busbar) {
        if bus < self.second_busbar.len() {
            (SubIdx(bus), Busbar::One)
        } else {
            let sub = self
                .second_busbar
                .iter()
                .position(|b| *b == Some(bus as u32))
                .expect("bus index out of layout range");
            (SubIdx(sub), Busbar::Two)
        }
    }
}

/// Bus labelling produced by [`connected_components`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Components {
    pub count: usize,
    /// Component label per electrical bus, numbered from 0 in bus order.
    pub labels: Vec<usize>,
}

/// Power grid: substations, branches, injections and a slack substation whose
/// busbar one is the phase reference.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    name: String,
    base_mva: f64,
    substations: Vec<Substation>,
    branches: Vec<Branch>,
    injections: Vec<Injection>,
    slack: SubIdx,
    branch_index: HashMap<String, BranchIdx>,
    sub_index: HashMap<String, SubIdx>,
    injection_index: HashMap<String, InjIdx>,
}

/// Incremental constructor for [`Grid`]; validation happens in [`GridBuilder::build`].
#[derive(Debug, Default)]
pub struct GridBuilder {
    name: String,
    base_mva: f64,
    substations: Vec<String>,
    branches: Vec<(String, SubIdx, SubIdx, f64, BranchStatus)>,
    injections: Vec<(String, SubIdx, f64)>,
    slack: Vec<SubIdx>,
}

impl GridBuilder {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            base_mva: 100.0,
            ..Default::default()
        }
    }

    pub fn base_mva(&mut self, base_mva: f64) -> &mut Self {
        self.base_mva = base_mva;
        self
    }

    pub fn substation(&mut self, id: impl Into<String>) -> SubIdx {
        self.substations.push(id.into());
        SubIdx(self.substations.len() - 1)
    }

    pub fn slack(&mut self, sub: SubIdx) -> &mut Self {
        self.slack.push(sub);
        self
    }

    pub fn branch(
        &mut self,
        id: impl Into<String>,
        from: SubIdx,
        to: SubIdx,
        susceptance: f64,
        status: BranchStatus,
    ) -> BranchIdx {
        self.branches.push((id.into(), from, to, susceptance, status));
        BranchIdx(self.branches.len() - 1)
    }

    pub fn line(&mut self, id: impl Into<String>, from: SubIdx, to: SubIdx, susceptance: f64) -> BranchIdx {
        self.branch(id, from, to, susceptance, BranchStatus::Connected)
    }

    pub fn injection(&mut self, id: impl Into<String>, sub: SubIdx, p: f64) -> InjIdx {
        self.injections.push((id.into(), sub, p));
        InjIdx(self.injections.len() - 1)
    }

    pub fn build(&self) -> Result<Grid, GridError> {
        let slack = match self.slack.as_slice() {
            [] => return Err(GridError::Invalid("no slack substation".into())),
            [s] => *s,
            _ => return Err(GridError::Invalid("more than one slack substation".into())),
        };
        if !(self.base_mva.is_finite() && self.base_mva > 0.0) {
            return Err(GridError::Invalid(format!("base MVA {} is not positive", self.base_mva)));
        }
        let n_sub = self.substations.len();
        if slack.0 >= n_sub {
            return Err(GridError::Invalid("slack substation out of range".into()));
        }

        let mut sub_index = HashMap::new();
        let mut substations = Vec::with_capacity(n_sub);
        for (i, id) in self.substations.iter().enumerate() {
            if sub_index.insert(id.clone(), SubIdx(i)).is_some() {
                return Err(GridError::Invalid(format!("duplicate substation id {id}")));
            }
            substations.push(Substation {
                id: id.clone(),
                coupler: Coupler::Closed,
                terminals: Vec::new(),
            });
        }

        let mut branch_index = HashMap::new();
        let mut branches = Vec::with_capacity(self.branches.len());
        for (i, (id, from, to, b, status)) in self.branches.iter().enumerate() {
            if from.0 >= n_sub || to.0 >= n_sub {
                return Err(GridError::Invalid(format!("branch {id} references an unknown substation")));
            }
            if from == to {
                return Err(GridError::Invalid(format!("branch {id} has identical end substations")));
            }
            if !b.is_finite() || *b == 0.0 {
                return Err(GridError::Invalid(format!("branch {id} has susceptance {b}")));
            }
            if branch_index.insert(id.clone(), BranchIdx(i)).is_some() {
                return Err(GridError::Invalid(format!("duplicate branch id {id}")));
            }
            substations[from.0].terminals.push(Terminal::BranchEnd(BranchIdx(i), Side::From));
            substations[to.0].terminals.push(Terminal::BranchEnd(BranchIdx(i), Side::To));
            branches.push(Branch {
                id: id.clone(),
                from: *from,
                to: *to,
                susceptance: *b,
                status: *status,
                from_busbar: Busbar::One,
                to_busbar: Busbar::One,
            });
        }

        let mut injection_index = HashMap::new();
        let mut injections = Vec::with_capacity(self.injections.len());
        for (i, (id, sub, p)) in self.injections.iter().enumerate() {
            if sub.0 >= n_sub {
                return Err(GridError::Invalid(format!("injection {id} references an unknown substation")));
            }
            if !p.is_finite() {
                return Err(GridError::Invalid(format!("injection {id} is not finite")));
            }
            if injection_index.insert(id.clone(), InjIdx(i)).is_some() {
                return Err(GridError::Invalid(format!("duplicate injection id {id}")));
            }
            substations[sub.0].terminals.push(Terminal::Injection(InjIdx(i)));
            injections.push(Injection {
                id: id.clone(),
                sub: *sub,
                busbar: Busbar::One,
                p: *p,
            });
        }

        let grid = Grid {
            name: self.name.clone(),
            base_mva: self.base_mva,
            substations,
            branches,
            injections,
            slack,
            branch_index,
            sub_index,
            injection_index,
        };
        grid.check_connected()?;
        Ok(grid)
    }
}

impl Grid {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn base_mva(&self) -> f64 {
        self.base_mva
    }

    pub fn substations(&self) -> &[Substation] {
        &self.substations
    }

    pub fn substation(&self, sub: SubIdx) -> &Substation {
        &self.substations[sub.0]
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn branch(&self, b: BranchIdx) -> &Branch {
        &self.branches[b.0]
    }

    pub fn injections(&self) -> &[Injection] {
        &self.injections
    }

    pub fn injection(&self, i: InjIdx) -> &Injection {
        &self.injections[i.0]
    }

    pub fn slack(&self) -> SubIdx {
        self.slack
    }

    pub fn branch_by_id(&self, id: &str) -> Option<BranchIdx> {
        self.branch_index.get(id).copied()
    }

    pub fn substation_by_id(&self, id: &str) -> Option<SubIdx> {
        self.sub_index.get(id).copied()
    }

    pub fn injection_by_id(&self, id: &str) -> Option<InjIdx> {
        self.injection_index.get(id).copied()
    }

    /// Human-readable label of a change, using asset ids.
    pub fn describe(&self, change: &TopologyChange) -> String {
        match change {
            TopologyChange::Disconnect(b) => format!("disconnect {}", self.branch(*b).id),
            TopologyChange::Reconnect(b) => format!("reconnect {}", self.branch(*b).id),
            TopologyChange::Split(s, _) => format!("split {}", self.substation(*s).id),
            TopologyChange::Merge(s) => format!("merge {}", self.substation(*s).id),
        }
    }

    /// Busbar a terminal currently sits on.
    pub fn terminal_busbar(&self, terminal: &Terminal) -> Busbar {
        match terminal {
            Terminal::BranchEnd(b, side) => self.branch(*b).end(*side).1,
            Terminal::Injection(i) => self.injection(*i).busbar,
        }
    }

    pub fn terminal_substation(&self, terminal: &Terminal) -> SubIdx {
        match terminal {
            Terminal::BranchEnd(b, side) => self.branch(*b).end(*side).0,
            Terminal::Injection(i) => self.injection(*i).sub,
        }
    }

    /// Busbar assignment currently in force at a substation.
    pub fn current_assignment(&self, sub: SubIdx) -> BusbarAssignment {
        BusbarAssignment::new(
            self.substation(sub)
                .terminals
                .iter()
                .filter(|t| self.terminal_busbar(t) == Busbar::Two)
                .copied(),
        )
    }

    pub fn bus_layout(&self) -> BusLayout {
        let n = self.substations.len();
        let mut next = n as u32;
        let second_busbar = self
            .substations
            .iter()
            .map(|s| {
                s.is_split().then(|| {
                    next += 1;
                    next - 1
                })
            })
            .collect();
        BusLayout {
            bus_count: next as usize,
            second_busbar,
            slack_bus: self.slack.0,
        }
    }

    /// Electrical buses with their aggregated injections.
    pub fn buses(&self) -> Vec<Bus> {
        let layout = self.bus_layout();
        let mut buses: Vec<Bus> = (0..layout.bus_count())
            .map(|bus| {
                let (sub, busbar) = layout.busbar_of_bus(bus);
                let base = &self.substation(sub).id;
                Bus {
                    id: match busbar {
                        Busbar::One => base.clone(),
                        Busbar::Two => format!("{base}#2"),
                    },
                    substation: sub,
                    busbar,
                    injection: 0.0,
                }
            })
            .collect();
        for inj in &self.injections {
            buses[layout.bus_of(inj.sub, inj.busbar)].injection += inj.p;
        }
        buses
    }

    /// Net injection per electrical bus for `layout`.
    pub fn bus_injections(&self, layout: &BusLayout) -> Vec<f64> {
        let mut p = vec![0.0; layout.bus_count()];
        for inj in &self.injections {
            p[layout.bus_of(inj.sub, inj.busbar)] += inj.p;
        }
        p
    }

    /// Electrical end buses of a branch under `layout`.
    pub fn branch_buses(&self, layout: &BusLayout, b: BranchIdx) -> (usize, usize) {
        let br = self.branch(b);
        (
            layout.bus_of(br.from, br.from_busbar),
            layout.bus_of(br.to, br.to_busbar),
        )
    }

    /// Hash of everything that defines the topology: branch statuses, coupler
    /// states and busbar assignments.
    pub fn topology_fingerprint(&self) -> u64 {
        self.fingerprint_with_outage(None)
    }

    /// Fingerprint of this topology with `outage` disconnected, without
    /// building that grid.
    pub(crate) fn fingerprint_with_outage(&self, outage: Option<BranchIdx>) -> u64 {
        let mut h = DefaultHasher::new();
        for (i, b) in self.branches.iter().enumerate() {
            let status = if outage == Some(BranchIdx(i)) {
                BranchStatus::Disconnected
            } else {
                b.status
            };
            (status, b.from_busbar, b.to_busbar).hash(&mut h);
        }
        for s in &self.substations {
            s.coupler.hash(&mut h);
        }
        for i in &self.injections {
            i.busbar.hash(&mut h);
        }
        h.finish()
    }

    /// Same bus partition of all terminals, branch statuses, susceptances and
    /// injections. Values are compared to a relative `1e-12`, which absorbs
    /// unit-conversion round-off.
    pub fn electrically_equal(&self, other: &Grid) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
        if self.branches.len() != other.branches.len()
            || self.substations.len() != other.substations.len()
            || self.injections.len() != other.injections.len()
        {
            return false;
        }
        let (la, lb) = (self.bus_layout(), other.bus_layout());
        let same_status = self
            .branches
            .iter()
            .zip(&other.branches)
            .all(|(a, b)| a.status == b.status && close(a.susceptance, b.susceptance));
        let same_ends = (0..self.branches.len()).all(|i| {
            self.branch_buses(&la, BranchIdx(i)) == other.branch_buses(&lb, BranchIdx(i))
        });
        let same_inj = self
            .injections
            .iter()
            .zip(&other.injections)
            .all(|(a, b)| la.bus_of(a.sub, a.busbar) == lb.bus_of(b.sub, b.busbar) && close(a.p, b.p));
        same_status && same_ends && same_inj && la.bus_count() == lb.bus_count()
    }

    /// Applies `changes` in order and returns the resulting grid.
    ///
    /// Each change is checked against the grid produced by the previous ones;
    /// connectivity is checked once on the final grid.
    pub fn apply_change_set(&self, changes: &[TopologyChange]) -> Result<Grid, GridError> {
        let mut grid = self.clone();
        for (position, change) in changes.iter().enumerate() {
            grid.apply_in_place(change)
                .map_err(|reason| GridError::ChangeInapplicable {
                    position,
                    change: self.describe(change),
                    reason,
                })?;
        }
        grid.check_connected()?;
        Ok(grid)
    }

    /// Applies a single change without the final connectivity check.
    pub(crate) fn apply_in_place(&mut self, change: &TopologyChange) -> Result<(), String> {
        match change {
            TopologyChange::Disconnect(b) => {
                let br = self.branches.get_mut(b.0).ok_or("unknown branch")?;
                if br.status != BranchStatus::Connected {
                    return Err(format!("branch {} is already disconnected", br.id));
                }
                br.status = BranchStatus::Disconnected;
            }
            TopologyChange::Reconnect(b) => {
                let br = self.branches.get_mut(b.0).ok_or("unknown branch")?;
                if br.status != BranchStatus::Disconnected {
                    return Err(format!("branch {} is already connected", br.id));
                }
                br.status = BranchStatus::Connected;
            }
            TopologyChange::Split(s, assignment) => {
                let sub = self.substations.get(s.0).ok_or("unknown substation")?;
                if sub.is_split() {
                    return Err(format!("substation {} is already split", sub.id));
                }
                let own: HashSet<&Terminal> = sub.terminals.iter().collect();
                if let Some(t) = assignment.busbar_two.iter().find(|t| !own.contains(t)) {
                    return Err(format!("terminal {t:?} does not belong to substation {}", sub.id));
                }
                if assignment.is_trivial_for(sub) {
                    return Ok(());
                }
                let terminals = sub.terminals.clone();
                self.substations[s.0].coupler = Coupler::Open;
                for t in &terminals {
                    self.set_terminal_busbar(t, assignment.busbar_of(t));
                }
            }
            TopologyChange::Merge(s) => {
                let sub = self.substations.get(s.0).ok_or("unknown substation")?;
                if !sub.is_split() {
                    return Err(format!("substation {} is not split", sub.id));
                }
                let terminals = sub.terminals.clone();
                self.substations[s.0].coupler = Coupler::Closed;
                for t in &terminals {
                    self.set_terminal_busbar(t, Busbar::One);
                }
            }
        }
        Ok(())
    }

    fn set_terminal_busbar(&mut self, t: &Terminal, busbar: Busbar) {
        match t {
            Terminal::BranchEnd(b, Side::From) => self.branches[b.0].from_busbar = busbar,
            Terminal::BranchEnd(b, Side::To) => self.branches[b.0].to_busbar = busbar,
            Terminal::Injection(i) => self.injections[i.0].busbar = busbar,
        }
    }

    pub(crate) fn check_connected(&self) -> Result<(), GridError> {
        let comps = connected_components(self);
        if comps.count > 1 {
            Err(GridError::GridDisconnected {
                components: comps.count,
            })
        } else {
            Ok(())
        }
    }

    /// Connected branches whose loss would split the grid into two islands.
    pub fn bridges(&self) -> Vec<BranchIdx> {
        let layout = self.bus_layout();
        let n = layout.bus_count();
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        for (i, br) in self.branches.iter().enumerate() {
            if br.is_connected() {
                let (f, t) = self.branch_buses(&layout, BranchIdx(i));
                adj[f].push((t, i));
                adj[t].push((f, i));
            }
        }
        // Iterative Tarjan low-link, skipping only the edge id we came through so
        // that parallel branches are never reported as bridges.
        let mut disc = vec![usize::MAX; n];
        let mut low = vec![0; n];
        let mut out = Vec::new();
        let mut timer = 0;
        for root in 0..n {
            if disc[root] != usize::MAX {
                continue;
            }
            disc[root] = timer;
            low[root] = timer;
            timer += 1;
            let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
            while let Some(&mut (u, parent_edge, ref mut next)) = stack.last_mut() {
                if *next < adj[u].len() {
                    let (v, e) = adj[u][*next];
                    *next += 1;
                    if e == parent_edge {
                        continue;
                    }
                    if disc[v] == usize::MAX {
                        disc[v] = timer;
                        low[v] = timer;
                        timer += 1;
                        stack.push((v, e, 0));
                    } else {
                        low[u] = low[u].min(disc[v]);
                    }
                } else {
                    stack.pop();
                    if let Some(&(p, _, _)) = stack.last() {
                        low[p] = low[p].min(low[u]);
                        if low[u] > disc[p] {
                            out.push(BranchIdx(parent_edge));
                        }
                    }
                }
            }
        }
        out.sort();
        out
    }
}

/// Labels every electrical bus with its connected component over connected
/// branches.
pub fn connected_components(grid: &Grid) -> Components {
    let layout = grid.bus_layout();
    let n = layout.bus_count();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, br) in grid.branches.iter().enumerate() {
        if br.is_connected() {
            let (f, t) = grid.branch_buses(&layout, BranchIdx(i));
            adj[f].push(t);
            adj[t].push(f);
        }
    }
    let mut labels = vec![usize::MAX; n];
    let mut count = 0;
    let mut queue = VecDeque::new();
    for start in 0..n {
        if labels[start] != usize::MAX {
            continue;
        }
        labels[start] = count;
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if labels[v] == usize::MAX {
                    labels[v] = count;
                    queue.push_back(v);
                }
            }
        }
        count += 1;
    }
    Components { count, labels }
}
