//! DC power flow: nodal susceptance matrix, factorized solver, line outage
//! distribution factors and the cancelling-flow equivalent model.
//!
//! Angles are in radians with the slack bus at zero. Branch flows are oriented
//! from the `from` end to the `to` end: `pf = σ·(θ_from − θ_to)`.

use std::collections::HashSet;
use std::sync::Arc;

use faer::prelude::*;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};

use crate::dense::DenseMatrix;
use crate::error::DcError;
use crate::grid::{connected_components, BranchIdx, BranchStatus, BusLayout, Grid, TopologyChange};

/// Nodal mismatch allowed after a solve, per-unit.
pub const SOLVER_TOLERANCE: f64 = 1e-10;

/// Reduced nodal susceptance matrix (slack row and column removed).
#[derive(Debug, Clone)]
pub struct Bbus {
    layout: BusLayout,
    reduced_of_bus: Vec<Option<usize>>,
    bus_of_reduced: Vec<usize>,
    full: Vec<(usize, usize, f64)>,
    reduced: Option<SparseColMat<usize, f64>>,
}

impl Bbus {
    pub fn layout(&self) -> &BusLayout {
        &self.layout
    }

    /// Dimension of the reduced matrix: bus count minus one.
    pub fn dim(&self) -> usize {
        self.bus_of_reduced.len()
    }

    /// Reduced row of an electrical bus; `None` for the slack.
    pub fn reduced_index(&self, bus: usize) -> Option<usize> {
        self.reduced_of_bus[bus]
    }

    /// Electrical bus of each reduced row.
    pub fn bus_order(&self) -> &[usize] {
        &self.bus_of_reduced
    }

    /// Entry of the full (pre-reduction) matrix, indexed by electrical bus.
    pub fn full_entry(&self, i: usize, j: usize) -> f64 {
        self.full
            .iter()
            .filter(|(r, c, _)| *r == i && *c == j)
            .map(|(_, _, v)| v)
            .sum()
    }

    /// Entry of the reduced matrix, indexed by reduced row and column.
    pub fn reduced_entry(&self, i: usize, j: usize) -> f64 {
        self.full_entry(self.bus_of_reduced[i], self.bus_of_reduced[j])
    }
}

/// Builds the nodal susceptance matrix of the grid's current topology.
pub fn build_bbus(grid: &Grid) -> Result<Bbus, DcError> {
    let layout = grid.bus_layout();
    let comps = connected_components(grid);
    if comps.count > 1 {
        return Err(DcError::SingularSystem(format!(
            "{} islands; some bus has no path to the slack",
            comps.count
        )));
    }
    let n = layout.bus_count();
    let slack = layout.slack_bus();
    let mut reduced_of_bus = vec![None; n];
    let mut bus_of_reduced = Vec::with_capacity(n.saturating_sub(1));
    for bus in (0..n).filter(|&b| b != slack) {
        reduced_of_bus[bus] = Some(bus_of_reduced.len());
        bus_of_reduced.push(bus);
    }

    let mut full = Vec::with_capacity(4 * grid.branches().len());
    for (i, br) in grid.branches().iter().enumerate() {
        if br.status != BranchStatus::Connected {
            continue;
        }
        let (f, t) = grid.branch_buses(&layout, BranchIdx(i));
        let s = br.susceptance;
        full.extend([(f, f, s), (t, t, s), (f, t, -s), (t, f, -s)]);
    }

    let reduced = if bus_of_reduced.is_empty() {
        None
    } else {
        let triplets: Vec<_> = full
            .iter()
            .filter_map(|&(r, c, v)| match (reduced_of_bus[r], reduced_of_bus[c]) {
                (Some(r), Some(c)) => Some(Triplet::new(r, c, v)),
                _ => None,
            })
            .collect();
        let m = bus_of_reduced.len();
        Some(
            SparseColMat::try_new_from_triplets(m, m, &triplets)
                .map_err(|e| DcError::SingularSystem(format!("matrix assembly failed: {e:?}")))?,
        )
    };

    Ok(Bbus {
        layout,
        reduced_of_bus,
        bus_of_reduced,
        full,
        reduced,
    })
}

/// Phase angles and branch flows of one topology under the grid's injections.
#[derive(Debug, Clone, PartialEq)]
pub struct SolvedState {
    fingerprint: u64,
    layout: Arc<BusLayout>,
    theta: Vec<f64>,
    flows: Vec<f64>,
    delta_theta: Vec<f64>,
}

impl SolvedState {
    /// Builds a state from bus angles; disconnected branches get zero flow.
    pub fn from_angles(grid: &Grid, layout: Arc<BusLayout>, theta: Vec<f64>) -> Self {
        let mut flows = Vec::with_capacity(grid.branches().len());
        let mut delta_theta = Vec::with_capacity(grid.branches().len());
        for (i, br) in grid.branches().iter().enumerate() {
            let (f, t) = grid.branch_buses(&layout, BranchIdx(i));
            let d = theta[f] - theta[t];
            delta_theta.push(d);
            flows.push(if br.is_connected() { br.susceptance * d } else { 0.0 });
        }
        Self {
            fingerprint: grid.topology_fingerprint(),
            layout,
            theta,
            flows,
            delta_theta,
        }
    }

    pub(crate) fn from_parts(
        fingerprint: u64,
        layout: Arc<BusLayout>,
        theta: Vec<f64>,
        flows: Vec<f64>,
        delta_theta: Vec<f64>,
    ) -> Self {
        Self {
            fingerprint,
            layout,
            theta,
            flows,
            delta_theta,
        }
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn layout(&self) -> &BusLayout {
        &self.layout
    }

    /// Bus phase angles in radians, slack bus at zero.
    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// Per-branch flows in per-unit.
    pub fn flows(&self) -> &[f64] {
        &self.flows
    }

    pub fn flow(&self, b: BranchIdx) -> f64 {
        self.flows[b.0]
    }

    /// `θ_from − θ_to` for every branch, connected or not.
    pub fn delta_theta(&self) -> &[f64] {
        &self.delta_theta
    }

    pub fn delta_theta_of(&self, b: BranchIdx) -> f64 {
        self.delta_theta[b.0]
    }

    /// Flows converted to MW.
    pub fn flows_mw(&self, base_mva: f64) -> Vec<f64> {
        self.flows.iter().map(|f| f * base_mva).collect()
    }

    /// Largest nodal balance violation over non-slack buses, per-unit.
    ///
    /// `grid` must be the topology this state was solved for.
    pub fn max_mismatch(&self, grid: &Grid) -> f64 {
        let layout = grid.bus_layout();
        let mut balance = grid.bus_injections(&layout);
        for (i, f) in self.flows.iter().enumerate() {
            let (from, to) = grid.branch_buses(&layout, BranchIdx(i));
            balance[from] -= f;
            balance[to] += f;
        }
        balance
            .iter()
            .enumerate()
            .filter(|(bus, _)| *bus != layout.slack_bus())
            .fold(0.0, |m, (_, v)| m.max(v.abs()))
    }
}

/// A factorized reduced Bbus for one topology. Right-hand-side solves take
/// `&self`, so one factorization can serve concurrent solves.
#[derive(Debug, Clone)]
pub struct DcSolver {
    bbus: Bbus,
    layout: Arc<BusLayout>,
    lu: Option<Lu<usize, f64>>,
}

impl DcSolver {
    pub fn new(grid: &Grid) -> Result<Self, DcError> {
        let bbus = build_bbus(grid)?;
        let lu = match &bbus.reduced {
            Some(m) => Some(
                m.sp_lu()
                    .map_err(|e| DcError::SingularSystem(format!("factorization failed: {e:?}")))?,
            ),
            None => None,
        };
        Ok(Self {
            layout: Arc::new(bbus.layout.clone()),
            bbus,
            lu,
        })
    }

    pub fn bbus(&self) -> &Bbus {
        &self.bbus
    }

    pub fn layout(&self) -> &BusLayout {
        &self.layout
    }

    /// Solves `Bbus·θ = p` for a full-length bus injection vector. The slack
    /// entry of `p` is ignored and the slack angle is zero.
    pub fn solve_angles(&self, p_bus: &[f64]) -> Vec<f64> {
        let n = self.layout.bus_count();
        assert_eq!(p_bus.len(), n, "injection vector length mismatch");
        let mut theta = vec![0.0; n];
        if let Some(lu) = &self.lu {
            let order = &self.bbus.bus_of_reduced;
            let mut rhs = Mat::<f64>::from_fn(order.len(), 1, |i, _| p_bus[order[i]]);
            lu.solve_in_place(rhs.as_mut());
            for (i, &bus) in order.iter().enumerate() {
                theta[bus] = rhs[(i, 0)];
            }
        }
        theta
    }

    /// Angles produced by a unit injection at `from_bus` and unit withdrawal
    /// at `to_bus`.
    pub fn dipole_angles(&self, from_bus: usize, to_bus: usize) -> Vec<f64> {
        let mut p = vec![0.0; self.layout.bus_count()];
        p[from_bus] += 1.0;
        p[to_bus] -= 1.0;
        self.solve_angles(&p)
    }

    /// Full DC solution for `grid`, which must have this solver's topology.
    pub fn solve(&self, grid: &Grid) -> Result<SolvedState, DcError> {
        debug_assert_eq!(grid.bus_layout(), *self.layout);
        let p = grid.bus_injections(&self.layout);
        let mut theta = self.solve_angles(&p);
        // one step of iterative refinement if the residual is above the bar
        let residual = self.angle_residual(grid, &p, &theta);
        if residual.iter().any(|r| r.abs() > 0.1 * SOLVER_TOLERANCE) {
            let correction = self.solve_angles(&residual);
            for (t, c) in theta.iter_mut().zip(&correction) {
                *t += c;
            }
        }
        let state = SolvedState::from_angles(grid, self.layout.clone(), theta);
        let mismatch = state.max_mismatch(grid);
        if !(mismatch <= SOLVER_TOLERANCE) {
            return Err(DcError::SingularSystem(format!(
                "nodal mismatch {mismatch:.3e} after solve"
            )));
        }
        Ok(state)
    }

    fn angle_residual(&self, grid: &Grid, p: &[f64], theta: &[f64]) -> Vec<f64> {
        let mut r = p.to_vec();
        for (i, br) in grid.branches().iter().enumerate() {
            if br.is_connected() {
                let (f, t) = grid.branch_buses(&self.layout, BranchIdx(i));
                let flow = br.susceptance * (theta[f] - theta[t]);
                r[f] -= flow;
                r[t] += flow;
            }
        }
        r[self.layout.slack_bus()] = 0.0;
        r
    }

    /// Flows on every connected branch caused by a unit dipole across `outage`.
    fn dipole_flows(&self, grid: &Grid, outage: BranchIdx) -> Vec<f64> {
        let (f, t) = grid.branch_buses(&self.layout, outage);
        let theta = self.dipole_angles(f, t);
        grid.branches()
            .iter()
            .enumerate()
            .map(|(i, br)| {
                if br.is_connected() {
                    let (a, b) = grid.branch_buses(&self.layout, BranchIdx(i));
                    br.susceptance * (theta[a] - theta[b])
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// LODF row of `outage` in this solver's topology, from a unit dipole
    /// injection (independent of injections and defined for zero-flow lines).
    pub fn lodf(&self, grid: &Grid, outage: BranchIdx) -> Result<LodfRow, DcError> {
        let br = grid.branch(outage);
        if !br.is_connected() {
            return Err(DcError::BranchNotConnected { branch: br.id.clone() });
        }
        let dipole = self.dipole_flows(grid, outage);
        let self_sensitivity = dipole[outage.0];
        let denom = 1.0 - self_sensitivity;
        if denom.abs() < 1e-9 {
            return Err(DcError::IslandingOutage { branch: br.id.clone() });
        }
        let mut factors: Vec<f64> = dipole.iter().map(|d| d / denom).collect();
        factors[outage.0] = -1.0;
        Ok(LodfRow {
            outage,
            factors,
            self_sensitivity,
        })
    }

    /// State after disconnecting `outage`, derived from `reference` (solved
    /// with this solver) without refactorizing.
    pub fn outage_state(
        &self,
        grid: &Grid,
        reference: &SolvedState,
        outage: BranchIdx,
    ) -> Result<SolvedState, DcError> {
        let br = grid.branch(outage);
        if !br.is_connected() {
            return Err(DcError::BranchNotConnected { branch: br.id.clone() });
        }
        let (f, t) = grid.branch_buses(&self.layout, outage);
        let dipole_theta = self.dipole_angles(f, t);
        let self_sensitivity = br.susceptance * (dipole_theta[f] - dipole_theta[t]);
        let denom = 1.0 - self_sensitivity;
        if denom.abs() < 1e-9 {
            return Err(DcError::IslandingOutage { branch: br.id.clone() });
        }
        let amount = reference.flow(outage) / denom;
        let theta: Vec<f64> = reference
            .theta()
            .iter()
            .zip(&dipole_theta)
            .map(|(t0, d)| t0 + amount * d)
            .collect();
        let mut flows = Vec::with_capacity(grid.branches().len());
        let mut delta_theta = Vec::with_capacity(grid.branches().len());
        for (i, b) in grid.branches().iter().enumerate() {
            let (a, c) = grid.branch_buses(&self.layout, BranchIdx(i));
            let d = theta[a] - theta[c];
            delta_theta.push(d);
            flows.push(if b.is_connected() && i != outage.0 { b.susceptance * d } else { 0.0 });
        }
        Ok(SolvedState::from_parts(
            grid.fingerprint_with_outage(Some(outage)),
            self.layout.clone(),
            theta,
            flows,
            delta_theta,
        ))
    }
}

/// Solves the DC power flow of `grid`.
pub fn solve_dc(grid: &Grid) -> Result<SolvedState, DcError> {
    DcSolver::new(grid)?.solve(grid)
}

/// Line outage distribution factors of one outaged branch.
///
/// `factors[l] = (pf_l after outage − pf_l before) / pf_outage before`, with
/// `factors[outage] = −1`.
#[derive(Debug, Clone, PartialEq)]
pub struct LodfRow {
    pub outage: BranchIdx,
    pub factors: Vec<f64>,
    /// Flow through the outaged branch per unit dipole injected across it.
    pub self_sensitivity: f64,
}

impl LodfRow {
    pub fn factor(&self, b: BranchIdx) -> f64 {
        self.factors[b.0]
    }
}

/// LODF row of `outage` on the topology of `grid`.
///
/// `reference` is only checked for topology consistency: the factors do not
/// depend on injections.
pub fn lodf(grid: &Grid, reference: &SolvedState, outage: BranchIdx) -> Result<LodfRow, DcError> {
    if reference.fingerprint() != grid.topology_fingerprint() {
        return Err(DcError::SingularSystem(
            "reference state was solved on another topology".into(),
        ));
    }
    ensure_not_islanding(grid, &[outage])?;
    DcSolver::new(grid)?.lodf(grid, outage)
}

/// LODF row computed literally from its defining ratio with a full re-solve
/// of the outaged topology.
pub fn lodf_by_resolve(grid: &Grid, reference: &SolvedState, outage: BranchIdx) -> Result<LodfRow, DcError> {
    let pf_o = reference.flow(outage);
    if pf_o.abs() < 1e-12 {
        return Err(DcError::ZeroReferenceFlow {
            branch: grid.branch(outage).id.clone(),
        });
    }
    ensure_not_islanding(grid, &[outage])?;
    let after = solve_dc(&grid.apply_change_set(&[TopologyChange::Disconnect(outage)])?)?;
    let factors = after
        .flows()
        .iter()
        .zip(reference.flows())
        .map(|(a, r)| (a - r) / pf_o)
        .collect();
    Ok(LodfRow {
        outage,
        factors,
        self_sensitivity: f64::NAN,
    })
}

fn ensure_not_islanding(grid: &Grid, outages: &[BranchIdx]) -> Result<(), DcError> {
    for &o in outages {
        if !grid.branch(o).is_connected() {
            return Err(DcError::BranchNotConnected {
                branch: grid.branch(o).id.clone(),
            });
        }
    }
    let mut g = grid.clone();
    for &o in outages {
        g.apply_in_place(&TopologyChange::Disconnect(o))
            .map_err(DcError::SingularSystem)?;
    }
    if connected_components(&g).count > 1 {
        let names: Vec<_> = outages.iter().map(|o| grid.branch(*o).id.as_str()).collect();
        return Err(DcError::IslandingOutage {
            branch: names.join("+"),
        });
    }
    Ok(())
}

/// Cancelling flow of one outaged branch in the equivalent model where the
/// branch stays connected.
#[derive(Debug, Clone, PartialEq)]
pub struct CancellingFlow {
    pub branch: BranchIdx,
    /// Weight of this branch's LODF column in the multi-outage update
    /// `pf = pf_ref + Σ_o LODF_o · w_o`; equals `pf_ref` for a single outage.
    pub lodf_weight: f64,
    /// Cancelling flow `cf`, oriented like the branch. Its nodal form is a
    /// withdrawal of `cf` at the from bus and an injection of `cf` at the to
    /// bus.
    pub cf: f64,
    /// Ohm's-law flow `σ·Δθ` the still-connected branch carries.
    pub virtual_flow: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CancellingFlowReport {
    pub cancelling: Vec<CancellingFlow>,
    /// Max |virtual-model flow − physical flow| over all branches; on outaged
    /// branches the virtual-model flow is `vt + cf`.
    pub max_flow_deviation: f64,
    /// Max |θ virtual − θ physical| over all buses.
    pub max_angle_deviation: f64,
    /// Max |vt + cf| over outaged branches.
    pub max_cancellation_deviation: f64,
}

/// Checks that disconnecting `outages` is reproduced by injecting cancelling
/// dipoles on the reference topology, the cancelling flows coming from the
/// LODF system `pf_l + Σ_o LODF_{o,l}·w_o = 0` over outaged `l`.
pub fn verify_cancelling_flow_model(grid: &Grid, outages: &[BranchIdx]) -> Result<CancellingFlowReport, DcError> {
    let distinct: HashSet<_> = outages.iter().collect();
    if distinct.len() != outages.len() {
        return Err(DcError::SingularSystem("duplicate outage".into()));
    }
    ensure_not_islanding(grid, outages)?;
    let solver = DcSolver::new(grid)?;
    let reference = solver.solve(grid)?;
    let rows: Vec<LodfRow> = outages
        .iter()
        .map(|&o| solver.lodf(grid, o))
        .collect::<Result<_, _>>()?;

    let n = outages.len();
    let mut system = DenseMatrix::zeros(n);
    let mut rhs = vec![0.0; n];
    for (i, &l) in outages.iter().enumerate() {
        for (j, row) in rows.iter().enumerate() {
            system[(i, j)] = row.factor(l);
        }
        rhs[i] = -reference.flow(l);
    }
    let weights = system
        .solve(&rhs)
        .map_err(|p| DcError::SingularSystem(format!("cancelling-flow system singular at column {}", p.column)))?;

    // dipole of magnitude w/(1 − self sensitivity) reproduces each outage
    let layout = solver.layout().clone();
    let mut p = grid.bus_injections(&layout);
    let mut cfs = Vec::with_capacity(n);
    for (row, w) in rows.iter().zip(&weights) {
        let cf = -w / (1.0 - row.self_sensitivity);
        let (f, t) = grid.branch_buses(&layout, row.outage);
        p[f] -= cf;
        p[t] += cf;
        cfs.push(cf);
    }
    let virtual_theta = solver.solve_angles(&p);
    let virtual_state = SolvedState::from_angles(grid, Arc::new(layout), virtual_theta);

    let physical_grid = grid.apply_change_set(&outages.iter().map(|&o| TopologyChange::Disconnect(o)).collect::<Vec<_>>())?;
    let physical = solve_dc(&physical_grid)?;

    let mut cancelling = Vec::with_capacity(n);
    let mut max_cancellation: f64 = 0.0;
    let mut modeled = virtual_state.flows().to_vec();
    for ((&l, w), cf) in outages.iter().zip(&weights).zip(&cfs) {
        let vt = virtual_state.flow(l);
        modeled[l.0] = vt + cf;
        max_cancellation = max_cancellation.max((vt + cf).abs());
        cancelling.push(CancellingFlow {
            branch: l,
            lodf_weight: *w,
            cf: *cf,
            virtual_flow: vt,
        });
    }
    let max_flow_deviation = modeled
        .iter()
        .zip(physical.flows())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let max_angle_deviation = virtual_state
        .theta()
        .iter()
        .zip(physical.theta())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    Ok(CancellingFlowReport {
        cancelling,
        max_flow_deviation,
        max_angle_deviation,
        max_cancellation_deviation: max_cancellation,
    })
}
