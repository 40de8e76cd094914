//! Flows of a grid after several topology changes, rebuilt from the
//! reference state and one state per unitary change.
//!
//! For changes `τ_1 … τ_n` applied to a reference topology, the target flows
//! are `α·PF(ref) + Σ_k β_k·PF(ref ∘ τ_k)` with `α = 1 − Σ_k β_k`. The weights
//! solve an `n × n` system whose entries are ratios of one scalar observable
//! per change, read from the already-solved states:
//!
//! | change     | observable                                    |
//! |------------|-----------------------------------------------|
//! | disconnect | flow of the branch                            |
//! | reconnect  | angle difference across the branch            |
//! | split      | flow through the closed coupler               |
//! | merge      | angle difference between the two busbars      |
//!
//! Row `k` reads `β_k + Σ_{j≠k} β_j·(1 − obs_k(τ_j) / obs_k(ref)) = 1`.
//! No factorization of the target topology is ever needed.

use std::collections::{HashSet, VecDeque};
use std::sync::Arc;

use crate::dc::{DcSolver, SolvedState};
use crate::dense::DenseMatrix;
use crate::error::{DcError, StError};
use crate::grid::{
    BranchIdx, Busbar, BusbarAssignment, Grid, Side, SubIdx, Substation, Terminal, TopologyChange,
};

/// Observables smaller than this are treated as zero.
pub const OBSERVABLE_TOLERANCE: f64 = 1e-9;
/// Bound on `‖Mβ − 1‖∞` after the coefficient solve.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;
/// Largest superposed flow tolerated on a branch the target disconnects.
pub const SELF_CHECK_TOLERANCE: f64 = 1e-6;

/// Scalar read from a solved state to weigh one change.
#[derive(Debug, Clone, PartialEq)]
pub enum Observable {
    BranchFlow(BranchIdx),
    BranchAngle(BranchIdx),
    CouplerFlow(SubIdx, BusbarAssignment),
    BusbarAngle(SubIdx),
}

impl Observable {
    pub fn for_change(change: &TopologyChange) -> Self {
        match change {
            TopologyChange::Disconnect(b) => Observable::BranchFlow(*b),
            TopologyChange::Reconnect(b) => Observable::BranchAngle(*b),
            TopologyChange::Split(s, a) => Observable::CouplerFlow(*s, a.clone()),
            TopologyChange::Merge(s) => Observable::BusbarAngle(*s),
        }
    }

    /// Value in `state`. `grid` is any topology of the same network; only
    /// terminal membership and injections are read from it.
    pub fn evaluate(&self, grid: &Grid, state: &SolvedState) -> f64 {
        match self {
            Observable::BranchFlow(b) => state.flow(*b),
            Observable::BranchAngle(b) => state.delta_theta_of(*b),
            Observable::CouplerFlow(s, a) => split_residual_flow(state, grid, *s, a),
            Observable::BusbarAngle(s) => merge_delta_theta(state, *s),
        }
    }
}

fn observable_value(grid: &Grid, change: &TopologyChange, state: &SolvedState) -> f64 {
    match change {
        TopologyChange::Disconnect(b) => state.flow(*b),
        TopologyChange::Reconnect(b) => state.delta_theta_of(*b),
        TopologyChange::Split(s, a) => split_residual_flow(state, grid, *s, a),
        TopologyChange::Merge(s) => merge_delta_theta(state, *s),
    }
}

/// Flow through the closed coupler of `sub`, from busbar one to busbar two,
/// if the terminals listed in `assignment` were moved to busbar two.
///
/// Equals the net power those terminals draw from the rest of the
/// substation: the flows leaving through their branch ends minus their
/// injections. Returns zero when the substation is already split in
/// `state` or when the assignment leaves a busbar empty.
pub fn split_residual_flow(state: &SolvedState, grid: &Grid, sub: SubIdx, assignment: &BusbarAssignment) -> f64 {
    let layout = state.layout();
    if layout.bus_of(sub, Busbar::Two) != layout.bus_of(sub, Busbar::One) {
        return 0.0;
    }
    let substation = grid.substation(sub);
    if assignment.is_trivial_for(substation) {
        return 0.0;
    }
    busbar_two_draw(state, grid, substation, assignment)
}

fn busbar_two_draw(state: &SolvedState, grid: &Grid, substation: &Substation, assignment: &BusbarAssignment) -> f64 {
    substation
        .terminals()
        .iter()
        .filter(|t| assignment.busbar_of(t) == Busbar::Two)
        .map(|t| match t {
            Terminal::BranchEnd(b, Side::From) => state.flow(*b),
            Terminal::BranchEnd(b, Side::To) => -state.flow(*b),
            Terminal::Injection(i) => -grid.injection(*i).p,
        })
        .sum()
}

/// `θ(busbar one) − θ(busbar two)` of `sub`; zero when the coupler is closed
/// in `state`.
pub fn merge_delta_theta(state: &SolvedState, sub: SubIdx) -> f64 {
    let layout = state.layout();
    let theta = state.theta();
    theta[layout.bus_of(sub, Busbar::One)] - theta[layout.bus_of(sub, Busbar::Two)]
}

/// Reference state plus one solved state per unitary change, all under the
/// reference injections.
#[derive(Debug, Clone)]
pub struct StBasis {
    grid: Arc<Grid>,
    changes: Vec<TopologyChange>,
    solver: Arc<DcSolver>,
    reference: SolvedState,
    unitary: Vec<SolvedState>,
}

/// Solves the reference topology and each `ref ∘ τ_k` with a full
/// factorization. The result can serve any subset of `changes`.
pub fn build_basis(grid: &Grid, changes: &[TopologyChange]) -> Result<StBasis, StError> {
    check_distinct_targets(grid, changes.iter())?;
    let solver = DcSolver::new(grid)?;
    let reference = solver.solve(grid)?;
    let unitary = changes
        .iter()
        .enumerate()
        .map(|(position, change)| {
            let tag = |source: DcError| StError::UnitaryState {
                position,
                change: grid.describe(change),
                source,
            };
            let g = grid
                .apply_change_set(std::slice::from_ref(change))
                .map_err(|e| tag(e.into()))?;
            DcSolver::new(&g).and_then(|s| s.solve(&g)).map_err(tag)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(StBasis {
        grid: Arc::new(grid.clone()),
        changes: changes.to_vec(),
        solver: Arc::new(solver),
        reference,
        unitary,
    })
}

pub(crate) fn check_distinct_targets<'a>(
    grid: &Grid,
    changes: impl Iterator<Item = &'a TopologyChange>,
) -> Result<(), StError> {
    let mut seen = HashSet::new();
    for c in changes {
        if !seen.insert(c.target()) {
            return Err(StError::DuplicateChange {
                target: grid.describe(c),
            });
        }
    }
    Ok(())
}

impl StBasis {
    /// Assembles a basis from states the caller already holds. Every state
    /// must come from the same injections as `reference`.
    pub fn from_states(
        grid: Arc<Grid>,
        changes: Vec<TopologyChange>,
        solver: Arc<DcSolver>,
        reference: SolvedState,
        unitary: Vec<SolvedState>,
    ) -> Result<Self, StError> {
        check_distinct_targets(&grid, changes.iter())?;
        if changes.len() != unitary.len() {
            return Err(StError::Mismatch(format!(
                "{} changes but {} unitary states",
                changes.len(),
                unitary.len()
            )));
        }
        Ok(Self {
            grid,
            changes,
            solver,
            reference,
            unitary,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn changes(&self) -> &[TopologyChange] {
        &self.changes
    }

    pub fn len(&self) -> usize {
        self.changes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.changes.is_empty()
    }

    /// Factorization of the reference topology.
    pub fn solver(&self) -> &Arc<DcSolver> {
        &self.solver
    }

    pub fn reference(&self) -> &SolvedState {
        &self.reference
    }

    pub fn unitary(&self) -> &[SolvedState] {
        &self.unitary
    }

    pub fn observables(&self) -> Vec<Observable> {
        self.changes.iter().map(Observable::for_change).collect()
    }

    /// Coefficient system over every change of the basis.
    pub fn coefficient_matrix(&self) -> Result<CoefficientSystem, StError> {
        self.coefficient_matrix_for(&(0..self.len()).collect::<Vec<_>>())
    }

    /// Coefficient system over a subset of the basis changes, given by
    /// position.
    pub fn coefficient_matrix_for(&self, selection: &[usize]) -> Result<CoefficientSystem, StError> {
        if let Some(bad) = selection.iter().find(|&&i| i >= self.len()) {
            return Err(StError::Mismatch(format!("selection index {bad} out of range")));
        }
        let distinct: HashSet<_> = selection.iter().collect();
        if distinct.len() != selection.len() {
            return Err(StError::Mismatch("selection repeats a change".into()));
        }
        let changes: Vec<&TopologyChange> = selection.iter().map(|&i| &self.changes[i]).collect();
        let states: Vec<&SolvedState> = selection.iter().map(|&i| &self.unitary[i]).collect();
        let mut system = coefficient_system(&self.grid, &changes, &self.reference, &states)?;
        system.selection = selection.to_vec();
        Ok(system)
    }

    /// Coefficients and superposed target state for a subset of changes.
    pub fn evaluate(&self, selection: &[usize]) -> Result<(BetaSolution, SolvedState), StError> {
        let beta = solve_betas(&self.coefficient_matrix_for(selection)?)?;
        let state = superpose(self, &beta)?;
        Ok((beta, state))
    }
}

/// The `n × n` system `M·β = 1` of one change set, after pruning no-op changes.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSystem {
    /// Matrix over the changes that were kept, in selection order.
    pub matrix: DenseMatrix,
    /// Positions (within the selection) of the rows/columns of `matrix`.
    pub active: Vec<usize>,
    /// Positions (within the selection) of changes pruned as no-ops.
    pub pruned: Vec<usize>,
    /// Observable of each selected change in the reference state.
    pub reference_observables: Vec<f64>,
    /// Basis positions of the selected changes.
    pub selection: Vec<usize>,
}

/// Builds the coefficient system from observables read off the given states.
///
/// `unitary[k]` must be the state of `reference`'s topology with `changes[k]`
/// applied. A change whose observable vanishes in the reference state and in
/// every other unitary state is a no-op for the combination and is pruned
/// with `β = 0`; if it vanishes only in the reference state the system is
/// degenerate.
pub fn coefficient_system(
    grid: &Grid,
    changes: &[&TopologyChange],
    reference: &SolvedState,
    unitary: &[&SolvedState],
) -> Result<CoefficientSystem, StError> {
    assert_eq!(changes.len(), unitary.len(), "one unitary state per change");
    let n = changes.len();
    let reference_observables: Vec<f64> = changes.iter().map(|c| observable_value(grid, c, reference)).collect();
    // values[k][j]: observable of change k in the state of change j
    let values: Vec<Vec<f64>> = changes
        .iter()
        .map(|c| unitary.iter().map(|s| observable_value(grid, c, s)).collect())
        .collect();

    let mut active = Vec::with_capacity(n);
    let mut pruned = Vec::new();
    for k in 0..n {
        if reference_observables[k].abs() >= OBSERVABLE_TOLERANCE {
            active.push(k);
        } else if (0..n).filter(|&j| j != k).all(|j| values[k][j].abs() < OBSERVABLE_TOLERANCE) {
            pruned.push(k);
        } else {
            return Err(StError::DegenerateObservable {
                position: k,
                change: grid.describe(changes[k]),
            });
        }
    }

    let mut matrix = DenseMatrix::identity(active.len());
    for (r, &k) in active.iter().enumerate() {
        for (c, &j) in active.iter().enumerate() {
            if r != c {
                matrix[(r, c)] = 1.0 - values[k][j] / reference_observables[k];
            }
        }
    }
    Ok(CoefficientSystem {
        matrix,
        active,
        pruned,
        reference_observables,
        selection: (0..n).collect(),
    })
}

/// Weights of the reference and unitary states.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaSolution {
    /// One weight per selected change, zero for pruned ones.
    pub betas: Vec<f64>,
    /// `1 − Σ betas`.
    pub alpha: f64,
    /// The solved matrix (over active changes only).
    pub matrix: DenseMatrix,
    pub pruned: Vec<usize>,
    /// Basis positions of the selected changes.
    pub selection: Vec<usize>,
    /// `‖Mβ − 1‖∞`.
    pub residual: f64,
}

/// Solves `M·β = 1` directly (dense, partial pivoting); never regularizes.
pub fn solve_betas(system: &CoefficientSystem) -> Result<BetaSolution, StError> {
    let active_betas = solve_beta_matrix(&system.matrix)?;
    let residual = system
        .matrix
        .mul_vec(&active_betas)
        .iter()
        .fold(0.0f64, |m, v| m.max((v - 1.0).abs()));
    let mut betas = vec![0.0; system.reference_observables.len()];
    for (&k, b) in system.active.iter().zip(&active_betas) {
        betas[k] = *b;
    }
    let alpha = 1.0 - betas.iter().sum::<f64>();
    Ok(BetaSolution {
        betas,
        alpha,
        matrix: system.matrix.clone(),
        pruned: system.pruned.clone(),
        selection: system.selection.clone(),
        residual,
    })
}

/// Solves `M·β = 1` for a bare coefficient matrix.
pub fn solve_beta_matrix(matrix: &DenseMatrix) -> Result<Vec<f64>, StError> {
    if !matrix.is_finite() {
        return Err(StError::SingularMatrix {
            column: 0,
            pivot: f64::NAN,
        });
    }
    let ones = vec![1.0; matrix.dim()];
    let betas = matrix
        .solve(&ones)
        .map_err(|p| StError::SingularMatrix {
            column: p.column,
            pivot: p.pivot,
        })?;
    let residual = matrix
        .mul_vec(&betas)
        .iter()
        .fold(0.0f64, |m, v| m.max((v - 1.0).abs()));
    if !(residual <= RESIDUAL_TOLERANCE) {
        return Err(StError::Residual {
            residual,
            limit: RESIDUAL_TOLERANCE,
        });
    }
    Ok(betas)
}

/// `α·ref + Σ β_k·unitary_k`, branch by branch.
pub fn superpose_flow_vectors(reference: &[f64], unitary: &[&[f64]], betas: &[f64], alpha: f64) -> Vec<f64> {
    let mut out: Vec<f64> = reference.iter().map(|f| alpha * f).collect();
    for (flows, &beta) in unitary.iter().zip(betas) {
        if beta != 0.0 {
            for (o, f) in out.iter_mut().zip(flows.iter()) {
                *o += beta * f;
            }
        }
    }
    out
}

fn check_solution(basis: &StBasis, solution: &BetaSolution) -> Result<(), StError> {
    if solution.betas.len() != solution.selection.len() {
        return Err(StError::Mismatch("betas and selection lengths differ".into()));
    }
    if solution.selection.iter().any(|&i| i >= basis.len()) {
        return Err(StError::Mismatch("selection index out of range".into()));
    }
    Ok(())
}

/// Target flows only, without rebuilding angles.
pub fn superpose_flows(basis: &StBasis, solution: &BetaSolution) -> Result<Vec<f64>, StError> {
    check_solution(basis, solution)?;
    let unitary: Vec<&[f64]> = solution.selection.iter().map(|&i| basis.unitary[i].flows()).collect();
    Ok(superpose_flow_vectors(
        basis.reference.flows(),
        &unitary,
        &solution.betas,
        solution.alpha,
    ))
}

/// Superposed state of the target topology.
///
/// Branches the target disconnects must come out at (numerically) zero flow
/// and are then set to exactly zero. Angles are rebuilt from the slack by
/// walking connected branches with `Δθ = pf/σ`.
pub fn superpose(basis: &StBasis, solution: &BetaSolution) -> Result<SolvedState, StError> {
    let mut flows = superpose_flows(basis, solution)?;
    let changes: Vec<TopologyChange> = solution.selection.iter().map(|&i| basis.changes[i].clone()).collect();
    let target = basis.grid.apply_change_set(&changes)?;
    enforce_disconnected_zero(&target, &mut flows)?;
    Ok(rebuild_state(&target, flows))
}

pub(crate) fn enforce_disconnected_zero(target: &Grid, flows: &mut [f64]) -> Result<(), StError> {
    for (br, f) in target.branches().iter().zip(flows.iter_mut()) {
        if !br.is_connected() {
            if !(f.abs() <= SELF_CHECK_TOLERANCE) {
                return Err(StError::SelfCheckFailed {
                    branch: br.id.clone(),
                    flow: *f,
                });
            }
            *f = 0.0;
        }
    }
    Ok(())
}

/// Builds a full state of `target` from its branch flows.
pub fn rebuild_state(target: &Grid, flows: Vec<f64>) -> SolvedState {
    let layout = target.bus_layout();
    let n = layout.bus_count();
    let mut adj: Vec<Vec<(usize, BranchIdx, bool)>> = vec![Vec::new(); n];
    for (i, br) in target.branches().iter().enumerate() {
        if br.is_connected() {
            let (f, t) = target.branch_buses(&layout, BranchIdx(i));
            adj[f].push((t, BranchIdx(i), true));
            adj[t].push((f, BranchIdx(i), false));
        }
    }
    let mut theta = vec![f64::NAN; n];
    theta[layout.slack_bus()] = 0.0;
    let mut queue = VecDeque::from([layout.slack_bus()]);
    while let Some(u) = queue.pop_front() {
        for &(v, b, u_is_from) in &adj[u] {
            if theta[v].is_nan() {
                let drop = flows[b.0] / target.branch(b).susceptance;
                theta[v] = if u_is_from { theta[u] - drop } else { theta[u] + drop };
                queue.push_back(v);
            }
        }
    }
    let delta_theta = target
        .branches()
        .iter()
        .enumerate()
        .map(|(i, br)| {
            if br.is_connected() {
                flows[i] / br.susceptance
            } else {
                let (f, t) = target.branch_buses(&layout, BranchIdx(i));
                theta[f] - theta[t]
            }
        })
        .collect();
    SolvedState::from_parts(target.topology_fingerprint(), Arc::new(layout), theta, flows, delta_theta)
}
