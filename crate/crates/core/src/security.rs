//! N-1 screening after a topological action.
//!
//! The action's basis (reference plus one state per action change) is built
//! once. Each contingency adds a single outage state, derived from the
//! reference factorization, and is resolved with its own `(n+1) × (n+1)`
//! coefficient system. Contingencies are independent of each other and are
//! mapped in parallel.

use std::collections::HashSet;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use crate::dc::{DcSolver, SolvedState};
use crate::error::{DcError, StError};
use crate::grid::{BranchIdx, Grid, TopologyChange};
use crate::superposition::{
    build_basis, coefficient_system, solve_betas, superpose_flow_vectors, StBasis, SELF_CHECK_TOLERANCE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ContingencyStatus {
    Ok,
    /// The outage splits the target topology into islands.
    Islanding,
    /// No coefficient system could be formed or solved.
    Degenerate,
    /// The branch is not connected in the target topology.
    Skipped,
    /// Every weight is within the filter threshold of one; flows not recomputed.
    Independent,
}

impl ContingencyStatus {
    pub fn label(self) -> &'static str {
        match self {
            ContingencyStatus::Ok => "ok",
            ContingencyStatus::Islanding => "islanding",
            ContingencyStatus::Degenerate => "degenerate",
            ContingencyStatus::Skipped => "skipped",
            ContingencyStatus::Independent => "independent",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContingencyResult {
    pub branch: BranchIdx,
    pub branch_id: String,
    pub status: ContingencyStatus,
    /// Post-contingency flows, present iff the status is `Ok`.
    pub flows: Option<Vec<f64>>,
    /// Weights of the action changes followed by the outage weight. Empty when
    /// no system was solved.
    pub betas: Vec<f64>,
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

/// Wall times of one screening run, in seconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ScreeningTiming {
    /// Reference factorization plus one full solve per action change.
    pub basis_build: f64,
    /// Median over solved contingencies of the coefficient-system assembly
    /// and solve.
    pub per_contingency: f64,
    /// Sum of the outage states derived from the reference factorization.
    pub contingency_states: f64,
    /// Sum of the coefficient systems.
    pub coefficient_systems: f64,
    /// Sum of the superpositions.
    pub superposition: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScreeningReport {
    pub case: String,
    pub method: String,
    pub results: Vec<ContingencyResult>,
    /// Per-branch max |flow| over `Ok` contingencies.
    pub worst_case: Vec<f64>,
    pub timing: ScreeningTiming,
}

impl ScreeningReport {
    pub fn count(&self, status: ContingencyStatus) -> usize {
        self.results.iter().filter(|r| r.status == status).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScreeningOptions {
    /// Worker threads; 0 uses rayon's default.
    pub jobs: usize,
    /// When set, a contingency whose weights all satisfy `|β − 1| ≤ ε` is
    /// reported `Independent` and its flows are not superposed.
    pub beta_filter: Option<f64>,
}

impl Default for ScreeningOptions {
    fn default() -> Self {
        Self { jobs: 1, beta_filter: None }
    }
}

/// Default threshold of the optional independence filter.
pub const DEFAULT_BETA_FILTER: f64 = 1e-3;

pub(crate) fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> T {
    if jobs == 0 {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(f),
        Err(e) => {
            log::warn!("thread pool unavailable ({e}); running on the global pool");
            f()
        }
    }
}

struct Shared<'a> {
    basis: &'a StBasis,
    target: &'a Grid,
    bridges: &'a HashSet<BranchIdx>,
    action_targets: Vec<(BranchIdx, usize, bool)>,
    beta_filter: Option<f64>,
}

struct Timed {
    result: ContingencyResult,
    state: Duration,
    beta: Option<Duration>,
    superpose: Duration,
}

fn finished(branch: BranchIdx, grid: &Grid, status: ContingencyStatus, message: Option<String>) -> ContingencyResult {
    ContingencyResult {
        branch,
        branch_id: grid.branch(branch).id.clone(),
        status,
        flows: None,
        betas: Vec::new(),
        alpha: None,
        message,
    }
}

fn screen_one(shared: &Shared<'_>, o: BranchIdx) -> Timed {
    let basis = shared.basis;
    let grid = basis.grid();
    let done = |status, message| Timed {
        result: finished(o, grid, status, message),
        state: Duration::ZERO,
        beta: None,
        superpose: Duration::ZERO,
    };
    if o.0 >= grid.branches().len() {
        return done(ContingencyStatus::Skipped, Some("no such branch".into()));
    }
    if !shared.target.branch(o).is_connected() {
        return done(ContingencyStatus::Skipped, Some("not connected in the target topology".into()));
    }
    if shared.bridges.contains(&o) {
        return done(ContingencyStatus::Islanding, None);
    }

    let n = basis.len();
    // A contingency on a branch the action reconnects cancels that change.
    let cancelled = shared
        .action_targets
        .iter()
        .find(|(b, _, reconnect)| *b == o && *reconnect)
        .map(|(_, pos, _)| *pos);
    let selection: Vec<usize> = (0..n).filter(|&k| Some(k) != cancelled).collect();

    let t0 = Instant::now();
    let outage_state: Option<SolvedState> = if cancelled.is_some() {
        None
    } else {
        match basis.solver().outage_state(grid, basis.reference(), o) {
            Ok(s) => Some(s),
            Err(DcError::IslandingOutage { .. }) => {
                return done(
                    ContingencyStatus::Degenerate,
                    Some("outage islands the reference topology".into()),
                )
            }
            Err(e) => return done(ContingencyStatus::Degenerate, Some(e.to_string())),
        }
    };
    let state_time = t0.elapsed();

    let t1 = Instant::now();
    let outage_change = TopologyChange::Disconnect(o);
    let mut changes: Vec<&TopologyChange> = selection.iter().map(|&k| &basis.changes()[k]).collect();
    let mut states: Vec<&SolvedState> = selection.iter().map(|&k| &basis.unitary()[k]).collect();
    if let Some(s) = &outage_state {
        changes.push(&outage_change);
        states.push(s);
    }
    let solution = coefficient_system(grid, &changes, basis.reference(), &states).and_then(|s| solve_betas(&s));
    let beta_time = t1.elapsed();
    let solution = match solution {
        Ok(s) => s,
        Err(e) => {
            let mut t = done(ContingencyStatus::Degenerate, Some(e.to_string()));
            t.state = state_time;
            return t;
        }
    };

    // Report weights in action order, the outage last; a cancelled
    // reconnection gets weight zero.
    let mut betas = vec![0.0; n + 1];
    for (i, &k) in selection.iter().enumerate() {
        betas[k] = solution.betas[i];
    }
    if outage_state.is_some() {
        betas[n] = *solution.betas.last().expect("outage weight");
    }

    let mut result = ContingencyResult {
        branch: o,
        branch_id: grid.branch(o).id.clone(),
        status: ContingencyStatus::Ok,
        flows: None,
        betas,
        alpha: Some(solution.alpha),
        message: None,
    };
    if let Some(eps) = shared.beta_filter {
        if solution.betas.iter().all(|b| (b - 1.0).abs() <= eps) {
            result.status = ContingencyStatus::Independent;
            return Timed {
                result,
                state: state_time,
                beta: Some(beta_time),
                superpose: Duration::ZERO,
            };
        }
    }

    let t2 = Instant::now();
    let unitary: Vec<&[f64]> = states.iter().map(|s| s.flows()).collect();
    let mut flows = superpose_flow_vectors(basis.reference().flows(), &unitary, &solution.betas, solution.alpha);
    for (i, f) in flows.iter_mut().enumerate() {
        if !shared.target.branches()[i].is_connected() || i == o.0 {
            if !(f.abs() <= SELF_CHECK_TOLERANCE) {
                result.status = ContingencyStatus::Degenerate;
                result.message = Some(
                    StError::SelfCheckFailed {
                        branch: grid.branches()[i].id.clone(),
                        flow: *f,
                    }
                    .to_string(),
                );
                break;
            }
            *f = 0.0;
        }
    }
    if result.status == ContingencyStatus::Ok {
        result.flows = Some(flows);
    }
    Timed {
        result,
        state: state_time,
        beta: Some(beta_time),
        superpose: t2.elapsed(),
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Screens `contingencies` on the topology `grid ∘ action`.
///
/// `grid` is the reference topology. Outages that island the target are
/// reported as `Islanding` rather than failing the run; only errors of the
/// action itself (invalid change, islanding action, failing basis) abort.
pub fn run_n1(
    grid: &Grid,
    action: &[TopologyChange],
    contingencies: &[BranchIdx],
    options: &ScreeningOptions,
) -> Result<ScreeningReport, StError> {
    let start = Instant::now();
    let target = grid.apply_change_set(action)?;
    let basis = build_basis(grid, action)?;
    let basis_build = start.elapsed().as_secs_f64();
    let mut report = screen_with_basis(&basis, &target, contingencies, options);
    report.timing.basis_build = basis_build;
    report.timing.total = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Screening with a prebuilt basis; `target` must be the basis grid with
/// every basis change applied. Timing excludes the basis build.
pub fn screen_with_basis(
    basis: &StBasis,
    target: &Grid,
    contingencies: &[BranchIdx],
    options: &ScreeningOptions,
) -> ScreeningReport {
    let start = Instant::now();
    let bridges: HashSet<BranchIdx> = target.bridges().into_iter().collect();
    let action_targets = basis
        .changes()
        .iter()
        .enumerate()
        .filter_map(|(k, c)| match c {
            TopologyChange::Disconnect(b) => Some((*b, k, false)),
            TopologyChange::Reconnect(b) => Some((*b, k, true)),
            _ => None,
        })
        .collect();
    let shared = Shared {
        basis,
        target,
        bridges: &bridges,
        action_targets,
        beta_filter: options.beta_filter,
    };
    let timed: Vec<Timed> = with_pool(options.jobs, || {
        contingencies.par_iter().map(|&o| screen_one(&shared, o)).collect()
    });

    let n_branches = basis.grid().branches().len();
    let mut worst_case = vec![0.0f64; n_branches];
    let mut timing = ScreeningTiming::default();
    let mut beta_times = Vec::new();
    let mut results = Vec::with_capacity(timed.len());
    for t in timed {
        if let Some(flows) = &t.result.flows {
            for (w, f) in worst_case.iter_mut().zip(flows) {
                *w = w.max(f.abs());
            }
        }
        timing.contingency_states += t.state.as_secs_f64();
        timing.superposition += t.superpose.as_secs_f64();
        if let Some(b) = t.beta {
            timing.coefficient_systems += b.as_secs_f64();
            beta_times.push(b.as_secs_f64());
        }
        results.push(t.result);
    }
    timing.per_contingency = median(beta_times);
    timing.total = start.elapsed().as_secs_f64();
    ScreeningReport {
        case: basis.grid().name().to_string(),
        method: "ext_st".into(),
        results,
        worst_case,
        timing,
    }
}

/// Outcome of the refactorize-per-contingency baseline for one contingency.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub status: ContingencyStatus,
    pub flows: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub results: Vec<OracleResult>,
    /// Wall time including the per-contingency topology copies.
    pub seconds: f64,
}

/// Applies action and outage and solves from scratch, per contingency.
pub fn oracle_n1(
    grid: &Grid,
    action: &[TopologyChange],
    contingencies: &[BranchIdx],
    jobs: usize,
) -> Result<OracleReport, StError> {
    let start = Instant::now();
    let target = grid.apply_change_set(action)?;
    let results = with_pool(jobs, || {
        contingencies
            .par_iter()
            .map(|&o| oracle_one(&target, o))
            .collect()
    });
    Ok(OracleReport {
        results,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn oracle_one(target: &Grid, o: BranchIdx) -> OracleResult {
    let status_only = |status| OracleResult { status, flows: None };
    if o.0 >= target.branches().len() || !target.branch(o).is_connected() {
        return status_only(ContingencyStatus::Skipped);
    }
    let after = match target.apply_change_set(&[TopologyChange::Disconnect(o)]) {
        Ok(g) => g,
        Err(_) => return status_only(ContingencyStatus::Islanding),
    };
    match DcSolver::new(&after).and_then(|s| s.solve(&after)) {
        Ok(state) => OracleResult {
            status: ContingencyStatus::Ok,
            flows: Some(state.flows().to_vec()),
        },
        Err(_) => status_only(ContingencyStatus::Degenerate),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleComparison {
    /// Contingencies with flows on both sides.
    pub compared: usize,
    pub max_abs_diff: f64,
    pub mean_abs_diff: f64,
    /// Contingency ids whose statuses disagree (ignoring `Independent`).
    pub status_mismatches: Vec<String>,
    pub st_seconds: f64,
    pub oracle_seconds: f64,
}

/// Reruns the screening with the baseline and compares flows and statuses.
pub fn compare_with_oracle(
    report: &ScreeningReport,
    grid: &Grid,
    action: &[TopologyChange],
    contingencies: &[BranchIdx],
    jobs: usize,
) -> Result<OracleComparison, StError> {
    let oracle = oracle_n1(grid, action, contingencies, jobs)?;
    Ok(compare_reports(report, &oracle))
}

/// Compares an ST screening with a baseline run over the same contingencies.
pub fn compare_reports(report: &ScreeningReport, oracle: &OracleReport) -> OracleComparison {
    let mut compared = 0;
    let mut max_abs_diff = 0.0f64;
    let mut sum = 0.0;
    let mut count = 0usize;
    let mut status_mismatches = Vec::new();
    for (st, or) in report.results.iter().zip(&oracle.results) {
        if st.status != or.status && st.status != ContingencyStatus::Independent {
            status_mismatches.push(st.branch_id.clone());
        }
        if let (Some(a), Some(b)) = (&st.flows, &or.flows) {
            compared += 1;
            for (x, y) in a.iter().zip(b) {
                let d = (x - y).abs();
                max_abs_diff = max_abs_diff.max(d);
                sum += d;
                count += 1;
            }
        }
    }
    OracleComparison {
        compared,
        max_abs_diff,
        mean_abs_diff: if count > 0 { sum / count as f64 } else { 0.0 },
        status_mismatches,
        st_seconds: report.timing.total.max(f64::MIN_POSITIVE),
        oracle_seconds: oracle.seconds.max(f64::MIN_POSITIVE),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dc::solve_dc;
    use crate::grid::fixtures::triangle;
    use crate::grid::GridBuilder;

    fn ring() -> Grid {
        let mut g = GridBuilder::new("ring");
        let s: Vec<_> = (0..5).map(|i| g.substation(format!("s{i}"))).collect();
        g.line("a", s[0], s[1], 10.0);
        g.line("b", s[1], s[2], 5.0);
        g.line("c", s[2], s[3], 8.0);
        g.line("d", s[3], s[4], 6.0);
        g.line("e", s[4], s[0], 7.0);
        g.line("f", s[1], s[3], 3.0);
        g.line("p", s[4], s[0], 2.0);
        g.injection("g", s[2], 1.2);
        g.injection("l1", s[3], -0.7);
        g.injection("l2", s[4], -0.5);
        g.slack(s[0]);
        g.build().unwrap()
    }

    #[test]
    fn empty_action_is_lodf_screen() {
        let g = triangle();
        let all: Vec<_> = (0..3).map(BranchIdx).collect();
        let rep = run_n1(&g, &[], &all, &ScreeningOptions::default()).unwrap();
        let solver = DcSolver::new(&g).unwrap();
        let r = solver.solve(&g).unwrap();
        for res in &rep.results {
            let row = solver.lodf(&g, res.branch).unwrap();
            let flows = res.flows.as_ref().unwrap();
            for (l, f) in flows.iter().enumerate() {
                let expect = r.flows()[l] + row.factors[l] * r.flow(res.branch);
                assert!((f - expect).abs() < 1e-12);
            }
            assert_eq!(res.betas, vec![1.0]);
        }
    }

    #[test]
    fn statuses_and_oracle() {
        let g = ring();
        let action = [TopologyChange::Disconnect(BranchIdx(5))];
        let all: Vec<_> = (0..g.branches().len()).map(BranchIdx).collect();
        let rep = run_n1(&g, &action, &all, &ScreeningOptions::default()).unwrap();
        assert_eq!(rep.results[5].status, ContingencyStatus::Skipped);
        assert!(rep.results[5].flows.is_none());
        let cmp = compare_with_oracle(&rep, &g, &action, &all, 1).unwrap();
        assert!(cmp.status_mismatches.is_empty(), "{cmp:?}");
        assert_eq!(cmp.compared, rep.count(ContingencyStatus::Ok));
        assert!(cmp.max_abs_diff < 1e-10, "{cmp:?}");
        assert!(cmp.st_seconds > 0.0 && cmp.oracle_seconds > 0.0);
    }

    #[test]
    fn islanding_is_flagged() {
        // With "a" and "f" open, buses 1-3 hang off a chain; "e" has the parallel "p".
        let g = ring();
        let action = [
            TopologyChange::Disconnect(BranchIdx(0)),
            TopologyChange::Disconnect(BranchIdx(5)),
        ];
        let rep = run_n1(&g, &action, &[BranchIdx(1), BranchIdx(2), BranchIdx(4)], &ScreeningOptions::default()).unwrap();
        assert_eq!(rep.results[0].status, ContingencyStatus::Islanding);
        assert_eq!(rep.results[1].status, ContingencyStatus::Islanding);
        assert_eq!(rep.results[2].status, ContingencyStatus::Ok);
    }

    #[test]
    fn reconnected_branch_contingency() {
        let g = ring()
            .apply_change_set(&[TopologyChange::Disconnect(BranchIdx(5))])
            .unwrap();
        let action = [
            TopologyChange::Reconnect(BranchIdx(5)),
            TopologyChange::Disconnect(BranchIdx(2)),
        ];
        let rep = run_n1(&g, &action, &[BranchIdx(5)], &ScreeningOptions::default()).unwrap();
        let res = &rep.results[0];
        assert_eq!(res.status, ContingencyStatus::Ok);
        assert_eq!(res.betas[0], 0.0);
        let expect = solve_dc(&g.apply_change_set(&[TopologyChange::Disconnect(BranchIdx(2))]).unwrap()).unwrap();
        for (a, b) in res.flows.as_ref().unwrap().iter().zip(expect.flows()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn parallel_matches_sequential() {
        let g = ring();
        let action = [TopologyChange::Disconnect(BranchIdx(3))];
        let all: Vec<_> = (0..g.branches().len()).map(BranchIdx).collect();
        let one = run_n1(&g, &action, &all, &ScreeningOptions { jobs: 1, beta_filter: None }).unwrap();
        let many = run_n1(&g, &action, &all, &ScreeningOptions { jobs: 4, beta_filter: None }).unwrap();
        assert_eq!(one.results, many.results);
        assert_eq!(one.worst_case, many.worst_case);
    }

    #[test]
    fn filter_marks_independent() {
        let g = ring();
        let all: Vec<_> = (0..g.branches().len()).map(BranchIdx).collect();
        let rep = run_n1(&g, &[], &all, &ScreeningOptions { jobs: 1, beta_filter: Some(DEFAULT_BETA_FILTER) }).unwrap();
        // a single outage always has β = 1
        assert!(rep
            .results
            .iter()
            .all(|r| matches!(r.status, ContingencyStatus::Independent | ContingencyStatus::Islanding)));
        assert!(rep.results.iter().all(|r| r.flows.is_none()));
    }
}
