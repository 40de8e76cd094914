//! `topo` command line: solve cases, compare superposition against full
//! re-solves, report coefficients, screen contingencies and benchmark.
//!
//! Exit codes: 0 success, 1 unreadable or malformed input, 2 topology or
//! singular-system failure, 3 tolerance breach.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::case_io::{self, fmt_sig12, read_case, ResultTable, Scenario, ScenarioDocument, TimingRow};
use crate::dc::{solve_dc, DcSolver};
use crate::error::{CaseError, DcError, GridError, StError};
use crate::grid::{Grid, TopologyChange};
use crate::sampling::{random_change_set, ChangeKind};
use crate::security::{compare_reports, oracle_n1, run_n1, ContingencyStatus, ScreeningOptions, ScreeningReport};
use crate::superposition::{
    build_basis, coefficient_system, enforce_disconnected_zero, solve_betas, superpose_flow_vectors, StBasis,
};

/// Default bound on |ST flow − full-resolve flow|, per-unit.
pub const DEFAULT_TOLERANCE: f64 = 1e-4;
/// `|β − 1|` at or below which a change is reported independent.
pub const INDEPENDENCE_THRESHOLD: f64 = 0.05;
const MIN_REPS: usize = 5;

#[derive(Debug, Parser)]
#[command(name = "topo", version, about = "DC power flow under topology changes by superposition")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// MATPOWER case file (repeatable for bench)
    #[arg(long = "case", global = true)]
    pub cases: Vec<PathBuf>,
    /// Scenario JSON file
    #[arg(long, global = true)]
    pub scenario: Option<PathBuf>,
    /// Output CSV path; companion files are written next to it
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Tolerance on |ST − oracle| in per-unit
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Worker threads for contingency screening
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// Seed for randomly drawn actions
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Timed repetitions (at least 5) after one warm-up run
    #[arg(long, global = true, default_value_t = MIN_REPS)]
    pub reps: usize,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Full DC solve of the case (with the scenario's changes, if any)
    Solve,
    /// Superposition versus full re-solve for the scenario's change set
    Apply,
    /// Coefficients of each change and their independence flags
    Betas,
    /// N-1 screening after the scenario's action
    N1 {
        /// Mark contingencies with every |β − 1| ≤ EPS independent
        #[arg(long, value_name = "EPS", num_args = 0..=1, default_missing_value = "0.001")]
        beta_filter: Option<f64>,
        /// Skip the refactorize-per-contingency comparison
        #[arg(long)]
        no_oracle: bool,
    },
    /// N-1 timing of superposition versus refactorization across cases
    Bench,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Case(#[from] CaseError),
    #[error("{0}")]
    Topology(String),
    #[error("max |ST − oracle| = {max:.3e} exceeds tolerance {tol:.1e}")]
    Tolerance { max: f64, tol: f64 },
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) | CliError::Case(_) | CliError::Io { .. } => 1,
            CliError::Topology(_) => 2,
            CliError::Tolerance { .. } => 3,
        }
    }
}

impl From<GridError> for CliError {
    fn from(e: GridError) -> Self {
        CliError::Topology(e.to_string())
    }
}

impl From<DcError> for CliError {
    fn from(e: DcError) -> Self {
        CliError::Topology(e.to_string())
    }
}

impl From<StError> for CliError {
    fn from(e: StError) -> Self {
        CliError::Topology(e.to_string())
    }
}

/// Resolved inputs shared by the subcommands.
#[derive(Debug, Clone)]
pub struct CliConfig {
    pub command: Command,
    pub cases: Vec<PathBuf>,
    pub scenario: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub tolerance: Option<f64>,
    pub jobs: usize,
    pub seed: u64,
    pub reps: usize,
}

impl CliConfig {
    pub fn from_cli(cli: Cli) -> Result<Self, CliError> {
        let c = cli.common;
        if let Some(t) = c.tol {
            if !(t.is_finite() && t > 0.0) {
                return Err(CliError::Input(format!("--tol {t} is not positive")));
            }
        }
        if let Command::N1 {
            beta_filter: Some(eps),
            ..
        } = cli.command
        {
            if !(eps.is_finite() && eps >= 0.0) {
                return Err(CliError::Input(format!("--beta-filter {eps} is negative")));
            }
        }
        for p in c.cases.iter().chain(&c.scenario) {
            if !p.exists() {
                return Err(CliError::Input(format!("{} does not exist", p.display())));
            }
        }
        Ok(Self {
            command: cli.command,
            cases: c.cases,
            scenario: c.scenario,
            out: c.out,
            tolerance: c.tol,
            jobs: c.jobs,
            seed: c.seed,
            reps: c.reps.max(MIN_REPS),
        })
    }

    fn tolerance_for(&self, scenario: Option<&Scenario>) -> f64 {
        self.tolerance
            .or(scenario.and_then(|s| s.tolerance))
            .unwrap_or(DEFAULT_TOLERANCE)
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match CliConfig::from_cli(cli).and_then(|cfg| run(&cfg)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cfg: &CliConfig) -> Result<(), CliError> {
    match &cfg.command {
        Command::Solve => cmd_solve(cfg),
        Command::Apply => cmd_apply(cfg).map(|_| ()),
        Command::Betas => cmd_betas(cfg).map(|_| ()),
        Command::N1 { beta_filter, no_oracle } => cmd_n1(cfg, *beta_filter, !*no_oracle).map(|_| ()),
        Command::Bench => cmd_bench(cfg).map(|_| ()),
    }
}

// ---------------------------------------------------------------------------
// input and output helpers

fn read_to_string(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        context: format!("reading {}", path.display()),
        source,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
            context: format!("creating {}", dir.display()),
            source,
        })?;
    }
    File::create(path).map(BufWriter::new).map_err(|source| CliError::Io {
        context: format!("writing {}", path.display()),
        source,
    })
}

fn io_err(path: Option<&Path>) -> impl Fn(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        context: match path {
            Some(p) => format!("writing {}", p.display()),
            None => "writing stdout".into(),
        },
        source,
    }
}

/// Writes through `f` to `path`, or to stdout when there is none.
fn emit(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<(), CliError> {
    match path {
        Some(p) => {
            let mut w = create(p)?;
            f(&mut w).and_then(|_| w.flush()).map_err(io_err(Some(p)))
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock).map_err(io_err(None))
        }
    }
}

/// `dir/stem.csv` → `dir/stem_<suffix>.csv`.
pub fn companion(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    path.with_file_name(format!("{stem}_{suffix}.csv"))
}

/// Case grid and resolved scenario. The case comes from `--case` or, failing
/// that, from the scenario's `case` field relative to the scenario file.
fn load_inputs(cfg: &CliConfig) -> Result<(Grid, Option<Scenario>), CliError> {
    let doc = match &cfg.scenario {
        Some(p) => Some((p, ScenarioDocument::from_json(&read_to_string(p)?)?)),
        None => None,
    };
    let case_path = match (cfg.cases.first(), &doc) {
        (Some(c), _) => c.clone(),
        (None, Some((p, d))) => match &d.case {
            Some(c) => p.parent().unwrap_or(Path::new(".")).join(c),
            None => return Err(CliError::Input("no --case given and the scenario names no case".into())),
        },
        (None, None) => return Err(CliError::Input("--case is required".into())),
    };
    let grid = read_case(&case_path)?;
    let scenario = doc.map(|(_, d)| d.resolve(&grid)).transpose()?;
    Ok((grid, scenario))
}

/// Reference topology and change set. Without a scenario the action is two
/// random disconnections drawn from `--seed`.
fn reference_and_changes(cfg: &CliConfig, grid: &Grid, scenario: Option<&Scenario>) -> Result<(Grid, Vec<TopologyChange>), CliError> {
    match scenario {
        Some(s) => Ok((s.reference_grid(grid)?, s.changes.clone())),
        None => Ok((grid.clone(), seeded_action(grid, cfg.seed)?)),
    }
}

/// Two disconnections drawn from `seed` that keep the grid connected.
pub fn seeded_action(grid: &Grid, seed: u64) -> Result<Vec<TopologyChange>, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_change_set(grid, 2, &[ChangeKind::Disconnect], &mut rng, 1000)
        .ok_or_else(|| CliError::Topology("no non-islanding pair of disconnections found".into()))
}

/// Median wall time of `reps` runs after one warm-up; returns the last result.
pub fn median_time<T>(reps: usize, mut f: impl FnMut() -> T) -> (T, f64) {
    let mut out = f();
    let mut times = Vec::with_capacity(reps);
    for _ in 0..reps.max(1) {
        let t = Instant::now();
        out = f();
        times.push(t.elapsed().as_secs_f64());
    }
    times.sort_by(f64::total_cmp);
    let m = times.len() / 2;
    let median = if times.len() % 2 == 1 {
        times[m]
    } else {
        0.5 * (times[m - 1] + times[m])
    };
    (out, median.max(f64::MIN_POSITIVE))
}

fn timing(case: &str, method: &str, seconds: f64) -> TimingRow {
    TimingRow {
        case: case.to_string(),
        method: method.to_string(),
        seconds,
    }
}

// ---------------------------------------------------------------------------
// subcommands

pub fn cmd_solve(cfg: &CliConfig) -> Result<(), CliError> {
    let (grid, scenario) = load_inputs(cfg)?;
    let target = match &scenario {
        Some(s) => s.reference_grid(&grid)?.apply_change_set(&s.changes)?,
        None => grid.clone(),
    };
    let state = solve_dc(&target)?;
    let mut table = ResultTable::default();
    table.push_comparison(grid.name(), &grid, state.flows(), state.flows());
    table.flows.retain(|r| r.method == case_io::Method::Oracle);
    emit(cfg.out.as_deref(), |w| table.write_flows(w))
}

/// Summary of one `apply` run.
#[derive(Debug, Clone, PartialEq)]
pub struct ApplySummary {
    pub max_abs_diff: f64,
    pub betas: Vec<f64>,
    pub alpha: f64,
    /// Coefficients plus superposition, unitary states precomputed.
    pub st_seconds: f64,
    /// Reference and unitary full solves.
    pub basis_seconds: f64,
    /// Apply the change set, factorize and solve.
    pub oracle_seconds: f64,
    pub speedup: f64,
}

pub fn cmd_apply(cfg: &CliConfig) -> Result<ApplySummary, CliError> {
    let (grid, scenario) = load_inputs(cfg)?;
    let tol = cfg.tolerance_for(scenario.as_ref());
    let (reference, changes) = reference_and_changes(cfg, &grid, scenario.as_ref())?;
    let target = reference.apply_change_set(&changes)?;

    let (basis, basis_seconds) = median_time(cfg.reps, || build_basis(&reference, &changes));
    let basis = basis?;
    let (st, st_seconds) = median_time(cfg.reps, || superpose_all(&basis, &target));
    let (flows, betas, alpha) = st?;
    let (oracle, oracle_seconds) = median_time(cfg.reps, || {
        reference
            .apply_change_set(&changes)
            .map_err(DcError::from)
            .and_then(|g| DcSolver::new(&g).and_then(|s| s.solve(&g)))
    });
    let oracle = oracle?;

    let mut table = ResultTable::default();
    table.push_comparison(grid.name(), &target, &flows, oracle.flows());
    let name = grid.name();
    table.timings = vec![
        timing(name, "ext_st", st_seconds),
        timing(name, "ext_st_basis", basis_seconds),
        timing(name, "oracle", oracle_seconds),
    ];
    emit(cfg.out.as_deref(), |w| table.write_flows(w))?;
    let summary = ApplySummary {
        max_abs_diff: table.max_abs_diff(),
        betas,
        alpha,
        st_seconds,
        basis_seconds,
        oracle_seconds,
        speedup: oracle_seconds / st_seconds,
    };
    match &cfg.out {
        Some(p) => emit(Some(&companion(p, "timing")), |w| table.write_timings(w))?,
        None => {
            eprintln!(
                "ext_st {}s, basis {}s, oracle {}s, speedup {:.2}",
                fmt_sig12(st_seconds),
                fmt_sig12(basis_seconds),
                fmt_sig12(oracle_seconds),
                summary.speedup
            );
        }
    }
    eprintln!(
        "{} changes, max |ST − oracle| = {:.3e}, speedup {:.2}",
        changes.len(),
        summary.max_abs_diff,
        summary.speedup
    );
    if !(summary.max_abs_diff <= tol) {
        return Err(CliError::Tolerance {
            max: summary.max_abs_diff,
            tol,
        });
    }
    Ok(summary)
}

/// Coefficients and target flows for every change of the basis.
fn superpose_all(basis: &StBasis, target: &Grid) -> Result<(Vec<f64>, Vec<f64>, f64), StError> {
    let changes: Vec<&TopologyChange> = basis.changes().iter().collect();
    let states: Vec<_> = basis.unitary().iter().collect();
    let sol = solve_betas(&coefficient_system(basis.grid(), &changes, basis.reference(), &states)?)?;
    let unitary: Vec<&[f64]> = states.iter().map(|s| s.flows()).collect();
    let mut flows = superpose_flow_vectors(basis.reference().flows(), &unitary, &sol.betas, sol.alpha);
    enforce_disconnected_zero(target, &mut flows)?;
    Ok((flows, sol.betas, sol.alpha))
}

/// Coefficient report of one change.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaLine {
    pub kind: &'static str,
    pub target: String,
    pub beta: f64,
    pub independent: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BetaReport {
    pub lines: Vec<BetaLine>,
    pub alpha: f64,
    /// Pairs whose two-change system has a weight farther than the
    /// threshold from one.
    pub interacting: Vec<(usize, usize)>,
}

pub fn change_target_id(grid: &Grid, change: &TopologyChange) -> String {
    match change {
        TopologyChange::Disconnect(b) | TopologyChange::Reconnect(b) => grid.branch(*b).id.clone(),
        TopologyChange::Split(s, _) | TopologyChange::Merge(s) => grid.substation(*s).id.clone(),
    }
}

/// Weights of a change set with independence flags.
pub fn beta_report(basis: &StBasis) -> Result<BetaReport, StError> {
    let all: Vec<usize> = (0..basis.len()).collect();
    let sol = solve_betas(&basis.coefficient_matrix_for(&all)?)?;
    let lines = basis
        .changes()
        .iter()
        .zip(&sol.betas)
        .map(|(c, &beta)| BetaLine {
            kind: c.kind_name(),
            target: change_target_id(basis.grid(), c),
            beta,
            independent: (beta - 1.0).abs() <= INDEPENDENCE_THRESHOLD,
        })
        .collect();
    let mut interacting = Vec::new();
    for i in 0..basis.len() {
        for j in i + 1..basis.len() {
            let pair = solve_betas(&basis.coefficient_matrix_for(&[i, j])?)?;
            if pair.betas.iter().any(|b| (b - 1.0).abs() > INDEPENDENCE_THRESHOLD) {
                interacting.push((i, j));
            }
        }
    }
    Ok(BetaReport {
        lines,
        alpha: sol.alpha,
        interacting,
    })
}

pub fn cmd_betas(cfg: &CliConfig) -> Result<BetaReport, CliError> {
    let (grid, scenario) = load_inputs(cfg)?;
    let (reference, changes) = reference_and_changes(cfg, &grid, scenario.as_ref())?;
    reference.apply_change_set(&changes)?;
    let basis = build_basis(&reference, &changes)?;
    let report = beta_report(&basis)?;
    emit(cfg.out.as_deref(), |w| {
        writeln!(w, "index,kind,target,beta,independent")?;
        for (i, l) in report.lines.iter().enumerate() {
            writeln!(w, "{i},{},{},{},{}", l.kind, case_io::csv_field(&l.target), fmt_sig12(l.beta), l.independent)?;
        }
        writeln!(w, ",alpha,,{},", fmt_sig12(report.alpha))
    })?;
    for (i, j) in &report.interacting {
        eprintln!(
            "interacting: {} {} / {} {}",
            report.lines[*i].kind, report.lines[*i].target, report.lines[*j].kind, report.lines[*j].target
        );
    }
    Ok(report)
}

/// Outcome of `n1`.
#[derive(Debug, Clone)]
pub struct N1Summary {
    pub report: ScreeningReport,
    pub max_abs_diff: Option<f64>,
    pub oracle_seconds: Option<f64>,
}

pub fn write_screening_csv(report: &ScreeningReport, grid: &Grid, w: &mut dyn Write) -> io::Result<()> {
    writeln!(w, "case,contingency,status,branch,flow")?;
    let case = case_io::csv_field(&report.case);
    for r in &report.results {
        let id = case_io::csv_field(&r.branch_id);
        match &r.flows {
            Some(flows) => {
                for (br, f) in grid.branches().iter().zip(flows) {
                    writeln!(w, "{case},{id},{},{},{}", r.status.label(), case_io::csv_field(&br.id), fmt_sig12(*f))?;
                }
            }
            None => writeln!(w, "{case},{id},{},,", r.status.label())?,
        }
    }
    Ok(())
}

pub fn cmd_n1(cfg: &CliConfig, beta_filter: Option<f64>, with_oracle: bool) -> Result<N1Summary, CliError> {
    let (grid, scenario) = load_inputs(cfg)?;
    let tol = cfg.tolerance_for(scenario.as_ref());
    let (reference, action) = reference_and_changes(cfg, &grid, scenario.as_ref())?;
    let target = reference.apply_change_set(&action)?;
    let contingencies = match scenario.as_ref().map(|s| &s.contingencies) {
        Some(case_io::Contingencies::List(l)) if !l.is_empty() => l.clone(),
        _ => case_io::Contingencies::All.resolve(&target),
    };
    let options = ScreeningOptions {
        jobs: cfg.jobs,
        beta_filter,
    };
    let report = run_n1(&reference, &action, &contingencies, &options)?;
    emit(cfg.out.as_deref(), |w| write_screening_csv(&report, &grid, w))?;

    let name = grid.name();
    let t = &report.timing;
    let mut timings = vec![
        timing(name, "ext_st_basis", t.basis_build),
        timing(name, "ext_st_per_contingency", t.per_contingency),
        timing(name, "ext_st_contingency_states", t.contingency_states),
        timing(name, "ext_st_coefficients", t.coefficient_systems),
        timing(name, "ext_st_superposition", t.superposition),
        timing(name, "ext_st", t.total),
    ];
    let mut summary = N1Summary {
        report,
        max_abs_diff: None,
        oracle_seconds: None,
    };
    if with_oracle {
        let oracle = oracle_n1(&reference, &action, &contingencies, cfg.jobs)?;
        let cmp = compare_reports(&summary.report, &oracle);
        timings.push(timing(name, "oracle", oracle.seconds));
        eprintln!(
            "{} contingencies ({} ok), max |ST − oracle| = {:.3e}, status mismatches {}",
            contingencies.len(),
            summary.report.count(ContingencyStatus::Ok),
            cmp.max_abs_diff,
            cmp.status_mismatches.len()
        );
        summary.max_abs_diff = Some(cmp.max_abs_diff);
        summary.oracle_seconds = Some(oracle.seconds);
        if !cmp.status_mismatches.is_empty() {
            return Err(CliError::Tolerance {
                max: f64::INFINITY,
                tol,
            });
        }
    }
    if let Some(p) = &cfg.out {
        emit(Some(&companion(p, "timing")), |w| case_io::write_timing_csv(&timings, w))?;
    }
    if let Some(d) = summary.max_abs_diff {
        if !(d <= tol) {
            return Err(CliError::Tolerance { max: d, tol });
        }
    }
    Ok(summary)
}

/// Timing of one bench case.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub case: String,
    pub buses: usize,
    pub branches: usize,
    pub contingencies: usize,
    pub st_seconds: f64,
    pub oracle_seconds: f64,
    /// Median coefficient-system time per contingency.
    pub st_per_contingency: f64,
    pub oracle_per_contingency: f64,
    pub max_abs_diff: f64,
}

/// Full N-1 after a seeded two-disconnection action, superposition versus
/// refactorization, for one grid.
pub fn bench_case(grid: &Grid, seed: u64, jobs: usize, reps: usize) -> Result<BenchRow, CliError> {
    let action = seeded_action(grid, seed)?;
    let target = grid.apply_change_set(&action)?;
    let contingencies = case_io::Contingencies::All.resolve(&target);
    let options = ScreeningOptions { jobs, beta_filter: None };
    let (st, st_seconds) = median_time(reps, || run_n1(grid, &action, &contingencies, &options));
    let st = st?;
    let (oracle, oracle_seconds) = median_time(reps, || oracle_n1(grid, &action, &contingencies, jobs));
    let oracle = oracle?;
    let cmp = compare_reports(&st, &oracle);
    let n = contingencies.len().max(1) as f64;
    Ok(BenchRow {
        case: grid.name().to_string(),
        buses: grid.substations().len(),
        branches: grid.branches().len(),
        contingencies: contingencies.len(),
        st_seconds,
        oracle_seconds,
        st_per_contingency: st.timing.per_contingency,
        oracle_per_contingency: oracle_seconds / n,
        max_abs_diff: cmp.max_abs_diff,
    })
}

pub fn cmd_bench(cfg: &CliConfig) -> Result<Vec<BenchRow>, CliError> {
    if cfg.cases.is_empty() {
        return Err(CliError::Input("bench needs at least one --case".into()));
    }
    let mut rows = Vec::with_capacity(cfg.cases.len());
    for path in &cfg.cases {
        let grid = read_case(path)?;
        let row = bench_case(&grid, cfg.seed, cfg.jobs, cfg.reps)?;
        eprintln!(
            "{}: {} buses, {} contingencies, ext_st {:.3e}s, oracle {:.3e}s, max diff {:.1e}",
            row.case, row.buses, row.contingencies, row.st_seconds, row.oracle_seconds, row.max_abs_diff
        );
        rows.push(row);
    }
    rows.sort_by_key(|r| r.buses);
    let timings: Vec<TimingRow> = rows
        .iter()
        .flat_map(|r| [timing(&r.case, "ext_st", r.st_seconds), timing(&r.case, "oracle", r.oracle_seconds)])
        .collect();
    emit(cfg.out.as_deref(), |w| case_io::write_timing_csv(&timings, w))?;
    if let Some(p) = &cfg.out {
        emit(Some(&companion(p, "plot")), |w| {
            writeln!(w, "case,buses,method,seconds")?;
            for r in &rows {
                for (method, s) in [
                    ("ext_st", r.st_seconds),
                    ("oracle", r.oracle_seconds),
                    ("ext_st_per_contingency", r.st_per_contingency),
                    ("oracle_per_contingency", r.oracle_per_contingency),
                ] {
                    writeln!(w, "{},{},{method},{}", case_io::csv_field(&r.case), r.buses, fmt_sig12(s))?;
                }
            }
            Ok(())
        })?;
    }
    Ok(rows)
}
