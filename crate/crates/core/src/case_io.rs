//! MATPOWER case files, scenario JSON and CSV result tables.
//!
//! Only the fields the DC approximation needs are read: `baseMVA`, bus
//! number/type/Pd, generator bus/Pg/status and branch from/to/x/status.
//! Everything else is ignored.
//!
//! Element ids follow the MATPOWER bus numbers: substation `sub_<bus>`,
//! branch `l_<from>_<to>` (parallel circuits get `_2`, `_3`, ...), load
//! `load_<bus>` and generator `gen_<bus>` (again with `_2`, ... suffixes).

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CaseError, GridError};
use crate::grid::{
    BranchIdx, BranchStatus, BusbarAssignment, Grid, GridBuilder, Side, SubIdx, Terminal, TopologyChange,
};

/// Version accepted in the scenario `version` field.
pub const SCENARIO_VERSION: u32 = 1;

struct Table {
    /// Line (1-based) of the `mpc.<name> = [` header.
    line: usize,
    rows: Vec<(usize, Vec<f64>)>,
}

fn strip_comment(line: &str) -> &str {
    match line.find('%') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn parse_number(tok: &str, line: usize) -> Result<f64, CaseError> {
    let v: f64 = tok.parse().map_err(|_| CaseError::Parse {
        line,
        message: format!("expected a number, found {tok:?}"),
    })?;
    Ok(v)
}

/// Scalar fields by name: (line, raw value).
type Scalars = HashMap<String, (usize, String)>;

/// Splits the text into `mpc.<name> = [ ... ];` matrices and scalar fields.
fn scan(text: &str) -> Result<(HashMap<String, Table>, Scalars), CaseError> {
    let mut tables = HashMap::new();
    let mut scalars = HashMap::new();
    let mut open: Option<(String, Table)> = None;
    let mut pending: Vec<f64> = Vec::new();
    let mut pending_line = 0;

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        if let Some((_, table)) = open.as_mut() {
            let (body, closes) = match line.find(']') {
                Some(p) => (&line[..p], true),
                None => (line, false),
            };
            for chunk in body.split_inclusive(';') {
                let ends_row = chunk.ends_with(';');
                for tok in chunk.trim_end_matches(';').split(|c: char| c.is_whitespace() || c == ',') {
                    if tok.is_empty() {
                        continue;
                    }
                    if pending.is_empty() {
                        pending_line = lineno;
                    }
                    pending.push(parse_number(tok, lineno)?);
                }
                if ends_row && !pending.is_empty() {
                    table.rows.push((pending_line, std::mem::take(&mut pending)));
                }
            }
            // A row may also end at the line break without a semicolon.
            if !pending.is_empty() {
                table.rows.push((pending_line, std::mem::take(&mut pending)));
            }
            if closes {
                let (name, table) = open.take().expect("open table");
                tables.insert(name, table);
            }
            continue;
        }
        let Some(rest) = line.strip_prefix("mpc.") else {
            continue;
        };
        let Some((name, value)) = rest.split_once('=') else {
            continue;
        };
        let name = name.trim().to_string();
        let value = value.trim();
        if let Some(after) = value.strip_prefix('[') {
            let mut table = Table {
                line: lineno,
                rows: Vec::new(),
            };
            // Single-line matrices: `mpc.x = [1 2 3];`
            if let Some(p) = after.find(']') {
                for row in after[..p].split(';') {
                    let vals = row
                        .split(|c: char| c.is_whitespace() || c == ',')
                        .filter(|t| !t.is_empty())
                        .map(|t| parse_number(t, lineno))
                        .collect::<Result<Vec<_>, _>>()?;
                    if !vals.is_empty() {
                        table.rows.push((lineno, vals));
                    }
                }
                tables.insert(name, table);
            } else {
                if !after.trim().is_empty() {
                    return Err(CaseError::Parse {
                        line: lineno,
                        message: "matrix rows must start on the line after '['".into(),
                    });
                }
                open = Some((name, table));
            }
        } else {
            scalars.insert(name, (lineno, value.trim_end_matches(';').trim().to_string()));
        }
    }
    if let Some((name, table)) = open {
        return Err(CaseError::Parse {
            line: table.line,
            message: format!("matrix mpc.{name} is never closed"),
        });
    }
    Ok((tables, scalars))
}

fn require<'a>(tables: &'a HashMap<String, Table>, name: &str) -> Result<&'a Table, CaseError> {
    tables.get(name).ok_or_else(|| CaseError::Parse {
        line: 0,
        message: format!("missing mpc.{name} table"),
    })
}

/// Checks the row width and that the columns the DC model reads are finite.
/// Other columns may hold `Inf` (MATPOWER's unbounded limits).
fn check_row(row: &(usize, Vec<f64>), used: &[usize], what: &str) -> Result<(), CaseError> {
    let min = used.iter().max().map_or(0, |m| m + 1);
    if row.1.len() < min {
        return Err(CaseError::Parse {
            line: row.0,
            message: format!("{what} row has {} columns, expected at least {min}", row.1.len()),
        });
    }
    if let Some(&c) = used.iter().find(|&&c| !row.1[c].is_finite()) {
        return Err(CaseError::Parse {
            line: row.0,
            message: format!("{what} column {} is not finite", c + 1),
        });
    }
    Ok(())
}

fn bus_number(v: f64, line: usize) -> Result<i64, CaseError> {
    if v.fract() != 0.0 {
        return Err(CaseError::Parse {
            line,
            message: format!("bus number {v} is not an integer"),
        });
    }
    Ok(v as i64)
}

/// Parses a MATPOWER case into a per-unit [`Grid`] named `name`.
pub fn parse_matpower(text: &str, name: &str) -> Result<Grid, CaseError> {
    let (tables, scalars) = scan(text)?;
    let base_mva = match scalars.get("baseMVA") {
        Some((line, v)) => {
            let b = parse_number(v, *line)?;
            if !(b.is_finite() && b > 0.0) {
                return Err(CaseError::Parse {
                    line: *line,
                    message: format!("baseMVA {b} is not positive"),
                });
            }
            b
        }
        None => {
            return Err(CaseError::Parse {
                line: 0,
                message: "missing mpc.baseMVA".into(),
            })
        }
    };

    let bus = require(&tables, "bus")?;
    let gen = require(&tables, "gen")?;
    let branch = require(&tables, "branch")?;

    let mut gb = GridBuilder::new(name);
    gb.base_mva(base_mva);
    let mut sub_of_bus: HashMap<i64, SubIdx> = HashMap::new();
    let mut slack_line: Option<usize> = None;
    let mut loads = Vec::new();
    for row in &bus.rows {
        check_row(row, &[0, 1, 2], "bus")?;
        let (line, v) = row;
        let n = bus_number(v[0], *line)?;
        let sub = gb.substation(format!("sub_{n}"));
        if sub_of_bus.insert(n, sub).is_some() {
            return Err(CaseError::Parse {
                line: *line,
                message: format!("duplicate bus number {n}"),
            });
        }
        match v[1] as i64 {
            1 | 2 => {}
            3 => {
                if let Some(first) = slack_line {
                    return Err(CaseError::Parse {
                        line: *line,
                        message: format!("second reference (type 3) bus; the first is on line {first}"),
                    });
                }
                slack_line = Some(*line);
                gb.slack(sub);
            }
            4 => {
                return Err(CaseError::UnsupportedFeature(format!(
                    "bus {n} is isolated (type 4); the grid must be a single island"
                )))
            }
            t => {
                return Err(CaseError::Parse {
                    line: *line,
                    message: format!("unknown bus type {t}"),
                })
            }
        }
        if v[2] != 0.0 {
            loads.push((n, sub, -v[2] / base_mva));
        }
    }
    if slack_line.is_none() {
        return Err(CaseError::Parse {
            line: bus.line,
            message: "no reference (type 3) bus".into(),
        });
    }
    for (n, sub, p) in loads {
        gb.injection(format!("load_{n}"), sub, p);
    }

    let lookup = |n: i64, line: usize| {
        sub_of_bus.get(&n).copied().ok_or_else(|| CaseError::Parse {
            line,
            message: format!("unknown bus {n}"),
        })
    };

    let mut gen_count: HashMap<i64, usize> = HashMap::new();
    let mut skipped_gens = 0;
    for row in &gen.rows {
        check_row(row, &[0, 1, 7], "gen")?;
        let (line, v) = row;
        let n = bus_number(v[0], *line)?;
        let sub = lookup(n, *line)?;
        if v[7] <= 0.0 {
            skipped_gens += 1;
            continue;
        }
        let k = gen_count.entry(n).or_insert(0);
        *k += 1;
        let id = if *k == 1 { format!("gen_{n}") } else { format!("gen_{n}_{k}") };
        gb.injection(id, sub, v[1] / base_mva);
    }
    if skipped_gens > 0 {
        log::info!("{name}: {skipped_gens} out-of-service generators skipped");
    }

    let mut branch_count: HashMap<(i64, i64), usize> = HashMap::new();
    let mut ignored_taps = 0;
    for row in &branch.rows {
        check_row(row, &[0, 1, 3, 8, 9, 10], "branch")?;
        let (line, v) = row;
        let (f, t) = (bus_number(v[0], *line)?, bus_number(v[1], *line)?);
        let (fs, ts) = (lookup(f, *line)?, lookup(t, *line)?);
        let x = v[3];
        if x == 0.0 {
            return Err(CaseError::Parse {
                line: *line,
                message: format!("branch {f}-{t} has zero reactance"),
            });
        }
        if (v[8] != 0.0 && v[8] != 1.0) || v[9] != 0.0 {
            ignored_taps += 1;
        }
        let k = branch_count.entry((f, t)).or_insert(0);
        *k += 1;
        let id = if *k == 1 { format!("l_{f}_{t}") } else { format!("l_{f}_{t}_{k}") };
        let status = if v[10] > 0.0 {
            BranchStatus::Connected
        } else {
            BranchStatus::Disconnected
        };
        gb.branch(id, fs, ts, 1.0 / x, status);
    }
    if ignored_taps > 0 {
        log::warn!("{name}: tap ratio and phase shift ignored on {ignored_taps} branches");
    }
    log::debug!("{name}: AC fields (resistance, charging, voltage, reactive power) ignored");

    gb.build().map_err(|e| match e {
        GridError::GridDisconnected { components } => CaseError::UnsupportedFeature(format!(
            "case has {components} islands; only single-island grids are supported"
        )),
        other => CaseError::Grid(other),
    })
}

/// Reads and parses a case file; the grid is named after the file stem.
pub fn read_case(path: &Path) -> Result<Grid, CaseError> {
    let text = std::fs::read_to_string(path)?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("case");
    parse_matpower(&text, name)
}

fn fmt_f64(v: f64) -> String {
    // Shortest representation that parses back to the same value.
    format!("{v:?}")
}

/// Writes `grid` as a MATPOWER case with the DC fields filled in and the
/// remaining columns set to neutral values.
///
/// Split substations cannot be expressed in the format and are rejected.
/// Substations named `sub_<n>` keep bus number `n`; otherwise buses are
/// numbered from 1 in substation order.
pub fn write_matpower(grid: &Grid) -> Result<String, CaseError> {
    if let Some(s) = grid.substations().iter().find(|s| s.is_split()) {
        return Err(CaseError::UnsupportedFeature(format!(
            "substation {} is split; MATPOWER cases have one node per bus",
            s.id
        )));
    }
    let parsed: Option<Vec<i64>> = grid
        .substations()
        .iter()
        .map(|s| s.id.strip_prefix("sub_").and_then(|n| n.parse().ok()))
        .collect();
    let numbers = match parsed {
        Some(ns) if ns.iter().collect::<std::collections::HashSet<_>>().len() == ns.len() => ns,
        _ => (1..=grid.substations().len() as i64).collect(),
    };
    let base = grid.base_mva();
    let mut pd = vec![0.0; grid.substations().len()];
    let mut gens = Vec::new();
    for inj in grid.injections() {
        let is_load = inj.id.starts_with("load_") || (!inj.id.starts_with("gen_") && inj.p < 0.0);
        if is_load {
            pd[inj.sub.0] -= inj.p * base;
        } else {
            gens.push((numbers[inj.sub.0], inj.p * base));
        }
    }

    let mut out = String::new();
    let _ = writeln!(out, "function mpc = {}", grid.name());
    let _ = writeln!(out, "mpc.version = '2';");
    let _ = writeln!(out, "mpc.baseMVA = {};", fmt_f64(base));
    let _ = writeln!(out, "%\tbus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\tzone\tVmax\tVmin");
    let _ = writeln!(out, "mpc.bus = [");
    for (i, n) in numbers.iter().enumerate() {
        let ty = if SubIdx(i) == grid.slack() { 3 } else { 1 };
        let _ = writeln!(out, "\t{n}\t{ty}\t{}\t0\t0\t0\t1\t1\t0\t0\t1\t1.1\t0.9;", fmt_f64(pd[i]));
    }
    let _ = writeln!(out, "];");
    let _ = writeln!(out, "%\tbus\tPg\tQg\tQmax\tQmin\tVg\tmBase\tstatus\tPmax\tPmin");
    let _ = writeln!(out, "mpc.gen = [");
    for (n, pg) in gens {
        let _ = writeln!(out, "\t{n}\t{}\t0\t0\t0\t1\t{}\t1\t0\t0;", fmt_f64(pg), fmt_f64(base));
    }
    let _ = writeln!(out, "];");
    let _ = writeln!(out, "%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus\tangmin\tangmax");
    let _ = writeln!(out, "mpc.branch = [");
    for br in grid.branches() {
        let status = u8::from(br.is_connected());
        let _ = writeln!(
            out,
            "\t{}\t{}\t0\t{}\t0\t0\t0\t0\t0\t0\t{status}\t-360\t360;",
            numbers[br.from.0],
            numbers[br.to.0],
            fmt_f64(1.0 / br.susceptance)
        );
    }
    let _ = writeln!(out, "];");
    Ok(out)
}

// ---------------------------------------------------------------------------
// Scenario files

/// A busbar-two terminal in a split record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "lowercase")]
pub enum TerminalRecord {
    Branch(String),
    Injection(String),
}

/// One change as written in a scenario file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ChangeRecord {
    Disconnect { branch: String },
    Reconnect { branch: String },
    Split { substation: String, busbar_two: Vec<TerminalRecord> },
    Merge { substation: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ContingencyRecord {
    /// The literal string `"all"`: every branch connected in the target topology.
    Keyword(String),
    List(Vec<String>),
}

impl Default for ContingencyRecord {
    fn default() -> Self {
        ContingencyRecord::List(Vec::new())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionsRecord {
    /// Acceptance bound on |ST flow − full-resolve flow|, per-unit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

/// Scenario document before id resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDocument {
    pub version: u32,
    /// Case file path, relative to the scenario file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case: Option<PathBuf>,
    /// Changes applied to the case to obtain the reference topology.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reference: Vec<ChangeRecord>,
    #[serde(default)]
    pub changes: Vec<ChangeRecord>,
    #[serde(default)]
    pub contingencies: ContingencyRecord,
    #[serde(default)]
    pub options: OptionsRecord,
}

impl ScenarioDocument {
    pub fn from_json(text: &str) -> Result<Self, CaseError> {
        let doc: ScenarioDocument =
            serde_json::from_str(text).map_err(|e| CaseError::Schema(e.to_string()))?;
        if doc.version != SCENARIO_VERSION {
            return Err(CaseError::Schema(format!(
                "unsupported version {} (expected {SCENARIO_VERSION})",
                doc.version
            )));
        }
        if let ContingencyRecord::Keyword(k) = &doc.contingencies {
            if k != "all" {
                return Err(CaseError::Schema(format!(
                    "contingencies must be a list of branch ids or \"all\", found {k:?}"
                )));
            }
        }
        if let Some(t) = doc.options.tolerance {
            if !(t.is_finite() && t > 0.0) {
                return Err(CaseError::Schema(format!("tolerance {t} is not positive")));
            }
        }
        Ok(doc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }
}

/// Contingency selection after id resolution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Contingencies {
    All,
    List(Vec<BranchIdx>),
}

impl Contingencies {
    /// Concrete branch list; `All` expands to the branches connected in `target`.
    pub fn resolve(&self, target: &Grid) -> Vec<BranchIdx> {
        match self {
            Contingencies::All => (0..target.branches().len())
                .map(BranchIdx)
                .filter(|&b| target.branch(b).is_connected())
                .collect(),
            Contingencies::List(l) => l.clone(),
        }
    }
}

/// A scenario with every id resolved against a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub case: Option<PathBuf>,
    pub reference: Vec<TopologyChange>,
    pub changes: Vec<TopologyChange>,
    pub contingencies: Contingencies,
    pub tolerance: Option<f64>,
}

impl Scenario {
    /// The grid with the reference changes applied.
    pub fn reference_grid(&self, grid: &Grid) -> Result<Grid, GridError> {
        grid.apply_change_set(&self.reference)
    }
}

fn resolve_branch(grid: &Grid, id: &str) -> Result<BranchIdx, CaseError> {
    grid.branch_by_id(id).ok_or_else(|| CaseError::UnknownId {
        kind: "branch",
        id: id.to_string(),
    })
}

fn resolve_substation(grid: &Grid, id: &str) -> Result<SubIdx, CaseError> {
    grid.substation_by_id(id).ok_or_else(|| CaseError::UnknownId {
        kind: "substation",
        id: id.to_string(),
    })
}

/// Resolves one change record against `grid`.
pub fn resolve_change(grid: &Grid, record: &ChangeRecord) -> Result<TopologyChange, CaseError> {
    Ok(match record {
        ChangeRecord::Disconnect { branch } => TopologyChange::Disconnect(resolve_branch(grid, branch)?),
        ChangeRecord::Reconnect { branch } => TopologyChange::Reconnect(resolve_branch(grid, branch)?),
        ChangeRecord::Merge { substation } => TopologyChange::Merge(resolve_substation(grid, substation)?),
        ChangeRecord::Split {
            substation,
            busbar_two,
        } => {
            let sub = resolve_substation(grid, substation)?;
            let mut terminals = Vec::with_capacity(busbar_two.len());
            for t in busbar_two {
                let terminal = match t {
                    TerminalRecord::Branch(id) => {
                        let b = resolve_branch(grid, id)?;
                        let br = grid.branch(b);
                        if br.from == sub {
                            Terminal::BranchEnd(b, Side::From)
                        } else if br.to == sub {
                            Terminal::BranchEnd(b, Side::To)
                        } else {
                            return Err(CaseError::Schema(format!(
                                "branch {id} does not end at substation {substation}"
                            )));
                        }
                    }
                    TerminalRecord::Injection(id) => {
                        let i = grid.injection_by_id(id).ok_or_else(|| CaseError::UnknownId {
                            kind: "injection",
                            id: id.clone(),
                        })?;
                        if grid.injection(i).sub != sub {
                            return Err(CaseError::Schema(format!(
                                "injection {id} is not at substation {substation}"
                            )));
                        }
                        Terminal::Injection(i)
                    }
                };
                terminals.push(terminal);
            }
            TopologyChange::Split(sub, BusbarAssignment::new(terminals))
        }
    })
}

/// Inverse of [`resolve_change`].
pub fn change_record(grid: &Grid, change: &TopologyChange) -> ChangeRecord {
    match change {
        TopologyChange::Disconnect(b) => ChangeRecord::Disconnect {
            branch: grid.branch(*b).id.clone(),
        },
        TopologyChange::Reconnect(b) => ChangeRecord::Reconnect {
            branch: grid.branch(*b).id.clone(),
        },
        TopologyChange::Merge(s) => ChangeRecord::Merge {
            substation: grid.substation(*s).id.clone(),
        },
        TopologyChange::Split(s, a) => ChangeRecord::Split {
            substation: grid.substation(*s).id.clone(),
            busbar_two: a
                .busbar_two()
                .iter()
                .map(|t| match t {
                    Terminal::BranchEnd(b, _) => TerminalRecord::Branch(grid.branch(*b).id.clone()),
                    Terminal::Injection(i) => TerminalRecord::Injection(grid.injection(*i).id.clone()),
                })
                .collect(),
        },
    }
}

/// Parses and resolves a scenario against `grid`.
pub fn load_scenario(text: &str, grid: &Grid) -> Result<Scenario, CaseError> {
    ScenarioDocument::from_json(text)?.resolve(grid)
}

impl ScenarioDocument {
    pub fn resolve(&self, grid: &Grid) -> Result<Scenario, CaseError> {
        let resolve_all = |records: &[ChangeRecord]| {
            records
                .iter()
                .map(|r| resolve_change(grid, r))
                .collect::<Result<Vec<_>, _>>()
        };
        let contingencies = match &self.contingencies {
            ContingencyRecord::Keyword(_) => Contingencies::All,
            ContingencyRecord::List(ids) => Contingencies::List(
                ids.iter()
                    .map(|id| resolve_branch(grid, id))
                    .collect::<Result<_, _>>()?,
            ),
        };
        Ok(Scenario {
            case: self.case.clone(),
            reference: resolve_all(&self.reference)?,
            changes: resolve_all(&self.changes)?,
            contingencies,
            tolerance: self.options.tolerance,
        })
    }

    /// Document for an already resolved change set.
    pub fn from_changes(grid: &Grid, reference: &[TopologyChange], changes: &[TopologyChange]) -> Self {
        Self {
            version: SCENARIO_VERSION,
            case: None,
            reference: reference.iter().map(|c| change_record(grid, c)).collect(),
            changes: changes.iter().map(|c| change_record(grid, c)).collect(),
            contingencies: ContingencyRecord::default(),
            options: OptionsRecord::default(),
        }
    }
}

// ---------------------------------------------------------------------------
// Result tables

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ExtSt,
    Oracle,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::ExtSt => "ext_st",
            Method::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowRow {
    pub case: String,
    pub branch: String,
    pub method: Method,
    /// Per-unit flow.
    pub flow: f64,
    /// |ST flow − oracle flow| for the branch; the same on both method rows.
    pub abs_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingRow {
    pub case: String,
    pub method: String,
    pub seconds: f64,
}

/// Flow and timing rows of one or more runs.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ResultTable {
    pub flows: Vec<FlowRow>,
    pub timings: Vec<TimingRow>,
}

impl ResultTable {
    /// Adds one ST and one oracle row per branch.
    pub fn push_comparison(&mut self, case: &str, grid: &Grid, st: &[f64], oracle: &[f64]) {
        for (i, br) in grid.branches().iter().enumerate() {
            let diff = (st[i] - oracle[i]).abs();
            for (method, flow) in [(Method::ExtSt, st[i]), (Method::Oracle, oracle[i])] {
                self.flows.push(FlowRow {
                    case: case.to_string(),
                    branch: br.id.clone(),
                    method,
                    flow,
                    abs_diff: diff,
                });
            }
        }
    }

    pub fn max_abs_diff(&self) -> f64 {
        self.flows.iter().fold(0.0, |m, r| m.max(r.abs_diff))
    }

    pub fn write_flows(&self, w: impl Write) -> std::io::Result<()> {
        write_flow_csv(&self.flows, w)
    }

    pub fn write_timings(&self, w: impl Write) -> std::io::Result<()> {
        write_timing_csv(&self.timings, w)
    }
}

/// Twelve significant digits in scientific notation.
pub fn fmt_sig12(v: f64) -> String {
    // Normalize negative zero so identical results print identically.
    let v = if v == 0.0 { 0.0 } else { v };
    format!("{v:.11e}")
}

/// Quotes a CSV field when it contains a separator, quote or line break.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn write_flow_csv(rows: &[FlowRow], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "case,branch,method,flow,abs_diff")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            csv_field(&r.case),
            csv_field(&r.branch),
            r.method.label(),
            fmt_sig12(r.flow),
            fmt_sig12(r.abs_diff)
        )?;
    }
    Ok(())
}

pub fn write_timing_csv(rows: &[TimingRow], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "case,method,seconds")?;
    for r in rows {
        writeln!(w, "{},{},{}", csv_field(&r.case), csv_field(&r.method), fmt_sig12(r.seconds))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::BranchStatus;

    const TINY: &str = "\
function mpc = tiny
mpc.baseMVA = 100;
mpc.bus = [
\t1\t3\t0\t0;
\t2\t1\t50\t0;
\t3\t1\t30\t0;
];
mpc.gen = [
\t1\t80\t0\t0\t0\t1\t100\t1;
\t3\t0\t0\t0\t0\t1\t100\t0;
];
mpc.branch = [
\t1\t2\t0\t0.1\t0\t0\t0\t0\t0\t0\t1;
\t1\t3\t0\t0.2\t0\t0\t0\t0\t0\t0\t1;
\t2\t3\t0\t0.25\t0\t0\t0\t0\t0\t0\t0;
\t2\t3\t0\t0.5\t0\t0\t0\t0\t0\t0\t1;
];
";

    #[test]
    fn tiny_case_fields() {
        let g = parse_matpower(TINY, "tiny").unwrap();
        assert_eq!(g.substations().len(), 3);
        assert_eq!(g.branches().len(), 4);
        assert_eq!(g.substation(g.slack()).id, "sub_1");
        let ids: Vec<_> = g.branches().iter().map(|b| b.id.as_str()).collect();
        assert_eq!(ids, ["l_1_2", "l_1_3", "l_2_3", "l_2_3_2"]);
        assert_eq!(g.branches()[2].status, BranchStatus::Disconnected);
        assert_eq!(g.branches()[0].susceptance, 10.0);
        // The out-of-service generator at bus 3 is dropped.
        let inj: Vec<_> = g.injections().iter().map(|i| (i.id.as_str(), i.p)).collect();
        assert_eq!(inj, [("load_2", -0.5), ("load_3", -0.3), ("gen_1", 0.8)]);
    }

    #[test]
    fn two_reference_buses() {
        let text = TINY.replace("\t2\t1\t50", "\t2\t3\t50");
        match parse_matpower(&text, "t") {
            Err(CaseError::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_number_has_line() {
        let text = TINY.replace("0.25", "0.2x");
        match parse_matpower(&text, "t") {
            Err(CaseError::Parse { line, .. }) => assert_eq!(line, 15),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn infinite_limits_are_ignored() {
        let text = TINY.replace("\t1\t80\t0\t0\t0", "\t1\t80\t0\tInf\t-Inf");
        assert!(parse_matpower(&text, "t").is_ok());
        let text = TINY.replace("\t1\t3\t0\t0.2", "\t1\t3\t0\tInf");
        assert!(matches!(parse_matpower(&text, "t"), Err(CaseError::Parse { line: 14, .. })));
    }

    #[test]
    fn islands_are_unsupported() {
        let text = TINY.replace("\t1\t3\t0\t0.2\t0\t0\t0\t0\t0\t0\t1", "\t1\t3\t0\t0.2\t0\t0\t0\t0\t0\t0\t0");
        let text = text.replace("\t2\t3\t0\t0.5\t0\t0\t0\t0\t0\t0\t1", "\t2\t3\t0\t0.5\t0\t0\t0\t0\t0\t0\t0");
        assert!(matches!(parse_matpower(&text, "t"), Err(CaseError::UnsupportedFeature(_))));
    }

    #[test]
    fn round_trip() {
        let g = parse_matpower(TINY, "tiny").unwrap();
        let again = parse_matpower(&write_matpower(&g).unwrap(), "tiny").unwrap();
        assert!(g.electrically_equal(&again));
    }

    #[test]
    fn scenario_resolution() {
        let g = parse_matpower(TINY, "tiny").unwrap();
        let text = r#"{
            "version": 1,
            "changes": [
                {"kind": "disconnect", "branch": "l_1_2"},
                {"kind": "split", "substation": "sub_3", "busbar_two": [{"branch": "l_1_3"}, {"injection": "load_3"}]}
            ],
            "contingencies": "all",
            "options": {"tolerance": 1e-6}
        }"#;
        let s = load_scenario(text, &g).unwrap();
        assert_eq!(s.changes.len(), 2);
        assert_eq!(s.contingencies, Contingencies::All);
        assert_eq!(s.tolerance, Some(1e-6));
        match &s.changes[1] {
            TopologyChange::Split(sub, a) => {
                assert_eq!(g.substation(*sub).id, "sub_3");
                assert!(a.busbar_two().contains(&Terminal::BranchEnd(BranchIdx(1), Side::To)));
            }
            c => panic!("unexpected {c:?}"),
        }
        let doc = ScenarioDocument::from_changes(&g, &[], &s.changes);
        assert_eq!(load_scenario(&doc.to_json(), &g).unwrap().changes, s.changes);
    }

    #[test]
    fn scenario_errors() {
        let g = parse_matpower(TINY, "tiny").unwrap();
        let missing_version = r#"{"changes": []}"#;
        assert!(matches!(load_scenario(missing_version, &g), Err(CaseError::Schema(_))));
        let unknown = r#"{"version": 1, "changes": [{"kind": "disconnect", "branch": "l_999"}]}"#;
        assert!(matches!(
            load_scenario(unknown, &g),
            Err(CaseError::UnknownId { kind: "branch", .. })
        ));
        let bad_kind = r#"{"version": 1, "changes": [{"kind": "explode", "branch": "l_1_2"}]}"#;
        assert!(matches!(load_scenario(bad_kind, &g), Err(CaseError::Schema(_))));
        let empty = r#"{"version": 1}"#;
        assert!(load_scenario(empty, &g).unwrap().changes.is_empty());
    }

    #[test]
    fn csv_format() {
        let mut t = ResultTable::default();
        t.flows.push(FlowRow {
            case: "c".into(),
            branch: "b".into(),
            method: Method::ExtSt,
            flow: -0.0,
            abs_diff: 1.0 / 3.0,
        });
        let mut buf = Vec::new();
        t.write_flows(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "case,branch,method,flow,abs_diff\nc,b,ext_st,0.00000000000e0,3.33333333333e-1\n"
        );
    }
}
