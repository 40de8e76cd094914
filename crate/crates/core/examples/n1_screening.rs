//! Full N-1 after a two-line action on case118, against refactorizing per
//! contingency.
//!
//! `cargo run --release --example n1_screening [jobs]`

use std::path::Path;

use topo_superposition::case_io::{read_case, Contingencies};
use topo_superposition::grid::TopologyChange;
use topo_superposition::security::{compare_with_oracle, run_n1, ContingencyStatus, ScreeningOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = read_case(&Path::new(env!("CARGO_MANIFEST_DIR")).join("data/case118.m"))?;
    let jobs = std::env::args().nth(1).and_then(|j| j.parse().ok()).unwrap_or(1);
    let action = ["l_23_32", "l_69_75"]
        .iter()
        .map(|id| grid.branch_by_id(id).map(TopologyChange::Disconnect).ok_or(format!("missing {id}")))
        .collect::<Result<Vec<_>, _>>()?;
    let target = grid.apply_change_set(&action)?;
    let contingencies = Contingencies::All.resolve(&target);
    let options = ScreeningOptions {
        jobs,
        beta_filter: Some(1e-3),
    };
    let report = run_n1(&grid, &action, &contingencies, &options)?;
    for status in [
        ContingencyStatus::Ok,
        ContingencyStatus::Independent,
        ContingencyStatus::Islanding,
        ContingencyStatus::Skipped,
        ContingencyStatus::Degenerate,
    ] {
        println!("{:<12} {}", status.label(), report.count(status));
    }
    let cmp = compare_with_oracle(&report, &grid, &action, &contingencies, jobs)?;
    println!(
        "max diff {:.1e} pu; superposition {:.3e}s, refactorization {:.3e}s",
        cmp.max_abs_diff, cmp.st_seconds, cmp.oracle_seconds
    );
    Ok(())
}
