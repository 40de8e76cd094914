//! Coefficients of disconnection pairs on case14: electrically distant pairs
//! stay near one, pairs sharing a neighborhood deviate.
//!
//! Run with `cargo run --example beta_interpretability`.

use std::path::Path;

use topo_superposition::case_io::read_case;
use topo_superposition::dc::DcSolver;
use topo_superposition::grid::{BranchIdx, TopologyChange};
use topo_superposition::superposition::build_basis;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = read_case(&Path::new(env!("CARGO_MANIFEST_DIR")).join("data/case14.m"))?;
    let solver = DcSolver::new(&grid)?;
    let bridges = grid.bridges();
    let lines: Vec<BranchIdx> = (0..grid.branches().len())
        .map(BranchIdx)
        .filter(|b| !bridges.contains(b))
        .collect();

    let mut rows = Vec::new();
    for (i, &a) in lines.iter().enumerate() {
        for &b in &lines[i + 1..] {
            let changes = [TopologyChange::Disconnect(a), TopologyChange::Disconnect(b)];
            if grid.apply_change_set(&changes).is_err() {
                continue;
            }
            let basis = build_basis(&grid, &changes)?;
            let Ok((sol, _)) = basis.evaluate(&[0, 1]) else { continue };
            // mutual outage sensitivity: max of |LODF| in both directions
            let coupling = solver
                .lodf(&grid, a)?
                .factor(b)
                .abs()
                .max(solver.lodf(&grid, b)?.factor(a).abs());
            rows.push((coupling, grid.branch(a).id.clone(), grid.branch(b).id.clone(), sol.betas));
        }
    }
    rows.sort_by(|x, y| x.0.total_cmp(&y.0));
    println!("{:>9}  {:<8} {:<8} {:>8} {:>8}", "coupling", "line a", "line b", "beta a", "beta b");
    for (c, a, b, betas) in rows.iter().take(8).chain(rows.iter().rev().take(8).rev()) {
        println!("{c:>9.4}  {a:<8} {b:<8} {:>8.4} {:>8.4}", betas[0], betas[1]);
    }
    Ok(())
}
