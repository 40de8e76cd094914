//! Line outage distribution factors of one outage, from a unit dipole and
//! from the defining ratio with a re-solve.
//!
//! `cargo run --example lodf_factors [branch-id]`

use std::path::Path;

use topo_superposition::case_io::read_case;
use topo_superposition::dc::{lodf_by_resolve, DcSolver};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = read_case(&Path::new(env!("CARGO_MANIFEST_DIR")).join("data/case14.m"))?;
    let id = std::env::args().nth(1).unwrap_or_else(|| "l_2_4".into());
    let outage = grid.branch_by_id(&id).ok_or_else(|| format!("no branch {id}"))?;
    let solver = DcSolver::new(&grid)?;
    let reference = solver.solve(&grid)?;
    let dipole = solver.lodf(&grid, outage)?;
    let ratio = lodf_by_resolve(&grid, &reference, outage)?;
    println!("outage {id}, reference flow {:.4} pu", reference.flow(outage));
    for (i, br) in grid.branches().iter().enumerate() {
        println!("{:<10} {:>9.5} {:>9.5}", br.id, dipole.factors[i], ratio.factors[i]);
    }
    Ok(())
}
