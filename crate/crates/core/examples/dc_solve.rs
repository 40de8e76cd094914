//! Plain DC power flow of a bundled case, flows in MW.
//!
//! `cargo run --example dc_solve [case-file]`

use std::path::PathBuf;

use topo_superposition::case_io::read_case;
use topo_superposition::solve_dc;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/case14.m"));
    let grid = read_case(&path)?;
    let state = solve_dc(&grid)?;
    println!("{}: {} buses, {} branches", grid.name(), state.layout().bus_count(), grid.branches().len());
    for (br, mw) in grid.branches().iter().zip(state.flows_mw(grid.base_mva())) {
        println!("{:<10} {mw:>9.3} MW", br.id);
    }
    println!("max nodal mismatch {:.1e} pu", state.max_mismatch(&grid));
    Ok(())
}
