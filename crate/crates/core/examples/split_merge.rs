//! Busbar split and merge at a substation: residual coupler flow and the
//! angle gap across the open coupler.
//!
//! `cargo run --example split_merge`

use std::path::Path;

use topo_superposition::case_io::read_case;
use topo_superposition::grid::{BusbarAssignment, Side, Terminal, TopologyChange};
use topo_superposition::solve_dc;
use topo_superposition::superposition::{merge_delta_theta, split_residual_flow};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = read_case(&Path::new(env!("CARGO_MANIFEST_DIR")).join("data/case14.m"))?;
    let sub = grid.substation_by_id("sub_4").ok_or("missing sub_4")?;
    let two = BusbarAssignment::new([
        Terminal::BranchEnd(grid.branch_by_id("l_4_7").ok_or("missing l_4_7")?, Side::From),
        Terminal::BranchEnd(grid.branch_by_id("l_4_9").ok_or("missing l_4_9")?, Side::From),
    ]);
    let before = solve_dc(&grid)?;
    println!("coupler flow before split {:.4} pu", split_residual_flow(&before, &grid, sub, &two));

    let split = grid.apply_change_set(&[TopologyChange::Split(sub, two)])?;
    let after = solve_dc(&split)?;
    println!("busbars after split: {}", split.bus_layout().bus_count());
    println!("angle gap across the open coupler {:.5} rad", merge_delta_theta(&after, sub));

    let merged = split.apply_change_set(&[TopologyChange::Merge(sub)])?;
    println!("merge restores the original grid: {}", merged.electrically_equal(&grid));
    Ok(())
}
