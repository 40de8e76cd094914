//! Building a scenario document from changes, writing it as JSON and
//! resolving it back against the case.
//!
//! `cargo run --example scenario_roundtrip`

use std::path::Path;

use topo_superposition::case_io::{read_case, ScenarioDocument};
use topo_superposition::grid::{BusbarAssignment, Side, Terminal, TopologyChange};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = read_case(&Path::new(env!("CARGO_MANIFEST_DIR")).join("data/case14.m"))?;
    let sub_5 = grid.substation_by_id("sub_5").ok_or("missing sub_5")?;
    let l_4_5 = grid.branch_by_id("l_4_5").ok_or("missing l_4_5")?;
    let changes = vec![
        TopologyChange::Disconnect(grid.branch_by_id("l_2_4").ok_or("missing l_2_4")?),
        TopologyChange::Split(sub_5, BusbarAssignment::new([Terminal::BranchEnd(l_4_5, Side::To)])),
    ];
    let doc = ScenarioDocument::from_changes(&grid, &[], &changes);
    let json = doc.to_json();
    println!("{json}");
    let back = ScenarioDocument::from_json(&json)?.resolve(&grid)?;
    assert_eq!(back.changes, changes);
    println!("resolved {} changes back", back.changes.len());
    Ok(())
}
