//! N-1 timing across grid sizes: total and per-contingency cost of the
//! superposition screen versus refactorization.
//!
//! `cargo run --release --example scaling_bench`

use std::path::Path;

use topo_superposition::case_io::read_case;
use topo_superposition::cli::bench_case;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    println!("{:<16} {:>6} {:>12} {:>12} {:>14} {:>14}", "case", "buses", "st total", "oracle", "st/cont", "oracle/cont");
    for case in ["case14", "case118", "case300", "case1354pegase"] {
        let grid = read_case(&data.join(format!("{case}.m")))?;
        let r = bench_case(&grid, 0, 1, 5)?;
        println!(
            "{:<16} {:>6} {:>12.3e} {:>12.3e} {:>14.3e} {:>14.3e}",
            r.case, r.buses, r.st_seconds, r.oracle_seconds, r.st_per_contingency, r.oracle_per_contingency
        );
    }
    Ok(())
}
