//! Independent reference implementations used as test oracles.
//!
//! Nothing here calls the crate's solvers: node numbering, matrix assembly
//! and elimination are redone from the public grid description with dense
//! linear algebra.
#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use topo_superposition::case_io::read_case;
use topo_superposition::grid::{Busbar, Grid};

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data")
}

pub fn load(name: &str) -> Grid {
    read_case(&data_dir().join(format!("{name}.m"))).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Node key of a terminal: (substation index, busbar).
fn node_map(grid: &Grid) -> (BTreeMap<(usize, Busbar), usize>, usize) {
    let mut keys = BTreeMap::new();
    for (i, _) in grid.substations().iter().enumerate() {
        keys.insert((i, Busbar::One), 0);
    }
    for br in grid.branches() {
        keys.insert((br.from.0, br.from_busbar), 0);
        keys.insert((br.to.0, br.to_busbar), 0);
    }
    for inj in grid.injections() {
        keys.insert((inj.sub.0, inj.busbar), 0);
    }
    for (i, v) in keys.values_mut().enumerate() {
        *v = i;
    }
    let slack = keys[&(grid.slack().0, Busbar::One)];
    (keys, slack)
}

/// Dense Gaussian elimination with partial pivoting.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
            .unwrap();
        assert!(a[p][c].abs() > 1e-14, "singular oracle matrix");
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            if f != 0.0 {
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// Branch flows of `grid` by a dense nodal solve. Panics on islanded grids.
pub fn oracle_flows(grid: &Grid) -> Vec<f64> {
    let (keys, slack) = node_map(grid);
    let n = keys.len();
    let node = |sub: usize, bb: Busbar| keys[&(sub, bb)];
    let mut bmat = vec![vec![0.0; n]; n];
    for br in grid.branches().iter().filter(|b| b.is_connected()) {
        let (f, t) = (node(br.from.0, br.from_busbar), node(br.to.0, br.to_busbar));
        let s = br.susceptance;
        bmat[f][f] += s;
        bmat[t][t] += s;
        bmat[f][t] -= s;
        bmat[t][f] -= s;
    }
    let mut p = vec![0.0; n];
    for inj in grid.injections() {
        p[node(inj.sub.0, inj.busbar)] += inj.p;
    }
    let keep: Vec<usize> = (0..n).filter(|&i| i != slack).collect();
    let a: Vec<Vec<f64>> = keep.iter().map(|&i| keep.iter().map(|&j| bmat[i][j]).collect()).collect();
    let rhs: Vec<f64> = keep.iter().map(|&i| p[i]).collect();
    let x = dense_solve(a, rhs);
    let mut theta = vec![0.0; n];
    for (k, &i) in keep.iter().enumerate() {
        theta[i] = x[k];
    }
    grid.branches()
        .iter()
        .map(|br| {
            if br.is_connected() {
                br.susceptance * (theta[node(br.from.0, br.from_busbar)] - theta[node(br.to.0, br.to_busbar)])
            } else {
                0.0
            }
        })
        .collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Random connected grid in MATPOWER-compatible canonical form: substations
/// `sub_1..=n`, a spanning tree plus `extra` chords, loads before generators.
/// Injections are drawn per substation and balanced at the slack.
pub fn random_grid(seed: u64, n: usize, extra: usize) -> Grid {
    use rand::{Rng, SeedableRng};
    use topo_superposition::grid::GridBuilder;

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut g = GridBuilder::new(format!("random_{seed}"));
    let subs: Vec<_> = (1..=n).map(|i| g.substation(format!("sub_{i}"))).collect();
    let mut edges = Vec::new();
    for i in 1..n {
        edges.push((rng.random_range(0..i), i));
    }
    for _ in 0..extra {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b {
            edges.push((a.min(b), a.max(b)));
        }
    }
    for (k, &(a, b)) in edges.iter().enumerate() {
        let x: f64 = rng.random_range(0.02..0.5);
        let suffix = if edges[..k].contains(&(a, b)) { format!("_{k}") } else { String::new() };
        g.line(format!("l_{}_{}{suffix}", a + 1, b + 1), subs[a], subs[b], 1.0 / x);
    }
    let loads: Vec<f64> = (0..n).map(|_| -rng.random_range(0.0..1.0)).collect();
    let mut gens: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.3) { rng.random_range(0.1..1.5) } else { 0.0 }).collect();
    let slack = rng.random_range(0..n);
    let imbalance: f64 = loads.iter().sum::<f64>() + gens.iter().sum::<f64>();
    gens[slack] -= imbalance;
    for (i, &p) in loads.iter().enumerate() {
        g.injection(format!("load_{}", i + 1), subs[i], p);
    }
    for (i, &p) in gens.iter().enumerate() {
        if p != 0.0 {
            g.injection(format!("gen_{}", i + 1), subs[i], p);
        }
    }
    g.slack(subs[slack]);
    g.build().expect("spanning tree keeps the grid connected")
}

/// Copy of an unsplit `grid` with injection `i` set to `p[i]`.
pub fn with_injections(grid: &Grid, p: &[f64]) -> Grid {
    use topo_superposition::grid::GridBuilder;

    let mut g = GridBuilder::new(grid.name());
    g.base_mva(grid.base_mva());
    for s in grid.substations() {
        g.substation(s.id.clone());
    }
    for br in grid.branches() {
        g.branch(br.id.clone(), br.from, br.to, br.susceptance, br.status);
    }
    for (inj, &pi) in grid.injections().iter().zip(p) {
        g.injection(inj.id.clone(), inj.sub, pi);
    }
    g.slack(grid.slack());
    g.build().unwrap()
}

/// Smallest max-norm error of any linear combination of the basis flow
/// vectors against `target` (least squares over the distinct vectors).
pub fn span_residual(basis: &topo_superposition::StBasis, target: &[f64]) -> f64 {
    let reference = basis.reference().flows();
    let mut cols: Vec<&[f64]> = vec![reference];
    for u in basis.unitary() {
        if max_abs_diff(u.flows(), reference) > 1e-9 {
            cols.push(u.flows());
        }
    }
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let ata: Vec<Vec<f64>> = cols.iter().map(|a| cols.iter().map(|b| dot(a, b)).collect()).collect();
    let atb: Vec<f64> = cols.iter().map(|a| dot(a, target)).collect();
    let x = dense_solve(ata, atb);
    (0..target.len())
        .map(|l| (cols.iter().zip(&x).map(|(c, w)| c[l] * w).sum::<f64>() - target[l]).abs())
        .fold(0.0, f64::max)
}
