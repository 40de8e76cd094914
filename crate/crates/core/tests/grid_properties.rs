//! Topology application, case round trips and DC solver properties.

mod common;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use topo_superposition::case_io::{parse_matpower, write_matpower};
use topo_superposition::dc::DcSolver;
use topo_superposition::grid::{
    connected_components, BranchIdx, BranchStatus, BusbarAssignment, GridBuilder, SubIdx, TopologyChange,
};
use topo_superposition::sampling::{random_assignment, random_change_set, ChangeKind};
use topo_superposition::{solve_dc, GridError};

use common::{load, max_abs_diff, oracle_flows, random_grid, with_injections};

#[test]
fn case14_has_expected_counts() {
    let g = load("case14");
    assert_eq!(g.substations().len(), 14);
    assert_eq!(g.branches().len(), 20);
    assert_eq!(connected_components(&g).count, 1);
    let total: f64 = g.injections().iter().map(|i| i.p).sum();
    // 259 MW of load, generation dispatched at 272.4 MW
    assert!((total - (272.4 - 259.0) / 100.0).abs() < 1e-12);
}

#[test]
fn triangle_components() {
    let mut b = GridBuilder::new("t");
    let s: Vec<_> = (0..3).map(|i| b.substation(format!("{i}"))).collect();
    b.line("a", s[0], s[1], 1.0);
    b.line("b", s[1], s[2], 1.0);
    b.line("c", s[0], s[2], 1.0);
    b.slack(s[0]);
    let g = b.build().unwrap();
    assert_eq!(connected_components(&g).count, 1);
    let err = g
        .apply_change_set(&[TopologyChange::Disconnect(BranchIdx(1)), TopologyChange::Disconnect(BranchIdx(2))])
        .unwrap_err();
    assert_eq!(err, GridError::GridDisconnected { components: 2 });
}

#[test]
fn status_zero_branch_loads_disconnected() {
    let text = "mpc.baseMVA = 100;\nmpc.bus = [1 3 0 0 0 0 1 1 0 0 1 1 1; 2 1 50 0 0 0 1 1 0 0 1 1 1; 3 1 0 0 0 0 1 1 0 0 1 1 1];\n\
                mpc.gen = [1 50 0 0 0 1 100 1 0 0];\n\
                mpc.branch = [1 2 0 0.1 0 0 0 0 0 0 1 -360 360; 2 3 0 0.1 0 0 0 0 0 0 1 -360 360; 1 3 0 0.2 0 0 0 0 0 0 0 -360 360];\n";
    let g = parse_matpower(text, "t").unwrap();
    assert_eq!(g.branches()[2].status, BranchStatus::Disconnected);
    let s = solve_dc(&g).unwrap();
    assert_eq!(s.flows()[2], 0.0);
    assert!((s.flows()[0] - 0.5).abs() < 1e-12);
}

#[test]
fn empty_and_inverse_changes_are_identities() {
    let g = load("case14");
    assert!(g.apply_change_set(&[]).unwrap().electrically_equal(&g));
    let l = g.branch_by_id("l_2_4").unwrap();
    let back = g
        .apply_change_set(&[TopologyChange::Disconnect(l), TopologyChange::Reconnect(l)])
        .unwrap();
    assert!(back.electrically_equal(&g));
    let sub = g.substation_by_id("sub_5").unwrap();
    let noop = g
        .apply_change_set(&[TopologyChange::Split(sub, BusbarAssignment::new([]))])
        .unwrap();
    assert!(noop.electrically_equal(&g));
    assert_eq!(noop.bus_layout().bus_count(), 14);
}

fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn permuted_change_sets_give_the_same_grid(seed in any::<u64>(), size in 1usize..5) {
        let g = random_grid(seed, 10, 8);
        let mut rng = seeded(seed);
        let kinds = [ChangeKind::Disconnect, ChangeKind::Split];
        if let Some(changes) = random_change_set(&g, size, &kinds, &mut rng, 50) {
            let a = g.apply_change_set(&changes).unwrap();
            let mut shuffled = changes.clone();
            shuffled.shuffle(&mut rng);
            let b = g.apply_change_set(&shuffled).unwrap();
            prop_assert!(a.electrically_equal(&b));
        }
    }

    #[test]
    fn split_then_merge_is_identity(seed in any::<u64>()) {
        let g = random_grid(seed, 8, 6);
        let mut rng = seeded(seed);
        let sub = SubIdx(rng.random_range(0..8));
        if let Some(a) = random_assignment(&g, sub, &mut rng) {
            if let Ok(split) = g.apply_change_set(&[TopologyChange::Split(sub, a)]) {
                let merged = split.apply_change_set(&[TopologyChange::Merge(sub)]).unwrap();
                prop_assert!(merged.electrically_equal(&g));
            }
        }
    }

    #[test]
    fn islanding_results_are_rejected(seed in any::<u64>()) {
        let g = random_grid(seed, 8, 3);
        for b in g.bridges() {
            let r = g.apply_change_set(&[TopologyChange::Disconnect(b)]);
            let islanded = matches!(r, Err(GridError::GridDisconnected { .. }));
            prop_assert!(islanded);
        }
    }

    #[test]
    fn matpower_round_trip(seed in any::<u64>()) {
        let g = random_grid(seed, 9, 5);
        let text = write_matpower(&g).unwrap();
        let back = parse_matpower(&text, "back").unwrap();
        prop_assert!(back.electrically_equal(&g));
        let again = parse_matpower(&write_matpower(&back).unwrap(), "again").unwrap();
        prop_assert!(again.electrically_equal(&back));
    }

    #[test]
    fn dc_flows_match_dense_oracle(seed in any::<u64>()) {
        let g = random_grid(seed, 12, 10);
        let s = solve_dc(&g).unwrap();
        prop_assert!(max_abs_diff(s.flows(), &oracle_flows(&g)) <= 1e-10);
        prop_assert!(s.max_mismatch(&g) <= 1e-10);
    }

    #[test]
    fn dc_solve_is_linear_in_injections(seed in any::<u64>()) {
        let g = random_grid(seed, 12, 10);
        let mut rng = seeded(seed ^ 0x5eed);
        let p1: Vec<f64> = g.injections().iter().map(|_| rng.random_range(-1.0..1.0)).collect();
        let p2: Vec<f64> = g.injections().iter().map(|_| rng.random_range(-1.0..1.0)).collect();
        let sum: Vec<f64> = p1.iter().zip(&p2).map(|(a, b)| a + b).collect();
        let f1 = solve_dc(&with_injections(&g, &p1)).unwrap();
        let f2 = solve_dc(&with_injections(&g, &p2)).unwrap();
        let f12 = solve_dc(&with_injections(&g, &sum)).unwrap();
        let added: Vec<f64> = f1.flows().iter().zip(f2.flows()).map(|(a, b)| a + b).collect();
        prop_assert!(max_abs_diff(f12.flows(), &added) <= 1e-10);
    }

    #[test]
    fn flows_follow_angle_differences(seed in any::<u64>()) {
        let g = random_grid(seed, 12, 10);
        let s = solve_dc(&g).unwrap();
        for (i, br) in g.branches().iter().enumerate() {
            let d = (s.flows()[i] - br.susceptance * s.delta_theta_of(BranchIdx(i))).abs();
            prop_assert!(d <= 1e-12);
        }
    }

    #[test]
    fn lodf_does_not_depend_on_injections(seed in any::<u64>()) {
        let g = random_grid(seed, 10, 8);
        let mut rng = seeded(seed ^ 0x10df);
        let p: Vec<f64> = g.injections().iter().map(|_| rng.random_range(-1.0..1.0)).collect();
        let h = with_injections(&g, &p);
        let (sg, sh) = (DcSolver::new(&g).unwrap(), DcSolver::new(&h).unwrap());
        let (rg, rh) = (sg.solve(&g).unwrap(), sh.solve(&h).unwrap());
        let bridges = g.bridges();
        for o in (0..g.branches().len()).map(BranchIdx).filter(|b| !bridges.contains(b)) {
            // ratio form is only meaningful with flow on the outaged branch
            if rg.flow(o).abs() < 1e-3 || rh.flow(o).abs() < 1e-3 {
                continue;
            }
            let a = topo_superposition::dc::lodf_by_resolve(&g, &rg, o).unwrap();
            let b = topo_superposition::dc::lodf_by_resolve(&h, &rh, o).unwrap();
            let dipole = sg.lodf(&g, o).unwrap();
            prop_assert!(max_abs_diff(&a.factors, &b.factors) <= 1e-9);
            prop_assert!(max_abs_diff(&a.factors, &dipole.factors) <= 1e-9);
        }
    }
}
