use batchdc::factors::{
    apply_modf_to_flows, apply_outage_to_flows, apply_outage_to_ptdf, compute_modf, compute_ptdf, lodf_column, n0_flows,
    PtdfMatrix,
};
use batchdc::fixtures::{synthetic_grid, SyntheticSpec};
use batchdc::Grid;
use proptest::prelude::*;

fn grid_strategy() -> impl Strategy<Value = Grid> {
    (4usize..40, 0usize..30, any::<u64>()).prop_map(|(nodes, extra, seed)| {
        synthetic_grid(&SyntheticSpec { nodes, extra_branches: extra, substations: 2, multi_outages: 0, seed })
    })
}

fn full_ptdf(grid: &Grid) -> PtdfMatrix {
    let all: Vec<usize> = (0..grid.branches().len()).collect();
    compute_ptdf(grid, &all).unwrap()
}

/// Per-row flows indexed by branch.
fn by_branch(ptdf: &PtdfMatrix, flows: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; flows.len()];
    for (r, &f) in flows.iter().enumerate() {
        out[ptdf.row_branch(r)] = f;
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn ptdf_entries_are_bounded(grid in grid_strategy()) {
        let p = full_ptdf(&grid);
        for &v in p.values() {
            prop_assert!(v.abs() <= 1.0 + 1e-9, "entry {v}");
        }
        prop_assert!(p.node_column(grid.slack()).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn flows_are_conserved_at_every_node(grid in grid_strategy()) {
        let p = full_ptdf(&grid);
        let power = grid.nodal_power();
        let flows = by_branch(&p, &n0_flows(&p, &p.nodal_vector(&power)));
        let mut net = vec![0.0; grid.node_count()];
        for (b, br) in grid.branches().iter().enumerate() {
            net[br.from] += flows[b];
            net[br.to] -= flows[b];
        }
        for (n, (&out, &inj)) in net.iter().zip(&power).enumerate() {
            if n != grid.slack() {
                prop_assert!((out - inj).abs() <= 1e-9, "node {n}: {out} vs {inj}");
            }
        }
    }

    #[test]
    fn superposition(grid in grid_strategy(), a in prop::collection::vec(-100.0f64..100.0, 40), b in prop::collection::vec(-100.0f64..100.0, 40)) {
        let p = full_ptdf(&grid);
        let n = grid.node_count();
        let pa = p.nodal_vector(&a[..n]);
        let pb = p.nodal_vector(&b[..n]);
        let sum: Vec<f64> = pa.iter().zip(&pb).map(|(x, y)| x + y).collect();
        let fa = n0_flows(&p, &pa);
        let fb = n0_flows(&p, &pb);
        let fs = n0_flows(&p, &sum);
        for r in 0..fs.len() {
            prop_assert!((fs[r] - fa[r] - fb[r]).abs() <= 1e-9);
        }
    }

    #[test]
    fn lodf_identities(grid in grid_strategy(), pick in any::<prop::sample::Index>()) {
        let bridges = grid.bridge_branches();
        let candidates: Vec<usize> = (0..grid.branches().len()).filter(|&b| !bridges[b]).collect();
        prop_assume!(!candidates.is_empty());
        let k = candidates[pick.index(candidates.len())];
        let p = full_ptdf(&grid);
        let col = lodf_column(&p, k).unwrap();
        let row = p.branch_row(k).unwrap();
        prop_assert_eq!(col[row], -1.0);
        let base = n0_flows(&p, &p.nodal_vector(&grid.nodal_power()));
        let after = apply_outage_to_flows(&base, &col, row);
        prop_assert_eq!(after[row], 0.0);
        let single = compute_modf(&p, &[k]).unwrap();
        for (x, y) in single.column(0).iter().zip(&col) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn bridges_island(grid in grid_strategy()) {
        let bridges = grid.bridge_branches();
        let p = full_ptdf(&grid);
        for (b, &is_bridge) in bridges.iter().enumerate() {
            prop_assert_eq!(lodf_column(&p, b).is_err(), is_bridge, "branch {}", b);
        }
    }

    #[test]
    fn modf_equals_sequential_lodf(grid in grid_strategy(), picks in prop::collection::vec(any::<prop::sample::Index>(), 2..=4)) {
        let bridges = grid.bridge_branches();
        let candidates: Vec<usize> = (0..grid.branches().len()).filter(|&b| !bridges[b]).collect();
        prop_assume!(candidates.len() >= 4);
        let mut set: Vec<usize> = picks.iter().map(|i| candidates[i.index(candidates.len())]).collect();
        set.sort_unstable();
        set.dedup();
        prop_assume!(set.len() >= 2);
        let p = full_ptdf(&grid);
        let base = n0_flows(&p, &p.nodal_vector(&grid.nodal_power()));

        let mut seq = p.clone();
        let mut flows = base.clone();
        let mut islanded = false;
        for &k in &set {
            match lodf_column(&seq, k) {
                Ok(col) => {
                    flows = apply_outage_to_flows(&flows, &col, seq.branch_row(k).unwrap());
                    seq = apply_outage_to_ptdf(&seq, &col, k).unwrap();
                }
                Err(_) => { islanded = true; break; }
            }
        }
        match compute_modf(&p, &set) {
            Ok(m) => {
                prop_assert!(!islanded);
                let via_modf = apply_modf_to_flows(&base, &m);
                for r in 0..flows.len() {
                    prop_assert!((via_modf[r] - flows[r]).abs() <= 1e-9 * (1.0 + flows[r].abs()), "row {}", r);
                }
                for &k in &set {
                    prop_assert_eq!(via_modf[p.branch_row(k).unwrap()], 0.0);
                }
            }
            Err(_) => prop_assert!(islanded),
        }
    }
}
