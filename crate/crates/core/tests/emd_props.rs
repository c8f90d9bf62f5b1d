mod common;

use itertools::Itertools;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use spectrumshape::descriptors::{Histogram, HistogramKind};
use spectrumshape::emd::{
    certify_optimal, emd, emd_1d_oracle, emd_weights, solve_transportation, GroundDistanceMatrix,
};

/// Minimum transport cost by enumerating every spanning-tree basis of the
/// balanced problem (a dummy node absorbs the mass surplus at zero cost).
fn vertex_enumeration(supply: &[f64], demand: &[f64], d: &GroundDistanceMatrix) -> f64 {
    let (mut s, mut t) = (supply.to_vec(), demand.to_vec());
    let (sp, sq) = (s.iter().sum::<f64>(), t.iter().sum::<f64>());
    let (m0, n0) = (s.len(), t.len());
    if sp > sq {
        t.push(sp - sq);
    } else if sq > sp {
        s.push(sq - sp);
    }
    let (m, n) = (s.len(), t.len());
    let cost = |i: usize, j: usize| if i < m0 && j < n0 { d.get(i, j) } else { 0.0 };
    let cells: Vec<(usize, usize)> = (0..m).cartesian_product(0..n).collect();
    let mut best = f64::INFINITY;
    for basis in cells.iter().copied().combinations(m + n - 1) {
        // peel leaves of the bipartite basis graph; failure means a cycle
        let mut rem_s = s.clone();
        let mut rem_t = t.clone();
        let mut open: Vec<(usize, usize)> = basis.clone();
        let mut total = 0.0;
        let mut feasible = true;
        while !open.is_empty() {
            let row_leaf = |k: usize| open.iter().filter(|c| c.0 == open[k].0).count() == 1;
            let col_leaf = |k: usize| open.iter().filter(|c| c.1 == open[k].1).count() == 1;
            let Some(k) = (0..open.len()).find(|&k| row_leaf(k) || col_leaf(k)) else {
                feasible = false;
                break;
            };
            // a leaf row (column) must ship (receive) everything through its only cell
            let x = if row_leaf(k) { rem_s[open[k].0] } else { rem_t[open[k].1] };
            let (i, j) = open.swap_remove(k);
            if x < -1e-12 {
                feasible = false;
                break;
            }
            rem_s[i] -= x;
            rem_t[j] -= x;
            total += x * cost(i, j);
        }
        if feasible && rem_s.iter().chain(&rem_t).all(|r| r.abs() <= 1e-9) {
            best = best.min(total);
        }
    }
    best
}

fn random_instance(seed: u64, m: usize, n: usize) -> (Vec<f64>, Vec<f64>, GroundDistanceMatrix) {
    let mut g = common::rng(seed);
    let mut draw = |k: usize| -> Vec<f64> {
        let mut v: Vec<f64> = (0..k).map(|_| if g.random_bool(0.15) { 0.0 } else { g.random_range(0.1..2.0) }).collect();
        if v.iter().all(|&x| x == 0.0) {
            v[0] = 1.0;
        }
        v
    };
    let (s, t) = (draw(m), draw(n));
    let d = (0..m * n).map(|_| g.random_range(0.0..5.0)).collect();
    (s, t, GroundDistanceMatrix::new(m, n, d).unwrap())
}

fn unit(seed: u64, kind: HistogramKind) -> Histogram {
    let mut g = common::rng(seed);
    Histogram::new(kind, common::random_unit(&mut g, kind.bin_count(), 0.4)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn solver_matches_vertex_enumeration(seed in any::<u64>(), m in 1usize..=4, n in 1usize..=4) {
        let (s, t, d) = random_instance(seed, m, n);
        let flow = solve_transportation(&s, &t, &d).unwrap();
        let oracle = vertex_enumeration(&s, &t, &d);
        prop_assert!((flow.cost - oracle).abs() <= 1e-9 * oracle.max(1.0), "solver {} vs oracle {}", flow.cost, oracle);
    }

    #[test]
    fn solver_output_is_certified_optimal(seed in any::<u64>(), m in 1usize..=12, n in 1usize..=12) {
        let (s, t, d) = random_instance(seed, m, n);
        let flow = solve_transportation(&s, &t, &d).unwrap();
        prop_assert!(certify_optimal(&flow, &s, &t, &d, 1e-9));
    }

    #[test]
    fn unit_mass_emd_matches_closed_form(seed in any::<u64>()) {
        for kind in [HistogramKind::Sps, HistogramKind::Lbp] {
            let (p, q) = (unit(seed, kind), unit(seed.wrapping_add(1), kind));
            let g = GroundDistanceMatrix::l1(kind.bin_count(), kind.bin_count());
            let a = emd(&p, &q, &g).unwrap();
            prop_assert!((a - emd_1d_oracle(&p, &q).unwrap()).abs() <= 1e-9);
        }
    }

    #[test]
    fn relabeling_bins_preserves_cost(seed in any::<u64>(), m in 1usize..=8, n in 1usize..=8) {
        let (s, t, d) = random_instance(seed, m, n);
        let mut g = common::rng(seed ^ 0xabcdef);
        let mut rows: Vec<usize> = (0..m).collect();
        let mut cols: Vec<usize> = (0..n).collect();
        rows.shuffle(&mut g);
        cols.shuffle(&mut g);
        let s2: Vec<f64> = rows.iter().map(|&i| s[i]).collect();
        let t2: Vec<f64> = cols.iter().map(|&j| t[j]).collect();
        let d2 = GroundDistanceMatrix::new(m, n, rows.iter().flat_map(|&i| cols.iter().map(move |&j| (i, j))).map(|(i, j)| d.get(i, j)).collect()).unwrap();
        let (a, b) = (solve_transportation(&s, &t, &d).unwrap().cost, solve_transportation(&s2, &t2, &d2).unwrap().cost);
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
    }

    #[test]
    fn swapping_roles_transposes_the_problem(seed in any::<u64>(), m in 1usize..=8, n in 1usize..=8) {
        let (s, t, d) = random_instance(seed, m, n);
        let dt = GroundDistanceMatrix::new(n, m, (0..n).cartesian_product(0..m).map(|(j, i)| d.get(i, j)).collect()).unwrap();
        let (a, b) = (emd_weights(&s, &t, &d).unwrap(), emd_weights(&t, &s, &dt).unwrap());
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
    }

    #[test]
    fn scaling_masses_scales_work_not_emd(seed in any::<u64>(), k in 0.01f64..100.0) {
        let (s, t, d) = random_instance(seed, 6, 5);
        let base = solve_transportation(&s, &t, &d).unwrap();
        let ks: Vec<f64> = s.iter().map(|x| x * k).collect();
        let kt: Vec<f64> = t.iter().map(|x| x * k).collect();
        let scaled = solve_transportation(&ks, &kt, &d).unwrap();
        prop_assert!((scaled.cost - k * base.cost).abs() <= 1e-9 * scaled.cost.max(1.0));
        prop_assert!((base.cost / base.total - scaled.cost / scaled.total).abs() <= 1e-9);
    }

    #[test]
    fn emd_is_bounded_by_the_ground_distance_range(seed in any::<u64>()) {
        let (p, q) = (unit(seed, HistogramKind::Lbp), unit(seed ^ 7, HistogramKind::Lbp));
        let e = emd(&p, &q, &GroundDistanceMatrix::l1(36, 36)).unwrap();
        prop_assert!((0.0..=35.0).contains(&e));
    }
}

#[test]
fn oracle_agrees_with_hand_solved_instance() {
    // supply [1, 1], demand [1, 1], crossing is cheaper: cost 1 + 1
    let d = GroundDistanceMatrix::new(2, 2, vec![5.0, 1.0, 1.0, 5.0]).unwrap();
    assert_eq!(vertex_enumeration(&[1.0, 1.0], &[1.0, 1.0], &d), 2.0);
    // surplus supply is left in place
    let d = GroundDistanceMatrix::new(2, 1, vec![3.0, 1.0]).unwrap();
    assert_eq!(vertex_enumeration(&[1.0, 1.0], &[1.0], &d), 1.0);
}
