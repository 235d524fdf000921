use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn permutations(items: &mut Vec<usize>, k: usize, out: &mut dyn FnMut(&[usize])) {
    if k == items.len() {
        out(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permutations(items, k + 1, out);
        items.swap(k, i);
    }
}

/// Exact open-path optimum by enumerating all (n-1)! orders.
fn brute_optimum(p: &TourProblem) -> f64 {
    let mut rest: Vec<usize> = (0..p.len()).filter(|&v| v != p.start()).collect();
    let mut best = f64::INFINITY;
    permutations(&mut rest, 0, &mut |perm| {
        let mut c = 0.0;
        let mut cur = p.start();
        for &v in perm {
            c += p.cost(cur, v);
            cur = v;
        }
        best = best.min(c);
    });
    best
}

fn euclidean(pts: &[(f64, f64)], start: usize) -> TourProblem {
    let m = pts
        .iter()
        .map(|a| pts.iter().map(|b| ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()).collect())
        .collect();
    TourProblem::open_ended(m, start).unwrap()
}

#[test]
fn two_vertices() {
    let p = TourProblem::open_ended(vec![vec![0.0, 2.5], vec![7.0, 0.0]], 0).unwrap();
    let t = solve(&p, &SolverOptions::default()).unwrap();
    assert_eq!(t.order, vec![0, 1]);
    assert_eq!(t.cost, 2.5);
}

#[test]
fn single_vertex() {
    let p = TourProblem::open_ended(vec![vec![0.0]], 0).unwrap();
    let t = solve(&p, &SolverOptions::default()).unwrap();
    assert_eq!(t.order, vec![0]);
    assert_eq!(t.cost, 0.0);
}

#[test]
fn collinear_points_sweep_monotonically() {
    let pts: Vec<(f64, f64)> = [0.0, 3.0, 1.0, 4.0, 2.0, 6.0, 5.0]
        .iter()
        .map(|&x| (x, 0.0))
        .collect();
    let p = euclidean(&pts, 0);
    let t = solve(&p, &SolverOptions::default()).unwrap();
    assert_eq!(t.order, vec![0, 2, 4, 1, 3, 6, 5]);
    assert_eq!(t.cost, 6.0);
}

#[test]
fn validation_and_infeasibility() {
    assert!(TourProblem::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]], 0).is_err());
    assert!(TourProblem::new(vec![vec![0.0, 1.0]], 0).is_err());
    assert!(TourProblem::open_ended(vec![vec![0.0, -1.0], vec![1.0, 0.0]], 0).is_err());
    let p = TourProblem::open_ended(
        vec![vec![0.0, 1.0, f64::INFINITY], vec![0.0, 0.0, 1.0], vec![0.0, 1.0, 0.0]],
        0,
    )
    .unwrap();
    assert!(matches!(solve(&p, &SolverOptions::default()), Err(TspError::Infeasible { .. })));
}

#[test]
fn matches_exhaustive_optimum_on_random_instances() {
    let mut optimal = 0;
    let mut worst: f64 = 1.0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(3..=8);
        let pts: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.random_range(0.0..10.0), rng.random_range(0.0..10.0)))
            .collect();
        let p = euclidean(&pts, 0);
        let t = solve(&p, &SolverOptions { seed, ..Default::default() }).unwrap();
        let opt = brute_optimum(&p);
        if t.cost <= opt + 1e-9 {
            optimal += 1;
        }
        worst = worst.max(t.cost / opt.max(1e-12));
    }
    assert!(optimal >= 95, "{optimal}/100 optimal");
    assert!(worst <= 1.05, "worst ratio {worst}");
}

#[test]
fn dump_lists_matrix_and_tour() {
    let p = euclidean(&[(0.0, 0.0), (1.0, 0.0)], 0);
    let mut buf = Vec::new();
    p.dump(&[0, 1], &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), "n 2 start 0\n0 1\n0 0\ntour 0 1\ncost 1\n");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn output_is_two_opt_optimal_permutation(seed in any::<u64>(), n in 1usize..12, start_pick in 0usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let start = start_pick % n;
        let m: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.random_range(0.0..10.0)).collect()).collect();
        let p = TourProblem::open_ended(m, start).unwrap();
        let t = solve(&p, &SolverOptions { seed, restarts: 4, time_budget: None }).unwrap();
        let mut sorted = t.order.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (0..n).collect::<Vec<_>>());
        prop_assert_eq!(t.order[0], start);
        prop_assert!((p.path_cost(&t.order) - t.cost).abs() < 1e-9);
        prop_assert_eq!(p.cost(*t.order.last().unwrap(), start), 0.0);
        prop_assert!(is_two_opt_optimal(&p, &t.order));
        let again = solve(&p, &SolverOptions { seed, restarts: 4, time_budget: None }).unwrap();
        prop_assert_eq!(again, t);
    }
}
