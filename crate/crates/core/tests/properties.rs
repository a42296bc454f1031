//! Property tests for the invariants of the dual functional, the measure
//! hierarchies, the transport maps and the sphere helpers.

mod common;

use common::{naive_dual, random_instance};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rsot::applications::{barycenter_general_step, SphereManifold};
use rsot::geometry::{atomize, Cost, DensityField, QuadratureSpec, SimplicialMesh};
use rsot::maps::PlanView;
use rsot::measures::{build_target_hierarchy, kmeans, TargetMeasure};
use rsot::solver::{
    cutoff_geometric, cutoff_integrated, evaluate_dual, Candidates, DualProblem, TruncationState,
};
use rsot::Point;

fn random_psi(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

fn same_candidates(a: &Candidates, b: &Candidates, nq: usize) -> bool {
    a.pairs() == b.pairs() && (0..nq).all(|q| a.targets_of(q) == b.targets_of(q))
}

fn unit_vector(rng: &mut ChaCha8Rng) -> Point {
    SphereManifold.sample(rng)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gradient_matches_central_differences(seed in any::<u64>(), dim in 1usize..=3, eps in prop_oneof![Just(1.0), Just(0.1)]) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(2..=12);
        let (a, t) = random_instance(&mut rng, dim, n, 60);
        let psi = random_psi(&mut rng, n, 0.1);
        let g = evaluate_dual(&a, &t, Cost::Quadratic, &psi, eps).unwrap().gradient;
        let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut p = psi.clone();
        for k in 0..n {
            let h = 1e-6 * (1.0 + psi[k].abs());
            p[k] = psi[k] + h;
            let fp = evaluate_dual(&a, &t, Cost::Quadratic, &p, eps).unwrap().value;
            p[k] = psi[k] - h;
            let fm = evaluate_dual(&a, &t, Cost::Quadratic, &p, eps).unwrap().value;
            p[k] = psi[k];
            let fd = (fp - fm) / (2.0 * h);
            let rel = (fd - g[k]).abs() / g[k].abs().max(1e-3 * gmax);
            prop_assert!(rel <= 1e-5, "k={k} g={} fd={fd} rel={rel}", g[k]);
        }
    }

    #[test]
    fn gradient_sums_to_zero_and_matches_oracle(seed in any::<u64>(), dim in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(1..=15);
        let (a, t) = random_instance(&mut rng, dim, n, 80);
        let psi = random_psi(&mut rng, n, 0.5);
        let eps = 0.05;
        let r = evaluate_dual(&a, &t, Cost::Quadratic, &psi, eps).unwrap();
        prop_assert!(r.gradient.iter().sum::<f64>().abs() <= 1e-10);
        let (j, g) = naive_dual(&a, &t, &psi, eps);
        prop_assert!((j - r.value).abs() <= 1e-12 * j.abs().max(1.0));
        for (x, y) in g.iter().zip(&r.gradient) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn gauge_invariance(seed in any::<u64>(), c in prop_oneof![Just(1.0), Just(-1.0), Just(100.0), Just(-100.0)]) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(2..=20);
        let (a, t) = random_instance(&mut rng, 2, n, 150);
        let psi = random_psi(&mut rng, n, 0.1);
        let shifted: Vec<f64> = psi.iter().map(|p| p + c).collect();
        let eps = 0.02;
        let p = DualProblem::new(&a, &t, Cost::Quadratic).unwrap();
        let full = p.candidates(None).unwrap();
        let r0 = p.evaluate(&psi, eps, &full).unwrap();
        let r1 = p.evaluate(&shifted, eps, &full).unwrap();
        prop_assert!((r0.value - r1.value).abs() <= 1e-10, "{} vs {}", r0.value, r1.value);
        for (x, y) in r0.gradient.iter().zip(&r1.gradient) {
            prop_assert!((x - y).abs() <= 1e-10);
        }

        let c0 = p.covering_cost();
        let state = |psi: &[f64], r: &rsot::solver::EvalResult| TruncationState {
            abs_j: r.value.abs(),
            ln_d: r.ln_d,
            ..TruncationState::new(psi, t.weights(), c0)
        };
        let (s0, s1) = (state(&psi, &r0), state(&shifted, &r1));
        for tau in [1e-3, 1e-6] {
            let geo = [cutoff_geometric(&s0, eps, tau).unwrap(), cutoff_geometric(&s1, eps, tau).unwrap()];
            let int = [cutoff_integrated(&s0, eps, tau).unwrap(), cutoff_integrated(&s1, eps, tau).unwrap()];
            for [k0, k1] in [geo, int] {
                prop_assert!((k0 - k1).abs() <= 1e-9 * k0.abs().max(1.0), "{k0} vs {k1}");
                let (c0s, c1s) = (p.candidates(Some(k0)).unwrap(), p.candidates(Some(k1)).unwrap());
                prop_assert!(same_candidates(&c0s, &c1s, a.len()));
                let j0 = p.evaluate(&psi, eps, &c0s).unwrap().value;
                let j1 = p.evaluate(&shifted, eps, &c1s).unwrap().value;
                prop_assert!((j0 - j1).abs() <= 1e-10, "{j0} vs {j1}");
            }
        }
    }

    #[test]
    fn dual_is_convex(seed in any::<u64>(), dim in 1usize..=3, s in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(2..=10);
        let (a, t) = random_instance(&mut rng, dim, n, 50);
        let (u, v) = (random_psi(&mut rng, n, 1.0), random_psi(&mut rng, n, 1.0));
        let w: Vec<f64> = u.iter().zip(&v).map(|(x, y)| s * x + (1.0 - s) * y).collect();
        let f = |p: &[f64]| evaluate_dual(&a, &t, Cost::Quadratic, p, 0.1).unwrap().value;
        prop_assert!(f(&w) <= s * f(&u) + (1.0 - s) * f(&v) + 1e-12);
    }

    #[test]
    fn target_hierarchy_conserves_mass(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(20..=120);
        let (_, t) = random_instance(&mut rng, 2, n, 1);
        let sizes = [3, 9, n];
        let h = build_target_hierarchy(&t, &sizes, seed).unwrap();
        prop_assert_eq!(h.levels().iter().map(TargetMeasure::len).collect::<Vec<_>>(), sizes.to_vec());
        for l in 0..h.num_levels() - 1 {
            let (coarse, fine, par) = (h.level(l), h.level(l + 1), h.parents(l));
            let mut sums = vec![0.0; coarse.len()];
            for (&p, &w) in par.iter().zip(fine.weights()) {
                sums[p] += w;
            }
            for (s, w) in sums.iter().zip(coarse.weights()) {
                prop_assert!((s - w).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn kmeans_is_deterministic_and_exact(seed in any::<u64>(), dim in 1usize..=3, k in 1usize..=12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (_, t) = random_instance(&mut rng, dim, 40, 1);
        let a = kmeans(t.points(), Some(t.weights()), k, seed).unwrap();
        let b = kmeans(t.points(), Some(t.weights()), k, seed).unwrap();
        prop_assert_eq!(&a.assignment, &b.assignment);
        prop_assert_eq!(&a.centroids, &b.centroids);
        prop_assert_eq!(a.k(), k);
        let mut used = vec![false; k];
        a.assignment.iter().for_each(|&c| used[c] = true);
        prop_assert!(used.iter().all(|&u| u));
    }

    #[test]
    fn atomize_conserves_mass(seed in any::<u64>(), n in 1usize..=6, order in 1u8..=2, dim in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mesh = match dim {
            1 => SimplicialMesh::interval(0.0, 1.0, 4 * n).unwrap(),
            2 => SimplicialMesh::unit_square(n).unwrap(),
            _ => SimplicialMesh::unit_cube(n.min(3)).unwrap(),
        };
        let vals: Vec<f64> = (0..mesh.vertices().len()).map(|_| rng.random_range(0.1..2.0)).collect();
        let rho = DensityField::new(vals).unwrap();
        let a = atomize(&mesh, &rho, QuadratureSpec::new(order).unwrap()).unwrap();
        let exact = rho.integral(&mesh);
        prop_assert!((a.raw_mass() - exact).abs() <= 1e-12 * exact);
        prop_assert!((a.masses().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn plan_rows_and_maps(seed in any::<u64>(), dim in 1usize..=3, c in -50.0f64..50.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(1..=10);
        let (a, t) = random_instance(&mut rng, dim, n, 60);
        let psi = random_psi(&mut rng, n, 0.2);
        let shifted: Vec<f64> = psi.iter().map(|p| p + c).collect();
        let eps = 0.05;
        let view = PlanView::new(&a, &t, &psi, eps, Cost::Quadratic, None).unwrap();
        for q in 0..a.len() {
            let row = view.plan_density(q);
            prop_assert!(row.iter().all(|&(_, p)| p >= 0.0));
            prop_assert!((row.iter().map(|r| r.1).sum::<f64>() - 1.0).abs() <= 1e-12);
        }
        let other = PlanView::new(&a, &t, &shifted, eps, Cost::Quadratic, None).unwrap();
        prop_assert_eq!(view.modal_map().indices, other.modal_map().indices);

        let map = view.barycentric_map();
        let mut lhs = [0.0; 3];
        for (img, m) in map.images.iter().zip(a.masses()) {
            (0..3).for_each(|d| lhs[d] += m * img[d]);
        }
        let mut rhs = [0.0; 3];
        for (y, nu) in t.points().iter().zip(view.target_marginal()) {
            (0..3).for_each(|d| rhs[d] += nu * y[d]);
        }
        for d in 0..3 {
            prop_assert!((lhs[d] - rhs[d]).abs() <= 1e-12);
        }
    }

    #[test]
    fn weight_update_stays_on_simplex(seed in any::<u64>(), k in 1usize..=3, alpha in 0.1f64..50.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(1..=12);
        let pts: Vec<Point> = (0..n).map(|_| [rng.random::<f64>(), rng.random::<f64>(), 0.0]).collect();
        let mut w: Vec<f64> = (0..n).map(|_| rng.random_range(1e-6..1.0)).collect();
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= s);
        let pots: Vec<Vec<f64>> = (0..k).map(|_| random_psi(&mut rng, n, 5.0)).collect();
        let bars: Vec<Vec<Point>> = (0..k)
            .map(|_| (0..n).map(|_| [rng.random::<f64>(), rng.random::<f64>(), 0.0]).collect())
            .collect();
        let lambda = vec![1.0 / k as f64; k];
        let (_, nw) = barycenter_general_step(&pts, &w, &pots, &bars, &lambda, alpha, 1.0).unwrap();
        prop_assert!(nw.iter().all(|&x| x > 0.0 && x.is_finite()));
        prop_assert!((nw.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn sphere_exp_inverts_log(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (p, q) = (unit_vector(&mut rng), unit_vector(&mut rng));
        let s = SphereManifold;
        prop_assume!(s.distance(&p, &q) < std::f64::consts::PI - 1e-2);
        let v = s.log(&p, &q).unwrap();
        let dot: f64 = (0..3).map(|d| v[d] * p[d]).sum();
        prop_assert!(dot.abs() <= 1e-12);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!((norm - s.distance(&p, &q)).abs() <= 1e-12);
        let r = s.exp(&p, &v);
        prop_assert!((0..3).all(|d| (r[d] - q[d]).abs() <= 1e-10));
        prop_assert!((r.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(3))]

    #[test]
    fn geometric_truncation_error_below_tau(seed in any::<u64>(), eps in prop_oneof![Just(1e-1), Just(1e-2)]) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, t) = random_instance(&mut rng, 2, 200, 2000);
        let psi = random_psi(&mut rng, 200, 0.05);
        let p = DualProblem::new(&a, &t, Cost::Quadratic).unwrap();
        let full = p.evaluate(&psi, eps, &p.candidates(None).unwrap()).unwrap();
        for tau in [1e-3, 1e-5] {
            let st = TruncationState { abs_j: full.value.abs(), ..TruncationState::new(&psi, t.weights(), p.covering_cost()) };
            let cut = cutoff_geometric(&st, eps, tau).unwrap();
            let tr = p.evaluate(&psi, eps, &p.candidates(Some(cut)).unwrap()).unwrap();
            let err = (tr.value - full.value).abs() / full.value.abs();
            prop_assert!(err <= tau, "tau={tau} err={err}");
        }
    }

    #[test]
    fn level_sizes_must_increase(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (_, t) = random_instance(&mut rng, 2, 30, 1);
        prop_assert!(build_target_hierarchy(&t, &[10, 10, 30], seed).is_err());
        prop_assert!(build_target_hierarchy(&t, &[20, 10, 30], seed).is_err());
        prop_assert!(build_target_hierarchy(&t, &[5, 30], seed).is_ok());
    }
}
