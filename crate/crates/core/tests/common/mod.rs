//! Fixtures and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rsot::geometry::{atomize, DensityField, QuadratureSpec, SimplicialMesh};
use rsot::measures::{SourceAtoms, TargetMeasure};
use rsot::Point;

fn sq(x: &Point, y: &Point) -> f64 {
    0.5 * (0..3).map(|d| (x[d] - y[d]).powi(2)).sum::<f64>()
}

/// `J(ψ)` and `∇J` by a direct double loop with per-atom max shift.
pub fn naive_dual(a: &SourceAtoms, t: &TargetMeasure, psi: &[f64], eps: f64) -> (f64, Vec<f64>) {
    let nu = t.weights();
    let mut j = -psi.iter().zip(nu).map(|(p, n)| p * n).sum::<f64>();
    let mut g: Vec<f64> = nu.iter().map(|n| -n).collect();
    for (x, &m) in a.points().iter().zip(a.masses()) {
        let e: Vec<f64> = (0..t.len()).map(|k| nu[k].ln() + (psi[k] - sq(x, &t.points()[k])) / eps).collect();
        let mx = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = e.iter().map(|v| (v - mx).exp()).sum();
        j += m * eps * (mx + s.ln());
        for k in 0..t.len() {
            g[k] += m * (e[k] - mx).exp() / s;
        }
    }
    (j, g)
}

pub fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

pub fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn gauge(psi: &[f64], nu: &[f64]) -> Vec<f64> {
    let m: f64 = psi.iter().zip(nu).map(|(p, n)| p * n).sum();
    psi.iter().map(|p| p - m).collect()
}

/// Midpoint atoms on [0, 1] against y = (0.2, 0.8), ν = (0.25, 0.75).
pub fn fixture_1d(n: usize) -> (SourceAtoms, TargetMeasure) {
    let pts = (0..n).map(|i| [(i as f64 + 0.5) / n as f64, 0.0, 0.0]).collect();
    let a = SourceAtoms::uniform(1, pts).unwrap();
    let t = TargetMeasure::new(1, vec![[0.2, 0.0, 0.0], [0.8, 0.0, 0.0]], vec![0.25, 0.75]).unwrap();
    (a, t)
}

pub fn unit_square_atoms(n: usize) -> SourceAtoms {
    let mesh = SimplicialMesh::unit_square(n).unwrap();
    let rho = DensityField::constant(&mesh, 1.0).unwrap();
    atomize(&mesh, &rho, QuadratureSpec::new(1).unwrap()).unwrap()
}

pub fn uniform_targets(n: usize, dim: usize, seed: u64) -> TargetMeasure {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts = (0..n)
        .map(|_| {
            let mut p = [0.0; 3];
            p.iter_mut().take(dim).for_each(|c| *c = rng.random::<f64>());
            p
        })
        .collect();
    TargetMeasure::uniform(dim, pts).unwrap()
}

/// Random points in the unit cube, random positive weights.
pub fn random_instance(rng: &mut ChaCha8Rng, dim: usize, n: usize, nq: usize) -> (SourceAtoms, TargetMeasure) {
    let mut pt = || {
        let mut p = [0.0; 3];
        p.iter_mut().take(dim).for_each(|c| *c = rng.random::<f64>());
        p
    };
    let ys: Vec<Point> = (0..n).map(|_| pt()).collect();
    let xs: Vec<Point> = (0..nq).map(|_| pt()).collect();
    let w: Vec<f64> = (0..n).map(|_| 0.2 + rng.random::<f64>()).collect();
    let m: Vec<f64> = (0..nq).map(|_| 0.5 + rng.random::<f64>()).collect();
    (
        SourceAtoms::from_masses(dim, xs, m).unwrap(),
        TargetMeasure::normalized(dim, ys, w).unwrap(),
    )
}
