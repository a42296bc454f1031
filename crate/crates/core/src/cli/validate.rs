//! Self-checks run by `rsot validate`: finite-difference gradients and the
//! Sinkhorn oracle on random instances, plus diagnostics for input files.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::geometry::Cost;
use crate::measures::{SourceAtoms, TargetMeasure};
use crate::solver::{evaluate_dual, sinkhorn_oracle, solve, SolverConfig, Truncation};
use crate::Point;

pub const GRADIENT_TOL: f64 = 1e-5;
pub const ORACLE_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub gradient_instances: usize,
    pub gradient_max_rel_error: f64,
    pub oracle_instances: usize,
    pub oracle_max_linf: f64,
    pub measure_messages: Vec<String>,
    pub passed: bool,
}

pub(crate) fn random_instance(rng: &mut ChaCha8Rng, dim: usize, n: usize, nq: usize) -> Result<(SourceAtoms, TargetMeasure)> {
    let pt = |rng: &mut ChaCha8Rng| -> Point {
        let mut p = [0.0; 3];
        p.iter_mut().take(dim).for_each(|c| *c = rng.random::<f64>());
        p
    };
    let ys: Vec<Point> = (0..n).map(|_| pt(rng)).collect();
    let w: Vec<f64> = (0..n).map(|_| 0.2 + rng.random::<f64>()).collect();
    let xs: Vec<Point> = (0..nq).map(|_| pt(rng)).collect();
    let m: Vec<f64> = (0..nq).map(|_| 0.5 + rng.random::<f64>()).collect();
    Ok((SourceAtoms::from_masses(dim, xs, m)?, TargetMeasure::normalized(dim, ys, w)?))
}

/// Largest `|g_k − (J(ψ+he_k) − J(ψ−he_k))/2h| / max(|g_k|, 10⁻³‖g‖_∞)`.
pub fn gradient_check(atoms: &SourceAtoms, target: &TargetMeasure, psi: &[f64], epsilon: f64) -> Result<f64> {
    let base = evaluate_dual(atoms, target, Cost::Quadratic, psi, epsilon)?;
    let gmax = base.gradient.iter().fold(0.0f64, |a, g| a.max(g.abs()));
    let h = 1e-5 * epsilon.max(1e-2);
    let mut worst = 0.0f64;
    let mut p = psi.to_vec();
    for k in 0..psi.len() {
        p[k] = psi[k] + h;
        let fp = evaluate_dual(atoms, target, Cost::Quadratic, &p, epsilon)?.value;
        p[k] = psi[k] - h;
        let fm = evaluate_dual(atoms, target, Cost::Quadratic, &p, epsilon)?.value;
        p[k] = psi[k];
        let fd = (fp - fm) / (2.0 * h);
        let g = base.gradient[k];
        worst = worst.max((g - fd).abs() / g.abs().max(1e-3 * gmax).max(1e-300));
    }
    Ok(worst)
}

/// L∞ distance between the gauge-fixed L-BFGS and Sinkhorn potentials.
pub fn oracle_check(atoms: &SourceAtoms, target: &TargetMeasure, epsilon: f64) -> Result<f64> {
    let cfg = SolverConfig::new(epsilon)
        .with_truncation(Truncation::None)
        .with_tolerance(1e-10)
        .with_max_iter(10_000);
    let s = solve(atoms, target, &cfg, None)?;
    let o = sinkhorn_oracle(atoms, target, Cost::Quadratic, epsilon, 1e-12)?;
    Ok(s.potential.values().iter().zip(&o.psi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

pub fn run_checks(seed: u64, instances: usize, measure_messages: Vec<String>) -> Result<ValidationReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut grad = 0.0f64;
    for i in 0..instances {
        let dim = 1 + i % 2;
        let n = rng.random_range(2..=20);
        let nq = rng.random_range(20..=200);
        let eps = if i % 2 == 0 { 1.0 } else { 0.1 };
        let (a, t) = random_instance(&mut rng, dim, n, nq)?;
        let psi: Vec<f64> = (0..n).map(|_| rng.random_range(-0.1..0.1)).collect();
        grad = grad.max(gradient_check(&a, &t, &psi, eps)?);
    }
    let oracle_n = instances.div_ceil(4);
    let mut orc = 0.0f64;
    for i in 0..oracle_n {
        let dim = 1 + i % 2;
        let n = rng.random_range(2..=10);
        let nq = rng.random_range(20..=100);
        let eps = if i % 2 == 0 { 1.0 } else { 0.1 };
        let (a, t) = random_instance(&mut rng, dim, n, nq)?;
        orc = orc.max(oracle_check(&a, &t, eps)?);
    }
    let passed = grad <= GRADIENT_TOL && orc <= ORACLE_TOL && measure_messages.is_empty();
    Ok(ValidationReport {
        gradient_instances: instances,
        gradient_max_rel_error: grad,
        oracle_instances: oracle_n,
        oracle_max_linf: orc,
        measure_messages,
        passed,
    })
}
