//! Log-domain Sinkhorn on the fully discrete atomized problem, used as an
//! independent reference for the dual solver.

use super::eval::log_sum_exp;
use super::potential::gauge_fix;
use crate::error::{Error, Result};
use crate::geometry::Cost;
use crate::measures::{SourceAtoms, TargetMeasure};

pub const SINKHORN_MAX_ITER: usize = 100_000;

#[derive(Debug, Clone)]
pub struct SinkhornResult {
    /// Target potential, gauge-fixed to zero `ν`-mean.
    pub psi: Vec<f64>,
    /// Source potential in the matching gauge.
    pub phi: Vec<f64>,
    pub iterations: usize,
    /// L¹ error of the target marginal at return.
    pub marginal_error: f64,
}

/// Alternate `φ_q = −ε ln Σ_j ν_j e^{(ψ_j − c_qj)/ε}` and
/// `ψ_j = −ε ln Σ_q m_q e^{(φ_q − c_qj)/ε}` until the target marginal of the
/// plan `m_q ν_j e^{(φ_q + ψ_j − c_qj)/ε}` is within `tol` in L¹.
pub fn sinkhorn_oracle(
    atoms: &SourceAtoms,
    target: &TargetMeasure,
    cost: Cost,
    epsilon: f64,
    tol: f64,
) -> Result<SinkhornResult> {
    let (nq, n) = (atoms.len(), target.len());
    if nq.saturating_mul(n) > 1_000_000 {
        return Err(Error::param("sinkhorn oracle", format!("{nq}x{n} plan is too large")));
    }
    let c: Vec<Vec<f64>> = atoms
        .points()
        .iter()
        .map(|x| target.points().iter().map(|y| cost.eval(x, y)).collect())
        .collect();
    let ln_m: Vec<f64> = atoms.masses().iter().map(|m| m.ln()).collect();
    let ln_nu: Vec<f64> = target.weights().iter().map(|w| w.ln()).collect();
    let mut psi = vec![0.0; n];
    let mut phi = vec![0.0; nq];
    for it in 1..=SINKHORN_MAX_ITER {
        for q in 0..nq {
            phi[q] = -epsilon * log_sum_exp((0..n).map(|j| ln_nu[j] + (psi[j] - c[q][j]) / epsilon));
        }
        // Target marginal after the source update.
        let mut err = 0.0;
        for j in 0..n {
            let lse = log_sum_exp(
                (0..nq)
                    .filter(|&q| atoms.masses()[q] > 0.0)
                    .map(|q| ln_m[q] + (phi[q] - c[q][j]) / epsilon),
            );
            err += (target.weights()[j] * (lse + psi[j] / epsilon).exp() - target.weights()[j]).abs();
        }
        if err <= tol {
            let shift: f64 = psi.iter().zip(target.weights()).map(|(p, w)| p * w).sum();
            return Ok(SinkhornResult {
                psi: gauge_fix(&psi, target.weights()),
                phi: phi.iter().map(|p| p + shift).collect(),
                iterations: it,
                marginal_error: err,
            });
        }
        for j in 0..n {
            psi[j] = -epsilon
                * log_sum_exp(
                    (0..nq)
                        .filter(|&q| atoms.masses()[q] > 0.0)
                        .map(|q| ln_m[q] + (phi[q] - c[q][j]) / epsilon),
                );
        }
    }
    Err(Error::IterationCap(SINKHORN_MAX_ITER))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_target_gives_zero() {
        let a = SourceAtoms::uniform(1, vec![[0.0; 3], [1.0, 0.0, 0.0]]).unwrap();
        let t = TargetMeasure::new(1, vec![[0.3, 0.0, 0.0]], vec![1.0]).unwrap();
        let r = sinkhorn_oracle(&a, &t, Cost::Quadratic, 0.1, 1e-12).unwrap();
        assert_eq!(r.psi, vec![0.0]);
    }

    #[test]
    fn symmetric_instance_gives_zero() {
        let pts = vec![[0.0; 3], [1.0, 0.0, 0.0]];
        let a = SourceAtoms::uniform(1, pts.clone()).unwrap();
        let t = TargetMeasure::uniform(1, pts).unwrap();
        let r = sinkhorn_oracle(&a, &t, Cost::Quadratic, 1.0, 1e-13).unwrap();
        assert!(r.psi.iter().all(|p| p.abs() < 1e-12));
    }
}
