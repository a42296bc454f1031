use crate::error::{Error, Result};

/// Smallest `|J|` accepted by the relative-error cutoffs.
pub const ABS_J_FLOOR: f64 = 1e-30;

/// Rule for choosing the cost cutoff of the truncated sums.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truncation {
    None,
    /// Drop terms whose contribution is provably below `delta_thr`.
    Pointwise { delta_thr: f64 },
    /// Relative functional error `τ`, using the running estimate of `D`.
    Integrated { tau: f64 },
    /// Relative functional error `τ` from the covering-cost bound.
    Geometric { tau: f64 },
}

impl Truncation {
    pub fn validate(&self) -> Result<()> {
        let (name, v) = match *self {
            Truncation::None => return Ok(()),
            Truncation::Pointwise { delta_thr } => ("delta_thr", delta_thr),
            Truncation::Integrated { tau } | Truncation::Geometric { tau } => ("tau", tau),
        };
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::param(name, format!("{v} not in (0, 1)")));
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            Truncation::None => "none",
            Truncation::Pointwise { .. } => "pointwise",
            Truncation::Integrated { .. } => "integrated",
            Truncation::Geometric { .. } => "geometric",
        }
    }

    /// Cutoff for the current state; `None` disables truncation.
    pub fn cutoff(&self, state: &TruncationState, epsilon: f64) -> Result<Option<f64>> {
        Ok(match *self {
            Truncation::None => None,
            Truncation::Pointwise { delta_thr } => Some(cutoff_pointwise(
                state.max_psi,
                epsilon,
                state.nu_max,
                delta_thr,
            )),
            Truncation::Integrated { tau } => Some(cutoff_integrated(state, epsilon, tau)?),
            Truncation::Geometric { tau } => Some(cutoff_geometric(state, epsilon, tau)?),
        })
    }

    /// Cutoff used before any functional value is known (`|J| = 1`).
    pub fn bootstrap_cutoff(&self, state: &TruncationState, epsilon: f64) -> Result<Option<f64>> {
        match *self {
            Truncation::None | Truncation::Pointwise { .. } => self.cutoff(state, epsilon),
            Truncation::Integrated { tau } | Truncation::Geometric { tau } => {
                let s = TruncationState { abs_j: 1.0, ..*state };
                Ok(Some(cutoff_geometric(&s, epsilon, tau)?))
            }
        }
    }
}

/// Inputs of the cutoff formulas, refreshed once per accepted iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationState {
    pub cutoff: Option<f64>,
    /// `ln D` from the most recent accepted evaluation.
    pub ln_d: f64,
    pub abs_j: f64,
    pub max_psi: f64,
    pub min_psi: f64,
    pub nu_max: f64,
    pub nu_min: f64,
    /// Covering cost.
    pub c0: f64,
}

impl TruncationState {
    pub fn new(psi: &[f64], nu: &[f64], c0: f64) -> Self {
        let mut s = Self {
            cutoff: None,
            ln_d: 0.0,
            abs_j: 1.0,
            max_psi: 0.0,
            min_psi: 0.0,
            nu_max: nu.iter().copied().fold(f64::MIN, f64::max),
            nu_min: nu.iter().copied().fold(f64::MAX, f64::min),
            c0,
        };
        s.set_potential(psi);
        s
    }

    pub fn set_potential(&mut self, psi: &[f64]) {
        self.max_psi = psi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        self.min_psi = psi.iter().copied().fold(f64::INFINITY, f64::min);
    }

    /// Potential range `Γ = M − m`.
    pub fn gamma(&self) -> f64 {
        self.max_psi - self.min_psi
    }

    fn checked_abs_j(&self) -> Result<f64> {
        if !(self.abs_j >= ABS_J_FLOOR) {
            return Err(Error::DegenerateFunctional(self.abs_j));
        }
        Ok(self.abs_j)
    }
}

/// `M + ε ln(ν̄ / δ_thr)`.
pub fn cutoff_pointwise(max_psi: f64, epsilon: f64, nu_max: f64, delta_thr: f64) -> f64 {
    max_psi + epsilon * (nu_max / delta_thr).ln()
}

/// `max(C₀, M + ε ln(ε D / (τ |J|)))`.
pub fn cutoff_integrated(state: &TruncationState, epsilon: f64, tau: f64) -> Result<f64> {
    let j = state.checked_abs_j()?;
    let c = state.max_psi + epsilon * (epsilon.ln() + state.ln_d - (tau * j).ln());
    Ok(c.max(state.c0))
}

/// `max(C₀, C₀ + Γ + ε ln(ε / (ν̲ τ |J|)))`.
pub fn cutoff_geometric(state: &TruncationState, epsilon: f64, tau: f64) -> Result<f64> {
    let j = state.checked_abs_j()?;
    let c = state.c0 + state.gamma() + epsilon * (epsilon / (state.nu_min * tau * j)).ln();
    Ok(c.max(state.c0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(c0: f64, gamma: f64, nu_min: f64, ln_d: f64) -> TruncationState {
        TruncationState {
            cutoff: None,
            ln_d,
            abs_j: 1.0,
            max_psi: gamma,
            min_psi: 0.0,
            nu_max: 1.0,
            nu_min,
            c0,
        }
    }

    #[test]
    fn pointwise_examples() {
        assert!((cutoff_pointwise(0.0, 0.01, 1.0, 1e-12) - 0.27631).abs() < 5e-6);
        assert_eq!(cutoff_pointwise(0.0, 0.01, 0.3, 0.3), 0.0);
        assert!((cutoff_pointwise(0.4, 1e-300, 1.0, 1e-12) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn integrated_examples() {
        let s = state(0.0, 0.0, 0.5, 0.0);
        assert!((cutoff_integrated(&s, 0.01, 1e-4).unwrap() - 0.04605).abs() < 5e-6);
        // ln argument equal to one leaves M, then the C₀ floor applies
        let s = state(-1.0, 0.0, 0.5, (1e-4f64 / 0.01).ln());
        assert!(cutoff_integrated(&s, 0.01, 1e-4).unwrap().abs() < 1e-15);
        let s = state(0.2, 0.0, 0.5, (1e-4f64 / 0.01).ln());
        assert_eq!(cutoff_integrated(&s, 0.01, 1e-4).unwrap(), 0.2);
        let s = state(-10.0, 0.0, 0.5, 0.0);
        let a = cutoff_integrated(&s, 0.01, 1e-5).unwrap();
        let b = cutoff_integrated(&s, 0.01, 1e-4).unwrap();
        assert!(b < a);
    }

    #[test]
    fn geometric_examples() {
        let s = state(1.0, 0.0, 0.5, 0.0);
        assert!((cutoff_geometric(&s, 0.01, 1e-4).unwrap() - 1.052983).abs() < 5e-7);
        let big_j = TruncationState { abs_j: 1e30, ..s };
        assert_eq!(cutoff_geometric(&big_j, 0.01, 1e-4).unwrap(), 1.0);
        let a = cutoff_geometric(&state(1.0, 0.3, 0.5, 0.0), 0.01, 1e-4).unwrap();
        let b = cutoff_geometric(&state(1.0, 0.55, 0.5, 0.0), 0.01, 1e-4).unwrap();
        assert!((b - a - 0.25).abs() < 1e-14);
    }

    #[test]
    fn degenerate_functional() {
        let s = TruncationState { abs_j: 1e-31, ..state(1.0, 0.0, 0.5, 0.0) };
        assert!(matches!(cutoff_geometric(&s, 0.01, 1e-4), Err(Error::DegenerateFunctional(_))));
        assert!(cutoff_integrated(&s, 0.01, 1e-4).is_err());
    }

    #[test]
    fn parameter_ranges() {
        assert!(Truncation::Geometric { tau: 1.0 }.validate().is_err());
        assert!(Truncation::Pointwise { delta_thr: 0.0 }.validate().is_err());
        assert!(Truncation::Integrated { tau: 1e-3 }.validate().is_ok());
    }
}
