use super::lbfgs::LbfgsParams;
use super::truncation::Truncation;
use crate::error::{Error, Result};
use crate::geometry::Cost;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Regularization strength of the final stage, in cost units.
    pub epsilon: f64,
    /// `‖∇J‖₁` stopping tolerance.
    pub tolerance: f64,
    pub truncation: Truncation,
    pub cost: Cost,
    pub memory: usize,
    /// Iteration cap per ε stage.
    pub max_iter: usize,
    /// Number of extra stages, each with ε ten times larger than the next.
    pub scaling_steps: usize,
    pub c1: f64,
    pub c2: f64,
    pub max_zoom: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-2,
            tolerance: 1e-3,
            truncation: Truncation::Geometric { tau: 1e-5 },
            cost: Cost::Quadratic,
            memory: 10,
            max_iter: 1000,
            scaling_steps: 0,
            c1: 1e-4,
            c2: 0.9,
            max_zoom: 30,
        }
    }
}

impl SolverConfig {
    pub fn new(epsilon: f64) -> Self {
        Self { epsilon, ..Default::default() }
    }

    pub fn with_truncation(mut self, t: Truncation) -> Self {
        self.truncation = t;
        self
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = tol;
        self
    }

    pub fn with_cost(mut self, cost: Cost) -> Self {
        self.cost = cost;
        self
    }

    pub fn with_scaling_steps(mut self, n: usize) -> Self {
        self.scaling_steps = n;
        self
    }

    pub fn with_max_iter(mut self, n: usize) -> Self {
        self.max_iter = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(name, format!("{v} must be positive and finite")))
            }
        };
        positive("epsilon", self.epsilon)?;
        positive("tolerance", self.tolerance)?;
        self.truncation.validate()?;
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            return Err(Error::param(
                "line search",
                format!("need 0 < c1 < c2 < 1, got c1={} c2={}", self.c1, self.c2),
            ));
        }
        if self.memory == 0 {
            return Err(Error::param("memory", "must be at least 1"));
        }
        if self.max_zoom == 0 {
            return Err(Error::param("max_zoom", "must be at least 1"));
        }
        Ok(())
    }

    pub(crate) fn lbfgs(&self) -> LbfgsParams {
        LbfgsParams {
            memory: self.memory,
            max_iter: self.max_iter,
            tolerance: self.tolerance,
            c1: self.c1,
            c2: self.c2,
            max_zoom: self.max_zoom,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(SolverConfig::default().validate().is_ok());
        assert!(SolverConfig::new(0.0).validate().is_err());
        assert!(SolverConfig::new(1.0).with_tolerance(-1.0).validate().is_err());
        let mut c = SolverConfig::new(1.0);
        c.c2 = 1e-5;
        assert!(c.validate().is_err());
    }
}
