use crate::error::{Error, Result};
use crate::Point;

/// Tolerance on `Σ ν_j = 1` and `Σ m_q = 1`.
pub const MASS_TOL: f64 = 1e-12;

/// Discrete target measure `ν = Σ ν_j δ_{y_j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetMeasure {
    dim: usize,
    points: Vec<Point>,
    weights: Vec<f64>,
}

impl TargetMeasure {
    pub fn new(dim: usize, points: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        check_dim(dim)?;
        if points.is_empty() {
            return Err(Error::Empty("target measure"));
        }
        if points.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                got: weights.len(),
            });
        }
        check_points(dim, &points)?;
        if let Some(j) = weights.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::Validation(format!(
                "target weight {j} = {} is not positive",
                weights[j]
            )));
        }
        let s: f64 = weights.iter().sum();
        if (s - 1.0).abs() > MASS_TOL {
            return Err(Error::Validation(format!("target weights sum to {s}, not 1")));
        }
        Ok(Self { dim, points, weights })
    }

    /// Rescale positive weights to unit total mass.
    pub fn normalized(dim: usize, points: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        let s: f64 = weights.iter().sum();
        if !(s > 0.0) {
            return Err(Error::ZeroMass);
        }
        Self::new(dim, points, weights.iter().map(|w| w / s).collect())
    }

    pub fn uniform(dim: usize, points: Vec<Point>) -> Result<Self> {
        let n = points.len();
        Self::new(dim, points, vec![1.0 / n as f64; n])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn max_weight(&self) -> f64 {
        self.weights.iter().copied().fold(f64::MIN, f64::max)
    }

    pub fn min_weight(&self) -> f64 {
        self.weights.iter().copied().fold(f64::MAX, f64::min)
    }

    /// Same weights on moved support points.
    pub fn with_points(&self, points: Vec<Point>) -> Result<Self> {
        Self::new(self.dim, points, self.weights.clone())
    }

    pub fn first_moment(&self) -> Point {
        weighted_mean(&self.points, &self.weights)
    }
}

/// Atomized source measure: quadrature locations with unit total mass.
///
/// `volumes` are the geometric quadrature weights and `density` the density
/// values at the atoms; `masses` is their normalized product.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceAtoms {
    dim: usize,
    points: Vec<Point>,
    masses: Vec<f64>,
    volumes: Vec<f64>,
    density: Vec<f64>,
    raw_mass: f64,
}

impl SourceAtoms {
    pub fn from_quadrature(
        dim: usize,
        points: Vec<Point>,
        volumes: Vec<f64>,
        density: Vec<f64>,
    ) -> Result<Self> {
        check_dim(dim)?;
        if points.is_empty() {
            return Err(Error::Empty("source atoms"));
        }
        for (name, v) in [("volumes", &volumes), ("density", &density)] {
            if v.len() != points.len() {
                return Err(Error::DimensionMismatch {
                    expected: points.len(),
                    got: v.len(),
                });
            }
            if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(Error::Validation(format!("atom {name} must be finite and >= 0")));
            }
        }
        check_points(dim, &points)?;
        let raw: Vec<f64> = volumes.iter().zip(&density).map(|(w, r)| w * r).collect();
        let raw_mass: f64 = raw.iter().sum();
        if !(raw_mass > 0.0) {
            return Err(Error::ZeroMass);
        }
        let masses = raw.iter().map(|m| m / raw_mass).collect();
        Ok(Self {
            dim,
            points,
            masses,
            volumes,
            density,
            raw_mass,
        })
    }

    /// Atoms with given (unnormalized) masses and unit density.
    pub fn from_masses(dim: usize, points: Vec<Point>, masses: Vec<f64>) -> Result<Self> {
        let n = masses.len();
        Self::from_quadrature(dim, points, masses, vec![1.0; n])
    }

    pub fn uniform(dim: usize, points: Vec<Point>) -> Result<Self> {
        let n = points.len();
        Self::from_masses(dim, points, vec![1.0; n])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    /// Total mass before normalization.
    pub fn raw_mass(&self) -> f64 {
        self.raw_mass
    }

    pub fn first_moment(&self) -> Point {
        weighted_mean(&self.points, &self.masses)
    }
}

pub(crate) fn weighted_mean(points: &[Point], weights: &[f64]) -> Point {
    let mut m = [0.0; 3];
    let mut s = 0.0;
    for (p, w) in points.iter().zip(weights) {
        for a in 0..3 {
            m[a] += w * p[a];
        }
        s += w;
    }
    m.map(|c| c / s)
}

fn check_dim(dim: usize) -> Result<()> {
    if !(1..=3).contains(&dim) {
        return Err(Error::Validation(format!("dimension {dim} not in 1..=3")));
    }
    Ok(())
}

fn check_points(dim: usize, points: &[Point]) -> Result<()> {
    for (i, p) in points.iter().enumerate() {
        if p.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("point coordinates"));
        }
        if p[dim..].iter().any(|&c| c != 0.0) {
            return Err(Error::Validation(format!(
                "point {i} has nonzero coordinates beyond dimension {dim}"
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn target_invariants() {
        let pts = vec![[0.0; 3], [1.0, 0.0, 0.0]];
        assert!(TargetMeasure::new(1, pts.clone(), vec![0.5, 0.5]).is_ok());
        assert!(TargetMeasure::new(1, pts.clone(), vec![0.5, 0.6]).is_err());
        assert!(TargetMeasure::new(1, pts.clone(), vec![1.0, 0.0]).is_err());
        assert!(TargetMeasure::new(1, vec![], vec![]).is_err());
        assert!(TargetMeasure::new(1, vec![[0.0, 1.0, 0.0]], vec![1.0]).is_err());
        let n = TargetMeasure::normalized(1, pts, vec![1.0, 3.0]).unwrap();
        assert_eq!(n.weights(), &[0.25, 0.75]);
        assert_eq!(n.max_weight(), 0.75);
        assert_eq!(n.min_weight(), 0.25);
    }

    #[test]
    fn source_masses_normalize() {
        let a = SourceAtoms::from_masses(1, vec![[0.0; 3], [1.0, 0.0, 0.0]], vec![1.0, 3.0]).unwrap();
        assert_eq!(a.masses(), &[0.25, 0.75]);
        assert_eq!(a.raw_mass(), 4.0);
        assert!((a.first_moment()[0] - 0.75).abs() < 1e-15);
        assert!(matches!(
            SourceAtoms::from_masses(1, vec![[0.0; 3]], vec![0.0]),
            Err(Error::ZeroMass)
        ));
    }
}
