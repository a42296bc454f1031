use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gauge {
    Raw,
    /// `Σ_j ν_j ψ_j = 0`.
    MeanZero,
}

/// Target-side dual potential `ψ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPotential {
    values: Vec<f64>,
    gauge: Gauge,
}

impl DualPotential {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dual potential"));
        }
        Ok(Self { values, gauge: Gauge::Raw })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![0.0; n],
            gauge: Gauge::Raw,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn gauge(&self) -> Gauge {
        self.gauge
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Representative with zero `ν`-weighted mean.
    pub fn gauge_fixed(&self, nu: &[f64]) -> Self {
        Self {
            values: gauge_fix(&self.values, nu),
            gauge: Gauge::MeanZero,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,psi\n");
        for (j, v) in self.values.iter().enumerate() {
            let _ = writeln!(s, "{j},{v:?}");
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut values = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (i == 0 && line.starts_with("index")) {
                continue;
            }
            let bad = |msg: String| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg,
            };
            let (idx, v) = line
                .split_once(',')
                .ok_or_else(|| bad("expected index,psi".into()))?;
            let idx: usize = idx.trim().parse().map_err(|e| bad(format!("bad index: {e}")))?;
            if idx != values.len() {
                return Err(bad(format!("index {idx} out of order")));
            }
            values.push(v.trim().parse().map_err(|e| bad(format!("bad value: {e}")))?);
        }
        Self::new(values)
    }
}

pub fn gauge_fix(psi: &[f64], nu: &[f64]) -> Vec<f64> {
    let mean: f64 = psi.iter().zip(nu).map(|(p, w)| p * w).sum::<f64>() / nu.iter().sum::<f64>();
    psi.iter().map(|p| p - mean).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauge_fixing_removes_weighted_mean() {
        let p = DualPotential::new(vec![1.0, 3.0]).unwrap();
        let g = p.gauge_fixed(&[0.25, 0.75]);
        assert_eq!(g.gauge(), Gauge::MeanZero);
        assert_eq!(g.values(), &[-1.5, 0.5]);
        assert!(DualPotential::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = DualPotential::new(vec![0.1, -1.0 / 3.0, 2e-300]).unwrap();
        let f = dir.path().join("potential.csv");
        p.write_csv(&f).unwrap();
        assert_eq!(DualPotential::load_csv(&f).unwrap(), p);
    }
}
