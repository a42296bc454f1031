use std::fmt;

use crate::error::{Error, Result};
use crate::Point;

/// Transport cost between a source location and a target point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cost {
    /// `½‖x − y‖²`.
    Quadratic,
    /// `½‖x − y‖^p` for an even exponent `p ≥ 2`.
    EvenPower(u32),
    /// `d_g(x, y)²` on the unit sphere, `d_g = arccos(x·y)`.
    SquaredGeodesic,
}

impl Cost {
    pub fn even_power(p: u32) -> Result<Self> {
        if p < 2 || !p.is_multiple_of(2) {
            return Err(Error::param("cost exponent", format!("{p} is not an even integer >= 2")));
        }
        Ok(if p == 2 { Cost::Quadratic } else { Cost::EvenPower(p) })
    }

    #[inline]
    pub fn eval(&self, x: &Point, y: &Point) -> f64 {
        match *self {
            Cost::Quadratic => 0.5 * dist2(x, y),
            Cost::EvenPower(p) => 0.5 * dist2(x, y).powi(p as i32 / 2),
            Cost::SquaredGeodesic => {
                let g = geodesic(x, y);
                g * g
            }
        }
    }

    /// Euclidean radius `r` with `c(x, y) < C ⇔ ‖x − y‖ < r`.
    pub fn ball_radius(&self, cutoff: f64) -> Result<f64> {
        match *self {
            Cost::Quadratic => Ok((2.0 * cutoff.max(0.0)).sqrt()),
            Cost::EvenPower(p) => Ok((2.0 * cutoff.max(0.0)).powf(1.0 / p as f64)),
            Cost::SquaredGeodesic => Err(Error::UnsupportedCost(self.to_string())),
        }
    }

    pub fn supports_ball_query(&self) -> bool {
        !matches!(self, Cost::SquaredGeodesic)
    }

    pub fn is_quadratic(&self) -> bool {
        matches!(self, Cost::Quadratic)
    }
}

impl fmt::Display for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cost::Quadratic => write!(f, "quadratic"),
            Cost::EvenPower(p) => write!(f, "power{p}"),
            Cost::SquaredGeodesic => write!(f, "geodesic2"),
        }
    }
}

impl std::str::FromStr for Cost {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quadratic" | "power2" => Ok(Cost::Quadratic),
            "geodesic2" | "geodesic" => Ok(Cost::SquaredGeodesic),
            other => match other.strip_prefix("power").map(str::parse::<u32>) {
                Some(Ok(p)) => Cost::even_power(p),
                _ => Err(Error::param("cost", format!("unknown cost kind '{other}'"))),
            },
        }
    }
}

#[inline]
pub fn dist2(x: &Point, y: &Point) -> f64 {
    let a = x[0] - y[0];
    let b = x[1] - y[1];
    let c = x[2] - y[2];
    a * a + b * b + c * c
}

/// Great-circle distance between unit vectors, stable near 0 and π.
#[inline]
pub fn geodesic(x: &Point, y: &Point) -> f64 {
    let dot = x[0] * y[0] + x[1] * y[1] + x[2] * y[2];
    let cx = x[1] * y[2] - x[2] * y[1];
    let cy = x[2] * y[0] - x[0] * y[2];
    let cz = x[0] * y[1] - x[1] * y[0];
    (cx * cx + cy * cy + cz * cz).sqrt().atan2(dot)
}
