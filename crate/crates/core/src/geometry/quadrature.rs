//! Embedded symmetric quadrature tables on the reference simplex.
//!
//! Points are stored in barycentric coordinates, weights as fractions of the
//! simplex volume. All weights are strictly positive.

use crate::error::{Error, Result};

/// Quadrature order selector, `r ∈ {1, 2, 3}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadratureSpec {
    order: u8,
}

/// A rule on one reference simplex of a given dimension.
#[derive(Debug, Clone)]
pub struct SimplexRule {
    pub barycentric: Vec<Vec<f64>>,
    pub fractions: Vec<f64>,
}

impl QuadratureSpec {
    pub fn new(order: u8) -> Result<Self> {
        if !(1..=3).contains(&order) {
            return Err(Error::param("quadrature order", format!("{order} not in 1..=3")));
        }
        Ok(Self { order })
    }

    pub fn order(&self) -> u8 {
        self.order
    }

    /// Rule for simplices of dimension `dim`.
    pub fn rule(&self, dim: usize) -> Result<SimplexRule> {
        let rule = match (dim, self.order) {
            (1, r) => gauss_legendre(r),
            (2, 1) => centroid(3),
            (2, 2) => s21_orbit(1.0 / 6.0, 1.0 / 3.0),
            (2, 3) => {
                // Dunavant degree 4, six points.
                let mut a = s21_orbit(0.445_948_490_915_965, 0.223_381_589_678_011);
                let b = s21_orbit(0.091_576_213_509_771, 0.109_951_743_655_322);
                a.barycentric.extend(b.barycentric);
                a.fractions.extend(b.fractions);
                a
            }
            (3, 1) => centroid(4),
            (3, 2) => s31_orbit(0.138_196_601_125_010_5, 0.25),
            (3, 3) => {
                // Two equal-weight S31 orbits, exact for total degree 3.
                let mut a = s31_orbit(0.112_956_794_512_511_03, 0.125);
                let b = s31_orbit(0.328_861_649_930_202_9, 0.125);
                a.barycentric.extend(b.barycentric);
                a.fractions.extend(b.fractions);
                a
            }
            (d, _) => {
                return Err(Error::Validation(format!("unsupported simplex dimension {d}")));
            }
        };
        Ok(rule)
    }
}

impl SimplexRule {
    pub fn len(&self) -> usize {
        self.fractions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fractions.is_empty()
    }

    /// Weights on the reference simplex (volume 1, 1/2, 1/6 for d = 1, 2, 3).
    pub fn reference_weights(&self, dim: usize) -> Vec<f64> {
        let vol = reference_volume(dim);
        self.fractions.iter().map(|f| f * vol).collect()
    }
}

pub fn reference_volume(dim: usize) -> f64 {
    match dim {
        1 => 1.0,
        2 => 0.5,
        3 => 1.0 / 6.0,
        _ => f64::NAN,
    }
}

fn centroid(nv: usize) -> SimplexRule {
    SimplexRule {
        barycentric: vec![vec![1.0 / nv as f64; nv]],
        fractions: vec![1.0],
    }
}

fn gauss_legendre(r: u8) -> SimplexRule {
    let (nodes, weights): (Vec<f64>, Vec<f64>) = match r {
        1 => (vec![0.5], vec![1.0]),
        2 => {
            let h = 3f64.sqrt() / 6.0;
            (vec![0.5 - h, 0.5 + h], vec![0.5, 0.5])
        }
        _ => {
            let h = (0.6f64).sqrt() / 2.0;
            (vec![0.5 - h, 0.5, 0.5 + h], vec![5.0 / 18.0, 4.0 / 9.0, 5.0 / 18.0])
        }
    };
    SimplexRule {
        barycentric: nodes.iter().map(|&t| vec![1.0 - t, t]).collect(),
        fractions: weights,
    }
}

/// Three points `(a, a, 1-2a)` and permutations, each with weight fraction `w`.
fn s21_orbit(a: f64, w: f64) -> SimplexRule {
    let b = 1.0 - 2.0 * a;
    SimplexRule {
        barycentric: vec![vec![b, a, a], vec![a, b, a], vec![a, a, b]],
        fractions: vec![w; 3],
    }
}

/// Four points `(a, a, a, 1-3a)` and permutations, each with weight fraction `w`.
fn s31_orbit(a: f64, w: f64) -> SimplexRule {
    let b = 1.0 - 3.0 * a;
    let barycentric = (0..4)
        .map(|i| {
            let mut l = vec![a; 4];
            l[i] = b;
            l
        })
        .collect();
    SimplexRule {
        barycentric,
        fractions: vec![w; 4],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    /// Closed-form integral of x^i y^j z^k over the reference simplex.
    fn monomial_exact(dim: usize, exps: &[u32]) -> f64 {
        let num: f64 = exps.iter().map(|&e| factorial(e)).product();
        let total: u32 = exps.iter().sum();
        num / factorial(total + dim as u32)
    }

    fn monomial_quad(rule: &SimplexRule, dim: usize, exps: &[u32]) -> f64 {
        let w = rule.reference_weights(dim);
        rule.barycentric
            .iter()
            .zip(&w)
            .map(|(l, w)| {
                // reference coordinates are barycentric components 1..=dim
                let v: f64 = exps
                    .iter()
                    .enumerate()
                    .map(|(k, &e)| l[k + 1].powi(e as i32))
                    .product();
                v * w
            })
            .sum()
    }

    fn exponents(dim: usize, max_deg: u32) -> Vec<Vec<u32>> {
        let mut out = vec![vec![]];
        for _ in 0..dim {
            out = out
                .into_iter()
                .flat_map(|e| (0..=max_deg).map(move |k| [e.clone(), vec![k]].concat()))
                .collect();
        }
        out.retain(|e| e.iter().sum::<u32>() <= max_deg);
        out
    }

    #[test]
    fn weights_positive_and_sum_to_reference_volume() {
        for dim in 1..=3 {
            for order in 1..=3 {
                let rule = QuadratureSpec::new(order).unwrap().rule(dim).unwrap();
                let w = rule.reference_weights(dim);
                assert!(w.iter().all(|&w| w > 0.0));
                let s: f64 = w.iter().sum();
                assert!((s - reference_volume(dim)).abs() < 1e-15, "d={dim} r={order}");
                for l in &rule.barycentric {
                    assert_eq!(l.len(), dim + 1);
                    assert!((l.iter().sum::<f64>() - 1.0).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn point_counts() {
        let n = |d, r| QuadratureSpec::new(r).unwrap().rule(d).unwrap().len();
        assert_eq!((n(1, 1), n(1, 2), n(1, 3)), (1, 2, 3));
        assert_eq!((n(2, 1), n(2, 2)), (1, 3));
        assert_eq!((n(3, 1), n(3, 2)), (1, 4));
    }

    #[test]
    fn order_two_exact_through_degree_two() {
        for dim in 1..=3 {
            let rule = QuadratureSpec::new(2).unwrap().rule(dim).unwrap();
            for e in exponents(dim, 2) {
                let q = monomial_quad(&rule, dim, &e);
                let x = monomial_exact(dim, &e);
                assert!((q - x).abs() < 1e-15, "d={dim} e={e:?} {q} {x}");
            }
        }
    }

    #[test]
    fn order_three_exact_through_degree_three() {
        for dim in 1..=3 {
            let rule = QuadratureSpec::new(3).unwrap().rule(dim).unwrap();
            for e in exponents(dim, 3) {
                let q = monomial_quad(&rule, dim, &e);
                let x = monomial_exact(dim, &e);
                assert!((q - x).abs() < 1e-14, "d={dim} e={e:?} {q} {x}");
            }
        }
    }

    #[test]
    fn rejects_bad_order() {
        assert!(QuadratureSpec::new(0).is_err());
        assert!(QuadratureSpec::new(4).is_err());
    }
}
