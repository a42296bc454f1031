//! Limited-memory BFGS with a strong Wolfe line search.

use std::collections::VecDeque;

use serde::Serialize;

use crate::error::Result;

/// A differentiable objective whose definition may be refreshed at accepted
/// iterates (the truncation cutoff, for the dual functional).
pub trait Objective {
    fn evaluate(&mut self, x: &[f64]) -> Result<(f64, Vec<f64>)>;

    /// Called once per accepted iterate. Returning `Some` replaces the value
    /// and gradient at `x`, which happens when the objective itself changed.
    fn accept(&mut self, _x: &[f64], _f: f64, _g: &[f64]) -> Result<Option<(f64, Vec<f64>)>> {
        Ok(None)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsParams {
    pub memory: usize,
    pub max_iter: usize,
    /// Stop when `‖g‖₁` is at most this.
    pub tolerance: f64,
    pub c1: f64,
    pub c2: f64,
    pub max_zoom: usize,
}

impl Default for LbfgsParams {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iter: 1000,
            tolerance: 1e-3,
            c1: 1e-4,
            c2: 0.9,
            max_zoom: 30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxIterations,
    LineSearchFailed,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::MaxIterations => "max iterations",
            Status::LineSearchFailed => "line search failed",
        }
    }
}

#[derive(Debug, Clone)]
pub struct LbfgsOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub status: Status,
}

pub fn l1(v: &[f64]) -> f64 {
    v.iter().map(|a| a.abs()).sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(x: &[f64], a: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(xi, di)| xi + a * di).collect()
}

struct Pair {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

fn two_loop(g: &[f64], mem: &VecDeque<Pair>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alpha = vec![0.0; mem.len()];
    for (i, p) in mem.iter().enumerate().rev() {
        alpha[i] = p.rho * dot(&p.s, &q);
        q.iter_mut().zip(&p.y).for_each(|(qi, yi)| *qi -= alpha[i] * yi);
    }
    let last = mem.back().expect("nonempty memory");
    let gamma = dot(&last.s, &last.y) / dot(&last.y, &last.y);
    q.iter_mut().for_each(|v| *v *= gamma);
    for (i, p) in mem.iter().enumerate() {
        let b = p.rho * dot(&p.y, &q);
        q.iter_mut().zip(&p.s).for_each(|(qi, si)| *qi += (alpha[i] - b) * si);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

struct Point {
    a: f64,
    f: f64,
    g: Vec<f64>,
    d: f64,
}

/// Minimize `obj` from `x0`.
pub fn lbfgs_minimize<O: Objective>(obj: &mut O, x0: &[f64], p: &LbfgsParams) -> Result<LbfgsOutcome> {
    let mut evals = 0;
    let mut x = x0.to_vec();
    let (mut f, mut g) = obj.evaluate(&x)?;
    evals += 1;
    if l1(&g) > p.tolerance {
        if let Some(r) = obj.accept(&x, f, &g)? {
            (f, g) = r;
            evals += 1;
        }
    }
    let mut mem: VecDeque<Pair> = VecDeque::with_capacity(p.memory);
    let mut iter = 0;
    let status = loop {
        if l1(&g) <= p.tolerance {
            break Status::Converged;
        }
        if iter >= p.max_iter {
            break Status::MaxIterations;
        }
        let mut d = if mem.is_empty() {
            g.iter().map(|v| -v).collect()
        } else {
            two_loop(&g, &mem)
        };
        let mut dg = dot(&d, &g);
        if !(dg < 0.0) {
            mem.clear();
            d = g.iter().map(|v| -v).collect();
            dg = dot(&d, &g);
        }
        let a0 = if mem.is_empty() { 1.0 / dot(&g, &g).sqrt() } else { 1.0 };
        let found = line_search(obj, &x, f, dg, &d, a0, p, &mut evals)?;
        let Some(step) = found else {
            if mem.is_empty() {
                break Status::LineSearchFailed;
            }
            mem.clear();
            continue;
        };
        let s: Vec<f64> = d.iter().map(|v| step.a * v).collect();
        let y: Vec<f64> = step.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-300 && sy.is_finite() {
            if mem.len() == p.memory {
                mem.pop_front();
            }
            if p.memory > 0 {
                mem.push_back(Pair { rho: 1.0 / sy, s, y });
            }
        }
        x = axpy(&x, step.a, &d);
        f = step.f;
        g = step.g;
        iter += 1;
        if l1(&g) > p.tolerance {
            if let Some(r) = obj.accept(&x, f, &g)? {
                (f, g) = r;
                evals += 1;
            }
        }
    };
    Ok(LbfgsOutcome {
        x,
        value: f,
        gradient: g,
        iterations: iter,
        evaluations: evals,
        status,
    })
}

/// Strong Wolfe search along `d`. Returns `None` when no point with
/// sufficient decrease was found.
#[allow(clippy::too_many_arguments)]
fn line_search<O: Objective>(
    obj: &mut O,
    x: &[f64],
    f0: f64,
    dg0: f64,
    d: &[f64],
    a0: f64,
    p: &LbfgsParams,
    evals: &mut usize,
) -> Result<Option<Point>> {
    let mut probe = |a: f64, evals: &mut usize| -> Result<Point> {
        let (f, g) = obj.evaluate(&axpy(x, a, d))?;
        *evals += 1;
        let dd = dot(&g, d);
        Ok(Point { a, f, g, d: dd })
    };
    let armijo = |pt: &Point| pt.f.is_finite() && pt.f <= f0 + p.c1 * pt.a * dg0;
    let curvature = |pt: &Point| pt.d.abs() <= -p.c2 * dg0;
    let f_noise = F_NOISE * f0.abs();

    let mut prev = Point { a: 0.0, f: f0, g: Vec::new(), d: dg0 };
    let mut a = a0;
    for i in 0..p.max_zoom {
        let cur = probe(a, evals)?;
        if approx_wolfe(&cur, f0, dg0, f_noise, p) {
            return Ok(Some(cur));
        }
        if !armijo(&cur) || (i > 0 && cur.f >= prev.f) {
            return zoom(&mut probe, prev, cur, f0, dg0, p, evals);
        }
        if curvature(&cur) {
            return Ok(Some(cur));
        }
        if cur.d >= 0.0 {
            return zoom(&mut probe, cur, prev, f0, dg0, p, evals);
        }
        a = cur.a * 2.0;
        prev = cur;
    }
    // Armijo held at every bracketing step; accept the longest.
    Ok(Some(prev).filter(|pt| pt.a > 0.0))
}

/// Relative size of rounding noise in objective values.
const F_NOISE: f64 = 1e-12;

/// Curvature holds and `f` rose by no more than rounding noise. Near the
/// optimum, value differences drown in roundoff long before the gradient
/// stops carrying information; this lets the gradient decide there.
fn approx_wolfe(pt: &Point, f0: f64, dg0: f64, f_noise: f64, p: &LbfgsParams) -> bool {
    pt.f.is_finite() && pt.f > f0 + p.c1 * pt.a * dg0 && pt.f <= f0 + f_noise && pt.d.abs() <= -p.c2 * dg0
}

fn zoom(
    probe: &mut impl FnMut(f64, &mut usize) -> Result<Point>,
    mut lo: Point,
    mut hi: Point,
    f0: f64,
    dg0: f64,
    p: &LbfgsParams,
    evals: &mut usize,
) -> Result<Option<Point>> {
    for _ in 0..p.max_zoom {
        let a = interpolate(&lo, &hi);
        if a == lo.a || a == hi.a {
            break;
        }
        let cur = probe(a, evals)?;
        if approx_wolfe(&cur, f0, dg0, F_NOISE * f0.abs(), p) {
            return Ok(Some(cur));
        }
        let ok = cur.f.is_finite() && cur.f <= f0 + p.c1 * cur.a * dg0;
        if !ok || cur.f >= lo.f {
            hi = cur;
        } else {
            if cur.d.abs() <= -p.c2 * dg0 {
                return Ok(Some(cur));
            }
            if cur.d * (hi.a - lo.a) >= 0.0 {
                hi = lo;
            }
            lo = cur;
        }
    }
    // Best point with sufficient decrease, if the bracket ever left zero.
    Ok(Some(lo).filter(|pt| pt.a > 0.0 && pt.f < f0))
}

/// Safeguarded cubic interpolation inside the bracket, else bisection.
fn interpolate(lo: &Point, hi: &Point) -> f64 {
    let mid = 0.5 * (lo.a + hi.a);
    if !(lo.f.is_finite() && hi.f.is_finite() && hi.d.is_finite()) {
        return mid;
    }
    let d1 = lo.d + hi.d - 3.0 * (lo.f - hi.f) / (lo.a - hi.a);
    let rad = d1 * d1 - lo.d * hi.d;
    if !(rad >= 0.0) {
        return mid;
    }
    let d2 = (hi.a - lo.a).signum() * rad.sqrt();
    let a = hi.a - (hi.a - lo.a) * (hi.d + d2 - d1) / (hi.d - lo.d + 2.0 * d2);
    let (l, h) = if lo.a < hi.a { (lo.a, hi.a) } else { (hi.a, lo.a) };
    let margin = 0.1 * (h - l);
    if a.is_finite() && a >= l + margin && a <= h - margin {
        a
    } else {
        mid
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Rosenbrock;

    impl Objective for Rosenbrock {
        fn evaluate(&mut self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
            let (a, b) = (x[0], x[1]);
            let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
            Ok((f, g))
        }
    }

    struct Quadratic(Vec<f64>);

    impl Objective for Quadratic {
        fn evaluate(&mut self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
            let f = x.iter().zip(&self.0).map(|(xi, h)| 0.5 * h * xi * xi).sum();
            Ok((f, x.iter().zip(&self.0).map(|(xi, h)| h * xi).collect()))
        }
    }

    #[test]
    fn rosenbrock_converges() {
        let p = LbfgsParams { tolerance: 1e-8, max_iter: 500, ..Default::default() };
        let r = lbfgs_minimize(&mut Rosenbrock, &[-1.2, 1.0], &p).unwrap();
        assert_eq!(r.status, Status::Converged);
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn ill_conditioned_quadratic() {
        let h: Vec<f64> = (0..30).map(|i| 10f64.powf(i as f64 / 10.0)).collect();
        let p = LbfgsParams { tolerance: 1e-6, ..Default::default() };
        let r = lbfgs_minimize(&mut Quadratic(h), &vec![1.0; 30], &p).unwrap();
        assert_eq!(r.status, Status::Converged, "{} iterations", r.iterations);
        assert!(r.iterations < 300);
    }

    #[test]
    fn stationary_start_takes_no_iterations() {
        let r = lbfgs_minimize(&mut Quadratic(vec![1.0, 2.0]), &[0.0, 0.0], &LbfgsParams::default()).unwrap();
        assert_eq!((r.iterations, r.evaluations, r.status), (0, 1, Status::Converged));
    }

    #[test]
    fn zero_iterations_cap() {
        let p = LbfgsParams { max_iter: 0, ..Default::default() };
        let r = lbfgs_minimize(&mut Rosenbrock, &[-1.2, 1.0], &p).unwrap();
        assert_eq!(r.status, Status::MaxIterations);
    }
}
