//! Riemannian barycenters and blue-noise quantization on the unit sphere.

use std::collections::HashMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{geodesic, Cost};
use crate::maps::PlanView;
use crate::measures::{SourceAtoms, TargetMeasure};
use crate::solver::{solve, SolverConfig};
use crate::Point;

/// Inputs closer than this to antipodal have no log map.
pub const ANTIPODAL_MARGIN: f64 = 1e-3;

fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: &Point) -> f64 {
    dot(a, a).sqrt()
}

fn scale(a: &Point, s: f64) -> Point {
    a.map(|v| v * s)
}

fn unit(a: &Point) -> Point {
    scale(a, 1.0 / norm(a))
}

/// The unit 2-sphere with the round metric.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SphereManifold;

impl SphereManifold {
    pub fn distance(&self, p: &Point, q: &Point) -> f64 {
        geodesic(p, q)
    }

    /// Tangent vector at `p` pointing to `q` with length `d_g(p, q)`.
    pub fn log(&self, p: &Point, q: &Point) -> Result<Point> {
        let th = geodesic(p, q);
        if th > PI - ANTIPODAL_MARGIN {
            return Err(Error::Antipodal(th));
        }
        let c = th.cos();
        let w = [q[0] - c * p[0], q[1] - c * p[1], q[2] - c * p[2]];
        let n = norm(&w);
        if th == 0.0 || n == 0.0 {
            return Ok([0.0; 3]);
        }
        Ok(scale(&w, th / n))
    }

    pub fn exp(&self, p: &Point, v: &Point) -> Point {
        let n = norm(v);
        if n == 0.0 {
            return *p;
        }
        let (s, c) = n.sin_cos();
        unit(&[0, 1, 2].map(|d| c * p[d] + s * v[d] / n))
    }

    /// Riemannian gradient `Σ_q −2 w_q log_y(x_q)` of `Σ_q w_q d_g(y, x_q)²`.
    /// Atoms with zero weight are skipped.
    pub fn frechet_gradient(&self, points: &[Point], weights: &[f64], y: &Point) -> Result<Point> {
        let mut v = [0.0; 3];
        for (x, &w) in points.iter().zip(weights) {
            if w > 0.0 {
                let l = self.log(y, x)?;
                for d in 0..3 {
                    v[d] -= 2.0 * w * l[d];
                }
            }
        }
        Ok(v)
    }

    /// Uniform sample on the sphere.
    pub fn sample(&self, rng: &mut impl Rng) -> Point {
        let z: f64 = rng.random_range(-1.0..=1.0);
        let phi: f64 = rng.random_range(0.0..2.0 * PI);
        let r = (1.0 - z * z).max(0.0).sqrt();
        [r * phi.cos(), r * phi.sin(), z]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiemannianParams {
    pub alpha: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for RiemannianParams {
    fn default() -> Self {
        Self {
            alpha: 0.25,
            tol: 1e-6,
            max_iter: 500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiemannianOutcome {
    pub point: Point,
    pub iterations: usize,
    /// Gradient norm at `point`.
    pub residual: f64,
    pub converged: bool,
}

/// Weighted Fréchet mean by gradient descent `y ← exp_y(−α v)`.
pub fn riemannian_barycenter(
    points: &[Point],
    weights: &[f64],
    y0: Point,
    params: RiemannianParams,
) -> Result<RiemannianOutcome> {
    if points.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: points.len(),
            got: weights.len(),
        });
    }
    if !(norm(&y0) > 0.0) {
        return Err(Error::param("y0", "must be nonzero"));
    }
    let m = SphereManifold;
    let mut y = unit(&y0);
    let mut it = 0;
    loop {
        let v = m.frechet_gradient(points, weights, &y)?;
        let r = norm(&v);
        if r <= params.tol || it >= params.max_iter {
            return Ok(RiemannianOutcome {
                point: y,
                iterations: it,
                residual: r,
                converged: r <= params.tol,
            });
        }
        y = m.exp(&y, &scale(&v, -params.alpha));
        it += 1;
    }
}

/// Source densities on the sphere.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SphereDensity {
    Uniform,
    /// `max(Y₂⁰, 0) + 0.1`.
    Harmonic,
}

impl SphereDensity {
    pub fn eval(&self, p: &Point) -> f64 {
        match self {
            SphereDensity::Uniform => 1.0,
            SphereDensity::Harmonic => {
                let y20 = 0.25 * (5.0 / PI).sqrt() * (3.0 * p[2] * p[2] - 1.0);
                y20.max(0.0) + 0.1
            }
        }
    }
}

impl std::str::FromStr for SphereDensity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(SphereDensity::Uniform),
            "harmonic" => Ok(SphereDensity::Harmonic),
            _ => Err(Error::param("density", format!("unknown sphere density '{s}'"))),
        }
    }
}

/// Subdivided icosahedron projected to the sphere: vertices and triangles.
pub fn icosphere(subdivisions: usize) -> (Vec<Point>, Vec<[usize; 3]>) {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Point> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(unit)
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Point>| {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                let p = unit(&[0, 1, 2].map(|d| verts[a][d] + verts[b][d]));
                verts.push(p);
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    (verts, faces)
}

/// One atom per icosphere face: projected centroid, spherical triangle area,
/// density at the atom.
pub fn sphere_atoms(subdivisions: usize, density: SphereDensity) -> Result<SourceAtoms> {
    let (v, f) = icosphere(subdivisions);
    let mut pts = Vec::with_capacity(f.len());
    let mut vols = Vec::with_capacity(f.len());
    let mut rho = Vec::with_capacity(f.len());
    for [a, b, c] in f {
        let (pa, pb, pc) = (&v[a], &v[b], &v[c]);
        let bc = [
            pb[1] * pc[2] - pb[2] * pc[1],
            pb[2] * pc[0] - pb[0] * pc[2],
            pb[0] * pc[1] - pb[1] * pc[0],
        ];
        let excess = 2.0 * dot(pa, &bc).abs().atan2(1.0 + dot(pa, pb) + dot(pb, pc) + dot(pc, pa));
        let p = unit(&[0, 1, 2].map(|d| v[a][d] + v[b][d] + v[c][d]));
        vols.push(excess);
        rho.push(density.eval(&p));
        pts.push(p);
    }
    SourceAtoms::from_quadrature(3, pts, vols, rho)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlueNoiseConfig {
    pub solver: SolverConfig,
    /// Stop when no point moves farther than this (geodesic distance).
    pub tol_y: f64,
    pub max_outer: usize,
    pub riemannian: RiemannianParams,
}

impl Default for BlueNoiseConfig {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default().with_cost(Cost::SquaredGeodesic),
            tol_y: 1e-3,
            max_outer: 200,
            riemannian: RiemannianParams::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BlueNoiseResult {
    pub points: Vec<Point>,
    pub iterations: usize,
    pub converged: bool,
    /// Largest per-point movement at each outer iteration.
    pub movement: Vec<f64>,
    /// Riemannian gradient norm of each returned point under its final plan.
    pub residuals: Vec<f64>,
    pub potential: Vec<f64>,
}

struct Cells {
    potential: Vec<f64>,
    densities: Vec<Vec<f64>>,
}

fn cells(atoms: &SourceAtoms, y: &[Point], cfg: &BlueNoiseConfig, warm: Option<&[f64]>) -> Result<Cells> {
    let target = TargetMeasure::uniform(3, y.to_vec())?;
    let sol = solve(atoms, &target, &cfg.solver, warm)?;
    if !sol.converged() {
        log::warn!("sphere transport solve stopped at |g|_1={:e}", sol.grad_l1());
    }
    let cut = sol.report.cutoff_history.as_ref().and_then(|h| h.last().copied());
    let plan = PlanView::new(atoms, &target, sol.potential.values(), cfg.solver.epsilon, cfg.solver.cost, cut)?
        .with_tolerance(cfg.solver.tolerance);
    let densities = (0..y.len()).map(|j| plan.conditional_density(j)).collect::<Result<_>>()?;
    Ok(Cells {
        potential: sol.potential.into_values(),
        densities,
    })
}

/// Lloyd iteration on the sphere from `n` uniform random points.
pub fn blue_noise_sphere(atoms: &SourceAtoms, n: usize, cfg: &BlueNoiseConfig, seed: u64) -> Result<BlueNoiseResult> {
    if n == 0 {
        return Err(Error::param("n", "must be positive"));
    }
    if cfg.solver.cost != Cost::SquaredGeodesic {
        return Err(Error::UnsupportedCost(format!(
            "sphere quantization needs the squared geodesic cost, got {}",
            cfg.solver.cost
        )));
    }
    if let Some(q) = atoms.points().iter().position(|p| (norm(p) - 1.0).abs() > 1e-12) {
        return Err(Error::Validation(format!("atom {q} is not on the unit sphere")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = SphereManifold;
    let mut y: Vec<Point> = (0..n).map(|_| m.sample(&mut rng)).collect();
    let mut warm: Option<Vec<f64>> = None;
    let mut movement = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_outer {
        let c = cells(atoms, &y, cfg, warm.as_deref())?;
        let next: Vec<Point> = y
            .par_iter()
            .zip(&c.densities)
            .map(|(yj, w)| riemannian_barycenter(atoms.points(), w, *yj, cfg.riemannian).map(|o| o.point))
            .collect::<Result<_>>()?;
        let shift = y.iter().zip(&next).map(|(a, b)| geodesic(a, b)).fold(0.0, f64::max);
        iterations += 1;
        movement.push(shift);
        log::info!("blue noise {iterations}: max movement {shift:e}");
        y = next;
        warm = Some(c.potential);
        if shift <= cfg.tol_y {
            converged = true;
            break;
        }
    }
    let c = cells(atoms, &y, cfg, warm.as_deref())?;
    let residuals = y
        .iter()
        .zip(&c.densities)
        .map(|(yj, w)| m.frechet_gradient(atoms.points(), w, yj).map(|v| norm(&v)))
        .collect::<Result<_>>()?;
    Ok(BlueNoiseResult {
        points: y,
        iterations,
        converged,
        movement,
        residuals,
        potential: c.potential,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const E1: Point = [1.0, 0.0, 0.0];
    const E2: Point = [0.0, 1.0, 0.0];

    #[test]
    fn log_exp_roundtrip() {
        let m = SphereManifold;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let p = m.sample(&mut rng);
            let q = m.sample(&mut rng);
            let Ok(v) = m.log(&p, &q) else { continue };
            assert!(dot(&v, &p).abs() < 1e-10);
            let r = m.exp(&p, &v);
            assert!((0..3).all(|d| (r[d] - q[d]).abs() < 1e-8));
            assert!((norm(&r) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn antipodal_log_fails() {
        assert!(matches!(SphereManifold.log(&E1, &[-1.0, 0.0, 0.0]), Err(Error::Antipodal(_))));
    }

    #[test]
    fn point_mass_barycenter() {
        let params = RiemannianParams { tol: 1e-9, ..Default::default() };
        let r = riemannian_barycenter(&[E2], &[1.0], E1, params).unwrap();
        assert!((0..3).all(|d| (r.point[d] - E2[d]).abs() < 1e-8));
    }

    #[test]
    fn midpoint_barycenter() {
        let r = riemannian_barycenter(&[E1, E2], &[0.5, 0.5], [0.0, 0.0, 1.0], Default::default()).unwrap();
        let s = 0.5f64.sqrt();
        assert!((r.point[0] - s).abs() < 1e-6 && (r.point[1] - s).abs() < 1e-6 && r.point[2].abs() < 1e-6);
    }

    #[test]
    fn weighted_arc_barycenter() {
        let r = riemannian_barycenter(&[E1, E2], &[0.75, 0.25], E1, Default::default()).unwrap();
        assert!((geodesic(&r.point, &E1) - 0.25 * PI / 2.0).abs() < 1e-4);
    }

    #[test]
    fn icosphere_counts_and_area() {
        let (v, f) = icosphere(2);
        assert_eq!((v.len(), f.len()), (162, 320));
        let a = sphere_atoms(3, SphereDensity::Uniform).unwrap();
        let area: f64 = a.volumes().iter().sum();
        assert!((area - 4.0 * PI).abs() < 1e-10);
        assert!(a.points().iter().all(|p| (norm(p) - 1.0).abs() < 1e-12));
    }

    #[test]
    fn uniform_sphere_is_stationary_at_vertex() {
        let a = sphere_atoms(3, SphereDensity::Uniform).unwrap();
        let (v, _) = icosphere(0);
        let g = SphereManifold.frechet_gradient(a.points(), a.masses(), &v[0]).unwrap();
        assert!(norm(&g) <= 1e-3);
    }

    #[test]
    fn two_points_become_antipodal() {
        let a = sphere_atoms(2, SphereDensity::Uniform).unwrap();
        let r = blue_noise_sphere(&a, 2, &BlueNoiseConfig::default(), 7).unwrap();
        assert!(r.converged);
        assert!((geodesic(&r.points[0], &r.points[1]) - PI).abs() < 0.05);
        assert!(r.residuals.iter().all(|&g| g <= 10.0 * 1e-3), "{:?}", r.residuals);
    }
}
