//! Seeded Lloyd k-means used for hierarchy coarsening.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{dist2, SpatialIndex};
use crate::Point;

pub const MAX_SWEEPS: usize = 100;
pub const SHIFT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    /// Cluster centroids; weighted when weights were supplied.
    pub centroids: Vec<Point>,
    /// `assignment[i]` is the cluster of point `i`.
    pub assignment: Vec<usize>,
    pub sweeps: usize,
}

impl Clustering {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }
}

/// Partition `points` into exactly `k` nonempty clusters.
///
/// Assignment uses plain Euclidean distance. `weights`, when given, enter the
/// seeding probabilities and the centroid averages.
pub fn kmeans(points: &[Point], weights: Option<&[f64]>, k: usize, seed: u64) -> Result<Clustering> {
    let n = points.len();
    if n == 0 {
        return Err(Error::Empty("k-means input"));
    }
    if k == 0 || k > n {
        return Err(Error::param("cluster count", format!("{k} not in 1..={n}")));
    }
    if let Some(w) = weights {
        if w.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: w.len() });
        }
    }
    let weight = |i: usize| weights.map_or(1.0, |w| w[i]);
    if k == n {
        return Ok(Clustering {
            centroids: points.to_vec(),
            assignment: (0..n).collect(),
            sweeps: 0,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_plus_plus(points, &weight, k, &mut rng);
    let scale = diameter2(points).sqrt().max(f64::MIN_POSITIVE);
    let mut assignment = vec![0; n];
    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        assign(points, &centroids, &mut assignment);
        repair_empty(points, &centroids, &mut assignment, k);
        let next = means(points, &weight, &assignment, k);
        let shift = centroids
            .iter()
            .zip(&next)
            .map(|(a, b)| dist2(a, b))
            .fold(0.0, f64::max)
            .sqrt();
        centroids = next;
        if shift <= SHIFT_TOL * scale {
            break;
        }
    }
    Ok(Clustering { centroids, assignment, sweeps })
}

fn seed_plus_plus(
    points: &[Point],
    weight: &dyn Fn(usize) -> f64,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Point> {
    let n = points.len();
    let first = rng.random_range(0..n);
    let mut centroids = vec![points[first]];
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &points[first])).collect();
    while centroids.len() < k {
        let total: f64 = (0..n).map(|i| weight(i) * d2[i]).sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for i in 0..n {
                u -= weight(i) * d2[i];
                if u < 0.0 && d2[i] > 0.0 {
                    pick = i;
                    break;
                }
            }
            if d2[pick] == 0.0 {
                (0..n).rev().find(|&i| d2[i] > 0.0).unwrap_or(pick)
            } else {
                pick
            }
        } else {
            // All remaining points coincide with a centroid.
            rng.random_range(0..n)
        };
        let c = points[pick];
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(dist2(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

fn assign(points: &[Point], centroids: &[Point], assignment: &mut [usize]) {
    let index = SpatialIndex::new(centroids).expect("k >= 1");
    for (a, p) in assignment.iter_mut().zip(points) {
        *a = index.nearest(p);
    }
}

/// Give every empty cluster the farthest member of the currently largest one.
fn repair_empty(points: &[Point], centroids: &[Point], assignment: &mut [usize], k: usize) {
    let mut counts = vec![0usize; k];
    for &a in assignment.iter() {
        counts[a] += 1;
    }
    for empty in 0..k {
        if counts[empty] > 0 {
            continue;
        }
        let largest = (0..k).max_by_key(|&c| (counts[c], std::cmp::Reverse(c))).unwrap();
        let far = (0..points.len())
            .filter(|&i| assignment[i] == largest)
            .max_by(|&i, &j| {
                dist2(&points[i], &centroids[largest])
                    .total_cmp(&dist2(&points[j], &centroids[largest]))
                    .then(j.cmp(&i))
            })
            .unwrap();
        assignment[far] = empty;
        counts[largest] -= 1;
        counts[empty] = 1;
    }
}

pub(crate) fn means(
    points: &[Point],
    weight: &dyn Fn(usize) -> f64,
    assignment: &[usize],
    k: usize,
) -> Vec<Point> {
    let mut sum = vec![[0.0; 3]; k];
    let mut mass = vec![0.0; k];
    for (i, (&a, p)) in assignment.iter().zip(points).enumerate() {
        let w = weight(i);
        for d in 0..3 {
            sum[a][d] += w * p[d];
        }
        mass[a] += w;
    }
    let mut count = vec![0usize; k];
    for &a in assignment {
        count[a] += 1;
    }
    (0..k)
        .map(|c| {
            if mass[c] > 0.0 {
                sum[c].map(|s| s / mass[c])
            } else {
                // Zero-weight cluster: fall back to the plain mean.
                let mut m = [0.0; 3];
                for (&a, p) in assignment.iter().zip(points) {
                    if a == c {
                        for d in 0..3 {
                            m[d] += p[d] / count[c] as f64;
                        }
                    }
                }
                m
            }
        })
        .collect()
}

fn diameter2(points: &[Point]) -> f64 {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in points {
        for d in 0..3 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    dist2(&lo, &hi)
}
