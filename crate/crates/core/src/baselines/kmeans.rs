//! Lloyd's algorithm with seeded random-point initialization.

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};
use ndarray::Array2;
use rand::{seq::SliceRandom, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MAX_ITER: usize = 300;
const SHIFT_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct KMeansResult<F: Real> {
    /// 0-based cluster labels, length N.
    pub labels: Vec<usize>,
    pub centroids: Array2<F>,
    /// Within-cluster sum of squared distances.
    pub inertia: F,
    pub n_iterations: usize,
}

/// Cluster rows of `points` into `n_clusters` groups. Initialization picks
/// distinct random points as centroids; an emptied cluster is reseeded from
/// the point farthest from its assigned centroid.
pub fn kmeans<F: Real>(points: &Array2<F>, n_clusters: usize, seed: u64) -> Result<KMeansResult<F>> {
    let (n, dim) = points.dim();
    if n_clusters == 0 || n_clusters > n {
        return Err(Error::invalid_argument(format!(
            "n_clusters {n_clusters} out of range for {n} points"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut centroids = Array2::<F>::zeros((n_clusters, dim));
    for (c, &idx) in order.iter().take(n_clusters).enumerate() {
        for d in 0..dim {
            centroids[[c, d]] = points[[idx, d]];
        }
    }

    let mut labels = vec![0usize; n];
    let mut n_iterations = 0usize;
    for _ in 0..MAX_ITER {
        n_iterations += 1;
        // Assignment (ties toward the lower cluster index).
        for obj in 0..n {
            let mut best = 0usize;
            let mut best_d = F::infinity();
            for c in 0..n_clusters {
                let mut d2 = F::zero();
                for d in 0..dim {
                    let diff = points[[obj, d]] - centroids[[c, d]];
                    d2 = d2 + diff * diff;
                }
                if d2 < best_d {
                    best_d = d2;
                    best = c;
                }
            }
            labels[obj] = best;
        }
        // Reseed empty clusters from the farthest point.
        loop {
            let mut counts = vec![0usize; n_clusters];
            for &l in &labels {
                counts[l] += 1;
            }
            let empty = match counts.iter().position(|&c| c == 0) {
                None => break,
                Some(e) => e,
            };
            let mut far = 0usize;
            let mut far_d = F::neg_infinity();
            for obj in 0..n {
                let c = labels[obj];
                let mut d2 = F::zero();
                for d in 0..dim {
                    let diff = points[[obj, d]] - centroids[[c, d]];
                    d2 = d2 + diff * diff;
                }
                if d2 > far_d {
                    far_d = d2;
                    far = obj;
                }
            }
            for d in 0..dim {
                centroids[[empty, d]] = points[[far, d]];
            }
            labels[far] = empty;
        }
        // Centroid update.
        let mut shift = F::zero();
        let mut sums = Array2::<F>::zeros((n_clusters, dim));
        let mut counts = vec![0usize; n_clusters];
        for obj in 0..n {
            counts[labels[obj]] += 1;
            for d in 0..dim {
                sums[[labels[obj], d]] = sums[[labels[obj], d]] + points[[obj, d]];
            }
        }
        for c in 0..n_clusters {
            let cf = lit::<F>(counts[c] as f64);
            for d in 0..dim {
                let new = sums[[c, d]] / cf;
                let delta = (new - centroids[[c, d]]).abs();
                if delta > shift {
                    shift = delta;
                }
                centroids[[c, d]] = new;
            }
        }
        if shift < lit::<F>(SHIFT_TOL) {
            break;
        }
    }

    // Final assignment and inertia under the final centroids.
    let mut inertia = F::zero();
    for obj in 0..n {
        let mut best = 0usize;
        let mut best_d = F::infinity();
        for c in 0..n_clusters {
            let mut d2 = F::zero();
            for d in 0..dim {
                let diff = points[[obj, d]] - centroids[[c, d]];
                d2 = d2 + diff * diff;
            }
            if d2 < best_d {
                best_d = d2;
                best = c;
            }
        }
        labels[obj] = best;
        inertia = inertia + best_d;
    }

    Ok(KMeansResult {
        labels,
        centroids,
        inertia,
        n_iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn two_blobs() -> Array2<f64> {
        array![
            [0.0, 0.0],
            [0.1, 0.1],
            [-0.1, 0.05],
            [0.05, -0.1],
            [10.0, 10.0],
            [10.1, 9.9],
            [9.9, 10.1],
            [10.05, 10.05],
        ]
    }

    #[test]
    fn separated_blobs_recovered() {
        let pts = two_blobs();
        let r = kmeans(&pts, 2, 3).unwrap();
        let first = r.labels[0];
        for i in 0..4 {
            assert_eq!(r.labels[i], first);
        }
        for i in 4..8 {
            assert_ne!(r.labels[i], first);
        }
    }

    #[test]
    fn one_cluster_per_point_has_zero_inertia() {
        let pts = two_blobs();
        let r = kmeans(&pts, 8, 5).unwrap();
        assert!(r.inertia <= 1e-24);
        let mut sorted = r.labels.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 8, "every point its own cluster");
    }

    #[test]
    fn matches_brute_force_on_tiny_separated_instance() {
        // N=8, 2 clusters: enumerate all 2^8 assignments and compare the
        // optimal inertia (centroid = mean of each part).
        let pts = two_blobs();
        let mut best = f64::INFINITY;
        for mask in 1u32..(1 << 8) - 1 {
            let mut groups: [Vec<usize>; 2] = [vec![], vec![]];
            for i in 0..8 {
                groups[((mask >> i) & 1) as usize].push(i);
            }
            let mut inertia = 0.0;
            for g in &groups {
                if g.is_empty() {
                    continue;
                }
                let (mut cx, mut cy) = (0.0, 0.0);
                for &i in g {
                    cx += pts[[i, 0]];
                    cy += pts[[i, 1]];
                }
                cx /= g.len() as f64;
                cy /= g.len() as f64;
                for &i in g {
                    inertia += (pts[[i, 0]] - cx).powi(2) + (pts[[i, 1]] - cy).powi(2);
                }
            }
            best = best.min(inertia);
        }
        let r = kmeans(&pts, 2, 11).unwrap();
        // Lloyd's can only do as well as the exhaustive optimum, and on
        // well-separated blobs it attains it.
        assert!(r.inertia >= best - 1e-12);
        assert!((r.inertia - best).abs() <= 1e-9, "lloyd {} vs brute {}", r.inertia, best);
    }

    #[test]
    fn seeded_determinism() {
        let pts = two_blobs();
        let a = kmeans(&pts, 3, 17).unwrap();
        let b = kmeans(&pts, 3, 17).unwrap();
        assert_eq!(a.labels, b.labels);
        assert!(kmeans(&pts, 9, 17).is_err());
    }

    #[test]
    fn inertia_non_increasing_across_lloyd_iterations() {
        // Run Lloyd's manually step by step via repeated 1-iteration calls is
        // not possible through the public API; instead verify on random data
        // that more iterations never report higher inertia than a single
        // assignment pass (the invariant Lloyd's guarantees internally).
        use rand::Rng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let pts = Array2::from_shape_fn((60, 2), |_| rng.gen_range(-1.0..1.0f64));
        let r = kmeans(&pts, 5, 23).unwrap();
        // Inertia of the returned solution can't beat the best possible but
        // must be no worse than the initial random-centroid assignment.
        let mut init_rng = ChaCha8Rng::seed_from_u64(23);
        let mut order: Vec<usize> = (0..60).collect();
        order.shuffle(&mut init_rng);
        let mut init_inertia = 0.0;
        for obj in 0..60 {
            let mut best = f64::INFINITY;
            for &c in order.iter().take(5) {
                let d2 = (pts[[obj, 0]] - pts[[c, 0]]).powi(2)
                    + (pts[[obj, 1]] - pts[[c, 1]]).powi(2);
                best = best.min(d2);
            }
            init_inertia += best;
        }
        assert!(r.inertia <= init_inertia + 1e-12);
    }
}
