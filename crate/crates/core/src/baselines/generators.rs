//! Synthetic 2-D datasets with non-convex class shapes.

use super::Dataset2D;
use crate::error::{Error, Result};
use crate::scalar::{lit, Real};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

/// Two interleaved unit semicircles: class 0 is the upper semicircle at the
/// origin, class 1 the lower semicircle offset by (1, -0.5). Isotropic
/// Gaussian noise with the given standard deviation is added per coordinate.
pub fn make_half_moons<F: Real>(n: usize, noise_sd: f64, seed: u64) -> Result<Dataset2D<F>> {
    if n % 2 != 0 {
        return Err(Error::invalid_argument("n must be even"));
    }
    if noise_sd < 0.0 {
        return Err(Error::invalid_argument("noise_sd must be >= 0"));
    }
    let half = n / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Array2::zeros((n, 2));
    let mut labels = Vec::with_capacity(n);
    for j in 0..half {
        let t = PI * j as f64 / (half.max(2) - 1) as f64;
        points[[j, 0]] = lit::<F>(t.cos());
        points[[j, 1]] = lit::<F>(t.sin());
        labels.push(0);
    }
    for j in 0..half {
        let t = PI * j as f64 / (half.max(2) - 1) as f64;
        points[[half + j, 0]] = lit::<F>(1.0 + t.cos());
        points[[half + j, 1]] = lit::<F>(-0.5 - t.sin());
        labels.push(1);
    }
    if noise_sd > 0.0 {
        for v in points.iter_mut() {
            let g: f64 = rng.sample(StandardNormal);
            *v = *v + lit::<F>(noise_sd * g);
        }
    }
    Ok(Dataset2D {
        points,
        labels,
        n_classes: 2,
    })
}

/// Two concentric circles; class 0 on the inner radius, class 1 on the outer.
pub fn make_circles<F: Real>(
    n: usize,
    radii: (f64, f64),
    noise_sd: f64,
    seed: u64,
) -> Result<Dataset2D<F>> {
    if n % 2 != 0 {
        return Err(Error::invalid_argument("n must be even"));
    }
    if noise_sd < 0.0 {
        return Err(Error::invalid_argument("noise_sd must be >= 0"));
    }
    let half = n / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Array2::zeros((n, 2));
    let mut labels = Vec::with_capacity(n);
    for (c, &r) in [radii.0, radii.1].iter().enumerate() {
        for j in 0..half {
            let t = 2.0 * PI * j as f64 / half as f64;
            points[[c * half + j, 0]] = lit::<F>(r * t.cos());
            points[[c * half + j, 1]] = lit::<F>(r * t.sin());
            labels.push(c);
        }
    }
    if noise_sd > 0.0 {
        for v in points.iter_mut() {
            let g: f64 = rng.sample(StandardNormal);
            *v = *v + lit::<F>(noise_sd * g);
        }
    }
    Ok(Dataset2D {
        points,
        labels,
        n_classes: 2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moons_noiseless_geometry() {
        let d = make_half_moons::<f64>(200, 0.0, 1).unwrap();
        for (row, &lab) in d.points.rows().into_iter().zip(&d.labels) {
            if lab == 0 {
                let r2 = row[0] * row[0] + row[1] * row[1];
                assert!((r2 - 1.0).abs() <= 1e-9, "off the unit circle: {r2}");
                assert!(row[1] >= -1e-12, "not on the upper semicircle");
            }
        }
    }

    #[test]
    fn moons_class_balance() {
        let d = make_half_moons::<f64>(800, 0.1, 2).unwrap();
        assert_eq!(d.labels.iter().filter(|&&l| l == 0).count(), 400);
        assert_eq!(d.labels.iter().filter(|&&l| l == 1).count(), 400);
    }

    #[test]
    fn moons_deterministic() {
        let a = make_half_moons::<f64>(100, 0.2, 9).unwrap();
        let b = make_half_moons::<f64>(100, 0.2, 9).unwrap();
        assert_eq!(a.points, b.points);
        assert!(make_half_moons::<f64>(101, 0.2, 9).is_err());
    }

    #[test]
    fn circles_noiseless_radii() {
        let d = make_circles::<f64>(400, (1.0, 2.0), 0.0, 3).unwrap();
        for (row, &lab) in d.points.rows().into_iter().zip(&d.labels) {
            let r = (row[0] * row[0] + row[1] * row[1]).sqrt();
            let want = if lab == 0 { 1.0 } else { 2.0 };
            assert!((r - want).abs() <= 1e-9);
        }
    }

    #[test]
    fn circles_balance_and_determinism() {
        let d = make_circles::<f64>(1600, (1.0, 2.0), 0.1, 4).unwrap();
        assert_eq!(d.labels.iter().filter(|&&l| l == 0).count(), 800);
        assert_eq!(d.labels.iter().filter(|&&l| l == 1).count(), 800);
        let e = make_circles::<f64>(1600, (1.0, 2.0), 0.1, 4).unwrap();
        assert_eq!(d.points, e.points);
    }
}
