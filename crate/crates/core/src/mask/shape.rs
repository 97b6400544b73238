use serde::{Deserialize, Serialize};

use super::BinaryMask;
use crate::error::{Error, Result};

/// Relative eigenvalue gap below which a shape is treated as isotropic.
const ISOTROPY_EPS: f64 = 1e-9;

/// Centroid and dominant direction of a foreground pixel set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrincipalAxis {
    pub centroid: (f64, f64),
    /// Unit vector with `x >= 0` (and `y >= 0` when `x == 0`).
    pub direction: (f64, f64),
    /// Both covariance eigenvalues are equal; `direction` is then `(1, 0)`.
    pub isotropic: bool,
}

/// PCA over all foreground pixel coordinates.
pub fn shape_principal_axis(m: &BinaryMask) -> Result<PrincipalAxis> {
    let n = m.count_ones();
    if n < 2 {
        return Err(Error::invalid(format!(
            "principal axis needs at least two foreground pixels, got {n}"
        )));
    }
    let (mut sx, mut sy) = (0.0, 0.0);
    for p in m.iter_ones() {
        sx += p.x as f64;
        sy += p.y as f64;
    }
    let (cx, cy) = (sx / n as f64, sy / n as f64);
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for p in m.iter_ones() {
        let (dx, dy) = (p.x as f64 - cx, p.y as f64 - cy);
        a += dx * dx;
        b += dx * dy;
        c += dy * dy;
    }
    a /= n as f64;
    b /= n as f64;
    c /= n as f64;

    let half_diff = (a - c) / 2.0;
    let disc = (half_diff * half_diff + b * b).sqrt();
    let scale = (a + c).abs().max(f64::MIN_POSITIVE);
    if disc <= ISOTROPY_EPS * scale {
        return Ok(PrincipalAxis {
            centroid: (cx, cy),
            direction: (1.0, 0.0),
            isotropic: true,
        });
    }
    let lambda = (a + c) / 2.0 + disc;
    // (A - λI)v = 0; pick the better-conditioned of the two row equations
    let (vx, vy) = if (lambda - c).abs() >= (lambda - a).abs() {
        (lambda - c, b)
    } else {
        (b, lambda - a)
    };
    let norm = (vx * vx + vy * vy).sqrt();
    let (mut vx, mut vy) = (vx / norm, vy / norm);
    if vx < 0.0 || (vx == 0.0 && vy < 0.0) {
        vx = -vx;
        vy = -vy;
    }
    // -0.0 normalises to 0.0
    Ok(PrincipalAxis {
        centroid: (cx, cy),
        direction: (vx + 0.0, vy + 0.0),
        isotropic: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horizontal_and_vertical_bars() {
        let h = BinaryMask::rect(20, 20, 3, 5, 10, 2).unwrap();
        let ax = shape_principal_axis(&h).unwrap();
        assert_eq!(ax.direction, (1.0, 0.0));
        assert_eq!(ax.centroid, (7.5, 5.5));
        assert!(!ax.isotropic);

        let v = BinaryMask::rect(20, 20, 3, 5, 2, 10).unwrap();
        let ax = shape_principal_axis(&v).unwrap();
        assert_eq!(ax.direction, (0.0, 1.0));
    }

    #[test]
    fn diagonal_strip() {
        let m = BinaryMask::from_fn(30, 30, |x, y| (x as i64 - y as i64).abs() <= 1).unwrap();
        let ax = shape_principal_axis(&m).unwrap();
        // oracle: closed-form 2x2 eigenvector from enumerated covariance
        let pts: Vec<(f64, f64)> = m.iter_ones().map(|p| (p.x as f64, p.y as f64)).collect();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx = pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>() / n;
        let syy = pts.iter().map(|p| (p.1 - my).powi(2)).sum::<f64>() / n;
        let sxy = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / n;
        let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
        let (ox, oy) = (theta.cos(), theta.sin());
        assert!((ax.direction.0 - ox).abs() < 1e-6 && (ax.direction.1 - oy).abs() < 1e-6);
        assert!((ax.direction.0 - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-4);
        assert!((ax.direction.1 - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-4);
    }

    #[test]
    fn anti_diagonal_is_sign_normalised() {
        let m = BinaryMask::from_fn(30, 30, |x, y| (x as i64 + y as i64 - 29).abs() <= 1).unwrap();
        let ax = shape_principal_axis(&m).unwrap();
        assert!(ax.direction.0 > 0.0);
        assert!((ax.direction.0 - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
        assert!((ax.direction.1 + std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
    }

    #[test]
    fn isotropic_square_flags_tie() {
        let m = BinaryMask::rect(10, 10, 2, 2, 5, 5).unwrap();
        let ax = shape_principal_axis(&m).unwrap();
        assert!(ax.isotropic);
        assert_eq!(ax.direction, (1.0, 0.0));
        assert_eq!(ax.centroid, (4.0, 4.0));
    }

    #[test]
    fn single_pixel_rejected() {
        let mut m = BinaryMask::new(4, 4).unwrap();
        m.set(1, 1, true);
        assert!(shape_principal_axis(&m).is_err());
    }
}
