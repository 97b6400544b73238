//! Procedural object masks for synthetic datasets.

use std::f64::consts::PI;

use rand::Rng;

use crate::mask::{largest_component, BinaryMask};

/// Filled ellipse with semi-axes `a` (along `angle`) and `b`.
pub fn ellipse(
    width: usize,
    height: usize,
    center: (f64, f64),
    a: f64,
    b: f64,
    angle: f64,
) -> BinaryMask {
    let (s, c) = angle.sin_cos();
    let (a, b) = (a.max(0.5), b.max(0.5));
    BinaryMask::from_fn(width, height, |x, y| {
        let (dx, dy) = (x as f64 - center.0, y as f64 - center.1);
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        (u / a).powi(2) + (v / b).powi(2) <= 1.0
    })
    .expect("nonzero dims")
}

/// An elliptical body with zero to three limbs sticking out of it, placed
/// fully inside the frame.
pub fn random_object<R: Rng + ?Sized>(width: usize, height: usize, rng: &mut R) -> BinaryMask {
    let short = width.min(height) as f64;
    let a = rng.random_range(0.12..0.2) * short;
    let b = a * rng.random_range(0.55..1.0);
    let angle = rng.random_range(0.0..PI);
    let margin = 0.42 * short;
    let cx = rng.random_range(margin..(width as f64 - margin).max(margin + 1.0));
    let cy = rng.random_range(margin..(height as f64 - margin).max(margin + 1.0));
    let mut obj = ellipse(width, height, (cx, cy), a, b, angle);
    let limbs = rng.random_range(0..=3);
    for _ in 0..limbs {
        let dir = rng.random_range(0.0..2.0 * PI);
        let len = a * rng.random_range(0.5..0.9);
        let thick = b * rng.random_range(0.2..0.35);
        // limb centre sits roughly on the body outline, pointing outward
        let (ux, uy) = (dir.cos(), dir.sin());
        let (lx, ly) = (ux * angle.cos() - uy * angle.sin(), ux * angle.sin() + uy * angle.cos());
        let reach = (a * b) / ((b * ux).powi(2) + (a * uy).powi(2)).sqrt();
        let center = (cx + lx * (reach + 0.5 * len), cy + ly * (reach + 0.5 * len));
        let limb = ellipse(width, height, center, len, thick, ly.atan2(lx));
        obj = obj.union(&limb).expect("same dims");
    }
    largest_component(&obj).expect("body is nonempty")
}
