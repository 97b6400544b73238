//! Small numeric helpers.

/// Arithmetic mean, `None` for an empty slice. The sum is carried in two
/// parts and the division remainder is folded back, so short exact cases
/// such as `(1.0 + 0.8 + 0.6) / 3` come out as the nearest double (`0.8`).
pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for &v in values {
        let t = s + v;
        c += if s.abs() >= v.abs() { (s - t) + v } else { (v - t) + s };
        s = t;
    }
    let n = values.len() as f64;
    let q = s / n;
    // s - q * n without rounding
    let r = (-q).mul_add(n, s);
    Some(q + (r + c) / n)
}
