//! Bit-packed binary masks and the pixel-level primitives every other module
//! is built on: set algebra, IoU, boundaries, dilation, contour tracing,
//! principal axes and run-length encoding.
//!
//! Rows are packed independently into `u64` words (bit `b` of word `i` in a
//! row is pixel `x = 64 * i + b`). Padding bits past `width` are always zero,
//! so population counts over whole words are exact.

mod contour;
mod morph;
mod rle;
mod shape;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use contour::{largest_component, trace_contour, TracedContour};
pub use morph::{boundary_pixels, dilate, erode, ContourMask, DEFAULT_DILATION_RADIUS};
pub use rle::{rle_decode, rle_encode, rle_from_runs, rle_runs};
pub use shape::{shape_principal_axis, PrincipalAxis};

const WORD_BITS: usize = 64;

/// Integer pixel coordinate in original-image space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pixel {
    pub x: u32,
    pub y: u32,
}

impl Pixel {
    pub const fn new(x: u32, y: u32) -> Self {
        Pixel { x, y }
    }

    pub fn dist2(self, other: Pixel) -> u64 {
        let dx = self.x as i64 - other.x as i64;
        let dy = self.y as i64 - other.y as i64;
        (dx * dx + dy * dy) as u64
    }

    pub fn chebyshev(self, other: Pixel) -> u32 {
        self.x.abs_diff(other.x).max(self.y.abs_diff(other.y))
    }
}

impl fmt::Display for Pixel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Rectangular grid of foreground/background bits.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    stride: usize,
    words: Vec<u64>,
}

impl fmt::Debug for BinaryMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BinaryMask")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("foreground", &self.count_ones())
            .finish()
    }
}

impl BinaryMask {
    /// An all-background mask.
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidDimensions { width, height });
        }
        let stride = width.div_ceil(WORD_BITS);
        Ok(BinaryMask {
            width,
            height,
            stride,
            words: vec![0; stride * height],
        })
    }

    pub fn full(width: usize, height: usize) -> Result<Self> {
        let mut m = Self::new(width, height)?;
        m.words.fill(!0);
        m.clear_padding();
        Ok(m)
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> bool,
    ) -> Result<Self> {
        let mut m = Self::new(width, height)?;
        for y in 0..height {
            for x in 0..width {
                if f(x, y) {
                    m.set(x, y, true);
                }
            }
        }
        Ok(m)
    }

    /// Row-major booleans, `bits.len() == width * height`.
    pub fn from_row_major(width: usize, height: usize, bits: &[bool]) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::invalid(format!(
                "bit sequence of length {} does not match {width}x{height}",
                bits.len()
            )));
        }
        Self::from_fn(width, height, |x, y| bits[y * width + x])
    }

    /// Parse a picture such as `["..#", ".##"]`; `#` and `1` are foreground.
    pub fn from_ascii(rows: &[&str]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.chars().count());
        if rows.iter().any(|r| r.chars().count() != width) {
            return Err(Error::invalid("ragged ascii mask"));
        }
        let grid: Vec<Vec<bool>> = rows
            .iter()
            .map(|r| r.chars().map(|c| c == '#' || c == '1').collect())
            .collect();
        Self::from_fn(width, height, |x, y| grid[y][x])
    }

    /// Axis-aligned filled rectangle `[x0, x0 + w) x [y0, y0 + h)`, clipped.
    pub fn rect(
        width: usize,
        height: usize,
        x0: usize,
        y0: usize,
        w: usize,
        h: usize,
    ) -> Result<Self> {
        Self::from_fn(width, height, |x, y| {
            x >= x0 && x < x0 + w && y >= y0 && y < y0 + h
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn in_bounds(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height
    }

    /// Bounds-checked read; pixels outside the image are background.
    pub fn contains(&self, x: i64, y: i64) -> bool {
        self.in_bounds(x, y) && self.get(x as usize, y as usize)
    }

    pub fn contains_pixel(&self, p: Pixel) -> bool {
        self.contains(p.x as i64, p.y as i64)
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        assert!(x < self.width && y < self.height, "pixel ({x}, {y}) out of bounds");
        let w = self.words[y * self.stride + x / WORD_BITS];
        (w >> (x % WORD_BITS)) & 1 == 1
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        assert!(x < self.width && y < self.height, "pixel ({x}, {y}) out of bounds");
        let w = &mut self.words[y * self.stride + x / WORD_BITS];
        let bit = 1u64 << (x % WORD_BITS);
        if value {
            *w |= bit;
        } else {
            *w &= !bit;
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// True when no pixel is foreground.
    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Foreground pixels in row-major order.
    pub fn iter_ones(&self) -> impl Iterator<Item = Pixel> + '_ {
        self.iter_linear()
            .map(move |i| Pixel::new((i % self.width) as u32, (i / self.width) as u32))
    }

    /// Row-major linear indices `y * width + x` of the foreground pixels.
    pub fn iter_linear(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(move |(wi, &word)| {
            let y = wi / self.stride;
            let base = (wi % self.stride) * WORD_BITS;
            BitIter(word).map(move |b| y * self.width + base + b)
        })
    }

    pub fn to_row_major(&self) -> Vec<bool> {
        let mut out = vec![false; self.pixel_count()];
        for i in self.iter_linear() {
            out[i] = true;
        }
        out
    }

    pub fn check_same_dims(&self, other: &BinaryMask) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                found: other.dims(),
            });
        }
        Ok(())
    }

    pub fn intersection_count(&self, other: &BinaryMask) -> Result<usize> {
        self.check_same_dims(other)?;
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum())
    }

    pub fn union_count(&self, other: &BinaryMask) -> Result<usize> {
        self.check_same_dims(other)?;
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a | b).count_ones() as usize)
            .sum())
    }

    pub fn union(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.zip_with(other, |a, b| a | b)
    }

    pub fn intersection(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.zip_with(other, |a, b| a & b)
    }

    /// Pixels of `self` that are not in `other`.
    pub fn difference(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.zip_with(other, |a, b| a & !b)
    }

    pub fn complement(&self) -> BinaryMask {
        let mut out = self.clone();
        for w in &mut out.words {
            *w = !*w;
        }
        out.clear_padding();
        out
    }

    pub fn is_subset_of(&self, other: &BinaryMask) -> Result<bool> {
        self.check_same_dims(other)?;
        Ok(self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0))
    }

    /// Inclusive bounding box `(min, max)` of the foreground.
    pub fn bounding_box(&self) -> Option<(Pixel, Pixel)> {
        let mut it = self.iter_ones();
        let first = it.next()?;
        let (mut x0, mut y0, mut x1, mut y1) = (first.x, first.y, first.x, first.y);
        for p in it {
            x0 = x0.min(p.x);
            x1 = x1.max(p.x);
            y0 = y0.min(p.y);
            y1 = y1.max(p.y);
        }
        Some((Pixel::new(x0, y0), Pixel::new(x1, y1)))
    }

    /// Shift the foreground by `(dx, dy)`; pixels leaving the frame are dropped.
    pub fn translated(&self, dx: i64, dy: i64) -> BinaryMask {
        let mut out = BinaryMask::new(self.width, self.height).expect("valid dims");
        for p in self.iter_ones() {
            let (x, y) = (p.x as i64 + dx, p.y as i64 + dy);
            if self.in_bounds(x, y) {
                out.set(x as usize, y as usize, true);
            }
        }
        out
    }

    fn zip_with(&self, other: &BinaryMask, f: impl Fn(u64, u64) -> u64) -> Result<BinaryMask> {
        self.check_same_dims(other)?;
        let mut out = self.clone();
        for (a, b) in out.words.iter_mut().zip(&other.words) {
            *a = f(*a, *b);
        }
        out.clear_padding();
        Ok(out)
    }

    fn or_assign(&mut self, other: &BinaryMask) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= *b;
        }
    }

    fn and_assign(&mut self, other: &BinaryMask) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= *b;
        }
    }

    fn clear_padding(&mut self) {
        let rem = self.width % WORD_BITS;
        if rem == 0 {
            return;
        }
        let keep = (1u64 << rem) - 1;
        for y in 0..self.height {
            self.words[y * self.stride + self.stride - 1] &= keep;
        }
    }

    fn row_mut(&mut self, y: usize) -> &mut [u64] {
        &mut self.words[y * self.stride..(y + 1) * self.stride]
    }

    /// out(x, y) = in(x - 1, y)
    fn shifted_east(&self) -> BinaryMask {
        let mut out = self.clone();
        for y in 0..out.height {
            let mut carry = 0u64;
            for w in out.row_mut(y) {
                let next = *w >> 63;
                *w = (*w << 1) | carry;
                carry = next;
            }
        }
        out.clear_padding();
        out
    }

    /// out(x, y) = in(x + 1, y)
    fn shifted_west(&self) -> BinaryMask {
        let mut out = self.clone();
        for y in 0..out.height {
            let mut carry = 0u64;
            for w in out.row_mut(y).iter_mut().rev() {
                let next = *w & 1;
                *w = (*w >> 1) | (carry << 63);
                carry = next;
            }
        }
        out
    }

    /// out(x, y) = in(x, y - 1)
    fn shifted_south(&self) -> BinaryMask {
        let mut out = BinaryMask::new(self.width, self.height).expect("valid dims");
        let s = self.stride;
        out.words[s..].copy_from_slice(&self.words[..s * (self.height - 1)]);
        out
    }

    /// out(x, y) = in(x, y + 1)
    fn shifted_north(&self) -> BinaryMask {
        let mut out = BinaryMask::new(self.width, self.height).expect("valid dims");
        let s = self.stride;
        out.words[..s * (self.height - 1)].copy_from_slice(&self.words[s..]);
        out
    }
}

struct BitIter(u64);

impl Iterator for BitIter {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let b = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(b)
    }
}

/// Intersection over union. Two empty masks agree perfectly and score 1.0.
pub fn iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    let union = a.union_count(b)?;
    if union == 0 {
        return Ok(1.0);
    }
    let inter = a.intersection_count(b)?;
    Ok(inter as f64 / union as f64)
}
