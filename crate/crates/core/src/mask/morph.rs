use super::{BinaryMask, Pixel};

/// Default vote tolerance around a proposal boundary, in pixels.
pub const DEFAULT_DILATION_RADIUS: u32 = 5;

/// Foreground pixels with at least one 4-neighbour that is background or
/// lies outside the image.
pub fn boundary_pixels(m: &BinaryMask) -> BinaryMask {
    let mut interior = m.clone();
    interior.and_assign(&m.shifted_east());
    interior.and_assign(&m.shifted_west());
    interior.and_assign(&m.shifted_south());
    interior.and_assign(&m.shifted_north());
    m.difference(&interior).expect("same dims")
}

/// Dilation by a square structuring element: a pixel is set iff some set
/// pixel of `m` lies within Chebyshev distance `radius`.
pub fn dilate(m: &BinaryMask, radius: u32) -> BinaryMask {
    // beyond max(w, h) every further step is a no-op
    let steps = (radius as usize).min(m.width.max(m.height));
    let mut out = m.clone();
    for _ in 0..steps {
        let mut row = out.clone();
        row.or_assign(&out.shifted_east());
        row.or_assign(&out.shifted_west());
        let mut col = row.clone();
        col.or_assign(&row.shifted_south());
        col.or_assign(&row.shifted_north());
        out = col;
    }
    out
}

/// Erosion by a square structuring element. Pixels outside the frame do not
/// erode the mask.
pub fn erode(m: &BinaryMask, radius: u32) -> BinaryMask {
    dilate(&m.complement(), radius).complement()
}

/// Dilated boundary band of a region mask; the area in which a click counts
/// as a vote for that region.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContourMask {
    band: BinaryMask,
    radius: u32,
}

impl ContourMask {
    pub fn from_region(region: &BinaryMask, radius: u32) -> Self {
        ContourMask {
            band: dilate(&boundary_pixels(region), radius),
            radius,
        }
    }

    pub fn mask(&self) -> &BinaryMask {
        &self.band
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn contains(&self, p: Pixel) -> bool {
        self.band.contains_pixel(p)
    }
}
