use crate::mask::{BinaryMask, Pixel};

/// Sparse pixel -> proposal membership table.
///
/// Stored as compressed rows: `ids[offsets[i]..offsets[i + 1]]` are the
/// proposals whose contour band covers row-major pixel `i`, ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvertedIndex {
    width: usize,
    height: usize,
    offsets: Vec<usize>,
    ids: Vec<u32>,
}

impl InvertedIndex {
    /// `contours[j]` is the contour band of proposal `j`; all share `width x height`.
    pub fn build(width: usize, height: usize, contours: &[&BinaryMask]) -> Self {
        let n = width * height;
        let mut offsets = vec![0usize; n + 1];
        for c in contours {
            debug_assert_eq!(c.dims(), (width, height));
            for i in c.iter_linear() {
                offsets[i + 1] += 1;
            }
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut cursor = offsets[..n].to_vec();
        let mut ids = vec![0u32; offsets[n]];
        for (j, c) in contours.iter().enumerate() {
            for i in c.iter_linear() {
                ids[cursor[i]] = j as u32;
                cursor[i] += 1;
            }
        }
        InvertedIndex {
            width,
            height,
            offsets,
            ids,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Proposals voted for by a click at `p`; empty outside the frame.
    pub fn at(&self, p: Pixel) -> &[u32] {
        let (x, y) = (p.x as usize, p.y as usize);
        if x >= self.width || y >= self.height {
            return &[];
        }
        self.at_linear(y * self.width + x)
    }

    pub fn at_linear(&self, i: usize) -> &[u32] {
        &self.ids[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Number of (pixel, proposal) pairs, i.e. the count of ones in the dense table.
    pub fn entries(&self) -> usize {
        self.ids.len()
    }
}
