use serde::{Deserialize, Serialize};

use super::{BinaryMask, Pixel};
use crate::error::{Error, Result};

/// Clockwise ring (image y axis points down), starting at the west neighbour.
const RING: [(i64, i64); 8] = [
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
];

const WEST: usize = 0;

fn ring_index(dx: i64, dy: i64) -> usize {
    RING.iter()
        .position(|&d| d == (dx, dy))
        .expect("offset is an 8-neighbour")
}

/// Closed 8-connected walk along the outer boundary of a region.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TracedContour {
    pub points: Vec<Pixel>,
}

impl TracedContour {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index of the point closest (Euclidean) to `p`; ties go to the lower index.
    pub fn nearest_index(&self, p: Pixel) -> usize {
        self.points
            .iter()
            .enumerate()
            .min_by_key(|(i, q)| (q.dist2(p), *i))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }
}

/// The largest 8-connected component. Equal sizes resolve to the component
/// whose first pixel comes earliest in row-major order.
pub fn largest_component(m: &BinaryMask) -> Option<BinaryMask> {
    let (w, h) = m.dims();
    let fg = m.to_row_major();
    let mut label = vec![0u32; w * h];
    let mut best: Option<(usize, u32)> = None;
    let mut next = 0u32;
    let mut stack = Vec::new();
    for start in 0..w * h {
        if !fg[start] || label[start] != 0 {
            continue;
        }
        next += 1;
        label[start] = next;
        stack.push(start);
        let mut size = 0usize;
        while let Some(i) = stack.pop() {
            size += 1;
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            for (dx, dy) in RING {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if fg[j] && label[j] == 0 {
                    label[j] = next;
                    stack.push(j);
                }
            }
        }
        if best.is_none_or(|(s, _)| size > s) {
            best = Some((size, next));
        }
    }
    let (_, keep) = best?;
    Some(BinaryMask::from_fn(w, h, |x, y| label[y * w + x] == keep).expect("valid dims"))
}

/// Moore-neighbour walk around the outer boundary of the largest component.
///
/// The walk starts at the component's top-most, left-most pixel and proceeds
/// clockwise. It ends when the first step is about to be repeated, so pixels
/// on one-pixel-wide parts appear once per pass.
pub fn trace_contour(m: &BinaryMask) -> Result<TracedContour> {
    let comp = largest_component(m).ok_or(Error::EmptyMask)?;
    let start = comp.iter_ones().next().expect("component is nonempty");

    let step = |p: Pixel, backtrack: usize| -> Option<(Pixel, usize)> {
        let (px, py) = (p.x as i64, p.y as i64);
        for i in 1..=8 {
            let d = (backtrack + i) % 8;
            let (qx, qy) = (px + RING[d].0, py + RING[d].1);
            if comp.contains(qx, qy) {
                let prev = RING[(backtrack + i - 1) % 8];
                let (bx, by) = (px + prev.0, py + prev.1);
                let q = Pixel::new(qx as u32, qy as u32);
                return Some((q, ring_index(bx - qx, by - qy)));
            }
        }
        None
    };

    let mut points = vec![start];
    let Some((first, first_back)) = step(start, WEST) else {
        return Ok(TracedContour { points });
    };
    let (mut cur, mut back) = (first, first_back);
    let limit = 4 * comp.count_ones() + 8;
    loop {
        let (next, next_back) = step(cur, back).expect("walk stays on the component");
        if cur == start && next == first {
            break;
        }
        points.push(cur);
        assert!(points.len() <= limit, "contour walk failed to close");
        cur = next;
        back = next_back;
    }
    Ok(TracedContour { points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::boundary_pixels;
    use proptest::prelude::*;
    use std::collections::{BTreeSet, VecDeque};

    fn p(x: u32, y: u32) -> Pixel {
        Pixel::new(x, y)
    }

    #[test]
    fn single_pixel() {
        let m = BinaryMask::from_ascii(&["...", ".#.", "..."]).unwrap();
        assert_eq!(trace_contour(&m).unwrap().points, vec![p(1, 1)]);
    }

    #[test]
    fn empty_rejected() {
        let m = BinaryMask::new(3, 3).unwrap();
        assert!(matches!(trace_contour(&m), Err(Error::EmptyMask)));
    }

    #[test]
    fn square_is_traced_clockwise() {
        let m = BinaryMask::rect(6, 6, 1, 1, 4, 4).unwrap();
        let c = trace_contour(&m).unwrap();
        let expected = vec![
            p(1, 1),
            p(2, 1),
            p(3, 1),
            p(4, 1),
            p(4, 2),
            p(4, 3),
            p(4, 4),
            p(3, 4),
            p(2, 4),
            p(1, 4),
            p(1, 3),
            p(1, 2),
        ];
        assert_eq!(c.points, expected);
    }

    #[test]
    fn picks_largest_component() {
        let m = BinaryMask::from_ascii(&[
            "##.....", //
            "##.....",
            ".......",
            "...###.",
            "...###.",
            "...###.",
        ])
        .unwrap();
        let c = trace_contour(&m).unwrap();
        assert_eq!(c.len(), 8);
        assert!(c.points.iter().all(|q| q.x >= 3 && q.y >= 3));
        assert_eq!(c.points[0], p(3, 3));
    }

    #[test]
    fn equal_components_prefer_row_major_first() {
        let m = BinaryMask::from_ascii(&["....##", "##..##", "##...."]).unwrap();
        let comp = largest_component(&m).unwrap();
        assert!(comp.get(4, 0));
        assert!(!comp.get(0, 1));
    }

    #[test]
    fn thin_line_walks_out_and_back() {
        let m = BinaryMask::from_ascii(&["####"]).unwrap();
        let c = trace_contour(&m).unwrap();
        assert_eq!(c.points, vec![p(0, 0), p(1, 0), p(2, 0), p(3, 0), p(2, 0), p(1, 0)]);
    }

    /// Component pixels 4-adjacent to the background region reachable from
    /// outside the frame.
    fn outer_boundary_oracle(comp: &BinaryMask) -> BTreeSet<Pixel> {
        let (w, h) = (comp.width() as i64 + 2, comp.height() as i64 + 2);
        let fg = |x: i64, y: i64| comp.contains(x - 1, y - 1);
        let mut outside = vec![false; (w * h) as usize];
        let mut q = VecDeque::from([(0i64, 0i64)]);
        outside[0] = true;
        while let Some((x, y)) = q.pop_front() {
            for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w || ny >= h {
                    continue;
                }
                let i = (ny * w + nx) as usize;
                if !outside[i] && !fg(nx, ny) {
                    outside[i] = true;
                    q.push_back((nx, ny));
                }
            }
        }
        comp.iter_ones()
            .filter(|pt| {
                let (x, y) = (pt.x as i64 + 1, pt.y as i64 + 1);
                [(1, 0), (-1, 0), (0, 1), (0, -1)]
                    .iter()
                    .any(|(dx, dy)| outside[((y + dy) * w + x + dx) as usize])
            })
            .collect()
    }

    fn arb_mask() -> impl Strategy<Value = BinaryMask> {
        (1usize..20, 1usize..20, 0.2f64..0.8).prop_flat_map(|(w, h, d)| {
            proptest::collection::vec(proptest::bool::weighted(d), w * h)
                .prop_map(move |bits| BinaryMask::from_row_major(w, h, &bits).unwrap())
        })
    }

    proptest! {
        #[test]
        fn trace_is_closed_and_matches_outer_boundary(m in arb_mask()) {
            prop_assume!(!m.is_empty());
            let c = trace_contour(&m).unwrap();
            let comp = largest_component(&m).unwrap();
            let n = c.len();
            for i in 0..n {
                let (a, b) = (c.points[i], c.points[(i + 1) % n]);
                prop_assert!(n == 1 || a.chebyshev(b) == 1);
            }
            let boundary = boundary_pixels(&comp);
            for q in &c.points {
                prop_assert!(boundary.contains_pixel(*q));
            }
            let traced: BTreeSet<Pixel> = c.points.iter().copied().collect();
            prop_assert_eq!(traced, outer_boundary_oracle(&comp));
            prop_assert_eq!(c.points[0], comp.iter_ones().next().unwrap());
        }
    }
}
