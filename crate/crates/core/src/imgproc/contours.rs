use crate::error::{Error, Result};
use crate::geom::Point;
use crate::imgproc::BinaryMask;

/// Outer boundary of one 8-connected component together with the raw
/// moments of its filled pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct Contour {
    /// Closed 8-connected boundary trace, clockwise in image coordinates.
    pub points: Vec<(u32, u32)>,
    /// Filled area in pixels.
    pub area: f64,
    m10: f64,
    m01: f64,
}

impl Contour {
    /// Builds a contour from an explicit pixel set. The boundary is traced
    /// only when the pixels form a single 8-connected component.
    pub fn from_pixels(pixels: &[(u32, u32)]) -> Contour {
        let (m10, m01) = pixels.iter().fold((0.0, 0.0), |(a, b), &(x, y)| {
            (a + f64::from(x), b + f64::from(y))
        });
        let points = if pixels.is_empty() {
            Vec::new()
        } else {
            let w = pixels.iter().map(|p| p.0).max().unwrap_or(0) + 1;
            let h = pixels.iter().map(|p| p.1).max().unwrap_or(0) + 1;
            let mut m = BinaryMask::new(w, h).expect("non-empty");
            for &(x, y) in pixels {
                m.set(x, y, true);
            }
            let start = *pixels.iter().min_by_key(|p| (p.1, p.0)).expect("non-empty");
            trace_outer(&m, start)
        };
        Contour {
            points,
            area: pixels.len() as f64,
            m10,
            m01,
        }
    }
}

/// Moment centroid `(m10 / m00, m01 / m00)` of the filled component.
pub fn centroid(c: &Contour) -> Result<Point> {
    if !(c.area > 0.0) {
        return Err(Error::DegenerateContour);
    }
    Ok(Point::new(c.m10 / c.area, c.m01 / c.area))
}

// Clockwise with y pointing down: E, SE, S, SW, W, NW, N, NE.
const DIRS: [(i64, i64); 8] = [
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
];

/// Moore-neighbour boundary following from the component's first pixel in
/// raster order, stopped by Jacob's criterion.
fn trace_outer(mask: &BinaryMask, start: (u32, u32)) -> Vec<(u32, u32)> {
    let at = |p: (i64, i64), d: usize| (p.0 + DIRS[d].0, p.1 + DIRS[d].1);
    let s = (i64::from(start.0), i64::from(start.1));
    let mut points = vec![start];

    // The pixel west of the start is background, so the sweep begins there.
    let first = (0..8)
        .map(|k| (4 + 1 + k) % 8)
        .find(|&d| {
            let q = at(s, d);
            mask.get_signed(q.0, q.1)
        });
    let Some(first_dir) = first else {
        return points;
    };

    let mut cur = at(s, first_dir);
    let mut dir = first_dir;
    loop {
        if cur == s {
            // Jacob's criterion: leaving the start the same way we first did.
            let next = (0..8)
                .map(|k| (dir + 5 + k) % 8)
                .find(|&d| {
                    let q = at(cur, d);
                    mask.get_signed(q.0, q.1)
                })
                .expect("start has a neighbour");
            if next == first_dir {
                break;
            }
            // Passing through the start without stopping: keep the chain connected.
            points.push(start);
            dir = next;
            cur = at(cur, next);
            continue;
        }
        points.push((cur.0 as u32, cur.1 as u32));
        let next = (0..8)
            .map(|k| (dir + 5 + k) % 8)
            .find(|&d| {
                let q = at(cur, d);
                mask.get_signed(q.0, q.1)
            })
            .expect("a traced pixel has a neighbour");
        dir = next;
        cur = at(cur, next);
    }
    points
}

/// One contour per 8-connected component, ordered by each component's
/// first pixel in raster order.
pub fn find_contours(mask: &BinaryMask) -> Vec<Contour> {
    let (w, h) = (mask.width() as usize, mask.height() as usize);
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if seen[start] || !mask.bits()[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let (mut area, mut m10, mut m01) = (0.0, 0.0, 0.0);
        while let Some(i) = stack.pop() {
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            area += 1.0;
            m10 += x as f64;
            m01 += y as f64;
            for (dx, dy) in DIRS {
                let (nx, ny) = (x + dx, y + dy);
                if mask.get_signed(nx, ny) {
                    let j = ny as usize * w + nx as usize;
                    if !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        let first = ((start % w) as u32, (start / w) as u32);
        out.push(Contour {
            points: trace_outer(mask, first),
            area,
            m10,
            m01,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask_of(w: u32, h: u32, px: &[(u32, u32)]) -> BinaryMask {
        let mut m = BinaryMask::new(w, h).unwrap();
        for &(x, y) in px {
            m.set(x, y, true);
        }
        m
    }

    fn block(x0: u32, y0: u32, n: u32) -> Vec<(u32, u32)> {
        (y0..y0 + n).flat_map(|y| (x0..x0 + n).map(move |x| (x, y))).collect()
    }

    fn assert_closed_chain(c: &Contour) {
        let n = c.points.len();
        for i in 0..n {
            let a = c.points[i];
            let b = c.points[(i + 1) % n];
            let dx = (i64::from(a.0) - i64::from(b.0)).abs();
            let dy = (i64::from(a.1) - i64::from(b.1)).abs();
            assert!(n == 1 || (dx <= 1 && dy <= 1 && (dx, dy) != (0, 0)), "{a:?} -> {b:?}");
        }
    }

    #[test]
    fn empty_mask_has_no_contours() {
        assert!(find_contours(&BinaryMask::new(6, 6).unwrap()).is_empty());
    }

    #[test]
    fn solid_block() {
        let cs = find_contours(&mask_of(8, 8, &block(2, 3, 3)));
        assert_eq!(cs.len(), 1);
        assert_eq!(cs[0].area, 9.0);
        assert_eq!(cs[0].points.len(), 8);
        assert_closed_chain(&cs[0]);
        assert_eq!(centroid(&cs[0]).unwrap(), Point::new(3.0, 4.0));
    }

    #[test]
    fn two_blocks_two_contours() {
        let mut px = block(0, 0, 2);
        px.extend(block(5, 5, 3));
        let cs = find_contours(&mask_of(10, 10, &px));
        assert_eq!(cs.iter().map(|c| c.area).collect::<Vec<_>>(), vec![4.0, 9.0]);
        cs.iter().for_each(assert_closed_chain);
    }

    #[test]
    fn diagonal_touch_is_one_component() {
        let cs = find_contours(&mask_of(5, 5, &[(1, 1), (2, 2), (3, 3)]));
        assert_eq!(cs.len(), 1);
        assert_eq!(cs[0].points, vec![(1, 1), (2, 2), (3, 3), (2, 2)]);
        assert_closed_chain(&cs[0]);
    }

    #[test]
    fn chain_stays_connected_through_start() {
        // A V whose apex is the start pixel: the trace returns to it between
        // the two arms.
        let cs = find_contours(&mask_of(5, 4, &[(2, 0), (1, 1), (0, 2), (3, 1), (4, 2)]));
        assert_eq!(cs.len(), 1);
        assert_closed_chain(&cs[0]);
        assert_eq!(cs[0].points.iter().filter(|&&p| p == (2, 0)).count(), 2);
    }

    #[test]
    fn centroid_reference_values() {
        let c = Contour::from_pixels(&block(10, 10, 3));
        assert_eq!(centroid(&c).unwrap(), Point::new(11.0, 11.0));
        let c = Contour::from_pixels(&[(5, 7)]);
        assert_eq!(centroid(&c).unwrap(), Point::new(5.0, 7.0));
        assert_eq!(c.points, vec![(5, 7)]);

        // L shape: (0..4, 0) plus (0, 1..3); mean enumerated by hand.
        let l = [(0, 0), (1, 0), (2, 0), (3, 0), (0, 1), (0, 2)];
        let c = Contour::from_pixels(&l);
        assert_eq!(centroid(&c).unwrap(), Point::new(6.0 / 6.0, 3.0 / 6.0));
        assert_closed_chain(&c);

        assert!(matches!(centroid(&Contour::from_pixels(&[])), Err(Error::DegenerateContour)));
    }

    #[test]
    fn ring_traces_outer_boundary_only() {
        let mut px = block(1, 1, 5);
        px.retain(|&p| p != (3, 3));
        let cs = find_contours(&mask_of(7, 7, &px));
        assert_eq!(cs.len(), 1);
        assert_eq!(cs[0].area, 24.0);
        assert_eq!(cs[0].points.len(), 16);
        assert!(!cs[0].points.contains(&(3, 2)));
    }
}
