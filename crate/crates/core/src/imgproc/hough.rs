use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::geom::{LineSegment, Point};
use crate::imgproc::EdgeMap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoughParams {
    /// Accumulator distance resolution in pixels.
    pub rho_res: f64,
    /// Accumulator angle resolution in degrees.
    pub theta_res: f64,
    /// Minimum supporting edge pixels for a returned segment.
    pub votes_min: u32,
    /// Minimum segment length in pixels.
    pub min_len: f64,
    /// Largest gap in pixels bridged inside one segment.
    pub max_gap: f64,
}

impl Default for HoughParams {
    fn default() -> Self {
        HoughParams {
            rho_res: 1.0,
            theta_res: 1.0,
            votes_min: 50,
            min_len: 30.0,
            max_gap: 10.0,
        }
    }
}

impl HoughParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho_res > 0.0) || !(self.theta_res > 0.0) || self.theta_res > 90.0 {
            return Err(param("hough resolutions must be positive (theta_res at most 90)"));
        }
        if self.votes_min < 1 {
            return Err(param("hough votes_min must be at least 1"));
        }
        if !(self.min_len >= 0.0) || !(self.max_gap >= 0.0) {
            return Err(param("hough min_len and max_gap must be non-negative"));
        }
        Ok(())
    }
}

// Half-width of the strip gathered around an accumulator peak, and of the
// strip re-gathered around the fitted line.
const PEAK_CORRIDOR: f64 = 2.0;
const FIT_CORRIDOR: f64 = 1.5;

struct Accumulator {
    n_theta: usize,
    n_rho: usize,
    rho_res: f64,
    rho_offset: f64,
    cos: Vec<f64>,
    sin: Vec<f64>,
    votes: Vec<u32>,
}

impl Accumulator {
    fn new(width: u32, height: u32, p: &HoughParams) -> Self {
        let n_theta = (180.0 / p.theta_res).ceil() as usize;
        let (cos, sin) = (0..n_theta)
            .map(|i| {
                let t = (i as f64 * p.theta_res).to_radians();
                (t.cos(), t.sin())
            })
            .unzip();
        let diag = f64::from(width).hypot(f64::from(height));
        let n_rho = (2.0 * diag / p.rho_res).ceil() as usize + 1;
        Accumulator {
            n_theta,
            n_rho,
            rho_res: p.rho_res,
            rho_offset: diag,
            cos,
            sin,
            votes: vec![0; n_theta * n_rho],
        }
    }

    fn cell(&self, t: usize, x: f64, y: f64) -> usize {
        let rho = x * self.cos[t] + y * self.sin[t];
        let r = ((rho + self.rho_offset) / self.rho_res).round() as usize;
        t * self.n_rho + r.min(self.n_rho - 1)
    }

    fn add(&mut self, p: (f64, f64), delta: i32) {
        for t in 0..self.n_theta {
            let c = self.cell(t, p.0, p.1);
            self.votes[c] = self.votes[c].saturating_add_signed(delta);
        }
    }

    fn peak(&self) -> (usize, u32) {
        let mut best = (0, 0);
        for (i, &v) in self.votes.iter().enumerate() {
            if v > best.1 {
                best = (i, v);
            }
        }
        best
    }

    /// Unit normal and offset of a cell's line `x cos t + y sin t = rho`.
    fn line_of(&self, cell: usize) -> ((f64, f64), f64) {
        let t = cell / self.n_rho;
        let r = cell % self.n_rho;
        ((self.cos[t], self.sin[t]), r as f64 * self.rho_res - self.rho_offset)
    }
}

/// Total-least-squares line: centroid and unit direction.
fn fit_line(pts: &[(f64, f64)]) -> ((f64, f64), (f64, f64)) {
    let n = pts.len() as f64;
    let (mx, my) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
    let (mx, my) = (mx / n, my / n);
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for &(x, y) in pts {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let angle = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    ((mx, my), (angle.cos(), angle.sin()))
}

fn gather(
    pts: &[(f64, f64)],
    used: &[bool],
    normal: (f64, f64),
    rho: f64,
    half_width: f64,
) -> Vec<usize> {
    (0..pts.len())
        .filter(|&i| !used[i] && (pts[i].0 * normal.0 + pts[i].1 * normal.1 - rho).abs() <= half_width)
        .collect()
}

/// Segment Hough transform.
///
/// Repeatedly takes the strongest accumulator cell, gathers the unused edge
/// pixels along it, refines the line by a least-squares fit and splits the
/// pixels into runs wherever the gap exceeds `max_gap`. Runs long enough and
/// supported by at least `votes_min` pixels become segments, and their
/// pixels are withdrawn from the accumulator. Output order is the order of
/// extraction, which is fully deterministic.
pub fn hough_segments(edges: &EdgeMap, p: &HoughParams) -> Result<Vec<LineSegment>> {
    p.validate()?;
    let pts: Vec<(f64, f64)> = edges
        .iter_set()
        .map(|(x, y)| (f64::from(x), f64::from(y)))
        .collect();
    let mut out = Vec::new();
    if pts.is_empty() {
        return Ok(out);
    }
    let mut acc = Accumulator::new(edges.width(), edges.height(), p);
    for &q in &pts {
        acc.add(q, 1);
    }
    let mut used = vec![false; pts.len()];

    loop {
        let (cell, votes) = acc.peak();
        if votes < p.votes_min {
            break;
        }
        let (normal, rho) = acc.line_of(cell);
        let mut members = gather(&pts, &used, normal, rho, PEAK_CORRIDOR.max(p.rho_res));
        let mut dir = (-normal.1, normal.0);
        if members.len() >= 2 {
            let sel: Vec<_> = members.iter().map(|&i| pts[i]).collect();
            let (c, d) = fit_line(&sel);
            let n = (-d.1, d.0);
            members = gather(&pts, &used, n, c.0 * n.0 + c.1 * n.1, FIT_CORRIDOR);
            dir = d;
        }

        let mut along: Vec<(f64, usize)> = members
            .iter()
            .map(|&i| (pts[i].0 * dir.0 + pts[i].1 * dir.1, i))
            .collect();
        along.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        let mut accepted = false;
        let mut run_start = 0;
        for k in 1..=along.len() {
            let split = k == along.len() || along[k].0 - along[k - 1].0 > p.max_gap + 1.0;
            if !split {
                continue;
            }
            let run = &along[run_start..k];
            run_start = k;
            let span = run.last().map_or(0.0, |l| l.0) - run.first().map_or(0.0, |f| f.0);
            if run.len() < p.votes_min as usize || span < p.min_len {
                continue;
            }
            let run_pts: Vec<_> = run.iter().map(|&(_, i)| pts[i]).collect();
            let (c, d) = fit_line(&run_pts);
            let project = |q: (f64, f64)| {
                let t = (q.0 - c.0) * d.0 + (q.1 - c.1) * d.1;
                Point::new(c.0 + t * d.0, c.1 + t * d.1)
            };
            let (lo, hi) = run_pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), q| {
                let t = (q.0 - c.0) * d.0 + (q.1 - c.1) * d.1;
                (lo.min(t), hi.max(t))
            });
            let p0 = project((c.0 + lo * d.0, c.1 + lo * d.1));
            let p1 = project((c.0 + hi * d.0, c.1 + hi * d.1));
            if let Some(seg) = LineSegment::new(p0, p1) {
                if seg.length() >= p.min_len {
                    out.push(seg);
                    accepted = true;
                    for &(_, i) in run {
                        used[i] = true;
                        acc.add(pts[i], -1);
                    }
                }
            }
        }
        if !accepted {
            acc.votes[cell] = 0;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgproc::BinaryMask;

    fn paint(w: u32, h: u32, lines: &[((f64, f64), (f64, f64))]) -> EdgeMap {
        let mut m = BinaryMask::new(w, h).unwrap();
        for &((x0, y0), (x1, y1)) in lines {
            let n = (x1 - x0).abs().max((y1 - y0).abs()).ceil() as usize;
            for k in 0..=n {
                let t = k as f64 / n as f64;
                let x = (x0 + t * (x1 - x0)).round() as u32;
                let y = (y0 + t * (y1 - y0)).round() as u32;
                m.set(x, y, true);
            }
        }
        EdgeMap::from_mask(m)
    }

    #[test]
    fn empty_map_has_no_segments() {
        let e = EdgeMap::from_mask(BinaryMask::new(50, 50).unwrap());
        assert!(hough_segments(&e, &HoughParams::default()).unwrap().is_empty());
    }

    #[test]
    fn single_horizontal_line() {
        let p = HoughParams::default();
        let e = paint(200, 200, &[((20.0, 100.0), (180.0, 100.0))]);
        let segs = hough_segments(&e, &p).unwrap();
        assert_eq!(segs.len(), 1, "{segs:?}");
        assert!(segs[0].theta().abs() <= p.theta_res);
        assert!(segs[0].length() >= 150.0);
        assert!(segs[0].p0.distance(Point::new(20.0, 100.0)) <= p.max_gap);
        assert!(segs[0].p1.distance(Point::new(180.0, 100.0)) <= p.max_gap);
    }

    #[test]
    fn perpendicular_lines() {
        let p = HoughParams::default();
        let e = paint(
            200,
            200,
            &[((20.0, 40.0), (170.0, 190.0)), ((30.0, 170.0), (170.0, 30.0))],
        );
        let segs = hough_segments(&e, &p).unwrap();
        assert_eq!(segs.len(), 2, "{segs:?}");
        let d = (segs[0].theta() - segs[1].theta()).abs();
        assert!((d - 90.0).abs() <= 2.0 * p.theta_res, "{d}");
    }

    #[test]
    fn gaps_split_segments() {
        let p = HoughParams {
            votes_min: 20,
            min_len: 20.0,
            max_gap: 5.0,
            ..HoughParams::default()
        };
        let e = paint(
            200,
            100,
            &[((10.0, 50.0), (70.0, 50.0)), ((90.0, 50.0), (150.0, 50.0))],
        );
        assert_eq!(hough_segments(&e, &p).unwrap().len(), 2);
        let bridged = HoughParams { max_gap: 25.0, ..p };
        let segs = hough_segments(&e, &bridged).unwrap();
        assert_eq!(segs.len(), 1);
        assert!(segs[0].length() > 139.0);
    }

    #[test]
    fn bad_parameters() {
        let e = EdgeMap::from_mask(BinaryMask::new(5, 5).unwrap());
        let bad = HoughParams { votes_min: 0, ..HoughParams::default() };
        assert!(hough_segments(&e, &bad).is_err());
        let bad = HoughParams { rho_res: 0.0, ..HoughParams::default() };
        assert!(hough_segments(&e, &bad).is_err());
    }
}
