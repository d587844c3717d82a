//! Horizontal / diagonal edge selection: Hough segments are split into two
//! angle bands, ranked, and the winners are checked and extended to the
//! image border.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::geom::{intersect, ImageRect, InfiniteLine, LineSegment};
use crate::image::Image;
use crate::imgproc::{canny, gaussian_blur, gaussian_kernel, hough_segments, to_grayscale, EdgeMap, HoughParams};

/// Image border a band's position prior pulls towards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Border {
    Left,
    Right,
    Top,
    Bottom,
}

impl std::str::FromStr for Border {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "left" => Ok(Border::Left),
            "right" => Ok(Border::Right),
            "top" => Ok(Border::Top),
            "bottom" => Ok(Border::Bottom),
            other => Err(format!("unknown border `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Band {
    Horizontal,
    Diagonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineParams {
    pub theta_horiz_max: f64,
    pub theta_diag_lo: f64,
    pub theta_diag_hi: f64,
    pub alpha_length: f64,
    pub beta_angle: f64,
    pub gamma_position: f64,
    pub horizontal_side: Border,
    pub diagonal_side: Border,
    /// Minimum angle between the two representatives, degrees.
    pub min_separation: f64,
    /// Fraction of the image size the crossing point may lie outside the frame.
    pub crossing_margin: f64,
}

impl Default for LineParams {
    fn default() -> Self {
        LineParams {
            theta_horiz_max: 10.0,
            theta_diag_lo: 20.0,
            theta_diag_hi: 70.0,
            alpha_length: 0.5,
            beta_angle: 0.3,
            gamma_position: 0.2,
            horizontal_side: Border::Bottom,
            diagonal_side: Border::Left,
            min_separation: 10.0,
            crossing_margin: 0.5,
        }
    }
}

impl LineParams {
    pub fn validate(&self) -> Result<()> {
        let (h, lo, hi) = (self.theta_horiz_max, self.theta_diag_lo, self.theta_diag_hi);
        if !(0.0 < h && h < lo && lo < hi && hi < 90.0) {
            return Err(param(format!(
                "line bands need 0 < theta_horiz_max ({h}) < theta_diag_lo ({lo}) < theta_diag_hi ({hi}) < 90"
            )));
        }
        let w = [self.alpha_length, self.beta_angle, self.gamma_position];
        if w.iter().any(|&x| !(x >= 0.0)) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(param(format!("score weights {w:?} must be non-negative and sum to 1")));
        }
        if !(self.min_separation >= 0.0) || !(self.crossing_margin >= 0.0) {
            return Err(param("min_separation and crossing_margin must be non-negative"));
        }
        Ok(())
    }

    fn band_center(&self, band: Band) -> f64 {
        match band {
            Band::Horizontal => 0.0,
            Band::Diagonal => 0.5 * (self.theta_diag_lo + self.theta_diag_hi),
        }
    }

    fn band_halfwidth(&self, band: Band) -> f64 {
        match band {
            Band::Horizontal => self.theta_horiz_max,
            Band::Diagonal => 0.5 * (self.theta_diag_hi - self.theta_diag_lo),
        }
    }

    /// Distance of the segment's angle from the band centre. Diagonals are
    /// measured on |theta| so both slant directions share one band.
    fn angle_offset(&self, seg: &LineSegment, band: Band) -> f64 {
        match band {
            Band::Horizontal => seg.theta().abs(),
            Band::Diagonal => (seg.theta().abs() - self.band_center(band)).abs(),
        }
    }
}

/// Splits segments into horizontal and diagonal candidates; the rest are dropped.
pub fn classify(segments: &[LineSegment], p: &LineParams) -> (Vec<LineSegment>, Vec<LineSegment>) {
    let mut h = Vec::new();
    let mut d = Vec::new();
    for s in segments {
        let t = s.theta().abs();
        if t <= p.theta_horiz_max {
            h.push(*s);
        } else if p.theta_diag_lo < t && t < p.theta_diag_hi {
            d.push(*s);
        }
    }
    (h, d)
}

pub fn score(seg: &LineSegment, band: Band, rect: ImageRect, p: &LineParams) -> f64 {
    let length = (seg.length() / rect.diagonal()).clamp(0.0, 1.0);
    let conformity = (1.0 - p.angle_offset(seg, band) / p.band_halfwidth(band)).clamp(0.0, 1.0);
    let side = match band {
        Band::Horizontal => p.horizontal_side,
        Band::Diagonal => p.diagonal_side,
    };
    let m = seg.midpoint();
    let position = match side {
        Border::Left => 1.0 - m.x / rect.max_x().max(1.0),
        Border::Right => m.x / rect.max_x().max(1.0),
        Border::Top => 1.0 - m.y / rect.max_y().max(1.0),
        Border::Bottom => m.y / rect.max_y().max(1.0),
    }
    .clamp(0.0, 1.0);
    p.alpha_length * length + p.beta_angle * conformity + p.gamma_position * position
}

fn rank(a: &LineSegment, b: &LineSegment, band: Band, rect: ImageRect, p: &LineParams) -> Ordering {
    // Greater is better.
    let key = |s: &LineSegment| (score(s, band, rect, p), s.length(), -p.angle_offset(s, band));
    let (ka, kb) = (key(a), key(b));
    ka.0.total_cmp(&kb.0)
        .then(ka.1.total_cmp(&kb.1))
        .then(ka.2.total_cmp(&kb.2))
        // smaller midpoint wins, then endpoints for a total order
        .then_with(|| {
            let (ma, mb) = (a.midpoint(), b.midpoint());
            mb.x.total_cmp(&ma.x).then(mb.y.total_cmp(&ma.y))
        })
        .then_with(|| {
            [b.p0.x, b.p0.y, b.p1.x, b.p1.y]
                .iter()
                .zip([a.p0.x, a.p0.y, a.p1.x, a.p1.y])
                .map(|(x, y)| x.total_cmp(&y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
}

/// Highest-scoring candidate; ties go to the longer segment, then the one
/// closer to the band centre, then the smaller midpoint (x, then y).
pub fn select_representative(
    candidates: &[LineSegment],
    band: Band,
    rect: ImageRect,
    p: &LineParams,
) -> Option<LineSegment> {
    candidates
        .iter()
        .max_by(|a, b| rank(a, b, band, rect, p))
        .copied()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineSelection {
    pub horizontal: Option<InfiniteLine>,
    pub diagonal: Option<InfiniteLine>,
    pub horizontal_source: Option<LineSegment>,
    pub diagonal_source: Option<LineSegment>,
    pub candidates_h: usize,
    pub candidates_d: usize,
}

impl LineSelection {
    pub fn empty() -> Self {
        LineSelection {
            horizontal: None,
            diagonal: None,
            horizontal_source: None,
            diagonal_source: None,
            candidates_h: 0,
            candidates_d: 0,
        }
    }
}

/// Checks the pair and extends the survivors to the image border.
///
/// With both lines present the diagonal is kept only if the two meet at
/// least `min_separation` degrees apart, at a point inside the frame grown
/// by `crossing_margin` on every side. A lone line is always kept.
pub fn validate_and_extend(
    h: Option<LineSegment>,
    d: Option<LineSegment>,
    rect: ImageRect,
    p: &LineParams,
) -> LineSelection {
    let horizontal = h.map(|s| InfiniteLine::from_segment(&s, rect));
    let mut diagonal = d.map(|s| InfiniteLine::from_segment(&s, rect));
    if let (Some(hl), Some(dl)) = (&horizontal, &diagonal) {
        let sep = hl.direction.cross(dl.direction).abs().clamp(0.0, 1.0).asin().to_degrees();
        let crossing_ok = intersect(hl, dl).is_some_and(|x| rect.contains_with_margin(x, p.crossing_margin));
        if sep < p.min_separation || !crossing_ok {
            diagonal = None;
        }
    }
    LineSelection {
        horizontal_source: horizontal.and(h),
        diagonal_source: diagonal.and(d),
        horizontal,
        diagonal,
        candidates_h: 0,
        candidates_d: 0,
    }
}

/// Edge-detection settings applied before the Hough stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeParams {
    pub blur_sigma: f64,
    pub blur_ksize: usize,
    pub low: f64,
    pub high: f64,
}

impl Default for EdgeParams {
    fn default() -> Self {
        EdgeParams {
            blur_sigma: 1.4,
            blur_ksize: 5,
            low: 50.0,
            high: 150.0,
        }
    }
}

impl EdgeParams {
    pub fn validate(&self) -> Result<()> {
        gaussian_kernel(self.blur_sigma, self.blur_ksize)?;
        if !(0.0 <= self.low && self.low <= self.high && self.high.is_finite()) {
            return Err(param(format!(
                "canny thresholds must satisfy 0 <= low <= high, got {} / {}",
                self.low, self.high
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LineDetectParams {
    pub edges: EdgeParams,
    pub hough: HoughParams,
    pub line: LineParams,
}

impl LineDetectParams {
    pub fn validate(&self) -> Result<()> {
        self.edges.validate()?;
        self.hough.validate()?;
        self.line.validate()
    }
}

/// Grayscale, blur and Canny.
pub fn edge_map(img: &Image, p: &EdgeParams) -> Result<EdgeMap> {
    let gray = to_grayscale(img)?;
    let blurred = gaussian_blur(&gray, p.blur_sigma, p.blur_ksize)?;
    canny(&blurred, p.low, p.high)
}

/// Hough segment candidates of an RGB frame.
pub fn line_segments(img: &Image, p: &LineDetectParams) -> Result<Vec<LineSegment>> {
    hough_segments(&edge_map(img, &p.edges)?, &p.hough)
}

/// The full line stage: grayscale → blur → Canny → Hough → classify →
/// score and select per band → validate and extend.
pub fn detect_lines(img: &Image, p: &LineDetectParams) -> Result<LineSelection> {
    p.line.validate()?;
    let segments = line_segments(img, p)?;
    let rect = ImageRect::new(img.width(), img.height());
    let (hs, ds) = classify(&segments, &p.line);
    let h = select_representative(&hs, Band::Horizontal, rect, &p.line);
    let d = select_representative(&ds, Band::Diagonal, rect, &p.line);
    let mut sel = validate_and_extend(h, d, rect, &p.line);
    sel.candidates_h = hs.len();
    sel.candidates_d = ds.len();
    Ok(sel)
}
