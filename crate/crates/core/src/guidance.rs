//! Landing-corner construction: the laser line runs through the laser spot
//! parallel to the horizontal edge; where it meets the extended diagonal
//! edge is the corner, and the guidance line runs through the corner.

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::geom::{intersect, ImageRect, InfiniteLine, Point};
use crate::image::{Image, PixelFormat};
use crate::laser_detect::LaserSpot;
use crate::line_detect::LineSelection;

/// Physical layout of the camera module, millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModuleGeometry {
    pub body: [f64; 3],
    pub suction_tip_offset: f64,
    pub laser_axis_offset: f64,
    pub camera_axis_offset: f64,
}

impl Default for ModuleGeometry {
    fn default() -> Self {
        ModuleGeometry {
            body: [50.0, 150.0, 127.0],
            suction_tip_offset: 7.8,
            laser_axis_offset: 19.8,
            camera_axis_offset: 36.8,
        }
    }
}

impl ModuleGeometry {
    pub fn validate(&self) -> Result<()> {
        let ok = self.suction_tip_offset > 0.0
            && self.suction_tip_offset < self.laser_axis_offset
            && self.laser_axis_offset < self.camera_axis_offset
            && self.body.iter().all(|&d| d > 0.0);
        if ok {
            Ok(())
        } else {
            Err(param(format!("inconsistent module geometry {self:?}")))
        }
    }

    /// Camera-to-laser axis distance in metres.
    pub fn laser_camera_offset_m(&self) -> f64 {
        (self.camera_axis_offset - self.laser_axis_offset) / 1000.0
    }

    pub fn camera_axis_offset_m(&self) -> f64 {
        self.camera_axis_offset / 1000.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GuidanceStatus {
    Full,
    NoLaser,
    NoDiagonal,
    NoHorizontal,
    Degenerate,
    Empty,
}

impl GuidanceStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            GuidanceStatus::Full => "Full",
            GuidanceStatus::NoLaser => "NoLaser",
            GuidanceStatus::NoDiagonal => "NoDiagonal",
            GuidanceStatus::NoHorizontal => "NoHorizontal",
            GuidanceStatus::Degenerate => "Degenerate",
            GuidanceStatus::Empty => "Empty",
        }
    }

    /// Status implied by which inputs exist and whether a corner was found.
    /// Nothing at all is `Empty`; otherwise the first missing input of
    /// diagonal, horizontal, laser names the status.
    pub fn classify(horizontal: bool, diagonal: bool, laser: bool, corner: bool) -> Self {
        match (horizontal, diagonal, laser) {
            (false, false, false) => GuidanceStatus::Empty,
            (_, false, _) => GuidanceStatus::NoDiagonal,
            (false, true, _) => GuidanceStatus::NoHorizontal,
            (true, true, false) => GuidanceStatus::NoLaser,
            (true, true, true) if corner => GuidanceStatus::Full,
            (true, true, true) => GuidanceStatus::Degenerate,
        }
    }
}

impl std::fmt::Display for GuidanceStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuidanceResult {
    pub selection: LineSelection,
    pub laser: Option<LaserSpot>,
    pub corner: Option<Point>,
    pub guidance_line: Option<InfiniteLine>,
    pub status: GuidanceStatus,
}

pub fn construct_guidance(
    selection: LineSelection,
    laser: Option<LaserSpot>,
    rect: ImageRect,
) -> GuidanceResult {
    let mut corner = None;
    let mut guidance_line = None;
    if let (Some(h), Some(d), Some(spot)) = (&selection.horizontal, &selection.diagonal, &laser) {
        let laser_line = InfiniteLine::new(spot.center, h.direction, rect).expect("unit direction");
        if let Some(c) = intersect(d, &laser_line) {
            corner = Some(c);
            guidance_line = InfiniteLine::new(c, h.direction, rect);
        }
    }
    let status = GuidanceStatus::classify(
        selection.horizontal.is_some(),
        selection.diagonal.is_some(),
        laser.is_some(),
        corner.is_some(),
    );
    GuidanceResult {
        selection,
        laser,
        corner,
        guidance_line,
        status,
    }
}

/// Single-line JSON summary of a result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuidanceReport {
    pub status: GuidanceStatus,
    pub corner: Option<[f64; 2]>,
    pub laser: Option<[f64; 2]>,
    pub horiz: Option<[[f64; 2]; 2]>,
    pub diag: Option<[[f64; 2]; 2]>,
}

fn chord(line: &Option<InfiniteLine>) -> Option<[[f64; 2]; 2]> {
    line.and_then(|l| l.clipped)
        .map(|(a, b)| [a.to_array(), b.to_array()])
}

impl GuidanceReport {
    pub fn from_result(r: &GuidanceResult) -> Self {
        GuidanceReport {
            status: r.status,
            corner: r.corner.map(Point::to_array),
            laser: r.laser.map(|s| s.center.to_array()),
            horiz: chord(&r.selection.horizontal),
            diag: chord(&r.selection.diagonal),
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

pub const BLACK: [u8; 3] = [0, 0, 0];
pub const RED: [u8; 3] = [255, 0, 0];
pub const GREEN: [u8; 3] = [0, 255, 0];
pub const BLUE: [u8; 3] = [0, 0, 255];

/// Marker sizes and dash pattern used by [`annotate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnotationStyle {
    pub cross_arm: i64,
    pub ring_radii: [f64; 2],
    pub dash_on: f64,
    pub dash_off: f64,
}

impl Default for AnnotationStyle {
    fn default() -> Self {
        AnnotationStyle {
            cross_arm: 2,
            ring_radii: [4.0, 7.0],
            dash_on: 8.0,
            dash_off: 8.0,
        }
    }
}

struct Canvas<'a> {
    img: &'a mut Image,
}

impl Canvas<'_> {
    fn put(&mut self, x: i64, y: i64, c: [u8; 3]) {
        if x >= 0 && y >= 0 && x < i64::from(self.img.width()) && y < i64::from(self.img.height()) {
            self.img.set_rgb(x as u32, y as u32, c);
        }
    }

    /// Rounded DDA; `dash` is `(on, off)` in pixels of arc length.
    fn segment(&mut self, a: Point, b: Point, c: [u8; 3], dash: Option<(f64, f64)>) {
        let steps = (b.x - a.x).abs().max((b.y - a.y).abs()).ceil().max(1.0) as i64;
        let len = a.distance(b);
        for k in 0..=steps {
            let t = k as f64 / steps as f64;
            if let Some((on, off)) = dash {
                if (t * len) % (on + off) >= on {
                    continue;
                }
            }
            let x = a.x + t * (b.x - a.x);
            let y = a.y + t * (b.y - a.y);
            self.put(x.round() as i64, y.round() as i64, c);
        }
    }

    fn circle(&mut self, center: Point, r: f64, c: [u8; 3]) {
        let n = (2.0 * std::f64::consts::PI * r * 2.0).ceil() as usize;
        for k in 0..n {
            let a = k as f64 / n as f64 * std::f64::consts::TAU;
            self.put(
                (center.x + r * a.cos()).round() as i64,
                (center.y + r * a.sin()).round() as i64,
                c,
            );
        }
    }

    fn cross(&mut self, center: Point, arm: i64, c: [u8; 3]) {
        let (x, y) = (center.x.round() as i64, center.y.round() as i64);
        for k in -arm..=arm {
            self.put(x + k, y, c);
            self.put(x, y + k, c);
        }
    }
}

/// Draws the diagonal extension (black), horizontal line (red), dashed
/// guidance line (blue), laser cross (green) and corner double ring (blue).
pub fn annotate(img: &Image, r: &GuidanceResult, style: &AnnotationStyle) -> Result<Image> {
    img.expect_format(PixelFormat::Rgb8)?;
    let mut out = img.clone();
    let mut canvas = Canvas { img: &mut out };
    if let Some((a, b)) = r.selection.diagonal.and_then(|l| l.clipped) {
        canvas.segment(a, b, BLACK, None);
    }
    if let Some((a, b)) = r.selection.horizontal.and_then(|l| l.clipped) {
        canvas.segment(a, b, RED, None);
    }
    if let Some((a, b)) = r.guidance_line.and_then(|l| l.clipped) {
        canvas.segment(a, b, BLUE, Some((style.dash_on, style.dash_off)));
    }
    if let Some(spot) = &r.laser {
        canvas.cross(spot.center, style.cross_arm, GREEN);
    }
    if let Some(c) = r.corner {
        for radius in style.ring_radii {
            canvas.circle(c, radius, BLUE);
        }
    }
    Ok(out)
}
