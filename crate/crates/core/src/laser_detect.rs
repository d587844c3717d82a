//! Green laser spot extraction: two HSV boxes, opening, mask blur and
//! re-threshold, contour area filter, largest-area pick, moment centroid.

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::geom::Point;
use crate::image::Image;
use crate::imgproc::{
    centroid, find_contours, gaussian_blur, hsv_in_range, mask_or, morphology, rgb_to_hsv,
    BinaryMask, HsvRange, MorphOp,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaserParams {
    /// Saturated ring of the dot.
    pub core_green: HsvRange,
    /// Washed-out, overexposed centre.
    pub bright_green: HsvRange,
    pub area_min: f64,
    pub area_max: f64,
    pub blur_sigma: f64,
    pub blur_ksize: usize,
}

impl Default for LaserParams {
    fn default() -> Self {
        LaserParams {
            core_green: HsvRange {
                h_lo: 100.0,
                h_hi: 140.0,
                s_lo: 0.40,
                s_hi: 1.0,
                v_lo: 0.40,
                v_hi: 1.0,
            },
            bright_green: HsvRange {
                h_lo: 90.0,
                h_hi: 150.0,
                s_lo: 0.05,
                s_hi: 0.40,
                v_lo: 0.85,
                v_hi: 1.0,
            },
            area_min: 3.0,
            area_max: 2000.0,
            blur_sigma: 1.0,
            blur_ksize: 3,
        }
    }
}

impl LaserParams {
    pub fn validate(&self) -> Result<()> {
        self.core_green.validate()?;
        self.bright_green.validate()?;
        if !(self.area_min >= 1.0) || !(self.area_min < self.area_max) {
            return Err(param(format!(
                "laser area bounds need 1 <= area_min ({}) < area_max ({})",
                self.area_min, self.area_max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaserSpot {
    pub center: Point,
    pub area: f64,
    /// Set pixels in the cleaned mask, all components included.
    pub mask_pixels: usize,
}

/// Combined and cleaned candidate mask, before contouring.
pub fn laser_mask(img: &Image, p: &LaserParams) -> Result<BinaryMask> {
    p.validate()?;
    let hsv = rgb_to_hsv(img)?;
    let core = hsv_in_range(&hsv, &p.core_green)?;
    let bright = hsv_in_range(&hsv, &p.bright_green)?;
    let opened = morphology(&mask_or(&core, &bright)?, MorphOp::Open);
    let smoothed = gaussian_blur(&opened.to_gray(), p.blur_sigma, p.blur_ksize)?;
    BinaryMask::from_gray(&smoothed, 127)
}

/// Returns the largest in-bounds candidate, or `None` when nothing survives
/// the area filter. Equal areas go to the smaller centroid y, then x.
pub fn detect_laser(img: &Image, p: &LaserParams) -> Result<Option<LaserSpot>> {
    let mask = laser_mask(img, p)?;
    let mask_pixels = mask.count();
    let mut best: Option<LaserSpot> = None;
    for c in find_contours(&mask) {
        if c.area < p.area_min || c.area > p.area_max {
            continue;
        }
        let center = centroid(&c)?;
        let better = match &best {
            None => true,
            Some(b) => {
                c.area > b.area
                    || (c.area == b.area
                        && (center.y, center.x) < (b.center.y, b.center.x))
            }
        };
        if better {
            best = Some(LaserSpot {
                center,
                area: c.area,
                mask_pixels,
            });
        }
    }
    Ok(best)
}
