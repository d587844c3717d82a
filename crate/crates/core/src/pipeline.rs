use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geom::ImageRect;
use crate::guidance::{annotate, construct_guidance, AnnotationStyle, GuidanceResult};
use crate::image::Image;
use crate::laser_detect::{detect_laser, LaserParams};
use crate::line_detect::{detect_lines, LineDetectParams};

/// Everything one frame needs.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PipelineParams {
    pub lines: LineDetectParams,
    pub laser: LaserParams,
}

impl PipelineParams {
    pub fn validate(&self) -> Result<()> {
        self.lines.validate()?;
        self.laser.validate()
    }
}

/// Lines, laser spot and landing corner for one RGB frame.
pub fn process_frame(img: &Image, p: &PipelineParams) -> Result<GuidanceResult> {
    let selection = detect_lines(img, &p.lines)?;
    let laser = detect_laser(img, &p.laser)?;
    Ok(construct_guidance(
        selection,
        laser,
        ImageRect::new(img.width(), img.height()),
    ))
}

/// [`process_frame`] plus the annotated copy of the frame.
pub fn process_and_annotate(img: &Image, p: &PipelineParams) -> Result<(GuidanceResult, Image)> {
    let result = process_frame(img, p)?;
    let drawn = annotate(img, &result, &AnnotationStyle::default())?;
    Ok((result, drawn))
}
