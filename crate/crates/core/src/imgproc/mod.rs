//! From-scratch image primitives the two detectors are built on.

mod blur;
mod canny;
mod color;
mod contours;
mod hough;
mod mask;

pub use blur::{gaussian_blur, gaussian_kernel};
pub use canny::{canny, sobel, EdgeMap, Gradient};
pub use color::{hsv_in_range, hsv_to_rgb, rgb_to_hsv, to_grayscale, Hsv, HsvImage, HsvRange};
pub use contours::{centroid, find_contours, Contour};
pub use hough::{hough_segments, HoughParams};
pub use mask::{mask_or, morphology, BinaryMask, MorphOp};
