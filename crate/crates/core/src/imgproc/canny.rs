use std::collections::VecDeque;
use std::ops::Deref;

use crate::error::{param, Result};
use crate::image::{Image, PixelFormat};
use crate::imgproc::BinaryMask;

/// Binary edge flags with the dimensions of the source image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeMap(BinaryMask);

impl EdgeMap {
    pub fn from_mask(mask: BinaryMask) -> Self {
        EdgeMap(mask)
    }

    pub fn into_mask(self) -> BinaryMask {
        self.0
    }
}

impl Deref for EdgeMap {
    type Target = BinaryMask;

    fn deref(&self) -> &BinaryMask {
        &self.0
    }
}

/// Raw 3x3 Sobel responses. The outermost ring of pixels carries no gradient.
#[derive(Debug, Clone)]
pub struct Gradient {
    pub width: u32,
    pub height: u32,
    pub gx: Vec<i32>,
    pub gy: Vec<i32>,
}

impl Gradient {
    /// Euclidean magnitude of the raw 8-bit Sobel response (a full 0→255
    /// step reads 1020), the scale the hysteresis thresholds are given in.
    #[inline]
    pub fn magnitude(&self, i: usize) -> f64 {
        f64::from(self.gx[i]).hypot(f64::from(self.gy[i]))
    }
}

pub fn sobel(img: &Image) -> Result<Gradient> {
    img.expect_format(PixelFormat::Gray8)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let p = |x: usize, y: usize| i32::from(img.data()[y * w + x]);
    let mut gx = vec![0; w * h];
    let mut gy = vec![0; w * h];
    for y in 1..h.saturating_sub(1) {
        for x in 1..w.saturating_sub(1) {
            let i = y * w + x;
            gx[i] = (p(x + 1, y - 1) + 2 * p(x + 1, y) + p(x + 1, y + 1))
                - (p(x - 1, y - 1) + 2 * p(x - 1, y) + p(x - 1, y + 1));
            gy[i] = (p(x - 1, y + 1) + 2 * p(x, y + 1) + p(x + 1, y + 1))
                - (p(x - 1, y - 1) + 2 * p(x, y - 1) + p(x + 1, y - 1));
        }
    }
    Ok(Gradient {
        width: img.width(),
        height: img.height(),
        gx,
        gy,
    })
}

const TAN_22_5: f64 = 0.414_213_562_373_095_1;
const TAN_67_5: f64 = 2.414_213_562_373_095;

/// Neighbour offset along the gradient, quantized to 0/45/90/135 degrees.
fn gradient_step(gx: i32, gy: i32) -> (isize, isize) {
    let ax = f64::from(gx.abs());
    let ay = f64::from(gy.abs());
    if ay < TAN_22_5 * ax {
        (1, 0)
    } else if ay > TAN_67_5 * ax {
        (0, 1)
    } else if (gx > 0) == (gy > 0) {
        (1, 1)
    } else {
        (-1, 1)
    }
}

/// Canny edge detector: Sobel gradients, non-maximum suppression along
/// the quantized gradient direction, then hysteresis over 8-neighbours.
pub fn canny(img: &Image, low: f64, high: f64) -> Result<EdgeMap> {
    if !(low <= high) {
        return Err(param(format!("canny low threshold {low} exceeds high {high}")));
    }
    let g = sobel(img)?;
    let (w, h) = (g.width as usize, g.height as usize);
    let mag: Vec<f64> = (0..w * h).map(|i| g.magnitude(i)).collect();

    // 0 = suppressed, 1 = weak, 2 = strong
    let mut class = vec![0u8; w * h];
    let mut queue = VecDeque::new();
    for y in 1..h.saturating_sub(1) {
        for x in 1..w.saturating_sub(1) {
            let i = y * w + x;
            let m = mag[i];
            if m < low || m == 0.0 {
                continue;
            }
            let (dx, dy) = gradient_step(g.gx[i], g.gy[i]);
            let fwd = ((y as isize + dy) as usize) * w + (x as isize + dx) as usize;
            let back = ((y as isize - dy) as usize) * w + (x as isize - dx) as usize;
            if !(m > mag[back] && m >= mag[fwd]) {
                continue;
            }
            if m >= high {
                class[i] = 2;
                queue.push_back(i);
            } else {
                class[i] = 1;
            }
        }
    }

    while let Some(i) = queue.pop_front() {
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if class[j] == 1 {
                    class[j] = 2;
                    queue.push_back(j);
                }
            }
        }
    }

    let bits = class.into_iter().map(|c| c == 2).collect();
    Ok(EdgeMap(BinaryMask::from_bits(g.width, g.height, bits)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn step(w: u32, h: u32, at: u32, lo: u8, hi: u8) -> Image {
        let mut img = Image::gray(w, h, lo).unwrap();
        for y in 0..h {
            for x in at..w {
                img.set_gray(x, y, hi);
            }
        }
        img
    }

    #[test]
    fn constant_has_no_edges() {
        let e = canny(&Image::gray(16, 12, 90).unwrap(), 50.0, 150.0).unwrap();
        assert!(e.is_empty());
    }

    #[test]
    fn vertical_step_gives_one_column() {
        let img = step(20, 10, 10, 0, 255);
        // Brute force: |gx| is 4 * 255 exactly at columns 9 and 10 and zero
        // elsewhere; suppression keeps the first of the tied pair.
        let g = sobel(&img).unwrap();
        let cols: Vec<usize> = (0..20).filter(|&x| g.magnitude(5 * 20 + x) > 0.0).collect();
        assert_eq!(cols, vec![9, 10]);

        let e = canny(&img, 50.0, 150.0).unwrap();
        let set: Vec<(u32, u32)> = e.iter_set().collect();
        assert_eq!(set.len(), 8);
        assert!(set.iter().all(|&(x, y)| x == 9 && (1..9).contains(&y)));
    }

    #[test]
    fn weak_step_is_ignored() {
        // Peak response 4 * 20 = 80 never reaches the strong threshold, so
        // hysteresis has nothing to grow from.
        let img = step(20, 10, 10, 100, 120);
        let g = sobel(&img).unwrap();
        let max = (0..200).map(|i| g.magnitude(i)).fold(0.0, f64::max);
        assert_eq!(max, 80.0);
        assert!(canny(&img, 50.0, 150.0).unwrap().is_empty());
    }

    #[test]
    fn weak_pixels_need_a_strong_neighbour() {
        // Step of 30 -> magnitude 120: weak under (50, 150), strong under (50, 100).
        let img = step(12, 8, 6, 50, 80);
        assert!(canny(&img, 50.0, 150.0).unwrap().is_empty());
        assert_eq!(canny(&img, 50.0, 100.0).unwrap().count(), 6);
    }

    #[test]
    fn inverted_thresholds() {
        let img = Image::gray(4, 4, 0).unwrap();
        assert!(matches!(canny(&img, 200.0, 100.0), Err(Error::Parameter(_))));
    }
}
