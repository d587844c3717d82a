use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::image::{Image, PixelFormat};
use crate::imgproc::BinaryMask;

/// ITU-R 601 luma, rounded.
pub fn to_grayscale(img: &Image) -> Result<Image> {
    img.expect_format(PixelFormat::Rgb8)?;
    let data = img
        .data()
        .chunks_exact(3)
        .map(|p| {
            let y = 0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2]);
            y.round().clamp(0.0, 255.0) as u8
        })
        .collect();
    Image::from_raw(img.width(), img.height(), PixelFormat::Gray8, data)
}

/// Hue in degrees `[0, 360)`, saturation and value in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hsv {
    pub h: f64,
    pub s: f64,
    pub v: f64,
}

impl Hsv {
    pub fn from_rgb([r, g, b]: [u8; 3]) -> Hsv {
        let (r, g, b) = (f64::from(r), f64::from(g), f64::from(b));
        let max = r.max(g).max(b);
        let min = r.min(g).min(b);
        let delta = max - min;
        let v = max / 255.0;
        let s = if max > 0.0 { delta / max } else { 0.0 };
        let h = if delta == 0.0 {
            0.0
        } else if max == r {
            60.0 * ((g - b) / delta).rem_euclid(6.0)
        } else if max == g {
            60.0 * ((b - r) / delta + 2.0)
        } else {
            60.0 * ((r - g) / delta + 4.0)
        };
        let h = if h >= 360.0 { h - 360.0 } else { h };
        Hsv { h, s, v }
    }
}

/// Exact inverse of the hexcone model, rounded to 8 bits.
pub fn hsv_to_rgb(hsv: Hsv) -> [u8; 3] {
    let c = hsv.v * hsv.s;
    let hp = hsv.h.rem_euclid(360.0) / 60.0;
    let x = c * (1.0 - (hp.rem_euclid(2.0) - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = hsv.v - c;
    let q = |u: f64| ((u + m) * 255.0).round().clamp(0.0, 255.0) as u8;
    [q(r), q(g), q(b)]
}

#[derive(Debug, Clone, PartialEq)]
pub struct HsvImage {
    width: u32,
    height: u32,
    pixels: Vec<Hsv>,
}

impl HsvImage {
    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[Hsv] {
        &self.pixels
    }

    pub fn at(&self, x: u32, y: u32) -> Hsv {
        self.pixels[y as usize * self.width as usize + x as usize]
    }
}

pub fn rgb_to_hsv(img: &Image) -> Result<HsvImage> {
    img.expect_format(PixelFormat::Rgb8)?;
    let pixels = img
        .data()
        .chunks_exact(3)
        .map(|p| Hsv::from_rgb([p[0], p[1], p[2]]))
        .collect();
    Ok(HsvImage {
        width: img.width(),
        height: img.height(),
        pixels,
    })
}

/// Closed box in HSV space. Hue ranges never wrap around 0°.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HsvRange {
    pub h_lo: f64,
    pub h_hi: f64,
    pub s_lo: f64,
    pub s_hi: f64,
    pub v_lo: f64,
    pub v_hi: f64,
}

impl HsvRange {
    pub fn validate(&self) -> Result<()> {
        let ordered = |lo: f64, hi: f64| lo.is_finite() && hi.is_finite() && lo <= hi;
        if !ordered(self.h_lo, self.h_hi) || self.h_lo < 0.0 || self.h_hi > 360.0 {
            return Err(param(format!(
                "hue range [{}, {}] must be ordered inside [0, 360]",
                self.h_lo, self.h_hi
            )));
        }
        for (name, lo, hi) in [("saturation", self.s_lo, self.s_hi), ("value", self.v_lo, self.v_hi)] {
            if !ordered(lo, hi) || lo < 0.0 || hi > 1.0 {
                return Err(param(format!("{name} range [{lo}, {hi}] must be ordered inside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn contains(&self, p: Hsv) -> bool {
        (self.h_lo..=self.h_hi).contains(&p.h)
            && (self.s_lo..=self.s_hi).contains(&p.s)
            && (self.v_lo..=self.v_hi).contains(&p.v)
    }
}

pub fn hsv_in_range(hsv: &HsvImage, range: &HsvRange) -> Result<BinaryMask> {
    range.validate()?;
    let bits = hsv.pixels.iter().map(|&p| range.contains(p)).collect();
    BinaryMask::from_bits(hsv.width, hsv.height, bits)
}
