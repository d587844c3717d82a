use crate::error::{param, Error, Result};

/// One boolean per pixel, row-major.
#[derive(Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl std::fmt::Debug for BinaryMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "BinaryMask {}x{} ({} set)", self.width, self.height, self.count())?;
        if self.width <= 64 && self.height <= 64 {
            for row in self.bits.chunks(self.width as usize) {
                let line: String = row.iter().map(|&b| if b { '#' } else { '.' }).collect();
                writeln!(f, "{line}")?;
            }
        }
        Ok(())
    }
}

impl BinaryMask {
    pub fn new(width: u32, height: u32) -> Result<Self> {
        BinaryMask::from_bits(width, height, vec![false; width as usize * height as usize])
    }

    pub fn from_bits(width: u32, height: u32, bits: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(param(format!("mask dimensions must be positive, got {width}x{height}")));
        }
        if bits.len() != width as usize * height as usize {
            return Err(param(format!(
                "{} bits cannot fill a {width}x{height} mask",
                bits.len()
            )));
        }
        Ok(BinaryMask {
            width,
            height,
            bits,
        })
    }

    /// Pixels strictly above `threshold` become set.
    pub fn from_gray(img: &crate::Image, threshold: u8) -> Result<Self> {
        img.expect_format(crate::PixelFormat::Gray8)?;
        let bits = img.data().iter().map(|&v| v > threshold).collect();
        BinaryMask::from_bits(img.width(), img.height(), bits)
    }

    /// 0/255 gray rendering of the mask.
    pub fn to_gray(&self) -> crate::Image {
        let data = self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
        crate::Image::from_raw(self.width, self.height, crate::PixelFormat::Gray8, data)
            .expect("mask dimensions are valid")
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    /// Out-of-bounds coordinates read as unset.
    #[inline]
    pub fn get_signed(&self, x: i64, y: i64) -> bool {
        x >= 0
            && y >= 0
            && x < i64::from(self.width)
            && y < i64::from(self.height)
            && self.bits[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        self.bits[y as usize * self.width as usize + x as usize] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn iter_set(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let w = self.width as usize;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| ((i % w) as u32, (i / w) as u32))
    }
}

pub fn mask_or(a: &BinaryMask, b: &BinaryMask) -> Result<BinaryMask> {
    if (a.width, a.height) != (b.width, b.height) {
        return Err(Error::Dimension(a.width, a.height, b.width, b.height));
    }
    let bits = a.bits.iter().zip(&b.bits).map(|(&x, &y)| x || y).collect();
    BinaryMask::from_bits(a.width, a.height, bits)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MorphOp {
    Erode,
    Dilate,
    /// Erode, then dilate.
    Open,
    /// Dilate, then erode.
    Close,
}

/// Binary morphology with a full 3x3 structuring element. Pixels outside
/// the image count as unset for both erosion and dilation.
pub fn morphology(mask: &BinaryMask, op: MorphOp) -> BinaryMask {
    match op {
        MorphOp::Erode => erode(mask),
        MorphOp::Dilate => dilate(mask),
        MorphOp::Open => dilate(&erode(mask)),
        MorphOp::Close => erode(&dilate(mask)),
    }
}

fn neighbourhood(mask: &BinaryMask, all: bool) -> BinaryMask {
    let (w, h) = (i64::from(mask.width), i64::from(mask.height));
    let mut bits = Vec::with_capacity(mask.bits.len());
    for y in 0..h {
        for x in 0..w {
            let mut hits = (-1..=1).flat_map(|dy| (-1..=1).map(move |dx| (dx, dy)));
            let v = if all {
                hits.all(|(dx, dy)| mask.get_signed(x + dx, y + dy))
            } else {
                hits.any(|(dx, dy)| mask.get_signed(x + dx, y + dy))
            };
            bits.push(v);
        }
    }
    BinaryMask {
        width: mask.width,
        height: mask.height,
        bits,
    }
}

fn erode(mask: &BinaryMask) -> BinaryMask {
    neighbourhood(mask, true)
}

fn dilate(mask: &BinaryMask) -> BinaryMask {
    neighbourhood(mask, false)
}
