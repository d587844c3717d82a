//! Owned 8-bit rasters and their PNG / PNM interchange.

use std::fmt;
use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, GrayImage, ImageFormat, RgbImage};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PixelFormat {
    Gray8,
    Rgb8,
}

impl PixelFormat {
    pub fn channels(self) -> usize {
        match self {
            PixelFormat::Gray8 => 1,
            PixelFormat::Rgb8 => 3,
        }
    }

    pub(crate) fn name(self) -> &'static str {
        match self {
            PixelFormat::Gray8 => "Gray8",
            PixelFormat::Rgb8 => "Rgb8",
        }
    }
}

impl fmt::Display for PixelFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Row-major, unpadded raster. Immutable once built except through
/// the explicit pixel setters used by the renderers.
#[derive(Clone, PartialEq, Eq)]
pub struct Image {
    width: u32,
    height: u32,
    format: PixelFormat,
    data: Vec<u8>,
}

impl fmt::Debug for Image {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Image")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("format", &self.format)
            .finish_non_exhaustive()
    }
}

impl Image {
    pub fn from_raw(width: u32, height: u32, format: PixelFormat, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Parameter(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        let expected = width as usize * height as usize * format.channels();
        if data.len() != expected {
            return Err(Error::Parameter(format!(
                "buffer holds {} bytes, {width}x{height} {format} needs {expected}",
                data.len()
            )));
        }
        Ok(Image {
            width,
            height,
            format,
            data,
        })
    }

    /// Image filled with a single gray value.
    pub fn gray(width: u32, height: u32, value: u8) -> Result<Self> {
        let len = width as usize * height as usize;
        Image::from_raw(width, height, PixelFormat::Gray8, vec![value; len])
    }

    /// Image filled with a single color.
    pub fn rgb(width: u32, height: u32, color: [u8; 3]) -> Result<Self> {
        let len = width as usize * height as usize;
        let data = color.iter().copied().cycle().take(len * 3).collect();
        Image::from_raw(width, height, PixelFormat::Rgb8, data)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn format(&self) -> PixelFormat {
        self.format
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    /// Gray frames replicated into three channels; RGB frames unchanged.
    pub fn to_rgb8(self) -> Image {
        match self.format {
            PixelFormat::Rgb8 => self,
            PixelFormat::Gray8 => Image {
                width: self.width,
                height: self.height,
                format: PixelFormat::Rgb8,
                data: self.data.iter().flat_map(|&v| [v, v, v]).collect(),
            },
        }
    }

    pub(crate) fn expect_format(&self, format: PixelFormat) -> Result<()> {
        if self.format == format {
            Ok(())
        } else {
            Err(Error::Format {
                expected: format.name(),
                actual: self.format.name(),
            })
        }
    }

    #[inline]
    pub fn gray_at(&self, x: u32, y: u32) -> u8 {
        debug_assert_eq!(self.format, PixelFormat::Gray8);
        self.data[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn rgb_at(&self, x: u32, y: u32) -> [u8; 3] {
        debug_assert_eq!(self.format, PixelFormat::Rgb8);
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set_gray(&mut self, x: u32, y: u32, v: u8) {
        let i = y as usize * self.width as usize + x as usize;
        self.data[i] = v;
    }

    #[inline]
    pub fn set_rgb(&mut self, x: u32, y: u32, c: [u8; 3]) {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        self.data[i..i + 3].copy_from_slice(&c);
    }

    fn into_dynamic(self) -> DynamicImage {
        match self.format {
            PixelFormat::Gray8 => DynamicImage::ImageLuma8(
                GrayImage::from_raw(self.width, self.height, self.data).expect("validated size"),
            ),
            PixelFormat::Rgb8 => DynamicImage::ImageRgb8(
                RgbImage::from_raw(self.width, self.height, self.data).expect("validated size"),
            ),
        }
    }

    fn from_dynamic(img: DynamicImage) -> Result<Self> {
        match img {
            DynamicImage::ImageLuma8(g) => {
                let (w, h) = g.dimensions();
                Image::from_raw(w, h, PixelFormat::Gray8, g.into_raw())
            }
            other => {
                let rgb = other.into_rgb8();
                let (w, h) = rgb.dimensions();
                Image::from_raw(w, h, PixelFormat::Rgb8, rgb.into_raw())
            }
        }
    }

    /// Decodes PNG or binary PGM/PPM. Gray inputs stay Gray8, everything
    /// else is converted to Rgb8.
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let img = image::load_from_memory(bytes)?;
        Image::from_dynamic(img)
    }

    pub fn encode_png(&self) -> Result<Vec<u8>> {
        let mut out = Cursor::new(Vec::new());
        self.clone()
            .into_dynamic()
            .write_to(&mut out, ImageFormat::Png)?;
        Ok(out.into_inner())
    }

    /// Binary `P5` (gray) or `P6` (rgb) with maxval 255.
    pub fn encode_pnm(&self) -> Vec<u8> {
        let magic = match self.format {
            PixelFormat::Gray8 => "P5",
            PixelFormat::Rgb8 => "P6",
        };
        let mut out = format!("{magic}\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Image::decode(&bytes)
    }

    /// Writes PNG, or PGM/PPM when the extension is `pgm`, `ppm` or `pnm`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        let bytes = match ext.as_deref() {
            Some("pgm" | "ppm" | "pnm") => self.encode_pnm(),
            _ => self.encode_png()?,
        };
        std::fs::write(path, bytes)?;
        Ok(())
    }
}
