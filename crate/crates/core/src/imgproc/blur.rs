use crate::error::{param, Result};
use crate::image::{Image, PixelFormat};

/// Normalized 1-D Gaussian weights, centre at index `ksize / 2`.
pub fn gaussian_kernel(sigma: f64, ksize: usize) -> Result<Vec<f64>> {
    if ksize % 2 == 0 {
        return Err(param(format!("kernel size must be odd, got {ksize}")));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(param(format!("sigma must be positive, got {sigma}")));
    }
    let half = (ksize / 2) as f64;
    let mut k: Vec<f64> = (0..ksize)
        .map(|i| {
            let d = i as f64 - half;
            (-(d * d) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|w| *w /= sum);
    Ok(k)
}

/// Separable Gaussian blur with replicated borders. Both passes run in
/// floating point; the result is rounded once.
pub fn gaussian_blur(img: &Image, sigma: f64, ksize: usize) -> Result<Image> {
    img.expect_format(PixelFormat::Gray8)?;
    let kernel = gaussian_kernel(sigma, ksize)?;
    if ksize == 1 {
        return Ok(img.clone());
    }
    let (w, h) = (img.width() as usize, img.height() as usize);
    let r = (ksize / 2) as isize;
    let src = img.data();

    let mut tmp = vec![0f64; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (k, wt) in kernel.iter().enumerate() {
                let sx = (x as isize + k as isize - r).clamp(0, w as isize - 1) as usize;
                acc += wt * f64::from(row[sx]);
            }
            tmp[y * w + x] = acc;
        }
    }

    let mut out = vec![0u8; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, wt) in kernel.iter().enumerate() {
                let sy = (y as isize + k as isize - r).clamp(0, h as isize - 1) as usize;
                acc += wt * tmp[sy * w + x];
            }
            out[y * w + x] = acc.round().clamp(0.0, 255.0) as u8;
        }
    }
    Image::from_raw(img.width(), img.height(), PixelFormat::Gray8, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn kernel_is_normalized() {
        for (sigma, k) in [(0.5, 3), (1.0, 5), (1.4, 5), (3.0, 11)] {
            let w = gaussian_kernel(sigma, k).unwrap();
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert_eq!(w[0], w[k - 1]);
        }
    }

    #[test]
    fn constant_is_preserved() {
        let img = Image::gray(9, 6, 100).unwrap();
        for (sigma, k) in [(0.3, 3), (1.4, 5), (5.0, 9)] {
            assert_eq!(gaussian_blur(&img, sigma, k).unwrap(), img);
        }
    }

    #[test]
    fn impulse_center_matches_kernel_square() {
        // Centre weight of the sigma=1.4, 5-tap kernel, computed independently:
        // w0 = 1 / (1 + 2e^(-1/3.92) + 2e^(-4/3.92)) = 0.30576, so
        // 255 * w0^2 = 23.84 -> 24.
        let e = |d: f64| (-(d * d) / (2.0 * 1.96)).exp();
        let w0 = 1.0 / (1.0 + 2.0 * e(1.0) + 2.0 * e(2.0));
        assert!((w0 - 0.30576).abs() < 1e-4);
        let expected = (255.0 * w0 * w0).round() as u8;
        assert_eq!(expected, 24);

        let mut img = Image::gray(7, 7, 0).unwrap();
        img.set_gray(3, 3, 255);
        let out = gaussian_blur(&img, 1.4, 5).unwrap();
        assert_eq!(out.gray_at(3, 3), expected);
    }

    #[test]
    fn ksize_one_is_identity() {
        let mut img = Image::gray(4, 4, 3).unwrap();
        img.set_gray(2, 1, 250);
        assert_eq!(gaussian_blur(&img, 2.0, 1).unwrap(), img);
    }

    #[test]
    fn bad_parameters() {
        let img = Image::gray(4, 4, 3).unwrap();
        assert!(matches!(gaussian_blur(&img, 1.0, 4), Err(Error::Parameter(_))));
        assert!(matches!(gaussian_blur(&img, 0.0, 3), Err(Error::Parameter(_))));
    }

    #[test]
    fn sum_is_conserved_on_interior_blob() {
        let mut img = Image::gray(32, 32, 0).unwrap();
        for y in 12..20 {
            for x in 10..22 {
                img.set_gray(x, y, ((x * 7 + y * 13) % 200) as u8);
            }
        }
        let before: i64 = img.data().iter().map(|&v| i64::from(v)).sum();
        let after: i64 = gaussian_blur(&img, 1.2, 5)
            .unwrap()
            .data()
            .iter()
            .map(|&v| i64::from(v))
            .sum();
        assert!(((before - after).abs() as f64) <= 0.5 * 32.0 * 32.0);
    }
}
