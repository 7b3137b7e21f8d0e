use image::{Rgb, RgbImage};

use crate::raster::{BitemporalPair, ChangeMask};
use crate::Result;

pub const TARGET_SIZE: u32 = 256;

/// Source coordinate of destination sample `dst` under half-pixel alignment.
fn source_coord(dst: u32, src_len: u32, dst_len: u32) -> f64 {
    let s = (dst as f64 + 0.5) * src_len as f64 / dst_len as f64 - 0.5;
    s.clamp(0.0, (src_len - 1) as f64)
}

/// Bilinear samples before rounding, row-major with three channels per pixel.
pub fn bilinear_samples(img: &RgbImage, width: u32, height: u32) -> Vec<f64> {
    let (sw, sh) = img.dimensions();
    let mut out = Vec::with_capacity((width * height * 3) as usize);
    for y in 0..height {
        let sy = source_coord(y, sh, height);
        let (y0, fy) = (sy.floor() as u32, sy.fract());
        let y1 = (y0 + 1).min(sh - 1);
        for x in 0..width {
            let sx = source_coord(x, sw, width);
            let (x0, fx) = (sx.floor() as u32, sx.fract());
            let x1 = (x0 + 1).min(sw - 1);
            let (p00, p01) = (img.get_pixel(x0, y0).0, img.get_pixel(x1, y0).0);
            let (p10, p11) = (img.get_pixel(x0, y1).0, img.get_pixel(x1, y1).0);
            for c in 0..3 {
                let top = p00[c] as f64 * (1.0 - fx) + p01[c] as f64 * fx;
                let bottom = p10[c] as f64 * (1.0 - fx) + p11[c] as f64 * fx;
                out.push(top * (1.0 - fy) + bottom * fy);
            }
        }
    }
    out
}

pub fn resize_image(img: &RgbImage, width: u32, height: u32) -> RgbImage {
    if img.dimensions() == (width, height) {
        return img.clone();
    }
    let samples = bilinear_samples(img, width, height);
    RgbImage::from_fn(width, height, |x, y| {
        let i = ((y * width + x) * 3) as usize;
        Rgb([0, 1, 2].map(|c| samples[i + c].round().clamp(0.0, 255.0) as u8))
    })
}

/// Nearest-neighbour, so the output stays binary.
pub fn resize_mask(mask: &ChangeMask, width: u32, height: u32) -> Result<ChangeMask> {
    if mask.dims() == (width, height) {
        return Ok(mask.clone());
    }
    let (sw, sh) = mask.dims();
    let pick = |dst: u32, src_len: u32, dst_len: u32| {
        (((dst as f64 + 0.5) * src_len as f64 / dst_len as f64) as u32).min(src_len - 1)
    };
    ChangeMask::from_fn(width, height, |r, c| mask.get(pick(r, sh, height), pick(c, sw, width)))
}

pub fn resize_example(pair: &BitemporalPair, size: u32) -> Result<BitemporalPair> {
    BitemporalPair::new(
        resize_image(pair.image_a(), size, size),
        resize_image(pair.image_b(), size, size),
        pair.ground_truth().map(|m| resize_mask(m, size, size)).transpose()?,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn checkerboard() -> RgbImage {
        RgbImage::from_fn(2, 2, |x, y| if (x + y) % 2 == 0 { Rgb([0; 3]) } else { Rgb([255; 3]) })
    }

    #[test]
    fn checkerboard_upsample_matches_hand_weights() {
        // Source coordinates per output index: 0, 0.25, 0.75, 1 (clamped at both ends).
        let s = bilinear_samples(&checkerboard(), 4, 4);
        let at = |x: usize, y: usize| s[(y * 4 + x) * 3];
        assert_eq!(at(0, 0), 0.0);
        assert_eq!(at(3, 0), 255.0);
        // (1,1): 0.75·0.75·0 + 0.75·0.25·255 + 0.25·0.75·255 + 0.25·0.25·0
        assert_eq!(at(1, 1), 95.625);
        // (2,1): 0.75·0.25·0 + 0.75·0.75·255 + 0.25·0.25·255 + 0.25·0.75·0
        assert_eq!(at(2, 1), 159.375);
        assert_eq!(at(1, 0), 63.75);
        let img = resize_image(&checkerboard(), 4, 4);
        assert_eq!(img.get_pixel(1, 1).0, [96; 3]);
    }

    #[test]
    fn same_size_is_identity() {
        let img = RgbImage::from_fn(256, 256, |x, y| Rgb([x as u8, y as u8, (x ^ y) as u8]));
        assert_eq!(resize_image(&img, 256, 256), img);
    }

    #[test]
    fn mask_stays_binary_and_scales_blocks() {
        let m = ChangeMask::from_fn(480, 480, |r, c| (r / 7 + c / 5) % 3 == 0).unwrap();
        let out = resize_mask(&m, 256, 256).unwrap();
        assert!(out.bits().iter().all(|&b| b <= 1));
        let half = ChangeMask::from_fn(2, 2, |_, c| c == 1).unwrap();
        let up = resize_mask(&half, 4, 4).unwrap();
        assert_eq!(up, ChangeMask::from_fn(4, 4, |_, c| c >= 2).unwrap());
    }
}
