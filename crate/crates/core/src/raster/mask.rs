use std::path::Path;

use image::{GrayImage, Luma, RgbImage};

use crate::{Error, Result};

/// Row-major binary raster where 1 marks a changed pixel.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ChangeMask {
    width: u32,
    height: u32,
    bits: Vec<u8>,
}

impl ChangeMask {
    pub fn empty(width: u32, height: u32) -> Result<Self> {
        Self::filled(width, height, false)
    }

    pub fn filled(width: u32, height: u32, value: bool) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidMask(format!("zero dimension {width}x{height}")));
        }
        Ok(Self {
            width,
            height,
            bits: vec![value as u8; width as usize * height as usize],
        })
    }

    /// Builds a mask from row-major cells, each of which must be 0 or 1.
    pub fn from_bits(width: u32, height: u32, bits: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidMask(format!("zero dimension {width}x{height}")));
        }
        if bits.len() != width as usize * height as usize {
            return Err(Error::InvalidMask(format!(
                "expected {} cells, got {}",
                width as usize * height as usize,
                bits.len()
            )));
        }
        if let Some(bad) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::InvalidMask(format!("cell value {bad} is not binary")));
        }
        Ok(Self { width, height, bits })
    }

    /// Any nonzero value counts as change.
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Result<Self> {
        let mut mask = Self::empty(width, height)?;
        for row in 0..height {
            for col in 0..width {
                if f(row, col) {
                    mask.set(row, col, true);
                }
            }
        }
        Ok(mask)
    }

    /// Binary ingestion of a grayscale raster: every nonzero pixel is change.
    pub fn from_gray(img: &GrayImage) -> Result<Self> {
        let bits = img.as_raw().iter().map(|&v| (v != 0) as u8).collect();
        Self::from_bits(img.width(), img.height(), bits)
    }

    pub fn to_gray(&self) -> GrayImage {
        GrayImage::from_fn(self.width, self.height, |x, y| {
            Luma([if self.get(y, x) { 255 } else { 0 }])
        })
    }

    /// Reads any image format supported by the `image` crate; multi-channel inputs are
    /// converted to luma first.
    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        let img = image::open(path.as_ref())?.into_luma8();
        Self::from_gray(&img)
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_gray().save(path)?;
        Ok(())
    }

    pub fn encode_png(&self) -> Result<Vec<u8>> {
        let mut out = std::io::Cursor::new(Vec::new());
        self.to_gray().write_to(&mut out, image::ImageFormat::Png)?;
        Ok(out.into_inner())
    }

    pub fn decode_png(bytes: &[u8]) -> Result<Self> {
        let img = image::load_from_memory(bytes)?.into_luma8();
        Self::from_gray(&img)
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

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, row: u32, col: u32) -> bool {
        self.bits[row as usize * self.width as usize + col as usize] != 0
    }

    #[inline]
    pub fn set(&mut self, row: u32, col: u32, value: bool) {
        self.bits[row as usize * self.width as usize + col as usize] = value as u8;
    }

    /// Number of change pixels.
    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b != 0).count()
    }

    pub fn change_fraction(&self) -> f64 {
        change_fraction(self)
    }

    pub fn ensure_same_dims(&self, other: &ChangeMask) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                actual: other.dims(),
            });
        }
        Ok(())
    }
}

/// Fraction of change pixels, computed from exact integer counts.
pub fn change_fraction(mask: &ChangeMask) -> f64 {
    mask.count() as f64 / mask.len() as f64
}

/// Two co-registered RGB acquisitions with optional ground truth.
#[derive(Clone, Debug)]
pub struct BitemporalPair {
    image_a: RgbImage,
    image_b: RgbImage,
    ground_truth: Option<ChangeMask>,
}

impl BitemporalPair {
    pub fn new(image_a: RgbImage, image_b: RgbImage, ground_truth: Option<ChangeMask>) -> Result<Self> {
        if image_a.dimensions() != image_b.dimensions() {
            return Err(Error::DimensionMismatch {
                expected: image_a.dimensions(),
                actual: image_b.dimensions(),
            });
        }
        if image_a.width() == 0 || image_a.height() == 0 {
            return Err(Error::InvalidArgument("image has zero dimension".into()));
        }
        if let Some(gt) = &ground_truth {
            if gt.dims() != image_a.dimensions() {
                return Err(Error::DimensionMismatch {
                    expected: image_a.dimensions(),
                    actual: gt.dims(),
                });
            }
        }
        Ok(Self { image_a, image_b, ground_truth })
    }

    pub fn image_a(&self) -> &RgbImage {
        &self.image_a
    }

    pub fn image_b(&self) -> &RgbImage {
        &self.image_b
    }

    pub fn ground_truth(&self) -> Option<&ChangeMask> {
        self.ground_truth.as_ref()
    }

    pub fn width(&self) -> u32 {
        self.image_a.width()
    }

    pub fn height(&self) -> u32 {
        self.image_a.height()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fraction_of_trivial_masks() {
        assert_eq!(ChangeMask::empty(256, 256).unwrap().change_fraction(), 0.0);
        assert_eq!(ChangeMask::filled(256, 256, true).unwrap().change_fraction(), 1.0);
    }

    #[test]
    fn fraction_matches_direct_count() {
        let mut n = 0;
        let mask = ChangeMask::from_fn(256, 256, |_, _| {
            n += 1;
            n <= 3277
        })
        .unwrap();
        assert_eq!(mask.count(), 3277);
        assert_eq!(mask.change_fraction(), 3277.0 / 65536.0);
        assert!((mask.change_fraction() - 0.050003).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_cells_and_lengths() {
        assert!(ChangeMask::from_bits(2, 2, vec![0, 1, 2, 0]).is_err());
        assert!(ChangeMask::from_bits(2, 2, vec![0, 1, 0]).is_err());
        assert!(ChangeMask::empty(0, 4).is_err());
    }

    #[test]
    fn gray_ingestion_is_binary() {
        let img = GrayImage::from_raw(3, 1, vec![0, 1, 200]).unwrap();
        let mask = ChangeMask::from_gray(&img).unwrap();
        assert_eq!(mask.bits(), &[0, 1, 1]);
        let back = ChangeMask::decode_png(&mask.encode_png().unwrap()).unwrap();
        assert_eq!(back, mask);
        assert_eq!(mask.to_gray().as_raw(), &vec![0, 255, 255]);
    }

    #[test]
    fn pair_dimension_checks() {
        let a = RgbImage::new(4, 4);
        assert!(BitemporalPair::new(a.clone(), RgbImage::new(4, 5), None).is_err());
        let gt = ChangeMask::empty(3, 4).unwrap();
        assert!(BitemporalPair::new(a.clone(), a.clone(), Some(gt)).is_err());
        assert!(BitemporalPair::new(a.clone(), a, None).is_ok());
    }
}
