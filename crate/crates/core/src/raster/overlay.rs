use image::{Rgb, RgbImage};

use super::ChangeMask;
use crate::{Error, Result};

pub const TRUE_POSITIVE: Rgb<u8> = Rgb([255, 255, 0]);
pub const FALSE_POSITIVE: Rgb<u8> = Rgb([255, 0, 0]);
pub const FALSE_NEGATIVE: Rgb<u8> = Rgb([0, 255, 0]);

/// Paints agreement (yellow), false positives (red) and false negatives (green) over
/// `base`. True negatives keep the base pixel.
pub fn overlay(pred: &ChangeMask, gt: &ChangeMask, base: &RgbImage) -> Result<RgbImage> {
    pred.ensure_same_dims(gt)?;
    if base.dimensions() != pred.dims() {
        return Err(Error::DimensionMismatch {
            expected: pred.dims(),
            actual: base.dimensions(),
        });
    }
    Ok(RgbImage::from_fn(base.width(), base.height(), |x, y| {
        match (pred.get(y, x), gt.get(y, x)) {
            (true, true) => TRUE_POSITIVE,
            (true, false) => FALSE_POSITIVE,
            (false, true) => FALSE_NEGATIVE,
            (false, false) => *base.get_pixel(x, y),
        }
    }))
}
