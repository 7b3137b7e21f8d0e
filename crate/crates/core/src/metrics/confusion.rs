use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

use crate::raster::ChangeMask;
use crate::Result;

/// Pixel counts from the point of view of the change class.
///
/// The no-change class is the same matrix with positives and negatives swapped.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// The same counts seen from the no-change class.
    pub fn swapped(&self) -> ConfusionMatrix {
        ConfusionMatrix {
            tp: self.tn,
            fp: self.fn_,
            fn_: self.fp,
            tn: self.tp,
        }
    }

    pub fn from_masks(pred: &ChangeMask, gt: &ChangeMask) -> Result<ConfusionMatrix> {
        accumulate(ConfusionMatrix::default(), pred, gt)
    }
}

impl AddAssign for ConfusionMatrix {
    fn add_assign(&mut self, o: Self) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
        self.tn += o.tn;
    }
}

impl std::iter::Sum for ConfusionMatrix {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), |mut acc, cm| {
            acc += cm;
            acc
        })
    }
}

/// Adds the pixel-wise counts of one prediction to `cm`.
pub fn accumulate(mut cm: ConfusionMatrix, pred: &ChangeMask, gt: &ChangeMask) -> Result<ConfusionMatrix> {
    pred.ensure_same_dims(gt)?;
    for (&p, &g) in pred.bits().iter().zip(gt.bits()) {
        match (p != 0, g != 0) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fp += 1,
            (false, true) => cm.fn_ += 1,
            (false, false) => cm.tn += 1,
        }
    }
    Ok(cm)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IouScores {
    pub iou_c: f64,
    pub iou_nc: f64,
    pub miou: f64,
}

fn iou(tp: u64, fp: u64, fn_: u64) -> f64 {
    let denom = tp + fp + fn_;
    if denom == 0 {
        1.0
    } else {
        tp as f64 / denom as f64
    }
}

/// Per-class IoU for change / no-change and their mean. A class that is absent and never
/// predicted scores 1.
pub fn miou(cm: &ConfusionMatrix) -> IouScores {
    let iou_c = iou(cm.tp, cm.fp, cm.fn_);
    let iou_nc = iou(cm.tn, cm.fn_, cm.fp);
    IouScores {
        iou_c,
        iou_nc,
        miou: (iou_c + iou_nc) / 2.0,
    }
}
