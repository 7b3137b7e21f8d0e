//! Classical change detector: RGB differencing, smoothing, thresholding and morphology.

use serde::{Deserialize, Serialize};

use super::{BitemporalPair, ChangeMask};
use crate::Result;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "value")]
pub enum ThresholdMode {
    Otsu,
    /// Distance in `[0, sqrt(3)]` above which a pixel counts as change.
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectConfig {
    pub blur_sigma: f64,
    pub threshold_mode: ThresholdMode,
    pub min_area: usize,
    /// Half-width of the square structuring element.
    pub morph_radius: u32,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            blur_sigma: 1.0,
            threshold_mode: ThresholdMode::Otsu,
            min_area: 50,
            morph_radius: 1,
        }
    }
}

/// Detects change by differencing the two acquisitions.
///
/// Per-pixel Euclidean RGB distance (channels scaled to `[0, 1]`), Gaussian blur,
/// threshold, morphological open then close, and finally removal of 8-connected
/// components smaller than `min_area`.
pub fn difference_mask(pair: &BitemporalPair, cfg: &DetectConfig) -> Result<ChangeMask> {
    let (w, h) = (pair.width() as usize, pair.height() as usize);
    let distance: Vec<f64> = pair
        .image_a()
        .pixels()
        .zip(pair.image_b().pixels())
        .map(|(a, b)| {
            a.0.iter()
                .zip(b.0.iter())
                .map(|(&x, &y)| {
                    let d = (x as f64 - y as f64) / 255.0;
                    d * d
                })
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let smooth = gaussian_blur(&distance, w, h, cfg.blur_sigma);
    let threshold = match cfg.threshold_mode {
        ThresholdMode::Otsu => otsu_threshold(&smooth),
        ThresholdMode::Fixed(v) => v,
    };
    let bits: Vec<bool> = smooth.iter().map(|&v| v > threshold).collect();
    let r = cfg.morph_radius as usize;
    let opened = dilate(&erode(&bits, w, h, r), w, h, r);
    let closed = erode(&dilate(&opened, w, h, r), w, h, r);
    let cleaned = remove_small_components(closed, w, h, cfg.min_area);
    ChangeMask::from_bits(
        pair.width(),
        pair.height(),
        cleaned.into_iter().map(u8::from).collect(),
    )
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as i64;
    let k: Vec<f64> = (-radius..=radius)
        .map(|x| (-(x * x) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = k.iter().sum();
    k.into_iter().map(|v| v / total).collect()
}

/// Separable blur with clamp-to-edge borders. `sigma <= 0` returns the input.
fn gaussian_blur(src: &[f64], w: usize, h: usize, sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return src.to_vec();
    }
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as i64;
    let clamp = |v: i64, hi: usize| v.clamp(0, hi as i64 - 1) as usize;

    let mut tmp = vec![0.0; w * h];
    for r in 0..h {
        for c in 0..w {
            tmp[r * w + c] = kernel
                .iter()
                .enumerate()
                .map(|(i, k)| k * src[r * w + clamp(c as i64 + i as i64 - radius, w)])
                .sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for r in 0..h {
        for c in 0..w {
            out[r * w + c] = kernel
                .iter()
                .enumerate()
                .map(|(i, k)| k * tmp[clamp(r as i64 + i as i64 - radius, h) * w + c])
                .sum();
        }
    }
    out
}

const OTSU_BINS: usize = 256;

/// Otsu's threshold over a 256-bin histogram spanning `[0, max]`.
///
/// Values strictly greater than the returned threshold belong to the upper class. When
/// several splits maximise the between-class variance the middle one is taken, which puts
/// the cut halfway across an empty gap between two modes. A constant input returns its
/// value so that nothing is classified as foreground.
pub fn otsu_threshold(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(0.0_f64, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if values.is_empty() || max <= 0.0 || max == min {
        return max.max(0.0);
    }
    let bin_width = max / OTSU_BINS as f64;
    let mut counts = [0usize; OTSU_BINS];
    let mut sums = [0.0f64; OTSU_BINS];
    for &v in values {
        let b = ((v / bin_width) as usize).min(OTSU_BINS - 1);
        counts[b] += 1;
        sums[b] += v;
    }
    let total = values.len() as f64;
    let total_sum: f64 = sums.iter().sum();

    let mut best = f64::NEG_INFINITY;
    let (mut first, mut last) = (0, 0);
    let (mut n0, mut s0) = (0.0, 0.0);
    for k in 0..OTSU_BINS - 1 {
        n0 += counts[k] as f64;
        s0 += sums[k];
        let n1 = total - n0;
        if n0 == 0.0 || n1 == 0.0 {
            continue;
        }
        let m0 = s0 / n0;
        let m1 = (total_sum - s0) / n1;
        let between = n0 * n1 * (m0 - m1) * (m0 - m1);
        if between > best * (1.0 + 1e-12) {
            best = between;
            first = k;
            last = k;
        } else if between >= best * (1.0 - 1e-12) {
            last = k;
        }
    }
    let k = (first + last) / 2;
    (k + 1) as f64 * bin_width
}

fn morph(src: &[bool], w: usize, h: usize, radius: usize, dilate: bool) -> Vec<bool> {
    if radius == 0 {
        return src.to_vec();
    }
    let mut out = vec![false; w * h];
    for r in 0..h {
        let (r0, r1) = (r.saturating_sub(radius), (r + radius).min(h - 1));
        for c in 0..w {
            let (c0, c1) = (c.saturating_sub(radius), (c + radius).min(w - 1));
            let mut window = (r0..=r1).flat_map(|rr| (c0..=c1).map(move |cc| rr * w + cc));
            out[r * w + c] = if dilate {
                window.any(|i| src[i])
            } else {
                window.all(|i| src[i])
            };
        }
    }
    out
}

// out-of-image pixels are ignored by both operators, so shapes touching the border survive
fn erode(src: &[bool], w: usize, h: usize, radius: usize) -> Vec<bool> {
    morph(src, w, h, radius, false)
}

fn dilate(src: &[bool], w: usize, h: usize, radius: usize) -> Vec<bool> {
    morph(src, w, h, radius, true)
}

fn remove_small_components(mut bits: Vec<bool>, w: usize, h: usize, min_area: usize) -> Vec<bool> {
    if min_area <= 1 {
        return bits;
    }
    let mut seen = vec![false; w * h];
    let mut stack = Vec::new();
    let mut members = Vec::new();
    for start in 0..w * h {
        if seen[start] || !bits[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        members.clear();
        while let Some(idx) = stack.pop() {
            members.push(idx);
            let (r, c) = ((idx / w) as i64, (idx % w) as i64);
            for dr in -1..=1 {
                for dc in -1..=1 {
                    let (nr, nc) = (r + dr, c + dc);
                    if nr < 0 || nc < 0 || nr >= h as i64 || nc >= w as i64 {
                        continue;
                    }
                    let n = nr as usize * w + nc as usize;
                    if bits[n] && !seen[n] {
                        seen[n] = true;
                        stack.push(n);
                    }
                }
            }
        }
        if members.len() < min_area {
            for &i in &members {
                bits[i] = false;
            }
        }
    }
    bits
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::{Rgb, RgbImage};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn textured(seed: u64, w: u32, h: u32) -> RgbImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        RgbImage::from_fn(w, h, |_, _| {
            let g = rng.random_range(60..120u8);
            Rgb([g / 2, g, g / 3])
        })
    }

    fn square_pair(noise: Option<(u64, f64)>) -> (BitemporalPair, ChangeMask) {
        let a = textured(11, 128, 128);
        let mut b = a.clone();
        for y in 40..72 {
            for x in 50..82 {
                b.put_pixel(x, y, Rgb([200, 170, 140]));
            }
        }
        let mut a = a;
        if let Some((seed, amp)) = noise {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for img in [&mut a, &mut b] {
                for p in img.pixels_mut() {
                    for ch in p.0.iter_mut() {
                        let n = rng.random_range(-amp..=amp) * 255.0;
                        *ch = (*ch as f64 + n).round().clamp(0.0, 255.0) as u8;
                    }
                }
            }
        }
        let truth = ChangeMask::from_fn(128, 128, |r, c| (40..72).contains(&r) && (50..82).contains(&c)).unwrap();
        (BitemporalPair::new(a, b, None).unwrap(), truth)
    }

    #[test]
    fn identical_images_give_empty_mask() {
        let a = textured(3, 64, 48);
        let pair = BitemporalPair::new(a.clone(), a, None).unwrap();
        for mode in [ThresholdMode::Otsu, ThresholdMode::Fixed(0.01)] {
            let cfg = DetectConfig { threshold_mode: mode, ..Default::default() };
            assert!(difference_mask(&pair, &cfg).unwrap().is_empty());
        }
    }

    #[test]
    fn clean_square_is_recovered_exactly() {
        let (pair, truth) = square_pair(None);
        let cfg = DetectConfig { blur_sigma: 0.0, ..Default::default() };
        assert_eq!(difference_mask(&pair, &cfg).unwrap(), truth);

        // blurring rounds off at most the corners of a sharp square
        let got = difference_mask(&pair, &DetectConfig::default()).unwrap();
        let missed = (0..128)
            .flat_map(|r| (0..128).map(move |c| (r, c)))
            .filter(|&(r, c)| got.get(r, c) != truth.get(r, c))
            .count();
        assert!(missed <= 4, "{missed}");
    }

    #[test]
    fn noisy_square_has_high_iou() {
        for seed in 0..5 {
            let (pair, truth) = square_pair(Some((seed, 5.0 / 255.0)));
            let got = difference_mask(&pair, &DetectConfig::default()).unwrap();
            let inter = got.bits().iter().zip(truth.bits()).filter(|(a, b)| **a == 1 && **b == 1).count();
            let union = got.bits().iter().zip(truth.bits()).filter(|(a, b)| **a == 1 || **b == 1).count();
            let iou = inter as f64 / union as f64;
            assert!(iou >= 0.8, "seed {seed}: {iou}");
        }
    }

    #[test]
    fn otsu_splits_two_modes() {
        let mut v = vec![0.1; 100];
        v.extend(vec![0.9; 50]);
        let t = otsu_threshold(&v);
        assert!(t > 0.1 && t < 0.9, "{t}");
        assert_eq!(otsu_threshold(&[0.0; 10]), 0.0);
        assert_eq!(otsu_threshold(&[0.4; 10]), 0.4);
    }

    #[test]
    fn kernel_is_normalised_and_symmetric() {
        let k = gaussian_kernel(1.0);
        assert_eq!(k.len(), 7);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(k[0], k[6]);
    }

    #[test]
    fn opening_removes_speckle_and_min_area_removes_blobs() {
        let mut bits = vec![false; 20 * 20];
        bits[5 * 20 + 5] = true;
        let opened = dilate(&erode(&bits, 20, 20, 1), 20, 20, 1);
        assert!(opened.iter().all(|b| !b));

        let mut blob = vec![false; 20 * 20];
        for r in 0..5 {
            for c in 0..5 {
                blob[r * 20 + c] = true;
            }
        }
        assert_eq!(remove_small_components(blob.clone(), 20, 20, 25), blob);
        assert!(remove_small_components(blob, 20, 20, 26).iter().all(|b| !b));
    }
}
