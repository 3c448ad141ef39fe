//! Canny edge detection on 8-bit grayscale images.

use std::collections::VecDeque;

use super::image::{EdgeMask, GrayImage};

pub const DEFAULT_LOW: f64 = 20.0;
pub const DEFAULT_HIGH: f64 = 200.0;
const SIGMA: f64 = 1.4;
const RADIUS: usize = 2;

fn gaussian_kernel() -> [f64; 2 * RADIUS + 1] {
    let mut k = [0.0; 2 * RADIUS + 1];
    for (i, w) in k.iter_mut().enumerate() {
        let x = i as f64 - RADIUS as f64;
        *w = (-x * x / (2.0 * SIGMA * SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.map(|w| w / s)
}

/// 5x5 Gaussian blur (separable) with replicated borders.
fn blur(img: &GrayImage) -> Vec<f64> {
    let (w, h) = (img.width, img.height);
    let k = gaussian_kernel();
    let src: Vec<f64> = img.data.iter().map(|&v| v as f64).collect();
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = k
                .iter()
                .enumerate()
                .map(|(i, kw)| {
                    let xx = (x as isize + i as isize - RADIUS as isize).clamp(0, w as isize - 1) as usize;
                    kw * src[y * w + xx]
                })
                .sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = k
                .iter()
                .enumerate()
                .map(|(i, kw)| {
                    let yy = (y as isize + i as isize - RADIUS as isize).clamp(0, h as isize - 1) as usize;
                    kw * tmp[yy * w + x]
                })
                .sum();
        }
    }
    out
}

/// Sobel gradients `(gx, gy)` with replicated borders; `gy` grows downwards.
fn sobel(src: &[f64], w: usize, h: usize) -> (Vec<f64>, Vec<f64>) {
    let at = |x: isize, y: isize| src[y.clamp(0, h as isize - 1) as usize * w + x.clamp(0, w as isize - 1) as usize];
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let k = y as usize * w + x as usize;
            gx[k] = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
            gy[k] = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
        }
    }
    (gx, gy)
}

/// Gaussian blur (σ = 1.4, 5x5), Sobel gradients, non-maximum suppression
/// and double-threshold hysteresis with 8-connectivity.
///
/// Along the gradient direction a pixel survives suppression when it is
/// `>=` its backward neighbour and `>` its forward neighbour, so a plateau
/// of two equal maxima keeps exactly one pixel.
pub fn canny(img: &GrayImage, low: f64, high: f64) -> EdgeMask {
    let (w, h) = (img.width, img.height);
    let mut mask = EdgeMask::empty(w, h);
    if w == 0 || h == 0 {
        return mask;
    }
    let blurred = blur(img);
    let (gx, gy) = sobel(&blurred, w, h);
    let mag: Vec<f64> = gx.iter().zip(&gy).map(|(a, b)| a.hypot(*b)).collect();

    let mut thin = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let k = y * w + x;
            let m = mag[k];
            if m == 0.0 {
                continue;
            }
            let angle = gy[k].atan2(gx[k]).to_degrees().rem_euclid(180.0);
            let (dx, dy): (isize, isize) = if !(22.5..157.5).contains(&angle) {
                (1, 0)
            } else if angle < 67.5 {
                (1, 1)
            } else if angle < 112.5 {
                (0, 1)
            } else {
                (-1, 1)
            };
            let sample = |sx: isize, sy: isize| -> f64 {
                let (xx, yy) = (x as isize + sx, y as isize + sy);
                if xx < 0 || yy < 0 || xx >= w as isize || yy >= h as isize {
                    0.0
                } else {
                    mag[yy as usize * w + xx as usize]
                }
            };
            if m >= sample(-dx, -dy) && m > sample(dx, dy) {
                thin[k] = m;
            }
        }
    }

    let mut queue = VecDeque::new();
    for (k, &m) in thin.iter().enumerate() {
        if m >= high {
            mask.data[k] = 1;
            queue.push_back(k);
        }
    }
    while let Some(k) = queue.pop_front() {
        let (x, y) = ((k % w) as isize, (k / w) as isize);
        for dy in -1..=1isize {
            for dx in -1..=1isize {
                let (xx, yy) = (x + dx, y + dy);
                if xx < 0 || yy < 0 || xx >= w as isize || yy >= h as isize {
                    continue;
                }
                let j = yy as usize * w + xx as usize;
                if mask.data[j] == 0 && thin[j] >= low {
                    mask.data[j] = 1;
                    queue.push_back(j);
                }
            }
        }
    }
    mask
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::image::dilate;

    fn step(w: usize, h: usize, at: usize) -> GrayImage {
        GrayImage::from_fn(w, h, |x, _| if x < at { 0 } else { 255 })
    }

    fn columns(mask: &EdgeMask) -> Vec<usize> {
        (0..mask.width).filter(|&x| (0..mask.height).any(|y| mask.get(x, y))).collect()
    }

    #[test]
    fn constant_image_has_no_edges() {
        let img = GrayImage::from_fn(32, 32, |_, _| 77);
        assert!(canny(&img, DEFAULT_LOW, DEFAULT_HIGH).is_empty());
    }

    #[test]
    fn vertical_step_gives_one_column() {
        let mask = canny(&step(32, 32, 16), DEFAULT_LOW, DEFAULT_HIGH);
        let cols = columns(&mask);
        assert_eq!(cols.len(), 1, "{cols:?}");
        let c = cols[0];
        assert!(c == 15 || c == 16);
        assert_eq!(mask.count(), 32);
        let band = dilate(&mask, 2, 1);
        assert_eq!(columns(&band), (c - 2..=c + 2).collect::<Vec<_>>());
        assert_eq!(band.count(), 5 * 32);
    }

    #[test]
    fn horizontal_step_gives_one_row() {
        let img = GrayImage::from_fn(24, 24, |_, y| if y < 10 { 200 } else { 0 });
        let mask = canny(&img, DEFAULT_LOW, DEFAULT_HIGH);
        let rows: Vec<usize> = (0..24).filter(|&y| (0..24).any(|x| mask.get(x, y))).collect();
        assert_eq!(rows.len(), 1);
    }

    #[test]
    fn weak_step_below_high_threshold_is_dropped() {
        // a 20-level step gives gradient magnitude well under 200
        let img = GrayImage::from_fn(32, 32, |x, _| if x < 16 { 100 } else { 120 });
        assert!(canny(&img, DEFAULT_LOW, DEFAULT_HIGH).is_empty());
        assert!(!canny(&img, 5.0, 20.0).is_empty());
    }

    #[test]
    fn kernel_is_normalized_and_symmetric() {
        let k = gaussian_kernel();
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(k[0], k[4]);
        assert_eq!(k[1], k[3]);
    }
}
