//! Image granulation into purity/variance-constrained granular rectangles.
//!
//! Pixels are visited in ascending order of Sobel gradient magnitude. Each
//! still-unlabeled pixel becomes the center of a new rectangle whose radii are
//! found by two successive binary searches (one axis with the other radius
//! pinned at zero, then the other axis with the first radius fixed). Every
//! pixel inside the new rectangle is labeled, and the loop ends once every
//! pixel is covered.
//!
//! Rectangles are clipped to the image: a rectangle with center `c` and radius
//! `r` spans `[max(0, c - r), min(len - 1, c + r)]` on each axis, and stored
//! radii never exceed `max(c, len - 1 - c)` (larger radii describe the same
//! clipped span).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Image;

#[derive(Debug, Error, PartialEq)]
pub enum GranulationError {
    #[error("invalid granulation config: {0}")]
    InvalidConfig(String),
    #[error("center ({x}, {y}) outside {width}x{height} image")]
    CenterOutOfBounds {
        x: usize,
        y: usize,
        width: usize,
        height: usize,
    },
}

/// Which gray-value deviations count against purity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum PurityMode {
    /// Only pixels brighter than the center by more than `gray_thr`.
    #[default]
    OneSided,
    /// Pixels differing from the center by more than `gray_thr` either way.
    Symmetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum AxisOrder {
    /// Search `r_x` with `r_y = 0`, then `r_y` with `r_x` fixed.
    #[default]
    XThenY,
    YThenX,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GranulationConfig {
    pub gray_thr: f64,
    pub purity_thr: f64,
    pub var_thr: f64,
    pub purity_mode: PurityMode,
    pub axis_order: AxisOrder,
}

impl Default for GranulationConfig {
    fn default() -> Self {
        Self {
            gray_thr: 0.08,
            purity_thr: 0.9,
            var_thr: 0.01,
            purity_mode: PurityMode::OneSided,
            axis_order: AxisOrder::XThenY,
        }
    }
}

impl GranulationConfig {
    pub fn validate(&self) -> Result<(), GranulationError> {
        if !(self.purity_thr > 0.0 && self.purity_thr <= 1.0) {
            return Err(GranulationError::InvalidConfig(format!(
                "purity_thr must be in (0, 1], got {}",
                self.purity_thr
            )));
        }
        if !(self.gray_thr >= 0.0) {
            return Err(GranulationError::InvalidConfig(format!(
                "gray_thr must be >= 0, got {}",
                self.gray_thr
            )));
        }
        if !(self.var_thr >= 0.0) {
            return Err(GranulationError::InvalidConfig(format!(
                "var_thr must be >= 0, got {}",
                self.var_thr
            )));
        }
        Ok(())
    }
}

/// Per-pixel Sobel gradient magnitude.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientMap {
    pub width: usize,
    pub height: usize,
    pub magnitudes: Vec<f64>,
}

impl GradientMap {
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.magnitudes[y * self.width + x]
    }

    /// Pixel indices in ascending magnitude, ties by row-major index.
    pub fn ascending_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.magnitudes.len()).collect();
        order.sort_by(|&a, &b| self.magnitudes[a].total_cmp(&self.magnitudes[b]).then(a.cmp(&b)));
        order
    }
}

/// 3x3 Sobel magnitude `sqrt(gx^2 + gy^2)` with edge replication at borders.
pub fn sobel_gradient(image: &Image) -> GradientMap {
    let (w, h) = (image.width(), image.height());
    let px = image.pixels();
    let at = |x: isize, y: isize| {
        let xc = x.clamp(0, w as isize - 1) as usize;
        let yc = y.clamp(0, h as isize - 1) as usize;
        px[yc * w + xc]
    };
    let mut magnitudes = Vec::with_capacity(w * h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let gx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
            let gy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
            magnitudes.push((gx * gx + gy * gy).sqrt());
        }
    }
    GradientMap {
        width: w,
        height: h,
        magnitudes,
    }
}

/// Inclusive pixel span of a clipped rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub x0: usize,
    pub x1: usize,
    pub y0: usize,
    pub y1: usize,
}

impl Span {
    pub fn clipped(width: usize, height: usize, cx: usize, cy: usize, rx: usize, ry: usize) -> Self {
        Self {
            x0: cx.saturating_sub(rx),
            x1: (cx + rx).min(width - 1),
            y0: cy.saturating_sub(ry),
            y1: (cy + ry).min(height - 1),
        }
    }

    pub fn area(&self) -> usize {
        (self.x1 - self.x0 + 1) * (self.y1 - self.y0 + 1)
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        (self.x0..=self.x1).contains(&x) && (self.y0..=self.y1).contains(&y)
    }

    pub fn intersects(&self, other: &Span) -> bool {
        self.x0 <= other.x1 && other.x0 <= self.x1 && self.y0 <= other.y1 && other.y0 <= self.y1
    }

    fn values<'a>(&self, image: &'a Image) -> impl Iterator<Item = f64> + 'a {
        let w = image.width();
        let (x0, x1) = (self.x0, self.x1);
        let px = image.pixels();
        (self.y0..=self.y1).flat_map(move |y| px[y * w + x0..=y * w + x1].iter().copied())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionStats {
    pub mean: f64,
    pub variance: f64,
    pub max_val: f64,
    pub min_val: f64,
}

/// A clipped, axis-aligned granule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GranularRectangle {
    pub center_x: usize,
    pub center_y: usize,
    pub r_x: usize,
    pub r_y: usize,
    pub purity: f64,
    pub variance: f64,
    pub mean: f64,
    pub max_val: f64,
    pub min_val: f64,
}

impl GranularRectangle {
    pub fn span(&self, width: usize, height: usize) -> Span {
        Span::clipped(width, height, self.center_x, self.center_y, self.r_x, self.r_y)
    }
}

#[inline]
fn is_deviant(value: f64, center: f64, gray_thr: f64, mode: PurityMode) -> bool {
    match mode {
        PurityMode::OneSided => value - center > gray_thr,
        PurityMode::Symmetric => (value - center).abs() > gray_thr,
    }
}

/// Fraction of non-deviant pixels in the clipped rectangle, using the
/// one-sided indicator `f(p) - f(center) > gray_thr`.
pub fn purity(image: &Image, center: (usize, usize), r_x: usize, r_y: usize, gray_thr: f64) -> f64 {
    purity_with_mode(image, center, r_x, r_y, gray_thr, PurityMode::OneSided)
}

pub fn purity_with_mode(
    image: &Image,
    center: (usize, usize),
    r_x: usize,
    r_y: usize,
    gray_thr: f64,
    mode: PurityMode,
) -> f64 {
    let span = Span::clipped(image.width(), image.height(), center.0, center.1, r_x, r_y);
    let c = image.get(center.0, center.1);
    let deviants = span.values(image).filter(|&v| is_deviant(v, c, gray_thr, mode)).count();
    purity_from_count(deviants, span.area())
}

#[inline]
fn purity_from_count(deviants: usize, total: usize) -> f64 {
    1.0 - deviants as f64 / total as f64
}

/// Population statistics (divisor `N`) over the clipped rectangle. The
/// variance is computed in two passes around the mean.
pub fn region_stats(image: &Image, center: (usize, usize), r_x: usize, r_y: usize) -> RegionStats {
    let span = Span::clipped(image.width(), image.height(), center.0, center.1, r_x, r_y);
    span_stats(image, &span)
}

fn span_stats(image: &Image, span: &Span) -> RegionStats {
    let n = span.area() as f64;
    let (mut sum, mut max_val, mut min_val) = (0.0, f64::NEG_INFINITY, f64::INFINITY);
    for v in span.values(image) {
        sum += v;
        max_val = max_val.max(v);
        min_val = min_val.min(v);
    }
    let mean = (sum / n).clamp(min_val, max_val);
    let variance = span.values(image).map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    RegionStats {
        mean,
        variance,
        max_val,
        min_val,
    }
}

/// Largest `r` in `[0, hi]` with `admissible(r)`, assuming `admissible(0)`.
/// Returns an admissible radius even when the predicate is not monotone.
pub(crate) fn largest_admissible(hi: usize, mut admissible: impl FnMut(usize) -> bool) -> usize {
    let (mut lo, mut hi) = (0usize, hi);
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        if admissible(mid) {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    lo
}

/// Summed-area tables over values and squared values, used as a cheap
/// variance lower-bound filter before the exact checks.
struct Integral {
    stride: usize,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl Integral {
    fn new(image: &Image) -> Self {
        let (w, h) = (image.width(), image.height());
        let stride = w + 1;
        let mut sum = vec![0.0; stride * (h + 1)];
        let mut sum_sq = vec![0.0; stride * (h + 1)];
        for y in 0..h {
            let (mut row, mut row_sq) = (0.0, 0.0);
            for x in 0..w {
                let v = image.get(x, y);
                row += v;
                row_sq += v * v;
                sum[(y + 1) * stride + x + 1] = sum[y * stride + x + 1] + row;
                sum_sq[(y + 1) * stride + x + 1] = sum_sq[y * stride + x + 1] + row_sq;
            }
        }
        Self { stride, sum, sum_sq }
    }

    fn rect(table: &[f64], stride: usize, s: &Span) -> f64 {
        let (a, b) = (s.y0 * stride, (s.y1 + 1) * stride);
        table[b + s.x1 + 1] - table[a + s.x1 + 1] - table[b + s.x0] + table[a + s.x0]
    }

    fn variance(&self, s: &Span) -> f64 {
        let n = s.area() as f64;
        let mean = Self::rect(&self.sum, self.stride, s) / n;
        (Self::rect(&self.sum_sq, self.stride, s) / n - mean * mean).max(0.0)
    }
}

// Slack on the integral-image variance so the fast filter never rejects a
// rectangle that the exact two-pass variance would accept.
const INTEGRAL_SLACK: f64 = 1e-9;

/// Reusable granulation state for one image.
pub struct Granulator<'a> {
    image: &'a Image,
    config: GranulationConfig,
    integral: Integral,
}

impl<'a> Granulator<'a> {
    pub fn new(image: &'a Image, config: GranulationConfig) -> Result<Self, GranulationError> {
        config.validate()?;
        Ok(Self {
            image,
            config,
            integral: Integral::new(image),
        })
    }

    /// Purity and variance constraints for the clipped rectangle, with
    /// early exits. Rectangles of zero radius are always admissible.
    pub fn is_admissible(&self, center: (usize, usize), r_x: usize, r_y: usize) -> bool {
        let span = Span::clipped(self.image.width(), self.image.height(), center.0, center.1, r_x, r_y);
        self.span_admissible(center, &span)
    }

    fn span_admissible(&self, center: (usize, usize), span: &Span) -> bool {
        let cfg = &self.config;
        if self.integral.variance(span) > cfg.var_thr + INTEGRAL_SLACK {
            return false;
        }
        let total = span.area();
        let c = self.image.get(center.0, center.1);
        let mut deviants = 0usize;
        for v in span.values(self.image) {
            if is_deviant(v, c, cfg.gray_thr, cfg.purity_mode) {
                deviants += 1;
                if purity_from_count(deviants, total) < cfg.purity_thr {
                    return false;
                }
            }
        }
        span_stats(self.image, span).variance <= cfg.var_thr
    }

    pub fn grow(&self, center: (usize, usize)) -> Result<GranularRectangle, GranulationError> {
        let (w, h) = (self.image.width(), self.image.height());
        let (cx, cy) = center;
        if cx >= w || cy >= h {
            return Err(GranulationError::CenterOutOfBounds {
                x: cx,
                y: cy,
                width: w,
                height: h,
            });
        }
        let reach_x = cx.max(w - 1 - cx);
        let reach_y = cy.max(h - 1 - cy);
        let (r_x, r_y) = match self.config.axis_order {
            AxisOrder::XThenY => {
                let r_x = largest_admissible(reach_x, |r| self.is_admissible(center, r, 0));
                let r_y = largest_admissible(reach_y, |r| self.is_admissible(center, r_x, r));
                (r_x, r_y)
            }
            AxisOrder::YThenX => {
                let r_y = largest_admissible(reach_y, |r| self.is_admissible(center, 0, r));
                let r_x = largest_admissible(reach_x, |r| self.is_admissible(center, r, r_y));
                (r_x, r_y)
            }
        };
        Ok(self.finish(center, r_x, r_y))
    }

    fn finish(&self, center: (usize, usize), r_x: usize, r_y: usize) -> GranularRectangle {
        let stats = region_stats(self.image, center, r_x, r_y);
        GranularRectangle {
            center_x: center.0,
            center_y: center.1,
            r_x,
            r_y,
            purity: purity_with_mode(
                self.image,
                center,
                r_x,
                r_y,
                self.config.gray_thr,
                self.config.purity_mode,
            ),
            variance: stats.variance,
            mean: stats.mean,
            max_val: stats.max_val,
            min_val: stats.min_val,
        }
    }

    /// Full covering sequence in creation order.
    pub fn granulate(&self) -> Vec<GranularRectangle> {
        let (w, h) = (self.image.width(), self.image.height());
        let order = sobel_gradient(self.image).ascending_order();
        let mut labeled = vec![false; w * h];
        let mut rects = Vec::new();
        for idx in order {
            if labeled[idx] {
                continue;
            }
            let rect = self.grow((idx % w, idx / w)).expect("center drawn from the pixel grid");
            let span = rect.span(w, h);
            for y in span.y0..=span.y1 {
                labeled[y * w + span.x0..=y * w + span.x1].fill(true);
            }
            rects.push(rect);
        }
        rects
    }
}

pub fn grow_rectangle(
    image: &Image,
    center: (usize, usize),
    config: &GranulationConfig,
) -> Result<GranularRectangle, GranulationError> {
    Granulator::new(image, *config)?.grow(center)
}

pub fn granulate(image: &Image, config: &GranulationConfig) -> Result<Vec<GranularRectangle>, GranulationError> {
    Ok(Granulator::new(image, *config)?.granulate())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn image(w: usize, h: usize, f: impl Fn(usize, usize) -> f64) -> Image {
        let px = (0..h)
            .flat_map(|y| (0..w).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        Image::new(w, h, px).unwrap()
    }

    fn halves() -> Image {
        image(8, 8, |x, _| if x < 4 { 0.0 } else { 1.0 })
    }

    #[test]
    fn sobel_constant_is_zero() {
        let g = sobel_gradient(&image(5, 4, |_, _| 0.37));
        assert!(g.magnitudes.iter().all(|&m| m == 0.0));
        let single = sobel_gradient(&Image::filled(1, 1, 0.8).unwrap());
        assert_eq!(single.magnitudes, vec![0.0]);
    }

    #[test]
    fn sobel_vertical_step_matches_hand_convolution() {
        let delta = 0.25;
        let img = image(8, 6, |x, _| if x >= 4 { delta } else { 0.0 });
        let g = sobel_gradient(&img);
        // Hand convolution: the x-kernel column weights (1, 2, 1) sum to 4
        // on each side; only columns 3 and 4 straddle the step.
        for y in 0..6 {
            for x in 0..8 {
                let expected = if x == 3 || x == 4 { 4.0 * delta } else { 0.0 };
                assert!((g.get(x, y) - expected).abs() < 1e-12, "({x},{y}) = {}", g.get(x, y));
            }
        }
    }

    #[test]
    fn purity_counts() {
        let flat = image(3, 3, |_, _| 0.2);
        assert_eq!(purity(&flat, (1, 1), 1, 1, 0.05), 1.0);
        let one = image(3, 3, |x, y| if (x, y) == (2, 0) { 0.9 } else { 0.2 });
        assert_eq!(purity(&one, (1, 1), 1, 1, 0.05), 8.0 / 9.0);
        // darker pixels are never deviant under the one-sided indicator
        let dark = image(3, 3, |x, y| if (x, y) == (2, 0) { 0.0 } else { 0.5 });
        assert_eq!(purity(&dark, (1, 1), 1, 1, 0.05), 1.0);
        assert_eq!(
            purity_with_mode(&dark, (1, 1), 1, 1, 0.05, PurityMode::Symmetric),
            8.0 / 9.0
        );
    }

    #[test]
    fn purity_matches_brute_force_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let img = image(15, 12, |_, _| 0.0);
            let px: Vec<f64> = (0..img.len()).map(|_| rng.gen::<f64>()).collect();
            let img = Image::new(15, 12, px).unwrap();
            let (cx, cy) = (rng.gen_range(0..15), rng.gen_range(0..12));
            let (rx, ry) = (5, 3); // an 11x7 region when unclipped
            let thr = rng.gen_range(0.0..0.5);
            let c = img.get(cx, cy);
            let (mut dev, mut total) = (0, 0);
            for y in 0..12usize {
                for x in 0..15usize {
                    if x.abs_diff(cx) <= rx && y.abs_diff(cy) <= ry {
                        total += 1;
                        if img.get(x, y) - c > thr {
                            dev += 1;
                        }
                    }
                }
            }
            let expected = 1.0 - dev as f64 / total as f64;
            assert_eq!(purity(&img, (cx, cy), rx, ry, thr), expected);
        }
    }

    #[test]
    fn region_stats_cases() {
        let flat = image(4, 4, |_, _| 0.6);
        let s = region_stats(&flat, (1, 2), 1, 1);
        assert_eq!((s.mean, s.variance, s.max_val, s.min_val), (0.6, 0.0, 0.6, 0.6));
        let pair = image(2, 1, |x, _| x as f64);
        let s = region_stats(&pair, (0, 0), 1, 0);
        assert_eq!((s.mean, s.variance, s.max_val, s.min_val), (0.5, 0.25, 1.0, 0.0));
    }

    #[test]
    fn region_stats_match_two_pass_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            let px: Vec<f64> = (0..20 * 9).map(|_| rng.gen::<f64>()).collect();
            let img = Image::new(20, 9, px).unwrap();
            let (cx, cy, rx, ry) = (
                rng.gen_range(0..20),
                rng.gen_range(0..9),
                rng.gen_range(0..8),
                rng.gen_range(0..5),
            );
            let mut vals = Vec::new();
            for y in 0..9usize {
                for x in 0..20usize {
                    if x.abs_diff(cx) <= rx && y.abs_diff(cy) <= ry {
                        vals.push(img.get(x, y));
                    }
                }
            }
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let s = region_stats(&img, (cx, cy), rx, ry);
            assert!((s.mean - mean).abs() < 1e-12);
            assert!((s.variance - var).abs() < 1e-12);
            assert!(s.min_val <= s.mean && s.mean <= s.max_val);
        }
    }

    #[test]
    fn binary_search_returns_largest_admissible() {
        assert_eq!(largest_admissible(10, |r| r <= 7), 7);
        assert_eq!(largest_admissible(10, |_| true), 10);
        assert_eq!(largest_admissible(0, |_| true), 0);
        assert_eq!(largest_admissible(10, |r| r == 0), 0);
        // non-monotone predicate still yields an admissible radius
        let ok = |r: usize| r == 0 || r == 3 || r == 9;
        assert!(ok(largest_admissible(10, ok)));
    }

    #[test]
    fn uniform_image_grows_to_full_extent() {
        let img = image(7, 5, |_, _| 0.4);
        let cfg = GranulationConfig::default();
        for (cx, cy) in [(0, 0), (3, 2), (6, 4), (1, 3)] {
            let r = grow_rectangle(&img, (cx, cy), &cfg).unwrap();
            let span = r.span(7, 5);
            assert_eq!(
                span,
                Span {
                    x0: 0,
                    x1: 6,
                    y0: 0,
                    y1: 4
                }
            );
            assert_eq!(r.r_x, cx.max(6 - cx));
            assert_eq!(r.r_y, cy.max(4 - cy));
        }
    }

    #[test]
    fn single_pixel_image() {
        let img = Image::filled(1, 1, 0.3).unwrap();
        let r = grow_rectangle(&img, (0, 0), &GranulationConfig::default()).unwrap();
        assert_eq!((r.r_x, r.r_y, r.purity, r.variance), (0, 0, 1.0, 0.0));
        assert_eq!(granulate(&img, &GranulationConfig::default()).unwrap().len(), 1);
    }

    /// Incremental growth: extend each radius until the first failure.
    fn linear_scan(g: &Granulator, center: (usize, usize), reach: (usize, usize)) -> (usize, usize) {
        let mut rx = 0;
        while rx < reach.0 && g.is_admissible(center, rx + 1, 0) {
            rx += 1;
        }
        let mut ry = 0;
        while ry < reach.1 && g.is_admissible(center, rx, ry + 1) {
            ry += 1;
        }
        (rx, ry)
    }

    #[test]
    fn halves_never_cross_into_bright_side() {
        let img = halves();
        let cfg = GranulationConfig {
            gray_thr: 0.1,
            purity_thr: 1.0,
            ..Default::default()
        };
        let g = Granulator::new(&img, cfg).unwrap();
        for cy in 0..8 {
            for cx in 0..4 {
                let r = g.grow((cx, cy)).unwrap();
                let span = r.span(8, 8);
                assert!(span.x1 < 4, "center ({cx},{cy}) grew into {span:?}");
                let reach = (cx.max(7 - cx), cy.max(7 - cy));
                assert_eq!((r.r_x, r.r_y), linear_scan(&g, (cx, cy), reach));
            }
        }
    }

    #[test]
    fn uniform_image_is_one_rectangle_at_origin() {
        for n in [1, 4, 9, 16] {
            let img = image(n, n, |_, _| 0.55);
            let rects = granulate(&img, &GranulationConfig::default()).unwrap();
            assert_eq!(rects.len(), 1);
            assert_eq!((rects[0].center_x, rects[0].center_y), (0, 0));
            assert_eq!(rects[0].span(n, n).area(), n * n);
        }
    }

    #[test]
    fn halves_granulation_covers_grid() {
        let img = halves();
        let cfg = GranulationConfig {
            gray_thr: 0.1,
            purity_thr: 1.0,
            ..Default::default()
        };
        let rects = granulate(&img, &cfg).unwrap();
        assert!(rects.len() >= 2);
        let mut covered = [false; 64];
        for r in &rects {
            let s = r.span(8, 8);
            for y in s.y0..=s.y1 {
                for x in s.x0..=s.x1 {
                    covered[y * 8 + x] = true;
                }
            }
            assert!(r.purity >= cfg.purity_thr && r.variance <= cfg.var_thr);
        }
        assert!(covered.iter().all(|&c| c));
    }

    #[test]
    fn config_validation() {
        let bad = GranulationConfig {
            purity_thr: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = GranulationConfig {
            var_thr: -1.0,
            ..Default::default()
        };
        assert!(granulate(&Image::filled(2, 2, 0.0).unwrap(), &bad).is_err());
        let img = Image::filled(2, 2, 0.0).unwrap();
        assert!(matches!(
            grow_rectangle(&img, (2, 0), &GranulationConfig::default()),
            Err(GranulationError::CenterOutOfBounds { .. })
        ));
    }

    #[test]
    fn y_then_x_order_is_transpose_consistent() {
        let img = halves();
        let t = image(8, 8, |x, y| img.get(y, x));
        let cfg = GranulationConfig {
            gray_thr: 0.1,
            ..Default::default()
        };
        let swapped = GranulationConfig {
            axis_order: AxisOrder::YThenX,
            ..cfg
        };
        for cy in 0..8 {
            for cx in 0..8 {
                let a = grow_rectangle(&img, (cx, cy), &cfg).unwrap();
                let b = grow_rectangle(&t, (cy, cx), &swapped).unwrap();
                assert_eq!((a.r_x, a.r_y), (b.r_y, b.r_x));
            }
        }
    }
}
