//! Axis-aligned box arithmetic, Jaccard overlap, and coordinate rescaling
//! between image scales.
//!
//! Boxes use continuous corner coordinates; area is `(x_max - x_min) *
//! (y_max - y_min)` with no +1 pixel convention.

use serde::{Deserialize, Serialize};

/// Longer-side cap applied when resizing to a target shortest side.
pub const LONG_SIDE_CAP: f64 = 2000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BoundingBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        debug_assert!(x_min <= x_max && y_min <= y_max, "inverted box");
        Self {
            x_min,
            y_min,
            x_max,
            y_max,
        }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn is_degenerate(&self) -> bool {
        self.area() == 0.0
    }

    pub fn center(&self) -> (f64, f64) {
        (
            0.5 * (self.x_min + self.x_max),
            0.5 * (self.y_min + self.y_max),
        )
    }
}

/// Intersection area of two boxes; zero when they do not overlap.
pub fn intersection(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let w = a.x_max.min(b.x_max) - a.x_min.max(b.x_min);
    let h = a.y_max.min(b.y_max) - a.y_min.max(b.y_min);
    if w <= 0.0 || h <= 0.0 {
        0.0
    } else {
        w * h
    }
}

/// Jaccard overlap (intersection over union). Returns 0 when the union has
/// zero area, which covers the case of two degenerate boxes.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = intersection(a, b);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageSize {
    pub width: u32,
    pub height: u32,
}

impl ImageSize {
    pub fn new(width: u32, height: u32) -> Self {
        assert!(width >= 1 && height >= 1, "image dimensions must be >= 1");
        Self { width, height }
    }

    pub fn shortest_side(&self) -> u32 {
        self.width.min(self.height)
    }

    pub fn longest_side(&self) -> u32 {
        self.width.max(self.height)
    }

    pub fn pixels(&self) -> f64 {
        self.width as f64 * self.height as f64
    }
}

/// Round half away from zero (the convention used everywhere in this crate).
pub fn round_half_away(x: f64) -> f64 {
    x.round()
}

/// Resize factor for bringing the shortest side of `src` to `target_scale`,
/// capped so the longer side never exceeds [`LONG_SIDE_CAP`]. Returns the
/// resized dimensions (each clamped to >= 1) and the factor itself.
pub fn compute_resize(src: ImageSize, target_scale: u32) -> (ImageSize, f64) {
    assert!(target_scale >= 1, "target_scale must be >= 1");
    let factor = (target_scale as f64 / src.shortest_side() as f64)
        .min(LONG_SIDE_CAP / src.longest_side() as f64);
    let w = (round_half_away(src.width as f64 * factor) as u32).max(1);
    let h = (round_half_away(src.height as f64 * factor) as u32).max(1);
    (ImageSize { width: w, height: h }, factor)
}

/// Multiply every coordinate by `factor` (> 0).
pub fn rescale_box(b: &BoundingBox, factor: f64) -> BoundingBox {
    debug_assert!(factor > 0.0);
    BoundingBox {
        x_min: b.x_min * factor,
        y_min: b.y_min * factor,
        x_max: b.x_max * factor,
        y_max: b.y_max * factor,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn iou_identity() {
        let a = BoundingBox::new(0.0, 0.0, 10.0, 10.0);
        assert_eq!(iou(&a, &a), 1.0);
    }

    #[test]
    fn iou_disjoint() {
        let a = BoundingBox::new(0.0, 0.0, 10.0, 10.0);
        let b = BoundingBox::new(20.0, 20.0, 30.0, 30.0);
        assert_eq!(iou(&a, &b), 0.0);
    }

    #[test]
    fn iou_partial_overlap() {
        // intersection 50, union 150
        let a = BoundingBox::new(0.0, 0.0, 10.0, 10.0);
        let b = BoundingBox::new(5.0, 0.0, 15.0, 10.0);
        assert!((iou(&a, &b) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn iou_degenerate_pair() {
        let a = BoundingBox::new(3.0, 3.0, 3.0, 3.0);
        let b = BoundingBox::new(3.0, 3.0, 3.0, 3.0);
        assert_eq!(iou(&a, &b), 0.0);
    }

    #[test]
    fn resize_shortest_side_to_target() {
        let (sz, f) = compute_resize(ImageSize::new(1280, 720), 600);
        assert!((f - 600.0 / 720.0).abs() < 1e-12);
        assert_eq!(sz, ImageSize::new(1067, 600));
    }

    #[test]
    fn resize_already_at_scale() {
        let (sz, f) = compute_resize(ImageSize::new(1000, 600), 600);
        assert_eq!(f, 1.0);
        assert_eq!(sz, ImageSize::new(1000, 600));
    }

    #[test]
    fn resize_long_side_cap_binds() {
        let (sz, f) = compute_resize(ImageSize::new(4000, 600), 600);
        assert_eq!(f, 0.5);
        assert_eq!(sz, ImageSize::new(2000, 300));
    }

    #[test]
    fn rescale_identity_and_linearity() {
        let b = BoundingBox::new(0.0, 0.0, 10.0, 10.0);
        assert_eq!(rescale_box(&b, 1.0), b);
        assert_eq!(rescale_box(&b, 0.5), BoundingBox::new(0.0, 0.0, 5.0, 5.0));
    }

    fn arb_box() -> impl Strategy<Value = BoundingBox> {
        (
            -100.0f64..100.0,
            -100.0f64..100.0,
            0.0f64..50.0,
            0.0f64..50.0,
        )
            .prop_map(|(x, y, w, h)| BoundingBox::new(x, y, x + w, y + h))
    }

    proptest! {
        #[test]
        fn iou_symmetric(a in arb_box(), b in arb_box()) {
            prop_assert!((iou(&a, &b) - iou(&b, &a)).abs() < 1e-15);
        }

        #[test]
        fn iou_in_unit_interval(a in arb_box(), b in arb_box()) {
            let v = iou(&a, &b);
            prop_assert!((0.0..=1.0).contains(&v));
        }

        #[test]
        fn iou_scale_and_translation_invariant(
            a in arb_box(), b in arb_box(),
            k in 0.1f64..10.0, dx in -50.0f64..50.0, dy in -50.0f64..50.0,
        ) {
            let base = iou(&a, &b);
            let scaled = iou(&rescale_box(&a, k), &rescale_box(&b, k));
            prop_assert!((base - scaled).abs() < 1e-9);
            let shift = |p: &BoundingBox| BoundingBox::new(
                p.x_min + dx, p.y_min + dy, p.x_max + dx, p.y_max + dy);
            prop_assert!((base - iou(&shift(&a), &shift(&b))).abs() < 1e-9);
        }

        #[test]
        fn resize_respects_long_side_cap(
            w in 1u32..5000, h in 1u32..5000, target in 1u32..1200,
        ) {
            let (sz, _) = compute_resize(ImageSize::new(w, h), target);
            // +1 pixel tolerance from rounding
            prop_assert!(sz.longest_side() <= LONG_SIDE_CAP as u32 + 1);
        }
    }
}
