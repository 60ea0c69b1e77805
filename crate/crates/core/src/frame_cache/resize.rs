/// Factor-aligned, budget-constrained resize target.
///
/// Both sides are rounded to the nearest multiple of `factor` (at least
/// `factor`). If that exceeds `pixel_budget`, the frame is scaled by
/// `sqrt(budget / (h * w))` and each side floored to a multiple of `factor`.
/// The scaled branch never exceeds the budget: when the `factor` floor on a
/// very thin frame would overshoot, the longer side is shrunk further.
pub fn smart_resize(height: usize, width: usize, pixel_budget: usize, factor: usize) -> (usize, usize) {
    debug_assert!(height >= 1 && width >= 1 && factor >= 1);
    debug_assert!(pixel_budget >= factor * factor);

    let round_to = |x: usize| -> usize {
        let r = (x as f64 / factor as f64).round() as usize * factor;
        r.max(factor)
    };
    let (rh, rw) = (round_to(height), round_to(width));
    if rh.saturating_mul(rw) <= pixel_budget {
        return (rh, rw);
    }

    let s = (pixel_budget as f64 / (height as f64 * width as f64)).sqrt();
    let floor_to = |x: usize| -> usize {
        let f = (x as f64 * s / factor as f64).floor() as usize * factor;
        f.max(factor)
    };
    let (mut h, mut w) = (floor_to(height), floor_to(width));
    if h * w > pixel_budget {
        if h >= w {
            h = (pixel_budget / w / factor * factor).max(factor);
        } else {
            w = (pixel_budget / h / factor * factor).max(factor);
        }
    }
    (h, w)
}

/// Nearest-neighbour resize of one interleaved RGB frame.
///
/// Source row for output row `y` is `floor((y + 0.5) * src_h / dst_h)`,
/// evaluated in integers so results are identical on every platform.
pub fn resize_nearest(
    src: &[u8],
    src_h: usize,
    src_w: usize,
    dst_h: usize,
    dst_w: usize,
    channels: usize,
) -> Vec<u8> {
    assert_eq!(src.len(), src_h * src_w * channels, "source buffer size");
    let col_map: Vec<usize> = (0..dst_w)
        .map(|x| (((2 * x + 1) * src_w) / (2 * dst_w)).min(src_w - 1))
        .collect();
    let mut out = Vec::with_capacity(dst_h * dst_w * channels);
    for y in 0..dst_h {
        let sy = (((2 * y + 1) * src_h) / (2 * dst_h)).min(src_h - 1);
        let row = &src[sy * src_w * channels..(sy + 1) * src_w * channels];
        for &sx in &col_map {
            out.extend_from_slice(&row[sx * channels..(sx + 1) * channels]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn vga_frame_under_default_video_budget() {
        let (h, w) = smart_resize(480, 640, 262_144, 28);
        assert_eq!((h, w), (420, 588));
        assert_eq!(h * w, 246_960);
    }

    #[test]
    fn aligned_inputs_under_budget_are_untouched() {
        assert_eq!(smart_resize(28, 28, 1_048_576, 28), (28, 28));
        assert_eq!(smart_resize(224, 224, 1_048_576, 28), (224, 224));
    }

    #[test]
    fn tiny_inputs_round_up_to_one_factor() {
        assert_eq!(smart_resize(1, 1, 784, 28), (28, 28));
    }

    #[test]
    fn extreme_aspect_ratio_stays_within_budget() {
        let (h, w) = smart_resize(1, 1_000_000, 784 * 4, 28);
        assert!(h * w <= 784 * 4);
        assert_eq!(h % 28, 0);
        assert_eq!(w % 28, 0);
    }

    #[test]
    fn nearest_resize_identity_and_downscale() {
        let src: Vec<u8> = (0..(4 * 4 * 3) as u8).collect();
        assert_eq!(resize_nearest(&src, 4, 4, 4, 4, 3), src);
        let half = resize_nearest(&src, 4, 4, 2, 2, 3);
        // rows 1 and 3, cols 1 and 3
        let pick = |y: usize, x: usize| &src[(y * 4 + x) * 3..(y * 4 + x) * 3 + 3];
        let expected: Vec<u8> = [pick(1, 1), pick(1, 3), pick(3, 1), pick(3, 3)].concat();
        assert_eq!(half, expected);
    }

    proptest! {
        #[test]
        fn output_is_aligned_and_within_budget(
            h in 1usize..4000,
            w in 1usize..4000,
            budget_patches in 1usize..2000,
        ) {
            let factor = 28;
            let budget = budget_patches * factor * factor;
            let (oh, ow) = smart_resize(h, w, budget, factor);
            prop_assert_eq!(oh % factor, 0);
            prop_assert_eq!(ow % factor, 0);
            prop_assert!(oh * ow <= budget);
        }
    }
}
