//! Greyscale frames of the trail field.

use crate::lattice::TrailField;
use crate::pgm::GreyImage;

/// Maps the field linearly onto 0..=255 by its own maximum (an all-zero field
/// renders black). With `invert`, high concentration renders dark.
pub fn render_frame(trail: &TrailField, invert: bool) -> GreyImage {
    let max = trail.max_value();
    let scale = if max > 0.0 { 255.0 / max } else { 0.0 };
    let pixels = trail
        .values()
        .iter()
        .map(|v| {
            let p = (v * scale).round().clamp(0.0, 255.0) as u8;
            if invert {
                255 - p
            } else {
                p
            }
        })
        .collect();
    GreyImage::new(trail.width(), trail.height(), pixels)
}
