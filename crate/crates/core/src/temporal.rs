//! Backward warping and the warped-error temporal metrics.
//!
//! `warp` resamples the previous frame at flow-displaced coordinates so it
//! aligns with the current frame; the per-pair temporal loss is the mean
//! squared residual between the current frame and that warped previous frame
//! over pixels where the flow is valid and the sample stays in bounds. The
//! sequence-level temporal error is the unweighted mean of the pair losses.

use crate::flow::FlowField;
use crate::raster::Image;
use crate::{Error, Result};

/// Bilinear sample of channel `c` at continuous coordinates, `None` outside
/// the image. Integer coordinates return the pixel value exactly.
pub fn bilinear_sample(image: &Image, x: f64, y: f64, c: usize) -> Option<f64> {
    let (w, h) = (image.width(), image.height());
    if !x.is_finite() || !y.is_finite() {
        return None;
    }
    if x < 0.0 || y < 0.0 || x > (w - 1) as f64 || y > (h - 1) as f64 {
        return None;
    }
    let fx = x - x.floor();
    let fy = y - y.floor();
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = if fx == 0.0 { x0 } else { x0 + 1 };
    let y1 = if fy == 0.0 { y0 } else { y0 + 1 };
    let top = (1.0 - fx) * image.get(x0, y0, c) + fx * image.get(x1, y0, c);
    let bottom = (1.0 - fx) * image.get(x0, y1, c) + fx * image.get(x1, y1, c);
    Some((1.0 - fy) * top + fy * bottom)
}

/// Warps the previous frame toward the current one: output pixel `(x, y)`
/// is `image_tm1` sampled at `(x - W.x, y - W.y)`.
///
/// Returns the warped image and a per-pixel validity mask (flow valid and
/// sample in bounds). Invalid pixels are black.
pub fn warp(image_tm1: &Image, flow: &FlowField) -> Result<(Image, Vec<bool>)> {
    if image_tm1.width() != flow.width || image_tm1.height() != flow.height {
        return Err(Error::DimensionMismatch(format!(
            "image is {}x{}, flow is {}x{}",
            image_tm1.width(),
            image_tm1.height(),
            flow.width,
            flow.height
        )));
    }
    let mut out = Image::new(flow.width, flow.height, image_tm1.channels());
    let mut validity = vec![false; flow.width * flow.height];
    for y in 0..flow.height {
        for x in 0..flow.width {
            if !flow.valid_at(x, y) {
                continue;
            }
            let v = flow.vector_at(x, y);
            let sx = x as f64 - v.x;
            let sy = y as f64 - v.y;
            if bilinear_sample(image_tm1, sx, sy, 0).is_none() {
                continue;
            }
            for c in 0..image_tm1.channels() {
                let sample = bilinear_sample(image_tm1, sx, sy, c)
                    .expect("bounds already checked on channel 0");
                out.set(x, y, c, sample);
            }
            validity[y * flow.width + x] = true;
        }
    }
    Ok((out, validity))
}

/// One frame pair's temporal loss with its valid-pixel count. A pair with
/// zero valid pixels has loss 0; the count is the degeneracy flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairLoss {
    pub value: f64,
    pub valid_count: usize,
}

/// Mean squared residual between `y_t` and the flow-warped `y_tm1`, over
/// valid pixels and channels.
pub fn temporal_loss(y_t: &Image, y_tm1: &Image, flow: &FlowField) -> Result<PairLoss> {
    if !y_t.same_shape(y_tm1) {
        return Err(Error::DimensionMismatch(format!(
            "frames differ: {}x{}x{} vs {}x{}x{}",
            y_t.width(),
            y_t.height(),
            y_t.channels(),
            y_tm1.width(),
            y_tm1.height(),
            y_tm1.channels()
        )));
    }
    let (warped, validity) = warp(y_tm1, flow)?;
    if y_t.width() != warped.width() || y_t.height() != warped.height() {
        return Err(Error::DimensionMismatch(
            "frame and flow field sizes differ".into(),
        ));
    }
    let mut sum = 0.0;
    let mut valid_count = 0usize;
    for y in 0..y_t.height() {
        for x in 0..y_t.width() {
            if !validity[y * y_t.width() + x] {
                continue;
            }
            valid_count += 1;
            for c in 0..y_t.channels() {
                let r = y_t.get(x, y, c) - warped.get(x, y, c);
                sum += r * r;
            }
        }
    }
    let value = if valid_count == 0 {
        0.0
    } else {
        sum / (valid_count * y_t.channels()) as f64
    };
    Ok(PairLoss { value, valid_count })
}

/// Per-pair losses for a frame sequence. `flows[k]` is the field from frame
/// `k+1` back to frame `k`, so there must be exactly `frames.len() - 1`.
pub fn pairwise_losses(frames: &[Image], flows: &[FlowField]) -> Result<Vec<PairLoss>> {
    if frames.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 frames, got {}",
            frames.len()
        )));
    }
    if flows.len() != frames.len() - 1 {
        return Err(Error::DimensionMismatch(format!(
            "{} frames need {} flow fields, got {}",
            frames.len(),
            frames.len() - 1,
            flows.len()
        )));
    }
    (0..flows.len())
        .map(|k| temporal_loss(&frames[k + 1], &frames[k], &flows[k]))
        .collect()
}

/// Sequence-level temporal error: the unweighted mean of the pair losses.
pub fn temporal_error(frames: &[Image], flows: &[FlowField]) -> Result<f64> {
    let pairs = pairwise_losses(frames, flows)?;
    Ok(pairs.iter().map(|p| p.value).sum::<f64>() / pairs.len() as f64)
}

/// Mean absolute per-pixel, per-channel difference between two images.
pub fn photometric_error(output: &Image, ground_truth: &Image) -> Result<f64> {
    if !output.same_shape(ground_truth) {
        return Err(Error::DimensionMismatch(format!(
            "images differ: {}x{}x{} vs {}x{}x{}",
            output.width(),
            output.height(),
            output.channels(),
            ground_truth.width(),
            ground_truth.height(),
            ground_truth.channels()
        )));
    }
    let n = output.data().len();
    if n == 0 {
        return Ok(0.0);
    }
    let sum: f64 = output
        .data()
        .iter()
        .zip(ground_truth.data())
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok(sum / n as f64)
}

/// Line-oriented metric records: one `pair=<k> valid=<count> l_tmp=<float>`
/// line per pair and a final `e_tmp=<float>`.
pub fn format_report(pairs: &[PairLoss]) -> String {
    let mut out = String::new();
    for (k, p) in pairs.iter().enumerate() {
        out.push_str(&format!("pair={} valid={} l_tmp={}\n", k, p.valid_count, p.value));
    }
    let e_tmp = if pairs.is_empty() {
        0.0
    } else {
        pairs.iter().map(|p| p.value).sum::<f64>() / pairs.len() as f64
    };
    out.push_str(&format!("e_tmp={e_tmp}\n"));
    out
}
