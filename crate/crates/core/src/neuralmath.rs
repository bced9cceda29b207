//! Pure-math realizations of adaptive instance normalization, the masked
//! bidirectional normalization layer built on it, and the loss algebra, all
//! on dense feature maps with no network attached.
//!
//! Statistics are per channel over all spatial positions, population
//! variant, with an additive epsilon in the denominator so identically-zero
//! masked regions stay finite.

use crate::raster::Image;
use crate::{Error, Result};

/// Default denominator epsilon for [`adain`] and [`bsn`].
pub const DEFAULT_EPS: f64 = 1e-5;

/// Dense `H x W x C` feature map, stored row-major with interleaved
/// channels: `data[(y * width + x) * channels + c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(height: usize, width: usize, channels: usize) -> Self {
        Self {
            height,
            width,
            channels,
            data: vec![0.0; height * width * channels],
        }
    }

    pub fn from_data(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width * channels {
            return Err(Error::DimensionMismatch(format!(
                "feature payload has {} values, expected {}x{}x{}",
                data.len(),
                height,
                width,
                channels
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "feature map contains non-finite values".into(),
            ));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, value: f64) {
        self.data[(y * self.width + x) * self.channels + c] = value;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn same_shape(&self, other: &FeatureMap) -> bool {
        self.height == other.height
            && self.width == other.width
            && self.channels == other.channels
    }

    fn spatial_len(&self) -> usize {
        self.height * self.width
    }

    /// Per-channel population mean and standard deviation over all spatial
    /// positions.
    pub fn channel_stats(&self, c: usize) -> (f64, f64) {
        let n = self.spatial_len() as f64;
        let mut mean = 0.0;
        for y in 0..self.height {
            for x in 0..self.width {
                mean += self.get(x, y, c);
            }
        }
        mean /= n;
        let mut var = 0.0;
        for y in 0..self.height {
            for x in 0..self.width {
                let d = self.get(x, y, c) - mean;
                var += d * d;
            }
        }
        (mean, (var / n).sqrt())
    }

    /// Elementwise product with a mask broadcast over channels.
    fn masked(&self, mask: &SoftMask) -> FeatureMap {
        let mut out = self.clone();
        for y in 0..self.height {
            for x in 0..self.width {
                let m = mask.get(x, y);
                for c in 0..self.channels {
                    out.set(x, y, c, self.get(x, y, c) * m);
                }
            }
        }
        out
    }
}

/// `H x W` mask with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftMask {
    pub height: usize,
    pub width: usize,
    data: Vec<f64>,
}

impl SoftMask {
    pub fn from_data(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::DimensionMismatch(format!(
                "mask payload has {} values, expected {}x{}",
                data.len(),
                height,
                width
            )));
        }
        if data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument("mask values must lie in [0,1]".into()));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn constant(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::from_data(height, width, vec![value; height * width])
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// The complement mask `1 - m`.
    pub fn complement(&self) -> SoftMask {
        SoftMask {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|v| 1.0 - v).collect(),
        }
    }
}

/// Per-channel blend parameters of [`bsn`], each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BsnParams {
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

impl BsnParams {
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        if alpha.len() != beta.len() {
            return Err(Error::DimensionMismatch(format!(
                "alpha has {} channels, beta has {}",
                alpha.len(),
                beta.len()
            )));
        }
        for v in alpha.iter().chain(beta.iter()) {
            if !(0.0..=1.0).contains(v) {
                return Err(Error::InvalidArgument(format!(
                    "blend parameters must lie in [0,1], got {v}"
                )));
            }
        }
        Ok(Self { alpha, beta })
    }

    /// Uniform parameters across `channels`.
    pub fn uniform(channels: usize, alpha: f64, beta: f64) -> Result<Self> {
        Self::new(vec![alpha; channels], vec![beta; channels])
    }

    /// The standard initialization: alpha 0.8, beta 0.1 on every channel.
    pub fn default_init(channels: usize) -> Self {
        Self::uniform(channels, 0.8, 0.1).expect("0.8/0.1 are in range")
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }
}

/// Weights of the combined training objective. `Default` gives the standard
/// setting (10, 1, 10, 5).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub w_adv: f64,
    pub w_app: f64,
    pub w_rec: f64,
    pub w_tmp: f64,
}

impl LossWeights {
    pub fn new(w_adv: f64, w_app: f64, w_rec: f64, w_tmp: f64) -> Result<Self> {
        for w in [w_adv, w_app, w_rec, w_tmp] {
            if w < 0.0 || !w.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "loss weights must be nonnegative and finite, got {w}"
                )));
            }
        }
        Ok(Self {
            w_adv,
            w_app,
            w_rec,
            w_tmp,
        })
    }
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            w_adv: 10.0,
            w_app: 1.0,
            w_rec: 10.0,
            w_tmp: 5.0,
        }
    }
}

/// Adaptive instance normalization: re-standardize `a` per channel and
/// impose `b`'s per-channel mean and standard deviation:
/// `sigma(B) * (A - mu(A)) / (sigma(A) + eps) + mu(B)`.
///
/// Spatial sizes may differ; channel counts must match. Output has `a`'s
/// shape.
pub fn adain(a: &FeatureMap, b: &FeatureMap, eps: f64) -> Result<FeatureMap> {
    if a.channels != b.channels {
        return Err(Error::DimensionMismatch(format!(
            "channel counts differ: {} vs {}",
            a.channels, b.channels
        )));
    }
    let mut out = FeatureMap::new(a.height, a.width, a.channels);
    for c in 0..a.channels {
        let (mu_a, sigma_a) = a.channel_stats(c);
        let (mu_b, sigma_b) = b.channel_stats(c);
        let gain = sigma_b / (sigma_a + eps);
        for y in 0..a.height {
            for x in 0..a.width {
                out.set(x, y, c, gain * (a.get(x, y, c) - mu_a) + mu_b);
            }
        }
    }
    Ok(out)
}

/// Masked bidirectional normalization:
///
/// `alpha*T(X.H, Q.Hbar) + beta*T(X.Hbar, Q.H) + (1-alpha)*X.H + (1-beta)*X.Hbar`
///
/// where `T` is [`adain`], `H` the facial soft mask, `Hbar = 1 - H`, and
/// `alpha`/`beta` broadcast per channel. With `alpha = beta = 0` this is the
/// identity on `x` for any mask.
pub fn bsn(
    x: &FeatureMap,
    q: &FeatureMap,
    h: &SoftMask,
    params: &BsnParams,
    eps: f64,
) -> Result<FeatureMap> {
    if !x.same_shape(q) {
        return Err(Error::DimensionMismatch(format!(
            "x is {}x{}x{}, q is {}x{}x{}",
            x.height, x.width, x.channels, q.height, q.width, q.channels
        )));
    }
    if h.height != x.height || h.width != x.width {
        return Err(Error::DimensionMismatch(format!(
            "mask is {}x{}, features are {}x{}",
            h.height, h.width, x.height, x.width
        )));
    }
    if params.alpha.len() != x.channels {
        return Err(Error::DimensionMismatch(format!(
            "params cover {} channels, features have {}",
            params.alpha.len(),
            x.channels
        )));
    }
    let h_bar = h.complement();
    let x_h = x.masked(h);
    let x_hbar = x.masked(&h_bar);
    let q_h = q.masked(h);
    let q_hbar = q.masked(&h_bar);

    let transfer_face = adain(&x_h, &q_hbar, eps)?;
    let transfer_bg = adain(&x_hbar, &q_h, eps)?;

    let mut out = FeatureMap::new(x.height, x.width, x.channels);
    for c in 0..x.channels {
        let (alpha, beta) = (params.alpha[c], params.beta[c]);
        for y in 0..x.height {
            for x_pos in 0..x.width {
                let v = alpha * transfer_face.get(x_pos, y, c)
                    + beta * transfer_bg.get(x_pos, y, c)
                    + (1.0 - alpha) * x_h.get(x_pos, y, c)
                    + (1.0 - beta) * x_hbar.get(x_pos, y, c);
                out.set(x_pos, y, c, v);
            }
        }
    }
    Ok(out)
}

/// Area-average downsampling of a binary (or soft) single-channel mask.
/// The target must not exceed the source in either dimension; each target
/// cell averages the exact fractional-area box it covers.
pub fn downsample_mask(mask: &Image, target_h: usize, target_w: usize) -> Result<SoftMask> {
    if mask.channels() != 1 {
        return Err(Error::DimensionMismatch(format!(
            "mask must be single-channel, has {}",
            mask.channels()
        )));
    }
    if target_h == 0 || target_w == 0 {
        return Err(Error::InvalidArgument("target size must be positive".into()));
    }
    if target_h > mask.height() || target_w > mask.width() {
        return Err(Error::InvalidArgument(format!(
            "cannot upscale {}x{} mask to {}x{}",
            mask.width(),
            mask.height(),
            target_w,
            target_h
        )));
    }
    let sx = mask.width() as f64 / target_w as f64;
    let sy = mask.height() as f64 / target_h as f64;
    let mut data = Vec::with_capacity(target_h * target_w);
    for ty in 0..target_h {
        let y_lo = ty as f64 * sy;
        let y_hi = (ty + 1) as f64 * sy;
        for tx in 0..target_w {
            let x_lo = tx as f64 * sx;
            let x_hi = (tx + 1) as f64 * sx;
            let mut acc = 0.0;
            let mut sy_px = y_lo.floor() as usize;
            while (sy_px as f64) < y_hi {
                let wy = (y_hi.min((sy_px + 1) as f64) - y_lo.max(sy_px as f64)).max(0.0);
                let mut sx_px = x_lo.floor() as usize;
                while (sx_px as f64) < x_hi {
                    let wx = (x_hi.min((sx_px + 1) as f64) - x_lo.max(sx_px as f64)).max(0.0);
                    acc += mask.get(sx_px.min(mask.width() - 1), sy_px.min(mask.height() - 1), 0)
                        * wx
                        * wy;
                    sx_px += 1;
                }
                sy_px += 1;
            }
            data.push((acc / (sx * sy)).clamp(0.0, 1.0));
        }
    }
    SoftMask::from_data(target_h, target_w, data)
}

/// Corner-aligned bilinear upsampling of a feature map. The target must be
/// at least as large as the source in both dimensions.
pub fn upsample_embedding(p: &FeatureMap, target_h: usize, target_w: usize) -> Result<FeatureMap> {
    if target_h < p.height || target_w < p.width {
        return Err(Error::InvalidArgument(format!(
            "cannot downscale {}x{} embedding to {}x{}",
            p.width, p.height, target_w, target_h
        )));
    }
    let scale_y = if target_h > 1 && p.height > 1 {
        (p.height - 1) as f64 / (target_h - 1) as f64
    } else {
        0.0
    };
    let scale_x = if target_w > 1 && p.width > 1 {
        (p.width - 1) as f64 / (target_w - 1) as f64
    } else {
        0.0
    };
    let mut out = FeatureMap::new(target_h, target_w, p.channels);
    for ty in 0..target_h {
        let sy = ty as f64 * scale_y;
        let fy = sy - sy.floor();
        let y0 = sy.floor() as usize;
        let y1 = if fy == 0.0 { y0 } else { y0 + 1 };
        for tx in 0..target_w {
            let sx = tx as f64 * scale_x;
            let fx = sx - sx.floor();
            let x0 = sx.floor() as usize;
            let x1 = if fx == 0.0 { x0 } else { x0 + 1 };
            for c in 0..p.channels {
                let top = (1.0 - fx) * p.get(x0, y0, c) + fx * p.get(x1, y0, c);
                let bottom = (1.0 - fx) * p.get(x0, y1, c) + fx * p.get(x1, y1, c);
                out.set(tx, ty, c, (1.0 - fy) * top + fy * bottom);
            }
        }
    }
    Ok(out)
}

/// Mean absolute difference between two equally-shaped feature maps.
pub fn appearance_loss(e_y: &FeatureMap, e_xp: &FeatureMap) -> Result<f64> {
    if !e_y.same_shape(e_xp) {
        return Err(Error::DimensionMismatch(format!(
            "embeddings differ: {}x{}x{} vs {}x{}x{}",
            e_y.height, e_y.width, e_y.channels, e_xp.height, e_xp.width, e_xp.channels
        )));
    }
    let n = e_y.data.len();
    if n == 0 {
        return Ok(0.0);
    }
    let sum: f64 = e_y
        .data
        .iter()
        .zip(&e_xp.data)
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok(sum / n as f64)
}

/// Whether a training tuple came from the video or the image branch.
/// Image-branch tuples have no reconstruction ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReconstructionMode {
    Video,
    Image,
}

/// Mean absolute difference in video mode; fixed 0 in image mode (no ground
/// truth exists there).
pub fn reconstruction_loss(y: &Image, x_i: &Image, mode: ReconstructionMode) -> Result<f64> {
    match mode {
        ReconstructionMode::Image => Ok(0.0),
        ReconstructionMode::Video => {
            if !y.same_shape(x_i) {
                return Err(Error::DimensionMismatch(format!(
                    "images differ: {}x{}x{} vs {}x{}x{}",
                    y.width(),
                    y.height(),
                    y.channels(),
                    x_i.width(),
                    x_i.height(),
                    x_i.channels()
                )));
            }
            let n = y.data().len();
            if n == 0 {
                return Ok(0.0);
            }
            let sum: f64 = y
                .data()
                .iter()
                .zip(x_i.data())
                .map(|(a, b)| (a - b).abs())
                .sum();
            Ok(sum / n as f64)
        }
    }
}

/// Adversarial loss shape: hinge margins on raw scores, or log-likelihood on
/// scores interpreted as probabilities in (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdversarialForm {
    Hinge,
    Log,
}

fn map_mean(m: &FeatureMap, f: impl Fn(f64) -> f64) -> f64 {
    if m.data.is_empty() {
        return 0.0;
    }
    m.data.iter().map(|&v| f(v)).sum::<f64>() / m.data.len() as f64
}

/// Multi-scale adversarial losses averaged over the scale pyramids.
///
/// Hinge form: `d = mean(max(0, 1-real)) + mean(max(0, 1+fake))`,
/// `g = -mean(fake)`. Log form: the negative log-likelihood pair, requiring
/// every score in (0, 1).
pub fn adversarial_loss(
    real_scores: &[FeatureMap],
    fake_scores: &[FeatureMap],
    form: AdversarialForm,
) -> Result<(f64, f64)> {
    if real_scores.is_empty() || fake_scores.is_empty() {
        return Err(Error::InvalidArgument("score lists must be nonempty".into()));
    }
    if real_scores.len() != fake_scores.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} real scales vs {} fake scales",
            real_scores.len(),
            fake_scores.len()
        )));
    }
    if form == AdversarialForm::Log {
        for m in real_scores.iter().chain(fake_scores) {
            if m.data.iter().any(|&v| v <= 0.0 || v >= 1.0) {
                return Err(Error::InvalidArgument(
                    "log-form scores must lie strictly inside (0, 1)".into(),
                ));
            }
        }
    }
    let k = real_scores.len() as f64;
    let mut d_total = 0.0;
    let mut g_total = 0.0;
    for (real, fake) in real_scores.iter().zip(fake_scores) {
        match form {
            AdversarialForm::Hinge => {
                d_total += map_mean(real, |v| (1.0 - v).max(0.0))
                    + map_mean(fake, |v| (1.0 + v).max(0.0));
                g_total += -map_mean(fake, |v| v);
            }
            AdversarialForm::Log => {
                d_total += -(map_mean(real, f64::ln) + map_mean(fake, |v| (1.0 - v).ln()));
                g_total += -map_mean(fake, f64::ln);
            }
        }
    }
    Ok((d_total / k, g_total / k))
}

/// Weighted sum of the four loss components.
pub fn total_loss(adv: f64, app: f64, rec: f64, tmp: f64, w: &LossWeights) -> f64 {
    w.w_adv * adv + w.w_app * app + w.w_rec * rec + w.w_tmp * tmp
}
