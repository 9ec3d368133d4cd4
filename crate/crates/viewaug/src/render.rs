//! Volume-rendering compositor, the MSE photometric loss, and image/depth
//! quality metrics (PSNR, SSIM, ABSREL, RMSE), plus the on-disk image and
//! depth formats.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::math::Rgb;

/// One sample along a ray: parameter, opacity, color.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplePoint {
    pub t: f64,
    pub alpha: f64,
    pub color: Rgb,
}

/// Front-to-back alpha compositing. With transmittance `T_1 = 1` and
/// `T_{i+1} = T_i·(1 − α_i)`, the composed color is `Σ T_i·α_i·c_i`;
/// the per-sample transmittances are returned alongside it.
///
/// Errors when `t` is not strictly increasing or an alpha leaves `[0, 1]`.
pub fn composite(samples: &[SamplePoint]) -> Result<(Rgb, Vec<f64>)> {
    let mut transmittances = Vec::with_capacity(samples.len());
    let mut color = Rgb::BLACK;
    let mut t_acc = 1.0;
    let mut prev_t = f64::NEG_INFINITY;
    for s in samples {
        if !(s.t > prev_t) {
            return Err(Error::invalid(format!(
                "sample parameters must strictly increase ({} after {})",
                s.t, prev_t
            )));
        }
        prev_t = s.t;
        if !(0.0..=1.0).contains(&s.alpha) {
            return Err(Error::invalid(format!("alpha {} outside [0, 1]", s.alpha)));
        }
        transmittances.push(t_acc);
        color = color + s.color * (t_acc * s.alpha);
        t_acc *= 1.0 - s.alpha;
    }
    Ok((color, transmittances))
}

/// Row-major linear-RGB raster.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    pub width: usize,
    pub height: usize,
    pixels: Vec<Rgb>,
}

impl ImageBuffer {
    pub fn new_filled(width: usize, height: usize, fill: Rgb) -> Self {
        ImageBuffer { width, height, pixels: vec![fill; width * height] }
    }

    pub fn from_pixels(width: usize, height: usize, pixels: Vec<Rgb>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::invalid("pixel count does not match dimensions"));
        }
        if pixels.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("non-finite pixel"));
        }
        Ok(ImageBuffer { width, height, pixels })
    }

    pub fn pixel(&self, x: usize, y: usize) -> Rgb {
        self.pixels[y * self.width + x]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, c: Rgb) {
        self.pixels[y * self.width + x] = c;
    }

    pub fn pixels(&self) -> &[Rgb] {
        &self.pixels
    }

    /// Bilinear lookup at a continuous pixel coordinate (integer-center
    /// convention), clamped at the borders.
    pub fn sample_bilinear(&self, px: f64, py: f64) -> Rgb {
        let x = px.clamp(0.0, (self.width - 1) as f64);
        let y = py.clamp(0.0, (self.height - 1) as f64);
        let x0 = (x.floor() as usize).min(self.width - 1);
        let y0 = (y.floor() as usize).min(self.height - 1);
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let (tx, ty) = (x - x0 as f64, y - y0 as f64);
        let top = self.pixel(x0, y0) * (1.0 - tx) + self.pixel(x1, y0) * tx;
        let bottom = self.pixel(x0, y1) * (1.0 - tx) + self.pixel(x1, y1) * tx;
        top * (1.0 - ty) + bottom * ty
    }

    /// 8-bit binary PPM (P6); linear values scaled by 255 and rounded.
    pub fn to_ppm_bytes(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        for p in &self.pixels {
            let c = p.clamped();
            out.push((c.r * 255.0).round() as u8);
            out.push((c.g * 255.0).round() as u8);
            out.push((c.b * 255.0).round() as u8);
        }
        out
    }

    pub fn write_ppm(&self, path: &Path) -> Result<()> {
        std::fs::File::create(path)?.write_all(&self.to_ppm_bytes())?;
        Ok(())
    }

    /// Raw float format: text header `rgbf32 <width> <height>` then
    /// little-endian f32 triples, row-major.
    pub fn write_rawf32(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        writeln!(f, "rgbf32 {} {}", self.width, self.height)?;
        let mut bytes = Vec::with_capacity(self.pixels.len() * 12);
        for p in &self.pixels {
            for ch in [p.r, p.g, p.b] {
                bytes.extend_from_slice(&(ch as f32).to_le_bytes());
            }
        }
        f.write_all(&bytes)?;
        Ok(())
    }

    pub fn read_rawf32(path: &Path) -> Result<Self> {
        let data = std::fs::read(path)?;
        let err = |msg: &str| Error::DataFormat {
            path: path.display().to_string(),
            msg: msg.to_string(),
        };
        let nl = data
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| err("missing header"))?;
        let header = std::str::from_utf8(&data[..nl]).map_err(|_| err("bad header"))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 3 || parts[0] != "rgbf32" {
            return Err(err("expected `rgbf32 w h` header"));
        }
        let width: usize = parts[1].parse().map_err(|_| err("bad width"))?;
        let height: usize = parts[2].parse().map_err(|_| err("bad height"))?;
        let body = &data[nl + 1..];
        if body.len() != width * height * 12 {
            return Err(err("pixel block has wrong size"));
        }
        let pixels = body
            .chunks_exact(12)
            .map(|c| {
                Rgb::new(
                    f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64,
                    f32::from_le_bytes([c[4], c[5], c[6], c[7]]) as f64,
                    f32::from_le_bytes([c[8], c[9], c[10], c[11]]) as f64,
                )
            })
            .collect();
        ImageBuffer::from_pixels(width, height, pixels)
    }
}

/// Row-major depth raster; invalid pixels carry NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub width: usize,
    pub height: usize,
    depths: Vec<f64>,
}

impl DepthMap {
    pub const INVALID: f64 = f64::NAN;

    pub fn new_invalid(width: usize, height: usize) -> Self {
        DepthMap { width, height, depths: vec![f64::NAN; width * height] }
    }

    pub fn from_depths(width: usize, height: usize, depths: Vec<f64>) -> Result<Self> {
        if depths.len() != width * height {
            return Err(Error::invalid("depth count does not match dimensions"));
        }
        if depths.iter().any(|d| !d.is_nan() && !(d.is_finite() && *d > 0.0)) {
            return Err(Error::invalid("valid depths must be positive and finite"));
        }
        Ok(DepthMap { width, height, depths })
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.depths[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, d: f64) {
        self.depths[y * self.width + x] = d;
    }

    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        !self.get(x, y).is_nan()
    }

    pub fn depths(&self) -> &[f64] {
        &self.depths
    }

    /// Raw float format: text header `depthf32 <width> <height> nan` then
    /// little-endian f32 values, NaN marking invalid pixels.
    pub fn write_raw(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        writeln!(f, "depthf32 {} {} nan", self.width, self.height)?;
        let mut bytes = Vec::with_capacity(self.depths.len() * 4);
        for d in &self.depths {
            bytes.extend_from_slice(&(*d as f32).to_le_bytes());
        }
        f.write_all(&bytes)?;
        Ok(())
    }

    pub fn read_raw(path: &Path) -> Result<Self> {
        let data = std::fs::read(path)?;
        let err = |msg: &str| Error::DataFormat {
            path: path.display().to_string(),
            msg: msg.to_string(),
        };
        let nl = data
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| err("missing header"))?;
        let header = std::str::from_utf8(&data[..nl]).map_err(|_| err("bad header"))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 4 || parts[0] != "depthf32" || parts[3] != "nan" {
            return Err(err("expected `depthf32 w h nan` header"));
        }
        let width: usize = parts[1].parse().map_err(|_| err("bad width"))?;
        let height: usize = parts[2].parse().map_err(|_| err("bad height"))?;
        let body = &data[nl + 1..];
        if body.len() != width * height * 4 {
            return Err(err("depth block has wrong size"));
        }
        let depths = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        DepthMap::from_depths(width, height, depths)
    }
}

fn check_dims(
    aw: usize,
    ah: usize,
    bw: usize,
    bh: usize,
) -> Result<()> {
    if aw != bw || ah != bh {
        return Err(Error::DimensionMismatch(aw, ah, bw, bh));
    }
    Ok(())
}

/// Mean squared error over pixels and channels. (Reported as a mean rather
/// than a sum so values are resolution-independent.)
pub fn mse_loss(predicted: &ImageBuffer, truth: &ImageBuffer) -> Result<f64> {
    check_dims(predicted.width, predicted.height, truth.width, truth.height)?;
    let mut acc = 0.0;
    for (p, t) in predicted.pixels.iter().zip(&truth.pixels) {
        let d = *p - *t;
        acc += d.r * d.r + d.g * d.g + d.b * d.b;
    }
    Ok(acc / (3.0 * predicted.pixels.len() as f64))
}

/// Peak signal-to-noise ratio in dB for unit dynamic range; identical
/// buffers give `f64::INFINITY`.
pub fn psnr(predicted: &ImageBuffer, truth: &ImageBuffer) -> Result<f64> {
    let mse = mse_loss(predicted, truth)?;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (1.0 / mse).log10())
}

/// Gaussian window used by SSIM: 11×11, σ = 1.5, normalized to sum 1.
fn ssim_window() -> [f64; 121] {
    let mut w = [0.0; 121];
    let sigma = 1.5;
    let mut sum = 0.0;
    for dy in 0..11usize {
        for dx in 0..11usize {
            let fx = dx as f64 - 5.0;
            let fy = dy as f64 - 5.0;
            let v = (-(fx * fx + fy * fy) / (2.0 * sigma * sigma)).exp();
            w[dy * 11 + dx] = v;
            sum += v;
        }
    }
    for v in &mut w {
        *v /= sum;
    }
    w
}

/// Mean SSIM on Rec. 709 luma with an 11×11 Gaussian window (σ = 1.5) and
/// the unit-dynamic-range constants C1 = 0.01², C2 = 0.03². Windows are
/// evaluated only where they fit entirely inside the image.
pub fn ssim(predicted: &ImageBuffer, truth: &ImageBuffer) -> Result<f64> {
    check_dims(predicted.width, predicted.height, truth.width, truth.height)?;
    let (w, h) = (predicted.width, predicted.height);
    if w.min(h) < 11 {
        return Err(Error::invalid("ssim needs images at least 11x11"));
    }
    let luma_a: Vec<f64> = predicted.pixels.iter().map(|p| p.luma()).collect();
    let luma_b: Vec<f64> = truth.pixels.iter().map(|p| p.luma()).collect();
    let win = ssim_window();
    let c1 = 0.01f64 * 0.01;
    let c2 = 0.03f64 * 0.03;

    let mut acc = 0.0;
    let mut count = 0usize;
    for wy in 0..=(h - 11) {
        for wx in 0..=(w - 11) {
            // Weighted moments in computational form (E[x²] − μ²).
            let (mut mx, mut my, mut mxx, mut myy, mut mxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for dy in 0..11 {
                let row = (wy + dy) * w + wx;
                for dx in 0..11 {
                    let wt = win[dy * 11 + dx];
                    let a = luma_a[row + dx];
                    let b = luma_b[row + dx];
                    mx += wt * a;
                    my += wt * b;
                    mxx += wt * a * a;
                    myy += wt * b * b;
                    mxy += wt * a * b;
                }
            }
            let vx = mxx - mx * mx;
            let vy = myy - my * my;
            let cv = mxy - mx * my;
            let s = ((2.0 * mx * my + c1) * (2.0 * cv + c2))
                / ((mx * mx + my * my + c1) * (vx + vy + c2));
            acc += s;
            count += 1;
        }
    }
    Ok(acc / count as f64)
}

/// Depth accuracy over pixels valid in both maps: mean absolute relative
/// error and root mean squared error.
pub fn depth_metrics(predicted: &DepthMap, truth: &DepthMap) -> Result<(f64, f64)> {
    check_dims(predicted.width, predicted.height, truth.width, truth.height)?;
    let mut absrel = 0.0;
    let mut sq = 0.0;
    let mut count = 0usize;
    for (p, t) in predicted.depths.iter().zip(&truth.depths) {
        if p.is_nan() || t.is_nan() {
            continue;
        }
        absrel += (p - t).abs() / t;
        sq += (p - t) * (p - t);
        count += 1;
    }
    if count == 0 {
        return Err(Error::EmptyOverlap);
    }
    Ok((absrel / count as f64, (sq / count as f64).sqrt()))
}
