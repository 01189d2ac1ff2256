//! Raster ingestion, bilinear resizing and the twelve color-plane transforms.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use image::{ColorType, DynamicImage, ImageFormat, ImageReader};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Working resolution every pallor-site image is brought to before processing.
pub const WORKING_SIZE: usize = 125;

/// Row-major scalar field without range restrictions (gradients, angles, labels as f64).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Grid {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidDimensions { width, height });
        }
        if data.len() != width * height {
            return Err(Error::InvalidRaster(format!(
                "expected {} values, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Sample with coordinates clamped to the image domain (replicate border).
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f64 {
        let cx = x.clamp(0, self.width as isize - 1) as usize;
        let cy = y.clamp(0, self.height as isize - 1) as usize;
        self.data[cy * self.width + cx]
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Three-channel RGB raster with interleaved samples in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl RasterImage {
    pub const CHANNELS: usize = 3;

    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidDimensions { width, height });
        }
        if data.len() != width * height * Self::CHANNELS {
            return Err(Error::InvalidRaster(format!(
                "expected {} samples, got {}",
                width * height * Self::CHANNELS,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidRaster(format!("sample {v} outside [0,1]")));
        }
        Ok(Self { width, height, data })
    }

    /// Builds a raster from 8-bit interleaved RGB bytes.
    pub fn from_rgb8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        let data = bytes.iter().map(|&b| f64::from(b) / 255.0).collect();
        Self::new(width, height, data)
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [f64; 3]) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend(f(x, y).iter().map(|v| v.clamp(0.0, 1.0)));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Quantizes to 8-bit RGB (rounding to nearest).
    pub fn to_rgb8(&self) -> Vec<u8> {
        self.data.iter().map(|v| (v * 255.0).round() as u8).collect()
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        image::save_buffer_with_format(
            path,
            &self.to_rgb8(),
            self.width as u32,
            self.height as u32,
            ColorType::Rgb8,
            ImageFormat::Png,
        )
        .map_err(|e| Error::UnreadableFile {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }
}

/// The twelve color planes derived from an RGB raster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlaneId {
    Red,
    Green,
    Blue,
    Hue,
    Saturation,
    Intensity,
    Lightness,
    AColor,
    BColor,
    Luminance,
    ChromaCb,
    ChromaCr,
}

impl PlaneId {
    pub const ALL: [PlaneId; 12] = [
        PlaneId::Red,
        PlaneId::Green,
        PlaneId::Blue,
        PlaneId::Hue,
        PlaneId::Saturation,
        PlaneId::Intensity,
        PlaneId::Lightness,
        PlaneId::AColor,
        PlaneId::BColor,
        PlaneId::Luminance,
        PlaneId::ChromaCb,
        PlaneId::ChromaCr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PlaneId::Red => "red",
            PlaneId::Green => "green",
            PlaneId::Blue => "blue",
            PlaneId::Hue => "hue",
            PlaneId::Saturation => "saturation",
            PlaneId::Intensity => "intensity",
            PlaneId::Lightness => "lightness",
            PlaneId::AColor => "a_color",
            PlaneId::BColor => "b_color",
            PlaneId::Luminance => "luminance",
            PlaneId::ChromaCb => "chroma_cb",
            PlaneId::ChromaCr => "chroma_cr",
        }
    }

    /// Value of this plane for a single RGB triple.
    pub fn transform(self, rgb: [f64; 3]) -> f64 {
        let [r, g, b] = rgb;
        let v = match self {
            PlaneId::Red => r,
            PlaneId::Green => g,
            PlaneId::Blue => b,
            PlaneId::Hue => hsv(rgb)[0],
            PlaneId::Saturation => hsv(rgb)[1],
            PlaneId::Intensity => hsv(rgb)[2],
            PlaneId::Lightness => lab(rgb)[0] / 100.0,
            PlaneId::AColor => (lab(rgb)[1] + 128.0) / 255.0,
            PlaneId::BColor => (lab(rgb)[2] + 128.0) / 255.0,
            PlaneId::Luminance => ycbcr(rgb)[0],
            PlaneId::ChromaCb => ycbcr(rgb)[1],
            PlaneId::ChromaCr => ycbcr(rgb)[2],
        };
        v.clamp(0.0, 1.0)
    }
}

impl fmt::Display for PlaneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PlaneId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PlaneId::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown plane {s:?}")))
    }
}

/// HSV with hue scaled to `[0, 1)`. Achromatic pixels get hue 0.
pub fn hsv([r, g, b]: [f64; 3]) -> [f64; 3] {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    let h = if delta <= 0.0 {
        0.0
    } else {
        let sector = if max == r {
            ((g - b) / delta).rem_euclid(6.0)
        } else if max == g {
            (b - r) / delta + 2.0
        } else {
            (r - g) / delta + 4.0
        };
        let h = sector / 6.0;
        if h >= 1.0 {
            0.0
        } else {
            h
        }
    };
    [h, s, max]
}

fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

// sRGB -> XYZ (D65). White point taken as the row sums so achromatic input maps to a* = b* = 0.
const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
];

/// CIE L*a*b* (D65, sRGB companding). Returns unscaled `[L, a, b]`.
pub fn lab(rgb: [f64; 3]) -> [f64; 3] {
    let lin = rgb.map(srgb_to_linear);
    let mut t = [0.0; 3];
    for (row, out) in RGB_TO_XYZ.iter().zip(t.iter_mut()) {
        let white: f64 = row.iter().sum();
        *out = (row[0] * lin[0] + row[1] * lin[1] + row[2] * lin[2]) / white;
    }
    if lin[0] == lin[1] && lin[1] == lin[2] {
        // Achromatic: the three ratios are mathematically equal.
        t = [lin[0]; 3];
    }
    let f = |t: f64| {
        const EPS: f64 = 216.0 / 24389.0;
        const KAPPA: f64 = 24389.0 / 27.0;
        if t > EPS {
            t.cbrt()
        } else {
            (KAPPA * t + 16.0) / 116.0
        }
    };
    let (fx, fy, fz) = (f(t[0]), f(t[1]), f(t[2]));
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// Full-range BT.601 YCbCr with chroma offset by 0.5.
pub fn ycbcr([r, g, b]: [f64; 3]) -> [f64; 3] {
    // Written relative to g so that r = g = b yields exactly y = g.
    let y = g + 0.299 * (r - g) + 0.114 * (b - g);
    let cb = 0.5 + (b - y) / 1.772;
    let cr = 0.5 + (r - y) / 1.402;
    [y, cb, cr]
}

/// Single scalar plane in `[0, 1]`, optionally tagged with the color plane it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneImage {
    pub plane_id: Option<PlaneId>,
    grid: Grid,
}

impl PlaneImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidRaster(format!("plane value {v} outside [0,1]")));
        }
        Ok(Self {
            plane_id: None,
            grid: Grid::new(width, height, data)?,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y).clamp(0.0, 1.0));
            }
        }
        Self::new(width, height, data)
    }

    pub fn with_id(mut self, id: PlaneId) -> Self {
        self.plane_id = Some(id);
        self
    }

    pub fn width(&self) -> usize {
        self.grid.width
    }

    pub fn height(&self) -> usize {
        self.grid.height
    }

    pub fn dims(&self) -> (usize, usize) {
        self.grid.dims()
    }

    pub fn data(&self) -> &[f64] {
        &self.grid.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.grid.get(x, y)
    }

    pub fn as_grid(&self) -> &Grid {
        &self.grid
    }

    pub fn into_grid(self) -> Grid {
        self.grid
    }

    /// Pixelwise map, clamped back into `[0, 1]`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> PlaneImage {
        PlaneImage {
            plane_id: self.plane_id,
            grid: Grid {
                width: self.grid.width,
                height: self.grid.height,
                data: self.grid.data.iter().map(|&v| f(v).clamp(0.0, 1.0)).collect(),
            },
        }
    }

    pub(crate) fn from_grid_unchecked(grid: Grid, plane_id: Option<PlaneId>) -> Self {
        debug_assert!(grid.data.iter().all(|v| (0.0..=1.0).contains(v)));
        Self { plane_id, grid }
    }
}

/// Reads an 8-bit PNG or JPEG into `[0,1]` RGB. Grayscale is replicated to all channels.
pub fn load_raster(path: &Path) -> Result<RasterImage> {
    let unreadable = |reason: String| Error::UnreadableFile {
        path: path.to_path_buf(),
        reason,
    };
    let reader = ImageReader::open(path)
        .map_err(|e| unreadable(e.to_string()))?
        .with_guessed_format()
        .map_err(|e| unreadable(e.to_string()))?;
    match reader.format() {
        Some(ImageFormat::Png) | Some(ImageFormat::Jpeg) => {}
        other => {
            return Err(Error::UnsupportedFormat {
                path: path.to_path_buf(),
                reason: format!("{other:?}; expected PNG or JPEG"),
            })
        }
    }
    let img = reader.decode().map_err(|e| unreadable(e.to_string()))?;
    let rgb = match img {
        DynamicImage::ImageLuma8(_)
        | DynamicImage::ImageLumaA8(_)
        | DynamicImage::ImageRgb8(_)
        | DynamicImage::ImageRgba8(_) => img.to_rgb8(),
        other => {
            return Err(Error::UnsupportedFormat {
                path: path.to_path_buf(),
                reason: format!("{:?} is not 8-bit", other.color()),
            })
        }
    };
    RasterImage::from_rgb8(rgb.width() as usize, rgb.height() as usize, rgb.as_raw())
}

/// Bilinear resampling with pixel-center alignment and clamped borders.
pub fn resize_bilinear(img: &RasterImage, target: (usize, usize)) -> Result<RasterImage> {
    let (tw, th) = target;
    if tw == 0 || th == 0 {
        return Err(Error::InvalidDimensions { width: tw, height: th });
    }
    if (tw, th) == img.dims() {
        return Ok(img.clone());
    }
    let (sw, sh) = img.dims();
    let axis = |dst: usize, src_len: usize, dst_len: usize| -> (usize, usize, f64) {
        let s = ((dst as f64 + 0.5) * src_len as f64 / dst_len as f64 - 0.5)
            .clamp(0.0, (src_len - 1) as f64);
        let i0 = s.floor() as usize;
        let i1 = (i0 + 1).min(src_len - 1);
        (i0, i1, s - i0 as f64)
    };
    let xs: Vec<_> = (0..tw).map(|x| axis(x, sw, tw)).collect();
    let mut data = Vec::with_capacity(tw * th * 3);
    for y in 0..th {
        let (y0, y1, fy) = axis(y, sh, th);
        for &(x0, x1, fx) in &xs {
            let p00 = img.pixel(x0, y0);
            let p10 = img.pixel(x1, y0);
            let p01 = img.pixel(x0, y1);
            let p11 = img.pixel(x1, y1);
            for c in 0..3 {
                let top = p00[c] + (p10[c] - p00[c]) * fx;
                let bottom = p01[c] + (p11[c] - p01[c]) * fx;
                data.push((top + (bottom - top) * fy).clamp(0.0, 1.0));
            }
        }
    }
    RasterImage::new(tw, th, data)
}

/// Projects the raster onto one of the twelve color planes.
pub fn to_plane(img: &RasterImage, plane: PlaneId) -> PlaneImage {
    let data = img
        .data
        .chunks_exact(3)
        .map(|p| plane.transform([p[0], p[1], p[2]]))
        .collect();
    PlaneImage::from_grid_unchecked(
        Grid {
            width: img.width,
            height: img.height,
            data,
        },
        Some(plane),
    )
}
