//! First-order Sobel gradients, multi-scale Frangi vesselness and edge superimposition.
//!
//! All filters use replicate border padding, so they are defined on the whole domain.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{EdgeMap, RegionMask};
use crate::raster::{Grid, PlaneImage};

const SOBEL_MIN_SIZE: usize = 3;
const FRANGI_MIN_SIZE: usize = 5;

/// Sobel magnitude and direction (radians in `[0, 2π)`, 0 where the magnitude is 0).
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    pub magnitude: Grid,
    pub direction: Grid,
}

fn ensure_min_size(grid: &Grid, min: usize) -> Result<()> {
    if grid.width < min || grid.height < min {
        return Err(Error::ImageTooSmall {
            width: grid.width,
            height: grid.height,
            min,
        });
    }
    Ok(())
}

/// Maps an `atan2` result into `[0, 2π)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let wrapped = if theta < 0.0 { theta + TAU } else { theta };
    if wrapped >= TAU {
        0.0
    } else {
        wrapped
    }
}

/// Raw horizontal and vertical Sobel responses (`Gx`, `Gy`), y pointing down.
pub fn sobel_components(grid: &Grid) -> (Grid, Grid) {
    let (w, h) = grid.dims();
    let mut gx = Grid::zeros(w, h);
    let mut gy = Grid::zeros(w, h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let p = |dx: isize, dy: isize| grid.get_clamped(x + dx, y + dy);
            let sx = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
            let sy = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
            let i = y as usize * w + x as usize;
            gx.data[i] = sx;
            gy.data[i] = sy;
        }
    }
    (gx, gy)
}

pub fn sobel_gradient(plane: &PlaneImage) -> Result<GradientField> {
    sobel_gradient_grid(plane.as_grid())
}

pub(crate) fn sobel_gradient_grid(grid: &Grid) -> Result<GradientField> {
    ensure_min_size(grid, SOBEL_MIN_SIZE)?;
    let (gx, gy) = sobel_components(grid);
    let magnitude: Vec<f64> = gx.data.iter().zip(&gy.data).map(|(x, y)| x.hypot(*y)).collect();
    let direction = gx
        .data
        .iter()
        .zip(&gy.data)
        .zip(&magnitude)
        .map(|((&x, &y), &m)| if m == 0.0 { 0.0 } else { wrap_angle(y.atan2(x)) })
        .collect();
    Ok(GradientField {
        magnitude: Grid::new(grid.width, grid.height, magnitude)?,
        direction: Grid::new(grid.width, grid.height, direction)?,
    })
}

/// Marks pixels whose Sobel magnitude reaches `threshold_fraction` of the maximum.
pub fn sobel_edge_map(plane: &PlaneImage, threshold_fraction: f64) -> Result<EdgeMap> {
    if !(threshold_fraction > 0.0 && threshold_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "edge threshold fraction {threshold_fraction} must lie in (0, 1)"
        )));
    }
    let field = sobel_gradient(plane)?;
    let max = field.magnitude.max();
    let (w, h) = plane.dims();
    if max <= 0.0 {
        return Ok(RegionMask::empty(w, h));
    }
    let cut = threshold_fraction * max;
    RegionMask::from_bits(w, h, field.magnitude.data.iter().map(|&m| m >= cut).collect())
}

/// Which ridges the vesselness measure enhances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RidgePolarity {
    /// Dark curvilinear structures on a brighter background (e.g. vessels).
    Dark,
    Bright,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrangiParams {
    pub scales: Vec<f64>,
    pub beta: f64,
    pub c: f64,
    pub polarity: RidgePolarity,
}

impl Default for FrangiParams {
    fn default() -> Self {
        Self {
            scales: vec![1.0, 2.0, 3.0],
            beta: 0.5,
            c: 15.0,
            polarity: RidgePolarity::Dark,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VesselnessMap {
    pub response: Grid,
    pub scales_used: Vec<f64>,
}

/// Normalized 1-D Gaussian kernel truncated at `ceil(3σ)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil().max(1.0) as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Separable Gaussian smoothing with replicate padding.
pub fn gaussian_blur(grid: &Grid, sigma: f64) -> Grid {
    let kernel = gaussian_kernel(sigma);
    let r = (kernel.len() / 2) as isize;
    let (w, h) = grid.dims();
    let mut tmp = Grid::zeros(w, h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            tmp.data[y as usize * w + x as usize] = kernel
                .iter()
                .enumerate()
                .map(|(j, k)| k * grid.get_clamped(x + j as isize - r, y))
                .sum();
        }
    }
    let mut out = Grid::zeros(w, h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            out.data[y as usize * w + x as usize] = kernel
                .iter()
                .enumerate()
                .map(|(j, k)| k * tmp.get_clamped(x, y + j as isize - r))
                .sum();
        }
    }
    out
}

/// Eigenvalues of `[[a, b], [b, d]]` ordered so that `|λ1| ≤ |λ2|`.
pub fn symmetric_eigenvalues(a: f64, b: f64, d: f64) -> (f64, f64) {
    let half_trace = 0.5 * (a + d);
    let disc = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    let (l1, l2) = (half_trace + disc, half_trace - disc);
    if l1.abs() <= l2.abs() {
        (l1, l2)
    } else {
        (l2, l1)
    }
}

/// Per-pixel vesselness for a single Hessian eigenvalue pair.
pub fn vesselness_from_eigenvalues(l1: f64, l2: f64, beta: f64, c: f64, polarity: RidgePolarity) -> f64 {
    let rejected = match polarity {
        RidgePolarity::Dark => l2 <= 0.0,
        RidgePolarity::Bright => l2 >= 0.0,
    };
    if rejected {
        return 0.0;
    }
    let rb = l1 / l2;
    let s2 = l1 * l1 + l2 * l2;
    (-(rb * rb) / (2.0 * beta * beta)).exp() * (1.0 - (-s2 / (2.0 * c * c)).exp())
}

fn single_scale(grid: &Grid, sigma: f64, params: &FrangiParams) -> Grid {
    let smooth = gaussian_blur(grid, sigma);
    let (w, h) = grid.dims();
    let s2 = sigma * sigma;
    let mut out = Grid::zeros(w, h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let p = |dx: isize, dy: isize| smooth.get_clamped(x + dx, y + dy);
            let c = p(0, 0);
            let dxx = s2 * (p(1, 0) - 2.0 * c + p(-1, 0));
            let dyy = s2 * (p(0, 1) - 2.0 * c + p(0, -1));
            let dxy = s2 * 0.25 * (p(1, 1) - p(1, -1) - p(-1, 1) + p(-1, -1));
            let (l1, l2) = symmetric_eigenvalues(dxx, dxy, dyy);
            out.data[y as usize * w + x as usize] =
                vesselness_from_eigenvalues(l1, l2, params.beta, params.c, params.polarity);
        }
    }
    out
}

/// Multi-scale Frangi vesselness; the response is the pixelwise max over scales.
pub fn frangi_vesselness(plane: &PlaneImage, params: &FrangiParams) -> Result<VesselnessMap> {
    frangi_grid(plane.as_grid(), params)
}

pub(crate) fn frangi_grid(grid: &Grid, params: &FrangiParams) -> Result<VesselnessMap> {
    ensure_min_size(grid, FRANGI_MIN_SIZE)?;
    if params.scales.is_empty() {
        return Err(Error::InvalidConfig("Frangi needs at least one scale".into()));
    }
    if let Some(&bad) = params.scales.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
        return Err(Error::InvalidScale(bad));
    }
    let mut response = Grid::zeros(grid.width, grid.height);
    for &sigma in &params.scales {
        let scale = single_scale(grid, sigma, params);
        for (r, v) in response.data.iter_mut().zip(scale.data) {
            *r = r.max(v);
        }
    }
    Ok(VesselnessMap {
        response,
        scales_used: params.scales.clone(),
    })
}

/// `clamp(plane + edges / max(edges), 0, 1)`; all-zero edges leave the plane unchanged.
pub fn superimpose_edges(plane: &PlaneImage, edges: &Grid) -> Result<PlaneImage> {
    if plane.dims() != edges.dims() {
        return Err(Error::DimensionMismatch {
            expected: plane.dims(),
            actual: edges.dims(),
        });
    }
    if let Some(v) = edges.data.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
        return Err(Error::InvalidRaster(format!("edge value {v} is not a non-negative number")));
    }
    let max = edges.max();
    let scale = if max > 0.0 { 1.0 / max } else { 1.0 };
    let data = plane
        .data()
        .iter()
        .zip(&edges.data)
        .map(|(&p, &e)| (p + (e * scale).min(1.0)).clamp(0.0, 1.0))
        .collect();
    Ok(PlaneImage::from_grid_unchecked(
        Grid::new(plane.width(), plane.height(), data)?,
        plane.plane_id,
    ))
}
