//! Tensor-product discretization of R^d = R^k x R^(d-k) on a periodic box.
//!
//! Axes are stored parallel-first with the perpendicular axes innermost
//! (fastest-varying), so every perpendicular operation runs on contiguous
//! fibers.

use std::sync::Arc;

use crate::error::{CoreError, Result};

pub const MAX_DIM: usize = 3;

/// One periodic axis: n uniform points on [-L/2, L/2) with its exact
/// discrete-Fourier dual lattice (spacing 2*pi/L, Nyquist pi/dx).
#[derive(Debug, Clone, PartialEq)]
pub struct AxisGrid {
    n: usize,
    length: f64,
}

impl AxisGrid {
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < 8 {
            return Err(CoreError::Grid(format!(
                "axis needs at least 8 points, got {n}"
            )));
        }
        if n % 2 != 0 {
            return Err(CoreError::Grid(format!(
                "axis point count must be even, got {n}"
            )));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(CoreError::Grid(format!(
                "axis length must be positive, got {length}"
            )));
        }
        Ok(AxisGrid { n, length })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn dp(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.length
    }

    pub fn p_max(&self) -> f64 {
        std::f64::consts::PI / self.dx()
    }

    pub fn x(&self, i: usize) -> f64 {
        -0.5 * self.length + i as f64 * self.dx()
    }

    /// Signed FFT bin index: 0..n/2-1 map to themselves, n/2..n-1 to negative.
    pub fn signed_bin(&self, j: usize) -> i64 {
        if j < self.n / 2 {
            j as i64
        } else {
            j as i64 - self.n as i64
        }
    }

    /// Momentum of FFT bin j on the dual lattice.
    pub fn p(&self, j: usize) -> f64 {
        self.signed_bin(j) as f64 * self.dp()
    }
}

#[derive(Debug, Clone)]
pub struct SplitGrid {
    axes: Vec<AxisGrid>,
    k: usize,
    /// Euclidean norm of x-parallel for each flat parallel index.
    par_radius: Vec<f64>,
    /// Euclidean norm of x-perp for each flat perpendicular index.
    perp_radius: Vec<f64>,
}

/// Build a split grid from per-axis (n_points, length) specs.
/// `k` must match the number of parallel axes; at least one perpendicular
/// axis is required (the model needs 1 <= k < d).
pub fn make_grid(
    k: usize,
    parallel: &[(usize, f64)],
    perp: &[(usize, f64)],
) -> Result<Arc<SplitGrid>> {
    if k == 0 || k != parallel.len() {
        return Err(CoreError::Grid(format!(
            "k = {k} must be at least 1 and match the parallel axis count {}",
            parallel.len()
        )));
    }
    if perp.is_empty() {
        return Err(CoreError::Grid(
            "at least one perpendicular axis is required (k < d)".into(),
        ));
    }
    let d = parallel.len() + perp.len();
    if d > MAX_DIM {
        return Err(CoreError::Grid(format!(
            "d = {d} exceeds the supported maximum {MAX_DIM}"
        )));
    }
    let mut axes = Vec::with_capacity(d);
    for &(n, l) in parallel.iter().chain(perp.iter()) {
        axes.push(AxisGrid::new(n, l)?);
    }
    Ok(Arc::new(SplitGrid::from_axes(axes, k)))
}

impl SplitGrid {
    fn from_axes(axes: Vec<AxisGrid>, k: usize) -> Self {
        let par_radius = block_radii(&axes[..k]);
        let perp_radius = block_radii(&axes[k..]);
        SplitGrid {
            axes,
            k,
            par_radius,
            perp_radius,
        }
    }

    pub fn d(&self) -> usize {
        self.axes.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn axes(&self) -> &[AxisGrid] {
        &self.axes
    }

    pub fn par_axes(&self) -> &[AxisGrid] {
        &self.axes[..self.k]
    }

    pub fn perp_axes(&self) -> &[AxisGrid] {
        &self.axes[self.k..]
    }

    /// Total number of grid points.
    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.n()).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn par_len(&self) -> usize {
        self.par_axes().iter().map(|a| a.n()).product()
    }

    pub fn perp_len(&self) -> usize {
        self.perp_axes().iter().map(|a| a.n()).product()
    }

    /// Volume element, product of all dx.
    pub fn dv(&self) -> f64 {
        self.axes.iter().map(|a| a.dx()).product()
    }

    /// Momentum-space volume element, product of all dp.
    pub fn dv_p(&self) -> f64 {
        self.axes.iter().map(|a| a.dp()).product()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.n()).collect()
    }

    /// ||x_perp|| for a flat perpendicular index.
    pub fn perp_radius(&self, perp_idx: usize) -> f64 {
        self.perp_radius[perp_idx]
    }

    /// ||x_par|| for a flat parallel index.
    pub fn par_radius(&self, par_idx: usize) -> f64 {
        self.par_radius[par_idx]
    }

    pub fn perp_radii(&self) -> &[f64] {
        &self.perp_radius
    }

    /// Decompose a flat grid index into (parallel index, perpendicular index).
    /// Perp axes are innermost: flat = par_idx * perp_len + perp_idx.
    pub fn split_index(&self, flat: usize) -> (usize, usize) {
        let pl = self.perp_len();
        (flat / pl, flat % pl)
    }

    /// Coordinates of a flat block index within the given axes.
    pub fn block_coords(axes: &[AxisGrid], mut idx: usize) -> Vec<f64> {
        let mut coords = vec![0.0; axes.len()];
        for (slot, axis) in axes.iter().enumerate().rev() {
            coords[slot] = axis.x(idx % axis.n());
            idx /= axis.n();
        }
        coords
    }

    pub fn grids_match(&self, other: &SplitGrid) -> bool {
        self.k == other.k && self.axes == other.axes
    }
}

fn block_radii(axes: &[AxisGrid]) -> Vec<f64> {
    let len: usize = axes.iter().map(|a| a.n()).product();
    let mut out = vec![0.0; len.max(1)];
    for (idx, slot) in out.iter_mut().enumerate() {
        let coords = SplitGrid::block_coords(axes, idx);
        *slot = coords.iter().map(|c| c * c).sum::<f64>().sqrt();
    }
    out
}
