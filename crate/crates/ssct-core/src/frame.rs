//! The coherent-state frame: a band-limited product window together with a
//! phase-space quadrature lattice.
//!
//! Lattice structure: positions on a strided sublattice of the grid (stride
//! per axis), momenta on the full dual lattice (spacing dp = 2 pi / L). With
//! the window's Fourier support inside the momentum ball of radius
//! delta/sqrt(2) per block and the stride condition n/s > 2 jmax per axis,
//! the periodization of |w|^2 over the position lattice is exactly constant,
//! so the discrete resolution of identity holds to rounding error. The frame
//! still measures its own identity defect on probe states at construction
//! and records it as the certified tolerance.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{CoreError, Result};
use crate::field::WaveFunction;
use crate::grid::{AxisGrid, SplitGrid};
use crate::window::BlockWindow;

/// One block's half of the quadrature lattice.
#[derive(Debug, Clone)]
pub struct BlockLattice {
    window: BlockWindow,
    /// Position stride per block axis, in grid-index units.
    strides: Vec<usize>,
    /// Node count per block axis (n / stride).
    node_dims: Vec<usize>,
    /// Per flat node: grid-index shift per axis.
    node_shifts: Vec<Vec<usize>>,
    /// Per flat node: position coordinates.
    node_coords: Vec<Vec<f64>>,
    /// Per flat bin: momentum coordinates.
    bin_coords: Vec<Vec<f64>>,
    /// Per flat bin: ||p||.
    bin_radius: Vec<f64>,
    /// Per flat node: ||x||.
    node_radius: Vec<f64>,
    /// Translated window per node, w(. - x_node), in block layout.
    translated: Vec<Vec<f64>>,
    /// Lattice weight per node-bin pair: prod over axes of (stride*dx*dp).
    mu: f64,
    /// prod over axes of dx.
    dv: f64,
}

impl BlockLattice {
    fn build(axes: &[AxisGrid], rho: f64, strides: Vec<usize>) -> Result<Self> {
        let window = BlockWindow::build(axes, rho)?;
        for (axis, (&s, &jmax)) in axes.iter().zip(strides.iter().zip(window.jmax())) {
            if s == 0 || axis.n() % s != 0 {
                return Err(CoreError::Precondition(format!(
                    "stride {s} must divide the axis point count {}",
                    axis.n()
                )));
            }
            // exact periodization: dual lattice of the node grid clears the
            // window autocorrelation support
            if axis.n() / s <= 2 * jmax {
                return Err(CoreError::Precondition(format!(
                    "stride {s} too coarse: {} nodes cannot clear twice the window band {jmax}",
                    axis.n() / s
                )));
            }
            // declared oversampling bound: node spacing times dp at most pi/2
            if (s as f64) * axis.dx() * axis.dp() > std::f64::consts::PI / 2.0 + 1e-12 {
                return Err(CoreError::Precondition(format!(
                    "stride {s} violates the oversampling bound dx*dp <= pi/2"
                )));
            }
        }
        let node_dims: Vec<usize> = axes.iter().zip(&strides).map(|(a, &s)| a.n() / s).collect();
        let node_count: usize = node_dims.iter().product();
        let bins: usize = axes.iter().map(|a| a.n()).product();
        let mut node_shifts = Vec::with_capacity(node_count);
        let mut node_coords = Vec::with_capacity(node_count);
        let mut node_radius = Vec::with_capacity(node_count);
        for flat in 0..node_count {
            let mut rem = flat;
            let mut shifts = vec![0usize; axes.len()];
            let mut coords = vec![0.0; axes.len()];
            for pos in (0..axes.len()).rev() {
                let i = rem % node_dims[pos];
                rem /= node_dims[pos];
                shifts[pos] = i * strides[pos];
                coords[pos] = axes[pos].x(shifts[pos]);
            }
            node_radius.push(coords.iter().map(|c| c * c).sum::<f64>().sqrt());
            node_shifts.push(shifts);
            node_coords.push(coords);
        }
        let mut bin_coords = Vec::with_capacity(bins);
        let mut bin_radius = Vec::with_capacity(bins);
        for flat in 0..bins {
            let mut rem = flat;
            let mut coords = vec![0.0; axes.len()];
            for pos in (0..axes.len()).rev() {
                let j = rem % axes[pos].n();
                rem /= axes[pos].n();
                coords[pos] = axes[pos].p(j);
            }
            bin_radius.push(coords.iter().map(|c| c * c).sum::<f64>().sqrt());
            bin_coords.push(coords);
        }
        let mut translated = Vec::with_capacity(node_count);
        for shifts in &node_shifts {
            let mut buf = vec![0.0; bins];
            window.fill_shifted(shifts, &mut buf);
            translated.push(buf);
        }
        let mu: f64 = axes
            .iter()
            .zip(&strides)
            .map(|(a, &s)| s as f64 * a.dx() * a.dp())
            .product();
        let dv: f64 = axes.iter().map(|a| a.dx()).product();
        Ok(BlockLattice {
            window,
            strides,
            node_dims,
            node_shifts,
            node_coords,
            bin_coords,
            bin_radius,
            node_radius,
            translated,
            mu,
            dv,
        })
    }

    pub fn window(&self) -> &BlockWindow {
        &self.window
    }

    pub fn node_count(&self) -> usize {
        self.node_shifts.len()
    }

    pub fn bins(&self) -> usize {
        self.bin_coords.len()
    }

    pub fn node_dims(&self) -> &[usize] {
        &self.node_dims
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn node_coords(&self, node: usize) -> &[f64] {
        &self.node_coords[node]
    }

    pub fn node_shifts(&self, node: usize) -> &[usize] {
        &self.node_shifts[node]
    }

    pub fn node_radius(&self, node: usize) -> f64 {
        self.node_radius[node]
    }

    pub fn bin_coords(&self, bin: usize) -> &[f64] {
        &self.bin_coords[bin]
    }

    pub fn bin_radius(&self, bin: usize) -> f64 {
        self.bin_radius[bin]
    }

    pub fn translated_window(&self, node: usize) -> &[f64] {
        &self.translated[node]
    }

    /// Quadrature weight per (node, bin) pair.
    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn dv(&self) -> f64 {
        self.dv
    }

    /// Scalar applied when reconstructing P(E) psi contributions.
    pub fn apply_factor(&self) -> f64 {
        let d_b = self.strides.len() as f64;
        self.mu * self.dv / (2.0 * std::f64::consts::PI).powf(d_b)
    }

    /// Scalar turning raw transform magnitudes into quadratic-form terms.
    pub fn form_factor(&self) -> f64 {
        let d_b = self.strides.len() as f64;
        self.mu * self.dv * self.dv / (2.0 * std::f64::consts::PI).powf(d_b)
    }

    /// Coefficient scale (2 pi)^(-d_b/2) * dv for materialized transforms.
    pub fn coeff_scale(&self) -> f64 {
        let d_b = self.strides.len() as f64;
        self.dv * (2.0 * std::f64::consts::PI).powf(-d_b / 2.0)
    }
}

#[derive(Debug, Clone)]
pub struct CoherentFrame {
    grid: Arc<SplitGrid>,
    delta: f64,
    par: BlockLattice,
    perp: BlockLattice,
    certified_tol: f64,
}

impl CoherentFrame {
    /// Frame with automatic strides: per axis the largest power of two with
    /// node spacing at most pi / (2 rho), twice as dense as the exactness
    /// bound requires.
    pub fn new(grid: Arc<SplitGrid>, delta: f64) -> Result<Self> {
        let rho = block_radius(delta);
        let auto = |axes: &[AxisGrid]| -> Vec<usize> {
            axes.iter()
                .map(|a| {
                    let target = std::f64::consts::PI / (2.0 * rho);
                    let mut s = 1usize;
                    while s * 2 <= a.n() / 4 && (s * 2) as f64 * a.dx() <= target {
                        s *= 2;
                    }
                    s
                })
                .collect()
        };
        let par_strides = auto(grid.par_axes());
        let perp_strides = auto(grid.perp_axes());
        CoherentFrame::with_strides(grid, delta, &par_strides, &perp_strides)
    }

    pub fn with_strides(
        grid: Arc<SplitGrid>,
        delta: f64,
        par_strides: &[usize],
        perp_strides: &[usize],
    ) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(CoreError::Precondition(format!(
                "delta must be positive, got {delta}"
            )));
        }
        let rho = block_radius(delta);
        let par = BlockLattice::build(grid.par_axes(), rho, par_strides.to_vec())?;
        let perp = BlockLattice::build(grid.perp_axes(), rho, perp_strides.to_vec())?;
        let mut frame = CoherentFrame {
            grid,
            delta,
            par,
            perp,
            certified_tol: f64::NAN,
        };
        frame.certified_tol = crate::povm::measure_identity_defect(&frame)?;
        Ok(frame)
    }

    pub fn grid(&self) -> &Arc<SplitGrid> {
        &self.grid
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Per-block momentum ball radius delta / sqrt(2); the product window's
    /// support then sits inside the d-dimensional ball B_delta.
    pub fn block_radius(&self) -> f64 {
        block_radius(self.delta)
    }

    pub fn par(&self) -> &BlockLattice {
        &self.par
    }

    pub fn perp(&self) -> &BlockLattice {
        &self.perp
    }

    /// Measured resolution-of-identity defect, recorded at construction.
    pub fn certified_tolerance(&self) -> f64 {
        self.certified_tol
    }

    /// Fourier-coverage precondition: the state's momentum content must stay
    /// 3 delta clear of the Nyquist box so wrapped window translates never
    /// touch it. Band-limited test states carry exactly zero mass there;
    /// interacting evolutions scatter a little in, so the limit is a mass
    /// fraction small against every POVM-level tolerance rather than zero.
    pub fn check_coverage(&self, psi: &WaveFunction) -> Result<()> {
        if !self.grid.grids_match(psi.grid()) {
            return Err(CoreError::Grid(
                "state and frame live on different grids".into(),
            ));
        }
        let margin = 3.0 * self.delta;
        let hat = psi.to_momentum();
        let dims = self.grid.dims();
        let axes = self.grid.axes();
        let mut outside = 0.0;
        let mut total = 0.0;
        for (flat, v) in hat.iter().enumerate() {
            let m = v.norm_sqr();
            total += m;
            let mut rem = flat;
            for pos in (0..dims.len()).rev() {
                let j = rem % dims[pos];
                rem /= dims[pos];
                if axes[pos].p(j).abs() > axes[pos].p_max() - margin {
                    outside += m;
                    break;
                }
            }
        }
        if total > 0.0 && outside / total > COVERAGE_MASS_LIMIT {
            return Err(CoreError::Coverage(format!(
                "Fourier mass fraction {:.3e} within {margin:.3} of the Nyquist box",
                outside / total
            )));
        }
        Ok(())
    }

    /// The coherent state eta_{x,p;delta}: phase-space translate of the
    /// window, snapped to the nearest grid point and momentum bin.
    /// Rejects momenta beyond Nyquist - delta.
    pub fn coherent_state(&self, x: &[f64], p: &[f64]) -> Result<WaveFunction> {
        let d = self.grid.d();
        if x.len() != d || p.len() != d {
            return Err(CoreError::Precondition(format!(
                "need {d} position and momentum coordinates"
            )));
        }
        let axes = self.grid.axes();
        let mut shifts = Vec::with_capacity(d);
        let mut bins = Vec::with_capacity(d);
        for (pos, axis) in axes.iter().enumerate() {
            if x[pos].abs() > 0.5 * axis.length() {
                return Err(CoreError::Precondition(format!(
                    "position {} outside the domain",
                    x[pos]
                )));
            }
            if p[pos].abs() > axis.p_max() - self.delta {
                return Err(CoreError::Precondition(format!(
                    "momentum {} beyond Nyquist - delta = {}",
                    p[pos],
                    axis.p_max() - self.delta
                )));
            }
            let idx = ((x[pos] + 0.5 * axis.length()) / axis.dx()).round() as i64;
            shifts.push(idx.rem_euclid(axis.n() as i64) as usize);
            let bin = (p[pos] / axis.dp()).round() as i64;
            bins.push(bin.rem_euclid(axis.n() as i64) as usize);
        }
        let k = self.grid.k();
        let (par_shifts, perp_shifts) = shifts.split_at(k);
        let perp_len = self.grid.perp_len();
        let mut wpar = vec![0.0; self.grid.par_len()];
        self.par.window.fill_shifted(par_shifts, &mut wpar);
        let mut wperp = vec![0.0; perp_len];
        self.perp.window.fill_shifted(perp_shifts, &mut wperp);

        // e^{i p (y - x)} with snapped x and p; lattice momenta make the
        // phase torus-periodic, so plain coordinate differences are fine.
        let snapped_x: Vec<f64> = axes.iter().zip(&shifts).map(|(a, &s)| a.x(s)).collect();
        let snapped_p: Vec<f64> = axes.iter().zip(&bins).map(|(a, &b)| a.p(b)).collect();
        let grid = self.grid.clone();
        let values: Vec<Complex64> = (0..grid.len())
            .map(|flat| {
                let (a, b) = (flat / perp_len, flat % perp_len);
                let coords_par = SplitGrid::block_coords(grid.par_axes(), a);
                let coords_perp = SplitGrid::block_coords(grid.perp_axes(), b);
                let mut phase = 0.0;
                for (i, &c) in coords_par.iter().chain(coords_perp.iter()).enumerate() {
                    phase += snapped_p[i] * (c - snapped_x[i]);
                }
                Complex64::from_polar(wpar[a] * wperp[b], phase)
            })
            .collect();
        WaveFunction::new(grid, values)
    }

    /// Key-value manifest embedded in exports.
    pub fn manifest(&self) -> Vec<(String, String)> {
        vec![
            (
                "window".into(),
                "canonical bump, band-limited per block".into(),
            ),
            ("delta".into(), format!("{}", self.delta)),
            ("block_radius".into(), format!("{}", self.block_radius())),
            ("par_strides".into(), format!("{:?}", self.par.strides())),
            ("perp_strides".into(), format!("{:?}", self.perp.strides())),
            (
                "certified_tolerance".into(),
                format!("{:.3e}", self.certified_tol),
            ),
        ]
    }
}

/// Relative Fourier mass allowed within the coverage margin.
pub const COVERAGE_MASS_LIMIT: f64 = 1e-6;

fn block_radius(delta: f64) -> f64 {
    delta / 2f64.sqrt()
}
