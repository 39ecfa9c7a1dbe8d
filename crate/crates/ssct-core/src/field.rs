//! Complex fields over a `SplitGrid`: norms, inner products, strip
//! restrictions, and mass profiles.
//!
//! Wavefunctions are immutable after construction; the discrete L2 norm is
//! cached on first use. All reductions run in a fixed sequential order.

use std::sync::{Arc, OnceLock};

use num_complex::Complex64;

use crate::error::{CoreError, Result};
use crate::fft;
use crate::grid::SplitGrid;
use crate::numeric::{kahan_sum, kahan_sum_complex};

#[derive(Debug)]
pub struct WaveFunction {
    grid: Arc<SplitGrid>,
    values: Vec<Complex64>,
    norm_cache: OnceLock<f64>,
}

impl Clone for WaveFunction {
    fn clone(&self) -> Self {
        WaveFunction {
            grid: self.grid.clone(),
            values: self.values.clone(),
            norm_cache: self.norm_cache.clone(),
        }
    }
}

impl WaveFunction {
    pub fn new(grid: Arc<SplitGrid>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(CoreError::Grid(format!(
                "value count {} does not match grid size {}",
                values.len(),
                grid.len()
            )));
        }
        if values
            .iter()
            .any(|v| !v.re.is_finite() || !v.im.is_finite())
        {
            return Err(CoreError::Grid("non-finite wavefunction sample".into()));
        }
        Ok(WaveFunction {
            grid,
            values,
            norm_cache: OnceLock::new(),
        })
    }

    pub fn zero(grid: Arc<SplitGrid>) -> Self {
        let n = grid.len();
        WaveFunction {
            grid,
            values: vec![Complex64::default(); n],
            norm_cache: OnceLock::new(),
        }
    }

    /// Sample a function of the grid coordinates (parallel coords then perp coords).
    pub fn from_fn(grid: Arc<SplitGrid>, f: impl Fn(&[f64], &[f64]) -> Complex64) -> Result<Self> {
        let mut values = vec![Complex64::default(); grid.len()];
        let perp_len = grid.perp_len();
        for (flat, slot) in values.iter_mut().enumerate() {
            let (a, b) = (flat / perp_len, flat % perp_len);
            let xpar = SplitGrid::block_coords(grid.par_axes(), a);
            let xperp = SplitGrid::block_coords(grid.perp_axes(), b);
            *slot = f(&xpar, &xperp);
        }
        WaveFunction::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<SplitGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn norm_sq(&self) -> f64 {
        self.norm() * self.norm()
    }

    /// Discrete L2 norm sqrt(sum |psi|^2 * dv).
    pub fn norm(&self) -> f64 {
        *self.norm_cache.get_or_init(|| {
            (kahan_sum(self.values.iter().map(|v| v.norm_sqr())) * self.grid.dv()).sqrt()
        })
    }

    /// <self, other> with the physics convention (conjugate-linear first slot).
    pub fn inner(&self, other: &WaveFunction) -> Result<Complex64> {
        self.check_same_grid(other)?;
        Ok(kahan_sum_complex(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a.conj() * b),
        ) * self.grid.dv())
    }

    pub fn scaled(&self, c: Complex64) -> WaveFunction {
        let values = self.values.iter().map(|v| v * c).collect();
        WaveFunction {
            grid: self.grid.clone(),
            values,
            norm_cache: OnceLock::new(),
        }
    }

    /// self + c * other
    pub fn add_scaled(&self, other: &WaveFunction, c: Complex64) -> Result<WaveFunction> {
        self.check_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + c * b)
            .collect();
        WaveFunction::new(self.grid.clone(), values)
    }

    pub fn sub(&self, other: &WaveFunction) -> Result<WaveFunction> {
        self.add_scaled(other, Complex64::new(-1.0, 0.0))
    }

    pub fn distance(&self, other: &WaveFunction) -> Result<f64> {
        Ok(self.sub(other)?.norm())
    }

    pub fn normalized(&self) -> Result<WaveFunction> {
        let n = self.norm();
        if n == 0.0 {
            return Err(CoreError::Precondition(
                "cannot normalize the zero field".into(),
            ));
        }
        Ok(self.scaled(Complex64::new(1.0 / n, 0.0)))
    }

    fn check_same_grid(&self, other: &WaveFunction) -> Result<()> {
        if !self.grid.grids_match(&other.grid) {
            return Err(CoreError::Grid(
                "wavefunctions live on different grids".into(),
            ));
        }
        Ok(())
    }

    /// Pointwise multiplication by the indicator of S_R = {||x_perp|| <= R}
    /// (or its complement). Exact node partition: strip + complement = identity.
    pub fn restrict_strip(&self, radius: f64, complement: bool) -> Result<WaveFunction> {
        if !(radius > 0.0) {
            return Err(CoreError::Precondition(format!(
                "strip radius must be positive, got {radius}"
            )));
        }
        let perp_len = self.grid.perp_len();
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(flat, v)| {
                let inside = self.grid.perp_radius(flat % perp_len) <= radius;
                if inside != complement {
                    *v
                } else {
                    Complex64::default()
                }
            })
            .collect();
        WaveFunction::new(self.grid.clone(), values)
    }

    /// ||chi_{S_R} psi|| without materializing the restriction.
    pub fn strip_norm(&self, radius: f64) -> f64 {
        let perp_len = self.grid.perp_len();
        let s = kahan_sum(self.values.iter().enumerate().filter_map(|(flat, v)| {
            (self.grid.perp_radius(flat % perp_len) <= radius).then(|| v.norm_sqr())
        }));
        (s * self.grid.dv()).sqrt()
    }

    /// Mass fraction in the outer shell: points within `shell` of the domain
    /// boundary on any axis (shell as a fraction of the axis length).
    pub fn boundary_shell_fraction(&self, shell: f64) -> f64 {
        let dims = self.grid.dims();
        let axes = self.grid.axes();
        let mut total = 0.0;
        let mut in_shell = 0.0;
        // per-axis flags precomputed
        let flags: Vec<Vec<bool>> = axes
            .iter()
            .map(|a| {
                (0..a.n())
                    .map(|i| a.x(i).abs() >= (0.5 - shell) * a.length())
                    .collect()
            })
            .collect();
        for (flat, v) in self.values.iter().enumerate() {
            let m = v.norm_sqr();
            total += m;
            let mut rem = flat;
            let mut hit = false;
            for pos in (0..dims.len()).rev() {
                let c = rem % dims[pos];
                rem /= dims[pos];
                if flags[pos][c] {
                    hit = true;
                }
            }
            if hit {
                in_shell += m;
            }
        }
        if total == 0.0 {
            0.0
        } else {
            in_shell / total
        }
    }

    /// Cumulative transverse mass: sorted perp radii paired with the total
    /// |psi|^2 * dv mass at radius <= r. Used for s(v,t) curves and R95.
    pub fn transverse_mass_profile(&self) -> Vec<(f64, f64)> {
        let perp_len = self.grid.perp_len();
        let mut per_radius: Vec<(f64, f64)> = Vec::with_capacity(perp_len);
        // accumulate mass per perp node first
        let mut perp_mass = vec![0.0f64; perp_len];
        for (flat, v) in self.values.iter().enumerate() {
            perp_mass[flat % perp_len] += v.norm_sqr();
        }
        for (b, &m) in perp_mass.iter().enumerate() {
            per_radius.push((self.grid.perp_radius(b), m * self.grid.dv()));
        }
        per_radius.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        // merge equal radii and accumulate
        let mut out: Vec<(f64, f64)> = Vec::new();
        let mut acc = 0.0;
        for (r, m) in per_radius {
            acc += m;
            match out.last_mut() {
                Some(last) if last.0 == r => last.1 = acc,
                _ => out.push((r, acc)),
            }
        }
        out
    }

    /// Smallest radius containing `fraction` of the transverse mass,
    /// linearly interpolated between grid radii.
    pub fn containment_radius(&self, fraction: f64) -> f64 {
        let profile = self.transverse_mass_profile();
        let total = profile.last().map(|&(_, m)| m).unwrap_or(0.0);
        if total == 0.0 {
            return 0.0;
        }
        let target = fraction * total;
        let mut prev = (0.0, 0.0);
        for &(r, m) in &profile {
            if m >= target {
                let (r0, m0) = prev;
                if m > m0 {
                    return r0 + (r - r0) * (target - m0) / (m - m0);
                }
                return r;
            }
            prev = (r, m);
        }
        profile.last().unwrap().0
    }

    /// |psi|^2 marginal over a block: integrates out the other block.
    /// Returns per-flat-index densities for the chosen block.
    pub fn block_marginal(&self, parallel: bool) -> Vec<f64> {
        let perp_len = self.grid.perp_len();
        let par_len = self.grid.par_len();
        if parallel {
            let other_dv: f64 = self.grid.perp_axes().iter().map(|a| a.dx()).product();
            let mut out = vec![0.0; par_len];
            for (flat, v) in self.values.iter().enumerate() {
                out[flat / perp_len] += v.norm_sqr() * other_dv;
            }
            out
        } else {
            let other_dv: f64 = self.grid.par_axes().iter().map(|a| a.dx()).product();
            let mut out = vec![0.0; perp_len];
            for (flat, v) in self.values.iter().enumerate() {
                out[flat % perp_len] += v.norm_sqr() * other_dv;
            }
            out
        }
    }

    pub fn to_momentum(&self) -> Vec<Complex64> {
        fft::to_momentum(&self.grid, &self.values)
    }

    /// Fourier mass fraction with any perp momentum inside the closed ball B_alpha.
    /// D_alpha states have (numerically) zero such mass.
    pub fn perp_fourier_mass_inside(&self, alpha: f64) -> f64 {
        let hat = self.to_momentum();
        let perp_axes = self.grid.perp_axes();
        let perp_len = self.grid.perp_len();
        let mut inside = 0.0;
        let mut total = 0.0;
        for (flat, v) in hat.iter().enumerate() {
            let m = v.norm_sqr();
            total += m;
            let mut idx = flat % perp_len;
            let mut p2 = 0.0;
            for axis in perp_axes.iter().rev() {
                let j = idx % axis.n();
                idx /= axis.n();
                let p = axis.p(j);
                p2 += p * p;
            }
            if p2.sqrt() <= alpha {
                inside += m;
            }
        }
        if total == 0.0 {
            0.0
        } else {
            inside / total
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::numeric::kahan_sum;

    fn gaussian_state(width: f64, grid: Arc<SplitGrid>) -> WaveFunction {
        // normalized multivariate Gaussian, sampled well inside the domain
        let d = grid.d() as f64;
        let norm = (std::f64::consts::PI * width * width).powf(-d / 4.0);
        WaveFunction::from_fn(grid, |xp, xq| {
            let r2: f64 = xp.iter().chain(xq.iter()).map(|c| c * c).sum();
            Complex64::new(norm * (-r2 / (2.0 * width * width)).exp(), 0.0)
        })
        .unwrap()
    }

    #[test]
    fn zero_field_has_zero_norm() {
        let grid = make_grid(1, &[(16, 10.0)], &[(16, 10.0)]).unwrap();
        assert_eq!(WaveFunction::zero(grid).norm(), 0.0);
    }

    #[test]
    fn gaussian_norm_matches_exact_integral() {
        let grid = make_grid(1, &[(64, 40.0)], &[(64, 40.0)]).unwrap();
        let psi = gaussian_state(1.5, grid);
        assert!((psi.norm() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn norm_is_homogeneous() {
        let grid = make_grid(1, &[(16, 10.0)], &[(16, 10.0)]).unwrap();
        let psi = gaussian_state(0.8, grid);
        let scaled = psi.scaled(Complex64::new(2.0, 0.0));
        assert!((scaled.norm() - 2.0 * psi.norm()).abs() < 1e-12);
    }

    #[test]
    fn strip_pythagoras_exact() {
        let grid = make_grid(1, &[(32, 20.0)], &[(32, 20.0)]).unwrap();
        let psi = gaussian_state(1.2, grid);
        for r in [0.5, 1.0, 3.7, 9.0] {
            let a = psi.restrict_strip(r, false).unwrap().norm_sq();
            let b = psi.restrict_strip(r, true).unwrap().norm_sq();
            let total = psi.norm_sq();
            assert!(
                ((a + b) - total).abs() <= 1e-12 * total.max(1.0),
                "r={r}: {a} + {b} != {total}"
            );
        }
    }

    #[test]
    fn restrict_is_idempotent_contraction() {
        let grid = make_grid(1, &[(16, 10.0)], &[(32, 14.0)]).unwrap();
        let psi = gaussian_state(0.9, grid);
        let once = psi.restrict_strip(1.3, false).unwrap();
        let twice = once.restrict_strip(1.3, false).unwrap();
        assert_eq!(once.values(), twice.values());
        assert!(once.norm() <= psi.norm() + 1e-15);
    }

    #[test]
    fn full_strip_complement_is_zero() {
        let grid = make_grid(1, &[(16, 10.0)], &[(16, 10.0)]).unwrap();
        let psi = gaussian_state(0.9, grid);
        // R beyond the largest perp radius: complement restriction vanishes
        let out = psi.restrict_strip(10.0, true).unwrap();
        assert_eq!(out.norm(), 0.0);
    }

    #[test]
    fn strip_restriction_matches_gaussian_tail_quadrature() {
        // 1-D quadrature oracle for the transverse Gaussian tail mass.
        // The cut radius sits on a half-cell boundary so the node-counting
        // restriction is a midpoint rule with O(dx^2) error.
        let grid = make_grid(1, &[(64, 40.0)], &[(2048, 40.0)]).unwrap();
        let width = 1.0;
        let psi = gaussian_state(width, grid.clone());
        let dx = grid.perp_axes()[0].dx();
        let r = 51.5 * dx; // ~1.006
        let got = psi.restrict_strip(r, false).unwrap().norm_sq();

        // oracle: independent fine trapezoid of the perp factor over [-r, r],
        // times the parallel factor's total mass (= its own quadrature).
        let fine = 200_001usize;
        let h = 2.0 * r / (fine - 1) as f64;
        let perp_mass = {
            let vals: Vec<f64> = (0..fine)
                .map(|i| {
                    let x = -r + i as f64 * h;
                    let g = (std::f64::consts::PI * width * width).powf(-0.25)
                        * (-x * x / (2.0 * width * width)).exp();
                    g * g
                })
                .collect();
            let mut s = kahan_sum(vals.iter().copied()) - 0.5 * (vals[0] + vals[fine - 1]);
            s *= h;
            s
        };
        assert!(
            (got - perp_mass).abs() < 3e-5,
            "strip mass {got} vs oracle {perp_mass}"
        );
    }

    #[test]
    fn containment_radius_of_gaussian() {
        let grid = make_grid(1, &[(32, 30.0)], &[(512, 30.0)]).unwrap();
        let psi = gaussian_state(1.0, grid);
        // 95% of a 1-D Gaussian density with sigma = 1/sqrt(2) sits within 1.3859;
        // the node-counting estimator is biased low by about half a cell.
        let r95 = psi.containment_radius(0.95);
        assert!((r95 - 1.3859).abs() < 0.05, "r95 = {r95}");
    }
}
