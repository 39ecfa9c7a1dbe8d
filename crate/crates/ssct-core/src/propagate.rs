//! Time evolution under H0 = -laplacian and H = H0 + V.
//!
//! The free propagator is a one-shot Fourier multiplier (exact and unitary).
//! The interacting propagator is Strang splitting
//!   e^{-i dt V/2} e^{-i dt H0} e^{-i dt V/2}
//! with merged half-kicks between substeps; the kinetic factor is applied in
//! momentum space, so every factor is unimodular and the scheme is unitary by
//! construction. The convention H0 = -laplacian gives group velocity 2 p.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{CoreError, Result};
use crate::fft;
use crate::field::WaveFunction;
use crate::grid::SplitGrid;
use crate::numeric::kahan_sum;
use crate::potential::Potential;

pub const DEFAULT_BOUNDARY_GUARD: f64 = 1e-6;
/// Outer shell monitored by the boundary guard, as a fraction of each axis.
pub const GUARD_SHELL: f64 = 0.05;
const MAX_STEPS: u64 = 100_000_000;

#[derive(Debug, Clone, Copy)]
pub struct PropagatorConfig {
    /// Substep for the Strang splitting.
    pub dt: f64,
    /// Mass fraction allowed in the outer shell before the guard trips.
    pub boundary_guard: f64,
}

impl PropagatorConfig {
    pub fn new(dt: f64) -> Self {
        PropagatorConfig {
            dt,
            boundary_guard: DEFAULT_BOUNDARY_GUARD,
        }
    }

    /// dt * M <= 0.1 (potential phase per substep small) and
    /// dt * p_max^2 <= pi (kinetic phase resolvable).
    pub fn validate(&self, grid: &SplitGrid, v: Option<&Potential>) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(CoreError::Precondition(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        let p_max_sq: f64 = grid.axes().iter().map(|a| a.p_max() * a.p_max()).sum();
        if self.dt * p_max_sq > std::f64::consts::PI {
            return Err(CoreError::Precondition(format!(
                "dt = {} too large: dt * p_max^2 = {:.3} exceeds pi",
                self.dt,
                self.dt * p_max_sq
            )));
        }
        if let Some(v) = v {
            if self.dt * v.sup_bound() > 0.1 {
                return Err(CoreError::Precondition(format!(
                    "dt = {} too large: dt * sup|V| = {:.3} exceeds 0.1",
                    self.dt,
                    self.dt * v.sup_bound()
                )));
            }
        }
        Ok(())
    }

    /// Largest power-of-two fraction of 1 that satisfies both validity bounds.
    pub fn auto(grid: &SplitGrid, v: Option<&Potential>) -> Self {
        let p_max_sq: f64 = grid.axes().iter().map(|a| a.p_max() * a.p_max()).sum();
        let mut limit = std::f64::consts::PI / p_max_sq;
        if let Some(v) = v {
            if v.sup_bound() > 0.0 {
                limit = limit.min(0.1 / v.sup_bound());
            }
        }
        let mut dt = 1.0;
        while dt > limit {
            dt *= 0.5;
        }
        PropagatorConfig::new(dt)
    }
}

fn check_guard(psi: &WaveFunction, limit: f64) -> Result<()> {
    let frac = psi.boundary_shell_fraction(GUARD_SHELL);
    if frac > limit {
        return Err(CoreError::BoundaryGuard {
            mass: frac,
            shell_fraction: GUARD_SHELL * 100.0,
            limit,
        });
    }
    Ok(())
}

/// ||p||^2 for every raw momentum bin, in grid layout.
fn kinetic_table(grid: &SplitGrid) -> Vec<f64> {
    let dims = grid.dims();
    let axes = grid.axes();
    let d = dims.len();
    let inner = dims[d - 1];
    let mut out = vec![0.0f64; grid.len()];
    out.par_chunks_exact_mut(inner)
        .enumerate()
        .for_each(|(row, chunk)| {
            let mut rem = row;
            let mut outer_p2 = 0.0;
            for pos in (0..d - 1).rev() {
                let j = rem % dims[pos];
                rem /= dims[pos];
                let p = axes[pos].p(j);
                outer_p2 += p * p;
            }
            for (j, slot) in chunk.iter_mut().enumerate() {
                let p = axes[d - 1].p(j);
                *slot = outer_p2 + p * p;
            }
        });
    out
}

/// Exact free evolution by the Fourier multiplier e^{-i t ||p||^2}.
pub fn evolve_free(psi: &WaveFunction, t: f64) -> Result<WaveFunction> {
    evolve_free_guarded(psi, t, DEFAULT_BOUNDARY_GUARD)
}

pub fn evolve_free_guarded(psi: &WaveFunction, t: f64, guard: f64) -> Result<WaveFunction> {
    let out = evolve_free_unguarded(psi, t);
    check_guard(&out, guard)?;
    Ok(out)
}

/// Free evolution without the wrap-around guard. Callers that intentionally
/// move mass through the periodic boundary (wave-operator legs) must enforce
/// their own clearance condition.
pub fn evolve_free_unguarded(psi: &WaveFunction, t: f64) -> WaveFunction {
    if t == 0.0 {
        return psi.clone();
    }
    let grid = psi.grid().clone();
    let dims = grid.dims();
    let mut hat = psi.values().to_vec();
    fft::fft_nd(&mut hat, &dims, true);
    let p2 = kinetic_table(&grid);
    let inv_n = 1.0 / grid.len() as f64;
    hat.par_iter_mut().zip(p2.par_iter()).for_each(|(v, &p2)| {
        *v *= Complex64::from_polar(inv_n, -t * p2);
    });
    fft::fft_nd(&mut hat, &dims, false);
    WaveFunction::new(grid, hat).expect("unitary evolution preserves finiteness")
}

/// Strang-split evolution under H = H0 + V for time `t` (either sign).
pub fn evolve_full(
    psi: &WaveFunction,
    t: f64,
    v: &Potential,
    cfg: &PropagatorConfig,
) -> Result<WaveFunction> {
    let out = evolve_full_unguarded(psi, t, v, cfg)?;
    check_guard(&out, cfg.boundary_guard)?;
    Ok(out)
}

pub fn evolve_full_unguarded(
    psi: &WaveFunction,
    t: f64,
    v: &Potential,
    cfg: &PropagatorConfig,
) -> Result<WaveFunction> {
    cfg.validate(psi.grid(), Some(v))?;
    if !psi.grid().grids_match(v.grid()) {
        return Err(CoreError::Grid(
            "potential and state live on different grids".into(),
        ));
    }
    if t == 0.0 {
        return Ok(psi.clone());
    }
    let steps_f = (t.abs() / cfg.dt).ceil();
    if steps_f > MAX_STEPS as f64 {
        return Err(CoreError::Precondition(format!(
            "step count {steps_f:.0} exceeds the {MAX_STEPS} limit"
        )));
    }
    let steps = steps_f as u64;
    let dt = t / steps as f64; // exact division; |dt| <= cfg.dt

    let grid = psi.grid().clone();
    let dims = grid.dims();
    let n_total = grid.len();
    let inv_n = 1.0 / n_total as f64;

    // phase tables
    let p2 = kinetic_table(&grid);
    let kinetic: Vec<Complex64> = p2
        .par_iter()
        .map(|&p2| Complex64::from_polar(inv_n, -dt * p2))
        .collect();
    let half_kick: Vec<Complex64> = v
        .values()
        .par_iter()
        .map(|&val| Complex64::from_polar(1.0, -0.5 * dt * val))
        .collect();
    let full_kick: Vec<Complex64> = v
        .values()
        .par_iter()
        .map(|&val| Complex64::from_polar(1.0, -dt * val))
        .collect();

    let mut values = psi.values().to_vec();
    let apply = |values: &mut Vec<Complex64>, table: &[Complex64]| {
        values
            .par_iter_mut()
            .zip(table.par_iter())
            .for_each(|(v, m)| *v *= m);
    };

    apply(&mut values, &half_kick);
    for step in 0..steps {
        fft::fft_nd(&mut values, &dims, true);
        apply(&mut values, &kinetic);
        fft::fft_nd(&mut values, &dims, false);
        if step + 1 < steps {
            apply(&mut values, &full_kick);
        }
    }
    apply(&mut values, &half_kick);

    WaveFunction::new(grid, values)
}

/// Evolve through an increasing list of times, returning the state at each.
/// One continuous evolution; each leg reuses the previous checkpoint.
pub fn evolve_through(
    psi: &WaveFunction,
    times: &[f64],
    v: &Potential,
    cfg: &PropagatorConfig,
) -> Result<Vec<WaveFunction>> {
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CoreError::Precondition(
            "times must be strictly increasing".into(),
        ));
    }
    if times.first().is_some_and(|&t| t < 0.0) {
        return Err(CoreError::Precondition("times must be nonnegative".into()));
    }
    let mut out = Vec::with_capacity(times.len());
    let mut current = psi.clone();
    let mut t_now = 0.0;
    for &t in times {
        if t > t_now {
            current = if v.is_zero() {
                evolve_free_unguarded(&current, t - t_now)
            } else {
                evolve_full_unguarded(&current, t - t_now, v, cfg)?
            };
            t_now = t;
        }
        check_guard(&current, cfg.boundary_guard)?;
        out.push(current.clone());
    }
    Ok(out)
}

/// <psi, H psi> = sum ||p||^2 |psi_hat|^2 dv_p + sum V |psi|^2 dv.
pub fn energy(psi: &WaveFunction, v: Option<&Potential>) -> f64 {
    let hat = psi.to_momentum();
    let p2 = kinetic_table(psi.grid());
    let kinetic =
        kahan_sum(hat.iter().zip(p2.iter()).map(|(a, &p2)| p2 * a.norm_sqr())) * psi.grid().dv_p();
    let potential = match v {
        Some(v) => {
            kahan_sum(
                psi.values()
                    .iter()
                    .zip(v.values())
                    .map(|(a, &val)| val * a.norm_sqr()),
            ) * psi.grid().dv()
        }
        None => 0.0,
    };
    kinetic + potential
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::potential::{square_strip_well, strip_potential, Potential};
    use std::sync::Arc;

    /// Normalized Gaussian packet with center momentum, sampled on the grid.
    fn gaussian_packet(
        grid: Arc<SplitGrid>,
        width: f64,
        center: &[f64],
        momentum: &[f64],
    ) -> WaveFunction {
        let d = grid.d() as f64;
        let norm = (std::f64::consts::PI * width * width).powf(-d / 4.0);
        WaveFunction::from_fn(grid, |xp, xq| {
            let coords: Vec<f64> = xp.iter().chain(xq.iter()).copied().collect();
            let mut r2 = 0.0;
            let mut phase = 0.0;
            for (i, &c) in coords.iter().enumerate() {
                let dc = c - center[i];
                r2 += dc * dc;
                phase += momentum[i] * c;
            }
            Complex64::from_polar(norm * (-r2 / (2.0 * width * width)).exp(), phase)
        })
        .unwrap()
    }

    /// Closed-form free Gaussian evolution for H0 = -laplacian (1-D factors).
    fn free_gaussian_exact(
        grid: &Arc<SplitGrid>,
        width: f64,
        center: &[f64],
        momentum: &[f64],
        t: f64,
    ) -> WaveFunction {
        let a2 = width * width;
        let d = grid.d() as f64;
        let norm = (std::f64::consts::PI * a2).powf(-d / 4.0);
        let denom = Complex64::new(1.0, 2.0 * t / a2);
        WaveFunction::from_fn(grid.clone(), |xp, xq| {
            let coords: Vec<f64> = xp.iter().chain(xq.iter()).copied().collect();
            let mut out = Complex64::new(norm, 0.0);
            for (i, &c) in coords.iter().enumerate() {
                let p0 = momentum[i];
                let dc = c - center[i] - 2.0 * p0 * t;
                // e^{i p0 (x - p0 t)} * exp(-(x-x0-2p0t)^2 / (2a^2 (1+2it/a^2))) / sqrt(1+2it/a^2)
                let gauss = (-Complex64::new(dc * dc, 0.0) / (2.0 * a2 * denom)).exp();
                let phase = Complex64::from_polar(1.0, p0 * c - p0 * p0 * t);
                out *= gauss * phase / denom.sqrt();
            }
            out
        })
        .unwrap()
    }

    fn grid_2d() -> Arc<SplitGrid> {
        // dx ~ 0.47 keeps width-1 packets with |p| ~ 1 far from the Nyquist bin
        make_grid(1, &[(128, 60.0)], &[(128, 60.0)]).unwrap()
    }

    #[test]
    fn free_t0_is_identity() {
        let grid = grid_2d();
        let psi = gaussian_packet(grid, 1.5, &[0.0, 0.0], &[0.5, -0.3]);
        let out = evolve_free(&psi, 0.0).unwrap();
        assert_eq!(psi.values(), out.values());
    }

    #[test]
    fn free_gaussian_matches_closed_form() {
        let grid = grid_2d();
        let (c, p) = ([-5.0, 2.0], [0.8, -0.5]);
        let psi = gaussian_packet(grid.clone(), 1.5, &c, &p);
        for t in [0.7, 2.5] {
            let got = evolve_free(&psi, t).unwrap();
            let exact = free_gaussian_exact(&grid, 1.5, &c, &p, t);
            let err = got.distance(&exact).unwrap();
            assert!(err < 1e-9, "t = {t}: deviation {err}");
            // center moved to x0 + 2 p0 t: checked implicitly by the field match
        }
    }

    #[test]
    fn free_norm_preserved_and_group_law() {
        let grid = grid_2d();
        let psi = gaussian_packet(grid, 1.0, &[0.0, -3.0], &[0.4, 0.9]);
        let a = evolve_free(&psi, 1.3).unwrap();
        assert!((a.norm() - psi.norm()).abs() < 1e-12);
        let b = evolve_free(&a, 0.9).unwrap();
        let direct = evolve_free(&psi, 2.2).unwrap();
        assert!(b.distance(&direct).unwrap() < 1e-12);
    }

    #[test]
    fn full_with_zero_potential_matches_free() {
        let grid = grid_2d();
        let psi = gaussian_packet(grid.clone(), 1.2, &[0.0, -4.0], &[0.0, 1.0]);
        let v = Potential::zero(grid.clone());
        let cfg = PropagatorConfig::auto(&grid, Some(&v));
        let full = evolve_full(&psi, 1.5, &v, &cfg).unwrap();
        let free = evolve_free(&psi, 1.5).unwrap();
        assert!(full.distance(&free).unwrap() < 1e-10);
    }

    #[test]
    fn full_norm_preserved_and_group_law() {
        let grid = grid_2d();
        let psi = gaussian_packet(grid.clone(), 1.2, &[0.0, -6.0], &[0.0, 0.8]);
        let v = square_strip_well(1.0, 1.0, grid.clone()).unwrap();
        let cfg = PropagatorConfig::new(0.01);
        let out = evolve_full(&psi, 3.0, &v, &cfg).unwrap();
        assert!((out.norm() - psi.norm()).abs() < 1e-10);
        // group law under concatenation
        let half = evolve_full(&psi, 1.5, &v, &cfg).unwrap();
        let two = evolve_full(&half, 1.5, &v, &cfg).unwrap();
        assert!(two.distance(&out).unwrap() < 1e-9);
    }

    #[test]
    fn strang_is_second_order() {
        // Richardson self-convergence triple on a smooth potential.
        let grid = make_grid(1, &[(32, 40.0)], &[(64, 40.0)]).unwrap();
        let psi = gaussian_packet(grid.clone(), 1.5, &[0.0, -3.0], &[0.0, 0.6]);
        let smooth = strip_potential(
            |_, xq| -0.8 * (-(xq[0] * xq[0]) / 2.0).exp(),
            6.0,
            grid.clone(),
        )
        .unwrap();
        let t = 1.0;
        let run = |dt: f64| evolve_full(&psi, t, &smooth, &PropagatorConfig::new(dt)).unwrap();
        let coarse = run(0.02);
        let mid = run(0.01);
        let fine = run(0.0025); // reference
        let e1 = coarse.distance(&fine).unwrap();
        let e2 = mid.distance(&fine).unwrap();
        let order = (e1 / e2).log2();
        assert!((order - 2.0).abs() < 0.1, "observed order {order}");
    }

    #[test]
    fn energy_constant_along_smooth_evolution() {
        let grid = make_grid(1, &[(32, 40.0)], &[(64, 40.0)]).unwrap();
        let psi = gaussian_packet(grid.clone(), 1.5, &[0.0, -2.0], &[0.0, 0.5]);
        let smooth = strip_potential(
            |_, xq| -0.8 * (-(xq[0] * xq[0]) / 2.0).exp(),
            6.0,
            grid.clone(),
        )
        .unwrap();
        let cfg = PropagatorConfig::new(0.002);
        let e0 = energy(&psi, Some(&smooth));
        let mut worst: f64 = 0.0;
        for &t in &[0.5, 1.0, 2.0] {
            let psi_t = evolve_full(&psi, t, &smooth, &cfg).unwrap();
            let e = energy(&psi_t, Some(&smooth));
            worst = worst.max(((e - e0) / e0).abs());
        }
        assert!(worst < 1e-6, "energy drift {worst}");
    }

    #[test]
    fn eigenstate_tensor_marginal_is_time_invariant() {
        // separable potential: transverse bound state x free longitudinal wave;
        // the transverse marginal must not move. Full check lives in the
        // scenario suite; this is the small-grid version.
        let grid = make_grid(1, &[(128, 60.0)], &[(128, 60.0)]).unwrap();
        let v = square_strip_well(1.0, 1.0, grid.clone()).unwrap();
        let bound = crate::bound::bound_state_1d(
            |x| if x.abs() <= 1.0 { -1.0 } else { 0.0 },
            &grid.perp_axes()[0],
        )
        .unwrap();
        let phi0 = bound.values_complex();
        let par = grid.par_axes()[0].clone();
        let n_perp = grid.perp_len();
        let mut values = vec![Complex64::default(); grid.len()];
        // longitudinal Gaussian packet moving along the surface
        for (flat, slot) in values.iter_mut().enumerate() {
            let (a, b) = (flat / n_perp, flat % n_perp);
            let y = par.x(a);
            let pack = Complex64::from_polar(
                (std::f64::consts::PI).powf(-0.25) * (-(y + 5.0) * (y + 5.0) / 2.0).exp(),
                0.6 * y,
            );
            *slot = pack * phi0[b];
        }
        let psi = WaveFunction::new(grid.clone(), values)
            .unwrap()
            .normalized()
            .unwrap();
        let cfg = PropagatorConfig::new(0.005);
        let before = psi.restrict_strip(4.0, true).unwrap().norm();
        let after = evolve_full(&psi, 3.0, &v, &cfg)
            .unwrap()
            .restrict_strip(4.0, true)
            .unwrap()
            .norm();
        assert!(
            (before - after).abs() < 1e-6,
            "tail norm moved: {before} -> {after}"
        );
    }

    #[test]
    fn guard_trips_on_wraparound() {
        let grid = make_grid(1, &[(16, 10.0)], &[(64, 20.0)]).unwrap();
        // fast packet: leaves the box quickly
        let psi = gaussian_packet(grid, 1.0, &[0.0, 0.0], &[0.0, 3.0]);
        let err = evolve_free(&psi, 4.0).unwrap_err();
        assert!(matches!(err, CoreError::BoundaryGuard { .. }));
    }

    #[test]
    fn config_invariants_enforced() {
        let grid = grid_2d();
        let v = square_strip_well(5.0, 1.0, grid.clone()).unwrap();
        // dt * M > 0.1
        assert!(PropagatorConfig::new(0.03)
            .validate(&grid, Some(&v))
            .is_err());
        // dt * p_max^2 > pi
        assert!(PropagatorConfig::new(0.9).validate(&grid, None).is_err());
        let auto = PropagatorConfig::auto(&grid, Some(&v));
        assert!(auto.validate(&grid, Some(&v)).is_ok());
    }
}
