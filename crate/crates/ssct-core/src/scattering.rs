//! Scattering diagnostics: Cook integrands, approximate wave operators, the
//! out/in/surface decomposition, surface seminorms, state classification,
//! and transverse-width exponents.
//!
//! Every "limit in t" is reduced over a declared finite horizon with trend
//! flags; verdicts never extrapolate beyond the data.

use num_complex::Complex64;

use crate::error::{CoreError, Result};
use crate::field::WaveFunction;
use crate::frame::CoherentFrame;
use crate::numeric::{line_fit, log_log_fit};
use crate::potential::Potential;
use crate::povm;
use crate::propagate::{
    evolve_free_unguarded, evolve_full_unguarded, evolve_through, PropagatorConfig,
};
use crate::region::PhaseSpaceRegion;

/// ||V e^{-i t H0} psi||: the Cook integrand whose integrability gives the
/// wave operators.
pub fn cook_integrand(psi: &WaveFunction, v: &Potential, t: f64) -> Result<f64> {
    let cfg = PropagatorConfig::new(1.0);
    let free = crate::propagate::evolve_free_guarded(psi, t, cfg.boundary_guard)?;
    Ok(multiply_norm(v, &free))
}

fn multiply_norm(v: &Potential, psi: &WaveFunction) -> f64 {
    let s = crate::numeric::kahan_sum(
        psi.values()
            .iter()
            .zip(v.values())
            .map(|(a, &val)| val * val * a.norm_sqr()),
    ) * psi.grid().dv();
    s.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OmegaSign {
    /// Omega^-: compare against free evolution towards t -> +infinity.
    Minus,
    /// Omega^+: towards t -> -infinity.
    Plus,
}

#[derive(Debug)]
pub struct WaveOpResult {
    /// e^{i T H} e^{-i T H0} psi at the largest horizon.
    pub state: WaveFunction,
    /// (T, ||Omega_T psi - Omega_{T/2} psi||) along the doubling ladder.
    pub cauchy: Vec<(f64, f64)>,
    pub monotone: bool,
    /// Peak of ||chi_{S_{r0+2}} e^{-i t H0} psi|| over the ladder horizons:
    /// clearance of the free legs from the potential's support.
    pub clearance: f64,
}

/// Approximate wave operator on a doubling horizon ladder T/2^(rungs-1), ..., T.
///
/// The free legs may legitimately pass through the periodic boundary; the
/// relevant guard is that the free-evolved state stays clear of the
/// potential's neighborhood (reported as `clearance`), plus a flag when the
/// Cauchy increments fail to decrease.
pub fn approx_wave_operator(
    psi: &WaveFunction,
    horizon: f64,
    sign: OmegaSign,
    v: &Potential,
    cfg: &PropagatorConfig,
    rungs: usize,
) -> Result<WaveOpResult> {
    if !(horizon > 0.0) || rungs == 0 {
        return Err(CoreError::Precondition(
            "need a positive horizon and at least one rung".into(),
        ));
    }
    let clearance_radius = v.strip_radius().unwrap_or(1.0) + 2.0;
    let dir = match sign {
        OmegaSign::Minus => 1.0,
        OmegaSign::Plus => -1.0,
    };
    let mut cauchy = Vec::with_capacity(rungs);
    let mut prev: Option<WaveFunction> = None;
    let mut clearance = 0.0f64;
    let mut state = psi.clone();
    for rung in (0..rungs).rev() {
        let t = horizon / (1u64 << rung) as f64;
        let free = evolve_free_unguarded(psi, dir * t);
        clearance = clearance.max(free.strip_norm(clearance_radius));
        let out = evolve_full_unguarded(&free, -dir * t, v, cfg)?;
        if let Some(p) = &prev {
            cauchy.push((t, out.distance(p)?));
        }
        prev = Some(out.clone());
        state = out;
    }
    let monotone = cauchy.windows(2).all(|w| w[1].1 <= w[0].1);
    Ok(WaveOpResult {
        state,
        cauchy,
        monotone,
        clearance,
    })
}

#[derive(Debug)]
pub struct EnssSplit {
    pub out_part: WaveFunction,
    pub in_part: WaveFunction,
    pub sur_part: WaveFunction,
    pub n: f64,
    pub m: f64,
    pub delta: f64,
    pub t: f64,
    /// || psi_t - (out + in + sur) ||, the frame defect on this state.
    pub residual: f64,
}

/// Evolve to time t and split by the out/in/surface region POVMs on the
/// shared lattice. The three parts recombine to psi_t within the frame
/// tolerance because the regions partition the lattice exactly.
pub fn enss_decompose(
    psi: &WaveFunction,
    t: f64,
    n: f64,
    m: f64,
    frame: &CoherentFrame,
    v: &Potential,
    cfg: &PropagatorConfig,
) -> Result<EnssSplit> {
    let psi_t = if t == 0.0 {
        psi.clone()
    } else if v.is_zero() {
        crate::propagate::evolve_free_guarded(psi, t, cfg.boundary_guard)?
    } else {
        crate::propagate::evolve_full(psi, t, v, cfg)?
    };
    let out_part = povm::apply_povm(frame, &PhaseSpaceRegion::Out { n, m }, &psi_t)?;
    let in_part = povm::apply_povm(frame, &PhaseSpaceRegion::In { n, m }, &psi_t)?;
    let sur_part = povm::apply_povm(frame, &PhaseSpaceRegion::Sur { n, m }, &psi_t)?;
    let sum = out_part
        .add_scaled(&in_part, Complex64::new(1.0, 0.0))?
        .add_scaled(&sur_part, Complex64::new(1.0, 0.0))?;
    let residual = sum.distance(&psi_t)?;
    Ok(EnssSplit {
        out_part,
        in_part,
        sur_part,
        n,
        m,
        delta: frame.delta(),
        t,
        residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeminormMode {
    /// Reduce over all of t_list by the maximum.
    Sup,
    /// Reduce by the maximum over the last quartile of t_list.
    LimsupTail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trend {
    Decreasing,
    Plateaued,
    Increasing,
}

pub fn trend_of(values: &[f64]) -> Trend {
    if values.len() < 2 {
        return Trend::Plateaued;
    }
    let first = values[0];
    let last = *values.last().unwrap();
    let scale = values
        .iter()
        .fold(0.0f64, |m, &v| m.max(v.abs()))
        .max(1e-300);
    if last < first - 0.05 * scale {
        Trend::Decreasing
    } else if last > first + 0.05 * scale {
        Trend::Increasing
    } else {
        Trend::Plateaued
    }
}

impl Trend {
    pub fn as_str(&self) -> &'static str {
        match self {
            Trend::Decreasing => "decreasing",
            Trend::Plateaued => "plateaued",
            Trend::Increasing => "increasing",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SeminormTable {
    pub m: f64,
    pub deltas: Vec<f64>,
    pub ns: Vec<f64>,
    pub ts: Vec<f64>,
    /// entries[delta_idx][n_idx][t_idx] = ||P_delta(Far(n, m)) psi_t||.
    pub entries: Vec<Vec<Vec<f64>>>,
    pub mode: SeminormMode,
    /// reduced[delta_idx][n_idx]: the t-reduction of the entries.
    pub reduced: Vec<Vec<f64>>,
    /// Finite-resolution stand-in for the nested limits: the reduced value at
    /// the smallest delta and largest n.
    pub estimate: f64,
    /// Trend of the reduced values in n, per delta.
    pub n_trends: Vec<Trend>,
}

/// Table of ||P_delta(W_{n,m;far}) e^{-itH} psi|| over (delta, n, t), with the
/// declared t-reduction. One evolution pass per t; one frame per delta.
pub fn surface_seminorm(
    psi: &WaveFunction,
    m: f64,
    deltas: &[f64],
    ns: &[f64],
    ts: &[f64],
    mode: SeminormMode,
    v: &Potential,
    cfg: &PropagatorConfig,
) -> Result<SeminormTable> {
    let snapshots = evolve_through(psi, ts, v, cfg)?;
    surface_seminorm_from_snapshots(m, deltas, ns, ts, &snapshots, mode)
}

/// Seminorm table over precomputed snapshots at the times in `ts`.
pub fn surface_seminorm_from_snapshots(
    m: f64,
    deltas: &[f64],
    ns: &[f64],
    ts: &[f64],
    snapshots: &[WaveFunction],
    mode: SeminormMode,
) -> Result<SeminormTable> {
    if deltas.is_empty() || ns.is_empty() || ts.is_empty() {
        return Err(CoreError::Precondition(
            "seminorm sweeps need nonempty lists".into(),
        ));
    }
    if ns.windows(2).any(|w| w[1] <= w[0]) || ts.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CoreError::Precondition(
            "n and t lists must be strictly increasing".into(),
        ));
    }
    if snapshots.len() != ts.len() {
        return Err(CoreError::Precondition(
            "snapshot count must match t_list".into(),
        ));
    }
    let grid = snapshots[0].grid().clone();
    let frames: Vec<CoherentFrame> = deltas
        .iter()
        .map(|&d| CoherentFrame::new(grid.clone(), d))
        .collect::<Result<_>>()?;
    let mut entries = vec![vec![vec![0.0; ts.len()]; ns.len()]; deltas.len()];
    for (ti, snap) in snapshots.iter().enumerate() {
        for (di, frame) in frames.iter().enumerate() {
            for (ni, &n) in ns.iter().enumerate() {
                let region = PhaseSpaceRegion::Far { n, m };
                entries[di][ni][ti] = povm::povm_norm(frame, &region, snap)?;
            }
        }
    }
    let tail_start = match mode {
        SeminormMode::Sup => 0,
        SeminormMode::LimsupTail => ts.len() - ts.len().div_ceil(4),
    };
    let reduced: Vec<Vec<f64>> = entries
        .iter()
        .map(|per_n| {
            per_n
                .iter()
                .map(|per_t| per_t[tail_start..].iter().copied().fold(0.0, f64::max))
                .collect()
        })
        .collect();
    let estimate = reduced[deltas.len() - 1][ns.len() - 1];
    let n_trends = reduced.iter().map(|row| trend_of(row)).collect();
    Ok(SeminormTable {
        m,
        deltas: deltas.to_vec(),
        ns: ns.to_vec(),
        ts: ts.to_vec(),
        entries,
        mode,
        reduced,
        estimate,
        n_trends,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    SurfaceLike,
    ScatteringLike,
    Mixed,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::SurfaceLike => "surface-like",
            Verdict::ScatteringLike => "scattering-like",
            Verdict::Mixed => "mixed",
        }
    }
}

#[derive(Debug, Clone)]
pub struct TubeCurve {
    pub v: f64,
    pub m: f64,
    pub delta: f64,
    /// Whether m < v/16 and the block radius < m/2 both hold.
    pub hypothesis_ok: bool,
    /// (t, ||P_delta(TransverseTube(v t, m)) psi_t||)
    pub values: Vec<(f64, f64)>,
    pub trend: Trend,
}

#[derive(Debug)]
pub struct DiagnosticsReport {
    pub psi_norm: f64,
    pub v_list: Vec<f64>,
    pub t_list: Vec<f64>,
    /// surface_curves[v_idx][t_idx] = s(v, t) = ||chi_{S_{vt}} psi_t||.
    pub surface_curves: Vec<Vec<f64>>,
    pub tube_curves: Vec<TubeCurve>,
    pub verdict: Verdict,
    /// Mass fractions (surface, scattering) implied by the late-time curves.
    pub fractions: (f64, f64),
    pub epsilon: f64,
}

/// s(v,t) curves, transverse-tube POVM norms, and the
/// surface-like / scattering-like / mixed verdict.
///
/// Verdict rule: late-time values are taken over the last quartile of t_list;
/// surface-like when min over v of the late-time s(v,t)/||psi|| is at least
/// 1 - epsilon, scattering-like when some v has late-time minimum below
/// epsilon, mixed otherwise.
pub fn classify_state(
    psi: &WaveFunction,
    v_list: &[f64],
    t_list: &[f64],
    frame: &CoherentFrame,
    v: &Potential,
    cfg: &PropagatorConfig,
    epsilon: f64,
) -> Result<DiagnosticsReport> {
    let snapshots = evolve_through(psi, t_list, v, cfg)?;
    classify_from_snapshots(psi.norm(), v_list, t_list, &snapshots, frame, epsilon)
}

/// Classification over precomputed snapshots at the times in `t_list`.
pub fn classify_from_snapshots(
    norm: f64,
    v_list: &[f64],
    t_list: &[f64],
    snapshots: &[WaveFunction],
    frame: &CoherentFrame,
    epsilon: f64,
) -> Result<DiagnosticsReport> {
    if v_list.is_empty() || v_list.iter().any(|&vv| vv <= 0.0) {
        return Err(CoreError::Precondition("v_list must be positive".into()));
    }
    if t_list.len() < 2 || t_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CoreError::Precondition(
            "t_list must be increasing with at least 2 points".into(),
        ));
    }
    if snapshots.len() != t_list.len() {
        return Err(CoreError::Precondition(
            "snapshot count must match t_list".into(),
        ));
    }
    let mut surface_curves = vec![vec![0.0; t_list.len()]; v_list.len()];
    for (ti, (snap, &t)) in snapshots.iter().zip(t_list).enumerate() {
        // one cumulative transverse profile serves every v
        let profile = snap.transverse_mass_profile();
        for (vi, &vel) in v_list.iter().enumerate() {
            let radius = vel * t;
            let mass = cumulative_at(&profile, radius);
            surface_curves[vi][ti] = mass.sqrt();
        }
    }

    // tube curves: m = v/32 per velocity, frame delta as given
    let mut tube_curves = Vec::with_capacity(v_list.len());
    for &vel in v_list {
        let m = vel / 32.0;
        let hypothesis_ok = m < vel / 16.0 && frame.block_radius() < m / 2.0;
        let mut values = Vec::with_capacity(t_list.len());
        for (snap, &t) in snapshots.iter().zip(t_list) {
            let region = PhaseSpaceRegion::TransverseTube { n: vel * t, m };
            values.push((t, povm::povm_norm(frame, &region, snap)?));
        }
        let trend = trend_of(&values.iter().map(|&(_, x)| x).collect::<Vec<_>>());
        tube_curves.push(TubeCurve {
            v: vel,
            m,
            delta: frame.delta(),
            hypothesis_ok,
            values,
            trend,
        });
    }

    let tail_start = t_list.len() - t_list.len().div_ceil(4);
    let late_min_per_v: Vec<f64> = surface_curves
        .iter()
        .map(|curve| {
            curve[tail_start..]
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min)
                / norm
        })
        .collect();
    let overall_min = late_min_per_v.iter().copied().fold(f64::INFINITY, f64::min);
    let verdict = if overall_min >= 1.0 - epsilon {
        Verdict::SurfaceLike
    } else if late_min_per_v.iter().any(|&s| s <= epsilon) {
        Verdict::ScatteringLike
    } else {
        Verdict::Mixed
    };
    let surface_fraction = (overall_min * overall_min).clamp(0.0, 1.0);
    Ok(DiagnosticsReport {
        psi_norm: norm,
        v_list: v_list.to_vec(),
        t_list: t_list.to_vec(),
        surface_curves,
        tube_curves,
        verdict,
        fractions: (surface_fraction, 1.0 - surface_fraction),
        epsilon,
    })
}

fn cumulative_at(profile: &[(f64, f64)], radius: f64) -> f64 {
    // profile is sorted by radius with cumulative mass; take the last entry
    // with r <= radius
    match profile.binary_search_by(|&(r, _)| r.partial_cmp(&radius).unwrap()) {
        Ok(mut i) => {
            while i + 1 < profile.len() && profile[i + 1].0 == radius {
                i += 1;
            }
            profile[i].1
        }
        Err(0) => 0.0,
        Err(i) => profile[i - 1].1,
    }
}

#[derive(Debug, Clone)]
pub struct WidthFit {
    /// (t, R95(t)) samples.
    pub samples: Vec<(f64, f64)>,
    pub beta: f64,
    /// Two standard errors on the fitted slope.
    pub confidence: f64,
    pub residual: f64,
    /// True when the mass never spreads (slope reported as 0).
    pub degenerate: bool,
}

/// Fit of log R95 against log t from (t, state) snapshots spanning at least
/// a decade. R95 is the transverse radius containing 95% of the mass.
pub fn width_exponent(snapshots: &[(f64, WaveFunction)]) -> Result<WidthFit> {
    if snapshots.len() < 4 {
        return Err(CoreError::Precondition("need at least 4 snapshots".into()));
    }
    let t0 = snapshots.first().unwrap().0;
    let t1 = snapshots.last().unwrap().0;
    if !(t0 > 0.0) || t1 / t0 < 10.0 - 1e-9 {
        return Err(CoreError::Precondition(
            "snapshots must span at least a decade in t".into(),
        ));
    }
    let samples: Vec<(f64, f64)> = snapshots
        .iter()
        .map(|(t, psi)| (*t, psi.containment_radius(0.95)))
        .collect();
    let spread = samples.iter().map(|&(_, r)| r).fold(0.0f64, f64::max)
        - samples
            .iter()
            .map(|&(_, r)| r)
            .fold(f64::INFINITY, f64::min);
    let scale = samples.iter().map(|&(_, r)| r).fold(0.0f64, f64::max);
    if spread <= 0.02 * scale || scale == 0.0 {
        return Ok(WidthFit {
            samples,
            beta: 0.0,
            confidence: 0.0,
            residual: 0.0,
            degenerate: true,
        });
    }
    let xs: Vec<f64> = samples.iter().map(|&(t, _)| t.ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|&(_, r)| r.ln()).collect();
    let (slope, _intercept, rms, stderr) =
        line_fit(&xs, &ys).ok_or_else(|| CoreError::Precondition("degenerate width fit".into()))?;
    Ok(WidthFit {
        samples,
        beta: slope,
        confidence: 2.0 * stderr,
        residual: rms,
        degenerate: false,
    })
}

#[derive(Debug, Clone)]
pub struct DecayFit {
    pub samples: Vec<(f64, f64)>,
    pub slope: f64,
    pub residual: f64,
    pub points_used: usize,
    /// True when values at or below the double-precision floor truncated the
    /// fit window.
    pub floor_truncated: bool,
}

pub const DECAY_FLOOR: f64 = 1e-14;

/// Free-propagation decay probe: r(t) = ||chi_region e^{-itH0} u|| for a
/// band-limited state whose transverse Fourier support avoids B_alpha,
/// fitted in log-log over the times beyond the cone time r0 / (2 alpha).
pub fn free_decay_probe(
    u: &WaveFunction,
    strip_radius: f64,
    alpha: f64,
    times: &[f64],
) -> Result<DecayFit> {
    if !(alpha > 0.0) {
        return Err(CoreError::Precondition("alpha must be positive".into()));
    }
    if u.perp_fourier_mass_inside(alpha) > 1e-12 {
        return Err(CoreError::Precondition(format!(
            "state has transverse Fourier mass inside B_{alpha}; not in the D_alpha class"
        )));
    }
    let cone_time = strip_radius / (2.0 * alpha);
    let kept: Vec<f64> = times.iter().copied().filter(|&t| t > cone_time).collect();
    if kept.len() < 3 {
        return Err(CoreError::Precondition(format!(
            "need at least 3 sample times beyond the cone time {cone_time:.3}"
        )));
    }
    let mut samples = Vec::with_capacity(kept.len());
    for &t in &kept {
        let free = crate::propagate::evolve_free_guarded(u, t, 1e-6)?;
        samples.push((t, free.strip_norm(strip_radius)));
    }
    decay_fit_from_samples(samples)
}

/// Cook-integrand decay fit over the given times (all beyond the cone time).
pub fn cook_decay_fit(psi: &WaveFunction, v: &Potential, times: &[f64]) -> Result<DecayFit> {
    let mut samples = Vec::with_capacity(times.len());
    for &t in times {
        samples.push((t, cook_integrand(psi, v, t)?));
    }
    decay_fit_from_samples(samples)
}

fn decay_fit_from_samples(samples: Vec<(f64, f64)>) -> Result<DecayFit> {
    let floor_truncated = samples.iter().any(|&(_, r)| r < DECAY_FLOOR);
    let ts: Vec<f64> = samples.iter().map(|&(t, _)| t).collect();
    let vals: Vec<f64> = samples.iter().map(|&(_, r)| r).collect();
    let (slope, residual, points_used) = log_log_fit(&ts, &vals, DECAY_FLOOR)
        .ok_or_else(|| CoreError::Precondition("decay fit needs two usable points".into()))?;
    Ok(DecayFit {
        samples,
        slope,
        residual,
        points_used,
        floor_truncated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::potential::{square_strip_well, Potential};
    use crate::scenario::band_limited_packet;
    use std::sync::Arc;

    fn test_grid() -> Arc<crate::grid::SplitGrid> {
        make_grid(1, &[(256, 160.0)], &[(256, 160.0)]).unwrap()
    }

    #[test]
    fn cook_integrand_zero_cases() {
        let grid = test_grid();
        let psi = band_limited_packet(&grid, &[0.0, 0.0], &[0.3, 1.75], &[0.7, 0.7]).unwrap();
        let zero = Potential::zero(grid.clone());
        assert_eq!(cook_integrand(&psi, &zero, 1.7).unwrap(), 0.0);

        // state supported outside the strip at t = 0
        let well = square_strip_well(1.0, 1.0, grid.clone()).unwrap();
        let far_state = psi.restrict_strip(3.0, true).unwrap();
        assert_eq!(cook_integrand(&far_state, &well, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn wave_operator_is_identity_for_free_dynamics() {
        let grid = test_grid();
        let psi = band_limited_packet(&grid, &[0.0, 0.0], &[0.3, 1.4], &[0.5, 0.4]).unwrap();
        let zero = Potential::zero(grid.clone());
        let cfg = PropagatorConfig::auto(&grid, None);
        let res = approx_wave_operator(&psi, 4.0, OmegaSign::Minus, &zero, &cfg, 3).unwrap();
        assert!(res.state.distance(&psi).unwrap() < 1e-10);
        assert!(res.cauchy.iter().all(|&(_, inc)| inc < 1e-10));
    }

    #[test]
    fn wave_operator_is_isometric() {
        let grid = test_grid();
        let psi = band_limited_packet(&grid, &[0.0, 0.0], &[0.3, 1.6], &[0.5, 0.4]).unwrap();
        let well = square_strip_well(1.0, 1.0, grid.clone()).unwrap();
        let cfg = PropagatorConfig::new(0.02);
        let res = approx_wave_operator(&psi, 8.0, OmegaSign::Minus, &well, &cfg, 4).unwrap();
        assert!((res.state.norm() - psi.norm()).abs() < 1e-9);
    }

    #[test]
    fn enss_split_of_a_bound_tensor_is_surface_dominated() {
        // spatially confined state: the far mass vanishes as n grows, so the
        // surface part carries essentially everything. The fine transverse
        // axis keeps the bound state's polynomial Fourier tail clear of the
        // frame's Nyquist margin.
        let grid = make_grid(1, &[(128, 100.0)], &[(1024, 200.0)]).unwrap();
        let psi =
            crate::scenario::bound_tensor_state(&grid, 1.0, 1.0, &[0.0], &[0.4], &[0.5]).unwrap();
        let well = square_strip_well(1.0, 1.0, grid.clone()).unwrap();
        let frame = CoherentFrame::new(grid.clone(), 0.25).unwrap();
        let cfg = PropagatorConfig::auto(&grid, Some(&well));
        let split = enss_decompose(&psi, 0.0, 20.0, 0.5, &frame, &well, &cfg).unwrap();
        assert!(
            split.sur_part.norm() >= 0.99,
            "sur part {}",
            split.sur_part.norm()
        );
        assert!(split.residual <= 1e-6);
    }

    #[test]
    fn enss_split_of_a_far_outgoing_packet_is_out_dominated() {
        // packet far outside the strip with <x_perp, p_perp> > 0 pointwise:
        // the out part dominates and the out/in parts are near-orthogonal
        // (the overlap is limited by the window tails at this separation)
        let grid = make_grid(1, &[(128, 100.0)], &[(512, 200.0)]).unwrap();
        let psi = dalpha_like_packet(&grid, 60.0);
        let zero = Potential::zero(grid.clone());
        let frame = CoherentFrame::new(grid.clone(), 0.5).unwrap();
        let cfg = PropagatorConfig::auto(&grid, None);
        let split = enss_decompose(&psi, 0.0, 8.0, 0.5, &frame, &zero, &cfg).unwrap();
        assert!(
            split.out_part.norm() >= 0.9,
            "out part {}",
            split.out_part.norm()
        );
        let ortho = split.out_part.inner(&split.in_part).unwrap().norm();
        assert!(ortho <= 1e-3, "out/in overlap {ortho}");
    }

    fn dalpha_like_packet(grid: &Arc<crate::grid::SplitGrid>, x_perp: f64) -> WaveFunction {
        band_limited_packet(grid, &[0.0, x_perp], &[0.0, 1.55], &[0.5, 0.5]).unwrap()
    }

    #[test]
    fn classify_verdicts_free_packet_as_scattering() {
        let grid = make_grid(1, &[(256, 160.0)], &[(256, 200.0)]).unwrap();
        let psi = band_limited_packet(&grid, &[0.0, 0.0], &[0.0, 1.7], &[0.7, 0.6]).unwrap();
        let zero = Potential::zero(grid.clone());
        let frame = CoherentFrame::new(grid.clone(), 0.5).unwrap();
        let cfg = PropagatorConfig::auto(&grid, None);
        let report = classify_state(
            &psi,
            &[0.5, 1.0],
            &[2.0, 3.5, 5.0, 7.0],
            &frame,
            &zero,
            &cfg,
            0.05,
        )
        .unwrap();
        assert_eq!(report.verdict, Verdict::ScatteringLike);
        // s(v, t) stays within [0, ||psi||] and is pythagorean with its complement
        for curve in &report.surface_curves {
            for &s in curve {
                assert!(s >= 0.0 && s <= report.psi_norm + 1e-12);
            }
        }
    }

    #[test]
    fn width_exponent_free_gaussian_is_ballistic() {
        let grid = make_grid(1, &[(32, 60.0)], &[(512, 400.0)]).unwrap();
        let width = 2.0;
        let norm = (std::f64::consts::PI * width * width).powf(-0.25) / (60.0f64).sqrt();
        let psi = WaveFunction::from_fn(grid.clone(), |_, xq| {
            Complex64::new(norm * (-xq[0] * xq[0] / (2.0 * width * width)).exp(), 0.0)
        })
        .unwrap()
        .normalized()
        .unwrap();
        let mut snaps = Vec::new();
        for &t in &[3.0, 6.0, 12.0, 24.0, 36.0] {
            snaps.push((t, evolve_free_unguarded(&psi, t)));
        }
        let fit = width_exponent(&snaps).unwrap();
        assert!(!fit.degenerate);
        assert!(
            (fit.beta - 1.0).abs() < 0.1,
            "ballistic exponent {}",
            fit.beta
        );
        // oracle cross-check at one time: closed-form width of the free
        // Gaussian, sigma(t) = sqrt(w^2 + 4 t^2 / w^2), 95% radius 1.96 sigma/sqrt(2)
        let t = 24.0;
        let sigma_t = (width * width + 4.0 * t * t / (width * width)).sqrt();
        let expected = 1.959964 * sigma_t / 2f64.sqrt();
        let got = snaps[3].1.containment_radius(0.95);
        assert!(
            (got - expected).abs() < 0.05 * expected,
            "R95 {got} vs exact {expected}"
        );
    }

    #[test]
    fn width_exponent_degenerate_for_stationary_profile() {
        let grid = make_grid(1, &[(32, 60.0)], &[(128, 60.0)]).unwrap();
        let psi = povm::probe_state(&grid, 23).unwrap();
        let snaps: Vec<(f64, WaveFunction)> = [1.0, 3.0, 6.0, 12.0]
            .iter()
            .map(|&t| (t, psi.clone()))
            .collect();
        let fit = width_exponent(&snaps).unwrap();
        assert!(fit.degenerate);
        assert_eq!(fit.beta, 0.0);
    }

    #[test]
    fn free_decay_probe_rejects_states_violating_the_band_condition() {
        let grid = test_grid();
        // probe state has perp Fourier mass near zero momentum
        let psi = povm::probe_state(&grid, 5).unwrap();
        assert!(free_decay_probe(&psi, 1.0, 1.0, &[2.0, 4.0, 8.0]).is_err());
    }

    #[test]
    fn free_decay_probe_sees_superpolynomial_decay() {
        let grid = make_grid(1, &[(128, 200.0)], &[(1024, 400.0)]).unwrap();
        let psi = band_limited_packet(&grid, &[0.3, 0.0], &[0.0, 4.0], &[0.7, 2.8]).unwrap();
        let times = [0.2, 2.0, 2.83, 4.0, 5.66, 8.0, 11.3];
        let fit = free_decay_probe(&psi, 1.0, 1.0, &times).unwrap();
        // the t = 0.2 point sits inside the cone and must be excluded
        assert_eq!(fit.samples.len(), 6);
        assert!(fit.slope <= -3.0, "slope {}", fit.slope);
    }
}
