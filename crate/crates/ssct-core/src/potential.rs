//! Potential classes: strip-supported bounded wells, transverse short-range
//! profiles, the slow-longitudinal-decay family, and random surface
//! potentials with counter-based couplings.

use std::sync::Arc;

use crate::error::{CoreError, Result};
use crate::grid::SplitGrid;
use crate::numeric::{bump, counter_uniform, log_log_fit};

#[derive(Debug, Clone)]
pub struct Potential {
    grid: Arc<SplitGrid>,
    values: Vec<f64>,
    strip_radius: Option<f64>,
    sup_bound: f64,
    /// (R, sup of |V| outside S_R) sampled at the grid's distinct perp radii.
    tail_profile: Vec<(f64, f64)>,
}

impl Potential {
    pub fn from_values(
        grid: Arc<SplitGrid>,
        values: Vec<f64>,
        strip_radius: Option<f64>,
    ) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(CoreError::Grid(format!(
                "potential sample count {} does not match grid size {}",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::Precondition(
                "non-finite potential sample".into(),
            ));
        }
        if let Some(r0) = strip_radius {
            if !(r0 > 0.0) {
                return Err(CoreError::Precondition(format!(
                    "strip radius must be positive, got {r0}"
                )));
            }
        }
        let sup_bound = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tail_profile = compute_tail_profile(&grid, &values);
        Ok(Potential {
            grid,
            values,
            strip_radius,
            sup_bound,
            tail_profile,
        })
    }

    pub fn zero(grid: Arc<SplitGrid>) -> Self {
        let n = grid.len();
        Potential::from_values(grid, vec![0.0; n], None).unwrap()
    }

    pub fn grid(&self) -> &Arc<SplitGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// sup |V|; recomputed from the samples at construction.
    pub fn sup_bound(&self) -> f64 {
        self.sup_bound
    }

    pub fn strip_radius(&self) -> Option<f64> {
        self.strip_radius
    }

    pub fn is_zero(&self) -> bool {
        self.sup_bound == 0.0
    }

    /// sup of |V| on the grid outside S_R. Exact operator norm of V chi_{S_R^c}
    /// for a multiplication operator.
    pub fn tail(&self, radius: f64) -> f64 {
        // profile holds (r_i, max of sup values at radii >= r_i); the answer
        // is that inclusive suffix max at the first grid radius > R
        let i = self.tail_profile.partition_point(|probe| probe.0 <= radius);
        if i >= self.tail_profile.len() {
            0.0
        } else {
            self.tail_profile[i].1
        }
    }

    pub fn tail_profile(&self) -> &[(f64, f64)] {
        &self.tail_profile
    }
}

/// Per distinct perp radius r_i: the max of |V| over all grid points at
/// perp radius >= r_i (inclusive suffix maximum, sorted by radius).
fn compute_tail_profile(grid: &SplitGrid, values: &[f64]) -> Vec<(f64, f64)> {
    let perp_len = grid.perp_len();
    let mut per_perp = vec![0.0f64; perp_len];
    for (flat, v) in values.iter().enumerate() {
        let b = flat % perp_len;
        per_perp[b] = per_perp[b].max(v.abs());
    }
    let mut pairs: Vec<(f64, f64)> = per_perp
        .iter()
        .enumerate()
        .map(|(b, &m)| (grid.perp_radius(b), m))
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    // merge equal radii by max
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (r, m) in pairs {
        match merged.last_mut() {
            Some(last) if last.0 == r => last.1 = last.1.max(m),
            _ => merged.push((r, m)),
        }
    }
    let mut out = vec![(0.0, 0.0); merged.len()];
    let mut running = 0.0f64;
    for i in (0..merged.len()).rev() {
        running = running.max(merged[i].1);
        out[i] = (merged[i].0, running);
    }
    out
}

/// Sample `profile` on the grid and hard-truncate outside the strip S_r0.
pub fn strip_potential(
    profile: impl Fn(&[f64], &[f64]) -> f64,
    r0: f64,
    grid: Arc<SplitGrid>,
) -> Result<Potential> {
    if !(r0 > 0.0) {
        return Err(CoreError::Precondition(format!(
            "r0 must be positive, got {r0}"
        )));
    }
    let mut values = vec![0.0; grid.len()];
    for (flat, slot) in values.iter_mut().enumerate() {
        let (a, b) = grid.split_index(flat);
        if grid.perp_radius(b) <= r0 {
            let xpar = SplitGrid::block_coords(grid.par_axes(), a);
            let xperp = SplitGrid::block_coords(grid.perp_axes(), b);
            *slot = profile(&xpar, &xperp);
        }
    }
    Potential::from_values(grid, values, Some(r0))
}

/// The square strip well of unit depth: V = -chi_{||x_perp|| <= r0}.
pub fn square_strip_well(depth: f64, r0: f64, grid: Arc<SplitGrid>) -> Result<Potential> {
    strip_potential(|_, _| -depth, r0, grid)
}

/// V(x_par = y, x_perp = x) = -<y>^(-2a) chi_{|x| < <y>^a}, the well whose
/// depth decays and width grows slowly along the surface. Requires d = 2, k = 1
/// and 0 < a < 1/2. No strip radius; the transverse tail decays like R^-2.
pub fn yafaev_potential(alpha: f64, grid: Arc<SplitGrid>) -> Result<Potential> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(CoreError::Precondition(format!(
            "alpha must lie in (0, 1/2), got {alpha}"
        )));
    }
    if grid.d() != 2 || grid.k() != 1 {
        return Err(CoreError::Precondition(
            "the slow-decay potential is defined for d = 2, k = 1".into(),
        ));
    }
    let mut values = vec![0.0; grid.len()];
    let par = &grid.par_axes()[0];
    let perp = &grid.perp_axes()[0];
    let n_perp = perp.n();
    for (flat, slot) in values.iter_mut().enumerate() {
        let y = par.x(flat / n_perp);
        let x = perp.x(flat % n_perp);
        let bracket = (1.0 + y * y).sqrt(); // <y>
        let width = bracket.powf(alpha);
        if x.abs() < width {
            *slot = -bracket.powf(-2.0 * alpha);
        }
    }
    Potential::from_values(grid, values, None)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CouplingLaw {
    /// Every coupling equals the given value in [q_min, 0].
    Constant(f64),
    /// i.i.d. uniform on [q_min, 0].
    Uniform { q_min: f64 },
}

impl CouplingLaw {
    pub fn q_min(&self) -> f64 {
        match *self {
            CouplingLaw::Constant(q) => q,
            CouplingLaw::Uniform { q_min } => q_min,
        }
    }

    pub fn describe(&self) -> String {
        match *self {
            CouplingLaw::Constant(q) => format!("constant({q})"),
            CouplingLaw::Uniform { q_min } => format!("uniform[{q_min},0]"),
        }
    }
}

/// Single-site bump profile and coupling law for the random surface
/// potential V = sum_j q_j f(x - (j, 0)) over the integer lattice in the
/// parallel block.
#[derive(Debug, Clone)]
pub struct RandomSurfaceSpec {
    /// Peak height of the single-site bump (f >= 0, f > 0 on an open set).
    pub amplitude: f64,
    /// Support radius of the single-site bump.
    pub site_radius: f64,
    pub law: CouplingLaw,
    pub seed: u64,
}

impl RandomSurfaceSpec {
    fn validate(&self, grid: &SplitGrid) -> Result<()> {
        if !(self.amplitude > 0.0 && self.site_radius > 0.0) {
            return Err(CoreError::Precondition(
                "single-site amplitude and radius must be positive".into(),
            ));
        }
        let q_min = self.law.q_min();
        if !(q_min <= 0.0) || !q_min.is_finite() {
            return Err(CoreError::Precondition(format!(
                "coupling law must live on [q_min, 0] with q_min <= 0, got {q_min}"
            )));
        }
        if let CouplingLaw::Constant(q) = self.law {
            if q > 0.0 {
                return Err(CoreError::Precondition(
                    "constant coupling must be <= 0".into(),
                ));
            }
        }
        for axis in grid.axes() {
            if 2.0 * self.site_radius >= axis.length() {
                return Err(CoreError::Precondition(format!(
                    "single-site support (radius {}) exceeds the domain (axis length {})",
                    self.site_radius,
                    axis.length()
                )));
            }
        }
        Ok(())
    }
}

/// Signed distance on the periodic axis.
fn torus_delta(x: f64, site: f64, length: f64) -> f64 {
    let mut d = x - site;
    while d > 0.5 * length {
        d -= length;
    }
    while d < -0.5 * length {
        d += length;
    }
    d
}

/// Draw one coupling for a lattice site, keyed by (seed, site index words).
fn coupling(spec: &RandomSurfaceSpec, site: &[i64]) -> f64 {
    match spec.law {
        CouplingLaw::Constant(q) => q,
        CouplingLaw::Uniform { q_min } => {
            let words: Vec<u64> = site.iter().map(|&j| j as u64).collect();
            q_min * counter_uniform(spec.seed, &words)
        }
    }
}

/// V = sum over integer lattice sites (j, 0) of q_j f(x - (j, 0)),
/// with f the radial bump amplitude * bump(dist / radius). The field is
/// <= 0 everywhere and is determined by (spec, grid) alone.
pub fn random_surface_potential(
    spec: &RandomSurfaceSpec,
    grid: Arc<SplitGrid>,
) -> Result<Potential> {
    spec.validate(&grid)?;
    let par_axes = grid.par_axes().to_vec();
    let k = grid.k();

    // integer lattice ranges per parallel axis (torus-folded translates)
    let ranges: Vec<(i64, i64)> = par_axes
        .iter()
        .map(|a| {
            let half = 0.5 * a.length();
            ((-half).ceil() as i64, (half - 1e-9).floor() as i64)
        })
        .collect();

    let mut values = vec![0.0; grid.len()];
    let perp_len = grid.perp_len();
    for (flat, slot) in values.iter_mut().enumerate() {
        let (a, b) = (flat / perp_len, flat % perp_len);
        let xpar = SplitGrid::block_coords(&par_axes, a);
        let perp_r = grid.perp_radius(b);
        if perp_r >= spec.site_radius {
            continue;
        }
        // enumerate nearby lattice sites: within site_radius of x_par per axis
        let mut acc = 0.0;
        let mut site = vec![0i64; k];
        enumerate_sites(
            &ranges,
            &par_axes,
            &xpar,
            spec.site_radius,
            &mut site,
            0,
            &mut |site| {
                let mut dist2 = perp_r * perp_r;
                for ((axis, &x), &j) in par_axes.iter().zip(&xpar).zip(site.iter()) {
                    let d = torus_delta(x, j as f64, axis.length());
                    dist2 += d * d;
                }
                let dist = dist2.sqrt();
                if dist < spec.site_radius {
                    let f = spec.amplitude * bump(dist / spec.site_radius);
                    acc += coupling(spec, site) * f;
                }
            },
        );
        *slot = acc;
    }
    Potential::from_values(grid, values, Some(spec.site_radius))
}

fn enumerate_sites(
    ranges: &[(i64, i64)],
    axes: &[crate::grid::AxisGrid],
    xpar: &[f64],
    radius: f64,
    site: &mut Vec<i64>,
    depth: usize,
    visit: &mut impl FnMut(&[i64]),
) {
    if depth == ranges.len() {
        visit(site);
        return;
    }
    let (lo, hi) = ranges[depth];
    let x = xpar[depth];
    for j in lo..=hi {
        if torus_delta(x, j as f64, axes[depth].length()).abs() < radius {
            site[depth] = j;
            enumerate_sites(ranges, axes, xpar, radius, site, depth + 1, visit);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecayVerdict {
    Integrable,
    NotIntegrable,
    Inconclusive,
}

impl DecayVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            DecayVerdict::Integrable => "integrable",
            DecayVerdict::NotIntegrable => "not integrable",
            DecayVerdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ShortRangeReport {
    /// (R, tail(R)) samples at the requested radii.
    pub samples: Vec<(f64, f64)>,
    /// Trapezoid estimate of the integral of tail(R) over the R grid.
    pub l1_estimate: f64,
    /// Power-law slope fitted over the last decade of the R grid, if the tail
    /// is nonzero there.
    pub fitted_exponent: Option<f64>,
    pub fit_residual: Option<f64>,
    pub verdict: DecayVerdict,
}

const FIT_RESIDUAL_LIMIT: f64 = 0.1;
/// Tail values below this are treated as identically zero (compact support).
const TAIL_FLOOR: f64 = 1e-300;

/// Transverse short-range check: samples tail(R) = sup |V chi_{S_R^c}|,
/// integrates it over the R grid, and fits a power law over the last decade.
/// Verdict "integrable" iff the fitted exponent is < -1 (or the tail is
/// compactly supported); "inconclusive" when the log-log fit residual
/// exceeds 0.1.
pub fn short_range_check(v: &Potential, r_grid: &[f64]) -> Result<ShortRangeReport> {
    if r_grid.len() < 4 {
        return Err(CoreError::Precondition("need at least 4 radii".into()));
    }
    if r_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CoreError::Precondition(
            "radii must be strictly increasing".into(),
        ));
    }
    let max_perp = v
        .grid()
        .perp_axes()
        .iter()
        .map(|a| 0.5 * a.length())
        .fold(f64::INFINITY, f64::min);
    if *r_grid.last().unwrap() > max_perp {
        return Err(CoreError::Precondition(format!(
            "largest radius {} exceeds the perp half-domain {max_perp}",
            r_grid.last().unwrap()
        )));
    }

    let samples: Vec<(f64, f64)> = r_grid.iter().map(|&r| (r, v.tail(r))).collect();
    let l1_estimate = {
        let mut acc = 0.0;
        for w in samples.windows(2) {
            acc += 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0);
        }
        acc
    };

    // Compactly supported tail: integrable outright.
    if samples.iter().all(|&(_, t)| t <= TAIL_FLOOR) || samples.last().unwrap().1 <= TAIL_FLOOR {
        return Ok(ShortRangeReport {
            samples,
            l1_estimate,
            fitted_exponent: None,
            fit_residual: None,
            verdict: DecayVerdict::Integrable,
        });
    }

    // Fit over the last decade of radii.
    let r_max = samples.last().unwrap().0;
    let window: Vec<(f64, f64)> = samples
        .iter()
        .copied()
        .filter(|&(r, t)| r >= r_max / 10.0 && t > TAIL_FLOOR)
        .collect();
    let ts: Vec<f64> = window.iter().map(|&(r, _)| r).collect();
    let vals: Vec<f64> = window.iter().map(|&(_, t)| t).collect();
    let fit = log_log_fit(&ts, &vals, TAIL_FLOOR);
    let (fitted_exponent, fit_residual, verdict) = match fit {
        Some((slope, rms, used)) if used >= 3 => {
            let verdict = if rms > FIT_RESIDUAL_LIMIT {
                DecayVerdict::Inconclusive
            } else if slope < -1.0 {
                DecayVerdict::Integrable
            } else {
                DecayVerdict::NotIntegrable
            };
            (Some(slope), Some(rms), verdict)
        }
        _ => (None, None, DecayVerdict::Inconclusive),
    };

    Ok(ShortRangeReport {
        samples,
        l1_estimate,
        fitted_exponent,
        fit_residual,
        verdict,
    })
}
