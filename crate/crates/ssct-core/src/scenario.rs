//! Reproducible experiment scenarios: grid/potential/state recipes, canned
//! presets, and a runner that executes a diagnostic plan, writes the report
//! directory, and evaluates the embedded checks.
//!
//! Everything is driven by the flat config format; the builtin presets are
//! config texts and run through exactly the same path as user files.

use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;

use crate::bound::bound_state_1d;
use crate::config::RawConfig;
use crate::error::{CoreError, Result};
use crate::fft;
use crate::field::WaveFunction;
use crate::frame::CoherentFrame;
use crate::grid::{make_grid, SplitGrid};
use crate::io::{fmt_f64, CsvWriter};
use crate::numeric::bump;
use crate::potential::{
    random_surface_potential, square_strip_well, strip_potential, yafaev_potential, CouplingLaw,
    Potential, RandomSurfaceSpec,
};
use crate::povm;
use crate::propagate::{evolve_through, PropagatorConfig};
use crate::region::PhaseSpaceRegion;
use crate::scattering::{
    self, classify_from_snapshots, cook_decay_fit, enss_decompose, surface_seminorm_from_snapshots,
    width_exponent, OmegaSign, SeminormMode,
};
use crate::yafaev::YafaevComparison;

/// Band-limited packet: per-axis bump momentum profiles centered at
/// `p_center` with half-widths `p_halfwidth`, positioned at `center`.
/// Exactly band-limited on the grid, unit norm.
pub fn band_limited_packet(
    grid: &Arc<SplitGrid>,
    center: &[f64],
    p_center: &[f64],
    p_halfwidth: &[f64],
) -> Result<WaveFunction> {
    let d = grid.d();
    if center.len() != d || p_center.len() != d || p_halfwidth.len() != d {
        return Err(CoreError::Precondition(format!(
            "need {d} coordinates per argument"
        )));
    }
    let axes = grid.axes();
    for (pos, axis) in axes.iter().enumerate() {
        if !(p_halfwidth[pos] > 0.0) {
            return Err(CoreError::Precondition(
                "momentum half-widths must be positive".into(),
            ));
        }
        if p_center[pos].abs() + p_halfwidth[pos] >= axis.p_max() {
            return Err(CoreError::Precondition(format!(
                "momentum support exceeds the Nyquist bound on axis {pos}"
            )));
        }
    }
    let dims = grid.dims();
    let mut hat = vec![Complex64::default(); grid.len()];
    for (flat, slot) in hat.iter_mut().enumerate() {
        let mut rem = flat;
        let mut amp = 1.0;
        let mut phase = 0.0;
        for pos in (0..d).rev() {
            let j = rem % dims[pos];
            rem /= dims[pos];
            let p = axes[pos].p(j);
            amp *= bump((p - p_center[pos]) / p_halfwidth[pos]);
            phase -= p * center[pos];
        }
        if amp > 0.0 {
            *slot = Complex64::from_polar(amp, phase);
        }
    }
    let values = fft::from_momentum(grid, &hat);
    WaveFunction::new(grid.clone(), values)?.normalized()
}

/// Packet in the D_alpha class: validates that the transverse Fourier
/// support avoids the closed ball B_alpha.
pub fn dalpha_packet(
    grid: &Arc<SplitGrid>,
    center: &[f64],
    p_center: &[f64],
    p_halfwidth: &[f64],
    alpha: f64,
) -> Result<WaveFunction> {
    let psi = band_limited_packet(grid, center, p_center, p_halfwidth)?;
    let inside = psi.perp_fourier_mass_inside(alpha);
    if inside > 1e-12 {
        return Err(CoreError::Precondition(format!(
            "packet has transverse Fourier mass {inside:.3e} inside B_{alpha}"
        )));
    }
    Ok(psi)
}

/// Transverse bound state of the square well (depth, radius) tensored with
/// a longitudinal band-limited packet.
pub fn bound_tensor_state(
    grid: &Arc<SplitGrid>,
    well_depth: f64,
    well_radius: f64,
    par_center: &[f64],
    par_p: &[f64],
    par_halfwidth: &[f64],
) -> Result<WaveFunction> {
    if grid.d() - grid.k() != 1 {
        return Err(CoreError::Precondition(
            "bound-tensor states need a one-dimensional transverse block".into(),
        ));
    }
    let perp_axis = &grid.perp_axes()[0];
    let bound = bound_state_1d(
        |x| {
            if x.abs() <= well_radius {
                -well_depth
            } else {
                0.0
            }
        },
        perp_axis,
    )?;
    let phi0 = bound.values_complex();

    // longitudinal packet on a parallel-only auxiliary grid of the same axes
    let k = grid.k();
    let par_axes = grid.par_axes();
    let par_dims: Vec<usize> = par_axes.iter().map(|a| a.n()).collect();
    let par_len: usize = par_dims.iter().product();
    let mut hat = vec![Complex64::default(); par_len];
    for (flat, slot) in hat.iter_mut().enumerate() {
        let mut rem = flat;
        let mut amp = 1.0;
        let mut phase = 0.0;
        for pos in (0..k).rev() {
            let j = rem % par_dims[pos];
            rem /= par_dims[pos];
            let p = par_axes[pos].p(j);
            amp *= bump((p - par_p[pos]) / par_halfwidth[pos]);
            phase -= p * par_center[pos];
        }
        if amp > 0.0 {
            *slot = Complex64::from_polar(amp, phase);
        }
    }
    // inverse transform on the parallel block only
    let mut pack = hat;
    apply_block_parity(&mut pack, &par_dims);
    fft::fft_nd(&mut pack, &par_dims, false);

    let q = grid.perp_len();
    let mut values = vec![Complex64::default(); grid.len()];
    for (flat, slot) in values.iter_mut().enumerate() {
        *slot = pack[flat / q] * phi0[flat % q];
    }
    WaveFunction::new(grid.clone(), values)?.normalized()
}

fn apply_block_parity(values: &mut [Complex64], dims: &[usize]) {
    for (flat, v) in values.iter_mut().enumerate() {
        let mut rem = flat;
        let mut parity = 0usize;
        for pos in (0..dims.len()).rev() {
            parity += rem % dims[pos];
            rem /= dims[pos];
        }
        if parity % 2 == 1 {
            *v = -*v;
        }
    }
}

/// Ground-state projector by normalized imaginary-time stepping; a cheap
/// qualitative low-energy probe, not an eigensolver.
pub fn imaginary_time_ground(
    grid: &Arc<SplitGrid>,
    v: &Potential,
    tau: f64,
    steps: usize,
    seed: u64,
) -> Result<WaveFunction> {
    let mut state = povm::probe_state(grid, seed)?;
    let dims = grid.dims();
    let n_total = grid.len();
    let axes = grid.axes();
    let kinetic: Vec<f64> = (0..n_total)
        .map(|flat| {
            let mut rem = flat;
            let mut p2 = 0.0;
            for pos in (0..dims.len()).rev() {
                let j = rem % dims[pos];
                rem /= dims[pos];
                let p = axes[pos].p(j);
                p2 += p * p;
            }
            (-tau * p2).exp() / n_total as f64
        })
        .collect();
    let kick: Vec<f64> = v
        .values()
        .iter()
        .map(|&val| (-0.5 * tau * val).exp())
        .collect();
    let mut values = state.values().to_vec();
    for _ in 0..steps {
        for (x, &k) in values.iter_mut().zip(&kick) {
            *x *= k;
        }
        fft::fft_nd(&mut values, &dims, true);
        for (x, &k) in values.iter_mut().zip(&kinetic) {
            *x *= k;
        }
        fft::fft_nd(&mut values, &dims, false);
        for (x, &k) in values.iter_mut().zip(&kick) {
            *x *= k;
        }
        let nm =
            (crate::numeric::kahan_sum(values.iter().map(|x| x.norm_sqr())) * grid.dv()).sqrt();
        for x in values.iter_mut() {
            *x /= nm;
        }
    }
    state = WaveFunction::new(grid.clone(), values)?;
    Ok(state)
}

/// Evolve the configured state to the horizon, writing checkpoints in the
/// binary snapshot format every `snapshot_every` substeps plus a propagation
/// manifest with (t, norm, energy, boundary mass) rows.
pub fn propagate_run(raw: &RawConfig, out_dir: &Path) -> Result<()> {
    let grid = build_grid(raw)?;
    let potential = build_potential(raw, &grid)?;
    let psi = build_state(raw, &grid)?;
    let cfg = build_cfg(raw, &grid, &potential)?;
    let horizon = raw.f64_or("run", "horizon", 8.0)?;
    let every = raw.u64_or("run", "snapshot_every", 0)? as usize;
    let total_steps = (horizon / cfg.dt).ceil() as usize;
    let chunk = if every == 0 { total_steps } else { every };

    std::fs::create_dir_all(out_dir)?;
    let snap_dir = out_dir.join("snapshots");
    std::fs::create_dir_all(&snap_dir)?;
    let mut csv = CsvWriter::create(
        &out_dir.join("propagation.csv"),
        &[],
        &["t", "norm", "energy", "boundary_mass"],
    )?;
    let log = |csv: &mut CsvWriter, t: f64, state: &WaveFunction| -> Result<()> {
        csv.row_f64(&[
            t,
            state.norm(),
            crate::propagate::energy(state, Some(&potential)),
            state.boundary_shell_fraction(crate::propagate::GUARD_SHELL),
        ])
    };
    let mut state = psi;
    let mut step = 0usize;
    log(&mut csv, 0.0, &state)?;
    crate::io::write_wavefunction(&snap_dir.join("000000.ssct"), &state)?;
    while step < total_steps {
        let advance = chunk.min(total_steps - step);
        // advance by whole substeps; the last chunk lands exactly on the horizon
        let t_target = ((step + advance) as f64 / total_steps as f64) * horizon;
        let t_now = (step as f64 / total_steps as f64) * horizon;
        state = if potential.is_zero() {
            crate::propagate::evolve_free_guarded(&state, t_target - t_now, cfg.boundary_guard)?
        } else {
            crate::propagate::evolve_full(&state, t_target - t_now, &potential, &cfg)?
        };
        step += advance;
        log(&mut csv, t_target, &state)?;
        crate::io::write_wavefunction(&snap_dir.join(format!("{step:06}.ssct")), &state)?;
    }
    csv.finish()?;
    crate::io::write_marginals(out_dir, "final", &state)?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub details: String,
}

#[derive(Debug)]
pub struct ScenarioOutcome {
    pub name: String,
    pub checks: Vec<CheckResult>,
}

impl ScenarioOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub raw: RawConfig,
}

pub const PRESET_NAMES: &[&str] = &[
    "separable",
    "free",
    "mixed",
    "cook",
    "enss",
    "yafaev_a20",
    "yafaev_a25",
    "yafaev_a40",
    "tube",
    "random",
    "periodic",
];

impl Scenario {
    pub fn preset(name: &str) -> Result<Scenario> {
        let text = preset_text(name)
            .ok_or_else(|| CoreError::Config(format!("unknown scenario preset '{name}'")))?;
        Ok(Scenario {
            name: name.to_string(),
            raw: RawConfig::parse(text).expect("builtin preset must parse"),
        })
    }

    /// Load from a config file; a `preset` key in [scenario] starts from that
    /// preset and applies the file as overrides.
    pub fn from_file(path: &Path) -> Result<Scenario> {
        let user = RawConfig::load(path)?;
        let name = user
            .str_or(
                "scenario",
                "name",
                &path
                    .file_stem()
                    .map(|s| s.to_string_lossy().to_string())
                    .unwrap_or_else(|| "custom".into()),
            )
            .to_string();
        let raw = match user.get("scenario", "preset") {
            Some(preset) => {
                let mut base = Scenario::preset(preset)?.raw;
                base.merge_over(&user);
                base
            }
            None => user,
        };
        Ok(Scenario { name, raw })
    }

    pub fn dump(&self) -> String {
        self.raw.dump()
    }
}

pub fn preset_text(name: &str) -> Option<&'static str> {
    Some(match name {
        "separable" => PRESET_SEPARABLE,
        "free" => PRESET_FREE,
        "mixed" => PRESET_MIXED,
        "cook" => PRESET_COOK,
        "enss" => PRESET_ENSS,
        "yafaev_a20" => PRESET_YAFAEV_A20,
        "yafaev_a25" => PRESET_YAFAEV_A25,
        "yafaev_a40" => PRESET_YAFAEV_A40,
        "tube" => PRESET_TUBE,
        "random" => PRESET_RANDOM,
        "periodic" => PRESET_PERIODIC,
        _ => return None,
    })
}

pub fn build_grid(raw: &RawConfig) -> Result<Arc<SplitGrid>> {
    let k = raw.u64_or("grid", "k", 1)? as usize;
    let par = raw.axes("grid", "par", &[(512, 200.0)])?;
    let perp = raw.axes("grid", "perp", &[(512, 200.0)])?;
    make_grid(k, &par, &perp)
}

pub fn build_potential(raw: &RawConfig, grid: &Arc<SplitGrid>) -> Result<Potential> {
    match raw.str_or("potential", "kind", "zero") {
        "zero" => Ok(Potential::zero(grid.clone())),
        "strip_well" => {
            let depth = raw.f64_or("potential", "depth", 1.0)?;
            let r0 = raw.f64_or("potential", "r0", 1.0)?;
            square_strip_well(depth, r0, grid.clone())
        }
        "yafaev" => {
            let alpha = raw.f64_req("potential", "alpha")?;
            yafaev_potential(alpha, grid.clone())
        }
        "random_surface" => {
            let spec = RandomSurfaceSpec {
                amplitude: raw.f64_or("potential", "amplitude", 1.0)?,
                site_radius: raw.f64_or("potential", "site_radius", 0.45)?,
                law: match raw.str_or("potential", "law", "uniform") {
                    "uniform" => CouplingLaw::Uniform {
                        q_min: raw.f64_or("potential", "q_min", -1.0)?,
                    },
                    "constant" => CouplingLaw::Constant(raw.f64_or("potential", "q", -1.0)?),
                    other => {
                        return Err(CoreError::Config(format!("unknown coupling law '{other}'")))
                    }
                },
                seed: raw.u64_or("potential", "seed", 1)?,
            };
            random_surface_potential(&spec, grid.clone())
        }
        "periodic_strip" => {
            // smooth transverse profile: hard strip edges scatter enough
            // near-Nyquist mass under evolution to break frame coverage
            let depth = raw.f64_or("potential", "depth", 1.0)?;
            let r0 = raw.f64_or("potential", "r0", 1.0)?;
            let period = raw.f64_or("potential", "period", 4.0)?;
            let omega = 2.0 * std::f64::consts::PI / period;
            strip_potential(
                move |xpar, xperp| {
                    let radial: f64 = xperp.iter().map(|c| c * c).sum::<f64>().sqrt();
                    -0.5 * depth * (1.0 + (omega * xpar[0]).cos()) * bump(radial / r0)
                },
                r0,
                grid.clone(),
            )
        }
        other => Err(CoreError::Config(format!(
            "unknown potential kind '{other}'"
        ))),
    }
}

fn packet_from_config(raw: &RawConfig, grid: &Arc<SplitGrid>) -> Result<WaveFunction> {
    if grid.d() != 2 || grid.k() != 1 {
        return Err(CoreError::Config(
            "config-driven packet states are defined for d = 2, k = 1".into(),
        ));
    }
    let center = [
        raw.f64_or("state", "par_center", 0.0)?,
        raw.f64_or("state", "perp_center", 0.0)?,
    ];
    let p_center = [
        raw.f64_or("state", "par_p", 0.0)?,
        raw.f64_or("state", "perp_p", 1.3)?,
    ];
    let width = [
        raw.f64_or("state", "par_width", 0.25)?,
        raw.f64_or("state", "perp_width", 0.25)?,
    ];
    match raw.f64_opt("state", "alpha")? {
        Some(alpha) => dalpha_packet(grid, &center, &p_center, &width, alpha),
        None => band_limited_packet(grid, &center, &p_center, &width),
    }
}

fn bound_tensor_from_config(raw: &RawConfig, grid: &Arc<SplitGrid>) -> Result<WaveFunction> {
    bound_tensor_state(
        grid,
        raw.f64_or("state", "bound_depth", 1.0)?,
        raw.f64_or("state", "bound_radius", 1.0)?,
        &[raw.f64_or("state", "par_center", 0.0)?],
        &[raw.f64_or("state", "par_p", 0.4)?],
        &[raw.f64_or("state", "par_width", 0.2)?],
    )
}

pub fn build_state(raw: &RawConfig, grid: &Arc<SplitGrid>) -> Result<WaveFunction> {
    match raw.str_or("state", "kind", "packet") {
        "packet" => packet_from_config(raw, grid),
        "bound_tensor" => bound_tensor_from_config(raw, grid),
        "superposition" => {
            // bound tensor plus a packet with mirrored longitudinal momentum:
            // disjoint longitudinal momentum supports make the parts exactly
            // orthogonal, so mass fractions are additive.
            let weight = raw.f64_or("state", "weight", std::f64::consts::FRAC_1_SQRT_2)?;
            let surface = bound_tensor_from_config(raw, grid)?;
            let mut packet_cfg = raw.clone();
            packet_cfg.merge_over(&RawConfig::parse(&format!(
                "[state]\npar_p = {}\n",
                -raw.f64_or("state", "par_p", 0.4)?
            ))?);
            let packet = packet_from_config(&packet_cfg, grid)?;
            let combined = surface
                .scaled(Complex64::new(weight, 0.0))
                .add_scaled(&packet, Complex64::new((1.0 - weight * weight).sqrt(), 0.0))?;
            combined.normalized()
        }
        other => Err(CoreError::Config(format!("unknown state kind '{other}'"))),
    }
}

fn build_cfg(raw: &RawConfig, grid: &Arc<SplitGrid>, v: &Potential) -> Result<PropagatorConfig> {
    let mut cfg = match raw.f64_opt("run", "dt")? {
        Some(dt) => PropagatorConfig::new(dt),
        None => PropagatorConfig::auto(grid, Some(v)),
    };
    cfg.boundary_guard = raw.f64_or(
        "run",
        "boundary_guard",
        crate::propagate::DEFAULT_BOUNDARY_GUARD,
    )?;
    cfg.validate(grid, Some(v))?;
    Ok(cfg)
}

struct Reporter<'a> {
    dir: &'a Path,
    manifest: Vec<String>,
}

impl<'a> Reporter<'a> {
    fn new(dir: &'a Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Reporter {
            dir,
            manifest: Vec::new(),
        })
    }

    fn note(&mut self, key: &str, value: impl std::fmt::Display) {
        self.manifest.push(format!("{key} = {value}"));
    }

    fn csv(&self, name: &str, header: &[&str]) -> Result<CsvWriter> {
        CsvWriter::create(&self.dir.join(name), &[], header)
    }

    fn finish(self, name: &str, checks: &[CheckResult]) -> Result<()> {
        let mut lines = vec![format!("scenario = {name}")];
        lines.extend(self.manifest);
        for check in checks {
            lines.push(format!(
                "check.{} = {} ({})",
                check.name,
                if check.passed { "pass" } else { "FAIL" },
                check.details
            ));
        }
        std::fs::write(self.dir.join("manifest.txt"), lines.join("\n") + "\n")?;
        Ok(())
    }
}

fn check(checks: &mut Vec<CheckResult>, name: &str, passed: bool, details: String) {
    checks.push(CheckResult {
        name: name.to_string(),
        passed,
        details,
    });
}

/// Execute the scenario plan, write the report directory, and evaluate the
/// embedded checks. Fully deterministic given the config.
pub fn run_scenario(scenario: &Scenario, out_dir: &Path) -> Result<ScenarioOutcome> {
    let raw = &scenario.raw;
    let mut reporter = Reporter::new(out_dir)?;
    let mut checks: Vec<CheckResult> = Vec::new();

    let steps: Vec<String> = raw
        .str_or("plan", "steps", "classify")
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();

    let grid = build_grid(raw)?;
    let potential = build_potential(raw, &grid)?;
    reporter.note(
        "grid",
        format!("d={} k={} dims={:?}", grid.d(), grid.k(), grid.dims()),
    );
    reporter.note("potential.kind", raw.str_or("potential", "kind", "zero"));
    reporter.note("potential.sup_bound", fmt_f64(potential.sup_bound()));

    let state_kind = raw.str_or("state", "kind", "packet").to_string();
    let needs_state = steps.iter().any(|s| match s.as_str() {
        "yafaev" | "random_checks" => false,
        "width" => state_kind != "yafaev_comparison",
        _ => true,
    });
    let state = if needs_state {
        Some(build_state(raw, &grid)?)
    } else {
        None
    };
    let cfg = build_cfg(raw, &grid, &potential)?;
    reporter.note("run.dt", fmt_f64(cfg.dt));

    let t_list = raw.f64_list("run", "t_list", &[2.0, 4.0, 6.0, 8.0])?;
    let v_list = raw.f64_list("run", "v_list", &[0.5, 1.0])?;
    let epsilon = raw.f64_or("run", "epsilon", 0.05)?;

    // shared snapshots for classify / seminorm / invariance
    let wants_snapshots = steps
        .iter()
        .any(|s| matches!(s.as_str(), "classify" | "seminorm" | "invariance"));
    let snapshots = if wants_snapshots {
        let psi = state.as_ref().expect("plan needs a state");
        Some(evolve_through(psi, &t_list, &potential, &cfg)?)
    } else {
        None
    };

    let frame_delta = raw.f64_or("frame", "delta", 0.25)?;
    let mut frame_cache: Option<CoherentFrame> = None;
    let mut get_frame = |grid: &Arc<SplitGrid>| -> Result<CoherentFrame> {
        if frame_cache.is_none() {
            frame_cache = Some(CoherentFrame::new(grid.clone(), frame_delta)?);
        }
        Ok(frame_cache.as_ref().unwrap().clone())
    };

    for step in &steps {
        match step.as_str() {
            "classify" => {
                let psi = state.as_ref().unwrap();
                let frame = get_frame(&grid)?;
                reporter.note(
                    "frame.certified_tolerance",
                    fmt_f64(frame.certified_tolerance()),
                );
                let report = classify_from_snapshots(
                    psi.norm(),
                    &v_list,
                    &t_list,
                    snapshots.as_ref().unwrap(),
                    &frame,
                    epsilon,
                )?;
                let mut csv = reporter.csv("surface_curves.csv", &["v", "t", "s"])?;
                for (vi, &vel) in report.v_list.iter().enumerate() {
                    for (ti, &t) in report.t_list.iter().enumerate() {
                        csv.row_f64(&[vel, t, report.surface_curves[vi][ti]])?;
                    }
                }
                csv.finish()?;
                let mut tube_csv = reporter.csv(
                    "tube.csv",
                    &["v", "m", "delta", "t", "value", "hypothesis_ok"],
                )?;
                for curve in &report.tube_curves {
                    for &(t, value) in &curve.values {
                        tube_csv.row(&[
                            fmt_f64(curve.v),
                            fmt_f64(curve.m),
                            fmt_f64(curve.delta),
                            fmt_f64(t),
                            fmt_f64(value),
                            format!("{}", curve.hypothesis_ok),
                        ])?;
                    }
                }
                tube_csv.finish()?;
                reporter.note("classify.verdict", report.verdict.as_str());
                reporter.note("classify.fraction_surface", fmt_f64(report.fractions.0));
                if let Some(expected) = raw.get("checks", "verdict") {
                    let got = report.verdict.as_str();
                    check(
                        &mut checks,
                        "verdict",
                        got == expected,
                        format!("{got} (want {expected})"),
                    );
                }
                if let Some(frac) = raw.f64_opt("checks", "fraction_surface")? {
                    let tol = raw.f64_or("checks", "fraction_tol", 0.05)?;
                    let got = report.fractions.0;
                    check(
                        &mut checks,
                        "fractions",
                        (got - frac).abs() <= tol,
                        format!("surface fraction {got:.4} (want {frac} +- {tol})"),
                    );
                }
            }
            "seminorm" => {
                let psi = state.as_ref().unwrap();
                let m = raw.f64_or("run", "m", 0.5)?;
                let deltas = raw.f64_list("run", "delta_list", &[1.0, 0.5, 0.25])?;
                let ns = raw.f64_list("run", "n_list", &[8.0, 20.0, 48.0])?;
                let mode = match raw.str_or("run", "mode", "sup") {
                    "sup" => SeminormMode::Sup,
                    "limsup_tail" => SeminormMode::LimsupTail,
                    other => return Err(CoreError::Config(format!("unknown mode '{other}'"))),
                };
                let table = surface_seminorm_from_snapshots(
                    m,
                    &deltas,
                    &ns,
                    &t_list,
                    snapshots.as_ref().unwrap(),
                    mode,
                )?;
                let mut csv = reporter.csv("seminorms.csv", &["delta", "n", "t", "value"])?;
                for (di, &d) in table.deltas.iter().enumerate() {
                    for (ni, &n) in table.ns.iter().enumerate() {
                        for (ti, &t) in table.ts.iter().enumerate() {
                            csv.row_f64(&[d, n, t, table.entries[di][ni][ti]])?;
                        }
                    }
                }
                csv.finish()?;
                let mut red =
                    reporter.csv("seminorm_reduced.csv", &["delta", "n", "value", "n_trend"])?;
                for (di, &d) in table.deltas.iter().enumerate() {
                    for (ni, &n) in table.ns.iter().enumerate() {
                        red.row(&[
                            fmt_f64(d),
                            fmt_f64(n),
                            fmt_f64(table.reduced[di][ni]),
                            table.n_trends[di].as_str().to_string(),
                        ])?;
                    }
                }
                red.finish()?;
                reporter.note("seminorm.estimate", fmt_f64(table.estimate));
                reporter.note("seminorm.norm", fmt_f64(psi.norm()));
                if let Some(max) = raw.f64_opt("checks", "seminorm_estimate_max")? {
                    check(
                        &mut checks,
                        "seminorm_estimate_max",
                        table.estimate <= max,
                        format!("estimate {:.4e} (limit {max})", table.estimate),
                    );
                }
                if let Some(min) = raw.f64_opt("checks", "seminorm_estimate_min")? {
                    check(
                        &mut checks,
                        "seminorm_estimate_min",
                        table.estimate >= min,
                        format!("estimate {:.4} (floor {min})", table.estimate),
                    );
                }
            }
            "invariance" => {
                // The separable dynamics factorizes exactly, including the
                // Strang scheme: chi_{S_n^c} tail norms depend on the
                // transverse factor alone. Running the same scheme on the
                // 1-D transverse factor lets the substep go fine enough that
                // the scheme's own edge radiation (proportional to dt^2)
                // drops below the invariance tolerance; a consistency check
                // at the shared dt ties the factorized run to the 2-D
                // snapshots.
                let radii = raw.f64_list("plan", "invariance_radii", &[8.0, 20.0, 48.0])?;
                let dt_inv = raw.f64_or("plan", "invariance_dt", cfg.dt / 16.0)?;
                let psi = state.as_ref().unwrap();
                let depth = raw.f64_or("state", "bound_depth", 1.0)?;
                let radius0 = raw.f64_or("state", "bound_radius", 1.0)?;
                let perp_axis = grid.perp_axes()[0].clone();
                let bound = bound_state_1d(
                    |x| if x.abs() <= radius0 { -depth } else { 0.0 },
                    &perp_axis,
                )?;
                let tails_at = |dt: f64, ts: &[f64]| -> Result<Vec<Vec<f64>>> {
                    let profiles =
                        evolve_separable_factor(&bound, &perp_axis, depth, radius0, dt, ts);
                    Ok(profiles
                        .iter()
                        .map(|prof| {
                            radii
                                .iter()
                                .map(|&n| {
                                    let mass: f64 = prof
                                        .iter()
                                        .enumerate()
                                        .filter(|&(i, _)| perp_axis.x(i).abs() > n)
                                        .map(|(_, v)| v.norm_sqr())
                                        .sum();
                                    (mass * perp_axis.dx()).sqrt()
                                })
                                .collect()
                        })
                        .collect())
                };
                let fine = tails_at(dt_inv, &t_list)?;
                let mut csv = reporter.csv("invariance.csv", &["n", "t", "tail_norm"])?;
                let mut worst = 0.0f64;
                for (ni, &n) in radii.iter().enumerate() {
                    let values: Vec<f64> = fine.iter().map(|row| row[ni]).collect();
                    for (ti, &t) in t_list.iter().enumerate() {
                        csv.row_f64(&[n, t, values[ti]])?;
                    }
                    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = values.iter().copied().fold(0.0f64, f64::max);
                    worst = worst.max(hi - lo);
                }
                csv.finish()?;
                // consistency: the factorized run at the 2-D substep must
                // reproduce the 2-D snapshot's tail norm
                let shared = tails_at(cfg.dt, &[*t_list.last().unwrap()])?;
                let snap = snapshots.as_ref().unwrap().last().unwrap();
                let direct = snap.restrict_strip(radii[0], true)?.norm() / psi.norm();
                let factorized = shared[0][0];
                let consistency = (direct - factorized).abs();
                reporter.note("invariance.max_variation", fmt_f64(worst));
                reporter.note("invariance.consistency", fmt_f64(consistency));
                if let Some(max) = raw.f64_opt("checks", "invariance_max")? {
                    check(
                        &mut checks,
                        "invariance",
                        worst <= max,
                        format!("max tail-norm variation {worst:.3e} (limit {max:.0e})"),
                    );
                    check(
                        &mut checks,
                        "invariance_consistency",
                        consistency <= 1e-8,
                        format!("factorized vs 2-D tail norm gap {consistency:.3e} (limit 1e-8)"),
                    );
                }
            }
            "cook" => {
                let psi = state.as_ref().unwrap();
                let times = raw.f64_list(
                    "plan",
                    "cook_times",
                    &[2.0, 2.83, 4.0, 5.66, 8.0, 11.31, 16.0, 20.0],
                )?;
                let fit = cook_decay_fit(psi, &potential, &times)?;
                let mut csv = reporter.csv("cook_tail.csv", &["t", "value"])?;
                for &(t, r) in &fit.samples {
                    csv.row_f64(&[t, r])?;
                }
                csv.finish()?;
                reporter.note("cook.slope", fmt_f64(fit.slope));
                reporter.note("cook.residual", fmt_f64(fit.residual));
                reporter.note("cook.floor_truncated", fit.floor_truncated);
                if let Some(max) = raw.f64_opt("checks", "cook_slope_max")? {
                    check(
                        &mut checks,
                        "cook_slope",
                        fit.slope <= max,
                        format!("fitted slope {:.2} (limit {max})", fit.slope),
                    );
                }
            }
            "wave_op" => {
                let psi = state.as_ref().unwrap();
                let horizon = raw.f64_or("plan", "wave_horizon", 40.0)?;
                let rungs = raw.u64_or("plan", "wave_rungs", 5)? as usize;
                let res = scattering::approx_wave_operator(
                    psi,
                    horizon,
                    OmegaSign::Minus,
                    &potential,
                    &cfg,
                    rungs,
                )?;
                let mut csv = reporter.csv("cauchy.csv", &["t", "increment"])?;
                for &(t, inc) in &res.cauchy {
                    csv.row_f64(&[t, inc])?;
                }
                csv.finish()?;
                let isometry = (res.state.norm() - psi.norm()).abs();
                reporter.note("wave_op.isometry_defect", fmt_f64(isometry));
                reporter.note("wave_op.clearance", fmt_f64(res.clearance));
                reporter.note("wave_op.monotone", res.monotone);
                check(
                    &mut checks,
                    "wave_op_isometry",
                    isometry <= 1e-9,
                    format!("|norm drift| {isometry:.3e} (limit 1e-9)"),
                );
                if raw.bool_or("checks", "cauchy_monotone", false)? {
                    check(
                        &mut checks,
                        "cauchy_monotone",
                        res.monotone,
                        format!(
                            "increments {:?}",
                            res.cauchy.iter().map(|&(_, i)| i).collect::<Vec<_>>()
                        ),
                    );
                }
                if let Some(max) = raw.f64_opt("checks", "cauchy_final_max")? {
                    let last = res.cauchy.last().map(|&(_, i)| i).unwrap_or(f64::INFINITY);
                    check(
                        &mut checks,
                        "cauchy_final",
                        last <= max * psi.norm(),
                        format!("final increment {last:.3e} (limit {max:.0e})"),
                    );
                }
            }
            "orthogonality" => {
                // surface state against the approximate Omega^- range state
                let surface = bound_tensor_state(
                    &grid,
                    raw.f64_or("plan", "orth_bound_depth", 1.0)?,
                    raw.f64_or("plan", "orth_bound_radius", 1.0)?,
                    &[raw.f64_or("plan", "orth_par_center", 0.0)?],
                    &[raw.f64_or("plan", "orth_par_p", 0.4)?],
                    &[raw.f64_or("plan", "orth_par_width", 0.2)?],
                )?;
                let packet = state.as_ref().unwrap();
                let horizon = raw.f64_or("plan", "orth_horizon", 40.0)?;
                let res = scattering::approx_wave_operator(
                    packet,
                    horizon,
                    OmegaSign::Minus,
                    &potential,
                    &cfg,
                    1,
                )?;
                let overlap =
                    surface.inner(&res.state)?.norm() / (surface.norm() * res.state.norm());
                reporter.note("orthogonality.overlap", fmt_f64(overlap));
                if let Some(max) = raw.f64_opt("checks", "overlap_max")? {
                    check(
                        &mut checks,
                        "orthogonality",
                        overlap <= max,
                        format!("|<surface, omega packet>| = {overlap:.3e} (limit {max})"),
                    );
                }
            }
            "enss" => {
                let psi = state.as_ref().unwrap();
                let frame = get_frame(&grid)?;
                let n = raw.f64_or("plan", "enss_n", 4.0)?;
                let m = raw.f64_or("plan", "enss_m", 0.5)?;
                let ts = raw.f64_list("plan", "enss_t", &[0.0, 2.0, 4.0, 6.0, 8.0])?;
                let mut csv = reporter.csv(
                    "enss.csv",
                    &["t", "out", "in", "sur", "residual", "ortho_out_in"],
                )?;
                let mut first_in = None;
                let mut last_in = 0.0;
                let mut worst_residual = 0.0f64;
                for &t in &ts {
                    let split = enss_decompose(psi, t, n, m, &frame, &potential, &cfg)?;
                    let ortho = split.out_part.inner(&split.in_part)?.norm();
                    csv.row_f64(&[
                        t,
                        split.out_part.norm(),
                        split.in_part.norm(),
                        split.sur_part.norm(),
                        split.residual,
                        ortho,
                    ])?;
                    if first_in.is_none() {
                        first_in = Some(split.in_part.norm());
                    }
                    last_in = split.in_part.norm();
                    worst_residual = worst_residual.max(split.residual);
                }
                csv.finish()?;
                let first_in = first_in.unwrap_or(0.0);
                reporter.note("enss.in_first", fmt_f64(first_in));
                reporter.note("enss.in_last", fmt_f64(last_in));
                reporter.note("enss.worst_residual", fmt_f64(worst_residual));
                if let Some(ratio) = raw.f64_opt("checks", "enss_in_ratio_max")? {
                    let got = last_in / first_in.max(1e-300);
                    check(
                        &mut checks,
                        "enss_in_decay",
                        got <= ratio,
                        format!(
                            "in-part {first_in:.4} -> {last_in:.4} (ratio {got:.3}, limit {ratio})"
                        ),
                    );
                }
                if let Some(max) = raw.f64_opt("checks", "enss_residual_max")? {
                    check(
                        &mut checks,
                        "enss_recombination",
                        worst_residual <= max * psi.norm(),
                        format!("worst residual {worst_residual:.3e} (limit {max:.0e})"),
                    );
                }
            }
            "width" => {
                let times = raw.f64_list("plan", "width_times", &[4.0, 8.0, 16.0, 32.0, 40.0])?;
                let snaps = width_snapshots(raw, &grid, state.as_ref(), &potential, &cfg, &times)?;
                let fit = width_exponent(&snaps)?;
                let mut csv = reporter.csv("width.csv", &["t", "r95"])?;
                for &(t, r) in &fit.samples {
                    csv.row_f64(&[t, r])?;
                }
                csv.finish()?;
                reporter.note("width.beta", fmt_f64(fit.beta));
                reporter.note("width.confidence", fmt_f64(fit.confidence));
                reporter.note("width.degenerate", fit.degenerate);
                if let Some(beta) = raw.f64_opt("checks", "width_beta")? {
                    let tol = raw.f64_or("checks", "width_beta_tol", 0.1)?;
                    check(
                        &mut checks,
                        "width_exponent",
                        (fit.beta - beta).abs() <= tol,
                        format!("beta {:.3} (want {beta} +- {tol})", fit.beta),
                    );
                }
            }
            "yafaev" => {
                run_yafaev_step(raw, &mut reporter, &mut checks)?;
            }
            "tube" => {
                let psi = state.as_ref().unwrap();
                let frame = get_frame(&grid)?;
                let v = raw.f64_or("plan", "tube_v", 1.0)?;
                let m = raw.f64_or("plan", "tube_m", 1.0 / 32.0)?;
                let ts = raw.f64_list("plan", "tube_t", &[200.0, 400.0, 800.0, 1600.0, 3200.0])?;
                let snaps = evolve_through(psi, &ts, &potential, &cfg)?;
                let hypothesis_ok = m < v / 16.0 && frame.block_radius() < m / 2.0;
                let mut csv = reporter.csv(
                    "tube.csv",
                    &["v", "m", "delta", "t", "value", "hypothesis_ok"],
                )?;
                let mut values = Vec::new();
                for (snap, &t) in snaps.iter().zip(&ts) {
                    let region = PhaseSpaceRegion::TransverseTube { n: v * t, m };
                    let value = povm::povm_norm(&frame, &region, snap)?;
                    csv.row(&[
                        fmt_f64(v),
                        fmt_f64(m),
                        fmt_f64(frame.delta()),
                        fmt_f64(t),
                        fmt_f64(value),
                        format!("{hypothesis_ok}"),
                    ])?;
                    values.push(value);
                }
                csv.finish()?;
                let first = values.first().copied().unwrap_or(0.0);
                let last = values.last().copied().unwrap_or(0.0);
                reporter.note("tube.first", fmt_f64(first));
                reporter.note("tube.last", fmt_f64(last));
                reporter.note("tube.hypothesis_ok", hypothesis_ok);
                if let Some(min) = raw.f64_opt("checks", "tube_decay_min")? {
                    let ratio = first / last.max(1e-300);
                    check(
                        &mut checks,
                        "tube_decay",
                        ratio >= min,
                        format!(
                            "tube norm {first:.4} -> {last:.4e} (ratio {ratio:.1}, need >= {min})"
                        ),
                    );
                }
            }
            "random_checks" => {
                run_random_checks(raw, &grid, &potential, &mut reporter, &mut checks)?;
            }
            other => {
                return Err(CoreError::Config(format!("unknown plan step '{other}'")));
            }
        }
    }

    reporter.finish(&scenario.name, &checks)?;
    Ok(ScenarioOutcome {
        name: scenario.name.clone(),
        checks,
    })
}

/// Evolve the 1-D transverse bound profile with the same Strang scheme the
/// 2-D propagator uses, returning the profile at each requested time.
fn evolve_separable_factor(
    bound: &crate::bound::BoundState1D,
    axis: &crate::grid::AxisGrid,
    depth: f64,
    radius0: f64,
    dt: f64,
    times: &[f64],
) -> Vec<Vec<Complex64>> {
    let n = axis.n();
    let p2: Vec<f64> = (0..n).map(|j| axis.p(j) * axis.p(j)).collect();
    let v: Vec<f64> = (0..n)
        .map(|i| {
            if axis.x(i).abs() <= radius0 {
                -depth
            } else {
                0.0
            }
        })
        .collect();
    let mut state = bound.values_complex();
    let mut out = Vec::with_capacity(times.len());
    let mut t_now = 0.0;
    let mut scratch = Vec::new();
    for &t in times {
        let span = t - t_now;
        if span > 0.0 {
            let steps = (span / dt).ceil().max(1.0) as usize;
            let h = span / steps as f64;
            let half_kick: Vec<Complex64> = v
                .iter()
                .map(|&val| Complex64::from_polar(1.0, -0.5 * h * val))
                .collect();
            let full_kick: Vec<Complex64> = v
                .iter()
                .map(|&val| Complex64::from_polar(1.0, -h * val))
                .collect();
            let kinetic: Vec<Complex64> = p2
                .iter()
                .map(|&p2| Complex64::from_polar(1.0 / n as f64, -h * p2))
                .collect();
            for (s, k) in state.iter_mut().zip(&half_kick) {
                *s *= k;
            }
            for step in 0..steps {
                crate::fft::fft_line(&mut state, &mut scratch, true);
                for (s, k) in state.iter_mut().zip(&kinetic) {
                    *s *= k;
                }
                crate::fft::fft_line(&mut state, &mut scratch, false);
                if step + 1 < steps {
                    for (s, k) in state.iter_mut().zip(&full_kick) {
                        *s *= k;
                    }
                }
            }
            for (s, k) in state.iter_mut().zip(&half_kick) {
                *s *= k;
            }
            t_now = t;
        }
        out.push(state.clone());
    }
    out
}

/// Width snapshots: comparison dynamics for the slow-spreading scenarios,
/// interacting/free evolution otherwise.
fn width_snapshots(
    raw: &RawConfig,
    grid: &Arc<SplitGrid>,
    state: Option<&WaveFunction>,
    potential: &Potential,
    cfg: &PropagatorConfig,
    times: &[f64],
) -> Result<Vec<(f64, WaveFunction)>> {
    if raw.str_or("state", "kind", "packet") == "yafaev_comparison" {
        let comp = comparison_from_config(raw)?;
        let mut snaps = Vec::with_capacity(times.len());
        for &t in times {
            snaps.push((t, comp.comparison_field(grid.clone(), t)?));
        }
        return Ok(snaps);
    }
    let psi = state.ok_or_else(|| CoreError::Config("width step needs a state".into()))?;
    let snaps = evolve_through(psi, times, potential, cfg)?;
    Ok(times.iter().copied().zip(snaps).collect())
}

fn comparison_from_config(raw: &RawConfig) -> Result<YafaevComparison> {
    let alpha = raw.f64_req("potential", "alpha")?;
    let fine_axis = crate::grid::AxisGrid::new(
        raw.u64_or("state", "bound_points", 16384)? as usize,
        raw.f64_or("state", "bound_length", 200.0)?,
    )?;
    let bound = bound_state_1d(|x| if x.abs() <= 1.0 { -1.0 } else { 0.0 }, &fine_axis)?;
    YafaevComparison::new(
        alpha,
        bound,
        raw.f64_or("state", "fhat_center", 0.75)?,
        raw.f64_or("state", "fhat_width", 0.25)?,
    )
}

fn run_yafaev_step(
    raw: &RawConfig,
    reporter: &mut Reporter,
    checks: &mut Vec<CheckResult>,
) -> Result<()> {
    let comp = comparison_from_config(raw)?;
    let alpha = comp.alpha();

    // g(0) = 1 and monotonicity endpoints
    let g0 = comp.g(0.0);
    reporter.note("yafaev.g0", fmt_f64(g0));
    if let Some(tol) = raw.f64_opt("checks", "g0_tol")? {
        check(
            checks,
            "g_at_zero",
            (g0 - 1.0).abs() <= tol,
            format!("g(0) = {g0:.9} (tolerance {tol:.0e})"),
        );
    }

    let beta_high = alpha + raw.f64_or("plan", "yafaev_beta_high_offset", 0.25)?;
    let beta_low = (alpha - raw.f64_or("plan", "yafaev_beta_low_offset", 0.15)?).max(0.01);
    let t0 = raw.f64_or("plan", "yafaev_t0", 300.0)?;
    let t1 = raw.f64_or("plan", "yafaev_t1", 3000.0)?;
    let rungs = raw.u64_or("plan", "yafaev_rungs", 5)? as usize;
    let ladder: Vec<f64> = (0..rungs)
        .map(|i| t0 * (t1 / t0).powf(i as f64 / (rungs - 1) as f64))
        .collect();

    // strip-norm trends via the one-dimensional identity
    let mut csv = reporter.csv("yafaev_strip.csv", &["beta", "t", "r", "norm"])?;
    let mut high_values = Vec::new();
    let mut low_values = Vec::new();
    for &t in &ladder {
        for (beta, bucket) in [(beta_high, &mut high_values), (beta_low, &mut low_values)] {
            let r = t.powf(beta);
            let norm = comp.strip_norm_sq_1d(r, t).sqrt();
            csv.row_f64(&[beta, t, r, norm])?;
            bucket.push(norm);
        }
    }
    csv.finish()?;
    let high_ratio = high_values.first().unwrap() / high_values.last().unwrap().max(1e-300);
    let low_spread = {
        let lo = low_values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = low_values.iter().copied().fold(0.0f64, f64::max);
        (hi - lo) / lo.max(1e-300)
    };
    reporter.note("yafaev.beta_high", fmt_f64(beta_high));
    reporter.note("yafaev.beta_low", fmt_f64(beta_low));
    reporter.note("yafaev.high_decay_ratio", fmt_f64(high_ratio));
    reporter.note("yafaev.low_relative_spread", fmt_f64(low_spread));
    if let Some(min) = raw.f64_opt("checks", "strip_decay_min")? {
        check(
            checks,
            "strip_decay_above_alpha",
            high_ratio >= min,
            format!("decade ratio {high_ratio:.2} at beta = {beta_high:.2} (need >= {min})"),
        );
    }
    if let Some(max) = raw.f64_opt("checks", "strip_flat_max")? {
        check(
            checks,
            "strip_plateau_below_alpha",
            low_spread <= max,
            format!("relative spread {low_spread:.3} at beta = {beta_low:.2} (limit {max})"),
        );
    }

    // identity cross-check: 1-D quadrature against the direct 2-D sum
    let mut worst = 0.0f64;
    let mut pairs: Vec<(f64, f64)> = vec![(2.0, 10.0)];
    for &t in &[ladder[0], *ladder.last().unwrap()] {
        pairs.push((t.powf(beta_high), t));
        pairs.push((t.powf(beta_low), t));
    }
    let mut cc = reporter.csv("yafaev_crosscheck.csv", &["r", "t", "norm_1d", "norm_2d"])?;
    for &(r, t) in &pairs {
        let scale_max = (1.0 + (2.0 * t * 1.2) * (2.0 * t * 1.2)).powf(alpha / 2.0);
        let x_extent = 2.0 * (r + 60.0 * scale_max);
        let dx_target = 0.01 * (scale_max / 2.0).max(1.0);
        let nx = (((x_extent / dx_target / 2.0).ceil() as usize) * 2).clamp(512, 1 << 21);
        let x_axis = crate::grid::AxisGrid::new(nx, x_extent)?;
        let y_extent = 2.0 * (2.0 * t * 1.2) * 1.2;
        let y_axis = crate::grid::AxisGrid::new(4096, y_extent)?;
        let a = comp.strip_norm_sq_1d(r, t).sqrt();
        let b = comp.strip_norm_sq_2d(r, t, &x_axis, &y_axis).sqrt();
        cc.row_f64(&[r, t, a, b])?;
        worst = worst.max((a - b).abs());
    }
    cc.finish()?;
    reporter.note("yafaev.crosscheck_worst", fmt_f64(worst));
    if let Some(max) = raw.f64_opt("checks", "crosscheck_max")? {
        check(
            checks,
            "identity_crosscheck",
            worst <= max,
            format!("worst 1-D/2-D deviation {worst:.3e} (limit {max:.0e})"),
        );
    }
    Ok(())
}

fn run_random_checks(
    raw: &RawConfig,
    grid: &Arc<SplitGrid>,
    potential: &Potential,
    reporter: &mut Reporter,
    checks: &mut Vec<CheckResult>,
) -> Result<()> {
    // regeneration is bit-identical; a different seed differs
    let again = build_potential(raw, grid)?;
    let identical = again.values() == potential.values();
    check(
        checks,
        "random_reproducible",
        identical,
        "regenerated field is bit-identical".into(),
    );
    let seed = raw.u64_or("potential", "seed", 1)?;
    let mut other_cfg = raw.clone();
    other_cfg.merge_over(&RawConfig::parse(&format!(
        "[potential]\nseed = {}\n",
        seed + 1
    ))?);
    let other = build_potential(&other_cfg, grid)?;
    check(
        checks,
        "random_seed_sensitivity",
        other.values() != potential.values(),
        "different seed produces a different field".into(),
    );
    check(
        checks,
        "random_nonpositive",
        potential.values().iter().all(|&v| v <= 0.0),
        "couplings on [q_min, 0] keep the field nonpositive".into(),
    );

    // transverse tail table for the record
    let mut csv = reporter.csv("potential_tail.csv", &["r", "tail"])?;
    for &(r, tail) in potential.tail_profile() {
        csv.row_f64(&[r, tail])?;
    }
    csv.finish()?;

    // qualitative low-energy localization probe: project towards the ground
    // state and check that its mass hugs the surface transversally. A row of
    // shallow wells binds with a long transverse decay length, so the
    // containment radius is generous; the point is localization at a scale
    // far below the domain size.
    let probe = imaginary_time_ground(grid, potential, 0.1, 2400, seed ^ 77)?;
    let within = probe.strip_norm(12.0);
    reporter.note("random.low_energy_strip_mass", fmt_f64(within * within));
    check(
        checks,
        "random_low_energy_localized",
        within * within >= 0.8,
        format!(
            "low-energy probe keeps {:.3} of its mass near the surface",
            within * within
        ),
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// Presets. Reference grid is 512 x 512 on [-100, 100)^2 with k = 1.
// ---------------------------------------------------------------------------

const PRESET_SEPARABLE: &str = r#"
[scenario]
name = separable

[grid]
k = 1
par = 512x200
perp = 1024x200

[potential]
kind = strip_well
depth = 1
r0 = 1

[state]
kind = bound_tensor
bound_depth = 1
bound_radius = 1
par_center = -20
par_p = 0.4
par_width = 0.5

[frame]
delta = 0.25

[run]
dt = 0.0078125
t_list = 0.5, 3, 6, 9, 12
v_list = 0.25, 0.5, 1
m = 0.5
n_list = 8, 20, 48, 80
delta_list = 1, 0.5, 0.25
mode = sup
epsilon = 0.05

[plan]
steps = classify, invariance, seminorm
invariance_radii = 8, 20, 48
invariance_dt = 0.00048828125

[checks]
verdict = surface-like
invariance_max = 1e-6
seminorm_estimate_max = 0.01
"#;

const PRESET_FREE: &str = r#"
[scenario]
name = free

[grid]
k = 1
par = 512x200
perp = 768x320

[potential]
kind = zero

[state]
kind = packet
par_center = 0
par_p = 0
par_width = 0.5
perp_center = 0
perp_p = 1.55
perp_width = 0.5
alpha = 1

[frame]
delta = 0.25

[run]
t_list = 3, 6, 9, 12
v_list = 0.5, 1, 2
m = 0.5
n_list = 4, 8, 16
delta_list = 1, 0.5, 0.25
mode = limsup_tail
epsilon = 0.05

[plan]
steps = classify, seminorm

[checks]
verdict = scattering-like
seminorm_estimate_min = 0.9
"#;

const PRESET_MIXED: &str = r#"
[scenario]
name = mixed

[grid]
k = 1
par = 512x240
perp = 1536x320

[potential]
kind = strip_well
depth = 1
r0 = 1

[state]
kind = superposition
weight = 0.70710678118654752
bound_depth = 1
bound_radius = 1
par_center = 0
par_p = 0.5
par_width = 0.45
perp_center = 0
perp_p = 1.55
perp_width = 0.5

[frame]
delta = 0.25

[run]
dt = 0.0078125
t_list = 3, 6, 9
v_list = 0.5, 1
epsilon = 0.05

[plan]
steps = classify

[checks]
verdict = mixed
fraction_surface = 0.5
fraction_tol = 0.05
"#;

const PRESET_COOK: &str = r#"
[scenario]
name = cook

[grid]
k = 1
par = 512x200
perp = 1536x600

[potential]
kind = strip_well
depth = 1
r0 = 1

[state]
kind = packet
par_center = 0
par_p = 0
par_width = 0.7
perp_center = 0
perp_p = 3.5
perp_width = 1.5
alpha = 1

[run]
dt = auto

[plan]
steps = cook, wave_op, orthogonality
cook_times = 2, 2.38, 2.83, 3.36, 4, 4.76, 5.66, 6.73, 8, 9.51, 11.31, 13.45, 16, 20
wave_horizon = 40
wave_rungs = 5
orth_bound_depth = 1
orth_bound_radius = 1
orth_par_center = 0
orth_par_p = 0.4
orth_par_width = 0.2
orth_horizon = 40

[checks]
cook_slope_max = -3
cauchy_monotone = true
cauchy_final_max = 1e-4
overlap_max = 0.02
"#;

const PRESET_ENSS: &str = r#"
[scenario]
name = enss

[grid]
k = 1
par = 512x200
perp = 512x200

[potential]
kind = strip_well
depth = 1
r0 = 1

[state]
kind = packet
par_center = 0
par_p = 0
par_width = 0.5
perp_center = -10
perp_p = 1.55
perp_width = 0.5
alpha = 1

[frame]
delta = 0.25

[run]
dt = auto

[plan]
steps = enss
enss_n = 4
enss_m = 0.5
enss_t = 0, 2, 4, 6, 8

[checks]
enss_in_ratio_max = 0.3334
enss_residual_max = 1e-6
"#;

const PRESET_YAFAEV_A25: &str = r#"
[scenario]
name = yafaev_a25

[grid]
k = 1
par = 2048x800
perp = 512x100

[potential]
kind = yafaev
alpha = 0.25

[state]
kind = yafaev_comparison
fhat_center = 0.75
fhat_width = 0.25
bound_points = 16384
bound_length = 200

[plan]
steps = width, yafaev
width_times = 4, 5.66, 8, 11.31, 16, 22.63, 32, 40
yafaev_beta_high_offset = 0.25
yafaev_beta_low_offset = 0.15
yafaev_t0 = 300
yafaev_t1 = 3000
yafaev_rungs = 5

[checks]
g0_tol = 1e-6
crosscheck_max = 1e-4
strip_decay_min = 5
strip_flat_max = 0.2
width_beta = 0.25
width_beta_tol = 0.1
"#;

const PRESET_YAFAEV_A20: &str = r#"
[scenario]
name = yafaev_a20

[grid]
k = 1
par = 2048x800
perp = 512x100

[potential]
kind = yafaev
alpha = 0.2

[state]
kind = yafaev_comparison
fhat_center = 0.75
fhat_width = 0.25
bound_points = 16384
bound_length = 200

[plan]
steps = width, yafaev
width_times = 4, 5.66, 8, 11.31, 16, 22.63, 32, 40
yafaev_beta_high_offset = 0.25
yafaev_beta_low_offset = 0.15
yafaev_t0 = 300
yafaev_t1 = 3000
yafaev_rungs = 5

[checks]
g0_tol = 1e-6
crosscheck_max = 1e-4
strip_decay_min = 5
strip_flat_max = 0.2
width_beta = 0.2
width_beta_tol = 0.1
"#;

const PRESET_YAFAEV_A40: &str = r#"
[scenario]
name = yafaev_a40

[grid]
k = 1
par = 2048x800
perp = 512x100

[potential]
kind = yafaev
alpha = 0.4

[state]
kind = yafaev_comparison
fhat_center = 0.75
fhat_width = 0.25
bound_points = 16384
bound_length = 200

[plan]
steps = width, yafaev
width_times = 4, 5.66, 8, 11.31, 16, 22.63, 32, 40
yafaev_beta_high_offset = 0.25
yafaev_beta_low_offset = 0.15
yafaev_t0 = 300
yafaev_t1 = 3000
yafaev_rungs = 5

[checks]
g0_tol = 1e-6
crosscheck_max = 1e-4
strip_decay_min = 5
strip_flat_max = 0.2
width_beta = 0.4
width_beta_tol = 0.1
"#;

const PRESET_TUBE: &str = r#"
[scenario]
name = tube

[grid]
k = 1
par = 256x6000
perp = 8192x6400

[potential]
kind = zero

[state]
kind = packet
par_center = 0
par_p = 0
par_width = 0.02
perp_center = 400
perp_p = 0.022
perp_width = 0.018

[frame]
delta = 0.015625

[run]
dt = auto

[plan]
steps = tube
tube_v = 1
tube_m = 0.03125
tube_t = 200, 400, 800, 1600

[checks]
tube_decay_min = 10
"#;

const PRESET_RANDOM: &str = r#"
[scenario]
name = random

[grid]
k = 1
par = 320x160
perp = 320x160

[potential]
kind = random_surface
amplitude = 3
site_radius = 0.45
law = uniform
q_min = -1
seed = 7

[plan]
steps = random_checks

[checks]
"#;

const PRESET_PERIODIC: &str = r#"
[scenario]
name = periodic

[grid]
k = 1
par = 320x160
perp = 320x160

[potential]
kind = periodic_strip
depth = 1
r0 = 1
period = 4

[state]
kind = packet
par_center = 0
par_p = 0
par_width = 0.6
perp_center = -8
perp_p = 1.7
perp_width = 0.6
alpha = 1

[frame]
delta = 0.5

[run]
dt = auto
t_list = 1, 2, 3
v_list = 0.5, 1
epsilon = 0.05

[plan]
steps = classify

[checks]
"#;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn packets_are_normalized_and_band_limited() {
        let grid = make_grid(1, &[(64, 60.0)], &[(64, 60.0)]).unwrap();
        let psi = dalpha_packet(&grid, &[0.0, -5.0], &[0.3, 1.3], &[0.2, 0.25], 1.0).unwrap();
        assert!((psi.norm() - 1.0).abs() < 1e-12);
        assert!(psi.perp_fourier_mass_inside(1.0) < 1e-14);
        // violating the class is rejected
        assert!(dalpha_packet(&grid, &[0.0, 0.0], &[0.0, 0.8], &[0.2, 0.25], 1.0).is_err());
    }

    #[test]
    fn presets_parse_and_build() {
        for name in PRESET_NAMES {
            let scenario = Scenario::preset(name).unwrap();
            let grid = build_grid(&scenario.raw).unwrap();
            assert!(grid.d() == 2, "{name}");
            // potential builds for every preset
            build_potential(&scenario.raw, &grid).unwrap();
        }
        assert!(Scenario::preset("nope").is_err());
    }

    #[test]
    fn superposition_components_are_orthogonal() {
        let grid = make_grid(1, &[(128, 100.0)], &[(128, 100.0)]).unwrap();
        let raw = RawConfig::parse(
            "[state]\nkind = superposition\nweight = 0.70710678\nbound_depth = 1\nbound_radius = 1\npar_center = -10\npar_p = 0.4\npar_width = 0.35\nperp_center = 0\nperp_p = 1.3\nperp_width = 0.25\n",
        )
        .unwrap();
        let combined = build_state(&raw, &grid).unwrap();
        assert!((combined.norm() - 1.0).abs() < 1e-10);
        // the two parts live at mirrored longitudinal momenta, so they are
        // exactly orthogonal and the mass fractions are additive
        let surface = bound_tensor_from_config(&raw, &grid).unwrap();
        let mut packet_cfg = raw.clone();
        packet_cfg.merge_over(&RawConfig::parse("[state]\npar_p = -0.4\n").unwrap());
        let packet = packet_from_config(&packet_cfg, &grid).unwrap();
        assert!(surface.inner(&packet).unwrap().norm() < 1e-12);
        let frac = surface.inner(&combined).unwrap().norm_sqr();
        assert!((frac - 0.5).abs() < 1e-6, "surface fraction {frac}");
    }

    #[test]
    fn small_scenario_runs_and_reports() {
        let scenario = Scenario::preset("random").unwrap();
        let dir = std::env::temp_dir().join("ssct_scenario_random");
        let _ = std::fs::remove_dir_all(&dir);
        let outcome = run_scenario(&scenario, &dir).unwrap();
        assert!(dir.join("manifest.txt").exists());
        assert!(dir.join("potential_tail.csv").exists());
        for check in &outcome.checks {
            assert!(check.passed, "{}: {}", check.name, check.details);
        }
    }
}
