//! Ground state of h = -d^2/dx^2 + V0 on a 1-D periodic axis.
//!
//! Inverse iteration on the spectral discretization: an imaginary-time warmup
//! produces a good starting vector, then shifted inverse iteration with a
//! momentum-space-preconditioned conjugate-gradient solve polishes it to a
//! residual below 1e-8. The shift sits below -sup|V0|, so the shifted
//! operator is positive definite throughout.

use num_complex::Complex64;

use crate::error::{CoreError, Result};
use crate::fft;
use crate::grid::AxisGrid;
use crate::numeric::{kahan_sum, UniformSpline};

const RESIDUAL_TARGET: f64 = 1e-8;
const NO_BOUND_STATE_FLOOR: f64 = -1e-10;

#[derive(Debug, Clone)]
pub struct BoundState1D {
    axis: AxisGrid,
    values: Vec<f64>,
    energy: f64,
    decay_constant: f64,
    residual: f64,
    spline: UniformSpline,
    /// cumulative trapezoid of |phi|^2 from the left edge
    cumulative: Vec<f64>,
}

impl BoundState1D {
    pub fn axis(&self) -> &AxisGrid {
        &self.axis
    }

    /// Normalized real profile on the solver axis.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_complex(&self) -> Vec<Complex64> {
        self.values
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect()
    }

    /// Ground-state energy E0 < 0.
    pub fn energy(&self) -> f64 {
        self.energy
    }

    /// Asymptotic decay rate c with phi ~ C e^{-c|x|}; for a compactly
    /// supported well this is sqrt(-E0).
    pub fn decay_constant(&self) -> f64 {
        self.decay_constant
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Off-grid evaluation by cubic spline; effectively zero far outside the well.
    pub fn eval(&self, x: f64) -> f64 {
        self.spline.eval(x)
    }

    /// Spectral resampling to a coarser axis of the same length.
    pub fn resample(&self, target: &AxisGrid) -> Result<Vec<f64>> {
        if (target.length() - self.axis.length()).abs() > 1e-12 * self.axis.length() {
            return Err(CoreError::Precondition(
                "resampling requires matching axis lengths".into(),
            ));
        }
        if target.n() > self.axis.n() {
            return Err(CoreError::Precondition(
                "resampling target must not be finer than the solver axis".into(),
            ));
        }
        let n = self.axis.n();
        let m = target.n();
        let mut hat = self.values_complex();
        fft::fft_rows(&mut hat, n, true);
        // keep bins |j| < m/2, drop the rest; scale by m/n for the inverse
        let mut out_hat = vec![Complex64::default(); m];
        for j in 0..m {
            let signed = if j < m / 2 {
                j as i64
            } else {
                j as i64 - m as i64
            };
            if signed.unsigned_abs() as usize >= m / 2 {
                continue; // drop the target Nyquist bin for symmetry
            }
            let src = signed.rem_euclid(n as i64) as usize;
            out_hat[j] = hat[src] / n as f64;
        }
        fft::fft_rows(&mut out_hat, m, false);
        Ok(out_hat.iter().map(|v| v.re).collect())
    }

    /// g(y) = mass of |phi|^2 outside [-|y|, |y|], from the trapezoid
    /// cumulative with linear interpolation. g(0) = 1 exactly.
    pub fn tail_mass(&self, y: f64) -> f64 {
        let a = y.abs();
        let inside = self.cumulative_at(a) - self.cumulative_at(-a);
        (1.0 - inside).clamp(0.0, 1.0)
    }

    fn cumulative_at(&self, x: f64) -> f64 {
        let dx = self.axis.dx();
        let x0 = self.axis.x(0);
        let s = (x - x0) / dx;
        let n = self.cumulative.len();
        if s <= 0.0 {
            return 0.0;
        }
        if s >= (n - 1) as f64 {
            return self.cumulative[n - 1];
        }
        let i = s.floor() as usize;
        let u = s - i as f64;
        self.cumulative[i] * (1.0 - u) + self.cumulative[i + 1] * u
    }
}

fn apply_h(
    v0: &[f64],
    p2: &[f64],
    x: &[Complex64],
    out: &mut Vec<Complex64>,
    scratch: &mut Vec<Complex64>,
) {
    let n = x.len();
    out.clear();
    out.extend_from_slice(x);
    let mut fft_scratch = Vec::new();
    fft::fft_line(out, &mut fft_scratch, true);
    for (j, v) in out.iter_mut().enumerate() {
        *v *= p2[j] / n as f64;
    }
    fft::fft_line(out, &mut fft_scratch, false);
    for i in 0..n {
        out[i] += v0[i] * x[i];
    }
    let _ = scratch;
}

fn precondition(p2: &[f64], c: f64, r: &[Complex64]) -> Vec<Complex64> {
    let n = r.len();
    let mut hat = r.to_vec();
    let mut scratch = Vec::new();
    fft::fft_line(&mut hat, &mut scratch, true);
    for (j, v) in hat.iter_mut().enumerate() {
        *v /= (p2[j] + c) * n as f64;
    }
    fft::fft_line(&mut hat, &mut scratch, false);
    hat
}

fn dot(a: &[Complex64], b: &[Complex64]) -> f64 {
    kahan_sum(a.iter().zip(b).map(|(x, y)| (x.conj() * y).re))
}

fn norm2(a: &[Complex64]) -> f64 {
    kahan_sum(a.iter().map(|x| x.norm_sqr()))
}

/// Solve (h - sigma) x = b by preconditioned CG; h - sigma is positive definite.
fn solve_shifted(
    v0: &[f64],
    p2: &[f64],
    sigma: f64,
    b: &[Complex64],
    tol: f64,
    max_iter: usize,
) -> Vec<Complex64> {
    let n = b.len();
    let v_shift: Vec<f64> = v0.iter().map(|&v| v - sigma).collect();
    let mut x = vec![Complex64::default(); n];
    let mut r = b.to_vec();
    let mut z = precondition(p2, -sigma, &r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let b_norm = norm2(b).sqrt().max(1e-300);
    let mut ap = Vec::new();
    let mut scratch = Vec::new();
    for _ in 0..max_iter {
        apply_h(&v_shift, p2, &p, &mut ap, &mut scratch);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break; // lost definiteness numerically; return the best iterate
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if norm2(&r).sqrt() / b_norm < tol {
            break;
        }
        z = precondition(p2, -sigma, &r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    x
}

/// Ground state of -d^2/dx^2 + V0 on the given axis.
/// Fails with `NoBoundState` when the lowest discrete eigenvalue is not negative.
pub fn bound_state_1d(v0: impl Fn(f64) -> f64, axis: &AxisGrid) -> Result<BoundState1D> {
    let n = axis.n();
    let samples: Vec<f64> = (0..n).map(|i| v0(axis.x(i))).collect();
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(CoreError::Precondition(
            "non-finite potential sample".into(),
        ));
    }
    let sup = samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let p2: Vec<f64> = (0..n).map(|j| axis.p(j) * axis.p(j)).collect();
    let dx = axis.dx();

    // imaginary-time warmup from an even localized seed
    let width = 2.0;
    let mut phi: Vec<Complex64> = (0..n)
        .map(|i| {
            let x = axis.x(i);
            Complex64::new((-x * x / (2.0 * width * width)).exp(), 0.0)
        })
        .collect();
    let tau = 0.05;
    let half_kick: Vec<f64> = samples.iter().map(|&v| (-0.5 * tau * v).exp()).collect();
    let kinetic: Vec<f64> = p2.iter().map(|&p2| (-tau * p2).exp() / n as f64).collect();
    let mut scratch = Vec::new();
    for _ in 0..400 {
        for i in 0..n {
            phi[i] *= half_kick[i];
        }
        fft::fft_line(&mut phi, &mut scratch, true);
        for j in 0..n {
            phi[j] *= kinetic[j];
        }
        fft::fft_line(&mut phi, &mut scratch, false);
        for i in 0..n {
            phi[i] *= half_kick[i];
        }
        let nm = (norm2(&phi) * dx).sqrt();
        for v in phi.iter_mut() {
            *v /= nm;
        }
    }

    // shifted inverse iteration
    let sigma = -sup - 1.0;
    let mut energy = 0.0;
    let mut residual = f64::INFINITY;
    let mut h_phi = Vec::new();
    for _ in 0..300 {
        let next = solve_shifted(&samples, &p2, sigma, &phi, 1e-13, 400);
        let nm = (norm2(&next) * dx).sqrt();
        if !(nm > 0.0) {
            return Err(CoreError::Precondition(
                "inverse iteration collapsed".into(),
            ));
        }
        phi = next.iter().map(|v| v / nm).collect();
        apply_h(&samples, &p2, &phi, &mut h_phi, &mut scratch);
        energy = dot(&phi, &h_phi) * dx;
        residual = (kahan_sum(
            h_phi
                .iter()
                .zip(&phi)
                .map(|(h, p)| (h - energy * p).norm_sqr()),
        ) * dx)
            .sqrt();
        if residual <= RESIDUAL_TARGET * 0.3 {
            break;
        }
    }

    if energy >= NO_BOUND_STATE_FLOOR {
        return Err(CoreError::NoBoundState { lowest: energy });
    }
    if residual > RESIDUAL_TARGET {
        return Err(CoreError::Precondition(format!(
            "eigenproblem residual {residual:.3e} above target {RESIDUAL_TARGET:.0e}"
        )));
    }

    // real, sign-fixed profile
    let imag_mass: f64 = phi.iter().map(|v| v.im * v.im).sum();
    if imag_mass * dx > 1e-20 {
        return Err(CoreError::Precondition(
            "ground state came out non-real".into(),
        ));
    }
    let mut values: Vec<f64> = phi.iter().map(|v| v.re).collect();
    let peak = values
        .iter()
        .fold(0.0f64, |m, &v| if v.abs() > m.abs() { v } else { m });
    if peak < 0.0 {
        for v in values.iter_mut() {
            *v = -*v;
        }
    }

    let spline = UniformSpline::new(axis.x(0), dx, values.clone());
    let mut cumulative = vec![0.0; n];
    for i in 1..n {
        let a = values[i - 1] * values[i - 1];
        let b = values[i] * values[i];
        cumulative[i] = cumulative[i - 1] + 0.5 * (a + b) * dx;
    }

    Ok(BoundState1D {
        axis: axis.clone(),
        values,
        energy,
        decay_constant: (-energy).sqrt(),
        residual,
        spline,
        cumulative,
    })
}
