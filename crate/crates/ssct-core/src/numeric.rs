//! Small numeric utilities shared across the crate: compensated sums, the
//! counter-based generator for random couplings, the compactly supported bump
//! profile, log-log fitting, and a cubic spline for off-grid evaluation.

use num_complex::Complex64;

/// Kahan-compensated sum over an iterator, in iteration order.
///
/// Every reduction in the crate goes through this (or `kahan_sum_complex`) in a
/// fixed sequential order so repeated runs are bit-identical regardless of the
/// rayon pool size.
pub fn kahan_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let y = v - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}

pub fn kahan_sum_complex(values: impl Iterator<Item = Complex64>) -> Complex64 {
    let mut sum = Complex64::new(0.0, 0.0);
    let mut comp = Complex64::new(0.0, 0.0);
    for v in values {
        let y = v - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}

/// splitmix64 step; the standard finalizer-style mixer.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Counter-based uniform draw in [0, 1), keyed by (seed, counter words).
/// Evaluation-order independent: the value depends only on the key.
pub fn counter_uniform(seed: u64, words: &[u64]) -> f64 {
    let mut h = splitmix64(seed ^ 0x5353_4354_0000_0001); // "SSCT" domain tag
    for &w in words {
        h = splitmix64(h ^ w);
    }
    // 53 mantissa bits
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal via Box-Muller on two counter draws. Used only for
/// deterministic probe states, never for the physics.
pub fn counter_normal(seed: u64, words: &[u64]) -> f64 {
    let u1 = counter_uniform(seed, words).max(1e-300);
    let mut w2 = words.to_vec();
    w2.push(0x9e3779b97f4a7c15);
    let u2 = counter_uniform(seed, &w2);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// The canonical compactly supported bump: exp(-1/(1-u^2)) for |u| < 1, else 0.
/// Smooth, vanishes with all derivatives at |u| = 1.
pub fn bump(u: f64) -> f64 {
    if u.abs() < 1.0 {
        (-1.0 / (1.0 - u * u)).exp()
    } else {
        0.0
    }
}

/// Least-squares line fit y = slope*x + intercept.
/// Returns (slope, intercept, rms residual, slope standard error).
pub fn line_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64, f64, f64)> {
    let n = xs.len();
    if n < 2 || n != ys.len() {
        return None;
    }
    let nf = n as f64;
    let mx = kahan_sum(xs.iter().copied()) / nf;
    let my = kahan_sum(ys.iter().copied()) / nf;
    let sxx = kahan_sum(xs.iter().map(|x| (x - mx) * (x - mx)));
    let sxy = kahan_sum(xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)));
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res = kahan_sum(xs.iter().zip(ys).map(|(x, y)| {
        let r = y - (slope * x + intercept);
        r * r
    }));
    let rms = (ss_res / nf).sqrt();
    let stderr = if n > 2 {
        (ss_res / (nf - 2.0) / sxx).sqrt()
    } else {
        f64::INFINITY
    };
    Some((slope, intercept, rms, stderr))
}

/// Fit of log(y) against log(x), skipping points below `floor`.
/// Returns (slope, rms residual in log space, points used).
pub fn log_log_fit(ts: &[f64], vals: &[f64], floor: f64) -> Option<(f64, f64, usize)> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&t, &v) in ts.iter().zip(vals) {
        if t > 0.0 && v > floor {
            xs.push(t.ln());
            ys.push(v.ln());
        }
    }
    let (slope, _b, rms, _se) = line_fit(&xs, &ys)?;
    Some((slope, rms, xs.len()))
}

/// Natural cubic spline on a uniform grid, for off-grid evaluation of
/// real profiles (bound states, cumulative tails).
#[derive(Debug, Clone)]
pub struct UniformSpline {
    x0: f64,
    dx: f64,
    y: Vec<f64>,
    m: Vec<f64>, // second derivatives at the nodes
}

impl UniformSpline {
    pub fn new(x0: f64, dx: f64, y: Vec<f64>) -> Self {
        let n = y.len();
        assert!(n >= 3 && dx > 0.0);
        // Natural boundary conditions: m[0] = m[n-1] = 0, interior rows
        // m[i-1] + 4 m[i] + m[i+1] = 6 (y[i+1] - 2 y[i] + y[i-1]) / dx^2.
        // Thomas algorithm with sub/sup diagonals equal to 1 on interior rows.
        let mut m = vec![0.0; n];
        let mut c_prime = vec![0.0; n];
        let mut d_prime = vec![0.0; n];
        for i in 1..n - 1 {
            let rhs = 6.0 * (y[i + 1] - 2.0 * y[i] + y[i - 1]) / (dx * dx);
            let a = if i == 1 { 0.0 } else { 1.0 };
            let denom = 4.0 - a * c_prime[i - 1];
            c_prime[i] = 1.0 / denom;
            d_prime[i] = (rhs - a * d_prime[i - 1]) / denom;
        }
        for i in (1..n - 1).rev() {
            m[i] = d_prime[i] - c_prime[i] * m[i + 1];
        }
        UniformSpline { x0, dx, y, m }
    }

    /// Evaluate; clamps to the end values outside the grid.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.y.len();
        let s = (x - self.x0) / self.dx;
        if s <= 0.0 {
            return self.y[0];
        }
        if s >= (n - 1) as f64 {
            return self.y[n - 1];
        }
        let i = s.floor() as usize;
        let u = s - i as f64;
        let h2 = self.dx * self.dx;
        let a = 1.0 - u;
        a * self.y[i]
            + u * self.y[i + 1]
            + h2 / 6.0 * ((a * a * a - a) * self.m[i] + (u * u * u - u) * self.m[i + 1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_beats_naive_on_skewed_sum() {
        let vals: Vec<f64> = std::iter::once(1e16)
            .chain(std::iter::repeat(1.0).take(1000))
            .chain(std::iter::once(-1e16))
            .collect();
        assert_eq!(kahan_sum(vals.iter().copied()), 1000.0);
    }

    #[test]
    fn counter_draws_are_key_determined() {
        let a = counter_uniform(7, &[1, 2]);
        let b = counter_uniform(7, &[1, 2]);
        let c = counter_uniform(7, &[2, 1]);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!((0.0..1.0).contains(&a));
    }

    #[test]
    fn bump_support() {
        assert_eq!(bump(1.0), 0.0);
        assert_eq!(bump(-2.0), 0.0);
        assert!(bump(0.0) > bump(0.9));
        assert!(bump(0.9) > 0.0);
    }

    #[test]
    fn line_fit_recovers_slope() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.3).collect();
        let ys: Vec<f64> = xs.iter().map(|x| -2.5 * x + 1.0).collect();
        let (slope, intercept, rms, _) = line_fit(&xs, &ys).unwrap();
        assert!((slope + 2.5).abs() < 1e-12);
        assert!((intercept - 1.0).abs() < 1e-12);
        assert!(rms < 1e-12);
    }

    #[test]
    fn spline_interpolates_smooth_function() {
        let n = 200;
        let dx = 0.05;
        let y: Vec<f64> = (0..n).map(|i| (i as f64 * dx).sin()).collect();
        let sp = UniformSpline::new(0.0, dx, y);
        for &x in &[0.123, 1.77, 5.5, 9.3] {
            assert!((sp.eval(x) - x.sin()).abs() < 2e-6, "x={x}");
        }
    }
}
