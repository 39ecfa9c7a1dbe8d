//! Band-limited block windows.
//!
//! The frame window factors over the parallel/perpendicular blocks,
//! eta = eta_par (x) eta_perp. Each block factor is the canonical bump in
//! momentum space, radial within its block and supported in the ball of
//! radius rho = delta/sqrt(2), so the full window's Fourier support sits
//! inside the d-dimensional ball B_delta. Spatial samples come from the
//! inverse DFT of the sampled bump: the discrete band limit is exact, which
//! turns the momentum-support identities into exact node statements.

use num_complex::Complex64;

use crate::error::{CoreError, Result};
use crate::fft;
use crate::grid::AxisGrid;
use crate::numeric::{bump, kahan_sum};

#[derive(Debug, Clone)]
pub struct BlockWindow {
    axes: Vec<AxisGrid>,
    radius: f64,
    /// Real spatial samples, peaked at grid index 0, discrete L2 norm 1.
    values: Vec<f64>,
    /// Per-axis largest bin magnitude with a nonzero Fourier sample.
    jmax: Vec<usize>,
}

impl BlockWindow {
    /// Build the block window with momentum-ball radius `rho`.
    pub fn build(axes: &[AxisGrid], rho: f64) -> Result<BlockWindow> {
        if !(rho > 0.0) {
            return Err(CoreError::Precondition(format!(
                "window radius must be positive, got {rho}"
            )));
        }
        for axis in axes {
            if rho > axis.p_max() {
                return Err(CoreError::Precondition(format!(
                    "window radius {rho} exceeds the axis Nyquist bound {}",
                    axis.p_max()
                )));
            }
            // at least one nonzero ring per axis, else the window degenerates
            // to a constant along that axis
            if axis.dp() >= rho {
                return Err(CoreError::Precondition(format!(
                    "momentum spacing {:.3e} cannot resolve window radius {rho:.3e}; \
                     enlarge the domain length",
                    axis.dp()
                )));
            }
        }
        let dims: Vec<usize> = axes.iter().map(|a| a.n()).collect();
        let len: usize = dims.iter().product();
        let mut hat = vec![Complex64::default(); len];
        let mut jmax = vec![0usize; axes.len()];
        for (flat, slot) in hat.iter_mut().enumerate() {
            let mut rem = flat;
            let mut p2 = 0.0;
            let mut bins = vec![0usize; axes.len()];
            for pos in (0..axes.len()).rev() {
                let j = rem % dims[pos];
                rem /= dims[pos];
                let p = axes[pos].p(j);
                p2 += p * p;
                bins[pos] = axes[pos].signed_bin(j).unsigned_abs() as usize;
            }
            let value = bump(p2.sqrt() / rho);
            if value > 0.0 {
                *slot = Complex64::new(value, 0.0);
                for (pos, &b) in bins.iter().enumerate() {
                    jmax[pos] = jmax[pos].max(b);
                }
            }
        }
        let mut spatial = hat;
        fft::fft_nd(&mut spatial, &dims, false);
        let imag_peak = spatial.iter().fold(0.0f64, |m, v| m.max(v.im.abs()));
        let real_peak = spatial.iter().fold(0.0f64, |m, v| m.max(v.re.abs()));
        debug_assert!(imag_peak <= 1e-12 * real_peak);
        let dv: f64 = axes.iter().map(|a| a.dx()).product();
        let mut values: Vec<f64> = spatial.iter().map(|v| v.re).collect();
        let norm = (kahan_sum(values.iter().map(|v| v * v)) * dv).sqrt();
        for v in values.iter_mut() {
            *v /= norm;
        }
        Ok(BlockWindow {
            axes: axes.to_vec(),
            radius: rho,
            values,
            jmax,
        })
    }

    pub fn axes(&self) -> &[AxisGrid] {
        &self.axes
    }

    pub fn dims(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.n()).collect()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn jmax(&self) -> &[usize] {
        &self.jmax
    }

    /// Window sample translated by per-axis grid shifts (torus wrap):
    /// w(y - x_shift) at the block index `idx`.
    pub fn shifted(&self, idx: usize, shifts: &[usize]) -> f64 {
        let mut rem = idx;
        let mut src = 0usize;
        let mut stride = 1usize;
        for pos in (0..self.axes.len()).rev() {
            let n = self.axes[pos].n();
            let coord = rem % n;
            rem /= n;
            let shifted = (coord + n - shifts[pos] % n) % n;
            src += shifted * stride;
            stride *= n;
        }
        self.values[src]
    }

    /// Fill `out` with the translated window w(y - x_shift) over the block.
    pub fn fill_shifted(&self, shifts: &[usize], out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.values.len());
        match self.axes.len() {
            1 => {
                let n = self.axes[0].n();
                let s = shifts[0] % n;
                out[..s].copy_from_slice(&self.values[n - s..]);
                out[s..].copy_from_slice(&self.values[..n - s]);
            }
            _ => {
                for (idx, slot) in out.iter_mut().enumerate() {
                    *slot = self.shifted(idx, shifts);
                }
            }
        }
    }

    /// Effective tail profile |w| along the first axis through the origin,
    /// normalized to the peak. Used to pick scenario geometry.
    pub fn tail_amplitude(&self, distance: f64) -> f64 {
        let axis = &self.axes[0];
        let idx = ((distance / axis.dx()).round() as usize).min(axis.n() / 2);
        let stride: usize = self.axes[1..].iter().map(|a| a.n()).product();
        (self.values[idx * stride] / self.values[0]).abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_is_normalized_and_band_limited() {
        let axis = AxisGrid::new(512, 200.0).unwrap();
        let w = BlockWindow::build(&[axis.clone()], 1.0 / 2f64.sqrt()).unwrap();
        let dv = axis.dx();
        let norm: f64 = w.values().iter().map(|v| v * v).sum::<f64>() * dv;
        assert!((norm - 1.0).abs() < 1e-12);
        // Fourier samples vanish outside the ball: check via forward DFT
        let mut hat: Vec<Complex64> = w.values_complex();
        let mut scratch = Vec::new();
        fft::fft_line(&mut hat, &mut scratch, true);
        for (j, v) in hat.iter().enumerate() {
            let p = axis.p(j).abs();
            if p >= w.radius() {
                assert!(v.norm() < 1e-12, "bin {j} at |p| = {p} not zero");
            }
        }
        assert!(w.jmax()[0] >= 4);
    }

    #[test]
    fn rejects_unresolvable_radius() {
        let axis = AxisGrid::new(512, 200.0).unwrap();
        // dp = 2 pi / 200 = 0.0314 > 1/64 / sqrt(2)
        assert!(BlockWindow::build(&[axis], (1.0 / 64.0) / 2f64.sqrt()).is_err());
    }

    impl BlockWindow {
        fn values_complex(&self) -> Vec<Complex64> {
            self.values
                .iter()
                .map(|&v| Complex64::new(v, 0.0))
                .collect()
        }
    }

    #[test]
    fn shifted_wraps_on_the_torus() {
        let axis = AxisGrid::new(16, 8.0).unwrap();
        let w = BlockWindow::build(&[axis], 2.0).unwrap();
        // shift by 3: peak moves to index 3
        let peak: usize = (0..16)
            .max_by(|&a, &b| {
                w.shifted(a, &[3])
                    .abs()
                    .partial_cmp(&w.shifted(b, &[3]).abs())
                    .unwrap()
            })
            .unwrap();
        assert_eq!(peak, 3);
    }
}
