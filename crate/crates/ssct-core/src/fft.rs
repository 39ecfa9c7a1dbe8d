//! FFT plumbing on top of rustfft: cached plans, parallel row transforms,
//! axis permutation, and the unitary continuum-convention transform pair.
//!
//! Raw transforms are unnormalized (forward kernel e^{-2*pi*i*jm/n}, inverse
//! kernel e^{+2*pi*i*jm/n}); normalization and the [-L/2, L/2) origin phases
//! live in `to_momentum` / `from_momentum`. Rows are processed independently
//! (rayon), so results are bit-identical for any thread count.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::grid::SplitGrid;

fn plan(n: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap();
    guard
        .entry((n, forward))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if forward {
                planner.plan_fft_forward(n)
            } else {
                planner.plan_fft_inverse(n)
            }
        })
        .clone()
}

/// In-place unnormalized FFT of a single line.
pub fn fft_line(buf: &mut [Complex64], scratch: &mut Vec<Complex64>, forward: bool) {
    let fft = plan(buf.len(), forward);
    scratch.resize(fft.get_inplace_scratch_len(), Complex64::default());
    fft.process_with_scratch(buf, scratch);
}

/// In-place unnormalized FFT of every `row_len`-chunk, in parallel.
pub fn fft_rows(values: &mut [Complex64], row_len: usize, forward: bool) {
    debug_assert_eq!(values.len() % row_len, 0);
    let fft = plan(row_len, forward);
    values.par_chunks_exact_mut(row_len).for_each_init(
        || vec![Complex64::default(); fft.get_inplace_scratch_len()],
        |scratch, row| fft.process_with_scratch(row, scratch),
    );
}

/// Gather `src` (layout `dims`) into a new array whose axis order is `perm`
/// (perm[i] = source axis placed at output position i). Parallel over output rows.
pub fn permute_axes(src: &[Complex64], dims: &[usize], perm: &[usize]) -> Vec<Complex64> {
    let d = dims.len();
    debug_assert_eq!(perm.len(), d);
    let out_dims: Vec<usize> = perm.iter().map(|&a| dims[a]).collect();
    // source strides
    let mut sstride = vec![1usize; d];
    for i in (0..d.saturating_sub(1)).rev() {
        sstride[i] = sstride[i + 1] * dims[i + 1];
    }
    let inner_src_axis = perm[d - 1];
    let inner_len = out_dims[d - 1];
    let inner_stride = sstride[inner_src_axis];
    let mut out = vec![Complex64::default(); src.len()];
    out.par_chunks_exact_mut(inner_len)
        .enumerate()
        .for_each(|(row, chunk)| {
            // decompose row into the leading output coordinates
            let mut rem = row;
            let mut base = 0usize;
            for pos in (0..d - 1).rev() {
                let coord = rem % out_dims[pos];
                rem /= out_dims[pos];
                base += coord * sstride[perm[pos]];
            }
            for (t, slot) in chunk.iter_mut().enumerate() {
                *slot = src[base + t * inner_stride];
            }
        });
    out
}

fn move_axis_last_perm(d: usize, axis: usize) -> (Vec<usize>, Vec<usize>) {
    let mut fwd: Vec<usize> = (0..d).filter(|&a| a != axis).collect();
    fwd.push(axis);
    // inverse permutation
    let mut inv = vec![0usize; d];
    for (pos, &a) in fwd.iter().enumerate() {
        inv[a] = pos;
    }
    (fwd, inv)
}

/// Unnormalized FFT along every axis of an nd array, preserving layout.
pub fn fft_nd(values: &mut Vec<Complex64>, dims: &[usize], forward: bool) {
    let d = dims.len();
    for axis in 0..d {
        if axis == d - 1 {
            fft_rows(values, dims[d - 1], forward);
        } else {
            let (fwd, inv) = move_axis_last_perm(d, axis);
            let moved_dims: Vec<usize> = fwd.iter().map(|&a| dims[a]).collect();
            let mut moved = permute_axes(values, dims, &fwd);
            fft_rows(&mut moved, dims[axis], forward);
            *values = permute_axes(&moved, &moved_dims, &inv);
        }
    }
}

/// Per-element parity sign (-1)^(j_0 + j_1 + ...) over the raw bin indices,
/// the phase that converts raw DFT output to the [-L/2, L/2) origin convention.
fn apply_origin_parity(values: &mut [Complex64], dims: &[usize]) {
    let d = dims.len();
    let inner = dims[d - 1];
    values
        .par_chunks_exact_mut(inner)
        .enumerate()
        .for_each(|(row, chunk)| {
            let mut rem = row;
            let mut outer_parity = 0usize;
            for pos in (0..d - 1).rev() {
                outer_parity += rem % dims[pos];
                rem /= dims[pos];
            }
            for (j, slot) in chunk.iter_mut().enumerate() {
                if (outer_parity + j) % 2 == 1 {
                    *slot = -*slot;
                }
            }
        });
}

/// Continuum-convention Fourier transform of grid samples:
/// psi_hat(p_j) = (2*pi)^(-d/2) * sum_m psi(y_m) e^(-i p_j y_m) * dv.
/// Output indexed by raw FFT bins (use `AxisGrid::p` to map bins to momenta).
pub fn to_momentum(grid: &SplitGrid, values: &[Complex64]) -> Vec<Complex64> {
    let dims = grid.dims();
    let mut hat = values.to_vec();
    fft_nd(&mut hat, &dims, true);
    let scale = grid.dv() * (2.0 * std::f64::consts::PI).powf(-(grid.d() as f64) / 2.0);
    apply_origin_parity(&mut hat, &dims);
    hat.par_iter_mut().for_each(|v| *v *= scale);
    hat
}

/// Inverse of `to_momentum`.
pub fn from_momentum(grid: &SplitGrid, hat: &[Complex64]) -> Vec<Complex64> {
    let dims = grid.dims();
    let mut values = hat.to_vec();
    apply_origin_parity(&mut values, &dims);
    fft_nd(&mut values, &dims, false);
    let scale = grid.dv_p() * (2.0 * std::f64::consts::PI).powf(-(grid.d() as f64) / 2.0);
    values.par_iter_mut().for_each(|v| *v *= scale);
    values
}
