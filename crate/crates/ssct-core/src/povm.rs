//! Windowed phase-space transform and the region POVMs P_delta(E).
//!
//! Everything reduces to one kernel: translate the block window to a lattice
//! node, transform, mask momentum bins, transform back, re-multiply by the
//! window, and accumulate with the lattice weight. Regions that ignore the
//! parallel block run fiber-by-fiber on the contiguous perpendicular axes;
//! exact products compose the two block operators; everything else goes
//! through the joint two-stage quadrature, which is also the independent
//! oracle for the factorized path.
//!
//! Within a fiber the node loop is sequential, and fiber results are reduced
//! in index order, so outputs are bit-identical for any thread count.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{CoreError, Result};
use crate::fft;
use crate::field::WaveFunction;
use crate::frame::{BlockLattice, CoherentFrame};
use crate::numeric::{counter_normal, kahan_sum};
use crate::region::PhaseSpaceRegion;

const MAX_MATERIALIZED_NODES: usize = 1 << 24;

fn fft_block(
    buf: &mut Vec<Complex64>,
    dims: &[usize],
    forward: bool,
    scratch: &mut Vec<Complex64>,
) {
    if dims.len() == 1 {
        fft::fft_line(buf, scratch, forward);
    } else {
        fft::fft_nd(buf, dims, forward);
    }
}

/// Apply one block's masked POVM to a contiguous block vector, accumulating
/// into `out`. `mask` is indexed node * bins + bin.
fn block_apply_fiber(
    lat: &BlockLattice,
    dims: &[usize],
    fiber: &[Complex64],
    mask: &[bool],
    out: &mut [Complex64],
    buf: &mut Vec<Complex64>,
    scratch: &mut Vec<Complex64>,
) {
    let bins = lat.bins();
    let factor = lat.apply_factor();
    for node in 0..lat.node_count() {
        let row = &mask[node * bins..(node + 1) * bins];
        if row.iter().all(|&keep| !keep) {
            continue;
        }
        let w = lat.translated_window(node);
        buf.clear();
        buf.extend(fiber.iter().zip(w).map(|(v, &wv)| v * wv));
        fft_block(buf, dims, true, scratch);
        for (v, &keep) in buf.iter_mut().zip(row) {
            if !keep {
                *v = Complex64::default();
            }
        }
        fft_block(buf, dims, false, scratch);
        for ((o, v), &wv) in out.iter_mut().zip(buf.iter()).zip(w) {
            *o += factor * wv * v;
        }
    }
}

/// Masked quadratic-form contribution of one block vector.
fn block_form_fiber(
    lat: &BlockLattice,
    dims: &[usize],
    fiber: &[Complex64],
    mask: &[bool],
    buf: &mut Vec<Complex64>,
    scratch: &mut Vec<Complex64>,
) -> f64 {
    let bins = lat.bins();
    let mut acc = 0.0;
    for node in 0..lat.node_count() {
        let row = &mask[node * bins..(node + 1) * bins];
        if row.iter().all(|&keep| !keep) {
            continue;
        }
        let w = lat.translated_window(node);
        buf.clear();
        buf.extend(fiber.iter().zip(w).map(|(v, &wv)| v * wv));
        fft_block(buf, dims, true, scratch);
        acc += kahan_sum(
            buf.iter()
                .zip(row)
                .filter_map(|(v, &keep)| keep.then(|| v.norm_sqr())),
        );
    }
    acc * lat.form_factor()
}

/// Membership table over the perpendicular block lattice for a region that
/// ignores the parallel coordinates.
fn perp_mask(frame: &CoherentFrame, region: &PhaseSpaceRegion) -> Vec<bool> {
    let lat = frame.perp();
    let bins = lat.bins();
    let mut mask = vec![false; lat.node_count() * bins];
    for node in 0..lat.node_count() {
        let xq = lat.node_coords(node);
        for bin in 0..bins {
            mask[node * bins + bin] = region.contains(&[], &[], xq, lat.bin_coords(bin));
        }
    }
    mask
}

fn box_mask(lat: &BlockLattice, bx: &crate::region::BlockBox) -> Vec<bool> {
    let bins = lat.bins();
    let mut mask = vec![false; lat.node_count() * bins];
    for node in 0..lat.node_count() {
        let x = lat.node_coords(node);
        for bin in 0..bins {
            mask[node * bins + bin] = bx.contains(x, lat.bin_coords(bin));
        }
    }
    mask
}

fn all_mask(lat: &BlockLattice) -> Vec<bool> {
    vec![true; lat.node_count() * lat.bins()]
}

/// I (x) P_perp(mask): fiber-wise application over the contiguous perp block.
fn apply_perp_masked(frame: &CoherentFrame, mask: &[bool], psi: &WaveFunction) -> WaveFunction {
    let grid = psi.grid().clone();
    let q = grid.perp_len();
    let dims: Vec<usize> = grid.perp_axes().iter().map(|a| a.n()).collect();
    let lat = frame.perp();
    let mut out = vec![Complex64::default(); grid.len()];
    out.par_chunks_mut(q)
        .zip(psi.values().par_chunks(q))
        .for_each_init(
            || (Vec::new(), Vec::new()),
            |(buf, scratch), (ofib, ifib)| {
                block_apply_fiber(lat, &dims, ifib, mask, ofib, buf, scratch);
            },
        );
    WaveFunction::new(grid, out).expect("finite POVM output")
}

/// P_par(mask) (x) I: transpose to perp-major order and reuse the fiber kernel.
fn apply_par_masked(frame: &CoherentFrame, mask: &[bool], psi: &WaveFunction) -> WaveFunction {
    let grid = psi.grid().clone();
    let p = grid.par_len();
    let q = grid.perp_len();
    let dims: Vec<usize> = grid.par_axes().iter().map(|a| a.n()).collect();
    let lat = frame.par();
    let flipped = fft::permute_axes(psi.values(), &[p, q], &[1, 0]);
    let mut out_flipped = vec![Complex64::default(); grid.len()];
    out_flipped
        .par_chunks_mut(p)
        .zip(flipped.par_chunks(p))
        .for_each_init(
            || (Vec::new(), Vec::new()),
            |(buf, scratch), (ofib, ifib)| {
                block_apply_fiber(lat, &dims, ifib, mask, ofib, buf, scratch);
            },
        );
    let out = fft::permute_axes(&out_flipped, &[q, p], &[1, 0]);
    WaveFunction::new(grid, out).expect("finite POVM output")
}

/// Quadrature realization of P_delta(E) psi. Dispatches to the cheapest
/// exact path: fiber-wise for parallel-free regions, composed block
/// operators for exact products, the joint two-stage sum otherwise.
pub fn apply_povm(
    frame: &CoherentFrame,
    region: &PhaseSpaceRegion,
    psi: &WaveFunction,
) -> Result<WaveFunction> {
    let grid = frame.grid();
    region.validate(grid.k(), grid.d() - grid.k())?;
    frame.check_coverage(psi)?;
    if region.par_free() {
        let mask = perp_mask(frame, region);
        return Ok(apply_perp_masked(frame, &mask, psi));
    }
    if region.as_product().is_some() {
        return apply_povm_factorized(frame, region, psi);
    }
    apply_povm_general(frame, region, psi)
}

/// Product regions as independent parallel/perpendicular block transforms.
/// Rejects regions that are not exact products.
pub fn apply_povm_factorized(
    frame: &CoherentFrame,
    region: &PhaseSpaceRegion,
    psi: &WaveFunction,
) -> Result<WaveFunction> {
    let grid = frame.grid();
    region.validate(grid.k(), grid.d() - grid.k())?;
    let (par_box, perp_box) = region.as_product().ok_or_else(|| {
        CoreError::Precondition(format!(
            "factorized application needs an exact product region, got {}",
            region.describe()
        ))
    })?;
    frame.check_coverage(psi)?;
    let pmask = box_mask(frame.par(), par_box);
    let qmask = box_mask(frame.perp(), perp_box);
    let step = apply_perp_masked(frame, &qmask, psi);
    Ok(apply_par_masked(frame, &pmask, &step))
}

/// Direct joint quadrature over the full phase-space lattice; the reference
/// path every cheaper route is tested against.
pub fn apply_povm_general(
    frame: &CoherentFrame,
    region: &PhaseSpaceRegion,
    psi: &WaveFunction,
) -> Result<WaveFunction> {
    let grid = frame.grid();
    region.validate(grid.k(), grid.d() - grid.k())?;
    frame.check_coverage(psi)?;
    let mut out = vec![Complex64::default(); grid.len()];
    joint_sweep(
        frame,
        psi,
        &mut JointApply {
            region,
            out: &mut out,
        },
    )?;
    WaveFunction::new(grid.clone(), out)
}

/// <psi, P_delta(E) psi>: the weighted sum of |coefficient|^2 over region
/// nodes. Nonnegative, bounded by ||psi||^2 up to the certified tolerance,
/// monotone under region inclusion.
pub fn povm_quadratic_form(
    frame: &CoherentFrame,
    region: &PhaseSpaceRegion,
    psi: &WaveFunction,
) -> Result<f64> {
    let grid = frame.grid();
    region.validate(grid.k(), grid.d() - grid.k())?;
    frame.check_coverage(psi)?;
    if region.par_free() {
        let mask = perp_mask(frame, region);
        let q = grid.perp_len();
        let dims: Vec<usize> = grid.perp_axes().iter().map(|a| a.n()).collect();
        let lat = frame.perp();
        let fiber_forms: Vec<f64> = psi
            .values()
            .par_chunks(q)
            .map_init(
                || (Vec::new(), Vec::new()),
                |(buf, scratch), fiber| block_form_fiber(lat, &dims, fiber, &mask, buf, scratch),
            )
            .collect();
        let dv_par: f64 = grid.par_axes().iter().map(|a| a.dx()).product();
        return Ok(kahan_sum(fiber_forms.into_iter()) * dv_par);
    }
    let mut acc = JointForm { region, total: 0.0 };
    joint_sweep(frame, psi, &mut acc)?;
    Ok(acc.total * frame.par().form_factor() * frame.perp().form_factor())
}

/// ||P_delta(E) psi||.
pub fn povm_norm(
    frame: &CoherentFrame,
    region: &PhaseSpaceRegion,
    psi: &WaveFunction,
) -> Result<f64> {
    Ok(apply_povm(frame, region, psi)?.norm())
}

/// Visitor for the joint two-stage sweep.
trait JointVisitor {
    /// Called with the raw par-transform row G over par bins for a fixed
    /// (par node, perp node, perp bin); may zero entries (apply) or just
    /// inspect them (forms). Returns true when the (masked) row should be
    /// propagated back through the adjoint stages.
    fn visit(
        &mut self,
        frame: &CoherentFrame,
        par_node: usize,
        perp_node: usize,
        perp_bin: usize,
        row: &mut [Complex64],
    ) -> bool;

    fn wants_output(&self) -> bool;

    fn take_output_row(&mut self, _flat_row: usize, _row: &[Complex64]) {}
}

struct JointApply<'a> {
    region: &'a PhaseSpaceRegion,
    out: &'a mut Vec<Complex64>,
}

struct JointForm<'a> {
    region: &'a PhaseSpaceRegion,
    total: f64,
}

fn region_keep(
    frame: &CoherentFrame,
    region: &PhaseSpaceRegion,
    par_node: usize,
    par_bin: usize,
    perp_node: usize,
    perp_bin: usize,
) -> bool {
    region.contains(
        frame.par().node_coords(par_node),
        frame.par().bin_coords(par_bin),
        frame.perp().node_coords(perp_node),
        frame.perp().bin_coords(perp_bin),
    )
}

impl JointVisitor for JointApply<'_> {
    fn visit(
        &mut self,
        frame: &CoherentFrame,
        par_node: usize,
        perp_node: usize,
        perp_bin: usize,
        row: &mut [Complex64],
    ) -> bool {
        let mut any = false;
        for (par_bin, v) in row.iter_mut().enumerate() {
            if region_keep(frame, self.region, par_node, par_bin, perp_node, perp_bin) {
                any = true;
            } else {
                *v = Complex64::default();
            }
        }
        any
    }

    fn wants_output(&self) -> bool {
        true
    }

    fn take_output_row(&mut self, flat_row: usize, row: &[Complex64]) {
        let q = row.len();
        let dst = &mut self.out[flat_row * q..(flat_row + 1) * q];
        for (d, s) in dst.iter_mut().zip(row) {
            *d += s;
        }
    }
}

impl JointVisitor for JointForm<'_> {
    fn visit(
        &mut self,
        frame: &CoherentFrame,
        par_node: usize,
        perp_node: usize,
        perp_bin: usize,
        row: &mut [Complex64],
    ) -> bool {
        let mut acc = 0.0;
        for (par_bin, v) in row.iter().enumerate() {
            if region_keep(frame, self.region, par_node, par_bin, perp_node, perp_bin) {
                acc += v.norm_sqr();
            }
        }
        self.total += acc;
        false
    }

    fn wants_output(&self) -> bool {
        false
    }
}

/// The joint quadrature sweep shared by the general apply, the joint form,
/// and the materialized transform. Stage 1 window-transforms every row in
/// the perpendicular block for one perp node; stage 2 runs the parallel
/// block transform down the columns, hands each raw row to the visitor, and
/// (if requested) adjoints everything back.
fn joint_sweep(
    frame: &CoherentFrame,
    psi: &WaveFunction,
    visitor: &mut dyn JointVisitor,
) -> Result<()> {
    let grid = frame.grid();
    let p = grid.par_len();
    let q = grid.perp_len();
    let par_dims: Vec<usize> = grid.par_axes().iter().map(|a| a.n()).collect();
    let perp_dims: Vec<usize> = grid.perp_axes().iter().map(|a| a.n()).collect();
    let par_lat = frame.par();
    let perp_lat = frame.perp();
    let wants_output = visitor.wants_output();

    let mut stage1 = vec![Complex64::default(); p * q];
    for bq in 0..perp_lat.node_count() {
        let wq = perp_lat.translated_window(bq);
        // stage 1: per par row, windowed perp transform
        stage1
            .par_chunks_mut(q)
            .zip(psi.values().par_chunks(q))
            .for_each_init(Vec::new, |scratch, (dst, src)| {
                let mut row: Vec<Complex64> = src.iter().zip(wq).map(|(s, &wv)| s * wv).collect();
                fft_block(&mut row, &perp_dims, true, scratch);
                dst.copy_from_slice(&row);
            });
        // transpose to [q][p]: columns become contiguous
        let mut cols = fft::permute_axes(&stage1, &[p, q], &[1, 0]);
        // stage 2: per perp bin, run the par-block node loop
        // (sequential over perp bins: the visitor mutates shared state)
        let mut buf: Vec<Complex64> = Vec::new();
        let mut scratch: Vec<Complex64> = Vec::new();
        for jq in 0..q {
            let col = &mut cols[jq * p..(jq + 1) * p];
            let mut newcol = vec![Complex64::default(); p];
            let mut touched = false;
            for an in 0..par_lat.node_count() {
                let wp = par_lat.translated_window(an);
                buf.clear();
                buf.extend(col.iter().zip(wp).map(|(v, &wv)| v * wv));
                fft_block(&mut buf, &par_dims, true, &mut scratch);
                let keep = visitor.visit(frame, an, bq, jq, &mut buf);
                if wants_output && keep {
                    fft_block(&mut buf, &par_dims, false, &mut scratch);
                    for ((o, v), &wv) in newcol.iter_mut().zip(buf.iter()).zip(wp) {
                        *o += par_lat.apply_factor() * wv * v;
                    }
                    touched = true;
                }
            }
            if wants_output {
                if touched {
                    col.copy_from_slice(&newcol);
                } else {
                    col.fill(Complex64::default());
                }
            }
        }
        if !wants_output {
            continue;
        }
        // transpose back and run the perp adjoint per row
        let back = fft::permute_axes(&cols, &[q, p], &[1, 0]);
        let rows: Vec<(usize, Vec<Complex64>)> = back
            .par_chunks(q)
            .enumerate()
            .map_init(Vec::new, |scratch, (a, src)| {
                let mut row = src.to_vec();
                fft_block(&mut row, &perp_dims, false, scratch);
                for (v, &wv) in row.iter_mut().zip(wq) {
                    *v *= perp_lat.apply_factor() * wv;
                }
                (a, row)
            })
            .collect();
        for (a, row) in rows {
            visitor.take_output_row(a, &row);
        }
    }
    Ok(())
}

/// Resolution-of-identity defect on deterministic band-limited probe states:
/// max over probes of ||(P_par (x) I)(I (x) P_perp) psi - psi|| / ||psi||.
pub fn measure_identity_defect(frame: &CoherentFrame) -> Result<f64> {
    let grid = frame.grid().clone();
    let pmask = all_mask(frame.par());
    let qmask = all_mask(frame.perp());
    let mut worst = 0.0f64;
    for seed in 0..2u64 {
        let psi = probe_state(&grid, 0x5ee0 + seed)?;
        let once = apply_perp_masked(frame, &qmask, &psi);
        let twice = apply_par_masked(frame, &pmask, &once);
        worst = worst.max(twice.distance(&psi)? / psi.norm());
    }
    Ok(worst)
}

/// Deterministic pseudo-random band-limited state with momentum content
/// inside 0.45 of the Nyquist box.
pub fn probe_state(
    grid: &std::sync::Arc<crate::grid::SplitGrid>,
    seed: u64,
) -> Result<WaveFunction> {
    let dims = grid.dims();
    let axes = grid.axes();
    let mut hat = vec![Complex64::default(); grid.len()];
    for (flat, slot) in hat.iter_mut().enumerate() {
        let mut rem = flat;
        let mut ok = true;
        for pos in (0..dims.len()).rev() {
            let j = rem % dims[pos];
            rem /= dims[pos];
            if axes[pos].p(j).abs() > 0.45 * axes[pos].p_max() {
                ok = false;
                break;
            }
        }
        if ok {
            *slot = Complex64::new(
                counter_normal(seed, &[flat as u64, 0]),
                counter_normal(seed, &[flat as u64, 1]),
            );
        }
    }
    let values = fft::from_momentum(grid, &hat);
    WaveFunction::new(grid.clone(), values)?.normalized()
}

/// Coefficient field on the frame lattice, materialized with phases.
#[derive(Debug, Clone)]
pub struct BargmannField {
    /// [par nodes][par bins][perp nodes][perp bins], row-major.
    coeffs: Vec<Complex64>,
    par_nodes: usize,
    par_bins: usize,
    perp_nodes: usize,
    perp_bins: usize,
    /// Quadrature weight per lattice node.
    mu: f64,
    manifest: Vec<(String, String)>,
    par_node_coords: Vec<Vec<f64>>,
    par_bin_coords: Vec<Vec<f64>>,
    perp_node_coords: Vec<Vec<f64>>,
    perp_bin_coords: Vec<Vec<f64>>,
}

impl BargmannField {
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn shape(&self) -> (usize, usize, usize, usize) {
        (
            self.par_nodes,
            self.par_bins,
            self.perp_nodes,
            self.perp_bins,
        )
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn manifest(&self) -> &[(String, String)] {
        &self.manifest
    }

    pub fn coeff(
        &self,
        par_node: usize,
        par_bin: usize,
        perp_node: usize,
        perp_bin: usize,
    ) -> Complex64 {
        let idx = ((par_node * self.par_bins + par_bin) * self.perp_nodes + perp_node)
            * self.perp_bins
            + perp_bin;
        self.coeffs[idx]
    }

    /// Discrete Plancherel sum: weighted l2 norm of the coefficients, which
    /// matches ||psi|| to the frame's certified tolerance.
    pub fn weighted_norm(&self) -> f64 {
        (kahan_sum(self.coeffs.iter().map(|c| c.norm_sqr())) * self.mu).sqrt()
    }

    fn manifest_comments(&self) -> Vec<String> {
        self.manifest
            .iter()
            .map(|(k, v)| format!("{k} = {v}"))
            .collect()
    }

    /// Full coefficient table: one row per lattice node with the phase-space
    /// coordinates and re/im parts, the frame manifest as comment lines.
    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut header: Vec<String> = Vec::new();
        for (tag, coords) in [
            ("xpar", &self.par_node_coords),
            ("ppar", &self.par_bin_coords),
            ("xperp", &self.perp_node_coords),
            ("pperp", &self.perp_bin_coords),
        ] {
            for axis in 0..coords[0].len() {
                header.push(format!("{tag}{axis}"));
            }
        }
        header.push("re".into());
        header.push("im".into());
        let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
        let mut csv = crate::io::CsvWriter::create(path, &self.manifest_comments(), &header_refs)?;
        for a in 0..self.par_nodes {
            for jp in 0..self.par_bins {
                for b in 0..self.perp_nodes {
                    for jq in 0..self.perp_bins {
                        let c = self.coeff(a, jp, b, jq);
                        let mut row: Vec<f64> = Vec::with_capacity(header.len());
                        row.extend(&self.par_node_coords[a]);
                        row.extend(&self.par_bin_coords[jp]);
                        row.extend(&self.perp_node_coords[b]);
                        row.extend(&self.perp_bin_coords[jq]);
                        row.push(c.re);
                        row.push(c.im);
                        csv.row_f64(&row)?;
                    }
                }
            }
        }
        csv.finish()
    }

    /// |coefficient|^2 heat maps: the perpendicular phase plane (summing the
    /// weighted mass over the parallel lattice) and vice versa. One CSV per
    /// plane, rows (x, p, mass), manifest embedded.
    pub fn write_husimi_csv(&self, dir: &std::path::Path, stem: &str) -> Result<()> {
        let mut perp_map = vec![0.0f64; self.perp_nodes * self.perp_bins];
        let mut par_map = vec![0.0f64; self.par_nodes * self.par_bins];
        for a in 0..self.par_nodes {
            for jp in 0..self.par_bins {
                for b in 0..self.perp_nodes {
                    for jq in 0..self.perp_bins {
                        let mass = self.coeff(a, jp, b, jq).norm_sqr() * self.mu;
                        perp_map[b * self.perp_bins + jq] += mass;
                        par_map[a * self.par_bins + jp] += mass;
                    }
                }
            }
        }
        let comments = self.manifest_comments();
        for (name, map, nodes, bins, node_coords, bin_coords) in [
            (
                "perp",
                &perp_map,
                self.perp_nodes,
                self.perp_bins,
                &self.perp_node_coords,
                &self.perp_bin_coords,
            ),
            (
                "par",
                &par_map,
                self.par_nodes,
                self.par_bins,
                &self.par_node_coords,
                &self.par_bin_coords,
            ),
        ] {
            let mut header: Vec<String> =
                (0..node_coords[0].len()).map(|i| format!("x{i}")).collect();
            header.extend((0..bin_coords[0].len()).map(|i| format!("p{i}")));
            header.push("mass".into());
            let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
            let mut csv = crate::io::CsvWriter::create(
                &dir.join(format!("{stem}_husimi_{name}.csv")),
                &comments,
                &header_refs,
            )?;
            for node in 0..nodes {
                for bin in 0..bins {
                    let mut row: Vec<f64> = Vec::new();
                    row.extend(&node_coords[node]);
                    row.extend(&bin_coords[bin]);
                    row.push(map[node * bins + bin]);
                    csv.row_f64(&row)?;
                }
            }
            csv.finish()?;
        }
        Ok(())
    }
}

struct JointMaterialize<'a> {
    coeffs: &'a mut Vec<Complex64>,
    perp_nodes: usize,
    perp_bins: usize,
    par_bins: usize,
    scale: f64,
}

impl JointVisitor for JointMaterialize<'_> {
    fn visit(
        &mut self,
        frame: &CoherentFrame,
        par_node: usize,
        perp_node: usize,
        perp_bin: usize,
        row: &mut [Complex64],
    ) -> bool {
        // phases: prod over axes of e^{i p x_node} (-1)^(raw bin)
        let par_lat = frame.par();
        let perp_lat = frame.perp();
        let perp_phase = lattice_phase(
            perp_lat.node_coords(perp_node),
            perp_lat.bin_coords(perp_bin),
            perp_bin,
            &perp_dims_of(frame),
        );
        for (par_bin, v) in row.iter_mut().enumerate() {
            let par_phase = lattice_phase(
                par_lat.node_coords(par_node),
                par_lat.bin_coords(par_bin),
                par_bin,
                &par_dims_of(frame),
            );
            let idx = ((par_node * self.par_bins + par_bin) * self.perp_nodes + perp_node)
                * self.perp_bins
                + perp_bin;
            self.coeffs[idx] = *v * par_phase * perp_phase * self.scale;
        }
        false
    }

    fn wants_output(&self) -> bool {
        false
    }
}

fn par_dims_of(frame: &CoherentFrame) -> Vec<usize> {
    frame.grid().par_axes().iter().map(|a| a.n()).collect()
}

fn perp_dims_of(frame: &CoherentFrame) -> Vec<usize> {
    frame.grid().perp_axes().iter().map(|a| a.n()).collect()
}

/// e^{i p . x} times the origin parity (-1)^(sum of raw bin indices).
fn lattice_phase(x: &[f64], p: &[f64], flat_bin: usize, dims: &[usize]) -> Complex64 {
    let mut dot = 0.0;
    for (a, b) in x.iter().zip(p) {
        dot += a * b;
    }
    let mut rem = flat_bin;
    let mut parity = 0usize;
    for pos in (0..dims.len()).rev() {
        parity += rem % dims[pos];
        rem /= dims[pos];
    }
    let sign = if parity % 2 == 0 { 1.0 } else { -1.0 };
    Complex64::from_polar(sign, dot)
}

/// Materialize the Fourier-Bargmann coefficients
/// c(x, p) = (2 pi)^(-d/2) <eta_{x,p;delta}, psi> on the frame lattice.
pub fn bargmann_transform(frame: &CoherentFrame, psi: &WaveFunction) -> Result<BargmannField> {
    frame.check_coverage(psi)?;
    let par_nodes = frame.par().node_count();
    let perp_nodes = frame.perp().node_count();
    let par_bins = frame.par().bins();
    let perp_bins = frame.perp().bins();
    let total = par_nodes
        .checked_mul(par_bins)
        .and_then(|v| v.checked_mul(perp_nodes))
        .and_then(|v| v.checked_mul(perp_bins))
        .ok_or_else(|| CoreError::Precondition("lattice size overflow".into()))?;
    if total > MAX_MATERIALIZED_NODES {
        return Err(CoreError::Precondition(format!(
            "refusing to materialize {total} lattice coefficients (limit {MAX_MATERIALIZED_NODES}); \
             use the streaming POVM operations instead"
        )));
    }
    let mut coeffs = vec![Complex64::default(); total];
    let scale = frame.par().coeff_scale() * frame.perp().coeff_scale();
    let mut visitor = JointMaterialize {
        coeffs: &mut coeffs,
        perp_nodes,
        perp_bins,
        par_bins,
        scale,
    };
    joint_sweep(frame, psi, &mut visitor)?;
    let collect_coords = |lat: &BlockLattice, nodes: bool| -> Vec<Vec<f64>> {
        if nodes {
            (0..lat.node_count())
                .map(|i| lat.node_coords(i).to_vec())
                .collect()
        } else {
            (0..lat.bins())
                .map(|i| lat.bin_coords(i).to_vec())
                .collect()
        }
    };
    Ok(BargmannField {
        coeffs,
        par_nodes,
        par_bins,
        perp_nodes,
        perp_bins,
        mu: frame.par().mu() * frame.perp().mu(),
        manifest: frame.manifest(),
        par_node_coords: collect_coords(frame.par(), true),
        par_bin_coords: collect_coords(frame.par(), false),
        perp_node_coords: collect_coords(frame.perp(), true),
        perp_bin_coords: collect_coords(frame.perp(), false),
    })
}

/// Direct lattice-sum oracle for the strip multiplier: the POVM of
/// SpaceStrip(R) acts as multiplication by
/// sum over perp nodes inside B_R of (node spacing) |w(y - x_node)|^2.
pub fn strip_multiplier_oracle(frame: &CoherentFrame, radius: f64) -> Vec<f64> {
    let lat = frame.perp();
    let q = lat.bins();
    let mut mult = vec![0.0; q];
    let weight: f64 = frame
        .grid()
        .perp_axes()
        .iter()
        .zip(lat.strides())
        .map(|(a, &s)| s as f64 * a.dx())
        .product();
    for node in 0..lat.node_count() {
        if lat.node_radius(node) <= radius {
            let w = lat.translated_window(node);
            for (m, &wv) in mult.iter_mut().zip(w) {
                *m += weight * wv * wv;
            }
        }
    }
    mult
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::CoherentFrame;
    use crate::grid::make_grid;
    use crate::region::{BlockBox, PhaseSpaceRegion};
    use std::sync::Arc;

    fn small_frame(delta: f64) -> (Arc<crate::grid::SplitGrid>, CoherentFrame) {
        let grid = make_grid(1, &[(64, 40.0)], &[(64, 40.0)]).unwrap();
        let frame = CoherentFrame::new(grid.clone(), delta).unwrap();
        (grid, frame)
    }

    #[test]
    fn resolution_of_identity() {
        let (grid, frame) = small_frame(0.5);
        let psi = probe_state(&grid, 7).unwrap();
        let back = apply_povm(&frame, &PhaseSpaceRegion::All, &psi).unwrap();
        let defect = back.distance(&psi).unwrap();
        assert!(defect < 1e-10, "defect {defect}");
    }

    #[test]
    fn quadratic_form_bounds_and_partition() {
        let (grid, frame) = small_frame(0.5);
        let psi = probe_state(&grid, 9).unwrap();
        let all = povm_quadratic_form(&frame, &PhaseSpaceRegion::All, &psi).unwrap();
        assert!((all - 1.0).abs() < 1e-10, "form(All) = {all}");
        let far = PhaseSpaceRegion::Far { n: 3.0, m: 0.4 };
        let sur = PhaseSpaceRegion::Sur { n: 3.0, m: 0.4 };
        let f = povm_quadratic_form(&frame, &far, &psi).unwrap();
        let s = povm_quadratic_form(&frame, &sur, &psi).unwrap();
        assert!(f >= 0.0 && s >= 0.0);
        assert!(f <= 1.0 + 1e-10 && s <= 1.0 + 1e-10);
        // exact lattice partition: the two sums split form(All) exactly
        assert!((f + s - all).abs() < 1e-12, "{f} + {s} != {all}");
        // monotone under inclusion
        let far_bigger = PhaseSpaceRegion::Far { n: 2.0, m: 0.4 };
        let fb = povm_quadratic_form(&frame, &far_bigger, &psi).unwrap();
        assert!(fb >= f - 1e-14);
    }

    #[test]
    fn povm_is_self_adjoint_and_contractive() {
        let (grid, frame) = small_frame(0.5);
        let psi = probe_state(&grid, 11).unwrap();
        let phi = probe_state(&grid, 12).unwrap();
        let region = PhaseSpaceRegion::Out { n: 2.0, m: 0.3 };
        let p_psi = apply_povm(&frame, &region, &psi).unwrap();
        let p_phi = apply_povm(&frame, &region, &phi).unwrap();
        let a = phi.inner(&p_psi).unwrap();
        let b = p_phi.inner(&psi).unwrap();
        assert!((a - b).norm() < 1e-10, "self-adjointness: {a} vs {b}");
        assert!(p_psi.norm() <= psi.norm() * (1.0 + 1e-10));
        // positivity of the form
        let q = povm_quadratic_form(&frame, &region, &psi).unwrap();
        assert!(q >= 0.0);
    }

    #[test]
    fn out_in_parts_sum_to_far() {
        let (grid, frame) = small_frame(0.5);
        let psi = probe_state(&grid, 13).unwrap();
        let far = apply_povm(&frame, &PhaseSpaceRegion::Far { n: 2.0, m: 0.3 }, &psi).unwrap();
        let out = apply_povm(&frame, &PhaseSpaceRegion::Out { n: 2.0, m: 0.3 }, &psi).unwrap();
        let inp = apply_povm(&frame, &PhaseSpaceRegion::In { n: 2.0, m: 0.3 }, &psi).unwrap();
        let sum = out.add_scaled(&inp, Complex64::new(1.0, 0.0)).unwrap();
        assert!(sum.distance(&far).unwrap() < 1e-12);
    }

    #[test]
    fn momentum_interval_identity_per_node() {
        // sum over momentum bins of mu |c|^2 at one x-node equals the
        // windowed mass integral: discrete Plancherel per node.
        let grid = make_grid(1, &[(32, 20.0)], &[(32, 20.0)]).unwrap();
        let frame = CoherentFrame::new(grid.clone(), 0.5).unwrap();
        let psi = probe_state(&grid, 21).unwrap();
        let field = bargmann_transform(&frame, &psi).unwrap();
        let (pn, pb, qn, qb) = field.shape();
        // pick a lattice x-node (par node 1, perp node 2)
        let (a, b) = (1usize.min(pn - 1), 2usize.min(qn - 1));
        let mut lhs = 0.0;
        for jp in 0..pb {
            for jq in 0..qb {
                lhs += field.coeff(a, jp, b, jq).norm_sqr();
            }
        }
        lhs *= grid.dv_p(); // product of dp over all axes = bin weight
                            // rhs: integral of |w(y - x) psi(y)|^2 over the grid
        let wp = frame.par().translated_window(a);
        let wq = frame.perp().translated_window(b);
        let q = grid.perp_len();
        let mut rhs = 0.0;
        for (flat, v) in psi.values().iter().enumerate() {
            let (ia, ib) = (flat / q, flat % q);
            let w = wp[ia] * wq[ib];
            rhs += (w * w) * v.norm_sqr();
        }
        rhs *= grid.dv();
        assert!(
            (lhs - rhs).abs() < 1e-10 * rhs.max(1e-30),
            "per-node Plancherel: {lhs} vs {rhs}"
        );
    }

    #[test]
    fn bargmann_plancherel_and_peak_coefficient() {
        let grid = make_grid(1, &[(32, 20.0)], &[(32, 20.0)]).unwrap();
        let frame = CoherentFrame::new(grid.clone(), 0.5).unwrap();
        let psi = probe_state(&grid, 31).unwrap();
        let field = bargmann_transform(&frame, &psi).unwrap();
        assert!((field.weighted_norm() - 1.0).abs() < 1e-10);
        // zero state maps to the zero field
        let zero = crate::field::WaveFunction::zero(grid.clone());
        let zf = bargmann_transform(&frame, &zero).unwrap();
        assert!(zf.coeffs().iter().all(|c| c.norm() == 0.0));
        // coherent state at a lattice node: coefficient magnitude (2 pi)^(-d/2)
        let (pn, qn) = (frame.par().node_count(), frame.perp().node_count());
        let (a, b) = (pn / 2, qn / 2);
        let x = [
            frame.par().node_coords(a)[0],
            frame.perp().node_coords(b)[0],
        ];
        let jp = 3usize;
        let jq = 30usize;
        let p = [grid.axes()[0].p(jp), grid.axes()[1].p(jq)];
        let eta = frame.coherent_state(&x, &p).unwrap();
        let ef = bargmann_transform(&frame, &eta).unwrap();
        let peak = ef.coeff(a, jp, b, jq).norm();
        let expected = (2.0 * std::f64::consts::PI).powi(-1); // d = 2
        assert!(
            (peak - expected).abs() < 1e-10,
            "peak coefficient {peak} vs {expected}"
        );
    }

    #[test]
    fn factorized_matches_joint_on_products() {
        let (grid, frame) = small_frame(0.5);
        let psi = probe_state(&grid, 41).unwrap();
        let region = PhaseSpaceRegion::Product {
            par: BlockBox {
                x: vec![(-8.0, 8.0)],
                p: vec![(-1.5, 1.5)],
            },
            perp: BlockBox {
                x: vec![(-5.0, 5.0)],
                p: vec![(-2.0, 2.0)],
            },
        };
        let fast = apply_povm_factorized(&frame, &region, &psi).unwrap();
        let joint = apply_povm_general(&frame, &region, &psi).unwrap();
        let dev = fast.distance(&joint).unwrap();
        assert!(dev < 1e-10, "factorized vs joint deviation {dev}");
        // non-product regions are rejected
        assert!(
            apply_povm_factorized(&frame, &PhaseSpaceRegion::Out { n: 1.0, m: 0.1 }, &psi).is_err()
        );
    }

    #[test]
    fn tensor_output_on_elementary_tensors() {
        // P(E_par x E_perp) on psi_par (x) psi_perp has rank-one structure.
        let (grid, frame) = small_frame(0.5);
        // build an elementary tensor from two 1-D bump packets
        let par_axis = &grid.par_axes()[0];
        let perp_axis = &grid.perp_axes()[0];
        let q = grid.perp_len();
        let fpar: Vec<Complex64> = (0..par_axis.n())
            .map(|i| {
                let x = par_axis.x(i);
                Complex64::from_polar((-(x * x) / 16.0).exp(), 0.4 * x)
            })
            .collect();
        let fperp: Vec<Complex64> = (0..perp_axis.n())
            .map(|i| {
                let x = perp_axis.x(i);
                Complex64::from_polar((-(x - 1.0) * (x - 1.0) / 16.0).exp(), -0.7 * x)
            })
            .collect();
        let mut values = vec![Complex64::default(); grid.len()];
        for (flat, slot) in values.iter_mut().enumerate() {
            *slot = fpar[flat / q] * fperp[flat % q];
        }
        let psi = crate::field::WaveFunction::new(grid.clone(), values)
            .unwrap()
            .normalized()
            .unwrap();
        let region = PhaseSpaceRegion::Product {
            par: BlockBox {
                x: vec![(-6.0, 6.0)],
                p: vec![(-1.2, 1.2)],
            },
            perp: BlockBox {
                x: vec![(-4.0, 6.0)],
                p: vec![(-1.8, 0.6)],
            },
        };
        let out = apply_povm_factorized(&frame, &region, &psi).unwrap();
        // rank-1 check: out(a,b) * out(a',b') = out(a,b') * out(a',b)
        let v = out.values();
        let (a1, a2, b1, b2) = (20usize, 40usize, 22usize, 44usize);
        let lhs = v[a1 * q + b1] * v[a2 * q + b2];
        let rhs = v[a1 * q + b2] * v[a2 * q + b1];
        assert!(
            (lhs - rhs).norm() < 1e-12,
            "rank-1 structure violated: {lhs} vs {rhs}"
        );
    }

    #[test]
    fn bargmann_exports_write_tables() {
        let grid = make_grid(1, &[(32, 20.0)], &[(32, 20.0)]).unwrap();
        let frame = CoherentFrame::new(grid.clone(), 0.5).unwrap();
        let psi = probe_state(&grid, 91).unwrap();
        let field = bargmann_transform(&frame, &psi).unwrap();
        let dir = std::env::temp_dir().join("ssct_povm_export");
        std::fs::create_dir_all(&dir).unwrap();
        field.write_csv(&dir.join("coeffs.csv")).unwrap();
        field.write_husimi_csv(&dir, "coeffs").unwrap();
        let text = std::fs::read_to_string(dir.join("coeffs.csv")).unwrap();
        assert!(text.starts_with("# window"), "manifest header missing");
        assert!(text.contains("xpar0,ppar0,xperp0,pperp0,re,im"));
        // the heat-map masses sum to the weighted norm squared
        let husimi = std::fs::read_to_string(dir.join("coeffs_husimi_perp.csv")).unwrap();
        let total: f64 = husimi
            .lines()
            .filter(|l| !l.starts_with('#') && !l.starts_with('x'))
            .map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap())
            .sum();
        assert!((total - 1.0).abs() < 1e-8, "husimi mass {total}");
    }

    #[test]
    fn momentum_separated_povms_annihilate() {
        // P_{delta/2}(E) P_{delta/2}(F) = 0 when the momentum boxes are
        // delta-separated: band-limits make the product exactly zero.
        let grid = make_grid(1, &[(64, 40.0)], &[(64, 40.0)]).unwrap();
        let delta = 1.0;
        let half = CoherentFrame::new(grid.clone(), delta / 2.0).unwrap();
        let psi = probe_state(&grid, 51).unwrap();
        // F: perp momenta in [0.5, 1.5]; E: perp momenta in [-3, -0.6].
        // d(F support + B_{delta/2}, E box) >= delta gap checked by construction.
        let f_box = PhaseSpaceRegion::Product {
            par: BlockBox {
                x: vec![(-20.0, 20.0)],
                p: vec![(-7.0, 7.0)],
            },
            perp: BlockBox {
                x: vec![(-20.0, 20.0)],
                p: vec![(0.5, 1.5)],
            },
        };
        let e_box = PhaseSpaceRegion::Product {
            par: BlockBox {
                x: vec![(-20.0, 20.0)],
                p: vec![(-7.0, 7.0)],
            },
            perp: BlockBox {
                x: vec![(-20.0, 20.0)],
                p: vec![(-3.0, -0.6)],
            },
        };
        let pf = apply_povm(&half, &f_box, &psi).unwrap();
        let pef = apply_povm(&half, &e_box, &pf).unwrap();
        assert!(pef.norm() < 1e-12, "annihilation violated: {}", pef.norm());
    }

    #[test]
    fn full_parallel_product_matches_the_space_strip() {
        // E_par = everything, E_perp = B_n x all momenta: the factorized
        // application must agree with the perp-only SpaceStrip operator.
        let (grid, frame) = small_frame(0.5);
        let psi = probe_state(&grid, 77).unwrap();
        let n = 4.0;
        let half = grid.par_axes()[0].length() / 2.0;
        let p_max = grid.par_axes()[0].p_max();
        let product = PhaseSpaceRegion::Product {
            par: BlockBox {
                x: vec![(-half, half)],
                p: vec![(-p_max, p_max)],
            },
            perp: BlockBox {
                x: vec![(-n, n)],
                p: vec![(-grid.perp_axes()[0].p_max(), grid.perp_axes()[0].p_max())],
            },
        };
        let via_product = apply_povm_factorized(&frame, &product, &psi).unwrap();
        let via_strip = apply_povm(&frame, &PhaseSpaceRegion::SpaceStrip { r: n }, &psi).unwrap();
        let dev = via_product.distance(&via_strip).unwrap();
        assert!(dev < 1e-8, "product vs strip deviation {dev}");
    }

    #[test]
    fn strip_povm_is_the_window_smoothed_multiplier() {
        let (grid, frame) = small_frame(0.5);
        let psi = probe_state(&grid, 61).unwrap();
        let r = 3.0;
        let out = apply_povm(&frame, &PhaseSpaceRegion::SpaceStrip { r }, &psi).unwrap();
        let mult = strip_multiplier_oracle(&frame, r);
        let q = grid.perp_len();
        let mut worst = 0.0f64;
        for (flat, (o, v)) in out.values().iter().zip(psi.values()).enumerate() {
            let expected = v * mult[flat % q];
            worst = worst.max((o - expected).norm());
        }
        assert!(worst < 1e-12, "multiplier deviation {worst}");
    }

    #[test]
    fn band_limited_states_vanish_on_separated_tubes() {
        // transverse Fourier support outside B_alpha, tube momenta inside
        // B_m with m + 2 delta < alpha: every coefficient is exactly zero.
        let grid = make_grid(1, &[(64, 40.0)], &[(64, 40.0)]).unwrap();
        let frame = CoherentFrame::new(grid.clone(), 0.25).unwrap();
        let alpha = 1.0;
        // build a state with perp momentum support in [1.1, 2.0]
        let perp_axis = &grid.perp_axes()[0];
        let q = grid.perp_len();
        let mut hat = vec![Complex64::default(); grid.len()];
        for (flat, slot) in hat.iter_mut().enumerate() {
            let (a, b) = (flat / q, flat % q);
            let ppar = grid.axes()[0].p(a);
            let pperp = perp_axis.p(b);
            if ppar.abs() < 2.0 && pperp > 1.1 && pperp < 2.0 {
                *slot = Complex64::new(
                    counter_normal(71, &[flat as u64, 0]),
                    counter_normal(71, &[flat as u64, 1]),
                );
            }
        }
        let psi = crate::field::WaveFunction::new(grid.clone(), fft::from_momentum(&grid, &hat))
            .unwrap()
            .normalized()
            .unwrap();
        assert!(psi.perp_fourier_mass_inside(alpha) < 1e-14);
        let m = 0.4; // m + 2 delta = 0.9 < alpha
        let tube = PhaseSpaceRegion::TransverseTube { n: 5.0, m };
        let out = apply_povm(&frame, &tube, &psi).unwrap();
        assert!(out.norm() < 1e-12, "tube norm {}", out.norm());
    }
}
