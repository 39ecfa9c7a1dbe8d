//! The phase-space property suite: resolution of identity, positivity and
//! contraction of every tested region POVM, the space-localization
//! multiplier identity, momentum-support annihilation, and the
//! tensor-factorization agreement, each at its pinned tolerance, reported
//! as one named result per check.
//!
//! The default configuration is the d = 2, k = 1 reference grid (512 x 512,
//! length 200) with delta in {1, 1/2, 1/4}.

use std::sync::Arc;

use crate::error::Result;
use crate::frame::CoherentFrame;
use crate::grid::{make_grid, SplitGrid};
use crate::povm::{
    apply_povm, apply_povm_factorized, apply_povm_general, bargmann_transform, povm_norm,
    povm_quadratic_form, probe_state, strip_multiplier_oracle,
};
use crate::region::{BlockBox, PhaseSpaceRegion};
use crate::scenario::{band_limited_packet, CheckResult};

pub struct SelftestConfig {
    pub grid: Arc<SplitGrid>,
    pub deltas: Vec<f64>,
    /// Strides used for the joint-oracle comparisons (coarser keeps the
    /// direct full-dimension sum affordable); None picks the exactness-bound
    /// default per delta.
    pub oracle_strides: Option<Vec<usize>>,
}

impl SelftestConfig {
    pub fn reference() -> Result<Self> {
        Ok(SelftestConfig {
            grid: make_grid(1, &[(512, 200.0)], &[(512, 200.0)])?,
            deltas: vec![1.0, 0.5, 0.25],
            oracle_strides: None,
        })
    }

    pub fn small() -> Result<Self> {
        // same spacing as the reference grid so the delta = 1 coverage
        // margin still clears the probe states' momentum box
        Ok(SelftestConfig {
            grid: make_grid(1, &[(128, 50.0)], &[(128, 50.0)])?,
            deltas: vec![1.0, 0.5],
            oracle_strides: None,
        })
    }
}

const TOL_IDENTITY: f64 = 1e-6;
const TOL_SPACELOC: f64 = 1e-6;
const TOL_PSUPPORT: f64 = 1e-8;
const TOL_FACTORIZATION: f64 = 1e-8;
const TOL_CONTRACTION: f64 = 1e-6;

fn push(results: &mut Vec<CheckResult>, name: String, passed: bool, details: String) {
    results.push(CheckResult {
        name,
        passed,
        details,
    });
}

/// Run the full suite; one result per (check, delta).
pub fn run(config: &SelftestConfig) -> Result<Vec<CheckResult>> {
    let grid = &config.grid;
    let mut results = Vec::new();

    // shared probe states
    let probes = [probe_state(grid, 0xA11C)?, probe_state(grid, 0xB22D)?];
    // a physical packet for the norm-bound transfer check
    let half_len = grid.perp_axes()[0].length() / 2.0;
    let packet = band_limited_packet(
        grid,
        &[0.0, (-half_len / 8.0).max(-12.0)],
        &[0.3, 1.3],
        &[0.2, 0.25],
    )?;

    for &delta in &config.deltas {
        let frame = CoherentFrame::new(grid.clone(), delta)?;
        let tag = format!("delta={delta}");

        // resolution of identity, as certified plus on the probe set
        let mut defect = frame.certified_tolerance();
        for psi in &probes {
            let back = apply_povm(&frame, &PhaseSpaceRegion::All, psi)?;
            defect = defect.max(back.distance(psi)? / psi.norm());
        }
        push(
            &mut results,
            format!("resolution_of_identity[{tag}]"),
            defect <= TOL_IDENTITY,
            format!("defect {defect:.3e} (limit {TOL_IDENTITY:.0e})"),
        );

        // positivity and contraction of every tested region POVM
        let regions: Vec<PhaseSpaceRegion> = vec![
            PhaseSpaceRegion::All,
            PhaseSpaceRegion::Far { n: 4.0, m: 0.5 },
            PhaseSpaceRegion::Sur { n: 4.0, m: 0.5 },
            PhaseSpaceRegion::Out { n: 4.0, m: 0.5 },
            PhaseSpaceRegion::In { n: 4.0, m: 0.5 },
            PhaseSpaceRegion::SpaceStrip { r: 3.0 },
            PhaseSpaceRegion::TransverseTube { n: 6.0, m: 0.4 },
            PhaseSpaceRegion::Not(Box::new(PhaseSpaceRegion::Far { n: 4.0, m: 0.5 })),
            PhaseSpaceRegion::Union(vec![
                PhaseSpaceRegion::SpaceStrip { r: 2.0 },
                PhaseSpaceRegion::TransverseTube { n: 8.0, m: 0.3 },
            ]),
        ];
        let mut worst_form: f64 = 0.0;
        let mut worst_norm: f64 = 0.0;
        let mut form_ok = true;
        for region in &regions {
            for psi in &probes {
                let q = povm_quadratic_form(&frame, region, psi)?;
                let nsq = psi.norm_sq();
                if q < -1e-15 || q > nsq * (1.0 + TOL_CONTRACTION) {
                    form_ok = false;
                }
                worst_form = worst_form.max(q / nsq);
                let out_norm = povm_norm(&frame, region, psi)?;
                worst_norm = worst_norm.max(out_norm / psi.norm());
            }
        }
        // partition: Far + Sur forms split form(All) exactly
        let far = povm_quadratic_form(
            &frame,
            &PhaseSpaceRegion::Far { n: 4.0, m: 0.5 },
            &probes[0],
        )?;
        let sur = povm_quadratic_form(
            &frame,
            &PhaseSpaceRegion::Sur { n: 4.0, m: 0.5 },
            &probes[0],
        )?;
        let all = povm_quadratic_form(&frame, &PhaseSpaceRegion::All, &probes[0])?;
        let partition_gap = (far + sur - all).abs();
        push(
            &mut results,
            format!("positivity_contraction[{tag}]"),
            form_ok
                && worst_norm <= 1.0 + TOL_CONTRACTION
                && partition_gap <= 1e-12,
            format!(
                "max form {worst_form:.9}, max norm ratio {worst_norm:.9}, far+sur gap {partition_gap:.2e}"
            ),
        );

        // space localization: P(SpaceStrip(R)) equals the window-smoothed
        // multiplier built by the direct lattice sum
        let r = 3.0;
        let mult = strip_multiplier_oracle(&frame, r);
        let q = grid.perp_len();
        let mut worst_loc = 0.0f64;
        for psi in &probes {
            let out = apply_povm(&frame, &PhaseSpaceRegion::SpaceStrip { r }, psi)?;
            let mut dev = 0.0f64;
            for (flat, (o, v)) in out.values().iter().zip(psi.values()).enumerate() {
                dev = dev.max((o - v * mult[flat % q]).norm());
            }
            worst_loc = worst_loc.max(dev);
        }
        push(
            &mut results,
            format!("space_localization[{tag}]"),
            worst_loc <= TOL_SPACELOC,
            format!("max pointwise deviation {worst_loc:.3e} (limit {TOL_SPACELOC:.0e})"),
        );

        // momentum-support annihilation at half scale:
        // P_{d/2}(E) P_{d/2}(F) = 0 for delta-separated momentum boxes
        let half = CoherentFrame::new(grid.clone(), delta / 2.0)?;
        let p_hi = grid.perp_axes()[0].p_max();
        let f_box = PhaseSpaceRegion::Product {
            par: full_par_box(grid),
            perp: BlockBox {
                x: vec![(-half_len, half_len)],
                p: vec![(0.5, 0.5 + delta)],
            },
        };
        let e_box = PhaseSpaceRegion::Product {
            par: full_par_box(grid),
            perp: BlockBox {
                x: vec![(-half_len, half_len)],
                p: vec![(-p_hi, 0.5 - 2.0 * delta)],
            },
        };
        let mut worst_annihilation = 0.0f64;
        for psi in &probes {
            let pf = apply_povm(&half, &f_box, psi)?;
            let pef = apply_povm(&half, &e_box, &pf)?;
            worst_annihilation = worst_annihilation.max(pef.norm());
        }
        push(
            &mut results,
            format!("momentum_annihilation[{tag}]"),
            worst_annihilation <= TOL_PSUPPORT,
            format!("|P(E) P(F) psi| {worst_annihilation:.3e} (limit {TOL_PSUPPORT:.0e})"),
        );

        // tensor factorization: independent block transforms against the
        // direct joint quadrature, on a coarse-stride frame where the joint
        // sum stays affordable
        let oracle_frame = oracle_frame(grid, delta, config.oracle_strides.as_deref())?;
        let region = PhaseSpaceRegion::Product {
            par: BlockBox {
                x: vec![(-20.0, 20.0)],
                p: vec![(-1.5, 1.5)],
            },
            perp: BlockBox {
                x: vec![(-8.0, 8.0)],
                p: vec![(-2.0, 2.0)],
            },
        };
        let fast = apply_povm_factorized(&oracle_frame, &region, &probes[0])?;
        let joint = apply_povm_general(&oracle_frame, &region, &probes[0])?;
        let fact_dev = fast.distance(&joint)?;
        push(
            &mut results,
            format!("tensor_factorization[{tag}]"),
            fact_dev <= TOL_FACTORIZATION,
            format!("factorized vs joint {fact_dev:.3e} (limit {TOL_FACTORIZATION:.0e})"),
        );

        // norm-bound transfer: ||A P(E) psi|| bounded by the lattice
        // quadrature of ||A eta_node||^2 over E, with 5% slack. A is the
        // strip restriction; E a far region.
        let a_radius = 2.0;
        let region = PhaseSpaceRegion::Far { n: 6.0, m: 0.5 };
        let lat = frame.perp();
        let mut quad = 0.0;
        for node in 0..lat.node_count() {
            if lat.node_radius(node) <= 6.0 {
                continue;
            }
            let w = lat.translated_window(node);
            // ||chi_{B_r} eta_node||^2 summed over the momentum bins in the
            // region: the phase factor drops, so the integrand is
            // (bin count in B_m^c) x the restricted window mass
            let restricted: f64 = w
                .iter()
                .enumerate()
                .filter(|&(i, _)| grid.perp_radius(i) <= a_radius)
                .map(|(_, &wv)| wv * wv)
                .sum::<f64>()
                * grid.perp_axes().iter().map(|a| a.dx()).product::<f64>();
            let bins_outside = (0..lat.bins()).filter(|&b| lat.bin_radius(b) > 0.5).count() as f64;
            quad += restricted * bins_outside;
        }
        quad *= lat.mu() / (2.0 * std::f64::consts::PI).powi((grid.d() - grid.k()) as i32);
        let bound = quad.sqrt();
        let mut worst_ratio = 0.0f64;
        for psi in [&probes[0], &packet] {
            let p_psi = apply_povm(&frame, &region, psi)?;
            let restricted = p_psi.restrict_strip(a_radius, false)?;
            worst_ratio = worst_ratio.max(restricted.norm() / psi.norm());
        }
        push(
            &mut results,
            format!("norm_bound_transfer[{tag}]"),
            worst_ratio <= bound * 1.05 + 1e-12,
            format!("measured {worst_ratio:.3e} vs quadrature bound {bound:.3e}"),
        );
    }

    // Plancherel of the materialized transform on a small sub-grid scale
    // frame (independent of delta sweep)
    let small = make_grid(1, &[(64, 50.0)], &[(64, 50.0)])?;
    let frame = CoherentFrame::new(small.clone(), 0.5)?;
    let psi = probe_state(&small, 0xC33E)?;
    let field = bargmann_transform(&frame, &psi)?;
    let plancherel = (field.weighted_norm() - psi.norm()).abs();
    push(
        &mut results,
        "bargmann_plancherel".to_string(),
        plancherel <= 1e-6,
        format!("weighted-norm defect {plancherel:.3e} (limit 1e-6)"),
    );

    Ok(results)
}

fn full_par_box(grid: &Arc<SplitGrid>) -> BlockBox {
    let half = grid.par_axes()[0].length() / 2.0;
    let p = grid.par_axes()[0].p_max();
    BlockBox {
        x: vec![(-half, half)],
        p: vec![(-p, p)],
    }
}

/// Coarse-stride frame for joint-oracle comparisons: the largest strides that
/// still satisfy the exactness bound, so the direct full-dimension sum stays
/// affordable at reference scale.
fn oracle_frame(
    grid: &Arc<SplitGrid>,
    delta: f64,
    strides: Option<&[usize]>,
) -> Result<CoherentFrame> {
    if let Some(s) = strides {
        return CoherentFrame::with_strides(grid.clone(), delta, &s[..grid.k()], &s[grid.k()..]);
    }
    let rho = delta / 2f64.sqrt();
    let pick = |axis: &crate::grid::AxisGrid| -> usize {
        let mut s = 1usize;
        while s * 2 <= axis.n() / 4 && (s * 2) as f64 * axis.dx() < std::f64::consts::PI / rho * 0.9
        {
            s *= 2;
        }
        s
    };
    let par: Vec<usize> = grid.par_axes().iter().map(pick).collect();
    let perp: Vec<usize> = grid.perp_axes().iter().map(pick).collect();
    CoherentFrame::with_strides(grid.clone(), delta, &par, &perp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suite_passes() {
        let config = SelftestConfig::small().unwrap();
        let results = run(&config).unwrap();
        assert!(!results.is_empty());
        for r in &results {
            assert!(r.passed, "{}: {}", r.name, r.details);
        }
    }
}
