//! Symbolic phase-space regions over (x_par, p_par, x_perp, p_perp).
//!
//! Membership is pure and total, with closed-boundary conventions fixed once:
//! balls B_n are closed, their complements open, and the outgoing half of the
//! far set takes <x_perp, p_perp> >= 0. Far(n,m) and Sur(n,m) partition
//! phase space exactly; Out and In partition Far exactly, so quadrature
//! nodes are never double-counted.

use crate::error::{CoreError, Result};

/// Axis-aligned box in one block's phase space: closed intervals per
/// position axis and per momentum axis.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockBox {
    pub x: Vec<(f64, f64)>,
    pub p: Vec<(f64, f64)>,
}

impl BlockBox {
    pub fn contains(&self, x: &[f64], p: &[f64]) -> bool {
        x.iter()
            .zip(&self.x)
            .all(|(&c, &(lo, hi))| c >= lo && c <= hi)
            && p.iter()
                .zip(&self.p)
                .all(|(&c, &(lo, hi))| c >= lo && c <= hi)
    }

    pub fn validate(&self, axes: usize) -> Result<()> {
        if self.x.len() != axes || self.p.len() != axes {
            return Err(CoreError::Precondition(format!(
                "box has {} position / {} momentum intervals for a {axes}-axis block",
                self.x.len(),
                self.p.len()
            )));
        }
        for &(lo, hi) in self.x.iter().chain(self.p.iter()) {
            if !(lo <= hi) {
                return Err(CoreError::Precondition(format!(
                    "empty interval [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PhaseSpaceRegion {
    /// All of phase space.
    All,
    /// ||x_perp|| > n and ||p_perp|| > m.
    Far {
        n: f64,
        m: f64,
    },
    /// Complement of Far.
    Sur {
        n: f64,
        m: f64,
    },
    /// Far with <x_perp, p_perp> >= 0.
    Out {
        n: f64,
        m: f64,
    },
    /// Far with <x_perp, p_perp> < 0.
    In {
        n: f64,
        m: f64,
    },
    /// ||x_perp|| <= r, the spatial strip with free momenta.
    SpaceStrip {
        r: f64,
    },
    /// ||x_perp|| > n with ||p_perp|| <= m: spatially far, transversally slow.
    TransverseTube {
        n: f64,
        m: f64,
    },
    /// Exact product of a parallel-block box and a perpendicular-block box.
    Product {
        par: BlockBox,
        perp: BlockBox,
    },
    Not(Box<PhaseSpaceRegion>),
    Union(Vec<PhaseSpaceRegion>),
}

impl PhaseSpaceRegion {
    pub fn contains(&self, xpar: &[f64], ppar: &[f64], xperp: &[f64], pperp: &[f64]) -> bool {
        let r2 = || xperp.iter().map(|c| c * c).sum::<f64>().sqrt();
        let q2 = || pperp.iter().map(|c| c * c).sum::<f64>().sqrt();
        match self {
            PhaseSpaceRegion::All => true,
            PhaseSpaceRegion::Far { n, m } => r2() > *n && q2() > *m,
            PhaseSpaceRegion::Sur { n, m } => !(r2() > *n && q2() > *m),
            PhaseSpaceRegion::Out { n, m } => r2() > *n && q2() > *m && dot(xperp, pperp) >= 0.0,
            PhaseSpaceRegion::In { n, m } => r2() > *n && q2() > *m && dot(xperp, pperp) < 0.0,
            PhaseSpaceRegion::SpaceStrip { r } => r2() <= *r,
            PhaseSpaceRegion::TransverseTube { n, m } => r2() > *n && q2() <= *m,
            PhaseSpaceRegion::Product { par, perp } => {
                par.contains(xpar, ppar) && perp.contains(xperp, pperp)
            }
            PhaseSpaceRegion::Not(inner) => !inner.contains(xpar, ppar, xperp, pperp),
            PhaseSpaceRegion::Union(parts) => {
                parts.iter().any(|r| r.contains(xpar, ppar, xperp, pperp))
            }
        }
    }

    /// Whether membership ignores the parallel-block coordinates, enabling the
    /// per-fiber perpendicular fast path.
    pub fn par_free(&self) -> bool {
        match self {
            PhaseSpaceRegion::Product { .. } => false,
            PhaseSpaceRegion::Not(inner) => inner.par_free(),
            PhaseSpaceRegion::Union(parts) => parts.iter().all(|r| r.par_free()),
            _ => true,
        }
    }

    /// The exact product structure, when this region is a plain product.
    pub fn as_product(&self) -> Option<(&BlockBox, &BlockBox)> {
        match self {
            PhaseSpaceRegion::Product { par, perp } => Some((par, perp)),
            _ => None,
        }
    }

    pub fn validate(&self, par_axes: usize, perp_axes: usize) -> Result<()> {
        match self {
            PhaseSpaceRegion::Far { n, m }
            | PhaseSpaceRegion::Sur { n, m }
            | PhaseSpaceRegion::Out { n, m }
            | PhaseSpaceRegion::In { n, m }
            | PhaseSpaceRegion::TransverseTube { n, m } => {
                if !(*n >= 0.0 && *m >= 0.0) {
                    return Err(CoreError::Precondition(
                        "region radii must be nonnegative".into(),
                    ));
                }
                Ok(())
            }
            PhaseSpaceRegion::SpaceStrip { r } => {
                if !(*r >= 0.0) {
                    return Err(CoreError::Precondition(
                        "strip radius must be nonnegative".into(),
                    ));
                }
                Ok(())
            }
            PhaseSpaceRegion::Product { par, perp } => {
                par.validate(par_axes)?;
                perp.validate(perp_axes)
            }
            PhaseSpaceRegion::Not(inner) => inner.validate(par_axes, perp_axes),
            PhaseSpaceRegion::Union(parts) => {
                for r in parts {
                    r.validate(par_axes, perp_axes)?;
                }
                Ok(())
            }
            PhaseSpaceRegion::All => Ok(()),
        }
    }

    /// Compact text form used by the CLI region grammar.
    pub fn parse(text: &str) -> Result<PhaseSpaceRegion> {
        let trimmed = text.trim();
        if trimmed.contains('|') {
            let parts: Result<Vec<_>> = trimmed.split('|').map(PhaseSpaceRegion::parse).collect();
            return Ok(PhaseSpaceRegion::Union(parts?));
        }
        if let Some(rest) = trimmed.strip_prefix("not:") {
            return Ok(PhaseSpaceRegion::Not(Box::new(PhaseSpaceRegion::parse(
                rest,
            )?)));
        }
        if trimmed == "all" {
            return Ok(PhaseSpaceRegion::All);
        }
        let (head, args) = match trimmed.split_once(':') {
            Some((h, a)) => (h, a),
            None => {
                return Err(CoreError::Config(format!(
                    "cannot parse region '{trimmed}'; expected e.g. far:n=4,m=0.5"
                )))
            }
        };
        let mut kv = std::collections::HashMap::new();
        for pair in args.split(',') {
            let (key, value) = pair.split_once('=').ok_or_else(|| {
                CoreError::Config(format!("bad region parameter '{pair}' in '{trimmed}'"))
            })?;
            let parsed: f64 = value.trim().parse().map_err(|_| {
                CoreError::Config(format!("bad number '{value}' in region '{trimmed}'"))
            })?;
            kv.insert(key.trim().to_string(), parsed);
        }
        let get = |key: &str| -> Result<f64> {
            kv.get(key).copied().ok_or_else(|| {
                CoreError::Config(format!("region '{head}' needs parameter '{key}'"))
            })
        };
        match head {
            "far" => Ok(PhaseSpaceRegion::Far {
                n: get("n")?,
                m: get("m")?,
            }),
            "sur" => Ok(PhaseSpaceRegion::Sur {
                n: get("n")?,
                m: get("m")?,
            }),
            "out" => Ok(PhaseSpaceRegion::Out {
                n: get("n")?,
                m: get("m")?,
            }),
            "in" => Ok(PhaseSpaceRegion::In {
                n: get("n")?,
                m: get("m")?,
            }),
            "strip" => Ok(PhaseSpaceRegion::SpaceStrip { r: get("r")? }),
            "tube" => Ok(PhaseSpaceRegion::TransverseTube {
                n: get("n")?,
                m: get("m")?,
            }),
            other => Err(CoreError::Config(format!("unknown region kind '{other}'"))),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            PhaseSpaceRegion::All => "all".into(),
            PhaseSpaceRegion::Far { n, m } => format!("far:n={n},m={m}"),
            PhaseSpaceRegion::Sur { n, m } => format!("sur:n={n},m={m}"),
            PhaseSpaceRegion::Out { n, m } => format!("out:n={n},m={m}"),
            PhaseSpaceRegion::In { n, m } => format!("in:n={n},m={m}"),
            PhaseSpaceRegion::SpaceStrip { r } => format!("strip:r={r}"),
            PhaseSpaceRegion::TransverseTube { n, m } => format!("tube:n={n},m={m}"),
            PhaseSpaceRegion::Product { .. } => "product".into(),
            PhaseSpaceRegion::Not(inner) => format!("not:{}", inner.describe()),
            PhaseSpaceRegion::Union(parts) => parts
                .iter()
                .map(|r| r.describe())
                .collect::<Vec<_>>()
                .join("|"),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
