//! Edges between formats: extension, projection and combination, plus the
//! grid of formats they connect, campaigns over that grid, on-disk pools and
//! genealogy records.

mod campaign;
mod dag;
mod grid;
mod store;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::algebra::Mat;
use crate::error::{Error, Result};
use crate::scheme::{permute_format, Format, FormatPerm, Scheme, Triple};

pub use campaign::{
    run_meta_campaign, run_meta_campaign_with, CampaignEdge, CampaignProgressFn, CampaignSpec, EdgeKindSpec, ReferenceRank,
    SeedSpec,
};
pub use dag::{DagEdge, EdgeKind, GenealogyDag, Vertex, VertexKind};
pub use grid::{count_grid_paths, enumerate_grid_paths, GridConstraints, GridPaths};
pub use store::{import_scheme, ManifestEntry, PoolManifest, PoolStore};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DimAxis {
    N,
    M,
    P,
}

impl DimAxis {
    pub const ALL: [DimAxis; 3] = [DimAxis::N, DimAxis::M, DimAxis::P];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn parse(s: &str) -> Result<DimAxis> {
        match s {
            "n" | "N" => Ok(DimAxis::N),
            "m" | "M" => Ok(DimAxis::M),
            "p" | "P" => Ok(DimAxis::P),
            other => Err(Error::Structural(format!("unknown axis '{other}'"))),
        }
    }

    /// Product of the two dimensions other than this axis.
    pub fn cofactor(self, f: Format) -> usize {
        f.volume() / f.dims()[self.index()]
    }

    pub fn grow(self, f: Format, by: usize) -> Format {
        let mut d = f.dims();
        d[self.index()] += by;
        Format::from_dims(d).expect("growing keeps dimensions positive")
    }
}

impl fmt::Display for DimAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DimAxis::N => "N",
            DimAxis::M => "M",
            DimAxis::P => "P",
        })
    }
}

fn require_verified(s: &Scheme) -> Result<()> {
    s.verify().map_err(Error::NotVerified)
}

/// Places every slot of `t` into the slot shapes of `to`, offset by `off`
/// along `axis`.
fn embed(t: &Triple, to: Format, axis: DimAxis, off: usize) -> Triple {
    let [n, m, p] = to.dims();
    let (on, om, op) = match axis {
        DimAxis::N => (off, 0, 0),
        DimAxis::M => (0, off, 0),
        DimAxis::P => (0, 0, off),
    };
    Triple::new(
        t.u().embedded(n, m, on, om),
        t.v().embedded(m, p, om, op),
        t.w().embedded(p, n, op, on),
    )
}

/// Grows `axis` by one with the block rule. The new index carries the
/// standard products that involve it: `cofactor(axis)` extra triples.
pub fn extend(s: &Scheme, axis: DimAxis) -> Result<Scheme> {
    require_verified(s)?;
    let ring = s.ring();
    let to = axis.grow(s.format(), 1);
    let [n, m, p] = to.dims();
    let mut triples: Vec<Triple> = s.triples().iter().map(|t| embed(t, to, axis, 0)).collect();
    let e = |rows, cols, r, c| Mat::unit(ring, rows, cols, r, c);
    match axis {
        DimAxis::N => {
            for j in 0..m {
                for k in 0..p {
                    triples.push(Triple::new(e(n, m, n - 1, j), e(m, p, j, k), e(p, n, k, n - 1)));
                }
            }
        }
        DimAxis::M => {
            for i in 0..n {
                for k in 0..p {
                    triples.push(Triple::new(e(n, m, i, m - 1), e(m, p, m - 1, k), e(p, n, k, i)));
                }
            }
        }
        DimAxis::P => {
            for i in 0..n {
                for j in 0..m {
                    triples.push(Triple::new(e(n, m, i, j), e(m, p, j, p - 1), e(p, n, p - 1, i)));
                }
            }
        }
    }
    Ok(Scheme::from_parts(to, ring, triples))
}

/// Removes the last index of `axis` and drops triples left with a zero slot.
pub fn project(s: &Scheme, axis: DimAxis) -> Result<Scheme> {
    let from = s.format();
    if from.dims()[axis.index()] < 2 {
        return Err(Error::Structural(format!(
            "cannot project {from} along {axis}: dimension is 1"
        )));
    }
    require_verified(s)?;
    let mut d = from.dims();
    d[axis.index()] -= 1;
    let to = Format::from_dims(d)?;
    let [n, m, p] = d;
    let triples = s
        .triples()
        .iter()
        .map(|t| Triple::new(t.u().resized(n, m), t.v().resized(m, p), t.w().resized(p, n)))
        .filter(|t| !t.has_zero_slot())
        .collect();
    Ok(Scheme::from_parts(to, s.ring(), triples))
}

/// Block combination of two schemes whose formats agree off `axis`.
pub fn combine(s1: &Scheme, s2: &Scheme, axis: DimAxis) -> Result<Scheme> {
    let (f1, f2) = (s1.format(), s2.format());
    let k = axis.index();
    let agree = (0..3).all(|i| i == k || f1.dims()[i] == f2.dims()[i]);
    if !agree {
        return Err(Error::Structural(format!(
            "cannot combine {f1} and {f2} along {axis}"
        )));
    }
    if s1.ring() != s2.ring() {
        return Err(Error::Structural(format!(
            "cannot combine schemes over {} and {}",
            s1.ring(),
            s2.ring()
        )));
    }
    require_verified(s1)?;
    require_verified(s2)?;
    let to = axis.grow(f1, f2.dims()[k]);
    let off = f1.dims()[k];
    let triples = s1
        .triples()
        .iter()
        .map(|t| embed(t, to, axis, 0))
        .chain(s2.triples().iter().map(|t| embed(t, to, axis, off)))
        .collect();
    Ok(Scheme::from_parts(to, s1.ring(), triples))
}

/// The first `(σ1, σ2, axis)`, in [`FormatPerm::ALL`] and [`DimAxis::ALL`]
/// order, under which the permuted formats of `f1` and `f2` combine to `target`.
pub fn combine_plan(f1: Format, f2: Format, target: Format) -> Option<(FormatPerm, FormatPerm, DimAxis)> {
    for axis in DimAxis::ALL {
        let k = axis.index();
        for s1 in FormatPerm::ALL {
            let g1 = s1.apply_to(f1);
            for s2 in FormatPerm::ALL {
                let g2 = s2.apply_to(f2);
                let fits = (0..3).all(|i| {
                    if i == k {
                        g1.dims()[i] + g2.dims()[i] == target.dims()[i]
                    } else {
                        g1.dims()[i] == g2.dims()[i] && g1.dims()[i] == target.dims()[i]
                    }
                });
                if fits {
                    return Some((s1, s2, axis));
                }
            }
        }
    }
    None
}

/// Permutes both inputs as needed and combines them into `target`.
pub fn combine_to(s1: &Scheme, s2: &Scheme, target: Format) -> Result<Scheme> {
    let (a, b, axis) = combine_plan(s1.format(), s2.format(), target).ok_or_else(|| {
        Error::Structural(format!(
            "{} and {} do not combine to {target}",
            s1.format(),
            s2.format()
        ))
    })?;
    combine(&permute_format(s1, a)?, &permute_format(s2, b)?, axis)
}

/// The first `(σ, axis)` with `extend(permute(from, σ), axis)` of format `to`.
pub fn extend_plan(from: Format, to: Format) -> Option<(FormatPerm, DimAxis)> {
    FormatPerm::ALL.into_iter().find_map(|sigma| {
        let g = sigma.apply_to(from);
        DimAxis::ALL
            .into_iter()
            .find(|&axis| axis.grow(g, 1) == to)
            .map(|axis| (sigma, axis))
    })
}

/// The first `(σ, axis)` with `project(permute(from, σ), axis)` of format `to`.
pub fn project_plan(from: Format, to: Format) -> Option<(FormatPerm, DimAxis)> {
    FormatPerm::ALL.into_iter().find_map(|sigma| {
        let g = sigma.apply_to(from);
        DimAxis::ALL
            .into_iter()
            .find(|&axis| {
                let mut d = g.dims();
                d[axis.index()] >= 2 && {
                    d[axis.index()] -= 1;
                    Format::from_dims(d).ok() == Some(to)
                }
            })
            .map(|axis| (sigma, axis))
    })
}

/// Extends to `to`, permuting first when `to` grows a different position.
pub fn extend_to(s: &Scheme, to: Format) -> Result<Scheme> {
    let (sigma, axis) = extend_plan(s.format(), to)
        .ok_or_else(|| Error::Structural(format!("{} does not extend to {to}", s.format())))?;
    extend(&permute_format(s, sigma)?, axis)
}

/// Projects to `to`, permuting first when `to` shrinks a different position.
pub fn project_to(s: &Scheme, to: Format) -> Result<Scheme> {
    let (sigma, axis) = project_plan(s.format(), to)
        .ok_or_else(|| Error::Structural(format!("{} does not project to {to}", s.format())))?;
    project(&permute_format(s, sigma)?, axis)
}
