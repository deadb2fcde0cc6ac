//! Several resolutions of one image coupled into a single block system.
//!
//! Each scale keeps its own stencil neighbourhood. In coupled mode every
//! pixel of a finer scale is also linked to the pixel it lands on in the next
//! coarser scale, so `A` gains off-diagonal rectangles between scale blocks.
//! Unknowns are the per-scale label-coupled vectors concatenated in scale order.

use crate::error::{check_len, Error, Result};
use crate::field::ScoreField;
use crate::general::{grad_pairwise, QuadraticSystem};
use crate::grid::{GridGraph, Stencil};
use crate::potts::PottsSystem;
use crate::solvers::{SolveReport, SolverConfig};
use crate::sparse::SparseSym;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coupling {
    Coupled,
    Decoupled,
}

/// Pairwise term between `pixel_a` of `scale_a` and `pixel_b` of `scale_b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CrossLink {
    pub scale_a: usize,
    pub pixel_a: usize,
    pub scale_b: usize,
    pub pixel_b: usize,
}

/// Maps `(row, col)` of a `from` grid onto `to` by flooring scaled coordinates.
pub fn corresponding_pixel(from: &GridGraph, to: &GridGraph, pixel: usize) -> usize {
    let (r, c) = from.coords(pixel);
    let tr = r * to.height() / from.height();
    let tc = c * to.width() / from.width();
    to.pixel(tr.min(to.height() - 1), tc.min(to.width() - 1))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiResGraph {
    scales: Vec<GridGraph>,
    cross_links: Vec<CrossLink>,
    /// First global pixel index of each scale; one extra entry holds the total.
    pixel_offsets: Vec<usize>,
    coupling: Coupling,
}

impl MultiResGraph {
    /// Every scale must carry the same label count. In coupled mode each
    /// consecutive pair of scales is linked pixel-to-pixel, from the scale
    /// with more pixels to the one with fewer.
    pub fn new(scales: Vec<GridGraph>, coupling: Coupling) -> Result<Self> {
        let first = scales
            .first()
            .ok_or_else(|| Error::InvalidGrid("at least one scale is required".into()))?;
        if let Some(g) = scales.iter().find(|g| g.labels() != first.labels()) {
            return Err(Error::InvalidGrid(format!(
                "all scales must share a label count ({} vs {})",
                g.labels(),
                first.labels()
            )));
        }
        let mut pixel_offsets = vec![0];
        for g in &scales {
            pixel_offsets.push(pixel_offsets.last().unwrap() + g.pixels());
        }
        let mut cross_links = Vec::new();
        if coupling == Coupling::Coupled {
            for s in 0..scales.len().saturating_sub(1) {
                let (fine, coarse) = if scales[s].pixels() >= scales[s + 1].pixels() {
                    (s, s + 1)
                } else {
                    (s + 1, s)
                };
                for p in 0..scales[fine].pixels() {
                    cross_links.push(CrossLink {
                        scale_a: fine,
                        pixel_a: p,
                        scale_b: coarse,
                        pixel_b: corresponding_pixel(&scales[fine], &scales[coarse], p),
                    });
                }
            }
        }
        Ok(Self {
            scales,
            cross_links,
            pixel_offsets,
            coupling,
        })
    }

    /// Scales derived from a finest grid by multiplying its sides by each
    /// factor (rounded, at least one pixel).
    pub fn from_factors(
        height: usize,
        width: usize,
        labels: usize,
        stencil: Stencil,
        factors: &[f64],
        coupling: Coupling,
    ) -> Result<Self> {
        let scales = factors
            .iter()
            .map(|&f| {
                if !(f > 0.0) {
                    return Err(Error::InvalidGrid(format!(
                        "scale factor must be positive, got {f}"
                    )));
                }
                let h = ((height as f64 * f).round() as usize).max(1);
                let w = ((width as f64 * f).round() as usize).max(1);
                GridGraph::new(h, w, labels, stencil)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(scales, coupling)
    }

    pub fn scales(&self) -> &[GridGraph] {
        &self.scales
    }

    pub fn cross_links(&self) -> &[CrossLink] {
        &self.cross_links
    }

    pub fn coupling(&self) -> Coupling {
        self.coupling
    }

    pub fn labels(&self) -> usize {
        self.scales[0].labels()
    }

    pub fn total_pixels(&self) -> usize {
        *self.pixel_offsets.last().unwrap()
    }

    /// `N_total = Σ_s P_s · L`.
    pub fn dim(&self) -> usize {
        self.total_pixels() * self.labels()
    }

    pub fn global_pixel(&self, scale: usize, pixel: usize) -> usize {
        self.pixel_offsets[scale] + pixel
    }

    /// Scale owning a global pixel index.
    pub fn scale_of(&self, global_pixel: usize) -> usize {
        self.pixel_offsets.partition_point(|&o| o <= global_pixel) - 1
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.total_pixels()];
        for (s, g) in self.scales.iter().enumerate() {
            for p in 0..g.pixels() {
                adj[self.global_pixel(s, p)]
                    .extend(g.neighbors(p).into_iter().map(|q| self.global_pixel(s, q)));
            }
        }
        for link in &self.cross_links {
            let a = self.global_pixel(link.scale_a, link.pixel_a);
            let b = self.global_pixel(link.scale_b, link.pixel_b);
            adj[a].push(b);
            adj[b].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }

    /// Zero-valued label-coupled pattern of the whole block system.
    pub fn label_pattern(&self) -> SparseSym {
        SparseSym::from_adjacency(&self.adjacency(), self.labels())
    }

    /// Zero-valued pixel-level pattern, for shared (Potts-type) terms.
    pub fn pixel_pattern(&self) -> SparseSym {
        SparseSym::from_adjacency(&self.adjacency(), 1)
    }

    /// Whether unknowns `i` and `j` of the label-coupled system sit on different scales.
    pub fn is_cross_scale(&self, i: usize, j: usize) -> bool {
        let l = self.labels();
        self.scale_of(i / l) != self.scale_of(j / l)
    }

    /// Concatenates per-scale fields into one vector.
    pub fn concat(&self, fields: &[ScoreField]) -> Result<Vec<f64>> {
        check_len(self.scales.len(), fields.len())?;
        let mut out = Vec::with_capacity(self.dim());
        for (g, f) in self.scales.iter().zip(fields) {
            if f.graph() != g {
                return Err(Error::InvalidGrid("field does not match its scale".into()));
            }
            out.extend_from_slice(f.data());
        }
        Ok(out)
    }

    /// Splits a concatenated vector back into per-scale fields.
    pub fn split(&self, data: &[f64]) -> Result<Vec<ScoreField>> {
        check_len(self.dim(), data.len())?;
        let l = self.labels();
        self.scales
            .iter()
            .enumerate()
            .map(|(s, g)| {
                let lo = self.pixel_offsets[s] * l;
                ScoreField::new(*g, data[lo..lo + g.dim()].to_vec())
            })
            .collect()
    }

    /// Shared-pairwise system over all scales; `shared` lives on [`Self::pixel_pattern`].
    pub fn potts_system(&self, shared: SparseSym, lambda: f64) -> Result<PottsSystem> {
        check_len(self.total_pixels(), shared.dim())?;
        PottsSystem::new(shared, self.labels(), lambda)
    }
}

/// Convenience constructor mirroring [`MultiResGraph::new`].
pub fn build_multires(scales: Vec<GridGraph>, coupling: Coupling) -> Result<MultiResGraph> {
    MultiResGraph::new(scales, coupling)
}

/// The label-coupled layer over a [`MultiResGraph`].
#[derive(Debug, Clone)]
pub struct MultiResSystem {
    graph: MultiResGraph,
    system: QuadraticSystem,
}

impl MultiResSystem {
    /// `pairwise` has dimension `N_total`, normally on [`MultiResGraph::label_pattern`].
    pub fn new(graph: MultiResGraph, pairwise: SparseSym, lambda: f64) -> Result<Self> {
        check_len(graph.dim(), pairwise.dim())?;
        Ok(Self {
            graph,
            system: QuadraticSystem::new(pairwise, lambda)?,
        })
    }

    pub fn graph(&self) -> &MultiResGraph {
        &self.graph
    }

    pub fn system(&self) -> &QuadraticSystem {
        &self.system
    }

    /// Solves the whole block system and splits the result per scale.
    pub fn infer(&self, b: &[f64], cfg: &SolverConfig) -> Result<(Vec<ScoreField>, SolveReport)> {
        check_len(self.graph.dim(), b.len())?;
        let sol = self.system.infer(b, cfg)?;
        Ok((self.graph.split(&sol.x)?, sol.report))
    }

    pub fn infer_fields(
        &self,
        b: &[ScoreField],
        cfg: &SolverConfig,
    ) -> Result<(Vec<ScoreField>, SolveReport)> {
        self.infer(&self.graph.concat(b)?, cfg)
    }

    pub fn grad_unary(&self, dl_dx: &[f64], cfg: &SolverConfig) -> Result<Vec<f64>> {
        Ok(self.system.grad_unary(dl_dx, cfg)?.x)
    }

    pub fn grad_pairwise(&self, dl_db: &[f64], x: &[f64]) -> Result<SparseSym> {
        grad_pairwise(dl_db, x, self.system.pairwise())
    }
}

/// Upsamples every field to the finest one by nearest neighbour and averages.
pub fn fuse_scores(fields: &[ScoreField]) -> Result<ScoreField> {
    let finest = fields
        .iter()
        .max_by_key(|f| f.graph().pixels())
        .ok_or_else(|| Error::InvalidConfig("nothing to fuse".into()))?;
    if fields.len() == 1 {
        return Ok(finest.clone());
    }
    let target = *finest.graph();
    let l = target.labels();
    for f in fields {
        check_len(l, f.graph().labels())?;
    }
    let mut out = vec![0.0; target.dim()];
    for f in fields {
        for p in 0..target.pixels() {
            let q = corresponding_pixel(&target, f.graph(), p);
            for (o, v) in out[p * l..(p + 1) * l].iter_mut().zip(f.pixel(q)) {
                *o += v;
            }
        }
    }
    let n = fields.len() as f64;
    out.iter_mut().for_each(|v| *v /= n);
    ScoreField::new(target, out)
}
