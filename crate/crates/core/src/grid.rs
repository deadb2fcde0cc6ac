//! Pixel lattices and their neighbourhood stencils.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Neighbour-offset set defining which pixels interact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stencil {
    /// Left, right, top, bottom.
    Four,
    /// `Four` plus the four diagonal neighbours.
    Eight,
    /// `Eight` plus the four axial neighbours at distance two.
    Twelve,
}

const AXIAL: [(isize, isize); 4] = [(0, 1), (1, 0), (0, -1), (-1, 0)];
const DIAGONAL: [(isize, isize); 4] = [(1, 1), (1, -1), (-1, 1), (-1, -1)];
const AXIAL_2: [(isize, isize); 4] = [(0, 2), (2, 0), (0, -2), (-2, 0)];

impl Stencil {
    /// `(row, col)` offsets, symmetric under negation.
    pub fn offsets(self) -> Vec<(isize, isize)> {
        let mut out = AXIAL.to_vec();
        if matches!(self, Stencil::Eight | Stencil::Twelve) {
            out.extend_from_slice(&DIAGONAL);
        }
        if self == Stencil::Twelve {
            out.extend_from_slice(&AXIAL_2);
        }
        out
    }

    pub fn connectivity(self) -> usize {
        match self {
            Stencil::Four => 4,
            Stencil::Eight => 8,
            Stencil::Twelve => 12,
        }
    }

    pub fn from_connectivity(n: usize) -> Result<Self> {
        match n {
            4 => Ok(Stencil::Four),
            8 => Ok(Stencil::Eight),
            12 => Ok(Stencil::Twelve),
            other => Err(Error::InvalidGrid(format!(
                "unsupported stencil {other}; expected 4, 8 or 12"
            ))),
        }
    }
}

impl fmt::Display for Stencil {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.connectivity())
    }
}

impl FromStr for Stencil {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let n = s
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::InvalidGrid(format!("invalid stencil {s:?}")))?;
        Stencil::from_connectivity(n)
    }
}

/// A `height × width` pixel lattice carrying `labels` classes per pixel.
///
/// Pixels are numbered row-major, `p = row * width + col`. Unknowns of the
/// label-coupled system are numbered `p * labels + l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridGraph {
    height: usize,
    width: usize,
    labels: usize,
    stencil: Stencil,
}

impl GridGraph {
    pub fn new(height: usize, width: usize, labels: usize, stencil: Stencil) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidGrid(format!(
                "grid must be non-empty, got {height}x{width}"
            )));
        }
        if labels == 0 {
            return Err(Error::InvalidGrid("label count must be at least 1".into()));
        }
        Ok(Self {
            height,
            width,
            labels,
            stencil,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn labels(&self) -> usize {
        self.labels
    }

    pub fn stencil(&self) -> Stencil {
        self.stencil
    }

    /// Number of pixels `P`.
    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    /// Number of unknowns `N = P · L`.
    pub fn dim(&self) -> usize {
        self.pixels() * self.labels
    }

    #[inline]
    pub fn index(&self, pixel: usize, label: usize) -> usize {
        pixel * self.labels + label
    }

    #[inline]
    pub fn coords(&self, pixel: usize) -> (usize, usize) {
        (pixel / self.width, pixel % self.width)
    }

    #[inline]
    pub fn pixel(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    /// Same lattice with a different label count.
    pub fn with_labels(&self, labels: usize) -> Result<Self> {
        Self::new(self.height, self.width, labels, self.stencil)
    }

    /// In-bounds stencil neighbours of `pixel`, ascending. Boundary pixels
    /// simply have fewer neighbours.
    pub fn neighbors(&self, pixel: usize) -> Vec<usize> {
        let (r, c) = self.coords(pixel);
        let mut out: Vec<usize> = self
            .stencil
            .offsets()
            .into_iter()
            .filter_map(|(dr, dc)| {
                let nr = r.checked_add_signed(dr)?;
                let nc = c.checked_add_signed(dc)?;
                (nr < self.height && nc < self.width).then(|| self.pixel(nr, nc))
            })
            .collect();
        out.sort_unstable();
        out
    }

    /// Undirected edges `(p, q)` with `p < q`, in ascending order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.pixels())
            .flat_map(|p| {
                self.neighbors(p)
                    .into_iter()
                    .filter(move |&q| q > p)
                    .map(move |q| (p, q))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_grids() {
        assert!(GridGraph::new(0, 3, 1, Stencil::Four).is_err());
        assert!(GridGraph::new(3, 0, 1, Stencil::Four).is_err());
        assert!(GridGraph::new(3, 3, 0, Stencil::Four).is_err());
    }

    #[test]
    fn four_stencil_edge_count() {
        for (h, w) in [(1, 1), (1, 5), (2, 2), (3, 7), (6, 4)] {
            let g = GridGraph::new(h, w, 1, Stencil::Four).unwrap();
            assert_eq!(g.edges().len(), h * (w - 1) + w * (h - 1), "{h}x{w}");
        }
    }

    #[test]
    fn stencil_neighbourhoods_at_centre() {
        let g8 = GridGraph::new(3, 3, 1, Stencil::Eight).unwrap();
        assert_eq!(g8.neighbors(4), vec![0, 1, 2, 3, 5, 6, 7, 8]);

        let g12 = GridGraph::new(5, 5, 1, Stencil::Twelve).unwrap();
        let n = g12.neighbors(12);
        assert_eq!(n.len(), 12);
        assert!(n.contains(&2) && n.contains(&10) && n.contains(&14) && n.contains(&22));
        assert!(!n.contains(&0));
    }

    #[test]
    fn corner_has_fewer_neighbours() {
        let g = GridGraph::new(3, 3, 1, Stencil::Twelve).unwrap();
        assert_eq!(g.neighbors(0), vec![1, 2, 3, 4, 6]);
    }

    #[test]
    fn stencil_parses() {
        assert_eq!("8".parse::<Stencil>().unwrap(), Stencil::Eight);
        assert!("6".parse::<Stencil>().is_err());
    }
}
