//! Uniform interior-node grids on the unit interval and the unit square.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Interior nodes of `(0,1)^dim` with spacing `h = 1/(n+1)`.
///
/// Nodes are stored lexicographically: in 2D the first axis varies fastest,
/// so node `(i, j)` lives at index `i + j * n_per_axis`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    n_per_axis: usize,
    h: f64,
    nodes: Vec<[f64; 2]>,
}

impl Grid {
    pub fn new(dim: usize, n_per_axis: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidArgument(format!(
                "grid dimension must be 1 or 2, got {dim}"
            )));
        }
        if n_per_axis < 1 {
            return Err(Error::InvalidArgument(
                "grid needs at least one interior node per axis".into(),
            ));
        }
        let h = 1.0 / (n_per_axis as f64 + 1.0);
        let coord = |i: usize| (i as f64 + 1.0) * h;
        let nodes = if dim == 1 {
            (0..n_per_axis).map(|i| [coord(i), 0.0]).collect()
        } else {
            let mut nodes = Vec::with_capacity(n_per_axis * n_per_axis);
            for j in 0..n_per_axis {
                for i in 0..n_per_axis {
                    nodes.push([coord(i), coord(j)]);
                }
            }
            nodes
        };
        Ok(Grid {
            dim,
            n_per_axis,
            h,
            nodes,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_per_axis(&self) -> usize {
        self.n_per_axis
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Total number of unknowns, `n_per_axis^dim`.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Cell measure `h^dim`; the single quadrature weight used by every integral.
    pub fn quad_weight(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    /// Coordinates of node `k`; the second entry is unused in 1D.
    pub fn node(&self, k: usize) -> [f64; 2] {
        self.nodes[k]
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    /// Euclidean distance between nodes `a` and `b`.
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        let (p, q) = (self.nodes[a], self.nodes[b]);
        let dx = p[0] - q[0];
        if self.dim == 1 {
            dx.abs()
        } else {
            let dy = p[1] - q[1];
            dx.hypot(dy)
        }
    }

    /// Integer offsets between nodes `a` and `b` along each axis.
    pub fn index_offset(&self, a: usize, b: usize) -> [usize; 2] {
        let n = self.n_per_axis;
        let (ai, aj) = (a % n, a / n);
        let (bi, bj) = (b % n, b / n);
        [ai.abs_diff(bi), aj.abs_diff(bj)]
    }

    /// Index of the node closest to the centre of the domain.
    pub fn center_index(&self) -> usize {
        let c = self.n_per_axis / 2;
        if self.dim == 1 {
            c
        } else {
            c + c * self.n_per_axis
        }
    }
}

/// Convenience constructor mirroring [`Grid::new`].
pub fn make_grid(dim: usize, n_per_axis: usize) -> Result<Grid> {
    Grid::new(dim, n_per_axis)
}

/// Distance from every node to the boundary of the unit box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryDistance {
    pub delta: Vec<f64>,
}

pub fn boundary_distance(grid: &Grid) -> BoundaryDistance {
    let delta = grid
        .nodes()
        .iter()
        .map(|p| {
            (0..grid.dim())
                .map(|ax| p[ax].min(1.0 - p[ax]))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    BoundaryDistance { delta }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn one_d_three_nodes() {
        let g = make_grid(1, 3).unwrap();
        assert_relative_eq!(g.h(), 0.25);
        let xs: Vec<f64> = g.nodes().iter().map(|p| p[0]).collect();
        assert_eq!(xs, vec![0.25, 0.5, 0.75]);
    }

    #[test]
    fn single_node() {
        let g = make_grid(1, 1).unwrap();
        assert_relative_eq!(g.h(), 0.5);
        assert_eq!(g.len(), 1);
        assert_relative_eq!(g.node(0)[0], 0.5);
    }

    #[test]
    fn two_d_two_per_axis() {
        let g = make_grid(2, 2).unwrap();
        assert_relative_eq!(g.h(), 1.0 / 3.0);
        assert_eq!(g.len(), 4);
        let expect = [[1.0, 1.0], [2.0, 1.0], [1.0, 2.0], [2.0, 2.0]];
        for (p, e) in g.nodes().iter().zip(expect) {
            assert_relative_eq!(p[0], e[0] / 3.0, epsilon = 1e-15);
            assert_relative_eq!(p[1], e[1] / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(make_grid(3, 4).is_err());
        assert!(make_grid(0, 4).is_err());
        assert!(make_grid(1, 0).is_err());
    }

    #[test]
    fn distances() {
        let g = make_grid(1, 3).unwrap();
        let bd = boundary_distance(&g);
        assert_relative_eq!(bd.delta[0], 0.25);
        assert_relative_eq!(bd.delta[1], 0.5);
        let g2 = make_grid(2, 2).unwrap();
        let bd2 = boundary_distance(&g2);
        // node (1/3, 2/3)
        assert_relative_eq!(bd2.delta[2], 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn quadrature_mass() {
        for (dim, n) in [(1, 7), (2, 5), (1, 200)] {
            let g = make_grid(dim, n).unwrap();
            let total = g.quad_weight() * g.len() as f64;
            let expect = (n as f64 / (n as f64 + 1.0)).powi(dim as i32);
            assert_relative_eq!(total, expect, epsilon = 1e-12);
            assert!(total <= 1.0);
        }
    }

    #[test]
    fn distance_reflection_symmetry() {
        let g = make_grid(2, 6).unwrap();
        let bd = boundary_distance(&g);
        let n = g.n_per_axis();
        for j in 0..n {
            for i in 0..n {
                let k = i + j * n;
                let kx = (n - 1 - i) + j * n;
                let ky = i + (n - 1 - j) * n;
                assert_relative_eq!(bd.delta[k], bd.delta[kx], epsilon = 1e-15);
                assert_relative_eq!(bd.delta[k], bd.delta[ky], epsilon = 1e-15);
                assert!(bd.delta[k] > 0.0 && bd.delta[k] <= 0.5);
            }
        }
    }
}
