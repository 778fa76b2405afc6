//! Uniform tensor grids on intervals and rectangles, nodal fields, and the
//! two discrete primitives everything else is assembled from: the per-cell
//! gradient and the cell quadrature.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("dimension must be 1 or 2, got {0}")]
    Dimension(usize),
    #[error("extent must be finite and positive, got {0}")]
    Extent(f64),
    #[error("at least 3 nodes per axis are required, got {0}")]
    TooFewNodes(usize),
    #[error("field has {got} values but the grid has {expected} nodes")]
    LengthMismatch { expected: usize, got: usize },
    #[error("field value at node {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },
    #[error("expected one value per cell ({expected}), got {got}")]
    CellCount { expected: usize, got: usize },
}

/// Uniform grid on `(0, X)` or `(0, X) x (0, Y)`.
///
/// Nodes are numbered row-major with the x index running fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridShape", into = "GridShape")]
pub struct Grid {
    dimension: usize,
    extent: [f64; 2],
    nodes: [usize; 2],
    spacing: [f64; 2],
    on_boundary: Vec<bool>,
    interior: Vec<usize>,
    boundary: Vec<usize>,
    cells: Vec<[usize; 4]>,
}

/// Serialized form of a grid: only the defining parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridShape {
    pub dimension: usize,
    pub extent: Vec<f64>,
    pub nodes: Vec<usize>,
}

impl TryFrom<GridShape> for Grid {
    type Error = GridError;
    fn try_from(s: GridShape) -> Result<Self, GridError> {
        Grid::with_axes(s.dimension, &s.extent, &s.nodes)
    }
}

impl From<Grid> for GridShape {
    fn from(g: Grid) -> Self {
        GridShape {
            dimension: g.dimension,
            extent: g.extent[..g.dimension].to_vec(),
            nodes: g.nodes[..g.dimension].to_vec(),
        }
    }
}

impl Grid {
    /// Builds a grid with the same extent and node count on every axis.
    pub fn build(dimension: usize, extent: f64, nodes_per_axis: usize) -> Result<Self, GridError> {
        Self::with_axes(
            dimension,
            &vec![extent; dimension.max(1)],
            &vec![nodes_per_axis; dimension.max(1)],
        )
    }

    pub fn line(extent: f64, nodes: usize) -> Result<Self, GridError> {
        Self::build(1, extent, nodes)
    }

    pub fn rectangle(extent: [f64; 2], nodes: [usize; 2]) -> Result<Self, GridError> {
        Self::with_axes(2, &extent, &nodes)
    }

    /// Builds a grid from per-axis extents and node counts. Slices shorter
    /// than `dimension` are padded with their last entry.
    pub fn with_axes(dimension: usize, extent: &[f64], nodes: &[usize]) -> Result<Self, GridError> {
        if dimension != 1 && dimension != 2 {
            return Err(GridError::Dimension(dimension));
        }
        let pick = |v: &[f64], a: usize| v.get(a).or(v.last()).copied().unwrap_or(f64::NAN);
        let pickn = |v: &[usize], a: usize| v.get(a).or(v.last()).copied().unwrap_or(0);
        let mut ext = [1.0; 2];
        let mut n = [1usize; 2];
        let mut h = [1.0; 2];
        for a in 0..dimension {
            ext[a] = pick(extent, a);
            n[a] = pickn(nodes, a);
            if !ext[a].is_finite() || ext[a] <= 0.0 {
                return Err(GridError::Extent(ext[a]));
            }
            if n[a] < 3 {
                return Err(GridError::TooFewNodes(n[a]));
            }
            h[a] = ext[a] / (n[a] - 1) as f64;
        }
        let total = n[0] * n[1];
        let mut on_boundary = vec![false; total];
        for j in 0..n[1] {
            for i in 0..n[0] {
                let b = i == 0
                    || i == n[0] - 1
                    || (dimension == 2 && (j == 0 || j == n[1] - 1));
                on_boundary[i + n[0] * j] = b;
            }
        }
        let interior = (0..total).filter(|&k| !on_boundary[k]).collect();
        let boundary = (0..total).filter(|&k| on_boundary[k]).collect();
        let cells = if dimension == 1 {
            (0..n[0] - 1).map(|i| [i, i + 1, 0, 0]).collect()
        } else {
            let mut c = Vec::with_capacity((n[0] - 1) * (n[1] - 1));
            for j in 0..n[1] - 1 {
                for i in 0..n[0] - 1 {
                    let k = i + n[0] * j;
                    c.push([k, k + 1, k + n[0], k + n[0] + 1]);
                }
            }
            c
        };
        Ok(Grid {
            dimension,
            extent: ext,
            nodes: n,
            spacing: h,
            on_boundary,
            interior,
            boundary,
            cells,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn extent(&self) -> &[f64] {
        &self.extent[..self.dimension]
    }

    pub fn nodes_per_axis(&self) -> &[usize] {
        &self.nodes[..self.dimension]
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing[..self.dimension]
    }

    pub fn node_count(&self) -> usize {
        self.on_boundary.len()
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    /// Node indices of each cell. In 1D only the first two entries are used;
    /// in 2D the order is (i,j), (i+1,j), (i,j+1), (i+1,j+1).
    pub fn cells(&self) -> &[[usize; 4]] {
        &self.cells
    }

    /// Number of nodes touching a cell (2 or 4).
    pub fn corners(&self) -> usize {
        if self.dimension == 1 {
            2
        } else {
            4
        }
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing[..self.dimension].iter().product()
    }

    /// Control volume of an interior node; equals the cell volume on a uniform grid.
    pub fn node_volume(&self) -> f64 {
        self.cell_volume()
    }

    pub fn volume(&self) -> f64 {
        self.extent[..self.dimension].iter().product()
    }

    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.on_boundary[node]
    }

    /// Axis indices `(i, j)` of a node.
    pub fn index(&self, node: usize) -> (usize, usize) {
        (node % self.nodes[0], node / self.nodes[0])
    }

    pub fn coords(&self, node: usize) -> [f64; 2] {
        let (i, j) = self.index(node);
        [i as f64 * self.spacing[0], j as f64 * self.spacing[1]]
    }

    pub fn cell_center(&self, cell: usize) -> [f64; 2] {
        let c = self.coords(self.cells[cell][0]);
        if self.dimension == 1 {
            [c[0] + 0.5 * self.spacing[0], 0.0]
        } else {
            [c[0] + 0.5 * self.spacing[0], c[1] + 0.5 * self.spacing[1]]
        }
    }

    /// Distance from a node to the boundary of the box.
    pub fn distance_to_boundary(&self, node: usize) -> f64 {
        let x = self.coords(node);
        let mut d = x[0].min(self.extent[0] - x[0]);
        if self.dimension == 2 {
            d = d.min(x[1]).min(self.extent[1] - x[1]);
        }
        d.max(0.0)
    }

    /// Gradient of cell `cell` from the nodal values `u`.
    ///
    /// 1D: the forward difference. 2D: each component is the mean of the two
    /// parallel edge differences of the cell.
    #[inline]
    pub fn cell_gradient(&self, u: &[f64], cell: usize) -> [f64; 2] {
        let c = &self.cells[cell];
        if self.dimension == 1 {
            [(u[c[1]] - u[c[0]]) / self.spacing[0], 0.0]
        } else {
            let gx = (u[c[1]] - u[c[0]] + u[c[3]] - u[c[2]]) / (2.0 * self.spacing[0]);
            let gy = (u[c[2]] - u[c[0]] + u[c[3]] - u[c[1]]) / (2.0 * self.spacing[1]);
            [gx, gy]
        }
    }

    /// Coefficients of the cell gradient with respect to the cell's corner
    /// values: `grad = sum_k stencil[k] * u[corner k]`. Identical for every cell.
    pub fn gradient_stencil(&self) -> [[f64; 2]; 4] {
        let hx = self.spacing[0];
        if self.dimension == 1 {
            [[-1.0 / hx, 0.0], [1.0 / hx, 0.0], [0.0, 0.0], [0.0, 0.0]]
        } else {
            let ax = 0.5 / hx;
            let ay = 0.5 / self.spacing[1];
            [[-ax, -ay], [ax, -ay], [-ax, ay], [ax, ay]]
        }
    }

    /// Mean of the nodal values over the corners of a cell.
    #[inline]
    pub fn cell_average(&self, u: &[f64], cell: usize) -> f64 {
        let c = &self.cells[cell];
        if self.dimension == 1 {
            0.5 * (u[c[0]] + u[c[1]])
        } else {
            0.25 * (u[c[0]] + u[c[1]] + u[c[2]] + u[c[3]])
        }
    }

    /// Sum of cell values times the cell volume.
    pub fn integrate_cells(&self, cell_values: &[f64]) -> Result<f64, GridError> {
        if cell_values.len() != self.cell_count() {
            return Err(GridError::CellCount {
                expected: self.cell_count(),
                got: cell_values.len(),
            });
        }
        Ok(cell_values.iter().sum::<f64>() * self.cell_volume())
    }
}

/// One finite value per node of a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.node_count() {
            return Err(GridError::LengthMismatch {
                expected: grid.node_count(),
                got: values.len(),
            });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(GridError::NonFinite { index, value });
        }
        Ok(Field { grid, values })
    }

    pub fn constant(grid: Arc<Grid>, value: f64) -> Self {
        let n = grid.node_count();
        Field {
            grid,
            values: vec![value; n],
        }
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn([f64; 2]) -> f64) -> Result<Self, GridError> {
        let values = (0..grid.node_count()).map(|k| f(grid.coords(k))).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Replaces the values, keeping the grid. Fails on non-finite input.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self, GridError> {
        Self::new(self.grid.clone(), values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_distance(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    /// `self + scale * other`, nodewise.
    pub fn axpy(&self, scale: f64, other: &Field) -> Field {
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + scale * b)
            .collect();
        Field {
            grid: self.grid.clone(),
            values,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Field, GridError> {
        self.with_values(self.values.iter().map(|&v| f(v)).collect())
    }
}

/// Per-cell gradient vectors of a field (the second component is zero in 1D).
pub fn midpoint_gradient(f: &Field) -> Vec<[f64; 2]> {
    let g = f.grid();
    (0..g.cell_count())
        .map(|c| g.cell_gradient(f.values(), c))
        .collect()
}

pub fn integrate_cells(grid: &Grid, cell_values: &[f64]) -> Result<f64, GridError> {
    grid.integrate_cells(cell_values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_spacing_and_counts() {
        let g = Grid::build(1, 1.0, 11).unwrap();
        assert!((g.spacing()[0] - 0.1).abs() < 1e-15);
        assert_eq!(g.interior().len(), 9);
        assert_eq!(g.boundary(), &[0, 10]);
    }

    #[test]
    fn square_partition() {
        let g = Grid::build(2, 1.0, 5).unwrap();
        assert_eq!(g.node_count(), 25);
        assert_eq!(g.interior().len(), 9);
        assert_eq!(g.boundary().len(), 16);
        let mut all: Vec<usize> = g.interior().iter().chain(g.boundary()).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..25).collect::<Vec<_>>());
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(Grid::build(1, 1.0, 2), Err(GridError::TooFewNodes(2)));
        assert!(matches!(Grid::build(1, 0.0, 5), Err(GridError::Extent(_))));
        assert!(matches!(Grid::build(1, f64::NAN, 5), Err(GridError::Extent(_))));
        assert!(matches!(Grid::build(1, -1.0, 5), Err(GridError::Extent(_))));
        assert_eq!(Grid::build(3, 1.0, 5), Err(GridError::Dimension(3)));
    }

    #[test]
    fn field_rejects_nan_and_wrong_length() {
        let g = Arc::new(Grid::line(1.0, 4).unwrap());
        assert!(Field::new(g.clone(), vec![0.0; 3]).is_err());
        assert!(matches!(
            Field::new(g, vec![0.0, f64::INFINITY, 0.0, 0.0]),
            Err(GridError::NonFinite { index: 1, .. })
        ));
    }

    #[test]
    fn gradient_exact_for_affine() {
        let g1 = Arc::new(Grid::line(1.0, 17).unwrap());
        let f = Field::from_fn(g1, |x| x[0]).unwrap();
        assert!(midpoint_gradient(&f).iter().all(|g| (g[0] - 1.0).abs() < 1e-12));

        let g2 = Arc::new(Grid::rectangle([1.0, 2.0], [9, 13]).unwrap());
        let f = Field::from_fn(g2.clone(), |x| 3.0 * x[0] - 2.0 * x[1]).unwrap();
        for g in midpoint_gradient(&f) {
            assert!((g[0] - 3.0).abs() < 1e-12 && (g[1] + 2.0).abs() < 1e-12);
        }
        let c = Field::constant(g2, 4.2);
        assert!(midpoint_gradient(&c).iter().all(|g| g[0] == 0.0 && g[1] == 0.0));
    }

    #[test]
    fn cell_quadrature() {
        for n in [3, 7, 101] {
            let g = Grid::line(1.0, n).unwrap();
            let ones = vec![1.0; g.cell_count()];
            assert!((g.integrate_cells(&ones).unwrap() - 1.0).abs() < 1e-14);
        }
        let sq = Grid::build(2, 1.0, 9).unwrap();
        let twos = vec![2.0; sq.cell_count()];
        assert!((sq.integrate_cells(&twos).unwrap() - 2.0).abs() < 1e-14);

        let g = Grid::line(1.0, 11).unwrap();
        let centers: Vec<f64> = (0..g.cell_count()).map(|c| g.cell_center(c)[0]).collect();
        assert!((g.integrate_cells(&centers).unwrap() - 0.5).abs() < 1e-15);
        assert!(g.integrate_cells(&centers[1..]).is_err());
    }

    #[test]
    fn stencil_matches_cell_gradient() {
        let g = Grid::rectangle([1.0, 0.5], [5, 4]).unwrap();
        let u: Vec<f64> = (0..g.node_count()).map(|k| (k as f64 * 0.37).sin()).collect();
        let s = g.gradient_stencil();
        for c in 0..g.cell_count() {
            let direct = g.cell_gradient(&u, c);
            let mut via = [0.0; 2];
            for (k, &node) in g.cells()[c].iter().enumerate() {
                via[0] += s[k][0] * u[node];
                via[1] += s[k][1] * u[node];
            }
            assert!((direct[0] - via[0]).abs() < 1e-12 && (direct[1] - via[1]).abs() < 1e-12);
        }
    }
}
