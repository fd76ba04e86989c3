//! Cell masses of an envelope. Each grid cell is split into four triangles
//! through its center; on every triangle the pieces are replaced by their
//! linear interpolants, so a cell becomes an exact polygon and its mass is
//! continuous in the heights. The density is constant on each grid cell.

use rayon::prelude::*;

use super::GAffine;
use crate::genfun::GenFun;
use crate::grid::{Grid2, Mask};
use crate::linalg::Vector;

/// Stand-in value at nodes where a piece is not admissible.
const EXCLUDED: f64 = -1e30;

/// Piece values at the integration nodes, node-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueTable {
    pub pieces: usize,
    pub data: Vec<f64>,
}

impl ValueTable {
    #[inline]
    pub fn get(&self, node: usize, piece: usize) -> f64 {
        self.data[node * self.pieces + piece]
    }

    pub fn column(&self, piece: usize) -> Vec<f64> {
        self.data.iter().skip(piece).step_by(self.pieces).copied().collect()
    }

    pub fn set_column(&mut self, piece: usize, col: &[f64]) {
        for (n, v) in col.iter().enumerate() {
            self.data[n * self.pieces + piece] = *v;
        }
    }
}

#[derive(Clone, Debug)]
pub struct CellIntegrator {
    pub grid: Grid2,
    /// Mass of each grid cell.
    pub cell_mass: Vec<f64>,
    nodes: Vec<Vector<f64>>,
}

/// Sutherland–Hodgman clip of a barycentric polygon by {Σ λₖ dₖ ≥ 0}.
fn clip(poly: &[[f64; 3]], d: [f64; 3], out: &mut Vec<[f64; 3]>) {
    out.clear();
    let val = |p: &[f64; 3]| p[0] * d[0] + p[1] * d[1] + p[2] * d[2];
    for k in 0..poly.len() {
        let (a, b) = (poly[k], poly[(k + 1) % poly.len()]);
        let (va, vb) = (val(&a), val(&b));
        if va >= 0.0 {
            out.push(a);
        }
        if (va >= 0.0) != (vb >= 0.0) {
            let t = va / (va - vb);
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), a[2] + t * (b[2] - a[2])]);
        }
    }
}

/// Area of a barycentric polygon relative to its triangle.
fn fraction(poly: &[[f64; 3]]) -> f64 {
    let mut s = 0.0;
    for k in 0..poly.len() {
        let (a, b) = (poly[k], poly[(k + 1) % poly.len()]);
        s += a[0] * b[1] - a[1] * b[0];
    }
    s.abs()
}

impl CellIntegrator {
    pub fn new(grid: &Grid2, cell_mass: Vec<f64>) -> Self {
        assert_eq!(cell_mass.len(), grid.cells(), "one mass per grid cell");
        let mut nodes = Vec::with_capacity((grid.nx + 1) * (grid.ny + 1) + grid.cells());
        for j in 0..=grid.ny {
            for i in 0..=grid.nx {
                nodes.push(grid.node(i, j));
            }
        }
        nodes.extend(grid.centers());
        CellIntegrator { grid: grid.clone(), cell_mass, nodes }
    }

    pub fn total_mass(&self) -> f64 {
        self.cell_mass.iter().sum()
    }

    pub fn nodes(&self) -> &[Vector<f64>] {
        &self.nodes
    }

    /// Node indices of the four triangles of cell k, center last.
    fn triangles(&self, k: usize) -> [[usize; 3]; 4] {
        let g = &self.grid;
        let (i, j) = g.ij(k);
        let c = |i: usize, j: usize| j * (g.nx + 1) + i;
        let m = (g.nx + 1) * (g.ny + 1) + k;
        let (a, b, cc, d) = (c(i, j), c(i + 1, j), c(i + 1, j + 1), c(i, j + 1));
        [[a, b, m], [b, cc, m], [cc, d, m], [d, a, m]]
    }

    pub fn piece_column(&self, gf: &GenFun<f64>, p: &GAffine<f64>) -> Vec<f64> {
        self.nodes
            .par_iter()
            .map(|x| gf.try_value(x, &p.xb, p.z).unwrap_or(EXCLUDED))
            .collect()
    }

    pub fn values(&self, gf: &GenFun<f64>, pieces: &[GAffine<f64>]) -> ValueTable {
        let cols: Vec<Vec<f64>> = pieces.iter().map(|p| self.piece_column(gf, p)).collect();
        let mut t = ValueTable { pieces: pieces.len(), data: vec![0.0; pieces.len() * self.nodes.len()] };
        for (i, c) in cols.iter().enumerate() {
            t.set_column(i, c);
        }
        t
    }

    /// Fraction of triangle `tri` on which piece i wins (ties to the lower index).
    fn triangle_fraction(&self, tri: [usize; 3], i: usize, vals: &ValueTable, hint: Option<usize>, buf: &mut [Vec<[f64; 3]>; 2]) -> f64 {
        let vi = [vals.get(tri[0], i), vals.get(tri[1], i), vals.get(tri[2], i)];
        if let Some(j) = hint.filter(|j| *j != i) {
            let d = [vi[0] - vals.get(tri[0], j), vi[1] - vals.get(tri[1], j), vi[2] - vals.get(tri[2], j)];
            if d.iter().all(|v| *v < 0.0) || (j < i && d.iter().all(|v| *v <= 0.0)) {
                return 0.0;
            }
        }
        let mut full = true;
        for j in 0..vals.pieces {
            if j == i {
                continue;
            }
            let d = [vi[0] - vals.get(tri[0], j), vi[1] - vals.get(tri[1], j), vi[2] - vals.get(tri[2], j)];
            if d.iter().all(|v| *v < 0.0) || (j < i && d.iter().all(|v| *v <= 0.0)) {
                return 0.0;
            }
            if !d.iter().all(|v| *v >= 0.0) {
                full = false;
            }
        }
        if full {
            return 1.0;
        }
        let [a, b] = buf;
        a.clear();
        a.extend([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        for j in 0..vals.pieces {
            if j == i {
                continue;
            }
            let d = [vi[0] - vals.get(tri[0], j), vi[1] - vals.get(tri[1], j), vi[2] - vals.get(tri[2], j)];
            if d.iter().all(|v| *v >= 0.0) {
                continue;
            }
            clip(a, d, b);
            std::mem::swap(a, b);
            if a.len() < 3 {
                return 0.0;
            }
        }
        fraction(a)
    }

    /// Mass of cell i inside grid cell k.
    pub fn cell_fraction_mass(&self, k: usize, i: usize, vals: &ValueTable) -> f64 {
        self.cell_fraction_hinted(k, i, vals, None)
    }

    fn cell_fraction_hinted(&self, k: usize, i: usize, vals: &ValueTable, hint: Option<usize>) -> f64 {
        if self.cell_mass[k] == 0.0 {
            return 0.0;
        }
        let mut buf = [Vec::with_capacity(16), Vec::with_capacity(16)];
        let q = 0.25 * self.cell_mass[k];
        self.triangles(k).iter().map(|t| q * self.triangle_fraction(*t, i, vals, hint, &mut buf)).sum()
    }

    /// The strongest piece other than i at each cell center. Used as a hint
    /// by [`CellIntegrator::mass_with_rivals`]; any value gives the same mass.
    pub fn rivals(&self, i: usize, vals: &ValueTable) -> Vec<usize> {
        let base = (self.grid.nx + 1) * (self.grid.ny + 1);
        (0..self.grid.cells())
            .into_par_iter()
            .map(|k| {
                let n = base + k;
                (0..vals.pieces)
                    .filter(|j| *j != i)
                    .fold((usize::MAX, f64::NEG_INFINITY), |b, j| if vals.get(n, j) > b.1 { (j, vals.get(n, j)) } else { b })
                    .0
            })
            .collect()
    }

    /// Same as [`CellIntegrator::mass_of`], testing the rival of each cell first.
    pub fn mass_with_rivals(&self, i: usize, vals: &ValueTable, rivals: &[usize]) -> f64 {
        let parts: Vec<f64> = (0..self.grid.cells())
            .into_par_iter()
            .map(|k| self.cell_fraction_hinted(k, i, vals, rivals.get(k).copied().filter(|j| *j != usize::MAX)))
            .collect();
        parts.iter().sum()
    }

    /// Mass of the cell of piece i.
    pub fn mass_of(&self, i: usize, vals: &ValueTable) -> f64 {
        self.mass_of_over(i, vals, 0..self.grid.cells())
    }

    pub fn mass_of_over(&self, i: usize, vals: &ValueTable, cells: impl IntoParallelIterator<Item = usize>) -> f64 {
        let parts: Vec<f64> = cells.into_par_iter().map(|k| self.cell_fraction_mass(k, i, vals)).collect();
        parts.iter().sum()
    }

    /// Masses of all cells, optionally restricted to a mask. Sums are taken
    /// in a fixed order so the result does not depend on the thread count.
    pub fn masses(&self, vals: &ValueTable, within: Option<&Mask>) -> Vec<f64> {
        let n = vals.pieces;
        let per: Vec<Vec<f64>> = (0..self.grid.cells())
            .into_par_iter()
            .map(|k| {
                if within.is_some_and(|m| !m.get(k)) {
                    return vec![0.0; n];
                }
                (0..n).map(|i| self.cell_fraction_mass(k, i, vals)).collect()
            })
            .collect();
        let mut out = vec![0.0; n];
        for row in &per {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        out
    }

    /// Grid cells where piece i owns a positive share of the mass.
    pub fn support_cells(&self, i: usize, vals: &ValueTable) -> Vec<usize> {
        (0..self.grid.cells()).into_par_iter().filter(|&k| self.cell_fraction_mass(k, i, vals) > 0.0).collect()
    }
}
