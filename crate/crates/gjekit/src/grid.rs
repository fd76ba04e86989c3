//! Regular 2-D chart grids and cell masks.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{GjeError, Result};
use crate::linalg::Vector;
use crate::sampling::BoxDomain;

/// `nx × ny` cells over the box `lo..hi`; cell `k = j * nx + i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid2 {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub nx: usize,
    pub ny: usize,
}

impl Grid2 {
    pub fn new(lo: [f64; 2], hi: [f64; 2], nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 || !(lo[0] < hi[0] && lo[1] < hi[1]) || !lo.iter().chain(&hi).all(|v| v.is_finite()) {
            return Err(GjeError::Config(format!("invalid grid {lo:?}..{hi:?} with {nx}x{ny} cells")));
        }
        Ok(Grid2 { lo, hi, nx, ny })
    }

    pub fn square(half: f64, n: usize) -> Self {
        Grid2 { lo: [-half; 2], hi: [half; 2], nx: n, ny: n }
    }

    pub fn from_box(b: &BoxDomain, nx: usize, ny: usize) -> Result<Self> {
        if b.dim() != 2 {
            return Err(GjeError::Unsupported(format!("grids are two-dimensional, got a {}-d box", b.dim())));
        }
        Grid2::new([b.lo[0], b.lo[1]], [b.hi[0], b.hi[1]], nx, ny)
    }

    pub fn as_box(&self) -> BoxDomain {
        BoxDomain { lo: self.lo.to_vec(), hi: self.hi.to_vec() }
    }

    pub fn cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn dx(&self) -> f64 {
        (self.hi[0] - self.lo[0]) / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        (self.hi[1] - self.lo[1]) / self.ny as f64
    }

    /// The larger of the two cell side lengths.
    pub fn width(&self) -> f64 {
        self.dx().max(self.dy())
    }

    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dy()
    }

    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn center(&self, k: usize) -> Vector<f64> {
        let (i, j) = self.ij(k);
        self.center_ij(i, j)
    }

    pub fn center_ij(&self, i: usize, j: usize) -> Vector<f64> {
        Vector::from_slice(&[self.lo[0] + (i as f64 + 0.5) * self.dx(), self.lo[1] + (j as f64 + 0.5) * self.dy()])
    }

    /// Grid node (i, j) with `i ≤ nx`, `j ≤ ny`.
    pub fn node(&self, i: usize, j: usize) -> Vector<f64> {
        Vector::from_slice(&[self.lo[0] + i as f64 * self.dx(), self.lo[1] + j as f64 * self.dy()])
    }

    pub fn locate(&self, x: &Vector<f64>) -> Option<usize> {
        let fi = (x[0] - self.lo[0]) / self.dx();
        let fj = (x[1] - self.lo[1]) / self.dy();
        if !(0.0..=self.nx as f64).contains(&fi) || !(0.0..=self.ny as f64).contains(&fj) {
            return None;
        }
        let i = (fi as usize).min(self.nx - 1);
        let j = (fj as usize).min(self.ny - 1);
        Some(self.index(i, j))
    }

    pub fn refined(&self, factor: usize) -> Grid2 {
        Grid2 { nx: self.nx * factor, ny: self.ny * factor, ..self.clone() }
    }

    pub fn centers(&self) -> Vec<Vector<f64>> {
        (0..self.cells()).map(|k| self.center(k)).collect()
    }

    /// Cell masses of a density by the midpoint rule.
    pub fn cell_masses(&self, f: impl Fn(&Vector<f64>) -> f64) -> Vec<f64> {
        let a = self.cell_area();
        (0..self.cells()).map(|k| f(&self.center(k)) * a).collect()
    }

    /// 4-neighbours of cell k.
    pub fn neighbours(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        let (i, j) = self.ij(k);
        let (i, j) = (i as isize, j as isize);
        [(i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)].into_iter().filter_map(move |(a, b)| {
            (a >= 0 && b >= 0 && (a as usize) < self.nx && (b as usize) < self.ny).then(|| self.index(a as usize, b as usize))
        })
    }
}

/// A set of grid cells. Serialized as run lengths of alternating
/// out/in runs, starting with an out run (possibly empty).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    pub nx: usize,
    pub ny: usize,
    bits: Vec<bool>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MaskRle {
    nx: usize,
    ny: usize,
    runs: Vec<usize>,
}

impl Mask {
    pub fn empty(grid: &Grid2) -> Self {
        Mask { nx: grid.nx, ny: grid.ny, bits: vec![false; grid.cells()] }
    }

    pub fn full(grid: &Grid2) -> Self {
        Mask { nx: grid.nx, ny: grid.ny, bits: vec![true; grid.cells()] }
    }

    pub fn from_fn(grid: &Grid2, f: impl Fn(usize) -> bool) -> Self {
        Mask { nx: grid.nx, ny: grid.ny, bits: (0..grid.cells()).map(f).collect() }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn get(&self, k: usize) -> bool {
        self.bits[k]
    }

    pub fn set(&mut self, k: usize, v: bool) {
        self.bits[k] = v;
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter_map(|(k, b)| b.then_some(k))
    }

    pub fn union(&self, o: &Mask) -> Mask {
        Mask { bits: self.bits.iter().zip(&o.bits).map(|(a, b)| *a || *b).collect(), ..*self }
    }

    pub fn intersection(&self, o: &Mask) -> Mask {
        Mask { bits: self.bits.iter().zip(&o.bits).map(|(a, b)| *a && *b).collect(), ..*self }
    }

    pub fn is_subset(&self, o: &Mask) -> bool {
        self.bits.iter().zip(&o.bits).all(|(a, b)| !*a || *b)
    }

    /// Member cells with a 4-neighbour outside the mask or on the grid edge.
    pub fn boundary(&self, grid: &Grid2) -> Vec<usize> {
        self.indices()
            .filter(|&k| {
                let (i, j) = grid.ij(k);
                i == 0 || j == 0 || i + 1 == grid.nx || j + 1 == grid.ny || grid.neighbours(k).any(|m| !self.bits[m])
            })
            .collect()
    }

    pub fn to_rle(&self) -> Vec<usize> {
        let mut runs = Vec::new();
        let mut cur = false;
        let mut n = 0;
        for &b in &self.bits {
            if b == cur {
                n += 1;
            } else {
                runs.push(n);
                cur = b;
                n = 1;
            }
        }
        runs.push(n);
        runs
    }

    pub fn from_rle(nx: usize, ny: usize, runs: &[usize]) -> Result<Self> {
        let mut bits = Vec::with_capacity(nx * ny);
        for (r, &n) in runs.iter().enumerate() {
            bits.extend(std::iter::repeat(r % 2 == 1).take(n));
        }
        if bits.len() != nx * ny {
            return Err(GjeError::Config(format!("mask runs cover {} cells, grid has {}", bits.len(), nx * ny)));
        }
        Ok(Mask { nx, ny, bits })
    }
}

impl Serialize for Mask {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MaskRle { nx: self.nx, ny: self.ny, runs: self.to_rle() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Mask {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = MaskRle::deserialize(d)?;
        Mask::from_rle(r.nx, r.ny, &r.runs).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn locate_inverts_center() {
        let g = Grid2::new([-1.0, 0.0], [1.0, 3.0], 8, 5).unwrap();
        for k in 0..g.cells() {
            assert_eq!(g.locate(&g.center(k)), Some(k));
        }
        assert_eq!(g.locate(&Vector::from_slice(&[1.0, 3.0])), Some(g.cells() - 1));
        assert_eq!(g.locate(&Vector::from_slice(&[1.1, 0.0])), None);
    }

    #[test]
    fn rle_roundtrip() {
        let g = Grid2::square(1.0, 7);
        for m in [Mask::empty(&g), Mask::full(&g), Mask::from_fn(&g, |k| k % 3 == 0 || k > 40)] {
            let j = serde_json::to_string(&m).unwrap();
            assert_eq!(serde_json::from_str::<Mask>(&j).unwrap(), m);
        }
        assert_eq!(Mask::full(&g).to_rle(), vec![0, 49]);
        assert!(Mask::from_rle(7, 7, &[3, 4]).is_err());
    }

    #[test]
    fn boundary_of_a_block() {
        let g = Grid2::square(1.0, 6);
        let m = Mask::from_fn(&g, |k| {
            let (i, j) = g.ij(k);
            (1..5).contains(&i) && (1..5).contains(&j)
        });
        assert_eq!(m.boundary(&g).len(), 12);
    }
}
