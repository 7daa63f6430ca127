//! Uniform cell-centered grids over a box, grid-aligned cubes, quadrature
//! and unweighted norms.
//!
//! The box stands in for the whole space: functions are compactly supported
//! inside it by convention and nothing wraps around. Cells-per-side is a
//! power of two so the dyadic mesh aligns exactly with the grid.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::real::Real;

/// Maximum supported dimension at desk scale.
pub const MAX_DIM: usize = 2;

/// A point in the box; only the first `n` coordinates are meaningful.
pub type Point<T> = [T; MAX_DIM];

/// Axis-aligned box `[lo, lo + side)^n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxDomain<T> {
    dim: usize,
    lo: Point<T>,
    side: T,
}

impl<T: Real> BoxDomain<T> {
    pub fn new(dim: usize, lo: Point<T>, side: T) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(CoreError::InvalidParameter(format!(
                "dimension must be 1 or 2, got {dim}"
            )));
        }
        if !(side > T::zero()) || !side.is_finite() {
            return Err(CoreError::InvalidParameter(format!(
                "box side must be positive and finite, got {side}"
            )));
        }
        Ok(BoxDomain { dim, lo, side })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lo(&self) -> Point<T> {
        self.lo
    }

    pub fn side(&self) -> T {
        self.side
    }

    pub fn contains(&self, x: Point<T>) -> bool {
        (0..self.dim).all(|d| x[d] >= self.lo[d] && x[d] < self.lo[d] + self.side)
    }

    /// n-dimensional volume.
    pub fn volume(&self) -> T {
        let mut v = T::one();
        for _ in 0..self.dim {
            v *= self.side;
        }
        v
    }
}

/// Uniform grid: the box split into `cells`^n cell-centered cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid<T> {
    boxd: BoxDomain<T>,
    cells: usize,
    h: T,
}

impl<T: Real> Grid<T> {
    /// `cells` is the cell count per side and must be a power of two.
    pub fn new(boxd: BoxDomain<T>, cells: usize) -> Result<Self> {
        if cells == 0 || !cells.is_power_of_two() {
            return Err(CoreError::InvalidParameter(format!(
                "cells per side must be a power of two, got {cells}"
            )));
        }
        let h = boxd.side / T::of_usize(cells);
        Ok(Grid { boxd, cells, h })
    }

    /// Convenience constructor for a fresh box + grid.
    pub fn build(dim: usize, lo: Point<T>, side: T, cells: usize) -> Result<Self> {
        Grid::new(BoxDomain::new(dim, lo, side)?, cells)
    }

    pub fn boxd(&self) -> &BoxDomain<T> {
        &self.boxd
    }

    pub fn dim(&self) -> usize {
        self.boxd.dim
    }

    /// Cells per side.
    pub fn cells_per_side(&self) -> usize {
        self.cells
    }

    /// Total cell count (`cells`^n).
    pub fn cell_count(&self) -> usize {
        let mut c = 1usize;
        for _ in 0..self.dim() {
            c *= self.cells;
        }
        c
    }

    /// Cell width.
    pub fn h(&self) -> T {
        self.h
    }

    /// Cell volume `h^n`.
    pub fn cell_volume(&self) -> T {
        let mut v = T::one();
        for _ in 0..self.dim() {
            v *= self.h;
        }
        v
    }

    /// Multi-index of the cell containing `x`.
    pub fn cell_of(&self, x: Point<T>) -> Result<[usize; MAX_DIM]> {
        if !self.boxd.contains(x) {
            return Err(CoreError::PointOutsideBox(
                (0..self.dim()).map(|d| x[d].as_f64()).collect(),
            ));
        }
        let mut idx = [0usize; MAX_DIM];
        for d in 0..self.dim() {
            let t = ((x[d] - self.boxd.lo[d]) / self.h).floor().as_f64() as usize;
            idx[d] = t.min(self.cells - 1);
        }
        Ok(idx)
    }

    /// Center of the cell with multi-index `idx`.
    pub fn center(&self, idx: [usize; MAX_DIM]) -> Point<T> {
        let mut x = [T::zero(); MAX_DIM];
        for d in 0..self.dim() {
            x[d] = self.boxd.lo[d] + (T::of_usize(idx[d]) + T::c(0.5)) * self.h;
        }
        x
    }

    /// Row-major linear index.
    #[inline]
    pub fn linear(&self, idx: [usize; MAX_DIM]) -> usize {
        match self.dim() {
            1 => idx[0],
            _ => idx[0] * self.cells + idx[1],
        }
    }

    /// Inverse of [`Grid::linear`].
    #[inline]
    pub fn multi(&self, lin: usize) -> [usize; MAX_DIM] {
        match self.dim() {
            1 => [lin, 0],
            _ => [lin / self.cells, lin % self.cells],
        }
    }

    /// Same geometry check, used by binary operations.
    pub fn expect_same(&self, other: &Grid<T>) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(CoreError::GridMismatch(format!(
                "{}^{} cells vs {}^{} cells",
                self.cells,
                self.dim(),
                other.cells,
                other.dim()
            )))
        }
    }
}

/// Which family of grid-aligned cubes a supremum ranges over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CubeMode {
    /// Every grid-aligned cube: all integer sides, all offsets.
    Full,
    /// Only cubes of the dyadic mesh.
    Dyadic,
}

impl std::fmt::Display for CubeMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CubeMode::Full => write!(f, "full"),
            CubeMode::Dyadic => write!(f, "dyadic"),
        }
    }
}

/// Grid-aligned cube: lower-corner cell index plus side length in cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cube {
    pub corner: [usize; MAX_DIM],
    pub side: usize,
}

impl Cube {
    pub fn new(corner: [usize; MAX_DIM], side: usize) -> Self {
        Cube { corner, side }
    }

    pub fn checked<T: Real>(self, grid: &Grid<T>) -> Result<Self> {
        let n = grid.cells_per_side();
        let ok = self.side >= 1
            && (0..grid.dim()).all(|d| self.corner[d] + self.side <= n)
            && (grid.dim()..MAX_DIM).all(|d| self.corner[d] == 0);
        if ok {
            Ok(self)
        } else {
            Err(CoreError::CubeOutOfBounds {
                corner: self.corner[..grid.dim()].to_vec(),
                side: self.side,
                cells: n,
            })
        }
    }

    /// Side length `l(Q) = side * h`.
    pub fn side_length<T: Real>(&self, grid: &Grid<T>) -> T {
        T::of_usize(self.side) * grid.h()
    }

    /// Measure `|Q| = (side * h)^n`.
    pub fn volume<T: Real>(&self, grid: &Grid<T>) -> T {
        let mut v = T::one();
        for _ in 0..grid.dim() {
            v *= self.side_length(grid);
        }
        v
    }

    /// Cell count inside the cube.
    pub fn cell_count<T: Real>(&self, grid: &Grid<T>) -> usize {
        let mut c = 1usize;
        for _ in 0..grid.dim() {
            c *= self.side;
        }
        c
    }

    pub fn contains_cell<T: Real>(&self, grid: &Grid<T>, idx: [usize; MAX_DIM]) -> bool {
        (0..grid.dim()).all(|d| idx[d] >= self.corner[d] && idx[d] < self.corner[d] + self.side)
    }

    /// Linear indices of the cells inside the cube.
    pub fn cells<'a, T: Real>(&'a self, grid: &'a Grid<T>) -> impl Iterator<Item = usize> + 'a {
        let dim = grid.dim();
        let side = self.side;
        let corner = self.corner;
        (0..self.cell_count(grid)).map(move |k| match dim {
            1 => corner[0] + k,
            _ => grid.linear([corner[0] + k / side, corner[1] + k % side]),
        })
    }

    /// Dyadic parent (side doubled, corner aligned). `None` at the root.
    pub fn dyadic_parent<T: Real>(&self, grid: &Grid<T>) -> Option<Cube> {
        if self.side >= grid.cells_per_side() {
            return None;
        }
        let s = self.side * 2;
        let mut corner = [0usize; MAX_DIM];
        for d in 0..grid.dim() {
            corner[d] = (self.corner[d] / s) * s;
        }
        Some(Cube { corner, side: s })
    }
}

/// All cubes of `mode` containing the point `x`, sorted by side ascending
/// then lower corner lexicographic.
pub fn cube_family<T: Real>(grid: &Grid<T>, x: Point<T>, mode: CubeMode) -> Result<Vec<Cube>> {
    let cell = grid.cell_of(x)?;
    Ok(cubes_containing_cell(grid, cell, mode))
}

/// Same family, keyed by the containing cell.
pub fn cubes_containing_cell<T: Real>(
    grid: &Grid<T>,
    cell: [usize; MAX_DIM],
    mode: CubeMode,
) -> Vec<Cube> {
    let n = grid.cells_per_side();
    let dim = grid.dim();
    let mut out = Vec::new();
    match mode {
        CubeMode::Dyadic => {
            let mut s = 1usize;
            while s <= n {
                let mut corner = [0usize; MAX_DIM];
                for d in 0..dim {
                    corner[d] = (cell[d] / s) * s;
                }
                out.push(Cube { corner, side: s });
                s *= 2;
            }
        }
        CubeMode::Full => {
            for s in 1..=n {
                let range = |i: usize| {
                    let lo = i.saturating_sub(s - 1);
                    let hi = i.min(n - s);
                    lo..=hi
                };
                match dim {
                    1 => {
                        for o in range(cell[0]) {
                            out.push(Cube {
                                corner: [o, 0],
                                side: s,
                            });
                        }
                    }
                    _ => {
                        for o0 in range(cell[0]) {
                            for o1 in range(cell[1]) {
                                out.push(Cube {
                                    corner: [o0, o1],
                                    side: s,
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Real-valued function sampled at cell centers.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction<T> {
    grid: Grid<T>,
    values: Vec<T>,
}

impl<T: Real> GridFunction<T> {
    pub fn from_values(grid: Grid<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.cell_count() {
            return Err(CoreError::InvalidParameter(format!(
                "value count {} does not match cell count {}",
                values.len(),
                grid.cell_count()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(CoreError::InvalidParameter(format!(
                "non-finite sample value {bad}"
            )));
        }
        Ok(GridFunction { grid, values })
    }

    pub fn zero(grid: Grid<T>) -> Self {
        let len = grid.cell_count();
        GridFunction {
            grid,
            values: vec![T::zero(); len],
        }
    }

    pub fn constant(grid: Grid<T>, c: T) -> Self {
        let len = grid.cell_count();
        GridFunction {
            grid,
            values: vec![c; len],
        }
    }

    /// Sample `f` at cell centers.
    pub fn from_fn(grid: Grid<T>, f: impl Fn(Point<T>) -> T) -> Self {
        let values = (0..grid.cell_count())
            .map(|lin| f(grid.center(grid.multi(lin))))
            .collect();
        GridFunction { grid, values }
    }

    /// Indicator of a predicate on cell centers.
    pub fn indicator(grid: Grid<T>, inside: impl Fn(Point<T>) -> bool) -> Self {
        Self::from_fn(grid, |x| if inside(x) { T::one() } else { T::zero() })
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn value_at(&self, idx: [usize; MAX_DIM]) -> T {
        self.values[self.grid.linear(idx)]
    }

    /// Cellwise map (grid unchanged).
    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        GridFunction {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Cellwise combination of two functions on the same grid.
    pub fn zip(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.grid.expect_same(&other.grid)?;
        Ok(GridFunction {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn scale(&self, c: T) -> Self {
        self.map(|v| c * v)
    }

    pub fn abs(&self) -> Self {
        self.map(|v| v.abs())
    }

    pub fn max_abs(&self) -> T {
        self.values
            .iter()
            .fold(T::zero(), |acc, v| acc.max(v.abs()))
    }

    /// Shift by whole cells, filling with zero. Errors if a nonzero value
    /// would leave the grid (norm preservation would silently break).
    pub fn translate_cells(&self, shift: [isize; MAX_DIM]) -> Result<Self> {
        let n = self.grid.cells_per_side() as isize;
        let dim = self.grid.dim();
        let mut out = vec![T::zero(); self.values.len()];
        for lin in 0..self.values.len() {
            let v = self.values[lin];
            if v == T::zero() {
                continue;
            }
            let idx = self.grid.multi(lin);
            let mut dst = [0usize; MAX_DIM];
            let mut inside = true;
            for d in 0..dim {
                let t = idx[d] as isize + shift[d];
                if t < 0 || t >= n {
                    inside = false;
                    break;
                }
                dst[d] = t as usize;
            }
            if !inside {
                return Err(CoreError::InvalidParameter(
                    "translation pushes support off the grid".into(),
                ));
            }
            out[self.grid.linear(dst)] = v;
        }
        GridFunction::from_values(self.grid, out)
    }
}

/// `h^n * sum(values)`: the box integral of the sampled function.
pub fn integrate<T: Real>(f: &GridFunction<T>) -> T {
    let s: T = f.values().iter().copied().sum();
    s * f.grid().cell_volume()
}

/// `|Q|^{-1} * integral over Q`, computed as the mean of cell values in `Q`.
pub fn average_on_cube<T: Real>(f: &GridFunction<T>, q: Cube) -> Result<T> {
    let q = q.checked(f.grid())?;
    let mut s = T::zero();
    for lin in q.cells(f.grid()) {
        s += f.values()[lin];
    }
    Ok(s / T::of_usize(q.cell_count(f.grid())))
}

/// Extremes of `f` over a cube.
pub fn min_max_on_cube<T: Real>(f: &GridFunction<T>, q: Cube) -> Result<(T, T)> {
    let q = q.checked(f.grid())?;
    let mut lo = T::infinity();
    let mut hi = T::neg_infinity();
    for lin in q.cells(f.grid()) {
        let v = f.values()[lin];
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Ok((lo, hi))
}

/// `(integral |f|^p)^{1/p}`; `p = infinity` gives the max of `|f|`.
pub fn lp_norm<T: Real>(f: &GridFunction<T>, p: T) -> Result<T> {
    if !(p > T::zero()) {
        return Err(CoreError::InvalidParameter(format!(
            "Lp exponent must be positive, got {p}"
        )));
    }
    if p == T::infinity() {
        return Ok(f.max_abs());
    }
    let mut s = T::zero();
    for &v in f.values() {
        s += v.abs().powf(p);
    }
    Ok((s * f.grid().cell_volume()).powf(p.recip()))
}

/// Weak-`L^q` quasi-norm `sup_t t * |{|f| > t}|^{1/q}`.
///
/// The map `t -> t * |{|f| >= t}|^{1/q}` is increasing between consecutive
/// sample values, so the supremum over all `t > 0` is attained at a sample
/// value with the superlevel set `{|f| >= t}`. Only distinct values need to
/// be inspected.
pub fn weak_lq_norm<T: Real>(f: &GridFunction<T>, q: T) -> Result<T> {
    if !(q > T::zero()) || q == T::infinity() {
        return Err(CoreError::InvalidParameter(format!(
            "weak-Lq exponent must be positive and finite, got {q}"
        )));
    }
    let mut mags: Vec<T> = f
        .values()
        .iter()
        .map(|v| v.abs())
        .filter(|v| *v > T::zero())
        .collect();
    mags.sort_unstable_by(|a, b| b.partial_cmp(a).expect("finite values"));
    let hv = f.grid().cell_volume();
    let mut best = T::zero();
    for (i, &t) in mags.iter().enumerate() {
        if i + 1 < mags.len() && mags[i + 1] == t {
            continue; // measure of {|f| >= t} counts through the last tie
        }
        let measure = hv * T::of_usize(i + 1);
        best = best.max(t * measure.powf(q.recip()));
    }
    Ok(best)
}
