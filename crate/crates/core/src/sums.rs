//! Prefix sums (1D), summed-area tables (2D) and monotone-deque sliding
//! extrema: the shared engine behind the maximal operators and the
//! sup-over-cubes weight constants.
//!
//! All region sums are differences of one accumulation pass, so a whole-cell
//! translation of the input reproduces bit-identical window sums; the
//! cellwise suprema inherit exact translation covariance from that.

use std::collections::VecDeque;

use crate::grid::{Cube, CubeMode, Grid, MAX_DIM};
use crate::real::Real;

/// O(1) sums over grid-aligned cubes.
#[derive(Debug, Clone)]
pub struct RegionSums<T> {
    dim: usize,
    n: usize,
    table: Vec<T>,
}

impl<T: Real> RegionSums<T> {
    pub fn new(grid: &Grid<T>, values: &[T]) -> Self {
        let n = grid.cells_per_side();
        let dim = grid.dim();
        debug_assert_eq!(values.len(), grid.cell_count());
        let table = match dim {
            1 => {
                let mut t = Vec::with_capacity(n + 1);
                let mut acc = T::zero();
                t.push(acc);
                for &v in values {
                    acc += v;
                    t.push(acc);
                }
                t
            }
            _ => {
                // (n+1) x (n+1), row-major; t[i][j] = sum over cells [0,i) x [0,j)
                let w = n + 1;
                let mut t = vec![T::zero(); w * w];
                for i in 0..n {
                    for j in 0..n {
                        let v = values[i * n + j];
                        t[(i + 1) * w + (j + 1)] =
                            v + t[i * w + (j + 1)] + t[(i + 1) * w + j] - t[i * w + j];
                    }
                }
                t
            }
        };
        RegionSums { dim, n, table }
    }

    /// Sum of values over the cube's cells.
    #[inline]
    pub fn cube_sum(&self, q: Cube) -> T {
        let s = q.side;
        match self.dim {
            1 => self.table[q.corner[0] + s] - self.table[q.corner[0]],
            _ => {
                let w = self.n + 1;
                let (a, b) = (q.corner[0], q.corner[1]);
                self.table[(a + s) * w + (b + s)] - self.table[a * w + (b + s)]
                    - self.table[(a + s) * w + b]
                    + self.table[a * w + b]
            }
        }
    }
}

/// Offsets admissible for cubes of side `s` on an axis of `n` cells.
#[inline]
fn offset_count(n: usize, s: usize) -> usize {
    n - s + 1
}

/// Monotone-deque pass: `out[i] = max(out[i], combine over o in
/// [i-s+1, i] cap [0, m-1] of w[o])` for every cell `i` of the axis.
fn scatter_window_max_1d<T: Real>(w: &[T], s: usize, n: usize, out: &mut [T]) {
    let m = w.len();
    debug_assert_eq!(m, offset_count(n, s));
    let mut dq: VecDeque<usize> = VecDeque::new();
    for i in 0..n {
        if i < m {
            while let Some(&back) = dq.back() {
                if w[back] <= w[i] {
                    dq.pop_back();
                } else {
                    break;
                }
            }
            dq.push_back(i);
        }
        while let Some(&front) = dq.front() {
            if front + s <= i {
                dq.pop_front();
            } else {
                break;
            }
        }
        if let Some(&front) = dq.front() {
            out[i] = out[i].max(w[front]);
        }
    }
}

/// Sliding max of width `win` over `vals`, one entry per admissible offset.
fn window_max_per_offset<T: Real>(vals: &[T], win: usize, maximize: bool) -> Vec<T> {
    let n = vals.len();
    let m = offset_count(n, win);
    let mut out = Vec::with_capacity(m);
    let mut dq: VecDeque<usize> = VecDeque::new();
    let better = |a: T, b: T| if maximize { a >= b } else { a <= b };
    for i in 0..n {
        while let Some(&back) = dq.back() {
            if better(vals[i], vals[back]) {
                dq.pop_back();
            } else {
                break;
            }
        }
        dq.push_back(i);
        if i + 1 >= win {
            let lo = i + 1 - win;
            while let Some(&front) = dq.front() {
                if front < lo {
                    dq.pop_front();
                } else {
                    break;
                }
            }
            out.push(vals[*dq.front().expect("window nonempty")]);
        }
    }
    out
}

/// Per-offset minimum of `values` over each cube of side `s` (the
/// `inf_Q w` branch of the multiple-weight constants).
pub fn cube_min_per_offset<T: Real>(grid: &Grid<T>, values: &[T], s: usize) -> Vec<T> {
    let n = grid.cells_per_side();
    match grid.dim() {
        1 => window_max_per_offset(values, s, false),
        _ => {
            // rows first, then columns: min over a cube is separable
            let m = offset_count(n, s);
            let mut rows = Vec::with_capacity(n * m);
            for i in 0..n {
                rows.extend(window_max_per_offset(&values[i * n..(i + 1) * n], s, false));
            }
            let mut out = vec![T::zero(); m * m];
            let mut col = vec![T::zero(); n];
            for j in 0..m {
                for i in 0..n {
                    col[i] = rows[i * m + j];
                }
                for (o, v) in window_max_per_offset(&col, s, false).into_iter().enumerate() {
                    out[o * m + j] = v;
                }
            }
            out
        }
    }
}

/// Sides enumerated by a cube family.
pub fn family_sides(n: usize, mode: CubeMode) -> Vec<usize> {
    match mode {
        CubeMode::Full => (1..=n).collect(),
        CubeMode::Dyadic => {
            let mut v = Vec::new();
            let mut s = 1;
            while s <= n {
                v.push(s);
                s *= 2;
            }
            v
        }
    }
}

/// For every cell, the supremum of `cube_value(side, corner)` over all cubes
/// of the family containing that cell.
///
/// `cube_value` is invoked once per cube; cheap per-cube values (prefix-sum
/// averages) make the whole scan O(cells * #sides).
pub fn cellwise_family_sup<T: Real>(
    grid: &Grid<T>,
    mode: CubeMode,
    mut cube_value: impl FnMut(usize, [usize; MAX_DIM]) -> T,
) -> Vec<T> {
    let n = grid.cells_per_side();
    let dim = grid.dim();
    let mut out = vec![T::neg_infinity(); grid.cell_count()];
    for s in family_sides(n, mode) {
        match (mode, dim) {
            (CubeMode::Dyadic, 1) => {
                for o in 0..n / s {
                    let v = cube_value(s, [o * s, 0]);
                    for i in o * s..(o + 1) * s {
                        out[i] = out[i].max(v);
                    }
                }
            }
            (CubeMode::Dyadic, _) => {
                for o0 in 0..n / s {
                    for o1 in 0..n / s {
                        let v = cube_value(s, [o0 * s, o1 * s]);
                        for i0 in o0 * s..(o0 + 1) * s {
                            for i1 in o1 * s..(o1 + 1) * s {
                                let lin = i0 * n + i1;
                                out[lin] = out[lin].max(v);
                            }
                        }
                    }
                }
            }
            (CubeMode::Full, 1) => {
                let m = offset_count(n, s);
                let w: Vec<T> = (0..m).map(|o| cube_value(s, [o, 0])).collect();
                scatter_window_max_1d(&w, s, n, &mut out);
            }
            (CubeMode::Full, _) => {
                let m = offset_count(n, s);
                let mut w = vec![T::zero(); m * m];
                for o0 in 0..m {
                    for o1 in 0..m {
                        w[o0 * m + o1] = cube_value(s, [o0, o1]);
                    }
                }
                // max over o1-window per row, at every column cell
                let mut mid = vec![T::neg_infinity(); m * n];
                for o0 in 0..m {
                    scatter_window_max_1d(&w[o0 * m..(o0 + 1) * m], s, n, &mut mid[o0 * n..(o0 + 1) * n]);
                }
                // then max over o0-window per column
                let mut col_w = vec![T::zero(); m];
                let mut col_out = vec![T::neg_infinity(); n];
                for j in 0..n {
                    for o0 in 0..m {
                        col_w[o0] = mid[o0 * n + j];
                    }
                    for v in col_out.iter_mut() {
                        *v = T::neg_infinity();
                    }
                    scatter_window_max_1d(&col_w, s, n, &mut col_out);
                    for i in 0..n {
                        let lin = i * n + j;
                        out[lin] = out[lin].max(col_out[i]);
                    }
                }
            }
        }
    }
    out
}

/// Supremum of `cube_value` over every cube of the family (not cellwise).
pub fn family_sup_scalar<T: Real>(
    grid: &Grid<T>,
    mode: CubeMode,
    mut cube_value: impl FnMut(usize, [usize; MAX_DIM]) -> T,
) -> T {
    let n = grid.cells_per_side();
    let dim = grid.dim();
    let mut best = T::neg_infinity();
    for s in family_sides(n, mode) {
        let offsets: Vec<usize> = match mode {
            CubeMode::Full => (0..offset_count(n, s)).collect(),
            CubeMode::Dyadic => (0..n / s).map(|o| o * s).collect(),
        };
        match dim {
            1 => {
                for &o in &offsets {
                    best = best.max(cube_value(s, [o, 0]));
                }
            }
            _ => {
                for &o0 in &offsets {
                    for &o1 in &offsets {
                        best = best.max(cube_value(s, [o0, o1]));
                    }
                }
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridFunction;

    #[test]
    fn region_sums_match_direct_1d() {
        let g = Grid::<f64>::build(1, [0.0, 0.0], 1.0, 16).unwrap();
        let f = GridFunction::from_fn(g, |x| (7.3 * x[0]).sin());
        let sums = RegionSums::new(&g, f.values());
        for s in 1..=16usize {
            for o in 0..=(16 - s) {
                let q = Cube::new([o, 0], s);
                let direct: f64 = q.cells(&g).map(|i| f.values()[i]).sum();
                assert!((sums.cube_sum(q) - direct).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn region_sums_match_direct_2d() {
        let g = Grid::<f64>::build(2, [0.0, 0.0], 1.0, 8).unwrap();
        let f = GridFunction::from_fn(g, |x| x[0] * x[0] - 2.0 * x[1]);
        let sums = RegionSums::new(&g, f.values());
        for s in 1..=8usize {
            for o0 in 0..=(8 - s) {
                for o1 in 0..=(8 - s) {
                    let q = Cube::new([o0, o1], s);
                    let direct: f64 = q.cells(&g).map(|i| f.values()[i]).sum();
                    assert!((sums.cube_sum(q) - direct).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn cellwise_sup_matches_brute_force() {
        let g = Grid::<f64>::build(1, [0.0, 0.0], 1.0, 16).unwrap();
        let f = GridFunction::from_fn(g, |x| (13.0 * x[0]).cos().abs());
        let sums = RegionSums::new(&g, f.values());
        for mode in [CubeMode::Full, CubeMode::Dyadic] {
            let fast = cellwise_family_sup(&g, mode, |s, corner| {
                sums.cube_sum(Cube::new(corner, s)) / s as f64
            });
            for cell in 0..16usize {
                let fam = crate::grid::cubes_containing_cell(&g, [cell, 0], mode);
                let brute = fam
                    .iter()
                    .map(|q| sums.cube_sum(*q) / q.side as f64)
                    .fold(f64::NEG_INFINITY, f64::max);
                assert_eq!(fast[cell], brute, "cell {cell} mode {mode}");
            }
        }
    }

    #[test]
    fn cellwise_sup_matches_brute_force_2d() {
        let g = Grid::<f64>::build(2, [0.0, 0.0], 1.0, 8).unwrap();
        let f = GridFunction::from_fn(g, |x| (5.0 * x[0] + 3.0 * x[1]).sin().abs());
        let sums = RegionSums::new(&g, f.values());
        for mode in [CubeMode::Full, CubeMode::Dyadic] {
            let fast = cellwise_family_sup(&g, mode, |s, corner| {
                sums.cube_sum(Cube::new(corner, s)) / (s * s) as f64
            });
            for cell in 0..g.cell_count() {
                let fam = crate::grid::cubes_containing_cell(&g, g.multi(cell), mode);
                let brute = fam
                    .iter()
                    .map(|q| sums.cube_sum(*q) / (q.side * q.side) as f64)
                    .fold(f64::NEG_INFINITY, f64::max);
                assert_eq!(fast[cell], brute, "cell {cell} mode {mode}");
            }
        }
    }

    #[test]
    fn cube_min_matches_direct() {
        let g = Grid::<f64>::build(2, [0.0, 0.0], 1.0, 8).unwrap();
        let f = GridFunction::from_fn(g, |x| 1.0 + (9.0 * x[0] * x[1]).sin());
        for s in [1usize, 3, 8] {
            let mins = cube_min_per_offset(&g, f.values(), s);
            let m = 8 - s + 1;
            for o0 in 0..m {
                for o1 in 0..m {
                    let q = Cube::new([o0, o1], s);
                    let direct = q
                        .cells(&g)
                        .map(|i| f.values()[i])
                        .fold(f64::INFINITY, f64::min);
                    assert_eq!(mins[o0 * m + o1], direct);
                }
            }
        }
    }
}
