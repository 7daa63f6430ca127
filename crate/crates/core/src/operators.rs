//! The m-linear fractional singular integral and the maximal-function
//! family: Hardy-Littlewood, delta-power, sharp (mean oscillation),
//! fractional, multilinear fractional and their L(log L) Luxemburg
//! variants.

use rayon::prelude::*;

use crate::error::{CoreError, Result};
use crate::grid::{Cube, CubeMode, Grid, GridFunction, Point, MAX_DIM};
use crate::kernel::Kernel;
use crate::real::Real;
use crate::sums::{cellwise_family_sup, RegionSums};

/// Options for [`apply_t`].
#[derive(Debug, Clone, Copy, Default)]
pub struct ApplyOpts {
    /// Lift the desk-scale size caps (the quadrature is
    /// O(cells^(m+1)); caps exist so a config typo cannot wedge a run).
    pub allow_large: bool,
}

/// Result of applying the operator: the output samples plus an upper
/// estimate for the bias introduced by omitting diagonal tuples.
#[derive(Debug, Clone)]
pub struct OperatorOutput<T> {
    pub result: GridFunction<T>,
    /// `m * A * prod ||f_j||_inf * s_n * (sqrt(n) h)^alpha / alpha`:
    /// the size estimate integrated over the omitted near-diagonal cells.
    pub omission_bias: T,
}

fn check_caps<T: Real>(kernel: &Kernel<T>, grid: &Grid<T>, opts: &ApplyOpts) -> Result<()> {
    if opts.allow_large {
        return Ok(());
    }
    let n_side = grid.cells_per_side();
    let ok = match (kernel.m(), grid.dim()) {
        (1, _) => n_side <= 8192,
        (2, 1) => n_side <= 512,
        (2, _) => n_side <= 32,
        (m, _) => {
            let evals = (grid.cell_count() as f64).powi(m as i32 + 1);
            evals <= 2e9
        }
    };
    if ok {
        Ok(())
    } else {
        Err(CoreError::CapExceeded(format!(
            "{} cells per side for arity {} in dimension {} (pass allow_large to override)",
            n_side,
            kernel.m(),
            grid.dim()
        )))
    }
}

fn centers<T: Real>(grid: &Grid<T>) -> Vec<Point<T>> {
    (0..grid.cell_count())
        .map(|lin| grid.center(grid.multi(lin)))
        .collect()
}

fn point_dist<T: Real>(dim: usize, a: Point<T>, b: Point<T>) -> T {
    match dim {
        1 => (a[0] - b[0]).abs(),
        _ => {
            let dx = a[0] - b[0];
            let dy = a[1] - b[1];
            (dx * dx + dy * dy).sqrt()
        }
    }
}

/// Midpoint-rule value of the operator at one output cell; `skip` is the
/// linear index of the cell whose tuples are omitted (usize::MAX omits
/// nothing, used for off-center point evaluation).
fn quadrature_at<T: Real>(
    kernel: &Kernel<T>,
    inputs: &[&GridFunction<T>],
    dists: &[T],
    skip: usize,
) -> T {
    let cells = dists.len();
    match inputs {
        [f] => {
            let mut acc = T::zero();
            for (i, (&v, &d)) in f.values().iter().zip(dists).enumerate() {
                if i == skip || v == T::zero() {
                    continue;
                }
                acc += kernel.eval_radial(d) * v;
            }
            acc
        }
        [f1, f2] => {
            let mut acc = T::zero();
            for (i, (&v1, &d1)) in f1.values().iter().zip(dists).enumerate() {
                if i == skip || v1 == T::zero() {
                    continue;
                }
                let mut row = T::zero();
                for (j, (&v2, &d2)) in f2.values().iter().zip(dists).enumerate() {
                    if j == skip || v2 == T::zero() {
                        continue;
                    }
                    row += kernel.eval_radial(d1 + d2) * v2;
                }
                acc += v1 * row;
            }
            acc
        }
        _ => {
            // generic arity: depth-first over tuples
            fn rec<T: Real>(
                kernel: &Kernel<T>,
                inputs: &[&GridFunction<T>],
                dists: &[T],
                skip: usize,
                depth: usize,
                dist_acc: T,
                prod_acc: T,
            ) -> T {
                if depth == inputs.len() {
                    return kernel.eval_radial(dist_acc) * prod_acc;
                }
                let mut acc = T::zero();
                for (i, (&v, &d)) in inputs[depth].values().iter().zip(dists).enumerate() {
                    if i == skip || v == T::zero() {
                        continue;
                    }
                    acc += rec(kernel, inputs, dists, skip, depth + 1, dist_acc + d, prod_acc * v);
                }
                acc
            }
            rec(kernel, inputs, dists, skip, 0, T::zero(), T::one())
        }
    }
}

fn validate_inputs<T: Real>(kernel: &Kernel<T>, inputs: &[&GridFunction<T>]) -> Result<Grid<T>> {
    if inputs.len() != kernel.m() {
        return Err(CoreError::InvalidParameter(format!(
            "kernel arity {} but {} input functions",
            kernel.m(),
            inputs.len()
        )));
    }
    let grid = *inputs[0].grid();
    for f in inputs {
        grid.expect_same(f.grid())?;
    }
    if grid.dim() != kernel.n() {
        return Err(CoreError::GridMismatch(format!(
            "kernel dimension {} vs grid dimension {}",
            kernel.n(),
            grid.dim()
        )));
    }
    Ok(grid)
}

fn omission_bias<T: Real>(kernel: &Kernel<T>, inputs: &[&GridFunction<T>], grid: &Grid<T>) -> T {
    let n = grid.dim();
    let surface = if n == 1 {
        T::c(2.0)
    } else {
        T::c(std::f64::consts::TAU)
    };
    let sup_prod = inputs
        .iter()
        .fold(T::one(), |acc, f| acc * f.max_abs());
    let radius = T::of_usize(n).sqrt() * grid.h();
    T::of_usize(kernel.m()) * kernel.size_const() * sup_prod * surface
        * radius.powf(kernel.alpha())
        / kernel.alpha()
}

/// Apply the operator on the grid: for every output cell center the
/// kernel-weighted midpoint sum `sum K(x, y) prod f_j(y_j) h^(mn)` over
/// all input-cell tuples, omitting tuples that touch the output cell
/// itself (the kernel is undefined on the diagonal; for `alpha > 0` the
/// omitted mass is O(h^alpha) and reported as `omission_bias`).
pub fn apply_t<T: Real>(
    kernel: &Kernel<T>,
    inputs: &[&GridFunction<T>],
    opts: &ApplyOpts,
) -> Result<OperatorOutput<T>> {
    let grid = validate_inputs(kernel, inputs)?;
    check_caps(kernel, &grid, opts)?;
    let pts = centers(&grid);
    let dim = grid.dim();
    let mut hpow = T::one();
    for _ in 0..kernel.m() * dim {
        hpow *= grid.h();
    }
    let values: Vec<T> = (0..grid.cell_count())
        .into_par_iter()
        .map(|out_lin| {
            let x = pts[out_lin];
            let dists: Vec<T> = pts.iter().map(|&y| point_dist(dim, x, y)).collect();
            quadrature_at(kernel, inputs, &dists, out_lin) * hpow
        })
        .collect();
    Ok(OperatorOutput {
        result: GridFunction::from_values(grid, values)?,
        omission_bias: omission_bias(kernel, inputs, &grid),
    })
}

/// Pointwise evaluation at an arbitrary `x` (not necessarily a cell
/// center). Only tuples whose centers collide with `x` exactly are skipped.
pub fn apply_t_at<T: Real>(
    kernel: &Kernel<T>,
    inputs: &[&GridFunction<T>],
    x: Point<T>,
) -> Result<T> {
    let grid = validate_inputs(kernel, inputs)?;
    let dim = grid.dim();
    let pts = centers(&grid);
    let dists: Vec<T> = pts.iter().map(|&y| point_dist(dim, x, y)).collect();
    let skip = dists.iter().position(|&d| d == T::zero()).unwrap_or(usize::MAX);
    let mut hpow = T::one();
    for _ in 0..kernel.m() * dim {
        hpow *= grid.h();
    }
    Ok(quadrature_at(kernel, inputs, &dists, skip) * hpow)
}

/// Hardy-Littlewood maximal function: `sup over cubes containing x of the
/// average of |f|`.
pub fn hl_maximal<T: Real>(f: &GridFunction<T>, mode: CubeMode) -> GridFunction<T> {
    let grid = *f.grid();
    let abs = f.abs();
    let sums = RegionSums::new(&grid, abs.values());
    let dim = grid.dim();
    let mut values = cellwise_family_sup(&grid, mode, |s, corner| {
        let cnt = T::of_usize(if dim == 1 { s } else { s * s });
        sums.cube_sum(Cube::new(corner, s)) / cnt
    });
    // the singleton cube makes M f >= |f| an identity; pin it exactly
    // against prefix-sum rounding
    for (v, a) in values.iter_mut().zip(abs.values()) {
        *v = v.max(*a);
    }
    GridFunction::from_values(grid, values).expect("maximal output well-formed")
}

/// `M_delta f = (M |f|^delta)^(1/delta)`.
pub fn m_delta<T: Real>(f: &GridFunction<T>, delta: T, mode: CubeMode) -> Result<GridFunction<T>> {
    if !(delta > T::zero()) {
        return Err(CoreError::InvalidParameter(format!(
            "delta must be positive, got {delta}"
        )));
    }
    if delta == T::one() {
        return Ok(hl_maximal(f, mode));
    }
    let powered = f.map(|v| v.abs().powf(delta));
    Ok(hl_maximal(&powered, mode).map(|v| v.powf(delta.recip())))
}

/// Sharp (mean oscillation) maximal function
/// `sup over cubes of |Q|^-1 int_Q |f - f_Q|`, with the delta-power
/// composition `(M# |f|^delta)^(1/delta)` for `delta < 1`.
pub fn sharp_maximal<T: Real>(
    f: &GridFunction<T>,
    delta: T,
    mode: CubeMode,
) -> Result<GridFunction<T>> {
    if !(delta > T::zero() && delta <= T::one()) {
        return Err(CoreError::InvalidParameter(format!(
            "sharp maximal delta must lie in (0, 1], got {delta}"
        )));
    }
    let base = if delta == T::one() {
        f.clone()
    } else {
        f.map(|v| v.abs().powf(delta))
    };
    let grid = *base.grid();
    let sums = RegionSums::new(&grid, base.values());
    let vals = base.values();
    let values = cellwise_family_sup(&grid, mode, |s, corner| {
        let q = Cube::new(corner, s);
        let cnt = T::of_usize(q.cell_count(&grid));
        let mean = sums.cube_sum(q) / cnt;
        let mut osc = T::zero();
        for lin in q.cells(&grid) {
            osc += (vals[lin] - mean).abs();
        }
        osc / cnt
    });
    let out = GridFunction::from_values(grid, values).expect("sharp output well-formed");
    Ok(if delta == T::one() {
        out
    } else {
        out.map(|v| v.powf(delta.recip()))
    })
}

/// Default delta for sharp-maximal consumers: `min(1, n/(mn - alpha)) / 2`.
pub fn default_sharp_delta<T: Real>(m: usize, n: usize, alpha: T) -> T {
    let cap = T::of_usize(n) / (T::of_usize(m * n) - alpha);
    T::c(0.5) * cap.min(T::one())
}

/// Fractional maximal function `sup |Q|^(alpha/n) avg_Q |f|`, `0 < alpha < n`.
pub fn frac_maximal<T: Real>(
    f: &GridFunction<T>,
    alpha: T,
    mode: CubeMode,
) -> Result<GridFunction<T>> {
    let grid = *f.grid();
    let n = grid.dim();
    if !(alpha > T::zero() && alpha < T::of_usize(n)) {
        return Err(CoreError::InvalidParameter(format!(
            "fractional order must lie in (0, n) = (0, {n}), got {alpha}"
        )));
    }
    multilinear_frac_maximal(&[f], alpha, mode)
}

/// Multilinear fractional maximal function
/// `sup |Q|^(alpha/n) prod_j avg_Q |f_j|`, `0 <= alpha < mn`.
pub fn multilinear_frac_maximal<T: Real>(
    fs: &[&GridFunction<T>],
    alpha: T,
    mode: CubeMode,
) -> Result<GridFunction<T>> {
    if fs.len() == 1 && alpha == T::zero() {
        return Ok(hl_maximal(fs[0], mode));
    }
    let (grid, sums) = multi_setup(fs, alpha, T::one())?;
    let dim = grid.dim();
    let mut memo = (0usize, T::one());
    let values = cellwise_family_sup(&grid, mode, |s, corner| {
        if memo.0 != s {
            memo = (s, scale_factor(&grid, s, alpha));
        }
        let cnt = T::of_usize(if dim == 1 { s } else { s * s });
        let q = Cube::new(corner, s);
        let mut prod = memo.1;
        for sm in &sums {
            prod *= sm.cube_sum(q) / cnt;
        }
        prod
    });
    GridFunction::from_values(grid, values)
}

/// `sup |Q|^(alpha/n) prod_j (avg_Q |f_j|^r)^(1/r)` for `r > 1`.
pub fn multilinear_frac_maximal_r<T: Real>(
    fs: &[&GridFunction<T>],
    alpha: T,
    r: T,
    mode: CubeMode,
) -> Result<GridFunction<T>> {
    if !(r > T::one()) {
        return Err(CoreError::InvalidParameter(format!(
            "power-average order must exceed 1, got {r}"
        )));
    }
    let (grid, sums) = multi_setup(fs, alpha, r)?;
    let dim = grid.dim();
    let rinv = r.recip();
    let mut memo = (0usize, T::one());
    let values = cellwise_family_sup(&grid, mode, |s, corner| {
        if memo.0 != s {
            memo = (s, scale_factor(&grid, s, alpha));
        }
        let cnt = T::of_usize(if dim == 1 { s } else { s * s });
        let q = Cube::new(corner, s);
        let mut prod = memo.1;
        for sm in &sums {
            prod *= (sm.cube_sum(q) / cnt).powf(rinv);
        }
        prod
    });
    GridFunction::from_values(grid, values)
}

fn multi_setup<T: Real>(
    fs: &[&GridFunction<T>],
    alpha: T,
    r: T,
) -> Result<(Grid<T>, Vec<RegionSums<T>>)> {
    if fs.is_empty() {
        return Err(CoreError::InvalidParameter("no input functions".into()));
    }
    let grid = *fs[0].grid();
    for f in fs {
        grid.expect_same(f.grid())?;
    }
    let m = fs.len();
    let n = grid.dim();
    if !(alpha >= T::zero() && alpha < T::of_usize(m * n)) {
        return Err(CoreError::InvalidParameter(format!(
            "fractional order must lie in [0, mn) = [0, {}), got {alpha}",
            m * n
        )));
    }
    let sums = fs
        .iter()
        .map(|f| {
            let powered = if r == T::one() {
                f.abs()
            } else {
                f.map(|v| v.abs().powf(r))
            };
            RegionSums::new(&grid, powered.values())
        })
        .collect();
    Ok((grid, sums))
}

/// `|Q|^(alpha/n) = (s h)^alpha`.
fn scale_factor<T: Real>(grid: &Grid<T>, s: usize, alpha: T) -> T {
    if alpha == T::zero() {
        T::one()
    } else {
        (T::of_usize(s) * grid.h()).powf(alpha)
    }
}

/// Luxemburg average `||f||_{L(log L), Q}`: the least `lambda` with
/// `avg_Q (|f|/lambda) log(e + |f|/lambda) <= 1`, by bisection on the
/// monotone modular. Returns 0 when `f` vanishes on `Q`.
pub fn orlicz_llogl_average<T: Real>(f: &GridFunction<T>, q: Cube) -> Result<T> {
    let grid = f.grid();
    let q = q.checked(grid)?;
    let cells: Vec<usize> = q.cells(grid).collect();
    llogl_on_cells(f.values(), &cells)
}

fn llogl_on_cells<T: Real>(values: &[T], cells: &[usize]) -> Result<T> {
    let mut sup = T::zero();
    for &lin in cells {
        sup = sup.max(values[lin].abs());
    }
    if sup == T::zero() {
        return Ok(T::zero());
    }
    let cnt = T::of_usize(cells.len());
    let e = T::c(std::f64::consts::E);
    let modular = |lambda: T| {
        let mut acc = T::zero();
        for &lin in cells {
            let g = values[lin].abs();
            if g > T::zero() {
                let ratio = g / lambda;
                acc += ratio * (e + ratio).ln();
            }
        }
        acc / cnt
    };
    let mut lo = sup * T::c(1e-12);
    let mut hi = sup * T::c(1e6);
    if modular(lo) <= T::one() {
        return Ok(lo);
    }
    for _ in 0..200 {
        let mid = T::c(0.5) * (lo + hi);
        if modular(mid) <= T::one() {
            hi = mid;
        } else {
            lo = mid;
        }
        if (hi - lo) <= hi * T::c(1e-10) {
            break;
        }
    }
    Ok(hi)
}

/// Which slots of the multilinear maximal function use the `L(log L)`
/// Luxemburg average instead of the plain average.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LloglSlots {
    One(usize),
    All,
}

/// Multilinear fractional maximal function with `L(log L)` averages in the
/// designated slots. Per-cube bisection makes this O(|Q|) per cube; keep
/// grids modest in full mode.
pub fn multilinear_frac_maximal_llogl<T: Real>(
    fs: &[&GridFunction<T>],
    alpha: T,
    slots: LloglSlots,
    mode: CubeMode,
) -> Result<GridFunction<T>> {
    if let LloglSlots::One(i) = slots {
        if i >= fs.len() {
            return Err(CoreError::InvalidParameter(format!(
                "slot {i} out of range for {} functions",
                fs.len()
            )));
        }
    }
    let (grid, sums) = multi_setup(fs, alpha, T::one())?;
    let dim = grid.dim();
    let mut memo = (0usize, T::one());
    let mut cells_buf: Vec<usize> = Vec::new();
    let values = cellwise_family_sup(&grid, mode, |s, corner| {
        if memo.0 != s {
            memo = (s, scale_factor(&grid, s, alpha));
        }
        let cnt = T::of_usize(if dim == 1 { s } else { s * s });
        let q = Cube::new(corner, s);
        cells_buf.clear();
        cells_buf.extend(q.cells(&grid));
        let mut prod = memo.1;
        for (j, f) in fs.iter().enumerate() {
            let luxemburg = match slots {
                LloglSlots::All => true,
                LloglSlots::One(i) => i == j,
            };
            prod *= if luxemburg {
                llogl_on_cells(f.values(), &cells_buf).expect("cube in range")
            } else {
                sums[j].cube_sum(q) / cnt
            };
        }
        prod
    });
    GridFunction::from_values(grid, values)
}

/// `M` applied `k` times.
pub fn iterated_maximal<T: Real>(
    f: &GridFunction<T>,
    k: usize,
    mode: CubeMode,
) -> Result<GridFunction<T>> {
    if k < 1 {
        return Err(CoreError::InvalidParameter(
            "iteration count must be at least 1".into(),
        ));
    }
    let mut out = hl_maximal(f, mode);
    for _ in 1..k {
        out = hl_maximal(&out, mode);
    }
    Ok(out)
}
