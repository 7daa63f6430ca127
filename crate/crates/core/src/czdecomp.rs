//! Calderon-Zygmund decomposition at a given height by dyadic stopping
//! time, with verification of the good/bad-piece properties.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::grid::{average_on_cube, integrate, lp_norm, Cube, Grid, GridFunction, MAX_DIM};
use crate::real::Real;
use crate::sums::RegionSums;

/// `f = g + sum_k b_k` at a height: `g` is the good part, each bad piece
/// `b_k` is mean-zero and supported on its selected cube.
#[derive(Debug, Clone)]
pub struct CzDecomposition<T> {
    original: GridFunction<T>,
    height: T,
    good: GridFunction<T>,
    bad: Vec<(Cube, GridFunction<T>)>,
    selected_measure: T,
}

impl<T: Real> CzDecomposition<T> {
    pub fn original(&self) -> &GridFunction<T> {
        &self.original
    }

    pub fn height(&self) -> T {
        self.height
    }

    pub fn good(&self) -> &GridFunction<T> {
        &self.good
    }

    pub fn bad(&self) -> &[(Cube, GridFunction<T>)] {
        &self.bad
    }

    /// Total measure of the selected cubes.
    pub fn selected_measure(&self) -> T {
        self.selected_measure
    }
}

/// Dyadic stopping time: descend from the whole box and select a cube the
/// first time its average of |f| exceeds the height. On each selected cube
/// the good part is the signed average `f_Q` and the bad piece is
/// `(f - f_Q) chi_Q`.
///
/// The finite box must satisfy the root condition `avg |f| <= height`
/// (the surrogate of large-cube averages vanishing on the whole space);
/// otherwise the height is reported as too small for this domain.
pub fn cz_decompose<T: Real>(f: &GridFunction<T>, height: T) -> Result<CzDecomposition<T>> {
    if !(height > T::zero()) || !height.is_finite() {
        return Err(CoreError::InvalidParameter(format!(
            "height must be positive and finite, got {height}"
        )));
    }
    let grid = *f.grid();
    let abs_sums = RegionSums::new(&grid, f.abs().values());
    let sums = RegionSums::new(&grid, f.values());
    let root = Cube::new([0; MAX_DIM], grid.cells_per_side());
    let cell_count = |q: &Cube| T::of_usize(q.cell_count(&grid));
    let global_avg = abs_sums.cube_sum(root) / cell_count(&root);
    if global_avg > height {
        return Err(CoreError::HeightTooSmall {
            height: height.as_f64(),
            global_avg: global_avg.as_f64(),
        });
    }

    let mut selected: Vec<Cube> = Vec::new();
    let mut stack = vec![root];
    while let Some(q) = stack.pop() {
        let avg = abs_sums.cube_sum(q) / cell_count(&q);
        if avg > height {
            selected.push(q);
            continue;
        }
        if q.side > 1 {
            let s = q.side / 2;
            match grid.dim() {
                1 => {
                    for k in 0..2usize {
                        stack.push(Cube::new([q.corner[0] + k * s, 0], s));
                    }
                }
                _ => {
                    for k0 in 0..2usize {
                        for k1 in 0..2usize {
                            stack.push(Cube::new(
                                [q.corner[0] + k0 * s, q.corner[1] + k1 * s],
                                s,
                            ));
                        }
                    }
                }
            }
        }
    }
    selected.sort_unstable_by_key(|q| (q.side, q.corner));

    let mut good_values = f.values().to_vec();
    let mut bad = Vec::with_capacity(selected.len());
    let mut measure = T::zero();
    for q in selected {
        let mean = sums.cube_sum(q) / cell_count(&q);
        let mut piece = vec![T::zero(); grid.cell_count()];
        for lin in q.cells(&grid) {
            piece[lin] = f.values()[lin] - mean;
            good_values[lin] = mean;
        }
        measure += q.volume(&grid);
        bad.push((q, GridFunction::from_values(grid, piece)?));
    }

    Ok(CzDecomposition {
        original: f.clone(),
        height,
        good: GridFunction::from_values(grid, good_values)?,
        bad,
        selected_measure: measure,
    })
}

/// `g + sum_k b_k`; equals the original to machine precision per cell.
pub fn reconstruct<T: Real>(d: &CzDecomposition<T>) -> GridFunction<T> {
    let mut values = d.good.values().to_vec();
    for (_, piece) in &d.bad {
        for (v, p) in values.iter_mut().zip(piece.values()) {
            *v += *p;
        }
    }
    GridFunction::from_values(*d.good.grid(), values).expect("reconstruction well-formed")
}

/// Exponent bookkeeping for a decomposition driven by the endpoint proof:
/// the height is `(lambda gamma)^(n/(mn - alpha))`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CzParams {
    pub m: usize,
    pub n: usize,
    pub alpha: f64,
    pub lambda: f64,
    pub gamma: f64,
}

impl CzParams {
    pub fn height(&self) -> f64 {
        let e = self.n as f64 / (self.m as f64 * self.n as f64 - self.alpha);
        (self.lambda * self.gamma).powf(e)
    }
}

/// Per-property outcome of [`verify_cz_properties`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CzReport {
    /// Max across pieces of values outside the piece's cube (exact support).
    pub support_leak: f64,
    /// Max across pieces of `|int b_k|` (mean-zero defect).
    pub mean_zero_defect: f64,
    /// Max across pieces of `int |b_k| / (height |Q_k|)`.
    pub bad_l1_constant: f64,
    /// `height * sum |Q_k| / ||f||_1` (selected-measure constant).
    pub selected_measure_constant: f64,
    /// `||sum b_k||_1 / ||f||_1`.
    pub bad_total_l1_constant: f64,
    /// Per-exponent constants `||g||_s / (height^(1/s') ||f||_1^(1/s))`
    /// for s in {1, 2, 4, inf}.
    pub good_ls_constants: Vec<(f64, f64)>,
    /// Every selected cube's dyadic parent averages at most the height.
    pub parents_below_height: bool,
    /// `height < avg |f| <= 2^n height` on every selected cube.
    pub selected_avg_in_band: bool,
    /// No two selected cubes share a cell.
    pub disjoint: bool,
    pub piece_count: usize,
    pub pass: bool,
}

/// Check the decomposition properties: exact support, mean-zero pieces,
/// the L1 bounds for bad pieces and selected measure, the good part's
/// L^s bounds, maximality and disjointness of the selected cubes.
///
/// `params` must reproduce the decomposition height.
pub fn verify_cz_properties<T: Real>(
    d: &CzDecomposition<T>,
    params: &CzParams,
) -> Result<CzReport> {
    let expected = params.height();
    let height = d.height.as_f64();
    if (expected - height).abs() > 1e-9 * expected.max(1.0) {
        return Err(CoreError::InvalidParameter(format!(
            "params give height {expected} but the decomposition was built at {height}"
        )));
    }
    let grid = d.good.grid();
    let f = &d.original;
    let f_l1 = integrate(&f.abs()).as_f64();
    let two_n = (1usize << grid.dim()) as f64;

    let mut support_leak = 0.0f64;
    let mut mean_zero = 0.0f64;
    let mut bad_l1 = 0.0f64;
    let mut parents_ok = true;
    let mut band_ok = true;
    let mut occupancy = vec![false; grid.cell_count()];
    let mut disjoint = true;
    for (q, piece) in &d.bad {
        for lin in 0..grid.cell_count() {
            if !q.contains_cell(grid, grid.multi(lin)) && piece.values()[lin] != T::zero() {
                support_leak = support_leak.max(piece.values()[lin].abs().as_f64());
            }
        }
        for lin in q.cells(grid) {
            if occupancy[lin] {
                disjoint = false;
            }
            occupancy[lin] = true;
        }
        mean_zero = mean_zero.max(integrate(piece).abs().as_f64());
        let piece_l1 = integrate(&piece.abs()).as_f64();
        bad_l1 = bad_l1.max(piece_l1 / (height * q.volume(grid).as_f64()));
        // a piece's mass is at most twice the function's mass on its cube
        let mass_on_cube =
            (average_on_cube(&f.abs(), *q)? * q.volume(grid)).as_f64();
        if piece_l1 > 2.0 * mass_on_cube * (1.0 + 1e-12) {
            return Err(CoreError::InvalidParameter(format!(
                "bad piece carries more than twice the local mass: {piece_l1} vs {mass_on_cube}"
            )));
        }
        if let Some(parent) = q.dyadic_parent(grid) {
            let pavg = average_on_cube(&f.abs(), parent)?.as_f64();
            if pavg > height * (1.0 + 1e-12) {
                parents_ok = false;
            }
        }
        let avg = average_on_cube(&f.abs(), *q)?.as_f64();
        if !(avg > height * (1.0 - 1e-12)) || avg > two_n * height * (1.0 + 1e-12) {
            band_ok = false;
        }
    }

    let selected_const = height * d.selected_measure.as_f64() / f_l1.max(f64::MIN_POSITIVE);
    let mut bad_sum = GridFunction::zero(*grid);
    for (_, piece) in &d.bad {
        bad_sum = bad_sum.zip(piece, |a, b| a + b)?;
    }
    let bad_total = integrate(&bad_sum.abs()).as_f64() / f_l1.max(f64::MIN_POSITIVE);

    let mut good_ls = Vec::new();
    for s in [1.0f64, 2.0, 4.0, f64::INFINITY] {
        let norm = lp_norm(&d.good, T::c(s))?.as_f64();
        let s_dual_inv = if s.is_infinite() { 1.0 } else { 1.0 - 1.0 / s };
        let l1_share = if s.is_infinite() { 1.0 } else { f_l1.powf(1.0 / s) };
        let denom = height.powf(s_dual_inv) * l1_share;
        good_ls.push((s, if denom > 0.0 { norm / denom } else { 0.0 }));
    }

    let recon = reconstruct(d);
    let recon_err = recon
        .values()
        .iter()
        .zip(f.values())
        .map(|(a, b)| (*a - *b).abs().as_f64())
        .fold(0.0f64, f64::max);

    let pass = support_leak == 0.0
        && mean_zero <= 1e-10 * f_l1.max(1.0)
        && bad_l1 <= two_n * 2.0 * (1.0 + 1e-12)
        && parents_ok
        && band_ok
        && disjoint
        && recon_err <= 1e-12
        && good_ls.iter().all(|(_, c)| *c <= two_n * (1.0 + 1e-12));

    Ok(CzReport {
        support_leak,
        mean_zero_defect: mean_zero,
        bad_l1_constant: bad_l1,
        selected_measure_constant: selected_const,
        bad_total_l1_constant: bad_total,
        good_ls_constants: good_ls,
        parents_below_height: parents_ok,
        selected_avg_in_band: band_ok,
        disjoint,
        piece_count: d.bad.len(),
        pass,
    })
}

/// Serializable skeleton: height plus selected cubes. Piece samples
/// travel separately in the grid-function format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CzSkeleton {
    pub height: f64,
    pub cubes: Vec<Cube>,
    pub selected_measure: f64,
}

impl<T: Real> CzDecomposition<T> {
    pub fn skeleton(&self) -> CzSkeleton {
        CzSkeleton {
            height: self.height.as_f64(),
            cubes: self.bad.iter().map(|(q, _)| *q).collect(),
            selected_measure: self.selected_measure.as_f64(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand::Rng;

    #[test]
    fn hand_run_dyadic_example() {
        // f = 8 chi_[0, 1/8) on [0,1), height 3: the stopping time selects
        // [0, 1/4) where the average first exceeds 3
        let g = Grid::<f64>::build(1, [0.0, 0.0], 1.0, 64).unwrap();
        let f = GridFunction::indicator(g, |x| x[0] < 0.125).scale(8.0);
        let d = cz_decompose(&f, 3.0).unwrap();
        assert_eq!(d.bad.len(), 1);
        let (q, b) = &d.bad[0];
        assert_eq!(q.side, 16); // 1/4 of 64 cells
        assert_eq!(q.corner[0], 0);
        // g = 4 on [0, 1/4): the signed average of f there
        for lin in 0..16 {
            assert_eq!(d.good.values()[lin], 4.0);
        }
        for lin in 16..64 {
            assert_eq!(d.good.values()[lin], 0.0);
        }
        // b = 4 on [0, 1/8), -4 on [1/8, 1/4)
        for lin in 0..8 {
            assert_eq!(b.values()[lin], 4.0);
        }
        for lin in 8..16 {
            assert_eq!(b.values()[lin], -4.0);
        }
        assert_eq!(reconstruct(&d).values(), f.values());

        // arithmetic from the hand-run example: int|b| = 6/8 + 2/8 = 1,
        // so the bad-piece constant is 1 / (3 * 1/4) = 4/3
        let params = CzParams {
            m: 2,
            n: 1,
            alpha: 0.5,
            lambda: 3.0f64.powf(1.5),
            gamma: 1.0,
        };
        let rep = verify_cz_properties(&d, &params).unwrap();
        assert!((rep.bad_l1_constant - 4.0 / 3.0).abs() < 1e-12);
        assert_eq!(rep.mean_zero_defect, 0.0);
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn no_selection_below_height() {
        let g = Grid::<f64>::build(1, [0.0, 0.0], 1.0, 32).unwrap();
        let f = GridFunction::from_fn(g, |x| 0.5 + 0.3 * (9.0 * x[0]).sin());
        let d = cz_decompose(&f, 1.0).unwrap();
        assert!(d.bad.is_empty());
        assert_eq!(d.good.values(), f.values());
        assert_eq!(d.selected_measure(), 0.0);

        let z = GridFunction::zero(g);
        let dz = cz_decompose(&z, 0.5).unwrap();
        assert!(dz.bad.is_empty());
        assert!(dz.good.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_small_height_and_bad_height() {
        let g = Grid::<f64>::build(1, [0.0, 0.0], 1.0, 32).unwrap();
        let f = GridFunction::constant(g, 2.0);
        assert!(matches!(
            cz_decompose(&f, 1.0),
            Err(CoreError::HeightTooSmall { .. })
        ));
        assert!(cz_decompose(&f, 0.0).is_err());
    }

    #[test]
    fn random_functions_reconstruct_and_verify() {
        let g = Grid::<f64>::build(1, [0.0, 0.0], 2.0, 256).unwrap();
        for seed in 0..20u64 {
            let mut rng = stream_rng(seed, 7);
            let f = GridFunction::from_values(
                g,
                (0..g.cell_count())
                    .map(|_| rng.gen::<f64>().powi(3) * 4.0)
                    .collect(),
            )
            .unwrap();
            let avg = integrate(&f.abs()) / 2.0;
            for mult in [1.5, 3.0, 9.0] {
                let height = avg * mult;
                let d = cz_decompose(&f, height).unwrap();
                let recon = reconstruct(&d);
                for (a, b) in recon.values().iter().zip(f.values()) {
                    assert!((a - b).abs() <= 1e-12);
                }
                // ||g||_inf <= 2^n height
                assert!(lp_norm(&d.good, f64::INFINITY).unwrap() <= 2.0 * height * (1.0 + 1e-12));
                // ||g||_1 <= ||f||_1
                assert!(
                    lp_norm(&d.good, 1.0).unwrap() <= lp_norm(&f, 1.0).unwrap() * (1.0 + 1e-12)
                );
                let params = CzParams {
                    m: 1,
                    n: 1,
                    alpha: 0.5,
                    lambda: height.powf(0.5),
                    gamma: 1.0,
                };
                let rep = verify_cz_properties(&d, &params).unwrap();
                assert!(rep.pass, "seed {seed} mult {mult}: {rep:?}");
            }
        }
    }

    #[test]
    fn two_dimensional_decomposition() {
        let g = Grid::<f64>::build(2, [0.0, 0.0], 1.0, 16).unwrap();
        let f = GridFunction::from_fn(g, |x| {
            if x[0] < 0.25 && x[1] < 0.25 {
                10.0
            } else {
                0.1
            }
        });
        let avg = integrate(&f.abs());
        let d = cz_decompose(&f, avg * 2.0).unwrap();
        assert!(!d.bad.is_empty());
        let recon = reconstruct(&d);
        for (a, b) in recon.values().iter().zip(f.values()) {
            assert!((a - b).abs() <= 1e-12);
        }
        let params = CzParams {
            m: 1,
            n: 2,
            alpha: 1.0,
            lambda: (avg * 2.0).powf(0.5),
            gamma: 1.0,
        };
        let rep = verify_cz_properties(&d, &params).unwrap();
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn verify_rejects_mismatched_height() {
        let g = Grid::<f64>::build(1, [0.0, 0.0], 1.0, 32).unwrap();
        let f = GridFunction::indicator(g, |x| x[0] < 0.25);
        let d = cz_decompose(&f, 0.5).unwrap();
        let params = CzParams {
            m: 1,
            n: 1,
            alpha: 0.5,
            lambda: 10.0,
            gamma: 1.0,
        };
        assert!(verify_cz_properties(&d, &params).is_err());
    }
}
