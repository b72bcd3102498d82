//! Dense solves backed by LAPACK: LU with partial pivoting for square systems,
//! Householder QR for overdetermined ones. Both report the relative residual and
//! a 1-norm condition estimate.

use lax::layout::MatrixLayout;
use lax::{Lapack, NormType, Transpose};
use rayon::prelude::*;
use std::sync::OnceLock;

use crate::{Error, Result};

/// Pivots with magnitude below this fraction of `max |A_ij|` are treated as zero.
pub const PIVOT_TOLERANCE: f64 = 1e-14;

/// `A α = b` with `A` stored column-major, `rows ≥ cols`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSystem {
    rows: usize,
    cols: usize,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl DenseSystem {
    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        if cols == 0 || rows < cols {
            return Err(Error::invalid(format!(
                "system must have rows >= cols > 0, got {rows}x{cols}"
            )));
        }
        Ok(Self {
            rows,
            cols,
            a: vec![0.0; rows * cols],
            b: vec![0.0; rows],
        })
    }

    /// Build from an entry function and a right-hand side.
    pub fn from_fn(
        rows: usize,
        cols: usize,
        mut entry: impl FnMut(usize, usize) -> f64,
        rhs: Vec<f64>,
    ) -> Result<Self> {
        let mut s = Self::zeros(rows, cols)?;
        if rhs.len() != rows {
            return Err(Error::invalid(format!(
                "rhs has {} entries for {rows} rows",
                rhs.len()
            )));
        }
        for j in 0..cols {
            for i in 0..rows {
                s.a[j * rows + i] = entry(i, j);
            }
        }
        s.b = rhs;
        Ok(s)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[j * self.rows + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[j * self.rows + i] = v;
    }

    /// Column `j` as a contiguous slice.
    pub fn column_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.a[j * self.rows..(j + 1) * self.rows]
    }

    /// Overwrite every entry with `entry(i, j)`, columns in parallel.
    pub fn par_fill(&mut self, entry: impl Fn(usize, usize) -> f64 + Sync) {
        let rows = self.rows;
        self.a
            .par_chunks_mut(rows)
            .enumerate()
            .for_each(|(j, col)| {
                for (i, v) in col.iter_mut().enumerate() {
                    *v = entry(i, j);
                }
            });
    }

    pub fn rhs(&self) -> &[f64] {
        &self.b
    }

    pub fn rhs_mut(&mut self) -> &mut [f64] {
        &mut self.b
    }

    /// `‖A x − b‖₂ / ‖b‖₂`, or the absolute residual when `b = 0`.
    pub fn relative_residual(&self, x: &[f64]) -> f64 {
        let mut r: Vec<f64> = self.b.iter().map(|v| -v).collect();
        for (j, &xj) in x.iter().enumerate() {
            let col = &self.a[j * self.rows..(j + 1) * self.rows];
            for (ri, aij) in r.iter_mut().zip(col) {
                *ri += aij * xj;
            }
        }
        let rn = norm2(&r);
        let bn = norm2(&self.b);
        if bn > 0.0 {
            rn / bn
        } else {
            rn
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SolveOptions {
    /// Tikhonov ridge `τ ≥ 0`. Added to the diagonal of square systems; least-squares
    /// systems are augmented with `√τ I` rows.
    pub ridge: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub coefficients: Vec<f64>,
    /// `‖A α − b‖₂ / ‖b‖₂` against the unregularized system.
    pub residual_norm: f64,
    /// 1-norm condition estimate of the factored matrix (`∞` if it could not be estimated).
    pub condition_estimate: f64,
}

pub fn solve(system: &DenseSystem) -> Result<Solution> {
    solve_with(system, SolveOptions::default())
}

pub fn solve_with(system: &DenseSystem, opts: SolveOptions) -> Result<Solution> {
    backend_check()?;
    if !(opts.ridge >= 0.0 && opts.ridge.is_finite()) {
        return Err(Error::invalid(format!(
            "ridge must be finite and >= 0, got {}",
            opts.ridge
        )));
    }
    if system.a.iter().chain(&system.b).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let a_max = system.a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let threshold = PIVOT_TOLERANCE * a_max;
    let (coefficients, condition_estimate) = if system.rows == system.cols {
        solve_square(system, opts.ridge, threshold)?
    } else {
        solve_least_squares(system, opts.ridge, threshold)?
    };
    if coefficients.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let residual_norm = system.relative_residual(&coefficients);
    Ok(Solution {
        coefficients,
        residual_norm,
        condition_estimate,
    })
}

static BACKEND_OK: OnceLock<std::result::Result<(), String>> = OnceLock::new();

/// Solves a fixed 64-unknown square and least-squares problem once per process.
/// Some OpenBLAS builds pick kernels for the host CPU that return wrong factors;
/// failing loudly beats silently wrong reconstructions.
pub fn backend_check() -> Result<()> {
    BACKEND_OK
        .get_or_init(|| {
            let n = 64;
            let exact: Vec<f64> = (0..n).map(|i| 1.0 + (i % 7) as f64 * 0.25).collect();
            let entry = |i: usize, j: usize| {
                if i == j {
                    8.0
                } else {
                    (((i * 7 + j * 3) % 11) as f64 - 5.0) * 0.05
                }
            };
            for rows in [n, n + n / 2] {
                let b = (0..rows)
                    .map(|i| (0..n).map(|j| entry(i, j) * exact[j]).sum())
                    .collect();
                let sys = DenseSystem::from_fn(rows, n, entry, b).map_err(|e| e.to_string())?;
                let a_max = sys.a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let x = if rows == n {
                    solve_square(&sys, 0.0, PIVOT_TOLERANCE * a_max)
                } else {
                    solve_least_squares(&sys, 0.0, PIVOT_TOLERANCE * a_max)
                }
                .map_err(|e| e.to_string())?
                .0;
                let err = x
                    .iter()
                    .zip(&exact)
                    .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                if err.is_nan() || err >= 1e-10 {
                    return Err(format!("{rows}x{n} solve off by {err:e}"));
                }
            }
            Ok(())
        })
        .clone()
        .map_err(Error::Backend)
}

fn check_diagonal(factor: &[f64], lda: usize, n: usize, threshold: f64) -> Result<()> {
    for k in 0..n {
        let pivot = factor[k * lda + k];
        if pivot.is_nan() || pivot.abs() < threshold || pivot == 0.0 {
            return Err(Error::SingularMatrix {
                column: k,
                pivot: pivot.abs(),
                threshold,
            });
        }
    }
    Ok(())
}

fn solve_square(system: &DenseSystem, ridge: f64, threshold: f64) -> Result<(Vec<f64>, f64)> {
    let n = system.cols;
    let layout = MatrixLayout::F {
        col: n as i32,
        lda: n as i32,
    };
    let mut lu = system.a.clone();
    if ridge > 0.0 {
        for k in 0..n {
            lu[k * n + k] += ridge;
        }
    }
    let anorm = f64::opnorm(NormType::One, layout, &lu);
    let pivots = match f64::lu(layout, &mut lu) {
        Ok(p) => p,
        Err(lax::error::Error::LapackComputationalFailure { return_code }) => {
            return Err(Error::SingularMatrix {
                column: (return_code - 1) as usize,
                pivot: 0.0,
                threshold,
            })
        }
        Err(e) => return Err(Error::invalid(format!("LAPACK: {e}"))),
    };
    check_diagonal(&lu, n, n, threshold)?;
    let mut x = system.b.clone();
    f64::solve(layout, Transpose::No, &lu, &pivots, &mut x)
        .map_err(|e| Error::invalid(format!("LAPACK: {e}")))?;
    let rcond = f64::rcond(layout, &lu, anorm).unwrap_or(0.0);
    let cond = if rcond > 0.0 {
        1.0 / rcond
    } else {
        f64::INFINITY
    };
    Ok((x, cond))
}

fn solve_least_squares(
    system: &DenseSystem,
    ridge: f64,
    threshold: f64,
) -> Result<(Vec<f64>, f64)> {
    let n = system.cols;
    let (m, mut qr, mut rhs) = if ridge > 0.0 {
        let m = system.rows + n;
        let mut a = vec![0.0; m * n];
        let s = ridge.sqrt();
        for j in 0..n {
            a[j * m..j * m + system.rows]
                .copy_from_slice(&system.a[j * system.rows..(j + 1) * system.rows]);
            a[j * m + system.rows + j] = s;
        }
        let mut b = system.b.clone();
        b.resize(m, 0.0);
        (m, a, b)
    } else {
        (system.rows, system.a.clone(), system.b.clone())
    };
    let layout = MatrixLayout::F {
        col: n as i32,
        lda: m as i32,
    };
    let tau =
        f64::householder(layout, &mut qr).map_err(|e| Error::invalid(format!("LAPACK: {e}")))?;
    check_diagonal(&qr, m, n, threshold)?;

    // rhs ← Qᵀ rhs, one reflector H_k = I − τ_k v vᵀ at a time (v_k = 1 implicit).
    for k in 0..n {
        let col = &qr[k * m..(k + 1) * m];
        let mut w = rhs[k];
        for i in k + 1..m {
            w += col[i] * rhs[i];
        }
        w *= tau[k];
        rhs[k] -= w;
        for i in k + 1..m {
            rhs[i] -= w * col[i];
        }
    }
    let r = UpperTriangle {
        data: &qr,
        lda: m,
        n,
    };
    let mut x = rhs[..n].to_vec();
    r.solve_in_place(&mut x);
    let cond = r.one_norm() * r.inverse_one_norm_estimate();
    Ok((
        x,
        if cond.is_finite() {
            cond
        } else {
            f64::INFINITY
        },
    ))
}

/// View of the upper triangle of a column-major factor.
struct UpperTriangle<'a> {
    data: &'a [f64],
    lda: usize,
    n: usize,
}

impl UpperTriangle<'_> {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.lda + i]
    }

    /// `R x = y`, column-oriented back substitution.
    fn solve_in_place(&self, y: &mut [f64]) {
        for j in (0..self.n).rev() {
            y[j] /= self.at(j, j);
            let yj = y[j];
            let col = &self.data[j * self.lda..j * self.lda + j];
            for (yi, rij) in y[..j].iter_mut().zip(col) {
                *yi -= rij * yj;
            }
        }
    }

    /// `Rᵀ x = y`, forward substitution with dot products down each column.
    fn solve_transposed_in_place(&self, y: &mut [f64]) {
        for j in 0..self.n {
            let col = &self.data[j * self.lda..j * self.lda + j];
            let dot: f64 = col.iter().zip(&y[..j]).map(|(a, b)| a * b).sum();
            y[j] = (y[j] - dot) / self.at(j, j);
        }
    }

    fn one_norm(&self) -> f64 {
        (0..self.n)
            .map(|j| (0..=j).map(|i| self.at(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Hager's estimator for `‖R⁻¹‖₁`.
    fn inverse_one_norm_estimate(&self) -> f64 {
        let n = self.n;
        let mut x = vec![1.0 / n as f64; n];
        let mut estimate = 0.0;
        for _ in 0..5 {
            let mut y = x.clone();
            self.solve_in_place(&mut y);
            estimate = y.iter().map(|v| v.abs()).sum();
            let mut z: Vec<f64> = y
                .iter()
                .map(|v| if *v >= 0.0 { 1.0 } else { -1.0 })
                .collect();
            self.solve_transposed_in_place(&mut z);
            let ztx: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
            let (jmax, zmax) = z.iter().enumerate().fold((0, 0.0f64), |(bj, bv), (j, v)| {
                if v.abs() > bv {
                    (j, v.abs())
                } else {
                    (bj, bv)
                }
            });
            if zmax <= ztx {
                break;
            }
            x.iter_mut().for_each(|v| *v = 0.0);
            x[jmax] = 1.0;
        }
        estimate
    }
}

fn norm2(v: &[f64]) -> f64 {
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    scale
        * v.iter()
            .map(|x| (x / scale) * (x / scale))
            .sum::<f64>()
            .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let m = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
        m.qr().q()
    }

    fn to_system(a: &DMatrix<f64>, b: Vec<f64>) -> DenseSystem {
        DenseSystem::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)], b).unwrap()
    }

    #[test]
    fn identity_and_diagonal() {
        let id = DenseSystem::from_fn(4, 4, |i, j| (i == j) as u8 as f64, vec![1.0; 4]).unwrap();
        let s = solve(&id).unwrap();
        assert_eq!(s.coefficients, vec![1.0; 4]);
        assert_eq!(s.residual_norm, 0.0);
        assert_eq!(s.condition_estimate, 1.0);

        let d = DenseSystem::from_fn(
            2,
            2,
            |i, j| if i == j { [2.0, 4.0][i] } else { 0.0 },
            vec![2.0, 8.0],
        )
        .unwrap();
        assert_eq!(solve(&d).unwrap().coefficients, vec![1.0, 2.0]);
    }

    #[test]
    fn random_well_conditioned_square() {
        // A = U diag(s) Vᵀ with singular values in [1, 10].
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 50;
        let u = random_orthogonal(n, &mut rng);
        let v = random_orthogonal(n, &mut rng);
        let s = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |i, _| {
            1.0 + 9.0 * i as f64 / (n - 1) as f64
        }));
        let a = &u * s * v.transpose();
        let b: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let sol = solve(&to_system(&a, b.clone())).unwrap();
        assert!(sol.residual_norm <= 1e-10);
        // 1-norm condition is within a factor n of the 2-norm value (10).
        assert!(
            sol.condition_estimate >= 10.0 / n as f64 && sol.condition_estimate <= 10.0 * n as f64
        );
        let x = nalgebra::DVector::from_vec(sol.coefficients);
        let r = &a * &x - nalgebra::DVector::from_vec(b.clone());
        let independent = r.norm() / nalgebra::DVector::from_vec(b).norm();
        assert!((independent - sol.residual_norm).abs() <= 1e-14);
    }

    #[test]
    fn least_squares_matches_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (m, n) = (40, 12);
        let a = DMatrix::from_fn(m, n, |_, _| rng.random::<f64>() - 0.5);
        let b: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
        let sol = solve(&to_system(&a, b.clone())).unwrap();
        let bv = nalgebra::DVector::from_vec(b);
        let ata = a.transpose() * &a;
        let x_ref = ata.lu().solve(&(a.transpose() * &bv)).unwrap();
        for (x, r) in sol.coefficients.iter().zip(x_ref.iter()) {
            assert!((x - r).abs() < 1e-10, "{x} vs {r}");
        }
        // Residual is orthogonal to the column space.
        let res = &a * nalgebra::DVector::from_vec(sol.coefficients.clone()) - &bv;
        assert!((a.transpose() * res).amax() < 1e-12);
        let svd = a.clone().svd(false, false);
        let cond2 = svd.singular_values.max() / svd.singular_values.min();
        assert!(
            sol.condition_estimate > cond2 / n as f64 && sol.condition_estimate < cond2 * n as f64
        );
    }

    #[test]
    fn consistent_overdetermined_system_has_zero_residual() {
        let a = DMatrix::from_fn(6, 3, |i, j| ((i + 1) as f64).powi(j as i32));
        let x = nalgebra::DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let b = (&a * &x).as_slice().to_vec();
        let sol = solve(&to_system(&a, b)).unwrap();
        assert!(sol.residual_norm < 1e-14);
        for (c, e) in sol.coefficients.iter().zip(x.iter()) {
            assert!((c - e).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_and_non_finite() {
        let s = DenseSystem::from_fn(3, 3, |i, j| (i + j) as f64, vec![1.0; 3]).unwrap();
        assert!(matches!(solve(&s), Err(Error::SingularMatrix { .. })));
        let z = DenseSystem::from_fn(
            2,
            2,
            |i, j| if i == 1 && j == 1 { 0.0 } else { 1.0 },
            vec![1.0; 2],
        )
        .unwrap();
        assert!(solve(&z).is_ok());
        let rank_deficient =
            DenseSystem::from_fn(4, 2, |i, _| i as f64 + 1.0, vec![1.0; 4]).unwrap();
        assert!(matches!(
            solve(&rank_deficient),
            Err(Error::SingularMatrix { .. })
        ));
        let nan = DenseSystem::from_fn(2, 2, |_, _| f64::NAN, vec![1.0; 2]).unwrap();
        assert!(matches!(solve(&nan), Err(Error::NonFinite)));
        assert!(DenseSystem::zeros(2, 3).is_err());
    }

    #[test]
    fn ridge_regularizes_singular_system() {
        let s = DenseSystem::from_fn(3, 3, |_, _| 1.0, vec![1.0; 3]).unwrap();
        assert!(solve(&s).is_err());
        let sol = solve_with(&s, SolveOptions { ridge: 1e-3 }).unwrap();
        // (J + τI)x = 1 → x = 1/(3 + τ) each.
        for c in &sol.coefficients {
            assert!((c - 1.0 / 3.001).abs() < 1e-12);
        }
        assert!(solve_with(&s, SolveOptions { ridge: -1.0 }).is_err());
        let ls = DenseSystem::from_fn(4, 2, |_, _| 1.0, vec![1.0; 4]).unwrap();
        let sol = solve_with(&ls, SolveOptions { ridge: 1e-6 }).unwrap();
        assert!((sol.coefficients[0] - sol.coefficients[1]).abs() < 1e-9);
        assert!(sol.residual_norm < 1e-6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn solve_is_bit_deterministic(seed in 0u64..1000, n in 2usize..30) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let vals: Vec<f64> = (0..n * n).map(|_| rng.random::<f64>()).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let s = DenseSystem::from_fn(n, n, |i, j| vals[i * n + j] + if i == j { n as f64 } else { 0.0 }, b).unwrap();
            let x1 = solve(&s).unwrap();
            let x2 = solve(&s).unwrap();
            prop_assert_eq!(x1, x2);
        }

        #[test]
        fn reported_residual_matches_recomputation(seed in 0u64..1000, m in 3usize..25, extra in 0usize..10) {
            let n = m;
            let rows = m + extra;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = DMatrix::from_fn(rows, n, |i, j| rng.random::<f64>() - 0.5 + if i == j { 2.0 } else { 0.0 });
            let b: Vec<f64> = (0..rows).map(|_| rng.random::<f64>() - 0.5).collect();
            let sol = solve(&to_system(&a, b.clone())).unwrap();
            let bv = nalgebra::DVector::from_vec(b);
            let r = &a * nalgebra::DVector::from_vec(sol.coefficients.clone()) - &bv;
            prop_assert!((r.norm() / bv.norm() - sol.residual_norm).abs() <= 1e-14);
        }
    }
}
