//! Non-negative matrix factorization kernels.
//!
//! Batch NMF uses the Lee–Seung multiplicative updates for the squared
//! Frobenius objective `||V - WH||²`. The online variant folds a new batch
//! `U` into an existing factorization by refitting the stacked matrix
//! `[W_t·H_t; U]`, so the raw history never has to be kept around.

use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A non-negative documents × terms matrix.
///
/// Zero rows are allowed so that an empty batch can still be carried
/// through a stream; every factorization entry point rejects them.
#[derive(Debug, Clone, PartialEq)]
pub struct TermDocMatrix(Array2<f64>);

impl TermDocMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.ncols() == 0 {
            return Err(Error::Dimension(
                "term matrix needs at least one column".into(),
            ));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite entry {bad} in term matrix"
            )));
        }
        if let Some(neg) = values.iter().find(|&&v| v < 0.0) {
            return Err(Error::Parameter(format!(
                "negative entry {neg} in term matrix"
            )));
        }
        Ok(Self(values))
    }

    pub fn empty(cols: usize) -> Self {
        Self(Array2::zeros((0, cols.max(1))))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.0.nrows() == 0
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }

    /// Stacks `other` below `self`.
    pub fn vstack(&self, other: &TermDocMatrix) -> Result<TermDocMatrix> {
        if self.cols() != other.cols() {
            return Err(Error::Dimension(format!(
                "cannot stack {} columns onto {}",
                other.cols(),
                self.cols()
            )));
        }
        let stacked =
            concatenate(Axis(0), &[self.0.view(), other.0.view()]).expect("column counts checked");
        Ok(TermDocMatrix(stacked))
    }
}

/// Coefficient matrix `w` (m × k) and topic matrix `h` (k × n).
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPair {
    pub w: Array2<f64>,
    pub h: Array2<f64>,
}

impl FactorPair {
    pub fn new(w: Array2<f64>, h: Array2<f64>) -> Result<Self> {
        if w.ncols() != h.nrows() {
            return Err(Error::Dimension(format!(
                "W has {} columns but H has {} rows",
                w.ncols(),
                h.nrows()
            )));
        }
        if w.ncols() == 0 {
            return Err(Error::Parameter("factor rank must be at least 1".into()));
        }
        if w.iter().chain(h.iter()).any(|&v| !v.is_finite() || v < 0.0) {
            return Err(Error::Parameter(
                "factor entries must be finite and non-negative".into(),
            ));
        }
        Ok(Self { w, h })
    }

    pub fn k(&self) -> usize {
        self.h.nrows()
    }

    pub fn reconstruct(&self) -> Array2<f64> {
        self.w.dot(&self.h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Upper bound on solver iterations per call.
    pub max_iters: usize,
    /// Relative objective change that counts as converged.
    pub tol: f64,
    pub seed: u64,
    /// Floor applied to factor entries before any division.
    pub epsilon: f64,
    /// First trial step of the backtracking line search in the joint solver.
    pub initial_step: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iters: 100,
            tol: 1e-5,
            seed: 42,
            epsilon: 1e-12,
            initial_step: 1.0,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::Parameter("max_iters must be at least 1".into()));
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return Err(Error::Parameter(format!(
                "tol must be >= 0, got {}",
                self.tol
            )));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::Parameter(format!(
                "epsilon must be > 0, got {}",
                self.epsilon
            )));
        }
        if self.initial_step.is_nan() || self.initial_step <= 0.0 {
            return Err(Error::Parameter(format!(
                "initial_step must be > 0, got {}",
                self.initial_step
            )));
        }
        Ok(())
    }

    /// Relative-change stopping rule shared by the NMF and joint solvers.
    pub(crate) fn converged(&self, previous: f64, current: f64) -> bool {
        (previous - current).abs() / previous.abs().max(self.epsilon) < self.tol
    }
}

/// Squared Frobenius norm of `a - b`.
pub(crate) fn frobenius_sq_diff(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Matrix with entries uniform on (0, 1].
pub(crate) fn uniform_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || 1.0 - rng.random::<f64>())
}

fn check_factor_shapes(v: &TermDocMatrix, f: &FactorPair) -> Result<()> {
    if f.w.nrows() != v.rows() || f.h.ncols() != v.cols() || f.w.ncols() != f.h.nrows() {
        return Err(Error::Dimension(format!(
            "V is {}x{} but W is {}x{} and H is {}x{}",
            v.rows(),
            v.cols(),
            f.w.nrows(),
            f.w.ncols(),
            f.h.nrows(),
            f.h.ncols()
        )));
    }
    Ok(())
}

/// `||V - WH||²_F`, the quantity the multiplicative updates descend.
pub fn objective(v: &TermDocMatrix, factors: &FactorPair) -> Result<f64> {
    check_factor_shapes(v, factors)?;
    Ok(frobenius_sq_diff(v.view(), factors.reconstruct().view()))
}

/// `||V - WH||_F`, the reported reconstruction error (not squared).
pub fn reconstruction_error(v: &TermDocMatrix, factors: &FactorPair) -> Result<f64> {
    objective(v, factors).map(f64::sqrt)
}

/// One Lee–Seung sweep: `H` first, then `W` against the new `H`.
///
/// Entries are floored at `epsilon` on the way in and on the way out, so
/// the result is strictly positive whatever `V` holds.
pub fn multiplicative_update_step(
    v: &TermDocMatrix,
    factors: &FactorPair,
    epsilon: f64,
) -> Result<FactorPair> {
    check_factor_shapes(v, factors)?;
    let mut w = factors.w.mapv(|x| x.max(epsilon));
    let mut h = factors.h.mapv(|x| x.max(epsilon));
    mu_sweep(v.view(), &mut w, &mut h, epsilon);
    Ok(FactorPair { w, h })
}

fn mu_sweep(v: ArrayView2<'_, f64>, w: &mut Array2<f64>, h: &mut Array2<f64>, epsilon: f64) {
    mu_update_h(v, w, h, epsilon);
    mu_update_w(v, w, h, epsilon);
}

fn mu_update_h(v: ArrayView2<'_, f64>, w: &Array2<f64>, h: &mut Array2<f64>, epsilon: f64) {
    let numer = w.t().dot(&v);
    let denom = w.t().dot(w).dot(&*h);
    ndarray::Zip::from(&mut *h)
        .and(&numer)
        .and(&denom)
        .for_each(|x, &n, &d| *x = (*x * n / d).max(epsilon));
}

fn mu_update_w(v: ArrayView2<'_, f64>, w: &mut Array2<f64>, h: &Array2<f64>, epsilon: f64) {
    let numer = v.dot(&h.t());
    let denom = w.dot(&h.dot(&h.t()));
    ndarray::Zip::from(&mut *w)
        .and(&numer)
        .and(&denom)
        .for_each(|x, &n, &d| *x = (*x * n / d).max(epsilon));
}

/// Seeded starting point for a rank-`k` fit of `v`.
///
/// Draws are uniform on (0, 1] and then rescaled by one common factor so
/// the mean of `WH` matches the mean of `V`.
pub(crate) fn random_init(v: ArrayView2<'_, f64>, k: usize, seed: u64, epsilon: f64) -> FactorPair {
    let mut rng = seeded_rng(seed);
    let mut w = uniform_matrix(v.nrows(), k, &mut rng);
    let mut h = uniform_matrix(k, v.ncols(), &mut rng);
    let target = v.mean().unwrap_or(0.0);
    let current = w.dot(&h).mean().unwrap_or(1.0);
    let scale = (target / current).sqrt();
    w.mapv_inplace(|x| (x * scale).max(epsilon));
    h.mapv_inplace(|x| (x * scale).max(epsilon));
    FactorPair { w, h }
}

fn check_rank(v: &TermDocMatrix, k: usize) -> Result<()> {
    if v.is_empty() {
        return Err(Error::Parameter(
            "cannot factorize a matrix with no rows".into(),
        ));
    }
    let limit = v.rows().min(v.cols());
    if k < 1 || k > limit {
        return Err(Error::Parameter(format!(
            "rank k = {k} outside 1..={limit} for a {}x{} matrix",
            v.rows(),
            v.cols()
        )));
    }
    Ok(())
}

/// Runs multiplicative updates from `init` until the relative objective
/// change drops below `opts.tol` or `opts.max_iters` sweeps have run.
pub fn nmf_from(v: &TermDocMatrix, init: FactorPair, opts: &SolverOptions) -> Result<FactorPair> {
    opts.validate()?;
    check_factor_shapes(v, &init)?;
    let eps = opts.epsilon;
    let mut w = init.w.mapv(|x| x.max(eps));
    let mut h = init.h.mapv(|x| x.max(eps));
    let mut previous = frobenius_sq_diff(v.view(), w.dot(&h).view());
    for _ in 0..opts.max_iters {
        mu_sweep(v.view(), &mut w, &mut h, eps);
        let current = frobenius_sq_diff(v.view(), w.dot(&h).view());
        if opts.converged(previous, current) {
            break;
        }
        previous = current;
    }
    Ok(FactorPair { w, h })
}

/// Rank-`k` NMF of `v`, deterministic in `opts.seed`.
pub fn nmf_factorize(v: &TermDocMatrix, k: usize, opts: &SolverOptions) -> Result<FactorPair> {
    check_rank(v, k)?;
    opts.validate()?;
    let init = random_init(v.view(), k, opts.seed, opts.epsilon);
    nmf_from(v, init, opts)
}

/// Best of `restarts` independent runs, seeded `opts.seed`, `opts.seed + 1`, ...
///
/// Ties keep the earliest seed.
pub fn nmf_factorize_restarts(
    v: &TermDocMatrix,
    k: usize,
    opts: &SolverOptions,
    restarts: usize,
) -> Result<FactorPair> {
    if restarts == 0 {
        return Err(Error::Parameter("restarts must be at least 1".into()));
    }
    let mut best: Option<(f64, FactorPair)> = None;
    for r in 0..restarts as u64 {
        let run_opts = SolverOptions {
            seed: opts.seed.wrapping_add(r),
            ..*opts
        };
        let fit = nmf_factorize(v, k, &run_opts)?;
        let obj = objective(v, &fit)?;
        if best.as_ref().is_none_or(|(b, _)| obj < *b) {
            best = Some((obj, fit));
        }
    }
    Ok(best.expect("at least one restart").1)
}

/// Folds a new batch `u` into the factorization `prev` of the history.
///
/// The history enters only through its compressed form `W_t·H_t`; the
/// result factors `[W_t·H_t; U]`, with `H` warm-started from `prev.h` and
/// the history rows of `W` warm-started from `prev.w`.
pub fn onmf_update(
    prev: &FactorPair,
    u: &TermDocMatrix,
    opts: &SolverOptions,
) -> Result<FactorPair> {
    if u.is_empty() {
        return Ok(prev.clone());
    }
    if u.cols() != prev.h.ncols() {
        return Err(Error::Dimension(format!(
            "new batch has {} columns, topics have {}",
            u.cols(),
            prev.h.ncols()
        )));
    }
    if prev.w.ncols() != prev.h.nrows() {
        return Err(Error::Dimension(
            "previous factors have inconsistent rank".into(),
        ));
    }
    opts.validate()?;
    let k = prev.k();
    let eps = opts.epsilon;

    let history = TermDocMatrix(prev.reconstruct());
    let target = history.vstack(u)?;

    // Coefficients for the new rows: random start, then a few H-fixed
    // sweeps so the joint refit does not begin far from the batch.
    let mut rng = seeded_rng(opts.seed);
    let mut w_new = uniform_matrix(u.rows(), k, &mut rng);
    let h0 = prev.h.mapv(|x| x.max(eps));
    let scale = u.as_array().mean().unwrap_or(0.0) / w_new.dot(&h0).mean().unwrap_or(1.0);
    w_new.mapv_inplace(|x| (x * scale).max(eps));
    for _ in 0..10 {
        mu_update_w(u.view(), &mut w_new, &h0, eps);
    }

    let w0 = concatenate(Axis(0), &[prev.w.view(), w_new.view()]).expect("rank checked");
    nmf_from(&target, FactorPair { w: w0, h: h0 }, opts)
}

/// Rows of `w` that belong to the last `rows` documents of a stacked fit.
pub(crate) fn tail_rows(w: &Array2<f64>, rows: usize) -> Array2<f64> {
    let start = w.nrows().saturating_sub(rows);
    w.slice(s![start.., ..]).to_owned()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    /// Direct triple-loop evaluation, independent of `ndarray::dot`.
    fn naive_objective(v: &Array2<f64>, w: &Array2<f64>, h: &Array2<f64>) -> f64 {
        let mut total = 0.0;
        for i in 0..v.nrows() {
            for j in 0..v.ncols() {
                let mut p = 0.0;
                for l in 0..w.ncols() {
                    p += w[[i, l]] * h[[l, j]];
                }
                total += (v[[i, j]] - p).powi(2);
            }
        }
        total
    }

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> TermDocMatrix {
        let mut rng = seeded_rng(seed);
        TermDocMatrix::new(uniform_matrix(rows, cols, &mut rng)).unwrap()
    }

    #[test]
    fn rejects_negative_and_non_finite_entries() {
        assert!(matches!(
            TermDocMatrix::new(array![[1.0, -0.5]]),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(
            TermDocMatrix::new(array![[f64::NAN, 1.0]]),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn exact_factorization_is_a_fixed_point() {
        let w = array![[1.0, 2.0], [0.5, 1.0], [3.0, 0.2]];
        let h = array![[1.0, 0.0, 2.0], [0.3, 1.0, 0.5]];
        let v = TermDocMatrix::new(w.dot(&h)).unwrap();
        let f = FactorPair::new(w, h).unwrap();
        let next = multiplicative_update_step(&v, &f, 1e-12).unwrap();
        assert!(objective(&v, &next).unwrap() < 1e-20);
        assert!(frobenius_sq_diff(next.reconstruct().view(), v.view()) < 1e-20);
    }

    #[test]
    fn one_step_does_not_increase_objective() {
        let v = random_matrix(10, 8, 3);
        let f = random_init(v.view(), 3, 11, 1e-12);
        let before = naive_objective(v.as_array(), &f.w, &f.h);
        let next = multiplicative_update_step(&v, &f, 1e-12).unwrap();
        let after = naive_objective(v.as_array(), &next.w, &next.h);
        assert!(after <= before, "{after} > {before}");
    }

    #[test]
    fn zero_matrix_drives_factors_to_floor() {
        let v = TermDocMatrix::new(Array2::zeros((4, 3))).unwrap();
        let mut rng = seeded_rng(1);
        let mut f = FactorPair::new(
            uniform_matrix(4, 2, &mut rng),
            uniform_matrix(2, 3, &mut rng),
        )
        .unwrap();
        for _ in 0..5 {
            f = multiplicative_update_step(&v, &f, 1e-12).unwrap();
        }
        assert!(f.w.iter().chain(f.h.iter()).all(|&x| x >= 1e-12));
        assert!(objective(&v, &f).unwrap() < 1e-20);
    }

    #[test]
    fn mismatched_shapes_are_rejected() {
        let v = random_matrix(4, 3, 0);
        let f = FactorPair::new(Array2::ones((5, 2)), Array2::ones((2, 3))).unwrap();
        assert!(matches!(
            multiplicative_update_step(&v, &f, 1e-12),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            reconstruction_error(&v, &f),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn rank_one_recovery() {
        let v = TermDocMatrix::new(array![[3.0, 4.0], [6.0, 8.0]]).unwrap();
        let f = nmf_factorize(&v, 1, &SolverOptions::default()).unwrap();
        let rel = reconstruction_error(&v, &f).unwrap()
            / v.as_array().iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(rel < 1e-6, "relative RE {rel}");
    }

    #[test]
    fn diagonal_full_rank_recovery() {
        let v = TermDocMatrix::new(Array2::from_diag(&array![1.0, 2.0, 3.0, 4.0])).unwrap();
        let opts = SolverOptions {
            max_iters: 5000,
            tol: 0.0,
            ..SolverOptions::default()
        };
        let f = nmf_factorize(&v, 4, &opts).unwrap();
        let rel = reconstruction_error(&v, &f).unwrap() / 30f64.sqrt();
        assert!(rel < 1e-3, "relative RE {rel}");
    }

    #[test]
    fn factorize_is_deterministic() {
        let v = random_matrix(12, 9, 5);
        let opts = SolverOptions::default();
        let a = nmf_factorize(&v, 3, &opts).unwrap();
        let b = nmf_factorize(&v, 3, &opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rank_out_of_range_is_a_parameter_error() {
        let v = random_matrix(4, 3, 0);
        let opts = SolverOptions::default();
        assert!(matches!(
            nmf_factorize(&v, 0, &opts),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(
            nmf_factorize(&v, 4, &opts),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn reconstruction_error_of_floored_zero_factors() {
        let v = TermDocMatrix::new(array![[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let f = FactorPair::new(
            Array2::from_elem((2, 1), 1e-12),
            Array2::from_elem((1, 2), 1e-12),
        )
        .unwrap();
        let direct = naive_objective(v.as_array(), &f.w, &f.h).sqrt();
        let re = reconstruction_error(&v, &f).unwrap();
        assert!((re - direct).abs() < 1e-15);
        assert!((re - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn reconstruction_error_scaling() {
        let v = random_matrix(5, 4, 8);
        let f = random_init(v.view(), 2, 9, 1e-12);
        let c = 3.5;
        let scaled_v = TermDocMatrix::new(v.as_array() * c).unwrap();
        let scaled_f = FactorPair::new(&f.w * c, f.h.clone()).unwrap();
        let direct = naive_objective(scaled_v.as_array(), &scaled_f.w, &scaled_f.h).sqrt();
        let re = reconstruction_error(&scaled_v, &scaled_f).unwrap();
        assert!((re - direct).abs() < 1e-12 * direct.max(1.0));
        // Scaling both V and W scales the residual linearly.
        let base = reconstruction_error(&v, &f).unwrap();
        assert!((re - c * base).abs() < 1e-10 * re.max(1.0));
    }

    #[test]
    fn onmf_with_empty_batch_returns_previous() {
        let v = random_matrix(6, 5, 1);
        let prev = nmf_factorize(&v, 2, &SolverOptions::default()).unwrap();
        let next = onmf_update(&prev, &TermDocMatrix::empty(5), &SolverOptions::default()).unwrap();
        assert_eq!(prev, next);
    }

    #[test]
    fn onmf_column_mismatch() {
        let v = random_matrix(6, 5, 1);
        let prev = nmf_factorize(&v, 2, &SolverOptions::default()).unwrap();
        let u = random_matrix(3, 4, 2);
        assert!(matches!(
            onmf_update(&prev, &u, &SolverOptions::default()),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn onmf_on_repeated_rank_one_rows() {
        let a = array![1.0, 2.0, 0.5, 3.0];
        let b = array![2.0, 0.5, 1.0, 1.5, 0.25];
        let vt = TermDocMatrix::new(
            a.view()
                .insert_axis(Axis(1))
                .dot(&b.view().insert_axis(Axis(0))),
        )
        .unwrap();
        let opts = SolverOptions {
            max_iters: 500,
            tol: 1e-12,
            ..SolverOptions::default()
        };
        let prev = nmf_factorize(&vt, 1, &opts).unwrap();
        let next = onmf_update(&prev, &vt, &opts).unwrap();
        let stacked = vt.vstack(&vt).unwrap();
        let re = reconstruction_error(&stacked, &next).unwrap();
        let oracle =
            reconstruction_error(&stacked, &nmf_factorize(&stacked, 1, &opts).unwrap()).unwrap();
        assert!(re < 1e-4, "RE {re} (full refit {oracle})");
    }

    #[test]
    fn onmf_tracks_full_refactorization() {
        let opts = SolverOptions::default();
        for seed in 0..5 {
            let vt = random_matrix(20, 15, 100 + seed);
            let u = random_matrix(20, 15, 200 + seed);
            let prev = nmf_factorize(&vt, 4, &opts).unwrap();
            let next = onmf_update(&prev, &u, &opts).unwrap();
            assert_eq!(next.w.nrows(), 40);
            let stacked = vt.vstack(&u).unwrap();
            let online = reconstruction_error(&stacked, &next).unwrap();
            let full = reconstruction_error(&stacked, &nmf_factorize(&stacked, 4, &opts).unwrap())
                .unwrap();
            assert!(online <= 1.5 * full, "seed {seed}: {online} > 1.5 * {full}");
        }
    }
}
