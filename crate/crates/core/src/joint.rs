//! Joint online NMF for one time step.
//!
//! Given the previous topics `H_t` (k × n) and a new batch `U` (m × n), the
//! solver minimizes
//!
//! ```text
//! ½‖H* − L*·H_t‖² + ½‖U − W_U·H_U‖² + α·f_c(H*_c, H_Uc) − β·f_d(H*_d, H_Ud)
//! ```
//!
//! over `H* ≥ 0`, `W_U ≥ 0`, `H_U ≥ 0` and an unconstrained `L*`. The first
//! `k_c` rows of `H*` and `H_U` are the common topics, the remaining `k_d`
//! rows the distinct ones. `f_c` is the commonness score and `f_d` the
//! distinctiveness score with every pair term capped, so the subtracted
//! term stays bounded.
//!
//! Optimization is block-alternating projected gradient descent over
//! `L*`, `H*`, `W_U`, `H_U` in that order, each block with an Armijo
//! backtracking line search.

use ndarray::{s, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factorization::{
    frobenius_sq_diff, seeded_rng, uniform_matrix, SolverOptions, TermDocMatrix,
};
use crate::metrics::{capped_dscore_with_grad, DSCORE_EPSILON};

const ARMIJO: f64 = 1e-4;
const SHRINK: f64 = 0.5;
const MAX_HALVINGS: usize = 60;
const WARM_RESTARTS: usize = 3;
const WARM_ITERS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JointParams {
    /// Number of common topics.
    pub k_c: usize,
    /// Number of distinct topics.
    pub k_d: usize,
    /// Weight on the commonness penalty.
    pub alpha: f64,
    /// Weight on the distinctiveness reward.
    pub beta: f64,
    pub solver: SolverOptions,
    /// Additive smoothing of topic rows before logs.
    pub dscore_epsilon: f64,
    /// Upper bound on each symmetric-KL pair term inside the objective, in nats.
    pub distinct_cap: f64,
}

impl Default for JointParams {
    fn default() -> Self {
        Self {
            k_c: 2,
            k_d: 3,
            alpha: 1000.0,
            beta: 0.1,
            solver: SolverOptions::default(),
            dscore_epsilon: DSCORE_EPSILON,
            distinct_cap: 50.0,
        }
    }
}

impl JointParams {
    pub fn k(&self) -> usize {
        self.k_c + self.k_d
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_c < 1 {
            return Err(Error::Parameter("k_c must be >= 1".into()));
        }
        if self.k_d < 1 {
            return Err(Error::Parameter("k_d must be >= 1".into()));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Parameter(format!(
                "alpha must be >= 0, got {}",
                self.alpha
            )));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Parameter(format!(
                "beta must be >= 0, got {}",
                self.beta
            )));
        }
        if self.dscore_epsilon.is_nan() || self.dscore_epsilon <= 0.0 {
            return Err(Error::Parameter("dscore_epsilon must be > 0".into()));
        }
        if self.distinct_cap.is_nan() || self.distinct_cap <= 0.0 {
            return Err(Error::Parameter("distinct_cap must be > 0".into()));
        }
        self.solver.validate()
    }
}

/// The four optimization variables of one joint step.
#[derive(Debug, Clone, PartialEq)]
pub struct JointFactorization {
    /// Adjusted previous topics, k × n.
    pub h_star: Array2<f64>,
    /// Transform from the previous topics, k × k.
    pub l_star: Array2<f64>,
    /// Coefficients of the new batch, m × k.
    pub w_u: Array2<f64>,
    /// Topics of the new batch, k × n.
    pub h_u: Array2<f64>,
    pub k_c: usize,
}

impl JointFactorization {
    pub fn k(&self) -> usize {
        self.h_u.nrows()
    }

    pub fn k_d(&self) -> usize {
        self.k() - self.k_c
    }
}

/// Objective value split by term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JointTerms {
    /// `½‖H* − L*·H_t‖²`
    pub prior_fit: f64,
    /// `½‖U − W_U·H_U‖²`
    pub new_fit: f64,
    /// `α·f_c`
    pub commonness: f64,
    /// `−β·f_d` (capped), never positive.
    pub distinctiveness: f64,
}

impl JointTerms {
    pub fn total(&self) -> f64 {
        self.prior_fit + self.new_fit + self.commonness + self.distinctiveness
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointGradients {
    pub h_star: Array2<f64>,
    pub l_star: Array2<f64>,
    pub w_u: Array2<f64>,
    pub h_u: Array2<f64>,
}

/// Result of [`joint_onmf_solve`].
#[derive(Debug, Clone)]
pub struct JointOutcome {
    pub factorization: JointFactorization,
    /// Objective after initialization and after each iteration.
    pub trace: Vec<f64>,
    pub iterations: usize,
}

/// Common and distinct blocks of a joint factorization.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicSplit {
    /// First `k_c` rows of `H_U`.
    pub common: Array2<f64>,
    /// Remaining `k_d` rows of `H_U`.
    pub distinct: Array2<f64>,
    /// First `k_c` rows of `H*`.
    pub prior_common: Array2<f64>,
    /// Remaining `k_d` rows of `H*`.
    pub prior_distinct: Array2<f64>,
}

pub fn split_common_distinct(j: &JointFactorization) -> TopicSplit {
    let kc = j.k_c;
    TopicSplit {
        common: j.h_u.slice(s![..kc, ..]).to_owned(),
        distinct: j.h_u.slice(s![kc.., ..]).to_owned(),
        prior_common: j.h_star.slice(s![..kc, ..]).to_owned(),
        prior_distinct: j.h_star.slice(s![kc.., ..]).to_owned(),
    }
}

fn check_finite(name: &str, a: ArrayView2<'_, f64>) -> Result<()> {
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric(format!(
            "{name} contains NaN or infinite entries"
        )));
    }
    Ok(())
}

fn check_inputs(
    h_t: ArrayView2<'_, f64>,
    u: &TermDocMatrix,
    j: &JointFactorization,
    params: &JointParams,
) -> Result<()> {
    let k = params.k();
    let (m, n) = (u.rows(), u.cols());
    let expect = [
        ("H_t", h_t.dim(), (k, n)),
        ("H*", j.h_star.dim(), (k, n)),
        ("L*", j.l_star.dim(), (k, k)),
        ("W_U", j.w_u.dim(), (m, k)),
        ("H_U", j.h_u.dim(), (k, n)),
    ];
    for (name, got, want) in expect {
        if got != want {
            return Err(Error::Dimension(format!(
                "{name} is {got:?}, expected {want:?}"
            )));
        }
    }
    if j.k_c != params.k_c {
        return Err(Error::Dimension(format!(
            "factorization has k_c = {}, parameters say {}",
            j.k_c, params.k_c
        )));
    }
    check_finite("H_t", h_t)?;
    check_finite("H*", j.h_star.view())?;
    check_finite("L*", j.l_star.view())?;
    check_finite("W_U", j.w_u.view())?;
    check_finite("H_U", j.h_u.view())
}

/// Term-by-term evaluation for one fixed `(H_t, U, params)`.
struct Problem<'a> {
    h_t: ArrayView2<'a, f64>,
    u: ArrayView2<'a, f64>,
    p: &'a JointParams,
}

impl Problem<'_> {
    fn prior_residual(&self, h_star: &Array2<f64>, l: &Array2<f64>) -> Array2<f64> {
        h_star - &l.dot(&self.h_t)
    }

    fn prior_fit(&self, h_star: &Array2<f64>, l: &Array2<f64>) -> f64 {
        0.5 * frobenius_sq_diff(h_star.view(), l.dot(&self.h_t).view())
    }

    fn new_residual(&self, w: &Array2<f64>, h_u: &Array2<f64>) -> Array2<f64> {
        &self.u - &w.dot(h_u)
    }

    fn new_fit(&self, w: &Array2<f64>, h_u: &Array2<f64>) -> f64 {
        0.5 * frobenius_sq_diff(self.u, w.dot(h_u).view())
    }

    fn commonness(&self, h_star: &Array2<f64>, h_u: &Array2<f64>) -> f64 {
        let kc = self.p.k_c;
        let sq = frobenius_sq_diff(h_star.slice(s![..kc, ..]), h_u.slice(s![..kc, ..]));
        self.p.alpha * sq / kc as f64
    }

    /// Gradient of the commonness term with respect to `H*` (full k × n).
    /// The `H_U` gradient is its negation.
    fn commonness_grad(&self, h_star: &Array2<f64>, h_u: &Array2<f64>) -> Array2<f64> {
        let kc = self.p.k_c;
        let mut g = Array2::zeros(h_star.raw_dim());
        let scale = 2.0 * self.p.alpha / kc as f64;
        let diff = &h_star.slice(s![..kc, ..]) - &h_u.slice(s![..kc, ..]);
        g.slice_mut(s![..kc, ..]).assign(&(diff * scale));
        g
    }

    /// `−β·f_d` with gradients embedded into full k × n matrices for `H*` and `H_U`.
    fn distinctiveness(
        &self,
        h_star: &Array2<f64>,
        h_u: &Array2<f64>,
    ) -> (f64, Array2<f64>, Array2<f64>) {
        let kc = self.p.k_c;
        let mut g_star = Array2::zeros(h_star.raw_dim());
        let mut g_u = Array2::zeros(h_u.raw_dim());
        if self.p.beta == 0.0 {
            return (0.0, g_star, g_u);
        }
        let (value, ga, gb) = capped_dscore_with_grad(
            h_star.slice(s![kc.., ..]),
            h_u.slice(s![kc.., ..]),
            self.p.dscore_epsilon,
            self.p.distinct_cap,
        );
        let beta = self.p.beta;
        g_star.slice_mut(s![kc.., ..]).assign(&(ga * -beta));
        g_u.slice_mut(s![kc.., ..]).assign(&(gb * -beta));
        (-beta * value, g_star, g_u)
    }

    fn distinct_value(&self, h_star: &Array2<f64>, h_u: &Array2<f64>) -> f64 {
        if self.p.beta == 0.0 {
            return 0.0;
        }
        self.distinctiveness(h_star, h_u).0
    }

    fn terms(&self, j: &JointFactorization) -> JointTerms {
        JointTerms {
            prior_fit: self.prior_fit(&j.h_star, &j.l_star),
            new_fit: self.new_fit(&j.w_u, &j.h_u),
            commonness: self.commonness(&j.h_star, &j.h_u),
            distinctiveness: self.distinct_value(&j.h_star, &j.h_u),
        }
    }

    // Per-block gradients and partial objectives (terms not touching the
    // block are constant during its line search and are left out).

    fn grad_l(&self, h_star: &Array2<f64>, l: &Array2<f64>) -> Array2<f64> {
        -self.prior_residual(h_star, l).dot(&self.h_t.t())
    }

    fn grad_h_star(&self, j: &JointFactorization) -> Array2<f64> {
        let (_, g_star, _) = self.distinctiveness(&j.h_star, &j.h_u);
        self.prior_residual(&j.h_star, &j.l_star) + self.commonness_grad(&j.h_star, &j.h_u) + g_star
    }

    fn h_star_block(&self, h_star: &Array2<f64>, j: &JointFactorization) -> f64 {
        self.prior_fit(h_star, &j.l_star)
            + self.commonness(h_star, &j.h_u)
            + self.distinct_value(h_star, &j.h_u)
    }

    fn grad_w(&self, w: &Array2<f64>, h_u: &Array2<f64>) -> Array2<f64> {
        -self.new_residual(w, h_u).dot(&h_u.t())
    }

    fn grad_h_u(&self, j: &JointFactorization) -> Array2<f64> {
        let (_, _, g_u) = self.distinctiveness(&j.h_star, &j.h_u);
        -j.w_u.t().dot(&self.new_residual(&j.w_u, &j.h_u)) - self.commonness_grad(&j.h_star, &j.h_u)
            + g_u
    }

    fn h_u_block(&self, h_u: &Array2<f64>, j: &JointFactorization) -> f64 {
        self.new_fit(&j.w_u, h_u)
            + self.commonness(&j.h_star, h_u)
            + self.distinct_value(&j.h_star, h_u)
    }
}

/// Value of the joint objective, term by term.
pub fn joint_objective_terms(
    h_t: ArrayView2<'_, f64>,
    u: &TermDocMatrix,
    j: &JointFactorization,
    params: &JointParams,
) -> Result<JointTerms> {
    params.validate()?;
    check_inputs(h_t, u, j, params)?;
    let problem = Problem {
        h_t,
        u: u.view(),
        p: params,
    };
    let terms = problem.terms(j);
    if !terms.total().is_finite() {
        return Err(Error::Numeric("joint objective is not finite".into()));
    }
    Ok(terms)
}

pub fn joint_objective(
    h_t: ArrayView2<'_, f64>,
    u: &TermDocMatrix,
    j: &JointFactorization,
    params: &JointParams,
) -> Result<f64> {
    joint_objective_terms(h_t, u, j, params).map(|t| t.total())
}

/// Analytic gradients of the joint objective at `j`.
pub fn joint_gradients(
    h_t: ArrayView2<'_, f64>,
    u: &TermDocMatrix,
    j: &JointFactorization,
    params: &JointParams,
) -> Result<JointGradients> {
    params.validate()?;
    check_inputs(h_t, u, j, params)?;
    let problem = Problem {
        h_t,
        u: u.view(),
        p: params,
    };
    Ok(JointGradients {
        h_star: problem.grad_h_star(j),
        l_star: problem.grad_l(&j.h_star, &j.l_star),
        w_u: problem.grad_w(&j.w_u, &j.h_u),
        h_u: problem.grad_h_u(j),
    })
}

/// Armijo backtracking along the projected gradient path.
///
/// Returns the accepted point, its block objective and the accepted step,
/// or `None` when no trial step gives sufficient decrease.
fn backtrack(
    x: &Array2<f64>,
    grad: &Array2<f64>,
    f0: f64,
    initial_step: f64,
    nonnegative: bool,
    f: impl Fn(&Array2<f64>) -> f64,
) -> Option<(Array2<f64>, f64, f64)> {
    let mut step = initial_step;
    for _ in 0..MAX_HALVINGS {
        let mut cand = x - &(grad * step);
        if nonnegative {
            cand.mapv_inplace(|v| v.max(0.0));
        }
        let decrease: f64 = grad
            .iter()
            .zip(x.iter().zip(cand.iter()))
            .map(|(g, (a, b))| g * (a - b))
            .sum();
        if decrease <= 0.0 {
            return None;
        }
        let f1 = f(&cand);
        if f1.is_finite() && f1 <= f0 - ARMIJO * decrease {
            return Some((cand, f1, step));
        }
        step *= SHRINK;
    }
    None
}

/// Starting point for one joint step.
///
/// The `k_c` rows of `H_t` that carry the most energy when `U` is fitted on
/// `H_t` alone become the common rows; `L*` starts as the permutation that
/// moves them to the front (the identity when they already are), `H*`
/// starts at `L*·H_t`, and `H_U` copies the common rows. The distinct rows
/// and `W_U` come from a few short multiplicative-update runs against `U`
/// with the common rows frozen; the best-fitting run wins.
fn initialize(
    h_t: ArrayView2<'_, f64>,
    u: ArrayView2<'_, f64>,
    params: &JointParams,
) -> JointFactorization {
    let (k, kc) = (params.k(), params.k_c);
    let (m, n) = u.dim();
    let eps = params.solver.epsilon;
    let mut rng = seeded_rng(params.solver.seed);

    let order = common_first_order(h_t, u, kc, eps, &mut rng);
    let mut l_star = Array2::zeros((k, k));
    for (row, &src) in order.iter().enumerate() {
        l_star[[row, src]] = 1.0;
    }
    let h_star = l_star.dot(&h_t);

    let level = h_t.mean().filter(|v| *v > 0.0).unwrap_or(1.0);
    let mut best: Option<(f64, Array2<f64>, Array2<f64>)> = None;
    for _ in 0..WARM_RESTARTS {
        let mut h_u = uniform_matrix(k, n, &mut rng) * level;
        h_u.slice_mut(s![..kc, ..])
            .assign(&h_star.slice(s![..kc, ..]));
        let mut w_u = uniform_matrix(m, k, &mut rng);
        let wh = w_u.dot(&h_u);
        let denom: f64 = wh.iter().map(|x| x * x).sum();
        let numer: f64 = wh.iter().zip(u.iter()).map(|(a, b)| a * b).sum();
        if denom > 0.0 && numer > 0.0 {
            w_u *= numer / denom;
        }
        warm_start(u, &mut w_u, &mut h_u, kc, eps);
        let fit = frobenius_sq_diff(u, w_u.dot(&h_u).view());
        if best.as_ref().is_none_or(|(f, _, _)| fit < *f) {
            best = Some((fit, w_u, h_u));
        }
    }
    let (_, w_u, h_u) = best.expect("at least one warm start");

    JointFactorization {
        h_star,
        l_star,
        w_u,
        h_u,
        k_c: kc,
    }
}

/// Multiplicative updates on `W_U` and the distinct rows of `H_U`, with
/// the common rows held fixed.
fn warm_start(
    u: ArrayView2<'_, f64>,
    w: &mut Array2<f64>,
    h: &mut Array2<f64>,
    kc: usize,
    eps: f64,
) {
    for _ in 0..WARM_ITERS {
        let num = u.dot(&h.t());
        let den = w.dot(&h.dot(&h.t()));
        ndarray::Zip::from(&mut *w)
            .and(&num)
            .and(&den)
            .for_each(|x, &a, &b| *x = (*x * a / b.max(eps)).max(eps));
        let num = w.t().dot(&u);
        let den = w.t().dot(&*w).dot(&*h);
        ndarray::Zip::from(h.slice_mut(s![kc.., ..]))
            .and(num.slice(s![kc.., ..]))
            .and(den.slice(s![kc.., ..]))
            .for_each(|x, &a, &b| *x = (*x * a / b.max(eps)).max(eps));
    }
}

fn common_first_order(
    h_t: ArrayView2<'_, f64>,
    u: ArrayView2<'_, f64>,
    kc: usize,
    eps: f64,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Vec<usize> {
    let k = h_t.nrows();
    let h = h_t.mapv(|x| x.max(eps));
    let mut coef = uniform_matrix(u.nrows(), k, rng);
    let hht = h.dot(&h.t());
    let uht = u.dot(&h.t());
    for _ in 0..20 {
        let denom = coef.dot(&hht);
        ndarray::Zip::from(&mut coef)
            .and(&uht)
            .and(&denom)
            .for_each(|c, &num, &d| *c = (*c * num / d.max(eps)).max(eps));
    }
    let energy: Vec<f64> = (0..k)
        .map(|r| {
            let wc = coef.column(r).iter().map(|x| x * x).sum::<f64>().sqrt();
            let hr = h_t.row(r).iter().map(|x| x * x).sum::<f64>().sqrt();
            wc * hr
        })
        .collect();
    let mut ranked: Vec<usize> = (0..k).collect();
    ranked.sort_by(|&a, &b| energy[b].total_cmp(&energy[a]).then(a.cmp(&b)));
    let mut common: Vec<usize> = ranked[..kc].to_vec();
    common.sort_unstable();
    let rest: Vec<usize> = (0..k).filter(|r| !common.contains(r)).collect();
    common.extend(rest);
    common
}

fn check_step_inputs(
    h_t: ArrayView2<'_, f64>,
    u: &TermDocMatrix,
    params: &JointParams,
) -> Result<()> {
    params.validate()?;
    let k = params.k();
    if u.is_empty() {
        return Err(Error::Parameter("new batch U has no rows".into()));
    }
    if h_t.nrows() != k || h_t.ncols() != u.cols() {
        return Err(Error::Dimension(format!(
            "H_t is {:?}, expected ({k}, {})",
            h_t.dim(),
            u.cols()
        )));
    }
    check_finite("H_t", h_t)?;
    if h_t.iter().any(|&x| x < 0.0) {
        return Err(Error::Parameter("H_t must be non-negative".into()));
    }
    let limit = u.rows().min(u.cols());
    if k > limit {
        return Err(Error::Parameter(format!(
            "k = {k} exceeds min(rows, cols) = {limit} of the new batch"
        )));
    }
    Ok(())
}

/// Runs the joint solver and keeps the objective trace.
pub fn joint_onmf_solve(
    h_t: ArrayView2<'_, f64>,
    u: &TermDocMatrix,
    params: &JointParams,
) -> Result<JointOutcome> {
    check_step_inputs(h_t, u, params)?;
    let problem = Problem {
        h_t,
        u: u.view(),
        p: params,
    };
    let opts = &params.solver;
    let mut j = initialize(h_t, u.view(), params);
    let mut current = problem.terms(&j).total();
    let mut trace = vec![current];
    let mut iterations = 0;
    // Each block's search starts from twice its last accepted step, never
    // above the configured initial step.
    let mut steps = [opts.initial_step; 4];
    let grow = |step: f64| (step / SHRINK).min(opts.initial_step);

    for _ in 0..opts.max_iters {
        iterations += 1;

        let g = problem.grad_l(&j.h_star, &j.l_star);
        let f0 = problem.prior_fit(&j.h_star, &j.l_star);
        if let Some((l, _, step)) = backtrack(&j.l_star, &g, f0, steps[0], false, |l| {
            problem.prior_fit(&j.h_star, l)
        }) {
            j.l_star = l;
            steps[0] = grow(step);
        }

        let g = problem.grad_h_star(&j);
        let f0 = problem.h_star_block(&j.h_star, &j);
        if let Some((h, _, step)) = backtrack(&j.h_star, &g, f0, steps[1], true, |h| {
            problem.h_star_block(h, &j)
        }) {
            j.h_star = h;
            steps[1] = grow(step);
        }

        let g = problem.grad_w(&j.w_u, &j.h_u);
        let f0 = problem.new_fit(&j.w_u, &j.h_u);
        if let Some((w, _, step)) = backtrack(&j.w_u, &g, f0, steps[2], true, |w| {
            problem.new_fit(w, &j.h_u)
        }) {
            j.w_u = w;
            steps[2] = grow(step);
        }

        let g = problem.grad_h_u(&j);
        let f0 = problem.h_u_block(&j.h_u, &j);
        if let Some((h, _, step)) =
            backtrack(&j.h_u, &g, f0, steps[3], true, |h| problem.h_u_block(h, &j))
        {
            j.h_u = h;
            steps[3] = grow(step);
        }

        let next = problem.terms(&j).total();
        if !next.is_finite() {
            return Err(Error::Numeric(format!(
                "joint objective diverged at iteration {iterations}"
            )));
        }
        trace.push(next);
        let done = opts.converged(current, next);
        current = next;
        if done {
            break;
        }
    }

    Ok(JointOutcome {
        factorization: j,
        trace,
        iterations,
    })
}

/// One joint ONMF time step: previous topics `h_t`, new batch `u`.
pub fn joint_onmf_step(
    h_t: ArrayView2<'_, f64>,
    u: &TermDocMatrix,
    params: &JointParams,
) -> Result<JointFactorization> {
    joint_onmf_solve(h_t, u, params).map(|o| o.factorization)
}

/// `top` stacked above `bottom`; rebuilds `H_U` from a [`TopicSplit`].
pub fn stack_rows(top: &Array2<f64>, bottom: &Array2<f64>) -> Array2<f64> {
    ndarray::concatenate(Axis(0), &[top.view(), bottom.view()]).expect("same column count")
}
