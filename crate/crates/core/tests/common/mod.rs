//! Independent re-derivations used as oracles by the integration tests.
//! Nothing here calls into the library's numeric code.
#![allow(dead_code)]

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use topicbridge::{JointFactorization, JointParams};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Entries uniform in `[lo, lo + 1)`.
pub fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| lo + rng.random::<f64>())
}

/// Unrolled `a · b`.
pub fn matmul(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros((a.nrows(), b.ncols()));
    for i in 0..a.nrows() {
        for j in 0..b.ncols() {
            let mut acc = 0.0;
            for l in 0..a.ncols() {
                acc += a[[i, l]] * b[[l, j]];
            }
            out[[i, j]] = acc;
        }
    }
    out
}

pub fn sq_dist(a: ArrayView2<f64>, b: ArrayView2<f64>) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let d = a[[i, j]] - b[[i, j]];
            acc += d * d;
        }
    }
    acc
}

pub fn cscore_direct(a: ArrayView2<f64>, b: ArrayView2<f64>) -> f64 {
    sq_dist(a, b) / a.nrows() as f64
}

fn smoothed(row: &[f64], eps: f64) -> Vec<f64> {
    let total: f64 = row.iter().map(|x| x + eps).sum();
    row.iter().map(|x| (x + eps) / total).collect()
}

fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| a * (a / b).ln()).sum()
}

/// Mean symmetric KL over all row pairs, each pair term clamped at `cap`.
pub fn dscore_direct(a: ArrayView2<f64>, b: ArrayView2<f64>, eps: f64, cap: f64) -> f64 {
    let kd = a.nrows();
    let mut acc = 0.0;
    for i in 0..kd {
        let p = smoothed(&a.row(i).to_vec(), eps);
        for j in 0..kd {
            let q = smoothed(&b.row(j).to_vec(), eps);
            acc += (kl(&p, &q) + kl(&q, &p)).min(cap);
        }
    }
    acc / (2.0 * (kd * kd) as f64)
}

/// The joint objective written out term by term.
pub fn joint_objective_direct(
    h_t: ArrayView2<f64>,
    u: ArrayView2<f64>,
    j: &JointFactorization,
    p: &JointParams,
) -> f64 {
    let kc = p.k_c;
    let prior = 0.5 * sq_dist(j.h_star.view(), matmul(j.l_star.view(), h_t).view());
    let fit = 0.5 * sq_dist(u, matmul(j.w_u.view(), j.h_u.view()).view());
    let common = p.alpha
        * cscore_direct(
            j.h_star.slice(ndarray::s![..kc, ..]),
            j.h_u.slice(ndarray::s![..kc, ..]),
        );
    let distinct = p.beta
        * dscore_direct(
            j.h_star.slice(ndarray::s![kc.., ..]),
            j.h_u.slice(ndarray::s![kc.., ..]),
            p.dscore_epsilon,
            p.distinct_cap,
        );
    prior + fit + common - distinct
}

/// Random strictly positive joint instance: (H_t, U, J).
pub fn joint_instance(
    rng: &mut ChaCha8Rng,
    m: usize,
    n: usize,
    kc: usize,
    kd: usize,
) -> (Array2<f64>, Array2<f64>, JointFactorization) {
    let k = kc + kd;
    let h_t = random(rng, k, n, 0.1);
    let u = random(rng, m, n, 0.1);
    let j = JointFactorization {
        h_star: random(rng, k, n, 0.1),
        l_star: random(rng, k, k, -0.5),
        w_u: random(rng, m, k, 0.1),
        h_u: random(rng, k, n, 0.1),
        k_c: kc,
    };
    (h_t, u, j)
}

/// Selects one block of a [`JointFactorization`].
pub type Pick = fn(&mut JointFactorization) -> &mut Array2<f64>;

/// Central differences of `f` with respect to every entry of the block picked by `pick`.
pub fn finite_difference(
    j: &JointFactorization,
    pick: Pick,
    h: f64,
    f: impl Fn(&JointFactorization) -> f64,
) -> Array2<f64> {
    let mut probe = j.clone();
    let shape = pick(&mut probe).raw_dim();
    let mut out = Array2::zeros(shape);
    for idx in ndarray::indices(out.raw_dim()) {
        let x0 = pick(&mut probe)[idx];
        pick(&mut probe)[idx] = x0 + h;
        let up = f(&probe);
        pick(&mut probe)[idx] = x0 - h;
        let down = f(&probe);
        pick(&mut probe)[idx] = x0;
        out[idx] = (up - down) / (2.0 * h);
    }
    out
}

/// `max |a − b| / max(max |b|, 1e-8)`.
pub fn max_relative_error(analytic: &Array2<f64>, numeric: &Array2<f64>) -> f64 {
    let diff = analytic
        .iter()
        .zip(numeric)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let scale = numeric
        .iter()
        .map(|b| b.abs())
        .fold(0.0, f64::max)
        .max(1e-8);
    diff / scale
}

/// Smallest total squared distance over all ways of choosing `kc` disjoint
/// (prev, new) row pairs.
pub fn brute_force_assignment(a: ArrayView2<f64>, b: ArrayView2<f64>, kc: usize) -> f64 {
    let k = a.nrows();
    let cost = |i: usize, j: usize| {
        sq_dist(
            a.slice(ndarray::s![i..i + 1, ..]),
            b.slice(ndarray::s![j..j + 1, ..]),
        )
    };
    fn go(
        depth: usize,
        kc: usize,
        k: usize,
        start: usize,
        used: &mut Vec<bool>,
        acc: f64,
        cost: &dyn Fn(usize, usize) -> f64,
    ) -> f64 {
        if depth == kc {
            return acc;
        }
        let mut best = f64::INFINITY;
        // prev rows are chosen in increasing order, new rows in any order.
        for i in start..k {
            for j in 0..k {
                if used[j] {
                    continue;
                }
                used[j] = true;
                best = best.min(go(depth + 1, kc, k, i + 1, used, acc + cost(i, j), cost));
                used[j] = false;
            }
        }
        best
    }
    go(0, kc, k, 0, &mut vec![false; k], 0.0, &cost)
}

pub fn cosine(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb).max(1e-300)
}
