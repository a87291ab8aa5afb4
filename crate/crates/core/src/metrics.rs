//! Topic comparison metrics and helpers.
//!
//! * `cscore`: mean squared distance between paired common topics, lower is better.
//! * `dscore`: average symmetric KL divergence over every cross pair of
//!   distinct topics, higher is better.
//! * reconstruction error lives next to the solvers in
//!   [`crate::factorization::reconstruction_error`].

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::runner::MethodKind;
use crate::textpipe::Vocabulary;

/// Additive smoothing used before taking logs of topic rows.
pub const DSCORE_EPSILON: f64 = 1e-10;

/// One row of a metric time series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub time_index: usize,
    pub method: MethodKind,
    pub cscore: f64,
    pub dscore: f64,
    pub re: f64,
    /// Seconds spent in the solver for this step.
    pub wall_clock: f64,
}

fn check_same_shape(a: &ArrayView2<'_, f64>, b: &ArrayView2<'_, f64>, what: &str) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!(
            "{what}: {:?} vs {:?}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

/// `(1/k_c)·||A - B||²_F` where `k_c` is the row count.
pub fn cscore(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Result<f64> {
    check_same_shape(&a, &b, "cscore operands differ in shape")?;
    if a.nrows() == 0 {
        return Err(Error::Parameter(
            "cscore needs at least one topic row".into(),
        ));
    }
    let sq: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(sq / a.nrows() as f64)
}

/// Smoothed, normalized copy of a topic row.
fn to_distribution(row: ArrayView1<'_, f64>, epsilon: f64) -> (Vec<f64>, f64) {
    let smoothed: Vec<f64> = row.iter().map(|&x| x.max(0.0) + epsilon).collect();
    let total: f64 = smoothed.iter().sum();
    (smoothed.into_iter().map(|x| x / total).collect(), total)
}

/// `KL(p||q) + KL(q||p)` for two strictly positive distributions.
fn symmetric_kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(&pi, &qi)| (pi - qi) * (pi.ln() - qi.ln()))
        .sum()
}

/// Average symmetric KL divergence between every row of `a` and every row of `b`:
/// `1/(2·k_d²) · Σ_i Σ_j [KL(a_i||b_j) + KL(b_j||a_i)]`.
///
/// Rows are smoothed by `epsilon` and renormalized first, so all-zero rows
/// become uniform rather than an error.
pub fn dscore(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>, epsilon: f64) -> Result<f64> {
    check_same_shape(&a, &b, "dscore operands differ in shape")?;
    if a.nrows() == 0 {
        return Err(Error::Parameter(
            "dscore needs at least one topic row".into(),
        ));
    }
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::Parameter(format!(
            "dscore smoothing must be > 0, got {epsilon}"
        )));
    }
    let pa: Vec<_> = a
        .rows()
        .into_iter()
        .map(|r| to_distribution(r, epsilon).0)
        .collect();
    let pb: Vec<_> = b
        .rows()
        .into_iter()
        .map(|r| to_distribution(r, epsilon).0)
        .collect();
    let mut total = 0.0;
    for p in &pa {
        for q in &pb {
            total += symmetric_kl(p, q);
        }
    }
    let kd = a.nrows() as f64;
    Ok(total / (2.0 * kd * kd))
}

/// DScore with each pair term clamped at `cap`, plus its gradient with
/// respect to the raw (unsmoothed) rows of `a` and `b`.
///
/// Clamped pairs contribute no gradient.
pub(crate) fn capped_dscore_with_grad(
    a: ArrayView2<'_, f64>,
    b: ArrayView2<'_, f64>,
    epsilon: f64,
    cap: f64,
) -> (f64, Array2<f64>, Array2<f64>) {
    let kd = a.nrows();
    let n = a.ncols();
    let norm = 1.0 / (2.0 * (kd * kd) as f64);
    let pa: Vec<_> = a
        .rows()
        .into_iter()
        .map(|r| to_distribution(r, epsilon))
        .collect();
    let pb: Vec<_> = b
        .rows()
        .into_iter()
        .map(|r| to_distribution(r, epsilon))
        .collect();

    // Gradients with respect to the normalized distributions first.
    let mut dpa = Array2::<f64>::zeros((kd, n));
    let mut dpb = Array2::<f64>::zeros((kd, n));
    let mut total = 0.0;
    for (i, (p, _)) in pa.iter().enumerate() {
        for (j, (q, _)) in pb.iter().enumerate() {
            let pair = symmetric_kl(p, q);
            if pair >= cap {
                total += cap;
                continue;
            }
            total += pair;
            for l in 0..n {
                let ratio = (p[l] / q[l]).ln();
                dpa[[i, l]] += ratio + 1.0 - q[l] / p[l];
                dpb[[j, l]] += -ratio + 1.0 - p[l] / q[l];
            }
        }
    }

    // Chain through p = s / Σs with s = x + ε.
    let project = |dp: &mut Array2<f64>, dists: &[(Vec<f64>, f64)]| {
        for (r, (p, sum)) in dists.iter().enumerate() {
            let mut row = dp.row_mut(r);
            let inner: f64 = row.iter().zip(p).map(|(g, pi)| g * pi).sum();
            row.mapv_inplace(|g| norm * (g - inner) / sum);
        }
    };
    project(&mut dpa, &pa);
    project(&mut dpb, &pb);
    (norm * total, dpa, dpb)
}

/// Result of pairing previous topics with new topics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicAssignment {
    /// `(previous_row, new_row)` pairs, sorted by previous row.
    pub pairs: Vec<(usize, usize)>,
    /// Sum of squared Frobenius distances over `pairs`.
    pub total_distance: f64,
    pub distinct_prev: Vec<usize>,
    pub distinct_new: Vec<usize>,
}

/// Squared Euclidean distance between every row of `a` and every row of `b`.
pub fn pairwise_sq_distances(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array2<f64> {
    Array2::from_shape_fn((a.nrows(), b.nrows()), |(i, j)| {
        a.row(i)
            .iter()
            .zip(b.row(j))
            .map(|(x, y)| (x - y) * (x - y))
            .sum()
    })
}

/// Picks `k_c` disjoint (previous, new) row pairs with minimum total squared
/// distance; everything left over is labelled distinct.
///
/// Used for the baselines, which have no built-in common/distinct split.
pub fn assign_common_topics(
    h_prev: ArrayView2<'_, f64>,
    h_new: ArrayView2<'_, f64>,
    k_c: usize,
) -> Result<TopicAssignment> {
    check_same_shape(&h_prev, &h_new, "topic matrices differ in shape")?;
    let k = h_prev.nrows();
    if k_c == 0 || k_c > k {
        return Err(Error::Parameter(format!("k_c = {k_c} outside 1..={k}")));
    }
    let cost = pairwise_sq_distances(h_prev, h_new);
    let pairs = cardinality_assignment(&cost, k_c);
    let total_distance = pairs.iter().map(|&(i, j)| cost[[i, j]]).sum();
    let distinct_prev = (0..k)
        .filter(|i| !pairs.iter().any(|p| p.0 == *i))
        .collect();
    let distinct_new = (0..k)
        .filter(|j| !pairs.iter().any(|p| p.1 == *j))
        .collect();
    Ok(TopicAssignment {
        pairs,
        total_distance,
        distinct_prev,
        distinct_new,
    })
}

/// Minimum-cost matching of exactly `size` pairs in a square cost matrix.
///
/// Reduced to a perfect matching by adding `k - size` free dummy rows and
/// columns; dummy-to-dummy edges are forbidden so exactly `size` real pairs
/// survive.
fn cardinality_assignment(cost: &Array2<f64>, size: usize) -> Vec<(usize, usize)> {
    let k = cost.nrows();
    let pad = k - size;
    let dim = k + pad;
    let forbidden = 1.0 + 2.0 * cost.iter().sum::<f64>();
    let padded = Array2::from_shape_fn((dim, dim), |(i, j)| match (i < k, j < k) {
        (true, true) => cost[[i, j]],
        (false, false) => forbidden,
        _ => 0.0,
    });
    let assignment = hungarian(&padded);
    let mut pairs: Vec<_> = assignment
        .into_iter()
        .enumerate()
        .filter(|&(i, j)| i < k && j < k)
        .collect();
    pairs.sort_unstable();
    pairs
}

/// Square Hungarian algorithm (shortest augmenting path with potentials).
/// Returns the column assigned to each row.
fn hungarian(cost: &Array2<f64>) -> Vec<usize> {
    let n = cost.nrows();
    // 1-based arrays; index 0 is the virtual root.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut matched_row = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        matched_row[0] = row;
        let mut col0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let i0 = matched_row[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = cost[[i0 - 1, j - 1]] - u[i0] - v[j];
                if reduced < minv[j] {
                    minv[j] = reduced;
                    way[j] = col0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    col1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            col0 = col1;
            if matched_row[col0] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col0];
            matched_row[col0] = matched_row[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[matched_row[j] - 1] = j - 1;
    }
    assignment
}

/// The `count` heaviest terms of a topic row, heaviest first.
/// Equal weights fall back to vocabulary order.
pub fn top_terms(
    topic_row: ArrayView1<'_, f64>,
    vocab: &Vocabulary,
    count: usize,
) -> Result<Vec<(String, f64)>> {
    let n = topic_row.len();
    if n != vocab.len() {
        return Err(Error::Dimension(format!(
            "topic has {n} weights, vocabulary has {} terms",
            vocab.len()
        )));
    }
    if count == 0 || count > n {
        return Err(Error::Parameter(format!(
            "top-term count {count} outside 1..={n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| topic_row[b].total_cmp(&topic_row[a]).then(a.cmp(&b)));
    Ok(order
        .into_iter()
        .take(count)
        .map(|i| (vocab.term(i).to_owned(), topic_row[i]))
        .collect())
}
