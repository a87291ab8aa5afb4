//! One joint step: previous topics `H_t` and a new batch `U` that shares
//! two of its topics with them.
//!
//!     cargo run --release --example joint_step

use ndarray::{s, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use topicbridge::joint::joint_objective_terms;
use topicbridge::{
    cscore, dscore, joint_onmf_solve, split_common_distinct, JointParams, TermDocMatrix,
};

/// Topic `i` puts its mass on terms `4i..4i+4`.
fn block_topics(ids: &[usize], n: usize) -> Array2<f64> {
    let mut h = Array2::zeros((ids.len(), n));
    for (r, &i) in ids.iter().enumerate() {
        h.slice_mut(s![r, 4 * i..4 * i + 4]).fill(1.0);
    }
    h
}

fn main() -> topicbridge::Result<()> {
    let n = 40;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    // Topics 0 and 1 are shared; 2..5 belong to the past, 5..8 to the new batch.
    let h_t = block_topics(&[0, 1, 2, 3, 4], n);
    let new_topics = block_topics(&[0, 1, 5, 6, 7], n);
    let w = Array2::from_shape_fn((30, 5), |_| rng.random::<f64>());
    let u = TermDocMatrix::new(w.dot(&new_topics))?;

    let params = JointParams::default();
    let outcome = joint_onmf_solve(h_t.view(), &u, &params)?;
    let j = &outcome.factorization;
    let terms = joint_objective_terms(h_t.view(), &u, j, &params)?;
    println!(
        "{} iterations, objective {:.4} -> {:.4}",
        outcome.iterations,
        outcome.trace[0],
        outcome.trace.last().unwrap()
    );
    println!("{terms:#?}");

    let split = split_common_distinct(j);
    println!(
        "CScore {:.3e}",
        cscore(split.prior_common.view(), split.common.view())?
    );
    println!(
        "DScore {:.3}",
        dscore(
            split.prior_distinct.view(),
            split.distinct.view(),
            params.dscore_epsilon
        )?
    );
    for (r, row) in split.common.rows().into_iter().enumerate() {
        let block: Vec<f64> = (0..n / 4)
            .map(|b| row.slice(s![4 * b..4 * b + 4]).sum())
            .collect();
        let top = (0..block.len())
            .max_by(|&a, &b| block[a].total_cmp(&block[b]))
            .unwrap();
        println!("common row {r} is strongest on term block {top}");
    }
    Ok(())
}
