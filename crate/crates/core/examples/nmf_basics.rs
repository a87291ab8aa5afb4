//! Batch NMF on a matrix with a known rank-3 structure.
//!
//!     cargo run --release --example nmf_basics

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use topicbridge::factorization::objective;
use topicbridge::{
    multiplicative_update_step, nmf_factorize, nmf_factorize_restarts, reconstruction_error,
};
use topicbridge::{FactorPair, SolverOptions, TermDocMatrix};

fn main() -> topicbridge::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let w = Array2::from_shape_fn((20, 3), |_| rng.random::<f64>());
    let h = Array2::from_shape_fn((3, 15), |_| rng.random::<f64>());
    let v = TermDocMatrix::new(w.dot(&h))?;
    let norm = v.view().iter().map(|x| x * x).sum::<f64>().sqrt();

    let opts = SolverOptions {
        max_iters: 500,
        tol: 1e-9,
        ..SolverOptions::default()
    };
    let single = nmf_factorize(&v, 3, &opts)?;
    let best = nmf_factorize_restarts(&v, 3, &opts, 5)?;
    println!(
        "relative RE, one start:   {:.5}",
        reconstruction_error(&v, &single)? / norm
    );
    println!(
        "relative RE, 5 restarts:  {:.5}",
        reconstruction_error(&v, &best)? / norm
    );

    // A single update never increases the objective.
    let mut f = FactorPair::new(
        Array2::from_shape_fn((20, 3), |_| rng.random::<f64>()),
        Array2::from_shape_fn((3, 15), |_| rng.random::<f64>()),
    )?;
    print!("objective over 8 steps:");
    for _ in 0..8 {
        f = multiplicative_update_step(&v, &f, opts.epsilon)?;
        print!(" {:.4}", objective(&v, &f)?);
    }
    println!();
    Ok(())
}
