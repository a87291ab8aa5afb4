//! Online NMF: fold new batches into an existing factorization and compare
//! with refitting everything from scratch.
//!
//!     cargo run --release --example online_update

use ndarray::{concatenate, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use topicbridge::{nmf_factorize, onmf_update, reconstruction_error, SolverOptions, TermDocMatrix};

fn batch(rng: &mut ChaCha8Rng, h: &Array2<f64>, rows: usize) -> Array2<f64> {
    let w = Array2::from_shape_fn((rows, h.nrows()), |_| rng.random::<f64>());
    w.dot(h)
}

fn main() -> topicbridge::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let topics = Array2::from_shape_fn((3, 30), |_| rng.random::<f64>().powi(3));
    let opts = SolverOptions::default();

    let first = TermDocMatrix::new(batch(&mut rng, &topics, 20))?;
    let mut online = nmf_factorize(&first, 3, &opts)?;
    let mut all = first.into_inner();

    for t in 1..=4 {
        let u = batch(&mut rng, &topics, 10);
        all = concatenate(Axis(0), &[all.view(), u.view()]).expect("same columns");
        online = onmf_update(&online, &TermDocMatrix::new(u)?, &opts)?;

        let stacked = TermDocMatrix::new(all.clone())?;
        let refit = nmf_factorize(&stacked, 3, &opts)?;
        println!(
            "batch {t}: {} rows, RE online {:.4}, RE refit {:.4}",
            stacked.rows(),
            reconstruction_error(&stacked, &online)?,
            reconstruction_error(&stacked, &refit)?
        );
    }
    Ok(())
}
