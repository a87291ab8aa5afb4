//! The step metrics and topic pairing on hand-made topic matrices.
//!
//!     cargo run --example metrics_tour

use ndarray::array;
use topicbridge::metrics::DSCORE_EPSILON;
use topicbridge::{assign_common_topics, cscore, dscore, top_terms, Vocabulary};

fn main() -> topicbridge::Result<()> {
    let before = array![
        [0.9, 0.1, 0.0, 0.0],
        [0.0, 0.0, 0.8, 0.2],
        [0.1, 0.1, 0.1, 0.7]
    ];
    let after = array![
        [0.0, 0.1, 0.7, 0.2],
        [0.1, 0.0, 0.2, 0.7],
        [0.8, 0.2, 0.0, 0.0]
    ];

    let pairing = assign_common_topics(before.view(), after.view(), 2)?;
    println!("common pairs (before, after): {:?}", pairing.pairs);
    println!(
        "left over: before {:?}, after {:?}",
        pairing.distinct_prev, pairing.distinct_new
    );

    let rows = |m: &ndarray::Array2<f64>, idx: &[usize]| m.select(ndarray::Axis(0), idx);
    let (pc, nc): (Vec<_>, Vec<_>) = pairing.pairs.iter().copied().unzip();
    println!(
        "CScore {:.4}",
        cscore(rows(&before, &pc).view(), rows(&after, &nc).view())?
    );
    println!(
        "DScore {:.4}",
        dscore(
            rows(&before, &pairing.distinct_prev).view(),
            rows(&after, &pairing.distinct_new).view(),
            DSCORE_EPSILON
        )?
    );
    // Every row is compared with every row, so only a single topic (or
    // identical topics) scores zero against itself.
    let one = before.slice(ndarray::s![..1, ..]);
    println!(
        "DScore of one topic with itself: {}",
        dscore(one, one, DSCORE_EPSILON)?
    );
    println!(
        "DScore of three topics with themselves: {:.4}",
        dscore(before.view(), before.view(), DSCORE_EPSILON)?
    );

    let vocab = Vocabulary::from_terms(
        ["booster", "clinic", "mask", "school"]
            .map(String::from)
            .to_vec(),
    )?;
    println!(
        "top terms of after[1]: {:?}",
        top_terms(after.row(1), &vocab, 2)?
    );
    Ok(())
}
