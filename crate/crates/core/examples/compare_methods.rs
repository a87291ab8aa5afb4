//! JointONMF against the ONMF and SNMF baselines on a planted stream, with
//! recovery of the planted shared topics.
//!
//!     cargo run --release --example compare_methods [seed]

use std::collections::HashSet;

use ndarray::{Array2, ArrayView1};
use topicbridge::synth::SyntheticCorpus;
use topicbridge::{
    build_vocabulary, compare_methods, generate, interleave_schedule, JointParams, MethodKind,
};
use topicbridge::{Document, OfflineFields, Source, SynthConfig};

fn cosine(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.dot(&b) / (a.dot(&a).sqrt() * b.dot(&b).sqrt()).max(1e-300)
}

/// Mean cosine of the best pairing between two 2-row topic blocks.
fn recovery(common: &Array2<f64>, planted: &Array2<f64>) -> f64 {
    let straight = cosine(common.row(0), planted.row(0)) + cosine(common.row(1), planted.row(1));
    let crossed = cosine(common.row(0), planted.row(1)) + cosine(common.row(1), planted.row(0));
    straight.max(crossed) / 2.0
}

fn main() -> topicbridge::Result<()> {
    let seed = std::env::args()
        .nth(1)
        .map_or(7, |s| s.parse().expect("seed"));
    let corpus: SyntheticCorpus = generate(&SynthConfig {
        seed,
        ..SynthConfig::default()
    })?;
    let docs: Vec<Document> = corpus
        .records
        .iter()
        .map(|r| {
            r.to_document(&OfflineFields::default())
                .expect("valid record")
        })
        .collect();
    let vocab = build_vocabulary(&docs, 2, 0.95, &HashSet::new())?;
    let (online, offline): (Vec<_>, Vec<_>) =
        docs.into_iter().partition(|d| d.source == Source::Online);
    let start = corpus.config.start_month;
    let end = start + chrono::Months::new(corpus.config.months as u32 - 1);
    let schedule = interleave_schedule(&online, &offline, start, end)?;
    let planted = corpus.shared_in(&vocab);

    let table = compare_methods(
        &schedule,
        &MethodKind::ALL,
        &JointParams::default(),
        &vocab,
        5,
    )?;
    println!(
        "{:<10} {:>12} {:>9} {:>9} {:>9} {:>10}",
        "method", "CScore", "DScore", "RE", "secs/step", "recovered"
    );
    for (s, r) in table.summaries.iter().zip(&table.results) {
        let good = r
            .snapshots
            .iter()
            .filter(|snap| recovery(&snap.common, &planted) >= 0.8)
            .count();
        println!(
            "{:<10} {:>12.4e} {:>9.3} {:>9.3} {:>9.3} {:>6}/{}",
            s.method.name(),
            s.mean_cscore,
            s.mean_dscore,
            s.mean_re,
            s.mean_wall_clock,
            good,
            r.snapshots.len()
        );
    }

    let joint = table.result(MethodKind::JointONMF).expect("ran");
    if let Some(report) = joint.reports.last() {
        println!("\n{} common topics:", report.label);
        for topic in &report.common_topics {
            let words: Vec<&str> = topic.iter().map(|t| t.term.as_str()).collect();
            println!("  {}", words.join(" "));
        }
    }
    Ok(())
}
