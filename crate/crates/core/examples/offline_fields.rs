//! How much of each news article to use: titles only, or full bodies.
//! Longer offline text is easier to reconstruct.
//!
//!     cargo run --release --example offline_fields

use topicbridge::corpus::write_corpus;
use topicbridge::{generate, run_pipeline, MethodKind, RunConfig, SynthConfig};

fn main() -> topicbridge::Result<()> {
    let dir = std::env::temp_dir().join("topicbridge-offline-fields-example");
    let corpus_path = dir.join("corpus.jsonl");
    let corpus = generate(&SynthConfig {
        months: 3,
        docs_per_source_month: 80,
        vocab_size: 200,
        ..SynthConfig::default()
    })?;
    write_corpus(&corpus_path, &corpus.records)?;

    for fields in ["title", "summary", "body", "title+summary+body"] {
        let run = run_pipeline(RunConfig {
            corpus_path: Some(corpus_path.clone()),
            methods: vec![MethodKind::JointONMF],
            offline_fields: fields.parse()?,
            output_dir: dir.join(fields.replace('+', "_")),
            ..RunConfig::default()
        })?;
        let s = &run.table.summaries[0];
        println!(
            "{fields:<20} RE {:.3}  DScore {:.3}  CScore {:.3e}",
            s.mean_re, s.mean_dscore, s.mean_cscore
        );
    }
    Ok(())
}
