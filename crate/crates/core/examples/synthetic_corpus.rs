//! Write a planted-topic corpus to disk and run the file-based pipeline on it,
//! the same path the `topicbridge run` command takes.
//!
//!     cargo run --release --example synthetic_corpus

use topicbridge::corpus::write_corpus;
use topicbridge::{generate, run_pipeline, MethodKind, RunConfig, SynthConfig};

fn main() -> topicbridge::Result<()> {
    let dir = std::env::temp_dir().join("topicbridge-synthetic-example");
    let corpus_path = dir.join("corpus.jsonl");
    let corpus = generate(&SynthConfig {
        months: 3,
        docs_per_source_month: 60,
        vocab_size: 200,
        ..SynthConfig::default()
    })?;
    write_corpus(&corpus_path, &corpus.records)?;
    println!(
        "{} records in {}",
        corpus.records.len(),
        corpus_path.display()
    );

    let run = run_pipeline(RunConfig {
        corpus_path: Some(corpus_path),
        methods: vec![MethodKind::JointONMF, MethodKind::SNMF],
        output_dir: dir.join("out"),
        ..RunConfig::default()
    })?;
    for path in [
        &run.files.metrics,
        &run.files.topics,
        &run.files.config,
        &run.files.timing,
    ] {
        println!("wrote {}", path.display());
    }
    print!(
        "{}",
        std::fs::read_to_string(&run.files.metrics).expect("just written")
    );
    Ok(())
}
