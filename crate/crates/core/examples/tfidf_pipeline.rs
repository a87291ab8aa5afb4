//! From raw posts and headlines to a schedule of TF-IDF batches.
//!
//!     cargo run --example tfidf_pipeline

use chrono::{NaiveDate, TimeZone, Utc};
use topicbridge::textpipe::english_stopwords;
use topicbridge::{
    build_vocabulary, interleave_schedule, tfidf_matrix, tokenize, Document, Source,
};

fn doc(id: &str, source: Source, (y, m, d): (i32, u32, u32), text: &str) -> Document {
    Document {
        id: id.into(),
        source,
        timestamp: Utc.with_ymd_and_hms(y, m, d, 12, 0, 0).unwrap(),
        text: text.into(),
    }
}

fn main() -> topicbridge::Result<()> {
    println!(
        "{:?}",
        tokenize("RT @who: Masks WORK, see https://example.org #COVID19 (really)")
    );

    let online = vec![
        doc(
            "t1",
            Source::Online,
            (2021, 1, 3),
            "vaccine rollout starts, the queue is long",
        ),
        doc(
            "t2",
            Source::Online,
            (2021, 1, 9),
            "masks and vaccine questions",
        ),
        doc(
            "t3",
            Source::Online,
            (2021, 2, 2),
            "vaccine side effects thread",
        ),
    ];
    let offline = vec![
        doc(
            "n1",
            Source::Offline,
            (2021, 1, 5),
            "Vaccine rollout begins in care homes",
        ),
        doc(
            "n2",
            Source::Offline,
            (2021, 2, 11),
            "Mask mandate extended as vaccine supply grows",
        ),
    ];
    let all: Vec<Document> = online.iter().chain(&offline).cloned().collect();
    let vocab = build_vocabulary(&all, 1, 1.0, &english_stopwords())?;
    println!("vocabulary: {:?}", vocab.terms());

    let start = NaiveDate::from_ymd_opt(2021, 1, 1).unwrap();
    let end = NaiveDate::from_ymd_opt(2021, 3, 1).unwrap();
    let schedule = interleave_schedule(&online, &offline, start, end)?;
    for step in &schedule.steps {
        if step.is_empty() {
            println!("{:>2} {:<16} empty", step.time_index, step.label());
            continue;
        }
        let m = tfidf_matrix(&step.documents, &vocab)?;
        println!(
            "{:>2} {:<16} {} x {}",
            step.time_index,
            step.label(),
            m.rows(),
            m.cols()
        );
    }
    Ok(())
}
