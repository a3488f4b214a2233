mod common;

use std::collections::BTreeSet;

use miad_core::corpus::{
    build_embeddings, dataset_stats, make_aspect_groups, parse_semeval_str, Polarity, Split, Vocabulary, EMBEDDING_DIM, PAD, UNK,
};

#[test]
fn mini_fixture_parses_with_conflict_dropped() {
    let parsed = miad_core::corpus::parse_semeval_xml(&common::fixture_path("restaurant_mini.xml"), Split::Train).unwrap();
    assert_eq!(parsed.records.len(), 20);
    assert_eq!(parsed.warnings.conflict_dropped, 1);
    assert_eq!(parsed.warnings.offset_mismatch, 0);
    assert_eq!(parsed.warnings.unaligned, 0);
    let counts = dataset_stats(&parsed.records);
    assert_eq!(counts.total(), 35);

    let beer = parsed.records.iter().find(|r| r.text.starts_with("Great beer")).unwrap();
    assert_eq!(beer.aspects.len(), 2);
    assert_eq!(beer.aspects[0].term, "beer selection");
    assert_eq!((beer.aspects[0].tok_start, beer.aspects[0].tok_len), (1, 2));
    assert_eq!(beer.aspects[1].polarity, Polarity::Neutral);
}

#[test]
fn groups_partition_every_aspect() {
    let records = common::mini_records();
    let groups = make_aspect_groups(&records);
    assert_eq!(groups.len(), dataset_stats(&records).total());
    for g in &groups {
        assert_eq!(g.num_neighbors() + 1, g.sentence.aspects.len());
        assert!(!g.neighbor_indices().any(|i| i == g.target_index));
    }
}

#[test]
fn embedding_rows_match_file_exactly() {
    let records = common::mini_records();
    let file = common::write_embedding_file(&records, EMBEDDING_DIM, 3, &[]);
    let table = build_embeddings(&records, file.path(), 9).unwrap();
    let text = std::fs::read_to_string(file.path()).unwrap();
    let line = text.lines().find(|l| l.starts_with("food ")).unwrap();
    let want: Vec<f32> = line.split(' ').skip(1).map(|v| v.parse().unwrap()).collect();
    assert_eq!(table.vector("food"), want.as_slice());
    assert!(table.row(PAD).iter().all(|&v| v == 0.0));
    assert!(table.oov[UNK]);
    assert_eq!(table.stats.oov, 0);
}

#[test]
fn oov_rows_are_seeded_and_rate_matches_set_difference() {
    let records = common::mini_records();
    let skip = ["sushi", "tacos", "noodles", "the"];
    let file = common::write_embedding_file(&records, EMBEDDING_DIM, 3, &skip);
    let a = build_embeddings(&records, file.path(), 42).unwrap();
    let b = build_embeddings(&records, file.path(), 42).unwrap();
    let c = build_embeddings(&records, file.path(), 43).unwrap();
    assert_eq!(a.matrix, b.matrix);
    assert_ne!(a.vector("sushi"), c.vector("sushi"));
    assert!(a.vector("sushi").iter().all(|v| v.abs() <= 0.1));

    let corpus: BTreeSet<&str> = records.iter().flat_map(|r| r.tokens.iter().map(String::as_str)).collect();
    let covered: BTreeSet<&str> = corpus.iter().copied().filter(|t| !skip.contains(t)).collect();
    let expected = (corpus.len() - covered.len()) as f64 / corpus.len() as f64;
    assert_eq!(a.stats.oov_rate(), expected);
    assert_eq!(a.stats.oov, skip.len());
}

#[test]
fn lowercase_fallback_and_bad_lines() {
    let xml = r#"<sentences><sentence id="1"><text>Pho rocks</text>
        <aspectTerms><aspectTerm term="Pho" polarity="positive" from="0" to="3"/></aspectTerms></sentence></sentences>"#;
    let recs = parse_semeval_str(xml, "inline", Split::Train).unwrap().records;
    let mut f = tempfile::NamedTempFile::new().unwrap();
    use std::io::Write;
    let row = |x: f32| vec![x.to_string(); EMBEDDING_DIM].join(" ");
    writeln!(f, "PHO {}", row(0.5)).unwrap();
    writeln!(f, "rocks 1 2 3").unwrap();
    writeln!(f, "pho {}", row(0.25)).unwrap();
    f.flush().unwrap();
    let t = build_embeddings(&recs, f.path(), 1).unwrap();
    assert_eq!(t.vector("pho")[0], 0.25);
    assert_eq!(t.stats.bad_lines, 1);
    assert!(t.oov[t.vocab.row("rocks")]);
}

#[test]
fn vocabulary_is_deterministic() {
    let records = common::mini_records();
    let a = Vocabulary::from_records(&records);
    let b = Vocabulary::from_records(&records);
    assert_eq!(a, b);
    assert_eq!(a.tokens()[PAD], "<pad>");
    assert_eq!(a.row("never-seen-token"), UNK);
}
