use std::io::Write;
use std::path::{Path, PathBuf};

use lbpe::corpus::{read_jsonl, sample_weighted, split_by_language, write_jsonl, CorpusSpec, SourceSpec};
use lbpe::{Document, Error};

fn write_source(dir: &Path, name: &str, n: usize, lang: &str) -> PathBuf {
    let path = dir.join(name);
    let docs: Vec<Document> = (0..n).map(|i| Document::new(format!("{name} {i}"), lang)).collect();
    write_jsonl(&path, &docs).unwrap();
    path
}

fn source(path: PathBuf, weight: f64) -> SourceSpec {
    SourceSpec {
        path,
        language: None,
        category: None,
        weight,
    }
}

#[test]
fn one_percent_sample_is_binomial_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let n = 100_000;
    let path = write_source(dir.path(), "big.jsonl", n, "sv");
    let spec = CorpusSpec {
        sources: vec![source(path, 1.0)],
        sampling_fraction: 0.01,
        seed: 42,
    };
    let first = sample_weighted(&spec, false).unwrap();
    let (mean, sd) = (n as f64 * 0.01, (n as f64 * 0.01 * 0.99).sqrt());
    let k = first.len() as f64;
    assert!((k - mean).abs() <= 3.0 * sd, "{k} outside {mean} ± {}", 3.0 * sd);
    assert_eq!(first, sample_weighted(&spec, false).unwrap());

    let other_seed = CorpusSpec { seed: 43, ..spec };
    assert_ne!(first, sample_weighted(&other_seed, false).unwrap());
}

#[test]
fn source_shares_follow_weights() {
    let dir = tempfile::tempdir().unwrap();
    let n = 40_000;
    let a = write_source(dir.path(), "a.jsonl", n, "sv");
    let b = write_source(dir.path(), "b.jsonl", n, "da");
    let spec = CorpusSpec {
        sources: vec![source(a, 0.5), source(b, 2.0)],
        sampling_fraction: 0.05,
        seed: 1,
    };
    let sample = sample_weighted(&spec, false).unwrap();
    let buckets = split_by_language(sample);
    for (lang, p) in [("sv", 0.025), ("da", 0.1)] {
        let k = buckets[lang].len() as f64;
        let (mean, sd) = (n as f64 * p, (n as f64 * p * (1.0 - p)).sqrt());
        assert!((k - mean).abs() <= 3.0 * sd, "{lang}: {k} vs {mean}");
    }
}

#[test]
fn language_override_and_partition() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_source(dir.path(), "a.jsonl", 30, "sv");
    let b = write_source(dir.path(), "b.jsonl", 20, "sv");
    let mut sb = source(b, 1.0);
    sb.language = Some("is".into());
    sb.category = Some("forum".into());
    let spec = CorpusSpec {
        sources: vec![source(a, 1.0), sb],
        sampling_fraction: 1.0,
        seed: 0,
    };
    let sample = sample_weighted(&spec, false).unwrap();
    assert_eq!(sample.len(), 50);
    assert!(sample[30..].iter().all(|d| d.language == "is" && d.category == "forum"));
    let buckets = split_by_language(sample.clone());
    assert_eq!(buckets.keys().collect::<Vec<_>>(), ["is", "sv"]);
    assert_eq!(buckets.values().map(Vec::len).sum::<usize>(), sample.len());
}

#[test]
fn negative_weight_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_source(dir.path(), "a.jsonl", 3, "sv");
    let spec = CorpusSpec {
        sources: vec![source(a, -1.0)],
        sampling_fraction: 0.5,
        seed: 0,
    };
    assert!(matches!(sample_weighted(&spec, false), Err(Error::Config(_))));
}

#[test]
fn lenient_reading_skips_bad_lines() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mixed.jsonl");
    let mut f = std::fs::File::create(&path).unwrap();
    f.write_all(b"{\"text\":\"ok\",\"lang\":\"sv\"}\n{\"no_text\":1}\n\xff\xfe\n{\"text\":\"fine\"}\n")
        .unwrap();
    drop(f);

    let err = read_jsonl(&path, false).unwrap_err();
    assert!(err.to_string().contains("missing text field, line 2"), "{err}");
    let docs = read_jsonl(&path, true).unwrap();
    assert_eq!(docs.len(), 2);
    assert_eq!(docs[1].language, "unknown");
}

#[test]
fn spec_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("spec.json");
    std::fs::write(
        &path,
        r#"{"sources":[{"path":"a.jsonl","language":"sv","weight":0.5}],"sampling_fraction":0.002,"seed":9}"#,
    )
    .unwrap();
    let spec = CorpusSpec::from_json_file(&path).unwrap();
    assert_eq!(spec.sampling_fraction, 0.002);
    assert_eq!(spec.sources[0].language.as_deref(), Some("sv"));
    spec.validate().unwrap();
}
