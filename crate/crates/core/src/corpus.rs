//! JSONL corpora, weighted sampling and language splits.
//!
//! A corpus file holds one JSON object per line with a required `text` field
//! and optional `lang` and `category` fields.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const UNKNOWN_TAG: &str = "unknown";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub text: String,
    #[serde(rename = "lang")]
    pub language: String,
    pub category: String,
}

impl Document {
    pub fn new(text: impl Into<String>, language: impl Into<String>) -> Self {
        Document {
            text: text.into(),
            language: language.into(),
            category: UNKNOWN_TAG.into(),
        }
    }
}

impl AsRef<str> for Document {
    fn as_ref(&self) -> &str {
        &self.text
    }
}

#[derive(Deserialize)]
struct Line {
    text: Option<String>,
    lang: Option<String>,
    category: Option<String>,
}

/// Streams documents from a JSONL file in file order. Per-line problems are
/// yielded as [`Error::CorpusLine`] and do not end the stream.
pub struct JsonlReader {
    path: PathBuf,
    lines: std::io::Split<BufReader<File>>,
    line: usize,
}

impl Iterator for JsonlReader {
    type Item = Result<Document>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let raw = match self.lines.next()? {
                Ok(raw) => raw,
                Err(e) => return Some(Err(Error::io(&self.path, e))),
            };
            self.line += 1;
            let line_err = |message: String| Error::CorpusLine {
                path: self.path.clone(),
                line: self.line,
                message,
            };
            let Ok(text) = std::str::from_utf8(&raw) else {
                return Some(Err(line_err("invalid UTF-8".into())));
            };
            if text.trim().is_empty() {
                continue;
            }
            let parsed: Line = match serde_json::from_str(text) {
                Ok(l) => l,
                Err(e) => return Some(Err(line_err(format!("malformed JSON: {e}")))),
            };
            let Some(text) = parsed.text else {
                return Some(Err(line_err(format!("missing text field, line {}", self.line))));
            };
            let tag = |t: Option<String>| t.filter(|s| !s.is_empty()).unwrap_or_else(|| UNKNOWN_TAG.into());
            return Some(Ok(Document {
                text,
                language: tag(parsed.lang),
                category: tag(parsed.category),
            }));
        }
    }
}

pub fn load_jsonl(path: impl AsRef<Path>) -> Result<JsonlReader> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(JsonlReader {
        path: path.to_path_buf(),
        lines: BufReader::new(file).split(b'\n'),
        line: 0,
    })
}

/// Reads a whole JSONL file. With `lenient`, bad lines are logged and skipped;
/// otherwise the first bad line is returned as the error.
pub fn read_jsonl(path: impl AsRef<Path>, lenient: bool) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    for item in load_jsonl(path)? {
        match item {
            Ok(doc) => docs.push(doc),
            Err(e @ Error::CorpusLine { .. }) if lenient => warn!("skipping {e}"),
            Err(e) => return Err(e),
        }
    }
    Ok(docs)
}

pub fn write_jsonl(path: impl AsRef<Path>, docs: &[Document]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for doc in docs {
        serde_json::to_writer(&mut out, doc)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub path: PathBuf,
    /// Overrides the documents' own tag when set.
    #[serde(default)]
    pub language: Option<String>,
    #[serde(default)]
    pub category: Option<String>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSpec {
    pub sources: Vec<SourceSpec>,
    pub sampling_fraction: f64,
    #[serde(default)]
    pub seed: u64,
}

impl CorpusSpec {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sampling_fraction > 0.0 && self.sampling_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "sampling_fraction must lie in (0, 1], got {}",
                self.sampling_fraction
            )));
        }
        for s in &self.sources {
            if !(s.weight >= 0.0 && s.weight.is_finite()) {
                return Err(Error::Config(format!(
                    "source {} has invalid weight {}",
                    s.path.display(),
                    s.weight
                )));
            }
        }
        if self.sources.iter().map(|s| s.weight).sum::<f64>() <= 0.0 {
            return Err(Error::Config("source weights must sum to a positive value".into()));
        }
        Ok(())
    }

    /// Inclusion probability for documents of source `i`.
    pub fn inclusion_probability(&self, i: usize) -> f64 {
        (self.sources[i].weight * self.sampling_fraction).min(1.0)
    }
}

/// Bernoulli-samples every document of every source with probability
/// `min(1, weight * sampling_fraction)`, calling `keep` for each included
/// document in (source, line) order. Each source draws from its own stream
/// of a generator seeded with `spec.seed`, so results are reproducible.
pub fn sample_weighted_each(
    spec: &CorpusSpec,
    lenient: bool,
    mut keep: impl FnMut(Document) -> Result<()>,
) -> Result<()> {
    spec.validate()?;
    for (i, source) in spec.sources.iter().enumerate() {
        let p = spec.inclusion_probability(i);
        if source.weight * spec.sampling_fraction > 1.0 {
            warn!(
                "{}: weight {} x fraction {} exceeds 1; every document is kept once",
                source.path.display(),
                source.weight,
                spec.sampling_fraction
            );
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(i as u64);
        for item in load_jsonl(&source.path)? {
            let mut doc = match item {
                Ok(doc) => doc,
                Err(e @ Error::CorpusLine { .. }) if lenient => {
                    warn!("skipping {e}");
                    continue;
                }
                Err(e) => return Err(e),
            };
            if rng.gen::<f64>() < p {
                if let Some(lang) = &source.language {
                    doc.language = lang.clone();
                }
                if let Some(cat) = &source.category {
                    doc.category = cat.clone();
                }
                keep(doc)?;
            }
        }
    }
    Ok(())
}

pub fn sample_weighted(spec: &CorpusSpec, lenient: bool) -> Result<Vec<Document>> {
    let mut out = Vec::new();
    sample_weighted_each(spec, lenient, |d| {
        out.push(d);
        Ok(())
    })?;
    Ok(out)
}

/// Partitions documents by language tag; keys come out sorted.
pub fn split_by_language(docs: impl IntoIterator<Item = Document>) -> BTreeMap<String, Vec<Document>> {
    let mut buckets: BTreeMap<String, Vec<Document>> = BTreeMap::new();
    for doc in docs {
        buckets.entry(doc.language.clone()).or_default().push(doc);
    }
    buckets
}
