//! Comparisons between tokenizers: vocabulary overlap, cross-evaluation of
//! models against corpora, and vocabulary-size sweeps.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use log::{error, info};
use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{evaluate_corpus, EvalReport};
use crate::model::{PieceKind, TokenizerModel, TrainerConfig};
use crate::trainer::train_bpe;

fn learned_surfaces(model: &TokenizerModel) -> impl Iterator<Item = &str> {
    let v = model.vocabulary();
    v.block_pieces(PieceKind::Regular)
        .iter()
        .chain(v.block_pieces(PieceKind::SingleChar))
        .map(|p| p.surface.as_str())
}

/// Share of `a`'s regular and single-character pieces that also appear among
/// `b`'s. Structural blocks are left out on both sides. An empty block in `a`
/// counts as full overlap.
pub fn vocab_overlap(a: &TokenizerModel, b: &TokenizerModel) -> Ratio<usize> {
    let theirs: HashSet<&str> = learned_surfaces(b).collect();
    let (shared, total) = learned_surfaces(a).fold((0, 0), |(s, t), p| (s + theirs.contains(p) as usize, t + 1));
    if total == 0 {
        Ratio::from_integer(1)
    } else {
        Ratio::new(shared, total)
    }
}

pub fn overlap_f64(a: &TokenizerModel, b: &TokenizerModel) -> f64 {
    let r = vocab_overlap(a, b);
    *r.numer() as f64 / *r.denom() as f64
}

/// Labelled evaluation corpus.
#[derive(Debug, Clone)]
pub struct EvalSet<S> {
    pub label: String,
    pub docs: Vec<S>,
}

impl<S> EvalSet<S> {
    pub fn new(label: impl Into<String>, docs: Vec<S>) -> Self {
        EvalSet {
            label: label.into(),
            docs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossEvalMatrix {
    pub models: Vec<String>,
    pub corpora: Vec<String>,
    /// `cells[m][c]` evaluates model `m` on corpus `c`.
    pub cells: Vec<Vec<EvalReport>>,
}

impl CrossEvalMatrix {
    pub fn cell(&self, model: usize, corpus: usize) -> &EvalReport {
        &self.cells[model][corpus]
    }

    /// Index of the model with the lowest fertility on `corpus`; ties go to
    /// the lower index.
    pub fn best_model_for(&self, corpus: usize) -> Option<usize> {
        (0..self.models.len())
            .filter_map(|m| self.cells[m][corpus].fertility.map(|f| (m, f)))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .map(|(m, _)| m)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,corpus,fertility,continued_proportion,word_count,token_count,split_word_count\n");
        for (m, row) in self.cells.iter().enumerate() {
            for (c, r) in row.iter().enumerate() {
                csv_row(&mut out, &[&self.models[m], &self.corpora[c]], r);
            }
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_row(out: &mut String, keys: &[&str], r: &EvalReport) {
    for k in keys {
        out.push_str(&csv_field(k));
        out.push(',');
    }
    let _ = writeln!(
        out,
        "{},{},{},{},{}",
        opt(r.fertility),
        opt(r.continued_proportion),
        r.word_count,
        r.token_count,
        r.split_word_count
    );
}

/// Evaluates every model on every corpus. Cells are computed in parallel and
/// assembled by index.
pub fn cross_evaluate<S: AsRef<str> + Sync>(
    models: &[(String, TokenizerModel)],
    corpora: &[EvalSet<S>],
) -> CrossEvalMatrix {
    let cells = models
        .par_iter()
        .map(|(_, model)| {
            corpora
                .par_iter()
                .map(|set| evaluate_corpus(model, set.label.clone(), &set.docs))
                .collect()
        })
        .collect();
    CrossEvalMatrix {
        models: models.iter().map(|(l, _)| l.clone()).collect(),
        corpora: corpora.iter().map(|c| c.label.clone()).collect(),
        cells,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub vocabulary_size: usize,
    /// Size of the trained model; smaller than requested only when the
    /// corpus ran out of pairs.
    pub actual_size: usize,
    pub reports: Vec<EvalReport>,
    /// Reference label -> overlap(reference, swept model).
    pub overlaps: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Set when a training run failed; rows hold the sizes finished before it.
    pub aborted: Option<String>,
}

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("vocabulary_size,corpus,fertility,continued_proportion,word_count,token_count,split_word_count\n");
        for row in &self.rows {
            for r in &row.reports {
                csv_row(&mut out, &[&row.vocabulary_size.to_string(), &r.label], r);
            }
        }
        out
    }

    pub fn overlaps_csv(&self) -> String {
        let mut out = String::from("vocabulary_size,reference,overlap\n");
        for row in &self.rows {
            for (label, v) in &row.overlaps {
                let _ = writeln!(out, "{},{},{}", row.vocabulary_size, csv_field(label), v);
            }
        }
        out
    }
}

/// Trains one model per size on `train` with otherwise identical settings,
/// evaluates each on every evaluation set and measures how much of each
/// reference model's vocabulary it covers.
pub fn sweep_vocab_sizes<S: AsRef<str> + Sync, E: AsRef<str> + Sync>(
    train: &[S],
    eval: &[EvalSet<E>],
    sizes: &[usize],
    config: &TrainerConfig,
    references: &[(String, TokenizerModel)],
) -> Result<SweepReport> {
    if sizes.is_empty() {
        return Err(Error::Config("no vocabulary sizes given".into()));
    }
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(format!("sweep sizes must be strictly increasing: {sizes:?}")));
    }
    let mut report = SweepReport {
        rows: Vec::new(),
        aborted: None,
    };
    for &size in sizes {
        info!("sweep: training vocabulary size {size}");
        let cfg = TrainerConfig {
            vocabulary_size: size,
            ..config.clone()
        };
        let model = match train_bpe(train, &cfg) {
            Ok(m) => m,
            Err(e) => {
                error!("sweep aborted at size {size}: {e}");
                report.aborted = Some(format!("size {size}: {e}"));
                break;
            }
        };
        let reports = eval
            .iter()
            .map(|set| evaluate_corpus(&model, set.label.clone(), &set.docs))
            .collect();
        let overlaps = references
            .iter()
            .map(|(label, reference)| (label.clone(), overlap_f64(reference, &model)))
            .collect();
        report.rows.push(SweepRow {
            vocabulary_size: size,
            actual_size: model.vocab_size(),
            reports,
            overlaps,
        });
    }
    Ok(report)
}
