//! Fertility and proportion of continued words.
//!
//! Pieces are grouped into words: a word starts at a marker-initial piece and
//! extends over the continuation pieces that follow it. Punctuation-only
//! pieces and structural pieces (special, code, whitespace runs) are dropped
//! first. Continuations that precede the first word start of a document have
//! no word to belong to and are not counted.
//!
//! * fertility = counted pieces / words
//! * continued proportion = words with two or more pieces / words

use std::sync::LazyLock;

use num_rational::Ratio;
use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::model::{Piece, PieceKind, TokenId, TokenizerModel, WS_MARKER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PieceClass {
    WordStart,
    Continuation,
    PunctuationOnly,
    Structural,
}

static PUNCTUATION: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\p{P}+$").expect("valid regex"));

pub fn classify_piece(piece: &Piece) -> PieceClass {
    match piece.kind {
        PieceKind::Special | PieceKind::Code | PieceKind::WhitespaceRun => PieceClass::Structural,
        PieceKind::ByteFallback => PieceClass::Continuation,
        PieceKind::Regular | PieceKind::SingleChar => {
            let stripped = piece.surface.trim_start_matches(WS_MARKER);
            if PUNCTUATION.is_match(stripped) {
                PieceClass::PunctuationOnly
            } else if stripped.len() < piece.surface.len() {
                PieceClass::WordStart
            } else {
                PieceClass::Continuation
            }
        }
    }
}

/// Raw counts behind both metrics. Adding counts of two inputs gives the
/// counts of the pair evaluated as one corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PieceCounts {
    pub word_count: u64,
    pub token_count: u64,
    pub split_word_count: u64,
}

impl PieceCounts {
    pub fn from_classes(classes: impl IntoIterator<Item = PieceClass>) -> Self {
        let mut counts = PieceCounts::default();
        let mut run = 0u64;
        for class in classes {
            match class {
                PieceClass::WordStart => {
                    counts.close(run);
                    run = 1;
                }
                PieceClass::Continuation if run > 0 => run += 1,
                _ => {}
            }
        }
        counts.close(run);
        counts
    }

    pub fn from_pieces(pieces: &[Piece]) -> Self {
        Self::from_classes(pieces.iter().map(classify_piece))
    }

    fn close(&mut self, run: u64) {
        if run > 0 {
            self.word_count += 1;
            self.token_count += run;
            if run >= 2 {
                self.split_word_count += 1;
            }
        }
    }

    pub fn add(&mut self, other: PieceCounts) {
        self.word_count += other.word_count;
        self.token_count += other.token_count;
        self.split_word_count += other.split_word_count;
    }

    pub fn fertility(&self) -> Option<Ratio<u64>> {
        (self.word_count > 0).then(|| Ratio::new(self.token_count, self.word_count))
    }

    pub fn continued_proportion(&self) -> Option<Ratio<u64>> {
        (self.word_count > 0).then(|| Ratio::new(self.split_word_count, self.word_count))
    }
}

pub fn fertility(pieces: &[Piece]) -> Option<Ratio<u64>> {
    PieceCounts::from_pieces(pieces).fertility()
}

pub fn continued_proportion(pieces: &[Piece]) -> Option<Ratio<u64>> {
    PieceCounts::from_pieces(pieces).continued_proportion()
}

fn ratio_f64(r: Option<Ratio<u64>>) -> Option<f64> {
    r.map(|r| *r.numer() as f64 / *r.denom() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub label: String,
    pub fertility: Option<f64>,
    pub continued_proportion: Option<f64>,
    pub word_count: u64,
    pub token_count: u64,
    pub split_word_count: u64,
}

impl EvalReport {
    pub fn from_counts(label: impl Into<String>, counts: PieceCounts) -> Self {
        EvalReport {
            label: label.into(),
            fertility: ratio_f64(counts.fertility()),
            continued_proportion: ratio_f64(counts.continued_proportion()),
            word_count: counts.word_count,
            token_count: counts.token_count,
            split_word_count: counts.split_word_count,
        }
    }

    pub fn counts(&self) -> PieceCounts {
        PieceCounts {
            word_count: self.word_count,
            token_count: self.token_count,
            split_word_count: self.split_word_count,
        }
    }
}

/// Per-id classes for a model, so documents can be counted from ids.
pub fn piece_classes(model: &TokenizerModel) -> Vec<PieceClass> {
    model.vocabulary().pieces().iter().map(classify_piece).collect()
}

pub fn count_ids(classes: &[PieceClass], ids: &[TokenId]) -> PieceCounts {
    PieceCounts::from_classes(ids.iter().map(|&id| classes[id as usize]))
}

/// Encodes every document and aggregates counts over the whole corpus.
pub fn evaluate_corpus<S: AsRef<str> + Sync>(
    model: &TokenizerModel,
    label: impl Into<String>,
    docs: &[S],
) -> EvalReport {
    let classes = piece_classes(model);
    let counts = docs
        .par_iter()
        .map(|doc| count_ids(&classes, &model.encode_ids(doc.as_ref())))
        .reduce(PieceCounts::default, |mut a, b| {
            a.add(b);
            a
        });
    EvalReport::from_counts(label, counts)
}
