//! Tokenizer model: configuration, the block-structured vocabulary and the
//! ranked merge rules.
//!
//! A vocabulary is laid out as contiguous blocks, always in this order:
//!
//! | block          | size                       |
//! |----------------|----------------------------|
//! | special        | 4 (`pad`, `unk`, `bos`, `eos`) |
//! | code           | one per user-defined symbol |
//! | byte fallback  | 256, or 0 without byte fallback |
//! | regular        | one per merge rule, in rank order |
//! | single char    | the retained alphabet      |
//! | whitespace run | `max_ws_run - 1` runs of 2..=`max_ws_run` markers |
//!
//! Ids are 0-based positions in this list. A [`TokenizerModel`] can only be
//! obtained through validation, so every instance satisfies the layout.

mod config;
mod io;
mod piece;

use std::collections::HashMap;
use std::ops::Range;

pub use config::{
    TrainerConfig, BOS_ID, BYTE_PIECE_COUNT, EOS_ID, PAD_ID, SPECIAL_COUNT, UNK_ID,
};
pub use io::{load_model, save_model, ModelFile, PieceEntry, MODEL_FORMAT_VERSION};
pub use piece::{byte_piece, parse_byte_piece, whitespace_run, Piece, PieceKind, WS_MARKER, WS_MARKER_STR};

use crate::error::{Error, ModelError, Result};

pub type TokenId = u32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergeRule {
    pub left: String,
    pub right: String,
    pub result: String,
    pub rank: usize,
}

/// Ordered list of pieces; a piece's id is its position.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    pieces: Vec<Piece>,
    index: HashMap<String, TokenId>,
    blocks: [Range<usize>; 6],
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn get(&self, id: TokenId) -> Option<&Piece> {
        self.pieces.get(id as usize)
    }

    pub fn id_of(&self, surface: &str) -> Option<TokenId> {
        self.index.get(surface).copied()
    }

    /// Id range occupied by the given block.
    pub fn block(&self, kind: PieceKind) -> Range<usize> {
        self.blocks[kind as usize].clone()
    }

    pub fn block_pieces(&self, kind: PieceKind) -> &[Piece] {
        &self.pieces[self.block(kind)]
    }
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.pieces == other.pieces
    }
}

/// Block counts of a vocabulary, as reported by [`TokenizerModel::layout`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LayoutSummary {
    pub special: usize,
    pub code: usize,
    pub byte_fallback: usize,
    pub regular: usize,
    pub single_char: usize,
    pub whitespace_run: usize,
}

impl LayoutSummary {
    pub fn total(&self) -> usize {
        self.special
            + self.code
            + self.byte_fallback
            + self.regular
            + self.single_char
            + self.whitespace_run
    }
}

/// A validated, immutable tokenizer.
#[derive(Debug, Clone)]
pub struct TokenizerModel {
    config: TrainerConfig,
    vocab: Vocabulary,
    merges: Vec<MergeRule>,
    pub(crate) tables: CodecTables,
}

/// Lookup tables derived from the vocabulary for encoding.
#[derive(Debug, Clone, Default)]
pub(crate) struct CodecTables {
    /// (left id, right id) -> (rank, result id)
    pub merges: HashMap<(TokenId, TokenId), (u32, TokenId)>,
    pub chars: HashMap<char, TokenId>,
    pub byte_base: Option<TokenId>,
    /// Indexed by run length - 2.
    pub runs: Vec<TokenId>,
    pub code: Vec<TokenId>,
}

impl PartialEq for TokenizerModel {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.vocab == other.vocab && self.merges == other.merges
    }
}

impl TokenizerModel {
    /// Validates the parts against every layout and merge invariant and
    /// builds the model. `merges` are (left, right) surfaces in rank order.
    pub fn from_parts(
        config: TrainerConfig,
        pieces: Vec<Piece>,
        merges: Vec<(String, String)>,
    ) -> Result<Self, ModelError> {
        config.validate()?;
        let blocks = check_layout(&config, &pieces)?;

        let mut index = HashMap::with_capacity(pieces.len());
        for (id, piece) in pieces.iter().enumerate() {
            if piece.surface.is_empty() {
                return Err(ModelError::EmptySurface(id));
            }
            if index.insert(piece.surface.clone(), id as TokenId).is_some() {
                return Err(ModelError::DuplicateSurface(piece.surface.clone()));
            }
        }
        let vocab = Vocabulary {
            pieces,
            index,
            blocks,
        };

        let merges = check_merges(&vocab, merges)?;

        if vocab.len() != config.vocabulary_size {
            return Err(ModelError::SizeMismatch {
                expected: config.vocabulary_size,
                found: vocab.len(),
            });
        }
        if vocab.len() % 128 != 0 {
            log::warn!(
                "vocabulary size {} is not divisible by 128",
                vocab.len()
            );
        }

        let tables = CodecTables::build(&config, &vocab, &merges);
        Ok(TokenizerModel {
            config,
            vocab,
            merges,
            tables,
        })
    }

    pub fn config(&self) -> &TrainerConfig {
        &self.config
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn merges(&self) -> &[MergeRule] {
        &self.merges
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn piece_to_id(&self, surface: &str) -> Option<TokenId> {
        self.vocab.id_of(surface)
    }

    pub fn id_to_piece(&self, id: TokenId) -> Result<&Piece> {
        self.vocab.get(id).ok_or(Error::IdOutOfRange {
            id,
            size: self.vocab.len(),
        })
    }

    pub fn layout(&self) -> LayoutSummary {
        let n = |k| self.vocab.block(k).len();
        LayoutSummary {
            special: n(PieceKind::Special),
            code: n(PieceKind::Code),
            byte_fallback: n(PieceKind::ByteFallback),
            regular: n(PieceKind::Regular),
            single_char: n(PieceKind::SingleChar),
            whitespace_run: n(PieceKind::WhitespaceRun),
        }
    }

    pub fn to_file(&self) -> ModelFile {
        ModelFile {
            version: MODEL_FORMAT_VERSION,
            config: self.config.clone(),
            pieces: self
                .vocab
                .pieces
                .iter()
                .map(|p| PieceEntry {
                    s: p.surface.clone(),
                    k: p.kind,
                })
                .collect(),
            merges: self
                .merges
                .iter()
                .map(|m| [m.left.clone(), m.right.clone()])
                .collect(),
        }
    }
}

fn check_layout(config: &TrainerConfig, pieces: &[Piece]) -> Result<[Range<usize>; 6], ModelError> {
    for (id, expected) in config.special_pieces.iter().enumerate() {
        match pieces.get(id) {
            Some(p) if p.surface == *expected && p.kind == PieceKind::Special => {}
            found => {
                return Err(ModelError::SpecialOrder {
                    id,
                    expected: expected.clone(),
                    found: found.map(|p| p.surface.clone()).unwrap_or_default(),
                })
            }
        }
    }

    let mut blocks: [Range<usize>; 6] = Default::default();
    let mut prev: Option<PieceKind> = None;
    let mut start = 0;
    for (id, piece) in pieces.iter().enumerate() {
        if let Some(p) = prev {
            if piece.kind < p {
                return Err(ModelError::BlockOrder {
                    id,
                    kind: piece.kind.name(),
                    previous: p.name(),
                });
            }
            if piece.kind != p {
                blocks[p as usize] = start..id;
                start = id;
            }
        }
        prev = Some(piece.kind);
    }
    if let Some(p) = prev {
        blocks[p as usize] = start..pieces.len();
    }
    // Empty blocks sit at the boundary where they would have started.
    let mut cursor = 0;
    for range in blocks.iter_mut() {
        if range.start >= range.end {
            *range = cursor..cursor;
        } else {
            cursor = range.end;
        }
    }

    let expect_size = |kind: PieceKind, expected: usize| {
        let found = blocks[kind as usize].len();
        if found == expected {
            Ok(())
        } else {
            Err(ModelError::BlockSize {
                block: kind.name(),
                expected,
                found,
            })
        }
    };
    expect_size(PieceKind::Special, SPECIAL_COUNT)?;
    expect_size(PieceKind::Code, config.user_defined_symbols.len())?;
    expect_size(PieceKind::ByteFallback, config.byte_piece_count())?;
    expect_size(PieceKind::WhitespaceRun, config.whitespace_run_count())?;

    let bad = |id: usize, kind: PieceKind, reason: String| ModelError::BadPiece {
        id,
        surface: pieces[id].surface.clone(),
        kind: kind.name(),
        reason,
    };

    for (i, id) in blocks[PieceKind::Code as usize].clone().enumerate() {
        if pieces[id].surface != config.user_defined_symbols[i] {
            return Err(bad(
                id,
                PieceKind::Code,
                format!("expected user symbol {:?}", config.user_defined_symbols[i]),
            ));
        }
    }
    for (b, id) in blocks[PieceKind::ByteFallback as usize].clone().enumerate() {
        if parse_byte_piece(&pieces[id].surface) != Some(b as u8) {
            return Err(bad(id, PieceKind::ByteFallback, format!("expected {}", byte_piece(b as u8))));
        }
    }
    for id in blocks[PieceKind::Regular as usize].clone() {
        let s = &pieces[id].surface;
        let len = s.chars().count();
        if len < 2 {
            return Err(bad(id, PieceKind::Regular, "regular pieces span at least two characters".into()));
        }
        if len > config.max_piece_length {
            return Err(bad(
                id,
                PieceKind::Regular,
                format!("longer than max_piece_length {}", config.max_piece_length),
            ));
        }
        if config.split_digits && s.chars().any(char::is_numeric) {
            return Err(bad(id, PieceKind::Regular, "contains a digit while split_digits is on".into()));
        }
        if parse_byte_piece(s).is_some() {
            return Err(bad(id, PieceKind::Regular, "shaped like a byte piece".into()));
        }
    }
    let mut has_marker = false;
    for id in blocks[PieceKind::SingleChar as usize].clone() {
        let mut chars = pieces[id].surface.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => has_marker |= c == WS_MARKER,
            _ => return Err(bad(id, PieceKind::SingleChar, "must be exactly one character".into())),
        }
    }
    if !has_marker {
        return Err(ModelError::Config(format!(
            "the whitespace marker {WS_MARKER_STR} must be a single-character piece"
        )));
    }
    for (i, id) in blocks[PieceKind::WhitespaceRun as usize].clone().enumerate() {
        if pieces[id].surface != whitespace_run(i + 2) {
            return Err(bad(
                id,
                PieceKind::WhitespaceRun,
                format!("expected a run of {} markers", i + 2),
            ));
        }
    }
    Ok(blocks)
}

fn check_merges(vocab: &Vocabulary, merges: Vec<(String, String)>) -> Result<Vec<MergeRule>, ModelError> {
    let regular = vocab.block(PieceKind::Regular);
    if merges.len() != regular.len() {
        return Err(ModelError::BlockSize {
            block: "merge list",
            expected: regular.len(),
            found: merges.len(),
        });
    }
    let single = vocab.block(PieceKind::SingleChar);
    let mut rules = Vec::with_capacity(merges.len());
    for (rank, (left, right)) in merges.into_iter().enumerate() {
        let fail = |reason: String| ModelError::Merge { rank, reason };
        let result = format!("{left}{right}");
        let expected = &vocab.pieces[regular.start + rank].surface;
        if &result != expected {
            return Err(fail(format!(
                "result {result:?} is not the regular piece {expected:?} at the same rank"
            )));
        }
        for operand in [&left, &right] {
            let id = vocab
                .id_of(operand)
                .ok_or_else(|| fail(format!("operand {operand:?} is not in the vocabulary")))?
                as usize;
            let learned_earlier = regular.contains(&id) && id < regular.start + rank;
            if !(single.contains(&id) || learned_earlier) {
                return Err(fail(format!(
                    "operand {operand:?} is neither a single character nor an earlier merge result"
                )));
            }
        }
        rules.push(MergeRule {
            left,
            right,
            result,
            rank,
        });
    }
    Ok(rules)
}

impl CodecTables {
    fn build(config: &TrainerConfig, vocab: &Vocabulary, merges: &[MergeRule]) -> Self {
        let id = |s: &str| vocab.id_of(s).expect("validated vocabulary");
        let merges = merges
            .iter()
            .map(|m| ((id(&m.left), id(&m.right)), (m.rank as u32, id(&m.result))))
            .collect();
        let chars = vocab
            .block(PieceKind::SingleChar)
            .map(|i| {
                let c = vocab.pieces[i].surface.chars().next().expect("non-empty");
                (c, i as TokenId)
            })
            .collect();
        let byte_base = config
            .byte_fallback
            .then(|| vocab.block(PieceKind::ByteFallback).start as TokenId);
        CodecTables {
            merges,
            chars,
            byte_base,
            runs: vocab.block(PieceKind::WhitespaceRun).map(|i| i as TokenId).collect(),
            code: vocab.block(PieceKind::Code).map(|i| i as TokenId).collect(),
        }
    }
}
