use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::piece::{parse_byte_piece, WS_MARKER};
use crate::error::ModelError;

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const BOS_ID: u32 = 2;
pub const EOS_ID: u32 = 3;

/// Number of special pieces at the head of every vocabulary.
pub const SPECIAL_COUNT: usize = 4;

/// Number of pieces in the byte fallback block.
pub const BYTE_PIECE_COUNT: usize = 256;

/// Training and layout parameters. These travel with the model so that the
/// codec can reproduce the exact preprocessing used during training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainerConfig {
    pub vocabulary_size: usize,
    pub character_coverage: f64,
    pub split_digits: bool,
    pub add_dummy_prefix: bool,
    pub byte_fallback: bool,
    pub user_defined_symbols: Vec<String>,
    /// pad, unk, bos, eos, in that order.
    pub special_pieces: [String; SPECIAL_COUNT],
    pub max_ws_run: usize,
    pub max_piece_length: usize,
    pub seed: u64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            vocabulary_size: 64_000,
            character_coverage: 0.9999,
            split_digits: true,
            add_dummy_prefix: true,
            byte_fallback: true,
            user_defined_symbols: ["<|javascript|>", "<|python|>", "<|sql|>", "<|shell|>"]
                .map(String::from)
                .to_vec(),
            special_pieces: ["<pad>", "<unk>", "<s>", "<|endoftext|>"].map(String::from),
            max_ws_run: 24,
            max_piece_length: 16,
            seed: 0,
        }
    }
}

impl TrainerConfig {
    /// Size of the pieces that exist independently of the training data:
    /// specials, code tokens, byte pieces and whitespace runs.
    pub fn fixed_block_size(&self) -> usize {
        SPECIAL_COUNT
            + self.user_defined_symbols.len()
            + self.byte_piece_count()
            + self.whitespace_run_count()
    }

    pub fn byte_piece_count(&self) -> usize {
        if self.byte_fallback {
            BYTE_PIECE_COUNT
        } else {
            0
        }
    }

    pub fn whitespace_run_count(&self) -> usize {
        self.max_ws_run.saturating_sub(1)
    }

    /// Smallest vocabulary that leaves room for at least one learned piece
    /// on top of the fixed blocks and an alphabet of `alphabet_size`.
    pub fn minimum_vocabulary_size(&self, alphabet_size: usize) -> usize {
        self.fixed_block_size() + alphabet_size + 1
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |msg: String| Err(ModelError::Config(msg));
        if self.vocabulary_size == 0 {
            return fail("vocabulary_size must be positive".into());
        }
        if !(self.character_coverage > 0.0 && self.character_coverage <= 1.0) {
            return fail(format!(
                "character_coverage must lie in (0, 1], got {}",
                self.character_coverage
            ));
        }
        if self.max_ws_run == 0 {
            return fail("max_ws_run must be at least 1".into());
        }
        if self.max_piece_length < 2 {
            return fail("max_piece_length must be at least 2".into());
        }

        let mut seen = HashSet::new();
        for s in self.special_pieces.iter().chain(&self.user_defined_symbols) {
            if s.is_empty() {
                return fail("special pieces and user-defined symbols must be non-empty".into());
            }
            if !seen.insert(s.as_str()) {
                return fail(format!("duplicate reserved piece {s:?}"));
            }
            if parse_byte_piece(s).is_some() {
                return fail(format!("{s:?} collides with a byte fallback piece"));
            }
            if s.chars().all(|c| c == WS_MARKER) {
                return fail(format!("{s:?} collides with the whitespace marker pieces"));
            }
        }
        for s in &self.user_defined_symbols {
            if s.contains(' ') || s.contains(WS_MARKER) {
                return fail(format!("user-defined symbol {s:?} may not contain whitespace"));
            }
        }
        Ok(())
    }
}
