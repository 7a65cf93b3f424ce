//! Lossless text <-> token conversion.
//!
//! Encoding segments the text exactly as the trainer does, maps each
//! character to its single-character piece (or its UTF-8 byte pieces when it
//! is outside the vocabulary), and replays the merge rules in rank order
//! within each word. Decoding concatenates surfaces, reassembles byte runs,
//! turns markers back into spaces and drops the dummy prefix.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::model::{PieceKind, TokenId, TokenizerModel, BOS_ID, EOS_ID, UNK_ID, WS_MARKER};
use crate::segment::{segment, RawSym, Segment};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EncodedSequence {
    pub ids: Vec<TokenId>,
    pub pieces: Vec<String>,
}

impl EncodedSequence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DecodeMode {
    /// Invalid UTF-8 in byte pieces is an error.
    #[default]
    Strict,
    /// Invalid UTF-8 in byte pieces becomes U+FFFD.
    Lenient,
}

impl TokenizerModel {
    pub fn encode_ids(&self, text: &str) -> Vec<TokenId> {
        let mut ids = Vec::with_capacity(text.len() / 3 + 1);
        self.encode_into(text, &mut ids);
        ids
    }

    pub fn encode(&self, text: &str) -> EncodedSequence {
        let ids = self.encode_ids(text);
        let pieces = ids
            .iter()
            .map(|&id| self.vocabulary().pieces()[id as usize].surface.clone())
            .collect();
        EncodedSequence { ids, pieces }
    }

    pub fn encode_pieces(&self, text: &str) -> Vec<String> {
        self.encode(text).pieces
    }

    /// Encodes `text` and optionally wraps it in bos/eos. Special pieces are
    /// never produced from text itself; this is the only way to get them.
    pub fn encode_with_bounds(&self, text: &str, bos: bool, eos: bool) -> Vec<TokenId> {
        let mut ids = Vec::new();
        if bos {
            ids.push(BOS_ID);
        }
        self.encode_into(text, &mut ids);
        if eos {
            ids.push(EOS_ID);
        }
        ids
    }

    fn encode_into(&self, text: &str, out: &mut Vec<TokenId>) {
        let tables = &self.tables;
        let mut word: Vec<TokenId> = Vec::new();
        segment(text, self.config(), |seg| match seg {
            Segment::Run(n) => out.push(tables.runs[n - 2]),
            Segment::Protected(i) => out.push(tables.code[i]),
            Segment::Unit(raw) => {
                word.clear();
                for sym in raw {
                    self.initial_ids(sym, &mut word);
                }
                self.apply_merges(&mut word);
                out.extend_from_slice(&word);
            }
        });
    }

    fn initial_ids(&self, sym: RawSym, out: &mut Vec<TokenId>) {
        let tables = &self.tables;
        let push_byte = |b: u8, out: &mut Vec<TokenId>| match tables.byte_base {
            Some(base) => out.push(base + b as TokenId),
            None => {
                if out.last() != Some(&UNK_ID) {
                    out.push(UNK_ID)
                }
            }
        };
        match sym {
            RawSym::Char(c) => {
                if let Some(&id) = tables.chars.get(&c) {
                    out.push(id);
                } else if tables.byte_base.is_some() {
                    let mut buf = [0u8; 4];
                    for b in c.encode_utf8(&mut buf).bytes() {
                        push_byte(b, out);
                    }
                } else {
                    out.push(UNK_ID);
                }
            }
            RawSym::Byte(b) => push_byte(b, out),
        }
    }

    /// Applies merges lowest rank first, leftmost first among equal ranks.
    fn apply_merges(&self, ids: &mut Vec<TokenId>) {
        if ids.len() < 2 {
            return;
        }
        let table = &self.tables.merges;
        const DEAD: TokenId = TokenId::MAX;
        let n = ids.len();
        let mut next: Vec<usize> = (1..=n).collect();
        let mut prev: Vec<usize> = (0..n).map(|i| i.wrapping_sub(1)).collect();
        let mut heap = BinaryHeap::new();
        for i in 0..n - 1 {
            if let Some(&(rank, _)) = table.get(&(ids[i], ids[i + 1])) {
                heap.push(Reverse((rank, i)));
            }
        }
        while let Some(Reverse((rank, pos))) = heap.pop() {
            let right = next[pos];
            if ids[pos] == DEAD || right >= n {
                continue;
            }
            let Some(&(r, result)) = table.get(&(ids[pos], ids[right])) else {
                continue;
            };
            if r != rank {
                continue;
            }
            ids[pos] = result;
            ids[right] = DEAD;
            next[pos] = next[right];
            if next[pos] < n {
                prev[next[pos]] = pos;
            }
            let left = prev[pos];
            if left < n {
                if let Some(&(r, _)) = table.get(&(ids[left], ids[pos])) {
                    heap.push(Reverse((r, left)));
                }
            }
            if next[pos] < n {
                if let Some(&(r, _)) = table.get(&(ids[pos], ids[next[pos]])) {
                    heap.push(Reverse((r, pos)));
                }
            }
        }
        ids.retain(|&id| id != DEAD);
    }

    pub fn decode(&self, ids: &[TokenId]) -> Result<String> {
        self.decode_with(ids, DecodeMode::Strict)
    }

    pub fn decode_with(&self, ids: &[TokenId], mode: DecodeMode) -> Result<String> {
        let vocab = self.vocabulary();
        let mut text = String::new();
        let mut bytes: Vec<u8> = Vec::new();
        let mut byte_start = 0;

        let flush = |bytes: &mut Vec<u8>, text: &mut String, start: usize| -> Result<()> {
            if bytes.is_empty() {
                return Ok(());
            }
            match mode {
                DecodeMode::Strict => {
                    let s = std::str::from_utf8(bytes).map_err(|_| Error::InvalidUtf8 { position: start })?;
                    text.push_str(s);
                }
                DecodeMode::Lenient => text.push_str(&String::from_utf8_lossy(bytes)),
            }
            bytes.clear();
            Ok(())
        };

        for (pos, &id) in ids.iter().enumerate() {
            let piece = vocab.get(id).ok_or(Error::IdOutOfRange {
                id,
                size: vocab.len(),
            })?;
            if piece.kind == PieceKind::ByteFallback {
                if bytes.is_empty() {
                    byte_start = pos;
                }
                bytes.push((id - self.tables.byte_base.expect("byte block present")) as u8);
                continue;
            }
            flush(&mut bytes, &mut text, byte_start)?;
            match piece.kind {
                PieceKind::Special => {}
                PieceKind::Code => text.push_str(&piece.surface),
                _ => text.extend(piece.surface.chars().map(|c| if c == WS_MARKER { ' ' } else { c })),
            }
        }
        flush(&mut bytes, &mut text, byte_start)?;

        if self.config().add_dummy_prefix && text.starts_with(' ') {
            text.remove(0);
        }
        Ok(text)
    }
}
