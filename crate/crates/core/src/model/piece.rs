use std::fmt;

use serde::{Deserialize, Serialize};

/// Stands in for a space inside piece surfaces.
pub const WS_MARKER: char = '\u{2581}';
pub const WS_MARKER_STR: &str = "\u{2581}";

/// Vocabulary blocks, listed in the order they appear in a vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PieceKind {
    Special,
    Code,
    ByteFallback,
    Regular,
    SingleChar,
    WhitespaceRun,
}

impl PieceKind {
    pub const ALL: [PieceKind; 6] = [
        PieceKind::Special,
        PieceKind::Code,
        PieceKind::ByteFallback,
        PieceKind::Regular,
        PieceKind::SingleChar,
        PieceKind::WhitespaceRun,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PieceKind::Special => "special",
            PieceKind::Code => "code",
            PieceKind::ByteFallback => "byte_fallback",
            PieceKind::Regular => "regular",
            PieceKind::SingleChar => "single_char",
            PieceKind::WhitespaceRun => "whitespace_run",
        }
    }
}

impl fmt::Display for PieceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Piece {
    pub surface: String,
    pub kind: PieceKind,
}

impl Piece {
    pub fn new(surface: impl Into<String>, kind: PieceKind) -> Self {
        Piece {
            surface: surface.into(),
            kind,
        }
    }

    pub fn char_len(&self) -> usize {
        self.surface.chars().count()
    }
}

impl fmt::Display for Piece {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.surface)
    }
}

/// Surface of the byte fallback piece for `byte`, e.g. `<0x0A>`.
pub fn byte_piece(byte: u8) -> String {
    format!("<0x{byte:02X}>")
}

/// Inverse of [`byte_piece`]; only the canonical uppercase form is accepted.
pub fn parse_byte_piece(surface: &str) -> Option<u8> {
    let hex = surface.strip_prefix("<0x")?.strip_suffix('>')?;
    if hex.len() != 2 || !hex.bytes().all(|b| b.is_ascii_digit() || (b'A'..=b'F').contains(&b)) {
        return None;
    }
    u8::from_str_radix(hex, 16).ok()
}

pub fn whitespace_run(len: usize) -> String {
    WS_MARKER_STR.repeat(len)
}
