//! Text segmentation shared by the trainer and the codec.
//!
//! Raw text is cut into segments before any merging happens:
//!
//! * user-defined symbols, matched greedily (longest first) on the raw text;
//! * runs of two or more spaces, which become whitespace-run pieces;
//! * word units: an optional leading marker followed by non-space characters;
//! * digits, each a unit of its own when `split_digits` is on.
//!
//! Only U+0020 maps to the marker. A literal U+2581 in the input is emitted
//! as its UTF-8 bytes so it cannot be confused with an encoded space.

use crate::model::{TrainerConfig, WS_MARKER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub(crate) enum RawSym {
    Char(char),
    Byte(u8),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Segment {
    Unit(Vec<RawSym>),
    /// Run of this many markers, 2..=max_ws_run.
    Run(usize),
    /// Index into `user_defined_symbols`.
    Protected(usize),
}

pub(crate) fn is_digit(c: char) -> bool {
    c.is_numeric()
}

/// Longest user symbol that starts `text`; ties go to the earlier symbol.
fn match_user_symbol(text: &str, symbols: &[String]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, s) in symbols.iter().enumerate() {
        if text.starts_with(s.as_str()) && best.is_none_or(|b| symbols[b].len() < s.len()) {
            best = Some(i);
        }
    }
    best
}

struct Segmenter<'a, F: FnMut(Segment)> {
    config: &'a TrainerConfig,
    emit: F,
    word: Vec<RawSym>,
    markers: usize,
}

impl<F: FnMut(Segment)> Segmenter<'_, F> {
    fn flush_word(&mut self) {
        if !self.word.is_empty() {
            (self.emit)(Segment::Unit(std::mem::take(&mut self.word)));
        }
    }

    /// Emits pending markers. With `attach`, a single leftover marker opens
    /// the next word instead of standing alone.
    fn flush_markers(&mut self, attach: bool) {
        let mut k = std::mem::take(&mut self.markers);
        if k == 0 {
            return;
        }
        let max = self.config.max_ws_run;
        if max >= 2 {
            while k >= 2 {
                let len = k.min(max);
                (self.emit)(Segment::Run(len));
                k -= len;
            }
        } else {
            while k >= 2 {
                (self.emit)(Segment::Unit(vec![RawSym::Char(WS_MARKER)]));
                k -= 1;
            }
        }
        if k == 1 {
            if attach {
                self.word.push(RawSym::Char(WS_MARKER));
            } else {
                (self.emit)(Segment::Unit(vec![RawSym::Char(WS_MARKER)]));
            }
        }
    }

    fn space(&mut self) {
        self.flush_word();
        self.markers += 1;
    }

    fn standalone(&mut self, seg: Segment) {
        self.flush_word();
        self.flush_markers(false);
        (self.emit)(seg);
    }

    fn char(&mut self, c: char) {
        if self.config.split_digits && is_digit(c) {
            self.standalone(Segment::Unit(vec![RawSym::Char(c)]));
            return;
        }
        self.flush_markers(true);
        if c == WS_MARKER {
            let mut buf = [0u8; 4];
            self.word
                .extend(c.encode_utf8(&mut buf).bytes().map(RawSym::Byte));
        } else {
            self.word.push(RawSym::Char(c));
        }
    }

    fn finish(mut self) {
        self.flush_word();
        self.flush_markers(false);
    }
}

/// Segments `text`, calling `emit` for each segment in order.
pub(crate) fn segment(text: &str, config: &TrainerConfig, emit: impl FnMut(Segment)) {
    let mut seg = Segmenter {
        config,
        emit,
        word: Vec::new(),
        markers: 0,
    };
    if config.add_dummy_prefix {
        seg.space();
    }
    let symbols = &config.user_defined_symbols;
    let mut rest = text;
    while let Some(c) = rest.chars().next() {
        if !symbols.is_empty() {
            if let Some(i) = match_user_symbol(rest, symbols) {
                seg.standalone(Segment::Protected(i));
                rest = &rest[symbols[i].len()..];
                continue;
            }
        }
        if c == ' ' {
            seg.space();
        } else {
            seg.char(c);
        }
        rest = &rest[c.len_utf8()..];
    }
    seg.finish();
}

#[cfg(test)]
pub(crate) fn segments(text: &str, config: &TrainerConfig) -> Vec<Segment> {
    let mut out = Vec::new();
    segment(text, config, |s| out.push(s));
    out
}
