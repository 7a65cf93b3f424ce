//! BPE training.
//!
//! Documents are segmented (see [`crate::segment`]) into word units, which
//! are deduplicated and weighted by frequency. The character alphabet is cut
//! down to the requested coverage, everything outside it is spelled with
//! byte pieces, and then the most frequent adjacent pair is merged until the
//! vocabulary is full. Finally the last-learned pieces are swapped for
//! whitespace runs.
//!
//! Pair selection rules:
//! * highest count wins; ties go to the lexicographically smallest
//!   `(left, right)` surface pair;
//! * digits (with `split_digits`), byte pieces and `<unk>` never merge;
//! * a merge whose result would exceed `max_piece_length` characters, or whose
//!   result surface already exists in the vocabulary, is skipped.

use std::cmp::Ordering;
use std::collections::hash_map::Entry;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::sync::Arc;

use log::{debug, info, warn};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{
    byte_piece, whitespace_run, Piece, PieceKind, TokenizerModel, TrainerConfig, UNK_ID,
    WS_MARKER,
};
use crate::segment::{is_digit, segment, RawSym, Segment};

/// Atomic symbol of a word unit before any merge.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Symbol {
    Char(char),
    Byte(u8),
    /// A user-defined symbol; always a unit on its own.
    Protected(String),
    /// Character outside the alphabet with byte fallback disabled.
    Unknown,
}

impl Symbol {
    pub fn surface(&self, config: &TrainerConfig) -> String {
        match self {
            Symbol::Char(c) => c.to_string(),
            Symbol::Byte(b) => byte_piece(*b),
            Symbol::Protected(s) => s.clone(),
            Symbol::Unknown => config.special_pieces[UNK_ID as usize].clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordUnit {
    pub symbols: Vec<Symbol>,
    pub frequency: u64,
}

/// Most frequent characters whose cumulative share of all character
/// occurrences reaches `coverage`. Characters tied with the last one needed
/// are all kept. Ordered by descending frequency, then code point.
pub fn compute_coverage_alphabet<'a>(
    texts: impl IntoIterator<Item = &'a str>,
    coverage: f64,
) -> Vec<char> {
    let mut counts: HashMap<char, u64> = HashMap::new();
    for text in texts {
        for c in text.chars() {
            *counts.entry(c).or_default() += 1;
        }
    }
    select_alphabet(&counts, coverage)
}

fn select_alphabet(counts: &HashMap<char, u64>, coverage: f64) -> Vec<char> {
    let mut by_freq: Vec<(char, u64)> = counts.iter().map(|(&c, &n)| (c, n)).collect();
    by_freq.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let total: u64 = by_freq.iter().map(|(_, n)| n).sum();

    let mut kept = Vec::new();
    let mut covered = 0u64;
    let mut cutoff: Option<u64> = None;
    for (c, n) in by_freq {
        match cutoff {
            Some(last) if n < last => break,
            Some(_) => {}
            None => {
                covered += n;
                if covered as f64 / total as f64 >= coverage {
                    cutoff = Some(n);
                }
            }
        }
        kept.push(c);
    }
    kept
}

/// Splits `text` into word units. Characters outside `alphabet` (when given)
/// are replaced by their UTF-8 byte pieces, or by `<unk>` without byte
/// fallback. Whitespace runs are not word units and are left out.
pub fn pretokenize(
    text: &str,
    config: &TrainerConfig,
    alphabet: Option<&HashSet<char>>,
) -> Vec<WordUnit> {
    let mut units: Vec<WordUnit> = Vec::new();
    let mut seen: HashMap<Vec<Symbol>, usize> = HashMap::new();
    let mut push = |symbols: Vec<Symbol>| match seen.entry(symbols) {
        Entry::Occupied(e) => units[*e.get()].frequency += 1,
        Entry::Vacant(e) => {
            units.push(WordUnit {
                symbols: e.key().clone(),
                frequency: 1,
            });
            e.insert(units.len() - 1);
        }
    };
    segment(text, config, |seg| match seg {
        Segment::Unit(raw) => {
            let mut symbols = Vec::with_capacity(raw.len());
            for sym in raw {
                expand_raw(sym, config, alphabet, &mut symbols);
            }
            push(symbols);
        }
        Segment::Protected(i) => push(vec![Symbol::Protected(
            config.user_defined_symbols[i].clone(),
        )]),
        Segment::Run(_) => {}
    });
    units
}

fn expand_raw(
    sym: RawSym,
    config: &TrainerConfig,
    alphabet: Option<&HashSet<char>>,
    out: &mut Vec<Symbol>,
) {
    let fallback = |b: u8| {
        if config.byte_fallback {
            Symbol::Byte(b)
        } else {
            Symbol::Unknown
        }
    };
    match sym {
        RawSym::Char(c) if alphabet.is_none_or(|a| a.contains(&c)) => out.push(Symbol::Char(c)),
        RawSym::Char(c) => {
            if config.byte_fallback {
                let mut buf = [0u8; 4];
                out.extend(c.encode_utf8(&mut buf).bytes().map(Symbol::Byte));
            } else {
                out.push(Symbol::Unknown);
            }
        }
        RawSym::Byte(b) => {
            // Escaped bytes of one literal marker collapse to one <unk>.
            let s = fallback(b);
            if !(s == Symbol::Unknown && out.last() == Some(&Symbol::Unknown)) {
                out.push(s);
            }
        }
    }
}

/// Learned alphabet and merges before whitespace runs are installed. The
/// config's `vocabulary_size` counts the merges as regular pieces.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnedVocabulary {
    pub config: TrainerConfig,
    /// Alphabet in vocabulary order.
    pub alphabet: Vec<char>,
    /// (left, right) surfaces in rank order.
    pub merges: Vec<(String, String)>,
}

impl LearnedVocabulary {
    fn assemble(&self, merges: &[(String, String)], vocabulary_size: usize) -> Result<TokenizerModel> {
        let config = TrainerConfig {
            vocabulary_size,
            ..self.config.clone()
        };
        let mut pieces: Vec<Piece> = config
            .special_pieces
            .iter()
            .map(|s| Piece::new(s.clone(), PieceKind::Special))
            .collect();
        pieces.extend(
            config
                .user_defined_symbols
                .iter()
                .map(|s| Piece::new(s.clone(), PieceKind::Code)),
        );
        if config.byte_fallback {
            pieces.extend((0..=255u8).map(|b| Piece::new(byte_piece(b), PieceKind::ByteFallback)));
        }
        pieces.extend(
            merges
                .iter()
                .map(|(l, r)| Piece::new(format!("{l}{r}"), PieceKind::Regular)),
        );
        pieces.extend(
            self.alphabet
                .iter()
                .map(|c| Piece::new(c.to_string(), PieceKind::SingleChar)),
        );
        pieces.extend(
            (2..=config.max_ws_run).map(|n| Piece::new(whitespace_run(n), PieceKind::WhitespaceRun)),
        );
        Ok(TokenizerModel::from_parts(config, pieces, merges.to_vec())?)
    }
}

/// Replaces the last `max_ws_run - 1` learned pieces (and their merges) with
/// whitespace runs of 2..=`max_ws_run` markers. The vocabulary size does not
/// change.
pub fn whitespace_surgery(learned: LearnedVocabulary) -> Result<TokenizerModel> {
    let runs = learned.config.whitespace_run_count();
    let available = learned.merges.len();
    if available < runs {
        return Err(Error::InsufficientRegularPieces {
            needed: runs,
            available,
        });
    }
    learned.assemble(&learned.merges[..available - runs], learned.config.vocabulary_size)
}

/// Everything the trainer learned, for inspection and testing.
#[derive(Debug, Clone)]
pub struct TrainingOutput {
    pub model: TokenizerModel,
    /// Vocabulary before whitespace surgery.
    pub learned: LearnedVocabulary,
    /// Pair count at selection time, one per learned merge.
    pub merge_counts: Vec<u64>,
    /// Final symbol surfaces of every multi-symbol training word, before
    /// surgery, with frequencies.
    pub final_words: Vec<(Vec<String>, u64)>,
}

#[derive(Debug, Clone)]
pub struct Trainer {
    config: TrainerConfig,
    verify_counts: bool,
}

impl Trainer {
    pub fn new(config: TrainerConfig) -> Self {
        Trainer {
            config,
            verify_counts: false,
        }
    }

    /// Recount every selected pair from scratch and fail on a mismatch.
    /// Quadratic; meant for tests on small corpora.
    pub fn verify_counts(mut self, on: bool) -> Self {
        self.verify_counts = on;
        self
    }

    pub fn config(&self) -> &TrainerConfig {
        &self.config
    }

    pub fn train<S: AsRef<str> + Sync>(&self, docs: &[S]) -> Result<TokenizerModel> {
        Ok(self.train_detailed(docs)?.model)
    }

    pub fn train_detailed<S: AsRef<str> + Sync>(&self, docs: &[S]) -> Result<TrainingOutput> {
        let config = &self.config;
        config.validate()?;
        if docs.is_empty() {
            return Err(Error::EmptyCorpus);
        }

        let stats = CorpusStats::collect(docs, config);
        let alphabet = stats.alphabet(config);
        let minimum = config.minimum_vocabulary_size(alphabet.len());
        if config.vocabulary_size < minimum {
            return Err(Error::VocabularyTooSmall {
                requested: config.vocabulary_size,
                minimum,
            });
        }
        // Regular slots, including the ones later given to whitespace runs.
        let target = config.vocabulary_size - minimum + 1 + config.whitespace_run_count();
        info!(
            "{} distinct word units, alphabet of {} characters, learning up to {} merges",
            stats.units.len(),
            alphabet.len(),
            target
        );

        let mut state = MergeState::new(&stats, &alphabet, config);
        let learned_pairs = state.learn(target, config.max_piece_length, self.verify_counts)?;

        let merge_counts = learned_pairs.iter().map(|l| l.count).collect();
        let merges: Vec<(String, String)> = learned_pairs
            .iter()
            .map(|l| {
                (
                    state.symbols.surface(l.pair.0).to_string(),
                    state.symbols.surface(l.pair.1).to_string(),
                )
            })
            .collect();
        let final_words = state
            .words
            .iter()
            .map(|w| {
                let syms = w.syms.iter().map(|&s| state.symbols.surface(s).to_string()).collect();
                (syms, w.freq)
            })
            .collect();

        let fixed = config.fixed_block_size() - config.whitespace_run_count();
        let learned = LearnedVocabulary {
            config: TrainerConfig {
                vocabulary_size: fixed + alphabet.len() + merges.len(),
                ..config.clone()
            },
            alphabet,
            merges,
        };

        let model = if learned.merges.len() == target {
            whitespace_surgery(learned.clone())?
        } else {
            // Ran out of pairs: the free slots absorb the whitespace runs first.
            let keep = learned.merges.len().min(target - config.whitespace_run_count());
            let size = config.fixed_block_size() + learned.alphabet.len() + keep;
            if size < config.vocabulary_size {
                warn!(
                    "corpus supports only {} merges; vocabulary shrinks from {} to {}",
                    learned.merges.len(),
                    config.vocabulary_size,
                    size
                );
            } else {
                info!(
                    "corpus supports only {} merges; whitespace runs fill the remaining slots",
                    learned.merges.len()
                );
            }
            learned.assemble(&learned.merges[..keep], size)?
        };

        Ok(TrainingOutput {
            model,
            learned,
            merge_counts,
            final_words,
        })
    }
}

/// Trains a model with default trainer options.
pub fn train_bpe<S: AsRef<str> + Sync>(docs: &[S], config: &TrainerConfig) -> Result<TokenizerModel> {
    Trainer::new(config.clone()).train(docs)
}

struct CorpusStats {
    units: HashMap<Vec<RawSym>, u64>,
    run_markers: u64,
}

impl CorpusStats {
    fn collect<S: AsRef<str> + Sync>(docs: &[S], config: &TrainerConfig) -> Self {
        let (units, run_markers) = docs
            .par_iter()
            .fold(
                || (HashMap::new(), 0u64),
                |(mut units, mut runs), doc| {
                    segment(doc.as_ref(), config, |seg| match seg {
                        Segment::Unit(raw) => *units.entry(raw).or_insert(0u64) += 1,
                        Segment::Run(n) => runs += n as u64,
                        Segment::Protected(_) => {}
                    });
                    (units, runs)
                },
            )
            .reduce(
                || (HashMap::new(), 0),
                |(a, ra), (b, rb)| {
                    if a.len() < b.len() {
                        return merge_counts(b, a, rb + ra);
                    }
                    merge_counts(a, b, ra + rb)
                },
            );

        fn merge_counts(
            mut into: HashMap<Vec<RawSym>, u64>,
            from: HashMap<Vec<RawSym>, u64>,
            runs: u64,
        ) -> (HashMap<Vec<RawSym>, u64>, u64) {
            for (k, v) in from {
                *into.entry(k).or_insert(0) += v;
            }
            (into, runs)
        }

        CorpusStats { units, run_markers }
    }

    /// Coverage alphabet over spaces-as-markers text; the marker is always kept.
    fn alphabet(&self, config: &TrainerConfig) -> Vec<char> {
        let mut counts: HashMap<char, u64> = HashMap::new();
        for (unit, &freq) in &self.units {
            for sym in unit {
                if let RawSym::Char(c) = sym {
                    *counts.entry(*c).or_default() += freq;
                }
            }
        }
        if self.run_markers > 0 {
            *counts.entry(WS_MARKER).or_default() += self.run_markers;
        }
        let mut alphabet = select_alphabet(&counts, config.character_coverage);
        if !alphabet.contains(&WS_MARKER) {
            alphabet.push(WS_MARKER);
        }
        alphabet
    }
}

type Pair = (u32, u32);

#[derive(Default)]
struct SymbolTable {
    surfaces: Vec<Arc<str>>,
    mergeable: Vec<bool>,
    char_len: Vec<usize>,
    ids: HashMap<Arc<str>, u32>,
}

impl SymbolTable {
    fn intern(&mut self, surface: &str, mergeable: bool) -> u32 {
        if let Some(&id) = self.ids.get(surface) {
            return id;
        }
        let id = self.surfaces.len() as u32;
        let s: Arc<str> = Arc::from(surface);
        self.surfaces.push(s.clone());
        self.mergeable.push(mergeable);
        self.char_len.push(surface.chars().count());
        self.ids.insert(s, id);
        id
    }

    fn surface(&self, id: u32) -> &str {
        &self.surfaces[id as usize]
    }

    fn pairable(&self, pair: Pair) -> bool {
        self.mergeable[pair.0 as usize] && self.mergeable[pair.1 as usize]
    }
}

struct Word {
    syms: Vec<u32>,
    freq: u64,
}

impl Word {
    /// Merges every non-overlapping occurrence of `pair`, left to right, into
    /// `new`. Returns unit count changes for neighbouring pairs (the merged
    /// pair included).
    fn merge(&mut self, pair: Pair, new: u32, table: &SymbolTable) -> Vec<(Pair, i64)> {
        let (a, b) = pair;
        let mut changes = Vec::new();
        let mut i = 0;
        while i + 1 < self.syms.len() {
            if self.syms[i] == a && self.syms[i + 1] == b {
                if i > 0 {
                    let prev = self.syms[i - 1];
                    if table.mergeable[prev as usize] {
                        changes.push(((prev, a), -1));
                        changes.push(((prev, new), 1));
                    }
                }
                changes.push((pair, -1));
                if let Some(&next) = self.syms.get(i + 2) {
                    if table.mergeable[next as usize] {
                        changes.push(((b, next), -1));
                        changes.push(((new, next), 1));
                    }
                }
                self.syms[i] = new;
                self.syms.remove(i + 1);
            }
            i += 1;
        }
        changes
    }
}

#[derive(Debug, Clone, Copy)]
struct LearnedPair {
    pair: Pair,
    count: u64,
}

struct HeapEntry {
    count: u64,
    left: Arc<str>,
    right: Arc<str>,
    pair: Pair,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry {
    // Max-heap: higher count first, then the smaller surface pair.
    fn cmp(&self, other: &Self) -> Ordering {
        self.count.cmp(&other.count).then_with(|| {
            (&*other.left, &*other.right).cmp(&(&*self.left, &*self.right))
        })
    }
}

struct MergeState {
    symbols: SymbolTable,
    words: Vec<Word>,
    /// Surfaces that may not be produced again by a merge.
    taken: HashSet<String>,
}

impl MergeState {
    fn new(stats: &CorpusStats, alphabet: &[char], config: &TrainerConfig) -> Self {
        let alphabet_set: HashSet<char> = alphabet.iter().copied().collect();
        let mut symbols = SymbolTable::default();
        let mut units: Vec<(&Vec<RawSym>, u64)> = stats.units.iter().map(|(k, &v)| (k, v)).collect();
        units.sort_unstable();

        let mut words = Vec::new();
        let mut buf = Vec::new();
        for (raw, freq) in units {
            buf.clear();
            for &sym in raw {
                expand_raw(sym, config, Some(&alphabet_set), &mut buf);
            }
            if buf.len() < 2 {
                continue;
            }
            let syms = buf
                .iter()
                .map(|s| {
                    let mergeable = match s {
                        Symbol::Char(c) => !(config.split_digits && is_digit(*c)),
                        _ => false,
                    };
                    symbols.intern(&s.surface(config), mergeable)
                })
                .collect();
            words.push(Word { syms, freq });
        }

        let mut taken: HashSet<String> = config
            .special_pieces
            .iter()
            .chain(&config.user_defined_symbols)
            .cloned()
            .collect();
        if config.byte_fallback {
            taken.extend((0..=255u8).map(byte_piece));
        }
        taken.extend((2..=config.max_ws_run).map(whitespace_run));
        taken.extend(alphabet.iter().map(|c| c.to_string()));

        MergeState {
            symbols,
            words,
            taken,
        }
    }

    fn initial_counts(&self) -> (HashMap<Pair, i64>, HashMap<Pair, HashSet<u32>>) {
        let table = &self.symbols;
        self.words
            .par_iter()
            .enumerate()
            .fold(
                || (HashMap::new(), HashMap::new()),
                |(mut counts, mut wheres): (HashMap<Pair, i64>, HashMap<Pair, HashSet<u32>>), (i, w)| {
                    for pair in w.syms.windows(2).map(|p| (p[0], p[1])) {
                        if table.pairable(pair) {
                            *counts.entry(pair).or_default() += w.freq as i64;
                            wheres.entry(pair).or_default().insert(i as u32);
                        }
                    }
                    (counts, wheres)
                },
            )
            .reduce(
                || (HashMap::new(), HashMap::new()),
                |(mut c1, mut w1), (c2, w2)| {
                    for (k, v) in c2 {
                        *c1.entry(k).or_default() += v;
                    }
                    for (k, v) in w2 {
                        w1.entry(k).or_default().extend(v);
                    }
                    (c1, w1)
                },
            )
    }

    fn entry(&self, pair: Pair, count: u64) -> HeapEntry {
        HeapEntry {
            count,
            left: self.symbols.surfaces[pair.0 as usize].clone(),
            right: self.symbols.surfaces[pair.1 as usize].clone(),
            pair,
        }
    }

    fn recount(&self, pair: Pair) -> u64 {
        self.words
            .iter()
            .map(|w| {
                w.syms
                    .windows(2)
                    .filter(|p| (p[0], p[1]) == pair)
                    .count() as u64
                    * w.freq
            })
            .sum()
    }

    fn learn(&mut self, limit: usize, max_len: usize, verify: bool) -> Result<Vec<LearnedPair>> {
        let (mut counts, mut wheres) = self.initial_counts();
        let mut heap: BinaryHeap<HeapEntry> = counts
            .iter()
            .filter(|(_, &c)| c > 0)
            .map(|(&p, &c)| self.entry(p, c as u64))
            .collect();
        let mut banned: HashSet<Pair> = HashSet::new();
        let mut learned = Vec::with_capacity(limit);

        while learned.len() < limit {
            let Some(top) = heap.pop() else {
                break;
            };
            let current = counts.get(&top.pair).copied().unwrap_or(0);
            if current <= 0 || current as u64 != top.count || banned.contains(&top.pair) {
                continue;
            }
            let (a, b) = top.pair;
            let merged = format!("{}{}", top.left, top.right);
            let too_long = self.symbols.char_len[a as usize] + self.symbols.char_len[b as usize] > max_len;
            if too_long || self.taken.contains(&merged) {
                banned.insert(top.pair);
                continue;
            }
            if verify {
                let exact = self.recount(top.pair);
                if exact != top.count {
                    return Err(Error::Internal(format!(
                        "pair ({:?}, {:?}) tracked with count {} but occurs {} times",
                        top.left, top.right, top.count, exact
                    )));
                }
            }

            let new = self.symbols.intern(&merged, true);
            self.taken.insert(merged);
            learned.push(LearnedPair {
                pair: top.pair,
                count: top.count,
            });
            if learned.len() % 1000 == 0 {
                debug!("{} merges learned, last count {}", learned.len(), top.count);
            }

            let mut touched: Vec<u32> = wheres.remove(&top.pair).unwrap_or_default().into_iter().collect();
            touched.sort_unstable();
            let mut changed: HashSet<Pair> = HashSet::new();
            for wi in touched {
                let word = &mut self.words[wi as usize];
                let freq = word.freq as i64;
                for (pair, delta) in word.merge(top.pair, new, &self.symbols) {
                    *counts.entry(pair).or_default() += delta * freq;
                    if delta > 0 {
                        wheres.entry(pair).or_default().insert(wi);
                    }
                    changed.insert(pair);
                }
            }
            counts.remove(&top.pair);
            let mut changed: Vec<Pair> = changed.into_iter().collect();
            changed.sort_unstable();
            for pair in changed {
                if pair == top.pair || banned.contains(&pair) {
                    continue;
                }
                match counts.get(&pair) {
                    Some(&c) if c > 0 => heap.push(self.entry(pair, c as u64)),
                    Some(_) => {
                        counts.remove(&pair);
                    }
                    None => {}
                }
            }
        }
        Ok(learned)
    }
}
