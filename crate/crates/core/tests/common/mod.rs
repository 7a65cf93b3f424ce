//! Test support: a brute-force reference trainer and synthetic corpora.
//!
//! Nothing here calls into the library's segmentation or merge code. The
//! reference trainer rebuilds word units from raw text with its own rules
//! and recounts every pair from scratch on each iteration.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap, HashSet};

use lbpe::corpus::Document;
use lbpe::TrainerConfig;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const MARKER: char = '\u{2581}';

// ── Reference trainer ───────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq)]
pub struct OracleRun {
    pub merges: Vec<(String, String)>,
    pub counts: Vec<u64>,
    pub alphabet: HashSet<char>,
    /// Symbols of every unit with at least two symbols, after all merges.
    pub words: Vec<(Vec<String>, u64)>,
}

/// Longest user symbol at the start of `s`.
fn user_symbol_at<'a>(s: &str, symbols: &'a [String]) -> Option<&'a str> {
    symbols
        .iter()
        .filter(|sym| s.starts_with(sym.as_str()))
        .max_by_key(|sym| sym.len())
        .map(|s| s.as_str())
}

/// Word units of one document, as strings of characters.
///
/// Only supports corpora without U+2581 and without characters that would
/// fall outside the coverage alphabet; the callers guarantee both.
pub fn oracle_units(doc: &str, cfg: &TrainerConfig) -> Vec<String> {
    assert!(!doc.contains(MARKER));
    // Fragments between user symbols are segmented on their own.
    let mut fragments = vec![String::new()];
    let mut i = 0;
    while i < doc.len() {
        if let Some(sym) = user_symbol_at(&doc[i..], &cfg.user_defined_symbols) {
            fragments.push(String::new());
            i += sym.len();
        } else {
            let c = doc[i..].chars().next().unwrap();
            fragments.last_mut().unwrap().push(c);
            i += c.len_utf8();
        }
    }

    let mut units = Vec::new();
    for (k, fragment) in fragments.iter().enumerate() {
        let mut text = String::new();
        if k == 0 && cfg.add_dummy_prefix {
            text.push(' ');
        }
        text.push_str(fragment);
        let chars: Vec<char> = text.chars().collect();
        let is_digit = |c: char| cfg.split_digits && c.is_numeric();

        let mut j = 0;
        while j < chars.len() {
            let start = j;
            while j < chars.len() && chars[j] == ' ' {
                j += 1;
            }
            let spaces = j - start;
            // How many markers stand alone and whether one is left for the word.
            let (standalone, leftover) = match (spaces, cfg.max_ws_run) {
                (0, _) => (0, false),
                (k, 1) => (k - 1, true),
                (k, m) => (0, k % m == 1),
            };
            units.extend(std::iter::repeat_n(MARKER.to_string(), standalone));

            let word_start = j;
            while j < chars.len() && chars[j] != ' ' && !is_digit(chars[j]) {
                j += 1;
            }
            if j > word_start {
                let mut w = String::new();
                if leftover {
                    w.push(MARKER);
                }
                w.extend(&chars[word_start..j]);
                units.push(w);
            } else if leftover {
                units.push(MARKER.to_string());
            }
            while j < chars.len() && is_digit(chars[j]) {
                units.push(chars[j].to_string());
                j += 1;
            }
        }
    }
    units
}

/// Trains with full recounting. Supports configurations without byte
/// fallback whose corpora keep every character under the coverage cut.
pub fn oracle_train<S: AsRef<str>>(docs: &[S], cfg: &TrainerConfig) -> OracleRun {
    assert!(!cfg.byte_fallback, "reference trainer has no byte pieces");
    let mut freq: BTreeMap<String, u64> = BTreeMap::new();
    for doc in docs {
        for u in oracle_units(doc.as_ref(), cfg) {
            *freq.entry(u).or_default() += 1;
        }
    }
    let mut alphabet: HashSet<char> = freq.keys().flat_map(|u| u.chars()).collect();
    alphabet.insert(MARKER);
    let total_chars: u64 = freq.iter().map(|(u, n)| u.chars().count() as u64 * n).sum();
    assert!(
        (total_chars as f64) < 1.0 / (1.0 - cfg.character_coverage),
        "corpus too large for full coverage"
    );

    let mut taken: HashSet<String> = cfg.special_pieces.iter().cloned().collect();
    taken.extend(cfg.user_defined_symbols.iter().cloned());
    taken.extend((2..=cfg.max_ws_run).map(|n| MARKER.to_string().repeat(n)));
    taken.extend(alphabet.iter().map(|c| c.to_string()));

    let runs = cfg.max_ws_run - 1;
    let fixed = 4 + cfg.user_defined_symbols.len() + runs;
    let target = (cfg.vocabulary_size - fixed - alphabet.len()) + runs;

    let mut words: Vec<(Vec<String>, u64)> = freq
        .into_iter()
        .map(|(u, n)| (u.chars().map(String::from).collect(), n))
        .filter(|(w, _): &(Vec<String>, u64)| w.len() >= 2)
        .collect();
    let frozen = |s: &str| cfg.split_digits && s.chars().count() == 1 && s.chars().all(char::is_numeric);

    let mut merges = Vec::new();
    let mut counts = Vec::new();
    while merges.len() < target {
        let mut pair_counts: HashMap<(String, String), u64> = HashMap::new();
        for (w, n) in &words {
            for p in w.windows(2) {
                if !frozen(&p[0]) && !frozen(&p[1]) {
                    *pair_counts.entry((p[0].clone(), p[1].clone())).or_default() += n;
                }
            }
        }
        let mut ranked: Vec<_> = pair_counts.into_iter().collect();
        ranked.sort_by(|(pa, ca), (pb, cb)| cb.cmp(ca).then_with(|| pa.cmp(pb)));
        let best = ranked.into_iter().find(|((l, r), _)| {
            let joined = format!("{l}{r}");
            joined.chars().count() <= cfg.max_piece_length && !taken.contains(&joined)
        });
        let Some(((l, r), n)) = best else { break };

        let joined = format!("{l}{r}");
        for (w, _) in words.iter_mut() {
            let mut out = Vec::with_capacity(w.len());
            let mut i = 0;
            while i < w.len() {
                if i + 1 < w.len() && w[i] == l && w[i + 1] == r {
                    out.push(joined.clone());
                    i += 2;
                } else {
                    out.push(w[i].clone());
                    i += 1;
                }
            }
            *w = out;
        }
        taken.insert(joined);
        merges.push((l, r));
        counts.push(n);
    }

    OracleRun {
        merges,
        counts,
        alphabet,
        words,
    }
}

/// Small random corpus for oracle comparisons: a handful of short
/// documents over a tiny mixed-script alphabet, with digits and space runs.
pub fn random_small_corpus(rng: &mut impl Rng, max_bytes: usize) -> Vec<String> {
    const POOLS: [&[&str]; 4] = [
        &["a", "b", "c", "d", "e"],
        &["a", "n", "t", "é", "ß"],
        &["中", "文", "字", "a", "b"],
        &["x", "y", "ж", "ы", "!"],
    ];
    let pool = POOLS[rng.gen_range(0..POOLS.len())];
    let n_docs = rng.gen_range(1..=6);
    let budget = rng.gen_range(max_bytes / 4..=max_bytes);
    let mut docs = vec![String::new(); n_docs];
    let mut used = 0;
    while used < budget {
        let d = rng.gen_range(0..n_docs);
        let piece = match rng.gen_range(0..20) {
            0 => rng.gen_range(0..1000).to_string(),
            1 => " ".repeat(rng.gen_range(2..8)),
            2 => ",".into(),
            3..=7 => " ".into(),
            _ => pool[rng.gen_range(0..pool.len())].to_string(),
        };
        if used + piece.len() > budget {
            break;
        }
        used += piece.len();
        docs[d].push_str(&piece);
    }
    docs
}

// ── Synthetic languages ─────────────────────────────────────────────────────

/// A made-up language: a lexicon drawn from its own syllable inventory and a
/// Zipf-Mandelbrot word distribution.
#[derive(Debug, Clone)]
pub struct Language {
    pub tag: String,
    pub lexicon: Vec<String>,
    cdf: Vec<f64>,
}

struct Inventory {
    tag: &'static str,
    onsets: &'static [&'static str],
    nuclei: &'static [&'static str],
    codas: &'static [&'static str],
}

const INVENTORIES: [Inventory; 4] = [
    Inventory {
        tag: "xa",
        onsets: &["k", "t", "p", "m", "n", "s", "h", "y", ""],
        nuclei: &["a", "i", "u"],
        codas: &["", "", "n"],
    },
    Inventory {
        tag: "xb",
        onsets: &["st", "br", "kl", "sk", "v", "f", "r", "l", "gr", "tj"],
        nuclei: &["e", "o", "ö", "å", "ä"],
        codas: &["rt", "nd", "ll", "gg", "", "m", "ss"],
    },
    Inventory {
        tag: "xc",
        onsets: &["zh", "ch", "sh", "x", "q", "d", "b", "g", "w"],
        nuclei: &["ao", "ei", "ou", "ia", "ue"],
        codas: &["ng", "n", "", ""],
    },
    Inventory {
        tag: "xd",
        onsets: &["д", "к", "л", "м", "пр", "ст", "в", "з"],
        nuclei: &["а", "о", "е", "ы", "я", "и"],
        codas: &["в", "й", "ть", "", "", "н"],
    },
];

pub fn language_tags() -> Vec<&'static str> {
    INVENTORIES.iter().map(|i| i.tag).collect()
}

impl Language {
    fn build(inv: &Inventory, size: usize, seen: &mut HashSet<String>, rng: &mut ChaCha8Rng) -> Self {
        let mut lexicon = Vec::with_capacity(size);
        let mut attempts = 0;
        while lexicon.len() < size {
            attempts += 1;
            assert!(attempts < size * 100, "inventory {} too small", inv.tag);
            let syllables = *[1, 2, 2, 3, 3, 4].choose(rng).unwrap();
            let mut w = String::new();
            for _ in 0..syllables {
                w.push_str(inv.onsets.choose(rng).unwrap());
                w.push_str(inv.nuclei.choose(rng).unwrap());
                w.push_str(inv.codas.choose(rng).unwrap());
            }
            if seen.insert(w.clone()) {
                lexicon.push(w);
            }
        }
        // Frequent words tend to be short.
        lexicon.sort_by_key(|w| w.chars().count());
        let weights: Vec<f64> = (0..size).map(|r| 1.0 / (r as f64 + 2.7).powf(1.07)).collect();
        let total: f64 = weights.iter().sum();
        let mut acc = 0.0;
        let cdf = weights
            .iter()
            .map(|w| {
                acc += w / total;
                acc
            })
            .collect();
        Language {
            tag: inv.tag.to_string(),
            lexicon,
            cdf,
        }
    }

    pub fn word(&self, rng: &mut impl Rng) -> &str {
        let u: f64 = rng.gen();
        let i = self.cdf.partition_point(|&c| c < u).min(self.lexicon.len() - 1);
        &self.lexicon[i]
    }

    /// A few sentences. Punctuation always sits directly after a word and
    /// numbers appear as separate space-delimited tokens.
    pub fn document(&self, rng: &mut impl Rng) -> String {
        let mut doc = String::new();
        for s in 0..rng.gen_range(2..=6) {
            if s > 0 {
                doc.push(' ');
            }
            let n = rng.gen_range(4..=14);
            for k in 0..n {
                if k > 0 {
                    doc.push(' ');
                }
                if rng.gen_bool(0.03) {
                    doc.push_str(&rng.gen_range(0..5000).to_string());
                    continue;
                }
                let w = self.word(rng);
                if k == 0 {
                    let mut cs = w.chars();
                    let first = cs.next().unwrap();
                    doc.extend(first.to_uppercase());
                    doc.push_str(cs.as_str());
                } else {
                    doc.push_str(w);
                }
                if k + 1 < n && rng.gen_bool(0.07) {
                    doc.push(',');
                }
            }
            doc.push(if rng.gen_bool(0.1) { '?' } else { '.' });
        }
        doc
    }

    /// Documents until about `bytes` bytes of text are produced.
    pub fn corpus(&self, bytes: usize, rng: &mut impl Rng) -> Vec<String> {
        let mut out = Vec::new();
        let mut size = 0;
        while size < bytes {
            let d = self.document(rng);
            size += d.len() + 1;
            out.push(d);
        }
        out
    }
}

/// The first `n` synthetic languages, with pairwise disjoint lexicons.
pub fn languages(n: usize, lexicon_size: usize, seed: u64) -> Vec<Language> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    INVENTORIES[..n]
        .iter()
        .map(|inv| Language::build(inv, lexicon_size, &mut seen, &mut rng))
        .collect()
}

/// Mixed-language corpus with roughly `bytes_per_language` bytes of each
/// language, interleaved.
pub fn mixed_corpus(langs: &[Language], bytes_per_language: usize, seed: u64) -> Vec<Document> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut docs: Vec<Document> = langs
        .iter()
        .flat_map(|l| {
            l.corpus(bytes_per_language, &mut rng)
                .into_iter()
                .map(|t| Document::new(t, l.tag.clone()))
                .collect::<Vec<_>>()
        })
        .collect();
    docs.shuffle(&mut rng);
    docs
}

pub fn total_bytes(docs: &[Document]) -> usize {
    docs.iter().map(|d| d.text.len()).sum()
}

// ── Metric recount ──────────────────────────────────────────────────────────

/// ASCII characters in Unicode's punctuation categories, plus a few
/// non-ASCII ones used in fixtures.
const PUNCT: &str = "!\"#%&'()*,-./:;?@[\\]_{}«»—¿¡";

/// Word statistics rebuilt from surfaces: structural pieces and
/// punctuation-only pieces are dropped, a marker opens a word, anything else
/// joins the open word (or is ignored when no word is open).
/// Returns (words, tokens, split words).
pub fn recount(pieces: &[(&str, lbpe::PieceKind)]) -> (u64, u64, u64) {
    use lbpe::PieceKind::*;
    let mut words: Vec<u64> = Vec::new();
    for &(s, kind) in pieces {
        if matches!(kind, Special | Code | WhitespaceRun) {
            continue;
        }
        let body = s.trim_start_matches(MARKER);
        if kind != ByteFallback && !body.is_empty() && body.chars().all(|c| PUNCT.contains(c)) {
            continue;
        }
        if s.starts_with(MARKER) {
            words.push(1);
        } else if let Some(w) = words.last_mut() {
            *w += 1;
        }
    }
    let tokens = words.iter().sum();
    let split = words.iter().filter(|&&n| n > 1).count() as u64;
    (words.len() as u64, tokens, split)
}

/// Surfaces and kinds of the encoding of `text`.
pub fn encoded_kinds(model: &lbpe::TokenizerModel, text: &str) -> Vec<(String, lbpe::PieceKind)> {
    model
        .encode_ids(text)
        .into_iter()
        .map(|id| {
            let p = &model.vocabulary().pieces()[id as usize];
            (p.surface.clone(), p.kind)
        })
        .collect()
}
