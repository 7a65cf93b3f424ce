//! `lbpe`: train, apply and evaluate lossless BPE tokenizers.
//!
//! Results go to `--out` files or standard output; diagnostics go to
//! standard error. Exit codes: 0 success, 1 usage error, 2 data or model
//! error.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use lbpe::analysis::{cross_evaluate, overlap_f64, sweep_vocab_sizes, EvalSet};
use lbpe::corpus::{read_jsonl, sample_weighted_each, split_by_language, CorpusSpec};
use lbpe::metrics::{evaluate_corpus, EvalReport};
use lbpe::model::MODEL_FORMAT_VERSION;
use lbpe::{load_model, save_model, DecodeMode, Document, TokenId, TokenizerModel, TrainerConfig};
use log::{info, LevelFilter};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "lbpe", about = "Lossless multilingual BPE tokenizer toolkit")]
struct Cli {
    /// Random seed for sampling and training.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[arg(long, global = true, default_value = "warn", value_parser = ["off", "error", "warn", "info", "debug", "trace"])]
    log_level: String,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Bernoulli-sample documents from weighted sources.
    Sample {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Skip malformed corpus lines instead of failing.
        #[arg(long)]
        lenient: bool,
    },
    /// Train a model on one or more JSONL corpora.
    Train {
        #[arg(long, required = true, num_args = 1..)]
        corpus: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        options: TrainOptions,
        #[arg(long)]
        lenient: bool,
    },
    /// Encode standard input line by line.
    Encode {
        #[arg(long)]
        model: PathBuf,
        /// Print token ids (the default).
        #[arg(long, conflicts_with = "pieces")]
        ids: bool,
        /// Print piece surfaces instead of ids.
        #[arg(long)]
        pieces: bool,
        #[arg(long)]
        bos: bool,
        #[arg(long)]
        eos: bool,
    },
    /// Decode lines of whitespace-separated ids from standard input.
    Decode {
        #[arg(long)]
        model: PathBuf,
        /// Replace invalid byte sequences with U+FFFD instead of failing.
        #[arg(long)]
        lenient: bool,
    },
    /// Fertility and proportion of continued words on a corpus.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// One report per language tag instead of one for the whole corpus.
        #[arg(long)]
        per_language: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        lenient: bool,
    },
    /// Vocabulary overlap between two models.
    Overlap {
        #[arg(long)]
        model_a: PathBuf,
        #[arg(long)]
        model_b: PathBuf,
    },
    /// Evaluate every model in a directory on every corpus in another.
    CrossEval {
        #[arg(long)]
        models: PathBuf,
        #[arg(long)]
        corpora: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the matrix as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Train at several vocabulary sizes and evaluate each model.
    Sweep {
        #[arg(long)]
        corpus: PathBuf,
        /// Strictly increasing, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Reference model as LABEL=PATH; overlap with it is reported per size.
        #[arg(long = "reference")]
        references: Vec<String>,
        /// Extra evaluation corpora (labelled by file stem).
        #[arg(long)]
        eval: Vec<PathBuf>,
        /// Write CSV tables next to this path prefix.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        options: TrainOptions,
    },
}

#[derive(Args, Debug)]
struct TrainOptions {
    /// Start from a JSON trainer config; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    vocab_size: Option<usize>,
    #[arg(long)]
    character_coverage: Option<f64>,
    #[arg(long)]
    no_split_digits: bool,
    #[arg(long)]
    no_dummy_prefix: bool,
    #[arg(long)]
    no_byte_fallback: bool,
    /// Replaces the default code symbols; comma separated.
    #[arg(long, value_delimiter = ',')]
    user_symbols: Option<Vec<String>>,
    #[arg(long)]
    max_ws_run: Option<usize>,
    #[arg(long)]
    max_piece_length: Option<usize>,
}

impl TrainOptions {
    fn build(&self, seed: Option<u64>) -> anyhow::Result<TrainerConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => TrainerConfig::default(),
        };
        if let Some(v) = self.vocab_size {
            cfg.vocabulary_size = v;
        }
        if let Some(c) = self.character_coverage {
            cfg.character_coverage = c;
        }
        cfg.split_digits &= !self.no_split_digits;
        cfg.add_dummy_prefix &= !self.no_dummy_prefix;
        cfg.byte_fallback &= !self.no_byte_fallback;
        if let Some(s) = &self.user_symbols {
            cfg.user_defined_symbols = s.iter().filter(|s| !s.is_empty()).cloned().collect();
        }
        if let Some(n) = self.max_ws_run {
            cfg.max_ws_run = n;
        }
        if let Some(n) = self.max_piece_length {
            cfg.max_piece_length = n;
        }
        if let Some(seed) = seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }
}

/// Failure classes that map to distinct exit codes.
enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

impl From<lbpe::Error> for Failure {
    fn from(e: lbpe::Error) -> Self {
        Failure::Data(e.into())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Data(e.into())
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn write_output(out: Option<&Path>, content: &str) -> CliResult {
    match out {
        Some(path) => {
            fs::write(path, content).with_context(|| format!("writing {}", path.display()))?;
            info!("wrote {}", path.display());
        }
        None => io::stdout().lock().write_all(content.as_bytes())?,
    }
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(anyhow::Error::from)?;
    s.push('\n');
    Ok(s)
}

fn read_stdin() -> CliResult<String> {
    let mut input = String::new();
    io::stdin()
        .read_to_string(&mut input)
        .context("standard input is not valid UTF-8")?;
    Ok(input)
}

fn file_stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Files in `dir` with extension `ext`, sorted by name.
fn list_dir(dir: &Path, ext: &str) -> CliResult<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading directory {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == ext))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Failure::Data(anyhow::anyhow!("no .{ext} files in {}", dir.display())));
    }
    Ok(paths)
}

fn texts(docs: &[Document]) -> Vec<&str> {
    docs.iter().map(|d| d.text.as_str()).collect()
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Sample { spec, out, lenient } => {
            let mut spec = CorpusSpec::from_json_file(&spec)?;
            if let Some(seed) = cli.seed {
                spec.seed = seed;
            }
            let file = fs::File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            let mut w = io::BufWriter::new(file);
            let mut kept = 0usize;
            sample_weighted_each(&spec, lenient, |doc| {
                serde_json::to_writer(&mut w, &doc)?;
                w.write_all(b"\n").map_err(|e| lbpe::Error::io(&out, e))?;
                kept += 1;
                Ok(())
            })?;
            w.flush()?;
            info!("sampled {kept} documents into {}", out.display());
        }

        Command::Train {
            corpus,
            out,
            options,
            lenient,
        } => {
            let cfg = options.build(cli.seed)?;
            let mut docs = Vec::new();
            for path in &corpus {
                docs.extend(read_jsonl(path, lenient)?);
            }
            info!("training on {} documents", docs.len());
            let model = lbpe::train_bpe(&texts(&docs), &cfg)?;
            save_model(&model, &out)?;
            info!("saved {}-piece model to {}", model.vocab_size(), out.display());
        }

        Command::Encode {
            model,
            ids: _,
            pieces,
            bos,
            eos,
        } => {
            let model = load_model(&model)?;
            let input = read_stdin()?;
            let mut out = String::new();
            for line in input.split_terminator('\n') {
                let ids = model.encode_with_bounds(line, bos, eos);
                let fields: Vec<String> = if pieces {
                    ids.iter()
                        .map(|&id| model.vocabulary().pieces()[id as usize].surface.clone())
                        .collect()
                } else {
                    ids.iter().map(u32::to_string).collect()
                };
                out.push_str(&fields.join(" "));
                out.push('\n');
            }
            write_output(None, &out)?;
        }

        Command::Decode { model, lenient } => {
            let model = load_model(&model)?;
            let mode = if lenient { DecodeMode::Lenient } else { DecodeMode::Strict };
            let input = read_stdin()?;
            let mut out = String::new();
            for (n, line) in input.split_terminator('\n').enumerate() {
                let ids = line
                    .split_whitespace()
                    .map(|t| t.parse::<TokenId>())
                    .collect::<Result<Vec<_>, _>>()
                    .with_context(|| format!("line {}: ids must be non-negative integers", n + 1))?;
                out.push_str(&model.decode_with(&ids, mode).with_context(|| format!("line {}", n + 1))?);
                out.push('\n');
            }
            write_output(None, &out)?;
        }

        Command::Eval {
            model,
            corpus,
            per_language,
            out,
            lenient,
        } => {
            let model = load_model(&model)?;
            let docs = read_jsonl(&corpus, lenient)?;
            let reports: Vec<EvalReport> = if per_language {
                split_by_language(docs)
                    .into_iter()
                    .map(|(lang, docs)| evaluate_corpus(&model, lang, &texts(&docs)))
                    .collect()
            } else {
                vec![evaluate_corpus(&model, file_stem(&corpus), &texts(&docs))]
            };
            write_output(out.as_deref(), &to_json(&reports)?)?;
        }

        Command::Overlap { model_a, model_b } => {
            let a = load_model(&model_a)?;
            let b = load_model(&model_b)?;
            #[derive(Serialize)]
            struct Pair {
                model_a: String,
                model_b: String,
                a_in_b: f64,
                b_in_a: f64,
            }
            let report = Pair {
                model_a: model_a.display().to_string(),
                model_b: model_b.display().to_string(),
                a_in_b: overlap_f64(&a, &b),
                b_in_a: overlap_f64(&b, &a),
            };
            write_output(None, &to_json(&report)?)?;
        }

        Command::CrossEval {
            models,
            corpora,
            out,
            csv,
        } => {
            let models: Vec<(String, TokenizerModel)> = list_dir(&models, "json")?
                .iter()
                .map(|p| Ok((file_stem(p), load_model(p)?)))
                .collect::<CliResult<_>>()?;
            let corpora: Vec<EvalSet<String>> = list_dir(&corpora, "jsonl")?
                .iter()
                .map(|p| {
                    let docs = read_jsonl(p, false)?;
                    Ok(EvalSet::new(file_stem(p), docs.into_iter().map(|d| d.text).collect()))
                })
                .collect::<CliResult<_>>()?;
            let matrix = cross_evaluate(&models, &corpora);
            write_output(out.as_deref(), &to_json(&matrix)?)?;
            if let Some(path) = csv {
                write_output(Some(&path), &matrix.to_csv())?;
            }
        }

        Command::Sweep {
            corpus,
            sizes,
            out,
            references,
            eval,
            csv,
            options,
        } => {
            let cfg = options.build(cli.seed)?;
            let mut refs = Vec::new();
            for r in &references {
                let Some((label, path)) = r.split_once('=') else {
                    return Err(Failure::Usage(format!("--reference expects LABEL=PATH, got {r:?}")));
                };
                refs.push((label.to_string(), load_model(path)?));
            }
            let docs = read_jsonl(&corpus, false)?;
            let train: Vec<String> = docs.iter().map(|d| d.text.clone()).collect();
            let mut sets: Vec<EvalSet<String>> = split_by_language(docs)
                .into_iter()
                .map(|(lang, docs)| EvalSet::new(lang, docs.into_iter().map(|d| d.text).collect()))
                .collect();
            for path in &eval {
                let docs = read_jsonl(path, false)?;
                sets.push(EvalSet::new(file_stem(path), docs.into_iter().map(|d| d.text).collect()));
            }
            let report = sweep_vocab_sizes(&train, &sets, &sizes, &cfg, &refs)?;
            write_output(out.as_deref(), &to_json(&report)?)?;
            if let Some(prefix) = csv {
                let base = prefix.to_string_lossy();
                write_output(Some(Path::new(&format!("{base}.eval.csv"))), &report.to_csv())?;
                write_output(Some(Path::new(&format!("{base}.overlap.csv"))), &report.overlaps_csv())?;
            }
            if let Some(reason) = &report.aborted {
                return Err(Failure::Data(anyhow::anyhow!("sweep aborted: {reason}")));
            }
        }
    }
    Ok(())
}

fn parse() -> Result<Cli, clap::Error> {
    let version = format!("{} (model format {MODEL_FORMAT_VERSION})", env!("CARGO_PKG_VERSION"));
    let matches = Cli::command().version(version).try_get_matches()?;
    Cli::from_arg_matches(&matches)
}

fn main() -> ExitCode {
    let cli = match parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };

    let level: LevelFilter = cli.log_level.parse().unwrap_or(LevelFilter::Warn);
    env_logger::Builder::new()
        .filter_level(level)
        .target(env_logger::Target::Stderr)
        .init();

    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn flags_override_config() {
        let cli = Cli::try_parse_from([
            "lbpe",
            "train",
            "--corpus",
            "c.jsonl",
            "--out",
            "m.json",
            "--vocab-size",
            "512",
            "--no-dummy-prefix",
            "--user-symbols",
            "<a>,<b>",
        ])
        .unwrap();
        let Command::Train { options, .. } = cli.command else {
            panic!("wrong subcommand");
        };
        let cfg = options.build(Some(5)).unwrap();
        assert_eq!(cfg.vocabulary_size, 512);
        assert!(!cfg.add_dummy_prefix);
        assert!(cfg.split_digits);
        assert_eq!(cfg.user_defined_symbols, ["<a>", "<b>"]);
        assert_eq!(cfg.seed, 5);
    }

    #[test]
    fn sizes_are_comma_separated() {
        let cli = Cli::try_parse_from(["lbpe", "sweep", "--corpus", "c", "--sizes", "1000,2000"]).unwrap();
        let Command::Sweep { sizes, .. } = cli.command else {
            panic!("wrong subcommand");
        };
        assert_eq!(sizes, [1000, 2000]);
    }
}
