//! Command-line front end: decode/encode strings, run mutation and sampling
//! experiments, derive and inspect grammars, and export one-hot matrices.
//!
//! Record-oriented subcommands read one record per line from stdin (or from
//! positional arguments) and keep going after per-record failures, reporting
//! them on stderr as `line:col category message`. Exit code 0 means every
//! record succeeded, 1 means at least one record failed, 2 means the
//! invocation itself was unusable.

use std::io::BufRead;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use gramol::chem::canonical_form;
use gramol::codec::{chemistry, Codec, CodecError, TokenizeError};
use gramol::derive::{derive_grammar, rule_counts, DeriveOptions, TypeSpec};
use gramol::grammar::{derive_graph, validate_grammar, GrammarSpec};
use gramol::harness::{
    alphabet_sidecar, from_one_hot, mutation_experiment, reference_smiles, render_mutation_table,
    sample_molecules, sample_strings, to_one_hot, MutationReport, OneHotMatrix, Representation,
};
use gramol::quantum::quantum_grammar;
use gramol::smiles::parse_smiles;

#[derive(Parser)]
#[command(name = "gramol", version, about = "robust grammar-based graph strings")]
struct Cli {
    /// Grammar to operate with: "chem", "quantum", or a path to a grammar
    /// JSON file. Defaults to $GRAMOL_GRAMMAR, then "chem".
    #[arg(long, global = true, env = "GRAMOL_GRAMMAR", default_value = "chem")]
    grammar: String,

    /// Output format for structured results.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Rep {
    Smiles,
    Selfies,
}

#[derive(Subcommand)]
enum Command {
    /// Decode symbol strings to molecules (SMILES for the chemistry grammar,
    /// a vertex/edge summary otherwise).
    Decode {
        /// Records; stdin is read line by line when omitted.
        records: Vec<String>,
    },
    /// Encode SMILES molecules as symbol strings (chemistry grammar only).
    Encode { records: Vec<String> },
    /// Encode then decode each SMILES record and check the molecule survives.
    Roundtrip { records: Vec<String> },
    /// Measure validity under k random point mutations.
    Mutate {
        #[arg(long, value_enum, default_value_t = Rep::Selfies)]
        rep: Rep,
        /// Mutations per trial; repeatable (e.g. -k 1 -k 2 -k 3).
        #[arg(short, long, default_values_t = [1usize])]
        k: Vec<usize>,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Base string to mutate; the reference molecule when omitted
        /// (as SMILES, or encoded, to match --rep).
        #[arg(long)]
        base: Option<String>,
    },
    /// Draw uniformly random symbol strings; they always decode.
    Sample {
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 1)]
        min_len: usize,
        #[arg(long, default_value_t = 20)]
        max_len: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Construct a grammar from a type table like "C:4,N:3,O:2,F:1".
    DeriveGrammar {
        #[arg(long)]
        types: String,
        /// Cap on edge multiplicity at derivation time.
        #[arg(long)]
        cap: Option<u8>,
        #[arg(long, default_value_t = 1)]
        ring_orders: u8,
        /// Write the grammar JSON here instead of stdout.
        #[arg(short, long)]
        output: Option<std::path::PathBuf>,
    },
    /// Convert symbol strings to one-hot CSV rows (records separated by a
    /// blank line), or back with --invert.
    Onehot {
        /// Matrix row count; strings longer than this are rejected.
        #[arg(long, default_value_t = 50)]
        max_len: usize,
        /// Print the alphabet sidecar (index, name, kind) and exit.
        #[arg(long)]
        alphabet: bool,
        /// Read CSV matrices from stdin and print symbol strings.
        #[arg(long)]
        invert: bool,
    },
    /// Print the active grammar as JSON, with its rule-vector counts on
    /// stderr.
    GrammarDump,
    /// Validate a grammar JSON file and report violations.
    Check { path: std::path::PathBuf },
}

enum GrammarChoice {
    Chem,
    Quantum,
    File(GrammarSpec),
}

fn load_choice(name: &str) -> Result<GrammarChoice, String> {
    match name {
        "chem" => Ok(GrammarChoice::Chem),
        "quantum" => Ok(GrammarChoice::Quantum),
        path => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read grammar {path}: {e}"))?;
            let spec = GrammarSpec::from_json(&text)
                .map_err(|e| format!("cannot parse grammar {path}: {e}"))?;
            let violations = validate_grammar(&spec);
            if !violations.is_empty() {
                return Err(format!(
                    "grammar {path} is invalid: {} (and {} more)",
                    violations[0].message,
                    violations.len() - 1
                ));
            }
            Ok(GrammarChoice::File(spec))
        }
    }
}

impl GrammarChoice {
    fn codec(&self) -> Codec {
        match self {
            GrammarChoice::Chem => Codec::new(chemistry().grammar().clone()),
            GrammarChoice::Quantum => Codec::new(quantum_grammar()),
            GrammarChoice::File(spec) => Codec::new(spec.clone()),
        }
    }

    fn is_chem(&self) -> bool {
        matches!(self, GrammarChoice::Chem)
    }
}

/// Iterate records from args or stdin, calling `f` with (line number, text).
/// Returns whether every record succeeded.
fn for_each_record(records: &[String], mut f: impl FnMut(usize, &str) -> bool) -> bool {
    let mut ok = true;
    if records.is_empty() {
        let stdin = std::io::stdin();
        for (i, line) in stdin.lock().lines().enumerate() {
            let line = match line {
                Ok(l) => l,
                Err(e) => {
                    eprintln!("{}:1 io {e}", i + 1);
                    return false;
                }
            };
            if line.trim().is_empty() {
                continue;
            }
            ok &= f(i + 1, line.trim());
        }
    } else {
        for (i, r) in records.iter().enumerate() {
            ok &= f(i + 1, r.trim());
        }
    }
    ok
}

fn diagnose(line: usize, err: &CodecError) -> String {
    let (col, category) = match err {
        CodecError::Tokenize(TokenizeError::UnknownToken { position, .. })
        | CodecError::Tokenize(TokenizeError::ExpectedBracket { position })
        | CodecError::Tokenize(TokenizeError::Unterminated { position }) => (position + 1, "token"),
        CodecError::Smiles(e) => (e.position + 1, e.category()),
        CodecError::SymbolOutOfRange { position, .. } => (position + 1, "symbol"),
        CodecError::UnsupportedElement(_) | CodecError::UnsupportedMultiplicity(_) => (1, "encode"),
        CodecError::Disconnected | CodecError::EncodingOverflow { .. } => (1, "encode"),
        CodecError::SmilesWrite(_) => (1, "write"),
    };
    format!("{line}:{col} {category} {err}")
}

fn run() -> Result<bool, String> {
    let cli = Cli::parse();
    let choice = load_choice(&cli.grammar)?;
    let json = cli.format == Format::Json;

    match cli.command {
        Command::Decode { records } => {
            let codec = choice.codec();
            let chem = choice.is_chem();
            Ok(for_each_record(&records, |line, text| {
                let symbols = match codec.tokenize(text) {
                    Ok(s) => s,
                    Err(e) => {
                        eprintln!("{}", diagnose(line, &e.into()));
                        return false;
                    }
                };
                if chem {
                    match codec.decode_to_smiles(&symbols) {
                        Ok(Some(smiles)) => println!("{smiles}"),
                        Ok(None) => println!(),
                        Err(e) => {
                            eprintln!("{}", diagnose(line, &e));
                            return false;
                        }
                    }
                } else {
                    let g = derive_graph(codec.grammar(), &symbols.0)
                        .expect("tokenized symbols are in range");
                    if json {
                        println!("{}", serde_json::to_string(&g).unwrap());
                    } else {
                        let labels: Vec<&str> =
                            g.vertices.iter().map(|v| v.label.as_str()).collect();
                        println!("vertices={} edges={} [{}]", g.vertices.len(), g.edges.len(), labels.join(","));
                    }
                }
                true
            }))
        }
        Command::Encode { records } => {
            require_chem(&choice, "encode")?;
            let codec = choice.codec();
            Ok(for_each_record(&records, |line, text| {
                match codec.encode_smiles(text) {
                    Ok(s) => {
                        println!("{}", codec.render(&s));
                        true
                    }
                    Err(e) => {
                        eprintln!("{}", diagnose(line, &e));
                        false
                    }
                }
            }))
        }
        Command::Roundtrip { records } => {
            require_chem(&choice, "roundtrip")?;
            let codec = choice.codec();
            Ok(for_each_record(&records, |line, text| {
                let result = (|| -> Result<(String, bool), CodecError> {
                    let input = parse_smiles(text)?;
                    let symbols = codec.encode(&input)?;
                    let output = codec.decode(&symbols)?;
                    let same = canonical_form(&input).ok().is_some()
                        && canonical_form(&input).ok() == canonical_form(&output).ok();
                    Ok((codec.render(&symbols), same))
                })();
                match result {
                    Ok((rendered, true)) => {
                        println!("ok {rendered}");
                        true
                    }
                    Ok((rendered, false)) => {
                        println!("mismatch {rendered}");
                        eprintln!("{line}:1 roundtrip molecule changed");
                        false
                    }
                    Err(e) => {
                        eprintln!("{}", diagnose(line, &e));
                        false
                    }
                }
            }))
        }
        Command::Mutate { rep, k, trials, seed, base } => {
            require_chem(&choice, "mutate")?;
            let representation = match rep {
                Rep::Smiles => Representation::Smiles,
                Rep::Selfies => Representation::Selfies,
            };
            let base = match (&base, representation) {
                (Some(b), _) => b.clone(),
                (None, Representation::Smiles) => reference_smiles().to_string(),
                (None, Representation::Selfies) => {
                    let codec = chemistry();
                    let s = codec
                        .encode_smiles(reference_smiles())
                        .expect("reference molecule encodes");
                    codec.render(&s)
                }
            };
            let reports: Vec<MutationReport> = k
                .iter()
                .map(|&k| {
                    mutation_experiment(representation, &base, k, trials, seed)
                        .map_err(|e| e.to_string())
                })
                .collect::<Result<_, _>>()?;
            if json {
                println!("{}", serde_json::to_string_pretty(&reports).unwrap());
            } else {
                print!("{}", render_mutation_table(&reports));
            }
            Ok(true)
        }
        Command::Sample { count, min_len, max_len, seed } => {
            if min_len > max_len || max_len == 0 {
                return Err("sample needs 0 < min-len <= max-len".into());
            }
            let codec = choice.codec();
            let strings = sample_strings(codec.grammar(), count, min_len, max_len, seed);
            if json && choice.is_chem() {
                let report = sample_molecules(&codec, count, min_len, max_len, seed)
                    .map_err(|e| e.to_string())?;
                let rendered: Vec<String> =
                    strings.iter().map(|s| codec.render(s)).collect();
                println!(
                    "{}",
                    serde_json::to_string_pretty(&serde_json::json!({
                        "strings": rendered,
                        "report": report,
                    }))
                    .unwrap()
                );
            } else {
                for s in &strings {
                    println!("{}", codec.render(s));
                }
            }
            Ok(true)
        }
        Command::DeriveGrammar { types, cap, ring_orders, output } => {
            let entries: Result<Vec<(String, u8)>, String> = types
                .split(',')
                .map(|part| {
                    let (label, degree) = part
                        .split_once(':')
                        .ok_or_else(|| format!("bad type entry {part:?}, want LABEL:DEGREE"))?;
                    let degree: u8 = degree
                        .trim()
                        .parse()
                        .map_err(|_| format!("bad degree in {part:?}"))?;
                    Ok((label.trim().to_string(), degree))
                })
                .collect();
            let ts = TypeSpec::new(entries?);
            let spec = derive_grammar(&ts, DeriveOptions { multiplicity_cap: cap, ring_orders })
                .map_err(|e| e.to_string())?;
            let text = spec.to_json();
            match output {
                Some(path) => std::fs::write(&path, text)
                    .map_err(|e| format!("cannot write {}: {e}", path.display()))?,
                None => println!("{text}"),
            }
            eprintln!("{:?}", rule_counts(&spec));
            Ok(true)
        }
        Command::Onehot { max_len, alphabet, invert } => {
            let codec = choice.codec();
            if alphabet {
                print!("{}", alphabet_sidecar(codec.grammar()));
                return Ok(true);
            }
            if invert {
                return onehot_invert(&codec, max_len);
            }
            Ok(for_each_record(&[], |line, text| {
                let symbols = match codec.tokenize(text) {
                    Ok(s) => s,
                    Err(e) => {
                        eprintln!("{}", diagnose(line, &e.into()));
                        return false;
                    }
                };
                match to_one_hot(codec.grammar(), &symbols, max_len) {
                    Ok(m) => {
                        print!("{}", m.to_csv());
                        println!();
                        true
                    }
                    Err(e) => {
                        eprintln!("{line}:1 onehot {e}");
                        false
                    }
                }
            }))
        }
        Command::GrammarDump => {
            let codec = choice.codec();
            println!("{}", codec.grammar().to_json());
            eprintln!("{:?}", rule_counts(codec.grammar()));
            Ok(true)
        }
        Command::Check { path } => {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            let spec = GrammarSpec::from_json(&text)
                .map_err(|e| format!("cannot parse {}: {e}", path.display()))?;
            let violations = validate_grammar(&spec);
            for v in &violations {
                println!("state {:?} symbol {:?}: {}", v.state, v.symbol, v.message);
            }
            if violations.is_empty() {
                println!("ok");
            }
            Ok(violations.is_empty())
        }
    }
}

fn require_chem(choice: &GrammarChoice, what: &str) -> Result<(), String> {
    if choice.is_chem() {
        Ok(())
    } else {
        Err(format!("{what} requires the chemistry grammar"))
    }
}

fn onehot_invert(codec: &Codec, max_len: usize) -> Result<bool, String> {
    let cols = codec.grammar().alphabet_len();
    let stdin = std::io::stdin();
    let mut ok = true;
    let mut rows: Vec<Vec<u8>> = Vec::new();
    let mut record = 0usize;
    let flush = |rows: &mut Vec<Vec<u8>>, record: usize, ok: &mut bool| {
        if rows.is_empty() {
            return;
        }
        let m = OneHotMatrix {
            rows: rows.len(),
            cols,
            data: rows.drain(..).flatten().collect(),
        };
        match from_one_hot(codec.grammar(), &m) {
            Ok(s) => println!("{}", codec.render(&s)),
            Err(e) => {
                eprintln!("{record}:1 onehot {e}");
                *ok = false;
            }
        }
    };
    for (i, line) in stdin.lock().lines().enumerate() {
        let line = line.map_err(|e| e.to_string())?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            flush(&mut rows, record, &mut ok);
            continue;
        }
        if rows.is_empty() {
            record = i + 1;
        }
        let row: Result<Vec<u8>, _> = trimmed.split(',').map(|c| c.trim().parse::<u8>()).collect();
        match row {
            Ok(r) if r.len() == cols && rows.len() < max_len => rows.push(r),
            Ok(_) => {
                eprintln!("{}:1 onehot row has wrong width or record too long", i + 1);
                ok = false;
                rows.clear();
            }
            Err(e) => {
                eprintln!("{}:1 onehot {e}", i + 1);
                ok = false;
                rows.clear();
            }
        }
    }
    flush(&mut rows, record, &mut ok);
    Ok(ok)
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
