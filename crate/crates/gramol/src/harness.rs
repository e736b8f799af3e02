//! Experiment harness: mutation-robustness measurements against a SMILES
//! baseline, random string sampling, and one-hot matrix conversion for
//! machine-learning pipelines.

use crate::chem::{canonical_form, core_valence_table, validate_molecule, ChemError};
use crate::codec::{chemistry, Codec, SymbolString};
use crate::grammar::{derive_graph, GrammarSpec, SymbolKind};
use crate::smiles::parse_smiles;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

/// Which string representation an experiment mutates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    Smiles,
    Selfies,
}

impl std::fmt::Display for Representation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Representation::Smiles => "smiles",
            Representation::Selfies => "selfies",
        })
    }
}

/// Characters a SMILES point mutation may substitute.
pub const SMILES_MUTATION_CHARSET: &[u8] = b"CNOFcno-=#()123456789%";

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Deterministic per-trial seed derived from the experiment seed.
pub fn trial_seed(seed: u64, trial: u64) -> u64 {
    splitmix64(seed ^ splitmix64(trial))
}

fn distinct_positions(rng: &mut ChaCha8Rng, len: usize, k: usize) -> Vec<usize> {
    let mut positions: Vec<usize> = (0..len).collect();
    positions.shuffle(rng);
    positions.truncate(k.min(len));
    positions
}

/// Replace `k` distinct symbols of `s` with different random alphabet symbols.
pub fn mutate_symbols(s: &SymbolString, k: usize, alphabet_len: usize, rng: &mut ChaCha8Rng) -> SymbolString {
    let mut out = s.0.clone();
    for pos in distinct_positions(rng, out.len(), k) {
        let old = out[pos];
        loop {
            let candidate = rng.gen_range(0..alphabet_len);
            if candidate != old || alphabet_len == 1 {
                out[pos] = candidate;
                break;
            }
        }
    }
    SymbolString(out)
}

/// Replace `k` distinct characters of a SMILES string with different random
/// characters from [`SMILES_MUTATION_CHARSET`].
pub fn mutate_smiles(text: &str, k: usize, rng: &mut ChaCha8Rng) -> String {
    let mut chars: Vec<char> = text.chars().collect();
    for pos in distinct_positions(rng, chars.len(), k) {
        let old = chars[pos];
        loop {
            let candidate = *SMILES_MUTATION_CHARSET.choose(rng).unwrap() as char;
            if candidate != old {
                chars[pos] = candidate;
                break;
            }
        }
    }
    chars.into_iter().collect()
}

/// Outcome of one mutation-robustness run at a fixed mutation count.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MutationReport {
    pub representation: Representation,
    pub k: usize,
    pub trials: usize,
    pub valid: usize,
    /// `valid / trials` as a percentage.
    pub rate: f64,
    /// Distinct valid molecules (by canonical form) among the mutants.
    pub unique: usize,
    pub seed: u64,
}

/// The reference molecule used for mutation experiments
/// (3,4-methylenedioxy-N-methylamphetamine).
pub fn reference_smiles() -> &'static str {
    "CC(NC)Cc1ccc2c(c1)OCO2"
}

/// Mutate the base string `trials` times with `k` point substitutions each
/// and measure how many mutants are chemically valid.
pub fn mutation_experiment(
    representation: Representation,
    base: &str,
    k: usize,
    trials: usize,
    seed: u64,
) -> Result<MutationReport, ChemError> {
    let vt = core_valence_table();
    let codec = chemistry();
    let base_symbols = match representation {
        Representation::Selfies => Some(
            codec
                .tokenize(base)
                .unwrap_or_else(|e| panic!("base string does not tokenize: {e}")),
        ),
        Representation::Smiles => None,
    };

    let mut valid = 0usize;
    let mut seen = HashSet::new();
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed, trial as u64));
        let graph = match representation {
            Representation::Selfies => {
                let mutant =
                    mutate_symbols(base_symbols.as_ref().unwrap(), k, codec.grammar().alphabet_len(), &mut rng);
                codec.decode(&mutant).ok()
            }
            Representation::Smiles => {
                let mutant = mutate_smiles(base, k, &mut rng);
                parse_smiles(&mutant).ok()
            }
        };
        if let Some(g) = graph {
            if validate_molecule(&g, &vt).map(|r| r.is_valid()).unwrap_or(false) {
                valid += 1;
                seen.insert(molecule_key(&g));
            }
        }
    }

    Ok(MutationReport {
        representation,
        k,
        trials,
        valid,
        rate: if trials == 0 { 0.0 } else { 100.0 * valid as f64 / trials as f64 },
        unique: seen.len(),
        seed,
    })
}

fn molecule_key(g: &crate::grammar::LabeledGraph) -> String {
    canonical_form(g).unwrap_or_else(|_| {
        let mut degrees: Vec<(String, u32)> = (0..g.vertices.len())
            .map(|i| (g.vertices[i].label.clone(), g.used_degree(i)))
            .collect();
        degrees.sort();
        format!("big:{degrees:?}")
    })
}

/// Render mutation reports as an aligned text table.
pub fn render_mutation_table(reports: &[MutationReport]) -> String {
    let mut out = String::from("representation  k  trials   valid    rate%   unique\n");
    for r in reports {
        out.push_str(&format!(
            "{:<14} {:>2}  {:>6}  {:>6}  {:>7.3}  {:>6}\n",
            r.representation.to_string(),
            r.k,
            r.trials,
            r.valid,
            r.rate,
            r.unique
        ));
    }
    out
}

/// A batch of uniformly random symbol strings and what they decode to.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SampleReport {
    pub count: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub seed: u64,
    /// Samples that decode to at least one vertex.
    pub nonempty: usize,
    /// Samples whose decoded graph passes valence validation (all of them,
    /// by construction).
    pub valid: usize,
    /// Distinct symbol strings drawn.
    pub unique_strings: usize,
    /// Distinct decoded molecules by canonical form.
    pub unique_molecules: usize,
}

/// Draw `count` uniformly random strings over the full alphabet with lengths
/// in `min_len..=max_len`.
pub fn sample_strings(
    spec: &GrammarSpec,
    count: usize,
    min_len: usize,
    max_len: usize,
    seed: u64,
) -> Vec<SymbolString> {
    assert!(min_len <= max_len, "min_len must not exceed max_len");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let len = rng.gen_range(min_len..=max_len);
            SymbolString((0..len).map(|_| rng.gen_range(0..spec.alphabet_len())).collect())
        })
        .collect()
}

/// Sample random strings from the chemistry grammar and summarize how many
/// decode to valid, distinct molecules.
pub fn sample_molecules(
    codec: &Codec,
    count: usize,
    min_len: usize,
    max_len: usize,
    seed: u64,
) -> Result<SampleReport, ChemError> {
    let vt = core_valence_table();
    let strings = sample_strings(codec.grammar(), count, min_len, max_len, seed);
    let mut nonempty = 0usize;
    let mut valid = 0usize;
    let mut unique_strings = HashSet::new();
    let mut unique_molecules = HashSet::new();
    for s in &strings {
        unique_strings.insert(s.0.clone());
        let g = derive_graph(codec.grammar(), &s.0).expect("sampled symbols are in range");
        if !g.vertices.is_empty() {
            nonempty += 1;
        }
        if validate_molecule(&g, &vt)?.is_valid() {
            valid += 1;
            if !g.vertices.is_empty() {
                unique_molecules.insert(molecule_key(&g));
            }
        }
    }
    Ok(SampleReport {
        count,
        min_len,
        max_len,
        seed,
        nonempty,
        valid,
        unique_strings: unique_strings.len(),
        unique_molecules: unique_molecules.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum OneHotError {
    #[error("string of length {len} does not fit in {rows} rows")]
    TooLong { len: usize, rows: usize },
    #[error("row {0} does not contain exactly one set column")]
    MalformedRow(usize),
    #[error("row {row} selects column {col}, outside the alphabet")]
    ColumnOutOfRange { row: usize, col: usize },
}

/// Dense binary matrix, row-major; one row per string position, one column
/// per alphabet symbol.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OneHotMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<u8>,
}

impl OneHotMatrix {
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.data[row * self.cols + col]
    }

    /// Comma-separated rows, one line each.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for r in 0..self.rows {
            let row: Vec<String> =
                (0..self.cols).map(|c| self.get(r, c).to_string()).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Encode a symbol string as a `rows x alphabet` one-hot matrix, padding the
/// tail with the nop column.
pub fn to_one_hot(spec: &GrammarSpec, s: &SymbolString, rows: usize) -> Result<OneHotMatrix, OneHotError> {
    if s.len() > rows {
        return Err(OneHotError::TooLong { len: s.len(), rows });
    }
    let cols = spec.alphabet_len();
    let mut data = vec![0u8; rows * cols];
    for (r, &sym) in s.0.iter().enumerate() {
        let col = if sym < cols { sym } else {
            return Err(OneHotError::ColumnOutOfRange { row: r, col: sym });
        };
        data[r * cols + col] = 1;
    }
    for r in s.len()..rows {
        data[r * cols] = 1; // nop padding
    }
    Ok(OneHotMatrix { rows, cols, data })
}

/// Invert [`to_one_hot`]: read one symbol per row and drop trailing nop
/// padding rows.
pub fn from_one_hot(spec: &GrammarSpec, m: &OneHotMatrix) -> Result<SymbolString, OneHotError> {
    let cols = spec.alphabet_len();
    let mut symbols = Vec::with_capacity(m.rows);
    for r in 0..m.rows {
        let row = &m.data[r * m.cols..(r + 1) * m.cols];
        let mut set = row.iter().enumerate().filter(|(_, &v)| v != 0);
        let (col, _) = set.next().ok_or(OneHotError::MalformedRow(r))?;
        if set.next().is_some() {
            return Err(OneHotError::MalformedRow(r));
        }
        if col >= cols {
            return Err(OneHotError::ColumnOutOfRange { row: r, col });
        }
        symbols.push(col);
    }
    while symbols.last() == Some(&0) {
        symbols.pop();
    }
    Ok(SymbolString(symbols))
}

/// One alphabet entry per line: `index<TAB>name<TAB>kind`, for pairing with a
/// CSV matrix.
pub fn alphabet_sidecar(spec: &GrammarSpec) -> String {
    let mut out = String::new();
    for sym in &spec.alphabet {
        let kind = match sym.kind {
            SymbolKind::Nop => "nop",
            SymbolKind::Vertex { .. } => "vertex",
            SymbolKind::Branch { .. } => "branch",
            SymbolKind::Ring { .. } => "ring",
        };
        out.push_str(&format!("{}\t{}\t{}\n", sym.index, sym.name, kind));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_molecule_parses() {
        let g = parse_smiles(reference_smiles()).unwrap();
        assert_eq!(g.vertices.len(), 14);
        let vt = core_valence_table();
        assert!(validate_molecule(&g, &vt).unwrap().is_valid());
    }

    #[test]
    fn trial_seeds_are_distinct() {
        let mut seen = HashSet::new();
        for t in 0..10_000u64 {
            assert!(seen.insert(trial_seed(42, t)));
        }
    }

    #[test]
    fn symbol_mutation_changes_exactly_k_positions() {
        let base = SymbolString(vec![1, 2, 3, 4, 5, 6, 7, 8, 9, 10]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for k in 0..=10 {
            let mutant = mutate_symbols(&base, k, 15, &mut rng);
            let changed = base.0.iter().zip(&mutant.0).filter(|(a, b)| a != b).count();
            assert_eq!(changed, k);
        }
    }

    #[test]
    fn smiles_mutation_changes_exactly_k_positions() {
        let base = reference_smiles();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for k in 1..=3 {
            let mutant = mutate_smiles(base, k, &mut rng);
            let changed = base
                .chars()
                .zip(mutant.chars())
                .filter(|(a, b)| a != b)
                .count();
            assert_eq!(changed, k);
            assert_eq!(mutant.len(), base.len());
        }
    }

    #[test]
    fn symbol_mutations_stay_valid() {
        let codec = chemistry();
        let base = codec.encode_smiles(reference_smiles()).unwrap();
        let report =
            mutation_experiment(Representation::Selfies, &codec.render(&base), 2, 500, 7).unwrap();
        assert_eq!(report.valid, report.trials);
        assert!((report.rate - 100.0).abs() < f64::EPSILON);
        assert!(report.unique > 1);
    }

    #[test]
    fn smiles_mutations_mostly_break() {
        let report =
            mutation_experiment(Representation::Smiles, reference_smiles(), 1, 500, 7).unwrap();
        assert!(report.valid < report.trials / 2);
    }

    #[test]
    fn experiments_are_reproducible() {
        let a = mutation_experiment(Representation::Smiles, reference_smiles(), 2, 200, 99).unwrap();
        let b = mutation_experiment(Representation::Smiles, reference_smiles(), 2, 200, 99).unwrap();
        assert_eq!(a.valid, b.valid);
        assert_eq!(a.unique, b.unique);
    }

    #[test]
    fn sampling_reports_uniqueness() {
        let report = sample_molecules(chemistry(), 300, 1, 20, 11).unwrap();
        assert_eq!(report.valid, report.count);
        assert!(report.unique_molecules > 50);
        let again = sample_molecules(chemistry(), 300, 1, 20, 11).unwrap();
        assert_eq!(report.unique_molecules, again.unique_molecules);
    }

    #[test]
    fn one_hot_roundtrip_with_padding() {
        let codec = chemistry();
        let s = codec.tokenize("[F][=C][=C][#N]").unwrap();
        for extra in 0..4 {
            let m = to_one_hot(codec.grammar(), &s, s.len() + extra).unwrap();
            assert_eq!(m.rows, s.len() + extra);
            assert_eq!(from_one_hot(codec.grammar(), &m).unwrap(), s);
        }
    }

    #[test]
    fn one_hot_rejects_overflow_and_bad_rows() {
        let codec = chemistry();
        let s = codec.tokenize("[C][C][C]").unwrap();
        assert!(matches!(
            to_one_hot(codec.grammar(), &s, 2),
            Err(OneHotError::TooLong { .. })
        ));
        let mut m = to_one_hot(codec.grammar(), &s, 3).unwrap();
        m.data[0] = 1; // second set bit in row 0
        assert!(matches!(
            from_one_hot(codec.grammar(), &m),
            Err(OneHotError::MalformedRow(0))
        ));
    }

    #[test]
    fn csv_and_sidecar_shapes() {
        let codec = chemistry();
        let s = codec.tokenize("[C][=O]").unwrap();
        let m = to_one_hot(codec.grammar(), &s, 3).unwrap();
        let csv = m.to_csv();
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.lines().all(|l| l.split(',').count() == m.cols));
        let sidecar = alphabet_sidecar(codec.grammar());
        assert_eq!(sidecar.lines().count(), codec.grammar().alphabet_len());
        assert!(sidecar.starts_with("0\t[nop]\tnop"));
    }
}
