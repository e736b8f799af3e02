//! Automatic grammar construction from a table of vertex types and their
//! maximum degrees.
//!
//! Given types `T_i` with max degrees `D_i` and `M = max D_i`, the alphabet
//! is one nop symbol, one vertex symbol per `(T_i, multiplicity 1..=D_i)`,
//! `M-1` branch symbols and a configurable number of ring symbols. States run
//! `X_0..X_M`. Vertex cells in state `X_j` bond with `min(j, multiplicity,
//! cap)` and continue in the new vertex's remaining capacity; branch cells in
//! `X_j` split the state into `min(class, j-1)` for the branch and the rest
//! for the main chain; ring cells drop the state by the multiplicity of the
//! edge actually created.

use crate::grammar::{
    validate_grammar, GrammarSpec, Production, SymbolDef, SymbolKind, VertexType,
    GRAMMAR_FORMAT_VERSION,
};
use serde::{Deserialize, Serialize};

/// Input to grammar construction: vertex type labels and max degrees.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeSpec {
    pub entries: Vec<(String, u8)>,
}

impl TypeSpec {
    pub fn new(entries: Vec<(String, u8)>) -> Self {
        Self { entries }
    }

    /// `M`, the largest max degree.
    pub fn max_degree(&self) -> u8 {
        self.entries.iter().map(|(_, d)| *d).max().unwrap_or(0)
    }
}

/// Options for [`derive_grammar`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DeriveOptions {
    /// Cap on the edge multiplicity a vertex cell may request. `None` uses
    /// `M`, honoring the generic construction literally.
    pub multiplicity_cap: Option<u8>,
    /// Number of ring symbols; ring symbol `o` closes rings of up to
    /// multiplicity `o`.
    pub ring_orders: u8,
}

impl Default for DeriveOptions {
    fn default() -> Self {
        Self { multiplicity_cap: None, ring_orders: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum DeriveError {
    #[error("type table is empty")]
    EmptyTypeSpec,
    #[error("type {0} has max degree 0")]
    ZeroDegree(String),
    #[error("duplicate type label {0}")]
    DuplicateLabel(String),
}

fn multiplicity_prefix(m: u8) -> String {
    match m {
        1 => String::new(),
        2 => "=".into(),
        3 => "#".into(),
        4 => "$".into(),
        m => format!("{m}x"),
    }
}

pub fn vertex_symbol_name(label: &str, multiplicity: u8) -> String {
    format!("[{}{}]", multiplicity_prefix(multiplicity), label)
}

pub fn branch_symbol_name(class: u8) -> String {
    format!("[Branch{class}]")
}

pub fn ring_symbol_name(order: u8) -> String {
    format!("[{}Ring]", multiplicity_prefix(order))
}

/// Construct the complete grammar for a type table.
pub fn derive_grammar(ts: &TypeSpec, options: DeriveOptions) -> Result<GrammarSpec, DeriveError> {
    if ts.entries.is_empty() {
        return Err(DeriveError::EmptyTypeSpec);
    }
    for (label, degree) in &ts.entries {
        if *degree == 0 {
            return Err(DeriveError::ZeroDegree(label.clone()));
        }
    }
    {
        let mut labels: Vec<&str> = ts.entries.iter().map(|(l, _)| l.as_str()).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(DeriveError::DuplicateLabel(labels[0].to_string()));
        }
    }

    let big_m = ts.max_degree();
    let cap = options.multiplicity_cap.unwrap_or(big_m).max(1);
    let r = big_m;

    let types: Vec<VertexType> = ts
        .entries
        .iter()
        .map(|(label, degree)| VertexType { label: label.clone(), max_degree: *degree })
        .collect();

    let mut alphabet = vec![SymbolDef {
        name: "[nop]".into(),
        kind: SymbolKind::Nop,
        index: 0,
        number: None,
    }];
    for (type_id, (label, degree)) in ts.entries.iter().enumerate() {
        for gamma in 1..=*degree {
            alphabet.push(SymbolDef {
                name: vertex_symbol_name(label, gamma),
                kind: SymbolKind::Vertex { type_id, multiplicity: gamma },
                index: alphabet.len(),
                number: None,
            });
        }
    }
    for class in 1..big_m {
        alphabet.push(SymbolDef {
            name: branch_symbol_name(class),
            kind: SymbolKind::Branch { class },
            index: alphabet.len(),
            number: None,
        });
    }
    for order in 1..=options.ring_orders {
        alphabet.push(SymbolDef {
            name: ring_symbol_name(order),
            kind: SymbolKind::Ring { order },
            index: alphabet.len(),
            number: None,
        });
    }

    let mut productions = Vec::with_capacity(r as usize + 1);
    for j in 0..=r {
        let mut row = Vec::with_capacity(alphabet.len());
        for sym in &alphabet {
            row.push(match sym.kind {
                SymbolKind::Nop => Production::Epsilon,
                SymbolKind::Vertex { type_id, multiplicity } => {
                    let degree = types[type_id].max_degree;
                    if j == 0 {
                        Production::Vertex { type_id, bond: 0, next: degree.min(r) }
                    } else {
                        let mu = j.min(multiplicity).min(cap);
                        Production::Vertex { type_id, bond: mu, next: degree - mu }
                    }
                }
                SymbolKind::Branch { class } => {
                    if j < 2 {
                        Production::Epsilon
                    } else {
                        let i = class.min(j - 1);
                        Production::Branch { branch_state: i, next: j - i }
                    }
                }
                SymbolKind::Ring { order } => {
                    if j == 0 {
                        Production::Epsilon
                    } else {
                        Production::Ring { max_order: order }
                    }
                }
            });
        }
        productions.push(row);
    }

    let spec = GrammarSpec {
        version: GRAMMAR_FORMAT_VERSION,
        r,
        types,
        alphabet,
        productions,
    };
    debug_assert!(validate_grammar(&spec).is_empty());
    Ok(spec)
}

/// Rule-vector counts of a grammar: `n` vertex, `m` branch, `p` ring vectors,
/// `r` states, and the total rule count `(n+m+p+1) * (r+2)` (the `+2` covers
/// the epsilon column and the number row).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleCounts {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub r: usize,
    pub total: usize,
}

pub fn rule_counts(spec: &GrammarSpec) -> RuleCounts {
    let mut n = 0;
    let mut m = 0;
    let mut p = 0;
    for sym in &spec.alphabet {
        match sym.kind {
            SymbolKind::Vertex { .. } => n += 1,
            SymbolKind::Branch { .. } => m += 1,
            SymbolKind::Ring { .. } => p += 1,
            SymbolKind::Nop => {}
        }
    }
    let r = spec.r as usize;
    RuleCounts { n, m, p, r, total: (n + m + p + 1) * (r + 2) }
}
