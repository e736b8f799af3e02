//! The two public directions: decode (symbol string -> molecule) and encode
//! (molecule -> symbol string), with a guaranteed decode-of-encode identity.

use crate::chem::{build_chem_grammar, core_valence_table, CHEM_BOND_CAP};
use crate::grammar::{derive_graph, GrammarSpec, LabeledGraph, SymbolKind};
use crate::smiles::{parse_smiles, write_smiles, SmilesError, SmilesWriteError};
use once_cell::sync::Lazy;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// A sequence of alphabet symbol indices. Text form is the concatenation of
/// the bracketed token names with no separators.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolString(pub Vec<usize>);

impl SymbolString {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Tokenization error: the robustness guarantee is over symbol sequences, so
/// arbitrary text must first resolve to alphabet indices.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum TokenizeError {
    #[error("at column {}: unknown token {token:?}", position + 1)]
    UnknownToken { position: usize, token: String },
    #[error("at column {}: expected '[' to open a token", position + 1)]
    ExpectedBracket { position: usize },
    #[error("at column {}: unterminated token", position + 1)]
    Unterminated { position: usize },
}

/// Split concatenated bracketed tokens and resolve them against the alphabet.
pub fn tokenize(spec: &GrammarSpec, text: &str) -> Result<SymbolString, TokenizeError> {
    let lookup: HashMap<&str, usize> = spec
        .alphabet
        .iter()
        .map(|s| (s.name.as_str(), s.index))
        .collect();
    let mut out = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] != b'[' {
            return Err(TokenizeError::ExpectedBracket { position: i });
        }
        let close = bytes[i..]
            .iter()
            .position(|&b| b == b']')
            .ok_or(TokenizeError::Unterminated { position: i })?;
        let token = &text[i..i + close + 1];
        let index = *lookup.get(token).ok_or_else(|| TokenizeError::UnknownToken {
            position: i,
            token: token.to_string(),
        })?;
        out.push(index);
        i += close + 1;
    }
    Ok(SymbolString(out))
}

/// Render a symbol string back to its concatenated text form.
pub fn render(spec: &GrammarSpec, s: &SymbolString) -> String {
    s.0.iter().map(|&i| spec.alphabet[i].name.as_str()).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum CodecError {
    #[error(transparent)]
    Tokenize(#[from] TokenizeError),
    #[error("symbol index {index} out of range at position {position}")]
    SymbolOutOfRange { position: usize, index: usize },
    #[error("unsupported element {0}")]
    UnsupportedElement(String),
    #[error("unsupported edge multiplicity {0}")]
    UnsupportedMultiplicity(u8),
    #[error("cannot encode a disconnected graph")]
    Disconnected,
    #[error("encoding overflow: {what} {value} needs a number symbol >= alphabet size {limit}")]
    EncodingOverflow { what: &'static str, value: usize, limit: usize },
    #[error(transparent)]
    Smiles(#[from] SmilesError),
    #[error(transparent)]
    SmilesWrite(#[from] SmilesWriteError),
}

/// Decoder/encoder pair over one grammar instance.
pub struct Codec {
    spec: GrammarSpec,
    /// vertex symbol lookup: (type_id, multiplicity) -> symbol index
    vertex_symbols: HashMap<(usize, u8), usize>,
    branch_symbols: HashMap<u8, usize>,
    ring_symbols: HashMap<u8, usize>,
    max_bond: u8,
}

static CHEMISTRY: Lazy<Codec> = Lazy::new(|| {
    Codec::new(build_chem_grammar(&core_valence_table()).expect("core table is non-empty"))
});

/// The default chemistry codec (core valence table).
pub fn chemistry() -> &'static Codec {
    &CHEMISTRY
}

impl Codec {
    pub fn new(spec: GrammarSpec) -> Self {
        let mut vertex_symbols = HashMap::new();
        let mut branch_symbols = HashMap::new();
        let mut ring_symbols = HashMap::new();
        for sym in &spec.alphabet {
            match sym.kind {
                SymbolKind::Vertex { type_id, multiplicity } => {
                    vertex_symbols.insert((type_id, multiplicity), sym.index);
                }
                SymbolKind::Branch { class } => {
                    branch_symbols.insert(class, sym.index);
                }
                SymbolKind::Ring { order } => {
                    ring_symbols.insert(order, sym.index);
                }
                SymbolKind::Nop => {}
            }
        }
        let max_bond = ring_symbols.keys().copied().max().unwrap_or(1).min(CHEM_BOND_CAP);
        Self { spec, vertex_symbols, branch_symbols, ring_symbols, max_bond }
    }

    pub fn grammar(&self) -> &GrammarSpec {
        &self.spec
    }

    pub fn tokenize(&self, text: &str) -> Result<SymbolString, TokenizeError> {
        tokenize(&self.spec, text)
    }

    pub fn render(&self, s: &SymbolString) -> String {
        render(&self.spec, s)
    }

    /// Decode a symbol string. Total over in-range indices; the result always
    /// satisfies the degree bounds.
    pub fn decode(&self, s: &SymbolString) -> Result<LabeledGraph, CodecError> {
        derive_graph(&self.spec, &s.0).map_err(|e| CodecError::SymbolOutOfRange {
            position: e.position,
            index: e.index,
        })
    }

    pub fn decode_text(&self, text: &str) -> Result<LabeledGraph, CodecError> {
        let s = self.tokenize(text)?;
        self.decode(&s)
    }

    /// Decode then write SMILES. `Ok(None)` marks an empty decode.
    pub fn decode_to_smiles(&self, s: &SymbolString) -> Result<Option<String>, CodecError> {
        let g = self.decode(s)?;
        if g.vertices.is_empty() {
            return Ok(None);
        }
        Ok(Some(write_smiles(&g)?))
    }

    /// Encode a valid connected graph so that decoding reproduces it up to
    /// isomorphism. Deterministic: DFS from vertex 0, neighbors in index
    /// order; the last tree child continues the main chain, earlier ones
    /// become branches; back edges emit a ring symbol at the later endpoint.
    pub fn encode(&self, g: &LabeledGraph) -> Result<SymbolString, CodecError> {
        let n = g.vertices.len();
        if n == 0 {
            return Ok(SymbolString::default());
        }
        if !g.is_connected() {
            return Err(CodecError::Disconnected);
        }
        for v in &g.vertices {
            // resolve the type by label against this codec's grammar
            if !self.spec.types.iter().any(|t| t.label == v.label) {
                return Err(CodecError::UnsupportedElement(v.label.clone()));
            }
        }
        for e in &g.edges {
            if e.multiplicity == 0 || e.multiplicity > self.max_bond {
                return Err(CodecError::UnsupportedMultiplicity(e.multiplicity));
            }
        }
        let type_of: Vec<usize> = g
            .vertices
            .iter()
            .map(|v| {
                self.spec
                    .types
                    .iter()
                    .position(|t| t.label == v.label)
                    .expect("checked above")
            })
            .collect();

        let mut adj: Vec<Vec<(usize, u8)>> = vec![Vec::new(); n];
        for e in &g.edges {
            adj[e.u].push((e.v, e.multiplicity));
            adj[e.v].push((e.u, e.multiplicity));
        }
        for row in &mut adj {
            row.sort_unstable();
        }

        // DFS pass: discovery positions, tree children, back edges at the
        // later-visited endpoint.
        let mut position = vec![usize::MAX; n];
        let mut children: Vec<Vec<(usize, u8)>> = vec![Vec::new(); n];
        let mut back_edges: Vec<Vec<(usize, u8)>> = vec![Vec::new(); n];
        let mut clock = 1usize;
        let mut stack: Vec<(usize, usize)> = vec![(0, 0)];
        position[0] = 0;
        while let Some(frame) = stack.last_mut() {
            let (v, idx) = (frame.0, frame.1);
            if idx < adj[v].len() {
                frame.1 += 1;
                let (w, m) = adj[v][idx];
                if position[w] == usize::MAX {
                    position[w] = clock;
                    clock += 1;
                    children[v].push((w, m));
                    stack.push((w, 0));
                } else if position[w] < position[v] && !children[w].iter().any(|&(c, _)| c == v) {
                    back_edges[v].push((w, m));
                }
            } else {
                stack.pop();
            }
        }
        for list in &mut back_edges {
            list.sort_by_key(|&(w, _)| position[w]);
        }

        let mut out = Vec::new();
        self.emit(g, &type_of, &children, &back_edges, &position, 0, None, &mut out)?;
        Ok(SymbolString(out))
    }

    #[allow(clippy::too_many_arguments)]
    fn emit(
        &self,
        g: &LabeledGraph,
        type_of: &[usize],
        children: &[Vec<(usize, u8)>],
        back_edges: &[Vec<(usize, u8)>],
        position: &[usize],
        v: usize,
        incoming: Option<u8>,
        out: &mut Vec<usize>,
    ) -> Result<(), CodecError> {
        let limit = self.spec.alphabet_len();
        let gamma = incoming.unwrap_or(1);
        let sym = *self
            .vertex_symbols
            .get(&(type_of[v], gamma))
            .ok_or_else(|| CodecError::UnsupportedElement(g.vertices[v].label.clone()))?;
        out.push(sym);

        for &(u, m) in &back_edges[v] {
            let delta = position[v] - position[u] - 1;
            if delta >= limit {
                return Err(CodecError::EncodingOverflow {
                    what: "ring distance",
                    value: delta,
                    limit,
                });
            }
            let ring = *self
                .ring_symbols
                .get(&m)
                .ok_or(CodecError::UnsupportedMultiplicity(m))?;
            out.push(ring);
            out.push(delta); // number symbol: value == index
        }

        let kids = &children[v];
        for (i, &(c, m)) in kids.iter().enumerate() {
            let last = i + 1 == kids.len();
            if last {
                self.emit(g, type_of, children, back_edges, position, c, Some(m), out)?;
            } else {
                let branch = *self
                    .branch_symbols
                    .get(&m)
                    .ok_or(CodecError::UnsupportedMultiplicity(m))?;
                let mut body = Vec::new();
                self.emit(g, type_of, children, back_edges, position, c, Some(m), &mut body)?;
                if body.len() >= limit {
                    return Err(CodecError::EncodingOverflow {
                        what: "branch length",
                        value: body.len(),
                        limit,
                    });
                }
                out.push(branch);
                out.push(body.len()); // number symbol
                out.extend(body);
            }
        }
        Ok(())
    }

    /// parse_smiles then encode.
    pub fn encode_smiles(&self, text: &str) -> Result<SymbolString, CodecError> {
        let g = parse_smiles(text)?;
        self.encode(&g)
    }
}
