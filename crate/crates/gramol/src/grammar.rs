//! Table-driven derivation engine for constrained-graph string grammars.
//!
//! A [`GrammarSpec`] holds an alphabet of bracketed symbols and a dense
//! production table indexed by `(derivation state, symbol)`. Deriving a
//! symbol string under the table always yields a [`LabeledGraph`] whose
//! per-vertex degree bounds hold, no matter what the input string is.
//! The derivation state `X_j` bounds the multiplicity of the next edge
//! to `j`, which is what makes the decoder total.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Current version of the grammar JSON document format.
pub const GRAMMAR_FORMAT_VERSION: u32 = 1;

/// Identifies a vertex type (row of the grammar's type table).
pub type TypeId = usize;

/// What an alphabet symbol stands for.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SymbolKind {
    /// The padding / no-operation symbol. Exactly one per alphabet, at index 0.
    Nop,
    /// Place a vertex of `type_id`, requesting an edge of multiplicity
    /// `multiplicity` to the previous vertex.
    Vertex { type_id: TypeId, multiplicity: u8 },
    /// Open a branch; `class` is the intended bond capacity into the branch.
    Branch { class: u8 },
    /// Close a ring of up to `order` bond multiplicity.
    Ring { order: u8 },
}

/// One alphabet symbol.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolDef {
    /// Bracketed token text, e.g. `[=C]`.
    pub name: String,
    #[serde(flatten)]
    pub kind: SymbolKind,
    /// Position in the alphabet; doubles as the symbol's numeric value
    /// unless `number` overrides it.
    pub index: usize,
    /// Explicit numeric value, for grammars whose number row is not the
    /// column index.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub number: Option<usize>,
}

impl SymbolDef {
    /// The value this symbol carries when read as a number `N`.
    pub fn numeric_value(&self) -> usize {
        self.number.unwrap_or(self.index)
    }
}

/// One cell of the production table.
///
/// A `Vertex` cell with `next == 0` is a terminal: the current
/// (sub-)derivation ends and unread symbols in its scope are discarded.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Production {
    /// Derive nothing; the state is unchanged.
    Epsilon,
    /// Place a vertex bonded to the previous vertex with multiplicity `bond`
    /// (`bond == 0` in the start state, where there is no previous vertex),
    /// then continue in state `next`.
    Vertex { type_id: TypeId, bond: u8, next: u8 },
    /// Read the next symbol as a length `N` and derive the following `N`
    /// symbols as a side chain starting in state `branch_state`, attached to
    /// the current vertex; resume in state `next`.
    Branch { branch_state: u8, next: u8 },
    /// Read the next symbol as a number `N` and connect the current vertex to
    /// the `(N+1)`-th previously derived vertex with multiplicity
    /// `min(state, max_order, remaining capacity at the target)`.
    Ring { max_order: u8 },
}

/// A vertex type: display label plus maximum total incident multiplicity.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertexType {
    pub label: String,
    pub max_degree: u8,
}

/// The full rule system: alphabet, states `X_0..X_r`, production table and
/// vertex type table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrammarSpec {
    pub version: u32,
    /// Maximum edge multiplicity; states are `X_0..X_r`.
    pub r: u8,
    pub types: Vec<VertexType>,
    pub alphabet: Vec<SymbolDef>,
    /// Dense `(r+1) x |alphabet|` table, row-major by state.
    pub productions: Vec<Vec<Production>>,
}

impl GrammarSpec {
    pub fn alphabet_len(&self) -> usize {
        self.alphabet.len()
    }

    pub fn symbol_by_name(&self, name: &str) -> Option<&SymbolDef> {
        self.alphabet.iter().find(|s| s.name == name)
    }

    /// Numeric value of the symbol at `index` when read as a number `N`.
    pub fn symbol_number(&self, index: usize) -> usize {
        self.alphabet[index].numeric_value()
    }

    pub fn production(&self, state: u8, symbol: usize) -> &Production {
        &self.productions[state as usize][symbol]
    }

    /// Serialize to the versioned JSON document format.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("grammar serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<GrammarSpec, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// A named violation of the grammar invariants, locating the offending cell
/// where one exists.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrammarViolation {
    pub state: Option<u8>,
    pub symbol: Option<usize>,
    pub message: String,
}

impl std::fmt::Display for GrammarViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match (self.state, self.symbol) {
            (Some(j), Some(a)) => write!(f, "cell (X_{j}, {a}): {}", self.message),
            (None, Some(a)) => write!(f, "symbol {a}: {}", self.message),
            _ => write!(f, "{}", self.message),
        }
    }
}

fn cell_violation(state: u8, symbol: usize, message: impl Into<String>) -> GrammarViolation {
    GrammarViolation { state: Some(state), symbol: Some(symbol), message: message.into() }
}

/// Check every structural invariant of a grammar. Returns an empty list iff
/// the grammar is well-formed.
pub fn validate_grammar(spec: &GrammarSpec) -> Vec<GrammarViolation> {
    let mut out = Vec::new();
    let top = |message: &str| GrammarViolation { state: None, symbol: None, message: message.to_string() };

    if spec.alphabet.is_empty() {
        out.push(top("empty alphabet"));
        return out;
    }
    for (i, sym) in spec.alphabet.iter().enumerate() {
        if sym.index != i {
            out.push(GrammarViolation {
                state: None,
                symbol: Some(i),
                message: format!("symbol index {} out of order (expected {i})", sym.index),
            });
        }
        match sym.kind {
            SymbolKind::Nop => {
                if i != 0 {
                    out.push(GrammarViolation {
                        state: None,
                        symbol: Some(i),
                        message: "nop symbol must be at index 0".into(),
                    });
                }
            }
            SymbolKind::Vertex { type_id, multiplicity } => {
                if multiplicity < 1 {
                    out.push(GrammarViolation {
                        state: None,
                        symbol: Some(i),
                        message: "vertex symbol multiplicity must be >= 1".into(),
                    });
                }
                if type_id >= spec.types.len() {
                    out.push(GrammarViolation {
                        state: None,
                        symbol: Some(i),
                        message: format!("type_id {type_id} out of range"),
                    });
                }
            }
            SymbolKind::Branch { class } if class < 1 => {
                out.push(GrammarViolation {
                    state: None,
                    symbol: Some(i),
                    message: "branch class must be >= 1".into(),
                });
            }
            SymbolKind::Ring { order } if order < 1 => {
                out.push(GrammarViolation {
                    state: None,
                    symbol: Some(i),
                    message: "ring order must be >= 1".into(),
                });
            }
            _ => {}
        }
    }
    if !matches!(spec.alphabet[0].kind, SymbolKind::Nop) {
        out.push(top("alphabet must start with the nop symbol"));
    }
    if spec.alphabet.iter().filter(|s| matches!(s.kind, SymbolKind::Nop)).count() != 1 {
        out.push(top("alphabet must contain exactly one nop symbol"));
    }
    {
        let mut names: Vec<&str> = spec.alphabet.iter().map(|s| s.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            out.push(top("duplicate symbol names in alphabet"));
        }
    }

    let rows = spec.r as usize + 1;
    if spec.productions.len() != rows {
        out.push(top(&format!(
            "table size mismatch: {} state rows, expected {rows}",
            spec.productions.len()
        )));
        return out;
    }
    for (j, row) in spec.productions.iter().enumerate() {
        let j = j as u8;
        if row.len() != spec.alphabet.len() {
            out.push(GrammarViolation {
                state: Some(j),
                symbol: None,
                message: format!(
                    "table size mismatch: row has {} cells, expected {}",
                    row.len(),
                    spec.alphabet.len()
                ),
            });
            continue;
        }
        for (a, cell) in row.iter().enumerate() {
            let sym = &spec.alphabet[a];
            match *cell {
                Production::Epsilon => {}
                Production::Vertex { type_id, bond, next } => {
                    let (sym_type, gamma) = match sym.kind {
                        SymbolKind::Vertex { type_id, multiplicity } => (type_id, multiplicity),
                        _ => {
                            out.push(cell_violation(j, a, "vertex production under a non-vertex symbol"));
                            continue;
                        }
                    };
                    if type_id != sym_type {
                        out.push(cell_violation(j, a, "vertex production type differs from its symbol"));
                    }
                    if bond > gamma {
                        out.push(cell_violation(
                            j,
                            a,
                            format!("bond multiplicity {bond} exceeds symbol multiplicity {gamma}"),
                        ));
                    }
                    if j == 0 && bond != 0 {
                        out.push(cell_violation(j, a, "vertex in the start state cannot carry a bond"));
                    }
                    if j > 0 && bond > j {
                        out.push(cell_violation(j, a, format!("bond multiplicity {bond} exceeds state {j}")));
                    }
                    if next > spec.r {
                        out.push(cell_violation(j, a, format!("successor state {next} out of range")));
                    }
                    if let Some(t) = spec.types.get(type_id) {
                        // Successor may be smaller than the remaining capacity
                        // (some instances cap it at r) but never larger.
                        if u16::from(next) + u16::from(bond) > u16::from(t.max_degree) {
                            out.push(cell_violation(
                                j,
                                a,
                                format!(
                                    "successor {next} plus bond {bond} exceeds max degree {}",
                                    t.max_degree
                                ),
                            ));
                        }
                    }
                }
                Production::Branch { branch_state, next } => {
                    if !matches!(sym.kind, SymbolKind::Branch { .. }) {
                        out.push(cell_violation(j, a, "branch production under a non-branch symbol"));
                        continue;
                    }
                    if j < 2 {
                        out.push(cell_violation(j, a, "branch production requires state >= 2"));
                    }
                    if branch_state + 1 > j {
                        out.push(cell_violation(
                            j,
                            a,
                            format!("branch start state {branch_state} too large for state {j}"),
                        ));
                    }
                    if u16::from(branch_state) + u16::from(next) > u16::from(j) {
                        out.push(cell_violation(
                            j,
                            a,
                            format!("branch spend {branch_state}+{next} exceeds state {j}"),
                        ));
                    }
                }
                Production::Ring { max_order } => {
                    if !matches!(sym.kind, SymbolKind::Ring { .. }) {
                        out.push(cell_violation(j, a, "ring production under a non-ring symbol"));
                        continue;
                    }
                    if j < 1 {
                        out.push(cell_violation(j, a, "ring production requires state >= 1"));
                    }
                    if max_order < 1 {
                        out.push(cell_violation(j, a, "ring max order must be >= 1"));
                    }
                }
            }
        }
    }
    for t in &spec.types {
        if t.max_degree < 1 {
            out.push(top(&format!("type {} has max degree 0", t.label)));
        }
    }
    out
}

/// A vertex of a decoded graph.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vertex {
    pub type_id: TypeId,
    pub label: String,
    pub max_degree: u8,
}

/// An undirected edge with multiplicity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub multiplicity: u8,
}

/// A labeled multigraph: the decode target and encode source.
///
/// Invariants: no self-loops, at most one edge per vertex pair, and for each
/// vertex the sum of incident multiplicities stays within `max_degree`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledGraph {
    pub vertices: Vec<Vertex>,
    pub edges: Vec<Edge>,
    /// Vertex indices in order of creation.
    pub derivation_order: Vec<usize>,
}

impl LabeledGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_vertex(&mut self, type_id: TypeId, label: impl Into<String>, max_degree: u8) -> usize {
        let id = self.vertices.len();
        self.vertices.push(Vertex { type_id, label: label.into(), max_degree });
        self.derivation_order.push(id);
        id
    }

    /// Adds an edge. Callers must have ruled out self-loops and duplicates.
    pub fn add_edge(&mut self, u: usize, v: usize, multiplicity: u8) {
        debug_assert!(u != v, "self-loop");
        debug_assert!(!self.has_edge(u, v), "duplicate edge");
        self.edges.push(Edge { u, v, multiplicity });
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges
            .iter()
            .any(|e| (e.u == u && e.v == v) || (e.u == v && e.v == u))
    }

    /// Sum of incident edge multiplicities at `v`.
    pub fn used_degree(&self, v: usize) -> u32 {
        self.edges
            .iter()
            .filter(|e| e.u == v || e.v == v)
            .map(|e| u32::from(e.multiplicity))
            .sum()
    }

    pub fn remaining_capacity(&self, v: usize) -> u32 {
        u32::from(self.vertices[v].max_degree).saturating_sub(self.used_degree(v))
    }

    /// Neighbor list of `v` as `(other, multiplicity)` in edge-insertion order.
    pub fn neighbors(&self, v: usize) -> Vec<(usize, u8)> {
        let mut out = Vec::new();
        for e in &self.edges {
            if e.u == v {
                out.push((e.v, e.multiplicity));
            } else if e.v == v {
                out.push((e.u, e.multiplicity));
            }
        }
        out
    }

    /// Whether every vertex satisfies its degree bound and the edge list is
    /// structurally sound.
    pub fn degrees_valid(&self) -> bool {
        for e in &self.edges {
            if e.u == e.v || e.u >= self.vertices.len() || e.v >= self.vertices.len() {
                return false;
            }
        }
        for (i, e) in self.edges.iter().enumerate() {
            for f in &self.edges[i + 1..] {
                if (e.u == f.u && e.v == f.v) || (e.u == f.v && e.v == f.u) {
                    return false;
                }
            }
        }
        (0..self.vertices.len()).all(|v| self.used_degree(v) <= u32::from(self.vertices[v].max_degree))
    }

    pub fn is_connected(&self) -> bool {
        if self.vertices.is_empty() {
            return true;
        }
        let mut seen = vec![false; self.vertices.len()];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for (w, _) in self.neighbors(v) {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == self.vertices.len()
    }
}

/// What one derivation step did to the graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TraceAction {
    /// Epsilon cell or an operator that ended up doing nothing.
    Skip,
    PlaceVertex { vertex: usize, type_id: TypeId, bond_to: Option<(usize, u8)> },
    CloseRing { from: usize, to: usize, multiplicity: u8 },
    /// Branch operator; `number_value` is the length read, `window` the span
    /// of argument token positions actually consumed (number symbol included).
    OpenBranch { number_value: usize, window: (usize, usize) },
    /// A symbol consumed as the numeric argument of a ring operator.
    RingNumber { number_value: usize, position: usize },
}

/// One derivation step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceStep {
    pub symbol: usize,
    /// Global position of the symbol in the input string.
    pub position: usize,
    pub state_before: u8,
    pub action: TraceAction,
    pub state_after: u8,
    pub branch_depth: usize,
}

/// Ordered record of every derivation step; replaying it rebuilds the graph.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DerivationTrace {
    pub steps: Vec<TraceStep>,
}

impl DerivationTrace {
    /// Rebuild the graph from the recorded actions alone.
    pub fn replay(&self, spec: &GrammarSpec) -> LabeledGraph {
        let mut g = LabeledGraph::new();
        for step in &self.steps {
            match step.action {
                TraceAction::PlaceVertex { type_id, bond_to, .. } => {
                    let t = &spec.types[type_id];
                    let v = g.add_vertex(type_id, t.label.clone(), t.max_degree);
                    if let Some((p, m)) = bond_to {
                        g.add_edge(p, v, m);
                    }
                }
                TraceAction::CloseRing { from, to, multiplicity } => {
                    g.add_edge(from, to, multiplicity);
                }
                _ => {}
            }
        }
        g
    }

    /// Token positions consumed as operator arguments (branch windows
    /// including their number symbol, and ring number symbols).
    pub fn argument_positions(&self) -> Vec<(usize, usize)> {
        let mut spans = Vec::new();
        for step in &self.steps {
            match step.action {
                TraceAction::OpenBranch { window, .. } => spans.push(window),
                TraceAction::RingNumber { position, .. } => spans.push((position, position)),
                _ => {}
            }
        }
        spans
    }
}

/// The input error for out-of-range symbol indices, reported distinctly from
/// derivation (which itself cannot fail).
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("symbol index {index} at position {position} out of range (alphabet size {alphabet_len})")]
pub struct SymbolOutOfRange {
    pub position: usize,
    pub index: usize,
    pub alphabet_len: usize,
}

fn check_indices(spec: &GrammarSpec, symbols: &[usize]) -> Result<(), SymbolOutOfRange> {
    for (position, &index) in symbols.iter().enumerate() {
        if index >= spec.alphabet.len() {
            return Err(SymbolOutOfRange { position, index, alphabet_len: spec.alphabet.len() });
        }
    }
    Ok(())
}

/// Derive the graph for a symbol string. Total: every in-range symbol string,
/// including the empty one, yields a graph satisfying the degree bounds.
pub fn derive_graph(spec: &GrammarSpec, symbols: &[usize]) -> Result<LabeledGraph, SymbolOutOfRange> {
    derive_with_trace(spec, symbols).map(|(g, _)| g)
}

/// As [`derive_graph`], but also records the step-by-step trace.
pub fn derive_with_trace(
    spec: &GrammarSpec,
    symbols: &[usize],
) -> Result<(LabeledGraph, DerivationTrace), SymbolOutOfRange> {
    check_indices(spec, symbols)?;
    let mut g = LabeledGraph::new();
    let mut trace = DerivationTrace::default();
    derive_scope(spec, symbols, 0, 0, None, 0, &mut g, &mut trace);
    debug_assert!(g.degrees_valid());
    Ok((g, trace))
}

/// Derives one scope (the whole string, or a branch window). `base` is the
/// global position of `tokens[0]`; `attach` the vertex the scope hangs off.
#[allow(clippy::too_many_arguments)]
fn derive_scope(
    spec: &GrammarSpec,
    tokens: &[usize],
    base: usize,
    start_state: u8,
    attach: Option<usize>,
    depth: usize,
    g: &mut LabeledGraph,
    trace: &mut DerivationTrace,
) {
    let mut state = start_state;
    let mut current = attach;
    let mut i = 0;
    while i < tokens.len() {
        let sym = tokens[i];
        let position = base + i;
        let state_before = state;
        let step = |action: TraceAction, state_after: u8, trace: &mut DerivationTrace| {
            trace.steps.push(TraceStep {
                symbol: sym,
                position,
                state_before,
                action,
                state_after,
                branch_depth: depth,
            });
        };
        match *spec.production(state, sym) {
            Production::Epsilon => {
                step(TraceAction::Skip, state, trace);
                i += 1;
            }
            Production::Vertex { type_id, bond, next } => {
                let t = &spec.types[type_id];
                // a ring closure in a nested branch may have consumed parent
                // capacity beyond what this scope's state reserves, so clamp
                // the bond by what the parent actually has left
                let (mu, parent) = match current {
                    Some(p) if bond > 0 => {
                        (u32::from(bond).min(g.remaining_capacity(p)) as u8, Some(p))
                    }
                    _ => (0, None),
                };
                if bond > 0 && mu == 0 {
                    step(TraceAction::Skip, state, trace);
                    i += 1;
                    continue;
                }
                let v = g.add_vertex(type_id, t.label.clone(), t.max_degree);
                let bond_to = parent.map(|p| {
                    g.add_edge(p, v, mu);
                    (p, mu)
                });
                current = Some(v);
                let state_after = if mu == bond {
                    next
                } else {
                    (t.max_degree - mu).min(spec.r)
                };
                step(TraceAction::PlaceVertex { vertex: v, type_id, bond_to }, state_after, trace);
                if state_after == 0 {
                    return; // terminal: rest of this scope is discarded
                }
                state = state_after;
                i += 1;
            }
            Production::Branch { branch_state, next } => {
                if i + 1 >= tokens.len() {
                    // string ends right after the operator: no-op
                    step(TraceAction::Skip, state, trace);
                    i += 1;
                    continue;
                }
                let n = spec.symbol_number(tokens[i + 1]);
                let body_start = i + 2;
                let body_len = n.min(tokens.len() - body_start);
                let window = (position + 1, position + 1 + body_len);
                step(TraceAction::OpenBranch { number_value: n, window }, next, trace);
                derive_scope(
                    spec,
                    &tokens[body_start..body_start + body_len],
                    base + body_start,
                    branch_state,
                    current,
                    depth + 1,
                    g,
                    trace,
                );
                i = body_start + body_len;
                if next == 0 {
                    return;
                }
                state = next;
            }
            Production::Ring { max_order } => {
                if i + 1 >= tokens.len() {
                    step(TraceAction::Skip, state, trace);
                    i += 1;
                    continue;
                }
                let n = spec.symbol_number(tokens[i + 1]);
                let number_pos = position + 1;
                let (action, state_after) = match current {
                    Some(c) if !g.vertices.is_empty() => {
                        // (N+1)-th previously derived vertex, clamped to the
                        // first derived one.
                        let target_pos = c.saturating_sub(n + 1);
                        let target = g.derivation_order[target_pos];
                        let mu = u32::from(state)
                            .min(u32::from(max_order))
                            .min(g.remaining_capacity(target))
                            .min(g.remaining_capacity(c)) as u8;
                        if mu == 0 || target == c || g.has_edge(c, target) {
                            (TraceAction::Skip, state)
                        } else {
                            g.add_edge(c, target, mu);
                            (TraceAction::CloseRing { from: c, to: target, multiplicity: mu }, state - mu)
                        }
                    }
                    _ => (TraceAction::Skip, state),
                };
                step(action, state_after, trace);
                trace.steps.push(TraceStep {
                    symbol: tokens[i + 1],
                    position: number_pos,
                    state_before,
                    action: TraceAction::RingNumber { number_value: n, position: number_pos },
                    state_after,
                    branch_depth: depth,
                });
                i += 2;
                if state_after == 0 {
                    return;
                }
                state = state_after;
            }
        }
    }
}

/// Lookup helper from symbol names to indices.
pub fn name_index(spec: &GrammarSpec) -> HashMap<&str, usize> {
    spec.alphabet.iter().map(|s| (s.name.as_str(), s.index)).collect()
}
