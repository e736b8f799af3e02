//! Chemistry instantiation: valence table, the chemistry grammar, molecule
//! validation with implicit hydrogens, and canonical graph comparison.

use crate::derive::{derive_grammar, DeriveOptions, TypeSpec};
use crate::grammar::{GrammarSpec, LabeledGraph};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Element symbol -> maximum valence, in a fixed insertion order (the order
/// determines vertex symbol numbering in the derived grammar).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValenceTable {
    entries: Vec<(String, u8)>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ValenceTableError {
    #[error("empty valence table")]
    Empty,
    #[error("duplicate element {0}")]
    DuplicateElement(String),
    #[error("element {0} has valence 0")]
    ZeroValence(String),
    #[error("malformed valence entry {0:?} (expected ELEMENT:VALENCE)")]
    Malformed(String),
}

impl ValenceTable {
    pub fn new(entries: Vec<(String, u8)>) -> Result<Self, ValenceTableError> {
        if entries.is_empty() {
            return Err(ValenceTableError::Empty);
        }
        let mut seen = std::collections::HashSet::new();
        for (el, v) in &entries {
            if !seen.insert(el.clone()) {
                return Err(ValenceTableError::DuplicateElement(el.clone()));
            }
            if *v == 0 {
                return Err(ValenceTableError::ZeroValence(el.clone()));
            }
        }
        Ok(Self { entries })
    }

    /// Parse the CLI syntax `"C:4,N:3,O:2,F:1"`.
    pub fn parse(text: &str) -> Result<Self, ValenceTableError> {
        let mut entries = Vec::new();
        for part in text.split(',') {
            let part = part.trim();
            let (el, v) = part
                .split_once(':')
                .ok_or_else(|| ValenceTableError::Malformed(part.to_string()))?;
            let valence: u8 = v
                .trim()
                .parse()
                .map_err(|_| ValenceTableError::Malformed(part.to_string()))?;
            entries.push((el.trim().to_string(), valence));
        }
        Self::new(entries)
    }

    /// Parse the JSON file form `{"C": 4, "N": 3}`. Entries are ordered by
    /// descending valence then element name so the grammar is reproducible.
    pub fn from_json(text: &str) -> Result<Self, ValenceTableError> {
        let map: HashMap<String, u8> =
            serde_json::from_str(text).map_err(|e| ValenceTableError::Malformed(e.to_string()))?;
        let mut entries: Vec<(String, u8)> = map.into_iter().collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        Self::new(entries)
    }

    pub fn entries(&self) -> &[(String, u8)] {
        &self.entries
    }

    pub fn valence(&self, element: &str) -> Option<u8> {
        self.entries.iter().find(|(el, _)| el == element).map(|(_, v)| *v)
    }
}

/// The core table covering QM9-class heavy atoms.
pub fn core_valence_table() -> ValenceTable {
    ValenceTable::new(vec![
        ("C".into(), 4),
        ("N".into(), 3),
        ("O".into(), 2),
        ("F".into(), 1),
    ])
    .expect("core table is well-formed")
}

/// Edge multiplicities above this are never emitted by the chemistry grammar
/// (no quadruple bonds).
pub const CHEM_BOND_CAP: u8 = 3;

/// Ring symbol orders in the chemistry grammar.
pub const CHEM_RING_ORDERS: u8 = 3;

/// Build the chemistry grammar for a valence table. Vertex symbols enumerate
/// every requested multiplicity up to the element's valence, but derivation
/// clamps bond orders at [`CHEM_BOND_CAP`].
pub fn build_chem_grammar(vt: &ValenceTable) -> Result<GrammarSpec, ValenceTableError> {
    if vt.entries.is_empty() {
        return Err(ValenceTableError::Empty);
    }
    let ts = TypeSpec::new(vt.entries.clone());
    let spec = derive_grammar(
        &ts,
        DeriveOptions {
            multiplicity_cap: Some(CHEM_BOND_CAP),
            ring_orders: CHEM_RING_ORDERS.min(ts.max_degree()),
        },
    )
    .expect("non-empty valence table derives a grammar");
    Ok(spec)
}

/// A valence violation at one atom.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValenceViolation {
    pub atom: usize,
    pub used: u32,
    pub max: u8,
    pub message: String,
}

/// Per-molecule validity report with implicit hydrogen counts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoleculeReport {
    /// Implicit hydrogens per atom (`max valence - used bonds`, floored at 0).
    pub hydrogens: Vec<u8>,
    pub violations: Vec<ValenceViolation>,
}

impl MoleculeReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ChemError {
    #[error("unknown element {0}")]
    UnknownElement(String),
    #[error("graph has {0} vertices, over the canonicalization limit of {MAX_CANONICAL_VERTICES}")]
    TooLarge(usize),
}

/// Check valence bounds and structural soundness against a valence table,
/// independent of whatever grammar produced the graph.
pub fn validate_molecule(g: &LabeledGraph, vt: &ValenceTable) -> Result<MoleculeReport, ChemError> {
    let mut maxes = Vec::with_capacity(g.vertices.len());
    for v in &g.vertices {
        maxes.push(
            vt.valence(&v.label)
                .ok_or_else(|| ChemError::UnknownElement(v.label.clone()))?,
        );
    }
    let mut used = vec![0u32; g.vertices.len()];
    let mut violations = Vec::new();
    for e in &g.edges {
        if e.u == e.v {
            violations.push(ValenceViolation {
                atom: e.u,
                used: 0,
                max: maxes[e.u],
                message: "self-loop".into(),
            });
            continue;
        }
        used[e.u] += u32::from(e.multiplicity);
        used[e.v] += u32::from(e.multiplicity);
    }
    for (i, e) in g.edges.iter().enumerate() {
        for f in &g.edges[i + 1..] {
            if (e.u == f.u && e.v == f.v) || (e.u == f.v && e.v == f.u) {
                violations.push(ValenceViolation {
                    atom: e.u,
                    used: used[e.u],
                    max: maxes[e.u],
                    message: format!("duplicate edge {}-{}", e.u, e.v),
                });
            }
        }
    }
    let mut hydrogens = Vec::with_capacity(g.vertices.len());
    for (atom, (&used, &max)) in used.iter().zip(&maxes).enumerate() {
        if used > u32::from(max) {
            violations.push(ValenceViolation {
                atom,
                used,
                max,
                message: format!("valence exceeded: {used} > {max}"),
            });
        }
        hydrogens.push(u8::try_from(u32::from(max).saturating_sub(used)).unwrap_or(0));
    }
    Ok(MoleculeReport { hydrogens, violations })
}

/// Size bound for [`canonical_form`].
pub const MAX_CANONICAL_VERTICES: usize = 64;

/// Canonical string for a labeled multigraph: equal strings iff the graphs
/// are isomorphic (labels, degrees and edge multiplicities respected).
///
/// Iterative neighborhood refinement first; remaining symmetric orderings are
/// resolved by individualization search, keeping the lexicographically least
/// adjacency encoding over all leaves.
pub fn canonical_form(g: &LabeledGraph) -> Result<String, ChemError> {
    let n = g.vertices.len();
    if n > MAX_CANONICAL_VERTICES {
        return Err(ChemError::TooLarge(n));
    }
    if n == 0 {
        return Ok("V:|E:".into());
    }

    let mut adj = vec![vec![0u8; n]; n];
    for e in &g.edges {
        adj[e.u][e.v] = e.multiplicity;
        adj[e.v][e.u] = e.multiplicity;
    }
    let keys: Vec<(String, u8)> = g
        .vertices
        .iter()
        .map(|v| (v.label.clone(), v.max_degree))
        .collect();

    let initial = rank_by(&(0..n).map(|v| keys[v].clone()).collect::<Vec<_>>());
    let mut best: Option<String> = None;
    search(g, &adj, &keys, refine(&adj, initial), &mut best);
    Ok(best.expect("at least one leaf"))
}

/// Replace colors with their sorted rank, so equal keys share a color.
fn rank_by<K: Ord + Clone>(colors: &[K]) -> Vec<usize> {
    let mut sorted: Vec<K> = colors.to_vec();
    sorted.sort();
    sorted.dedup();
    colors
        .iter()
        .map(|k| sorted.binary_search(k).unwrap())
        .collect()
}

/// One round of refinement until the partition is stable.
fn refine(adj: &[Vec<u8>], mut colors: Vec<usize>) -> Vec<usize> {
    let n = colors.len();
    loop {
        let mut keys: Vec<(usize, Vec<(u8, usize)>)> = Vec::with_capacity(n);
        for v in 0..n {
            let mut sig: Vec<(u8, usize)> = (0..n)
                .filter(|&w| adj[v][w] > 0)
                .map(|w| (adj[v][w], colors[w]))
                .collect();
            sig.sort_unstable();
            keys.push((colors[v], sig));
        }
        let new_colors = rank_by(&keys);
        if new_colors == colors {
            return colors;
        }
        colors = new_colors;
    }
}

fn search(
    g: &LabeledGraph,
    adj: &[Vec<u8>],
    keys: &[(String, u8)],
    colors: Vec<usize>,
    best: &mut Option<String>,
) {
    let n = colors.len();
    // find the first non-singleton color class
    let mut class: Option<usize> = None;
    'outer: for c in 0..n {
        let members: Vec<usize> = (0..n).filter(|&v| colors[v] == c).collect();
        if members.len() > 1 {
            class = Some(c);
            break 'outer;
        }
    }
    match class {
        None => {
            // discrete: colors are a permutation
            let mut order = vec![0usize; n];
            for v in 0..n {
                order[colors[v]] = v;
            }
            let enc = encode(g, adj, keys, &order);
            if best.as_ref().is_none_or(|b| enc < *b) {
                *best = Some(enc);
            }
        }
        Some(c) => {
            let members: Vec<usize> = (0..n).filter(|&v| colors[v] == c).collect();
            for &v in &members {
                // individualize v ahead of its class
                let mut keys2: Vec<(usize, bool)> =
                    colors.iter().map(|&col| (col, true)).collect();
                keys2[v] = (c, false);
                let split = rank_by(&keys2);
                search(g, adj, keys, refine(adj, split), best);
            }
        }
    }
}

fn encode(g: &LabeledGraph, adj: &[Vec<u8>], keys: &[(String, u8)], order: &[usize]) -> String {
    let n = order.len();
    let mut pos = vec![0usize; n];
    for (p, &v) in order.iter().enumerate() {
        pos[v] = p;
    }
    let mut edges: Vec<(usize, usize, u8)> = g
        .edges
        .iter()
        .map(|e| {
            let (a, b) = (pos[e.u].min(pos[e.v]), pos[e.u].max(pos[e.v]));
            (a, b, adj[e.u][e.v])
        })
        .collect();
    edges.sort_unstable();
    let vpart: Vec<String> = order
        .iter()
        .map(|&v| format!("{}/{}", keys[v].0, keys[v].1))
        .collect();
    let epart: Vec<String> = edges
        .iter()
        .map(|(a, b, m)| format!("{a}-{b}:{m}"))
        .collect();
    format!("V:{}|E:{}", vpart.join(","), epart.join(","))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::derive_graph;

    fn graph(edges: &[(usize, usize, u8)], labels: &[&str]) -> LabeledGraph {
        let vt = core_valence_table();
        let mut g = LabeledGraph::new();
        for (i, l) in labels.iter().enumerate() {
            g.add_vertex(i, *l, vt.valence(l).unwrap());
        }
        for &(u, v, m) in edges {
            g.add_edge(u, v, m);
        }
        g
    }

    #[test]
    fn worked_example_hydrogens() {
        let g = graph(&[(0, 1, 1), (1, 2, 2), (2, 3, 2)], &["F", "C", "C", "N"]);
        let report = validate_molecule(&g, &core_valence_table()).unwrap();
        assert!(report.is_valid());
        assert_eq!(report.hydrogens, [0, 1, 0, 1]);
    }

    #[test]
    fn five_bonds_on_carbon_invalid() {
        let g = graph(
            &[(0, 1, 1), (0, 2, 1), (0, 3, 1), (0, 4, 1), (0, 5, 1)],
            &["C", "C", "C", "C", "C", "C"],
        );
        let report = validate_molecule(&g, &core_valence_table()).unwrap();
        assert!(!report.is_valid());
        assert!(report.violations.iter().any(|v| v.atom == 0 && v.used == 5));
    }

    #[test]
    fn duplicate_edge_invalid() {
        let mut g = graph(&[(0, 1, 1)], &["C", "C"]);
        g.edges.push(crate::grammar::Edge { u: 1, v: 0, multiplicity: 1 });
        let report = validate_molecule(&g, &core_valence_table()).unwrap();
        assert!(!report.is_valid());
    }

    #[test]
    fn unknown_element_is_input_error() {
        let mut g = LabeledGraph::new();
        g.add_vertex(0, "Xx", 2);
        assert_eq!(
            validate_molecule(&g, &core_valence_table()).unwrap_err(),
            ChemError::UnknownElement("Xx".into())
        );
    }

    #[test]
    fn edge_order_does_not_matter() {
        let mut g = graph(&[(0, 1, 1), (1, 2, 2), (2, 3, 2)], &["F", "C", "C", "N"]);
        let a = validate_molecule(&g, &core_valence_table()).unwrap();
        g.edges.reverse();
        let b = validate_molecule(&g, &core_valence_table()).unwrap();
        assert_eq!(a.is_valid(), b.is_valid());
        assert_eq!(a.hydrogens, b.hydrogens);
    }

    #[test]
    fn cyclopropane_orderings_agree() {
        let a = graph(&[(0, 1, 1), (1, 2, 1), (2, 0, 1)], &["C", "C", "C"]);
        let b = graph(&[(2, 1, 1), (0, 2, 1), (1, 0, 1)], &["C", "C", "C"]);
        assert_eq!(canonical_form(&a).unwrap(), canonical_form(&b).unwrap());
    }

    #[test]
    fn ethane_methane_differ() {
        let ethane = graph(&[(0, 1, 1)], &["C", "C"]);
        let methane = graph(&[], &["C"]);
        assert_ne!(canonical_form(&ethane).unwrap(), canonical_form(&methane).unwrap());
    }

    #[test]
    fn size_limit_enforced() {
        let labels: Vec<&str> = std::iter::repeat_n("C", 65).collect();
        let g = graph(&[], &labels);
        assert!(matches!(canonical_form(&g), Err(ChemError::TooLarge(65))));
    }

    #[test]
    fn multiplicity_distinguishes() {
        let single = graph(&[(0, 1, 1)], &["C", "C"]);
        let double = graph(&[(0, 1, 2)], &["C", "C"]);
        assert_ne!(canonical_form(&single).unwrap(), canonical_form(&double).unwrap());
    }

    #[test]
    fn permutation_oracle() {
        use rand::seq::SliceRandom;
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let spec = build_chem_grammar(&core_valence_table()).unwrap();
        let mut checked = 0;
        while checked < 1000 {
            let len = rng.gen_range(1..30);
            let symbols: Vec<usize> =
                (0..len).map(|_| rng.gen_range(0..spec.alphabet_len())).collect();
            let g = derive_graph(&spec, &symbols).unwrap();
            if g.vertices.is_empty() {
                continue;
            }
            let mut perm: Vec<usize> = (0..g.vertices.len()).collect();
            perm.shuffle(&mut rng);
            let permuted = permute(&g, &perm);
            assert_eq!(
                canonical_form(&g).unwrap(),
                canonical_form(&permuted).unwrap(),
                "permutation changed canonical form"
            );
            checked += 1;
        }
    }

    pub fn permute(g: &LabeledGraph, perm: &[usize]) -> LabeledGraph {
        // perm[old] = new
        let mut out = LabeledGraph::new();
        let mut inv = vec![0usize; perm.len()];
        for (old, &new) in perm.iter().enumerate() {
            inv[new] = old;
        }
        for &old in &inv {
            let v = &g.vertices[old];
            out.add_vertex(v.type_id, v.label.clone(), v.max_degree);
        }
        for e in &g.edges {
            out.add_edge(perm[e.u], perm[e.v], e.multiplicity);
        }
        out
    }

    #[test]
    fn chem_grammar_shape() {
        let spec = build_chem_grammar(&core_valence_table()).unwrap();
        assert_eq!(spec.r, 4);
        let counts = crate::derive::rule_counts(&spec);
        assert_eq!(counts.n, 10); // 4 + 3 + 2 + 1
        assert_eq!(counts.p, 3);
        for name in ["[C]", "[=C]", "[#C]", "[Branch1]", "[Ring]", "[=Ring]", "[#Ring]"] {
            assert!(spec.symbol_by_name(name).is_some(), "missing {name}");
        }
    }

    #[test]
    fn fluorine_only_grammar() {
        let vt = ValenceTable::new(vec![("F".into(), 1)]).unwrap();
        let spec = build_chem_grammar(&vt).unwrap();
        assert_eq!(spec.r, 1);
        assert_eq!(crate::derive::rule_counts(&spec).m, 0);
    }

    #[test]
    fn decoded_strings_always_validate() {
        use rand::{Rng, SeedableRng};
        let vt = core_valence_table();
        let spec = build_chem_grammar(&vt).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            let len = rng.gen_range(0..60);
            let symbols: Vec<usize> =
                (0..len).map(|_| rng.gen_range(0..spec.alphabet_len())).collect();
            let g = derive_graph(&spec, &symbols).unwrap();
            let report = validate_molecule(&g, &vt).unwrap();
            assert!(report.is_valid(), "invalid decode for {symbols:?}");
        }
    }

    #[test]
    fn valence_table_cli_syntax() {
        let vt = ValenceTable::parse("C:4,N:3,O:2,F:1").unwrap();
        assert_eq!(vt, core_valence_table());
        assert!(ValenceTable::parse("C4").is_err());
    }
}
