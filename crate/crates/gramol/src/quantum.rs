//! A second grammar instance over quantum-optics components, demonstrating
//! that the derivation engine is domain-independent. Components have
//! per-type connectivity bounds (a detector terminates a path, a beam
//! splitter joins up to four, and so on) and the grammar enforces them the
//! same way valences are enforced in chemistry.

use crate::grammar::{
    GrammarSpec, LabeledGraph, Production, SymbolDef, SymbolKind, VertexType,
    GRAMMAR_FORMAT_VERSION,
};
use serde::{Deserialize, Serialize};

/// Component label -> maximum degree. The degrees are inferred from the rule
/// table's state arithmetic (incoming bond plus successor state).
pub fn component_table() -> Vec<(&'static str, u8)> {
    vec![
        ("SPDC", 2),
        ("BS", 4),
        ("Holo", 2),
        ("DP", 2),
        ("Ref", 2),
        ("Det", 1),
    ]
}

/// Build the quantum-optics grammar: states `X_0..X_3`, components SPDC, BS,
/// Holo, DP, Ref, Det plus one branch and one ring operator. Symbol numeric
/// values follow the instance's own number row (1,2,3,4,5,6,8,9 — the value
/// 7 is absent), so they are stored explicitly instead of using indices.
pub fn quantum_grammar() -> GrammarSpec {
    let types: Vec<VertexType> = component_table()
        .into_iter()
        .map(|(label, max_degree)| VertexType { label: label.into(), max_degree })
        .collect();

    let mut alphabet = vec![SymbolDef {
        name: "[nop]".into(),
        kind: SymbolKind::Nop,
        index: 0,
        number: None,
    }];
    for (type_id, (label, _)) in component_table().iter().enumerate() {
        alphabet.push(SymbolDef {
            name: format!("[{label}]"),
            kind: SymbolKind::Vertex { type_id, multiplicity: 1 },
            index: alphabet.len(),
            number: None, // values 1..=6 coincide with the indices
        });
    }
    alphabet.push(SymbolDef {
        name: "[Y]".into(),
        kind: SymbolKind::Branch { class: 1 },
        index: 7,
        number: Some(8),
    });
    alphabet.push(SymbolDef {
        name: "[Z]".into(),
        kind: SymbolKind::Ring { order: 1 },
        index: 8,
        number: Some(9),
    });

    // column successors for the vertex symbols, transcribed row by row
    let start_next = [2u8, 3, 1, 1, 1, 0]; // X_0 row: SPDC, BS, Holo, DP, Ref, Det
    let later_next = [1u8, 3, 1, 1, 1, 0]; // X_1..X_3 rows

    let mut productions = Vec::with_capacity(4);
    for j in 0u8..=3 {
        let mut row = Vec::with_capacity(alphabet.len());
        row.push(Production::Epsilon); // [nop]
        for (type_id, _) in component_table().iter().enumerate() {
            row.push(if j == 0 {
                Production::Vertex { type_id, bond: 0, next: start_next[type_id] }
            } else {
                Production::Vertex { type_id, bond: 1, next: later_next[type_id] }
            });
        }
        // [Y]: pass-through in X_0/X_1, a branch starting fresh in X_0 above
        row.push(match j {
            0 | 1 => Production::Epsilon,
            2 => Production::Branch { branch_state: 0, next: 1 },
            _ => Production::Branch { branch_state: 0, next: 2 },
        });
        // [Z]: rings whenever a bond is available
        row.push(if j == 0 { Production::Epsilon } else { Production::Ring { max_order: 1 } });
        productions.push(row);
    }

    GrammarSpec {
        version: GRAMMAR_FORMAT_VERSION,
        r: 3,
        types,
        alphabet,
        productions,
    }
}

/// A connectivity violation at one component.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentViolation {
    pub vertex: usize,
    pub used: u32,
    pub max: u8,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("unknown component {0}")]
pub struct UnknownComponent(pub String);

/// Check per-component degree bounds (and structural soundness) against the
/// component table.
pub fn validate_experiment(g: &LabeledGraph) -> Result<Vec<ComponentViolation>, UnknownComponent> {
    let table = component_table();
    let mut out = Vec::new();
    for (i, v) in g.vertices.iter().enumerate() {
        let max = table
            .iter()
            .find(|(l, _)| *l == v.label)
            .map(|(_, d)| *d)
            .ok_or_else(|| UnknownComponent(v.label.clone()))?;
        let used = g.used_degree(i);
        if used > u32::from(max) {
            out.push(ComponentViolation { vertex: i, used, max });
        }
    }
    for e in &g.edges {
        if e.u == e.v {
            out.push(ComponentViolation { vertex: e.u, used: 0, max: 0 });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::tokenize;
    use crate::grammar::{derive_graph, derive_with_trace, validate_grammar};

    #[test]
    fn grammar_validates() {
        assert!(validate_grammar(&quantum_grammar()).is_empty());
    }

    #[test]
    fn start_state_spdc_cell() {
        let spec = quantum_grammar();
        let spdc = spec.symbol_by_name("[SPDC]").unwrap().index;
        assert_eq!(
            *spec.production(0, spdc),
            Production::Vertex { type_id: 0, bond: 0, next: 2 }
        );
    }

    #[test]
    fn y_is_epsilon_in_low_states() {
        let spec = quantum_grammar();
        let y = spec.symbol_by_name("[Y]").unwrap().index;
        assert_eq!(*spec.production(0, y), Production::Epsilon);
        assert_eq!(*spec.production(1, y), Production::Epsilon);
        assert_eq!(*spec.production(2, y), Production::Branch { branch_state: 0, next: 1 });
    }

    #[test]
    fn ring_in_x1_terminates() {
        let spec = quantum_grammar();
        // the third SPDC leaves the chain in X_1; the ring closes a triangle
        // back to the first SPDC, reaches X_0 and discards the trailing BS
        let s = tokenize(&spec, "[SPDC][SPDC][SPDC][Z][SPDC][BS]").unwrap();
        let (g, trace) = derive_with_trace(&spec, &s.0).unwrap();
        assert_eq!(g.vertices.len(), 3);
        assert_eq!(g.edges.len(), 3);
        let last = trace.steps.last().unwrap();
        assert_eq!(last.state_after, 0);
    }

    #[test]
    fn symbol_numbers_follow_value_row() {
        let spec = quantum_grammar();
        let num = |name: &str| spec.symbol_number(spec.symbol_by_name(name).unwrap().index);
        assert_eq!(num("[SPDC]"), 1);
        assert_eq!(num("[BS]"), 2);
        assert_eq!(num("[Det]"), 6);
        assert_eq!(num("[Y]"), 8);
        assert_eq!(num("[Z]"), 9);
    }

    #[test]
    fn single_spdc_is_valid() {
        let spec = quantum_grammar();
        let s = tokenize(&spec, "[SPDC]").unwrap();
        let g = derive_graph(&spec, &s.0).unwrap();
        assert_eq!(g.vertices.len(), 1);
        assert!(validate_experiment(&g).unwrap().is_empty());
    }

    #[test]
    fn overloaded_detector_is_invalid() {
        let mut g = LabeledGraph::new();
        g.add_vertex(5, "Det", 1);
        g.add_vertex(1, "BS", 4);
        g.add_vertex(1, "BS", 4);
        g.add_edge(0, 1, 1);
        g.add_edge(0, 2, 1);
        let violations = validate_experiment(&g).unwrap();
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].vertex, 0);
    }

    #[test]
    fn random_strings_all_valid() {
        use rand::{Rng, SeedableRng};
        let spec = quantum_grammar();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for _ in 0..1000 {
            let len = rng.gen_range(0..40);
            let symbols: Vec<usize> =
                (0..len).map(|_| rng.gen_range(0..spec.alphabet_len())).collect();
            let g = derive_graph(&spec, &symbols).unwrap();
            assert!(
                validate_experiment(&g).unwrap().is_empty(),
                "invalid experiment for {symbols:?}"
            );
        }
    }
}
