//! Minimal SMILES-subset parser and writer.
//!
//! Covered subset: atoms C, N, O, F; aromatic c, n, o; bonds `-` `=` `#`;
//! branches `(` `)`; ring closures `1`-`9` and `%nn`. Aromatic subgraphs are
//! kekulized before a graph is returned, and every returned graph passes
//! valence validation. Everything else (charges, stereo marks, dots,
//! isotopes, bracket atoms) is rejected with a positioned error.

use crate::chem::{core_valence_table, validate_molecule};
use crate::grammar::LabeledGraph;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SmilesErrorKind {
    #[error("empty input")]
    Empty,
    #[error("unsupported character {0:?}")]
    UnsupportedCharacter(char),
    #[error("unmatched opening parenthesis")]
    UnmatchedOpenParen,
    #[error("unmatched closing parenthesis")]
    UnmatchedCloseParen,
    #[error("branch opened before any atom")]
    BranchWithoutAtom,
    #[error("ring bond {0} was never closed")]
    UnclosedRingBond(u16),
    #[error("ring bond before any atom")]
    RingBondWithoutAtom,
    #[error("ring bond {0} closes onto its own atom")]
    SelfRingBond(u16),
    #[error("conflicting bond orders at ring closure {0}")]
    RingBondConflict(u16),
    #[error("duplicate bond between atoms")]
    DuplicateBond,
    #[error("bond symbol with nothing to bond")]
    DanglingBond,
    #[error("valence exceeded at atom {atom}: {used} > {max}")]
    ValenceViolation { atom: usize, used: u32, max: u8 },
    #[error("kekulization failed: no alternating assignment covers atom {atom}")]
    Kekulization { atom: usize },
}

/// A SMILES parse error with its byte position in the input line.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("at column {}: {kind}", position + 1)]
pub struct SmilesError {
    pub position: usize,
    pub kind: SmilesErrorKind,
}

impl SmilesError {
    fn new(position: usize, kind: SmilesErrorKind) -> Self {
        Self { position, kind }
    }

    /// Short machine-readable category tag for diagnostics streams.
    pub fn category(&self) -> &'static str {
        use SmilesErrorKind::*;
        match self.kind {
            Empty => "empty",
            UnsupportedCharacter(_) => "unsupported-character",
            UnmatchedOpenParen | UnmatchedCloseParen | BranchWithoutAtom => "parenthesis",
            UnclosedRingBond(_) | RingBondWithoutAtom | SelfRingBond(_) | RingBondConflict(_) => {
                "ring-bond"
            }
            DuplicateBond => "duplicate-bond",
            DanglingBond => "bond",
            ValenceViolation { .. } => "valence",
            Kekulization { .. } => "kekulization",
        }
    }
}

/// An atom before kekulization.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnnotatedAtom {
    pub element: String,
    pub aromatic: bool,
}

/// A bond before kekulization; `order: None` means "default" (single, or
/// subject to kekulization when both endpoints are aromatic).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnnotatedBond {
    pub u: usize,
    pub v: usize,
    pub order: Option<u8>,
}

/// Intermediate molecule with aromatic flags, the input to [`kekulize`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AnnotatedMolecule {
    pub atoms: Vec<AnnotatedAtom>,
    pub bonds: Vec<AnnotatedBond>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum KekulizeError {
    #[error("no alternating bond assignment covers atom {atom}")]
    NoMatching { atom: usize },
    #[error("unknown element {0}")]
    UnknownElement(String),
}

/// Assign alternating single/double orders to the aromatic subsystem via a
/// matching over atoms that need one double bond, then resolve all remaining
/// default bonds to single.
pub fn kekulize(m: &AnnotatedMolecule) -> Result<LabeledGraph, KekulizeError> {
    let vt = core_valence_table();
    let n = m.atoms.len();

    // Atoms already holding an explicit multiple bond do not need another.
    let mut has_explicit_multiple = vec![false; n];
    for b in &m.bonds {
        if b.order.unwrap_or(1) > 1 {
            has_explicit_multiple[b.u] = true;
            has_explicit_multiple[b.v] = true;
        }
    }
    // Aromatic carbons must take exactly one double bond; aromatic nitrogens
    // may (pyridine) or may not (pyrrole); aromatic oxygens never do.
    let mut required = vec![false; n];
    let mut matchable = vec![false; n];
    for (i, a) in m.atoms.iter().enumerate() {
        if !a.aromatic || has_explicit_multiple[i] {
            continue;
        }
        match a.element.as_str() {
            "C" => {
                required[i] = true;
                matchable[i] = true;
            }
            "N" => matchable[i] = true,
            _ => {}
        }
    }
    // Candidate edges: default-order bonds between two matchable aromatic atoms.
    let mut candidates: Vec<Vec<usize>> = vec![Vec::new(); n];
    for b in &m.bonds {
        if b.order.is_none() && matchable[b.u] && matchable[b.v] {
            candidates[b.u].push(b.v);
            candidates[b.v].push(b.u);
        }
    }
    let mut matched: Vec<Option<usize>> = vec![None; n];
    if !match_required(&required, &candidates, &mut matched, 0) {
        let atom = (0..n)
            .find(|&i| required[i] && matched[i].is_none())
            .unwrap_or(0);
        return Err(KekulizeError::NoMatching { atom });
    }

    let mut g = LabeledGraph::new();
    for (type_id, a) in m.atoms.iter().enumerate() {
        let max = vt
            .valence(&a.element)
            .ok_or_else(|| KekulizeError::UnknownElement(a.element.clone()))?;
        g.add_vertex(type_id, a.element.clone(), max);
    }
    for b in &m.bonds {
        let order = match b.order {
            Some(o) => o,
            None => {
                if matched[b.u] == Some(b.v) {
                    2
                } else {
                    1
                }
            }
        };
        g.add_edge(b.u, b.v, order);
    }
    Ok(g)
}

fn match_required(
    required: &[bool],
    candidates: &[Vec<usize>],
    matched: &mut Vec<Option<usize>>,
    from: usize,
) -> bool {
    let next = (from..required.len()).find(|&i| required[i] && matched[i].is_none());
    let u = match next {
        None => return true,
        Some(u) => u,
    };
    for &w in &candidates[u] {
        if matched[w].is_some() {
            continue;
        }
        matched[u] = Some(w);
        matched[w] = Some(u);
        if match_required(required, candidates, matched, u + 1) {
            return true;
        }
        matched[u] = None;
        matched[w] = None;
    }
    false
}

/// Parse one SMILES line into a validated labeled graph.
pub fn parse_smiles(text: &str) -> Result<LabeledGraph, SmilesError> {
    let (mol, atom_pos) = scan(text)?;
    if mol.atoms.is_empty() {
        return Err(SmilesError::new(0, SmilesErrorKind::Empty));
    }
    let g = kekulize(&mol).map_err(|e| match e {
        KekulizeError::NoMatching { atom } => {
            SmilesError::new(atom_pos[atom], SmilesErrorKind::Kekulization { atom })
        }
        KekulizeError::UnknownElement(_) => unreachable!("scanner only admits known elements"),
    })?;
    let report = validate_molecule(&g, &core_valence_table())
        .expect("scanner only admits known elements");
    if let Some(v) = report.violations.first() {
        return Err(SmilesError::new(
            atom_pos[v.atom],
            SmilesErrorKind::ValenceViolation { atom: v.atom, used: v.used, max: v.max },
        ));
    }
    Ok(g)
}

/// True iff the text parses under the subset grammar and passes validation.
pub fn is_valid_smiles(text: &str) -> bool {
    parse_smiles(text).is_ok()
}

fn scan(text: &str) -> Result<(AnnotatedMolecule, Vec<usize>), SmilesError> {
    let mut mol = AnnotatedMolecule::default();
    let mut atom_pos: Vec<usize> = Vec::new();
    let mut prev: Option<usize> = None;
    let mut stack: Vec<(usize, usize)> = Vec::new(); // (atom, position of '(')
    let mut pending: Option<(u8, usize)> = None;
    let mut open_rings: std::collections::HashMap<u16, (usize, Option<u8>, usize)> =
        std::collections::HashMap::new();

    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            'C' | 'N' | 'O' | 'F' | 'c' | 'n' | 'o' => {
                let aromatic = c.is_ascii_lowercase();
                let atom = mol.atoms.len();
                mol.atoms.push(AnnotatedAtom {
                    element: c.to_ascii_uppercase().to_string(),
                    aromatic,
                });
                atom_pos.push(i);
                if let Some(p) = prev {
                    push_bond(&mut mol, p, atom, pending.take().map(|(o, _)| o), i)?;
                }
                pending = None;
                prev = Some(atom);
                i += 1;
            }
            '-' | '=' | '#' => {
                if pending.is_some() || prev.is_none() {
                    return Err(SmilesError::new(i, SmilesErrorKind::DanglingBond));
                }
                let order = match c {
                    '-' => 1,
                    '=' => 2,
                    _ => 3,
                };
                pending = Some((order, i));
                i += 1;
            }
            '1'..='9' | '%' => {
                let (id, consumed) = if c == '%' {
                    let d1 = bytes.get(i + 1).filter(|b| b.is_ascii_digit());
                    let d2 = bytes.get(i + 2).filter(|b| b.is_ascii_digit());
                    match (d1, d2) {
                        (Some(&d1), Some(&d2)) => {
                            let id = u16::from(d1 - b'0') * 10 + u16::from(d2 - b'0');
                            if id == 0 {
                                return Err(SmilesError::new(
                                    i,
                                    SmilesErrorKind::UnsupportedCharacter('%'),
                                ));
                            }
                            (id, 3)
                        }
                        _ => {
                            return Err(SmilesError::new(
                                i,
                                SmilesErrorKind::UnsupportedCharacter('%'),
                            ))
                        }
                    }
                } else {
                    ((c as u8 - b'0') as u16, 1)
                };
                let here = match prev {
                    Some(a) => a,
                    None => return Err(SmilesError::new(i, SmilesErrorKind::RingBondWithoutAtom)),
                };
                let here_order = pending.take().map(|(o, _)| o);
                match open_rings.remove(&id) {
                    Some((there, there_order, _)) => {
                        if there == here {
                            return Err(SmilesError::new(i, SmilesErrorKind::SelfRingBond(id)));
                        }
                        let order = match (here_order, there_order) {
                            (None, o) | (o, None) => o,
                            (Some(a), Some(b)) if a == b => Some(a),
                            _ => {
                                return Err(SmilesError::new(
                                    i,
                                    SmilesErrorKind::RingBondConflict(id),
                                ))
                            }
                        };
                        push_bond(&mut mol, there, here, order, i)?;
                    }
                    None => {
                        open_rings.insert(id, (here, here_order, i));
                    }
                }
                i += consumed;
            }
            '(' => {
                let here = match prev {
                    Some(a) => a,
                    None => return Err(SmilesError::new(i, SmilesErrorKind::BranchWithoutAtom)),
                };
                if pending.is_some() {
                    return Err(SmilesError::new(i, SmilesErrorKind::DanglingBond));
                }
                stack.push((here, i));
                i += 1;
            }
            ')' => {
                if pending.is_some() {
                    return Err(SmilesError::new(i, SmilesErrorKind::DanglingBond));
                }
                match stack.pop() {
                    Some((a, _)) => prev = Some(a),
                    None => return Err(SmilesError::new(i, SmilesErrorKind::UnmatchedCloseParen)),
                }
                i += 1;
            }
            other => {
                return Err(SmilesError::new(i, SmilesErrorKind::UnsupportedCharacter(other)));
            }
        }
    }
    if let Some((_, pos)) = pending {
        return Err(SmilesError::new(pos, SmilesErrorKind::DanglingBond));
    }
    if let Some(&(_, pos)) = stack.last() {
        return Err(SmilesError::new(pos, SmilesErrorKind::UnmatchedOpenParen));
    }
    if let Some((&id, &(_, _, pos))) = open_rings.iter().min_by_key(|(_, (_, _, p))| *p) {
        return Err(SmilesError::new(pos, SmilesErrorKind::UnclosedRingBond(id)));
    }
    Ok((mol, atom_pos))
}

fn push_bond(
    mol: &mut AnnotatedMolecule,
    u: usize,
    v: usize,
    order: Option<u8>,
    pos: usize,
) -> Result<(), SmilesError> {
    if mol
        .bonds
        .iter()
        .any(|b| (b.u == u && b.v == v) || (b.u == v && b.v == u))
    {
        return Err(SmilesError::new(pos, SmilesErrorKind::DuplicateBond));
    }
    mol.bonds.push(AnnotatedBond { u, v, order });
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SmilesWriteError {
    #[error("cannot write an empty graph")]
    Empty,
    #[error("cannot write a disconnected graph")]
    Disconnected,
    #[error("unsupported bond order {0}")]
    UnsupportedBondOrder(u8),
    #[error("more than 99 simultaneous ring closures")]
    TooManyRings,
}

fn bond_symbol(order: u8) -> Result<&'static str, SmilesWriteError> {
    match order {
        1 => Ok(""),
        2 => Ok("="),
        3 => Ok("#"),
        o => Err(SmilesWriteError::UnsupportedBondOrder(o)),
    }
}

/// Write a kekulized SMILES string: DFS from vertex 0, neighbors in index
/// order, ring-closure digits assigned in discovery order.
pub fn write_smiles(g: &LabeledGraph) -> Result<String, SmilesWriteError> {
    let n = g.vertices.len();
    if n == 0 {
        return Err(SmilesWriteError::Empty);
    }
    if !g.is_connected() {
        return Err(SmilesWriteError::Disconnected);
    }
    let mut adj: Vec<Vec<(usize, u8)>> = vec![Vec::new(); n];
    for e in &g.edges {
        adj[e.u].push((e.v, e.multiplicity));
        adj[e.v].push((e.u, e.multiplicity));
    }
    for row in &mut adj {
        row.sort_unstable();
    }

    // pass 1: DFS tree and back edges (recorded at the later endpoint)
    let mut discovery = vec![usize::MAX; n];
    let mut children: Vec<Vec<(usize, u8)>> = vec![Vec::new(); n];
    let mut ring_edges: Vec<(usize, usize, u8)> = Vec::new(); // (later, earlier, order)
    let mut clock = 1usize;
    let mut stack: Vec<(usize, usize)> = vec![(0, 0)];
    discovery[0] = 0;
    while let Some(frame) = stack.last_mut() {
        let (v, idx) = (frame.0, frame.1);
        if idx < adj[v].len() {
            frame.1 += 1;
            let (w, m) = adj[v][idx];
            if discovery[w] == usize::MAX {
                discovery[w] = clock;
                clock += 1;
                children[v].push((w, m));
                stack.push((w, 0));
            } else if discovery[w] < discovery[v] && !children[w].iter().any(|&(c, _)| c == v) {
                ring_edges.push((v, w, m));
            }
        } else {
            stack.pop();
        }
    }

    // ring digit assignment in discovery order of the earlier endpoint
    let mut rings_at: Vec<Vec<(usize, usize, u8)>> = vec![Vec::new(); n]; // atom -> (edge id, other, order)
    for (edge_id, &(later, earlier, m)) in ring_edges.iter().enumerate() {
        rings_at[earlier].push((edge_id, later, m));
        rings_at[later].push((edge_id, earlier, m));
    }
    for list in &mut rings_at {
        list.sort_by_key(|&(_, other, _)| discovery[other]);
    }

    let mut out = String::new();
    let mut digits: Vec<Option<u16>> = vec![None; ring_edges.len()];
    let mut next_digit: u16 = 1;
    emit(
        g,
        &children,
        &rings_at,
        0,
        &mut out,
        &mut digits,
        &mut next_digit,
    )?;
    Ok(out)
}

fn emit(
    g: &LabeledGraph,
    children: &[Vec<(usize, u8)>],
    rings_at: &[Vec<(usize, usize, u8)>],
    v: usize,
    out: &mut String,
    digits: &mut [Option<u16>],
    next_digit: &mut u16,
) -> Result<(), SmilesWriteError> {
    out.push_str(&g.vertices[v].label);
    for &(edge_id, _, m) in &rings_at[v] {
        let digit = match digits[edge_id] {
            Some(d) => d,
            None => {
                let d = *next_digit;
                if d > 99 {
                    return Err(SmilesWriteError::TooManyRings);
                }
                *next_digit += 1;
                digits[edge_id] = Some(d);
                d
            }
        };
        out.push_str(bond_symbol(m)?);
        if digit < 10 {
            out.push((b'0' + digit as u8) as char);
        } else {
            out.push('%');
            out.push((b'0' + (digit / 10) as u8) as char);
            out.push((b'0' + (digit % 10) as u8) as char);
        }
    }
    let kids = &children[v];
    for (i, &(c, m)) in kids.iter().enumerate() {
        let last = i + 1 == kids.len();
        if !last {
            out.push('(');
        }
        out.push_str(bond_symbol(m)?);
        emit(g, children, rings_at, c, out, digits, next_digit)?;
        if !last {
            out.push(')');
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::canonical_form;

    #[test]
    fn worked_example() {
        let g = parse_smiles("FC=C=N").unwrap();
        assert_eq!(g.vertices.len(), 4);
        let labels: Vec<_> = g.vertices.iter().map(|v| v.label.as_str()).collect();
        assert_eq!(labels, ["F", "C", "C", "N"]);
        assert_eq!(write_smiles(&g).unwrap(), "FC=C=N");
    }

    #[test]
    fn unmatched_ring_bond() {
        let err = parse_smiles("C1CC").unwrap_err();
        assert_eq!(err.kind, SmilesErrorKind::UnclosedRingBond(1));
        assert_eq!(err.position, 1);
    }

    #[test]
    fn fluorine_valence_violation() {
        let err = parse_smiles("F=F").unwrap_err();
        assert!(matches!(err.kind, SmilesErrorKind::ValenceViolation { max: 1, .. }));
    }

    #[test]
    fn benzene_kekulizes_alternating() {
        let g = parse_smiles("c1ccccc1").unwrap();
        let doubles = g.edges.iter().filter(|e| e.multiplicity == 2).count();
        let singles = g.edges.iter().filter(|e| e.multiplicity == 1).count();
        assert_eq!((singles, doubles), (3, 3));
        // every ring atom carries exactly one double bond
        for v in 0..6 {
            let d: u8 = g
                .neighbors(v)
                .iter()
                .filter(|&&(_, m)| m == 2)
                .map(|&(_, m)| m)
                .sum();
            assert_eq!(d, 2);
        }
    }

    #[test]
    fn odd_aromatic_system_fails() {
        let err = parse_smiles("c1cccc1").unwrap_err();
        assert!(matches!(err.kind, SmilesErrorKind::Kekulization { .. }));
    }

    #[test]
    fn empty_aromatic_set_is_identity() {
        let mol = AnnotatedMolecule {
            atoms: vec![
                AnnotatedAtom { element: "C".into(), aromatic: false },
                AnnotatedAtom { element: "O".into(), aromatic: false },
            ],
            bonds: vec![AnnotatedBond { u: 0, v: 1, order: Some(2) }],
        };
        let g = kekulize(&mol).unwrap();
        assert_eq!(g.edges.len(), 1);
        assert_eq!(g.edges[0].multiplicity, 2);
    }

    #[test]
    fn furan_and_pyridine() {
        assert!(is_valid_smiles("c1ccoc1"));
        assert!(is_valid_smiles("c1ccncc1"));
        assert!(!is_valid_smiles("c1cc[nH]cc1")); // brackets unsupported
    }

    #[test]
    fn branch_errors() {
        assert_eq!(parse_smiles("F(").unwrap_err().kind, SmilesErrorKind::UnmatchedOpenParen);
        assert_eq!(parse_smiles("CC)").unwrap_err().kind, SmilesErrorKind::UnmatchedCloseParen);
        assert_eq!(parse_smiles("(C)").unwrap_err().kind, SmilesErrorKind::BranchWithoutAtom);
    }

    #[test]
    fn unsupported_characters() {
        for text in ["C.C", "C[NH2]", "C/C=C/C", "C@C", "[13C]"] {
            let err = parse_smiles(text).unwrap_err();
            assert!(
                matches!(err.kind, SmilesErrorKind::UnsupportedCharacter(_)),
                "{text} gave {err:?}"
            );
        }
    }

    #[test]
    fn ring_bond_conflict() {
        let err = parse_smiles("C=1CCCCC#1").unwrap_err();
        assert_eq!(err.kind, SmilesErrorKind::RingBondConflict(1));
        // agreeing orders are fine
        assert!(is_valid_smiles("C=1CCCCC=1"));
        assert!(is_valid_smiles("C=1CCCCC1"));
    }

    #[test]
    fn single_atom_roundtrip() {
        let g = parse_smiles("C").unwrap();
        assert_eq!(write_smiles(&g).unwrap(), "C");
    }

    #[test]
    fn percent_ring_ids() {
        assert!(is_valid_smiles("C%11CCC%11"));
        assert!(matches!(
            parse_smiles("C%1CC").unwrap_err().kind,
            SmilesErrorKind::UnsupportedCharacter('%')
        ));
    }

    #[test]
    fn cyclopropane_roundtrip() {
        let g = parse_smiles("C1CC1").unwrap();
        assert_eq!(g.edges.len(), 3);
        let text = write_smiles(&g).unwrap();
        let g2 = parse_smiles(&text).unwrap();
        assert_eq!(canonical_form(&g).unwrap(), canonical_form(&g2).unwrap());
    }

    #[test]
    fn parse_never_panics_on_bytes() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let charset: Vec<char> = "CNOFcno-=#()123456789%.@[]\\/+ ".chars().collect();
        for _ in 0..5000 {
            let len = rng.gen_range(0..30);
            let text: String = (0..len)
                .map(|_| charset[rng.gen_range(0..charset.len())])
                .collect();
            let _ = parse_smiles(&text); // graph or structured error, never a panic
        }
    }

    #[test]
    fn write_parse_write_idempotent() {
        for text in ["FC=C=N", "C1CC1", "c1ccccc1", "CC(NC)Cc1ccc2c(c1)OCO2", "N#CC=O"] {
            let g = parse_smiles(text).unwrap();
            let once = write_smiles(&g).unwrap();
            let twice = write_smiles(&parse_smiles(&once).unwrap()).unwrap();
            assert_eq!(once, twice, "writer not idempotent for {text}");
        }
    }

    #[test]
    fn disconnected_graph_rejected_by_writer() {
        let mut g = LabeledGraph::new();
        g.add_vertex(0, "C", 4);
        g.add_vertex(0, "C", 4);
        assert_eq!(write_smiles(&g).unwrap_err(), SmilesWriteError::Disconnected);
    }
}
