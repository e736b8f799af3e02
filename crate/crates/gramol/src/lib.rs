//! Robust grammar-based string representations for labeled graphs.
//!
//! The core idea: encode a graph as a sequence of symbols whose meaning is
//! given by a state-indexed rule table, where the state tracks how many
//! bonds the next edge may use. Because every (state, symbol) cell has a
//! rule, *every* symbol string decodes to a degree-valid graph, which makes
//! the representation safe to mutate and sample at random.
//!
//! Modules:
//! - [`grammar`]: grammar tables, the derivation engine, traces, validation
//! - [`derive`]: automatic grammar construction from a type/degree table
//! - [`chem`]: the chemistry instance (valences, molecule checks, canonical forms)
//! - [`smiles`]: a strict SMILES subset parser and writer used as the baseline
//! - [`codec`]: tokenizer plus the graph-to-string encoder and inverse decoder
//! - [`quantum`]: a second instance over quantum-optics components
//! - [`harness`]: mutation-robustness experiments, random sampling, one-hot I/O

pub mod chem;
pub mod codec;
pub mod derive;
pub mod grammar;
pub mod harness;
pub mod quantum;
pub mod smiles;
