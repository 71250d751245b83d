//! The `.bart` model language.
//!
//! ```text
//! # comments run to end of line
//! network chain2 {
//!   node A { values: [t, f]; prior: [0.3, 0.7]; }
//!   node B { values: [t, f]; parents: [A]; cpt: {0.9, 0.1; 0.2, 0.8}; }
//! }
//! ```
//!
//! Gates are written `model: noisy_or(A: 0.8, B: 0.9, leak: 0.05);`,
//! `model: noisy_max(A: {rows}, leak: [dist]);` or `model: bool(A = t & !B = t);`.
//! Taxonomy classes may name the knowledge group that scores them with
//! `class C = [s1, s2] via NETWORK : NODE = VALUE;`. Templates are declared
//! with `template T(formals) { ... }` and instantiated with
//! `use T(args) as prefix in NETWORK;`.

mod ast;
mod lower;
mod parser;
mod serialize;
mod template;

pub use ast::*;
pub use lower::{check_references, lower, lower_diagram, lower_network, lower_taxonomy, Lowered};
pub use parser::{parse, parse_bytes};
pub use serialize::{format_number, serialize};
pub use template::expand_templates;
