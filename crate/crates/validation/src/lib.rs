//! The acceptance test matrix and a small pass/fail ledger for the criteria run against it.

use std::fmt;

use plap_core::{Problem, Source};

/// Exponents of the matrix.
pub const EXPONENTS: [f64; 7] = [1.2, 1.5, 1.8, 2.5, 3.0, 4.0, 8.0];
pub const DIMENSIONS: [usize; 2] = [2, 3];
/// Regularizations used when `p < 2`.
pub const EPSILONS: [f64; 3] = [0.2, 0.1, 0.05];
/// Nodes of the acceptance grid.
pub const GRID_NODES: usize = 1025;
/// Knots of the tabulated `-(1 + r²)` source.
pub const TABLE_KNOTS: usize = 201;

/// One sign-consistent source of the matrix with a printable name.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedSource {
    pub name: &'static str,
    pub source: Source,
}

pub fn sources(r_inner: f64, r_outer: f64) -> Vec<NamedSource> {
    let table = Source::tabulate(r_inner, r_outer, TABLE_KNOTS, |r| -(1.0 + r * r)).expect("valid table");
    vec![
        NamedSource { name: "+1", source: Source::constant(1.0) },
        NamedSource { name: "-1", source: Source::constant(-1.0) },
        NamedSource { name: "r", source: Source::power(1.0, 1.0) },
        NamedSource { name: "-(1+r^2)", source: table },
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixCase {
    pub label: String,
    pub source_name: &'static str,
    pub spec: Problem,
}

/// `p × n × f × ε` on `[1, 2]`, with the ε axis only for `p < 2`: 104 cases.
pub fn matrix() -> Vec<MatrixCase> {
    let mut cases = Vec::new();
    for p in EXPONENTS {
        let eps: &[f64] = if p < 2.0 { &EPSILONS } else { &[0.0] };
        for dim in DIMENSIONS {
            for named in sources(1.0, 2.0) {
                for &e in eps {
                    cases.push(MatrixCase {
                        label: format!("p={p} n={dim} f={} eps={e}", named.name),
                        source_name: named.name,
                        spec: Problem::new(1.0, 2.0, dim, p, e, named.source.clone()),
                    });
                }
            }
        }
    }
    cases
}

/// Outcome of one acceptance criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub number: usize,
    pub title: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "criterion {:>2} [{tag}] {}: {}", self.number, self.title, self.detail)
    }
}
