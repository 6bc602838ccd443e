//! UAI `MARKOV` text format, restricted to binary variables.
//!
//! ```text
//! MARKOV
//! 2            # number of variables
//! 2 2          # cardinalities
//! 1            # number of cliques
//! 2 0 1        # clique scopes: size followed by variable indices
//!
//! 4            # table for clique 0: entry count then entries
//!  1 2 3 4
//! ```
//!
//! Tokens are whitespace separated; line breaks carry no meaning.

use std::fmt::Write as _;

use super::{Factor, FactorGraph};
use crate::error::{Error, Result};

struct Tokens<'a> {
    items: Vec<(usize, &'a str)>,
    pos: usize,
    last_line: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        let items = text
            .lines()
            .enumerate()
            .flat_map(|(ln, line)| {
                let line = line.split('#').next().unwrap_or("");
                line.split_whitespace().map(move |t| (ln + 1, t))
            })
            .collect::<Vec<_>>();
        let last_line = text.lines().count().max(1);
        Tokens {
            items,
            pos: 0,
            last_line,
        }
    }

    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        let t = self.items.get(self.pos).copied().ok_or_else(|| Error::Parse {
            line: self.last_line,
            msg: format!("unexpected end of input, expected {what}"),
        })?;
        self.pos += 1;
        Ok(t)
    }

    fn usize(&mut self, what: &str) -> Result<(usize, usize)> {
        let (line, tok) = self.next(what)?;
        tok.parse::<usize>()
            .map(|v| (line, v))
            .map_err(|_| Error::Parse {
                line,
                msg: format!("expected {what}, found {tok:?}"),
            })
    }

    fn f64(&mut self, what: &str) -> Result<(usize, f64)> {
        let (line, tok) = self.next(what)?;
        tok.parse::<f64>()
            .map(|v| (line, v))
            .map_err(|_| Error::Parse {
                line,
                msg: format!("expected {what}, found {tok:?}"),
            })
    }
}

/// Parses a UAI `MARKOV` model with binary variables.
pub fn load_uai(text: &str) -> Result<FactorGraph> {
    let mut tok = Tokens::new(text);
    let (line, kind) = tok.next("preamble")?;
    if !kind.eq_ignore_ascii_case("MARKOV") {
        return Err(Error::Parse {
            line,
            msg: format!("expected MARKOV preamble, found {kind:?}"),
        });
    }
    let (_, n) = tok.usize("variable count")?;
    for var in 0..n {
        let (_, card) = tok.usize("cardinality")?;
        if card != 2 {
            return Err(Error::NonBinaryVariable { var, card });
        }
    }
    let (_, cliques) = tok.usize("clique count")?;
    let mut scopes = Vec::with_capacity(cliques);
    for _ in 0..cliques {
        let (line, size) = tok.usize("clique size")?;
        if size == 0 {
            return Err(Error::Parse {
                line,
                msg: "empty clique".into(),
            });
        }
        let mut scope = Vec::with_capacity(size);
        for _ in 0..size {
            let (line, v) = tok.usize("variable index")?;
            if v >= n {
                return Err(Error::Parse {
                    line,
                    msg: format!("variable index {v} out of range (n = {n})"),
                });
            }
            scope.push(v);
        }
        scopes.push((line, scope));
    }
    let mut factors = Vec::with_capacity(cliques);
    for (fi, (scope_line, scope)) in scopes.into_iter().enumerate() {
        let (line, len) = tok.usize("table size")?;
        let expected = 1usize << scope.len().min(30);
        if len != expected {
            return Err(Error::Parse {
                line,
                msg: format!("table size {len} for clique {fi}, expected {expected}"),
            });
        }
        let mut table = Vec::with_capacity(len);
        for _ in 0..len {
            let (_, v) = tok.f64("table entry")?;
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::BadTableEntry {
                    factor: fi,
                    value: v,
                });
            }
            table.push(v);
        }
        let factor = Factor::new(scope, table).map_err(|e| match e {
            Error::InvalidModel(msg) => Error::Parse {
                line: scope_line,
                msg,
            },
            other => other,
        })?;
        factors.push(factor);
    }
    if let Some(&(line, t)) = tok.items.get(tok.pos) {
        return Err(Error::Parse {
            line,
            msg: format!("trailing token {t:?}"),
        });
    }
    FactorGraph::new(n, factors)
}

/// Writes the model in UAI `MARKOV` format. Floats use Rust's shortest
/// round-trip representation, so `load_uai(&to_uai(fg)) == fg`.
pub fn to_uai(fg: &FactorGraph) -> String {
    let mut s = String::new();
    s.push_str("MARKOV\n");
    let _ = writeln!(s, "{}", fg.num_vars());
    let cards = vec!["2"; fg.num_vars()].join(" ");
    let _ = writeln!(s, "{cards}");
    let _ = writeln!(s, "{}", fg.factors().len());
    for f in fg.factors() {
        let vars: Vec<String> = f.scope().iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "{} {}", f.scope().len(), vars.join(" "));
    }
    for f in fg.factors() {
        s.push('\n');
        let _ = writeln!(s, "{}", f.table().len());
        let vals: Vec<String> = f.table().iter().map(|v| format!("{v:?}")).collect();
        let _ = writeln!(s, " {}", vals.join(" "));
    }
    s
}

/// Models serialize as their UAI text.
impl serde::Serialize for FactorGraph {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&to_uai(self))
    }
}

impl<'de> serde::Deserialize<'de> for FactorGraph {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        load_uai(&text).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_model() {
        let fg = load_uai("MARKOV\n1\n2\n1\n1 0\n2\n1 3\n").unwrap();
        assert_eq!(fg.num_vars(), 1);
        assert_eq!(fg.factors().len(), 1);
        assert_eq!(fg.factors()[0].table(), &[1.0, 3.0]);
    }

    #[test]
    fn pairwise_model_whitespace_insensitive() {
        let fg = load_uai("MARKOV 2 2 2 1 2 0 1 4 1 2\n3\n\n 4").unwrap();
        assert_eq!(fg.factors()[0].scope(), &[0, 1]);
        assert_eq!(fg.factors()[0].table().len(), 4);
    }

    #[test]
    fn rejects_non_binary() {
        let err = load_uai("MARKOV\n2\n2 3\n0\n").unwrap_err();
        assert_eq!(err, Error::NonBinaryVariable { var: 1, card: 3 });
        assert!(err.to_string().contains("non-binary variable"));
    }

    #[test]
    fn rejects_non_positive_entry() {
        let err = load_uai("MARKOV\n1\n2\n1\n1 0\n2\n0 3\n").unwrap_err();
        assert!(matches!(err, Error::BadTableEntry { factor: 0, .. }));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = load_uai("MARKOV\n1\n2\n1\n1 x\n").unwrap_err();
        assert_eq!(
            err,
            Error::Parse {
                line: 5,
                msg: "expected variable index, found \"x\"".into()
            }
        );
        let err = load_uai("BAYES\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = load_uai("MARKOV\n1\n2\n1\n1 0\n3\n1 2 3\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 6, .. }));
        let err = load_uai("MARKOV\n1\n2\n1\n1 0\n2\n1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
    }

    #[test]
    fn roundtrip() {
        let text = "MARKOV\n3\n2 2 2\n2\n2 0 2\n1 1\n4\n0.5 2 3 0.125\n2\n7 1e-3\n";
        let fg = load_uai(text).unwrap();
        assert_eq!(load_uai(&to_uai(&fg)).unwrap(), fg);
    }
}
