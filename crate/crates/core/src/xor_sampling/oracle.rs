//! Solution enumeration for `{(θ, δ) ∈ Δ_w} ∧ {parity system}`.
//!
//! Backends return at most `limit + 1` solutions; receiving `limit + 1`
//! tells the caller that there are more than `limit`.

use std::fmt::Write as _;

use super::parity::ParityConstraint;
use super::slices::{low_mask, SliceSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleSolution {
    /// Packed `(θ, δ)` pairs in backend-specific but deterministic order.
    pub solutions: Vec<u64>,
    /// More than `limit` solutions exist.
    pub truncated: bool,
}

impl OracleSolution {
    fn finish(mut solutions: Vec<u64>, limit: usize) -> Self {
        let truncated = solutions.len() > limit;
        solutions.truncate(limit + 1);
        OracleSolution {
            solutions,
            truncated,
        }
    }
}

/// A solver for the bounded solution-enumeration query.
pub trait Oracle: Send + Sync {
    fn name(&self) -> &'static str;

    fn solve(
        &self,
        slices: &SliceSet,
        parities: &[ParityConstraint],
        limit: usize,
    ) -> Result<OracleSolution>;
}

/// Tries every one of the `2^(n+Q)` packed pairs.
#[derive(Debug, Clone, Copy)]
pub struct ExhaustiveOracle {
    pub bit_cap: usize,
}

impl Default for ExhaustiveOracle {
    fn default() -> Self {
        ExhaustiveOracle { bit_cap: 26 }
    }
}

impl Oracle for ExhaustiveOracle {
    fn name(&self) -> &'static str {
        "exhaustive"
    }

    fn solve(
        &self,
        slices: &SliceSet,
        parities: &[ParityConstraint],
        limit: usize,
    ) -> Result<OracleSolution> {
        check_limit(limit)?;
        let bits = slices.total_bits();
        if bits > self.bit_cap {
            return Err(Error::OracleBudget {
                bits,
                cap: self.bit_cap,
            });
        }
        let mut out = Vec::new();
        for x in 0..1u64 << bits {
            if slices.is_admissible(x) && parities.iter().all(|c| c.satisfied_by(x)) {
                out.push(x);
                if out.len() > limit {
                    break;
                }
            }
        }
        Ok(OracleSolution::finish(out, limit))
    }
}

/// Depth-first search over `θ` then `δ` (most significant bit first) with
/// the parity system kept in reduced row-echelon form over GF(2).
///
/// Each row's pivot is its last variable in branching order, so a pivot
/// variable is forced the moment it is reached and the parity system never
/// causes backtracking. The slice predicate `δ < k(θ)` is checked
/// incrementally: once the `δ` prefix drops below `k(θ)` every completion
/// is admissible, and a prefix above `k(θ)` is pruned.
#[derive(Debug, Clone, Copy, Default)]
pub struct BranchAndBoundOracle;

struct Reduced {
    /// Per branching position: `Some((row mask without pivot, rhs))` if the
    /// position is a pivot.
    forced: Vec<Option<(u64, bool)>>,
}

/// Gaussian elimination over GF(2). Returns `None` if the system is
/// inconsistent. Masks are in branching-position space.
fn reduce(rows: impl IntoIterator<Item = (u64, bool)>, width: usize) -> Option<Reduced> {
    let mut basis: Vec<(u64, bool, u32)> = Vec::new();
    for (mut mask, mut rhs) in rows {
        for &(bm, br, bp) in &basis {
            if (mask >> bp) & 1 == 1 {
                mask ^= bm;
                rhs ^= br;
            }
        }
        if mask == 0 {
            if rhs {
                return None;
            }
            continue;
        }
        let pivot = 63 - mask.leading_zeros();
        for b in basis.iter_mut() {
            if (b.0 >> pivot) & 1 == 1 {
                b.0 ^= mask;
                b.1 ^= rhs;
            }
        }
        basis.push((mask, rhs, pivot));
    }
    let mut forced = vec![None; width];
    for (mask, rhs, pivot) in basis {
        forced[pivot as usize] = Some((mask & !(1u64 << pivot), rhs));
    }
    Some(Reduced { forced })
}

struct Search<'a> {
    slices: &'a SliceSet,
    reduced: Reduced,
    n: usize,
    q: usize,
    limit: usize,
    out: Vec<u64>,
}

#[derive(Clone, Copy)]
enum Bound {
    /// `δ` prefix equals the prefix of `k(θ)`.
    Equal(u64),
    /// Prefix already below `k(θ)`.
    Below,
}

impl Search<'_> {
    /// Position `p` of `δ` maps to bit index `q − 1 − (p − n)` of `δ`.
    fn delta_bit(&self, p: usize) -> usize {
        self.q - 1 - (p - self.n)
    }

    fn to_pair(&self, val: u64) -> u64 {
        let theta = val & low_mask(self.n);
        let mut delta = 0u64;
        for p in self.n..self.n + self.q {
            if (val >> p) & 1 == 1 {
                delta |= 1u64 << self.delta_bit(p);
            }
        }
        theta | (delta << self.n)
    }

    fn full(&self) -> bool {
        self.out.len() > self.limit
    }

    fn value_options(&self, p: usize, val: u64) -> (bool, bool) {
        match self.reduced.forced[p] {
            Some((mask, rhs)) => {
                let v = ((val & mask).count_ones() & 1 == 1) ^ rhs;
                (v, v)
            }
            None => (false, true),
        }
    }

    fn theta(&mut self, p: usize, val: u64) {
        if self.full() {
            return;
        }
        if p == self.n {
            let k = self.slices.slice_count(val);
            if k == 0 {
                return;
            }
            let bound = if self.q < 64 && k >= 1u64 << self.q {
                Bound::Below
            } else {
                Bound::Equal(k)
            };
            self.delta(p, val, bound);
            return;
        }
        let (lo, hi) = self.value_options(p, val);
        self.theta(p + 1, val | ((lo as u64) << p));
        if hi != lo {
            self.theta(p + 1, val | ((hi as u64) << p));
        }
    }

    fn delta(&mut self, p: usize, val: u64, bound: Bound) {
        if self.full() {
            return;
        }
        if p == self.n + self.q {
            if let Bound::Below = bound {
                let pair = self.to_pair(val);
                self.out.push(pair);
            }
            return;
        }
        let (lo, hi) = self.value_options(p, val);
        for v in [lo, hi].into_iter().take(if lo == hi { 1 } else { 2 }) {
            let next = match bound {
                Bound::Below => Bound::Below,
                Bound::Equal(k) => {
                    let kb = (k >> self.delta_bit(p)) & 1 == 1;
                    match (v, kb) {
                        (false, true) => Bound::Below,
                        (true, false) => continue,
                        _ => Bound::Equal(k),
                    }
                }
            };
            self.delta(p + 1, val | ((v as u64) << p), next);
        }
    }
}

impl Oracle for BranchAndBoundOracle {
    fn name(&self) -> &'static str {
        "branch-and-bound"
    }

    fn solve(
        &self,
        slices: &SliceSet,
        parities: &[ParityConstraint],
        limit: usize,
    ) -> Result<OracleSolution> {
        check_limit(limit)?;
        let n = slices.num_vars();
        let q = slices.aux_bits();
        let width = n + q;
        if width > 64 {
            return Err(Error::OracleBudget {
                bits: width,
                cap: 64,
            });
        }
        // bit n + t (δ_t) sits at branching position n + q − 1 − t
        let to_pos = |mask: u64| -> u64 {
            let mut m = mask & low_mask(n);
            for t in 0..q {
                if (mask >> (n + t)) & 1 == 1 {
                    m |= 1u64 << (n + q - 1 - t);
                }
            }
            m
        };
        let rows = parities.iter().map(|c| {
            // constraint bits beyond n + q are always zero in a pair
            (to_pos(c.mask & low_mask(width)), c.parity)
        });
        let Some(reduced) = reduce(rows, width) else {
            return Ok(OracleSolution {
                solutions: Vec::new(),
                truncated: false,
            });
        };
        let mut search = Search {
            slices,
            reduced,
            n,
            q,
            limit,
            out: Vec::new(),
        };
        search.theta(0, 0);
        Ok(OracleSolution::finish(search.out, limit))
    }
}

fn check_limit(limit: usize) -> Result<()> {
    if limit == 0 {
        return Err(Error::InvalidConfig("oracle limit must be at least 1".into()));
    }
    Ok(())
}

/// Writes an oracle query as DIMACS-style text.
///
/// ```text
/// c xorpgd oracle query
/// c limit <L>
/// c slices <n> <Q>
/// c k <θ-index> <k(θ)>      one line per configuration with k > 0
/// p xor <n+Q> <#constraints>
/// x1 3 -4 0                 XOR clause; a negated first literal means parity 0
/// ```
///
/// Variables are 1-based: variable `j + 1` is packed bit `j`. An
/// unsatisfiable empty constraint is written `x 0`; trivially satisfied
/// empty constraints are omitted.
pub fn to_dimacs(slices: &SliceSet, parities: &[ParityConstraint], limit: usize) -> String {
    let mut s = String::new();
    s.push_str("c xorpgd oracle query\n");
    let _ = writeln!(s, "c limit {limit}");
    let _ = writeln!(s, "c slices {} {}", slices.num_vars(), slices.aux_bits());
    for (theta, &k) in slices.counts().iter().enumerate() {
        if k > 0 {
            let _ = writeln!(s, "c k {theta} {k}");
        }
    }
    let kept: Vec<&ParityConstraint> = parities
        .iter()
        .filter(|c| !(c.mask == 0 && !c.parity))
        .collect();
    let _ = writeln!(s, "p xor {} {}", slices.total_bits(), kept.len());
    for c in kept {
        s.push('x');
        let mut first = true;
        for j in 0..64 {
            if (c.mask >> j) & 1 == 1 {
                if first && !c.parity {
                    let _ = write!(s, "-{} ", j + 1);
                } else {
                    let _ = write!(s, "{} ", j + 1);
                }
                first = false;
            }
        }
        s.push_str("0\n");
    }
    s
}

/// A query parsed back from [`to_dimacs`].
#[derive(Debug, Clone, PartialEq)]
pub struct DimacsQuery {
    pub slices: SliceSet,
    pub parities: Vec<ParityConstraint>,
    pub limit: usize,
}

pub fn parse_dimacs(text: &str) -> Result<DimacsQuery> {
    let mut limit = None;
    let mut dims = None;
    let mut counts: Vec<u64> = Vec::new();
    let mut parities = Vec::new();
    let perr = |line: usize, msg: &str| Error::Parse {
        line,
        msg: msg.to_string(),
    };
    for (ln, line) in text.lines().enumerate() {
        let line_no = ln + 1;
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            [] => {}
            ["c", "limit", v] => {
                limit = Some(v.parse().map_err(|_| perr(line_no, "bad limit"))?);
            }
            ["c", "slices", n, q] => {
                let n: usize = n.parse().map_err(|_| perr(line_no, "bad n"))?;
                let q: usize = q.parse().map_err(|_| perr(line_no, "bad Q"))?;
                if n > 30 {
                    return Err(perr(line_no, "too many model variables"));
                }
                counts = vec![0; 1 << n];
                dims = Some((n, q));
            }
            ["c", "k", t, k] => {
                let t: usize = t.parse().map_err(|_| perr(line_no, "bad index"))?;
                let k: u64 = k.parse().map_err(|_| perr(line_no, "bad count"))?;
                *counts
                    .get_mut(t)
                    .ok_or_else(|| perr(line_no, "slice line before header or index out of range"))? = k;
            }
            ["c", ..] | ["p", ..] => {}
            [first, rest @ ..] if first.starts_with('x') => {
                let mut lits: Vec<&str> = Vec::new();
                let head = &first[1..];
                if !head.is_empty() {
                    lits.push(head);
                }
                lits.extend_from_slice(rest);
                if lits.last() != Some(&"0") {
                    return Err(perr(line_no, "XOR clause must end with 0"));
                }
                lits.pop();
                let mut mask = 0u64;
                let mut parity = true;
                for (i, l) in lits.iter().enumerate() {
                    let v: i64 = l.parse().map_err(|_| perr(line_no, "bad literal"))?;
                    if v < 0 && i == 0 {
                        parity = false;
                    } else if v <= 0 {
                        return Err(perr(line_no, "only the first literal may be negated"));
                    }
                    let j = v.unsigned_abs() as usize - 1;
                    if j >= 64 {
                        return Err(perr(line_no, "variable out of range"));
                    }
                    mask ^= 1u64 << j;
                }
                parities.push(ParityConstraint { mask, parity });
            }
            _ => return Err(perr(line_no, "unrecognized line")),
        }
    }
    let (n, q) = dims.ok_or_else(|| perr(1, "missing slices header"))?;
    let slices = SliceSet::from_counts(n, counts)?;
    if slices.aux_bits() > q {
        return Err(perr(1, "slice counts need more auxiliary bits than declared"));
    }
    Ok(DimacsQuery {
        slices,
        parities,
        limit: limit.ok_or_else(|| perr(1, "missing limit"))?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform2() -> SliceSet {
        SliceSet::from_counts(2, vec![1; 4]).unwrap()
    }

    fn sorted(mut v: Vec<u64>) -> Vec<u64> {
        v.sort_unstable();
        v
    }

    #[test]
    fn no_parities_whole_support() {
        for oracle in [&ExhaustiveOracle::default() as &dyn Oracle, &BranchAndBoundOracle] {
            let s = oracle.solve(&uniform2(), &[], 10).unwrap();
            assert_eq!(sorted(s.solutions), vec![0, 1, 2, 3]);
            assert!(!s.truncated);
        }
    }

    #[test]
    fn one_parity_halves() {
        let c = ParityConstraint::new(0b11, false);
        for oracle in [&ExhaustiveOracle::default() as &dyn Oracle, &BranchAndBoundOracle] {
            let s = oracle.solve(&uniform2(), &[c], 10).unwrap();
            assert_eq!(sorted(s.solutions), vec![0b00, 0b11]);
        }
    }

    #[test]
    fn truncation_contract() {
        for oracle in [&ExhaustiveOracle::default() as &dyn Oracle, &BranchAndBoundOracle] {
            let s = oracle.solve(&uniform2(), &[], 1).unwrap();
            assert_eq!(s.solutions.len(), 2);
            assert!(s.truncated);
            let s = oracle.solve(&uniform2(), &[], 4).unwrap();
            assert_eq!(s.solutions.len(), 4);
            assert!(!s.truncated);
        }
    }

    #[test]
    fn weighted_slices() {
        // k = (3, 0, 1, 2) with Q = 2
        let ss = SliceSet::from_counts(2, vec![3, 0, 1, 2]).unwrap();
        let want: Vec<u64> = vec![0, 4, 8, 2, 3, 7];
        for oracle in [&ExhaustiveOracle::default() as &dyn Oracle, &BranchAndBoundOracle] {
            let s = oracle.solve(&ss, &[], 100).unwrap();
            assert_eq!(sorted(s.solutions), sorted(want.clone()));
        }
    }

    #[test]
    fn inconsistent_system() {
        let cs = [
            ParityConstraint::new(0b01, true),
            ParityConstraint::new(0b01, false),
        ];
        let s = BranchAndBoundOracle.solve(&uniform2(), &cs, 10).unwrap();
        assert!(s.solutions.is_empty());
        let s = ExhaustiveOracle::default().solve(&uniform2(), &cs, 10).unwrap();
        assert!(s.solutions.is_empty());
        let empty_unsat = [ParityConstraint::new(0, true)];
        assert!(BranchAndBoundOracle
            .solve(&uniform2(), &empty_unsat, 10)
            .unwrap()
            .solutions
            .is_empty());
    }

    #[test]
    fn exhaustive_budget() {
        let ss = SliceSet::from_counts(2, vec![1; 4]).unwrap();
        let o = ExhaustiveOracle { bit_cap: 1 };
        assert!(matches!(o.solve(&ss, &[], 4), Err(Error::OracleBudget { .. })));
    }

    #[test]
    fn zero_limit_rejected() {
        assert!(BranchAndBoundOracle.solve(&uniform2(), &[], 0).is_err());
    }

    #[test]
    fn dimacs_roundtrip_preserves_query() {
        let ss = SliceSet::from_counts(2, vec![3, 0, 1, 2]).unwrap();
        let cs = vec![
            ParityConstraint::new(0b1011, false),
            ParityConstraint::new(0b0110, true),
            ParityConstraint::new(0, false),
        ];
        let text = to_dimacs(&ss, &cs, 7);
        assert!(text.contains("x-1 2 4 0"));
        assert!(text.contains("x2 3 0"));
        let q = parse_dimacs(&text).unwrap();
        assert_eq!(q.limit, 7);
        assert_eq!(q.slices, ss);
        assert_eq!(q.parities, cs[..2].to_vec());
        let a = BranchAndBoundOracle.solve(&ss, &cs, 7).unwrap();
        let b = BranchAndBoundOracle.solve(&q.slices, &q.parities, 7).unwrap();
        assert_eq!(a, b);
    }
}
