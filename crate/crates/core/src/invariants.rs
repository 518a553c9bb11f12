//! Incidence matrix, minimal semi-positive S- and T-invariants and the
//! boundedness classification derived from them.
//!
//! Invariants are computed with the Farkas algorithm over arbitrary-precision
//! integers, keeping only rows of minimal support after every elimination.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Serialize, Serializer};

use crate::model::Topology;

/// Default limit on intermediate Farkas rows.
pub const DEFAULT_ROW_CAP: usize = 10_000;

/// A natural number or infinity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Count {
    Finite(u64),
    Infinite,
}

impl Count {
    pub const ZERO: Count = Count::Finite(0);

    pub fn is_finite(self) -> bool {
        matches!(self, Count::Finite(_))
    }

    pub fn finite(self) -> Option<u64> {
        match self {
            Count::Finite(n) => Some(n),
            Count::Infinite => None,
        }
    }

    pub fn plus(self, other: Count) -> Count {
        match (self, other) {
            (Count::Finite(a), Count::Finite(b)) => a.checked_add(b).map_or(Count::Infinite, Count::Finite),
            _ => Count::Infinite,
        }
    }

    pub fn times(self, other: Count) -> Count {
        match (self, other) {
            (Count::Finite(0), _) | (_, Count::Finite(0)) => Count::ZERO,
            (Count::Finite(a), Count::Finite(b)) => a.checked_mul(b).map_or(Count::Infinite, Count::Finite),
            _ => Count::Infinite,
        }
    }
}

impl PartialOrd for Count {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Count {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Count::Finite(a), Count::Finite(b)) => a.cmp(b),
            (Count::Finite(_), Count::Infinite) => Ordering::Less,
            (Count::Infinite, Count::Finite(_)) => Ordering::Greater,
            (Count::Infinite, Count::Infinite) => Ordering::Equal,
        }
    }
}

impl fmt::Display for Count {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Count::Finite(n) => write!(f, "{n}"),
            Count::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Count {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Count::Finite(n) => s.serialize_u64(*n),
            Count::Infinite => s.serialize_str("inf"),
        }
    }
}

/// Steps × transitions, entries in {-1, 0, 1}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncidenceMatrix {
    pub entries: Vec<Vec<i8>>,
    pub transitions: usize,
}

impl IncidenceMatrix {
    pub fn steps(&self) -> usize {
        self.entries.len()
    }

    pub fn transpose(&self) -> Vec<Vec<i64>> {
        (0..self.transitions)
            .map(|j| self.entries.iter().map(|row| row[j] as i64).collect())
            .collect()
    }

    pub fn rows(&self) -> Vec<Vec<i64>> {
        self.entries
            .iter()
            .map(|row| row.iter().map(|&x| x as i64).collect())
            .collect()
    }
}

pub fn incidence(topo: &Topology) -> IncidenceMatrix {
    let mut entries = vec![vec![0i8; topo.transition_count()]; topo.step_count];
    for t in 0..topo.transition_count() {
        for &s in &topo.pre[t] {
            entries[s][t] -= 1;
        }
        for &s in &topo.post[t] {
            entries[s][t] += 1;
        }
    }
    IncidenceMatrix {
        entries,
        transitions: topo.transition_count(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowCapExceeded {
    pub cap: usize,
}

impl fmt::Display for RowCapExceeded {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invariant computation exceeded {} intermediate rows", self.cap)
    }
}

#[derive(Clone)]
struct Row {
    rest: Vec<BigInt>,
    id: Vec<BigInt>,
    support: Vec<u64>,
}

fn support_of(id: &[BigInt]) -> Vec<u64> {
    let mut bits = vec![0u64; id.len().div_ceil(64)];
    for (i, x) in id.iter().enumerate() {
        if !x.is_zero() {
            bits[i / 64] |= 1 << (i % 64);
        }
    }
    bits
}

fn is_subset(a: &[u64], b: &[u64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x & !y == 0)
}

fn normalize(row: &mut Row) {
    let mut g = BigInt::zero();
    for x in row.rest.iter().chain(&row.id) {
        g = g.gcd(x);
    }
    if !g.is_zero() && !g.is_one() {
        for x in row.rest.iter_mut().chain(row.id.iter_mut()) {
            *x /= &g;
        }
    }
}

/// Drops rows whose support strictly contains another row's support, and
/// exact duplicates.
fn prune(rows: Vec<Row>) -> Vec<Row> {
    let mut keep: Vec<Row> = Vec::with_capacity(rows.len());
    'outer: for (i, r) in rows.iter().enumerate() {
        for (j, o) in rows.iter().enumerate() {
            if i == j {
                continue;
            }
            if is_subset(&o.support, &r.support) && o.support != r.support {
                continue 'outer;
            }
        }
        if keep.iter().any(|k| k.id == r.id && k.rest == r.rest) {
            continue;
        }
        keep.push(r.clone());
    }
    keep
}

/// Minimal-support non-negative integer vectors `y ≠ 0` with
/// `Σ_i y_i · rows[i] = 0`, each with GCD 1, in canonical order
/// (lexicographic by support, then by entries).
pub fn minimal_semipositive(rows: &[Vec<i64>], cap: usize) -> Result<Vec<Vec<BigInt>>, RowCapExceeded> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    let mut work: Vec<Row> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut id = vec![BigInt::zero(); n];
            id[i] = BigInt::one();
            let support = support_of(&id);
            Row {
                rest: r.iter().map(|&x| BigInt::from(x)).collect(),
                id,
                support,
            }
        })
        .collect();
    for col in 0..m {
        let (zero, nonzero): (Vec<Row>, Vec<Row>) = work.into_iter().partition(|r| r.rest[col].is_zero());
        let (pos, neg): (Vec<Row>, Vec<Row>) = nonzero.into_iter().partition(|r| r.rest[col].is_positive());
        let mut next = zero;
        for p in &pos {
            for q in &neg {
                let a = q.rest[col].abs();
                let b = p.rest[col].abs();
                let mut r = Row {
                    rest: p.rest.iter().zip(&q.rest).map(|(x, y)| &a * x + &b * y).collect(),
                    id: p.id.iter().zip(&q.id).map(|(x, y)| &a * x + &b * y).collect(),
                    support: Vec::new(),
                };
                normalize(&mut r);
                r.support = support_of(&r.id);
                next.push(r);
                if next.len() > cap {
                    return Err(RowCapExceeded { cap });
                }
            }
        }
        work = prune(next);
    }
    let mut out: Vec<(Vec<usize>, Vec<BigInt>)> = prune(work)
        .into_iter()
        .map(|r| {
            let support = (0..n).filter(|&i| !r.id[i].is_zero()).collect();
            (support, r.id)
        })
        .collect();
    out.sort();
    out.dedup();
    Ok(out.into_iter().map(|(_, v)| v).collect())
}

/// Step weightings `y ≥ 0` with `yᵀN = 0`.
pub fn s_invariants(n: &IncidenceMatrix, cap: usize) -> Result<Vec<Vec<BigInt>>, RowCapExceeded> {
    minimal_semipositive(&n.rows(), cap)
}

/// Transition counts `x ≥ 0` with `Nx = 0`.
pub fn t_invariants(n: &IncidenceMatrix, cap: usize) -> Result<Vec<Vec<BigInt>>, RowCapExceeded> {
    minimal_semipositive(&n.transpose(), cap)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Boundedness {
    pub covered: bool,
    /// Maximum entry over all minimal S-invariants, or infinity if some step
    /// is not covered.
    pub n: Count,
    /// Per step: maximum entry of that step over all S-invariants covering
    /// it, infinity when uncovered.
    pub per_step: Vec<Count>,
    pub uncovered: Vec<usize>,
}

fn to_count(x: &BigInt) -> Count {
    x.to_u64().map_or(Count::Infinite, Count::Finite)
}

pub fn classify_boundedness(s_invariants: &[Vec<BigInt>], step_count: usize) -> Boundedness {
    let mut per_step = vec![None::<Count>; step_count];
    let mut n = Count::ZERO;
    for y in s_invariants {
        for (s, v) in y.iter().enumerate() {
            if v.is_positive() {
                let c = to_count(v);
                per_step[s] = Some(per_step[s].map_or(c, |old| old.max(c)));
                n = n.max(c);
            }
        }
    }
    let uncovered: Vec<usize> = (0..step_count).filter(|&s| per_step[s].is_none()).collect();
    let covered = uncovered.is_empty();
    Boundedness {
        covered,
        n: if covered { n } else { Count::Infinite },
        per_step: per_step.into_iter().map(|c| c.unwrap_or(Count::Infinite)).collect(),
        uncovered,
    }
}

/// All structural results for one partial Grafcet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvariantSet {
    pub matrix: IncidenceMatrix,
    pub s_invariants: Vec<Vec<BigInt>>,
    pub t_invariants: Vec<Vec<BigInt>>,
    pub boundedness: Boundedness,
    /// Set when the row cap was hit; the sets above are then empty and the
    /// partial Grafcet is treated as uncovered.
    pub incomplete: Option<RowCapExceeded>,
}

impl InvariantSet {
    /// Whether some transition in `transitions` has a positive entry in a
    /// T-invariant (or T-invariants are unknown).
    pub fn on_loop(&self, transitions: &[usize]) -> bool {
        if self.incomplete.is_some() {
            return !transitions.is_empty();
        }
        self.t_invariants
            .iter()
            .any(|x| transitions.iter().any(|&t| x[t].is_positive()))
    }
}

pub fn analyze(topo: &Topology, cap: usize) -> InvariantSet {
    let matrix = incidence(topo);
    let result = s_invariants(&matrix, cap).and_then(|s| Ok((s, t_invariants(&matrix, cap)?)));
    match result {
        Ok((s_inv, t_inv)) => {
            let boundedness = classify_boundedness(&s_inv, topo.step_count);
            InvariantSet {
                matrix,
                s_invariants: s_inv,
                t_invariants: t_inv,
                boundedness,
                incomplete: None,
            }
        }
        Err(e) => InvariantSet {
            boundedness: classify_boundedness(&[], topo.step_count),
            matrix,
            s_invariants: Vec::new(),
            t_invariants: Vec::new(),
            incomplete: Some(e),
        },
    }
}

/// Converts a vector to machine integers for display and comparison in
/// tests; `None` if an entry does not fit.
pub fn to_u64_vec(v: &[BigInt]) -> Option<Vec<u64>> {
    v.iter().map(ToPrimitive::to_u64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn topo(n: usize, arcs: &[(&[usize], &[usize])]) -> Topology {
        Topology::from_arcs(
            n,
            arcs.iter().map(|a| a.0.to_vec()).collect(),
            arcs.iter().map(|a| a.1.to_vec()).collect(),
        )
    }

    fn plain(v: Vec<Vec<BigInt>>) -> Vec<Vec<u64>> {
        v.iter().map(|x| to_u64_vec(x).unwrap()).collect()
    }

    #[test]
    fn loop_matrix() {
        let t = topo(2, &[(&[0], &[1]), (&[1], &[0])]);
        assert_eq!(incidence(&t).entries, vec![vec![-1, 1], vec![1, -1]]);
    }

    #[test]
    fn self_loop_nets_to_zero() {
        let t = topo(2, &[(&[0], &[0, 1])]);
        assert_eq!(incidence(&t).entries, vec![vec![0], vec![1]]);
    }

    #[test]
    fn source_column_has_no_consumption() {
        let t = topo(2, &[(&[], &[0]), (&[0], &[1])]);
        let m = incidence(&t);
        assert_eq!(m.entries[0][0], 1);
        assert_eq!(m.entries[1][0], 0);
        assert!(plain(s_invariants(&m, DEFAULT_ROW_CAP).unwrap()).is_empty());
    }

    #[test]
    fn loop_invariants() {
        let t = topo(2, &[(&[0], &[1]), (&[1], &[0])]);
        let inv = analyze(&t, DEFAULT_ROW_CAP);
        assert_eq!(plain(inv.s_invariants), vec![vec![1, 1]]);
        assert_eq!(plain(inv.t_invariants), vec![vec![1, 1]]);
        assert_eq!(inv.boundedness.n, Count::Finite(1));
    }

    #[test]
    fn weighted_invariant() {
        // 0 -> {2,3}, 1 -> {2,3}, 2 -> 4, 3 -> 4
        let t = topo(5, &[(&[0], &[2, 3]), (&[1], &[2, 3]), (&[2], &[4]), (&[3], &[4])]);
        let inv = analyze(&t, DEFAULT_ROW_CAP);
        assert_eq!(plain(inv.s_invariants), vec![vec![2, 2, 1, 1, 1]]);
        assert!(inv.t_invariants.is_empty());
        assert_eq!(inv.boundedness.n, Count::Finite(2));
        assert_eq!(inv.boundedness.per_step[4], Count::Finite(1));
    }

    #[test]
    fn row_cap_is_reported() {
        let t = topo(2, &[(&[0], &[1]), (&[1], &[0])]);
        let inv = analyze(&t, 0);
        assert!(inv.incomplete.is_some());
        assert!(!inv.boundedness.covered);
        assert!(inv.on_loop(&[0]));
    }

    #[test]
    fn count_arithmetic() {
        assert_eq!(Count::Finite(2).times(Count::Finite(3)), Count::Finite(6));
        assert_eq!(Count::Infinite.times(Count::ZERO), Count::ZERO);
        assert_eq!(Count::Finite(u64::MAX).plus(Count::Finite(1)), Count::Infinite);
        assert!(Count::Finite(7) < Count::Infinite);
    }
}
