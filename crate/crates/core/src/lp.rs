//! Two-phase tableau simplex for `min cᵀy  s.t.  A y = b, y ≥ 0`.
//!
//! Pivoting follows Bland's rule (smallest eligible index enters, smallest
//! basic index leaves among ratio ties), so the method terminates without
//! cycling. Over rationals the optimum is exact.

use crate::scalar::Field;

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome<S> {
    Optimal { value: S, solution: Vec<S> },
    Infeasible,
    Unbounded,
}

struct Tableau<S> {
    /// `m` constraint rows, each `n + 1` wide; the last entry is the rhs.
    rows: Vec<Vec<S>>,
    /// Reduced-cost row, `n + 1` wide; the last entry is minus the objective value.
    cost: Vec<S>,
    basis: Vec<usize>,
    n: usize,
}

impl<S: Field> Tableau<S> {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c].clone();
        for v in self.rows[r].iter_mut() {
            *v = v.clone() / p.clone();
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c].clone();
            if f.is_zero() {
                continue;
            }
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                *v = v.clone() - f.clone() * pv.clone();
            }
            row[c] = S::zero();
        }
        let f = self.cost[c].clone();
        if !f.is_zero() {
            for (v, pv) in self.cost.iter_mut().zip(&pivot_row) {
                *v = v.clone() - f.clone() * pv.clone();
            }
            self.cost[c] = S::zero();
        }
        self.basis[r] = c;
    }

    /// Runs Bland-rule pivots over columns `< allowed`. Returns false if unbounded.
    fn optimize(&mut self, allowed: usize) -> bool {
        loop {
            let Some(enter) = (0..allowed).find(|&j| {
                let rc = &self.cost[j];
                *rc < S::zero() && !rc.is_zero()
            }) else {
                return true;
            };
            let mut leave: Option<(usize, S)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                let a = &row[enter];
                if *a <= S::zero() || a.is_zero() {
                    continue;
                }
                let ratio = row[self.n].clone() / a.clone();
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((bi, br)) => {
                        if ratio < br || (ratio == br && self.basis[i] < self.basis[bi]) {
                            Some((i, ratio))
                        } else {
                            Some((bi, br))
                        }
                    }
                };
            }
            match leave {
                None => return false,
                Some((r, _)) => self.pivot(r, enter),
            }
        }
    }
}

/// Solves `min cᵀy` subject to `A y = b`, `y ≥ 0`, with `A` given row by row.
pub fn minimize<S: Field>(a: &[Vec<S>], b: &[S], c: &[S]) -> LpOutcome<S> {
    let m = a.len();
    let n = c.len();
    assert_eq!(b.len(), m, "rhs length");
    assert!(a.iter().all(|r| r.len() == n), "constraint width");

    // Phase 1: artificials n..n+m, objective = their sum.
    let width = n + m;
    let mut rows = Vec::with_capacity(m);
    for (i, (row, rhs)) in a.iter().zip(b).enumerate() {
        let flip = *rhs < S::zero();
        let mut r: Vec<S> = row.iter().map(|v| if flip { -v.clone() } else { v.clone() }).collect();
        r.extend((0..m).map(|k| if k == i { S::one() } else { S::zero() }));
        r.push(if flip { -rhs.clone() } else { rhs.clone() });
        rows.push(r);
    }
    let mut cost = vec![S::zero(); width + 1];
    for r in &rows {
        for j in 0..n {
            cost[j] = cost[j].clone() - r[j].clone();
        }
        cost[width] = cost[width].clone() - r[width].clone();
    }
    let mut t = Tableau { rows, cost, basis: (n..n + m).collect(), n: width };
    t.optimize(n);
    let phase1 = -t.cost[width].clone();
    if !phase1.is_zero() {
        return LpOutcome::Infeasible;
    }

    // Drive remaining artificials out of the basis; drop redundant rows.
    let mut r = 0;
    while r < t.rows.len() {
        if t.basis[r] >= n {
            if let Some(c) = (0..n).find(|&j| !t.rows[r][j].is_zero()) {
                t.pivot(r, c);
            } else {
                t.rows.remove(r);
                t.basis.remove(r);
                continue;
            }
        }
        r += 1;
    }

    // Phase 2 on the original costs.
    let mut cost = vec![S::zero(); width + 1];
    cost[..n].clone_from_slice(c);
    for (i, &bv) in t.basis.iter().enumerate() {
        let cb = cost[bv].clone();
        if cb.is_zero() {
            continue;
        }
        for j in 0..=width {
            cost[j] = cost[j].clone() - cb.clone() * t.rows[i][j].clone();
        }
    }
    t.cost = cost;
    if !t.optimize(n) {
        return LpOutcome::Unbounded;
    }
    let mut solution = vec![S::zero(); n];
    for (i, &bv) in t.basis.iter().enumerate() {
        if bv < n {
            solution[bv] = t.rows[i][width].clone();
        }
    }
    let value = solution.iter().zip(c).fold(S::zero(), |acc, (y, cj)| acc + y.clone() * cj.clone());
    LpOutcome::Optimal { value, solution }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{q, Rational};

    #[test]
    fn simple_equality_lp() {
        // min y1 + y2 + y3 s.t. y1 + y3/2 = 1/2, y2 + y3/2 = 1/2 → 1 (y3 = 1 or y1 = y2 = 1/2).
        let a = vec![vec![q(1, 1), q(0, 1), q(1, 2)], vec![q(0, 1), q(1, 1), q(1, 2)]];
        let b = vec![q(1, 2), q(1, 2)];
        let c = vec![q(1, 1); 3];
        match minimize(&a, &b, &c) {
            LpOutcome::Optimal { value, .. } => assert_eq!(value, q(1, 1)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn infeasible_lp() {
        let a = vec![vec![q(1, 1), q(-1, 1)], vec![q(0, 1), q(0, 1)]];
        let b = vec![q(0, 1), q(1, 1)];
        let c = vec![q(1, 1), q(1, 1)];
        assert_eq!(minimize(&a, &b, &c), LpOutcome::<Rational>::Infeasible);
    }

    #[test]
    fn redundant_rows_are_dropped() {
        let a = vec![vec![q(1, 1), q(1, 1)], vec![q(2, 1), q(2, 1)]];
        let b = vec![q(3, 1), q(6, 1)];
        let c = vec![q(2, 1), q(1, 1)];
        match minimize(&a, &b, &c) {
            LpOutcome::Optimal { value, solution } => {
                assert_eq!(value, q(3, 1));
                assert_eq!(solution, vec![q(0, 1), q(3, 1)]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unbounded_lp() {
        let a = vec![vec![q(1, 1), q(-1, 1)]];
        let b = vec![q(0, 1)];
        let c = vec![q(-1, 1), q(0, 1)];
        assert_eq!(minimize(&a, &b, &c), LpOutcome::<Rational>::Unbounded);
    }

    #[test]
    fn float_mode_agrees() {
        let a = vec![vec![1.0, 0.0, 0.5], vec![0.0, 1.0, 0.5]];
        let b = vec![0.5, 0.5];
        let c = vec![1.0; 3];
        match minimize(&a, &b, &c) {
            LpOutcome::Optimal { value, .. } => assert!((value - 1.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }
}
