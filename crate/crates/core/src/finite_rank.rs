//! Operators of the form `σI + Σ fⱼ⊗vⱼ` with `σ ∈ {0, 1}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Field;
use crate::spaces::{DiskSpec, SeminormSpec};
use crate::sparse::{CoordFunctional, SparseVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Base {
    Identity,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Field")]
pub struct Term<S> {
    pub f: CoordFunctional<S>,
    pub v: SparseVector<S>,
}

/// `x ↦ base(x) + Σⱼ fⱼ(x)·vⱼ`, terms kept in construction order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Field")]
pub struct FiniteRankOperator<S> {
    pub base: Base,
    pub terms: Vec<Term<S>>,
}

impl<S: Field> FiniteRankOperator<S> {
    pub fn identity() -> Self {
        Self { base: Base::Identity, terms: Vec::new() }
    }

    pub fn zero() -> Self {
        Self { base: Base::Zero, terms: Vec::new() }
    }

    pub fn new(base: Base, terms: impl IntoIterator<Item = (CoordFunctional<S>, SparseVector<S>)>) -> Self {
        Self { base, terms: terms.into_iter().map(|(f, v)| Term { f, v }).collect() }
    }

    /// Appends the rank-one update `f⊗v`.
    pub fn push(&mut self, f: CoordFunctional<S>, v: SparseVector<S>) {
        self.terms.push(Term { f, v });
    }

    pub fn with_term(mut self, f: CoordFunctional<S>, v: SparseVector<S>) -> Self {
        self.push(f, v);
        self
    }

    pub fn rank_bound(&self) -> usize {
        self.terms.len()
    }

    /// The finite-rank part `Σ fⱼ⊗vⱼ` as a zero-based operator.
    pub fn perturbation(&self) -> Self {
        Self { base: Base::Zero, terms: self.terms.clone() }
    }

    /// `I + self` for a zero-based operator, `self` otherwise.
    pub fn plus_identity(&self) -> Self {
        Self { base: Base::Identity, terms: self.terms.clone() }
    }

    pub fn apply(&self, x: &SparseVector<S>) -> SparseVector<S> {
        let mut out = match self.base {
            Base::Identity => x.clone(),
            Base::Zero => SparseVector::zero(),
        };
        for t in &self.terms {
            let c = t.f.apply(x);
            if !c.is_zero() {
                out = out.axpy(&c, &t.v);
            }
        }
        out
    }

    /// `x, Tx, …, T^{horizon−1}x`.
    pub fn orbit(&self, x: &SparseVector<S>, horizon: usize) -> Vec<SparseVector<S>> {
        let mut out = Vec::with_capacity(horizon);
        let mut cur = x.clone();
        for n in 0..horizon {
            if n > 0 {
                cur = self.apply(&cur);
            }
            out.push(cur.clone());
        }
        out
    }

    pub fn power_apply(&self, x: &SparseVector<S>, n: usize) -> SparseVector<S> {
        (0..n).fold(x.clone(), |acc, _| self.apply(&acc))
    }

    /// Largest coordinate index read or written by the finite-rank part.
    pub fn touched_max_index(&self) -> usize {
        self.terms
            .iter()
            .map(|t| t.f.coeffs().max_index().max(t.v.max_index()))
            .max()
            .unwrap_or(0)
    }

    /// Matrix of the operator on coordinates `1..=window` (columns are images of `e_j`, truncated).
    pub fn matrix(&self, window: usize) -> Matrix<S> {
        let cols: Vec<_> = (1..=window).map(|j| self.apply(&SparseVector::basis(j))).collect();
        Matrix::from_columns(&cols, window)
    }

    /// Extensional equality on the basis vectors `e_1..e_window`.
    pub fn agrees_on_window(&self, other: &Self, window: usize) -> bool {
        (1..=window).all(|j| {
            let e = SparseVector::basis(j);
            self.apply(&e) == other.apply(&e)
        })
    }
}

pub fn apply<S: Field>(t: &FiniteRankOperator<S>, x: &SparseVector<S>) -> SparseVector<S> {
    t.apply(x)
}

/// `a ∘ b`, again of the form `σI + finite rank`.
pub fn compose<S: Field>(a: &FiniteRankOperator<S>, b: &FiniteRankOperator<S>) -> FiniteRankOperator<S> {
    let base = match (a.base, b.base) {
        (Base::Identity, Base::Identity) => Base::Identity,
        _ => Base::Zero,
    };
    let mut out = FiniteRankOperator { base, terms: Vec::new() };
    if b.base == Base::Identity {
        out.terms.extend(a.terms.iter().cloned());
    }
    for t in &b.terms {
        let w = a.apply(&t.v);
        if !w.is_zero() && !t.f.is_zero() {
            out.push(t.f.clone(), w);
        }
    }
    out
}

/// Invertibility certificate `c = Σ p*(fⱼ)·p_D(vⱼ) < 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct NeumannBudget<S> {
    pub p: SeminormSpec<S>,
    pub disk: DiskSpec<S>,
    pub c: S,
    /// `(p*(fⱼ), p_D(vⱼ))` per term.
    pub term_bounds: Vec<(S, S)>,
    pub epsilons: Vec<S>,
}

impl<S: Field> NeumannBudget<S> {
    /// Attaches an ε schedule; requires `Σε < 1`, `p_D(vⱼ) < εⱼ` and `p*(fⱼ) ≤ 1`.
    pub fn with_epsilons(mut self, epsilons: Vec<S>) -> Result<Self> {
        let total = epsilons.iter().cloned().fold(S::zero(), |a, b| a + b);
        if total >= S::one() {
            return Err(Error::InvalidInput(format!("epsilon schedule sums to {}", total.canonical())));
        }
        for (j, (dual, pd)) in self.term_bounds.iter().enumerate() {
            let eps = epsilons
                .get(j)
                .ok_or_else(|| Error::InvalidInput(format!("no epsilon for term {}", j + 1)))?;
            if *pd >= *eps || *dual > S::one() {
                return Err(Error::InvalidInput(format!("term {} exceeds its epsilon", j + 1)));
            }
        }
        self.epsilons = epsilons;
        Ok(self)
    }

    /// `p_D(Tx) ≤ c·p(x)` for one `x`.
    pub fn continuity_holds(&self, t: &FiniteRankOperator<S>, x: &SparseVector<S>) -> Result<bool> {
        let lhs = self.disk.gauge(&t.apply(x))?;
        let rhs = self.c.clone() * self.p.eval(x);
        Ok(lhs <= rhs || (lhs.clone() - rhs).negligible_against(&lhs))
    }
}

/// Sums the budget of a zero-based operator and returns it if `c < 1`.
///
/// The continuity bound is spot-checked on each term's dual maximizer and on
/// the active basis vectors; a violation is reported as invalid input.
pub fn neumann_certificate<S: Field>(
    t: &FiniteRankOperator<S>,
    p: &SeminormSpec<S>,
    disk: &DiskSpec<S>,
) -> Result<NeumannBudget<S>> {
    if t.base != Base::Zero {
        return Err(Error::InvalidInput("neumann_certificate expects a zero-based operator".into()));
    }
    let mut c = S::zero();
    let mut term_bounds = Vec::with_capacity(t.terms.len());
    for term in &t.terms {
        let dual = p.dual_norm(&term.f)?;
        let pd = disk.gauge(&term.v)?;
        c = c + dual.clone() * pd.clone();
        term_bounds.push((dual, pd));
    }
    if c >= S::one() {
        return Err(Error::BudgetExceeded { c: c.canonical() });
    }
    let budget = NeumannBudget { p: p.clone(), disk: disk.clone(), c, term_bounds, epsilons: Vec::new() };
    let mut probes: Vec<SparseVector<S>> = p.active().into_iter().map(SparseVector::basis).collect();
    for term in &t.terms {
        probes.push(p.dual_maximizer(&term.f)?);
    }
    for x in &probes {
        if !budget.continuity_holds(t, x)? {
            return Err(Error::InvalidInput(format!("continuity bound fails at {x}")));
        }
    }
    Ok(budget)
}

/// Exact inverse of `I + Σ fᵢ⊗vᵢ` through the Gram system `Gᵢⱼ = fᵢ(vⱼ)`:
/// `J⁻¹ = I − Σᵢ fᵢ ⊗ (Σⱼ Mⱼᵢ vⱼ)` with `M = (I + G)⁻¹`.
pub fn invert<S: Field>(j: &FiniteRankOperator<S>) -> Result<FiniteRankOperator<S>> {
    if j.base != Base::Identity {
        return Err(Error::InvalidInput("invert expects an identity-based operator".into()));
    }
    let k = j.terms.len();
    let mut g = Matrix::<S>::identity(k);
    for (r, ti) in j.terms.iter().enumerate() {
        for (c, tj) in j.terms.iter().enumerate() {
            let v = g.get(r, c).clone() + ti.f.apply(&tj.v);
            g.set(r, c, v);
        }
    }
    let m = g.inverse().ok_or_else(|| Error::Singular(format!("I + G is singular ({k} terms)")))?;
    let mut out = FiniteRankOperator::identity();
    for (i, ti) in j.terms.iter().enumerate() {
        let mut w = SparseVector::zero();
        for (jj, tj) in j.terms.iter().enumerate() {
            w = w.axpy(m.get(jj, i), &tj.v);
        }
        let w = if S::is_exact() { w } else { w.pruned() };
        if !w.is_zero() {
            out.push(ti.f.clone(), w.scale(&-S::one()));
        }
    }
    Ok(out)
}

/// The first `horizon` elements of the orbit of `J T₀ J⁻¹` started at `J x₀`.
pub fn conjugate_orbit<S: Field>(
    t0: &FiniteRankOperator<S>,
    x0: &SparseVector<S>,
    j: &FiniteRankOperator<S>,
    horizon: usize,
) -> Result<Vec<SparseVector<S>>> {
    let j_inv = invert(j)?;
    let t = compose(j, &compose(t0, &j_inv));
    Ok(t.orbit(&j.apply(x0), horizon))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{q, Rational};

    fn e(i: usize) -> SparseVector<Rational> {
        SparseVector::basis(i)
    }

    fn delta(i: usize) -> CoordFunctional<Rational> {
        CoordFunctional::delta(i)
    }

    fn backward_shift(n: usize) -> FiniteRankOperator<Rational> {
        FiniteRankOperator::new(Base::Zero, (2..=n).map(|k| (delta(k), e(k - 1))))
    }

    #[test]
    fn apply_examples() {
        let x = e(1).add(&e(2).scale(&q(7, 1)));
        assert!(FiniteRankOperator::<Rational>::zero().apply(&x).is_zero());
        assert_eq!(FiniteRankOperator::identity().apply(&x), x);
        let t = FiniteRankOperator::identity().with_term(delta(1), e(1).scale(&q(1, 2)));
        assert_eq!(t.apply(&e(1)), e(1).scale(&q(3, 2)));
    }

    #[test]
    fn neumann_examples() {
        let p = SeminormSpec::<Rational>::sup_upto(4);
        let d = DiskSpec::l1_upto(4);
        assert_eq!(neumann_certificate(&FiniteRankOperator::zero(), &p, &d).unwrap().c, q(0, 1));
        let t = FiniteRankOperator::zero().with_term(delta(1), e(1).scale(&q(1, 2)));
        assert_eq!(neumann_certificate(&t, &p, &d).unwrap().c, q(1, 2));
        let v = e(2).scale(&q(3, 4));
        let t = FiniteRankOperator::zero().with_term(delta(1), v.clone()).with_term(delta(2), v);
        assert_eq!(
            neumann_certificate(&t, &p, &d),
            Err(Error::BudgetExceeded { c: "3/2".into() })
        );
    }

    #[test]
    fn invert_examples() {
        assert_eq!(invert(&FiniteRankOperator::<Rational>::identity()).unwrap(), FiniteRankOperator::identity());
        let j = FiniteRankOperator::identity().with_term(delta(1), e(1).scale(&q(1, 2)));
        let inv = invert(&j).unwrap();
        assert_eq!(inv, FiniteRankOperator::identity().with_term(delta(1), e(1).scale(&q(-1, 3))));
        assert_eq!(inv.apply(&e(1).scale(&q(3, 2))), e(1));
        let j = FiniteRankOperator::identity().with_term(delta(1), e(1).scale(&q(-1, 1)));
        assert!(matches!(invert(&j), Err(Error::Singular(_))));
    }

    #[test]
    fn invert_round_trip_on_window() {
        let j = FiniteRankOperator::identity()
            .with_term(delta(1).add(&delta(3)), e(2).scale(&q(1, 3)))
            .with_term(delta(2), e(1).add(&e(4)).scale(&q(-1, 5)))
            .with_term(delta(4), e(3).scale(&q(2, 7)));
        let inv = invert(&j).unwrap();
        let id = FiniteRankOperator::identity();
        assert!(compose(&inv, &j).agrees_on_window(&id, 6));
        assert!(compose(&j, &inv).agrees_on_window(&id, 6));
    }

    #[test]
    fn compose_matches_sequential_application() {
        let a = FiniteRankOperator::identity().with_term(delta(2), e(1).scale(&q(1, 2)));
        let b = backward_shift(4);
        let x = SparseVector::from_dense(&[q(1, 1), q(-2, 1), q(3, 1), q(5, 7)]);
        assert_eq!(compose(&a, &b).apply(&x), a.apply(&b.apply(&x)));
        assert_eq!(compose(&b, &a).apply(&x), b.apply(&a.apply(&x)));
    }

    #[test]
    fn conjugate_orbit_examples() {
        let t0 = backward_shift(4);
        let x0 = e(4);
        let id = FiniteRankOperator::identity();
        assert_eq!(conjugate_orbit(&t0, &x0, &id, 5).unwrap(), t0.orbit(&x0, 5));
        let j = FiniteRankOperator::identity().with_term(delta(1), e(2));
        assert_eq!(conjugate_orbit(&t0, &x0, &j, 1).unwrap(), vec![j.apply(&x0)]);
        let direct: Vec<_> = t0.orbit(&x0, 4).iter().map(|y| j.apply(y)).collect();
        assert_eq!(conjugate_orbit(&t0, &x0, &j, 4).unwrap(), direct);
    }

    #[test]
    fn serde_shape() {
        let t = FiniteRankOperator::identity().with_term(delta(1), e(1).scale(&q(1, 2)));
        let json = serde_json::to_string(&t).unwrap();
        assert_eq!(json, r#"{"base":"identity","terms":[{"f":["1:1/1"],"v":["1:1/2"]}]}"#);
        assert_eq!(serde_json::from_str::<FiniteRankOperator<Rational>>(&json).unwrap(), t);
    }
}
