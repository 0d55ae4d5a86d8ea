//! Greedy minor-preserving extension, the interleaved α/β bijection builder and
//! the unit-lower-triangular automorphism of ω it produces.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::check::Check;
use crate::error::{Error, Result};
use crate::finite_rank::{self, Base, FiniteRankOperator};
use crate::linalg::{self, Matrix};
use crate::scalar::Field;
use crate::sparse::{CoordFunctional, SparseVector};

/// A candidate chosen by a greedy step: its position in the candidate list and the new determinant.
#[derive(Debug, Clone, PartialEq)]
pub struct Pick<T, S> {
    pub position: usize,
    pub item: T,
    pub det: S,
}

/// `{fⱼ(x_k)}` with `j` indexing rows.
pub fn pairing_matrix<S: Field>(funcs: &[&CoordFunctional<S>], vectors: &[&SparseVector<S>]) -> Matrix<S> {
    Matrix::from_rows(funcs.iter().map(|f| vectors.iter().map(|x| f.apply(x)).collect()).collect())
}

fn nonzero_det<S: Field>(b: &Matrix<S>) -> Result<S> {
    let det = b.determinant();
    if det.is_zero() {
        return Err(Error::InvalidInput("the current pairing matrix is singular".into()));
    }
    Ok(det)
}

/// Picks `x_{n+1}` keeping `{fⱼ(x_k)}_{j,k≤n+1}` invertible; `det C = g(x_{n+1})·det B`.
pub fn greedy_extend_vector<S: Field>(
    funcs: &[CoordFunctional<S>],
    chosen: &[SparseVector<S>],
    candidates: &[SparseVector<S>],
) -> Result<Pick<SparseVector<S>, S>> {
    let n = chosen.len();
    if funcs.len() != n + 1 {
        return Err(Error::InvalidInput(format!("need {} functionals, got {}", n + 1, funcs.len())));
    }
    let fr: Vec<_> = funcs[..n].iter().collect();
    let xr: Vec<_> = chosen.iter().collect();
    let b = pairing_matrix(&fr, &xr);
    let det_b = nonzero_det(&b)?;
    let rhs: Vec<S> = chosen.iter().map(|x| funcs[n].apply(x)).collect();
    let c = b.transpose().solve(&rhs).expect("B is invertible");
    let g = funcs[..n].iter().zip(&c).fold(funcs[n].clone(), |g, (f, cj)| g.axpy(&-cj.clone(), f));
    for (position, x) in candidates.iter().enumerate() {
        let gx = g.apply(x);
        if !gx.is_zero() {
            return Ok(Pick { position, item: x.clone(), det: gx * det_b });
        }
    }
    Err(Error::Exhausted(format!("no candidate vector extends the {n}x{n} system")))
}

/// Dual of [`greedy_extend_vector`]: picks `f_{n+1}` with `f_{n+1}(y) ≠ 0`, `y = x_{n+1} − Σ d_k x_k`.
pub fn greedy_extend_functional<S: Field>(
    vectors: &[SparseVector<S>],
    chosen: &[CoordFunctional<S>],
    candidates: &[CoordFunctional<S>],
) -> Result<Pick<CoordFunctional<S>, S>> {
    let n = chosen.len();
    if vectors.len() != n + 1 {
        return Err(Error::InvalidInput(format!("need {} vectors, got {}", n + 1, vectors.len())));
    }
    let fr: Vec<_> = chosen.iter().collect();
    let xr: Vec<_> = vectors[..n].iter().collect();
    let b = pairing_matrix(&fr, &xr);
    let det_b = nonzero_det(&b)?;
    let rhs: Vec<S> = chosen.iter().map(|f| f.apply(&vectors[n])).collect();
    let d = b.solve(&rhs).expect("B is invertible");
    let y = vectors[..n].iter().zip(&d).fold(vectors[n].clone(), |y, (x, dk)| y.axpy(&-dk.clone(), x));
    for (position, f) in candidates.iter().enumerate() {
        let fy = f.apply(&y);
        if !fy.is_zero() {
            return Ok(Pick { position, item: f.clone(), det: fy * det_b });
        }
    }
    Err(Error::Exhausted(format!("no candidate functional extends the {n}x{n} system")))
}

/// Prefixes of α and β (1-based indices into `funcs` and `basis`) with the derived triangular data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Field")]
pub struct TriangularizeState<S> {
    pub alpha: Vec<usize>,
    pub beta: Vec<usize>,
    pub basis: Vec<SparseVector<S>>,
    pub funcs: Vec<CoordFunctional<S>>,
    /// `coeffs[m][j]` is `c_{j+1, m+1}` for `j ≤ m`.
    #[serde(with = "crate::scalar::text_vec2")]
    pub coeffs: Vec<Vec<S>>,
    pub v: Vec<SparseVector<S>>,
    /// `det {f_{α(j)}(u_{β(k)})}_{j,k≤n}` for `n = 1..=2k`.
    #[serde(with = "crate::scalar::text_vec")]
    pub minors: Vec<S>,
}

impl<S: Field> TriangularizeState<S> {
    pub fn stages(&self) -> usize {
        self.alpha.len() / 2
    }

    fn f_alpha(&self, j: usize) -> &CoordFunctional<S> {
        &self.funcs[self.alpha[j] - 1]
    }

    fn u_beta(&self, k: usize) -> &SparseVector<S> {
        &self.basis[self.beta[k] - 1]
    }

    /// `{f_{α(j)}(u_{β(k)})}_{j,k<n}`.
    pub fn leading_block(&self, n: usize) -> Matrix<S> {
        let fr: Vec<_> = (0..n).map(|j| self.f_alpha(j)).collect();
        let xr: Vec<_> = (0..n).map(|k| self.u_beta(k)).collect();
        pairing_matrix(&fr, &xr)
    }
}

fn min_unused(used: &[usize]) -> usize {
    let set: BTreeSet<usize> = used.iter().copied().collect();
    (1..).find(|i| !set.contains(i)).expect("unbounded range")
}

/// Runs `k` double stages of the alternating construction.
///
/// Odd positions take the least unused functional index and scan the unused
/// basis vectors; even positions take the least unused basis index and scan the
/// unused functionals. Both lists must have at least `2k + 2` entries.
pub fn interleave_triangularize<S: Field>(
    basis: &[SparseVector<S>],
    funcs: &[CoordFunctional<S>],
    k: usize,
) -> Result<TriangularizeState<S>> {
    let need = 2 * k + 2;
    if basis.len() < need || funcs.len() < need {
        return Err(Error::Exhausted(format!(
            "{k} stages need at least {need} basis vectors and functionals (got {} and {})",
            basis.len(),
            funcs.len()
        )));
    }
    if linalg::rank_of(basis) != basis.len() {
        return Err(Error::InvalidInput("basis is linearly dependent".into()));
    }
    let mut alpha: Vec<usize> = Vec::with_capacity(2 * k);
    let mut beta: Vec<usize> = Vec::with_capacity(2 * k);
    let mut minors = Vec::with_capacity(2 * k);
    for _ in 0..k {
        // Odd position: α fixed by the min rule, β by a vector step.
        let a = min_unused(&alpha);
        if a > funcs.len() {
            return Err(Error::Exhausted("functional list exhausted".into()));
        }
        alpha.push(a);
        let fs: Vec<_> = alpha.iter().map(|&i| funcs[i - 1].clone()).collect();
        let xs: Vec<_> = beta.iter().map(|&i| basis[i - 1].clone()).collect();
        let open: Vec<usize> = (1..=basis.len()).filter(|i| !beta.contains(i)).collect();
        let cands: Vec<_> = open.iter().map(|&i| basis[i - 1].clone()).collect();
        let pick = greedy_extend_vector(&fs, &xs, &cands)?;
        beta.push(open[pick.position]);
        minors.push(pick.det);

        // Even position: β fixed by the min rule, α by a functional step.
        let b = min_unused(&beta);
        if b > basis.len() {
            return Err(Error::Exhausted("basis list exhausted".into()));
        }
        beta.push(b);
        let xs: Vec<_> = beta.iter().map(|&i| basis[i - 1].clone()).collect();
        let fs: Vec<_> = alpha.iter().map(|&i| funcs[i - 1].clone()).collect();
        let open: Vec<usize> = (1..=funcs.len()).filter(|i| !alpha.contains(i)).collect();
        let cands: Vec<_> = open.iter().map(|&i| funcs[i - 1].clone()).collect();
        let pick = greedy_extend_functional(&xs, &fs, &cands)?;
        alpha.push(open[pick.position]);
        minors.push(pick.det);
    }
    let mut state = TriangularizeState {
        alpha,
        beta,
        basis: basis.to_vec(),
        funcs: funcs.to_vec(),
        coeffs: Vec::new(),
        v: Vec::new(),
        minors,
    };
    for m in 1..=state.alpha.len() {
        let a = state.leading_block(m);
        let mut rhs = vec![S::zero(); m];
        rhs[m - 1] = S::one();
        let c = a.solve(&rhs).ok_or_else(|| Error::Singular(format!("leading block {m} is singular")))?;
        let v = (0..m).fold(SparseVector::zero(), |acc, j| acc.axpy(&c[j], state.u_beta(j)));
        state.coeffs.push(c);
        state.v.push(if S::is_exact() { v } else { v.pruned() });
    }
    Ok(state)
}

/// Replays every invariant of a state from its raw data.
pub fn verify_triangularize<S: Field>(state: &TriangularizeState<S>) -> Vec<Check> {
    let n = state.alpha.len();
    let k = state.stages();
    let mut checks = Vec::new();

    let inj = |xs: &[usize]| xs.iter().collect::<BTreeSet<_>>().len() == xs.len();
    checks.push(Check::new("injective", inj(&state.alpha) && inj(&state.beta), ""));

    let cover = (1..=k).find(|&m| {
        let a: BTreeSet<_> = state.alpha[..2 * m].iter().collect();
        let b: BTreeSet<_> = state.beta[..2 * m].iter().collect();
        !(1..=m).all(|i| a.contains(&i) && b.contains(&i))
    });
    checks.push(Check::new("inin1", cover.is_none(), cover.map(|m| format!("fails at n = {m}")).unwrap_or_default()));

    let mut bad_minor = None;
    for m in 1..=n {
        let det = state.leading_block(m).determinant();
        if det.is_zero() || state.minors.get(m - 1) != Some(&det) {
            bad_minor = Some(m);
            break;
        }
    }
    checks.push(Check::new(
        "inin2",
        bad_minor.is_none() && state.minors.len() == n,
        bad_minor.map(|m| format!("minor {m}")).unwrap_or_default(),
    ));

    let diag = state.coeffs.iter().enumerate().all(|(m, c)| !c[m].is_zero());
    checks.push(Check::new("diagonal_coefficients_nonzero", diag, ""));

    let mut bio = None;
    'outer: for (kk, v) in state.v.iter().enumerate() {
        for j in 0..=kk {
            let val = state.f_alpha(j).apply(v);
            let want = if j == kk { S::one() } else { S::zero() };
            if !(val.clone() - want).is_zero() {
                bio = Some((j + 1, kk + 1));
                break 'outer;
            }
        }
    }
    checks.push(Check::new(
        "biorthogonal_triangular",
        bio.is_none(),
        bio.map(|(j, k)| format!("f_alpha({j})(v_{k})")).unwrap_or_default(),
    ));

    let mut span_bad = None;
    for m in 0..n {
        let inside = linalg::in_span(&state.v[..=m], state.u_beta(m));
        let outside = m == 0 || !linalg::in_span(&state.v[..m], state.u_beta(m));
        if !(inside && outside) {
            span_bad = Some(m + 1);
            break;
        }
    }
    checks.push(Check::new("span_property", span_bad.is_none(), span_bad.map(|m| format!("n = {m}")).unwrap_or_default()));
    checks
}

/// Coordinate indices `a(n)` with `f_{α(n)} = δ_{a(n)}`, or an error if some `f_{α(n)}` is not a coordinate functional.
pub fn alpha_coordinates<S: Field>(state: &TriangularizeState<S>) -> Result<Vec<usize>> {
    state
        .alpha
        .iter()
        .map(|&a| {
            let f = &state.funcs[a - 1];
            let mut it = f.iter();
            match (it.next(), it.next()) {
                (Some((i, v)), None) if (v.clone() - S::one()).is_zero() => Ok(i),
                _ => Err(Error::InvalidInput(format!("functional {a} is not a coordinate functional"))),
            }
        })
        .collect()
}

/// `T = I + Σ δ_{a(n)} ⊗ (vₙ − e_{a(n)})`, so `T e_{a(n)} = vₙ` and `T` fixes the other coordinates.
pub fn omega_operator_from<S: Field>(coords: &[usize], v: &[SparseVector<S>]) -> FiniteRankOperator<S> {
    let terms = coords.iter().zip(v).filter_map(|(&a, vn)| {
        let d = vn.sub(&SparseVector::basis(a));
        (!d.is_zero()).then(|| (CoordFunctional::delta(a), d))
    });
    FiniteRankOperator::new(Base::Identity, terms)
}

pub fn build_omega_operator<S: Field>(state: &TriangularizeState<S>) -> Result<FiniteRankOperator<S>> {
    Ok(omega_operator_from(&alpha_coordinates(state)?, &state.v))
}

/// `(a(1), a(2), …)` followed by the remaining indices of `1..=window` in increasing order.
pub fn shuffled_order(coords: &[usize], window: usize) -> Vec<usize> {
    let used: BTreeSet<usize> = coords.iter().copied().collect();
    coords.iter().copied().chain((1..=window).filter(|i| !used.contains(i))).collect()
}

/// Matrix of `t` in the basis `(e_{order[0]}, e_{order[1]}, …)`.
pub fn shuffled_matrix<S: Field>(t: &FiniteRankOperator<S>, order: &[usize]) -> Matrix<S> {
    let n = order.len();
    let mut m = Matrix::zeros(n, n);
    for (c, &j) in order.iter().enumerate() {
        let col = t.apply(&SparseVector::basis(j));
        for (r, &i) in order.iter().enumerate() {
            m.set(r, c, col.get(i));
        }
    }
    m
}

pub fn is_unit_lower_triangular<S: Field>(m: &Matrix<S>) -> bool {
    m.is_square()
        && (0..m.rows()).all(|r| {
            (r..m.cols()).all(|c| {
                let want = if r == c { S::one() } else { S::zero() };
                (m.get(r, c).clone() - want).is_zero()
            })
        })
}

/// Solves `t x = y` by forward substitution in the shuffled basis, returning `x`.
pub fn forward_substitute<S: Field>(t: &FiniteRankOperator<S>, order: &[usize], y: &SparseVector<S>) -> Result<SparseVector<S>> {
    let m = shuffled_matrix(t, order);
    if !is_unit_lower_triangular(&m) {
        return Err(Error::InvalidInput("operator is not unit lower triangular in this order".into()));
    }
    let mut x: Vec<S> = Vec::with_capacity(order.len());
    for (r, &i) in order.iter().enumerate() {
        let partial = (0..r).fold(S::zero(), |acc, c| acc + m.get(r, c).clone() * x[c].clone());
        x.push(y.get(i) - partial);
    }
    SparseVector::from_entries(order.iter().copied().zip(x))
}

/// Window large enough to hold every coordinate the operator touches.
pub fn omega_window<S: Field>(t: &FiniteRankOperator<S>, coords: &[usize]) -> usize {
    t.touched_max_index().max(coords.iter().copied().max().unwrap_or(0))
}

/// Operator equality checks for a built omega operator.
pub fn verify_omega<S: Field>(state: &TriangularizeState<S>, t: &FiniteRankOperator<S>) -> Vec<Check> {
    let coords = match alpha_coordinates(state) {
        Ok(c) => c,
        Err(e) => return vec![Check::new("coordinate_functionals", false, e.to_string())],
    };
    let window = omega_window(t, &coords);
    let order = shuffled_order(&coords, window);
    let lower = is_unit_lower_triangular(&shuffled_matrix(t, &order));
    let images = coords.iter().zip(&state.v).all(|(&a, v)| t.apply(&SparseVector::basis(a)) == *v);
    let round_trip = (1..=window).all(|i| {
        let y = SparseVector::basis(i);
        forward_substitute(t, &order, &y).map(|x| t.apply(&x) == y).unwrap_or(false)
    });
    let invertible = finite_rank::invert(t)
        .map(|inv| finite_rank::compose(&inv, t).agrees_on_window(&FiniteRankOperator::identity(), window))
        .unwrap_or(false);
    vec![
        Check::new("unit_lower_triangular", lower, format!("window {window}")),
        Check::new("images", images, ""),
        Check::new("forward_substitution", round_trip, ""),
        Check::new("exact_inverse", invertible, ""),
    ]
}

/// `t_to ∘ t_from⁻¹`, carrying `t_from(φ)` onto `t_to(φ)`.
pub fn transfer_operator<S: Field>(
    t_from: &FiniteRankOperator<S>,
    t_to: &FiniteRankOperator<S>,
) -> Result<FiniteRankOperator<S>> {
    Ok(finite_rank::compose(t_to, &finite_rank::invert(t_from)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::check::all_passed;
    use crate::scalar::{q, Rational};

    fn e(i: usize) -> SparseVector<Rational> {
        SparseVector::basis(i)
    }

    fn deltas(n: usize) -> Vec<CoordFunctional<Rational>> {
        (1..=n).map(CoordFunctional::delta).collect()
    }

    #[test]
    fn vector_step_examples() {
        let p = greedy_extend_vector(&deltas(1), &[], &[e(2), e(1)]).unwrap();
        assert_eq!((p.position, p.det), (1, q(1, 1)));
        let p = greedy_extend_vector(&deltas(2), &[e(1)], &[e(1).add(&e(2))]).unwrap();
        assert_eq!((p.item, p.det.clone()), (e(1).add(&e(2)), q(1, 1)));
        let m = Matrix::from_rows(vec![vec![q(1, 1), q(1, 1)], vec![q(0, 1), q(1, 1)]]);
        assert_eq!(m.determinant(), p.det);
        assert!(matches!(greedy_extend_vector(&deltas(2), &[e(1)], &[e(1), e(3)]), Err(Error::Exhausted(_))));
    }

    #[test]
    fn functional_step_examples() {
        let p = greedy_extend_functional(&[e(2)], &[], &deltas(2)).unwrap();
        assert_eq!(p.item, CoordFunctional::delta(2));
        let xs = [e(1), e(1).add(&e(2))];
        let p = greedy_extend_functional(&xs, &deltas(1), &deltas(2)).unwrap();
        assert_eq!((p.item, p.det), (CoordFunctional::delta(2), q(1, 1)));
        let r = greedy_extend_functional(&xs, &deltas(1), &[CoordFunctional::delta(1), CoordFunctional::delta(3)]);
        assert!(matches!(r, Err(Error::Exhausted(_))));
    }

    #[test]
    fn standard_basis_is_fixed() {
        let basis: Vec<_> = (1..=8).map(e).collect();
        let s = interleave_triangularize(&basis, &deltas(8), 3).unwrap();
        assert_eq!(s.alpha, vec![1, 2, 3, 4, 5, 6]);
        assert_eq!(s.beta, vec![1, 2, 3, 4, 5, 6]);
        for (m, c) in s.coeffs.iter().enumerate() {
            for (j, cj) in c.iter().enumerate() {
                assert_eq!(*cj, if j == m { q(1, 1) } else { q(0, 1) });
            }
        }
        assert_eq!(s.v, (1..=6).map(e).collect::<Vec<_>>());
        assert!(all_passed(&verify_triangularize(&s)));
        assert_eq!(build_omega_operator(&s).unwrap(), FiniteRankOperator::identity());
    }

    #[test]
    fn swapped_pair_by_hand() {
        // Position 1: α = 1 (least unused), scan (e2, e1, e3, e4): δ1(e2) = 0, δ1(e1) = 1, so β = 2.
        // Position 2: β = 1 (least unused), u = e2 and δ2 is the first unused functional with δ2(e2) ≠ 0.
        let basis = vec![e(2), e(1), e(3), e(4)];
        let s = interleave_triangularize(&basis, &deltas(4), 1).unwrap();
        assert_eq!(s.alpha, vec![1, 2]);
        assert_eq!(s.beta, vec![2, 1]);
        assert_eq!(s.v, vec![e(1), e(2)]);
        assert!(all_passed(&verify_triangularize(&s)));
    }

    #[test]
    fn sheared_basis_passes_all_checks() {
        let basis = vec![e(1), e(1).add(&e(2)), e(3), e(4), e(5), e(6)];
        let s = interleave_triangularize(&basis, &deltas(6), 2).unwrap();
        assert!(all_passed(&verify_triangularize(&s)));
        for n in 1..=4 {
            assert!(!s.leading_block(n).determinant().is_zero());
        }
        let t = build_omega_operator(&s).unwrap();
        assert!(all_passed(&verify_omega(&s, &t)));
    }

    #[test]
    fn too_small_window_is_exhausted() {
        let basis: Vec<_> = (1..=5).map(e).collect();
        assert!(matches!(interleave_triangularize(&basis, &deltas(5), 2), Err(Error::Exhausted(_))));
    }

    #[test]
    fn omega_operator_examples() {
        let t = omega_operator_from(&[1, 2, 3], &[e(1).add(&e(2)), e(2), e(3)]);
        let m = shuffled_matrix(&t, &[1, 2, 3]);
        let want = Matrix::from_rows(vec![
            vec![q(1, 1), q(0, 1), q(0, 1)],
            vec![q(1, 1), q(1, 1), q(0, 1)],
            vec![q(0, 1), q(0, 1), q(1, 1)],
        ]);
        assert_eq!(m, want);
        assert!(is_unit_lower_triangular(&m));
        // In the natural order a shuffled operator is not lower triangular.
        let t = omega_operator_from(&[2, 1], &[e(2).add(&e(1)), e(1)]);
        assert!(!is_unit_lower_triangular(&shuffled_matrix(&t, &[1, 2, 3])));
        assert!(is_unit_lower_triangular(&shuffled_matrix(&t, &shuffled_order(&[2, 1], 3))));
        let y = SparseVector::from_dense(&[q(3, 1), q(-1, 2), q(5, 1)]);
        let x = forward_substitute(&t, &shuffled_order(&[2, 1], 3), &y).unwrap();
        assert_eq!(t.apply(&x), y);
    }

    #[test]
    fn transfer_maps_one_image_to_the_other() {
        let t1 = omega_operator_from(&[1, 2], &[e(1).add(&e(2)), e(2)]);
        let t2 = omega_operator_from(&[1, 2], &[e(1), e(2).add(&e(3))]);
        let r = transfer_operator(&t1, &t2).unwrap();
        assert_eq!(r.apply(&t1.apply(&e(1))), t2.apply(&e(1)));
        assert_eq!(r.apply(&t1.apply(&e(2))), t2.apply(&e(2)));
    }
}
