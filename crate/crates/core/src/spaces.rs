//! Coordinate seminorms, disks and the explicit dual computations that stand
//! in for Hahn–Banach in coordinate spaces.

use std::collections::{BTreeMap, BTreeSet};

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::lp::{self, LpOutcome};
use crate::scalar::Field;
use crate::sparse::{decode_pairs, CoordFunctional, SparseVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeminormKind {
    /// `p(x) = max wᵢ|xᵢ|` over active coordinates.
    Sup,
    /// `p(x) = Σ wᵢ|xᵢ|` over active coordinates.
    L1,
}

/// A weighted coordinate seminorm; its kernel is every vector supported off the active set.
#[derive(Debug, Clone, PartialEq)]
pub struct SeminormSpec<S> {
    kind: SeminormKind,
    weights: BTreeMap<usize, S>,
}

impl<S: Field> SeminormSpec<S> {
    pub fn new(kind: SeminormKind, weights: BTreeMap<usize, S>) -> Result<Self> {
        if let Some(i) = weights.keys().find(|&&i| i == 0) {
            return Err(Error::InvalidInput(format!("seminorm index {i}: indices start at 1")));
        }
        if let Some((i, _)) = weights.iter().find(|(_, w)| **w <= S::zero() || w.is_zero()) {
            return Err(Error::InvalidInput(format!("seminorm weight at {i} must be positive")));
        }
        Ok(Self { kind, weights })
    }

    /// Unit weights on the given coordinates.
    pub fn on(kind: SeminormKind, active: impl IntoIterator<Item = usize>) -> Result<Self> {
        Self::new(kind, active.into_iter().map(|i| (i, S::one())).collect())
    }

    /// Unit-weight `SUP` seminorm on coordinates `1..=n`.
    pub fn sup_upto(n: usize) -> Self {
        Self::on(SeminormKind::Sup, 1..=n).expect("valid indices")
    }

    pub fn l1_upto(n: usize) -> Self {
        Self::on(SeminormKind::L1, 1..=n).expect("valid indices")
    }

    pub fn kind(&self) -> SeminormKind {
        self.kind
    }

    pub fn weights(&self) -> &BTreeMap<usize, S> {
        &self.weights
    }

    pub fn active(&self) -> BTreeSet<usize> {
        self.weights.keys().copied().collect()
    }

    pub fn is_active(&self, index: usize) -> bool {
        self.weights.contains_key(&index)
    }

    pub fn max_active(&self) -> usize {
        self.weights.keys().next_back().copied().unwrap_or(0)
    }

    pub fn eval(&self, x: &SparseVector<S>) -> S {
        let terms = x.iter().filter_map(|(i, v)| self.weights.get(&i).map(|w| w.clone() * v.magnitude()));
        match self.kind {
            SeminormKind::Sup => terms.fold(S::zero(), S::max_of),
            SeminormKind::L1 => terms.fold(S::zero(), |a, b| a + b),
        }
    }

    /// Kernel membership by support inspection.
    pub fn in_kernel(&self, x: &SparseVector<S>) -> bool {
        x.iter().all(|(i, _)| !self.is_active(i))
    }

    /// Projection onto the active coordinates (the quotient by `ker p`).
    pub fn project(&self, x: &SparseVector<S>) -> SparseVector<S> {
        x.restrict(|i| self.is_active(i))
    }

    /// `p*(f) = sup{|f(x)| : p(x) ≤ 1}`.
    pub fn dual_norm(&self, f: &CoordFunctional<S>) -> Result<S> {
        if let Some(index) = f.support().into_iter().find(|&i| !self.is_active(i)) {
            return Err(Error::NotPBounded { index });
        }
        let ratios = f.iter().map(|(i, v)| v.magnitude() / self.weights[&i].clone());
        Ok(match self.kind {
            SeminormKind::Sup => ratios.fold(S::zero(), |a, b| a + b),
            SeminormKind::L1 => ratios.fold(S::zero(), S::max_of),
        })
    }

    /// A vector with `p(x) ≤ 1` attaining `f(x) = p*(f)`: a sign pattern for `SUP`,
    /// a single scaled coordinate for `L1`.
    pub fn dual_maximizer(&self, f: &CoordFunctional<S>) -> Result<SparseVector<S>> {
        self.dual_norm(f)?;
        let sign = |v: &S| if *v < S::zero() { -S::one() } else { S::one() };
        match self.kind {
            SeminormKind::Sup => SparseVector::from_entries(
                f.iter().map(|(i, v)| (i, sign(v) / self.weights[&i].clone())),
            ),
            SeminormKind::L1 => {
                let best = f.iter().fold(None::<(usize, S)>, |best, (i, v)| {
                    let r = v.magnitude() / self.weights[&i].clone();
                    match best {
                        Some((_, ref br)) if *br >= r => best,
                        _ => Some((i, r)),
                    }
                });
                match best {
                    None => Ok(SparseVector::zero()),
                    Some((i, _)) => {
                        let v = f.get(i);
                        SparseVector::from_entries([(i, sign(&v) / self.weights[&i].clone())])
                    }
                }
            }
        }
    }

    /// Whether the family is independent modulo `ker p` (full rank of active projections).
    pub fn is_independent(&self, vectors: &[SparseVector<S>]) -> bool {
        let projected: Vec<_> = vectors.iter().map(|v| self.project(v)).collect();
        crate::linalg::rank_of(&projected) == vectors.len()
    }
}

/// `p(x)`; zero exactly when `x` is supported off the active set.
pub fn eval_seminorm<S: Field>(p: &SeminormSpec<S>, x: &SparseVector<S>) -> S {
    p.eval(x)
}

pub fn dual_norm<S: Field>(p: &SeminormSpec<S>, f: &CoordFunctional<S>) -> Result<S> {
    p.dual_norm(f)
}

/// A Banach disk given either by `ℓ¹`-type weights or by a finite generator list.
#[derive(Debug, Clone, PartialEq)]
pub enum DiskSpec<S> {
    /// `p_D(x) = Σ |xᵢ| / dᵢ` on the weighted coordinates.
    Weights(BTreeMap<usize, S>),
    /// `K = {Σ aₙxₙ : ‖a‖₁ ≤ 1}`.
    Generators(Vec<SparseVector<S>>),
}

impl<S: Field> DiskSpec<S> {
    pub fn weights(weights: BTreeMap<usize, S>) -> Result<Self> {
        if weights.keys().any(|&i| i == 0) {
            return Err(Error::InvalidInput("disk indices start at 1".into()));
        }
        if let Some((i, _)) = weights.iter().find(|(_, d)| **d <= S::zero() || d.is_zero()) {
            return Err(Error::InvalidInput(format!("disk weight at {i} must be positive")));
        }
        Ok(DiskSpec::Weights(weights))
    }

    /// `ℓ¹` norm on coordinates `1..=n`.
    pub fn l1_upto(n: usize) -> Self {
        DiskSpec::Weights((1..=n).map(|i| (i, S::one())).collect())
    }

    pub fn generators(xs: Vec<SparseVector<S>>) -> Self {
        DiskSpec::Generators(xs)
    }

    /// The Minkowski functional `p_D(u)`.
    pub fn gauge(&self, u: &SparseVector<S>) -> Result<S> {
        match self {
            DiskSpec::Weights(w) => {
                let mut acc = S::zero();
                for (i, v) in u.iter() {
                    let d = w.get(&i).ok_or(Error::NotInSpan)?;
                    acc = acc + v.magnitude() / d.clone();
                }
                Ok(acc)
            }
            DiskSpec::Generators(xs) => minkowski_lp(xs, u).map(|(value, _)| value),
        }
    }

    /// Smallest `C` with `max_i |xᵢ| ≤ C · p_D(x)` over the coordinates the disk spans.
    pub fn window_domination(&self) -> Option<S> {
        match self {
            DiskSpec::Weights(w) => Some(w.values().cloned().fold(S::zero(), S::max_of)),
            DiskSpec::Generators(xs) => Some(xs.iter().map(SparseVector::max_abs).fold(S::zero(), S::max_of)),
        }
    }
}

/// `inf{‖a‖₁ : Σ aₙxₙ = u}` with the minimizing coefficients, by exact simplex.
pub fn minkowski_lp<S: Field>(generators: &[SparseVector<S>], u: &SparseVector<S>) -> Result<(S, Vec<S>)> {
    let g = generators.len();
    if u.is_zero() {
        return Ok((S::zero(), vec![S::zero(); g]));
    }
    let mut coords: BTreeSet<usize> = u.support();
    for x in generators {
        coords.extend(x.support());
    }
    // Variables: a⁺ (0..g) then a⁻ (g..2g).
    let rows: Vec<Vec<S>> = coords
        .iter()
        .map(|&i| {
            let mut row: Vec<S> = generators.iter().map(|x| x.get(i)).collect();
            row.extend(generators.iter().map(|x| -x.get(i)));
            row
        })
        .collect();
    let rhs: Vec<S> = coords.iter().map(|&i| u.get(i)).collect();
    let cost = vec![S::one(); 2 * g];
    match lp::minimize(&rows, &rhs, &cost) {
        LpOutcome::Optimal { value, solution } => {
            let coef = (0..g).map(|n| solution[n].clone() - solution[g + n].clone()).collect();
            Ok((value, coef))
        }
        LpOutcome::Infeasible => Err(Error::NotInSpan),
        LpOutcome::Unbounded => unreachable!("l1 objective is bounded below"),
    }
}

pub fn minkowski<S: Field>(disk: &DiskSpec<S>, u: &SparseVector<S>) -> Result<S> {
    disk.gauge(u)
}

/// Exact Gram–Schmidt residual of `u` against `span(basis)`.
pub(crate) fn orthogonal_residual<S: Field>(basis: &[SparseVector<S>], u: &SparseVector<S>) -> SparseVector<S> {
    let mut ortho: Vec<(SparseVector<S>, S)> = Vec::new();
    for b in basis {
        let r = reduce(&ortho, b);
        if !is_negligible(&r, b) {
            let n = r.dot(&r);
            ortho.push((r, n));
        }
    }
    let r = reduce(&ortho, u);
    if is_negligible(&r, u) {
        SparseVector::zero()
    } else {
        r
    }
}

fn reduce<S: Field>(ortho: &[(SparseVector<S>, S)], x: &SparseVector<S>) -> SparseVector<S> {
    let mut r = x.clone();
    for (q, qq) in ortho {
        let c = r.dot(q) / qq.clone();
        r = r.axpy(&-c, q);
    }
    if S::is_exact() {
        r
    } else {
        r.pruned()
    }
}

fn is_negligible<S: Field>(r: &SparseVector<S>, reference: &SparseVector<S>) -> bool {
    r.is_zero() || r.max_abs().negligible_against(&reference.max_abs())
}

/// Returns `f` with `supp f ⊆ active(p)`, `f|_L = 0`, `f(u) ≠ 0` and `p*(f) = 1`.
///
/// `f` is the component of the active projection of `u` orthogonal to the
/// active projections of `L`, rescaled by its dual norm; `f(u) > 0`.
pub fn separating_functional<S: Field>(
    p: &SeminormSpec<S>,
    l: &[SparseVector<S>],
    u: &SparseVector<S>,
) -> Result<CoordFunctional<S>> {
    let projected: Vec<_> = l.iter().map(|x| p.project(x)).collect();
    let r = orthogonal_residual(&projected, &p.project(u));
    if r.is_zero() {
        return Err(Error::NoSeparation);
    }
    let f = CoordFunctional::from_coeffs(r);
    let norm = p.dual_norm(&f)?;
    Ok(f.scale(&(S::one() / norm)))
}

/// Window basis of `ker p`: `e_i` for `i ≤ window` off the active set.
pub fn kernel_basis<S: Field>(p: &SeminormSpec<S>, window: usize) -> Vec<SparseVector<S>> {
    (1..=window).filter(|&i| !p.is_active(i)).map(SparseVector::basis).collect()
}

#[derive(Serialize, Deserialize)]
struct SeminormRepr {
    kind: SeminormKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    upto: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weight: Option<String>,
}

fn weights_to_pairs<S: Field>(w: &BTreeMap<usize, S>) -> Vec<String> {
    w.iter().map(|(i, v)| format!("{i}:{}", v.canonical())).collect()
}

fn pairs_to_weights<S: Field>(pairs: &[String]) -> Result<BTreeMap<usize, S>> {
    let v: SparseVector<S> = decode_pairs(pairs)?;
    Ok(v.iter().map(|(i, x)| (i, x.clone())).collect())
}

fn uniform_weights<S: Field>(upto: usize, weight: Option<&str>) -> Result<BTreeMap<usize, S>> {
    let w = match weight {
        Some(s) => S::parse_scalar(s)?,
        None => S::one(),
    };
    Ok((1..=upto).map(|i| (i, w.clone())).collect())
}

impl<S: Field> Serialize for SeminormSpec<S> {
    fn serialize<Z: Serializer>(&self, serializer: Z) -> std::result::Result<Z::Ok, Z::Error> {
        SeminormRepr { kind: self.kind, weights: Some(weights_to_pairs(&self.weights)), upto: None, weight: None }
            .serialize(serializer)
    }
}

impl<'de, S: Field> Deserialize<'de> for SeminormSpec<S> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = SeminormRepr::deserialize(deserializer)?;
        let weights = match (repr.weights, repr.upto) {
            (Some(pairs), None) => pairs_to_weights(&pairs),
            (None, Some(n)) => uniform_weights(n, repr.weight.as_deref()),
            _ => Err(Error::Parse("seminorm needs exactly one of `weights` or `upto`".into())),
        }
        .map_err(D::Error::custom)?;
        SeminormSpec::new(repr.kind, weights).map_err(D::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "S: Field")]
struct DiskRepr<S> {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    upto: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weight: Option<String>,
    #[serde(default = "Option::default", skip_serializing_if = "Option::is_none")]
    generators: Option<Vec<SparseVector<S>>>,
}

impl<S: Field> Serialize for DiskSpec<S> {
    fn serialize<Z: Serializer>(&self, serializer: Z) -> std::result::Result<Z::Ok, Z::Error> {
        let repr: DiskRepr<S> = match self {
            DiskSpec::Weights(w) => {
                DiskRepr { weights: Some(weights_to_pairs(w)), upto: None, weight: None, generators: None }
            }
            DiskSpec::Generators(xs) => {
                DiskRepr { weights: None, upto: None, weight: None, generators: Some(xs.clone()) }
            }
        };
        repr.serialize(serializer)
    }
}

impl<'de, S: Field> Deserialize<'de> for DiskSpec<S> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = DiskRepr::<S>::deserialize(deserializer)?;
        match (repr.weights, repr.upto, repr.generators) {
            (Some(pairs), None, None) => {
                pairs_to_weights(&pairs).and_then(DiskSpec::weights).map_err(D::Error::custom)
            }
            (None, Some(n), None) => uniform_weights(n, repr.weight.as_deref())
                .and_then(DiskSpec::weights)
                .map_err(D::Error::custom),
            (None, None, Some(xs)) => Ok(DiskSpec::Generators(xs)),
            _ => Err(D::Error::custom("disk needs exactly one of `weights`, `upto` or `generators`")),
        }
    }
}
