//! Back-and-forth synthesis of `J = I + T` with `J(a(nⱼ)) = b(mⱼ)` and `J` fixing `ker p`.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::check::Check;
use crate::density::Enumeration;
use crate::error::{Error, Result};
use crate::finite_rank::{self, FiniteRankOperator};
use crate::scalar::Field;
use crate::spaces::{separating_functional, DiskSpec, SeminormSpec};
use crate::sparse::{CoordFunctional, SparseVector};

/// Per-term accuracy schedule `ε₁, ε₂, …` with `Σεⱼ < 1`.
#[derive(Debug, Clone, PartialEq)]
pub enum EpsSchedule<S> {
    /// `εⱼ = r^{j+1}`; the full sum `r²/(1−r)` must be below 1.
    Geometric(S),
    Explicit(Vec<S>),
}

impl<S: Field> EpsSchedule<S> {
    pub fn validate(&self) -> Result<()> {
        match self {
            EpsSchedule::Geometric(r) => {
                if *r <= S::zero() || *r >= S::one() {
                    return Err(Error::InvalidInput("geometric ratio must lie in (0, 1)".into()));
                }
                let total = r.clone() * r.clone() / (S::one() - r.clone());
                if total >= S::one() {
                    return Err(Error::InvalidInput(format!("geometric schedule sums to {}", total.canonical())));
                }
            }
            EpsSchedule::Explicit(eps) => {
                if eps.iter().any(|e| *e <= S::zero()) {
                    return Err(Error::InvalidInput("epsilons must be positive".into()));
                }
                let total = eps.iter().cloned().fold(S::zero(), |a, b| a + b);
                if total >= S::one() {
                    return Err(Error::InvalidInput(format!("explicit schedule sums to {}", total.canonical())));
                }
            }
        }
        Ok(())
    }

    /// `εⱼ` for `j = 1..=count`.
    pub fn take(&self, count: usize) -> Result<Vec<S>> {
        self.validate()?;
        match self {
            EpsSchedule::Geometric(r) => {
                let mut out = Vec::with_capacity(count);
                let mut cur = r.clone() * r.clone();
                for _ in 0..count {
                    out.push(cur.clone());
                    cur = cur * r.clone();
                }
                Ok(out)
            }
            EpsSchedule::Explicit(eps) => {
                if eps.len() < count {
                    return Err(Error::InvalidInput(format!("{count} epsilons needed, {} given", eps.len())));
                }
                Ok(eps[..count].to_vec())
            }
        }
    }
}

impl<S: Field> fmt::Display for EpsSchedule<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EpsSchedule::Geometric(r) => write!(f, "geometric:{}", r.canonical()),
            EpsSchedule::Explicit(eps) => {
                let parts: Vec<_> = eps.iter().map(Field::canonical).collect();
                write!(f, "explicit:{}", parts.join(","))
            }
        }
    }
}

impl<S: Field> FromStr for EpsSchedule<S> {
    type Err = Error;

    /// `geometric:R` or `explicit:E1,E2,…`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("expected geometric:R or explicit:E1,E2,... got {s:?}")))?;
        let schedule = match kind.trim() {
            "geometric" => EpsSchedule::Geometric(S::parse_scalar(rest)?),
            "explicit" => EpsSchedule::Explicit(rest.split(',').map(S::parse_scalar).collect::<Result<_>>()?),
            other => return Err(Error::Parse(format!("unknown schedule kind {other:?}"))),
        };
        schedule.validate()?;
        Ok(schedule)
    }
}

impl<S: Field> Serialize for EpsSchedule<S> {
    fn serialize<Z: serde::Serializer>(&self, z: Z) -> std::result::Result<Z::Ok, Z::Error> {
        z.serialize_str(&self.to_string())
    }
}

impl<'de, S: Field> Deserialize<'de> for EpsSchedule<S> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Output of one half-step: the rank-one update `f⊗v` and the matched element `M[position]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult<S> {
    pub f: CoordFunctional<S>,
    pub v: SparseVector<S>,
    pub position: usize,
    pub item: SparseVector<S>,
}

fn gauge_or_none<S: Field>(disk: &DiskSpec<S>, x: &SparseVector<S>) -> Option<S> {
    disk.gauge(x).ok()
}

/// Forward half-step: `R = T + f⊗v` with `(I+R)u = r ∈ M`.
///
/// `t` is the zero-based finite-rank part. The first `r` in `M` with
/// `p_D(r − u − Tu) < eps·|f(u)|` is taken.
pub fn step_forward<S: Field>(
    t: &FiniteRankOperator<S>,
    p: &SeminormSpec<S>,
    disk: &DiskSpec<S>,
    u: &SparseVector<S>,
    l: &[SparseVector<S>],
    m: &[SparseVector<S>],
    eps: &S,
) -> Result<StepResult<S>> {
    let f = separating_functional(p, l, u)?;
    let fu = f.apply(u);
    let target = u.add(&t.apply(u));
    let bound = eps.clone() * fu.magnitude();
    let mut best: Option<S> = None;
    for (position, r) in m.iter().enumerate() {
        let diff = r.sub(&target);
        let Some(d) = gauge_or_none(disk, &diff) else { continue };
        if d < bound {
            let v = diff.scale(&(S::one() / fu));
            return Ok(StepResult { f, v, position, item: r.clone() });
        }
        best = Some(best.map_or(d.clone(), |b| b.min_of(d)));
    }
    Err(Error::NoApproximant {
        best: best.map_or_else(|| "none".into(), |b| (b / fu.magnitude()).canonical()),
        needed: eps.canonical(),
    })
}

/// Backward half-step: `R = T + f⊗v` with `(I+R)a = u` for some `a ∈ M`.
///
/// `w = (I+T)⁻¹u` is computed exactly; the first `a ∈ M` with `f(a) ≠ 0` and
/// `p_D((I+T)(w − a)) < eps·|f(a)|` is taken.
pub fn step_backward<S: Field>(
    t: &FiniteRankOperator<S>,
    p: &SeminormSpec<S>,
    disk: &DiskSpec<S>,
    u: &SparseVector<S>,
    l: &[SparseVector<S>],
    m: &[SparseVector<S>],
    eps: &S,
) -> Result<StepResult<S>> {
    let j = t.plus_identity();
    let w = finite_rank::invert(&j)?.apply(u);
    let f = separating_functional(p, l, &w)?;
    let mut best: Option<S> = None;
    for (position, a) in m.iter().enumerate() {
        let fa = f.apply(a);
        if fa.is_zero() {
            continue;
        }
        let diff = j.apply(&w.sub(a));
        let Some(d) = gauge_or_none(disk, &diff) else { continue };
        let ratio = d / fa.magnitude();
        if ratio < *eps {
            let v = diff.scale(&(S::one() / fa));
            return Ok(StepResult { f, v, position, item: a.clone() });
        }
        best = Some(best.map_or(ratio.clone(), |b| b.min_of(ratio)));
    }
    Err(Error::NoApproximant {
        best: best.map_or_else(|| "none".into(), |b| b.canonical()),
        needed: eps.canonical(),
    })
}

/// Stage data of the back-and-forth: `T_k = Σ_{j≤2k} fⱼ⊗vⱼ` and the index lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Field")]
pub struct TransportState<S> {
    pub a: Enumeration<S>,
    pub b: Enumeration<S>,
    pub p: SeminormSpec<S>,
    pub disk: DiskSpec<S>,
    #[serde(with = "crate::scalar::text_vec")]
    pub epsilons: Vec<S>,
    pub n_idx: Vec<usize>,
    pub m_idx: Vec<usize>,
    pub t: FiniteRankOperator<S>,
}

impl<S: Field> TransportState<S> {
    pub fn new(
        a: Enumeration<S>,
        b: Enumeration<S>,
        p: SeminormSpec<S>,
        disk: DiskSpec<S>,
        epsilons: Vec<S>,
    ) -> Self {
        Self { a, b, p, disk, epsilons, n_idx: Vec::new(), m_idx: Vec::new(), t: FiniteRankOperator::zero() }
    }

    pub fn stage(&self) -> usize {
        self.n_idx.len() / 2
    }

    /// `J = I + T_k`.
    pub fn j(&self) -> FiniteRankOperator<S> {
        self.t.plus_identity()
    }

    /// Largest coordinate carried by the enumerations, the seminorm or the operator.
    pub fn window(&self) -> usize {
        let items = self.a.items.iter().chain(&self.b.items).map(SparseVector::max_index).max().unwrap_or(0);
        items.max(self.p.max_active()).max(self.t.touched_max_index())
    }

    fn used_a(&self) -> Vec<SparseVector<S>> {
        self.n_idx.iter().map(|&n| self.a.at(n).clone()).collect()
    }
}

/// A failed run: the wrapped error names the stage, `partial` holds every completed half-step.
#[derive(Debug, Clone)]
pub struct TransportAbort<S> {
    pub error: Error,
    pub partial: Box<TransportState<S>>,
}

impl<S> fmt::Display for TransportAbort<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.error.fmt(f)
    }
}

impl<S: fmt::Debug> std::error::Error for TransportAbort<S> {}

fn min_unused(used: &[usize]) -> usize {
    let set: BTreeSet<usize> = used.iter().copied().collect();
    (1..).find(|i| !set.contains(i)).expect("unbounded range")
}

/// Runs `k` stages of forward/backward steps and returns `J = I + T_k` with its state.
pub fn run_transport<S: Field>(
    a: &Enumeration<S>,
    b: &Enumeration<S>,
    p: &SeminormSpec<S>,
    disk: &DiskSpec<S>,
    schedule: &EpsSchedule<S>,
    k: usize,
) -> std::result::Result<(FiniteRankOperator<S>, TransportState<S>), TransportAbort<S>> {
    let abort = |stage: usize, error: Error, state: &TransportState<S>| TransportAbort {
        error: Error::StageFailed { stage, source: Box::new(error) },
        partial: Box::new(state.clone()),
    };
    let empty = TransportState::new(a.clone(), b.clone(), p.clone(), disk.clone(), Vec::new());
    let epsilons = schedule.take(2 * k).map_err(|e| abort(0, e, &empty))?;
    let mut state = TransportState { epsilons, ..empty };
    for (name, e) in [("A", a), ("B", b)] {
        if !p.is_independent(&e.items) {
            let err = Error::InvalidInput(format!("enumeration {name} is not p-independent"));
            return Err(abort(0, err, &state));
        }
    }
    for q in 1..=k {
        let n_odd = min_unused(&state.n_idx);
        let m_even = min_unused(&state.m_idx);
        if n_odd > a.len() || m_even > b.len() {
            return Err(abort(q, Error::Exhausted("enumeration prefix too short".into()), &state));
        }

        let u = a.at(n_odd).clone();
        let l = state.used_a();
        let open_b: Vec<usize> =
            (1..=b.len()).filter(|i| *i != m_even && !state.m_idx.contains(i)).collect();
        let cands: Vec<_> = open_b.iter().map(|&i| b.at(i).clone()).collect();
        let eps = state.epsilons[2 * q - 2].clone();
        let step = step_forward(&state.t, p, disk, &u, &l, &cands, &eps).map_err(|e| abort(q, e, &state))?;
        state.t.push(step.f, step.v);
        state.n_idx.push(n_odd);
        state.m_idx.push(open_b[step.position]);

        let u = b.at(m_even).clone();
        let l = state.used_a();
        let open_a: Vec<usize> = (1..=a.len()).filter(|i| !state.n_idx.contains(i)).collect();
        let cands: Vec<_> = open_a.iter().map(|&i| a.at(i).clone()).collect();
        let eps = state.epsilons[2 * q - 1].clone();
        let step = step_backward(&state.t, p, disk, &u, &l, &cands, &eps).map_err(|e| abort(q, e, &state))?;
        state.t.push(step.f, step.v);
        state.n_idx.push(open_a[step.position]);
        state.m_idx.push(m_even);
    }
    Ok((state.j(), state))
}

/// One matched pair `(I+T)a(nⱼ) = b(mⱼ)` with its residual.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchedPair<S> {
    pub j: usize,
    pub n: usize,
    pub m: usize,
    /// Window sup norm of `(I+T)a(nⱼ) − b(mⱼ)`.
    pub residual: S,
}

pub fn matched_pairs<S: Field>(state: &TransportState<S>) -> Vec<MatchedPair<S>> {
    let j = state.j();
    state
        .n_idx
        .iter()
        .zip(&state.m_idx)
        .enumerate()
        .map(|(i, (&n, &m))| {
            let residual = if n <= state.a.len() && m <= state.b.len() {
                j.apply(state.a.at(n)).sub(state.b.at(m)).max_abs()
            } else {
                S::one()
            };
            MatchedPair { j: i + 1, n, m, residual }
        })
        .collect()
}

/// Recomputes (t1)–(t5), the budget, kernel fixing, invertibility and the min rule from raw data.
pub fn verify_transport<S: Field>(state: &TransportState<S>) -> Vec<Check> {
    let mut checks = Vec::new();
    let len = state.n_idx.len();
    let k = state.stage();
    let shape_ok = state.m_idx.len() == len && state.t.terms.len() == len && len.is_multiple_of(2);
    checks.push(Check::new(
        "t4_shape",
        shape_ok,
        format!("{} n, {} m, {} terms", len, state.m_idx.len(), state.t.terms.len()),
    ));

    let distinct = |xs: &[usize]| xs.iter().collect::<BTreeSet<_>>().len() == xs.len();
    checks.push(Check::new("t1_distinct", distinct(&state.n_idx) && distinct(&state.m_idx), ""));

    let cover = (1..=k).find(|&q| {
        let n: BTreeSet<_> = state.n_idx[..2 * q].iter().collect();
        let m: BTreeSet<_> = state.m_idx[..2 * q].iter().collect();
        !(1..=q).all(|i| n.contains(&i) && m.contains(&i))
    });
    checks.push(Check::new("t2_coverage", cover.is_none(), cover.map(|q| format!("stage {q}")).unwrap_or_default()));

    let mut t3_bad = None;
    for (j, term) in state.t.terms.iter().enumerate() {
        let ok = match (state.p.dual_norm(&term.f), state.disk.gauge(&term.v), state.epsilons.get(j)) {
            (Ok(dual), Ok(pd), Some(eps)) => dual <= S::one() && pd < *eps,
            _ => false,
        };
        if !ok {
            t3_bad = Some(j + 1);
            break;
        }
    }
    let eps_total = state.epsilons.iter().cloned().fold(S::zero(), |a, b| a + b);
    checks.push(Check::new(
        "t3_bounds",
        t3_bad.is_none() && eps_total < S::one(),
        t3_bad.map(|j| format!("term {j}")).unwrap_or_else(|| format!("sum eps = {}", eps_total.canonical())),
    ));

    let bad: Vec<_> = matched_pairs(state).into_iter().filter(|mp| !mp.residual.is_zero()).collect();
    checks.push(Check::new(
        "t5_exact",
        bad.is_empty(),
        bad.first().map(|mp| format!("j = {} residual {}", mp.j, mp.residual.canonical())).unwrap_or_default(),
    ));

    match finite_rank::neumann_certificate(&state.t, &state.p, &state.disk) {
        Ok(budget) => checks.push(Check::new("budget", true, format!("c = {}", budget.c.canonical()))),
        Err(e) => checks.push(Check::new("budget", false, e.to_string())),
    }

    let window = state.window();
    let j = state.j();
    let moved = (1..=window).filter(|i| !state.p.is_active(*i)).find(|&i| {
        let e = SparseVector::basis(i);
        j.apply(&e) != e
    });
    checks.push(Check::new(
        "kernel_fixed",
        moved.is_none(),
        moved.map(|i| format!("e_{i} moved")).unwrap_or_else(|| format!("window {window}")),
    ));

    let round_trip = finite_rank::invert(&j).map(|inv| {
        let id = FiniteRankOperator::identity();
        finite_rank::compose(&inv, &j).agrees_on_window(&id, window)
            && finite_rank::compose(&j, &inv).agrees_on_window(&id, window)
    });
    checks.push(match round_trip {
        Ok(ok) => Check::new("invert_round_trip", ok, ""),
        Err(e) => Check::new("invert_round_trip", false, e.to_string()),
    });

    let mut rule_bad = None;
    for q in 1..=k {
        if state.n_idx[2 * q - 2] != min_unused(&state.n_idx[..2 * q - 2])
            || state.m_idx[2 * q - 1] != min_unused(&state.m_idx[..2 * q - 2])
        {
            rule_bad = Some(q);
            break;
        }
    }
    checks.push(Check::new("min_rule", rule_bad.is_none(), rule_bad.map(|q| format!("stage {q}")).unwrap_or_default()));
    checks
}
