//! Dense-set surrogates: p-independent extraction, disks from null sequences,
//! the common disk of two nets, and biorthogonal systems.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Field;
use crate::spaces::{separating_functional, DiskSpec, SeminormSpec};
use crate::sparse::{CoordFunctional, SparseVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    A,
    B,
}

/// Ordered finite prefix of a countable set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Field")]
pub struct Enumeration<S> {
    pub role: Role,
    pub items: Vec<SparseVector<S>>,
}

impl<S: Field> Enumeration<S> {
    pub fn new(role: Role, items: Vec<SparseVector<S>>) -> Result<Self> {
        for (i, x) in items.iter().enumerate() {
            if let Some(j) = items[..i].iter().position(|y| y == x) {
                return Err(Error::InvalidInput(format!("items {} and {} coincide", j + 1, i + 1)));
            }
        }
        Ok(Self { role, items })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// 1-based access, matching the enumeration `a(n)`.
    pub fn at(&self, n: usize) -> &SparseVector<S> {
        &self.items[n - 1]
    }
}

/// Window sup-norm distance.
pub fn window_distance<S: Field>(x: &SparseVector<S>, y: &SparseVector<S>) -> S {
    x.sub(y).max_abs()
}

/// Open ball in the window sup norm; `radius: None` is the whole window.
#[derive(Debug, Clone, PartialEq)]
pub struct Ball<S> {
    pub center: SparseVector<S>,
    pub radius: Option<S>,
}

impl<S: Field> Ball<S> {
    pub fn whole() -> Self {
        Self { center: SparseVector::zero(), radius: None }
    }

    pub fn new(center: SparseVector<S>, radius: S) -> Self {
        Self { center, radius: Some(radius) }
    }

    pub fn contains(&self, x: &SparseVector<S>) -> bool {
        match &self.radius {
            None => true,
            Some(r) => window_distance(x, &self.center) < *r,
        }
    }
}

/// Greedy choice of one element per ball, keeping the picks independent modulo `ker p`.
pub fn extract_p_independent<S: Field>(
    a: &Enumeration<S>,
    p: &SeminormSpec<S>,
    opens: &[Ball<S>],
) -> Result<Enumeration<S>> {
    if p.active().len() < 2 {
        return Err(Error::InvalidInput("the seminorm needs at least two active coordinates".into()));
    }
    let mut picks: Vec<SparseVector<S>> = Vec::with_capacity(opens.len());
    let mut projected: Vec<SparseVector<S>> = Vec::with_capacity(opens.len());
    for (n, ball) in opens.iter().enumerate() {
        let found = a.items.iter().find(|x| {
            if !ball.contains(x) || picks.contains(x) {
                return false;
            }
            let mut trial = projected.clone();
            trial.push(p.project(x));
            crate::linalg::rank_of(&trial) == trial.len()
        });
        match found {
            Some(x) => {
                projected.push(p.project(x));
                picks.push(x.clone());
            }
            None => return Err(Error::Exhausted(format!("ball {} holds no admissible element", n + 1))),
        }
    }
    Enumeration::new(a.role, picks)
}

/// The disk `K = {Σ aₙxₙ : ‖a‖₁ ≤ 1}` of a truncated null sequence.
pub fn null_sequence_disk<S: Field>(xs: &[SparseVector<S>]) -> DiskSpec<S> {
    DiskSpec::Generators(xs.to_vec())
}

/// Finite list of targets that a set must approximate within `eps`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonNet<S> {
    pub window: usize,
    pub targets: Vec<SparseVector<S>>,
    pub eps: S,
}

impl<S: Field> EpsilonNet<S> {
    /// Index and distance of the element of `set` nearest to `target` (first on ties).
    pub fn nearest(target: &SparseVector<S>, set: &[SparseVector<S>]) -> Option<(usize, S)> {
        set.iter().enumerate().fold(None, |best, (i, x)| {
            let d = window_distance(target, x);
            match best {
                Some((_, ref bd)) if *bd <= d => best,
                _ => Some((i, d)),
            }
        })
    }

    /// `Ok` if every target has an element of `set` strictly within `eps`.
    pub fn check(&self, set: &[SparseVector<S>]) -> Result<()> {
        for (t, target) in self.targets.iter().enumerate() {
            match Self::nearest(target, set) {
                Some((_, d)) if d < self.eps => {}
                _ => return Err(Error::NotANet { target: t + 1, eps: self.eps.canonical() }),
            }
        }
        Ok(())
    }

    pub fn radius(&self, set: &[SparseVector<S>]) -> Option<S> {
        self.targets
            .iter()
            .map(|t| Self::nearest(t, set).map(|(_, d)| d))
            .try_fold(S::zero(), |acc, d| d.map(|d| acc.max_of(d)))
    }
}

/// One step `m` of the rescaling schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Field")]
pub struct ScheduleEntry<S> {
    pub m: usize,
    pub target: usize,
    pub alpha: usize,
    pub beta: usize,
    /// Window norm of `f(m) − α(m)`.
    #[serde(with = "crate::scalar::text")]
    pub residual_a: S,
    #[serde(with = "crate::scalar::text")]
    pub residual_b: S,
    /// `4^m` times the window residuals.
    #[serde(with = "crate::scalar::text")]
    pub scaled_a: S,
    #[serde(with = "crate::scalar::text")]
    pub scaled_b: S,
    /// `p_D(f(m) − α(m))` and `p_D(f(m) − β(m))`, each at most `2^{−m}`.
    #[serde(with = "crate::scalar::text")]
    pub pd_a: S,
    #[serde(with = "crate::scalar::text")]
    pub pd_b: S,
}

/// Nearest elements of `A` and `B` to one target, measured by `p_D`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Field")]
pub struct NetDistance<S> {
    pub target: usize,
    pub nearest_a: usize,
    #[serde(with = "crate::scalar::text")]
    pub dist_a: S,
    pub nearest_b: usize,
    #[serde(with = "crate::scalar::text")]
    pub dist_b: S,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommonDisk<S> {
    pub disk: DiskSpec<S>,
    /// Both `A` and `B` are `eps_prime`-nets for the targets under `p_D`.
    pub eps_prime: S,
    /// `max |xᵢ| ≤ domination · p_D(x)`.
    pub domination: S,
    pub generators: Vec<SparseVector<S>>,
    pub schedule: Vec<ScheduleEntry<S>>,
    pub distances: Vec<NetDistance<S>>,
}

/// Weight-form disk in which both nets stay nets.
///
/// The null sequence collects `2^m(f(m) − α(m))`, `2^m(f(m) − β(m))` for a
/// round-robin `f` over the targets and `γ_m·x` for every item, with
/// `γ_m = 2^{−m} / (1 + ‖x‖)`. The weights `dᵢ = N · max |gᵢ|` over the
/// generators make `p_D(g) ≤ 1` for each generator, so the weight disk
/// contains the generator disk.
pub fn common_disk<S: Field>(
    a: &Enumeration<S>,
    b: &Enumeration<S>,
    net: &EpsilonNet<S>,
    rounds: usize,
) -> Result<CommonDisk<S>> {
    net.check(&a.items)?;
    net.check(&b.items)?;
    if net.targets.is_empty() {
        return Err(Error::InvalidInput("the net has no targets".into()));
    }
    let t = net.targets.len();
    let mut generators: Vec<SparseVector<S>> = Vec::new();
    let mut picks = Vec::new();
    for m in 1..=rounds.max(1) * t {
        let target = (m - 1) % t;
        let f = &net.targets[target];
        let (ia, _) = EpsilonNet::nearest(f, &a.items).expect("checked");
        let (ib, _) = EpsilonNet::nearest(f, &b.items).expect("checked");
        let two_m = S::pow2(m as i32);
        for item in [&a.items[ia], &b.items[ib]] {
            let g = f.sub(item).scale(&two_m);
            if !g.is_zero() {
                generators.push(g);
            }
        }
        picks.push((m, target, ia, ib));
    }
    for (m, x) in a.items.iter().chain(&b.items).enumerate() {
        let gamma = S::pow2(-((m + 1) as i32)) / (S::one() + x.max_abs());
        if !x.is_zero() {
            generators.push(x.scale(&gamma));
        }
    }
    let mut weights: BTreeMap<usize, S> = BTreeMap::new();
    for g in &generators {
        for (i, v) in g.iter() {
            let w = weights.entry(i).or_insert_with(S::zero);
            *w = w.clone().max_of(v.magnitude());
        }
    }
    let n = S::from_i64(net.window.max(weights.keys().copied().max().unwrap_or(0)) as i64);
    let weights: BTreeMap<usize, S> = weights.into_iter().map(|(i, w)| (i, w * n.clone())).collect();
    let domination = weights.values().cloned().fold(S::zero(), S::max_of);
    let disk = DiskSpec::weights(weights)?;

    let four = S::from_i64(4);
    let mut schedule = Vec::with_capacity(picks.len());
    for (m, target, ia, ib) in picks {
        let f = &net.targets[target];
        let ra = f.sub(&a.items[ia]);
        let rb = f.sub(&b.items[ib]);
        let scale = (0..m).fold(S::one(), |acc, _| acc * four.clone());
        schedule.push(ScheduleEntry {
            m,
            target: target + 1,
            alpha: ia + 1,
            beta: ib + 1,
            residual_a: ra.max_abs(),
            residual_b: rb.max_abs(),
            scaled_a: ra.max_abs() * scale.clone(),
            scaled_b: rb.max_abs() * scale,
            pd_a: disk.gauge(&ra)?,
            pd_b: disk.gauge(&rb)?,
        });
    }

    let mut distances = Vec::with_capacity(t);
    let mut eps_prime = S::zero();
    for (k, target) in net.targets.iter().enumerate() {
        let (ia, da) = nearest_in_gauge(&disk, target, &a.items)?;
        let (ib, db) = nearest_in_gauge(&disk, target, &b.items)?;
        eps_prime = eps_prime.max_of(da.clone()).max_of(db.clone());
        distances.push(NetDistance { target: k + 1, nearest_a: ia + 1, dist_a: da, nearest_b: ib + 1, dist_b: db });
    }
    Ok(CommonDisk { disk, eps_prime, domination, generators, schedule, distances })
}

fn nearest_in_gauge<S: Field>(disk: &DiskSpec<S>, target: &SparseVector<S>, set: &[SparseVector<S>]) -> Result<(usize, S)> {
    let mut best: Option<(usize, S)> = None;
    for (i, x) in set.iter().enumerate() {
        let d = disk.gauge(&target.sub(x))?;
        if best.as_ref().is_none_or(|(_, bd)| d < *bd) {
            best = Some((i, d));
        }
    }
    best.ok_or_else(|| Error::InvalidInput("empty enumeration".into()))
}

/// Functionals `fₙ` supported on `active(p)` with `fₙ(u_m) = δ_{n,m}`.
///
/// A forward sweep takes `gₙ` separating `uₙ` from `u₁..u_{n−1}` with
/// `gₙ(uₙ) = 1`; back substitution from the end removes the remaining
/// upper-triangular entries.
pub fn biorthogonalize<S: Field>(us: &[SparseVector<S>], p: &SeminormSpec<S>) -> Result<Vec<CoordFunctional<S>>> {
    if !p.is_independent(us) {
        return Err(Error::KernelCollision(format!(
            "the span of the {} vectors meets ker p or they are dependent",
            us.len()
        )));
    }
    let mut g = Vec::with_capacity(us.len());
    for (n, u) in us.iter().enumerate() {
        let gn = separating_functional(p, &us[..n], u).map_err(|_| Error::KernelCollision(format!("at u_{}", n + 1)))?;
        let scale = S::one() / gn.apply(u);
        g.push(gn.scale(&scale));
    }
    let mut f: Vec<CoordFunctional<S>> = vec![CoordFunctional::zero(); us.len()];
    for n in (0..us.len()).rev() {
        let mut fn_ = g[n].clone();
        for m in n + 1..us.len() {
            let c = g[n].apply(&us[m]);
            fn_ = fn_.axpy(&-c, &f[m]);
        }
        f[n] = if S::is_exact() { fn_ } else { CoordFunctional::from_coeffs(fn_.coeffs().pruned()) };
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{q, Rational};
    use crate::spaces::SeminormKind;

    fn e(i: usize) -> SparseVector<Rational> {
        SparseVector::basis(i)
    }

    fn v2(a: (i64, i64), b: (i64, i64)) -> SparseVector<Rational> {
        SparseVector::from_dense(&[q(a.0, a.1), q(b.0, b.1)])
    }

    #[test]
    fn extraction_on_a_norm_is_a_span_filter() {
        let p = SeminormSpec::sup_upto(3);
        let a = Enumeration::new(Role::A, vec![e(1), e(1).add(&e(2)), e(2), e(3)]).unwrap();
        let b = extract_p_independent(&a, &p, &[Ball::whole(), Ball::whole(), Ball::whole()]).unwrap();
        assert_eq!(b.items, vec![e(1), e(1).add(&e(2)), e(3)]);
    }

    #[test]
    fn extraction_skips_projection_dependent_items() {
        let p = SeminormSpec::on(SeminormKind::Sup, [1, 2]).unwrap();
        let a = Enumeration::new(Role::A, vec![e(1), e(1).scale(&q(2, 1)), e(1).add(&e(2)), e(3)]).unwrap();
        let b = extract_p_independent(&a, &p, &[Ball::whole(), Ball::whole()]).unwrap();
        assert_eq!(b.items, vec![e(1), e(1).add(&e(2))]);
        // e3 is in ker p, so a third pick is impossible.
        let r = extract_p_independent(&a, &p, &[Ball::whole(), Ball::whole(), Ball::whole()]);
        assert!(matches!(r, Err(Error::Exhausted(_))));
    }

    #[test]
    fn extraction_respects_balls() {
        let p = SeminormSpec::sup_upto(2);
        let a = Enumeration::new(Role::A, vec![e(1), e(2)]).unwrap();
        let far = Ball::new(SparseVector::from_dense(&[q(5, 1), q(5, 1)]), q(1, 1));
        assert!(matches!(extract_p_independent(&a, &p, &[far]), Err(Error::Exhausted(_))));
        let near_e2 = Ball::new(e(2), q(1, 2));
        assert_eq!(extract_p_independent(&a, &p, &[near_e2]).unwrap().items, vec![e(2)]);
    }

    #[test]
    fn null_sequence_disks() {
        let d = null_sequence_disk(&[e(1), e(2)]);
        assert_eq!(d.gauge(&v2((1, 2), (-1, 3))).unwrap(), q(5, 6));
        let d = null_sequence_disk(&[e(1)]);
        assert_eq!(d.gauge(&e(1).scale(&q(-7, 2))).unwrap(), q(7, 2));
        assert_eq!(d.gauge(&e(2)), Err(Error::NotInSpan));
        let d = null_sequence_disk(&[e(1), e(1).scale(&q(1, 2))]);
        assert_eq!(d.gauge(&e(1)).unwrap(), q(1, 1));
    }

    fn grid(mesh: i64, lo: i64, hi: i64) -> Vec<SparseVector<Rational>> {
        let mut out = Vec::new();
        for a in lo..=hi {
            for b in lo..=hi {
                out.push(v2((a, mesh), (b, mesh)));
            }
        }
        out
    }

    #[test]
    fn common_disk_on_grids() {
        let a = Enumeration::new(Role::A, grid(4, -4, 4)).unwrap();
        let b = Enumeration::new(Role::B, grid(4, -4, 4).into_iter().rev().collect()).unwrap();
        let net = EpsilonNet { window: 2, targets: grid(2, -2, 2), eps: q(1, 4) };
        let cd = common_disk(&a, &b, &net, 3).unwrap();
        assert!(cd.eps_prime <= q(1, 2));
        for x in a.items.iter().chain(&b.items) {
            let pd = cd.disk.gauge(x).unwrap();
            assert!(x.max_abs() <= cd.domination.clone() * pd);
        }
        for s in &cd.schedule {
            assert!(s.pd_a <= Rational::pow2(-(s.m as i32)));
        }
        for g in &cd.generators {
            assert!(cd.disk.gauge(g).unwrap() <= q(1, 1));
        }
    }

    #[test]
    fn common_disk_with_offset_targets() {
        let a = Enumeration::new(Role::A, grid(4, -4, 4)).unwrap();
        let b = Enumeration::new(Role::B, grid(4, -4, 4)).unwrap();
        let targets = vec![v2((1, 8), (1, 8)), v2((-3, 8), (5, 8))];
        let net = EpsilonNet { window: 2, targets, eps: q(1, 4) };
        let cd = common_disk(&a, &b, &net, 2).unwrap();
        assert!(cd.eps_prime > q(0, 1));
        for (s, d) in cd.schedule.iter().zip(cd.distances.iter().cycle()) {
            assert_eq!(s.target, d.target);
            assert!(d.dist_a <= s.pd_a);
        }
    }

    #[test]
    fn common_disk_rejects_non_nets() {
        let a = Enumeration::new(Role::A, vec![e(1)]).unwrap();
        let net = EpsilonNet { window: 2, targets: vec![e(2).scale(&q(3, 1))], eps: q(1, 4) };
        assert_eq!(common_disk(&a, &a, &net, 1).unwrap_err(), Error::NotANet { target: 1, eps: "1/4".into() });
    }

    #[test]
    fn biorthogonal_examples() {
        let p = SeminormSpec::sup_upto(2);
        let d = |i| CoordFunctional::<Rational>::delta(i);
        assert_eq!(biorthogonalize(&[e(1), e(2)], &p).unwrap(), vec![d(1), d(2)]);
        assert_eq!(biorthogonalize(&[e(1), e(1).add(&e(2))], &p).unwrap(), vec![d(1).sub(&d(2)), d(2)]);
        assert!(matches!(biorthogonalize(&[e(1), e(1)], &p), Err(Error::KernelCollision(_))));
        assert!(matches!(biorthogonalize(&[e(3)], &p), Err(Error::KernelCollision(_))));
    }

    #[test]
    fn biorthogonal_with_kernel_components() {
        let p = SeminormSpec::sup_upto(3);
        let us = vec![e(1).add(&e(5)), e(2).sub(&e(4)).add(&e(1)), e(3).add(&e(2)).scale(&q(1, 3))];
        let fs = biorthogonalize(&us, &p).unwrap();
        for (n, f) in fs.iter().enumerate() {
            assert!(f.support().iter().all(|&i| i <= 3));
            for (m, u) in us.iter().enumerate() {
                assert_eq!(f.apply(u), if n == m { q(1, 1) } else { q(0, 1) });
            }
        }
    }
}
