//! Seeded instance generators for property checks and scenarios.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::density::{Enumeration, Role};
use crate::finite_rank::{neumann_certificate, Base, FiniteRankOperator};
use crate::linalg::rank_of;
use crate::scalar::Field;
use crate::spaces::{DiskSpec, SeminormKind, SeminormSpec};
use crate::sparse::{CoordFunctional, SparseVector};
use crate::transport::EpsSchedule;

pub struct Gen {
    rng: ChaCha8Rng,
}

/// Everything `run_transport` needs for one instance.
#[derive(Debug, Clone)]
pub struct TransportInstance<S> {
    pub window: usize,
    pub k: usize,
    pub a: Enumeration<S>,
    pub b: Enumeration<S>,
    pub p: SeminormSpec<S>,
    pub disk: DiskSpec<S>,
    pub schedule: EpsSchedule<S>,
}

impl Gen {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn range(&mut self, lo: usize, hi_inclusive: usize) -> usize {
        self.rng.gen_range(lo..=hi_inclusive)
    }

    /// `n/d` with `|n| ≤ num_bound` and `d ∈ 1..=den_bound`.
    pub fn scalar<S: Field>(&mut self, num_bound: i64, den_bound: i64) -> S {
        let n = self.rng.gen_range(-num_bound..=num_bound);
        let d = self.rng.gen_range(1..=den_bound);
        S::from_ratio(n, d)
    }

    pub fn nonzero_scalar<S: Field>(&mut self, num_bound: i64, den_bound: i64) -> S {
        loop {
            let s: S = self.scalar(num_bound, den_bound);
            if !s.is_zero() {
                return s;
            }
        }
    }

    pub fn pick<T: Clone>(&mut self, items: &[T]) -> T {
        items.choose(&mut self.rng).expect("non-empty choice").clone()
    }

    /// Entries on `coords`, each present with probability `density`.
    pub fn vector_on<S: Field>(&mut self, coords: &[usize], density: f64, num_bound: i64, den_bound: i64) -> SparseVector<S> {
        let mut v = SparseVector::zero();
        for &i in coords {
            if self.rng.gen_bool(density) {
                v.set(i, self.scalar(num_bound, den_bound));
            }
        }
        v
    }

    pub fn vector<S: Field>(&mut self, window: usize, density: f64) -> SparseVector<S> {
        let coords: Vec<usize> = (1..=window).collect();
        self.vector_on(&coords, density, 4, 4)
    }

    pub fn functional<S: Field>(&mut self, window: usize, density: f64) -> CoordFunctional<S> {
        CoordFunctional::from_coeffs(self.vector(window, density))
    }

    /// `count` vectors whose projections onto `active(p)` are independent.
    pub fn p_independent<S: Field>(&mut self, p: &SeminormSpec<S>, count: usize, window: usize) -> Vec<SparseVector<S>> {
        assert!(count <= p.active().len(), "more vectors than active coordinates");
        let mut out: Vec<SparseVector<S>> = Vec::with_capacity(count);
        while out.len() < count {
            let v = self.vector(window, 0.5);
            let mut projected: Vec<_> = out.iter().map(|x| p.project(x)).collect();
            projected.push(p.project(&v));
            if rank_of(&projected) == projected.len() {
                out.push(v);
            }
        }
        out
    }

    /// Independent family of `count` vectors in the window.
    pub fn basis<S: Field>(&mut self, count: usize, window: usize, density: f64) -> Vec<SparseVector<S>> {
        assert!(count <= window);
        let mut out: Vec<SparseVector<S>> = Vec::with_capacity(count);
        while out.len() < count {
            let v = self.vector(window, density);
            let mut trial = out.clone();
            trial.push(v.clone());
            if rank_of(&trial) == trial.len() {
                out.push(v);
            }
        }
        out
    }

    /// Zero-based operator `Σ fⱼ⊗vⱼ` rescaled so its budget is at most ½.
    pub fn certified_perturbation<S: Field>(
        &mut self,
        p: &SeminormSpec<S>,
        disk: &DiskSpec<S>,
        window: usize,
        rank: usize,
    ) -> FiniteRankOperator<S> {
        let active: Vec<usize> = p.active().into_iter().collect();
        let mut t = FiniteRankOperator::zero();
        for _ in 0..rank {
            let f = loop {
                let f = CoordFunctional::from_coeffs(self.vector_on(&active, 0.6, 4, 4));
                if !f.is_zero() {
                    break f;
                }
            };
            let v = loop {
                let v = self.vector(window, 0.5);
                if !v.is_zero() {
                    break v;
                }
            };
            let size = p.dual_norm(&f).expect("active support") * disk.gauge(&v).expect("window disk");
            let shrink = S::one() / (S::from_i64(2 * rank as i64) * size);
            t.push(f, v.scale(&shrink));
        }
        debug_assert!(neumann_certificate(&t, p, disk).is_ok());
        t
    }

    /// `I + T` with a Neumann budget below 1 for `p = SUP` on the window and the ℓ¹ disk.
    pub fn certified_operator<S: Field>(&mut self, window: usize, rank: usize) -> FiniteRankOperator<S> {
        let p = SeminormSpec::sup_upto(window);
        let disk = DiskSpec::l1_upto(window);
        let t = self.certified_perturbation(&p, &disk, window, rank);
        FiniteRankOperator { base: Base::Identity, terms: t.terms }
    }

    /// Arbitrary finite-rank operator with the given base.
    pub fn operator<S: Field>(&mut self, base: Base, window: usize, rank: usize) -> FiniteRankOperator<S> {
        let mut t = FiniteRankOperator { base, terms: Vec::new() };
        for _ in 0..rank {
            let f = self.functional(window, 0.4);
            let v = self.vector(window, 0.4);
            t.push(f, v);
        }
        t
    }

    /// Pair-swapped near copies: `a(2i−1) ≈ b(2i)` and `a(2i) ≈ b(2i−1)`, each
    /// within a random multiple of `2⁻²⁰` on the inactive coordinates, plus
    /// unmatched extras filling the remaining active dimensions.
    ///
    /// `p = SUP` on the first half of the window, `D = ℓ¹` on the window,
    /// geometric schedule with ratio ½.
    pub fn transport_instance<S: Field>(&mut self, window: usize, k: usize) -> TransportInstance<S> {
        let half = window / 2;
        assert!(2 * k <= half, "2k matched centers need 2k active coordinates");
        let p = SeminormSpec::sup_upto(half);
        let disk = DiskSpec::l1_upto(window);
        let active: Vec<usize> = (1..=half).collect();
        let inactive: Vec<usize> = (half + 1..=window).collect();
        let extras = self.range(0, half - 2 * k);
        let centers = loop {
            let cs: Vec<SparseVector<S>> = (0..2 * k + 2 * extras).map(|_| self.vector_on(&active, 0.7, 4, 4)).collect();
            if rank_of(&cs[..2 * k + extras]) == 2 * k + extras
                && rank_of(&[&cs[..2 * k], &cs[2 * k + extras..]].concat()) == 2 * k + extras
            {
                break cs;
            }
        };
        let tiny = S::pow2(-20);
        let offset = |g: &mut Self| -> SparseVector<S> {
            let i = g.pick(&inactive);
            let c = S::from_i64(g.rng.gen_range(1..=3)) * tiny.clone();
            let c = if g.rng.gen_bool(0.5) { c } else { -c };
            SparseVector::basis(i).scale(&c)
        };
        let mut a_items = Vec::with_capacity(2 * k + extras);
        let mut b_items = Vec::with_capacity(2 * k + extras);
        for c in &centers[..2 * k] {
            a_items.push(c.add(&offset(self)));
        }
        for i in 0..2 * k {
            let partner = if i % 2 == 0 { i + 1 } else { i - 1 };
            b_items.push(centers[partner].add(&offset(self)));
        }
        a_items.extend(centers[2 * k..2 * k + extras].iter().cloned());
        b_items.extend(centers[2 * k + extras..].iter().cloned());
        TransportInstance {
            window,
            k,
            a: Enumeration::new(Role::A, a_items).expect("distinct centers"),
            b: Enumeration::new(Role::B, b_items).expect("distinct centers"),
            p,
            disk,
            schedule: EpsSchedule::Geometric(S::from_ratio(1, 2)),
        }
    }

    /// SUP or L1 seminorm on the first `n` coordinates with weights from `{1, ½, 2}`.
    pub fn seminorm<S: Field>(&mut self, n: usize) -> SeminormSpec<S> {
        let kind = if self.rng.gen_bool(0.5) { SeminormKind::Sup } else { SeminormKind::L1 };
        let choices = [S::one(), S::from_ratio(1, 2), S::from_i64(2)];
        let weights = (1..=n).map(|i| (i, self.pick(&choices))).collect();
        SeminormSpec::new(kind, weights).expect("positive weights")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    #[test]
    fn same_seed_same_stream() {
        let a: Vec<SparseVector<Rational>> = (0..5).map(|_| Gen::new(7).vector(8, 0.5)).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
        let mut g = Gen::new(7);
        let mut h = Gen::new(8);
        let x: Vec<SparseVector<Rational>> = (0..4).map(|_| g.vector(8, 0.5)).collect();
        let y: Vec<SparseVector<Rational>> = (0..4).map(|_| h.vector(8, 0.5)).collect();
        assert_ne!(x, y);
    }

    #[test]
    fn certified_operators_have_budget() {
        let mut g = Gen::new(3);
        let p = SeminormSpec::<Rational>::sup_upto(6);
        let d = DiskSpec::l1_upto(6);
        for _ in 0..10 {
            let t = g.certified_perturbation(&p, &d, 6, 3);
            let budget = neumann_certificate(&t, &p, &d).unwrap();
            assert!(budget.c <= Rational::from_ratio(1, 2));
        }
    }

    #[test]
    fn transport_instances_are_p_independent() {
        let mut g = Gen::new(11);
        for w in [12, 16, 24] {
            let inst = g.transport_instance::<Rational>(w, w / 4);
            assert!(inst.p.is_independent(&inst.a.items));
            assert!(inst.p.is_independent(&inst.b.items));
        }
    }
}
