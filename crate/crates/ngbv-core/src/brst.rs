//! BV differential s = γ + δ, antibracket, free BRST current and
//! reparametrization-invariant observables.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_traits::Zero;

use crate::graded::Poly;
use crate::jet::{tensor_components, tensor_index, Gen, JetAlgebra, JetError, Kind, Polynomial, TowerRule};
use crate::lagrangian::NgModel;
use crate::linalg;
use crate::scalar::{ci, cr, crq, factorial, Q, CQ};

/// The BV field-antifield pairs used by the antibracket.
pub fn field_components(alg: &JetAlgebra) -> Vec<(Kind, Kind, usize)> {
    let mut v = Vec::new();
    for k in Kind::FIELDS {
        for i in 0..alg.index_range(k) {
            v.push((k, k.antifield().expect("field"), i));
        }
    }
    v
}

/// (F, G) = Σ_α δ_rF/δφ^α · δ_lG/δφ‡_α − δ_rF/δφ‡_α · δ_lG/δφ^α.
pub fn antibracket(alg: &JetAlgebra, f: &Polynomial, g: &Polynomial) -> Polynomial {
    let lim = Some(alg.lambda_order);
    let mut r = Polynomial::zero();
    for (k, kd, i) in field_components(alg) {
        let a = alg.el_derivative_right(f, k, i);
        if !a.is_zero() {
            let b = alg.el_derivative(g, kd, i);
            r.add_assign(&a.mul_trunc(&b, lim));
        }
        let a = alg.el_derivative_right(f, kd, i);
        if !a.is_zero() {
            let b = alg.el_derivative(g, k, i);
            r.add_assign(&a.mul_trunc(&b, lim).neg());
        }
    }
    r
}

/// Right-hand sides of the BV differential on undifferentiated generators.
#[derive(Clone, Debug)]
pub struct BvComplex {
    pub model: NgModel,
    delta_phi_dagger: Vec<Polynomial>,
}

impl BvComplex {
    pub fn new(model: NgModel) -> Self {
        let k = model.k();
        let eom = model.eom(k + 1);
        let delta_phi_dagger = eom
            .iter()
            .enumerate()
            .map(|(a, e)| e.scale(-crq(model.bg.h[a])).shift(-1, 0).truncate(k))
            .collect();
        BvComplex { model, delta_phi_dagger }
    }

    pub fn flat_strip() -> Self {
        Self::new(NgModel::flat_strip())
    }

    pub fn alg(&self) -> &JetAlgebra {
        &self.model.alg
    }

    fn k(&self) -> i32 {
        self.model.k()
    }

    fn var(&self, kind: Kind, i: usize) -> Polynomial {
        self.model.field(kind, i)
    }

    /// γ on an undifferentiated generator.
    pub fn gamma_generator(&self, kind: Kind, i: usize) -> Polynomial {
        let m = &self.model;
        let alg = self.alg();
        match kind {
            Kind::Phi => m.gamma_phi(i),
            Kind::C => m.gamma_c(i),
            Kind::Cbar => self.var(Kind::B, i).scale(ci()),
            Kind::B | Kind::CbarDagger | Kind::BDagger | Kind::Tensor => Polynomial::zero(),
            Kind::PhiDagger => {
                let mut r = Polynomial::zero();
                for mu in 0..m.d() {
                    let t = self.var(Kind::C, mu).mul(&self.var(Kind::PhiDagger, i));
                    r.add_assign(&alg.total_derivative_free(&t, mu));
                }
                r.shift(1, 0)
            }
            Kind::CDagger => {
                let mut r = Polynomial::zero();
                for l in 0..m.d() {
                    let t = self.var(Kind::C, l).mul(&self.var(Kind::CDagger, i));
                    r.add_assign(&alg.total_derivative_free(&t, l));
                    let t = m.dfield(Kind::C, l, &[i]).mul(&self.var(Kind::CDagger, l));
                    r.add_assign(&t);
                }
                r.shift(1, 0)
            }
        }
    }

    /// δ on an undifferentiated generator.
    pub fn delta_generator(&self, kind: Kind, i: usize) -> Polynomial {
        let m = &self.model;
        match kind {
            Kind::PhiDagger => self.delta_phi_dagger[i].clone(),
            Kind::CDagger => {
                let mut r = Polynomial::zero();
                for a in 0..m.n() {
                    r.add_assign(&m.dxt(i, a).mul(&self.var(Kind::PhiDagger, a)));
                }
                r.truncate(self.k())
            }
            Kind::BDagger => self.var(Kind::CbarDagger, i).scale(-ci()),
            _ => Polynomial::zero(),
        }
    }

    fn prolonged(&self, g: &Gen, base: &dyn Fn(Kind, usize) -> Polynomial) -> Polynomial {
        let p = base(g.kind, g.index as usize);
        self.alg().total_derivative_multi(&p, &g.deriv)
    }

    fn apply(&self, p: &Polynomial, which: u8) -> Polynomial {
        let k = self.k();
        let base = |kind: Kind, i: usize| match which {
            0 => self.gamma_generator(kind, i),
            1 => self.delta_generator(kind, i),
            _ => self.gamma_generator(kind, i).add(&self.delta_generator(kind, i)),
        };
        p.apply_derivation(true, Some(k), |g| self.prolonged(g, &base))
    }

    pub fn gamma(&self, p: &Polynomial) -> Result<Polynomial, JetError> {
        self.alg().check_jets(p)?;
        Ok(self.apply(p, 0))
    }

    pub fn delta(&self, p: &Polynomial) -> Result<Polynomial, JetError> {
        self.alg().check_jets(p)?;
        Ok(self.apply(p, 1))
    }

    pub fn s(&self, p: &Polynomial) -> Result<Polynomial, JetError> {
        self.alg().check_jets(p)?;
        Ok(self.apply(p, 2))
    }

    /// s without the jet-order guard, for iterated application.
    pub fn s_free(&self, p: &Polynomial) -> Polynomial {
        self.apply(p, 2)
    }

    pub fn gamma_free(&self, p: &Polynomial) -> Polynomial {
        self.apply(p, 0)
    }

    /// s(s(g)) for every undifferentiated generator, split by λ-order.
    pub fn nilpotency_report(&self) -> Vec<NilpotencyEntry> {
        let alg = self.alg();
        let mut out = Vec::new();
        for kind in Kind::BV {
            for i in 0..alg.index_range(kind) {
                let g = self.var(kind, i);
                let ss = self.s_free(&self.s_free(&g));
                for order in 0..=self.k() {
                    let part = ss.lambda_part(order);
                    out.push(NilpotencyEntry {
                        kind,
                        index: i,
                        order,
                        raw_terms: part.len(),
                        trivial_mod_d: alg.is_trivial_mod_d(&part),
                    });
                }
            }
        }
        out
    }

    pub fn master_equation(&self) -> Polynomial {
        let l = self.model.extended_lagrangian();
        antibracket(self.alg(), &l, &l)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NilpotencyEntry {
    pub kind: Kind,
    pub index: usize,
    pub order: i32,
    pub raw_terms: usize,
    pub trivial_mod_d: bool,
}

/// j^μ = ∂^μB_ν C^ν − B_ν ∂^μC^ν on the background.
pub fn brst_current(m: &NgModel) -> Vec<Polynomial> {
    brst_current_with_sign(m, 1)
}

/// The current with the relative sign of its second term set to `sign`;
/// `sign = −1` serves as a negative control.
pub fn brst_current_with_sign(m: &NgModel, sign: i128) -> Vec<Polynomial> {
    let alg = &m.alg;
    let d = m.d();
    (0..d)
        .map(|mu| {
            let mut r = Polynomial::zero();
            for rho in 0..d {
                let c = m.bg.g_inv[mu][rho];
                if c.is_zero() {
                    continue;
                }
                for nu in 0..d {
                    let b = m.lower_b(nu);
                    let cn = m.field(Kind::C, nu);
                    let t1 = alg.total_derivative_free(&b, rho).mul(&cn);
                    let t2 = b.mul(&alg.total_derivative_free(&cn, rho));
                    r.add_scaled(&t1, crq(c));
                    r.add_scaled(&t2, -crq(c) * cr(sign));
                }
            }
            r
        })
        .collect()
}

pub fn divergence(m: &NgModel, j: &[Polynomial]) -> Polynomial {
    let mut r = Polynomial::zero();
    for (mu, jm) in j.iter().enumerate() {
        r.add_assign(&m.alg.total_derivative_free(jm, mu));
    }
    r
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ReductionError {
    NoTimelikeDirection,
    SingularPrincipalPart,
}

impl fmt::Display for ReductionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReductionError::NoTimelikeDirection => write!(f, "no coordinate direction with g^{{μμ}} != 0"),
            ReductionError::SingularPrincipalPart => write!(f, "free field equations do not determine all □φ"),
        }
    }
}

/// Normal form modulo the differential ideal of field equations: every
/// jet with two or more derivatives in direction μ0 is eliminated using
/// the solved equations.
pub struct EomReducer<'a> {
    model: &'a NgModel,
    mu0: usize,
    /// Replacement for ∂_{μ0}∂_{μ0}φ, keyed by (kind, index).
    rules: BTreeMap<(Kind, u32), Polynomial>,
    max_lambda: i32,
}

impl<'a> EomReducer<'a> {
    /// Builds the reducer from a Lagrangian whose λ⁰ part has principal terms
    /// Σ_j M_ij □φ^j in the Euler-Lagrange derivative with respect to φ^i.
    /// Terms of higher λ-order up to `max_lambda` are solved perturbatively.
    pub fn new(model: &'a NgModel, lagrangian: &Polynomial, max_lambda: i32) -> Result<Self, ReductionError> {
        let d = model.d();
        let gi = &model.bg.g_inv;
        let mu0 = (0..d).find(|&m| !gi[m][m].is_zero()).ok_or(ReductionError::NoTimelikeDirection)?;
        let w = model.linear_operator(&lagrangian.lambda_part(0));
        let labels = w.labels.clone();
        let nl = labels.len();
        // M_ij from the coefficient of ∂_{μ0}∂_{μ0}, divided by g^{μ0μ0}.
        let key = crate::jet::Deriv::of(&[mu0, mu0]);
        let mut mat = vec![vec![CQ::zero(); nl]; nl];
        for i in 0..nl {
            for j in 0..nl {
                if let Some(c) = w.entries[i][j].get(&key) {
                    mat[i][j] = *c / crq(gi[mu0][mu0]);
                }
            }
        }
        let inv = linalg::invert(&mat).ok_or(ReductionError::SingularPrincipalPart)?;
        // Higher-order parts of the field equations.
        let mut higher: Vec<Polynomial> = Vec::new();
        for &(k, i) in &labels {
            let el = model.alg.el_derivative(lagrangian, k, i);
            higher.push(el.filter(|t| t.lambda >= 1 && t.lambda <= max_lambda));
        }
        let mut rules = BTreeMap::new();
        for (j, &(kj, ij)) in labels.iter().enumerate() {
            // □φ_j = −Σ_i inv_ji · higher_i
            let mut boxv = Polynomial::zero();
            for i in 0..nl {
                if !inv[j][i].is_zero() {
                    boxv.add_scaled(&higher[i], -inv[j][i]);
                }
            }
            // g^{00}∂0∂0φ = □φ − Σ_{(μ,ν)≠(0,0)} g^{μν} ∂μ∂νφ
            let mut rhs = boxv;
            for mu in 0..d {
                for nu in 0..d {
                    if (mu, nu) == (mu0, mu0) || gi[mu][nu].is_zero() {
                        continue;
                    }
                    rhs.add_scaled(&model.dfield(kj, ij, &[mu, nu]), -crq(gi[mu][nu]));
                }
            }
            rules.insert((kj, ij as u32), rhs.scale(crq(Q::from_integer(1) / gi[mu0][mu0])));
        }
        Ok(EomReducer { model, mu0, rules, max_lambda })
    }

    pub fn reduce(&self, p: &Polynomial) -> Polynomial {
        let mut cur = p.truncate(self.max_lambda);
        loop {
            let reducible = cur.symbols().into_iter().any(|g| self.reducible(&g));
            if !reducible {
                return cur;
            }
            cur = cur.substitute(Some(self.max_lambda), |g| self.image(g));
        }
    }

    fn reducible(&self, g: &Gen) -> bool {
        g.deriv.0[self.mu0] >= 2 && self.rules.contains_key(&(g.kind, g.index))
    }

    fn image(&self, g: &Gen) -> Polynomial {
        if !self.reducible(g) {
            return Poly::symbol(*g);
        }
        let mut rest = g.deriv;
        rest.0[self.mu0] -= 2;
        let rule = &self.rules[&(g.kind, g.index)];
        self.model.alg.total_derivative_multi(rule, &rest)
    }
}

#[derive(Clone, Debug)]
pub struct ConservationReport {
    pub divergence_terms: usize,
    pub remainder_order0: Polynomial,
    pub remainder_order1: Polynomial,
    pub wrong_sign_remainder: Polynomial,
}

impl ConservationReport {
    pub fn conserved_at_leading_order(&self) -> bool {
        self.remainder_order0.is_zero() && !self.wrong_sign_remainder.is_zero()
    }
}

pub fn check_conservation(bv: &BvComplex) -> Result<ConservationReport, ReductionError> {
    let m = &bv.model;
    let div = divergence(m, &brst_current(m));
    let free = EomReducer::new(m, &m.free_lagrangian(), 0)?;
    let r0 = free.reduce(&div);
    let bad = free.reduce(&divergence(m, &brst_current_with_sign(m, -1)));
    let lpsi = NgModel::antifield_free(&m.gauge_fixed_lagrangian());
    let inter = EomReducer::new(m, &lpsi.truncate(1), 1)?;
    let r1 = inter.reduce(&div).lambda_part(1);
    Ok(ConservationReport {
        divergence_terms: div.len(),
        remainder_order0: r0,
        remainder_order1: r1,
        wrong_sign_remainder: bad,
    })
}

/// Numeric test-tensor data at the expansion point: symmetric components
/// t_A for |A| ≤ rank and their worldsheet derivatives ∂_μ t_A.
#[derive(Clone, Debug, Default)]
pub struct ObservableTower {
    pub rank: usize,
    pub values: BTreeMap<Vec<u8>, Q>,
    pub derivatives: BTreeMap<(Vec<u8>, usize), Q>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ObservableError {
    Inconsistent { components: Vec<u8>, direction: usize },
    RankTooLarge(usize),
}

impl fmt::Display for ObservableError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObservableError::Inconsistent { components, direction } => {
                write!(f, "tower violates ∂_μ t_A = dX^a_μ t_(aA) at A={:?}, μ={}", components, direction)
            }
            ObservableError::RankTooLarge(r) => write!(f, "tower rank {} exceeds 7", r),
        }
    }
}

fn sorted(v: &[u8]) -> Vec<u8> {
    let mut s = v.to_vec();
    s.sort_unstable();
    s
}

impl ObservableTower {
    /// Tower of a target polynomial T(X) = Σ c_A X^A at X = 0 with the
    /// derivatives induced by the flat embedding.
    pub fn from_target_function(bg: &crate::background::Background, rank: usize, coeff: impl Fn(&[u8]) -> Q) -> Self {
        let mut t = ObservableTower { rank, ..Default::default() };
        for comps in sorted_tuples(bg.n, rank) {
            t.values.insert(comps.clone(), coeff(&comps));
        }
        for comps in sorted_tuples(bg.n, rank.saturating_sub(1)) {
            for mu in 0..bg.d {
                let mut s = Q::zero();
                for a in 0..bg.n {
                    let mut c = comps.clone();
                    c.push(a as u8);
                    s += bg.dx[mu][a] * coeff(&sorted(&c));
                }
                t.derivatives.insert((comps.clone(), mu), s);
            }
        }
        t
    }

    pub fn value(&self, comps: &[u8]) -> Q {
        self.values.get(&sorted(comps)).copied().unwrap_or_else(Q::zero)
    }

    pub fn check(&self, bg: &crate::background::Background) -> Result<(), ObservableError> {
        if self.rank > 7 {
            return Err(ObservableError::RankTooLarge(self.rank));
        }
        for ((comps, mu), val) in &self.derivatives {
            if comps.len() + 1 > self.rank {
                continue;
            }
            let mut s = Q::zero();
            for a in 0..bg.n {
                let mut c = comps.clone();
                c.push(a as u8);
                s += bg.dx[*mu][a] * self.value(&c);
            }
            if s != *val {
                return Err(ObservableError::Inconsistent { components: sorted(comps), direction: *mu });
            }
        }
        Ok(())
    }
}

pub fn sorted_tuples(n: usize, k: usize) -> Vec<Vec<u8>> {
    let mut out = vec![Vec::new()];
    for _ in 0..k {
        let mut next = Vec::new();
        for t in &out {
            let start = t.last().copied().unwrap_or(0);
            for a in start..n as u8 {
                let mut u = t.clone();
                u.push(a);
                next.push(u);
            }
        }
        out = next;
    }
    out
}

fn multinomial(comps: &[u8]) -> Q {
    let mut counts = BTreeMap::new();
    for c in comps {
        *counts.entry(*c).or_insert(0u32) += 1;
    }
    let mut r = factorial(comps.len() as u32);
    for (_, k) in counts {
        r /= factorial(k);
    }
    r
}

/// Jet algebra whose test-tensor generators prolong by ∂_μ t_A = dX^a_μ t_{aA}.
pub fn tower_algebra(m: &NgModel, max_rank: usize) -> JetAlgebra {
    m.alg.clone().with_tower(TowerRule { dx: m.bg.dx.clone(), max_rank })
}

/// O = Σ_k λ^k/k! t_{a1…ak} Φ^{a1}…Φ^{ak} √(−g̃)/√(−g) with symbolic
/// test-tensor generators, after validating the numeric tower.
pub fn observable(m: &NgModel, tower: &ObservableTower) -> Result<Polynomial, ObservableError> {
    tower.check(&m.bg)?;
    Ok(observable_symbolic(m, tower.rank.min(m.k().max(0) as usize)))
}

pub fn observable_symbolic(m: &NgModel, max_k: usize) -> Polynomial {
    let k = m.k();
    let v = m.volume_ratio(k);
    let mut sum = Polynomial::zero();
    for r in 0..=max_k.min(k.max(0) as usize) {
        for comps in sorted_tuples(m.n(), r) {
            let mut term = Poly::symbol(Gen::new(Kind::Tensor, tensor_index(&comps) as usize));
            for &a in &comps {
                term = term.mul(&m.field(Kind::Phi, a as usize));
            }
            let c = multinomial(&comps) / factorial(r as u32);
            sum.add_assign(&term.scale(crq(c)).shift(r as i32, 0));
        }
    }
    sum.mul_trunc(&v, Some(k))
}

/// Replaces test-tensor generators by the tower's numeric values.
pub fn instantiate(p: &Polynomial, tower: &ObservableTower) -> Polynomial {
    p.substitute(None, |g| {
        if g.kind == Kind::Tensor {
            let comps = tensor_components(g.index);
            if comps.len() <= tower.rank {
                return Polynomial::constant(crq(tower.value(&comps)));
            }
            return Polynomial::zero();
        }
        Poly::symbol(*g)
    })
}

/// γO ≡ 0 modulo total derivatives in the tower algebra.
pub fn observable_gauge_invariant(bv: &BvComplex, max_k: usize) -> bool {
    let m = &bv.model;
    let alg = tower_algebra(m, (m.k() as usize + 5).min(7));
    let o = observable_symbolic(m, max_k);
    let go = o.apply_derivation(true, Some(m.k()), |g| {
        if g.kind == Kind::Tensor {
            return Polynomial::zero();
        }
        let base = bv.gamma_generator(g.kind, g.index as usize);
        alg.total_derivative_multi(&base, &g.deriv)
    });
    alg.is_trivial_mod_d(&go)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::background::Background;
    use crate::scalar::{q, qf};
    use proptest::prelude::*;

    fn bv() -> BvComplex {
        BvComplex::flat_strip()
    }

    fn tilted_bv() -> BvComplex {
        let dx = alloc::vec![
            alloc::vec![q(2), q(1), q(0), qf(1, 2)],
            alloc::vec![q(0), q(1), q(1), q(0)]
        ];
        BvComplex::new(NgModel::new(Background::new(2, 4, dx).unwrap(), 3, 2))
    }

    #[test]
    fn table_entries() {
        let b = bv();
        let m = &b.model;
        let phi = m.field(Kind::Phi, 1);
        let mut want = Polynomial::zero();
        for mu in 0..2 {
            want.add_assign(&m.field(Kind::C, mu).mul(&m.dxt(mu, 1)));
        }
        assert_eq!(b.gamma(&phi).unwrap(), want);
        assert!(b.gamma(&m.field(Kind::B, 0)).unwrap().is_zero());
        assert_eq!(b.s(&m.field(Kind::Cbar, 1)).unwrap(), m.field(Kind::B, 1).scale(ci()));
        assert!(b.s(&Polynomial::one()).unwrap().is_zero());
        assert_eq!(b.delta(&m.field(Kind::BDagger, 0)).unwrap(), m.field(Kind::CbarDagger, 0).scale(-ci()));
        let mut dc = Polynomial::zero();
        for a in 0..4 {
            dc.add_assign(&m.dxt(0, a).mul(&m.field(Kind::PhiDagger, a)));
        }
        assert_eq!(b.delta(&m.field(Kind::CDagger, 0)).unwrap(), dc.truncate(2));
    }

    #[test]
    fn gamma_squared_on_ghost() {
        let b = bv();
        for mu in 0..2 {
            let c = b.model.field(Kind::C, mu);
            let gg = b.gamma_free(&b.gamma_free(&c));
            assert!(gg.is_zero());
        }
    }

    #[test]
    fn free_gamma_nilpotent() {
        let b = bv();
        for kind in Kind::FIELDS {
            for i in 0..b.alg().index_range(kind) {
                let g = b.model.field(kind, i);
                let gg = b.gamma_free(&b.gamma_free(&g)).lambda_part(0);
                assert!(gg.is_zero());
            }
        }
    }

    #[test]
    fn delta_phi_dagger_matches_eom() {
        let b = bv();
        let m = &b.model;
        let eom = m.eom(1);
        for a in 0..4 {
            let d0 = b.delta(&m.field(Kind::PhiDagger, a)).unwrap().lambda_part(0);
            assert_eq!(d0, eom[a].lambda_part(1).scale(-crq(m.bg.h[a])));
        }
    }

    #[test]
    fn nilpotency_all_generators() {
        for b in [bv(), tilted_bv()] {
            for e in b.nilpotency_report() {
                assert!(e.trivial_mod_d, "{:?}", e);
            }
        }
    }

    #[test]
    fn bracket_reproduces_s() {
        let b = bv();
        let l = b.model.extended_lagrangian();
        for kind in Kind::BV {
            for i in 0..b.alg().index_range(kind) {
                let g = b.model.field(kind, i);
                let br = antibracket(b.alg(), &l, &g);
                let s = b.s(&g).unwrap();
                assert!(b.alg().equals_mod_d(&br, &s), "{:?} {}", kind, i);
            }
        }
    }

    #[test]
    fn master_equation_flat_and_tilted() {
        for b in [bv(), tilted_bv()] {
            let me = b.master_equation();
            assert!(b.alg().is_trivial_mod_d(&me));
        }
    }

    #[test]
    fn antifield_vector_field_bracket() {
        // {X^aΦ‡_a, F} acts as −∂_X on functions of Φ in this convention.
        let b = bv();
        let m = &b.model;
        let mut x = Polynomial::zero();
        for a in 0..4 {
            let xa = m.field(Kind::Phi, (a + 1) % 4).scale(cr(a as i128 + 1));
            x.add_assign(&xa.mul(&m.field(Kind::PhiDagger, a)));
        }
        let f = m.field(Kind::Phi, 2).mul(&m.field(Kind::Phi, 2)).mul(&m.field(Kind::Phi, 0));
        let br = antibracket(b.alg(), &x, &f);
        let mut dx = Polynomial::zero();
        for a in 0..4 {
            let xa = m.field(Kind::Phi, (a + 1) % 4).scale(cr(a as i128 + 1));
            dx.add_assign(&xa.mul(&f.left_derivative(&Gen::new(Kind::Phi, a))));
        }
        assert_eq!(br, dx.neg());
    }

    #[test]
    fn current_gradings_and_conservation() {
        let b = bv();
        let m = &b.model;
        for j in brst_current(m) {
            for (t, _) in j.iter() {
                assert_eq!(crate::jet::grading_of(&t.mono).ghost(), 1);
                assert!(t.mono.symbols().iter().all(|g| g.kind == Kind::B || g.kind == Kind::C));
            }
        }
        let rep = check_conservation(&b).unwrap();
        assert!(rep.remainder_order0.is_zero());
        assert!(!rep.wrong_sign_remainder.is_zero());
    }

    #[test]
    fn observable_examples() {
        let b = bv();
        let m = &b.model;
        let t0 = ObservableTower::from_target_function(&m.bg, 0, |_| q(1));
        let o = instantiate(&observable(m, &t0).unwrap(), &t0);
        assert_eq!(o, m.volume_ratio(2));
        let t1 = ObservableTower::from_target_function(&m.bg, 1, |c| if c == [2] { q(1) } else { q(0) });
        let o1 = instantiate(&observable(m, &t1).unwrap(), &t1);
        assert_eq!(o1.lambda_part(1), m.field(Kind::Phi, 2));
        assert!(o1.lambda_part(0).is_zero());
        let mut bad = t1.clone();
        bad.derivatives.insert((alloc::vec![], 0), q(5));
        assert!(matches!(observable(m, &bad), Err(ObservableError::Inconsistent { .. })));
    }

    #[test]
    fn observable_invariance() {
        let b = bv();
        assert!(observable_gauge_invariant(&b, 2));
    }

    fn arb_poly() -> impl Strategy<Value = Polynomial> {
        let gen = (0usize..8, 0usize..4, 0u8..2).prop_map(|(k, i, dd)| {
            let kind = Kind::BV[k];
            let idx = if kind.target_indexed() { i } else { i % 2 };
            let mut g = Gen::new(kind, idx);
            g.deriv.0[1] = dd;
            g
        });
        prop::collection::vec((prop::collection::vec(gen, 1..3), -2i128..3), 1..3).prop_map(|ts| {
            let mut p = Polynomial::zero();
            for (w, c) in ts {
                p.add_assign(&Poly::word(w, cr(c)));
            }
            p
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn s_squared_random(p in arb_poly()) {
            let b = bv();
            let ss = b.s_free(&b.s_free(&p));
            prop_assert!(b.alg().is_trivial_mod_d(&ss));
        }

        #[test]
        fn bracket_antisymmetry(p in arb_poly(), r in arb_poly()) {
            let b = bv();
            let alg = b.alg();
            if let (Some(pp), Some(rr)) = (grading_parity(&p), grading_parity(&r)) {
                let lhs = antibracket(alg, &p, &r);
                let rhs = antibracket(alg, &r, &p);
                // (F,G) = −(−1)^{(|F|+1)(|G|+1)} (G,F)
                let sign = if (pp ^ true) && (rr ^ true) { 1 } else { -1 };
                prop_assert!(alg.equals_mod_d(&lhs, &rhs.scale_int(sign)));
            }
        }

        #[test]
        fn bracket_matches_s_random(p in arb_poly()) {
            let b = bv();
            let l = b.model.extended_lagrangian();
            let br = antibracket(b.alg(), &l, &p);
            prop_assert!(b.alg().equals_mod_d(&br, &b.s_free(&p)));
        }
    }

    fn grading_parity(p: &Polynomial) -> Option<bool> {
        p.is_odd_homogeneous()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn bracket_jacobi(p in arb_poly(), r in arb_poly(), u in arb_poly()) {
            let b = bv();
            let alg = b.alg();
            if let (Some(pp), Some(rr), Some(uu)) = (p.is_odd_homogeneous(), r.is_odd_homogeneous(), u.is_odd_homogeneous()) {
                // Graded Jacobi for the odd bracket with shifted degrees |F|+1.
                let sh = |x: bool| !x;
                let e = |a: bool, c: bool| if sh(a) && sh(c) { -1i128 } else { 1 };
                let t1 = antibracket(alg, &antibracket(alg, &p, &r), &u).scale_int(e(pp, uu));
                let t2 = antibracket(alg, &antibracket(alg, &r, &u), &p).scale_int(e(rr, pp));
                let t3 = antibracket(alg, &antibracket(alg, &u, &p), &r).scale_int(e(uu, rr));
                prop_assert!(alg.is_trivial_mod_d(&t1.add(&t2).add(&t3)));
            }
        }
    }
}
