//! ⋆, ⋆_H and time-ordered products on polynomials in smeared free fields
//! of the Dirichlet strip, with the formal S-matrix and the Bogoliubov map.
//!
//! A test function is stored through its positive-frequency mode vector
//! f̂_n = ∫ f u_n (real test functions, so the negative-frequency vector is
//! the conjugate). The two-point function on test functions reads
//! ω(f, g) = Σ d_n conj(f̂_n) ĝ_n, with the constant 2/π of the mode
//! functions absorbed into ħ; Δ = 2 Im ω and H = Re ω.
//! Smeared generators use the jet conventions: C, C̄ and B carry upper
//! worldsheet indices.

use alloc::vec::Vec;

use num_traits::{One, Signed, Zero};

use crate::background::Background;
use crate::graded::{Monomial, Poly, Symbol, Term};
use crate::jet::{Deriv, Kind, Polynomial};
use crate::scalar::{ci, cq_pow, cr, crq, factorial, qf, CQ, Q};

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Smeared {
    pub kind: Kind,
    pub index: usize,
    pub test: usize,
}

impl Symbol for Smeared {
    fn odd(&self) -> bool {
        self.kind.odd()
    }
}

pub type PhaseFunctional = Poly<Smeared>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TestFunction {
    /// Ordering label used by the time-ordered product.
    pub tau: Q,
    /// f̂_1, …, f̂_N.
    pub modes: Vec<CQ>,
}

/// A point (τ, σ) given by the unit Gaussian rationals e^{iτ} and e^{iσ},
/// together with a rational stand-in for τ used for ordering.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RationalPoint {
    pub time_phase: CQ,
    pub space_phase: CQ,
    pub tau: Q,
}

impl RationalPoint {
    pub fn new(time_phase: CQ, space_phase: CQ, tau: Q) -> Self {
        debug_assert!(time_phase.norm_sqr().is_one() && space_phase.norm_sqr().is_one());
        RationalPoint { time_phase, space_phase, tau }
    }

    /// ∂^I u_n at the point, without the √(2/π) normalization.
    pub fn mode(&self, n: usize, deriv: &Deriv) -> CQ {
        let (kt, ks) = (deriv.0[0] as u32, deriv.0[1] as u32);
        let t = cq_pow(&self.time_phase, n as u32);
        let s = cq_pow(&self.space_phase, n as u32);
        let spatial = match ks % 4 {
            0 => crq(s.im),
            1 => crq(s.re),
            2 => -crq(s.im),
            _ => -crq(s.re),
        };
        let nn = cr(n as i128);
        cq_pow(&(ci() * nn), kt) * cq_pow(&nn, ks) * spatial * t
    }
}

#[derive(Clone, Debug)]
pub struct StarContext {
    pub bg: Background,
    pub n_max: usize,
    tests: Vec<TestFunction>,
}

/// Left and right copies of the alphabet; every left symbol sorts first.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
struct Tagged(bool, Smeared);

impl Symbol for Tagged {
    fn odd(&self) -> bool {
        self.1.odd()
    }
}

fn tag(p: &PhaseFunctional, right: bool) -> Poly<Tagged> {
    let mut r = Poly::zero();
    for (t, c) in p.iter() {
        let word = t.mono.symbols().iter().map(|s| Tagged(right, *s)).collect();
        if let Some((_, m)) = Monomial::from_word(word) {
            r.add_term(Term { mono: m, lambda: t.lambda, hbar: t.hbar }, *c);
        }
    }
    r
}

fn split(m: &Monomial<Tagged>) -> (Monomial<Smeared>, Monomial<Smeared>) {
    let (l, r): (Vec<_>, Vec<_>) = m.symbols().iter().partition(|t| !t.0);
    let strip = |v: Vec<Tagged>| Monomial::from_word(v.into_iter().map(|t| t.1).collect()).expect("sorted").1;
    (strip(l), strip(r))
}

fn join(u: &Monomial<Smeared>, v: &Monomial<Smeared>) -> Monomial<Tagged> {
    let word = u.symbols().iter().map(|s| Tagged(false, *s)).chain(v.symbols().iter().map(|s| Tagged(true, *s))).collect();
    Monomial::from_word(word).expect("distinct tags").1
}

pub type Kernel<'a> = &'a dyn Fn(&Smeared, &Smeared) -> CQ;

impl StarContext {
    pub fn new(bg: Background, n_max: usize) -> Self {
        StarContext { bg, n_max, tests: Vec::new() }
    }

    pub fn flat_strip(n_max: usize) -> Self {
        Self::new(Background::default_strip(), n_max)
    }

    pub fn tests(&self) -> &[TestFunction] {
        &self.tests
    }

    /// Registers a test function, reusing an identical one.
    pub fn add_test(&mut self, f: TestFunction) -> usize {
        assert_eq!(f.modes.len(), self.n_max, "test function needs one entry per mode");
        if let Some(i) = self.tests.iter().position(|g| *g == f) {
            return i;
        }
        self.tests.push(f);
        self.tests.len() - 1
    }

    /// Smeared ∂^I φ at a point.
    pub fn point_test(&mut self, p: &RationalPoint, deriv: &Deriv) -> usize {
        let modes = (1..=self.n_max).map(|n| p.mode(n, deriv)).collect();
        self.add_test(TestFunction { tau: p.tau, modes })
    }

    pub fn field(&self, kind: Kind, index: usize, test: usize) -> PhaseFunctional {
        Poly::symbol(Smeared { kind, index, test })
    }

    pub fn omega(&self, f: usize, g: usize) -> CQ {
        let (f, g) = (&self.tests[f], &self.tests[g]);
        let mut acc = CQ::zero();
        for (n, (a, b)) in f.modes.iter().zip(&g.modes).enumerate() {
            acc += a.conj() * b * crq(qf(1, 2 * (n as i128 + 1)));
        }
        acc
    }

    pub fn causal(&self, f: usize, g: usize) -> Q {
        self.omega(f, g).im * Q::from_integer(2)
    }

    pub fn hadamard(&self, f: usize, g: usize) -> Q {
        self.omega(f, g).re
    }

    /// K with {A(f), B(g)} = K Δ(f, g), upper indices; zero for antifields.
    pub fn peierls_coefficient(&self, a: &Smeared, b: &Smeared) -> CQ {
        let bg = &self.bg;
        let k = |x: usize| if x >= 2 { CQ::one() } else { CQ::zero() };
        match (a.kind, b.kind) {
            (Kind::C, Kind::Cbar) => -ci() * crq(bg.g_inv[a.index][b.index]),
            (Kind::Cbar, Kind::C) => ci() * crq(bg.g_inv[a.index][b.index]),
            (Kind::B, Kind::Phi) => crq((0..bg.d).map(|nu| bg.g_inv[a.index][nu] * bg.dx[nu][b.index]).sum()),
            (Kind::Phi, Kind::B) => crq((0..bg.d).map(|nu| bg.g_inv[b.index][nu] * bg.dx[nu][a.index]).sum()),
            (Kind::Phi, Kind::Phi) if a.index == b.index => k(a.index),
            _ => CQ::zero(),
        }
    }

    pub fn star_kernel(&self, a: &Smeared, b: &Smeared) -> CQ {
        let k = self.peierls_coefficient(a, b);
        if k.is_zero() {
            return k;
        }
        ci() * crq(qf(1, 2)) * k * crq(self.causal(a.test, b.test))
    }

    pub fn omega_kernel(&self, a: &Smeared, b: &Smeared) -> CQ {
        let k = self.peierls_coefficient(a, b);
        if k.is_zero() {
            return k;
        }
        k * self.omega(a.test, b.test)
    }

    pub fn hadamard_kernel(&self, a: &Smeared, b: &Smeared) -> CQ {
        let k = self.peierls_coefficient(a, b);
        if k.is_zero() {
            return k;
        }
        k * crq(self.hadamard(a.test, b.test))
    }

    /// (i/2) sgn(τ_f − τ_g) K Δ(f, g).
    pub fn time_kernel(&self, a: &Smeared, b: &Smeared) -> CQ {
        let sgn = (self.tests[a.test].tau - self.tests[b.test].tau).signum();
        if sgn.is_zero() {
            return CQ::zero();
        }
        self.star_kernel(a, b) * crq(sgn)
    }

    /// μ ∘ exp(P)(F ⊗ G) with P = Σ κ(A, B) ħ^h ∂^r_A ⊗ ∂^l_B; `max_order`
    /// bounds the number of contractions.
    pub fn bidifferential(
        &self,
        f: &PhaseFunctional,
        g: &PhaseFunctional,
        kernel: Kernel<'_>,
        hbar: i32,
        max_order: Option<usize>,
        max_lambda: Option<i32>,
    ) -> PhaseFunctional {
        let mut layer = tag(f, false).mul_trunc(&tag(g, true), max_lambda);
        let mut total = layer.clone();
        let mut k = 0usize;
        while !layer.is_zero() && max_order.is_none_or(|m| k < m) {
            k += 1;
            let mut next = Poly::zero();
            for (t, c) in layer.iter() {
                let (u, v) = split(&t.mono);
                let lefts: Vec<Smeared> = dedup(u.symbols());
                let rights: Vec<Smeared> = dedup(v.symbols());
                for a in &lefts {
                    for b in &rights {
                        let kab = kernel(a, b);
                        if kab.is_zero() {
                            continue;
                        }
                        let (Some((ka, u2)), Some((kb, v2))) = (u.right_derivative(a), v.left_derivative(b)) else {
                            continue;
                        };
                        let coeff = *c * kab * cr(ka * kb) / crq(Q::from_integer(k as i128));
                        next.add_term(Term { mono: join(&u2, &v2), lambda: t.lambda, hbar: t.hbar + hbar }, coeff);
                    }
                }
            }
            total.add_assign(&next);
            layer = next;
        }
        let mut out = Poly::zero();
        for (t, c) in total.iter() {
            let (u, v) = split(&t.mono);
            if let Some((neg, m)) = u.mul(&v) {
                out.add_term(Term { mono: m, lambda: t.lambda, hbar: t.hbar }, if neg { -*c } else { *c });
            }
        }
        out
    }

    pub fn star(&self, f: &PhaseFunctional, g: &PhaseFunctional) -> PhaseFunctional {
        self.bidifferential(f, g, &|a, b| self.star_kernel(a, b), 1, None, None)
    }

    pub fn star_trunc(&self, f: &PhaseFunctional, g: &PhaseFunctional, max_lambda: i32) -> PhaseFunctional {
        self.bidifferential(f, g, &|a, b| self.star_kernel(a, b), 1, None, Some(max_lambda))
    }

    /// Normal-ordered product, kernel ħ K ω.
    pub fn star_h(&self, f: &PhaseFunctional, g: &PhaseFunctional) -> PhaseFunctional {
        self.bidifferential(f, g, &|a, b| self.omega_kernel(a, b), 1, None, None)
    }

    pub fn time_ordered(&self, f: &PhaseFunctional, g: &PhaseFunctional) -> PhaseFunctional {
        self.bidifferential(f, g, &|a, b| self.time_kernel(a, b), 1, None, None)
    }

    pub fn time_ordered_trunc(&self, f: &PhaseFunctional, g: &PhaseFunctional, max_lambda: i32) -> PhaseFunctional {
        self.bidifferential(f, g, &|a, b| self.time_kernel(a, b), 1, None, Some(max_lambda))
    }

    /// Classical bracket Σ ∂^r_A F · K(A, B) Δ(f_A, f_B) · ∂^l_B G.
    pub fn peierls_bracket(&self, f: &PhaseFunctional, g: &PhaseFunctional) -> PhaseFunctional {
        let kernel = |a: &Smeared, b: &Smeared| {
            let k = self.peierls_coefficient(a, b);
            if k.is_zero() {
                k
            } else {
                k * crq(self.causal(a.test, b.test))
            }
        };
        let once = self.bidifferential(f, g, &kernel, 0, Some(1), None);
        once.sub(&f.mul(g))
    }

    /// F ⋆ G − (−1)^{|F||G|} G ⋆ F for homogeneous F, G.
    pub fn star_commutator(&self, f: &PhaseFunctional, g: &PhaseFunctional) -> PhaseFunctional {
        let odd = f.is_odd_homogeneous().unwrap_or(false) && g.is_odd_homogeneous().unwrap_or(false);
        let gf = self.star(g, f);
        if odd {
            self.star(f, g).add(&gf)
        } else {
            self.star(f, g).sub(&gf)
        }
    }

    /// Γ_H: contraction of every ordered pair of factors with ħ K H.
    fn gamma_h(&self, p: &PhaseFunctional) -> PhaseFunctional {
        let mut r = Poly::zero();
        for (t, c) in p.iter() {
            let s = t.mono.symbols();
            for i in 0..s.len() {
                for j in i + 1..s.len() {
                    let k = self.hadamard_kernel(&s[i], &s[j]);
                    if k.is_zero() {
                        continue;
                    }
                    let between = s[i + 1..j].iter().filter(|x| x.odd()).count();
                    let neg = s[j].odd() && between % 2 == 1;
                    let rest: Vec<Smeared> =
                        s.iter().enumerate().filter(|(q, _)| *q != i && *q != j).map(|(_, x)| *x).collect();
                    let m = Monomial::from_word(rest).expect("subword of a monomial").1;
                    r.add_term(Term { mono: m, lambda: t.lambda, hbar: t.hbar + 1 }, if neg { -*c * k } else { *c * k });
                }
            }
        }
        r
    }

    /// α_H^{±1} = exp(±Γ_H).
    pub fn alpha_h(&self, p: &PhaseFunctional, inverse: bool) -> PhaseFunctional {
        let sign = if inverse { -CQ::one() } else { CQ::one() };
        let mut total = p.clone();
        let mut layer = p.clone();
        let mut k = 0i128;
        while !layer.is_zero() {
            k += 1;
            layer = self.gamma_h(&layer).scale(sign / cr(k));
            total.add_assign(&layer);
        }
        total
    }

    /// α_H(α_H⁻¹F ⋆ α_H⁻¹G).
    pub fn star_h_via_alpha(&self, f: &PhaseFunctional, g: &PhaseFunctional) -> PhaseFunctional {
        self.alpha_h(&self.star(&self.alpha_h(f, true), &self.alpha_h(g, true)), false)
    }

    /// Σ_{j ≤ k} (1/j!) V ·_T ⋯ ·_T V.
    pub fn formal_smatrix(&self, v: &PhaseFunctional, order: usize) -> PhaseFunctional {
        self.exp_t(v, order, None)
    }

    fn exp_t(&self, v: &PhaseFunctional, order: usize, max_lambda: Option<i32>) -> PhaseFunctional {
        let mut total = PhaseFunctional::one();
        let mut power = PhaseFunctional::one();
        for j in 1..=order {
            power = match max_lambda {
                Some(m) => self.time_ordered_trunc(&power, v, m),
                None => self.time_ordered(&power, v),
            };
            total.add_assign(&power.scale(crq(Q::one() / factorial(j as u32))));
        }
        total
    }

    /// R_V(F) = S(λV)^{⋆−1} ⋆ (S(λV) ·_T F), S(W) = e_T^{iW/ħ}, through λ^k.
    pub fn bogoliubov(&self, f: &PhaseFunctional, v: &PhaseFunctional, order: usize) -> Result<PhaseFunctional, BogoliubovError> {
        let k = order as i32;
        let w = v.shift(1, -1).scale(ci());
        let s = self.exp_t(&w, order, Some(k));
        let x = s.sub(&PhaseFunctional::one());
        let mut inv = PhaseFunctional::one();
        let mut power = PhaseFunctional::one();
        let minus_x = x.neg();
        for _ in 1..=order {
            power = self.star_trunc(&power, &minus_x, k);
            inv.add_assign(&power);
        }
        let r = self.star_trunc(&inv, &self.time_ordered_trunc(&s, f, k), k);
        for j in 0..=k {
            if let Some(h) = r.lambda_part(j).min_hbar() {
                if h < 0 {
                    return Err(BogoliubovError::NegativeHbar { order: j, power: h });
                }
            }
        }
        Ok(r)
    }

    /// Complex conjugation of real smeared fields: conjugates coefficients
    /// and reverses each word.
    pub fn conj(&self, p: &PhaseFunctional) -> PhaseFunctional {
        let mut r = Poly::zero();
        for (t, c) in p.iter() {
            let mut w = t.mono.symbols().to_vec();
            w.reverse();
            if let Some((neg, m)) = Monomial::from_word(w) {
                let cc = c.conj();
                r.add_term(Term { mono: m, lambda: t.lambda, hbar: t.hbar }, if neg { -cc } else { cc });
            }
        }
        r
    }

    /// Replaces each jet generator by its smearing over a window of
    /// weighted points; derivatives act on the mode functions.
    pub fn import_vertex(&mut self, density: &Polynomial, window: &[(RationalPoint, CQ)]) -> PhaseFunctional {
        let mut out = PhaseFunctional::zero();
        for (p, weight) in window {
            let mut local = PhaseFunctional::zero();
            for (t, c) in density.iter() {
                let mut word = Vec::new();
                for g in t.mono.symbols() {
                    let test = self.point_test(p, &g.deriv);
                    word.push(Smeared { kind: g.kind, index: g.index as usize, test });
                }
                if let Some((neg, m)) = Monomial::from_word(word) {
                    local.add_term(Term { mono: m, lambda: t.lambda, hbar: t.hbar }, if neg { -*c } else { *c });
                }
            }
            out.add_scaled(&local, *weight);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BogoliubovError {
    NegativeHbar { order: i32, power: i32 },
}

impl core::fmt::Display for BogoliubovError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            BogoliubovError::NegativeHbar { order, power } => {
                write!(f, "coupling order {} keeps a term with ħ^{}", order, power)
            }
        }
    }
}

fn dedup(s: &[Smeared]) -> Vec<Smeared> {
    let mut v = s.to_vec();
    v.dedup();
    v
}

pub fn ghost_number(m: &Monomial<Smeared>) -> i32 {
    m.symbols().iter().map(|s| s.kind.ghost()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{cq, q};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const N: usize = 3;

    fn random_test(rng: &mut ChaCha8Rng, tau: i128) -> TestFunction {
        let modes = (0..N).map(|_| cq(q(rng.gen_range(-2..=2)), q(rng.gen_range(-2..=2)))).collect();
        TestFunction { tau: q(tau), modes }
    }

    fn context(seed: u64) -> StarContext {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ctx = StarContext::flat_strip(N);
        for tau in 0..3 {
            let t = random_test(&mut rng, tau);
            ctx.add_test(t);
        }
        ctx
    }

    fn generators() -> Vec<(Kind, usize)> {
        alloc::vec![
            (Kind::Phi, 0),
            (Kind::Phi, 2),
            (Kind::Phi, 3),
            (Kind::B, 0),
            (Kind::B, 1),
            (Kind::C, 0),
            (Kind::C, 1),
            (Kind::Cbar, 0),
            (Kind::Cbar, 1),
        ]
    }

    /// Random polynomial of degree ≤ 3 in smeared generators, homogeneous
    /// in parity when `parity` is given.
    fn random_functional(rng: &mut ChaCha8Rng, parity: Option<bool>) -> PhaseFunctional {
        let gens = generators();
        let mut p = PhaseFunctional::zero();
        for _ in 0..rng.gen_range(1..4) {
            let deg = rng.gen_range(0..=3);
            let word: Vec<Smeared> = (0..deg)
                .map(|_| {
                    let (kind, index) = gens[rng.gen_range(0..gens.len())];
                    Smeared { kind, index, test: rng.gen_range(0..3) }
                })
                .collect();
            let c = cq(q(rng.gen_range(-2..=2)), q(rng.gen_range(-1..=1)));
            let mono = Poly::word(word, c);
            if let Some(par) = parity {
                if mono.is_odd_homogeneous().is_some_and(|o| o != par) {
                    continue;
                }
            }
            p.add_assign(&mono);
        }
        p
    }

    fn phi(ctx: &StarContext, a: usize, f: usize) -> PhaseFunctional {
        ctx.field(Kind::Phi, a, f)
    }

    #[test]
    fn unit_and_linear_commutator() {
        let ctx = context(1);
        let f = phi(&ctx, 2, 0);
        let g = phi(&ctx, 2, 1);
        assert_eq!(ctx.star(&f, &PhaseFunctional::one()), f);
        assert_eq!(ctx.star(&PhaseFunctional::one(), &f), f);
        let comm = ctx.star(&f, &g).sub(&ctx.star(&g, &f));
        let want = PhaseFunctional::monomial(Monomial::one(), 0, 1, ci() * crq(ctx.causal(0, 1)));
        assert_eq!(comm, want);
        // longitudinal Φ⁰ has k⁰⁰ = 0 and commutes with itself
        assert_eq!(ctx.star_commutator(&phi(&ctx, 0, 0), &phi(&ctx, 0, 1)), PhaseFunctional::zero());
    }

    #[test]
    fn associativity_on_random_functionals() {
        let ctx = context(2);
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        for _ in 0..100 {
            let f = random_functional(&mut rng, None);
            let g = random_functional(&mut rng, None);
            let h = random_functional(&mut rng, None);
            let l = ctx.star(&ctx.star(&f, &g), &h);
            let r = ctx.star(&f, &ctx.star(&g, &h));
            assert_eq!(l, r, "{:?} {:?} {:?}", f, g, h);
        }
    }

    #[test]
    fn classical_limit() {
        let ctx = context(3);
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        for _ in 0..100 {
            let par = rng.gen_bool(0.5);
            let f = random_functional(&mut rng, Some(par));
            let par = rng.gen_bool(0.5);
            let g = random_functional(&mut rng, Some(par));
            let pb = ctx.peierls_bracket(&f, &g);
            let first = ctx.star(&f, &g).sub(&f.mul(&g)).filter(|t| t.hbar == 1).shift(0, -1);
            assert_eq!(first, pb.scale(ci() * crq(qf(1, 2))));
            if f.is_zero() || g.is_zero() {
                continue;
            }
            let comm = ctx.star_commutator(&f, &g).filter(|t| t.hbar == 1).shift(0, -1);
            assert_eq!(comm, pb.scale(ci()));
        }
    }

    #[test]
    fn alpha_h_intertwines_the_products() {
        let ctx = context(4);
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        for _ in 0..40 {
            let f = random_functional(&mut rng, None);
            let g = random_functional(&mut rng, None);
            assert_eq!(ctx.star_h_via_alpha(&f, &g), ctx.star_h(&f, &g));
            assert_eq!(ctx.alpha_h(&ctx.alpha_h(&f, true), false), f);
        }
    }

    #[test]
    fn star_h_single_contraction() {
        let ctx = context(5);
        let (f, g) = (phi(&ctx, 3, 0), phi(&ctx, 3, 2));
        let d = ctx.star_h(&f, &g).sub(&f.mul(&g));
        assert_eq!(d, PhaseFunctional::monomial(Monomial::one(), 0, 1, ctx.omega(0, 2)));
    }

    #[test]
    fn wick_expansion_of_squares() {
        let mut ctx = StarContext::flat_strip(N);
        // e^{iσ} = (3 + 4i)/5 and (5 + 12i)/13; e^{iτ} = 1 and (4 + 3i)/5
        let x = RationalPoint::new(CQ::one(), cq(qf(3, 5), qf(4, 5)), q(0));
        let y = RationalPoint::new(cq(qf(4, 5), qf(3, 5)), cq(qf(5, 13), qf(12, 13)), q(1));
        let fx = ctx.point_test(&x, &Deriv::default());
        let fy = ctx.point_test(&y, &Deriv::default());
        let px = phi(&ctx, 2, fx);
        let py = phi(&ctx, 2, fy);
        let w = ctx.omega(fx, fy);
        let got = ctx.star_h(&px.mul(&px), &py.mul(&py));
        let mut want = px.mul(&px).mul(&py).mul(&py);
        want.add_assign(&px.mul(&py).scale(cr(4) * w).shift(0, 1));
        want.add_assign(&PhaseFunctional::monomial(Monomial::one(), 0, 2, cr(2) * w * w));
        assert_eq!(got, want);
        assert_eq!(ctx.star_h_via_alpha(&px.mul(&px), &py.mul(&py)), want);
    }

    #[test]
    fn point_modes_match_the_mode_functions() {
        let x = RationalPoint::new(cq(qf(4, 5), qf(3, 5)), cq(qf(3, 5), qf(4, 5)), q(0));
        let (tau, sigma) = (libm::atan2(0.6, 0.8), libm::atan2(0.8, 0.6));
        let norm = libm::sqrt(2.0 / core::f64::consts::PI);
        for n in 1..5 {
            let u = crate::propagator::mode_function(n, tau, sigma).unwrap() / norm;
            let m = crate::scalar::cq_to_c64(&x.mode(n, &Deriv::default()));
            assert!((u - m).norm() < 1e-12);
            let dt = crate::scalar::cq_to_c64(&x.mode(n, &Deriv::of(&[0])));
            assert!((u * num_complex::Complex::new(0.0, n as f64) - dt).norm() < 1e-12);
            let h = 1e-6;
            let up = crate::propagator::mode_function(n, tau, sigma + h).unwrap() / norm;
            let dn = crate::propagator::mode_function(n, tau, sigma - h).unwrap() / norm;
            let ds = crate::scalar::cq_to_c64(&x.mode(n, &Deriv::of(&[1])));
            assert!(((up - dn) / (2.0 * h) - ds).norm() < 1e-6);
        }
    }

    #[test]
    fn time_ordered_product() {
        let ctx = context(6);
        let mut rng = ChaCha8Rng::seed_from_u64(60);
        let late = |rng: &mut ChaCha8Rng, test: usize| {
            let gens = generators();
            let mut p = PhaseFunctional::zero();
            for _ in 0..3 {
                let word: Vec<Smeared> = (0..rng.gen_range(1..3))
                    .map(|_| {
                        let (kind, index) = gens[rng.gen_range(0..gens.len())];
                        Smeared { kind, index, test }
                    })
                    .collect();
                p.add_assign(&Poly::word(word, cr(rng.gen_range(1..3))));
            }
            p
        };
        for _ in 0..30 {
            let f = random_functional(&mut rng, Some(false));
            let par = rng.gen_bool(0.5);
            let g = random_functional(&mut rng, Some(par));
            assert_eq!(ctx.time_ordered(&f, &g), ctx.time_ordered(&g, &f));
            assert_eq!(ctx.time_ordered(&f, &PhaseFunctional::one()), f);
            // test 2 carries the latest label, test 0 the earliest
            let a = late(&mut rng, 2);
            let b = late(&mut rng, 0);
            assert_eq!(ctx.time_ordered(&a, &b), ctx.star(&a, &b));
        }
        let (c, cb) = (ctx.field(Kind::C, 0, 0), ctx.field(Kind::Cbar, 1, 1));
        assert_eq!(ctx.time_ordered(&c, &cb), ctx.time_ordered(&cb, &c).neg());
    }

    #[test]
    fn smatrix_orders() {
        let ctx = context(7);
        let v = phi(&ctx, 2, 0).mul(&phi(&ctx, 2, 1));
        assert_eq!(ctx.formal_smatrix(&v, 0), PhaseFunctional::one());
        assert_eq!(ctx.formal_smatrix(&v, 1), PhaseFunctional::one().add(&v));
        let t = ctx.time_kernel(&Smeared { kind: Kind::Phi, index: 2, test: 0 }, &Smeared { kind: Kind::Phi, index: 2, test: 1 });
        let tt = PhaseFunctional::monomial(Monomial::one(), 0, 1, t);
        let vv = v.mul(&v).add(&v.mul(&tt).scale(cr(2))).add(&tt.mul(&tt));
        let want = PhaseFunctional::one().add(&v).add(&vv.scale(crq(qf(1, 2))));
        assert_eq!(ctx.formal_smatrix(&v, 2), want);
    }

    #[test]
    fn bogoliubov_cancels_negative_hbar() {
        let ctx = context(8);
        let mut rng = ChaCha8Rng::seed_from_u64(80);
        for _ in 0..10 {
            let v = random_functional(&mut rng, Some(false)).filter(|t| ghost_number(&t.mono) == 0);
            let f = random_functional(&mut rng, None);
            let r = ctx.bogoliubov(&f, &v, 2).unwrap();
            assert_eq!(r.lambda_part(0), f);
            for (t, _) in r.iter() {
                assert!(t.hbar >= 0);
                let fg: alloc::collections::BTreeSet<i32> = f.iter().map(|(t, _)| ghost_number(&t.mono)).collect();
                assert!(fg.contains(&ghost_number(&t.mono)));
            }
            // first order: (i/ħ)(V ·_T F − V ⋆ F)
            let first = ctx.time_ordered(&v, &f).sub(&ctx.star(&v, &f)).scale(ci()).shift(0, -1);
            assert_eq!(r.lambda_part(1), first);
        }
        let f = phi(&ctx, 2, 0);
        assert_eq!(ctx.bogoliubov(&f, &PhaseFunctional::zero(), 2).unwrap(), f);
    }

    #[test]
    fn vertex_import_smears_jets() {
        let mut ctx = StarContext::flat_strip(N);
        let model = crate::lagrangian::NgModel::flat_strip();
        let l1 = model.gauge_fixed_lagrangian().lambda_part(1);
        let x = RationalPoint::new(CQ::one(), cq(qf(3, 5), qf(4, 5)), q(0));
        let y = RationalPoint::new(cq(qf(4, 5), qf(3, 5)), cq(qf(5, 13), qf(12, 13)), q(1));
        let v = ctx.import_vertex(&l1, &[(x, crq(qf(1, 2))), (y, crq(qf(1, 2)))]);
        assert!(!v.is_zero());
        assert!(v.iter().all(|(t, _)| t.lambda == 0 && ghost_number(&t.mono) == 0));
        let f = ctx.field(Kind::Phi, 2, 0);
        let free_part = PhaseFunctional::zero();
        assert_eq!(ctx.bogoliubov(&f, &free_part, 1).unwrap(), f);
        let r = ctx.bogoliubov(&f, &v, 1).unwrap();
        assert!(r.min_hbar().unwrap() >= 0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn conjugation_reverses_products(seed in 0u64..1000) {
            let ctx = context(9);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = random_functional(&mut rng, None);
            let g = random_functional(&mut rng, None);
            prop_assert_eq!(ctx.conj(&ctx.star(&f, &g)), ctx.star(&ctx.conj(&g), &ctx.conj(&f)));
        }

        #[test]
        fn omega_antisymmetric_part_is_half_delta(seed in 0u64..1000) {
            let ctx = context(seed);
            for f in 0..3 {
                for g in 0..3 {
                    let w = ctx.omega(f, g);
                    let wt = ctx.omega(g, f);
                    prop_assert_eq!(w - wt, ci() * crq(ctx.causal(f, g)));
                    prop_assert_eq!(ctx.hadamard(f, g), ctx.hadamard(g, f));
                }
            }
        }

        #[test]
        fn star_h_commutator_agrees(seed in 0u64..1000) {
            let ctx = context(10);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = random_functional(&mut rng, Some(false));
            let par = rng.gen_bool(0.5);
            let g = random_functional(&mut rng, Some(par));
            let lhs = ctx.star_h(&f, &g).sub(&ctx.star_h(&g, &f));
            let rhs = ctx.alpha_h(&ctx.star(&ctx.alpha_h(&f, true), &ctx.alpha_h(&g, true)).sub(&ctx.star(&ctx.alpha_h(&g, true), &ctx.alpha_h(&f, true))), false);
            prop_assert_eq!(lhs, rhs);
        }
    }
}
