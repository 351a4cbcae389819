//! Graded-commutative polynomials over an ordered alphabet.
//!
//! A [`Monomial`] is a sorted word of symbols; odd symbols anticommute and
//! square to zero. A [`Poly`] maps (monomial, λ-power, ħ-power) to a nonzero
//! Gaussian-rational coefficient. Powers are signed because λ⁻² and ħ⁻¹ occur
//! in intermediate expressions.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt::Debug;

use num_traits::{One, Zero};

use crate::scalar::{cr, CQ};

pub trait Symbol: Ord + Clone + Debug {
    fn odd(&self) -> bool;
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Monomial<S>(Vec<S>);

impl<S> Default for Monomial<S> {
    fn default() -> Self {
        Monomial(Vec::new())
    }
}

impl<S: Symbol> Monomial<S> {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn single(s: S) -> Self {
        Monomial(alloc::vec![s])
    }

    pub fn symbols(&self) -> &[S] {
        &self.0
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn odd(&self) -> bool {
        self.0.iter().filter(|s| s.odd()).count() % 2 == 1
    }

    /// Sorts a word into canonical order. Returns `None` when an odd symbol
    /// repeats, otherwise the Koszul sign (`true` = negative) and the result.
    pub fn from_word(mut v: Vec<S>) -> Option<(bool, Self)> {
        let mut neg = false;
        for i in 1..v.len() {
            let mut j = i;
            while j > 0 && v[j - 1] > v[j] {
                if v[j - 1].odd() && v[j].odd() {
                    neg = !neg;
                }
                v.swap(j - 1, j);
                j -= 1;
            }
        }
        for w in v.windows(2) {
            if w[0] == w[1] && w[0].odd() {
                return None;
            }
        }
        Some((neg, Monomial(v)))
    }

    /// Product `self · other` in canonical form with its Koszul sign.
    pub fn mul(&self, other: &Self) -> Option<(bool, Self)> {
        let a = &self.0;
        let b = &other.0;
        let mut odd_left: usize = a.iter().filter(|s| s.odd()).count();
        let mut out = Vec::with_capacity(a.len() + b.len());
        let mut neg = false;
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            let take_b = if i == a.len() {
                true
            } else if j == b.len() {
                false
            } else if a[i] == b[j] {
                if a[i].odd() {
                    return None;
                }
                false
            } else {
                b[j] < a[i]
            };
            if take_b {
                if b[j].odd() && odd_left % 2 == 1 {
                    neg = !neg;
                }
                out.push(b[j].clone());
                j += 1;
            } else {
                if a[i].odd() {
                    odd_left -= 1;
                }
                out.push(a[i].clone());
                i += 1;
            }
        }
        Some((neg, Monomial(out)))
    }

    pub fn count(&self, s: &S) -> usize {
        self.0.iter().filter(|x| *x == s).count()
    }

    fn remove_at(&self, p: usize) -> Self {
        let mut v = self.0.clone();
        v.remove(p);
        Monomial(v)
    }

    /// Graded left derivative: coefficient multiplicity, sign and the
    /// remaining monomial.
    pub fn left_derivative(&self, s: &S) -> Option<(i128, Self)> {
        let p = self.0.iter().position(|x| x == s)?;
        if s.odd() {
            let before = self.0[..p].iter().filter(|x| x.odd()).count();
            let sign = if before % 2 == 1 { -1 } else { 1 };
            Some((sign, self.remove_at(p)))
        } else {
            Some((self.count(s) as i128, self.remove_at(p)))
        }
    }

    pub fn right_derivative(&self, s: &S) -> Option<(i128, Self)> {
        let p = self.0.iter().position(|x| x == s)?;
        if s.odd() {
            let after = self.0[p + 1..].iter().filter(|x| x.odd()).count();
            let sign = if after % 2 == 1 { -1 } else { 1 };
            Some((sign, self.remove_at(p)))
        } else {
            Some((self.count(s) as i128, self.remove_at(p)))
        }
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Term<S> {
    pub mono: Monomial<S>,
    pub lambda: i32,
    pub hbar: i32,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Poly<S: Symbol> {
    terms: BTreeMap<Term<S>, CQ>,
}

impl<S: Symbol> Default for Poly<S> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<S: Symbol> Poly<S> {
    pub fn zero() -> Self {
        Poly { terms: BTreeMap::new() }
    }

    pub fn one() -> Self {
        Self::constant(CQ::one())
    }

    pub fn constant(c: CQ) -> Self {
        Self::monomial(Monomial::one(), 0, 0, c)
    }

    pub fn symbol(s: S) -> Self {
        Self::monomial(Monomial::single(s), 0, 0, CQ::one())
    }

    pub fn monomial(mono: Monomial<S>, lambda: i32, hbar: i32, c: CQ) -> Self {
        let mut p = Self::zero();
        p.add_term(Term { mono, lambda, hbar }, c);
        p
    }

    /// Product of a word of symbols, sorted with its Koszul sign.
    pub fn word(v: Vec<S>, c: CQ) -> Self {
        match Monomial::from_word(v) {
            None => Self::zero(),
            Some((neg, m)) => Self::monomial(m, 0, 0, if neg { -c } else { c }),
        }
    }

    pub fn add_term(&mut self, t: Term<S>, c: CQ) {
        if c.is_zero() {
            return;
        }
        use alloc::collections::btree_map::Entry;
        match self.terms.entry(t) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                let v = *e.get() + c;
                if v.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = v;
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Term<S>, &CQ)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, mono: &Monomial<S>, lambda: i32, hbar: i32) -> CQ {
        let t = Term { mono: mono.clone(), lambda, hbar };
        self.terms.get(&t).copied().unwrap_or_else(CQ::zero)
    }

    pub fn add_assign(&mut self, o: &Self) {
        for (t, c) in &o.terms {
            self.add_term(t.clone(), *c);
        }
    }

    pub fn add_scaled(&mut self, o: &Self, k: CQ) {
        if k.is_zero() {
            return;
        }
        for (t, c) in &o.terms {
            self.add_term(t.clone(), *c * k);
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut r = self.clone();
        r.add_assign(o);
        r
    }

    pub fn sub(&self, o: &Self) -> Self {
        let mut r = self.clone();
        r.add_scaled(o, -CQ::one());
        r
    }

    pub fn neg(&self) -> Self {
        self.scale(-CQ::one())
    }

    pub fn scale(&self, k: CQ) -> Self {
        let mut r = Self::zero();
        r.add_scaled(self, k);
        r
    }

    pub fn scale_int(&self, k: i128) -> Self {
        self.scale(cr(k))
    }

    /// Multiplies by λ^dl ħ^dh.
    pub fn shift(&self, dl: i32, dh: i32) -> Self {
        Poly {
            terms: self
                .terms
                .iter()
                .map(|(t, c)| {
                    (Term { mono: t.mono.clone(), lambda: t.lambda + dl, hbar: t.hbar + dh }, *c)
                })
                .collect(),
        }
    }

    pub fn mul(&self, o: &Self) -> Self {
        self.mul_trunc(o, None)
    }

    /// Product discarding every term with λ-power above `max_lambda`.
    pub fn mul_trunc(&self, o: &Self, max_lambda: Option<i32>) -> Self {
        let mut r = Self::zero();
        for (ta, ca) in &self.terms {
            for (tb, cb) in &o.terms {
                let l = ta.lambda + tb.lambda;
                if let Some(m) = max_lambda {
                    if l > m {
                        continue;
                    }
                }
                if let Some((neg, m)) = ta.mono.mul(&tb.mono) {
                    let c = *ca * *cb;
                    r.add_term(Term { mono: m, lambda: l, hbar: ta.hbar + tb.hbar }, if neg { -c } else { c });
                }
            }
        }
        r
    }

    pub fn truncate(&self, max_lambda: i32) -> Self {
        self.filter(|t| t.lambda <= max_lambda)
    }

    pub fn filter(&self, f: impl Fn(&Term<S>) -> bool) -> Self {
        Poly { terms: self.terms.iter().filter(|(t, _)| f(t)).map(|(t, c)| (t.clone(), *c)).collect() }
    }

    /// The coefficient of λ^k as a λ-free polynomial.
    pub fn lambda_part(&self, k: i32) -> Self {
        self.filter(|t| t.lambda == k).shift(-k, 0)
    }

    pub fn min_lambda(&self) -> Option<i32> {
        self.terms.keys().map(|t| t.lambda).min()
    }

    pub fn max_lambda(&self) -> Option<i32> {
        self.terms.keys().map(|t| t.lambda).max()
    }

    pub fn min_hbar(&self) -> Option<i32> {
        self.terms.keys().map(|t| t.hbar).min()
    }

    pub fn max_degree(&self) -> usize {
        self.terms.keys().map(|t| t.mono.degree()).max().unwrap_or(0)
    }

    pub fn symbols(&self) -> alloc::collections::BTreeSet<S> {
        self.terms.keys().flat_map(|t| t.mono.symbols().iter().cloned()).collect()
    }

    pub fn left_derivative(&self, s: &S) -> Self {
        let mut r = Self::zero();
        for (t, c) in &self.terms {
            if let Some((k, m)) = t.mono.left_derivative(s) {
                r.add_term(Term { mono: m, lambda: t.lambda, hbar: t.hbar }, *c * cr(k));
            }
        }
        r
    }

    pub fn right_derivative(&self, s: &S) -> Self {
        let mut r = Self::zero();
        for (t, c) in &self.terms {
            if let Some((k, m)) = t.mono.right_derivative(s) {
                r.add_term(Term { mono: m, lambda: t.lambda, hbar: t.hbar }, *c * cr(k));
            }
        }
        r
    }

    /// Applies the left derivation determined by its values on symbols.
    /// `odd` is the parity of the derivation; images are cached per symbol.
    pub fn apply_derivation<F>(&self, odd: bool, max_lambda: Option<i32>, mut image: F) -> Self
    where
        F: FnMut(&S) -> Self,
    {
        let mut cache: BTreeMap<S, Self> = BTreeMap::new();
        let mut r = Self::zero();
        for (t, c) in &self.terms {
            let syms = t.mono.symbols();
            let mut odd_before = 0usize;
            for i in 0..syms.len() {
                let img = cache.entry(syms[i].clone()).or_insert_with(|| image(&syms[i]));
                if !img.is_zero() {
                    let neg = odd && odd_before % 2 == 1;
                    let pre = Monomial(syms[..i].to_vec());
                    let post = Monomial(syms[i + 1..].to_vec());
                    let k = if neg { -*c } else { *c };
                    let left = Poly::monomial(pre, t.lambda, t.hbar, k);
                    let right = Poly::monomial(post, 0, 0, CQ::one());
                    let lim = max_lambda;
                    let part = left.mul_trunc(img, lim).mul_trunc(&right, lim);
                    r.add_assign(&part);
                }
                if syms[i].odd() {
                    odd_before += 1;
                }
            }
        }
        r
    }

    /// Ring homomorphism sending each symbol to a polynomial.
    pub fn substitute<F>(&self, max_lambda: Option<i32>, mut image: F) -> Self
    where
        F: FnMut(&S) -> Self,
    {
        let mut cache: BTreeMap<S, Self> = BTreeMap::new();
        let mut r = Self::zero();
        for (t, c) in &self.terms {
            let mut acc = Poly::monomial(Monomial::one(), t.lambda, t.hbar, *c);
            for s in t.mono.symbols() {
                let img = cache.entry(s.clone()).or_insert_with(|| image(s));
                acc = acc.mul_trunc(img, max_lambda);
                if acc.is_zero() {
                    break;
                }
            }
            r.add_assign(&acc);
        }
        r
    }

    pub fn map_coefficients(&self, f: impl Fn(&CQ) -> CQ) -> Self {
        let mut r = Self::zero();
        for (t, c) in &self.terms {
            r.add_term(t.clone(), f(c));
        }
        r
    }

    pub fn is_odd_homogeneous(&self) -> Option<bool> {
        let mut it = self.terms.keys().map(|t| t.mono.odd());
        let first = it.next()?;
        if it.all(|p| p == first) {
            Some(first)
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ci;
    use proptest::prelude::*;

    #[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
    struct Sym(u8);
    impl Symbol for Sym {
        fn odd(&self) -> bool {
            self.0 % 2 == 1
        }
    }

    fn permutation_sign(word: &[u8]) -> Option<(bool, Vec<u8>)> {
        // Brute-force oracle: count inversions among odd letters.
        let mut inv = 0;
        for i in 0..word.len() {
            for j in i + 1..word.len() {
                if word[i] % 2 == 1 && word[j] % 2 == 1 && word[i] > word[j] {
                    inv += 1;
                }
            }
        }
        let mut s = word.to_vec();
        s.sort();
        if s.windows(2).any(|w| w[0] == w[1] && w[0] % 2 == 1) {
            return None;
        }
        Some((inv % 2 == 1, s))
    }

    fn mono(v: &[u8]) -> Option<(bool, Monomial<Sym>)> {
        Monomial::from_word(v.iter().map(|&x| Sym(x)).collect())
    }

    #[test]
    fn odd_square_vanishes() {
        assert!(mono(&[1, 1]).is_none());
        assert!(mono(&[2, 2]).is_some());
    }

    #[test]
    fn derivation_vs_product_rule() {
        let x = Poly::symbol(Sym(1));
        let y = Poly::symbol(Sym(3));
        let xy = x.mul(&y);
        assert_eq!(xy.left_derivative(&Sym(3)), x.neg());
        assert_eq!(xy.right_derivative(&Sym(1)), y.neg());
        let two = Poly::symbol(Sym(2)).mul(&Poly::symbol(Sym(2)));
        assert_eq!(two.left_derivative(&Sym(2)), Poly::symbol(Sym(2)).scale_int(2));
    }

    #[test]
    fn odd_derivation_sign() {
        // D(a b) with D odd, a odd: D(a) b - a D(b).
        let a = Poly::symbol(Sym(1));
        let b = Poly::symbol(Sym(3));
        let ab = a.mul(&b);
        let img = |s: &Sym| if s.0 == 1 || s.0 == 3 { Poly::symbol(Sym(s.0 + 1)) } else { Poly::zero() };
        let got = ab.apply_derivation(true, None, img);
        let want = Poly::symbol(Sym(2)).mul(&b).sub(&a.mul(&Poly::symbol(Sym(4))));
        assert_eq!(got, want);
    }

    fn arb_word() -> impl Strategy<Value = Vec<u8>> {
        prop::collection::vec(0u8..10, 0..6)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn sort_sign_matches_oracle(w in arb_word()) {
            let got = mono(&w).map(|(n, m)| (n, m.symbols().iter().map(|s| s.0).collect::<Vec<_>>()));
            prop_assert_eq!(got, permutation_sign(&w));
        }

        #[test]
        fn graded_commutativity(a in arb_word(), b in arb_word()) {
            if let (Some((_, ma)), Some((_, mb))) = (mono(&a), mono(&b)) {
                let ab = ma.mul(&mb);
                let ba = mb.mul(&ma);
                match (ab, ba) {
                    (None, None) => {}
                    (Some((n1, m1)), Some((n2, m2))) => {
                        prop_assert_eq!(&m1, &m2);
                        let flip = ma.odd() && mb.odd();
                        prop_assert_eq!(n1 ^ n2, flip);
                    }
                    _ => prop_assert!(false, "zero on one side only"),
                }
            }
        }
    }

    proptest! {
        #[test]
        fn associativity_and_leibniz(a in arb_word(), b in arb_word(), c in arb_word(), s in 0u8..10) {
            let pa = Poly::word(a.iter().map(|&x| Sym(x)).collect(), ci());
            let pb = Poly::word(b.iter().map(|&x| Sym(x)).collect(), cr(2));
            let pc = Poly::word(c.iter().map(|&x| Sym(x)).collect(), cr(-3));
            prop_assert_eq!(pa.mul(&pb).mul(&pc), pa.mul(&pb.mul(&pc)));
            let sym = Sym(s);
            let lhs = pa.mul(&pb).left_derivative(&sym);
            let sign = if sym.odd() && pa.is_odd_homogeneous().unwrap_or(false) { -1 } else { 1 };
            let rhs = pa.left_derivative(&sym).mul(&pb).add(&pa.mul(&pb.left_derivative(&sym)).scale_int(sign));
            prop_assert_eq!(lhs, rhs);
        }
    }
}
