//! Truncated Fock space of the flat Dirichlet string with its indefinite
//! inner product, the represented free fields and the free BRST charge.
//!
//! Ladder operators carry lower worldsheet indices and upper target
//! indices: [a^a, a^{b+}] = h^{ab}, [b_μ, b⁺_ν] = g_μν, {c_μs, c⁺_νt} = g_μν δ_st.
//! Exact sectors use Gaussian rationals; x-dependent operators evaluate to
//! complex floats.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_traits::{One, Zero};

use crate::background::Background;
use crate::linalg::{inertia, Echelon, Inertia, SparseVec};
pub use crate::propagator::mode_function;
use crate::propagator::{mode_weight, Point, PropagatorError};
use crate::scalar::{ci, cq_to_c64, cr, crq, C64, CQ, Q};

#[derive(Clone, Debug, PartialEq)]
pub enum FockError {
    NotFlatStrip,
    /// Mode number outside 1..=N_max or index outside its range.
    OutOfRange,
    /// Occupation beyond the cutoff M.
    ExceedsTruncation { particles: usize, cutoff: usize },
    UnknownKind,
    Point(PropagatorError),
}

impl fmt::Display for FockError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FockError::NotFlatStrip => write!(f, "the Fock construction needs the flat strip with d = 2"),
            FockError::OutOfRange => write!(f, "ladder label out of range"),
            FockError::ExceedsTruncation { particles, cutoff } => {
                write!(f, "state has {} particles, cutoff is {}", particles, cutoff)
            }
            FockError::UnknownKind => write!(f, "unknown field kind"),
            FockError::Point(e) => write!(f, "{}", e),
        }
    }
}

impl From<PropagatorError> for FockError {
    fn from(e: PropagatorError) -> Self {
        FockError::Point(e)
    }
}

/// Coefficient rings for operators and states.
pub trait Coeff:
    Copy + PartialEq + Zero + One + Neg<Output = Self> + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + AddAssign
{
    fn from_cq(z: &CQ) -> Self;
    fn conj(&self) -> Self;
}

impl Coeff for CQ {
    fn from_cq(z: &CQ) -> Self {
        *z
    }
    fn conj(&self) -> Self {
        CQ::new(self.re, -self.im)
    }
}

impl Coeff for C64 {
    fn from_cq(z: &CQ) -> Self {
        cq_to_c64(z)
    }
    fn conj(&self) -> Self {
        C64::new(self.re, -self.im)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Ladder {
    /// Target index a, creates e^a_n.
    A { a: usize, n: usize },
    /// Worldsheet index μ, creates f_μn.
    B { mu: usize, n: usize },
    /// Worldsheet index μ and label s ∈ {1, 2}, creates g_μsn.
    C { mu: usize, s: usize, n: usize },
}

impl Ladder {
    pub fn is_fermion(&self) -> bool {
        matches!(self, Ladder::C { .. })
    }

    pub fn mode(&self) -> usize {
        match *self {
            Ladder::A { n, .. } | Ladder::B { n, .. } | Ladder::C { n, .. } => n,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Factor {
    pub ladder: Ladder,
    pub dagger: bool,
}

impl Factor {
    pub fn create(ladder: Ladder) -> Self {
        Factor { ladder, dagger: true }
    }
    pub fn annihilate(ladder: Ladder) -> Self {
        Factor { ladder, dagger: false }
    }
    fn key(&self) -> (bool, Ladder) {
        (!self.dagger, self.ladder)
    }
}

/// Sum of coefficient × normal-ordered word (creators left, each group sorted).
#[derive(Clone, Debug, PartialEq)]
pub struct NormalOrderedOp<T> {
    pub terms: BTreeMap<Vec<Factor>, T>,
}

impl<T: Coeff> Default for NormalOrderedOp<T> {
    fn default() -> Self {
        NormalOrderedOp { terms: BTreeMap::new() }
    }
}

fn accumulate<K: Ord, T: Coeff>(map: &mut BTreeMap<K, T>, key: K, c: T) {
    if c.is_zero() {
        return;
    }
    let e = map.entry(key).or_insert_with(T::zero);
    *e += c;
}

fn prune<K: Ord, T: Coeff>(map: &mut BTreeMap<K, T>) {
    map.retain(|_, v| !v.is_zero());
}

fn word_parity(w: &[Factor]) -> bool {
    w.iter().filter(|f| f.ladder.is_fermion()).count() % 2 == 1
}

impl<T: Coeff> NormalOrderedOp<T> {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn identity(c: T) -> Self {
        let mut o = Self::default();
        accumulate(&mut o.terms, Vec::new(), c);
        o
    }

    pub fn single(f: Factor, c: T) -> Self {
        let mut o = Self::default();
        accumulate(&mut o.terms, vec![f], c);
        o
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// The coefficient of the identity.
    pub fn scalar_part(&self) -> T {
        self.terms.get(&Vec::new()).copied().unwrap_or_else(T::zero)
    }

    pub fn is_scalar(&self) -> bool {
        self.terms.keys().all(|k| k.is_empty())
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (k, v) in &other.terms {
            accumulate(&mut self.terms, k.clone(), *v);
        }
        prune(&mut self.terms);
    }

    pub fn scale(&self, c: T) -> Self {
        let mut o = Self::default();
        for (k, v) in &self.terms {
            accumulate(&mut o.terms, k.clone(), *v * c);
        }
        o
    }

    pub fn map<U: Coeff>(&self, f: impl Fn(&T) -> U) -> NormalOrderedOp<U> {
        let mut o = NormalOrderedOp::<U>::default();
        for (k, v) in &self.terms {
            accumulate(&mut o.terms, k.clone(), f(v));
        }
        o
    }
}

/// Canonical (anti)commutation data of the ladder algebra.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LadderAlgebra {
    h: Vec<Q>,
    g: Vec<Vec<Q>>,
}

impl LadderAlgebra {
    pub fn new(bg: &Background) -> Self {
        LadderAlgebra { h: bg.h.clone(), g: bg.g.clone() }
    }

    /// [x, y⁺} for annihilator label x and creator label y.
    pub fn contraction(&self, x: &Ladder, y: &Ladder) -> Q {
        match (*x, *y) {
            (Ladder::A { a, n }, Ladder::A { a: b, n: m }) if n == m && a == b => self.h[a],
            (Ladder::B { mu, n }, Ladder::B { mu: nu, n: m }) if n == m => self.g[mu][nu],
            (Ladder::C { mu, s, n }, Ladder::C { mu: nu, s: t, n: m }) if n == m && s == t => self.g[mu][nu],
            _ => Q::zero(),
        }
    }

    fn normal_order_into<T: Coeff>(&self, word: Vec<Factor>, c: T, out: &mut BTreeMap<Vec<Factor>, T>) {
        if c.is_zero() {
            return;
        }
        for i in 0..word.len().saturating_sub(1) {
            let (l, r) = (word[i], word[i + 1]);
            let (kl, kr) = (l.key(), r.key());
            if kl == kr && l.ladder.is_fermion() {
                return;
            }
            if kl > kr {
                let both_odd = l.ladder.is_fermion() && r.ladder.is_fermion();
                let mut swapped = word.clone();
                swapped.swap(i, i + 1);
                self.normal_order_into(swapped, if both_odd { -c } else { c }, out);
                if !l.dagger && r.dagger {
                    let k = self.contraction(&l.ladder, &r.ladder);
                    if !k.is_zero() {
                        let mut rest = word;
                        rest.drain(i..i + 2);
                        self.normal_order_into(rest, c * T::from_cq(&crq(k)), out);
                    }
                }
                return;
            }
        }
        accumulate(out, word, c);
    }

    pub fn normal_order<T: Coeff>(&self, word: Vec<Factor>, c: T) -> NormalOrderedOp<T> {
        let mut o = NormalOrderedOp::default();
        self.normal_order_into(word, c, &mut o.terms);
        prune(&mut o.terms);
        o
    }

    pub fn mul<T: Coeff>(&self, x: &NormalOrderedOp<T>, y: &NormalOrderedOp<T>) -> NormalOrderedOp<T> {
        let mut o = NormalOrderedOp::default();
        for (wx, cx) in &x.terms {
            for (wy, cy) in &y.terms {
                let mut w = wx.clone();
                w.extend_from_slice(wy);
                self.normal_order_into(w, *cx * *cy, &mut o.terms);
            }
        }
        prune(&mut o.terms);
        o
    }

    /// Graded commutator xy − (−1)^{|x||y|} yx, monomial by monomial.
    pub fn commutator<T: Coeff>(&self, x: &NormalOrderedOp<T>, y: &NormalOrderedOp<T>) -> NormalOrderedOp<T> {
        let mut o = NormalOrderedOp::default();
        for (wx, cx) in &x.terms {
            for (wy, cy) in &y.terms {
                let c = *cx * *cy;
                let mut w = wx.clone();
                w.extend_from_slice(wy);
                self.normal_order_into(w, c, &mut o.terms);
                let mut w = wy.clone();
                w.extend_from_slice(wx);
                let odd = word_parity(wx) && word_parity(wy);
                self.normal_order_into(w, if odd { c } else { -c }, &mut o.terms);
            }
        }
        prune(&mut o.terms);
        o
    }

    fn annihilate<T: Coeff>(&self, l: &Ladder, state: &[Ladder], c: T, out: &mut BTreeMap<Vec<Ladder>, T>) {
        let mut odd_before = 0usize;
        for (i, y) in state.iter().enumerate() {
            let k = self.contraction(l, y);
            if !k.is_zero() {
                let sign = if l.is_fermion() && odd_before % 2 == 1 { -T::one() } else { T::one() };
                let mut rest = state.to_vec();
                rest.remove(i);
                accumulate(out, rest, c * sign * T::from_cq(&crq(k)));
            }
            if y.is_fermion() {
                odd_before += 1;
            }
        }
    }

    fn create<T: Coeff>(&self, l: &Ladder, state: &[Ladder], c: T, out: &mut BTreeMap<Vec<Ladder>, T>) {
        if l.is_fermion() && state.contains(l) {
            return;
        }
        let p = state.partition_point(|y| y <= l);
        let odd = state[..p].iter().filter(|y| y.is_fermion()).count();
        let sign = if l.is_fermion() && odd % 2 == 1 { -T::one() } else { T::one() };
        let mut s = state.to_vec();
        s.insert(p, *l);
        accumulate(out, s, c * sign);
    }

    /// Applies a normal-ordered operator to a state, factors right to left.
    pub fn apply<T: Coeff>(&self, op: &NormalOrderedOp<T>, psi: &FockState<T>) -> FockState<T> {
        let mut out = BTreeMap::new();
        for (w, cw) in &op.terms {
            let mut cur: BTreeMap<Vec<Ladder>, T> = psi.terms.iter().map(|(k, v)| (k.clone(), *v * *cw)).collect();
            for f in w.iter().rev() {
                let mut next = BTreeMap::new();
                for (s, c) in &cur {
                    if f.dagger {
                        self.create(&f.ladder, s, *c, &mut next);
                    } else {
                        self.annihilate(&f.ladder, s, *c, &mut next);
                    }
                }
                prune(&mut next);
                cur = next;
            }
            for (k, v) in cur {
                accumulate(&mut out, k, v);
            }
        }
        prune(&mut out);
        FockState { terms: out }
    }
}

/// Linear combination of creator monomials acting on Ω.
#[derive(Clone, Debug, PartialEq)]
pub struct FockState<T> {
    pub terms: BTreeMap<Vec<Ladder>, T>,
}

impl<T: Coeff> FockState<T> {
    pub fn vacuum() -> Self {
        Self::basis(Vec::new())
    }

    /// Creator word in any order; it is sorted with its fermionic sign.
    pub fn from_creators(labels: &[Ladder], alg: &LadderAlgebra) -> Self {
        let mut psi = Self::vacuum();
        for l in labels.iter().rev() {
            psi = alg.apply(&NormalOrderedOp::single(Factor::create(*l), T::one()), &psi);
        }
        psi
    }

    pub fn basis(labels: Vec<Ladder>) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(labels, T::one());
        FockState { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn particles(&self) -> usize {
        self.terms.keys().map(|k| k.len()).max().unwrap_or(0)
    }

    pub fn add_scaled(&mut self, other: &Self, c: T) {
        for (k, v) in &other.terms {
            accumulate(&mut self.terms, k.clone(), *v * c);
        }
        prune(&mut self.terms);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum FieldKind {
    Phi(usize),
    C(usize),
    Cbar(usize),
    B(usize),
}

impl FieldKind {
    pub fn from_name(name: &str, index: usize) -> Result<Self, FockError> {
        match name {
            "Phi" => Ok(FieldKind::Phi(index)),
            "C" => Ok(FieldKind::C(index)),
            "Cbar" => Ok(FieldKind::Cbar(index)),
            "B" => Ok(FieldKind::B(index)),
            _ => Err(FockError::UnknownKind),
        }
    }

    pub fn is_fermion(&self) -> bool {
        matches!(self, FieldKind::C(_) | FieldKind::Cbar(_))
    }
}

/// π(φ)(x) = Σ_n √d_n (u_n(x) P_n + conj(u_n(x)) M_n), stored per mode.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldRep {
    pub kind: FieldKind,
    pub modes: Vec<(usize, NormalOrderedOp<CQ>, NormalOrderedOp<CQ>)>,
}

/// Which mode function multiplies a term: u_n or its conjugate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Frequency {
    Positive,
    Negative,
}

#[derive(Clone, Debug)]
pub struct FockSpace {
    pub bg: Background,
    pub n_max: usize,
    pub cutoff: usize,
    pub alg: LadderAlgebra,
    labels: Vec<Ladder>,
}

/// Ladder operators of one mode group together with Q₀.
fn cluster(l: &Ladder) -> (usize, usize) {
    match *l {
        Ladder::A { a, n } => (n, a),
        Ladder::B { mu, n } | Ladder::C { mu, n, .. } => (n, mu),
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NilpotencyReport {
    pub states: usize,
    pub nonzero: usize,
}

impl NilpotencyReport {
    pub fn passed(&self) -> bool {
        self.nonzero == 0 && self.states > 0
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PositivityReport {
    pub blocks: usize,
    pub kernel_dim: usize,
    pub range_dim: usize,
    pub kernel_inertia: Inertia,
    /// Blocks where ran Q₀ is not orthogonal to ker Q₀.
    pub range_pairing_failures: usize,
    /// Blocks where a range vector has nonzero norm.
    pub range_norm_failures: usize,
}

impl PositivityReport {
    pub fn passed(&self) -> bool {
        self.kernel_inertia.negative == 0
            && self.kernel_inertia.zero == self.range_dim
            && self.range_pairing_failures == 0
            && self.range_norm_failures == 0
    }

    /// dim of the truncated BRST cohomology.
    pub fn cohomology_dim(&self) -> usize {
        self.kernel_dim - self.range_dim
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Classification {
    pub closed: bool,
    pub exact: bool,
    pub norm: CQ,
}

impl FockSpace {
    pub fn new(n_target: usize, n_max: usize, cutoff: usize) -> Result<Self, FockError> {
        let bg = Background::flat_strip(2, n_target).map_err(|_| FockError::NotFlatStrip)?;
        Self::with_background(bg, n_max, cutoff)
    }

    pub fn with_background(bg: Background, n_max: usize, cutoff: usize) -> Result<Self, FockError> {
        if bg.d != 2 || !bg.is_aligned() {
            return Err(FockError::NotFlatStrip);
        }
        if n_max == 0 {
            return Err(FockError::OutOfRange);
        }
        let mut labels = Vec::new();
        for n in 1..=n_max {
            labels.extend((0..bg.n).map(|a| Ladder::A { a, n }));
            labels.extend((0..2).map(|mu| Ladder::B { mu, n }));
            for mu in 0..2 {
                labels.extend((1..=2).map(|s| Ladder::C { mu, s, n }));
            }
        }
        labels.sort();
        let alg = LadderAlgebra::new(&bg);
        Ok(FockSpace { bg, n_max, cutoff, alg, labels })
    }

    pub fn labels(&self) -> &[Ladder] {
        &self.labels
    }

    fn valid(&self, l: &Ladder) -> bool {
        let n = l.mode();
        (1..=self.n_max).contains(&n)
            && match *l {
                Ladder::A { a, .. } => a < self.bg.n,
                Ladder::B { mu, .. } => mu < 2,
                Ladder::C { mu, s, .. } => mu < 2 && (1..=2).contains(&s),
            }
    }

    /// Every sorted creator monomial with at most `cutoff` factors.
    pub fn basis(&self) -> Vec<Vec<Ladder>> {
        fn rec(labels: &[Ladder], start: usize, left: usize, cur: &mut Vec<Ladder>, out: &mut Vec<Vec<Ladder>>) {
            out.push(cur.clone());
            if left == 0 {
                return;
            }
            for i in start..labels.len() {
                let l = labels[i];
                cur.push(l);
                rec(labels, if l.is_fermion() { i + 1 } else { i }, left - 1, cur, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        rec(&self.labels, 0, self.cutoff, &mut Vec::new(), &mut out);
        out
    }

    /// One-particle pairing (x, y), antilinear in x.
    pub fn pairing(&self, x: &Ladder, y: &Ladder) -> CQ {
        if x.mode() != y.mode() {
            return CQ::zero();
        }
        match (*x, *y) {
            (Ladder::A { a, .. }, Ladder::A { a: b, .. }) => {
                if a == b && a >= 2 {
                    CQ::one()
                } else {
                    CQ::zero()
                }
            }
            (Ladder::A { a, .. }, Ladder::B { mu, .. }) | (Ladder::B { mu, .. }, Ladder::A { a, .. }) => {
                crq(self.bg.dx[mu][a])
            }
            (Ladder::C { mu, s, .. }, Ladder::C { mu: nu, s: t, .. }) => {
                let eps = match (s, t) {
                    (1, 2) => 1,
                    (2, 1) => -1,
                    _ => 0,
                };
                ci() * crq(self.bg.g[mu][nu]) * cr(eps)
            }
            _ => CQ::zero(),
        }
    }

    /// Bosonic permanent times fermionic determinant of pairings.
    pub fn monomial_product(&self, x: &[Ladder], y: &[Ladder]) -> CQ {
        let split = |w: &[Ladder]| -> (Vec<Ladder>, Vec<Ladder>) { w.iter().partition(|l| !l.is_fermion()) };
        let (xb, xf) = split(x);
        let (yb, yf) = split(y);
        if xb.len() != yb.len() || xf.len() != yf.len() {
            return CQ::zero();
        }
        let mut acc = CQ::one();
        for (xs, ys, signed) in [(&xb, &yb, false), (&xf, &yf, true)] {
            let m: Vec<Vec<CQ>> = xs.iter().map(|a| ys.iter().map(|b| self.pairing(a, b)).collect()).collect();
            let v = permanent_or_det(&m, signed);
            if v.is_zero() {
                return CQ::zero();
            }
            acc *= v;
        }
        acc
    }

    pub fn inner<T: Coeff>(&self, psi: &FockState<T>, chi: &FockState<T>) -> T {
        let mut acc = T::zero();
        for (x, cx) in &psi.terms {
            for (y, cy) in &chi.terms {
                let p = self.monomial_product(x, y);
                if !p.is_zero() {
                    acc += cx.conj() * *cy * T::from_cq(&p);
                }
            }
        }
        acc
    }

    /// π(Q₀) = −g^{μν} Σ_n (b⁺_{νn} c_{μ1n} − i dX^a_ν h_ab a^b_n c⁺_{μ2n}).
    pub fn brst_charge(&self) -> NormalOrderedOp<CQ> {
        let mut q0 = NormalOrderedOp::zero();
        for n in 1..=self.n_max {
            for mu in 0..2 {
                for nu in 0..2 {
                    let gi = self.bg.g_inv[mu][nu];
                    if gi.is_zero() {
                        continue;
                    }
                    let pre = -crq(gi);
                    let w = vec![Factor::create(Ladder::B { mu: nu, n }), Factor::annihilate(Ladder::C { mu, s: 1, n })];
                    q0.add_assign(&self.alg.normal_order(w, pre));
                    for b in 0..self.bg.n {
                        let k = self.bg.dx_lower(nu, b);
                        if k.is_zero() {
                            continue;
                        }
                        let w = vec![Factor::annihilate(Ladder::A { a: b, n }), Factor::create(Ladder::C { mu, s: 2, n })];
                        q0.add_assign(&self.alg.normal_order(w, -pre * ci() * crq(k)));
                    }
                }
            }
        }
        q0
    }

    pub fn check_state(&self, psi: &FockState<impl Coeff>) -> Result<(), FockError> {
        for k in psi.terms.keys() {
            if k.len() > self.cutoff {
                return Err(FockError::ExceedsTruncation { particles: k.len(), cutoff: self.cutoff });
            }
            if !k.iter().all(|l| self.valid(l)) {
                return Err(FockError::OutOfRange);
            }
        }
        Ok(())
    }

    /// π(Q₀)² applied to every basis state.
    pub fn nilpotency(&self) -> NilpotencyReport {
        let q0 = self.brst_charge();
        let basis = self.basis();
        let nonzero = basis
            .iter()
            .filter(|b| {
                let once = self.alg.apply(&q0, &FockState::<CQ>::basis((*b).clone()));
                !self.alg.apply(&q0, &once).is_zero()
            })
            .count();
        NilpotencyReport { states: basis.len(), nonzero }
    }

    fn block_key(&self, w: &[Ladder]) -> Vec<(usize, usize)> {
        let mut k: Vec<(usize, usize)> = w.iter().map(cluster).collect();
        k.sort();
        k
    }

    fn blocks(&self) -> BTreeMap<Vec<(usize, usize)>, Vec<Vec<Ladder>>> {
        let mut out: BTreeMap<_, Vec<_>> = BTreeMap::new();
        for b in self.basis() {
            out.entry(self.block_key(&b)).or_default().push(b);
        }
        out
    }

    fn sparse(state: &FockState<CQ>, index: &BTreeMap<Vec<Ladder>, usize>) -> SparseVec {
        state.terms.iter().map(|(k, v)| (index[k], *v)).collect()
    }

    fn dense(v: &SparseVec, basis: &[Vec<Ladder>]) -> FockState<CQ> {
        FockState { terms: v.iter().map(|(i, c)| (basis[*i].clone(), *c)).collect() }
    }

    /// Exhaustive ker/ran analysis of π(Q₀), block by block.
    pub fn positivity(&self) -> PositivityReport {
        let q0 = self.brst_charge();
        let mut rep = PositivityReport::default();
        for basis in self.blocks().into_values() {
            rep.blocks += 1;
            let index: BTreeMap<Vec<Ladder>, usize> = basis.iter().cloned().enumerate().map(|(i, b)| (b, i)).collect();
            let cols: Vec<SparseVec> = basis
                .iter()
                .map(|b| Self::sparse(&self.alg.apply(&q0, &FockState::basis(b.clone())), &index))
                .collect();
            let mut ech = Echelon::new();
            let mut range = Vec::new();
            let mut ker = Vec::new();
            for (j, c) in cols.iter().enumerate() {
                match ech.insert(j, c.clone()) {
                    Some(k) => ker.push(Self::dense(&k, &basis)),
                    None => range.push(Self::dense(c, &basis)),
                }
            }
            rep.kernel_dim += ker.len();
            rep.range_dim += range.len();
            let gram: Vec<Vec<CQ>> = ker.iter().map(|x| ker.iter().map(|y| self.inner(x, y)).collect()).collect();
            let i = inertia(&gram);
            rep.kernel_inertia.positive += i.positive;
            rep.kernel_inertia.negative += i.negative;
            rep.kernel_inertia.zero += i.zero;
            if range.iter().any(|r| ker.iter().any(|k| !self.inner(r, k).is_zero())) {
                rep.range_pairing_failures += 1;
            }
            if range.iter().any(|r| !self.inner(r, r).is_zero()) {
                rep.range_norm_failures += 1;
            }
        }
        rep
    }

    pub fn classify_state(&self, psi: &FockState<CQ>) -> Result<Classification, FockError> {
        self.check_state(psi)?;
        let q0 = self.brst_charge();
        let closed = self.alg.apply(&q0, psi).is_zero();
        let blocks = self.blocks();
        let mut exact = true;
        let mut parts: BTreeMap<Vec<(usize, usize)>, FockState<CQ>> = BTreeMap::new();
        for (k, v) in &psi.terms {
            parts.entry(self.block_key(k)).or_insert_with(|| FockState { terms: BTreeMap::new() }).terms.insert(k.clone(), *v);
        }
        for (key, part) in &parts {
            let basis = &blocks[key];
            let index: BTreeMap<Vec<Ladder>, usize> = basis.iter().cloned().enumerate().map(|(i, b)| (b, i)).collect();
            let mut ech = Echelon::new();
            for (j, b) in basis.iter().enumerate() {
                ech.insert(j, Self::sparse(&self.alg.apply(&q0, &FockState::basis(b.clone())), &index));
            }
            if !ech.contains(&Self::sparse(part, &index)) {
                exact = false;
            }
        }
        Ok(Classification { closed, exact, norm: self.inner(psi, psi) })
    }

    /// The printed mode sums, per mode.
    pub fn represent_field(&self, kind: FieldKind) -> Result<FieldRep, FockError> {
        let bg = &self.bg;
        let idx_ok = match kind {
            FieldKind::Phi(a) => a < bg.n,
            FieldKind::C(mu) | FieldKind::Cbar(mu) | FieldKind::B(mu) => mu < 2,
        };
        if !idx_ok {
            return Err(FockError::OutOfRange);
        }
        let one = |f: Factor, c: CQ| NormalOrderedOp::single(f, c);
        let mut modes = Vec::new();
        for n in 1..=self.n_max {
            let (p, m) = match kind {
                FieldKind::Phi(a) => {
                    let p = one(Factor::create(Ladder::A { a, n }), CQ::one());
                    let m = if a >= 2 {
                        one(Factor::annihilate(Ladder::A { a, n }), CQ::one())
                    } else {
                        let mut m = NormalOrderedOp::zero();
                        for mu in 0..2 {
                            for nu in 0..2 {
                                let c = bg.dx[mu][a] * bg.g_inv[mu][nu];
                                m.add_assign(&one(Factor::annihilate(Ladder::B { mu: nu, n }), crq(c)));
                            }
                        }
                        m
                    };
                    (p, m)
                }
                FieldKind::C(mu) => (
                    one(Factor::create(Ladder::C { mu, s: 2, n }), CQ::one()),
                    one(Factor::annihilate(Ladder::C { mu, s: 1, n }), -ci()),
                ),
                FieldKind::Cbar(mu) => (
                    one(Factor::create(Ladder::C { mu, s: 1, n }), CQ::one()),
                    one(Factor::annihilate(Ladder::C { mu, s: 2, n }), ci()),
                ),
                FieldKind::B(mu) => {
                    let mut m = NormalOrderedOp::zero();
                    for b in 0..bg.n {
                        m.add_assign(&one(Factor::annihilate(Ladder::A { a: b, n }), crq(bg.dx_lower(mu, b))));
                    }
                    (one(Factor::create(Ladder::B { mu, n }), CQ::one()), m)
                }
            };
            modes.push((n, p, m));
        }
        Ok(FieldRep { kind, modes })
    }

    /// π(φ)(x) with floating coefficients.
    pub fn field_at(&self, rep: &FieldRep, x: Point) -> Result<NormalOrderedOp<C64>, FockError> {
        let mut o = NormalOrderedOp::zero();
        for (n, p, m) in &rep.modes {
            let u = mode_function(*n, x.0, x.1)? * libm::sqrt(mode_weight(*n));
            o.add_assign(&p.map(|c| cq_to_c64(c) * u));
            o.add_assign(&m.map(|c| cq_to_c64(c) * u.conj()));
        }
        Ok(o)
    }

    /// [π(φ)(x), π(ψ)(y)} split by (mode at x, frequency at x, mode at y,
    /// frequency at y), each entry without the √(d_n d_m) u u factors.
    pub fn mode_commutator(&self, x: &FieldRep, y: &FieldRep) -> BTreeMap<(usize, Frequency, usize, Frequency), NormalOrderedOp<CQ>> {
        let mut out = BTreeMap::new();
        for (n, px, mx) in &x.modes {
            for (m, py, my) in &y.modes {
                for (fx, ox) in [(Frequency::Positive, px), (Frequency::Negative, mx)] {
                    for (fy, oy) in [(Frequency::Positive, py), (Frequency::Negative, my)] {
                        let c = self.alg.commutator(ox, oy);
                        if !c.is_zero() {
                            out.insert((*n, fx, *m, fy), c);
                        }
                    }
                }
            }
        }
        out
    }

    /// Coefficient of d_n ū_n(x) u_n(y) in the vacuum expectation ⟨Ω, π(φ)(x) π(ψ)(y) Ω⟩.
    pub fn two_point_modes(&self, x: &FieldRep, y: &FieldRep) -> BTreeMap<(usize, Frequency, usize, Frequency), CQ> {
        let mut out = BTreeMap::new();
        for (n, px, mx) in &x.modes {
            for (m, py, my) in &y.modes {
                for (fx, ox) in [(Frequency::Positive, px), (Frequency::Negative, mx)] {
                    for (fy, oy) in [(Frequency::Positive, py), (Frequency::Negative, my)] {
                        let v = self.alg.mul(ox, oy).scalar_part();
                        if !v.is_zero() {
                            out.insert((*n, fx, *m, fy), v);
                        }
                    }
                }
            }
        }
        out
    }

    pub fn two_point(&self, a: FieldKind, x: Point, b: FieldKind, y: Point) -> Result<C64, FockError> {
        let ra = self.represent_field(a)?;
        let rb = self.represent_field(b)?;
        let mut acc = C64::new(0.0, 0.0);
        for ((n, fx, m, fy), v) in self.two_point_modes(&ra, &rb) {
            let ux = mode_function(n, x.0, x.1)? * libm::sqrt(mode_weight(n));
            let uy = mode_function(m, y.0, y.1)? * libm::sqrt(mode_weight(m));
            let ux = if fx == Frequency::Positive { ux } else { ux.conj() };
            let uy = if fy == Frequency::Positive { uy } else { uy.conj() };
            acc += cq_to_c64(&v) * ux * uy;
        }
        Ok(acc)
    }
}

fn permanent_or_det(m: &[Vec<CQ>], signed: bool) -> CQ {
    let n = m.len();
    let mut acc = CQ::zero();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut used = vec![false; n];
    fn rec(m: &[Vec<CQ>], row: usize, perm: &mut Vec<usize>, used: &mut Vec<bool>, prod: CQ, signed: bool, acc: &mut CQ) {
        let n = m.len();
        if prod.is_zero() {
            return;
        }
        if row == n {
            let mut s = CQ::one();
            if signed {
                let inv = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).filter(|&(i, j)| perm[i] > perm[j]).count();
                if inv % 2 == 1 {
                    s = -s;
                }
            }
            *acc += s * prod;
            return;
        }
        for c in 0..n {
            if !used[c] {
                used[c] = true;
                perm[row] = c;
                rec(m, row + 1, perm, used, prod * m[row][c], signed, acc);
                used[c] = false;
            }
        }
    }
    rec(m, 0, &mut perm, &mut used, CQ::one(), signed, &mut acc);
    acc
}

/// Upper-case K with [π(φ)(x), π(ψ)(y)} = i K Δ_modes(x, y), lower indices.
pub fn peierls_coefficient(bg: &Background, a: FieldKind, b: FieldKind) -> CQ {
    let k = |x: usize| if x >= 2 { CQ::one() } else { CQ::zero() };
    match (a, b) {
        (FieldKind::C(mu), FieldKind::Cbar(nu)) => -ci() * crq(bg.g[mu][nu]),
        (FieldKind::Cbar(nu), FieldKind::C(mu)) => ci() * crq(bg.g[mu][nu]),
        (FieldKind::B(mu), FieldKind::Phi(a)) | (FieldKind::Phi(a), FieldKind::B(mu)) => crq(bg.dx[mu][a]),
        (FieldKind::Phi(a), FieldKind::Phi(b)) => {
            if a == b {
                k(a)
            } else {
                CQ::zero()
            }
        }
        _ => CQ::zero(),
    }
}

/// Whether the per-mode commutator is K on (ū(x), u(y)), −K on
/// (u(x), ū(y)) for equal modes and zero elsewhere, each times the identity.
pub fn matches_peierls(map: &BTreeMap<(usize, Frequency, usize, Frequency), NormalOrderedOp<CQ>>, k: CQ, n_max: usize) -> bool {
    let keys: BTreeSet<_> = map.keys().copied().collect();
    for n in 1..=n_max {
        for (fx, fy, want) in [(Frequency::Negative, Frequency::Positive, k), (Frequency::Positive, Frequency::Negative, -k)] {
            let got = map.get(&(n, fx, n, fy));
            let ok = match got {
                Some(op) => op.is_scalar() && op.scalar_part() == want,
                None => want.is_zero(),
            };
            if !ok {
                return false;
            }
        }
    }
    keys.iter().all(|(n, fx, m, fy)| n == m && fx != fy)
}
