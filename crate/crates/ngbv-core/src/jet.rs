//! Jet generators of the BV field content and the variational calculus on
//! local densities: prolongation, Euler-Lagrange derivatives and equality
//! modulo total derivatives.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;
use core::fmt;

use num_traits::Zero;

use crate::graded::{Monomial, Poly, Symbol, Term};
use crate::scalar::{crq, Q};

pub const MAX_D: usize = 4;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Kind {
    Phi,
    C,
    Cbar,
    B,
    PhiDagger,
    CDagger,
    CbarDagger,
    BDagger,
    /// Background test-tensor component of an observable.
    Tensor,
}

impl Kind {
    pub const FIELDS: [Kind; 4] = [Kind::Phi, Kind::C, Kind::Cbar, Kind::B];
    pub const ANTIFIELDS: [Kind; 4] = [Kind::PhiDagger, Kind::CDagger, Kind::CbarDagger, Kind::BDagger];
    pub const BV: [Kind; 8] = [
        Kind::Phi,
        Kind::C,
        Kind::Cbar,
        Kind::B,
        Kind::PhiDagger,
        Kind::CDagger,
        Kind::CbarDagger,
        Kind::BDagger,
    ];

    pub fn grading(self) -> Grading {
        let (pure_ghost, antifield) = match self {
            Kind::Phi | Kind::B | Kind::Tensor => (0, 0),
            Kind::C => (1, 0),
            Kind::Cbar => (-1, 0),
            Kind::PhiDagger | Kind::BDagger => (0, 1),
            Kind::CDagger => (0, 2),
            Kind::CbarDagger => (0, 0),
        };
        Grading { pure_ghost, antifield }
    }

    pub fn ghost(self) -> i32 {
        self.grading().ghost()
    }

    pub fn odd(self) -> bool {
        self.ghost().rem_euclid(2) == 1
    }

    /// Φ and Φ‡ carry target indices; the rest carry worldsheet indices.
    pub fn target_indexed(self) -> bool {
        matches!(self, Kind::Phi | Kind::PhiDagger)
    }

    pub fn antifield(self) -> Option<Kind> {
        match self {
            Kind::Phi => Some(Kind::PhiDagger),
            Kind::C => Some(Kind::CDagger),
            Kind::Cbar => Some(Kind::CbarDagger),
            Kind::B => Some(Kind::BDagger),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Kind::Phi => "Phi",
            Kind::C => "C",
            Kind::Cbar => "Cbar",
            Kind::B => "B",
            Kind::PhiDagger => "PhiDagger",
            Kind::CDagger => "CDagger",
            Kind::CbarDagger => "CbarDagger",
            Kind::BDagger => "BDagger",
            Kind::Tensor => "t",
        }
    }
}

/// Pure ghost and antifield number. In the nonminimal sector C̄ has pure
/// ghost number −1 and C̄‡ carries no grading at all.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub struct Grading {
    pub pure_ghost: i32,
    pub antifield: i32,
}

impl Grading {
    pub fn ghost(&self) -> i32 {
        self.pure_ghost - self.antifield
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct Deriv(pub [u8; MAX_D]);

impl Deriv {
    pub fn order(&self) -> usize {
        self.0.iter().map(|&k| k as usize).sum()
    }

    pub fn raised(mut self, mu: usize) -> Self {
        self.0[mu] += 1;
        self
    }

    pub fn of(dirs: &[usize]) -> Self {
        let mut d = Deriv::default();
        for &m in dirs {
            d.0[m] += 1;
        }
        d
    }

    /// Expands the multi-index into a list of directions.
    pub fn directions(&self) -> Vec<usize> {
        let mut v = Vec::new();
        for (mu, &k) in self.0.iter().enumerate() {
            for _ in 0..k {
                v.push(mu);
            }
        }
        v
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Gen {
    pub kind: Kind,
    pub index: u32,
    pub deriv: Deriv,
}

impl Gen {
    pub fn new(kind: Kind, index: usize) -> Self {
        Gen { kind, index: index as u32, deriv: Deriv::default() }
    }

    pub fn d(mut self, mu: usize) -> Self {
        self.deriv.0[mu] += 1;
        self
    }

    pub fn with_deriv(mut self, deriv: Deriv) -> Self {
        self.deriv = deriv;
        self
    }

    pub fn base(&self) -> (Kind, u32) {
        (self.kind, self.index)
    }
}

impl Symbol for Gen {
    fn odd(&self) -> bool {
        self.kind.odd()
    }
}

impl fmt::Display for Gen {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for mu in self.deriv.directions() {
            write!(f, "d{}", mu)?;
        }
        if self.kind == Kind::Tensor {
            write!(f, "t")?;
            for a in tensor_components(self.index) {
                write!(f, "_{}", a)?;
            }
            Ok(())
        } else {
            write!(f, "{}[{}]", self.kind.name(), self.index)
        }
    }
}

pub type Polynomial = Poly<Gen>;

/// Packs a sorted target multi-index into a tensor index (4 bits per slot).
pub fn tensor_index(comps: &[u8]) -> u32 {
    let mut c = comps.to_vec();
    c.sort_unstable();
    c.iter().enumerate().fold(0u32, |acc, (i, &a)| acc | ((a as u32 + 1) << (4 * i)))
}

pub fn tensor_components(mut idx: u32) -> Vec<u8> {
    let mut v = Vec::new();
    while idx != 0 {
        v.push((idx & 0xF) as u8 - 1);
        idx >>= 4;
    }
    v
}

pub fn grading_of(m: &Monomial<Gen>) -> Grading {
    let mut g = Grading::default();
    for s in m.symbols() {
        let k = s.kind.grading();
        g.pure_ghost += k.pure_ghost;
        g.antifield += k.antifield;
    }
    g
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum JetError {
    JetOrderOverflow { order: usize, max: usize },
    IndexOutOfRange { kind: Kind, index: usize },
}

impl fmt::Display for JetError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JetError::JetOrderOverflow { order, max } => {
                write!(f, "jet order {} exceeds configured maximum {}", order, max)
            }
            JetError::IndexOutOfRange { kind, index } => {
                write!(f, "index {} out of range for {}", index, kind.name())
            }
        }
    }
}

/// Prolongation rule for test-tensor generators: ∂_μ t_A = dX^a_μ t_{aA}.
#[derive(Clone, Debug)]
pub struct TowerRule {
    pub dx: Vec<Vec<Q>>,
    pub max_rank: usize,
}

#[derive(Clone, Debug)]
pub struct JetAlgebra {
    pub d: usize,
    pub n: usize,
    pub jet_order: usize,
    pub lambda_order: i32,
    pub tower: Option<TowerRule>,
}

impl JetAlgebra {
    pub fn new(d: usize, n: usize, jet_order: usize, lambda_order: i32) -> Self {
        assert!(d <= MAX_D, "worldsheet dimension above {}", MAX_D);
        JetAlgebra { d, n, jet_order, lambda_order, tower: None }
    }

    pub fn with_tower(mut self, rule: TowerRule) -> Self {
        self.tower = Some(rule);
        self
    }

    pub fn index_range(&self, kind: Kind) -> usize {
        if kind.target_indexed() {
            self.n
        } else {
            self.d
        }
    }

    pub fn gen(&self, kind: Kind, index: usize) -> Result<Gen, JetError> {
        if kind != Kind::Tensor && index >= self.index_range(kind) {
            return Err(JetError::IndexOutOfRange { kind, index });
        }
        Ok(Gen::new(kind, index))
    }

    pub fn var(&self, g: Gen) -> Polynomial {
        Poly::symbol(g)
    }

    pub fn check_jets(&self, p: &Polynomial) -> Result<(), JetError> {
        for s in p.symbols() {
            let o = s.deriv.order();
            if o > self.jet_order {
                return Err(JetError::JetOrderOverflow { order: o, max: self.jet_order });
            }
        }
        Ok(())
    }

    pub fn multiply(&self, p: &Polynomial, q: &Polynomial) -> Result<Polynomial, JetError> {
        self.check_jets(p)?;
        self.check_jets(q)?;
        Ok(p.mul_trunc(q, Some(self.lambda_order)))
    }

    pub fn jet_derivative(&self, p: &Polynomial, g: &Gen) -> Polynomial {
        p.left_derivative(g)
    }

    /// Total derivative D_μ on a single generator.
    pub fn prolong(&self, g: &Gen, mu: usize) -> Polynomial {
        if g.kind != Kind::Tensor {
            return Poly::symbol(g.d(mu));
        }
        let rule = match &self.tower {
            Some(r) => r,
            None => return Polynomial::zero(),
        };
        let comps = tensor_components(g.index);
        if comps.len() + 1 > rule.max_rank {
            return Polynomial::zero();
        }
        let mut r = Polynomial::zero();
        for a in 0..self.n {
            let c = rule.dx[mu][a];
            if c.is_zero() {
                continue;
            }
            let mut cc = comps.clone();
            cc.push(a as u8);
            r.add_term(
                Term { mono: Monomial::single(Gen::new(Kind::Tensor, tensor_index(&cc) as usize)), lambda: 0, hbar: 0 },
                crq(c),
            );
        }
        r
    }

    /// Total derivative without the jet-order guard; used internally where
    /// intermediate jets legitimately exceed J.
    pub fn total_derivative_free(&self, p: &Polynomial, mu: usize) -> Polynomial {
        p.apply_derivation(false, None, |g| self.prolong(g, mu))
    }

    pub fn total_derivative(&self, p: &Polynomial, mu: usize) -> Result<Polynomial, JetError> {
        let r = self.total_derivative_free(p, mu);
        self.check_jets(&r)?;
        Ok(r)
    }

    pub fn total_derivative_multi(&self, p: &Polynomial, deriv: &Deriv) -> Polynomial {
        let mut r = p.clone();
        for mu in deriv.directions() {
            r = self.total_derivative_free(&r, mu);
        }
        r
    }

    fn el_generic(&self, p: &Polynomial, kind: Kind, index: u32, right: bool) -> Polynomial {
        let jets: BTreeSet<Gen> = p.symbols().into_iter().filter(|g| g.kind == kind && g.index == index).collect();
        let mut r = Polynomial::zero();
        for g in jets {
            let q = if right { p.right_derivative(&g) } else { p.left_derivative(&g) };
            let dq = self.total_derivative_multi(&q, &g.deriv);
            if g.deriv.order() % 2 == 1 {
                r.add_scaled(&dq, -crate::scalar::cr(1));
            } else {
                r.add_assign(&dq);
            }
        }
        r
    }

    /// Left Euler-Lagrange derivative Σ_I (−1)^{|I|} D_I(∂p/∂φ_I).
    pub fn el_derivative(&self, p: &Polynomial, kind: Kind, index: usize) -> Polynomial {
        self.el_generic(p, kind, index as u32, false)
    }

    pub fn el_derivative_right(&self, p: &Polynomial, kind: Kind, index: usize) -> Polynomial {
        self.el_generic(p, kind, index as u32, true)
    }

    /// Field-independent part: monomials built from test-tensor generators only.
    pub fn field_independent(&self, p: &Polynomial) -> Polynomial {
        p.filter(|t| t.mono.symbols().iter().all(|g| g.kind == Kind::Tensor))
    }

    pub fn is_trivial_mod_d(&self, p: &Polynomial) -> bool {
        if !self.field_independent(p).is_zero() {
            return false;
        }
        let bases: BTreeSet<(Kind, u32)> =
            p.symbols().into_iter().filter(|g| g.kind != Kind::Tensor).map(|g| g.base()).collect();
        bases.into_iter().all(|(k, i)| self.el_derivative(p, k, i as usize).is_zero())
    }

    pub fn equals_mod_d(&self, p: &Polynomial, q: &Polynomial) -> bool {
        self.is_trivial_mod_d(&p.sub(q))
    }
}
