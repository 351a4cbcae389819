//! Contractible-pair homotopy for the free BV differential s₀ and exact
//! certificates that s₀-closed elements of positive ghost number are exact.
//!
//! The truncated jet space keeps generators ∂_I g with |I| + w(g) ≤ J, where
//! w = 2 for Φ‡ and C‡ and 0 otherwise, and monomials of degree ≤ D. Since s₀
//! sends Φ‡ to second derivatives of Φ and C‡ to Φ‡, this space is closed
//! under s₀, r and N = s₀r + rs₀.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use num_traits::{One, Zero};

use crate::brst::BvComplex;
use crate::graded::{Monomial, Poly, Term};
use crate::jet::{Deriv, Gen, Kind, Polynomial};
use crate::lagrangian::NgModel;
use crate::linalg::{kernel, SparseVec};
use crate::scalar::{cr, crq, Q, CQ};

#[derive(Clone, Debug, PartialEq)]
pub enum HomotopyError {
    NotClosed { residual: Polynomial },
    NotHomogeneous,
    NonPositiveGhost { ghost: i32 },
    /// A component annihilated by N survived; this would contradict
    /// triviality of the cohomology at positive ghost number.
    ZeroModeRemainder { remainder: Polynomial },
    OutsideTruncation,
}

/// One N-eigencomponent ω_k with its primitive η_k = r(ω_k)/k.
#[derive(Clone, Debug, PartialEq)]
pub struct Component {
    pub k: u32,
    pub omega: Polynomial,
    pub eta: Polynomial,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    pub ghost: i32,
    pub omega: Polynomial,
    pub components: Vec<Component>,
    pub eta: Polynomial,
    /// s₀η = ω recomputed with a separately built λ⁰ complex.
    pub verified: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GhostSummary {
    pub ghost: i32,
    pub basis_size: usize,
    pub target_size: usize,
    pub blocks: usize,
    pub closed_dim: usize,
    pub certified: usize,
    pub failures: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CohomologyReport {
    pub jet_order: usize,
    pub max_degree: usize,
    pub ghosts: Vec<GhostSummary>,
    pub certificates: Vec<Certificate>,
}

impl CohomologyReport {
    pub fn passed(&self) -> bool {
        self.ghosts.iter().all(|g| g.failures == 0 && g.certified == g.closed_dim)
    }
}

fn weight_offset(kind: Kind) -> usize {
    match kind {
        Kind::PhiDagger | Kind::CDagger => 2,
        _ => 0,
    }
}

fn family(kind: Kind) -> u8 {
    match kind {
        Kind::Phi | Kind::C | Kind::PhiDagger | Kind::CDagger => 0,
        Kind::Cbar | Kind::B => 1,
        Kind::CbarDagger | Kind::BDagger => 2,
        Kind::Tensor => 3,
    }
}

fn ghost_of(m: &Monomial<Gen>) -> i32 {
    m.symbols().iter().map(|g| g.kind.ghost()).sum()
}

/// Invariants of a monomial preserved by s₀, r and N: the multiset of
/// (family, index) labels, the total weight and the parity of ∂₁.
type BlockKey = (Vec<(u8, u32)>, usize, usize);

fn block_key(m: &Monomial<Gen>) -> BlockKey {
    let mut labels: Vec<(u8, u32)> = m.symbols().iter().map(|g| (family(g.kind), g.index)).collect();
    labels.sort_unstable();
    let w = m.symbols().iter().map(|g| g.deriv.order() + weight_offset(g.kind)).sum();
    let odd1 = m.symbols().iter().map(|g| g.deriv.0[1] as usize).sum::<usize>() % 2;
    (labels, w, odd1)
}

fn multi_indices(d: usize, max: usize) -> Vec<Deriv> {
    let mut out = alloc::vec![Deriv::default()];
    let mut frontier = out.clone();
    for _ in 0..max {
        let mut next = Vec::new();
        for dv in &frontier {
            let last = dv.directions().last().copied().unwrap_or(0);
            for mu in last..d {
                next.push(dv.raised(mu));
            }
        }
        out.extend(next.iter().copied());
        frontier = next;
    }
    out
}

/// The derivations s₀ and r on the truncated jet space of a flat background.
pub struct Contraction<'a> {
    bv: &'a BvComplex,
    pub jet_order: usize,
    pub max_degree: usize,
    gens: Vec<Gen>,
    s0_images: BTreeMap<Gen, Polynomial>,
    r_images: BTreeMap<Gen, Polynomial>,
}

/// Builds r = Σ_I ∂_I(h_ab g^{νλ} dX^b_λ Φ^a) ∂/∂(∂_I C^ν) and s₀ on the
/// truncated generators. N is available as [`Contraction::counting`].
pub fn contractible_operators(bv: &BvComplex, jet_order: usize, max_degree: usize) -> Contraction<'_> {
    Contraction::new(bv, jet_order, max_degree)
}

impl<'a> Contraction<'a> {
    pub fn new(bv: &'a BvComplex, jet_order: usize, max_degree: usize) -> Self {
        let alg = bv.alg();
        let bg = &bv.model.bg;
        let mut gens = Vec::new();
        for kind in Kind::BV {
            let off = weight_offset(kind);
            if off > jet_order {
                continue;
            }
            for i in 0..alg.index_range(kind) {
                for dv in multi_indices(bg.d, jet_order - off) {
                    gens.push(Gen::new(kind, i).with_deriv(dv));
                }
            }
        }
        gens.sort();
        let mut s0_images = BTreeMap::new();
        let mut r_images = BTreeMap::new();
        for g in &gens {
            let base = bv.s_free(&Poly::symbol(Gen::new(g.kind, g.index as usize))).lambda_part(0);
            s0_images.insert(*g, alg.total_derivative_multi(&base, &g.deriv));
            if g.kind == Kind::C {
                let nu = g.index as usize;
                let mut p = Polynomial::zero();
                for a in 0..bg.n {
                    let c: Q =
                        (0..bg.d).map(|l| bg.h[a] * bg.g_inv[nu][l] * bg.dx[l][a]).sum();
                    if !c.is_zero() {
                        p.add_scaled(&Poly::symbol(Gen::new(Kind::Phi, a)), crq(c));
                    }
                }
                r_images.insert(*g, alg.total_derivative_multi(&p, &g.deriv));
            }
        }
        Contraction { bv, jet_order, max_degree, gens, s0_images, r_images }
    }

    pub fn generators(&self) -> &[Gen] {
        &self.gens
    }

    pub fn in_truncation(&self, p: &Polynomial) -> bool {
        p.iter().all(|(t, _)| {
            t.mono.degree() <= self.max_degree
                && t.mono.symbols().iter().all(|g| g.deriv.order() + weight_offset(g.kind) <= self.jet_order)
        })
    }

    pub fn s0(&self, p: &Polynomial) -> Polynomial {
        p.apply_derivation(true, None, |g| {
            self.s0_images.get(g).cloned().unwrap_or_else(|| {
                let base = self.bv.s_free(&Poly::symbol(Gen::new(g.kind, g.index as usize))).lambda_part(0);
                self.bv.alg().total_derivative_multi(&base, &g.deriv)
            })
        })
    }

    pub fn r(&self, p: &Polynomial) -> Polynomial {
        p.apply_derivation(true, None, |g| self.r_images.get(g).cloned().unwrap_or_else(Polynomial::zero))
    }

    /// N = s₀r + rs₀.
    pub fn counting(&self, p: &Polynomial) -> Polynomial {
        self.s0(&self.r(p)).add(&self.r(&self.s0(p)))
    }

    /// Monomials of the truncated space at the given ghost number.
    pub fn basis(&self, ghost: i32) -> Vec<Monomial<Gen>> {
        let mut out = Vec::new();
        let mut stack: Vec<Gen> = Vec::new();
        self.enumerate(0, &mut stack, ghost, &mut out);
        out
    }

    fn enumerate(&self, start: usize, stack: &mut Vec<Gen>, ghost: i32, out: &mut Vec<Monomial<Gen>>) {
        if !stack.is_empty() {
            let m = Monomial::from_word(stack.clone()).expect("no repeated odd generator").1;
            if ghost_of(&m) == ghost {
                out.push(m);
            }
        }
        if stack.len() == self.max_degree {
            return;
        }
        for i in start..self.gens.len() {
            let g = self.gens[i];
            // An odd generator may appear at most once.
            let next = if g.kind.odd() { i + 1 } else { i };
            stack.push(g);
            self.enumerate(next, stack, ghost, out);
            stack.pop();
        }
    }

    /// Kernel of s₀ on the truncated space at `ghost`, block by block.
    pub fn closed_basis(&self, ghost: i32) -> (Vec<Polynomial>, GhostSummary) {
        let basis = self.basis(ghost);
        let target_size = self.basis(ghost + 1).len();
        let mut blocks: BTreeMap<BlockKey, Vec<Monomial<Gen>>> = BTreeMap::new();
        for m in &basis {
            blocks.entry(block_key(m)).or_default().push(m.clone());
        }
        let mut closed = Vec::new();
        for monos in blocks.values() {
            let mut index: BTreeMap<Monomial<Gen>, usize> = BTreeMap::new();
            let cols: Vec<SparseVec> = monos
                .iter()
                .map(|m| {
                    let img = self.s0(&Poly::monomial(m.clone(), 0, 0, CQ::one()));
                    let mut v = SparseVec::new();
                    for (t, c) in img.iter() {
                        debug_assert_eq!(block_key(&t.mono), block_key(m));
                        let n = index.len();
                        let j = *index.entry(t.mono.clone()).or_insert(n);
                        v.insert(j, *c);
                    }
                    v
                })
                .collect();
            for kv in kernel(&cols) {
                let mut p = Polynomial::zero();
                for (j, c) in kv {
                    p.add_term(Term { mono: monos[j].clone(), lambda: 0, hbar: 0 }, c);
                }
                closed.push(p);
            }
        }
        let summary = GhostSummary {
            ghost,
            basis_size: basis.len(),
            target_size,
            blocks: blocks.len(),
            closed_dim: closed.len(),
            certified: 0,
            failures: 0,
        };
        (closed, summary)
    }

    /// Splits ω into N-eigencomponents by Lagrange projectors in N and
    /// returns η = Σ_{k>0} r(ω_k)/k.
    pub fn homotopy_reduce(&self, omega: &Polynomial, ghost: i32) -> Result<Certificate, HomotopyError> {
        if ghost < 1 {
            return Err(HomotopyError::NonPositiveGhost { ghost });
        }
        if !self.in_truncation(omega) {
            return Err(HomotopyError::OutsideTruncation);
        }
        if omega.iter().any(|(t, _)| ghost_of(&t.mono) != ghost || t.lambda != 0 || t.hbar != 0) {
            return Err(HomotopyError::NotHomogeneous);
        }
        let residual = self.s0(omega);
        if !residual.is_zero() {
            return Err(HomotopyError::NotClosed { residual });
        }
        let top = omega.max_degree() as u32;
        let spectrum: Vec<u32> = (0..=top).collect();
        let mut components = Vec::new();
        let mut eta = Polynomial::zero();
        let mut sum = Polynomial::zero();
        for &k in &spectrum {
            let mut wk = omega.clone();
            for &j in &spectrum {
                if j == k {
                    continue;
                }
                let nw = self.counting(&wk);
                let shifted = nw.sub(&wk.scale(cr(j as i128)));
                wk = shifted.scale(CQ::one() / cr(k as i128 - j as i128));
            }
            sum.add_assign(&wk);
            if wk.is_zero() {
                continue;
            }
            if k == 0 {
                return Err(HomotopyError::ZeroModeRemainder { remainder: wk });
            }
            let ek = self.r(&wk).scale(CQ::one() / cr(k as i128));
            eta.add_assign(&ek);
            components.push(Component { k, omega: wk, eta: ek });
        }
        debug_assert_eq!(sum, *omega);
        let verified = sum == *omega && verify_primitive(&self.bv.model, &eta, omega);
        Ok(Certificate { ghost, omega: omega.clone(), components, eta, verified })
    }

    /// Certifies every element of a kernel basis of s₀ at each ghost number.
    pub fn verify(&self, ghosts: &[i32]) -> CohomologyReport {
        let mut summaries = Vec::new();
        let mut certificates = Vec::new();
        for &g in ghosts {
            let (closed, mut summary) = self.closed_basis(g);
            for w in &closed {
                match self.homotopy_reduce(w, g) {
                    Ok(c) if c.verified => {
                        summary.certified += 1;
                        certificates.push(c);
                    }
                    _ => summary.failures += 1,
                }
            }
            summaries.push(summary);
        }
        CohomologyReport {
            jet_order: self.jet_order,
            max_degree: self.max_degree,
            ghosts: summaries,
            certificates,
        }
    }
}

/// Checks s₀η = ω using a complex built at λ-order 0, so s₀ there is the
/// full differential rather than a projection of the interacting one.
pub fn verify_primitive(model: &NgModel, eta: &Polynomial, omega: &Polynomial) -> bool {
    let free = BvComplex::new(NgModel::new(model.bg.clone(), model.alg.jet_order.max(4), 0));
    free.s_free(eta).lambda_part(0) == *omega
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{cq, q};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sym(kind: Kind, i: usize, dirs: &[usize]) -> Polynomial {
        Poly::symbol(Gen::new(kind, i).with_deriv(Deriv::of(dirs)))
    }

    fn random_poly(rng: &mut ChaCha8Rng, basis: &[Monomial<Gen>], terms: usize) -> Polynomial {
        let mut p = Polynomial::zero();
        for _ in 0..terms {
            let m = basis[rng.gen_range(0..basis.len())].clone();
            let c = cq(q(rng.gen_range(-3..4)), q(rng.gen_range(-3..4)));
            p.add_scaled(&Poly::monomial(m, 0, 0, CQ::one()), c);
        }
        p
    }

    #[test]
    fn counting_examples() {
        let bv = BvComplex::flat_strip();
        let h = contractible_operators(&bv, 2, 3);
        let dc = sym(Kind::C, 0, &[0]);
        assert_eq!(h.counting(&dc), dc);
        let q = sym(Kind::Phi, 2, &[]).mul(&sym(Kind::Phi, 3, &[1]));
        assert!(h.counting(&q).is_zero());
        let mixed = sym(Kind::C, 1, &[]).mul(&sym(Kind::Phi, 0, &[1])).mul(&sym(Kind::PhiDagger, 2, &[]));
        assert_eq!(h.counting(&mixed), mixed.scale(cr(2)));
    }

    #[test]
    fn s0_matches_free_complex() {
        let bv = BvComplex::flat_strip();
        let h = contractible_operators(&bv, 2, 3);
        let free = BvComplex::new(NgModel::new(bv.model.bg.clone(), 4, 0));
        for g in h.generators() {
            let p = Poly::symbol(*g);
            assert_eq!(h.s0(&p), free.s_free(&p), "{}", g);
            assert!(h.s0(&h.s0(&p)).is_zero());
        }
    }

    #[test]
    fn counting_commutes_with_s0_and_is_diagonal() {
        let bv = BvComplex::flat_strip();
        let h = contractible_operators(&bv, 2, 2);
        for ghost in -1..=2 {
            for m in h.basis(ghost) {
                let p = Poly::monomial(m.clone(), 0, 0, CQ::one());
                let lhs = h.counting(&h.s0(&p));
                let rhs = h.s0(&h.counting(&p));
                assert_eq!(lhs, rhs);
                let n = h.counting(&p);
                let k = n.coefficient(&m, 0, 0);
                assert_eq!(n, p.scale(k));
                assert!(k.im.is_zero() && k.re >= Q::zero() && k.re.is_integer());
            }
        }
    }

    #[test]
    fn exact_forms_reduce() {
        let bv = BvComplex::flat_strip();
        let h = contractible_operators(&bv, 2, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rho_basis = h.basis(0);
        for _ in 0..20 {
            let rho = random_poly(&mut rng, &rho_basis, 4);
            let omega = h.s0(&rho);
            if omega.is_zero() {
                continue;
            }
            let cert = h.homotopy_reduce(&omega, 1).unwrap();
            assert!(cert.verified);
            assert_eq!(h.s0(&cert.eta), omega);
        }
    }

    #[test]
    fn ghost_two_example() {
        let bv = BvComplex::flat_strip();
        let h = contractible_operators(&bv, 2, 3);
        // C⁰ ∂₁C¹ is s₀-closed with N = 2.
        let w = sym(Kind::C, 0, &[]).mul(&sym(Kind::C, 1, &[1]));
        let cert = h.homotopy_reduce(&w, 2).unwrap();
        assert!(cert.verified);
        assert_eq!(cert.components.len(), 1);
        assert_eq!(cert.components[0].k, 2);
        // C^μ dX_{aμ} Q Φ^a with transversal fluctuation: exact via C ↦ Φ.
        let w = sym(Kind::C, 0, &[]).mul(&sym(Kind::Phi, 2, &[]));
        assert!(h.homotopy_reduce(&w, 1).unwrap().verified);
    }

    #[test]
    fn rejects_bad_input() {
        let bv = BvComplex::flat_strip();
        let h = contractible_operators(&bv, 2, 3);
        let phi = sym(Kind::Phi, 0, &[]);
        assert!(matches!(h.homotopy_reduce(&phi, 1), Err(HomotopyError::NotHomogeneous)));
        assert!(matches!(h.homotopy_reduce(&phi, 0), Err(HomotopyError::NonPositiveGhost { .. })));
        let cbar_c = sym(Kind::Cbar, 0, &[]).mul(&sym(Kind::C, 0, &[])).mul(&sym(Kind::C, 1, &[]));
        assert!(matches!(h.homotopy_reduce(&cbar_c, 1), Err(HomotopyError::NotClosed { .. })));
        let deep = sym(Kind::C, 0, &[0, 0, 1]);
        assert!(matches!(h.homotopy_reduce(&deep, 1), Err(HomotopyError::OutsideTruncation)));
    }

    #[test]
    fn ghost_zero_has_genuine_cohomology() {
        // The transversal fluctuation is closed and sits at N = 0: the homotopy
        // cannot remove it, which is why the statement needs positive ghost number.
        let bv = BvComplex::flat_strip();
        let h = contractible_operators(&bv, 2, 3);
        let q = sym(Kind::Phi, 2, &[0]).mul(&sym(Kind::B, 0, &[]));
        assert!(h.s0(&q).is_zero());
        assert!(h.counting(&q).is_zero());
    }

    #[test]
    fn positive_ghost_cohomology_vanishes_small() {
        let bv = BvComplex::flat_strip();
        let h = contractible_operators(&bv, 2, 2);
        let report = h.verify(&[1, 2]);
        assert!(report.passed());
        assert!(report.ghosts.iter().all(|g| g.closed_dim > 0));
    }
}
