//! Exact linear algebra over the Gaussian rationals.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use num_traits::{One, Zero};

use crate::scalar::{cq_div, CQ, Q};

pub type SparseVec = BTreeMap<usize, CQ>;

/// Determinant by fraction-free Bareiss elimination, which keeps every
/// intermediate entry a minor of the input.
pub fn det(m: &[Vec<CQ>]) -> CQ {
    let n = m.len();
    if n == 0 {
        return CQ::one();
    }
    let mut a: Vec<Vec<CQ>> = m.to_vec();
    let mut sign = CQ::one();
    let mut prev = CQ::one();
    for k in 0..n - 1 {
        if a[k][k].is_zero() {
            match (k + 1..n).find(|&r| !a[r][k].is_zero()) {
                Some(p) => {
                    a.swap(p, k);
                    sign = -sign;
                }
                None => return CQ::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i][j] = cq_div(&(a[i][j] * a[k][k] - a[i][k] * a[k][j]), &prev);
            }
        }
        prev = a[k][k];
    }
    sign * a[n - 1][n - 1]
}

pub fn invert(m: &[Vec<CQ>]) -> Option<Vec<Vec<CQ>>> {
    let n = m.len();
    let mut a: Vec<Vec<CQ>> = m
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| if i == j { CQ::one() } else { CQ::zero() }));
            row
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, piv);
        let inv = CQ::one() / a[col][col];
        for x in a[col].iter_mut() {
            *x *= inv;
        }
        let prow = a[col].clone();
        for (r, row) in a.iter_mut().enumerate() {
            if r != col && !row[col].is_zero() {
                let f = row[col];
                for (x, p) in row.iter_mut().zip(prow.iter()) {
                    *x -= f * *p;
                }
            }
        }
    }
    Some(a.into_iter().map(|r| r[n..].to_vec()).collect())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Inertia {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

/// Inertia of a Hermitian matrix by pivoted congruence (LDL*).
pub fn inertia(m: &[Vec<CQ>]) -> Inertia {
    let n = m.len();
    let mut a: Vec<Vec<CQ>> = m.to_vec();
    let mut out = Inertia::default();
    let mut k = 0;
    while k < n {
        if a[k][k].is_zero() {
            if let Some(j) = (k + 1..n).find(|&j| !a[j][j].is_zero()) {
                a.swap(k, j);
                for row in a.iter_mut() {
                    row.swap(k, j);
                }
            } else if let Some(j) = (k + 1..n).find(|&j| !a[k][j].is_zero()) {
                // e_k ← e_k + t e_j with Re(t a_kj) ≠ 0, giving diagonal 2 Re(t a_kj).
                let t = if a[k][j].re.is_zero() { CQ::new(Q::zero(), Q::one()) } else { CQ::one() };
                let tc = t.conj();
                for i in 0..n {
                    let v = a[j][i];
                    a[k][i] += tc * v;
                }
                for row in a.iter_mut() {
                    let v = row[j];
                    row[k] += t * v;
                }
            } else {
                out.zero += 1;
                k += 1;
                continue;
            }
        }
        let p = a[k][k];
        debug_assert!(p.im.is_zero());
        if p.re > Q::zero() {
            out.positive += 1;
        } else {
            out.negative += 1;
        }
        let prow = a[k].clone();
        for i in k + 1..n {
            if a[i][k].is_zero() {
                continue;
            }
            let f = cq_div(&a[i][k], &p);
            for j in k..n {
                a[i][j] -= f * prow[j];
            }
        }
        for j in k + 1..n {
            a[k][j] = CQ::zero();
        }
        k += 1;
    }
    out
}

pub fn rank(rows: &[Vec<CQ>]) -> usize {
    let mut e = Echelon::new();
    for (i, r) in rows.iter().enumerate() {
        let v: SparseVec = r.iter().enumerate().filter(|(_, c)| !c.is_zero()).map(|(j, c)| (j, *c)).collect();
        e.insert(i, v);
    }
    e.rank()
}

fn axpy(y: &mut SparseVec, a: CQ, x: &SparseVec) {
    for (k, v) in x {
        let e = y.entry(*k).or_insert_with(CQ::zero);
        *e += a * *v;
        if e.is_zero() {
            y.remove(k);
        }
    }
}

/// Incremental echelon basis of a column span, tracking how each reduced
/// vector combines the inserted columns.
#[derive(Clone, Debug, Default)]
pub struct Echelon {
    rows: Vec<(SparseVec, SparseVec)>,
    lead: BTreeMap<usize, usize>,
}

impl Echelon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Returns (remainder, combination) with v = remainder + Σ c_j col_j.
    pub fn reduce(&self, v: &SparseVec) -> (SparseVec, SparseVec) {
        let mut r = v.clone();
        let mut combo = SparseVec::new();
        let mut cursor = 0usize;
        while let Some((&key, _)) = r.range(cursor..).next() {
            if let Some(&ix) = self.lead.get(&key) {
                let (vec, comb) = &self.rows[ix];
                let f = r[&key] / vec[&key];
                axpy(&mut r, -f, vec);
                axpy(&mut combo, f, comb);
            } else {
                cursor = key + 1;
            }
        }
        (r, combo)
    }

    /// Inserts column `col` with entries `v`. Returns a kernel vector over
    /// the inserted columns when `v` is dependent.
    pub fn insert(&mut self, col: usize, v: SparseVec) -> Option<SparseVec> {
        let (r, combo) = self.reduce(&v);
        if r.is_empty() {
            let mut k = SparseVec::new();
            k.insert(col, CQ::one());
            axpy(&mut k, -CQ::one(), &combo);
            return Some(k);
        }
        let lead = *r.keys().next().expect("nonempty");
        let mut comb = SparseVec::new();
        comb.insert(col, CQ::one());
        axpy(&mut comb, -CQ::one(), &combo);
        self.lead.insert(lead, self.rows.len());
        self.rows.push((r, comb));
        None
    }

    pub fn contains(&self, v: &SparseVec) -> bool {
        self.reduce(v).0.is_empty()
    }

    /// Solves v = Σ c_j col_j when possible.
    pub fn solve(&self, v: &SparseVec) -> Option<SparseVec> {
        let (r, c) = self.reduce(v);
        if r.is_empty() {
            Some(c)
        } else {
            None
        }
    }
}

/// Kernel basis of the linear map whose j-th column is `cols[j]`.
pub fn kernel(cols: &[SparseVec]) -> Vec<SparseVec> {
    let mut e = Echelon::new();
    cols.iter().enumerate().filter_map(|(j, c)| e.insert(j, c.clone())).collect()
}
