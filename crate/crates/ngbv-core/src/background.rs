//! Flat backgrounds: a constant embedding differential dX of a d-dimensional
//! worldsheet into n-dimensional Minkowski space.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_traits::{One, Signed, Zero};

use crate::scalar::{q, Q};

pub type QMat = Vec<Vec<Q>>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BackgroundError {
    BadDimensions { d: usize, n: usize },
    ShapeMismatch,
    Degenerate,
    NotHyperbolic { negative: usize },
}

impl fmt::Display for BackgroundError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackgroundError::BadDimensions { d, n } => write!(f, "need d >= 2 and n > d, got d={} n={}", d, n),
            BackgroundError::ShapeMismatch => write!(f, "dX must be a d x n matrix"),
            BackgroundError::Degenerate => write!(f, "induced metric is degenerate (rank dX < d)"),
            BackgroundError::NotHyperbolic { negative } => {
                write!(f, "induced metric has {} negative directions, expected 1", negative)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Background {
    pub d: usize,
    pub n: usize,
    /// `dx[μ][a]` = dX^a_μ.
    pub dx: QMat,
    /// Diagonal of the target metric, diag(−1, 1, …, 1).
    pub h: Vec<Q>,
    pub g: QMat,
    pub g_inv: QMat,
}

impl Background {
    pub fn new(d: usize, n: usize, dx: QMat) -> Result<Self, BackgroundError> {
        if d < 2 || n <= d {
            return Err(BackgroundError::BadDimensions { d, n });
        }
        if dx.len() != d || dx.iter().any(|r| r.len() != n) {
            return Err(BackgroundError::ShapeMismatch);
        }
        let mut h = vec![q(1); n];
        h[0] = q(-1);
        let mut g = vec![vec![Q::zero(); d]; d];
        for mu in 0..d {
            for nu in 0..d {
                g[mu][nu] = (0..n).map(|a| dx[mu][a] * h[a] * dx[nu][a]).sum();
            }
        }
        let g_inv = invert(&g).ok_or(BackgroundError::Degenerate)?;
        let negative = negative_directions(&g);
        if negative != 1 {
            return Err(BackgroundError::NotHyperbolic { negative });
        }
        Ok(Background { d, n, dx, h, g, g_inv })
    }

    /// dX = (identity block, 0), so g = diag(−1, 1, …).
    pub fn flat_strip(d: usize, n: usize) -> Result<Self, BackgroundError> {
        let mut dx = vec![vec![Q::zero(); n]; d];
        for (mu, row) in dx.iter_mut().enumerate().take(d.min(n)) {
            row[mu] = Q::one();
        }
        Self::new(d, n, dx)
    }

    pub fn default_strip() -> Self {
        Self::flat_strip(2, 4).expect("flat strip is valid")
    }

    /// P^a_b = dX^a_μ g^{μν} dX^c_ν h_{bc}, returned as `p[a][b]`.
    pub fn projector_p(&self) -> QMat {
        let mut p = vec![vec![Q::zero(); self.n]; self.n];
        for a in 0..self.n {
            for b in 0..self.n {
                let mut s = Q::zero();
                for mu in 0..self.d {
                    for nu in 0..self.d {
                        s += self.dx[mu][a] * self.g_inv[mu][nu] * self.dx[nu][b] * self.h[b];
                    }
                }
                p[a][b] = s;
            }
        }
        p
    }

    pub fn projector_q(&self) -> QMat {
        let p = self.projector_p();
        let mut qm = vec![vec![Q::zero(); self.n]; self.n];
        for a in 0..self.n {
            for b in 0..self.n {
                qm[a][b] = if a == b { Q::one() } else { Q::zero() } - p[a][b];
            }
        }
        qm
    }

    pub fn projectors(&self) -> (QMat, QMat) {
        (self.projector_p(), self.projector_q())
    }

    /// dX_{aμ} = h_{ab} dX^b_μ.
    pub fn dx_lower(&self, mu: usize, a: usize) -> Q {
        self.h[a] * self.dx[mu][a]
    }

    /// Whether dX is the identity block of the flat strip.
    pub fn is_aligned(&self) -> bool {
        (0..self.d).all(|mu| (0..self.n).all(|a| self.dx[mu][a] == if a == mu { Q::one() } else { Q::zero() }))
    }
}

pub fn mat_mul(a: &QMat, b: &QMat) -> QMat {
    let m = a.len();
    let k = b.len();
    let n = if k == 0 { 0 } else { b[0].len() };
    let mut r = vec![vec![Q::zero(); n]; m];
    for i in 0..m {
        for j in 0..n {
            r[i][j] = (0..k).map(|l| a[i][l] * b[l][j]).sum();
        }
    }
    r
}

pub fn invert(a: &QMat) -> Option<QMat> {
    let n = a.len();
    let mut m: Vec<Vec<Q>> = a
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| if i == j { Q::one() } else { Q::zero() }));
            row
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).find(|&r| !m[r][col].is_zero())?;
        m.swap(col, piv);
        let inv = Q::one() / m[col][col];
        for x in m[col].iter_mut() {
            *x *= inv;
        }
        for r in 0..n {
            if r != col && !m[r][col].is_zero() {
                let f = m[r][col];
                let pivot_row = m[col].clone();
                for (x, p) in m[r].iter_mut().zip(pivot_row.iter()) {
                    *x -= f * *p;
                }
            }
        }
    }
    Some(m.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// Number of negative eigenvalues of a symmetric nondegenerate matrix,
/// by congruence diagonalization.
pub fn negative_directions(a: &QMat) -> usize {
    let n = a.len();
    let mut m = a.clone();
    let mut neg = 0;
    for k in 0..n {
        if m[k][k].is_zero() {
            if let Some(j) = (k + 1..n).find(|&j| !m[j][j].is_zero()) {
                m.swap(k, j);
                for row in m.iter_mut() {
                    row.swap(k, j);
                }
            } else if let Some(j) = (k + 1..n).find(|&j| !m[k][j].is_zero()) {
                // Replace e_k by e_k + e_j, which has nonzero norm 2 m_kj.
                for i in 0..n {
                    let v = m[j][i];
                    m[k][i] += v;
                }
                for i in 0..n {
                    let v = m[i][j];
                    m[i][k] += v;
                }
            } else {
                continue;
            }
        }
        let p = m[k][k];
        if p.is_negative() {
            neg += 1;
        }
        for i in k + 1..n {
            let f = m[i][k] / p;
            for j in k..n {
                let v = m[k][j];
                m[i][j] -= f * v;
            }
        }
        for j in k + 1..n {
            m[k][j] = Q::zero();
        }
    }
    neg
}
