//! Exact scalars: rationals over `i128` and Gaussian rationals built on them.
//!
//! Arithmetic overflow panics in debug and test builds; the workspace enables
//! overflow checks for release builds as well.

use num_complex::Complex;
use num_rational::Ratio;
use num_traits::{One, Zero};

pub type Q = Ratio<i128>;
pub type CQ = Complex<Q>;
pub type C64 = Complex<f64>;

pub fn q(n: i128) -> Q {
    Q::from_integer(n)
}

pub fn qf(n: i128, d: i128) -> Q {
    Q::new(n, d)
}

pub fn cq(re: Q, im: Q) -> CQ {
    CQ::new(re, im)
}

pub fn cr(n: i128) -> CQ {
    CQ::new(q(n), Q::zero())
}

pub fn crq(r: Q) -> CQ {
    CQ::new(r, Q::zero())
}

/// The imaginary unit.
pub fn ci() -> CQ {
    CQ::new(Q::zero(), Q::one())
}

pub fn q_to_f64(r: &Q) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

pub fn cq_to_c64(z: &CQ) -> C64 {
    C64::new(q_to_f64(&z.re), q_to_f64(&z.im))
}

pub fn cq_pow(z: &CQ, mut e: u32) -> CQ {
    let mut base = *z;
    let mut acc = CQ::one();
    while e > 0 {
        if e & 1 == 1 {
            acc *= base;
        }
        base *= base;
        e >>= 1;
    }
    acc
}

/// Division that avoids squaring real or imaginary divisors.
pub fn cq_div(a: &CQ, b: &CQ) -> CQ {
    if b.im.is_zero() {
        CQ::new(a.re / b.re, a.im / b.re)
    } else if b.re.is_zero() {
        CQ::new(a.im / b.im, -(a.re / b.im))
    } else {
        a / b
    }
}

/// Binomial coefficient `binom(1/2, k)` used by the square-root series.
pub fn half_binomial(k: u32) -> Q {
    let half = qf(1, 2);
    let mut acc = Q::one();
    for j in 0..k {
        acc = acc * (half - q(j as i128)) / q(j as i128 + 1);
    }
    acc
}

pub fn factorial(k: u32) -> Q {
    (1..=k as i128).fold(Q::one(), |acc, j| acc * q(j))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_binomials() {
        assert_eq!(half_binomial(0), q(1));
        assert_eq!(half_binomial(1), qf(1, 2));
        assert_eq!(half_binomial(2), qf(-1, 8));
        assert_eq!(half_binomial(3), qf(1, 16));
    }

    #[test]
    fn gaussian_powers() {
        let z = cq(qf(3, 5), qf(4, 5));
        let w = cq_pow(&z, 2);
        assert_eq!(w, cq(qf(-7, 25), qf(24, 25)));
        assert_eq!(cq_pow(&ci(), 4), cr(1));
    }
}
