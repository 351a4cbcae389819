//! Scalar two-point kernels on the flat Dirichlet strip σ ∈ [0, π].
//!
//! Mode sums use u_n = √(2/π) sin(nσ) e^{inτ} with weights d_n = 1/(2n).
//! The image-charge evaluation is independent of the mode expansion and
//! serves as its oracle.

use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};
use core::fmt;

use crate::scalar::C64;

pub type Point = (f64, f64);

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PropagatorError {
    SigmaOutOfRange(f64),
    ModeOutOfRange(usize),
    /// The pair sits on the light cone of the source or one of its images.
    OnLightCone { x: Point, y: Point },
}

impl fmt::Display for PropagatorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PropagatorError::SigmaOutOfRange(s) => write!(f, "σ = {} outside [0, π]", s),
            PropagatorError::ModeOutOfRange(n) => write!(f, "mode number {} must be at least 1", n),
            PropagatorError::OnLightCone { x, y } => {
                write!(f, "({}, {}) and ({}, {}) are null separated modulo images", x.0, x.1, y.0, y.1)
            }
        }
    }
}

fn check(x: Point) -> Result<(), PropagatorError> {
    if (0.0..=PI).contains(&x.1) {
        Ok(())
    } else {
        Err(PropagatorError::SigmaOutOfRange(x.1))
    }
}

pub fn mode_function(n: usize, tau: f64, sigma: f64) -> Result<C64, PropagatorError> {
    if n == 0 {
        return Err(PropagatorError::ModeOutOfRange(n));
    }
    check((tau, sigma))?;
    let nf = n as f64;
    let amp = libm::sqrt(2.0 / PI) * libm::sin(nf * sigma);
    Ok(C64::new(amp * libm::cos(nf * tau), amp * libm::sin(nf * tau)))
}

pub fn mode_weight(n: usize) -> f64 {
    1.0 / (2.0 * n as f64)
}

/// Summation weights for the partial sums.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Summation {
    Plain,
    /// (C,1) means, weight 1 − n/(N+1) on mode n.
    Cesaro,
}

impl Summation {
    fn weight(self, n: usize, modes: usize) -> f64 {
        match self {
            Summation::Plain => 1.0,
            Summation::Cesaro => 1.0 - n as f64 / (modes as f64 + 1.0),
        }
    }
}

/// ω_N(x, y) = Σ_{n ≤ N} d_n conj(u_n(x)) u_n(y).
pub fn hadamard_omega(x: Point, y: Point, modes: usize) -> Result<C64, PropagatorError> {
    check(x)?;
    check(y)?;
    let mut acc = C64::new(0.0, 0.0);
    for n in 1..=modes {
        acc += mode_function(n, x.0, x.1)?.conj() * mode_function(n, y.0, y.1)? * mode_weight(n);
    }
    Ok(acc)
}

/// Δ_N = −i(ω_N(x, y) − ω_N(y, x)), summed in closed real form.
pub fn causal_mode_sum(x: Point, y: Point, modes: usize, summation: Summation) -> Result<f64, PropagatorError> {
    check(x)?;
    check(y)?;
    let t = x.0 - y.0;
    let mut acc = 0.0;
    for n in 1..=modes {
        let nf = n as f64;
        acc += summation.weight(n, modes) * libm::sin(nf * x.1) * libm::sin(nf * y.1) * libm::sin(nf * t) / nf;
    }
    Ok(-2.0 / PI * acc)
}

/// Flat 1+1 kernel in the convention fixed by the mode sum.
fn free_kernel(t: f64, s: f64) -> f64 {
    if t.abs() > s.abs() {
        -0.5 * t.signum()
    } else {
        0.0
    }
}

/// Distance of u to the nearest multiple of 2π.
fn dist_2pi(u: f64) -> f64 {
    let r = u.rem_euclid(TAU);
    r.min(TAU - r)
}

/// Smallest distance to 2πZ of the null combinations t ± (σ_x ∓ σ_y).
pub fn light_cone_clearance(x: Point, y: Point) -> f64 {
    let t = x.0 - y.0;
    let a = x.1 - y.1;
    let b = x.1 + y.1;
    [t + a, t - a, t + b, t - b].iter().map(|&u| dist_2pi(u)).fold(f64::INFINITY, f64::min)
}

/// Odd 2π-periodic extension: sources at ±σ_y + 2πk with alternating signs.
pub fn causal_image(x: Point, y: Point) -> Result<f64, PropagatorError> {
    check(x)?;
    check(y)?;
    let t = x.0 - y.0;
    if t == 0.0 {
        return if x == y { Err(PropagatorError::OnLightCone { x, y }) } else { Ok(0.0) };
    }
    if light_cone_clearance(x, y) == 0.0 {
        return Err(PropagatorError::OnLightCone { x, y });
    }
    let reach = (t.abs() / TAU).ceil() as i64 + 1;
    let mut acc = 0.0;
    for k in -reach..=reach {
        let shift = TAU * k as f64;
        acc += free_kernel(t, x.1 - y.1 - shift) - free_kernel(t, x.1 + y.1 - shift);
    }
    Ok(acc)
}

/// |Δ − Δ_N| ≤ C/(N+1) at clearance δ, with C = (2/π)/sin(δ/2).
pub fn tail_constant(clearance: f64) -> f64 {
    2.0 / PI / libm::sin(clearance / 2.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    ModeSum { modes: usize, summation: Summation },
    Images,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelKind {
    Causal,
    Retarded,
    Advanced,
    Dirac,
    Hadamard,
    SymmetricH,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PropagatorKernel {
    pub kind: KernelKind,
    pub method: Method,
}

impl PropagatorKernel {
    pub fn new(kind: KernelKind, method: Method) -> Self {
        PropagatorKernel { kind, method }
    }

    fn causal(&self, x: Point, y: Point) -> Result<f64, PropagatorError> {
        match self.method {
            Method::ModeSum { modes, summation } => causal_mode_sum(x, y, modes, summation),
            Method::Images => causal_image(x, y),
        }
    }

    /// Δ_R = θ(τ_x − τ_y)Δ and Δ_A = −θ(τ_y − τ_x)Δ.
    pub fn retarded_advanced(&self, x: Point, y: Point) -> Result<(f64, f64), PropagatorError> {
        let d = self.causal(x, y)?;
        let t = x.0 - y.0;
        if t == 0.0 && light_cone_clearance(x, y) == 0.0 {
            return Err(PropagatorError::OnLightCone { x, y });
        }
        Ok(if t > 0.0 { (d, 0.0) } else if t < 0.0 { (0.0, -d) } else { (0.0, 0.0) })
    }

    /// ω needs a mode sum; the image method has no Hadamard part.
    fn omega(&self, x: Point, y: Point) -> Result<C64, PropagatorError> {
        match self.method {
            Method::ModeSum { modes, .. } => hadamard_omega(x, y, modes),
            Method::Images => {
                let mut w = hadamard_omega(x, y, IMAGE_OMEGA_MODES)?;
                w.im = 0.5 * causal_image(x, y)?;
                Ok(w)
            }
        }
    }

    pub fn eval(&self, x: Point, y: Point) -> Result<C64, PropagatorError> {
        match self.kind {
            KernelKind::Causal => Ok(C64::new(self.causal(x, y)?, 0.0)),
            KernelKind::Retarded => Ok(C64::new(self.retarded_advanced(x, y)?.0, 0.0)),
            KernelKind::Advanced => Ok(C64::new(self.retarded_advanced(x, y)?.1, 0.0)),
            KernelKind::Dirac => {
                let (r, a) = self.retarded_advanced(x, y)?;
                Ok(C64::new(0.0, 0.5 * (a + r)))
            }
            KernelKind::Hadamard => self.omega(x, y),
            KernelKind::SymmetricH => Ok(C64::new(self.omega(x, y)?.re, 0.0)),
        }
    }
}

/// Modes used for Re ω when the causal part comes from images.
const IMAGE_OMEGA_MODES: usize = 200;

#[derive(Clone, Debug, PartialEq)]
pub struct OracleLevel {
    pub modes: usize,
    pub max_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleReport {
    pub levels: Vec<OracleLevel>,
    /// max over pairs and levels of N·|Δ_N − Δ_image|.
    pub fitted_constant: f64,
    /// tail_constant at the smallest clearance among the pairs.
    pub theory_constant: f64,
    pub min_clearance: f64,
}

impl OracleReport {
    pub fn decreasing(&self) -> bool {
        self.levels.windows(2).all(|w| w[1].max_error < w[0].max_error)
    }

    pub fn within_envelope(&self) -> bool {
        self.levels.iter().all(|l| l.max_error <= self.fitted_constant / l.modes as f64 + 1e-15)
            && self.fitted_constant <= self.theory_constant
    }
}

pub fn oracle_study(pairs: &[(Point, Point)], modes: &[usize], summation: Summation) -> Result<OracleReport, PropagatorError> {
    let exact: Vec<f64> = pairs.iter().map(|&(x, y)| causal_image(x, y)).collect::<Result<_, _>>()?;
    let mut levels = Vec::new();
    let mut fitted: f64 = 0.0;
    for &m in modes {
        let mut worst: f64 = 0.0;
        for (&(x, y), e) in pairs.iter().zip(&exact) {
            worst = worst.max((causal_mode_sum(x, y, m, summation)? - e).abs());
        }
        fitted = fitted.max(worst * m as f64);
        levels.push(OracleLevel { modes: m, max_error: worst });
    }
    let min_clearance = pairs.iter().map(|&(x, y)| light_cone_clearance(x, y)).fold(f64::INFINITY, f64::min);
    Ok(OracleReport { levels, fitted_constant: fitted, theory_constant: tail_constant(min_clearance), min_clearance })
}
