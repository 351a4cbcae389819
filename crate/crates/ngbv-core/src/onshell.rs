//! Finite-difference residual of the Nambu–Goto field equation
//! ∂_μ(√(−g) g^{μν} ∂_νX^a) = 0 for parametrized worldsheets.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;
use core::fmt;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Embedding {
    /// (τ, σ, 0, …).
    FlatStrip,
    /// (τ, cos τ cos σ, cos τ sin σ, 0, …).
    OscillatingCylinder,
    /// The cylinder with amplitude·cos τ cos 2σ added in the fourth target direction.
    PerturbedCylinder { amplitude: f64 },
}

impl Embedding {
    pub fn name(&self) -> &'static str {
        match self {
            Embedding::FlatStrip => "flat_strip",
            Embedding::OscillatingCylinder => "oscillating_cylinder",
            Embedding::PerturbedCylinder { .. } => "perturbed_cylinder",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "flat_strip" => Some(Embedding::FlatStrip),
            "oscillating_cylinder" => Some(Embedding::OscillatingCylinder),
            "perturbed_cylinder" => Some(Embedding::PerturbedCylinder { amplitude: 0.05 }),
            _ => None,
        }
    }

    pub fn min_target_dim(&self) -> usize {
        match self {
            Embedding::FlatStrip => 3,
            Embedding::OscillatingCylinder => 3,
            Embedding::PerturbedCylinder { .. } => 4,
        }
    }

    pub fn eval(&self, tau: f64, sigma: f64, out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        out[0] = tau;
        match *self {
            Embedding::FlatStrip => out[1] = sigma,
            Embedding::OscillatingCylinder | Embedding::PerturbedCylinder { .. } => {
                let c = libm::cos(tau);
                out[1] = c * libm::cos(sigma);
                out[2] = c * libm::sin(sigma);
                if let Embedding::PerturbedCylinder { amplitude } = *self {
                    out[3] = amplitude * c * libm::cos(2.0 * sigma);
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum OnShellError {
    BadGrid,
    TargetTooSmall { need: usize, n: usize },
    /// The induced metric is degenerate or not Lorentzian at (τ, σ).
    Degenerate { tau: f64, sigma: f64 },
}

impl fmt::Display for OnShellError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OnShellError::BadGrid => write!(f, "grid needs at least 3 points per direction and a positive extent"),
            OnShellError::TargetTooSmall { need, n } => write!(f, "embedding needs n >= {}, got {}", need, n),
            OnShellError::Degenerate { tau, sigma } => {
                write!(f, "induced metric degenerates near tau={:.6}, sigma={:.6}", tau, sigma)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NumericBackground {
    pub embedding: Embedding,
    pub n: usize,
    pub tau: (f64, f64),
    pub sigma: (f64, f64),
    pub points: (usize, usize),
}

/// |det g| below this fraction of max(1, Euclidean Gram scale) counts as
/// degenerate.
const DEGENERACY: f64 = 1e-6;

impl NumericBackground {
    pub fn new(embedding: Embedding, n: usize, tau: (f64, f64), sigma: (f64, f64), points: (usize, usize)) -> Self {
        NumericBackground { embedding, n, tau, sigma, points }
    }

    pub fn flat_strip(points: usize) -> Self {
        Self::new(Embedding::FlatStrip, 4, (-1.0, 1.0), (0.0, core::f64::consts::PI), (points, points))
    }

    /// The cylinder restricted to |τ| ≤ π/2 − ε, away from its degenerate slices.
    pub fn oscillating_cylinder(points: usize, eps: f64) -> Self {
        Self::new(
            Embedding::OscillatingCylinder,
            4,
            (-FRAC_PI_2 + eps, FRAC_PI_2 - eps),
            (0.0, 2.0 * core::f64::consts::PI),
            (points, points),
        )
    }

    pub fn perturbed_cylinder(points: usize, eps: f64, amplitude: f64) -> Self {
        let mut b = Self::oscillating_cylinder(points, eps);
        b.embedding = Embedding::PerturbedCylinder { amplitude };
        b
    }

    pub fn spacing(&self) -> (f64, f64) {
        let (nt, ns) = self.points;
        ((self.tau.1 - self.tau.0) / (nt - 1) as f64, (self.sigma.1 - self.sigma.0) / (ns - 1) as f64)
    }

    fn x(&self, tau: f64, sigma: f64) -> Vec<f64> {
        let mut v = vec![0.0; self.n];
        self.embedding.eval(tau, sigma, &mut v);
        v
    }

    /// Central-difference tangent vectors ∂_μX at a point.
    fn tangents(&self, tau: f64, sigma: f64, h: (f64, f64)) -> [Vec<f64>; 2] {
        let xp = self.x(tau + h.0, sigma);
        let xm = self.x(tau - h.0, sigma);
        let yp = self.x(tau, sigma + h.1);
        let ym = self.x(tau, sigma - h.1);
        [
            xp.iter().zip(&xm).map(|(a, b)| (a - b) / (2.0 * h.0)).collect(),
            yp.iter().zip(&ym).map(|(a, b)| (a - b) / (2.0 * h.1)).collect(),
        ]
    }

    /// Flux F^μ_a = √(−g) g^{μν} ∂_νX^a at a point.
    fn flux(&self, tau: f64, sigma: f64, h: (f64, f64)) -> Result<[Vec<f64>; 2], OnShellError> {
        let t = self.tangents(tau, sigma, h);
        let dot = |u: &[f64], v: &[f64]| -> f64 { -u[0] * v[0] + u[1..].iter().zip(&v[1..]).map(|(a, b)| a * b).sum::<f64>() };
        let g00 = dot(&t[0], &t[0]);
        let g01 = dot(&t[0], &t[1]);
        let g11 = dot(&t[1], &t[1]);
        let det = g00 * g11 - g01 * g01;
        let e0: f64 = t[0].iter().map(|x| x * x).sum();
        let e1: f64 = t[1].iter().map(|x| x * x).sum();
        if det > -DEGENERACY * (e0 * e1).max(1.0) {
            return Err(OnShellError::Degenerate { tau, sigma });
        }
        let sq = libm::sqrt(-det);
        // √(−g) g^{μν} = √(−g)/det · adj(g)
        let k = sq / det;
        let ginv = [[k * g11, -k * g01], [-k * g01, k * g00]];
        let mut out = [vec![0.0; self.n], vec![0.0; self.n]];
        for mu in 0..2 {
            for a in 0..self.n {
                out[mu][a] = ginv[mu][0] * t[0][a] + ginv[mu][1] * t[1][a];
            }
        }
        Ok(out)
    }

    /// The residual |∂_μ F^μ| at one point.
    pub fn residual_at(&self, tau: f64, sigma: f64) -> Result<f64, OnShellError> {
        self.residual_with_step(tau, sigma, self.spacing())
    }

    fn residual_with_step(&self, tau: f64, sigma: f64, h: (f64, f64)) -> Result<f64, OnShellError> {
        self.flux(tau, sigma, h)?;
        let fp = self.flux(tau + h.0, sigma, h)?;
        let fm = self.flux(tau - h.0, sigma, h)?;
        let gp = self.flux(tau, sigma + h.1, h)?;
        let gm = self.flux(tau, sigma - h.1, h)?;
        let mut worst: f64 = 0.0;
        for a in 0..self.n {
            let div = (fp[0][a] - fm[0][a]) / (2.0 * h.0) + (gp[1][a] - gm[1][a]) / (2.0 * h.1);
            worst = worst.max(libm::fabs(div));
        }
        Ok(worst)
    }
}

/// Maximum of the field-equation residual over the interior grid points.
pub fn verify_on_shell(nbg: &NumericBackground) -> Result<f64, OnShellError> {
    let (nt, ns) = nbg.points;
    if nt < 3 || ns < 3 || nbg.tau.1 <= nbg.tau.0 || nbg.sigma.1 <= nbg.sigma.0 {
        return Err(OnShellError::BadGrid);
    }
    let need = nbg.embedding.min_target_dim();
    if nbg.n < need {
        return Err(OnShellError::TargetTooSmall { need, n: nbg.n });
    }
    let h = nbg.spacing();
    let mut worst: f64 = 0.0;
    for i in 1..nt - 1 {
        let tau = nbg.tau.0 + i as f64 * h.0;
        for j in 1..ns - 1 {
            let sigma = nbg.sigma.0 + j as f64 * h.1;
            worst = worst.max(nbg.residual_at(tau, sigma)?);
        }
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergencePoint {
    pub points: usize,
    pub spacing: f64,
    pub residual: f64,
}

/// Residuals at the interior points of the coarsest grid, with stencil
/// steps taken from each refinement, so that every level samples the same
/// points.
pub fn convergence_study(base: &NumericBackground, sizes: &[usize]) -> Result<Vec<ConvergencePoint>, OnShellError> {
    let coarse = sizes.iter().copied().min().ok_or(OnShellError::BadGrid)?;
    let mut probe = base.clone();
    probe.points = (coarse, coarse);
    verify_on_shell(&probe)?;
    let hc = probe.spacing();
    sizes
        .iter()
        .map(|&p| {
            let mut b = base.clone();
            b.points = (p, p);
            let h = b.spacing();
            let mut worst: f64 = 0.0;
            for i in 1..coarse - 1 {
                for j in 1..coarse - 1 {
                    let tau = base.tau.0 + i as f64 * hc.0;
                    let sigma = base.sigma.0 + j as f64 * hc.1;
                    worst = worst.max(b.residual_with_step(tau, sigma, h)?);
                }
            }
            Ok(ConvergencePoint { points: p, spacing: h.0, residual: worst })
        })
        .collect()
}

/// Least-squares slope of log(residual) against log(spacing).
pub fn observed_order(study: &[ConvergencePoint]) -> f64 {
    let pts: Vec<(f64, f64)> = study
        .iter()
        .filter(|p| p.residual > 0.0)
        .map(|p| (libm::log(p.spacing), libm::log(p.residual)))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}
