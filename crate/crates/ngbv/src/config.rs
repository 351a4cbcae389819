//! Run configuration: a TOML file plus command-line overrides.

use std::fmt;
use std::path::{Path, PathBuf};

use ngbv_core::background::Background;
use ngbv_core::scalar::Q;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Largest accepted on-shell residual for the flat strip.
    pub flat_residual: f64,
    /// Accepted band for the observed convergence order of the cylinder.
    pub order_band: (f64, f64),
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { flat_residual: 1e-12, order_band: (1.8, 2.2) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub d: usize,
    pub n: usize,
    /// λ truncation order K.
    pub order: i32,
    /// Jet order J of the symbolic suites.
    pub jet_order: usize,
    /// Jet order and polynomial degree of the cohomology truncation.
    pub cohomology_jet_order: usize,
    pub cohomology_degree: usize,
    /// Highest string mode N_max.
    pub n_max: usize,
    /// Occupation cutoff M of the Fock basis.
    pub cutoff: usize,
    /// Mode counts of the propagator sweep.
    pub modes: Vec<usize>,
    /// Number of random point pairs and their light-cone clearance.
    pub pairs: usize,
    pub clearance: f64,
    pub seed: u64,
    pub background: String,
    /// Optional dX^a_μ rows as rationals, e.g. [["1", "0", "0"], ["0", "1", "1/2"]].
    pub dx: Option<Vec<Vec<String>>>,
    /// Grid sizes of the on-shell convergence study.
    pub grid: Vec<usize>,
    pub tolerances: Tolerances,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            d: 2,
            n: 4,
            order: 2,
            jet_order: 3,
            cohomology_jet_order: 2,
            cohomology_degree: 3,
            n_max: 5,
            cutoff: 3,
            modes: vec![50, 100, 200],
            pairs: 100,
            clearance: 0.1,
            seed: 7,
            background: "flat_strip".into(),
            dx: None,
            grid: vec![50, 100, 200, 400],
            tolerances: Tolerances::default(),
            out: PathBuf::from("out"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ConfigError {
    Io(String),
    Parse(String),
    Invalid(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io(e) => write!(f, "cannot read config: {}", e),
            ConfigError::Parse(e) => write!(f, "cannot parse config: {}", e),
            ConfigError::Invalid(e) => write!(f, "invalid config: {}", e),
        }
    }
}

impl std::error::Error for ConfigError {}

fn invalid(msg: String) -> ConfigError {
    ConfigError::Invalid(msg)
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(e.to_string()))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    /// Desk-scale guard rails.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.d < 2 {
            return Err(invalid(format!("d = {} must be at least 2", self.d)));
        }
        if self.n <= self.d {
            return Err(invalid(format!("n = {} must exceed d = {}", self.n, self.d)));
        }
        if !(0..=4).contains(&self.order) {
            return Err(invalid(format!("order K = {} must lie in 0..=4", self.order)));
        }
        if self.jet_order > 4 || self.cohomology_jet_order > 4 {
            return Err(invalid("jet order J must be at most 4".into()));
        }
        if self.n_max == 0 || self.n_max > 12 {
            return Err(invalid(format!("N_max = {} must lie in 1..=12", self.n_max)));
        }
        if self.cutoff == 0 || self.cutoff > 4 {
            return Err(invalid(format!("cutoff M = {} must lie in 1..=4", self.cutoff)));
        }
        if self.cohomology_degree == 0 || self.cohomology_degree > 4 {
            return Err(invalid("cohomology degree must lie in 1..=4".into()));
        }
        if self.modes.is_empty() || self.modes.contains(&0) {
            return Err(invalid("modes must be a nonempty list of positive counts".into()));
        }
        if self.clearance.is_nan() || self.clearance <= 0.0 {
            return Err(invalid("clearance must be positive".into()));
        }
        if self.grid.len() < 2 || self.grid.iter().any(|&g| g < 8) {
            return Err(invalid("grid needs at least two sizes of at least 8 points".into()));
        }
        if !matches!(self.background.as_str(), "flat_strip" | "custom") {
            return Err(invalid(format!("unknown background '{}'", self.background)));
        }
        if self.background == "custom" && self.dx.is_none() {
            return Err(invalid("custom background needs dx".into()));
        }
        self.symbolic_background().map(|_| ())
    }

    /// The constant background of the symbolic suites.
    pub fn symbolic_background(&self) -> Result<Background, ConfigError> {
        match (&self.background[..], &self.dx) {
            ("custom", Some(rows)) => {
                let dx: Vec<Vec<Q>> = rows
                    .iter()
                    .map(|r| r.iter().map(|s| parse_rational(s)).collect::<Result<_, _>>())
                    .collect::<Result<_, _>>()?;
                Background::new(self.d, self.n, dx).map_err(|e| invalid(format!("{:?}", e)))
            }
            _ => Background::flat_strip(self.d, self.n).map_err(|e| invalid(format!("{:?}", e))),
        }
    }
}

pub fn parse_rational(s: &str) -> Result<Q, ConfigError> {
    let s = s.trim();
    let bad = || invalid(format!("'{}' is not a rational", s));
    match s.split_once('/') {
        Some((a, b)) => {
            let (a, b): (i128, i128) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
            if b == 0 {
                return Err(bad());
            }
            Ok(Q::new(a, b))
        }
        None => Ok(Q::from_integer(s.parse().map_err(|_| bad())?)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn guard_rails() {
        let bad = [
            RunConfig { d: 1, ..Default::default() },
            RunConfig { n: 2, ..Default::default() },
            RunConfig { order: 5, ..Default::default() },
            RunConfig { jet_order: 5, ..Default::default() },
            RunConfig { n_max: 13, ..Default::default() },
            RunConfig { cutoff: 5, ..Default::default() },
            RunConfig { background: "torus".into(), ..Default::default() },
        ];
        for c in bad {
            assert!(matches!(c.validate(), Err(ConfigError::Invalid(_))), "{:?}", c);
        }
    }

    #[test]
    fn toml_round_trip_and_custom_background() {
        let text = r#"
            n = 3
            order = 1
            background = "custom"
            dx = [["1", "0", "0"], ["0", "1", "1/2"]]
        "#;
        let c = RunConfig::from_toml(text).unwrap();
        c.validate().unwrap();
        let bg = c.symbolic_background().unwrap();
        assert_eq!(bg.dx[1][2], Q::new(1, 2));
        let back = RunConfig::from_toml(&toml::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert!(RunConfig::from_toml("colour = 3").is_err());
    }

    #[test]
    fn rationals() {
        assert_eq!(parse_rational("-3/4").unwrap(), Q::new(-3, 4));
        assert_eq!(parse_rational("2").unwrap(), Q::from_integer(2));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
    }
}
