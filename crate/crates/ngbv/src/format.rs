//! Canonical JSON for polynomials: monomials in sorted order, each with an
//! exact Gaussian-rational coefficient and its λ and ħ powers.

use std::fmt;

use ngbv_core::graded::{Monomial, Poly, Symbol, Term};
use ngbv_core::jet::{tensor_components, tensor_index, Deriv, Gen, Kind, Polynomial};
use ngbv_core::scalar::{cq, Q};
use ngbv_core::star::{PhaseFunctional, Smeared};
use serde::{Deserialize, Serialize};

pub const SCHEMA: &str = "ngbv-polynomial/1";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JsonTerm {
    pub mono: Vec<String>,
    pub re_num: i128,
    pub re_den: i128,
    pub im_num: i128,
    pub im_den: i128,
    pub lambda_pow: i32,
    pub hbar_pow: i32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JsonPoly {
    pub schema: String,
    pub terms: Vec<JsonTerm>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError(pub String);

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ParseError {}

pub trait SymbolText: Symbol + Sized {
    fn to_text(&self) -> String;
    fn from_text(s: &str) -> Result<Self, ParseError>;
}

const KINDS: [Kind; 9] = [
    Kind::Phi,
    Kind::C,
    Kind::Cbar,
    Kind::B,
    Kind::PhiDagger,
    Kind::CDagger,
    Kind::CbarDagger,
    Kind::BDagger,
    Kind::Tensor,
];

fn kind_from_name(s: &str) -> Option<Kind> {
    KINDS.iter().copied().find(|k| k.name() == s)
}

/// Splits "Name[i]" into its kind and index.
fn kind_index(s: &str) -> Result<(Kind, usize), ParseError> {
    let bad = || ParseError(format!("bad symbol '{}'", s));
    let (name, rest) = s.split_once('[').ok_or_else(bad)?;
    let idx = rest.strip_suffix(']').ok_or_else(bad)?.parse().map_err(|_| bad())?;
    let kind = kind_from_name(name).filter(|k| *k != Kind::Tensor).ok_or_else(bad)?;
    Ok((kind, idx))
}

impl SymbolText for Gen {
    fn to_text(&self) -> String {
        self.to_string()
    }

    fn from_text(s: &str) -> Result<Self, ParseError> {
        let mut rest = s;
        let mut dirs = Vec::new();
        while let Some(r) = rest.strip_prefix('d') {
            match r.chars().next().and_then(|c| c.to_digit(10)) {
                Some(mu) => {
                    dirs.push(mu as usize);
                    rest = &r[1..];
                }
                None => break,
            }
        }
        if dirs.iter().any(|&mu| mu >= ngbv_core::jet::MAX_D) {
            return Err(ParseError(format!("derivative direction out of range in '{}'", s)));
        }
        let deriv = Deriv::of(&dirs);
        if let Some(t) = rest.strip_prefix('t') {
            let comps: Result<Vec<u8>, _> = t.split('_').filter(|x| !x.is_empty()).map(|x| x.parse::<u8>()).collect();
            let comps = comps.map_err(|_| ParseError(format!("bad tensor symbol '{}'", s)))?;
            let g = Gen { kind: Kind::Tensor, index: tensor_index(&comps), deriv };
            debug_assert_eq!(tensor_components(g.index).len(), comps.len());
            return Ok(g);
        }
        let (kind, idx) = kind_index(rest)?;
        Ok(Gen::new(kind, idx).with_deriv(deriv))
    }
}

impl SymbolText for Smeared {
    fn to_text(&self) -> String {
        format!("{}[{}]@f{}", self.kind.name(), self.index, self.test)
    }

    fn from_text(s: &str) -> Result<Self, ParseError> {
        let bad = || ParseError(format!("bad smeared symbol '{}'", s));
        let (head, test) = s.split_once("@f").ok_or_else(bad)?;
        let (kind, index) = kind_index(head)?;
        Ok(Smeared { kind, index, test: test.parse().map_err(|_| bad())? })
    }
}

pub fn to_json<S: SymbolText>(p: &Poly<S>) -> JsonPoly {
    let terms = p
        .iter()
        .map(|(t, c)| JsonTerm {
            mono: t.mono.symbols().iter().map(|s| s.to_text()).collect(),
            re_num: *c.re.numer(),
            re_den: *c.re.denom(),
            im_num: *c.im.numer(),
            im_den: *c.im.denom(),
            lambda_pow: t.lambda,
            hbar_pow: t.hbar,
        })
        .collect();
    JsonPoly { schema: SCHEMA.into(), terms }
}

pub fn from_json<S: SymbolText>(j: &JsonPoly) -> Result<Poly<S>, ParseError> {
    if j.schema != SCHEMA {
        return Err(ParseError(format!("unsupported schema '{}'", j.schema)));
    }
    let mut p = Poly::zero();
    for t in &j.terms {
        if t.re_den == 0 || t.im_den == 0 {
            return Err(ParseError("zero denominator".into()));
        }
        let word: Vec<S> = t.mono.iter().map(|s| S::from_text(s)).collect::<Result<_, _>>()?;
        let c = cq(Q::new(t.re_num, t.re_den), Q::new(t.im_num, t.im_den));
        if let Some((neg, mono)) = Monomial::from_word(word) {
            p.add_term(Term { mono, lambda: t.lambda_pow, hbar: t.hbar_pow }, if neg { -c } else { c });
        }
    }
    Ok(p)
}

pub fn to_string<S: SymbolText>(p: &Poly<S>) -> String {
    serde_json::to_string_pretty(&to_json(p)).expect("serializable")
}

pub fn parse_polynomial(text: &str) -> Result<Polynomial, ParseError> {
    let j: JsonPoly = serde_json::from_str(text).map_err(|e| ParseError(e.to_string()))?;
    from_json(&j)
}

pub fn parse_functional(text: &str) -> Result<PhaseFunctional, ParseError> {
    let j: JsonPoly = serde_json::from_str(text).map_err(|e| ParseError(e.to_string()))?;
    from_json(&j)
}

/// Human-readable rendering, one term per line.
pub fn pretty<S: SymbolText>(p: &Poly<S>) -> String {
    if p.is_zero() {
        return "0".into();
    }
    let mut out = String::new();
    for (t, c) in p.iter() {
        let coeff = if c.im == Q::from_integer(0) {
            format!("{}", c.re)
        } else if c.re == Q::from_integer(0) {
            format!("{}i", c.im)
        } else {
            format!("({} + {}i)", c.re, c.im)
        };
        let mono: Vec<String> = t.mono.symbols().iter().map(|s| s.to_text()).collect();
        let body = if mono.is_empty() { "1".to_string() } else { mono.join(" ") };
        let mut powers = String::new();
        if t.lambda != 0 {
            powers.push_str(&format!(" λ^{}", t.lambda));
        }
        if t.hbar != 0 {
            powers.push_str(&format!(" ħ^{}", t.hbar));
        }
        out.push_str(&format!("{} {}{}\n", coeff, body, powers));
    }
    out
}
