//! Symbolic vocabulary shared by ground-truth systems, candidate libraries and
//! discovered models: primitive features, monomials over them, and weighted
//! terms.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Pointwise signal feature a monomial can be built from.
///
/// Declaration order is the canonical factor order used for rendering:
/// rate factors first, then the drive, then the states.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Primitive {
    VDot,
    AbsVDot,
    V,
    AbsV,
    D,
    AbsD,
    Y,
    AbsY,
}

impl Primitive {
    pub fn symbol(self) -> &'static str {
        match self {
            Primitive::V => "v",
            Primitive::VDot => "v\u{307}",
            Primitive::AbsV => "|v|",
            Primitive::AbsVDot => "|v\u{307}|",
            Primitive::D => "d",
            Primitive::AbsD => "|d|",
            Primitive::Y => "y",
            Primitive::AbsY => "|y|",
        }
    }

    pub fn is_latent(self) -> bool {
        matches!(self, Primitive::Y | Primitive::AbsY)
    }

    pub fn is_rate(self) -> bool {
        matches!(self, Primitive::VDot | Primitive::AbsVDot)
    }

    #[inline]
    pub fn eval(self, p: &Point) -> f64 {
        match self {
            Primitive::V => p.v,
            Primitive::VDot => p.v_dot,
            Primitive::AbsV => p.v.abs(),
            Primitive::AbsVDot => p.v_dot.abs(),
            Primitive::D => p.d,
            Primitive::AbsD => p.d.abs(),
            Primitive::Y => p.y,
            Primitive::AbsY => p.y.abs(),
        }
    }
}

/// Raw signal values at one instant.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Point {
    pub v: f64,
    pub v_dot: f64,
    pub d: f64,
    pub y: f64,
}

/// Product of primitives, stored as a sorted multiset.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Monomial(Vec<Primitive>);

impl Monomial {
    pub fn new(mut factors: Vec<Primitive>) -> Self {
        factors.sort();
        Monomial(factors)
    }

    pub fn factors(&self) -> &[Primitive] {
        &self.0
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    pub fn uses_latent(&self) -> bool {
        self.0.iter().any(|p| p.is_latent())
    }

    pub fn rate_factor_count(&self) -> usize {
        self.0.iter().filter(|p| p.is_rate()).count()
    }

    #[inline]
    pub fn eval(&self, p: &Point) -> f64 {
        self.0.iter().fold(1.0, |acc, f| acc * f.eval(p))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        let mut first = true;
        let mut i = 0;
        while i < self.0.len() {
            let p = self.0[i];
            let mut power = 1;
            while i + power < self.0.len() && self.0[i + power] == p {
                power += 1;
            }
            if !first {
                write!(f, "\u{b7}")?;
            }
            first = false;
            write!(f, "{}", p.symbol())?;
            if power > 1 {
                write!(f, "^{power}")?;
            }
            i += power;
        }
        Ok(())
    }
}

/// `coefficient * monomial`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coefficient: f64,
    pub monomial: Monomial,
}

impl Term {
    pub fn new(coefficient: f64, factors: &[Primitive]) -> Self {
        Self {
            coefficient,
            monomial: Monomial::new(factors.to_vec()),
        }
    }
}

/// Right-hand side `sum_k c_k m_k(point)` of one state equation.
#[inline]
pub fn eval_terms(terms: &[Term], p: &Point) -> f64 {
    terms
        .iter()
        .map(|t| t.coefficient * t.monomial.eval(p))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use Primitive::*;

    #[test]
    fn monomial_is_order_independent() {
        assert_eq!(Monomial::new(vec![D, AbsVDot]), Monomial::new(vec![AbsVDot, D]));
    }

    #[test]
    fn display_uses_canonical_order() {
        assert_eq!(Monomial::new(vec![V, AbsVDot]).to_string(), "|v\u{307}|\u{b7}v");
        assert_eq!(Monomial::new(vec![Y, AbsD, VDot]).to_string(), "v\u{307}\u{b7}|d|\u{b7}y");
        assert_eq!(Monomial::new(vec![V, V, D]).to_string(), "v^2\u{b7}d");
    }

    #[test]
    fn evaluation() {
        let p = Point {
            v: -0.5,
            v_dot: -2.0,
            d: 0.25,
            y: -1.0,
        };
        assert_eq!(Monomial::new(vec![AbsVDot, V]).eval(&p), -1.0);
        assert_eq!(Monomial::new(vec![VDot, AbsD, Y]).eval(&p), 0.5);
        let terms = [Term::new(2.0, &[AbsY]), Term::new(-1.0, &[D, D])];
        assert_eq!(eval_terms(&terms, &p), 2.0 - 0.0625);
    }
}
