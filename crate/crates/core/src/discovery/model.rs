use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::terms::{Monomial, Term};

/// Left-hand-side symbols of the state equations, in state order.
pub const STATE_SYMBOLS: [&str; 2] = ["\u{1e0b}", "\u{1e8f}"];

/// Regressor that produced a [`SparseModel`], with its settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum FitMethod {
    Stlsq { threshold: f64, max_iter: usize },
    Lasso { alpha: f64, max_iter: usize, tol: f64 },
}

/// Per-state fit summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// `‖Θ ξ − ḋ‖₂` of the returned coefficients.
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Coefficients over a shared monomial library, one vector per state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseModel {
    pub columns: Vec<Monomial>,
    pub coefficients: Vec<Vec<f64>>,
    pub method: FitMethod,
    pub diagnostics: Vec<FitDiagnostics>,
}

impl SparseModel {
    pub fn states(&self) -> usize {
        self.coefficients.len()
    }

    /// STLSQ threshold, if this model came from STLSQ.
    pub fn threshold(&self) -> Option<f64> {
        match self.method {
            FitMethod::Stlsq { threshold, .. } => Some(threshold),
            FitMethod::Lasso { .. } => None,
        }
    }

    /// True when some state equation hit its iteration cap unconverged.
    pub fn warning(&self) -> bool {
        self.diagnostics.iter().any(|d| !d.converged)
    }

    pub fn active(&self, state: usize) -> Vec<usize> {
        self.coefficients[state]
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(j, _)| j)
            .collect()
    }

    pub fn active_count(&self, state: usize) -> usize {
        self.coefficients[state].iter().filter(|c| **c != 0.0).count()
    }

    /// Coefficient of `monomial` in state equation `state` (0 if absent).
    pub fn coefficient(&self, state: usize, monomial: &Monomial) -> f64 {
        self.columns
            .iter()
            .position(|m| m == monomial)
            .map_or(0.0, |j| self.coefficients[state][j])
    }

    /// Nonzero terms of each state equation, in library column order.
    pub fn equations(&self) -> Vec<Vec<Term>> {
        self.coefficients
            .iter()
            .map(|coefs| {
                coefs
                    .iter()
                    .zip(&self.columns)
                    .filter(|(c, _)| **c != 0.0)
                    .map(|(c, m)| Term {
                        coefficient: *c,
                        monomial: m.clone(),
                    })
                    .collect()
            })
            .collect()
    }

    /// One line per state equation, coefficients to 4 significant digits.
    pub fn report(&self) -> String {
        render_equations(&self.equations(), format_significant4)
    }
}

fn format_significant4(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (3 - magnitude).max(0) as usize;
    format!("{:.*}", decimals, x)
}

/// Renders `ḋ = a·m + b·m ...` lines, terms by descending |coefficient|
/// (ties keep their given order), U+2212 for negative signs.
pub fn render_equations(equations: &[Vec<Term>], fmt_abs: impl Fn(f64) -> String) -> String {
    let mut out = String::new();
    for (s, eq) in equations.iter().enumerate() {
        if s > 0 {
            out.push('\n');
        }
        let lhs = STATE_SYMBOLS.get(s).copied().unwrap_or("?");
        let _ = write!(out, "{lhs} = ");
        let mut terms: Vec<&Term> = eq.iter().filter(|t| t.coefficient != 0.0).collect();
        terms.sort_by(|a, b| b.coefficient.abs().total_cmp(&a.coefficient.abs()));
        if terms.is_empty() {
            out.push('0');
            continue;
        }
        for (i, t) in terms.iter().enumerate() {
            let neg = t.coefficient < 0.0;
            match (i, neg) {
                (0, true) => out.push('\u{2212}'),
                (0, false) => {}
                (_, true) => out.push_str(" \u{2212} "),
                (_, false) => out.push_str(" + "),
            }
            let _ = write!(out, "{}\u{b7}{}", fmt_abs(t.coefficient.abs()), t.monomial);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::terms::Primitive::*;

    #[test]
    fn significant_digits() {
        assert_eq!(format_significant4(0.39984), "0.3998");
        assert_eq!(format_significant4(5.0), "5.000");
        assert_eq!(format_significant4(0.0012346), "0.001235");
        assert_eq!(format_significant4(123.456), "123.5");
    }

    #[test]
    fn report_orders_by_magnitude() {
        let model = SparseModel {
            columns: vec![Monomial::new(vec![VDot]), Monomial::new(vec![AbsVDot, D])],
            coefficients: vec![vec![0.2, -0.85]],
            method: FitMethod::Stlsq {
                threshold: 0.01,
                max_iter: 10,
            },
            diagnostics: vec![],
        };
        assert_eq!(model.report(), "\u{1e0b} = \u{2212}0.8500\u{b7}|v\u{307}|\u{b7}d + 0.2000\u{b7}v\u{307}");
        assert_eq!(model.active(0), vec![0, 1]);
        assert_eq!(model.coefficient(0, &Monomial::new(vec![D, AbsVDot])), -0.85);
        assert_eq!(model.coefficient(0, &Monomial::new(vec![V])), 0.0);
    }
}
