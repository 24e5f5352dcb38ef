//! Problem instances: domain types, the JSON instance format, an infix
//! expression grammar, and a seeded generator of convex instances.

mod generate;
mod json;
mod parse;
mod print;

pub use generate::{generate_instance, GeneratorSpec};
pub use json::{parse_model, serialize_model};
pub use parse::{parse_expr, parse_expr_str, ParseError};
pub use print::print_expr;

use crate::expr::{classify_curvature, Curvature, Expr};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("instance file is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{context}: {source}")]
    Expr {
        context: String,
        #[source]
        source: ParseError,
    },
    #[error("constraint {index} uses relation {relation:?}; only \"<=\" is supported (equalities are out of scope)")]
    UnsupportedRelation { index: usize, relation: String },
    #[error("{0}")]
    Invalid(String),
}

/// Domain of a decision variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Continuous,
    Binary,
    Integer,
}

impl Domain {
    pub fn is_discrete(self) -> bool {
        matches!(self, Domain::Binary | Domain::Integer)
    }
}

/// A decision variable: name, domain, and optional bounds. Binary variables
/// are implicitly bounded in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableMeta {
    pub name: String,
    pub domain: Domain,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl VariableMeta {
    pub fn continuous(name: &str, lower: Option<f64>, upper: Option<f64>) -> Self {
        VariableMeta {
            name: name.to_string(),
            domain: Domain::Continuous,
            lower,
            upper,
        }
    }

    pub fn binary(name: &str) -> Self {
        VariableMeta {
            name: name.to_string(),
            domain: Domain::Binary,
            lower: None,
            upper: None,
        }
    }

    pub fn integer(name: &str, lower: f64, upper: f64) -> Self {
        VariableMeta {
            name: name.to_string(),
            domain: Domain::Integer,
            lower: Some(lower),
            upper: Some(upper),
        }
    }

    /// Effective lower bound: binaries are always in `[0, 1]`.
    pub fn effective_lower(&self) -> Option<f64> {
        match self.domain {
            Domain::Binary => Some(0.0),
            _ => self.lower,
        }
    }

    /// Effective upper bound: binaries are always in `[0, 1]`.
    pub fn effective_upper(&self) -> Option<f64> {
        match self.domain {
            Domain::Binary => Some(1.0),
            _ => self.upper,
        }
    }
}

/// Inequality constraint `body <= rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub body: Expr,
    pub rhs: f64,
}

impl Constraint {
    /// Residual `body(x) - rhs`; feasible points have residual <= 0.
    pub fn residual(&self, point: &[f64]) -> Result<f64, crate::expr::ExprError> {
        Ok(crate::expr::eval(&self.body, point)? - self.rhs)
    }
}

/// A minimization instance: variables, inequality constraints, objective.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub name: String,
    pub variables: Vec<VariableMeta>,
    pub constraints: Vec<Constraint>,
    pub objective: Expr,
}

impl Problem {
    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    /// Indices of binary and integer variables, in declaration order.
    pub fn discrete_indices(&self) -> Vec<usize> {
        self.variables
            .iter()
            .enumerate()
            .filter(|(_, v)| v.domain.is_discrete())
            .map(|(i, _)| i)
            .collect()
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    /// Structural checks: in-range variable references, consistent bounds,
    /// binary bounds within `[0, 1]`.
    pub fn validate(&self) -> Result<(), ModelError> {
        let n = self.n_vars();
        if n == 0 {
            return Err(ModelError::Invalid("problem has no variables".into()));
        }
        let check_expr = |what: &str, e: &Expr| -> Result<(), ModelError> {
            if let Some(max) = e.max_var_index() {
                if max >= n {
                    return Err(ModelError::Invalid(format!(
                        "{what} references variable index {max} but the problem has {n} variables"
                    )));
                }
            }
            Ok(())
        };
        check_expr("objective", &self.objective)?;
        for (i, c) in self.constraints.iter().enumerate() {
            check_expr(&format!("constraint {i}"), &c.body)?;
        }
        for v in &self.variables {
            if let (Some(l), Some(u)) = (v.lower, v.upper) {
                if l > u {
                    return Err(ModelError::Invalid(format!(
                        "variable {} has lower bound {l} > upper bound {u}",
                        v.name
                    )));
                }
            }
            if v.domain == Domain::Binary {
                let ok = v.lower.map_or(true, |l| l == 0.0 || l == 1.0)
                    && v.upper.map_or(true, |u| u == 0.0 || u == 1.0);
                if !ok {
                    return Err(ModelError::Invalid(format!(
                        "binary variable {} may only carry bounds within {{0, 1}}",
                        v.name
                    )));
                }
            }
        }
        Ok(())
    }

    /// Curvature of every body that must be convex for the bundled solvers:
    /// the objective and each constraint body. Returns the first offender.
    pub fn first_nonconvex_body(&self) -> Option<(String, Curvature)> {
        let c = classify_curvature(&self.objective);
        if !c.is_convex() {
            return Some(("objective".to_string(), c));
        }
        for (i, con) in self.constraints.iter().enumerate() {
            let c = classify_curvature(&con.body);
            if !c.is_convex() {
                return Some((format!("constraint {i}"), c));
            }
        }
        None
    }
}
