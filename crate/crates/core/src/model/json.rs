//! The JSON instance file format.
//!
//! Top-level keys `name`, `variables`, `objective`, `constraints`, with
//! expressions as infix strings. Canonical output is 2-space indented with
//! keys in that order.

use crate::model::{
    parse_expr, print_expr, Constraint, Domain, ModelError, Problem, VariableMeta,
};
use serde::{Deserialize, Serialize};

#[derive(Serialize, Deserialize)]
struct FileInstance {
    name: String,
    variables: Vec<FileVariable>,
    objective: String,
    constraints: Vec<FileConstraint>,
}

#[derive(Serialize, Deserialize)]
struct FileVariable {
    name: String,
    domain: Domain,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lower: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    upper: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct FileConstraint {
    body: String,
    relation: String,
    rhs: f64,
}

/// Parse an instance file.
pub fn parse_model(text: &str) -> Result<Problem, ModelError> {
    let file: FileInstance = serde_json::from_str(text)?;
    let variables: Vec<VariableMeta> = file
        .variables
        .into_iter()
        .map(|v| VariableMeta {
            name: v.name,
            domain: v.domain,
            lower: v.lower,
            upper: v.upper,
        })
        .collect();

    let objective = parse_expr(&file.objective, &variables).map_err(|e| ModelError::Expr {
        context: "objective".into(),
        source: e,
    })?;

    let mut constraints = Vec::with_capacity(file.constraints.len());
    for (index, c) in file.constraints.into_iter().enumerate() {
        if c.relation != "<=" {
            return Err(ModelError::UnsupportedRelation {
                index,
                relation: c.relation,
            });
        }
        let body = parse_expr(&c.body, &variables).map_err(|e| ModelError::Expr {
            context: format!("constraint {index}"),
            source: e,
        })?;
        constraints.push(Constraint { body, rhs: c.rhs });
    }

    let problem = Problem {
        name: file.name,
        variables,
        constraints,
        objective,
    };
    problem.validate()?;
    Ok(problem)
}

/// Canonical serialization: declaration order preserved, deterministic
/// expression printing, 2-space indentation.
pub fn serialize_model(p: &Problem) -> String {
    let file = FileInstance {
        name: p.name.clone(),
        variables: p
            .variables
            .iter()
            .map(|v| FileVariable {
                name: v.name.clone(),
                domain: v.domain,
                lower: v.lower,
                upper: v.upper,
            })
            .collect(),
        objective: print_expr(&p.objective, &p.variables),
        constraints: p
            .constraints
            .iter()
            .map(|c| FileConstraint {
                body: print_expr(&c.body, &p.variables),
                relation: "<=".to_string(),
                rhs: c.rhs,
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("instance serialization");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
  "name": "minimal",
  "variables": [{"name": "x", "domain": "continuous", "lower": 0.0, "upper": 4.0}],
  "objective": "(x - 1)^2",
  "constraints": []
}"#;

    #[test]
    fn parse_minimal_instance() {
        let p = parse_model(MINIMAL).unwrap();
        assert_eq!(p.n_vars(), 1);
        assert!(p.constraints.is_empty());
        assert_eq!(p.name, "minimal");
    }

    #[test]
    fn serialize_is_deterministic_and_roundtrips() {
        let p = parse_model(MINIMAL).unwrap();
        let s1 = serialize_model(&p);
        let s2 = serialize_model(&p);
        assert_eq!(s1, s2);
        assert_eq!(parse_model(&s1).unwrap(), p);
    }

    #[test]
    fn empty_constraints_section_serializes() {
        let p = parse_model(MINIMAL).unwrap();
        assert!(serialize_model(&p).contains("\"constraints\": []"));
    }

    #[test]
    fn equality_relation_rejected() {
        let text = r#"{
  "name": "eq",
  "variables": [
    {"name": "x", "domain": "continuous"},
    {"name": "y", "domain": "continuous"}
  ],
  "objective": "x + y",
  "constraints": [{"body": "x + y", "relation": "==", "rhs": 1.0}]
}"#;
        let err = parse_model(text).unwrap_err();
        assert!(matches!(err, ModelError::UnsupportedRelation { index: 0, .. }));
    }

    #[test]
    fn equality_inside_expression_rejected() {
        let text = r#"{
  "name": "eq-expr",
  "variables": [
    {"name": "x", "domain": "continuous"},
    {"name": "y", "domain": "continuous"}
  ],
  "objective": "x",
  "constraints": [{"body": "x + y == 1", "relation": "<=", "rhs": 0.0}]
}"#;
        let err = parse_model(text).unwrap_err();
        match err {
            ModelError::Expr { source, .. } => {
                assert!(matches!(
                    source,
                    crate::model::ParseError::EqualityUnsupported { .. }
                ));
            }
            other => panic!("expected expression error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_identifier_rejected() {
        let text = r#"{
  "name": "bad",
  "variables": [{"name": "x", "domain": "continuous"}],
  "objective": "x + q",
  "constraints": []
}"#;
        assert!(matches!(
            parse_model(text).unwrap_err(),
            ModelError::Expr { .. }
        ));
    }

    #[test]
    fn binary_bounds_validated() {
        let text = r#"{
  "name": "bad-binary",
  "variables": [{"name": "b", "domain": "binary", "lower": 0.0, "upper": 3.0}],
  "objective": "b",
  "constraints": []
}"#;
        assert!(matches!(
            parse_model(text).unwrap_err(),
            ModelError::Invalid(_)
        ));
    }
}
