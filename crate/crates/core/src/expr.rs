//! Scalar expression trees over problem variables: evaluation, reverse-mode
//! gradients, and a conservative convexity classifier.
//!
//! The grammar is deliberately small (sums, products, constant powers,
//! negation, `exp`, `log`, `sqrt`) so the curvature rule table stays sound.
//! Division is not representable.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("point has {got} entries but variable index {index} was referenced")]
    PointTooShort { index: usize, got: usize },
    #[error("domain violation: {func}({arg}) is undefined")]
    DomainViolation { func: &'static str, arg: f64 },
    #[error("evaluation produced a NaN (non-finite intermediate in {context})")]
    NotANumber { context: &'static str },
}

/// Expression tree node. Trees are immutable after construction and safe to
/// share across threads.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    /// Real constant.
    Const(f64),
    /// Reference to a variable by index into the owning problem's list.
    Var(usize),
    /// n-ary sum, at least one term.
    Sum(Vec<Expr>),
    /// n-ary product, at least one factor.
    Prod(Vec<Expr>),
    /// Power with a numeric constant exponent.
    Pow(Box<Expr>, f64),
    Neg(Box<Expr>),
    Exp(Box<Expr>),
    Log(Box<Expr>),
    Sqrt(Box<Expr>),
}

/// Curvature of an expression as a function of the problem variables.
///
/// `Affine` counts as both convex and concave. The classifier is
/// conservative: `Unknown` means "not provably one of the others", never
/// that the expression is certainly nonconvex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Curvature {
    Affine,
    Convex,
    Concave,
    Unknown,
}

impl Curvature {
    pub fn is_convex(self) -> bool {
        matches!(self, Curvature::Affine | Curvature::Convex)
    }

    pub fn is_concave(self) -> bool {
        matches!(self, Curvature::Affine | Curvature::Concave)
    }

    fn negated(self) -> Curvature {
        match self {
            Curvature::Affine => Curvature::Affine,
            Curvature::Convex => Curvature::Concave,
            Curvature::Concave => Curvature::Convex,
            Curvature::Unknown => Curvature::Unknown,
        }
    }
}

impl Expr {
    /// Sum constructor that flattens nested sums, matching what the parser
    /// produces so printed expressions round-trip structurally.
    pub fn sum(terms: Vec<Expr>) -> Expr {
        let mut flat = Vec::with_capacity(terms.len());
        for t in terms {
            match t {
                Expr::Sum(inner) => flat.extend(inner),
                other => flat.push(other),
            }
        }
        match flat.len() {
            1 => flat.pop().unwrap(),
            _ => Expr::Sum(flat),
        }
    }

    /// Product constructor that flattens nested products.
    pub fn product(factors: Vec<Expr>) -> Expr {
        let mut flat = Vec::with_capacity(factors.len());
        for f in factors {
            match f {
                Expr::Prod(inner) => flat.extend(inner),
                other => flat.push(other),
            }
        }
        match flat.len() {
            1 => flat.pop().unwrap(),
            _ => Expr::Prod(flat),
        }
    }

    /// Negation that folds bare constants, so `-(2)` and `Const(-2)` are the
    /// same tree.
    pub fn neg(e: Expr) -> Expr {
        match e {
            Expr::Const(c) => Expr::Const(-c),
            other => Expr::Neg(Box::new(other)),
        }
    }

    pub fn pow(base: Expr, exponent: f64) -> Expr {
        Expr::Pow(Box::new(base), exponent)
    }

    pub fn exp(e: Expr) -> Expr {
        Expr::Exp(Box::new(e))
    }

    pub fn log(e: Expr) -> Expr {
        Expr::Log(Box::new(e))
    }

    pub fn sqrt(e: Expr) -> Expr {
        Expr::Sqrt(Box::new(e))
    }

    /// Indices of all variables referenced by the tree, deduplicated and
    /// sorted.
    pub fn variables(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.collect_variables(&mut out);
        out.sort_unstable();
        out.dedup();
        out
    }

    fn collect_variables(&self, out: &mut Vec<usize>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(i) => out.push(*i),
            Expr::Sum(children) | Expr::Prod(children) => {
                for c in children {
                    c.collect_variables(out);
                }
            }
            Expr::Pow(c, _) => c.collect_variables(out),
            Expr::Neg(c) | Expr::Exp(c) | Expr::Log(c) | Expr::Sqrt(c) => {
                c.collect_variables(out)
            }
        }
    }

    /// Largest variable index referenced, if any.
    pub fn max_var_index(&self) -> Option<usize> {
        self.variables().into_iter().max()
    }

    /// Value of the subtree when it references no variables.
    pub fn constant_value(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            Expr::Var(_) => None,
            Expr::Sum(children) => children
                .iter()
                .map(|c| c.constant_value())
                .sum::<Option<f64>>(),
            Expr::Prod(children) => children
                .iter()
                .map(|c| c.constant_value())
                .product::<Option<f64>>(),
            Expr::Pow(c, p) => c.constant_value().map(|v| v.powf(*p)),
            Expr::Neg(c) => c.constant_value().map(|v| -v),
            Expr::Exp(c) => c.constant_value().map(f64::exp),
            Expr::Log(c) => c.constant_value().map(f64::ln),
            Expr::Sqrt(c) => c.constant_value().map(f64::sqrt),
        }
    }
}

/// Evaluate `expr` at `point`. Exact recursive evaluation; `log`/`sqrt`
/// outside their domain and NaN intermediates are reported as errors rather
/// than propagated silently.
pub fn eval(expr: &Expr, point: &[f64]) -> Result<f64, ExprError> {
    let v = eval_inner(expr, point)?;
    if v.is_nan() {
        return Err(ExprError::NotANumber {
            context: "expression evaluation",
        });
    }
    Ok(v)
}

fn eval_inner(expr: &Expr, point: &[f64]) -> Result<f64, ExprError> {
    match expr {
        Expr::Const(c) => Ok(*c),
        Expr::Var(i) => point.get(*i).copied().ok_or(ExprError::PointTooShort {
            index: *i,
            got: point.len(),
        }),
        Expr::Sum(children) => {
            let mut acc = 0.0;
            for c in children {
                acc += eval_inner(c, point)?;
            }
            Ok(acc)
        }
        Expr::Prod(children) => {
            let mut acc = 1.0;
            for c in children {
                acc *= eval_inner(c, point)?;
            }
            Ok(acc)
        }
        Expr::Pow(base, p) => {
            let b = eval_inner(base, point)?;
            let v = b.powf(*p);
            if v.is_nan() {
                return Err(ExprError::DomainViolation { func: "pow", arg: b });
            }
            Ok(v)
        }
        Expr::Neg(c) => Ok(-eval_inner(c, point)?),
        Expr::Exp(c) => Ok(eval_inner(c, point)?.exp()),
        Expr::Log(c) => {
            let a = eval_inner(c, point)?;
            if a <= 0.0 {
                return Err(ExprError::DomainViolation { func: "log", arg: a });
            }
            Ok(a.ln())
        }
        Expr::Sqrt(c) => {
            let a = eval_inner(c, point)?;
            if a < 0.0 {
                return Err(ExprError::DomainViolation { func: "sqrt", arg: a });
            }
            Ok(a.sqrt())
        }
    }
}

// Flattened tape node used by the reverse pass. Children are indices of
// earlier tape entries (post-order), so one forward sweep fills values and
// one backward sweep pushes adjoints.
enum TapeOp {
    Const(f64),
    Var(usize),
    Sum { children: (usize, usize) },
    Prod { children: (usize, usize) },
    Pow { child: usize, exponent: f64 },
    Neg { child: usize },
    Exp { child: usize },
    Log { child: usize },
    Sqrt { child: usize },
}

struct Tape {
    ops: Vec<TapeOp>,
    // (start, end) ranges into `child_index` for the n-ary nodes
    child_index: Vec<usize>,
}

impl Tape {
    fn build(expr: &Expr) -> Tape {
        let mut tape = Tape {
            ops: Vec::new(),
            child_index: Vec::new(),
        };
        tape.push(expr);
        tape
    }

    fn push(&mut self, expr: &Expr) -> usize {
        let op = match expr {
            Expr::Const(c) => TapeOp::Const(*c),
            Expr::Var(i) => TapeOp::Var(*i),
            Expr::Sum(children) => {
                let ids: Vec<usize> = children.iter().map(|c| self.push(c)).collect();
                let start = self.child_index.len();
                self.child_index.extend(ids);
                TapeOp::Sum {
                    children: (start, self.child_index.len()),
                }
            }
            Expr::Prod(children) => {
                let ids: Vec<usize> = children.iter().map(|c| self.push(c)).collect();
                let start = self.child_index.len();
                self.child_index.extend(ids);
                TapeOp::Prod {
                    children: (start, self.child_index.len()),
                }
            }
            Expr::Pow(c, p) => TapeOp::Pow {
                child: self.push(c),
                exponent: *p,
            },
            Expr::Neg(c) => TapeOp::Neg { child: self.push(c) },
            Expr::Exp(c) => TapeOp::Exp { child: self.push(c) },
            Expr::Log(c) => TapeOp::Log { child: self.push(c) },
            Expr::Sqrt(c) => TapeOp::Sqrt { child: self.push(c) },
        };
        self.ops.push(op);
        self.ops.len() - 1
    }
}

/// Gradient of `expr` at `point` by reverse-mode accumulation: one forward
/// sweep over a flattened tape, one adjoint sweep back. Entries for absent
/// variables are zero; the returned vector has `point.len()` entries.
pub fn grad(expr: &Expr, point: &[f64]) -> Result<Vec<f64>, ExprError> {
    let tape = Tape::build(expr);
    let n_ops = tape.ops.len();

    // forward sweep
    let mut values = vec![0.0_f64; n_ops];
    for (k, op) in tape.ops.iter().enumerate() {
        values[k] = match op {
            TapeOp::Const(c) => *c,
            TapeOp::Var(i) => *point.get(*i).ok_or(ExprError::PointTooShort {
                index: *i,
                got: point.len(),
            })?,
            TapeOp::Sum { children } => tape.child_index[children.0..children.1]
                .iter()
                .map(|&c| values[c])
                .sum(),
            TapeOp::Prod { children } => tape.child_index[children.0..children.1]
                .iter()
                .map(|&c| values[c])
                .product(),
            TapeOp::Pow { child, exponent } => {
                let b = values[*child];
                let v = b.powf(*exponent);
                if v.is_nan() {
                    return Err(ExprError::DomainViolation { func: "pow", arg: b });
                }
                v
            }
            TapeOp::Neg { child } => -values[*child],
            TapeOp::Exp { child } => values[*child].exp(),
            TapeOp::Log { child } => {
                let a = values[*child];
                if a <= 0.0 {
                    return Err(ExprError::DomainViolation { func: "log", arg: a });
                }
                a.ln()
            }
            TapeOp::Sqrt { child } => {
                let a = values[*child];
                if a < 0.0 {
                    return Err(ExprError::DomainViolation { func: "sqrt", arg: a });
                }
                a.sqrt()
            }
        };
        if values[k].is_nan() {
            return Err(ExprError::NotANumber {
                context: "forward sweep",
            });
        }
    }

    // reverse sweep
    let mut adjoints = vec![0.0_f64; n_ops];
    let mut gradient = vec![0.0_f64; point.len()];
    adjoints[n_ops - 1] = 1.0;
    for k in (0..n_ops).rev() {
        let a = adjoints[k];
        if a == 0.0 {
            continue;
        }
        match &tape.ops[k] {
            TapeOp::Const(_) => {}
            TapeOp::Var(i) => gradient[*i] += a,
            TapeOp::Sum { children } => {
                for &c in &tape.child_index[children.0..children.1] {
                    adjoints[c] += a;
                }
            }
            TapeOp::Prod { children } => {
                let ids = &tape.child_index[children.0..children.1];
                // partial wrt factor i is the product of the other factors;
                // computed via prefix/suffix products to stay O(n) and avoid
                // dividing by zero-valued factors
                let m = ids.len();
                let mut prefix = vec![1.0; m + 1];
                for (j, &c) in ids.iter().enumerate() {
                    prefix[j + 1] = prefix[j] * values[c];
                }
                let mut suffix = 1.0;
                for j in (0..m).rev() {
                    adjoints[ids[j]] += a * prefix[j] * suffix;
                    suffix *= values[ids[j]];
                }
            }
            TapeOp::Pow { child, exponent } => {
                let b = values[*child];
                let d = if *exponent == 0.0 {
                    0.0
                } else {
                    exponent * b.powf(exponent - 1.0)
                };
                adjoints[*child] += a * d;
            }
            TapeOp::Neg { child } => adjoints[*child] -= a,
            TapeOp::Exp { child } => adjoints[*child] += a * values[k],
            TapeOp::Log { child } => adjoints[*child] += a / values[*child],
            TapeOp::Sqrt { child } => {
                // d/dx sqrt(x) = 1/(2 sqrt(x)); undefined at 0
                let s = values[k];
                adjoints[*child] += a * 0.5 / s;
            }
        }
    }

    if gradient.iter().any(|g| !g.is_finite()) {
        return Err(ExprError::NotANumber {
            context: "reverse sweep",
        });
    }
    Ok(gradient)
}

/// Classify the curvature of `expr` using disciplined-composition rules.
///
/// Sound but incomplete: products of non-constants, odd powers, and other
/// compositions outside the rule table come back `Unknown`. The answer
/// `Convex`/`Concave`/`Affine` is always correct.
pub fn classify_curvature(expr: &Expr) -> Curvature {
    match expr {
        Expr::Const(_) | Expr::Var(_) => Curvature::Affine,
        Expr::Sum(children) => {
            let mut acc = Curvature::Affine;
            for c in children {
                let cur = classify_curvature(c);
                acc = match (acc, cur) {
                    (Curvature::Affine, x) | (x, Curvature::Affine) => x,
                    (Curvature::Convex, Curvature::Convex) => Curvature::Convex,
                    (Curvature::Concave, Curvature::Concave) => Curvature::Concave,
                    _ => Curvature::Unknown,
                };
                if acc == Curvature::Unknown {
                    return Curvature::Unknown;
                }
            }
            acc
        }
        Expr::Prod(children) => {
            // constant * expr keeps or flips curvature by sign; any product
            // of two or more variable factors is out of the rule table
            let mut constant = 1.0;
            let mut variable_part: Option<Curvature> = None;
            for c in children {
                match c.constant_value() {
                    Some(v) => constant *= v,
                    None => {
                        if variable_part.is_some() {
                            return Curvature::Unknown;
                        }
                        variable_part = Some(classify_curvature(c));
                    }
                }
            }
            match variable_part {
                None => Curvature::Affine,
                Some(cur) => {
                    if constant >= 0.0 {
                        cur
                    } else {
                        cur.negated()
                    }
                }
            }
        }
        Expr::Pow(base, p) => {
            let b = classify_curvature(base);
            if *p == 0.0 {
                return Curvature::Affine;
            }
            if *p == 1.0 {
                return b;
            }
            let is_even_positive_int =
                *p > 0.0 && p.fract() == 0.0 && (*p as i64) % 2 == 0;
            if is_even_positive_int && b == Curvature::Affine {
                Curvature::Convex
            } else {
                Curvature::Unknown
            }
        }
        Expr::Neg(c) => classify_curvature(c).negated(),
        Expr::Exp(c) => match classify_curvature(c) {
            // exp is convex and nondecreasing, so exp(convex) stays convex
            Curvature::Affine | Curvature::Convex => Curvature::Convex,
            _ => Curvature::Unknown,
        },
        Expr::Log(c) => match classify_curvature(c) {
            // log is concave and nondecreasing
            Curvature::Affine | Curvature::Concave => Curvature::Concave,
            _ => Curvature::Unknown,
        },
        Expr::Sqrt(c) => match classify_curvature(c) {
            Curvature::Affine | Curvature::Concave => Curvature::Concave,
            _ => Curvature::Unknown,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_expr_str;

    fn e(text: &str, names: &[&str]) -> Expr {
        parse_expr_str(text, names).expect("test expression parses")
    }

    #[test]
    fn eval_quadratic_plus_exp() {
        let f = e("(x-1)^2 + exp(y)", &["x", "y"]);
        assert_eq!(eval(&f, &[1.0, 0.0]).unwrap(), 1.0);
    }

    #[test]
    fn eval_affine() {
        let f = e("3*x - 2*y + 1", &["x", "y"]);
        assert_eq!(eval(&f, &[2.0, 1.0]).unwrap(), 5.0);
    }

    #[test]
    fn eval_log_domain_error() {
        let f = e("log(x)", &["x"]);
        assert!(matches!(
            eval(&f, &[0.0]),
            Err(ExprError::DomainViolation { func: "log", .. })
        ));
    }

    #[test]
    fn eval_sqrt_domain_error() {
        let f = e("sqrt(x)", &["x"]);
        assert!(matches!(
            eval(&f, &[-1.0]),
            Err(ExprError::DomainViolation { func: "sqrt", .. })
        ));
    }

    #[test]
    fn eval_point_too_short() {
        let f = Expr::Var(3);
        assert!(matches!(
            eval(&f, &[0.0]),
            Err(ExprError::PointTooShort { index: 3, got: 1 })
        ));
    }

    #[test]
    fn grad_analytic() {
        let f = e("(x-1)^2 + exp(y)", &["x", "y"]);
        let g = grad(&f, &[2.0, 0.0]).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-12);
        assert!((g[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grad_constant_is_zero() {
        let f = Expr::Const(5.0);
        assert_eq!(grad(&f, &[1.0, 2.0]).unwrap(), vec![0.0, 0.0]);
    }

    /// Central finite differences, the independent oracle for AD.
    pub(crate) fn fd_grad(f: &Expr, point: &[f64], h: f64) -> Vec<f64> {
        (0..point.len())
            .map(|i| {
                let mut hi = point.to_vec();
                let mut lo = point.to_vec();
                hi[i] += h;
                lo[i] -= h;
                (eval(f, &hi).unwrap() - eval(f, &lo).unwrap()) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn grad_matches_finite_differences() {
        let f = e("x^3 + x*sqrt(y)", &["x", "y"]);
        let point = [1.0, 4.0];
        let g = grad(&f, &point).unwrap();
        let fd = fd_grad(&f, &point, 1e-6);
        for (a, b) in g.iter().zip(&fd) {
            assert!((a - b).abs() / b.abs().max(1.0) < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn grad_product_with_zero_factor() {
        // prefix/suffix handling must not divide by the zero factor
        let f = e("x*y*x", &["x", "y"]);
        let g = grad(&f, &[0.0, 3.0]).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
        let g = grad(&f, &[2.0, 0.0]).unwrap();
        assert_eq!(g, vec![0.0, 4.0]);
    }

    #[test]
    fn curvature_examples() {
        assert_eq!(classify_curvature(&e("x^2 + exp(y)", &["x", "y"])), Curvature::Convex);
        assert_eq!(classify_curvature(&e("3*x - 2*y + 1", &["x", "y"])), Curvature::Affine);
        assert_eq!(classify_curvature(&e("x*y", &["x", "y"])), Curvature::Unknown);
    }

    #[test]
    fn curvature_never_convex_on_nonconvex_set() {
        let names = &["x", "y"];
        for text in ["x^3", "x*y", "-x^2", "-exp(x)", "log(x)", "sqrt(x)", "x^2 - y^2"] {
            let c = classify_curvature(&e(text, names));
            assert!(!matches!(c, Curvature::Convex | Curvature::Affine), "{text} classified {c:?}");
        }
    }

    #[test]
    fn curvature_composition_rules() {
        let names = &["x", "y"];
        assert_eq!(classify_curvature(&e("exp(x + y)", names)), Curvature::Convex);
        assert_eq!(classify_curvature(&e("exp(x^2)", names)), Curvature::Convex);
        assert_eq!(classify_curvature(&e("-log(x)", names)), Curvature::Convex);
        assert_eq!(classify_curvature(&e("log(x)", names)), Curvature::Concave);
        assert_eq!(classify_curvature(&e("(x + 2*y)^2", names)), Curvature::Convex);
        assert_eq!(classify_curvature(&e("2*x^2 + 3*exp(y)", names)), Curvature::Convex);
        assert_eq!(classify_curvature(&e("-2*x^2", names)), Curvature::Concave);
        assert_eq!(classify_curvature(&e("sqrt(x)", names)), Curvature::Concave);
        assert_eq!(classify_curvature(&e("(x + y)^3", names)), Curvature::Unknown);
    }

    #[test]
    fn affine_is_both_convex_and_concave() {
        assert!(Curvature::Affine.is_convex());
        assert!(Curvature::Affine.is_concave());
        assert!(Curvature::Convex.is_convex());
        assert!(!Curvature::Convex.is_concave());
    }
}
