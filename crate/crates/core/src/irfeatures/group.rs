// SPDX-License-Identifier: MIT OR Apache-2.0

//! Arithmetic expressions over named base features.
//!
//! Grammar (whitespace ignored):
//!
//! ```text
//! expr   := term ('+' term)*
//! term   := factor ('*' factor)*
//! factor := atom ('^' positive-integer)?
//! atom   := name | '(' expr ')'
//! ```

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeatureGroupExpr {
    Leaf(String),
    Sum(Vec<FeatureGroupExpr>),
    Product(Vec<FeatureGroupExpr>),
    Pow(Box<FeatureGroupExpr>, u32),
}

impl FeatureGroupExpr {
    pub fn leaf(name: &str) -> Self {
        FeatureGroupExpr::Leaf(name.to_string())
    }

    pub fn sum(children: Vec<FeatureGroupExpr>) -> Self {
        FeatureGroupExpr::Sum(children)
    }

    pub fn product(children: Vec<FeatureGroupExpr>) -> Self {
        FeatureGroupExpr::Product(children)
    }

    pub fn pow(self, k: u32) -> Self {
        FeatureGroupExpr::Pow(Box::new(self), k)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut p = Parser { src: text, chars: text.char_indices().collect(), pos: 0 };
        let e = p.expr()?;
        if p.peek().is_some() {
            return Err(p.error("trailing input"));
        }
        e.check()?;
        Ok(e)
    }

    fn check(&self) -> Result<()> {
        match self {
            FeatureGroupExpr::Leaf(name) if name.is_empty() => {
                Err(Error::Expr { expr: String::new(), msg: "empty leaf name".into() })
            }
            FeatureGroupExpr::Leaf(_) => Ok(()),
            FeatureGroupExpr::Sum(cs) | FeatureGroupExpr::Product(cs) => {
                if cs.is_empty() {
                    return Err(Error::Expr { expr: self.to_string(), msg: "empty operand list".into() });
                }
                cs.iter().try_for_each(FeatureGroupExpr::check)
            }
            FeatureGroupExpr::Pow(_, 0) => {
                Err(Error::Expr { expr: self.to_string(), msg: "exponent must be a positive integer".into() })
            }
            FeatureGroupExpr::Pow(b, _) => b.check(),
        }
    }

    /// Leaf names in first-appearance order, deduplicated.
    pub fn leaves(&self) -> Vec<&str> {
        fn walk<'a>(e: &'a FeatureGroupExpr, out: &mut Vec<&'a str>) {
            match e {
                FeatureGroupExpr::Leaf(n) => {
                    if !out.contains(&n.as_str()) {
                        out.push(n);
                    }
                }
                FeatureGroupExpr::Sum(cs) | FeatureGroupExpr::Product(cs) => cs.iter().for_each(|c| walk(c, out)),
                FeatureGroupExpr::Pow(b, _) => walk(b, out),
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out
    }

    /// Recursive evaluation against already-normalized leaf values.
    pub fn eval(&self, base_values: &HashMap<String, f64>) -> Result<f64> {
        match self {
            FeatureGroupExpr::Leaf(n) => base_values.get(n).copied().ok_or_else(|| Error::MissingLeaf(n.clone())),
            FeatureGroupExpr::Sum(cs) => cs.iter().try_fold(0.0, |acc, c| Ok(acc + c.eval(base_values)?)),
            FeatureGroupExpr::Product(cs) => cs.iter().try_fold(1.0, |acc, c| Ok(acc * c.eval(base_values)?)),
            FeatureGroupExpr::Pow(b, k) => Ok(b.eval(base_values)?.powi(*k as i32)),
        }
    }

    fn fmt_operand(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureGroupExpr::Leaf(_) | FeatureGroupExpr::Sum(_) => write!(f, "{self}"),
            _ => write!(f, "({self})"),
        }
    }
}

/// Sums always print parenthesized, so `(QTR+STF+VTFIDF)^2` round-trips.
impl fmt::Display for FeatureGroupExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureGroupExpr::Leaf(n) => f.write_str(n),
            FeatureGroupExpr::Sum(cs) => {
                f.write_str("(")?;
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        f.write_str("+")?;
                    }
                    write!(f, "{c}")?;
                }
                f.write_str(")")
            }
            FeatureGroupExpr::Product(cs) => {
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        f.write_str("*")?;
                    }
                    match c {
                        FeatureGroupExpr::Product(_) => write!(f, "({c})")?,
                        _ => write!(f, "{c}")?,
                    }
                }
                Ok(())
            }
            FeatureGroupExpr::Pow(b, k) => {
                b.fmt_operand(f)?;
                write!(f, "^{k}")
            }
        }
    }
}

impl FromStr for FeatureGroupExpr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

struct Parser<'a> {
    src: &'a str,
    chars: Vec<(usize, char)>,
    pos: usize,
}

impl Parser<'_> {
    /// Next non-whitespace character.
    fn peek(&mut self) -> Option<char> {
        while self.raw().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
        self.raw()
    }

    fn raw(&self) -> Option<char> {
        self.chars.get(self.pos).map(|(_, c)| *c)
    }

    fn error(&self, msg: &str) -> Error {
        let at = self.chars.get(self.pos).map_or(self.src.len(), |(i, _)| *i);
        Error::Expr { expr: self.src.to_string(), msg: format!("{msg} at byte {at}") }
    }

    fn expr(&mut self) -> Result<FeatureGroupExpr> {
        let mut terms = vec![self.term()?];
        while self.peek() == Some('+') {
            self.pos += 1;
            terms.push(self.term()?);
        }
        Ok(if terms.len() == 1 { terms.pop().unwrap() } else { FeatureGroupExpr::Sum(terms) })
    }

    fn term(&mut self) -> Result<FeatureGroupExpr> {
        let mut factors = vec![self.factor()?];
        while self.peek() == Some('*') {
            self.pos += 1;
            factors.push(self.factor()?);
        }
        Ok(if factors.len() == 1 { factors.pop().unwrap() } else { FeatureGroupExpr::Product(factors) })
    }

    fn factor(&mut self) -> Result<FeatureGroupExpr> {
        let base = self.atom()?;
        if self.peek() != Some('^') {
            return Ok(base);
        }
        self.pos += 1;
        self.peek();
        let start = self.pos;
        while self.raw().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        let digits: String = self.chars[start..self.pos].iter().map(|(_, c)| c).collect();
        let k: u32 = digits.parse().map_err(|_| self.error("expected positive integer exponent"))?;
        if k == 0 {
            return Err(self.error("exponent must be a positive integer"));
        }
        Ok(FeatureGroupExpr::Pow(Box::new(base), k))
    }

    fn atom(&mut self) -> Result<FeatureGroupExpr> {
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(')') {
                    return Err(self.error("expected `)`"));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_alphanumeric() || c == '_' => {
                let start = self.pos;
                while self.raw().is_some_and(|c| c.is_alphanumeric() || c == '_') {
                    self.pos += 1;
                }
                Ok(FeatureGroupExpr::Leaf(self.chars[start..self.pos].iter().map(|(_, c)| c).collect()))
            }
            _ => Err(self.error("expected feature name or `(`")),
        }
    }
}

/// Min-max normalizes a column to [0, 1]. Constant columns map to zeros.
pub fn min_max_normalize(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - lo) / (hi - lo)).collect()
}

/// Evaluates `expr` row by row over named feature columns, optionally
/// min-max normalizing each leaf column over the dataset first.
pub fn group_values(expr: &FeatureGroupExpr, columns: &HashMap<String, Vec<f64>>, normalize: bool) -> Result<Vec<f64>> {
    let leaves = expr.leaves();
    let mut cols: Vec<(String, Vec<f64>)> = Vec::with_capacity(leaves.len());
    for name in &leaves {
        let raw = columns.get(*name).ok_or_else(|| Error::MissingLeaf(name.to_string()))?;
        let col = if normalize { min_max_normalize(raw) } else { raw.clone() };
        cols.push((name.to_string(), col));
    }
    let n = cols.first().map_or(0, |(_, c)| c.len());
    if let Some((name, c)) = cols.iter().find(|(_, c)| c.len() != n) {
        return Err(Error::Shape(format!("column `{name}` has {} rows, expected {n}", c.len())));
    }
    let mut row: HashMap<String, f64> = HashMap::with_capacity(cols.len());
    (0..n)
        .map(|i| {
            for (name, c) in &cols {
                row.insert(name.clone(), c[i]);
            }
            let v = expr.eval(&row)?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFinite("group expression value"))
            }
        })
        .collect()
}

/// Single-row form: evaluates with the given (already normalized) values.
pub fn group_value(expr: &FeatureGroupExpr, base_values: &HashMap<String, f64>) -> Result<f64> {
    expr.eval(base_values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vals() -> HashMap<String, f64> {
        [("QTR", 1.0), ("STF", 0.5), ("VTFIDF", 0.25)].iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn sum_square_product() {
        let sum = FeatureGroupExpr::parse("(QTR+STF+VTFIDF)").unwrap();
        assert_eq!(group_value(&sum, &vals()).unwrap(), 1.75);
        let sq = FeatureGroupExpr::parse("(QTR+STF+VTFIDF)^2").unwrap();
        assert_eq!(group_value(&sq, &vals()).unwrap(), 3.0625);
        let prod = FeatureGroupExpr::parse("QTR*STF*VTFIDF").unwrap();
        assert_eq!(group_value(&prod, &vals()).unwrap(), 0.125);
    }

    #[test]
    fn display_round_trips_canonical_forms() {
        for s in
            ["(QTR+STF+VTFIDF)", "(QTR+STF+VTFIDF)^2", "(QTR+STF+VTFIDF)^3", "QTR*STF*VTFIDF", "(a*b)^2", "a^3*(b+c)"]
        {
            assert_eq!(FeatureGroupExpr::parse(s).unwrap().to_string(), s);
        }
        assert_eq!(FeatureGroupExpr::parse(" ( a + b ) ^ 2 ").unwrap().to_string(), "(a+b)^2");
    }

    #[test]
    fn missing_leaf_named() {
        let e = FeatureGroupExpr::parse("QTR+NOPE").unwrap();
        assert!(matches!(group_value(&e, &vals()), Err(Error::MissingLeaf(n)) if n == "NOPE"));
    }

    #[test]
    fn malformed_expressions() {
        for s in ["", "(a+b", "a+", "a^0", "a^-1", "a^x", "a b", "+a", "()"] {
            assert!(FeatureGroupExpr::parse(s).is_err(), "{s:?}");
        }
    }

    #[test]
    fn normalization_of_columns() {
        assert_eq!(min_max_normalize(&[2.0, 4.0, 3.0]), [0.0, 1.0, 0.5]);
        assert_eq!(min_max_normalize(&[7.0, 7.0]), [0.0, 0.0]);
        let cols: HashMap<String, Vec<f64>> =
            [("a".to_string(), vec![0.0, 10.0]), ("b".to_string(), vec![1.0, 3.0])].into_iter().collect();
        let e = FeatureGroupExpr::parse("(a+b)^2").unwrap();
        assert_eq!(group_values(&e, &cols, true).unwrap(), [0.0, 4.0]);
        assert_eq!(group_values(&e, &cols, false).unwrap(), [1.0, 169.0]);
    }

    fn arb_expr() -> impl Strategy<Value = FeatureGroupExpr> {
        let leaf = prop::sample::select(vec!["QTR", "STF", "VTFIDF", "bm25"]).prop_map(FeatureGroupExpr::leaf);
        leaf.prop_recursive(4, 24, 3, |inner| {
            prop_oneof![
                prop::collection::vec(inner.clone(), 2..4).prop_map(FeatureGroupExpr::Sum),
                prop::collection::vec(inner.clone(), 2..4).prop_map(FeatureGroupExpr::Product),
                (inner, 1u32..4).prop_map(|(b, k)| b.pow(k)),
            ]
        })
    }

    /// Flattens nested sums/products so structurally equal trees compare equal.
    fn flatten(e: &FeatureGroupExpr) -> FeatureGroupExpr {
        match e {
            FeatureGroupExpr::Leaf(_) => e.clone(),
            FeatureGroupExpr::Sum(cs) => FeatureGroupExpr::Sum(
                cs.iter()
                    .map(flatten)
                    .flat_map(|c| match c {
                        FeatureGroupExpr::Sum(inner) => inner,
                        other => vec![other],
                    })
                    .collect(),
            ),
            FeatureGroupExpr::Product(cs) => FeatureGroupExpr::Product(
                cs.iter()
                    .map(flatten)
                    .flat_map(|c| match c {
                        FeatureGroupExpr::Product(inner) => inner,
                        other => vec![other],
                    })
                    .collect(),
            ),
            FeatureGroupExpr::Pow(b, k) => flatten(b).pow(*k),
        }
    }

    proptest! {
        #[test]
        fn print_parse_preserves_value(e in arb_expr()) {
            let printed = e.to_string();
            let back = FeatureGroupExpr::parse(&printed).unwrap();
            prop_assert_eq!(back.to_string(), printed);
            prop_assert_eq!(flatten(&back), flatten(&e));
        }
    }
}
