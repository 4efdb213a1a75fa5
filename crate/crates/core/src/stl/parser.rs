//! Recursive-descent parser for the textual formula syntax.
//!
//! Precedence, lowest to highest:
//!
//! 1. `->` (right associative)
//! 2. `or` / `||`
//! 3. `and` / `&&`, `until[_I]`, `release[_I]` (left associative)
//! 4. prefix `not` / `!`, `next`, `eventually[_I]`, `always[_I]`
//! 5. `true`, `false`, parenthesized formulas, comparisons
//!
//! Intervals are written `_[a,b]`, `_[a,b)`, `_(a,b]` or `_[a,inf)`; an
//! operator without an interval ranges over `[0,inf)`. Comparisons relate two
//! affine expressions, e.g. `speed - 0.5 > 0` or `2*x + y <= 3`.

use std::collections::BTreeSet;

use super::ast::{Affine, Formula, Interval, Predicate};
use super::StlError;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Plus,
    Minus,
    Star,
    Ge,
    Gt,
    Le,
    Lt,
    Arrow,
    AndAnd,
    OrOr,
    Bang,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("'{s}'"),
            Tok::Num(n) => format!("number {n}"),
            Tok::Eof => "end of input".into(),
            other => format!("{other:?}"),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, StlError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let two = text.get(i..i + 2).unwrap_or("");
        let tok = match two {
            ">=" => Some(Tok::Ge),
            "<=" => Some(Tok::Le),
            "->" => Some(Tok::Arrow),
            "&&" => Some(Tok::AndAnd),
            "||" => Some(Tok::OrOr),
            _ => None,
        };
        if let Some(t) = tok {
            out.push((t, start));
            i += 2;
            continue;
        }
        let single = match c {
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            ',' => Some(Tok::Comma),
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '>' => Some(Tok::Gt),
            '<' => Some(Tok::Lt),
            '!' => Some(Tok::Bang),
            _ => None,
        };
        if let Some(t) = single {
            out.push((t, start));
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s = &text[start..i];
            let n = s.parse::<f64>().map_err(|_| StlError::Syntax {
                offset: start,
                message: format!("malformed number '{s}'"),
            })?;
            out.push((Tok::Num(n), start));
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(text[start..i].to_string()), start));
            continue;
        }
        return Err(StlError::Syntax { offset: start, message: format!("unexpected character '{c}'") });
    }
    out.push((Tok::Eof, text.len()));
    Ok(out)
}

const KEYWORDS: &[&str] = &[
    "true", "false", "not", "next", "and", "or", "until", "release", "eventually", "always", "inf",
];

fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s) || KEYWORDS.iter().any(|k| s.strip_suffix('_') == Some(k))
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    declared: Option<&'a BTreeSet<String>>,
}

type PResult<T> = Result<T, StlError>;

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, message: impl Into<String>) -> PResult<T> {
        Err(StlError::Syntax { offset: self.offset(), message: message.into() })
    }

    fn expect(&mut self, t: Tok) -> PResult<()> {
        if *self.peek() == t {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected {}, found {}", t.describe(), self.peek().describe()))
        }
    }

    fn ident_is(&self, word: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == word)
    }

    fn formula(&mut self) -> PResult<Formula> {
        let lhs = self.disjunction()?;
        if *self.peek() == Tok::Arrow {
            self.bump();
            let rhs = self.formula()?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn disjunction(&mut self) -> PResult<Formula> {
        let mut lhs = self.conjunction()?;
        while *self.peek() == Tok::OrOr || self.ident_is("or") {
            self.bump();
            let rhs = self.conjunction()?;
            lhs = Formula::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> PResult<Formula> {
        let mut lhs = self.unary()?;
        loop {
            if *self.peek() == Tok::AndAnd || self.ident_is("and") {
                self.bump();
                let rhs = self.unary()?;
                lhs = Formula::and(lhs, rhs);
            } else if let Some(op) = self.temporal_word(&["until", "release"]) {
                let interval = self.operator_interval(&op)?;
                let rhs = self.unary()?;
                lhs = if op.starts_with("until") {
                    Formula::until(interval, lhs, rhs)
                } else {
                    Formula::release(interval, lhs, rhs)
                };
            } else {
                return Ok(lhs);
            }
        }
    }

    /// If the next token is one of `words` (optionally suffixed with `_`),
    /// consumes it and returns the spelling.
    fn temporal_word(&mut self, words: &[&str]) -> Option<String> {
        if let Tok::Ident(s) = self.peek() {
            let base = s.strip_suffix('_').unwrap_or(s);
            if words.contains(&base) {
                let s = s.clone();
                self.bump();
                return Some(s);
            }
        }
        None
    }

    fn operator_interval(&mut self, op: &str) -> PResult<Interval> {
        if op.ends_with('_') {
            self.interval()
        } else {
            Ok(Interval::unbounded())
        }
    }

    fn interval(&mut self) -> PResult<Interval> {
        let lo_closed = match self.peek() {
            Tok::LBracket => true,
            Tok::LParen => false,
            other => return self.err(format!("expected interval, found {}", other.describe())),
        };
        self.bump();
        let lo = self.bound()?;
        self.expect(Tok::Comma)?;
        let hi = self.bound()?;
        let hi_closed = match self.peek() {
            Tok::RBracket => true,
            Tok::RParen => false,
            other => return self.err(format!("expected ']' or ')', found {}", other.describe())),
        };
        let close_at = self.offset();
        self.bump();
        let i = Interval { lo, hi, lo_closed, hi_closed: hi_closed && hi.is_finite() };
        if !(lo >= 0.0) || lo.is_infinite() {
            return Err(StlError::Syntax { offset: close_at, message: "interval lower bound must be finite and >= 0".into() });
        }
        if i.is_empty() {
            return Err(StlError::Syntax { offset: close_at, message: format!("empty interval {i}") });
        }
        Ok(i)
    }

    fn bound(&mut self) -> PResult<f64> {
        match self.bump() {
            Tok::Num(n) => Ok(n),
            Tok::Ident(s) if s == "inf" => Ok(f64::INFINITY),
            other => {
                self.pos -= 1;
                self.err(format!("expected interval bound, found {}", other.describe()))
            }
        }
    }

    fn unary(&mut self) -> PResult<Formula> {
        if *self.peek() == Tok::Bang || self.ident_is("not") {
            self.bump();
            return Ok(Formula::not(self.unary()?));
        }
        if self.ident_is("next") {
            self.bump();
            return Ok(Formula::next(self.unary()?));
        }
        if let Some(op) = self.temporal_word(&["eventually", "always"]) {
            let interval = self.operator_interval(&op)?;
            let body = self.unary()?;
            return Ok(if op.starts_with("eventually") {
                Formula::eventually(interval, body)
            } else {
                Formula::always(interval, body)
            });
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<Formula> {
        if self.ident_is("true") {
            self.bump();
            return Ok(Formula::True);
        }
        if self.ident_is("false") {
            self.bump();
            return Ok(Formula::falsum());
        }
        if *self.peek() == Tok::LParen {
            let save = self.pos;
            self.bump();
            let grouped = self.formula().and_then(|f| {
                self.expect(Tok::RParen)?;
                Ok(f)
            });
            match grouped {
                Ok(f) if !self.continues_arithmetic() => return Ok(f),
                Ok(_) => self.pos = save,
                Err(e) => {
                    let grouped_at = self.offset();
                    self.pos = save;
                    return match self.comparison() {
                        Ok(f) => Ok(f),
                        Err(e2) if self.offset() >= grouped_at => Err(e2),
                        Err(_) => Err(e),
                    };
                }
            }
        }
        self.comparison()
    }

    fn continues_arithmetic(&self) -> bool {
        matches!(
            self.peek(),
            Tok::Plus | Tok::Minus | Tok::Star | Tok::Ge | Tok::Gt | Tok::Le | Tok::Lt
        )
    }

    fn comparison(&mut self) -> PResult<Formula> {
        let lhs = self.arith()?;
        let rel = match self.peek() {
            Tok::Ge | Tok::Gt | Tok::Le | Tok::Lt => self.bump(),
            other => return self.err(format!("expected comparison operator, found {}", other.describe())),
        };
        let rhs = self.arith()?;
        let pred = match rel {
            Tok::Ge => Predicate::ge(lhs.sub(rhs)),
            Tok::Gt => Predicate::gt(lhs.sub(rhs)),
            Tok::Le => Predicate::ge(rhs.sub(lhs)),
            _ => Predicate::gt(rhs.sub(lhs)),
        };
        Ok(Formula::Pred(pred))
    }

    fn arith(&mut self) -> PResult<Affine> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    acc = acc.add(self.term()?);
                }
                Tok::Minus => {
                    self.bump();
                    acc = acc.sub(self.term()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> PResult<Affine> {
        let mut acc = self.factor()?;
        while *self.peek() == Tok::Star {
            let at = self.offset();
            self.bump();
            let rhs = self.factor()?;
            acc = if rhs.is_constant() {
                acc.scale(rhs.constant)
            } else if acc.is_constant() {
                rhs.scale(acc.constant)
            } else {
                return Err(StlError::Syntax { offset: at, message: "product of two signals is not affine".into() });
            };
        }
        Ok(acc)
    }

    fn factor(&mut self) -> PResult<Affine> {
        let at = self.offset();
        match self.peek().clone() {
            Tok::Minus => {
                self.bump();
                Ok(self.factor()?.scale(-1.0))
            }
            Tok::Plus => {
                self.bump();
                self.factor()
            }
            Tok::Num(n) => {
                self.bump();
                Ok(Affine::constant(n))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.arith()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            Tok::Ident(name) if !is_keyword(&name) => {
                self.bump();
                if let Some(declared) = self.declared {
                    if !declared.contains(&name) {
                        return Err(StlError::UnknownSignal { name, offset: at });
                    }
                }
                Ok(Affine::signal(&name))
            }
            other => self.err(format!("expected signal or number, found {}", other.describe())),
        }
    }
}

fn run(text: &str, declared: Option<&BTreeSet<String>>) -> Result<Formula, StlError> {
    let mut p = Parser { toks: lex(text)?, pos: 0, declared };
    let f = p.formula()?;
    if *p.peek() != Tok::Eof {
        return p.err(format!("unexpected {}", p.peek().describe()));
    }
    Ok(f)
}

/// Parses `text`, rejecting references to signals outside `declared`.
pub fn parse_formula<S: AsRef<str>>(text: &str, declared: &[S]) -> Result<Formula, StlError> {
    let set: BTreeSet<String> = declared.iter().map(|s| s.as_ref().to_string()).collect();
    run(text, Some(&set))
}

/// Parses `text` without checking signal names.
pub fn parse(text: &str) -> Result<Formula, StlError> {
    run(text, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pred(terms: &[(&str, f64)], c: f64) -> Formula {
        Formula::Pred(Predicate::ge(Affine {
            terms: terms.iter().map(|(n, k)| (n.to_string(), *k)).collect(),
            constant: c,
        }))
    }

    #[test]
    fn always_from_two() {
        let f = parse_formula("always_[2,inf) (x >= 10)", &["x"]).unwrap();
        assert_eq!(f, Formula::always(Interval::from(2.0), pred(&[("x", 1.0)], -10.0)));
    }

    #[test]
    fn eventually_right_open() {
        let f = parse_formula("eventually_[1,5) (x <= -10)", &["x"]).unwrap();
        assert_eq!(
            f,
            Formula::eventually(Interval::right_open(1.0, 5.0), pred(&[("x", -1.0)], -10.0))
        );
    }

    #[test]
    fn incomplete_atom_reports_offset() {
        match parse_formula("x >=", &["x"]) {
            Err(StlError::Syntax { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_signal_rejected() {
        match parse_formula("always (y >= 0)", &["x"]) {
            Err(StlError::UnknownSignal { name, offset }) => {
                assert_eq!(name, "y");
                assert_eq!(offset, 8);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn precedence_levels() {
        let f = parse("a >= 0 or b >= 0 and c >= 0 -> d >= 0").unwrap();
        let a = pred(&[("a", 1.0)], 0.0);
        let b = pred(&[("b", 1.0)], 0.0);
        let c = pred(&[("c", 1.0)], 0.0);
        let d = pred(&[("d", 1.0)], 0.0);
        assert_eq!(f, Formula::implies(Formula::or(a, Formula::and(b, c)), d));
    }

    #[test]
    fn until_binds_like_and() {
        let f = parse("a >= 0 until_[0,10] b >= 0 or c >= 0").unwrap();
        match f {
            Formula::Or(l, _) => assert!(matches!(*l, Formula::Until(..))),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn affine_arithmetic_and_grouping() {
        let f = parse("(2*(x - 1) + y) > 3*z").unwrap();
        let expected = Formula::Pred(Predicate::gt(Affine {
            terms: vec![("x".into(), 2.0), ("y".into(), 1.0), ("z".into(), -3.0)],
            constant: -2.0,
        }));
        assert_eq!(f, expected);
        assert!(parse("x * y >= 0").is_err());
    }

    #[test]
    fn omitted_interval_is_unbounded() {
        let f = parse("eventually next (x > 0)").unwrap();
        match f {
            Formula::Eventually(i, _) => assert!(i.is_unbounded()),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_intervals() {
        assert!(parse("always_[3,1] (x >= 0)").is_err());
        assert!(parse("always_[1,1) (x >= 0)").is_err());
        assert!(parse("always_[-1,2] (x >= 0)").is_err());
        assert!(parse("always_[1,1] (x >= 0)").is_ok());
    }

    #[test]
    fn display_round_trips() {
        for text in [
            "always_[2,inf) (x >= 10)",
            "not (x - 2*y > -0.5) until_(0.5,3] eventually_[1,2] (y <= 1e-3)",
            "true -> false or next (x >= 0)",
            "(a >= 0) release (b < 1)",
        ] {
            let f = parse(text).unwrap();
            assert_eq!(parse(&f.to_string()).unwrap(), f, "{text} -> {f}");
        }
    }
}
