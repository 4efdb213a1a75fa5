use std::collections::BTreeSet;
use std::fmt;

/// A time interval over non-negative reals, possibly unbounded above.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    /// `[lo, hi]`
    pub fn closed(lo: f64, hi: f64) -> Self {
        Self { lo, hi, lo_closed: true, hi_closed: hi.is_finite() }
    }

    /// `[lo, hi)`
    pub fn right_open(lo: f64, hi: f64) -> Self {
        Self { lo, hi, lo_closed: true, hi_closed: false }
    }

    /// `[lo, inf)`
    pub fn from(lo: f64) -> Self {
        Self::right_open(lo, f64::INFINITY)
    }

    /// `[0, inf)`, the interval of an operator written without one.
    pub fn unbounded() -> Self {
        Self::from(0.0)
    }

    pub fn is_unbounded(&self) -> bool {
        self.lo == 0.0 && self.lo_closed && self.hi == f64::INFINITY
    }

    pub fn contains(&self, d: f64) -> bool {
        let above = if self.lo_closed { d >= self.lo } else { d > self.lo };
        let below = if self.hi_closed { d <= self.hi } else { d < self.hi };
        above && below
    }

    /// True when every offset larger than `d` lies outside the interval.
    pub fn past(&self, d: f64) -> bool {
        if self.hi_closed {
            d > self.hi
        } else {
            d >= self.hi
        }
    }

    pub fn is_empty(&self) -> bool {
        if self.lo_closed && self.hi_closed {
            self.lo > self.hi
        } else {
            self.lo >= self.hi
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let l = if self.lo_closed { '[' } else { '(' };
        let r = if self.hi_closed { ']' } else { ')' };
        if self.hi.is_infinite() {
            write!(f, "{l}{},inf{r}", self.lo)
        } else {
            write!(f, "{l}{},{}{r}", self.lo, self.hi)
        }
    }
}

/// An affine expression `sum(c_j * s_j) + c_0` over named signals.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Affine {
    pub terms: Vec<(String, f64)>,
    pub constant: f64,
}

impl Affine {
    pub fn constant(c: f64) -> Self {
        Self { terms: Vec::new(), constant: c }
    }

    pub fn signal(name: &str) -> Self {
        Self { terms: vec![(name.to_string(), 1.0)], constant: 0.0 }
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scale(mut self, k: f64) -> Self {
        for t in &mut self.terms {
            t.1 *= k;
        }
        self.constant *= k;
        self
    }

    pub fn add(mut self, other: Affine) -> Self {
        for (name, c) in other.terms {
            match self.terms.iter_mut().find(|t| t.0 == name) {
                Some(t) => t.1 += c,
                None => self.terms.push((name, c)),
            }
        }
        self.constant += other.constant;
        self
    }

    pub fn sub(self, other: Affine) -> Self {
        self.add(other.scale(-1.0))
    }

    pub fn signals(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().map(|t| t.0.as_str())
    }
}

impl fmt::Display for Affine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, (name, c)) in self.terms.iter().enumerate() {
            let neg = c.is_sign_negative();
            let mag = c.abs();
            match (k, neg) {
                (0, false) => {}
                (0, true) => write!(f, "-")?,
                (_, false) => write!(f, " + ")?,
                (_, true) => write!(f, " - ")?,
            }
            if mag == 1.0 {
                write!(f, "{name}")?;
            } else {
                write!(f, "{mag}*{name}")?;
            }
        }
        if self.terms.is_empty() {
            write!(f, "{}", self.constant)?;
        } else if self.constant != 0.0 {
            let sign = if self.constant < 0.0 { '-' } else { '+' };
            write!(f, " {sign} {}", self.constant.abs())?;
        }
        Ok(())
    }
}

/// Atomic predicate `expr >= 0` (or `expr > 0` when `strict`).
///
/// Comparisons written in other forms are normalized at parse time, so
/// `x <= -10` becomes `-x - 10 >= 0`. The robustness of a predicate is the
/// value of `expr`; strictness only matters to the Boolean semantics when
/// that value is exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Predicate {
    pub expr: Affine,
    pub strict: bool,
}

impl Predicate {
    pub fn ge(expr: Affine) -> Self {
        Self { expr, strict: false }
    }

    pub fn gt(expr: Affine) -> Self {
        Self { expr, strict: true }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} 0", self.expr, if self.strict { ">" } else { ">=" })
    }
}

/// STL abstract syntax, including the derived operators.
#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    True,
    Pred(Predicate),
    Not(Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Next(Box<Formula>),
    Until(Interval, Box<Formula>, Box<Formula>),
    Release(Interval, Box<Formula>, Box<Formula>),
    Eventually(Interval, Box<Formula>),
    Always(Interval, Box<Formula>),
}

impl Formula {
    pub fn pred(p: Predicate) -> Self {
        Self::Pred(p)
    }

    pub fn falsum() -> Self {
        Self::not(Self::True)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Self::Not(Box::new(f))
    }

    pub fn or(a: Formula, b: Formula) -> Self {
        Self::Or(Box::new(a), Box::new(b))
    }

    pub fn and(a: Formula, b: Formula) -> Self {
        Self::And(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Formula, b: Formula) -> Self {
        Self::Implies(Box::new(a), Box::new(b))
    }

    pub fn next(f: Formula) -> Self {
        Self::Next(Box::new(f))
    }

    pub fn until(i: Interval, a: Formula, b: Formula) -> Self {
        Self::Until(i, Box::new(a), Box::new(b))
    }

    pub fn release(i: Interval, a: Formula, b: Formula) -> Self {
        Self::Release(i, Box::new(a), Box::new(b))
    }

    pub fn eventually(i: Interval, f: Formula) -> Self {
        Self::Eventually(i, Box::new(f))
    }

    pub fn always(i: Interval, f: Formula) -> Self {
        Self::Always(i, Box::new(f))
    }

    /// Conjunction of all `parts`; `True` when empty.
    pub fn conjunction(parts: impl IntoIterator<Item = Formula>) -> Self {
        parts.into_iter().reduce(Self::and).unwrap_or(Self::True)
    }

    /// Rewrites derived operators into the primitive fragment
    /// {true, predicate, not, or, next, until}.
    pub fn desugar(&self) -> Formula {
        use Formula as F;
        match self {
            F::True => F::True,
            F::Pred(p) => F::Pred(p.clone()),
            F::Not(a) => F::not(a.desugar()),
            F::Or(a, b) => F::or(a.desugar(), b.desugar()),
            F::And(a, b) => F::not(F::or(F::not(a.desugar()), F::not(b.desugar()))),
            F::Implies(a, b) => F::or(F::not(a.desugar()), b.desugar()),
            F::Next(a) => F::next(a.desugar()),
            F::Until(i, a, b) => F::until(*i, a.desugar(), b.desugar()),
            F::Eventually(i, a) => F::until(*i, F::True, a.desugar()),
            F::Always(i, a) => F::not(F::until(*i, F::True, F::not(a.desugar()))),
            F::Release(i, a, b) => F::not(F::until(*i, F::not(a.desugar()), F::not(b.desugar()))),
        }
    }

    /// Every signal name referenced by a predicate.
    pub fn signals(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit(&mut |f| {
            if let Formula::Pred(p) = f {
                out.extend(p.expr.signals().map(str::to_string));
            }
        });
        out
    }

    pub fn depth(&self) -> usize {
        1 + self.children().iter().map(|c| c.depth()).max().unwrap_or(0)
    }

    pub fn children(&self) -> Vec<&Formula> {
        use Formula as F;
        match self {
            F::True | F::Pred(_) => vec![],
            F::Not(a) | F::Next(a) | F::Eventually(_, a) | F::Always(_, a) => vec![a],
            F::Or(a, b) | F::And(a, b) | F::Implies(a, b) | F::Until(_, a, b) | F::Release(_, a, b) => {
                vec![a, b]
            }
        }
    }

    fn visit(&self, f: &mut impl FnMut(&Formula)) {
        f(self);
        for c in self.children() {
            c.visit(f);
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Formula as F;
        let unbounded_or = |i: &Interval| if i.is_unbounded() { String::new() } else { format!("_{i}") };
        match self {
            F::True => write!(f, "true"),
            F::Pred(p) => write!(f, "({p})"),
            F::Not(a) => write!(f, "not {a}"),
            F::Or(a, b) => write!(f, "({a} or {b})"),
            F::And(a, b) => write!(f, "({a} and {b})"),
            F::Implies(a, b) => write!(f, "({a} -> {b})"),
            F::Next(a) => write!(f, "next {a}"),
            F::Until(i, a, b) => write!(f, "({a} until{} {b})", unbounded_or(i)),
            F::Release(i, a, b) => write!(f, "({a} release{} {b})", unbounded_or(i)),
            F::Eventually(i, a) => write!(f, "eventually{} {a}", unbounded_or(i)),
            F::Always(i, a) => write!(f, "always{} {a}", unbounded_or(i)),
        }
    }
}
