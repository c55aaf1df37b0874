//! Word algebra of the fundamental groupoid of an N-window domain.
//!
//! Arrows are generated by the half-plane arcs `A(i,j,k)` running from window
//! `i` to window `j` through the upper (`k = +1`) or lower (`k = -1`) half of
//! the domain, subject to `A(i,j,k) A(j,l,k) = A(i,l,k)` (with `A(i,i,k)` the
//! unit `e_i`). Every arrow has a unique reduced representation whose letters
//! strictly alternate in sign; [`ReducedWord`] stores exactly that form.
//!
//! Window indices are 1-based everywhere in this module.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GroupoidError {
    #[error("composition undefined: target {target} does not match source {next_source}")]
    CompositionUndefined { target: usize, next_source: usize },
    #[error("invalid generator A({i},{j},{k}): {reason}")]
    InvalidGenerator {
        i: usize,
        j: usize,
        k: i64,
        reason: &'static str,
    },
    #[error("cannot parse word {input:?}: {reason}")]
    Parse { input: String, reason: String },
}

/// Half-plane label of a generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub const BOTH: [Sign; 2] = [Sign::Plus, Sign::Minus];

    pub fn value(self) -> i64 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    /// 0 for `+`, 1 for `-`; the outer block of the flattened generator order.
    pub(crate) fn block(self) -> usize {
        match self {
            Sign::Plus => 0,
            Sign::Minus => 1,
        }
    }
}

impl TryFrom<i64> for Sign {
    type Error = String;

    fn try_from(k: i64) -> Result<Self, Self::Error> {
        match k {
            1 => Ok(Sign::Plus),
            -1 => Ok(Sign::Minus),
            other => Err(format!("sign must be 1 or -1, got {other}")),
        }
    }
}

impl From<Sign> for i64 {
    fn from(s: Sign) -> i64 {
        s.value()
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        })
    }
}

/// One arc `A(from, to, sign)`; never the degenerate `from == to`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Generator {
    from: usize,
    to: usize,
    sign: Sign,
}

impl Generator {
    pub fn new(from: usize, to: usize, sign: Sign) -> Result<Self, GroupoidError> {
        let invalid = |reason| GroupoidError::InvalidGenerator {
            i: from,
            j: to,
            k: sign.value(),
            reason,
        };
        if from == 0 || to == 0 {
            return Err(invalid("window indices are 1-based"));
        }
        if from == to {
            return Err(invalid("A(i,i,k) is the unit, not a generator"));
        }
        Ok(Generator { from, to, sign })
    }

    /// Shorthand for tests and builders: `k` is `1` or `-1`.
    ///
    /// # Panics
    /// On an invalid triple.
    pub fn arc(from: usize, to: usize, k: i64) -> Self {
        let sign = Sign::try_from(k).expect("sign must be 1 or -1");
        Generator::new(from, to, sign).expect("valid generator")
    }

    pub fn from(&self) -> usize {
        self.from
    }

    pub fn to(&self) -> usize {
        self.to
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    pub fn reversed(&self) -> Generator {
        Generator {
            from: self.to,
            to: self.from,
            sign: self.sign,
        }
    }

    /// Number of generators for `n` windows, `2n(n-1)`.
    pub fn count(n_windows: usize) -> usize {
        2 * n_windows * n_windows.saturating_sub(1)
    }

    /// Position in the canonical flattened order: sign (`+` then `-`) outer,
    /// then source window, then target window skipping the source.
    ///
    /// Returns `None` if a window index exceeds `n_windows`.
    pub fn index(&self, n_windows: usize) -> Option<usize> {
        if self.from > n_windows || self.to > n_windows {
            return None;
        }
        let i = self.from - 1;
        let j = self.to - 1;
        let j_slot = if j > i { j - 1 } else { j };
        Some(self.sign.block() * n_windows * (n_windows - 1) + i * (n_windows - 1) + j_slot)
    }

    /// Inverse of [`Generator::index`].
    pub fn from_index(index: usize, n_windows: usize) -> Generator {
        let per_sign = n_windows * (n_windows - 1);
        assert!(index < 2 * per_sign, "generator index {index} out of range");
        let sign = if index < per_sign {
            Sign::Plus
        } else {
            Sign::Minus
        };
        let rest = index % per_sign;
        let i = rest / (n_windows - 1);
        let j_slot = rest % (n_windows - 1);
        let j = if j_slot >= i { j_slot + 1 } else { j_slot };
        Generator {
            from: i + 1,
            to: j + 1,
            sign,
        }
    }

    /// All generators in canonical order.
    pub fn all(n_windows: usize) -> impl Iterator<Item = Generator> {
        (0..Generator::count(n_windows)).map(move |idx| Generator::from_index(idx, n_windows))
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "A({},{},{})", self.from, self.to, self.sign)
    }
}

/// Local rewrite performed by [`ReducedWord::push`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rewrite {
    /// The generator was appended as a new letter.
    Pushed(Generator),
    /// The last letter was replaced by the merged letter.
    Merged {
        removed: Generator,
        merged: Generator,
    },
    /// The last letter was cancelled.
    Cancelled { removed: Generator },
}

impl Rewrite {
    /// Change in word length, one of -1, 0, +1.
    pub fn length_delta(&self) -> i64 {
        match self {
            Rewrite::Pushed(_) => 1,
            Rewrite::Merged { .. } => 0,
            Rewrite::Cancelled { .. } => -1,
        }
    }

    /// Change in metric length.
    pub fn metric_delta<T: Scalar>(&self, metric: &Metric<T>) -> T {
        match self {
            Rewrite::Pushed(g) => metric.weight(g),
            Rewrite::Merged { removed, merged } => metric.weight(merged) - metric.weight(removed),
            Rewrite::Cancelled { removed } => -metric.weight(removed),
        }
    }
}

/// An arrow of the groupoid in its unique reduced form.
///
/// Invariants: consecutive letters chain (`to` of one is `from` of the next),
/// signs strictly alternate, the first letter starts at `source`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ReducedWord {
    source: usize,
    letters: Vec<Generator>,
}

impl ReducedWord {
    /// The unit `e_source`.
    pub fn unit(source: usize) -> Self {
        assert!(source >= 1, "window indices are 1-based");
        ReducedWord {
            source,
            letters: Vec::new(),
        }
    }

    /// Reduces an arbitrary composable sequence of generators.
    pub fn from_generators<I>(source: usize, generators: I) -> Result<Self, GroupoidError>
    where
        I: IntoIterator<Item = Generator>,
    {
        let mut w = ReducedWord::unit(source);
        for g in generators {
            w.push(g)?;
        }
        Ok(w)
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn target(&self) -> usize {
        self.letters.last().map_or(self.source, |g| g.to)
    }

    pub fn letters(&self) -> &[Generator] {
        &self.letters
    }

    /// Word length `|w|`, the number of letters.
    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn is_unit(&self) -> bool {
        self.letters.is_empty()
    }

    /// Sign of the first letter, `None` for units.
    pub fn first_sign(&self) -> Option<Sign> {
        self.letters.first().map(|g| g.sign)
    }

    /// Right-composes one generator in place.
    ///
    /// At most one rewrite happens: the letter before the last one has the
    /// opposite sign of `g` whenever the last letter shares it, so a merged
    /// letter can never combine again.
    pub fn push(&mut self, g: Generator) -> Result<Rewrite, GroupoidError> {
        let target = self.target();
        if g.from != target {
            return Err(GroupoidError::CompositionUndefined {
                target,
                next_source: g.from,
            });
        }
        match self.letters.last().copied() {
            Some(last) if last.sign == g.sign => {
                if last.from == g.to {
                    self.letters.pop();
                    Ok(Rewrite::Cancelled { removed: last })
                } else {
                    let merged = Generator {
                        from: last.from,
                        to: g.to,
                        sign: g.sign,
                    };
                    *self.letters.last_mut().expect("non-empty") = merged;
                    Ok(Rewrite::Merged {
                        removed: last,
                        merged,
                    })
                }
            }
            _ => {
                self.letters.push(g);
                Ok(Rewrite::Pushed(g))
            }
        }
    }

    /// Reduced form of `self · g`.
    pub fn append(&self, g: Generator) -> Result<Self, GroupoidError> {
        let mut w = self.clone();
        w.push(g)?;
        Ok(w)
    }

    /// Reduced form of `self · other`.
    pub fn compose(&self, other: &ReducedWord) -> Result<Self, GroupoidError> {
        if self.target() != other.source {
            return Err(GroupoidError::CompositionUndefined {
                target: self.target(),
                next_source: other.source,
            });
        }
        let mut w = self.clone();
        for &g in &other.letters {
            w.push(g)?;
        }
        Ok(w)
    }

    pub fn inverse(&self) -> Self {
        ReducedWord {
            source: self.target(),
            letters: self.letters.iter().rev().map(Generator::reversed).collect(),
        }
    }

    pub fn metric_length<T: Scalar>(&self, metric: &Metric<T>) -> T {
        self.letters
            .iter()
            .map(|g| metric.weight(g))
            .fold(T::zero(), |a, b| a + b)
    }

    /// Checks every structural invariant; used by property tests.
    pub fn is_well_formed(&self) -> bool {
        if self.source == 0 {
            return false;
        }
        let mut at = self.source;
        let mut prev_sign: Option<Sign> = None;
        for g in &self.letters {
            if g.from != at || g.from == g.to || g.to == 0 || prev_sign == Some(g.sign) {
                return false;
            }
            at = g.to;
            prev_sign = Some(g.sign);
        }
        true
    }
}

impl From<Generator> for ReducedWord {
    fn from(g: Generator) -> Self {
        ReducedWord {
            source: g.from,
            letters: vec![g],
        }
    }
}

impl fmt::Display for ReducedWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return write!(f, "e{}", self.source);
        }
        for g in &self.letters {
            write!(f, "{g}")?;
        }
        Ok(())
    }
}

impl FromStr for ReducedWord {
    type Err = GroupoidError;

    /// Parses `e3` or `A(1,2,+)A(2,5,-)`; non-reduced letter sequences are
    /// reduced on the way in.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = |reason: String| GroupoidError::Parse {
            input: s.to_string(),
            reason,
        };
        if let Some(rest) = s.strip_prefix('e') {
            let source: usize = rest
                .parse()
                .map_err(|_| err(format!("bad unit index {rest:?}")))?;
            if source == 0 {
                return Err(err("window indices are 1-based".into()));
            }
            return Ok(ReducedWord::unit(source));
        }
        let mut generators = Vec::new();
        let mut rest = s;
        while !rest.is_empty() {
            let body = rest
                .strip_prefix("A(")
                .ok_or_else(|| err(format!("expected 'A(' at {rest:?}")))?;
            let close = body
                .find(')')
                .ok_or_else(|| err("unclosed letter".into()))?;
            let fields: Vec<&str> = body[..close].split(',').collect();
            if fields.len() != 3 {
                return Err(err(format!(
                    "letter needs three fields, got {:?}",
                    &body[..close]
                )));
            }
            let i: usize = fields[0]
                .trim()
                .parse()
                .map_err(|_| err(format!("bad window {:?}", fields[0])))?;
            let j: usize = fields[1]
                .trim()
                .parse()
                .map_err(|_| err(format!("bad window {:?}", fields[1])))?;
            let sign = match fields[2].trim() {
                "+" | "1" | "+1" => Sign::Plus,
                "-" | "-1" => Sign::Minus,
                other => return Err(err(format!("bad sign {other:?}"))),
            };
            generators.push(Generator::new(i, j, sign)?);
            rest = &body[close + 1..];
        }
        let first = generators.first().ok_or_else(|| err("empty word".into()))?;
        ReducedWord::from_generators(first.from, generators)
    }
}

/// Which weight table a [`Metric`] uses; reported in JSON outputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Word,
    Fenced,
    Custom,
}

/// Non-negative letter weights; the length of a word is the sum of the
/// weights of its reduced letters.
#[derive(Clone, Debug, PartialEq)]
pub struct Metric<T> {
    kind: MetricKind,
    table: Option<(usize, Vec<T>)>,
}

impl<T: Scalar> Metric<T> {
    /// `|w|`: every letter has weight 1.
    pub fn word() -> Self {
        Metric {
            kind: MetricKind::Word,
            table: None,
        }
    }

    /// `|w|_F`: letter `A(i,j,k)` has weight `|i - j|`.
    pub fn fenced() -> Self {
        Metric {
            kind: MetricKind::Fenced,
            table: None,
        }
    }

    /// Arbitrary table indexed in canonical generator order.
    pub fn custom(n_windows: usize, weights: Vec<T>) -> Result<Self, String> {
        if weights.len() != Generator::count(n_windows) {
            return Err(format!(
                "custom metric needs {} weights for N={n_windows}, got {}",
                Generator::count(n_windows),
                weights.len()
            ));
        }
        if let Some(idx) = weights
            .iter()
            .position(|w| !(*w >= T::zero()) || !w.is_finite())
        {
            return Err(format!(
                "weight of {} must be finite and non-negative",
                Generator::from_index(idx, n_windows)
            ));
        }
        Ok(Metric {
            kind: MetricKind::Custom,
            table: Some((n_windows, weights)),
        })
    }

    pub fn from_fn(n_windows: usize, f: impl Fn(&Generator) -> T) -> Result<Self, String> {
        Metric::custom(
            n_windows,
            Generator::all(n_windows).map(|g| f(&g)).collect(),
        )
    }

    pub fn kind(&self) -> MetricKind {
        self.kind
    }

    /// # Panics
    /// For a custom metric queried with a window beyond its table.
    pub fn weight(&self, g: &Generator) -> T {
        match self.kind {
            MetricKind::Word => T::one(),
            MetricKind::Fenced => T::of(g.from.abs_diff(g.to) as f64),
            MetricKind::Custom => {
                let (n, table) = self.table.as_ref().expect("custom metric has a table");
                let idx = g
                    .index(*n)
                    .unwrap_or_else(|| panic!("{g} outside custom metric for N={n}"));
                table[idx]
            }
        }
    }

    /// True when `w(i,j,k) = w(j,i,k)` for every generator of `n_windows`.
    pub fn is_symmetric(&self, n_windows: usize) -> bool {
        Generator::all(n_windows).all(|g| self.weight(&g) == self.weight(&g.reversed()))
    }
}
