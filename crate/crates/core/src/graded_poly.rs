//! Graded commutative polynomial algebras `S(X)` over the rationals.
//!
//! Monomials are exponent vectors over an ordered list of generators. Odd
//! generators square to zero, and reordering factors produces the Koszul
//! sign. Products whose word length exceeds the truncation bound `D` are
//! dropped; [`AlgebraContext::multiply_tracked`] reports when that happened.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, OnceLock};

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::{parse_rational, Error, Result, Q};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Generator {
    pub name: String,
    pub degree: i64,
}

/// Sign rule used when two factors are swapped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    /// `ab = (-1)^{|a||b|} ba`: the symmetric algebra `S(X)`.
    #[default]
    Symmetric,
    /// `a∧b = -(-1)^{|a||b|} b∧a`: the exterior algebra `Λ(W)`.
    Exterior,
}

/// JSON form `{"generators":[{"name":"x","degree":0}],"truncation":6}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AlgebraSpec {
    pub generators: Vec<Generator>,
    #[serde(default = "default_truncation")]
    pub truncation: usize,
    #[serde(default)]
    pub parity: Parity,
}

fn default_truncation() -> usize {
    crate::DEFAULT_TRUNCATION
}

#[derive(Debug)]
pub struct AlgebraContext {
    generators: Vec<Generator>,
    truncation: usize,
    parity: Parity,
    basis: OnceLock<Vec<Monomial>>,
}

impl PartialEq for AlgebraContext {
    fn eq(&self, other: &Self) -> bool {
        self.generators == other.generators
            && self.truncation == other.truncation
            && self.parity == other.parity
    }
}

impl Eq for AlgebraContext {}

impl AlgebraContext {
    pub fn new(generators: Vec<Generator>, truncation: usize) -> Result<Arc<Self>> {
        Self::with_parity(generators, truncation, Parity::Symmetric)
    }

    pub fn with_parity(
        generators: Vec<Generator>,
        truncation: usize,
        parity: Parity,
    ) -> Result<Arc<Self>> {
        if truncation == 0 {
            return Err(Error::Config("truncation degree must be at least 1".into()));
        }
        for (i, g) in generators.iter().enumerate() {
            if !is_identifier(&g.name) {
                return Err(Error::Config(format!("bad generator name `{}`", g.name)));
            }
            if generators[..i].iter().any(|h| h.name == g.name) {
                return Err(Error::Config(format!("duplicate generator `{}`", g.name)));
            }
        }
        Ok(Arc::new(AlgebraContext {
            generators,
            truncation,
            parity,
            basis: OnceLock::new(),
        }))
    }

    /// Generators given as `(name, degree)` pairs.
    pub fn from_pairs(pairs: &[(&str, i64)], truncation: usize) -> Result<Arc<Self>> {
        Self::new(
            pairs
                .iter()
                .map(|(n, d)| Generator {
                    name: n.to_string(),
                    degree: *d,
                })
                .collect(),
            truncation,
        )
    }

    pub fn from_spec(spec: &AlgebraSpec) -> Result<Arc<Self>> {
        Self::with_parity(spec.generators.clone(), spec.truncation, spec.parity)
    }

    pub fn spec(&self) -> AlgebraSpec {
        AlgebraSpec {
            generators: self.generators.clone(),
            truncation: self.truncation,
            parity: self.parity,
        }
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn ngens(&self) -> usize {
        self.generators.len()
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    /// `S(X)` is always unital.
    pub fn unital(&self) -> bool {
        true
    }

    pub fn generator_index(&self, name: &str) -> Option<usize> {
        self.generators.iter().position(|g| g.name == name)
    }

    /// Parity governing swaps and square-zero behaviour of generator `i`.
    pub fn is_odd(&self, i: usize) -> bool {
        let d = self.generators[i].degree;
        let shift = match self.parity {
            Parity::Symmetric => 0,
            Parity::Exterior => 1,
        };
        (d + shift).rem_euclid(2) == 1
    }

    /// Same generators and truncation with a different bound.
    pub fn with_truncation(&self, truncation: usize) -> Result<Arc<Self>> {
        Self::with_parity(self.generators.clone(), truncation, self.parity)
    }

    pub fn unit(&self) -> Polynomial {
        Polynomial::monomial(self.one(), Q::one())
    }

    pub fn one(&self) -> Monomial {
        Monomial::one(self.ngens())
    }

    pub fn gen(&self, i: usize) -> Monomial {
        let mut e = vec![0; self.ngens()];
        e[i] = 1;
        Monomial { exps: e }
    }

    pub fn var(&self, name: &str) -> Polynomial {
        let i = self
            .generator_index(name)
            .unwrap_or_else(|| panic!("unknown generator `{name}`"));
        Polynomial::monomial(self.gen(i), Q::one())
    }

    pub fn degree(&self, m: &Monomial) -> i64 {
        m.exps
            .iter()
            .zip(&self.generators)
            .map(|(&e, g)| e as i64 * g.degree)
            .sum()
    }

    /// Whether swapping the generators `i` and `j` costs a sign.
    pub fn swap_is_odd(&self, i: usize, j: usize) -> bool {
        match self.parity {
            Parity::Symmetric => self.is_odd(i) && self.is_odd(j),
            Parity::Exterior => (self.generators[i].degree * self.generators[j].degree).rem_euclid(2) == 0,
        }
    }

    /// Sign `ε` with `ab = ε ba` for monomials `a`, `b`.
    pub fn commutation_sign(&self, a: &Monomial, b: &Monomial) -> i8 {
        let mut odd = false;
        for (i, &ei) in a.exps.iter().enumerate() {
            for (j, &ej) in b.exps.iter().enumerate() {
                if (ei * ej) % 2 == 1 && self.swap_is_odd(i, j) {
                    odd = !odd;
                }
            }
        }
        if odd {
            -1
        } else {
            1
        }
    }

    /// Parity of a monomial under the Koszul rule. In an exterior context it
    /// only decides square-zero behaviour; use [`Self::commutation_sign`] for swaps.
    pub fn monomial_parity(&self, m: &Monomial) -> bool {
        let mut odd = false;
        for (i, &e) in m.exps.iter().enumerate() {
            if e % 2 == 1 && self.is_odd(i) {
                odd = !odd;
            }
        }
        odd
    }

    /// Monomials of word length at most `D`, by word length then lexicographically.
    pub fn basis(&self) -> &[Monomial] {
        self.basis.get_or_init(|| self.enumerate_basis(self.truncation))
    }

    pub fn basis_up_to(&self, len: usize) -> Vec<Monomial> {
        self.basis()
            .iter()
            .filter(|m| m.word_length() <= len)
            .cloned()
            .collect()
    }

    fn enumerate_basis(&self, max_len: usize) -> Vec<Monomial> {
        let n = self.ngens();
        let mut out = Vec::new();
        for len in 0..=max_len {
            // Non-decreasing index sequences of length `len` enumerate monomials lexicographically.
            let mut seq: Vec<usize> = Vec::with_capacity(len);
            self.words(n, len, 0, &mut seq, &mut out);
        }
        out
    }

    fn words(
        &self,
        n: usize,
        len: usize,
        start: usize,
        seq: &mut Vec<usize>,
        out: &mut Vec<Monomial>,
    ) {
        if seq.len() == len {
            let mut e = vec![0u32; n];
            for &i in seq.iter() {
                e[i] += 1;
            }
            out.push(Monomial { exps: e });
            return;
        }
        for i in start..n {
            if self.is_odd(i) && seq.last() == Some(&i) {
                continue;
            }
            seq.push(i);
            self.words(n, len, i, seq, out);
            seq.pop();
        }
    }

    /// Sign and product of two monomials, ignoring truncation. `None` when an
    /// odd generator would appear twice.
    pub fn monomial_product(&self, a: &Monomial, b: &Monomial) -> Option<(i8, Monomial)> {
        let n = self.ngens();
        if (0..n).any(|i| self.is_odd(i) && a.exps[i] > 0 && b.exps[i] > 0) {
            return None;
        }
        // Each factor of `b` moves left past the factors of `a` with larger index.
        let mut swaps = 0u32;
        for j in 0..n {
            if b.exps[j].is_multiple_of(2) {
                continue;
            }
            for i in j + 1..n {
                if a.exps[i] % 2 == 1 && self.swap_is_odd(i, j) {
                    swaps += 1;
                }
            }
        }
        let exps: Vec<u32> = (0..n).map(|i| a.exps[i] + b.exps[i]).collect();
        let sign = if swaps.is_multiple_of(2) { 1 } else { -1 };
        Some((sign, Monomial { exps }))
    }

    pub fn multiply(&self, p: &Polynomial, q: &Polynomial) -> Polynomial {
        self.multiply_tracked(p, q).0
    }

    /// Product together with a flag telling whether terms beyond `D` were dropped.
    pub fn multiply_tracked(&self, p: &Polynomial, q: &Polynomial) -> (Polynomial, bool) {
        let mut out = Polynomial::zero();
        let mut truncated = false;
        for (a, ca) in &p.terms {
            for (b, cb) in &q.terms {
                if a.word_length() + b.word_length() > self.truncation {
                    truncated = true;
                    continue;
                }
                if let Some((s, m)) = self.monomial_product(a, b) {
                    let c = ca * cb;
                    out.add_term(m, if s < 0 { -c } else { c });
                }
            }
        }
        (out, truncated)
    }

    pub fn multiply_monomials(&self, a: &Monomial, b: &Monomial) -> Polynomial {
        if a.word_length() + b.word_length() > self.truncation {
            return Polynomial::zero();
        }
        match self.monomial_product(a, b) {
            Some((s, m)) => Polynomial::monomial(m, Q::from_integer(s.into())),
            None => Polynomial::zero(),
        }
    }

    /// Product of a list of polynomials from left to right.
    pub fn product(&self, factors: &[&Polynomial]) -> Polynomial {
        let mut acc = self.unit();
        for f in factors {
            acc = self.multiply(&acc, f);
        }
        acc
    }

    /// The monomial as an ordered product of single generators.
    pub fn factors(&self, m: &Monomial) -> Vec<usize> {
        let mut out = Vec::with_capacity(m.word_length());
        for (i, &e) in m.exps.iter().enumerate() {
            for _ in 0..e {
                out.push(i);
            }
        }
        out
    }

    /// Koszul sign of rearranging a list of homogeneous elements with the given
    /// parities according to `order` (the new list is `items[order[0]], ...`).
    pub fn koszul_sign(parities: &[bool], order: &[usize]) -> i8 {
        let mut odd_swaps = 0usize;
        for a in 0..order.len() {
            for b in (a + 1)..order.len() {
                if order[a] > order[b] && parities[order[a]] && parities[order[b]] {
                    odd_swaps += 1;
                }
            }
        }
        if odd_swaps.is_multiple_of(2) {
            1
        } else {
            -1
        }
    }

    /// Left partial derivative `∂/∂x_i`: the derivation of degree `-|x_i|`
    /// with `∂x_j/∂x_i = δ_ij`.
    pub fn partial(&self, i: usize, p: &Polynomial) -> Polynomial {
        let mut out = Polynomial::zero();
        for (m, c) in &p.terms {
            if let Some((s, mult, rest)) = self.partial_monomial(i, m) {
                let k = c * Q::from_integer((s as i64 * mult as i64).into());
                out.add_term(rest, k);
            }
        }
        out
    }

    /// `∂m/∂x_i = sign * mult * rest`.
    pub fn partial_monomial(&self, i: usize, m: &Monomial) -> Option<(i8, u32, Monomial)> {
        let e = m.exps[i];
        if e == 0 {
            return None;
        }
        // Move x_i to the front past the factors of smaller index.
        let passed: u32 = (0..i)
            .filter(|&j| self.swap_is_odd(i, j))
            .map(|j| m.exps[j] % 2)
            .sum();
        let sign = if passed % 2 == 1 { -1i8 } else { 1 };
        let mut rest = m.clone();
        rest.exps[i] -= 1;
        Some((sign, e, rest))
    }

    pub fn check(&self, p: &Polynomial) -> Result<()> {
        for m in p.terms.keys() {
            if m.exps.len() != self.ngens() {
                return Err(Error::ContextMismatch(
                    "monomial has the wrong number of generators".into(),
                ));
            }
            if m.word_length() > self.truncation {
                return Err(Error::ContextMismatch(format!(
                    "monomial of word length {} exceeds truncation {}",
                    m.word_length(),
                    self.truncation
                )));
            }
            if (0..self.ngens()).any(|i| self.is_odd(i) && m.exps[i] > 1) {
                return Err(Error::ContextMismatch("odd generator squared".into()));
            }
        }
        Ok(())
    }

    pub fn try_multiply(&self, p: &Polynomial, q: &Polynomial) -> Result<Polynomial> {
        self.check(p)?;
        self.check(q)?;
        Ok(self.multiply(p, q))
    }

    pub fn format_monomial(&self, m: &Monomial) -> String {
        if m.is_one() {
            return "1".into();
        }
        let mut parts = Vec::new();
        for (i, &e) in m.exps.iter().enumerate() {
            match e {
                0 => {}
                1 => parts.push(self.generators[i].name.clone()),
                _ => parts.push(format!("{}^{}", self.generators[i].name, e)),
            }
        }
        parts.join(" ")
    }

    pub fn format(&self, p: &Polynomial) -> String {
        if p.is_zero() {
            return "0".into();
        }
        let mut s = String::new();
        for (k, (m, c)) in p.terms.iter().enumerate() {
            let neg = c.is_negative();
            let a = c.abs();
            if k == 0 {
                if neg {
                    s.push('-');
                }
            } else {
                s.push_str(if neg { " - " } else { " + " });
            }
            if m.is_one() {
                s.push_str(&a.to_string());
            } else {
                if !a.is_one() {
                    s.push_str(&a.to_string());
                    s.push(' ');
                }
                s.push_str(&self.format_monomial(m));
            }
        }
        s
    }

    /// Parses text such as `3/2 x^2 y - z + 1`. Factors are multiplied in the
    /// written order, so odd generators pick up Koszul signs.
    pub fn parse(&self, text: &str) -> Result<Polynomial> {
        let toks = tokenize(text)?;
        let mut out = Polynomial::zero();
        let mut i = 0;
        if toks.is_empty() {
            return Err(Error::Parse("empty polynomial".into()));
        }
        while i < toks.len() {
            let mut sign = Q::one();
            while let Some(Tok::Sign(s)) = toks.get(i) {
                if *s < 0 {
                    sign = -sign;
                }
                i += 1;
            }
            let mut term = Polynomial::constant_in(self, sign);
            let mut any = false;
            while let Some(t) = toks.get(i) {
                match t {
                    Tok::Sign(_) => break,
                    Tok::Num(q) => term = term.scale(q),
                    Tok::Var(name, e) => {
                        let gi = self
                            .generator_index(name)
                            .ok_or_else(|| Error::Parse(format!("unknown generator `{name}`")))?;
                        for _ in 0..*e {
                            let g = Polynomial::monomial(self.gen(gi), Q::one());
                            term = self.multiply(&term, &g);
                        }
                    }
                }
                any = true;
                i += 1;
            }
            if !any {
                return Err(Error::Parse(format!("dangling sign in `{text}`")));
            }
            out = out.add(&term);
        }
        Ok(out)
    }

    pub fn parse_monomial(&self, text: &str) -> Result<Monomial> {
        let p = self.parse(text)?;
        if p.terms.len() != 1 {
            return Err(Error::Parse(format!("`{text}` is not a single monomial")));
        }
        let (m, c) = p.terms.into_iter().next().expect("one term");
        if !c.is_one() {
            return Err(Error::Parse(format!(
                "`{text}` is not in canonical factor order"
            )));
        }
        Ok(m)
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_alphabetic() || c == '_' || !c.is_ascii() => {}
        _ => return false,
    }
    chars.all(|c| c.is_alphanumeric() || c == '_' || !c.is_ascii())
}

enum Tok {
    Sign(i8),
    Num(Q),
    Var(String, u32),
}

fn tokenize(text: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    let mut out = Vec::new();
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() || c == '*' {
            i += 1;
        } else if c == '+' || c == '-' {
            out.push(Tok::Sign(if c == '-' { -1 } else { 1 }));
            i += 1;
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '/') {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            out.push(Tok::Num(parse_rational(&s)?));
        } else if c.is_alphabetic() || c == '_' || !c.is_ascii() {
            let start = i;
            while i < chars.len()
                && (chars[i].is_alphanumeric() || chars[i] == '_' || !chars[i].is_ascii())
                && !chars[i].is_whitespace()
            {
                i += 1;
            }
            let name: String = chars[start..i].iter().collect();
            let mut e = 1u32;
            if i < chars.len() && chars[i] == '^' {
                i += 1;
                let s = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let digits: String = chars[s..i].iter().collect();
                e = digits
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad exponent in `{text}`")))?;
            }
            out.push(Tok::Var(name, e));
        } else {
            return Err(Error::Parse(format!("unexpected `{c}` in `{text}`")));
        }
    }
    Ok(out)
}

/// Exponent vector over the generators of a context.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Monomial {
    exps: Vec<u32>,
}

impl Monomial {
    pub fn one(ngens: usize) -> Self {
        Monomial {
            exps: vec![0; ngens],
        }
    }

    pub fn from_exponents(exps: Vec<u32>) -> Self {
        Monomial { exps }
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exps
    }

    pub fn word_length(&self) -> usize {
        self.exps.iter().map(|&e| e as usize).sum()
    }

    pub fn is_one(&self) -> bool {
        self.exps.iter().all(|&e| e == 0)
    }

    pub fn divides(&self, other: &Monomial) -> bool {
        self.exps.iter().zip(&other.exps).all(|(a, b)| a <= b)
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        // Word length first, then lexicographic order on the ascending factor
        // sequence, which is the reverse of the exponent-vector order.
        self.word_length()
            .cmp(&other.word_length())
            .then_with(|| other.exps.cmp(&self.exps))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Finite rational combination of monomials with no zero coefficients.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Polynomial {
    terms: BTreeMap<Monomial, Q>,
}

impl Polynomial {
    pub fn zero() -> Self {
        Polynomial::default()
    }

    pub fn constant_in(ctx: &AlgebraContext, c: Q) -> Self {
        Polynomial::monomial(ctx.one(), c)
    }

    pub fn monomial(m: Monomial, c: Q) -> Self {
        let mut p = Polynomial::zero();
        p.add_term(m, c);
        p
    }

    pub fn terms(&self) -> &BTreeMap<Monomial, Q> {
        &self.terms
    }

    pub fn into_terms(self) -> BTreeMap<Monomial, Q> {
        self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, m: &Monomial) -> Q {
        self.terms.get(m).cloned().unwrap_or_else(Q::zero)
    }

    pub fn add_term(&mut self, m: Monomial, c: Q) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(x) => {
                *x += c;
                if x.is_zero() {
                    self.terms.remove(&m);
                }
            }
            None => {
                self.terms.insert(m, c);
            }
        }
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        out.add_assign(other);
        out
    }

    pub fn add_assign(&mut self, other: &Polynomial) {
        for (m, c) in &other.terms {
            self.add_term(m.clone(), c.clone());
        }
    }

    pub fn add_scaled(&mut self, c: &Q, other: &Polynomial) {
        if c.is_zero() {
            return;
        }
        for (m, x) in &other.terms {
            self.add_term(m.clone(), c * x);
        }
    }

    pub fn sub(&self, other: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        out.add_scaled(&-Q::one(), other);
        out
    }

    pub fn neg(&self) -> Polynomial {
        self.scale(&-Q::one())
    }

    pub fn scale(&self, c: &Q) -> Polynomial {
        if c.is_zero() {
            return Polynomial::zero();
        }
        Polynomial {
            terms: self
                .terms
                .iter()
                .map(|(m, x)| (m.clone(), x * c))
                .collect(),
        }
    }

    pub fn scale_i(&self, c: i64) -> Polynomial {
        self.scale(&Q::from_integer(c.into()))
    }

    /// Largest word length of a term, `None` for zero.
    pub fn max_word_length(&self) -> Option<usize> {
        self.terms.keys().map(|m| m.word_length()).max()
    }

    pub fn min_word_length(&self) -> Option<usize> {
        self.terms.keys().map(|m| m.word_length()).min()
    }

    /// Splits into homogeneous parity components `(even, odd)`.
    pub fn parity_parts(&self, ctx: &AlgebraContext) -> (Polynomial, Polynomial) {
        let mut even = Polynomial::zero();
        let mut odd = Polynomial::zero();
        for (m, c) in &self.terms {
            if ctx.monomial_parity(m) {
                odd.add_term(m.clone(), c.clone());
            } else {
                even.add_term(m.clone(), c.clone());
            }
        }
        (even, odd)
    }
}

/// Which isomorphism [`suspend_iso`] applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SuspensionMap {
    /// `f : Λ(W) → S(↑W)`, with `f(u∧v) = (-1)^{b|u|} f(u) f(v)` for `v` of word length `b`.
    F,
    FInverse,
    /// `g : S(↓W) → S(↑W)`, the same recursion without the sign.
    G,
    GInverse,
}

/// The contexts `Λ(W)`, `S(↓W)` and `S(↑W)` built from a list of generators of `W`.
#[derive(Clone, Debug)]
pub struct SuspensionContexts {
    pub exterior: Arc<AlgebraContext>,
    pub down: Arc<AlgebraContext>,
    pub up: Arc<AlgebraContext>,
}

impl SuspensionContexts {
    pub fn new(w: &[Generator], truncation: usize) -> Result<Self> {
        let shift = |prefix: &str, by: i64| -> Vec<Generator> {
            w.iter()
                .map(|g| Generator {
                    name: format!("{prefix}{}", g.name),
                    degree: g.degree + by,
                })
                .collect()
        };
        Ok(SuspensionContexts {
            exterior: AlgebraContext::with_parity(w.to_vec(), truncation, Parity::Exterior)?,
            down: AlgebraContext::new(shift("↓", -1), truncation)?,
            up: AlgebraContext::new(shift("↑", 1), truncation)?,
        })
    }
}

/// Sign of `f` on a canonical exterior monomial `w_{i1}∧…∧w_{in}`, obtained by
/// peeling one factor at a time: `f(w ∧ rest) = (-1)^{(n-1)|w|} ↑w · f(rest)`.
fn f_sign(ctx: &AlgebraContext, m: &Monomial) -> i8 {
    let factors = ctx.factors(m);
    let n = factors.len();
    let mut odd = false;
    for (k, &i) in factors.iter().enumerate() {
        let rest = (n - 1 - k) as i64;
        if (rest * ctx.generators()[i].degree).rem_euclid(2) == 1 {
            odd = !odd;
        }
    }
    if odd {
        -1
    } else {
        1
    }
}

/// Applies one of the suspension isomorphisms to `u`, which must be homogeneous
/// in word length.
pub fn suspend_iso(u: &Polynomial, map: SuspensionMap, ctxs: &SuspensionContexts) -> Result<Polynomial> {
    let lens: std::collections::BTreeSet<usize> = u.terms.keys().map(|m| m.word_length()).collect();
    if lens.len() > 1 {
        return Err(Error::NotHomogeneous(
            "suspension maps need a fixed word length".into(),
        ));
    }
    let (src, dst) = match map {
        SuspensionMap::F => (&ctxs.exterior, &ctxs.up),
        SuspensionMap::FInverse => (&ctxs.up, &ctxs.exterior),
        SuspensionMap::G => (&ctxs.down, &ctxs.up),
        SuspensionMap::GInverse => (&ctxs.up, &ctxs.down),
    };
    src.check(u)?;
    let mut out = Polynomial::zero();
    for (m, c) in &u.terms {
        // Odd/even roles swap between the exterior and symmetric pictures, so a
        // canonical word in one is canonical in the other.
        let target = m.clone();
        let sign = match map {
            SuspensionMap::F | SuspensionMap::FInverse => f_sign(&ctxs.exterior, m),
            SuspensionMap::G | SuspensionMap::GInverse => 1,
        };
        out.add_term(target, if sign < 0 { -c.clone() } else { c.clone() });
    }
    dst.check(&out)?;
    Ok(out)
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.exps)
    }
}
