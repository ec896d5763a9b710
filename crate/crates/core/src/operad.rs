//! Free k-linear operads on Σ-module generators, their tree-monomial bases,
//! partial compositions, the symmetric-group action, operadic commutators
//! `[−,−]ᵢⱼ` and arity-wise quotients by operadic ideals.
//!
//! Permutations are 0-based image vectors: `sigma[k] = σ(k+1) − 1`. The right
//! action relabels leaf `ℓ` of a tree by `σ⁻¹(ℓ)`, so an element with slot
//! orders `p⃗` is sent to one with slot orders `(p_{σ(1)}, .., p_{σ(n)})`.

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use itertools::Itertools;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::graded_poly::AlgebraContext;
use crate::linalg::{axpy, zero_vector, Subspace, Vector};
use crate::{parse_rational, Error, Result, Q};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GenSymmetry {
    /// Trivial representation: inputs may be permuted freely.
    Symmetric,
    /// Sign representation.
    Antisymmetric,
    /// Regular representation: no relation between input orders.
    Regular,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SigmaGenerator {
    pub name: String,
    pub arity: usize,
    #[serde(default)]
    pub degree: i64,
    pub symmetry: GenSymmetry,
}

impl SigmaGenerator {
    pub fn new(name: &str, arity: usize, degree: i64, symmetry: GenSymmetry) -> Self {
        SigmaGenerator {
            name: name.to_string(),
            arity,
            degree,
            symmetry,
        }
    }
}

/// Validated list of generators.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Signature {
    gens: Vec<SigmaGenerator>,
}

impl Signature {
    pub fn new(gens: Vec<SigmaGenerator>) -> Result<Self> {
        for (i, g) in gens.iter().enumerate() {
            if g.arity == 0 {
                return Err(Error::Config(format!("generator `{}` has arity 0", g.name)));
            }
            if g.name.is_empty() || !g.name.chars().all(|c| c.is_alphanumeric() || c == '_') {
                return Err(Error::Config(format!("bad generator name `{}`", g.name)));
            }
            if g.name.chars().next().is_some_and(|c| c.is_ascii_digit()) {
                return Err(Error::Config(format!("generator name `{}` starts with a digit", g.name)));
            }
            if gens[..i].iter().any(|h| h.name == g.name) {
                return Err(Error::Config(format!("duplicate generator `{}`", g.name)));
            }
        }
        Ok(Signature { gens })
    }

    pub fn generators(&self) -> &[SigmaGenerator] {
        &self.gens
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.gens.iter().position(|g| g.name == name)
    }

    /// No generator of arity one.
    pub fn is_simply_connected(&self) -> bool {
        self.gens.iter().all(|g| g.arity >= 2)
    }

    pub fn min_arity(&self) -> Option<usize> {
        self.gens.iter().map(|g| g.arity).min()
    }
}

/// Tree monomial with labelled leaves `1..n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tree {
    Leaf(u32),
    Node(usize, Vec<Tree>),
}

impl Tree {
    pub fn leaf_count(&self) -> usize {
        match self {
            Tree::Leaf(_) => 1,
            Tree::Node(_, ch) => ch.iter().map(|c| c.leaf_count()).sum(),
        }
    }

    pub fn min_leaf(&self) -> u32 {
        match self {
            Tree::Leaf(l) => *l,
            Tree::Node(_, ch) => ch.iter().map(|c| c.min_leaf()).min().unwrap_or(u32::MAX),
        }
    }

    pub fn degree(&self, sig: &Signature) -> i64 {
        match self {
            Tree::Leaf(_) => 0,
            Tree::Node(g, ch) => sig.gens[*g].degree + ch.iter().map(|c| c.degree(sig)).sum::<i64>(),
        }
    }

    fn relabel(&self, f: &impl Fn(u32) -> u32) -> Tree {
        match self {
            Tree::Leaf(l) => Tree::Leaf(f(*l)),
            Tree::Node(g, ch) => Tree::Node(*g, ch.iter().map(|c| c.relabel(f)).collect()),
        }
    }

    /// Sum of vertex degrees met after leaf `i` in preorder, or `None` if absent.
    fn degree_after_leaf(&self, sig: &Signature, i: u32) -> Option<i64> {
        fn go(t: &Tree, sig: &Signature, i: u32, seen: &mut bool, acc: &mut i64) {
            match t {
                Tree::Leaf(l) => {
                    if *l == i {
                        *seen = true;
                    }
                }
                Tree::Node(g, ch) => {
                    if *seen {
                        *acc += sig.gens[*g].degree;
                    }
                    for c in ch {
                        go(c, sig, i, seen, acc);
                    }
                }
            }
        }
        let mut seen = false;
        let mut acc = 0;
        go(self, sig, i, &mut seen, &mut acc);
        seen.then_some(acc)
    }

    fn replace_leaf(&self, i: u32, b: &Tree, shift: u32) -> Tree {
        match self {
            Tree::Leaf(l) if *l == i => b.clone(),
            Tree::Leaf(l) if *l > i => Tree::Leaf(l + shift),
            Tree::Leaf(l) => Tree::Leaf(*l),
            Tree::Node(g, ch) => Tree::Node(*g, ch.iter().map(|c| c.replace_leaf(i, b, shift)).collect()),
        }
    }

    pub fn format(&self, sig: &Signature) -> String {
        match self {
            Tree::Leaf(l) => l.to_string(),
            Tree::Node(g, ch) => format!(
                "{}({})",
                sig.gens[*g].name,
                ch.iter().map(|c| c.format(sig)).join(",")
            ),
        }
    }
}

/// Normal form: children of (anti)symmetric vertices sorted by least leaf.
/// Returns the sign relating the input to the normal form.
pub fn normalize(sig: &Signature, t: &Tree) -> (bool, Tree) {
    match t {
        Tree::Leaf(l) => (false, Tree::Leaf(*l)),
        Tree::Node(g, ch) => {
            let mut negative = false;
            let mut kids = Vec::with_capacity(ch.len());
            for c in ch {
                let (s, n) = normalize(sig, c);
                negative ^= s;
                kids.push(n);
            }
            let gen = &sig.gens[*g];
            if gen.symmetry != GenSymmetry::Regular && kids.len() > 1 {
                let mut order: Vec<usize> = (0..kids.len()).collect();
                order.sort_by_key(|&k| kids[k].min_leaf());
                let parities: Vec<bool> = kids.iter().map(|k| k.degree(sig).rem_euclid(2) == 1).collect();
                if AlgebraContext::koszul_sign(&parities, &order) < 0 {
                    negative = !negative;
                }
                if gen.symmetry == GenSymmetry::Antisymmetric && permutation_is_odd(&order) {
                    negative = !negative;
                }
                let sorted: Vec<Tree> = order.iter().map(|&k| kids[k].clone()).collect();
                kids = sorted;
            }
            (negative, Tree::Node(*g, kids))
        }
    }
}

pub fn permutation_is_odd(p: &[usize]) -> bool {
    let mut inv = 0usize;
    for a in 0..p.len() {
        for b in a + 1..p.len() {
            if p[a] > p[b] {
                inv += 1;
            }
        }
    }
    inv % 2 == 1
}

pub fn invert(p: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; p.len()];
    for (k, &v) in p.iter().enumerate() {
        inv[v] = k;
    }
    inv
}

pub fn is_permutation(p: &[usize]) -> bool {
    let mut seen = vec![false; p.len()];
    for &v in p {
        if v >= p.len() || seen[v] {
            return false;
        }
        seen[v] = true;
    }
    true
}

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    (0..n).permutations(n).collect()
}

/// `(p,q)`-shuffles as 0-based image vectors: increasing on `0..p` and on `p..p+q`.
pub fn shuffles(p: usize, q: usize) -> Vec<Vec<usize>> {
    (0..p + q)
        .combinations(p)
        .map(|first| {
            let rest: Vec<usize> = (0..p + q).filter(|x| !first.contains(x)).collect();
            first.into_iter().chain(rest).collect()
        })
        .collect()
}

/// Grafts `b` into slot `i` (1-based) of `a`, renormalized.
pub fn graft(sig: &Signature, a: &Tree, i: usize, b: &Tree) -> Result<(bool, Tree)> {
    let m = a.leaf_count();
    if i == 0 || i > m {
        return Err(Error::Index(format!("∘_{i} on an element of arity {m}")));
    }
    let n = b.leaf_count() as u32;
    let i32_ = i as u32;
    let after = a
        .degree_after_leaf(sig, i32_)
        .ok_or_else(|| Error::Index(format!("tree has no leaf {i}")))?;
    let bdeg = b.degree(sig);
    let shifted = b.relabel(&|l| l + i32_ - 1);
    let t = a.replace_leaf(i32_, &shifted, n - 1);
    let (s, t) = normalize(sig, &t);
    let koszul = (bdeg * after).rem_euclid(2) == 1;
    Ok((s ^ koszul, t))
}

/// Leaf relabelling `ℓ ↦ σ⁻¹(ℓ)`, renormalized.
pub fn act_tree(sig: &Signature, t: &Tree, sigma: &[usize]) -> (bool, Tree) {
    let inv = invert(sigma);
    let r = t.relabel(&|l| inv[(l - 1) as usize] as u32 + 1);
    normalize(sig, &r)
}

/// Finite rational combination of normalized trees of a fixed arity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OperadElement {
    arity: usize,
    terms: BTreeMap<Tree, Q>,
}

impl OperadElement {
    pub fn zero(arity: usize) -> Self {
        OperadElement {
            arity,
            terms: BTreeMap::new(),
        }
    }

    /// The operad unit in arity one.
    pub fn unit() -> Self {
        let mut e = Self::zero(1);
        e.terms.insert(Tree::Leaf(1), Q::one());
        e
    }

    pub fn from_tree(sig: &Signature, t: &Tree) -> Result<Self> {
        validate_tree(sig, t)?;
        let (s, n) = normalize(sig, t);
        let mut e = Self::zero(t.leaf_count());
        e.add_term(n, if s { -Q::one() } else { Q::one() });
        Ok(e)
    }

    /// The corolla of generator `g` with leaves `1..k` in order.
    pub fn generator(sig: &Signature, g: usize) -> Self {
        let k = sig.gens[g].arity as u32;
        let t = Tree::Node(g, (1..=k).map(Tree::Leaf).collect());
        Self::from_tree(sig, &t).expect("corolla is valid")
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn terms(&self) -> &BTreeMap<Tree, Q> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn add_term(&mut self, t: Tree, c: Q) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(t) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn add_scaled(&mut self, c: &Q, other: &OperadElement) {
        assert_eq!(self.arity, other.arity, "adding elements of different arities");
        for (t, v) in &other.terms {
            self.add_term(t.clone(), c * v);
        }
    }

    pub fn add(&self, other: &OperadElement) -> OperadElement {
        let mut out = self.clone();
        out.add_scaled(&Q::one(), other);
        out
    }

    pub fn sub(&self, other: &OperadElement) -> OperadElement {
        let mut out = self.clone();
        out.add_scaled(&-Q::one(), other);
        out
    }

    pub fn scale(&self, c: &Q) -> OperadElement {
        let mut out = Self::zero(self.arity);
        out.add_scaled(c, self);
        out
    }

    /// Internal degree when homogeneous; zero elements report `None`.
    pub fn degree(&self, sig: &Signature) -> Result<Option<i64>> {
        let mut d = None;
        for t in self.terms.keys() {
            let e = t.degree(sig);
            match d {
                None => d = Some(e),
                Some(x) if x != e => {
                    return Err(Error::NotHomogeneous("operad element mixes degrees".into()))
                }
                _ => {}
            }
        }
        Ok(d)
    }

    pub fn compose(&self, sig: &Signature, i: usize, b: &OperadElement) -> Result<OperadElement> {
        if i == 0 || i > self.arity {
            return Err(Error::Index(format!("∘_{i} on an element of arity {}", self.arity)));
        }
        let mut out = Self::zero(self.arity + b.arity - 1);
        for (ta, ca) in &self.terms {
            for (tb, cb) in &b.terms {
                let (s, t) = graft(sig, ta, i, tb)?;
                let c = ca * cb;
                out.add_term(t, if s { -c } else { c });
            }
        }
        Ok(out)
    }

    pub fn act(&self, sig: &Signature, sigma: &[usize]) -> Result<OperadElement> {
        if sigma.len() != self.arity || !is_permutation(sigma) {
            return Err(Error::Index(format!(
                "permutation of size {} acting on arity {}",
                sigma.len(),
                self.arity
            )));
        }
        let mut out = Self::zero(self.arity);
        for (t, c) in &self.terms {
            let (s, n) = act_tree(sig, t, sigma);
            out.add_term(n, if s { -c.clone() } else { c.clone() });
        }
        Ok(out)
    }

    /// `[a,b]ᵢⱼ = (a∘ᵢb)·σ₁ − (−1)^{|a||b|}(b∘ⱼa)·σ₂`, with slots arranged as
    /// `(b_L, a_L, •, b_R, a_R)`.
    pub fn commutator(&self, sig: &Signature, b: &OperadElement, i: usize, j: usize) -> Result<OperadElement> {
        let (m, n) = (self.arity, b.arity);
        if i == 0 || i > m || j == 0 || j > n {
            return Err(Error::Index(format!("[−,−]_{{{i}{j}}} on arities {m} and {n}")));
        }
        let da = self.degree(sig)?.unwrap_or(0);
        let db = b.degree(sig)?.unwrap_or(0);
        let (s1, s2) = commutator_permutations(m, n, i, j);
        let left = self.compose(sig, i, b)?.act(sig, &s1)?;
        let right = b.compose(sig, j, self)?.act(sig, &s2)?;
        let c = if (da * db).rem_euclid(2) == 1 { Q::one() } else { -Q::one() };
        let mut out = left;
        out.add_scaled(&c, &right);
        Ok(out)
    }

    pub fn format(&self, sig: &Signature) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let mut s = String::new();
        for (k, (t, c)) in self.terms.iter().enumerate() {
            let neg = c < &Q::zero();
            let a = if neg { -c.clone() } else { c.clone() };
            if k == 0 {
                if neg {
                    s.push('-');
                }
            } else {
                s.push_str(if neg { " - " } else { " + " });
            }
            if !a.is_one() {
                s.push_str(&format!("{a} "));
            }
            s.push_str(&t.format(sig));
        }
        s
    }

    /// Parses `b(b(1,2),3) - 1/2 b(1,b(2,3))`.
    pub fn parse(sig: &Signature, text: &str) -> Result<OperadElement> {
        let toks = tokenize(text)?;
        let mut p = Parser { toks, pos: 0, sig };
        let e = p.expression()?;
        if p.pos != p.toks.len() {
            return Err(Error::Parse(format!("trailing input in `{text}`")));
        }
        Ok(e)
    }
}

/// The two block permutations in the operadic commutator.
pub fn commutator_permutations(m: usize, n: usize, i: usize, j: usize) -> (Vec<usize>, Vec<usize>) {
    let total = m + n - 1;
    let mut s1: Vec<usize> = (0..total).collect();
    for k in 1..j {
        s1[k - 1] = i - 1 + k - 1;
    }
    for k in 1..i {
        s1[j - 1 + k - 1] = k - 1;
    }
    let mut s2: Vec<usize> = (0..total).collect();
    let base = i + j - 1;
    for k in 1..=(n - j) {
        s2[base + k - 1] = base + (m - i) + k - 1;
    }
    for k in 1..=(m - i) {
        s2[base + (n - j) + k - 1] = base + k - 1;
    }
    (s1, s2)
}

fn validate_tree(sig: &Signature, t: &Tree) -> Result<()> {
    let n = t.leaf_count();
    let mut seen = vec![false; n];
    fn go(sig: &Signature, t: &Tree, seen: &mut [bool]) -> Result<()> {
        match t {
            Tree::Leaf(l) => {
                let k = *l as usize;
                if k == 0 || k > seen.len() || seen[k - 1] {
                    return Err(Error::Parse(format!("leaf labels must be a permutation; bad label {l}")));
                }
                seen[k - 1] = true;
                Ok(())
            }
            Tree::Node(g, ch) => {
                let gen = sig
                    .gens
                    .get(*g)
                    .ok_or_else(|| Error::Parse(format!("unknown generator index {g}")))?;
                if gen.arity != ch.len() {
                    return Err(Error::Parse(format!(
                        "`{}` takes {} inputs, got {}",
                        gen.name,
                        gen.arity,
                        ch.len()
                    )));
                }
                ch.iter().try_for_each(|c| go(sig, c, seen))
            }
        }
    }
    go(sig, t, &mut seen)
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(String),
    Name(String),
    LParen,
    RParen,
    Comma,
    Plus,
    Minus,
    Star,
    Slash,
}

fn tokenize(s: &str) -> Result<Vec<Tok>> {
    let mut out = Vec::new();
    let cs: Vec<char> = s.chars().collect();
    let mut k = 0;
    while k < cs.len() {
        let c = cs[k];
        match c {
            ' ' | '\t' | '\n' => k += 1,
            '(' => {
                out.push(Tok::LParen);
                k += 1
            }
            ')' => {
                out.push(Tok::RParen);
                k += 1
            }
            ',' => {
                out.push(Tok::Comma);
                k += 1
            }
            '+' => {
                out.push(Tok::Plus);
                k += 1
            }
            '-' => {
                out.push(Tok::Minus);
                k += 1
            }
            '*' => {
                out.push(Tok::Star);
                k += 1
            }
            '/' => {
                out.push(Tok::Slash);
                k += 1
            }
            d if d.is_ascii_digit() => {
                let st = k;
                while k < cs.len() && cs[k].is_ascii_digit() {
                    k += 1;
                }
                out.push(Tok::Num(cs[st..k].iter().collect()));
            }
            a if a.is_alphabetic() || a == '_' => {
                let st = k;
                while k < cs.len() && (cs[k].is_alphanumeric() || cs[k] == '_') {
                    k += 1;
                }
                out.push(Tok::Name(cs[st..k].iter().collect()));
            }
            other => return Err(Error::Parse(format!("unexpected character `{other}`"))),
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<Tok>,
    pos: usize,
    sig: &'a Signature,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expect(&mut self, t: Tok) -> Result<()> {
        match self.next() {
            Some(x) if x == t => Ok(()),
            other => Err(Error::Parse(format!("expected {t:?}, found {other:?}"))),
        }
    }

    fn expression(&mut self) -> Result<OperadElement> {
        let mut acc: Option<OperadElement> = None;
        let mut first = true;
        loop {
            let mut negative = false;
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    negative = true;
                }
                None if !first => break,
                _ if first => {}
                _ => break,
            }
            first = false;
            let (c, t) = self.term()?;
            let c = if negative { -c } else { c };
            let e = OperadElement::from_tree(self.sig, &t)?.scale(&c);
            acc = Some(match acc {
                None => e,
                Some(a) => {
                    if a.arity != e.arity {
                        return Err(Error::Parse("terms of different arities".into()));
                    }
                    a.add(&e)
                }
            });
            if self.peek().is_none() {
                break;
            }
        }
        acc.ok_or_else(|| Error::Parse("empty expression".into()))
    }

    fn term(&mut self) -> Result<(Q, Tree)> {
        if let Some(Tok::Num(n)) = self.peek().cloned() {
            // A number is a coefficient when followed by `*`, `/` or a generator name.
            match self.toks.get(self.pos + 1) {
                Some(Tok::Star) | Some(Tok::Slash) | Some(Tok::Name(_)) => {
                    self.pos += 1;
                    let mut text = n;
                    if self.peek() == Some(&Tok::Slash) {
                        self.pos += 1;
                        match self.next() {
                            Some(Tok::Num(d)) => text = format!("{text}/{d}"),
                            other => return Err(Error::Parse(format!("bad denominator {other:?}"))),
                        }
                    }
                    if self.peek() == Some(&Tok::Star) {
                        self.pos += 1;
                    }
                    let c = parse_rational(&text)?;
                    return Ok((c, self.tree()?));
                }
                _ => {}
            }
        }
        Ok((Q::one(), self.tree()?))
    }

    fn tree(&mut self) -> Result<Tree> {
        match self.next() {
            Some(Tok::Num(n)) => Ok(Tree::Leaf(
                n.parse().map_err(|_| Error::Parse(format!("bad leaf `{n}`")))?,
            )),
            Some(Tok::Name(name)) => {
                let g = self
                    .sig
                    .index(&name)
                    .ok_or_else(|| Error::Parse(format!("unknown generator `{name}`")))?;
                self.expect(Tok::LParen)?;
                let mut ch = vec![self.tree()?];
                while self.peek() == Some(&Tok::Comma) {
                    self.pos += 1;
                    ch.push(self.tree()?);
                }
                self.expect(Tok::RParen)?;
                Ok(Tree::Node(g, ch))
            }
            other => Err(Error::Parse(format!("expected a tree, found {other:?}"))),
        }
    }
}

/// Ordered basis of one component of a free operad.
#[derive(Debug)]
pub struct Component {
    arity: usize,
    basis: Vec<Tree>,
    degrees: Vec<i64>,
    index: HashMap<Tree, usize>,
}

impl Component {
    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Tree] {
        &self.basis
    }

    pub fn degrees(&self) -> &[i64] {
        &self.degrees
    }

    pub fn index_of(&self, t: &Tree) -> Option<usize> {
        self.index.get(t).copied()
    }
}

type SignedMap = Arc<Vec<(usize, i8)>>;

/// Free operad on a signature with components up to `max_arity`.
pub struct FreeOperad {
    sig: Signature,
    max_arity: usize,
    components: Vec<OnceLock<Arc<Component>>>,
    compose_cache: Mutex<HashMap<(usize, usize, usize), SignedMap>>,
    act_cache: Mutex<HashMap<Vec<usize>, SignedMap>>,
}

impl fmt::Debug for FreeOperad {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FreeOperad")
            .field("generators", &self.sig.gens)
            .field("max_arity", &self.max_arity)
            .finish()
    }
}

impl FreeOperad {
    pub fn new(gens: Vec<SigmaGenerator>, max_arity: usize) -> Result<Arc<Self>> {
        let sig = Signature::new(gens)?;
        Ok(Arc::new(FreeOperad {
            sig,
            max_arity,
            components: (0..=max_arity).map(|_| OnceLock::new()).collect(),
            compose_cache: Mutex::new(HashMap::new()),
            act_cache: Mutex::new(HashMap::new()),
        }))
    }

    pub fn signature(&self) -> &Signature {
        &self.sig
    }

    pub fn max_arity(&self) -> usize {
        self.max_arity
    }

    pub fn component(&self, n: usize) -> Result<Arc<Component>> {
        if n > self.max_arity {
            return Err(Error::ArityBound(n, self.max_arity));
        }
        if !self.sig.is_simply_connected() {
            return Err(Error::NotSimplyConnected(
                "arity-one generators make components infinite-dimensional".into(),
            ));
        }
        Ok(self.components[n]
            .get_or_init(|| Arc::new(self.build_component(n)))
            .clone())
    }

    pub fn dim(&self, n: usize) -> Result<usize> {
        Ok(self.component(n)?.dim())
    }

    fn build_component(&self, n: usize) -> Component {
        let mut memo: HashMap<usize, Vec<Tree>> = HashMap::new();
        let basis = if n == 0 {
            Vec::new()
        } else {
            standard_trees(&self.sig, n, &mut memo)
        };
        let degrees = basis.iter().map(|t| t.degree(&self.sig)).collect();
        let index = basis.iter().cloned().enumerate().map(|(i, t)| (t, i)).collect();
        Component {
            arity: n,
            basis,
            degrees,
            index,
        }
    }

    pub fn to_vector(&self, e: &OperadElement) -> Result<Vector> {
        let c = self.component(e.arity)?;
        let mut v = zero_vector(c.dim());
        for (t, x) in &e.terms {
            let i = c
                .index_of(t)
                .ok_or_else(|| Error::Invalid(format!("tree {} is not a basis monomial", t.format(&self.sig))))?;
            v[i] = x.clone();
        }
        Ok(v)
    }

    pub fn from_vector(&self, n: usize, v: &[Q]) -> Result<OperadElement> {
        let c = self.component(n)?;
        let mut e = OperadElement::zero(n);
        for (i, x) in v.iter().enumerate() {
            if !x.is_zero() {
                e.terms.insert(c.basis[i].clone(), x.clone());
            }
        }
        Ok(e)
    }

    /// Signed image index of `basis_k[a] ∘ᵢ basis_l[b]`, stored at `a·dim_l + b`.
    fn compose_table(&self, k: usize, i: usize, l: usize) -> Result<SignedMap> {
        if let Some(t) = self.compose_cache.lock().unwrap().get(&(k, i, l)) {
            return Ok(t.clone());
        }
        let ck = self.component(k)?;
        let cl = self.component(l)?;
        let cn = self.component(k + l - 1)?;
        let mut table = Vec::with_capacity(ck.dim() * cl.dim());
        for a in &ck.basis {
            for b in &cl.basis {
                let (s, t) = graft(&self.sig, a, i, b)?;
                let idx = cn
                    .index_of(&t)
                    .ok_or_else(|| Error::Invalid("graft left the basis".into()))?;
                table.push((idx, if s { -1 } else { 1 }));
            }
        }
        let table = Arc::new(table);
        self.compose_cache
            .lock()
            .unwrap()
            .insert((k, i, l), table.clone());
        Ok(table)
    }

    pub fn compose_vectors(&self, k: usize, i: usize, l: usize, u: &[Q], v: &[Q]) -> Result<Vector> {
        if i == 0 || i > k {
            return Err(Error::Index(format!("∘_{i} on arity {k}")));
        }
        let table = self.compose_table(k, i, l)?;
        let dl = self.dim(l)?;
        let mut out = zero_vector(self.dim(k + l - 1)?);
        for (a, x) in u.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            for (b, y) in v.iter().enumerate() {
                if y.is_zero() {
                    continue;
                }
                let (idx, s) = table[a * dl + b];
                let p = x * y;
                if s < 0 {
                    out[idx] -= p;
                } else {
                    out[idx] += p;
                }
            }
        }
        Ok(out)
    }

    pub fn compose_subspaces(&self, k: usize, i: usize, l: usize, s: &Subspace, t: &Subspace) -> Result<Subspace> {
        let n = self.dim(k + l - 1)?;
        let mut out = Subspace::zero(n);
        for u in s.rows() {
            for v in t.rows() {
                if out.dim() == n {
                    return Ok(out);
                }
                out.insert(self.compose_vectors(k, i, l, u, v)?);
            }
        }
        Ok(out)
    }

    /// Signed permutation of basis indices realizing the action of `sigma`.
    pub fn action_table(&self, sigma: &[usize]) -> Result<SignedMap> {
        if !is_permutation(sigma) {
            return Err(Error::Index("not a permutation".into()));
        }
        if let Some(t) = self.act_cache.lock().unwrap().get(sigma) {
            return Ok(t.clone());
        }
        let c = self.component(sigma.len())?;
        let mut table = Vec::with_capacity(c.dim());
        for t in &c.basis {
            let (s, r) = act_tree(&self.sig, t, sigma);
            let idx = c
                .index_of(&r)
                .ok_or_else(|| Error::Invalid("action left the basis".into()))?;
            table.push((idx, if s { -1 } else { 1 }));
        }
        let table = Arc::new(table);
        self.act_cache
            .lock()
            .unwrap()
            .insert(sigma.to_vec(), table.clone());
        Ok(table)
    }

    pub fn act_vector(&self, sigma: &[usize], v: &[Q]) -> Result<Vector> {
        let t = self.action_table(sigma)?;
        Ok(crate::linalg::apply_signed_permutation(&t, v))
    }

    pub fn act_subspace(&self, sigma: &[usize], s: &Subspace) -> Result<Subspace> {
        let t = self.action_table(sigma)?;
        Ok(s.signed_permute(&t))
    }

    /// Splits a vector into its even and odd degree parts.
    fn parity_split(&self, n: usize, v: &[Q]) -> Result<[Vector; 2]> {
        let c = self.component(n)?;
        let mut even = zero_vector(v.len());
        let mut odd = zero_vector(v.len());
        for (i, x) in v.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            if c.degrees[i].rem_euclid(2) == 1 {
                odd[i] = x.clone();
            } else {
                even[i] = x.clone();
            }
        }
        Ok([even, odd])
    }

    /// `[u,v]ᵢⱼ` on coordinate vectors, extended bilinearly over degree parities.
    pub fn commutator_vectors(&self, k: usize, i: usize, l: usize, j: usize, u: &[Q], v: &[Q]) -> Result<Vector> {
        if j == 0 || j > l {
            return Err(Error::Index(format!("slot {j} on arity {l}")));
        }
        let n = k + l - 1;
        let (s1, s2) = commutator_permutations(k, l, i, j);
        let us = self.parity_split(k, u)?;
        let vs = self.parity_split(l, v)?;
        let mut out = zero_vector(self.dim(n)?);
        for (pa, ua) in us.iter().enumerate() {
            for (pb, vb) in vs.iter().enumerate() {
                if ua.iter().all(|x| x.is_zero()) || vb.iter().all(|x| x.is_zero()) {
                    continue;
                }
                let left = self.act_vector(&s1, &self.compose_vectors(k, i, l, ua, vb)?)?;
                let right = self.act_vector(&s2, &self.compose_vectors(l, j, k, vb, ua)?)?;
                axpy(&mut out, &Q::one(), &left);
                let c = if pa == 1 && pb == 1 { Q::one() } else { -Q::one() };
                axpy(&mut out, &c, &right);
            }
        }
        Ok(out)
    }

    pub fn commutator_subspaces(
        &self,
        k: usize,
        i: usize,
        l: usize,
        j: usize,
        s: &Subspace,
        t: &Subspace,
    ) -> Result<Subspace> {
        let n = self.dim(k + l - 1)?;
        let mut out = Subspace::zero(n);
        for u in s.rows() {
            for v in t.rows() {
                if out.dim() == n {
                    return Ok(out);
                }
                out.insert(self.commutator_vectors(k, i, l, j, u, v)?);
            }
        }
        Ok(out)
    }

    /// Span E(n) of all corollas of arity `n` with every leaf labelling.
    pub fn generator_span(&self, n: usize) -> Result<Subspace> {
        let c = self.component(n)?;
        let mut s = Subspace::zero(c.dim());
        for (g, gen) in self.sig.gens.iter().enumerate() {
            if gen.arity != n {
                continue;
            }
            let e = OperadElement::generator(&self.sig, g);
            let v = self.to_vector(&e)?;
            for sigma in permutations(n) {
                s.insert(self.act_vector(&sigma, &v)?);
            }
        }
        Ok(s)
    }

    /// Closes a subspace of component `n` under the Σₙ-action.
    pub fn sigma_closure(&self, n: usize, s: &Subspace) -> Result<Subspace> {
        let mut out = s.clone();
        if n < 2 {
            return Ok(out);
        }
        let mut frontier: Vec<Vector> = out.rows().to_vec();
        while let Some(v) = frontier.pop() {
            for k in 0..n - 1 {
                let mut t: Vec<usize> = (0..n).collect();
                t.swap(k, k + 1);
                let w = self.act_vector(&t, &v)?;
                if out.insert(w.clone()) {
                    frontier.push(w);
                }
            }
        }
        Ok(out)
    }
}

/// Normalized trees with leaves `1..n`.
fn standard_trees(sig: &Signature, n: usize, memo: &mut HashMap<usize, Vec<Tree>>) -> Vec<Tree> {
    if let Some(v) = memo.get(&n) {
        return v.clone();
    }
    let out = if n == 1 {
        vec![Tree::Leaf(1)]
    } else {
        let labels: Vec<u32> = (1..=n as u32).collect();
        let mut out = Vec::new();
        for (g, gen) in sig.gens.iter().enumerate() {
            let k = gen.arity;
            if k < 2 || k > n {
                continue;
            }
            for blocks in set_partitions(&labels, k) {
                let orders: Vec<Vec<usize>> = if gen.symmetry == GenSymmetry::Regular {
                    (0..k).permutations(k).collect()
                } else {
                    vec![(0..k).collect()]
                };
                for ord in orders {
                    let ordered: Vec<&Vec<u32>> = ord.iter().map(|&b| &blocks[b]).collect();
                    let choices: Vec<Vec<Tree>> = ordered
                        .iter()
                        .map(|blk| {
                            standard_trees(sig, blk.len(), memo)
                                .into_iter()
                                .map(|t| t.relabel(&|l| blk[(l - 1) as usize]))
                                .collect()
                        })
                        .collect();
                    for combo in choices.iter().map(|c| c.iter()).multi_cartesian_product() {
                        out.push(Tree::Node(g, combo.into_iter().cloned().collect()));
                    }
                }
            }
        }
        out
    };
    memo.insert(n, out.clone());
    out
}

/// Partitions of `labels` into `k` nonempty blocks, blocks sorted by least element.
fn set_partitions(labels: &[u32], k: usize) -> Vec<Vec<Vec<u32>>> {
    fn go(labels: &[u32], k: usize, idx: usize, cur: &mut Vec<Vec<u32>>, out: &mut Vec<Vec<Vec<u32>>>) {
        let remaining = labels.len() - idx;
        if cur.len() + remaining < k {
            return;
        }
        if idx == labels.len() {
            if cur.len() == k {
                out.push(cur.clone());
            }
            return;
        }
        let x = labels[idx];
        for b in 0..cur.len() {
            cur[b].push(x);
            go(labels, k, idx + 1, cur, out);
            cur[b].pop();
        }
        if cur.len() < k {
            cur.push(vec![x]);
            go(labels, k, idx + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(labels, k, 0, &mut Vec::new(), &mut out);
    out
}

fn gen_index(sig: &Signature, g: &str) -> Result<usize> {
    sig.index(g)
        .ok_or_else(|| Error::Config(format!("unknown generator `{g}`")))
}

/// `Σ_{σ∈Sh(n,n−1)} sgn(σ) μ(μ(σ(1),..,σ(n)), σ(n+1), .., σ(2n−1))`.
pub fn jacobiator(sig: &Signature, g: &str) -> Result<OperadElement> {
    let gi = gen_index(sig, g)?;
    let gen = &sig.gens[gi];
    if gen.symmetry != GenSymmetry::Antisymmetric {
        return Err(Error::Config(format!("jacobiator needs an antisymmetric generator, `{g}` is not")));
    }
    let n = gen.arity;
    let mut out = OperadElement::zero(2 * n - 1);
    for sh in shuffles(n, n - 1) {
        let inner = Tree::Node(gi, sh[..n].iter().map(|&x| Tree::Leaf(x as u32 + 1)).collect());
        let mut kids = vec![inner];
        kids.extend(sh[n..].iter().map(|&x| Tree::Leaf(x as u32 + 1)));
        let e = OperadElement::from_tree(sig, &Tree::Node(gi, kids))?;
        let c = if permutation_is_odd(&sh) { -Q::one() } else { Q::one() };
        out.add_scaled(&c, &e);
    }
    Ok(out)
}

/// `g(g(1,2),3) − g(1,g(2,3))`.
pub fn associator(sig: &Signature, g: &str) -> Result<OperadElement> {
    let gi = gen_index(sig, g)?;
    if sig.gens[gi].arity != 2 {
        return Err(Error::Config(format!("associator needs a binary generator, `{g}` is not")));
    }
    let l = Tree::Node(gi, vec![Tree::Node(gi, vec![Tree::Leaf(1), Tree::Leaf(2)]), Tree::Leaf(3)]);
    let r = Tree::Node(gi, vec![Tree::Leaf(1), Tree::Node(gi, vec![Tree::Leaf(2), Tree::Leaf(3)])]);
    Ok(OperadElement::from_tree(sig, &l)?.sub(&OperadElement::from_tree(sig, &r)?))
}

/// `Σ_{σ∈Σ₃} sgn(σ)·Ass(g)·σ`.
pub fn lie_admissible(sig: &Signature, g: &str) -> Result<OperadElement> {
    let a = associator(sig, g)?;
    let mut out = OperadElement::zero(3);
    for sigma in permutations(3) {
        let c = if permutation_is_odd(&sigma) { -Q::one() } else { Q::one() };
        out.add_scaled(&c, &a.act(sig, &sigma)?);
    }
    Ok(out)
}

/// Filippov identity for a ternary bracket:
/// `[1,2,[3,4,5]] − [[1,2,3],4,5] − [3,[1,2,4],5] − [3,4,[1,2,5]]`.
pub fn fundamental_identity(sig: &Signature, g: &str) -> Result<OperadElement> {
    let gi = gen_index(sig, g)?;
    if sig.gens[gi].arity != 3 {
        return Err(Error::Config(format!("fundamental identity needs a ternary generator, `{g}` is not")));
    }
    let name = &sig.gens[gi].name;
    let text = format!(
        "{n}(1,2,{n}(3,4,5)) - {n}({n}(1,2,3),4,5) - {n}(3,{n}(1,2,4),5) - {n}(3,4,{n}(1,2,5))",
        n = name
    );
    OperadElement::parse(sig, &text)
}

/// A relation given either as a macro call such as `jacobiator(b)` or as an
/// explicit combination of trees.
pub fn relation_from_text(sig: &Signature, text: &str) -> Result<OperadElement> {
    let t = text.trim();
    for (name, f) in [
        ("jacobiator", jacobiator as fn(&Signature, &str) -> Result<OperadElement>),
        ("associator", associator),
        ("lie_admissible", lie_admissible),
        ("fundamental_identity", fundamental_identity),
    ] {
        if let Some(rest) = t.strip_prefix(name) {
            let arg = rest
                .trim()
                .strip_prefix('(')
                .and_then(|r| r.strip_suffix(')'))
                .ok_or_else(|| Error::Parse(format!("malformed macro `{t}`")))?;
            return f(sig, arg.trim());
        }
    }
    OperadElement::parse(sig, t)
}

/// Arity-wise operadic ideal generated by a set of relations.
#[derive(Debug)]
pub struct Ideal {
    components: Vec<Subspace>,
}

impl Ideal {
    /// Closure up to the operad's maximal arity: relations, then one grafting
    /// layer with full components at a time, then the Σₙ-action.
    pub fn generate(op: &FreeOperad, relations: &[OperadElement]) -> Result<Ideal> {
        let a = op.max_arity();
        let mut components: Vec<Subspace> = Vec::with_capacity(a + 1);
        for n in 0..=a {
            components.push(Subspace::zero(op.dim(n)?));
        }
        for r in relations {
            if r.arity() > a {
                return Err(Error::ArityBound(r.arity(), a));
            }
            let v = op.to_vector(r)?;
            components[r.arity()].insert(v);
        }
        for n in 2..=a {
            let mut s = components[n].clone();
            for k in 2..n {
                let l = n + 1 - k;
                if l < 2 {
                    continue;
                }
                let full_k = Subspace::full(op.dim(k)?);
                let full_l = Subspace::full(op.dim(l)?);
                for i in 1..=k {
                    if !components[k].is_zero() {
                        s = s.sum(&op.compose_subspaces(k, i, l, &components[k], &full_l)?);
                    }
                    if !components[l].is_zero() {
                        s = s.sum(&op.compose_subspaces(k, i, l, &full_k, &components[l])?);
                    }
                }
            }
            components[n] = op.sigma_closure(n, &s)?;
        }
        Ok(Ideal { components })
    }

    pub fn component(&self, n: usize) -> &Subspace {
        &self.components[n]
    }

    pub fn max_arity(&self) -> usize {
        self.components.len() - 1
    }

    pub fn quotient_dim(&self, n: usize) -> usize {
        let c = &self.components[n];
        c.ambient() - c.dim()
    }

    /// Free basis indices whose images form the quotient basis.
    pub fn quotient_basis(&self, n: usize) -> Vec<usize> {
        self.components[n].non_pivots()
    }

    /// Coordinates of the image of `v` in the quotient basis.
    pub fn project(&self, n: usize, v: &[Q]) -> Vector {
        let r = self.components[n].reduce(v);
        self.quotient_basis(n).into_iter().map(|c| r[c].clone()).collect()
    }

    /// Rows of the projection matrix, one per free basis vector.
    pub fn projection_matrix(&self, n: usize) -> Vec<Vector> {
        let d = self.components[n].ambient();
        (0..d)
            .map(|i| {
                let mut e = zero_vector(d);
                e[i] = Q::one();
                self.project(n, &e)
            })
            .collect()
    }
}

/// Generators plus relations.
#[derive(Clone, Debug)]
pub struct Presentation {
    pub op: Arc<FreeOperad>,
    pub relations: Vec<OperadElement>,
}

impl Presentation {
    pub fn new(op: Arc<FreeOperad>, relations: Vec<OperadElement>) -> Result<Self> {
        for r in &relations {
            if r.arity() > op.max_arity() {
                return Err(Error::ArityBound(r.arity(), op.max_arity()));
            }
        }
        Ok(Presentation { op, relations })
    }

    pub fn ideal(&self) -> Result<Ideal> {
        Ideal::generate(&self.op, &self.relations)
    }
}
