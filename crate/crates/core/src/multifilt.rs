//! Multiindices, multifiltrations of free and quotient operads, the
//! prestandard recursion, saturation and tightness of presentations.
//!
//! A quotient `Free/I` is handled through preimages: every cell of a
//! multifiltration of the quotient is stored as a subspace of the free
//! component containing `I(n)`, and reported dimensions subtract `dim I(n)`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::linalg::Subspace;
use crate::operad::{permutations, FreeOperad, Ideal, Presentation};
use crate::{Error, Result};

/// Composites `F ∘ᵢ F` per slot and commutators `[F,F]ᵢⱼ` per slot pair.
type CompositePieces = (Vec<Subspace>, Vec<Vec<Subspace>>);

/// Integer vector `p⃗ ∈ MZ(n)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(pub Vec<i64>);

impl MultiIndex {
    pub fn new(v: Vec<i64>) -> Self {
        MultiIndex(v)
    }

    pub fn constant(n: usize, c: i64) -> Self {
        MultiIndex(vec![c; n])
    }

    pub fn arity(&self) -> usize {
        self.0.len()
    }

    pub fn leq(&self, other: &MultiIndex) -> bool {
        self.0.len() == other.0.len() && self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    pub fn meet(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| *a.min(b)).collect())
    }

    pub fn join(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| *a.max(b)).collect())
    }

    /// `(a⃗∘ᵢb⃗) = (a_L, b⃗ + aᵢ, a_R)`; `i` is 1-based.
    pub fn compose(&self, i: usize, b: &MultiIndex) -> Result<MultiIndex> {
        let a = &self.0;
        if i == 0 || i > a.len() {
            return Err(Error::Index(format!("∘_{i} on MZ({})", a.len())));
        }
        let ai = a[i - 1];
        let mut v = a[..i - 1].to_vec();
        v.extend(b.0.iter().map(|x| x + ai));
        v.extend_from_slice(&a[i..]);
        Ok(MultiIndex(v))
    }

    /// `[a⃗,b⃗]ᵢⱼ = (b_L + aᵢ, a_L + bⱼ, aᵢ + bⱼ − 1, b_R + aᵢ, a_R + bⱼ)`.
    pub fn commutator(&self, b: &MultiIndex, i: usize, j: usize) -> Result<MultiIndex> {
        let (a, bv) = (&self.0, &b.0);
        if i == 0 || i > a.len() || j == 0 || j > bv.len() {
            return Err(Error::Index(format!(
                "[−,−]_{{{i}{j}}} on MZ({}) and MZ({})",
                a.len(),
                bv.len()
            )));
        }
        let (ai, bj) = (a[i - 1], bv[j - 1]);
        let mut v: Vec<i64> = bv[..j - 1].iter().map(|x| x + ai).collect();
        v.extend(a[..i - 1].iter().map(|x| x + bj));
        v.push(ai + bj - 1);
        v.extend(bv[j..].iter().map(|x| x + ai));
        v.extend(a[i..].iter().map(|x| x + bj));
        Ok(MultiIndex(v))
    }

    /// `(p⃗·σ)_k = p_{σ(k)}` with 0-based `sigma`.
    pub fn act(&self, sigma: &[usize]) -> MultiIndex {
        MultiIndex(sigma.iter().map(|&s| self.0[s]).collect())
    }

    pub fn clamp_above(&self, cap: i64) -> MultiIndex {
        MultiIndex(self.0.iter().map(|&x| x.min(cap)).collect())
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, x) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, ")")
    }
}

/// Parses `(1,2,2)` or `1,2,2`.
impl std::str::FromStr for MultiIndex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().trim_start_matches('(').trim_end_matches(')');
        let v: std::result::Result<Vec<i64>, _> = t.split(',').map(|x| x.trim().parse::<i64>()).collect();
        v.map(MultiIndex)
            .map_err(|_| Error::Parse(format!("bad multiindex `{s}`")))
    }
}

/// One arity of a multifiltration: cells over the cube `[floor..cap]ⁿ`.
/// Entries above `cap` are clamped down; entries below `floor` give `bottom`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArityTable {
    n: usize,
    floor: i64,
    cap: i64,
    bottom: Subspace,
    cells: Vec<Subspace>,
}

impl ArityTable {
    pub fn from_fn<F>(n: usize, floor: i64, cap: i64, bottom: Subspace, mut f: F) -> Result<Self>
    where
        F: FnMut(&MultiIndex) -> Subspace,
    {
        if cap < floor {
            return Err(Error::Invalid(format!("empty window [{floor}..{cap}]")));
        }
        let mut cells = Vec::new();
        for p in cube(n, floor, cap) {
            let s = f(&p);
            if s.ambient() != bottom.ambient() {
                return Err(Error::Invalid("cell in a different ambient space".into()));
            }
            cells.push(s);
        }
        Ok(ArityTable {
            n,
            floor,
            cap,
            bottom,
            cells,
        })
    }

    pub fn arity(&self) -> usize {
        self.n
    }

    pub fn floor(&self) -> i64 {
        self.floor
    }

    pub fn cap(&self) -> i64 {
        self.cap
    }

    pub fn ambient(&self) -> usize {
        self.bottom.ambient()
    }

    pub fn bottom(&self) -> &Subspace {
        &self.bottom
    }

    pub fn indices(&self) -> Vec<MultiIndex> {
        cube(self.n, self.floor, self.cap)
    }

    fn offset(&self, p: &MultiIndex) -> Option<usize> {
        let w = (self.cap - self.floor + 1) as usize;
        let mut idx = 0usize;
        for &x in &p.0 {
            if x < self.floor {
                return None;
            }
            idx = idx * w + (x.min(self.cap) - self.floor) as usize;
        }
        Some(idx)
    }

    pub fn get(&self, p: &MultiIndex) -> &Subspace {
        assert_eq!(p.arity(), self.n, "multiindex of the wrong arity");
        match self.offset(p) {
            Some(i) => &self.cells[i],
            None => &self.bottom,
        }
    }

    fn set(&mut self, p: &MultiIndex, s: Subspace) {
        let i = self.offset(p).expect("cell inside the window");
        self.cells[i] = s;
    }

    /// `F̄_p = ∩_k F_{(N,..,p_k,..,N)}`.
    pub fn saturate(&self) -> ArityTable {
        let top = MultiIndex::constant(self.n, self.cap);
        let mut out = self.clone();
        for p in self.indices() {
            let mut acc = self.get(&top).clone();
            for k in 0..self.n {
                if p.0[k] == self.cap {
                    continue;
                }
                let mut q = top.clone();
                q.0[k] = p.0[k];
                acc = acc.intersection(self.get(&q));
            }
            out.set(&p, acc);
        }
        out
    }

    /// Adds `F_{p′} ∩ F_{p″}` to `F_{p′∧p″}` until nothing changes.
    pub fn presaturate_to_fixpoint(&self) -> ArityTable {
        let idx = self.indices();
        let mut out = self.clone();
        loop {
            let mut changed = false;
            for a in 0..idx.len() {
                for b in a + 1..idx.len() {
                    let m = idx[a].meet(&idx[b]);
                    let s = out.get(&idx[a]).intersection(out.get(&idx[b]));
                    if !s.is_subspace_of(out.get(&m)) {
                        let t = out.get(&m).sum(&s);
                        out.set(&m, t);
                        changed = true;
                    }
                }
            }
            if !changed {
                return out;
            }
        }
    }

    /// `F_{p′} ∩ F_{p″} ⊆ F_{p′∧p″}` on the whole window.
    pub fn is_saturated(&self) -> bool {
        let idx = self.indices();
        idx.iter().enumerate().all(|(a, p)| {
            idx[a + 1..]
                .iter()
                .all(|q| self.get(p).intersection(self.get(q)).is_subspace_of(self.get(&p.meet(q))))
        })
    }

    /// Violations of monotonicity inside the window, as `(smaller, larger)` pairs.
    pub fn monotonicity_violations(&self) -> Vec<(MultiIndex, MultiIndex)> {
        let mut out = Vec::new();
        for p in self.indices() {
            if !self.bottom.is_subspace_of(self.get(&p)) {
                out.push((MultiIndex::constant(self.n, self.floor - 1), p.clone()));
            }
            for k in 0..self.n {
                if p.0[k] > self.floor {
                    let mut q = p.clone();
                    q.0[k] -= 1;
                    if !self.get(&q).is_subspace_of(self.get(&p)) {
                        out.push((q, p.clone()));
                    }
                }
            }
        }
        out
    }

    fn map_cells<F: Fn(&Subspace) -> Subspace>(&self, f: F) -> ArityTable {
        ArityTable {
            n: self.n,
            floor: self.floor,
            cap: self.cap,
            bottom: f(&self.bottom),
            cells: self.cells.iter().map(f).collect(),
        }
    }
}

/// All multiindices in `[lo..hi]ⁿ`, last coordinate fastest.
pub fn cube(n: usize, lo: i64, hi: i64) -> Vec<MultiIndex> {
    let mut out = vec![Vec::with_capacity(n)];
    for _ in 0..n {
        let mut next = Vec::new();
        for v in &out {
            for x in lo..=hi {
                let mut w: Vec<i64> = v.clone();
                w.push(x);
                next.push(w);
            }
        }
        out = next;
    }
    out.into_iter().map(MultiIndex).collect()
}

/// How far each arity is tabulated before clamping.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CapRule {
    /// `⌊(n−1)/(k−1)⌋` for the smallest generator arity `k`.
    Sharp,
    /// `n − 1`.
    Coarse,
}

pub fn stability_bound(op: &FreeOperad, n: usize, rule: CapRule) -> i64 {
    if n <= 1 {
        return 0;
    }
    let k = op.signature().min_arity().unwrap_or(2).max(2);
    let b = match rule {
        CapRule::Sharp => (n - 1) / (k - 1),
        CapRule::Coarse => n - 1,
    };
    (b as i64).max(1)
}

/// Multifiltration of a free operad or, with an ideal, of its quotient.
#[derive(Clone, Debug)]
pub struct Multifiltration {
    op: Arc<FreeOperad>,
    ideal: Option<Arc<Ideal>>,
    tables: Vec<Option<ArityTable>>,
}

impl Multifiltration {
    pub fn op(&self) -> &Arc<FreeOperad> {
        &self.op
    }

    pub fn ideal(&self) -> Option<&Arc<Ideal>> {
        self.ideal.as_ref()
    }

    pub fn max_arity(&self) -> usize {
        self.tables.len() - 1
    }

    pub fn table(&self, n: usize) -> Result<&ArityTable> {
        self.tables
            .get(n)
            .and_then(|t| t.as_ref())
            .ok_or(Error::ArityBound(n, self.max_arity()))
    }

    pub fn get(&self, p: &MultiIndex) -> Result<&Subspace> {
        Ok(self.table(p.arity())?.get(p))
    }

    fn ideal_dim(&self, n: usize) -> usize {
        self.ideal.as_ref().map(|i| i.component(n).dim()).unwrap_or(0)
    }

    /// Dimension of the cell in the operad it filters (quotient if any).
    pub fn dim(&self, p: &MultiIndex) -> Result<usize> {
        Ok(self.get(p)?.dim() - self.ideal_dim(p.arity()))
    }

    /// Dimension of the filtered component itself.
    pub fn component_dim(&self, n: usize) -> Result<usize> {
        Ok(self.table(n)?.ambient() - self.ideal_dim(n))
    }

    /// Whether the element with free coordinates `v` lies in the cell at `p`.
    pub fn contains(&self, p: &MultiIndex, v: &[crate::Q]) -> Result<bool> {
        Ok(self.get(p)?.contains(v))
    }

    fn map_tables<F: Fn(&ArityTable) -> ArityTable + Sync>(&self, f: F) -> Multifiltration {
        Multifiltration {
            op: self.op.clone(),
            ideal: self.ideal.clone(),
            tables: self.tables.par_iter().map(|t| t.as_ref().map(&f)).collect(),
        }
    }

    /// Closed saturation formula; valid because every table is stable at its cap.
    pub fn saturate(&self) -> Multifiltration {
        self.map_tables(|t| t.saturate())
    }

    /// Iterated presaturation inside each window until it stops growing.
    pub fn presaturate_general(&self) -> Multifiltration {
        self.map_tables(|t| t.presaturate_to_fixpoint())
    }

    pub fn is_saturated(&self) -> bool {
        self.tables.iter().flatten().all(|t| t.is_saturated())
    }

    /// Image under the projection onto `Free/I`, stored as preimages `F + I`.
    pub fn pushforward(&self, ideal: Arc<Ideal>) -> Result<Multifiltration> {
        if self.ideal.is_some() {
            return Err(Error::Invalid("multifiltration already lives on a quotient".into()));
        }
        if ideal.max_arity() < self.max_arity() {
            return Err(Error::ArityBound(self.max_arity(), ideal.max_arity()));
        }
        let mut out = self.clone();
        for (n, t) in out.tables.iter_mut().enumerate() {
            if let Some(t) = t {
                let i = ideal.component(n).clone();
                *t = t.map_cells(|s| s.sum(&i));
            }
        }
        out.ideal = Some(ideal);
        Ok(out)
    }

    /// Cellwise `self ⊆ other`.
    pub fn is_below(&self, other: &Multifiltration) -> bool {
        self.tables.iter().zip(&other.tables).all(|(a, b)| match (a, b) {
            (Some(a), Some(b)) => a.indices().iter().all(|p| a.get(p).is_subspace_of(b.get(p))),
            (None, None) => true,
            _ => false,
        })
    }

    /// Dimension table of arity `n` over its window; fails if not monotone.
    pub fn lattice(&self, n: usize) -> Result<Lattice> {
        let t = self.table(n)?;
        let v = t.monotonicity_violations();
        if let Some((a, b)) = v.first() {
            return Err(Error::Invalid(format!("cell {a} is not contained in {b}")));
        }
        let mut dims = BTreeMap::new();
        for p in t.indices() {
            dims.insert(p.to_string(), self.dim(&p)?);
        }
        Ok(Lattice {
            schema: crate::SCHEMA,
            arity: n,
            cap: t.cap(),
            component_dim: self.component_dim(n)?,
            dims,
        })
    }

    /// Checks monotonicity, equivariance and compatibility with compositions
    /// and commutators on every window cell. Returns the violations found.
    pub fn check_axioms(&self) -> Result<Vec<String>> {
        let op = &self.op;
        let mut bad = Vec::new();
        for n in 1..=self.max_arity() {
            let t = self.table(n)?;
            for (a, b) in t.monotonicity_violations() {
                bad.push(format!("monotonicity: {a} ⋠ {b}"));
            }
            if n >= 2 {
                for p in t.indices() {
                    for k in 0..n - 1 {
                        let mut tau: Vec<usize> = (0..n).collect();
                        tau.swap(k, k + 1);
                        let moved = op.act_subspace(&tau, t.get(&p))?;
                        if &moved != t.get(&p.act(&tau)) {
                            bad.push(format!("equivariance at {p} under ({} {})", k + 1, k + 2));
                        }
                    }
                }
            }
        }
        for n in 3..=self.max_arity() {
            for k in 2..n {
                let l = n + 1 - k;
                if l < 2 {
                    continue;
                }
                let tk = self.table(k)?;
                let tl = self.table(l)?;
                let tn = self.table(n)?;
                for p1 in tk.indices() {
                    for p2 in tl.indices() {
                        let (s1, s2) = (tk.get(&p1), tl.get(&p2));
                        for i in 1..=k {
                            let c = op.compose_subspaces(k, i, l, s1, s2)?;
                            let q = p1.compose(i, &p2)?;
                            if !c.is_subspace_of(tn.get(&q)) {
                                bad.push(format!("composition {p1} ∘_{i} {p2} ⊄ {q}"));
                            }
                            for j in 1..=l {
                                let c = op.commutator_subspaces(k, i, l, j, s1, s2)?;
                                let q = p1.commutator(&p2, i, j)?;
                                if !c.is_subspace_of(tn.get(&q)) {
                                    bad.push(format!("commutator [{p1},{p2}]_{{{i}{j}}} ⊄ {q}"));
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(bad)
    }
}

/// Dimension table keyed by multiindex.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Lattice {
    pub schema: &'static str,
    pub arity: usize,
    pub cap: i64,
    pub component_dim: usize,
    pub dims: BTreeMap<String, usize>,
}

impl Lattice {
    pub fn get(&self, p: &[i64]) -> Option<usize> {
        self.dims.get(&MultiIndex(p.to_vec()).to_string()).copied()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let hdr: Vec<String> = (1..=self.arity).map(|k| format!("p{k}")).collect();
        s.push_str(&hdr.join(","));
        s.push_str(",dim\n");
        for (k, d) in &self.dims {
            let inner = k.trim_start_matches('(').trim_end_matches(')');
            s.push_str(&format!("{inner},{d}\n"));
        }
        s
    }
}

/// Prestandard multifiltration of a simply connected free operad up to `max_arity`.
///
/// A composite indexed by `q⃗` enters every cell `p⃗ ⪰ q⃗`; each one is recorded
/// at its clamped index and the cube is then swept in increasing order, so
/// that each cell adds its lower neighbours.
pub fn prestandard(op: &Arc<FreeOperad>, max_arity: usize, rule: CapRule) -> Result<Multifiltration> {
    if !op.signature().is_simply_connected() {
        return Err(Error::NotSimplyConnected(
            "prestandard multifiltrations need generators of arity at least two".into(),
        ));
    }
    if max_arity > op.max_arity() {
        return Err(Error::ArityBound(max_arity, op.max_arity()));
    }
    let mut tables: Vec<Option<ArityTable>> = vec![None; max_arity + 1];
    if max_arity >= 1 {
        let d = op.dim(1)?;
        tables[1] = Some(ArityTable::from_fn(1, 0, 0, Subspace::zero(d), |_| Subspace::full(d))?);
    }
    for n in 2..=max_arity {
        let cap = stability_bound(op, n, rule);
        let dim = op.dim(n)?;
        let mut seeds: HashMap<MultiIndex, Subspace> = HashMap::new();
        for k in 2..n {
            let l = n + 1 - k;
            if l < 2 {
                continue;
            }
            let tk = tables[k].as_ref().expect("lower arity computed");
            let tl = tables[l].as_ref().expect("lower arity computed");
            let (dk, idk) = distinct_cells(tk);
            let (dl, idl) = distinct_cells(tl);
            // Composites of each pair of distinct cell values, computed once.
            let pairs: Vec<(usize, usize)> = (0..dk.len())
                .flat_map(|a| (0..dl.len()).map(move |b| (a, b)))
                .filter(|&(a, b)| !dk[a].is_zero() && !dl[b].is_zero())
                .collect();
            let products: HashMap<(usize, usize), CompositePieces> = pairs
                .par_iter()
                .map(|&(a, b)| -> Result<_> {
                    let mut comps = Vec::with_capacity(k);
                    let mut comms = Vec::with_capacity(k);
                    for i in 1..=k {
                        comps.push(op.compose_subspaces(k, i, l, &dk[a], &dl[b])?);
                        let mut row = Vec::with_capacity(l);
                        for j in 1..=l {
                            row.push(op.commutator_subspaces(k, i, l, j, &dk[a], &dl[b])?);
                        }
                        comms.push(row);
                    }
                    Ok(((a, b), (comps, comms)))
                })
                .collect::<Result<_>>()?;
            for (p1, &a) in tk.indices().iter().zip(&idk) {
                for (p2, &b) in tl.indices().iter().zip(&idl) {
                    let Some((comps, comms)) = products.get(&(a, b)) else {
                        continue;
                    };
                    for i in 1..=k {
                        let q = p1.compose(i, p2)?.clamp_above(cap);
                        add_seed(&mut seeds, q, &comps[i - 1], dim);
                        for j in 1..=l {
                            let q = p1.commutator(p2, i, j)?.clamp_above(cap);
                            add_seed(&mut seeds, q, &comms[i - 1][j - 1], dim);
                        }
                    }
                }
            }
        }
        // Spread every seed over its Σₙ-orbit.
        let mut bucket: HashMap<MultiIndex, Subspace> = HashMap::new();
        let perms = permutations(n);
        let moved: Vec<(MultiIndex, Subspace)> = seeds
            .par_iter()
            .flat_map_iter(|(q, s)| {
                perms.iter().map(move |sigma| {
                    let t = op.act_subspace(sigma, s).expect("permutation of the right size");
                    (q.act(sigma), t)
                })
            })
            .collect();
        for (q, s) in moved {
            add_seed(&mut bucket, q, &s, dim);
        }
        let e = op.generator_span(n)?;
        let mut table = ArityTable::from_fn(n, 1, cap, Subspace::zero(dim), |_| Subspace::zero(dim))?;
        for p in table.indices() {
            let mut acc = e.clone();
            if let Some(b) = bucket.get(&p) {
                acc = acc.sum(b);
            }
            for k in 0..n {
                if p.0[k] > 1 {
                    let mut q = p.clone();
                    q.0[k] -= 1;
                    acc = acc.sum(table.get(&q));
                }
            }
            table.set(&p, acc);
        }
        tables[n] = Some(table);
    }
    Ok(Multifiltration {
        op: op.clone(),
        ideal: None,
        tables,
    })
}

fn add_seed(map: &mut HashMap<MultiIndex, Subspace>, q: MultiIndex, s: &Subspace, dim: usize) {
    if s.is_zero() {
        return;
    }
    let e = map.entry(q).or_insert_with(|| Subspace::zero(dim));
    if !s.is_subspace_of(e) {
        *e = e.sum(s);
    }
}

/// Distinct cell values and, for each window index, the position of its value.
fn distinct_cells(t: &ArityTable) -> (Vec<Subspace>, Vec<usize>) {
    let mut seen: HashMap<&Subspace, usize> = HashMap::new();
    let mut values = Vec::new();
    let mut ids = Vec::new();
    for s in &t.cells {
        let id = *seen.entry(s).or_insert_with(|| {
            values.push(s.clone());
            values.len() - 1
        });
        ids.push(id);
    }
    (values, ids)
}

/// Standard multifiltration: prestandard, pushed to the quotient if an ideal
/// is given, then saturated.
pub fn standard(op: &Arc<FreeOperad>, ideal: Option<Arc<Ideal>>, max_arity: usize) -> Result<Multifiltration> {
    let pre = prestandard(op, max_arity, CapRule::Sharp)?;
    let pre = match ideal {
        Some(i) => pre.pushforward(i)?,
        None => pre,
    };
    Ok(pre.saturate())
}

/// Compares the sharp and the coarse stability bounds cell by cell. Returns
/// the cells (in the coarse window) where the two computations disagree.
pub fn verify_stability(op: &Arc<FreeOperad>, max_arity: usize) -> Result<Vec<MultiIndex>> {
    let sharp = prestandard(op, max_arity, CapRule::Sharp)?;
    let coarse = prestandard(op, max_arity, CapRule::Coarse)?;
    let mut bad = Vec::new();
    for n in 1..=max_arity {
        let (a, b) = (sharp.table(n)?, coarse.table(n)?);
        if a.cap() == b.cap() {
            continue;
        }
        for p in b.indices() {
            if a.get(&p) != b.get(&p) {
                bad.push(p);
            }
        }
    }
    Ok(bad)
}

#[derive(Clone, Debug, Serialize)]
pub struct RelationVerdict {
    pub arity: usize,
    pub relation: String,
    pub member: bool,
    /// Residual modulo `Ḡ_{(1,..,1)}Free(n)` in tree notation; `0` for members.
    pub residual: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct TightnessReport {
    pub schema: &'static str,
    pub tight: bool,
    /// `dim Ḡ_{(1,..,1)}Free(n)` for the arities carrying relations.
    pub bottom_dims: BTreeMap<usize, usize>,
    pub relations: Vec<RelationVerdict>,
}

/// Membership of every relation in `Ḡ_{(1,..,1)}Free(n)`.
pub fn is_tight(pres: &Presentation) -> Result<TightnessReport> {
    let op = &pres.op;
    let top = pres.relations.iter().map(|r| r.arity()).max().unwrap_or(2).max(2);
    let g = standard(op, None, top)?;
    let mut bottom_dims = BTreeMap::new();
    let mut relations = Vec::new();
    for r in &pres.relations {
        let n = r.arity();
        let ones = MultiIndex::constant(n, if n == 1 { 0 } else { 1 });
        let cell = g.get(&ones)?;
        bottom_dims.insert(n, cell.dim());
        let v = op.to_vector(r)?;
        let res = cell.reduce(&v);
        let member = res.iter().all(num_traits::Zero::is_zero);
        relations.push(RelationVerdict {
            arity: n,
            relation: r.format(op.signature()),
            member,
            residual: op.from_vector(n, &res)?.format(op.signature()),
        });
    }
    Ok(TightnessReport {
        schema: crate::SCHEMA,
        tight: relations.iter().all(|v| v.member),
        bottom_dims,
        relations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mz_composition_and_commutator() {
        let a = MultiIndex(vec![2, 3]);
        assert_eq!(a.compose(1, &MultiIndex(vec![1, 1])).unwrap(), MultiIndex(vec![3, 3, 3]));
        let one = MultiIndex(vec![1, 1]);
        assert_eq!(one.commutator(&one, 1, 1).unwrap(), MultiIndex(vec![1, 2, 2]));
        assert_eq!(
            MultiIndex(vec![4]).commutator(&MultiIndex(vec![7]), 1, 1).unwrap(),
            MultiIndex(vec![10])
        );
    }

    #[test]
    fn cube_order_is_lexicographic() {
        let c = cube(2, 1, 2);
        let s: Vec<String> = c.iter().map(|p| p.to_string()).collect();
        assert_eq!(s, ["(1,1)", "(1,2)", "(2,1)", "(2,2)"]);
    }
}
