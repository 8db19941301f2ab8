//! Isomorphism and automorphism search for complete configurations.
//!
//! Every candidate map is a bijection of initial supports. It must preserve
//! weights and induce well-defined bijections on every object, which is
//! equivalent to commuting with all reductions. Candidates are pruned by a
//! per-atom signature recording, for each object, the weight of the image
//! atom and the size of its fibre.
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_traits::One;

use crate::config::Configuration;
use crate::error::{Error, Result};
use crate::rational::Rational;
use crate::shape::DiagramShape;
use crate::space::{Label, ProbabilitySpace};

/// Limits for the backtracking search.
#[derive(Debug, Clone, Copy)]
pub struct SearchBudget {
    pub max_support: usize,
    pub max_nodes: u64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self { max_support: 64, max_nodes: 20_000_000 }
    }
}

type Signature = Vec<(Rational, usize)>;

struct Side {
    support: Vec<usize>,
    proj: Vec<Vec<usize>>,
    weights: Vec<Rational>,
    sig: Vec<Signature>,
}

impl Side {
    fn new(c: &Configuration, budget: &SearchBudget) -> Result<Self> {
        let o = c.initial()?;
        let init = c.space(o);
        let support = init.support();
        if support.len() > budget.max_support {
            return Err(Error::Budget {
                what: "initial support",
                size: support.len() as u128,
                cap: budget.max_support as u128,
            });
        }
        let proj = c.projections()?;
        let mut fibre: Vec<BTreeMap<usize, usize>> = vec![BTreeMap::new(); proj.len()];
        for &a in &support {
            for (i, p) in proj.iter().enumerate() {
                *fibre[i].entry(p[a]).or_default() += 1;
            }
        }
        let sig = support
            .iter()
            .map(|&a| {
                proj.iter()
                    .enumerate()
                    .map(|(i, p)| (c.space(i).weights()[p[a]].clone(), fibre[i][&p[a]]))
                    .collect()
            })
            .collect();
        let weights = support.iter().map(|&a| init.weights()[a].clone()).collect();
        let proj = proj
            .into_iter()
            .map(|p| support.iter().map(|&a| p[a]).collect())
            .collect();
        Ok(Self { support, proj, weights, sig })
    }
}

struct Search<'a> {
    x: &'a Side,
    y: &'a Side,
    nodes: u64,
    max_nodes: u64,
    forward: Vec<BTreeMap<usize, usize>>,
    backward: Vec<BTreeMap<usize, usize>>,
    used: Vec<bool>,
    assign: Vec<Option<usize>>,
}

impl<'a> Search<'a> {
    fn new(x: &'a Side, y: &'a Side, max_nodes: u64) -> Self {
        let k = x.proj.len();
        Self {
            x,
            y,
            nodes: 0,
            max_nodes,
            forward: vec![BTreeMap::new(); k],
            backward: vec![BTreeMap::new(); k],
            used: vec![false; y.support.len()],
            assign: vec![None; x.support.len()],
        }
    }

    fn compatible(&self, a: usize, b: usize) -> bool {
        if self.used[b] || self.x.weights[a] != self.y.weights[b] || self.x.sig[a] != self.y.sig[b] {
            return false;
        }
        for i in 0..self.x.proj.len() {
            let (xa, yb) = (self.x.proj[i][a], self.y.proj[i][b]);
            match (self.forward[i].get(&xa), self.backward[i].get(&yb)) {
                (Some(&t), _) if t != yb => return false,
                (None, Some(_)) => return false,
                _ => {}
            }
        }
        true
    }

    fn push(&mut self, a: usize, b: usize) -> Vec<usize> {
        let mut added = Vec::new();
        for i in 0..self.x.proj.len() {
            let (xa, yb) = (self.x.proj[i][a], self.y.proj[i][b]);
            if let alloc::collections::btree_map::Entry::Vacant(e) = self.forward[i].entry(xa) {
                e.insert(yb);
                self.backward[i].insert(yb, xa);
                added.push(i);
            }
        }
        self.used[b] = true;
        self.assign[a] = Some(b);
        added
    }

    fn pop(&mut self, a: usize, b: usize, added: Vec<usize>) {
        for i in added {
            let xa = self.x.proj[i][a];
            let yb = self.y.proj[i][b];
            self.forward[i].remove(&xa);
            self.backward[i].remove(&yb);
        }
        self.used[b] = false;
        self.assign[a] = None;
    }

    /// Extends the current partial assignment to a full bijection.
    fn extend(&mut self, order: &[usize], k: usize) -> Result<bool> {
        self.nodes += 1;
        if self.nodes > self.max_nodes {
            return Err(Error::Budget {
                what: "isomorphism search nodes",
                size: self.nodes as u128,
                cap: self.max_nodes as u128,
            });
        }
        if k == order.len() {
            return Ok(true);
        }
        let a = order[k];
        if self.assign[a].is_some() {
            return self.extend(order, k + 1);
        }
        for b in 0..self.y.support.len() {
            if self.compatible(a, b) {
                let added = self.push(a, b);
                if self.extend(order, k + 1)? {
                    return Ok(true);
                }
                self.pop(a, b, added);
            }
        }
        Ok(false)
    }
}

fn search_order(x: &Side) -> Vec<usize> {
    // Atoms sharing images with earlier atoms come early so that level
    // constraints bite as soon as possible.
    let n = x.support.len();
    let mut order = Vec::with_capacity(n);
    let mut placed = vec![false; n];
    let mut seen: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); x.proj.len()];
    for _ in 0..n {
        let best = (0..n)
            .filter(|&a| !placed[a])
            .max_by_key(|&a| {
                let shared = (0..x.proj.len()).filter(|&i| seen[i].contains(&x.proj[i][a])).count();
                (shared, core::cmp::Reverse(a))
            })
            .unwrap();
        placed[best] = true;
        for i in 0..x.proj.len() {
            seen[i].insert(x.proj[i][best]);
        }
        order.push(best);
    }
    order
}

fn quick_reject(x: &Configuration, y: &Configuration) -> bool {
    (0..x.shape().len()).any(|i| {
        let mut a: Vec<_> = x.space(i).support().into_iter().map(|k| x.space(i).weights()[k].clone()).collect();
        let mut b: Vec<_> = y.space(i).support().into_iter().map(|k| y.space(i).weights()[k].clone()).collect();
        a.sort();
        b.sort();
        a != b
    })
}

/// Finds an isomorphism of complete configurations, returned as a map from
/// `X_0` atom indices to `Y_0` atom indices on the support.
pub fn find_isomorphism(x: &Configuration, y: &Configuration, budget: &SearchBudget) -> Result<Option<BTreeMap<usize, usize>>> {
    if x.shape() != y.shape() {
        return Err(Error::ShapeMismatch("isomorphism needs equal shapes".into()));
    }
    let sx = Side::new(x, budget)?;
    let sy = Side::new(y, budget)?;
    if sx.support.len() != sy.support.len() || quick_reject(x, y) {
        return Ok(None);
    }
    let mut sig_x = sx.sig.clone();
    let mut sig_y = sy.sig.clone();
    sig_x.sort();
    sig_y.sort();
    if sig_x != sig_y {
        return Ok(None);
    }
    let order = search_order(&sx);
    let mut s = Search::new(&sx, &sy, budget.max_nodes);
    if s.extend(&order, 0)? {
        Ok(Some(
            s.assign
                .iter()
                .enumerate()
                .map(|(a, b)| (sx.support[a], sy.support[b.unwrap()]))
                .collect(),
        ))
    } else {
        Ok(None)
    }
}

pub fn is_isomorphic(x: &Configuration, y: &Configuration) -> Result<bool> {
    find_isomorphism(x, y, &SearchBudget::default()).map(|m| m.is_some())
}

/// Automorphism group summary of a complete configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Automorphisms {
    pub transitive: bool,
    pub order: BigInt,
}

/// Computes `|Aut(X)|` as a product of orbit sizes along a stabilizer chain,
/// and whether the group is transitive on the initial support.
pub fn automorphisms(x: &Configuration, budget: &SearchBudget) -> Result<Automorphisms> {
    let side = Side::new(x, budget)?;
    let n = side.support.len();
    let order = search_order(&side);
    let mut fixed: Vec<(usize, usize)> = Vec::new();
    let mut total = BigInt::one();
    let mut transitive = false;
    for (step, &base) in order.iter().enumerate() {
        let mut orbit = 0usize;
        for c in 0..n {
            let mut s = Search::new(&side, &side, budget.max_nodes);
            let mut ok = true;
            for &(a, b) in fixed.iter().chain(core::iter::once(&(base, c))) {
                if !s.compatible(a, b) {
                    ok = false;
                    break;
                }
                s.push(a, b);
            }
            if ok && s.extend(&order, 0)? {
                orbit += 1;
            }
        }
        if step == 0 {
            transitive = orbit == n;
        }
        total *= orbit;
        fixed.push((base, base));
    }
    Ok(Automorphisms { transitive, order: total })
}

/// Homogeneity: the automorphism group acts transitively on the initial
/// support, hence on every object of a complete configuration.
pub fn is_homogeneous(x: &Configuration) -> Result<(bool, BigInt)> {
    let a = automorphisms(x, &SearchBudget::default())?;
    Ok((a.transitive, a.order))
}

/// Builds the configuration of coset spaces `G/H_i` with the natural
/// surjections `gH_i -> gH_j` whenever `H_i` is contained in `H_j`.
/// `table[a][b]` is the product `a*b`.
pub fn homogeneous_from_group(table: &[Vec<usize>], subgroups: &[Vec<usize>]) -> Result<Configuration> {
    let n = table.len();
    if n == 0 || table.iter().any(|r| r.len() != n || r.iter().any(|&v| v >= n)) {
        return Err(Error::Invalid("multiplication table is not square".into()));
    }
    let e = (0..n)
        .find(|&e| (0..n).all(|a| table[e][a] == a && table[a][e] == a))
        .ok_or_else(|| Error::Invalid("no identity element".into()))?;
    for a in 0..n {
        if !(0..n).any(|b| table[a][b] == e) {
            return Err(Error::Invalid(format!("element {a} has no inverse")));
        }
        for b in 0..n {
            for c in 0..n {
                if table[table[a][b]][c] != table[a][table[b][c]] {
                    return Err(Error::Invalid("table is not associative".into()));
                }
            }
        }
    }
    let mut sets: Vec<BTreeSet<usize>> = Vec::new();
    for h in subgroups {
        let s: BTreeSet<usize> = h.iter().copied().collect();
        if !s.contains(&e) || s.iter().any(|&a| a >= n || s.iter().any(|&b| !s.contains(&table[a][b]))) {
            return Err(Error::Invalid(format!("{h:?} is not a subgroup")));
        }
        sets.push(s);
    }
    // Left cosets gH, labelled by their smallest element.
    let coset_of = |g: usize, h: &BTreeSet<usize>| -> usize { h.iter().map(|&x| table[g][x]).min().unwrap() };
    let mut spaces = Vec::new();
    let mut index: Vec<BTreeMap<usize, usize>> = Vec::new();
    for h in &sets {
        let reps: BTreeSet<usize> = (0..n).map(|g| coset_of(g, h)).collect();
        let idx: BTreeMap<usize, usize> = reps.iter().enumerate().map(|(k, &r)| (r, k)).collect();
        let atoms = reps.iter().map(|&r| Label::Int(r as i64)).collect();
        let w = Rational::new(1.into(), (reps.len() as i64).into());
        spaces.push(ProbabilitySpace::new(atoms, vec![w; reps.len()])?);
        index.push(idx);
    }
    let mut arrows = Vec::new();
    let mut maps = BTreeMap::new();
    for i in 0..sets.len() {
        for j in 0..sets.len() {
            if i != j && sets[i].is_subset(&sets[j]) {
                if sets[i] == sets[j] {
                    return Err(Error::Invalid("repeated subgroup".into()));
                }
                arrows.push((i, j));
                let mut m = vec![0; spaces[i].len()];
                for g in 0..n {
                    m[index[i][&coset_of(g, &sets[i])]] = index[j][&coset_of(g, &sets[j])];
                }
                maps.insert((i, j), m);
            }
        }
    }
    let names = (0..sets.len()).map(|i| format!("H{i}")).collect();
    Configuration::new(DiagramShape::new(names, arrows)?, spaces, maps)
}
