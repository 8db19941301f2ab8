//! Finite probability spaces with exact weights, reductions between them,
//! and the scalar functionals (entropy, divergence, total variation).
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::math;
use crate::rational::{self, Rational};

/// Opaque atom label. Only equality and order are ever used.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Int(i64),
    Str(String),
    Tuple(Vec<Label>),
}

impl Label {
    pub fn pair(a: Label, b: Label) -> Label {
        Label::Tuple(vec![a, b])
    }

    pub fn str(s: &str) -> Label {
        Label::Str(s.to_string())
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Int(i) => write!(f, "{i}"),
            Label::Str(s) => f.write_str(s),
            Label::Tuple(items) => {
                f.write_str("(")?;
                for (k, it) in items.iter().enumerate() {
                    if k > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{it}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl From<i64> for Label {
    fn from(v: i64) -> Self {
        Label::Int(v)
    }
}

impl From<&str> for Label {
    fn from(v: &str) -> Self {
        Label::str(v)
    }
}

/// A finite probability space `(S, p)`. Zero-weight atoms are kept in the
/// atom list; the support is the set of atoms with positive weight.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbabilitySpace {
    atoms: Vec<Label>,
    weights: Vec<Rational>,
}

impl ProbabilitySpace {
    pub fn new(atoms: Vec<Label>, weights: Vec<Rational>) -> Result<Self> {
        if atoms.len() != weights.len() {
            return Err(Error::InvalidSpace("atom and weight counts differ".into()));
        }
        let mut seen = BTreeMap::new();
        for (i, a) in atoms.iter().enumerate() {
            if seen.insert(a, i).is_some() {
                return Err(Error::InvalidSpace(format!("duplicate atom {a}")));
            }
        }
        let mut total = Rational::zero();
        for (a, w) in atoms.iter().zip(&weights) {
            if w.is_negative() {
                return Err(Error::InvalidSpace(format!("negative weight on {a}")));
            }
            total += w;
        }
        if !total.is_one() {
            return Err(Error::InvalidSpace(format!(
                "weights sum to {}",
                rational::format(&total)
            )));
        }
        Ok(Self { atoms, weights })
    }

    /// Atoms labelled `0..n`.
    pub fn from_weights(weights: Vec<Rational>) -> Result<Self> {
        let atoms = (0..weights.len() as i64).map(Label::Int).collect();
        Self::new(atoms, weights)
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform space needs at least one atom");
        let w = Rational::new(1.into(), (n as i64).into());
        Self {
            atoms: (0..n as i64).map(Label::Int).collect(),
            weights: vec![w; n],
        }
    }

    pub fn point() -> Self {
        Self::uniform(1)
    }

    /// The binary space with atoms `□` and `■`, the latter of weight `alpha`.
    pub fn binary(alpha: &Rational) -> Result<Self> {
        if alpha.is_negative() || *alpha > Rational::one() {
            return Err(Error::Invalid("alpha outside [0,1]".into()));
        }
        Self::new(
            vec![Label::str("□"), Label::str("■")],
            vec![Rational::one() - alpha, alpha.clone()],
        )
    }

    pub fn atoms(&self) -> &[Label] {
        &self.atoms
    }

    pub fn weights(&self) -> &[Rational] {
        &self.weights
    }

    pub fn weights_f64(&self) -> Vec<f64> {
        self.weights.iter().map(rational::to_f64).collect()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn index_of(&self, a: &Label) -> Option<usize> {
        self.atoms.iter().position(|x| x == a)
    }

    pub fn index(&self) -> BTreeMap<Label, usize> {
        self.atoms.iter().cloned().enumerate().map(|(i, a)| (a, i)).collect()
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.weights[i].is_positive()).collect()
    }

    /// Support size, written `|X|`.
    pub fn cardinality(&self) -> usize {
        self.weights.iter().filter(|w| w.is_positive()).count()
    }

    /// The same space with zero-weight atoms dropped.
    pub fn support_space(&self) -> Self {
        let s = self.support();
        Self {
            atoms: s.iter().map(|&i| self.atoms[i].clone()).collect(),
            weights: s.iter().map(|&i| self.weights[i].clone()).collect(),
        }
    }

    pub fn relabel(&self, atoms: Vec<Label>) -> Result<Self> {
        Self::new(atoms, self.weights.clone())
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        entropy_exact(&self.weights)
    }

    pub fn tensor(&self, other: &Self) -> Self {
        let mut atoms = Vec::with_capacity(self.len() * other.len());
        let mut weights = Vec::with_capacity(self.len() * other.len());
        let mut row: Option<(&Rational, Vec<Rational>)> = None;
        for (a, p) in self.atoms.iter().zip(&self.weights) {
            // Runs of equal weights (uniform factors) share one row of products.
            if row.as_ref().map_or(true, |(prev, _)| *prev != p) {
                row = Some((p, other.weights.iter().map(|q| p * q).collect()));
            }
            let products = &row.as_ref().expect("row is set").1;
            for (b, pq) in other.atoms.iter().zip(products) {
                atoms.push(Label::pair(a.clone(), b.clone()));
                weights.push(pq.clone());
            }
        }
        Self { atoms, weights }
    }

    /// Pushes the measure forward along `f`. Atoms on which `f` is undefined
    /// must carry zero weight; they are dropped from the source of the
    /// returned reduction.
    pub fn push_forward<F>(&self, f: F) -> Result<(Self, Reduction)>
    where
        F: Fn(&Label) -> Option<Label>,
    {
        let mut src_atoms = Vec::new();
        let mut src_weights = Vec::new();
        let mut tgt_index: BTreeMap<Label, usize> = BTreeMap::new();
        let mut tgt_atoms = Vec::new();
        let mut tgt_weights: Vec<Rational> = Vec::new();
        let mut map = Vec::new();
        for (a, w) in self.atoms.iter().zip(&self.weights) {
            match f(a) {
                Some(b) => {
                    let j = *tgt_index.entry(b.clone()).or_insert_with(|| {
                        tgt_atoms.push(b);
                        tgt_weights.push(Rational::zero());
                        tgt_atoms.len() - 1
                    });
                    tgt_weights[j] += w;
                    src_atoms.push(a.clone());
                    src_weights.push(w.clone());
                    map.push(j);
                }
                None if w.is_zero() => {}
                None => return Err(Error::UndefinedMap(a.to_string())),
            }
        }
        let source = Self { atoms: src_atoms, weights: src_weights };
        let target = Self { atoms: tgt_atoms, weights: tgt_weights };
        Ok((target.clone(), Reduction { source, target, map }))
    }

    /// Pushforward along an index map into a space with `len` atoms.
    pub fn push_weights(&self, map: &[usize], len: usize) -> Vec<Rational> {
        push_rational(&self.weights, map, len)
    }

    /// Conditional space given that the atoms in `keep` occurred.
    pub fn condition_on(&self, keep: &[bool]) -> Result<Self> {
        let mass: Rational = self
            .weights
            .iter()
            .zip(keep)
            .filter(|(_, &k)| k)
            .map(|(w, _)| w.clone())
            .sum();
        if mass.is_zero() {
            return Err(Error::ZeroWeight("conditioning event".into()));
        }
        let weights = self
            .weights
            .iter()
            .zip(keep)
            .map(|(w, &k)| if k { w / &mass } else { Rational::zero() })
            .collect();
        Ok(Self { atoms: self.atoms.clone(), weights })
    }
}

/// Entropy of an exact weight vector. Equal weights are grouped so that a
/// uniform space yields `ln n` with a single rounding.
pub fn entropy_exact(weights: &[Rational]) -> f64 {
    let mut groups: BTreeMap<&Rational, u64> = BTreeMap::new();
    for w in weights.iter().filter(|w| w.is_positive()) {
        *groups.entry(w).or_default() += 1;
    }
    groups
        .into_iter()
        .map(|(w, c)| {
            let mass = w * Rational::from_integer(c.into());
            -rational::to_f64(&mass) * rational::ln(w)
        })
        .sum()
}

pub fn push_rational(weights: &[Rational], map: &[usize], len: usize) -> Vec<Rational> {
    let mut out = vec![Rational::zero(); len];
    for (w, &j) in weights.iter().zip(map) {
        if !w.is_zero() {
            out[j] += w;
        }
    }
    out
}

fn check_same_atoms(p: &ProbabilitySpace, q: &ProbabilitySpace) -> Result<()> {
    if p.atoms != q.atoms {
        return Err(Error::AtomMismatch);
    }
    Ok(())
}

/// Relative entropy `D(p||q)`; `+inf` when the support of `p` is not
/// contained in the support of `q`.
pub fn divergence(p: &ProbabilitySpace, q: &ProbabilitySpace) -> Result<f64> {
    check_same_atoms(p, q)?;
    let mut d = 0.0;
    for (a, b) in p.weights.iter().zip(&q.weights) {
        if a.is_zero() {
            continue;
        }
        if b.is_zero() {
            return Ok(f64::INFINITY);
        }
        d += rational::to_f64(a) * rational::ln(&(a / b));
    }
    Ok(d)
}

/// `sum |p(x) - q(x)|`, exact.
pub fn total_variation_exact(p: &ProbabilitySpace, q: &ProbabilitySpace) -> Result<Rational> {
    check_same_atoms(p, q)?;
    Ok(p.weights.iter().zip(&q.weights).map(|(a, b)| (a - b).abs()).sum())
}

pub fn total_variation(p: &ProbabilitySpace, q: &ProbabilitySpace) -> Result<f64> {
    total_variation_exact(p, q).map(|r| rational::to_f64(&r))
}

/// Whether `D(pi_prime || pi) <= eps`.
pub fn divergence_ball_member(pi_prime: &ProbabilitySpace, pi: &ProbabilitySpace, eps: f64) -> Result<bool> {
    Ok(divergence(pi_prime, pi)? <= eps)
}

/// A measure-preserving map between two spaces, stored as an index map from
/// source atoms to target atoms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reduction {
    source: ProbabilitySpace,
    target: ProbabilitySpace,
    map: Vec<usize>,
}

impl Reduction {
    pub fn new(source: ProbabilitySpace, target: ProbabilitySpace, map: Vec<usize>) -> Result<Self> {
        if map.len() != source.len() || map.iter().any(|&j| j >= target.len()) {
            return Err(Error::Invalid("reduction map has wrong shape".into()));
        }
        let pushed = source.push_weights(&map, target.len());
        for (j, (a, b)) in pushed.iter().zip(&target.weights).enumerate() {
            if a != b {
                return Err(Error::NotMeasurePreserving {
                    arrow: "reduction".into(),
                    atom: target.atoms[j].to_string(),
                });
            }
        }
        Ok(Self { source, target, map })
    }

    pub fn source(&self) -> &ProbabilitySpace {
        &self.source
    }

    pub fn target(&self) -> &ProbabilitySpace {
        &self.target
    }

    pub fn map(&self) -> &[usize] {
        &self.map
    }
}

/// A two-fan of single spaces `X <- Z -> Y`.
#[derive(Debug, Clone)]
pub struct SpaceFan {
    pub left: ProbabilitySpace,
    pub vertex: ProbabilitySpace,
    pub right: ProbabilitySpace,
    pub to_left: Vec<usize>,
    pub to_right: Vec<usize>,
}

impl SpaceFan {
    pub fn new(
        left: ProbabilitySpace,
        vertex: ProbabilitySpace,
        right: ProbabilitySpace,
        to_left: Vec<usize>,
        to_right: Vec<usize>,
    ) -> Result<Self> {
        Reduction::new(vertex.clone(), left.clone(), to_left.clone())?;
        Reduction::new(vertex.clone(), right.clone(), to_right.clone())?;
        Ok(Self { left, vertex, right, to_left, to_right })
    }

    /// The fan whose vertex is the given joint distribution on `X x Y`.
    pub fn from_joint(left: &ProbabilitySpace, right: &ProbabilitySpace, joint: &[Rational]) -> Result<Self> {
        let (n, m) = (left.len(), right.len());
        if joint.len() != n * m {
            return Err(Error::Invalid("joint has wrong size".into()));
        }
        let mut atoms = Vec::new();
        let mut weights = Vec::new();
        let mut tl = Vec::new();
        let mut tr = Vec::new();
        for i in 0..n {
            for j in 0..m {
                let w = &joint[i * m + j];
                if w.is_positive() {
                    atoms.push(Label::pair(left.atoms[i].clone(), right.atoms[j].clone()));
                    weights.push(w.clone());
                    tl.push(i);
                    tr.push(j);
                }
            }
        }
        let vertex = ProbabilitySpace::new(atoms, weights)?;
        Self::new(left.clone(), vertex, right.clone(), tl, tr)
    }

    /// Minimal iff the joint map into `X x Y` is injective on the support.
    pub fn is_minimal(&self) -> bool {
        let mut seen = BTreeMap::new();
        for i in self.vertex.support() {
            if seen.insert((self.to_left[i], self.to_right[i]), ()).is_some() {
                return false;
            }
        }
        true
    }

    pub fn minimal_reduction(&self) -> Self {
        let m = self.right.len();
        let mut joint = vec![Rational::zero(); self.left.len() * m];
        for (i, w) in self.vertex.weights.iter().enumerate() {
            joint[self.to_left[i] * m + self.to_right[i]] += w;
        }
        Self::from_joint(&self.left, &self.right, &joint).expect("pushforward of a valid fan")
    }

    /// `ent(Z) - ent(Y)`, the entropy of the left leg given the right one.
    pub fn conditional_entropy(&self) -> Result<f64> {
        if !self.is_minimal() {
            return Err(Error::NotMinimal);
        }
        Ok(self.vertex.entropy() - self.right.entropy())
    }

    /// `2 ent(Z) - ent(X) - ent(Y)` of the minimal reduction.
    pub fn kd(&self) -> f64 {
        let m = self.minimal_reduction();
        2.0 * m.vertex.entropy() - m.left.entropy() - m.right.entropy()
    }
}

/// `ln n` for `n` atoms as a float, used by several bounds.
pub fn ln_card(n: usize) -> f64 {
    math::ln(n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    fn lam(a: i64, b: i64) -> ProbabilitySpace {
        ProbabilitySpace::binary(&rat(a, b)).unwrap()
    }

    #[test]
    fn entropy_examples() {
        assert!((ProbabilitySpace::uniform(6).entropy() - 1.791759469228055).abs() < 1e-12);
        assert_eq!(ProbabilitySpace::point().entropy(), 0.0);
        assert!((lam(1, 4).entropy() - 0.562335145).abs() < 1e-9);
    }

    #[test]
    fn divergence_examples() {
        let u4 = ProbabilitySpace::uniform(4);
        let d = ProbabilitySpace::from_weights(vec![rat(1, 1), rat(0, 1), rat(0, 1), rat(0, 1)]).unwrap();
        assert_eq!(divergence(&u4, &u4).unwrap(), 0.0);
        assert!((divergence(&d, &u4).unwrap() - 4f64.ln()).abs() < 1e-12);
        assert_eq!(divergence(&u4, &d).unwrap(), f64::INFINITY);
        let u2 = ProbabilitySpace::uniform(2);
        let q = ProbabilitySpace::from_weights(vec![rat(3, 4), rat(1, 4)]).unwrap();
        assert!((divergence(&u2, &q).unwrap() - 0.143841036).abs() < 1e-8);
        assert!(divergence(&u2, &u4).is_err());
        assert!(divergence_ball_member(&d, &u4, 4f64.ln()).unwrap());
        assert!(!divergence_ball_member(&d, &u4, 4f64.ln() - 0.01).unwrap());
    }

    #[test]
    fn total_variation_examples() {
        let a = ProbabilitySpace::from_weights(vec![rat(1, 1), rat(0, 1)]).unwrap();
        let b = ProbabilitySpace::from_weights(vec![rat(0, 1), rat(1, 1)]).unwrap();
        assert_eq!(total_variation_exact(&a, &b).unwrap(), rat(2, 1));
        let u2 = ProbabilitySpace::uniform(2);
        let q = ProbabilitySpace::from_weights(vec![rat(3, 4), rat(1, 4)]).unwrap();
        assert_eq!(total_variation_exact(&u2, &q).unwrap(), rat(1, 2));
    }

    #[test]
    fn tensor_examples() {
        let t = lam(1, 4).tensor(&lam(1, 4));
        let w: Vec<_> = t.weights().to_vec();
        assert_eq!(w, vec![rat(9, 16), rat(3, 16), rat(3, 16), rat(1, 16)]);
        let u6 = ProbabilitySpace::uniform(2).tensor(&ProbabilitySpace::uniform(3));
        assert!((u6.entropy() - 6f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn push_forward_examples() {
        let u4 = ProbabilitySpace::uniform(4);
        let (t, r) = u4
            .push_forward(|a| match a {
                Label::Int(i) => Some(Label::Int(i % 2)),
                _ => None,
            })
            .unwrap();
        assert_eq!(t.weights(), &[rat(1, 2), rat(1, 2)]);
        assert_eq!(r.map(), &[0, 1, 0, 1]);
        let (p, _) = lam(1, 4).push_forward(|_| Some(Label::Int(0))).unwrap();
        assert_eq!(p, ProbabilitySpace::point());
        assert!(u4.push_forward(|_| None).is_err());
    }

    #[test]
    fn conditional_entropy_examples() {
        let u4 = ProbabilitySpace::uniform(4);
        let u2 = ProbabilitySpace::uniform(2);
        let fan = SpaceFan::new(u4.clone(), u4.clone(), u2, vec![0, 1, 2, 3], vec![0, 1, 0, 1]).unwrap();
        assert!((fan.conditional_entropy().unwrap() - 2f64.ln()).abs() < 1e-12);
        let diag = SpaceFan::new(u4.clone(), u4.clone(), u4.clone(), vec![0, 1, 2, 3], vec![0, 1, 2, 3]).unwrap();
        assert!(diag.conditional_entropy().unwrap().abs() < 1e-12);
        let bad = SpaceFan::new(ProbabilitySpace::point(), u4, ProbabilitySpace::point(), vec![0; 4], vec![0; 4]).unwrap();
        assert_eq!(bad.conditional_entropy(), Err(Error::NotMinimal));
    }

    #[test]
    fn rejects_invalid() {
        assert!(ProbabilitySpace::from_weights(vec![rat(1, 2)]).is_err());
        assert!(ProbabilitySpace::from_weights(vec![rat(3, 2), rat(-1, 2)]).is_err());
        assert!(ProbabilitySpace::new(vec![Label::Int(0), Label::Int(0)], vec![rat(1, 2), rat(1, 2)]).is_err());
    }
}
