//! Configurations: commuting diagrams of probability spaces and reductions.
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::rational::Rational;
use crate::shape::{full_masks, DiagramShape};
use crate::space::{push_rational, Label, ProbabilitySpace};

/// Object-wise entropies of a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyVector {
    pub values: Vec<f64>,
}

impl EntropyVector {
    pub fn l1(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }

    pub fn distance(&self, other: &Self) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).sum()
    }
}

/// A functor from a shape into probability spaces. Maps are stored for
/// every arrow of the transitive closure.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    shape: DiagramShape,
    spaces: Vec<ProbabilitySpace>,
    maps: BTreeMap<(usize, usize), Vec<usize>>,
}

fn arrow_name(shape: &DiagramShape, i: usize, j: usize) -> String {
    format!("{}->{}", shape.names()[i], shape.names()[j])
}

impl Configuration {
    /// Builds and validates a configuration. `maps` must cover the generating
    /// arrows; composite arrows are filled in by composition, and any
    /// composite supplied explicitly is checked for commutativity.
    pub fn new(
        shape: DiagramShape,
        spaces: Vec<ProbabilitySpace>,
        mut maps: BTreeMap<(usize, usize), Vec<usize>>,
    ) -> Result<Self> {
        if spaces.len() != shape.len() {
            return Err(Error::ShapeMismatch("one space per object required".into()));
        }
        for &(i, j) in maps.keys() {
            if !shape.has_arrow(i, j) {
                return Err(Error::InvalidShape(format!("no arrow {i}->{j} in shape")));
            }
        }
        for &(i, j) in shape.generators() {
            if !maps.contains_key(&(i, j)) {
                return Err(Error::Invalid(format!("missing map {}", arrow_name(&shape, i, j))));
            }
        }
        for (&(i, j), m) in &maps {
            check_reduction(&shape, &spaces, i, j, m)?;
        }
        loop {
            let missing: Vec<(usize, usize)> = shape.arrows().filter(|a| !maps.contains_key(a)).collect();
            if missing.is_empty() {
                break;
            }
            let mut progressed = false;
            for (i, k) in missing {
                let mid = (0..shape.len()).find(|&j| maps.contains_key(&(i, j)) && maps.contains_key(&(j, k)));
                if let Some(j) = mid {
                    let composed: Vec<usize> = maps[&(i, j)].iter().map(|&a| maps[&(j, k)][a]).collect();
                    maps.insert((i, k), composed);
                    progressed = true;
                }
            }
            if !progressed {
                return Err(Error::Invalid("cannot derive composite maps".into()));
            }
        }
        let cfg = Self { shape, spaces, maps };
        cfg.check_commutativity()?;
        Ok(cfg)
    }

    fn check_commutativity(&self) -> Result<()> {
        for (&(i, j), f) in &self.maps {
            for (&(j2, k), g) in self.maps.range((j, 0)..(j + 1, 0)) {
                debug_assert_eq!(j, j2);
                let h = &self.maps[&(i, k)];
                for a in self.spaces[i].support() {
                    if g[f[a]] != h[a] {
                        return Err(Error::NotCommuting {
                            first: arrow_name(&self.shape, i, j),
                            second: arrow_name(&self.shape, j, k),
                            atom: self.spaces[i].atoms()[a].to_string(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// The constant configuration with identity maps.
    pub fn constant(shape: DiagramShape, space: ProbabilitySpace) -> Self {
        let id: Vec<usize> = (0..space.len()).collect();
        let maps = shape.arrows().map(|a| (a, id.clone())).collect();
        let spaces = vec![space; shape.len()];
        Self { shape, spaces, maps }
    }

    /// A single space viewed as a configuration on the one-object shape.
    pub fn single(space: ProbabilitySpace) -> Self {
        Self::constant(DiagramShape::singleton(), space)
    }

    /// The full configuration generated by variables on a joint space.
    /// `vars[v][a]` is the value of variable `v` at joint atom `a`.
    pub fn generated(joint: &ProbabilitySpace, vars: &[Vec<Label>]) -> Result<Self> {
        let n = vars.len();
        if n == 0 || vars.iter().any(|v| v.len() != joint.len()) {
            return Err(Error::Invalid("variables must be defined on every joint atom".into()));
        }
        let shape = DiagramShape::full(n);
        let masks = full_masks(n);
        let mut spaces = Vec::new();
        let mut keys: Vec<Vec<usize>> = Vec::new();
        let mut labels: Vec<Vec<Label>> = Vec::new();
        for &m in &masks {
            let mut index: BTreeMap<Label, usize> = BTreeMap::new();
            let mut atoms = Vec::new();
            let mut key = Vec::with_capacity(joint.len());
            for a in 0..joint.len() {
                let lab = tuple_label(m, n, |v| vars[v][a].clone());
                let k = *index.entry(lab.clone()).or_insert_with(|| {
                    atoms.push(lab);
                    atoms.len() - 1
                });
                key.push(k);
            }
            let w = push_rational(joint.weights(), &key, atoms.len());
            spaces.push(ProbabilitySpace::new(atoms.clone(), w)?);
            keys.push(key);
            labels.push(atoms);
        }
        let mut maps = BTreeMap::new();
        for (a, b) in shape.arrows() {
            let mut m = vec![0usize; labels[a].len()];
            for j in 0..joint.len() {
                m[keys[a][j]] = keys[b][j];
            }
            maps.insert((a, b), m);
        }
        Ok(Self { shape, spaces, maps })
    }

    pub fn shape(&self) -> &DiagramShape {
        &self.shape
    }

    pub fn spaces(&self) -> &[ProbabilitySpace] {
        &self.spaces
    }

    pub fn space(&self, i: usize) -> &ProbabilitySpace {
        &self.spaces[i]
    }

    /// The map along an arrow, or `None` when there is no arrow.
    pub fn map(&self, i: usize, j: usize) -> Option<&[usize]> {
        self.maps.get(&(i, j)).map(|v| v.as_slice())
    }

    pub fn maps(&self) -> &BTreeMap<(usize, usize), Vec<usize>> {
        &self.maps
    }

    pub fn is_complete(&self) -> bool {
        self.shape.is_complete()
    }

    pub fn initial(&self) -> Result<usize> {
        self.shape.initial().ok_or(Error::NotComplete)
    }

    pub fn initial_space(&self) -> Result<&ProbabilitySpace> {
        Ok(&self.spaces[self.initial()?])
    }

    /// For a complete configuration, the map from initial atoms to the atoms
    /// of every object.
    pub fn projections(&self) -> Result<Vec<Vec<usize>>> {
        let o = self.initial()?;
        Ok((0..self.shape.len())
            .map(|i| {
                if i == o {
                    (0..self.spaces[o].len()).collect()
                } else {
                    self.maps[&(o, i)].clone()
                }
            })
            .collect())
    }

    pub fn entropy_vector(&self) -> EntropyVector {
        EntropyVector { values: self.spaces.iter().map(|s| s.entropy()).collect() }
    }

    /// Drops zero-weight atoms everywhere.
    pub fn trim(&self) -> Self {
        let supports: Vec<Vec<usize>> = self.spaces.iter().map(|s| s.support()).collect();
        let renum: Vec<BTreeMap<usize, usize>> = supports
            .iter()
            .map(|s| s.iter().enumerate().map(|(k, &i)| (i, k)).collect())
            .collect();
        let spaces = self.spaces.iter().map(|s| s.support_space()).collect();
        let maps = self
            .maps
            .iter()
            .map(|(&(i, j), m)| ((i, j), supports[i].iter().map(|&a| renum[j][&m[a]]).collect()))
            .collect();
        Self { shape: self.shape.clone(), spaces, maps }
    }

    /// Replaces the initial distribution and pushes it down. The atom sets
    /// and maps are kept.
    pub fn pushdown(&self, p0: &[Rational]) -> Result<Self> {
        let o = self.initial()?;
        let init = &self.spaces[o];
        if p0.len() != init.len() {
            return Err(Error::Invalid("distribution has wrong length".into()));
        }
        let new_init = ProbabilitySpace::new(init.atoms().to_vec(), p0.to_vec())?;
        let proj = self.projections()?;
        let spaces = (0..self.shape.len())
            .map(|i| {
                if i == o {
                    new_init.clone()
                } else {
                    let w = push_rational(p0, &proj[i], self.spaces[i].len());
                    ProbabilitySpace::new(self.spaces[i].atoms().to_vec(), w).expect("pushforward of a distribution")
                }
            })
            .collect();
        Ok(Self { shape: self.shape.clone(), spaces, maps: self.maps.clone() })
    }

    /// Slice over atom `atom` of object `anchor`: the initial distribution is
    /// conditioned on the event that the anchor takes this value.
    pub fn condition(&self, anchor: usize, atom: usize) -> Result<Self> {
        let o = self.initial()?;
        let w = &self.spaces[anchor].weights()[atom];
        if !w.is_positive() {
            return Err(Error::ZeroWeight(self.spaces[anchor].atoms()[atom].to_string()));
        }
        let proj = self.projections()?;
        let init = &self.spaces[o];
        let p0: Vec<Rational> = init
            .weights()
            .iter()
            .zip(&proj[anchor])
            .map(|(p, &k)| if k == atom { p / w } else { Rational::zero() })
            .collect();
        self.pushdown(&p0)
    }

    /// Object-wise tensor product.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch("tensor factors differ in shape".into()));
        }
        let spaces = self.spaces.iter().zip(&other.spaces).map(|(a, b)| a.tensor(b)).collect();
        let maps = self
            .maps
            .iter()
            .map(|(&(i, j), f)| {
                let g = &other.maps[&(i, j)];
                let (n1, n2) = (other.spaces[i].len(), other.spaces[j].len());
                let mut m = vec![0; self.spaces[i].len() * n1];
                for a in 0..self.spaces[i].len() {
                    for b in 0..n1 {
                        m[a * n1 + b] = f[a] * n2 + g[b];
                    }
                }
                ((i, j), m)
            })
            .collect();
        Ok(Self { shape: self.shape.clone(), spaces, maps })
    }

    /// `n`-th tensor power on supports, with atoms labelled by `n`-tuples.
    pub fn power(&self, n: usize) -> Self {
        let base = self.trim();
        if n == 1 {
            return base;
        }
        let spaces: Vec<ProbabilitySpace> = base.spaces.iter().map(|s| power_space(s, n)).collect();
        let maps = base
            .maps
            .iter()
            .map(|(&(i, j), f)| {
                let (ni, nj) = (base.spaces[i].len(), base.spaces[j].len());
                let total = spaces[i].len();
                let mut m = vec![0; total];
                for (idx, slot) in m.iter_mut().enumerate() {
                    let mut rest = idx;
                    let mut out = 0;
                    let mut scale = 1;
                    for _ in 0..n {
                        out += f[rest % ni] * scale;
                        rest /= ni;
                        scale *= nj;
                    }
                    *slot = out;
                }
                ((i, j), m)
            })
            .collect();
        Self { shape: base.shape.clone(), spaces, maps }
    }

    /// Pullback along a functor given by its object map.
    pub fn restrict(&self, shape: &DiagramShape, object_map: &[usize]) -> Result<Self> {
        shape.check_functor(&self.shape, object_map)?;
        let spaces = object_map.iter().map(|&o| self.spaces[o].clone()).collect();
        let maps = shape
            .arrows()
            .map(|(i, j)| {
                let (a, b) = (object_map[i], object_map[j]);
                let m = if a == b {
                    (0..self.spaces[a].len()).collect()
                } else {
                    self.maps[&(a, b)].clone()
                };
                ((i, j), m)
            })
            .collect();
        Ok(Self { shape: shape.clone(), spaces, maps })
    }

    /// Relabels every object's atoms by their index, dropping label content.
    pub fn anonymize(&self) -> Self {
        let spaces = self
            .spaces
            .iter()
            .map(|s| ProbabilitySpace::from_weights(s.weights().to_vec()).unwrap())
            .collect();
        Self { shape: self.shape.clone(), spaces, maps: self.maps.clone() }
    }
}

fn check_reduction(shape: &DiagramShape, spaces: &[ProbabilitySpace], i: usize, j: usize, m: &[usize]) -> Result<()> {
    let (s, t) = (&spaces[i], &spaces[j]);
    if m.len() != s.len() || m.iter().any(|&k| k >= t.len()) {
        return Err(Error::Invalid(format!("map {} has wrong shape", arrow_name(shape, i, j))));
    }
    let pushed = push_rational(s.weights(), m, t.len());
    for (k, (a, b)) in pushed.iter().zip(t.weights()).enumerate() {
        if a != b {
            return Err(Error::NotMeasurePreserving {
                arrow: arrow_name(shape, i, j),
                atom: t.atoms()[k].to_string(),
            });
        }
    }
    Ok(())
}

fn tuple_label(mask: u32, n: usize, f: impl Fn(usize) -> Label) -> Label {
    let vs: Vec<Label> = (0..n).filter(|b| mask >> b & 1 == 1).map(f).collect();
    if vs.len() == 1 {
        vs.into_iter().next().unwrap()
    } else {
        Label::Tuple(vs)
    }
}

/// `n`-fold tensor power of a space's support; atom index is mixed radix
/// with the first coordinate least significant.
pub fn power_space(s: &ProbabilitySpace, n: usize) -> ProbabilitySpace {
    let s = s.support_space();
    let k = s.len();
    let total = k.pow(n as u32);
    let mut atoms = Vec::with_capacity(total);
    let mut weights = Vec::with_capacity(total);
    for idx in 0..total {
        let mut rest = idx;
        let mut labs = Vec::with_capacity(n);
        let mut w = Rational::from_integer(1.into());
        for _ in 0..n {
            labs.push(s.atoms()[rest % k].clone());
            w *= &s.weights()[rest % k];
            rest /= k;
        }
        atoms.push(Label::Tuple(labs));
        weights.push(w);
    }
    ProbabilitySpace::new(atoms, weights).expect("power of a valid space")
}

/// Adhesion of a minimal two-tents configuration `X <- U -> Y <- V -> Z`
/// into the full configuration on three variables, with
/// `p(x,y,z) = p_U(x,y) p_V(y,z) / p_Y(y)`.
pub fn adhesion(tents: &Configuration) -> Result<Configuration> {
    if tents.shape() != &DiagramShape::two_tents() {
        return Err(Error::ShapeMismatch("adhesion needs a two-tents configuration".into()));
    }
    let (u, v, x, y, z) = (0, 1, 2, 3, 4);
    let su = &tents.spaces[u];
    let sv = &tents.spaces[v];
    let (ux, uy) = (&tents.maps[&(u, x)], &tents.maps[&(u, y)]);
    let (vy, vz) = (&tents.maps[&(v, y)], &tents.maps[&(v, z)]);
    let minimal = |s: &ProbabilitySpace, f: &[usize], g: &[usize]| {
        let mut seen = BTreeMap::new();
        s.support().into_iter().all(|a| seen.insert((f[a], g[a]), ()).is_none())
    };
    if !minimal(su, ux, uy) || !minimal(sv, vy, vz) {
        return Err(Error::NotMinimal);
    }
    let py = tents.spaces[y].weights();
    let mut atoms = Vec::new();
    let mut weights = Vec::new();
    let mut vars: Vec<Vec<Label>> = vec![Vec::new(); 3];
    for a in su.support() {
        for b in sv.support() {
            if uy[a] != vy[b] {
                continue;
            }
            let w = &su.weights()[a] * &sv.weights()[b] / &py[uy[a]];
            atoms.push(Label::Int(atoms.len() as i64));
            weights.push(w);
            vars[0].push(tents.spaces[x].atoms()[ux[a]].clone());
            vars[1].push(tents.spaces[y].atoms()[uy[a]].clone());
            vars[2].push(tents.spaces[z].atoms()[vz[b]].clone());
        }
    }
    let joint = ProbabilitySpace::new(atoms, weights).map_err(|_| Error::Invalid("middle marginals disagree".into()))?;
    Configuration::generated(&joint, &vars)
}

/// The inclusion of the two-tents shape into the full three-variable shape,
/// as an object map (`12, 23, 1, 2, 3`).
pub fn two_tents_inclusion() -> Vec<usize> {
    let full = DiagramShape::full(3);
    ["12", "23", "1", "2", "3"].iter().map(|n| full.position(n).unwrap()).collect()
}

/// The fence inside the full three-variable shape (`12, 13, 23, 1, 2, 3`).
pub fn fence_inclusion() -> Vec<usize> {
    let full = DiagramShape::full(3);
    ["12", "13", "23", "1", "2", "3"].iter().map(|n| full.position(n).unwrap()).collect()
}

/// The doubling functor from two-tents onto a two-fan: `Q1 -> O1`,
/// `Q12 -> O12`, `Q2 -> O2`, `Q23 -> O12`, `Q3 -> O1`.
pub fn doubling_map() -> Vec<usize> {
    vec![0, 0, 1, 2, 1]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    fn mod_chain() -> Configuration {
        let mut maps = BTreeMap::new();
        maps.insert((0, 1), vec![0, 1, 0, 1]);
        maps.insert((1, 2), vec![0, 0]);
        Configuration::new(
            DiagramShape::chain(3),
            vec![ProbabilitySpace::uniform(4), ProbabilitySpace::uniform(2), ProbabilitySpace::uniform(1)],
            maps,
        )
        .unwrap()
    }

    #[test]
    fn validation() {
        let c = mod_chain();
        assert_eq!(c.map(0, 2).unwrap(), &[0, 0, 0, 0]);
        let id = Configuration::constant(DiagramShape::chain(2), ProbabilitySpace::uniform(3));
        assert!(Configuration::new(id.shape().clone(), id.spaces().to_vec(), id.maps().clone()).is_ok());
        let mut maps = BTreeMap::new();
        maps.insert((0, 1), vec![0, 1, 0, 1]);
        maps.insert((1, 2), vec![0, 0]);
        let bad_target = ProbabilitySpace::from_weights(vec![rat(1, 3), rat(2, 3)]).unwrap();
        let err = Configuration::new(
            DiagramShape::chain(3),
            vec![ProbabilitySpace::uniform(4), bad_target, ProbabilitySpace::uniform(1)],
            maps,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NotMeasurePreserving { ref arrow, .. } if arrow == "0->1"));
    }

    #[test]
    fn non_commuting_square_is_named() {
        let mut maps = BTreeMap::new();
        maps.insert((0, 1), vec![0, 1, 0, 1]);
        maps.insert((1, 2), vec![0, 1]);
        maps.insert((0, 2), vec![0, 0, 1, 1]);
        let err = Configuration::new(
            DiagramShape::chain(3),
            vec![ProbabilitySpace::uniform(4), ProbabilitySpace::uniform(2), ProbabilitySpace::uniform(2)],
            maps,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NotCommuting { .. }));
    }

    #[test]
    fn entropy_vectors() {
        let c = Configuration::constant(DiagramShape::chain(3), ProbabilitySpace::uniform(2));
        let e = c.entropy_vector();
        assert!((e.l1() - 3.0 * 2f64.ln()).abs() < 1e-12);
        let joint = ProbabilitySpace::uniform(4);
        let vars = vec![
            (0..4).map(|i| Label::Int(i % 2)).collect(),
            (0..4).map(|i| Label::Int(i / 2)).collect(),
        ];
        let full = Configuration::generated(&joint, &vars).unwrap();
        let e = full.entropy_vector().values;
        assert!((e[0] - 4f64.ln()).abs() < 1e-12 && (e[1] - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn restriction_and_doubling() {
        let joint = ProbabilitySpace::from_weights(vec![rat(1, 2), rat(1, 4), rat(1, 4)]).unwrap();
        let vars = vec![
            vec![Label::Int(0), Label::Int(0), Label::Int(1)],
            vec![Label::Int(0), Label::Int(1), Label::Int(1)],
        ];
        let fan = Configuration::generated(&joint, &vars).unwrap();
        let d = fan.restrict(&DiagramShape::two_tents(), &doubling_map()).unwrap();
        assert_eq!(d.space(2), d.space(4));
        assert_eq!(d.space(0), d.space(1));
        let id = fan.restrict(fan.shape(), &[0, 1, 2]).unwrap();
        assert_eq!(id, fan);
    }

    #[test]
    fn adhesion_of_independent() {
        let joint = ProbabilitySpace::uniform(8);
        let vars: Vec<Vec<Label>> = (0..3).map(|b| (0..8).map(|i| Label::Int((i >> b) & 1)).collect()).collect();
        let full = Configuration::generated(&joint, &vars).unwrap();
        let tents = full.restrict(&DiagramShape::two_tents(), &two_tents_inclusion()).unwrap();
        let glued = adhesion(&tents).unwrap();
        assert!(glued.space(0).weights().iter().all(|w| *w == rat(1, 8)));
        let back = glued.restrict(&DiagramShape::two_tents(), &two_tents_inclusion()).unwrap();
        assert_eq!(back.entropy_vector(), tents.entropy_vector());
    }

    #[test]
    fn conditioning() {
        let c = mod_chain();
        let s = c.condition(1, 0).unwrap();
        assert_eq!(s.space(0).weights(), &[rat(1, 2), rat(0, 1), rat(1, 2), rat(0, 1)]);
        assert!(c.condition(2, 0).unwrap().space(0) == c.space(0));
    }

    #[test]
    fn powers() {
        let c = mod_chain();
        let p = c.power(2);
        assert_eq!(p.space(0).len(), 16);
        assert!((p.entropy_vector().values[1] - 2.0 * 2f64.ln()).abs() < 1e-12);
        let t = c.tensor(&c).unwrap();
        assert!((t.entropy_vector().l1() - p.entropy_vector().l1()).abs() < 1e-12);
    }
}
