//! Two-fans of configurations `X <- Z -> Y` and their minimal reductions.
use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Zero;

use crate::config::Configuration;
use crate::error::{Error, Result};
use crate::rational::Rational;
use crate::space::{push_rational, Label, ProbabilitySpace};

#[derive(Debug, Clone)]
pub struct TwoFan {
    pub left: Configuration,
    pub vertex: Configuration,
    pub right: Configuration,
    /// `to_left[i][z]` is the image of vertex atom `z` at object `i`.
    pub to_left: Vec<Vec<usize>>,
    pub to_right: Vec<Vec<usize>>,
}

impl TwoFan {
    pub fn new(
        left: Configuration,
        vertex: Configuration,
        right: Configuration,
        to_left: Vec<Vec<usize>>,
        to_right: Vec<Vec<usize>>,
    ) -> Result<Self> {
        let shape = vertex.shape();
        if left.shape() != shape || right.shape() != shape {
            return Err(Error::ShapeMismatch("fan terminals must share the vertex shape".into()));
        }
        for (side, legs) in [(&left, &to_left), (&right, &to_right)] {
            if legs.len() != shape.len() {
                return Err(Error::ShapeMismatch("one leg per object required".into()));
            }
            for i in 0..shape.len() {
                let z = vertex.space(i);
                let leg = &legs[i];
                if leg.len() != z.len() || leg.iter().any(|&k| k >= side.space(i).len()) {
                    return Err(Error::Invalid("leg has wrong shape".into()));
                }
                if push_rational(z.weights(), leg, side.space(i).len()) != side.space(i).weights() {
                    return Err(Error::NotMeasurePreserving {
                        arrow: alloc::format!("leg at {}", shape.names()[i]),
                        atom: alloc::string::String::new(),
                    });
                }
            }
            for (i, j) in shape.arrows() {
                let vz = vertex.map(i, j).unwrap();
                let vs = side.map(i, j).unwrap();
                for a in vertex.space(i).support() {
                    if legs[j][vz[a]] != vs[legs[i][a]] {
                        return Err(Error::NotCommuting {
                            first: alloc::format!("leg at {}", shape.names()[i]),
                            second: alloc::format!("{}->{}", shape.names()[i], shape.names()[j]),
                            atom: alloc::string::ToString::to_string(&vertex.space(i).atoms()[a]),
                        });
                    }
                }
            }
        }
        Ok(Self { left, vertex, right, to_left, to_right })
    }

    /// The fan over two complete configurations whose vertex is the given
    /// coupling of the initial spaces, pushed down object by object. The
    /// result is minimal at every level.
    pub fn from_initial_coupling(x: &Configuration, y: &Configuration, joint: &[Rational]) -> Result<Self> {
        if x.shape() != y.shape() {
            return Err(Error::ShapeMismatch("coupled configurations differ in shape".into()));
        }
        let (px, py) = (x.projections()?, y.projections()?);
        let ox = x.initial()?;
        let m = y.space(ox).len();
        if joint.len() != x.space(ox).len() * m {
            return Err(Error::Invalid("coupling has wrong size".into()));
        }
        let n_obj = x.shape().len();
        let mut level_index: Vec<BTreeMap<(usize, usize), usize>> = vec![BTreeMap::new(); n_obj];
        let mut level_weights: Vec<Vec<Rational>> = vec![Vec::new(); n_obj];
        let mut level_pairs: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n_obj];
        for (cell, w) in joint.iter().enumerate() {
            if w.is_zero() {
                continue;
            }
            let (a, b) = (cell / m, cell % m);
            for i in 0..n_obj {
                let key = (px[i][a], py[i][b]);
                let k = *level_index[i].entry(key).or_insert_with(|| {
                    level_pairs[i].push(key);
                    level_weights[i].push(Rational::zero());
                    level_pairs[i].len() - 1
                });
                level_weights[i][k] += w;
            }
        }
        let spaces: Vec<ProbabilitySpace> = (0..n_obj)
            .map(|i| {
                let atoms = level_pairs[i]
                    .iter()
                    .map(|&(a, b)| Label::pair(x.space(i).atoms()[a].clone(), y.space(i).atoms()[b].clone()))
                    .collect();
                ProbabilitySpace::new(atoms, level_weights[i].clone())
            })
            .collect::<Result<_>>()?;
        let mut maps = BTreeMap::new();
        for (i, j) in x.shape().arrows() {
            let (fx, fy) = (x.map(i, j).unwrap(), y.map(i, j).unwrap());
            let m: Vec<usize> = level_pairs[i].iter().map(|&(a, b)| level_index[j][&(fx[a], fy[b])]).collect();
            maps.insert((i, j), m);
        }
        let vertex = Configuration::new(x.shape().clone(), spaces, maps)?;
        let to_left = level_pairs.iter().map(|ps| ps.iter().map(|p| p.0).collect()).collect();
        let to_right = level_pairs.iter().map(|ps| ps.iter().map(|p| p.1).collect()).collect();
        Self::new(x.clone(), vertex, y.clone(), to_left, to_right)
    }

    pub fn is_minimal(&self) -> bool {
        (0..self.vertex.shape().len()).all(|i| {
            let mut seen = BTreeMap::new();
            self.vertex
                .space(i)
                .support()
                .into_iter()
                .all(|a| seen.insert((self.to_left[i][a], self.to_right[i][a]), ()).is_none())
        })
    }

    /// Level-wise replacement of the vertex by its image in `X_i x Y_i`.
    pub fn minimal_reduction(&self) -> Self {
        let shape = self.vertex.shape();
        let n_obj = shape.len();
        let mut index: Vec<BTreeMap<(usize, usize), usize>> = vec![BTreeMap::new(); n_obj];
        let mut pairs: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n_obj];
        let mut weights: Vec<Vec<Rational>> = vec![Vec::new(); n_obj];
        for i in 0..n_obj {
            let z = self.vertex.space(i);
            for a in z.support() {
                let key = (self.to_left[i][a], self.to_right[i][a]);
                let k = *index[i].entry(key).or_insert_with(|| {
                    pairs[i].push(key);
                    weights[i].push(Rational::zero());
                    pairs[i].len() - 1
                });
                weights[i][k] += &z.weights()[a];
            }
        }
        let spaces = (0..n_obj)
            .map(|i| {
                let atoms = pairs[i]
                    .iter()
                    .map(|&(a, b)| {
                        Label::pair(self.left.space(i).atoms()[a].clone(), self.right.space(i).atoms()[b].clone())
                    })
                    .collect();
                ProbabilitySpace::new(atoms, weights[i].clone()).unwrap()
            })
            .collect();
        let mut maps = BTreeMap::new();
        for (i, j) in shape.arrows() {
            let (fx, fy) = (self.left.map(i, j).unwrap(), self.right.map(i, j).unwrap());
            maps.insert((i, j), pairs[i].iter().map(|&(a, b)| index[j][&(fx[a], fy[b])]).collect());
        }
        let vertex = Configuration::new(shape.clone(), spaces, maps).expect("image of a commuting fan commutes");
        let to_left = pairs.iter().map(|ps| ps.iter().map(|p| p.0).collect()).collect();
        let to_right = pairs.iter().map(|ps| ps.iter().map(|p| p.1).collect()).collect();
        Self { left: self.left.clone(), vertex, right: self.right.clone(), to_left, to_right }
    }

    /// `sum_i 2 ent(Z_i) - ent(X_i) - ent(Y_i)` after minimalization.
    pub fn kd(&self) -> f64 {
        let m = if self.is_minimal() { self.clone() } else { self.minimal_reduction() };
        (0..m.vertex.shape().len())
            .map(|i| 2.0 * m.vertex.space(i).entropy() - m.left.space(i).entropy() - m.right.space(i).entropy())
            .sum()
    }

    /// Joint distribution of the initial level as a dense `|X_0| x |Y_0|` matrix.
    pub fn initial_coupling(&self) -> Result<Vec<Rational>> {
        let o = self.vertex.initial()?;
        let (n, m) = (self.left.space(o).len(), self.right.space(o).len());
        let mut out = vec![Rational::zero(); n * m];
        for (a, w) in self.vertex.space(o).weights().iter().enumerate() {
            out[self.to_left[o][a] * m + self.to_right[o][a]] += w;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    #[test]
    fn kd_examples() {
        let u2 = Configuration::single(ProbabilitySpace::uniform(2));
        let diag = vec![rat(1, 2), rat(0, 1), rat(0, 1), rat(1, 2)];
        let f = TwoFan::from_initial_coupling(&u2, &u2, &diag).unwrap();
        assert!(f.kd().abs() < 1e-12);
        let ind = vec![rat(1, 4); 4];
        let g = TwoFan::from_initial_coupling(&u2, &u2, &ind).unwrap();
        assert!((g.kd() - 2.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn minimalization_merges_atoms() {
        let u2 = Configuration::single(ProbabilitySpace::uniform(2));
        let z = Configuration::single(ProbabilitySpace::uniform(4));
        let fan = TwoFan::new(u2.clone(), z, u2, vec![vec![0, 0, 1, 1]], vec![vec![0, 0, 1, 1]]).unwrap();
        assert!(!fan.is_minimal());
        let m = fan.minimal_reduction();
        assert!(m.is_minimal());
        assert_eq!(m.vertex.space(0).len(), 2);
        assert!(fan.kd().abs() < 1e-12);
    }
}
