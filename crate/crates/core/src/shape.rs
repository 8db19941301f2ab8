//! Diagram shapes: finite posets presented by generating arrows.
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Objects plus a transitively closed, antisymmetric set of arrows `i -> j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiagramShape {
    names: Vec<String>,
    generators: Vec<(usize, usize)>,
    closure: BTreeSet<(usize, usize)>,
}

impl DiagramShape {
    pub fn new(names: Vec<String>, arrows: Vec<(usize, usize)>) -> Result<Self> {
        let n = names.len();
        if n == 0 {
            return Err(Error::InvalidShape("no objects".into()));
        }
        let mut seen = BTreeSet::new();
        for &(i, j) in &arrows {
            if i >= n || j >= n {
                return Err(Error::InvalidShape(format!("arrow ({i},{j}) out of range")));
            }
            if i == j {
                return Err(Error::InvalidShape(format!("loop at object {i}")));
            }
            if !seen.insert((i, j)) {
                return Err(Error::InvalidShape(format!("duplicate arrow ({i},{j})")));
            }
        }
        let mut reach = vec![vec![false; n]; n];
        for &(i, j) in &arrows {
            reach[i][j] = true;
        }
        for k in 0..n {
            for i in 0..n {
                if reach[i][k] {
                    for j in 0..n {
                        if reach[k][j] {
                            reach[i][j] = true;
                        }
                    }
                }
            }
        }
        let mut closure = BTreeSet::new();
        for (i, row) in reach.iter().enumerate() {
            if row[i] {
                return Err(Error::InvalidShape(format!("cycle through object {i}")));
            }
            for (j, &r) in row.iter().enumerate() {
                if r {
                    closure.insert((i, j));
                }
            }
        }
        Ok(Self { names, generators: arrows, closure })
    }

    pub fn singleton() -> Self {
        Self::new(vec!["0".into()], vec![]).unwrap()
    }

    /// `0 -> 1 -> ... -> n-1`.
    pub fn chain(n: usize) -> Self {
        let names = (0..n).map(|i| i.to_string()).collect();
        Self::new(names, (1..n).map(|i| (i - 1, i)).collect()).unwrap()
    }

    /// `O1 <- O12 -> O2`, with `O12` as object 0.
    pub fn two_fan() -> Self {
        Self::full(2)
    }

    /// The full shape on `n` variables: objects are non-empty subsets of
    /// `{1..n}` ordered by decreasing size, with an arrow `I -> J` iff `J` is
    /// a proper subset of `I`.
    pub fn full(n: usize) -> Self {
        let masks = full_masks(n);
        let names = masks.iter().map(|&m| mask_name(m, n)).collect();
        let mut arrows = Vec::new();
        for (a, &i) in masks.iter().enumerate() {
            for (b, &j) in masks.iter().enumerate() {
                if i != j && i & j == j {
                    arrows.push((a, b));
                }
            }
        }
        Self::new(names, arrows).unwrap()
    }

    /// `O1 <- O12 -> O2 <- O23 -> O3`.
    pub fn two_tents() -> Self {
        let names = ["12", "23", "1", "2", "3"].iter().map(|s| s.to_string()).collect();
        Self::new(names, vec![(0, 2), (0, 3), (1, 3), (1, 4)]).unwrap()
    }

    /// Three pair objects over three singletons, each pair mapping onto its
    /// two members.
    pub fn fence() -> Self {
        let names = ["12", "13", "23", "1", "2", "3"].iter().map(|s| s.to_string()).collect();
        Self::new(names, vec![(0, 3), (0, 4), (1, 3), (1, 5), (2, 4), (2, 5)]).unwrap()
    }

    /// `O1 -> O0 <- O2`.
    pub fn co_fan() -> Self {
        let names = ["1", "2", "0"].iter().map(|s| s.to_string()).collect();
        Self::new(names, vec![(0, 2), (1, 2)]).unwrap()
    }

    /// `O12 -> O1, O2 -> O0`.
    pub fn diamond() -> Self {
        let names = ["12", "1", "2", "0"].iter().map(|s| s.to_string()).collect();
        Self::new(names, vec![(0, 1), (0, 2), (1, 3), (2, 3)]).unwrap()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn generators(&self) -> &[(usize, usize)] {
        &self.generators
    }

    /// All arrows of the transitive closure, in lexicographic order.
    pub fn arrows(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.closure.iter().copied()
    }

    pub fn has_arrow(&self, i: usize, j: usize) -> bool {
        self.closure.contains(&(i, j))
    }

    /// `i == j` or there is an arrow `i -> j`.
    pub fn leq(&self, i: usize, j: usize) -> bool {
        i == j || self.has_arrow(i, j)
    }

    pub fn sources(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&j| !self.closure.iter().any(|&(_, t)| t == j))
            .collect()
    }

    pub fn sinks(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| !self.closure.iter().any(|&(s, _)| s == i))
            .collect()
    }

    pub fn is_complete(&self) -> bool {
        self.sources().len() == 1
    }

    /// The unique initial object of a complete shape.
    pub fn initial(&self) -> Option<usize> {
        let s = self.sources();
        (s.len() == 1).then(|| s[0])
    }

    /// Checks that an object map `self -> target` sends arrows to arrows or
    /// identities.
    pub fn check_functor(&self, target: &DiagramShape, object_map: &[usize]) -> Result<()> {
        if object_map.len() != self.len() || object_map.iter().any(|&o| o >= target.len()) {
            return Err(Error::InvalidShape("object map has wrong size".into()));
        }
        for (i, j) in self.arrows() {
            if !target.leq(object_map[i], object_map[j]) {
                return Err(Error::InvalidShape(format!(
                    "arrow {}->{} has no image",
                    self.names[i], self.names[j]
                )));
            }
        }
        Ok(())
    }
}

/// Non-empty subsets of `n` variables as bit masks, largest first.
pub fn full_masks(n: usize) -> Vec<u32> {
    let mut m: Vec<u32> = (1..(1u32 << n)).collect();
    m.sort_by_key(|&x| (core::cmp::Reverse(x.count_ones()), x));
    m
}

pub fn mask_name(mask: u32, n: usize) -> String {
    let parts: Vec<String> = (0..n).filter(|b| mask >> b & 1 == 1).map(|b| (b + 1).to_string()).collect();
    if n > 9 {
        parts.join(",")
    } else {
        parts.concat()
    }
}
