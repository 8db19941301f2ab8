//! Seeded generators of random distributions and configurations.
use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::Configuration;
use crate::rational::Rational;
use crate::shape::DiagramShape;
use crate::space::{Label, ProbabilitySpace};

pub type SampleRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SampleRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random fully supported distribution with integer masses in `1..=max_mass`.
pub fn distribution<R: Rng>(rng: &mut R, n: usize, max_mass: u32) -> Vec<Rational> {
    let masses: Vec<i64> = (0..n).map(|_| rng.gen_range(1..=max_mass) as i64).collect();
    normalize(&masses)
}

/// Random distribution where each atom is zero with probability `p_zero`,
/// keeping at least one positive atom.
pub fn sparse_distribution<R: Rng>(rng: &mut R, n: usize, max_mass: u32, p_zero: f64) -> Vec<Rational> {
    let mut masses: Vec<i64> = (0..n)
        .map(|_| if rng.gen_bool(p_zero) { 0 } else { rng.gen_range(1..=max_mass) as i64 })
        .collect();
    if masses.iter().all(|&m| m == 0) {
        let k = rng.gen_range(0..n);
        masses[k] = 1;
    }
    normalize(&masses)
}

pub fn normalize(masses: &[i64]) -> Vec<Rational> {
    let total: i64 = masses.iter().sum();
    masses.iter().map(|&m| Rational::new(m.into(), total.into())).collect()
}

pub fn space<R: Rng>(rng: &mut R, n: usize, max_mass: u32) -> ProbabilitySpace {
    ProbabilitySpace::from_weights(distribution(rng, n, max_mass)).unwrap()
}

/// Random float point in the interior of the simplex.
pub fn simplex_point<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| -libm::log(rng.gen_range(1e-12..1.0f64))).collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

/// Random configuration of a complete shape with `n0` initial atoms. Each
/// object receives a random coarsening of the join of its predecessors'
/// partitions, so all squares commute by construction.
pub fn complete_configuration<R: Rng>(rng: &mut R, shape: &DiagramShape, n0: usize, max_mass: u32) -> Configuration {
    let o = shape.initial().expect("complete shape");
    let n = shape.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| shape.arrows().filter(|&(_, t)| t == i).count());
    let mut block: Vec<Option<Vec<usize>>> = vec![None; n];
    block[o] = Some((0..n0).collect());
    for &j in &order {
        if j == o {
            continue;
        }
        let mut parent: Vec<usize> = (0..n0).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            p[x] = r;
            r
        }
        for (i, t) in shape.arrows() {
            if t != j {
                continue;
            }
            let b = block[i].as_ref().expect("predecessors come first");
            let mut first: BTreeMap<usize, usize> = BTreeMap::new();
            for a in 0..n0 {
                if let Some(&f) = first.get(&b[a]) {
                    let (ra, rf) = (find(&mut parent, a), find(&mut parent, f));
                    parent[ra] = rf;
                } else {
                    first.insert(b[a], a);
                }
            }
        }
        let roots: Vec<usize> = (0..n0).map(|a| find(&mut parent, a)).collect();
        let mut distinct: Vec<usize> = roots.clone();
        distinct.sort();
        distinct.dedup();
        let k = distinct.len();
        let target = rng.gen_range(1..=k);
        let relabel: BTreeMap<usize, usize> =
            distinct.iter().enumerate().map(|(idx, &r)| (r, if idx < target { idx } else { rng.gen_range(0..target) })).collect();
        let raw: Vec<usize> = roots.iter().map(|r| relabel[r]).collect();
        let mut compact: BTreeMap<usize, usize> = BTreeMap::new();
        let b: Vec<usize> = raw
            .iter()
            .map(|&v| {
                let len = compact.len();
                *compact.entry(v).or_insert(len)
            })
            .collect();
        block[j] = Some(b);
    }
    let p0 = distribution(rng, n0, max_mass);
    let blocks: Vec<Vec<usize>> = block.into_iter().map(|b| b.unwrap()).collect();
    from_blocks(shape, &blocks, &p0)
}

/// The configuration whose object `i` is the partition `blocks[i]` of the
/// initial atoms, with distribution `p0`.
pub fn from_blocks(shape: &DiagramShape, blocks: &[Vec<usize>], p0: &[Rational]) -> Configuration {
    let spaces: Vec<ProbabilitySpace> = blocks
        .iter()
        .map(|b| {
            let k = b.iter().max().map_or(0, |m| m + 1);
            let mut w = vec![Rational::from_integer(0.into()); k];
            for (a, &blk) in b.iter().enumerate() {
                w[blk] += &p0[a];
            }
            ProbabilitySpace::new((0..k as i64).map(Label::Int).collect(), w).unwrap()
        })
        .collect();
    let mut maps = BTreeMap::new();
    for (i, j) in shape.arrows() {
        let k = spaces[i].len();
        let mut m = vec![0; k];
        for a in 0..blocks[i].len() {
            m[blocks[i][a]] = blocks[j][a];
        }
        maps.insert((i, j), m);
    }
    Configuration::new(shape.clone(), spaces, maps).expect("partitions refine along arrows")
}

/// A random diamond whose top object is the join of the two middle ones,
/// so that the two middle reductions form a minimal fan.
pub fn minimal_diamond<R: Rng>(rng: &mut R, n0: usize, max_mass: u32) -> Configuration {
    let shape = DiagramShape::diamond();
    let d = complete_configuration(rng, &shape, n0, max_mass);
    let proj = d.projections().expect("complete");
    let mut seen = BTreeMap::new();
    let top: Vec<usize> = (0..n0)
        .map(|a| {
            let len = seen.len();
            *seen.entry((proj[1][a], proj[2][a])).or_insert(len)
        })
        .collect();
    let blocks = vec![top, proj[1].clone(), proj[2].clone(), proj[3].clone()];
    from_blocks(&shape, &blocks, d.initial_space().expect("complete").weights())
}

/// Random two-fan `X <- Z -> Y` with `Z` a random sub-support of `X x Y`.
pub fn two_fan<R: Rng>(rng: &mut R, nx: usize, ny: usize, max_mass: u32) -> Configuration {
    loop {
        let w = sparse_distribution(rng, nx * ny, max_mass, 0.4);
        let rows_ok = (0..nx).all(|r| (0..ny).any(|c| w[r * ny + c] > Rational::from_integer(0.into())));
        let cols_ok = (0..ny).all(|c| (0..nx).any(|r| w[r * ny + c] > Rational::from_integer(0.into())));
        if rows_ok && cols_ok {
            return joint_fan(nx, ny, &w);
        }
    }
}

/// The full two-variable configuration of a dense joint on `nx x ny`.
pub fn joint_fan(nx: usize, ny: usize, w: &[Rational]) -> Configuration {
    let joint = ProbabilitySpace::from_weights(w.to_vec()).unwrap();
    let vars = vec![
        (0..nx * ny).map(|k| Label::Int((k / ny) as i64)).collect(),
        (0..nx * ny).map(|k| Label::Int((k % ny) as i64)).collect(),
    ];
    Configuration::generated(&joint, &vars).unwrap().trim()
}
