//! Method of types: denominator-`n` lattices, type spaces, their masses,
//! and types of complete configurations.
use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::string::ToString;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::config::Configuration;
use crate::error::{Error, Result};
use crate::fan::TwoFan;
use crate::math;
use crate::rational::{self, Rational};
use crate::space::{Label, ProbabilitySpace};

/// Default limit on materialized atoms.
pub const MATERIALIZATION_CAP: usize = 1_000_000;

/// Empirical distribution of a sequence over `0..k`.
pub fn empirical(seq: &[usize], k: usize) -> Result<Vec<Rational>> {
    if seq.is_empty() {
        return Err(Error::Invalid("empirical distribution of an empty sequence".into()));
    }
    let counts = counts_of_sequence(seq, k)?;
    Ok(from_counts(&counts))
}

fn counts_of_sequence(seq: &[usize], k: usize) -> Result<Vec<u64>> {
    let mut counts = vec![0u64; k];
    for &a in seq {
        *counts.get_mut(a).ok_or_else(|| Error::Invalid("symbol outside the alphabet".into()))? += 1;
    }
    Ok(counts)
}

pub fn from_counts(counts: &[u64]) -> Vec<Rational> {
    let n: u64 = counts.iter().sum();
    counts.iter().map(|&c| rational::rat(c as i64, n as i64)).collect()
}

/// Counts `n pi(a)`, or `OffLattice` when some weight is not a multiple of `1/n`.
pub fn lattice_counts(pi: &[Rational], n: u64) -> Result<Vec<u64>> {
    let mut out = Vec::with_capacity(pi.len());
    let mut total = 0u64;
    for w in pi {
        let c = w * Rational::from_integer(n.into());
        if !c.is_integer() || c.is_negative() {
            return Err(Error::OffLattice(n));
        }
        let c = c.to_integer().to_u64().ok_or(Error::OffLattice(n))?;
        total += c;
        out.push(c);
    }
    if total != n {
        return Err(Error::OffLattice(n));
    }
    Ok(out)
}

/// Rounds a distribution to the denominator-`n` lattice: floors, then the
/// remaining units go to the largest remainders, ties to the lower index.
/// The result satisfies `|p_n - p|_1 <= |S| / n`.
pub fn snap_to_lattice(p: &[Rational], n: u64) -> Vec<u64> {
    let nn = Rational::from_integer(n.into());
    let scaled: Vec<Rational> = p.iter().map(|w| w * &nn).collect();
    let mut counts: Vec<u64> = scaled.iter().map(|s| s.floor().to_integer().to_u64().unwrap_or(0)).collect();
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| (&scaled[b] - scaled[b].floor()).cmp(&(&scaled[a] - scaled[a].floor())).then(a.cmp(&b)));
    let deficit = n - counts.iter().sum::<u64>();
    for &a in order.iter().take(deficit as usize) {
        counts[a] += 1;
    }
    counts
}

/// Number of denominator-`n` points on the simplex over `size` symbols.
pub fn lattice_count(size: usize, n: u64) -> BigInt {
    if size == 0 {
        return BigInt::zero();
    }
    rational::binomial(n + size as u64 - 1, size as u64 - 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RationalLattice {
    pub size: usize,
    pub n: u64,
    /// Each point as its vector of counts, in reverse lexicographic order.
    pub points: Vec<Vec<u64>>,
}

impl RationalLattice {
    pub fn distributions(&self) -> Vec<Vec<Rational>> {
        self.points.iter().map(|c| from_counts(c)).collect()
    }

    pub fn position(&self, counts: &[u64]) -> Option<usize> {
        self.points.iter().position(|c| c == counts)
    }
}

pub fn lattice(size: usize, n: u64, cap: usize) -> Result<RationalLattice> {
    if n == 0 || size == 0 {
        return Err(Error::Invalid("lattice needs n >= 1 and a non-empty set".into()));
    }
    let count = lattice_count(size, n);
    if count > BigInt::from(cap) {
        return Err(Error::Budget { what: "lattice points", size: count.to_u128().unwrap_or(u128::MAX), cap: cap as u128 });
    }
    let mut points = Vec::new();
    let mut cur = vec![0u64; size];
    fill(&mut cur, 0, n, &mut points);
    Ok(RationalLattice { size, n, points })
}

fn fill(cur: &mut Vec<u64>, i: usize, left: u64, out: &mut Vec<Vec<u64>>) {
    if i + 1 == cur.len() {
        cur[i] = left;
        out.push(cur.clone());
        return;
    }
    for c in (0..=left).rev() {
        cur[i] = c;
        fill(cur, i + 1, left - c, out);
    }
}

/// The uniform space on length-`n` sequences with a fixed empirical distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeSpace {
    pub counts: Vec<u64>,
    pub n: u64,
    pub cardinality: BigInt,
    /// Atoms are tuples of symbol indices, present only below the cap.
    pub space: Option<ProbabilitySpace>,
}

impl TypeSpace {
    pub fn entropy(&self) -> f64 {
        rational::ln_bigint(&self.cardinality)
    }

    pub fn pi(&self) -> Vec<Rational> {
        from_counts(&self.counts)
    }

    /// `(e^{n h(pi) - |S| ln(n+1)}, e^{n h(pi)})` in log form.
    pub fn log_bounds(&self) -> (f64, f64) {
        let h = math::entropy(&self.pi().iter().map(rational::to_f64).collect::<Vec<_>>());
        let n = self.n as f64;
        (n * h - self.counts.len() as f64 * math::ln(n + 1.0), n * h)
    }
}

pub fn type_space(pi: &[Rational], n: u64, cap: usize) -> Result<TypeSpace> {
    let counts = lattice_counts(pi, n)?;
    let cardinality = rational::multinomial(&counts);
    let space = if cardinality <= BigInt::from(cap) {
        let seqs = sequences(&counts);
        let atoms = seqs.iter().map(|s| Label::Tuple(s.iter().map(|&a| Label::Int(a as i64)).collect())).collect();
        let w = Rational::new(BigInt::one(), cardinality.clone());
        Some(ProbabilitySpace::new(atoms, vec![w; seqs.len()])?)
    } else {
        None
    };
    Ok(TypeSpace { counts, n, cardinality, space })
}

/// All sequences with the given symbol counts, in lexicographic order.
pub fn sequences(counts: &[u64]) -> Vec<Vec<usize>> {
    let n: u64 = counts.iter().sum();
    let mut out = Vec::new();
    let mut left = counts.to_vec();
    let mut cur = Vec::with_capacity(n as usize);
    fn rec(left: &mut [u64], cur: &mut Vec<usize>, n: usize, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for a in 0..left.len() {
            if left[a] > 0 {
                left[a] -= 1;
                cur.push(a);
                rec(left, cur, n, out);
                cur.pop();
                left[a] += 1;
            }
        }
    }
    rec(&mut left, &mut cur, n as usize, &mut out);
    out
}

/// `p^{(x)n}(T_pi) = |T_pi| prod_a p(a)^{n pi(a)}`, exactly.
pub fn type_mass(p: &[Rational], pi: &[Rational], n: u64) -> Result<Rational> {
    if p.len() != pi.len() {
        return Err(Error::AtomMismatch);
    }
    let counts = lattice_counts(pi, n)?;
    let mut m = Rational::from_integer(rational::multinomial(&counts));
    for (w, &c) in p.iter().zip(&counts) {
        m *= num_traits::pow(w.clone(), c as usize);
    }
    Ok(m)
}

/// `D(pi || p)` in nats; infinite when `pi` charges a `p`-null atom.
pub fn divergence(pi: &[Rational], p: &[Rational]) -> f64 {
    let mut d = 0.0;
    for (a, b) in pi.iter().zip(p) {
        if a.is_zero() {
            continue;
        }
        if b.is_zero() {
            return f64::INFINITY;
        }
        d += rational::to_f64(a) * (rational::ln(a) - rational::ln(b));
    }
    d.max(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SanovReport {
    pub tail: Rational,
    pub bound: f64,
}

/// Exact mass of the types at divergence at least `r` from `p`, and the
/// bound `e^{-n r + |S| ln(n+1)}`. Boundary types count towards the tail.
pub fn sanov_report(p: &[Rational], r: f64, n: u64) -> Result<SanovReport> {
    let lat = lattice(p.len(), n, MATERIALIZATION_CAP)?;
    let mut tail = Rational::zero();
    for pi in lat.distributions() {
        if divergence(&pi, p) >= r - 1e-12 {
            tail += type_mass(p, &pi, n)?;
        }
    }
    let bound = math::exp(-(n as f64) * r + p.len() as f64 * math::ln(n as f64 + 1.0));
    Ok(SanovReport { tail, bound })
}

/// Entropies of the object-wise types of a complete configuration, without
/// materializing anything.
pub fn type_entropies(x: &Configuration, pi0: &[Rational], n: u64) -> Result<Vec<f64>> {
    let counts = lattice_counts(pi0, n)?;
    let proj = x.projections()?;
    Ok(proj
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut c = vec![0u64; x.space(i).len()];
            for (a, &k) in counts.iter().enumerate() {
                c[p[a]] += k;
            }
            rational::ln_bigint(&rational::multinomial(&c))
        })
        .collect())
}

/// The configuration of types `T_pi X`: every object carries the uniform
/// space of sequences whose empirical distribution is the pushforward of
/// `pi0`, and reductions act coordinate-wise.
pub fn type_of_configuration(x: &Configuration, pi0: &[Rational], n: u64, cap: usize) -> Result<Configuration> {
    if !x.is_complete() {
        return Err(Error::NotComplete);
    }
    if pi0.len() != x.initial_space()?.len() {
        return Err(Error::AtomMismatch);
    }
    let counts = lattice_counts(pi0, n)?;
    Ok(type_from_counts(x, &counts, cap)?.0)
}

/// Type of a complete configuration over initial symbol counts, together
/// with every object's atoms as index sequences. Zero total count gives the
/// one-point configuration of empty sequences.
pub fn type_from_counts(
    x: &Configuration,
    counts: &[u64],
    cap: usize,
) -> Result<(Configuration, Vec<Vec<Vec<usize>>>)> {
    let card = rational::multinomial(counts);
    if card > BigInt::from(cap) {
        return Err(Error::Budget { what: "type atoms", size: card.to_u128().unwrap_or(u128::MAX), cap: cap as u128 });
    }
    let seqs = sequences(counts);
    let proj = x.projections()?;
    let n_obj = x.shape().len();
    let mut index: Vec<BTreeMap<Vec<usize>, usize>> = vec![BTreeMap::new(); n_obj];
    let mut atoms: Vec<Vec<Vec<usize>>> = vec![Vec::new(); n_obj];
    for s in &seqs {
        for i in 0..n_obj {
            let img: Vec<usize> = s.iter().map(|&a| proj[i][a]).collect();
            if !index[i].contains_key(&img) {
                index[i].insert(img.clone(), atoms[i].len());
                atoms[i].push(img);
            }
        }
    }
    let spaces = (0..n_obj)
        .map(|i| {
            let labels = atoms[i]
                .iter()
                .map(|s| Label::Tuple(s.iter().map(|&a| x.space(i).atoms()[a].clone()).collect()))
                .collect();
            let w = rational::rat(1, atoms[i].len() as i64);
            ProbabilitySpace::new(labels, vec![w; atoms[i].len()])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut maps = BTreeMap::new();
    for (&(i, j), f) in x.maps() {
        let m = atoms[i].iter().map(|s| index[j][&s.iter().map(|&a| f[a]).collect::<Vec<_>>()]).collect();
        maps.insert((i, j), m);
    }
    Ok((Configuration::new(x.shape().clone(), spaces, maps)?, atoms))
}

/// Index of every initial atom in the trimmed initial support, used to
/// translate `pi0` into coordinates of `x.power(n)`.
fn support_counts(x: &Configuration, pi0: &[Rational], n: u64) -> Result<(Vec<u64>, usize)> {
    let counts = lattice_counts(pi0, n)?;
    let sup = x.initial_space()?.support();
    let mut out = Vec::with_capacity(sup.len());
    for (a, &c) in counts.iter().enumerate() {
        if c > 0 && !sup.contains(&a) {
            return Err(Error::ZeroWeight(x.initial_space()?.atoms()[a].to_string()));
        }
    }
    for &a in &sup {
        out.push(counts[a]);
    }
    Ok((out, sup.len()))
}

fn digits(mut idx: usize, k: usize, n: usize) -> Vec<usize> {
    let mut d = Vec::with_capacity(n);
    for _ in 0..n {
        d.push(idx % k);
        idx /= k;
    }
    d
}

fn undigits(d: &[usize], k: usize) -> usize {
    d.iter().rev().fold(0, |acc, &a| acc * k + a)
}

/// The power `X^{(x)n}` conditioned on the event that the initial empirical
/// distribution equals `pi0`.
pub fn type_by_conditioning(x: &Configuration, pi0: &[Rational], n: u64) -> Result<Configuration> {
    let (counts, k) = support_counts(x, pi0, n)?;
    let xn = x.power(n as usize);
    let init = xn.initial_space()?;
    let mut p0 = vec![Rational::zero(); init.len()];
    let mut total = Rational::zero();
    for (idx, w) in init.weights().iter().enumerate() {
        if counts_of_sequence(&digits(idx, k, n as usize), k)? == counts {
            p0[idx] = w.clone();
            total += w;
        }
    }
    if total.is_zero() {
        return Err(Error::ZeroWeight("type".into()));
    }
    let p0: Vec<Rational> = p0.into_iter().map(|w| w / &total).collect();
    Ok(xn.pushdown(&p0)?.trim())
}

/// The power `X^{(x)n}` conditioned on the `S_n`-orbit of one sequence,
/// generated by adjacent transpositions of coordinates.
pub fn type_by_orbit(x: &Configuration, pi0: &[Rational], n: u64) -> Result<Configuration> {
    let (counts, k) = support_counts(x, pi0, n)?;
    let xn = x.power(n as usize);
    let init = xn.initial_space()?;
    let rep: Vec<usize> = counts.iter().enumerate().flat_map(|(a, &c)| core::iter::repeat_n(a, c as usize)).collect();
    let mut in_orbit = vec![false; init.len()];
    let mut stack = vec![undigits(&rep, k)];
    in_orbit[stack[0]] = true;
    while let Some(idx) = stack.pop() {
        let d = digits(idx, k, n as usize);
        for t in 0..(n as usize).saturating_sub(1) {
            let mut e = d.clone();
            e.swap(t, t + 1);
            let j = undigits(&e, k);
            if !in_orbit[j] {
                in_orbit[j] = true;
                stack.push(j);
            }
        }
    }
    let total: Rational = (0..init.len()).filter(|&i| in_orbit[i]).map(|i| init.weights()[i].clone()).sum();
    let p0: Vec<Rational> =
        (0..init.len()).map(|i| if in_orbit[i] { &init.weights()[i] / &total } else { Rational::zero() }).collect();
    Ok(xn.pushdown(&p0)?.trim())
}

/// The empirical two-fan `X^{(x)n} <- . -> (Delta^(n), tau_n)`: the vertex is
/// the initial power coupled with its empirical distribution. The right
/// terminal is constant over the shape and holds only lattice points of
/// positive mass.
pub fn empirical_two_fan(x: &Configuration, n: u64) -> Result<(TwoFan, RationalLattice)> {
    if !x.is_complete() {
        return Err(Error::NotComplete);
    }
    let xn = x.power(n as usize);
    let base = x.trim();
    let p = base.initial_space()?.weights().to_vec();
    let k = p.len();
    let lat = lattice(k, n, MATERIALIZATION_CAP)?;
    let masses: Vec<Rational> =
        lat.distributions().iter().map(|pi| type_mass(&p, pi, n)).collect::<Result<_>>()?;
    let atoms = lat
        .points
        .iter()
        .map(|c| Label::Tuple(c.iter().map(|&v| Label::Int(v as i64)).collect()))
        .collect();
    let delta = ProbabilitySpace::new(atoms, masses)?;
    let right = Configuration::constant(x.shape().clone(), delta);
    let init = xn.initial_space()?;
    let m = lat.points.len();
    let mut joint = vec![Rational::zero(); init.len() * m];
    for (idx, w) in init.weights().iter().enumerate() {
        let c = counts_of_sequence(&digits(idx, k, n as usize), k)?;
        let pos = lat.position(&c).expect("every sequence has a type");
        joint[idx * m + pos] = w.clone();
    }
    Ok((TwoFan::from_initial_coupling(&xn, &right, &joint)?, lat))
}

/// Left terminal of the empirical fan conditioned on the lattice point `pos`.
pub fn condition_empirical_fan(fan: &TwoFan, pos: usize) -> Result<Configuration> {
    let o = fan.vertex.initial()?;
    let z = fan.vertex.space(o);
    let total: Rational =
        (0..z.len()).filter(|&a| fan.to_right[o][a] == pos).map(|a| z.weights()[a].clone()).sum();
    if total.is_zero() {
        return Err(Error::ZeroWeight("lattice point".into()));
    }
    let mut p0 = vec![Rational::zero(); fan.left.space(o).len()];
    for a in 0..z.len() {
        if fan.to_right[o][a] == pos {
            p0[fan.to_left[o][a]] += &z.weights()[a] / &total;
        }
    }
    Ok(fan.left.pushdown(&p0)?.trim())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::iso::{is_homogeneous, is_isomorphic};
    use crate::rational::rat;
    use crate::sample;
    use crate::shape::DiagramShape;
    use proptest::prelude::*;

    #[test]
    fn empirical_examples() {
        assert_eq!(empirical(&[0, 0, 1], 2).unwrap(), vec![rat(2, 3), rat(1, 3)]);
        assert_eq!(empirical(&[1, 1], 2).unwrap(), vec![rat(0, 1), rat(1, 1)]);
        assert!(empirical(&[], 2).is_err());
    }

    #[test]
    fn lattice_sizes() {
        assert_eq!(lattice(2, 4, 100).unwrap().points.len(), 5);
        assert_eq!(lattice(3, 2, 100).unwrap().points.len(), 6);
        assert!(lattice(3, 100, 10).is_err());
    }

    #[test]
    fn type_space_examples() {
        let t = type_space(&[rat(1, 2), rat(1, 2)], 4, 100).unwrap();
        assert_eq!(t.cardinality, BigInt::from(6));
        assert!((t.entropy() - 6f64.ln()).abs() < 1e-12);
        let t = type_space(&[rat(3, 4), rat(1, 4)], 4, 100).unwrap();
        assert_eq!(t.cardinality, BigInt::from(4));
        let (lo, hi) = t.log_bounds();
        assert!(4f64.ln() <= hi && 4f64.ln() >= lo);
        assert!((hi.exp() - 9.48).abs() < 0.01);
        assert!(matches!(type_space(&[rat(1, 3), rat(2, 3)], 4, 100), Err(Error::OffLattice(4))));
    }

    #[test]
    fn type_mass_examples() {
        let coin = [rat(1, 2), rat(1, 2)];
        assert_eq!(type_mass(&coin, &coin, 2).unwrap(), rat(1, 2));
        assert_eq!(type_mass(&coin, &[rat(1, 1), rat(0, 1)], 3).unwrap(), rat(1, 8));
    }

    #[test]
    fn sanov_examples() {
        let coin = [rat(1, 2), rat(1, 2)];
        let r = sanov_report(&coin, 2f64.ln(), 4).unwrap();
        assert_eq!(r.tail, rat(1, 8));
        assert!((r.bound - 25.0 / 16.0).abs() < 1e-12);
        assert_eq!(sanov_report(&coin, f64::INFINITY, 4).unwrap().tail, rat(0, 1));
    }

    #[test]
    fn snapping() {
        let p = [rat(1, 3), rat(1, 3), rat(1, 3)];
        assert_eq!(snap_to_lattice(&p, 4), vec![2, 1, 1]);
        assert_eq!(snap_to_lattice(&[rat(1, 2), rat(1, 2)], 4), vec![2, 2]);
    }

    fn binary_two_fan() -> Configuration {
        sample::joint_fan(2, 2, &[rat(1, 2), rat(1, 4), rat(1, 8), rat(1, 8)])
    }

    #[test]
    fn three_definitions_agree() {
        let x = binary_two_fan();
        for n in 1..=4u64 {
            let lat = lattice(4, n, 1000).unwrap();
            for pi in lat.distributions() {
                let t = type_of_configuration(&x, &pi, n, 1000).unwrap();
                assert!(is_homogeneous(&t).unwrap().0);
                let c = type_by_conditioning(&x, &pi, n).unwrap();
                let o = type_by_orbit(&x, &pi, n).unwrap();
                assert!(is_isomorphic(&t, &c).unwrap(), "n={n}");
                assert!(is_isomorphic(&t, &o).unwrap(), "n={n}");
            }
        }
    }

    #[test]
    fn chain_type() {
        let s = ProbabilitySpace::uniform(2);
        let shape = DiagramShape::chain(2);
        let mut maps = BTreeMap::new();
        maps.insert((0, 1), vec![0, 0]);
        let x = Configuration::new(shape, vec![s, ProbabilitySpace::point()], maps).unwrap();
        let t = type_of_configuration(&x, &[rat(1, 2), rat(1, 2)], 4, 100).unwrap();
        assert_eq!(t.space(0).len(), 6);
        assert_eq!(t.space(1).len(), 1);
    }

    #[test]
    fn empirical_fan_coin() {
        let coin = Configuration::single(ProbabilitySpace::uniform(2));
        let (fan, _) = empirical_two_fan(&coin, 2).unwrap();
        assert_eq!(fan.right.space(0).weights(), &[rat(1, 4), rat(1, 2), rat(1, 4)]);
        let t = condition_empirical_fan(&fan, 1).unwrap();
        assert_eq!(t.space(0).cardinality(), 2);
    }

    proptest! {
        #[test]
        fn type_masses_sum_to_one(ws in prop::collection::vec(1i64..9, 1..4), n in 1u64..7) {
            let total: i64 = ws.iter().sum();
            let p: Vec<Rational> = ws.iter().map(|&w| rat(w, total)).collect();
            let lat = lattice(p.len(), n, 10_000).unwrap();
            prop_assert_eq!(lat.points.len() as u64, lattice_count(p.len(), n).to_u64().unwrap());
            let s: Rational = lat.distributions().iter().map(|pi| type_mass(&p, pi, n).unwrap()).sum();
            prop_assert_eq!(s, rat(1, 1));
        }

        #[test]
        fn snapped_is_close(ws in prop::collection::vec(0i64..9, 1..5), n in 1u64..20) {
            let total: i64 = ws.iter().sum::<i64>() + 1;
            let mut ws = ws;
            ws[0] += 1;
            let p: Vec<Rational> = ws.iter().map(|&w| rat(w, total)).collect();
            let c = snap_to_lattice(&p, n);
            prop_assert_eq!(c.iter().sum::<u64>(), n);
            let d: Rational = from_counts(&c).iter().zip(&p).map(|(a, b)| (a - b).abs()).sum();
            prop_assert!(d <= rat(p.len() as i64, n as i64));
        }
    }
}
