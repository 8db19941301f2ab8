//! Lagging two-fans, distance bounds between types, and certified
//! homogeneous approximations of complete configurations.
use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::{ToPrimitive, Zero};

use crate::config::Configuration;
use crate::error::{Error, Result};
use crate::fan::TwoFan;
use crate::math;
use crate::rational::{self, Rational};
use crate::space::ProbabilitySpace;
use crate::types::{self, MATERIALIZATION_CAP};

fn ln_set(size: usize) -> f64 {
    math::ln(size.max(1) as f64)
}

/// Initial counts `n q(z)` of a complete configuration, failing off the lattice.
fn initial_counts(z: &Configuration, n: u64) -> Result<Vec<u64>> {
    types::lattice_counts(z.initial_space()?.weights(), n)
}

/// A minimal fan `Lambda_alpha <- Z -> X`, described by a joint distribution
/// on `{box, filled box} x X_0` (row 0 is the empty box, row 1 the filled one).
#[derive(Debug, Clone)]
pub struct FlaggedConfiguration {
    pub x: Configuration,
    pub joint: Vec<Rational>,
}

impl FlaggedConfiguration {
    pub fn new(x: Configuration, joint: Vec<Rational>) -> Result<Self> {
        let m = x.initial_space()?.len();
        if joint.len() != 2 * m {
            return Err(Error::Invalid("joint must have two rows".into()));
        }
        let marginal: Vec<Rational> = (0..m).map(|a| &joint[a] + &joint[m + a]).collect();
        let x = x.pushdown(&marginal)?;
        Ok(Self { x, joint })
    }

    pub fn alpha(&self) -> Rational {
        let m = self.joint.len() / 2;
        self.joint[m..].iter().sum()
    }

    /// The fan itself, with the constant binary configuration on the left.
    pub fn fan(&self) -> Result<TwoFan> {
        let lambda = Configuration::constant(self.x.shape().clone(), ProbabilitySpace::binary(&self.alpha())?);
        TwoFan::from_initial_coupling(&lambda, &self.x, &self.joint)
    }
}

/// The lagging fan `T^((1-a)n)(X|box) <- T^(n) Z -> T^(n) X`. The left leg
/// deletes the coordinates flagged with the filled box and projects the
/// rest to `X`; the right leg projects every coordinate.
pub fn lagging_fan(f: &FlaggedConfiguration, n: u64) -> Result<TwoFan> {
    let fan = f.fan()?;
    let z = &fan.vertex;
    let zc = initial_counts(z, n)?;
    let (tz, z_atoms) = types::type_from_counts(z, &zc, MATERIALIZATION_CAP)?;
    let o = z.initial()?;
    let x = &f.x;
    let mut xc = vec![0u64; x.space(o).len()];
    let mut boxc = vec![0u64; x.space(o).len()];
    for (a, &c) in zc.iter().enumerate() {
        xc[fan.to_right[o][a]] += c;
        if fan.to_left[o][a] == 0 {
            boxc[fan.to_right[o][a]] += c;
        }
    }
    let (tx, x_atoms) = types::type_from_counts(x, &xc, MATERIALIZATION_CAP)?;
    let kept: u64 = boxc.iter().sum();
    let x_box = if kept > 0 { x.pushdown(&types::from_counts(&boxc))? } else { x.clone() };
    let (tl, l_atoms) = types::type_from_counts(&x_box, &boxc, MATERIALIZATION_CAP)?;
    let n_obj = x.shape().len();
    let mut to_left = Vec::with_capacity(n_obj);
    let mut to_right = Vec::with_capacity(n_obj);
    for i in 0..n_obj {
        let li: BTreeMap<&Vec<usize>, usize> = l_atoms[i].iter().enumerate().map(|(k, s)| (s, k)).collect();
        let ri: BTreeMap<&Vec<usize>, usize> = x_atoms[i].iter().enumerate().map(|(k, s)| (s, k)).collect();
        let mut left_leg = Vec::with_capacity(z_atoms[i].len());
        let mut right_leg = Vec::with_capacity(z_atoms[i].len());
        for seq in &z_atoms[i] {
            let image: Vec<usize> = seq.iter().map(|&a| fan.to_right[i][a]).collect();
            let erased: Vec<usize> =
                seq.iter().filter(|&&a| fan.to_left[i][a] == 0).map(|&a| fan.to_right[i][a]).collect();
            left_leg.push(li[&erased]);
            right_leg.push(ri[&image]);
        }
        to_left.push(left_leg);
        to_right.push(right_leg);
    }
    TwoFan::new(tl, tz, tx, to_left, to_right)
}

/// `n [[G]] (2 h(a) + a ln|X_0|) + 2 [[G]] |X_0| ln(n+1)`.
pub fn lagging_bound(f: &FlaggedConfiguration, n: u64) -> Result<f64> {
    let fan = f.fan()?;
    initial_counts(&fan.vertex, n)?;
    let alpha = rational::to_f64(&f.alpha());
    let g = f.x.shape().len() as f64;
    let x0 = f.x.initial_space()?.len();
    let nf = n as f64;
    Ok(nf * g * (2.0 * math::binary_entropy(alpha) + alpha * ln_set(x0)) + 2.0 * g * x0 as f64 * math::ln(nf + 1.0))
}

/// `2n [[G]] (a ln|S_0| + 2 h(a)) + 4 [[G]] |S_0| ln(n+1)` with
/// `a = |p_0 - q_0|_1 / 2`, for lattice points `p_0, q_0`.
pub fn type_distance_bound(s: &Configuration, p0: &[Rational], q0: &[Rational], n: u64) -> Result<f64> {
    types::lattice_counts(p0, n)?;
    types::lattice_counts(q0, n)?;
    let s0 = s.initial_space()?.len();
    if p0.len() != s0 || q0.len() != s0 {
        return Err(Error::AtomMismatch);
    }
    let tv: Rational = p0.iter().zip(q0).map(|(a, b)| num_traits::Signed::abs(&(a - b))).sum();
    let alpha = rational::to_f64(&tv) / 2.0;
    Ok(type_distance_formula(s.shape().len(), s0, alpha, n))
}

fn type_distance_formula(g: usize, s0: usize, alpha: f64, n: u64) -> f64 {
    let (g, nf) = (g as f64, n as f64);
    2.0 * nf * g * (alpha * ln_set(s0) + 2.0 * math::binary_entropy(alpha)) + 4.0 * g * s0 as f64 * math::ln(nf + 1.0)
}

/// The per-term decomposition of a normalized certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct AepLedger {
    pub slicing: f64,
    pub off_ball: f64,
    pub in_ball: f64,
}

impl AepLedger {
    pub fn total(&self) -> f64 {
        self.slicing + self.off_ball + self.in_ball
    }
}

#[derive(Debug, Clone)]
pub struct AepCertificate {
    pub n: u64,
    /// Initial counts of the snapped distribution `p_n` on the support.
    pub counts: Vec<u64>,
    /// The type `T_{p_n} X` when it is small enough to materialize.
    pub approximant: Option<Configuration>,
    /// Entropies of the approximant, always available.
    pub approximant_entropies: Vec<f64>,
    /// Bound on `k(X^n, H_n) / n`.
    pub upper_bound: f64,
    pub budget_bound: f64,
    pub ledger: AepLedger,
}

/// `C(s, g) = g [12 s + 2 ln s + 2 (s + 2 sqrt(s+1)) (ln s + 3)]`.
///
/// For `n >= 3` every ledger term is bounded by a multiple of
/// `r = sqrt(ln^3 n / n)`: use `ln(n+1) <= 2 ln n`, `1/n <= r`,
/// `ln n / n <= r`, `a_n <= K sqrt(ln n / n)` with `K = s + 2 sqrt(s+1)`,
/// and `h(a) <= a ln(e/a) <= 1.5 K r`. The slicing, off-ball and in-ball
/// terms then contribute `4gs`, `2g ln s` and `8gs + 2gK(ln s + 3)`.
pub fn aep_constant(s: usize, g: usize) -> f64 {
    let (s, g) = (s as f64, g as f64);
    let k = s + 2.0 * math::sqrt(s + 1.0);
    g * (12.0 * s + 2.0 * math::ln(s) + 2.0 * k * (math::ln(s) + 3.0))
}

pub fn budget_bound(s: usize, g: usize, n: u64) -> f64 {
    let nf = n as f64;
    let l = math::ln(nf);
    aep_constant(s, g) * math::sqrt(l * l * l / nf)
}

fn ledger(s: usize, g: usize, n: u64) -> AepLedger {
    let (sf, gf, nf) = (s as f64, g as f64, n as f64);
    let ln_n1 = math::ln(nf + 1.0);
    let ln_s = ln_set(s);
    let slicing = 2.0 * gf * sf * ln_n1 / nf;
    let eps = (sf + 1.0) * ln_n1 / nf;
    let off_ball = 2.0 * gf * ln_s * math::exp(-nf * eps + sf * ln_n1).min(1.0);
    let alpha_n = (sf / nf + math::sqrt(2.0 * eps)).min(1.0);
    let peak = math::sqrt(sf) / (math::sqrt(sf) + 1.0);
    let a = alpha_n.min(peak);
    let in_ball = (type_distance_formula(g, s, a, n) / nf).min(2.0 * gf * ln_s);
    AepLedger { slicing, off_ball, in_ball }
}

/// Snaps the initial distribution to the denominator-`n` lattice and
/// certifies the type over it as an approximation of `X^n`.
pub fn homogeneous_approximation(x: &Configuration, n: u64) -> Result<AepCertificate> {
    if !x.is_complete() {
        return Err(Error::NotComplete);
    }
    if n == 0 {
        return Err(Error::Invalid("n must be positive".into()));
    }
    let base = x.trim();
    let p = base.initial_space()?.weights().to_vec();
    let s = p.len();
    let g = x.shape().len();
    let counts = types::snap_to_lattice(&p, n);
    let approximant_entropies = types::type_entropies(&base, &types::from_counts(&counts), n)?;
    let card = rational::multinomial(&counts);
    let approximant = if card.to_usize().is_some_and(|c| c <= MATERIALIZATION_CAP) {
        Some(types::type_from_counts(&base.pushdown(&types::from_counts(&counts))?, &counts, MATERIALIZATION_CAP)?.0)
    } else {
        None
    };
    let ledger = ledger(s, g, n);
    Ok(AepCertificate {
        n,
        counts,
        approximant,
        approximant_entropies,
        upper_bound: ledger.total(),
        budget_bound: budget_bound(s, g, n),
        ledger,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub n: u64,
    pub upper_bound: f64,
    pub budget_bound: f64,
    pub ratio: f64,
}

pub fn aep_rate_table(x: &Configuration, ns: &[u64]) -> Result<Vec<RateRow>> {
    ns.iter()
        .map(|&n| {
            let c = homogeneous_approximation(x, n)?;
            Ok(RateRow { n, upper_bound: c.upper_bound, budget_bound: c.budget_bound, ratio: c.upper_bound / c.budget_bound })
        })
        .collect()
}

/// `|p_n - p|_1` for the snapped counts.
pub fn rounding_error(p: &[Rational], counts: &[u64]) -> Rational {
    let q = types::from_counts(counts);
    let mut d = Rational::zero();
    for (a, b) in p.iter().zip(&q) {
        d += num_traits::Signed::abs(&(a - b));
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{intrinsic_k, Mode};
    use crate::rational::rat;

    fn binary_single() -> Configuration {
        Configuration::single(ProbabilitySpace::from_weights(vec![rat(1, 2), rat(1, 2)]).unwrap())
    }

    #[test]
    fn lagging_examples() {
        let x = binary_single();
        // Z has atoms (box, 0), (box, 1), (filled, 0): alpha = 1/4.
        let f = FlaggedConfiguration::new(x, vec![rat(1, 4), rat(1, 2), rat(1, 4), rat(0, 1)]).unwrap();
        let b = lagging_bound(&f, 4).unwrap();
        let expect = 4.0 * (2.0 * 0.562335 + 0.25 * 2f64.ln()) + 4.0 * 5f64.ln();
        assert!((b - expect).abs() < 1e-5);
        let fan = lagging_fan(&f, 4).unwrap();
        assert!(fan.kd() <= b);
        assert_eq!(fan.left.space(0).len(), 3);
    }

    #[test]
    fn lagging_degenerate() {
        let x = binary_single();
        let f = FlaggedConfiguration::new(x.clone(), vec![rat(1, 2), rat(1, 2), rat(0, 1), rat(0, 1)]).unwrap();
        let fan = lagging_fan(&f, 4).unwrap();
        assert_eq!(fan.to_left, fan.to_right);
        assert!((lagging_bound(&f, 4).unwrap() - 4.0 * 5f64.ln()).abs() < 1e-12);
        let f = FlaggedConfiguration::new(x, vec![rat(0, 1), rat(0, 1), rat(1, 2), rat(1, 2)]).unwrap();
        let fan = lagging_fan(&f, 2).unwrap();
        assert_eq!(fan.left.space(0).len(), 1);
    }

    #[test]
    fn lagging_half_is_equivariant() {
        let x = binary_single();
        let f = FlaggedConfiguration::new(x, vec![rat(1, 4), rat(1, 4), rat(1, 4), rat(1, 4)]).unwrap();
        let fan = lagging_fan(&f, 4).unwrap();
        let mut fibres = vec![0usize; fan.left.space(0).len()];
        for &a in &fan.to_left[0] {
            fibres[a] += 1;
        }
        assert!(fibres.iter().all(|&c| c == fibres[0]));
    }

    #[test]
    fn type_distance_examples() {
        let s = binary_single();
        let p = [rat(1, 2), rat(1, 2)];
        let q = [rat(3, 4), rat(1, 4)];
        let same = type_distance_bound(&s, &p, &p, 4).unwrap();
        assert!((same - 8.0 * 5f64.ln()).abs() < 1e-12);
        let b = type_distance_bound(&s, &p, &q, 4).unwrap();
        let tp = types::type_of_configuration(&s, &p, 4, 100).unwrap();
        let tq = types::type_of_configuration(&s, &q, 4, 100).unwrap();
        let (k, _) = intrinsic_k(&tp, &tq, Mode::Exact).unwrap();
        assert!(k <= b);
    }

    #[test]
    fn certificates() {
        let u = Configuration::single(ProbabilitySpace::uniform(3));
        let c = homogeneous_approximation(&u, 6).unwrap();
        assert_eq!(c.counts, vec![2, 2, 2]);
        assert_eq!(c.ledger.total(), c.upper_bound);
        let l = Configuration::single(ProbabilitySpace::binary(&rat(1, 3)).unwrap());
        let c = homogeneous_approximation(&l, 3).unwrap();
        assert_eq!(types::from_counts(&c.counts), vec![rat(2, 3), rat(1, 3)]);
        assert!(c.upper_bound.is_finite());
        for n in [3u64, 4, 8, 16, 32, 1000] {
            let c = homogeneous_approximation(&crate::sample::joint_fan(2, 2, &[rat(1, 2), rat(1, 6), rat(1, 6), rat(1, 6)]), n)
                .unwrap();
            assert!(c.upper_bound <= c.budget_bound, "n={n}");
        }
    }
}
