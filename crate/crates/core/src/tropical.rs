//! Mixtures, defects of configuration sequences, and stationary Markov
//! chains viewed as sequences of trajectory configurations.
use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::cell::RefCell;

use num_traits::{One, Signed, Zero};

use crate::config::Configuration;
use crate::error::{Error, Result};
use crate::iso::{find_isomorphism, SearchBudget};
use crate::math;
use crate::metric::{aikd_interval, entropy_gap, intrinsic_k, DistanceInterval, Mode};
use crate::rational::{self, Rational};
use crate::space::{entropy_exact, Label, ProbabilitySpace};

/// `Mix_theta X_theta`: atoms `(theta, x)` with weight `p(theta) p_theta(x)`.
#[derive(Debug, Clone)]
pub struct Mixture {
    pub theta: ProbabilitySpace,
    pub family: Vec<Configuration>,
    pub assembled: Configuration,
    /// For each object, the parameter of every atom of the assembled space.
    pub parameter: Vec<Vec<usize>>,
}

pub fn mixture(theta: &ProbabilitySpace, family: &[Configuration]) -> Result<Mixture> {
    if family.len() != theta.len() || family.is_empty() {
        return Err(Error::Invalid("one configuration per parameter atom required".into()));
    }
    let shape = family[0].shape().clone();
    if family.iter().any(|c| c.shape() != &shape) {
        return Err(Error::ShapeMismatch("mixture components differ in shape".into()));
    }
    let n_obj = shape.len();
    let mut spaces = Vec::with_capacity(n_obj);
    let mut offsets: Vec<Vec<usize>> = vec![Vec::new(); n_obj];
    let mut parameter = vec![Vec::new(); n_obj];
    for i in 0..n_obj {
        let mut atoms = Vec::new();
        let mut weights = Vec::new();
        for (t, c) in family.iter().enumerate() {
            offsets[i].push(atoms.len());
            let s = c.space(i);
            for (a, w) in s.atoms().iter().zip(s.weights()) {
                atoms.push(Label::pair(theta.atoms()[t].clone(), a.clone()));
                weights.push(&theta.weights()[t] * w);
                parameter[i].push(t);
            }
        }
        spaces.push(ProbabilitySpace::new(atoms, weights)?);
    }
    let mut maps = BTreeMap::new();
    for (i, j) in shape.arrows() {
        let mut m = Vec::new();
        for (t, c) in family.iter().enumerate() {
            m.extend(c.map(i, j).unwrap().iter().map(|&b| offsets[j][t] + b));
        }
        maps.insert((i, j), m);
    }
    let assembled = Configuration::new(shape, spaces, maps)?;
    Ok(Mixture { theta: theta.clone(), family: family.to_vec(), assembled, parameter })
}

impl Mixture {
    /// The assembled configuration conditioned on parameter `t`, trimmed.
    pub fn slice(&self, t: usize) -> Result<Configuration> {
        let w = &self.theta.weights()[t];
        if w.is_zero() {
            return Err(Error::ZeroWeight(self.theta.atoms()[t].to_string()));
        }
        let o = self.assembled.initial()?;
        let p0: Vec<Rational> = self
            .assembled
            .space(o)
            .weights()
            .iter()
            .zip(&self.parameter[o])
            .map(|(p, &s)| if s == t { p / w } else { Rational::zero() })
            .collect();
        Ok(self.assembled.pushdown(&p0)?.trim())
    }

    /// `|ent_*(mix) - sum_t p(t) ent_*(X_t) - ent(Theta) 1|_1`.
    pub fn entropy_residual(&self) -> f64 {
        let h_theta = self.theta.entropy();
        let mix = self.assembled.entropy_vector();
        mix.values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let avg: f64 = self
                    .family
                    .iter()
                    .zip(self.theta.weights())
                    .map(|(c, w)| rational::to_f64(w) * c.space(i).entropy())
                    .sum();
                (v - avg - h_theta).abs()
            })
            .sum()
    }
}

/// `X (+)_{Lambda_{1/n}} point`: the configuration `X` with weight `1/n`,
/// a point otherwise.
pub fn radical(x: &Configuration, n: usize) -> Result<Configuration> {
    let lambda = ProbabilitySpace::binary(&rational::rat(1, n as i64))?;
    let point = Configuration::constant(x.shape().clone(), ProbabilitySpace::point());
    // Atom order of the binary space is (empty box, filled box).
    Ok(mixture(&lambda, &[point, x.clone()])?.assembled)
}

#[derive(Debug, Clone)]
pub struct MixtureBound {
    pub name: &'static str,
    pub rhs: f64,
    pub estimate: DistanceInterval,
    /// The left-hand side lower estimate does not exceed the right-hand side.
    pub consistent: bool,
    /// The upper estimate already certifies the inequality.
    pub certified: bool,
}

/// Evaluates the four mixture distance estimates for `X`, `Y` and `n`,
/// comparing each right-hand side with an interval for the asymptotic
/// distance on the left.
pub fn mixture_bound_audit(x: &Configuration, y: &Configuration, n: usize, n_max: usize) -> Result<Vec<MixtureBound>> {
    if n < 2 {
        return Err(Error::Invalid("n must be at least 2".into()));
    }
    let h = math::binary_entropy(1.0 / n as f64);
    let rx = radical(x, n)?;
    let ry = radical(y, n)?;
    let xy = aikd_interval(x, y, n_max)?;
    let cases: [(&'static str, Configuration, Configuration, f64); 4] = [
        ("power-radical", x.clone(), radical(&x.power(n), n)?, h),
        ("radical-power", x.clone(), rx.power(n), n as f64 * h),
        ("radical-tensor", radical(&x.tensor(y)?, n)?, rx.tensor(&ry)?, 3.0 * h),
        ("radical-distance", rx.clone(), ry.clone(), xy.upper / n as f64),
    ];
    cases
        .into_iter()
        .map(|(name, a, b, rhs)| {
            let estimate = aikd_interval(&a, &b, n_max)?;
            Ok(MixtureBound {
                name,
                rhs,
                consistent: estimate.lower <= rhs + 1e-9,
                certified: estimate.upper <= rhs + 1e-9,
                estimate,
            })
        })
        .collect()
}

/// A sequence of configurations generated on demand and cached.
pub struct ConfigSequence {
    generator: Box<dyn Fn(usize) -> Result<Configuration>>,
    cache: RefCell<BTreeMap<usize, Configuration>>,
}

impl ConfigSequence {
    pub fn new(generator: impl Fn(usize) -> Result<Configuration> + 'static) -> Self {
        Self { generator: Box::new(generator), cache: RefCell::new(BTreeMap::new()) }
    }

    /// `n -> X^n`, with the one-point configuration at zero.
    pub fn linear(x: Configuration) -> Self {
        Self::new(move |n| {
            Ok(if n == 0 { Configuration::constant(x.shape().clone(), ProbabilitySpace::point()) } else { x.power(n) })
        })
    }

    pub fn get(&self, n: usize) -> Result<Configuration> {
        if let Some(c) = self.cache.borrow().get(&n) {
            return Ok(c.clone());
        }
        let c = (self.generator)(n)?;
        self.cache.borrow_mut().insert(n, c.clone());
        Ok(c)
    }
}

/// Interval for `sup_{i+j <= horizon} delta(g(i+j), g(i) (x) g(j))` with
/// the intrinsic distance: entropy gap below, best coupling found above,
/// and zero when the two configurations are isomorphic.
pub fn defect(seq: &ConfigSequence, horizon: usize) -> Result<(f64, f64)> {
    let (mut lo, mut hi) = (0.0f64, 0.0f64);
    for i in 1..horizon {
        for j in 1..=horizon - i {
            let a = seq.get(i + j)?;
            let b = seq.get(i)?.tensor(&seq.get(j)?)?;
            let iso = find_isomorphism(&a, &b, &SearchBudget::default()).map(|m| m.is_some()).unwrap_or(false);
            if iso {
                continue;
            }
            lo = lo.max(entropy_gap(&a, &b));
            hi = hi.max(intrinsic_k(&a, &b, Mode::Auto)?.0);
        }
    }
    Ok((lo, hi))
}

/// Finite-state stationary Markov chain with exact rational data.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovChain {
    pub states: Vec<Label>,
    pub transition: Vec<Vec<Rational>>,
    pub initial: Vec<Rational>,
}

/// Largest number of trajectories enumerated.
pub const TRAJECTORY_CAP: usize = 1_000_000;

impl MarkovChain {
    /// Validates the transition matrix. Without an initial row the unique
    /// stationary distribution is computed; a given row must be stationary.
    pub fn new(states: Vec<Label>, transition: Vec<Vec<Rational>>, initial: Option<Vec<Rational>>) -> Result<Self> {
        let s = states.len();
        if s == 0 || transition.len() != s || transition.iter().any(|r| r.len() != s) {
            return Err(Error::Invalid("transition matrix must be square over the states".into()));
        }
        for (i, r) in transition.iter().enumerate() {
            if r.iter().any(|v| v.is_negative()) || r.iter().sum::<Rational>() != Rational::one() {
                return Err(Error::Invalid(format!("row {i} is not a distribution")));
            }
        }
        let initial = match initial {
            Some(mu) => {
                if mu.len() != s || mu.iter().sum::<Rational>() != Rational::one() || mu.iter().any(|v| v.is_negative()) {
                    return Err(Error::Invalid("initial row is not a distribution".into()));
                }
                let chain = Self { states: states.clone(), transition: transition.clone(), initial: mu.clone() };
                if chain.step(&mu) != mu {
                    return Err(Error::Invalid("initial row is not stationary".into()));
                }
                mu
            }
            None => stationary(&transition)?,
        };
        Ok(Self { states, transition, initial })
    }

    pub fn iid(states: Vec<Label>, p: Vec<Rational>) -> Result<Self> {
        let rows = vec![p.clone(); states.len()];
        Self::new(states, rows, Some(p))
    }

    /// Symmetric two-state chain flipping with probability `q`.
    pub fn flip(q: Rational) -> Result<Self> {
        let stay = Rational::one() - &q;
        Self::new(
            vec![Label::Int(0), Label::Int(1)],
            vec![vec![stay.clone(), q.clone()], vec![q, stay]],
            None,
        )
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    fn step(&self, mu: &[Rational]) -> Vec<Rational> {
        let s = self.len();
        (0..s).map(|j| (0..s).map(|i| &mu[i] * &self.transition[i][j]).sum()).collect()
    }

    /// Positive-probability trajectories of length `n` with their weights.
    pub fn paths(&self, n: usize) -> Result<Vec<(Vec<usize>, Rational)>> {
        let mut cur: Vec<(Vec<usize>, Rational)> = Vec::new();
        if n == 0 {
            return Ok(vec![(Vec::new(), Rational::one())]);
        }
        for (x, w) in self.initial.iter().enumerate() {
            if w.is_positive() {
                cur.push((vec![x], w.clone()));
            }
        }
        for _ in 1..n {
            let mut next = Vec::new();
            for (p, w) in &cur {
                let last = *p.last().unwrap();
                for (x, t) in self.transition[last].iter().enumerate() {
                    if t.is_positive() {
                        let mut q = p.clone();
                        q.push(x);
                        next.push((q, w * t));
                    }
                }
            }
            if next.len() > TRAJECTORY_CAP {
                return Err(Error::Budget { what: "trajectories", size: next.len() as u128, cap: TRAJECTORY_CAP as u128 });
            }
            cur = next;
        }
        Ok(cur)
    }

    /// The full configuration of the variables `X_k, ..., X_l`. By
    /// stationarity only the length `l - k + 1` matters.
    pub fn trajectory(&self, k: i64, l: i64) -> Result<Configuration> {
        if l < k {
            return Err(Error::Invalid("empty window".into()));
        }
        let n = (l - k + 1) as usize;
        let paths = self.paths(n)?;
        let atoms = paths
            .iter()
            .map(|(p, _)| Label::Tuple(p.iter().map(|&x| self.states[x].clone()).collect()))
            .collect();
        let joint = ProbabilitySpace::new(atoms, paths.iter().map(|(_, w)| w.clone()).collect())?;
        let vars: Vec<Vec<Label>> =
            (0..n).map(|t| paths.iter().map(|(p, _)| self.states[p[t]].clone()).collect()).collect();
        Configuration::generated(&joint, &vars)
    }

    pub fn block_entropy(&self, n: usize) -> Result<f64> {
        let w: Vec<Rational> = self.paths(n)?.into_iter().map(|(_, w)| w).collect();
        Ok(entropy_exact(&w))
    }

    /// `I(X_{-m+1..0}; X_{1..n})` as a sum of `p ln(p / (p_past p_future))`,
    /// exactly zero when the blocks are independent.
    pub fn past_future_mi(&self, m: usize, n: usize) -> Result<f64> {
        if m == 0 || n == 0 {
            return Ok(0.0);
        }
        let past: BTreeMap<Vec<usize>, Rational> = self.paths(m)?.into_iter().collect();
        let future: BTreeMap<Vec<usize>, Rational> = self.paths(n)?.into_iter().collect();
        let mut total = 0.0;
        for (p, w) in self.paths(m + n)? {
            let ratio = &w / (&past[&p[..m]] * &future[&p[m..]]);
            if !ratio.is_one() {
                total += rational::to_f64(&w) * rational::ln(&ratio);
            }
        }
        Ok(total.max(0.0))
    }

    /// `H(X_1..X_h) - H(X_1..X_{h-1})`, computed as a conditional entropy.
    pub fn entropy_rate(&self, horizon: usize) -> Result<f64> {
        if horizon < 2 {
            return Err(Error::Invalid("horizon must be at least 2".into()));
        }
        let prefix: BTreeMap<Vec<usize>, Rational> = self.paths(horizon - 1)?.into_iter().collect();
        let mut total = 0.0;
        for (p, w) in self.paths(horizon)? {
            let ratio = &prefix[&p[..horizon - 1]] / &w;
            if !ratio.is_one() {
                total += rational::to_f64(&w) * rational::ln(&ratio);
            }
        }
        Ok(total.max(0.0))
    }

    /// `sum_x mu(x) H(P(x, .))`.
    pub fn entropy_rate_formula(&self) -> f64 {
        self.initial
            .iter()
            .zip(&self.transition)
            .map(|(m, row)| rational::to_f64(m) * entropy_exact(row))
            .sum()
    }

    pub fn mi_table(&self, window: usize) -> Result<Vec<Vec<f64>>> {
        (1..=window).map(|m| (1..=window).map(|n| self.past_future_mi(m, n)).collect()).collect()
    }

    pub fn verdict(&self, horizon: usize) -> Result<Verdict> {
        let mut sup = 0.0f64;
        for m in 1..horizon {
            for n in 1..=horizon - m {
                sup = sup.max(self.past_future_mi(m, n)?);
            }
        }
        Ok(Verdict { sup, ceiling: entropy_exact(&self.initial), certified: true })
    }

    /// Defect of the trajectory sequence under the asymptotic distance,
    /// which equals the supremum of the past-future information.
    pub fn defect(&self, horizon: usize) -> Result<f64> {
        Ok(self.verdict(horizon)?.sup)
    }
}

/// Boundedness of the past-future information over a window.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub sup: f64,
    /// `H(X_0)`, which bounds the information for every window.
    pub ceiling: f64,
    /// Finite-state stationary chains are always bounded.
    pub certified: bool,
}

/// Unique solution of `mu P = mu`, `sum mu = 1`, by exact elimination.
pub fn stationary(p: &[Vec<Rational>]) -> Result<Vec<Rational>> {
    let s = p.len();
    // Rows: (P^T - I) and the normalization.
    let mut a: Vec<Vec<Rational>> = (0..s)
        .map(|j| {
            let mut r: Vec<Rational> = (0..s).map(|i| p[i][j].clone()).collect();
            r[j] -= Rational::one();
            r.push(Rational::zero());
            r
        })
        .collect();
    a.push({
        let mut r = vec![Rational::one(); s];
        r.push(Rational::one());
        r
    });
    let mut row = 0;
    let mut pivots = Vec::new();
    for col in 0..s {
        let Some(r) = (row..a.len()).find(|&r| !a[r][col].is_zero()) else { continue };
        a.swap(row, r);
        let piv = a[row][col].clone();
        for v in a[row].iter_mut() {
            *v /= &piv;
        }
        for r in 0..a.len() {
            if r != row && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for c in 0..=s {
                    let d = &f * &a[row][c];
                    a[r][c] -= d;
                }
            }
        }
        pivots.push(col);
        row += 1;
    }
    if pivots.len() < s {
        return Err(Error::Invalid("stationary distribution is not unique".into()));
    }
    if a[row..].iter().any(|r| !r[s].is_zero()) {
        return Err(Error::Infeasible("no stationary distribution".into()));
    }
    Ok((0..s).map(|i| a[i][s].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::iso::is_isomorphic;
    use crate::rational::rat;

    #[test]
    fn mixtures_of_uniforms() {
        let u2 = Configuration::single(ProbabilitySpace::uniform(2));
        let half = ProbabilitySpace::binary(&rat(1, 2)).unwrap();
        let m = mixture(&half, &[u2.clone(), u2.clone()]).unwrap();
        assert!(is_isomorphic(&m.assembled, &Configuration::single(ProbabilitySpace::uniform(4))).unwrap());
        assert!(m.entropy_residual() < 1e-12);
        assert!(is_isomorphic(&m.slice(1).unwrap(), &u2).unwrap());
        let pt = Configuration::single(ProbabilitySpace::point());
        let l = ProbabilitySpace::binary(&rat(1, 3)).unwrap();
        let m = mixture(&l, &[pt.clone(), pt]).unwrap();
        assert_eq!(m.assembled.space(0).weights(), l.weights());
    }

    #[test]
    fn flip_chain() {
        let c = MarkovChain::flip(rat(1, 4)).unwrap();
        assert_eq!(c.initial, vec![rat(1, 2), rat(1, 2)]);
        assert!((c.past_future_mi(1, 1).unwrap() - 0.130812).abs() < 1e-6);
        assert!((c.entropy_rate(5).unwrap() - 0.562335).abs() < 1e-6);
        assert!((c.entropy_rate(3).unwrap() - c.entropy_rate_formula()).abs() < 1e-12);
        assert!((c.block_entropy(2).unwrap() - 1.255482).abs() < 1e-6);
        let t = c.trajectory(1, 3).unwrap();
        assert_eq!(t.shape().len(), 7);
    }

    #[test]
    fn degenerate_chains() {
        let iid = MarkovChain::iid(vec![Label::Int(0), Label::Int(1)], vec![rat(1, 3), rat(2, 3)]).unwrap();
        assert_eq!(iid.past_future_mi(2, 3).unwrap(), 0.0);
        assert_eq!(iid.defect(5).unwrap(), 0.0);
        let swap = vec![vec![rat(0, 1), rat(1, 1)], vec![rat(1, 1), rat(0, 1)]];
        let cyc = MarkovChain::new(vec![Label::Int(0), Label::Int(1)], swap, None).unwrap();
        assert_eq!(cyc.entropy_rate(4).unwrap(), 0.0);
        assert!((cyc.verdict(4).unwrap().sup - 2f64.ln()).abs() < 1e-12);
        assert!((cyc.block_entropy(5).unwrap() - 2f64.ln()).abs() < 1e-12);
        let id = vec![vec![rat(1, 1), rat(0, 1)], vec![rat(0, 1), rat(1, 1)]];
        assert!(MarkovChain::new(vec![Label::Int(0), Label::Int(1)], id, None).is_err());
    }

    #[test]
    fn linear_sequence_has_no_defect() {
        let x = Configuration::single(ProbabilitySpace::from_weights(vec![rat(1, 3), rat(2, 3)]).unwrap());
        assert_eq!(defect(&ConfigSequence::linear(x), 4).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn radical_of_point() {
        let pt = Configuration::single(ProbabilitySpace::point());
        let audit = mixture_bound_audit(&pt, &pt, 2, 1).unwrap();
        // A point mixed with a point is the binary space itself.
        assert!((audit[0].estimate.lower - 2f64.ln()).abs() < 1e-12);
        assert!(audit.iter().all(|b| b.consistent));
        assert!(audit[3].estimate.upper.abs() < 1e-12);
        assert!((audit[0].rhs - 2f64.ln()).abs() < 1e-12);
        assert!((audit[2].rhs - 3.0 * 2f64.ln()).abs() < 1e-12);
    }
}
