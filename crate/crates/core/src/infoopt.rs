//! Extensions of full configurations, entropic point clouds and
//! Information-Optimization problems over them.
//!
//! Variables are numbered from zero with the base variables first; the
//! entropy of a subset of variables is stored at position `mask - 1`.
use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::{One, Zero};

use crate::config::Configuration;
use crate::error::{Error, Result};
use crate::fan::TwoFan;
use crate::lp::{LinearProgram, LpOutcome};
use crate::math;
use crate::metric::run_starts;
use crate::rational::{self, Rational};
use crate::sample;
use crate::shape::{full_masks, DiagramShape};
use crate::space::{entropy_exact, push_rational, Label, ProbabilitySpace};

/// Tolerance on entropy equalities and inequalities.
pub const CONSTRAINT_TOL: f64 = 1e-9;

/// Number of variables of a full shape, if the shape is full.
pub fn full_arity(shape: &DiagramShape) -> Option<usize> {
    let n = shape.len();
    let k = (n + 1).trailing_zeros() as usize;
    ((1usize << k) == n + 1 && *shape == DiagramShape::full(k)).then_some(k)
}

fn object_of_mask(k: usize) -> BTreeMap<u32, usize> {
    full_masks(k).into_iter().enumerate().map(|(i, m)| (m, i)).collect()
}

/// Class of every base initial atom under each base subset, indexed by mask;
/// the empty subset puts everything in one class.
fn base_classes(base: &Configuration, k: usize) -> Result<(Vec<Vec<usize>>, Vec<usize>)> {
    let proj = base.projections()?;
    let obj = object_of_mask(k);
    let n0 = base.initial_space()?.len();
    let mut classes = vec![vec![0usize; n0]];
    let mut sizes = vec![1usize];
    for m in 1..(1u32 << k) {
        let o = obj[&m];
        classes.push(proj[o].clone());
        sizes.push(base.space(o).len());
    }
    Ok((classes, sizes))
}

/// A point of `E_l`, with the entropy of subset `mask` at `values[mask - 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropicPoint {
    pub values: Vec<f64>,
    pub kernel_id: usize,
}

impl EntropicPoint {
    pub fn get(&self, mask: u32) -> f64 {
        if mask == 0 {
            0.0
        } else {
            self.values[mask as usize - 1]
        }
    }

    pub fn l(&self) -> usize {
        (self.values.len() + 1).trailing_zeros() as usize
    }

    pub fn l1(&self, other: &Self) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).sum()
    }
}

/// Largest violation of the elemental Shannon inequalities; non-positive
/// when all hold.
pub fn shannon_violation(p: &EntropicPoint) -> f64 {
    let l = p.l();
    let full = (1u32 << l) - 1;
    let mut worst = f64::NEG_INFINITY;
    for i in 0..l {
        let rest = full & !(1 << i);
        worst = worst.max(p.get(rest) - p.get(full));
    }
    for i in 0..l {
        for j in i + 1..l {
            let others = full & !(1 << i) & !(1 << j);
            let mut kk = others;
            loop {
                let (a, b) = (kk | 1 << i, kk | 1 << j);
                worst = worst.max(p.get(kk) + p.get(a | b) - p.get(a) - p.get(b));
                if kk == 0 {
                    break;
                }
                kk = (kk - 1) & others;
            }
        }
    }
    worst
}

/// An `l`-extension of a full configuration on `k` variables, given by a
/// kernel from base initial atoms to values of the new variables. New
/// variable values are packed mixed radix, the first new variable least
/// significant.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtensionKernel {
    pub base: Configuration,
    pub new_sizes: Vec<usize>,
    pub kernel: Vec<Vec<Rational>>,
}

impl ExtensionKernel {
    pub fn new(base: Configuration, new_sizes: Vec<usize>, kernel: Vec<Vec<Rational>>) -> Result<Self> {
        full_arity(base.shape()).ok_or_else(|| Error::InvalidShape("extensions need a full base".into()))?;
        let n0 = base.initial_space()?.len();
        let card: usize = new_sizes.iter().product();
        if kernel.len() != n0 || kernel.iter().any(|r| r.len() != card) {
            return Err(Error::Invalid("kernel has wrong shape".into()));
        }
        for r in &kernel {
            if r.iter().any(|v| v < &Rational::zero()) || r.iter().sum::<Rational>() != Rational::one() {
                return Err(Error::Invalid("kernel row is not a distribution".into()));
            }
        }
        Ok(Self { base, new_sizes, kernel })
    }

    pub fn deterministic(base: Configuration, new_sizes: Vec<usize>, f: &[usize]) -> Result<Self> {
        let card: usize = new_sizes.iter().product();
        let kernel = f
            .iter()
            .map(|&z| {
                let mut r = vec![Rational::zero(); card];
                r[z] = Rational::one();
                r
            })
            .collect();
        Self::new(base, new_sizes, kernel)
    }

    pub fn constant(base: Configuration, new_sizes: Vec<usize>) -> Result<Self> {
        let n0 = base.initial_space()?.len();
        Self::deterministic(base, new_sizes, &vec![0; n0])
    }

    pub fn k(&self) -> usize {
        full_arity(self.base.shape()).unwrap()
    }

    pub fn l(&self) -> usize {
        self.k() + self.new_sizes.len()
    }

    fn card(&self) -> usize {
        self.new_sizes.iter().product()
    }

    fn joint(&self) -> Result<Vec<Rational>> {
        let p = self.base.initial_space()?.weights();
        let card = self.card();
        let mut out = Vec::with_capacity(p.len() * card);
        for (a, w) in p.iter().enumerate() {
            for z in 0..card {
                out.push(w * &self.kernel[a][z]);
            }
        }
        Ok(out)
    }

    fn digits(&self, mut z: usize) -> Vec<usize> {
        self.new_sizes
            .iter()
            .map(|&s| {
                let d = z % s;
                z /= s;
                d
            })
            .collect()
    }

    /// The full configuration on `l` variables. Its initial atoms are indexed
    /// as `x0 * card + z`, zero-weight atoms included.
    pub fn extend(&self) -> Result<Configuration> {
        let k = self.k();
        let obj = object_of_mask(k);
        let proj = self.base.projections()?;
        let init = self.base.initial_space()?;
        let card = self.card();
        let joint_w = self.joint()?;
        let mut atoms = Vec::with_capacity(joint_w.len());
        let mut vars: Vec<Vec<Label>> = vec![Vec::with_capacity(joint_w.len()); self.l()];
        for a in 0..init.len() {
            for z in 0..card {
                atoms.push(Label::pair(init.atoms()[a].clone(), Label::Int(z as i64)));
                for v in 0..k {
                    let o = obj[&(1 << v)];
                    vars[v].push(self.base.space(o).atoms()[proj[o][a]].clone());
                }
                for (t, d) in self.digits(z).into_iter().enumerate() {
                    vars[k + t].push(Label::Int(d as i64));
                }
            }
        }
        let joint = ProbabilitySpace::new(atoms, joint_w)?;
        let y = Configuration::generated(&joint, &vars)?;
        if y.space(0).len() != joint.len() {
            return Err(Error::NotMinimal);
        }
        Ok(y)
    }

    pub fn entropic_point(&self) -> Result<EntropicPoint> {
        let ev = Evaluator::new(&self.base, &self.new_sizes)?;
        let joint = self.joint()?;
        let l = self.l();
        let mut values = Vec::with_capacity((1 << l) - 1);
        for mask in 1..(1u32 << l) {
            let (key, size) = ev.keys(mask);
            values.push(entropy_exact(&push_rational(&joint, &key, size)));
        }
        Ok(EntropicPoint { values, kernel_id: 0 })
    }

    /// Kernel of the tensor product of two extensions of bases on the same
    /// shape; new variables are paired coordinate-wise.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        if self.new_sizes.len() != other.new_sizes.len() {
            return Err(Error::ShapeMismatch("extensions add different numbers of variables".into()));
        }
        let base = self.base.tensor(&other.base)?;
        let sizes: Vec<usize> = self.new_sizes.iter().zip(&other.new_sizes).map(|(a, b)| a * b).collect();
        let card: usize = sizes.iter().product();
        let mut kernel = Vec::with_capacity(self.kernel.len() * other.kernel.len());
        for ra in &self.kernel {
            for rb in &other.kernel {
                let mut row = vec![Rational::zero(); card];
                for (za, wa) in ra.iter().enumerate() {
                    if wa.is_zero() {
                        continue;
                    }
                    let da = self.digits(za);
                    for (zb, wb) in rb.iter().enumerate() {
                        if wb.is_zero() {
                            continue;
                        }
                        let db = other.digits(zb);
                        let mut z = 0;
                        for t in (0..sizes.len()).rev() {
                            z = z * sizes[t] + da[t] * other.new_sizes[t] + db[t];
                        }
                        row[z] += wa * wb;
                    }
                }
                kernel.push(row);
            }
        }
        Self::new(base, sizes, kernel)
    }
}

/// Fast float evaluation of extension entropies.
struct Evaluator {
    p: Vec<f64>,
    k: usize,
    classes: Vec<Vec<usize>>,
    class_sizes: Vec<usize>,
    /// For each subset of new variables, the packed value of every `z`.
    zproj: Vec<Vec<usize>>,
    zsize: Vec<usize>,
    card: usize,
}

impl Evaluator {
    fn new(base: &Configuration, new_sizes: &[usize]) -> Result<Self> {
        let k = full_arity(base.shape()).ok_or_else(|| Error::InvalidShape("extensions need a full base".into()))?;
        let (classes, class_sizes) = base_classes(base, k)?;
        let card: usize = new_sizes.iter().product();
        let t = new_sizes.len();
        let mut zproj = Vec::with_capacity(1 << t);
        let mut zsize = Vec::with_capacity(1 << t);
        for sub in 0..(1u32 << t) {
            let mut size = 1;
            for (v, &s) in new_sizes.iter().enumerate() {
                if sub >> v & 1 == 1 {
                    size *= s;
                }
            }
            let proj = (0..card)
                .map(|mut z| {
                    let (mut out, mut scale) = (0, 1);
                    for (v, &s) in new_sizes.iter().enumerate() {
                        let d = z % s;
                        z /= s;
                        if sub >> v & 1 == 1 {
                            out += d * scale;
                            scale *= s;
                        }
                    }
                    out
                })
                .collect();
            zproj.push(proj);
            zsize.push(size);
        }
        Ok(Self { p: base.initial_space()?.weights_f64(), k, classes, class_sizes, zproj, zsize, card })
    }

    fn split(&self, mask: u32) -> (usize, usize) {
        ((mask & ((1 << self.k) - 1)) as usize, (mask >> self.k) as usize)
    }

    /// Cell of every joint atom `x0 * card + z` for a subset of variables.
    fn keys(&self, mask: u32) -> (Vec<usize>, usize) {
        let (b, nsub) = self.split(mask);
        let w = self.zsize[nsub];
        let mut key = Vec::with_capacity(self.p.len() * self.card);
        for a in 0..self.p.len() {
            for z in 0..self.card {
                key.push(self.classes[b][a] * w + self.zproj[nsub][z]);
            }
        }
        (key, self.class_sizes[b] * w)
    }

    fn cell_size(&self, mask: u32) -> usize {
        let (b, nsub) = self.split(mask);
        self.class_sizes[b] * self.zsize[nsub]
    }

    /// Entropy of a subset under a dense float kernel; fills `cells` with
    /// the pushed masses for gradient use.
    fn entropy(&self, mask: u32, kernel: &[f64], cells: &mut Vec<f64>) -> f64 {
        let (b, nsub) = self.split(mask);
        let w = self.zsize[nsub];
        cells.clear();
        cells.resize(self.class_sizes[b] * w, 0.0);
        for a in 0..self.p.len() {
            let base = self.classes[b][a] * w;
            for z in 0..self.card {
                let m = self.p[a] * kernel[a * self.card + z];
                if m != 0.0 {
                    cells[base + self.zproj[nsub][z]] += m;
                }
            }
        }
        math::entropy(cells)
    }

    fn point(&self, kernel: &[f64], l: usize) -> EntropicPoint {
        let mut cells = Vec::new();
        let values = (1..(1u32 << l)).map(|m| self.entropy(m, kernel, &mut cells)).collect();
        EntropicPoint { values, kernel_id: 0 }
    }
}

/// A linear functional on `E_l` as `(mask, coefficient)` pairs.
pub type LinearForm = Vec<(u32, f64)>;

fn apply(form: &LinearForm, p: &EntropicPoint) -> f64 {
    form.iter().map(|&(m, c)| c * p.get(m)).sum()
}

/// Minimize (or maximize) a linear functional of the extension entropies,
/// subject to homogeneous constraints `form = 0` and `form <= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct IoProblem {
    pub objective: LinearForm,
    pub equalities: Vec<LinearForm>,
    pub inequalities: Vec<LinearForm>,
    pub maximize: bool,
}

impl IoProblem {
    pub fn minimize(objective: LinearForm) -> Self {
        Self { objective, equalities: Vec::new(), inequalities: Vec::new(), maximize: false }
    }

    fn sign(&self) -> f64 {
        if self.maximize {
            -1.0
        } else {
            1.0
        }
    }

    fn masks(&self) -> Vec<u32> {
        let mut m: Vec<u32> = self
            .objective
            .iter()
            .chain(self.equalities.iter().flatten())
            .chain(self.inequalities.iter().flatten())
            .map(|&(m, _)| m)
            .collect();
        m.sort_unstable();
        m.dedup();
        m
    }

    /// Largest constraint violation at a point.
    pub fn violation(&self, p: &EntropicPoint) -> f64 {
        let e = self.equalities.iter().map(|f| apply(f, p).abs());
        let i = self.inequalities.iter().map(|f| apply(f, p).max(0.0));
        e.chain(i).fold(0.0, f64::max)
    }

    pub fn value(&self, p: &EntropicPoint) -> f64 {
        apply(&self.objective, p)
    }

    fn max_mask(&self) -> u32 {
        self.masks().into_iter().max().unwrap_or(0)
    }
}

/// The problem on two base variables `X = 0`, `Y = 1` and a new variable
/// `Z = 2`: maximize `H(X|Z) + H(Y|Z)` subject to `H(XYZ) = H(XY)` and
/// `H(XYZ) + H(Z) = H(XZ) + H(YZ)`.
pub fn intro_problem() -> IoProblem {
    IoProblem {
        objective: vec![(0b101, 1.0), (0b110, 1.0), (0b100, -2.0)],
        equalities: vec![vec![(0b111, 1.0), (0b011, -1.0)], vec![(0b111, 1.0), (0b100, 1.0), (0b101, -1.0), (0b110, -1.0)]],
        inequalities: Vec::new(),
        maximize: true,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IoOptions {
    pub restarts: usize,
    pub seed: u64,
    pub jobs: usize,
    /// Largest number of deterministic kernels to enumerate.
    pub enumeration_cap: u128,
    /// Largest base initial support for enumeration.
    pub enumeration_support: usize,
    pub iterations: usize,
}

impl Default for IoOptions {
    fn default() -> Self {
        Self { restarts: 8, seed: 0, jobs: 1, enumeration_cap: 5_000_000, enumeration_support: 12, iterations: 200 }
    }
}

#[derive(Debug, Clone)]
pub struct IoSolution {
    /// Best value found, in the problem's own direction.
    pub value: f64,
    pub witness: ExtensionKernel,
    pub point: EntropicPoint,
    /// Shannon-relaxation bound on the optimum, on the other side of `value`.
    pub lp_bound: Option<f64>,
    pub enumerated: u128,
    pub method: &'static str,
}

/// Number of set partitions of `n` items into at most `m` blocks.
pub fn partition_count(n: usize, m: usize) -> u128 {
    // Stirling numbers of the second kind, row by row.
    let mut s = vec![0u128; m + 1];
    s[0] = 1;
    for _ in 0..n {
        for j in (1..=m).rev() {
            s[j] = s[j].saturating_mul(j as u128).saturating_add(s[j - 1]);
        }
        s[0] = 0;
    }
    s.iter().fold(0u128, |a, &b| a.saturating_add(b))
}

/// Visits restricted growth strings of length `n` with at most `m` blocks
/// in lexicographic order.
pub fn for_each_partition(n: usize, m: usize, mut f: impl FnMut(&[usize], usize)) {
    fn rec(i: usize, used: usize, m: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize], usize)) {
        if i == cur.len() {
            f(cur, used);
            return;
        }
        for b in 0..=used.min(m - 1) {
            cur[i] = b;
            rec(i + 1, used.max(b + 1), m, cur, f);
        }
    }
    if n == 0 || m == 0 {
        return;
    }
    let mut cur = vec![0; n];
    rec(0, 0, m, &mut cur, &mut f);
}

struct Candidate {
    score: f64,
    kernel: Vec<f64>,
}

fn better(a: &Candidate, b: &Option<Candidate>) -> bool {
    match b {
        None => true,
        Some(b) => {
            a.score < b.score - 1e-12
                || (a.score <= b.score + 1e-12
                    && a.kernel.iter().zip(&b.kernel).find(|(x, y)| x != y).is_some_and(|(x, y)| x > y))
        }
    }
}

/// Upper bound on the infimum (lower bound on a maximum) by search over
/// kernels, with the Shannon-relaxation bound on the other side.
pub fn io_solve(base: &Configuration, new_sizes: &[usize], problem: &IoProblem, opts: &IoOptions) -> Result<IoSolution> {
    let base = base.trim();
    let k = full_arity(base.shape()).ok_or_else(|| Error::InvalidShape("extensions need a full base".into()))?;
    let l = k + new_sizes.len();
    if problem.max_mask() >= 1 << l {
        return Err(Error::Invalid("problem mentions a variable beyond the extension".into()));
    }
    let ev = Evaluator::new(&base, new_sizes)?;
    let n0 = ev.p.len();
    let card = ev.card;
    let sign = problem.sign();
    let masks = problem.masks();
    let mut best: Option<Candidate> = None;
    let mut enumerated = 0u128;
    let mut method = "gradient";

    // Deterministic kernels of one new variable, up to relabelling of values.
    if new_sizes.len() == 1
        && n0 <= opts.enumeration_support
        && partition_count(n0, card.min(n0)) <= opts.enumeration_cap
    {
        method = "enumeration";
        // Masses are integers over a common denominator when it is small,
        // so every entropy term is a table lookup.
        let weights = base.initial_space()?.weights();
        let denom = rational::lcm_all(weights.iter());
        let table_size = num_traits::ToPrimitive::to_usize(&denom).filter(|&d| d <= 1 << 16);
        let int_mass: Option<(Vec<usize>, Vec<f64>)> = table_size.map(|d| {
            let mass = weights
                .iter()
                .map(|w| num_traits::ToPrimitive::to_usize(&(w * Rational::from_integer(denom.clone())).to_integer()).unwrap())
                .collect();
            let eta = (0..=d).map(|m| math::eta(m as f64 / d as f64)).collect();
            (mass, eta)
        });
        let full_base = (1usize << k) - 1;
        let mut p = EntropicPoint { values: vec![0.0; (1 << l) - 1], kernel_id: 0 };
        // Subsets without new variables, or containing every base variable,
        // do not depend on a deterministic kernel.
        let mut varying = Vec::new();
        let mut scratch = Vec::new();
        let constant: Vec<f64> = (0..n0 * card).map(|i| if i % card == 0 { 1.0 } else { 0.0 }).collect();
        for &m in &masks {
            let (b, nsub) = ev.split(m);
            if nsub == 0 || b == full_base {
                p.values[m as usize - 1] = ev.entropy(m & full_base as u32, &constant, &mut scratch);
            } else {
                varying.push(m);
            }
        }
        let mut cells: Vec<Vec<f64>> = varying.iter().map(|&m| vec![0.0; ev.cell_size(m)]).collect();
        let mut icells: Vec<Vec<usize>> = varying.iter().map(|&m| vec![0; ev.cell_size(m)]).collect();
        let mut touched: Vec<usize> = Vec::with_capacity(n0);
        for_each_partition(n0, card.min(n0), |blocks, _| {
            enumerated += 1;
            for (mi, &m) in varying.iter().enumerate() {
                let (b, nsub) = ev.split(m);
                let w = ev.zsize[nsub];
                touched.clear();
                let mut h = 0.0;
                match &int_mass {
                    Some((mass, eta)) => {
                        let c = &mut icells[mi];
                        for a in 0..n0 {
                            let idx = ev.classes[b][a] * w + blocks[a];
                            if c[idx] == 0 {
                                touched.push(idx);
                            }
                            c[idx] += mass[a];
                        }
                        for &t in &touched {
                            h += eta[c[t]];
                            c[t] = 0;
                        }
                    }
                    None => {
                        let c = &mut cells[mi];
                        for a in 0..n0 {
                            let idx = ev.classes[b][a] * w + blocks[a];
                            if c[idx] == 0.0 {
                                touched.push(idx);
                            }
                            c[idx] += ev.p[a];
                        }
                        for &t in &touched {
                            h += math::eta(c[t]);
                            c[t] = 0.0;
                        }
                    }
                }
                p.values[m as usize - 1] = h;
            }
            if problem.violation(&p) <= CONSTRAINT_TOL {
                let score = sign * problem.value(&p);
                let improves = match &best {
                    None => true,
                    Some(b) => score < b.score - 1e-12,
                };
                if improves {
                    let mut kernel = vec![0.0; n0 * card];
                    for a in 0..n0 {
                        kernel[a * card + blocks[a]] = 1.0;
                    }
                    best = Some(Candidate { score, kernel });
                }
            }
        });
    }

    // Multistart projected gradient with a quadratic penalty.
    let starts: Vec<usize> = (0..opts.restarts).collect();
    let results = run_starts(&starts, opts.jobs, |s| gradient_start(&ev, l, problem, opts, s));
    for cands in results {
        for c in cands {
            if better(&c, &best) {
                best = Some(c);
            }
        }
    }
    let best = best.ok_or_else(|| Error::Infeasible("no candidate satisfies the constraints".into()))?;
    let witness = exact_kernel(&base, new_sizes, &best.kernel, card)?;
    let point = witness.entropic_point()?;
    let value = problem.value(&point);
    let lp_bound = shannon_bound(&base, new_sizes, problem)?;
    Ok(IoSolution { value, witness, point, lp_bound, enumerated, method })
}

fn exact_kernel(base: &Configuration, new_sizes: &[usize], kernel: &[f64], card: usize) -> Result<ExtensionKernel> {
    let rows = kernel
        .chunks(card)
        .map(|r| {
            let mut q: Vec<Rational> = r.iter().map(|&v| rational::from_f64(libm::round(v * 1e6) / 1e6)).collect();
            let s: Rational = q.iter().sum();
            if s.is_zero() {
                q[0] = Rational::one();
            } else {
                q.iter_mut().for_each(|v| *v /= &s);
            }
            q
        })
        .collect();
    ExtensionKernel::new(base.clone(), new_sizes.to_vec(), rows)
}

fn penalized(ev: &Evaluator, l: usize, problem: &IoProblem, kernel: &[f64], mu: f64) -> (f64, EntropicPoint) {
    let p = ev.point(kernel, l);
    let mut f = problem.sign() * problem.value(&p);
    for e in &problem.equalities {
        f += mu * { let v = apply(e, &p); v * v };
    }
    for i in &problem.inequalities {
        f += mu * { let v = apply(i, &p).max(0.0); v * v };
    }
    (f, p)
}

fn gradient_start(ev: &Evaluator, l: usize, problem: &IoProblem, opts: &IoOptions, s: usize) -> Vec<Candidate> {
    let n0 = ev.p.len();
    let card = ev.card;
    let mut rng = sample::rng(opts.seed.wrapping_add(0x51_7cc1_b727_220a_95u64.wrapping_mul(s as u64 + 1)));
    let mut kernel: Vec<f64> = (0..n0).flat_map(|_| sample::simplex_point(&mut rng, card)).collect();
    let mut cells = Vec::new();
    for mu in [1.0, 10.0, 100.0, 1000.0] {
        let (mut f, mut p) = penalized(ev, l, problem, &kernel, mu);
        let mut step = 1.0;
        for _ in 0..opts.iterations {
            // Coefficient of every subset in the penalized objective.
            let mut coef: BTreeMap<u32, f64> = BTreeMap::new();
            for &(m, c) in &problem.objective {
                *coef.entry(m).or_default() += problem.sign() * c;
            }
            for e in &problem.equalities {
                let v = apply(e, &p);
                for &(m, c) in e {
                    *coef.entry(m).or_default() += 2.0 * mu * v * c;
                }
            }
            for i in &problem.inequalities {
                let v = apply(i, &p).max(0.0);
                for &(m, c) in i {
                    *coef.entry(m).or_default() += 2.0 * mu * v * c;
                }
            }
            let mut grad = vec![0.0; n0 * card];
            for (&m, &c) in &coef {
                if c == 0.0 || m == 0 {
                    continue;
                }
                ev.entropy(m, &kernel, &mut cells);
                let (b, nsub) = ev.split(m);
                let w = ev.zsize[nsub];
                for a in 0..n0 {
                    for z in 0..card {
                        let cell = cells[ev.classes[b][a] * w + ev.zproj[nsub][z]];
                        let d = if cell > 0.0 { -ev.p[a] * (math::ln(cell) + 1.0) } else { ev.p[a] * 30.0 };
                        grad[a * card + z] += c * d;
                    }
                }
            }
            let mut improved = false;
            while step > 1e-9 {
                let mut trial = kernel.clone();
                for (t, g) in trial.iter_mut().zip(&grad) {
                    *t -= step * g;
                }
                for row in trial.chunks_mut(card) {
                    math::project_simplex(row);
                }
                let (ft, pt) = penalized(ev, l, problem, &trial, mu);
                if ft < f - 1e-12 {
                    kernel = trial;
                    f = ft;
                    p = pt;
                    improved = true;
                    step *= 2.0;
                    break;
                }
                step /= 2.0;
            }
            if !improved {
                break;
            }
        }
    }
    let mut out = Vec::new();
    let p = ev.point(&kernel, l);
    if problem.violation(&p) <= CONSTRAINT_TOL {
        out.push(Candidate { score: problem.sign() * problem.value(&p), kernel: kernel.clone() });
    }
    let mut snapped = vec![0.0; n0 * card];
    for a in 0..n0 {
        let row = &kernel[a * card..(a + 1) * card];
        let z = (0..card).fold(0, |bz, z| if row[z] > row[bz] { z } else { bz });
        snapped[a * card + z] = 1.0;
    }
    let p = ev.point(&snapped, l);
    if problem.violation(&p) <= CONSTRAINT_TOL {
        out.push(Candidate { score: problem.sign() * problem.value(&p), kernel: snapped });
    }
    out
}

/// Optimum of the Shannon relaxation: elemental inequalities over `E_l`,
/// base entropies fixed, `H(Z_t) <= ln |Z_t|`, plus the problem's
/// constraints. A lower bound on a minimum, an upper bound on a maximum.
pub fn shannon_bound(base: &Configuration, new_sizes: &[usize], problem: &IoProblem) -> Result<Option<f64>> {
    let base = base.trim();
    let k = full_arity(base.shape()).ok_or_else(|| Error::InvalidShape("extensions need a full base".into()))?;
    let l = k + new_sizes.len();
    let nv = (1usize << l) - 1;
    let row = |form: &[(u32, f64)]| {
        let mut r = vec![0.0; nv];
        for &(m, c) in form {
            if m != 0 {
                r[m as usize - 1] += c;
            }
        }
        r
    };
    let mut c = vec![0.0; nv];
    for &(m, v) in &problem.objective {
        c[m as usize - 1] += problem.sign() * v;
    }
    let mut lp = LinearProgram::new(c);
    let obj = object_of_mask(k);
    for m in 1..(1u32 << k) {
        lp.eq.push((row(&[(m, 1.0)]), base.space(obj[&m]).entropy()));
    }
    for (t, &s) in new_sizes.iter().enumerate() {
        lp.le.push((row(&[(1 << (k + t), 1.0)]), math::ln(s as f64)));
    }
    let full = (1u32 << l) - 1;
    for i in 0..l {
        lp.le.push((row(&[(full & !(1 << i), 1.0), (full, -1.0)]), 0.0));
    }
    for i in 0..l {
        for j in i + 1..l {
            let others = full & !(1 << i) & !(1 << j);
            let mut kk = others;
            loop {
                let (a, b) = (kk | 1 << i, kk | 1 << j);
                lp.le.push((row(&[(kk, 1.0), (a | b, 1.0), (a, -1.0), (b, -1.0)]), 0.0));
                if kk == 0 {
                    break;
                }
                kk = (kk - 1) & others;
            }
        }
    }
    for e in &problem.equalities {
        lp.eq.push((row(e), 0.0));
    }
    for i in &problem.inequalities {
        lp.le.push((row(i), 0.0));
    }
    Ok(match lp.minimize() {
        LpOutcome::Optimal { value, .. } => Some(problem.sign() * value),
        _ => None,
    })
}

/// Entropic points of `l`-extensions: every deterministic kernel of a single
/// new variable when there are few, then seeded random kernels.
pub fn entropic_sample(
    base: &Configuration,
    new_sizes: &[usize],
    samples: usize,
    seed: u64,
) -> Result<Vec<EntropicPoint>> {
    let base = base.trim();
    let k = full_arity(base.shape()).ok_or_else(|| Error::InvalidShape("extensions need a full base".into()))?;
    let l = k + new_sizes.len();
    let ev = Evaluator::new(&base, new_sizes)?;
    let (n0, card) = (ev.p.len(), ev.card);
    let mut out = Vec::new();
    if new_sizes.len() == 1 && partition_count(n0, card.min(n0)) <= 100_000 {
        for_each_partition(n0, card.min(n0), |blocks, _| {
            let mut kernel = vec![0.0; n0 * card];
            for a in 0..n0 {
                kernel[a * card + blocks[a]] = 1.0;
            }
            let mut p = ev.point(&kernel, l);
            p.kernel_id = out.len();
            out.push(p);
        });
    }
    if new_sizes.is_empty() && out.is_empty() {
        out.push(ev.point(&vec![1.0; n0], l));
        return Ok(out);
    }
    let mut rng = sample::rng(seed);
    for _ in 0..samples {
        let kernel: Vec<f64> = (0..n0).flat_map(|_| sample::simplex_point(&mut rng, card)).collect();
        let mut p = ev.point(&kernel, l);
        p.kernel_id = out.len();
        out.push(p);
    }
    Ok(out)
}

/// Hausdorff distance between point clouds in the `l1` norm.
pub fn hausdorff(a: &[EntropicPoint], b: &[EntropicPoint]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Invalid("empty point cloud".into()));
    }
    let one_sided = |x: &[EntropicPoint], y: &[EntropicPoint]| {
        x.iter().map(|p| y.iter().map(|q| p.l1(q)).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max)
    };
    Ok(one_sided(a, b).max(one_sided(b, a)))
}

/// Indices of the extreme points of a point cloud: a point is dropped when
/// it equals an earlier point or is a convex combination of the others.
pub fn hull_vertices(points: &[EntropicPoint]) -> Result<Vec<usize>> {
    let Some(first) = points.first() else { return Ok(Vec::new()) };
    let d = first.values.len();
    if points.iter().any(|p| p.values.len() != d) {
        return Err(Error::Invalid("points live in different spaces".into()));
    }
    let mut out = Vec::new();
    for (i, p) in points.iter().enumerate() {
        if points[..i].iter().any(|q| q.l1(p) < 1e-12) {
            continue;
        }
        let others: Vec<&EntropicPoint> = points.iter().filter(|q| q.l1(p) >= 1e-12).collect();
        if others.is_empty() {
            out.push(i);
            continue;
        }
        let mut lp = LinearProgram::new(vec![0.0; others.len()]);
        for k in 0..d {
            lp.eq.push((others.iter().map(|q| q.values[k]).collect(), p.values[k]));
        }
        lp.eq.push((vec![1.0; others.len()], 1.0));
        if lp.minimize() == LpOutcome::Infeasible {
            out.push(i);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct StabilizedReport {
    /// Best upper bound on `IO(X^n)`, in the problem's direction, for `n = 1..`.
    pub totals: Vec<f64>,
    /// Running optimum of `totals[n] / n`.
    pub normalized: Vec<f64>,
    /// Which entries came from a direct search on the power.
    pub direct: Vec<bool>,
    pub best: f64,
}

/// Values of the problem on tensor powers. Direct searches run while the
/// power is small; every entry is also bounded by products of witnesses for
/// a split `n = m + (n - m)`, which is Fekete smoothing of the sequence.
pub fn io_stabilized(
    base: &Configuration,
    new_sizes: &[usize],
    problem: &IoProblem,
    n_max: usize,
    opts: &IoOptions,
) -> Result<StabilizedReport> {
    let base = base.trim();
    let s = problem.sign();
    let n0 = base.initial_space()?.len();
    let mut smoothed: Vec<f64> = Vec::new();
    let mut direct = Vec::new();
    for n in 1..=n_max.max(1) {
        let mut v = f64::INFINITY;
        let mut used_direct = false;
        if n == 1 || n0.pow(n as u32) <= 16 {
            let power = base.power(n);
            let sizes: Vec<usize> = new_sizes.iter().map(|&z| z.pow(n as u32).min(n0.pow(n as u32))).collect();
            if let Ok(sol) = io_solve(&power, &sizes, problem, opts) {
                v = s * sol.value;
                used_direct = true;
            }
        }
        for m in 1..n {
            v = v.min(smoothed[m - 1] + smoothed[n - m - 1]);
        }
        if !v.is_finite() {
            return Err(Error::Infeasible("no feasible extension of the power".into()));
        }
        smoothed.push(v);
        direct.push(used_direct);
    }
    let mut normalized = Vec::with_capacity(smoothed.len());
    let mut run = f64::INFINITY;
    for (i, v) in smoothed.iter().enumerate() {
        run = run.min(v / (i + 1) as f64);
        normalized.push(s * run);
    }
    Ok(StabilizedReport {
        totals: smoothed.iter().map(|v| s * v).collect(),
        best: *normalized.last().unwrap(),
        normalized,
        direct,
    })
}

#[derive(Debug, Clone)]
pub struct TransportReport {
    pub extension: ExtensionKernel,
    /// kd of the glued coupling between the two extensions, over all levels.
    pub certificate: f64,
    pub kd_f: f64,
    pub bound: f64,
    /// The glued coupling of the initial spaces of the two extensions.
    pub coupling: Vec<Rational>,
}

/// Moves an extension of `X` to `X'` along a coupling `F` of the initial
/// spaces, given as a dense `|X'_0| x |X_0|` matrix, by gluing
/// `p(x', x, z) = F(x', x) K(x)(z)`.
pub fn transport_extension(ext: &ExtensionKernel, x_prime: &Configuration, f: &[Rational]) -> Result<TransportReport> {
    let x = &ext.base;
    let (px, pp) = (x.initial_space()?.weights(), x_prime.initial_space()?.weights());
    let (n, m) = (px.len(), pp.len());
    if f.len() != n * m || x.shape() != x_prime.shape() {
        return Err(Error::ShapeMismatch("coupling does not match the bases".into()));
    }
    for a in 0..m {
        if f[a * n..(a + 1) * n].iter().sum::<Rational>() != pp[a] {
            return Err(Error::Invalid("coupling marginal differs from the new base".into()));
        }
    }
    for b in 0..n {
        if (0..m).map(|a| f[a * n + b].clone()).sum::<Rational>() != px[b] {
            return Err(Error::Invalid("coupling marginal differs from the base".into()));
        }
    }
    let card = ext.card();
    let kernel = (0..m)
        .map(|a| {
            let mut row = vec![Rational::zero(); card];
            if pp[a].is_zero() {
                row[0] = Rational::one();
                return row;
            }
            for b in 0..n {
                if f[a * n + b].is_zero() {
                    continue;
                }
                for z in 0..card {
                    row[z] += &f[a * n + b] * &ext.kernel[b][z] / &pp[a];
                }
            }
            row
        })
        .collect();
    let moved = ExtensionKernel::new(x_prime.clone(), ext.new_sizes.clone(), kernel)?;
    let (y, yp) = (ext.extend()?, moved.extend()?);
    let cols = m * card;
    let mut coupling = vec![Rational::zero(); n * card * cols];
    for a in 0..m {
        for b in 0..n {
            if f[a * n + b].is_zero() {
                continue;
            }
            for z in 0..card {
                coupling[(b * card + z) * cols + a * card + z] += &f[a * n + b] * &ext.kernel[b][z];
            }
        }
    }
    let certificate = TwoFan::from_initial_coupling(&y, &yp, &coupling)?.kd();
    let mut ft = vec![Rational::zero(); n * m];
    for a in 0..m {
        for b in 0..n {
            ft[b * m + a] = f[a * n + b].clone();
        }
    }
    let kd_f = TwoFan::from_initial_coupling(x, x_prime, &ft)?.kd();
    let bound = (1u64 << ext.new_sizes.len()) as f64 * kd_f;
    Ok(TransportReport { extension: moved, certificate, kd_f, bound, coupling })
}

/// Exhaustive search over partitions of the support of a two-fan into
/// product-form rectangles, maximizing `H(X|Z) + H(Y|Z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RectanglePartition {
    pub value: f64,
    /// Each block as a sorted list of `(x, y)` cells.
    pub blocks: Vec<Vec<(usize, usize)>>,
}

pub const RECTANGLE_CAP: usize = 16;

pub fn rectangle_partition_optimum(fan: &Configuration) -> Result<RectanglePartition> {
    if fan.shape() != &DiagramShape::two_fan() {
        return Err(Error::ShapeMismatch("a two-fan is required".into()));
    }
    let proj = fan.projections()?;
    let z = fan.space(0);
    let sup = z.support();
    if sup.len() > RECTANGLE_CAP {
        return Err(Error::Budget { what: "support cells", size: sup.len() as u128, cap: RECTANGLE_CAP as u128 });
    }
    let cells: Vec<(usize, usize)> = sup.iter().map(|&a| (proj[1][a], proj[2][a])).collect();
    let w: Vec<Rational> = sup.iter().map(|&a| z.weights()[a].clone()).collect();
    let mut xs: Vec<usize> = cells.iter().map(|c| c.0).collect();
    let mut ys: Vec<usize> = cells.iter().map(|c| c.1).collect();
    xs.sort_unstable();
    xs.dedup();
    ys.sort_unstable();
    ys.dedup();
    if xs.len() > 16 || ys.len() > 16 {
        return Err(Error::Budget { what: "rows or columns", size: xs.len().max(ys.len()) as u128, cap: 16 });
    }
    let pos: BTreeMap<(usize, usize), usize> = cells.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let nc = cells.len();
    // Valid rectangles as (cell mask, value).
    let mut rects: Vec<Vec<(u32, f64)>> = vec![Vec::new(); nc];
    for rm in 1u32..(1 << xs.len()) {
        'cols: for cm in 1u32..(1 << ys.len()) {
            let mut mask = 0u32;
            let mut idx = Vec::new();
            for (ri, &x) in xs.iter().enumerate() {
                if rm >> ri & 1 == 0 {
                    continue;
                }
                for (ci, &y) in ys.iter().enumerate() {
                    if cm >> ci & 1 == 0 {
                        continue;
                    }
                    match pos.get(&(x, y)) {
                        Some(&i) => {
                            mask |= 1 << i;
                            idx.push((ri, ci, i));
                        }
                        None => continue 'cols,
                    }
                }
            }
            let total: Rational = idx.iter().map(|&(_, _, i)| w[i].clone()).sum();
            let mut rowm: BTreeMap<usize, Rational> = BTreeMap::new();
            let mut colm: BTreeMap<usize, Rational> = BTreeMap::new();
            for &(r, c, i) in &idx {
                *rowm.entry(r).or_insert_with(Rational::zero) += &w[i];
                *colm.entry(c).or_insert_with(Rational::zero) += &w[i];
            }
            if idx.iter().any(|&(r, c, i)| &w[i] * &total != &rowm[&r] * &colm[&c]) {
                continue;
            }
            let cond = |m: &BTreeMap<usize, Rational>| {
                let v: Vec<Rational> = m.values().map(|x| x / &total).collect();
                entropy_exact(&v)
            };
            let value = rational::to_f64(&total) * (cond(&rowm) + cond(&colm));
            let low = mask.trailing_zeros() as usize;
            rects[low].push((mask, value));
        }
    }
    let full = if nc == 32 { u32::MAX } else { (1u32 << nc) - 1 };
    let mut best: Vec<f64> = vec![f64::NEG_INFINITY; 1 << nc];
    let mut choice: Vec<u32> = vec![0; 1 << nc];
    best[0] = 0.0;
    for mask in 1..=full {
        let low = mask.trailing_zeros() as usize;
        for &(r, v) in &rects[low] {
            if r & mask == r {
                let cand = v + best[(mask & !r) as usize];
                if cand > best[mask as usize] + 1e-12 {
                    best[mask as usize] = cand;
                    choice[mask as usize] = r;
                }
            }
        }
    }
    let mut blocks = Vec::new();
    let mut mask = full;
    while mask != 0 {
        let r = choice[mask as usize];
        let mut b: Vec<(usize, usize)> = (0..nc).filter(|&i| r >> i & 1 == 1).map(|i| cells[i]).collect();
        b.sort_unstable();
        blocks.push(b);
        mask &= !r;
    }
    Ok(RectanglePartition { value: best[full as usize], blocks })
}

/// A two-fan of two uniform six-point spaces whose vertex is uniform on the
/// given cells.
pub fn cell_fan(cells: &[(usize, usize)]) -> Result<Configuration> {
    let atoms = cells.iter().map(|&(x, y)| Label::pair(Label::Int(x as i64), Label::Int(y as i64))).collect();
    let joint = ProbabilitySpace::new(atoms, vec![rational::rat(1, cells.len() as i64); cells.len()])?;
    let vars = vec![
        cells.iter().map(|&(x, _)| Label::Int(x as i64)).collect(),
        cells.iter().map(|&(_, y)| Label::Int(y as i64)).collect(),
    ];
    Configuration::generated(&joint, &vars)
}

/// Three diagonal 2x2 blocks.
pub fn example1_cells() -> Vec<(usize, usize)> {
    (0..3).flat_map(|b| [(2 * b, 2 * b), (2 * b, 2 * b + 1), (2 * b + 1, 2 * b), (2 * b + 1, 2 * b + 1)]).collect()
}

/// Reconstructed staircase `{(i, i), (i, i+1 mod 6)}`.
pub fn example2_cells() -> Vec<(usize, usize)> {
    (0..6).flat_map(|i| [(i, i), (i, (i + 1) % 6)]).collect()
}

/// Reconstructed `{(i, i), (i, i+2 mod 6)}`.
pub fn example3_cells() -> Vec<(usize, usize)> {
    (0..6).flat_map(|i| [(i, i), (i, (i + 2) % 6)]).collect()
}

pub fn describe_blocks(blocks: &[Vec<(usize, usize)>]) -> String {
    let parts: Vec<String> = blocks
        .iter()
        .map(|b| {
            let cells: Vec<String> = b.iter().map(|(x, y)| alloc::format!("{x}.{y}")).collect();
            cells.join("+")
        })
        .collect();
    parts.join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    fn coins() -> Configuration {
        crate::sample::joint_fan(2, 2, &vec![rat(1, 4); 4])
    }

    #[test]
    fn partitions() {
        assert_eq!(partition_count(4, 4), 15);
        assert_eq!(partition_count(12, 12), 4_213_597);
        assert_eq!(partition_count(4, 2), 8);
        let mut n = 0;
        for_each_partition(4, 2, |_, _| n += 1);
        assert_eq!(n, 8);
    }

    #[test]
    fn simple_extensions() {
        let base = coins();
        let c = ExtensionKernel::constant(base.clone(), vec![2]).unwrap();
        let p = c.entropic_point().unwrap();
        assert!((p.get(0b111) - p.get(0b011)).abs() < 1e-12);
        assert_eq!(p.get(0b100), 0.0);
        let copy = ExtensionKernel::deterministic(base.clone(), vec![4], &[0, 1, 2, 3]).unwrap();
        assert!((copy.entropic_point().unwrap().get(0b100) - 4f64.ln()).abs() < 1e-12);
        let half = vec![vec![rat(1, 2), rat(1, 2)]; 4];
        let ind = ExtensionKernel::new(base.clone(), vec![2], half).unwrap();
        let p = ind.entropic_point().unwrap();
        for b in 1..4u32 {
            assert!((p.get(b | 4) - p.get(b) - 2f64.ln()).abs() < 1e-12);
        }
        let y = ind.extend().unwrap();
        assert_eq!(y.shape(), &DiagramShape::full(3));
        assert!(shannon_violation(&p) < 1e-12);
    }

    #[test]
    fn joint_indicator_problem() {
        let base = coins();
        let prob = IoProblem::minimize(vec![(0b111, 1.0)]);
        let sol = io_solve(&base, &[4], &prob, &IoOptions::default()).unwrap();
        assert!((sol.value - 4f64.ln()).abs() < 1e-12);
        assert!(sol.lp_bound.unwrap() <= sol.value + 1e-9);
    }

    #[test]
    fn rectangles() {
        let one = cell_fan(&[(0, 0), (0, 1), (1, 0), (1, 1)]).unwrap();
        assert!((rectangle_partition_optimum(&one).unwrap().value - 2.0 * 2f64.ln()).abs() < 1e-12);
        let e1 = rectangle_partition_optimum(&cell_fan(&example1_cells()).unwrap()).unwrap();
        assert!((e1.value - 2.0 * 2f64.ln()).abs() < 1e-12);
        assert_eq!(e1.blocks.len(), 3);
        for cells in [example2_cells(), example3_cells()] {
            let r = rectangle_partition_optimum(&cell_fan(&cells).unwrap()).unwrap();
            assert!((r.value - 2f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn transport_identity() {
        let base = coins();
        let ext = ExtensionKernel::deterministic(base.clone(), vec![2], &[0, 1, 1, 0]).unwrap();
        let id: Vec<Rational> = (0..16).map(|i| if i % 5 == 0 { rat(1, 4) } else { rat(0, 1) }).collect();
        let r = transport_extension(&ext, &base, &id).unwrap();
        assert!(r.certificate.abs() < 1e-12);
        assert_eq!(r.extension, ext);
    }

    #[test]
    fn hull_of_a_square() {
        let pt = |x: f64, y: f64| EntropicPoint { values: vec![x, y], kernel_id: 0 };
        let cloud = [pt(0.0, 0.0), pt(1.0, 0.0), pt(0.5, 0.5), pt(1.0, 1.0), pt(0.0, 1.0), pt(1.0, 0.0)];
        assert_eq!(hull_vertices(&cloud).unwrap(), vec![0, 1, 3, 4]);
    }

    #[test]
    fn hausdorff_basics() {
        let a = EntropicPoint { values: vec![1.0, 2.0, 3.0], kernel_id: 0 };
        let b = EntropicPoint { values: vec![1.0, 2.5, 3.0], kernel_id: 0 };
        assert_eq!(hausdorff(&[a.clone()], &[a.clone()]).unwrap(), 0.0);
        assert_eq!(hausdorff(&[a], &[b]).unwrap(), 0.5);
        assert!(hausdorff(&[], &[]).is_err());
    }

    #[test]
    fn samples_are_shannon() {
        let pts = entropic_sample(&coins(), &[2], 50, 3).unwrap();
        assert!(pts.iter().all(|p| shannon_violation(p) < 1e-9));
        let point_base = Configuration::generated(&ProbabilitySpace::point(), &[vec![Label::Int(0)]]).unwrap();
        let pts = entropic_sample(&point_base, &[2, 2], 30, 1).unwrap();
        for p in &pts {
            assert!(shannon_violation(p) < 1e-9 && p.get(1).abs() < 1e-12);
        }
    }
}
