//! Kolmogorov-Sinai distances between configurations of a complete shape.
//!
//! A coupling of two complete configurations is determined by a coupling of
//! their initial spaces; every other level is its pushforward, which is
//! automatically the minimal reduction. The objective
//! `kd = sum_i 2 H(Z_i) - H(X_i) - H(Y_i)` is a sum of entropies of linear
//! images of the coupling, hence concave, and its minimum over the
//! transportation polytope is attained at a vertex.
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::{Signed, Zero};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::config::Configuration;
use crate::error::{Error, Result};
use crate::fan::TwoFan;
use crate::math;
use crate::rational::{self, Rational};
use crate::sample;
use crate::shape::DiagramShape;
use crate::space::{entropy_exact, push_rational};
use crate::vertices::{solve_forest, vertex_supports, DEFAULT_VERTEX_CAP};

/// Largest coupling table that [`Mode::Auto`] solves exactly. Six by six
/// tables can have close to a million vertices.
pub const AUTO_EXACT_CELLS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Exact,
    Heuristic,
    /// Exact when the vertex cap allows, otherwise the heuristic, and for
    /// very large inputs only the cheap sorted-greedy coupling.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Optimality {
    ExactVertexEnumeration,
    Heuristic,
    ClosedForm,
}

impl Optimality {
    pub fn tag(&self) -> &'static str {
        match self {
            Optimality::ExactVertexEnumeration => "exact-vertex-enumeration",
            Optimality::Heuristic => "heuristic",
            Optimality::ClosedForm => "closed-form",
        }
    }
}

/// Sparse coupling of two initial spaces, indexed by full atom indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    pub rows: usize,
    pub cols: usize,
    pub cells: Vec<(usize, usize, Rational)>,
}

impl Coupling {
    pub fn dense(&self) -> Vec<Rational> {
        let mut m = vec![Rational::zero(); self.rows * self.cols];
        for (a, b, w) in &self.cells {
            m[a * self.cols + b] += w;
        }
        m
    }

    pub fn from_dense(rows: usize, cols: usize, m: &[Rational]) -> Self {
        let cells = (0..rows * cols)
            .filter(|&k| m[k].is_positive())
            .map(|k| (k / cols, k % cols, m[k].clone()))
            .collect();
        Self { rows, cols, cells }
    }

    pub fn pattern(&self) -> Vec<usize> {
        let mut p: Vec<usize> = self.cells.iter().map(|(a, b, _)| a * self.cols + b).collect();
        p.sort_unstable();
        p
    }
}

#[derive(Debug, Clone)]
pub struct CouplingWitness {
    pub coupling: Coupling,
    pub kd_value: f64,
    pub optimality: Optimality,
}

impl CouplingWitness {
    /// The minimal two-fan realised by the witness.
    pub fn fan(&self, x: &Configuration, y: &Configuration) -> Result<TwoFan> {
        TwoFan::from_initial_coupling(x, y, &self.coupling.dense())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct HeuristicOptions {
    pub starts: usize,
    pub seed: u64,
    pub tol: f64,
    pub jobs: usize,
}

impl Default for HeuristicOptions {
    fn default() -> Self {
        Self { starts: 32, seed: 0, tol: 1e-10, jobs: 1 }
    }
}

const LOCAL_SEARCH_CELLS: usize = 400;
const LIGHT_HEURISTIC_CELLS: usize = 40_000;

/// Precomputed data for evaluating kd of initial couplings.
pub struct CouplingProblem {
    sa: Vec<usize>,
    sb: Vec<usize>,
    p: Vec<Rational>,
    q: Vec<Rational>,
    px: Vec<Vec<usize>>,
    py: Vec<Vec<usize>>,
    sx: Vec<usize>,
    sy: Vec<usize>,
    hsum: f64,
    rows_full: usize,
    cols_full: usize,
}

impl CouplingProblem {
    pub fn new(x: &Configuration, y: &Configuration) -> Result<Self> {
        if x.shape() != y.shape() {
            return Err(Error::ShapeMismatch("distance needs equal shapes".into()));
        }
        if !x.shape().is_complete() {
            return Err(Error::NotComplete);
        }
        let o = x.initial()?;
        let (x0, y0) = (x.space(o), y.space(o));
        let sa = x0.support();
        let sb = y0.support();
        let (fx, fy) = (x.projections()?, y.projections()?);
        let px = fx.iter().map(|p| sa.iter().map(|&a| p[a]).collect()).collect();
        let py = fy.iter().map(|p| sb.iter().map(|&b| p[b]).collect()).collect();
        let n = x.shape().len();
        let hsum = (0..n).map(|i| x.space(i).entropy() + y.space(i).entropy()).sum();
        Ok(Self {
            p: sa.iter().map(|&a| x0.weights()[a].clone()).collect(),
            q: sb.iter().map(|&b| y0.weights()[b].clone()).collect(),
            sa,
            sb,
            px,
            py,
            sx: (0..n).map(|i| x.space(i).len()).collect(),
            sy: (0..n).map(|i| y.space(i).len()).collect(),
            hsum,
            rows_full: x0.len(),
            cols_full: y0.len(),
        })
    }

    pub fn na(&self) -> usize {
        self.sa.len()
    }

    pub fn nb(&self) -> usize {
        self.sb.len()
    }

    /// kd of a dense float coupling on the supports.
    pub fn objective(&self, m: &[f64], scratch: &mut Vec<f64>) -> f64 {
        let nb = self.nb();
        let mut total = -self.hsum;
        for i in 0..self.px.len() {
            let w = self.sy[i];
            let size = self.sx[i] * w;
            if size <= 1 << 22 {
                scratch.clear();
                scratch.resize(size, 0.0);
                for (k, &v) in m.iter().enumerate() {
                    if v != 0.0 {
                        scratch[self.px[i][k / nb] * w + self.py[i][k % nb]] += v;
                    }
                }
                total += 2.0 * math::entropy(scratch);
            } else {
                let mut acc: BTreeMap<(usize, usize), f64> = BTreeMap::new();
                for (k, &v) in m.iter().enumerate() {
                    if v != 0.0 {
                        *acc.entry((self.px[i][k / nb], self.py[i][k % nb])).or_default() += v;
                    }
                }
                total += 2.0 * acc.values().map(|&v| math::eta(v)).sum::<f64>();
            }
        }
        total
    }

    /// kd of a sparse exact coupling given on support indices.
    pub fn objective_sparse(&self, cells: &[(usize, usize, Rational)]) -> f64 {
        let mut total = -self.hsum;
        for i in 0..self.px.len() {
            let mut acc: BTreeMap<(usize, usize), Rational> = BTreeMap::new();
            for (a, b, w) in cells {
                *acc.entry((self.px[i][*a], self.py[i][*b])).or_insert_with(Rational::zero) += w;
            }
            let ws: Vec<Rational> = acc.into_values().collect();
            total += 2.0 * entropy_exact(&ws);
        }
        total
    }

    fn witness(&self, small: &[Rational], value: f64, optimality: Optimality) -> CouplingWitness {
        let nb = self.nb();
        let cells = (0..small.len())
            .filter(|&k| small[k].is_positive())
            .map(|k| (self.sa[k / nb], self.sb[k % nb], small[k].clone()))
            .collect();
        CouplingWitness {
            coupling: Coupling { rows: self.rows_full, cols: self.cols_full, cells },
            kd_value: value,
            optimality,
        }
    }

    fn witness_sparse(&self, cells: Vec<(usize, usize, Rational)>, value: f64) -> CouplingWitness {
        let cells = cells.into_iter().map(|(a, b, w)| (self.sa[a], self.sb[b], w)).collect();
        CouplingWitness {
            coupling: Coupling { rows: self.rows_full, cols: self.cols_full, cells },
            kd_value: value,
            optimality: Optimality::Heuristic,
        }
    }

    pub fn exact(&self, cap: usize) -> Result<CouplingWitness> {
        let verts = vertex_supports(&self.p, &self.q, cap)?;
        let nb = self.nb();
        let mut dense = vec![0.0; self.na() * nb];
        let mut scratch = Vec::new();
        let mut best: Option<(f64, usize)> = None;
        for (idx, (cells, vals)) in verts.iter().enumerate() {
            dense.iter_mut().for_each(|v| *v = 0.0);
            for (&c, &v) in cells.iter().zip(vals) {
                dense[c] = v;
            }
            let val = self.objective(&dense, &mut scratch);
            // Supports come sorted, so the first within tolerance wins ties.
            if best.map_or(true, |(bv, _)| val < bv - 1e-12) {
                best = Some((val, idx));
            }
        }
        let (val, idx) = best.expect("the polytope is non-empty");
        let pairs: Vec<(usize, usize)> = verts[idx].0.iter().map(|&c| (c / nb, c % nb)).collect();
        let m = solve_forest(&self.p, &self.q, &pairs).expect("vertex supports are feasible forests");
        Ok(self.witness(&m, val.max(0.0), Optimality::ExactVertexEnumeration))
    }

    /// Sorted north-west corner rule: rows and columns in decreasing weight,
    /// ties by index. Produces a vertex with at most `na + nb - 1` cells.
    pub fn greedy_cells(&self, row_order: &[usize], col_order: &[usize]) -> Vec<(usize, usize, Rational)> {
        let mut rr: Vec<Rational> = self.p.clone();
        let mut cr: Vec<Rational> = self.q.clone();
        let (mut i, mut j) = (0, 0);
        let mut cells = Vec::new();
        while i < row_order.len() && j < col_order.len() {
            let (r, c) = (row_order[i], col_order[j]);
            let v = if rr[r] < cr[c] { rr[r].clone() } else { cr[c].clone() };
            if v.is_positive() {
                cells.push((r, c, v.clone()));
            }
            rr[r] -= &v;
            cr[c] -= &v;
            if rr[r].is_zero() {
                i += 1;
            }
            if cr[c].is_zero() {
                j += 1;
            }
        }
        cells
    }

    fn sorted_orders(&self) -> (Vec<usize>, Vec<usize>) {
        let mut ro: Vec<usize> = (0..self.na()).collect();
        ro.sort_by(|&a, &b| self.p[b].cmp(&self.p[a]).then(a.cmp(&b)));
        let mut co: Vec<usize> = (0..self.nb()).collect();
        co.sort_by(|&a, &b| self.q[b].cmp(&self.q[a]).then(a.cmp(&b)));
        (ro, co)
    }

    fn dense_of(&self, cells: &[(usize, usize, Rational)]) -> Vec<Rational> {
        let mut m = vec![Rational::zero(); self.na() * self.nb()];
        for (a, b, w) in cells {
            m[a * self.nb() + b] += w;
        }
        m
    }

    fn independent_value(&self) -> f64 {
        self.hsum
    }

    pub fn heuristic(&self, opts: &HeuristicOptions) -> CouplingWitness {
        let (na, nb) = (self.na(), self.nb());
        let cells = na * nb;
        let (ro, co) = self.sorted_orders();
        let greedy = self.greedy_cells(&ro, &co);
        let gval = self.objective_sparse(&greedy);
        let mut best = Candidate { value: gval, pattern: cell_pattern(&greedy, nb), cells: greedy };
        if cells > LIGHT_HEURISTIC_CELLS {
            return self.finish(best, opts);
        }
        let starts: Vec<usize> = (0..opts.starts).collect();
        let results = run_starts(&starts, opts.jobs, |s| self.one_start(s, opts));
        for c in results.into_iter().flatten() {
            best = best.min(c);
        }
        self.finish(best, opts)
    }

    fn finish(&self, best: Candidate, _opts: &HeuristicOptions) -> CouplingWitness {
        let ind = self.independent_value();
        if ind < best.value - 1e-12 && self.na() * self.nb() <= 1 << 20 {
            let cells: Vec<(usize, usize, Rational)> = (0..self.na())
                .flat_map(|a| (0..self.nb()).map(move |b| (a, b)))
                .map(|(a, b)| (a, b, &self.p[a] * &self.q[b]))
                .collect();
            return self.witness_sparse(cells, ind.max(0.0));
        }
        self.witness_sparse(best.cells, best.value.max(0.0))
    }

    fn one_start(&self, s: usize, opts: &HeuristicOptions) -> Option<Candidate> {
        let (na, nb) = (self.na(), self.nb());
        let mut rng = sample::rng(opts.seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(s as u64 + 1)));
        let mut ro: Vec<usize> = (0..na).collect();
        let mut co: Vec<usize> = (0..nb).collect();
        ro.shuffle(&mut rng);
        co.shuffle(&mut rng);
        let start_cells = self.greedy_cells(&ro, &co);
        if na * nb > LOCAL_SEARCH_CELLS {
            let v = self.objective_sparse(&start_cells);
            return Some(Candidate { value: v, pattern: cell_pattern(&start_cells, nb), cells: start_cells });
        }
        let mut m: Vec<f64> = if s % 2 == 0 {
            self.dense_of(&start_cells).iter().map(rational::to_f64).collect()
        } else {
            self.random_interior(&mut rng)
        };
        let mut scratch = Vec::new();
        self.local_search(&mut m, opts.tol);
        self.snap_to_vertex(&mut m, &mut scratch);
        let forest: Vec<(usize, usize)> = (0..na * nb).filter(|&k| m[k] > 0.0).map(|k| (k / nb, k % nb)).collect();
        let exact = solve_forest(&self.p, &self.q, &forest)?;
        let cells: Vec<(usize, usize, Rational)> =
            (0..na * nb).filter(|&k| exact[k].is_positive()).map(|k| (k / nb, k % nb, exact[k].clone())).collect();
        let value = self.objective_sparse(&cells);
        Some(Candidate { value, pattern: cell_pattern(&cells, nb), cells })
    }

    fn random_interior<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let (na, nb) = (self.na(), self.nb());
        let p: Vec<f64> = self.p.iter().map(rational::to_f64).collect();
        let q: Vec<f64> = self.q.iter().map(rational::to_f64).collect();
        let mut m: Vec<f64> = (0..na * nb).map(|_| rng.gen_range(0.05..1.0)).collect();
        for _ in 0..200 {
            for a in 0..na {
                let s: f64 = m[a * nb..(a + 1) * nb].iter().sum();
                for b in 0..nb {
                    m[a * nb + b] *= p[a] / s;
                }
            }
            for b in 0..nb {
                let s: f64 = (0..na).map(|a| m[a * nb + b]).sum();
                for a in 0..na {
                    m[a * nb + b] *= q[b] / s;
                }
            }
        }
        m
    }

    /// Moves mass along 4-cycles. The objective is concave along each such
    /// line, so only the two endpoints need evaluating. Each candidate move
    /// touches at most four entries of every pushed-forward table, so moves
    /// are scored by the entropy change at those entries alone.
    pub fn local_search(&self, m: &mut [f64], tol: f64) {
        let (na, nb) = (self.na(), self.nb());
        let objects = self.px.len();
        if (0..objects).any(|i| self.sx[i] * self.sy[i] > 1 << 22) {
            return;
        }
        let keys: Vec<Vec<usize>> = (0..objects)
            .map(|i| (0..na * nb).map(|k| self.px[i][k / nb] * self.sy[i] + self.py[i][k % nb]).collect())
            .collect();
        let push = |m: &[f64]| -> Vec<Vec<f64>> {
            (0..objects)
                .map(|i| {
                    let mut t = vec![0.0; self.sx[i] * self.sy[i]];
                    for (k, &v) in m.iter().enumerate() {
                        t[keys[i][k]] += v;
                    }
                    t
                })
                .collect()
        };
        let etas = |tables: &[Vec<f64>]| -> Vec<Vec<f64>> {
            tables.iter().map(|t| t.iter().map(|&v| math::eta(v)).collect()).collect()
        };
        let mut tables = push(m);
        let mut cached = etas(&tables);
        let delta = |tables: &[Vec<f64>], cached: &[Vec<f64>], cyc: [usize; 4], t: f64| -> f64 {
            let mut total = 0.0;
            for i in 0..objects {
                let mut touched: [(usize, f64); 4] = [(usize::MAX, 0.0); 4];
                let mut len = 0;
                for (j, &k) in cyc.iter().enumerate() {
                    let key = keys[i][k];
                    let dv = if j < 2 { t } else { -t };
                    match touched[..len].iter_mut().find(|e| e.0 == key) {
                        Some(e) => e.1 += dv,
                        None => {
                            touched[len] = (key, dv);
                            len += 1;
                        }
                    }
                }
                for &(key, dv) in &touched[..len] {
                    total += 2.0 * (math::eta(tables[i][key] + dv) - cached[i][key]);
                }
            }
            total
        };
        for _ in 0..10_000 {
            let mut best: Option<(f64, [usize; 4], f64)> = None;
            for r1 in 0..na {
                for r2 in r1 + 1..na {
                    for c1 in 0..nb {
                        for c2 in c1 + 1..nb {
                            let cyc = [r1 * nb + c1, r2 * nb + c2, r1 * nb + c2, r2 * nb + c1];
                            let up = m[cyc[2]].min(m[cyc[3]]);
                            let down = m[cyc[0]].min(m[cyc[1]]);
                            for t in [up, -down] {
                                if t.abs() <= 1e-15 {
                                    continue;
                                }
                                let d = delta(&tables, &cached, cyc, t);
                                if d < -tol && best.as_ref().is_none_or(|bb| d < bb.0) {
                                    best = Some((d, cyc, t));
                                }
                            }
                        }
                    }
                }
            }
            match best {
                Some((_, [a, b, c, d], t)) => {
                    apply_cycle(m, a, b, c, d, t);
                    clean(m);
                    tables = push(m);
                    cached = etas(&tables);
                }
                None => break,
            }
        }
    }

    /// Removes cycles from the support by moving to the better endpoint of
    /// each cycle line until the support is a forest.
    pub fn snap_to_vertex(&self, m: &mut [f64], scratch: &mut Vec<f64>) {
        let (na, nb) = (self.na(), self.nb());
        while let Some(cycle) = find_cycle(m, na, nb) {
            let plus: Vec<usize> = cycle.iter().step_by(2).copied().collect();
            let minus: Vec<usize> = cycle.iter().skip(1).step_by(2).copied().collect();
            let up = minus.iter().map(|&k| m[k]).fold(f64::INFINITY, f64::min);
            let down = plus.iter().map(|&k| m[k]).fold(f64::INFINITY, f64::min);
            let mut eval = |t: f64, m: &mut [f64]| {
                shift(m, &plus, &minus, t);
                let v = self.objective(m, scratch);
                shift(m, &plus, &minus, -t);
                v
            };
            let vu = eval(up, m);
            let vd = eval(-down, m);
            let (t, zero) = if vu <= vd { (up, &minus) } else { (-down, &plus) };
            shift(m, &plus, &minus, t);
            let kill = zero.iter().copied().min_by(|&a, &b| m[a].partial_cmp(&m[b]).unwrap()).unwrap();
            m[kill] = 0.0;
            clean(m);
        }
    }
}

#[derive(Debug, Clone)]
struct Candidate {
    value: f64,
    pattern: Vec<usize>,
    cells: Vec<(usize, usize, Rational)>,
}

impl Candidate {
    fn min(self, other: Candidate) -> Candidate {
        if other.value < self.value - 1e-12 || (other.value <= self.value + 1e-12 && other.pattern < self.pattern) {
            other
        } else {
            self
        }
    }
}

#[cfg(feature = "std")]
pub(crate) fn run_starts<T: Send, F: Fn(usize) -> T + Sync>(items: &[usize], jobs: usize, f: F) -> Vec<T> {
    if jobs <= 1 || items.len() <= 1 {
        return items.iter().map(|&s| f(s)).collect();
    }
    let chunk = items.len().div_ceil(jobs);
    std::thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|c| {
                let f = &f;
                scope.spawn(move || c.iter().map(|&s| f(s)).collect::<Vec<T>>())
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

#[cfg(not(feature = "std"))]
pub(crate) fn run_starts<T, F: Fn(usize) -> T>(items: &[usize], _jobs: usize, f: F) -> Vec<T> {
    items.iter().map(|&s| f(s)).collect()
}

fn apply_cycle(m: &mut [f64], a: usize, b: usize, c: usize, d: usize, t: f64) {
    m[a] += t;
    m[b] += t;
    m[c] -= t;
    m[d] -= t;
}

fn shift(m: &mut [f64], plus: &[usize], minus: &[usize], t: f64) {
    for &k in plus {
        m[k] += t;
    }
    for &k in minus {
        m[k] -= t;
    }
}

fn clean(m: &mut [f64]) {
    for v in m.iter_mut() {
        if *v < 1e-15 {
            *v = 0.0;
        }
    }
}

/// An even cycle of support cells, listed in order, if one exists.
fn find_cycle(m: &[f64], na: usize, nb: usize) -> Option<Vec<usize>> {
    let nodes = na + nb;
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nodes];
    let mut parent: Vec<usize> = (0..nodes).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        p[x] = r;
        r
    }
    for k in 0..na * nb {
        if m[k] <= 0.0 {
            continue;
        }
        let (r, c) = (k / nb, na + k % nb);
        let (pr, pc) = (find(&mut parent, r), find(&mut parent, c));
        if pr == pc {
            // Path from c back to r in the current forest closes the cycle.
            let mut prev: Vec<Option<(usize, usize)>> = vec![None; nodes];
            let mut stack = vec![c];
            let mut seen = vec![false; nodes];
            seen[c] = true;
            while let Some(u) = stack.pop() {
                if u == r {
                    break;
                }
                for &(v, cell) in &adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        prev[v] = Some((u, cell));
                        stack.push(v);
                    }
                }
            }
            let mut cycle = vec![k];
            let mut u = r;
            while u != c {
                let (p, cell) = prev[u].unwrap();
                cycle.push(cell);
                u = p;
            }
            return Some(cycle);
        }
        parent[pr] = pc;
        adj[r].push((c, k));
        adj[c].push((r, k));
    }
    None
}

fn cell_pattern(cells: &[(usize, usize, Rational)], nb: usize) -> Vec<usize> {
    let mut p: Vec<usize> = cells.iter().map(|(a, b, _)| a * nb + b).collect();
    p.sort_unstable();
    p
}

/// kd of an explicit two-fan of configurations.
pub fn kd(fan: &TwoFan) -> f64 {
    fan.kd()
}

/// Intrinsic Kolmogorov-Sinai distance with a witness coupling.
pub fn intrinsic_k(x: &Configuration, y: &Configuration, mode: Mode) -> Result<(f64, CouplingWitness)> {
    intrinsic_k_with(x, y, mode, &HeuristicOptions::default())
}

pub fn intrinsic_k_with(
    x: &Configuration,
    y: &Configuration,
    mode: Mode,
    opts: &HeuristicOptions,
) -> Result<(f64, CouplingWitness)> {
    let prob = CouplingProblem::new(x, y)?;
    let w = match mode {
        Mode::Exact => prob.exact(DEFAULT_VERTEX_CAP)?,
        Mode::Heuristic => prob.heuristic(opts),
        Mode::Auto => {
            if prob.na() * prob.nb() <= AUTO_EXACT_CELLS {
                prob.exact(AUTO_EXACT_CELLS)?
            } else {
                prob.heuristic(opts)
            }
        }
    };
    Ok((w.kd_value, w))
}

/// Composes couplings `X <-> Y` and `Y <-> Z` of initial spaces by adhesion
/// over `Y` and pushes the result to `X x Z`.
pub fn compose_couplings(f: &Coupling, g: &Coupling, y_weights: &[Rational]) -> Result<Coupling> {
    if f.cols != g.rows || y_weights.len() != f.cols {
        return Err(Error::ShapeMismatch("middle spaces differ".into()));
    }
    let mut fm = vec![Rational::zero(); f.cols];
    let mut gm = vec![Rational::zero(); g.rows];
    for (_, b, w) in &f.cells {
        fm[*b] += w;
    }
    for (b, _, w) in &g.cells {
        gm[*b] += w;
    }
    if fm != y_weights || gm != y_weights {
        return Err(Error::Invalid("couplings disagree on the middle marginal".into()));
    }
    let mut by_mid: Vec<Vec<(usize, &Rational)>> = vec![Vec::new(); g.rows];
    for (b, c, w) in &g.cells {
        by_mid[*b].push((*c, w));
    }
    let mut acc: BTreeMap<(usize, usize), Rational> = BTreeMap::new();
    for (a, b, w) in &f.cells {
        for &(c, v) in &by_mid[*b] {
            *acc.entry((*a, c)).or_insert_with(Rational::zero) += w * v / &y_weights[*b];
        }
    }
    Ok(Coupling { rows: f.rows, cols: g.cols, cells: acc.into_iter().map(|((a, c), w)| (a, c, w)).collect() })
}

/// kd of a coupling of initial spaces of two complete configurations.
pub fn coupling_kd(x: &Configuration, y: &Configuration, c: &Coupling) -> Result<f64> {
    Ok(TwoFan::from_initial_coupling(x, y, &c.dense())?.kd())
}

/// Interval estimate of the asymptotic distance.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceInterval {
    pub lower: f64,
    pub upper: f64,
    /// Exact value when a closed form applies.
    pub closed_form: Option<f64>,
    pub notes: Vec<String>,
}

/// `|ent_*(X) - ent_*(Y)|_1`, a lower bound for both `k` and its asymptotic version.
pub fn entropy_gap(x: &Configuration, y: &Configuration) -> f64 {
    x.entropy_vector().distance(&y.entropy_vector())
}

/// Whether a configuration is a single uniform space.
fn uniform_size(x: &Configuration) -> Option<usize> {
    if x.shape().len() != 1 {
        return None;
    }
    let s = x.space(0);
    let sup = s.support();
    let w = &s.weights()[sup[0]];
    sup.iter().all(|&k| &s.weights()[k] == w).then_some(sup.len())
}

/// kd of the north-west corner coupling of `U_a` and `U_b`, counting mass
/// in units of `1/(ab)`.
fn uniform_corner_kd(a: u128, b: u128) -> f64 {
    let total = (a * b) as f64;
    let (mut row, mut col) = (b, a);
    let (mut i, mut j) = (0u128, 0u128);
    let mut h = 0.0;
    while i < a && j < b {
        let m = row.min(col);
        h += math::eta(m as f64 / total);
        row -= m;
        col -= m;
        if row == 0 {
            i += 1;
            row = b;
        }
        if col == 0 {
            j += 1;
            col = a;
        }
    }
    2.0 * h - math::ln(a as f64) - math::ln(b as f64)
}

pub fn aikd_interval(x: &Configuration, y: &Configuration, n_max: usize) -> Result<DistanceInterval> {
    aikd_interval_with(x, y, n_max, &HeuristicOptions::default())
}

pub fn aikd_interval_with(
    x: &Configuration,
    y: &Configuration,
    n_max: usize,
    opts: &HeuristicOptions,
) -> Result<DistanceInterval> {
    CouplingProblem::new(x, y)?;
    let lower = entropy_gap(x, y);
    let mut notes = Vec::new();
    let mut upper = f64::INFINITY;
    let mut closed_form = None;
    if let (Some(a), Some(b)) = (uniform_size(x), uniform_size(y)) {
        closed_form = Some(math::ln(a as f64).max(math::ln(b as f64)) - math::ln(a as f64).min(math::ln(b as f64)));
        notes.push(format!("uniform spaces U_{a}, U_{b}: distance equals the entropy gap"));
    }
    let x0 = x.initial_space()?.cardinality();
    let y0 = y.initial_space()?.cardinality();
    if x0.max(y0) <= 64 && crate::iso::is_isomorphic(x, y).unwrap_or(false) {
        closed_form = Some(0.0);
        upper = 0.0;
        notes.push("isomorphic".into());
    }
    let uniform = uniform_size(x).zip(uniform_size(y));
    for n in 1..=n_max.max(1) {
        if upper == 0.0 {
            break;
        }
        if let Some((a, b)) = uniform {
            // Powers of uniform spaces are uniform; couple them by the
            // north-west corner rule without materializing anything.
            let (a, b) = ((a as u128).pow(n as u32), (b as u128).pow(n as u32));
            let k = uniform_corner_kd(a, b);
            notes.push(format!("n={n}: k<={k:.9} (corner coupling of U_{a}, U_{b})"));
            upper = upper.min(k / n as f64);
            continue;
        }
        let cells = libm::pow(x0 as f64 * y0 as f64, n as f64);
        if n > 1 && cells > 4.0e6 {
            notes.push(format!("stopped before power {n}: too large"));
            break;
        }
        let (xn, yn) = (x.power(n), y.power(n));
        let (k, w) = intrinsic_k_with(&xn, &yn, Mode::Auto, opts)?;
        notes.push(format!("n={n}: k={k:.9} ({})", w.optimality.tag()));
        upper = upper.min(k / n as f64);
    }
    Ok(DistanceInterval { lower, upper: upper.max(lower), closed_form, notes })
}

/// Input to the slicing bound: configurations `X`, `Y` of the same complete
/// shape, joints of their initial spaces with single spaces `U` and `V`, and
/// a coupling `W` of `U` and `V`. All joints are dense row-major matrices.
#[derive(Debug, Clone)]
pub struct ThreeTents {
    pub x: Configuration,
    pub y: Configuration,
    pub xu: Vec<Rational>,
    pub u_len: usize,
    pub yv: Vec<Rational>,
    pub v_len: usize,
    pub w: Vec<Rational>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlicingReport {
    pub bound: f64,
    pub integral: f64,
    pub kd_term: f64,
    pub conditional_term: f64,
    pub all_slices_exact: bool,
}

impl ThreeTents {
    /// Both sides reduce to the same `U`, coupled diagonally.
    pub fn co_fan(x: Configuration, y: Configuration, fx: &[usize], fy: &[usize], u_len: usize) -> Result<Self> {
        let joint = |c: &Configuration, f: &[usize]| -> Result<Vec<Rational>> {
            let w = c.initial_space()?.weights();
            let mut m = vec![Rational::zero(); w.len() * u_len];
            for (a, wa) in w.iter().enumerate() {
                m[a * u_len + f[a]] += wa;
            }
            Ok(m)
        };
        let xu = joint(&x, fx)?;
        let yv = joint(&y, fy)?;
        let pu = marginal_cols(&xu, u_len);
        let mut w = vec![Rational::zero(); u_len * u_len];
        for (u, p) in pu.into_iter().enumerate() {
            w[u * u_len + u] = p;
        }
        Ok(Self { x, y, xu, u_len, yv, v_len: u_len, w })
    }
}

fn marginal_cols(m: &[Rational], cols: usize) -> Vec<Rational> {
    let mut out = vec![Rational::zero(); cols];
    for (k, v) in m.iter().enumerate() {
        out[k % cols] += v;
    }
    out
}

fn marginal_rows(m: &[Rational], cols: usize) -> Vec<Rational> {
    let rows = m.len() / cols;
    (0..rows).map(|r| m[r * cols..(r + 1) * cols].iter().sum()).collect()
}

fn slice(c: &Configuration, joint: &[Rational], cols: usize, u: usize) -> Result<Configuration> {
    let pu: Rational = (0..joint.len() / cols).map(|a| joint[a * cols + u].clone()).sum();
    let p0: Vec<Rational> = (0..joint.len() / cols).map(|a| &joint[a * cols + u] / &pu).collect();
    c.pushdown(&p0)
}

fn conditional_sum(c: &Configuration, joint: &[Rational], cols: usize) -> Result<f64> {
    let proj = c.projections()?;
    let mut total = 0.0;
    for (i, p) in proj.iter().enumerate() {
        let si = c.space(i).len();
        let mut key = Vec::with_capacity(joint.len());
        for k in 0..joint.len() {
            key.push(p[k / cols] * cols + k % cols);
        }
        let pushed = push_rational(joint, &key, si * cols);
        total += entropy_exact(&pushed) - c.space(i).entropy();
    }
    Ok(total)
}

/// Upper bound on `k(X, Y)` by slicing along `U <- W -> V`.
pub fn slicing_bound(t: &ThreeTents) -> Result<SlicingReport> {
    if t.x.shape() != t.y.shape() || !t.x.is_complete() {
        return Err(Error::NotComplete);
    }
    let px = t.x.initial_space()?.weights().to_vec();
    let py = t.y.initial_space()?.weights().to_vec();
    if marginal_rows(&t.xu, t.u_len) != px || marginal_rows(&t.yv, t.v_len) != py {
        return Err(Error::Invalid("joint does not match the initial space".into()));
    }
    let pu = marginal_cols(&t.xu, t.u_len);
    let pv = marginal_cols(&t.yv, t.v_len);
    if marginal_rows(&t.w, t.v_len) != pu || marginal_cols(&t.w, t.v_len) != pv {
        return Err(Error::Invalid("W does not couple U and V".into()));
    }
    let mut integral = 0.0;
    let mut all_exact = true;
    for (k, wk) in t.w.iter().enumerate() {
        if !wk.is_positive() {
            continue;
        }
        let (u, v) = (k / t.v_len, k % t.v_len);
        let xs = slice(&t.x, &t.xu, t.u_len, u)?;
        let ys = slice(&t.y, &t.yv, t.v_len, v)?;
        let (kv, w) = intrinsic_k(&xs, &ys, Mode::Auto)?;
        all_exact &= w.optimality == Optimality::ExactVertexEnumeration;
        integral += rational::to_f64(wk) * kv;
    }
    let kd_term = t.x.shape().len() as f64
        * (2.0 * entropy_exact(&t.w) - entropy_exact(&pu) - entropy_exact(&pv));
    let conditional_term = conditional_sum(&t.x, &t.xu, t.u_len)? + conditional_sum(&t.y, &t.yv, t.v_len)?;
    Ok(SlicingReport {
        bound: integral + kd_term + conditional_term,
        integral,
        kd_term,
        conditional_term,
        all_slices_exact: all_exact,
    })
}

/// `2 [[G]] (alpha ln|S_0| + h(alpha))` with `alpha = |p_0 - q_0|_1 / 2`,
/// for two distributions on the same configuration of sets.
pub fn local_estimate(x: &Configuration, q0: &[Rational]) -> Result<f64> {
    let init = x.initial_space()?;
    if q0.len() != init.len() {
        return Err(Error::Invalid("distribution has wrong length".into()));
    }
    let tv: Rational = init.weights().iter().zip(q0).map(|(a, b)| (a - b).abs()).sum();
    let alpha = rational::to_f64(&tv) / 2.0;
    let g = x.shape().len() as f64;
    Ok(2.0 * g * (alpha * math::ln(init.len() as f64) + math::binary_entropy(alpha)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LipschitzOp {
    TensorShift,
    Entropy,
    Restriction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub samples: usize,
    /// Largest `lhs - rhs` seen; non-positive when the inequality held everywhere.
    pub max_violation: f64,
}

/// Samples random small pairs and measures how far each Lipschitz
/// inequality is from failing.
pub fn lipschitz_audit(op: LipschitzOp, samples: usize, seed: u64) -> Result<AuditReport> {
    let mut rng = sample::rng(seed);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..samples {
        let v = match op {
            LipschitzOp::Entropy => {
                let x = sample::two_fan(&mut rng, 2, 2, 6);
                let y = sample::two_fan(&mut rng, 2, 3, 6);
                let (k, _) = intrinsic_k(&x, &y, Mode::Auto)?;
                entropy_gap(&x, &y) - k
            }
            LipschitzOp::TensorShift => {
                let n = rng.gen_range(1..=2usize);
                let x = Configuration::single(sample::space(&mut rng, n, 5));
                let y = Configuration::single(sample::space(&mut rng, 3, 5));
                let y2 = Configuration::single(sample::space(&mut rng, 3, 5));
                let (rhs, _) = intrinsic_k(&y, &y2, Mode::Exact)?;
                let (lhs, _) = intrinsic_k(&x.tensor(&y)?, &x.tensor(&y2)?, Mode::Auto)?;
                lhs - rhs
            }
            LipschitzOp::Restriction => {
                let x = sample::joint_fan(2, 2, &sample::distribution(&mut rng, 4, 6));
                let y = sample::joint_fan(2, 2, &sample::distribution(&mut rng, 4, 6));
                let chain = DiagramShape::chain(2);
                let (rx, ry) = (x.restrict(&chain, &[0, 1])?, y.restrict(&chain, &[0, 1])?);
                let (k, _) = intrinsic_k(&x, &y, Mode::Auto)?;
                let (kr, _) = intrinsic_k(&rx, &ry, Mode::Auto)?;
                kr - chain.len() as f64 * k
            }
        };
        worst = worst.max(v);
    }
    Ok(AuditReport { samples, max_violation: worst })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;
    use crate::space::ProbabilitySpace;

    fn single(n: usize) -> Configuration {
        Configuration::single(ProbabilitySpace::uniform(n))
    }

    #[test]
    fn k_u2_u4_is_ln2() {
        let (k, w) = intrinsic_k(&single(2), &single(4), Mode::Exact).unwrap();
        assert!((k - 2f64.ln()).abs() < 1e-12);
        assert_eq!(w.optimality, Optimality::ExactVertexEnumeration);
        let (kh, _) = intrinsic_k(&single(2), &single(4), Mode::Heuristic).unwrap();
        assert!((kh - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn self_distance_is_zero() {
        let x = Configuration::single(ProbabilitySpace::from_weights(vec![rat(1, 2), rat(1, 3), rat(1, 6)]).unwrap());
        let (k, w) = intrinsic_k(&x, &x, Mode::Exact).unwrap();
        assert!(k.abs() < 1e-12);
        assert_eq!(w.coupling.cells.len(), 3);
    }

    #[test]
    fn independent_coupling_kd() {
        let x = single(2);
        let y = single(3);
        let ind: Vec<Rational> = vec![rat(1, 6); 6];
        let f = TwoFan::from_initial_coupling(&x, &y, &ind).unwrap();
        assert!((f.kd() - (2f64.ln() + 3f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn snapping_produces_vertices() {
        let x = single(3);
        let y = Configuration::single(ProbabilitySpace::from_weights(vec![rat(1, 2), rat(1, 4), rat(1, 4)]).unwrap());
        let prob = CouplingProblem::new(&x, &y).unwrap();
        let mut m = vec![1.0 / 9.0; 9];
        for (b, w) in [0.5, 0.25, 0.25].iter().enumerate() {
            for a in 0..3 {
                m[a * 3 + b] = w / 3.0;
            }
        }
        let mut scratch = Vec::new();
        prob.snap_to_vertex(&mut m, &mut scratch);
        assert!(m.iter().filter(|&&v| v > 0.0).count() <= 5);
    }

    #[test]
    fn composition_with_identity() {
        let x = Configuration::single(ProbabilitySpace::from_weights(vec![rat(1, 2), rat(1, 2)]).unwrap());
        let y = Configuration::single(ProbabilitySpace::from_weights(vec![rat(1, 3), rat(2, 3)]).unwrap());
        let (_, w) = intrinsic_k(&x, &y, Mode::Exact).unwrap();
        let id = Coupling { rows: 2, cols: 2, cells: vec![(0, 0, rat(1, 3)), (1, 1, rat(2, 3))] };
        let c = compose_couplings(&w.coupling, &id, y.space(0).weights()).unwrap();
        assert_eq!(c.dense(), w.coupling.dense());
    }

    #[test]
    fn uniform_aikd() {
        let iv = aikd_interval(&single(6), &single(12), 4).unwrap();
        assert!((iv.lower - 2f64.ln()).abs() < 1e-12);
        assert!(iv.upper <= 2f64.ln() + 2.0 * 2f64.ln() / 4.0 + 1e-12);
        assert!((iv.closed_form.unwrap() - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn local_estimate_values() {
        let x = single(4);
        assert_eq!(local_estimate(&x, x.space(0).weights()).unwrap(), 0.0);
        let disjoint = Configuration::single(ProbabilitySpace::from_weights(vec![rat(1, 1), rat(0, 1)]).unwrap());
        let b = local_estimate(&disjoint, &[rat(0, 1), rat(1, 1)]).unwrap();
        assert!((b - 2.0 * 2f64.ln()).abs() < 1e-12);
    }
}
