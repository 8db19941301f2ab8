//! Dense two-phase simplex for small linear programs
//! `min c.x  s.t.  A_eq x = b_eq,  A_le x <= b_le,  x >= 0`.
use alloc::vec;
use alloc::vec::Vec;

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { value: f64, x: Vec<f64> },
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    pub c: Vec<f64>,
    pub eq: Vec<(Vec<f64>, f64)>,
    pub le: Vec<(Vec<f64>, f64)>,
}

impl LinearProgram {
    pub fn new(c: Vec<f64>) -> Self {
        Self { c, eq: Vec::new(), le: Vec::new() }
    }

    pub fn minimize(&self) -> LpOutcome {
        minimize(&self.c, &self.eq, &self.le)
    }
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn pivot(&mut self, r: usize, col: usize) {
        let p = self.rows[r][col];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        self.rhs[r] /= p;
        for i in 0..self.rows.len() {
            if i != r {
                let f = self.rows[i][col];
                if f != 0.0 {
                    for j in 0..self.rows[i].len() {
                        self.rows[i][j] -= f * self.rows[r][j];
                    }
                    self.rhs[i] -= f * self.rhs[r];
                }
            }
        }
        self.basis[r] = col;
    }

    /// Minimizes `cost` over the current feasible basis with Bland's rule,
    /// restricted to columns `allowed`. Returns false when unbounded.
    fn optimize(&mut self, cost: &[f64], allowed: usize) -> bool {
        loop {
            let reduced = |j: usize, t: &Tableau| {
                cost[j] - t.basis.iter().enumerate().map(|(i, &b)| cost[b] * t.rows[i][j]).sum::<f64>()
            };
            let Some(col) = (0..allowed).find(|&j| !self.basis.contains(&j) && reduced(j, self) < -EPS) else {
                return true;
            };
            let mut best: Option<(f64, usize)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][col];
                if a > EPS {
                    let ratio = self.rhs[i] / a;
                    let better = match best {
                        None => true,
                        Some((r, bi)) => ratio < r - EPS || (ratio <= r + EPS && self.basis[i] < self.basis[bi]),
                    };
                    if better {
                        best = Some((ratio, i));
                    }
                }
            }
            match best {
                Some((_, r)) => self.pivot(r, col),
                None => return false,
            }
        }
    }
}

pub fn minimize(c: &[f64], eq: &[(Vec<f64>, f64)], le: &[(Vec<f64>, f64)]) -> LpOutcome {
    let n = c.len();
    let m = eq.len() + le.len();
    let slack = le.len();
    let width = n + slack + m;
    let mut rows = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    for (k, (a, b)) in eq.iter().chain(le.iter()).enumerate() {
        let mut row = vec![0.0; width];
        row[..n].copy_from_slice(&a[..n]);
        if k >= eq.len() {
            row[n + k - eq.len()] = 1.0;
        }
        let mut b = *b;
        if b < 0.0 {
            for v in row.iter_mut() {
                *v = -*v;
            }
            b = -b;
        }
        row[n + slack + k] = 1.0;
        rows.push(row);
        rhs.push(b);
    }
    let mut t = Tableau { rows, rhs, basis: (0..m).map(|k| n + slack + k).collect() };
    let mut phase1 = vec![0.0; width];
    for v in phase1[n + slack..].iter_mut() {
        *v = 1.0;
    }
    t.optimize(&phase1, width);
    let infeas: f64 = t.basis.iter().zip(&t.rhs).filter(|(&b, _)| b >= n + slack).map(|(_, &r)| r).sum();
    if infeas > 1e-7 {
        return LpOutcome::Infeasible;
    }
    // Drive remaining artificial variables out of the basis.
    for r in 0..m {
        if t.basis[r] >= n + slack {
            if let Some(col) = (0..n + slack).find(|&j| t.rows[r][j].abs() > EPS) {
                t.pivot(r, col);
            }
        }
    }
    let mut cost = vec![0.0; width];
    cost[..n].copy_from_slice(c);
    for r in 0..m {
        if t.basis[r] >= n + slack {
            // Redundant row: keep the artificial at zero by forbidding it from growing.
            t.rows[r].iter_mut().for_each(|v| *v = 0.0);
            t.rows[r][t.basis[r]] = 1.0;
            t.rhs[r] = 0.0;
        }
    }
    if !t.optimize(&cost, n + slack) {
        return LpOutcome::Unbounded;
    }
    let mut x = vec![0.0; n];
    for (r, &b) in t.basis.iter().enumerate() {
        if b < n {
            x[b] = t.rhs[r];
        }
    }
    let value = c.iter().zip(&x).map(|(a, b)| a * b).sum();
    LpOutcome::Optimal { value, x }
}
