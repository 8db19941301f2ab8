//! Vertices of the transportation polytope `{m >= 0 : row sums p, column sums q}`.
//!
//! A coupling is a vertex exactly when its support graph (rows and columns
//! as nodes, positive cells as edges) is a forest. Vertices are found by a
//! breadth-first search over feasible spanning-tree bases, in integer units
//! of the common denominator. The margins are first perturbed (each row by
//! one unit, the last column by `|rows|` units, after scaling by
//! `|rows| + 1`) so that every pivot is non-degenerate; each basis of the
//! perturbed polytope is then also feasible for the original margins, and
//! every original vertex is the limit of one of them.
//!
//! When the scaled margins do not fit in `i128` a slower enumeration peels
//! leaves recursively instead.
use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::rc::Rc;
use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::rational::Rational;

pub const DEFAULT_VERTEX_CAP: usize = 36;

type Cells = Vec<u16>;
type Memo = BTreeMap<Vec<Rational>, Rc<BTreeSet<Cells>>>;

fn completions(rem: &[Rational], na: usize, memo: &mut Memo) -> Rc<BTreeSet<Cells>> {
    if let Some(r) = memo.get(rem) {
        return r.clone();
    }
    let nb = rem.len() - na;
    let mut out = BTreeSet::new();
    if rem.iter().all(|r| r.is_zero()) {
        out.insert(Vec::new());
    } else {
        for r in 0..na {
            if !rem[r].is_positive() {
                continue;
            }
            for c in 0..nb {
                if !rem[na + c].is_positive() {
                    continue;
                }
                let v = if rem[r] < rem[na + c] { rem[r].clone() } else { rem[na + c].clone() };
                let mut next = rem.to_vec();
                next[r] -= &v;
                next[na + c] -= &v;
                let cell = (r * nb + c) as u16;
                for tail in completions(&next, na, memo).iter() {
                    let mut full = tail.clone();
                    let pos = full.binary_search(&cell).unwrap_or_else(|e| e);
                    full.insert(pos, cell);
                    out.insert(full);
                }
            }
        }
    }
    let rc = Rc::new(out);
    memo.insert(rem.to_vec(), rc.clone());
    rc
}

/// Solves for the unique coupling supported on a forest of cells.
/// Returns `None` if the support does not carry a non-negative solution.
pub fn solve_forest(p: &[Rational], q: &[Rational], cells: &[(usize, usize)]) -> Option<Vec<Rational>> {
    let (na, nb) = (p.len(), q.len());
    let mut row_rem = p.to_vec();
    let mut col_rem = q.to_vec();
    let mut value: Vec<Option<Rational>> = vec![None; cells.len()];
    let mut open = cells.len();
    while open > 0 {
        let mut progressed = false;
        for line in 0..na + nb {
            let unknown: Vec<usize> = (0..cells.len())
                .filter(|&k| value[k].is_none())
                .filter(|&k| if line < na { cells[k].0 == line } else { cells[k].1 == line - na })
                .collect();
            if unknown.len() == 1 {
                let k = unknown[0];
                let v = if line < na { row_rem[line].clone() } else { col_rem[line - na].clone() };
                row_rem[cells[k].0] -= &v;
                col_rem[cells[k].1] -= &v;
                value[k] = Some(v);
                open -= 1;
                progressed = true;
            }
        }
        if !progressed {
            return None;
        }
    }
    if row_rem.iter().chain(&col_rem).any(|r| !r.is_zero()) {
        return None;
    }
    let mut m = vec![Rational::zero(); na * nb];
    for (k, &(r, c)) in cells.iter().enumerate() {
        let v = value[k].take().unwrap();
        if v.is_negative() {
            return None;
        }
        m[r * nb + c] = v;
    }
    Some(m)
}

/// All vertices of the transportation polytope of `p` and `q`, as dense
/// `|p| x |q|` matrices, sorted by support pattern. Zero-weight rows and
/// columns are carried along as zero lines.
pub fn coupling_vertices(p: &[Rational], q: &[Rational], cap: usize) -> Result<Vec<Vec<Rational>>> {
    let sa: Vec<usize> = (0..p.len()).filter(|&i| p[i].is_positive()).collect();
    let sb: Vec<usize> = (0..q.len()).filter(|&j| q[j].is_positive()).collect();
    if sa.len() * sb.len() > cap {
        return Err(Error::Budget {
            what: "coupling cells",
            size: (sa.len() * sb.len()) as u128,
            cap: cap as u128,
        });
    }
    let mut rem: Vec<Rational> = sa.iter().map(|&i| p[i].clone()).collect();
    rem.extend(sb.iter().map(|&j| q[j].clone()));
    let (ps, qs) = (&rem[..sa.len()], &rem[sa.len()..]);
    let nb = sb.len();
    let supports: Vec<Cells> = match tree_search(ps, qs) {
        Some((s, _)) => s.into_iter().map(|(c, _)| c).collect(),
        None => {
            let mut memo = Memo::new();
            completions(&rem, sa.len(), &mut memo).iter().cloned().collect()
        }
    };
    let mut out = Vec::with_capacity(supports.len());
    for cells in supports.iter() {
        let pairs: Vec<(usize, usize)> = cells.iter().map(|&c| (c as usize / nb, c as usize % nb)).collect();
        let small = solve_forest(ps, qs, &pairs).expect("peeled supports are feasible forests");
        let mut full = vec![Rational::zero(); p.len() * q.len()];
        for (k, v) in small.into_iter().enumerate() {
            if !v.is_zero() {
                full[sa[k / nb] * q.len() + sb[k % nb]] = v;
            }
        }
        out.push(full);
    }
    Ok(out)
}

/// Margins as integers in units of their common denominator.
fn integer_margins(p: &[Rational], q: &[Rational]) -> Option<(Vec<i128>, Vec<i128>, i128)> {
    let d = crate::rational::lcm_all(p.iter().chain(q));
    let scale = |r: &Rational| -> Option<i128> { (r.numer() * (&d / r.denom())).to_i128() };
    let rows = p.iter().map(scale).collect::<Option<Vec<_>>>()?;
    let cols = q.iter().map(scale).collect::<Option<Vec<_>>>()?;
    // Leave room for the perturbation and for sums of cells.
    let bound = BigInt::from(i128::MAX / 4096);
    (d <= bound).then(|| (rows, cols, d.to_i128().unwrap()))
}

/// Values of the basis `mask` (a spanning tree on rows and columns), by
/// peeling leaves.
fn solve_tree(mask: u64, rows: &[i128], cols: &[i128]) -> Vec<i128> {
    let (na, nb) = (rows.len(), cols.len());
    let mut rr = rows.to_vec();
    let mut cr = cols.to_vec();
    let mut deg = vec![0usize; na + nb];
    let mut open: Vec<usize> = (0..na * nb).filter(|&k| mask >> k & 1 == 1).collect();
    for &k in &open {
        deg[k / nb] += 1;
        deg[na + k % nb] += 1;
    }
    let mut val = vec![0i128; na * nb];
    while !open.is_empty() {
        let pos = open
            .iter()
            .position(|&k| deg[k / nb] == 1 || deg[na + k % nb] == 1)
            .expect("a tree has a leaf");
        let k = open.swap_remove(pos);
        let (r, c) = (k / nb, k % nb);
        let v = if deg[r] == 1 { rr[r] } else { cr[c] };
        val[k] = v;
        rr[r] -= v;
        cr[c] -= v;
        deg[r] -= 1;
        deg[na + c] -= 1;
    }
    val
}

/// A spanning tree on `na` row nodes and `nb` column nodes, rooted at row 0.
struct RootedTree {
    parent: Vec<usize>,
    /// Cell joining a node to its parent.
    up: Vec<usize>,
    depth: Vec<usize>,
}

impl RootedTree {
    fn new(mask: u64, na: usize, nb: usize) -> Self {
        let n = na + nb;
        let mut parent = vec![usize::MAX; n];
        let mut up = vec![usize::MAX; n];
        let mut depth = vec![0; n];
        let mut stack = vec![0usize];
        parent[0] = 0;
        while let Some(u) = stack.pop() {
            let mut visit = |cell: usize, v: usize, stack: &mut Vec<usize>| {
                if mask >> cell & 1 == 1 && parent[v] == usize::MAX {
                    parent[v] = u;
                    up[v] = cell;
                    depth[v] = depth[u] + 1;
                    stack.push(v);
                }
            };
            if u < na {
                for j in 0..nb {
                    visit(u * nb + j, na + j, &mut stack);
                }
            } else {
                for i in 0..na {
                    visit(i * nb + (u - na), i, &mut stack);
                }
            }
        }
        Self { parent, up, depth }
    }

    /// Cells of the path from node `a` to node `b`, in order.
    fn path(&self, mut a: usize, mut b: usize, out: &mut Vec<usize>) {
        out.clear();
        let mut tail = Vec::new();
        while a != b {
            if self.depth[a] >= self.depth[b] {
                out.push(self.up[a]);
                a = self.parent[a];
            } else {
                tail.push(self.up[b]);
                b = self.parent[b];
            }
        }
        out.extend(tail.into_iter().rev());
    }
}

/// Breadth-first search over the bases of the perturbed polytope. Returns
/// each distinct positive support of the original margins with its values,
/// in units of `1 / denominator`, sorted by support.
fn tree_search(p: &[Rational], q: &[Rational]) -> Option<(Vec<(Cells, Vec<i128>)>, i128)> {
    let (na, nb) = (p.len(), q.len());
    if na * nb > 64 || na == 0 || nb == 0 {
        return None;
    }
    let (rows, cols, denom) = integer_margins(p, q)?;
    let k = na as i128 + 1;
    let prow: Vec<i128> = rows.iter().map(|&v| v * k + 1).collect();
    let mut pcol: Vec<i128> = cols.iter().map(|&v| v * k).collect();
    pcol[nb - 1] += na as i128;
    // North-west corner basis of the perturbed margins.
    let (mut rr, mut cr) = (prow.clone(), pcol.clone());
    let (mut i, mut j) = (0, 0);
    let mut start = 0u64;
    loop {
        let v = rr[i].min(cr[j]);
        start |= 1 << (i * nb + j);
        rr[i] -= v;
        cr[j] -= v;
        if i == na - 1 && j == nb - 1 {
            break;
        }
        if rr[i] == 0 && i < na - 1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    let mut seen = BTreeSet::from([start]);
    let mut queue = VecDeque::from([start]);
    let mut found: BTreeMap<u64, Vec<i128>> = BTreeMap::new();
    let mut path = Vec::new();
    while let Some(basis) = queue.pop_front() {
        let pv = solve_tree(basis, &prow, &pcol);
        let ov = solve_tree(basis, &rows, &cols);
        let support = (0..na * nb).filter(|&c| ov[c] > 0).fold(0u64, |m, c| m | 1 << c);
        found.entry(support).or_insert_with(|| ov.iter().copied().filter(|&v| v > 0).collect());
        let tree = RootedTree::new(basis, na, nb);
        for e in 0..na * nb {
            if basis >> e & 1 == 1 {
                continue;
            }
            tree.path(e / nb, na + e % nb, &mut path);
            // Cells at even positions lose mass when `e` enters.
            let leave = path.iter().step_by(2).copied().min_by_key(|&c| (pv[c], c)).expect("non-empty path");
            let next = (basis | 1 << e) & !(1 << leave);
            if seen.insert(next) {
                queue.push_back(next);
            }
        }
    }
    let mut list: Vec<(Cells, Vec<i128>)> = found
        .into_iter()
        .map(|(mask, vals)| ((0..na * nb).filter(|&c| mask >> c & 1 == 1).map(|c| c as u16).collect(), vals))
        .collect();
    list.sort();
    Some((list, denom))
}

/// Every vertex on the supports of `p` and `q`, as its sorted list of
/// positive cells `r * |supp q| + c` with floating values. Use
/// [`solve_forest`] to recover the exact coupling of a support.
pub fn vertex_supports(p: &[Rational], q: &[Rational], cap: usize) -> Result<Vec<(Vec<usize>, Vec<f64>)>> {
    let ps: Vec<Rational> = p.iter().filter(|v| v.is_positive()).cloned().collect();
    let qs: Vec<Rational> = q.iter().filter(|v| v.is_positive()).cloned().collect();
    if ps.len() * qs.len() > cap {
        return Err(Error::Budget {
            what: "coupling cells",
            size: (ps.len() * qs.len()) as u128,
            cap: cap as u128,
        });
    }
    if let Some((list, denom)) = tree_search(&ps, &qs) {
        let d = denom as f64;
        return Ok(list
            .into_iter()
            .map(|(cells, vals)| (cells.into_iter().map(usize::from).collect(), vals.into_iter().map(|v| v as f64 / d).collect()))
            .collect());
    }
    let nb = qs.len();
    let mut rem = ps.clone();
    rem.extend(qs.iter().cloned());
    let mut memo = Memo::new();
    let supports = completions(&rem, ps.len(), &mut memo);
    Ok(supports
        .iter()
        .map(|cells| {
            let pairs: Vec<(usize, usize)> = cells.iter().map(|&c| (c as usize / nb, c as usize % nb)).collect();
            let m = solve_forest(&ps, &qs, &pairs).expect("peeled supports are feasible forests");
            let idx: Vec<usize> = cells.iter().map(|&c| c as usize).collect();
            let vals = idx.iter().map(|&k| crate::rational::to_f64(&m[k])).collect();
            (idx, vals)
        })
        .collect())
}

/// Sorted list of positive cells, used for deterministic tie-breaking.
pub fn support_pattern(m: &[Rational]) -> Vec<usize> {
    (0..m.len()).filter(|&k| m[k].is_positive()).collect()
}
