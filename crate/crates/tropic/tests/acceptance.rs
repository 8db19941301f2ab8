//! Acceptance suite: one line per criterion, `PASS` or `FAIL`, with timing.
//!
//! Expected values come from oracles written here (plain float entropy sums,
//! factorials, brute-force grids, Sinkhorn scaling) rather than from the
//! library under test.
use std::process::Command;
use std::time::{Duration, Instant};

use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;

use tropic_core::aep::{aep_constant, homogeneous_approximation, lagging_bound, lagging_fan, type_distance_bound, FlaggedConfiguration};
use tropic_core::config::Configuration;
use tropic_core::infoopt::{
    cell_fan, example1_cells, example2_cells, intro_problem, io_solve, rectangle_partition_optimum, transport_extension,
    ExtensionKernel, IoOptions,
};
use tropic_core::iso::is_isomorphic;
use tropic_core::metric::{aikd_interval, intrinsic_k, local_estimate, slicing_bound, Mode, ThreeTents};
use tropic_core::rational::{rat, Rational};
use tropic_core::sample::{self, SampleRng};
use tropic_core::space::{divergence, total_variation, ProbabilitySpace};
use tropic_core::tropical::{defect, mixture, mixture_bound_audit, ConfigSequence, MarkovChain};
use tropic_core::types;
use tropic_core::metric::AUTO_EXACT_CELLS;

type Outcome = Result<String, String>;

fn main() {
    let criteria: Vec<(u32, &str, Duration, fn() -> Outcome)> = vec![
        (1, "entropy calculus", secs(1), entropy_calculus),
        (2, "Shannon and Pinsker", secs(5), shannon_pinsker),
        (3, "method of types", secs(10), method_of_types),
        (4, "exact metric", secs(60), exact_metric),
        (5, "vertex property", secs(30), vertex_property),
        (6, "closed forms", secs(60), closed_forms),
        (7, "bound dominance", secs(120), bound_dominance),
        (8, "AEP certificates", secs(60), aep_certificates),
        (9, "IO worked example", secs(20), io_example),
        (10, "extension transport", secs(60), extension_transport),
        (11, "mixtures", secs(60), mixtures),
        (12, "Markov tropicalization", secs(5), markov),
        (13, "determinism", secs(120), determinism),
    ];
    let mut failed = 0;
    for (id, name, limit, check) in criteria {
        let start = Instant::now();
        let result = check();
        let took = start.elapsed();
        let (ok, detail) = match result {
            Ok(d) if took <= limit => (true, d),
            Ok(d) => (false, format!("{d}; took {took:.2?} > {limit:?}")),
            Err(e) => (false, e),
        };
        failed += usize::from(!ok);
        println!("criterion {id:>2} {:<4} {name} ({took:.2?}): {detail}", if ok { "PASS" } else { "FAIL" });
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn f(r: &Rational) -> f64 {
    r.to_f64().unwrap()
}

/// Shannon entropy in nats, the oracle for every entropy below.
fn h(w: &[f64]) -> f64 {
    w.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum()
}

fn hr(w: &[Rational]) -> f64 {
    h(&w.iter().map(f).collect::<Vec<_>>())
}

fn h2(a: f64) -> f64 {
    h(&[a, 1.0 - a])
}

fn single(rng: &mut SampleRng, n: usize) -> Configuration {
    Configuration::single(sample::space(rng, n, 6))
}

fn k_exact(x: &Configuration, y: &Configuration) -> Result<f64, String> {
    intrinsic_k(x, y, Mode::Exact).map(|r| r.0).map_err(|e| e.to_string())
}

fn cells(x: &Configuration, y: &Configuration) -> usize {
    x.initial_space().unwrap().len() * y.initial_space().unwrap().len()
}

fn entropy_calculus() -> Outcome {
    let mut rng = sample::rng(1);
    let mut worst = 0f64;
    for n in 1..=1000usize {
        let u = ProbabilitySpace::uniform(n);
        worst = worst.max((u.entropy() - (n as f64).ln()).abs());
        let k = rng.gen_range(1..=3);
        let q = sample::space(&mut rng, k, 7);
        let t = u.tensor(&q);
        worst = worst.max((t.entropy() - (n as f64).ln() - hr(q.weights())).abs());
    }
    ensure(worst <= 1e-12, || format!("max deviation {worst:e}"))?;
    Ok(format!("max deviation {worst:.1e} over n <= 1000"))
}

fn shannon_pinsker() -> Outcome {
    let mut rng = sample::rng(2);
    let mut shannon = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let n0 = rng.gen_range(1..=8);
        let d = sample::minimal_diamond(&mut rng, n0, 9);
        let hs: Vec<f64> = d.spaces().iter().map(|s| hr(s.weights())).collect();
        shannon = shannon.max(hs[0] + hs[3] - hs[1] - hs[2]);
    }
    let mut pinsker = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=8);
        let (p, q) = (sample::space(&mut rng, n, 9), sample::space(&mut rng, n, 9));
        let (pw, qw): (Vec<f64>, Vec<f64>) = (p.weights().iter().map(f).collect(), q.weights().iter().map(f).collect());
        let l1: f64 = pw.iter().zip(&qw).map(|(a, b)| (a - b).abs()).sum();
        let d: f64 = pw.iter().zip(&qw).filter(|(a, _)| **a > 0.0).map(|(a, b)| a * (a / b).ln()).sum();
        ensure((l1 - total_variation(&p, &q).unwrap()).abs() < 1e-12, || "total variation disagrees with oracle".into())?;
        ensure((d - divergence(&p, &q).unwrap()).abs() < 1e-12, || "divergence disagrees with oracle".into())?;
        pinsker = pinsker.max(l1 - (2.0 * d).sqrt());
    }
    ensure(shannon <= 1e-9 && pinsker <= 1e-9, || format!("violations: Shannon {shannon:e}, Pinsker {pinsker:e}"))?;
    Ok(format!("max Shannon residual {shannon:.1e}, max Pinsker residual {pinsker:.1e}"))
}

/// Compositions of `n` into `s` non-negative parts.
fn compositions(s: usize, n: u64) -> Vec<Vec<u64>> {
    if s == 1 {
        return vec![vec![n]];
    }
    (0..=n)
        .flat_map(|c| compositions(s - 1, n - c).into_iter().map(move |mut rest| {
            rest.insert(0, c);
            rest
        }))
        .collect()
}

fn multinomial(c: &[u64]) -> u128 {
    let fact = |k: u64| (1..=k as u128).product::<u128>();
    fact(c.iter().sum()) / c.iter().map(|&k| fact(k)).product::<u128>()
}

fn pow(p: &Rational, k: u64) -> Rational {
    (0..k).fold(Rational::one(), |acc, _| acc * p)
}

fn method_of_types() -> Outcome {
    let mut rng = sample::rng(3);
    let mut checked = 0;
    for s in 1..=3usize {
        for n in 1..=8u64 {
            let p = sample::distribution(&mut rng, s, 5);
            let pf: Vec<f64> = p.iter().map(f).collect();
            let nf = n as f64;
            let mut total = Rational::zero();
            let mut tails = [Rational::zero(), Rational::zero(), Rational::zero()];
            let radii = [0.05, 0.2, 0.5];
            let lattice = compositions(s, n);
            ensure(types::lattice_count(s, n) == (lattice.len() as u64).into(), || format!("lattice size at s={s}, n={n}"))?;
            for c in &lattice {
                let pi = types::from_counts(c);
                let q: Vec<f64> = c.iter().map(|&k| k as f64 / nf).collect();
                let ts = types::type_space(&pi, n, types::MATERIALIZATION_CAP).map_err(|e| e.to_string())?;
                let card = multinomial(c);
                ensure(ts.cardinality == card.into(), || format!("|T({c:?})| = {} != {card}", ts.cardinality))?;
                let materialized = ts.space.as_ref().map_or(0, |sp| sp.len() as u128);
                ensure(materialized == card, || format!("materialized {materialized} sequences for {c:?}"))?;
                let hq = h(&q);
                let d: f64 = q.iter().zip(&pf).filter(|(a, _)| **a > 0.0).map(|(a, b)| a * (a / b).ln()).sum();
                // Probability of any one sequence of type q.
                let seq: Rational = c.iter().zip(&p).map(|(&k, pa)| pow(pa, k)).product();
                ensure((f(&seq).ln() + nf * (hq + d)).abs() < 1e-9, || format!("sequence mass at {c:?}"))?;
                let log_card = (card as f64).ln();
                ensure(log_card <= nf * hq + 1e-12, || format!("|T| upper bound at {c:?}"))?;
                ensure(log_card >= nf * hq - s as f64 * (nf + 1.0).ln() - 1e-12, || format!("|T| lower bound at {c:?}"))?;
                let tau = seq * Rational::from_integer(card.into());
                ensure(types::type_mass(&p, &pi, n).map_err(|e| e.to_string())? == tau, || format!("type mass at {c:?}"))?;
                let tau_f = f(&tau);
                ensure(tau_f <= (-nf * d).exp() * (1.0 + 1e-12), || format!("tau upper bound at {c:?}"))?;
                ensure(tau_f >= (-nf * d - s as f64 * (nf + 1.0).ln()).exp() * (1.0 - 1e-12), || format!("tau lower bound at {c:?}"))?;
                for (tail, &r) in tails.iter_mut().zip(&radii) {
                    if d >= r - 1e-12 {
                        *tail += &tau;
                    }
                }
                total += tau;
                checked += 1;
            }
            ensure(total.is_one(), || format!("sum of type masses is {total} at s={s}, n={n}"))?;
            for (tail, &r) in tails.iter().zip(&radii) {
                let rep = types::sanov_report(&p, r, n).map_err(|e| e.to_string())?;
                ensure(&rep.tail == tail, || format!("Sanov tail {} != oracle {tail}", rep.tail))?;
                let oracle_bound = (-nf * r + s as f64 * (nf + 1.0).ln()).exp();
                ensure(f(tail) <= oracle_bound, || format!("Sanov tail above bound at s={s}, n={n}, r={r}"))?;
            }
        }
    }
    Ok(format!("{checked} type classes checked"))
}

/// Brute-force minimum of kd over couplings with entries in `(1/den) Z`.
fn grid_kd(x: &Configuration, y: &Configuration, den: i64) -> f64 {
    let (px, py) = (x.projections().unwrap(), y.projections().unwrap());
    let pw: Vec<i64> = x.initial_space().unwrap().weights().iter().map(|w| (w * Rational::from_integer(den.into())).to_integer().try_into().unwrap()).collect();
    let qw: Vec<i64> = y.initial_space().unwrap().weights().iter().map(|w| (w * Rational::from_integer(den.into())).to_integer().try_into().unwrap()).collect();
    let (n, m) = (pw.len(), qw.len());
    let hx: Vec<f64> = x.spaces().iter().map(|s| hr(s.weights())).collect();
    let hy: Vec<f64> = y.spaces().iter().map(|s| hr(s.weights())).collect();
    let kd = |cellv: &[i64]| -> f64 {
        let mut total = 0.0;
        for i in 0..hx.len() {
            let mut acc = std::collections::BTreeMap::new();
            for a in 0..n {
                for b in 0..m {
                    if cellv[a * m + b] > 0 {
                        *acc.entry((px[i][a], py[i][b])).or_insert(0) += cellv[a * m + b];
                    }
                }
            }
            let w: Vec<f64> = acc.values().map(|&v| v as f64 / den as f64).collect();
            total += 2.0 * h(&w) - hx[i] - hy[i];
        }
        total
    };
    fn rec(k: usize, m: usize, row: &mut [i64], col: &mut [i64], cur: &mut Vec<i64>, best: &mut f64, kd: &dyn Fn(&[i64]) -> f64) {
        if k == cur.len() {
            if row.iter().chain(col.iter()).all(|&v| v == 0) {
                *best = best.min(kd(cur));
            }
            return;
        }
        let (a, b) = (k / m, k % m);
        let hi = row[a].min(col[b]);
        let lo = if b == m - 1 { row[a] } else { 0 };
        if lo > hi {
            return;
        }
        for v in lo..=hi {
            row[a] -= v;
            col[b] -= v;
            cur[k] = v;
            rec(k + 1, m, row, col, cur, best, kd);
            row[a] += v;
            col[b] += v;
        }
        cur[k] = 0;
    }
    let mut best = f64::INFINITY;
    rec(0, m, &mut pw.clone(), &mut qw.clone(), &mut vec![0; n * m], &mut best, &kd);
    best
}

fn eighths(rng: &mut SampleRng, n: usize) -> Vec<Rational> {
    loop {
        let cuts: Vec<i64> = (0..n).map(|_| rng.gen_range(0..=8)).collect();
        if cuts.iter().sum::<i64>() == 8 && cuts.iter().all(|&c| c > 0) {
            return cuts.iter().map(|&c| rat(c, 8)).collect();
        }
    }
}

fn exact_metric() -> Outcome {
    let u = |n| Configuration::single(ProbabilitySpace::uniform(n));
    let k = k_exact(&u(2), &u(4))?;
    ensure((k - 2f64.ln()).abs() <= 1e-9, || format!("k(U2, U4) = {k}"))?;
    let mut rng = sample::rng(4);
    let mut pairs = vec![(u(2), u(4))];
    for _ in 0..8 {
        let (a, b) = (rng.gen_range(1..=4), rng.gen_range(1..=4));
        pairs.push((
            Configuration::single(ProbabilitySpace::from_weights(eighths(&mut rng, a)).unwrap()),
            Configuration::single(ProbabilitySpace::from_weights(eighths(&mut rng, b)).unwrap()),
        ));
    }
    for _ in 0..6 {
        let (w1, w2) = (eighths(&mut rng, 4), eighths(&mut rng, 4));
        pairs.push((sample::joint_fan(2, 2, &w1), sample::joint_fan(2, 2, &w2)));
    }
    let mut grid_gap = 0f64;
    for (x, y) in &pairs {
        let (e, g) = (k_exact(x, y)?, grid_kd(x, y, 8));
        ensure(g >= e - 1e-9 && g - e <= 0.02, || format!("grid {g} vs exact {e}"))?;
        grid_gap = grid_gap.max(g - e);
    }
    let pool: Vec<Configuration> = (0..20)
        .map(|_| loop {
            let (a, b) = (rng.gen_range(1..=3), rng.gen_range(1..=3));
            let c = sample::two_fan(&mut rng, a, b, 6);
            if c.initial_space().unwrap().len() <= 5 {
                return c;
            }
        })
        .collect();
    let n = pool.len();
    let mut kmat = vec![0.0; n * n];
    for a in 0..n {
        for b in 0..n {
            kmat[a * n + b] = k_exact(&pool[a], &pool[b])?;
        }
    }
    let (mut asym, mut tri) = (0f64, f64::NEG_INFINITY);
    for a in 0..n {
        for b in 0..n {
            asym = asym.max((kmat[a * n + b] - kmat[b * n + a]).abs());
            for c in 0..n {
                tri = tri.max(kmat[a * n + c] - kmat[a * n + b] - kmat[b * n + c]);
            }
        }
    }
    ensure(asym <= 1e-9 && tri <= 1e-9, || format!("asymmetry {asym:e}, triangle excess {tri:e}"))?;
    Ok(format!("k(U2,U4) = {k:.12}; grid gap {grid_gap:.1e} on {} pairs; asymmetry {asym:.1e}, triangle excess {tri:.1e}", pairs.len()))
}

/// Sinkhorn scaling of a random positive matrix onto the margins `p`, `q`.
fn sinkhorn(rng: &mut SampleRng, p: &[f64], q: &[f64]) -> Vec<f64> {
    let (n, m) = (p.len(), q.len());
    let mut a: Vec<f64> = (0..n * m).map(|_| rng.gen_range(0.001f64..1.0).powi(3)).collect();
    for _ in 0..2000 {
        for r in 0..n {
            let s: f64 = a[r * m..(r + 1) * m].iter().sum();
            a[r * m..(r + 1) * m].iter_mut().for_each(|v| *v *= p[r] / s);
        }
        let mut err = 0f64;
        for c in 0..m {
            let s: f64 = (0..n).map(|r| a[r * m + c]).sum();
            err = err.max((s - q[c]).abs());
            (0..n).for_each(|r| a[r * m + c] *= q[c] / s);
        }
        if err < 1e-14 {
            break;
        }
    }
    a
}

fn vertex_property() -> Outcome {
    let mut rng = sample::rng(5);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..200 {
        let (na, nb) = (rng.gen_range(1..=4), rng.gen_range(1..=4));
        let (x, y) = (single(&mut rng, na), single(&mut rng, nb));
        let vmin = k_exact(&x, &y)?;
        let p: Vec<f64> = x.space(0).weights().iter().map(f).collect();
        let q: Vec<f64> = y.space(0).weights().iter().map(f).collect();
        let base = h(&p) + h(&q);
        for _ in 0..10_000 {
            let m = sinkhorn(&mut rng, &p, &q);
            worst = worst.max(vmin - (2.0 * h(&m) - base));
        }
    }
    ensure(worst <= 1e-9, || format!("interior coupling below the vertex minimum by {worst:e}"))?;
    Ok(format!("vertex minimum - interior kd <= {worst:.2e} over 2e6 couplings"))
}

fn closed_forms() -> Outcome {
    let u = |n| Configuration::single(ProbabilitySpace::uniform(n));
    let iv = aikd_interval(&u(6), &u(12), 4).map_err(|e| e.to_string())?;
    let ln2 = 2f64.ln();
    ensure((iv.lower - ln2).abs() <= 1e-12, || format!("lower {}", iv.lower))?;
    ensure(iv.upper <= ln2 + 2.0 * ln2 / 4.0 + 1e-12, || format!("upper {}", iv.upper))?;
    Ok(format!("interval [{:.9}, {:.9}]", iv.lower, iv.upper))
}

fn counts_to_joint(counts: &[u64], n: u64) -> Vec<Rational> {
    counts.iter().map(|&c| rat(c as i64, n as i64)).collect()
}

fn bound_dominance() -> Outcome {
    let mut rng = sample::rng(7);
    // Slicing through two-atom reductions with the independent coupling.
    let mut slicing = f64::NEG_INFINITY;
    for _ in 0..100 {
        let (nx, ny) = (rng.gen_range(2..=4), rng.gen_range(2..=4));
        let (x, y) = (single(&mut rng, nx), single(&mut rng, ny));
        let fx: Vec<usize> = (0..nx).map(|a| if a < 2 { a } else { rng.gen_range(0..2) }).collect();
        let fy: Vec<usize> = (0..ny).map(|a| if a < 2 { a } else { rng.gen_range(0..2) }).collect();
        let joint = |c: &Configuration, fm: &[usize]| {
            let mut m = vec![Rational::zero(); fm.len() * 2];
            for (a, w) in c.space(0).weights().iter().enumerate() {
                m[a * 2 + fm[a]] += w;
            }
            m
        };
        let (xu, yv) = (joint(&x, &fx), joint(&y, &fy));
        let col = |m: &[Rational], u: usize| -> Rational { m.iter().skip(u).step_by(2).sum() };
        let w = (0..4).map(|k| col(&xu, k / 2) * col(&yv, k % 2)).collect();
        let t = ThreeTents { x: x.clone(), y: y.clone(), xu, u_len: 2, yv, v_len: 2, w };
        let b = slicing_bound(&t).map_err(|e| e.to_string())?.bound;
        slicing = slicing.max(k_exact(&x, &y)? - b);
    }
    // Local estimate between two distributions on the same sets.
    let mut local = f64::NEG_INFINITY;
    for i in 0..100 {
        let x = if i % 2 == 0 {
            let n = rng.gen_range(2..=5);
            single(&mut rng, n)
        } else {
            sample::joint_fan(2, 2, &sample::distribution(&mut rng, 4, 6))
        };
        let q = sample::distribution(&mut rng, x.initial_space().unwrap().len(), 6);
        let y = x.pushdown(&q).map_err(|e| e.to_string())?;
        local = local.max(k_exact(&x, &y)? - local_estimate(&x, &q).map_err(|e| e.to_string())?);
    }
    // Lagging fans of flagged single spaces.
    let (mut lagging, mut lag_n) = (f64::NEG_INFINITY, 0);
    while lag_n < 100 {
        let m = rng.gen_range(2..=3);
        let n = rng.gen_range(2..=4u64);
        let mut counts = vec![0u64; 2 * m];
        for _ in 0..n {
            counts[rng.gen_range(0..2 * m)] += 1;
        }
        if (0..m).any(|a| counts[a] + counts[m + a] == 0) {
            continue;
        }
        let x = Configuration::single(ProbabilitySpace::uniform(m));
        let fc = FlaggedConfiguration::new(x, counts_to_joint(&counts, n)).map_err(|e| e.to_string())?;
        let fan = lagging_fan(&fc, n).map_err(|e| e.to_string())?;
        if cells(&fan.left, &fan.right) > AUTO_EXACT_CELLS {
            continue;
        }
        let b = lagging_bound(&fc, n).map_err(|e| e.to_string())?;
        lagging = lagging.max(k_exact(&fan.left, &fan.right)? - b).max(fan.kd() - b);
        lag_n += 1;
    }
    // Distances between type configurations.
    let (mut typed, mut typed_n) = (f64::NEG_INFINITY, 0);
    while typed_n < 100 {
        let s = rng.gen_range(2..=3);
        let n = rng.gen_range(2..=5u64);
        let draw = |rng: &mut SampleRng| -> Vec<u64> {
            let mut c = vec![0u64; s];
            for _ in 0..n {
                c[rng.gen_range(0..s)] += 1;
            }
            c
        };
        let (cp, cq) = (draw(&mut rng), draw(&mut rng));
        let sp = Configuration::single(sample::space(&mut rng, s, 5));
        let (p0, q0) = (types::from_counts(&cp), types::from_counts(&cq));
        let tp = types::type_of_configuration(&sp, &p0, n, types::MATERIALIZATION_CAP).map_err(|e| e.to_string())?;
        let tq = types::type_of_configuration(&sp, &q0, n, types::MATERIALIZATION_CAP).map_err(|e| e.to_string())?;
        if cells(&tp, &tq) > AUTO_EXACT_CELLS {
            continue;
        }
        let b = type_distance_bound(&sp, &p0, &q0, n).map_err(|e| e.to_string())?;
        typed = typed.max(k_exact(&tp, &tq)? - b);
        typed_n += 1;
    }
    let worst = slicing.max(local).max(lagging).max(typed);
    ensure(worst <= 1e-9, || format!("k - bound: slicing {slicing:e}, local {local:e}, lagging {lagging:e}, types {typed:e}"))?;
    Ok(format!("max k - bound: slicing {slicing:.3}, local {local:.3}, lagging {lagging:.3}, types {typed:.3} (100 each)"))
}

fn aep_certificates() -> Outcome {
    let mut rng = sample::rng(8);
    let binary = sample::joint_fan(2, 2, &sample::distribution(&mut rng, 4, 9));
    let fans = [("example 1", cell_fan(&example1_cells()).unwrap()), ("random binary", binary)];
    let mut worst_ratio = 0f64;
    for (name, x) in &fans {
        let s = x.initial_space().unwrap().support().len();
        let g = x.shape().len();
        let (sf, gf) = (s as f64, g as f64);
        let kk = sf + 2.0 * (sf + 1.0).sqrt();
        let c = gf * (12.0 * sf + 2.0 * sf.ln() + 2.0 * kk * (sf.ln() + 3.0));
        ensure((c - aep_constant(s, g)).abs() <= 1e-9 * c, || format!("{name}: documented constant differs"))?;
        for n in [4u64, 8, 16, 32] {
            let cert = homogeneous_approximation(x, n).map_err(|e| e.to_string())?;
            let nf = n as f64;
            let budget = c * (nf.ln().powi(3) / nf).sqrt();
            ensure((cert.budget_bound - budget).abs() <= 1e-9 * budget, || format!("{name}, n={n}: budget {}", cert.budget_bound))?;
            ensure(cert.upper_bound <= budget, || format!("{name}, n={n}: upper {} > budget {budget}", cert.upper_bound))?;
            ensure(cert.ledger.total() == cert.upper_bound, || format!("{name}, n={n}: ledger does not sum"))?;
            worst_ratio = worst_ratio.max(cert.upper_bound / budget);
        }
    }
    Ok(format!("max upper/budget ratio {worst_ratio:.4}; ledgers sum exactly"))
}

fn io_example() -> Outcome {
    let ln2 = 2f64.ln();
    let fan1 = cell_fan(&example1_cells()).unwrap();
    let t = Instant::now();
    let rect = rectangle_partition_optimum(&fan1).map_err(|e| e.to_string())?;
    ensure((rect.value - 2.0 * ln2).abs() <= 1e-9 && rect.blocks.len() == 3, || format!("rectangles: {} in {} blocks", rect.value, rect.blocks.len()))?;
    let sol = io_solve(&fan1, &[12], &intro_problem(), &IoOptions::default()).map_err(|e| e.to_string())?;
    ensure((sol.value - 2.0 * ln2).abs() <= 1e-9, || format!("io_solve gives {}", sol.value))?;
    let t1 = t.elapsed();
    let t = Instant::now();
    let rect2 = rectangle_partition_optimum(&cell_fan(&example2_cells()).unwrap()).map_err(|e| e.to_string())?;
    ensure((rect2.value - ln2).abs() <= 1e-9, || format!("example 2 gives {}", rect2.value))?;
    let t2 = t.elapsed();
    ensure(t1 < secs(10) && t2 < secs(10), || format!("instances took {t1:?} and {t2:?}"))?;
    Ok(format!("example 1: {:.9} with 3 rectangles, io_solve {:.9} ({t1:.2?}); example 2: {:.9} ({t2:.2?})", rect.value, sol.value, rect2.value))
}

fn extension_transport() -> Outcome {
    let mut rng = sample::rng(10);
    let (mut excess, mut gap, mut exact_count) = (f64::NEG_INFINITY, f64::NEG_INFINITY, 0);
    for _ in 0..100 {
        let (n, m) = (rng.gen_range(2..=3), rng.gen_range(2..=3));
        let fj = sample::distribution(&mut rng, m * n, 6);
        let px: Vec<Rational> = (0..n).map(|b| (0..m).map(|a| fj[a * n + b].clone()).sum()).collect();
        let pp: Vec<Rational> = (0..m).map(|a| fj[a * n..(a + 1) * n].iter().sum()).collect();
        let var = |w: Vec<Rational>| {
            let s = ProbabilitySpace::from_weights(w).unwrap();
            Configuration::generated(&s, &[s.atoms().to_vec()]).unwrap()
        };
        let (x, xp) = (var(px.clone()), var(pp.clone()));
        let kernel: Vec<Vec<Rational>> = (0..n).map(|_| sample::sparse_distribution(&mut rng, 2, 5, 0.3)).collect();
        let ext = ExtensionKernel::new(x.clone(), vec![2], kernel).map_err(|e| e.to_string())?;
        let rep = transport_extension(&ext, &xp, &fj).map_err(|e| e.to_string())?;
        let kd_f = 2.0 * hr(&fj) - hr(&px) - hr(&pp);
        ensure((rep.kd_f - kd_f).abs() <= 1e-9, || format!("kd(F) {} vs oracle {kd_f}", rep.kd_f))?;
        excess = excess.max(rep.certificate - 2.0 * kd_f);
        let (y, yp) = (ext.extend().map_err(|e| e.to_string())?, rep.extension.extend().map_err(|e| e.to_string())?);
        if cells(&y, &yp) <= AUTO_EXACT_CELLS {
            gap = gap.max(k_exact(&y, &yp)? - rep.certificate);
            exact_count += 1;
        }
    }
    ensure(excess <= 1e-9 && gap <= 1e-9, || format!("certificate - 2 kd(F) = {excess:e}, k - certificate = {gap:e}"))?;
    ensure(exact_count > 0, || "no instance small enough for exact k".into())?;
    Ok(format!("max certificate - 2 kd(F) = {excess:.3}; max k - certificate = {gap:.3} on {exact_count} exact instances"))
}

fn mixtures() -> Outcome {
    let u = |n| Configuration::single(ProbabilitySpace::uniform(n));
    let half = ProbabilitySpace::binary(&rat(1, 2)).unwrap();
    let mix = mixture(&half, &[u(2), u(2)]).map_err(|e| e.to_string())?;
    ensure(is_isomorphic(&mix.assembled, &u(4)).map_err(|e| e.to_string())?, || "U2 + U2 is not U4".into())?;
    let mut rng = sample::rng(11);
    let mut worst = 0f64;
    for i in 0..100 {
        let t = rng.gen_range(1..=3);
        let theta = sample::space(&mut rng, t, 5);
        let family: Vec<Configuration> = (0..t)
            .map(|_| if i % 2 == 0 {
                let n = rng.gen_range(1..=3);
                single(&mut rng, n)
            } else {
                sample::joint_fan(2, 2, &sample::distribution(&mut rng, 4, 5))
            })
            .collect();
        let m = mixture(&theta, &family).map_err(|e| e.to_string())?;
        let ht = hr(theta.weights());
        for (obj, sp) in m.assembled.spaces().iter().enumerate() {
            let oracle: f64 = ht + family.iter().zip(theta.weights()).map(|(c, w)| f(w) * hr(c.space(obj).weights())).sum::<f64>();
            worst = worst.max((hr(sp.weights()) - oracle).abs());
        }
        worst = worst.max(m.entropy_residual());
    }
    ensure(worst < 1e-9, || format!("entropy identity residual {worst:e}"))?;
    let mut audited = 0;
    for (x, y) in [(u(2), u(3)), (u(2), Configuration::single(ProbabilitySpace::from_weights(vec![rat(1, 3), rat(2, 3)]).unwrap()))] {
        for n in [2usize, 4] {
            for b in mixture_bound_audit(&x, &y, n, 2).map_err(|e| e.to_string())? {
                ensure(b.consistent, || format!("{} at n={n}: lower {} > rhs {}", b.name, b.estimate.lower, b.rhs))?;
                audited += 1;
            }
        }
    }
    Ok(format!("U2+U2 = U4; residual {worst:.1e}; {audited} mixture bounds consistent"))
}

fn markov() -> Outcome {
    let iid = MarkovChain::iid(vec![0.into(), 1.into(), 2.into()], vec![rat(1, 2), rat(1, 3), rat(1, 6)]).map_err(|e| e.to_string())?;
    let d = iid.defect(4).map_err(|e| e.to_string())?;
    ensure(d == 0.0, || format!("i.i.d. chain defect {d}"))?;
    let lin = defect(&ConfigSequence::linear(Configuration::single(ProbabilitySpace::uniform(3))), 4).map_err(|e| e.to_string())?;
    ensure(lin == (0.0, 0.0), || format!("linear sequence defect {lin:?}"))?;
    let flip = MarkovChain::flip(rat(1, 4)).map_err(|e| e.to_string())?;
    let ln2 = 2f64.ln();
    let mi_oracle = ln2 - h2(0.25);
    let mi = flip.past_future_mi(1, 1).map_err(|e| e.to_string())?;
    ensure((mi - mi_oracle).abs() <= 1e-9 && (mi - 0.130812).abs() <= 5e-7, || format!("I(X0;X1) = {mi}"))?;
    let rate = flip.entropy_rate(4).map_err(|e| e.to_string())?;
    ensure((rate - h2(0.25)).abs() <= 1e-9 && (rate - 0.562335).abs() <= 5e-7, || format!("entropy rate {rate}"))?;
    let table = flip.mi_table(4).map_err(|e| e.to_string())?;
    for m in 0..4 {
        for n in 0..4 {
            let v = table[m][n];
            ensure(v <= ln2 + 1e-12, || format!("I({},{}) = {v} > ln 2", m + 1, n + 1))?;
            ensure(m == 0 || v >= table[m - 1][n] - 1e-12, || format!("not monotone in m at ({},{})", m + 1, n + 1))?;
            ensure(n == 0 || v >= table[m][n - 1] - 1e-12, || format!("not monotone in n at ({},{})", m + 1, n + 1))?;
        }
    }
    Ok(format!("defect 0; I = {mi:.9} (oracle {mi_oracle:.9}); rate = {rate:.9}"))
}

fn determinism() -> Outcome {
    let exe = env!("CARGO_BIN_EXE_tropic");
    let runs: &[&[&str]] = &[
        &["entropy", "examples/u6.json"],
        &["kd", "binary_fan.json"],
        &["k", "examples/u2.json", "examples/u4.json", "--mode", "exact"],
        &["k", "u6.json", "u12.json", "--mode", "heuristic", "--seed", "7"],
        &["aikd", "u6.json", "u12.json", "--n-max", "3"],
        &["aep", "example1.json", "--n", "4,8,16,32"],
        &["types", "u4.json", "--n", "8", "--r", "0.3"],
        &["io", "examples/example1.json", "--preset", "intro"],
        &["io", "binary_fan.json", "--objective", "0,2:1 1,2:1 2:-2", "--constraints", "0,1,2:1 0,1:-1=0", "--maximize", "--restarts", "4", "--seed", "3"],
        &["entset", "binary_fan.json", "-l", "3", "--samples", "40", "--seed", "5", "--hull"],
        &["markov", "--spec", "flip.json", "--mi", "2,2", "--rate", "--horizon", "4"],
        &["audit", "--samples", "30", "--seed", "9"],
    ];
    let run = |args: &[&str]| -> Result<Vec<u8>, String> {
        let out = Command::new(exe).args(args).output().map_err(|e| e.to_string())?;
        ensure(out.status.success(), || format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr)))?;
        Ok(out.stdout)
    };
    for args in runs {
        let first = run(args)?;
        ensure(first == run(args)?, || format!("{args:?} differs between runs"))?;
        let mut jobs: Vec<&str> = args.to_vec();
        jobs.extend(["--jobs", "3"]);
        ensure(first == run(&jobs)?, || format!("{args:?} depends on --jobs"))?;
    }
    Ok(format!("{} commands byte-identical across repeats and --jobs", runs.len()))
}
