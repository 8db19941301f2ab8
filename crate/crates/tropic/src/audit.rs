//! The `audit` subcommand: seeded spot checks of every inequality the
//! library relies on. Each row is the largest `lhs - rhs` seen, so values
//! at or below zero mean no violation.
use rand::Rng;
use tropic_core::config::Configuration;
use tropic_core::math;
use tropic_core::metric::{intrinsic_k, lipschitz_audit, local_estimate, slicing_bound, LipschitzOp, Mode, ThreeTents};
use tropic_core::rational::{self, Rational};
use tropic_core::sample::{self, SampleRng};
use tropic_core::space::{divergence, total_variation};
use tropic_core::types;

use crate::error::CliError;
use crate::report::{fmt_f64, Report};

type Check = fn(&mut SampleRng, usize) -> Result<f64, CliError>;

const CHECKS: &[(&str, Check)] = &[
    ("shannon", shannon),
    ("pinsker", pinsker),
    ("type_bounds", type_bounds),
    ("triangle", triangle),
    ("lipschitz", lipschitz),
    ("slicing", slicing),
    ("local", local),
];

pub fn run(r: &mut Report, samples: usize, seed: u64) -> Result<(), CliError> {
    r.row("samples", samples);
    let mut worst = f64::NEG_INFINITY;
    for (k, (name, check)) in CHECKS.iter().enumerate() {
        let mut rng = sample::rng(seed.wrapping_add(k as u64));
        let v = check(&mut rng, samples.max(1))?;
        worst = worst.max(v);
        r.num(*name, v);
        r.say(format!("{name:>12}  {:>14}  {}", fmt_f64(v), if v <= 1e-9 { "ok" } else { "VIOLATED" }));
    }
    r.row("pass", worst <= 1e-9);
    Ok(())
}

fn max_of(n: usize, mut f: impl FnMut() -> Result<f64, CliError>) -> Result<f64, CliError> {
    (0..n).try_fold(f64::NEG_INFINITY, |acc, _| Ok(acc.max(f()?)))
}

fn single(rng: &mut SampleRng, n: usize) -> Configuration {
    Configuration::single(sample::space(rng, n, 6))
}

/// `H(12) + H(0) - H(1) - H(2)` on diamonds with a minimal top.
fn shannon(rng: &mut SampleRng, n: usize) -> Result<f64, CliError> {
    max_of(n, || {
        let n0 = rng.gen_range(2..=6);
        let h = sample::minimal_diamond(rng, n0, 9).entropy_vector().values;
        Ok(h[0] + h[3] - h[1] - h[2])
    })
}

fn pinsker(rng: &mut SampleRng, n: usize) -> Result<f64, CliError> {
    max_of(n, || {
        let k = rng.gen_range(1..=6);
        let (p, q) = (sample::space(rng, k, 9), sample::space(rng, k, 9));
        Ok(total_variation(&p, &q)? - (2.0 * divergence(&p, &q)?).sqrt())
    })
}

/// Cardinality and mass bounds of type classes over a full small lattice.
fn type_bounds(rng: &mut SampleRng, n: usize) -> Result<f64, CliError> {
    max_of(n.div_ceil(10), || {
        let s = rng.gen_range(1..=3);
        let len = rng.gen_range(1..=6u64);
        let p = sample::distribution(rng, s, 6);
        let mut worst = f64::NEG_INFINITY;
        for pi in types::lattice(s, len, types::MATERIALIZATION_CAP)?.distributions() {
            let ts = types::type_space(&pi, len, 0)?;
            let (lo, hi) = ts.log_bounds();
            let log_t = ts.entropy();
            let d = types::divergence(&pi, &p);
            let tau = rational::to_f64(&types::type_mass(&p, &pi, len)?);
            let nf = len as f64;
            let tau_hi = math::exp(-nf * d);
            let tau_lo = math::exp(-nf * d - s as f64 * math::ln(nf + 1.0));
            worst = worst.max(log_t - hi).max(lo - log_t).max(tau - tau_hi).max(tau_lo - tau);
        }
        Ok(worst)
    })
}

fn triangle(rng: &mut SampleRng, n: usize) -> Result<f64, CliError> {
    let pool: Vec<Configuration> = (0..6).map(|_| {
        let k = rng.gen_range(1..=4);
        single(rng, k)
    }).collect();
    let mut k = vec![0.0; pool.len() * pool.len()];
    for a in 0..pool.len() {
        for b in 0..pool.len() {
            k[a * pool.len() + b] = intrinsic_k(&pool[a], &pool[b], Mode::Exact)?.0;
        }
    }
    max_of(n, || {
        let (a, b, c) = (rng.gen_range(0..pool.len()), rng.gen_range(0..pool.len()), rng.gen_range(0..pool.len()));
        let m = pool.len();
        Ok(k[a * m + c] - k[a * m + b] - k[b * m + c])
    })
}

fn lipschitz(rng: &mut SampleRng, n: usize) -> Result<f64, CliError> {
    let m = n.div_ceil(10);
    let mut worst = f64::NEG_INFINITY;
    for op in [LipschitzOp::Entropy, LipschitzOp::TensorShift, LipschitzOp::Restriction] {
        worst = worst.max(lipschitz_audit(op, m, rng.gen())?.max_violation);
    }
    Ok(worst)
}

fn slicing(rng: &mut SampleRng, n: usize) -> Result<f64, CliError> {
    max_of(n.div_ceil(5), || {
        let (nx, ny) = (rng.gen_range(2..=4), rng.gen_range(2..=4));
        let (x, y) = (single(rng, nx), single(rng, ny));
        let fx: Vec<usize> = (0..nx).map(|a| if a < 2 { a } else { rng.gen_range(0..2) }).collect();
        let fy: Vec<usize> = (0..ny).map(|a| if a < 2 { a } else { rng.gen_range(0..2) }).collect();
        let t = independent_tents(&x, &y, &fx, &fy)?;
        let bound = slicing_bound(&t)?.bound;
        Ok(intrinsic_k(&x, &y, Mode::Exact)?.0 - bound)
    })
}

/// Three tents reducing `X` and `Y` to two-atom spaces along `fx`, `fy`,
/// with the independent coupling of the two reductions.
fn independent_tents(x: &Configuration, y: &Configuration, fx: &[usize], fy: &[usize]) -> Result<ThreeTents, CliError> {
    let joint = |c: &Configuration, f: &[usize]| -> Result<Vec<Rational>, CliError> {
        let mut m = vec![Rational::from_integer(0.into()); f.len() * 2];
        for (a, w) in c.initial_space()?.weights().iter().enumerate() {
            m[a * 2 + f[a]] += w;
        }
        Ok(m)
    };
    let (xu, yv) = (joint(x, fx)?, joint(y, fy)?);
    let col = |m: &[Rational], u: usize| -> Rational { m.iter().skip(u).step_by(2).sum() };
    let w = (0..4).map(|k| col(&xu, k / 2) * col(&yv, k % 2)).collect();
    Ok(ThreeTents { x: x.clone(), y: y.clone(), xu, u_len: 2, yv, v_len: 2, w })
}

fn local(rng: &mut SampleRng, n: usize) -> Result<f64, CliError> {
    max_of(n.div_ceil(2), || {
        let k = rng.gen_range(2..=4);
        let x = single(rng, k);
        let q: Vec<Rational> = sample::distribution(rng, k, 6);
        let y = x.pushdown(&q)?;
        Ok(intrinsic_k(&x, &y, Mode::Exact)?.0 - local_estimate(&x, &q)?)
    })
}
