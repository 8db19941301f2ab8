//! Floating point helpers shared by the analytic functionals.
use alloc::vec::Vec;

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

/// `-x ln x` with the convention `0 ln 0 = 0`.
#[inline]
pub fn eta(x: f64) -> f64 {
    if x > 0.0 {
        -x * libm::log(x)
    } else {
        0.0
    }
}

/// Shannon entropy of a (not necessarily normalized) weight vector, in nats.
pub fn entropy(weights: &[f64]) -> f64 {
    weights.iter().map(|&w| eta(w)).sum()
}

/// Entropy of the binary space with weights `(1-a, a)`.
pub fn binary_entropy(a: f64) -> f64 {
    eta(a) + eta(1.0 - a)
}

/// Entropy of the pushforward of `mass` along `key`, where keys are `< size`.
pub fn pushed_entropy(mass: &[f64], key: &[usize], size: usize, scratch: &mut Vec<f64>) -> f64 {
    scratch.clear();
    scratch.resize(size, 0.0);
    for (m, &k) in mass.iter().zip(key) {
        scratch[k] += m;
    }
    entropy(scratch)
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &mut [f64]) {
    let mut u: Vec<f64> = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap_or(core::cmp::Ordering::Equal));
    let mut css = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        css += ui;
        let t = (css - 1.0) / (i as f64 + 1.0);
        if ui - t > 0.0 {
            theta = t;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary() {
        assert!((binary_entropy(0.25) - 0.562335144618).abs() < 1e-11);
        assert_eq!(binary_entropy(0.0), 0.0);
        assert!((binary_entropy(0.5) - core::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn simplex_projection() {
        let mut v = [0.5, 0.5, 0.5];
        project_simplex(&mut v);
        assert!(v.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-12));
        let mut w = [2.0, 0.0];
        project_simplex(&mut w);
        assert_eq!(w, [1.0, 0.0]);
    }
}
