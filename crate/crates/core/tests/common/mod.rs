//! Seeded random MIQPs with a known feasible point, shared by the solver tests.

#![allow(dead_code)]

use footplan::problem::{MiqpProblem, RowTag};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A random MIQP with `1..=max_binaries` binaries and `1..=max_continuous`
/// boxed continuous variables. `Q = G^T G` is PSD by construction and every
/// row is satisfied by a hidden random point, so the instance is feasible.
pub fn random_miqp(seed: u64, max_binaries: usize, max_continuous: usize) -> MiqpProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nb = rng.gen_range(1..=max_binaries);
    let nc = rng.gen_range(1..=max_continuous);
    let n = nb + nc;
    let mut p = MiqpProblem::new(n);

    let rank = rng.gen_range(1..=n);
    let g: Vec<Vec<f64>> = (0..rank).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    for i in 0..n {
        for j in i..n {
            let q: f64 = g.iter().map(|row| row[i] * row[j]).sum();
            // add_product(i, i, w) contributes w x_i^2, so halve the diagonal.
            p.add_product(i, j, if i == j { 0.5 * q } else { q });
        }
    }
    p.linear = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    p.constant = rng.gen_range(-1.0..1.0);

    let mut hidden = vec![0.0; n];
    for (j, h) in hidden.iter_mut().enumerate() {
        if j < nb {
            p.mark_binary(j);
            *h = if rng.gen_bool(0.5) { 1.0 } else { 0.0 };
        } else {
            let lo = rng.gen_range(-3.0..0.0);
            let hi = lo + rng.gen_range(0.5..4.0);
            p.set_bounds(j, lo, hi);
            *h = rng.gen_range(lo..=hi);
        }
    }

    let rows = rng.gen_range(1..=6);
    for r in 0..rows {
        let mut coeffs: Vec<(usize, f64)> = Vec::new();
        for j in 0..n {
            if rng.gen_bool(0.5) {
                coeffs.push((j, rng.gen_range(-2.0..2.0)));
            }
        }
        if coeffs.is_empty() {
            continue;
        }
        let activity: f64 = coeffs.iter().map(|&(j, a)| a * hidden[j]).sum();
        p.add_le(coeffs, activity + rng.gen_range(0.0..0.5), RowTag::generic(r));
    }
    // Indicator rows `x_c <= v + (u - v) y` tie a continuous variable to a binary.
    for k in 0..nb.min(nc) {
        if rng.gen_bool(0.5) {
            let (y, c) = (k, nb + k);
            let v = rng.gen_range(p.lower[c]..=p.upper[c]);
            let v = if hidden[y] == 0.0 { v.max(hidden[c]) } else { v };
            p.add_le(vec![(c, 1.0), (y, -(p.upper[c] - v))], v, RowTag::generic(rows + k));
        }
    }
    if rng.gen_bool(0.3) {
        let coeffs: Vec<(usize, f64)> = (nb..n).map(|j| (j, rng.gen_range(-1.0..1.0))).collect();
        let activity: f64 = coeffs.iter().map(|&(j, a)| a * hidden[j]).sum();
        p.add_eq(coeffs, activity, RowTag::generic(rows + nb));
    }
    p
}

/// Random symmetric PSD matrix `G^T G` (dense, row-major) and vector for box QPs.
pub fn random_box_qp(seed: u64, dim: usize) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rank = rng.gen_range(1..=dim);
    let g: Vec<Vec<f64>> = (0..rank).map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let q: Vec<Vec<f64>> =
        (0..dim).map(|i| (0..dim).map(|j| g.iter().map(|row| row[i] * row[j]).sum()).collect()).collect();
    let c: Vec<f64> = (0..dim).map(|_| rng.gen_range(-3.0..3.0)).collect();
    let lower: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..0.0)).collect();
    let upper: Vec<f64> = lower.iter().map(|&l| l + rng.gen_range(0.1..3.0)).collect();
    (q, c, lower, upper)
}

/// Projected gradient descent on `1/2 x^T Q x + c^T x` over a box with step
/// `1 / L`, `L` the Gershgorin bound on the largest eigenvalue of `Q`.
pub fn projected_gradient(q: &[Vec<f64>], c: &[f64], lower: &[f64], upper: &[f64], iterations: usize) -> (Vec<f64>, f64) {
    let n = c.len();
    let lipschitz = q.iter().map(|row| row.iter().map(|v| v.abs()).sum::<f64>()).fold(1e-12, f64::max);
    let step = 1.0 / lipschitz;
    let mut x: Vec<f64> = (0..n).map(|j| 0.5 * (lower[j] + upper[j])).collect();
    let mut grad = vec![0.0; n];
    for _ in 0..iterations {
        for i in 0..n {
            grad[i] = c[i] + (0..n).map(|j| q[i][j] * x[j]).sum::<f64>();
        }
        for i in 0..n {
            x[i] = (x[i] - step * grad[i]).clamp(lower[i], upper[i]);
        }
    }
    let value = (0..n)
        .map(|i| c[i] * x[i] + 0.5 * x[i] * (0..n).map(|j| q[i][j] * x[j]).sum::<f64>())
        .sum();
    (x, value)
}
