//! Oracles shared by the integration suites. None of them call the solvers
//! they check.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use clra::channel::{Scenario, User};
use clra::geometry::ArrayLayout;
use clra::linprog::LinearProgram;
use clra::GainPattern;

/// Optimum of `lp` by enumerating every vertex of its feasible polytope.
/// `None` means infeasible. Every variable must have finite bounds.
pub fn vertex_optimum(lp: &LinearProgram) -> Option<f64> {
    let n = lp.variables();
    let mut a: Vec<Vec<f64>> = lp.rows().to_vec();
    let mut b: Vec<f64> = lp.rhs().to_vec();
    for i in 0..n {
        let mut up = vec![0.0; n];
        up[i] = 1.0;
        a.push(up);
        b.push(lp.upper()[i]);
        let mut down = vec![0.0; n];
        down[i] = -1.0;
        a.push(down);
        b.push(-lp.lower()[i]);
    }
    let mut best: Option<f64> = None;
    for active in combinations(a.len(), n) {
        let m = DMatrix::from_fn(n, n, |r, c| a[active[r]][c]);
        let rhs = DVector::from_fn(n, |r, _| b[active[r]]);
        let Some(x) = m.clone().lu().solve(&rhs) else { continue };
        if (&m * &x - &rhs).amax() > 1e-9 || !x.iter().all(|v| v.is_finite()) {
            continue;
        }
        let feasible = a
            .iter()
            .zip(&b)
            .all(|(row, bi)| row.iter().zip(x.iter()).map(|(p, q)| p * q).sum::<f64>() <= bi + 1e-9);
        if feasible {
            let value = lp.value(x.as_slice());
            best = Some(best.map_or(value, |v: f64| v.max(value)));
        }
    }
    best
}

fn combinations(len: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut pick = Vec::with_capacity(k);
    fn rec(start: usize, len: usize, k: usize, pick: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if pick.len() == k {
            out.push(pick.clone());
            return;
        }
        for i in start..len {
            pick.push(i);
            rec(i + 1, len, k, pick, out);
            pick.pop();
        }
    }
    rec(0, len, k, &mut pick, &mut out);
    out
}

/// Bounded random program with `n` variables and `m` rows.
pub fn random_lp<R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize) -> LinearProgram {
    let c: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let lo: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..0.0)).collect();
    let hi: Vec<f64> = lo.iter().map(|l| l + rng.random_range(0.0..3.0)).collect();
    let mut lp = LinearProgram::new(c, lo, hi).unwrap();
    for _ in 0..m {
        let row: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        lp.add_row(row, rng.random_range(-0.3..1.5)).unwrap();
    }
    lp
}

/// Single user in front of a `1 x cols` array, no scatterers.
pub fn single_user<R: Rng + ?Sized>(rng: &mut R) -> Scenario {
    let r: f64 = rng.random_range(5.0..40.0);
    let az: f64 = rng.random_range(-1.2..1.2);
    let el: f64 = rng.random_range(-1.0..1.0);
    let v = nalgebra::Vector3::new(r * el.cos() * az.cos(), r * el.cos() * az.sin(), r * el.sin());
    Scenario::new(vec![User::new(v, 1e-2)], vec![], 1e-11, 0.0857, GainPattern::new(2.0).unwrap(), 0).unwrap()
}

/// SNR with every antenna of `layout` pointed straight at the only user and
/// maximum-ratio combining: `P / sigma^2 * sum_q beta0 * 2(2p+1) / r_q^2`.
pub fn pointed_snr(s: &Scenario, layout: &ArrayLayout) -> f64 {
    let u = &s.users[0];
    let p = s.pattern.directivity();
    let beta0 = (s.wavelength / (4.0 * std::f64::consts::PI)).powi(2);
    let peak = 2.0 * (2.0 * p + 1.0);
    let sum: f64 = layout
        .element_positions()
        .unwrap()
        .iter()
        .map(|q| beta0 * peak / (u.position - q).norm_squared())
        .sum();
    u.power / s.noise * sum
}
