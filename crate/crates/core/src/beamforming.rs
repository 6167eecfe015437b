//! Receive combiners and rate evaluation.
//!
//! A combiner `w_k` is stored as the row vector applied to the received
//! signal, so user `k` sees the scalar `w_k h_k = sum_q w_k[q] h_k[q]` with
//! no implicit conjugation. Every combiner returned here has unit norm and is
//! phase-aligned so that `w_k h_k` is real and nonnegative.
//!
//! Powers are always noise-normalized (`P_k / sigma^2`).

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::channel::{ChannelMatrix, C64};
use crate::error::{Error, Result};

/// Largest accepted condition estimate of the reduced `(K-1) x (K-1)` system.
pub const WOODBURY_COND_LIMIT: f64 = 1e12;

/// Tolerance on `||w|| = 1` when accepting externally built combiners.
pub const UNIT_NORM_TOL: f64 = 1e-9;

/// `sum_q w[q] h[q]`.
pub fn apply(w: &DVector<C64>, h: &DVector<C64>) -> C64 {
    w.iter().zip(h.iter()).map(|(a, b)| a * b).sum()
}

fn unit_from_direction(x: &DVector<C64>) -> Option<DVector<C64>> {
    let norm = x.norm();
    if norm > 0.0 && norm.is_finite() {
        Some(x.map(|z| z.conj() / norm))
    } else {
        None
    }
}

fn first_axis(len: usize) -> DVector<C64> {
    let mut e = DVector::zeros(len);
    if len > 0 {
        e[0] = C64::new(1.0, 0.0);
    }
    e
}

/// Maximum ratio combiner `h^H / ||h||`.
pub fn mrc(h: &DVector<C64>) -> Result<DVector<C64>> {
    unit_from_direction(h).ok_or(Error::ZeroChannel)
}

/// An MMSE combiner and whether it came from the direct `Q x Q` fallback.
#[derive(Debug, Clone, PartialEq)]
pub struct MmseBeam {
    pub w: DVector<C64>,
    pub direct_fallback: bool,
}

fn check_shapes(h: &ChannelMatrix, powers: &[f64], k: usize) -> Result<()> {
    if powers.len() != h.users() {
        return Err(Error::InvalidParameter(format!(
            "{} powers for {} users",
            powers.len(),
            h.users()
        )));
    }
    if k >= h.users() {
        return Err(Error::IndexOutOfRange {
            index: k,
            len: h.users(),
        });
    }
    Ok(())
}

/// Interference columns scaled by `sqrt(P_i)`, users with zero power dropped.
fn scaled_interference(h: &ChannelMatrix, powers: &[f64], k: usize) -> DMatrix<C64> {
    let cols: Vec<DVector<C64>> = (0..h.users())
        .filter(|&i| i != k && powers[i] > 0.0)
        .map(|i| h.column(i) * C64::new(powers[i].sqrt(), 0.0))
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(h.antennas(), 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

fn cholesky_condition(chol: &Cholesky<C64, nalgebra::Dyn>) -> f64 {
    let l = chol.l_dirty();
    let diag: Vec<f64> = (0..l.nrows()).map(|i| l[(i, i)].re.abs()).collect();
    let max = diag.iter().copied().fold(0.0, f64::max);
    let min = diag.iter().copied().fold(f64::INFINITY, f64::min);
    (max / min).powi(2)
}

/// MMSE combiner for user `k`, with its fallback flag.
///
/// `C_k = I + sum_{i != k} P_i h_i h_i^H` is inverted through the Woodbury
/// identity in the scaled form
/// `C_k^{-1} = I - G (I + G^H G)^{-1} G^H` with `G = [sqrt(P_i) h_i]`, so only
/// a `(K-1) x (K-1)` Hermitian positive definite system is factored. If that
/// factorization fails or its condition estimate exceeds
/// [`WOODBURY_COND_LIMIT`], the `Q x Q` system is solved directly instead.
///
/// A zero channel has no preferred direction; the first coordinate axis is
/// returned and the user's SINR is zero.
pub fn mmse_detailed(h: &ChannelMatrix, powers: &[f64], k: usize) -> Result<MmseBeam> {
    check_shapes(h, powers, k)?;
    let hk = h.column(k);
    if hk.norm() == 0.0 {
        return Ok(MmseBeam {
            w: first_axis(h.antennas()),
            direct_fallback: false,
        });
    }
    let g = scaled_interference(h, powers, k);
    if g.ncols() == 0 {
        return Ok(MmseBeam {
            w: mrc(&hk)?,
            direct_fallback: false,
        });
    }
    let gh = g.adjoint();
    let inner = DMatrix::<C64>::identity(g.ncols(), g.ncols()) + &gh * &g;
    if let Some(chol) = Cholesky::new(inner) {
        if cholesky_condition(&chol) <= WOODBURY_COND_LIMIT {
            let x = &hk - &g * chol.solve(&(&gh * &hk));
            if let Some(w) = unit_from_direction(&x) {
                return Ok(MmseBeam {
                    w,
                    direct_fallback: false,
                });
            }
        }
    }
    Ok(MmseBeam {
        w: mmse_direct(h, powers, k)?,
        direct_fallback: true,
    })
}

/// MMSE combiner for user `k`; see [`mmse_detailed`].
pub fn mmse(h: &ChannelMatrix, powers: &[f64], k: usize) -> Result<DVector<C64>> {
    mmse_detailed(h, powers, k).map(|b| b.w)
}

/// MMSE combiner from a direct Cholesky solve of the `Q x Q` covariance.
pub fn mmse_direct(h: &ChannelMatrix, powers: &[f64], k: usize) -> Result<DVector<C64>> {
    check_shapes(h, powers, k)?;
    let hk = h.column(k);
    if hk.norm() == 0.0 {
        return Ok(first_axis(h.antennas()));
    }
    let g = scaled_interference(h, powers, k);
    let c = DMatrix::<C64>::identity(h.antennas(), h.antennas()) + &g * g.adjoint();
    let chol = Cholesky::new(c).ok_or_else(|| {
        Error::InvalidParameter("interference covariance is not positive definite".into())
    })?;
    unit_from_direction(&chol.solve(&hk)).ok_or(Error::ZeroChannel)
}

/// One unit-norm combiner per user.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerSet {
    rows: Vec<DVector<C64>>,
    fallbacks: usize,
}

impl BeamformerSet {
    /// Accepts combiners whose norms are within [`UNIT_NORM_TOL`] of one.
    pub fn new(rows: Vec<DVector<C64>>) -> Result<Self> {
        if let Some(k) = rows.iter().position(|w| (w.norm() - 1.0).abs() > UNIT_NORM_TOL) {
            return Err(Error::InvalidParameter(format!(
                "combiner {k} has norm {}",
                rows[k].norm()
            )));
        }
        Ok(Self { rows, fallbacks: 0 })
    }

    pub fn users(&self) -> usize {
        self.rows.len()
    }

    pub fn get(&self, k: usize) -> &DVector<C64> {
        &self.rows[k]
    }

    pub fn rows(&self) -> &[DVector<C64>] {
        &self.rows
    }

    /// Number of users whose MMSE combiner needed the direct fallback.
    pub fn fallbacks(&self) -> usize {
        self.fallbacks
    }
}

/// MMSE combiners for all users.
pub fn mmse_all(h: &ChannelMatrix, powers: &[f64]) -> Result<BeamformerSet> {
    let mut rows = Vec::with_capacity(h.users());
    let mut fallbacks = 0;
    for k in 0..h.users() {
        let b = mmse_detailed(h, powers, k)?;
        fallbacks += usize::from(b.direct_fallback);
        rows.push(b.w);
    }
    Ok(BeamformerSet { rows, fallbacks })
}

/// MRC combiners for all users; zero channels get the first coordinate axis.
pub fn mrc_all(h: &ChannelMatrix) -> BeamformerSet {
    let rows = (0..h.users())
        .map(|k| mrc(&h.column(k)).unwrap_or_else(|_| first_axis(h.antennas())))
        .collect();
    BeamformerSet { rows, fallbacks: 0 }
}

/// SINR of user `k` under combiner `w`:
/// `P_k |w h_k|^2 / (sum_{i != k} P_i |w h_i|^2 + 1)`.
pub fn sinr_with(h: &ChannelMatrix, w: &DVector<C64>, powers: &[f64], k: usize) -> f64 {
    let m = h.as_matrix();
    let mut signal = 0.0;
    let mut interference = 0.0;
    for i in 0..h.users() {
        let s: C64 = w.iter().zip(m.column(i).iter()).map(|(a, b)| a * b).sum();
        let g = s.norm_sqr() * powers[i];
        if i == k {
            signal = g;
        } else {
            interference += g;
        }
    }
    signal / (interference + 1.0)
}

pub fn sinr(h: &ChannelMatrix, w: &BeamformerSet, powers: &[f64], k: usize) -> f64 {
    sinr_with(h, w.get(k), powers, k)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub sinr: Vec<f64>,
    /// `log2(1 + sinr)` per user, bits/s/Hz.
    pub rates: Vec<f64>,
    pub sum: f64,
}

impl RateReport {
    pub fn from_sinr(sinr: Vec<f64>) -> Self {
        let rates: Vec<f64> = sinr.iter().map(|g| (1.0 + g).log2()).collect();
        let sum = rates.iter().sum();
        Self { sinr, rates, sum }
    }
}

pub fn sum_rate(h: &ChannelMatrix, w: &BeamformerSet, powers: &[f64]) -> RateReport {
    RateReport::from_sinr((0..h.users()).map(|k| sinr(h, w, powers, k)).collect())
}

/// Sum rate with MMSE combiners recomputed for `h`.
pub fn mmse_sum_rate(h: &ChannelMatrix, powers: &[f64]) -> Result<(BeamformerSet, RateReport)> {
    let w = mmse_all(h, powers)?;
    let report = sum_rate(h, &w, powers);
    Ok((w, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_channel(rng: &mut impl Rng, q: usize, k: usize) -> ChannelMatrix {
        ChannelMatrix::new(DMatrix::from_fn(q, k, |_, _| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        }))
    }

    fn phase_gap(a: &DVector<C64>, b: &DVector<C64>) -> f64 {
        let inner: C64 = a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum();
        let rot = inner / inner.norm();
        (a * rot - b).norm()
    }

    #[test]
    fn mrc_examples() {
        let mut h = DVector::<C64>::zeros(4);
        h[0] = C64::new(1.0, 0.0);
        let w = mrc(&h).unwrap();
        assert!((apply(&w, &h) - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(matches!(mrc(&DVector::zeros(3)), Err(Error::ZeroChannel)));

        let mut rng = crate::rng::substream(1, &[]);
        let h = random_channel(&mut rng, 8, 1).column(0);
        let w = mrc(&h).unwrap();
        assert!((apply(&w, &h).norm_sqr() - h.norm_squared()).abs() < 1e-12);
        assert!(apply(&w, &h).im.abs() < 1e-15);
        let scaled = mrc(&(&h * C64::new(3.5, 0.0))).unwrap();
        assert!((scaled - &w).norm() < 1e-15);
    }

    #[test]
    fn single_user_mmse_is_mrc() {
        let mut rng = crate::rng::substream(2, &[]);
        let h = random_channel(&mut rng, 6, 1);
        assert_eq!(mmse(&h, &[10.0], 0).unwrap(), mrc(&h.column(0)).unwrap());
    }

    #[test]
    fn orthogonal_users_get_mrc() {
        let mut m = DMatrix::<C64>::zeros(4, 2);
        m[(0, 0)] = C64::new(1.0, 0.5);
        m[(1, 0)] = C64::new(-0.2, 0.3);
        m[(2, 1)] = C64::new(0.7, 0.0);
        m[(3, 1)] = C64::new(0.1, -0.9);
        let h = ChannelMatrix::new(m);
        for k in 0..2 {
            let w = mmse(&h, &[5.0, 8.0], k).unwrap();
            assert!((w - mrc(&h.column(k)).unwrap()).norm() < 1e-12);
        }
    }

    #[test]
    fn woodbury_matches_direct_solve() {
        let mut rng = crate::rng::substream(3, &[]);
        let h = random_channel(&mut rng, 4, 3);
        let p = [2.0, 30.0, 0.5];
        for k in 0..3 {
            let b = mmse_detailed(&h, &p, k).unwrap();
            assert!(!b.direct_fallback);
            let d = mmse_direct(&h, &p, k).unwrap();
            assert!((b.w - d).norm() < 1e-12);
        }
    }

    #[test]
    fn mmse_is_phase_aligned_and_unit() {
        let mut rng = crate::rng::substream(4, &[]);
        let h = random_channel(&mut rng, 8, 4);
        let w = mmse_all(&h, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        for k in 0..4 {
            assert!((w.get(k).norm() - 1.0).abs() < 1e-12);
            let s = apply(w.get(k), &h.column(k));
            assert!(s.re > 0.0 && s.im.abs() < 1e-12 * s.re);
        }
    }

    #[test]
    fn mmse_invariant_to_common_interference_scaling() {
        let mut rng = crate::rng::substream(5, &[]);
        let h = random_channel(&mut rng, 5, 3);
        let a = mmse(&h, &[1.0, 2.0, 3.0], 0).unwrap();
        let b = mmse(&h, &[7.0, 2.0, 3.0], 0).unwrap();
        assert!((a - b).norm() < 1e-12);
        let c = mmse(&h, &[1.0, 4.0, 6.0], 0).unwrap();
        let d = mmse(&h, &[1.0, 2.0, 3.0], 0).unwrap();
        assert!(phase_gap(&c, &d) > 1e-6, "scaling the interference must matter");
    }

    #[test]
    fn zero_channel_gives_zero_rate() {
        let h = ChannelMatrix::new(DMatrix::zeros(3, 2));
        let w = mmse_all(&h, &[1.0, 1.0]).unwrap();
        let r = sum_rate(&h, &w, &[1.0, 1.0]);
        assert_eq!(r.sum, 0.0);
    }

    #[test]
    fn sinr_examples() {
        let mut m = DMatrix::<C64>::zeros(2, 1);
        m[(0, 0)] = C64::new(1.0, 0.0);
        let h = ChannelMatrix::new(m);
        let w = BeamformerSet::new(vec![mrc(&h.column(0)).unwrap()]).unwrap();
        assert_eq!(sinr(&h, &w, &[1.0], 0), 1.0);
        assert_eq!(sum_rate(&h, &w, &[1.0]).sum, 1.0);

        let orth = DVector::from_vec(vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)]);
        assert_eq!(sinr_with(&h, &orth, &[1.0], 0), 0.0);

        // two users, crossing channels h1 = [1, a], h2 = [a, 1]
        let a = 0.5;
        let h = ChannelMatrix::new(DMatrix::from_row_slice(
            2,
            2,
            &[C64::new(1.0, 0.0), C64::new(a, 0.0), C64::new(a, 0.0), C64::new(1.0, 0.0)],
        ));
        let w1 = DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        let p = [4.0, 2.0];
        assert!((sinr_with(&h, &w1, &p, 0) - 4.0 / (2.0 * a * a + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn sum_rate_matches_scalar_recomputation() {
        let mut rng = crate::rng::substream(6, &[]);
        let h = random_channel(&mut rng, 3, 2);
        let p = [3.0, 5.0];
        let (w, report) = mmse_sum_rate(&h, &p).unwrap();
        let m = h.as_matrix();
        let mut total = 0.0;
        for k in 0..2 {
            let wk = w.get(k);
            let gain = |i: usize| {
                let mut s = C64::new(0.0, 0.0);
                for q in 0..3 {
                    s += wk[q] * m[(q, i)];
                }
                s.norm_sqr() * p[i]
            };
            let g = gain(k) / (gain(1 - k) + 1.0);
            assert!((report.sinr[k] - g).abs() < 1e-12 * g);
            total += (1.0 + g).log2();
        }
        assert!((report.sum - total).abs() < 1e-12);
    }

    #[test]
    fn sum_rate_ignores_column_phase() {
        let mut rng = crate::rng::substream(7, &[]);
        let h = random_channel(&mut rng, 4, 3);
        let p = [1.0, 2.0, 3.0];
        let (_, a) = mmse_sum_rate(&h, &p).unwrap();
        let mut m = h.as_matrix().clone();
        let rot = C64::from_polar(1.0, 1.234);
        for q in 0..4 {
            m[(q, 1)] *= rot;
        }
        let (_, b) = mmse_sum_rate(&ChannelMatrix::new(m), &p).unwrap();
        assert!((a.sum - b.sum).abs() < 1e-12);
    }

    #[test]
    fn non_unit_combiners_are_rejected() {
        let w = DVector::from_vec(vec![C64::new(2.0, 0.0)]);
        assert!(BeamformerSet::new(vec![w]).is_err());
    }
}
