//! Synthetic signal generation for the cooperative sensing network.
//!
//! Builds the K x N received matrix `Y = sum_m h_{s,m} s_m^T + sum_l h_{j,l} j_l^T + W`
//! under each hypothesis, with QPSK symbols, circularly symmetric complex
//! Gaussian channels and noise, optional jammer correlation, and noise
//! whitening for non-white covariances.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{JamdetError, Result};

/// Hypothesis label: jammer off, one jammer on, two jammers on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Hypothesis {
    H0,
    H1,
    H2,
}

impl Hypothesis {
    /// Number of active jammers under this hypothesis.
    pub fn active_jammers(self) -> usize {
        match self {
            Hypothesis::H0 => 0,
            Hypothesis::H1 => 1,
            Hypothesis::H2 => 2,
        }
    }
}

impl std::fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Hypothesis::H0 => write!(f, "H0"),
            Hypothesis::H1 => write!(f, "H1"),
            Hypothesis::H2 => write!(f, "H2"),
        }
    }
}

/// One jamming node: transmit SNR plus correlation knobs relative to the
/// first jammer's channel and symbol vectors.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JammerSpec {
    /// Transmit SNR gamma_j in dB (P_j = 10^(gamma_j/10) * sigma2_w).
    pub gamma_j_db: f64,
    /// Channel correlation alpha_h in [0, 1] to the first jammer's channel.
    #[serde(default)]
    pub channel_corr: f64,
    /// Symbol correlation alpha_j in [0, 1] to the first jammer's symbols.
    #[serde(default)]
    pub symbol_corr: f64,
}

/// Noise covariance: white with a scalar variance, or an arbitrary Hermitian
/// positive-definite K x K matrix.
#[derive(Debug, Clone)]
pub enum NoiseCovariance {
    White(f64),
    General(DMatrix<Complex64>),
}

impl NoiseCovariance {
    pub fn validate(&self, k: usize) -> Result<()> {
        match self {
            NoiseCovariance::White(v) => {
                if *v <= 0.0 {
                    return Err(JamdetError::InvalidArgument(
                        "white noise variance must be positive".into(),
                    ));
                }
            }
            NoiseCovariance::General(r) => {
                if r.nrows() != k || r.ncols() != k {
                    return Err(JamdetError::InvalidArgument(format!(
                        "noise covariance is {}x{}, expected {}x{}",
                        r.nrows(),
                        r.ncols(),
                        k,
                        k
                    )));
                }
                let herm_err = (r - r.adjoint()).iter().map(|c| c.norm()).fold(0.0, f64::max);
                if herm_err > 1e-12 {
                    return Err(JamdetError::InvalidArgument(format!(
                        "noise covariance not Hermitian (max deviation {herm_err:.2e})"
                    )));
                }
                if r.clone().cholesky().is_none() {
                    return Err(JamdetError::NotPositiveDefinite(
                        "noise covariance Cholesky failed".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Full experiment description: node counts, SNRs, channel statistics, and
/// the reproducibility seed.
#[derive(Debug, Clone)]
pub struct Scenario {
    /// Sensing-node count.
    pub k: usize,
    /// Samples per sensing window; must exceed `k`.
    pub n: usize,
    /// Transmitter-node count; must be below `k`.
    pub m: usize,
    pub jammers: Vec<JammerSpec>,
    /// Transmit SNR per TN in dB (gamma_s = P_s / sigma2_w).
    pub gamma_s_db: f64,
    /// Nominal noise variance.
    pub sigma2_w: f64,
    /// TN channel-gain variance per entry.
    pub sigma2_hs: f64,
    /// JN channel-gain variance per entry.
    pub sigma2_hj: f64,
    pub noise_cov: NoiseCovariance,
    pub seed: u64,
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.n > self.k && self.k > self.m) {
            return Err(JamdetError::InvalidArgument(format!(
                "need N > K > M, got N={}, K={}, M={}",
                self.n, self.k, self.m
            )));
        }
        for (name, v) in [
            ("sigma2_w", self.sigma2_w),
            ("sigma2_hs", self.sigma2_hs),
            ("sigma2_hj", self.sigma2_hj),
        ] {
            if v <= 0.0 || !v.is_finite() {
                return Err(JamdetError::InvalidArgument(format!(
                    "{name} must be strictly positive, got {v}"
                )));
            }
        }
        for (idx, j) in self.jammers.iter().enumerate() {
            if !(0.0..=1.0).contains(&j.channel_corr) || !(0.0..=1.0).contains(&j.symbol_corr) {
                return Err(JamdetError::InvalidArgument(format!(
                    "jammer {idx}: correlations must lie in [0, 1]"
                )));
            }
            if idx == 0 && (j.channel_corr != 0.0 || j.symbol_corr != 0.0) {
                return Err(JamdetError::InvalidArgument(
                    "first jammer is the correlation reference and must have zero correlations"
                        .into(),
                ));
            }
        }
        self.noise_cov.validate(self.k)
    }

    /// TN transmit power P_s.
    pub fn ps(&self) -> f64 {
        db_to_linear(self.gamma_s_db) * self.sigma2_w
    }

    /// JN transmit power P_j for jammer `idx`.
    pub fn pj(&self, idx: usize) -> f64 {
        db_to_linear(self.jammers[idx].gamma_j_db) * self.sigma2_w
    }
}

/// K x N sample matrix collected at the fusion center, with the ground-truth
/// hypothesis retained for harness bookkeeping.
#[derive(Debug, Clone)]
pub struct ReceivedMatrix {
    pub data: DMatrix<Complex64>,
    pub hypothesis_label: Hypothesis,
}

impl ReceivedMatrix {
    pub fn k(&self) -> usize {
        self.data.nrows()
    }

    pub fn n(&self) -> usize {
        self.data.ncols()
    }
}

/// QPSK symbol stream at power `p`: entries drawn uniformly from
/// {+-sqrt(p/2) +- i sqrt(p/2)}, so every symbol has |s|^2 = p exactly.
pub fn gen_qpsk<R: Rng>(n: usize, p: f64, rng: &mut R) -> Result<DVector<Complex64>> {
    if n == 0 {
        return Err(JamdetError::InvalidArgument("symbol count must be >= 1".into()));
    }
    if p <= 0.0 {
        return Err(JamdetError::InvalidArgument("symbol power must be positive".into()));
    }
    let a = (p / 2.0).sqrt();
    Ok(DVector::from_fn(n, |_, _| {
        let bits: u8 = rng.gen_range(0..4);
        let re = if bits & 1 == 0 { a } else { -a };
        let im = if bits & 2 == 0 { a } else { -a };
        Complex64::new(re, im)
    }))
}

/// i.i.d. zero-mean circularly symmetric complex Gaussian vector with
/// per-entry variance `v` (real and imaginary parts independent N(0, v/2)).
pub fn gen_cscg_vector<R: Rng>(k: usize, v: f64, rng: &mut R) -> Result<DVector<Complex64>> {
    if k == 0 {
        return Err(JamdetError::InvalidArgument("vector length must be >= 1".into()));
    }
    if v <= 0.0 {
        return Err(JamdetError::InvalidArgument("variance must be positive".into()));
    }
    let s = (v / 2.0).sqrt();
    Ok(DVector::from_fn(k, |_, _| {
        Complex64::new(s * standard_normal(rng), s * standard_normal(rng))
    }))
}

/// Box-Muller standard normal; keeps the generated stream independent of
/// rand_distr version details.
fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let u1: f64 = rng.gen();
        if u1 > 0.0 {
            let u2: f64 = rng.gen();
            return (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
        }
    }
}

/// Returns `alpha * base + sqrt(1 - alpha^2) * z` with `z` a fresh CSCG draw
/// of per-entry variance `variance` (the ensemble variance of `base`, so
/// `alpha = 0` gives an independent identically distributed vector).
pub fn gen_correlated_vector<R: Rng>(
    base: &DVector<Complex64>,
    alpha: f64,
    variance: f64,
    rng: &mut R,
) -> Result<DVector<Complex64>> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(JamdetError::InvalidArgument(format!(
            "correlation must lie in [0, 1], got {alpha}"
        )));
    }
    if alpha == 1.0 {
        return Ok(base.clone());
    }
    let z = gen_cscg_vector(base.len(), variance, rng)?;
    Ok(base * Complex64::new(alpha, 0.0) + z * Complex64::new((1.0 - alpha * alpha).sqrt(), 0.0))
}

/// Gram-Schmidt orthogonalization that keeps each vector's original 2-norm:
/// directions are orthogonalized, then rescaled to the input norms.
pub fn orthogonalize(vectors: &[DVector<Complex64>]) -> Result<Vec<DVector<Complex64>>> {
    if vectors.is_empty() {
        return Ok(Vec::new());
    }
    let dim = vectors[0].len();
    if vectors.len() > dim {
        return Err(JamdetError::DegenerateInput(format!(
            "{} vectors cannot be independent in dimension {dim}",
            vectors.len()
        )));
    }
    let mut basis: Vec<DVector<Complex64>> = Vec::with_capacity(vectors.len());
    let mut out = Vec::with_capacity(vectors.len());
    for v in vectors {
        if v.len() != dim {
            return Err(JamdetError::InvalidArgument("mixed vector dimensions".into()));
        }
        let norm = v.norm();
        let mut w = v.clone();
        for b in &basis {
            let proj = b.dotc(&w);
            w -= b * proj;
        }
        let residual = w.norm();
        if residual < 1e-12 {
            return Err(JamdetError::DegenerateInput(
                "vectors are numerically linearly dependent".into(),
            ));
        }
        let unit = w / Complex64::new(residual, 0.0);
        out.push(&unit * Complex64::new(norm, 0.0));
        basis.push(unit);
    }
    Ok(out)
}

/// Options for [`assemble_received`].
#[derive(Debug, Clone, Copy, Default)]
pub struct AssembleOptions {
    /// Orthogonalize all channel vectors jointly and all symbol vectors
    /// jointly (multi-jammer identity experiments).
    pub orthogonal_construction: bool,
    /// Redraw channel vectors for every sample instead of once per window.
    pub fast_fading: bool,
}

/// Draws one received matrix under the given hypothesis.
///
/// Channel vectors are drawn once per sensing window (unless `fast_fading`),
/// TN and JN symbols are QPSK at their configured powers, and noise is CSCG
/// with the scenario's covariance.
pub fn assemble_received<R: Rng>(
    scenario: &Scenario,
    hypothesis: Hypothesis,
    rng: &mut R,
    options: AssembleOptions,
) -> Result<ReceivedMatrix> {
    scenario.validate()?;
    let active = hypothesis.active_jammers();
    if scenario.jammers.len() < active {
        return Err(JamdetError::InvalidArgument(format!(
            "{hypothesis} requires {active} jammer(s), scenario has {}",
            scenario.jammers.len()
        )));
    }
    let (k, n) = (scenario.k, scenario.n);
    let ps = scenario.ps();

    // TN channels and symbols.
    let mut channels: Vec<DVector<Complex64>> = Vec::new();
    let mut symbols: Vec<DVector<Complex64>> = Vec::new();
    for _ in 0..scenario.m {
        channels.push(gen_cscg_vector(k, scenario.sigma2_hs, rng)?);
        symbols.push(gen_qpsk(n, ps, rng)?);
    }
    // JN channels and symbols; correlated jammers reference the first one.
    for l in 0..active {
        let spec = scenario.jammers[l];
        let pj = scenario.pj(l);
        let (h, j) = if l == 0 {
            (
                gen_cscg_vector(k, scenario.sigma2_hj, rng)?,
                gen_qpsk(n, pj, rng)?,
            )
        } else {
            let base_h = channels[scenario.m].clone();
            let base_j = symbols[scenario.m].clone();
            let h = gen_correlated_vector(&base_h, spec.channel_corr, scenario.sigma2_hj, rng)?;
            let j = if spec.symbol_corr == 1.0 {
                base_j
            } else {
                let fresh = gen_qpsk(n, pj, rng)?;
                let a = spec.symbol_corr;
                &base_j * Complex64::new(a, 0.0)
                    + fresh * Complex64::new((1.0 - a * a).sqrt(), 0.0)
            };
            (h, j)
        };
        channels.push(h);
        symbols.push(j);
    }

    if options.orthogonal_construction {
        channels = orthogonalize(&channels)?;
        symbols = orthogonalize(&symbols)?;
    }

    let mut data = DMatrix::<Complex64>::zeros(k, n);
    if options.fast_fading {
        // Channels redrawn per sample; the per-source variance is kept.
        for col in 0..n {
            for (src, sym) in symbols.iter().enumerate() {
                let var = if src < scenario.m {
                    scenario.sigma2_hs
                } else {
                    scenario.sigma2_hj
                };
                let h = gen_cscg_vector(k, var, rng)?;
                for row in 0..k {
                    data[(row, col)] += h[row] * sym[col];
                }
            }
        }
    } else {
        for (h, s) in channels.iter().zip(symbols.iter()) {
            for col in 0..n {
                for row in 0..k {
                    data[(row, col)] += h[row] * s[col];
                }
            }
        }
    }

    // Additive noise.
    match &scenario.noise_cov {
        NoiseCovariance::White(v) => {
            let s = (v / 2.0).sqrt();
            for c in data.iter_mut() {
                *c += Complex64::new(s * standard_normal(rng), s * standard_normal(rng));
            }
        }
        NoiseCovariance::General(r) => {
            let chol = r
                .clone()
                .cholesky()
                .ok_or_else(|| JamdetError::NotPositiveDefinite("noise covariance".into()))?;
            let l = chol.l();
            for col in 0..n {
                let w = gen_cscg_vector(k, 1.0, rng)?;
                let colored = &l * w;
                for row in 0..k {
                    data[(row, col)] += colored[row];
                }
            }
        }
    }

    Ok(ReceivedMatrix {
        data,
        hypothesis_label: hypothesis,
    })
}

/// Noise whitening: `Y' = L Y` with `L^H L = R_w^{-1}`, so pure-noise columns
/// of `Y'` have identity covariance. `L` is full rank, so signal rank is
/// preserved.
pub fn whiten(y: &ReceivedMatrix, noise_cov: &NoiseCovariance) -> Result<ReceivedMatrix> {
    match noise_cov {
        NoiseCovariance::White(v) => {
            if *v <= 0.0 {
                return Err(JamdetError::NotPositiveDefinite("non-positive variance".into()));
            }
            Ok(ReceivedMatrix {
                data: &y.data * Complex64::new(1.0 / v.sqrt(), 0.0),
                hypothesis_label: y.hypothesis_label,
            })
        }
        NoiseCovariance::General(r) => {
            let inv = r
                .clone()
                .cholesky()
                .ok_or_else(|| JamdetError::NotPositiveDefinite("covariance".into()))?
                .inverse();
            let chol_inv = inv
                .cholesky()
                .ok_or_else(|| JamdetError::NotPositiveDefinite("inverse covariance".into()))?;
            // R_w^{-1} = C C^H with C lower triangular; L = C^H.
            let l = chol_inv.l().adjoint();
            Ok(ReceivedMatrix {
                data: &l * &y.data,
                hypothesis_label: y.hypothesis_label,
            })
        }
    }
}

/// Column covariance of `Y` under H0 with deterministic TN channels,
/// `R_Y = P_s sum_m h_m h_m^H + sigma2_w I`, plus its eigenvalues made
/// strictly decreasing by an index-ladder perturbation: within each tied
/// group the bottom value is kept and each value above gains one extra
/// `epsilon`.
pub fn build_ry(
    channels: &[DVector<Complex64>],
    ps: f64,
    sigma2_w: f64,
    epsilon: f64,
) -> Result<(DMatrix<Complex64>, Vec<f64>)> {
    if channels.is_empty() && sigma2_w <= 0.0 {
        return Err(JamdetError::InvalidArgument("need positive noise variance".into()));
    }
    if epsilon < 0.0 {
        return Err(JamdetError::InvalidArgument("epsilon must be non-negative".into()));
    }
    let k = if channels.is_empty() {
        return Err(JamdetError::InvalidArgument(
            "build_ry needs at least the dimension via one channel; use build_ry_dim for M=0"
                .into(),
        ));
    } else {
        channels[0].len()
    };
    build_ry_inner(channels, k, ps, sigma2_w, epsilon)
}

/// `build_ry` for the noise-only case (M = 0), where the dimension cannot be
/// inferred from channel vectors.
pub fn build_ry_dim(
    k: usize,
    channels: &[DVector<Complex64>],
    ps: f64,
    sigma2_w: f64,
    epsilon: f64,
) -> Result<(DMatrix<Complex64>, Vec<f64>)> {
    build_ry_inner(channels, k, ps, sigma2_w, epsilon)
}

fn build_ry_inner(
    channels: &[DVector<Complex64>],
    k: usize,
    ps: f64,
    sigma2_w: f64,
    epsilon: f64,
) -> Result<(DMatrix<Complex64>, Vec<f64>)> {
    if sigma2_w <= 0.0 {
        return Err(JamdetError::InvalidArgument("sigma2_w must be positive".into()));
    }
    let mut ry = DMatrix::<Complex64>::identity(k, k) * Complex64::new(sigma2_w, 0.0);
    for h in channels {
        if h.len() != k {
            return Err(JamdetError::InvalidArgument("channel dimension mismatch".into()));
        }
        ry += (h * h.adjoint()) * Complex64::new(ps, 0.0);
    }
    let eig = ry.clone().symmetric_eigen();
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| b.partial_cmp(a).unwrap());

    // Break ties (relative tolerance) with the epsilon ladder, bottom-up.
    let scale = vals[0].abs().max(sigma2_w);
    let tol = 1e-9 * scale;
    let mut zeta = vals.clone();
    let mut i = k;
    while i > 0 {
        let mut j = i - 1;
        while j > 0 && (vals[j - 1] - vals[i - 1]).abs() <= tol {
            j -= 1;
        }
        // Tied group occupies indices j..i (0-based); bottom stays put.
        for (step, idx) in (j..i).rev().enumerate() {
            zeta[idx] = vals[i - 1] + step as f64 * epsilon;
        }
        i = j;
    }
    for w in zeta.windows(2) {
        if w[0] <= w[1] {
            return Err(JamdetError::DegenerateCovariance(format!(
                "eigenvalues not strictly decreasing after perturbation: {:?}",
                zeta
            )));
        }
    }
    Ok((ry, zeta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;
    use approx::assert_relative_eq;

    fn base_scenario() -> Scenario {
        Scenario {
            k: 8,
            n: 20,
            m: 1,
            jammers: vec![JammerSpec {
                gamma_j_db: -5.0,
                channel_corr: 0.0,
                symbol_corr: 0.0,
            }],
            gamma_s_db: 5.0,
            sigma2_w: 1.0,
            sigma2_hs: 1.0,
            sigma2_hj: 1.0,
            noise_cov: NoiseCovariance::White(1.0),
            seed: 1,
        }
    }

    #[test]
    fn qpsk_constant_modulus() {
        let mut rng = derive_rng(0, &[1]);
        let s = gen_qpsk(4, 1.0, &mut rng).unwrap();
        for c in s.iter() {
            assert_relative_eq!(c.norm_sqr(), 1.0, max_relative = 1e-15);
        }
        let s = gen_qpsk(1000, 2.0, &mut rng).unwrap();
        let mean: f64 = s.iter().map(|c| c.norm_sqr()).sum::<f64>() / 1000.0;
        assert_relative_eq!(mean, 2.0, max_relative = 1e-14);
    }

    #[test]
    fn qpsk_symbol_frequencies_uniform() {
        let mut rng = derive_rng(7, &[2]);
        let s = gen_qpsk(100_000, 1.0, &mut rng).unwrap();
        let mut counts = [0usize; 4];
        for c in s.iter() {
            let idx = (if c.re > 0.0 { 0 } else { 1 }) + (if c.im > 0.0 { 0 } else { 2 });
            counts[idx] += 1;
        }
        for c in counts {
            let freq = c as f64 / 100_000.0;
            assert!((freq - 0.25).abs() < 0.01, "freq {freq}");
        }
    }

    #[test]
    fn qpsk_rejects_bad_args() {
        let mut rng = derive_rng(0, &[3]);
        assert!(gen_qpsk(0, 1.0, &mut rng).is_err());
        assert!(gen_qpsk(4, 0.0, &mut rng).is_err());
    }

    #[test]
    fn cscg_moments() {
        let mut rng = derive_rng(11, &[4]);
        let v = gen_cscg_vector(1_000_000, 1.0, &mut rng).unwrap();
        let var = v.iter().map(|c| c.norm_sqr()).sum::<f64>() / v.len() as f64;
        assert!((var - 1.0).abs() < 0.01, "variance {var}");
        // Real/imag correlation.
        let n = v.len() as f64;
        let (mut sr, mut si, mut sri, mut srr, mut sii) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for c in v.iter() {
            sr += c.re;
            si += c.im;
            sri += c.re * c.im;
            srr += c.re * c.re;
            sii += c.im * c.im;
        }
        let cov = sri / n - (sr / n) * (si / n);
        let corr = cov / ((srr / n - (sr / n).powi(2)).sqrt() * (sii / n - (si / n).powi(2)).sqrt());
        assert!(corr.abs() < 0.01, "corr {corr}");
    }

    #[test]
    fn cscg_rejects_zero_variance() {
        let mut rng = derive_rng(0, &[5]);
        assert!(gen_cscg_vector(4, 0.0, &mut rng).is_err());
    }

    #[test]
    fn correlated_vector_cases() {
        let mut rng = derive_rng(3, &[6]);
        let base = gen_cscg_vector(100_000, 1.0, &mut rng).unwrap();
        let copy = gen_correlated_vector(&base, 1.0, 1.0, &mut rng).unwrap();
        assert_eq!(base, copy);
        assert!(gen_correlated_vector(&base, 1.5, 1.0, &mut rng).is_err());

        for (alpha, expect) in [(0.0, 0.0), (0.5, 0.5)] {
            let out = gen_correlated_vector(&base, alpha, 1.0, &mut rng).unwrap();
            let num: Complex64 = base.iter().zip(out.iter()).map(|(a, b)| a.conj() * b).sum();
            let den = base.norm() * out.norm();
            let corr = (num / Complex64::new(den, 0.0)).norm();
            assert!(
                (corr - expect).abs() < 0.02,
                "alpha {alpha}: corr {corr} vs {expect}"
            );
        }
    }

    #[test]
    fn orthogonalize_textbook_case() {
        let v1 = DVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
        let v2 = DVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)]);
        let out = orthogonalize(&[v1.clone(), v2]).unwrap();
        assert_relative_eq!((&out[0] - &v1).norm(), 0.0, epsilon = 1e-12);
        assert_relative_eq!(out[1][0].norm(), 0.0, epsilon = 1e-12);
        assert_relative_eq!(out[1][1].norm(), 2f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn orthogonalize_fixed_point_and_gram() {
        let e1 = DVector::from_vec(vec![Complex64::new(2.0, 0.0), Complex64::new(0.0, 0.0)]);
        let e2 = DVector::from_vec(vec![Complex64::new(0.0, 0.0), Complex64::new(0.0, 3.0)]);
        let out = orthogonalize(&[e1.clone(), e2.clone()]).unwrap();
        assert!((&out[0] - &e1).norm() < 1e-12);
        assert!((&out[1] - &e2).norm() < 1e-12);

        let mut rng = derive_rng(9, &[7]);
        let vs: Vec<_> = (0..5)
            .map(|_| gen_cscg_vector(8, 1.0, &mut rng).unwrap())
            .collect();
        let out = orthogonalize(&vs).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let ip = out[i].dotc(&out[j]).norm();
                if i != j {
                    assert!(ip < 1e-10, "gram({i},{j}) = {ip}");
                } else {
                    assert_relative_eq!(ip, vs[i].norm_squared(), max_relative = 1e-10);
                }
            }
        }
    }

    #[test]
    fn orthogonalize_rejects_dependent() {
        let v1 = DVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(2.0, 0.0)]);
        let v2 = &v1 * Complex64::new(3.0, 0.0);
        assert!(matches!(
            orthogonalize(&[v1, v2]),
            Err(JamdetError::DegenerateInput(_))
        ));
    }

    fn numerical_rank(m: &DMatrix<Complex64>) -> usize {
        let svals = m.clone().svd(false, false).singular_values;
        let top = svals[0];
        svals.iter().filter(|s| **s > 1e-5 * top).count()
    }

    #[test]
    fn rank_law_near_noiseless() {
        let mut sc = base_scenario();
        sc.noise_cov = NoiseCovariance::White(1e-12);
        sc.sigma2_w = 1.0; // powers stay at nominal level
        let mut rng = derive_rng(sc.seed, &[8]);
        let y0 = assemble_received(&sc, Hypothesis::H0, &mut rng, Default::default()).unwrap();
        assert_eq!(numerical_rank(&y0.data), 1);
        let y1 = assemble_received(&sc, Hypothesis::H1, &mut rng, Default::default()).unwrap();
        assert_eq!(numerical_rank(&y1.data), 2);
    }

    #[test]
    fn hypothesis_jammer_mismatch_rejected() {
        let mut sc = base_scenario();
        sc.jammers.clear();
        let mut rng = derive_rng(0, &[9]);
        assert!(assemble_received(&sc, Hypothesis::H1, &mut rng, Default::default()).is_err());
    }

    #[test]
    fn energy_budget_h0() {
        let sc = base_scenario();
        let mut total = 0.0;
        let trials = 10_000;
        for t in 0..trials {
            let mut rng = derive_rng(42, &[10, t]);
            let y = assemble_received(&sc, Hypothesis::H0, &mut rng, Default::default()).unwrap();
            total += y.data.iter().map(|c| c.norm_sqr()).sum::<f64>();
        }
        let mean = total / (trials as f64 * (sc.k * sc.n) as f64);
        let expected = sc.sigma2_w + sc.ps() * sc.sigma2_hs;
        assert!(
            (mean / expected - 1.0).abs() < 0.02,
            "mean {mean} vs {expected}"
        );
    }

    #[test]
    fn whiten_scalar_and_identity() {
        let sc = base_scenario();
        let mut rng = derive_rng(5, &[11]);
        let y = assemble_received(&sc, Hypothesis::H0, &mut rng, Default::default()).unwrap();
        let w1 = whiten(&y, &NoiseCovariance::White(4.0)).unwrap();
        assert!((&w1.data * Complex64::new(2.0, 0.0) - &y.data).norm() < 1e-12);
        let w2 = whiten(&y, &NoiseCovariance::General(DMatrix::identity(sc.k, sc.k))).unwrap();
        assert!((&w2.data - &y.data).norm() < 1e-10);
    }

    #[test]
    fn whiten_diagonal_covariance_gives_identity_sample_cov() {
        let k = 4;
        let diag: Vec<f64> = vec![0.5, 1.0, 2.0, 4.0];
        let r = DMatrix::from_fn(k, k, |i, j| {
            if i == j {
                Complex64::new(diag[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let cols = 10_000;
        let mut rng = derive_rng(77, &[12]);
        let mut data = DMatrix::<Complex64>::zeros(k, cols);
        for c in 0..cols {
            for i in 0..k {
                data[(i, c)] = gen_cscg_vector(1, diag[i], &mut rng).unwrap()[0];
            }
        }
        let y = ReceivedMatrix {
            data,
            hypothesis_label: Hypothesis::H0,
        };
        let w = whiten(&y, &NoiseCovariance::General(r)).unwrap();
        let cov = (&w.data * w.data.adjoint()) / Complex64::new(cols as f64, 0.0);
        for i in 0..k {
            for j in 0..k {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (cov[(i, j)].norm() - expect).abs() < 0.05,
                    "cov({i},{j}) = {}",
                    cov[(i, j)]
                );
            }
        }
    }

    #[test]
    fn whiten_idempotent_on_covariance() {
        let sc = base_scenario();
        let mut rng = derive_rng(5, &[13]);
        let y = assemble_received(&sc, Hypothesis::H0, &mut rng, Default::default()).unwrap();
        let r = NoiseCovariance::White(2.5);
        let once = whiten(&y, &r).unwrap();
        let twice = whiten(&once, &NoiseCovariance::White(1.0)).unwrap();
        assert!((&once.data - &twice.data).norm() < 1e-12);
    }

    #[test]
    fn determinism_from_seed() {
        let sc = base_scenario();
        let a = assemble_received(
            &sc,
            Hypothesis::H1,
            &mut derive_rng(sc.seed, &[14, 3]),
            Default::default(),
        )
        .unwrap();
        let b = assemble_received(
            &sc,
            Hypothesis::H1,
            &mut derive_rng(sc.seed, &[14, 3]),
            Default::default(),
        )
        .unwrap();
        assert_eq!(a.data, b.data);
    }

    #[test]
    fn build_ry_unit_channel() {
        let h = DVector::from_vec(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
        ]);
        let (_, zeta) = build_ry(&[h], 2.0, 1.0, 1e-3).unwrap();
        assert_relative_eq!(zeta[0], 3.0, epsilon = 1e-10);
        assert_relative_eq!(zeta[1], 1.0 + 1e-3, epsilon = 1e-10);
        assert_relative_eq!(zeta[2], 1.0, epsilon = 1e-10);
    }

    #[test]
    fn build_ry_noise_only_ladder() {
        let (ry, zeta) = build_ry_dim(3, &[], 0.0, 1.0, 1e-3).unwrap();
        assert!((ry - DMatrix::<Complex64>::identity(3, 3)).norm() < 1e-12);
        assert_relative_eq!(zeta[0], 1.0 + 2e-3, epsilon = 1e-12);
        assert_relative_eq!(zeta[1], 1.0 + 1e-3, epsilon = 1e-12);
        assert_relative_eq!(zeta[2], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn build_ry_matches_dense_eigensolver() {
        let mut rng = derive_rng(15, &[15]);
        let h1 = gen_cscg_vector(3, 1.0, &mut rng).unwrap();
        let h2 = gen_cscg_vector(3, 1.0, &mut rng).unwrap();
        let ps = 1.7;
        let (ry, zeta) = build_ry(&[h1.clone(), h2.clone()], ps, 0.9, 0.0).unwrap();
        let eig = ry.symmetric_eigen();
        let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (z, v) in zeta.iter().zip(vals.iter()) {
            assert_relative_eq!(z, v, epsilon = 1e-10);
        }
    }

    #[test]
    fn build_ry_rejects_flat_without_epsilon() {
        assert!(matches!(
            build_ry_dim(3, &[], 0.0, 1.0, 0.0),
            Err(JamdetError::DegenerateCovariance(_))
        ));
    }
}
