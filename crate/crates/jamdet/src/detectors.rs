//! Test statistics: SSV, KSV, RSV, GRSV, energy / LMP, AIC / MDL order
//! estimation, and the threshold decision rule.
//!
//! Singular values are taken from the SVD of `Y` directly (not from an
//! eigendecomposition of `Y Y^H`) and squared on demand.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{JamdetError, Result};
use crate::rng::hash_to_unit;
use crate::signal::{Hypothesis, ReceivedMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorKind {
    Ssv,
    Ksv,
    Rsv,
    Grsv,
    Ed,
    Lmp,
    Aic,
    Mdl,
    /// No-information stub: a uniform statistic independent of the
    /// hypothesis, used as an end-to-end null check in the harness.
    Null,
}

impl std::fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            DetectorKind::Ssv => "ssv",
            DetectorKind::Ksv => "ksv",
            DetectorKind::Rsv => "rsv",
            DetectorKind::Grsv => "grsv",
            DetectorKind::Ed => "ed",
            DetectorKind::Lmp => "lmp",
            DetectorKind::Aic => "aic",
            DetectorKind::Mdl => "mdl",
            DetectorKind::Null => "null",
        };
        write!(f, "{s}")
    }
}

/// Detector identity plus the side information it needs.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DetectorSpec {
    pub kind: DetectorKind,
    /// Assumed TN count.
    pub m: usize,
    /// Known noise variance (SSV / KSV).
    pub sigma2_w: f64,
    /// Known H0 total variance `P_s sigma2_hs + sigma2_w` (LMP).
    pub sigma2_h0: f64,
}

impl DetectorSpec {
    pub fn new(kind: DetectorKind, m: usize, sigma2_w: f64, sigma2_h0: f64) -> Self {
        Self {
            kind,
            m,
            sigma2_w,
            sigma2_h0,
        }
    }

    /// Checks the dimension requirements against a K-row matrix.
    pub fn check_dims(&self, k: usize) -> Result<()> {
        let ok = match self.kind {
            DetectorKind::Ssv => k >= 2,
            DetectorKind::Ksv => k > self.m,
            DetectorKind::Rsv => k >= 3,
            DetectorKind::Grsv => k > self.m + 1,
            DetectorKind::Aic | DetectorKind::Mdl => k >= 2,
            _ => true,
        };
        if ok {
            Ok(())
        } else {
            Err(JamdetError::InsufficientDimension(format!(
                "{} with M={} needs more than K={} sensing nodes",
                self.kind, self.m, k
            )))
        }
    }

    /// Computes the test statistic for one received matrix.
    pub fn statistic(&self, y: &ReceivedMatrix) -> Result<Statistic> {
        self.check_dims(y.k())?;
        match self.kind {
            DetectorKind::Ssv => ssv(y, self.sigma2_w),
            DetectorKind::Ksv => ksv(y, self.sigma2_w, self.m),
            DetectorKind::Rsv => rsv(y),
            DetectorKind::Grsv => grsv(y, self.m),
            DetectorKind::Ed => energy(y),
            DetectorKind::Lmp => lmp(y, self.sigma2_h0),
            DetectorKind::Aic => {
                let (aic, _) = aic_mdl_order(y)?;
                Ok(Statistic::bare(aic as f64, *self))
            }
            DetectorKind::Mdl => {
                let (_, mdl) = aic_mdl_order(y)?;
                Ok(Statistic::bare(mdl as f64, *self))
            }
            DetectorKind::Null => {
                let mut bytes = Vec::with_capacity(y.data.len() * 16);
                for c in y.data.iter() {
                    bytes.extend_from_slice(&c.re.to_le_bytes());
                    bytes.extend_from_slice(&c.im.to_le_bytes());
                }
                Ok(Statistic::bare(hash_to_unit(&bytes), *self))
            }
        }
    }

    /// Fixed decision threshold for detectors without a tunable one
    /// (AIC / MDL declare jamming when the order estimate exceeds M).
    pub fn fixed_threshold(&self) -> Option<f64> {
        match self.kind {
            DetectorKind::Aic | DetectorKind::Mdl => Some(self.m as f64),
            _ => None,
        }
    }
}

/// Scalar test output with the ordered singular values retained for
/// diagnostics.
#[derive(Debug, Clone)]
pub struct Statistic {
    pub value: f64,
    pub detector: DetectorSpec,
    pub singular_values: Vec<f64>,
}

impl Statistic {
    fn bare(value: f64, detector: DetectorSpec) -> Self {
        Self {
            value,
            detector,
            singular_values: Vec::new(),
        }
    }
}

/// Ordered singular values of `Y`, largest first.
pub fn singular_values(y: &ReceivedMatrix) -> Result<Vec<f64>> {
    if y.data.is_empty() {
        return Err(JamdetError::InvalidArgument("empty matrix".into()));
    }
    if y.k() > y.n() {
        return Err(JamdetError::InvalidArgument(format!(
            "expected K <= N, got {}x{}",
            y.k(),
            y.n()
        )));
    }
    let svd = y.data.clone().try_svd(false, false, f64::EPSILON, 250).ok_or_else(|| {
        JamdetError::NumericalFailure("SVD did not converge".into())
    })?;
    let mut vals: Vec<f64> = svd.singular_values.iter().copied().collect();
    vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(vals)
}

fn with_svals(value: f64, detector: DetectorSpec, svals: Vec<f64>) -> Statistic {
    Statistic {
        value,
        detector,
        singular_values: svals,
    }
}

/// Second-largest singular value test: `lambda_2^2(Y) / sigma2_w`.
pub fn ssv(y: &ReceivedMatrix, sigma2_w: f64) -> Result<Statistic> {
    ksv_impl(y, sigma2_w, 1, DetectorKind::Ssv)
}

/// `(M+1)`-th largest singular value test: `lambda_{M+1}^2(Y) / sigma2_w`.
pub fn ksv(y: &ReceivedMatrix, sigma2_w: f64, m: usize) -> Result<Statistic> {
    ksv_impl(y, sigma2_w, m, DetectorKind::Ksv)
}

fn ksv_impl(y: &ReceivedMatrix, sigma2_w: f64, m: usize, kind: DetectorKind) -> Result<Statistic> {
    if sigma2_w <= 0.0 {
        return Err(JamdetError::InvalidArgument("sigma2_w must be positive".into()));
    }
    if y.k() <= m {
        return Err(JamdetError::InsufficientDimension(format!(
            "need K > M, got K={} M={m}",
            y.k()
        )));
    }
    let svals = singular_values(y)?;
    let value = svals[m] * svals[m] / sigma2_w;
    Ok(with_svals(
        value,
        DetectorSpec::new(kind, m, sigma2_w, 0.0),
        svals,
    ))
}

/// Ratio test `lambda_2^2 / sum_{k>=3} lambda_k^2`; scale invariant, no noise
/// variance needed.
pub fn rsv(y: &ReceivedMatrix) -> Result<Statistic> {
    grsv_impl(y, 1, DetectorKind::Rsv)
}

/// Generalized ratio test `lambda_{M+1}^2 / sum_{k>=M+2} lambda_k^2`.
pub fn grsv(y: &ReceivedMatrix, m: usize) -> Result<Statistic> {
    grsv_impl(y, m, DetectorKind::Grsv)
}

fn grsv_impl(y: &ReceivedMatrix, m: usize, kind: DetectorKind) -> Result<Statistic> {
    if y.k() <= m + 1 {
        return Err(JamdetError::InsufficientDimension(format!(
            "need K > M+1, got K={} M={m}",
            y.k()
        )));
    }
    let svals = singular_values(y)?;
    let num = svals[m] * svals[m];
    let den: f64 = svals[m + 1..].iter().map(|s| s * s).sum();
    if den < 1e-300 {
        return Err(JamdetError::DegenerateInput(
            "residual singular values vanish (noiseless low-rank input)".into(),
        ));
    }
    Ok(with_svals(num / den, DetectorSpec::new(kind, m, 0.0, 0.0), svals))
}

/// Energy detector: Frobenius energy of `Y`.
pub fn energy(y: &ReceivedMatrix) -> Result<Statistic> {
    let value = y.data.iter().map(|c| c.norm_sqr()).sum();
    Ok(Statistic::bare(
        value,
        DetectorSpec::new(DetectorKind::Ed, 0, 0.0, 0.0),
    ))
}

/// Locally most powerful test; a strictly increasing affine function of the
/// energy detector.
pub fn lmp(y: &ReceivedMatrix, sigma2_h0: f64) -> Result<Statistic> {
    if sigma2_h0 <= 0.0 {
        return Err(JamdetError::InvalidArgument("sigma2_h0 must be positive".into()));
    }
    let nk = (y.k() * y.n()) as f64;
    let e = y.data.iter().map(|c| c.norm_sqr()).sum::<f64>();
    let value = -nk.sqrt() + e / (sigma2_h0 * nk.sqrt());
    Ok(Statistic::bare(
        value,
        DetectorSpec::new(DetectorKind::Lmp, 0, 0.0, sigma2_h0),
    ))
}

/// Source-count estimates from the eigenvalues of `Y Y^H / N` using the
/// information-criterion rule for complex-valued data: the criterion at
/// candidate order `d` is `c * N (K-d) ln(arith/geom mean of the K-d smallest
/// eigenvalues) + penalty`, with `c = 2`, penalty `2 d (2K - d)` for AIC and
/// `c = 1`, penalty `d (2K - d) ln(N) / 2` for MDL. Returns `(aic, mdl)`.
pub fn aic_mdl_order(y: &ReceivedMatrix) -> Result<(usize, usize)> {
    let k = y.k();
    let n = y.n();
    if k < 2 || n <= k {
        return Err(JamdetError::InsufficientDimension(format!(
            "AIC/MDL need K >= 2 and N > K, got K={k} N={n}"
        )));
    }
    let svals = singular_values(y)?;
    let eigs: Vec<f64> = svals
        .iter()
        .map(|s| (s * s / n as f64).max(f64::MIN_POSITIVE))
        .collect();
    let nf = n as f64;
    let mut best_aic = (f64::INFINITY, 0usize);
    let mut best_mdl = (f64::INFINITY, 0usize);
    for d in 0..k {
        let tail = &eigs[d..];
        let cnt = tail.len() as f64;
        let arith = tail.iter().sum::<f64>() / cnt;
        let log_geom = tail.iter().map(|e| e.ln()).sum::<f64>() / cnt;
        let fit = nf * cnt * (arith.ln() - log_geom);
        let df = (d * (2 * k - d)) as f64;
        let aic = 2.0 * fit + 2.0 * df;
        let mdl = fit + 0.5 * df * nf.ln();
        if aic < best_aic.0 {
            best_aic = (aic, d);
        }
        if mdl < best_mdl.0 {
            best_mdl = (mdl, d);
        }
    }
    Ok((best_aic.1, best_mdl.1))
}

/// Threshold decision with the strict-inequality convention: H1 iff
/// `value > eta`; ties resolve to H0.
pub fn decide(stat: &Statistic, eta: f64) -> Hypothesis {
    if stat.value > eta {
        Hypothesis::H1
    } else {
        Hypothesis::H0
    }
}

/// Rank-constrained MLE of the noise variance under hypothesis `i`:
/// `sum_{k=M+i+1..K} lambda_k^2 / (N K)`.
pub fn sigma2_mle(y: &ReceivedMatrix, m: usize, i: usize) -> Result<f64> {
    let svals = singular_values(y)?;
    if m + i >= y.k() {
        return Err(JamdetError::InsufficientDimension(
            "no residual singular values for the variance MLE".into(),
        ));
    }
    let nk = (y.k() * y.n()) as f64;
    Ok(svals[m + i..].iter().map(|s| s * s).sum::<f64>() / nk)
}

/// Builds a received matrix from an outer-product sum (test construction
/// helper for orthogonal noiseless cases).
pub fn matrix_from_products(
    k: usize,
    n: usize,
    terms: &[(nalgebra::DVector<Complex64>, nalgebra::DVector<Complex64>)],
) -> ReceivedMatrix {
    let mut data = DMatrix::<Complex64>::zeros(k, n);
    for (h, s) in terms {
        for col in 0..n {
            for row in 0..k {
                data[(row, col)] += h[row] * s[col];
            }
        }
    }
    ReceivedMatrix {
        data,
        hypothesis_label: Hypothesis::H0,
    }
}
