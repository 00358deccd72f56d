//! Joint ordered-eigenvalue density of the correlated central complex
//! Wishart matrix, and the analytic false-alarm probabilities built on it.
//!
//! The density is `f(lambda) = c0 |E(lambda, zeta)| |V(lambda)| prod_k
//! lambda_k^{N-K}` with `[V]_{i,j} = lambda_j^{i-1}` and `[E]_{i,j} =
//! exp(-lambda_j / zeta_i)`, where `zeta` holds the strictly decreasing
//! eigenvalues of the column covariance `R_Y`. All determinants are
//! evaluated with per-column log scaling so large `N` does not underflow.
//!
//! The module works in the eigenvalue domain of `Y Y^H`; converting a
//! detector threshold `lambda^2(Y) / sigma2_w` into this domain
//! (multiply by `sigma2_w`) is the caller's responsibility.

use nalgebra::DMatrix;

use crate::error::{JamdetError, Result};
use crate::quad::integrate;

/// Which analytic false-alarm curve to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalyticDetector {
    /// Second-largest eigenvalue (K = 3, M = 1 covariance).
    Ssv,
    /// Third-largest eigenvalue (K = 3, M = 2 covariance).
    Ksv,
}

/// Covariance eigenvalues and sample count for the analytic machinery.
#[derive(Debug, Clone)]
pub struct WishartSpec {
    pub k: usize,
    pub n: usize,
    /// Strictly decreasing positive eigenvalues of `R_Y`.
    pub zeta: Vec<f64>,
}

impl WishartSpec {
    pub fn new(n: usize, zeta: Vec<f64>) -> Result<Self> {
        let k = zeta.len();
        if k == 0 || n <= k {
            return Err(JamdetError::InvalidArgument(format!(
                "need N > K >= 1, got N={n}, K={k}"
            )));
        }
        for w in zeta.windows(2) {
            if w[0] <= w[1] {
                return Err(JamdetError::InvalidArgument(
                    "zeta must be strictly decreasing".into(),
                ));
            }
        }
        if zeta[k - 1] <= 0.0 {
            return Err(JamdetError::InvalidArgument("zeta must be positive".into()));
        }
        Ok(Self { k, n, zeta })
    }
}

/// Immutable evaluation context: normalization constant, truncation bound,
/// and quadrature tolerances. Shareable across threads.
#[derive(Debug, Clone)]
pub struct PdfContext {
    pub spec: WishartSpec,
    ln_c0: f64,
    /// Sign of `c0 = 1/det A`; negative for K = 2, 3 since the decreasing
    /// zeta order reverses the rows of the generalized Vandermonde moment
    /// matrix. The determinant signs in the density cancel it back out.
    sign_c0: f64,
    /// Upper integration bound standing in for infinity.
    pub lambda_max: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
}

fn ln_factorial(p: usize) -> f64 {
    (2..p).map(|k| (k as f64).ln()).sum()
}

/// `(sign, ln|det|)` of a small matrix after per-column max-abs scaling.
fn log_det_scaled(mut m: DMatrix<f64>) -> (f64, f64) {
    let mut ln = 0.0;
    for j in 0..m.ncols() {
        let scale = m.column(j).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if scale == 0.0 {
            return (0.0, f64::NEG_INFINITY);
        }
        ln += scale.ln();
        for i in 0..m.nrows() {
            m[(i, j)] /= scale;
        }
    }
    let det = m.lu().determinant();
    if det == 0.0 {
        (0.0, f64::NEG_INFINITY)
    } else {
        (det.signum(), ln + det.abs().ln())
    }
}

/// `(sign, ln|det A|)` of the moment matrix `A_{i,j} = Gamma(N-K+j)
/// zeta_i^{N-K+j}`, whose inverse determinant is the normalization constant
/// (the ordered-region integral of the two determinants separates into
/// per-column Gamma integrals).
fn log_det_moments(spec: &WishartSpec) -> (f64, f64) {
    let (k, n) = (spec.k, spec.n);
    let z0 = spec.zeta[0];
    let mut ln = 0.0;
    let mut resid = DMatrix::<f64>::zeros(k, k);
    for j in 1..=k {
        let p = n - k + j;
        ln += ln_factorial(p) + p as f64 * z0.ln();
        for i in 0..k {
            resid[(i, j - 1)] = (spec.zeta[i] / z0).powi(p as i32);
        }
    }
    let (sign, ln_r) = log_det_scaled(resid);
    (sign, ln + ln_r)
}

impl PdfContext {
    /// Builds a context with the default tolerances (absolute 1e-8, relative
    /// 1e-6 per quadrature level) and a truncation bound doubled until the
    /// tail mass beyond it is below 1e-8.
    pub fn new(spec: WishartSpec) -> Result<Self> {
        let (sign, ln_det) = log_det_moments(&spec);
        if sign == 0.0 || !ln_det.is_finite() {
            return Err(JamdetError::NumericalFailure(
                "normalization determinant vanishes; zeta too close to degenerate".into(),
            ));
        }
        let n = spec.n as f64;
        let mut ctx = Self {
            lambda_max: n * spec.zeta[0] * (1.0 + 10.0 / n.sqrt()),
            spec,
            ln_c0: -ln_det,
            sign_c0: sign,
            abs_tol: 1e-8,
            rel_tol: 1e-6,
        };
        // Double the bound until another doubling moves the captured mass by
        // less than 1e-8 and the mass itself sits at 1 within quadrature
        // accuracy.
        let mut mass = ctx.cone_mass(ctx.lambda_max);
        for _ in 0..8 {
            let doubled = ctx.cone_mass(2.0 * ctx.lambda_max);
            if (doubled - mass).abs() < 1e-8 && (mass - 1.0).abs() < 1e-4 {
                ctx.lambda_max *= 2.0;
                return Ok(ctx);
            }
            ctx.lambda_max *= 2.0;
            mass = doubled;
        }
        Err(JamdetError::NumericalFailure(
            "truncation bound did not capture the eigenvalue bulk".into(),
        ))
    }

    /// Magnitude of the normalization constant `c0`. Its parity (from the
    /// decreasing zeta row order) is tracked separately and cancels against
    /// the determinant signs inside [`Self::density`].
    pub fn c0(&self) -> f64 {
        self.ln_c0.exp()
    }

    /// Density of the ordered eigenvalue vector; zero off the support.
    pub fn density(&self, lambdas: &[f64]) -> f64 {
        let (k, n) = (self.spec.k, self.spec.n);
        debug_assert_eq!(lambdas.len(), k);
        if lambdas[k - 1] < 0.0 {
            return 0.0;
        }
        if lambdas.iter().any(|l| *l == 0.0) {
            return 0.0; // the lambda^{N-K} factor (N > K always here)
        }
        // V(lambda): Vandermonde closed form.
        let mut sign = self.sign_c0;
        let mut ln = self.ln_c0;
        for i in 0..k {
            for j in (i + 1)..k {
                let d = lambdas[j] - lambdas[i];
                if d == 0.0 {
                    return 0.0;
                }
                if d < 0.0 {
                    sign = -sign;
                }
                ln += d.abs().ln();
            }
        }
        // E(lambda, zeta), scaled by the dominant column entries e^{-l/zeta_1}.
        let z0 = self.spec.zeta[0];
        let mut e = DMatrix::<f64>::zeros(k, k);
        for j in 0..k {
            ln -= lambdas[j] / z0;
            for i in 0..k {
                e[(i, j)] = (-lambdas[j] * (1.0 / self.spec.zeta[i] - 1.0 / z0)).exp();
            }
        }
        let (es, eln) = log_det_scaled(e);
        if es == 0.0 {
            return 0.0;
        }
        sign *= es;
        ln += eln;
        for l in lambdas {
            ln += (n - k) as f64 * l.ln();
        }
        let val = sign * ln.exp();
        // Cancellation near ties can leave a tiny negative residue.
        val.max(0.0)
    }

    /// Probability mass of the ordered cone `upper > l_1 > ... > l_K > 0`.
    fn cone_mass(&self, upper: f64) -> f64 {
        match self.spec.k {
            1 => integrate(
                |l| self.density(&[l]),
                0.0,
                upper,
                self.abs_tol,
                self.rel_tol,
            ),
            2 => integrate(
                |l1| {
                    integrate(
                        |l2| self.density(&[l1, l2]),
                        0.0,
                        l1,
                        self.abs_tol,
                        self.rel_tol,
                    )
                },
                0.0,
                upper,
                self.abs_tol,
                self.rel_tol,
            ),
            3 => integrate(
                |l1| {
                    integrate(
                        |l2| {
                            integrate(
                                |l3| self.density(&[l1, l2, l3]),
                                0.0,
                                l2,
                                self.abs_tol,
                                self.rel_tol,
                            )
                        },
                        0.0,
                        l1,
                        self.abs_tol,
                        self.rel_tol,
                    )
                },
                0.0,
                upper,
                self.abs_tol,
                self.rel_tol,
            ),
            _ => f64::NAN,
        }
    }
}

/// Joint eigenvalue density at a strictly decreasing non-negative point.
pub fn joint_eig_pdf(lambdas: &[f64], ctx: &PdfContext) -> Result<f64> {
    if lambdas.len() != ctx.spec.k {
        return Err(JamdetError::InvalidArgument(format!(
            "expected {} eigenvalues, got {}",
            ctx.spec.k,
            lambdas.len()
        )));
    }
    for w in lambdas.windows(2) {
        if w[0] <= w[1] {
            return Err(JamdetError::InvalidArgument(
                "eigenvalues must be strictly decreasing".into(),
            ));
        }
    }
    if lambdas[lambdas.len() - 1] < 0.0 {
        return Err(JamdetError::InvalidArgument(
            "eigenvalues must be non-negative".into(),
        ));
    }
    Ok(ctx.density(lambdas))
}

/// Normalization constant for the spec, cross-checked by integrating the
/// density over the ordered cone.
pub fn normalization_constant(spec: &WishartSpec, tol: f64) -> Result<f64> {
    let ctx = PdfContext::new(spec.clone())?;
    if spec.k <= 3 {
        let mass = ctx.cone_mass(ctx.lambda_max);
        if (mass - 1.0).abs() > tol {
            return Err(JamdetError::NumericalFailure(format!(
                "normalized cone mass {mass} deviates from 1 beyond {tol}"
            )));
        }
    }
    Ok(ctx.c0())
}

fn require_k3(ctx: &PdfContext) -> Result<()> {
    if ctx.spec.k != 3 {
        return Err(JamdetError::UnsupportedDimension(format!(
            "analytic false-alarm curves are derived for K=3 only, got K={}",
            ctx.spec.k
        )));
    }
    Ok(())
}

/// CDF of the second-largest eigenvalue at `eta`:
/// `int_0^eta dl2 int_{l2}^inf dl1 int_0^{l2} dl3 f`.
fn cdf_second(ctx: &PdfContext, lo: f64, hi: f64) -> f64 {
    let top = ctx.lambda_max;
    integrate(
        |l2| {
            integrate(
                |l1| {
                    integrate(
                        |l3| ctx.density(&[l1, l2, l3]),
                        0.0,
                        l2,
                        ctx.abs_tol,
                        ctx.rel_tol,
                    )
                },
                l2,
                top,
                ctx.abs_tol,
                ctx.rel_tol,
            )
        },
        lo,
        hi,
        ctx.abs_tol,
        ctx.rel_tol,
    )
}

/// CDF of the smallest (third) eigenvalue at `eta`:
/// `int_0^eta dl3 int_{l3}^inf dl2 int_{l2}^inf dl1 f`.
fn cdf_third(ctx: &PdfContext, lo: f64, hi: f64) -> f64 {
    let top = ctx.lambda_max;
    integrate(
        |l3| {
            integrate(
                |l2| {
                    integrate(
                        |l1| ctx.density(&[l1, l2, l3]),
                        l2,
                        top,
                        ctx.abs_tol,
                        ctx.rel_tol,
                    )
                },
                l3,
                top,
                ctx.abs_tol,
                ctx.rel_tol,
            )
        },
        lo,
        hi,
        ctx.abs_tol,
        ctx.rel_tol,
    )
}

/// Analytic false-alarm probability of the SSV detector at eigenvalue-domain
/// threshold `eta` (K = 3).
pub fn pfa_ssv_analytic(eta: f64, ctx: &PdfContext) -> Result<f64> {
    Ok(pfa_grid(&[eta], ctx, AnalyticDetector::Ssv)?[0])
}

/// Analytic false-alarm probability of the KSV (M = 2) detector at
/// eigenvalue-domain threshold `eta` (K = 3).
pub fn pfa_ksv_analytic(eta: f64, ctx: &PdfContext) -> Result<f64> {
    Ok(pfa_grid(&[eta], ctx, AnalyticDetector::Ksv)?[0])
}

/// False-alarm probabilities over an ascending threshold grid. The outer
/// integral is accumulated segment by segment, so the returned curve is
/// monotone by construction.
pub fn pfa_grid(etas: &[f64], ctx: &PdfContext, which: AnalyticDetector) -> Result<Vec<f64>> {
    require_k3(ctx)?;
    for (i, e) in etas.iter().enumerate() {
        if *e < 0.0 {
            return Err(JamdetError::InvalidArgument("eta must be >= 0".into()));
        }
        if i > 0 && etas[i] < etas[i - 1] {
            return Err(JamdetError::InvalidArgument("eta grid must be ascending".into()));
        }
    }
    let mut out = Vec::with_capacity(etas.len());
    let mut cdf = 0.0;
    let mut prev = 0.0;
    for &eta in etas {
        let hi = eta.min(ctx.lambda_max);
        if hi > prev {
            cdf += match which {
                AnalyticDetector::Ssv => cdf_second(ctx, prev, hi),
                AnalyticDetector::Ksv => cdf_third(ctx, prev, hi),
            };
            prev = hi;
        }
        out.push((1.0 - cdf).clamp(0.0, 1.0));
    }
    Ok(out)
}

/// Inverts the monotone false-alarm curve by bisection: returns `eta` with
/// `pfa(eta)` within 1e-4 of the target.
pub fn analytic_threshold(
    pfa_target: f64,
    ctx: &PdfContext,
    which: AnalyticDetector,
) -> Result<f64> {
    require_k3(ctx)?;
    if !(0.0 < pfa_target && pfa_target < 1.0) {
        return Err(JamdetError::InvalidArgument(
            "pfa target must lie in (0, 1)".into(),
        ));
    }
    let pfa_at = |eta: f64| -> Result<f64> {
        match which {
            AnalyticDetector::Ssv => pfa_ssv_analytic(eta, ctx),
            AnalyticDetector::Ksv => pfa_ksv_analytic(eta, ctx),
        }
    };
    let (mut lo, mut hi) = (0.0, ctx.lambda_max);
    if pfa_at(hi)? > pfa_target {
        return Err(JamdetError::NumericalFailure(
            "target pfa below the truncated tail; cannot bracket".into(),
        ));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let p = pfa_at(mid)?;
        if (p - pfa_target).abs() <= 1e-4 {
            return Ok(mid);
        }
        if p > pfa_target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 * ctx.lambda_max {
            return Ok(mid);
        }
    }
    Err(JamdetError::NumericalFailure(
        "threshold bisection did not converge".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ctx3() -> PdfContext {
        let spec = WishartSpec::new(20, vec![3.0, 1.001, 1.0]).unwrap();
        PdfContext::new(spec).unwrap()
    }

    #[test]
    fn spec_validation() {
        assert!(WishartSpec::new(3, vec![3.0, 2.0, 1.0]).is_err()); // N <= K
        assert!(WishartSpec::new(10, vec![1.0, 1.0, 0.5]).is_err()); // tie
        assert!(WishartSpec::new(10, vec![1.0, 0.5, -0.1]).is_err());
    }

    #[test]
    fn k1_reduces_to_gamma() {
        let spec = WishartSpec::new(5, vec![1.0]).unwrap();
        let c0 = normalization_constant(&spec, 1e-6).unwrap();
        assert_relative_eq!(c0, 1.0 / 24.0, max_relative = 1e-12);

        // Density at lambda = N * zeta against the Gamma(N, zeta) closed form.
        let ctx = PdfContext::new(WishartSpec::new(5, vec![1.3]).unwrap()).unwrap();
        let lam = 5.0 * 1.3;
        let f = joint_eig_pdf(&[lam], &ctx).unwrap();
        let expect = lam.powi(4) * (-lam / 1.3).exp() / (24.0 * 1.3f64.powi(5));
        assert_relative_eq!(f, expect, max_relative = 1e-10);
    }

    #[test]
    fn k2_normalizes_against_quadrature() {
        let spec = WishartSpec::new(4, vec![2.0, 1.0]).unwrap();
        // normalization_constant itself runs the nested quadrature oracle.
        normalization_constant(&spec, 1e-3).unwrap();
    }

    #[test]
    fn k3_normalizes() {
        let ctx = ctx3();
        let mass = ctx.cone_mass(ctx.lambda_max);
        assert!((mass - 1.0).abs() < 1e-3, "mass {mass}");
    }

    #[test]
    fn c0_scaling_law() {
        // Scaling all zeta by s multiplies the moment determinant by
        // s^{K(N-K) + K(K+1)/2}, i.e. divides c0 by that factor.
        let n = 12;
        let zeta = vec![2.5, 1.4, 0.9];
        let s = 1.7;
        let c_base = PdfContext::new(WishartSpec::new(n, zeta.clone()).unwrap())
            .unwrap()
            .c0();
        let scaled: Vec<f64> = zeta.iter().map(|z| z * s).collect();
        let c_scaled = PdfContext::new(WishartSpec::new(n, scaled).unwrap())
            .unwrap()
            .c0();
        let k = 3.0;
        let expo = k * (n as f64 - k) + k * (k + 1.0) / 2.0;
        assert_relative_eq!(c_scaled / c_base, s.powf(-expo), max_relative = 1e-9);
    }

    #[test]
    fn pdf_domain_checks() {
        let ctx = ctx3();
        assert!(joint_eig_pdf(&[1.0, 2.0, 0.5], &ctx).is_err());
        assert!(joint_eig_pdf(&[2.0, 2.0, 0.5], &ctx).is_err());
        assert_eq!(joint_eig_pdf(&[2.0, 1.0, 0.0], &ctx).unwrap(), 0.0);
    }

    #[test]
    fn pfa_endpoints_and_monotonicity() {
        let ctx = ctx3();
        for which in [AnalyticDetector::Ssv, AnalyticDetector::Ksv] {
            let grid: Vec<f64> = (0..50)
                .map(|i| ctx.lambda_max * i as f64 / 49.0)
                .collect();
            let pfa = pfa_grid(&grid, &ctx, which).unwrap();
            assert_eq!(pfa[0], 1.0);
            assert!(pfa[49] < 1e-6, "tail {}", pfa[49]);
            for w in pfa.windows(2) {
                assert!(w[1] <= w[0] + 1e-12);
            }
        }
    }

    #[test]
    fn threshold_round_trip() {
        let ctx = ctx3();
        let eta = analytic_threshold(0.1, &ctx, AnalyticDetector::Ssv).unwrap();
        let back = pfa_ssv_analytic(eta, &ctx).unwrap();
        assert!((back - 0.1).abs() <= 1e-4, "round trip {back}");

        let eta = analytic_threshold(1.0 - 1e-9, &ctx, AnalyticDetector::Ssv).unwrap();
        assert!(eta < 0.2 * ctx.lambda_max, "near-unit target should sit near 0, got {eta}");
    }

    #[test]
    fn epsilon_insensitivity() {
        // Halving the tie-breaking perturbation must leave pfa essentially
        // unchanged.
        let mk = |eps: f64| {
            PdfContext::new(WishartSpec::new(20, vec![3.0, 1.0 + eps, 1.0]).unwrap()).unwrap()
        };
        let a = mk(1e-3);
        let b = mk(1e-4);
        for eta in [5.0, 10.0, 20.0, 30.0] {
            let pa = pfa_ssv_analytic(eta, &a).unwrap();
            let pb = pfa_ssv_analytic(eta, &b).unwrap();
            assert!((pa - pb).abs() < 1e-3, "eta {eta}: {pa} vs {pb}");
        }
    }
}
