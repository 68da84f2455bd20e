//! Closed-form performance of the SCN detector for a two-element receiver
//! and the ergodic rate of the communication link.
//!
//! Notation: `kappa = lambda_max / lambda_min` of the 2x2 sample covariance
//! built from `L` snapshots, `gamma_e` is the effective SNR, `omega1 = 2 L
//! gamma_e`, and `omega = omega1 / 2` is the trace of the non-centrality
//! matrix of the unnormalised scatter matrix `sum_l y_l y_l^H`.
//!
//! With `y = x / (1 + x)` the eigenvalue ratio maps to `(1/2, 1)`, and the
//! event `kappa <= tau` becomes `b <= y <= a` where `a = tau / (1 + tau)` and
//! `b = 1 / (1 + tau)`. Both probabilities are evaluated as sums of
//! non-negative terms in log space:
//!
//! * `false_alarm_prob` via integer-parameter incomplete beta functions;
//! * `detection_prob` via the Kummer series of `1F1(2L-1; L-1; omega y)`,
//!   whose `m`-th term integrates to a combination of incomplete beta
//!   integrals over the tail `[a, 1]`.
//!
//! The exponential-integral form ([`detection_prob_exponential_integral`])
//! is the same quantity written with `E_{-n}` functions. It suffers from
//! cancellation once `L` grows and is kept for cross-checking small `L`.
//! [`false_alarm_prob_printed`] and [`detection_prob_printed`] evaluate the
//! commonly quoted closed forms verbatim; they are audit helpers only and do
//! not return probabilities in general.

use crate::error::{domain, Error, Result};
use crate::randmat::ComplexMatrix;
use crate::specfun::{
    expint_neg_order, expint_pos_order, expint_pos_order_scaled, gauss_2f1_terminating, incomplete_beta_reg_int,
    ln_factorial, ln_gamma, ln_incomplete_beta_int, LogSum,
};

/// Rounding slack tolerated before a probability is reported out of range.
pub const PROB_SLACK: f64 = 1e-9;

/// Inputs of the detection-probability closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticParams {
    pub l: u32,
    pub tau: f64,
    pub gamma_e: f64,
}

impl AnalyticParams {
    pub fn new(l: u32, tau: f64, gamma_e: f64) -> Result<Self> {
        let p = AnalyticParams { l, tau, gamma_e };
        p.check()?;
        Ok(p)
    }

    /// `omega1 = 2 L gamma_e`.
    pub fn omega1(&self) -> f64 {
        2.0 * self.l as f64 * self.gamma_e
    }

    fn check(&self) -> Result<()> {
        check_l_tau(self.l, self.tau)?;
        if !(self.gamma_e >= 0.0) || !self.gamma_e.is_finite() {
            return Err(domain(format!("gamma_e must be finite and >= 0, got {}", self.gamma_e)));
        }
        Ok(())
    }
}

/// Inputs of the ergodic rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateParams {
    pub n_u: u32,
    /// `sigma_h2 ||W_c||_F^2 / sigma_c2`.
    pub rho: f64,
}

fn check_l_tau(l: u32, tau: f64) -> Result<()> {
    if l < 2 {
        return Err(domain(format!("L must be >= 2, got {l}")));
    }
    if !(tau > 1.0) || !tau.is_finite() {
        return Err(domain(format!("tau must be finite and > 1, got {tau}")));
    }
    Ok(())
}

fn clamp_prob(value: f64, context: impl FnOnce() -> String) -> Result<f64> {
    if !(-PROB_SLACK..=1.0 + PROB_SLACK).contains(&value) {
        return Err(Error::OutOfRange {
            value,
            context: context(),
        });
    }
    Ok(value.clamp(0.0, 1.0))
}

/// `gamma_e = ||G W||_F^2 / (mu sigma_s2)`.
pub fn effective_snr(g: &ComplexMatrix, w: &ComplexMatrix, mu_linear: f64, sigma_s2: f64) -> Result<f64> {
    if !(sigma_s2 > 0.0) {
        return Err(domain("sigma_s2 must be positive"));
    }
    if !(mu_linear >= 1.0) {
        return Err(domain("mu_linear must be >= 1"));
    }
    Ok(g.matmul(w)?.frobenius_norm_sqr() / (mu_linear * sigma_s2))
}

/// Rank-one non-centrality matrix `L gamma_e u u^H / ||u||^2` of the scatter
/// matrix `sum_l y_l y_l^H` (unit noise), for use with
/// [`crate::randmat::NoncentralWishart`].
pub fn noncentrality_matrix(params: &AnalyticParams, direction: &ComplexMatrix) -> Result<ComplexMatrix> {
    if direction.cols() != 1 {
        return Err(Error::Dimension("direction must be a column vector".into()));
    }
    let norm2 = direction.frobenius_norm_sqr();
    if !(norm2 > 0.0) {
        return Err(domain("direction must be non-zero"));
    }
    let outer = direction.matmul(&direction.adjoint())?;
    Ok(outer.scale_real(params.l as f64 * params.gamma_e / norm2))
}

/// `Pr(kappa > tau | H0)` for a 2x2 central complex Wishart with `L`
/// degrees of freedom.
///
/// Integrating the density `C (x-1)^2 x^{L-2} / (x+1)^{2L}` over `(tau, inf)`
/// gives `2(2L-1) I_b(L-1, L-1) - 4(L-1) I_b(L, L)` with `b = 1/(1+tau)`.
pub fn false_alarm_prob(l: u32, tau: f64) -> Result<f64> {
    check_l_tau(l, tau)?;
    let b = 1.0 / (1.0 + tau);
    let lf = l as f64;
    let lo = l as u64;
    let i1 = incomplete_beta_reg_int(lo - 1, lo - 1, b)?;
    let i2 = incomplete_beta_reg_int(lo, lo, b)?;
    let value = 2.0 * (2.0 * lf - 1.0) * i1 - 4.0 * (lf - 1.0) * i2;
    clamp_prob(value, || format!("false_alarm_prob(L={l}, tau={tau})"))
}

/// The widely quoted Gauss-hypergeometric closed form for the false-alarm
/// probability, evaluated verbatim and without clamping. It does not agree
/// with the H0 density (for example it returns 1.375 at `L = 2, tau = 3`).
pub fn false_alarm_prob_printed(l: u32, tau: f64) -> Result<f64> {
    check_l_tau(l, tau)?;
    let lf = l as f64;
    let c = 2.0 * (ln_gamma(lf + 0.5)? - 0.5 * std::f64::consts::PI.ln() - ln_gamma(lf + 1.0)?).exp() - 1.0;
    let num = lf * (1.0 - tau) + 2.0 * (gauss_2f1_terminating(l, tau)? - 1.0);
    let ln_den = (1.0 - lf) * (4.0 * tau).ln() + (2.0 * lf - 1.0) * (1.0 + tau).ln();
    Ok(1.0 - c * num * (-ln_den).exp())
}

/// `ln int_a^1 y^{p-1} (1-y)^{q-1} dy` for `a = 1 - b`, i.e. the lower
/// incomplete beta integral of `(q, p)` at `b`.
fn ln_upper_beta(p: u64, q: u64, b: f64) -> f64 {
    ln_incomplete_beta_int(q, p, b)
}

/// `ln(e^x - e^y)` for `x > y`; `-inf` if the difference underflows.
fn ln_sub_exp(x: f64, y: f64) -> f64 {
    if y == f64::NEG_INFINITY {
        return x;
    }
    if y >= x {
        return f64::NEG_INFINITY;
    }
    x + (-(y - x).exp_m1()).ln()
}

/// `U(p, q) = int_a^1 y^{p-1} (1-y)^{q-1} dy` advanced in `p` through the
/// all-positive recurrence `U(p+1, q) = (p U(p, q) + b^q a^p) / (p + q)`.
///
/// Kept as `u * e^offset` with `u` in linear scale, because rounding a large
/// logarithm at every step would accumulate.
struct TailIntegral {
    u: f64,
    offset: f64,
}

impl TailIntegral {
    fn new(ln_value: f64) -> Self {
        TailIntegral {
            u: 1.0,
            offset: ln_value,
        }
    }

    fn ln(&self) -> f64 {
        self.offset + self.u.ln()
    }

    fn step(&mut self, p: u64, q: u64, ln_a: f64, ln_b: f64) {
        let fresh = (q as f64 * ln_b + p as f64 * ln_a - self.offset).exp();
        self.u = (p as f64 * self.u + fresh) / (p + q) as f64;
        if self.u < 1e-100 {
            self.offset += self.u.ln();
            self.u = 1.0;
        }
    }
}

/// Hard cap on the number of Kummer terms, far beyond any `omega` in use.
const MAX_SERIES_TERMS: u64 = 2_000_000;

/// `Pr(kappa > tau | H1)` for a 2x2 non-central complex Wishart with
/// rank-one non-centrality `omega = omega1 / 2 = L gamma_e`.
///
/// Expanding `1F1(2L-1; L-1; omega y)` in its power series gives
/// `P_D = Gamma(2L-1) / Gamma(L-1)^2 * sum_{m>=1} e^{-omega} omega^{m-1}
/// (2L-1)_m / ((L-1)_m m!) * T_m` with the tail moment
/// `T_m = int_a^1 (2y-1) (y(1-y))^{L-2} [y^m - (1-y)^m] dy > 0`.
/// The `m = 0` term vanishes by symmetry, so the sum is regular at
/// `omega = 0`, where its first term is exactly the false-alarm
/// probability. Summing the tail directly keeps full relative accuracy
/// when `P_D` is tiny.
pub fn detection_prob(params: &AnalyticParams) -> Result<f64> {
    params.check()?;
    let AnalyticParams { l, tau, gamma_e } = *params;
    if gamma_e == 0.0 {
        return false_alarm_prob(l, tau);
    }
    let omega = l as f64 * gamma_e;
    let ln_omega = omega.ln();
    let b = 1.0 / (1.0 + tau);
    let lo = l as u64;
    // ln Gamma(2L-1+m) - ln Gamma(L-1) - ln Gamma(L-1+m) - ln m!
    let ln_weight =
        |m: u64| ln_factorial(2 * lo - 2 + m) - ln_factorial(lo - 2) - ln_factorial(lo - 2 + m) - ln_factorial(m);
    let ln_a = (tau / (1.0 + tau)).ln();
    let ln_b = b.ln();
    let mut u_lead = TailIntegral::new(ln_upper_beta(lo + 1, lo - 1, b));
    let mut u_next = TailIntegral::new(ln_upper_beta(lo, lo, b));
    let mut sum = LogSum::default();
    let mut ln_max = f64::NEG_INFINITY;
    let m_floor = (2.0 * omega) as u64 + lo + 2;
    let mut m = 1u64;
    loop {
        // (2y - 1) = y - (1 - y) splits T_m into four upper beta integrals.
        let mut moment = LogSum::default();
        moment.push(false, u_lead.ln());
        moment.push(true, u_next.ln());
        moment.push(true, ln_upper_beta(lo, lo + m - 1, b));
        moment.push(false, ln_upper_beta(lo - 1, lo + m, b));
        let t = moment.finish();
        if !t.is_zero() && !t.is_negative() {
            let ln_t = ln_weight(m) - omega + (m - 1) as f64 * ln_omega + t.ln_abs();
            sum.push(false, ln_t);
            ln_max = ln_max.max(ln_t);
            if m > m_floor && ln_t < ln_max - 41.5 {
                break;
            }
        } else if m > m_floor {
            break;
        }
        if m >= MAX_SERIES_TERMS {
            return Err(domain(format!(
                "detection_prob series did not converge for omega = {omega}"
            )));
        }
        u_lead.step(lo + m, lo - 1, ln_a, ln_b);
        u_next.step(lo + m - 1, lo, ln_a, ln_b);
        m += 1;
    }
    let value = sum.finish().reconstruct();
    clamp_prob(value, || format!("detection_prob(L={l}, tau={tau}, gamma_e={gamma_e})"))
}

/// The H1 CDF written with negative-order exponential integrals:
/// `Psi sum_{k=0}^{L} C(L,k) omega^k / (L-1)_k [Phi(L-2, L+k) - Phi(L-1, L+k-1)]`
/// with `Psi = Gamma(2L-1) e^{-omega} / (omega Gamma(L-1)^2)` and
/// `Phi(M, d) = sum_m C(M,m) (-1)^m [b^{d+m} E_{1-d-m}(-omega b) - a^{d+m} E_{1-d-m}(-omega a)]`.
///
/// Alternating terms cancel heavily once `L` exceeds a handful of snapshots,
/// so this is only a cross-check for small `L`. Requires `gamma_e > 0`.
pub fn detection_prob_exponential_integral(params: &AnalyticParams) -> Result<f64> {
    params.check()?;
    let AnalyticParams { l, tau, gamma_e } = *params;
    if gamma_e == 0.0 {
        return Err(domain("exponential-integral form needs gamma_e > 0"));
    }
    let omega = l as f64 * gamma_e;
    let a = tau / (1.0 + tau);
    let b = 1.0 / (1.0 + tau);
    let lo = l as u64;
    let ln_psi = ln_factorial(2 * lo - 2) - omega - omega.ln() - 2.0 * ln_factorial(lo - 2);
    let ln_choose = |n: u64, k: u64| ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k);
    let mut sum = LogSum::default();
    let mut push_phi = |ln_coef: f64, negative: bool, big_m: u64, delta: u64| -> Result<()> {
        for m in 0..=big_m {
            let n = (delta + m - 1) as u32;
            let alt = m % 2 == 1;
            for (x, sign) in [(b, false), (a, true)] {
                let e = expint_neg_order(n, -omega * x)?;
                if e.is_zero() {
                    continue;
                }
                let ln_t = ln_coef + ln_choose(big_m, m) + (delta + m) as f64 * x.ln() + e.ln_abs();
                sum.push(negative ^ alt ^ sign ^ e.is_negative(), ln_t);
            }
        }
        Ok(())
    };
    for k in 0..=lo {
        let ln_c = ln_psi + ln_choose(lo, k) + k as f64 * omega.ln() + ln_factorial(lo - 2) - ln_factorial(lo - 2 + k);
        push_phi(ln_c, false, lo - 2, lo + k)?;
        push_phi(ln_c, true, lo - 1, lo + k - 1)?;
    }
    let cdf = sum.finish().reconstruct();
    clamp_prob(1.0 - cdf, || {
        format!("detection_prob_exponential_integral(L={l}, tau={tau}, gamma_e={gamma_e})")
    })
}

/// The widely quoted exponential-integral closed form for the detection
/// probability, evaluated verbatim and without clamping. Its series
/// coefficients lack the `(-omega1)^k` factor and its auxiliary sum mixes the
/// two integration limits, so the output is generally not a probability.
/// Requires `gamma_e > 0`; may return non-finite values.
pub fn detection_prob_printed(params: &AnalyticParams) -> Result<f64> {
    params.check()?;
    let AnalyticParams { l, tau, gamma_e } = *params;
    if gamma_e == 0.0 {
        return Err(domain(
            "printed form has an explicit 1/omega1 factor; gamma_e must be > 0",
        ));
    }
    let omega1 = params.omega1();
    let lo = l as u64;
    let ln_psi = 2f64.ln() + ln_factorial(2 * lo - 2) - 0.5 * omega1 - omega1.ln() - 2.0 * ln_factorial(lo - 2);
    let z = -omega1 / (2.0 * (1.0 + tau));
    let ln_1p_tau = (1.0 + tau).ln();
    let ln_tau = tau.ln();
    let mut sum = LogSum::default();
    let mut push_phi = |ln_coef: f64, negative: bool, big_m: u64, delta: u64| -> Result<()> {
        for m in 0..=big_m {
            let p = (delta + m) as f64;
            let e = expint_neg_order((delta + m - 1) as u32, z)?;
            // 1 - tau^p < 0 for tau > 1
            let ln_factor = ln_sub_exp(p * ln_tau, 0.0);
            let ln_t =
                ln_coef + ln_factorial(big_m) - ln_factorial(m) - ln_factorial(big_m - m) + ln_factor + e.ln_abs()
                    - p * ln_1p_tau;
            sum.push(negative ^ (m % 2 == 1) ^ true ^ e.is_negative(), ln_t);
        }
        Ok(())
    };
    for k in 0..=lo {
        // 2^{-k} (-L)_k / ((L-1)_k k!) = (-1)^k 2^{-k} C(L,k) / (L-1)_k
        let ln_c = ln_psi - k as f64 * 2f64.ln() + ln_factorial(lo) - ln_factorial(k) - ln_factorial(lo - k)
            + ln_factorial(lo - 2)
            - ln_factorial(lo - 2 + k);
        let neg = k % 2 == 1;
        push_phi(ln_c, neg, lo - 2, lo + k)?;
        push_phi(ln_c, !neg, lo - 1, lo + k - 1)?;
    }
    Ok(1.0 - sum.finish().reconstruct())
}

/// `P_E = (P_F + 1 - P_D) / 2`.
pub fn total_error_prob(l: u32, gamma_e: f64, tau: f64) -> Result<f64> {
    let pf = false_alarm_prob(l, tau)?;
    let pd = detection_prob(&AnalyticParams::new(l, tau, gamma_e)?)?;
    clamp_prob(0.5 * (1.0 - (pd - pf)), || {
        format!("total_error_prob(L={l}, gamma_e={gamma_e}, tau={tau})")
    })
}

/// Ergodic rate `E[log2(1 + X)]` with `X` a sum of `n_u` independent
/// exponentials of mean `rho`:
/// `(1/ln 2) e^{1/rho} sum_{m=1}^{n_u} E_m(1/rho)` in bits/s/Hz.
pub fn ergodic_rate(params: &RateParams) -> Result<f64> {
    let RateParams { n_u, rho } = *params;
    if n_u < 1 {
        return Err(domain("n_u must be >= 1"));
    }
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(domain(format!("rho must be finite and > 0, got {rho}")));
    }
    let x = 1.0 / rho;
    let mut total = 0.0;
    for m in 1..=n_u {
        total += if rho > 1e8 {
            (1.0 + x) * expint_pos_order(m, x)?
        } else {
            expint_pos_order_scaled(m, x)?
        };
    }
    Ok(total / std::f64::consts::LN_2)
}
