//! Scalar special functions: log-gamma, Pochhammer symbols, the terminating
//! Gauss series, exponential integrals of positive and negative integer
//! order, and integer-parameter incomplete beta functions.
//!
//! Anything that can overflow double precision is carried as a
//! [`ScaledValue`], i.e. a mantissa together with a natural-log exponent.

use crate::error::{domain, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// A real number stored as `mantissa * exp(log_scale)`.
///
/// The mantissa is either exactly zero or has magnitude in `[1, e)`, so the
/// sign lives in the mantissa and the magnitude in `log_scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledValue {
    mantissa: f64,
    log_scale: f64,
}

impl ScaledValue {
    pub const ZERO: ScaledValue = ScaledValue {
        mantissa: 0.0,
        log_scale: 0.0,
    };

    /// Builds `sign * exp(ln_abs)`. A `ln_abs` of `-inf` gives zero.
    pub fn from_ln(negative: bool, ln_abs: f64) -> Self {
        if ln_abs == f64::NEG_INFINITY {
            return Self::ZERO;
        }
        let scale = ln_abs.floor();
        let mut mantissa = (ln_abs - scale).exp();
        let mut log_scale = scale;
        // exp of a value in [0, 1) can round up to e.
        if mantissa >= std::f64::consts::E {
            mantissa /= std::f64::consts::E;
            log_scale += 1.0;
        }
        if negative {
            mantissa = -mantissa;
        }
        ScaledValue { mantissa, log_scale }
    }

    /// Normalises an ordinary finite double.
    pub fn normalize(value: f64) -> Self {
        if value == 0.0 || !value.is_finite() {
            return ScaledValue {
                mantissa: if value.is_finite() { 0.0 } else { value },
                log_scale: 0.0,
            };
        }
        let mut log_scale = value.abs().ln().floor();
        let mut mantissa = value / log_scale.exp();
        while mantissa.abs() >= std::f64::consts::E {
            log_scale += 1.0;
            mantissa = value / log_scale.exp();
        }
        while mantissa.abs() < 1.0 {
            log_scale -= 1.0;
            mantissa = value / log_scale.exp();
        }
        ScaledValue { mantissa, log_scale }
    }

    pub fn mantissa(&self) -> f64 {
        self.mantissa
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa == 0.0
    }

    pub fn is_negative(&self) -> bool {
        self.mantissa < 0.0
    }

    /// Natural log of the magnitude; `-inf` for zero.
    pub fn ln_abs(&self) -> f64 {
        if self.is_zero() {
            f64::NEG_INFINITY
        } else {
            self.mantissa.abs().ln() + self.log_scale
        }
    }

    /// Converts back to a double. May overflow to infinity or underflow to zero.
    pub fn reconstruct(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        self.mantissa * self.log_scale.exp()
    }

    /// Multiplies by `exp(t)`.
    pub fn scale_exp(self, t: f64) -> Self {
        if self.is_zero() {
            return self;
        }
        ScaledValue {
            mantissa: self.mantissa,
            log_scale: self.log_scale + t,
        }
    }

    pub fn mul_f64(self, factor: f64) -> Self {
        if self.is_zero() || factor == 0.0 {
            return Self::ZERO;
        }
        let f = ScaledValue::normalize(factor);
        ScaledValue::from_ln(self.is_negative() != f.is_negative(), self.ln_abs() + f.ln_abs())
    }

    pub fn neg(self) -> Self {
        ScaledValue {
            mantissa: -self.mantissa,
            log_scale: self.log_scale,
        }
    }

    /// Sum of two scaled values computed relative to the larger magnitude.
    pub fn add(self, other: ScaledValue) -> Self {
        if self.is_zero() {
            return other;
        }
        if other.is_zero() {
            return self;
        }
        let (big, small) = if self.ln_abs() >= other.ln_abs() {
            (self, other)
        } else {
            (other, self)
        };
        let ratio = (small.ln_abs() - big.ln_abs()).exp();
        let s_small = if small.is_negative() { -ratio } else { ratio };
        let s_big = if big.is_negative() { -1.0 } else { 1.0 };
        let combined = s_big + s_small;
        if combined == 0.0 {
            return Self::ZERO;
        }
        ScaledValue::from_ln(combined < 0.0, big.ln_abs() + combined.abs().ln())
    }
}

/// Signed log-space accumulator: sums `sign * exp(ln_term)` without overflow.
#[derive(Debug, Default, Clone)]
pub(crate) struct LogSum {
    terms: Vec<(bool, f64)>,
}

impl LogSum {
    pub(crate) fn push(&mut self, negative: bool, ln_term: f64) {
        if ln_term != f64::NEG_INFINITY {
            self.terms.push((negative, ln_term));
        }
    }

    pub(crate) fn finish(&self) -> ScaledValue {
        let Some(max) = self.terms.iter().map(|&(_, l)| l).max_by(|a, b| a.total_cmp(b)) else {
            return ScaledValue::ZERO;
        };
        let mut acc = Neumaier::default();
        for &(neg, l) in &self.terms {
            let v = (l - max).exp();
            acc.add(if neg { -v } else { v });
        }
        let total = acc.sum();
        if total == 0.0 {
            return ScaledValue::ZERO;
        }
        ScaledValue::from_ln(total < 0.0, max + total.abs().ln())
    }
}

/// Kahan–Babuška–Neumaier compensated summation.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn sum(&self) -> f64 {
        self.sum + self.comp
    }
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(domain(format!("ln_gamma requires x > 0, got {x}")));
    }
    Ok(ln_gamma_pos(x))
}

fn ln_gamma_pos(x: f64) -> f64 {
    // Exact factorials while they fit in the mantissa.
    if x.fract() == 0.0 && x <= 23.0 {
        let mut f = 1.0f64;
        let mut k = 2.0;
        while k < x {
            f *= k;
            k += 1.0;
        }
        return f.ln();
    }
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma_pos(1.0 - x);
    }
    let z = x - 1.0;
    let mut a = LANCZOS[0];
    let t = z + LANCZOS_G + 0.5;
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (z + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + a.ln()
}

/// `ln n!`.
pub fn ln_factorial(n: u64) -> f64 {
    ln_gamma_pos(n as f64 + 1.0)
}

/// Rising factorial `a (a+1) ... (a+k-1)`; the empty product is 1.
pub fn pochhammer(a: f64, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (a + i as f64))
}

/// The terminating series `2F1(1, -L; L; -tau)`.
///
/// `(-L)_k (-tau)^k` is non-negative for every `k <= L`, so all terms are
/// positive and the sum is well conditioned.
pub fn gauss_2f1_terminating(l: u32, tau: f64) -> Result<f64> {
    if l < 1 {
        return Err(domain("gauss_2f1_terminating requires L >= 1"));
    }
    let lf = l as f64;
    let mut term = 1.0;
    let mut acc = Neumaier::default();
    acc.add(term);
    for k in 0..l {
        let kf = k as f64;
        term *= (kf - lf) / (lf + kf) * (-tau);
        acc.add(term);
    }
    Ok(acc.sum())
}

/// Analytic continuation of the exponential integral to order `-n`:
/// `E_{-n}(z) = n! z^{-(n+1)} e^{-z} sum_{k=0}^{n} z^k / k!`.
///
/// Valid for either sign of `z`; the `e^{-z}` factor stays in the log scale.
pub fn expint_neg_order(n: u32, z: f64) -> Result<ScaledValue> {
    if z == 0.0 || !z.is_finite() {
        return Err(domain(format!("expint_neg_order requires finite z != 0, got {z}")));
    }
    // n! z^{-(n+1)} sum_k z^k/k! = sum_{j=0}^{n} n!/(n-j)! z^{-(j+1)}
    let ln_z = z.abs().ln();
    let ln_n_fact = ln_factorial(n as u64);
    let mut sum = LogSum::default();
    for j in 0..=n {
        let ln_term = ln_n_fact - ln_factorial((n - j) as u64) - (j as f64 + 1.0) * ln_z;
        let negative = z < 0.0 && (j + 1) % 2 == 1;
        sum.push(negative, ln_term);
    }
    Ok(sum.finish().scale_exp(-z))
}

/// `e^{x} E_1(x)` for `x > 0`: power series up to 1, continued fraction above.
fn expint1_scaled(x: f64) -> f64 {
    if x <= 1.0 {
        let mut acc = Neumaier::default();
        let mut fact_term = 1.0;
        let mut k = 1.0;
        loop {
            fact_term *= -x / k;
            let t = fact_term / k;
            acc.add(t);
            if t.abs() < 1e-18 {
                break;
            }
            k += 1.0;
        }
        (-EULER_GAMMA - x.ln() - acc.sum()) * x.exp()
    } else {
        expint_cf_scaled(1, x)
    }
}

/// `e^{x} E_m(x)` for `m >= 1, x > 0`.
///
/// For `x <= 1`: `E_1` from its power series and the upward recurrence
/// `E_{k+1}(x) = (e^{-x} - x E_k(x)) / k`, which is stable there. For
/// `x > 1` the recurrence amplifies rounding by `x / k` per step, so the
/// order-`m` continued fraction is evaluated directly instead.
pub fn expint_pos_order_scaled(m: u32, x: f64) -> Result<f64> {
    if m < 1 {
        return Err(domain("expint_pos_order requires m >= 1"));
    }
    if !(x > 0.0) || !x.is_finite() {
        return Err(domain(format!("expint_pos_order requires x > 0, got {x}")));
    }
    if x > 1.0 {
        return Ok(expint_cf_scaled(m, x));
    }
    let mut s = expint1_scaled(x);
    for k in 1..m {
        s = (1.0 - x * s) / k as f64;
    }
    Ok(s)
}

/// `e^{x} E_m(x)` for `x > 1` by modified Lentz evaluation of
/// `1/(x+m- 1*m/(x+m+2- 2(m+1)/(x+m+4- ...)))`.
fn expint_cf_scaled(m: u32, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let nm1 = m as f64 - 1.0;
    let mut b = x + m as f64;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let fi = i as f64;
        let an = -fi * (nm1 + fi);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

/// `E_m(x) = int_1^inf t^{-m} e^{-x t} dt` for `m >= 1, x > 0`.
pub fn expint_pos_order(m: u32, x: f64) -> Result<f64> {
    Ok(expint_pos_order_scaled(m, x)? * (-x).exp())
}

/// `ln int_0^x y^{p-1} (1-y)^{q-1} dy` for integer `p, q >= 1`, `0 <= x <= 1`.
///
/// Uses the binomial-tail identity for the regularised incomplete beta
/// function, which is a sum of `q` non-negative terms.
pub(crate) fn ln_incomplete_beta_int(p: u64, q: u64, x: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let n = p + q - 1;
    let ln_x = x.ln();
    let ln_1mx = (1.0 - x).ln();
    let prefactor = ln_factorial(p - 1) + ln_factorial(q - 1);
    let mut sum = LogSum::default();
    for j in p..=n {
        let mut ln_t = prefactor - ln_factorial(j) - ln_factorial(n - j) + j as f64 * ln_x;
        if n > j {
            ln_t += (n - j) as f64 * ln_1mx;
        }
        sum.push(false, ln_t);
    }
    sum.finish().ln_abs()
}

/// Regularised incomplete beta `I_x(p, q)` for integer `p, q >= 1`.
pub fn incomplete_beta_reg_int(p: u64, q: u64, x: f64) -> Result<f64> {
    if p < 1 || q < 1 {
        return Err(domain("incomplete beta requires p, q >= 1"));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(domain(format!("incomplete beta requires 0 <= x <= 1, got {x}")));
    }
    let ln_beta = ln_factorial(p - 1) + ln_factorial(q - 1) - ln_factorial(p + q - 1);
    Ok((ln_incomplete_beta_int(p, q, x) - ln_beta).exp().min(1.0))
}
