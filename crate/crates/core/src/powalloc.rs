//! Sequential power allocation between communication and sensing.
//!
//! 1. Give the user the least power that meets the rate target.
//! 2. Hand the rest to the sensing beam and compute its effective SNR.
//! 3. Pick the SCN threshold minimising the total error at that SNR.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analytic::{ergodic_rate, total_error_prob, RateParams};
use crate::error::{domain, Error, Result};
use crate::randmat::{target_channel, ComplexMatrix, ScenarioConfig};

const GRID_POINTS: usize = 200;
const GOLDEN: f64 = 0.618_033_988_749_894_8;

/// Threshold search window for the line search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TauSearch {
    pub lo: f64,
    pub hi: f64,
    pub tolerance: f64,
}

impl Default for TauSearch {
    fn default() -> Self {
        TauSearch {
            lo: 1.001,
            hi: 100.0,
            tolerance: 1e-6,
        }
    }
}

impl TauSearch {
    pub fn validate(&self) -> Result<()> {
        if !(self.lo > 1.0) || !(self.hi > self.lo) || !self.hi.is_finite() {
            return Err(domain(format!(
                "tau search window needs 1 < lo < hi, got [{}, {}]",
                self.lo, self.hi
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(domain("tau search tolerance must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationProblem {
    pub config: ScenarioConfig,
    /// Rate target in bits/s/Hz.
    pub r_min: f64,
    pub tau_search: TauSearch,
}

/// Outcome of [`allocate`]; every optional field is `None` when infeasible.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AllocationResult {
    pub feasible: bool,
    pub eta_star: Option<f64>,
    pub tau_star: Option<f64>,
    pub p_c_min_watts: Option<f64>,
    pub gamma_e: Option<f64>,
    pub p_e_star: Option<f64>,
    pub achieved_rate: Option<f64>,
}

impl AllocationResult {
    fn infeasible() -> Self {
        AllocationResult {
            feasible: false,
            eta_star: None,
            tau_star: None,
            p_c_min_watts: None,
            gamma_e: None,
            p_e_star: None,
            achieved_rate: None,
        }
    }
}

/// Ergodic rate with communication power `p_c` (zero power gives zero rate).
pub fn rate_at_power(n_u: u32, sigma_h2: f64, sigma_c2: f64, p_c_watts: f64) -> Result<f64> {
    if p_c_watts == 0.0 {
        return Ok(0.0);
    }
    ergodic_rate(&RateParams {
        n_u,
        rho: sigma_h2 * p_c_watts / sigma_c2,
    })
}

/// Smallest communication power meeting `r_min`, or `None` if even the full
/// budget falls short.
pub fn min_comm_power(n_u: u32, sigma_h2: f64, sigma_c2: f64, r_min: f64, p_total_watts: f64) -> Result<Option<f64>> {
    if !(r_min >= 0.0) || !r_min.is_finite() {
        return Err(domain(format!("r_min must be finite and >= 0, got {r_min}")));
    }
    if !(p_total_watts > 0.0) {
        return Err(domain("total power must be positive"));
    }
    if !(sigma_h2 > 0.0 && sigma_c2 > 0.0) {
        return Err(domain("channel and noise variances must be positive"));
    }
    if r_min == 0.0 {
        return Ok(Some(0.0));
    }
    let rate = |p: f64| rate_at_power(n_u, sigma_h2, sigma_c2, p);
    if rate(p_total_watts)? < r_min {
        return Ok(None);
    }
    let (mut lo, mut hi) = (0.0, p_total_watts);
    loop {
        let r_hi = rate(hi)?;
        if (r_hi - r_min).abs() < 1e-9 || hi - lo < 1e-12 * p_total_watts {
            return Ok(Some(hi));
        }
        let mid = 0.5 * (lo + hi);
        if rate(mid)? >= r_min {
            hi = mid;
        } else {
            lo = mid;
        }
    }
}

/// `gamma_e = p_s ||G||_F^2 / (mu sigma_s2)`.
pub fn sensing_snr_from_residual(p_s_watts: f64, g: &ComplexMatrix, mu_linear: f64, sigma_s2: f64) -> Result<f64> {
    if !(p_s_watts >= 0.0) {
        return Err(domain("sensing power must be >= 0"));
    }
    if !(mu_linear >= 1.0) || !(sigma_s2 > 0.0) {
        return Err(domain("need mu >= 1 and sigma_s2 > 0"));
    }
    Ok(p_s_watts * g.frobenius_norm_sqr() / (mu_linear * sigma_s2))
}

/// Threshold minimising the total error probability and the minimum itself.
///
/// 200 log-spaced grid points, then golden-section refinement inside the
/// bracket around the best grid point. Ties resolve to the smaller `tau`.
pub fn optimal_threshold(l: u32, gamma_e: f64, search: &TauSearch) -> Result<(f64, f64)> {
    search.validate()?;
    let pe = |tau: f64| total_error_prob(l, gamma_e, tau);
    let ln_lo = search.lo.ln();
    let step = (search.hi.ln() - ln_lo) / (GRID_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..GRID_POINTS)
        .map(|i| {
            if i == GRID_POINTS - 1 {
                search.hi
            } else {
                (ln_lo + step * i as f64).exp()
            }
        })
        .collect();
    let mut best = 0;
    let mut best_val = pe(grid[0])?;
    for (i, &tau) in grid.iter().enumerate().skip(1) {
        let v = pe(tau)?;
        if v < best_val {
            best = i;
            best_val = v;
        }
    }
    if best == GRID_POINTS - 1 {
        return Err(Error::Window {
            lo: search.lo,
            hi: search.hi,
        });
    }
    let mut a = grid[best.saturating_sub(1)];
    let mut b = grid[best + 1];
    let mut x1 = b - GOLDEN * (b - a);
    let mut x2 = a + GOLDEN * (b - a);
    let mut f1 = pe(x1)?;
    let mut f2 = pe(x2)?;
    while b - a > search.tolerance {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - GOLDEN * (b - a);
            f1 = pe(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + GOLDEN * (b - a);
            f2 = pe(x2)?;
        }
    }
    let (x, f) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    if f < best_val {
        Ok((x, f))
    } else {
        Ok((grid[best], best_val))
    }
}

/// Runs the three allocation steps.
pub fn allocate(problem: &AllocationProblem) -> Result<AllocationResult> {
    let cfg = &problem.config;
    cfg.validate()?;
    problem.tau_search.validate()?;
    let p_total = cfg.p_total_watts();
    let n_u = cfg.n_u as u32;
    let Some(p_c) = min_comm_power(n_u, cfg.sigma_h2, cfg.sigma_c2(), problem.r_min, p_total)? else {
        return Ok(AllocationResult::infeasible());
    };
    let g = target_channel(cfg.beta, cfg.theta, cfg.n_r, cfg.n_t);
    let p_s = (p_total - p_c).max(0.0);
    let gamma_e = sensing_snr_from_residual(p_s, &g, cfg.mu_linear(), cfg.sigma_s2())?;
    let (tau_star, p_e) = optimal_threshold(cfg.snapshots as u32, gamma_e, &problem.tau_search)?;
    Ok(AllocationResult {
        feasible: true,
        eta_star: Some(p_c / p_total),
        tau_star: Some(tau_star),
        p_c_min_watts: Some(p_c),
        gamma_e: Some(gamma_e),
        p_e_star: Some(p_e),
        achieved_rate: Some(rate_at_power(n_u, cfg.sigma_h2, cfg.sigma_c2(), p_c)?),
    })
}

/// Effective SNR at which the optimised total error equals `target_pe`,
/// found by bisection on `ln gamma_e`.
pub fn calibrate_snr(l: u32, target_pe: f64, search: &TauSearch) -> Result<f64> {
    if !(target_pe > 0.0 && target_pe < 0.5) {
        return Err(domain("target total error must lie in (0, 0.5)"));
    }
    let pe_min = |g: f64| optimal_threshold(l, g, search).map(|r| r.1);
    let (mut lo, mut hi) = (1e-3f64, 1.0f64);
    while pe_min(hi)? > target_pe {
        lo = hi;
        hi *= 4.0;
        if hi > 1e6 {
            return Err(domain("target total error not reachable"));
        }
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if pe_min(mid)? > target_pe {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-12 {
            break;
        }
    }
    Ok(hi)
}

/// Real reflection coefficient giving effective SNR `gamma_e` when `p_s`
/// watts are steered at the target with noise `sigma_s2` (mu = 1).
pub fn beta_for_snr(gamma_e: f64, p_s_watts: f64, n_r: usize, n_t: usize, sigma_s2: f64) -> Result<Complex64> {
    if !(gamma_e >= 0.0) || !(p_s_watts > 0.0) || !(sigma_s2 > 0.0) {
        return Err(domain("need gamma_e >= 0, p_s > 0, sigma_s2 > 0"));
    }
    let mag2 = gamma_e * sigma_s2 / (p_s_watts * (n_r * n_t) as f64);
    Ok(Complex64::new(mag2.sqrt(), 0.0))
}
