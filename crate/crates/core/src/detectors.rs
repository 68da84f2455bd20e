//! Detector statistics, threshold calibration and Monte Carlo estimation.
//!
//! Trials are cut into blocks of [`BLOCK_SIZE`]. Block `k` of an experiment
//! always draws from `RngStream::new(derive_seed(seed, tag), k)`, so the
//! statistics, and everything computed from them, do not depend on how many
//! worker threads process the blocks.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::randmat::{
    derive_seed, eig2, hermitian_eigenvalues, sample_covariance, ComplexMatrix, Hypothesis, NoncentralWishart, Phase,
    RngStream, ScenarioConfig, SnapshotModel,
};

/// Trials per random stream.
pub const BLOCK_SIZE: usize = 1024;

/// Smallest eigenvalue accepted before a covariance counts as singular.
const SINGULAR_EIGENVALUE: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    Scn,
    MaxEig,
    Energy,
    Lrt,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 4] = [
        DetectorKind::Scn,
        DetectorKind::MaxEig,
        DetectorKind::Energy,
        DetectorKind::Lrt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DetectorKind::Scn => "scn",
            DetectorKind::MaxEig => "max_eig",
            DetectorKind::Energy => "energy",
            DetectorKind::Lrt => "lrt",
        }
    }

    /// Infimum of the statistic's support.
    fn support_min(self) -> f64 {
        match self {
            DetectorKind::Scn => 1.0,
            _ => 0.0,
        }
    }

    fn tag(self) -> u64 {
        match self {
            DetectorKind::Scn => 1,
            DetectorKind::MaxEig => 2,
            DetectorKind::Energy => 3,
            DetectorKind::Lrt => 4,
        }
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DetectorKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| domain(format!("unknown detector '{s}' (expected scn, max_eig, energy or lrt)")))
    }
}

/// A Monte Carlo probability with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MCEstimate {
    pub value: f64,
    pub stderr: f64,
    pub trials: usize,
}

impl MCEstimate {
    pub fn from_counts(hits: usize, trials: usize) -> Self {
        let p = hits as f64 / trials as f64;
        MCEstimate {
            value: p,
            stderr: (p * (1.0 - p) / trials as f64).sqrt(),
            trials,
        }
    }
}

/// `(lambda_max, lambda_min)` of a Hermitian matrix.
fn extreme_eigenvalues(sigma_hat: &ComplexMatrix) -> Result<(f64, f64)> {
    if sigma_hat.rows() == 2 && sigma_hat.cols() == 2 {
        if !sigma_hat.is_hermitian(1e-10) {
            return Err(domain("matrix is not Hermitian"));
        }
        return Ok(eig2(sigma_hat));
    }
    let ev = hermitian_eigenvalues(sigma_hat)?;
    Ok((ev[0], ev[ev.len() - 1]))
}

/// `kappa = lambda_max / lambda_min`.
pub fn scn_statistic(sigma_hat: &ComplexMatrix) -> Result<f64> {
    let (hi, lo) = extreme_eigenvalues(sigma_hat)?;
    if !(lo > SINGULAR_EIGENVALUE) {
        return Err(Error::Degenerate(format!(
            "smallest eigenvalue {lo:e} makes the covariance singular"
        )));
    }
    Ok(hi / lo)
}

/// Statistic of `kind`; the benchmarks normalise by the nominal noise power
/// learned during training.
pub fn benchmark_statistic(kind: DetectorKind, sigma_hat: &ComplexMatrix, nominal_sigma_s2: f64) -> Result<f64> {
    if !(nominal_sigma_s2 > 0.0) {
        return Err(domain("nominal noise power must be positive"));
    }
    match kind {
        DetectorKind::Scn => scn_statistic(sigma_hat),
        DetectorKind::MaxEig | DetectorKind::Lrt => {
            let (hi, lo) = extreme_eigenvalues(sigma_hat)?;
            if !(lo > SINGULAR_EIGENVALUE) {
                return Err(Error::Degenerate(format!(
                    "smallest eigenvalue {lo:e} makes the covariance singular"
                )));
            }
            Ok(hi / nominal_sigma_s2)
        }
        DetectorKind::Energy => {
            let (_, lo) = extreme_eigenvalues(sigma_hat)?;
            if !(lo > SINGULAR_EIGENVALUE) {
                return Err(Error::Degenerate(format!(
                    "smallest eigenvalue {lo:e} makes the covariance singular"
                )));
            }
            Ok(sigma_hat.trace().re / (sigma_hat.rows() as f64 * nominal_sigma_s2))
        }
    }
}

/// Master seed, worker count and thread pool for Monte Carlo runs.
#[derive(Clone)]
pub struct MonteCarlo {
    seed: u64,
    workers: usize,
    pool: Arc<rayon::ThreadPool>,
}

impl fmt::Debug for MonteCarlo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MonteCarlo")
            .field("seed", &self.seed)
            .field("workers", &self.workers)
            .finish()
    }
}

impl MonteCarlo {
    pub fn new(seed: u64, workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(domain("workers must be >= 1"));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| domain(format!("cannot start worker pool: {e}")))?;
        Ok(MonteCarlo {
            seed,
            workers,
            pool: Arc::new(pool),
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    /// Runs `trials` draws in blocks, in block order. `draw` receives the
    /// block's stream and must return exactly one value per call.
    pub fn run<T, F>(&self, tag: u64, trials: usize, draw: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(&mut RngStream) -> Result<T> + Sync,
    {
        let seed = derive_seed(self.seed, tag);
        let blocks = trials.div_ceil(BLOCK_SIZE);
        let chunks: Vec<Result<Vec<T>>> = self.pool.install(|| {
            (0..blocks)
                .into_par_iter()
                .map(|k| {
                    let len = BLOCK_SIZE.min(trials - k * BLOCK_SIZE);
                    let mut rng = RngStream::new(seed, k as u64);
                    (0..len).map(|_| draw(&mut rng)).collect()
                })
                .collect()
        });
        let mut out = Vec::with_capacity(trials);
        for chunk in chunks {
            out.extend(chunk?);
        }
        Ok(out)
    }
}

/// Stream-namespace tags. Separate experiments never share random numbers
/// unless they use the same tag on purpose.
pub mod tags {
    pub const CALIBRATION: u64 = 0x100;
    pub const H0: u64 = 0x200;
    pub const H1: u64 = 0x300;
    pub const NONCENTRAL: u64 = 0x400;
    pub const CENTRAL: u64 = 0x500;
    pub const RATE: u64 = 0x600;
}

/// Statistic of `kind` for every trial of `(hypothesis, phase)` under `config`.
pub fn collect_statistics(
    kind: DetectorKind,
    config: &ScenarioConfig,
    hypothesis: Hypothesis,
    phase: Phase,
    trials: usize,
    tag: u64,
    mc: &MonteCarlo,
) -> Result<Vec<f64>> {
    let model = SnapshotModel::new(config)?;
    let nominal = config.sigma_s2();
    mc.run(tag, trials, |rng| {
        let y = model.sample(hypothesis, phase, rng);
        benchmark_statistic(kind, &sample_covariance(&y), nominal)
    })
}

/// Linear interpolation between order statistics (Hyndman-Fan type 7).
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Threshold giving false-alarm rate `target_pf` under nominal training
/// conditions: the `(1 - target_pf)` quantile of noise-only statistics at
/// `mu = 1`. `target_pf = 1` returns the infimum of the statistic's support.
pub fn calibrate_threshold(
    kind: DetectorKind,
    config: &ScenarioConfig,
    target_pf: f64,
    trials: usize,
    mc: &MonteCarlo,
) -> Result<f64> {
    if !(target_pf > 0.0 && target_pf <= 1.0) {
        return Err(domain(format!("target_pf must lie in (0, 1], got {target_pf}")));
    }
    if target_pf == 1.0 {
        return Ok(kind.support_min());
    }
    if (trials as f64) * target_pf < 20.0 {
        return Err(Error::InsufficientTrials { trials, target_pf });
    }
    let nominal = config.with_mu_db(0.0);
    let mut stats = collect_statistics(
        kind,
        &nominal,
        Hypothesis::H0,
        Phase::Training,
        trials,
        tags::CALIBRATION + kind.tag(),
        mc,
    )?;
    stats.sort_by(f64::total_cmp);
    Ok(quantile(&stats, 1.0 - target_pf))
}

/// Fraction of `stats` strictly above `threshold`.
pub fn exceedance(stats: &[f64], threshold: f64) -> MCEstimate {
    let hits = stats.iter().filter(|&&s| s > threshold).count();
    MCEstimate::from_counts(hits, stats.len())
}

/// Fraction of disturbed-phase trials (at the config's `mu`) whose statistic
/// exceeds `threshold`.
pub fn mc_probability(
    kind: DetectorKind,
    config: &ScenarioConfig,
    hypothesis: Hypothesis,
    threshold: f64,
    mc: &MonteCarlo,
) -> Result<MCEstimate> {
    let tag = match hypothesis {
        Hypothesis::H0 => tags::H0,
        Hypothesis::H1 => tags::H1,
    };
    let stats = collect_statistics(kind, config, hypothesis, Phase::Disturbed, config.trials, tag, mc)?;
    Ok(exceedance(&stats, threshold))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub pf: MCEstimate,
    pub pd: MCEstimate,
}

/// `(P_F, P_D)` at every threshold, from one stored set of H0 and one of H1
/// statistics.
pub fn roc_curve(
    kind: DetectorKind,
    config: &ScenarioConfig,
    thresholds: &[f64],
    mc: &MonteCarlo,
) -> Result<Vec<RocPoint>> {
    if thresholds.is_empty() {
        return Err(domain("roc_curve needs at least one threshold"));
    }
    if thresholds.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(domain("roc_curve thresholds must be sorted ascending"));
    }
    let sorted = |h: Hypothesis, tag: u64| -> Result<Vec<f64>> {
        let mut s = collect_statistics(kind, config, h, Phase::Disturbed, config.trials, tag, mc)?;
        s.sort_by(f64::total_cmp);
        Ok(s)
    };
    let h0 = sorted(Hypothesis::H0, tags::H0)?;
    let h1 = sorted(Hypothesis::H1, tags::H1)?;
    let above = |s: &[f64], t: f64| {
        let hits = s.len() - s.partition_point(|&x| x <= t);
        MCEstimate::from_counts(hits, s.len())
    };
    Ok(thresholds
        .iter()
        .map(|&t| RocPoint {
            threshold: t,
            pf: above(&h0, t),
            pd: above(&h1, t),
        })
        .collect())
}

/// SCN exceedance rate of `tau` for the non-central Wishart model with
/// non-centrality `omega` (central when `omega = 0`).
pub fn mc_wishart_scn(
    snapshots: usize,
    omega: &ComplexMatrix,
    tau: f64,
    trials: usize,
    tag: u64,
    mc: &MonteCarlo,
) -> Result<MCEstimate> {
    let stats = wishart_scn_statistics(snapshots, omega, trials, tag, mc)?;
    Ok(exceedance(&stats, tau))
}

/// SCN statistic of `trials` draws from the non-central Wishart model.
pub fn wishart_scn_statistics(
    snapshots: usize,
    omega: &ComplexMatrix,
    trials: usize,
    tag: u64,
    mc: &MonteCarlo,
) -> Result<Vec<f64>> {
    let sampler = NoncentralWishart::new(snapshots, omega)?;
    mc.run(tag, trials, |rng| scn_statistic(&sampler.sample(rng)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::false_alarm_prob;
    use num_complex::Complex64;
    use std::f64::consts::PI;

    fn config() -> ScenarioConfig {
        ScenarioConfig {
            n_t: 4,
            n_r: 2,
            n_u: 4,
            snapshots: 8,
            p_total_dbm: 10.0,
            eta: 0.5,
            mu_db: 0.0,
            sigma_s2_dbm: -105.0,
            sigma_c2_dbm: -105.0,
            sigma_h2: 1e-10,
            beta: Complex64::new(2e-6, 0.0),
            theta: PI / 4.0,
            seed: 2024,
            trials: 20_000,
        }
    }

    fn mc(workers: usize) -> MonteCarlo {
        MonteCarlo::new(99, workers).unwrap()
    }

    #[test]
    fn scn_examples() {
        assert_eq!(scn_statistic(&ComplexMatrix::identity(2)).unwrap(), 1.0);
        assert_eq!(scn_statistic(&ComplexMatrix::diag(&[4.0, 1.0])).unwrap(), 4.0);
        assert_eq!(scn_statistic(&ComplexMatrix::diag(&[3.0, 1.0, 2.0])).unwrap(), 3.0);
        assert!(matches!(
            scn_statistic(&ComplexMatrix::diag(&[1.0, 0.0])),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn benchmark_examples() {
        let s2 = 3e-14;
        let sigma = ComplexMatrix::identity(2).scale_real(s2);
        assert!((benchmark_statistic(DetectorKind::MaxEig, &sigma, s2).unwrap() - 1.0).abs() < 1e-15);
        assert!((benchmark_statistic(DetectorKind::Energy, &sigma, s2).unwrap() - 1.0).abs() < 1e-15);
        let m = ComplexMatrix::from_vec(
            2,
            2,
            vec![
                Complex64::new(2.0, 0.0),
                Complex64::new(0.3, -0.4),
                Complex64::new(0.3, 0.4),
                Complex64::new(1.0, 0.0),
            ],
        )
        .unwrap();
        for kind in [DetectorKind::MaxEig, DetectorKind::Energy, DetectorKind::Lrt] {
            let a = benchmark_statistic(kind, &m, 1.0).unwrap();
            let b = benchmark_statistic(kind, &m.scale_real(2.5), 1.0).unwrap();
            assert!((b - 2.5 * a).abs() < 1e-14 * b);
        }
        let a = benchmark_statistic(DetectorKind::Scn, &m, 1.0).unwrap();
        let b = benchmark_statistic(DetectorKind::Scn, &m.scale_real(2.5), 1.0).unwrap();
        assert!((a - b).abs() < 1e-14 * a);
    }

    #[test]
    fn detector_names_round_trip() {
        for k in DetectorKind::ALL {
            assert_eq!(k.name().parse::<DetectorKind>().unwrap(), k);
            let json = serde_json::to_string(&k).unwrap();
            assert_eq!(json, format!("\"{}\"", k.name()));
        }
        assert!("glrt".parse::<DetectorKind>().is_err());
    }

    #[test]
    fn quantile_interpolates() {
        let s = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&s, 0.0), 1.0);
        assert_eq!(quantile(&s, 1.0), 5.0);
        assert_eq!(quantile(&s, 0.5), 3.0);
        assert!((quantile(&s, 0.9) - 4.6).abs() < 1e-15);
    }

    #[test]
    fn calibration_edge_cases() {
        let cfg = config();
        assert_eq!(
            calibrate_threshold(DetectorKind::Scn, &cfg, 1.0, 10, &mc(1)).unwrap(),
            1.0
        );
        assert!(matches!(
            calibrate_threshold(DetectorKind::Scn, &cfg, 0.05, 399, &mc(1)),
            Err(Error::InsufficientTrials { .. })
        ));
        assert!(calibrate_threshold(DetectorKind::Scn, &cfg, 0.0, 1000, &mc(1)).is_err());
    }

    #[test]
    fn scn_stays_cfar_while_max_eig_does_not() {
        let cfg = config();
        let m = mc(4);
        let t_scn = calibrate_threshold(DetectorKind::Scn, &cfg, 0.05, 40_000, &m).unwrap();
        let t_max = calibrate_threshold(DetectorKind::MaxEig, &cfg, 0.05, 40_000, &m).unwrap();
        let jammed = cfg.with_mu_db(4.0);
        let pf_scn = mc_probability(DetectorKind::Scn, &jammed, Hypothesis::H0, t_scn, &m).unwrap();
        let pf_max = mc_probability(DetectorKind::MaxEig, &jammed, Hypothesis::H0, t_max, &m).unwrap();
        assert!((pf_scn.value - 0.05).abs() < 3.0 * pf_scn.stderr, "{pf_scn:?}");
        assert!(pf_max.value > 0.05 + 3.0 * pf_max.stderr, "{pf_max:?}");
    }

    #[test]
    fn h0_rate_matches_closed_form() {
        let m = mc(2);
        for mu_db in [0.0, 2.0, 4.0] {
            let cfg = config().with_mu_db(mu_db);
            let est = mc_probability(DetectorKind::Scn, &cfg, Hypothesis::H0, 3.0, &m).unwrap();
            let closed = false_alarm_prob(8, 3.0).unwrap();
            assert!(
                (est.value - closed).abs() < 3.0 * est.stderr,
                "mu {mu_db}: {est:?} vs {closed}"
            );
        }
        let est = mc_probability(DetectorKind::Scn, &config(), Hypothesis::H0, 1.0, &m).unwrap();
        assert_eq!(est.value, 1.0);
    }

    #[test]
    fn h1_exceeds_h0_and_grows_with_snr() {
        let m = mc(4);
        let mut cfg = config();
        let h0 = mc_probability(DetectorKind::Scn, &cfg, Hypothesis::H0, 4.0, &m).unwrap();
        let mut prev: Option<MCEstimate> = None;
        for beta in [1.0e-6, 2.0e-6, 4.0e-6] {
            cfg.beta = Complex64::new(beta, 0.0);
            let h1 = mc_probability(DetectorKind::Scn, &cfg, Hypothesis::H1, 4.0, &m).unwrap();
            assert!(h1.value >= h0.value);
            if let Some(p) = prev {
                let sep = 3.0 * (p.stderr.powi(2) + h1.stderr.powi(2)).sqrt();
                assert!(h1.value > p.value + sep, "{p:?} -> {h1:?}");
            }
            prev = Some(h1);
        }
    }

    #[test]
    fn per_sample_scale_invariance() {
        let cfg = config();
        let model = SnapshotModel::new(&cfg).unwrap();
        let mu = crate::randmat::db_to_linear(4.0);
        let mut rng = RngStream::new(5, 5);
        for _ in 0..10_000 {
            let y = model.sample(Hypothesis::H0, Phase::Ideal, &mut rng);
            let a = scn_statistic(&sample_covariance(&y)).unwrap();
            let b = scn_statistic(&sample_covariance(&y.scale_real(mu.sqrt()))).unwrap();
            assert!((a - b).abs() <= 1e-12 * a);
            let e = benchmark_statistic(DetectorKind::MaxEig, &sample_covariance(&y), 1.0).unwrap();
            let f =
                benchmark_statistic(DetectorKind::MaxEig, &sample_covariance(&y.scale_real(mu.sqrt())), 1.0).unwrap();
            assert!((f - mu * e).abs() <= 1e-12 * f);
        }
    }

    #[test]
    fn roc_properties() {
        let cfg = ScenarioConfig {
            trials: 5000,
            ..config()
        };
        let thresholds = [1.0, 1.5, 2.0, 3.0, 5.0, 8.0, 1e12];
        let roc = roc_curve(DetectorKind::Scn, &cfg, &thresholds, &mc(3)).unwrap();
        assert_eq!(roc[0].pf.value, 1.0);
        assert_eq!(roc[0].pd.value, 1.0);
        let last = roc.last().unwrap();
        assert_eq!((last.pf.value, last.pd.value), (0.0, 0.0));
        for w in roc.windows(2) {
            assert!(w[1].pf.value <= w[0].pf.value);
            assert!(w[1].pd.value <= w[0].pd.value);
        }
        assert!(roc_curve(DetectorKind::Scn, &cfg, &[2.0, 1.0], &mc(1)).is_err());
        assert!(roc_curve(DetectorKind::Scn, &cfg, &[], &mc(1)).is_err());
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let cfg = ScenarioConfig {
            trials: 5000,
            ..config()
        };
        let a = collect_statistics(
            DetectorKind::Scn,
            &cfg,
            Hypothesis::H1,
            Phase::Disturbed,
            5000,
            7,
            &mc(1),
        )
        .unwrap();
        let b = collect_statistics(
            DetectorKind::Scn,
            &cfg,
            Hypothesis::H1,
            Phase::Disturbed,
            5000,
            7,
            &mc(4),
        )
        .unwrap();
        assert_eq!(a, b);
        let t1 = calibrate_threshold(DetectorKind::Energy, &cfg, 0.05, 5000, &mc(1)).unwrap();
        let t4 = calibrate_threshold(DetectorKind::Energy, &cfg, 0.05, 5000, &mc(4)).unwrap();
        assert_eq!(t1, t4);
    }

    #[test]
    fn stderr_shrinks_like_root_trials() {
        let m = mc(4);
        let a = mc_probability(
            DetectorKind::Scn,
            &ScenarioConfig {
                trials: 10_000,
                ..config()
            },
            Hypothesis::H0,
            3.0,
            &m,
        )
        .unwrap();
        let b = mc_probability(
            DetectorKind::Scn,
            &ScenarioConfig {
                trials: 20_000,
                ..config()
            },
            Hypothesis::H0,
            3.0,
            &m,
        )
        .unwrap();
        let ratio = a.stderr / b.stderr;
        assert!((ratio - 2f64.sqrt()).abs() < 0.05, "{ratio}");
    }

    #[test]
    fn wishart_oracle_matches_closed_form() {
        let est = mc_wishart_scn(8, &ComplexMatrix::zeros(2, 2), 3.0, 30_000, tags::CENTRAL, &mc(4)).unwrap();
        let closed = false_alarm_prob(8, 3.0).unwrap();
        assert!((est.value - closed).abs() < 3.0 * est.stderr, "{est:?} vs {closed}");
    }
}
