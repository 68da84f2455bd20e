//! Experiment runner: each command turns a config into one CSV table.

mod config;

use std::fmt;
use std::fs;
use std::path::PathBuf;

use crate::analytic::{
    detection_prob, detection_prob_exponential_integral, detection_prob_printed, effective_snr, ergodic_rate,
    false_alarm_prob, false_alarm_prob_printed, noncentrality_matrix, total_error_prob, AnalyticParams, RateParams,
};
use crate::detectors::{
    calibrate_threshold, collect_statistics, exceedance, mc_probability, roc_curve, tags, wishart_scn_statistics,
    DetectorKind, MCEstimate, MonteCarlo, BLOCK_SIZE,
};
use crate::powalloc::{allocate, min_comm_power, rate_at_power, sensing_snr_from_residual, AllocationProblem};
use crate::randmat::{
    build_precoders, steering_vector, target_channel, ComplexMatrix, Hypothesis, Phase, ScenarioConfig,
};

pub use config::{
    load_config, parse_config, parse_override, AllocationSection, DetectorSection, ExperimentConfig, SweepSection,
    ValidateSection,
};

/// Exit status for a successful run.
pub const EXIT_OK: i32 = 0;
/// At least one gated `validate` row failed.
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_RUNTIME: i32 = 4;

/// Closed form and Monte Carlo agree within `max(3 stderr, MC_ABS_TOL)`.
const MC_ABS_TOL: f64 = 5e-3;
const RATE_ABS_TOL: f64 = 1e-3;
const LIMIT_TOL: f64 = 1e-6;
const LIMIT_SNR: f64 = 1e-9;
/// The exponential-integral form of P_D is only gated where it is
/// numerically usable.
const EI_FORM_MAX_L: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Validate,
    Roc,
    PeVsTau,
    PeVsMu,
    RateVsPower,
    PfVsPower,
    PeVsPower,
    Allocate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Roc => "roc",
            Command::PeVsTau => "pe-vs-tau",
            Command::PeVsMu => "pe-vs-mu",
            Command::RateVsPower => "rate-vs-power",
            Command::PfVsPower => "pf-vs-power",
            Command::PeVsPower => "pe-vs-power",
            Command::Allocate => "allocate",
        }
    }

    pub fn header(self) -> &'static [&'static str] {
        match self {
            Command::Validate => &[
                "check",
                "L",
                "tau",
                "gamma_e",
                "closed_form",
                "oracle",
                "stderr",
                "pass",
            ],
            Command::Roc => &[
                "mu_db",
                "tau",
                "pf_analytic",
                "pf_mc",
                "pf_stderr",
                "pd_analytic",
                "pd_mc",
                "pd_stderr",
                "trials",
            ],
            Command::PeVsTau => &["mu_db", "tau", "pe_analytic"],
            Command::PeVsMu => &["detector", "mu_db", "pe_mc", "pe_stderr", "pf_mc", "pf_stderr"],
            Command::RateVsPower | Command::PfVsPower | Command::PeVsPower => {
                &["mu_db", "p_dbm", "eta", "rate", "pf", "pf_stderr", "pe", "pe_stderr"]
            }
            Command::Allocate => &[
                "r_min",
                "feasible",
                "eta_star",
                "tau_star",
                "gamma_e",
                "pe_star",
                "achieved_rate",
            ],
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub command: Command,
    pub config_path: PathBuf,
    pub output_path: PathBuf,
    /// `(dot.path, value)` pairs applied in order.
    pub overrides: Vec<(String, String)>,
    pub workers: usize,
}

/// A finished table plus the number of gated checks that failed.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub command: Command,
    pub rows: Vec<Vec<String>>,
    pub failures: usize,
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        if self.failures > 0 {
            EXIT_VALIDATION
        } else {
            EXIT_OK
        }
    }
}

/// Loads the config, runs the command and writes the CSV.
pub fn run(spec: &ExperimentSpec) -> CliResult<Report> {
    if spec.workers == 0 {
        return Err(CliError::Config("workers must be >= 1".into()));
    }
    let config = load_config(&spec.config_path, &spec.overrides)?;
    let report = execute(spec.command, &config, spec.workers)?;
    let csv = render_csv(&report, &config)?;
    fs::write(&spec.output_path, csv)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", spec.output_path.display())))?;
    Ok(report)
}

/// Runs `command` against an already validated config.
pub fn execute(command: Command, config: &ExperimentConfig, workers: usize) -> CliResult<Report> {
    let mc = MonteCarlo::new(config.scenario.seed, workers)?;
    let (rows, failures) = match command {
        Command::Validate => validate(config, &mc)?,
        Command::Roc => (roc(config, &mc)?, 0),
        Command::PeVsTau => (pe_vs_tau(config)?, 0),
        Command::PeVsMu => (pe_vs_mu(config, &mc)?, 0),
        Command::RateVsPower | Command::PfVsPower | Command::PeVsPower => (power_sweep(command, config, &mc)?, 0),
        Command::Allocate => (allocation(config)?, 0),
    };
    Ok(Report {
        command,
        rows,
        failures,
    })
}

/// CSV text: one `#` comment recording the run's reproducibility inputs,
/// then the header and the rows.
pub fn render_csv(report: &Report, config: &ExperimentConfig) -> CliResult<String> {
    let mut out = format!(
        "# isac {} seed={} trials={} calibration_trials={} block_size={} streams=per_block canonical_workers=1\n",
        report.command, config.scenario.seed, config.scenario.trials, config.detector.trials, BLOCK_SIZE
    );
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let fail = |e: csv::Error| CliError::Runtime(e.to_string());
    w.write_record(report.command.header()).map_err(fail)?;
    for row in &report.rows {
        w.write_record(row).map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))?;
    out.push_str(&String::from_utf8(bytes).map_err(|e| CliError::Runtime(e.to_string()))?);
    Ok(out)
}

fn num(x: f64) -> String {
    x.to_string()
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn mc_agrees(closed: f64, oracle: &MCEstimate) -> bool {
    (closed - oracle.value).abs() <= (3.0 * oracle.stderr).max(MC_ABS_TOL)
}

fn verdict(ok: bool) -> String {
    if ok { "pass" } else { "fail" }.to_string()
}

/// Audit rows document the printed formulas and never gate the exit code.
fn audit_verdict(ok: bool) -> String {
    if ok { "audit_pass" } else { "audit_fail" }.to_string()
}

fn validate(config: &ExperimentConfig, mc: &MonteCarlo) -> CliResult<(Vec<Vec<String>>, usize)> {
    let v = &config.validate;
    let mut rows = Vec::new();
    let mut failures = 0;
    let mut gated = |rows: &mut Vec<Vec<String>>, mut row: Vec<String>, ok: bool| {
        failures += usize::from(!ok);
        row.push(verdict(ok));
        rows.push(row);
    };
    let zero = ComplexMatrix::zeros(2, 2);
    let direction = steering_vector(2, config.scenario.theta);

    for &l in &v.l {
        let lu = l as u32;
        let h0 = wishart_scn_statistics(l, &zero, v.trials, tags::CENTRAL ^ ((l as u64) << 16), mc)?;
        for &tau in &v.tau {
            let est = exceedance(&h0, tau);
            let closed = false_alarm_prob(lu, tau)?;
            let cells = |check: &str, value: f64| {
                vec![
                    check.into(),
                    l.to_string(),
                    num(tau),
                    String::new(),
                    num(value),
                    num(est.value),
                    num(est.stderr),
                ]
            };
            gated(&mut rows, cells("pf", closed), mc_agrees(closed, &est));
            let printed = false_alarm_prob_printed(lu, tau)?;
            let mut row = cells("pf_printed", printed);
            row.push(audit_verdict(mc_agrees(printed, &est)));
            rows.push(row);

            let limit = detection_prob(&AnalyticParams::new(lu, tau, LIMIT_SNR)?)?;
            let row = vec![
                "pd_limit".into(),
                l.to_string(),
                num(tau),
                num(LIMIT_SNR),
                num(limit),
                num(closed),
                "0".into(),
            ];
            gated(&mut rows, row, (limit - closed).abs() <= LIMIT_TOL);
        }
        for (gi, &gamma) in v.gamma_e.iter().enumerate() {
            let omega = noncentrality_matrix(&AnalyticParams::new(lu, 2.0, gamma)?, &direction)?;
            let tag = tags::NONCENTRAL ^ ((l as u64) << 16) ^ ((gi as u64) << 32);
            let h1 = wishart_scn_statistics(l, &omega, v.trials, tag, mc)?;
            for &tau in &v.tau {
                let params = AnalyticParams::new(lu, tau, gamma)?;
                let est = exceedance(&h1, tau);
                let cells = |check: &str, value: f64| {
                    vec![
                        check.into(),
                        l.to_string(),
                        num(tau),
                        num(gamma),
                        num(value),
                        num(est.value),
                        num(est.stderr),
                    ]
                };
                let closed = detection_prob(&params)?;
                gated(&mut rows, cells("pd", closed), mc_agrees(closed, &est));
                if l <= EI_FORM_MAX_L {
                    let ei = detection_prob_exponential_integral(&params)?;
                    gated(&mut rows, cells("pd_ei_form", ei), mc_agrees(ei, &est));
                }
                let printed = detection_prob_printed(&params)?;
                let mut row = cells("pd_printed", printed);
                row.push(audit_verdict(printed.is_finite() && mc_agrees(printed, &est)));
                rows.push(row);
            }
        }
    }

    for &n_u in &v.rate_n_u {
        for (ri, &rho) in v.rate_rho.iter().enumerate() {
            let closed = ergodic_rate(&RateParams { n_u, rho })?;
            let tag = tags::RATE ^ (u64::from(n_u) << 16) ^ ((ri as u64) << 32);
            let draws = mc.run(tag, v.rate_draws, |rng| {
                let x: f64 = (0..n_u).map(|_| rng.exponential(rho)).sum();
                Ok((1.0 + x).log2())
            })?;
            let (mean, stderr) = mean_stderr(&draws);
            let row = vec![
                format!("rate_nu={n_u}_rho={rho}"),
                String::new(),
                String::new(),
                String::new(),
                num(closed),
                num(mean),
                num(stderr),
            ];
            gated(
                &mut rows,
                row,
                (closed - mean).abs() <= (3.0 * stderr).max(RATE_ABS_TOL),
            );
        }
    }
    Ok((rows, failures))
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn analytic_applies(kind: DetectorKind, scenario: &ScenarioConfig, tau: f64) -> bool {
    kind == DetectorKind::Scn && scenario.n_r == 2 && scenario.snapshots >= 2 && tau > 1.0
}

fn roc(config: &ExperimentConfig, mc: &MonteCarlo) -> CliResult<Vec<Vec<String>>> {
    let kind = config.detector.kind;
    let mut rows = Vec::new();
    for &mu_db in &config.sweep.mu_db {
        let scenario = config.scenario.with_mu_db(mu_db);
        let l = scenario.snapshots as u32;
        let g = target_channel(scenario.beta, scenario.theta, scenario.n_r, scenario.n_t);
        let w = build_precoders(&scenario)?.joint();
        let gamma_e = effective_snr(&g, &w, scenario.mu_linear(), scenario.sigma_s2())?;
        for point in roc_curve(kind, &scenario, &config.sweep.tau, mc)? {
            let tau = point.threshold;
            let (pf_a, pd_a) = if analytic_applies(kind, &scenario, tau) {
                (
                    Some(false_alarm_prob(l, tau)?),
                    Some(detection_prob(&AnalyticParams::new(l, tau, gamma_e)?)?),
                )
            } else {
                (None, None)
            };
            rows.push(vec![
                num(mu_db),
                num(tau),
                opt(pf_a),
                num(point.pf.value),
                num(point.pf.stderr),
                opt(pd_a),
                num(point.pd.value),
                num(point.pd.stderr),
                point.pf.trials.to_string(),
            ]);
        }
    }
    Ok(rows)
}

/// Effective SNR seen by the allocator: the sensing share of the power
/// steered at the target.
fn residual_snr(scenario: &ScenarioConfig, p_s_watts: f64) -> CliResult<f64> {
    let g = target_channel(scenario.beta, scenario.theta, scenario.n_r, scenario.n_t);
    Ok(sensing_snr_from_residual(
        p_s_watts,
        &g,
        scenario.mu_linear(),
        scenario.sigma_s2(),
    )?)
}

fn pe_vs_tau(config: &ExperimentConfig) -> CliResult<Vec<Vec<String>>> {
    let mut rows = Vec::new();
    let l = config.scenario.snapshots as u32;
    for &mu_db in &config.sweep.mu_db {
        let scenario = config.scenario.with_mu_db(mu_db);
        let gamma_e = residual_snr(&scenario, (1.0 - scenario.eta) * scenario.p_total_watts())?;
        for &tau in &config.sweep.tau {
            rows.push(vec![num(mu_db), num(tau), num(total_error_prob(l, gamma_e, tau)?)]);
        }
    }
    Ok(rows)
}

/// Total error `(P_F + 1 - P_D) / 2` with its standard error.
fn error_estimate(pf: &MCEstimate, pd: &MCEstimate) -> (f64, f64) {
    (
        0.5 * (pf.value + 1.0 - pd.value),
        0.5 * (pf.stderr.powi(2) + pd.stderr.powi(2)).sqrt(),
    )
}

fn pe_vs_mu(config: &ExperimentConfig, mc: &MonteCarlo) -> CliResult<Vec<Vec<String>>> {
    let mut rows = Vec::new();
    for &kind in &config.detector.kinds {
        let threshold = calibrate_threshold(
            kind,
            &config.scenario,
            config.detector.target_pf,
            config.detector.trials,
            mc,
        )?;
        for &mu_db in &config.sweep.mu_db {
            let scenario = config.scenario.with_mu_db(mu_db);
            let pf = mc_probability(kind, &scenario, Hypothesis::H0, threshold, mc)?;
            let pd = mc_probability(kind, &scenario, Hypothesis::H1, threshold, mc)?;
            let (pe, pe_se) = error_estimate(&pf, &pd);
            rows.push(vec![
                kind.name().into(),
                num(mu_db),
                num(pe),
                num(pe_se),
                num(pf.value),
                num(pf.stderr),
            ]);
        }
    }
    Ok(rows)
}

/// Power sweeps share one layout. Each point uses the smallest
/// communication share meeting `allocation.r_min`; points where no split
/// meets it leave `eta`, `rate` and `pe` empty. The threshold is calibrated
/// once under nominal conditions.
fn power_sweep(command: Command, config: &ExperimentConfig, mc: &MonteCarlo) -> CliResult<Vec<Vec<String>>> {
    let kind = config.detector.kind;
    let want_pf = command != Command::RateVsPower;
    let want_pe = command == Command::PeVsPower;
    let threshold = if want_pf {
        Some(calibrate_threshold(
            kind,
            &config.scenario,
            config.detector.target_pf,
            config.detector.trials,
            mc,
        )?)
    } else {
        None
    };
    let r_min = config.allocation.r_min;
    let mut rows = Vec::new();
    for &mu_db in &config.sweep.mu_db {
        let at_mu = config.scenario.with_mu_db(mu_db);
        // Noise-only statistics do not depend on the transmit power.
        let pf = match threshold {
            Some(t) => {
                let stats = collect_statistics(
                    kind,
                    &at_mu,
                    Hypothesis::H0,
                    Phase::Disturbed,
                    at_mu.trials,
                    tags::H0,
                    mc,
                )?;
                Some(exceedance(&stats, t))
            }
            None => None,
        };
        for &p_dbm in &config.sweep.p_dbm {
            let mut scenario = at_mu.clone();
            scenario.p_total_dbm = p_dbm;
            let p_total = scenario.p_total_watts();
            let n_u = scenario.n_u as u32;
            let p_c = min_comm_power(n_u, scenario.sigma_h2, scenario.sigma_c2(), r_min, p_total)?;
            let mut row = vec![num(mu_db), num(p_dbm)];
            let mut pe = None;
            match p_c {
                Some(p_c) => {
                    let eta = (p_c / p_total).clamp(0.0, 1.0);
                    row.push(num(eta));
                    row.push(num(rate_at_power(n_u, scenario.sigma_h2, scenario.sigma_c2(), p_c)?));
                    if let (true, Some(t), Some(pf)) = (want_pe, threshold, pf.as_ref()) {
                        scenario.eta = eta;
                        let pd = mc_probability(kind, &scenario, Hypothesis::H1, t, mc)?;
                        pe = Some(error_estimate(pf, &pd));
                    }
                }
                None => row.extend([String::new(), String::new()]),
            }
            match (want_pf, pf.as_ref()) {
                (true, Some(pf)) => row.extend([num(pf.value), num(pf.stderr)]),
                _ => row.extend([String::new(), String::new()]),
            }
            match pe {
                Some((v, se)) => row.extend([num(v), num(se)]),
                None => row.extend([String::new(), String::new()]),
            }
            rows.push(row);
        }
    }
    Ok(rows)
}

fn allocation(config: &ExperimentConfig) -> CliResult<Vec<Vec<String>>> {
    let targets = if config.sweep.r_min.is_empty() {
        vec![config.allocation.r_min]
    } else {
        config.sweep.r_min.clone()
    };
    let mut rows = Vec::new();
    for r_min in targets {
        let result = allocate(&AllocationProblem {
            config: config.scenario.clone(),
            r_min,
            tau_search: config.allocation.tau_search(),
        })?;
        rows.push(vec![
            num(r_min),
            result.feasible.to_string(),
            opt(result.eta_star),
            opt(result.tau_star),
            opt(result.gamma_e),
            opt(result.p_e_star),
            opt(result.achieved_rate),
        ]);
    }
    Ok(rows)
}
