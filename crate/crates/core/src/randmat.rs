//! Signal model and random-matrix kernels.
//!
//! A monostatic base station with `n_t` transmit antennas serves an
//! `n_u`-antenna user while an `n_r`-element array listens for a point
//! target. Snapshots are drawn for one of three phases:
//!
//! * training: noise only, nominal power `sigma_s2`;
//! * ideal: echo plus nominal noise;
//! * disturbed: echo plus nominal noise plus an independent white jammer of
//!   power `(mu - 1) sigma_s2`, so the total noise is `mu sigma_s2`.
//!
//! All sampling goes through [`RngStream`], a ChaCha generator keyed by
//! `(seed, stream_index)`, so draws are reproducible across platforms and
//! independent streams can run on separate workers.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Index, IndexMut};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Dense complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries cannot form a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(domain("matrix entries must be finite"));
        }
        Ok(ComplexMatrix { rows, cols, data })
    }

    /// Real diagonal matrix.
    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = Complex64::new(v, 0.0);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn matmul(&self, rhs: &ComplexMatrix) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * factor).collect(),
        }
    }

    pub fn scale_real(&self, factor: f64) -> Self {
        self.scale(Complex64::new(factor, 0.0))
    }

    /// Horizontal concatenation `[self, rhs]`.
    pub fn hstack(&self, rhs: &ComplexMatrix) -> Result<Self> {
        if self.rows != rhs.rows {
            return Err(Error::Dimension("hstack needs equal row counts".into()));
        }
        let mut out = Self::zeros(self.rows, self.cols + rhs.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(i, j)] = self[(i, j)];
            }
            for j in 0..rhs.cols {
                out[(i, self.cols + j)] = rhs[(i, j)];
            }
        }
        Ok(out)
    }

    pub fn frobenius_norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        if self.rows != self.cols {
            return false;
        }
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        for i in 0..self.rows {
            for j in i..self.cols {
                if (self[(i, j)] - self[(j, i)].conj()).norm() > tol * scale {
                    return false;
                }
            }
        }
        true
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|j| format!("{:.6e}", self[(i, j)])).collect();
            writeln!(f, "  {}", row.join(", "))?;
        }
        write!(f, "]")
    }
}

#[derive(Serialize, Deserialize)]
#[serde(remote = "Complex64", deny_unknown_fields)]
struct Complex64Def {
    re: f64,
    im: f64,
}

/// Full description of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Transmit antennas at the base station.
    pub n_t: usize,
    /// Sensing receive antennas.
    pub n_r: usize,
    /// Receive antennas at the communication user.
    pub n_u: usize,
    /// Snapshots per trial (`L`).
    pub snapshots: usize,
    pub p_total_dbm: f64,
    /// Fraction of the power budget given to communication.
    pub eta: f64,
    /// Covariance mismatch in dB; 0 dB is the matched case.
    pub mu_db: f64,
    pub sigma_s2_dbm: f64,
    pub sigma_c2_dbm: f64,
    /// Per-entry variance of the base station to user channel.
    pub sigma_h2: f64,
    /// Complex reflection coefficient (RCS and two-way path loss).
    #[serde(with = "Complex64Def")]
    pub beta: Complex64,
    /// Target angle in radians.
    pub theta: f64,
    pub seed: u64,
    pub trials: usize,
}

impl ScenarioConfig {
    /// Checks every invariant, naming the first one violated.
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(domain(m.to_string()));
        if self.n_t == 0 || self.n_r == 0 || self.n_u == 0 {
            return fail("antenna counts n_t, n_r, n_u must be positive");
        }
        if self.n_u > self.n_t {
            return fail("n_u must not exceed n_t (orthonormal communication precoder)");
        }
        if self.snapshots < self.n_r {
            return fail("snapshots must be >= n_r so the sample covariance is full rank");
        }
        if self.snapshots < 2 {
            return fail("snapshots must be >= 2");
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return fail("eta must lie in [0, 1]");
        }
        if !(self.mu_db >= 0.0) {
            return fail("mu_db must be >= 0 (mu_linear >= 1)");
        }
        if !(self.sigma_h2 > 0.0) {
            return fail("sigma_h2 must be positive");
        }
        if self.trials == 0 {
            return fail("trials must be positive");
        }
        let finite = [
            self.p_total_dbm,
            self.sigma_s2_dbm,
            self.sigma_c2_dbm,
            self.theta,
            self.beta.re,
            self.beta.im,
            self.mu_db,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return fail("powers, angles and beta must be finite");
        }
        Ok(())
    }

    pub fn p_total_watts(&self) -> f64 {
        dbm_to_watts(self.p_total_dbm)
    }

    pub fn sigma_s2(&self) -> f64 {
        dbm_to_watts(self.sigma_s2_dbm)
    }

    pub fn sigma_c2(&self) -> f64 {
        dbm_to_watts(self.sigma_c2_dbm)
    }

    pub fn mu_linear(&self) -> f64 {
        db_to_linear(self.mu_db)
    }

    pub fn with_mu_db(&self, mu_db: f64) -> Self {
        ScenarioConfig { mu_db, ..self.clone() }
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Mixes a master seed with a tag (SplitMix64 finaliser) to key independent
/// experiment components.
pub fn derive_seed(master: u64, tag: u64) -> u64 {
    let mut z = master ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic generator for one `(seed, stream_index)` pair.
#[derive(Debug, Clone)]
pub struct RngStream {
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_index);
        RngStream { rng }
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// Circular complex Gaussian with `E|z|^2 = variance`.
    pub fn complex_normal(&mut self, variance: f64) -> Complex64 {
        let s = (0.5 * variance).sqrt();
        let re = self.standard_normal();
        let im = self.standard_normal();
        Complex64::new(s * re, s * im)
    }

    pub fn uniform(&mut self) -> f64 {
        rand::Rng::gen::<f64>(&mut self.rng)
    }

    /// Exponential variate with the given mean.
    pub fn exponential(&mut self, mean: f64) -> f64 {
        -mean * (1.0 - self.uniform()).ln()
    }
}

/// Half-wavelength ULA response `[1, e^{-j pi sin(theta)}, ...]^T` (n x 1).
pub fn steering_vector(n: usize, theta: f64) -> ComplexMatrix {
    let phase = -PI * theta.sin();
    let data = (0..n).map(|i| Complex64::from_polar(1.0, phase * i as f64)).collect();
    ComplexMatrix { rows: n, cols: 1, data }
}

/// Rank-one point-target response `beta a(theta) b(theta)^H` (n_r x n_t).
pub fn target_channel(beta: Complex64, theta: f64, n_r: usize, n_t: usize) -> ComplexMatrix {
    let a = steering_vector(n_r, theta);
    let b = steering_vector(n_t, theta);
    let mut g = ComplexMatrix::zeros(n_r, n_t);
    for i in 0..n_r {
        for j in 0..n_t {
            g[(i, j)] = beta * a[(i, 0)] * b[(j, 0)].conj();
        }
    }
    g
}

/// Communication and sensing precoders for one power split.
#[derive(Debug, Clone)]
pub struct Precoders {
    /// `n_t x n_u`, orthonormal columns scaled so `||W_c||_F^2 = eta P`.
    pub w_c: ComplexMatrix,
    /// `n_t x 1`, aligned with `b(theta)`, `||w_s||^2 = (1 - eta) P`.
    pub w_s: ComplexMatrix,
}

impl Precoders {
    /// `W = [W_c, w_s]`.
    pub fn joint(&self) -> ComplexMatrix {
        self.w_c
            .hstack(&self.w_s)
            .expect("precoders share the transmit dimension")
    }
}

pub fn build_precoders(config: &ScenarioConfig) -> Result<Precoders> {
    if config.n_u > config.n_t {
        return Err(Error::Dimension(format!(
            "n_u = {} > n_t = {}: no orthonormal communication precoder exists",
            config.n_u, config.n_t
        )));
    }
    if !(0.0..=1.0).contains(&config.eta) {
        return Err(domain("eta must lie in [0, 1]"));
    }
    let p = config.p_total_watts();
    let mut w_c = ComplexMatrix::zeros(config.n_t, config.n_u);
    let amp_c = (config.eta * p / config.n_u as f64).sqrt();
    for k in 0..config.n_u {
        w_c[(k, k)] = Complex64::new(amp_c, 0.0);
    }
    let b = steering_vector(config.n_t, config.theta);
    let amp_s = ((1.0 - config.eta) * p).sqrt() / (config.n_t as f64).sqrt();
    let w_s = b.scale_real(amp_s);
    Ok(Precoders { w_c, w_s })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hypothesis {
    H0,
    H1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Training,
    Ideal,
    Disturbed,
}

/// Precomputed quantities for drawing snapshot matrices from one scenario.
#[derive(Debug, Clone)]
pub struct SnapshotModel {
    n_r: usize,
    snapshots: usize,
    /// `G W`, n_r x (n_u + 1).
    gw: ComplexMatrix,
    sigma_s2: f64,
    jammer_var: f64,
}

impl SnapshotModel {
    pub fn new(config: &ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let precoders = build_precoders(config)?;
        let g = target_channel(config.beta, config.theta, config.n_r, config.n_t);
        let gw = g.matmul(&precoders.joint())?;
        let sigma_s2 = config.sigma_s2();
        Ok(SnapshotModel {
            n_r: config.n_r,
            snapshots: config.snapshots,
            gw,
            sigma_s2,
            jammer_var: (config.mu_linear() - 1.0) * sigma_s2,
        })
    }

    /// `G W` for this scenario.
    pub fn echo_gain(&self) -> &ComplexMatrix {
        &self.gw
    }

    /// Draws one `n_r x L` snapshot matrix. The training phase is always
    /// noise-only, whatever `hypothesis` says.
    pub fn sample(&self, hypothesis: Hypothesis, phase: Phase, rng: &mut RngStream) -> ComplexMatrix {
        let l = self.snapshots;
        let mut y = ComplexMatrix::zeros(self.n_r, l);
        if hypothesis == Hypothesis::H1 && phase != Phase::Training {
            // G X = G W S with i.i.d. unit-power symbols.
            let streams = self.gw.cols();
            let mut s = ComplexMatrix::zeros(streams, l);
            for z in s.data.iter_mut() {
                *z = rng.complex_normal(1.0);
            }
            y = self.gw.matmul(&s).expect("conformable by construction");
        }
        for z in y.data.iter_mut() {
            *z += rng.complex_normal(self.sigma_s2);
        }
        if phase == Phase::Disturbed && self.jammer_var > 0.0 {
            for z in y.data.iter_mut() {
                *z += rng.complex_normal(self.jammer_var);
            }
        }
        y
    }
}

/// Convenience wrapper building a [`SnapshotModel`] for a single draw.
pub fn sample_snapshots(
    config: &ScenarioConfig,
    hypothesis: Hypothesis,
    phase: Phase,
    rng: &mut RngStream,
) -> Result<ComplexMatrix> {
    Ok(SnapshotModel::new(config)?.sample(hypothesis, phase, rng))
}

/// `(1/L) Y Y^H`.
pub fn sample_covariance(y: &ComplexMatrix) -> ComplexMatrix {
    let n = y.rows;
    let l = y.cols;
    let mut out = ComplexMatrix::zeros(n, n);
    let inv_l = 1.0 / l as f64;
    for i in 0..n {
        for j in i..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..l {
                acc += y[(i, k)] * y[(j, k)].conj();
            }
            acc *= inv_l;
            if i == j {
                out[(i, i)] = Complex64::new(acc.re, 0.0);
            } else {
                out[(i, j)] = acc;
                out[(j, i)] = acc.conj();
            }
        }
    }
    out
}

/// Complex non-central Wishart sampler: `(1/L) sum_l y_l y_l^H` with
/// `y_l ~ CN(m_l, I)` and `M M^H = omega`.
///
/// The mean matrix holds a pivoted-Cholesky rank factorisation of `omega` in
/// its first `rank(omega)` columns and zeros elsewhere.
#[derive(Debug, Clone)]
pub struct NoncentralWishart {
    snapshots: usize,
    mean: ComplexMatrix,
}

impl NoncentralWishart {
    pub fn new(snapshots: usize, omega: &ComplexMatrix) -> Result<Self> {
        let n = omega.rows();
        if omega.cols() != n {
            return Err(Error::Dimension("non-centrality matrix must be square".into()));
        }
        if snapshots < n {
            return Err(domain("non-central Wishart needs L >= n"));
        }
        if !omega.is_hermitian(1e-10) {
            return Err(domain("non-centrality matrix must be Hermitian"));
        }
        let eig = hermitian_eigenvalues(omega)?;
        let scale = omega.max_abs().max(1.0);
        if eig.last().copied().unwrap_or(0.0) < -1e-10 * scale {
            return Err(domain("non-centrality matrix must be positive semidefinite"));
        }
        let factor = pivoted_cholesky(omega, 1e-12 * scale);
        let mut mean = ComplexMatrix::zeros(n, snapshots);
        for i in 0..n {
            for j in 0..factor.cols() {
                mean[(i, j)] = factor[(i, j)];
            }
        }
        Ok(NoncentralWishart { snapshots, mean })
    }

    pub fn snapshots(&self) -> usize {
        self.snapshots
    }

    /// The mean matrix `M` (n x L).
    pub fn mean(&self) -> &ComplexMatrix {
        &self.mean
    }

    pub fn sample(&self, rng: &mut RngStream) -> ComplexMatrix {
        let mut y = self.mean.clone();
        for z in y.data.iter_mut() {
            *z += rng.complex_normal(1.0);
        }
        sample_covariance(&y)
    }
}

pub fn noncentral_wishart_sample(
    snapshots: usize,
    omega: &ComplexMatrix,
    rng: &mut RngStream,
) -> Result<ComplexMatrix> {
    Ok(NoncentralWishart::new(snapshots, omega)?.sample(rng))
}

/// Returns `F` (n x r) with `F F^H = a`, dropping pivots below `tol`.
fn pivoted_cholesky(a: &ComplexMatrix, tol: f64) -> ComplexMatrix {
    let n = a.rows();
    let mut work = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut l = ComplexMatrix::zeros(n, n);
    let mut rank = 0;
    for k in 0..n {
        let (p, pivot) = (k..n)
            .map(|i| (i, work[(i, i)].re))
            .fold((k, f64::NEG_INFINITY), |best, c| if c.1 > best.1 { c } else { best });
        if pivot <= tol {
            break;
        }
        if p != k {
            perm.swap(k, p);
            for j in 0..n {
                let t = work[(k, j)];
                work[(k, j)] = work[(p, j)];
                work[(p, j)] = t;
            }
            for i in 0..n {
                let t = work[(i, k)];
                work[(i, k)] = work[(i, p)];
                work[(i, p)] = t;
            }
            for j in 0..k {
                let t = l[(k, j)];
                l[(k, j)] = l[(p, j)];
                l[(p, j)] = t;
            }
        }
        let d = pivot.sqrt();
        l[(k, k)] = Complex64::new(d, 0.0);
        for i in k + 1..n {
            l[(i, k)] = work[(i, k)] / d;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let upd = l[(i, k)] * l[(j, k)].conj();
                work[(i, j)] -= upd;
            }
        }
        rank += 1;
    }
    let mut out = ComplexMatrix::zeros(n, rank.max(1));
    for (row, &orig) in perm.iter().enumerate() {
        for j in 0..rank {
            out[(orig, j)] = l[(row, j)];
        }
    }
    out
}

const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigenvalues of a Hermitian matrix, sorted descending (ties keep their
/// original diagonal order). Closed form for 2x2, cyclic Jacobi otherwise.
pub fn hermitian_eigenvalues(m: &ComplexMatrix) -> Result<Vec<f64>> {
    if m.rows() != m.cols() {
        return Err(Error::Dimension("eigenvalues need a square matrix".into()));
    }
    if !m.is_hermitian(1e-10) {
        return Err(domain("matrix is not Hermitian"));
    }
    let mut values = match m.rows() {
        1 => vec![m[(0, 0)].re],
        2 => {
            let (l1, l2) = eig2(m);
            vec![l1, l2]
        }
        _ => jacobi_eigenvalues(m),
    };
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(values)
}

/// Closed-form spectrum of a 2x2 Hermitian matrix, `(max, min)`.
pub(crate) fn eig2(m: &ComplexMatrix) -> (f64, f64) {
    let a = m[(0, 0)].re;
    let d = m[(1, 1)].re;
    let mean = 0.5 * (a + d);
    let half_diff = 0.5 * (a - d);
    let radius = (half_diff * half_diff + m[(0, 1)].norm_sqr()).sqrt();
    (mean + radius, mean - radius)
}

pub(crate) fn jacobi_eigenvalues(m: &ComplexMatrix) -> Vec<f64> {
    let n = m.rows();
    let mut a = m.clone();
    // enforce exact Hermitian symmetry before rotating
    for i in 0..n {
        a[(i, i)] = Complex64::new(a[(i, i)].re, 0.0);
        for j in i + 1..n {
            let avg = 0.5 * (a[(i, j)] + a[(j, i)].conj());
            a[(i, j)] = avg;
            a[(j, i)] = avg.conj();
        }
    }
    let total = a.frobenius_norm_sqr().sqrt().max(f64::MIN_POSITIVE);
    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off < JACOBI_TOL * total {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let mag = apq.norm();
                if mag == 0.0 {
                    continue;
                }
                // Phase rotation making a[p][q] real and positive.
                let phase = apq / mag;
                for r in 0..n {
                    a[(r, q)] *= phase.conj();
                }
                for r in 0..n {
                    a[(q, r)] *= phase;
                }
                // Real Jacobi rotation on the (p, q) plane.
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let theta = (aqq - app) / (2.0 * mag);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..n {
                    let arp = a[(r, p)];
                    let arq = a[(r, q)];
                    a[(r, p)] = arp * c - arq * s;
                    a[(r, q)] = arp * s + arq * c;
                }
                for r in 0..n {
                    let apr = a[(p, r)];
                    let aqr = a[(q, r)];
                    a[(p, r)] = apr * c - aqr * s;
                    a[(q, r)] = apr * s + aqr * c;
                }
                a[(p, q)] = Complex64::new(0.0, 0.0);
                a[(q, p)] = Complex64::new(0.0, 0.0);
            }
        }
    }
    (0..n).map(|i| a[(i, i)].re).collect()
}
