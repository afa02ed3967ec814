//! Experiment descriptions, signal generators, noise and the truth simulation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use thiserror::Error;

use crate::numerics::{self, Matrix, NumericsError, SqrtPolicy, Vector};
use crate::smib::{self, LinearOutput, MachineInput, MachineParams, MachineState, SmibModel};

/// Seed of the shipped unknown-input distribution matrix.
pub const DEFAULT_D_SEED: u64 = 0;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("could not read scenario file {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("invalid scenario field `{field}`: {reason}")]
    Validation { field: String, reason: String },
    #[error("truth simulation failed at t = {t}: {source}")]
    Simulation { t: f64, source: NumericsError },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::Validation { field: field.into(), reason: reason.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Ekf,
    Ukf,
    Ckf,
    Uio,
    Lipschitz,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 5] =
        [EstimatorKind::Ekf, EstimatorKind::Ukf, EstimatorKind::Ckf, EstimatorKind::Uio, EstimatorKind::Lipschitz];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Ekf => "ekf",
            EstimatorKind::Ukf => "ukf",
            EstimatorKind::Ckf => "ckf",
            EstimatorKind::Uio => "uio",
            EstimatorKind::Lipschitz => "lipschitz",
        }
    }

    pub fn is_kalman(self) -> bool {
        matches!(self, EstimatorKind::Ekf | EstimatorKind::Ukf | EstimatorKind::Ckf)
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EstimatorKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| format!("unknown estimator `{s}` (expected ekf, ukf, ckf, uio or lipschitz)"))
    }
}

/// A segment of a piecewise-constant signal, active on the open interval
/// `(start, end)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub value: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalSpec {
    #[default]
    Zero,
    /// `offset + amplitude · sin(frequency · t + phase)` per channel,
    /// frequency in rad/s.
    Sinusoid {
        amplitude: Vec<f64>,
        frequency: Vec<f64>,
        #[serde(default)]
        phase: Vec<f64>,
        #[serde(default)]
        offset: Vec<f64>,
    },
    PaperAttack,
    PaperUnknownInput,
    Piecewise { segments: Vec<Segment> },
}

impl SignalSpec {
    pub fn is_zero(&self) -> bool {
        matches!(self, SignalSpec::Zero)
    }

    pub fn eval(&self, t: f64, dim: usize) -> Vector {
        match self {
            SignalSpec::Zero => Vector::zeros(dim),
            SignalSpec::Sinusoid { amplitude, frequency, phase, offset } => Vector::from_iterator(
                dim,
                (0..dim).map(|i| {
                    let ph = phase.get(i).copied().unwrap_or(0.0);
                    let off = offset.get(i).copied().unwrap_or(0.0);
                    off + amplitude[i] * (frequency[i] * t + ph).sin()
                }),
            ),
            SignalSpec::PaperAttack => attack_vector(t),
            SignalSpec::PaperUnknownInput => unknown_input(t),
            SignalSpec::Piecewise { segments } => {
                let mut out = Vector::zeros(dim);
                for s in segments.iter().filter(|s| s.start < t && t < s.end) {
                    for (i, v) in s.value.iter().enumerate() {
                        out[i] += v;
                    }
                }
                out
            }
        }
    }

    pub fn validate(&self, field: &str, dim: usize) -> Result<(), ScenarioError> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match self {
            SignalSpec::Zero => Ok(()),
            SignalSpec::PaperAttack if dim != 4 => Err(invalid(field, "paper_attack has 4 channels")),
            SignalSpec::PaperUnknownInput if dim != 3 => {
                Err(invalid(field, format!("paper_unknown_input has 3 channels, d_matrix has {dim} columns")))
            }
            SignalSpec::PaperAttack | SignalSpec::PaperUnknownInput => Ok(()),
            SignalSpec::Sinusoid { amplitude, frequency, phase, offset } => {
                if amplitude.len() != dim || frequency.len() != dim {
                    return Err(invalid(field, format!("sinusoid needs {dim} amplitudes and frequencies")));
                }
                if phase.len() > dim || offset.len() > dim {
                    return Err(invalid(field, "too many phase/offset entries"));
                }
                if ![amplitude, frequency, phase, offset].iter().all(|v| finite(v)) {
                    return Err(invalid(field, "non-finite sinusoid parameter"));
                }
                Ok(())
            }
            SignalSpec::Piecewise { segments } => {
                for s in segments {
                    if !(s.start.is_finite() && s.end.is_finite() && s.start < s.end) {
                        return Err(invalid(field, "segment bounds must be finite with start < end"));
                    }
                    if s.value.len() != dim || !finite(&s.value) {
                        return Err(invalid(field, format!("segment value needs {dim} finite entries")));
                    }
                }
                Ok(())
            }
        }
    }
}

/// The reference measurement attack. Channel 2 carries an extra `5/t²` burst
/// on the open window `5 < t < 6`.
pub fn attack_vector(t: f64) -> Vector {
    let v2 = if 5.0 < t && t < 6.0 { 0.5 * (2.0 * t).sin() + 5.0 / (t * t) } else { 0.0 };
    Vector::from_column_slice(&[0.2 * t.sin(), v2, 0.3 * t.cos(), 0.2])
}

/// The reference unknown input, `0.01 cos t` on three channels.
pub fn unknown_input(t: f64) -> Vector {
    Vector::from_element(3, 0.01 * t.cos())
}

/// Zero-mean Gaussian draws with a fixed covariance.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    sqrt: Matrix,
}

impl GaussianSampler {
    /// Factors `cov` once. Singular PSD covariances use the eigen square root.
    pub fn new(cov: &Matrix) -> Result<Self, NumericsError> {
        let sqrt = numerics::covariance_sqrt(cov, SqrtPolicy::EigenFallback)?;
        Ok(Self { sqrt })
    }

    pub fn draw(&self, rng: &mut ChaCha8Rng) -> Vector {
        let n = self.sqrt.ncols();
        let z = Vector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(rng)));
        &self.sqrt * z
    }
}

/// One draw from `N(0, cov)`.
pub fn sample_noise(cov: &Matrix, rng: &mut ChaCha8Rng) -> Result<Vector, NumericsError> {
    Ok(GaussianSampler::new(cov)?.draw(rng))
}

/// Seeded unknown-input distribution matrix: entries uniform in `[0, 1)` from
/// ChaCha8, columns scaled to unit norm, filled column by column.
pub fn unknown_input_matrix(seed: u64, rows: usize, cols: usize) -> Matrix {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut d = Matrix::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            d[(i, j)] = rng.random::<f64>();
        }
        let norm = d.column(j).norm();
        d.column_mut(j).unscale_mut(norm);
    }
    d
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MeasurementModel {
    /// `y = C x + c0` with `C` the output Jacobian at `x(0)`.
    #[default]
    Linear,
    /// Full nonlinear output map.
    Nonlinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UkfParams {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
}

impl UkfParams {
    /// α = 1, β = 2, κ = 3 − n.
    pub fn classic(n: usize) -> Self {
        Self { alpha: 1.0, beta: 2.0, kappa: 3.0 - n as f64 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzConstants {
    pub rho: f64,
    pub varphi: f64,
    pub mu: f64,
    /// Used by the unknown-input observer synthesis.
    pub gamma: f64,
}

impl Default for LipschitzConstants {
    fn default() -> Self {
        Self { rho: 1.0, varphi: 1.0, mu: 1.0, gamma: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub params: MachineParams,
    pub u: MachineInput,
    pub x0: MachineState,
    pub xhat0: MachineState,
    pub t_end: f64,
    pub dt: f64,
    pub q_cov: Matrix,
    pub r_cov: Matrix,
    pub p0_cov: Matrix,
    pub d_matrix: Matrix,
    pub unknown_input: SignalSpec,
    pub attack: SignalSpec,
    pub estimators: Vec<EstimatorKind>,
    pub seed: u64,
    pub measurement: MeasurementModel,
    pub ukf: UkfParams,
    pub lipschitz: LipschitzConstants,
    /// Let Kalman filters fall back to an eigen square root when a
    /// covariance stops being positive definite.
    pub sqrt_fallback: bool,
}

/// Post-contingency true state of the reference scenario.
pub const REFERENCE_X0: MachineState = MachineState::new(0.4233, 377.3780, 1.0277, 0.1190);

pub fn default_paper_scenario() -> Scenario {
    let params = MachineParams::reference();
    let u = smib::balancing_input(&REFERENCE_X0, &params).expect("reference state is finite");
    let diag = |v: [f64; 4]| Matrix::from_diagonal(&Vector::from_column_slice(&v));
    Scenario {
        name: "default_paper".into(),
        params,
        u,
        x0: REFERENCE_X0,
        xhat0: MachineState::new(0.0, params.omega0, 0.0, 0.0),
        t_end: 10.0,
        dt: 0.01,
        q_cov: diag([1e-6, 1e-5, 1.47e-10, 1.17e-8]),
        r_cov: diag([1e-4; 4]),
        p0_cov: diag([1e-4, 14.2122, 1e-4, 1e-4]),
        d_matrix: unknown_input_matrix(DEFAULT_D_SEED, 4, 3),
        unknown_input: SignalSpec::PaperUnknownInput,
        attack: SignalSpec::PaperAttack,
        estimators: EstimatorKind::ALL.to_vec(),
        seed: 1,
        measurement: MeasurementModel::Linear,
        ukf: UkfParams::classic(4),
        lipschitz: LipschitzConstants::default(),
        sqrt_fallback: false,
    }
}

impl Scenario {
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    /// Sample times `0, dt, …, t_end`.
    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps()).map(|k| k as f64 * self.dt).collect()
    }

    pub fn with_attack(mut self, on: bool) -> Self {
        self.attack = match (on, self.attack) {
            (false, _) => SignalSpec::Zero,
            (true, SignalSpec::Zero) => SignalSpec::PaperAttack,
            (true, s) => s,
        };
        self
    }

    pub fn with_unknown_inputs(mut self, on: bool) -> Self {
        self.unknown_input = match (on, self.unknown_input) {
            (false, _) => SignalSpec::Zero,
            (true, SignalSpec::Zero) => SignalSpec::PaperUnknownInput,
            (true, s) => s,
        };
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_xhat0(mut self, xhat0: MachineState) -> Self {
        self.xhat0 = xhat0;
        self
    }

    /// Frozen affine output model at `x(0)`.
    pub fn linear_output(&self) -> LinearOutput {
        smib::output_matrix(&self.params, &self.x0)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if let Err(smib::SmibError::InvalidParams(name)) = self.params.validate() {
            return Err(invalid(format!("params.{name}"), "out of range"));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(invalid("dt", "must be positive"));
        }
        if !(self.t_end.is_finite() && self.t_end >= self.dt) {
            return Err(invalid("t_end", "must be at least dt"));
        }
        for (name, x) in [("x0", &self.x0), ("xhat0", &self.xhat0)] {
            if !x.is_finite() {
                return Err(invalid(name, "non-finite entry"));
            }
        }
        if !(self.u.tm.is_finite() && self.u.efd.is_finite()) {
            return Err(invalid("input", "non-finite entry"));
        }
        for (name, m) in [("q_cov", &self.q_cov), ("r_cov", &self.r_cov), ("p0_cov", &self.p0_cov)] {
            check_psd(name, m)?;
        }
        if self.d_matrix.nrows() != 4 || self.d_matrix.ncols() == 0 {
            return Err(invalid("d_matrix", "must be 4 x d with d >= 1"));
        }
        if !numerics::is_finite(&self.d_matrix) {
            return Err(invalid("d_matrix", "non-finite entry"));
        }
        self.unknown_input.validate("unknown_input", self.d_matrix.ncols())?;
        self.attack.validate("attack", 4)?;
        let u = &self.ukf;
        if !(u.alpha.is_finite() && u.alpha > 0.0 && u.beta.is_finite() && u.kappa.is_finite()) {
            return Err(invalid("ukf", "alpha must be positive and all entries finite"));
        }
        if u.alpha * u.alpha * (4.0 + u.kappa) <= 0.0 {
            return Err(invalid("ukf", "alpha^2 (n + kappa) must be positive"));
        }
        let l = &self.lipschitz;
        if ![l.rho, l.varphi, l.mu, l.gamma].iter().all(|v| v.is_finite()) || l.gamma < 0.0 {
            return Err(invalid("lipschitz", "constants must be finite, gamma >= 0"));
        }
        Ok(())
    }
}

fn check_psd(name: &str, m: &Matrix) -> Result<(), ScenarioError> {
    if m.shape() != (4, 4) {
        return Err(invalid(name, "must be 4 x 4"));
    }
    if !numerics::is_finite(m) {
        return Err(invalid(name, "non-finite entry"));
    }
    let scale = numerics::max_abs(m).max(1.0);
    if (m - m.transpose()).iter().any(|v| v.abs() > 1e-10 * scale) {
        return Err(invalid(name, "must be symmetric"));
    }
    let lo = numerics::min_eigenvalue_symmetric(m)?;
    if lo < -1e-12 * scale {
        return Err(invalid(name, "must be positive semidefinite"));
    }
    Ok(())
}

// On-disk representation. Matrices are arrays of rows.

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: String,
    t_end: f64,
    dt: f64,
    seed: u64,
    #[serde(default)]
    measurement: MeasurementModel,
    estimators: Vec<EstimatorKind>,
    #[serde(default)]
    sqrt_fallback: bool,
    params: MachineParams,
    input: MachineInput,
    x0: MachineState,
    xhat0: MachineState,
    q_cov: Vec<Vec<f64>>,
    r_cov: Vec<Vec<f64>>,
    p0_cov: Vec<Vec<f64>>,
    d_matrix: Vec<Vec<f64>>,
    #[serde(default)]
    unknown_input: SignalSpec,
    #[serde(default)]
    attack: SignalSpec,
    ukf: Option<UkfParams>,
    #[serde(default)]
    lipschitz: LipschitzConstants,
}

fn rows_of(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix_of(field: &str, rows: &[Vec<f64>]) -> Result<Matrix, ScenarioError> {
    let r = rows.len();
    let c = rows.first().map_or(0, |row| row.len());
    if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
        return Err(invalid(field, "must be a non-empty rectangular array of rows"));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    numerics::matrix(r, c, &flat).map_err(|e| invalid(field, e.to_string()))
}

impl ScenarioFile {
    fn from_scenario(s: &Scenario) -> Self {
        Self {
            name: s.name.clone(),
            t_end: s.t_end,
            dt: s.dt,
            seed: s.seed,
            measurement: s.measurement,
            estimators: s.estimators.clone(),
            sqrt_fallback: s.sqrt_fallback,
            params: s.params,
            input: s.u,
            x0: s.x0,
            xhat0: s.xhat0,
            q_cov: rows_of(&s.q_cov),
            r_cov: rows_of(&s.r_cov),
            p0_cov: rows_of(&s.p0_cov),
            d_matrix: rows_of(&s.d_matrix),
            unknown_input: s.unknown_input.clone(),
            attack: s.attack.clone(),
            ukf: Some(s.ukf),
            lipschitz: s.lipschitz,
        }
    }

    fn into_scenario(self) -> Result<Scenario, ScenarioError> {
        Ok(Scenario {
            q_cov: matrix_of("q_cov", &self.q_cov)?,
            r_cov: matrix_of("r_cov", &self.r_cov)?,
            p0_cov: matrix_of("p0_cov", &self.p0_cov)?,
            d_matrix: matrix_of("d_matrix", &self.d_matrix)?,
            name: self.name,
            params: self.params,
            u: self.input,
            x0: self.x0,
            xhat0: self.xhat0,
            t_end: self.t_end,
            dt: self.dt,
            unknown_input: self.unknown_input,
            attack: self.attack,
            estimators: self.estimators,
            seed: self.seed,
            measurement: self.measurement,
            ukf: self.ukf.unwrap_or_else(|| UkfParams::classic(4)),
            lipschitz: self.lipschitz,
            sqrt_fallback: self.sqrt_fallback,
        })
    }
}

/// Parses and validates a scenario from TOML text.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    let s = file.into_scenario()?;
    s.validate()?;
    Ok(s)
}

pub fn scenario_to_toml(s: &Scenario) -> String {
    toml::to_string(&ScenarioFile::from_scenario(s)).expect("scenario serializes")
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
    parse_scenario(&text)
}

pub fn save_scenario(s: &Scenario, path: &Path) -> Result<(), ScenarioError> {
    std::fs::write(path, scenario_to_toml(s))
        .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })
}

/// One realization of the true system and its measurements.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub times: Vec<f64>,
    pub states: Vec<Vector>,
    /// Noise- and attack-free outputs.
    pub outputs: Vec<Vector>,
    /// What the estimators see.
    pub measurements: Vec<Vector>,
    pub attacks: Vec<Vector>,
    pub linear_output: LinearOutput,
}

/// Process and measurement noise streams for one seed.
fn noise_rngs(seed: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let mut q = ChaCha8Rng::seed_from_u64(seed);
    q.set_stream(1);
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(2);
    (q, r)
}

/// Runs the true plant: `x_k = RK4(x_{k−1}; f + D d(t)) + q_{k−1}` and
/// `y_k = h(x_k) + r_k + v(t_k)`.
pub fn simulate(s: &Scenario) -> Result<Simulation, ScenarioError> {
    s.validate()?;
    let model = SmibModel::new(s.params, s.u);
    let lin = s.linear_output();
    let q = GaussianSampler::new(&s.q_cov)?;
    let r = GaussianSampler::new(&s.r_cov)?;
    let (mut q_rng, mut r_rng) = noise_rngs(s.seed);
    let times = s.times();
    let d_dim = s.d_matrix.ncols();
    let forced = |t: f64, x: &Vector| -> Vector {
        let mut dx = model.drift_vec(x);
        if !s.unknown_input.is_zero() {
            dx += &s.d_matrix * s.unknown_input.eval(t, d_dim);
        }
        dx
    };
    let observe = |x: &Vector| match s.measurement {
        MeasurementModel::Linear => lin.apply(x),
        MeasurementModel::Nonlinear => model.output_vec(x),
    };

    let mut states = Vec::with_capacity(times.len());
    let mut outputs = Vec::with_capacity(times.len());
    let mut measurements = Vec::with_capacity(times.len());
    let mut attacks = Vec::with_capacity(times.len());
    let mut x = s.x0.to_vector();
    for (k, &t) in times.iter().enumerate() {
        if k > 0 {
            let t_prev = times[k - 1];
            x = numerics::rk4_step(forced, &x, t_prev, s.dt)
                .map_err(|source| ScenarioError::Simulation { t, source })?;
            x += q.draw(&mut q_rng);
        }
        let y = observe(&x);
        let v = s.attack.eval(t, 4);
        let noisy = &y + r.draw(&mut r_rng) + &v;
        states.push(x.clone());
        outputs.push(y);
        measurements.push(noisy);
        attacks.push(v);
    }
    Ok(Simulation { times, states, outputs, measurements, attacks, linear_output: lin })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn attack_examples() {
        assert_eq!(attack_vector(0.0).as_slice(), &[0.0, 0.0, 0.3, 0.2]);
        assert_abs_diff_eq!(attack_vector(5.5)[1], 0.5 * 11f64.sin() + 5.0 / 30.25, epsilon = 1e-15);
        assert_abs_diff_eq!(attack_vector(5.5)[1], -0.3347, epsilon = 1e-4);
        assert_eq!(attack_vector(7.0)[1], 0.0);
        assert_eq!(attack_vector(5.0)[1], 0.0);
        assert_eq!(attack_vector(6.0)[1], 0.0);
        assert!(attack_vector(5.0 + 1e-9)[1].abs() > 0.05);
    }

    #[test]
    fn unknown_input_examples() {
        assert_eq!(unknown_input(0.0).as_slice(), &[0.01; 3]);
        assert!(unknown_input(PI / 2.0).iter().all(|v| v.abs() < 1e-17));
        assert_eq!(unknown_input(PI).as_slice(), &[-0.01; 3]);
    }

    #[test]
    fn zero_covariance_gives_zero_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v = sample_noise(&Matrix::zeros(4, 4), &mut rng).unwrap();
        assert!(v.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn sample_covariance_matches() {
        let r = Matrix::identity(4, 4) * 1e-4;
        let sampler = GaussianSampler::new(&r).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let mut acc = Matrix::zeros(4, 4);
        for _ in 0..n {
            let v = sampler.draw(&mut rng);
            acc += &v * v.transpose();
        }
        acc /= n as f64;
        for i in 0..4 {
            assert!((acc[(i, i)] - 1e-4).abs() <= 0.05 * 1e-4);
            for j in 0..4 {
                if i != j {
                    assert!(acc[(i, j)].abs() <= 0.05 * 1e-4);
                }
            }
        }
    }

    #[test]
    fn noise_stream_is_deterministic() {
        let r = Matrix::identity(4, 4);
        let mut a = ChaCha8Rng::seed_from_u64(9);
        let mut b = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            assert_eq!(sample_noise(&r, &mut a).unwrap(), sample_noise(&r, &mut b).unwrap());
        }
    }

    #[test]
    fn default_scenario_values() {
        let s = default_paper_scenario();
        assert_eq!(s.p0_cov[(1, 1)], 14.2122);
        assert_abs_diff_eq!(s.p0_cov[(1, 1)], (0.01 * s.params.omega0).powi(2), epsilon = 1e-4);
        assert_eq!(s.q_cov[(2, 2)], 1.47e-10);
        assert_eq!(s.xhat0.omega, s.params.omega0);
        assert_eq!(s.steps(), 1000);
        assert_eq!(s.times().len(), 1001);
        assert!(s.validate().is_ok());
        for j in 0..3 {
            assert_abs_diff_eq!(s.d_matrix.column(j).norm(), 1.0, epsilon = 1e-15);
        }
        assert_eq!(numerics::rank(&s.d_matrix), 3);
    }

    #[test]
    fn toml_round_trip() {
        let s = default_paper_scenario();
        assert_eq!(parse_scenario(&scenario_to_toml(&s)).unwrap(), s);
        let variant = s.clone().with_attack(false).with_seed(77);
        assert_eq!(parse_scenario(&scenario_to_toml(&variant)).unwrap(), variant);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.toml");
        save_scenario(&s, &path).unwrap();
        assert_eq!(load_scenario(&path).unwrap(), s);
    }

    #[test]
    fn zero_dt_is_rejected() {
        let text = scenario_to_toml(&default_paper_scenario()).replace("dt = 0.01", "dt = 0.0");
        match parse_scenario(&text) {
            Err(ScenarioError::Validation { field, .. }) => assert_eq!(field, "dt"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn omitted_attack_defaults_to_zero() {
        let text = scenario_to_toml(&default_paper_scenario());
        let stripped: String = {
            let mut out = Vec::new();
            let mut skipping = false;
            for line in text.lines() {
                if line.starts_with('[') {
                    skipping = line.trim() == "[attack]";
                }
                if !skipping {
                    out.push(line);
                }
            }
            out.join("\n")
        };
        assert!(!stripped.contains("[attack]"));
        assert_eq!(parse_scenario(&stripped).unwrap().attack, SignalSpec::Zero);
    }

    #[test]
    fn parse_errors_name_the_problem() {
        assert!(matches!(parse_scenario("name = 3"), Err(ScenarioError::Parse(_))));
        let bad = format!("bogus = 1.0\n{}", scenario_to_toml(&default_paper_scenario()));
        assert!(matches!(parse_scenario(&bad), Err(ScenarioError::Parse(msg)) if msg.contains("bogus")));
    }

    #[test]
    fn piecewise_and_sinusoid_signals() {
        let p = SignalSpec::Piecewise {
            segments: vec![Segment { start: 1.0, end: 2.0, value: vec![1.0, -1.0] }],
        };
        assert_eq!(p.eval(1.0, 2).as_slice(), &[0.0, 0.0]);
        assert_eq!(p.eval(1.5, 2).as_slice(), &[1.0, -1.0]);
        assert!(p.validate("x", 2).is_ok());
        let bad = SignalSpec::Piecewise { segments: vec![Segment { start: 2.0, end: 1.0, value: vec![0.0] }] };
        assert!(bad.validate("x", 1).is_err());
        let s = SignalSpec::Sinusoid {
            amplitude: vec![2.0],
            frequency: vec![1.0],
            phase: vec![],
            offset: vec![0.5],
        };
        assert_abs_diff_eq!(s.eval(PI / 2.0, 1)[0], 2.5, epsilon = 1e-15);
    }

    #[test]
    fn simulation_is_paired_and_deterministic() {
        let s = default_paper_scenario();
        let a = simulate(&s).unwrap();
        let b = simulate(&s).unwrap();
        assert_eq!(a.measurements, b.measurements);
        assert_eq!(a.states.len(), 1001);
        assert_eq!(a.states[0], s.x0.to_vector());
        let c = simulate(&s.clone().with_seed(2)).unwrap();
        assert_ne!(a.measurements, c.measurements);
    }

    #[test]
    fn noiseless_truth_without_inputs_is_the_model() {
        let mut s = default_paper_scenario().with_attack(false).with_unknown_inputs(false);
        s.q_cov = Matrix::zeros(4, 4);
        s.r_cov = Matrix::zeros(4, 4);
        let sim = simulate(&s).unwrap();
        let lin = s.linear_output();
        for (x, y) in sim.states.iter().zip(&sim.measurements) {
            assert!((lin.apply(x) - y).norm() < 1e-14);
        }
    }
}
