//! Scenario files, shipped benchmarks and safety certificates.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{io_err, json_err, Error, Result};
use crate::geom::{Hyperrectangle, Region, TimedSetSequence};
use crate::linear::{hybreach, BpConfig, BpStats, Mode, PartitionSpec};
use crate::matrix::Matrix;
use crate::nn::{load_network, FeedforwardNetwork};
use crate::nonlinear::{nl_backreach, NlBpConfig, NlStats};
use crate::overt::Expr;
use crate::policy::{build_policy, AngleRange, PolicySpec};
use crate::system::{LinearSystem, NonlinearModel, Plant};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SystemSpec {
    Linear(LinearSystem),
    Nonlinear(NonlinearModel),
}

impl SystemSpec {
    pub fn plant(&self) -> Plant {
        match self {
            SystemSpec::Linear(s) => Plant::Linear(s.clone()),
            SystemSpec::Nonlinear(m) => Plant::Nonlinear(m.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicySource {
    /// Constructed from a policy spec.
    Build(PolicySpec),
    /// Network JSON file, relative to the scenario file.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "pipeline", rename_all = "snake_case")]
pub enum RunConfig {
    Linear(BpConfig),
    Nonlinear(NlBpConfig),
}

impl RunConfig {
    pub fn tau(&self) -> usize {
        match self {
            RunConfig::Linear(c) => c.tau,
            RunConfig::Nonlinear(c) => c.tau,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    pub system: SystemSpec,
    pub policy: PolicySource,
    #[serde(rename = "X_T")]
    pub target: Hyperrectangle,
    #[serde(rename = "X_0")]
    pub initial: Hyperrectangle,
    pub config: RunConfig,
    #[serde(default)]
    pub seed: u64,
    /// Directory that relative policy paths resolve against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let plant = self.system.plant();
        let x = plant.state_space();
        for (name, b) in [("X_T", &self.target), ("X_0", &self.initial)] {
            if b.dim() != plant.n_x() {
                return Err(Error::DimensionMismatch {
                    expected: plant.n_x(),
                    found: b.dim(),
                });
            }
            if !b.subset_of(x, 0.0)? {
                return Err(Error::Config(format!("{name} must lie inside the state space")));
            }
        }
        match (&self.system, &self.config) {
            (SystemSpec::Linear(s), RunConfig::Linear(c)) => c.validate(s.n_x()),
            (SystemSpec::Nonlinear(_), RunConfig::Nonlinear(c)) => c.validate(),
            _ => Err(Error::Config("config pipeline does not match the system kind".into())),
        }
    }

    pub fn from_json_str(s: &str) -> Result<Scenario> {
        let sc: Scenario = serde_json::from_str(s).map_err(|e| {
            Error::Config(format!("scenario line {} column {}: {e}", e.line(), e.column()))
        })?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let mut sc = Scenario::from_json_str(&text)?;
        sc.base_dir = path.parent().map(Path::to_path_buf);
        Ok(sc)
    }

    pub fn to_json_string(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| json_err("scenario", e))
    }

    pub fn policy(&self) -> Result<FeedforwardNetwork> {
        match &self.policy {
            PolicySource::Build(spec) => build_policy(spec),
            PolicySource::File(p) => {
                let path = match &self.base_dir {
                    Some(d) if p.is_relative() => d.join(p),
                    _ => p.clone(),
                };
                load_network(&path)
            }
        }
    }

    /// Replaces the seed everywhere it is used.
    pub fn with_seed(mut self, seed: u64) -> Scenario {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    CertifiedSafe,
    PossibleCollision,
    Inconclusive,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::CertifiedSafe => 0,
            Verdict::PossibleCollision => 2,
            Verdict::Inconclusive => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum RunStats {
    Linear(BpStats),
    Nonlinear(NlStats),
}

#[derive(Debug, Clone, Serialize)]
pub struct Certificate {
    pub scenario: String,
    pub verdict: Verdict,
    /// Steps covered by the verdict.
    pub horizon: usize,
    pub invariance: bool,
    /// Timesteps whose set meets `X_0`.
    pub intersecting: Vec<i32>,
    /// Timesteps meeting `X_0` through a set with bound-only faces.
    pub loose_intersecting: Vec<i32>,
    pub diagnostics: Vec<String>,
    #[serde(serialize_with = "ser_sets")]
    pub sets: Option<TimedSetSequence>,
    pub stats: Option<RunStats>,
    pub wall_ms: u128,
}

fn ser_sets<S: serde::Serializer>(v: &Option<TimedSetSequence>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(seq) => seq.to_json().serialize(s),
        None => s.serialize_none(),
    }
}

/// Runs the pipeline matching the scenario.
pub fn run_pipeline(sc: &Scenario, net: &FeedforwardNetwork) -> Result<(TimedSetSequence, RunStats)> {
    match (&sc.system, &sc.config) {
        (SystemSpec::Linear(sys), RunConfig::Linear(cfg)) => {
            let cfg = BpConfig {
                seed: sc.seed,
                ..cfg.clone()
            };
            let run = hybreach(sys, net, &sc.target, &cfg)?;
            Ok((run.sets, RunStats::Linear(run.stats)))
        }
        (SystemSpec::Nonlinear(model), RunConfig::Nonlinear(cfg)) => {
            let run = nl_backreach(model, net, &sc.target, cfg)?;
            Ok((run.sets, RunStats::Nonlinear(run.stats)))
        }
        _ => Err(Error::Config("config pipeline does not match the system kind".into())),
    }
}

/// Verdict from computed sets: any set meeting `X_0` is a possible
/// collision, unless only sets with bound-only faces meet it.
pub fn judge(seq: &TimedSetSequence, initial: &Hyperrectangle) -> (Verdict, Vec<i32>, Vec<i32>) {
    let mut hits = Vec::new();
    let mut loose = Vec::new();
    for t in (-(seq.tau as i32)..0).rev() {
        let Some(Region::Box(set)) = seq.get(t) else { continue };
        if set.intersects(initial).unwrap_or(true) {
            if seq.bound_only.get(&t).is_some_and(|f| f.iter().any(|&b| b)) {
                loose.push(t);
            } else {
                hits.push(t);
            }
        }
    }
    let verdict = if !hits.is_empty() {
        Verdict::PossibleCollision
    } else if !loose.is_empty() {
        Verdict::Inconclusive
    } else {
        Verdict::CertifiedSafe
    };
    (verdict, hits, loose)
}

/// Checks whether `X_0` can reach `X_T` within the horizon. Pipeline
/// failures come back as an inconclusive certificate.
pub fn certify(sc: &Scenario) -> Certificate {
    let start = Instant::now();
    let tau = sc.config.tau();
    let failed = |msg: String, start: Instant| Certificate {
        scenario: sc.name.clone(),
        verdict: Verdict::Inconclusive,
        horizon: tau,
        invariance: false,
        intersecting: Vec::new(),
        loose_intersecting: Vec::new(),
        diagnostics: vec![msg],
        sets: None,
        stats: None,
        wall_ms: start.elapsed().as_millis(),
    };
    let net = match sc.policy() {
        Ok(n) => n,
        Err(e) => return failed(format!("policy: {e}"), start),
    };
    let (seq, stats) = match run_pipeline(sc, &net) {
        Ok(r) => r,
        Err(e) => return failed(format!("pipeline: {e}"), start),
    };
    let (verdict, hits, loose) = judge(&seq, &sc.initial);
    let mut diagnostics = Vec::new();
    if !loose.is_empty() {
        diagnostics.push(format!("sets at {loose:?} meet X_0 only through bound-only faces"));
    }
    if seq.invariant {
        diagnostics.push("P_-1 lies inside X_T, so X_T is backward invariant".into());
    }
    Certificate {
        scenario: sc.name.clone(),
        verdict,
        horizon: tau,
        invariance: seq.invariant,
        intersecting: hits,
        loose_intersecting: loose,
        diagnostics,
        sets: Some(seq),
        stats: Some(stats),
        wall_ms: start.elapsed().as_millis(),
    }
}

pub const BENCHMARKS: [&str; 6] = [
    "double_integrator",
    "ground_robot_linear",
    "ground_robot_linear_faulty",
    "ground_robot_nonlinear",
    "ground_robot_nonlinear_pi",
    "quadrotor_6d",
];

fn bx(lo: &[f64], hi: &[f64]) -> Hyperrectangle {
    Hyperrectangle::new(lo.to_vec(), hi.to_vec()).expect("benchmark boxes are valid")
}

fn ball(c: &[f64], r: &[f64]) -> Hyperrectangle {
    Hyperrectangle::from_center_radius(c, r).expect("benchmark boxes are valid")
}

pub fn double_integrator() -> LinearSystem {
    LinearSystem::new(
        Matrix::from_rows(vec![vec![1.0, 1.0], vec![0.0, 1.0]]).expect("2x2"),
        Matrix::from_rows(vec![vec![0.5], vec![1.0]]).expect("2x1"),
        vec![0.0, 0.0],
        bx(&[-1.0], &[1.0]),
        bx(&[-10.0, -10.0], &[10.0, 10.0]),
    )
    .expect("valid system")
}

pub fn ground_robot_linear() -> LinearSystem {
    LinearSystem::new(
        Matrix::identity(2),
        Matrix::identity(2),
        vec![0.0, 0.0],
        bx(&[-1.0, -1.0], &[1.0, 1.0]),
        bx(&[-10.0, -10.0], &[10.0, 10.0]),
    )
    .expect("valid system")
}

pub fn ground_robot_nonlinear(angle: AngleRange, v_max: f64) -> NonlinearModel {
    let (lo, hi) = angle.bounds();
    NonlinearModel::new(
        "ground_robot_nonlinear",
        vec![
            Expr::add(vec![Expr::x(0), Expr::mul(Expr::u(0), Expr::cos(Expr::u(1)))]),
            Expr::add(vec![Expr::x(1), Expr::mul(Expr::u(0), Expr::sin(Expr::u(1)))]),
        ],
        bx(&[-6.0, -6.0], &[6.0, 6.0]),
        bx(&[0.0, lo], &[v_max, hi]),
    )
    .expect("valid model")
}

pub fn quadrotor() -> LinearSystem {
    let mut a = Matrix::identity(6);
    let mut b = Matrix::zeros(6, 3);
    for k in 0..3 {
        a[(k, k + 3)] = 1.0;
        b[(k, k)] = 0.5;
        b[(k + 3, k)] = 1.0;
    }
    LinearSystem::new(
        a,
        b,
        vec![0.0; 6],
        bx(&[-4.0; 3], &[4.0; 3]),
        bx(&[-10.0, -10.0, -7.5, -1.0, -1.0, -1.0], &[10.0, 10.0, 12.5, 1.0, 1.0, 1.0]),
    )
    .expect("valid system")
}

fn robot_policy(faulty: bool) -> PolicySpec {
    PolicySpec::GroundRobot {
        resolution: 1.0,
        half_width: 10.0,
        faulty,
        faulty_band: 1.0,
        exp_offset: -2.0,
    }
}

fn linear_cfg(tau: usize, partition: PartitionSpec, mode: Mode) -> RunConfig {
    RunConfig::Linear(BpConfig::new(tau, partition, mode))
}

/// Shipped scenario by name.
pub fn build_benchmark(name: &str) -> Result<Scenario> {
    let scenario = |system, policy, target, initial, config| Scenario {
        schema_version: SCHEMA_VERSION,
        name: name.to_string(),
        system,
        policy: PolicySource::Build(policy),
        target,
        initial,
        config,
        seed: 0,
        base_dir: None,
    };
    let robot_target = ball(&[0.0, 0.0], &[1.0, 1.0]);
    let sc = match name {
        "double_integrator" => scenario(
            SystemSpec::Linear(double_integrator()),
            PolicySpec::DoubleIntegrator {
                gain: vec![0.4, 1.0],
                u_max: 1.0,
            },
            bx(&[4.5, -0.25], &[5.0, 0.25]),
            ball(&[0.0, 0.0], &[0.5, 0.5]),
            linear_cfg(
                5,
                PartitionSpec::Guided {
                    r: 16,
                    v_m: 1e-4,
                    samples: 10_000,
                },
                Mode::Symbolic,
            ),
        ),
        "ground_robot_linear" | "ground_robot_linear_faulty" => {
            let faulty = name.ends_with("faulty");
            scenario(
                SystemSpec::Linear(ground_robot_linear()),
                robot_policy(faulty),
                robot_target,
                ball(&[-5.0, if faulty { 1.0 } else { 0.0 }], &[0.5, 0.5]),
                linear_cfg(
                    9,
                    PartitionSpec::Guided {
                        r: 64,
                        v_m: 1e-4,
                        samples: 10_000,
                    },
                    Mode::Symbolic,
                ),
            )
        }
        "ground_robot_nonlinear" | "ground_robot_nonlinear_pi" => {
            let angle = if name.ends_with("_pi") {
                AngleRange::MinusPiPi
            } else {
                AngleRange::ZeroTwoPi
            };
            let v_max = 1.5;
            scenario(
                SystemSpec::Nonlinear(ground_robot_nonlinear(angle, v_max)),
                PolicySpec::GroundRobotNonlinear {
                    resolution: 3.0,
                    half_width: 6.0,
                    angle,
                    v_max,
                    exp_offset: -2.0,
                },
                robot_target,
                ball(&[-5.0, 0.0], &[0.5, 0.5]),
                RunConfig::Nonlinear(NlBpConfig {
                    symbolic_period: 3,
                    ..NlBpConfig::new(3, 0.1)
                }),
            )
        }
        "quadrotor_6d" => scenario(
            SystemSpec::Linear(quadrotor()),
            PolicySpec::Quadrotor {
                center: [0.0, 0.0, 2.5],
                sign_ramp: 0.05,
                gate_band: 0.25,
                dodge_resolution: 0.25,
                dodge_half_width: 10.0,
            },
            ball(&[0.0, 0.0, 2.5, 0.0, 0.0, 0.0], &[1.0; 6]),
            ball(&[-5.0, 0.0, 2.5, 0.97, 0.0, 0.0], &[0.25, 0.25, 0.25, 0.02, 0.01, 0.01]),
            linear_cfg(
                6,
                PartitionSpec::Guided {
                    r: 64,
                    v_m: 1e-6,
                    samples: 10_000,
                },
                Mode::Symbolic,
            ),
        ),
        other => return Err(Error::UnknownBenchmark(other.to_string())),
    };
    sc.validate()?;
    Ok(sc)
}
