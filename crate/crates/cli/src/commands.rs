//! One runner per command. Each turns its `parameters` object into core
//! calls and returns JSON results plus CSV artifacts.

use std::f64::consts::PI;
use std::path::PathBuf;

use leastbias::cartan::{self, ConnectionMode, FrameSpec};
use leastbias::geometry::{self, DerivativeMode, MetricSpec, QuadratureSpec};
use leastbias::grids::{Axis, Boundary, UniformGrid};
use leastbias::probkit::{self, EnergyLevels};
use leastbias::schroedinger::{self, Potential};
use leastbias::spinor::{self, FourVector};
use leastbias::surfaces::{self, WireFrame};
use leastbias::variational::SolverConfig;
use num_rational::Rational64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::parse_at;
use crate::{suite, Artifact, CliError, Command, RunConfig};

pub const FRAME_FAMILIES: [&str; 4] = ["cartesian", "perturbed_torus", "polar", "sphere"];
pub const WIRE_FAMILIES: [&str; 5] = ["constant", "saddle", "sinh", "random", "csv"];
pub const POTENTIAL_KINDS: [&str; 4] = ["zero", "harmonic", "coulomb_radial", "tabulated"];

const PARAMS: &str = "/parameters";

#[derive(Debug, Default)]
pub struct Outcome {
    pub results: Value,
    pub artifacts: Vec<Artifact>,
    pub failures: Vec<String>,
    pub timings: Option<Value>,
}

impl Outcome {
    fn new(results: Value) -> Self {
        Self { results, ..Default::default() }
    }

    fn with(mut self, name: &str, contents: Vec<u8>) -> Self {
        self.artifacts.push(Artifact { name: name.into(), contents });
        self
    }
}

pub fn dispatch(cfg: &RunConfig) -> Result<Outcome, CliError> {
    match cfg.command {
        Command::Maxent => maxent(cfg),
        Command::Schrodinger => schrodinger(cfg),
        Command::Film => film(cfg),
        Command::Curvature => curvature(cfg),
        Command::Cartan => cartan(cfg),
        Command::SpinorCheck => spinor_check(cfg),
        Command::Suite => run_suite(cfg),
    }
}

fn csv_bytes(write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Vec<u8> {
    let mut out = Vec::new();
    write(&mut out).expect("writing to memory");
    out
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MaxentParams {
    levels: Vec<f64>,
    mean: f64,
}

fn maxent(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let p: MaxentParams = parse_at(&cfg.parameters, PARAMS)?;
    let levels = EnergyLevels::new(p.levels)?;
    let sol = probkit::solve_maxent(&levels, p.mean)?;
    let weights = sol.distribution.weights();
    let results = json!({
        "beta": sol.beta,
        "alpha": sol.alpha(),
        "log_normalizer": sol.log_normalizer,
        "multipliers": [sol.multipliers.0, sol.multipliers.1],
        "probabilities": weights,
        "entropy": probkit::entropy(&sol.distribution),
        "mean_residual": sol.mean_residual,
        "iterations": sol.iterations,
    });
    let table = csv_bytes(|out| {
        use std::io::Write;
        writeln!(out, "index,energy,probability")?;
        for (k, (e, w)) in levels.levels().iter().zip(weights).enumerate() {
            writeln!(out, "{k},{e},{w}")?;
        }
        Ok(())
    });
    Ok(Outcome::new(results).with("distribution.csv", table))
}

/// Axis of a solver grid. Dirichlet axes place `points` interior nodes in
/// the open interval; periodic axes sample `[lower, upper)`; Neumann axes
/// are cell-centred.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct AxisParams {
    lower: f64,
    upper: f64,
    points: usize,
    #[serde(default = "dirichlet")]
    boundary: Boundary,
}

fn dirichlet() -> Boundary {
    Boundary::Dirichlet
}

impl AxisParams {
    fn axis(&self) -> Axis<f64> {
        match self.boundary {
            Boundary::Dirichlet => Axis::dirichlet(self.lower, self.upper, self.points),
            Boundary::Periodic => Axis::periodic(self.lower, self.upper, self.points),
            Boundary::Neumann => Axis::neumann(self.lower, self.upper, self.points),
        }
    }
}

fn grid_from(axes: &[AxisParams]) -> Result<UniformGrid<f64>, CliError> {
    if let Some(a) = axes.iter().find(|a| !(a.lower < a.upper)) {
        return Err(leastbias::Error::Validation(format!("axis [{}, {}] is empty", a.lower, a.upper)).into());
    }
    Ok(UniformGrid::new(axes.iter().map(AxisParams::axis).collect())?)
}

fn solver_or(given: Option<SolverConfig<f64>>, tolerance: f64, max_iterations: usize, seed: u64) -> SolverConfig<f64> {
    given.unwrap_or(SolverConfig { tolerance, max_iterations, shift: None, seed })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SchrodingerParams {
    axes: Vec<AxisParams>,
    #[serde(default = "zero_potential")]
    potential: Potential<f64>,
    #[serde(default)]
    solver: Option<SolverConfig<f64>>,
    /// Gaussian trial widths for the hydrogen collapse scan.
    #[serde(default)]
    collapse_sigmas: Option<Vec<f64>>,
}

fn zero_potential() -> Potential<f64> {
    Potential::Zero
}

fn schrodinger(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let p: SchrodingerParams = parse_at(&cfg.parameters, PARAMS)?;
    let grid = grid_from(&p.axes)?;
    let solver = solver_or(p.solver, 1e-10, 500, cfg.seed);
    let res = schroedinger::ground_state(&grid, &p.potential, &solver)?;
    let mut results = json!({
        "points": grid.len(),
        "total_energy": res.total_energy,
        "kinetic": res.kinetic,
        "potential": res.potential,
        "residual": res.residual,
        "multipliers": [res.multipliers.0, res.multipliers.1],
        "iterations": res.iterations,
    });
    let mut out = Outcome::default();
    out = out.with("ground_state.csv", csv_bytes(|w| res.state.field().write_csv(w)));
    if let Some(sigmas) = &p.collapse_sigmas {
        let scan = schroedinger::collapse_scan(sigmas)?;
        results["collapse_optimum"] = serde_json::to_value(scan.optimum).expect("plain numbers");
        out = out.with("collapse.csv", csv_bytes(|w| scan.write_csv(w)));
    }
    out.results = results;
    Ok(out)
}

/// Boundary data of a soap film.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
enum WireParams {
    Constant { value: f64 },
    /// `x^2 - y^2`
    Saddle,
    /// `sin(pi u) sinh(pi v)` in coordinates rescaled to the unit square.
    Sinh,
    /// Uniform values in `[-amplitude, amplitude]`, drawn from the run seed.
    Random { amplitude: f64 },
    /// Two columns `index,value`, one row per boundary point.
    Csv { path: PathBuf },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FilmParams {
    points: usize,
    #[serde(default)]
    lower: f64,
    #[serde(default = "one")]
    upper: f64,
    frame: WireParams,
    #[serde(default)]
    solver: Option<SolverConfig<f64>>,
}

fn one() -> f64 {
    1.0
}

fn read_frame_csv(path: &PathBuf) -> Result<Vec<(usize, f64)>, CliError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::Config {
        pointer: "/parameters/frame/path".into(),
        message: e.to_string(),
    })?;
    reader
        .deserialize::<(usize, f64)>()
        .enumerate()
        .map(|(row, rec)| {
            rec.map_err(|e| CliError::Config {
                pointer: "/parameters/frame/path".into(),
                message: format!("{}: row {}: {e}", path.display(), row + 1),
            })
        })
        .collect()
}

fn film(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let p: FilmParams = parse_at(&cfg.parameters, PARAMS)?;
    if p.points < 3 || !(p.lower < p.upper) {
        return Err(leastbias::Error::Validation("film needs points >= 3 and lower < upper".into()).into());
    }
    let grid = UniformGrid::new(vec![Axis::closed(p.lower, p.upper, p.points, Boundary::Dirichlet); 2])?;
    let width = p.upper - p.lower;
    let (lo, up) = (p.lower, p.upper);
    let closed_form: Option<Box<dyn Fn(&[f64]) -> f64>> = match &p.frame {
        WireParams::Constant { value } => {
            let v = *value;
            Some(Box::new(move |_| v))
        }
        WireParams::Saddle => Some(Box::new(|x| x[0] * x[0] - x[1] * x[1])),
        WireParams::Sinh => Some(Box::new(move |x| {
            let (u, v) = ((x[0] - lo) / width, (x[1] - lo) / width);
            (PI * u).sin() * (PI * v).sinh()
        })),
        _ => None,
    };
    let frame = match (&p.frame, &closed_form) {
        (_, Some(f)) => WireFrame::from_fn(grid.clone(), f)?,
        (WireParams::Random { amplitude }, None) => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let n = surfaces::boundary_indices(&grid).len();
            let values = (0..n).map(|_| amplitude * (2.0 * rng.gen::<f64>() - 1.0)).collect();
            WireFrame::new(grid.clone(), values)?
        }
        (WireParams::Csv { path }, None) => WireFrame::from_pairs(grid.clone(), &read_frame_csv(path)?)?,
        _ => unreachable!("analytic frames have closed forms"),
    };
    let solver = solver_or(p.solver, 1e-10, 20_000, cfg.seed);
    let sol = surfaces::solve_film(&frame, &solver)?;
    let h = sol.height.values();
    let (min, max) = h.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    let error = closed_form.map(|f| (0..grid.len()).map(|i| (h[i] - f(&grid.coordinates(i))).abs()).fold(0.0, f64::max));
    let results = json!({
        "points": p.points,
        "domain": [lo, up],
        "iterations": sol.iterations,
        "boundary_residual": sol.boundary_residual,
        "interior_laplacian_norm": sol.interior_laplacian_norm,
        "dirichlet_energy": surfaces::dirichlet_energy(&sol.height),
        "height_min": min,
        "height_max": max,
        "closed_form_max_error": error,
    });
    Ok(Outcome::new(results).with("height.csv", csv_bytes(|w| sol.height.write_csv(w))))
}

fn curvature(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mut map = cfg.parameters.as_object().cloned().unwrap_or_default();
    let take = |map: &mut serde_json::Map<String, Value>, key: &str| map.remove(key).unwrap_or(Value::Null);
    let quadrature: Option<Vec<usize>> = parse_at(&take(&mut map, "quadrature"), "/parameters/quadrature")?;
    let step: Option<f64> = parse_at(&take(&mut map, "derivative_step"), "/parameters/derivative_step")?;
    let probe: Option<Vec<f64>> = parse_at(&take(&mut map, "probe"), "/parameters/probe")?;
    let spec: MetricSpec<f64> = parse_at(&Value::Object(map), PARAMS)?;
    let mode = match step {
        Some(h) => DerivativeMode::CentralDifference(h),
        None => DerivativeMode::ClosedForm,
    };
    let metric = spec.build(mode)?;
    let dim = metric.dimension();
    let nodes = quadrature.unwrap_or_else(|| if dim == 2 { vec![100, 200] } else { vec![24; dim] });
    let quad = QuadratureSpec::new(nodes.clone());
    let (samples, cell) = geometry::curvature_samples(&metric, &quad)?;
    let action = samples.iter().map(|s| s.scalar * s.volume_density).sum::<f64>() * cell;
    let volume = samples.iter().map(|s| s.volume_density).sum::<f64>() * cell;
    let (rmin, rmax) = samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), s| (a.min(s.scalar), b.max(s.scalar)));

    let x = match probe {
        Some(x) => x,
        None => metric.family().chart_domain().iter().map(|(a, b)| a + 0.37 * (b - a)).collect(),
    };
    let bundle = geometry::curvature(&metric, &x)?;
    let lap = geometry::laplacian_of_metric(&metric, &x)?;
    let results = json!({
        "family": metric.family().name(),
        "dimension": dim,
        "derivatives": match mode { DerivativeMode::ClosedForm => json!("closed_form"), DerivativeMode::CentralDifference(h) => json!({"central_difference": h}) },
        "quadrature": nodes,
        "hilbert_action": action,
        "volume": volume,
        "scalar_curvature_range": [rmin, rmax],
        "probe": {
            "point": x,
            "scalar_curvature": bundle.scalar,
            "ricci": bundle.ricci,
            "metric_laplacian": lap.laplacian,
            "metric_laplacian_minus_ricci": lap.difference_norm,
            "verbatim_rank2": lap.verbatim_rank2,
            "covariant_constancy": geometry::covariant_constancy_check(&metric, &x)?,
        },
    });
    let table = csv_bytes(|out| {
        use std::io::Write;
        let cols: Vec<String> = (0..dim).map(|k| format!("x{k}")).collect();
        writeln!(out, "{},scalar,volume_density", cols.join(","))?;
        for s in &samples {
            for c in &s.point {
                write!(out, "{c},")?;
            }
            writeln!(out, "{},{}", s.scalar, s.volume_density)?;
        }
        Ok(())
    });
    Ok(Outcome::new(results).with("curvature.csv", table))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CartanParams {
    configuration: FrameSpec<f64>,
    #[serde(default = "default_frame_grid")]
    grid: [usize; 2],
    #[serde(default)]
    mode: ConnectionMode,
    #[serde(default)]
    solver: Option<SolverConfig<f64>>,
    /// Points where the structure equations are evaluated; chart centre by default.
    #[serde(default)]
    probes: Option<Vec<[f64; 2]>>,
}

fn default_frame_grid() -> [usize; 2] {
    [16, 16]
}

fn cartan(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let p: CartanParams = parse_at(&cfg.parameters, PARAMS)?;
    let frame = p.configuration.build()?;
    let chart = *frame.chart();
    let probes = p.probes.unwrap_or_else(|| {
        vec![std::array::from_fn(|k| {
            let (a, b) = chart.domain[k];
            a + 0.37 * (b - a)
        })]
    });
    let report = cartan::torsion_curvature_report(&frame, &probes)?;
    let grid = chart.sample_grid(p.grid)?;
    let sampled = frame.sample(&grid)?;
    let solver = solver_or(p.solver, 1e-6, 500, cfg.seed);
    let res = cartan::minimize_torsion_functional(&sampled, &solver, p.mode)?;
    let results = json!({
        "structure": report,
        "initial_value": sampled.functional(),
        "value": res.value,
        "gradient_norm": res.gradient_norm,
        "iterations": res.iterations,
        "mode": res.mode,
        "torsion_norm": res.torsion_norm,
        "orthonormality_defect": res.configuration.orthonormality_defect(),
        "distance_from_constant": res.configuration.distance_from_constant(),
    });
    Ok(Outcome::new(results).with("trajectory.csv", csv_bytes(|w| res.write_trajectory_csv(w))))
}

/// An exact rational: an integer or a string such as `"3/2"`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum Exact {
    Int(i64),
    Text(String),
}

impl Exact {
    fn value(&self) -> Result<Rational64, String> {
        match self {
            Exact::Int(n) => Ok(Rational64::from_integer(*n)),
            Exact::Text(s) => s.trim().parse().map_err(|_| format!("{s:?} is not a rational number")),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpinorParams {
    #[serde(default = "default_momenta")]
    momenta: Vec<[Exact; 4]>,
}

fn default_momenta() -> Vec<[Exact; 4]> {
    vec![[Exact::Int(3), Exact::Int(1), Exact::Int(2), Exact::Int(0)]]
}

fn spinor_check(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let p: SpinorParams = parse_at(&cfg.parameters, PARAMS)?;
    let gamma = spinor::build_gamma::<Rational64>();
    let table = spinor::anticommutator_table(&gamma);
    let mut slashes = Vec::with_capacity(p.momenta.len());
    for (i, m) in p.momenta.iter().enumerate() {
        let mut k = [Rational64::from_integer(0); 4];
        for (j, c) in m.iter().enumerate() {
            k[j] = c.value().map_err(|message| CliError::Config { pointer: format!("/parameters/momenta/{i}/{j}"), message })?;
        }
        let k = FourVector::new(k);
        let s = spinor::dirac_slash(&gamma, &k);
        let squared = spinor::matmul(&s, &s);
        let square = k.square();
        slashes.push(json!({
            "momentum": k.components.iter().map(|c| c.to_string()).collect::<Vec<_>>(),
            "minkowski_square": square.to_string(),
            "slash_squared_is_square_identity": squared == spinor::matscale(square, &spinor::identity()),
        }));
    }
    let results = json!({
        "signature": spinor::SIGNATURE,
        "anticommutators": table,
        "all_match": table.iter().all(|r| r.matches),
        "slash": slashes,
    });
    Ok(Outcome::new(results))
}

fn run_suite(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let opts: suite::SuiteOptions = parse_at(&cfg.parameters, PARAMS)?;
    let report = suite::run_suite(cfg.seed, &opts);
    let failures = report.failures();
    Ok(Outcome {
        results: serde_json::to_value(&report.results).expect("suite rows serialize"),
        artifacts: vec![Artifact { name: "suite.csv".into(), contents: report.table_csv().into_bytes() }],
        failures,
        timings: Some(serde_json::to_value(&report.timings).expect("timings serialize")),
    })
}
