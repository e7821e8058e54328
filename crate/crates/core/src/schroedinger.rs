//! Ground states of `Delta + V` on uniform grids under the normalization
//! `<gamma, gamma> = 1`, plus the kinetic-additivity and no-collapse
//! demonstrations.
//!
//! Units are dimensionless with `hbar^2 / 2m = 1`, so the kinetic operator is
//! the positive Laplacian itself. Hydrogen is handled through the radial
//! reduction `u = r psi` in Rydberg units, where `-u'' - 2u/r = E u`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grids::{
    fd_laplacian, inner_product, laplacian_apply, tensor_product_field, Boundary, ScalarField, UniformGrid,
};
use crate::scalar::Real;
use crate::variational::{minimize_quadratic_form, SolverConfig, SymmetricOperator, Tridiagonal};

/// External potential `V(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", tag = "kind", rename_all = "snake_case")]
pub enum Potential<T: Real> {
    Zero,
    /// `coefficient * |x|^2`
    Harmonic { coefficient: T },
    /// `-2 charge / r` with `r` the first coordinate (radial reduction).
    CoulombRadial { charge: T },
    /// Values sampled on the solver grid.
    Tabulated { samples: ScalarField<T> },
}

impl<T: Real> Potential<T> {
    /// Samples the potential on `grid`, rejecting values that are not finite
    /// (the potential must be bounded below on the grid).
    pub fn sample(&self, grid: &UniformGrid<T>) -> Result<Vec<T>> {
        let values: Vec<T> = match self {
            Potential::Zero => vec![T::zero(); grid.len()],
            Potential::Harmonic { coefficient } => (0..grid.len())
                .map(|i| {
                    let r2: T = grid.coordinates(i).iter().map(|x| *x * *x).sum();
                    *coefficient * r2
                })
                .collect(),
            Potential::CoulombRadial { charge } => (0..grid.len())
                .map(|i| -T::two() * *charge / grid.coordinates(i)[0])
                .collect(),
            Potential::Tabulated { samples } => {
                if samples.grid() != grid {
                    return Err(Error::validation("tabulated potential does not match the solver grid"));
                }
                samples.values().to_vec()
            }
        };
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(format!(
                "potential is unbounded below at grid point {i} ({:?})",
                grid.coordinates(i).iter().map(|x| x.as_f64()).collect::<Vec<_>>()
            )));
        }
        Ok(values)
    }
}

/// `Delta + V` on a grid, as a matrix-free operator.
#[derive(Debug, Clone)]
pub struct GridHamiltonian<T: Real> {
    grid: UniformGrid<T>,
    potential: Vec<T>,
    laplacian_sign: T,
}

impl<T: Real> GridHamiltonian<T> {
    pub fn new(grid: UniformGrid<T>, potential: &Potential<T>) -> Result<Self> {
        let potential = potential.sample(&grid)?;
        Ok(Self { grid, potential, laplacian_sign: T::one() })
    }

    /// Same operator with the sign of the Laplacian flipped. Only useful as a
    /// negative control for the test battery.
    pub fn with_flipped_laplacian(mut self) -> Self {
        self.laplacian_sign = -self.laplacian_sign;
        self
    }

    pub fn grid(&self) -> &UniformGrid<T> {
        &self.grid
    }

    pub fn potential(&self) -> &[T] {
        &self.potential
    }
}

impl<T: Real> SymmetricOperator<T> for GridHamiltonian<T> {
    fn dimension(&self) -> usize {
        self.grid.len()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        laplacian_apply(&self.grid, x, y);
        for ((yi, xi), v) in y.iter_mut().zip(x).zip(&self.potential) {
            *yi = self.laplacian_sign * *yi + *v * *xi;
        }
    }

    fn tridiagonal(&self) -> Option<Tridiagonal<T>> {
        if self.grid.dimension() != 1 {
            return None;
        }
        let ax = self.grid.axes()[0];
        if ax.boundary == Boundary::Periodic {
            return None;
        }
        let inv_h2 = self.laplacian_sign / (ax.spacing * ax.spacing);
        let n = ax.points;
        let mut diagonal: Vec<T> = self.potential.iter().map(|v| *v + inv_h2 * T::two()).collect();
        if ax.boundary == Boundary::Neumann {
            diagonal[0] -= inv_h2;
            diagonal[n - 1] -= inv_h2;
        }
        Some(Tridiagonal { diagonal, off: vec![-inv_h2; n - 1] })
    }

    fn spectrum_lower_bound(&self) -> Option<T> {
        if self.laplacian_sign > T::zero() {
            // the Laplacian is positive semidefinite
            self.potential.iter().copied().reduce(T::min)
        } else {
            self.tridiagonal().map(|t| t.gershgorin_lower())
        }
    }
}

/// A field with `<gamma, gamma> = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct QuantumState<T: Real> {
    field: ScalarField<T>,
    norm: T,
}

fn norm_tolerance<T: Real>() -> T {
    T::lit(1e-10).max(T::epsilon() * T::lit(256.0))
}

impl<T: Real> QuantumState<T> {
    pub fn new(field: ScalarField<T>) -> Result<Self> {
        let norm = field.norm();
        if (norm - T::one()).abs() > norm_tolerance() {
            return Err(Error::validation(format!("state norm {norm} is not 1")));
        }
        Ok(Self { field, norm })
    }

    /// Rescales an arbitrary nonzero field to unit norm.
    pub fn normalize(field: ScalarField<T>) -> Result<Self> {
        Self::new(field.normalized()?)
    }

    pub fn field(&self) -> &ScalarField<T> {
        &self.field
    }

    pub fn norm(&self) -> T {
        self.norm
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct GroundStateResult<T: Real> {
    pub state: QuantumState<T>,
    pub total_energy: T,
    /// `<gamma, Delta gamma>`
    pub kinetic: T,
    /// `sum V gamma^2 dV`
    pub potential: T,
    /// Euler-Lagrange residual of the unit-vector eigenproblem.
    pub residual: T,
    /// Potential coupling (fixed to 1) and normalization multiplier.
    pub multipliers: (T, T),
    pub iterations: usize,
}

/// Minimizes `<gamma, Delta gamma> + sum V gamma^2` over unit-norm fields.
pub fn ground_state<T: Real>(
    grid: &UniformGrid<T>,
    potential: &Potential<T>,
    config: &SolverConfig<T>,
) -> Result<GroundStateResult<T>> {
    let op = GridHamiltonian::new(grid.clone(), potential)?;
    ground_state_of(&op, config)
}

/// [`ground_state`] for a prebuilt operator.
pub fn ground_state_of<T: Real>(op: &GridHamiltonian<T>, config: &SolverConfig<T>) -> Result<GroundStateResult<T>> {
    let solved = minimize_quadratic_form(op, config)?;
    let grid = op.grid().clone();
    let scale = T::one() / grid.cell_volume().sqrt();
    let mut values: Vec<T> = solved.minimizer.iter().map(|v| *v * scale).collect();
    // fix the overall sign so the largest component is positive
    let peak = values.iter().copied().fold(T::zero(), |m, v| if v.abs() > m.abs() { v } else { m });
    if peak < T::zero() {
        values.iter_mut().for_each(|v| *v = -*v);
    }
    let field = ScalarField::new(grid, values)?;
    let state = QuantumState::normalize(field)?;
    let mut lap = fd_laplacian(state.field());
    if op.laplacian_sign < T::zero() {
        lap.values_mut().iter_mut().for_each(|v| *v = -*v);
    }
    let kinetic = inner_product(state.field(), &lap)?;
    let dv = state.field().grid().cell_volume();
    let potential: T = state
        .field()
        .values()
        .iter()
        .zip(op.potential())
        .map(|(g, v)| *v * *g * *g)
        .sum::<T>()
        * dv;
    Ok(GroundStateResult {
        total_energy: kinetic + potential,
        kinetic,
        potential,
        residual: solved.residual,
        multipliers: (T::one(), solved.value),
        iterations: solved.iterations,
        state,
    })
}

/// `<gamma, Delta gamma>`; nonnegative up to rounding.
pub fn kinetic_energy<T: Real>(state: &QuantumState<T>) -> Result<T> {
    let field = state.field();
    if (field.norm() - T::one()).abs() > norm_tolerance() {
        return Err(Error::validation("state is not normalized"));
    }
    inner_product(field, &fd_laplacian(field))
}

/// Kinetic energy of a product state against the sum of the factors'.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct AdditivityCheck<T: Real> {
    pub lhs: T,
    pub rhs: T,
    pub residual: T,
}

pub fn kinetic_additivity_check<T: Real>(f: &QuantumState<T>, g: &QuantumState<T>) -> Result<AdditivityCheck<T>> {
    let product = QuantumState::new(tensor_product_field(f.field(), g.field())?)?;
    let lhs = kinetic_energy(&product)?;
    let rhs = kinetic_energy(f)? + kinetic_energy(g)?;
    Ok(AdditivityCheck { lhs, rhs, residual: (lhs - rhs).abs() })
}

/// Energies of a normalized 3-D Gaussian trial of width `sigma` in the
/// Coulomb potential `-2/r` (Rydberg units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct CollapseRow<T: Real> {
    pub sigma: T,
    pub kinetic: T,
    pub potential: T,
    pub total: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct CollapseScan<T: Real> {
    pub rows: Vec<CollapseRow<T>>,
    /// Energy-minimizing width found by golden-section search.
    pub optimum: CollapseRow<T>,
}

impl<T: Real> CollapseScan<T> {
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "sigma,kinetic,potential,total")?;
        for r in &self.rows {
            writeln!(out, "{},{},{},{}", r.sigma, r.kinetic, r.potential, r.total)?;
        }
        Ok(())
    }
}

const RADIAL_PANELS: usize = 4000;
const RADIAL_EXTENT: f64 = 14.0;

/// Radial integrals of the trial `gamma(r) = exp(-r^2 / (2 sigma^2))` by
/// composite Simpson on `[0, 14 sigma]`, normalized by the computed norm.
fn gaussian_trial_energies<T: Real>(sigma: T) -> CollapseRow<T> {
    let m = RADIAL_PANELS;
    let h = T::lit(RADIAL_EXTENT) * sigma / T::from_count(m);
    let (mut mass, mut grad2, mut inv_r) = (T::zero(), T::zero(), T::zero());
    for i in 0..=m {
        let r = h * T::from_count(i);
        let w = if i == 0 || i == m {
            T::one()
        } else if i % 2 == 1 {
            T::lit(4.0)
        } else {
            T::two()
        };
        let s = r / sigma;
        let gamma = (-(s * s) * T::half()).exp();
        let dgamma = -r / (sigma * sigma) * gamma;
        // integrands already carry the r^2 of the volume element
        mass += w * gamma * gamma * r * r;
        grad2 += w * dgamma * dgamma * r * r;
        inv_r += w * gamma * gamma * r;
    }
    // common factor 4 pi h / 3 cancels in the ratios
    let kinetic = grad2 / mass;
    let potential = -T::two() * inv_r / mass;
    CollapseRow { sigma, kinetic, potential, total: kinetic + potential }
}

/// Scans Gaussian trial widths and locates the energy minimum.
///
/// The kinetic term grows like `1/sigma^2` while the Coulomb term falls like
/// `-1/sigma`, so the total has an interior minimum instead of collapsing.
pub fn collapse_scan<T: Real>(sigmas: &[T]) -> Result<CollapseScan<T>> {
    if let Some(s) = sigmas.iter().find(|s| !(**s > T::zero()) || !s.is_finite()) {
        return Err(Error::validation(format!("trial width must be positive, got {s}")));
    }
    let rows = sigmas.iter().map(|s| gaussian_trial_energies(*s)).collect();
    let energy = |s: T| gaussian_trial_energies(s).total;
    // golden-section search on a bracket wide enough for any unit charge
    let (mut a, mut b) = (T::lit(0.05), T::lit(20.0));
    let inv_phi = T::lit((5f64.sqrt() - 1.0) / 2.0);
    let mut c = b - (b - a) * inv_phi;
    let mut d = a + (b - a) * inv_phi;
    let (mut fc, mut fd) = (energy(c), energy(d));
    for _ in 0..200 {
        if (b - a).abs() <= T::lit(1e-10).max(T::epsilon() * T::lit(16.0)) * (a.abs() + b.abs()) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * inv_phi;
            fc = energy(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * inv_phi;
            fd = energy(d);
        }
    }
    let optimum = gaussian_trial_energies((a + b) * T::half());
    Ok(CollapseScan { rows, optimum })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grids::Axis;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn line(axis: Axis<f64>) -> UniformGrid<f64> {
        UniformGrid::new(vec![axis]).unwrap()
    }

    fn cfg() -> SolverConfig<f64> {
        SolverConfig { tolerance: 1e-10, max_iterations: 500, shift: None, seed: 1 }
    }

    /// Dense-eigensolver oracle at two coarse resolutions, extrapolated in h^2.
    fn dense_richardson(a: f64, b: f64, coarse: usize, v: impl Fn(f64) -> f64) -> f64 {
        let lowest = |n: usize| {
            let h = (b - a) / (n as f64 + 1.0);
            let m = nalgebra::DMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
                0 => 2.0 / (h * h) + v(a + (i as f64 + 1.0) * h),
                1 => -1.0 / (h * h),
                _ => 0.0,
            });
            (m.symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min), h)
        };
        let (l1, h1) = lowest(coarse);
        let (l2, h2) = lowest(2 * coarse + 1);
        (l2 * h1 * h1 - l1 * h2 * h2) / (h1 * h1 - h2 * h2)
    }

    #[test]
    fn box_ground_state() {
        let grid = line(Axis::dirichlet(0.0, 1.0, 2000));
        let res = ground_state(&grid, &Potential::Zero, &cfg()).unwrap();
        assert!(((res.total_energy - PI * PI) / (PI * PI)).abs() < 5e-6);
        assert_abs_diff_eq!(res.total_energy, res.kinetic + res.potential, epsilon = 1e-10);
        assert_abs_diff_eq!(res.state.field().norm(), 1.0, epsilon = 1e-10);
        assert_eq!(res.multipliers.0, 1.0);
        let oracle = dense_richardson(0.0, 1.0, 200, |_| 0.0);
        assert!((oracle - PI * PI).abs() < 1e-6);
    }

    #[test]
    fn harmonic_ground_state() {
        let grid = line(Axis::dirichlet(-10.0, 10.0, 4000));
        let v = Potential::Harmonic { coefficient: 1.0 };
        let res = ground_state(&grid, &v, &cfg()).unwrap();
        let oracle = dense_richardson(-10.0, 10.0, 300, |x| x * x);
        assert!((oracle - 1.0).abs() < 1e-4, "oracle {oracle}");
        assert!((res.total_energy - 1.0).abs() < 1e-4, "{}", res.total_energy);
        assert!((res.total_energy - oracle).abs() < 1e-4);
        // ground state is the Gaussian exp(-x^2/2)
        let peak = res.state.field().values()[2000];
        assert_abs_diff_eq!(peak, PI.powf(-0.25), epsilon = 1e-4);
    }

    #[test]
    fn radial_hydrogen_ground_state() {
        let grid = line(Axis::dirichlet(0.0, 40.0, 8000));
        let v = Potential::CoulombRadial { charge: 1.0 };
        let res = ground_state(&grid, &v, &cfg()).unwrap();
        assert!((res.total_energy + 1.0).abs() < 1e-3, "{}", res.total_energy);
        // closed-form eigenfunction u = 2 r e^{-r}
        let want = ScalarField::from_fn(grid.clone(), |r| 2.0 * r[0] * (-r[0]).exp());
        let overlap = inner_product(res.state.field(), &want).unwrap();
        assert!((overlap - 1.0).abs() < 1e-4, "overlap {overlap}");
    }

    #[test]
    fn unbounded_potential_detected() {
        // a radial grid that includes r = 0
        let grid = line(Axis::closed(0.0, 1.0, 11, Boundary::Dirichlet));
        let err = ground_state(&grid, &Potential::CoulombRadial { charge: 1.0 }, &cfg()).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        let other = line(Axis::dirichlet(0.0, 1.0, 5));
        let tab = Potential::Tabulated { samples: ScalarField::constant(other, 1.0) };
        assert!(ground_state(&grid, &tab, &cfg()).is_err());
    }

    #[test]
    fn tabulated_matches_analytic() {
        let grid = line(Axis::dirichlet(-5.0, 5.0, 400));
        let samples = ScalarField::from_fn(grid.clone(), |x| x[0] * x[0]);
        let a = ground_state(&grid, &Potential::Tabulated { samples }, &cfg()).unwrap();
        let b = ground_state(&grid, &Potential::Harmonic { coefficient: 1.0 }, &cfg()).unwrap();
        assert_eq!(a.total_energy, b.total_energy);
    }

    #[test]
    fn two_dimensional_harmonic_uses_krylov_path() {
        let ax = Axis::dirichlet(-6.0, 6.0, 48);
        let grid = UniformGrid::new(vec![ax, ax]).unwrap();
        let res = ground_state(&grid, &Potential::Harmonic { coefficient: 1.0 }, &cfg()).unwrap();
        // separable: twice the 1-D discrete value
        let one_d = ground_state(&line(ax), &Potential::Harmonic { coefficient: 1.0 }, &cfg()).unwrap();
        assert_abs_diff_eq!(res.total_energy, 2.0 * one_d.total_energy, epsilon = 1e-7);
        assert!((res.total_energy - 2.0).abs() < 2e-2);
    }

    #[test]
    fn box_error_is_second_order() {
        let err = |n: usize| {
            let grid = line(Axis::dirichlet(0.0, 1.0, n));
            ground_state(&grid, &Potential::Zero, &cfg()).unwrap().total_energy - PI * PI
        };
        let (e1, e2, e3) = (err(49), err(99), err(199));
        for ratio in [e1 / e2, e2 / e3] {
            assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn ground_energy_bounds_random_trials() {
        let grid = line(Axis::dirichlet(0.0, 1.0, 300));
        let v = Potential::Harmonic { coefficient: 50.0 };
        let op = GridHamiltonian::new(grid.clone(), &v).unwrap();
        let res = ground_state_of(&op, &cfg()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut hx = vec![0.0; grid.len()];
        for _ in 0..50 {
            let c: Vec<f64> = (0..6).map(|_| rng.gen::<f64>() - 0.5).collect();
            let trial = ScalarField::from_fn(grid.clone(), |x| {
                c.iter().enumerate().map(|(k, ck)| ck * ((k + 1) as f64 * PI * x[0]).sin()).sum()
            })
            .normalized()
            .unwrap();
            op.apply(trial.values(), &mut hx);
            let energy = crate::scalar::dot(trial.values(), &hx) * grid.cell_volume();
            assert!(res.total_energy <= energy + 1e-9);
        }
    }

    #[test]
    fn kinetic_energy_examples() {
        let periodic = line(Axis::periodic(0.0, 1.0, 32));
        let c = QuantumState::normalize(ScalarField::constant(periodic, 1.0)).unwrap();
        assert_abs_diff_eq!(kinetic_energy(&c).unwrap(), 0.0, epsilon = 1e-12);

        let n = 400;
        let grid = line(Axis::dirichlet(0.0, 1.0, n));
        let s = QuantumState::normalize(ScalarField::from_fn(grid, |x| (PI * x[0]).sin())).unwrap();
        // stencil oracle: sin(pi x) is a discrete eigenvector with eigenvalue 4/h^2 sin^2(pi h/2)
        let h = 1.0 / (n as f64 + 1.0);
        let discrete = 4.0 / (h * h) * (PI * h / 2.0).sin().powi(2);
        assert_abs_diff_eq!(kinetic_energy(&s).unwrap(), discrete, epsilon = 1e-8);
        assert!((discrete - PI * PI).abs() < 1e-4);

        let sigma = 0.7;
        let wide = line(Axis::dirichlet(-12.0, 12.0, 4000));
        let g = QuantumState::normalize(ScalarField::from_fn(wide, |x| (-x[0] * x[0] / (2.0 * sigma * sigma)).exp()))
            .unwrap();
        assert_abs_diff_eq!(kinetic_energy(&g).unwrap(), 1.0 / (2.0 * sigma * sigma), epsilon = 1e-4);

        let raw = ScalarField::constant(line(Axis::periodic(0.0, 1.0, 8)), 2.0);
        assert!(QuantumState::new(raw).is_err());
    }

    #[test]
    fn kinetic_additivity_examples() {
        let p1 = line(Axis::periodic(0.0, 1.0, 16));
        let p2 = line(Axis::periodic(0.0, 2.0, 12));
        let one = |g: UniformGrid<f64>| QuantumState::normalize(ScalarField::constant(g, 1.0)).unwrap();
        let r = kinetic_additivity_check(&one(p1.clone()), &one(p2.clone())).unwrap();
        assert_abs_diff_eq!(r.lhs, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.rhs, 0.0, epsilon = 1e-12);

        let s = QuantumState::normalize(ScalarField::from_fn(p1, |x| (2.0 * PI * x[0]).sin())).unwrap();
        let r = kinetic_additivity_check(&s, &one(p2.clone())).unwrap();
        assert_abs_diff_eq!(r.lhs, kinetic_energy(&s).unwrap(), epsilon = 1e-10);

        let plane = UniformGrid::new(vec![Axis::periodic(0.0, 1.0, 5); 2]).unwrap();
        let flat = one(plane.clone());
        let volume = UniformGrid::new(vec![Axis::periodic(0.0, 1.0, 4); 3]).unwrap();
        assert!(kinetic_additivity_check(&flat, &one(volume)).is_err());
        assert!(kinetic_additivity_check(&flat, &flat).is_err());
    }

    #[test]
    fn collapse_scan_matches_closed_form() {
        // closed form: T = 3/(2 s^2), V = -4/(sqrt(pi) s), minimum -8/(3 pi) at s = 3 sqrt(pi)/4
        let sigmas: Vec<f64> = (1..=40).map(|i| 0.05 * i as f64).collect();
        let scan = collapse_scan(&sigmas).unwrap();
        for row in &scan.rows {
            assert!((row.kinetic * row.sigma * row.sigma / 1.5 - 1.0).abs() < 1e-6);
            let v = -4.0 / (PI.sqrt() * row.sigma);
            assert!((row.potential / v - 1.0).abs() < 1e-6);
        }
        assert!((scan.optimum.total + 8.0 / (3.0 * PI)).abs() < 1e-3);
        assert!((scan.optimum.sigma - 0.75 * PI.sqrt()).abs() < 1e-4);
        assert!(scan.rows[0].total > scan.optimum.total);
        assert!(scan.rows[0].total > 0.0);
        assert!(collapse_scan(&[1.0, 0.0]).is_err());
        let mut csv = Vec::new();
        scan.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 41);
    }

    #[test]
    fn flipped_laplacian_breaks_box_energy() {
        let grid = line(Axis::dirichlet(0.0, 1.0, 200));
        let op = GridHamiltonian::new(grid, &Potential::Zero).unwrap().with_flipped_laplacian();
        let res = ground_state_of(&op, &cfg()).unwrap();
        assert!(res.total_energy < 0.0);
    }
}
