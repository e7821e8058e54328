//! Soap films as height functions over a rectangle: minimize the discrete
//! Dirichlet energy with the wire-frame values held fixed, and the
//! mean-value characterization of the Laplacian.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grids::{fd_laplacian, ScalarField, UniformGrid};
use crate::scalar::Real;
use crate::variational::{conjugate_gradient, CgOutcome, SolverConfig, SymmetricOperator};

/// Boundary values of a 2-D grid whose axes include both endpoints.
///
/// Boundary points are ordered by ascending flat (row-major) index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct WireFrame<T: Real> {
    grid: UniformGrid<T>,
    boundary_values: Vec<T>,
}

fn is_boundary(idx: &[usize], dims: &[usize]) -> bool {
    idx.iter().zip(dims).any(|(i, n)| *i == 0 || *i + 1 == *n)
}

impl<T: Real> WireFrame<T> {
    pub fn new(grid: UniformGrid<T>, boundary_values: Vec<T>) -> Result<Self> {
        if grid.dimension() != 2 {
            return Err(Error::validation("wire frames live on 2-D grids"));
        }
        let want = boundary_indices(&grid).len();
        if boundary_values.len() != want {
            return Err(Error::validation(format!(
                "frame needs {want} boundary values, got {}",
                boundary_values.len()
            )));
        }
        if boundary_values.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("frame values must be finite"));
        }
        Ok(Self { grid, boundary_values })
    }

    /// Samples `f` on the boundary points.
    pub fn from_fn(grid: UniformGrid<T>, f: impl Fn(&[T]) -> T) -> Result<Self> {
        let values = boundary_indices(&grid).iter().map(|i| f(&grid.coordinates(*i))).collect();
        Self::new(grid, values)
    }

    /// Builds a frame from `(boundary ordinal, value)` pairs, each ordinal
    /// given exactly once.
    pub fn from_pairs(grid: UniformGrid<T>, pairs: &[(usize, T)]) -> Result<Self> {
        let n = boundary_indices(&grid).len();
        let mut values = vec![None; n];
        for &(k, v) in pairs {
            let slot = values
                .get_mut(k)
                .ok_or_else(|| Error::validation(format!("boundary index {k} out of range 0..{n}")))?;
            if slot.replace(v).is_some() {
                return Err(Error::validation(format!("boundary index {k} given twice")));
            }
        }
        let values = values
            .into_iter()
            .enumerate()
            .map(|(k, v)| v.ok_or_else(|| Error::validation(format!("boundary index {k} missing"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &UniformGrid<T> {
        &self.grid
    }

    pub fn boundary_values(&self) -> &[T] {
        &self.boundary_values
    }
}

/// Flat indices of the boundary points, ascending.
pub fn boundary_indices<T: Real>(grid: &UniformGrid<T>) -> Vec<usize> {
    let dims: Vec<usize> = grid.axes().iter().map(|a| a.points).collect();
    (0..grid.len()).filter(|i| is_boundary(&grid.multi_index(*i), &dims)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct FilmSolution<T: Real> {
    pub height: ScalarField<T>,
    /// Largest deviation of the solved boundary from the frame.
    pub boundary_residual: T,
    /// Euclidean norm of the five-point Laplacian over interior points.
    pub interior_laplacian_norm: T,
    pub iterations: usize,
}

/// Five-point Laplacian restricted to the interior unknowns, boundary zero.
struct InteriorLaplacian {
    nx: usize,
    ny: usize,
    wx: f64,
    wy: f64,
}

impl<T: Real> SymmetricOperator<T> for InteriorLaplacian {
    fn dimension(&self) -> usize {
        self.nx * self.ny
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        let (wx, wy) = (T::lit(self.wx), T::lit(self.wy));
        for i in 0..self.nx {
            for j in 0..self.ny {
                let k = i * self.ny + j;
                let mut acc = (wx + wy) * T::two() * x[k];
                if i > 0 {
                    acc -= wx * x[k - self.ny];
                }
                if i + 1 < self.nx {
                    acc -= wx * x[k + self.ny];
                }
                if j > 0 {
                    acc -= wy * x[k - 1];
                }
                if j + 1 < self.ny {
                    acc -= wy * x[k + 1];
                }
                y[k] = acc;
            }
        }
    }
}

/// Equilibrium film for a wire frame: the interior solves the five-point
/// Laplace equation, found by conjugate gradients until the interior
/// residual norm is at most `config.tolerance`.
pub fn solve_film<T: Real>(frame: &WireFrame<T>, config: &SolverConfig<T>) -> Result<FilmSolution<T>> {
    config.validate()?;
    let grid = frame.grid();
    let (ax, ay) = (grid.axes()[0], grid.axes()[1]);
    let (nx, ny) = (ax.points - 2, ay.points - 2);
    let wx = T::one() / (ax.spacing * ax.spacing);
    let wy = T::one() / (ay.spacing * ay.spacing);

    let mut full = vec![T::zero(); grid.len()];
    for (flat, v) in boundary_indices(grid).into_iter().zip(frame.boundary_values()) {
        full[flat] = *v;
    }
    let stride = ay.points;
    let at = |i: usize, j: usize| (i + 1) * stride + (j + 1);
    // boundary neighbours move to the right-hand side
    let mut rhs = vec![T::zero(); nx * ny];
    for i in 0..nx {
        for j in 0..ny {
            let mut b = T::zero();
            if i == 0 {
                b += wx * full[at(i, j) - stride];
            }
            if i + 1 == nx {
                b += wx * full[at(i, j) + stride];
            }
            if j == 0 {
                b += wy * full[at(i, j) - 1];
            }
            if j + 1 == ny {
                b += wy * full[at(i, j) + 1];
            }
            rhs[i * ny + j] = b;
        }
    }
    let op = InteriorLaplacian { nx, ny, wx: wx.as_f64(), wy: wy.as_f64() };
    let bnorm = crate::scalar::norm(&rhs);
    let mut interior = vec![T::zero(); nx * ny];
    let mut iterations = 0;
    if bnorm > T::zero() {
        let rel = config.tolerance / bnorm;
        let mut scratch = vec![T::zero(); nx * ny];
        // restarts recompute the true residual, which the CG recurrence drifts away from
        for _ in 0..4 {
            let start = (iterations > 0).then_some(interior.as_slice());
            match conjugate_gradient(&op, T::zero(), &rhs, start, rel, config.max_iterations - iterations) {
                CgOutcome::Converged { solution, iterations: k, .. } => {
                    interior = solution;
                    iterations += k.max(1);
                }
                CgOutcome::Stalled { solution, residual } => {
                    return Err(Error::Convergence {
                        message: "conjugate gradients did not reach the film tolerance".into(),
                        iterations: config.max_iterations,
                        residual: residual.as_f64(),
                        best: solution.iter().map(|v| v.as_f64()).collect(),
                    })
                }
                CgOutcome::Indefinite => return Err(Error::validation("film system lost definiteness")),
            }
            op.apply(&interior, &mut scratch);
            let true_residual = scratch.iter().zip(&rhs).map(|(a, b)| (*a - *b) * (*a - *b)).sum::<T>().sqrt();
            if true_residual <= config.tolerance || iterations >= config.max_iterations {
                break;
            }
        }
    }
    for i in 0..nx {
        for j in 0..ny {
            full[at(i, j)] = interior[i * ny + j];
        }
    }
    let height = ScalarField::new(grid.clone(), full)?;
    let lap = fd_laplacian(&height);
    let mut lap_sq = T::zero();
    for i in 0..nx {
        for j in 0..ny {
            let v = lap.values()[at(i, j)];
            lap_sq += v * v;
        }
    }
    let interior_laplacian_norm = lap_sq.sqrt();
    if !(interior_laplacian_norm <= config.tolerance) {
        return Err(Error::Convergence {
            message: "film residual is above tolerance at working precision".into(),
            iterations,
            residual: interior_laplacian_norm.as_f64(),
            best: height.values().iter().map(|v| v.as_f64()).collect(),
        });
    }
    let boundary_residual = boundary_indices(grid)
        .into_iter()
        .zip(frame.boundary_values())
        .map(|(flat, v)| (height.values()[flat] - *v).abs())
        .fold(T::zero(), T::max);
    Ok(FilmSolution { height, boundary_residual, interior_laplacian_norm, iterations })
}

/// `sum over lattice edges of (difference / spacing)^2 * cell area`.
pub fn dirichlet_energy<T: Real>(f: &ScalarField<T>) -> T {
    let grid = f.grid();
    let strides = grid.strides();
    let area = grid.cell_volume();
    let mut e = T::zero();
    for (k, ax) in grid.axes().iter().enumerate() {
        for flat in 0..grid.len() {
            let i = (flat / strides[k]) % ax.points;
            if i + 1 < ax.points {
                let d = (f.values()[flat + strides[k]] - f.values()[flat]) / ax.spacing;
                e += d * d;
            }
        }
    }
    e * area
}

/// Ball average against the Laplacian prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MeanValueResidual<T: Real> {
    /// Average of `f` over the lattice ball minus `f(center)`.
    pub ball_average_minus_center: T,
    /// `-(radius^2 / (2 (n + 2))) * (Delta f)(center)`; `radius^2 / 8` in 2-D.
    pub laplacian_prediction: T,
    pub ball_points: usize,
}

/// Compares the unweighted average of `f` over lattice points within
/// Euclidean distance `radius` of `center` to the Laplacian at the center.
pub fn mean_value_residual<T: Real>(
    f: &ScalarField<T>,
    center: &[usize],
    radius: T,
) -> Result<MeanValueResidual<T>> {
    let grid = f.grid();
    let dim = grid.dimension();
    if center.len() != dim {
        return Err(Error::validation("center index has the wrong dimension"));
    }
    if !(radius > T::zero()) {
        return Err(Error::validation("radius must be positive"));
    }
    let reach: Vec<usize> = grid
        .axes()
        .iter()
        .map(|ax| (radius / ax.spacing).floor().to_usize().unwrap_or(usize::MAX))
        .collect();
    for ((c, r), ax) in center.iter().zip(&reach).zip(grid.axes()) {
        if *c < r.saturating_add(1) || c.saturating_add(*r).saturating_add(1) >= ax.points {
            return Err(Error::validation("ball exits the grid interior"));
        }
    }
    let r2 = radius * radius * (T::one() + T::lit(1e-12));
    let mut sum = T::zero();
    let mut count = 0usize;
    let mut offset = vec![0isize; dim];
    let lo: Vec<isize> = reach.iter().map(|r| -(*r as isize)).collect();
    offset.copy_from_slice(&lo);
    loop {
        let d2: T = offset
            .iter()
            .zip(grid.axes())
            .map(|(o, ax)| {
                let d = ax.spacing * T::from_f64(*o as f64).unwrap();
                d * d
            })
            .sum();
        if d2 <= r2 {
            let idx: Vec<usize> = center.iter().zip(&offset).map(|(c, o)| (*c as isize + o) as usize).collect();
            sum += f.values()[grid.flat_index(&idx)];
            count += 1;
        }
        // odometer over the bounding box
        let mut k = dim;
        loop {
            if k == 0 {
                let center_value = f.values()[grid.flat_index(center)];
                let lap = fd_laplacian(f).values()[grid.flat_index(center)];
                let factor = T::one() / (T::two() * T::from_count(dim + 2));
                return Ok(MeanValueResidual {
                    ball_average_minus_center: sum / T::from_count(count) - center_value,
                    laplacian_prediction: -radius * radius * factor * lap,
                    ball_points: count,
                });
            }
            k -= 1;
            if offset[k] < reach[k] as isize {
                offset[k] += 1;
                break;
            }
            offset[k] = lo[k];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grids::{Axis, Boundary};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn square(n: usize, a: f64, b: f64) -> UniformGrid<f64> {
        UniformGrid::new(vec![Axis::closed(a, b, n, Boundary::Dirichlet); 2]).unwrap()
    }

    fn tight() -> SolverConfig<f64> {
        SolverConfig { tolerance: 1e-11, max_iterations: 10_000, shift: None, seed: 0 }
    }

    #[test]
    fn constant_frame_gives_flat_film() {
        let frame = WireFrame::from_fn(square(17, 0.0, 1.0), |_| 2.5).unwrap();
        let sol = solve_film(&frame, &tight()).unwrap();
        for v in sol.height.values() {
            assert_abs_diff_eq!(*v, 2.5, epsilon = 1e-12);
        }
        assert_eq!(sol.boundary_residual, 0.0);
    }

    #[test]
    fn quadratic_frame_is_reproduced_exactly() {
        let grid = square(33, -1.0, 1.0);
        let exact = |x: &[f64]| x[0] * x[0] - x[1] * x[1];
        let frame = WireFrame::from_fn(grid.clone(), exact).unwrap();
        let sol = solve_film(&frame, &tight()).unwrap();
        for i in 0..grid.len() {
            assert_abs_diff_eq!(sol.height.values()[i], exact(&grid.coordinates(i)), epsilon = 1e-12);
        }
        assert!(sol.interior_laplacian_norm <= 1e-11);
    }

    #[test]
    fn harmonic_sinh_frame_matches_closed_form() {
        let grid = square(129, 0.0, 1.0);
        let exact = |x: &[f64]| (PI * x[0]).sin() * (PI * x[1]).sinh();
        let frame = WireFrame::from_fn(grid.clone(), exact).unwrap();
        let cfg = SolverConfig { tolerance: 1e-8, max_iterations: 10_000, shift: None, seed: 0 };
        let sol = solve_film(&frame, &cfg).unwrap();
        let err = (0..grid.len())
            .map(|i| (sol.height.values()[i] - exact(&grid.coordinates(i))).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-3, "max error {err}");
        assert!(sol.interior_laplacian_norm <= 1e-8, "{} {}", sol.interior_laplacian_norm, sol.iterations);
    }

    #[test]
    fn maximum_principle_and_energy_optimality() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let grid = square(21, 0.0, 1.0);
        let nb = boundary_indices(&grid).len();
        for _ in 0..50 {
            let values: Vec<f64> = (0..nb).map(|_| rng.gen::<f64>() * 4.0 - 2.0).collect();
            let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
            let frame = WireFrame::new(grid.clone(), values).unwrap();
            let sol = solve_film(&frame, &tight()).unwrap();
            assert!(sol.height.values().iter().all(|v| *v >= lo - 1e-12 && *v <= hi + 1e-12));

            let e0 = dirichlet_energy(&sol.height);
            let boundary = boundary_indices(&grid);
            for _ in 0..5 {
                let mut perturbed = sol.height.clone();
                for (i, v) in perturbed.values_mut().iter_mut().enumerate() {
                    if boundary.binary_search(&i).is_err() {
                        *v += (rng.gen::<f64>() - 0.5) * 0.1;
                    }
                }
                assert!(dirichlet_energy(&perturbed) >= e0 - 1e-9);
            }
        }
    }

    #[test]
    fn frame_construction_errors() {
        let grid = square(5, 0.0, 1.0);
        assert_eq!(boundary_indices(&grid).len(), 16);
        assert!(WireFrame::new(grid.clone(), vec![0.0; 15]).is_err());
        let line = UniformGrid::new(vec![Axis::closed(0.0, 1.0, 5, Boundary::Dirichlet)]).unwrap();
        assert!(WireFrame::new(line, vec![0.0; 2]).is_err());
        let pairs: Vec<(usize, f64)> = (0..16).map(|k| (k, k as f64)).collect();
        let frame = WireFrame::from_pairs(grid.clone(), &pairs).unwrap();
        assert_eq!(frame.boundary_values()[7], 7.0);
        assert!(WireFrame::from_pairs(grid.clone(), &pairs[1..]).is_err());
        let mut dup = pairs.clone();
        dup[3] = (2, 0.0);
        assert!(WireFrame::from_pairs(grid.clone(), &dup).is_err());
        assert!(WireFrame::from_pairs(grid, &[(99, 1.0)]).is_err());
    }

    #[test]
    fn non_convergence_reported() {
        let frame = WireFrame::from_fn(square(65, 0.0, 1.0), |x| x[0] * x[1] * 7.0 + x[1].sin()).unwrap();
        let cfg = SolverConfig { tolerance: 1e-12, max_iterations: 3, shift: None, seed: 0 };
        assert!(matches!(solve_film(&frame, &cfg), Err(Error::Convergence { .. })));
    }

    fn plane(n: usize) -> UniformGrid<f64> {
        UniformGrid::new(vec![Axis::closed(-1.0, 1.0, n, Boundary::Dirichlet); 2]).unwrap()
    }

    #[test]
    fn harmonic_field_has_zero_ball_excess() {
        let f = ScalarField::from_fn(plane(129), |x| x[0] * x[0] - x[1] * x[1]);
        let r = mean_value_residual(&f, &[64, 64], 8.0 / 64.0).unwrap();
        assert!(r.ball_average_minus_center.abs() < 1e-10);
        assert!(r.laplacian_prediction.abs() < 1e-10);
    }

    #[test]
    fn quadratic_ball_excess_matches_prediction() {
        let n = 129;
        let h = 2.0 / (n as f64 - 1.0);
        let f = ScalarField::from_fn(plane(n), |x| x[0] * x[0]);
        let eps = 8.0 * h;
        let r = mean_value_residual(&f, &[64, 64], eps).unwrap();
        // continuum disc average of x^2 is eps^2 / 4
        assert_abs_diff_eq!(r.laplacian_prediction, eps * eps / 4.0, epsilon = 1e-12);
        let rel = (r.ball_average_minus_center - r.laplacian_prediction).abs() / r.laplacian_prediction;
        assert!(rel < 5e-2, "relative {rel}");
        let half = mean_value_residual(&f, &[64, 64], eps / 2.0).unwrap();
        let ratio = half.ball_average_minus_center / r.ball_average_minus_center;
        assert!((0.23..=0.27).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn random_smooth_fields_agree_within_band() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let n = 257;
        let h = 2.0 / (n as f64 - 1.0);
        let eps = 8.0 * h;
        let kmax = 2.0 * PI;
        for _ in 0..30 {
            let c: Vec<f64> = (0..6).map(|_| rng.gen::<f64>() - 0.5).collect();
            let field = move |x: &[f64]| {
                c[0] * (PI * x[0]).sin()
                    + c[1] * (PI * x[1]).cos()
                    + c[2] * (2.0 * PI * x[0] + PI * x[1]).sin()
                    + c[3] * x[0] * x[1]
                    + c[4] * (PI * (x[0] - x[1])).cos()
                    + c[5] * x[0] * x[0]
            };
            let amp: f64 = (0..6).map(|_| 1.0).sum::<f64>();
            let f = ScalarField::from_fn(plane(n), field);
            let ci = rng.gen_range(40..217);
            let cj = rng.gen_range(40..217);
            let r = mean_value_residual(&f, &[ci, cj], eps).unwrap();
            let band = 0.05 * r.laplacian_prediction.abs() + eps.powi(4) / 96.0 * kmax.powi(4) * amp;
            assert!(
                (r.ball_average_minus_center - r.laplacian_prediction).abs() <= band,
                "{r:?} band {band}"
            );
        }
    }

    #[test]
    fn ball_must_fit() {
        let f = ScalarField::from_fn(plane(17), |x| x[0]);
        assert!(mean_value_residual(&f, &[2, 8], 0.5).is_err());
        assert!(mean_value_residual(&f, &[8, 8], 0.0).is_err());
        assert!(mean_value_residual(&f, &[8], 0.1).is_err());
        assert!(mean_value_residual(&f, &[8, 8], 0.25).is_ok());
    }
}
