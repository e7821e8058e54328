use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Treatment of the lattice beyond the first and last point of an axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Values outside the axis are zero.
    Dirichlet,
    /// The axis wraps around.
    Periodic,
    /// Ghost values mirror the boundary value (zero normal derivative).
    Neumann,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Axis<T: Real> {
    pub points: usize,
    pub spacing: T,
    pub origin: T,
    pub boundary: Boundary,
}

impl<T: Real> Axis<T> {
    /// `n` interior points of the open interval `(a, b)`; the endpoints carry
    /// the implicit zero values.
    pub fn dirichlet(a: T, b: T, n: usize) -> Self {
        let h = (b - a) / T::from_count(n + 1);
        Self { points: n, spacing: h, origin: a + h, boundary: Boundary::Dirichlet }
    }

    /// `n` points of the circle `[a, b)`.
    pub fn periodic(a: T, b: T, n: usize) -> Self {
        let h = (b - a) / T::from_count(n);
        Self { points: n, spacing: h, origin: a, boundary: Boundary::Periodic }
    }

    /// `n` cell-centred points of `[a, b]` with mirrored ghosts.
    pub fn neumann(a: T, b: T, n: usize) -> Self {
        let h = (b - a) / T::from_count(n);
        Self { points: n, spacing: h, origin: a + h * T::half(), boundary: Boundary::Neumann }
    }

    /// `n` points including both endpoints of `[a, b]`.
    pub fn closed(a: T, b: T, n: usize, boundary: Boundary) -> Self {
        let h = (b - a) / T::from_count(n.max(2) - 1);
        Self { points: n, spacing: h, origin: a, boundary }
    }

    pub fn coordinate(&self, i: usize) -> T {
        self.origin + self.spacing * T::from_count(i)
    }
}

/// Uniform tensor-product lattice in one to three dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct UniformGrid<T: Real> {
    axes: Vec<Axis<T>>,
}

impl<T: Real> UniformGrid<T> {
    pub fn new(axes: Vec<Axis<T>>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 3 {
            return Err(Error::validation(format!("grid dimension {} not in 1..=3", axes.len())));
        }
        for (k, ax) in axes.iter().enumerate() {
            if ax.points < 3 {
                return Err(Error::validation(format!("axis {k} has {} points; need >= 3", ax.points)));
            }
            if !(ax.spacing > T::zero()) || !ax.spacing.is_finite() || !ax.origin.is_finite() {
                return Err(Error::validation(format!("axis {k} has invalid spacing or origin")));
            }
        }
        Ok(Self { axes })
    }

    pub fn axes(&self) -> &[Axis<T>] {
        &self.axes
    }

    pub fn dimension(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.points).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> T {
        self.axes.iter().fold(T::one(), |v, a| v * a.spacing)
    }

    /// Row-major strides: the first axis is outermost.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.axes.len()];
        for k in (0..self.axes.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.axes[k + 1].points;
        }
        strides
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.axes.len()];
        for k in (0..self.axes.len()).rev() {
            idx[k] = flat % self.axes[k].points;
            flat /= self.axes[k].points;
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.axes)
            .fold(0, |acc, (i, ax)| acc * ax.points + i)
    }

    pub fn coordinates(&self, flat: usize) -> Vec<T> {
        self.multi_index(flat)
            .iter()
            .zip(&self.axes)
            .map(|(i, ax)| ax.coordinate(*i))
            .collect()
    }

    /// Axes of `self` followed by the axes of `other`.
    pub fn product(&self, other: &Self) -> Result<Self> {
        let mut axes = self.axes.clone();
        axes.extend_from_slice(&other.axes);
        Self::new(axes)
    }
}

/// Real values sampled on every point of a [`UniformGrid`], row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ScalarField<T: Real> {
    grid: UniformGrid<T>,
    values: Vec<T>,
}

impl<T: Real> ScalarField<T> {
    pub fn new(grid: UniformGrid<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::validation(format!(
                "field has {} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: UniformGrid<T>, f: impl Fn(&[T]) -> T) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.coordinates(i))).collect();
        Self { grid, values }
    }

    pub fn constant(grid: UniformGrid<T>, c: T) -> Self {
        let values = vec![c; grid.len()];
        Self { grid, values }
    }

    pub fn grid(&self) -> &UniformGrid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn norm(&self) -> T {
        inner_product_unchecked(self, self).sqrt()
    }

    /// Scales the field so that `<f, f> = 1`.
    pub fn normalized(mut self) -> Result<Self> {
        let n = self.norm();
        if !(n > T::zero()) {
            return Err(Error::validation("cannot normalize a zero field"));
        }
        let inv = T::one() / n;
        self.values.iter_mut().for_each(|v| *v *= inv);
        Ok(self)
    }

    /// One row per point: coordinates, then the value.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let dim = self.grid.dimension();
        let header: Vec<String> = (0..dim).map(|k| format!("x{k}")).collect();
        writeln!(out, "{},value", header.join(","))?;
        for (i, v) in self.values.iter().enumerate() {
            for c in self.grid.coordinates(i) {
                write!(out, "{c},")?;
            }
            writeln!(out, "{v}")?;
        }
        Ok(())
    }
}

/// Applies the positive-semidefinite five-point (seven-point in 3-D)
/// Laplacian `-sum d^2/dx_k^2` to raw values on `grid`.
pub fn laplacian_apply<T: Real>(grid: &UniformGrid<T>, x: &[T], y: &mut [T]) {
    let strides = grid.strides();
    let n = grid.len();
    y[..n].iter_mut().for_each(|v| *v = T::zero());
    for (k, ax) in grid.axes().iter().enumerate() {
        let inv_h2 = T::one() / (ax.spacing * ax.spacing);
        let stride = strides[k];
        let m = ax.points;
        for (flat, yv) in y.iter_mut().enumerate().take(n) {
            let i = (flat / stride) % m;
            let here = x[flat];
            let prev = if i > 0 {
                x[flat - stride]
            } else {
                match ax.boundary {
                    Boundary::Dirichlet => T::zero(),
                    Boundary::Periodic => x[flat + (m - 1) * stride],
                    Boundary::Neumann => here,
                }
            };
            let next = if i + 1 < m {
                x[flat + stride]
            } else {
                match ax.boundary {
                    Boundary::Dirichlet => T::zero(),
                    Boundary::Periodic => x[flat - (m - 1) * stride],
                    Boundary::Neumann => here,
                }
            };
            *yv += (here + here - prev - next) * inv_h2;
        }
    }
}

/// Positive-semidefinite finite-difference Laplacian of a sampled field.
pub fn fd_laplacian<T: Real>(f: &ScalarField<T>) -> ScalarField<T> {
    let mut out = vec![T::zero(); f.values.len()];
    laplacian_apply(&f.grid, &f.values, &mut out);
    ScalarField { grid: f.grid.clone(), values: out }
}

fn inner_product_unchecked<T: Real>(f: &ScalarField<T>, g: &ScalarField<T>) -> T {
    crate::scalar::dot(&f.values, &g.values) * f.grid.cell_volume()
}

/// `sum f g dV` in a fixed summation order.
pub fn inner_product<T: Real>(f: &ScalarField<T>, g: &ScalarField<T>) -> Result<T> {
    if f.grid != g.grid {
        return Err(Error::validation("inner product of fields on different grids"));
    }
    Ok(inner_product_unchecked(f, g))
}

/// `(f (x) g)(x, y) = f(x) g(y)` on the product grid.
pub fn tensor_product_field<T: Real>(f: &ScalarField<T>, g: &ScalarField<T>) -> Result<ScalarField<T>> {
    if f.grid.dimension() + g.grid.dimension() > 3 {
        return Err(Error::validation(format!(
            "product dimension {} exceeds 3",
            f.grid.dimension() + g.grid.dimension()
        )));
    }
    let grid = f.grid.product(&g.grid)?;
    let values = f
        .values
        .iter()
        .flat_map(|a| g.values.iter().map(move |b| *a * *b))
        .collect();
    Ok(ScalarField { grid, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn periodic_unit(n: usize) -> UniformGrid<f64> {
        UniformGrid::new(vec![Axis::periodic(0.0, 1.0, n)]).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(UniformGrid::<f64>::new(vec![]).is_err());
        assert!(UniformGrid::new(vec![Axis::periodic(0.0, 1.0, 2)]).is_err());
        let bad = Axis { points: 4, spacing: -1.0, origin: 0.0, boundary: Boundary::Periodic };
        assert!(UniformGrid::new(vec![bad]).is_err());
        let ax = Axis::periodic(0.0, 1.0, 4);
        assert!(UniformGrid::new(vec![ax; 4]).is_err());
        assert!(ScalarField::new(periodic_unit(4), vec![0.0; 3]).is_err());
    }

    #[test]
    fn indexing_round_trips() {
        let g = UniformGrid::new(vec![
            Axis::periodic(0.0, 1.0, 3),
            Axis::dirichlet(0.0, 1.0, 4),
            Axis::neumann(0.0, 2.0, 5),
        ])
        .unwrap();
        for flat in 0..g.len() {
            assert_eq!(g.flat_index(&g.multi_index(flat)), flat);
        }
        assert_eq!(g.strides(), vec![20, 5, 1]);
    }

    #[test]
    fn constant_is_harmonic_on_periodic_grid() {
        let g = UniformGrid::new(vec![Axis::periodic(0.0, 1.0, 8), Axis::periodic(0.0, 2.0, 6)]).unwrap();
        let lap = fd_laplacian(&ScalarField::constant(g, 3.5));
        assert!(lap.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn sine_is_eigenfunction_on_periodic_grid() {
        let f = ScalarField::from_fn(periodic_unit(256), |x| (2.0 * PI * x[0]).sin());
        let lap = fd_laplacian(&f);
        let k2 = 4.0 * PI * PI;
        let err = lap
            .values()
            .iter()
            .zip(f.values())
            .map(|(l, v)| (l - k2 * v).abs())
            .fold(0.0, f64::max);
        assert!(err / k2 < 1e-3, "relative error {}", err / k2);
    }

    #[test]
    fn stencil_exact_on_quadratics() {
        let g = UniformGrid::new(vec![Axis::closed(-1.0, 1.0, 21, Boundary::Dirichlet); 2]).unwrap();
        let f = ScalarField::from_fn(g.clone(), |x| x[0] * x[0] - x[1] * x[1]);
        let lap = fd_laplacian(&f);
        for flat in 0..g.len() {
            let idx = g.multi_index(flat);
            if idx.iter().all(|&i| i > 0 && i < 20) {
                assert_abs_diff_eq!(lap.values()[flat], 0.0, epsilon = 1e-11);
            }
        }
        let f = ScalarField::from_fn(g.clone(), |x| 3.0 * x[0] * x[0] + x[0] * x[1] - 2.0 * x[1]);
        let lap = fd_laplacian(&f);
        let center = g.flat_index(&[10, 10]);
        assert_abs_diff_eq!(lap.values()[center], -6.0, epsilon = 1e-10);
    }

    #[test]
    fn neumann_constant_is_harmonic() {
        let g = UniformGrid::new(vec![Axis::neumann(0.0, 1.0, 7)]).unwrap();
        let lap = fd_laplacian(&ScalarField::constant(g, 2.0));
        assert!(lap.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn inner_product_examples() {
        let one = ScalarField::constant(periodic_unit(50), 1.0);
        assert_abs_diff_eq!(inner_product(&one, &one).unwrap(), 1.0, epsilon = 1e-14);
        let s1 = ScalarField::from_fn(periodic_unit(64), |x| (2.0 * PI * x[0]).sin());
        let s2 = ScalarField::from_fn(periodic_unit(64), |x| (4.0 * PI * x[0]).sin());
        assert_abs_diff_eq!(inner_product(&s1, &s2).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(inner_product(&s1, &s1).unwrap(), 0.5, epsilon = 1e-12);
        assert!(inner_product(&s1, &one).is_err());
    }

    #[test]
    fn tensor_product_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g1 = UniformGrid::new(vec![Axis::dirichlet(0.0, 1.0, 5)]).unwrap();
        let g2 = UniformGrid::new(vec![Axis::periodic(0.0, 1.0, 4), Axis::periodic(0.0, 1.0, 3)]).unwrap();
        let one = ScalarField::constant(g1.clone(), 1.0);
        let g = ScalarField::new(g2.clone(), (0..12).map(|_| rng.gen()).collect()).unwrap();
        let prod = tensor_product_field(&one, &g).unwrap();
        for (i, v) in prod.values().iter().enumerate() {
            assert_eq!(*v, g.values()[i % 12]);
        }
        let f = ScalarField::new(g1, (0..5).map(|_| rng.gen()).collect()).unwrap();
        let fg = tensor_product_field(&f, &g).unwrap();
        // direct double sum of f_i^2 g_j^2 dV1 dV2
        let mut direct = 0.0;
        for a in f.values() {
            for b in g.values() {
                direct += a * a * b * b;
            }
        }
        direct *= f.grid().cell_volume() * g.grid().cell_volume();
        assert_abs_diff_eq!(inner_product(&fg, &fg).unwrap(), direct, epsilon = 1e-12);
        assert!(tensor_product_field(&g, &g).is_err());
    }

    #[test]
    fn laplacian_is_additive_on_product_grids() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g1 = UniformGrid::new(vec![Axis::periodic(0.0, 1.0, 16)]).unwrap();
        let g2 = UniformGrid::new(vec![Axis::dirichlet(0.0, 1.0, 9), Axis::neumann(0.0, 1.0, 7)]).unwrap();
        let f = ScalarField::from_fn(g1, |x| (2.0 * PI * x[0]).cos() + 0.3);
        let g = ScalarField::new(g2.clone(), (0..g2.len()).map(|_| rng.gen::<f64>()).collect()).unwrap();
        let lhs = fd_laplacian(&tensor_product_field(&f, &g).unwrap());
        let a = tensor_product_field(&fd_laplacian(&f), &g).unwrap();
        let b = tensor_product_field(&f, &fd_laplacian(&g)).unwrap();
        for ((l, x), y) in lhs.values().iter().zip(a.values()).zip(b.values()) {
            assert_abs_diff_eq!(*l, x + y, epsilon = 1e-12 * l.abs().max(1.0));
        }
    }

    #[test]
    fn csv_has_one_row_per_point() {
        let f = ScalarField::from_fn(periodic_unit(4), |x| x[0]);
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x0,value");
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[2], "0.25,0.25");
    }

    #[test]
    fn single_precision_laplacian() {
        let g = UniformGrid::<f32>::new(vec![Axis::periodic(0.0, 1.0, 64)]).unwrap();
        let f = ScalarField::from_fn(g, |x| (2.0 * std::f32::consts::PI * x[0]).sin());
        let lap = fd_laplacian(&f);
        let k2 = 4.0 * std::f32::consts::PI.powi(2);
        let i = 16; // sin peak
        assert!((lap.values()[i] / k2 - 1.0).abs() < 2e-3);
    }
}
