//! Moving frames on 2-D charts: Cartan's structure equations and a descent
//! explorer for the torsion functional `sum_a <e^a, D e^a>`.
//!
//! A coframe is a 2x2 matrix `e[a][i]` (frame index, coordinate index). A
//! connection is `w[a][b][i]`, the `dx^i` component of `w^a_b`. A 2-form on
//! a 2-D chart is stored as its single `dx^0 ^ dx^1` coefficient.
//!
//! Structure equations, with `(u ^ v)_{01} = u_0 v_1 - u_1 v_0`:
//!
//! ```text
//! T^a   = d e^a   + w^a_b ^ e^b
//! R^a_b = d w^a_b + w^a_c ^ w^c_b
//! ```

use std::fmt::Debug;
use std::io::{self, Write};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ParametrizedMetric;
use crate::grids::{laplacian_apply, Axis, Boundary, UniformGrid};
use crate::scalar::Real;
use crate::variational::SolverConfig;

pub type Mat2<T> = [[T; 2]; 2];
/// `w[a][b][i]`.
pub type Connection<T> = [[[T; 2]; 2]; 2];

fn zero_connection<T: Real>() -> Connection<T> {
    [[[T::zero(); 2]; 2]; 2]
}

fn det2<T: Real>(m: &Mat2<T>) -> T {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

fn inv2<T: Real>(m: &Mat2<T>) -> Option<Mat2<T>> {
    let d = det2(m);
    if d == T::zero() || !d.is_finite() {
        return None;
    }
    Some([[m[1][1] / d, -m[0][1] / d], [-m[1][0] / d, m[0][0] / d]])
}

fn mul2<T: Real>(a: &Mat2<T>, b: &Mat2<T>) -> Mat2<T> {
    let mut out = [[T::zero(); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn gram<T: Real>(e: &Mat2<T>) -> Mat2<T> {
    let mut g = [[T::zero(); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            g[i][j] = e[0][i] * e[0][j] + e[1][i] * e[1][j];
        }
    }
    g
}

/// Symmetric positive square root of a 2x2 SPD matrix.
fn sqrt_spd<T: Real>(g: &Mat2<T>) -> Option<Mat2<T>> {
    let d = det2(g);
    if !(d > T::zero() && g[0][0] > T::zero()) {
        return None;
    }
    let s = d.sqrt();
    let t = (g[0][0] + g[1][1] + T::two() * s).sqrt();
    Some([[(g[0][0] + s) / t, g[0][1] / t], [g[1][0] / t, (g[1][1] + s) / t]])
}

/// Nearest orthogonal matrix in the Frobenius norm.
fn polar_factor<T: Real>(m: &Mat2<T>) -> Mat2<T> {
    if det2(m) >= T::zero() {
        let a = (m[1][0] - m[0][1]).atan2(m[0][0] + m[1][1]);
        let (s, c) = a.sin_cos();
        [[c, -s], [s, c]]
    } else {
        let a = (m[0][1] + m[1][0]).atan2(m[0][0] - m[1][1]);
        let (s, c) = a.sin_cos();
        [[c, s], [s, -c]]
    }
}

/// Levi-Civita connection of an orthonormal coframe from its exterior
/// derivative `de[a] = (d e^a)_{01}`.
fn levi_civita_from<T: Real>(e: &Mat2<T>, de: [T; 2]) -> Option<Connection<T>> {
    let inv = inv2(e)?;
    // frame vector b has coordinate components inv[i][b]
    let mut c = [[[T::zero(); 2]; 2]; 2];
    for (a, ca) in c.iter_mut().enumerate() {
        for b in 0..2 {
            for k in 0..2 {
                ca[b][k] = de[a] * (inv[0][b] * inv[1][k] - inv[1][b] * inv[0][k]);
            }
        }
    }
    let mut w = zero_connection();
    for a in 0..2 {
        for b in 0..2 {
            for k in 0..2 {
                let gamma = T::half() * (c[a][b][k] + c[b][k][a] - c[k][a][b]);
                for i in 0..2 {
                    w[a][b][i] += gamma * e[k][i];
                }
            }
        }
    }
    Some(w)
}

fn torsion_from<T: Real>(e: &Mat2<T>, de: [T; 2], w: &Connection<T>) -> [T; 2] {
    let mut out = de;
    for (a, o) in out.iter_mut().enumerate() {
        for b in 0..2 {
            *o += w[a][b][0] * e[b][1] - w[a][b][1] * e[b][0];
        }
    }
    out
}

/// Coordinate box; periodic axes never run out of chart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Chart<T: Real> {
    pub domain: [(T, T); 2],
    pub periodic: [bool; 2],
}

impl<T: Real> Chart<T> {
    pub fn torus(lx: T, ly: T) -> Self {
        Self { domain: [(T::zero(), lx), (T::zero(), ly)], periodic: [true, true] }
    }

    /// `(theta, phi)` on the sphere.
    pub fn sphere() -> Self {
        Self { domain: [(T::zero(), T::PI()), (T::zero(), T::two() * T::PI())], periodic: [false, true] }
    }

    /// `(r, phi)` on a disc of the given radius.
    pub fn polar(outer_radius: T) -> Self {
        Self { domain: [(T::zero(), outer_radius), (T::zero(), T::two() * T::PI())], periodic: [false, true] }
    }

    fn admits(&self, x: &[T; 2], reach: T) -> bool {
        (0..2).all(|k| {
            x[k].is_finite()
                && (self.periodic[k] || (x[k] - reach > self.domain[k].0 && x[k] + reach < self.domain[k].1))
        })
    }

    /// Grid for the torsion functional: periodic axes sample the period,
    /// bounded axes are cell-centred with reflecting ends.
    pub fn sample_grid(&self, points: [usize; 2]) -> Result<UniformGrid<T>> {
        let axes = (0..2)
            .map(|k| {
                let (a, b) = self.domain[k];
                if self.periodic[k] {
                    Axis::periodic(a, b, points[k])
                } else {
                    Axis::neumann(a, b, points[k])
                }
            })
            .collect();
        UniformGrid::new(axes)
    }
}

type CoframeFn<T> = dyn Fn(&[T; 2]) -> Mat2<T> + Send + Sync;
type ConnectionFn<T> = dyn Fn(&[T; 2]) -> Connection<T> + Send + Sync;

/// Analytic coframe and connection on a 2-D chart.
#[derive(Clone)]
pub struct FrameConfiguration<T: Real> {
    chart: Chart<T>,
    coframe: Arc<CoframeFn<T>>,
    connection: Arc<ConnectionFn<T>>,
    /// Step of the fourth-order differences used for `d`.
    pub step: T,
}

impl<T: Real> Debug for FrameConfiguration<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FrameConfiguration").field("chart", &self.chart).field("step", &self.step).finish()
    }
}

impl<T: Real> FrameConfiguration<T> {
    pub fn new(
        chart: Chart<T>,
        coframe: impl Fn(&[T; 2]) -> Mat2<T> + Send + Sync + 'static,
        connection: impl Fn(&[T; 2]) -> Connection<T> + Send + Sync + 'static,
    ) -> Self {
        Self { chart, coframe: Arc::new(coframe), connection: Arc::new(connection), step: T::lit(1e-3) }
    }

    /// `(dx, dy)` on the unit torus, zero connection.
    pub fn cartesian() -> Self {
        Self::new(Chart::torus(T::one(), T::one()), |_| [[T::one(), T::zero()], [T::zero(), T::one()]], |_| {
            zero_connection()
        })
    }

    /// `(dr, r dphi)`, optionally with its Levi-Civita connection `w^1_2 = -dphi`.
    pub fn polar(outer_radius: T, levi_civita: bool) -> Self {
        Self::new(
            Chart::polar(outer_radius),
            |x| [[T::one(), T::zero()], [T::zero(), x[0]]],
            move |_| {
                let mut w = zero_connection();
                if levi_civita {
                    w[0][1][1] = -T::one();
                    w[1][0][1] = T::one();
                }
                w
            },
        )
    }

    /// `(r dtheta, r sin(theta) dphi)` with `w^1_2 = -cos(theta) dphi`.
    pub fn sphere(radius: T) -> Self {
        Self::new(
            Chart::sphere(),
            move |x| [[radius, T::zero()], [T::zero(), radius * x[0].sin()]],
            |x| {
                let mut w = zero_connection();
                w[0][1][1] = -x[0].cos();
                w[1][0][1] = x[0].cos();
                w
            },
        )
    }

    /// The unit-torus Cartesian frame rotated pointwise by
    /// `epsilon * sin(2 pi x)`, or by a seeded sum of three periodic modes.
    pub fn perturbed_torus(epsilon: T, seed: Option<u64>) -> Self {
        let modes: Vec<([T; 2], T, T)> = match seed {
            None => vec![([T::one(), T::zero()], T::one(), T::zero())],
            Some(s) => {
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                (0..3)
                    .map(|_| {
                        let mut k = [0i32; 2];
                        while k == [0, 0] {
                            k = [rng.gen_range(-2..=2), rng.gen_range(-2..=2)];
                        }
                        let kk = [T::lit(k[0] as f64), T::lit(k[1] as f64)];
                        (kk, T::lit(rng.gen_range(-1.0..1.0)), T::lit(rng.gen_range(0.0..std::f64::consts::TAU)))
                    })
                    .collect()
            }
        };
        let angle = move |x: &[T; 2]| {
            let tau = T::two() * T::PI();
            epsilon
                * modes
                    .iter()
                    .map(|(k, a, p)| *a * (tau * (k[0] * x[0] + k[1] * x[1]) + *p).sin())
                    .sum::<T>()
        };
        let cfg = Self::new(
            Chart::torus(T::one(), T::one()),
            move |x| {
                let (s, c) = angle(x).sin_cos();
                [[c, -s], [s, c]]
            },
            |_| zero_connection(),
        );
        cfg.with_levi_civita()
    }

    pub fn chart(&self) -> &Chart<T> {
        &self.chart
    }

    pub fn coframe(&self, x: &[T; 2]) -> Mat2<T> {
        (self.coframe)(x)
    }

    pub fn connection(&self, x: &[T; 2]) -> Connection<T> {
        (self.connection)(x)
    }

    pub fn with_connection(mut self, connection: impl Fn(&[T; 2]) -> Connection<T> + Send + Sync + 'static) -> Self {
        self.connection = Arc::new(connection);
        self
    }

    /// Replaces the connection by the Levi-Civita connection of the coframe.
    pub fn with_levi_civita(self) -> Self {
        let probe = self.clone();
        self.with_connection(move |x| {
            let e = probe.coframe(x);
            levi_civita_from(&e, probe.coframe_exterior(x)).unwrap_or_else(zero_connection)
        })
    }

    fn check(&self, x: &[T; 2]) -> Result<()> {
        if !self.chart.admits(x, T::two() * self.step) {
            return Err(Error::validation("stencil exits the chart"));
        }
        if inv2(&self.coframe(x)).is_none() {
            return Err(Error::validation("coframe is singular at this point"));
        }
        Ok(())
    }

    fn d_along<const N: usize>(&self, x: &[T; 2], axis: usize, f: &dyn Fn(&[T; 2]) -> [T; N]) -> [T; N] {
        let mut out = [T::zero(); N];
        for (k, w) in [(1.0, 8.0), (2.0, -1.0), (-1.0, -8.0), (-2.0, 1.0)] {
            let mut y = *x;
            y[axis] += T::lit(k) * self.step;
            for (o, v) in out.iter_mut().zip(f(&y)) {
                *o += T::lit(w) * v;
            }
        }
        out.map(|v| v / (T::lit(12.0) * self.step))
    }

    /// `(d e^a)_{01}`.
    fn coframe_exterior(&self, x: &[T; 2]) -> [T; 2] {
        let flat = |y: &[T; 2]| {
            let e = self.coframe(y);
            [e[0][0], e[0][1], e[1][0], e[1][1]]
        };
        let d0 = self.d_along(x, 0, &flat);
        let d1 = self.d_along(x, 1, &flat);
        // d_0 e^a_1 - d_1 e^a_0
        [d0[1] - d1[0], d0[3] - d1[2]]
    }

    fn connection_exterior(&self, x: &[T; 2]) -> Mat2<T> {
        let flat = |y: &[T; 2]| {
            let w = self.connection(y);
            let mut v = [T::zero(); 8];
            for a in 0..2 {
                for b in 0..2 {
                    for i in 0..2 {
                        v[(a * 2 + b) * 2 + i] = w[a][b][i];
                    }
                }
            }
            v
        };
        let d0 = self.d_along(x, 0, &flat);
        let d1 = self.d_along(x, 1, &flat);
        let mut out = [[T::zero(); 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                out[a][b] = d0[(a * 2 + b) * 2 + 1] - d1[(a * 2 + b) * 2];
            }
        }
        out
    }

    /// Samples coframe and connection on `grid`; the frame metric of the
    /// samples becomes the orthonormality target.
    pub fn sample(&self, grid: &UniformGrid<T>) -> Result<SampledFrame<T>> {
        if grid.dimension() != 2 {
            return Err(Error::validation("frames live on 2-D grids"));
        }
        let mut coframe = Vec::with_capacity(grid.len());
        let mut connection = Vec::with_capacity(grid.len());
        for flat in 0..grid.len() {
            let c = grid.coordinates(flat);
            let x = [c[0], c[1]];
            coframe.push(self.coframe(&x));
            connection.push(self.connection(&x));
        }
        SampledFrame::new(grid.clone(), coframe, connection)
    }
}

pub fn structure_torsion<T: Real>(cfg: &FrameConfiguration<T>, x: &[T; 2]) -> Result<[T; 2]> {
    cfg.check(x)?;
    Ok(torsion_from(&cfg.coframe(x), cfg.coframe_exterior(x), &cfg.connection(x)))
}

/// `R^a_b` on `dx^0 ^ dx^1`.
pub fn structure_curvature<T: Real>(cfg: &FrameConfiguration<T>, x: &[T; 2]) -> Result<Mat2<T>> {
    cfg.check(x)?;
    let w = cfg.connection(x);
    let mut out = cfg.connection_exterior(x);
    for a in 0..2 {
        for b in 0..2 {
            for c in 0..2 {
                out[a][b] += w[a][c][0] * w[c][b][1] - w[a][c][1] * w[c][b][0];
            }
        }
    }
    Ok(out)
}

/// Frame curvature moved to coordinate indices: `R^m_{n01} = E^m_a R^a_b e^b_n`,
/// laid out as `[m][n]`.
pub fn coordinate_curvature<T: Real>(cfg: &FrameConfiguration<T>, x: &[T; 2]) -> Result<Mat2<T>> {
    let r = structure_curvature(cfg, x)?;
    let e = cfg.coframe(x);
    let inv = inv2(&e).ok_or_else(|| Error::validation("coframe is singular at this point"))?;
    Ok(mul2(&mul2(&inv, &r), &e))
}

/// Levi-Civita connection of a coframe that is orthonormal for `metric`.
pub fn levi_civita_connection<T: Real>(
    metric: &ParametrizedMetric<T>,
    cfg: &FrameConfiguration<T>,
    x: &[T; 2],
) -> Result<Connection<T>> {
    if metric.dimension() != 2 {
        return Err(Error::validation("frames need a 2-D metric"));
    }
    cfg.check(x)?;
    let g = metric.components(x)?;
    let e = cfg.coframe(x);
    let eg = gram(&e);
    let scale = g.iter().fold(T::one(), |m, v| m.max(v.abs()));
    let off = (0..4).map(|k| (eg[k / 2][k % 2] - g[k]).abs()).fold(T::zero(), T::max);
    if off > T::lit(1e-8) * scale {
        return Err(Error::validation(format!("coframe is not orthonormal for the metric (deviation {off})")));
    }
    levi_civita_from(&e, cfg.coframe_exterior(x)).ok_or_else(|| Error::validation("coframe is singular"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TorsionCurvatureReport<T: Real> {
    pub points: Vec<[T; 2]>,
    pub torsion: Vec<[T; 2]>,
    pub curvature: Vec<Mat2<T>>,
    /// Largest torsion component.
    pub torsion_norm: T,
    pub curvature_norm: T,
}

pub fn torsion_curvature_report<T: Real>(
    cfg: &FrameConfiguration<T>,
    points: &[[T; 2]],
) -> Result<TorsionCurvatureReport<T>> {
    let torsion = points.iter().map(|x| structure_torsion(cfg, x)).collect::<Result<Vec<_>>>()?;
    let curvature = points.iter().map(|x| structure_curvature(cfg, x)).collect::<Result<Vec<_>>>()?;
    let tn = torsion.iter().flatten().fold(T::zero(), |m, v| m.max(v.abs()));
    let cn = curvature.iter().flatten().flatten().fold(T::zero(), |m, v| m.max(v.abs()));
    Ok(TorsionCurvatureReport { points: points.to_vec(), torsion, curvature, torsion_norm: tn, curvature_norm: cn })
}

/// A coframe and connection sampled on a 2-D grid, with the per-point
/// target `S = sqrt(g)` that defines orthonormality: admissible coframes
/// are `Q S` with `Q` orthogonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SampledFrame<T: Real> {
    grid: UniformGrid<T>,
    coframe: Vec<Mat2<T>>,
    connection: Vec<Connection<T>>,
    target: Vec<Mat2<T>>,
}

impl<T: Real> SampledFrame<T> {
    pub fn new(grid: UniformGrid<T>, coframe: Vec<Mat2<T>>, connection: Vec<Connection<T>>) -> Result<Self> {
        if grid.dimension() != 2 || coframe.len() != grid.len() || connection.len() != grid.len() {
            return Err(Error::validation("sample count does not match the grid"));
        }
        let target = coframe
            .iter()
            .map(|e| sqrt_spd(&gram(e)).ok_or_else(|| Error::validation("coframe is singular at a sample")))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { grid, coframe, connection, target })
    }

    pub fn grid(&self) -> &UniformGrid<T> {
        &self.grid
    }

    pub fn coframe(&self) -> &[Mat2<T>] {
        &self.coframe
    }

    pub fn connection(&self) -> &[Connection<T>] {
        &self.connection
    }

    fn component(&self, a: usize, i: usize) -> Vec<T> {
        self.coframe.iter().map(|e| e[a][i]).collect()
    }

    /// `sum_{a,i} <e^a_i, D e^a_i> dA`.
    pub fn functional(&self) -> T {
        let mut buf = vec![T::zero(); self.grid.len()];
        let mut total = T::zero();
        for a in 0..2 {
            for i in 0..2 {
                let c = self.component(a, i);
                laplacian_apply(&self.grid, &c, &mut buf);
                total += crate::scalar::dot(&c, &buf);
            }
        }
        total * self.grid.cell_volume()
    }

    /// `2 D e dA`, pointwise.
    fn gradient(&self) -> Vec<Mat2<T>> {
        let n = self.grid.len();
        let mut out = vec![[[T::zero(); 2]; 2]; n];
        let mut buf = vec![T::zero(); n];
        let w = T::two() * self.grid.cell_volume();
        for a in 0..2 {
            for i in 0..2 {
                laplacian_apply(&self.grid, &self.component(a, i), &mut buf);
                for (o, b) in out.iter_mut().zip(&buf) {
                    o[a][i] = w * *b;
                }
            }
        }
        out
    }

    /// Norm of the gradient projected onto the tangent space of the
    /// constraint set, spanned at `Q S` by `Q J S`.
    fn projected_norm(&self, grad: &[Mat2<T>]) -> T {
        let j = [[T::zero(), -T::one()], [T::one(), T::zero()]];
        let mut total = T::zero();
        for ((e, s), g) in self.coframe.iter().zip(&self.target).zip(grad) {
            let q = polar_factor(&mul2(e, &s_inverse(s)));
            let v = mul2(&mul2(&q, &j), s);
            let gv: T = (0..4).map(|k| g[k / 2][k % 2] * v[k / 2][k % 2]).sum();
            let vv: T = (0..4).map(|k| v[k / 2][k % 2] * v[k / 2][k % 2]).sum();
            total += gv * gv / vv;
        }
        total.sqrt()
    }

    /// Moves every coframe to the nearest admissible one.
    fn project(&mut self) {
        for (e, s) in self.coframe.iter_mut().zip(&self.target) {
            let q = polar_factor(&mul2(e, s));
            *e = mul2(&q, s);
        }
    }

    /// Largest pointwise `|e^T e - S^2|`.
    pub fn orthonormality_defect(&self) -> T {
        let mut worst = T::zero();
        for (e, s) in self.coframe.iter().zip(&self.target) {
            let (g, t) = (gram(e), mul2(s, s));
            for k in 0..4 {
                worst = worst.max((g[k / 2][k % 2] - t[k / 2][k % 2]).abs());
            }
        }
        worst
    }

    /// `d e^a` by grid differences: central where both neighbours exist
    /// or the axis wraps, second-order one-sided at reflecting ends.
    fn exterior(&self, flat: usize) -> [T; 2] {
        let mut out = [T::zero(); 2];
        for (a, o) in out.iter_mut().enumerate() {
            let d0 = self.partial(flat, 0, |e| e[a][1]);
            let d1 = self.partial(flat, 1, |e| e[a][0]);
            *o = d0 - d1;
        }
        out
    }

    fn partial(&self, flat: usize, axis: usize, f: impl Fn(&Mat2<T>) -> T) -> T {
        let ax = self.grid.axes()[axis];
        let stride = self.grid.strides()[axis];
        let m = ax.points;
        let i = (flat / stride) % m;
        let at = |k: isize| {
            let j = (i as isize + k).rem_euclid(m as isize) as usize;
            f(&self.coframe[flat - i * stride + j * stride])
        };
        let h = ax.spacing;
        if ax.boundary == Boundary::Periodic || (i > 0 && i + 1 < m) {
            (at(1) - at(-1)) / (T::two() * h)
        } else if i == 0 {
            (-T::lit(3.0) * at(0) + T::lit(4.0) * at(1) - at(2)) / (T::two() * h)
        } else {
            (T::lit(3.0) * at(0) - T::lit(4.0) * at(-1) + at(-2)) / (T::two() * h)
        }
    }

    /// Largest torsion component of the sampled configuration.
    pub fn torsion_norm(&self) -> T {
        (0..self.grid.len())
            .flat_map(|p| torsion_from(&self.coframe[p], self.exterior(p), &self.connection[p]))
            .fold(T::zero(), |m, v| m.max(v.abs()))
    }

    fn refresh_levi_civita(&mut self) {
        for p in 0..self.grid.len() {
            if let Some(w) = levi_civita_from(&self.coframe[p], self.exterior(p)) {
                self.connection[p] = w;
            }
        }
    }

    /// Largest distance from a single admissible constant coframe, the
    /// projection of the mean coframe.
    pub fn distance_from_constant(&self) -> T {
        let n = T::from_count(self.coframe.len());
        let mut mean = [[T::zero(); 2]; 2];
        for e in &self.coframe {
            for k in 0..4 {
                mean[k / 2][k % 2] += e[k / 2][k % 2] / n;
            }
        }
        let q = polar_factor(&mean);
        let mut worst = T::zero();
        for (e, s) in self.coframe.iter().zip(&self.target) {
            let c = mul2(&q, s);
            let d: T = (0..4).map(|k| (e[k / 2][k % 2] - c[k / 2][k % 2]).powi(2)).sum();
            worst = worst.max(d.sqrt());
        }
        worst
    }
}

fn s_inverse<T: Real>(s: &Mat2<T>) -> Mat2<T> {
    inv2(s).unwrap_or([[T::one(), T::zero()], [T::zero(), T::one()]])
}

pub fn torsion_functional<T: Real>(cfg: &FrameConfiguration<T>, grid: &UniformGrid<T>) -> Result<T> {
    Ok(cfg.sample(grid)?.functional())
}

/// What happens to the connection while the coframe is varied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConnectionMode {
    /// The connection is kept as given.
    Frozen,
    /// The connection follows the coframe as its Levi-Civita connection.
    #[default]
    Implicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TrajectoryPoint<T: Real> {
    pub iteration: usize,
    pub value: T,
    pub gradient_norm: T,
    pub step: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TorsionFunctionalResult<T: Real> {
    pub value: T,
    pub gradient_norm: T,
    pub configuration: SampledFrame<T>,
    pub iterations: usize,
    pub mode: ConnectionMode,
    /// Torsion of the final coframe with the final connection.
    pub torsion_norm: T,
    pub trajectory: Vec<TrajectoryPoint<T>>,
}

impl<T: Real> TorsionFunctionalResult<T> {
    pub fn write_trajectory_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "iteration,value,gradient_norm,step")?;
        for p in &self.trajectory {
            writeln!(out, "{},{:e},{:e},{:e}", p.iteration, p.value.as_f64(), p.gradient_norm.as_f64(), p.step.as_f64())?;
        }
        Ok(())
    }
}

/// Projected gradient descent of the torsion functional over admissible
/// coframes. The initial coframe is projected first. Steps use Armijo
/// backtracking, so accepted values never increase; the loop stops once
/// the projected gradient norm is below `config.tolerance`.
pub fn minimize_torsion_functional<T: Real>(
    initial: &SampledFrame<T>,
    config: &SolverConfig<T>,
    mode: ConnectionMode,
) -> Result<TorsionFunctionalResult<T>> {
    config.validate()?;
    let mut frame = initial.clone();
    frame.project();
    let lam_max: T = frame.grid.axes().iter().map(|a| T::lit(4.0) / (a.spacing * a.spacing)).sum();
    let t_max = T::one() / (frame.grid.cell_volume() * lam_max);
    let mut t = t_max;
    let mut value = frame.functional();
    let mut grad = frame.gradient();
    let mut pg = frame.projected_norm(&grad);
    let mut trajectory = vec![TrajectoryPoint { iteration: 0, value, gradient_norm: pg, step: T::zero() }];
    let mut iterations = 0;
    while pg >= config.tolerance && iterations < config.max_iterations {
        let mut accepted = None;
        for _ in 0..60 {
            let mut trial = frame.clone();
            for (e, g) in trial.coframe.iter_mut().zip(&grad) {
                for k in 0..4 {
                    e[k / 2][k % 2] -= t * g[k / 2][k % 2];
                }
            }
            trial.project();
            let v = trial.functional();
            if v <= value - T::lit(1e-4) * t * pg * pg {
                accepted = Some((trial, v));
                break;
            }
            t *= T::half();
        }
        let Some((next, v)) = accepted else {
            return Err(Error::Convergence {
                message: "line search could not decrease the torsion functional".into(),
                iterations,
                residual: pg.as_f64(),
                best: frame.coframe.iter().flat_map(|e| e.iter().flatten().map(|v| v.as_f64())).collect(),
            });
        };
        frame = next;
        value = v;
        grad = frame.gradient();
        pg = frame.projected_norm(&grad);
        iterations += 1;
        trajectory.push(TrajectoryPoint { iteration: iterations, value, gradient_norm: pg, step: t });
        t = (t * T::two()).min(t_max);
    }
    if mode == ConnectionMode::Implicit {
        frame.refresh_levi_civita();
    }
    Ok(TorsionFunctionalResult {
        value,
        gradient_norm: pg,
        torsion_norm: frame.torsion_norm(),
        configuration: frame,
        iterations,
        mode,
        trajectory,
    })
}

/// Serializable choice of analytic configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", tag = "frame", rename_all = "snake_case", deny_unknown_fields)]
pub enum FrameSpec<T: Real> {
    Cartesian,
    PerturbedTorus {
        epsilon: T,
        #[serde(default)]
        seed: Option<u64>,
    },
    Polar {
        outer_radius: T,
    },
    Sphere {
        radius: T,
    },
}

impl<T: Real> FrameSpec<T> {
    pub fn build(&self) -> Result<FrameConfiguration<T>> {
        Ok(match self {
            Self::Cartesian => FrameConfiguration::cartesian(),
            Self::PerturbedTorus { epsilon, seed } => {
                if !epsilon.is_finite() {
                    return Err(Error::validation("epsilon must be finite"));
                }
                FrameConfiguration::perturbed_torus(*epsilon, *seed)
            }
            Self::Polar { outer_radius } => {
                if !(*outer_radius > T::zero()) {
                    return Err(Error::validation("outer_radius must be positive"));
                }
                FrameConfiguration::polar(*outer_radius, true)
            }
            Self::Sphere { radius } => {
                if !(*radius > T::zero()) {
                    return Err(Error::validation("radius must be positive"));
                }
                FrameConfiguration::sphere(*radius)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{curvature, PolarPlane, RoundSphere};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn cartesian_is_torsion_and_curvature_free() {
        let c = FrameConfiguration::<f64>::cartesian();
        let r = torsion_curvature_report(&c, &[[0.2, 0.3], [0.9, 0.1]]).unwrap();
        assert_eq!(r.torsion_norm, 0.0);
        assert_eq!(r.curvature_norm, 0.0);
    }

    #[test]
    fn polar_torsion_with_and_without_connection() {
        let lc = FrameConfiguration::polar(3.0f64, true);
        let bare = FrameConfiguration::polar(3.0f64, false);
        for x in [[0.5, 0.3], [2.0, 4.0]] {
            let t = structure_torsion(&lc, &x).unwrap();
            assert!(t.iter().all(|v| v.abs() < 1e-6));
            let t = structure_torsion(&bare, &x).unwrap();
            assert_abs_diff_eq!(t[0], 0.0, epsilon = 1e-9);
            assert_abs_diff_eq!(t[1], 1.0, epsilon = 1e-9);
            let r = structure_curvature(&lc, &x).unwrap();
            assert!(r.iter().flatten().all(|v| v.abs() < 1e-6));
        }
    }

    #[test]
    fn sphere_curvature_two_form() {
        let s = FrameConfiguration::sphere(1.0f64);
        for th in [0.4, 1.3, 2.6] {
            let x = [th, 0.7];
            let r = structure_curvature(&s, &x).unwrap();
            assert_abs_diff_eq!(r[0][1], th.sin(), epsilon = 1e-6);
            assert_abs_diff_eq!(r[1][0], -th.sin(), epsilon = 1e-6);
            assert!(structure_torsion(&s, &x).unwrap().iter().all(|v| v.abs() < 1e-6));
        }
    }

    #[test]
    fn levi_civita_matches_closed_forms() {
        let sphere = ParametrizedMetric::closed_form(RoundSphere { radius: 1.0f64 });
        let frame = FrameConfiguration::sphere(1.0);
        for th in [0.5, 2.0] {
            let w = levi_civita_connection(&sphere, &frame, &[th, 1.0]).unwrap();
            assert_abs_diff_eq!(w[0][1][1], -th.cos(), epsilon = 1e-8);
            assert_abs_diff_eq!(w[0][1][0], 0.0, epsilon = 1e-8);
            assert_abs_diff_eq!(w[1][0][1], th.cos(), epsilon = 1e-8);
        }
        let polar = ParametrizedMetric::closed_form(PolarPlane { outer_radius: 3.0f64 });
        let w = levi_civita_connection(&polar, &FrameConfiguration::polar(3.0, false), &[1.2, 0.4]).unwrap();
        assert_abs_diff_eq!(w[0][1][1], -1.0, epsilon = 1e-8);
        let flat = FrameConfiguration::<f64>::cartesian();
        let eu = ParametrizedMetric::closed_form(crate::geometry::Euclidean { dimension: 2 });
        let w = levi_civita_connection(&eu, &flat, &[0.3, 0.3]).unwrap();
        assert!(w.iter().flatten().flatten().all(|v| *v == 0.0));
        // the polar coframe is not orthonormal for the sphere
        assert!(levi_civita_connection(&sphere, &FrameConfiguration::polar(3.0, false), &[1.0, 1.0]).is_err());
    }

    #[test]
    fn levi_civita_round_trip_has_no_torsion() {
        let skew = FrameConfiguration::new(
            Chart::torus(1.0f64, 1.0),
            |x| {
                let a = 0.4 * (2.0 * PI * x[0]).sin() + 0.2 * (2.0 * PI * x[1]).cos();
                let r = 1.0 + 0.3 * (2.0 * PI * (x[0] + x[1])).sin();
                [[r * a.cos(), -a.sin()], [r * a.sin(), a.cos()]]
            },
            |_| zero_connection(),
        )
        .with_levi_civita();
        let pts = [[0.1, 0.2], [0.5, 0.7], [0.8, 0.35]];
        let rep = torsion_curvature_report(&skew, &pts).unwrap();
        assert!(rep.torsion_norm < 1e-6, "{}", rep.torsion_norm);
        for x in pts {
            let w = skew.connection(&x);
            for i in 0..2 {
                assert_abs_diff_eq!(w[0][1][i], -w[1][0][i], epsilon = 1e-12);
                assert_eq!(w[0][0][i], 0.0);
            }
        }
    }

    #[test]
    fn frame_curvature_matches_riemann() {
        let sphere = ParametrizedMetric::closed_form(RoundSphere { radius: 1.5f64 });
        let frame = FrameConfiguration::sphere(1.5).with_levi_civita();
        let polar = ParametrizedMetric::closed_form(PolarPlane { outer_radius: 3.0f64 });
        let pframe = FrameConfiguration::polar(3.0, false).with_levi_civita();
        for (metric, cfg) in [(&sphere, &frame), (&polar, &pframe)] {
            for x in [[0.7, 0.2], [1.9, 3.0]] {
                let frame_r = coordinate_curvature(cfg, &x).unwrap();
                let coord = curvature(metric, &x).unwrap();
                for m in 0..2 {
                    for n in 0..2 {
                        assert_abs_diff_eq!(frame_r[m][n], coord.riemann(m, n, 0, 1), epsilon = 1e-4);
                    }
                }
            }
        }
    }

    #[test]
    fn stencil_must_fit() {
        let s = FrameConfiguration::sphere(1.0f64);
        assert!(structure_torsion(&s, &[0.001, 1.0]).is_err());
        assert!(structure_torsion(&FrameConfiguration::<f64>::cartesian(), &[5.0, -3.0]).is_ok());
    }

    #[test]
    fn functional_on_torus() {
        let grid = Chart::torus(1.0, 1.0).sample_grid([32, 32]).unwrap();
        assert_eq!(torsion_functional(&FrameConfiguration::<f64>::cartesian(), &grid).unwrap(), 0.0);
        let eps = 0.05;
        let bumped = FrameConfiguration::new(
            Chart::torus(1.0, 1.0),
            move |x| [[1.0 + eps * (2.0 * PI * x[0]).sin(), 0.0], [0.0, 1.0]],
            |_| zero_connection(),
        );
        let v = torsion_functional(&bumped, &grid).unwrap();
        let exact = eps * eps * (2.0 * PI).powi(2) / 2.0;
        assert!((v / exact - 1.0).abs() < 1e-2, "{v} vs {exact}");
    }

    #[test]
    fn functional_vanishes_only_on_harmonic_components() {
        let grid = Chart::torus(1.0, 1.0).sample_grid([12, 12]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = grid.len();
        let mut cf: Vec<Mat2<f64>> = vec![[[1.0, 0.2], [-0.3, 0.9]]; n];
        let conn = vec![zero_connection(); n];
        let constant = SampledFrame::new(grid.clone(), cf.clone(), conn.clone()).unwrap();
        assert!(constant.functional().abs() < 1e-12);
        for _ in 0..10 {
            let p = rng.gen_range(0..n);
            cf[p][rng.gen_range(0..2)][rng.gen_range(0..2)] += rng.gen_range(0.01..0.1);
            let s = SampledFrame::new(grid.clone(), cf.clone(), conn.clone()).unwrap();
            assert!(s.functional() > 1e-8);
        }
    }

    #[test]
    fn sphere_functional_converges_under_refinement() {
        let f = FrameConfiguration::sphere(1.0f64);
        let chart = Chart::sphere();
        let v: Vec<f64> =
            [32, 64, 128].iter().map(|n| torsion_functional(&f, &chart.sample_grid([*n, 8]).unwrap()).unwrap()).collect();
        assert!(v.iter().all(|x| *x > 1.0));
        // sin(theta) has nonzero slope at the reflecting ends, so the
        // error is first order in the spacing
        let ratio = (v[0] - v[1]) / (v[1] - v[2]);
        assert!((1.8..2.2).contains(&ratio), "{v:?}");
        // extrapolated limit is the integral of cos^2(theta) over the chart
        assert!((2.0 * v[2] - v[1] - PI * PI).abs() < 1e-3, "{v:?}");
    }

    fn small_torus(eps: f64, seed: Option<u64>) -> SampledFrame<f64> {
        let grid = Chart::torus(1.0, 1.0).sample_grid([16, 16]).unwrap();
        FrameConfiguration::perturbed_torus(eps, seed).sample(&grid).unwrap()
    }

    #[test]
    fn flat_frame_is_stationary() {
        let grid = Chart::torus(1.0, 1.0).sample_grid([16, 16]).unwrap();
        let s = FrameConfiguration::<f64>::cartesian().sample(&grid).unwrap();
        let r = minimize_torsion_functional(&s, &SolverConfig::default(), ConnectionMode::Implicit).unwrap();
        assert!(r.gradient_norm < 1e-8);
        assert_eq!(r.iterations, 0);
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn perturbed_frame_relaxes_to_constant() {
        let s = small_torus(0.1, None);
        assert!(s.functional() > 0.1);
        let cfg = SolverConfig { tolerance: 1e-6, max_iterations: 500, shift: None, seed: 0 };
        let r = minimize_torsion_functional(&s, &cfg, ConnectionMode::Implicit).unwrap();
        assert!(r.value < 1e-6, "{} after {}", r.value, r.iterations);
        assert!(r.configuration.distance_from_constant() < 1e-3);
        assert!(r.configuration.orthonormality_defect() < 1e-12);
        assert!(r.torsion_norm < 1e-10);
        assert!(r.trajectory.windows(2).all(|w| w[1].value <= w[0].value + 1e-12));

        let frozen = minimize_torsion_functional(&s, &cfg, ConnectionMode::Frozen).unwrap();
        assert_eq!(frozen.value, r.value);
        assert!(frozen.torsion_norm > 1e-2);
    }

    #[test]
    fn descent_is_monotone_for_many_seeds() {
        let cfg = SolverConfig { tolerance: 1e-8, max_iterations: 60, shift: None, seed: 0 };
        for seed in 0..100 {
            let r = minimize_torsion_functional(&small_torus(0.3, Some(seed)), &cfg, ConnectionMode::Implicit).unwrap();
            assert!(r.trajectory.windows(2).all(|w| w[1].value <= w[0].value + 1e-12), "seed {seed}");
            assert!(r.trajectory.last().unwrap().value < r.trajectory[0].value);
        }
    }

    #[test]
    fn sphere_descent_keeps_orthonormality() {
        let grid = Chart::sphere().sample_grid([16, 16]).unwrap();
        let s = FrameConfiguration::sphere(1.0f64).sample(&grid).unwrap();
        let cfg = SolverConfig { tolerance: 1e-8, max_iterations: 40, shift: None, seed: 0 };
        let r = minimize_torsion_functional(&s, &cfg, ConnectionMode::Implicit).unwrap();
        assert!(r.value <= s.functional());
        assert!(r.configuration.orthonormality_defect() < 1e-12);
        let mut out = Vec::new();
        r.write_trajectory_csv(&mut out).unwrap();
        assert!(String::from_utf8(out).unwrap().starts_with("iteration,value"));
    }

    #[test]
    fn polar_factor_is_nearest() {
        let m = [[0.3, -2.0], [1.1, 0.4]];
        let q = polar_factor(&m);
        let qtq = mul2(&[[q[0][0], q[1][0]], [q[0][1], q[1][1]]], &q);
        assert_abs_diff_eq!(qtq[0][0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(qtq[0][1], 0.0, epsilon = 1e-14);
        let dist = |r: &Mat2<f64>| (0..4).map(|k| (m[k / 2][k % 2] - r[k / 2][k % 2]).powi(2)).sum::<f64>();
        for a in 0..64 {
            let (s, c) = (a as f64 * PI / 32.0).sin_cos();
            assert!(dist(&q) <= dist(&[[c, -s], [s, c]]) + 1e-12);
            assert!(dist(&q) <= dist(&[[c, s], [s, -c]]) + 1e-12);
        }
    }

    #[test]
    fn spec_builds() {
        let f: FrameSpec<f64> = serde_json::from_str(r#"{"frame":"perturbed_torus","epsilon":0.1}"#).unwrap();
        let cfg = f.build().unwrap();
        assert!(structure_torsion(&cfg, &[0.3, 0.4]).unwrap().iter().all(|v| v.abs() < 1e-6));
        assert!(FrameSpec::Sphere { radius: 0.0 }.build().is_err());
    }
}
