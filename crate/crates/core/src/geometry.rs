//! Curvature of chart-parametrized Riemannian metrics.
//!
//! Conventions follow Misner, Thorne and Wheeler:
//! `R^a_{bmn} = d_m G^a_{bn} - d_n G^a_{bm} + G^a_{sm} G^s_{bn} - G^a_{sn} G^s_{bm}`,
//! `Ric_{bn} = R^a_{ban}`, and the Laplacian is positive (`-div grad`).
//!
//! Tensor arrays are flat and row-major: `christoffel[(a*n + m)*n + k]`
//! holds `G^a_{mk}`.
//!
//! # Laplacian on forms
//!
//! [`derham_laplacian_tensor`] evaluates, for a p-form with p at most 2,
//!
//! ```text
//! (Da)_K = -a_{K;i}^{;i}
//!        + sum_v (-1)^v  R^h{}_i{}^i{}_{k_v} a_{h K\k_v}
//!        + 2 sum_{u<v} (-1)^{u+v} R^h{}_{k_v}{}^i{}_{k_u} a_{i h K\k_u\k_v}
//! ```
//!
//! The dotted upper indices are read as interleaved slots, so the first
//! curvature factor is `g^{ij} R^h_{ijk} = -Ric^h_k`. With this reading the
//! formula is the Weitzenbock identity: `Da = -a_{;i}^{;i} + Ric(a)` on
//! 1-forms, and the area form of a surface is harmonic.
//!
//! For the metric itself, [`laplacian_of_metric`] treats `g_{mn}` as a 1-form
//! in its first index carrying the second index along passively:
//! covariant derivatives act on both slots, curvature terms on the first.
//! That gives `Dg = -g_{;i}^{;i} + Ric = Ric`. The rank-2 formula applied
//! verbatim to the symmetric `g` is reported alongside; on the round sphere
//! it evaluates to `-2 Ric`.

use std::fmt::Debug;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", rename_all = "snake_case")]
pub enum DerivativeMode<T: Real> {
    #[default]
    ClosedForm,
    /// Fourth-order central differences with this absolute step.
    CentralDifference(T),
}

/// Metric components and their first two coordinate derivatives at a point.
///
/// `dg[(s*n + m)*n + k] = d_s g_{mk}`, `ddg[((r*n + s)*n + m)*n + k] = d_r d_s g_{mk}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricJet<T> {
    pub dimension: usize,
    pub g: Vec<T>,
    pub dg: Vec<T>,
    pub ddg: Vec<T>,
}

impl<T: Real> MetricJet<T> {
    fn zeros(n: usize) -> Self {
        Self {
            dimension: n,
            g: vec![T::zero(); n * n],
            dg: vec![T::zero(); n * n * n],
            ddg: vec![T::zero(); n * n * n * n],
        }
    }

    fn diagonal_set(&mut self, m: usize, value: T, d: &[(usize, T)], dd: &[(usize, usize, T)]) {
        let n = self.dimension;
        self.g[m * n + m] = value;
        for &(s, v) in d {
            self.dg[(s * n + m) * n + m] = v;
        }
        for &(r, s, v) in dd {
            self.ddg[((r * n + s) * n + m) * n + m] = v;
        }
    }
}

/// A coordinate chart with a metric on it.
pub trait MetricFamily<T: Real>: Debug + Send + Sync {
    fn name(&self) -> String;
    fn dimension(&self) -> usize;
    /// Coordinate box used for quadrature.
    fn chart_domain(&self) -> Vec<(T, T)>;
    /// Whether the chart is valid at `x`.
    fn contains(&self, x: &[T]) -> bool;
    /// `g_{mn}(x)`, row-major.
    fn components(&self, x: &[T]) -> Vec<T>;
    /// Exact derivatives, when the family knows them.
    fn jet(&self, _x: &[T]) -> Option<MetricJet<T>> {
        None
    }
}

fn strictly_inside<T: Real>(x: &[T], domain: &[(T, T)]) -> bool {
    x.len() == domain.len() && x.iter().zip(domain).all(|(v, (a, b))| *v > *a && *v < *b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Euclidean {
    pub dimension: usize,
}

impl<T: Real> MetricFamily<T> for Euclidean {
    fn name(&self) -> String {
        format!("euclidean{}", self.dimension)
    }
    fn dimension(&self) -> usize {
        self.dimension
    }
    fn chart_domain(&self) -> Vec<(T, T)> {
        vec![(-T::one(), T::one()); self.dimension]
    }
    fn contains(&self, x: &[T]) -> bool {
        x.len() == self.dimension
    }
    fn components(&self, _x: &[T]) -> Vec<T> {
        let n = self.dimension;
        (0..n * n).map(|k| if k % (n + 1) == 0 { T::one() } else { T::zero() }).collect()
    }
    fn jet(&self, x: &[T]) -> Option<MetricJet<T>> {
        let mut j = MetricJet::zeros(self.dimension);
        j.g = self.components(x);
        Some(j)
    }
}

/// Round sphere in `(theta, phi)`: `g = r^2 diag(1, sin^2 theta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundSphere<T> {
    pub radius: T,
}

impl<T: Real> MetricFamily<T> for RoundSphere<T> {
    fn name(&self) -> String {
        format!("sphere(r={})", self.radius)
    }
    fn dimension(&self) -> usize {
        2
    }
    fn chart_domain(&self) -> Vec<(T, T)> {
        vec![(T::zero(), T::PI()), (T::zero(), T::two() * T::PI())]
    }
    fn contains(&self, x: &[T]) -> bool {
        x.len() == 2 && x[0] > T::zero() && x[0] < T::PI()
    }
    fn components(&self, x: &[T]) -> Vec<T> {
        let r2 = self.radius * self.radius;
        let s = x[0].sin();
        vec![r2, T::zero(), T::zero(), r2 * s * s]
    }
    fn jet(&self, x: &[T]) -> Option<MetricJet<T>> {
        ConformalSphere { radius: self.radius, epsilon: T::zero() }.jet(x)
    }
}

/// `e^{2 eps cos theta}` times the round sphere of radius `r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConformalSphere<T> {
    pub radius: T,
    pub epsilon: T,
}

impl<T: Real> MetricFamily<T> for ConformalSphere<T> {
    fn name(&self) -> String {
        format!("conformal_sphere(r={}, eps={})", self.radius, self.epsilon)
    }
    fn dimension(&self) -> usize {
        2
    }
    fn chart_domain(&self) -> Vec<(T, T)> {
        RoundSphere { radius: self.radius }.chart_domain()
    }
    fn contains(&self, x: &[T]) -> bool {
        RoundSphere { radius: self.radius }.contains(x)
    }
    fn components(&self, x: &[T]) -> Vec<T> {
        let r2 = self.radius * self.radius;
        let (s, c) = x[0].sin_cos();
        let w = (T::two() * self.epsilon * c).exp();
        vec![r2 * w, T::zero(), T::zero(), r2 * s * s * w]
    }
    fn jet(&self, x: &[T]) -> Option<MetricJet<T>> {
        let r2 = self.radius * self.radius;
        let eps = self.epsilon;
        let (s, c) = x[0].sin_cos();
        let w = (T::two() * eps * c).exp();
        let w1 = -T::two() * eps * s * w;
        let w2 = (T::lit(4.0) * eps * eps * s * s - T::two() * eps * c) * w;
        let (q, q1, q2) = (s * s, T::two() * s * c, T::two() * (c * c - s * s));
        let mut j = MetricJet::zeros(2);
        j.diagonal_set(0, r2 * w, &[(0, r2 * w1)], &[(0, 0, r2 * w2)]);
        j.diagonal_set(
            1,
            r2 * q * w,
            &[(0, r2 * (q1 * w + q * w1))],
            &[(0, 0, r2 * (q2 * w + T::two() * q1 * w1 + q * w2))],
        );
        Some(j)
    }
}

/// Flat plane in polar coordinates `(r, phi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarPlane<T> {
    pub outer_radius: T,
}

impl<T: Real> MetricFamily<T> for PolarPlane<T> {
    fn name(&self) -> String {
        "polar_plane".into()
    }
    fn dimension(&self) -> usize {
        2
    }
    fn chart_domain(&self) -> Vec<(T, T)> {
        vec![(T::zero(), self.outer_radius), (T::zero(), T::two() * T::PI())]
    }
    fn contains(&self, x: &[T]) -> bool {
        x.len() == 2 && x[0] > T::zero()
    }
    fn components(&self, x: &[T]) -> Vec<T> {
        vec![T::one(), T::zero(), T::zero(), x[0] * x[0]]
    }
    fn jet(&self, x: &[T]) -> Option<MetricJet<T>> {
        let mut j = MetricJet::zeros(2);
        j.diagonal_set(0, T::one(), &[], &[]);
        j.diagonal_set(1, x[0] * x[0], &[(0, T::two() * x[0])], &[(0, 0, T::two())]);
        Some(j)
    }
}

/// Flat torus with the given side lengths; the chart is periodic.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatTorus<T> {
    pub lengths: Vec<T>,
}

impl<T: Real> MetricFamily<T> for FlatTorus<T> {
    fn name(&self) -> String {
        "flat_torus".into()
    }
    fn dimension(&self) -> usize {
        self.lengths.len()
    }
    fn chart_domain(&self) -> Vec<(T, T)> {
        self.lengths.iter().map(|l| (T::zero(), *l)).collect()
    }
    fn contains(&self, x: &[T]) -> bool {
        x.len() == self.lengths.len()
    }
    fn components(&self, x: &[T]) -> Vec<T> {
        Euclidean { dimension: self.lengths.len() }.components(x)
    }
    fn jet(&self, x: &[T]) -> Option<MetricJet<T>> {
        Euclidean { dimension: self.lengths.len() }.jet(x)
    }
}

/// `g = c I + A A^T` with `A_{mk}(x) = b_{mk} + a_{mk} sin(w_{mk}.x + p_{mk})`.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomSmoothMetric<T> {
    dimension: usize,
    offset: T,
    base: Vec<T>,
    amplitude: Vec<T>,
    wave: Vec<Vec<T>>,
    phase: Vec<T>,
}

impl<T: Real> RandomSmoothMetric<T> {
    pub fn new(dimension: usize, amplitude: T, seed: u64) -> Result<Self> {
        if !(2..=3).contains(&dimension) {
            return Err(Error::validation("random metrics are 2-D or 3-D"));
        }
        if !(amplitude >= T::zero()) {
            return Err(Error::validation("amplitude must be non-negative"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nn = dimension * dimension;
        let mut u = |lo: f64, hi: f64| T::lit(rng.gen_range(lo..hi));
        let base = (0..nn).map(|_| u(-0.5, 0.5)).collect();
        let amp = (0..nn).map(|_| amplitude * u(-1.0, 1.0)).collect();
        let wave = (0..nn).map(|_| (0..dimension).map(|_| u(-2.0, 2.0)).collect()).collect();
        let phase = (0..nn).map(|_| u(0.0, std::f64::consts::TAU)).collect();
        Ok(Self { dimension, offset: T::one(), base, amplitude: amp, wave, phase })
    }

    /// `A`, `d_s A` and `d_r d_s A`.
    fn factor(&self, x: &[T]) -> (Vec<T>, Vec<T>, Vec<T>) {
        let n = self.dimension;
        let nn = n * n;
        let mut a = vec![T::zero(); nn];
        let mut da = vec![T::zero(); n * nn];
        let mut dda = vec![T::zero(); n * n * nn];
        for e in 0..nn {
            let w = &self.wave[e];
            let arg = w.iter().zip(x).map(|(wi, xi)| *wi * *xi).sum::<T>() + self.phase[e];
            let (s, c) = arg.sin_cos();
            a[e] = self.base[e] + self.amplitude[e] * s;
            for si in 0..n {
                da[si * nn + e] = self.amplitude[e] * c * w[si];
                for ri in 0..n {
                    dda[(ri * n + si) * nn + e] = -self.amplitude[e] * s * w[ri] * w[si];
                }
            }
        }
        (a, da, dda)
    }
}

fn aat<T: Real>(n: usize, p: &[T], q: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); n * n];
    for m in 0..n {
        for k in 0..n {
            out[m * n + k] = (0..n).map(|l| p[m * n + l] * q[k * n + l]).sum();
        }
    }
    out
}

impl<T: Real> MetricFamily<T> for RandomSmoothMetric<T> {
    fn name(&self) -> String {
        format!("random_smooth{}", self.dimension)
    }
    fn dimension(&self) -> usize {
        self.dimension
    }
    fn chart_domain(&self) -> Vec<(T, T)> {
        vec![(-T::one(), T::one()); self.dimension]
    }
    fn contains(&self, x: &[T]) -> bool {
        x.len() == self.dimension
    }
    fn components(&self, x: &[T]) -> Vec<T> {
        self.jet(x).map(|j| j.g).unwrap_or_default()
    }
    fn jet(&self, x: &[T]) -> Option<MetricJet<T>> {
        let n = self.dimension;
        let nn = n * n;
        let (a, da, dda) = self.factor(x);
        let mut j = MetricJet::zeros(n);
        j.g = aat(n, &a, &a);
        for m in 0..n {
            j.g[m * n + m] += self.offset;
        }
        for s in 0..n {
            let ds = &da[s * nn..(s + 1) * nn];
            let (p, q) = (aat(n, ds, &a), aat(n, &a, ds));
            for e in 0..nn {
                j.dg[s * nn + e] = p[e] + q[e];
            }
            for r in 0..n {
                let dr = &da[r * nn..(r + 1) * nn];
                let drs = &dda[(r * n + s) * nn..(r * n + s + 1) * nn];
                let terms = [aat(n, drs, &a), aat(n, ds, dr), aat(n, dr, ds), aat(n, &a, drs)];
                for e in 0..nn {
                    j.ddg[(r * n + s) * nn + e] = terms.iter().map(|t| t[e]).sum();
                }
            }
        }
        Some(j)
    }
}

type MetricFn<T> = dyn Fn(&[T]) -> Vec<T> + Send + Sync;

/// Metric from a closure; derivatives are only available by differences.
#[derive(Clone)]
pub struct FnMetric<T: Real> {
    pub name: String,
    pub domain: Vec<(T, T)>,
    f: Arc<MetricFn<T>>,
}

impl<T: Real> FnMetric<T> {
    pub fn new(name: impl Into<String>, domain: Vec<(T, T)>, f: impl Fn(&[T]) -> Vec<T> + Send + Sync + 'static) -> Self {
        Self { name: name.into(), domain, f: Arc::new(f) }
    }
}

impl<T: Real> Debug for FnMetric<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FnMetric").field("name", &self.name).field("domain", &self.domain).finish()
    }
}

impl<T: Real> MetricFamily<T> for FnMetric<T> {
    fn name(&self) -> String {
        self.name.clone()
    }
    fn dimension(&self) -> usize {
        self.domain.len()
    }
    fn chart_domain(&self) -> Vec<(T, T)> {
        self.domain.clone()
    }
    fn contains(&self, x: &[T]) -> bool {
        strictly_inside(x, &self.domain)
    }
    fn components(&self, x: &[T]) -> Vec<T> {
        (self.f)(x)
    }
}

/// Serializable selection of a built-in metric family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricSpec<T: Real> {
    Euclidean { dimension: usize },
    Sphere { radius: T },
    ConformalSphere { radius: T, epsilon: T },
    PolarPlane { outer_radius: T },
    FlatTorus { lengths: Vec<T> },
    RandomSmooth { dimension: usize, amplitude: T, seed: u64 },
}

impl<T: Real> MetricSpec<T> {
    pub const FAMILIES: [&'static str; 6] =
        ["euclidean", "sphere", "conformal_sphere", "polar_plane", "flat_torus", "random_smooth"];

    pub fn build(&self, mode: DerivativeMode<T>) -> Result<ParametrizedMetric<T>> {
        let positive = |v: T, what: &str| {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(Error::validation(format!("{what} must be positive")))
            }
        };
        let family: Arc<dyn MetricFamily<T>> = match self {
            Self::Euclidean { dimension } => {
                if !(2..=3).contains(dimension) {
                    return Err(Error::validation("dimension must be 2 or 3"));
                }
                Arc::new(Euclidean { dimension: *dimension })
            }
            Self::Sphere { radius } => {
                positive(*radius, "radius")?;
                Arc::new(RoundSphere { radius: *radius })
            }
            Self::ConformalSphere { radius, epsilon } => {
                positive(*radius, "radius")?;
                if !epsilon.is_finite() {
                    return Err(Error::validation("epsilon must be finite"));
                }
                Arc::new(ConformalSphere { radius: *radius, epsilon: *epsilon })
            }
            Self::PolarPlane { outer_radius } => {
                positive(*outer_radius, "outer_radius")?;
                Arc::new(PolarPlane { outer_radius: *outer_radius })
            }
            Self::FlatTorus { lengths } => {
                if !(2..=3).contains(&lengths.len()) {
                    return Err(Error::validation("torus dimension must be 2 or 3"));
                }
                for l in lengths {
                    positive(*l, "torus length")?;
                }
                Arc::new(FlatTorus { lengths: lengths.clone() })
            }
            Self::RandomSmooth { dimension, amplitude, seed } => {
                Arc::new(RandomSmoothMetric::new(*dimension, *amplitude, *seed)?)
            }
        };
        ParametrizedMetric::new(family, mode)
    }
}

#[derive(Debug, Clone)]
pub struct ParametrizedMetric<T: Real> {
    family: Arc<dyn MetricFamily<T>>,
    mode: DerivativeMode<T>,
}

impl<T: Real> ParametrizedMetric<T> {
    pub fn new(family: Arc<dyn MetricFamily<T>>, mode: DerivativeMode<T>) -> Result<Self> {
        if !(2..=3).contains(&family.dimension()) {
            return Err(Error::validation("metric dimension must be 2 or 3"));
        }
        if let DerivativeMode::CentralDifference(h) = mode {
            if !(h > T::zero() && h.is_finite()) {
                return Err(Error::validation("difference step must be positive"));
            }
        }
        Ok(Self { family, mode })
    }

    pub fn closed_form(family: impl MetricFamily<T> + 'static) -> Self {
        Self::new(Arc::new(family), DerivativeMode::ClosedForm).expect("family dimension")
    }

    pub fn finite_difference(family: impl MetricFamily<T> + 'static, step: T) -> Result<Self> {
        Self::new(Arc::new(family), DerivativeMode::CentralDifference(step))
    }

    pub fn family(&self) -> &dyn MetricFamily<T> {
        self.family.as_ref()
    }

    pub fn mode(&self) -> DerivativeMode<T> {
        self.mode
    }

    pub fn dimension(&self) -> usize {
        self.family.dimension()
    }

    pub fn components(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_point(x, T::zero())?;
        Ok(self.family.components(x))
    }

    fn check_point(&self, x: &[T], reach: T) -> Result<()> {
        let n = self.dimension();
        if x.len() != n {
            return Err(Error::validation(format!("point has {} coordinates, chart has {n}", x.len())));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("point must be finite"));
        }
        for axis in 0..n {
            for sign in [-T::one(), T::one()] {
                let mut y = x.to_vec();
                y[axis] += sign * reach;
                if !self.family.contains(&y) {
                    return Err(Error::validation("stencil exits the chart"));
                }
            }
        }
        Ok(())
    }

    pub fn jet(&self, x: &[T]) -> Result<MetricJet<T>> {
        match self.mode {
            DerivativeMode::ClosedForm => {
                self.check_point(x, T::zero())?;
                self.family
                    .jet(x)
                    .ok_or_else(|| Error::validation(format!("{} has no closed-form derivatives", self.family.name())))
            }
            DerivativeMode::CentralDifference(h) => {
                self.check_point(x, T::two() * h)?;
                let n = self.dimension();
                let (g, dg, ddg) = difference_jet(&|y: &[T]| self.family.components(y), x, h, n * n);
                Ok(MetricJet { dimension: n, g, dg, ddg })
            }
        }
    }
}

/// Value, gradient and Hessian of a vector-valued map by fourth-order
/// central differences. Layouts: `d[s*m + e]`, `dd[(r*n + s)*m + e]`.
pub fn difference_jet<T: Real>(
    f: &dyn Fn(&[T]) -> Vec<T>,
    x: &[T],
    h: T,
    m: usize,
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let n = x.len();
    let at = |shifts: &[(usize, i32)]| {
        let mut y = x.to_vec();
        for &(axis, k) in shifts {
            y[axis] += h * T::lit(k as f64);
        }
        f(&y)
    };
    let first = [(1, 8.0), (2, -1.0), (-1, -8.0), (-2, 1.0)];
    let v = f(x);
    let mut d = vec![T::zero(); n * m];
    let mut dd = vec![T::zero(); n * n * m];
    let twelve_h = T::lit(12.0) * h;
    for s in 0..n {
        let mut acc = vec![T::zero(); m];
        for (k, w) in first {
            for (a, b) in acc.iter_mut().zip(at(&[(s, k)])) {
                *a += T::lit(w) * b;
            }
        }
        for e in 0..m {
            d[s * m + e] = acc[e] / twelve_h;
        }
        // pure second derivative
        let mut acc = vec![T::zero(); m];
        for (k, w) in [(1, 16.0), (2, -1.0), (-1, 16.0), (-2, -1.0), (0, -30.0)] {
            for (a, b) in acc.iter_mut().zip(at(&[(s, k)])) {
                *a += T::lit(w) * b;
            }
        }
        for e in 0..m {
            dd[(s * n + s) * m + e] = acc[e] / (twelve_h * h);
        }
        for r in 0..s {
            let mut acc = vec![T::zero(); m];
            for (kr, wr) in first {
                for (ks, ws) in first {
                    for (a, b) in acc.iter_mut().zip(at(&[(r, kr), (s, ks)])) {
                        *a += T::lit(wr * ws) * b;
                    }
                }
            }
            for e in 0..m {
                let val = acc[e] / (twelve_h * twelve_h);
                dd[(r * n + s) * m + e] = val;
                dd[(s * n + r) * m + e] = val;
            }
        }
    }
    (v, d, dd)
}

/// Inverse and determinant of a symmetric positive-definite 2x2 or 3x3
/// matrix; `None` when a leading minor is not positive.
fn spd_inverse<T: Real>(g: &[T], n: usize) -> Option<(Vec<T>, T)> {
    let e = |i: usize, j: usize| g[i * n + j];
    match n {
        2 => {
            let det = e(0, 0) * e(1, 1) - e(0, 1) * e(1, 0);
            if !(e(0, 0) > T::zero() && det > T::zero()) {
                return None;
            }
            Some((vec![e(1, 1) / det, -e(0, 1) / det, -e(1, 0) / det, e(0, 0) / det], det))
        }
        3 => {
            let m2 = e(0, 0) * e(1, 1) - e(0, 1) * e(1, 0);
            let cof = |i: usize, j: usize| {
                let (r0, r1) = ((i + 1) % 3, (i + 2) % 3);
                let (c0, c1) = ((j + 1) % 3, (j + 2) % 3);
                e(r0, c0) * e(r1, c1) - e(r0, c1) * e(r1, c0)
            };
            let det = e(0, 0) * cof(0, 0) + e(0, 1) * cof(0, 1) + e(0, 2) * cof(0, 2);
            if !(e(0, 0) > T::zero() && m2 > T::zero() && det > T::zero()) {
                return None;
            }
            let mut inv = vec![T::zero(); 9];
            for i in 0..3 {
                for j in 0..3 {
                    inv[j * 3 + i] = cof(i, j) / det;
                }
            }
            Some((inv, det))
        }
        _ => None,
    }
}

/// Christoffel symbols, Riemann, Ricci and scalar curvature at a point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct CurvatureBundle<T: Real> {
    pub dimension: usize,
    /// `G^a_{mk}` at `(a*n + m)*n + k`.
    pub christoffel: Vec<T>,
    /// `R^a_{bmk}` at `((a*n + b)*n + m)*n + k`.
    pub riemann: Vec<T>,
    pub ricci: Vec<T>,
    pub scalar: T,
}

impl<T: Real> CurvatureBundle<T> {
    pub fn gamma(&self, a: usize, m: usize, k: usize) -> T {
        let n = self.dimension;
        self.christoffel[(a * n + m) * n + k]
    }

    pub fn riemann(&self, a: usize, b: usize, m: usize, k: usize) -> T {
        let n = self.dimension;
        self.riemann[((a * n + b) * n + m) * n + k]
    }

    pub fn ricci(&self, m: usize, k: usize) -> T {
        self.ricci[m * self.dimension + k]
    }

    /// Largest `|R^a_{bmk} + R^a_{bkm}|`.
    pub fn antisymmetry_residual(&self) -> T {
        self.max_over4(|a, b, m, k| self.riemann(a, b, m, k) + self.riemann(a, b, k, m))
    }

    /// Largest `|R^a_{bmk} + R^a_{mkb} + R^a_{kbm}|`.
    pub fn bianchi_residual(&self) -> T {
        self.max_over4(|a, b, m, k| self.riemann(a, b, m, k) + self.riemann(a, m, k, b) + self.riemann(a, k, b, m))
    }

    pub fn ricci_asymmetry(&self) -> T {
        let n = self.dimension;
        let mut worst = T::zero();
        for m in 0..n {
            for k in 0..n {
                worst = worst.max((self.ricci(m, k) - self.ricci(k, m)).abs());
            }
        }
        worst
    }

    fn max_over4(&self, f: impl Fn(usize, usize, usize, usize) -> T) -> T {
        let n = self.dimension;
        let mut worst = T::zero();
        for a in 0..n {
            for b in 0..n {
                for m in 0..n {
                    for k in 0..n {
                        worst = worst.max(f(a, b, m, k).abs());
                    }
                }
            }
        }
        worst
    }
}

/// Everything pointwise that the tensor operations need.
struct PointGeometry<T: Real> {
    n: usize,
    jet: MetricJet<T>,
    ginv: Vec<T>,
    det: T,
    gamma: Vec<T>,
    /// `d_s G^a_{mk}` at `((s*n + a)*n + m)*n + k`.
    dgamma: Vec<T>,
    riemann: Vec<T>,
    ricci: Vec<T>,
    scalar: T,
}

impl<T: Real> PointGeometry<T> {
    fn at(metric: &ParametrizedMetric<T>, x: &[T]) -> Result<Self> {
        let jet = metric.jet(x)?;
        let n = jet.dimension;
        let (ginv, det) = spd_inverse(&jet.g, n)
            .ok_or_else(|| Error::validation("metric is singular or not positive definite at this point"))?;
        let n2 = n * n;
        let n3 = n2 * n;
        let dg = |s: usize, m: usize, k: usize| jet.dg[(s * n + m) * n + k];
        let ddg = |r: usize, s: usize, m: usize, k: usize| jet.ddg[((r * n + s) * n + m) * n + k];
        // first-kind symbols C_{bmk} and their derivatives
        let mut c1 = vec![T::zero(); n3];
        let mut dc1 = vec![T::zero(); n * n3];
        for b in 0..n {
            for m in 0..n {
                for k in 0..n {
                    c1[(b * n + m) * n + k] = T::half() * (dg(m, b, k) + dg(k, b, m) - dg(b, m, k));
                    for s in 0..n {
                        dc1[s * n3 + (b * n + m) * n + k] =
                            T::half() * (ddg(s, m, b, k) + ddg(s, k, b, m) - ddg(s, b, m, k));
                    }
                }
            }
        }
        // d_s g^{ab} = -g^{ac} d_s g_{cd} g^{db}
        let mut dginv = vec![T::zero(); n * n2];
        for s in 0..n {
            for a in 0..n {
                for b in 0..n {
                    let mut acc = T::zero();
                    for c in 0..n {
                        for d in 0..n {
                            acc += ginv[a * n + c] * dg(s, c, d) * ginv[d * n + b];
                        }
                    }
                    dginv[s * n2 + a * n + b] = -acc;
                }
            }
        }
        let mut gamma = vec![T::zero(); n3];
        let mut dgamma = vec![T::zero(); n * n3];
        for a in 0..n {
            for m in 0..n {
                for k in 0..n {
                    let i = (a * n + m) * n + k;
                    gamma[i] = (0..n).map(|b| ginv[a * n + b] * c1[(b * n + m) * n + k]).sum();
                    for s in 0..n {
                        dgamma[s * n3 + i] = (0..n)
                            .map(|b| {
                                dginv[s * n2 + a * n + b] * c1[(b * n + m) * n + k]
                                    + ginv[a * n + b] * dc1[s * n3 + (b * n + m) * n + k]
                            })
                            .sum();
                    }
                }
            }
        }
        let g3 = |a: usize, m: usize, k: usize| gamma[(a * n + m) * n + k];
        let d3 = |s: usize, a: usize, m: usize, k: usize| dgamma[s * n3 + (a * n + m) * n + k];
        let mut riemann = vec![T::zero(); n2 * n2];
        for a in 0..n {
            for b in 0..n {
                for m in 0..n {
                    for k in 0..n {
                        let mut r = d3(m, a, b, k) - d3(k, a, b, m);
                        for s in 0..n {
                            r += g3(a, s, m) * g3(s, b, k) - g3(a, s, k) * g3(s, b, m);
                        }
                        riemann[((a * n + b) * n + m) * n + k] = r;
                    }
                }
            }
        }
        let mut ricci = vec![T::zero(); n2];
        for b in 0..n {
            for k in 0..n {
                ricci[b * n + k] = (0..n).map(|a| riemann[((a * n + b) * n + a) * n + k]).sum();
            }
        }
        let scalar = (0..n2).map(|e| ginv[e] * ricci[e]).sum();
        Ok(Self { n, jet, ginv, det, gamma, dgamma, riemann, ricci, scalar })
    }

    fn gamma(&self, a: usize, m: usize, k: usize) -> T {
        self.gamma[(a * self.n + m) * self.n + k]
    }

    fn dgamma(&self, s: usize, a: usize, m: usize, k: usize) -> T {
        let n = self.n;
        self.dgamma[((s * n + a) * n + m) * n + k]
    }

    fn riemann(&self, a: usize, b: usize, m: usize, k: usize) -> T {
        let n = self.n;
        self.riemann[((a * n + b) * n + m) * n + k]
    }

    /// `R^h{}_a{}^i{}_b = g^{ij} R^h_{ajb}`.
    fn raised(&self, h: usize, a: usize, i: usize, b: usize) -> T {
        (0..self.n).map(|j| self.ginv[i * self.n + j] * self.riemann(h, a, j, b)).sum()
    }

    fn bundle(&self) -> CurvatureBundle<T> {
        CurvatureBundle {
            dimension: self.n,
            christoffel: self.gamma.clone(),
            riemann: self.riemann.clone(),
            ricci: self.ricci.clone(),
            scalar: self.scalar,
        }
    }
}

pub fn christoffel<T: Real>(metric: &ParametrizedMetric<T>, x: &[T]) -> Result<Vec<T>> {
    Ok(PointGeometry::at(metric, x)?.gamma)
}

pub fn curvature<T: Real>(metric: &ParametrizedMetric<T>, x: &[T]) -> Result<CurvatureBundle<T>> {
    Ok(PointGeometry::at(metric, x)?.bundle())
}

/// Covariant tensor of `slots` indices with its coordinate derivatives,
/// flat layouts `v[K]`, `d[s*len + K]`, `dd[(r*n + s)*len + K]`.
struct TensorJet<T> {
    slots: usize,
    v: Vec<T>,
    d: Vec<T>,
    dd: Vec<T>,
}

fn digits(mut flat: usize, n: usize, slots: usize) -> Vec<usize> {
    let mut out = vec![0; slots];
    for s in (0..slots).rev() {
        out[s] = flat % n;
        flat /= n;
    }
    out
}

fn undigits(idx: &[usize], n: usize) -> usize {
    idx.iter().fold(0, |acc, i| acc * n + i)
}

/// First covariant derivative `nab[i*len + K] = T_{K;i}` and the contracted
/// second derivative `g^{ij} T_{K;ij}`.
fn covariant_derivatives<T: Real>(pg: &PointGeometry<T>, t: &TensorJet<T>) -> (Vec<T>, Vec<T>) {
    let n = pg.n;
    let len = t.v.len();
    let swap = |k: usize, slot: usize, m: usize| {
        let mut idx = digits(k, n, t.slots);
        idx[slot] = m;
        undigits(&idx, n)
    };
    let mut nab = vec![T::zero(); n * len];
    // d_j (T_{K;i}) at [(j*n + i)*len + K]
    let mut dnab = vec![T::zero(); n * n * len];
    for k in 0..len {
        let idx = digits(k, n, t.slots);
        for i in 0..n {
            let mut acc = t.d[i * len + k];
            for (slot, &ks) in idx.iter().enumerate() {
                for m in 0..n {
                    acc -= pg.gamma(m, i, ks) * t.v[swap(k, slot, m)];
                }
            }
            nab[i * len + k] = acc;
            for j in 0..n {
                let mut acc = t.dd[(j * n + i) * len + k];
                for (slot, &ks) in idx.iter().enumerate() {
                    for m in 0..n {
                        let km = swap(k, slot, m);
                        acc -= pg.dgamma(j, m, i, ks) * t.v[km] + pg.gamma(m, i, ks) * t.d[j * len + km];
                    }
                }
                dnab[(j * n + i) * len + k] = acc;
            }
        }
    }
    let mut rough = vec![T::zero(); len];
    for k in 0..len {
        let idx = digits(k, n, t.slots);
        let mut acc = T::zero();
        for i in 0..n {
            for j in 0..n {
                // T_{K;ij} = d_j T_{K;i} - G^m_{ji} T_{K;m} - sum_s G^m_{j k_s} T_{..m..;i}
                let mut h = dnab[(j * n + i) * len + k];
                for m in 0..n {
                    h -= pg.gamma(m, j, i) * nab[m * len + k];
                }
                for (slot, &ks) in idx.iter().enumerate() {
                    for m in 0..n {
                        h -= pg.gamma(m, j, ks) * nab[i * len + swap(k, slot, m)];
                    }
                }
                acc += pg.ginv[i * n + j] * h;
            }
        }
        rough[k] = acc;
    }
    (nab, rough)
}

/// The Laplacian formula on a tensor whose first `rank` slots are form
/// slots and whose remaining slots are passive.
fn form_laplacian<T: Real>(pg: &PointGeometry<T>, t: &TensorJet<T>, rank: usize) -> Vec<T> {
    let n = pg.n;
    let (_, rough) = covariant_derivatives(pg, t);
    let len = t.v.len();
    let mut out: Vec<T> = rough.iter().map(|v| -*v).collect();
    for (k, o) in out.iter_mut().enumerate() {
        let idx = digits(k, n, t.slots);
        let (form, passive) = idx.split_at(rank);
        for v in 0..rank {
            let sign = if (v + 1) % 2 == 0 { T::one() } else { -T::one() };
            for h in 0..n {
                let mut c = T::zero();
                for i in 0..n {
                    c += pg.raised(h, i, i, form[v]);
                }
                let mut j = vec![h];
                j.extend(form.iter().enumerate().filter(|(s, _)| *s != v).map(|(_, x)| *x));
                j.extend_from_slice(passive);
                *o += sign * c * t.v[undigits(&j, n)];
            }
        }
        for v in 0..rank {
            for u in 0..v {
                let sign = if (u + v + 2) % 2 == 0 { T::one() } else { -T::one() };
                for h in 0..n {
                    for i in 0..n {
                        let mut j = vec![i, h];
                        j.extend(form.iter().enumerate().filter(|(s, _)| *s != u && *s != v).map(|(_, x)| *x));
                        j.extend_from_slice(passive);
                        *o += T::two() * sign * pg.raised(h, form[v], i, form[u]) * t.v[undigits(&j, n)];
                    }
                }
            }
        }
    }
    debug_assert_eq!(out.len(), len);
    out
}

fn metric_as_tensor<T: Real>(pg: &PointGeometry<T>) -> TensorJet<T> {
    TensorJet { slots: 2, v: pg.jet.g.clone(), d: pg.jet.dg.clone(), dd: pg.jet.ddg.clone() }
}

/// Largest `|g_{mk;s}|`.
pub fn covariant_constancy_check<T: Real>(metric: &ParametrizedMetric<T>, x: &[T]) -> Result<T> {
    let pg = PointGeometry::at(metric, x)?;
    let (nab, _) = covariant_derivatives(&pg, &metric_as_tensor(&pg));
    Ok(nab.iter().fold(T::zero(), |m, v| m.max(v.abs())))
}

type FieldFn<T> = dyn Fn(&[T]) -> Vec<T> + Send + Sync;

/// A 1-form or 2-form given by its covariant components in chart coordinates.
#[derive(Clone)]
pub struct AlternatingTensorField<T: Real> {
    rank: usize,
    dimension: usize,
    /// Step for differentiating the components.
    pub step: T,
    f: Arc<FieldFn<T>>,
}

impl<T: Real> Debug for AlternatingTensorField<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AlternatingTensorField").field("rank", &self.rank).field("dimension", &self.dimension).finish()
    }
}

impl<T: Real> AlternatingTensorField<T> {
    /// `f` returns `dimension^rank` components, row-major.
    pub fn new(rank: usize, dimension: usize, f: impl Fn(&[T]) -> Vec<T> + Send + Sync + 'static) -> Result<Self> {
        if !(1..=2).contains(&rank) {
            return Err(Error::validation(format!("unsupported form rank {rank}")));
        }
        if !(2..=3).contains(&dimension) {
            return Err(Error::validation("dimension must be 2 or 3"));
        }
        Ok(Self { rank, dimension, step: T::lit(1e-3), f: Arc::new(f) })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn components(&self, x: &[T]) -> Result<Vec<T>> {
        let v = (self.f)(x);
        if v.len() != self.dimension.pow(self.rank as u32) {
            return Err(Error::validation("field returned the wrong number of components"));
        }
        Ok(v)
    }

    /// Largest `|a_{mk} + a_{km}|`; zero for 1-forms.
    pub fn antisymmetry_residual(&self, x: &[T]) -> Result<T> {
        let v = self.components(x)?;
        let n = self.dimension;
        if self.rank == 1 {
            return Ok(T::zero());
        }
        let mut worst = T::zero();
        for m in 0..n {
            for k in 0..n {
                worst = worst.max((v[m * n + k] + v[k * n + m]).abs());
            }
        }
        Ok(worst)
    }
}

pub fn derham_laplacian_tensor<T: Real>(
    metric: &ParametrizedMetric<T>,
    field: &AlternatingTensorField<T>,
    x: &[T],
) -> Result<Vec<T>> {
    if field.dimension != metric.dimension() {
        return Err(Error::validation("field and metric dimensions differ"));
    }
    let pg = PointGeometry::at(metric, x)?;
    metric.check_point(x, T::two() * field.step)?;
    let len = field.dimension.pow(field.rank as u32);
    field.components(x)?;
    if field.antisymmetry_residual(x)? > T::lit(1e-12) * T::one().max(field.components(x)?.iter().fold(T::zero(), |m, v| m.max(v.abs()))) {
        return Err(Error::validation("2-form components are not antisymmetric"));
    }
    let (v, d, dd) = difference_jet(&*field.f, x, field.step, len);
    Ok(form_laplacian(&pg, &TensorJet { slots: field.rank, v, d, dd }, field.rank))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MetricLaplacianReport<T: Real> {
    pub dimension: usize,
    /// `Dg` with `g` read as a 1-form carrying a passive index.
    pub laplacian: Vec<T>,
    pub ricci: Vec<T>,
    /// `laplacian - ricci`, componentwise.
    pub difference: Vec<T>,
    pub difference_norm: T,
    /// The rough term `g_{mk;i}^{;i}` alone.
    pub rough_term_norm: T,
    /// The rank-2 formula applied verbatim to the symmetric `g`.
    pub verbatim_rank2: Vec<T>,
}

pub fn laplacian_of_metric<T: Real>(metric: &ParametrizedMetric<T>, x: &[T]) -> Result<MetricLaplacianReport<T>> {
    let pg = PointGeometry::at(metric, x)?;
    let t = metric_as_tensor(&pg);
    let (_, rough) = covariant_derivatives(&pg, &t);
    let laplacian = form_laplacian(&pg, &t, 1);
    let verbatim_rank2 = form_laplacian(&pg, &t, 2);
    let difference: Vec<T> = laplacian.iter().zip(&pg.ricci).map(|(a, b)| *a - *b).collect();
    let frob = |v: &[T]| v.iter().map(|e| *e * *e).sum::<T>().sqrt();
    Ok(MetricLaplacianReport {
        dimension: pg.n,
        difference_norm: frob(&difference),
        rough_term_norm: frob(&rough),
        laplacian,
        ricci: pg.ricci.clone(),
        difference,
        verbatim_rank2,
    })
}

/// Midpoint quadrature nodes per axis over the chart box, or over `domain`
/// when given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", deny_unknown_fields)]
pub struct QuadratureSpec<T: Real> {
    pub nodes: Vec<usize>,
    #[serde(default)]
    pub domain: Option<Vec<(T, T)>>,
}

impl<T: Real> QuadratureSpec<T> {
    pub fn new(nodes: Vec<usize>) -> Self {
        Self { nodes, domain: None }
    }
}

/// Midpoint nodes and cell volume.
fn quadrature_nodes<T: Real>(metric: &ParametrizedMetric<T>, quad: &QuadratureSpec<T>) -> Result<(Vec<Vec<T>>, T)> {
    let n = metric.dimension();
    let chart = metric.family().chart_domain();
    let domain = quad.domain.clone().unwrap_or_else(|| chart.clone());
    if quad.nodes.len() != n || domain.len() != n {
        return Err(Error::validation("quadrature dimension does not match the metric"));
    }
    if quad.nodes.contains(&0) {
        return Err(Error::validation("quadrature needs at least one node per axis"));
    }
    for ((a, b), (ca, cb)) in domain.iter().zip(&chart) {
        if !(a < b) || *a < *ca || *b > *cb {
            return Err(Error::validation("quadrature leaves the chart"));
        }
    }
    let widths: Vec<T> = domain.iter().zip(&quad.nodes).map(|((a, b), k)| (*b - *a) / T::from_count(*k)).collect();
    let total: usize = quad.nodes.iter().product();
    let mut nodes = Vec::with_capacity(total);
    for flat in 0..total {
        let mut rem = flat;
        let mut x = vec![T::zero(); n];
        for axis in (0..n).rev() {
            let i = rem % quad.nodes[axis];
            rem /= quad.nodes[axis];
            x[axis] = domain[axis].0 + widths[axis] * (T::from_count(i) + T::half());
        }
        nodes.push(x);
    }
    Ok((nodes, widths.iter().copied().fold(T::one(), |a, b| a * b)))
}

/// Scalar curvature and volume density `sqrt(det g)` at each quadrature node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct CurvatureSample<T: Real> {
    pub point: Vec<T>,
    pub scalar: T,
    pub volume_density: T,
}

pub fn curvature_samples<T: Real>(
    metric: &ParametrizedMetric<T>,
    quad: &QuadratureSpec<T>,
) -> Result<(Vec<CurvatureSample<T>>, T)> {
    let (nodes, cell) = quadrature_nodes(metric, quad)?;
    let samples = nodes
        .into_iter()
        .map(|x| {
            let pg = PointGeometry::at(metric, &x)?;
            Ok(CurvatureSample { point: x, scalar: pg.scalar, volume_density: pg.det.sqrt() })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((samples, cell))
}

/// `sum R sqrt(det g) dV` over midpoint nodes, in fixed node order.
pub fn hilbert_action<T: Real>(metric: &ParametrizedMetric<T>, quad: &QuadratureSpec<T>) -> Result<T> {
    let (samples, cell) = curvature_samples(metric, quad)?;
    Ok(samples.iter().map(|s| s.scalar * s.volume_density).sum::<T>() * cell)
}
