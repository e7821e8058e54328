//! Lowest eigenpair of a symmetric operator: the minimizer of `<v, A v>`
//! over unit vectors.
//!
//! The solver runs shifted inverse iteration from a seeded start vector and
//! keeps the shift below the spectrum at all times, so the Rayleigh quotient
//! of the iterates never increases. Tridiagonal operators are factored
//! directly (`LDL^T`, whose inertia also certifies the shift); everything
//! else uses conjugate-gradient inner solves.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{axpy, dot, norm, Real};

/// Matrix-free symmetric operator.
pub trait SymmetricOperator<T: Real> {
    fn dimension(&self) -> usize;

    /// `y = A x`
    fn apply(&self, x: &[T], y: &mut [T]);

    /// Tridiagonal form, when the operator has one.
    fn tridiagonal(&self) -> Option<Tridiagonal<T>> {
        None
    }

    /// A number no larger than the smallest eigenvalue, when cheaply known.
    fn spectrum_lower_bound(&self) -> Option<T> {
        self.tridiagonal().map(|t| t.gershgorin_lower())
    }
}

/// Symmetric tridiagonal matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Tridiagonal<T: Real> {
    pub diagonal: Vec<T>,
    /// `off[i]` couples rows `i` and `i + 1`.
    pub off: Vec<T>,
}

impl<T: Real> Tridiagonal<T> {
    pub fn new(diagonal: Vec<T>, off: Vec<T>) -> Result<Self> {
        if diagonal.is_empty() || off.len() + 1 != diagonal.len() {
            return Err(Error::validation("tridiagonal needs n diagonal and n-1 off-diagonal entries"));
        }
        Ok(Self { diagonal, off })
    }

    pub fn diagonal_matrix(diagonal: Vec<T>) -> Self {
        let off = vec![T::zero(); diagonal.len().saturating_sub(1)];
        Self { diagonal, off }
    }

    pub fn gershgorin_lower(&self) -> T {
        let n = self.diagonal.len();
        (0..n)
            .map(|i| {
                let left = if i > 0 { self.off[i - 1].abs() } else { T::zero() };
                let right = if i + 1 < n { self.off[i].abs() } else { T::zero() };
                self.diagonal[i] - left - right
            })
            .fold(T::infinity(), T::min)
    }

    fn scale(&self) -> T {
        self.diagonal
            .iter()
            .chain(&self.off)
            .fold(T::zero(), |m, v| m.max(v.abs()))
            .max(T::one())
    }
}

impl<T: Real> SymmetricOperator<T> for Tridiagonal<T> {
    fn dimension(&self) -> usize {
        self.diagonal.len()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        let n = self.diagonal.len();
        for i in 0..n {
            let mut acc = self.diagonal[i] * x[i];
            if i > 0 {
                acc += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                acc += self.off[i] * x[i + 1];
            }
            y[i] = acc;
        }
    }

    fn tridiagonal(&self) -> Option<Tridiagonal<T>> {
        Some(self.clone())
    }
}

/// Dense symmetric matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSymmetric<T: Real> {
    n: usize,
    entries: Vec<T>,
}

impl<T: Real> DenseSymmetric<T> {
    /// Stores the matrix as given; symmetry is checked by the solver probes.
    pub fn new(n: usize, entries: Vec<T>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::validation(format!("dense matrix needs {} entries", n * n)));
        }
        Ok(Self { n, entries })
    }

    pub fn identity(n: usize) -> Self {
        let mut entries = vec![T::zero(); n * n];
        (0..n).for_each(|i| entries[i * n + i] = T::one());
        Self { n, entries }
    }

    pub fn diagonal(values: &[T]) -> Self {
        let n = values.len();
        let mut entries = vec![T::zero(); n * n];
        values.iter().enumerate().for_each(|(i, v)| entries[i * n + i] = *v);
        Self { n, entries }
    }

    pub fn entry(&self, i: usize, j: usize) -> T {
        self.entries[i * self.n + j]
    }

    fn is_tridiagonal(&self) -> bool {
        (0..self.n).all(|i| (0..self.n).all(|j| i.abs_diff(j) <= 1 || self.entry(i, j) == T::zero()))
    }
}

impl<T: Real> SymmetricOperator<T> for DenseSymmetric<T> {
    fn dimension(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            *yi = dot(&self.entries[i * self.n..(i + 1) * self.n], x);
        }
    }

    fn tridiagonal(&self) -> Option<Tridiagonal<T>> {
        if !self.is_tridiagonal() {
            return None;
        }
        // only meaningful when the band is symmetric; asymmetric input is
        // rejected by the probes before this is used
        let diagonal = (0..self.n).map(|i| self.entry(i, i)).collect();
        let off = (0..self.n.saturating_sub(1)).map(|i| self.entry(i, i + 1)).collect();
        Some(Tridiagonal { diagonal, off })
    }

    fn spectrum_lower_bound(&self) -> Option<T> {
        let bound = (0..self.n)
            .map(|i| {
                let radius: T = (0..self.n).filter(|j| *j != i).map(|j| self.entry(i, j).abs()).sum();
                self.entry(i, i) - radius
            })
            .fold(T::infinity(), T::min);
        Some(bound)
    }
}

/// Operator given by a closure.
pub struct FnOperator<F> {
    n: usize,
    f: F,
}

impl<F> FnOperator<F> {
    pub fn new(n: usize, f: F) -> Self {
        Self { n, f }
    }
}

impl<T: Real, F: Fn(&[T], &mut [T])> SymmetricOperator<T> for FnOperator<F> {
    fn dimension(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        (self.f)(x, y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", deny_unknown_fields)]
pub struct SolverConfig<T: Real> {
    /// Residual tolerance, relative to `max(1, |value|)`.
    pub tolerance: T,
    pub max_iterations: usize,
    /// Initial spectral shift; must lie below the lowest eigenvalue. When
    /// absent the operator's lower bound (or a probe estimate) is used.
    #[serde(default)]
    pub shift: Option<T>,
    #[serde(default)]
    pub seed: u64,
}

impl<T: Real> Default for SolverConfig<T> {
    fn default() -> Self {
        Self { tolerance: T::lit(1e-9), max_iterations: 500, shift: None, seed: 0 }
    }
}

impl<T: Real> SolverConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > T::zero()) {
            return Err(Error::validation("solver tolerance must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::validation("solver needs max_iterations >= 1"));
        }
        if let Some(s) = self.shift {
            if !s.is_finite() {
                return Err(Error::validation("solver shift must be finite"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SolverResult<T: Real> {
    /// Unit-norm minimizer.
    pub minimizer: Vec<T>,
    /// Lowest eigenvalue estimate (final Rayleigh quotient).
    pub value: T,
    /// Multiplier of the normalization constraint; equal to `value`.
    pub multipliers: Vec<T>,
    /// `||A v - value v||`
    pub residual: T,
    pub iterations: usize,
    /// Rayleigh quotient of the start vector and of every iterate.
    pub rayleigh_history: Vec<T>,
}

/// `||A v - <v, A v> v||` for a unit vector `v`.
pub fn stationarity_residual<T: Real, A: SymmetricOperator<T> + ?Sized>(op: &A, v: &[T]) -> Result<T> {
    if v.len() != op.dimension() {
        return Err(Error::validation("vector length does not match operator"));
    }
    let nv = norm(v);
    if (nv - T::one()).abs() > T::lit(1e-10).max(T::epsilon() * T::lit(64.0)) {
        return Err(Error::validation(format!("vector norm {nv} is not 1")));
    }
    let mut av = vec![T::zero(); v.len()];
    op.apply(v, &mut av);
    let rq = dot(v, &av);
    axpy(-rq, v, &mut av);
    Ok(norm(&av))
}

/// Checks `<A v, w> = <v, A w>` on seeded probe vectors.
pub fn check_symmetry<T: Real, A: SymmetricOperator<T> + ?Sized>(op: &A, seed: u64) -> Result<()> {
    let n = op.dimension();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed);
    let mut av = vec![T::zero(); n];
    let mut aw = vec![T::zero(); n];
    for _ in 0..3 {
        let v = random_unit::<T>(&mut rng, n);
        let w = random_unit::<T>(&mut rng, n);
        op.apply(&v, &mut av);
        op.apply(&w, &mut aw);
        let lhs = dot(&av, &w);
        let rhs = dot(&v, &aw);
        let scale = norm(&av).max(norm(&aw)).max(T::one());
        if (lhs - rhs).abs() > T::lit(1e-10).max(T::epsilon() * T::lit(1e3)) * scale {
            return Err(Error::validation(format!(
                "operator is not symmetric: <Av,w> = {lhs}, <v,Aw> = {rhs}"
            )));
        }
    }
    Ok(())
}

fn random_unit<T: Real>(rng: &mut ChaCha8Rng, n: usize) -> Vec<T> {
    let mut v: Vec<T> = (0..n).map(|_| T::lit(rng.gen::<f64>() * 2.0 - 1.0)).collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    v
}

enum InnerSolve<T: Real> {
    Banded(Tridiagonal<T>),
    Krylov,
}

/// `LDL^T` of `T - shift I`. Returns `None` unless every pivot is positive
/// and well away from zero, i.e. unless the shift lies below the spectrum.
fn ldl_positive<T: Real>(t: &Tridiagonal<T>, shift: T) -> Option<Vec<T>> {
    let n = t.diagonal.len();
    let floor = T::epsilon() * T::lit(16.0) * t.scale();
    let mut d = Vec::with_capacity(n);
    for i in 0..n {
        let mut di = t.diagonal[i] - shift;
        if i > 0 {
            di -= t.off[i - 1] * t.off[i - 1] / d[i - 1];
        }
        if !(di > floor) {
            return None;
        }
        d.push(di);
    }
    Some(d)
}

fn ldl_solve<T: Real>(t: &Tridiagonal<T>, d: &[T], b: &[T]) -> Vec<T> {
    let n = d.len();
    let mut y = b.to_vec();
    for i in 1..n {
        let l = t.off[i - 1] / d[i - 1];
        y[i] = y[i] - l * y[i - 1];
    }
    for i in 0..n {
        y[i] /= d[i];
    }
    for i in (0..n.saturating_sub(1)).rev() {
        let l = t.off[i] / d[i];
        y[i] = y[i] - l * y[i + 1];
    }
    y
}

/// Outcome of a conjugate-gradient solve.
pub enum CgOutcome<T> {
    Converged { solution: Vec<T>, iterations: usize, residual: T },
    /// Hit a direction with `p^T M p <= 0`.
    Indefinite,
    Stalled { solution: Vec<T>, residual: T },
}

/// Conjugate gradients for `(A - shift I) x = b`, stopping at
/// `||r|| <= rel_tol * ||b||`.
pub fn conjugate_gradient<T: Real, A: SymmetricOperator<T> + ?Sized>(
    op: &A,
    shift: T,
    b: &[T],
    x0: Option<&[T]>,
    rel_tol: T,
    max_iter: usize,
) -> CgOutcome<T> {
    let n = b.len();
    let mut x = x0.map_or_else(|| vec![T::zero(); n], <[T]>::to_vec);
    let mut ap = vec![T::zero(); n];
    let apply = |v: &[T], out: &mut [T]| {
        op.apply(v, out);
        if shift != T::zero() {
            axpy(-shift, v, out);
        }
    };
    apply(&x, &mut ap);
    let mut r: Vec<T> = b.iter().zip(&ap).map(|(bi, a)| *bi - *a).collect();
    let bnorm = norm(b).max(T::min_positive_value());
    let target = rel_tol * bnorm;
    let mut rr = dot(&r, &r);
    if rr.sqrt() <= target {
        return CgOutcome::Converged { solution: x, iterations: 0, residual: rr.sqrt() };
    }
    let mut p = r.clone();
    for it in 1..=max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > T::zero()) {
            return CgOutcome::Indefinite;
        }
        let alpha = rr / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        let rr_new = dot(&r, &r);
        if rr_new.sqrt() <= target {
            return CgOutcome::Converged { solution: x, iterations: it, residual: rr_new.sqrt() };
        }
        let beta = rr_new / rr;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = *ri + beta * *pi;
        }
        rr = rr_new;
    }
    CgOutcome::Stalled { solution: x, residual: rr.sqrt() }
}

/// Crude `||A||` estimate from a few power steps, used to place a shift when
/// the operator offers no bound.
fn norm_estimate<T: Real, A: SymmetricOperator<T> + ?Sized>(op: &A, rng: &mut ChaCha8Rng) -> T {
    let n = op.dimension();
    let mut v = random_unit::<T>(rng, n);
    let mut av = vec![T::zero(); n];
    let mut est = T::zero();
    for _ in 0..20 {
        op.apply(&v, &mut av);
        est = norm(&av);
        if !(est > T::zero()) {
            return T::one();
        }
        v.iter_mut().zip(&av).for_each(|(vi, a)| *vi = *a / est);
    }
    est
}

/// Minimizes `<v, A v>` subject to `<v, v> = 1`: the lowest eigenpair of `A`.
///
/// A degenerate lowest eigenvalue yields some unit vector of its eigenspace,
/// selected by the seeded start vector.
pub fn minimize_quadratic_form<T: Real, A: SymmetricOperator<T> + ?Sized>(
    op: &A,
    config: &SolverConfig<T>,
) -> Result<SolverResult<T>> {
    config.validate()?;
    let n = op.dimension();
    if n < 2 {
        return Err(Error::validation("operator dimension must be >= 2"));
    }
    check_symmetry(op, config.seed)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut v = random_unit::<T>(&mut rng, n);
    let mut av = vec![T::zero(); n];
    op.apply(&v, &mut av);
    let mut value = dot(&v, &av);
    let mut history = vec![value];

    let inner = match op.tridiagonal() {
        Some(t) => InnerSolve::Banded(t),
        None => InnerSolve::Krylov,
    };
    let mut shift = match (config.shift, op.spectrum_lower_bound()) {
        (Some(s), _) => s,
        (None, Some(b)) => b - T::one().max(b.abs() * T::lit(1e-3)),
        (None, None) => {
            let est = norm_estimate(op, &mut rng);
            -(est * T::lit(1.1) + T::one())
        }
    };
    // lower the shift until the shifted operator is positive definite
    let mut factor = None;
    if let InnerSolve::Banded(t) = &inner {
        let mut tries = 0;
        loop {
            if let Some(d) = ldl_positive(t, shift) {
                factor = Some(d);
                break;
            }
            tries += 1;
            if tries > 200 {
                return Err(Error::validation("could not place a shift below the spectrum"));
            }
            shift -= T::one().max(shift.abs());
        }
    }

    let tol = config.tolerance;
    let mut residual = T::infinity();
    let mut best = (T::infinity(), v.clone());
    for iteration in 1..=config.max_iterations {
        let next = match &inner {
            InnerSolve::Banded(t) => {
                let d = factor.as_ref().expect("factored");
                ldl_solve(t, d, &v)
            }
            InnerSolve::Krylov => {
                let inner_tol = (tol * T::lit(1e-3)).min(T::lit(1e-10)).max(T::epsilon() * T::lit(8.0));
                let mut attempts = 0;
                loop {
                    match conjugate_gradient(op, shift, &v, Some(&v), inner_tol, 20 * n + 100) {
                        CgOutcome::Converged { solution, .. } | CgOutcome::Stalled { solution, .. } => {
                            break solution;
                        }
                        CgOutcome::Indefinite => {
                            attempts += 1;
                            if attempts > 60 {
                                return Err(Error::validation("could not place a shift below the spectrum"));
                            }
                            shift -= T::one().max(shift.abs());
                        }
                    }
                }
            }
        };
        let nn = norm(&next);
        if !(nn > T::zero()) || !nn.is_finite() {
            return Err(Error::Convergence {
                message: "inverse iteration produced a degenerate iterate".into(),
                iterations: iteration,
                residual: residual.as_f64(),
                best: best.1.iter().map(|x| x.as_f64()).collect(),
            });
        }
        v = next.into_iter().map(|x| x / nn).collect();
        op.apply(&v, &mut av);
        value = dot(&v, &av);
        history.push(value);
        let mut r = av.clone();
        axpy(-value, &v, &mut r);
        residual = norm(&r);
        if residual < best.0 {
            best = (residual, v.clone());
        }
        if residual <= tol * value.abs().max(T::one()) {
            return Ok(SolverResult {
                minimizer: v,
                value,
                multipliers: vec![value],
                residual,
                iterations: iteration,
                rayleigh_history: history,
            });
        }
        // move the shift towards the Rayleigh quotient when the factorization
        // certifies it is still below the spectrum
        if let InnerSolve::Banded(t) = &inner {
            let gap = residual.max(value.abs() * T::lit(1e-10));
            let candidate = value - gap;
            if candidate > shift {
                if let Some(d) = ldl_positive(t, candidate) {
                    shift = candidate;
                    factor = Some(d);
                }
            }
        }
    }
    Err(Error::Convergence {
        message: "inverse iteration reached max_iterations".into(),
        iterations: config.max_iterations,
        residual: best.0.as_f64(),
        best: best.1.iter().map(|x| x.as_f64()).collect(),
    })
}
