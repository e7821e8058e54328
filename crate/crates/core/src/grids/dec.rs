//! Discrete exterior calculus on flat periodic structured meshes.
//!
//! Cells of a 1-D mesh with `n` cells: vertices `i`, edges `i -> i+1 (mod n)`.
//! Cells of a 2-D mesh with `nx * ny` cells: vertex `(i, j)` at `i * ny + j`;
//! x-edges `(i, j) -> (i+1, j)` share the vertex numbering, y-edges
//! `(i, j) -> (i, j+1)` follow after them; the face at `(i, j)` is traversed
//! counter-clockwise starting from its lower-left vertex.
//!
//! The Hodge star is diagonal: a primal `k`-cell coefficient is scaled by
//! `|dual cell| / |primal cell|`. Dual cochains of degree `j` are indexed by
//! the primal `(n - j)`-cells they are dual to.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Signed incidence of a `(k+1)`-cell on its boundary `k`-cells.
pub type Incidence = Vec<Vec<(usize, i8)>>;

/// Which complex a cochain lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Complex {
    Primal,
    Dual,
}

/// JSON description of a mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", deny_unknown_fields)]
pub struct MeshSpec<T: Real> {
    pub dimension: usize,
    pub cells_per_axis: Vec<usize>,
    pub lengths: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicMesh<T: Real> {
    cells: Vec<usize>,
    spacing: Vec<T>,
    /// `boundary[k][c]` lists the `k`-cells on the boundary of `(k+1)`-cell `c`.
    boundary: Vec<Incidence>,
    /// Diagonal Hodge ratio per `k`-cell.
    star: Vec<Vec<T>>,
}

impl<T: Real> PeriodicMesh<T> {
    pub fn from_spec(spec: &MeshSpec<T>) -> Result<Self> {
        if spec.cells_per_axis.len() != spec.dimension || spec.lengths.len() != spec.dimension {
            return Err(Error::validation("mesh spec: one cell count and length per axis"));
        }
        match spec.dimension {
            1 => Self::new_1d(spec.cells_per_axis[0], spec.lengths[0]),
            2 => Self::new_2d(
                [spec.cells_per_axis[0], spec.cells_per_axis[1]],
                [spec.lengths[0], spec.lengths[1]],
            ),
            d => Err(Error::validation(format!("mesh dimension {d} not supported"))),
        }
    }

    pub fn spec(&self) -> MeshSpec<T> {
        MeshSpec {
            dimension: self.dimension(),
            cells_per_axis: self.cells.clone(),
            lengths: self
                .cells
                .iter()
                .zip(&self.spacing)
                .map(|(n, h)| *h * T::from_count(*n))
                .collect(),
        }
    }

    /// Circle of the given length divided into `n` equal cells.
    pub fn new_1d(n: usize, length: T) -> Result<Self> {
        check_axis(n, length)?;
        let h = length / T::from_count(n);
        let edges = (0..n).map(|i| vec![(i, -1), ((i + 1) % n, 1)]).collect();
        Ok(Self {
            cells: vec![n],
            spacing: vec![h],
            boundary: vec![edges],
            star: vec![vec![h; n], vec![T::one() / h; n]],
        })
    }

    /// Flat torus `[0, lx) x [0, ly)` with `nx * ny` rectangular cells.
    pub fn new_2d(cells: [usize; 2], lengths: [T; 2]) -> Result<Self> {
        let [nx, ny] = cells;
        check_axis(nx, lengths[0])?;
        check_axis(ny, lengths[1])?;
        let hx = lengths[0] / T::from_count(nx);
        let hy = lengths[1] / T::from_count(ny);
        let nv = nx * ny;
        let v = |i: usize, j: usize| (i % nx) * ny + (j % ny);

        let mut edges = Vec::with_capacity(2 * nv);
        for i in 0..nx {
            for j in 0..ny {
                edges.push(vec![(v(i, j), -1), (v(i + 1, j), 1)]);
            }
        }
        for i in 0..nx {
            for j in 0..ny {
                edges.push(vec![(v(i, j), -1), (v(i, j + 1), 1)]);
            }
        }
        let ex = |i: usize, j: usize| v(i, j);
        let ey = |i: usize, j: usize| nv + v(i, j);
        let mut faces = Vec::with_capacity(nv);
        for i in 0..nx {
            for j in 0..ny {
                faces.push(vec![(ex(i, j), 1), (ey(i + 1, j), 1), (ex(i, j + 1), -1), (ey(i, j), -1)]);
            }
        }
        let mut star1 = vec![hy / hx; nv];
        star1.extend(std::iter::repeat(hx / hy).take(nv));
        Ok(Self {
            cells: vec![nx, ny],
            spacing: vec![hx, hy],
            boundary: vec![edges, faces],
            star: vec![vec![hx * hy; nv], star1, vec![T::one() / (hx * hy); nv]],
        })
    }

    pub fn dimension(&self) -> usize {
        self.cells.len()
    }

    pub fn cells_per_axis(&self) -> &[usize] {
        &self.cells
    }

    pub fn spacing(&self) -> &[T] {
        &self.spacing
    }

    pub fn cell_count(&self, k: usize) -> usize {
        self.star.get(k).map_or(0, Vec::len)
    }

    /// Boundary incidence from `(k+1)`-cells to `k`-cells.
    pub fn incidence(&self, k: usize) -> Option<&Incidence> {
        self.boundary.get(k)
    }

    /// Diagonal Hodge ratios for primal `k`-cells.
    pub fn hodge_ratios(&self, k: usize) -> &[T] {
        &self.star[k]
    }

    /// Coordinates of vertex `v`.
    pub fn vertex_position(&self, v: usize) -> Vec<T> {
        match self.dimension() {
            1 => vec![self.spacing[0] * T::from_count(v)],
            _ => {
                let ny = self.cells[1];
                vec![
                    self.spacing[0] * T::from_count(v / ny),
                    self.spacing[1] * T::from_count(v % ny),
                ]
            }
        }
    }

    /// Checks that every boundary of a boundary cancels.
    pub fn boundary_of_boundary_vanishes(&self) -> bool {
        if self.boundary.len() < 2 {
            return true;
        }
        self.boundary[1].iter().all(|face| {
            let mut acc = vec![0i32; self.cell_count(0)];
            for &(e, s) in face {
                for &(vtx, t) in &self.boundary[0][e] {
                    acc[vtx] += i32::from(s) * i32::from(t);
                }
            }
            acc.iter().all(|a| *a == 0)
        })
    }
}

fn check_axis<T: Real>(n: usize, length: T) -> Result<()> {
    if n < 3 {
        return Err(Error::validation(format!("need >= 3 cells per axis, got {n}")));
    }
    if !(length > T::zero()) || !length.is_finite() {
        return Err(Error::validation("mesh lengths must be positive"));
    }
    Ok(())
}

/// Degree-`k` discrete form: one coefficient per oriented `k`-cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Cochain<T: Real> {
    mesh: Arc<PeriodicMesh<T>>,
    degree: usize,
    complex: Complex,
    coefficients: Vec<T>,
}

impl<T: Real> Cochain<T> {
    pub fn new(mesh: Arc<PeriodicMesh<T>>, degree: usize, coefficients: Vec<T>) -> Result<Self> {
        Self::with_complex(mesh, degree, Complex::Primal, coefficients)
    }

    pub fn with_complex(
        mesh: Arc<PeriodicMesh<T>>,
        degree: usize,
        complex: Complex,
        coefficients: Vec<T>,
    ) -> Result<Self> {
        let n = mesh.dimension();
        if degree > n {
            return Err(Error::validation(format!("degree {degree} exceeds mesh dimension {n}")));
        }
        let want = mesh.cell_count(storage_degree(n, degree, complex));
        if coefficients.len() != want {
            return Err(Error::validation(format!(
                "{degree}-cochain needs {want} coefficients, got {}",
                coefficients.len()
            )));
        }
        Ok(Self { mesh, degree, complex, coefficients })
    }

    pub fn zeros(mesh: Arc<PeriodicMesh<T>>, degree: usize) -> Result<Self> {
        let len = mesh.cell_count(degree);
        Self::new(mesh, degree, vec![T::zero(); len])
    }

    /// 0-cochain sampling `f` at the vertices.
    pub fn sample_vertices(mesh: Arc<PeriodicMesh<T>>, f: impl Fn(&[T]) -> T) -> Self {
        let coefficients = (0..mesh.cell_count(0)).map(|v| f(&mesh.vertex_position(v))).collect();
        Self { mesh, degree: 0, complex: Complex::Primal, coefficients }
    }

    pub fn mesh(&self) -> &Arc<PeriodicMesh<T>> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn complex(&self) -> Complex {
        self.complex
    }

    pub fn coefficients(&self) -> &[T] {
        &self.coefficients
    }

    fn like(&self, degree: usize, complex: Complex, coefficients: Vec<T>) -> Self {
        Self { mesh: Arc::clone(&self.mesh), degree, complex, coefficients }
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if !Arc::ptr_eq(&self.mesh, &other.mesh) && *self.mesh != *other.mesh {
            return Err(Error::validation("cochains live on different meshes"));
        }
        if self.degree != other.degree || self.complex != other.complex {
            return Err(Error::validation("cochains differ in degree or complex"));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let c = self.coefficients.iter().zip(&other.coefficients).map(|(a, b)| *a + *b).collect();
        Ok(self.like(self.degree, self.complex, c))
    }
}

/// Primal cell dimension that indexes a cochain.
fn storage_degree(n: usize, degree: usize, complex: Complex) -> usize {
    match complex {
        Complex::Primal => degree,
        Complex::Dual => n - degree,
    }
}

fn sign(exp: usize) -> i8 {
    if exp % 2 == 0 {
        1
    } else {
        -1
    }
}

fn coboundary<T: Real>(incidence: &Incidence, c: &[T]) -> Vec<T> {
    incidence
        .iter()
        .map(|cell| {
            let mut acc = T::zero();
            for &(face, s) in cell {
                if s > 0 {
                    acc += c[face];
                } else {
                    acc -= c[face];
                }
            }
            acc
        })
        .collect()
}

fn coboundary_transpose<T: Real>(incidence: &Incidence, c: &[T], len: usize) -> Vec<T> {
    let mut out = vec![T::zero(); len];
    for (cell, faces) in incidence.iter().enumerate() {
        for &(face, s) in faces {
            if s > 0 {
                out[face] += c[cell];
            } else {
                out[face] -= c[cell];
            }
        }
    }
    out
}

/// Coboundary `d`. On dual cochains of degree `j` this is
/// `(-1)^j` times the transpose of the primal coboundary.
pub fn exterior_derivative<T: Real>(c: &Cochain<T>) -> Result<Cochain<T>> {
    let n = c.mesh.dimension();
    if c.degree >= n {
        return Err(Error::validation(format!("d of a top-degree ({n}) cochain")));
    }
    let coeffs = match c.complex {
        Complex::Primal => coboundary(&c.mesh.boundary[c.degree], &c.coefficients),
        Complex::Dual => {
            let target = n - c.degree - 1;
            let mut out =
                coboundary_transpose(&c.mesh.boundary[target], &c.coefficients, c.mesh.cell_count(target));
            if sign(c.degree) < 0 {
                out.iter_mut().for_each(|v| *v = -*v);
            }
            out
        }
    };
    Ok(c.like(c.degree + 1, c.complex, coeffs))
}

/// Diagonal Hodge star, primal `k` to dual `n - k` and back.
///
/// Dual to primal applies the inverse ratio with sign `(-1)^(k (n-k))`, so
/// that the star applied twice is `(-1)^(k (n-k))` times the identity.
pub fn hodge_star<T: Real>(c: &Cochain<T>) -> Cochain<T> {
    let n = c.mesh.dimension();
    match c.complex {
        Complex::Primal => {
            let ratios = c.mesh.hodge_ratios(c.degree);
            let coeffs = c.coefficients.iter().zip(ratios).map(|(a, r)| *a * *r).collect();
            c.like(n - c.degree, Complex::Dual, coeffs)
        }
        Complex::Dual => {
            let k = n - c.degree;
            let ratios = c.mesh.hodge_ratios(k);
            let s = if sign(k * c.degree) < 0 { -T::one() } else { T::one() };
            let coeffs = c.coefficients.iter().zip(ratios).map(|(a, r)| s * *a / *r).collect();
            c.like(k, Complex::Primal, coeffs)
        }
    }
}

/// Codifferential `delta = s * star d star` with the sign `s` fixed so that
/// `<<d a, b>> = <<a, delta b>>`.
pub fn codifferential<T: Real>(c: &Cochain<T>) -> Result<Cochain<T>> {
    if c.degree == 0 {
        return Err(Error::validation("codifferential of a 0-cochain"));
    }
    if c.complex != Complex::Primal {
        return Err(Error::validation("codifferential is defined on primal cochains"));
    }
    let n = c.mesh.dimension();
    let k = c.degree;
    let mut out = hodge_star(&exterior_derivative(&hodge_star(c))?);
    // dual d on degree n-k contributes (-1)^(n-k); the star back to primal
    // degree k-1 contributes (-1)^((k-1)(n-k+1))
    let s = sign(n - k) * sign((k - 1) * (n - k + 1));
    if s < 0 {
        out.coefficients.iter_mut().for_each(|v| *v = -*v);
    }
    Ok(out)
}

/// deRham Laplacian `d delta + delta d`; positive semidefinite.
pub fn derham_laplacian<T: Real>(c: &Cochain<T>) -> Result<Cochain<T>> {
    if c.complex != Complex::Primal {
        return Err(Error::validation("Laplacian is defined on primal cochains"));
    }
    let n = c.mesh.dimension();
    let mut acc = vec![T::zero(); c.coefficients.len()];
    if c.degree < n {
        let term = codifferential(&exterior_derivative(c)?)?;
        acc.iter_mut().zip(&term.coefficients).for_each(|(a, t)| *a += *t);
    }
    if c.degree > 0 {
        let term = exterior_derivative(&codifferential(c)?)?;
        acc.iter_mut().zip(&term.coefficients).for_each(|(a, t)| *a += *t);
    }
    Ok(c.like(c.degree, Complex::Primal, acc))
}

/// `<<a, b>> = sum a * star b`; on dual cochains the inverse ratios are used.
pub fn cochain_inner<T: Real>(a: &Cochain<T>, b: &Cochain<T>) -> Result<T> {
    a.check_compatible(b)?;
    let n = a.mesh.dimension();
    let ratios = a.mesh.hodge_ratios(storage_degree(n, a.degree, a.complex));
    let mut acc = T::zero();
    for ((x, y), r) in a.coefficients.iter().zip(&b.coefficients).zip(ratios) {
        acc += match a.complex {
            Complex::Primal => *x * *y * *r,
            Complex::Dual => *x * *y / *r,
        };
    }
    Ok(acc)
}
