//! Gamma matrices in the Dirac representation, signature `(+, -, -, -)`,
//! and the slash operator on momentum four-vectors.
//!
//! Everything is generic over a commutative ring so the identities can be
//! checked exactly with integers or rationals.

use std::fmt::Debug;
use std::ops::Neg;

use num_complex::Complex;
use num_traits::Num;
use serde::{Deserialize, Serialize};

/// Scalars the algebra is carried out in.
pub trait Ring: Num + Clone + PartialEq + Debug + Neg<Output = Self> {}

impl<T: Num + Clone + PartialEq + Debug + Neg<Output = T>> Ring for T {}

pub type Matrix4<T> = [[Complex<T>; 4]; 4];

pub const SIGNATURE: [i8; 4] = [1, -1, -1, -1];

fn c<T: Ring>(re: i8, im: i8) -> Complex<T> {
    let lift = |v: i8| match v {
        1 => T::one(),
        -1 => -T::one(),
        _ => T::zero(),
    };
    Complex::new(lift(re), lift(im))
}

pub fn zero_matrix<T: Ring>() -> Matrix4<T> {
    std::array::from_fn(|_| std::array::from_fn(|_| Complex::new(T::zero(), T::zero())))
}

pub fn identity<T: Ring>() -> Matrix4<T> {
    let mut m = zero_matrix();
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = c(1, 0);
    }
    m
}

pub fn matmul<T: Ring>(a: &Matrix4<T>, b: &Matrix4<T>) -> Matrix4<T> {
    let mut out = zero_matrix();
    for i in 0..4 {
        for j in 0..4 {
            for k in 0..4 {
                out[i][j] = out[i][j].clone() + a[i][k].clone() * b[k][j].clone();
            }
        }
    }
    out
}

pub fn matadd<T: Ring>(a: &Matrix4<T>, b: &Matrix4<T>) -> Matrix4<T> {
    std::array::from_fn(|i| std::array::from_fn(|j| a[i][j].clone() + b[i][j].clone()))
}

pub fn matscale<T: Ring>(s: T, a: &Matrix4<T>) -> Matrix4<T> {
    std::array::from_fn(|i| std::array::from_fn(|j| a[i][j].clone() * s.clone()))
}

/// The scalar `s` when `m = s I` exactly.
pub fn identity_multiple<T: Ring>(m: &Matrix4<T>) -> Option<Complex<T>> {
    let s = m[0][0].clone();
    let ok = (0..4).all(|i| (0..4).all(|j| m[i][j] == if i == j { s.clone() } else { c(0, 0) }));
    ok.then_some(s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaSet<T: Ring> {
    pub matrices: [Matrix4<T>; 4],
    pub signature: [i8; 4],
}

/// `gamma^0 = diag(1, 1, -1, -1)`, `gamma^k = [[0, sigma_k], [-sigma_k, 0]]`.
pub fn build_gamma<T: Ring>() -> GammaSet<T> {
    let pauli: [[[Complex<T>; 2]; 2]; 3] = [
        [[c(0, 0), c(1, 0)], [c(1, 0), c(0, 0)]],
        [[c(0, 0), c(0, -1)], [c(0, 1), c(0, 0)]],
        [[c(1, 0), c(0, 0)], [c(0, 0), c(-1, 0)]],
    ];
    let mut g0 = identity::<T>();
    g0[2][2] = c(-1, 0);
    g0[3][3] = c(-1, 0);
    let spatial = |s: &[[Complex<T>; 2]; 2]| {
        let mut m = zero_matrix::<T>();
        for i in 0..2 {
            for j in 0..2 {
                m[i][j + 2] = s[i][j].clone();
                m[i + 2][j] = -s[i][j].clone();
            }
        }
        m
    };
    GammaSet { matrices: [g0, spatial(&pauli[0]), spatial(&pauli[1]), spatial(&pauli[2])], signature: SIGNATURE }
}

/// One row of the table `{gamma^m, gamma^n} = 2 g^{mn} I`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnticommutatorEntry {
    pub mu: usize,
    pub nu: usize,
    /// `g^{mn}`.
    pub expected: i8,
    /// `(re, im)` of `c` when the anticommutator equals `c I` exactly.
    pub identity_coefficient: Option<(String, String)>,
    pub matches: bool,
}

pub fn anticommutator<T: Ring>(g: &GammaSet<T>, mu: usize, nu: usize) -> Matrix4<T> {
    let (a, b) = (&g.matrices[mu], &g.matrices[nu]);
    matadd(&matmul(a, b), &matmul(b, a))
}

/// All sixteen anticommutators, compared exactly against the signature.
pub fn anticommutator_table<T: Ring + std::fmt::Display>(g: &GammaSet<T>) -> Vec<AnticommutatorEntry> {
    let two = T::one() + T::one();
    let mut rows = Vec::with_capacity(16);
    for mu in 0..4 {
        for nu in 0..4 {
            let ac = anticommutator(g, mu, nu);
            let expected = if mu == nu { g.signature[mu] } else { 0 };
            let target = matscale(two.clone() * c::<T>(expected, 0).re, &identity());
            let identity_coefficient = identity_multiple(&ac).map(|s| (s.re.to_string(), s.im.to_string()));
            rows.push(AnticommutatorEntry { mu, nu, expected, identity_coefficient, matches: ac == target });
        }
    }
    rows
}

/// Momentum `(k_0, k_1, k_2, k_3)`, contravariant components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourVector<T> {
    pub components: [T; 4],
}

impl<T: Ring> FourVector<T> {
    pub fn new(components: [T; 4]) -> Self {
        Self { components }
    }

    /// Minkowski square `k_0^2 - k_1^2 - k_2^2 - k_3^2`.
    pub fn square(&self) -> T {
        let k = &self.components;
        k[0].clone() * k[0].clone() - k[1].clone() * k[1].clone() - k[2].clone() * k[2].clone()
            - k[3].clone() * k[3].clone()
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { components: std::array::from_fn(|i| self.components[i].clone() + other.components[i].clone()) }
    }
}

/// `gamma^0 k^0 - gamma^i k^i`, the plane-wave image of `i gamma^m d_m`.
pub fn dirac_slash<T: Ring>(g: &GammaSet<T>, k: &FourVector<T>) -> Matrix4<T> {
    let mut out = zero_matrix();
    for mu in 0..4 {
        let coef = if g.signature[mu] > 0 { k.components[mu].clone() } else { -k.components[mu].clone() };
        out = matadd(&out, &matscale(coef, &g.matrices[mu]));
    }
    out
}
