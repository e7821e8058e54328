//! Discrete probability: entropy, product distributions, doubly stochastic
//! mixing, the Maxwell velocity density and the maximum-entropy solver for a
//! mean-energy constraint.
//!
//! Entropy is measured in nats and uses `0 ln 0 = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Absolute tolerance on `sum(p) == 1`, widened for low-precision scalars.
fn sum_tolerance<T: Real>(n: usize) -> T {
    let floor = T::lit(1e-12);
    let rounding = T::epsilon() * T::from_count(8 * n.max(1));
    floor.max(rounding)
}

/// Nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DiscreteDistribution<T: Real> {
    weights: Vec<T>,
}

impl<T: Real> DiscreteDistribution<T> {
    pub fn new(weights: Vec<T>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::validation("distribution has no weights"));
        }
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !w.is_finite() || **w < T::zero())
        {
            return Err(Error::validation(format!("weight {i} is {w}; must be finite and >= 0")));
        }
        let total: T = weights.iter().copied().sum();
        if (total - T::one()).abs() > sum_tolerance(weights.len()) {
            return Err(Error::validation(format!("weights sum to {total}, expected 1")));
        }
        Ok(Self { weights })
    }

    /// Uniform distribution over `n` outcomes.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::validation("uniform distribution needs n >= 1"));
        }
        Self::new(vec![T::one() / T::from_count(n); n])
    }

    /// Normalizes arbitrary nonnegative masses into a distribution.
    pub fn from_masses(masses: &[T]) -> Result<Self> {
        let total: T = masses.iter().copied().sum();
        if !(total > T::zero()) || !total.is_finite() {
            return Err(Error::validation("masses must have a positive finite total"));
        }
        Self::new(masses.iter().map(|m| *m / total).collect())
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn into_weights(self) -> Vec<T> {
        self.weights
    }
}

/// Energy levels of a discrete system. At least two, not all equal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct EnergyLevels<T: Real> {
    levels: Vec<T>,
}

impl<T: Real> EnergyLevels<T> {
    pub fn new(levels: Vec<T>) -> Result<Self> {
        if levels.len() < 2 {
            return Err(Error::validation("need at least two energy levels"));
        }
        if levels.iter().any(|e| !e.is_finite()) {
            return Err(Error::validation("energy levels must be finite"));
        }
        let (lo, hi) = min_max(&levels);
        if lo == hi {
            return Err(Error::validation("energy levels are all equal"));
        }
        Ok(Self { levels })
    }

    pub fn levels(&self) -> &[T] {
        &self.levels
    }

    pub fn min(&self) -> T {
        min_max(&self.levels).0
    }

    pub fn max(&self) -> T {
        min_max(&self.levels).1
    }
}

fn min_max<T: Real>(xs: &[T]) -> (T, T) {
    xs.iter()
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), x| (lo.min(*x), hi.max(*x)))
}

/// Result of [`solve_maxent`].
///
/// `multipliers` are the Lagrange multipliers of the mean-energy and
/// normalization constraints: `(beta, log_normalizer - 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MaxEntSolution<T: Real> {
    pub distribution: DiscreteDistribution<T>,
    pub beta: T,
    pub log_normalizer: T,
    pub multipliers: (T, T),
    pub mean_residual: T,
    pub iterations: usize,
}

impl<T: Real> MaxEntSolution<T> {
    /// Prefactor `alpha` of the Boltzmann form `alpha * exp(-beta E)`.
    pub fn alpha(&self) -> T {
        (-self.log_normalizer).exp()
    }
}

/// Square doubly stochastic matrix, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MixingMap<T: Real> {
    n: usize,
    entries: Vec<T>,
}

impl<T: Real> MixingMap<T> {
    pub fn new(n: usize, entries: Vec<T>) -> Result<Self> {
        if n == 0 || entries.len() != n * n {
            return Err(Error::validation(format!(
                "mixing map needs {n}x{n} entries, got {}",
                entries.len()
            )));
        }
        if entries.iter().any(|t| !t.is_finite() || *t < T::zero()) {
            return Err(Error::validation("mixing map entries must be finite and >= 0"));
        }
        let tol = sum_tolerance::<T>(n);
        for i in 0..n {
            let row: T = entries[i * n..(i + 1) * n].iter().copied().sum();
            let col: T = (0..n).map(|j| entries[j * n + i]).sum();
            if (row - T::one()).abs() > tol || (col - T::one()).abs() > tol {
                return Err(Error::validation(format!(
                    "mixing map is not doubly stochastic at index {i} (row {row}, column {col})"
                )));
            }
        }
        Ok(Self { n, entries })
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut entries = vec![T::zero(); n * n];
        for i in 0..n {
            entries[i * n + i] = T::one();
        }
        Self::new(n, entries)
    }

    /// Complete averaging: every entry `1/n`.
    pub fn averaging(n: usize) -> Result<Self> {
        Self::new(n, vec![T::one() / T::from_count(n.max(1)); n * n])
    }

    /// Convex combination of permutation matrices (Birkhoff construction).
    ///
    /// `perms[k][i] = j` places weight `weights[k]` at entry `(i, j)`.
    /// Weights are normalized to sum to one.
    pub fn from_permutations(perms: &[Vec<usize>], weights: &[T]) -> Result<Self> {
        let n = perms
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::validation("need at least one permutation"))?;
        if perms.len() != weights.len() {
            return Err(Error::validation("one weight per permutation required"));
        }
        let total: T = weights.iter().copied().sum();
        if !(total > T::zero()) || weights.iter().any(|w| *w < T::zero()) {
            return Err(Error::validation("permutation weights must be >= 0 with positive total"));
        }
        let mut entries = vec![T::zero(); n * n];
        for (perm, w) in perms.iter().zip(weights) {
            let mut seen = vec![false; n];
            if perm.len() != n {
                return Err(Error::validation("permutations differ in length"));
            }
            for (i, &j) in perm.iter().enumerate() {
                if j >= n || seen[j] {
                    return Err(Error::validation("not a permutation"));
                }
                seen[j] = true;
                entries[i * n + j] += *w / total;
            }
        }
        Self::new(n, entries)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> T {
        self.entries[i * self.n + j]
    }
}

/// Parameters of the isotropic Maxwell density `C exp(-alpha |v|^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MaxwellParameters<T: Real> {
    pub alpha: T,
    pub normalization: T,
}

impl<T: Real> MaxwellParameters<T> {
    /// Unit total probability: `C = (alpha / pi)^(3/2)`.
    pub fn normalized(alpha: T) -> Result<Self> {
        if !(alpha > T::zero()) || !alpha.is_finite() {
            return Err(Error::validation(format!("alpha must be positive, got {alpha}")));
        }
        let normalization = (alpha / T::PI()).powf(T::lit(1.5));
        Ok(Self { alpha, normalization })
    }

    /// One-axis factor `(alpha/pi)^(1/2) exp(-alpha v^2)`; the full density is
    /// the product of three of these.
    pub fn axis_density(&self, v: T) -> T {
        (self.alpha / T::PI()).sqrt() * (-self.alpha * v * v).exp()
    }
}

/// `-sum p ln p` in nats.
pub fn entropy<T: Real>(p: &DiscreteDistribution<T>) -> T {
    let mut s = T::zero();
    for &w in p.weights() {
        if w > T::zero() {
            s -= w * w.ln();
        }
    }
    s.max(T::zero())
}

/// `{p_i q_j}` flattened row-major (i outer, j inner).
pub fn product_distribution<T: Real>(
    p: &DiscreteDistribution<T>,
    q: &DiscreteDistribution<T>,
) -> DiscreteDistribution<T> {
    let weights = p
        .weights()
        .iter()
        .flat_map(|pi| q.weights().iter().map(move |qj| *pi * *qj))
        .collect();
    DiscreteDistribution { weights }
}

/// `T * P`.
pub fn apply_mixing<T: Real>(
    p: &DiscreteDistribution<T>,
    map: &MixingMap<T>,
) -> Result<DiscreteDistribution<T>> {
    if map.dim() != p.len() {
        return Err(Error::validation(format!(
            "mixing map is {0}x{0} but distribution has {1} weights",
            map.dim(),
            p.len()
        )));
    }
    let n = map.dim();
    let weights = (0..n)
        .map(|i| {
            let mut acc = T::zero();
            for (j, pj) in p.weights().iter().enumerate() {
                acc += map.entry(i, j) * *pj;
            }
            acc
        })
        .collect();
    Ok(DiscreteDistribution { weights })
}

pub fn maxwell_density<T: Real>(params: &MaxwellParameters<T>, v: [T; 3]) -> Result<T> {
    if !(params.alpha > T::zero()) {
        return Err(Error::validation(format!("alpha must be positive, got {}", params.alpha)));
    }
    let speed2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    Ok(params.normalization * (-params.alpha * speed2).exp())
}

const MAXENT_MAX_ITERATIONS: usize = 200;

/// Log-partition `ln sum exp(-beta E_k)` and mean energy at `beta`.
fn boltzmann_moments<T: Real>(levels: &[T], beta: T) -> (T, T) {
    // shift by the dominant exponent so the largest term is exp(0)
    let shift = levels
        .iter()
        .map(|e| -beta * *e)
        .fold(T::neg_infinity(), T::max);
    let mut z = T::zero();
    let mut first = T::zero();
    for &e in levels {
        let w = (-beta * e - shift).exp();
        z += w;
        first += w * e;
    }
    (shift + z.ln(), first / z)
}

/// Maximum-entropy distribution over `levels` with the given mean energy.
///
/// The multiplier `beta` is found by bisection on the strictly decreasing map
/// `beta -> <E>_beta`, after growing the bracket geometrically from zero.
pub fn solve_maxent<T: Real>(levels: &EnergyLevels<T>, target_mean: T) -> Result<MaxEntSolution<T>> {
    let (lo_e, hi_e) = (levels.min(), levels.max());
    if !(target_mean > lo_e && target_mean < hi_e) {
        return Err(Error::Infeasible(format!(
            "target mean {target_mean} outside the open interval ({lo_e}, {hi_e})"
        )));
    }
    let e = levels.levels();
    let mean_at = |beta: T| boltzmann_moments(e, beta).1;
    let scale = lo_e.abs().max(hi_e.abs()).max(T::one());
    let tolerance = T::lit(1e-10).max(T::epsilon() * T::lit(64.0)) * scale;

    // mean is decreasing in beta: mean(beta) > target means beta must grow
    let mean0 = mean_at(T::zero());
    let (mut lo, mut hi) = if mean0 == target_mean {
        (T::zero(), T::zero())
    } else {
        let sign = if mean0 > target_mean { T::one() } else { -T::one() };
        let spread = hi_e - lo_e;
        let mut step = sign / spread;
        let mut inner = T::zero();
        let mut expansions = 0;
        while (mean_at(step) - target_mean) * sign > T::zero() {
            inner = step;
            step = step * T::two();
            expansions += 1;
            if expansions > MAXENT_MAX_ITERATIONS || !step.is_finite() {
                return Err(Error::Convergence {
                    message: "could not bracket beta".into(),
                    iterations: expansions,
                    residual: (mean_at(inner) - target_mean).abs().as_f64(),
                    best: vec![inner.as_f64()],
                });
            }
        }
        if sign > T::zero() {
            (inner, step)
        } else {
            (step, inner)
        }
    };

    let mut iterations = 0;
    while iterations < MAXENT_MAX_ITERATIONS && lo < hi {
        let mid = lo + (hi - lo) * T::half();
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        let m = mean_at(mid);
        if m == target_mean {
            lo = mid;
            hi = mid;
        } else if m > target_mean {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (beta, residual) = [lo, hi]
        .into_iter()
        .map(|b| (b, (mean_at(b) - target_mean).abs()))
        .fold((lo, T::infinity()), |best, cand| if cand.1 < best.1 { cand } else { best });

    if residual > tolerance {
        return Err(Error::Convergence {
            message: "mean-energy residual above tolerance".into(),
            iterations,
            residual: residual.as_f64(),
            best: vec![beta.as_f64()],
        });
    }

    let (log_z, _) = boltzmann_moments(e, beta);
    let weights: Vec<T> = e.iter().map(|ek| (-beta * *ek - log_z).exp()).collect();
    Ok(MaxEntSolution {
        distribution: DiscreteDistribution { weights },
        beta,
        log_normalizer: log_z,
        multipliers: (beta, log_z - T::one()),
        mean_residual: residual,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dist(w: &[f64]) -> DiscreteDistribution<f64> {
        DiscreteDistribution::new(w.to_vec()).unwrap()
    }

    fn random_dist(rng: &mut ChaCha8Rng, n: usize) -> DiscreteDistribution<f64> {
        let masses: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 1e-3).collect();
        DiscreteDistribution::from_masses(&masses).unwrap()
    }

    #[test]
    fn entropy_examples() {
        assert_abs_diff_eq!(entropy(&dist(&[0.5, 0.5])), 2f64.ln(), epsilon = 1e-15);
        assert_eq!(entropy(&dist(&[1.0, 0.0])), 0.0);
        // direct summation: -(1/3)ln(1/3) - (2/3)ln(2/3)
        let oracle = -(1.0f64 / 3.0) * (1.0f64 / 3.0).ln() - (2.0f64 / 3.0) * (2.0f64 / 3.0).ln();
        assert_abs_diff_eq!(oracle, 0.636_514_168_294_813_4, epsilon = 1e-15);
        assert_abs_diff_eq!(entropy(&dist(&[1.0 / 3.0, 2.0 / 3.0])), oracle, epsilon = 1e-15);
    }

    #[test]
    fn entropy_bounded_by_log_n() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..20 {
            let p = random_dist(&mut rng, n);
            let s = entropy(&p);
            assert!(s >= 0.0 && s <= (n as f64).ln() + 1e-12);
        }
    }

    #[test]
    fn invalid_distributions_rejected() {
        assert!(DiscreteDistribution::new(vec![0.5, 0.6]).is_err());
        assert!(DiscreteDistribution::new(vec![1.1, -0.1]).is_err());
        assert!(DiscreteDistribution::<f64>::new(vec![]).is_err());
        assert!(DiscreteDistribution::new(vec![f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn product_examples() {
        let q = dist(&[0.3, 0.7]);
        assert_eq!(product_distribution(&dist(&[1.0]), &q).weights(), &[0.3, 0.7]);
        let u = dist(&[0.5, 0.5]);
        assert_eq!(product_distribution(&u, &u).weights(), &[0.25; 4]);
        let pq = product_distribution(&u, &dist(&[1.0 / 3.0, 2.0 / 3.0]));
        for (got, want) in pq.weights().iter().zip([1.0 / 6.0, 1.0 / 3.0, 1.0 / 6.0, 1.0 / 3.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-16);
        }
    }

    #[test]
    fn maxent_examples() {
        let two = EnergyLevels::new(vec![0.0, 1.0]).unwrap();
        let sol = solve_maxent(&two, 0.5).unwrap();
        assert_eq!(sol.beta, 0.0);
        assert_abs_diff_eq!(sol.distribution.weights()[0], 0.5, epsilon = 1e-15);

        // closed-form two-level mean 1/(1+e^beta) = 1/4 gives beta = ln 3
        let sol = solve_maxent(&two, 0.25).unwrap();
        assert_abs_diff_eq!(sol.beta, 3f64.ln(), epsilon = 1e-9);
        assert_abs_diff_eq!(sol.distribution.weights()[0], 0.75, epsilon = 1e-10);
        assert_abs_diff_eq!(sol.distribution.weights()[1], 0.25, epsilon = 1e-10);
        assert!(sol.mean_residual < 1e-10);

        let three = EnergyLevels::new(vec![0.0, 1.0, 2.0]).unwrap();
        let sol = solve_maxent(&three, 1.0).unwrap();
        assert_abs_diff_eq!(sol.beta, 0.0, epsilon = 1e-12);
        for w in sol.distribution.weights() {
            assert_abs_diff_eq!(*w, 1.0 / 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn maxent_negative_beta_and_multipliers() {
        let levels = EnergyLevels::new(vec![0.0, 1.0]).unwrap();
        let sol = solve_maxent(&levels, 0.75).unwrap();
        assert_abs_diff_eq!(sol.beta, -3f64.ln(), epsilon = 1e-9);
        assert_eq!(sol.multipliers.0, sol.beta);
        assert_abs_diff_eq!(sol.multipliers.1, sol.log_normalizer - 1.0, epsilon = 0.0);
        // stationarity of the Lagrangian: -ln p - 1 - l1 E - l2 = 0
        for (p, e) in sol.distribution.weights().iter().zip(levels.levels()) {
            let grad = -p.ln() - 1.0 - sol.multipliers.0 * e - sol.multipliers.1;
            assert_abs_diff_eq!(grad, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn maxent_infeasible_targets() {
        let levels = EnergyLevels::new(vec![0.0, 1.0, 3.0]).unwrap();
        for t in [0.0, 3.0, -1.0, 4.0, f64::NAN] {
            assert!(matches!(solve_maxent(&levels, t), Err(Error::Infeasible(_))));
        }
        assert!(EnergyLevels::new(vec![1.0]).is_err());
        assert!(EnergyLevels::new(vec![2.0, 2.0, 2.0]).is_err());
    }

    #[test]
    fn maxent_extreme_target_still_converges() {
        let levels = EnergyLevels::new(vec![0.0, 1.0, 2.0, 5.0]).unwrap();
        let sol = solve_maxent(&levels, 1e-6).unwrap();
        assert!(sol.beta > 10.0);
        assert!(sol.mean_residual < 1e-10);
    }

    #[test]
    fn maxent_is_entropy_optimal_against_feasible_perturbations() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let levels = EnergyLevels::new(vec![0.0, 0.4, 1.3, 2.0, 3.1]).unwrap();
        let sol = solve_maxent(&levels, 1.1).unwrap();
        let p = sol.distribution.weights();
        let e = levels.levels();
        let s_opt = entropy(&sol.distribution);
        let n = p.len();
        for _ in 0..500 {
            // random direction projected onto {sum d = 0, sum d E = 0}
            let mut d: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
            let ones = vec![1.0; n];
            let mean_e = e.iter().sum::<f64>() / n as f64;
            let centered: Vec<f64> = e.iter().map(|x| x - mean_e).collect();
            for basis in [&ones, &centered] {
                let c = crate::scalar::dot(&d, basis) / crate::scalar::dot(basis, basis);
                crate::scalar::axpy(-c, basis, &mut d);
            }
            let limit = p
                .iter()
                .zip(&d)
                .filter(|(_, di)| **di < 0.0)
                .map(|(pi, di)| -pi / di)
                .fold(f64::INFINITY, f64::min);
            let t = rng.gen::<f64>() * limit.min(1.0);
            let moved: Vec<f64> = p.iter().zip(&d).map(|(pi, di)| (pi + t * di).max(0.0)).collect();
            let q = DiscreteDistribution::from_masses(&moved).unwrap();
            assert!(entropy(&q) <= s_opt + 1e-9);
        }
    }

    #[test]
    fn mixing_examples() {
        let p = dist(&[0.9, 0.1]);
        let id = MixingMap::identity(2).unwrap();
        assert_eq!(apply_mixing(&p, &id).unwrap(), p);
        let avg = MixingMap::averaging(2).unwrap();
        let mixed = apply_mixing(&p, &avg).unwrap();
        assert_abs_diff_eq!(entropy(&mixed), 2f64.ln(), epsilon = 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let perms = vec![vec![0, 1], vec![1, 0]];
        let w = [rng.gen::<f64>(), rng.gen::<f64>()];
        let t = MixingMap::from_permutations(&perms, &w).unwrap();
        let before = entropy(&p);
        let after = entropy(&apply_mixing(&p, &t).unwrap());
        assert!(after >= before - 1e-12);
    }

    #[test]
    fn mixing_errors() {
        let p = dist(&[0.5, 0.5]);
        let t3 = MixingMap::<f64>::identity(3).unwrap();
        assert!(apply_mixing(&p, &t3).is_err());
        assert!(MixingMap::new(2, vec![0.5, 0.5, 0.6, 0.4]).is_err());
        assert!(MixingMap::new(2, vec![1.0, 0.0, 1.0, 0.0]).is_err());
        assert!(MixingMap::from_permutations(&[vec![0, 0]], &[1.0]).is_err());
    }

    #[test]
    fn maxwell_examples() {
        let params = MaxwellParameters::normalized(1.0).unwrap();
        let peak = maxwell_density(&params, [0.0; 3]).unwrap();
        assert_abs_diff_eq!(peak, 0.179_587_122_125_166_57, epsilon = 1e-15);

        let v = [0.3, -1.2, 0.7];
        let factored = params.axis_density(v[0]) * params.axis_density(v[1]) * params.axis_density(v[2]);
        assert_abs_diff_eq!(maxwell_density(&params, v).unwrap() / factored, 1.0, epsilon = 1e-14);

        // isotropy: same |v| in a rotated direction
        let r = (0.3f64 * 0.3 + 1.2 * 1.2 + 0.7 * 0.7).sqrt();
        let a = maxwell_density(&params, v).unwrap();
        let b = maxwell_density(&params, [0.0, 0.0, r]).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-15);

        assert!(MaxwellParameters::<f64>::normalized(0.0).is_err());
        let bad = MaxwellParameters { alpha: -1.0, normalization: 1.0 };
        assert!(maxwell_density(&bad, v).is_err());
    }

    #[test]
    fn maxwell_second_moment_by_tensor_quadrature() {
        // 3-D tensor-product midpoint rule on [-L, L]^3
        let alpha = 2.0;
        let params = MaxwellParameters::normalized(alpha).unwrap();
        let (l, n) = (6.0, 120);
        let h = 2.0 * l / n as f64;
        let nodes: Vec<f64> = (0..n).map(|i| -l + (i as f64 + 0.5) * h).collect();
        let (mut mass, mut second) = (0.0, 0.0);
        for &x in &nodes {
            for &y in &nodes {
                for &z in &nodes {
                    let rho = maxwell_density(&params, [x, y, z]).unwrap() * h * h * h;
                    mass += rho;
                    second += rho * (x * x + y * y + z * z);
                }
            }
        }
        assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(second, 0.75, epsilon = 1e-10);
    }

    #[test]
    fn works_in_single_precision() {
        let p = DiscreteDistribution::<f32>::new(vec![0.25, 0.75]).unwrap();
        let want = -(0.25f32 * 0.25f32.ln() + 0.75 * 0.75f32.ln());
        assert!((entropy(&p) - want).abs() < 1e-6);
        let levels = EnergyLevels::<f32>::new(vec![0.0, 1.0]).unwrap();
        let sol = solve_maxent(&levels, 0.25).unwrap();
        assert!((sol.beta - 3f32.ln()).abs() < 1e-4);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn masses(max: usize) -> impl Strategy<Value = Vec<f64>> {
            prop::collection::vec(0.0f64..1.0, 1..=max)
                .prop_filter("positive total", |m| m.iter().sum::<f64>() > 1e-6)
        }

        proptest! {
            #[test]
            fn entropy_is_additive_over_products(a in masses(16), b in masses(16)) {
                let p = DiscreteDistribution::from_masses(&a).unwrap();
                let q = DiscreteDistribution::from_masses(&b).unwrap();
                let joint = entropy(&product_distribution(&p, &q));
                prop_assert!((joint - entropy(&p) - entropy(&q)).abs() < 1e-12);
            }

            #[test]
            fn product_sums_to_one(a in masses(16), b in masses(16)) {
                let p = DiscreteDistribution::from_masses(&a).unwrap();
                let q = DiscreteDistribution::from_masses(&b).unwrap();
                let pq = product_distribution(&p, &q);
                prop_assert!(DiscreteDistribution::new(pq.into_weights()).is_ok());
            }

            #[test]
            fn maxent_has_boltzmann_form(
                levels in prop::collection::vec(-5.0f64..5.0, 2..12),
                frac in 0.02f64..0.98,
            ) {
                let lv = match EnergyLevels::new(levels) { Ok(l) => l, Err(_) => return Ok(()) };
                let (lo, hi) = (lv.min(), lv.max());
                prop_assume!(hi - lo > 1e-3);
                let target = lo + frac * (hi - lo);
                let sol = solve_maxent(&lv, target).unwrap();
                let mean: f64 = sol.distribution.weights().iter().zip(lv.levels()).map(|(p, e)| p * e).sum();
                prop_assert!((mean - target).abs() < 1e-10);
                for (p, e) in sol.distribution.weights().iter().zip(lv.levels()) {
                    prop_assert!((p - sol.alpha() * (-sol.beta * e).exp()).abs() < 1e-10);
                }
            }
        }
    }
}
