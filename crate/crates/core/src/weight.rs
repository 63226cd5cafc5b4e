//! Weight functions `φ ∈ C²(Ω, R)` given as analytic evaluator triples
//! (value, gradient, Hessian), with the presets used by the solver and a
//! pointwise checker for the sufficient-condition hypotheses.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

type ValueFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type GradientFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;
type HessianFn = dyn Fn(&[f64]) -> Vec<Vec<f64>> + Send + Sync;

/// A scalar profile `ψ(t)` with its first two derivatives.
#[derive(Clone)]
pub struct Profile {
    pub value: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub first: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub second: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl Profile {
    /// `ψ(t) = t^k`.
    pub fn power(k: i32) -> Self {
        let kf = k as f64;
        Profile {
            value: Arc::new(move |t| t.powi(k)),
            first: Arc::new(move |t| if k == 0 { 0.0 } else { kf * t.powi(k - 1) }),
            second: Arc::new(move |t| {
                if k < 2 {
                    0.0
                } else {
                    kf * (kf - 1.0) * t.powi(k - 2)
                }
            }),
        }
    }
}

/// A weight `φ` on `R^{dim}` (`dim = n + 1`).
#[derive(Clone)]
pub struct WeightSpec {
    name: String,
    dim: usize,
    value: Arc<ValueFn>,
    gradient: Arc<GradientFn>,
    hessian: Arc<HessianFn>,
}

impl fmt::Debug for WeightSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WeightSpec")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .finish_non_exhaustive()
    }
}

impl WeightSpec {
    pub fn from_fns(
        name: impl Into<String>,
        dim: usize,
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        hessian: impl Fn(&[f64]) -> Vec<Vec<f64>> + Send + Sync + 'static,
    ) -> Self {
        WeightSpec {
            name: name.into(),
            dim,
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            hessian: Arc::new(hessian),
        }
    }

    /// `φ ≡ 0`.
    pub fn zero(n: usize) -> Self {
        let dim = n + 1;
        Self::from_fns(
            "zero",
            dim,
            |_| 0.0,
            move |_| vec![0.0; dim],
            move |_| vec![vec![0.0; dim]; dim],
        )
    }

    /// `φ(x) = ½ xᵀ H x` for a constant symmetric Hessian `H`.
    pub fn quadratic(name: impl Into<String>, hessian: Vec<Vec<f64>>) -> Self {
        let dim = hessian.len();
        assert!(hessian.iter().all(|row| row.len() == dim));
        let h = Arc::new(hessian);
        let (hv, hg, hh) = (h.clone(), h.clone(), h);
        Self::from_fns(
            name,
            dim,
            move |x| {
                let mut s = 0.0;
                for i in 0..dim {
                    for j in 0..dim {
                        s += hv[i][j] * x[i] * x[j];
                    }
                }
                0.5 * s
            },
            move |x| {
                (0..dim)
                    .map(|i| (0..dim).map(|j| hg[i][j] * x[j]).sum())
                    .collect()
            },
            move |_| (*hh).clone(),
        )
    }

    /// `φ(x) = x_0²`.
    pub fn x0_squared(n: usize) -> Self {
        let dim = n + 1;
        let mut h = vec![vec![0.0; dim]; dim];
        h[0][0] = 2.0;
        Self::quadratic("x0_squared", h)
    }

    /// `φ(x) = (n+1) x_0² − Σ_{i≥1} x_i²`: `Δφ = 2`, `∂²φ/∂x_i² = −2` for `i ≥ 1`.
    pub fn anisotropic(n: usize) -> Self {
        let dim = n + 1;
        let mut h = vec![vec![0.0; dim]; dim];
        h[0][0] = 2.0 * (n as f64 + 1.0);
        for (i, row) in h.iter_mut().enumerate().skip(1) {
            row[i] = -2.0;
        }
        Self::quadratic("anisotropic", h)
    }

    /// `φ(x) = ψ(x_0)`.
    pub fn x0_profile(n: usize, name: impl Into<String>, psi: Profile) -> Self {
        let dim = n + 1;
        let (pv, pg, ph) = (psi.value, psi.first, psi.second);
        Self::from_fns(
            name,
            dim,
            move |x| pv(x[0]),
            move |x| {
                let mut g = vec![0.0; dim];
                g[0] = pg(x[0]);
                g
            },
            move |x| {
                let mut h = vec![vec![0.0; dim]; dim];
                h[0][0] = ph(x[0]);
                h
            },
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Number of coordinates, `n + 1`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (self.gradient)(x)
    }

    /// `hessian[j][i] = ∂²φ/∂x_j∂x_i`.
    pub fn hessian(&self, x: &[f64]) -> Vec<Vec<f64>> {
        (self.hessian)(x)
    }

    /// `Δφ`.
    pub fn laplacian(&self, x: &[f64]) -> f64 {
        let h = self.hessian(x);
        (0..self.dim).map(|i| h[i][i]).sum()
    }
}

/// Absolute slack used when testing the sign and vanishing conditions.
pub const HYPOTHESIS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointHypotheses {
    pub point: Vec<f64>,
    pub laplacian: f64,
    /// `Δφ ≥ 0`.
    pub laplacian_nonnegative: bool,
    /// `∂²φ/∂x_j∂x_i = 0` for `i ≠ j`, `1 ≤ i, j ≤ n`.
    pub spatial_offdiagonal_zero: bool,
    /// `∂²φ/∂x_i² ≤ 0` for `1 ≤ i ≤ n`.
    pub spatial_diagonal_nonpositive: bool,
}

impl PointHypotheses {
    pub fn holds(&self) -> bool {
        self.laplacian_nonnegative
            && self.spatial_offdiagonal_zero
            && self.spatial_diagonal_nonpositive
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub weight: String,
    pub points: Vec<PointHypotheses>,
    pub all_hold: bool,
}

impl HypothesisReport {
    pub fn failures(&self) -> impl Iterator<Item = &PointHypotheses> {
        self.points.iter().filter(|p| !p.holds())
    }
}

/// Pointwise check of the sufficient conditions for the weighted bound.
///
/// Only the literal conditions are encoded: mixed derivatives involving
/// `x_0` are left unconstrained because their contribution to the dual
/// norm identity vanishes.
pub fn check_theorem2_hypotheses(w: &WeightSpec, samples: &[Vec<f64>]) -> HypothesisReport {
    let points: Vec<PointHypotheses> = samples
        .iter()
        .map(|x| {
            let h = w.hessian(x);
            let dim = w.dim();
            let laplacian: f64 = (0..dim).map(|i| h[i][i]).sum();
            let mut offdiag = true;
            let mut diag = true;
            for i in 1..dim {
                if h[i][i] > HYPOTHESIS_TOL {
                    diag = false;
                }
                for j in 1..dim {
                    if i != j && h[j][i].abs() > HYPOTHESIS_TOL {
                        offdiag = false;
                    }
                }
            }
            PointHypotheses {
                point: x.clone(),
                laplacian,
                laplacian_nonnegative: laplacian >= -HYPOTHESIS_TOL,
                spatial_offdiagonal_zero: offdiag,
                spatial_diagonal_nonpositive: diag,
            }
        })
        .collect();
    let all_hold = points.iter().all(PointHypotheses::holds);
    HypothesisReport {
        weight: w.name().to_string(),
        points,
        all_hold,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fd_check(w: &WeightSpec, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = 1e-4;
        let dim = w.dim();
        for _ in 0..100 {
            let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.5..1.5)).collect();
            let grad = w.gradient(&x);
            let hess = w.hessian(&x);
            for i in 0..dim {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd = (w.value(&xp) - w.value(&xm)) / (2.0 * h);
                let scale = grad[i].abs().max(1.0);
                assert!(
                    (fd - grad[i]).abs() / scale <= 1e-6,
                    "{} grad {i}",
                    w.name()
                );
                let gp = w.gradient(&xp);
                let gm = w.gradient(&xm);
                for j in 0..dim {
                    let fd2 = (gp[j] - gm[j]) / (2.0 * h);
                    let scale = hess[j][i].abs().max(1.0);
                    assert!(
                        (fd2 - hess[j][i]).abs() / scale <= 1e-6,
                        "{} hessian {j}{i}",
                        w.name()
                    );
                    assert_eq!(hess[j][i], hess[i][j]);
                }
            }
        }
    }

    #[test]
    fn presets_match_finite_differences() {
        for n in 1..=3 {
            fd_check(&WeightSpec::x0_squared(n), 1);
            fd_check(&WeightSpec::anisotropic(n), 2);
            fd_check(&WeightSpec::x0_profile(n, "x0^4", Profile::power(4)), 3);
            fd_check(&WeightSpec::zero(n), 4);
        }
    }

    #[test]
    fn x0_squared_values() {
        let w = WeightSpec::x0_squared(1);
        assert_eq!(w.value(&[1.0, 0.5]), 1.0);
        let h = w.hessian(&[0.3, -0.7]);
        assert_eq!(h[0][0], 2.0);
        assert_eq!(h[1][1], 0.0);
    }

    #[test]
    fn anisotropic_values() {
        let w = WeightSpec::anisotropic(3);
        let x = [0.2, -0.4, 1.1, 0.6];
        assert_eq!(w.laplacian(&x), 2.0);
        let h = w.hessian(&x);
        for (i, row) in h.iter().enumerate().skip(1) {
            assert_eq!(row[i], -2.0);
        }
        assert_eq!(h[1][2], 0.0);
    }

    #[test]
    fn x0_profile_values() {
        let sq = WeightSpec::x0_profile(2, "t^2", Profile::power(2));
        let reference = WeightSpec::x0_squared(2);
        let x = [0.7, -0.1, 0.4];
        assert_eq!(sq.value(&x), reference.value(&x));
        assert_eq!(sq.hessian(&x), reference.hessian(&x));
        let quartic = WeightSpec::x0_profile(2, "t^4", Profile::power(4));
        assert_eq!(quartic.hessian(&[1.0, 0.3, 0.3])[0][0], 12.0);
        assert_eq!(quartic.hessian(&[0.0, 0.3, 0.3])[0][0], 0.0);
    }

    fn grid_samples(dim: usize) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        let ticks = [-1.0, -0.25, 0.0, 0.5, 1.0];
        let total = ticks.len().pow(dim as u32);
        for k in 0..total {
            let mut r = k;
            let mut x = Vec::with_capacity(dim);
            for _ in 0..dim {
                x.push(ticks[r % ticks.len()]);
                r /= ticks.len();
            }
            out.push(x);
        }
        out
    }

    #[test]
    fn hypotheses_for_presets() {
        for n in 1..=3 {
            let samples = grid_samples(n + 1);
            assert!(check_theorem2_hypotheses(&WeightSpec::anisotropic(n), &samples).all_hold);
            assert!(check_theorem2_hypotheses(&WeightSpec::x0_squared(n), &samples).all_hold);
        }
    }

    #[test]
    fn hypotheses_detect_violations() {
        let samples = grid_samples(3);
        // φ = x_1²
        let mut h = vec![vec![0.0; 3]; 3];
        h[1][1] = 2.0;
        let report = check_theorem2_hypotheses(&WeightSpec::quadratic("x1^2", h), &samples);
        assert!(!report.all_hold);
        assert!(report
            .points
            .iter()
            .all(|p| !p.spatial_diagonal_nonpositive));
        assert!(report.points.iter().all(|p| p.laplacian_nonnegative));

        // φ = x_0 x_1: only an x_0-mixed derivative, which is unconstrained.
        let mut h = vec![vec![0.0; 3]; 3];
        h[0][1] = 1.0;
        h[1][0] = 1.0;
        let report = check_theorem2_hypotheses(&WeightSpec::quadratic("x0x1", h), &samples);
        assert!(report.all_hold);
        assert!(report.points.iter().all(|p| p.laplacian == 0.0));

        // φ = x_1 x_2 breaks the spatial off-diagonal condition.
        let mut h = vec![vec![0.0; 3]; 3];
        h[1][2] = 1.0;
        h[2][1] = 1.0;
        let report = check_theorem2_hypotheses(&WeightSpec::quadratic("x1x2", h), &samples);
        assert!(report.points.iter().all(|p| !p.spatial_offdiagonal_zero));
    }
}
