//! Grid-refinement ladders and fitted convergence orders.

use serde::{Deserialize, Serialize};

use crate::algebra::Multivector;
use crate::field::{cauchy_kernel_field, monogenic_defect_annulus, GridSpec};
use crate::solver::{
    centered_bump_field, dual_operator_gap, weitzenbock_residual, BumpProfile, SolverError,
};
use crate::weight::WeightSpec;

/// Least-squares slope of `log(value)` against `log(h)`. Returns `None` with
/// fewer than two usable points or when a value is not positive.
pub fn fit_order(hs: &[f64], values: &[f64]) -> Option<f64> {
    if hs.len() != values.len() || hs.len() < 2 {
        return None;
    }
    if values
        .iter()
        .chain(hs)
        .any(|v| !(*v > 0.0) || !v.is_finite())
    {
        return None;
    }
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}

/// Whether the sequence strictly decreases.
pub fn strictly_decreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] < w[0])
}

/// One rung of a refinement study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rung {
    pub counts: Vec<usize>,
    pub h: f64,
    pub value: f64,
    /// Quantity the value is measured against, when relevant.
    pub reference: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Study {
    pub name: String,
    pub n: usize,
    pub rungs: Vec<Rung>,
    pub order: Option<f64>,
}

impl Study {
    fn new(name: &str, n: usize, rungs: Vec<Rung>) -> Self {
        let hs: Vec<f64> = rungs.iter().map(|r| r.h).collect();
        let vs: Vec<f64> = rungs.iter().map(|r| r.value).collect();
        Study {
            name: name.to_string(),
            n,
            order: fit_order(&hs, &vs),
            rungs,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        self.rungs.iter().map(|r| r.value).collect()
    }
}

/// `base` refined `k = 0..rungs` times, halving the spacing each time.
pub fn ladder(base: &GridSpec, rungs: usize) -> Result<Vec<GridSpec>, SolverError> {
    (0..rungs as u32)
        .map(|k| base.refined(k).map_err(SolverError::from))
        .collect()
}

/// Points per axis on the coarsest rung of the bump studies.
pub const DEFAULT_BASE_COUNT: usize = 17;

/// Box `[-1, 1]^{n+1}` with margin 2, the default domain for the
/// smooth-bump studies.
pub fn default_bump_grid(n: usize, count: usize) -> Result<GridSpec, SolverError> {
    Ok(GridSpec::cube(n + 1, -1.0, 1.0, count, 2)?)
}

/// Test bump used by the refinement studies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpSpec {
    pub profile: BumpProfile,
    /// Radius relative to the box half-width.
    pub radius_fraction: f64,
}

impl Default for BumpSpec {
    fn default() -> Self {
        BumpSpec {
            profile: BumpProfile::Polynomial(4),
            radius_fraction: 0.85,
        }
    }
}

/// Relative gap between the analytic dual operator and the exact discrete
/// adjoint applied to a smooth bump, across the ladder.
pub fn dual_operator_study(
    base: &GridSpec,
    n: usize,
    w: &WeightSpec,
    amplitude: &Multivector,
    bump: BumpSpec,
    rungs: usize,
) -> Result<Study, SolverError> {
    let mut out = Vec::new();
    for grid in ladder(base, rungs)? {
        let alpha = centered_bump_field(&grid, n, amplitude, bump.profile, bump.radius_fraction)?;
        let gap = dual_operator_gap(&alpha, w)?;
        out.push(Rung {
            counts: grid.counts().to_vec(),
            h: grid.max_spacing(),
            value: gap,
            reference: None,
        });
    }
    Ok(Study::new("dual_operator_gap", n, out))
}

/// Weitzenböck gap `|lhs − rhs|` across the ladder; `reference` holds `lhs`.
pub fn weitzenbock_study(
    base: &GridSpec,
    n: usize,
    w: &WeightSpec,
    amplitude: &Multivector,
    bump: BumpSpec,
    include_curvature: bool,
    rungs: usize,
) -> Result<Study, SolverError> {
    let mut out = Vec::new();
    for grid in ladder(base, rungs)? {
        let alpha = centered_bump_field(&grid, n, amplitude, bump.profile, bump.radius_fraction)?;
        let r = weitzenbock_residual(&alpha, w, include_curvature)?;
        out.push(Rung {
            counts: grid.counts().to_vec(),
            h: grid.max_spacing(),
            value: r.gap,
            reference: Some(r.lhs),
        });
    }
    Ok(Study::new("weitzenbock_gap", n, out))
}

/// Lower corner, upper corner and base cell count of the kernel box. The
/// box is slightly off-centre so that no node of any rung lands on the
/// origin.
pub const KERNEL_BOX: (f64, f64, usize) = (-1.07, 1.13, 11);

/// Monogenic defect of the Cauchy kernel on `0.5 ≤ |x| ≤ 1`, with
/// `11·2^k + 1` points per axis on rung `k`.
pub fn cauchy_kernel_study(n: usize, rungs: usize) -> Result<Study, SolverError> {
    let (lo, hi, cells) = KERNEL_BOX;
    let base = GridSpec::cube(n + 1, lo, hi, cells + 1, 1)?;
    let mut out = Vec::new();
    for grid in ladder(&base, rungs)? {
        let g = cauchy_kernel_field(&grid, n, 0.5)?;
        let defect = monogenic_defect_annulus(&g, 0.5, 1.0)?;
        out.push(Rung {
            counts: grid.counts().to_vec(),
            h: grid.max_spacing(),
            value: defect,
            reference: None,
        });
    }
    Ok(Study::new("cauchy_kernel_defect", n, out))
}
