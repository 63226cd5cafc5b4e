//! Matrix form of the discrete Dirac operator, minimum-weighted-norm
//! solutions of `D̄u = f`, and certificates for the weighted norm bounds.
//!
//! Rows of the operator are `(interior node, blade)` pairs and columns are
//! `(node, blade)` pairs over the whole grid. Row and column spaces carry the
//! quadrature inner products `⟨x, y⟩_W = Σ_k W_k x_k y_k` with
//! `W = 2^n · cellvol · e^{-φ}`, so that `⟨x, x⟩_W` is the discrete `‖·‖²_φ`.
//! Column weights are positive on every node; row weights live on interior
//! nodes only.

use std::io::{self, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::Multivector;
use crate::field::{
    dirac, dual_operator_analytic, first_order_terms, mul_into, norm_sq_with, polynomial_bump,
    smooth_bump, weighted_inner0, weighted_norm_sq, CliffordField, FieldError, GridSpec, Side,
    StencilTerm,
};
use crate::identity::{i4_closed_with, CaseFormula};
use crate::weight::{check_theorem2_hypotheses, WeightSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("weight {index} is {value}; weights must be positive and finite")]
    NonPositiveWeight { index: usize, value: f64 },
    #[error("vector has length {got}, expected {expected}")]
    Length { expected: usize, got: usize },
    #[error("source must vanish outside the interior nodes")]
    SourceOffInterior,
    #[error("field does not live on the operator's grid")]
    GridMismatch,
    #[error("u does not solve the system: relative residual {0:e}")]
    NotASolution(f64),
}

/// Compressed sparse row matrix. Entries within a row keep insertion order,
/// which fixes the summation order of every product.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>, SolverError> {
        if x.len() != self.ncols {
            return Err(SolverError::Length {
                expected: self.ncols,
                got: x.len(),
            });
        }
        Ok((0..self.nrows)
            .map(|r| {
                let mut acc = 0.0;
                for (c, v) in self.row(r) {
                    acc += v * x[c];
                }
                acc
            })
            .collect())
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for c in 0..self.ncols {
            counts[c + 1] += counts[c];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                let slot = next[c];
                col_idx[slot] = r;
                values[slot] = v;
                next[c] += 1;
            }
        }
        SparseMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// `diag(left) · self · diag(right)`.
    pub fn scaled(&self, left: &[f64], right: &[f64]) -> SparseMatrix {
        let mut out = self.clone();
        for r in 0..self.nrows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                out.values[k] = left[r] * self.values[k] * right[self.col_idx[k]];
            }
        }
        out
    }

    /// Dense copy, row-major.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.ncols]; self.nrows];
        for (r, row) in dense.iter_mut().enumerate() {
            for (c, v) in self.row(r) {
                row[c] += v;
            }
        }
        dense
    }

    /// One `row col value` line per stored entry, full precision.
    pub fn write_coordinate<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "% {} {} {}", self.nrows, self.ncols, self.nnz())?;
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                writeln!(out, "{r} {c} {v:?}")?;
            }
        }
        Ok(())
    }
}

/// The discrete `D̄` as a sparse matrix from grid fields to interior rows.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    grid: GridSpec,
    n: usize,
    row_nodes: Vec<usize>,
    matrix: SparseMatrix,
}

/// Assembles `D̄ = Σ_k e_k ∂ᶜ_k` with one row per `(interior node, blade)`.
pub fn assemble_dirac(grid: &GridSpec, n: usize) -> Result<OperatorMatrix, SolverError> {
    if grid.dim() != n + 1 {
        return Err(FieldError::DimensionMismatch {
            grid_dim: grid.dim(),
            expected: n + 1,
        }
        .into());
    }
    let width = 1usize << n;
    let row_nodes: Vec<usize> = grid.interior_nodes().collect();
    let mut row_ptr = vec![0];
    let mut col_idx = Vec::with_capacity(row_nodes.len() * width * 2 * grid.dim());
    let mut values = Vec::with_capacity(col_idx.capacity());
    let mut terms: Vec<StencilTerm> = Vec::with_capacity(2 * grid.dim());
    for &node in &row_nodes {
        for blade in 0..width {
            first_order_terms(grid, node, blade, Side::Left, false, &mut terms);
            for t in &terms {
                col_idx.push(t.node * width + t.blade);
                values.push(t.coef);
            }
            row_ptr.push(col_idx.len());
        }
    }
    let matrix = SparseMatrix {
        nrows: row_nodes.len() * width,
        ncols: grid.node_count() * width,
        row_ptr,
        col_idx,
        values,
    };
    Ok(OperatorMatrix {
        grid: grid.clone(),
        n,
        row_nodes,
        matrix,
    })
}

impl OperatorMatrix {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    /// Grid node of each row block, in row order.
    pub fn row_nodes(&self) -> &[usize] {
        &self.row_nodes
    }

    fn width(&self) -> usize {
        1 << self.n
    }

    fn check_field(&self, f: &CliffordField) -> Result<(), SolverError> {
        if f.grid() != &self.grid || f.n() != self.n {
            Err(SolverError::GridMismatch)
        } else {
            Ok(())
        }
    }

    /// Restriction of a field to the row space.
    pub fn rows_of(&self, f: &CliffordField) -> Result<Vec<f64>, SolverError> {
        self.check_field(f)?;
        let mut out = Vec::with_capacity(self.matrix.nrows);
        for &node in &self.row_nodes {
            out.extend_from_slice(f.node(node));
        }
        Ok(out)
    }

    /// Embeds a row vector as a field that vanishes off the interior.
    pub fn field_from_rows(&self, rows: &[f64]) -> Result<CliffordField, SolverError> {
        if rows.len() != self.matrix.nrows {
            return Err(SolverError::Length {
                expected: self.matrix.nrows,
                got: rows.len(),
            });
        }
        let w = self.width();
        let mut data = vec![0.0; self.grid.node_count() * w];
        for (k, &node) in self.row_nodes.iter().enumerate() {
            data[node * w..(node + 1) * w].copy_from_slice(&rows[k * w..(k + 1) * w]);
        }
        Ok(CliffordField::from_data(&self.grid, self.n, data)?)
    }

    pub fn field_from_cols(&self, cols: &[f64]) -> Result<CliffordField, SolverError> {
        Ok(CliffordField::from_data(&self.grid, self.n, cols.to_vec())?)
    }

    /// `A·u` for a field `u`, as a row vector.
    pub fn apply_field(&self, u: &CliffordField) -> Result<Vec<f64>, SolverError> {
        self.check_field(u)?;
        self.matrix.apply(u.data())
    }
}

/// Positive quadrature weights on the row and column spaces.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteWeights {
    row: Vec<f64>,
    col: Vec<f64>,
}

impl DiscreteWeights {
    pub fn new(row: Vec<f64>, col: Vec<f64>) -> Result<Self, SolverError> {
        for (index, &value) in row.iter().chain(&col).enumerate() {
            if !(value > 0.0 && value.is_finite()) {
                return Err(SolverError::NonPositiveWeight { index, value });
            }
        }
        Ok(DiscreteWeights { row, col })
    }

    /// All weights equal to one.
    pub fn unit(op: &OperatorMatrix) -> Self {
        DiscreteWeights {
            row: vec![1.0; op.matrix.nrows],
            col: vec![1.0; op.matrix.ncols],
        }
    }

    /// `2^n · cellvol · e^{-φ(x)}` at each row and column node.
    pub fn from_weight(op: &OperatorMatrix, w: &WeightSpec) -> Result<Self, SolverError> {
        let node_weights = node_weights(&op.grid, op.n, w);
        let width = op.width();
        let col: Vec<f64> = (0..op.matrix.ncols)
            .map(|k| node_weights[k / width])
            .collect();
        let row: Vec<f64> = (0..op.matrix.nrows)
            .map(|k| node_weights[op.row_nodes[k / width]])
            .collect();
        Self::new(row, col)
    }

    pub fn row(&self) -> &[f64] {
        &self.row
    }

    pub fn col(&self) -> &[f64] {
        &self.col
    }

    fn check(&self, op: &OperatorMatrix) -> Result<(), SolverError> {
        if self.row.len() != op.matrix.nrows {
            return Err(SolverError::Length {
                expected: op.matrix.nrows,
                got: self.row.len(),
            });
        }
        if self.col.len() != op.matrix.ncols {
            return Err(SolverError::Length {
                expected: op.matrix.ncols,
                got: self.col.len(),
            });
        }
        Ok(())
    }
}

fn node_weights(grid: &GridSpec, n: usize, w: &WeightSpec) -> Vec<f64> {
    let scale = (1u64 << n) as f64 * grid.cell_volume();
    let mut x = vec![0.0; grid.dim()];
    (0..grid.node_count())
        .map(|node| {
            grid.coords_into(node, &mut x);
            scale * (-w.value(&x)).exp()
        })
        .collect()
}

/// `⟨x, y⟩_W`.
pub fn weighted_dot(x: &[f64], y: &[f64], weights: &[f64]) -> f64 {
    let mut acc = 0.0;
    for k in 0..x.len() {
        acc += weights[k] * x[k] * y[k];
    }
    acc
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (a, b) in x.iter().zip(y) {
        acc += a * b;
    }
    acc
}

/// `A* = W_col⁻¹ Aᵀ W_row`, the adjoint of `A` between the weighted row and
/// column inner products.
pub fn weighted_adjoint(
    op: &OperatorMatrix,
    weights: &DiscreteWeights,
) -> Result<SparseMatrix, SolverError> {
    weights.check(op)?;
    let inv_col: Vec<f64> = weights.col.iter().map(|w| 1.0 / w).collect();
    Ok(op.matrix.transpose().scaled(&inv_col, &weights.row))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
    /// Set when a search direction had nonpositive curvature.
    pub breakdown: bool,
}

/// Solves the symmetric positive definite system given by `apply` with
/// conjugate gradients from a zero start.
pub fn conjugate_gradient(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> CgOutcome {
    let bnorm = dot(b, b).sqrt();
    let mut x = vec![0.0; b.len()];
    if bnorm == 0.0 {
        return CgOutcome {
            x,
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
            breakdown: false,
        };
    }
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rs = dot(&r, &r);
    let mut iterations = 0;
    let mut breakdown = false;
    while iterations < max_iter && rs.sqrt() > tol * bnorm {
        let mp = apply(&p);
        let curvature = dot(&p, &mp);
        if curvature <= 0.0 {
            breakdown = true;
            break;
        }
        let step = rs / curvature;
        for k in 0..x.len() {
            x[k] += step * p[k];
            r[k] -= step * mp[k];
        }
        let rs_new = dot(&r, &r);
        let beta = rs_new / rs;
        for k in 0..p.len() {
            p[k] = r[k] + beta * p[k];
        }
        rs = rs_new;
        iterations += 1;
    }
    let relative_residual = rs.sqrt() / bnorm;
    CgOutcome {
        x,
        iterations,
        relative_residual,
        converged: relative_residual <= tol,
        breakdown,
    }
}

/// Default relative residual target.
pub const DEFAULT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundVariant {
    /// `‖u‖²_φ ≤ 2^{2n} ∫ |f|²₀ / Δφ · e^{-φ}`.
    Theorem2,
    /// `n = 1`: `‖u‖²_φ ≤ ∫ |f|²₀ / Δφ · e^{-φ}`.
    N1Corollary,
    /// Unweighted bound on a slab `a ≤ x_0 ≤ b`.
    BoundedDomain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateStatus {
    Satisfied,
    Violated,
    /// The bound constant is infinite, so the inequality holds trivially.
    Vacuous,
    /// The weight breaks the sign hypotheses; the comparison is reported but
    /// not asserted.
    OutOfHypothesis,
}

/// Constants of the slab bound `‖u‖² ≤ c(a,b) ∫ |f|²₀` in unweighted norms,
/// with `c(a,b) = 2^{2n} e^{max φ − min φ} / min Δφ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundedDomainConstants {
    pub x0_lower: f64,
    pub x0_upper: f64,
    pub phi_min: f64,
    pub phi_max: f64,
    pub laplacian_min: f64,
    pub c_ab: Option<f64>,
    pub u_norm_sq_unweighted: f64,
    pub f_norm_sq_unweighted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCertificate {
    pub variant: BoundVariant,
    /// `c`; `None` when infinite.
    pub bound_constant: Option<f64>,
    pub bound_infinite: bool,
    pub factor: f64,
    /// The norm compared against `factor · bound_constant`.
    pub compared_norm_sq: f64,
    pub bound_satisfied: bool,
    pub status: CertificateStatus,
    pub slack: f64,
    /// `compared_norm_sq / (factor · bound_constant)`, when finite.
    pub observed_ratio: Option<f64>,
    pub hypotheses_hold: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounded_domain: Option<BoundedDomainConstants>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub n: usize,
    pub weight: String,
    /// `‖A u − f‖₂` over row coefficients.
    pub residual_norm: f64,
    pub relative_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Requested relative residual.
    pub tolerance: f64,
    /// Relative residual reached by the iteration.
    pub tolerance_achieved: f64,
    pub null_space_flag: bool,
    /// `‖u‖²_φ` with column weights on every node.
    pub u_norm_sq: f64,
    #[serde(flatten)]
    pub certificate: Option<BoundCertificate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinNormSolution {
    pub u: CliffordField,
    /// `λ` with `u = W_col⁻¹ Aᵀ λ`.
    pub multiplier: Vec<f64>,
    pub report: SolveReport,
}

/// Minimum `‖·‖_{W_col}` solution of `A u = f` via `(A W_col⁻¹ Aᵀ) λ = f`.
pub fn solve_min_norm(
    op: &OperatorMatrix,
    weights: &DiscreteWeights,
    f: &CliffordField,
    tol: f64,
    weight_name: &str,
) -> Result<MinNormSolution, SolverError> {
    weights.check(op)?;
    op.check_field(f)?;
    if !f.is_compactly_supported() {
        return Err(SolverError::SourceOffInterior);
    }
    let b = op.rows_of(f)?;
    let at = op.matrix.transpose();
    let inv_col: Vec<f64> = weights.col.iter().map(|w| 1.0 / w).collect();
    let lift = |lambda: &[f64]| -> Vec<f64> {
        let mut u = at.apply(lambda).expect("row-length vector");
        for (v, s) in u.iter_mut().zip(&inv_col) {
            *v *= s;
        }
        u
    };
    let normal = |v: &[f64]| op.matrix.apply(&lift(v)).expect("column-length vector");
    let max_iter = 10 * op.matrix.nrows.max(1);
    let cg = conjugate_gradient(normal, &b, tol, max_iter);
    let u_vec = lift(&cg.x);
    let au = op.matrix.apply(&u_vec)?;
    let residual: Vec<f64> = au.iter().zip(&b).map(|(a, f)| a - f).collect();
    let residual_norm = dot(&residual, &residual).sqrt();
    let bnorm = dot(&b, &b).sqrt();
    let relative_residual = if bnorm == 0.0 {
        residual_norm
    } else {
        residual_norm / bnorm
    };
    let u_norm_sq = weighted_dot(&u_vec, &u_vec, &weights.col);
    let u = op.field_from_cols(&u_vec)?;
    let report = SolveReport {
        n: op.n,
        weight: weight_name.to_string(),
        residual_norm,
        relative_residual,
        iterations: cg.iterations,
        converged: cg.converged,
        tolerance: tol,
        tolerance_achieved: cg.relative_residual,
        null_space_flag: cg.breakdown || !cg.converged,
        u_norm_sq,
        certificate: None,
    };
    Ok(MinNormSolution {
        u,
        multiplier: cg.x,
        report,
    })
}

/// `‖u‖²_φ` with quadrature weight on every node, matching the norm the
/// solver minimizes.
pub fn solution_norm_sq(u: &CliffordField, w: &WeightSpec) -> f64 {
    let weights = node_weights(u.grid(), 0, w);
    norm_sq_with(u, &weights)
}

/// `∫ |f|²₀ / Δφ · e^{-φ}` over interior nodes with `0/0 = 0`; `None` when
/// some node has `f ≠ 0` and `Δφ ≤ 0`.
pub fn bound_constant(f: &CliffordField, w: &WeightSpec) -> Option<f64> {
    let grid = f.grid();
    let vol = grid.cell_volume();
    let scale = (1u64 << f.n()) as f64;
    let mut acc = 0.0;
    for node in grid.interior_nodes() {
        let f2: f64 = scale * f.node(node).iter().map(|c| c * c).sum::<f64>();
        if f2 == 0.0 {
            continue;
        }
        let x = grid.coords(node);
        let lap = w.laplacian(&x);
        if lap <= 0.0 {
            return None;
        }
        acc += f2 / lap * (-w.value(&x)).exp() * vol;
    }
    Some(acc)
}

/// Compares the solution against the bound selected by `variant`.
pub fn certify_bound(
    u: &CliffordField,
    f: &CliffordField,
    w: &WeightSpec,
    variant: BoundVariant,
    slack: f64,
) -> BoundCertificate {
    let n = f.n();
    let grid = f.grid();
    let samples: Vec<Vec<f64>> = (0..grid.node_count()).map(|v| grid.coords(v)).collect();
    let hyp = check_theorem2_hypotheses(w, &samples);
    let mut warnings = Vec::new();
    let hypotheses_hold = match variant {
        BoundVariant::N1Corollary => {
            if n != 1 {
                warnings.push(format!("n = 1 bound applied with n = {n}"));
            }
            n == 1 && hyp.points.iter().all(|p| p.laplacian_nonnegative)
        }
        _ => hyp.all_hold,
    };
    if !hypotheses_hold {
        warnings.push(format!("weight {} violates the sign hypotheses", w.name()));
    }
    let factor = match variant {
        BoundVariant::N1Corollary => 1.0,
        _ => 4f64.powi(n as i32),
    };

    let (constant, compared, bounded) = match variant {
        BoundVariant::BoundedDomain => {
            let phis: Vec<f64> = samples.iter().map(|x| w.value(x)).collect();
            let laps: Vec<f64> = samples.iter().map(|x| w.laplacian(x)).collect();
            let phi_min = phis.iter().cloned().fold(f64::INFINITY, f64::min);
            let phi_max = phis.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let laplacian_min = laps.iter().cloned().fold(f64::INFINITY, f64::min);
            let zero = WeightSpec::zero(n);
            let u_unw = solution_norm_sq(u, &zero);
            let f_unw = weighted_norm_sq(f, &zero).expect("matching dimensions");
            let per_unit = if laplacian_min > 0.0 {
                Some((phi_max - phi_min).exp() / laplacian_min)
            } else {
                None
            };
            let constant = if f_unw == 0.0 {
                Some(0.0)
            } else {
                per_unit.map(|k| k * f_unw)
            };
            let consts = BoundedDomainConstants {
                x0_lower: grid.lower()[0],
                x0_upper: grid.upper()[0],
                phi_min,
                phi_max,
                laplacian_min,
                c_ab: per_unit.map(|k| factor * k),
                u_norm_sq_unweighted: u_unw,
                f_norm_sq_unweighted: f_unw,
            };
            (constant, u_unw, Some(consts))
        }
        _ => (bound_constant(f, w), solution_norm_sq(u, w), None),
    };

    let (bound_satisfied, observed_ratio) = match constant {
        Some(c) => {
            let bound = factor * c;
            let ratio = if bound > 0.0 {
                Some(compared / bound)
            } else {
                None
            };
            (compared <= bound + slack, ratio)
        }
        None => {
            warnings.push("bound constant is infinite: certificate is vacuous".into());
            (true, None)
        }
    };
    let status = if !hypotheses_hold {
        CertificateStatus::OutOfHypothesis
    } else if constant.is_none() {
        CertificateStatus::Vacuous
    } else if bound_satisfied {
        CertificateStatus::Satisfied
    } else {
        CertificateStatus::Violated
    };
    BoundCertificate {
        variant,
        bound_constant: constant,
        bound_infinite: constant.is_none(),
        factor,
        compared_norm_sq: compared,
        bound_satisfied,
        status,
        slack,
        observed_ratio,
        hypotheses_hold,
        bounded_domain: bounded,
        warnings,
    }
}

/// `|(f, α)|²₀ / (‖u‖² ‖A*α‖²)` for one test vector; `None` when the
/// denominator vanishes.
pub fn necessity_ratio(
    op: &OperatorMatrix,
    weights: &DiscreteWeights,
    adjoint: &SparseMatrix,
    f_rows: &[f64],
    u_norm_sq: f64,
    alpha_rows: &[f64],
) -> Result<Option<f64>, SolverError> {
    let width = op.width();
    let mut acc = vec![0.0; width];
    let mut prod = vec![0.0; width];
    let mut fbar = vec![0.0; width];
    let signs: Vec<f64> = (0..width)
        .map(|b| crate::algebra::conjugation_sign((b as u32).count_ones()).apply(1.0))
        .collect();
    for k in 0..op.row_nodes.len() {
        let span = k * width..(k + 1) * width;
        for (b, s) in signs.iter().enumerate() {
            fbar[b] = s * f_rows[span.start + b];
        }
        mul_into(&fbar, &alpha_rows[span.clone()], &mut prod);
        // Row weights carry the 2^n factor of |·|²₀; strip it for the
        // multivector-valued inner product.
        let q = weights.row[span.start] / width as f64;
        for b in 0..width {
            acc[b] += q * prod[b];
        }
    }
    let inner = Multivector::from_coeffs(op.n, acc).expect("width is 2^n");
    let a_star = adjoint.apply(alpha_rows)?;
    let denom = u_norm_sq * weighted_dot(&a_star, &a_star, &weights.col);
    if denom == 0.0 {
        return Ok(None);
    }
    Ok(Some(inner.norm0_sq() / denom))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NecessityReport {
    pub trials: usize,
    pub skipped: usize,
    pub max_ratio: f64,
    pub ratios: Vec<f64>,
}

/// Worst Cauchy–Schwarz ratio over `alphas`, given `u` solving `A u = f`.
pub fn necessity_check(
    op: &OperatorMatrix,
    weights: &DiscreteWeights,
    f: &CliffordField,
    u: &CliffordField,
    alphas: &[Vec<f64>],
    residual_tol: f64,
) -> Result<NecessityReport, SolverError> {
    let f_rows = op.rows_of(f)?;
    let au = op.apply_field(u)?;
    let r: f64 = au
        .iter()
        .zip(&f_rows)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let fnorm = dot(&f_rows, &f_rows).sqrt();
    let rel = if fnorm == 0.0 { r } else { r / fnorm };
    if rel > residual_tol {
        return Err(SolverError::NotASolution(rel));
    }
    let adjoint = weighted_adjoint(op, weights)?;
    let u_norm_sq = weighted_dot(u.data(), u.data(), &weights.col);
    let mut ratios = Vec::with_capacity(alphas.len());
    let mut skipped = 0;
    for alpha in alphas {
        match necessity_ratio(op, weights, &adjoint, &f_rows, u_norm_sq, alpha)? {
            Some(ratio) => ratios.push(ratio),
            None => skipped += 1,
        }
    }
    let max_ratio = ratios.iter().cloned().fold(0.0, f64::max);
    Ok(NecessityReport {
        trials: alphas.len(),
        skipped,
        max_ratio,
        ratios,
    })
}

/// `α = W_row⁻¹ λ`, for which `A*α = u` exactly.
pub fn riesz_alpha(weights: &DiscreteWeights, multiplier: &[f64]) -> Vec<f64> {
    multiplier
        .iter()
        .zip(&weights.row)
        .map(|(l, w)| l / w)
        .collect()
}

/// A sum of one to three smooth bumps with random multivector amplitudes,
/// supported at least one layer inside the interior.
pub fn random_compact_field<R: Rng + ?Sized>(
    grid: &GridSpec,
    n: usize,
    rng: &mut R,
) -> Result<CliffordField, FieldError> {
    let dim = grid.dim();
    let inset: Vec<(f64, f64)> = (0..dim)
        .map(|k| {
            let pad = (grid.margin() + 1) as f64 * grid.spacing()[k];
            (grid.lower()[k] + pad, grid.upper()[k] - pad)
        })
        .collect();
    let bumps: Vec<(Vec<f64>, f64, Multivector)> = (0..rng.random_range(1..=3))
        .map(|_| {
            let center: Vec<f64> = inset
                .iter()
                .map(|(lo, hi)| lo + (hi - lo) * rng.random_range(0.3..0.7))
                .collect();
            let room = center
                .iter()
                .zip(&inset)
                .map(|(c, (lo, hi))| (c - lo).min(hi - c))
                .fold(f64::INFINITY, f64::min);
            let radius = room * rng.random_range(0.5..1.0);
            let amp = Multivector::from_coeffs(
                n,
                (0..1usize << n)
                    .map(|_| rng.random_range(-1.0..1.0))
                    .collect(),
            )
            .expect("2^n coefficients");
            (center, radius, amp)
        })
        .collect();
    CliffordField::from_coeff_fn(grid, n, |x, out| {
        for (center, radius, amp) in &bumps {
            let s = smooth_bump(center, *radius, x);
            if s != 0.0 {
                for (o, a) in out.iter_mut().zip(amp.coeffs()) {
                    *o += s * a;
                }
            }
        }
    })
}

/// Pointwise closed-form `I₄(α(x), Hess φ(x))`.
pub fn curvature_density(alpha: &Multivector, hessian: &[Vec<f64>]) -> f64 {
    i4_closed_with(alpha, |r, c| hessian[r][c], CaseFormula::Corrected)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeitzenbockResidual {
    /// `‖D̄*_φ α‖²_φ`.
    pub lhs: f64,
    /// `‖D̄α‖²_φ`.
    pub dirac_term: f64,
    /// `∫ |α|²₀ Δφ e^{-φ}`.
    pub laplacian_term: f64,
    /// `∫ I₄ e^{-φ}` with the closed-form density.
    pub curvature_term: f64,
    pub rhs: f64,
    pub gap: f64,
}

impl WeitzenbockResidual {
    pub fn relative_gap(&self) -> f64 {
        if self.lhs == 0.0 {
            self.gap
        } else {
            self.gap / self.lhs
        }
    }
}

/// Both sides of `‖D̄*_φ α‖² = ‖D̄α‖² + ∫|α|²₀ Δφ e^{-φ} + ∫ I₄ e^{-φ}` for a
/// compactly supported `α`, with the curvature term optionally omitted.
pub fn weitzenbock_residual(
    alpha: &CliffordField,
    w: &WeightSpec,
    include_curvature: bool,
) -> Result<WeitzenbockResidual, SolverError> {
    let grid = alpha.grid();
    if grid.margin() < 2 {
        return Err(FieldError::MarginTooSmall {
            required: 2,
            actual: grid.margin(),
        }
        .into());
    }
    if !alpha.is_compactly_supported() {
        return Err(SolverError::SourceOffInterior);
    }
    let lhs = weighted_norm_sq(&dual_operator_analytic(alpha, w)?, w)?;
    let dirac_term = weighted_norm_sq(&dirac(alpha), w)?;
    let vol = grid.cell_volume();
    let mut laplacian_term = 0.0;
    let mut curvature_term = 0.0;
    for node in grid.interior_nodes() {
        let a = alpha.value(node);
        if a.is_zero() {
            continue;
        }
        let x = grid.coords(node);
        let q = (-w.value(&x)).exp() * vol;
        laplacian_term += a.norm0_sq() * w.laplacian(&x) * q;
        if include_curvature {
            curvature_term += curvature_density(&a, &w.hessian(&x)) * q;
        }
    }
    let rhs = dirac_term + laplacian_term + curvature_term;
    Ok(WeitzenbockResidual {
        lhs,
        dirac_term,
        laplacian_term,
        curvature_term,
        rhs,
        gap: (lhs - rhs).abs(),
    })
}

/// `‖D̄*_φ α − A*α‖_φ / ‖A*α‖_φ`: analytic dual operator against the exact
/// discrete adjoint.
pub fn dual_operator_gap(alpha: &CliffordField, w: &WeightSpec) -> Result<f64, SolverError> {
    let op = assemble_dirac(alpha.grid(), alpha.n())?;
    let weights = DiscreteWeights::from_weight(&op, w)?;
    let adjoint = weighted_adjoint(&op, &weights)?;
    let discrete = adjoint.apply(&op.rows_of(alpha)?)?;
    let analytic = dual_operator_analytic(alpha, w)?;
    let diff: Vec<f64> = analytic
        .data()
        .iter()
        .zip(&discrete)
        .map(|(a, d)| a - d)
        .collect();
    let num = weighted_dot(&diff, &diff, &weights.col).sqrt();
    let den = weighted_dot(&discrete, &discrete, &weights.col).sqrt();
    Ok(if den == 0.0 { num } else { num / den })
}

/// `|⟨τ_{e_0}, (α, D̄u)_φ − (D̄*_φ α, u)_φ⟩|` relative to `‖α‖‖D̄u‖`.
pub fn analytic_adjointness_gap(
    alpha: &CliffordField,
    u: &CliffordField,
    w: &WeightSpec,
) -> Result<f64, SolverError> {
    let du = dirac(u);
    let left = weighted_inner0(alpha, &du, w)?;
    let right = weighted_inner0(&dual_operator_analytic(alpha, w)?, u, w)?;
    let scale = (weighted_norm_sq(alpha, w)? * weighted_norm_sq(&du, w)?).sqrt();
    Ok(if scale == 0.0 {
        (left - right).abs()
    } else {
        (left - right).abs() / scale
    })
}

/// Shape of a compactly supported test bump.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BumpProfile {
    /// `exp(1 − 1/(1 − t))`, `C^∞`.
    Smooth,
    /// `(1 − t)^k`, `C^{k−1}`.
    Polynomial(i32),
}

impl BumpProfile {
    pub fn eval(self, center: &[f64], radius: f64, x: &[f64]) -> f64 {
        match self {
            BumpProfile::Smooth => smooth_bump(center, radius, x),
            BumpProfile::Polynomial(k) => polynomial_bump(center, radius, k, x),
        }
    }
}

/// Compactly supported test field `bump(x)·a` centred in the box, with the
/// bump radius a fraction of the smallest half-width.
pub fn centered_bump_field(
    grid: &GridSpec,
    n: usize,
    amplitude: &Multivector,
    profile: BumpProfile,
    radius_fraction: f64,
) -> Result<CliffordField, FieldError> {
    let center: Vec<f64> = (0..grid.dim())
        .map(|k| 0.5 * (grid.lower()[k] + grid.upper()[k]))
        .collect();
    let half = (0..grid.dim())
        .map(|k| 0.5 * (grid.upper()[k] - grid.lower()[k]))
        .fold(f64::INFINITY, f64::min);
    let radius = half * radius_fraction;
    CliffordField::from_coeff_fn(grid, n, |x, out| {
        let s = profile.eval(&center, radius, x);
        if s != 0.0 {
            for (o, a) in out.iter_mut().zip(amplitude.coeffs()) {
                *o = s * a;
            }
        }
    })
}

/// Generic multivector with coefficients `1, 2, ..., 2^n` scaled to unit
/// largest entry; used as a deterministic non-degenerate amplitude.
pub fn ramp_amplitude(n: usize) -> Multivector {
    let width = 1usize << n;
    let coeffs = (0..width).map(|k| (k + 1) as f64 / width as f64).collect();
    Multivector::from_coeffs(n, coeffs).expect("2^n coefficients")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Blade;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit_grid(n: usize, count: usize, margin: usize) -> GridSpec {
        GridSpec::cube(n + 1, 0.0, 1.0, count, margin).unwrap()
    }

    #[test]
    fn matrix_matches_dirac_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..=2 {
            let g = unit_grid(n, 7, 1);
            let op = assemble_dirac(&g, n).unwrap();
            for _ in 0..20 {
                let data: Vec<f64> = (0..g.node_count() << n)
                    .map(|_| rng.random_range(-1.0..1.0))
                    .collect();
                let f = CliffordField::from_data(&g, n, data).unwrap();
                let rows = op.apply_field(&f).unwrap();
                assert_eq!(rows, op.rows_of(&dirac(&f)).unwrap());
            }
        }
    }

    #[test]
    fn matrix_examples() {
        let g = unit_grid(1, 9, 1);
        let op = assemble_dirac(&g, 1).unwrap();
        for r in 0..op.matrix().nrows() {
            assert_eq!(op.matrix().row(r).count(), 4);
        }
        let c = CliffordField::scalar_times_blade(&g, 1, Blade::SCALAR, |_| 2.5).unwrap();
        assert!(op.apply_field(&c).unwrap().iter().all(|v| *v == 0.0));
        let x0 = CliffordField::scalar_times_blade(&g, 1, Blade::SCALAR, |x| x[0]).unwrap();
        let rows = op.apply_field(&x0).unwrap();
        for k in 0..op.row_nodes().len() {
            assert!((rows[2 * k] - 1.0).abs() < 1e-14);
            assert!(rows[2 * k + 1].abs() < 1e-14);
        }
    }

    #[test]
    fn unit_weights_give_transpose() {
        let g = unit_grid(1, 6, 1);
        let op = assemble_dirac(&g, 1).unwrap();
        let adj = weighted_adjoint(&op, &DiscreteWeights::unit(&op)).unwrap();
        assert_eq!(adj, op.matrix().transpose());
        assert_eq!(adj.transpose().to_dense(), op.matrix().to_dense());
    }

    #[test]
    fn weights_must_be_positive() {
        assert!(matches!(
            DiscreteWeights::new(vec![1.0, 0.0], vec![1.0]),
            Err(SolverError::NonPositiveWeight { index: 1, .. })
        ));
        assert!(DiscreteWeights::new(vec![1.0], vec![f64::NAN]).is_err());
    }

    #[test]
    fn zero_source_gives_zero_solution() {
        let g = unit_grid(1, 9, 1);
        let op = assemble_dirac(&g, 1).unwrap();
        let w = WeightSpec::x0_squared(1);
        let weights = DiscreteWeights::from_weight(&op, &w).unwrap();
        let f = CliffordField::zeros(&g, 1).unwrap();
        let sol = solve_min_norm(&op, &weights, &f, 1e-10, "x0_squared").unwrap();
        assert!(sol.u.data().iter().all(|v| *v == 0.0));
        assert_eq!(sol.report.iterations, 0);
        let cert = certify_bound(&sol.u, &f, &w, BoundVariant::N1Corollary, 0.0);
        assert_eq!(cert.bound_constant, Some(0.0));
        assert!(cert.bound_satisfied);
        assert_eq!(cert.status, CertificateStatus::Satisfied);
    }

    #[test]
    fn source_must_be_interior() {
        let g = unit_grid(1, 9, 1);
        let op = assemble_dirac(&g, 1).unwrap();
        let weights = DiscreteWeights::unit(&op);
        let f = CliffordField::scalar_times_blade(&g, 1, Blade::SCALAR, |_| 1.0).unwrap();
        assert_eq!(
            solve_min_norm(&op, &weights, &f, 1e-10, "unit"),
            Err(SolverError::SourceOffInterior)
        );
    }

    #[test]
    fn vacuous_and_out_of_hypothesis_certificates() {
        let g = unit_grid(1, 9, 1);
        let f = CliffordField::scalar_times_blade(&g, 1, Blade::SCALAR, |_| 1.0)
            .unwrap()
            .restrict_to_interior();
        let u = CliffordField::zeros(&g, 1).unwrap();
        let flat = WeightSpec::zero(1);
        let cert = certify_bound(&u, &f, &flat, BoundVariant::Theorem2, 0.0);
        assert_eq!(cert.status, CertificateStatus::Vacuous);
        assert!(cert.bound_infinite && cert.bound_satisfied);
        assert!(cert.warnings.iter().any(|w| w.contains("vacuous")));
        let mut h = vec![vec![0.0; 2]; 2];
        h[1][1] = 2.0;
        let bad = WeightSpec::quadratic("x1_squared", h);
        let cert = certify_bound(&u, &f, &bad, BoundVariant::Theorem2, 0.0);
        assert_eq!(cert.status, CertificateStatus::OutOfHypothesis);
    }

    #[test]
    fn report_serializes_flat() {
        let g = unit_grid(1, 9, 1);
        let op = assemble_dirac(&g, 1).unwrap();
        let w = WeightSpec::x0_squared(1);
        let weights = DiscreteWeights::from_weight(&op, &w).unwrap();
        let f = CliffordField::scalar_times_blade(&g, 1, Blade::SCALAR, |_| 1.0)
            .unwrap()
            .restrict_to_interior();
        let mut sol = solve_min_norm(&op, &weights, &f, 1e-10, "x0_squared").unwrap();
        sol.report.certificate = Some(certify_bound(
            &sol.u,
            &f,
            &w,
            BoundVariant::N1Corollary,
            1e-9,
        ));
        let json = serde_json::to_value(&sol.report).unwrap();
        assert!(json.get("bound_constant").is_some());
        assert!(json.get("u_norm_sq").is_some());
        assert_eq!(json["variant"], "n1_corollary");
        assert_eq!(json["status"], "satisfied");
    }

    #[test]
    fn curvature_density_vanishes_for_n1() {
        let a = Multivector::from_coeffs(1, vec![0.3, -1.2]).unwrap();
        let h = vec![vec![1.0, 0.4], vec![0.4, -3.0]];
        assert_eq!(curvature_density(&a, &h), 0.0);
    }

    #[test]
    fn weitzenbock_zero_alpha() {
        let g = unit_grid(2, 9, 2);
        let alpha = CliffordField::zeros(&g, 2).unwrap();
        let r = weitzenbock_residual(&alpha, &WeightSpec::x0_squared(2), true).unwrap();
        assert_eq!(r.gap, 0.0);
        assert_eq!(r.lhs, 0.0);
    }
}
