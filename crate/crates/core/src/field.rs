//! Clifford-valued grid functions on uniform boxes in `R^{n+1}` and the
//! finite-difference Dirac calculus acting on them.
//!
//! All first-order operators use the central difference
//! `(F(x + h e_k) - F(x - h e_k)) / 2h` and are evaluated on every node whose
//! stencil fits in the grid; the outermost layer is zero-filled. The
//! Laplacian is the square of the same central difference along each axis,
//! which makes `D̄D = DD̄ = Δ_h` an algebraic identity of the discretization.
//!
//! Quadrature is a node sum with full cell volume on interior nodes (at
//! least `margin` layers from the boundary) and zero weight elsewhere.

use std::f64::consts::PI;
use std::io::{self, Write};

use thiserror::Error;

use crate::algebra::{conjugation_sign, product_sign, Blade, Multivector, Sign};
use crate::weight::WeightSpec;

/// Smallest accepted number of points per axis.
pub const MIN_POINTS: usize = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error("grid axis {axis}: need at least {MIN_POINTS} points, got {count}")]
    TooFewPoints { axis: usize, count: usize },
    #[error("grid axis {axis}: upper bound {upper} must exceed lower bound {lower}")]
    EmptyExtent { axis: usize, lower: f64, upper: f64 },
    #[error("grid needs matching lower/upper/count lengths, got {lower}/{upper}/{counts}")]
    AxisCount {
        lower: usize,
        upper: usize,
        counts: usize,
    },
    #[error("margin {margin} leaves no interior on axis {axis} with {count} points")]
    NoInterior {
        margin: usize,
        axis: usize,
        count: usize,
    },
    #[error("operation needs margin >= {required}, grid has {actual}")]
    MarginTooSmall { required: usize, actual: usize },
    #[error("axis {axis} out of range for a {dim}-dimensional grid")]
    AxisOutOfRange { axis: usize, dim: usize },
    #[error("grid has {grid_dim} axes but the algebra needs n + 1 = {expected}")]
    DimensionMismatch { grid_dim: usize, expected: usize },
    #[error("fields live on different grids or algebras")]
    FieldMismatch,
    #[error("expected {expected} values, got {got}")]
    DataLength { expected: usize, got: usize },
    #[error("{0}")]
    InvalidDomain(String),
}

/// A uniform rectangular grid `Π_k [a_k, b_k]` with `N_k` points per axis.
///
/// Nodes are numbered row-major: the last axis varies fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    lower: Vec<f64>,
    upper: Vec<f64>,
    counts: Vec<usize>,
    margin: usize,
    spacing: Vec<f64>,
    strides: Vec<usize>,
}

impl GridSpec {
    pub fn new(
        lower: Vec<f64>,
        upper: Vec<f64>,
        counts: Vec<usize>,
        margin: usize,
    ) -> Result<Self, FieldError> {
        if lower.len() != upper.len() || lower.len() != counts.len() || counts.is_empty() {
            return Err(FieldError::AxisCount {
                lower: lower.len(),
                upper: upper.len(),
                counts: counts.len(),
            });
        }
        if margin == 0 {
            return Err(FieldError::MarginTooSmall {
                required: 1,
                actual: 0,
            });
        }
        for axis in 0..counts.len() {
            if counts[axis] < MIN_POINTS {
                return Err(FieldError::TooFewPoints {
                    axis,
                    count: counts[axis],
                });
            }
            if !(upper[axis] > lower[axis]) || !lower[axis].is_finite() || !upper[axis].is_finite()
            {
                return Err(FieldError::EmptyExtent {
                    axis,
                    lower: lower[axis],
                    upper: upper[axis],
                });
            }
            if counts[axis] <= 2 * margin {
                return Err(FieldError::NoInterior {
                    margin,
                    axis,
                    count: counts[axis],
                });
            }
        }
        let spacing = (0..counts.len())
            .map(|k| (upper[k] - lower[k]) / (counts[k] - 1) as f64)
            .collect();
        let mut strides = vec![1; counts.len()];
        for k in (0..counts.len() - 1).rev() {
            strides[k] = strides[k + 1] * counts[k + 1];
        }
        Ok(GridSpec {
            lower,
            upper,
            counts,
            margin,
            spacing,
            strides,
        })
    }

    /// `[a, b]^dim` with `count` points per axis.
    pub fn cube(
        dim: usize,
        a: f64,
        b: f64,
        count: usize,
        margin: usize,
    ) -> Result<Self, FieldError> {
        Self::new(vec![a; dim], vec![b; dim], vec![count; dim], margin)
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn margin(&self) -> usize {
        self.margin
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn max_spacing(&self) -> f64 {
        self.spacing.iter().cloned().fold(0.0, f64::max)
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn node_count(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    /// Per-axis indices of a flat node number.
    pub fn multi_index(&self, node: usize) -> Vec<usize> {
        (0..self.dim())
            .map(|k| (node / self.strides[k]) % self.counts[k])
            .collect()
    }

    pub fn flat_index(&self, index: &[usize]) -> usize {
        index.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn coords(&self, node: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        self.coords_into(node, &mut x);
        x
    }

    pub fn coords_into(&self, node: usize, x: &mut [f64]) {
        for k in 0..self.dim() {
            let i = (node / self.strides[k]) % self.counts[k];
            x[k] = self.lower[k] + i as f64 * self.spacing[k];
        }
    }

    /// Distance, in index steps, from `node` to the nearest boundary layer.
    pub fn node_margin(&self, node: usize) -> usize {
        (0..self.dim())
            .map(|k| {
                let i = (node / self.strides[k]) % self.counts[k];
                i.min(self.counts[k] - 1 - i)
            })
            .min()
            .unwrap_or(0)
    }

    /// Whether `node` carries quadrature weight and solver equations.
    pub fn is_interior(&self, node: usize) -> bool {
        self.node_margin(node) >= self.margin
    }

    pub fn interior_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.node_count()).filter(move |&v| self.is_interior(v))
    }

    /// Same box with `count` replaced by `(count - 1)·2^k + 1` on every axis.
    pub fn refined(&self, k: u32) -> Result<Self, FieldError> {
        let counts = self.counts.iter().map(|c| (c - 1) * (1 << k) + 1).collect();
        Self::new(self.lower.clone(), self.upper.clone(), counts, self.margin)
    }
}

/// A multivector per grid node, stored node-major and blade-minor.
#[derive(Debug, Clone, PartialEq)]
pub struct CliffordField {
    grid: GridSpec,
    n: usize,
    data: Vec<f64>,
    compact: bool,
}

impl CliffordField {
    fn check_grid(grid: &GridSpec, n: usize) -> Result<(), FieldError> {
        if grid.dim() != n + 1 {
            return Err(FieldError::DimensionMismatch {
                grid_dim: grid.dim(),
                expected: n + 1,
            });
        }
        Ok(())
    }

    fn build(grid: GridSpec, n: usize, data: Vec<f64>) -> Self {
        let mut field = CliffordField {
            grid,
            n,
            data,
            compact: false,
        };
        field.compact = field.vanishes_off_interior();
        field
    }

    pub fn zeros(grid: &GridSpec, n: usize) -> Result<Self, FieldError> {
        Self::check_grid(grid, n)?;
        Ok(CliffordField {
            grid: grid.clone(),
            n,
            data: vec![0.0; grid.node_count() << n],
            compact: true,
        })
    }

    pub fn from_data(grid: &GridSpec, n: usize, data: Vec<f64>) -> Result<Self, FieldError> {
        Self::check_grid(grid, n)?;
        let expected = grid.node_count() << n;
        if data.len() != expected {
            return Err(FieldError::DataLength {
                expected,
                got: data.len(),
            });
        }
        Ok(Self::build(grid.clone(), n, data))
    }

    /// Samples `f(x, coeffs)`, which writes the `2^n` coefficients at `x`.
    pub fn from_coeff_fn(
        grid: &GridSpec,
        n: usize,
        mut f: impl FnMut(&[f64], &mut [f64]),
    ) -> Result<Self, FieldError> {
        Self::check_grid(grid, n)?;
        let width = 1 << n;
        let mut data = vec![0.0; grid.node_count() * width];
        let mut x = vec![0.0; grid.dim()];
        for (node, chunk) in data.chunks_exact_mut(width).enumerate() {
            grid.coords_into(node, &mut x);
            f(&x, chunk);
        }
        Ok(Self::build(grid.clone(), n, data))
    }

    pub fn from_fn(
        grid: &GridSpec,
        n: usize,
        f: impl Fn(&[f64]) -> Multivector,
    ) -> Result<Self, FieldError> {
        Self::from_coeff_fn(grid, n, |x, out| {
            let mv = f(x);
            assert_eq!(mv.n(), n, "sampled multivector has the wrong n");
            out.copy_from_slice(mv.coeffs());
        })
    }

    /// `s(x)·e_A` for a scalar profile `s`.
    pub fn scalar_times_blade(
        grid: &GridSpec,
        n: usize,
        blade: Blade,
        s: impl Fn(&[f64]) -> f64,
    ) -> Result<Self, FieldError> {
        Self::from_coeff_fn(grid, n, |x, out| out[blade.index()] = s(x))
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Coefficients per node, `2^n`.
    pub fn width(&self) -> usize {
        1 << self.n
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn node(&self, node: usize) -> &[f64] {
        let w = self.width();
        &self.data[node * w..(node + 1) * w]
    }

    pub fn value(&self, node: usize) -> Multivector {
        Multivector::from_coeffs(self.n, self.node(node).to_vec())
            .expect("node slice has 2^n entries")
    }

    /// True when the field vanishes on every node within `margin` layers
    /// of the boundary.
    pub fn is_compactly_supported(&self) -> bool {
        self.compact
    }

    fn vanishes_off_interior(&self) -> bool {
        (0..self.grid.node_count())
            .filter(|&v| !self.grid.is_interior(v))
            .all(|v| self.node(v).iter().all(|c| *c == 0.0))
    }

    fn same_shape(&self, other: &Self) -> Result<(), FieldError> {
        if self.n != other.n || self.grid != other.grid {
            Err(FieldError::FieldMismatch)
        } else {
            Ok(())
        }
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self, FieldError> {
        self.same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| f(*a, *b))
            .collect();
        Ok(Self::build(self.grid.clone(), self.n, data))
    }

    pub fn add(&self, other: &Self) -> Result<Self, FieldError> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, FieldError> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, factor: f64) -> Self {
        let data = self.data.iter().map(|a| a * factor).collect();
        Self::build(self.grid.clone(), self.n, data)
    }

    /// Nodewise `F(x)·G(x)`.
    pub fn mul_nodewise(&self, other: &Self) -> Result<Self, FieldError> {
        self.same_shape(other)?;
        let w = self.width();
        let mut data = vec![0.0; self.data.len()];
        for node in 0..self.grid.node_count() {
            mul_into(
                self.node(node),
                other.node(node),
                &mut data[node * w..(node + 1) * w],
            );
        }
        Ok(Self::build(self.grid.clone(), self.n, data))
    }

    /// Nodewise conjugation `F̄`.
    pub fn conjugation(&self) -> Self {
        let w = self.width();
        let signs: Vec<Sign> = (0..w)
            .map(|b| conjugation_sign((b as u32).count_ones()))
            .collect();
        let data = self
            .data
            .iter()
            .enumerate()
            .map(|(k, c)| signs[k % w].apply(*c))
            .collect();
        Self::build(self.grid.clone(), self.n, data)
    }

    /// Zeroes every node outside the interior.
    pub fn restrict_to_interior(&self) -> Self {
        let w = self.width();
        let mut data = self.data.clone();
        for node in 0..self.grid.node_count() {
            if !self.grid.is_interior(node) {
                data[node * w..(node + 1) * w].fill(0.0);
            }
        }
        Self::build(self.grid.clone(), self.n, data)
    }

    /// Largest coefficient difference over the nodes selected by `keep`.
    pub fn max_abs_diff_where(&self, other: &Self, keep: impl Fn(usize) -> bool) -> f64 {
        let w = self.width();
        let mut worst: f64 = 0.0;
        for node in (0..self.grid.node_count()).filter(|&v| keep(v)) {
            for b in 0..w {
                worst = worst.max((self.data[node * w + b] - other.data[node * w + b]).abs());
            }
        }
        worst
    }

    /// Writes a CSV dump: a commented header with the grid description, a
    /// column header, then one row per node with coordinates and the `2^n`
    /// coefficients in blade order.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let g = &self.grid;
        writeln!(out, "# n={}", self.n)?;
        writeln!(out, "# axes={}", g.dim())?;
        writeln!(out, "# lower={}", join(g.lower()))?;
        writeln!(out, "# upper={}", join(g.upper()))?;
        let counts: Vec<String> = g.counts().iter().map(|c| c.to_string()).collect();
        writeln!(out, "# counts={}", counts.join(";"))?;
        write!(out, "node")?;
        for k in 0..g.dim() {
            write!(out, ",x{k}")?;
        }
        for b in Blade::all(self.n) {
            write!(out, ",{b}")?;
        }
        writeln!(out)?;
        let mut x = vec![0.0; g.dim()];
        for node in 0..g.node_count() {
            g.coords_into(node, &mut x);
            write!(out, "{node}")?;
            for v in &x {
                write!(out, ",{v:?}")?;
            }
            for c in self.node(node) {
                write!(out, ",{c:?}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

fn join(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| format!("{v:?}")).collect();
    parts.join(";")
}

/// `out = a·b` on raw coefficient slices of equal length `2^n`.
pub(crate) fn mul_into(a: &[f64], b: &[f64], out: &mut [f64]) {
    out.fill(0.0);
    for (ia, ca) in a.iter().enumerate() {
        if *ca == 0.0 {
            continue;
        }
        for (ib, cb) in b.iter().enumerate() {
            let t = ca * cb;
            match product_sign(Blade::from_index(ia), Blade::from_index(ib)) {
                Sign::Plus => out[ia ^ ib] += t,
                Sign::Minus => out[ia ^ ib] -= t,
            }
        }
    }
}

/// The generator attached to axis `k`: `e_k`, or `ē_k` when `conjugate`.
fn axis_generator(k: usize, conjugate: bool) -> (Sign, Blade) {
    let blade = if k == 0 {
        Blade::SCALAR
    } else {
        Blade::generator(k)
    };
    let sign = if conjugate && k > 0 {
        Sign::Minus
    } else {
        Sign::Plus
    };
    (sign, blade)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Side {
    Left,
    Right,
}

/// One entry of a first-order stencil row: `coef · F[node][blade]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct StencilTerm {
    pub node: usize,
    pub blade: usize,
    pub coef: f64,
}

/// Ordered terms of `Σ_k g_k ∂ᶜ_k F` (left) or `Σ_k ∂ᶜ_k F g_k` (right) at
/// output `(node, blade)`. Both the field operators and the assembled
/// matrix accumulate in exactly this order, so their results agree bitwise.
pub(crate) fn first_order_terms(
    grid: &GridSpec,
    node: usize,
    out_blade: usize,
    side: Side,
    conjugate: bool,
    terms: &mut Vec<StencilTerm>,
) {
    terms.clear();
    for k in 0..grid.dim() {
        let (gsign, g) = axis_generator(k, conjugate);
        let b = Blade::from_index(out_blade ^ g.index());
        let psign = match side {
            Side::Left => product_sign(g, b),
            Side::Right => product_sign(b, g),
        };
        let c = (gsign * psign).apply(1.0 / (2.0 * grid.spacing()[k]));
        let s = grid.stride(k);
        terms.push(StencilTerm {
            node: node - s,
            blade: b.index(),
            coef: -c,
        });
        terms.push(StencilTerm {
            node: node + s,
            blade: b.index(),
            coef: c,
        });
    }
}

fn first_order(f: &CliffordField, side: Side, conjugate: bool) -> CliffordField {
    let grid = &f.grid;
    let w = f.width();
    let mut data = vec![0.0; f.data.len()];
    let mut terms = Vec::with_capacity(2 * grid.dim());
    for node in 0..grid.node_count() {
        if grid.node_margin(node) < 1 {
            continue;
        }
        for blade in 0..w {
            first_order_terms(grid, node, blade, side, conjugate, &mut terms);
            let mut acc = 0.0;
            for t in &terms {
                acc += t.coef * f.data[t.node * w + t.blade];
            }
            data[node * w + blade] = acc;
        }
    }
    CliffordField::build(grid.clone(), f.n, data)
}

/// `∂ᶜ_axis F` on every node with a full stencil, zero on the outer layer.
pub fn partial_central(f: &CliffordField, axis: usize) -> Result<CliffordField, FieldError> {
    let grid = &f.grid;
    if axis >= grid.dim() {
        return Err(FieldError::AxisOutOfRange {
            axis,
            dim: grid.dim(),
        });
    }
    let w = f.width();
    let s = grid.stride(axis);
    let inv = 1.0 / (2.0 * grid.spacing()[axis]);
    let mut data = vec![0.0; f.data.len()];
    for node in 0..grid.node_count() {
        if grid.node_margin(node) < 1 {
            continue;
        }
        for b in 0..w {
            data[node * w + b] = (f.data[(node + s) * w + b] - f.data[(node - s) * w + b]) * inv;
        }
    }
    Ok(CliffordField::build(grid.clone(), f.n, data))
}

/// `D̄F = Σ_k e_k ∂_k F`.
pub fn dirac(f: &CliffordField) -> CliffordField {
    first_order(f, Side::Left, false)
}

/// `DF = Σ_k ē_k ∂_k F`.
pub fn conj_dirac(f: &CliffordField) -> CliffordField {
    first_order(f, Side::Left, true)
}

/// `F D̄ = Σ_k ∂_k F e_k`.
pub fn right_dirac(f: &CliffordField) -> CliffordField {
    first_order(f, Side::Right, false)
}

/// `F D = Σ_k ∂_k F ē_k`.
pub fn right_conj_dirac(f: &CliffordField) -> CliffordField {
    first_order(f, Side::Right, true)
}

/// `Δ_h F = Σ_k ∂ᶜ_k ∂ᶜ_k F` on nodes at least two layers inside, zero elsewhere.
pub fn laplacian(f: &CliffordField) -> Result<CliffordField, FieldError> {
    let grid = &f.grid;
    if grid.margin() < 2 {
        return Err(FieldError::MarginTooSmall {
            required: 2,
            actual: grid.margin(),
        });
    }
    let mut acc = CliffordField::zeros(grid, f.n)?;
    for k in 0..grid.dim() {
        let d = partial_central(&partial_central(f, k)?, k)?;
        acc = acc.add(&d)?;
    }
    let w = f.width();
    for node in 0..grid.node_count() {
        if grid.node_margin(node) < 2 {
            acc.data[node * w..(node + 1) * w].fill(0.0);
        }
    }
    acc.compact = acc.vanishes_off_interior();
    Ok(acc)
}

/// Quadrature weights `cellvol · e^{-φ(x)}` on interior nodes, zero elsewhere.
pub fn quadrature_weights(grid: &GridSpec, w: &WeightSpec) -> Vec<f64> {
    let vol = grid.cell_volume();
    let mut x = vec![0.0; grid.dim()];
    (0..grid.node_count())
        .map(|node| {
            if grid.is_interior(node) {
                grid.coords_into(node, &mut x);
                vol * (-w.value(&x)).exp()
            } else {
                0.0
            }
        })
        .collect()
}

fn check_weight(f: &CliffordField, w: &WeightSpec) -> Result<(), FieldError> {
    if w.dim() != f.grid.dim() {
        return Err(FieldError::DimensionMismatch {
            grid_dim: f.grid.dim(),
            expected: w.dim(),
        });
    }
    Ok(())
}

/// `(F, G)_φ = Σ F̄(x) G(x) e^{-φ(x)} cellvol` over interior nodes.
pub fn weighted_inner(
    f: &CliffordField,
    g: &CliffordField,
    w: &WeightSpec,
) -> Result<Multivector, FieldError> {
    f.same_shape(g)?;
    check_weight(f, w)?;
    let weights = quadrature_weights(&f.grid, w);
    let width = f.width();
    let fbar = f.conjugation();
    let mut acc = vec![0.0; width];
    let mut prod = vec![0.0; width];
    for (node, q) in weights.iter().enumerate() {
        if *q == 0.0 {
            continue;
        }
        mul_into(fbar.node(node), g.node(node), &mut prod);
        for (a, p) in acc.iter_mut().zip(&prod) {
            *a += q * p;
        }
    }
    Ok(Multivector::from_coeffs(f.n, acc).expect("width is 2^n"))
}

/// `‖F‖²_φ = Σ |F(x)|²₀ e^{-φ(x)} cellvol` over interior nodes.
pub fn weighted_norm_sq(f: &CliffordField, w: &WeightSpec) -> Result<f64, FieldError> {
    check_weight(f, w)?;
    let weights = quadrature_weights(&f.grid, w);
    Ok(norm_sq_with(f, &weights))
}

pub(crate) fn norm_sq_with(f: &CliffordField, weights: &[f64]) -> f64 {
    let scale = (1u64 << f.n) as f64;
    let mut acc = 0.0;
    for (node, q) in weights.iter().enumerate() {
        if *q == 0.0 {
            continue;
        }
        let s: f64 = f.node(node).iter().map(|c| c * c).sum();
        acc += q * scale * s;
    }
    acc
}

/// `Σ_x ⟨τ_{e_0}, F̄ G⟩ e^{-φ} cellvol = 2^n Σ_x Σ_A F_A G_A e^{-φ} cellvol`.
pub fn weighted_inner0(
    f: &CliffordField,
    g: &CliffordField,
    w: &WeightSpec,
) -> Result<f64, FieldError> {
    f.same_shape(g)?;
    check_weight(f, w)?;
    let weights = quadrature_weights(&f.grid, w);
    let scale = (1u64 << f.n) as f64;
    let mut acc = 0.0;
    for (node, q) in weights.iter().enumerate() {
        if *q == 0.0 {
            continue;
        }
        let s: f64 = f
            .node(node)
            .iter()
            .zip(g.node(node))
            .map(|(a, b)| a * b)
            .sum();
        acc += q * scale * s;
    }
    Ok(acc)
}

/// `Dφ = Σ_k ē_k ∂_k φ` as a multivector.
pub fn weight_conj_gradient(w: &WeightSpec, n: usize, x: &[f64]) -> Multivector {
    let grad = w.gradient(x);
    let mut mv = Multivector::zero(n);
    mv.set_coeff(Blade::SCALAR, grad[0]);
    for (k, g) in grad.iter().enumerate().skip(1) {
        mv.set_coeff(Blade::generator(k), -g);
    }
    mv
}

fn dual_with(f: &CliffordField, w: &WeightSpec, side: Side) -> Result<CliffordField, FieldError> {
    check_weight(f, w)?;
    let grid = &f.grid;
    let width = f.width();
    let df = conj_dirac(f);
    let mut data = vec![0.0; f.data.len()];
    let mut x = vec![0.0; grid.dim()];
    let mut prod = vec![0.0; width];
    for node in 0..grid.node_count() {
        if grid.node_margin(node) < 1 {
            continue;
        }
        grid.coords_into(node, &mut x);
        let dphi = weight_conj_gradient(w, f.n, &x);
        match side {
            Side::Left => mul_into(dphi.coeffs(), f.node(node), &mut prod),
            Side::Right => mul_into(f.node(node), dphi.coeffs(), &mut prod),
        }
        for b in 0..width {
            data[node * width + b] = prod[b] - df.data[node * width + b];
        }
    }
    Ok(CliffordField::build(grid.clone(), f.n, data))
}

/// Formal adjoint of `D̄` in `(·,·)_φ`:
/// `D̄*_φ α = -e^{φ} D(α e^{-φ}) = (Dφ)·α − Dα`, with `Dφ` from the analytic
/// gradient and `Dα` by central differences.
pub fn dual_operator_analytic(
    f: &CliffordField,
    w: &WeightSpec,
) -> Result<CliffordField, FieldError> {
    dual_with(f, w, Side::Left)
}

/// `α·(Dφ) − Dα`, the right-multiplied ordering. It coincides with
/// [`dual_operator_analytic`] only where `Dφ` commutes with `α`, e.g. when
/// `φ` depends on `x_0` alone or when `n = 1`.
pub fn dual_operator_right_ordered(
    f: &CliffordField,
    w: &WeightSpec,
) -> Result<CliffordField, FieldError> {
    dual_with(f, w, Side::Right)
}

/// Exact discrete product rule for central differences:
/// `∂ᶜ_k(uv) = ∂ᶜ_k u · A_k v + A_k u · ∂ᶜ_k v`, with `A_k` the average of
/// the two axis neighbours. Returns `Σ_k e_k [∂ᶜ_k u · A_k v + A_k u · ∂ᶜ_k v]`,
/// which equals `dirac(u·v)` up to rounding.
pub fn dirac_product_expansion(
    u: &CliffordField,
    v: &CliffordField,
) -> Result<CliffordField, FieldError> {
    u.same_shape(v)?;
    let grid = &u.grid;
    let w = u.width();
    let mut data = vec![0.0; u.data.len()];
    let mut du = vec![0.0; w];
    let mut dv = vec![0.0; w];
    let mut au = vec![0.0; w];
    let mut av = vec![0.0; w];
    let mut t1 = vec![0.0; w];
    let mut t2 = vec![0.0; w];
    for node in 0..grid.node_count() {
        if grid.node_margin(node) < 1 {
            continue;
        }
        for k in 0..grid.dim() {
            let s = grid.stride(k);
            let inv = 1.0 / (2.0 * grid.spacing()[k]);
            for b in 0..w {
                let (up, um) = (u.data[(node + s) * w + b], u.data[(node - s) * w + b]);
                let (vp, vm) = (v.data[(node + s) * w + b], v.data[(node - s) * w + b]);
                du[b] = (up - um) * inv;
                dv[b] = (vp - vm) * inv;
                au[b] = 0.5 * (up + um);
                av[b] = 0.5 * (vp + vm);
            }
            mul_into(&du, &av, &mut t1);
            mul_into(&au, &dv, &mut t2);
            let g = if k == 0 {
                Blade::SCALAR
            } else {
                Blade::generator(k)
            };
            for b in 0..w {
                let sum_b = t1[b] + t2[b];
                let target = b ^ g.index();
                data[node * w + target] += product_sign(g, Blade::from_index(b)).apply(sum_b);
            }
        }
    }
    Ok(CliffordField::build(grid.clone(), u.n, data))
}

/// The product-rule right-hand side with plain (non-averaged) factors:
/// `(D̄u)v + u(D̄v) + Σ_{j≥1} (e_j u − u e_j) ∂ᶜ_j v`. Differs from
/// `dirac(u·v)` by `O(h²)`.
pub fn dirac_product_rule_rhs(
    u: &CliffordField,
    v: &CliffordField,
) -> Result<CliffordField, FieldError> {
    u.same_shape(v)?;
    let mut rhs = dirac(u).mul_nodewise(v)?.add(&u.mul_nodewise(&dirac(v))?)?;
    for j in 1..u.grid.dim() {
        let g = Blade::generator(j);
        let mut comm = u.clone();
        let w = u.width();
        for node in 0..u.grid.node_count() {
            let val = u.value(node);
            let c = val
                .left_mul_blade(g)
                .try_sub(&val.right_mul_blade(g))
                .expect("same n");
            comm.data[node * w..(node + 1) * w].copy_from_slice(c.coeffs());
        }
        rhs = rhs.add(&comm.mul_nodewise(&partial_central(v, j)?)?)?;
    }
    Ok(rhs)
}

/// Unweighted `Σ |F(x)|²₀ cellvol` over the nodes selected by `keep`.
pub fn unweighted_norm_sq_where(f: &CliffordField, keep: impl Fn(usize) -> bool) -> f64 {
    let vol = f.grid.cell_volume();
    let weights: Vec<f64> = (0..f.grid.node_count())
        .map(|v| if keep(v) { vol } else { 0.0 })
        .collect();
    norm_sq_with(f, &weights)
}

/// Unweighted L² norm of `D̄F` over interior nodes.
pub fn monogenic_defect(f: &CliffordField) -> f64 {
    let g = f.grid.clone();
    unweighted_norm_sq_where(&dirac(f), |v| g.is_interior(v)).sqrt()
}

/// Unweighted L² norm of `D̄F` over interior nodes with `inner ≤ |x| ≤ outer`.
pub fn monogenic_defect_annulus(
    f: &CliffordField,
    inner: f64,
    outer: f64,
) -> Result<f64, FieldError> {
    let g = &f.grid;
    if inner <= g.max_spacing() {
        return Err(FieldError::InvalidDomain(format!(
            "annulus inner radius {inner} must exceed the grid spacing {}",
            g.max_spacing()
        )));
    }
    let d = dirac(f);
    let keep = |v: usize| {
        if !g.is_interior(v) {
            return false;
        }
        let r = g.coords(v).iter().map(|c| c * c).sum::<f64>().sqrt();
        r >= inner && r <= outer
    };
    Ok(unweighted_norm_sq_where(&d, keep).sqrt())
}

/// `Γ(k/2)` for a positive integer `k`.
pub fn gamma_half_integer(k: usize) -> f64 {
    assert!(k > 0);
    if k.is_multiple_of(2) {
        (1..k / 2).map(|m| m as f64).product()
    } else {
        let mut g = PI.sqrt();
        let mut t = 0.5;
        while t + 1.0 <= k as f64 / 2.0 + 1e-12 {
            g *= t;
            t += 1.0;
        }
        g
    }
}

/// Surface area of the unit sphere in `R^d`, `2π^{d/2} / Γ(d/2)`.
pub fn unit_sphere_area(d: usize) -> f64 {
    2.0 * PI.powf(d as f64 / 2.0) / gamma_half_integer(d)
}

/// `G(x) = x̄ / (ω_{n+1} |x|^{n+1})` at one point, with `x = x_0 + Σ x_i e_i`.
pub fn cauchy_kernel(n: usize, x: &[f64]) -> Multivector {
    let r2: f64 = x.iter().map(|c| c * c).sum();
    let scale = 1.0 / (unit_sphere_area(n + 1) * r2.powf((n as f64 + 1.0) / 2.0));
    let mut mv = Multivector::zero(n);
    mv.set_coeff(Blade::SCALAR, x[0] * scale);
    for (i, xi) in x.iter().enumerate().skip(1) {
        mv.set_coeff(Blade::generator(i), -xi * scale);
    }
    mv
}

/// Samples the Cauchy kernel on `grid`.
///
/// Fails if a node sits within `exclusion` of the origin or if the exclusion
/// radius does not exceed the grid spacing, since central differences at
/// checked nodes would otherwise reach the singularity.
pub fn cauchy_kernel_field(
    grid: &GridSpec,
    n: usize,
    exclusion: f64,
) -> Result<CliffordField, FieldError> {
    if exclusion <= grid.max_spacing() {
        return Err(FieldError::InvalidDomain(format!(
            "exclusion radius {exclusion} must exceed the grid spacing {}",
            grid.max_spacing()
        )));
    }
    let mut x = vec![0.0; grid.dim()];
    for node in 0..grid.node_count() {
        grid.coords_into(node, &mut x);
        let r = x.iter().map(|c| c * c).sum::<f64>().sqrt();
        if r < 1e-9 {
            return Err(FieldError::InvalidDomain(format!(
                "grid node {node} coincides with the kernel singularity"
            )));
        }
    }
    CliffordField::from_coeff_fn(grid, n, |x, out| {
        out.copy_from_slice(cauchy_kernel(n, x).coeffs());
    })
}

/// A smooth bump supported in the ball of radius `radius` around `center`:
/// `exp(1 − 1/(1 − |x−c|²/r²))`, equal to 1 at the center.
pub fn smooth_bump(center: &[f64], radius: f64, x: &[f64]) -> f64 {
    let t: f64 = x
        .iter()
        .zip(center)
        .map(|(a, c)| (a - c) * (a - c))
        .sum::<f64>()
        / (radius * radius);
    if t >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - t)).exp()
    }
}

/// `(1 − |x−c|²/r²)^k` inside the ball, zero outside: a `C^{k−1}` bump whose
/// derivatives stay moderate, so finite-difference errors reach their
/// asymptotic rate on coarse grids.
pub fn polynomial_bump(center: &[f64], radius: f64, power: i32, x: &[f64]) -> f64 {
    let t: f64 = x
        .iter()
        .zip(center)
        .map(|(a, c)| (a - c) * (a - c))
        .sum::<f64>()
        / (radius * radius);
    if t >= 1.0 {
        0.0
    } else {
        (1.0 - t).powi(power)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Multivector;

    fn unit_grid(n: usize, count: usize, margin: usize) -> GridSpec {
        GridSpec::cube(n + 1, 0.0, 1.0, count, margin).unwrap()
    }

    fn interior_max(
        f: &CliffordField,
        expected: impl Fn(&[f64]) -> Multivector,
        min_margin: usize,
    ) -> f64 {
        let g = f.grid();
        let mut worst: f64 = 0.0;
        for node in 0..g.node_count() {
            if g.node_margin(node) < min_margin {
                continue;
            }
            let e = expected(&g.coords(node));
            worst = worst.max(f.value(node).max_abs_diff(&e));
        }
        worst
    }

    #[test]
    fn grid_validation() {
        assert!(matches!(
            GridSpec::cube(2, 0.0, 1.0, 4, 1),
            Err(FieldError::TooFewPoints { .. })
        ));
        assert!(matches!(
            GridSpec::cube(2, 1.0, 1.0, 9, 1),
            Err(FieldError::EmptyExtent { .. })
        ));
        assert!(matches!(
            GridSpec::cube(2, 0.0, 1.0, 5, 3),
            Err(FieldError::NoInterior { .. })
        ));
        let g = GridSpec::new(vec![0.0, -1.0], vec![1.0, 1.0], vec![5, 9], 1).unwrap();
        assert_eq!(g.spacing(), &[0.25, 0.25]);
        assert_eq!(g.cell_volume(), 0.0625);
        assert_eq!(g.node_count(), 45);
        assert_eq!(g.multi_index(13), vec![1, 4]);
        assert_eq!(g.flat_index(&[1, 4]), 13);
        assert_eq!(g.coords(13), vec![0.25, 0.0]);
        assert_eq!(g.node_margin(13), 1);
        assert_eq!(g.node_margin(0), 0);
        assert_eq!(g.refined(1).unwrap().counts(), &[9, 17]);
    }

    #[test]
    fn partial_central_examples() {
        let g = unit_grid(1, 9, 1);
        let lin = CliffordField::scalar_times_blade(&g, 1, Blade::SCALAR, |x| x[0]).unwrap();
        let d = partial_central(&lin, 0).unwrap();
        assert!(interior_max(&d, |_| Multivector::scalar(1, 1.0), 1) < 1e-14);
        let quad =
            CliffordField::scalar_times_blade(&g, 1, Blade::SCALAR, |x| x[0] * x[0]).unwrap();
        let d = partial_central(&quad, 0).unwrap();
        assert!(interior_max(&d, |x| Multivector::scalar(1, 2.0 * x[0]), 1) < 1e-14);
        let c = CliffordField::scalar_times_blade(&g, 1, Blade::generator(1), |_| 3.0).unwrap();
        assert!(partial_central(&c, 1)
            .unwrap()
            .data()
            .iter()
            .all(|v| *v == 0.0));
        assert!(matches!(
            partial_central(&c, 2),
            Err(FieldError::AxisOutOfRange { .. })
        ));
    }

    #[test]
    fn dirac_examples() {
        let g = unit_grid(1, 9, 1);
        let x0 = CliffordField::scalar_times_blade(&g, 1, Blade::SCALAR, |x| x[0]).unwrap();
        assert!(interior_max(&dirac(&x0), |_| Multivector::scalar(1, 1.0), 1) < 1e-14);
        let x1 = CliffordField::scalar_times_blade(&g, 1, Blade::SCALAR, |x| x[1]).unwrap();
        assert!(
            interior_max(
                &dirac(&x1),
                |_| Multivector::basis(1, Blade::generator(1)),
                1
            ) < 1e-14
        );
        let z = CliffordField::from_coeff_fn(&g, 1, |x, out| {
            out[0] = x[0];
            out[1] = x[1];
        })
        .unwrap();
        assert!(interior_max(&dirac(&z), |_| Multivector::zero(1), 1) < 1e-14);
        assert!(monogenic_defect(&z) < 1e-14);
        let defect = monogenic_defect(&x0);
        let interior_vol = (g.interior_nodes().count() as f64) * g.cell_volume();
        assert!((defect * defect - 2.0 * interior_vol).abs() < 1e-12);
    }

    #[test]
    fn laplacian_examples() {
        let g = unit_grid(1, 9, 2);
        let f = CliffordField::scalar_times_blade(&g, 1, Blade::SCALAR, |x| x[0] * x[0]).unwrap();
        assert!(interior_max(&laplacian(&f).unwrap(), |_| Multivector::scalar(1, 2.0), 2) < 1e-12);
        let g2 = unit_grid(2, 7, 2);
        let e12 = Blade::from_generators(&[1, 2], 2).unwrap();
        let f =
            CliffordField::scalar_times_blade(&g2, 2, e12, |x| x[0] * x[0] + x[1] * x[1]).unwrap();
        let expected = Multivector::basis(2, e12).scale(&4.0);
        assert!(interior_max(&laplacian(&f).unwrap(), |_| expected.clone(), 2) < 1e-12);
        let lin = CliffordField::scalar_times_blade(&g2, 2, e12, |x| 2.0 * x[0] - x[2]).unwrap();
        assert!(interior_max(&laplacian(&lin).unwrap(), |_| Multivector::zero(2), 2) < 1e-12);
        assert!(matches!(
            laplacian(&CliffordField::zeros(&unit_grid(1, 9, 1), 1).unwrap()),
            Err(FieldError::MarginTooSmall { .. })
        ));
    }

    #[test]
    fn weighted_inner_constant() {
        let g = GridSpec::cube(2, 0.0, 1.0, 201, 1).unwrap();
        let one = CliffordField::scalar_times_blade(&g, 1, Blade::SCALAR, |_| 1.0).unwrap();
        let w = WeightSpec::zero(1);
        let ip = weighted_inner(&one, &one, &w).unwrap();
        assert!((ip.scalar_part() - 1.0).abs() < 0.03);
        assert_eq!(ip.coeff(Blade::generator(1)), &0.0);
        let nsq = weighted_norm_sq(&one, &w).unwrap();
        assert!((nsq - 2.0 * ip.scalar_part()).abs() < 1e-12);
    }

    #[test]
    fn dual_operator_examples() {
        let g = unit_grid(1, 9, 1);
        let w = WeightSpec::x0_squared(1);
        let one = CliffordField::scalar_times_blade(&g, 1, Blade::SCALAR, |_| 1.0).unwrap();
        let d = dual_operator_analytic(&one, &w).unwrap();
        assert!(interior_max(&d, |x| Multivector::scalar(1, 2.0 * x[0]), 1) < 1e-14);
        let d0 = dual_operator_analytic(&one, &WeightSpec::zero(1)).unwrap();
        assert!(d0.data().iter().all(|v| *v == 0.0));
        let e1 = CliffordField::scalar_times_blade(&g, 1, Blade::generator(1), |_| 1.0).unwrap();
        let d = dual_operator_analytic(&e1, &w).unwrap();
        let expect = |x: &[f64]| Multivector::basis(1, Blade::generator(1)).scale(&(2.0 * x[0]));
        assert!(interior_max(&d, expect, 1) < 1e-14);
        let r = dual_operator_right_ordered(&e1, &w).unwrap();
        assert_eq!(r, d);
    }

    #[test]
    fn gamma_and_sphere_area() {
        assert!((unit_sphere_area(2) - 2.0 * PI).abs() < 1e-14);
        assert!((unit_sphere_area(3) - 4.0 * PI).abs() < 1e-13);
        assert!((unit_sphere_area(4) - 2.0 * PI * PI).abs() < 1e-13);
        assert!((gamma_half_integer(5) - 0.75 * PI.sqrt()).abs() < 1e-14);
        assert_eq!(gamma_half_integer(6), 2.0);
    }

    #[test]
    fn cauchy_kernel_examples() {
        let g = cauchy_kernel(1, &[1.0, 0.0]);
        assert!((g.scalar_part() - 1.0 / (2.0 * PI)).abs() < 1e-15);
        assert_eq!(g.coeff(Blade::generator(1)), &0.0);
        for n in 1..=3 {
            let x: Vec<f64> = (0..=n).map(|k| 0.3 + 0.1 * k as f64).collect();
            let x2: Vec<f64> = x.iter().map(|c| 2.0 * c).collect();
            let ratio = cauchy_kernel(n, &x2).norm0() / cauchy_kernel(n, &x).norm0();
            assert!((ratio - 2f64.powi(-(n as i32))).abs() < 1e-14);
        }
        let grid = GridSpec::cube(2, -1.0, 1.0, 9, 1).unwrap();
        assert!(cauchy_kernel_field(&grid, 1, 0.5).is_err());
        assert!(cauchy_kernel_field(&grid, 1, 0.1).is_err());
    }

    #[test]
    fn compact_support_flag() {
        let g = unit_grid(1, 9, 1);
        let bump = CliffordField::scalar_times_blade(&g, 1, Blade::SCALAR, |x| {
            smooth_bump(&[0.5, 0.5], 0.3, x)
        })
        .unwrap();
        assert!(bump.is_compactly_supported());
        let one = CliffordField::scalar_times_blade(&g, 1, Blade::SCALAR, |_| 1.0).unwrap();
        assert!(!one.is_compactly_supported());
        assert!(one.restrict_to_interior().is_compactly_supported());
    }

    #[test]
    fn csv_dump_layout() {
        let g = unit_grid(1, 5, 1);
        let f = CliffordField::scalar_times_blade(&g, 1, Blade::generator(1), |x| x[1]).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# n=1");
        assert_eq!(lines[4], "# counts=5;5");
        assert_eq!(lines[5], "node,x0,x1,e0,e1");
        assert_eq!(lines[7], "1,0.0,0.25,0.0,0.25");
        assert_eq!(lines.len(), 6 + 25);
    }
}
