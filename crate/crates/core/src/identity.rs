//! Exact verification of the algebraic identities that turn
//! `‖D̄*_φ α‖²` into `‖D̄α‖² + ∫|α|²₀ Δφ e^{-φ} + I₃`.
//!
//! The pointwise integrand of the curvature term is
//! `I₄ = ⟨τ_{e_0}, ᾱ Σ_{j=1..n} Σ_{i=0..n} (e_j α ē_i − α e_j ē_i) H_{ji}⟩`,
//! split into a diagonal part (`i = j`), a cross part (`i ≠ j`, both spatial)
//! and an `x_0`-mixed part (`i = 0`) that vanishes identically. Each piece is
//! computed twice: by brute-force blade products and by its closed form.
//!
//! Everything here runs on arbitrary-precision integers or rationals.

use std::fmt;
use std::io::{self, Write};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{conjugation_sign, pow2, AlgebraError, Blade, Multivector, Scalar, Sign};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IdentityError {
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error("index {index} out of range 1..={n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("cross terms need distinct indices, got i = j = {0}")]
    EqualIndices(usize),
    #[error("Hessian stencil must be symmetric; entries ({row},{col}) differ")]
    Asymmetric { row: usize, col: usize },
    #[error("Hessian stencil must be {expected}x{expected}")]
    HessianShape { expected: usize },
    #[error("Hessian stencil violates the sign hypotheses: {0}")]
    HypothesisViolated(String),
}

mod sealed {
    pub trait Sealed {}
    impl Sealed for num_bigint::BigInt {}
    impl Sealed for num_rational::BigRational {}
}

/// Exact coefficient rings accepted by the identity checks.
pub trait ExactScalar: Scalar + sealed::Sealed {
    fn to_rational(&self) -> BigRational;
}

impl ExactScalar for BigInt {
    fn to_rational(&self) -> BigRational {
        BigRational::from_integer(self.clone())
    }
}

impl ExactScalar for BigRational {
    fn to_rational(&self) -> BigRational {
        self.clone()
    }
}

pub type ExactMultivector = Multivector<BigInt>;

fn check_index(n: usize, index: usize) -> Result<(), IdentityError> {
    if index == 0 || index > n {
        Err(IdentityError::IndexOutOfRange { index, n })
    } else {
        Ok(())
    }
}

fn generator_mv<T: Scalar>(n: usize, i: usize) -> Multivector<T> {
    Multivector::basis(n, Blade::generator(i))
}

/// `x ē_i`; `ē_0 = e_0`, `ē_i = −e_i`.
fn right_mul_conj_generator<T: Scalar>(x: &Multivector<T>, i: usize) -> Multivector<T> {
    if i == 0 {
        x.clone()
    } else {
        -&x.right_mul_blade(Blade::generator(i))
    }
}

fn left_mul_generator<T: Scalar>(x: &Multivector<T>, i: usize) -> Multivector<T> {
    if i == 0 {
        x.clone()
    } else {
        x.left_mul_blade(Blade::generator(i))
    }
}

/// Diagonal identity for one spatial index `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct I5Check<T> {
    /// `2^n [ᾱ e_i α ē_i − ᾱα]_0` by blade products.
    pub lhs: T,
    /// `−2^{n+1} (Σ_{i∉A, |A| odd} α_A² + Σ_{i∈A, |A| even} α_A²)`.
    pub rhs: T,
    pub equal: bool,
}

/// Closed form of the diagonal term for index `i`.
pub fn i5_closed<T: Scalar>(alpha: &Multivector<T>, i: usize) -> T {
    let n = alpha.n();
    let mut sum = T::zero();
    for (blade, a) in alpha.terms() {
        let odd = blade.grade() % 2 == 1;
        if blade.contains(i) != odd {
            sum = sum + a.clone() * a.clone();
        }
    }
    -(pow2::<T>(n + 1) * sum)
}

pub fn i5_identity<T: ExactScalar>(
    alpha: &Multivector<T>,
    i: usize,
) -> Result<I5Check<T>, IdentityError> {
    let n = alpha.n();
    check_index(n, i)?;
    let abar = alpha.conjugation();
    let sandwiched = right_mul_conj_generator(&left_mul_generator(alpha, i), i);
    let diff = sandwiched.try_sub(alpha)?;
    let lhs = pow2::<T>(n) * abar.scalar_part_of_product(&diff)?;
    let rhs = i5_closed(alpha, i);
    let equal = lhs == rhs;
    Ok(I5Check { lhs, rhs, equal })
}

/// The two `x_0`-mixed scalar parts `([ᾱ e_j α ē_0]_0, [ᾱ α e_j ē_0]_0)`.
pub fn i7_vanishing<T: ExactScalar>(
    alpha: &Multivector<T>,
    j: usize,
) -> Result<(T, T), IdentityError> {
    let n = alpha.n();
    check_index(n, j)?;
    let abar = alpha.conjugation();
    let ej = generator_mv::<T>(n, j);
    let term_a = abar.scalar_part_of_product(&ej.product(alpha)?)?;
    let term_b = abar.scalar_part_of_product(&alpha.product(&ej)?)?;
    Ok((term_a, term_b))
}

/// Which of the four contributing configurations `(A, B, i, j)` falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CrossCase {
    /// `i ∈ A, j ∉ A, i ∉ B, j ∈ B`, `A − i = B − j`.
    C1,
    /// `i ∉ A, j ∈ A, i ∈ B, j ∉ B`, `A + i = B + j`.
    C2,
    /// `i, j ∈ A`, `i, j ∉ B`, `A − i = B + j`.
    C3,
    /// `i, j ∉ A`, `i, j ∈ B`, `A + i = B − j`.
    C4,
}

impl CrossCase {
    pub const ALL: [CrossCase; 4] = [CrossCase::C1, CrossCase::C2, CrossCase::C3, CrossCase::C4];
}

impl fmt::Display for CrossCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CrossCase::C1 => "c1",
            CrossCase::C2 => "c2",
            CrossCase::C3 => "c3",
            CrossCase::C4 => "c4",
        };
        f.write_str(s)
    }
}

/// Classifies `(A, B, i, j)` by checking each case's defining conditions
/// independently. Returns every case whose conditions hold so callers can
/// assert mutual exclusivity.
pub fn matching_cases(a: Blade, b: Blade, i: usize, j: usize) -> Vec<CrossCase> {
    let (ia, ja, ib, jb) = (a.contains(i), a.contains(j), b.contains(i), b.contains(j));
    let (gi, gj) = (Blade::generator(i).bits(), Blade::generator(j).bits());
    let (abits, bbits) = (a.bits(), b.bits());
    let mut out = Vec::new();
    if ia && !ja && !ib && jb && (abits & !gi) == (bbits & !gj) {
        out.push(CrossCase::C1);
    }
    if !ia && ja && ib && !jb && (abits | gi) == (bbits | gj) {
        out.push(CrossCase::C2);
    }
    if ia && ja && !ib && !jb && (abits & !gi) == (bbits | gj) {
        out.push(CrossCase::C3);
    }
    if !ia && !ja && ib && jb && (abits | gi) == (bbits & !gj) {
        out.push(CrossCase::C4);
    }
    out
}

/// Sign formula variants for the cross-term cases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseFormula {
    /// Case signs valid for every ordering of `i` and `j`.
    Corrected,
    /// The exponents as originally stated: c1 `r²+1−p(i)−p(j)`, c2 `r²+1`,
    /// c3/c4 `r²−h(i)−h(j)`.
    Literal,
    /// [`CaseFormula::Corrected`] with one case's sign flipped, used to
    /// check that the enumeration catches a wrong sign.
    FlippedCase(CrossCase),
}

/// `r`, the per-case blade size entering the exponents.
fn case_r(case: CrossCase, a: Blade, b: Blade) -> u32 {
    match case {
        CrossCase::C1 | CrossCase::C2 => a.grade(),
        // The smaller blade: `|B|` for c3, `|A|` for c4.
        CrossCase::C3 => b.grade(),
        CrossCase::C4 => a.grade(),
    }
}

/// The alternative reading of `r` in c3/c4: the larger blade.
fn case_r_larger(case: CrossCase, a: Blade, b: Blade) -> u32 {
    match case {
        CrossCase::C3 => a.grade(),
        CrossCase::C4 => b.grade(),
        _ => case_r(case, a, b),
    }
}

fn literal_exponent(case: CrossCase, r: u32, a: Blade, b: Blade, i: usize, j: usize) -> i64 {
    let r2 = (r * r) as i64;
    let rank = |blade: Blade, g: usize| blade.rank(g).expect("case guarantees membership") as i64;
    match case {
        CrossCase::C1 => r2 + 1 - rank(a, i) - rank(b, j),
        CrossCase::C2 => r2 + 1,
        CrossCase::C3 => r2 - rank(a, i) - rank(a, j),
        CrossCase::C4 => r2 - rank(b, i) - rank(b, j),
    }
}

/// Number of generators of `A − j` strictly between `i` and `j`.
fn shared_between(a: Blade, i: usize, j: usize) -> usize {
    let (lo, hi) = (i.min(j), i.max(j));
    a.generators()
        .filter(|&g| g != j && lo < g && g < hi)
        .count()
}

/// The closed-form sign of `[ē_A e_i e_B ē_j]_0` in `case`.
pub fn case_sign(
    formula: CaseFormula,
    case: CrossCase,
    a: Blade,
    b: Blade,
    i: usize,
    j: usize,
) -> Sign {
    let literal = Sign::pow(literal_exponent(case, case_r(case, a, b), a, b, i, j));
    let corrected = match case {
        CrossCase::C1 => literal,
        CrossCase::C2 => literal * Sign::pow(shared_between(a, i, j) as i64),
        CrossCase::C3 | CrossCase::C4 => literal * Sign::from_parity(i > j),
    };
    match formula {
        CaseFormula::Literal => literal,
        CaseFormula::Corrected => corrected,
        CaseFormula::FlippedCase(flipped) if flipped == case => -corrected,
        CaseFormula::FlippedCase(_) => corrected,
    }
}

/// Result of one cross-term comparison.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrossTerm {
    pub case: Option<CrossCase>,
    /// `[ē_A e_i e_B ē_j]_0` from blade products: `0` or `±1`.
    pub brute: i64,
    /// The corrected case formula, `None` when no case applies.
    pub closed: Option<i64>,
    /// The exponent as originally stated, `None` when no case applies.
    pub literal: Option<i64>,
    /// Whether both readings of `r` in c3/c4 give the same sign.
    pub r_readings_agree: bool,
}

/// `[ē_A e_i e_B ē_j]_0` by blade products.
pub fn cross_term_brute(
    n: usize,
    a: Blade,
    b: Blade,
    i: usize,
    j: usize,
) -> Result<i64, IdentityError> {
    let ei = Blade::generator(i);
    let ej = Blade::generator(j);
    let (s1, c1) = crate::algebra::blade_product(n, a, ei)?;
    let (s2, c2) = crate::algebra::blade_product(n, c1, b)?;
    let (s3, c3) = crate::algebra::blade_product(n, c2, ej)?;
    if c3 != Blade::SCALAR {
        return Ok(0);
    }
    // ē_A = conj-sign · e_A and ē_j = −e_j.
    let sign = conjugation_sign(a.grade()) * s1 * s2 * s3 * Sign::Minus;
    Ok(sign.to_i64())
}

pub fn cross_term_case_sign(
    n: usize,
    i: usize,
    j: usize,
    a: Blade,
    b: Blade,
) -> Result<CrossTerm, IdentityError> {
    check_index(n, i)?;
    check_index(n, j)?;
    if i == j {
        return Err(IdentityError::EqualIndices(i));
    }
    for blade in [a, b] {
        if !blade.is_valid_for(n) {
            return Err(AlgebraError::InvalidBlade {
                bits: blade.bits(),
                n,
            }
            .into());
        }
    }
    let brute = cross_term_brute(n, a, b, i, j)?;
    let cases = matching_cases(a, b, i, j);
    debug_assert!(cases.len() <= 1);
    let case = cases.first().copied();
    let (closed, literal, r_readings_agree) = match case {
        Some(c) => {
            let closed = case_sign(CaseFormula::Corrected, c, a, b, i, j).to_i64();
            let literal = case_sign(CaseFormula::Literal, c, a, b, i, j).to_i64();
            let alt = Sign::pow(literal_exponent(c, case_r_larger(c, a, b), a, b, i, j)).to_i64();
            (Some(closed), Some(literal), alt == literal)
        }
        None => (None, None, true),
    };
    Ok(CrossTerm {
        case,
        brute,
        closed,
        literal,
        r_readings_agree,
    })
}

/// Whether the literal formula is expected to be right for `(case, A, i, j)`.
pub fn literal_formula_valid(case: CrossCase, a: Blade, i: usize, j: usize) -> bool {
    match case {
        CrossCase::C1 => true,
        CrossCase::C2 => shared_between(a, i, j).is_multiple_of(2),
        CrossCase::C3 | CrossCase::C4 => i < j,
    }
}

/// Symmetric `(n+1)×(n+1)` rational matrix standing for `∂²φ/∂x_j∂x_i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HessianStencil {
    entries: Vec<Vec<BigRational>>,
}

impl HessianStencil {
    pub fn new(entries: Vec<Vec<BigRational>>) -> Result<Self, IdentityError> {
        let dim = entries.len();
        if entries.iter().any(|row| row.len() != dim) || dim == 0 {
            return Err(IdentityError::HessianShape {
                expected: dim.max(1),
            });
        }
        for r in 0..dim {
            for c in 0..r {
                if entries[r][c] != entries[c][r] {
                    return Err(IdentityError::Asymmetric { row: r, col: c });
                }
            }
        }
        Ok(HessianStencil { entries })
    }

    pub fn from_integers(entries: &[Vec<i64>]) -> Result<Self, IdentityError> {
        Self::new(
            entries
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|v| BigRational::from_integer((*v).into()))
                        .collect()
                })
                .collect(),
        )
    }

    pub fn diagonal(diag: &[i64]) -> Self {
        let dim = diag.len();
        let mut rows = vec![vec![0i64; dim]; dim];
        for (k, d) in diag.iter().enumerate() {
            rows[k][k] = *d;
        }
        Self::from_integers(&rows).expect("diagonal matrices are symmetric")
    }

    /// `n + 1`.
    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, row: usize, col: usize) -> &BigRational {
        &self.entries[row][col]
    }

    /// Checks the pointwise sign hypotheses: zero spatial off-diagonal
    /// entries, nonpositive spatial diagonal, nonnegative trace.
    pub fn check_hypotheses(&self) -> Result<(), IdentityError> {
        let dim = self.dim();
        let mut trace = BigRational::zero();
        for k in 0..dim {
            trace += &self.entries[k][k];
        }
        if trace.is_negative() {
            return Err(IdentityError::HypothesisViolated(format!(
                "trace {trace} < 0"
            )));
        }
        for i in 1..dim {
            if self.entries[i][i].is_positive() {
                return Err(IdentityError::HypothesisViolated(format!(
                    "H[{i}][{i}] = {} > 0",
                    self.entries[i][i]
                )));
            }
            for j in 1..dim {
                if i != j && !self.entries[i][j].is_zero() {
                    return Err(IdentityError::HypothesisViolated(format!(
                        "H[{i}][{j}] = {} != 0",
                        self.entries[i][j]
                    )));
                }
            }
        }
        Ok(())
    }
}

/// The cross part `2^n Σ_{i≠j≥1} H_ij Σ_A α_A α_{A⊕{i,j}} s(A, i, j)` with
/// case signs from `formula`.
pub(crate) fn i6_closed_with<T: Scalar>(
    alpha: &Multivector<T>,
    hessian: impl Fn(usize, usize) -> T,
    formula: CaseFormula,
) -> T {
    let n = alpha.n();
    let mut total = T::zero();
    for i in 1..=n {
        for j in 1..=n {
            if i == j {
                continue;
            }
            let h = hessian(i, j);
            if h.is_zero() {
                continue;
            }
            let pair = Blade::generator(i).bits() | Blade::generator(j).bits();
            let mut inner = T::zero();
            for (a, ca) in alpha.terms() {
                if ca.is_zero() {
                    continue;
                }
                let b = Blade::from_bits(a.bits() ^ pair, n).expect("valid for n");
                let cb = alpha.coeff(b);
                if cb.is_zero() {
                    continue;
                }
                let case = matching_cases(a, b, i, j)[0];
                let term = ca.clone() * cb.clone();
                inner = case_sign(formula, case, a, b, i, j).apply(term) + inner;
            }
            total = total + h * inner;
        }
    }
    pow2::<T>(n) * total
}

/// Closed form of `I₄`: diagonal closed forms plus cross-case sums, with
/// the `x_0`-mixed part set to zero.
pub(crate) fn i4_closed_with<T: Scalar>(
    alpha: &Multivector<T>,
    hessian: impl Fn(usize, usize) -> T,
    formula: CaseFormula,
) -> T {
    let n = alpha.n();
    let mut diag = T::zero();
    for i in 1..=n {
        let h = hessian(i, i);
        if !h.is_zero() {
            diag = diag + h * i5_closed(alpha, i);
        }
    }
    diag + i6_closed_with(alpha, hessian, formula)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct I4Check {
    /// By brute-force products over the full double sum.
    pub direct: BigRational,
    /// Diagonal closed form + cross-case sum.
    pub closed: BigRational,
    /// Brute-force diagonal part (`i = j`).
    pub diagonal: BigRational,
    /// Brute-force cross part (`i ≠ j`, both spatial).
    pub cross: BigRational,
    /// Brute-force `x_0`-mixed part (`i = 0`).
    pub mixed: BigRational,
}

/// `I₄` computed directly and in closed form.
pub fn i4_assembled<T: ExactScalar>(
    alpha: &Multivector<T>,
    h: &HessianStencil,
) -> Result<I4Check, IdentityError> {
    i4_assembled_with(alpha, h, CaseFormula::Corrected)
}

pub fn i4_assembled_with<T: ExactScalar>(
    alpha: &Multivector<T>,
    h: &HessianStencil,
    formula: CaseFormula,
) -> Result<I4Check, IdentityError> {
    let n = alpha.n();
    if h.dim() != n + 1 {
        return Err(IdentityError::HessianShape { expected: n + 1 });
    }
    let alpha: Multivector<BigRational> = alpha.map(ExactScalar::to_rational);
    let abar = alpha.conjugation();
    let scale = pow2::<BigRational>(n);
    let mut parts = [
        BigRational::zero(),
        BigRational::zero(),
        BigRational::zero(),
    ];
    for j in 1..=n {
        let ej_alpha = left_mul_generator(&alpha, j);
        let alpha_ej = alpha.right_mul_blade(Blade::generator(j));
        for i in 0..=n {
            let hji = h.get(j, i);
            if hji.is_zero() {
                continue;
            }
            let y = right_mul_conj_generator(&ej_alpha, i)
                .try_sub(&right_mul_conj_generator(&alpha_ej, i))?;
            let value = scale.clone() * abar.scalar_part_of_product(&y)? * hji.clone();
            let slot = if i == 0 {
                2
            } else if i == j {
                0
            } else {
                1
            };
            parts[slot] += value;
        }
    }
    let [diagonal, cross, mixed] = parts;
    let direct = diagonal.clone() + cross.clone() + mixed.clone();
    let closed = i4_closed_with(&alpha, |r, c| h.get(r, c).clone(), formula);
    Ok(I4Check {
        direct,
        closed,
        diagonal,
        cross,
        mixed,
    })
}

/// `I₄ ≥ 0` for a stencil satisfying the sign hypotheses.
pub fn i4_nonneg_under_hypotheses<T: ExactScalar>(
    alpha: &Multivector<T>,
    h: &HessianStencil,
) -> Result<bool, IdentityError> {
    h.check_hypotheses()?;
    let check = i4_assembled(alpha, h)?;
    Ok(!check.direct.is_negative())
}

/// All `α = e_A`.
pub fn single_blade_alphas(n: usize) -> Vec<ExactMultivector> {
    Blade::all(n).map(|b| Multivector::basis(n, b)).collect()
}

/// All `α = e_A ± e_B` with `A < B`.
pub fn two_blade_alphas(n: usize) -> Vec<ExactMultivector> {
    let blades: Vec<Blade> = Blade::all(n).collect();
    let mut out = Vec::new();
    for (k, a) in blades.iter().enumerate() {
        for b in &blades[k + 1..] {
            for s in [1i64, -1] {
                out.push(
                    Multivector::from_terms(n, [(*a, BigInt::one()), (*b, BigInt::from(s))])
                        .expect("valid blades"),
                );
            }
        }
    }
    out
}

/// Random integer multivector with coefficients in `-bound..=bound`.
pub fn random_alpha<R: Rng + ?Sized>(n: usize, bound: i64, rng: &mut R) -> ExactMultivector {
    let coeffs = (0..1usize << n)
        .map(|_| BigInt::from(rng.random_range(-bound..=bound)))
        .collect();
    Multivector::from_coeffs(n, coeffs).expect("2^n coefficients")
}

fn small_rational<R: Rng + ?Sized>(rng: &mut R, bound: i64) -> BigRational {
    let num = rng.random_range(-bound..=bound);
    let den = rng.random_range(1..=4i64);
    BigRational::new(num.into(), den.into())
}

/// Random symmetric rational stencil.
pub fn random_hessian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> HessianStencil {
    let dim = n + 1;
    let mut rows = vec![vec![BigRational::zero(); dim]; dim];
    for r in 0..dim {
        for c in 0..=r {
            let v = small_rational(rng, 6);
            rows[r][c] = v.clone();
            rows[c][r] = v;
        }
    }
    HessianStencil::new(rows).expect("symmetric by construction")
}

/// Random stencil satisfying the sign hypotheses. The `x_0` row and column
/// are arbitrary apart from the trace condition.
pub fn random_hypothesis_hessian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> HessianStencil {
    let dim = n + 1;
    let mut rows = vec![vec![BigRational::zero(); dim]; dim];
    let mut spatial = BigRational::zero();
    for (i, row) in rows.iter_mut().enumerate().skip(1) {
        let v = -small_rational(rng, 6).abs();
        spatial += &v;
        row[i] = v;
    }
    rows[0][0] = -spatial + small_rational(rng, 6).abs();
    for i in 1..dim {
        let v = small_rational(rng, 6);
        rows[0][i] = v.clone();
        rows[i][0] = v;
    }
    HessianStencil::new(rows).expect("symmetric by construction")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
        })
    }
}

/// One line of the identity certificate: an identity checked over a family
/// of inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub identity: String,
    pub n: usize,
    pub scope: String,
    pub checked: u64,
    pub failures: u64,
    /// First counterexample or a summary of the evidence.
    pub detail: String,
    pub verdict: Verdict,
}

impl Certificate {
    fn new(
        identity: &str,
        n: usize,
        scope: &str,
        checked: u64,
        failures: u64,
        detail: String,
    ) -> Self {
        Certificate {
            identity: identity.to_string(),
            n,
            scope: scope.to_string(),
            checked,
            failures,
            detail,
            verdict: Verdict::from_bool(failures == 0),
        }
    }
}

pub fn write_certificates_csv<W: Write>(certs: &[Certificate], mut out: W) -> io::Result<()> {
    writeln!(out, "identity,n,scope,checked,failures,verdict,detail")?;
    for c in certs {
        writeln!(
            out,
            "{},{},{},{},{},{},\"{}\"",
            c.identity,
            c.n,
            c.scope,
            c.checked,
            c.failures,
            c.verdict,
            c.detail.replace('"', "'")
        )?;
    }
    Ok(())
}

/// Diagonal identity for every `α` in `alphas` and every `i`.
pub fn certify_i5(n: usize, alphas: &[ExactMultivector], scope: &str) -> Certificate {
    let mut checked = 0;
    let mut failures = 0;
    let mut detail = String::from("lhs = rhs on all inputs");
    for alpha in alphas {
        for i in 1..=n {
            checked += 1;
            let r = i5_identity(alpha, i).expect("valid index");
            if !r.equal {
                if failures == 0 {
                    detail = format!("alpha = {alpha}, i = {i}: lhs {} != rhs {}", r.lhs, r.rhs);
                }
                failures += 1;
            }
        }
    }
    Certificate::new("i5_diagonal", n, scope, checked, failures, detail)
}

/// `x_0`-mixed terms vanish for every `α` in `alphas` and every `j`.
pub fn certify_i7(n: usize, alphas: &[ExactMultivector], scope: &str) -> Certificate {
    let mut checked = 0;
    let mut failures = 0;
    let mut detail = String::from("both scalar parts are 0 on all inputs");
    for alpha in alphas {
        for j in 1..=n {
            checked += 1;
            let (a, b) = i7_vanishing(alpha, j).expect("valid index");
            if !a.is_zero() || !b.is_zero() {
                if failures == 0 {
                    detail = format!("alpha = {alpha}, j = {j}: ({a}, {b})");
                }
                failures += 1;
            }
        }
    }
    Certificate::new("i7_vanishing", n, scope, checked, failures, detail)
}

/// Counts from an exhaustive sweep over `(A, B, i ≠ j)`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossSweep {
    pub checked: u64,
    pub per_case: [u64; 4],
    /// Closed form (under the chosen formula) disagrees with brute force.
    pub mismatches: u64,
    /// No case applies but brute force is nonzero.
    pub uncovered_nonzero: u64,
    /// More than one case's conditions hold.
    pub overlapping: u64,
    /// The two readings of `r` in c3/c4 disagree.
    pub r_disagreements: u64,
    /// Literal-formula mismatches outside the predicted domain, or predicted
    /// mismatches that did not occur.
    pub literal_unexplained: u64,
    pub literal_mismatches: u64,
    pub first_mismatch: Option<String>,
}

impl CrossSweep {
    fn record(&mut self, n: usize, formula: CaseFormula, a: Blade, b: Blade, i: usize, j: usize) {
        self.checked += 1;
        let cases = matching_cases(a, b, i, j);
        if cases.len() > 1 {
            self.overlapping += 1;
        }
        let brute = cross_term_brute(n, a, b, i, j).expect("valid blades");
        let Some(&case) = cases.first() else {
            if brute != 0 {
                self.uncovered_nonzero += 1;
            }
            return;
        };
        self.per_case[case as usize] += 1;
        let closed = case_sign(formula, case, a, b, i, j).to_i64();
        if closed != brute {
            self.mismatches += 1;
            if self.first_mismatch.is_none() {
                self.first_mismatch = Some(format!("{case}: A = {a}, B = {b}, i = {i}, j = {j}"));
            }
        }
        let literal = case_sign(CaseFormula::Literal, case, a, b, i, j).to_i64();
        let literal_ok = literal == brute;
        if !literal_ok {
            self.literal_mismatches += 1;
        }
        if literal_ok != literal_formula_valid(case, a, i, j) {
            self.literal_unexplained += 1;
        }
        let alt = Sign::pow(literal_exponent(
            case,
            case_r_larger(case, a, b),
            a,
            b,
            i,
            j,
        ));
        if alt.to_i64() != literal {
            self.r_disagreements += 1;
        }
    }
}

/// Every `(A, B, i ≠ j)` for the given `n`.
pub fn sweep_cross_terms(n: usize, formula: CaseFormula) -> CrossSweep {
    let mut s = CrossSweep::default();
    for a in Blade::all(n) {
        for b in Blade::all(n) {
            for i in 1..=n {
                for j in 1..=n {
                    if i != j {
                        s.record(n, formula, a, b, i, j);
                    }
                }
            }
        }
    }
    s
}

/// `samples` random `(A, B, i ≠ j)`. Half of the draws are built to satisfy
/// one of the four case conditions, since uniform draws almost never do for
/// large `n`.
pub fn sweep_cross_terms_sampled<R: Rng + ?Sized>(
    n: usize,
    formula: CaseFormula,
    samples: usize,
    rng: &mut R,
) -> CrossSweep {
    let mut s = CrossSweep::default();
    if n < 2 {
        return s;
    }
    let mask = (1u32 << n) - 1;
    for k in 0..samples {
        let i = rng.random_range(1..=n);
        let mut j = rng.random_range(1..n);
        if j >= i {
            j += 1;
        }
        let a = Blade::from_bits(rng.random::<u32>() & mask, n).expect("masked");
        let b = if k % 2 == 0 {
            Blade::from_bits(rng.random::<u32>() & mask, n).expect("masked")
        } else {
            // Toggling i and j maps A onto the partner blade of whichever
            // case A's membership pattern selects.
            a.toggle(i).toggle(j)
        };
        s.record(n, formula, a, b, i, j);
    }
    s
}

/// Certificates for the cross-term cases: corrected formula, coverage,
/// exclusivity, the `r` reading, and the literal formula's exact domain.
pub fn certify_cross_terms(n: usize) -> Vec<Certificate> {
    let s = sweep_cross_terms(n, CaseFormula::Corrected);
    certify_cross_sweep(n, "exhaustive A,B,i!=j", &s)
}

/// Same records as [`certify_cross_terms`] for an arbitrary sweep.
pub fn certify_cross_sweep(n: usize, scope: &str, s: &CrossSweep) -> Vec<Certificate> {
    let counts = format!(
        "c1 {} c2 {} c3 {} c4 {}",
        s.per_case[0], s.per_case[1], s.per_case[2], s.per_case[3]
    );
    vec![
        Certificate::new(
            "cross_case_sign",
            n,
            scope,
            s.checked,
            s.mismatches,
            s.first_mismatch.clone().unwrap_or_else(|| counts.clone()),
        ),
        Certificate::new(
            "cross_no_case_is_zero",
            n,
            scope,
            s.checked,
            s.uncovered_nonzero,
            "brute = 0 whenever no case applies".into(),
        ),
        Certificate::new(
            "cross_cases_exclusive",
            n,
            scope,
            s.checked,
            s.overlapping,
            "at most one case per configuration".into(),
        ),
        Certificate::new(
            "cross_r_convention",
            n,
            scope,
            s.per_case[2] + s.per_case[3],
            s.r_disagreements,
            "r = smaller blade size and r = larger blade size give equal parity".into(),
        ),
        Certificate::new(
            "cross_literal_domain",
            n,
            scope,
            s.per_case.iter().sum(),
            s.literal_unexplained,
            format!(
                "literal exponents wrong on {} configurations, exactly where predicted (c3/c4 with i > j, c2 with an odd count of shared generators between i and j)",
                s.literal_mismatches
            ),
        ),
    ]
}

/// Direct and closed `I₄` agree for every `(α, H)` pair.
pub fn certify_i4(
    n: usize,
    pairs: &[(ExactMultivector, HessianStencil)],
    scope: &str,
) -> Certificate {
    let mut failures = 0;
    let mut detail = String::from("direct = closed on all inputs");
    for (alpha, h) in pairs {
        let c = i4_assembled(alpha, h).expect("matching dimensions");
        let ok = c.direct == c.closed && c.mixed.is_zero() && (n > 1 || c.direct.is_zero());
        if !ok {
            if failures == 0 {
                detail = format!(
                    "alpha = {alpha}: direct {} closed {} mixed {}",
                    c.direct, c.closed, c.mixed
                );
            }
            failures += 1;
        }
    }
    Certificate::new(
        "i4_assembled",
        n,
        scope,
        pairs.len() as u64,
        failures,
        detail,
    )
}

/// `I₄ ≥ 0` for every pair, whose stencils must satisfy the hypotheses.
pub fn certify_i4_nonneg(
    n: usize,
    pairs: &[(ExactMultivector, HessianStencil)],
    scope: &str,
) -> Certificate {
    let mut failures = 0;
    let mut min: Option<BigRational> = None;
    for (alpha, h) in pairs {
        let c = i4_assembled(alpha, h).expect("matching dimensions");
        let ok = h.check_hypotheses().is_ok() && !c.direct.is_negative();
        if !ok {
            failures += 1;
        }
        if min.as_ref().is_none_or(|m| &c.direct < m) {
            min = Some(c.direct);
        }
    }
    let detail = match min {
        Some(m) => format!("minimum I4 = {m}"),
        None => "no inputs".into(),
    };
    Certificate::new(
        "i4_nonnegative",
        n,
        scope,
        pairs.len() as u64,
        failures,
        detail,
    )
}

/// For `n = 1` the curvature term vanishes on every input.
pub fn certify_n1_vanishing(pairs: &[(ExactMultivector, HessianStencil)]) -> Certificate {
    let failures = pairs
        .iter()
        .filter(|(alpha, h)| {
            let c = i4_assembled(alpha, h).expect("n = 1 inputs");
            !(c.direct.is_zero() && c.closed.is_zero())
        })
        .count() as u64;
    Certificate::new(
        "i3_vanishes_n1",
        1,
        "random alpha and symmetric H",
        pairs.len() as u64,
        failures,
        "direct = closed = 0".into(),
    )
}

/// Runs the exhaustive cross-term sweep with each case's sign flipped in
/// turn and reports whether every mutant was caught.
pub fn mutation_self_test(n: usize) -> Certificate {
    let mut caught = 0;
    let mut missed = Vec::new();
    for case in CrossCase::ALL {
        let s = sweep_cross_terms(n, CaseFormula::FlippedCase(case));
        if s.mismatches > 0 || s.per_case[case as usize] == 0 {
            caught += 1;
        } else {
            missed.push(case.to_string());
        }
    }
    let detail = if missed.is_empty() {
        format!("{caught} sign-flip mutants caught")
    } else {
        format!("missed mutants: {}", missed.join(" "))
    };
    Certificate::new(
        "mutant_sign_flip",
        n,
        "exhaustive A,B,i!=j per mutant",
        CrossCase::ALL.len() as u64,
        missed.len() as u64,
        detail,
    )
}
