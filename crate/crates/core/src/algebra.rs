//! Real Clifford algebra over `R^{n+1}`.
//!
//! The basis element `e_0` is the unit and the generators `e_1, ..., e_n`
//! anticommute and square to `-1`. A basis blade `e_A = e_{h_1} ... e_{h_r}`
//! with `h_1 < ... < h_r` is encoded as a bitmask where generator `i` is bit
//! `i - 1`; the empty mask is `e_0`.
//!
//! Coefficients are generic so that the same code runs on `f64` for field
//! work and on arbitrary-precision integers or rationals where identities
//! must hold exactly.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::{One, Zero};
use thiserror::Error;

/// Largest supported number of anticommuting generators.
pub const MAX_GENERATORS: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AlgebraError {
    #[error("dimension mismatch: {left} vs {right} generators")]
    DimensionMismatch { left: usize, right: usize },
    #[error("blade mask {bits:#b} is not valid for n = {n}")]
    InvalidBlade { bits: u32, n: usize },
    #[error("generator index {index} out of range 1..={n}")]
    GeneratorOutOfRange { index: usize, n: usize },
    #[error("n = {0} exceeds the supported maximum of {MAX_GENERATORS} generators")]
    TooManyGenerators(usize),
    #[error("expected {expected} coefficients, got {got}")]
    CoefficientCount { expected: usize, got: usize },
}

/// Coefficient ring for multivectors.
pub trait Scalar:
    Clone
    + PartialEq
    + fmt::Debug
    + Zero
    + One
    + Neg<Output = Self>
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
{
}

impl<T> Scalar for T where
    T: Clone
        + PartialEq
        + fmt::Debug
        + Zero
        + One
        + Neg<Output = T>
        + Add<Output = T>
        + Sub<Output = T>
        + Mul<Output = T>
{
}

/// `2^k` in any coefficient ring.
pub fn pow2<T: Scalar>(k: usize) -> T {
    let mut acc = T::one();
    for _ in 0..k {
        acc = acc.clone() + acc;
    }
    acc
}

fn check_dim(n: usize) -> Result<(), AlgebraError> {
    if n > MAX_GENERATORS {
        Err(AlgebraError::TooManyGenerators(n))
    } else {
        Ok(())
    }
}

/// A sign `+1` or `-1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn from_parity(odd: bool) -> Self {
        if odd {
            Sign::Minus
        } else {
            Sign::Plus
        }
    }

    /// `(-1)^exponent`, for possibly negative exponents.
    pub fn pow(exponent: i64) -> Self {
        Self::from_parity(exponent.rem_euclid(2) == 1)
    }

    pub fn is_negative(self) -> bool {
        self == Sign::Minus
    }

    pub fn to_i64(self) -> i64 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    pub fn apply<T: Neg<Output = T>>(self, value: T) -> T {
        match self {
            Sign::Plus => value,
            Sign::Minus => -value,
        }
    }
}

impl Mul for Sign {
    type Output = Sign;

    fn mul(self, rhs: Sign) -> Sign {
        Sign::from_parity(self != rhs)
    }
}

impl Neg for Sign {
    type Output = Sign;

    fn neg(self) -> Sign {
        Sign::from_parity(self == Sign::Plus)
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Plus => "+1",
            Sign::Minus => "-1",
        })
    }
}

/// `e_A* = (-1)^|A| e_A`.
pub fn inversion_sign(grade: u32) -> Sign {
    Sign::from_parity(grade % 2 == 1)
}

/// `e_A† = (-1)^{(|A|-1)|A|/2} e_A`.
pub fn reversion_sign(grade: u32) -> Sign {
    Sign::from_parity(matches!(grade % 4, 2 | 3))
}

/// `ē_A = (-1)^{(|A|+1)|A|/2} e_A`.
pub fn conjugation_sign(grade: u32) -> Sign {
    Sign::from_parity(matches!(grade % 4, 1 | 2))
}

/// Index of a basis blade `e_A`: a set of generators stored as a bitmask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Blade(u32);

impl Blade {
    /// `e_0`, the unit.
    pub const SCALAR: Blade = Blade(0);

    /// Blade for a dense coefficient slot; the caller guarantees validity.
    #[inline]
    pub(crate) fn from_index(index: usize) -> Self {
        Blade(index as u32)
    }

    pub fn from_bits(bits: u32, n: usize) -> Result<Self, AlgebraError> {
        check_dim(n)?;
        if (bits as u64) >> n != 0 {
            return Err(AlgebraError::InvalidBlade { bits, n });
        }
        Ok(Blade(bits))
    }

    /// `e_i` for `1 <= i <= MAX_GENERATORS`, and `e_0` for `i = 0`.
    ///
    /// # Panics
    ///
    /// If `i > MAX_GENERATORS`.
    pub fn generator(i: usize) -> Self {
        assert!(i <= MAX_GENERATORS, "generator index {i} out of range");
        if i == 0 {
            Blade::SCALAR
        } else {
            Blade(1 << (i - 1))
        }
    }

    /// Blade spanned by the given 1-based generators, in any order, without repeats.
    pub fn from_generators(generators: &[usize], n: usize) -> Result<Self, AlgebraError> {
        check_dim(n)?;
        let mut bits = 0u32;
        for &g in generators {
            if g == 0 || g > n {
                return Err(AlgebraError::GeneratorOutOfRange { index: g, n });
            }
            bits |= 1 << (g - 1);
        }
        Ok(Blade(bits))
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// `|A|`.
    pub fn grade(self) -> u32 {
        self.0.count_ones()
    }

    pub fn is_valid_for(self, n: usize) -> bool {
        n <= MAX_GENERATORS && (self.0 as u64) >> n == 0
    }

    /// Whether generator `i >= 1` occurs in the blade.
    pub fn contains(self, i: usize) -> bool {
        (1..=32).contains(&i) && self.0 >> (i - 1) & 1 == 1
    }

    /// Ascending 1-based generator list `h_1 < ... < h_r`.
    pub fn generators(self) -> impl Iterator<Item = usize> {
        let bits = self.0;
        (0..32usize)
            .filter(move |k| bits >> k & 1 == 1)
            .map(|k| k + 1)
    }

    /// 1-based rank of generator `i` within the ascending generator list.
    pub fn rank(self, i: usize) -> Option<usize> {
        if !self.contains(i) {
            return None;
        }
        let below = self.0 & ((1u32 << (i - 1)) - 1);
        Some(below.count_ones() as usize + 1)
    }

    /// Symmetric difference `A Δ {i}`: adds `i` if absent, removes it otherwise.
    pub fn toggle(self, i: usize) -> Self {
        if i == 0 {
            self
        } else {
            Blade(self.0 ^ (1 << (i - 1)))
        }
    }

    /// All `2^n` blades in mask order.
    pub fn all(n: usize) -> impl Iterator<Item = Blade> {
        assert!(n <= MAX_GENERATORS);
        (0..(1u32 << n)).map(Blade)
    }
}

impl fmt::Display for Blade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 == 0 {
            return f.write_str("e0");
        }
        let gens: Vec<usize> = self.generators().collect();
        if gens.iter().all(|&g| g < 10) {
            f.write_str("e")?;
            for g in gens {
                write!(f, "{g}")?;
            }
            Ok(())
        } else {
            let parts: Vec<String> = gens.iter().map(|g| g.to_string()).collect();
            write!(f, "e[{}]", parts.join(","))
        }
    }
}

/// Parity of the number of transpositions needed to sort the concatenated
/// generator lists of `a` and `b`.
fn reorder_parity(a: u32, b: u32) -> bool {
    let mut swaps = 0u32;
    let mut rest = a >> 1;
    while rest != 0 {
        swaps += (rest & b).count_ones();
        rest >>= 1;
    }
    swaps % 2 == 1
}

/// Sign of `e_A e_B = sign · e_{A xor B}` without validation.
#[inline]
pub(crate) fn product_sign(a: Blade, b: Blade) -> Sign {
    let repeats = (a.0 & b.0).count_ones() % 2 == 1;
    Sign::from_parity(reorder_parity(a.0, b.0) ^ repeats)
}

/// `e_A e_B = sign · e_C` under `e_i e_j = -e_j e_i` and `e_i^2 = -1`.
pub fn blade_product(n: usize, a: Blade, b: Blade) -> Result<(Sign, Blade), AlgebraError> {
    check_dim(n)?;
    for blade in [a, b] {
        if !blade.is_valid_for(n) {
            return Err(AlgebraError::InvalidBlade { bits: blade.0, n });
        }
    }
    Ok((product_sign(a, b), Blade(a.0 ^ b.0)))
}

/// An element `a = Σ_A x_A e_A` of the algebra, stored densely.
#[derive(Debug, Clone, PartialEq)]
pub struct Multivector<T = f64> {
    n: usize,
    coeffs: Vec<T>,
}

impl<T: Scalar> Multivector<T> {
    /// # Panics
    ///
    /// If `n > MAX_GENERATORS`.
    pub fn zero(n: usize) -> Self {
        assert!(n <= MAX_GENERATORS, "n = {n} exceeds {MAX_GENERATORS}");
        Multivector {
            n,
            coeffs: vec![T::zero(); 1 << n],
        }
    }

    pub fn scalar(n: usize, value: T) -> Self {
        let mut mv = Self::zero(n);
        mv.coeffs[0] = value;
        mv
    }

    /// Unit blade `e_A`.
    ///
    /// # Panics
    ///
    /// If the blade is not valid for `n`.
    pub fn basis(n: usize, blade: Blade) -> Self {
        assert!(blade.is_valid_for(n), "blade {blade} invalid for n = {n}");
        let mut mv = Self::zero(n);
        mv.coeffs[blade.index()] = T::one();
        mv
    }

    pub fn from_coeffs(n: usize, coeffs: Vec<T>) -> Result<Self, AlgebraError> {
        check_dim(n)?;
        if coeffs.len() != 1 << n {
            return Err(AlgebraError::CoefficientCount {
                expected: 1 << n,
                got: coeffs.len(),
            });
        }
        Ok(Multivector { n, coeffs })
    }

    pub fn from_terms<I>(n: usize, terms: I) -> Result<Self, AlgebraError>
    where
        I: IntoIterator<Item = (Blade, T)>,
    {
        check_dim(n)?;
        let mut mv = Self::zero(n);
        for (blade, value) in terms {
            if !blade.is_valid_for(n) {
                return Err(AlgebraError::InvalidBlade { bits: blade.0, n });
            }
            let slot = &mut mv.coeffs[blade.index()];
            *slot = slot.clone() + value;
        }
        Ok(mv)
    }

    /// Number of anticommuting generators.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<T> {
        self.coeffs
    }

    /// `[a]_A`.
    pub fn coeff(&self, blade: Blade) -> &T {
        &self.coeffs[blade.index()]
    }

    pub fn set_coeff(&mut self, blade: Blade, value: T) {
        self.coeffs[blade.index()] = value;
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Zero::is_zero)
    }

    fn same_dim(&self, other: &Self) -> Result<(), AlgebraError> {
        if self.n != other.n {
            Err(AlgebraError::DimensionMismatch {
                left: self.n,
                right: other.n,
            })
        } else {
            Ok(())
        }
    }

    /// Clifford product `self · other`, the bilinear extension of [`blade_product`].
    pub fn product(&self, other: &Self) -> Result<Self, AlgebraError> {
        self.same_dim(other)?;
        let mut out = vec![T::zero(); self.coeffs.len()];
        for (ia, ca) in self.coeffs.iter().enumerate() {
            if ca.is_zero() {
                continue;
            }
            for (ib, cb) in other.coeffs.iter().enumerate() {
                if cb.is_zero() {
                    continue;
                }
                let term = ca.clone() * cb.clone();
                let sign = product_sign(Blade(ia as u32), Blade(ib as u32));
                let slot = &mut out[ia ^ ib];
                *slot = match sign {
                    Sign::Plus => slot.clone() + term,
                    Sign::Minus => slot.clone() - term,
                };
            }
        }
        Ok(Multivector {
            n: self.n,
            coeffs: out,
        })
    }

    /// `e_A · self`.
    pub fn left_mul_blade(&self, blade: Blade) -> Self {
        assert!(blade.is_valid_for(self.n));
        let mut out = vec![T::zero(); self.coeffs.len()];
        for (ib, c) in self.coeffs.iter().enumerate() {
            let b = Blade(ib as u32);
            out[(blade.0 ^ b.0) as usize] = product_sign(blade, b).apply(c.clone());
        }
        Multivector {
            n: self.n,
            coeffs: out,
        }
    }

    /// `self · e_A`.
    pub fn right_mul_blade(&self, blade: Blade) -> Self {
        assert!(blade.is_valid_for(self.n));
        let mut out = vec![T::zero(); self.coeffs.len()];
        for (ia, c) in self.coeffs.iter().enumerate() {
            let a = Blade(ia as u32);
            out[(a.0 ^ blade.0) as usize] = product_sign(a, blade).apply(c.clone());
        }
        Multivector {
            n: self.n,
            coeffs: out,
        }
    }

    fn map_by_grade(&self, sign: impl Fn(u32) -> Sign) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| sign((i as u32).count_ones()).apply(c.clone()))
            .collect();
        Multivector { n: self.n, coeffs }
    }

    /// `a*`.
    pub fn inversion(&self) -> Self {
        self.map_by_grade(inversion_sign)
    }

    /// `a†`.
    pub fn reversion(&self) -> Self {
        self.map_by_grade(reversion_sign)
    }

    /// `ā`, the composition of inversion and reversion.
    pub fn conjugation(&self) -> Self {
        self.map_by_grade(conjugation_sign)
    }

    /// `[a]_0`.
    pub fn scalar_part(&self) -> T {
        self.coeffs[0].clone()
    }

    /// `[self · other]_0`, summing only the blade products that land on `e_0`.
    pub fn scalar_part_of_product(&self, other: &Self) -> Result<T, AlgebraError> {
        self.same_dim(other)?;
        let mut acc = T::zero();
        for (ia, (a, b)) in self.coeffs.iter().zip(&other.coeffs).enumerate() {
            if a.is_zero() || b.is_zero() {
                continue;
            }
            let blade = Blade(ia as u32);
            let term = a.clone() * b.clone();
            acc = match product_sign(blade, blade) {
                Sign::Plus => acc + term,
                Sign::Minus => acc - term,
            };
        }
        Ok(acc)
    }

    /// `⟨τ_{e_A}, μ⟩ = 2^n (-1)^{(|A|+1)|A|/2} μ_A`.
    pub fn tau(&self, blade: Blade) -> T {
        let value = pow2::<T>(self.n) * self.coeffs[blade.index()].clone();
        conjugation_sign(blade.grade()).apply(value)
    }

    /// `(λ, μ)_0 = 2^n Σ_A λ_A μ_A`.
    pub fn inner0(&self, other: &Self) -> Result<T, AlgebraError> {
        self.same_dim(other)?;
        let sum = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .fold(T::zero(), |acc, (a, b)| acc + a.clone() * b.clone());
        Ok(pow2::<T>(self.n) * sum)
    }

    /// `(λ, μ)_0 = 2^n [λ μ̄]_0`, computed through the full product.
    pub fn inner0_via_product(&self, other: &Self) -> Result<T, AlgebraError> {
        let prod = self.product(&other.conjugation())?;
        Ok(pow2::<T>(self.n) * prod.scalar_part())
    }

    /// `|λ|_0^2 = (λ, λ)_0`.
    pub fn norm0_sq(&self) -> T {
        self.inner0(self).expect("same dimension")
    }

    pub fn scale(&self, factor: &T) -> Self {
        Multivector {
            n: self.n,
            coeffs: self
                .coeffs
                .iter()
                .map(|c| c.clone() * factor.clone())
                .collect(),
        }
    }

    pub fn try_add(&self, other: &Self) -> Result<Self, AlgebraError> {
        self.same_dim(other)?;
        Ok(Multivector {
            n: self.n,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a.clone() + b.clone())
                .collect(),
        })
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self, AlgebraError> {
        self.same_dim(other)?;
        Ok(Multivector {
            n: self.n,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a.clone() - b.clone())
                .collect(),
        })
    }

    /// Coefficient-wise conversion into another ring.
    pub fn map<U: Scalar>(&self, f: impl Fn(&T) -> U) -> Multivector<U> {
        Multivector {
            n: self.n,
            coeffs: self.coeffs.iter().map(f).collect(),
        }
    }

    /// Nonzero terms in blade order.
    pub fn terms(&self) -> impl Iterator<Item = (Blade, &T)> {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, c)| (Blade(i as u32), c))
    }
}

impl Multivector<f64> {
    /// `|λ|_0`.
    pub fn norm0(&self) -> f64 {
        self.norm0_sq().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.n, other.n);
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl<T: Scalar + fmt::Display> fmt::Display for Multivector<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (blade, c) in self.terms() {
            if !first {
                f.write_str(" + ")?;
            }
            write!(f, "{c}·{blade}")?;
            first = false;
        }
        if first {
            f.write_str("0")?;
        }
        Ok(())
    }
}

impl<T: Scalar> Mul for &Multivector<T> {
    type Output = Multivector<T>;

    /// # Panics
    ///
    /// On dimension mismatch; use [`Multivector::product`] to handle it.
    fn mul(self, rhs: Self) -> Multivector<T> {
        self.product(rhs).expect("multivector dimension mismatch")
    }
}

impl<T: Scalar> Add for &Multivector<T> {
    type Output = Multivector<T>;

    fn add(self, rhs: Self) -> Multivector<T> {
        self.try_add(rhs).expect("multivector dimension mismatch")
    }
}

impl<T: Scalar> Sub for &Multivector<T> {
    type Output = Multivector<T>;

    fn sub(self, rhs: Self) -> Multivector<T> {
        self.try_sub(rhs).expect("multivector dimension mismatch")
    }
}

impl<T: Scalar> Neg for &Multivector<T> {
    type Output = Multivector<T>;

    fn neg(self) -> Multivector<T> {
        self.map(|c| -c.clone())
    }
}
