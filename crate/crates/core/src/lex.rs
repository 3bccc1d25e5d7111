//! Lexicographic vectors, lower-triangular multiplier matrices and the
//! comparison primitives every other module builds on.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Index, IndexMut, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::LexError;

/// Exact rational scalar used by oracles and axiom checks.
pub type Rat = BigRational;

/// Numeric field the algorithms are generic over. Implemented for `f64`
/// (production solving) and [`Rat`] (exact oracle arithmetic).
pub trait Scalar:
    Clone
    + fmt::Debug
    + PartialEq
    + PartialOrd
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
    + 'static
{
    fn from_rat(r: &Rat) -> Self;
    fn to_f64(&self) -> f64;
    fn abs_val(&self) -> Self;
    /// `|self - other| <= eps`.
    fn within(&self, other: &Self, eps: f64) -> bool;
    fn from_int(v: i64) -> Self {
        Self::from_rat(&Rat::from_integer(BigInt::from(v)))
    }
}

impl Scalar for f64 {
    fn from_rat(r: &Rat) -> Self {
        ToPrimitive::to_f64(r).unwrap_or(f64::NAN)
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn abs_val(&self) -> Self {
        self.abs()
    }
    fn within(&self, other: &Self, eps: f64) -> bool {
        (self - other).abs() <= eps
    }
}

impl Scalar for Rat {
    fn from_rat(r: &Rat) -> Self {
        r.clone()
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn abs_val(&self) -> Self {
        self.abs()
    }
    fn within(&self, other: &Self, eps: f64) -> bool {
        match Rat::from_float(eps) {
            Some(e) => (self.clone() - other.clone()).abs() <= e,
            None => false,
        }
    }
}

/// Builds `num/den` as an exact rational. Panics on a zero denominator.
pub fn rat(num: i64, den: i64) -> Rat {
    Rat::new(BigInt::from(num), BigInt::from(den))
}

/// Parses `"p/q"`, `"p"` or a decimal literal such as `"0.25"` into an exact rational.
pub fn parse_rat(text: &str) -> Option<Rat> {
    let text = text.trim();
    if let Some((n, d)) = text.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(Rat::new(n, d));
    }
    if let Ok(n) = text.parse::<BigInt>() {
        return Some(Rat::from_integer(n));
    }
    // Decimal literal: read exactly rather than through f64.
    let (neg, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text.strip_prefix('+').unwrap_or(text)),
    };
    let (int_part, frac_part) = body.split_once('.')?;
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits: BigInt = format!("{int_part}{frac_part}").parse().ok()?;
    let scale = num_traits::pow(BigInt::from(10), frac_part.len());
    let r = Rat::new(digits, scale);
    Some(if neg { -r } else { r })
}

/// Formats a rational as `"p/q"` (or `"p"` for integers).
pub fn format_rat(r: &Rat) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Equality policy for lexicographic comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Scalarity {
    /// Entries are equal only when they are exactly equal.
    ExactRational,
    /// Entries within `tie_epsilon` (absolute) are treated as equal.
    Float { tie_epsilon: f64 },
}

impl Scalarity {
    pub const DEFAULT_TIE_EPSILON: f64 = 1e-9;

    pub fn float(tie_epsilon: f64) -> Result<Self, LexError> {
        if tie_epsilon > 0.0 && tie_epsilon.is_finite() {
            Ok(Scalarity::Float { tie_epsilon })
        } else {
            Err(LexError::BadTieEpsilon(tie_epsilon))
        }
    }

    fn tied<T: Scalar>(&self, a: &T, b: &T) -> bool {
        match self {
            Scalarity::ExactRational => a == b,
            Scalarity::Float { tie_epsilon } => a.within(b, *tie_epsilon),
        }
    }
}

impl Default for Scalarity {
    fn default() -> Self {
        Scalarity::Float {
            tie_epsilon: Self::DEFAULT_TIE_EPSILON,
        }
    }
}

/// A d-dimensional utility vector compared lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LexVec<T = f64>(pub Vec<T>);

impl<T: Scalar> LexVec<T> {
    pub fn zeros(d: usize) -> Self {
        LexVec(vec![T::zero(); d])
    }

    pub fn from_ints(values: &[i64]) -> Self {
        LexVec(values.iter().map(|&v| T::from_int(v)).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn scale(&self, c: &T) -> Self {
        LexVec(self.0.iter().map(|x| x.clone() * c.clone()).collect())
    }

    /// `self + c * other`.
    pub fn add_scaled(&self, c: &T, other: &Self) -> Self {
        debug_assert_eq!(self.dim(), other.dim());
        LexVec(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a.clone() + c.clone() * b.clone())
                .collect(),
        )
    }

    pub fn to_f64(&self) -> LexVec<f64> {
        LexVec(self.0.iter().map(Scalar::to_f64).collect())
    }

    /// Largest absolute entry-wise difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a.clone() - b.clone()).to_f64().abs())
            .fold(0.0, f64::max)
    }
}

impl<T: Scalar> Add for &LexVec<T> {
    type Output = LexVec<T>;
    fn add(self, rhs: &LexVec<T>) -> LexVec<T> {
        LexVec(self.0.iter().zip(&rhs.0).map(|(a, b)| a.clone() + b.clone()).collect())
    }
}

impl<T: Scalar> Sub for &LexVec<T> {
    type Output = LexVec<T>;
    fn sub(self, rhs: &LexVec<T>) -> LexVec<T> {
        LexVec(self.0.iter().zip(&rhs.0).map(|(a, b)| a.clone() - b.clone()).collect())
    }
}

impl<T> Index<usize> for LexVec<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}

impl<T> IndexMut<usize> for LexVec<T> {
    fn index_mut(&mut self, i: usize) -> &mut T {
        &mut self.0[i]
    }
}

impl<T: fmt::Display> fmt::Display for LexVec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, ")")
    }
}

impl Serialize for LexVec<f64> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de> Deserialize<'de> for LexVec<f64> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Vec::<f64>::deserialize(d).map(LexVec)
    }
}

impl Serialize for LexVec<Rat> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let text: Vec<String> = self.0.iter().map(format_rat).collect();
        text.serialize(s)
    }
}

impl<'de> Deserialize<'de> for LexVec<Rat> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = Vec::<String>::deserialize(d)?;
        text.iter()
            .map(|t| parse_rat(t).ok_or_else(|| serde::de::Error::custom(format!("bad rational {t:?}"))))
            .collect::<Result<Vec<_>, _>>()
            .map(LexVec)
    }
}

/// Lexicographic comparison: the first non-tied entry decides.
pub fn lex_cmp<T: Scalar>(u: &LexVec<T>, v: &LexVec<T>, s: Scalarity) -> Result<Ordering, LexError> {
    if u.dim() != v.dim() {
        return Err(LexError::DimensionMismatch {
            left: u.dim(),
            right: v.dim(),
        });
    }
    Ok(lex_cmp_unchecked(u.as_slice(), v.as_slice(), s))
}

pub(crate) fn lex_cmp_unchecked<T: Scalar>(u: &[T], v: &[T], s: Scalarity) -> Ordering {
    for (a, b) in u.iter().zip(v) {
        if s.tied(a, b) {
            continue;
        }
        return if a > b { Ordering::Greater } else { Ordering::Less };
    }
    Ordering::Equal
}

/// Lexicographic maximum of a non-empty collection together with every index
/// tied with it under `s`.
#[allow(clippy::needless_range_loop)]
pub fn lex_max<T: Scalar>(set: &[LexVec<T>], s: Scalarity) -> Result<(LexVec<T>, Vec<usize>), LexError> {
    let first = set.first().ok_or(LexError::EmptyCollection)?;
    let d = first.dim();
    if let Some(bad) = set.iter().find(|v| v.dim() != d) {
        return Err(LexError::DimensionMismatch {
            left: d,
            right: bad.dim(),
        });
    }
    // Narrow dimension by dimension: this keeps the tied set well defined in
    // float mode, where tie chains are not transitive.
    let mut candidates: Vec<usize> = (0..set.len()).collect();
    for k in 0..d {
        let best = candidates
            .iter()
            .map(|&i| &set[i][k])
            .fold(None::<&T>, |acc, x| match acc {
                Some(b) if b >= x => Some(b),
                _ => Some(x),
            })
            .expect("non-empty");
        let best = best.clone();
        candidates.retain(|&i| s.tied(&set[i][k], &best) || set[i][k] >= best);
    }
    let winner = set[candidates[0]].clone();
    Ok((winner, candidates))
}

/// Dense square matrix, row major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Matrix<T> {
    dim: usize,
    entries: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self, LexError> {
        let dim = rows.len();
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != dim) {
            return Err(LexError::NotSquare {
                row: i,
                len: r.len(),
                expected: dim,
            });
        }
        Ok(Matrix {
            dim,
            entries: rows.into_iter().flatten().collect(),
        })
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zero(dim);
        for i in 0..dim {
            m.entries[i * dim + i] = T::one();
        }
        m
    }

    pub fn zero(dim: usize) -> Self {
        Matrix {
            dim,
            entries: vec![T::zero(); dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> &T {
        &self.entries[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.entries[i * self.dim + j] = v;
    }

    pub fn rows(&self) -> Vec<Vec<T>> {
        self.entries.chunks(self.dim.max(1)).map(<[T]>::to_vec).collect()
    }

    pub fn mul_vec(&self, v: &LexVec<T>) -> LexVec<T> {
        let d = self.dim;
        LexVec(
            (0..d)
                .map(|i| (0..d).fold(T::zero(), |acc, j| acc + self.get(i, j).clone() * v[j].clone()))
                .collect(),
        )
    }

    pub fn mul_mat(&self, other: &Matrix<T>) -> Matrix<T> {
        let d = self.dim;
        let mut out = Matrix::zero(d);
        for i in 0..d {
            for j in 0..d {
                let v = (0..d).fold(T::zero(), |acc, k| {
                    acc + self.get(i, k).clone() * other.get(k, j).clone()
                });
                out.set(i, j, v);
            }
        }
        out
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(&T) -> U) -> Matrix<U> {
        Matrix {
            dim: self.dim,
            entries: self.entries.iter().map(f).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(Zero::is_zero)
    }
}

/// Outcome of [`ltp_validate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LtpClass {
    /// Lower triangular with strictly positive diagonal.
    Ltp,
    /// Identically zero: marks a terminal event.
    Zero,
    /// Offending entry, 0-based (row, col).
    Invalid { row: usize, col: usize },
}

/// Classifies a square matrix as Ltp, Zero or Invalid.
pub fn ltp_validate<T: Scalar>(a: &Matrix<T>) -> LtpClass {
    if a.is_zero() {
        return LtpClass::Zero;
    }
    let d = a.dim();
    for i in 0..d {
        for j in i + 1..d {
            if !a.get(i, j).is_zero() {
                return LtpClass::Invalid { row: i, col: j };
            }
        }
    }
    for i in 0..d {
        if *a.get(i, i) <= T::zero() {
            return LtpClass::Invalid { row: i, col: i };
        }
    }
    LtpClass::Ltp
}

/// Classifies raw rows, rejecting non-square input.
pub fn ltp_validate_rows<T: Scalar>(rows: Vec<Vec<T>>) -> Result<LtpClass, LexError> {
    Ok(ltp_validate(&Matrix::from_rows(rows)?))
}

/// A matrix known to be in Ltp(d).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LtpMatrix<T>(Matrix<T>);

impl<T: Scalar> LtpMatrix<T> {
    pub fn new(m: Matrix<T>) -> Result<Self, LexError> {
        match ltp_validate(&m) {
            LtpClass::Ltp => Ok(LtpMatrix(m)),
            LtpClass::Zero => Err(LexError::ZeroMatrix),
            LtpClass::Invalid { row, col } => Err(LexError::NotLtp { row, col }),
        }
    }

    pub fn scaled_identity(dim: usize, c: T) -> Result<Self, LexError> {
        let mut m = Matrix::zero(dim);
        for i in 0..dim {
            m.set(i, i, c.clone());
        }
        Self::new(m)
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.0
    }

    pub fn diag(&self, i: usize) -> &T {
        self.0.get(i, i)
    }
}

/// Reward multiplier of an event: an Ltp matrix, or zero for terminal events.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Multiplier<T> {
    Ltp(LtpMatrix<T>),
    Terminal,
}

impl<T: Scalar> Multiplier<T> {
    pub fn from_matrix(m: Matrix<T>) -> Result<Self, LexError> {
        match ltp_validate(&m) {
            LtpClass::Ltp => Ok(Multiplier::Ltp(LtpMatrix(m))),
            LtpClass::Zero => Ok(Multiplier::Terminal),
            LtpClass::Invalid { row, col } => Err(LexError::NotLtp { row, col }),
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, Multiplier::Terminal)
    }

    /// `Γ u`, the zero vector for terminal multipliers.
    pub fn apply(&self, u: &LexVec<T>) -> LexVec<T> {
        match self {
            Multiplier::Ltp(m) => m.matrix().mul_vec(u),
            Multiplier::Terminal => LexVec::zeros(u.dim()),
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> T {
        match self {
            Multiplier::Ltp(m) => m.matrix().get(i, j).clone(),
            Multiplier::Terminal => T::zero(),
        }
    }
}

/// `A u + b` for `A` in Ltp(d).
pub fn lex_affine<T: Scalar>(a: &Matrix<T>, b: &LexVec<T>, u: &LexVec<T>) -> Result<LexVec<T>, LexError> {
    match ltp_validate(a) {
        LtpClass::Ltp => {}
        LtpClass::Zero => return Err(LexError::ZeroMatrix),
        LtpClass::Invalid { row, col } => return Err(LexError::NotLtp { row, col }),
    }
    if a.dim() != u.dim() || b.dim() != u.dim() {
        return Err(LexError::DimensionMismatch {
            left: a.dim(),
            right: u.dim().max(b.dim()),
        });
    }
    Ok(&a.mul_vec(u) + b)
}
