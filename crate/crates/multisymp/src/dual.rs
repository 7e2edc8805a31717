//! Forward-mode automatic differentiation with multi-seed dual numbers.
//!
//! A `DualOf<T>` carries a value and one partial per declared seed
//! direction. Nesting (`DualOf<DualOf<f64>>`) yields exact second
//! derivatives through the same arithmetic.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Scalars the density evaluators are generic over: `f64` or a dual layer.
pub trait Scalar:
    Clone
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_f64(x: f64) -> Self;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_f64(x: f64) -> Self {
        x
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualOf<T> {
    pub val: T,
    pub d: Vec<T>,
}

pub type Dual = DualOf<f64>;
pub type Dual2 = DualOf<DualOf<f64>>;

impl<T: Scalar> DualOf<T> {
    pub fn constant(val: T, seeds: usize) -> Self {
        DualOf {
            val,
            d: vec![T::zero(); seeds],
        }
    }

    /// Value with unit sensitivity along seed direction `j`.
    pub fn seeded(val: T, j: usize, seeds: usize) -> Self {
        let mut d = vec![T::zero(); seeds];
        d[j] = T::one();
        DualOf { val, d }
    }

    /// Pairs partials, padding the shorter list with zeros; constants made
    /// through `Scalar::from_f64` carry no seeds of their own.
    fn zip<F: Fn(T, T) -> T>(&self, other: &Self, f: F) -> Vec<T> {
        let len = self.d.len().max(other.d.len());
        (0..len)
            .map(|i| {
                let a = self.d.get(i).cloned().unwrap_or_else(T::zero);
                let b = other.d.get(i).cloned().unwrap_or_else(T::zero);
                f(a, b)
            })
            .collect()
    }
}

impl<T: Scalar> Add for DualOf<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        DualOf {
            d: self.zip(&rhs, |a, b| a + b),
            val: self.val + rhs.val,
        }
    }
}

impl<T: Scalar> Sub for DualOf<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        DualOf {
            d: self.zip(&rhs, |a, b| a - b),
            val: self.val - rhs.val,
        }
    }
}

impl<T: Scalar> Mul for DualOf<T> {
    type Output = Self;
    // the product rule mixes + into Mul by nature
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn mul(self, rhs: Self) -> Self {
        DualOf {
            d: self.zip(&rhs, |a, b| {
                a * rhs.val.clone() + self.val.clone() * b
            }),
            val: self.val.clone() * rhs.val.clone(),
        }
    }
}

impl<T: Scalar> Div for DualOf<T> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let denom = rhs.val.clone() * rhs.val.clone();
        DualOf {
            d: self.zip(&rhs, |a, b| {
                (a * rhs.val.clone() - self.val.clone() * b) / denom.clone()
            }),
            val: self.val.clone() / rhs.val.clone(),
        }
    }
}

impl<T: Scalar> Neg for DualOf<T> {
    type Output = Self;
    fn neg(self) -> Self {
        DualOf {
            val: -self.val,
            d: self.d.into_iter().map(|a| -a).collect(),
        }
    }
}

impl<T: Scalar> Scalar for DualOf<T> {
    fn zero() -> Self {
        DualOf {
            val: T::zero(),
            d: Vec::new(),
        }
    }
    fn one() -> Self {
        DualOf {
            val: T::one(),
            d: Vec::new(),
        }
    }
    fn from_f64(x: f64) -> Self {
        DualOf {
            val: T::from_f64(x),
            d: Vec::new(),
        }
    }
}
