//! Generic scalar arithmetic: plain floats and forward-mode dual numbers.
//!
//! All geometric evaluators in this crate are written against [`Scalar`], so a
//! single implementation serves plain `f64`/`f32` evaluation and exact
//! first-derivative evaluation through [`DualN`]. Nesting `DualN` inside
//! `DualN` yields higher derivatives of the same code path.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive, Zero};

/// Base floating-point type: `f32` or `f64`.
pub trait Real: Float + FromPrimitive + Debug + Default + Send + Sync + 'static {}

impl Real for f32 {}
impl Real for f64 {}

/// Scalar type the core math is generic over.
///
/// Implemented by `f32`, `f64` and by [`DualN`] over any `Scalar`, so every
/// evaluator doubles as its own derivative program.
pub trait Scalar:
    Copy
    + Clone
    + Debug
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Send
    + Sync
    + 'static
{
    type Base: Real;

    fn from_base(x: Self::Base) -> Self;
    fn from_f64(x: f64) -> Self;
    /// Primal (derivative-free) value, unwrapped recursively.
    fn base(self) -> Self::Base;
    fn zero() -> Self;
    fn one() -> Self;
    fn sqrt(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn powi(self, n: i32) -> Self;
    fn abs(self) -> Self;

    fn base_f64(self) -> f64 {
        self.base().to_f64().unwrap_or(f64::NAN)
    }
}

macro_rules! impl_scalar_float {
    ($t:ty) => {
        impl Scalar for $t {
            type Base = $t;

            #[inline]
            fn from_base(x: $t) -> Self {
                x
            }
            #[inline]
            fn from_f64(x: f64) -> Self {
                x as $t
            }
            #[inline]
            fn base(self) -> $t {
                self
            }
            #[inline]
            fn zero() -> Self {
                0.0
            }
            #[inline]
            fn one() -> Self {
                1.0
            }
            #[inline]
            fn sqrt(self) -> Self {
                <$t>::sqrt(self)
            }
            #[inline]
            fn sin(self) -> Self {
                <$t>::sin(self)
            }
            #[inline]
            fn cos(self) -> Self {
                <$t>::cos(self)
            }
            #[inline]
            fn powi(self, n: i32) -> Self {
                <$t>::powi(self, n)
            }
            #[inline]
            fn abs(self) -> Self {
                <$t>::abs(self)
            }
        }
    };
}

impl_scalar_float!(f32);
impl_scalar_float!(f64);

/// Forward-mode dual number with `N` independent derivative lanes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DualN<S, const N: usize> {
    pub re: S,
    pub eps: [S; N],
}

/// One derivative lane, the common case.
pub type Dual<S> = DualN<S, 1>;

impl<S: Scalar, const N: usize> DualN<S, N> {
    #[inline]
    pub fn constant(re: S) -> Self {
        Self {
            re,
            eps: [S::zero(); N],
        }
    }

    /// Seed lane `lane` with derivative 1.
    #[inline]
    pub fn variable(re: S, lane: usize) -> Self {
        let mut eps = [S::zero(); N];
        eps[lane] = S::one();
        Self { re, eps }
    }

    #[inline]
    pub fn with_eps(re: S, eps: [S; N]) -> Self {
        Self { re, eps }
    }

    #[inline]
    fn map2(self, rhs: Self, re: S, f: impl Fn(S, S) -> S) -> Self {
        let mut eps = [S::zero(); N];
        for ((e, a), b) in eps.iter_mut().zip(&self.eps).zip(&rhs.eps) {
            *e = f(*a, *b);
        }
        Self { re, eps }
    }

    /// Chain rule against a primal value and its derivative.
    #[inline]
    fn lift(self, re: S, dre: S) -> Self {
        let mut eps = [S::zero(); N];
        for (e, a) in eps.iter_mut().zip(&self.eps) {
            *e = *a * dre;
        }
        Self { re, eps }
    }
}

impl<S: Scalar, const N: usize> Add for DualN<S, N> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        self.map2(rhs, self.re + rhs.re, |a, b| a + b)
    }
}

impl<S: Scalar, const N: usize> Sub for DualN<S, N> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        self.map2(rhs, self.re - rhs.re, |a, b| a - b)
    }
}

impl<S: Scalar, const N: usize> Mul for DualN<S, N> {
    type Output = Self;
    #[inline]
    #[allow(clippy::suspicious_arithmetic_impl)] // product rule
    fn mul(self, rhs: Self) -> Self {
        self.map2(rhs, self.re * rhs.re, |a, b| a * rhs.re + self.re * b)
    }
}

impl<S: Scalar, const N: usize> Div for DualN<S, N> {
    type Output = Self;
    #[inline]
    #[allow(clippy::suspicious_arithmetic_impl)] // quotient rule
    fn div(self, rhs: Self) -> Self {
        let q = self.re / rhs.re;
        self.map2(rhs, q, |a, b| (a - q * b) / rhs.re)
    }
}

impl<S: Scalar, const N: usize> Neg for DualN<S, N> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        let mut eps = [S::zero(); N];
        for (e, a) in eps.iter_mut().zip(&self.eps) {
            *e = -*a;
        }
        Self { re: -self.re, eps }
    }
}

impl<S: Scalar, const N: usize> AddAssign for DualN<S, N> {
    #[inline]
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}
impl<S: Scalar, const N: usize> SubAssign for DualN<S, N> {
    #[inline]
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}
impl<S: Scalar, const N: usize> MulAssign for DualN<S, N> {
    #[inline]
    fn mul_assign(&mut self, rhs: Self) {
        *self = *self * rhs;
    }
}
impl<S: Scalar, const N: usize> DivAssign for DualN<S, N> {
    #[inline]
    fn div_assign(&mut self, rhs: Self) {
        *self = *self / rhs;
    }
}

impl<S: Scalar, const N: usize> Scalar for DualN<S, N> {
    type Base = S::Base;

    #[inline]
    fn from_base(x: S::Base) -> Self {
        Self::constant(S::from_base(x))
    }
    #[inline]
    fn from_f64(x: f64) -> Self {
        Self::constant(S::from_f64(x))
    }
    #[inline]
    fn base(self) -> S::Base {
        self.re.base()
    }
    #[inline]
    fn zero() -> Self {
        Self::constant(S::zero())
    }
    #[inline]
    fn one() -> Self {
        Self::constant(S::one())
    }

    #[inline]
    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        let half = S::from_f64(0.5);
        self.lift(s, half / s)
    }

    #[inline]
    fn sin(self) -> Self {
        self.lift(self.re.sin(), self.re.cos())
    }

    #[inline]
    fn cos(self) -> Self {
        self.lift(self.re.cos(), -self.re.sin())
    }

    #[inline]
    fn powi(self, n: i32) -> Self {
        let d = S::from_f64(f64::from(n)) * self.re.powi(n - 1);
        self.lift(self.re.powi(n), d)
    }

    #[inline]
    fn abs(self) -> Self {
        if self.re.base() < S::Base::zero() {
            -self
        } else {
            self
        }
    }
}

/// Value and gradient of `f` at `x` in one dual evaluation.
pub fn value_and_grad<S: Scalar, F, const N: usize>(f: F, x: [S; N]) -> (S, [S; N])
where
    F: Fn([DualN<S, N>; N]) -> DualN<S, N>,
{
    let mut args = [DualN::<S, N>::constant(S::zero()); N];
    for (lane, (arg, xi)) in args.iter_mut().zip(x.iter()).enumerate() {
        *arg = DualN::variable(*xi, lane);
    }
    let out = f(args);
    (out.re, out.eps)
}

/// First derivative of a univariate function by a single dual evaluation.
pub fn derivative<S: Scalar, F>(f: F, x: S) -> (S, S)
where
    F: Fn(Dual<S>) -> Dual<S>,
{
    let out = f(Dual::variable(x, 0));
    (out.re, out.eps[0])
}
