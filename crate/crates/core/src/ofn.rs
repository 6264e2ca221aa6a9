//! Triangular ordered fuzzy numbers stored as 5-tuples.
//!
//! A triangular ordered fuzzy number `A = (a0, a1, a2, a3, a4)` carries two
//! affine branch functions
//!
//! ```text
//! f(mu) = a1 + mu * (a2 - a1)
//! h(mu) = a3 - mu * (a3 - a2)
//! ```
//!
//! whose codomain is the support interval `[a0; a4]`. Every arithmetic
//! operation acts component by component, so `A - A` is exactly zero and
//! repeated updates do not inflate the fuzziness of the result.
//!
//! The carrier type is generic: the traffic models use `Ofn<i64>` for cell
//! positions and velocities, and `Ofn<f64>` for saturation flows.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use num_traits::{Num, ToPrimitive};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of components in the tuple representation.
pub const COMPONENTS: usize = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OfnError {
    #[error("components are not monotone: {0}")]
    NonMonotoneTuple(String),
}

/// Operations admitted on ordered fuzzy numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Min,
    Max,
}

impl BinaryOp {
    fn eval<T: Num + Copy + PartialOrd>(self, a: T, b: T) -> T {
        match self {
            BinaryOp::Add => a + b,
            BinaryOp::Sub => a - b,
            BinaryOp::Mul => a * b,
            BinaryOp::Min => {
                if b < a {
                    b
                } else {
                    a
                }
            }
            BinaryOp::Max => {
                if b > a {
                    b
                } else {
                    a
                }
            }
        }
    }
}

/// Triangular ordered fuzzy number.
///
/// Monotonicity `a0 <= a1 <= a2 <= a3 <= a4` is checked by [`Ofn::new`] only.
/// Results of [`Ofn::apply`] are never re-validated: component-wise minimum and
/// maximum may legitimately produce a non-monotone tuple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Ofn<T>([T; COMPONENTS]);

impl<T> Ofn<T>
where
    T: Num + Copy + PartialOrd + fmt::Debug,
{
    /// Builds a number from its five components, rejecting non-monotone input.
    pub fn new(a0: T, a1: T, a2: T, a3: T, a4: T) -> Result<Self, OfnError> {
        Self::try_from_components([a0, a1, a2, a3, a4])
    }

    pub fn try_from_components(c: [T; COMPONENTS]) -> Result<Self, OfnError> {
        if c.windows(2).all(|w| w[0] <= w[1]) {
            Ok(Self(c))
        } else {
            Err(OfnError::NonMonotoneTuple(format!("{c:?}")))
        }
    }

    /// Wraps raw components without the ordering check.
    ///
    /// Used for intermediate model quantities (gaps, masks, products) that
    /// follow component-wise arithmetic and carry no ordering guarantee.
    pub const fn from_components_unchecked(c: [T; COMPONENTS]) -> Self {
        Self(c)
    }

    /// Embeds a crisp value: all five components equal `c`.
    pub fn from_scalar(c: T) -> Self {
        Self([c; COMPONENTS])
    }

    pub fn components(&self) -> [T; COMPONENTS] {
        self.0
    }

    pub fn component(&self, m: usize) -> T {
        self.0[m]
    }

    /// `c[m] = op(a[m], b[m])` for every component.
    pub fn apply(&self, op: BinaryOp, other: &Self) -> Self {
        Self(std::array::from_fn(|m| op.eval(self.0[m], other.0[m])))
    }

    pub fn min(&self, other: &Self) -> Self {
        self.apply(BinaryOp::Min, other)
    }

    pub fn max(&self, other: &Self) -> Self {
        self.apply(BinaryOp::Max, other)
    }

    /// Maps every component through `f`.
    pub fn map<U, F: FnMut(T) -> U>(&self, f: F) -> Ofn<U> {
        Ofn(self.0.map(f))
    }

    /// Support interval `[a0; a4]`.
    pub fn support(&self) -> (T, T) {
        (self.0[0], self.0[COMPONENTS - 1])
    }

    pub fn is_monotone(&self) -> bool {
        self.0.windows(2).all(|w| w[0] <= w[1])
    }

    pub fn is_crisp(&self) -> bool {
        self.0.iter().all(|&c| c == self.0[0])
    }
}

impl<T> Ofn<T>
where
    T: Num + Copy + PartialOrd + ToPrimitive + fmt::Debug,
{
    /// Rising branch `f(mu) = a1 + mu (a2 - a1)`.
    pub fn up_branch(&self, mu: f64) -> f64 {
        let (a1, a2) = (to_f64(self.0[1]), to_f64(self.0[2]));
        a1 + mu * (a2 - a1)
    }

    /// Falling branch `h(mu) = a3 - mu (a3 - a2)`.
    pub fn down_branch(&self, mu: f64) -> f64 {
        let (a2, a3) = (to_f64(self.0[2]), to_f64(self.0[3]));
        a3 - mu * (a3 - a2)
    }

    /// Range-normalised form: `(a[m] - a0) / (a4 - a0)`.
    ///
    /// A zero-width support maps every component to 0.
    pub fn normalize(&self) -> NormalizedOfn {
        let lo = to_f64(self.0[0]);
        let width = to_f64(self.0[COMPONENTS - 1]) - lo;
        if width == 0.0 {
            return NormalizedOfn([0.0; COMPONENTS]);
        }
        NormalizedOfn(self.0.map(|c| (to_f64(c) - lo) / width))
    }

    pub fn to_f64(&self) -> Ofn<f64> {
        Ofn(self.0.map(to_f64))
    }
}

fn to_f64<T: ToPrimitive>(v: T) -> f64 {
    v.to_f64().expect("component representable as f64")
}

impl<T: Num + Copy + PartialOrd + fmt::Debug> Add for Ofn<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        self.apply(BinaryOp::Add, &rhs)
    }
}

impl<T: Num + Copy + PartialOrd + fmt::Debug> Sub for Ofn<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self.apply(BinaryOp::Sub, &rhs)
    }
}

impl<T: Num + Copy + PartialOrd + fmt::Debug> Mul for Ofn<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        self.apply(BinaryOp::Mul, &rhs)
    }
}

impl<T: fmt::Display> fmt::Display for Ofn<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a0, a1, a2, a3, a4] = &self.0;
        write!(f, "({a0}, {a1}, {a2}, {a3}, {a4})")
    }
}

/// Range-normalised ordered fuzzy number with components in `[0; 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedOfn([f64; COMPONENTS]);

impl NormalizedOfn {
    pub fn components(&self) -> [f64; COMPONENTS] {
        self.0
    }

    pub fn component(&self, m: usize) -> f64 {
        self.0[m]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ofn(c: [f64; 5]) -> Ofn<f64> {
        Ofn::try_from_components(c).unwrap()
    }

    #[test]
    fn constructs_saturation_tuple() {
        let s = Ofn::new(1440.0, 1503.0, 1575.0, 1638.0, 1800.0).unwrap();
        assert_eq!(s.components(), [1440.0, 1503.0, 1575.0, 1638.0, 1800.0]);
        assert_eq!(s.support(), (1440.0, 1800.0));
    }

    #[test]
    fn constructs_crisp_zero() {
        let z = Ofn::new(0.0, 0.0, 0.0, 0.0, 0.0).unwrap();
        assert!(z.is_crisp());
        assert_eq!(z, Ofn::from_scalar(0.0));
    }

    #[test]
    fn rejects_descending_tuple() {
        assert!(matches!(
            Ofn::new(3.0, 2.0, 1.0, 0.0, 0.0),
            Err(OfnError::NonMonotoneTuple(_))
        ));
    }

    #[test]
    fn componentwise_examples() {
        let a = ofn([5.0, 6.0, 7.0, 8.0, 9.0]);
        assert_eq!(a.apply(BinaryOp::Sub, &a), Ofn::from_scalar(0.0));

        let b = ofn([1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!((b + Ofn::from_scalar(1.0)).components(), [2.0, 3.0, 4.0, 5.0, 6.0]);

        let rev = Ofn::from_components_unchecked([5.0, 4.0, 3.0, 2.0, 1.0]);
        let m = b.min(&rev);
        assert_eq!(m.components(), [1.0, 2.0, 3.0, 2.0, 1.0]);
        assert!(!m.is_monotone());
    }

    #[test]
    fn scalar_embedding() {
        assert_eq!(Ofn::from_scalar(1).components(), [1; 5]);
        assert_eq!(Ofn::from_scalar(0).components(), [0; 5]);
        assert_eq!(Ofn::from_scalar(2).components(), [2; 5]);
    }

    #[test]
    fn normalize_examples() {
        let n = ofn([0.0, 1.0, 2.0, 3.0, 4.0]).normalize();
        assert_eq!(n.components(), [0.0, 0.25, 0.5, 0.75, 1.0]);

        let n = Ofn::from_scalar(7.0).normalize();
        assert_eq!(n.components(), [0.0; 5]);

        let n = ofn([100.0, 104.0, 108.0, 112.0, 120.0]).normalize();
        for (got, want) in n.components().iter().zip([0.0, 0.2, 0.4, 0.6, 1.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn branches_follow_affine_form() {
        let a = Ofn::new(0, 2, 6, 8, 10).unwrap();
        assert_eq!(a.up_branch(0.0), 2.0);
        assert_eq!(a.up_branch(1.0), 6.0);
        assert_eq!(a.down_branch(0.0), 8.0);
        assert_eq!(a.down_branch(0.5), 7.0);
    }

    fn sorted5() -> impl Strategy<Value = [f64; 5]> {
        prop::array::uniform5(-1.0e6..1.0e6f64).prop_map(|mut c| {
            c.sort_by(|a, b| a.partial_cmp(b).unwrap());
            c
        })
    }

    fn op() -> impl Strategy<Value = BinaryOp> {
        prop_oneof![
            Just(BinaryOp::Add),
            Just(BinaryOp::Sub),
            Just(BinaryOp::Mul),
            Just(BinaryOp::Min),
            Just(BinaryOp::Max),
        ]
    }

    proptest! {
        #[test]
        fn component_locality(a in sorted5(), b in sorted5(), op in op(), m in 0usize..5, noise in -10.0..10.0f64) {
            let base = ofn(a).apply(op, &ofn(b));
            let mut a2 = a;
            let mut b2 = b;
            for k in 0..5 {
                if k != m {
                    a2[k] += noise;
                    b2[k] -= noise;
                }
            }
            let pert = Ofn::from_components_unchecked(a2).apply(op, &Ofn::from_components_unchecked(b2));
            prop_assert_eq!(base.component(m), pert.component(m));
        }

        #[test]
        fn self_subtraction_is_zero(a in sorted5()) {
            let a = ofn(a);
            prop_assert_eq!(a - a, Ofn::from_scalar(0.0));
        }

        #[test]
        fn zero_is_additive_identity(a in sorted5()) {
            let a = ofn(a);
            prop_assert_eq!(a + Ofn::from_scalar(0.0), a);
        }

        #[test]
        fn normalization_endpoints(a in sorted5()) {
            let a = ofn(a);
            prop_assume!(a.support().1 > a.support().0);
            let n = a.normalize();
            prop_assert_eq!(n.component(0), 0.0);
            prop_assert!((n.component(4) - 1.0).abs() < 1e-12);
            for c in n.components() {
                prop_assert!((-1e-12..=1.0 + 1e-12).contains(&c));
            }
        }

        #[test]
        fn normalization_is_affine_invariant(a in sorted5(), scale in 0.01..100.0f64, shift in -1.0e3..1.0e3f64) {
            let a = ofn(a);
            prop_assume!(a.support().1 - a.support().0 > 1e-3);
            let moved = a.map(|c| scale * c + shift);
            let (n1, n2) = (a.normalize(), moved.normalize());
            for m in 0..5 {
                prop_assert!((n1.component(m) - n2.component(m)).abs() < 1e-6);
            }
        }
    }
}
