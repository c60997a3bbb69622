//! Small exact fractions over i128.
//!
//! Atom probabilities and weights are decimal parameters; snapping them to
//! rationals with denominator 10^9 lets the static model characteristics
//! (ρ-moments, speed, regime boundaries) be computed exactly and rounded
//! once, instead of accumulating float error across atoms.

/// Reduced fraction num/den with den > 0.
///
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Frac {
    pub num: i128,
    pub den: i128,
}

fn gcd(mut a: i128, mut b: i128) -> i128 {
    a = a.abs();
    b = b.abs();
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

pub const SNAP_DEN: i128 = 1_000_000_000;

// Plain method names rather than operator impls: this is a tiny internal
// helper, not a general rational type.
#[allow(clippy::should_implement_trait)]
impl Frac {
    pub fn new(num: i128, den: i128) -> Frac {
        assert!(den != 0, "zero denominator");
        let sign = if den < 0 { -1 } else { 1 };
        let g = gcd(num, den);
        Frac {
            num: sign * num / g,
            den: sign * den / g,
        }
    }

    pub fn from_u64(n: u64) -> Frac {
        Frac::new(n as i128, 1)
    }

    /// Nearest fraction with denominator 10^9. Inputs this crate cares about
    /// are short decimals, which snap losslessly.
    pub fn snap(x: f64) -> Frac {
        let scaled = (x * SNAP_DEN as f64).round();
        Frac::new(scaled as i128, SNAP_DEN)
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn add(self, o: Frac) -> Frac {
        Frac::new(self.num * o.den + o.num * self.den, self.den * o.den)
    }

    /// Overflow-aware product with cross-reduction; None when the result
    /// cannot be represented.
    pub fn checked_mul(self, o: Frac) -> Option<Frac> {
        let g1 = gcd(self.num, o.den);
        let g2 = gcd(o.num, self.den);
        let num = (self.num / g1).checked_mul(o.num / g2)?;
        let den = (self.den / g2).checked_mul(o.den / g1)?;
        Some(Frac::new(num, den))
    }

    /// Overflow-aware sum over a common reduced denominator.
    pub fn checked_add(self, o: Frac) -> Option<Frac> {
        let g = gcd(self.den, o.den);
        let lhs = self.num.checked_mul(o.den / g)?;
        let rhs = o.num.checked_mul(self.den / g)?;
        let num = lhs.checked_add(rhs)?;
        let den = (self.den / g).checked_mul(o.den)?;
        Some(Frac::new(num, den))
    }

    pub fn checked_sub(self, o: Frac) -> Option<Frac> {
        self.checked_add(Frac::new(-o.num, o.den))
    }

    pub fn checked_div(self, o: Frac) -> Option<Frac> {
        if o.num == 0 {
            return None;
        }
        self.checked_mul(Frac::new(o.den, o.num))
    }

    pub fn sub(self, o: Frac) -> Frac {
        Frac::new(self.num * o.den - o.num * self.den, self.den * o.den)
    }

    pub fn mul(self, o: Frac) -> Frac {
        Frac::new(self.num * o.num, self.den * o.den)
    }

    pub fn div(self, o: Frac) -> Frac {
        assert!(o.num != 0, "division by zero fraction");
        Frac::new(self.num * o.den, self.den * o.num)
    }

    pub fn one() -> Frac {
        Frac { num: 1, den: 1 }
    }

    pub fn zero() -> Frac {
        Frac { num: 0, den: 1 }
    }

    pub fn cmp_val(self, o: Frac) -> std::cmp::Ordering {
        (self.num * o.den).cmp(&(o.num * self.den))
    }

    pub fn ge_one(self) -> bool {
        self.num >= self.den
    }

    pub fn lt_one(self) -> bool {
        self.num < self.den
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cmp::Ordering;

    #[test]
    fn snap_short_decimals_lossless() {
        assert_eq!(Frac::snap(0.8), Frac::new(4, 5));
        assert_eq!(Frac::snap(0.3), Frac::new(3, 10));
        assert_eq!(Frac::snap(0.75), Frac::new(3, 4));
        assert_eq!(Frac::snap(0.5), Frac::new(1, 2));
    }

    #[test]
    fn arithmetic_reduces() {
        let a = Frac::new(3, 10).mul(Frac::new(10, 3));
        assert_eq!(a, Frac::one());
        let b = Frac::new(7, 10).mul(Frac::new(1, 4)).add(Frac::new(3, 10).mul(Frac::new(7, 3)));
        // 7/40 + 7/10 = 7/8
        assert_eq!(b, Frac::new(7, 8));
        assert_eq!(b.to_f64(), 0.875);
    }

    #[test]
    fn comparisons() {
        assert!(Frac::new(7, 8).lt_one());
        assert!(Frac::new(9, 8).ge_one());
        assert_eq!(Frac::new(1, 3).cmp_val(Frac::new(2, 6)), Ordering::Equal);
    }
}
