//! Exact money and rate arithmetic.
//!
//! Money is held as a signed count of kopecks. Rates are basis points and
//! shares are parts-per-million, so every quoted percentage in the scheme
//! (15%, 10%, 13%, 21.7%, 5%) is exactly representable. Analytic results
//! that do not land on a basis point (16.6667%, 3/23) are carried as
//! [`Exact`] rationals and only rounded when rendered.
//!
//! Rounding policy: a product is computed as an exact rational and rounded
//! to the nearest kopeck, ties away from zero ("half up" on magnitude). The
//! same rule is used when rendering rationals as percent strings.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num::bigint::Sign;
use num::{BigInt, BigRational, Integer, One, Signed, ToPrimitive, Zero};
use thiserror::Error;

/// Largest magnitude accepted for a money amount, in kopecks (10^16).
pub const MONEY_LIMIT: i64 = 10_000_000_000_000_000;

pub const BP_PER_UNIT: i64 = 10_000;
pub const PPM_PER_UNIT: u32 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MoneyError {
    #[error("money amount out of range")]
    Overflow,
    #[error("fraction {0} ppm exceeds 1,000,000")]
    FractionOutOfRange(u64),
    #[error("cannot parse {what} from {input:?}: {reason}")]
    Parse {
        what: &'static str,
        input: String,
        reason: String,
    },
}

/// Divide and round to nearest, ties away from zero. `den` must be positive.
pub(crate) fn div_round_half_away(num: i128, den: i128) -> i128 {
    debug_assert!(den > 0);
    let q = num / den;
    let r = num % den;
    if 2 * r.abs() >= den {
        q + num.signum()
    } else {
        q
    }
}

/// An amount in kopecks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Money(i64);

impl Money {
    pub const ZERO: Money = Money(0);

    pub fn from_minor(kopecks: i64) -> Result<Money, MoneyError> {
        if kopecks.unsigned_abs() > MONEY_LIMIT as u64 {
            return Err(MoneyError::Overflow);
        }
        Ok(Money(kopecks))
    }

    pub fn from_rubles(rubles: i64) -> Result<Money, MoneyError> {
        rubles
            .checked_mul(100)
            .ok_or(MoneyError::Overflow)
            .and_then(Money::from_minor)
    }

    fn from_wide(v: i128) -> Result<Money, MoneyError> {
        i64::try_from(v)
            .map_err(|_| MoneyError::Overflow)
            .and_then(Money::from_minor)
    }

    pub fn minor(self) -> i64 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn is_positive(self) -> bool {
        self.0 > 0
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }

    pub fn checked_add(self, rhs: Money) -> Result<Money, MoneyError> {
        Money::from_wide(self.0 as i128 + rhs.0 as i128)
    }

    pub fn checked_sub(self, rhs: Money) -> Result<Money, MoneyError> {
        Money::from_wide(self.0 as i128 - rhs.0 as i128)
    }

    pub fn checked_mul_int(self, n: i64) -> Result<Money, MoneyError> {
        Money::from_wide(self.0 as i128 * n as i128)
    }

    /// `self * num / den`, rounded half away from zero. `den` must be positive.
    pub fn mul_ratio(self, num: i64, den: i64) -> Result<Money, MoneyError> {
        assert!(den > 0, "ratio denominator must be positive");
        Money::from_wide(div_round_half_away(
            self.0 as i128 * num as i128,
            den as i128,
        ))
    }

    /// Interest-style product `m * r`.
    pub fn apply_rate(self, rate: Rate) -> Result<Money, MoneyError> {
        self.mul_ratio(rate.bp(), BP_PER_UNIT)
    }

    /// Share-style product `m * f`.
    pub fn apply_fraction(self, f: Fraction) -> Result<Money, MoneyError> {
        self.mul_ratio(f.ppm() as i64, PPM_PER_UNIT as i64)
    }

    /// Exact ratio `self / other`. Panics if `other` is zero.
    pub fn ratio_to(self, other: Money) -> Exact {
        Exact::from_ints(self.0 as i128, other.0 as i128)
    }

    /// Parses a decimal ruble amount with at most two decimals ("575000",
    /// "575000.5", "-12.34").
    pub fn parse_rubles(s: &str) -> Result<Money, MoneyError> {
        let scaled = parse_scaled_decimal(s, 2).map_err(|reason| MoneyError::Parse {
            what: "ruble amount",
            input: s.to_string(),
            reason,
        })?;
        i64::try_from(scaled)
            .map_err(|_| MoneyError::Overflow)
            .and_then(Money::from_minor)
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(f, "{}{}.{:02}", sign, abs / 100, abs % 100)
    }
}

/// Parses `[-]digits[.digits]` into an integer scaled by `10^scale`,
/// rejecting inputs that need more than `scale` decimals.
pub(crate) fn parse_scaled_decimal(s: &str, scale: u32) -> Result<i128, String> {
    let s = s.trim();
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err("empty number".into());
    }
    if !int_part.chars().all(|c| c.is_ascii_digit())
        || !frac_part.chars().all(|c| c.is_ascii_digit())
    {
        return Err("not a decimal number".into());
    }
    let frac_trimmed = frac_part.trim_end_matches('0');
    if frac_trimmed.len() > scale as usize {
        return Err(format!("more than {scale} decimal places"));
    }
    let mut value: i128 = 0;
    for c in int_part.chars() {
        value = value
            .checked_mul(10)
            .and_then(|v| v.checked_add((c as u8 - b'0') as i128))
            .ok_or_else(|| "number too large".to_string())?;
    }
    let mut frac_digits = frac_trimmed.to_string();
    while frac_digits.len() < scale as usize {
        frac_digits.push('0');
    }
    for c in frac_digits.chars() {
        value = value
            .checked_mul(10)
            .and_then(|v| v.checked_add((c as u8 - b'0') as i128))
            .ok_or_else(|| "number too large".to_string())?;
    }
    Ok(if neg { -value } else { value })
}

/// An annual rate or yield in basis points. Lending rates are non-negative;
/// yields may be negative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Rate(i64);

impl Rate {
    pub const ZERO: Rate = Rate(0);

    pub fn from_bp(bp: i64) -> Rate {
        Rate(bp)
    }

    pub fn bp(self) -> i64 {
        self.0
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }

    pub fn to_exact(self) -> Exact {
        Exact::from_ints(self.0 as i128, BP_PER_UNIT as i128)
    }

    /// Parses a percentage such as "15" or "-10.25". The value must land on a
    /// whole basis point.
    pub fn parse_percent(s: &str) -> Result<Rate, MoneyError> {
        let scaled = parse_scaled_decimal(s, 2).map_err(|reason| MoneyError::Parse {
            what: "rate percent (whole basis points)",
            input: s.to_string(),
            reason,
        })?;
        i64::try_from(scaled)
            .map(Rate)
            .map_err(|_| MoneyError::Overflow)
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}%", self.to_exact().percent_string(4))
    }
}

/// A share in `[0, 1]`, in parts per million.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Fraction(u32);

impl Fraction {
    pub const ZERO: Fraction = Fraction(0);
    pub const ONE: Fraction = Fraction(PPM_PER_UNIT);

    pub fn from_ppm(ppm: u32) -> Result<Fraction, MoneyError> {
        if ppm > PPM_PER_UNIT {
            return Err(MoneyError::FractionOutOfRange(ppm as u64));
        }
        Ok(Fraction(ppm))
    }

    /// Convenience for shares quoted in basis points (10% = 1000 bp).
    pub fn from_bp(bp: u32) -> Result<Fraction, MoneyError> {
        let ppm = bp as u64 * 100;
        if ppm > PPM_PER_UNIT as u64 {
            return Err(MoneyError::FractionOutOfRange(ppm));
        }
        Ok(Fraction(ppm as u32))
    }

    pub fn ppm(self) -> u32 {
        self.0
    }

    pub fn complement(self) -> Fraction {
        Fraction(PPM_PER_UNIT - self.0)
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn is_one(self) -> bool {
        self.0 == PPM_PER_UNIT
    }

    pub fn to_exact(self) -> Exact {
        Exact::from_ints(self.0 as i128, PPM_PER_UNIT as i128)
    }

    /// Parses a percentage with at most four decimals ("10", "13.0435").
    pub fn parse_percent(s: &str) -> Result<Fraction, MoneyError> {
        let scaled = parse_scaled_decimal(s, 4).map_err(|reason| MoneyError::Parse {
            what: "percent share",
            input: s.to_string(),
            reason,
        })?;
        if !(0..=PPM_PER_UNIT as i128).contains(&scaled) {
            return Err(MoneyError::FractionOutOfRange(scaled.unsigned_abs() as u64));
        }
        Ok(Fraction(scaled as u32))
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}%", self.to_exact().percent_string(4))
    }
}

/// An exact rational quantity: yields, thresholds and solved rates.
///
/// Values are unitless (0.15 means 15%).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Exact(BigRational);

impl Exact {
    pub fn zero() -> Exact {
        Exact(BigRational::zero())
    }

    pub fn one() -> Exact {
        Exact(BigRational::one())
    }

    /// `num / den`. Panics on a zero denominator.
    pub fn from_ints(num: i128, den: i128) -> Exact {
        Exact(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn from_big(r: BigRational) -> Exact {
        Exact(r)
    }

    pub fn as_big(&self) -> &BigRational {
        &self.0
    }

    /// Numerator and denominator in lowest terms, denominator positive.
    pub fn parts(&self) -> (&BigInt, &BigInt) {
        (self.0.numer(), self.0.denom())
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn abs(&self) -> Exact {
        Exact(self.0.abs())
    }

    pub fn checked_div(&self, rhs: &Exact) -> Option<Exact> {
        if rhs.is_zero() {
            None
        } else {
            Some(Exact(&self.0 / &rhs.0))
        }
    }

    pub fn max(self, other: Exact) -> Exact {
        if self >= other {
            self
        } else {
            other
        }
    }

    /// Rounds `self * 10^scale` to an integer, ties away from zero.
    fn scaled_round(&self, scale: u32) -> BigInt {
        let factor = BigInt::from(10u32).pow(scale);
        let n = self.0.numer() * factor;
        let d = self.0.denom().clone();
        let (q, r) = n.div_rem(&d);
        let twice = r.abs() * 2u32;
        if twice >= d {
            match n.sign() {
                Sign::Minus => q - 1,
                _ => q + 1,
            }
        } else {
            q
        }
    }

    fn fixed_string(&self, scale: u32, decimals: u32) -> String {
        let v = self.scaled_round(scale + decimals);
        let neg = v.is_negative();
        let digits = v.abs().to_string();
        let d = decimals as usize;
        let padded = if digits.len() <= d {
            format!("{}{}", "0".repeat(d + 1 - digits.len()), digits)
        } else {
            digits
        };
        let (int_part, frac_part) = padded.split_at(padded.len() - d);
        let sign = if neg { "-" } else { "" };
        if d == 0 {
            format!("{sign}{int_part}")
        } else {
            format!("{sign}{int_part}.{frac_part}")
        }
    }

    /// Value as a percentage with a fixed number of decimals ("16.6667").
    pub fn percent_string(&self, decimals: u32) -> String {
        self.fixed_string(2, decimals)
    }

    /// Value in basis points with a fixed number of decimals ("1666.67").
    pub fn bp_string(&self, decimals: u32) -> String {
        self.fixed_string(4, decimals)
    }

    /// Nearest whole basis point, ties away from zero.
    pub fn round_to_rate(&self) -> Rate {
        Rate(self.scaled_round(4).to_i64().expect("rate out of range"))
    }

    /// Value in basis points rounded to 0.01 bp, as a float for reporting.
    pub fn to_bp_f64(&self) -> f64 {
        let hundredths = self.scaled_round(6);
        hundredths.to_f64().unwrap_or(f64::NAN) / 100.0
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// Parses either a percentage with at most `decimals` places ("13.0435")
    /// or an exact ratio of unity written `num/den` ("3/23").
    pub fn parse_percent_or_ratio(s: &str, decimals: u32) -> Result<Exact, MoneyError> {
        let err = |reason: String| MoneyError::Parse {
            what: "percent or ratio",
            input: s.to_string(),
            reason,
        };
        if let Some((n, d)) = s.trim().split_once('/') {
            let n: i128 = n.trim().parse().map_err(|e| err(format!("{e}")))?;
            let d: i128 = d.trim().parse().map_err(|e| err(format!("{e}")))?;
            if d <= 0 {
                return Err(err("denominator must be positive".into()));
            }
            return Ok(Exact::from_ints(n, d));
        }
        let scaled = parse_scaled_decimal(s, decimals).map_err(err)?;
        Ok(Exact::from_ints(scaled, 100 * 10i128.pow(decimals)))
    }
}

impl From<Rate> for Exact {
    fn from(r: Rate) -> Exact {
        r.to_exact()
    }
}

impl From<Fraction> for Exact {
    fn from(f: Fraction) -> Exact {
        f.to_exact()
    }
}

impl fmt::Display for Exact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}%", self.percent_string(4))
    }
}

impl PartialEq<Rate> for Exact {
    fn eq(&self, other: &Rate) -> bool {
        *self == other.to_exact()
    }
}

impl PartialOrd<Rate> for Exact {
    fn partial_cmp(&self, other: &Rate) -> Option<Ordering> {
        self.partial_cmp(&other.to_exact())
    }
}

macro_rules! forward_binop {
    ($tr:ident, $method:ident) => {
        impl $tr<Exact> for Exact {
            type Output = Exact;
            fn $method(self, rhs: Exact) -> Exact {
                Exact(self.0.$method(rhs.0))
            }
        }
        impl<'a> $tr<&'a Exact> for &'a Exact {
            type Output = Exact;
            fn $method(self, rhs: &'a Exact) -> Exact {
                Exact((&self.0).$method(&rhs.0))
            }
        }
        impl<'a> $tr<&'a Exact> for Exact {
            type Output = Exact;
            fn $method(self, rhs: &'a Exact) -> Exact {
                Exact(self.0.$method(&rhs.0))
            }
        }
    };
}

forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);
forward_binop!(Div, div);

impl Neg for Exact {
    type Output = Exact;
    fn neg(self) -> Exact {
        Exact(-self.0)
    }
}

impl Neg for &Exact {
    type Output = Exact;
    fn neg(self) -> Exact {
        Exact(-&self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kop(v: i64) -> Money {
        Money::from_minor(v).unwrap()
    }

    #[test]
    fn apply_rate_examples() {
        assert_eq!(kop(50_000_000).apply_rate(Rate::from_bp(1500)).unwrap(), kop(7_500_000));
        assert_eq!(kop(123_456).apply_rate(Rate::ZERO).unwrap(), Money::ZERO);
        // 33.5 kopecks rounds up
        assert_eq!(kop(335).apply_rate(Rate::from_bp(1000)).unwrap(), kop(34));
    }

    #[test]
    fn apply_rate_sign_is_symmetric() {
        assert_eq!(kop(-335).apply_rate(Rate::from_bp(1000)).unwrap(), kop(-34));
        assert_eq!(kop(335).apply_rate(Rate::from_bp(-1000)).unwrap(), kop(-34));
        assert_eq!(kop(-335).apply_rate(Rate::from_bp(-1000)).unwrap(), kop(34));
    }

    #[test]
    fn apply_fraction_examples() {
        let ten = Fraction::from_ppm(100_000).unwrap();
        assert_eq!(kop(50_000_000).apply_fraction(ten).unwrap(), kop(5_000_000));
        assert_eq!(kop(987_654).apply_fraction(Fraction::ONE).unwrap(), kop(987_654));
        assert_eq!(kop(333).apply_fraction(ten).unwrap(), kop(33));
    }

    #[test]
    fn overflow_is_reported() {
        assert_eq!(Money::from_minor(MONEY_LIMIT + 1), Err(MoneyError::Overflow));
        let big = kop(MONEY_LIMIT);
        assert_eq!(big.checked_add(kop(1)), Err(MoneyError::Overflow));
        assert_eq!(big.apply_rate(Rate::from_bp(20_000)), Err(MoneyError::Overflow));
        // ±10^15 kopecks must be comfortably representable
        let q = kop(1_000_000_000_000_000);
        assert!(q.apply_rate(Rate::from_bp(1500)).is_ok());
        assert!(kop(-1_000_000_000_000_000).checked_sub(q).is_ok());
    }

    #[test]
    fn fraction_range() {
        assert!(Fraction::from_ppm(1_000_001).is_err());
        assert_eq!(Fraction::from_bp(1000).unwrap().ppm(), 100_000);
        assert!(Fraction::from_bp(10_001).is_err());
    }

    #[test]
    fn rendering() {
        assert_eq!(kop(57_500_000).to_string(), "575000.00");
        assert_eq!(kop(-5).to_string(), "-0.05");
        assert_eq!(Rate::from_bp(1500).to_string(), "15.0000%");
        assert_eq!(Exact::from_ints(1, 6).percent_string(4), "16.6667");
        assert_eq!(Exact::from_ints(-1, 10).percent_string(4), "-10.0000");
        assert_eq!(Exact::from_ints(3, 23).percent_string(4), "13.0435");
        assert_eq!(Exact::from_ints(5, 23).percent_string(4), "21.7391");
        assert_eq!(Exact::from_ints(-1, 200_000_000).percent_string(4), "0.0000");
        assert_eq!(Exact::from_ints(1, 6).bp_string(2), "1666.67");
        assert_eq!(Exact::from_ints(1, 6).to_bp_f64(), 1666.67);
    }

    #[test]
    fn parsing() {
        assert_eq!(Money::parse_rubles("575000").unwrap(), kop(57_500_000));
        assert_eq!(Money::parse_rubles("12.5").unwrap(), kop(1250));
        assert!(Money::parse_rubles("1.005").is_err());
        assert!(Money::parse_rubles("abc").is_err());
        assert_eq!(Rate::parse_percent("15.0000").unwrap(), Rate::from_bp(1500));
        assert!(Rate::parse_percent("15.005").is_err());
        assert_eq!(Fraction::parse_percent("13.0435").unwrap().ppm(), 130_435);
        assert!(Fraction::parse_percent("13.04351").is_err());
        assert!(Fraction::parse_percent("100.0001").is_err());
        assert_eq!(
            Exact::parse_percent_or_ratio("3/23", 4).unwrap(),
            Exact::from_ints(3, 23)
        );
        assert_eq!(
            Exact::parse_percent_or_ratio("-10", 4).unwrap(),
            Exact::from_ints(-1, 10)
        );
    }

    #[test]
    fn rounding_helper() {
        assert_eq!(div_round_half_away(5, 2), 3);
        assert_eq!(div_round_half_away(-5, 2), -3);
        assert_eq!(div_round_half_away(4, 3), 1);
        assert_eq!(div_round_half_away(-4, 3), -1);
    }
}
