//! Closed-form portfolio calculus.
//!
//! A portfolio lent at rate `K` that never recovers a share `X` of what it
//! is owed yields `E = (1 - X)(1 + K) - 1`. Setting `E = 0` gives the
//! break-even share `K / (1 + K)`; setting `E = -PP` gives the critical
//! share `(K + PP) / (1 + K)` at which losses exactly exhaust the
//! guarantee. All arithmetic is exact.

use thiserror::Error;

use crate::money::{Exact, Fraction, Rate};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalyticsError {
    #[error("default share must lie in [0, 1], got {0}")]
    ShareOutOfRange(Exact),
    #[error("rate must be non-negative, got {0}")]
    NegativeRate(Exact),
    #[error("guarantee fraction must lie in [0, 1), got {0}")]
    GuaranteeOutOfRange(Exact),
    #[error("forecast default of 100% admits no rate")]
    CertainDefault,
    #[error("target is infeasible: it requires a negative rate ({0})")]
    Infeasible(Exact),
    #[error("rate floor {floor} exceeds base rate {base}")]
    FloorAboveBase { floor: Box<Exact>, base: Box<Exact> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PortfolioParams {
    pub rate: Rate,
    pub guarantee_fraction: Fraction,
    pub default_share: Fraction,
}

impl PortfolioParams {
    pub fn yield_at_share(&self) -> Result<Exact, AnalyticsError> {
        portfolio_yield(&self.default_share.to_exact(), &self.rate.to_exact())
    }

    pub fn break_even(&self) -> Result<Exact, AnalyticsError> {
        break_even_default(&self.rate.to_exact())
    }

    pub fn critical(&self) -> Result<Exact, AnalyticsError> {
        critical_default(&self.rate.to_exact(), &self.guarantee_fraction.to_exact())
    }
}

fn check_share(x: &Exact) -> Result<(), AnalyticsError> {
    if x.is_negative() || *x > Exact::one() {
        return Err(AnalyticsError::ShareOutOfRange(x.clone()));
    }
    Ok(())
}

fn check_rate(k: &Exact) -> Result<(), AnalyticsError> {
    if k.is_negative() {
        return Err(AnalyticsError::NegativeRate(k.clone()));
    }
    Ok(())
}

fn check_guarantee(pp: &Exact) -> Result<(), AnalyticsError> {
    if pp.is_negative() || *pp >= Exact::one() {
        return Err(AnalyticsError::GuaranteeOutOfRange(pp.clone()));
    }
    Ok(())
}

/// `(1 - X)(1 + K) - 1`.
pub fn portfolio_yield(default_share: &Exact, rate: &Exact) -> Result<Exact, AnalyticsError> {
    check_share(default_share)?;
    let one = Exact::one();
    Ok((&one - default_share) * (&one + rate) - one)
}

/// Default share at which the portfolio yield is exactly zero.
pub fn break_even_default(rate: &Exact) -> Result<Exact, AnalyticsError> {
    check_rate(rate)?;
    Ok(rate / &(Exact::one() + rate))
}

/// Default share at which the portfolio yield equals `-PP`.
pub fn critical_default(rate: &Exact, guarantee: &Exact) -> Result<Exact, AnalyticsError> {
    check_rate(rate)?;
    check_guarantee(guarantee)?;
    Ok((rate + guarantee) / (Exact::one() + rate))
}

/// Rate that makes `portfolio_yield(forecast, rate) == target`, with no sign
/// restriction on the result.
fn rate_for_yield(forecast_default: &Exact, target_yield: &Exact) -> Result<Exact, AnalyticsError> {
    check_share(forecast_default)?;
    let headroom = Exact::one() - forecast_default;
    (target_yield + forecast_default)
        .checked_div(&headroom)
        .ok_or(AnalyticsError::CertainDefault)
}

/// Inverse of [`portfolio_yield`] in the rate.
pub fn solve_rate(forecast_default: &Exact, target_yield: &Exact) -> Result<Exact, AnalyticsError> {
    let k = rate_for_yield(forecast_default, target_yield)?;
    if k.is_negative() {
        return Err(AnalyticsError::Infeasible(k));
    }
    Ok(k)
}

/// Discounted rate schedule for a priority sector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SectorTier {
    pub sector: String,
    pub rate_discount: Rate,
    /// Required gap between the forecast default share and the critical
    /// share of the discounted book.
    pub safety_margin: Fraction,
}

/// Discounted rate for `tier`, clamped from below so that the tier's
/// critical default share still covers `forecast + margin`, and never
/// negative.
pub fn tier_rate(
    base: Rate,
    tier: &SectorTier,
    guarantee: Fraction,
    forecast_default: &Exact,
) -> Result<Exact, AnalyticsError> {
    let base = base.to_exact();
    check_rate(&base)?;
    let pp = guarantee.to_exact();
    check_guarantee(&pp)?;
    let required = forecast_default + &tier.safety_margin.to_exact();
    if required >= Exact::one() {
        return Err(AnalyticsError::CertainDefault);
    }
    let floor = rate_for_yield(&required, &-pp)?;
    if floor > base {
        return Err(AnalyticsError::FloorAboveBase {
            floor: Box::new(floor),
            base: Box::new(base),
        });
    }
    let discounted = &base - &tier.rate_discount.to_exact();
    Ok(discounted.max(floor).max(Exact::zero()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pct(n: i128) -> Exact {
        Exact::from_ints(n, 100)
    }

    #[test]
    fn yield_examples() {
        let k = pct(15);
        assert_eq!(portfolio_yield(&Exact::from_ints(3, 23), &k).unwrap(), Exact::zero());
        // 0.87 * 1.15 - 1 = 0.0005
        assert_eq!(portfolio_yield(&pct(13), &k).unwrap(), Exact::from_ints(5, 10_000));
        assert_eq!(portfolio_yield(&Exact::zero(), &k).unwrap(), k);
        // 0.783 * 1.15 - 1 = -0.09955
        let e = portfolio_yield(&Exact::from_ints(217, 1000), &k).unwrap();
        assert_eq!(e, Exact::from_ints(-9955, 100_000));
        assert!(portfolio_yield(&pct(101), &k).is_err());
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(break_even_default(&pct(15)).unwrap(), Exact::from_ints(3, 23));
        assert_eq!(break_even_default(&Exact::zero()).unwrap(), Exact::zero());
        assert_eq!(break_even_default(&pct(10)).unwrap().percent_string(4), "9.0909");
        assert_eq!(critical_default(&pct(15), &pct(10)).unwrap(), Exact::from_ints(5, 23));
        assert_eq!(
            critical_default(&pct(15), &Exact::zero()).unwrap(),
            break_even_default(&pct(15)).unwrap()
        );
        assert_eq!(critical_default(&pct(10), &pct(10)).unwrap().percent_string(4), "18.1818");
        assert!(critical_default(&pct(10), &Exact::one()).is_err());
        assert!(break_even_default(&pct(-1)).is_err());
    }

    #[test]
    fn solve_examples() {
        assert_eq!(solve_rate(&Exact::from_ints(3, 23), &Exact::zero()).unwrap(), pct(15));
        assert_eq!(solve_rate(&Exact::zero(), &Exact::zero()).unwrap(), Exact::zero());
        assert_eq!(solve_rate(&Exact::from_ints(5, 23), &pct(-10)).unwrap(), pct(15));
        // displayed-precision inputs land on 15.0000%
        let k = solve_rate(&Exact::from_ints(217_391, 1_000_000), &pct(-10)).unwrap();
        assert_eq!(k.percent_string(4), "15.0000");
        assert_eq!(solve_rate(&Exact::one(), &Exact::zero()), Err(AnalyticsError::CertainDefault));
        assert!(matches!(
            solve_rate(&Exact::zero(), &pct(-10)),
            Err(AnalyticsError::Infeasible(_))
        ));
    }

    #[test]
    fn tier_examples() {
        let tier = |discount_bp, margin_ppm| SectorTier {
            sector: "agro".into(),
            rate_discount: Rate::from_bp(discount_bp),
            safety_margin: Fraction::from_ppm(margin_ppm).unwrap(),
        };
        let pp = Fraction::from_bp(1000).unwrap();
        let base = Rate::from_bp(1500);
        assert_eq!(tier_rate(base, &tier(500, 0), pp, &pct(5)).unwrap(), pct(10));
        assert_eq!(tier_rate(base, &tier(0, 0), pp, &pct(5)).unwrap(), pct(15));

        // discount past zero: floor (-5.26%) is negative so the result is 0
        assert_eq!(tier_rate(base, &tier(2000, 0), pp, &pct(5)).unwrap(), Exact::zero());

        // forecast 20% with 0 margin: floor = (0.2 - 0.1)/0.8 = 12.5%
        assert_eq!(tier_rate(base, &tier(2000, 0), pp, &pct(20)).unwrap(), Exact::from_ints(1, 8));

        // floor above base is an error
        assert!(matches!(
            tier_rate(base, &tier(0, 100_000), pp, &pct(20)),
            Err(AnalyticsError::FloorAboveBase { .. })
        ));
    }
}
