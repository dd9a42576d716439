//! Single-loan calculus for a one-year bullet loan whose principal is
//! partly guaranteed by municipal notes.
//!
//! Every outcome is viewed from three seats: the lending fund, the
//! municipality that pledged notes, and the two consolidated. Yields are
//! computed from the realized cash amounts so that the perspective identity
//! `consolidated * principal = (fund_cash_in - guarantee_draw) - principal`
//! holds to the kopeck.

use std::fmt;

use thiserror::Error;

use crate::money::{Exact, Fraction, Money, MoneyError, Rate};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DealError {
    #[error("invalid loan terms: {0}")]
    InvalidTerms(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("guarantee fraction of 100% leaves no net exposure")]
    FullGuarantee,
    #[error(transparent)]
    Money(#[from] MoneyError),
}

/// Collateral multiple in thousandths (1.5 = 1500).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CollateralCoefficient(u32);

impl CollateralCoefficient {
    pub const ONE: CollateralCoefficient = CollateralCoefficient(1000);
    /// Typical market range for secured small-business loans (1.5 to 1.6).
    pub const MARKET_LOW: CollateralCoefficient = CollateralCoefficient(1500);
    pub const MARKET_HIGH: CollateralCoefficient = CollateralCoefficient(1600);

    pub fn from_milli(milli: u32) -> CollateralCoefficient {
        CollateralCoefficient(milli)
    }

    pub fn milli(self) -> u32 {
        self.0
    }

    pub fn parse(s: &str) -> Result<CollateralCoefficient, MoneyError> {
        let scaled = crate::money::parse_scaled_decimal(s, 3).map_err(|reason| MoneyError::Parse {
            what: "collateral coefficient",
            input: s.to_string(),
            reason,
        })?;
        u32::try_from(scaled)
            .map(CollateralCoefficient)
            .map_err(|_| MoneyError::Parse {
                what: "collateral coefficient",
                input: s.to_string(),
                reason: "must be a non-negative number".into(),
            })
    }
}

impl fmt::Display for CollateralCoefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:03}", self.0 / 1000, self.0 % 1000)
    }
}

/// What the collateral coefficient multiplies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CollateralBasis {
    /// Unguaranteed principal only (market practice quote).
    PrincipalNet,
    /// Unguaranteed principal plus the year's interest (the scheme's rule).
    PrincipalNetPlusInterest,
}

impl CollateralBasis {
    pub fn as_str(self) -> &'static str {
        match self {
            CollateralBasis::PrincipalNet => "principal_net",
            CollateralBasis::PrincipalNetPlusInterest => "principal_net_plus_interest",
        }
    }

    pub fn parse(s: &str) -> Option<CollateralBasis> {
        match s.trim() {
            "principal_net" => Some(CollateralBasis::PrincipalNet),
            "principal_net_plus_interest" => Some(CollateralBasis::PrincipalNetPlusInterest),
            _ => None,
        }
    }
}

/// Terms of one loan. The term is always one year with a single bullet
/// repayment of principal plus simple interest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoanTerms {
    pub principal: Money,
    pub annual_rate: Rate,
    pub guarantee_fraction: Fraction,
    pub collateral_coefficient: CollateralCoefficient,
    pub collateral_basis: CollateralBasis,
    pub sector: String,
}

impl LoanTerms {
    /// Terms with the scheme defaults: coefficient 1 on principal net of
    /// the guarantee plus interest, sector "general".
    pub fn new(principal: Money, annual_rate: Rate, guarantee_fraction: Fraction) -> Result<LoanTerms, DealError> {
        let terms = LoanTerms {
            principal,
            annual_rate,
            guarantee_fraction,
            collateral_coefficient: CollateralCoefficient::ONE,
            collateral_basis: CollateralBasis::PrincipalNetPlusInterest,
            sector: "general".to_string(),
        };
        terms.validate()?;
        Ok(terms)
    }

    pub fn with_collateral(mut self, coefficient: CollateralCoefficient, basis: CollateralBasis) -> LoanTerms {
        self.collateral_coefficient = coefficient;
        self.collateral_basis = basis;
        self
    }

    pub fn with_sector(mut self, sector: impl Into<String>) -> LoanTerms {
        self.sector = sector.into();
        self
    }

    pub fn validate(&self) -> Result<(), DealError> {
        if !self.principal.is_positive() {
            return Err(DealError::InvalidTerms("principal must be positive".into()));
        }
        if self.annual_rate.is_negative() {
            return Err(DealError::InvalidTerms("annual rate must be non-negative".into()));
        }
        if self.guarantee_fraction.is_one() {
            return Err(DealError::InvalidTerms("guarantee fraction must be below 100%".into()));
        }
        Ok(())
    }

    /// Principal not covered by the municipal guarantee.
    pub fn net_principal(&self) -> Result<Money, DealError> {
        Ok(self.principal.checked_sub(guarantee_face(self)?)?)
    }

    /// Claim the borrower secures personally: net principal plus interest.
    pub fn secured_claim(&self) -> Result<Money, DealError> {
        Ok(self.net_principal()?.checked_add(interest_due(self)?)?)
    }
}

pub fn interest_due(t: &LoanTerms) -> Result<Money, DealError> {
    Ok(t.principal.apply_rate(t.annual_rate)?)
}

pub fn total_repayment(t: &LoanTerms) -> Result<Money, DealError> {
    Ok(t.principal.checked_add(interest_due(t)?)?)
}

/// Face value of the notes the municipality pledges. Covers principal only.
pub fn guarantee_face(t: &LoanTerms) -> Result<Money, DealError> {
    Ok(t.principal.apply_fraction(t.guarantee_fraction)?)
}

pub fn required_collateral(t: &LoanTerms) -> Result<Money, DealError> {
    let basis = match t.collateral_basis {
        CollateralBasis::PrincipalNet => t.net_principal()?,
        CollateralBasis::PrincipalNetPlusInterest => t.secured_claim()?,
    };
    Ok(basis.mul_ratio(t.collateral_coefficient.milli() as i64, 1000)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioKind {
    FullRepayment,
    Default,
}

impl ScenarioKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::FullRepayment => "full_repayment",
            ScenarioKind::Default => "default",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DealScenario {
    FullRepayment,
    Default {
        collateral_value: Money,
        /// Share of the secured claim actually realized from the collateral.
        recovery_fraction: Fraction,
    },
}

impl DealScenario {
    /// Default with the collateral realized in full.
    pub fn default_with_collateral(collateral_value: Money) -> DealScenario {
        DealScenario::Default {
            collateral_value,
            recovery_fraction: Fraction::ONE,
        }
    }

    pub fn kind(&self) -> ScenarioKind {
        match self {
            DealScenario::FullRepayment => ScenarioKind::FullRepayment,
            DealScenario::Default { .. } => ScenarioKind::Default,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DealOutcome {
    pub kind: ScenarioKind,
    pub principal: Money,
    pub interest: Money,
    /// Cash realized from collateral (zero on repayment).
    pub recovered: Money,
    pub fund_cash_in: Money,
    /// `(fund_cash_in - principal) / principal`.
    pub fund_yield: Exact,
    pub municipal_guarantee_draw: Money,
    /// Municipal result on principal; negative is a loss.
    pub municipal_result: Exact,
    /// Interest over the net budget exposure `principal * (1 - PP)`;
    /// repayment only.
    pub municipal_roi_net: Option<Exact>,
    /// Fund and municipality combined, on principal.
    pub consolidated_yield: Exact,
}

pub fn evaluate_outcome(t: &LoanTerms, s: &DealScenario) -> Result<DealOutcome, DealError> {
    t.validate()?;
    let principal = t.principal;
    let interest = interest_due(t)?;
    match *s {
        DealScenario::FullRepayment => {
            let cash_in = total_repayment(t)?;
            let net = t.net_principal()?;
            let earned = cash_in.checked_sub(principal)?;
            Ok(DealOutcome {
                kind: ScenarioKind::FullRepayment,
                principal,
                interest,
                recovered: Money::ZERO,
                fund_cash_in: cash_in,
                fund_yield: earned.ratio_to(principal),
                municipal_guarantee_draw: Money::ZERO,
                municipal_result: Exact::zero(),
                municipal_roi_net: Some(interest.ratio_to(net)),
                consolidated_yield: earned.ratio_to(principal),
            })
        }
        DealScenario::Default {
            collateral_value,
            recovery_fraction,
        } => {
            if collateral_value.is_negative() {
                return Err(DealError::InvalidScenario("collateral value must be non-negative".into()));
            }
            let claim = t.secured_claim()?;
            let recovered = collateral_value.min(claim).apply_fraction(recovery_fraction)?;
            let draw = guarantee_face(t)?;
            let cash_in = recovered.checked_add(draw)?;
            Ok(DealOutcome {
                kind: ScenarioKind::Default,
                principal,
                interest,
                recovered,
                fund_cash_in: cash_in,
                fund_yield: cash_in.checked_sub(principal)?.ratio_to(principal),
                municipal_guarantee_draw: draw,
                municipal_result: -draw.ratio_to(principal),
                municipal_roi_net: None,
                consolidated_yield: recovered.checked_sub(principal)?.ratio_to(principal),
            })
        }
    }
}

/// Lowest consolidated yield when the collateral covers the secured claim
/// and is realized in full.
pub fn consolidated_floor(t: &LoanTerms) -> Result<Exact, DealError> {
    Ok(t.secured_claim()?.checked_sub(t.principal)?.ratio_to(t.principal))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct YieldRange {
    pub low: Exact,
    pub high: Exact,
}

/// Yield ranges under the two accounting conventions. They are never
/// blended into one number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct YieldBounds {
    /// Loss capped at the guarantee share on gross principal, up to the
    /// municipal return on net exposure `K / (1 - PP)`.
    pub paper: YieldRange,
    /// Same loss cap, up to the fund's return on principal `K`.
    pub fund: YieldRange,
}

pub fn yield_bounds(rate: Rate, guarantee: Fraction) -> Result<YieldBounds, DealError> {
    if guarantee.is_one() {
        return Err(DealError::FullGuarantee);
    }
    let k = rate.to_exact();
    let pp = guarantee.to_exact();
    let low = -&pp;
    let high = &k / &(Exact::one() - &pp);
    Ok(YieldBounds {
        paper: YieldRange { low: low.clone(), high },
        fund: YieldRange { low, high: k },
    })
}

pub fn deal_yield_bounds(t: &LoanTerms) -> Result<YieldBounds, DealError> {
    yield_bounds(t.annual_rate, t.guarantee_fraction)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rub(v: i64) -> Money {
        Money::from_rubles(v).unwrap()
    }

    fn pct(v: i64) -> Rate {
        Rate::from_bp(v * 100)
    }

    fn share(v: u32) -> Fraction {
        Fraction::from_bp(v * 100).unwrap()
    }

    fn paper_terms() -> LoanTerms {
        LoanTerms::new(rub(500_000), pct(15), share(10)).unwrap()
    }

    #[test]
    fn repayment_figures() {
        let t = paper_terms();
        assert_eq!(interest_due(&t).unwrap(), rub(75_000));
        assert_eq!(total_repayment(&t).unwrap(), rub(575_000));
        assert_eq!(guarantee_face(&t).unwrap(), rub(50_000));

        let zero = LoanTerms::new(rub(500_000), Rate::ZERO, share(10)).unwrap();
        assert_eq!(interest_due(&zero).unwrap(), Money::ZERO);
        assert_eq!(total_repayment(&zero).unwrap(), rub(500_000));

        let ten = LoanTerms::new(rub(500_000), pct(10), share(10)).unwrap();
        assert_eq!(interest_due(&ten).unwrap(), rub(50_000));
        assert_eq!(total_repayment(&ten).unwrap(), rub(550_000));
    }

    #[test]
    fn guarantee_face_examples() {
        let none = LoanTerms::new(rub(500_000), pct(15), Fraction::ZERO).unwrap();
        assert_eq!(guarantee_face(&none).unwrap(), Money::ZERO);
        let big = LoanTerms::new(rub(1_000_000), pct(15), share(10)).unwrap();
        assert_eq!(guarantee_face(&big).unwrap(), rub(100_000));
    }

    #[test]
    fn collateral_examples() {
        let t = paper_terms();
        assert_eq!(required_collateral(&t).unwrap(), rub(525_000));
        let market = |milli| {
            required_collateral(
                &paper_terms().with_collateral(CollateralCoefficient::from_milli(milli), CollateralBasis::PrincipalNet),
            )
            .unwrap()
        };
        assert_eq!(market(1500), rub(675_000));
        assert_eq!(market(1600), rub(720_000));
        assert_eq!(market(0), Money::ZERO);
    }

    #[test]
    fn repayment_outcome() {
        let o = evaluate_outcome(&paper_terms(), &DealScenario::FullRepayment).unwrap();
        assert_eq!(o.fund_cash_in, rub(575_000));
        assert_eq!(o.fund_yield, pct(15).to_exact());
        assert_eq!(o.municipal_guarantee_draw, Money::ZERO);
        assert_eq!(o.municipal_result, Exact::zero());
        assert_eq!(o.municipal_roi_net, Some(Exact::from_ints(1, 6)));
        assert_eq!(o.municipal_roi_net.unwrap().percent_string(4), "16.6667");
        assert_eq!(o.consolidated_yield, pct(15).to_exact());
    }

    #[test]
    fn default_outcome_full_cover() {
        let s = DealScenario::default_with_collateral(rub(525_000));
        let o = evaluate_outcome(&paper_terms(), &s).unwrap();
        assert_eq!(o.recovered, rub(525_000));
        assert_eq!(o.consolidated_yield, Exact::from_ints(5, 100));
        assert_eq!(o.municipal_result, Exact::from_ints(-1, 10));
        assert_eq!(o.municipal_guarantee_draw, rub(50_000));
        assert_eq!(o.fund_cash_in, rub(575_000));
        assert_eq!(consolidated_floor(&paper_terms()).unwrap(), Exact::from_ints(1, 20));
    }

    #[test]
    fn zero_risk_at_ten_percent() {
        let t = LoanTerms::new(rub(500_000), pct(10), share(10)).unwrap();
        let collateral = required_collateral(&t).unwrap();
        assert_eq!(collateral, rub(500_000));
        let o = evaluate_outcome(&t, &DealScenario::default_with_collateral(collateral)).unwrap();
        assert_eq!(o.consolidated_yield, Exact::zero());
    }

    #[test]
    fn default_total_loss() {
        let s = DealScenario::Default {
            collateral_value: rub(525_000),
            recovery_fraction: Fraction::ZERO,
        };
        let o = evaluate_outcome(&paper_terms(), &s).unwrap();
        assert_eq!(o.recovered, Money::ZERO);
        assert_eq!(o.consolidated_yield, Exact::from_ints(-1, 1));
        assert_eq!(o.fund_cash_in, rub(50_000));
    }

    #[test]
    fn collateral_above_claim_is_capped() {
        let s = DealScenario::default_with_collateral(rub(900_000));
        let o = evaluate_outcome(&paper_terms(), &s).unwrap();
        assert_eq!(o.recovered, rub(525_000));
    }

    #[test]
    fn invalid_inputs() {
        assert!(LoanTerms::new(Money::ZERO, pct(15), share(10)).is_err());
        assert!(LoanTerms::new(rub(1), Rate::from_bp(-1), share(10)).is_err());
        assert!(LoanTerms::new(rub(1), pct(15), Fraction::ONE).is_err());
        let s = DealScenario::default_with_collateral(Money::from_minor(-1).unwrap());
        assert!(matches!(evaluate_outcome(&paper_terms(), &s), Err(DealError::InvalidScenario(_))));
    }

    #[test]
    fn bounds_examples() {
        let b = yield_bounds(pct(15), share(10)).unwrap();
        assert_eq!(b.paper.low, Exact::from_ints(-1, 10));
        assert_eq!(b.paper.high, Exact::from_ints(1, 6));
        assert_eq!(b.fund.high, pct(15).to_exact());
        let z = yield_bounds(Rate::ZERO, Fraction::ZERO).unwrap();
        assert!(z.paper.low.is_zero() && z.paper.high.is_zero());
        let t = yield_bounds(pct(10), share(10)).unwrap();
        assert_eq!(t.paper.high, Exact::from_ints(1, 9));
        assert_eq!(t.paper.high.percent_string(4), "11.1111");
        assert_eq!(yield_bounds(pct(10), Fraction::ONE), Err(DealError::FullGuarantee));
    }
}
