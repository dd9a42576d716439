//! Risk analytics for a municipal microloan fund whose loans are partly
//! guaranteed by municipal promissory notes.
//!
//! * [`money`]: exact money, rates, shares and rationals.
//! * [`deal`]: one loan, repaid or defaulted, seen by fund, municipality
//!   and both together.
//! * [`analytics`]: break-even and critical default shares, rate solving,
//!   sector tiers.
//! * [`ledger`]: event-sourced note registry and fund account.
//! * [`sim`]: seeded Monte Carlo check of the closed forms.
//! * [`config`], [`loanbook`]: scenario files and loan-book CSV.

pub mod analytics;
pub mod config;
pub mod deal;
pub mod ledger;
pub mod loanbook;
pub mod money;
pub mod sim;

pub use money::{Exact, Fraction, Money, MoneyError, Rate};
