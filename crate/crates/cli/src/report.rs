//! Text and JSON renderings. Text uses the library's fixed-point rendering
//! (rubles to the kopeck, percent to four decimals); JSON uses integer
//! kopecks and basis points rounded to 0.01 bp, keys in declaration order.

use std::fmt::Write;

use munifund_core::analytics::{break_even_default, critical_default, portfolio_yield, AnalyticsError};
use munifund_core::config::ScenarioConfig;
use munifund_core::deal::{
    deal_yield_bounds, evaluate_outcome, guarantee_face, interest_due, required_collateral, total_repayment,
    CollateralBasis, CollateralCoefficient, DealError, DealOutcome, DealScenario, YieldBounds,
};
use munifund_core::ledger::LedgerState;
use munifund_core::sim::SimReport;
use munifund_core::{Exact, Money};
use serde::Serialize;

fn pct(e: &Exact) -> String {
    format!("{}%", e.percent_string(4))
}

fn line(out: &mut String, label: &str, value: impl std::fmt::Display) {
    writeln!(out, "  {label:<28}{value}").unwrap();
}

pub struct DealReport {
    pub cfg: ScenarioConfig,
    pub interest: Money,
    pub total: Money,
    pub guarantee: Money,
    pub collateral: Money,
    pub market_low: Money,
    pub market_high: Money,
    pub repaid: DealOutcome,
    pub defaulted: DealOutcome,
    pub default_scenario: DealScenario,
    pub bounds: YieldBounds,
}

impl DealReport {
    pub fn build(cfg: &ScenarioConfig) -> Result<DealReport, DealError> {
        let t = &cfg.terms;
        let market = |c| required_collateral(&t.clone().with_collateral(c, CollateralBasis::PrincipalNet));
        let default_scenario = cfg.default_scenario();
        Ok(DealReport {
            cfg: cfg.clone(),
            interest: interest_due(t)?,
            total: total_repayment(t)?,
            guarantee: guarantee_face(t)?,
            collateral: required_collateral(t)?,
            market_low: market(CollateralCoefficient::MARKET_LOW)?,
            market_high: market(CollateralCoefficient::MARKET_HIGH)?,
            repaid: evaluate_outcome(t, &DealScenario::FullRepayment)?,
            defaulted: evaluate_outcome(t, &default_scenario)?,
            default_scenario,
            bounds: deal_yield_bounds(t)?,
        })
    }

    pub fn text(&self) -> String {
        let t = &self.cfg.terms;
        let mut out = String::new();
        out.push_str("Loan terms\n");
        line(&mut out, "principal", t.principal);
        line(&mut out, "annual rate", t.annual_rate);
        line(&mut out, "guarantee fraction", t.guarantee_fraction);
        line(&mut out, "collateral coefficient", format!("{} ({})", t.collateral_coefficient, t.collateral_basis.as_str()));
        line(&mut out, "sector", &t.sector);
        out.push_str("Repayment\n");
        line(&mut out, "interest due", self.interest);
        line(&mut out, "total repayment", self.total);
        line(&mut out, "guarantee face (notes)", self.guarantee);
        line(&mut out, "required collateral", self.collateral);
        line(
            &mut out,
            "market collateral",
            format!(
                "{} .. {} (x{} .. x{} on net principal)",
                self.market_low,
                self.market_high,
                CollateralCoefficient::MARKET_LOW,
                CollateralCoefficient::MARKET_HIGH
            ),
        );
        out.push_str("Full repayment\n");
        outcome_lines(&mut out, &self.repaid);
        if let DealScenario::Default {
            collateral_value,
            recovery_fraction,
        } = self.default_scenario
        {
            writeln!(out, "Default (collateral {collateral_value}, recovery {recovery_fraction})").unwrap();
        }
        outcome_lines(&mut out, &self.defaulted);
        out.push_str("Yield bounds\n");
        line(&mut out, "paper convention", format!("[{}, {}]", pct(&self.bounds.paper.low), pct(&self.bounds.paper.high)));
        line(&mut out, "fund convention", format!("[{}, {}]", pct(&self.bounds.fund.low), pct(&self.bounds.fund.high)));
        out
    }

    pub fn json(&self) -> DealJson {
        let t = &self.cfg.terms;
        DealJson {
            principal_kopecks: t.principal.minor(),
            rate_bp: t.annual_rate.bp(),
            guarantee_ppm: t.guarantee_fraction.ppm(),
            collateral_coeff_milli: t.collateral_coefficient.milli(),
            collateral_basis: t.collateral_basis.as_str(),
            sector: t.sector.clone(),
            interest_kopecks: self.interest.minor(),
            total_repayment_kopecks: self.total.minor(),
            guarantee_face_kopecks: self.guarantee.minor(),
            required_collateral_kopecks: self.collateral.minor(),
            market_collateral_low_kopecks: self.market_low.minor(),
            market_collateral_high_kopecks: self.market_high.minor(),
            full_repayment: OutcomeJson::from(&self.repaid),
            default: OutcomeJson::from(&self.defaulted),
            paper_bounds_bp: [self.bounds.paper.low.to_bp_f64(), self.bounds.paper.high.to_bp_f64()],
            fund_bounds_bp: [self.bounds.fund.low.to_bp_f64(), self.bounds.fund.high.to_bp_f64()],
        }
    }
}

fn outcome_lines(out: &mut String, o: &DealOutcome) {
    if o.recovered.is_positive() || o.municipal_guarantee_draw.is_positive() {
        line(out, "recovered from collateral", o.recovered);
    }
    line(out, "fund cash in", o.fund_cash_in);
    line(out, "fund yield", pct(&o.fund_yield));
    line(out, "municipal guarantee draw", o.municipal_guarantee_draw);
    line(out, "municipal result", pct(&o.municipal_result));
    if let Some(roi) = &o.municipal_roi_net {
        line(out, "municipal ROI on net", pct(roi));
    }
    line(out, "consolidated yield", pct(&o.consolidated_yield));
}

#[derive(Serialize)]
pub struct OutcomeJson {
    pub scenario: &'static str,
    pub recovered_kopecks: i64,
    pub fund_cash_in_kopecks: i64,
    pub fund_yield_bp: f64,
    pub municipal_guarantee_draw_kopecks: i64,
    pub municipal_result_bp: f64,
    pub municipal_roi_net_bp: Option<f64>,
    pub consolidated_yield_bp: f64,
}

impl From<&DealOutcome> for OutcomeJson {
    fn from(o: &DealOutcome) -> OutcomeJson {
        OutcomeJson {
            scenario: o.kind.as_str(),
            recovered_kopecks: o.recovered.minor(),
            fund_cash_in_kopecks: o.fund_cash_in.minor(),
            fund_yield_bp: o.fund_yield.to_bp_f64(),
            municipal_guarantee_draw_kopecks: o.municipal_guarantee_draw.minor(),
            municipal_result_bp: o.municipal_result.to_bp_f64(),
            municipal_roi_net_bp: o.municipal_roi_net.as_ref().map(Exact::to_bp_f64),
            consolidated_yield_bp: o.consolidated_yield.to_bp_f64(),
        }
    }
}

#[derive(Serialize)]
pub struct DealJson {
    pub principal_kopecks: i64,
    pub rate_bp: i64,
    pub guarantee_ppm: u32,
    pub collateral_coeff_milli: u32,
    pub collateral_basis: &'static str,
    pub sector: String,
    pub interest_kopecks: i64,
    pub total_repayment_kopecks: i64,
    pub guarantee_face_kopecks: i64,
    pub required_collateral_kopecks: i64,
    pub market_collateral_low_kopecks: i64,
    pub market_collateral_high_kopecks: i64,
    pub full_repayment: OutcomeJson,
    pub default: OutcomeJson,
    pub paper_bounds_bp: [f64; 2],
    pub fund_bounds_bp: [f64; 2],
}

pub struct PortfolioReport {
    pub break_even: Exact,
    pub critical: Exact,
    pub default_share: Exact,
    pub yield_at_share: Exact,
    pub bounds: YieldBounds,
}

impl PortfolioReport {
    pub fn build(cfg: &ScenarioConfig) -> Result<PortfolioReport, String> {
        let k = cfg.terms.annual_rate.to_exact();
        let pp = cfg.terms.guarantee_fraction.to_exact();
        let x = cfg.default_share.to_exact();
        let err = |e: AnalyticsError| e.to_string();
        Ok(PortfolioReport {
            break_even: break_even_default(&k).map_err(err)?,
            critical: critical_default(&k, &pp).map_err(err)?,
            yield_at_share: portfolio_yield(&x, &k).map_err(err)?,
            default_share: x,
            bounds: deal_yield_bounds(&cfg.terms).map_err(|e| e.to_string())?,
        })
    }

    pub fn text(&self) -> String {
        let mut out = String::from("Portfolio thresholds\n");
        line(&mut out, "break-even default X0", pct(&self.break_even));
        line(&mut out, "critical default Xcr", pct(&self.critical));
        line(&mut out, &format!("yield at X = {}", pct(&self.default_share)), pct(&self.yield_at_share));
        line(&mut out, "paper-convention range", format!("[{}, {}]", pct(&self.bounds.paper.low), pct(&self.bounds.paper.high)));
        line(&mut out, "fund-convention range", format!("[{}, {}]", pct(&self.bounds.fund.low), pct(&self.bounds.fund.high)));
        out
    }

    pub fn json(&self) -> PortfolioJson {
        PortfolioJson {
            break_even_default_bp: self.break_even.to_bp_f64(),
            critical_default_bp: self.critical.to_bp_f64(),
            default_share_bp: self.default_share.to_bp_f64(),
            yield_at_share_bp: self.yield_at_share.to_bp_f64(),
            paper_bounds_bp: [self.bounds.paper.low.to_bp_f64(), self.bounds.paper.high.to_bp_f64()],
            fund_bounds_bp: [self.bounds.fund.low.to_bp_f64(), self.bounds.fund.high.to_bp_f64()],
        }
    }
}

#[derive(Serialize)]
pub struct PortfolioJson {
    pub break_even_default_bp: f64,
    pub critical_default_bp: f64,
    pub default_share_bp: f64,
    pub yield_at_share_bp: f64,
    pub paper_bounds_bp: [f64; 2],
    pub fund_bounds_bp: [f64; 2],
}

#[derive(Serialize)]
pub struct SolveJson {
    pub rate_bp: f64,
    pub rate_exact: String,
    pub verification_yield_bp: f64,
}

pub fn solve_text(rate: &Exact, check: &Exact) -> String {
    let mut out = String::new();
    line(&mut out, "rate", pct(rate));
    let (n, d) = rate.parts();
    line(&mut out, "rate (exact)", format!("{n}/{d}"));
    line(&mut out, "verification yield", pct(check));
    out
}

pub fn solve_json(rate: &Exact, check: &Exact) -> SolveJson {
    let (n, d) = rate.parts();
    SolveJson {
        rate_bp: rate.to_bp_f64(),
        rate_exact: format!("{n}/{d}"),
        verification_yield_bp: check.to_bp_f64(),
    }
}

pub fn sim_text(r: &SimReport) -> String {
    let mut out = format!(
        "Simulation (seed {}, {} trials x {} loans)\n",
        r.seed, r.trials, r.loans_per_trial
    );
    line(&mut out, "default probability", pct(&r.default_prob));
    line(&mut out, "mean default share", pct(&r.mean_default_share));
    line(&mut out, "mean fund yield", pct(&r.mean_fund_yield));
    line(&mut out, "mean consolidated yield", pct(&r.mean_consolidated_yield));
    line(&mut out, "standard error", format!("{:.4}%", r.std_error * 100.0));
    line(&mut out, "mean municipal loss", pct(&r.mean_municipal_loss));
    let qs: Vec<String> = r.quantiles.iter().map(pct).collect();
    line(&mut out, "quantiles 1/5/50/95/99", qs.join(" "));
    line(&mut out, &format!("trials below -{}", pct(&r.guarantee_share)), pct(&r.fraction_below_guarantee));
    line(&mut out, "config digest", &r.config_digest);
    out
}

pub fn ledger_text(state: &LedgerState) -> String {
    let a = state.account;
    let t = &state.tallies;
    let mut out = format!("Fund account after seq {}\n", state.last_seq);
    line(&mut out, "program allocation", a.program_allocation);
    line(&mut out, "cash", a.cash);
    line(&mut out, "notes outstanding", a.notes_outstanding);
    line(&mut out, "interest income", a.interest_income);
    line(&mut out, "guarantee losses", a.guarantee_losses);
    line(&mut out, "guarantee capacity", state.guarantee_capacity());
    out.push_str("Notes\n");
    for (label, tally) in [("issued", t.issued), ("pledged", t.pledged), ("returned", t.returned), ("presented", t.presented)] {
        line(&mut out, label, format!("{} ({})", tally.count, tally.face));
    }
    out
}

#[derive(Serialize)]
pub struct TallyJson {
    pub count: u64,
    pub face_kopecks: i64,
}

#[derive(Serialize)]
pub struct LedgerJson {
    pub last_seq: u64,
    pub program_allocation_kopecks: i64,
    pub cash_kopecks: i64,
    pub notes_outstanding_kopecks: i64,
    pub interest_income_kopecks: i64,
    pub guarantee_losses_kopecks: i64,
    pub guarantee_capacity_kopecks: i64,
    pub issued: TallyJson,
    pub pledged: TallyJson,
    pub returned: TallyJson,
    pub presented: TallyJson,
}

pub fn ledger_json(state: &LedgerState) -> LedgerJson {
    let a = state.account;
    let t = &state.tallies;
    let tally = |x: munifund_core::ledger::Tally| TallyJson {
        count: x.count,
        face_kopecks: x.face.minor(),
    };
    LedgerJson {
        last_seq: state.last_seq,
        program_allocation_kopecks: a.program_allocation.minor(),
        cash_kopecks: a.cash.minor(),
        notes_outstanding_kopecks: a.notes_outstanding.minor(),
        interest_income_kopecks: a.interest_income.minor(),
        guarantee_losses_kopecks: a.guarantee_losses.minor(),
        guarantee_capacity_kopecks: state.guarantee_capacity().minor(),
        issued: tally(t.issued),
        pledged: tally(t.pledged),
        returned: tally(t.returned),
        presented: tally(t.presented),
    }
}
