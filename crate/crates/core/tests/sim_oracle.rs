use munifund_core::analytics::{break_even_default, critical_default, portfolio_yield};
use munifund_core::deal::LoanTerms;
use munifund_core::sim::{run_sim, run_trial, RecoveryModel, SimConfig};
use munifund_core::{Exact, Fraction, Money, Rate};

fn terms(k_bp: i64) -> LoanTerms {
    LoanTerms::new(Money::from_rubles(500_000).unwrap(), Rate::from_bp(k_bp), Fraction::from_bp(1000).unwrap()).unwrap()
}

fn config(k_bp: i64, p: Exact, recovery: RecoveryModel) -> SimConfig {
    SimConfig {
        n_loans: 500,
        terms: terms(k_bp),
        default_prob: p,
        recovery_model: recovery,
        trials: 200,
        seed: 20_170_930,
    }
}

#[test]
fn zero_recovery_mean_matches_closed_form() {
    for k_bp in [1000, 1500] {
        let k = Rate::from_bp(k_bp).to_exact();
        let pp = Exact::from_ints(1, 10);
        let grid = [
            Exact::zero(),
            Exact::from_ints(5, 100),
            break_even_default(&k).unwrap(),
            Exact::from_ints(15, 100),
            critical_default(&k, &pp).unwrap(),
            Exact::from_ints(30, 100),
        ];
        for p in grid {
            let report = run_sim(&config(k_bp, p.clone(), RecoveryModel::ZeroRecovery)).unwrap();
            let expected = portfolio_yield(&p, &k).unwrap();
            assert!(
                report.agrees_with(&expected, 3.0),
                "K={k_bp}bp p={p}: mean {} vs {} (se {})",
                report.mean_consolidated_yield,
                expected,
                report.std_error
            );
            // fund view adds the guarantee draws back
            assert_eq!(
                report.mean_fund_yield,
                &report.mean_consolidated_yield + &report.mean_municipal_loss
            );
            assert!(report.mean_municipal_loss <= pp);
        }
    }
}

#[test]
fn per_trial_guarantee_cap_and_collateral_floor() {
    let covered = RecoveryModel::CollateralRecovery {
        collateral_value: Money::from_rubles(525_000).unwrap(),
        recovery_fraction: Fraction::ONE,
    };
    for p in [Exact::from_ints(1, 10), Exact::from_ints(1, 2), Exact::one()] {
        let cfg = config(1500, p, covered);
        for t in 0..50 {
            let r = run_trial(&cfg, t).unwrap();
            assert!(r.municipal_loss() <= Exact::from_ints(1, 10));
            assert!(r.consolidated_yield() >= Exact::from_ints(1, 20));
        }
    }
}

#[test]
fn same_seed_same_report_different_seed_differs() {
    let cfg = config(1500, Exact::from_ints(1, 10), RecoveryModel::ZeroRecovery);
    let a = run_sim(&cfg).unwrap();
    assert_eq!(a, run_sim(&cfg).unwrap());
    let mut other = cfg.clone();
    other.seed += 1;
    let b = run_sim(&other).unwrap();
    assert_ne!(a.mean_consolidated_yield, b.mean_consolidated_yield);
    assert_eq!(a.config_digest, b.config_digest);
}
