use proptest::prelude::*;
use railtac::appraisal::{
    bcr, benefit_report, npv, AppraisalError, BenefitParams, ExternalityBounds, Interval,
    InvestmentPlan,
};
use railtac::evaluation::Kpis;

fn kpis(rail_tkm: f64, delay: f64, transport: f64, tac: f64) -> Kpis {
    Kpis {
        tac_revenue_eur: tac,
        co2e_rights_eur: 0.0,
        transport_cost_eur: transport,
        delay_cost_eur: delay,
        avg_speed_kmh: 60.0,
        rail_mtons: 1.0,
        rail_share_pct: 10.0,
        rail_tkm,
        completed_trains: 10,
        incomplete_trains: 0,
    }
}

#[test]
fn programme_annual_cost_is_near_the_published_figure() {
    // Calibration target, not an identity: the yearly spread is a choice.
    let v = npv(&InvestmentPlan::corridor_programme()).unwrap();
    let rel = (v.annualized_meur - 2880.4).abs() / 2880.4;
    assert!(rel < 0.01, "{} M€/yr", v.annualized_meur);
}

#[test]
fn report_matches_hand_recomputation() {
    let base = kpis(2.0e9, -10.0e6, 0.06 * 2.0e9, 0.0);
    let sim = kpis(3.0e9, -25.0e6, 0.055 * 3.0e9, 40.0e6);
    let params = BenefitParams::default();
    let r = benefit_report(&sim, &base, &ExternalityBounds::default(), &params).unwrap();

    let shift = 1.0e9;
    let ext_lo = 1.3785 * (0.42 - 0.06) / 100.0 * shift / 1e6;
    let ext_hi = 1.3785 * (8.82 - 0.74) / 100.0 * shift / 1e6;
    let foc = 15.0;
    let social = (0.385 - 0.055) * shift * 0.68 / 1e6;
    let tac = 40.0;
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * b.abs().max(1.0);
    assert!(close(r.tkm_shifted, shift));
    assert!(close(r.externality_saving.lower, ext_lo));
    assert!(close(r.externality_saving.upper, ext_hi));
    assert!(close(r.foc_benefit, foc));
    assert!(close(r.social_benefit, social));
    assert!(close(r.total.lower, tac + ext_lo + foc + social));
    assert!(close(r.total.upper, tac + ext_hi + foc + social));
}

#[test]
fn zero_shift_leaves_only_revenue() {
    let k = kpis(1.0e9, -5.0e6, 5.0e7, 3.0e6);
    let r = benefit_report(
        &k,
        &k,
        &ExternalityBounds::default(),
        &BenefitParams::default(),
    )
    .unwrap();
    assert_eq!(r.externality_saving, Interval::point(0.0));
    assert_eq!(r.foc_benefit, 0.0);
    assert_eq!(r.social_benefit, 0.0);
    assert_eq!(r.total, Interval::point(3.0));
}

#[test]
fn shift_back_to_road_is_rejected() {
    let r = benefit_report(
        &kpis(1.0, 0.0, 0.0, 0.0),
        &kpis(2.0, 0.0, 0.0, 0.0),
        &ExternalityBounds::default(),
        &BenefitParams::default(),
    );
    assert_eq!(r, Err(AppraisalError::NegativeShift(-1.0)));
}

proptest! {
    #[test]
    fn npv_falls_with_the_discount_rate(
        flows in prop::collection::vec((2024i32..2060, 1.0f64..1e4), 1..20),
        r1 in 0.0f64..0.1,
        dr in 1e-4f64..0.1,
    ) {
        let mut plan = InvestmentPlan::new(flows);
        plan.discount_rate = r1;
        let a = npv(&plan).unwrap().npv_meur;
        plan.discount_rate = r1 + dr;
        let b = npv(&plan).unwrap().npv_meur;
        prop_assert!(b < a);
    }

    #[test]
    fn bcr_scales_inversely_with_cost(lo in 0.0f64..1e4, width in 0.0f64..1e4, c in 1.0f64..1e4, k in 1.0f64..8.0) {
        let total = Interval::new(lo, lo + width);
        let a = bcr(total, c).unwrap();
        let b = bcr(total, c * k).unwrap();
        prop_assert!((a.lower - b.lower * k).abs() <= 1e-9 * a.lower.max(1.0));
        prop_assert!((a.upper - b.upper * k).abs() <= 1e-9 * a.upper.max(1.0));
        prop_assert!(a.lower <= a.upper);
    }

    #[test]
    fn externality_interval_is_ordered(tkm in 0.0f64..1e12) {
        let s = railtac::appraisal::externality_saving(tkm, &ExternalityBounds::default()).unwrap();
        prop_assert!(s.lower <= s.upper);
        prop_assert!(s.lower >= 0.0);
    }
}
