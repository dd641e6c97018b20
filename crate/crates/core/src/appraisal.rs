//! Order-of-magnitude appraisal of a pricing policy: externality savings,
//! operator and social benefits, investment NPV and benefit-cost ratios.
//!
//! Money amounts in reports are in millions of euros (M€) unless a name says
//! otherwise.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::Kpis;

#[derive(Debug, Error, PartialEq)]
pub enum AppraisalError {
    #[error("shifted ton-km must be non-negative, got {0}")]
    NegativeShift(f64),
    #[error("annual cost must be positive, got {0} M€")]
    NonPositiveCost(f64),
    #[error("investment plan has no entries")]
    EmptyPlan,
    #[error("invalid appraisal parameter: {0}")]
    InvalidParameter(String),
}

/// Closed interval with `lower <= upper`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    /// Orders the endpoints.
    pub fn new(a: f64, b: f64) -> Self {
        Self {
            lower: a.min(b),
            upper: a.max(b),
        }
    }

    pub fn point(v: f64) -> Self {
        Self { lower: v, upper: v }
    }

    pub fn scale(self, k: f64) -> Self {
        Self::new(self.lower * k, self.upper * k)
    }

    pub fn add(self, other: Interval) -> Self {
        Self::new(self.lower + other.lower, self.upper + other.upper)
    }
}

/// External cost rates of road and rail freight in €ct/(t·km), with the
/// inflation adjustment applied to bring them to current prices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalityBounds {
    pub road_lower: f64,
    pub road_upper: f64,
    pub rail_lower: f64,
    pub rail_upper: f64,
    pub inflation_factor: f64,
}

impl Default for ExternalityBounds {
    /// Averages over accidents, air pollution, climate, noise and congestion.
    fn default() -> Self {
        Self {
            road_lower: 0.42,
            road_upper: 8.82,
            rail_lower: 0.06,
            rail_upper: 0.74,
            inflation_factor: 1.3785,
        }
    }
}

impl ExternalityBounds {
    pub fn validate(&self) -> Result<(), AppraisalError> {
        let all = [
            self.road_lower,
            self.road_upper,
            self.rail_lower,
            self.rail_upper,
            self.inflation_factor,
        ];
        if all.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(AppraisalError::InvalidParameter(
                "externality rates must be finite and non-negative".into(),
            ));
        }
        if self.road_lower > self.road_upper || self.rail_lower > self.rail_upper {
            return Err(AppraisalError::InvalidParameter(
                "externality lower rate exceeds upper rate".into(),
            ));
        }
        Ok(())
    }
}

/// Externality avoided by moving `tkm_shifted` ton-km from road to rail, in €.
///
/// ```
/// use railtac::appraisal::{externality_saving, ExternalityBounds};
///
/// let s = externality_saving(1e6, &ExternalityBounds::default()).unwrap();
/// assert!((s.lower - 4962.6).abs() < 1e-6);
/// ```
pub fn externality_saving(
    tkm_shifted: f64,
    bounds: &ExternalityBounds,
) -> Result<Interval, AppraisalError> {
    if !(tkm_shifted >= 0.0) {
        return Err(AppraisalError::NegativeShift(tkm_shifted));
    }
    bounds.validate()?;
    let k = bounds.inflation_factor / 100.0 * tkm_shifted;
    Ok(Interval::new(
        k * (bounds.road_lower - bounds.rail_lower),
        k * (bounds.road_upper - bounds.rail_upper),
    ))
}

/// Yearly investment outlays in M€, discounted to `base_year`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvestmentPlan {
    /// `(year, M€)`; a year may appear more than once.
    pub entries: Vec<(i32, f64)>,
    #[serde(default = "default_discount_rate")]
    pub discount_rate: f64,
    /// Share of the outlay the State recovers through taxes.
    #[serde(default = "default_tax_factor")]
    pub tax_recovery_factor: f64,
    #[serde(default = "default_base_year")]
    pub base_year: i32,
    /// Years the NPV is spread over when annualizing.
    #[serde(default = "default_horizon")]
    pub horizon_years: u32,
}

fn default_discount_rate() -> f64 {
    0.025
}
fn default_tax_factor() -> f64 {
    0.32
}
fn default_base_year() -> i32 {
    2023
}
fn default_horizon() -> u32 {
    30
}

impl InvestmentPlan {
    pub fn new(entries: Vec<(i32, f64)>) -> Self {
        Self {
            entries,
            discount_rate: default_discount_rate(),
            tax_recovery_factor: default_tax_factor(),
            base_year: default_base_year(),
            horizon_years: default_horizon(),
        }
    }

    /// The corridor investment programme, spread uniformly over the years of
    /// each reported period. The open-ended "after 2030" block is spread over
    /// 2031-2050 and the undated remainder is booked in the base year.
    pub fn corridor_programme() -> Self {
        let periods: [(i32, i32, f64); 5] = [
            (2014, 2016, 1362.0),
            (2017, 2020, 8523.0),
            (2021, 2025, 30447.0),
            (2026, 2030, 72415.0),
            (2031, 2050, 32498.0),
        ];
        let mut entries = Vec::new();
        for (from, to, total) in periods {
            let n = (to - from + 1) as f64;
            entries.extend((from..=to).map(|y| (y, total / n)));
        }
        entries.push((default_base_year(), 1123.0));
        Self::new(entries)
    }

    fn validate(&self) -> Result<(), AppraisalError> {
        if self.entries.is_empty() {
            return Err(AppraisalError::EmptyPlan);
        }
        if !(self.discount_rate >= 0.0) {
            return Err(AppraisalError::InvalidParameter(
                "discount rate must be non-negative".into(),
            ));
        }
        if !(self.tax_recovery_factor >= 0.0 && self.tax_recovery_factor < 1.0) {
            return Err(AppraisalError::InvalidParameter(
                "tax recovery factor must lie in [0, 1)".into(),
            ));
        }
        if self.horizon_years == 0 {
            return Err(AppraisalError::InvalidParameter(
                "annualization horizon must be at least one year".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetPresentValue {
    /// Discounted outlay net of tax recovery, M€.
    pub npv_meur: f64,
    /// `npv_meur / horizon_years`, M€ per year.
    pub annualized_meur: f64,
}

/// `Σ amount / (1 + rate)^(year − base_year) · (1 − tax_recovery_factor)`.
pub fn npv(plan: &InvestmentPlan) -> Result<NetPresentValue, AppraisalError> {
    plan.validate()?;
    let gross: f64 = plan
        .entries
        .iter()
        .map(|&(year, amount)| amount / (1.0 + plan.discount_rate).powi(year - plan.base_year))
        .sum();
    let npv_meur = gross * (1.0 - plan.tax_recovery_factor);
    Ok(NetPresentValue {
        npv_meur,
        annualized_meur: npv_meur / f64::from(plan.horizon_years),
    })
}

/// Benefit-cost ratio in percent, endpoint-wise.
pub fn bcr(total: Interval, annual_cost_meur: f64) -> Result<Interval, AppraisalError> {
    if !(annual_cost_meur > 0.0) {
        return Err(AppraisalError::NonPositiveCost(annual_cost_meur));
    }
    Ok(total.scale(100.0 / annual_cost_meur))
}

/// Inputs of [`benefit_report`] beyond the two KPI tables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenefitParams {
    /// Road cost, €/(t·km).
    pub road_cost_per_tkm: f64,
    /// Rail cost, €/(t·km). When absent, the average transport cost per
    /// ton-km of the appraised simulation is used.
    #[serde(default)]
    pub rail_cost_per_tkm: Option<f64>,
    /// Share of the cost differential lost as road tax revenue.
    pub tax_recovery_factor: f64,
}

impl Default for BenefitParams {
    fn default() -> Self {
        Self {
            road_cost_per_tkm: 0.385,
            rail_cost_per_tkm: None,
            tax_recovery_factor: 0.32,
        }
    }
}

/// Yearly benefits of a policy relative to a baseline, M€.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenefitReport {
    pub tkm_shifted: f64,
    pub tac_revenue: f64,
    pub externality_saving: Interval,
    /// Delay-cost saving of the freight operators versus the baseline.
    pub foc_benefit: f64,
    /// Road-minus-rail transport cost on the shifted ton-km, net of taxes.
    pub social_benefit: f64,
    pub total: Interval,
}

impl BenefitReport {
    pub fn from_components(
        tac_revenue: f64,
        externality_saving: Interval,
        foc_benefit: f64,
        social_benefit: f64,
    ) -> Self {
        let point = tac_revenue + foc_benefit + social_benefit;
        Self {
            tkm_shifted: 0.0,
            tac_revenue,
            externality_saving,
            foc_benefit,
            social_benefit,
            total: externality_saving.add(Interval::point(point)),
        }
    }
}

/// Benefits of the policy simulated in `sim` against `baseline`.
///
/// The shifted quantity is the growth of completed rail ton-km; a policy that
/// moves freight back to road is rejected.
pub fn benefit_report(
    sim: &Kpis,
    baseline: &Kpis,
    bounds: &ExternalityBounds,
    params: &BenefitParams,
) -> Result<BenefitReport, AppraisalError> {
    const MEUR: f64 = 1e-6;
    let tkm_shifted = sim.rail_tkm - baseline.rail_tkm;
    if !(tkm_shifted >= 0.0) {
        return Err(AppraisalError::NegativeShift(tkm_shifted));
    }
    if !(params.tax_recovery_factor >= 0.0 && params.tax_recovery_factor < 1.0) {
        return Err(AppraisalError::InvalidParameter(
            "tax recovery factor must lie in [0, 1)".into(),
        ));
    }
    let rail_cost = match params.rail_cost_per_tkm {
        Some(c) => c,
        None if sim.rail_tkm > 0.0 => sim.transport_cost_eur / sim.rail_tkm,
        None => 0.0,
    };
    let externality = externality_saving(tkm_shifted, bounds)?.scale(MEUR);
    let foc = (baseline.delay_cost_eur - sim.delay_cost_eur) * MEUR;
    let social = (params.road_cost_per_tkm - rail_cost)
        * tkm_shifted
        * (1.0 - params.tax_recovery_factor)
        * MEUR;
    let mut report =
        BenefitReport::from_components(sim.tac_revenue_eur * MEUR, externality, foc, social);
    report.tkm_shifted = tkm_shifted;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn externality_examples() {
        let b = ExternalityBounds::default();
        let s = externality_saving(1e6, &b).unwrap();
        assert!((s.lower - 4962.6).abs() < 1e-6);
        assert!((s.upper - 111_382.8).abs() < 1e-6);
        assert_eq!(externality_saving(0.0, &b).unwrap(), Interval::point(0.0));
        assert!(externality_saving(-1.0, &b).is_err());
    }

    #[test]
    fn npv_examples() {
        let mut plan = InvestmentPlan::new(vec![(2024, 100.0)]);
        plan.tax_recovery_factor = 0.0;
        let v = npv(&plan).unwrap();
        assert!((v.npv_meur - 100.0 / 1.025).abs() < 1e-12);

        plan.discount_rate = 0.0;
        plan.entries = vec![(2020, 10.0), (2030, 20.0), (2040, 30.0)];
        assert_eq!(npv(&plan).unwrap().npv_meur, 60.0);

        assert_eq!(
            npv(&InvestmentPlan::new(vec![])),
            Err(AppraisalError::EmptyPlan)
        );
    }

    #[test]
    fn bcr_examples() {
        let r = bcr(Interval::new(571.16, 1210.23), 2880.4).unwrap();
        assert!((r.lower - 19.83).abs() < 5e-3);
        assert!((r.upper - 42.02).abs() < 5e-3);
        let r = bcr(Interval::new(368.87, 671.84), 2880.4).unwrap();
        assert!((r.lower - 12.81).abs() < 5e-3);
        assert!((r.upper - 23.32).abs() < 5e-3);
        assert_eq!(
            bcr(Interval::point(7.0), 7.0).unwrap(),
            Interval::point(100.0)
        );
        assert!(bcr(Interval::point(1.0), 0.0).is_err());
    }

    #[test]
    fn programme_totals_reported_amount() {
        let plan = InvestmentPlan::corridor_programme();
        let total: f64 = plan.entries.iter().map(|e| e.1).sum();
        assert!((total - 146_368.0).abs() < 1e-6);
    }
}
