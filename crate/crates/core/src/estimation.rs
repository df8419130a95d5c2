//! Monte Carlo clicks and conversions over repeated phases of the exploratory
//! mechanism, and the relevance / valuation estimators built on them.
//!
//! One phase is a full pass over the `n` steps of the schedule. Over `l`
//! phases a bidder at rank `i` expects `l θ_i e_i` clicks, so `M_i / (l θ_i)`
//! estimates its relevance. A Chernoff bound gives the phase count
//!
//! ```text
//! l ≥ 3 ln(2/ε) / (δ² θ_i)
//! ```
//!
//! for an additive error of at most `δ` with probability `1 - ε`. (The
//! logarithm is `ln(2/ε)`; written as `ln(ε/2)` the count would be negative.)

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use crate::effective_ctr::effective_position_ctrs;
use crate::error::{Error, Result};
use crate::mechanisms::{build_schedule, AllocationSchedule};
use crate::model::{AuctionInstance, CtrModel};

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One impression of one bidder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClickRecord {
    pub phase: usize,
    pub step: usize,
    pub rank: usize,
    pub slot: usize,
    pub clicked: bool,
    pub converted: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClickLog {
    phases: usize,
    steps: usize,
    records: Vec<ClickRecord>,
    clicks: Vec<u64>,
    conversions: Vec<u64>,
}

impl ClickLog {
    pub fn phases(&self) -> usize {
        self.phases
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn records(&self) -> &[ClickRecord] {
        &self.records
    }

    /// `M_i` per rank, summed over all phases.
    pub fn clicks(&self) -> &[u64] {
        &self.clicks
    }

    /// `Q_i` per rank.
    pub fn conversions(&self) -> &[u64] {
        &self.conversions
    }

    /// Impressions a rank was shown in.
    pub fn impressions(&self, rank: usize) -> usize {
        self.records.iter().filter(|r| r.rank == rank).count()
    }

    /// CSV with columns `phase,step,bidder_rank,slot,clicked,converted`;
    /// phase, step, rank and slot are 1-based.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "phase,step,bidder_rank,slot,clicked,converted")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.phase + 1,
                r.step + 1,
                r.rank + 1,
                r.slot + 1,
                u8::from(r.clicked),
                u8::from(r.converted)
            )?;
        }
        Ok(())
    }
}

fn check_probability(name: &'static str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::out_of_range(name, p, "0 <= p <= 1"))
    }
}

/// Simulates `phases` passes over `schedule`. Every shown bidder is clicked
/// with its slot CTR and, once clicked, converts with its rate in
/// `conversion_rates` (rank order). Phase `p` draws from its own ChaCha
/// stream, so the log depends only on `seed`.
pub fn simulate_phases(
    inst: &AuctionInstance,
    schedule: &AllocationSchedule,
    phases: usize,
    conversion_rates: &[f64],
    seed: u64,
) -> Result<ClickLog> {
    let nb = inst.num_bidders();
    if conversion_rates.len() != nb {
        return Err(Error::LengthMismatch {
            what: "conversion rates",
            expected: nb,
            actual: conversion_rates.len(),
        });
    }
    if schedule.num_bidders() != nb || schedule.num_slots() != inst.num_slots() {
        return Err(Error::Unsupported("schedule does not match the instance"));
    }
    for &a in conversion_rates {
        check_probability("conversion rate", a)?;
    }
    for step in schedule.steps() {
        for (slot, rank) in step.iter().enumerate() {
            if let Some(r) = rank {
                check_probability("click probability", inst.click_probability(*r, slot))?;
            }
        }
    }

    let per_phase: Vec<Vec<ClickRecord>> = (0..phases)
        .into_par_iter()
        .map(|phase| {
            let mut rng = rng_for(seed, phase as u64);
            let mut out = Vec::new();
            for (step, row) in schedule.steps().iter().enumerate() {
                for (slot, rank) in row.iter().enumerate() {
                    let Some(rank) = *rank else { continue };
                    let clicked = rng.gen_bool(inst.click_probability(rank, slot));
                    let converted = clicked && rng.gen_bool(conversion_rates[rank]);
                    out.push(ClickRecord {
                        phase,
                        step,
                        rank,
                        slot,
                        clicked,
                        converted,
                    });
                }
            }
            out
        })
        .collect();

    let records: Vec<ClickRecord> = per_phase.into_iter().flatten().collect();
    let mut clicks = vec![0; nb];
    let mut conversions = vec![0; nb];
    for r in &records {
        clicks[r.rank] += u64::from(r.clicked);
        conversions[r.rank] += u64::from(r.converted);
    }
    Ok(ClickLog {
        phases,
        steps: schedule.num_steps(),
        records,
        clicks,
        conversions,
    })
}

/// `ê = M / (l θ)`.
pub fn estimate_relevance(clicks: u64, theta: f64, phases: usize) -> Result<f64> {
    if !(theta > 0.0) {
        return Err(Error::out_of_range("theta", theta, "theta > 0"));
    }
    if phases == 0 {
        return Err(Error::out_of_range("phases", 0.0, "phases >= 1"));
    }
    Ok(clicks as f64 / (phases as f64 * theta))
}

fn check_estimation_params(theta: f64, eps: f64) -> Result<()> {
    if !(theta > 0.0) {
        return Err(Error::out_of_range("theta", theta, "theta > 0"));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::out_of_range("epsilon", eps, "0 < epsilon < 1"));
    }
    Ok(())
}

/// Phases needed for an additive error `delta` with probability `1 - eps`.
pub fn required_phases(delta: f64, eps: f64, theta: f64) -> Result<u64> {
    check_estimation_params(theta, eps)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::out_of_range("delta", delta, "0 < delta < 1"));
    }
    Ok((3.0 * (2.0 / eps).ln() / (delta * delta * theta)).ceil() as u64)
}

/// Additive radius `√(3 ln(2/ε) / (l θ))` holding with probability `1 - ε`.
pub fn confidence_radius(theta: f64, eps: f64, phases: usize) -> Result<f64> {
    check_estimation_params(theta, eps)?;
    if phases == 0 {
        return Err(Error::out_of_range("phases", 0.0, "phases >= 1"));
    }
    Ok((3.0 * (2.0 / eps).ln() / (phases as f64 * theta)).sqrt())
}

/// What an advertiser gains per impression, click and conversion.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ValueComponents {
    pub impression: f64,
    pub click: f64,
    pub conversion: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValuationInputs {
    pub n: usize,
    pub phases: usize,
    pub clicks: u64,
    pub conversions: u64,
    pub values: ValueComponents,
    pub theta: f64,
    /// The bidder's updated relevance estimate `f̃`.
    pub relevance_estimate: f64,
}

/// Value per click `(l n x_I + M x_C + Q x_A) / (l θ f̃)`.
pub fn estimate_valuation(inp: &ValuationInputs) -> Result<f64> {
    if !(inp.theta > 0.0) {
        return Err(Error::ZeroDenominator {
            what: "theta in valuation estimate",
            index: 0,
        });
    }
    if !(inp.relevance_estimate > 0.0) {
        return Err(Error::ZeroDenominator {
            what: "relevance estimate in valuation estimate",
            index: 0,
        });
    }
    if inp.phases == 0 {
        return Err(Error::out_of_range("phases", 0.0, "phases >= 1"));
    }
    let l = inp.phases as f64;
    let gained =
        l * inp.n as f64 * inp.values.impression + inp.clicks as f64 * inp.values.click + inp.conversions as f64 * inp.values.conversion;
    Ok(gained / (l * inp.theta * inp.relevance_estimate))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BidderEstimate {
    pub rank: usize,
    pub id: usize,
    pub clicks: u64,
    pub conversions: u64,
    pub theta: f64,
    pub relevance_estimate: f64,
    pub radius: f64,
    /// `f̃` used for the valuation: `ê` when there were clicks, else the
    /// bidder's prior self estimate.
    pub updated_self_estimate: f64,
    pub valuation_estimate: f64,
    pub conversion_rate: f64,
    pub values: ValueComponents,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationReport {
    pub delta: f64,
    pub eps: f64,
    pub phases: usize,
    pub bidders: Vec<BidderEstimate>,
}

/// Relevance and valuation estimates for every rank with a positive
/// effective CTR, from a separable-model click log.
pub fn estimation_report(
    inst: &AuctionInstance,
    log: &ClickLog,
    delta: f64,
    eps: f64,
    conversion_rates: &[f64],
    values: &[ValueComponents],
) -> Result<EstimationReport> {
    if !matches!(inst.ctr_model(), CtrModel::Separable) {
        return Err(Error::Unsupported("relevance estimation needs the separable CTR model"));
    }
    let eff = effective_position_ctrs(inst.curve(), inst.explore())?;
    let n = inst.explore().n;
    let mut bidders = Vec::new();
    for (rank, b) in inst.bidders().iter().enumerate() {
        let theta = eff.theta(rank);
        if !(theta > 0.0) {
            continue;
        }
        let clicks = log.clicks()[rank];
        let conversions = log.conversions()[rank];
        let relevance_estimate = estimate_relevance(clicks, theta, log.phases())?;
        let updated = if clicks > 0 { relevance_estimate } else { b.self_estimate };
        let valuation_estimate = estimate_valuation(&ValuationInputs {
            n,
            phases: log.phases(),
            clicks,
            conversions,
            values: values[rank],
            theta,
            relevance_estimate: updated,
        })?;
        bidders.push(BidderEstimate {
            rank,
            id: b.id,
            clicks,
            conversions,
            theta,
            relevance_estimate,
            radius: confidence_radius(theta, eps, log.phases())?,
            updated_self_estimate: updated,
            valuation_estimate,
            conversion_rate: conversion_rates[rank],
            values: values[rank],
        });
    }
    Ok(EstimationReport {
        delta,
        eps,
        phases: log.phases(),
        bidders,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    pub rank: usize,
    pub theta: f64,
    pub relevance: f64,
    pub delta: f64,
    pub eps: f64,
    pub phases: u64,
    pub trials: usize,
    pub failures: usize,
    /// Fraction of trials with `|ê - e| > δ`; 0 when `trials == 0`.
    pub rate: f64,
    pub mean_estimate: f64,
    pub degenerate: bool,
}

/// Repeats the estimation of `rank`'s relevance `trials` times, each over
/// `required_phases(delta, eps, θ)` phases, and counts misses beyond `delta`.
///
/// The bidder holds the same slot at a given step in every phase, so each
/// step's click total over `l` phases is drawn as one binomial.
pub fn coverage_test(inst: &AuctionInstance, rank: usize, delta: f64, eps: f64, trials: usize, seed: u64) -> Result<CoverageReport> {
    if !matches!(inst.ctr_model(), CtrModel::Separable) {
        return Err(Error::Unsupported("relevance estimation needs the separable CTR model"));
    }
    if rank >= inst.num_bidders() {
        return Err(Error::out_of_range("rank", rank as f64, "rank < N"));
    }
    let explore = inst.explore();
    let theta = effective_position_ctrs(inst.curve(), explore)?.theta(rank);
    let phases = required_phases(delta, eps, theta)?;
    let relevance = inst.bidders()[rank].relevance;
    check_probability("relevance", relevance)?;
    let schedule = build_schedule(inst.num_bidders(), inst.num_slots(), explore)?;
    let draws: Vec<Binomial> = schedule
        .slots_of(rank)
        .into_iter()
        .flatten()
        .map(|slot| {
            let p = inst.click_probability(rank, slot);
            Binomial::new(phases, p).map_err(|_| Error::out_of_range("click probability", p, "0 <= p <= 1"))
        })
        .collect::<Result<_>>()?;

    let estimates: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = rng_for(seed, trial as u64);
            let clicks: u64 = draws.iter().map(|d| d.sample(&mut rng)).sum();
            clicks as f64 / (phases as f64 * theta)
        })
        .collect();
    let failures = estimates.iter().filter(|e| (*e - relevance).abs() > delta).count();
    let (rate, mean_estimate) = if trials == 0 {
        (0.0, f64::NAN)
    } else {
        (failures as f64 / trials as f64, estimates.iter().sum::<f64>() / trials as f64)
    };
    Ok(CoverageReport {
        rank,
        theta,
        relevance,
        delta,
        eps,
        phases,
        trials,
        failures,
        rate,
        mean_estimate,
        degenerate: trials == 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Bidder, ExploreConfig, PositionCurve};

    fn running(relevance: [f64; 3]) -> AuctionInstance {
        let bidders = vec![
            Bidder::truthful(1, 10.0, relevance[0]),
            Bidder::truthful(2, 6.0, relevance[1]),
            Bidder::truthful(3, 4.0, relevance[2]),
        ];
        AuctionInstance::new(
            bidders,
            PositionCurve::new(vec![0.6, 0.3, 0.1]),
            ExploreConfig::new(3, 1),
            CtrModel::Separable,
        )
    }

    fn schedule(inst: &AuctionInstance) -> AllocationSchedule {
        build_schedule(inst.num_bidders(), inst.num_slots(), inst.explore()).unwrap()
    }

    #[test]
    fn zero_relevance_never_clicks() {
        let inst = running([1.0, 0.0, 1.0]);
        let log = simulate_phases(&inst, &schedule(&inst), 200, &[0.5; 3], 1).unwrap();
        assert_eq!(log.clicks()[1], 0);
        assert_eq!(log.conversions()[1], 0);
    }

    #[test]
    fn sure_clicks_count_impressions() {
        let bidders = vec![Bidder::truthful(1, 1.0, 1.0), Bidder::truthful(2, 1.0, 1.0)];
        let inst = AuctionInstance::new(
            bidders,
            PositionCurve::new(vec![1.0]),
            ExploreConfig::new(2, 1),
            CtrModel::Separable,
        );
        let log = simulate_phases(&inst, &schedule(&inst), 7, &[1.0, 0.0], 3).unwrap();
        // each bidder holds the only slot in one of the two steps
        assert_eq!(log.clicks(), &[7, 7]);
        assert_eq!(log.conversions(), &[7, 0]);
        assert_eq!(log.impressions(0), 7);
    }

    #[test]
    fn same_seed_same_log() {
        let inst = running([0.9, 0.5, 0.3]);
        let s = schedule(&inst);
        let a = simulate_phases(&inst, &s, 50, &[0.2; 3], 99).unwrap();
        let b = simulate_phases(&inst, &s, 50, &[0.2; 3], 99).unwrap();
        assert_eq!(a, b);
        let mut csv_a = Vec::new();
        let mut csv_b = Vec::new();
        a.write_csv(&mut csv_a).unwrap();
        b.write_csv(&mut csv_b).unwrap();
        assert_eq!(csv_a, csv_b);
        assert_ne!(a, simulate_phases(&inst, &s, 50, &[0.2; 3], 100).unwrap());
    }

    #[test]
    fn log_invariants() {
        let inst = running([0.9, 0.5, 0.3]);
        let log = simulate_phases(&inst, &schedule(&inst), 100, &[0.4; 3], 5).unwrap();
        for r in log.records() {
            assert!(!r.converted || r.clicked);
        }
        for rank in 0..3 {
            assert!(log.conversions()[rank] <= log.clicks()[rank]);
            assert!(log.clicks()[rank] as usize <= log.impressions(rank));
            assert!(log.impressions(rank) <= 100 * 3);
        }
    }

    #[test]
    fn csv_header_and_rows() {
        let inst = running([0.9, 0.5, 0.3]);
        let log = simulate_phases(&inst, &schedule(&inst), 1, &[0.0; 3], 5).unwrap();
        let mut out = Vec::new();
        log.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("phase,step,bidder_rank,slot,clicked,converted"));
        assert_eq!(lines.count(), 9);
    }

    #[test]
    fn rejects_bad_probabilities() {
        let inst = running([0.9, 0.5, 0.3]);
        assert!(simulate_phases(&inst, &schedule(&inst), 1, &[1.5, 0.0, 0.0], 0).is_err());
        let bad = running([2.0, 0.5, 0.3]);
        assert!(simulate_phases(&bad, &schedule(&bad), 1, &[0.0; 3], 0).is_err());
    }

    #[test]
    fn relevance_estimates() {
        assert_eq!(estimate_relevance(0, 1.0, 10).unwrap(), 0.0);
        assert!((estimate_relevance(480, 1.0, 1000).unwrap() - 0.48).abs() < 1e-15);
        // M at its expectation l θ e recovers e
        assert!((estimate_relevance(600, 1.2, 1000).unwrap() - 0.5).abs() < 1e-15);
        assert!(estimate_relevance(1, 0.0, 1).is_err());
    }

    #[test]
    fn phase_counts() {
        assert_eq!(required_phases(0.1, 0.05, 1.0).unwrap(), 1107);
        let eps = 2.0 / std::f64::consts::E.powi(2);
        let near_one = 1.0 - 1e-12;
        assert_eq!(required_phases(near_one, eps, 1.0).unwrap(), 7);
        // 6 / (1 - 1e-12)^2 rounds up past 6
        assert!((3.0 * (2.0_f64 / eps).ln() - 6.0).abs() < 1e-12);
        assert!(required_phases(0.0, 0.05, 1.0).is_err());
        assert!(required_phases(0.1, 1.0, 1.0).is_err());
        assert!(required_phases(0.1, 0.05, 0.0).is_err());
    }

    #[test]
    fn radii() {
        let eps = 2.0 / std::f64::consts::E;
        assert!((confidence_radius(1.0, eps, 1).unwrap() - 3f64.sqrt()).abs() < 1e-12);
        let r1 = confidence_radius(1.2, 0.05, 100).unwrap();
        let r4 = confidence_radius(1.2, 0.05, 400).unwrap();
        assert!((r1 / r4 - 2.0).abs() < 1e-12);
        let r = confidence_radius(1.2, 0.05, 1107).unwrap();
        assert!((r - 0.0913).abs() < 1e-4, "{r}");
    }

    #[test]
    fn valuation_estimates() {
        let base = ValuationInputs {
            n: 3,
            phases: 1,
            clicks: 5,
            conversions: 2,
            values: ValueComponents {
                impression: 0.0,
                click: 0.0,
                conversion: 4.0,
            },
            theta: 1.2,
            relevance_estimate: 0.5,
        };
        assert!((estimate_valuation(&base).unwrap() - 2.0 * 4.0 / (1.2 * 0.5)).abs() < 1e-12);

        // counts at expectation: E[M] = l θ e, E[Q] = l θ e a
        let (l, theta, e, a) = (1000usize, 1.2, 0.5, 0.25);
        let x = ValueComponents {
            impression: 0.3,
            click: 1.5,
            conversion: 8.0,
        };
        let m = l as f64 * theta * e;
        let at_mean = ValuationInputs {
            n: 3,
            phases: l,
            clicks: m as u64,
            conversions: (m * a) as u64,
            values: x,
            theta,
            relevance_estimate: e,
        };
        let expected = 3.0 * x.impression / (theta * e) + x.click + a * x.conversion;
        assert!((estimate_valuation(&at_mean).unwrap() - expected).abs() < 1e-12);

        let none = ValuationInputs {
            clicks: 0,
            conversions: 0,
            ..base
        };
        assert_eq!(estimate_valuation(&none).unwrap(), 0.0);
        assert!(estimate_valuation(&ValuationInputs {
            relevance_estimate: 0.0,
            ..base
        })
        .is_err());
    }

    #[test]
    fn coverage_is_within_epsilon() {
        let mut inst = running([1.0, 1.0, 0.5]);
        inst = inst.with_explore(ExploreConfig::new(3, 1));
        // rank 2 has θ = 0.8
        let rep = coverage_test(&inst, 2, 0.1, 0.05, 1000, 11).unwrap();
        assert_eq!(rep.phases, required_phases(0.1, 0.05, 0.8).unwrap());
        assert!(rep.rate <= 0.05, "{rep:?}");
        assert!(!rep.degenerate);
    }

    #[test]
    fn wide_delta_never_fails() {
        let inst = running([1.0, 1.0, 0.05]);
        let rep = coverage_test(&inst, 2, 0.9, 0.05, 200, 2).unwrap();
        assert_eq!(rep.failures, 0);
    }

    #[test]
    fn zero_trials_is_degenerate() {
        let inst = running([1.0, 1.0, 0.5]);
        let rep = coverage_test(&inst, 2, 0.1, 0.05, 0, 2).unwrap();
        assert_eq!(rep.rate, 0.0);
        assert!(rep.degenerate);
    }

    #[test]
    fn report_covers_every_effective_rank() {
        let inst = running([0.9, 0.5, 0.3]);
        let log = simulate_phases(&inst, &schedule(&inst), 400, &[0.3; 3], 8).unwrap();
        let values = [ValueComponents {
            conversion: 10.0,
            ..Default::default()
        }; 3];
        let rep = estimation_report(&inst, &log, 0.1, 0.05, &[0.3; 3], &values).unwrap();
        assert_eq!(rep.bidders.len(), 3);
        for b in &rep.bidders {
            let truth = inst.bidders()[b.rank].relevance;
            assert!((b.relevance_estimate - truth).abs() <= b.radius);
        }
    }
}
