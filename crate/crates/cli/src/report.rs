//! Evaluation of sweep points and the CSV / JSON writers.

use std::io::{self, Write};

use exgsp::{
    analyze, build_schedule, coverage_test, estimation_report, simulate_phases, Analysis, ClickLog, CoverageReport, EstimationReport,
    Mechanism,
};
use serde_json::{json, Value};

use crate::scenario::{Estimation, Point, Scenario};
use crate::RunError;

pub struct PointResult {
    pub n: usize,
    pub l: usize,
    pub bidders: usize,
    pub analysis: Analysis,
    pub estimation: Option<EstimationReport>,
    pub log: Option<ClickLog>,
    pub coverage: Vec<CoverageReport>,
}

/// Seed for sweep point `index`, so points draw independent clicks.
pub fn point_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

pub fn evaluate(point: &Point, mechanism: Mechanism, est: Option<&Estimation>, seed: u64) -> Result<PointResult, RunError> {
    let inst = &point.instance;
    let explore = inst.explore();
    let numeric = |e: exgsp::Error| RunError::Numeric(format!("n = {}, L = {}: {e}", explore.n, explore.explore_slots));
    let analysis = analyze(inst, mechanism).map_err(numeric)?;
    let seed = point_seed(seed, point.index);

    let (mut estimation, mut log, mut coverage) = (None, None, Vec::new());
    if let Some(est) = est {
        if est.phases > 0 {
            let schedule = build_schedule(inst.num_bidders(), inst.num_slots(), explore).map_err(numeric)?;
            let l = simulate_phases(inst, &schedule, est.phases, &point.conversion_rates, seed).map_err(numeric)?;
            estimation =
                Some(estimation_report(inst, &l, est.delta, est.epsilon, &point.conversion_rates, &point.values).map_err(numeric)?);
            log = Some(l);
        }
        if est.trials > 0 {
            let ranks = explore.effective_slots(inst.num_slots()).min(inst.num_bidders());
            for rank in 0..ranks {
                coverage
                    .push(coverage_test(inst, rank, est.delta, est.epsilon, est.trials, seed.wrapping_add(rank as u64)).map_err(numeric)?);
            }
        }
    }
    Ok(PointResult {
        n: explore.n,
        l: explore.explore_slots,
        bidders: inst.num_bidders(),
        analysis,
        estimation,
        log,
        coverage,
    })
}

/// 12 significant digits, shortest form, `.` as separator.
pub fn fmt_num(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

pub const COLUMNS: [&str; 16] = [
    "n",
    "L",
    "R0",
    "R",
    "R_per_impression",
    "rho",
    "c",
    "cou_bound_coarse",
    "cou_bound_refined",
    "E0",
    "E",
    "eff_loss",
    "eff_bound",
    "ordered_eff_bound",
    "U0",
    "U",
];

const ESTIMATE_COLUMNS: [&str; 5] = ["clicks", "conversions", "e_hat", "radius", "v_hat"];

fn metric_values(r: &PointResult) -> Vec<(&'static str, Option<f64>)> {
    let m = &r.analysis.metrics;
    let b = &r.analysis.bounds;
    let eff = b.efficiency.as_ref();
    vec![
        ("R0", Some(m.r0)),
        ("R", Some(m.r)),
        ("R_per_impression", Some(m.r_per_impression)),
        ("rho", Some(m.rho)),
        ("c", Some(b.c)),
        ("cou_bound_coarse", Some(b.cou_bound_coarse)),
        ("cou_bound_refined", Some(b.cou_bound_refined)),
        ("E0", Some(m.e0)),
        ("E", Some(m.e)),
        ("eff_loss", Some(m.efficiency_loss)),
        ("eff_bound", eff.map(|e| e.bound)),
        ("ordered_eff_bound", eff.and_then(|e| e.ordered).map(|o| o.bound)),
        ("U0", Some(m.u0)),
        ("U", Some(m.u)),
    ]
}

/// One row per sweep point. Per-rank estimate columns (`clicks_1`, ...) are
/// appended when any point carries an estimation report.
pub fn write_results_csv<W: Write>(results: &[PointResult], mut out: W) -> io::Result<()> {
    let ranks = results.iter().filter(|r| r.estimation.is_some()).map(|r| r.bidders).max();
    let mut header: Vec<String> = COLUMNS.iter().map(|s| s.to_string()).collect();
    if let Some(ranks) = ranks {
        for rank in 1..=ranks {
            header.extend(ESTIMATE_COLUMNS.iter().map(|c| format!("{c}_{rank}")));
        }
    }
    writeln!(out, "{}", header.join(","))?;
    for r in results {
        let mut row = vec![r.n.to_string(), r.l.to_string()];
        row.extend(metric_values(r).into_iter().map(|(_, v)| opt(v)));
        if let Some(ranks) = ranks {
            for rank in 0..ranks {
                let b = r.estimation.as_ref().and_then(|e| e.bidders.iter().find(|b| b.rank == rank));
                match b {
                    Some(b) => row.extend([
                        b.clicks.to_string(),
                        b.conversions.to_string(),
                        fmt_num(b.relevance_estimate),
                        fmt_num(b.radius),
                        fmt_num(b.valuation_estimate),
                    ]),
                    None => row.extend(std::iter::repeat_n(String::new(), ESTIMATE_COLUMNS.len())),
                }
            }
        }
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Metrics emitted to the plot table: actual values next to their bounds.
pub const PLOT_METRICS: [&str; 6] = [
    "rho",
    "cou_bound_coarse",
    "cou_bound_refined",
    "eff_loss",
    "eff_bound",
    "ordered_eff_bound",
];

/// Long format `n,L,metric,value`; missing values are skipped.
pub fn write_plot_csv<W: Write>(results: &[PointResult], metrics: &[&str], mut out: W) -> io::Result<()> {
    writeln!(out, "n,L,metric,value")?;
    for r in results {
        for (name, value) in metric_values(r) {
            if let (true, Some(v)) = (metrics.contains(&name), value) {
                writeln!(out, "{},{},{name},{}", r.n, r.l, fmt_num(v))?;
            }
        }
    }
    Ok(())
}

fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!(fmt_num(x))
    }
}

fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| num(x)).collect())
}

pub fn summary_json(scenario: &Scenario, seed: u64, results: &[PointResult]) -> Value {
    let points: Vec<Value> = results
        .iter()
        .map(|r| {
            let a = &r.analysis;
            let mut p = json!({
                "n": r.n,
                "L": r.l,
                "effective_ctrs": nums(&a.ctrs),
                "prices": nums(&a.prices),
                "truthful_cou_bound": num(a.bounds.truthful_cou_bound),
                "r0_top": num(a.bounds.r0_top),
                "rho_max_sne": a.metrics.rho_max_sne.map(num),
                "min_sne_bids": a.min_sne.as_ref().map(|b| nums(&b.bids)),
                "max_sne_bids": a.max_sne.as_ref().map(|b| nums(&b.bids)),
            });
            for (name, value) in metric_values(r) {
                p[name] = value.map_or(Value::Null, num);
            }
            if let Some(eff) = &a.bounds.efficiency {
                p["efficiency_bound_parts"] = json!({
                    "E0_explore": num(eff.e0_explore),
                    "E0_non_explore": num(eff.e0_non_explore),
                    "beta": num(eff.beta),
                    "eta": num(eff.eta),
                    "alpha": eff.ordered.map(|o| num(o.alpha)),
                    "omega": eff.ordered.map(|o| num(o.omega)),
                });
            }
            if let Some(est) = &r.estimation {
                p["estimation"] = json!({
                    "phases": est.phases,
                    "delta": est.delta,
                    "epsilon": est.eps,
                    "bidders": est.bidders.iter().map(|b| json!({
                        "rank": b.rank + 1,
                        "bidder": b.id,
                        "clicks": b.clicks,
                        "conversions": b.conversions,
                        "theta": num(b.theta),
                        "e_hat": num(b.relevance_estimate),
                        "radius": num(b.radius),
                        "f_tilde": num(b.updated_self_estimate),
                        "v_hat": num(b.valuation_estimate),
                        "conversion_rate": num(b.conversion_rate),
                        "x_impression": num(b.values.impression),
                        "x_click": num(b.values.click),
                        "x_conversion": num(b.values.conversion),
                    })).collect::<Vec<_>>(),
                });
            }
            if !r.coverage.is_empty() {
                p["coverage"] = Value::Array(
                    r.coverage
                        .iter()
                        .map(|c| {
                            json!({
                                "rank": c.rank + 1,
                                "theta": num(c.theta),
                                "relevance": num(c.relevance),
                                "phases": c.phases,
                                "trials": c.trials,
                                "failures": c.failures,
                                "rate": num(c.rate),
                                "within_epsilon": c.rate <= c.eps,
                            })
                        })
                        .collect(),
                );
            }
            p
        })
        .collect();
    json!({
        "mechanism": scenario.mechanism,
        "seed": seed,
        "bidders": scenario.bidders.len(),
        "points": points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_num(2.0 / 3.0), "0.666666666667");
        assert_eq!(fmt_num(21.2), "21.2");
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(1234567.891234567), "1234567.89123");
        assert_eq!(fmt_num(f64::INFINITY), "inf");
    }

    fn example_results() -> Vec<PointResult> {
        let s = Scenario::example();
        s.points()
            .unwrap()
            .iter()
            .map(|p| evaluate(p, s.mechanism().unwrap(), s.estimation.as_ref(), s.seed).unwrap())
            .collect()
    }

    #[test]
    fn plot_rows_per_metric() {
        let results = example_results();
        let mut out = Vec::new();
        write_plot_csv(&results[1..], &PLOT_METRICS, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 1 + PLOT_METRICS.len());
        assert!(text.contains("3,1,rho,0.725490196078"));
    }

    #[test]
    fn empty_metric_set_is_header_only() {
        let mut out = Vec::new();
        write_plot_csv(&example_results(), &[], &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "n,L,metric,value\n");
    }

    #[test]
    fn results_header_matches_columns() {
        let mut out = Vec::new();
        write_results_csv(&example_results(), &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().next().unwrap(), COLUMNS.join(","));
        assert_eq!(text.lines().count(), 3);
    }
}
