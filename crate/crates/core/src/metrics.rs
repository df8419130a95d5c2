//! Revenue, cost of uncertainty, efficiency and user experience, with the
//! analytic upper bounds on the revenue and efficiency lost to exploration.
//!
//! Revenue formulas evaluate the minimum SNE in closed form: bidder `s` pays
//! `(e_s / q_s) Σ_{j ≥ s} (θ_j - θ_{j+1}) q_{j+1} v_{j+1}` in expectation.

use crate::effective_ctr::run;
use crate::error::{Error, Result};
use crate::model::{CtrMatrix, ExploreConfig, PositionCurve};

fn get(xs: &[f64], i: usize) -> f64 {
    xs.get(i).copied().unwrap_or(0.0)
}

/// Expected payment of each ranked bidder at the minimum SNE of the one-step
/// game with position curve `ctrs` (`γ` or `θ`).
pub fn revenue_by_rank(ctrs: &[f64], relevance: &[f64], weights: &[f64], values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let k = ctrs.len();
    let wv = |r: usize| if r < n { weights[r] * values[r] } else { 0.0 };
    let mut tails = vec![0.0; k + 1];
    for j in (0..k).rev() {
        tails[j] = tails[j + 1] + (get(ctrs, j) - get(ctrs, j + 1)) * wv(j + 1);
    }
    (0..n)
        .map(|s| if s < k { relevance[s] / weights[s] * tails[s] } else { 0.0 })
        .collect()
}

/// Total expected revenue at the minimum SNE.
pub fn expected_revenue(ctrs: &[f64], relevance: &[f64], weights: &[f64], values: &[f64]) -> f64 {
    revenue_by_rank(ctrs, relevance, weights, values).iter().sum()
}

/// Revenue from the top `top` bidders.
pub fn top_revenue(ctrs: &[f64], relevance: &[f64], weights: &[f64], values: &[f64], top: usize) -> f64 {
    revenue_by_rank(ctrs, relevance, weights, values).iter().take(top).sum()
}

/// `Σ_i ctr_i e_i p_i` for per-click prices in rank order.
pub fn revenue_from_prices(ctrs: &[f64], relevance: &[f64], prices: &[f64]) -> f64 {
    prices.iter().enumerate().map(|(i, p)| get(ctrs, i) * relevance[i] * p).sum()
}

/// Relative per-impression revenue loss `(R0 - R/n) / R0`. Negative when
/// exploration raises revenue.
pub fn cost_of_uncertainty(r0: f64, r: f64, n: usize) -> Result<f64> {
    if !(r0 > 0.0) {
        return Err(Error::out_of_range("R0", r0, "R0 > 0"));
    }
    if n == 0 {
        return Err(Error::out_of_range("n", 0.0, "n >= 1"));
    }
    Ok((r0 - r / n as f64) / r0)
}

/// Constant `c = min_{1 ≤ j < n-L} (γ_{j+L} - γ_{j+1+L}) / (γ_j - γ_{j+1})`.
///
/// Terms with `γ_j = γ_{j+1} = 0` (past the last slot) are skipped; an empty
/// range yields `+∞`.
pub fn ratio_constant(curve: &PositionCurve, explore: ExploreConfig) -> f64 {
    row_ratio_constant(|j| curve.at(j - 1), 1, explore)
}

fn row_ratio_constant<F: Fn(usize) -> f64>(ctr: F, first: usize, explore: ExploreConfig) -> f64 {
    let l = explore.explore_slots;
    let end = explore.n.saturating_sub(l);
    (first..end)
        .filter_map(|j| {
            let den = ctr(j) - ctr(j + 1);
            (den != 0.0).then(|| (ctr(j + l) - ctr(j + l + 1)) / den)
        })
        .fold(f64::INFINITY, f64::min)
}

/// `1 - min{1, c} (1 - 2L/n)`.
pub fn coarse_bound(c: f64, explore: ExploreConfig) -> f64 {
    let shrink = 1.0 - 2.0 * explore.explore_slots as f64 / explore.n as f64;
    1.0 - c.min(1.0) * shrink
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouBound {
    pub c: f64,
    /// `1 - min{1,c}(1 - 2L/n)`.
    pub coarse: f64,
    /// `coarse · R0^{min{n,K}} / R0`.
    pub refined: f64,
}

/// Upper bound on the cost of uncertainty at minimum SNE. `r0_top` is the
/// GSP revenue from the top `min{n, K}` bidders.
pub fn cou_bound(curve: &PositionCurve, explore: ExploreConfig, r0_top: f64, r0: f64) -> Result<CouBound> {
    explore.check_slots(curve.slots())?;
    if !(r0 > 0.0) {
        return Err(Error::out_of_range("R0", r0, "R0 > 0"));
    }
    let c = ratio_constant(curve, explore);
    let coarse = coarse_bound(c, explore);
    Ok(CouBound {
        c,
        coarse,
        refined: coarse * r0_top / r0,
    })
}

/// Constant for the truthful implementation: the row-wise ratio minimized
/// over rows `i ≤ min{n, K}` and `i ≤ j < n - L`.
pub fn truthful_ratio_constant(ctrs: &CtrMatrix, explore: ExploreConfig) -> f64 {
    let rows = explore.n.min(ctrs.slots()).min(ctrs.bidders());
    (1..=rows)
        .map(|i| row_ratio_constant(|j| ctrs.at(i - 1, j - 1), i, explore))
        .fold(f64::INFINITY, f64::min)
}

/// Upper bound on the cost of uncertainty of the exploratory laddered auction.
pub fn cou_bound_truthful(ctrs: &CtrMatrix, explore: ExploreConfig) -> Result<CouBound> {
    explore.check_slots(ctrs.slots())?;
    let c = truthful_ratio_constant(ctrs, explore);
    let coarse = coarse_bound(c, explore);
    Ok(CouBound {
        c,
        coarse,
        refined: coarse,
    })
}

/// `Σ_m ctr_m e_m v_m` over ranks holding a nonzero CTR.
pub fn efficiency(ctrs: &[f64], relevance: &[f64], values: &[f64]) -> f64 {
    ctrs.iter().zip(relevance.iter().zip(values)).map(|(c, (e, v))| c * e * v).sum()
}

/// Total clickability `Σ_m ctr_m e_m`.
pub fn user_experience(ctrs: &[f64], relevance: &[f64]) -> f64 {
    ctrs.iter().zip(relevance).map(|(c, e)| c * e).sum()
}

/// `(E0 - E/n) / E0`.
pub fn efficiency_loss(e0: f64, e: f64, n: usize) -> Result<f64> {
    if !(e0 > 0.0) {
        return Err(Error::out_of_range("E0", e0, "E0 > 0"));
    }
    Ok((e0 - e / n as f64) / e0)
}

/// Weights `y_1..y_K` with `E = Σ_m γ_m y_m`: `y_m` collects `e v` of every
/// bidder shown in slot `m` across the `n` steps.
pub fn y_decomposition(curve: &PositionCurve, relevance: &[f64], values: &[f64], explore: ExploreConfig) -> Result<Vec<f64>> {
    explore.check_slots(curve.slots())?;
    let n = explore.n;
    let l = explore.explore_slots;
    let nb = values.len();
    let ev = |i: usize| if i >= 1 && i <= nb { relevance[i - 1] * values[i - 1] } else { 0.0 };
    let explored: f64 = (1..=n).map(ev).sum();
    let y = (1..=curve.slots())
        .map(|m| {
            if m <= l {
                explored
            } else if m <= n {
                let (mf, nf, lf) = (m as f64, n as f64, l as f64);
                (nf - mf + 1.0) * ev(m - l) + run(&ev, m - l + 1, m as isize - 1) + (mf - lf) * ev(m)
            } else {
                n as f64 * ev(m)
            }
        })
        .collect();
    Ok(y)
}

/// Tighter bound when `e_m v_m` is non-increasing over the explored ranks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderedEfficiencyBound {
    pub alpha: f64,
    pub omega: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfficiencyBounds {
    /// `E0^e = Σ_{m ≤ L} γ_m e_m v_m`.
    pub e0_explore: f64,
    /// `E0^{ne} = Σ_{L < m ≤ n} γ_m e_m v_m`.
    pub e0_non_explore: f64,
    pub beta: f64,
    pub eta: f64,
    /// `(1-β) E0^e/E0 + η E0^{ne}/E0`.
    pub bound: f64,
    pub ordered: Option<OrderedEfficiencyBound>,
}

/// Upper bounds on the per-impression efficiency loss. Needs `e_m v_m > 0`
/// for every explored rank.
pub fn efficiency_loss_bound(curve: &PositionCurve, relevance: &[f64], values: &[f64], explore: ExploreConfig) -> Result<EfficiencyBounds> {
    explore.check(curve.slots(), values.len())?;
    let n = explore.n;
    let l = explore.explore_slots;
    let ev: Vec<f64> = relevance.iter().zip(values).map(|(e, v)| e * v).collect();
    if let Some(i) = ev.iter().take(n).position(|&x| !(x > 0.0)) {
        return Err(Error::ZeroDenominator {
            what: "e*v of an explored bidder",
            index: i,
        });
    }
    let e0 = efficiency(curve.as_slice(), relevance, values);
    if !(e0 > 0.0) {
        return Err(Error::out_of_range("E0", e0, "E0 > 0"));
    }
    let weighted = |m: usize| curve.at(m) * ev[m];
    let e0_explore: f64 = (0..l).map(weighted).sum();
    let e0_non_explore: f64 = (l..n).map(weighted).sum();
    let mean_explored = ev[..n].iter().sum::<f64>() / n as f64;

    // β = 1 when L = 0; its term is multiplied by E0^e = 0 then
    let beta = ev[..l].iter().copied().reduce(f64::max).map_or(1.0, |top| mean_explored / top);
    let eta = (l..n)
        .flat_map(|m| (m - l..=m).map(move |i| (i, m)))
        .map(|(i, m)| 1.0 - ev[i] / ev[m])
        .fold(0.0, f64::max);
    let bound = (1.0 - beta) * e0_explore / e0 + eta * e0_non_explore / e0;

    let ordered = ev[..n].windows(2).all(|w| w[0] >= w[1]).then(|| {
        let alpha = mean_explored / ev[0];
        let omega = (l.max(1)..n).map(|m| ev[m - 1] / ev[m] - 1.0).reduce(f64::min).unwrap_or(0.0);
        let lf = l as f64 / n as f64;
        OrderedEfficiencyBound {
            alpha,
            omega,
            bound: (1.0 - alpha) * e0_explore / e0 - lf * omega * e0_non_explore / e0,
        }
    });

    Ok(EfficiencyBounds {
        e0_explore,
        e0_non_explore,
        beta,
        eta,
        bound,
        ordered,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const GAMMA: [f64; 3] = [0.6, 0.3, 0.1];
    const THETA: [f64; 3] = [1.2, 1.0, 0.8];
    const V: [f64; 3] = [10.0, 6.0, 4.0];
    const ONES: [f64; 3] = [1.0; 3];

    fn curve() -> PositionCurve {
        PositionCurve::new(GAMMA.to_vec())
    }

    #[test]
    fn gsp_revenue_two_slots() {
        // payments 5 and 2
        let r0 = expected_revenue(&[1.0, 0.5], &ONES, &ONES, &V);
        assert!((r0 - 7.0).abs() < 1e-12);
    }

    #[test]
    fn running_example_revenues() {
        let r0 = expected_revenue(&GAMMA, &ONES, &ONES, &V);
        let r = expected_revenue(&THETA, &ONES, &ONES, &V);
        assert!((r0 - 3.4).abs() < 1e-12);
        assert!((r - 2.8).abs() < 1e-12);
        let rho = cost_of_uncertainty(r0, r, 3).unwrap();
        assert!((rho - (3.4 - 2.8 / 3.0) / 3.4).abs() < 1e-12);
        assert!((rho - 0.72549).abs() < 1e-5);
    }

    #[test]
    fn cost_of_uncertainty_identities() {
        assert_eq!(cost_of_uncertainty(2.0, 6.0, 3).unwrap(), 0.0);
        assert_eq!(cost_of_uncertainty(2.0, 2.0, 1).unwrap(), 0.0);
        assert!(cost_of_uncertainty(0.0, 1.0, 1).is_err());
    }

    #[test]
    fn running_example_cou_bound() {
        let b = cou_bound(&curve(), ExploreConfig::new(3, 1), 3.4, 3.4).unwrap();
        assert!((b.c - 2.0 / 3.0).abs() < 1e-12);
        assert!((b.coarse - 7.0 / 9.0).abs() < 1e-12);
        assert!((b.refined - 7.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn cou_bound_is_zero_without_exploration_when_c_at_least_one() {
        let flat = PositionCurve::new(vec![0.4, 0.3, 0.2, 0.1]);
        let b = cou_bound(&flat, ExploreConfig::new(3, 0), 1.0, 1.0).unwrap();
        assert!((b.c - 1.0).abs() < 1e-12);
        assert!(b.coarse.abs() < 1e-12);
    }

    #[test]
    fn geometric_curve_keeps_slack_at_l_zero() {
        let geo = PositionCurve::new(vec![0.8, 0.4, 0.2, 0.1]);
        let b = cou_bound(&geo, ExploreConfig::new(3, 0), 1.0, 1.0).unwrap();
        assert_eq!(b.c, 1.0);
        let geo = PositionCurve::new(vec![0.8, 0.4, 0.2, 0.1]);
        let c = ratio_constant(&geo, ExploreConfig::new(4, 1));
        assert!((c - 0.5).abs() < 1e-12);
        assert!(coarse_bound(c, ExploreConfig::new(4, 1)) > 0.0);
    }

    #[test]
    fn empty_ratio_range_is_infinite() {
        assert_eq!(ratio_constant(&curve(), ExploreConfig::no_exploration()), f64::INFINITY);
        assert_eq!(coarse_bound(f64::INFINITY, ExploreConfig::no_exploration()), 0.0);
    }

    #[test]
    fn truthful_constant_separable_matches() {
        let m = CtrMatrix::separable(&curve(), &[1.0, 0.7, 0.4]);
        let cfg = ExploreConfig::new(3, 1);
        let t = cou_bound_truthful(&m, cfg).unwrap();
        assert!((t.c - ratio_constant(&curve(), cfg)).abs() < 1e-12);
        assert!((t.coarse - 7.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn truthful_constant_non_separable_example() {
        let m = CtrMatrix::new(vec![vec![0.6, 0.3, 0.1], vec![0.5, 0.3, 0.15], vec![0.4, 0.25, 0.1]]);
        let t = cou_bound_truthful(&m, ExploreConfig::new(3, 1)).unwrap();
        assert!((t.c - 2.0 / 3.0).abs() < 1e-12);
        assert!((t.coarse - 7.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn truthful_bound_zero_without_exploration() {
        let m = CtrMatrix::new(vec![vec![0.4, 0.3, 0.2, 0.1], vec![0.5, 0.4, 0.3, 0.2]]);
        let t = cou_bound_truthful(&m, ExploreConfig::new(2, 0)).unwrap();
        assert!(t.coarse.abs() < 1e-12);
    }

    #[test]
    fn running_example_efficiency() {
        let e0 = efficiency(&GAMMA, &ONES, &V);
        let e = efficiency(&THETA, &ONES, &V);
        assert!((e0 - 8.2).abs() < 1e-12);
        assert!((e - 21.2).abs() < 1e-12);
        let y = y_decomposition(&curve(), &ONES, &V, ExploreConfig::new(3, 1)).unwrap();
        assert_eq!(y, vec![20.0, 26.0, 14.0]);
        let via_y: f64 = GAMMA.iter().zip(&y).map(|(g, y)| g * y).sum();
        assert!((via_y - e).abs() < 1e-12);
        let loss = efficiency_loss(e0, e, 3).unwrap();
        assert!((loss - 0.13821).abs() < 1e-5);
    }

    #[test]
    fn y_decomposition_without_exploration() {
        let y = y_decomposition(&curve(), &ONES, &V, ExploreConfig::new(3, 0)).unwrap();
        assert_eq!(y, vec![30.0, 18.0, 12.0]);
    }

    #[test]
    fn user_experience_is_unit_value_efficiency() {
        assert_eq!(user_experience(&THETA, &ONES), efficiency(&THETA, &ONES, &ONES));
    }

    #[test]
    fn running_example_efficiency_bounds() {
        let b = efficiency_loss_bound(&curve(), &ONES, &V, ExploreConfig::new(3, 1)).unwrap();
        assert!((b.beta - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(b.eta, 0.0);
        assert!((b.e0_explore - 6.0).abs() < 1e-12);
        assert!((b.e0_non_explore - 2.2).abs() < 1e-12);
        assert!((b.bound - 0.24390).abs() < 1e-5);
        let o = b.ordered.unwrap();
        assert!((o.alpha - 2.0 / 3.0).abs() < 1e-12);
        assert!((o.omega - 0.5).abs() < 1e-12);
        assert!((o.bound - 0.19919).abs() < 1e-5);
    }

    #[test]
    fn efficiency_bound_zero_without_exploration() {
        let b = efficiency_loss_bound(&curve(), &ONES, &V, ExploreConfig::new(3, 0)).unwrap();
        assert_eq!(b.bound, 0.0);
        assert_eq!(b.e0_explore, 0.0);
        assert_eq!(b.ordered.unwrap().bound, 0.0);
    }

    #[test]
    fn unordered_values_have_no_ordered_bound() {
        let v = [10.0, 4.0, 6.0];
        let b = efficiency_loss_bound(&curve(), &ONES, &v, ExploreConfig::new(3, 1)).unwrap();
        assert!(b.ordered.is_none());
        assert!(b.eta > 0.0);
    }

    #[test]
    fn zero_value_explored_bidder_is_an_error() {
        let v = [10.0, 0.0, 6.0];
        assert!(efficiency_loss_bound(&curve(), &ONES, &v, ExploreConfig::new(3, 1)).is_err());
    }
}
