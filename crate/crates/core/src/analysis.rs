//! One-call evaluation of a mechanism on an instance: equilibrium bids,
//! revenue, efficiency, user experience and every bound, next to the
//! no-exploration baseline.
//!
//! Bidders are taken in the instance's rank order, which for the SNE
//! analysis should be the `q v` order.

use crate::effective_ctr::{effective_ctr_matrix, effective_position_ctrs};
use crate::equilibrium::{max_sne_bids, min_sne_bids, BidProfile};
use crate::error::{Error, Result};
use crate::mechanisms::{gsp_prices, run_laddered};
use crate::metrics::{
    cost_of_uncertainty, cou_bound, cou_bound_truthful, efficiency, efficiency_loss, efficiency_loss_bound, expected_revenue,
    revenue_from_prices, top_revenue, user_experience, EfficiencyBounds,
};
use crate::model::{AuctionInstance, CtrModel, ExploreConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mechanism {
    Gsp,
    ExpGsp,
    Laddered,
    ExpLaddered,
}

impl Mechanism {
    pub fn explores(self) -> bool {
        matches!(self, Mechanism::ExpGsp | Mechanism::ExpLaddered)
    }

    pub fn is_laddered(self) -> bool {
        matches!(self, Mechanism::Laddered | Mechanism::ExpLaddered)
    }

    pub fn name(self) -> &'static str {
        match self {
            Mechanism::Gsp => "gsp",
            Mechanism::ExpGsp => "exp-gsp",
            Mechanism::Laddered => "laddered",
            Mechanism::ExpLaddered => "exp-laddered",
        }
    }
}

impl std::str::FromStr for Mechanism {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "gsp" => Ok(Mechanism::Gsp),
            "exp-gsp" => Ok(Mechanism::ExpGsp),
            "laddered" => Ok(Mechanism::Laddered),
            "exp-laddered" => Ok(Mechanism::ExpLaddered),
            other => Err(format!(
                "unknown mechanism {other:?} (expected gsp, exp-gsp, laddered or exp-laddered)"
            )),
        }
    }
}

/// Revenue, efficiency and user experience with and without exploration.
/// `r` and `e`, `u` sum over the `n` steps of one phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub r0: f64,
    pub r: f64,
    pub r_per_impression: f64,
    pub rho: f64,
    /// Cost of uncertainty at the maximum SNE, for information only.
    pub rho_max_sne: Option<f64>,
    pub e0: f64,
    pub e: f64,
    pub efficiency_loss: f64,
    pub u0: f64,
    pub u: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsReport {
    pub c: f64,
    pub cou_bound_coarse: f64,
    pub cou_bound_refined: f64,
    /// `R0^{min{n,K}}`: baseline revenue from the top `min{n, K}` ranks.
    pub r0_top: f64,
    /// Separable model with `e v > 0` on the explored ranks only.
    pub efficiency: Option<EfficiencyBounds>,
    pub truthful_cou_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub mechanism: Mechanism,
    pub explore: ExploreConfig,
    /// Effective CTR each rank receives over one phase.
    pub ctrs: Vec<f64>,
    pub min_sne: Option<BidProfile>,
    pub max_sne: Option<BidProfile>,
    /// Per-click prices by rank at the evaluated bids.
    pub prices: Vec<f64>,
    pub metrics: MetricsReport,
    pub bounds: BoundsReport,
}

fn check_safe(inst: &AuctionInstance, explore: ExploreConfig) -> Result<()> {
    explore.check(inst.num_slots(), inst.num_bidders())?;
    if !explore.is_sne_safe(inst.num_slots()) {
        return Err(Error::InvalidConfig {
            n: explore.n,
            explore_slots: explore.explore_slots,
            slots: inst.num_slots(),
            bidders: inst.num_bidders(),
            reason: "needs n <= min{K+1, K+L} and L <= (n-1)/2",
        });
    }
    Ok(())
}

/// Evaluates `mechanism` on `inst`. The non-exploring mechanisms ignore the
/// instance's explore parameters and use `n = 1`, `L = 0`.
pub fn analyze(inst: &AuctionInstance, mechanism: Mechanism) -> Result<Analysis> {
    let explore = if mechanism.explores() {
        inst.explore()
    } else {
        ExploreConfig::no_exploration()
    };
    check_safe(inst, explore)?;
    if mechanism.is_laddered() {
        analyze_laddered(inst, explore, mechanism)
    } else {
        analyze_gsp(inst, explore, mechanism)
    }
}

fn sne_revenue(ctrs: &[f64], relevance: &[f64], weights: &[f64], bids: &[f64]) -> Result<f64> {
    let prices = gsp_prices(bids, weights)?;
    Ok(revenue_from_prices(ctrs, relevance, prices.as_slice()))
}

fn analyze_gsp(inst: &AuctionInstance, explore: ExploreConfig, mechanism: Mechanism) -> Result<Analysis> {
    if !matches!(inst.ctr_model(), CtrModel::Separable) {
        return Err(Error::Unsupported("GSP pricing is only analysed for the separable CTR model"));
    }
    let curve = inst.curve();
    let gamma = curve.as_slice();
    let theta = effective_position_ctrs(curve, explore)?.thetas().to_vec();
    let (e, q, v) = (inst.relevances(), inst.weights(), inst.values());

    let min = min_sne_bids(&theta, &v, &q)?;
    let max = max_sne_bids(&theta, &v, &q)?;
    let prices = gsp_prices(&min.bids, &q)?.0;

    let r0 = expected_revenue(gamma, &e, &q, &v);
    let r = expected_revenue(&theta, &e, &q, &v);
    let n = explore.n;
    let rho = cost_of_uncertainty(r0, r, n)?;
    let r0_max = sne_revenue(gamma, &e, &q, &max_sne_bids(gamma, &v, &q)?.bids)?;
    let r_max = sne_revenue(&theta, &e, &q, &max.bids)?;
    let rho_max_sne = cost_of_uncertainty(r0_max, r_max, n).ok();

    let e0 = efficiency(gamma, &e, &v);
    let eff = efficiency(&theta, &e, &v);
    let metrics = MetricsReport {
        r0,
        r,
        r_per_impression: r / n as f64,
        rho,
        rho_max_sne,
        e0,
        e: eff,
        efficiency_loss: efficiency_loss(e0, eff, n)?,
        u0: user_experience(gamma, &e),
        u: user_experience(&theta, &e),
    };

    let r0_top = top_revenue(gamma, &e, &q, &v, n.min(inst.num_slots()));
    let cou = cou_bound(curve, explore, r0_top, r0)?;
    let bounds = BoundsReport {
        c: cou.c,
        cou_bound_coarse: cou.coarse,
        cou_bound_refined: cou.refined,
        r0_top,
        efficiency: efficiency_loss_bound(curve, &e, &v, explore).ok(),
        truthful_cou_bound: cou_bound_truthful(&inst.ctr_matrix(), explore)?.coarse,
    };

    Ok(Analysis {
        mechanism,
        explore,
        ctrs: theta,
        min_sne: Some(min),
        max_sne: Some(max),
        prices,
        metrics,
        bounds,
    })
}

/// Truthful bids `b = v`, ranked by `q v`.
fn analyze_laddered(inst: &AuctionInstance, explore: ExploreConfig, mechanism: Mechanism) -> Result<Analysis> {
    let (e, q, v) = (inst.relevances(), inst.weights(), inst.values());
    let one_step = inst.ctr_matrix();
    let baseline = run_laddered(&effective_ctr_matrix(&one_step, ExploreConfig::no_exploration())?, &q, &v)?;
    let outcome = run_laddered(&effective_ctr_matrix(&one_step, explore)?, &q, &v)?;

    let ranked = |xs: &[f64]| outcome.order.iter().map(|&i| xs[i]).collect::<Vec<f64>>();
    let ctrs = ranked(&outcome.ctr);
    let prices = ranked(&outcome.price);
    let vr = ranked(&v);
    let er = ranked(&e);

    let n = explore.n;
    let r0 = baseline.revenue();
    let r = outcome.revenue();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let e0 = dot(&baseline.ctr, &v);
    let eff = dot(&outcome.ctr, &v);
    let metrics = MetricsReport {
        r0,
        r,
        r_per_impression: r / n as f64,
        rho: cost_of_uncertainty(r0, r, n)?,
        rho_max_sne: None,
        e0,
        e: eff,
        efficiency_loss: efficiency_loss(e0, eff, n)?,
        u0: baseline.ctr.iter().sum(),
        u: outcome.ctr.iter().sum(),
    };

    let top = n.min(inst.num_slots());
    let r0_top: f64 = baseline.order.iter().take(top).map(|&i| baseline.ctr[i] * baseline.price[i]).sum();
    let truthful = cou_bound_truthful(&one_step.permuted(&outcome.order), explore)?;
    let efficiency = match inst.ctr_model() {
        CtrModel::Separable => efficiency_loss_bound(inst.curve(), &er, &vr, explore).ok(),
        CtrModel::General(_) => None,
    };
    let bounds = BoundsReport {
        c: truthful.c,
        cou_bound_coarse: truthful.coarse,
        cou_bound_refined: truthful.refined,
        r0_top,
        efficiency,
        truthful_cou_bound: truthful.coarse,
    };

    Ok(Analysis {
        mechanism,
        explore,
        ctrs,
        min_sne: None,
        max_sne: None,
        prices,
        metrics,
        bounds,
    })
}
