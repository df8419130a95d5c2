//! Ranking, the n-step explore/non-explore allocation, and per-click pricing.

use crate::effective_ctr::EffectiveCtrMatrix;
use crate::error::{Error, Result};
use crate::model::{Bidder, ExploreConfig};

/// Orders bidder indices by `weight * bid`, highest first. Equal scores keep
/// input order.
pub fn rank_by_weighted_bid(bids: &[f64], weights: &[f64]) -> Result<Vec<usize>> {
    if bids.len() != weights.len() {
        return Err(Error::LengthMismatch {
            what: "ranking weights",
            expected: bids.len(),
            actual: weights.len(),
        });
    }
    if let Some((index, &weight)) = weights.iter().enumerate().find(|(_, &w)| !(w > 0.0)) {
        return Err(Error::NonPositiveWeight { index, weight });
    }
    let mut order: Vec<usize> = (0..bids.len()).collect();
    // stable sort keeps the lower index first on ties
    order.sort_by(|&a, &b| {
        let sa = weights[a] * bids[a];
        let sb = weights[b] * bids[b];
        sb.total_cmp(&sa)
    });
    Ok(order)
}

/// Rank-by-revenue ordering with the auctioneer's relevance estimates as weights.
pub fn rank_bidders(bidders: &[Bidder]) -> Result<Vec<usize>> {
    let bids: Vec<f64> = bidders.iter().map(|b| b.bid).collect();
    let weights: Vec<f64> = bidders.iter().map(|b| b.auctioneer_estimate).collect();
    rank_by_weighted_bid(&bids, &weights)
}

/// Which rank sits in which slot at each of the `n` steps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AllocationSchedule {
    bidders: usize,
    slots: usize,
    explore: ExploreConfig,
    /// `steps[t][j]` is the rank shown in slot `j` at step `t`.
    steps: Vec<Vec<Option<usize>>>,
    /// Ranks in the explore slots at each step, in slot order.
    explore_active: Vec<Vec<usize>>,
}

impl AllocationSchedule {
    pub fn steps(&self) -> &[Vec<Option<usize>>] {
        &self.steps
    }

    pub fn step(&self, t: usize) -> &[Option<usize>] {
        &self.steps[t]
    }

    pub fn explore_active(&self, t: usize) -> &[usize] {
        &self.explore_active[t]
    }

    pub fn num_steps(&self) -> usize {
        self.steps.len()
    }

    pub fn num_slots(&self) -> usize {
        self.slots
    }

    pub fn num_bidders(&self) -> usize {
        self.bidders
    }

    pub fn explore(&self) -> ExploreConfig {
        self.explore
    }

    /// Slot held by `rank` at step `t`, if any.
    pub fn slot_of(&self, t: usize, rank: usize) -> Option<usize> {
        self.steps[t].iter().position(|&r| r == Some(rank))
    }

    /// Slots held by `rank` over all steps, `None` where it is not shown.
    pub fn slots_of(&self, rank: usize) -> Vec<Option<usize>> {
        (0..self.num_steps()).map(|t| self.slot_of(t, rank)).collect()
    }
}

/// Builds the cyclic exploration schedule for `bidders` ranked bidders.
///
/// At step `t` the top `n` ranks are rotated left by `t`; the first `L` of that
/// ordering take the explore slots. Everyone else, in rank order, fills slots
/// `L..K`. Slots stay empty when too few bidders remain.
pub fn build_schedule(bidders: usize, slots: usize, explore: ExploreConfig) -> Result<AllocationSchedule> {
    explore.check(slots, bidders)?;
    let n = explore.n;
    let l = explore.explore_slots;
    let mut steps = Vec::with_capacity(n);
    let mut explore_active = Vec::with_capacity(n);
    for t in 0..n {
        let active: Vec<usize> = (0..l).map(|j| (t + j) % n).collect();
        let mut row: Vec<Option<usize>> = active.iter().map(|&r| Some(r)).collect();
        let rest = (0..bidders).filter(|r| !active.contains(r));
        row.extend(rest.take(slots - l).map(Some));
        row.resize(slots, None);
        steps.push(row);
        explore_active.push(active);
    }
    Ok(AllocationSchedule {
        bidders,
        slots,
        explore,
        steps,
        explore_active,
    })
}

/// Per-click prices in rank order.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceVector(pub Vec<f64>);

impl PriceVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, rank: usize) -> f64 {
        self.0.get(rank).copied().unwrap_or(0.0)
    }
}

/// GSP price `q_{i+1} b_{i+1} / q_i` for bidders given in rank order.
pub fn gsp_prices(ranked_bids: &[f64], weights: &[f64]) -> Result<PriceVector> {
    if ranked_bids.len() != weights.len() {
        return Err(Error::LengthMismatch {
            what: "GSP weights",
            expected: ranked_bids.len(),
            actual: weights.len(),
        });
    }
    if let Some((index, &weight)) = weights.iter().enumerate().find(|(_, &w)| !(w > 0.0)) {
        return Err(Error::NonPositiveWeight { index, weight });
    }
    let n = ranked_bids.len();
    let prices = (0..n)
        .map(|i| {
            if i + 1 < n {
                weights[i + 1] * ranked_bids[i + 1] / weights[i]
            } else {
                0.0
            }
        })
        .collect();
    Ok(PriceVector(prices))
}

/// Laddered per-click prices for bidders in rank order.
///
/// `p_i = Σ_{j ≥ i} (c̃_{i,j} - c̃_{i,j+1}) / c̃_{i,i} · q̃_{j+1} b_{j+1} / q̃_i`,
/// where row `i` of `effective` belongs to the bidder ranked `i`. Bidders
/// ranked at or past `K̃` pay nothing. With `n = 1, L = 0` this is the
/// one-step laddered auction.
pub fn laddered_prices(effective: &EffectiveCtrMatrix, weights: &[f64], ranked_bids: &[f64]) -> Result<PriceVector> {
    let n = ranked_bids.len();
    if weights.len() != n {
        return Err(Error::LengthMismatch {
            what: "laddered weights",
            expected: n,
            actual: weights.len(),
        });
    }
    if effective.bidders() != n {
        return Err(Error::LengthMismatch {
            what: "effective CTR rows",
            expected: n,
            actual: effective.bidders(),
        });
    }
    let k_tilde = effective.effective_slots();
    let weighted_bid = |r: usize| if r < n { weights[r] * ranked_bids[r] } else { 0.0 };
    let mut prices = vec![0.0; n];
    for (i, price) in prices.iter_mut().enumerate().take(k_tilde) {
        if !(weights[i] > 0.0) {
            return Err(Error::NonPositiveWeight {
                index: i,
                weight: weights[i],
            });
        }
        let own = effective.at(i, i);
        if !(own > 0.0) {
            return Err(Error::ZeroDenominator {
                what: "effective CTR c̃(i,i)",
                index: i,
            });
        }
        let sum: f64 = (i..k_tilde)
            .map(|j| (effective.at(i, j) - effective.at(i, j + 1)) * weighted_bid(j + 1))
            .sum();
        *price = sum / (own * weights[i]);
    }
    Ok(PriceVector(prices))
}

/// Result of one laddered auction, indexed by the caller's bidder order.
#[derive(Debug, Clone, PartialEq)]
pub struct LadderedOutcome {
    /// `order[r]` is the bidder ranked `r`.
    pub order: Vec<usize>,
    pub rank: Vec<usize>,
    pub price: Vec<f64>,
    /// Effective CTR each bidder receives at its rank.
    pub ctr: Vec<f64>,
}

impl LadderedOutcome {
    /// Expected utility `c̃ (v - p)` of bidder `who` with true value `value`.
    pub fn utility(&self, who: usize, value: f64) -> f64 {
        self.ctr[who] * (value - self.price[who])
    }

    /// Expected payment summed over bidders.
    pub fn revenue(&self) -> f64 {
        self.ctr.iter().zip(&self.price).map(|(c, p)| c * p).sum()
    }
}

/// Runs the (exploratory) laddered auction on unranked bids. Row `i` of
/// `effective` is bidder `i`'s effective CTR curve, independent of rank.
pub fn run_laddered(effective: &EffectiveCtrMatrix, weights: &[f64], bids: &[f64]) -> Result<LadderedOutcome> {
    let order = rank_by_weighted_bid(bids, weights)?;
    let ranked_eff = effective.permuted(&order);
    let ranked_w: Vec<f64> = order.iter().map(|&i| weights[i]).collect();
    let ranked_b: Vec<f64> = order.iter().map(|&i| bids[i]).collect();
    let prices = laddered_prices(&ranked_eff, &ranked_w, &ranked_b)?;
    let n = bids.len();
    let mut rank = vec![0; n];
    let mut price = vec![0.0; n];
    let mut ctr = vec![0.0; n];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
        price[i] = prices.get(r);
        ctr[i] = ranked_eff.at(r, r);
    }
    Ok(LadderedOutcome { order, rank, price, ctr })
}
