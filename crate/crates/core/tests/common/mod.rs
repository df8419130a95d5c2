#![allow(dead_code)]

use exgsp::{AuctionInstance, Bidder, CtrMatrix, CtrModel, ExploreConfig, PositionCurve};
use rand::Rng;

/// Strictly decreasing values in `(0, 1]`.
pub fn decreasing(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    loop {
        let mut xs: Vec<f64> = (0..len).map(|_| rng.gen_range(0.01..=1.0)).collect();
        xs.sort_by(|a, b| b.total_cmp(a));
        if xs.windows(2).all(|w| w[0] - w[1] > 1e-6) {
            return xs;
        }
    }
}

pub fn curve(rng: &mut impl Rng, slots: usize) -> PositionCurve {
    PositionCurve::new(decreasing(rng, slots))
}

pub fn matrix(rng: &mut impl Rng, rows: usize, slots: usize) -> CtrMatrix {
    CtrMatrix::new((0..rows).map(|_| decreasing(rng, slots)).collect())
}

/// Every `(n, L)` with `L ≤ (n-1)/2` and `n ≤ min{K+1, K+L}`.
pub fn safe_configs(slots: usize) -> Vec<ExploreConfig> {
    let mut out = Vec::new();
    for l in 0..=slots {
        for n in (2 * l + 1)..=(slots + 1).min(slots + l) {
            out.push(ExploreConfig::new(n, l));
        }
    }
    out
}

pub fn random_safe_config(rng: &mut impl Rng, slots: usize) -> ExploreConfig {
    let all = safe_configs(slots);
    all[rng.gen_range(0..all.len())]
}

/// Truthful bidders with random values and relevances, listed by `q v`
/// descending. Auctioneer estimates differ from relevances unless `exact`.
pub fn bidders(rng: &mut impl Rng, count: usize, exact: bool) -> Vec<Bidder> {
    let mut bs: Vec<Bidder> = (0..count)
        .map(|id| {
            let v = rng.gen_range(0.1..10.0);
            let e = rng.gen_range(0.05..=1.0);
            let mut b = Bidder::truthful(id, v, e);
            if !exact {
                b.auctioneer_estimate = rng.gen_range(0.05..=1.0);
            }
            b
        })
        .collect();
    bs.sort_by(|a, b| b.rank_score().total_cmp(&a.rank_score()));
    bs
}

pub struct Sizes {
    pub slots: usize,
    pub explore: ExploreConfig,
    pub bidders: usize,
}

pub fn sizes(rng: &mut impl Rng, max_slots: usize) -> Sizes {
    let slots = rng.gen_range(1..=max_slots);
    let explore = random_safe_config(rng, slots);
    let bidders = slots.max(explore.n).max(2) + rng.gen_range(0..=2);
    Sizes { slots, explore, bidders }
}

/// A random SNE-safe separable instance.
pub fn separable_instance(rng: &mut impl Rng, max_slots: usize, exact: bool) -> AuctionInstance {
    let s = sizes(rng, max_slots);
    let curve = curve(rng, s.slots);
    AuctionInstance::new(bidders(rng, s.bidders, exact), curve, s.explore, CtrModel::Separable)
}

/// A random SNE-safe instance with an explicit CTR matrix (rows follow the
/// bidder order) and a placeholder curve of the same length.
pub fn general_instance(rng: &mut impl Rng, max_slots: usize) -> AuctionInstance {
    let s = sizes(rng, max_slots);
    let curve = curve(rng, s.slots);
    let m = matrix(rng, s.bidders, s.slots);
    AuctionInstance::new(bidders(rng, s.bidders, false), curve, s.explore, CtrModel::General(m))
}
