//! Domain types shared by the mechanisms, the effective-CTR closed forms and
//! the equilibrium analysis.
//!
//! Ranks and slots are 0-based in every Rust API (`rank 0` is the top bidder,
//! `slot 0` the top position). The 1-based convention only appears in output
//! files and in the formula helpers of [`crate::effective_ctr`].

use std::fmt;

use crate::error::{Error, Result};
use crate::mechanisms::rank_by_weighted_bid;

/// Everything the auction knows about one advertiser.
#[derive(Debug, Clone, PartialEq)]
pub struct Bidder {
    /// Identifier in the caller's original order; kept through ranking.
    pub id: usize,
    /// True value per click, `v`.
    pub value: f64,
    /// True relevance `e`, the click probability once the ad is noticed.
    pub relevance: f64,
    /// Auctioneer's relevance estimate `q`, used as the ranking weight.
    pub auctioneer_estimate: f64,
    /// Bidder's own relevance estimate `f`.
    pub self_estimate: f64,
    /// Submitted bid per click.
    pub bid: f64,
}

impl Bidder {
    /// A bidder whose estimates equal the truth and who bids its value.
    pub fn truthful(id: usize, value: f64, relevance: f64) -> Self {
        Bidder {
            id,
            value,
            relevance,
            auctioneer_estimate: relevance,
            self_estimate: relevance,
            bid: value,
        }
    }

    pub fn rank_score(&self) -> f64 {
        self.auctioneer_estimate * self.bid
    }
}

/// Position click-through rates `γ_1 > γ_2 > … > γ_K > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionCurve {
    gammas: Vec<f64>,
}

impl PositionCurve {
    /// Wraps the rates without checking them; see [`validate_instance`].
    pub fn new(gammas: Vec<f64>) -> Self {
        PositionCurve { gammas }
    }

    /// Number of slots `K`.
    pub fn slots(&self) -> usize {
        self.gammas.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.gammas
    }

    /// 0-based slot CTR, zero past the last slot.
    pub fn at(&self, slot: usize) -> f64 {
        self.gammas.get(slot).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.gammas.iter().sum()
    }

    fn violations(&self, out: &mut Vec<Violation>) {
        if self.gammas.is_empty() {
            out.push(Violation::NoSlots);
        }
        for (j, &g) in self.gammas.iter().enumerate() {
            if !(g > 0.0 && g <= 1.0) {
                out.push(Violation::GammaOutOfRange { slot: j, value: g });
            }
        }
        for (j, w) in self.gammas.windows(2).enumerate() {
            if !(w[0] > w[1]) {
                out.push(Violation::GammaNotDecreasing { slot: j });
            }
        }
    }
}

/// Exploration parameters: `n` explored bidders (and steps) and `L` explore slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExploreConfig {
    pub n: usize,
    pub explore_slots: usize,
}

impl ExploreConfig {
    pub fn new(n: usize, explore_slots: usize) -> Self {
        ExploreConfig { n, explore_slots }
    }

    /// The one-step mechanism without exploration (`n = 1`, `L = 0`).
    pub fn no_exploration() -> Self {
        ExploreConfig::new(1, 0)
    }

    /// Number of ranks with a nonzero effective CTR, `max{K, n}`.
    pub fn effective_slots(&self, slots: usize) -> usize {
        slots.max(self.n)
    }

    /// True when the effective CTRs are guaranteed strictly decreasing:
    /// `n ≤ min{K+1, K+L}` and `L ≤ (n-1)/2`.
    pub fn is_sne_safe(&self, slots: usize) -> bool {
        let l = self.explore_slots;
        self.n >= 1 && self.n <= (slots + 1).min(slots + l) && 2 * l < self.n
    }

    /// Structural checks that every closed form and the schedule need.
    pub fn check(&self, slots: usize, bidders: usize) -> Result<()> {
        self.check_shape(slots, Some(bidders))
    }

    /// Like [`check`](Self::check) when the bidder count is not known yet.
    pub fn check_slots(&self, slots: usize) -> Result<()> {
        self.check_shape(slots, None)
    }

    fn check_shape(&self, slots: usize, bidders: Option<usize>) -> Result<()> {
        let fail = |reason| Error::InvalidConfig {
            n: self.n,
            explore_slots: self.explore_slots,
            slots,
            bidders: bidders.unwrap_or(0),
            reason,
        };
        if self.n == 0 {
            return Err(fail("n must be at least 1"));
        }
        if slots == 0 {
            return Err(fail("at least one slot is required"));
        }
        if self.explore_slots > slots {
            return Err(fail("L must not exceed K"));
        }
        if self.explore_slots > self.n {
            return Err(fail("L must not exceed n"));
        }
        if bidders.is_some_and(|b| self.n > b) {
            return Err(fail("n must not exceed N"));
        }
        Ok(())
    }
}

/// Per-bidder slot CTRs `c[i][j]` for the non-separable model.
///
/// Rows follow the bidder order of the owning [`AuctionInstance`]; entries past
/// the last slot read as zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CtrMatrix {
    rows: Vec<Vec<f64>>,
}

impl CtrMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Self {
        CtrMatrix { rows }
    }

    /// The separable matrix `c[i][j] = γ_j e_i`.
    pub fn separable(curve: &PositionCurve, relevance: &[f64]) -> Self {
        let rows = relevance
            .iter()
            .map(|&e| curve.as_slice().iter().map(|&g| g * e).collect())
            .collect();
        CtrMatrix { rows }
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, bidder: usize) -> &[f64] {
        &self.rows[bidder]
    }

    pub fn bidders(&self) -> usize {
        self.rows.len()
    }

    pub fn slots(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn at(&self, bidder: usize, slot: usize) -> f64 {
        self.rows[bidder].get(slot).copied().unwrap_or(0.0)
    }

    /// Reorders rows with `order[r]` = old index of the row that becomes row `r`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        CtrMatrix {
            rows: order.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    fn violations(&self, bidders: usize, slots: usize, out: &mut Vec<Violation>) {
        if self.rows.len() != bidders {
            out.push(Violation::CtrMatrixShape {
                rows: self.rows.len(),
                expected_rows: bidders,
            });
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != slots {
                out.push(Violation::CtrRowLength {
                    bidder: i,
                    len: row.len(),
                    expected: slots,
                });
            }
            for (j, &c) in row.iter().enumerate() {
                if !(c > 0.0 && c <= 1.0) {
                    out.push(Violation::CtrOutOfRange {
                        bidder: i,
                        slot: j,
                        value: c,
                    });
                }
            }
            for (j, w) in row.windows(2).enumerate() {
                if !(w[0] > w[1]) {
                    out.push(Violation::CtrNotDecreasing { bidder: i, slot: j });
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CtrModel {
    /// `CTR(i, j) = γ_j e_i`.
    Separable,
    /// Explicit per-bidder rows.
    General(CtrMatrix),
}

/// A full game: ranked bidders, slot curve, exploration parameters and CTR model.
#[derive(Debug, Clone, PartialEq)]
pub struct AuctionInstance {
    bidders: Vec<Bidder>,
    curve: PositionCurve,
    explore: ExploreConfig,
    ctr_model: CtrModel,
}

impl AuctionInstance {
    /// Builds an instance from bidders already listed in rank order.
    pub fn new(bidders: Vec<Bidder>, curve: PositionCurve, explore: ExploreConfig, ctr_model: CtrModel) -> Self {
        AuctionInstance {
            bidders,
            curve,
            explore,
            ctr_model,
        }
    }

    /// Ranks `bidders` by `q_i b_i` (ties by input position) and permutes any
    /// CTR matrix rows to match.
    pub fn ranked(bidders: Vec<Bidder>, curve: PositionCurve, explore: ExploreConfig, ctr_model: CtrModel) -> Result<Self> {
        let bids: Vec<f64> = bidders.iter().map(|b| b.bid).collect();
        let weights: Vec<f64> = bidders.iter().map(|b| b.auctioneer_estimate).collect();
        let order = rank_by_weighted_bid(&bids, &weights)?;
        let ranked = order.iter().map(|&i| bidders[i].clone()).collect();
        let ctr_model = match ctr_model {
            CtrModel::Separable => CtrModel::Separable,
            CtrModel::General(m) => {
                if m.bidders() != bidders.len() {
                    return Err(Error::LengthMismatch {
                        what: "CTR matrix rows",
                        expected: bidders.len(),
                        actual: m.bidders(),
                    });
                }
                CtrModel::General(m.permuted(&order))
            }
        };
        Ok(AuctionInstance::new(ranked, curve, explore, ctr_model))
    }

    pub fn bidders(&self) -> &[Bidder] {
        &self.bidders
    }

    pub fn curve(&self) -> &PositionCurve {
        &self.curve
    }

    pub fn explore(&self) -> ExploreConfig {
        self.explore
    }

    pub fn ctr_model(&self) -> &CtrModel {
        &self.ctr_model
    }

    /// Same game with different exploration parameters.
    pub fn with_explore(&self, explore: ExploreConfig) -> Self {
        AuctionInstance { explore, ..self.clone() }
    }

    pub fn num_bidders(&self) -> usize {
        self.bidders.len()
    }

    pub fn num_slots(&self) -> usize {
        self.curve.slots()
    }

    pub fn effective_slots(&self) -> usize {
        self.explore.effective_slots(self.num_slots())
    }

    pub fn values(&self) -> Vec<f64> {
        self.bidders.iter().map(|b| b.value).collect()
    }

    pub fn relevances(&self) -> Vec<f64> {
        self.bidders.iter().map(|b| b.relevance).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.bidders.iter().map(|b| b.auctioneer_estimate).collect()
    }

    pub fn bids(&self) -> Vec<f64> {
        self.bidders.iter().map(|b| b.bid).collect()
    }

    /// The one-step slot CTR matrix in rank order, whichever model is in use.
    pub fn ctr_matrix(&self) -> CtrMatrix {
        match &self.ctr_model {
            CtrModel::Separable => CtrMatrix::separable(&self.curve, &self.relevances()),
            CtrModel::General(m) => m.clone(),
        }
    }

    /// Click probability of the bidder at `rank` when shown in `slot`.
    pub fn click_probability(&self, rank: usize, slot: usize) -> f64 {
        match &self.ctr_model {
            CtrModel::Separable => self.curve.at(slot) * self.bidders[rank].relevance,
            CtrModel::General(m) => m.at(rank, slot),
        }
    }
}

/// One broken structural assumption.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NoSlots,
    GammaOutOfRange { slot: usize, value: f64 },
    GammaNotDecreasing { slot: usize },
    FewerBiddersThanSlots { bidders: usize, slots: usize },
    Config(String),
    Relevance { bidder: usize, value: f64 },
    SelfEstimate { bidder: usize, value: f64 },
    Weight { bidder: usize, value: f64 },
    Value { bidder: usize, value: f64 },
    Bid { bidder: usize, value: f64 },
    NotRanked { rank: usize },
    CtrMatrixShape { rows: usize, expected_rows: usize },
    CtrRowLength { bidder: usize, len: usize, expected: usize },
    CtrOutOfRange { bidder: usize, slot: usize, value: f64 },
    CtrNotDecreasing { bidder: usize, slot: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            NoSlots => write!(f, "gamma: at least one slot is required"),
            GammaOutOfRange { slot, value } => {
                write!(f, "gamma[{}] = {} is not in (0, 1]", slot + 1, value)
            }
            GammaNotDecreasing { slot } => write!(f, "gamma is not strictly decreasing at slots {} and {}", slot + 1, slot + 2),
            FewerBiddersThanSlots { bidders, slots } => {
                write!(f, "N = {bidders} bidders is smaller than K = {slots} slots")
            }
            Config(reason) => write!(f, "explore config: {reason}"),
            Relevance { bidder, value } => {
                write!(f, "bidder {bidder}: relevance {value} is not in (0, 1]")
            }
            SelfEstimate { bidder, value } => {
                write!(f, "bidder {bidder}: self estimate {value} is not in (0, 1]")
            }
            Weight { bidder, value } => {
                write!(f, "bidder {bidder}: auctioneer estimate {value} must be positive")
            }
            Value { bidder, value } => write!(f, "bidder {bidder}: value {value} is negative"),
            Bid { bidder, value } => write!(f, "bidder {bidder}: bid {value} is negative"),
            NotRanked { rank } => write!(f, "bidders are not sorted by q*b at ranks {} and {}", rank + 1, rank + 2),
            CtrMatrixShape { rows, expected_rows } => write!(f, "ctr matrix has {rows} rows, expected {expected_rows}"),
            CtrRowLength { bidder, len, expected } => write!(f, "ctr row {bidder} has {len} entries, expected {expected}"),
            CtrOutOfRange { bidder, slot, value } => write!(f, "ctr[{bidder}][{}] = {value} is not in (0, 1]", slot + 1),
            CtrNotDecreasing { bidder, slot } => write!(
                f,
                "ctr row {bidder} is not strictly decreasing at slots {} and {}",
                slot + 1,
                slot + 2
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub sne_safe: bool,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

fn in_unit(x: f64) -> bool {
    x > 0.0 && x <= 1.0
}

/// Lists every violated assumption of `inst`; never fails.
pub fn validate_instance(inst: &AuctionInstance) -> ValidationReport {
    let mut violations = Vec::new();
    let k = inst.num_slots();
    let n_bidders = inst.num_bidders();
    inst.curve.violations(&mut violations);
    if n_bidders < k {
        violations.push(Violation::FewerBiddersThanSlots {
            bidders: n_bidders,
            slots: k,
        });
    }
    if let Err(Error::InvalidConfig { reason, .. }) = inst.explore.check(k, n_bidders) {
        violations.push(Violation::Config(reason.to_string()));
    }
    for (i, b) in inst.bidders.iter().enumerate() {
        if !in_unit(b.relevance) {
            violations.push(Violation::Relevance {
                bidder: i,
                value: b.relevance,
            });
        }
        if !in_unit(b.self_estimate) {
            violations.push(Violation::SelfEstimate {
                bidder: i,
                value: b.self_estimate,
            });
        }
        if !(b.auctioneer_estimate > 0.0 && b.auctioneer_estimate.is_finite()) {
            violations.push(Violation::Weight {
                bidder: i,
                value: b.auctioneer_estimate,
            });
        }
        if !(b.value >= 0.0 && b.value.is_finite()) {
            violations.push(Violation::Value { bidder: i, value: b.value });
        }
        if !(b.bid >= 0.0 && b.bid.is_finite()) {
            violations.push(Violation::Bid { bidder: i, value: b.bid });
        }
    }
    for (r, w) in inst.bidders.windows(2).enumerate() {
        if w[0].rank_score() < w[1].rank_score() {
            violations.push(Violation::NotRanked { rank: r });
        }
    }
    if let CtrModel::General(m) = &inst.ctr_model {
        m.violations(n_bidders, k, &mut violations);
    }
    ValidationReport {
        violations,
        sne_safe: inst.explore.is_sne_safe(k),
    }
}
