//! Sponsored-search auctions that explore: a GSP or laddered auction whose
//! top `L` slots rotate through the top `n` bidders so every one of them
//! gets seen, letting the auctioneer learn relevances.
//!
//! The crate computes effective CTRs of the rotating schedule in closed form
//! (and by brute force, for checking), symmetric Nash equilibrium bids,
//! revenue and efficiency with their loss bounds, truthful laddered prices,
//! and Monte Carlo relevance estimation.
//!
//! All indices in the API are 0-based ranks and slots.

// `!(x > 0.0)` is used on purpose: it rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod effective_ctr;
pub mod equilibrium;
pub mod error;
pub mod estimation;
pub mod mechanisms;
pub mod metrics;
pub mod model;

pub use analysis::{analyze, Analysis, BoundsReport, Mechanism, MetricsReport};
pub use effective_ctr::{
    check_monotone, effective_ctr_matrix, effective_position_ctrs, schedule_oracle_ctr_matrix, schedule_oracle_position_ctrs,
    theta_differences, EffectiveCtrMatrix, EffectiveCurve,
};
pub use equilibrium::{max_sne_bids, min_sne_bids, verify_sne, BidProfile, SneKind};
pub use error::{Error, Result};
pub use estimation::{
    confidence_radius, coverage_test, estimate_relevance, estimate_valuation, estimation_report, required_phases, simulate_phases,
    ClickLog, ClickRecord, CoverageReport, EstimationReport, ValuationInputs, ValueComponents,
};
pub use mechanisms::{
    build_schedule, gsp_prices, laddered_prices, rank_bidders, rank_by_weighted_bid, run_laddered, AllocationSchedule, LadderedOutcome,
    PriceVector,
};
pub use model::{
    validate_instance, AuctionInstance, Bidder, CtrMatrix, CtrModel, ExploreConfig, PositionCurve, ValidationReport, Violation,
};
