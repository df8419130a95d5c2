//! Symmetric Nash equilibrium (locally envy-free) bid profiles.
//!
//! Every function here works on a one-step position curve given in rank
//! order: the GSP curve `γ` or the effective curve `θ` of the exploratory
//! mechanism, which induces the same game. Bidders past the end of the
//! curve get zero CTR; a missing bidder past `N` contributes `q v = q b = 0`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SneKind {
    Min,
    Max,
    Explicit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BidProfile {
    pub bids: Vec<f64>,
    pub kind: SneKind,
}

impl BidProfile {
    pub fn explicit(bids: Vec<f64>) -> Self {
        BidProfile {
            bids,
            kind: SneKind::Explicit,
        }
    }
}

fn check_inputs(values: &[f64], weights: &[f64]) -> Result<()> {
    if values.len() != weights.len() {
        return Err(Error::LengthMismatch {
            what: "SNE weights",
            expected: values.len(),
            actual: weights.len(),
        });
    }
    if let Some((index, &weight)) = weights.iter().enumerate().find(|(_, &w)| !(w > 0.0)) {
        return Err(Error::NonPositiveWeight { index, weight });
    }
    Ok(())
}

/// Solves the binding half of the SNE chain backwards,
///
/// ```text
/// θ_p q_{p+1} b_{p+1} = (θ_p - θ_{p+1}) w_p + θ_{p+1} q_{p+2} b_{p+2},
/// ```
///
/// where `w_p` is `q v` of rank `p+1` (min) or of rank `p` (max). Unrolled this
/// is `Σ_{j ≥ p} (θ_j - θ_{j+1}) w_j` as long as bidders exist below; a missing
/// bidder bids nothing, which matters for the max profile when `N = K̃`.
fn back_substitute(ctrs: &[f64], values: &[f64], weights: &[f64], upper: bool) -> Result<Vec<f64>> {
    check_inputs(values, weights)?;
    let n = values.len();
    let k = ctrs.len();
    let theta = |p: usize| ctrs.get(p).copied().unwrap_or(0.0);
    let wv = |r: usize| if r < n { weights[r] * values[r] } else { 0.0 };
    let mut bids = values.to_vec();
    for p in (0..k.min(n.saturating_sub(1))).rev() {
        if !(theta(p) > 0.0) {
            return Err(Error::ZeroDenominator {
                what: "position CTR in SNE recursion",
                index: p,
            });
        }
        let w = if upper { wv(p) } else { wv(p + 1) };
        let below = if p + 2 < n {
            theta(p + 1) * weights[p + 2] * bids[p + 2]
        } else {
            0.0
        };
        bids[p + 1] = ((theta(p) - theta(p + 1)) * w + below) / (theta(p) * weights[p + 1]);
    }
    Ok(bids)
}

/// Lowest SNE bids. The top bid is not pinned by the equilibrium and is set
/// to the top value; bidders below rank `K̃ + 1` bid their values.
pub fn min_sne_bids(ctrs: &[f64], values: &[f64], weights: &[f64]) -> Result<BidProfile> {
    Ok(BidProfile {
        bids: back_substitute(ctrs, values, weights, false)?,
        kind: SneKind::Min,
    })
}

/// Highest SNE bids (upper inequality chain held with equality).
pub fn max_sne_bids(ctrs: &[f64], values: &[f64], weights: &[f64]) -> Result<BidProfile> {
    Ok(BidProfile {
        bids: back_substitute(ctrs, values, weights, true)?,
        kind: SneKind::Max,
    })
}

/// Checks, for every rank `i`,
///
/// ```text
/// (θ_i - θ_{i+1}) v_{i+1} q_{i+1} + θ_{i+1} q_{i+2} b_{i+2}
///     ≤ θ_i q_{i+1} b_{i+1}
///     ≤ (θ_i - θ_{i+1}) v_i q_i + θ_{i+1} q_{i+2} b_{i+2}
/// ```
///
/// with additive slack `tol`.
pub fn verify_sne(bids: &[f64], ctrs: &[f64], values: &[f64], weights: &[f64], tol: f64) -> bool {
    let n = values.len();
    if bids.len() != n || weights.len() != n {
        return false;
    }
    let theta = |p: usize| ctrs.get(p).copied().unwrap_or(0.0);
    let wv = |r: usize| if r < n { weights[r] * values[r] } else { 0.0 };
    let wb = |r: usize| if r < n { weights[r] * bids[r] } else { 0.0 };
    (0..n).all(|i| {
        let gap = theta(i) - theta(i + 1);
        let below = theta(i + 1) * wb(i + 2);
        let mid = theta(i) * wb(i + 1);
        gap * wv(i + 1) + below <= mid + tol && mid <= gap * wv(i) + below + tol
    })
}
