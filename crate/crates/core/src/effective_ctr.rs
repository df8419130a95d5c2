//! Effective click-through rates over the `n` steps of the exploratory
//! mechanism.
//!
//! The effective CTR of rank `m` is the total CTR a bidder ranked `m`
//! collects across the `n` steps. It splits into the explore part
//! `γ = Σ_{j ≤ L} γ_j` (every explored bidder visits each explore slot once)
//! and a non-explore part `d_m`:
//!
//! ```text
//! θ_m = γ + d_m      m ≤ n
//!     = n γ_m        m > n
//!
//! d_m = (n-L-m+1) γ_{L+m} + γ_{L+1} + … + γ_{L+m-1}              m < L
//!     = (m-L) γ_m + γ_{m+1} + … + γ_{m+L-1} + (n-m-L+1) γ_{m+L}    L ≤ m ≤ n-L
//!     = (m-L) γ_m + γ_{m+1} + … + γ_n                              m > n-L
//! ```
//!
//! All indices in the formulas above are 1-based and `γ_j = 0` for `j > K`.
//! The general model replaces `γ_j` with the bidder's own row `c_{i,j}`.

use crate::error::{Error, Result};
use crate::mechanisms::AllocationSchedule;
use crate::model::{CtrMatrix, ExploreConfig, PositionCurve};

/// One effective curve: `values[m-1] = γ + d_m` (or `n γ_m`) for `m ≤ K̃`.
#[derive(Debug, Clone, PartialEq)]
struct EffectiveRow {
    explore_total: f64,
    non_explore: Vec<f64>,
    values: Vec<f64>,
}

/// Sum of `ctr(j)` over the 1-based run `from..=to`. A run of length -1
/// (`to = from - 2`) subtracts the slot in between: with `L = 0` the middle
/// branch's inner run is `γ_{m+1..m-1}` and slot `m+L` is slot `m` itself.
pub(crate) fn run<F: Fn(usize) -> f64>(ctr: &F, from: usize, to: isize) -> f64 {
    let from_i = from as isize;
    if to >= from_i {
        (from..=to as usize).map(ctr).sum()
    } else if to == from_i - 2 {
        -ctr(from - 1)
    } else {
        0.0
    }
}

fn non_explore_share<F: Fn(usize) -> f64>(ctr: &F, m: usize, n: usize, l: usize) -> f64 {
    let (mf, nf, lf) = (m as f64, n as f64, l as f64);
    let first = || (nf - lf - (mf - 1.0)) * ctr(l + m) + run(ctr, l + 1, (l + m) as isize - 1);
    let middle = || (mf - lf) * ctr(m) + run(ctr, m + 1, (m + l) as isize - 1) + (nf - mf - lf + 1.0) * ctr(m + l);
    let last = || (mf - lf) * ctr(m) + run(ctr, m + 1, n as isize);
    if l <= m && m + l <= n {
        let value = middle();
        debug_assert!(m != l || l == 0 || (value - first()).abs() <= 1e-9 * (1.0 + value.abs()));
        debug_assert!(m + l != n || (value - last()).abs() <= 1e-9 * (1.0 + value.abs()));
        value
    } else if m < l {
        first()
    } else {
        last()
    }
}

fn effective_row<F: Fn(usize) -> f64>(ctr: F, slots: usize, explore: ExploreConfig) -> EffectiveRow {
    let n = explore.n;
    let l = explore.explore_slots;
    let k_tilde = explore.effective_slots(slots);
    let explore_total: f64 = (1..=l).map(&ctr).sum();
    let non_explore: Vec<f64> = (1..=n).map(|m| non_explore_share(&ctr, m, n, l)).collect();
    let values = (1..=k_tilde)
        .map(|m| {
            if m <= n {
                explore_total + non_explore[m - 1]
            } else {
                n as f64 * ctr(m)
            }
        })
        .collect();
    EffectiveRow {
        explore_total,
        non_explore,
        values,
    }
}

/// Effective position CTRs `θ_1..θ_{K̃}` for the separable model.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveCurve {
    thetas: Vec<f64>,
    explore_total: f64,
    non_explore: Vec<f64>,
}

impl EffectiveCurve {
    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    /// 0-based `θ`, zero past `K̃`.
    pub fn theta(&self, rank: usize) -> f64 {
        self.thetas.get(rank).copied().unwrap_or(0.0)
    }

    /// `K̃ = max{K, n}`.
    pub fn effective_slots(&self) -> usize {
        self.thetas.len()
    }

    /// `γ = Σ_{j ≤ L} γ_j`.
    pub fn explore_total(&self) -> f64 {
        self.explore_total
    }

    /// `d_1..d_n`.
    pub fn non_explore(&self) -> &[f64] {
        &self.non_explore
    }
}

pub fn effective_position_ctrs(curve: &PositionCurve, explore: ExploreConfig) -> Result<EffectiveCurve> {
    explore.check_slots(curve.slots())?;
    let row = effective_row(|j| curve.at(j - 1), curve.slots(), explore);
    Ok(EffectiveCurve {
        thetas: row.values,
        explore_total: row.explore_total,
        non_explore: row.non_explore,
    })
}

/// First differences `θ_j - θ_{j+1}` for `j = 1..K̃`, from their own
/// piecewise closed form (not by subtraction).
pub fn theta_differences(curve: &PositionCurve, explore: ExploreConfig) -> Result<Vec<f64>> {
    explore.check_slots(curve.slots())?;
    let n = explore.n;
    let l = explore.explore_slots;
    if 2 * l > n {
        return Err(Error::InvalidConfig {
            n,
            explore_slots: l,
            slots: curve.slots(),
            bidders: 0,
            reason: "difference branches need 2L <= n",
        });
    }
    let g = |j: usize| curve.at(j - 1);
    let step = |j: usize| g(j) - g(j + 1);
    let explore_total: f64 = (1..=l).map(g).sum();
    let (nf, lf) = (n as f64, l as f64);
    let k_tilde = explore.effective_slots(curve.slots());
    let diffs = (1..=k_tilde)
        .map(|j| {
            let jf = j as f64;
            if j < l {
                (nf - jf - lf) * step(j + l)
            } else if j + l < n {
                (jf - lf) * step(j) + (nf - jf - lf) * step(j + l)
            } else if j < n {
                (jf - lf) * step(j)
            } else if j == n {
                (explore_total - lf * g(n + 1)) + (nf - lf) * step(n)
            } else {
                nf * step(j)
            }
        })
        .collect();
    Ok(diffs)
}

/// Effective CTRs `c̃_{i,m}` for every bidder row and rank `m ≤ K̃`.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveCtrMatrix {
    rows: Vec<Vec<f64>>,
    explore_totals: Vec<f64>,
    non_explore: Vec<Vec<f64>>,
}

impl EffectiveCtrMatrix {
    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, bidder: usize) -> &[f64] {
        &self.rows[bidder]
    }

    /// 0-based `c̃`, zero past `K̃`.
    pub fn at(&self, bidder: usize, rank: usize) -> f64 {
        self.rows[bidder].get(rank).copied().unwrap_or(0.0)
    }

    pub fn bidders(&self) -> usize {
        self.rows.len()
    }

    pub fn effective_slots(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    /// `β_i = Σ_{j ≤ L} c_{i,j}`.
    pub fn explore_totals(&self) -> &[f64] {
        &self.explore_totals
    }

    /// `d_{i,1..n}`.
    pub fn non_explore(&self, bidder: usize) -> &[f64] {
        &self.non_explore[bidder]
    }

    /// Reorders rows with `order[r]` = old row that becomes row `r`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        EffectiveCtrMatrix {
            rows: order.iter().map(|&i| self.rows[i].clone()).collect(),
            explore_totals: order.iter().map(|&i| self.explore_totals[i]).collect(),
            non_explore: order.iter().map(|&i| self.non_explore[i].clone()).collect(),
        }
    }

    /// `c̃_{i,i}` for each row: the effective CTR a bidder gets at its own rank.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.bidders()).map(|i| self.at(i, i)).collect()
    }
}

pub fn effective_ctr_matrix(ctrs: &CtrMatrix, explore: ExploreConfig) -> Result<EffectiveCtrMatrix> {
    let slots = ctrs.slots();
    explore.check_slots(slots)?;
    let mut rows = Vec::with_capacity(ctrs.bidders());
    let mut explore_totals = Vec::with_capacity(ctrs.bidders());
    let mut non_explore = Vec::with_capacity(ctrs.bidders());
    for (i, row) in ctrs.rows().iter().enumerate() {
        if row.len() != slots {
            return Err(Error::LengthMismatch {
                what: "CTR matrix row",
                expected: slots,
                actual: row.len(),
            });
        }
        let r = effective_row(|j| ctrs.at(i, j - 1), slots, explore);
        rows.push(r.values);
        explore_totals.push(r.explore_total);
        non_explore.push(r.non_explore);
    }
    Ok(EffectiveCtrMatrix {
        rows,
        explore_totals,
        non_explore,
    })
}

/// True iff `values` is strictly decreasing with every gap above `tol` and
/// the last entry above `tol`. An empty slice is vacuously monotone.
pub fn check_monotone(values: &[f64], tol: f64) -> bool {
    values.windows(2).all(|w| w[0] - w[1] > tol) && values.last().is_none_or(|&v| v > tol)
}

/// Brute-force effective position CTRs: for each rank, the sum of `γ` over
/// the slots that rank occupies in `schedule`. One entry per ranked bidder.
pub fn schedule_oracle_position_ctrs(schedule: &AllocationSchedule, curve: &PositionCurve) -> Vec<f64> {
    let mut totals = vec![0.0; schedule.num_bidders()];
    for step in schedule.steps() {
        for (slot, rank) in step.iter().enumerate() {
            if let Some(r) = rank {
                totals[*r] += curve.at(slot);
            }
        }
    }
    totals
}

/// Brute-force `c̃`: row `i`, column `m` sums `c_{i, slot}` over the slots
/// that rank `m` occupies, i.e. what bidder `i` would collect if ranked `m`.
pub fn schedule_oracle_ctr_matrix(schedule: &AllocationSchedule, ctrs: &CtrMatrix) -> Vec<Vec<f64>> {
    let ranks = schedule.num_bidders();
    let mut out = vec![vec![0.0; ranks]; ctrs.bidders()];
    for step in schedule.steps() {
        for (slot, rank) in step.iter().enumerate() {
            if let Some(r) = rank {
                for (i, row) in out.iter_mut().enumerate() {
                    row[*r] += ctrs.at(i, slot);
                }
            }
        }
    }
    out
}
