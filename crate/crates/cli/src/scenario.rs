//! Scenario files: TOML describing bidders, slots, the mechanism and an
//! `(n, L)` sweep.

use std::path::Path;

use exgsp::{validate_instance, AuctionInstance, Bidder, CtrMatrix, CtrModel, ExploreConfig, Mechanism, PositionCurve, ValueComponents};
use serde::{Deserialize, Serialize};

use crate::RunError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// `gsp`, `exp-gsp`, `laddered` or `exp-laddered`.
    pub mechanism: String,
    #[serde(default)]
    pub seed: u64,
    /// Position CTRs `γ_1..γ_K`. May be omitted when `ctr_matrix` is given;
    /// it then defaults to the column means of the matrix.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Vec<f64>>,
    /// Per-bidder slot CTRs, one row per entry of `bidders`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ctr_matrix: Option<Vec<Vec<f64>>>,
    pub sweep: Sweep,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimation: Option<Estimation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<Output>,
    pub bidders: Vec<BidderSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub n: Vec<usize>,
    #[serde(rename = "L")]
    pub explore_slots: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Estimation {
    /// Phases `l` of simulated clicks per sweep point.
    #[serde(default)]
    pub phases: usize,
    /// Repetitions of the coverage experiment per explored rank.
    #[serde(default)]
    pub trials: usize,
    pub delta: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    pub dir: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BidderSpec {
    pub value: f64,
    pub relevance: f64,
    /// `q`; defaults to `relevance`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auctioneer_estimate: Option<f64>,
    /// `f`; defaults to `relevance`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub self_estimate: Option<f64>,
    #[serde(default)]
    pub conversion_rate: f64,
    #[serde(default)]
    pub impression_value: f64,
    #[serde(default)]
    pub click_value: f64,
    #[serde(default)]
    pub conversion_value: f64,
}

impl BidderSpec {
    fn truthful(value: f64, relevance: f64) -> Self {
        BidderSpec {
            value,
            relevance,
            auctioneer_estimate: None,
            self_estimate: None,
            conversion_rate: 0.0,
            impression_value: 0.0,
            click_value: 0.0,
            conversion_value: 0.0,
        }
    }
}

/// One `(n, L)` point, ready to analyse.
#[derive(Debug, Clone)]
pub struct Point {
    pub index: usize,
    pub instance: AuctionInstance,
    /// Rank order, aligned with the instance.
    pub conversion_rates: Vec<f64>,
    pub values: Vec<ValueComponents>,
}

impl Scenario {
    /// Three bidders with values 10, 6, 4 on slots `γ = (0.6, 0.3, 0.1)`,
    /// explored with `n = 3` and `L` swept over `{0, 1}`.
    pub fn example() -> Self {
        let mut bidders: Vec<BidderSpec> = [10.0, 6.0, 4.0].iter().map(|&v| BidderSpec::truthful(v, 1.0)).collect();
        for b in &mut bidders {
            b.conversion_rate = 0.1;
            b.conversion_value = b.value / 0.1;
        }
        Scenario {
            mechanism: "exp-gsp".into(),
            seed: 7,
            gamma: Some(vec![0.6, 0.3, 0.1]),
            ctr_matrix: None,
            sweep: Sweep {
                n: vec![3],
                explore_slots: vec![0, 1],
            },
            estimation: Some(Estimation {
                phases: 0,
                trials: 0,
                delta: 0.1,
                epsilon: 0.05,
            }),
            output: None,
            bidders,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, RunError> {
        toml::from_str(text).map_err(|e| RunError::Validation(format!("scenario: {}", e.message())))
    }

    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path).map_err(|e| RunError::Validation(format!("cannot read {}: {e}", path.display())))?;
        Scenario::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn mechanism(&self) -> Result<Mechanism, RunError> {
        self.mechanism.parse().map_err(|e| RunError::Validation(format!("mechanism: {e}")))
    }

    fn curve(&self) -> Result<Vec<f64>, RunError> {
        match (&self.gamma, &self.ctr_matrix) {
            (Some(g), _) => Ok(g.clone()),
            (None, Some(m)) if !m.is_empty() => {
                let k = m[0].len();
                Ok((0..k)
                    .map(|j| m.iter().map(|row| row.get(j).copied().unwrap_or(0.0)).sum::<f64>() / m.len() as f64)
                    .collect())
            }
            _ => Err(RunError::Validation("missing key `gamma` (or `ctr_matrix`)".into())),
        }
    }

    fn check_estimation(&self) -> Result<(), RunError> {
        let Some(est) = &self.estimation else { return Ok(()) };
        if !(est.delta > 0.0 && est.delta < 1.0) {
            return Err(RunError::Validation(format!("estimation.delta = {} must be in (0, 1)", est.delta)));
        }
        if !(est.epsilon > 0.0 && est.epsilon < 1.0) {
            return Err(RunError::Validation(format!(
                "estimation.epsilon = {} must be in (0, 1)",
                est.epsilon
            )));
        }
        if (est.phases > 0 || est.trials > 0) && self.ctr_matrix.is_some() {
            return Err(RunError::Validation(
                "estimation: phases and trials need the separable model (remove `ctr_matrix`)".into(),
            ));
        }
        for (i, b) in self.bidders.iter().enumerate() {
            if !(0.0..=1.0).contains(&b.conversion_rate) {
                return Err(RunError::Validation(format!(
                    "bidders[{i}].conversion_rate = {} must be in [0, 1]",
                    b.conversion_rate
                )));
            }
        }
        Ok(())
    }

    /// Resolves every sweep point, failing on the first invalid one.
    pub fn points(&self) -> Result<Vec<Point>, RunError> {
        self.mechanism()?;
        self.check_estimation()?;
        if self.bidders.is_empty() {
            return Err(RunError::Validation("bidders: at least one bidder is required".into()));
        }
        if self.sweep.n.is_empty() || self.sweep.explore_slots.is_empty() {
            return Err(RunError::Validation("sweep: `n` and `L` need at least one value each".into()));
        }
        let gamma = self.curve()?;
        let bidders: Vec<Bidder> = self
            .bidders
            .iter()
            .enumerate()
            .map(|(id, b)| Bidder {
                id,
                value: b.value,
                relevance: b.relevance,
                auctioneer_estimate: b.auctioneer_estimate.unwrap_or(b.relevance),
                self_estimate: b.self_estimate.unwrap_or(b.relevance),
                bid: b.value,
            })
            .collect();
        if let Some((i, b)) = bidders
            .iter()
            .enumerate()
            .find(|(_, b)| b.auctioneer_estimate.is_nan() || b.auctioneer_estimate <= 0.0)
        {
            return Err(RunError::Validation(format!(
                "bidders[{i}].auctioneer_estimate = {} must be positive",
                b.auctioneer_estimate
            )));
        }
        let model = match &self.ctr_matrix {
            None => CtrModel::Separable,
            Some(m) => CtrModel::General(CtrMatrix::new(m.clone())),
        };

        let mut points = Vec::new();
        for &n in &self.sweep.n {
            for &l in &self.sweep.explore_slots {
                let explore = ExploreConfig::new(n, l);
                let inst = AuctionInstance::ranked(bidders.clone(), PositionCurve::new(gamma.clone()), explore, model.clone())
                    .map_err(|e| RunError::Validation(format!("ctr_matrix: {e}")))?;
                let report = validate_instance(&inst);
                if !report.is_valid() {
                    let all: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
                    return Err(RunError::Validation(format!("sweep point n = {n}, L = {l}: {}", all.join("; "))));
                }
                if !report.sne_safe {
                    return Err(RunError::Validation(format!(
                        "sweep point n = {n}, L = {l}: needs 1 <= n <= min(K+1, K+L) and 2L < n (K = {})",
                        inst.num_slots()
                    )));
                }
                let by_rank =
                    |f: &dyn Fn(&BidderSpec) -> f64| -> Vec<f64> { inst.bidders().iter().map(|b| f(&self.bidders[b.id])).collect() };
                let conversion_rates = by_rank(&|b| b.conversion_rate);
                let values = inst
                    .bidders()
                    .iter()
                    .map(|b| {
                        let s = &self.bidders[b.id];
                        ValueComponents {
                            impression: s.impression_value,
                            click: s.click_value,
                            conversion: s.conversion_value,
                        }
                    })
                    .collect();
                points.push(Point {
                    index: points.len(),
                    instance: inst,
                    conversion_rates,
                    values,
                });
            }
        }
        Ok(points)
    }
}
