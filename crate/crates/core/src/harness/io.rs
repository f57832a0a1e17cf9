//! Instance JSON:
//!
//! ```json
//! { "n": 2, "m": 2, "model": "googol",
//!   "bidders": [ { "facets": [ {"kind": "xos", "clauses": [[1.0, 0.0]]}, ... ] }, ... ] }
//! ```
//!
//! Distribution instances list `"support"` per bidder with optional
//! `"probs"` (uniform when absent). Optional top-level keys: `"id"` and
//! `"order"` (arrival order, index order when absent).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instances::{BidderDistribution, DistributionSpec, GoogolInstance, PROB_TOLERANCE};
use crate::valuations::{AdditiveClause, ValuationKind, XosValuation};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValuationJson {
    pub kind: ValuationKind,
    pub clauses: Vec<Vec<f64>>,
}

impl ValuationJson {
    pub fn from_valuation(v: &XosValuation<f64>) -> Self {
        Self {
            kind: v.kind(),
            clauses: v.clauses().iter().map(|c| c.weights().to_vec()).collect(),
        }
    }

    pub fn to_valuation(&self) -> Result<XosValuation<f64>> {
        let clauses = self
            .clauses
            .iter()
            .cloned()
            .map(AdditiveClause::new)
            .collect::<Result<Vec<_>>>()?;
        XosValuation::new(clauses, self.kind)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Googol,
    Distribution,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BidderJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub facets: Option<Vec<ValuationJson>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support: Option<Vec<ValuationJson>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub n: usize,
    pub m: usize,
    pub model: ModelKind,
    pub bidders: Vec<BidderJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Googol(GoogolInstance<f64>),
    Distribution(DistributionSpec<f64>),
}

impl Model {
    pub fn n(&self) -> usize {
        match self {
            Model::Googol(g) => g.n(),
            Model::Distribution(d) => d.n(),
        }
    }

    pub fn m(&self) -> usize {
        match self {
            Model::Googol(g) => g.m(),
            Model::Distribution(d) => d.m(),
        }
    }
}

/// A validated instance with its identifier and arrival order.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub id: String,
    pub model: Model,
    pub order: Option<Vec<usize>>,
}

impl Instance {
    pub fn new(id: impl Into<String>, model: Model) -> Self {
        Self {
            id: id.into(),
            model,
            order: None,
        }
    }

    pub fn with_order(mut self, order: Vec<usize>) -> Result<Self> {
        crate::instances::check_permutation(&order, self.model.n())?;
        self.order = Some(order);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.model.n()
    }

    pub fn m(&self) -> usize {
        self.model.m()
    }

    pub fn from_json(doc: &InstanceJson) -> Result<Self> {
        if doc.bidders.len() != doc.n {
            return Err(Error::ShapeMismatch(format!(
                "n = {} but {} bidders listed",
                doc.n,
                doc.bidders.len()
            )));
        }
        let convert = |list: &[ValuationJson]| -> Result<Vec<XosValuation<f64>>> {
            list.iter()
                .map(|v| {
                    let v = v.to_valuation()?;
                    if v.m() != doc.m {
                        return Err(Error::ShapeMismatch(format!(
                            "valuation over {} items, m = {}",
                            v.m(),
                            doc.m
                        )));
                    }
                    Ok(v)
                })
                .collect()
        };
        let model = match doc.model {
            ModelKind::Googol => {
                let facets = doc
                    .bidders
                    .iter()
                    .enumerate()
                    .map(|(i, b)| {
                        let f = b.facets.as_deref().ok_or_else(|| {
                            Error::InvalidInput(format!("bidder {i} has no facets"))
                        })?;
                        convert(f)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Model::Googol(GoogolInstance::new(facets)?)
            }
            ModelKind::Distribution => {
                let bidders = doc
                    .bidders
                    .iter()
                    .enumerate()
                    .map(|(i, b)| {
                        let s = b.support.as_deref().ok_or_else(|| {
                            Error::InvalidInput(format!("bidder {i} has no support"))
                        })?;
                        let vals = convert(s)?;
                        let probs = match &b.probs {
                            Some(p) if p.len() != vals.len() => {
                                return Err(Error::ShapeMismatch(format!(
                                    "bidder {i}: {} probabilities for {} valuations",
                                    p.len(),
                                    vals.len()
                                )))
                            }
                            Some(p) => p.clone(),
                            None => vec![1.0 / vals.len().max(1) as f64; vals.len()],
                        };
                        let mut support: Vec<_> = vals.into_iter().zip(probs).collect();
                        if b.probs.is_none() {
                            // Absorb rounding so uniform weights sum to one.
                            let rest: f64 = support.iter().skip(1).map(|(_, p)| p).sum();
                            if let Some(first) = support.first_mut() {
                                first.1 = 1.0 - rest;
                            }
                        }
                        let certain =
                            support.len() == 1 && (support[0].1 - 1.0).abs() <= PROB_TOLERANCE;
                        Ok(if certain {
                            BidderDistribution::PointMass(support.pop().expect("one entry").0)
                        } else {
                            BidderDistribution::FiniteSupport(support)
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Model::Distribution(DistributionSpec::new(bidders)?)
            }
        };
        if model.m() != doc.m {
            return Err(Error::ShapeMismatch(format!(
                "m = {} but valuations have {}",
                doc.m,
                model.m()
            )));
        }
        let inst = Instance::new(doc.id.clone().unwrap_or_default(), model);
        match &doc.order {
            Some(o) => inst.with_order(o.clone()),
            None => Ok(inst),
        }
    }

    /// JSON form. Parametric and noise-wrapped distributions have no JSON
    /// encoding.
    pub fn to_json(&self) -> Result<InstanceJson> {
        let bidders = match &self.model {
            Model::Googol(g) => g
                .facets()
                .iter()
                .map(|f| BidderJson {
                    facets: Some(f.iter().map(ValuationJson::from_valuation).collect()),
                    support: None,
                    probs: None,
                })
                .collect(),
            Model::Distribution(d) => d
                .bidders()
                .iter()
                .map(|b| {
                    let s = b.support().ok_or_else(|| {
                        Error::InvalidInput(
                            "only finite-support distributions can be written as JSON".into(),
                        )
                    })?;
                    Ok(BidderJson {
                        facets: None,
                        support: Some(
                            s.iter()
                                .map(|(v, _)| ValuationJson::from_valuation(v))
                                .collect(),
                        ),
                        probs: Some(s.iter().map(|(_, p)| *p).collect()),
                    })
                })
                .collect::<Result<Vec<_>>>()?,
        };
        Ok(InstanceJson {
            id: (!self.id.is_empty()).then(|| self.id.clone()),
            n: self.n(),
            m: self.m(),
            model: match self.model {
                Model::Googol(_) => ModelKind::Googol,
                Model::Distribution(_) => ModelKind::Distribution,
            },
            bidders,
            order: self.order.clone(),
        })
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Self::from_json(&serde_json::from_str(s)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_json()?)?)
    }

    /// Reads an instance; the file stem becomes the id when the file has
    /// none.
    pub fn load(path: &Path) -> Result<Self> {
        let mut inst = Self::from_json_str(&std::fs::read_to_string(path)?)?;
        if inst.id.is_empty() {
            inst.id = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
        }
        Ok(inst)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut s = self.to_json_string()?;
        s.push('\n');
        std::fs::write(path, s)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{gen_hardness, random_googol, HardnessFamily};
    use crate::rng::seeded;

    #[test]
    fn googol_roundtrip() {
        let g = random_googol(3, 4, 3, 3, &mut seeded(1));
        let inst = Instance::new("g", Model::Googol(g))
            .with_order(vec![2, 0, 1])
            .unwrap();
        let back = Instance::from_json_str(&inst.to_json_string().unwrap()).unwrap();
        assert_eq!(back, inst);
    }

    #[test]
    fn distribution_roundtrip() {
        for fam in HardnessFamily::ALL {
            let d = gen_hardness(fam, 4, 4, 0.01).unwrap();
            let inst = Instance::new(fam.as_str(), Model::Distribution(d));
            let back = Instance::from_json_str(&inst.to_json_string().unwrap()).unwrap();
            assert_eq!(back, inst);
        }
    }

    #[test]
    fn parses_schema_example() {
        let s = r#"{ "n": 1, "m": 2, "model": "distribution",
            "bidders": [ { "support": [
                {"kind": "additive", "clauses": [[1.0, 2.0]]},
                {"kind": "unit-demand", "clauses": [[3.0, 0.0], [0.0, 1.0]]},
                {"kind": "xos", "clauses": [[1.0, 1.0], [2.0, 0.0]]} ] } ] }"#;
        let inst = Instance::from_json_str(s).unwrap();
        let Model::Distribution(d) = &inst.model else {
            panic!()
        };
        let sup = d.bidders()[0].support().unwrap();
        assert_eq!(sup.len(), 3);
        let total: f64 = sup.iter().map(|(_, p)| p).sum();
        assert_eq!(total, 1.0);
    }

    #[test]
    fn rejects_malformed() {
        let bad = [
            r#"{"n": 2, "m": 1, "model": "googol", "bidders": [{"facets": [{"kind": "xos", "clauses": [[1.0]]}, {"kind": "xos", "clauses": [[1.0]]}]}]}"#,
            r#"{"n": 1, "m": 2, "model": "googol", "bidders": [{"facets": [{"kind": "xos", "clauses": [[1.0]]}, {"kind": "xos", "clauses": [[1.0]]}]}]}"#,
            r#"{"n": 1, "m": 1, "model": "distribution", "bidders": [{"facets": [{"kind": "xos", "clauses": [[1.0]]}]}]}"#,
            r#"{"n": 1, "m": 1, "model": "distribution", "bidders": [{"support": [{"kind": "xos", "clauses": [[-1.0]]}]}]}"#,
            r#"{"n": 1, "m": 2, "model": "distribution", "bidders": [{"support": [{"kind": "unit-demand", "clauses": [[1.0, 1.0]]}]}]}"#,
            r#"{"n": 1, "m": 1, "model": "distribution", "bidders": [{"support": [{"kind": "xos", "clauses": [[1.0]]}], "probs": [0.5]}]}"#,
            r#"{"n": 1, "m": 1, "model": "distribution", "order": [1], "bidders": [{"support": [{"kind": "xos", "clauses": [[1.0]]}]}]}"#,
        ];
        for s in bad {
            assert!(Instance::from_json_str(s).is_err(), "{s}");
        }
    }
}
