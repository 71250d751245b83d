//! Class hierarchies over mutually exclusive singleton hypotheses.
//!
//! Only singleton weights are stored. A class's belief is the sum of its
//! members' weights, and evidence on a class multiplies members and
//! non-members by separate likelihoods before renormalizing.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::NORMALIZATION_TOLERANCE;

/// The knowledge group that scores a class: a network and the report node
/// value that confirms the class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Binding {
    pub network: String,
    pub node: String,
    pub confirm: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Class {
    /// Sorted singleton indices.
    pub members: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binding: Option<Binding>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Taxonomy {
    pub name: String,
    pub singletons: Vec<String>,
    pub classes: BTreeMap<String, Class>,
    pub prior: Vec<f64>,
    weights: Vec<f64>,
}

/// Likelihoods for a class (`lambda_in`) and its complement (`lambda_out`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassEvidence {
    pub class: String,
    pub lambda_in: f64,
    pub lambda_out: f64,
}

impl ClassEvidence {
    pub fn new<S: Into<String>>(class: S, lambda_in: f64, lambda_out: f64) -> Result<Self> {
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        if !ok(lambda_in) || !ok(lambda_out) || (lambda_in == 0.0 && lambda_out == 0.0) {
            return Err(Error::Invalid(format!(
                "class likelihood ({lambda_in}, {lambda_out}) must be nonnegative and not both zero"
            )));
        }
        Ok(ClassEvidence {
            class: class.into(),
            lambda_in,
            lambda_out,
        })
    }
}

impl Taxonomy {
    /// Uniform prior when `prior` is `None`.
    pub fn new<S: Into<String>>(name: S, singletons: &[&str], prior: Option<Vec<f64>>) -> Result<Self> {
        let name = name.into();
        let n = singletons.len();
        if n == 0 {
            return Err(Error::Invalid(format!("taxonomy `{name}` has no singletons")));
        }
        let mut seen = std::collections::HashSet::new();
        for s in singletons {
            if !seen.insert(*s) {
                return Err(Error::DuplicateName {
                    name: s.to_string(),
                    span: None,
                });
            }
        }
        let prior = prior.unwrap_or_else(|| vec![1.0 / n as f64; n]);
        if prior.len() != n {
            return Err(Error::ArityMismatch {
                context: format!("prior of taxonomy `{name}`"),
                expected: n,
                found: prior.len(),
            });
        }
        let sum: f64 = prior.iter().sum();
        if prior.iter().any(|w| !w.is_finite() || *w <= 0.0) || (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::UnnormalizedParameter(format!(
                "prior of taxonomy `{name}` must be positive and sum to 1 (sum {sum})"
            )));
        }
        Ok(Taxonomy {
            name,
            singletons: singletons.iter().map(|s| s.to_string()).collect(),
            classes: BTreeMap::new(),
            weights: prior.clone(),
            prior,
        })
    }

    pub fn add_class(&mut self, name: &str, members: &[&str], binding: Option<Binding>) -> Result<()> {
        if self.classes.contains_key(name) || self.singleton_index(name).is_some() {
            return Err(Error::DuplicateName {
                name: name.to_string(),
                span: None,
            });
        }
        if members.is_empty() {
            return Err(Error::Invalid(format!("class `{name}` is empty")));
        }
        let mut idx = members
            .iter()
            .map(|m| {
                self.singleton_index(m).ok_or_else(|| Error::UnresolvedReference {
                    name: m.to_string(),
                    context: format!("class `{name}`"),
                    span: None,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        idx.sort_unstable();
        idx.dedup();
        self.classes.insert(name.to_string(), Class { members: idx, binding });
        Ok(())
    }

    pub fn singleton_index(&self, name: &str) -> Option<usize> {
        self.singletons.iter().position(|s| s == name)
    }

    /// Members of a class, or the singleton itself when `name` is a singleton.
    pub fn members(&self, name: &str) -> Result<Vec<usize>> {
        if let Some(c) = self.classes.get(name) {
            return Ok(c.members.clone());
        }
        self.singleton_index(name)
            .map(|i| vec![i])
            .ok_or_else(|| Error::UnknownClass(name.to_string()))
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn reset(&mut self) {
        self.weights = self.prior.clone();
    }

    fn multiply_and_normalize(&mut self, lambda: impl Fn(usize) -> f64) -> Result<&[f64]> {
        let next: Vec<f64> = self.weights.iter().enumerate().map(|(i, w)| w * lambda(i)).collect();
        let total: f64 = next.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::AllMassDestroyed(self.name.clone()));
        }
        self.weights = next.into_iter().map(|w| w / total).collect();
        Ok(&self.weights)
    }

    pub fn apply_class_evidence(&mut self, ev: &ClassEvidence) -> Result<&[f64]> {
        let members = self.members(&ev.class)?;
        let mut inside = vec![false; self.singletons.len()];
        for m in members {
            inside[m] = true;
        }
        self.multiply_and_normalize(|i| if inside[i] { ev.lambda_in } else { ev.lambda_out })
    }

    pub fn apply_singleton_likelihood(&mut self, lambda: &[f64]) -> Result<&[f64]> {
        if lambda.len() != self.singletons.len() {
            return Err(Error::ArityMismatch {
                context: format!("likelihood over taxonomy `{}`", self.name),
                expected: self.singletons.len(),
                found: lambda.len(),
            });
        }
        if lambda.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::Invalid("singleton likelihoods must be finite and nonnegative".into()));
        }
        self.multiply_and_normalize(|i| lambda[i])
    }

    pub fn class_belief(&self, name: &str) -> Result<f64> {
        Ok(self.members(name)?.iter().map(|&i| self.weights[i]).sum())
    }

    /// Beliefs of every class, by name.
    pub fn class_beliefs(&self) -> BTreeMap<String, f64> {
        self.classes
            .iter()
            .map(|(name, c)| (name.clone(), c.members.iter().map(|&i| self.weights[i]).sum()))
            .collect()
    }

    fn strict_subset(a: &[usize], b: &[usize]) -> bool {
        a.len() < b.len() && a.iter().all(|x| b.binary_search(x).is_ok())
    }

    /// Classes strictly contained in `name` with no class strictly between.
    pub fn subclasses(&self, name: &str) -> Result<Vec<String>> {
        let outer = self.members(name)?;
        let below: Vec<(&String, &Class)> = self
            .classes
            .iter()
            .filter(|(_, c)| Self::strict_subset(&c.members, &outer))
            .collect();
        Ok(below
            .iter()
            .filter(|(_, c)| !below.iter().any(|(_, mid)| Self::strict_subset(&c.members, &mid.members)))
            .map(|(n, _)| (*n).clone())
            .collect())
    }

    /// Classes with no strict superclass.
    pub fn top_classes(&self) -> Vec<String> {
        self.classes
            .iter()
            .filter(|(_, c)| !self.classes.values().any(|o| Self::strict_subset(&c.members, &o.members)))
            .map(|(n, _)| n.clone())
            .collect()
    }
}
