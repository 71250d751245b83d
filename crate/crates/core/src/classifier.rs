//! Establish-refine classification over a taxonomy whose classes are scored
//! by bound knowledge-group networks.
//!
//! The agenda holds active classes. Each step pops the most believed one
//! (ties by name), feeds its group whatever findings have arrived for that
//! network, turns the group's report belief into class evidence and then
//! applies the thresholds: established classes activate their direct
//! subclasses, rejected classes take their whole subtree with them and
//! undecided classes with nothing left to read are suspended until new data
//! for their group shows up.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::compiler::CompiledModel;
use crate::engine::{ImpactReport, Session};
use crate::error::{Error, Result};
use crate::model::Finding;
use crate::taxonomy::{Binding, ClassEvidence, Taxonomy};

/// A class's knowledge group: network, report node and confirming value.
pub type KnowledgeGroupBinding = Binding;

pub const DEFAULT_MAX_STEPS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    pub tau_establish: f64,
    pub tau_reject: f64,
    pub max_steps: usize,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            tau_establish: 0.8,
            tau_reject: 0.1,
            max_steps: DEFAULT_MAX_STEPS,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        let (e, r) = (self.tau_establish, self.tau_reject);
        if !(e > 0.0 && e <= 1.0) || !(r >= 0.0 && r < e) {
            return Err(Error::Invalid(format!(
                "thresholds need 0 <= reject < establish <= 1 (got reject {r}, establish {e})"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Dormant,
    Active,
    Established,
    Rejected,
    Suspended,
}

/// One line of a data feed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedItem {
    pub network: String,
    pub node: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub likelihood: Option<Vec<f64>>,
}

impl FeedItem {
    pub fn finding(&self) -> Result<Finding> {
        match (&self.value, &self.likelihood) {
            (Some(v), None) => Ok(Finding::value(v.clone())),
            (None, Some(w)) => Finding::likelihood(w.clone()),
            _ => Err(Error::InvalidFinding {
                node: self.node.clone(),
                reason: "feed items need exactly one of `value` and `likelihood`".into(),
            }),
        }
    }
}

/// Parses a JSON-lines feed; blank lines are skipped.
pub fn parse_feed(text: &str) -> Result<Vec<FeedItem>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let item: FeedItem =
                serde_json::from_str(l).map_err(|e| Error::Invalid(format!("feed line {}: {e}", i + 1)))?;
            item.finding()?;
            Ok(item)
        })
        .collect()
}

fn round12(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum Event {
    Activated {
        step: usize,
        class: String,
        belief: f64,
    },
    Updated {
        step: usize,
        class: String,
        findings: usize,
        lambda_in: f64,
        lambda_out: f64,
        beliefs: BTreeMap<String, f64>,
    },
    Established {
        step: usize,
        class: String,
        belief: f64,
    },
    Rejected {
        step: usize,
        class: String,
        belief: f64,
    },
    Suspended {
        step: usize,
        class: String,
        belief: f64,
    },
}

impl Event {
    pub fn class(&self) -> &str {
        match self {
            Event::Activated { class, .. }
            | Event::Updated { class, .. }
            | Event::Established { class, .. }
            | Event::Rejected { class, .. }
            | Event::Suspended { class, .. } => class,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub taxonomy: String,
    /// Most specific established classes; empty when nothing was established.
    pub established: Vec<String>,
    pub beliefs: BTreeMap<String, f64>,
    pub singletons: BTreeMap<String, f64>,
    pub statuses: BTreeMap<String, Status>,
    pub steps: usize,
    pub trace: Vec<Event>,
}

/// (BEL(confirm), 1 - BEL(confirm)) read from a settled group session.
pub fn group_likelihood(session: &Session, class: &str, binding: &Binding) -> Result<ClassEvidence> {
    let node = &session.network().original.node(&binding.node)?.variable;
    let idx = node.value_index(&binding.confirm).ok_or_else(|| Error::UnknownValue {
        node: binding.node.clone(),
        value: binding.confirm.clone(),
    })?;
    let b = session.belief(&binding.node)?[idx];
    ClassEvidence::new(class, b, 1.0 - b)
}

/// Feeds one item to a group. Repeated likelihoods on a node multiply, and
/// a likelihood on an instantiated node is absorbed.
fn absorb(session: &mut Session, item: &FeedItem) -> Result<()> {
    let finding = item.finding()?;
    let previous = session.findings().into_iter().find(|(n, _)| *n == item.node).map(|(_, f)| f);
    let finding = match (previous, finding) {
        (Some(Finding::Instantiated(_)), Finding::Virtual(_)) => return Ok(()),
        (Some(Finding::Virtual(old)), Finding::Virtual(new)) => {
            if old.weights().len() != new.weights().len() {
                return Err(Error::InvalidFinding {
                    node: item.node.clone(),
                    reason: format!("expected {} weights, found {}", old.weights().len(), new.weights().len()),
                });
            }
            Finding::likelihood(old.weights().iter().zip(new.weights()).map(|(a, b)| a * b).collect())?
        }
        (_, f) => f,
    };
    session.assert_evidence(&item.node, finding)?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct Controller {
    taxonomy: Taxonomy,
    config: ControllerConfig,
    sessions: BTreeMap<String, Session>,
    status: BTreeMap<String, Status>,
    applied: BTreeMap<String, ClassEvidence>,
    pending: VecDeque<FeedItem>,
    step: usize,
    trace: Vec<Event>,
}

impl Controller {
    /// Opens one session per bound network and activates the top classes.
    pub fn new(model: &CompiledModel, taxonomy: &str, config: ControllerConfig) -> Result<Self> {
        config.validate()?;
        let mut taxonomy = model.taxonomy(taxonomy)?.clone();
        taxonomy.reset();
        let mut sessions = BTreeMap::new();
        for class in taxonomy.classes.values() {
            if let Some(b) = &class.binding {
                if !sessions.contains_key(&b.network) {
                    sessions.insert(b.network.clone(), Session::open(model, &b.network)?);
                }
            }
        }
        let status = taxonomy.classes.keys().map(|k| (k.clone(), Status::Dormant)).collect();
        let mut c = Controller {
            taxonomy,
            config,
            sessions,
            status,
            applied: BTreeMap::new(),
            pending: VecDeque::new(),
            step: 0,
            trace: Vec::new(),
        };
        for top in c.taxonomy.top_classes() {
            c.activate(&top, &mut Vec::new())?;
        }
        Ok(c)
    }

    pub fn taxonomy(&self) -> &Taxonomy {
        &self.taxonomy
    }

    pub fn config(&self) -> ControllerConfig {
        self.config
    }

    pub fn status(&self) -> &BTreeMap<String, Status> {
        &self.status
    }

    pub fn trace(&self) -> &[Event] {
        &self.trace
    }

    pub fn steps(&self) -> usize {
        self.step
    }

    pub fn session(&self, network: &str) -> Option<&Session> {
        self.sessions.get(network)
    }

    pub fn pending(&self) -> usize {
        self.pending.len()
    }

    /// Queues newly arrived data.
    pub fn push_feed<I: IntoIterator<Item = FeedItem>>(&mut self, items: I) {
        self.pending.extend(items);
    }

    fn binding(&self, class: &str) -> Option<&Binding> {
        self.taxonomy.classes.get(class).and_then(|c| c.binding.as_ref())
    }

    fn has_pending(&self, network: &str) -> bool {
        self.pending.iter().any(|i| i.network == network)
    }

    fn belief(&self, class: &str) -> f64 {
        self.taxonomy.class_belief(class).unwrap_or(0.0)
    }

    fn activate(&mut self, class: &str, events: &mut Vec<Event>) -> Result<()> {
        self.status.insert(class.to_string(), Status::Active);
        let e = Event::Activated {
            step: self.step,
            class: class.to_string(),
            belief: round12(self.belief(class)),
        };
        self.trace.push(e.clone());
        events.push(e);
        Ok(())
    }

    fn record(&mut self, e: Event, events: &mut Vec<Event>) {
        self.trace.push(e.clone());
        events.push(e);
    }

    /// Suspended classes whose group has new data go back on the agenda.
    fn reactivate(&mut self, events: &mut Vec<Event>) -> Result<()> {
        let waking: Vec<String> = self
            .status
            .iter()
            .filter(|(c, s)| {
                **s == Status::Suspended && self.binding(c).is_some_and(|b| self.has_pending(&b.network))
            })
            .map(|(c, _)| c.clone())
            .collect();
        for c in waking {
            self.activate(&c, events)?;
        }
        Ok(())
    }

    fn next_active(&self) -> Option<String> {
        let mut best: Option<(&String, f64)> = None;
        for (c, s) in &self.status {
            if *s != Status::Active {
                continue;
            }
            let b = self.belief(c);
            // strict comparison keeps the first name on ties
            if best.is_none_or(|(_, bb)| b > bb) {
                best = Some((c, b));
            }
        }
        best.map(|(c, _)| c.clone())
    }

    /// True when a step would do something.
    pub fn has_work(&self) -> bool {
        self.status.iter().any(|(c, s)| {
            *s == Status::Active
                || (*s == Status::Suspended && self.binding(c).is_some_and(|b| self.has_pending(&b.network)))
        })
    }

    fn recompute(&mut self) -> Result<()> {
        self.taxonomy.reset();
        for ev in self.applied.values() {
            self.taxonomy.apply_class_evidence(ev)?;
        }
        Ok(())
    }

    fn reject(&mut self, class: &str, events: &mut Vec<Event>) -> Result<()> {
        if self.status.get(class) == Some(&Status::Rejected) {
            return Ok(());
        }
        self.status.insert(class.to_string(), Status::Rejected);
        let e = Event::Rejected {
            step: self.step,
            class: class.to_string(),
            belief: round12(self.belief(class)),
        };
        self.record(e, events);
        for sub in self.taxonomy.subclasses(class)? {
            self.reject(&sub, events)?;
        }
        Ok(())
    }

    /// One agenda step; an empty result means there was nothing to do.
    pub fn step(&mut self) -> Result<Vec<Event>> {
        let mut events = Vec::new();
        if !self.has_work() {
            return Ok(events);
        }
        self.step += 1;
        self.reactivate(&mut events)?;
        let Some(class) = self.next_active() else {
            return Ok(events);
        };
        let subclasses = self.taxonomy.subclasses(&class)?;
        let binding = self.binding(&class).cloned();
        if let Some(b) = &binding {
            let (mine, rest): (VecDeque<FeedItem>, VecDeque<FeedItem>) =
                self.pending.drain(..).partition(|i| i.network == b.network);
            self.pending = rest;
            let session = self.sessions.get_mut(&b.network).expect("bound networks have sessions");
            for item in &mine {
                absorb(session, item)?;
            }
            let ev = group_likelihood(session, &class, b)?;
            let (lambda_in, lambda_out) = (ev.lambda_in, ev.lambda_out);
            self.applied.insert(class.clone(), ev);
            self.recompute()?;
            let e = Event::Updated {
                step: self.step,
                class: class.clone(),
                findings: mine.len(),
                lambda_in: round12(lambda_in),
                lambda_out: round12(lambda_out),
                beliefs: self.taxonomy.class_beliefs().into_iter().map(|(k, v)| (k, round12(v))).collect(),
            };
            self.record(e, &mut events);
        } else if subclasses.is_empty() {
            return Err(Error::UnboundClass(class));
        }
        let belief = self.belief(&class);
        if belief >= self.config.tau_establish {
            self.status.insert(class.clone(), Status::Established);
            let e = Event::Established {
                step: self.step,
                class: class.clone(),
                belief: round12(belief),
            };
            self.record(e, &mut events);
            for sub in subclasses {
                if self.status.get(&sub) == Some(&Status::Dormant) {
                    self.activate(&sub, &mut events)?;
                }
            }
        } else if belief <= self.config.tau_reject {
            self.reject(&class, &mut events)?;
        } else {
            // the group's pending data was all consumed above
            self.status.insert(class.clone(), Status::Suspended);
            let e = Event::Suspended {
                step: self.step,
                class,
                belief: round12(belief),
            };
            self.record(e, &mut events);
        }
        Ok(events)
    }

    /// Steps until the agenda is empty.
    pub fn run(&mut self) -> Result<ClassificationReport> {
        while self.has_work() {
            if self.step >= self.config.max_steps {
                return Err(Error::StepLimitExceeded(self.config.max_steps));
            }
            self.step()?;
        }
        Ok(self.report())
    }

    /// Most specific established classes by set inclusion.
    pub fn most_specific(&self) -> Vec<String> {
        let established: Vec<&String> =
            self.status.iter().filter(|(_, s)| **s == Status::Established).map(|(c, _)| c).collect();
        established
            .iter()
            .filter(|c| {
                let m = &self.taxonomy.classes[c.as_str()].members;
                !established.iter().any(|o| {
                    let om = &self.taxonomy.classes[o.as_str()].members;
                    om.len() < m.len() && om.iter().all(|x| m.binary_search(x).is_ok())
                })
            })
            .map(|c| (*c).clone())
            .collect()
    }

    pub fn report(&self) -> ClassificationReport {
        ClassificationReport {
            taxonomy: self.taxonomy.name.clone(),
            established: self.most_specific(),
            beliefs: self.taxonomy.class_beliefs(),
            singletons: self
                .taxonomy
                .singletons
                .iter()
                .cloned()
                .zip(self.taxonomy.weights().iter().copied())
                .collect(),
            statuses: self.status.clone(),
            steps: self.step,
            trace: self.trace.clone(),
        }
    }

    /// Impact ranking inside the class's knowledge group against its report node.
    pub fn suggest_evidence(&self, class: &str) -> Result<ImpactReport> {
        self.taxonomy.members(class)?;
        let b = self.binding(class).ok_or_else(|| Error::UnboundClass(class.to_string()))?;
        self.sessions[&b.network].impact(&b.node)
    }
}

/// Runs a fresh controller over a complete feed.
pub fn classify(
    model: &CompiledModel,
    taxonomy: &str,
    feed: Vec<FeedItem>,
    config: ControllerConfig,
) -> Result<ClassificationReport> {
    let mut c = Controller::new(model, taxonomy, config)?;
    c.push_feed(feed);
    c.run()
}
