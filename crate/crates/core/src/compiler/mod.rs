//! From a parsed model set to the loop-free runtime form.

mod aggregate;
mod format;
mod loops;

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use aggregate::{
    aggregate, AggregationMap, CompiledNetwork, CompiledNode, Placement, DEFAULT_MAX_CLUSTER_STATES,
};
pub use crate::gate::expand_gate;
pub use loops::detect_loops;

use crate::error::{Error, Result};
use crate::influence::InfluenceDiagram;
use crate::model::BeliefNetwork;
use crate::netlang::{self, ModelSet};
use crate::taxonomy::Taxonomy;

pub const MAGIC: &str = "bart-compiled-model";
pub const FORMAT_VERSION: &str = "bartc-1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompileOptions {
    pub max_cluster_states: usize,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions {
            max_cluster_states: DEFAULT_MAX_CLUSTER_STATES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompiledModel {
    pub magic: String,
    pub version: String,
    /// SHA-256 of the canonical source text, hex encoded.
    pub source_hash: String,
    pub networks: Vec<Arc<CompiledNetwork>>,
    pub taxonomies: Vec<Taxonomy>,
    pub diagrams: Vec<InfluenceDiagram>,
}

impl CompiledModel {
    /// Compiles already-built parts. Networks are aggregated in parallel.
    pub fn from_parts(
        networks: &[BeliefNetwork],
        taxonomies: Vec<Taxonomy>,
        diagrams: Vec<InfluenceDiagram>,
        options: &CompileOptions,
        source_hash: String,
    ) -> Result<Self> {
        let compiled = networks
            .par_iter()
            .map(|n| aggregate(n, options.max_cluster_states).map(Arc::new))
            .collect::<Vec<_>>();
        let mut nets = Vec::with_capacity(compiled.len());
        let mut diags = Vec::new();
        for c in compiled {
            match c {
                Ok(n) => nets.push(n),
                Err(Error::Compile(d)) => diags.extend(d),
                Err(e) => return Err(e),
            }
        }
        if !diags.is_empty() {
            return Err(Error::Compile(diags));
        }
        for d in &diagrams {
            d.validate()?;
        }
        let model = CompiledModel {
            magic: MAGIC.to_string(),
            version: FORMAT_VERSION.to_string(),
            source_hash,
            networks: nets,
            taxonomies,
            diagrams,
        };
        model.check_bindings()?;
        Ok(model)
    }

    fn check_bindings(&self) -> Result<()> {
        for t in &self.taxonomies {
            for (class, c) in &t.classes {
                let Some(b) = &c.binding else { continue };
                let net = self.network(&b.network)?;
                let node = net.original.node(&b.node).map_err(|_| Error::UnresolvedReference {
                    name: b.node.clone(),
                    context: format!("binding of class `{class}`"),
                    span: None,
                })?;
                if node.variable.value_index(&b.confirm).is_none() {
                    return Err(Error::UnknownValue {
                        node: b.node.clone(),
                        value: b.confirm.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn network(&self, name: &str) -> Result<&Arc<CompiledNetwork>> {
        self.networks
            .iter()
            .find(|n| n.name == name)
            .ok_or_else(|| Error::UnknownNetwork(name.to_string()))
    }

    pub fn taxonomy(&self, name: &str) -> Result<&Taxonomy> {
        self.taxonomies
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::UnknownTaxonomy(name.to_string()))
    }

    pub fn diagram(&self, name: &str) -> Result<&InfluenceDiagram> {
        self.diagrams
            .iter()
            .find(|d| d.name == name)
            .ok_or_else(|| Error::UnknownDiagram(name.to_string()))
    }
}

pub fn source_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Expands templates, lowers declarations and compiles every network,
/// taxonomy and diagram in the set.
pub fn compile(models: &ModelSet, options: &CompileOptions) -> Result<CompiledModel> {
    let hash = source_hash(&netlang::serialize(models));
    let expanded = netlang::expand_templates(models)?;
    let lowered = netlang::lower(&expanded)?;
    CompiledModel::from_parts(&lowered.networks, lowered.taxonomies, lowered.diagrams, options, hash)
}

/// Parses and compiles `.bart` source text.
pub fn compile_source(text: &str, options: &CompileOptions) -> Result<CompiledModel> {
    compile(&netlang::parse(text)?, options)
}

pub use format::{load, save};
