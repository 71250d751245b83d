//! `.bartc` files: a JSON document tagged with a magic string and version.

use serde_json::Value;

use super::{CompiledModel, FORMAT_VERSION, MAGIC};
use crate::error::{Error, Result};
use crate::model::Quantification;

pub fn save(model: &CompiledModel) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(model).expect("compiled models always serialize");
    bytes.push(b'\n');
    bytes
}

pub fn load(bytes: &[u8]) -> Result<CompiledModel> {
    let doc: Value = serde_json::from_slice(bytes).map_err(|e| {
        if e.is_eof() {
            Error::CorruptTensor(format!("truncated document: {e}"))
        } else {
            Error::BadMagic(format!("not JSON: {e}"))
        }
    })?;
    match doc.get("magic").and_then(Value::as_str) {
        Some(MAGIC) => {}
        other => return Err(Error::BadMagic(format!("magic is {other:?}"))),
    }
    match doc.get("version").and_then(Value::as_str) {
        Some(FORMAT_VERSION) => {}
        Some(v) => return Err(Error::VersionMismatch(v.to_string())),
        None => return Err(Error::VersionMismatch("<missing>".to_string())),
    }
    let model: CompiledModel =
        serde_json::from_value(doc).map_err(|e| Error::CorruptTensor(format!("malformed model: {e}")))?;
    for net in &model.networks {
        for node in &net.nodes {
            if !node.tensor.is_consistent() || node.tensor.child_card() != node.card_product() {
                return Err(Error::CorruptTensor(format!("tensor of `{}`", node.name)));
            }
        }
        for node in &net.original.nodes {
            if let Quantification::Cpt(cpt) = &node.quantification {
                if !cpt.is_consistent() {
                    return Err(Error::CorruptTensor(format!("table of `{}`", node.name())));
                }
            }
        }
    }
    Ok(model)
}
