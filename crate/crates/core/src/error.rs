use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Diagnostic;

/// Location of a token or declaration in a `.bart` source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct SourceSpan {
    pub line: usize,
    pub col_start: usize,
    pub col_end: usize,
    /// Byte offsets into the source text.
    pub start: usize,
    pub end: usize,
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}-{}", self.line, self.col_start, self.col_end)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("syntax error at {span}: {message} (expected one of: {})", expected.join(", "))]
    Syntax {
        span: SourceSpan,
        message: String,
        expected: Vec<String>,
    },
    #[error("semantic error at {span}: {message}")]
    Semantic { span: SourceSpan, message: String },
    #[error("duplicate name `{name}`")]
    DuplicateName { name: String, span: Option<SourceSpan> },
    #[error("unresolved reference `{name}` in {context}")]
    UnresolvedReference {
        name: String,
        context: String,
        span: Option<SourceSpan>,
    },
    #[error("template cycle through `{0}`")]
    TemplateCycle(String),
    #[error("arity mismatch in {context}: expected {expected}, found {found}")]
    ArityMismatch {
        context: String,
        expected: usize,
        found: usize,
    },
    #[error("unnormalized parameter: {0}")]
    UnnormalizedParameter(String),
    #[error("compile failed with {} diagnostic(s): {}", .0.len(), summarize(.0))]
    Compile(Vec<Diagnostic>),
    #[error("compound node {members:?} needs {states} states, limit is {limit}")]
    ClusterTooLarge {
        members: Vec<String>,
        states: usize,
        limit: usize,
    },
    #[error("not a compiled model: {0}")]
    BadMagic(String),
    #[error("unsupported compiled format version `{0}`")]
    VersionMismatch(String),
    #[error("corrupt tensor: {0}")]
    CorruptTensor(String),
    #[error("unknown network `{0}`")]
    UnknownNetwork(String),
    #[error("unknown diagram `{0}`")]
    UnknownDiagram(String),
    #[error("unknown taxonomy `{0}`")]
    UnknownTaxonomy(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("node `{node}` has no value `{value}`")]
    UnknownValue { node: String, value: String },
    #[error("invalid finding on `{node}`: {reason}")]
    InvalidFinding { node: String, reason: String },
    #[error("evidence is inconsistent (total probability mass is zero)")]
    InconsistentEvidence,
    #[error("node `{0}` is already instantiated")]
    ConflictingInstantiation(String),
    #[error("no finding recorded for `{0}`")]
    NoSuchFinding(String),
    #[error("utility table is constant ({0})")]
    DegenerateUtility(f64),
    #[error("rollout needs {count} leaves, cap is {cap}")]
    TooManyPaths { count: u128, cap: u64 },
    #[error("evidence destroyed all mass in taxonomy `{0}`")]
    AllMassDestroyed(String),
    #[error("class `{0}` has neither a knowledge group nor subclasses")]
    UnboundClass(String),
    #[error("classification did not finish within {0} steps")]
    StepLimitExceeded(usize),
    #[error("invalid input: {0}")]
    Invalid(String),
}

fn summarize(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    /// Stable machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Syntax { .. } => "syntax-error",
            Error::Semantic { .. } => "semantic-error",
            Error::DuplicateName { .. } => "duplicate-name",
            Error::UnresolvedReference { .. } => "unresolved-reference",
            Error::TemplateCycle(_) => "template-cycle",
            Error::ArityMismatch { .. } => "arity-mismatch",
            Error::UnnormalizedParameter(_) => "unnormalized-parameter",
            Error::Compile(_) => "compile-error",
            Error::ClusterTooLarge { .. } => "cluster-too-large",
            Error::BadMagic(_) => "bad-magic",
            Error::VersionMismatch(_) => "version-mismatch",
            Error::CorruptTensor(_) => "corrupt-tensor",
            Error::UnknownNetwork(_) => "unknown-network",
            Error::UnknownDiagram(_) => "unknown-diagram",
            Error::UnknownTaxonomy(_) => "unknown-taxonomy",
            Error::UnknownNode(_) => "unknown-node",
            Error::UnknownClass(_) => "unknown-class",
            Error::UnknownValue { .. } => "unknown-value",
            Error::InvalidFinding { .. } => "invalid-finding",
            Error::InconsistentEvidence => "inconsistent-evidence",
            Error::ConflictingInstantiation(_) => "conflicting-instantiation",
            Error::NoSuchFinding(_) => "no-such-finding",
            Error::DegenerateUtility(_) => "degenerate-utility",
            Error::TooManyPaths { .. } => "too-many-paths",
            Error::AllMassDestroyed(_) => "all-mass-destroyed",
            Error::UnboundClass(_) => "unbound-class",
            Error::StepLimitExceeded(_) => "step-limit-exceeded",
            Error::Invalid(_) => "invalid-input",
        }
    }

    /// Span of the offending source text, when the error came from a `.bart` file.
    pub fn span(&self) -> Option<SourceSpan> {
        match self {
            Error::Syntax { span, .. } | Error::Semantic { span, .. } => Some(*span),
            Error::DuplicateName { span, .. } | Error::UnresolvedReference { span, .. } => *span,
            _ => None,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
