use std::fmt;

use thiserror::Error;

/// Syntax error with a 1-based source position.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, col: usize, message: impl Into<String>) -> Self {
        ParseError { line, col, message: message.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Severity {
    Warning,
    Error,
}

/// A load-time or analysis finding, attached to the rule or definition it concerns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    /// Rule, definition, or `main`; empty when the finding is global.
    pub context: String,
    pub message: String,
}

impl Diagnostic {
    pub fn error(context: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic { severity: Severity::Error, context: context.into(), message: message.into() }
    }

    pub fn warning(context: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic { severity: Severity::Warning, context: context.into(), message: message.into() }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let level = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        if self.context.is_empty() {
            write!(f, "{level}: {}", self.message)
        } else {
            write!(f, "{level}[{}]: {}", self.context, self.message)
        }
    }
}

/// Failure of a static analysis on a malformed input, as opposed to a negative verdict.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("unbound strategy variable `{0}`")]
    UnboundVar(String),
    #[error("unknown rule `{0}`")]
    UnknownRule(String),
    #[error("unknown sort `{0}`")]
    UnknownSort(String),
    #[error("effect of `{name}` has {found} component(s), the measure has {expected}")]
    LengthMismatch { name: String, expected: usize, found: usize },
    #[error(transparent)]
    Fixpoint(#[from] crate::lattice::FixpointError),
}
