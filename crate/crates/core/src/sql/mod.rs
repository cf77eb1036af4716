//! SQL front end: lexer, parser, renderer and lowering to a logical plan.

pub mod ast;
pub mod lexer;
pub mod parser;
pub mod plan;
pub mod render;

pub use ast::*;
pub use parser::parse;
pub use plan::{lower, LogicalPlan};
pub use render::render;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SqlError {
    #[error("SYNTAX_ERROR at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
        /// Short description of what the parser wanted at this point.
        expected: Option<String>,
    },
    #[error("UNSUPPORTED_FEATURE at {line}:{column}: {feature}")]
    Unsupported {
        feature: String,
        line: usize,
        column: usize,
    },
    #[error("SEMANTIC_ERROR: {0}")]
    Semantic(String),
}

impl SqlError {
    pub fn syntax(line: usize, column: usize, message: impl Into<String>, expected: Option<String>) -> Self {
        SqlError::Syntax {
            line,
            column,
            message: message.into(),
            expected,
        }
    }

    pub fn unsupported(feature: &str, line: usize, column: usize) -> Self {
        SqlError::Unsupported {
            feature: feature.to_string(),
            line,
            column,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            SqlError::Syntax { .. } => "SYNTAX_ERROR",
            SqlError::Unsupported { .. } => "UNSUPPORTED_FEATURE",
            SqlError::Semantic(_) => "SEMANTIC_ERROR",
        }
    }
}

/// Parse and lower in one step.
pub fn plan_sql(sql: &str) -> Result<LogicalPlan, SqlError> {
    lower(&parse(sql)?)
}
