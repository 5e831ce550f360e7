//! Versioned JSON records shared by every exported report.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TRACE_SCHEMA: &str = "trace-v1";
pub const ORACLE_SCHEMA: &str = "oracle-v1";
pub const RATEFIT_SCHEMA: &str = "ratefit-v1";
pub const CERTIFICATE_SCHEMA: &str = "certificate-v1";
pub const SOLUTION_SCHEMA: &str = "solution-v1";
pub const RATES_SCHEMA: &str = "rates-v1";

/// A payload tagged with its schema version, serialized flat:
/// `{"schema": "trace-v1", ...fields}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record<T> {
    pub schema: String,
    #[serde(flatten)]
    pub body: T,
}

pub fn to_json<T: Serialize>(schema: &str, body: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(&Record { schema: schema.to_string(), body })?)
}

/// Parses a record and checks its schema tag.
pub fn from_json<T: DeserializeOwned>(schema: &str, text: &str) -> Result<T> {
    let record: Record<T> = serde_json::from_str(text)?;
    if record.schema != schema {
        return Err(Error::Config(format!("expected a {schema} record, found {}", record.schema)));
    }
    Ok(record.body)
}

pub fn write_json<T: Serialize>(path: &Path, schema: &str, body: &T) -> Result<()> {
    std::fs::write(path, to_json(schema, body)?)?;
    Ok(())
}
