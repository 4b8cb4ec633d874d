// SPDX-License-Identifier: Apache-2.0

//! Datasets and configuration on disk.

pub mod config;
pub mod dataset;

pub use config::{BackendConfig, Config, ConfigError, ProviderConfig};
pub use dataset::{DatasetRecord, ExportSummary, FieldMap, Format, RecordStatus};
