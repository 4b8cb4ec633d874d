// SPDX-License-Identifier: Apache-2.0

//! Closed-loop synthesis, execution, evaluation and refinement of test
//! suites for competitive-programming problems.

pub mod curation;
pub mod genkit;
pub mod judge;
pub mod llm;
pub mod model;
pub mod sandbox;
pub mod refine;
pub mod analytics;
pub mod cli;
pub mod io;
