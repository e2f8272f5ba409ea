// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use thiserror::Error;

use crate::geometry::ModuleId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty module region")]
    EmptyRegion,

    #[error("module {0} is not placed")]
    Unplaced(ModuleId),

    #[error("unknown module {0}")]
    UnknownModule(String),

    #[error("canvas dimensions must be positive, got {width}x{height}")]
    BadCanvas { width: u32, height: u32 },

    #[error("{file}:{line}: {msg}")]
    Parse {
        file: String,
        line: usize,
        msg: String,
    },

    #[error("net {net} references unknown endpoint `{endpoint}`")]
    DanglingEndpoint { net: usize, endpoint: String },

    #[error("invalid layout document: {0}")]
    Layout(String),

    #[error("no integer footprint for area {area} within aspect bounds [{min}, {max}]")]
    NoFootprint { area: u64, min: f64, max: f64 },

    #[error("cannot legalize: insufficient area")]
    InsufficientArea,

    #[error("cannot legalize: no feasible position for module {0}")]
    NoFeasiblePosition(String),

    #[error("all {0} initial floorplan trials failed to legalize")]
    AllTrialsFailed(usize),

    #[error("stale path: pair ({0}, {1}) has no free pin slot")]
    StalePath(ModuleId, ModuleId),

    #[error("unknown graph node {0}")]
    UnknownNode(ModuleId),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(file: &str, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            file: file.to_string(),
            line,
            msg: msg.into(),
        }
    }
}
