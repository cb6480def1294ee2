//! Run configuration loaded from JSON. Every field has a default, so `{}` is
//! a valid config.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::flight::FlightParams;
use crate::metrics::DEFAULT_TOLERANCE;
use crate::segment::{ChunkLayout, SegmenterSpec, DEFAULT_SAMPLING_INTERVAL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub segmenter: SegmenterSpec,
    pub layout: ChunkLayout,
    /// Foreground score threshold.
    pub threshold: f32,
    /// Skeleton voxels per graph node.
    pub sampling_interval: usize,
    pub flight: FlightParams,
    /// Matching tolerance for skeleton metrics, µm.
    pub tolerance: f64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            segmenter: SegmenterSpec::default(),
            layout: ChunkLayout::default(),
            threshold: 0.5,
            sampling_interval: DEFAULT_SAMPLING_INTERVAL,
            flight: FlightParams::default(),
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}
