use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::fsutil::write_atomic;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Eval,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Eval => "eval",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub step: u64,
    pub epoch: usize,
    pub split: Split,
    pub loss: f64,
    pub accuracy: f64,
}

/// Training curve: one train row per optimizer step, one eval row per epoch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsCurve {
    pub rows: Vec<MetricsRow>,
}

pub const METRICS_HEADER: &str = "step,epoch,split,loss,accuracy";

impl MetricsCurve {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &MetricsRow> {
        self.rows.iter().filter(move |r| r.split == split)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(32 * (self.rows.len() + 1));
        out.push_str(METRICS_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{:.6},{:.6}\n", r.step, r.epoch, r.split, r.loss, r.accuracy));
        }
        out
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let csv = self.to_csv();
        write_atomic(path, |w| w.write_all(csv.as_bytes()))
    }
}
