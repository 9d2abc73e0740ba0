//! Per-observation estimator traces as CSV.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::estimator::{SkillEstimate, StepInfo};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub obs_index: usize,
    pub est_sigma_x: f64,
    pub est_sigma_y: f64,
    pub est_rho: f64,
    pub est_lambda: f64,
    pub neff: f64,
    pub resampled_flag: bool,
    /// Empty when the true skill is unknown.
    pub jd_if_truth_known: Option<f64>,
}

impl TraceRow {
    pub fn new(obs_index: usize, estimate: &SkillEstimate, info: &StepInfo, jd: Option<f64>) -> Self {
        Self {
            obs_index,
            est_sigma_x: estimate.sigma_x,
            est_sigma_y: estimate.sigma_y,
            est_rho: estimate.rho,
            est_lambda: estimate.lambda,
            neff: info.neff,
            resampled_flag: info.resampled,
            jd_if_truth_known: jd,
        }
    }

    pub fn estimate(&self) -> SkillEstimate {
        SkillEstimate {
            sigma_x: self.est_sigma_x,
            sigma_y: self.est_sigma_y,
            rho: self.est_rho,
            lambda: self.est_lambda,
        }
    }
}

pub fn write_trace<W: Write>(out: W, rows: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace<R: Read>(input: R) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_reader(input);
    let rows = r.deserialize().collect::<std::result::Result<Vec<TraceRow>, _>>()?;
    Ok(rows)
}
