//! Linear memory/runtime predictors keyed on per-slice data volume.
//!
//! Larger slices need more memory and more time. The model is one least-squares
//! line per response, evaluated with a multiplicative safety margin and rounded
//! up to whole megabytes and seconds.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default multiplicative headroom applied to every prediction.
pub const DEFAULT_SAFETY_FACTOR: f64 = 1.2;

/// Values this close above an integer are treated as that integer when rounding up.
const CEIL_SNAP: f64 = 1e-9;

/// One observed (size, memory, time) measurement of a slice job.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResourceSample {
    pub data_mb: f64,
    pub mem_mb: f64,
    pub time_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResourceModel {
    pub mem_slope: f64,
    pub mem_intercept: f64,
    pub time_slope: f64,
    pub time_intercept: f64,
    #[serde(default = "default_safety")]
    pub safety_factor: f64,
}

fn default_safety() -> f64 {
    DEFAULT_SAFETY_FACTOR
}

/// Least-squares line `y = slope * x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
}

impl LineFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }

    /// Residual sum of squares over `points`.
    pub fn rss(&self, points: &[(f64, f64)]) -> f64 {
        points
            .iter()
            .map(|&(x, y)| (y - self.eval(x)).powi(2))
            .sum()
    }
}

/// Ordinary least squares over `(x, y)` pairs.
///
/// Uses centered sums, which keeps the normal equations well conditioned when
/// the sizes sit far from zero.
pub fn fit_line(points: &[(f64, f64)]) -> Result<LineFit> {
    if points.len() < 2 {
        return Err(Error::DegenerateFit(format!(
            "need at least 2 samples, got {}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for &(x, y) in points {
        let dx = x - mean_x;
        sxx += dx * dx;
        sxy += dx * (y - mean_y);
    }
    if sxx <= 0.0 {
        return Err(Error::DegenerateFit(
            "fewer than 2 distinct data sizes".into(),
        ));
    }
    let slope = sxy / sxx;
    Ok(LineFit {
        slope,
        intercept: mean_y - slope * mean_x,
    })
}

/// Fits memory and time lines from measured samples.
pub fn calibrate(samples: &[ResourceSample]) -> Result<ResourceModel> {
    calibrate_with_safety(samples, DEFAULT_SAFETY_FACTOR)
}

pub fn calibrate_with_safety(
    samples: &[ResourceSample],
    safety_factor: f64,
) -> Result<ResourceModel> {
    for (i, s) in samples.iter().enumerate() {
        if !(s.data_mb.is_finite() && s.mem_mb.is_finite() && s.time_s.is_finite()) {
            return Err(Error::DegenerateFit(format!("sample {i} is not finite")));
        }
        if s.data_mb < 0.0 || s.mem_mb <= 0.0 || s.time_s <= 0.0 {
            return Err(Error::DegenerateFit(format!(
                "sample {i} out of range (data_mb >= 0, mem_mb > 0, time_s > 0)"
            )));
        }
    }
    let mem: Vec<_> = samples.iter().map(|s| (s.data_mb, s.mem_mb)).collect();
    let time: Vec<_> = samples.iter().map(|s| (s.data_mb, s.time_s)).collect();
    let mem = fit_line(&mem)?;
    let time = fit_line(&time)?;
    let model = ResourceModel {
        mem_slope: mem.slope,
        mem_intercept: mem.intercept,
        time_slope: time.slope,
        time_intercept: time.intercept,
        safety_factor,
    };
    model.validate()?;
    Ok(model)
}

impl ResourceModel {
    pub fn validate(&self) -> Result<()> {
        let params = [
            ("mem_slope", self.mem_slope),
            ("mem_intercept", self.mem_intercept),
            ("time_slope", self.time_slope),
            ("time_intercept", self.time_intercept),
            ("safety_factor", self.safety_factor),
        ];
        for (name, v) in params {
            if !v.is_finite() {
                return Err(Error::schema(name, "must be finite"));
            }
        }
        if self.safety_factor < 1.0 {
            return Err(Error::schema("safety_factor", "must be >= 1"));
        }
        Ok(())
    }

    pub fn mem_line(&self) -> LineFit {
        LineFit {
            slope: self.mem_slope,
            intercept: self.mem_intercept,
        }
    }

    pub fn time_line(&self) -> LineFit {
        LineFit {
            slope: self.time_slope,
            intercept: self.time_intercept,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: ResourceModel = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_owned(),
            message: e.to_string(),
        })?;
        model.validate()?;
        Ok(model)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes") + "\n"
    }
}

/// Predicted request for a slice of `data_mb` megabytes: `(mem_mb, time_s)`.
pub fn estimate(model: &ResourceModel, data_mb: f64) -> (u64, u64) {
    let data_mb = data_mb.max(0.0);
    let mem = padded_ceil(model.safety_factor, model.mem_line().eval(data_mb));
    let time = padded_ceil(model.safety_factor, model.time_line().eval(data_mb));
    (mem, time)
}

fn padded_ceil(safety: f64, raw: f64) -> u64 {
    let v = safety * raw.max(1.0);
    (v - CEIL_SNAP).ceil().max(1.0) as u64
}

/// `serial_s / parallel_s`.
pub fn speedup(serial_s: f64, parallel_s: f64) -> Result<f64> {
    if !(serial_s > 0.0 && parallel_s > 0.0) || !serial_s.is_finite() || !parallel_s.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "speedup needs positive durations, got {serial_s} and {parallel_s}"
        )));
    }
    Ok(serial_s / parallel_s)
}

/// Reads calibration samples from CSV with header `data_mb,mem_mb,time_s`.
pub fn load_samples_csv(path: &Path) -> Result<Vec<ResourceSample>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_samples_csv(file).map_err(|message| Error::Parse {
        path: path.to_owned(),
        message,
    })
}

pub fn read_samples_csv<R: std::io::Read>(
    reader: R,
) -> std::result::Result<Vec<ResourceSample>, String> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| e.to_string())?.clone();
    let expected = ["data_mb", "mem_mb", "time_s"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(format!(
            "expected header `data_mb,mem_mb,time_s`, found `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        ));
    }
    rdr.deserialize()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| format!("row {}: {e}", i + 1)))
        .collect()
}
