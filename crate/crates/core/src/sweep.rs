//! Cartesian parameter sweeps, run in parallel with ordered output.

use rayon::prelude::*;
use thiserror::Error;

use crate::config::ScenarioConfig;
use crate::sim::{run, MetricsReport};

pub const DEFAULT_SWEEP_CAP: usize = 10_000;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("sweep expands to {size} points, above the cap of {cap}")]
    TooLarge { size: usize, cap: usize },
    #[error("axis `{0}` has no values")]
    EmptyAxis(String),
    #[error("point {index}: {key} = {value}: {message}")]
    BadValue { index: usize, key: String, value: String, message: String },
    #[error("point {index} failed: {message}\n--- configuration ---\n{config}")]
    PointFailed { index: usize, message: String, config: String },
    #[error("could not build worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub base: ScenarioConfig,
    /// `(key, values)` pairs; the first axis varies slowest.
    pub axes: Vec<(String, Vec<String>)>,
    pub cap: usize,
}

impl SweepSpec {
    pub fn new(base: ScenarioConfig) -> Self {
        Self { base, axes: Vec::new(), cap: DEFAULT_SWEEP_CAP }
    }

    pub fn vary<S: Into<String>>(mut self, key: &str, values: impl IntoIterator<Item = S>) -> Self {
        self.axes.push((key.to_string(), values.into_iter().map(Into::into).collect()));
        self
    }

    /// Parses `key=v1,v2,...`.
    pub fn vary_arg(self, arg: &str) -> Result<Self, String> {
        let (key, values) = arg.split_once('=').ok_or_else(|| format!("expected key=v1,v2,... got `{arg}`"))?;
        let values: Vec<&str> = values.split(',').map(str::trim).filter(|v| !v.is_empty()).collect();
        Ok(self.vary(key.trim(), values))
    }

    pub fn size(&self) -> usize {
        self.axes.iter().map(|(_, v)| v.len()).product()
    }

    /// Every point in row-major order. Each point's id is the base id with
    /// the varied values appended.
    pub fn expand(&self) -> Result<Vec<ScenarioConfig>, SweepError> {
        if let Some((k, _)) = self.axes.iter().find(|(_, v)| v.is_empty()) {
            return Err(SweepError::EmptyAxis(k.clone()));
        }
        let size = self.size();
        if size > self.cap {
            return Err(SweepError::TooLarge { size, cap: self.cap });
        }
        let mut out = Vec::with_capacity(size);
        for index in 0..size {
            let mut cfg = self.base.clone();
            let mut id = self.base.sim.id.clone();
            let mut rem = index;
            let mut picks = vec![0; self.axes.len()];
            for (a, (_, values)) in self.axes.iter().enumerate().rev() {
                picks[a] = rem % values.len();
                rem /= values.len();
            }
            for ((key, values), &p) in self.axes.iter().zip(&picks) {
                let value = &values[p];
                cfg.set(key, value).map_err(|message| SweepError::BadValue {
                    index,
                    key: key.clone(),
                    value: value.clone(),
                    message,
                })?;
                let short = key.rsplit('.').next().unwrap_or(key);
                id.push_str(&format!(":{short}={value}"));
            }
            cfg.sim.id = id;
            out.push(cfg);
        }
        Ok(out)
    }
}

/// Runs every point on `jobs` worker threads (0 picks the machine default).
/// Reports come back in expansion order.
pub fn run_sweep(spec: &SweepSpec, jobs: usize) -> Result<Vec<MetricsReport>, SweepError> {
    let points = spec.expand()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| SweepError::Pool(e.to_string()))?;
    let results: Vec<_> = pool.install(|| points.par_iter().map(run).collect());
    results
        .into_iter()
        .zip(&points)
        .enumerate()
        .map(|(index, (r, cfg))| {
            r.map_err(|e| SweepError::PointFailed { index, message: e.to_string(), config: cfg.to_text() })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn row_major_order_and_ids() {
        let mut base = ScenarioConfig::default();
        base.sim.id = "s".into();
        let pts = SweepSpec::new(base)
            .vary("duplex.m_dl", ["1", "8"])
            .vary("duplex.n_gp", ["0", "1", "2"])
            .expand()
            .unwrap();
        let got: Vec<(u32, u32)> = pts.iter().map(|c| (c.duplex.m_dl, c.duplex.n_gp)).collect();
        assert_eq!(got, vec![(1, 0), (1, 1), (1, 2), (8, 0), (8, 1), (8, 2)]);
        assert_eq!(pts[4].sim.id, "s:m_dl=8:n_gp=1");
    }

    #[test]
    fn cap_and_bad_values() {
        let mut spec = SweepSpec::new(ScenarioConfig::default()).vary("sim.seed", (0..200).map(|s| s.to_string()));
        spec = spec.vary("duplex.m_dl", (1..=100).map(|s| s.to_string()));
        assert!(matches!(spec.expand(), Err(SweepError::TooLarge { size: 20_000, .. })));
        let bad = SweepSpec::new(ScenarioConfig::default()).vary("harq.n", ["4", "-1"]);
        assert!(matches!(bad.expand(), Err(SweepError::BadValue { index: 1, .. })));
        assert!(SweepSpec::new(ScenarioConfig::default()).vary_arg("nokey").is_err());
    }

    #[test]
    fn harq_off_value_disables_harq() {
        let pts = SweepSpec::new(ScenarioConfig::default()).vary("harq.n", ["8", "off"]).expand().unwrap();
        assert!(pts[0].harq.enabled && pts[0].harq.n == 8);
        assert!(!pts[1].harq.enabled);
    }

    proptest! {
        #[test]
        fn expansion_size_is_product(lens in prop::collection::vec(1usize..5, 0..4)) {
            let keys = ["sim.seed", "duplex.m_dl", "duplex.n_gp", "harq.n"];
            let mut spec = SweepSpec::new(ScenarioConfig::default());
            for (k, n) in keys.iter().zip(&lens) {
                spec = spec.vary(k, (1..=*n).map(|v| v.to_string()));
            }
            prop_assert_eq!(spec.expand().unwrap().len(), lens.iter().product::<usize>());
        }
    }
}
