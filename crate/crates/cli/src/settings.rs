use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use flowtwin::config::{ConfigDoc, ModelConfig};

const SECTION: &str = "experiment";

/// Experiment parameters as read from the `[experiment]` section. Unset
/// values fall back to per-command defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub flows_ul_per_min: Option<Vec<f64>>,
    /// W.
    pub total_power: Option<f64>,
    pub linear_range_ul_per_min: f64,
    pub sample_rate: f64,
    pub duration: Option<f64>,
    pub schedule: Option<PathBuf>,
    pub seed: u64,
    pub segment_length: usize,
    pub overlap: f64,
}

impl Default for Experiment {
    fn default() -> Self {
        Self {
            flows_ul_per_min: None,
            total_power: None,
            linear_range_ul_per_min: 0.5,
            sample_rate: 0.24,
            duration: None,
            schedule: None,
            seed: 1,
            segment_length: 1024,
            overlap: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub model: ModelConfig<f64>,
    pub experiment: Experiment,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub qt_ul_per_min: Option<Vec<f64>>,
    pub pt_mw: Option<f64>,
    pub fs: Option<f64>,
    pub duration: Option<f64>,
    pub schedule: Option<PathBuf>,
}

impl RunConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut doc = ConfigDoc::parse(text)?;
        let model = ModelConfig::from_doc(&mut doc)?;
        let mut e = Experiment::default();
        if let Some(v) = doc.take_list(SECTION, "flows_ul_per_min")? {
            e.flows_ul_per_min = Some(v);
        }
        e.total_power = doc.take(SECTION, "total_power")?;
        if let Some(v) = doc.take(SECTION, "linear_range_ul_per_min")? {
            e.linear_range_ul_per_min = v;
        }
        if let Some(v) = doc.take(SECTION, "sample_rate")? {
            e.sample_rate = v;
        }
        e.duration = doc.take(SECTION, "duration")?;
        e.schedule = doc
            .take::<String>(SECTION, "schedule")?
            .map(|p| base_dir.join(p));
        if let Some(v) = doc.take(SECTION, "seed")? {
            e.seed = v;
        }
        if let Some(v) = doc.take(SECTION, "segment_length")? {
            e.segment_length = v;
        }
        if let Some(v) = doc.take(SECTION, "overlap")? {
            e.overlap = v;
        }
        doc.finish()?;
        let config = Self { model, experiment: e };
        config.validate()?;
        Ok(config)
    }

    /// Reads `path`, or returns the defaults when no file is given.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).with_context(|| format!("in config {}", path.display()))
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        let e = &mut self.experiment;
        if let Some(v) = o.seed {
            e.seed = v;
        }
        if let Some(v) = &o.qt_ul_per_min {
            e.flows_ul_per_min = Some(v.clone());
        }
        if let Some(v) = o.pt_mw {
            e.total_power = Some(v * 1e-3);
        }
        if let Some(v) = o.fs {
            e.sample_rate = v;
        }
        if let Some(v) = o.duration {
            e.duration = Some(v);
        }
        if let Some(v) = &o.schedule {
            e.schedule = Some(v.clone());
        }
        self.validate()
    }

    fn validate(&self) -> Result<()> {
        let e = &self.experiment;
        if let Some(p) = e.total_power {
            if !(p > 0.0) {
                bail!("total_power must be positive, got {p}");
            }
        }
        if !(e.sample_rate > 0.0) {
            bail!("sample_rate must be positive, got {}", e.sample_rate);
        }
        if let Some(d) = e.duration {
            if !(d > 0.0) {
                bail!("duration must be positive, got {d}");
            }
        }
        if !(e.linear_range_ul_per_min > 0.0) {
            bail!("linear_range_ul_per_min must be positive");
        }
        if e.flows_ul_per_min.iter().flatten().any(|q| !q.is_finite()) {
            bail!("flows_ul_per_min must be finite");
        }
        if let Some(s) = &e.schedule {
            if !s.is_file() {
                bail!("schedule file {} does not exist", s.display());
            }
        }
        Ok(())
    }

    /// Full configuration text that reproduces this run. `schedule` is
    /// written as given; callers place the file next to the output.
    pub fn resolved_text(&self, schedule: Option<&str>) -> String {
        let mut buf = Vec::new();
        self.model.write(&mut buf).expect("writing to memory");
        let mut s = String::from_utf8(buf).expect("config text is UTF-8");
        let e = &self.experiment;
        s.push_str("\n[experiment]\n");
        if let Some(flows) = &e.flows_ul_per_min {
            let list: Vec<String> = flows.iter().map(|q| q.to_string()).collect();
            writeln!(s, "flows_ul_per_min = {}", list.join(", ")).unwrap();
        }
        if let Some(p) = e.total_power {
            writeln!(s, "total_power = {p:e}").unwrap();
        }
        writeln!(s, "linear_range_ul_per_min = {}", e.linear_range_ul_per_min).unwrap();
        writeln!(s, "sample_rate = {:e}", e.sample_rate).unwrap();
        if let Some(d) = e.duration {
            writeln!(s, "duration = {d:e}").unwrap();
        }
        if let Some(name) = schedule {
            writeln!(s, "schedule = {name}").unwrap();
        }
        writeln!(s, "seed = {}", e.seed).unwrap();
        writeln!(s, "segment_length = {}", e.segment_length).unwrap();
        writeln!(s, "overlap = {:e}", e.overlap).unwrap();
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn experiment_keys_parse() {
        let c = RunConfig::parse(
            "[experiment]\nflows_ul_per_min = 0, 0.3\ntotal_power = 1e-4\nseed = 9\n",
            Path::new("."),
        )
        .unwrap();
        assert_eq!(c.experiment.flows_ul_per_min, Some(vec![0.0, 0.3]));
        assert_eq!(c.experiment.total_power, Some(1e-4));
        assert_eq!(c.experiment.seed, 9);
    }

    #[test]
    fn unknown_experiment_key_is_rejected() {
        let err = RunConfig::parse("[experiment]\nsead = 9\n", Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("unknown key `sead`"), "{err}");
    }

    #[test]
    fn overrides_convert_units() {
        let mut c = RunConfig::default();
        c.apply(&Overrides {
            pt_mw: Some(0.1),
            qt_ul_per_min: Some(vec![0.3]),
            ..Default::default()
        })
        .unwrap();
        assert!((c.experiment.total_power.unwrap() - 1e-4).abs() < 1e-20);
        assert_eq!(c.experiment.flows_ul_per_min, Some(vec![0.3]));
        assert!(c.apply(&Overrides { pt_mw: Some(-1.0), ..Default::default() }).is_err());
    }

    #[test]
    fn resolved_text_round_trips() {
        let mut c = RunConfig::default();
        c.experiment.flows_ul_per_min = Some(vec![0.0, 0.1, 0.30000000000000004]);
        c.experiment.total_power = Some(1e-4);
        c.experiment.duration = Some(1234.5);
        let text = c.resolved_text(None);
        let back = RunConfig::parse(&text, Path::new(".")).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.resolved_text(None), text);
    }
}
