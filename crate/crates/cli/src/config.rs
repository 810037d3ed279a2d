//! Experiment configuration.
//!
//! Config files are TOML with one table per module:
//!
//! ```toml
//! [experiment]
//! name = "focusing-table"
//! output_dir = "results"
//! format = "both"
//! seed = 7
//!
//! [channel-model]
//! presets = ["ts2.5-model2"]
//!
//! [beamformer]
//! eq_len = 33
//!
//! [link-sim]
//! antennas = [4]
//! realizations = 200
//! ```
//!
//! Unknown tables and keys are rejected. Command-line flags override file
//! values.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use trbeam_core::analytics::Modulation;
use trbeam_core::beamformer::EqualizerDesign;
use trbeam_core::channel::{PdpSpec, DEFAULT_GAIN};

use crate::CliError;

/// Built-in experiment names.
pub const EXPERIMENTS: [&str; 8] = [
    "time-compression",
    "le-sweep",
    "params-vs-L",
    "focusing-table",
    "ber-approx",
    "ber-tr-vs-etr",
    "ber-scenarios",
    "power-check",
];

/// Output file formats.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Csv,
    Json,
    Both,
}

impl Format {
    pub fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }

    pub fn json(self) -> bool {
        matches!(self, Format::Json | Format::Both)
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentSection {
    name: Option<String>,
    output_dir: Option<PathBuf>,
    format: Option<Format>,
    seed: Option<u64>,
    full_scale: Option<bool>,
}

/// Channel overrides: a list of presets, or one custom PDP.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub presets: Option<Vec<String>>,
    pub gain: Option<f64>,
    /// 1 for a single cluster, 2 for two clusters.
    pub model: Option<u8>,
    pub ts_ns: Option<f64>,
    pub len: Option<usize>,
    pub sigma_ns: Option<f64>,
    pub sigma1_ns: Option<f64>,
    pub sigma2_ns: Option<f64>,
    pub l1: Option<usize>,
    pub l2: Option<usize>,
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamformerSection {
    pub eq_len: Option<usize>,
    pub design: Option<EqualizerDesign>,
    /// Equalizer lengths for `le-sweep`.
    pub le_grid: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSection {
    pub antennas: Option<Vec<usize>>,
    pub modulation: Option<Vec<Modulation>>,
    pub snr_db: Option<Vec<f64>>,
    pub realizations: Option<u64>,
    pub symbols: Option<usize>,
    pub rho: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    experiment: ExperimentSection,
    #[serde(default, rename = "channel-model")]
    channel: ChannelSection,
    #[serde(default)]
    beamformer: BeamformerSection,
    #[serde(default, rename = "link-sim")]
    link: LinkSection,
}

/// Fully merged experiment description.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub output_dir: PathBuf,
    pub format: Format,
    pub seed: u64,
    /// Full-scale counts (1000 realizations of 10^6 symbols).
    pub full_scale: bool,
    pub channel: ChannelSection,
    pub beamformer: BeamformerSection,
    pub link: LinkSection,
    /// Worker cap; does not influence results.
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(experiment: &str) -> Self {
        ExperimentConfig {
            experiment: experiment.to_string(),
            output_dir: PathBuf::from("results"),
            format: Format::Csv,
            seed: 1,
            full_scale: false,
            channel: ChannelSection::default(),
            beamformer: BeamformerSection::default(),
            link: LinkSection::default(),
            threads: None,
        }
    }

    /// Parses a TOML config. The experiment name may be left for the command line.
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let mut cfg = ExperimentConfig::new(file.experiment.name.as_deref().unwrap_or(""));
        if let Some(dir) = file.experiment.output_dir {
            cfg.output_dir = dir;
        }
        cfg.format = file.experiment.format.unwrap_or_default();
        cfg.seed = file.experiment.seed.unwrap_or(cfg.seed);
        cfg.full_scale = file.experiment.full_scale.unwrap_or(false);
        cfg.channel = file.channel;
        cfg.beamformer = file.beamformer;
        cfg.link = file.link;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn gain(&self) -> f64 {
        self.channel.gain.unwrap_or(DEFAULT_GAIN)
    }

    pub fn rho(&self) -> f64 {
        self.link.rho.unwrap_or(1.0)
    }

    /// Channel specs selected by the overrides, or `None` to use the
    /// experiment defaults. Each spec is paired with a row label.
    pub fn specs(&self) -> Result<Option<Vec<(String, PdpSpec)>>, CliError> {
        let v = channel_violations(self);
        if !v.is_empty() {
            return Err(CliError::Config(v.join("; ")));
        }
        let ch = &self.channel;
        if let Some(names) = &ch.presets {
            return names
                .iter()
                .map(|n| PdpSpec::preset(n, self.gain()).map(|s| (n.clone(), s)).map_err(CliError::from))
                .collect::<Result<Vec<_>, _>>()
                .map(Some);
        }
        Ok(custom_spec(ch, self.gain()).transpose().map_err(CliError::Config)?.map(|s| vec![("custom".to_string(), s)]))
    }

    /// Resolves the specs, falling back to the given presets.
    pub fn specs_or(&self, defaults: &[&str]) -> Result<Vec<(String, PdpSpec)>, CliError> {
        match self.specs()? {
            Some(s) => Ok(s),
            None => defaults
                .iter()
                .map(|n| PdpSpec::preset(n, self.gain()).map(|s| (n.to_string(), s)).map_err(CliError::from))
                .collect(),
        }
    }
}

/// Builds the custom spec, `None` if no `model` key is present.
fn custom_spec(ch: &ChannelSection, gain: f64) -> Option<Result<PdpSpec, String>> {
    let model = ch.model?;
    let need =
        |name: &str, v: Option<f64>| v.ok_or_else(|| format!("channel-model.{name} is required for a custom model"));
    let need_n =
        |name: &str, v: Option<usize>| v.ok_or_else(|| format!("channel-model.{name} is required for a custom model"));
    let build = || -> Result<PdpSpec, String> {
        let ts = need("ts_ns", ch.ts_ns)? * 1e-9;
        let len = need_n("len", ch.len)?;
        match model {
            1 => Ok(PdpSpec::one_cluster(ts, need("sigma_ns", ch.sigma_ns)? * 1e-9, len, gain)),
            2 => Ok(PdpSpec::two_cluster(
                ts,
                need("sigma1_ns", ch.sigma1_ns)? * 1e-9,
                need("sigma2_ns", ch.sigma2_ns)? * 1e-9,
                len,
                need_n("l1", ch.l1)?,
                need_n("l2", ch.l2)?,
                need("gamma", ch.gamma)?,
                gain,
            )),
            m => Err(format!("channel-model.model must be 1 or 2, got {m}")),
        }
    };
    Some(build())
}

fn channel_violations(cfg: &ExperimentConfig) -> Vec<String> {
    let ch = &cfg.channel;
    let mut v = Vec::new();
    let gain = cfg.gain();
    if !(gain > 0.0 && gain.is_finite()) {
        v.push("channel-model.gain must be positive".to_string());
    }
    let custom_keys = [ch.ts_ns, ch.sigma_ns, ch.sigma1_ns, ch.sigma2_ns, ch.gamma].iter().any(Option::is_some)
        || [ch.len, ch.l1, ch.l2].iter().any(Option::is_some);
    match (&ch.presets, ch.model) {
        (Some(_), Some(_)) => v.push("channel-model: presets and a custom model are mutually exclusive".into()),
        (Some(names), None) => {
            if custom_keys {
                v.push("channel-model: custom PDP keys require `model`".into());
            }
            if names.is_empty() {
                v.push("channel-model.presets must not be empty".into());
            }
            for n in names {
                if PdpSpec::preset(n, 1.0).is_err() {
                    v.push(format!("unknown preset {n:?}"));
                }
            }
        }
        (None, Some(_)) => match custom_spec(ch, if gain > 0.0 { gain } else { 1.0 }) {
            Some(Ok(spec)) => v.extend(spec.violations()),
            Some(Err(e)) => v.push(e),
            None => {}
        },
        (None, None) => {
            if custom_keys {
                v.push("channel-model: custom PDP keys require `model`".into());
            }
        }
    }
    v
}

/// Every problem found in `cfg`; empty when the config is runnable.
pub fn validate_config(cfg: &ExperimentConfig) -> Vec<String> {
    let mut v = Vec::new();
    if !EXPERIMENTS.contains(&cfg.experiment.as_str()) {
        v.push(format!("unknown experiment {:?}; expected one of {}", cfg.experiment, EXPERIMENTS.join(", ")));
    }
    v.extend(channel_violations(cfg));
    let bf = &cfg.beamformer;
    if bf.eq_len == Some(0) {
        v.push("beamformer.eq_len must be at least 1".into());
    }
    if let Some(grid) = &bf.le_grid {
        if grid.is_empty() || grid.contains(&0) {
            v.push("beamformer.le_grid must be nonempty with positive entries".into());
        }
    }
    let link = &cfg.link;
    if let Some(m) = &link.antennas {
        if m.is_empty() || m.contains(&0) {
            v.push("link-sim.antennas must be nonempty with positive entries".into());
        }
    }
    if link.modulation.as_ref().is_some_and(Vec::is_empty) {
        v.push("link-sim.modulation must not be empty".into());
    }
    if let Some(snr) = &link.snr_db {
        if snr.is_empty() {
            v.push("link-sim.snr_db must not be empty".into());
        }
        if snr.iter().any(|s| !s.is_finite()) {
            v.push("link-sim.snr_db entries must be finite".into());
        }
    }
    if link.realizations == Some(0) {
        v.push("link-sim.realizations must be at least 1".into());
    }
    if link.symbols == Some(0) {
        v.push("link-sim.symbols must be at least 1".into());
    }
    if link.rho.is_some_and(|r| !(r > 0.0 && r.is_finite())) {
        v.push("link-sim.rho must be positive".into());
    }
    if cfg.threads == Some(0) {
        v.push("thread count must be at least 1".into());
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ExperimentConfig {
        ExperimentConfig::from_toml(text).unwrap()
    }

    #[test]
    fn preset_is_valid() {
        let c = cfg("[experiment]\nname = \"le-sweep\"\n[channel-model]\npresets = [\"ts2.5-model2\"]\n");
        assert!(validate_config(&c).is_empty());
        let specs = c.specs().unwrap().unwrap();
        assert_eq!(specs[0].1, PdpSpec::preset("ts2.5-model2", DEFAULT_GAIN).unwrap());
    }

    #[test]
    fn unknown_keys_and_sections_are_rejected() {
        assert!(ExperimentConfig::from_toml("[link-sim]\nantenas = [4]\n").is_err());
        assert!(ExperimentConfig::from_toml("[plots]\nx = 1\n").is_err());
        assert!(ExperimentConfig::from_toml("[experiment]\nname = 3\n").is_err());
    }

    #[test]
    fn cluster_order_violation() {
        let c = cfg("[experiment]\nname = \"ber-approx\"\n[channel-model]\nmodel = 2\nts_ns = 5.0\nlen = 17\n\
                     sigma1_ns = 8.0\nsigma2_ns = 14.0\nl1 = 9\nl2 = 5\ngamma = 0.5\n");
        let v = validate_config(&c);
        assert_eq!(v.len(), 1, "{v:?}");
        assert!(c.specs().is_err());
    }

    #[test]
    fn custom_single_cluster() {
        let c = cfg(
            "[experiment]\nname = \"power-check\"\n[channel-model]\nmodel = 1\nts_ns = 5.0\nlen = 17\nsigma_ns = 8.0\n",
        );
        assert!(validate_config(&c).is_empty());
        let specs = c.specs().unwrap().unwrap();
        assert_eq!(specs[0].1, PdpSpec::preset("ts5-model1", DEFAULT_GAIN).unwrap());
    }

    #[test]
    fn missing_and_conflicting_channel_keys() {
        let c = cfg("[experiment]\nname = \"power-check\"\n[channel-model]\nmodel = 1\nts_ns = 5.0\n");
        assert_eq!(validate_config(&c).len(), 1);
        let c = cfg("[experiment]\nname = \"power-check\"\n[channel-model]\nlen = 5\n");
        assert_eq!(validate_config(&c).len(), 1);
        let c = cfg("[experiment]\nname = \"power-check\"\n[channel-model]\npresets = [\"ts5\", \"ts5-model1\"]\n");
        assert_eq!(validate_config(&c), vec!["unknown preset \"ts5\"".to_string()]);
    }

    #[test]
    fn link_violations() {
        let c = cfg("[experiment]\nname = \"nope\"\n[link-sim]\nsnr_db = []\nrealizations = 0\nantennas = [0]\n");
        assert_eq!(validate_config(&c).len(), 4);
        let mut ok = ExperimentConfig::new("ber-approx");
        assert!(validate_config(&ok).is_empty());
        ok.threads = Some(0);
        assert_eq!(validate_config(&ok).len(), 1);
    }

    #[test]
    fn file_values_are_read() {
        let c = cfg("[experiment]\nname = \"ber-approx\"\nformat = \"both\"\nseed = 9\noutput_dir = \"x\"\nfull_scale = true\n\
                     [beamformer]\ndesign = \"least-squares\"\n[link-sim]\nmodulation = [\"qpsk\"]\nsnr_db = [0.0, 3.5]\n");
        assert_eq!(c.format, Format::Both);
        assert_eq!(c.seed, 9);
        assert!(c.full_scale);
        assert_eq!(c.output_dir, PathBuf::from("x"));
        assert_eq!(c.beamformer.design, Some(EqualizerDesign::LeastSquares));
        assert_eq!(c.link.modulation, Some(vec![Modulation::Qpsk]));
        assert_eq!(c.link.snr_db, Some(vec![0.0, 3.5]));
    }
}
