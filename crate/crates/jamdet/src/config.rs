//! TOML run configuration for the command-line harness.
//!
//! A config file carries a scenario plus at most one section per subcommand.
//! Unknown keys are rejected so typos fail loudly instead of silently using
//! defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detectors::{DetectorKind, DetectorSpec};
use crate::error::{JamdetError, Result};
use crate::harness::{SweepKind, SweepSpec};
use crate::signal::{Hypothesis, JammerSpec, NoiseCovariance, Scenario};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Rayon thread count; 0 or absent means the library default.
    #[serde(default)]
    pub threads: usize,
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub calibrate: Option<CalibrateConfig>,
    #[serde(default)]
    pub analytic: Option<AnalyticConfig>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub gen_samples: Option<GenSamplesConfig>,
}

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub k: usize,
    pub n: usize,
    pub m: usize,
    pub gamma_s_db: f64,
    #[serde(default = "one")]
    pub sigma2_w: f64,
    #[serde(default = "one")]
    pub sigma2_hs: f64,
    #[serde(default = "one")]
    pub sigma2_hj: f64,
    #[serde(default)]
    pub jammers: Vec<JammerSpec>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateConfig {
    pub detector: DetectorKind,
    pub pfa_target: f64,
    pub trials: usize,
    /// Optional JDMX1 file of H0 sample matrices; when set, the threshold is
    /// taken from these samples instead of synthetic draws.
    #[serde(default)]
    pub samples_file: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyticConfig {
    pub detector: DetectorKind,
    /// False-alarm target for threshold inversion.
    #[serde(default)]
    pub pfa_target: Option<f64>,
    /// Detector-domain threshold grid for false-alarm evaluation.
    #[serde(default)]
    pub eta_grid: Vec<f64>,
    /// Tie-break ladder spacing relative to sigma2_w.
    #[serde(default = "default_epsilon_rel")]
    pub epsilon_rel: f64,
}

fn default_epsilon_rel() -> f64 {
    1e-3
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub kind: SweepKind,
    pub axis1: Vec<f64>,
    #[serde(default)]
    pub axis2: Vec<f64>,
    pub detectors: Vec<DetectorKind>,
    pub trials: usize,
    #[serde(default)]
    pub calib_trials: usize,
    #[serde(default = "default_pfa")]
    pub pfa_target: f64,
    #[serde(default)]
    pub multi_jn_equal_snr: bool,
}

fn default_pfa() -> f64 {
    0.1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenSamplesConfig {
    pub count: usize,
    #[serde(default = "default_hypothesis")]
    pub hypothesis: String,
}

fn default_hypothesis() -> String {
    "h0".into()
}

impl RunConfig {
    pub fn from_str(s: &str) -> Result<RunConfig> {
        let cfg: RunConfig =
            toml::from_str(s).map_err(|e| JamdetError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        Self::from_str(&text)
    }

    fn validate(&self) -> Result<()> {
        self.scenario(self.seed)
            .validate()
            .map_err(|e| JamdetError::Config(e.to_string()))?;
        if let Some(c) = &self.calibrate {
            if !(0.0 < c.pfa_target && c.pfa_target < 1.0) {
                return Err(JamdetError::Config("pfa_target must lie in (0, 1)".into()));
            }
        }
        if let Some(a) = &self.analytic {
            if a.pfa_target.is_none() && a.eta_grid.is_empty() {
                return Err(JamdetError::Config(
                    "analytic section needs pfa_target or eta_grid".into(),
                ));
            }
            if a.epsilon_rel <= 0.0 {
                return Err(JamdetError::Config("epsilon_rel must be positive".into()));
            }
        }
        if let Some(g) = &self.gen_samples {
            if g.count == 0 {
                return Err(JamdetError::Config("gen_samples count must be >= 1".into()));
            }
            parse_hypothesis(&g.hypothesis)?;
        }
        Ok(())
    }

    /// Materializes the scenario with the given seed.
    pub fn scenario(&self, seed: u64) -> Scenario {
        let s = &self.scenario;
        Scenario {
            k: s.k,
            n: s.n,
            m: s.m,
            jammers: s.jammers.clone(),
            gamma_s_db: s.gamma_s_db,
            sigma2_w: s.sigma2_w,
            sigma2_hs: s.sigma2_hs,
            sigma2_hj: s.sigma2_hj,
            noise_cov: NoiseCovariance::White(s.sigma2_w),
            seed,
        }
    }

    /// Builds a detector spec for a kind, taking its parameters from the
    /// scenario (assumed M, known noise variance, known H0 variance).
    pub fn detector(&self, kind: DetectorKind) -> DetectorSpec {
        let sc = self.scenario(self.seed);
        let sigma2_h0 = sc.ps() * sc.sigma2_hs + sc.sigma2_w;
        DetectorSpec::new(kind, sc.m, sc.sigma2_w, sigma2_h0)
    }

    /// Materializes a sweep spec; `seed` overrides the config seed.
    pub fn sweep_spec(&self, seed: u64) -> Result<SweepSpec> {
        let sw = self
            .sweep
            .as_ref()
            .ok_or_else(|| JamdetError::Config("config has no [sweep] section".into()))?;
        Ok(SweepSpec {
            kind: sw.kind,
            base: self.scenario(seed),
            axis1: sw.axis1.clone(),
            axis2: sw.axis2.clone(),
            detectors: sw.detectors.iter().map(|k| self.detector(*k)).collect(),
            trials: sw.trials,
            calib_trials: if sw.calib_trials == 0 {
                sw.trials
            } else {
                sw.calib_trials
            },
            pfa_target: sw.pfa_target,
            seed,
            multi_jn_equal_snr: sw.multi_jn_equal_snr,
        })
    }
}

pub fn parse_hypothesis(s: &str) -> Result<Hypothesis> {
    match s.to_ascii_lowercase().as_str() {
        "h0" => Ok(Hypothesis::H0),
        "h1" => Ok(Hypothesis::H1),
        "h2" => Ok(Hypothesis::H2),
        other => Err(JamdetError::Config(format!("unknown hypothesis {other}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
seed = 7
[scenario]
k = 8
n = 20
m = 1
gamma_s_db = 5.0
[[scenario.jammers]]
gamma_j_db = -5.0
channel_corr = 0.0
symbol_corr = 0.0
"#;

    #[test]
    fn parses_minimal_config() {
        let cfg = RunConfig::from_str(BASE).unwrap();
        assert_eq!(cfg.seed, 7);
        let sc = cfg.scenario(cfg.seed);
        assert_eq!((sc.k, sc.n, sc.m), (8, 20, 1));
        assert_eq!(sc.sigma2_w, 1.0);
    }

    #[test]
    fn rejects_unknown_keys() {
        let text = format!("{BASE}\nbogus = 1\n");
        assert!(matches!(
            RunConfig::from_str(&text),
            Err(JamdetError::Config(_))
        ));
        let text = format!("{BASE}\n[calibrate]\ndetector = \"ssv\"\npfa_target = 0.1\ntrials = 1000\ntypo = 2\n");
        assert!(matches!(
            RunConfig::from_str(&text),
            Err(JamdetError::Config(_))
        ));
    }

    #[test]
    fn rejects_invalid_scenario() {
        let text = BASE.replace("k = 8", "k = 25");
        assert!(matches!(
            RunConfig::from_str(&text),
            Err(JamdetError::Config(_))
        ));
    }

    #[test]
    fn sweep_spec_fills_defaults() {
        let text = format!(
            "{BASE}\n[sweep]\nkind = \"pd_vs_gamma_j\"\naxis1 = [-10.0, -5.0]\ndetectors = [\"ssv\", \"rsv\"]\ntrials = 500\n"
        );
        let cfg = RunConfig::from_str(&text).unwrap();
        let spec = cfg.sweep_spec(99).unwrap();
        assert_eq!(spec.kind, SweepKind::PdVsGammaJ);
        assert_eq!(spec.calib_trials, 500);
        assert_eq!(spec.pfa_target, 0.1);
        assert_eq!(spec.seed, 99);
        assert_eq!(spec.detectors.len(), 2);
    }

    #[test]
    fn hypothesis_parsing() {
        assert_eq!(parse_hypothesis("H1").unwrap(), Hypothesis::H1);
        assert!(parse_hypothesis("h3").is_err());
    }
}
