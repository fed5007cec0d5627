//! Run configuration: a flat TOML document overlaid by command-line flags.

use std::path::{Path, PathBuf};

use dokc::expsum::CompressOptions;
use dokc::kernels::WeightFunctionSpec;
use dokc::mp::default_precision_for;
use dokc::solvers::{PdeParams, ScenarioName};
use dokc::timestepping::Scheme;
use dokc::{Error, Result};
use serde::{Deserialize, Serialize};

/// A scalar or a list of scalars.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Option<String>,
    /// Weight function catalogue name, overriding the scenario weight.
    pub weight: Option<String>,
    /// Kernel indices to compress; all by default.
    pub kernels: Option<Vec<u32>>,
    pub scheme: Option<OneOrMany<String>>,
    pub n: Option<OneOrMany<usize>>,
    pub gamma: Option<OneOrMany<f64>>,
    #[serde(rename = "T")]
    pub t_final: Option<f64>,
    /// Cells per axis of the PDE grid.
    pub grid: Option<usize>,
    /// AAA tolerance, or the tolerance list of a validation sweep.
    pub tol: Option<OneOrMany<f64>>,
    pub precision_bits: Option<u32>,
    /// Term cap per kernel.
    pub m: Option<usize>,
    pub cache: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub epsilon: Option<f64>,
    pub radius: Option<f64>,
    pub zero_forcing: Option<bool>,
    pub snapshot_times: Option<Vec<f64>>,
    pub check_recurrence: Option<bool>,
    pub newton_tol: Option<f64>,
}

/// Overrides from the command line.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    pub tol: Vec<f64>,
    pub scheme: Vec<String>,
    pub n: Vec<usize>,
    pub gamma: Vec<f64>,
    pub grid: Option<usize>,
    pub seed: Option<u64>,
    pub scenario: Option<String>,
    pub weight: Option<String>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Flags take precedence over file values.
    pub fn overlay(mut self, o: &Overrides) -> Self {
        let many = |v: &[f64]| (!v.is_empty()).then(|| OneOrMany::Many(v.to_vec()));
        self.out = o.out.clone().or(self.out);
        self.cache = o.cache.clone().or(self.cache);
        self.tol = many(&o.tol).or(self.tol);
        if !o.scheme.is_empty() {
            self.scheme = Some(OneOrMany::Many(o.scheme.clone()));
        }
        if !o.n.is_empty() {
            self.n = Some(OneOrMany::Many(o.n.clone()));
        }
        self.gamma = many(&o.gamma).or(self.gamma);
        self.grid = o.grid.or(self.grid);
        self.seed = o.seed.or(self.seed);
        self.scenario = o.scenario.clone().or(self.scenario);
        self.weight = o.weight.clone().or(self.weight);
        self
    }

    pub fn scenario(&self) -> Result<Option<ScenarioName>> {
        self.scenario.as_deref().map(str::parse).transpose()
    }

    pub fn require_scenario(&self) -> Result<ScenarioName> {
        self.scenario()?
            .ok_or_else(|| Error::config("no scenario given (config key `scenario`)"))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("dokc-out"))
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.cache.clone().unwrap_or_else(|| self.out_dir().join("cache"))
    }

    pub fn schemes(&self, default: &[Scheme]) -> Result<Vec<Scheme>> {
        match &self.scheme {
            None => Ok(default.to_vec()),
            Some(s) => s.to_vec().iter().map(|x| x.parse()).collect(),
        }
    }

    pub fn scheme(&self, default: Scheme) -> Result<Scheme> {
        let s = self.schemes(&[default])?;
        match s.as_slice() {
            [one] => Ok(*one),
            _ => Err(Error::config("this command takes a single scheme")),
        }
    }

    pub fn n_list(&self, default: &[usize]) -> Result<Vec<usize>> {
        let v = self.n.as_ref().map_or_else(|| default.to_vec(), OneOrMany::to_vec);
        if v.iter().any(|&n| n == 0) {
            return Err(Error::config("step counts must be positive"));
        }
        Ok(v)
    }

    pub fn n(&self, default: usize) -> Result<usize> {
        match self.n_list(&[default])?.as_slice() {
            [one] => Ok(*one),
            _ => Err(Error::config("this command takes a single step count")),
        }
    }

    pub fn gammas(&self) -> Result<Vec<f64>> {
        let v = self.gamma.as_ref().map_or_else(|| vec![1.0], OneOrMany::to_vec);
        if v.iter().any(|&g| !(g >= 1.0) || !g.is_finite()) {
            return Err(Error::config("grading exponents must be ≥ 1"));
        }
        Ok(v)
    }

    pub fn gamma(&self) -> Result<f64> {
        match self.gammas()?.as_slice() {
            [one] => Ok(*one),
            _ => Err(Error::config("this command takes a single grading exponent")),
        }
    }

    pub fn tolerances(&self, default: f64) -> Vec<f64> {
        self.tol.as_ref().map_or_else(|| vec![default], OneOrMany::to_vec)
    }

    pub fn tolerance(&self, default: f64) -> Result<f64> {
        match self.tolerances(default).as_slice() {
            [one] => Ok(*one),
            _ => Err(Error::config("this command takes a single tolerance")),
        }
    }

    pub fn compress_options(&self, tol: f64) -> Result<CompressOptions> {
        if !(tol > 1e-50 && tol < 1e-3) {
            return Err(Error::config(format!("tolerance {tol:e} outside (1e-50, 1e-3)")));
        }
        let bits = self.precision_bits.unwrap_or_else(|| default_precision_for(tol));
        let mut o = CompressOptions::new(tol).with_precision(bits);
        if let Some(m) = self.m {
            o = o.with_max_terms(m);
        }
        Ok(o)
    }

    /// Weight from `weight`, else from the scenario.
    pub fn weight_spec(&self) -> Result<WeightFunctionSpec> {
        if let Some(w) = &self.weight {
            return WeightFunctionSpec::from_name(w, 0);
        }
        match self.scenario()? {
            Some(ScenarioName::Example1) | Some(ScenarioName::Table1) => Ok(WeightFunctionSpec::exm1()),
            Some(ScenarioName::Example2) => Ok(WeightFunctionSpec::exm2()),
            Some(ScenarioName::Dowave2d) => {
                let r = self.radius.unwrap_or(0.5);
                WeightFunctionSpec::bump_truncated(2.0, r, 2.0 - r, 2.0, 2)
            }
            Some(other) => Err(Error::config(format!(
                "{other} has a space-dependent weight; give `weight` to compress one function"
            ))),
            None => Err(Error::config("give a `weight` or a `scenario`")),
        }
    }

    pub fn pde_params(&self) -> PdeParams {
        let d = PdeParams::default();
        PdeParams {
            cells: self.grid.unwrap_or(d.cells),
            epsilon: self.epsilon,
            t_final: self.t_final,
            seed: self.seed.unwrap_or(d.seed),
            radius: self.radius,
            zero_forcing: self.zero_forcing.unwrap_or(false),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("scenario = \"example1\"\nbogus = 1\n").is_err());
    }

    #[test]
    fn scalars_and_lists() {
        let c = RunConfig::from_toml("n = [10, 20]\ngamma = 3.0\nscheme = \"riia2\"\ntol = [1e-6, 1e-13]\nT = 2.0\n").unwrap();
        assert_eq!(c.n_list(&[]).unwrap(), vec![10, 20]);
        assert_eq!(c.gamma().unwrap(), 3.0);
        assert_eq!(c.scheme(Scheme::RadauIia3).unwrap(), Scheme::RadauIia2);
        assert_eq!(c.tolerances(1.0), vec![1e-6, 1e-13]);
        assert_eq!(c.t_final, Some(2.0));
    }

    #[test]
    fn flags_override_file() {
        let c = RunConfig::from_toml("n = 10\nseed = 1\n").unwrap().overlay(&Overrides {
            n: vec![40],
            seed: Some(7),
            ..Default::default()
        });
        assert_eq!(c.n(0).unwrap(), 40);
        assert_eq!(c.seed, Some(7));
    }

    #[test]
    fn scenario_weights() {
        let c = RunConfig {
            scenario: Some("example2".into()),
            ..Default::default()
        };
        assert_eq!(c.weight_spec().unwrap().id(), "exm2");
        let c = RunConfig {
            scenario: Some("geometric_eta".into()),
            ..Default::default()
        };
        assert!(c.weight_spec().is_err());
    }

    #[test]
    fn bad_values_are_config_errors() {
        let c = RunConfig::from_toml("gamma = 0.5\n").unwrap();
        assert!(c.gammas().is_err());
        let c = RunConfig::default();
        assert!(c.compress_options(1e-2).is_err());
    }
}
