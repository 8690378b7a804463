//! Experiment specification read from JSON, with presets for each scenario.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sspca::sampler::{Family, SpikedCovarianceSpec};
use sspca::scatter::ScatterKind;
use sspca::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    #[serde(alias = "LeadingEigvec")]
    LeadingEigvec,
    #[serde(alias = "TopM")]
    TopM,
    #[serde(alias = "TuneHistogram")]
    TuneHistogram,
    #[serde(alias = "RuntimeBench")]
    RuntimeBench,
    #[serde(alias = "FitCsv")]
    FitCsv,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::LeadingEigvec => "leading_eigvec",
            Scenario::TopM => "top_m",
            Scenario::TuneHistogram => "tune_histogram",
            Scenario::RuntimeBench => "runtime_bench",
            Scenario::FitCsv => "fit_csv",
        }
    }

    pub fn is_simulation(self) -> bool {
        matches!(self, Scenario::LeadingEigvec | Scenario::TopM | Scenario::TuneHistogram)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    /// Truncated power on the Pearson covariance.
    #[serde(rename = "TP")]
    Tp,
    /// Truncated power on multivariate Kendall's tau.
    #[serde(rename = "ECA")]
    Eca,
    /// Truncated power on the SSCM about the spatial median.
    #[serde(rename = "SSPCA")]
    Sspca,
    /// SSPCA started from the Fantope initializer.
    #[serde(rename = "SSPCA_FP")]
    SspcaFp,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Tp, Method::Eca, Method::Sspca, Method::SspcaFp];

    pub fn label(self) -> &'static str {
        match self {
            Method::Tp => "TP",
            Method::Eca => "ECA",
            Method::Sspca => "SSPCA",
            Method::SspcaFp => "SSPCA_FP",
        }
    }

    pub fn scatter_kind(self) -> ScatterKind {
        match self {
            Method::Tp => ScatterKind::Pearson,
            Method::Eca => ScatterKind::KendallTau,
            Method::Sspca | Method::SspcaFp => ScatterKind::Sscm,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown method {s:?} (expected TP, ECA, SSPCA or SSPCA_FP)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KRule {
    /// The true cardinality of the simulated component.
    Oracle,
    /// Chosen per replication by split-sample tuning.
    Tuned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KChoice {
    Fixed(usize),
    Rule(KRule),
}

impl KChoice {
    pub const ORACLE: KChoice = KChoice::Rule(KRule::Oracle);
    pub const TUNED: KChoice = KChoice::Rule(KRule::Tuned);
}

impl fmt::Display for KChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KChoice::Fixed(k) => write!(f, "{k}"),
            KChoice::Rule(KRule::Oracle) => f.write_str("oracle"),
            KChoice::Rule(KRule::Tuned) => f.write_str("tuned"),
        }
    }
}

impl FromStr for KChoice {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "oracle" => Ok(KChoice::ORACLE),
            "tuned" => Ok(KChoice::TUNED),
            other => other.parse().map(KChoice::Fixed).map_err(|_| format!("k must be a number, oracle or tuned, got {s:?}")),
        }
    }
}

/// Spiked model family; cardinalities default to the grid's `s` for every spike.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelTemplate {
    pub family: Family,
    pub omegas: Vec<f64>,
    pub omega_tail: f64,
    pub cardinalities: Option<Vec<usize>>,
}

impl Default for ModelTemplate {
    fn default() -> Self {
        ModelTemplate { family: Family::Gaussian, omegas: vec![5.0, 3.0], omega_tail: 1.0, cardinalities: None }
    }
}

impl ModelTemplate {
    pub fn top_m() -> Self {
        ModelTemplate {
            family: Family::Gaussian,
            omegas: vec![10.1, 6.2, 3.3, 1.4],
            omega_tail: 0.5,
            cardinalities: Some(vec![10, 10, 8, 8]),
        }
    }

    pub fn cardinalities(&self, s: usize) -> Vec<usize> {
        self.cardinalities.clone().unwrap_or_else(|| vec![s; self.omegas.len()])
    }

    pub fn spiked_spec(&self, d: usize, s: usize) -> Result<SpikedCovarianceSpec> {
        let spikes: Vec<(f64, usize)> = self.omegas.iter().copied().zip(self.cardinalities(s)).collect();
        SpikedCovarianceSpec::new(d, &spikes, self.omega_tail)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Grid {
    pub n: Vec<usize>,
    pub d: Vec<usize>,
    pub s: Vec<usize>,
    pub k: Vec<KChoice>,
}

impl Default for Grid {
    fn default() -> Self {
        Grid { n: vec![200], d: vec![100], s: vec![10], k: vec![KChoice::ORACLE] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub n: usize,
    pub d: usize,
    pub s: usize,
    pub k: KChoice,
}

impl Grid {
    /// Cartesian product in the order d, s, n, k (outermost first).
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &d in &self.d {
            for &s in &self.s {
                for &n in &self.n {
                    for &k in &self.k {
                        out.push(Cell { n, d, s, k });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TuningSpec {
    pub candidates: Vec<usize>,
    pub splits: usize,
    pub split_fraction: f64,
}

impl Default for TuningSpec {
    fn default() -> Self {
        TuningSpec { candidates: vec![2, 5, 10, 20], splits: 10, split_fraction: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FantopeSpec {
    /// `c` in `φ = c · k · log d / √n`.
    pub phi_const: f64,
    /// `c` in `λ = c · λ₁ √(log d / n)`. With `c = 1` the penalty exceeds the
    /// off-diagonal signal entries at desk-scale `n` and the start collapses
    /// onto a single coordinate, sometimes in the wrong spike.
    pub lambda_const: f64,
    /// Overrides the `λ` rule.
    pub lambda: Option<f64>,
    /// Overrides the `φ` rule.
    pub phi: Option<f64>,
    pub rho: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FantopeSpec {
    fn default() -> Self {
        FantopeSpec { phi_const: 0.1, lambda_const: 0.3, lambda: None, phi: None, rho: 1.0, tol: 1e-6, max_iter: 2000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PowerSpec {
    pub eps: f64,
    pub max_iter: usize,
}

impl Default for PowerSpec {
    fn default() -> Self {
        PowerSpec { eps: sspca::sparse_pca::DEFAULT_EPS, max_iter: sspca::sparse_pca::DEFAULT_MAX_ITER }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CenterMode {
    /// Spatial median, except the mean for TP.
    Auto,
    SpatialMedian,
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSpec {
    pub path: PathBuf,
    #[serde(default)]
    pub header: bool,
    #[serde(default)]
    pub standardize: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitSpec {
    pub components: usize,
    pub leverage_threshold: f64,
    pub center: CenterMode,
}

impl Default for FitSpec {
    fn default() -> Self {
        FitSpec { components: 2, leverage_threshold: 0.05, center: CenterMode::Auto }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputSpec {
    pub dir: PathBuf,
    /// File name prefix; defaults to the scenario name.
    pub prefix: Option<String>,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { dir: PathBuf::from("out"), prefix: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub scenario: Scenario,
    #[serde(default)]
    pub model: ModelTemplate,
    #[serde(default)]
    pub input: Option<InputSpec>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub grid: Grid,
    #[serde(default = "one")]
    pub replications: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub tuning: TuningSpec,
    #[serde(default)]
    pub fantope: FantopeSpec,
    #[serde(default)]
    pub power: PowerSpec,
    #[serde(default)]
    pub fit: FitSpec,
    /// Timed runs per bench cell; the median is reported.
    #[serde(default = "five")]
    pub bench_runs: usize,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_methods() -> Vec<Method> {
    vec![Method::Tp, Method::Eca, Method::Sspca]
}

fn one() -> usize {
    1
}

fn five() -> usize {
    5
}

fn spec_error(msg: impl Into<String>) -> Error {
    Error::InvalidSpec(msg.into())
}

impl ExperimentSpec {
    pub fn preset(scenario: Scenario) -> Self {
        let mut spec = ExperimentSpec {
            scenario,
            model: ModelTemplate::default(),
            input: None,
            methods: default_methods(),
            grid: Grid::default(),
            replications: 100,
            base_seed: 20_240_101,
            tuning: TuningSpec::default(),
            fantope: FantopeSpec::default(),
            power: PowerSpec::default(),
            fit: FitSpec::default(),
            bench_runs: 5,
            output: OutputSpec::default(),
        };
        match scenario {
            Scenario::LeadingEigvec => {}
            Scenario::TopM => {
                spec.model = ModelTemplate::top_m();
                spec.grid = Grid { n: vec![400], d: vec![100], s: vec![10], k: vec![KChoice::ORACLE] };
            }
            Scenario::TuneHistogram => {
                spec.methods = vec![Method::Sspca];
                spec.grid = Grid { n: vec![800], d: vec![50], s: vec![5], k: vec![KChoice::TUNED] };
                spec.replications = 50;
            }
            Scenario::RuntimeBench => {
                spec.grid = Grid { n: vec![500, 1000, 2000, 4000], d: vec![50], s: vec![5], k: vec![KChoice::Fixed(5)] };
                spec.replications = 1;
            }
            Scenario::FitCsv => {
                spec.methods = vec![Method::Sspca];
                spec.grid = Grid { n: vec![], d: vec![], s: vec![], k: vec![KChoice::TUNED] };
                spec.replications = 1;
            }
        }
        spec
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ExperimentSpec = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line() as u64,
            message: format!("experiment spec: {e}"),
        })?;
        Ok(spec)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn prefix(&self) -> String {
        self.output.prefix.clone().unwrap_or_else(|| self.scenario.name().to_string())
    }

    /// Checks for tuning on an input file: methods, tuning settings, an input path.
    pub fn validate_tuning(&self) -> Result<()> {
        self.validate_common()?;
        if self.input.is_none() {
            return Err(spec_error("tuning on data needs an input file"));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_common()?;
        match self.scenario {
            Scenario::LeadingEigvec | Scenario::TopM | Scenario::TuneHistogram => self.validate_simulation(),
            Scenario::RuntimeBench => {
                if self.grid.n.is_empty() || self.grid.d.is_empty() {
                    return Err(spec_error("runtime bench needs n and d grids"));
                }
                Ok(())
            }
            Scenario::FitCsv => {
                if self.input.is_none() {
                    return Err(spec_error("fit_csv needs an input file"));
                }
                if self.fit.components == 0 {
                    return Err(spec_error("fit needs at least one component"));
                }
                match self.grid.k.first() {
                    Some(KChoice::Rule(KRule::Oracle)) => Err(spec_error("k = oracle has no meaning for real data")),
                    None => Err(spec_error("fit_csv needs a k value (a number or tuned)")),
                    _ => Ok(()),
                }
            }
        }
    }

    fn validate_common(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(spec_error("replications must be at least 1"));
        }
        if self.methods.is_empty() {
            return Err(spec_error("at least one method is required"));
        }
        let positive = |name: &str, v: &[usize]| {
            if v.iter().any(|&x| x == 0) {
                Err(spec_error(format!("grid values for {name} must be positive")))
            } else {
                Ok(())
            }
        };
        positive("n", &self.grid.n)?;
        positive("d", &self.grid.d)?;
        positive("s", &self.grid.s)?;
        if self.grid.k.contains(&KChoice::Fixed(0)) {
            return Err(spec_error("grid values for k must be positive"));
        }
        if self.tuning.candidates.is_empty() || self.tuning.candidates.contains(&0) {
            return Err(spec_error("tuning candidates must be positive and non-empty"));
        }
        if self.tuning.splits == 0 || !(self.tuning.split_fraction > 0.0 && self.tuning.split_fraction < 1.0) {
            return Err(spec_error("tuning needs splits ≥ 1 and a split fraction in (0, 1)"));
        }
        if self.bench_runs == 0 {
            return Err(spec_error("bench_runs must be at least 1"));
        }
        let f = &self.fantope;
        let non_negative = |v: f64| v >= 0.0 && v.is_finite();
        if !(non_negative(f.phi_const) && non_negative(f.lambda_const))
            || !f.lambda.is_none_or(non_negative)
            || !f.phi.is_none_or(non_negative)
            || !(f.rho > 0.0 && f.tol > 0.0)
        {
            return Err(spec_error("Fantope settings need λ, φ and their constants ≥ 0, ρ > 0, tol > 0"));
        }
        Ok(())
    }

    fn validate_simulation(&self) -> Result<()> {
        if self.grid.n.is_empty() || self.grid.d.is_empty() || self.grid.s.is_empty() || self.grid.k.is_empty() {
            return Err(spec_error("simulation grids must be non-empty"));
        }
        if self.model.omegas.is_empty() {
            return Err(spec_error("the model needs at least one spike"));
        }
        if self.scenario == Scenario::TopM && self.grid.k.contains(&KChoice::TUNED) {
            return Err(spec_error("k = tuned is only supported for the leading component"));
        }
        if self.scenario == Scenario::TuneHistogram && self.grid.k != [KChoice::TUNED] {
            return Err(spec_error("tune_histogram uses k = tuned only"));
        }
        for cell in self.grid.cells() {
            self.model.spiked_spec(cell.d, cell.s).map_err(|e| spec_error(format!("cell {cell:?}: {e}")))?;
            if let KChoice::Fixed(k) = cell.k {
                if k > cell.d {
                    return Err(spec_error(format!("k = {k} exceeds d = {}", cell.d)));
                }
            }
            if cell.n < 2 {
                return Err(spec_error("simulations need n ≥ 2"));
            }
            if cell.k == KChoice::TUNED && cell.n < 4 {
                return Err(spec_error("tuning needs n ≥ 4"));
            }
        }
        Ok(())
    }
}
