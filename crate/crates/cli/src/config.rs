//! Run configuration: TOML file values, then command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use shapefuzz::datagen::Generator;
use shapefuzz::experiment::TrainPlan;
use shapefuzz::pipeline::FuzzOptions;
use shapefuzz::registry::{OperatorSpec, Registry};

use crate::CliError;

pub const OUT_ENV: &str = "SHAPEFUZZ_OUT";
pub const DEFAULT_OUT: &str = "shapefuzz-out";

/// `"all"` or an explicit list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Operators {
    Named(String),
    List(Vec<String>),
}

impl Default for Operators {
    fn default() -> Self {
        Operators::Named("all".into())
    }
}

impl Operators {
    pub fn parse(s: &str) -> Self {
        Operators::Named(s.to_string())
    }

    pub fn resolve<'r>(&self, registry: &'r Registry) -> Result<Vec<&'r OperatorSpec>, CliError> {
        let joined = match self {
            Operators::Named(s) => s.clone(),
            Operators::List(v) => v.join(","),
        };
        let ops = registry.select(&joined).map_err(|e| CliError::Usage(e.to_string()))?;
        if ops.is_empty() {
            return Err(CliError::Usage("no operators selected".into()));
        }
        Ok(ops)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignSection {
    pub n: usize,
    /// Weak-generator relaxation for fuzzing campaigns.
    pub relaxation: String,
    pub batch_size: Option<usize>,
    pub fn_audit: usize,
    /// Charge each execution its simulated cost.
    pub simulate_cost: bool,
}

impl Default for CampaignSection {
    fn default() -> Self {
        CampaignSection {
            n: 5_000,
            relaxation: "partial".into(),
            batch_size: None,
            fn_audit: 0,
            simulate_cost: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneralizationSection {
    pub n: usize,
}

impl Default for GeneralizationSection {
    fn default() -> Self {
        GeneralizationSection { n: 50_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BugsSection {
    /// Valid samples drawn per operator when hunting bug triggers.
    pub n: usize,
}

impl Default for BugsSection {
    fn default() -> Self {
        BugsSection { n: 2_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BridgeSection {
    pub command: String,
    pub args: Vec<String>,
    pub n: usize,
}

impl Default for BridgeSection {
    fn default() -> Self {
        BridgeSection {
            command: "shapefuzz-bridge".into(),
            args: Vec::new(),
            n: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub operators: Operators,
    /// Training data producer: random, pairwise or weak[:relaxation].
    pub strategy: String,
    pub n_train: usize,
    pub repetitions: usize,
    pub split: f64,
    pub levels_per_param: usize,
    /// Not part of the config hash.
    #[serde(skip_serializing)]
    pub out_dir: Option<PathBuf>,
    pub campaign: CampaignSection,
    pub generalization: GeneralizationSection,
    pub bugs: BugsSection,
    pub bridge: BridgeSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            operators: Operators::default(),
            strategy: "pairwise".into(),
            n_train: 10_000,
            repetitions: 10,
            split: 0.8,
            levels_per_param: 8,
            out_dir: None,
            campaign: CampaignSection::default(),
            generalization: GeneralizationSection::default(),
            bugs: BugsSection::default(),
            bridge: BridgeSection::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let counts = [
            ("n_train", self.n_train),
            ("repetitions", self.repetitions),
            ("campaign.n", self.campaign.n),
            ("generalization.n", self.generalization.n),
            ("bugs.n", self.bugs.n),
            ("bridge.n", self.bridge.n),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(CliError::Usage(format!("{name} must be >= 1")));
            }
        }
        if self.campaign.batch_size == Some(0) {
            return Err(CliError::Usage("campaign.batch_size must be >= 1".into()));
        }
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(CliError::Usage(format!("split must lie in (0, 1), got {}", self.split)));
        }
        if self.levels_per_param < 2 {
            return Err(CliError::Usage("levels_per_param must be >= 2".into()));
        }
        self.training_generator()?;
        self.campaign_generator()?;
        Ok(())
    }

    pub fn training_generator(&self) -> Result<Generator, CliError> {
        self.strategy.parse().map_err(CliError::Usage)
    }

    pub fn campaign_generator(&self) -> Result<Generator, CliError> {
        format!("weak:{}", self.campaign.relaxation).parse().map_err(CliError::Usage)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }

    pub fn plan(&self) -> Result<TrainPlan, CliError> {
        let mut plan = TrainPlan::new(self.training_generator()?, self.n_train, self.seed);
        plan.split = self.split;
        plan.pairwise_levels_per_param = self.levels_per_param;
        Ok(plan)
    }

    pub fn fuzz_options(&self) -> FuzzOptions {
        FuzzOptions {
            batch_size: self.campaign.batch_size,
            fn_audit: self.campaign.fn_audit,
            pairwise_levels_per_param: self.levels_per_param,
            ..FuzzOptions::default()
        }
    }

    /// Hash of everything that can change results, for one command.
    pub fn hash_for(&self, command: &str) -> String {
        shapefuzz::config_hash(&(command, self))
    }
}

/// File-name form of a generator: `weak:partial` becomes `weak-partial`.
pub fn generator_tag(g: &Generator) -> String {
    g.to_string().replace(':', "-")
}
