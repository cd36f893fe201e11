//! JSON documents for MDPs, reward specs, and policies, plus atomic file writes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::convex::Halfspace;
use crate::error::{Error, Result};
use crate::mdp::{any_feature_expectation, AnyPolicy, FeatureExpectation, Mdp, MixedPolicy, Policy};
use crate::reward::{Expert, ExpertBound, RewardSpec};

/// Dense MDP document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpDoc {
    pub n_states: usize,
    pub n_actions: usize,
    pub gamma: f64,
    pub initial_dist: Vec<f64>,
    /// `[s][a][s']`.
    pub transition: Vec<Vec<Vec<f64>>>,
    /// `[s][j]`.
    pub features: Vec<Vec<f64>>,
}

impl MdpDoc {
    pub fn from_mdp(mdp: &Mdp) -> Self {
        MdpDoc {
            n_states: mdp.n_states(),
            n_actions: mdp.n_actions(),
            gamma: mdp.gamma(),
            initial_dist: mdp.initial_dist().to_vec(),
            transition: mdp.dense_transitions(),
            features: mdp.feature_rows(),
        }
    }

    pub fn to_mdp(&self) -> Result<Mdp> {
        if self.transition.len() != self.n_states {
            return Err(Error::InvalidMdp(format!(
                "transition has {} rows but n_states = {}",
                self.transition.len(),
                self.n_states
            )));
        }
        if let Some(s) = self.transition.iter().position(|r| r.len() != self.n_actions) {
            return Err(Error::InvalidMdp(format!(
                "transition[{s}] has {} actions but n_actions = {}",
                self.transition[s].len(),
                self.n_actions
            )));
        }
        Mdp::new(
            self.gamma,
            self.initial_dist.clone(),
            self.transition.clone(),
            self.features.clone(),
        )
    }
}

/// Policy file: a bare action table, a bare distribution table, or a tagged
/// policy or mixture as written by this crate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PolicyDoc {
    Actions(Vec<usize>),
    Distributions(Vec<Vec<f64>>),
    Tagged(AnyPolicy),
}

impl PolicyDoc {
    pub fn into_policy(self) -> AnyPolicy {
        match self {
            PolicyDoc::Actions(a) => AnyPolicy::Single(Policy::Deterministic(a)),
            PolicyDoc::Distributions(d) => AnyPolicy::Single(Policy::Stochastic(d)),
            PolicyDoc::Tagged(p) => p,
        }
    }
}

/// One expert entry. The demonstration is given by exactly one of `mu_e`,
/// `policy`, or `policy_file`; the task defaults to the planning MDP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpertDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_e: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<PolicyDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<MdpDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task_file: Option<PathBuf>,
    pub epsilon: f64,
    #[serde(default)]
    pub bound: ExpertBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardSpecDoc {
    pub k: usize,
    #[serde(default)]
    pub halfspaces: Vec<Halfspace>,
    /// `(coordinate, value)` pairs.
    #[serde(default)]
    pub pinned: Vec<(usize, f64)>,
    #[serde(default)]
    pub experts: Vec<ExpertDoc>,
}

impl RewardSpecDoc {
    /// Self-contained document: every expert carries `mu_e` and its task inline.
    pub fn from_spec(spec: &RewardSpec) -> Self {
        RewardSpecDoc {
            k: spec.k(),
            halfspaces: spec.halfspaces().to_vec(),
            pinned: spec.pinned().to_vec(),
            experts: spec
                .experts()
                .iter()
                .map(|e| ExpertDoc {
                    mu_e: Some(e.mu_e.0.clone()),
                    policy: None,
                    policy_file: None,
                    task: Some(MdpDoc::from_mdp(&e.task)),
                    task_file: None,
                    epsilon: e.epsilon,
                    bound: e.bound,
                })
                .collect(),
        }
    }

    /// Builds the spec. Relative file references resolve against `base_dir`;
    /// experts without a task use `planning`.
    pub fn to_spec(&self, planning: Option<&Arc<Mdp>>, base_dir: &Path) -> Result<RewardSpec> {
        let spec = if self.experts.is_empty() {
            RewardSpec::explicit(self.k, Vec::new())?
        } else {
            let experts = self
                .experts
                .iter()
                .enumerate()
                .map(|(i, e)| expert_from_doc(i, e, planning, base_dir))
                .collect::<Result<Vec<_>>>()?;
            let spec = RewardSpec::multi_expert(experts)?;
            if spec.k() != self.k {
                return Err(Error::InvalidRewardSpec(format!(
                    "k = {} but experts have k = {}",
                    self.k,
                    spec.k()
                )));
            }
            spec
        };
        spec.with_halfspaces(self.halfspaces.clone())?.with_pinned(self.pinned.clone())
    }
}

fn expert_from_doc(i: usize, e: &ExpertDoc, planning: Option<&Arc<Mdp>>, base: &Path) -> Result<Expert> {
    let field = |name: &str| format!("experts[{i}].{name}");
    let task = match (&e.task, &e.task_file) {
        (Some(_), Some(_)) => {
            return Err(Error::InvalidRewardSpec(format!("{} and {} are exclusive", field("task"), field("task_file"))))
        }
        (Some(doc), None) => Arc::new(doc.to_mdp().map_err(|err| nest(&field("task"), err))?),
        (None, Some(path)) => Arc::new(load_mdp(&base.join(path)).map_err(|err| nest(&field("task_file"), err))?),
        (None, None) => planning
            .cloned()
            .ok_or_else(|| Error::InvalidRewardSpec(format!("{} is required without a planning MDP", field("task"))))?,
    };
    let given = [e.mu_e.is_some(), e.policy.is_some(), e.policy_file.is_some()];
    if given.iter().filter(|b| **b).count() != 1 {
        return Err(Error::InvalidRewardSpec(format!(
            "{}: exactly one of mu_e, policy, policy_file is required",
            field("")
        )));
    }
    let mu_e = if let Some(mu) = &e.mu_e {
        FeatureExpectation(mu.clone())
    } else {
        let policy = match (&e.policy, &e.policy_file) {
            (Some(doc), _) => doc.clone().into_policy(),
            (None, Some(path)) => load_policy(&base.join(path)).map_err(|err| nest(&field("policy_file"), err))?,
            (None, None) => unreachable!("checked above"),
        };
        any_feature_expectation(&task, &policy).map_err(|err| nest(&field("policy"), err))?
    };
    Ok(Expert {
        task,
        mu_e,
        epsilon: e.epsilon,
        bound: e.bound,
    })
}

fn nest(field: &str, err: Error) -> Error {
    Error::InvalidRewardSpec(format!("{field}: {err}"))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    serde_json::from_str(&text).map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))
}

pub fn load_mdp(path: &Path) -> Result<Mdp> {
    read_json::<MdpDoc>(path)?.to_mdp()
}

pub fn load_policy(path: &Path) -> Result<AnyPolicy> {
    Ok(read_json::<PolicyDoc>(path)?.into_policy())
}

pub fn load_reward_spec(path: &Path, planning: Option<&Arc<Mdp>>) -> Result<RewardSpec> {
    let doc: RewardSpecDoc = read_json(path)?;
    doc.to_spec(planning, path.parent().unwrap_or(Path::new(".")))
}

pub fn save_mdp(path: &Path, mdp: &Mdp) -> Result<()> {
    write_json_atomic(path, &MdpDoc::from_mdp(mdp))
}

pub fn save_reward_spec(path: &Path, spec: &RewardSpec) -> Result<()> {
    write_json_atomic(path, &RewardSpecDoc::from_spec(spec))
}

pub fn save_policy(path: &Path, policy: &AnyPolicy) -> Result<()> {
    write_json_atomic(path, policy)
}

pub fn save_mixture(path: &Path, mix: &MixedPolicy) -> Result<()> {
    write_json_atomic(path, mix)
}

/// Pretty JSON with a trailing newline, written atomically.
pub fn write_json_atomic<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// Writes to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}
