//! Named policies and where their checkpoints live.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::algos::{AlgoTag, FrozenPolicy};
use crate::error::{Error, Result};
use crate::nn::{load_checkpoint_for, Network, NetworkSpec};

pub const REGISTRY_FILE: &str = "registry.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    /// Autonomous car, trained with the safety reward.
    Ac,
    /// Adversary, trained against a frozen victim.
    Alpha,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionSpace {
    Discrete,
    Continuous,
}

impl ActionSpace {
    pub fn of(tag: AlgoTag) -> Self {
        if tag.is_continuous() {
            ActionSpace::Continuous
        } else {
            ActionSpace::Discrete
        }
    }
}

/// `AC-PPO`, `alpha-TD3` and so on.
pub fn policy_name(kind: PolicyKind, tag: AlgoTag) -> String {
    match kind {
        PolicyKind::Ac => format!("AC-{}", tag.as_str()),
        PolicyKind::Alpha => format!("alpha-{}", tag.as_str()),
    }
}

/// Splits a policy name into its kind and algorithm.
pub fn parse_policy_name(name: &str) -> Result<(PolicyKind, AlgoTag)> {
    let (kind, algo) = if let Some(a) = name.strip_prefix("AC-") {
        (PolicyKind::Ac, a)
    } else if let Some(a) = name.strip_prefix("alpha-") {
        (PolicyKind::Alpha, a)
    } else {
        return Err(Error::config(format!("'{name}' is not a policy name (AC-<ALGO> or alpha-<ALGO>)")));
    };
    Ok((kind, algo.parse()?))
}

/// Every name the registry may hold.
pub fn all_policy_names() -> Vec<String> {
    [PolicyKind::Ac, PolicyKind::Alpha]
        .iter()
        .flat_map(|&k| AlgoTag::ALL.iter().map(move |&t| policy_name(k, t)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub algo: AlgoTag,
    pub action_space: ActionSpace,
    /// Relative to the registry's directory.
    pub checkpoint: PathBuf,
    pub spec: NetworkSpec,
    /// Victim an adversary was trained against.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub victim: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PolicyRegistry {
    pub entries: BTreeMap<String, RegistryEntry>,
    #[serde(skip)]
    root: PathBuf,
}

impl PolicyRegistry {
    pub fn new(root: &Path) -> Self {
        Self {
            entries: BTreeMap::new(),
            root: root.to_path_buf(),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Loads `<root>/registry.json`, or an empty registry if it does not exist.
    pub fn open(root: &Path) -> Result<Self> {
        let path = root.join(REGISTRY_FILE);
        if !path.exists() {
            return Ok(Self::new(root));
        }
        let text = std::fs::read_to_string(&path)?;
        let mut reg: PolicyRegistry = serde_json::from_str(&text)
            .map_err(|e| Error::config(format!("malformed registry {}: {e}", path.display())))?;
        reg.root = root.to_path_buf();
        for (name, e) in &reg.entries {
            reg.check(name, e)?;
        }
        Ok(reg)
    }

    pub fn save(&self) -> Result<()> {
        std::fs::create_dir_all(&self.root)?;
        let path = self.root.join(REGISTRY_FILE);
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, serde_json::to_string_pretty(self)? + "\n")?;
        std::fs::rename(&tmp, &path)?;
        Ok(())
    }

    fn check(&self, name: &str, e: &RegistryEntry) -> Result<()> {
        let (_, tag) = parse_policy_name(name)?;
        if tag != e.algo {
            return Err(Error::config(format!("registry entry {name} holds a {} policy", e.algo)));
        }
        if e.action_space != ActionSpace::of(tag) {
            return Err(Error::config(format!("registry entry {name} has the wrong action space")));
        }
        Ok(())
    }

    pub fn insert(&mut self, name: &str, entry: RegistryEntry) -> Result<()> {
        self.check(name, &entry)?;
        self.entries.insert(name.to_string(), entry);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&RegistryEntry> {
        parse_policy_name(name)?;
        self.entries
            .get(name)
            .ok_or_else(|| Error::config(format!("policy {name} is not in the registry under {}", self.root.display())))
    }

    pub fn checkpoint_path(&self, name: &str) -> Result<PathBuf> {
        Ok(self.root.join(&self.get(name)?.checkpoint))
    }

    /// Loads a policy for evaluation. The checkpoint must match the recorded spec.
    pub fn load(&self, name: &str) -> Result<FrozenPolicy> {
        let e = self.get(name)?;
        let net = Network::new(e.spec.clone())?;
        let ck = load_checkpoint_for(&self.root.join(&e.checkpoint), net.spec_hash())?;
        Ok(FrozenPolicy {
            tag: e.algo,
            net,
            params: Arc::new(ck.params),
        })
    }
}
