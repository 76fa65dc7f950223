use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use super::workflow::{WorkflowError, WorkflowSpec};

/// Per-project ingest configuration: the workflow, the mapping from the
/// tracker's priority labels to the normalised 1..5 scale, and the issue
/// types that count as bugs.
#[derive(Debug, Clone)]
pub struct ProjectProfile {
    pub workflow: WorkflowSpec,
    pub priority_map: BTreeMap<String, u8>,
    pub allowed_issue_types: BTreeSet<String>,
}

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("cannot read profile: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse profile: {0}")]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Workflow(#[from] WorkflowError),
    #[error("priority mapping {label:?} -> {value} is outside 1..=5")]
    PriorityOutOfRange { label: String, value: i64 },
    #[error("profile has an empty priority map")]
    EmptyPriorityMap,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum WorkflowField {
    Builtin(String),
    Custom {
        name: String,
        states: Vec<String>,
        initial: String,
        terminal: String,
        transitions: Vec<(String, String)>,
    },
}

#[derive(Debug, Deserialize)]
struct ProfileFile {
    workflow: WorkflowField,
    #[serde(default)]
    allowed_issue_types: Option<Vec<String>>,
    priority_map: BTreeMap<String, i64>,
}

impl ProjectProfile {
    /// A profile over `workflow` covering the common tracker label schemes
    /// (Highest/High/…, Blocker/Critical/…, P1..P5) and issue type "Bug".
    pub fn with_default_labels(workflow: WorkflowSpec) -> ProjectProfile {
        let labels: &[(&str, u8)] = &[
            ("Highest", 1),
            ("High", 2),
            ("Medium", 3),
            ("Low", 4),
            ("Lowest", 5),
            ("Blocker", 1),
            ("Critical", 2),
            ("Major", 3),
            ("Minor", 4),
            ("Trivial", 5),
            ("P1", 1),
            ("P2", 2),
            ("P3", 3),
            ("P4", 4),
            ("P5", 5),
        ];
        ProjectProfile {
            workflow,
            priority_map: labels
                .iter()
                .map(|(label, value)| (label.to_string(), *value))
                .collect(),
            allowed_issue_types: BTreeSet::from(["Bug".to_string()]),
        }
    }

    /// Loads a profile from its TOML form. See the repository README for the
    /// documented schema.
    pub fn from_toml_str(text: &str) -> Result<ProjectProfile, ProfileError> {
        let file: ProfileFile = toml::from_str(text)?;
        let workflow = match file.workflow {
            WorkflowField::Builtin(name) => WorkflowSpec::builtin(&name)?,
            WorkflowField::Custom {
                name,
                states,
                initial,
                terminal,
                transitions,
            } => {
                let spec = WorkflowSpec {
                    name,
                    states: states.into_iter().collect(),
                    initial,
                    terminal,
                    allowed_transitions: transitions.into_iter().collect(),
                };
                spec.validate()?;
                spec
            }
        };
        if file.priority_map.is_empty() {
            return Err(ProfileError::EmptyPriorityMap);
        }
        let mut priority_map = BTreeMap::new();
        for (label, value) in file.priority_map {
            if !(1..=5).contains(&value) {
                return Err(ProfileError::PriorityOutOfRange { label, value });
            }
            priority_map.insert(label, value as u8);
        }
        Ok(ProjectProfile {
            workflow,
            priority_map,
            allowed_issue_types: file
                .allowed_issue_types
                .map(|types| types.into_iter().collect())
                .unwrap_or_else(|| BTreeSet::from(["Bug".to_string()])),
        })
    }

    pub fn load(path: &Path) -> Result<ProjectProfile, ProfileError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }
}
