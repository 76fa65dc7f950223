use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A project's allowed states and transitions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkflowSpec {
    pub name: String,
    pub states: BTreeSet<String>,
    pub initial: String,
    pub terminal: String,
    pub allowed_transitions: BTreeSet<(String, String)>,
}

#[derive(Debug, Error)]
pub enum WorkflowError {
    #[error("unknown workflow {name:?}; valid names are {valid}")]
    UnknownName { name: String, valid: String },
    #[error("workflow {name:?} is inconsistent: {reason}")]
    Inconsistent { name: String, reason: String },
}

const BUILTIN_NAMES: &[&str] = &["standard", "onap", "apache"];

impl WorkflowSpec {
    /// Builds one of the three built-in workflows.
    ///
    /// `standard` is the stock tracker workflow (used by ONOS-style projects),
    /// `onap` replaces the review chain with Submitted/Delivered, and `apache`
    /// extends the standard workflow with a Patch Available state.
    pub fn builtin(name: &str) -> Result<WorkflowSpec, WorkflowError> {
        let transitions: &[(&str, &str)] = match name {
            "standard" => &[
                ("Open", "In Progress"),
                ("Open", "Resolved"),
                ("Open", "Closed"),
                ("In Progress", "Open"),
                ("In Progress", "Resolved"),
                ("In Progress", "Closed"),
                ("Resolved", "Closed"),
                ("Resolved", "Reopened"),
                ("Reopened", "In Progress"),
                ("Reopened", "Resolved"),
                ("Reopened", "Closed"),
                ("Closed", "Reopened"),
            ],
            "onap" => &[
                ("Open", "In Progress"),
                ("Open", "Submitted"),
                ("Open", "Delivered"),
                ("Open", "Closed"),
                ("In Progress", "Open"),
                ("In Progress", "Submitted"),
                ("In Progress", "Delivered"),
                ("In Progress", "Closed"),
                ("Submitted", "In Progress"),
                ("Submitted", "Delivered"),
                ("Submitted", "Closed"),
                ("Delivered", "Reopened"),
                ("Delivered", "Closed"),
                ("Reopened", "In Progress"),
                ("Reopened", "Delivered"),
                ("Reopened", "Closed"),
                ("Closed", "Reopened"),
            ],
            "apache" => &[
                ("Open", "In Progress"),
                ("Open", "Patch Available"),
                ("Open", "Resolved"),
                ("Open", "Closed"),
                ("In Progress", "Open"),
                ("In Progress", "Patch Available"),
                ("In Progress", "Resolved"),
                ("In Progress", "Closed"),
                ("Patch Available", "In Progress"),
                ("Patch Available", "Resolved"),
                ("Patch Available", "Closed"),
                ("Resolved", "Closed"),
                ("Resolved", "Reopened"),
                ("Reopened", "In Progress"),
                ("Reopened", "Patch Available"),
                ("Reopened", "Resolved"),
                ("Reopened", "Closed"),
                ("Closed", "Reopened"),
            ],
            other => {
                return Err(WorkflowError::UnknownName {
                    name: other.to_string(),
                    valid: BUILTIN_NAMES.join(", "),
                })
            }
        };
        let states: BTreeSet<String> = transitions
            .iter()
            .flat_map(|(from, to)| [from.to_string(), to.to_string()])
            .collect();
        let spec = WorkflowSpec {
            name: name.to_string(),
            states,
            initial: "Open".to_string(),
            terminal: "Closed".to_string(),
            allowed_transitions: transitions
                .iter()
                .map(|(from, to)| (from.to_string(), to.to_string()))
                .collect(),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Checks that the endpoints of every transition, the initial state, and
    /// the terminal state are all members of the state set.
    pub fn validate(&self) -> Result<(), WorkflowError> {
        let mut problem = None;
        if !self.states.contains(&self.initial) {
            problem = Some(format!("initial state {:?} not in states", self.initial));
        } else if !self.states.contains(&self.terminal) {
            problem = Some(format!("terminal state {:?} not in states", self.terminal));
        } else {
            for (from, to) in &self.allowed_transitions {
                if !self.states.contains(from) || !self.states.contains(to) {
                    problem = Some(format!("transition {from:?} -> {to:?} leaves the state set"));
                    break;
                }
            }
        }
        match problem {
            Some(reason) => Err(WorkflowError::Inconsistent {
                name: self.name.clone(),
                reason,
            }),
            None => Ok(()),
        }
    }

    pub fn contains_state(&self, state: &str) -> bool {
        self.states.contains(state)
    }

    pub fn is_allowed(&self, from: &str, to: &str) -> bool {
        self.allowed_transitions
            .contains(&(from.to_string(), to.to_string()))
    }
}
