use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::WorkflowError;

/// Validation lifecycle of a model version.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WorkflowState {
    Draft,
    InReview,
    ReadyToPublish,
    Published,
}

impl WorkflowState {
    pub const ALL: [WorkflowState; 4] = [
        WorkflowState::Draft,
        WorkflowState::InReview,
        WorkflowState::ReadyToPublish,
        WorkflowState::Published,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            WorkflowState::Draft => "draft",
            WorkflowState::InReview => "in-review",
            WorkflowState::ReadyToPublish => "ready-to-publish",
            WorkflowState::Published => "published",
        }
    }

    /// Column label shown to reviewers.
    pub fn label(self) -> &'static str {
        match self {
            WorkflowState::Draft => "ready to do",
            WorkflowState::InReview => "ready to review",
            WorkflowState::ReadyToPublish => "ready to publish",
            WorkflowState::Published => "published",
        }
    }

    /// Roles that may move a model from `self` to `target`, or `None` when the
    /// transition is not part of the lifecycle.
    pub fn transition_roles(self, target: WorkflowState) -> Option<&'static [Role]> {
        use WorkflowState::*;
        match (self, target) {
            (Draft, InReview) => Some(&[Role::Contributor]),
            (InReview, Draft) => Some(&[Role::Reviewer]),
            (InReview, ReadyToPublish) => Some(&[Role::Reviewer]),
            (ReadyToPublish, Published) => Some(&[Role::Publisher]),
            (ReadyToPublish, InReview) => Some(&[Role::Reviewer, Role::Publisher]),
            _ => None,
        }
    }

    pub fn can_transition(self, target: WorkflowState) -> bool {
        self.transition_roles(target).is_some()
    }
}

impl fmt::Display for WorkflowState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for WorkflowState {
    type Err = WorkflowError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        WorkflowState::ALL
            .into_iter()
            .find(|st| st.as_str() == s || st.label() == s)
            .ok_or_else(|| WorkflowError::UnknownState(s.to_owned()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Contributor,
    Reviewer,
    Publisher,
    /// Adjudicates agent decisions awaiting human approval.
    Operator,
}

impl Role {
    pub const ALL: [Role; 4] = [
        Role::Contributor,
        Role::Reviewer,
        Role::Publisher,
        Role::Operator,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Contributor => "contributor",
            Role::Reviewer => "reviewer",
            Role::Publisher => "publisher",
            Role::Operator => "operator",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = WorkflowError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Role::ALL
            .into_iter()
            .find(|r| r.as_str() == s.trim())
            .ok_or_else(|| WorkflowError::UnknownRole(s.to_owned()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PrincipalId(String);

impl PrincipalId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PrincipalId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for PrincipalId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

/// A person or service acting on the system, with the roles asserted for it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Principal {
    pub id: PrincipalId,
    pub display_name: String,
    pub roles: BTreeSet<Role>,
}

impl Principal {
    pub fn new(id: impl Into<String>, roles: impl IntoIterator<Item = Role>) -> Self {
        let id = id.into();
        Self {
            display_name: id.clone(),
            id: PrincipalId(id),
            roles: roles.into_iter().collect(),
        }
    }

    pub fn has_role(&self, role: Role) -> bool {
        self.roles.contains(&role)
    }

    pub fn has_any(&self, roles: &[Role]) -> bool {
        roles.iter().any(|r| self.has_role(*r))
    }

    /// Parses the `id;role,role` form used by the HTTP principal header.
    pub fn parse_header(value: &str) -> Result<Principal, WorkflowError> {
        let (id, roles) = value.split_once(';').unwrap_or((value, ""));
        let id = id.trim();
        if id.is_empty() {
            return Err(WorkflowError::MalformedPrincipal(value.to_owned()));
        }
        let roles = roles
            .split(',')
            .filter(|r| !r.trim().is_empty())
            .map(str::parse)
            .collect::<Result<BTreeSet<Role>, _>>()?;
        Ok(Principal {
            id: PrincipalId::new(id),
            display_name: id.to_owned(),
            roles,
        })
    }
}

/// Checks legality and authority of a transition without touching any state.
pub fn authorize_transition(
    from: WorkflowState,
    to: WorkflowState,
    actor: &Principal,
) -> Result<(), WorkflowError> {
    let roles = from
        .transition_roles(to)
        .ok_or(WorkflowError::IllegalTransition { from, to })?;
    if !actor.has_any(roles) {
        return Err(WorkflowError::UnauthorizedRole {
            actor: actor.id.clone(),
            required: roles.to_vec(),
        });
    }
    Ok(())
}
