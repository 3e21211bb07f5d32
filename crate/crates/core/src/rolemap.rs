//! Collapses fine-grained argument roles into the generic Actor / Place /
//! Time labels, so an argument classifier can run on event types it never
//! saw in training.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::distsup::ArgumentCandidate;
use crate::error::Result;
use crate::io;

pub const ACTOR: &str = "Actor";
pub const PLACE: &str = "Place";
pub const TIME: &str = "Time";
pub const NONE: &str = "NONE";

/// Roles that always become Actor.
pub const DEFAULT_ACTOR_ROLES: [&str; 15] = [
    "Person",
    "Agent",
    "Victim",
    "Artifact",
    "Buyer",
    "Seller",
    "Giver",
    "Recipient",
    "Org",
    "Attacker",
    "Target",
    "Entity",
    "Defendant",
    "Prosecutor",
    "Plaintiff",
];

/// Event types whose Adjudicator becomes Actor.
pub const DEFAULT_ADJUDICATOR_TYPES: [&str; 5] = ["Convict", "Sentence", "Fine", "Acquit", "Pardon"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GenericRole {
    Actor,
    Place,
    Time,
}

impl GenericRole {
    pub const ALL: [GenericRole; 3] = [GenericRole::Actor, GenericRole::Place, GenericRole::Time];

    pub fn as_str(self) -> &'static str {
        match self {
            GenericRole::Actor => ACTOR,
            GenericRole::Place => PLACE,
            GenericRole::Time => TIME,
        }
    }
}

impl fmt::Display for GenericRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleMapping {
    pub actor_roles: BTreeSet<String>,
    pub adjudicator_event_types: BTreeSet<String>,
}

impl Default for RoleMapping {
    fn default() -> Self {
        RoleMapping {
            actor_roles: DEFAULT_ACTOR_ROLES.iter().map(|r| r.to_string()).collect(),
            adjudicator_event_types: DEFAULT_ADJUDICATOR_TYPES.iter().map(|r| r.to_string()).collect(),
        }
    }
}

impl RoleMapping {
    pub fn load(path: &Path) -> Result<Self> {
        io::read_json(path)
    }

    /// Generic role for `role` of an `event_type` event, `None` if unmapped.
    pub fn map_role(&self, role: &str, event_type: &str) -> Option<GenericRole> {
        if self.actor_roles.contains(role) {
            Some(GenericRole::Actor)
        } else if role == "Adjudicator" && self.adjudicator_event_types.contains(event_type) {
            Some(GenericRole::Actor)
        } else if role == PLACE {
            Some(GenericRole::Place)
        } else if role == TIME {
            Some(GenericRole::Time)
        } else {
            None
        }
    }

    /// Like [`map_role`](Self::map_role) but lets already-generic labels
    /// through, for scoring predictions that may be in either label space.
    pub fn canonical(&self, label: &str, event_type: &str) -> Option<GenericRole> {
        if label == ACTOR {
            return Some(GenericRole::Actor);
        }
        self.map_role(label, event_type)
    }
}

pub fn map_role(role: &str, event_type: &str) -> Option<GenericRole> {
    RoleMapping::default().map_role(role, event_type)
}

/// Rewrites gold labels through the mapping; unmapped roles become NONE
/// so the candidate stays as a negative. Returns the label histogram.
pub fn map_dataset(
    candidates: &[ArgumentCandidate],
    mapping: &RoleMapping,
) -> (Vec<ArgumentCandidate>, BTreeMap<String, usize>) {
    let mut summary = BTreeMap::new();
    let mapped: Vec<ArgumentCandidate> = candidates
        .iter()
        .map(|c| {
            let mut c = c.clone();
            if let Some(label) = &c.label {
                if label != NONE {
                    let generic = mapping.canonical(label, &c.event_type);
                    c.label = Some(generic.map_or(NONE, GenericRole::as_str).to_string());
                }
            }
            if let Some(label) = &c.label {
                *summary.entry(label.clone()).or_insert(0) += 1;
            }
            c
        })
        .collect();
    (mapped, summary)
}
