//! Headless exploration scripts: a JSON list of session steps replayed
//! against a store.
//!
//! ```json
//! {"steps": [
//!   {"op": "create", "template_id": "hashtag_histogram",
//!    "bindings": {"tagset": {"type": "tagset", "value": ["hiv"]}}, "as": "bars"},
//!   {"op": "interact", "visual": "bars", "action": "suppress_bars",
//!    "arguments": {"categories": ["aids"]}},
//!   {"op": "annotate", "visual": "bars", "relation": "bars",
//!    "tuples": [{"category": "prep"}]},
//!   {"op": "derive", "from": "bars", "template_id": "author_heatmap", "as": "heat"},
//!   {"op": "focus", "to": "root"}
//! ]}
//! ```
//!
//! Visuals are referenced by visID, by an `as` alias, or as `root`/`focus`.
//! A derive whose bindings stay ambiguous fails unless the step carries a
//! `resolution` or the resolve file has an entry for the step's alias (or
//! `*`).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use vantage_core::explore::{BindingProposal, Fields, Resolution, Tuple, VisualSource};
use vantage_core::queryengine::Bindings;
use vantage_core::{ExploreError, Session, Store, VType};

use crate::error::ApiError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VisRef {
    Id(u64),
    Name(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Step {
    Create {
        template_id: String,
        #[serde(default)]
        bindings: Bindings,
        #[serde(default, rename = "vType")]
        v_type: Option<VType>,
        #[serde(default)]
        fields: Fields,
        #[serde(default, rename = "as")]
        alias: Option<String>,
    },
    Interact {
        visual: VisRef,
        action: String,
        #[serde(default)]
        arguments: Json,
    },
    Annotate {
        visual: VisRef,
        relation: String,
        tuples: Vec<Tuple>,
        #[serde(default)]
        label: Option<String>,
    },
    Derive {
        #[serde(default)]
        from: Option<VisRef>,
        template_id: String,
        #[serde(default)]
        resolution: Resolution,
        #[serde(default, rename = "vType")]
        v_type: Option<VType>,
        #[serde(default)]
        fields: Fields,
        #[serde(default, rename = "as")]
        alias: Option<String>,
    },
    Focus {
        to: VisRef,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Script {
    pub steps: Vec<Step>,
}

/// Resolutions keyed by derive alias, or `*` for every derive.
pub type ResolveFile = BTreeMap<String, Resolution>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub step: usize,
    pub op: String,
    #[serde(rename = "visID")]
    pub vis_id: u64,
    #[serde(rename = "vType", skip_serializing_if = "Option::is_none")]
    pub v_type: Option<VType>,
}

#[derive(Debug)]
pub enum ScriptError {
    /// A derivation stayed ambiguous.
    Unresolved {
        step: usize,
        proposal: Box<BindingProposal>,
        error: ApiError,
    },
    Failed {
        step: usize,
        error: ApiError,
    },
}

impl ScriptError {
    pub fn api_error(&self) -> &ApiError {
        match self {
            ScriptError::Unresolved { error, .. } | ScriptError::Failed { error, .. } => error,
        }
    }
}

impl std::fmt::Display for ScriptError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScriptError::Unresolved { step, error, .. } => write!(f, "step {step}: {error}"),
            ScriptError::Failed { step, error } => write!(f, "step {step}: {error}"),
        }
    }
}

pub struct Runner<'a> {
    pub session: &'a mut Session,
    store: &'a Store,
    resolve: Option<&'a ResolveFile>,
    aliases: BTreeMap<String, u64>,
}

impl<'a> Runner<'a> {
    pub fn new(session: &'a mut Session, store: &'a Store, resolve: Option<&'a ResolveFile>) -> Self {
        Runner { session, store, resolve, aliases: BTreeMap::new() }
    }

    fn lookup(&self, r: &VisRef) -> Result<u64, ApiError> {
        match r {
            VisRef::Id(id) => Ok(*id),
            VisRef::Name(n) if n == "root" => Ok(self.session.root()),
            VisRef::Name(n) if n == "focus" => Ok(self.session.focus()),
            VisRef::Name(n) => self
                .aliases
                .get(n)
                .copied()
                .ok_or_else(|| ApiError::new("INVALID_ARGUMENT", format!("unknown visual alias {n}"))),
        }
    }

    fn name(&mut self, alias: &Option<String>, id: u64) {
        if let Some(a) = alias {
            self.aliases.insert(a.clone(), id);
        }
    }

    fn resolution_for(&self, alias: &Option<String>, inline: &Resolution) -> Resolution {
        let mut r = inline.clone();
        if let Some(file) = self.resolve {
            let keyed = alias.as_ref().and_then(|a| file.get(a));
            for (k, v) in keyed.into_iter().chain(file.get("*")).flatten() {
                r.entry(k.clone()).or_insert_with(|| v.clone());
            }
        }
        r
    }

    fn step(&mut self, i: usize, step: &Step) -> Result<StepOutcome, ScriptError> {
        let fail = |error: ApiError| ScriptError::Failed { step: i, error };
        let done = |op: &str, v: &vantage_core::VisualObject| StepOutcome {
            step: i,
            op: op.into(),
            vis_id: v.vis_id,
            v_type: Some(v.v_type),
        };
        match step {
            Step::Create { template_id, bindings, v_type, fields, alias } => {
                let src = VisualSource::Template { template_id: template_id.clone(), bindings: bindings.clone() };
                let out = {
                    let v = self
                        .session
                        .create_visual(self.store, src, *v_type, fields.clone())
                        .map_err(|e| fail(e.into()))?;
                    done("create", v)
                };
                self.name(alias, out.vis_id);
                Ok(out)
            }
            Step::Interact { visual, action, arguments } => {
                let id = self.lookup(visual).map_err(fail)?;
                let args = if arguments.is_null() { serde_json::json!({}) } else { arguments.clone() };
                let v = self.session.interact(self.store, id, action, &args).map_err(|e| fail(e.into()))?;
                Ok(done("interact", v))
            }
            Step::Annotate { visual, relation, tuples, label } => {
                let id = self.lookup(visual).map_err(fail)?;
                self.session.annotate(id, relation, tuples.clone(), label.clone()).map_err(|e| fail(e.into()))?;
                Ok(StepOutcome { step: i, op: "annotate".into(), vis_id: id, v_type: None })
            }
            Step::Derive { from, template_id, resolution, v_type, fields, alias } => {
                let from = match from {
                    Some(r) => self.lookup(r).map_err(fail)?,
                    None => self.session.focus(),
                };
                let res = self.resolution_for(alias, resolution);
                let out = match self.session.derive_visual(self.store, from, template_id, &res, *v_type, fields.clone())
                {
                    Ok(v) => done("derive", v),
                    Err(e @ ExploreError::UnresolvedAmbiguity(_)) => {
                        let proposal =
                            self.session.propose_bindings(self.store, from, template_id).map_err(|e| fail(e.into()))?;
                        return Err(ScriptError::Unresolved { step: i, proposal: Box::new(proposal), error: e.into() });
                    }
                    Err(e) => return Err(fail(e.into())),
                };
                self.name(alias, out.vis_id);
                Ok(out)
            }
            Step::Focus { to } => {
                let id = self.lookup(to).map_err(fail)?;
                let v = self.session.backtrack(id).map_err(|e| fail(e.into()))?;
                Ok(done("focus", v))
            }
        }
    }

    /// Runs every step in order, stopping at the first failure.
    pub fn run(&mut self, script: &Script) -> Result<Vec<StepOutcome>, ScriptError> {
        script.steps.iter().enumerate().map(|(i, s)| self.step(i, s)).collect()
    }
}
