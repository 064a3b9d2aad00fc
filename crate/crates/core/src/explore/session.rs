//! Exploration sessions: the tree of visual objects, annotations, binding
//! proposals, derivation, backtracking and archives.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use super::render::{self, Fields, State, DEFAULT_RENDER_CONFIG};
use super::scoring::{best_representation, score_representations, DatasetDescription};
use super::vtype::{Tuple, VType};
use crate::dataset::{DataModel, Dataset};
use crate::error::{ExploreError, QueryError};
use crate::queryengine::{Bindings, CacheKeyInfo, ComputeCache, ParamType, ParamValue, TemplateCatalog};
use crate::store::{PropertyGraph, Store, Table};

pub const ARCHIVE_VERSION: u32 = 1;
/// Template that produces a new session's root visual.
pub const ROOT_TEMPLATE: &str = "tweet_timeline";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Annotation,
    State,
    Default,
    User,
    /// The dataset of the visual being derived from.
    Source,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisualParameters {
    /// Cache key of the bound dataset.
    pub dataset: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template_id: Option<String>,
    #[serde(default)]
    pub bindings: Bindings,
    #[serde(default)]
    pub provenance: BTreeMap<String, Provenance>,
    /// Encoding role → column.
    #[serde(default)]
    pub fields: Fields,
    pub render_config: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub action: String,
    pub arguments: Json,
    pub state: State,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisualObject {
    #[serde(rename = "visID")]
    pub vis_id: u64,
    #[serde(rename = "vType")]
    pub v_type: VType,
    #[serde(rename = "dType")]
    pub d_type: DataModel,
    pub parameters: VisualParameters,
    pub graphic: Json,
    pub state: State,
    pub parent: Option<u64>,
    /// Every interaction applied, with the state it produced.
    #[serde(default)]
    pub history: Vec<Transition>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub id: u64,
    #[serde(rename = "visID")]
    pub vis_id: u64,
    pub relation: String,
    pub tuples: Vec<Tuple>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub value: ParamValue,
    pub provenance: Provenance,
    /// Where the value came from, e.g. `annotation 3` or `state.interval`.
    pub origin: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedParam {
    pub value: ParamValue,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ambiguity {
    pub parameter: String,
    pub required: bool,
    pub candidates: Vec<Candidate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BindingProposal {
    pub template_id: String,
    #[serde(rename = "from")]
    pub from_vis_id: u64,
    pub resolved: BTreeMap<String, ResolvedParam>,
    pub ambiguities: Vec<Ambiguity>,
}

/// A user's answer for one parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Choice {
    /// Index into the ambiguity's candidate list.
    Candidate(usize),
    Value(ParamValue),
    /// Leave an optional parameter unbound.
    Omit,
}

pub type Resolution = BTreeMap<String, Choice>;

/// What a new visual is bound to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VisualSource {
    Template {
        template_id: String,
        #[serde(default)]
        bindings: Bindings,
    },
    /// A dataset already in the session cache.
    Key(String),
    Dataset(Dataset),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    #[serde(rename = "visID")]
    pub vis_id: u64,
    #[serde(rename = "vType")]
    pub v_type: VType,
    #[serde(rename = "dType")]
    pub d_type: DataModel,
    pub parent: Option<u64>,
    pub children: Vec<u64>,
    pub template_id: Option<String>,
    pub annotations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeView {
    pub root: u64,
    pub focus: u64,
    pub nodes: Vec<TreeNode>,
    pub executions: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeEdge {
    pub parent: u64,
    pub child: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionArchive {
    pub version: u32,
    pub nodes: Vec<VisualObject>,
    pub edges: Vec<TreeEdge>,
    pub annotations: Vec<Annotation>,
    pub focus: u64,
    pub cache_keys: Vec<CacheKeyInfo>,
    pub next_id: u64,
    pub next_annotation_id: u64,
    /// Datasets that were not produced by a template.
    #[serde(default)]
    pub datasets: BTreeMap<String, Dataset>,
}

#[derive(Debug, Clone)]
pub struct Session {
    catalog: Arc<TemplateCatalog>,
    nodes: BTreeMap<u64, VisualObject>,
    annotations: BTreeMap<u64, Annotation>,
    focus: u64,
    next_id: u64,
    next_annotation_id: u64,
    cache: ComputeCache,
}

fn unknown(id: u64) -> ExploreError {
    ExploreError::UnknownVisId(id)
}

fn lift(e: QueryError) -> ExploreError {
    match e {
        QueryError::UnknownTemplate(t) => ExploreError::UnknownTemplate(t),
        other => ExploreError::Query(other),
    }
}

/// Semantic parameter type of values drawn from a column.
fn column_type(column: &str) -> Option<ParamType> {
    match column {
        "hashtag" | "tag_a" | "tag_b" => Some(ParamType::Tagset),
        "author_id" | "src" | "dst" => Some(ParamType::Authorset),
        _ => None,
    }
}

fn set_value(t: ParamType, values: BTreeSet<String>) -> ParamValue {
    match t {
        ParamType::Authorset => ParamValue::Authorset(values),
        _ => ParamValue::Tagset(values),
    }
}

/// Node ids grouped into tag and author sets by node label.
fn node_sets(g: &PropertyGraph, ids: impl IntoIterator<Item = String>) -> Vec<ParamValue> {
    let mut tags = BTreeSet::new();
    let mut authors = BTreeSet::new();
    for id in ids {
        match g.node(&id).map(|n| n.label.as_str()) {
            Some("Author") => {
                authors.insert(id);
            }
            Some("Hashtag") => {
                tags.insert(id.trim_start_matches('#').to_string());
            }
            _ => {}
        }
    }
    let mut out = Vec::new();
    if !tags.is_empty() {
        out.push(ParamValue::Tagset(tags));
    }
    if !authors.is_empty() {
        out.push(ParamValue::Authorset(authors));
    }
    out
}

fn json_strings(v: Option<&Json>) -> Vec<String> {
    v.and_then(Json::as_array)
        .map(|a| a.iter().filter_map(|x| x.as_str().map(String::from)).collect())
        .unwrap_or_default()
}

fn json_ints(v: Option<&Json>) -> Vec<i64> {
    v.and_then(Json::as_array).map(|a| a.iter().filter_map(Json::as_i64).collect()).unwrap_or_default()
}

fn typed_set(fields: &Fields, role: &str, values: Vec<String>) -> Option<ParamValue> {
    let t = column_type(fields.get(role)?)?;
    (!values.is_empty()).then(|| set_value(t, values.into_iter().collect()))
}

fn topic_terms(d: &Dataset, topics: &[i64]) -> Option<ParamValue> {
    let Dataset::Topics(t) = d else { return None };
    let terms: BTreeSet<String> =
        topics.iter().filter_map(|i| t.top_terms.get(*i as usize)).flatten().map(|(w, _)| w.clone()).collect();
    (!terms.is_empty()).then_some(ParamValue::Tagset(terms))
}

fn table_rows(t: &Table, ordinals: &[i64]) -> Vec<ParamValue> {
    t.columns
        .iter()
        .enumerate()
        .filter_map(|(ci, c)| {
            let ty = column_type(&c.name)?;
            let vals: BTreeSet<String> = ordinals
                .iter()
                .filter_map(|o| t.rows.get(*o as usize))
                .filter(|r| !r[ci].is_null())
                .map(|r| r[ci].key_string())
                .collect();
            (!vals.is_empty()).then(|| set_value(ty, vals))
        })
        .collect()
}

/// Parameter values an annotation expresses.
fn annotation_values(v: &VisualObject, a: &Annotation, d: &Dataset) -> Vec<ParamValue> {
    let attr = |k: &str| -> Vec<String> {
        a.tuples.iter().filter_map(|t| t.get(k).and_then(Json::as_str).map(String::from)).collect()
    };
    let f = &v.parameters.fields;
    match (v.v_type, a.relation.as_str()) {
        (VType::MultiTimePlot, "interval") => a
            .tuples
            .iter()
            .filter_map(|t| {
                Some(ParamValue::Interval { start: t.get("start")?.as_i64()?, end: t.get("end")?.as_i64()? })
            })
            .collect(),
        (VType::MultiTimePlot, "series") => {
            let tags: BTreeSet<String> =
                attr("name").iter().filter_map(|n| n.strip_prefix("tag:").map(String::from)).collect();
            if tags.is_empty() {
                vec![]
            } else {
                vec![ParamValue::Tagset(tags)]
            }
        }
        (VType::BarChart | VType::PieChart, "bars") => typed_set(f, "category", attr("category")).into_iter().collect(),
        (VType::Heatmap, "cells") => {
            [typed_set(f, "x", attr("x")), typed_set(f, "y", attr("y"))].into_iter().flatten().collect()
        }
        (VType::Heatmap, "rows") => typed_set(f, "x", attr("x")).into_iter().collect(),
        (VType::Heatmap, "cols") => typed_set(f, "y", attr("y")).into_iter().collect(),
        (VType::LabeledGraph, "nodes") => d.as_graph().map_or(vec![], |g| node_sets(g, attr("id"))),
        (VType::LabeledGraph, "subgraph") => {
            d.as_graph().map_or(vec![], |g| node_sets(g, a.tuples.iter().flat_map(|t| json_strings(t.get("ids")))))
        }
        (VType::TopicView, "topics") => {
            let ids: Vec<i64> = a.tuples.iter().filter_map(|t| t.get("topic").and_then(Json::as_i64)).collect();
            topic_terms(d, &ids).into_iter().collect()
        }
        (VType::Table, "rows") => {
            let ords: Vec<i64> = a.tuples.iter().filter_map(|t| t.get("ordinal").and_then(Json::as_i64)).collect();
            d.as_table().map_or(vec![], |t| table_rows(t, &ords))
        }
        _ => vec![],
    }
}

/// Parameter values held in a visual's interaction state, with the state
/// key they came from.
fn state_values(v: &VisualObject, d: &Dataset) -> Vec<(ParamValue, &'static str)> {
    let s = &v.state;
    let f = &v.parameters.fields;
    let mut out = Vec::new();
    let mut push = |val: Option<ParamValue>, key: &'static str| {
        if let Some(val) = val {
            out.push((val, key));
        }
    };
    match v.v_type {
        VType::MultiTimePlot => {
            if let Some(iv) = s.get("interval") {
                if let (Some(a), Some(b)) =
                    (iv.get("start").and_then(Json::as_i64), iv.get("end").and_then(Json::as_i64))
                {
                    push(Some(ParamValue::Interval { start: a, end: b }), "interval");
                }
            }
            let tags: BTreeSet<String> =
                json_strings(s.get("series")).iter().filter_map(|n| n.strip_prefix("tag:").map(String::from)).collect();
            push((!tags.is_empty()).then_some(ParamValue::Tagset(tags)), "series");
        }
        VType::BarChart | VType::PieChart => {
            push(typed_set(f, "category", json_strings(s.get("selected"))), "selected")
        }
        VType::Heatmap => {
            let cells = s.get("cells").and_then(Json::as_array).cloned().unwrap_or_default();
            let xs = cells.iter().filter_map(|c| c.get("x")?.as_str().map(String::from)).collect();
            let ys = cells.iter().filter_map(|c| c.get("y")?.as_str().map(String::from)).collect();
            push(typed_set(f, "x", xs), "cells");
            push(typed_set(f, "y", ys), "cells");
            push(typed_set(f, "x", json_strings(s.get("rows"))), "rows");
            push(typed_set(f, "y", json_strings(s.get("cols"))), "cols");
        }
        VType::LabeledGraph => {
            if let Some(g) = d.as_graph() {
                for val in node_sets(g, json_strings(s.get("selected"))) {
                    push(Some(val), "selected");
                }
                let hood = s.get("neighborhood").and_then(|n| n.get("nodes"));
                for val in node_sets(g, json_strings(hood)) {
                    push(Some(val), "neighborhood");
                }
            }
        }
        VType::TopicView => push(topic_terms(d, &json_ints(s.get("topics"))), "topics"),
        VType::Table => {
            if let Some(t) = d.as_table() {
                for val in table_rows(t, &json_ints(s.get("rows"))) {
                    push(Some(val), "rows");
                }
            }
        }
    }
    out
}

/// The best-scoring vType that can both display the dataset's model and
/// find columns for its encodings.
fn pick_representation(dataset: &Dataset, fields: &Fields) -> Result<(VType, Fields), ExploreError> {
    let desc = DatasetDescription::of(dataset);
    for (v, score) in score_representations(&desc) {
        if score > 0.0 && v.accepts(desc.model) {
            if let Ok(f) = render::choose_fields(v, dataset, fields) {
                return Ok((v, f));
            }
        }
    }
    let v = best_representation(&desc);
    Ok((v, render::choose_fields(v, dataset, fields)?))
}

impl Session {
    /// A session whose root is the corpus-wide tweet timeline.
    pub fn new(catalog: Arc<TemplateCatalog>, store: &Store) -> Result<Self, ExploreError> {
        let mut s = Session {
            catalog,
            nodes: BTreeMap::new(),
            annotations: BTreeMap::new(),
            focus: 0,
            next_id: 1,
            next_annotation_id: 1,
            cache: ComputeCache::new(),
        };
        let source = VisualSource::Template { template_id: ROOT_TEMPLATE.into(), bindings: Bindings::new() };
        s.create_visual(store, source, None, Fields::new())?;
        Ok(s)
    }

    pub fn catalog(&self) -> &Arc<TemplateCatalog> {
        &self.catalog
    }

    pub fn focus(&self) -> u64 {
        self.focus
    }

    pub fn root(&self) -> u64 {
        *self.nodes.keys().next().expect("a session always has a root")
    }

    pub fn cache(&self) -> &ComputeCache {
        &self.cache
    }

    /// Template executions performed by this session's cache.
    pub fn executions(&self) -> u64 {
        self.cache.executions()
    }

    pub fn visual(&self, id: u64) -> Result<&VisualObject, ExploreError> {
        self.nodes.get(&id).ok_or_else(|| unknown(id))
    }

    pub fn visuals(&self) -> impl Iterator<Item = &VisualObject> {
        self.nodes.values()
    }

    pub fn children(&self, id: u64) -> Vec<u64> {
        self.nodes.values().filter(|v| v.parent == Some(id)).map(|v| v.vis_id).collect()
    }

    pub fn annotations_of(&self, id: u64) -> Vec<&Annotation> {
        self.annotations.values().filter(|a| a.vis_id == id).collect()
    }

    pub fn annotations(&self) -> impl Iterator<Item = &Annotation> {
        self.annotations.values()
    }

    pub fn tree(&self) -> TreeView {
        TreeView {
            root: self.root(),
            focus: self.focus,
            executions: self.executions(),
            nodes: self
                .nodes
                .values()
                .map(|v| TreeNode {
                    vis_id: v.vis_id,
                    v_type: v.v_type,
                    d_type: v.d_type,
                    parent: v.parent,
                    children: self.children(v.vis_id),
                    template_id: v.parameters.template_id.clone(),
                    annotations: self.annotations_of(v.vis_id).len(),
                })
                .collect(),
        }
    }

    /// The dataset bound to a visual, recomputed if the store moved on.
    pub fn dataset(&mut self, store: &Store, id: u64) -> Result<Arc<Dataset>, ExploreError> {
        let key = self.visual(id)?.parameters.dataset.clone();
        self.cache.get(&key, &self.catalog, store).map_err(lift)
    }

    fn attach(
        &mut self,
        parent: Option<u64>,
        key: String,
        dataset: &Dataset,
        v_type: Option<VType>,
        fields: Fields,
        template: Option<(String, Bindings, BTreeMap<String, Provenance>)>,
    ) -> Result<&VisualObject, ExploreError> {
        let (v_type, fields) = match v_type {
            Some(v) => (v, render::choose_fields(v, dataset, &fields)?),
            None => pick_representation(dataset, &fields)?,
        };
        let state = State::new();
        let graphic = render::render(v_type, dataset, &fields, &state)?;
        let (template_id, bindings, provenance) = match template {
            Some((t, b, p)) => (Some(t), b, p),
            None => (None, Bindings::new(), BTreeMap::new()),
        };
        let id = self.next_id;
        self.next_id += 1;
        self.nodes.insert(
            id,
            VisualObject {
                vis_id: id,
                v_type,
                d_type: dataset.model(),
                parameters: VisualParameters {
                    dataset: key,
                    template_id,
                    bindings,
                    provenance,
                    fields,
                    render_config: DEFAULT_RENDER_CONFIG.into(),
                },
                graphic,
                state,
                parent,
                history: Vec::new(),
            },
        );
        self.focus = id;
        Ok(&self.nodes[&id])
    }

    /// Creates a visual under the current focus and focuses it. Without an
    /// explicit vType the best-scoring compatible one is used.
    pub fn create_visual(
        &mut self,
        store: &Store,
        source: VisualSource,
        v_type: Option<VType>,
        fields: Fields,
    ) -> Result<&VisualObject, ExploreError> {
        let (key, ds, template) = match source {
            VisualSource::Template { template_id, bindings } => {
                let normalized = self.catalog.get(&template_id).map_err(lift)?.normalize(&bindings).map_err(lift)?;
                let provenance = normalized.keys().map(|k| {
                    let p = if bindings.contains_key(k) { Provenance::User } else { Provenance::Default };
                    (k.clone(), p)
                });
                let provenance = provenance.collect();
                let (key, ds) = self.cache.run(&self.catalog, &template_id, &bindings, store).map_err(lift)?;
                (key, ds, Some((template_id, normalized, provenance)))
            }
            VisualSource::Key(key) => {
                let ds = self.cache.get(&key, &self.catalog, store).map_err(lift)?;
                (key, ds, None)
            }
            VisualSource::Dataset(d) => {
                let (key, ds) = self.cache.insert_dataset(d);
                (key, ds, None)
            }
        };
        if let Some(v) = v_type {
            v.check_compatible(ds.model())?;
        }
        let parent = self.nodes.contains_key(&self.focus).then_some(self.focus);
        self.attach(parent, key, &ds, v_type, fields, template)
    }

    /// Applies a named interaction to a visual and re-renders it.
    pub fn interact(
        &mut self,
        store: &Store,
        id: u64,
        action: &str,
        args: &Json,
    ) -> Result<&VisualObject, ExploreError> {
        let ds = self.dataset(store, id)?;
        let v = self.nodes.get_mut(&id).expect("checked by dataset");
        let state = render::interact(v.v_type, &ds, &v.parameters.fields, &v.state, action, args)?;
        v.graphic = render::render(v.v_type, &ds, &v.parameters.fields, &state)?;
        v.history.push(Transition { action: action.into(), arguments: args.clone(), state: state.clone() });
        v.state = state;
        Ok(v)
    }

    /// Attaches an annotation; all annotations of a visual hold together.
    pub fn annotate(
        &mut self,
        id: u64,
        relation: &str,
        tuples: Vec<Tuple>,
        label: Option<String>,
    ) -> Result<&Annotation, ExploreError> {
        let v = self.visual(id)?;
        v.v_type.relation(relation)?.check(&tuples)?;
        let aid = self.next_annotation_id;
        self.next_annotation_id += 1;
        self.annotations.insert(aid, Annotation { id: aid, vis_id: id, relation: relation.into(), tuples, label });
        Ok(&self.annotations[&aid])
    }

    /// Gathers candidate values for each template parameter from the
    /// visual's annotations, its state, its dataset and the defaults.
    pub fn propose_bindings(
        &mut self,
        store: &Store,
        from: u64,
        template_id: &str,
    ) -> Result<BindingProposal, ExploreError> {
        let template = self.catalog.get(template_id).map_err(lift)?.clone();
        let ds = self.dataset(store, from)?;
        let v = self.visual(from)?;
        let mut from_annotations: Vec<Candidate> = Vec::new();
        for a in self.annotations_of(from) {
            for value in annotation_values(v, a, &ds) {
                from_annotations.push(Candidate {
                    value,
                    provenance: Provenance::Annotation,
                    origin: format!("annotation {}", a.id),
                });
            }
        }
        let from_state: Vec<Candidate> = state_values(v, &ds)
            .into_iter()
            .map(|(value, key)| Candidate { value, provenance: Provenance::State, origin: format!("state.{key}") })
            .collect();
        let source = match ds.model() {
            DataModel::Graph => Some(ParamValue::Graphref(v.parameters.dataset.clone())),
            DataModel::Relational => Some(ParamValue::Tableref(v.parameters.dataset.clone())),
            _ => None,
        };

        let mut resolved = BTreeMap::new();
        let mut ambiguities = Vec::new();
        for p in &template.parameters {
            let mut cands: Vec<Candidate> = Vec::new();
            for c in from_annotations.iter().chain(&from_state) {
                let same_type = c.value.param_type() == p.param_type;
                let dup = cands.iter().any(|x| x.provenance == c.provenance && x.value == c.value);
                if same_type && !dup {
                    cands.push(c.clone());
                }
            }
            let src = source.as_ref().filter(|s| s.param_type() == p.param_type);
            let only_annotation = cands.len() == 1 && cands[0].provenance == Provenance::Annotation;
            if only_annotation {
                let c = cands.pop().expect("one candidate");
                resolved.insert(p.name.clone(), ResolvedParam { value: c.value, provenance: c.provenance });
            } else if cands.is_empty() {
                if let Some(s) = src {
                    resolved.insert(p.name.clone(), ResolvedParam { value: s.clone(), provenance: Provenance::Source });
                } else if let Some(d) = &p.default {
                    resolved
                        .insert(p.name.clone(), ResolvedParam { value: d.clone(), provenance: Provenance::Default });
                } else if p.required {
                    ambiguities.push(Ambiguity { parameter: p.name.clone(), required: true, candidates: vec![] });
                }
            } else {
                if let Some(d) = &p.default {
                    cands.push(Candidate {
                        value: d.clone(),
                        provenance: Provenance::Default,
                        origin: "default".into(),
                    });
                }
                ambiguities.push(Ambiguity { parameter: p.name.clone(), required: p.required, candidates: cands });
            }
        }
        Ok(BindingProposal { template_id: template_id.into(), from_vis_id: from, resolved, ambiguities })
    }

    /// Bindings from a proposal plus the user's answers.
    pub fn resolve(
        &self,
        proposal: &BindingProposal,
        resolution: &Resolution,
    ) -> Result<(Bindings, BTreeMap<String, Provenance>), ExploreError> {
        let template = self.catalog.get(&proposal.template_id).map_err(lift)?;
        if let Some(p) = resolution.keys().find(|p| template.param(p).is_none()) {
            return Err(ExploreError::InvalidArguments(format!(
                "template {} has no parameter {p}",
                template.template_id
            )));
        }
        let mut bindings = Bindings::new();
        let mut provenance = BTreeMap::new();
        for (name, r) in &proposal.resolved {
            bindings.insert(name.clone(), r.value.clone());
            provenance.insert(name.clone(), r.provenance);
        }
        for a in &proposal.ambiguities {
            if !resolution.contains_key(&a.parameter) {
                return Err(ExploreError::UnresolvedAmbiguity(a.parameter.clone()));
            }
        }
        let candidates: BTreeMap<&str, &Ambiguity> =
            proposal.ambiguities.iter().map(|a| (a.parameter.as_str(), a)).collect();
        for (name, choice) in resolution {
            match choice {
                Choice::Candidate(i) => {
                    let c = candidates
                        .get(name.as_str())
                        .and_then(|a| a.candidates.get(*i))
                        .ok_or_else(|| ExploreError::InvalidArguments(format!("{name} has no candidate {i}")))?;
                    bindings.insert(name.clone(), c.value.clone());
                    provenance.insert(name.clone(), c.provenance);
                }
                Choice::Value(v) => {
                    bindings.insert(name.clone(), v.clone());
                    provenance.insert(name.clone(), Provenance::User);
                }
                Choice::Omit => {
                    if template.param(name).is_some_and(|p| p.required) {
                        return Err(ExploreError::UnresolvedAmbiguity(name.clone()));
                    }
                    bindings.remove(name);
                    provenance.remove(name);
                }
            }
        }
        Ok((bindings, provenance))
    }

    /// Runs a template with bindings drawn from `from` and attaches the
    /// result as a child of `from`, which becomes the focus.
    pub fn derive_visual(
        &mut self,
        store: &Store,
        from: u64,
        template_id: &str,
        resolution: &Resolution,
        v_type: Option<VType>,
        fields: Fields,
    ) -> Result<&VisualObject, ExploreError> {
        let proposal = self.propose_bindings(store, from, template_id)?;
        let (bindings, mut provenance) = self.resolve(&proposal, resolution)?;
        let template = self.catalog.get(template_id).map_err(lift)?;
        let normalized = template.normalize(&bindings).map_err(lift)?;
        for k in normalized.keys() {
            provenance.entry(k.clone()).or_insert(Provenance::Default);
        }
        let (key, ds) = self.cache.run(&self.catalog, template_id, &bindings, store).map_err(lift)?;
        if let Some(v) = v_type {
            v.check_compatible(ds.model())?;
        }
        self.attach(Some(from), key, &ds, v_type, fields, Some((template_id.into(), normalized, provenance)))
    }

    /// Moves the focus back to an earlier visual, whose graphic and state
    /// are exactly as they were left.
    pub fn backtrack(&mut self, to: u64) -> Result<&VisualObject, ExploreError> {
        let v = self.nodes.get(&to).ok_or_else(|| unknown(to))?;
        self.focus = to;
        Ok(v)
    }

    pub fn export(&self) -> SessionArchive {
        SessionArchive {
            version: ARCHIVE_VERSION,
            nodes: self.nodes.values().cloned().collect(),
            edges: self
                .nodes
                .values()
                .filter_map(|v| v.parent.map(|p| TreeEdge { parent: p, child: v.vis_id }))
                .collect(),
            annotations: self.annotations.values().cloned().collect(),
            focus: self.focus,
            cache_keys: self.cache.keys().into_iter().filter(|k| k.template_id.is_some()).collect(),
            next_id: self.next_id,
            next_annotation_id: self.next_annotation_id,
            datasets: self.cache.inline_datasets(),
        }
    }

    pub fn export_json(&self) -> String {
        serde_json::to_string(&self.export()).expect("archives serialize")
    }

    /// Restores a session; datasets are recomputed when first needed.
    pub fn import(catalog: Arc<TemplateCatalog>, archive: SessionArchive) -> Result<Self, ExploreError> {
        let bad = |m: String| Err(ExploreError::CorruptArchive(m));
        if archive.version != ARCHIVE_VERSION {
            return bad(format!("unsupported version {}", archive.version));
        }
        let mut nodes = BTreeMap::new();
        for v in archive.nodes {
            if v.vis_id == 0 || v.vis_id >= archive.next_id {
                return bad(format!("visID {} outside the allocated range", v.vis_id));
            }
            if !v.v_type.accepts(v.d_type) {
                return bad(format!("visual {} pairs {} with {}", v.vis_id, v.v_type, v.d_type));
            }
            if let Some(k) = v.state.keys().find(|k| !v.v_type.state_keys().any(|s| s == k.as_str())) {
                return bad(format!("visual {} has state key {k} outside its vocabulary", v.vis_id));
            }
            let id = v.vis_id;
            if nodes.insert(id, v).is_some() {
                return bad(format!("duplicate visID {id}"));
            }
        }
        let Some(&root) = nodes.keys().next() else {
            return bad("no visual objects".into());
        };
        let mut edges: BTreeSet<(u64, u64)> = BTreeSet::new();
        for e in &archive.edges {
            edges.insert((e.parent, e.child));
        }
        let implied: BTreeSet<(u64, u64)> = nodes.values().filter_map(|v| v.parent.map(|p| (p, v.vis_id))).collect();
        if edges != implied || edges.len() != archive.edges.len() {
            return bad("edge list disagrees with parent links".into());
        }
        let roots: Vec<u64> = nodes.values().filter(|v| v.parent.is_none()).map(|v| v.vis_id).collect();
        if roots != [root] {
            return bad(format!("expected the single root {root}, found {roots:?}"));
        }
        for v in nodes.values() {
            // walking up must reach the root within |nodes| steps
            let mut cur = v.vis_id;
            for _ in 0..=nodes.len() {
                match nodes.get(&cur).map(|n| n.parent) {
                    Some(Some(p)) => cur = p,
                    Some(None) => break,
                    None => return bad(format!("visual {} has a missing ancestor {cur}", v.vis_id)),
                }
            }
            if cur != root {
                return bad(format!("visual {} is on a cycle", v.vis_id));
            }
        }
        if !nodes.contains_key(&archive.focus) {
            return bad(format!("focus {} is not a visual", archive.focus));
        }
        let mut annotations = BTreeMap::new();
        for a in archive.annotations {
            let Some(v) = nodes.get(&a.vis_id) else {
                return bad(format!("annotation {} on unknown visual {}", a.id, a.vis_id));
            };
            let schema = v.v_type.relation(&a.relation).map_err(|e| ExploreError::CorruptArchive(e.to_string()))?;
            schema.check(&a.tuples).map_err(|e| ExploreError::CorruptArchive(e.to_string()))?;
            if a.id == 0 || a.id >= archive.next_annotation_id {
                return bad(format!("annotation id {} outside the allocated range", a.id));
            }
            let id = a.id;
            if annotations.insert(id, a).is_some() {
                return bad(format!("duplicate annotation id {id}"));
            }
        }
        let mut cache = ComputeCache::new();
        for k in &archive.cache_keys {
            let Some(t) = &k.template_id else {
                return bad(format!("cache key {} has no template", k.key));
            };
            let template = catalog.get(t).map_err(|e| ExploreError::CorruptArchive(e.to_string()))?;
            let normalized =
                template.normalize(&k.bindings).map_err(|e| ExploreError::CorruptArchive(e.to_string()))?;
            if crate::queryengine::binding_key(t, &normalized) != k.key {
                return bad(format!("cache key {} does not match its bindings", k.key));
            }
            cache.restore_key(k);
        }
        for (k, d) in archive.datasets {
            cache.restore_dataset(&k, d);
        }
        if let Some(v) = nodes.values().find(|v| !cache.contains(&v.parameters.dataset)) {
            return bad(format!("visual {} references an unknown dataset", v.vis_id));
        }
        Ok(Session {
            catalog,
            nodes,
            annotations,
            focus: archive.focus,
            next_id: archive.next_id,
            next_annotation_id: archive.next_annotation_id,
            cache,
        })
    }

    pub fn import_json(catalog: Arc<TemplateCatalog>, json: &str) -> Result<Self, ExploreError> {
        let archive: SessionArchive =
            serde_json::from_str(json).map_err(|e| ExploreError::CorruptArchive(e.to_string()))?;
        Self::import(catalog, archive)
    }
}
