//! Query templates: typed parameters, a fixed interpreted plan, and the
//! session-scoped compute cache that memoizes their results.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use sha2::{Digest, Sha256};

use crate::analytics::{self, BurstInterval, LdaParams, PageRankConfig};
use crate::dataset::{DataModel, Dataset, Document, DocumentSet};
use crate::error::QueryError;
use crate::store::text::{is_stopword, tokenize};
use crate::store::{
    build_graph_from_tables, group_count, ColumnClass, Granularity, GraphMappingSpec, PropertyGraph, Store, Table,
    TimeSeries, Value, HASHTAG_USE,
};
use crate::xindex::{build_edge_record_index, time_range_lookup, JoinSpec};

use super::ops::{merge_graph_relational, topk};
use super::pattern::{eval_pattern, matched_subgraph, parse_pattern};

const CATALOG_JSON: &str = include_str!("../../data/templates.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamType {
    Interval,
    Tagset,
    Authorset,
    Integer,
    Real,
    String,
    Tableref,
    Graphref,
}

/// A bound parameter value, tagged with its semantic type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "lowercase")]
pub enum ParamValue {
    Interval {
        start: i64,
        end: i64,
    },
    Tagset(BTreeSet<String>),
    Authorset(BTreeSet<String>),
    Integer(i64),
    Real(f64),
    String(String),
    /// Cache key of a relational dataset.
    Tableref(String),
    /// Cache key of a graph dataset.
    Graphref(String),
}

impl ParamValue {
    pub fn param_type(&self) -> ParamType {
        match self {
            ParamValue::Interval { .. } => ParamType::Interval,
            ParamValue::Tagset(_) => ParamType::Tagset,
            ParamValue::Authorset(_) => ParamType::Authorset,
            ParamValue::Integer(_) => ParamType::Integer,
            ParamValue::Real(_) => ParamType::Real,
            ParamValue::String(_) => ParamType::String,
            ParamValue::Tableref(_) => ParamType::Tableref,
            ParamValue::Graphref(_) => ParamType::Graphref,
        }
    }

    pub fn tagset<I: IntoIterator<Item = S>, S: Into<String>>(tags: I) -> Self {
        ParamValue::Tagset(tags.into_iter().map(Into::into).collect())
    }

    pub fn authorset<I: IntoIterator<Item = S>, S: Into<String>>(ids: I) -> Self {
        ParamValue::Authorset(ids.into_iter().map(Into::into).collect())
    }
}

pub type Bindings = BTreeMap<String, ParamValue>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateParam {
    pub name: String,
    #[serde(rename = "type")]
    pub param_type: ParamType,
    #[serde(default)]
    pub required: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<ParamValue>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
}

/// A step argument: a template parameter, a column of an earlier step's
/// output, or a literal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Arg {
    Param { param: String },
    Column { column: ColumnRef },
    Value { value: Json },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnRef {
    pub step: String,
    #[serde(default)]
    pub column: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterCmp {
    #[default]
    In,
    NotIn,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Step {
    Scan {
        table: String,
        out: String,
    },
    /// Rows of a temporal base table inside the interval, via the store's
    /// time-hierarchy index. Without an interval this is a scan.
    TimeRange {
        table: String,
        interval: Arg,
        out: String,
    },
    /// Skipped (output = input) when the value is unbound or when the
    /// parameter named by `when` is unbound.
    Filter {
        input: String,
        column: String,
        #[serde(default)]
        cmp: FilterCmp,
        value: Arg,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        when: Option<String>,
        out: String,
    },
    GroupCount {
        input: String,
        by: Vec<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        distinct: Option<String>,
        count_column: String,
        out: String,
    },
    JoinViaIndex {
        graph: String,
        table: String,
        edge_property: String,
        column: String,
        projection: Vec<String>,
        out: String,
    },
    GraphPattern {
        graph: String,
        query: Arg,
        #[serde(default)]
        as_graph: bool,
        out: String,
    },
    /// Skipped when `k` is unbound.
    Topk {
        input: String,
        column: String,
        k: Arg,
        #[serde(default = "yes")]
        descending: bool,
        out: String,
    },
    Analytic {
        function: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        input: Option<String>,
        #[serde(default)]
        args: BTreeMap<String, Arg>,
        out: String,
    },
    Transform {
        mapping: GraphMappingSpec,
        /// Mapping table name → earlier step output; other names resolve
        /// to store tables.
        #[serde(default)]
        tables: BTreeMap<String, String>,
        out: String,
    },
}

impl Step {
    pub fn out(&self) -> &str {
        match self {
            Step::Scan { out, .. }
            | Step::TimeRange { out, .. }
            | Step::Filter { out, .. }
            | Step::GroupCount { out, .. }
            | Step::JoinViaIndex { out, .. }
            | Step::GraphPattern { out, .. }
            | Step::Topk { out, .. }
            | Step::Analytic { out, .. }
            | Step::Transform { out, .. } => out,
        }
    }

    fn step_inputs(&self) -> Vec<&str> {
        match self {
            Step::Filter { input, .. } | Step::GroupCount { input, .. } | Step::Topk { input, .. } => {
                vec![input]
            }
            Step::JoinViaIndex { graph, .. } | Step::GraphPattern { graph, .. } => vec![graph],
            Step::Analytic { input, .. } => input.iter().map(String::as_str).collect(),
            Step::Transform { tables, .. } => tables.values().map(String::as_str).collect(),
            Step::Scan { .. } | Step::TimeRange { .. } => vec![],
        }
    }

    fn args(&self) -> Vec<&Arg> {
        match self {
            Step::TimeRange { interval, .. } => vec![interval],
            Step::Filter { value, .. } => vec![value],
            Step::GraphPattern { query, .. } => vec![query],
            Step::Topk { k, .. } => vec![k],
            Step::Analytic { args, .. } => args.values().collect(),
            _ => vec![],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryTemplate {
    pub template_id: String,
    #[serde(default)]
    pub description: String,
    pub parameters: Vec<TemplateParam>,
    pub plan: Vec<Step>,
    pub output_model: DataModel,
    /// Step whose result is returned; defaults to the last step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

impl QueryTemplate {
    pub fn param(&self, name: &str) -> Option<&TemplateParam> {
        self.parameters.iter().find(|p| p.name == name)
    }

    fn output_step(&self) -> &str {
        self.output.as_deref().unwrap_or_else(|| self.plan.last().map_or("", Step::out))
    }

    /// Unique parameter names; every step reads only declared parameters or
    /// outputs of earlier steps.
    pub fn validate(&self) -> Result<(), QueryError> {
        let bad = |m: String| Err(QueryError::InvalidPlan(format!("{}: {m}", self.template_id)));
        let mut names = BTreeSet::new();
        for p in &self.parameters {
            if !names.insert(p.name.as_str()) {
                return bad(format!("duplicate parameter {}", p.name));
            }
            if let Some(d) = &p.default {
                if !type_accepts(p.param_type, d) {
                    return bad(format!("default of {} has the wrong type", p.name));
                }
            }
        }
        if self.plan.is_empty() {
            return bad("empty plan".into());
        }
        let mut outs: BTreeSet<&str> = BTreeSet::new();
        for step in &self.plan {
            for i in step.step_inputs() {
                if !outs.contains(i) {
                    return bad(format!("step {} reads {i} before it is produced", step.out()));
                }
            }
            for a in step.args() {
                match a {
                    Arg::Param { param } if !names.contains(param.as_str()) => {
                        return bad(format!("step {} uses undeclared parameter {param}", step.out()));
                    }
                    Arg::Column { column } if !outs.contains(column.step.as_str()) => {
                        return bad(format!("step {} reads {} before it is produced", step.out(), column.step));
                    }
                    _ => {}
                }
            }
            if let Step::Filter { when: Some(w), .. } = step {
                if !names.contains(w.as_str()) {
                    return bad(format!("step {} guarded by undeclared parameter {w}", step.out()));
                }
            }
            if !outs.insert(step.out()) {
                return bad(format!("step output {} defined twice", step.out()));
            }
        }
        if !outs.contains(self.output_step()) {
            return bad(format!("output {} is not produced", self.output_step()));
        }
        Ok(())
    }

    /// Checks types, fills defaults, and drops nothing: the result holds
    /// exactly the parameters that take part in execution.
    pub fn normalize(&self, bindings: &Bindings) -> Result<Bindings, QueryError> {
        if let Some(unknown) = bindings.keys().find(|k| self.param(k).is_none()) {
            return Err(QueryError::InvalidArgument(format!(
                "template {} has no parameter {unknown}",
                self.template_id
            )));
        }
        let mut out = Bindings::new();
        for p in &self.parameters {
            match bindings.get(&p.name) {
                Some(v) => {
                    let v = coerce(p, v)?;
                    out.insert(p.name.clone(), v);
                }
                None => match (&p.default, p.required) {
                    (Some(d), _) => {
                        out.insert(p.name.clone(), d.clone());
                    }
                    (None, true) => return Err(QueryError::MissingParameter(p.name.clone())),
                    (None, false) => {}
                },
            }
        }
        Ok(out)
    }
}

fn type_accepts(t: ParamType, v: &ParamValue) -> bool {
    v.param_type() == t || (t == ParamType::Real && matches!(v, ParamValue::Integer(_)))
}

fn coerce(p: &TemplateParam, v: &ParamValue) -> Result<ParamValue, QueryError> {
    if !type_accepts(p.param_type, v) {
        return Err(QueryError::TypeMismatch(p.name.clone()));
    }
    Ok(match v {
        ParamValue::Integer(i) if p.param_type == ParamType::Real => ParamValue::Real(*i as f64),
        ParamValue::Interval { start, end } if start >= end => {
            return Err(QueryError::InvalidArgument(format!(
                "{}: interval start {start} must precede end {end}",
                p.name
            )))
        }
        ParamValue::Real(r) if !r.is_finite() => return Err(QueryError::TypeMismatch(p.name.clone())),
        other => other.clone(),
    })
}

/// Cache key: template id plus a hash of the canonical JSON of the
/// normalized bindings (parameter names sorted, sets sorted).
pub fn binding_key(template_id: &str, normalized: &Bindings) -> String {
    let canonical = serde_json::to_string(normalized).expect("bindings serialize");
    let digest = Sha256::new()
        .chain_update(template_id.as_bytes())
        .chain_update([0u8])
        .chain_update(canonical.as_bytes())
        .finalize();
    format!("{template_id}:{}", &hex::encode(digest)[..16])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateCatalog {
    pub version: u32,
    pub templates: Vec<QueryTemplate>,
}

impl TemplateCatalog {
    pub fn from_json(s: &str) -> Result<Self, QueryError> {
        let c: TemplateCatalog =
            serde_json::from_str(s).map_err(|e| QueryError::InvalidPlan(format!("catalog: {e}")))?;
        let mut ids = BTreeSet::new();
        for t in &c.templates {
            t.validate()?;
            if !ids.insert(t.template_id.as_str()) {
                return Err(QueryError::InvalidPlan(format!("duplicate template {}", t.template_id)));
            }
        }
        Ok(c)
    }

    /// The catalog shipped with the crate.
    pub fn builtin() -> Self {
        Self::from_json(CATALOG_JSON).expect("shipped catalog is valid")
    }

    pub fn get(&self, id: &str) -> Result<&QueryTemplate, QueryError> {
        self.templates.iter().find(|t| t.template_id == id).ok_or_else(|| QueryError::UnknownTemplate(id.to_string()))
    }
}

// ------------------------------------------------------------- the cache

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheKeyInfo {
    pub key: String,
    /// `None` for datasets registered directly rather than computed.
    pub template_id: Option<String>,
    pub bindings: Bindings,
}

#[derive(Debug, Clone)]
struct CacheEntry {
    template_id: Option<String>,
    bindings: Bindings,
    generation: u64,
    dataset: Option<Arc<Dataset>>,
}

/// Computed objects of one session, keyed by template and canonical
/// bindings. Entries computed against an older store generation are
/// recomputed on access; directly registered datasets never expire.
#[derive(Debug, Clone, Default)]
pub struct ComputeCache {
    entries: BTreeMap<String, CacheEntry>,
    executions: u64,
}

impl ComputeCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of plan executions so far.
    pub fn executions(&self) -> u64 {
        self.executions
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn keys(&self) -> Vec<CacheKeyInfo> {
        self.entries
            .iter()
            .map(|(k, e)| CacheKeyInfo {
                key: k.clone(),
                template_id: e.template_id.clone(),
                bindings: e.bindings.clone(),
            })
            .collect()
    }

    /// Registers a key without its dataset; it is computed on first access.
    pub fn restore_key(&mut self, info: &CacheKeyInfo) {
        self.entries.entry(info.key.clone()).or_insert(CacheEntry {
            template_id: info.template_id.clone(),
            bindings: info.bindings.clone(),
            generation: 0,
            dataset: None,
        });
    }

    /// Stores a dataset that did not come from a template.
    pub fn insert_dataset(&mut self, dataset: Dataset) -> (String, Arc<Dataset>) {
        let json = serde_json::to_string(&dataset).expect("datasets serialize");
        let digest = Sha256::digest(json.as_bytes());
        let key = format!("inline:{}", &hex::encode(digest)[..16]);
        let ds = Arc::new(dataset);
        self.entries.insert(
            key.clone(),
            CacheEntry { template_id: None, bindings: Bindings::new(), generation: 0, dataset: Some(ds.clone()) },
        );
        (key, ds)
    }

    /// Datasets registered directly, which an archive must carry inline.
    pub fn inline_datasets(&self) -> BTreeMap<String, Dataset> {
        self.entries
            .iter()
            .filter(|(_, e)| e.template_id.is_none())
            .filter_map(|(k, e)| e.dataset.as_ref().map(|d| (k.clone(), (**d).clone())))
            .collect()
    }

    /// Re-registers a directly stored dataset under its archived key.
    pub fn restore_dataset(&mut self, key: &str, dataset: Dataset) {
        self.entries.insert(
            key.to_string(),
            CacheEntry {
                template_id: None,
                bindings: Bindings::new(),
                generation: 0,
                dataset: Some(Arc::new(dataset)),
            },
        );
    }

    /// Dataset for `key`, recomputing when missing or stale.
    pub fn get(&mut self, key: &str, catalog: &TemplateCatalog, store: &Store) -> Result<Arc<Dataset>, QueryError> {
        let entry = self
            .entries
            .get(key)
            .ok_or_else(|| QueryError::InvalidArgument(format!("unknown dataset reference {key}")))?;
        match (&entry.template_id, &entry.dataset) {
            (None, Some(d)) => Ok(d.clone()),
            (None, None) => Err(QueryError::InvalidArgument(format!(
                "dataset {key} was not computed by a template and is not available"
            ))),
            (Some(_), Some(d)) if entry.generation == store.generation() => Ok(d.clone()),
            (Some(t), _) => {
                let (t, b) = (t.clone(), entry.bindings.clone());
                Ok(self.run(catalog, &t, &b, store)?.1)
            }
        }
    }

    /// Runs a template through the cache; returns the key and dataset.
    pub fn run(
        &mut self,
        catalog: &TemplateCatalog,
        template_id: &str,
        bindings: &Bindings,
        store: &Store,
    ) -> Result<(String, Arc<Dataset>), QueryError> {
        let template = catalog.get(template_id)?;
        let normalized = template.normalize(bindings)?;
        let key = binding_key(template_id, &normalized);
        if let Some(e) = self.entries.get(&key) {
            if let Some(d) = &e.dataset {
                if e.generation == store.generation() {
                    return Ok((key, d.clone()));
                }
            }
        }
        let mut refs = BTreeMap::new();
        for (name, v) in &normalized {
            if let ParamValue::Graphref(k) | ParamValue::Tableref(k) = v {
                let ds = self.get(k, catalog, store)?;
                let ok = match v {
                    ParamValue::Graphref(_) => ds.model() == DataModel::Graph,
                    _ => ds.model() == DataModel::Relational,
                };
                if !ok {
                    return Err(QueryError::TypeMismatch(name.clone()));
                }
                refs.insert(name.clone(), ds);
            }
        }
        let ds = Arc::new(execute(template, &normalized, &refs, store)?);
        self.executions += 1;
        self.entries.insert(
            key.clone(),
            CacheEntry {
                template_id: Some(template_id.to_string()),
                bindings: normalized,
                generation: store.generation(),
                dataset: Some(ds.clone()),
            },
        );
        Ok((key, ds))
    }
}

/// Runs a template without caching.
pub fn run_template(
    catalog: &TemplateCatalog,
    template_id: &str,
    bindings: &Bindings,
    store: &Store,
    cache: &mut ComputeCache,
) -> Result<Arc<Dataset>, QueryError> {
    cache.run(catalog, template_id, bindings, store).map(|(_, d)| d)
}

// ------------------------------------------------------- plan execution

#[derive(Debug, Clone)]
enum Slot {
    Table(Table),
    Graph(PropertyGraph),
    Series(Vec<TimeSeries>),
    Intervals(Vec<BurstInterval>),
    Tags(BTreeSet<String>),
    Docs(DocumentSet),
    Dataset(Dataset),
}

impl Slot {
    fn kind(&self) -> &'static str {
        match self {
            Slot::Table(_) => "table",
            Slot::Graph(_) => "graph",
            Slot::Series(_) => "series",
            Slot::Intervals(_) => "intervals",
            Slot::Tags(_) => "tags",
            Slot::Docs(_) => "documents",
            Slot::Dataset(_) => "dataset",
        }
    }

    fn into_dataset(self) -> Dataset {
        match self {
            Slot::Table(t) => Dataset::Relational(t),
            Slot::Graph(g) => Dataset::Graph(g),
            Slot::Series(s) => Dataset::Timeseries(s),
            Slot::Intervals(iv) => Dataset::Relational(intervals_table(&iv)),
            Slot::Tags(t) => {
                let mut tab = Table::with_schema("tags", &[("hashtag", ColumnClass::Categorical)]).expect("static");
                tab.rows = t.into_iter().map(|h| vec![Value::Str(h)]).collect();
                Dataset::Relational(tab)
            }
            Slot::Docs(d) => Dataset::Document(d),
            Slot::Dataset(d) => d,
        }
    }
}

fn intervals_table(iv: &[BurstInterval]) -> Table {
    let mut t = Table::with_schema(
        "bursts",
        &[("start", ColumnClass::Temporal), ("end", ColumnClass::Temporal), ("peak", ColumnClass::Continuous)],
    )
    .expect("static schema");
    t.rows = iv.iter().map(|b| vec![Value::Int(b.start), Value::Int(b.end), Value::Real(b.peak)]).collect();
    t
}

enum ArgVal<'a> {
    Missing,
    Param(&'a ParamValue),
    Set(BTreeSet<Value>),
    Json(&'a Json),
}

struct Exec<'a> {
    template: &'a QueryTemplate,
    bindings: &'a Bindings,
    refs: &'a BTreeMap<String, Arc<Dataset>>,
    store: &'a Store,
    slots: BTreeMap<String, Slot>,
}

fn plan_err(m: impl Into<String>) -> QueryError {
    QueryError::InvalidPlan(m.into())
}

impl<'a> Exec<'a> {
    fn slot(&self, name: &str) -> Result<&Slot, QueryError> {
        self.slots.get(name).ok_or_else(|| plan_err(format!("no step output {name}")))
    }

    fn table(&self, name: &str) -> Result<&Table, QueryError> {
        match self.slot(name)? {
            Slot::Table(t) => Ok(t),
            Slot::Dataset(Dataset::Relational(t)) => Ok(t),
            other => Err(plan_err(format!("{name} is {}, expected table", other.kind()))),
        }
    }

    fn graph(&self, name: &str) -> Result<&PropertyGraph, QueryError> {
        match self.slot(name)? {
            Slot::Graph(g) => Ok(g),
            Slot::Dataset(d) => d.as_graph().ok_or_else(|| plan_err(format!("{name} is not a graph"))),
            other => Err(plan_err(format!("{name} is {}, expected graph", other.kind()))),
        }
    }

    fn arg(&self, a: &'a Arg) -> Result<ArgVal<'a>, QueryError> {
        match a {
            Arg::Param { param } => Ok(self.bindings.get(param).map_or(ArgVal::Missing, ArgVal::Param)),
            Arg::Value { value } => Ok(ArgVal::Json(value)),
            Arg::Column { column } => match self.slot(&column.step)? {
                Slot::Tags(t) => Ok(ArgVal::Set(t.iter().map(|s| Value::str(s.clone())).collect())),
                Slot::Table(_) | Slot::Dataset(Dataset::Relational(_)) => {
                    let t = self.table(&column.step)?;
                    let col = column
                        .column
                        .as_deref()
                        .ok_or_else(|| plan_err(format!("column reference to {} needs a column", column.step)))?;
                    let ci = t.col(col)?;
                    Ok(ArgVal::Set(t.values(ci).filter(|v| !v.is_null()).cloned().collect()))
                }
                other => Err(plan_err(format!("cannot read a column of {}", other.kind()))),
            },
        }
    }

    fn named_arg(&self, args: &'a BTreeMap<String, Arg>, name: &str) -> Result<ArgVal<'a>, QueryError> {
        match args.get(name) {
            None => Ok(ArgVal::Missing),
            Some(a) => self.arg(a),
        }
    }

    fn int(&self, v: ArgVal<'_>, name: &str) -> Result<Option<i64>, QueryError> {
        match v {
            ArgVal::Missing => Ok(None),
            ArgVal::Param(ParamValue::Integer(i)) => Ok(Some(*i)),
            ArgVal::Json(j) => j.as_i64().map(Some).ok_or_else(|| plan_err(format!("{name}: expected integer"))),
            _ => Err(QueryError::TypeMismatch(name.to_string())),
        }
    }

    fn usize_arg(&self, args: &'a BTreeMap<String, Arg>, name: &str, default: usize) -> Result<usize, QueryError> {
        match self.int(self.named_arg(args, name)?, name)? {
            None => Ok(default),
            Some(i) if i >= 0 => Ok(i as usize),
            Some(i) => Err(QueryError::InvalidArgument(format!("{name} must be non-negative, got {i}"))),
        }
    }

    fn real_arg(&self, args: &'a BTreeMap<String, Arg>, name: &str) -> Result<Option<f64>, QueryError> {
        match self.named_arg(args, name)? {
            ArgVal::Missing => Ok(None),
            ArgVal::Param(ParamValue::Real(r)) => Ok(Some(*r)),
            ArgVal::Param(ParamValue::Integer(i)) => Ok(Some(*i as f64)),
            ArgVal::Json(j) => j.as_f64().map(Some).ok_or_else(|| plan_err(format!("{name}: expected number"))),
            _ => Err(QueryError::TypeMismatch(name.to_string())),
        }
    }

    fn str_arg(&self, args: &'a BTreeMap<String, Arg>, name: &str) -> Result<Option<String>, QueryError> {
        match self.named_arg(args, name)? {
            ArgVal::Missing => Ok(None),
            ArgVal::Param(ParamValue::String(s)) => Ok(Some(s.clone())),
            ArgVal::Json(Json::String(s)) => Ok(Some(s.clone())),
            _ => Err(QueryError::TypeMismatch(name.to_string())),
        }
    }

    fn bool_arg(&self, args: &'a BTreeMap<String, Arg>, name: &str) -> Result<bool, QueryError> {
        match self.named_arg(args, name)? {
            ArgVal::Missing => Ok(false),
            ArgVal::Json(Json::Bool(b)) => Ok(*b),
            ArgVal::Param(ParamValue::Integer(i)) => Ok(*i != 0),
            _ => Err(QueryError::TypeMismatch(name.to_string())),
        }
    }

    fn interval(&self, v: ArgVal<'_>, name: &str) -> Result<Option<(i64, i64)>, QueryError> {
        match v {
            ArgVal::Missing => Ok(None),
            ArgVal::Param(ParamValue::Interval { start, end }) => Ok(Some((*start, *end))),
            _ => Err(QueryError::TypeMismatch(name.to_string())),
        }
    }

    fn set(&self, v: ArgVal<'_>, name: &str) -> Result<Option<BTreeSet<Value>>, QueryError> {
        match v {
            ArgVal::Missing => Ok(None),
            ArgVal::Set(s) => Ok(Some(s)),
            ArgVal::Param(ParamValue::Tagset(s) | ParamValue::Authorset(s)) => {
                Ok(Some(s.iter().map(|x| Value::str(x.clone())).collect()))
            }
            ArgVal::Json(Json::Array(a)) => Ok(Some(
                a.iter()
                    .map(|j| serde_json::from_value::<Value>(j.clone()))
                    .collect::<Result<_, _>>()
                    .map_err(|e| plan_err(format!("{name}: {e}")))?,
            )),
            _ => Err(QueryError::TypeMismatch(name.to_string())),
        }
    }

    fn strings(&self, v: ArgVal<'_>, name: &str) -> Result<Option<BTreeSet<String>>, QueryError> {
        Ok(self.set(v, name)?.map(|s| s.iter().map(Value::key_string).collect()))
    }

    fn scalar(&self, v: ArgVal<'_>, name: &str) -> Result<Option<Value>, QueryError> {
        match v {
            ArgVal::Missing => Ok(None),
            ArgVal::Param(ParamValue::Integer(i)) => Ok(Some(Value::Int(*i))),
            ArgVal::Param(ParamValue::Real(r)) => Ok(Some(Value::Real(*r))),
            ArgVal::Param(ParamValue::String(s)) => Ok(Some(Value::str(s.clone()))),
            ArgVal::Json(j) => {
                serde_json::from_value(j.clone()).map(Some).map_err(|e| plan_err(format!("{name}: {e}")))
            }
            _ => Err(QueryError::TypeMismatch(name.to_string())),
        }
    }

    fn granularity(&self, args: &'a BTreeMap<String, Arg>) -> Result<Granularity, QueryError> {
        match self.str_arg(args, "granularity")?.as_deref() {
            None | Some("hour") => Ok(Granularity::Hour),
            Some("day") => Ok(Granularity::Day),
            Some("week") => Ok(Granularity::Week),
            Some(other) => Err(QueryError::InvalidArgument(format!("unknown granularity {other}"))),
        }
    }

    fn time_range(&self, table: &str, interval: Option<(i64, i64)>) -> Result<Table, QueryError> {
        let Some((start, end)) = interval else {
            return Ok(self.store.scan(table)?.into_owned());
        };
        if self.store.index_is_stale() {
            return Err(QueryError::StaleIndex("time index predates the latest ingest; refresh views first".into()));
        }
        let base = self
            .store
            .table(table)
            .ok_or_else(|| QueryError::Store(crate::error::StoreError::UnknownTable(table.into())))?;
        let refs = time_range_lookup(self.store.time_index(), start, end)?;
        let mut out = Table::new(base.name.clone(), base.columns.clone())?;
        out.rows = refs.iter().filter(|r| &*r.table == table).map(|r| base.rows[r.row].clone()).collect();
        if table == HASHTAG_USE && !self.store.count_retweets() {
            let c = out.col("is_retweet")?;
            out = out.filtered(|r| r[c] != Value::Bool(true));
        }
        Ok(out)
    }

    fn run_step(&mut self, step: &'a Step) -> Result<Slot, QueryError> {
        Ok(match step {
            Step::Scan { table, .. } => Slot::Table(self.store.scan(table)?.into_owned()),
            Step::TimeRange { table, interval, .. } => {
                let iv = self.interval(self.arg(interval)?, "interval")?;
                Slot::Table(self.time_range(table, iv)?)
            }
            Step::Filter { input, column, cmp, value, when, .. } => {
                let t = self.table(input)?;
                let skip = when.as_ref().is_some_and(|w| !self.bindings.contains_key(w));
                let v = if skip { ArgVal::Missing } else { self.arg(value)? };
                if matches!(v, ArgVal::Missing) {
                    return Ok(Slot::Table(t.clone()));
                }
                let ci = t.col(column)?;
                let out = match cmp {
                    FilterCmp::In | FilterCmp::NotIn => {
                        let set = self.set(v, column)?.expect("bound");
                        let keep_in = *cmp == FilterCmp::In;
                        t.filtered(|r| set.contains(&r[ci]) == keep_in)
                    }
                    _ => {
                        let x = self.scalar(v, column)?.expect("bound");
                        let cmp = *cmp;
                        t.filtered(|r| {
                            let o = match (r[ci].as_f64(), x.as_f64()) {
                                (Some(a), Some(b)) => a.partial_cmp(&b),
                                _ if r[ci].is_null() => None,
                                _ => Some(r[ci].cmp(&x)),
                            };
                            use std::cmp::Ordering::*;
                            match (cmp, o) {
                                (_, None) => false,
                                (FilterCmp::Eq, Some(o)) => o == Equal,
                                (FilterCmp::Ne, Some(o)) => o != Equal,
                                (FilterCmp::Lt, Some(o)) => o == Less,
                                (FilterCmp::Le, Some(o)) => o != Greater,
                                (FilterCmp::Gt, Some(o)) => o == Greater,
                                (FilterCmp::Ge, Some(o)) => o != Less,
                                _ => unreachable!("set comparisons handled above"),
                            }
                        })
                    }
                };
                Slot::Table(out)
            }
            Step::GroupCount { input, by, distinct, count_column, .. } => {
                Slot::Table(group_count(self.table(input)?, by, distinct.as_deref(), count_column)?)
            }
            Step::JoinViaIndex { graph, table, edge_property, column, projection, .. } => {
                let g = self.graph(graph)?;
                let t = match self.slots.get(table.as_str()) {
                    Some(_) => std::borrow::Cow::Borrowed(self.table(table)?),
                    None => self.store.scan(table)?,
                };
                let spec = JoinSpec { edge_property: edge_property.clone(), column: column.clone() };
                let idx = build_edge_record_index(g, &t, &spec)?;
                Slot::Graph(merge_graph_relational(g, &t, &idx, projection)?)
            }
            Step::GraphPattern { graph, query, as_graph, .. } => {
                let text = match self.arg(query)? {
                    ArgVal::Param(ParamValue::String(s)) => s.clone(),
                    ArgVal::Json(Json::String(s)) => s.clone(),
                    ArgVal::Missing => return Err(QueryError::MissingParameter("query".into())),
                    _ => return Err(QueryError::TypeMismatch("query".into())),
                };
                let q = parse_pattern(&text)?;
                let g = self.graph(graph)?;
                if *as_graph {
                    Slot::Graph(matched_subgraph(&q, g))
                } else {
                    Slot::Table(eval_pattern(&q, g).to_table("pattern_matches"))
                }
            }
            Step::Topk { input, column, k, descending, .. } => {
                let t = self.table(input)?;
                match self.int(self.arg(k)?, "k")? {
                    None => Slot::Table(t.clone()),
                    Some(k) if k >= 1 => Slot::Table(topk(t, column, k as usize, *descending)?),
                    Some(k) => return Err(QueryError::InvalidArgument(format!("k must be at least 1, got {k}"))),
                }
            }
            Step::Analytic { function, input, args, .. } => self.analytic(function, input.as_deref(), args)?,
            Step::Transform { mapping, tables, .. } => {
                let mut lookup: BTreeMap<&str, &Table> = BTreeMap::new();
                for (name, slot) in tables {
                    lookup.insert(name.as_str(), self.table(slot)?);
                }
                let store = self.store;
                let g = build_graph_from_tables(mapping, |n| lookup.get(n).copied().or_else(|| store.table(n)))?;
                Slot::Graph(g)
            }
        })
    }

    fn analytic(
        &mut self,
        function: &str,
        input: Option<&str>,
        args: &'a BTreeMap<String, Arg>,
    ) -> Result<Slot, QueryError> {
        let need_input = || input.ok_or_else(|| plan_err(format!("{function} needs an input step")));
        Ok(match function {
            "expand_tags" => {
                let seeds = self
                    .strings(self.named_arg(args, "seeds")?, "seeds")?
                    .ok_or_else(|| QueryError::MissingParameter("seeds".into()))?;
                let n = self.usize_arg(args, "n", 0)?;
                let m = self.usize_arg(args, "min_support", 1)?.max(1);
                let iv = self.interval(self.named_arg(args, "interval")?, "interval")?;
                let mut tags = seeds.clone();
                if n > 0 && !seeds.is_empty() {
                    let t = analytics::cooccurrence_expand(self.store, &seeds, n, m, iv)?;
                    tags.extend(t.rows.iter().map(|r| r[0].key_string()));
                }
                Slot::Tags(tags)
            }
            "tweet_counts" => Slot::Series(self.tweet_counts(args)?),
            "detect_bursts" => {
                let series = match self.slot(need_input()?)? {
                    Slot::Series(s) => s.first().cloned().ok_or_else(|| plan_err("no series to scan"))?,
                    other => return Err(plan_err(format!("detect_bursts over {}", other.kind()))),
                };
                let w = self.usize_arg(args, "window", analytics::DEFAULT_WINDOW)?;
                let tau = self.real_arg(args, "tau")?.unwrap_or(analytics::DEFAULT_TAU);
                let l = self.usize_arg(args, "min_len", analytics::DEFAULT_MIN_LEN)?;
                Slot::Intervals(analytics::detect_bursts(&series, w, tau, l)?)
            }
            "bursty_hashtags" => {
                let iv = match self.slot(need_input()?)? {
                    Slot::Intervals(iv) => iv.clone(),
                    other => return Err(plan_err(format!("bursty_hashtags over {}", other.kind()))),
                };
                let k = self.usize_arg(args, "k", 10)?;
                Slot::Table(analytics::bursty_hashtags(self.store, &iv, k, self.granularity(args)?)?)
            }
            "cooccurrence_pairs" => {
                let t = self.table(need_input()?)?;
                let min = self.usize_arg(args, "min_count", 1)?;
                Slot::Table(cooccurrence_pairs(t, min as i64)?)
            }
            "documents" => {
                let t = self.table(need_input()?)?;
                Slot::Docs(documents(t)?)
            }
            "lda" => {
                let docs = match self.slot(need_input()?)? {
                    Slot::Docs(d) => d.clone(),
                    Slot::Dataset(Dataset::Document(d)) => d.clone(),
                    other => return Err(plan_err(format!("lda over {}", other.kind()))),
                };
                let params = LdaParams {
                    topics: self.usize_arg(args, "topics", 5)?,
                    alpha: self.real_arg(args, "alpha")?,
                    beta: self.real_arg(args, "beta")?.unwrap_or(0.01),
                    iterations: self.usize_arg(args, "iterations", 500)?,
                    seed: self.usize_arg(args, "seed", 0)? as u64,
                };
                let input: Vec<(String, Vec<String>)> =
                    docs.docs.iter().map(|d| (d.id.clone(), d.tokens.clone())).collect();
                let model = analytics::lda_fit(&input, &params)?;
                let summary = analytics::topic_outputs(
                    &model,
                    self.usize_arg(args, "top_terms", 10)?,
                    self.usize_arg(args, "top_docs", 5)?,
                )?;
                Slot::Dataset(Dataset::Topics(summary))
            }
            "influencers" => {
                let g = self.graph(need_input()?)?;
                let p = self.real_arg(args, "percentile")?.unwrap_or(0.1);
                let cfg = PageRankConfig {
                    damping: self.real_arg(args, "damping")?.unwrap_or(0.85),
                    ..PageRankConfig::default()
                };
                Slot::Dataset(Dataset::Influence(analytics::influencers(g, p, &cfg)?))
            }
            "search" => {
                let q = self.str_arg(args, "query")?.ok_or_else(|| QueryError::MissingParameter("query".into()))?;
                let iv = self.interval(self.named_arg(args, "interval")?, "interval")?;
                let k = self.usize_arg(args, "k", usize::MAX)?;
                Slot::Table(self.search(&q, iv, k)?)
            }
            "load" => {
                let name = match args.get("ref") {
                    Some(Arg::Param { param }) => param,
                    _ => return Err(plan_err("load needs a ref parameter")),
                };
                let ds = self.refs.get(name).ok_or_else(|| QueryError::MissingParameter(name.clone()))?;
                match &**ds {
                    Dataset::Relational(t) => Slot::Table(t.clone()),
                    Dataset::Graph(g) => Slot::Graph(g.clone()),
                    Dataset::Influence(r) => Slot::Graph(r.combined.clone()),
                    other => Slot::Dataset(other.clone()),
                }
            }
            other => return Err(plan_err(format!("unknown analytic function {other}"))),
        })
    }

    fn tweet_counts(&self, args: &'a BTreeMap<String, Arg>) -> Result<Vec<TimeSeries>, QueryError> {
        let g = self.granularity(args)?;
        let tags = self.strings(self.named_arg(args, "tagset")?, "tagset")?;
        let iv = self.interval(self.named_arg(args, "interval")?, "interval")?;
        let per_tag = self.bool_arg(args, "per_tag")?;
        let inside = |t: i64| iv.is_none_or(|(a, b)| t >= a && t < b);
        let range = match (iv, self.store.time_span()) {
            (Some((a, b)), _) => Some((a, b - 1)),
            (None, Some(span)) => Some(span),
            (None, None) => None,
        };
        let mut out = Vec::new();
        let first = match &tags {
            None => TimeSeries::from_timestamps(
                "total_tweets",
                g,
                self.store.records().iter().map(|r| r.created_at).filter(|t| inside(*t)),
            ),
            Some(tags) => TimeSeries::from_timestamps(
                "tagged_tweets",
                g,
                self.store
                    .stat_records()
                    .filter(|r| r.hashtags.iter().any(|h| tags.contains(h)))
                    .map(|r| r.created_at)
                    .filter(|t| inside(*t)),
            ),
        };
        out.push(first.densify(range));
        if per_tag {
            for h in tags.iter().flatten() {
                let s = TimeSeries::from_timestamps(
                    format!("tag:{h}"),
                    g,
                    self.store.stat_records().filter(|r| r.has_tag(h)).map(|r| r.created_at).filter(|t| inside(*t)),
                );
                out.push(s.densify(range));
            }
        }
        Ok(out)
    }

    fn search(&self, q: &str, iv: Option<(i64, i64)>, k: usize) -> Result<Table, QueryError> {
        let hits = self.store.text_index().search(q)?;
        let mut t = Table::with_schema(
            "search_hits",
            &[
                ("tweet_id", ColumnClass::Identifier),
                ("author_id", ColumnClass::Identifier),
                ("created_at", ColumnClass::Temporal),
                ("score", ColumnClass::Continuous),
                ("text", ColumnClass::Text),
            ],
        )
        .expect("static schema");
        for h in hits {
            let Some(r) = self.store.record(&h.name) else { continue };
            if iv.is_some_and(|(a, b)| r.created_at < a || r.created_at >= b) {
                continue;
            }
            t.push(vec![
                Value::str(r.tweet_id.clone()),
                Value::str(r.author_id.clone()),
                Value::Int(r.created_at),
                Value::Real(h.score),
                Value::str(r.text.clone()),
            ])?;
            if t.len() >= k {
                break;
            }
        }
        Ok(t)
    }
}

/// Pairs of hashtags used in the same tweet (`tag_a < tag_b`), counting
/// distinct tweets.
fn cooccurrence_pairs(t: &Table, min_count: i64) -> Result<Table, QueryError> {
    let tid = t.col("tweet_id")?;
    let hc = t.col("hashtag")?;
    let mut per_tweet: BTreeMap<&Value, BTreeSet<String>> = BTreeMap::new();
    for r in &t.rows {
        per_tweet.entry(&r[tid]).or_default().insert(r[hc].key_string());
    }
    let mut pairs: BTreeMap<(String, String), i64> = BTreeMap::new();
    for tags in per_tweet.values() {
        let v: Vec<&String> = tags.iter().collect();
        for i in 0..v.len() {
            for j in i + 1..v.len() {
                *pairs.entry((v[i].clone(), v[j].clone())).or_default() += 1;
            }
        }
    }
    let mut out = Table::with_schema(
        "cooccurrence_pairs",
        &[("tag_a", ColumnClass::Categorical), ("tag_b", ColumnClass::Categorical), ("count", ColumnClass::Continuous)],
    )
    .expect("static schema");
    out.rows = pairs
        .into_iter()
        .filter(|(_, n)| *n >= min_count)
        .map(|((a, b), n)| vec![Value::Str(a), Value::Str(b), Value::Int(n)])
        .collect();
    Ok(out)
}

/// Tokens for topic modelling: mentions and links dropped, stopwords,
/// numbers and single characters removed.
pub fn topic_tokens(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter(|w| !w.starts_with('@') && !w.starts_with("http"))
        .flat_map(tokenize)
        .filter(|t| t.chars().count() > 1 && !is_stopword(t) && !t.chars().all(|c| c.is_ascii_digit()))
        .collect()
}

fn documents(t: &Table) -> Result<DocumentSet, QueryError> {
    let id = t.col("tweet_id")?;
    let author = t.col("author_id")?;
    let text = t.col("text")?;
    let docs = t
        .rows
        .iter()
        .filter_map(|r| {
            let body = r[text].as_str().unwrap_or_default().to_string();
            let tokens = topic_tokens(&body);
            (!tokens.is_empty()).then(|| Document {
                id: r[id].key_string(),
                author_id: r[author].key_string(),
                text: body,
                tokens,
            })
        })
        .collect();
    Ok(DocumentSet { name: t.name.clone(), docs })
}

fn execute(
    template: &QueryTemplate,
    bindings: &Bindings,
    refs: &BTreeMap<String, Arc<Dataset>>,
    store: &Store,
) -> Result<Dataset, QueryError> {
    let mut ex = Exec { template, bindings, refs, store, slots: BTreeMap::new() };
    for step in &template.plan {
        let slot = ex.run_step(step)?;
        ex.slots.insert(step.out().to_string(), slot);
    }
    let out = ex.slots.remove(ex.template.output_step()).expect("validated output step").into_dataset();
    if out.model() != template.output_model {
        return Err(plan_err(format!(
            "{} produced {} but declares {}",
            template.template_id,
            out.model(),
            template.output_model
        )));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::TweetRecord;

    fn rec(id: &str, author: &str, t: i64, tags: &[&str], mentions: &[&str]) -> TweetRecord {
        TweetRecord {
            tweet_id: id.into(),
            author_id: author.into(),
            created_at: t,
            text: format!("talking about {} today", tags.join(" ")),
            hashtags: tags.iter().map(|s| s.to_string()).collect(),
            mentions: mentions.iter().map(|s| s.to_string()).collect(),
            reply_to: None,
            retweet_of: None,
        }
    }

    fn fixture() -> Store {
        let mut s = Store::new();
        s.insert_records(vec![
            rec("t1", "a1", 1_000, &["hiv", "prep"], &["a2"]),
            rec("t2", "a2", 5_000, &["hiv", "aids"], &[]),
            rec("t3", "a1", 9_000, &["prep", "condomless"], &["a3"]),
        ])
        .unwrap();
        s.refresh_views().unwrap();
        s
    }

    fn tags(t: &[&str]) -> ParamValue {
        ParamValue::tagset(t.iter().copied())
    }

    fn rows(d: &Dataset) -> Vec<Vec<Value>> {
        d.as_table().unwrap().rows.clone()
    }

    #[test]
    fn builtin_catalog_loads() {
        let c = TemplateCatalog::builtin();
        for id in [
            "hashtag_histogram",
            "author_heatmap",
            "bursty_hashtags",
            "cooccurrence_network",
            "author_mention_network",
            "topic_input_docs",
        ] {
            c.get(id).unwrap();
        }
    }

    #[test]
    fn histogram_over_either_tag() {
        let s = fixture();
        let c = TemplateCatalog::builtin();
        let mut cache = ComputeCache::new();
        let b = Bindings::from([("tagset".to_string(), tags(&["hiv", "aids"]))]);
        let d = run_template(&c, "hashtag_histogram", &b, &s, &mut cache).unwrap();
        let got: BTreeMap<String, i64> = rows(&d).iter().map(|r| (r[0].key_string(), r[1].as_i64().unwrap())).collect();
        // oracle: tweets containing either tag, then count their hashtags
        let mut want: BTreeMap<String, i64> = BTreeMap::new();
        for r in s.records().iter().filter(|r| r.has_tag("hiv") || r.has_tag("aids")) {
            for h in &r.hashtags {
                *want.entry(h.clone()).or_default() += 1;
            }
        }
        assert_eq!(got, want);
    }

    #[test]
    fn missing_and_mistyped_parameters() {
        let s = fixture();
        let c = TemplateCatalog::builtin();
        let mut cache = ComputeCache::new();
        let err = run_template(&c, "hashtag_histogram", &Bindings::new(), &s, &mut cache).unwrap_err();
        assert_eq!(err, QueryError::MissingParameter("tagset".into()));
        let b =
            Bindings::from([("tagset".to_string(), tags(&["hiv"])), ("interval".to_string(), ParamValue::Integer(3))]);
        assert_eq!(
            run_template(&c, "hashtag_histogram", &b, &s, &mut cache).unwrap_err(),
            QueryError::TypeMismatch("interval".into())
        );
        let b = Bindings::from([("interval".to_string(), ParamValue::Interval { start: 0, end: 10 })]);
        assert_eq!(run_template(&c, "bursty_hashtags", &b, &s, &mut cache).unwrap_err().code(), "SERIES_TOO_SHORT");
        assert!(matches!(run_template(&c, "nope", &b, &s, &mut cache), Err(QueryError::UnknownTemplate(_))));
    }

    use crate::error::ErrorCode;

    #[test]
    fn heatmap_matches_group_by() {
        let s = fixture();
        let c = TemplateCatalog::builtin();
        let mut cache = ComputeCache::new();
        let b = Bindings::from([("tagset".to_string(), tags(&["hiv", "prep"]))]);
        let d = run_template(&c, "author_heatmap", &b, &s, &mut cache).unwrap();
        let mut got: Vec<(String, String, i64)> =
            rows(&d).iter().map(|r| (r[0].key_string(), r[1].key_string(), r[2].as_i64().unwrap())).collect();
        got.sort();
        let mut want: BTreeMap<(String, String), i64> = BTreeMap::new();
        for r in s.records() {
            for h in r.hashtags.iter().filter(|h| *h == "hiv" || *h == "prep") {
                *want.entry((h.clone(), r.author_id.clone())).or_default() += 1;
            }
        }
        let want: Vec<(String, String, i64)> = want.into_iter().map(|((h, a), n)| (h, a, n)).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn cache_hits_and_generation_invalidation() {
        let mut s = fixture();
        let c = TemplateCatalog::builtin();
        let mut cache = ComputeCache::new();
        let b = Bindings::from([("tagset".to_string(), tags(&["hiv"]))]);
        let (k1, _) = cache.run(&c, "hashtag_histogram", &b, &s).unwrap();
        let mut b2 = b.clone();
        b2.insert("k".into(), ParamValue::Integer(500));
        let (k2, _) = cache.run(&c, "hashtag_histogram", &b2, &s).unwrap();
        assert_eq!(k1, k2);
        assert_eq!(cache.executions(), 1);
        s.insert_records(vec![rec("t4", "a3", 20_000, &["hiv"], &[])]).unwrap();
        cache.run(&c, "hashtag_histogram", &b, &s).unwrap();
        assert_eq!(cache.executions(), 2);
    }

    #[test]
    fn stale_time_index_is_reported() {
        let mut s = fixture();
        s.insert_records(vec![rec("t4", "a3", 20_000, &["hiv"], &[])]).unwrap();
        let c = TemplateCatalog::builtin();
        let b = Bindings::from([
            ("tagset".to_string(), tags(&["hiv"])),
            ("interval".to_string(), ParamValue::Interval { start: 0, end: 30_000 }),
        ]);
        let err = run_template(&c, "hashtag_histogram", &b, &s, &mut ComputeCache::new()).unwrap_err();
        assert!(matches!(err, QueryError::StaleIndex(_)));
        s.refresh_views().unwrap();
        let d = run_template(&c, "hashtag_histogram", &b, &s, &mut ComputeCache::new()).unwrap();
        assert_eq!(rows(&d)[0], vec![Value::str("hiv"), Value::Int(3)]);
    }

    #[test]
    fn graph_templates_and_refs() {
        let s = fixture();
        let c = TemplateCatalog::builtin();
        let mut cache = ComputeCache::new();
        let (gk, g) = cache.run(&c, "author_mention_network", &Bindings::new(), &s).unwrap();
        let g = g.as_graph().unwrap();
        assert_eq!(g.edge_count(), 2);
        let b = Bindings::from([
            ("graph".to_string(), ParamValue::Graphref(gk.clone())),
            ("query".to_string(), ParamValue::String("MATCH (a)-[:MENTIONS]->(b) RETURN a, b".into())),
        ]);
        let d = run_template(&c, "pattern_query", &b, &s, &mut cache).unwrap();
        assert_eq!(rows(&d).len(), 2);
        let b = Bindings::from([("graph".to_string(), ParamValue::Graphref(gk))]);
        let r = run_template(&c, "influencer_report", &b, &s, &mut cache).unwrap();
        assert_eq!(r.model(), DataModel::Graph);
        let bad = Bindings::from([("graph".to_string(), ParamValue::Graphref("nope".into()))]);
        assert!(run_template(&c, "influencer_report", &bad, &s, &mut cache).is_err());
    }

    #[test]
    fn cooccurrence_network_is_undirected_tag_graph() {
        let s = fixture();
        let c = TemplateCatalog::builtin();
        let b = Bindings::from([("min_count".to_string(), ParamValue::Integer(1))]);
        let d = run_template(&c, "cooccurrence_network", &b, &s, &mut ComputeCache::new()).unwrap();
        let g = d.as_graph().unwrap();
        assert!(!g.is_directed());
        assert_eq!(g.edge_count(), 3);
        assert!(g.contains_node("#hiv"));
    }

    #[test]
    fn documents_and_topics() {
        let s = fixture();
        let c = TemplateCatalog::builtin();
        let mut cache = ComputeCache::new();
        let d = run_template(&c, "topic_input_docs", &Bindings::new(), &s, &mut cache).unwrap();
        match &*d {
            Dataset::Document(ds) => {
                assert_eq!(ds.docs.len(), 3);
                assert!(ds.docs[0].tokens.contains(&"talking".to_string()));
            }
            other => panic!("{other:?}"),
        }
        let b = Bindings::from([
            ("topics".to_string(), ParamValue::Integer(2)),
            ("iterations".to_string(), ParamValue::Integer(20)),
        ]);
        let t = run_template(&c, "topic_model", &b, &s, &mut cache).unwrap();
        assert_eq!(t.model(), DataModel::Matrix);
    }

    #[test]
    fn catalog_validation_rejects_forward_refs() {
        let bad = r#"{"version":1,"templates":[{"template_id":"x","parameters":[],
            "output_model":"relational",
            "plan":[{"op":"topk","input":"later","column":"n","k":{"value":1},"out":"a"},
                    {"op":"scan","table":"tweets","out":"later"}]}]}"#;
        assert!(matches!(TemplateCatalog::from_json(bad), Err(QueryError::InvalidPlan(_))));
        let dup = r#"{"version":1,"templates":[{"template_id":"x","output_model":"relational",
            "parameters":[{"name":"k","type":"integer"},{"name":"k","type":"integer"}],
            "plan":[{"op":"scan","table":"tweets","out":"a"}]}]}"#;
        assert!(TemplateCatalog::from_json(dup).is_err());
    }

    #[test]
    fn binding_key_is_order_independent() {
        let a = Bindings::from([("x".to_string(), tags(&["b", "a"])), ("k".to_string(), ParamValue::Integer(1))]);
        let mut b = Bindings::new();
        b.insert("k".to_string(), ParamValue::Integer(1));
        b.insert("x".to_string(), tags(&["a", "b"]));
        assert_eq!(binding_key("t", &a), binding_key("t", &b));
        assert_ne!(binding_key("t", &a), binding_key("u", &a));
    }
}
