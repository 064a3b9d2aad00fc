//! Field encodings, interaction handling and render specifications for each
//! vType. The spec layout is documented in `docs/render-spec.md`.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::{json, Map, Value as Json};

use super::vtype::VType;
use crate::dataset::Dataset;
use crate::error::ExploreError;
use crate::store::{graph_neighborhood, ColumnClass, PropertyGraph, Table};

pub const SPEC_VERSION: u32 = 1;
/// Bars shown by a bar chart until `set_top_k` says otherwise.
pub const DEFAULT_TOP_K: usize = 100;
/// Rows embedded in a table spec; the rest is paged through the data API.
pub const TABLE_PREVIEW_ROWS: usize = 500;
pub const DEFAULT_RENDER_CONFIG: &str = "default";

pub type State = BTreeMap<String, Json>;
pub type Fields = BTreeMap<String, String>;

fn invalid(m: impl Into<String>) -> ExploreError {
    ExploreError::InvalidArguments(m.into())
}

fn table_of<'a>(v: VType, d: &'a Dataset) -> Result<&'a Table, ExploreError> {
    d.as_table()
        .ok_or_else(|| ExploreError::IncompatibleModel { v_type: v.name().into(), d_type: d.model().to_string() })
}

fn graph_of<'a>(v: VType, d: &'a Dataset) -> Result<&'a PropertyGraph, ExploreError> {
    d.as_graph()
        .ok_or_else(|| ExploreError::IncompatibleModel { v_type: v.name().into(), d_type: d.model().to_string() })
}

fn is_cat(c: ColumnClass) -> bool {
    matches!(c, ColumnClass::Categorical | ColumnClass::Identifier)
}

/// Picks the encoding fields for `v` over `d`, honouring `requested`.
pub fn choose_fields(v: VType, d: &Dataset, requested: &Fields) -> Result<Fields, ExploreError> {
    v.check_compatible(d.model())?;
    let mut f = Fields::new();
    if matches!(v, VType::BarChart | VType::PieChart | VType::Heatmap) {
        let t = table_of(v, d)?;
        let pick = |role: &str, want: fn(ColumnClass) -> bool, skip: &[&String]| -> Result<String, ExploreError> {
            if let Some(name) = requested.get(role) {
                let c = t.column(name).ok_or_else(|| invalid(format!("no column {name} for {role}")))?;
                if !want(c.class) {
                    return Err(invalid(format!("column {name} cannot encode {role}")));
                }
                return Ok(name.clone());
            }
            t.columns
                .iter()
                .find(|c| want(c.class) && !skip.contains(&&c.name))
                .map(|c| c.name.clone())
                .ok_or_else(|| invalid(format!("{v} needs a column for {role}")))
        };
        if v == VType::Heatmap {
            let x = pick("x", is_cat, &[])?;
            let y = pick("y", is_cat, &[&x])?;
            if x == y {
                return Err(invalid("heatmap x and y must differ"));
            }
            let value = pick("value", ColumnClass::is_numeric, &[])?;
            f.insert("x".into(), x);
            f.insert("y".into(), y);
            f.insert("value".into(), value);
        } else {
            let c = pick("category", is_cat, &[])?;
            f.insert("category".into(), c);
            f.insert("value".into(), pick("value", ColumnClass::is_numeric, &[])?);
        }
    } else if let Some(extra) = requested.keys().next() {
        return Err(invalid(format!("{v} takes no field {extra}")));
    }
    Ok(f)
}

fn strings(args: &Json, key: &str) -> Result<Vec<String>, ExploreError> {
    args.get(key)
        .and_then(Json::as_array)
        .and_then(|a| a.iter().map(|x| x.as_str().map(String::from)).collect::<Option<Vec<_>>>())
        .ok_or_else(|| invalid(format!("{key} must be a list of strings")))
}

fn ints(args: &Json, key: &str) -> Result<Vec<i64>, ExploreError> {
    args.get(key)
        .and_then(Json::as_array)
        .and_then(|a| a.iter().map(Json::as_i64).collect::<Option<Vec<_>>>())
        .ok_or_else(|| invalid(format!("{key} must be a list of integers")))
}

fn check_keys(args: &Json, allowed: &[&str]) -> Result<(), ExploreError> {
    let obj = args.as_object().ok_or_else(|| invalid("arguments must be an object"))?;
    match obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(invalid(format!("unexpected argument {k}"))),
        None => Ok(()),
    }
}

fn column_values(t: &Table, col: &str) -> Result<BTreeSet<String>, ExploreError> {
    let i = t.col(col).map_err(|e| invalid(e.to_string()))?;
    Ok(t.values(i).filter(|v| !v.is_null()).map(|v| v.key_string()).collect())
}

fn known(values: &BTreeSet<String>, given: Vec<String>, what: &str) -> Result<Vec<String>, ExploreError> {
    if let Some(x) = given.iter().find(|x| !values.contains(*x)) {
        return Err(invalid(format!("unknown {what} {x}")));
    }
    Ok(given.into_iter().collect::<BTreeSet<_>>().into_iter().collect())
}

fn state_set(state: &State, key: &str) -> BTreeSet<String> {
    state
        .get(key)
        .and_then(Json::as_array)
        .map(|a| a.iter().filter_map(|x| x.as_str().map(String::from)).collect())
        .unwrap_or_default()
}

fn union(state: &State, key: &str, add: Vec<String>) -> Json {
    let mut s = state_set(state, key);
    s.extend(add);
    json!(s)
}

/// Applies an interaction and returns the new state.
pub fn interact(
    v: VType,
    d: &Dataset,
    fields: &Fields,
    state: &State,
    action: &str,
    args: &Json,
) -> Result<State, ExploreError> {
    let key = v
        .interactions()
        .iter()
        .find(|(a, _)| *a == action)
        .map(|(_, k)| *k)
        .ok_or_else(|| ExploreError::UnknownAction { v_type: v.name().into(), action: action.into() })?;
    let mut next = state.clone();
    let value = match (v, action) {
        (VType::MultiTimePlot, "select_interval") => {
            check_keys(args, &["start", "end"])?;
            let (s, e) = (args.get("start").and_then(Json::as_i64), args.get("end").and_then(Json::as_i64));
            match (s, e) {
                (Some(s), Some(e)) if s < e => json!({"start": s, "end": e}),
                (Some(_), Some(_)) => return Err(invalid("interval start must precede end")),
                _ => return Err(invalid("select_interval needs integer start and end")),
            }
        }
        (VType::MultiTimePlot, "select_series") => {
            check_keys(args, &["names"])?;
            let Dataset::Timeseries(series) = d else { unreachable!("compatible model") };
            let names = series.iter().map(|s| s.name.clone()).collect();
            json!(known(&names, strings(args, "names")?, "series")?)
        }
        (VType::BarChart, "select_bars" | "suppress_bars") | (VType::PieChart, "select_slices") => {
            check_keys(args, &["categories"])?;
            let cats = column_values(table_of(v, d)?, &fields["category"])?;
            let given = known(&cats, strings(args, "categories")?, "category")?;
            if action == "suppress_bars" {
                union(state, key, given)
            } else {
                json!(given)
            }
        }
        (VType::BarChart, "set_top_k") => {
            check_keys(args, &["k"])?;
            match args.get("k").and_then(Json::as_i64) {
                Some(k) if k >= 1 => json!(k),
                _ => return Err(invalid("k must be a positive integer")),
            }
        }
        (VType::Heatmap, "select_cells") => {
            check_keys(args, &["cells"])?;
            let t = table_of(v, d)?;
            let (xi, yi) = (
                t.col(&fields["x"]).map_err(|e| invalid(e.to_string()))?,
                t.col(&fields["y"]).map_err(|e| invalid(e.to_string()))?,
            );
            let present: BTreeSet<(String, String)> =
                t.rows.iter().map(|r| (r[xi].key_string(), r[yi].key_string())).collect();
            let cells = args
                .get("cells")
                .and_then(Json::as_array)
                .and_then(|a| {
                    a.iter()
                        .map(|c| Some((c.get("x")?.as_str()?.to_string(), c.get("y")?.as_str()?.to_string())))
                        .collect::<Option<BTreeSet<_>>>()
                })
                .ok_or_else(|| invalid("cells must be a list of {x, y} objects"))?;
            if let Some((x, y)) = cells.iter().find(|c| !present.contains(*c)) {
                return Err(invalid(format!("no cell ({x}, {y})")));
            }
            json!(cells.into_iter().map(|(x, y)| json!({"x": x, "y": y})).collect::<Vec<_>>())
        }
        (VType::Heatmap, "select_rows" | "select_cols") => {
            let (arg, field) = if action == "select_rows" { ("rows", "x") } else { ("cols", "y") };
            check_keys(args, &[arg])?;
            let vals = column_values(table_of(v, d)?, &fields[field])?;
            json!(known(&vals, strings(args, arg)?, field)?)
        }
        (VType::LabeledGraph, "select_neighborhood") => {
            check_keys(args, &["node", "radius"])?;
            let g = graph_of(v, d)?;
            let node = args.get("node").and_then(Json::as_str).ok_or_else(|| invalid("node must be a string"))?;
            let radius = match args.get("radius") {
                None => 1,
                Some(r) => r.as_u64().ok_or_else(|| invalid("radius must be a non-negative integer"))? as usize,
            };
            let sub = graph_neighborhood(g, node, radius).map_err(|e| invalid(e.to_string()))?;
            let nodes: Vec<&str> = sub.nodes().iter().map(|n| n.id.as_str()).collect();
            json!({"node": node, "radius": radius, "nodes": nodes})
        }
        (VType::LabeledGraph, "hide_nodes" | "select_nodes") => {
            check_keys(args, &["nodes"])?;
            let g = graph_of(v, d)?;
            let ids = g.nodes().iter().map(|n| n.id.clone()).collect();
            let given = known(&ids, strings(args, "nodes")?, "node")?;
            if action == "hide_nodes" {
                union(state, key, given)
            } else {
                json!(given)
            }
        }
        (VType::TopicView, "select_topics") => {
            check_keys(args, &["topics"])?;
            let k = match d {
                Dataset::Topics(t) => t.k as i64,
                _ => 0,
            };
            let topics: BTreeSet<i64> = ints(args, "topics")?.into_iter().collect();
            if let Some(t) = topics.iter().find(|t| **t < 0 || **t >= k) {
                return Err(invalid(format!("no topic {t}")));
            }
            json!(topics)
        }
        (VType::Table, "select_rows") => {
            check_keys(args, &["rows"])?;
            let n = table_of(v, d)?.len() as i64;
            let rows: BTreeSet<i64> = ints(args, "rows")?.into_iter().collect();
            if let Some(r) = rows.iter().find(|r| **r < 0 || **r >= n) {
                return Err(invalid(format!("no row {r}")));
            }
            json!(rows)
        }
        _ => unreachable!("vocabulary and handlers agree"),
    };
    next.insert(key.to_string(), value);
    Ok(next)
}

/// Categories a bar chart shows: the first `top_k` rows whose category is
/// not suppressed, in dataset order.
pub fn visible_bars(t: &Table, fields: &Fields, state: &State) -> Vec<(String, f64)> {
    let (Ok(ci), Ok(vi)) = (t.col(&fields["category"]), t.col(&fields["value"])) else {
        return Vec::new();
    };
    let top_k = state.get("top_k").and_then(Json::as_u64).map_or(DEFAULT_TOP_K, |k| k as usize);
    let suppressed = state_set(state, "suppressed");
    t.rows
        .iter()
        .map(|r| (r[ci].key_string(), r[vi].as_f64().unwrap_or(0.0)))
        .filter(|(c, _)| !suppressed.contains(c))
        .take(top_k)
        .collect()
}

fn class_type(c: ColumnClass) -> &'static str {
    match c {
        ColumnClass::Identifier | ColumnClass::Categorical | ColumnClass::Text => "nominal",
        ColumnClass::Ordinal => "ordinal",
        ColumnClass::Continuous => "quantitative",
        ColumnClass::Temporal => "temporal",
    }
}

fn cell(v: &crate::store::Value) -> Json {
    serde_json::to_value(v).unwrap_or(Json::Null)
}

/// Builds the render specification for the current state.
pub fn render(v: VType, d: &Dataset, fields: &Fields, state: &State) -> Result<Json, ExploreError> {
    v.check_compatible(d.model())?;
    let mut spec = Map::new();
    spec.insert("version".into(), json!(SPEC_VERSION));
    spec.insert("vType".into(), json!(v.name()));
    let body = match v {
        VType::BarChart => {
            let t = table_of(v, d)?;
            let selected = state_set(state, "selected");
            let bars = visible_bars(t, fields, state);
            json!({
                "mark": "bar",
                "encoding": {
                    "x": {"field": fields["category"], "type": "nominal"},
                    "y": {"field": fields["value"], "type": "quantitative"},
                },
                "axes": [{"orient": "bottom", "title": fields["category"]}, {"orient": "left", "title": fields["value"]}],
                "top_k": state.get("top_k").cloned().unwrap_or(json!(DEFAULT_TOP_K)),
                "suppressed": state_set(state, "suppressed"),
                "data": {
                    "values": bars.iter().map(|(c, x)| json!({"category": c, "value": x, "selected": selected.contains(c)})).collect::<Vec<_>>(),
                    "total": t.len(),
                },
            })
        }
        VType::PieChart => {
            let t = table_of(v, d)?;
            let selected = state_set(state, "selected");
            let (ci, vi) = (
                t.col(&fields["category"]).map_err(|e| invalid(e.to_string()))?,
                t.col(&fields["value"]).map_err(|e| invalid(e.to_string()))?,
            );
            let total: f64 = t.rows.iter().filter_map(|r| r[vi].as_f64()).sum();
            let arcs: Vec<Json> = t
                .rows
                .iter()
                .map(|r| {
                    let x = r[vi].as_f64().unwrap_or(0.0);
                    let c = r[ci].key_string();
                    json!({"category": c, "value": x, "fraction": if total > 0.0 { x / total } else { 0.0 }, "selected": selected.contains(&c)})
                })
                .collect();
            json!({
                "mark": "arc",
                "encoding": {
                    "color": {"field": fields["category"], "type": "nominal"},
                    "theta": {"field": fields["value"], "type": "quantitative"},
                },
                "axes": [],
                "data": {"values": arcs, "total": t.len()},
            })
        }
        VType::Heatmap => {
            let t = table_of(v, d)?;
            let col = |f: &str| t.col(&fields[f]).map_err(|e| invalid(e.to_string()));
            let (xi, yi, vi) = (col("x")?, col("y")?, col("value")?);
            let rows = state_set(state, "rows");
            let cols = state_set(state, "cols");
            let cells: BTreeSet<(String, String)> = state
                .get("cells")
                .and_then(Json::as_array)
                .map(|a| {
                    a.iter()
                        .filter_map(|c| Some((c.get("x")?.as_str()?.to_string(), c.get("y")?.as_str()?.to_string())))
                        .collect()
                })
                .unwrap_or_default();
            let values: Vec<Json> = t
                .rows
                .iter()
                .map(|r| {
                    let (x, y) = (r[xi].key_string(), r[yi].key_string());
                    let sel = rows.contains(&x) || cols.contains(&y) || cells.contains(&(x.clone(), y.clone()));
                    json!({"x": x, "y": y, "value": r[vi].as_f64().unwrap_or(0.0), "selected": sel})
                })
                .collect();
            json!({
                "mark": "rect",
                "encoding": {
                    "x": {"field": fields["x"], "type": "nominal"},
                    "y": {"field": fields["y"], "type": "nominal"},
                    "color": {"field": fields["value"], "type": "quantitative"},
                },
                "axes": [{"orient": "bottom", "title": fields["x"]}, {"orient": "left", "title": fields["y"]}],
                "data": {"values": values, "total": t.len()},
            })
        }
        VType::MultiTimePlot => {
            let Dataset::Timeseries(series) = d else { unreachable!("compatible model") };
            let selected = state_set(state, "series");
            let values: Vec<Json> = series
                .iter()
                .map(|s| json!({"name": s.name, "granularity": s.granularity, "points": s.points, "selected": selected.contains(&s.name)}))
                .collect();
            json!({
                "mark": "line",
                "encoding": {
                    "x": {"field": "time", "type": "temporal"},
                    "y": {"field": "value", "type": "quantitative"},
                    "color": {"field": "series", "type": "nominal"},
                },
                "axes": [{"orient": "bottom", "title": "time"}, {"orient": "left", "title": "tweets"}],
                "brush": state.get("interval").cloned().unwrap_or(Json::Null),
                "data": {"values": values, "total": series.len()},
            })
        }
        VType::LabeledGraph => {
            let g = graph_of(v, d)?;
            let hidden = state_set(state, "hidden");
            let selected = state_set(state, "selected");
            let hood: BTreeSet<String> = state
                .get("neighborhood")
                .and_then(|n| n.get("nodes"))
                .and_then(Json::as_array)
                .map(|a| a.iter().filter_map(|x| x.as_str().map(String::from)).collect())
                .unwrap_or_default();
            let influencers: BTreeSet<&String> = match d {
                Dataset::Influence(r) => r.influencers.iter().collect(),
                _ => BTreeSet::new(),
            };
            let nodes: Vec<Json> = g
                .nodes()
                .iter()
                .filter(|n| !hidden.contains(&n.id))
                .map(|n| {
                    json!({
                        "id": n.id, "label": n.label,
                        "selected": selected.contains(&n.id),
                        "highlighted": hood.contains(&n.id),
                        "emphasis": influencers.contains(&n.id),
                    })
                })
                .collect();
            let edges: Vec<Json> = g
                .edges()
                .iter()
                .filter(|e| !hidden.contains(&e.source) && !hidden.contains(&e.target))
                .map(|e| json!({"id": e.id, "source": e.source, "target": e.target, "label": e.label}))
                .collect();
            json!({
                "mark": "node-link",
                "encoding": {"node": {"field": "id"}, "color": {"field": "label", "type": "nominal"}, "edge": {"field": "label"}},
                "axes": [],
                "directed": g.is_directed(),
                "hidden": hidden,
                "data": {"nodes": nodes, "edges": edges, "total": g.node_count()},
            })
        }
        VType::TopicView => {
            let selected: BTreeSet<i64> = state
                .get("topics")
                .and_then(Json::as_array)
                .map(|a| a.iter().filter_map(Json::as_i64).collect())
                .unwrap_or_default();
            let panels = match d {
                Dataset::Topics(t) => json!({
                    "terms": t.top_terms.iter().enumerate().map(|(i, terms)| json!({
                        "topic": i,
                        "selected": selected.contains(&(i as i64)),
                        "terms": terms.iter().map(|(w, p)| json!({"term": w, "weight": p})).collect::<Vec<_>>(),
                    })).collect::<Vec<_>>(),
                    "documents": t.top_docs.iter().enumerate().map(|(i, docs)| json!({
                        "topic": i,
                        "docs": docs.iter().map(|(id, p)| json!({"id": id, "weight": p})).collect::<Vec<_>>(),
                    })).collect::<Vec<_>>(),
                    "correlation": t.correlation,
                }),
                Dataset::Document(ds) => json!({
                    "terms": [],
                    "documents": [{"topic": null, "docs": ds.docs.iter().take(TABLE_PREVIEW_ROWS).map(|doc| json!({"id": doc.id, "text": doc.text})).collect::<Vec<_>>()}],
                    "correlation": [],
                }),
                Dataset::Matrix(m) => json!({
                    "terms": [], "documents": [],
                    "correlation": m.values,
                    "row_labels": m.row_labels,
                    "col_labels": m.col_labels,
                }),
                _ => unreachable!("compatible model"),
            };
            json!({"mark": "topic-panels", "encoding": {}, "axes": [], "data": panels})
        }
        VType::Table => {
            let t = table_of(v, d)?;
            let selected: BTreeSet<i64> = state
                .get("rows")
                .and_then(Json::as_array)
                .map(|a| a.iter().filter_map(Json::as_i64).collect())
                .unwrap_or_default();
            json!({
                "mark": "table",
                "encoding": {
                    "columns": t.columns.iter().map(|c| json!({"field": c.name, "type": class_type(c.class)})).collect::<Vec<_>>(),
                },
                "axes": [],
                "selected": selected,
                "data": {
                    "values": t.rows.iter().take(TABLE_PREVIEW_ROWS).map(|r| r.iter().map(cell).collect::<Vec<_>>()).collect::<Vec<_>>(),
                    "total": t.len(),
                },
            })
        }
    };
    if let Json::Object(m) = body {
        spec.extend(m);
    }
    Ok(Json::Object(spec))
}
