//! Tool contracts: the declarative description of a tool (what it does,
//! example queries, NL output template, handler binding, input and output
//! schemas), catalog loading, handler binding and output templating.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::data::EntityKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolCategory {
    QueryPlan,
    WhyNot,
    WhatIf,
    ComparePlan,
    DisplayPlan,
}

impl ToolCategory {
    pub const ALL: [ToolCategory; 5] = [
        ToolCategory::QueryPlan,
        ToolCategory::WhyNot,
        ToolCategory::WhatIf,
        ToolCategory::ComparePlan,
        ToolCategory::DisplayPlan,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ToolCategory::QueryPlan => "query_plan",
            ToolCategory::WhyNot => "why_not",
            ToolCategory::WhatIf => "what_if",
            ToolCategory::ComparePlan => "compare_plan",
            ToolCategory::DisplayPlan => "display_plan",
        }
    }
}

impl std::fmt::Display for ToolCategory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ParamType {
    String,
    Number,
    Date,
    Entity { kind: EntityKind },
    /// One or more entities of the same kind.
    EntityList { kind: EntityKind },
    Enum { values: Vec<String> },
    /// A plan saved in the session, by id or by its scenario name.
    Plan,
}

impl ParamType {
    pub fn describe(&self) -> String {
        match self {
            ParamType::String => "string".into(),
            ParamType::Number => "number".into(),
            ParamType::Date => "date (YYYY-MM-DD)".into(),
            ParamType::Entity { kind } => format!("{kind} name or id"),
            ParamType::EntityList { kind } => format!("list of {kind} names or ids"),
            ParamType::Enum { values } => format!("one of {}", values.join(", ")),
            ParamType::Plan => "plan id or scenario name".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    #[serde(flatten)]
    pub ty: ParamType,
    #[serde(default)]
    pub required: bool,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnType {
    String,
    Number,
    Date,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: ColumnType,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldType {
    String,
    Number,
    List,
    Table,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: FieldType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub columns: Option<Vec<ColumnSpec>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolContract {
    pub id: String,
    pub category: ToolCategory,
    pub description: String,
    pub examples: Vec<String>,
    #[serde(rename = "nl_output")]
    pub nl_output_template: String,
    pub function: String,
    #[serde(rename = "input")]
    pub input_schema: Vec<ParamSpec>,
    #[serde(rename = "output")]
    pub output_schema: Vec<FieldSpec>,
}

impl ToolContract {
    /// Text indexed for retrieval: description then every example.
    pub fn retrieval_text(&self) -> String {
        let mut text = self.description.clone();
        for e in &self.examples {
            text.push(' ');
            text.push_str(e);
        }
        text
    }

    pub fn param(&self, name: &str) -> Option<&ParamSpec> {
        self.input_schema.iter().find(|p| p.name == name)
    }

    pub fn required_params(&self) -> impl Iterator<Item = &ParamSpec> {
        self.input_schema.iter().filter(|p| p.required)
    }

    /// Checks `payload` against the output schema, fills the NL template and
    /// collects table fields as renderables.
    pub fn make_output(&self, payload: Map<String, Value>) -> Result<ToolOutput, OutputError> {
        let mut renderables = Vec::new();
        for field in &self.output_schema {
            let value = payload
                .get(&field.name)
                .ok_or_else(|| OutputError::MissingField(field.name.clone()))?;
            let bad = |detail: &str| OutputError::TypeMismatch {
                field: field.name.clone(),
                detail: detail.to_string(),
            };
            match field.ty {
                FieldType::String if !value.is_string() => return Err(bad("expected a string")),
                FieldType::Number if !value.as_f64().is_some_and(f64::is_finite) => {
                    return Err(bad("expected a finite number"))
                }
                FieldType::List if !value.is_array() => return Err(bad("expected a list")),
                FieldType::Table => {
                    let columns = field.columns.clone().unwrap_or_default();
                    let rows = value
                        .get("rows")
                        .and_then(Value::as_array)
                        .ok_or_else(|| bad("table needs a rows array"))?;
                    let mut out_rows = Vec::with_capacity(rows.len());
                    for row in rows {
                        let cells = row.as_array().ok_or_else(|| bad("table row is not an array"))?;
                        if cells.len() != columns.len() {
                            return Err(bad("table row width differs from declared columns"));
                        }
                        for (cell, col) in cells.iter().zip(&columns) {
                            let ok = match col.ty {
                                ColumnType::Number => cell.is_number(),
                                ColumnType::String | ColumnType::Date => cell.is_string(),
                            };
                            if !ok {
                                return Err(bad(&format!("column {} has a value of the wrong type", col.name)));
                            }
                        }
                        out_rows.push(cells.clone());
                    }
                    renderables.push(Table {
                        name: field.name.clone(),
                        columns,
                        rows: out_rows,
                    });
                }
                _ => {}
            }
        }
        let nl_text = render_nl_output(&self.nl_output_template, &payload)?;
        Ok(ToolOutput {
            nl_text,
            renderables,
            payload,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<ColumnSpec>,
    pub rows: Vec<Vec<Value>>,
}

/// Builds the `{ "rows": [...] }` payload value of a table field.
pub fn table_value(rows: Vec<Vec<Value>>) -> Value {
    serde_json::json!({ "rows": rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolOutput {
    pub nl_text: String,
    pub renderables: Vec<Table>,
    pub payload: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OutputError {
    #[error("payload is missing field {0:?}")]
    MissingField(String),
    #[error("field {field:?}: {detail}")]
    TypeMismatch { field: String, detail: String },
}

#[derive(Debug, Error)]
pub enum ContractError {
    #[error("{file}: invalid field {field:?}: {detail}")]
    SchemaViolation {
        file: String,
        field: String,
        detail: String,
    },
    #[error("duplicate tool id {0:?}")]
    DuplicateId(String),
    #[error("no handler registered for function {0:?}")]
    UnboundFunction(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

static PLACEHOLDER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\{([A-Za-z_][A-Za-z0-9_]*)\}").unwrap());

pub fn placeholders(template: &str) -> Vec<String> {
    PLACEHOLDER
        .captures_iter(template)
        .map(|c| c[1].to_string())
        .collect()
}

/// Formats a number with at most two decimals, trailing zeros trimmed.
pub fn format_number(v: f64) -> String {
    let s = format!("{v:.2}");
    let s = if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    };
    if s == "-0" {
        "0".to_string()
    } else {
        s
    }
}

fn render_value(v: &Value) -> String {
    match v {
        Value::Number(n) => n.as_f64().map(format_number).unwrap_or_else(|| n.to_string()),
        Value::String(s) => s.clone(),
        Value::Bool(b) => b.to_string(),
        Value::Null => String::new(),
        Value::Array(items) => items.iter().map(render_value).collect::<Vec<_>>().join(", "),
        Value::Object(_) => v.to_string(),
    }
}

/// Substitutes `{field}` placeholders from `payload`.
pub fn render_nl_output(template: &str, payload: &Map<String, Value>) -> Result<String, OutputError> {
    let mut missing = None;
    let out = PLACEHOLDER.replace_all(template, |caps: &regex::Captures<'_>| match payload.get(&caps[1]) {
        Some(v) => render_value(v),
        None => {
            missing.get_or_insert_with(|| caps[1].to_string());
            String::new()
        }
    });
    match missing {
        Some(name) => Err(OutputError::MissingField(name)),
        None => Ok(out.into_owned()),
    }
}

const TOP_LEVEL_KEYS: [&str; 8] = [
    "id",
    "category",
    "description",
    "examples",
    "nl_output",
    "function",
    "input",
    "output",
];

/// Parses and validates one contract document. `file` is used in errors.
pub fn parse_contract(file: &str, text: &str) -> Result<ToolContract, ContractError> {
    let violation = |field: &str, detail: String| ContractError::SchemaViolation {
        file: file.to_string(),
        field: field.to_string(),
        detail,
    };
    let doc: Value = serde_json::from_str(text).map_err(|e| violation("<document>", e.to_string()))?;
    let obj = doc
        .as_object()
        .ok_or_else(|| violation("<document>", "top level must be an object".into()))?;
    for key in TOP_LEVEL_KEYS {
        if !obj.contains_key(key) {
            return Err(violation(key, "missing".into()));
        }
    }
    if let Some(extra) = obj.keys().find(|k| !TOP_LEVEL_KEYS.contains(&k.as_str())) {
        return Err(violation(extra, "unexpected key".into()));
    }
    const PARAM_KEYS: [&str; 6] = ["name", "type", "required", "description", "kind", "values"];
    if let Some(params) = obj["input"].as_array() {
        for param in params.iter().filter_map(Value::as_object) {
            if let Some(extra) = param.keys().find(|k| !PARAM_KEYS.contains(&k.as_str())) {
                return Err(violation("input", format!("unexpected parameter key {extra:?}")));
            }
        }
    }
    fn field<T: serde::de::DeserializeOwned>(
        obj: &Map<String, Value>,
        key: &str,
        violation: &dyn Fn(&str, String) -> ContractError,
    ) -> Result<T, ContractError> {
        serde_json::from_value(obj[key].clone()).map_err(|e| violation(key, e.to_string()))
    }
    let contract = ToolContract {
        id: field(obj, "id", &violation)?,
        category: field(obj, "category", &violation)?,
        description: field(obj, "description", &violation)?,
        examples: field(obj, "examples", &violation)?,
        nl_output_template: field(obj, "nl_output", &violation)?,
        function: field(obj, "function", &violation)?,
        input_schema: field(obj, "input", &violation)?,
        output_schema: field(obj, "output", &violation)?,
    };
    validate_contract(file, &contract)?;
    Ok(contract)
}

fn validate_contract(file: &str, c: &ToolContract) -> Result<(), ContractError> {
    let violation = |field: &str, detail: &str| ContractError::SchemaViolation {
        file: file.to_string(),
        field: field.to_string(),
        detail: detail.to_string(),
    };
    if c.id.trim().is_empty() {
        return Err(violation("id", "must not be empty"));
    }
    if c.description.trim().is_empty() {
        return Err(violation("description", "must not be empty"));
    }
    if c.examples.len() < 2 || c.examples.iter().any(|e| e.trim().is_empty()) {
        return Err(violation("examples", "at least two non-empty examples are required"));
    }
    if c.function.trim().is_empty() {
        return Err(violation("function", "must not be empty"));
    }
    let mut names = BTreeSet::new();
    for p in &c.input_schema {
        if !names.insert(p.name.as_str()) {
            return Err(violation("input", &format!("duplicate parameter {}", p.name)));
        }
        if p.required && p.description.trim().is_empty() {
            return Err(violation("input", &format!("required parameter {} needs a description", p.name)));
        }
        if let ParamType::Enum { values } = &p.ty {
            if values.is_empty() {
                return Err(violation("input", &format!("enum parameter {} has no values", p.name)));
            }
        }
    }
    let mut fields = BTreeMap::new();
    for f in &c.output_schema {
        if fields.insert(f.name.as_str(), f).is_some() {
            return Err(violation("output", &format!("duplicate field {}", f.name)));
        }
        if f.ty == FieldType::Table && f.columns.as_ref().is_none_or(|c| c.is_empty()) {
            return Err(violation("output", &format!("table field {} must declare columns", f.name)));
        }
    }
    for name in placeholders(&c.nl_output_template) {
        match fields.get(name.as_str()) {
            None => {
                return Err(violation(
                    "nl_output",
                    &format!("placeholder {{{name}}} is not an output field"),
                ))
            }
            Some(f) if f.ty == FieldType::Table => {
                return Err(violation("nl_output", &format!("placeholder {{{name}}} refers to a table")))
            }
            _ => {}
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Catalog {
    pub contracts: Vec<ToolContract>,
}

impl Catalog {
    pub fn from_contracts(contracts: Vec<ToolContract>) -> Result<Self, ContractError> {
        let mut seen = BTreeSet::new();
        for c in &contracts {
            if !seen.insert(c.id.clone()) {
                return Err(ContractError::DuplicateId(c.id.clone()));
            }
        }
        Ok(Catalog { contracts })
    }

    pub fn get(&self, id: &str) -> Option<&ToolContract> {
        self.contracts.iter().find(|c| c.id == id)
    }

    pub fn len(&self) -> usize {
        self.contracts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contracts.is_empty()
    }
}

/// Loads every `*.json` contract in `dir`, ordered by file name.
pub fn load_catalog(dir: &Path) -> Result<Catalog, ContractError> {
    let io = |source| ContractError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    let mut contracts = Vec::with_capacity(files.len());
    for path in files {
        let text = fs::read_to_string(&path).map_err(|source| ContractError::Io {
            path: path.clone(),
            source,
        })?;
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        contracts.push(parse_contract(&name, &text)?);
    }
    Catalog::from_contracts(contracts)
}

macro_rules! bundled {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../catalog/", $name)))),*]
    };
}

const BUNDLED: &[(&str, &str)] = bundled!(
    "add_receipt.json",
    "change_capacity.json",
    "change_due_date.json",
    "compare_plans.json",
    "hard_deadline.json",
    "material_inventory.json",
    "max_production.json",
    "order_status.json",
    "prioritize_order.json",
    "production_on_date.json",
    "restrict_to_plants.json",
    "show_order_table.json",
    "show_plan_table.json",
);

/// The catalog shipped with this crate (same content as [`bundled_catalog_dir`]).
pub fn bundled_catalog() -> Catalog {
    let contracts = BUNDLED
        .iter()
        .map(|(name, text)| parse_contract(name, text).expect("bundled contract is valid"))
        .collect();
    Catalog::from_contracts(contracts).expect("bundled ids are unique")
}

pub fn bundled_catalog_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("catalog")
}

#[derive(Debug, Clone)]
pub struct BoundTool<H> {
    pub contract: ToolContract,
    pub handler: H,
}

#[derive(Debug, Clone)]
pub struct BoundCatalog<H> {
    pub tools: Vec<BoundTool<H>>,
}

impl<H> BoundCatalog<H> {
    pub fn get(&self, id: &str) -> Option<&BoundTool<H>> {
        self.tools.iter().find(|t| t.contract.id == id)
    }

    pub fn contracts(&self) -> impl Iterator<Item = &ToolContract> {
        self.tools.iter().map(|t| &t.contract)
    }

    pub fn len(&self) -> usize {
        self.tools.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tools.is_empty()
    }
}

/// Binds every contract's `function` to a handler; fails on the first
/// function name the registry does not know.
pub fn bind_handlers<H: Clone>(
    catalog: &Catalog,
    registry: &BTreeMap<String, H>,
) -> Result<BoundCatalog<H>, ContractError> {
    let tools = catalog
        .contracts
        .iter()
        .map(|c| {
            registry
                .get(&c.function)
                .map(|h| BoundTool {
                    contract: c.clone(),
                    handler: h.clone(),
                })
                .ok_or_else(|| ContractError::UnboundFunction(c.function.clone()))
        })
        .collect::<Result<_, _>>()?;
    Ok(BoundCatalog { tools })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn payload(v: Value) -> Map<String, Value> {
        v.as_object().unwrap().clone()
    }

    #[test]
    fn renders_delay_template() {
        let out = render_nl_output("{delay} hours extra delay", &payload(json!({"delay": 5}))).unwrap();
        assert_eq!(out, "5 hours extra delay");
        let out = render_nl_output("{delay} hours extra delay", &payload(json!({"delay": 5.50}))).unwrap();
        assert_eq!(out, "5.5 hours extra delay");
    }

    #[test]
    fn template_without_placeholders_is_verbatim() {
        let t = "Plan ready: see table.";
        assert_eq!(render_nl_output(t, &Map::new()).unwrap(), t);
    }

    #[test]
    fn missing_field() {
        assert_eq!(
            render_nl_output("{a} and {b}", &payload(json!({"a": 1}))),
            Err(OutputError::MissingField("b".into()))
        );
    }

    #[test]
    fn number_formatting() {
        assert_eq!(format_number(2.0), "2");
        assert_eq!(format_number(2.456), "2.46");
        assert_eq!(format_number(-0.001), "0");
        assert_eq!(format_number(1234.5), "1234.5");
        assert_eq!(format_number(-3.10), "-3.1");
    }

    fn doc(template: &str) -> String {
        json!({
            "id": "get_delay",
            "category": "query_plan",
            "description": "Reports the extra delay of an order.",
            "examples": ["what is the delay", "how late is it"],
            "nl_output": template,
            "function": "get_delay",
            "input": [{"name": "order", "type": "entity", "kind": "order", "required": true, "description": "order id"}],
            "output": [{"name": "hours", "type": "number"}]
        })
        .to_string()
    }

    #[test]
    fn unknown_placeholder_is_schema_violation() {
        match parse_contract("x.json", &doc("{delay} hours")) {
            Err(ContractError::SchemaViolation { field, .. }) => assert_eq!(field, "nl_output"),
            other => panic!("{other:?}"),
        }
        assert!(parse_contract("x.json", &doc("{hours} hours")).is_ok());
    }

    #[test]
    fn top_level_keys_are_exact() {
        let mut v: Value = serde_json::from_str(&doc("{hours}")).unwrap();
        v.as_object_mut().unwrap().insert("version".into(), json!(2));
        assert!(matches!(
            parse_contract("x.json", &v.to_string()),
            Err(ContractError::SchemaViolation { field, .. }) if field == "version"
        ));
        v.as_object_mut().unwrap().remove("version");
        v.as_object_mut().unwrap().remove("examples");
        assert!(matches!(
            parse_contract("x.json", &v.to_string()),
            Err(ContractError::SchemaViolation { field, .. }) if field == "examples"
        ));
    }

    #[test]
    fn bad_param_and_field_specs() {
        let mut v: Value = serde_json::from_str(&doc("{hours}")).unwrap();
        v["input"] = json!([{"name": "mode", "type": "enum", "values": [], "required": false}]);
        assert!(matches!(parse_contract("x.json", &v.to_string()), Err(ContractError::SchemaViolation { field, .. }) if field == "input"));
        v["input"] = json!([{"name": "order", "type": "entity", "kind": "order", "required": true}]);
        assert!(matches!(parse_contract("x.json", &v.to_string()), Err(ContractError::SchemaViolation { field, .. }) if field == "input"));
        v["input"] = json!([]);
        v["output"] = json!([{"name": "hours", "type": "number"}, {"name": "t", "type": "table"}]);
        assert!(matches!(parse_contract("x.json", &v.to_string()), Err(ContractError::SchemaViolation { field, .. }) if field == "output"));
    }

    #[test]
    fn duplicate_ids_across_files() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.json"), doc("{hours}")).unwrap();
        fs::write(dir.path().join("b.json"), doc("{hours}")).unwrap();
        assert!(matches!(load_catalog(dir.path()), Err(ContractError::DuplicateId(id)) if id == "get_delay"));
    }

    #[test]
    fn bundled_catalog_covers_all_categories() {
        let cat = load_catalog(&bundled_catalog_dir()).unwrap();
        assert!(cat.len() >= 10);
        for category in ToolCategory::ALL {
            assert!(cat.contracts.iter().any(|c| c.category == category), "{category}");
        }
        assert_eq!(cat, bundled_catalog());
        for c in &cat.contracts {
            assert!(c.examples.len() >= 2, "{}", c.id);
            assert!(c.description.split_whitespace().count() >= 10, "{}", c.id);
        }
        // deterministic, order-stable
        assert_eq!(cat, load_catalog(&bundled_catalog_dir()).unwrap());
    }

    #[test]
    fn binding() {
        let cat = bundled_catalog();
        let full: BTreeMap<String, u8> = cat.contracts.iter().map(|c| (c.function.clone(), 0)).collect();
        assert_eq!(bind_handlers(&cat, &full).unwrap().len(), cat.len());
        let mut partial = full.clone();
        partial.remove("add_receipt");
        assert!(matches!(bind_handlers(&cat, &partial), Err(ContractError::UnboundFunction(f)) if f == "add_receipt"));
        let empty = bind_handlers(&Catalog::default(), &partial).unwrap();
        assert!(empty.is_empty());
    }

    #[test]
    fn output_validation_and_renderables() {
        let c = ToolContract {
            id: "t".into(),
            category: ToolCategory::DisplayPlan,
            description: "d".into(),
            examples: vec!["a".into(), "b".into()],
            nl_output_template: "{n} rows".into(),
            function: "t".into(),
            input_schema: vec![],
            output_schema: vec![
                FieldSpec {
                    name: "n".into(),
                    ty: FieldType::Number,
                    columns: None,
                },
                FieldSpec {
                    name: "rows".into(),
                    ty: FieldType::Table,
                    columns: Some(vec![ColumnSpec {
                        name: "units".into(),
                        ty: ColumnType::Number,
                    }]),
                },
            ],
        };
        let out = c
            .make_output(payload(json!({"n": 1, "rows": table_value(vec![vec![json!(3.0)]])})))
            .unwrap();
        assert_eq!(out.nl_text, "1 rows");
        assert_eq!(out.renderables.len(), 1);
        assert!(c
            .make_output(payload(json!({"n": 1, "rows": table_value(vec![vec![json!("x")]])})))
            .is_err());
        assert_eq!(
            c.make_output(payload(json!({"n": 1}))),
            Err(OutputError::MissingField("rows".into()))
        );
    }
}
