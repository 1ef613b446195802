//! Tool manager: selects the model a query refers to, grounds the tool's
//! parameters, executes the bound handler and keeps the session's models and
//! plans. Also holds the built-in handlers behind the bundled catalog.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::contracts::{
    bind_handlers, format_number, table_value, BoundCatalog, Catalog, ContractError, ToolCategory, ToolContract,
    ToolOutput,
};
use crate::data::{parse_date, PlanningInstance};
use crate::llm::{ExtractionContext, LlmError, LlmGateway, Message, ModelCandidate, ModelChoice, PlanRef};
use crate::lp::LpStatus;
use crate::planning::{
    apply_scenarios, diff_plans, explain_delay, extract_plan, relax_infeasible, solve_instance, DataChange, Plan,
    PlanningError, Provenance, Restriction, ScenarioSpec, QUANTITY_TOL,
};

pub const BASELINE_MODEL_ID: &str = "baseline";
pub const MODEL_PARAM: &str = "model";

/// A planning model: an ingested instance plus the scenario changes layered
/// on top of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub id: String,
    pub name: String,
    pub instance_id: String,
    pub specs: Vec<ScenarioSpec>,
    pub parent: Option<String>,
    /// The plan solved for this model.
    pub plan_id: String,
}

/// Operational state of a session: instances, models and plans.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Workspace {
    pub instances: BTreeMap<String, PlanningInstance>,
    /// In creation order.
    pub models: Vec<ModelEntry>,
    pub plans: BTreeMap<String, Plan>,
    pub plan_seq: u64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ToolError {
    #[error("unknown tool {0:?}")]
    UnknownTool(String),
    #[error("no planning data has been loaded")]
    NoInstanceLoaded,
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("{stage} failed: {detail}")]
    Handler { stage: String, detail: String },
}

fn fail(stage: &str, detail: impl ToString) -> ToolError {
    ToolError::Handler {
        stage: stage.to_string(),
        detail: detail.to_string(),
    }
}

impl From<PlanningError> for ToolError {
    fn from(e: PlanningError) -> Self {
        fail("planning", e)
    }
}

impl Workspace {
    pub fn model(&self, id: &str) -> Option<&ModelEntry> {
        self.models.iter().find(|m| m.id == id)
    }

    pub fn plan(&self, id: &str) -> Option<&Plan> {
        self.plans.get(id)
    }

    fn next_plan_id(&mut self) -> String {
        self.plan_seq += 1;
        format!("plan-{}", self.plan_seq)
    }

    pub fn latest_plan_id(&self) -> Option<&str> {
        self.plans
            .keys()
            .max_by_key(|id| plan_number(id))
            .map(String::as_str)
    }

    pub fn model_of_plan(&self, plan_id: &str) -> Option<&ModelEntry> {
        self.models.iter().find(|m| m.plan_id == plan_id)
    }

    /// Plan of the model `plan_id`'s model was derived from.
    pub fn parent_plan(&self, plan_id: &str) -> Option<&str> {
        let model = self.model_of_plan(plan_id)?;
        let parent = self.model(model.parent.as_deref()?)?;
        Some(parent.plan_id.as_str())
    }

    pub fn candidates(&self) -> Vec<ModelCandidate> {
        self.models
            .iter()
            .map(|m| ModelCandidate {
                id: m.id.clone(),
                name: m.name.clone(),
            })
            .collect()
    }

    pub fn plan_refs(&self) -> Vec<PlanRef> {
        let mut refs: Vec<PlanRef> = self
            .plans
            .keys()
            .map(|id| PlanRef {
                plan_id: id.clone(),
                aliases: self
                    .model_of_plan(id)
                    .map(|m| vec![m.id.clone(), m.name.clone()])
                    .unwrap_or_default(),
            })
            .collect();
        refs.sort_by_key(|r| plan_number(&r.plan_id));
        refs
    }

    /// The instance of a model with its what-if changes applied.
    pub fn effective_instance(&self, model: &ModelEntry) -> Result<PlanningInstance, ToolError> {
        let base = self
            .instances
            .get(&model.instance_id)
            .ok_or_else(|| fail("model", format!("instance {} is missing", model.instance_id)))?;
        Ok(apply_scenarios(base, &model.specs)?.0)
    }

    fn unique_model_id(&self, base: &str, name: &str) -> (String, String) {
        if self.model(base).is_none() {
            return (base.to_string(), name.to_string());
        }
        let n = (2..).find(|n| self.model(&format!("{base}_{n}")).is_none()).unwrap();
        (format!("{base}_{n}"), format!("{name} ({n})"))
    }

    /// Adds an instance, solves its baseline and registers the baseline
    /// model. Returns `(instance id, model id, plan id)`.
    pub fn ingest(&mut self, mut instance: PlanningInstance) -> Result<(String, String, String), ToolError> {
        if self.instances.contains_key(&instance.id) {
            let n = (2..)
                .find(|n| !self.instances.contains_key(&format!("{}_{n}", instance.id)))
                .unwrap();
            instance.id = format!("{}_{n}", instance.id);
        }
        let (model, solution) = solve_instance(&instance, &[])?;
        if solution.status != LpStatus::Optimal {
            return Err(fail("solve", format!("baseline is {:?}", solution.status)));
        }
        let plan_id = self.next_plan_id();
        let plan = extract_plan(&model, &solution, Provenance::Baseline, &plan_id)?;
        let (base_id, base_name) = if self.models.is_empty() {
            (BASELINE_MODEL_ID.to_string(), "Baseline".to_string())
        } else {
            (format!("{}_baseline", slug(&instance.id)), format!("{} baseline", instance.id))
        };
        let (model_id, name) = self.unique_model_id(&base_id, &base_name);
        self.models.push(ModelEntry {
            id: model_id.clone(),
            name,
            instance_id: instance.id.clone(),
            specs: Vec::new(),
            parent: None,
            plan_id: plan_id.clone(),
        });
        self.plans.insert(plan_id.clone(), plan);
        let instance_id = instance.id.clone();
        self.instances.insert(instance_id.clone(), instance);
        Ok((instance_id, model_id, plan_id))
    }
}

fn plan_number(id: &str) -> u64 {
    id.strip_prefix("plan-").and_then(|n| n.parse().ok()).unwrap_or(0)
}

fn slug(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect()
}

/// A fully grounded tool call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Invocation {
    pub tool_id: String,
    pub model_id: Option<String>,
    pub instance_id: Option<String>,
    pub params: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Preparation {
    Ready(Invocation),
    /// Required parameters that could not be grounded, in schema order
    /// (`model` first when the model is unclear), plus what was grounded.
    MissingParams {
        missing: Vec<String>,
        collected: BTreeMap<String, Value>,
    },
}

/// Tool body: reads and extends the workspace, returns the output payload.
pub type Handler = fn(&mut Workspace, &Invocation) -> Result<Map<String, Value>, ToolError>;

pub fn builtin_registry() -> BTreeMap<String, Handler> {
    let entries: [(&str, Handler); 13] = [
        ("production_on_date", production_on_date),
        ("order_status", order_status),
        ("material_inventory", material_inventory),
        ("restrict_to_plants", restrict_to_plants),
        ("hard_deadline", hard_deadline),
        ("max_production", max_production),
        ("add_receipt", add_receipt),
        ("change_capacity", change_capacity),
        ("change_due_date", change_due_date),
        ("prioritize_order", prioritize_order),
        ("compare_plans", compare_plans),
        ("show_plan_table", show_plan_table),
        ("show_order_table", show_order_table),
    ];
    entries.into_iter().map(|(k, h)| (k.to_string(), h)).collect()
}

#[derive(Debug, Clone)]
pub struct ToolManager {
    pub catalog: BoundCatalog<Handler>,
}

fn needs_model(contract: &ToolContract) -> bool {
    contract.category != ToolCategory::ComparePlan
}

impl ToolManager {
    pub fn new(catalog: &Catalog) -> Result<Self, ContractError> {
        Ok(ToolManager {
            catalog: bind_handlers(catalog, &builtin_registry())?,
        })
    }

    pub fn contract(&self, tool_id: &str) -> Option<&ToolContract> {
        self.catalog.get(tool_id).map(|t| &t.contract)
    }

    /// Selects the model, extracts parameters from `query` (merged over
    /// `prior`, newer values winning) and fills defaults the session implies.
    pub fn prepare_invocation(
        &self,
        tool_id: &str,
        ws: &Workspace,
        conversation: &[Message],
        query: &str,
        prior: &BTreeMap<String, Value>,
        gateway: &LlmGateway,
    ) -> Result<Preparation, ToolError> {
        let contract = self
            .contract(tool_id)
            .ok_or_else(|| ToolError::UnknownTool(tool_id.to_string()))?;
        let mut missing = Vec::new();
        let (model_id, instance) = if needs_model(contract) {
            if ws.models.is_empty() {
                return Err(ToolError::NoInstanceLoaded);
            }
            match gateway.select_model(conversation, &ws.candidates()) {
                ModelChoice::Selected(id) => {
                    let model = ws.model(&id).ok_or_else(|| fail("model selection", format!("unknown model {id}")))?;
                    (Some(id), Some(ws.effective_instance(model)?))
                }
                ModelChoice::Undetermined => {
                    missing.push(MODEL_PARAM.to_string());
                    (None, None)
                }
            }
        } else {
            // Comparisons span models; entities are grounded on the newest one.
            let newest = ws.models.last().map(|m| ws.effective_instance(m)).transpose()?;
            (None, newest)
        };

        let plan_refs = ws.plan_refs();
        let ctx = ExtractionContext {
            instance: instance.as_ref(),
            plans: &plan_refs,
            today: instance.as_ref().and_then(|i| i.horizon.first().copied()),
        };
        let extraction = gateway.extract_parameters(&contract.input_schema, conversation, query, &ctx)?;
        let mut params = prior.clone();
        params.extend(extraction.params);
        if contract.id == "compare_plans" {
            default_compared_plans(ws, &mut params);
        }

        for spec in contract.required_params() {
            if !params.contains_key(&spec.name) {
                missing.push(spec.name.clone());
            }
        }
        if missing.is_empty() {
            Ok(Preparation::Ready(Invocation {
                tool_id: tool_id.to_string(),
                instance_id: model_id.as_ref().and(instance.map(|i| i.id)),
                model_id,
                params,
            }))
        } else {
            Ok(Preparation::MissingParams {
                missing,
                collected: params,
            })
        }
    }

    pub fn execute(&self, ws: &mut Workspace, invocation: &Invocation) -> Result<ToolOutput, ToolError> {
        let tool = self
            .catalog
            .get(&invocation.tool_id)
            .ok_or_else(|| ToolError::UnknownTool(invocation.tool_id.clone()))?;
        let payload = (tool.handler)(ws, invocation)?;
        tool.contract.make_output(payload).map_err(|e| fail("output", e))
    }
}

/// Unnamed plans in a comparison default to the newest plan and the plan it
/// was derived from.
fn default_compared_plans(ws: &Workspace, params: &mut BTreeMap<String, Value>) {
    let get = |p: &BTreeMap<String, Value>, k: &str| p.get(k).and_then(Value::as_str).map(str::to_string);
    match (get(params, "plan_a"), get(params, "plan_b")) {
        (None, None) => {
            if let Some(latest) = ws.latest_plan_id() {
                match ws.parent_plan(latest) {
                    Some(parent) => {
                        params.insert("plan_a".into(), json!(parent));
                        params.insert("plan_b".into(), json!(latest));
                    }
                    None => {
                        params.insert("plan_a".into(), json!(latest));
                    }
                }
            }
        }
        (Some(a), None) => {
            if let Some(latest) = ws.latest_plan_id().filter(|l| *l != a) {
                params.insert("plan_b".into(), json!(latest));
            }
        }
        (None, Some(b)) => {
            let fallback = ws.parent_plan(&b).map(str::to_string).or_else(|| {
                ws.plans
                    .keys()
                    .min_by_key(|id| plan_number(id))
                    .filter(|first| **first != b)
                    .cloned()
            });
            if let Some(a) = fallback {
                params.insert("plan_a".into(), json!(a));
            }
        }
        (Some(_), Some(_)) => {}
    }
}

// ------------------------------------------------------------- param access

fn param_str<'a>(inv: &'a Invocation, name: &str) -> Result<&'a str, ToolError> {
    inv.params
        .get(name)
        .and_then(Value::as_str)
        .ok_or_else(|| fail("parameters", format!("{name} is missing")))
}

fn opt_str<'a>(inv: &'a Invocation, name: &str) -> Option<&'a str> {
    inv.params.get(name).and_then(Value::as_str)
}

fn param_num(inv: &Invocation, name: &str) -> Result<f64, ToolError> {
    inv.params
        .get(name)
        .and_then(Value::as_f64)
        .ok_or_else(|| fail("parameters", format!("{name} is missing")))
}

fn param_date(inv: &Invocation, name: &str) -> Result<NaiveDate, ToolError> {
    parse_date(param_str(inv, name)?).ok_or_else(|| fail("parameters", format!("{name} is not a date")))
}

fn selected_model<'a>(ws: &'a Workspace, inv: &Invocation) -> Result<&'a ModelEntry, ToolError> {
    let id = inv
        .model_id
        .as_deref()
        .ok_or_else(|| fail("model selection", "no model selected"))?;
    ws.model(id)
        .ok_or_else(|| fail("model selection", format!("unknown model {id}")))
}

/// The plan named by `plan` if given, otherwise the selected model's plan,
/// with the instance it was solved on.
fn target_plan(ws: &Workspace, inv: &Invocation) -> Result<(Plan, PlanningInstance), ToolError> {
    let model = match opt_str(inv, "plan") {
        Some(pid) => ws
            .model_of_plan(pid)
            .ok_or_else(|| fail("plan lookup", format!("unknown plan {pid}")))?,
        None => selected_model(ws, inv)?,
    };
    let plan = ws
        .plan(&model.plan_id)
        .ok_or_else(|| fail("plan lookup", format!("unknown plan {}", model.plan_id)))?;
    Ok((plan.clone(), ws.effective_instance(model)?))
}

fn round6(v: f64) -> f64 {
    let r = (v * 1e6).round() / 1e6;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn signed(v: f64) -> String {
    let s = format_number(v);
    if s.starts_with('-') || s == "0" {
        s
    } else {
        format!("+{s}")
    }
}

fn payload(pairs: Vec<(&str, Value)>) -> Map<String, Value> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn in_horizon(inst: &PlanningInstance, date: NaiveDate) -> Result<(), ToolError> {
    if inst.contains_date(date) {
        Ok(())
    } else {
        Err(fail("parameters", format!("{date} is outside the planning horizon")))
    }
}

// ------------------------------------------------------------ query tools

fn production_on_date(ws: &mut Workspace, inv: &Invocation) -> Result<Map<String, Value>, ToolError> {
    let (plan, inst) = target_plan(ws, inv)?;
    let date = param_date(inv, "date")?;
    in_horizon(&inst, date)?;
    let product = opt_str(inv, "product");
    let plant = opt_str(inv, "plant");
    let mut rows = Vec::new();
    let mut total = 0.0;
    for cell in plan.production_on(date) {
        if product.is_some_and(|p| p != cell.product) || plant.is_some_and(|p| p != cell.plant) {
            continue;
        }
        total += cell.units;
        rows.push(vec![json!(cell.plant), json!(cell.product), json!(round6(cell.units))]);
    }
    let product_name = match product {
        Some(p) => inst.product(p).map_or(p.to_string(), |p| p.name.clone()),
        None => "all products".to_string(),
    };
    Ok(payload(vec![
        ("date", json!(date.to_string())),
        ("product_name", json!(product_name)),
        ("total", json!(round6(total))),
        ("rows", table_value(rows)),
    ]))
}

fn order_status(ws: &mut Workspace, inv: &Invocation) -> Result<Map<String, Value>, ToolError> {
    let (plan, inst) = target_plan(ws, inv)?;
    let order_id = param_str(inv, "order")?;
    let order = inst
        .order(order_id)
        .ok_or_else(|| fail("parameters", format!("unknown order {order_id}")))?;
    let explanation = explain_delay(&inst, &plan, order_id)?;
    let (mut on_time, mut late) = (0.0, 0.0);
    let mut deliveries = Vec::new();
    for a in plan.allocations_for(order_id).filter(|a| a.units > QUANTITY_TOL) {
        if a.date <= order.due_date {
            on_time += a.units;
        } else {
            late += a.units;
        }
        deliveries.push(vec![json!(a.date.to_string()), json!(round6(a.units))]);
    }
    let product_name = inst
        .product(&order.product_id)
        .map_or(order.product_id.clone(), |p| p.name.clone());
    Ok(payload(vec![
        ("order", json!(order.id)),
        ("product_name", json!(product_name)),
        ("quantity", json!(order.quantity)),
        ("due_date", json!(order.due_date.to_string())),
        ("on_time_units", json!(round6(on_time))),
        ("late_units", json!(round6(late))),
        ("shortage_units", json!(round6(plan.shortage.get(order_id).copied().unwrap_or(0.0)))),
        ("tardiness", json!(round6(plan.tardiness.get(order_id).copied().unwrap_or(0.0)))),
        ("reason", json!(explanation.reason.describe(&inst))),
        ("deliveries", table_value(deliveries)),
    ]))
}

fn material_inventory(ws: &mut Workspace, inv: &Invocation) -> Result<Map<String, Value>, ToolError> {
    let (plan, inst) = target_plan(ws, inv)?;
    let material_id = param_str(inv, "material")?;
    let material = inst
        .material(material_id)
        .ok_or_else(|| fail("parameters", format!("unknown material {material_id}")))?;
    let date = match opt_str(inv, "date") {
        Some(_) => param_date(inv, "date")?,
        None => *inst.horizon.last().ok_or_else(|| fail("parameters", "empty horizon"))?,
    };
    in_horizon(&inst, date)?;
    let usage = |day: NaiveDate| -> f64 {
        plan.production_on(day)
            .map(|c| {
                c.units
                    * inst
                        .product(&c.product)
                        .and_then(|p| p.bom.get(material_id))
                        .copied()
                        .unwrap_or(0.0)
            })
            .sum()
    };
    let mut on_hand = material.initial_inventory;
    let (mut available, mut consumed) = (material.initial_inventory, 0.0);
    let mut ledger = Vec::new();
    for &day in inst.horizon.iter().filter(|d| **d <= date) {
        let received = material.receipts.get(&day).copied().unwrap_or(0.0);
        let used = usage(day);
        on_hand += received - used;
        available += received;
        consumed += used;
        ledger.push(vec![
            json!(day.to_string()),
            json!(round6(received)),
            json!(round6(used)),
            json!(round6(on_hand)),
        ]);
    }
    Ok(payload(vec![
        ("material_name", json!(material.name)),
        ("date", json!(date.to_string())),
        ("available", json!(round6(available))),
        ("consumed", json!(round6(consumed))),
        ("remaining", json!(round6(available - consumed))),
        ("ledger", table_value(ledger)),
    ]))
}

// --------------------------------------------------------- scenario tools

fn changes_table(old: &Plan, new: &Plan) -> Result<Value, ToolError> {
    let diff = diff_plans(old, new)?;
    let rows = diff
        .changed_cells
        .iter()
        .map(|c| {
            vec![
                json!(c.plant),
                json!(c.product),
                json!(c.date.to_string()),
                json!(round6(c.old)),
                json!(round6(c.new)),
            ]
        })
        .collect();
    Ok(table_value(rows))
}

/// Solves the selected model with one more scenario layered on; infeasible
/// scenarios are answered with an elastic relaxation instead.
fn run_scenario(
    ws: &mut Workspace,
    inv: &Invocation,
    spec: ScenarioSpec,
    id_base: String,
    name: String,
    change: Option<String>,
) -> Result<Map<String, Value>, ToolError> {
    let parent = selected_model(ws, inv)?.clone();
    let parent_plan = ws
        .plan(&parent.plan_id)
        .cloned()
        .ok_or_else(|| fail("plan lookup", format!("unknown plan {}", parent.plan_id)))?;
    let base = ws
        .instances
        .get(&parent.instance_id)
        .cloned()
        .ok_or_else(|| fail("model", format!("instance {} is missing", parent.instance_id)))?;
    let mut specs = parent.specs.clone();
    specs.push(spec);
    let (model, solution) = solve_instance(&base, &specs)?;
    let (model_id, model_name) = ws.unique_model_id(&id_base, &name);

    let mut out = match solution.status {
        LpStatus::Optimal => {
            let plan_id = ws.next_plan_id();
            let plan = extract_plan(&model, &solution, Provenance::from_specs(&specs), &plan_id)?;
            let objective_delta = plan.objective - parent_plan.objective;
            let tardiness_delta = plan.total_tardiness() - parent_plan.total_tardiness();
            let outcome = format!(
                "the objective changes by {} to {} and total tardiness by {} to {} unit-days compared with {}; saved as {plan_id}.",
                signed(objective_delta),
                format_number(plan.objective),
                signed(tardiness_delta),
                format_number(plan.total_tardiness()),
                parent.name,
            );
            let changes = changes_table(&parent_plan, &plan)?;
            let objective = plan.objective;
            ws.models.push(ModelEntry {
                id: model_id.clone(),
                name: model_name.clone(),
                instance_id: parent.instance_id.clone(),
                specs,
                parent: Some(parent.id.clone()),
                plan_id: plan_id.clone(),
            });
            ws.plans.insert(plan_id.clone(), plan);
            payload(vec![
                ("plan_id", json!(plan_id)),
                ("status", json!("feasible")),
                ("objective", json!(round6(objective))),
                ("objective_delta", json!(round6(objective_delta))),
                ("tardiness_delta", json!(round6(tardiness_delta))),
                ("total_violation", json!(0.0)),
                ("violations", json!([])),
                ("outcome", json!(outcome)),
                ("changes", changes),
            ])
        }
        LpStatus::Infeasible => {
            let report = relax_infeasible(&model.problem)?;
            let violations: Vec<String> = report
                .violated
                .iter()
                .map(|v| format!("{} by {}", v.tag, format_number(v.amount)))
                .collect();
            let outcome = format!(
                "infeasible. The closest relaxation violates constraints by {} in total ({}); no plan was saved.",
                format_number(report.total_violation),
                violations.join(", "),
            );
            payload(vec![
                ("plan_id", json!("none")),
                ("status", json!("infeasible")),
                ("objective", json!(round6(report.relaxed_objective))),
                ("objective_delta", json!(round6(report.relaxed_objective - parent_plan.objective))),
                ("tardiness_delta", json!(0.0)),
                ("total_violation", json!(round6(report.total_violation))),
                ("violations", json!(violations)),
                ("outcome", json!(outcome)),
                ("changes", table_value(Vec::new())),
            ])
        }
        other => return Err(fail("solve", format!("solver returned {other:?}"))),
    };
    out.insert("model".into(), json!(model_name));
    if let Some(change) = change {
        out.insert("change".into(), json!(change));
    }
    Ok(out)
}

fn restrict_to_plants(ws: &mut Workspace, inv: &Invocation) -> Result<Map<String, Value>, ToolError> {
    let plants: Vec<String> = inv
        .params
        .get("plants")
        .and_then(Value::as_array)
        .map(|a| a.iter().filter_map(Value::as_str).map(str::to_string).collect())
        .filter(|v: &Vec<String>| !v.is_empty())
        .ok_or_else(|| fail("parameters", "plants is missing"))?;
    let inst = ws.effective_instance(selected_model(ws, inv)?)?;
    let names: Vec<String> = plants
        .iter()
        .map(|p| inst.plant(p).map_or(p.clone(), |p| p.name.clone()))
        .collect();
    let id = format!("{}_only", plants.iter().map(|p| slug(p)).collect::<Vec<_>>().join("_"));
    let name = format!("{}-only", names.join("+"));
    run_scenario(
        ws,
        inv,
        ScenarioSpec::WhyNot(Restriction::RestrictToPlants { plants }),
        id,
        name,
        None,
    )
}

fn hard_deadline(ws: &mut Workspace, inv: &Invocation) -> Result<Map<String, Value>, ToolError> {
    let order = param_str(inv, "order")?.to_string();
    let (id, name) = (format!("{}_hard_deadline", slug(&order)), format!("{order} hard deadline"));
    run_scenario(ws, inv, ScenarioSpec::WhyNot(Restriction::HardDeadline { order }), id, name, None)
}

fn max_production(ws: &mut Workspace, inv: &Invocation) -> Result<Map<String, Value>, ToolError> {
    let product = param_str(inv, "product")?.to_string();
    let units = param_num(inv, "units")?;
    let inst = ws.effective_instance(selected_model(ws, inv)?)?;
    let pname = inst.product(&product).map_or(product.clone(), |p| p.name.clone());
    let (id, name) = (
        format!("{}_max_{}", slug(&product), slug(&format_number(units))),
        format!("{pname} max {}", format_number(units)),
    );
    run_scenario(
        ws,
        inv,
        ScenarioSpec::WhyNot(Restriction::MaxProduction { product, units }),
        id,
        name,
        None,
    )
}

fn add_receipt(ws: &mut Workspace, inv: &Invocation) -> Result<Map<String, Value>, ToolError> {
    let material = param_str(inv, "material")?.to_string();
    let kg = param_num(inv, "quantity")?;
    let date = param_date(inv, "date")?;
    let inst = ws.effective_instance(selected_model(ws, inv)?)?;
    let mname = inst.material(&material).map_or(material.clone(), |m| m.name.clone());
    let change = format!("receiving {} kg of {mname} on {date}", format_number(kg));
    let (id, name) = (format!("{}_receipt", slug(&material)), format!("{mname} receipt"));
    run_scenario(
        ws,
        inv,
        ScenarioSpec::WhatIf(DataChange::AddReceipt { material, date, kg }),
        id,
        name,
        Some(change),
    )
}

fn change_capacity(ws: &mut Workspace, inv: &Invocation) -> Result<Map<String, Value>, ToolError> {
    let plant = param_str(inv, "plant")?.to_string();
    let date = param_date(inv, "date")?;
    let hours = param_num(inv, "hours")?;
    let inst = ws.effective_instance(selected_model(ws, inv)?)?;
    let pname = inst.plant(&plant).map_or(plant.clone(), |p| p.name.clone());
    let change = format!("{pname} capacity set to {} hours on {date}", format_number(hours));
    let (id, name) = (format!("{}_capacity", slug(&plant)), format!("{pname} capacity"));
    run_scenario(
        ws,
        inv,
        ScenarioSpec::WhatIf(DataChange::SetCapacity { plant, date, hours }),
        id,
        name,
        Some(change),
    )
}

fn change_due_date(ws: &mut Workspace, inv: &Invocation) -> Result<Map<String, Value>, ToolError> {
    let order = param_str(inv, "order")?.to_string();
    let date = param_date(inv, "date")?;
    let change = format!("order {order} due on {date}");
    let (id, name) = (format!("{}_due_date", slug(&order)), format!("{order} due date"));
    run_scenario(
        ws,
        inv,
        ScenarioSpec::WhatIf(DataChange::ChangeDueDate { order, date }),
        id,
        name,
        Some(change),
    )
}

fn prioritize_order(ws: &mut Workspace, inv: &Invocation) -> Result<Map<String, Value>, ToolError> {
    let order = param_str(inv, "order")?.to_string();
    let inst = ws.effective_instance(selected_model(ws, inv)?)?;
    let weight = match inv.params.get("weight").and_then(Value::as_f64) {
        Some(w) => w,
        None => 2.0 * inst.orders.iter().map(|o| o.weight).fold(0.0, f64::max),
    };
    let change = format!("order {order} weight set to {}", format_number(weight));
    let (id, name) = (format!("{}_priority", slug(&order)), format!("{order} priority"));
    run_scenario(
        ws,
        inv,
        ScenarioSpec::WhatIf(DataChange::ChangeOrderWeight { order, weight }),
        id,
        name,
        Some(change),
    )
}

// ------------------------------------------------------ compare and display

fn compare_plans(ws: &mut Workspace, inv: &Invocation) -> Result<Map<String, Value>, ToolError> {
    let lookup = |name: &str| -> Result<&Plan, ToolError> {
        let id = param_str(inv, name)?;
        ws.plan(id).ok_or_else(|| fail("plan lookup", format!("unknown plan {id}")))
    };
    let (a, b) = (lookup("plan_a")?, lookup("plan_b")?);
    let diff = diff_plans(a, b)?;
    let (product_name, production_delta) = match opt_str(inv, "product") {
        Some(p) => {
            let name = ws
                .instances
                .get(&b.instance_id)
                .and_then(|i| i.product(p))
                .map_or(p.to_string(), |p| p.name.clone());
            (name, diff.per_product_total_delta.get(p).copied().unwrap_or(0.0))
        }
        None => ("all products".to_string(), diff.total_production_delta()),
    };
    Ok(payload(vec![
        ("plan_a", json!(a.id)),
        ("plan_b", json!(b.id)),
        ("product_name", json!(product_name)),
        ("production_delta", json!(round6(production_delta))),
        ("objective_delta", json!(round6(diff.objective_delta))),
        ("tardiness_delta", json!(round6(diff.total_tardiness_delta()))),
        ("changes", changes_table(a, b)?),
    ]))
}

fn show_plan_table(ws: &mut Workspace, inv: &Invocation) -> Result<Map<String, Value>, ToolError> {
    let (plan, _) = target_plan(ws, inv)?;
    let plant = opt_str(inv, "plant");
    let mut rows = Vec::new();
    let mut total = 0.0;
    for c in &plan.production {
        if c.units <= QUANTITY_TOL || plant.is_some_and(|p| p != c.plant) {
            continue;
        }
        total += c.units;
        rows.push(vec![
            json!(c.plant),
            json!(c.product),
            json!(c.date.to_string()),
            json!(round6(c.units)),
        ]);
    }
    Ok(payload(vec![
        ("plan_id", json!(plan.id)),
        ("entries", json!(rows.len())),
        ("total_units", json!(round6(total))),
        ("plan", table_value(rows)),
    ]))
}

fn show_order_table(ws: &mut Workspace, inv: &Invocation) -> Result<Map<String, Value>, ToolError> {
    let (plan, inst) = target_plan(ws, inv)?;
    let mut rows = Vec::new();
    let mut late_orders = 0;
    for o in &inst.orders {
        let (mut on_time, mut late) = (0.0, 0.0);
        for a in plan.allocations_for(&o.id) {
            if a.date <= o.due_date {
                on_time += a.units;
            } else {
                late += a.units;
            }
        }
        let short = plan.shortage.get(&o.id).copied().unwrap_or(0.0);
        if late + short > QUANTITY_TOL {
            late_orders += 1;
        }
        rows.push(vec![
            json!(o.id),
            json!(o.product_id),
            json!(o.quantity),
            json!(o.due_date.to_string()),
            json!(round6(on_time)),
            json!(round6(late)),
            json!(round6(short)),
            json!(round6(plan.tardiness.get(&o.id).copied().unwrap_or(0.0))),
        ]);
    }
    Ok(payload(vec![
        ("plan_id", json!(plan.id)),
        ("orders", json!(inst.orders.len())),
        ("late_orders", json!(late_orders)),
        ("orders_table", table_value(rows)),
    ]))
}
