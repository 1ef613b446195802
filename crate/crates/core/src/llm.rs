//! Language-model gateway: prompt templates for the four LLM tasks, an HTTP
//! completion client, completion parsers and a rule-based stub that runs
//! fully offline.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, LazyLock};
use std::time::Duration;

use chrono::{DateTime, NaiveDate, Utc};
use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::contracts::{placeholders, ParamSpec, ParamType};
use crate::data::{parse_date, resolve_entity_of, EntityKind, PlanningInstance, Resolution};
use crate::retriever::STOP_WORDS;

pub const CONVERSATION_TAIL: usize = 10;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);
pub const DEFAULT_MAX_RETRIES: u32 = 2;
pub const DEFAULT_MAX_TOKENS: u32 = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub text: String,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Intent {
    #[serde(rename = "CASUAL_CONVERSATION")]
    CasualConversation,
    #[serde(rename = "OPERATIONS_PLANNING")]
    OperationsPlanning,
}

impl Intent {
    pub fn label(self) -> &'static str {
        match self {
            Intent::CasualConversation => "CASUAL_CONVERSATION",
            Intent::OperationsPlanning => "OPERATIONS_PLANNING",
        }
    }
}

impl fmt::Display for Intent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LlmError {
    #[error("completion endpoint failed: {0}")]
    ClientFailure(String),
    #[error("completion has no JSON object")]
    UnparseableCompletion,
    #[error("prompt template {name}: {detail}")]
    Template { name: String, detail: String },
}

pub trait CompletionClient: Send + Sync {
    fn complete(&self, prompt: &str, max_tokens: u32) -> Result<String, LlmError>;
}

impl<F> CompletionClient for F
where
    F: Fn(&str) -> Result<String, LlmError> + Send + Sync,
{
    fn complete(&self, prompt: &str, _max_tokens: u32) -> Result<String, LlmError> {
        self(prompt)
    }
}

// ---------------------------------------------------------------- templates

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum TemplateName {
    IntentClassification,
    RefineResponse,
    ParameterExtraction,
    ModelSelection,
}

impl TemplateName {
    pub const ALL: [TemplateName; 4] = [
        TemplateName::IntentClassification,
        TemplateName::RefineResponse,
        TemplateName::ParameterExtraction,
        TemplateName::ModelSelection,
    ];

    pub fn file_stem(self) -> &'static str {
        match self {
            TemplateName::IntentClassification => "intent_classification",
            TemplateName::RefineResponse => "refine_response",
            TemplateName::ParameterExtraction => "parameter_extraction",
            TemplateName::ModelSelection => "model_selection",
        }
    }

    pub fn slots(self) -> &'static [&'static str] {
        match self {
            TemplateName::IntentClassification => &["conversation", "query", "options"],
            TemplateName::RefineResponse => &["conversation", "tool_output"],
            TemplateName::ParameterExtraction => &["conversation", "query", "schema"],
            TemplateName::ModelSelection => &["conversation", "candidates"],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplates {
    texts: BTreeMap<TemplateName, String>,
}

const BUNDLED_PROMPTS: [(TemplateName, &str); 4] = [
    (
        TemplateName::IntentClassification,
        include_str!("../prompts/intent_classification.txt"),
    ),
    (TemplateName::RefineResponse, include_str!("../prompts/refine_response.txt")),
    (
        TemplateName::ParameterExtraction,
        include_str!("../prompts/parameter_extraction.txt"),
    ),
    (TemplateName::ModelSelection, include_str!("../prompts/model_selection.txt")),
];

impl Default for PromptTemplates {
    fn default() -> Self {
        let texts = BUNDLED_PROMPTS.iter().map(|(n, t)| (*n, t.to_string())).collect();
        PromptTemplates::new(texts).expect("bundled prompts are valid")
    }
}

impl PromptTemplates {
    pub fn new(texts: BTreeMap<TemplateName, String>) -> Result<Self, LlmError> {
        for name in TemplateName::ALL {
            let text = texts.get(&name).ok_or_else(|| LlmError::Template {
                name: name.file_stem().into(),
                detail: "missing".into(),
            })?;
            for slot in placeholders(text) {
                if !name.slots().contains(&slot.as_str()) {
                    return Err(LlmError::Template {
                        name: name.file_stem().into(),
                        detail: format!("undeclared slot {{{slot}}}"),
                    });
                }
            }
        }
        Ok(PromptTemplates { texts })
    }

    /// Reads `<name>.txt` for each of the four templates.
    pub fn load(dir: &Path) -> Result<Self, LlmError> {
        let mut texts = BTreeMap::new();
        for name in TemplateName::ALL {
            let path = dir.join(format!("{}.txt", name.file_stem()));
            let text = fs::read_to_string(&path).map_err(|e| LlmError::Template {
                name: name.file_stem().into(),
                detail: format!("{}: {e}", path.display()),
            })?;
            texts.insert(name, text);
        }
        PromptTemplates::new(texts)
    }

    pub fn fill(&self, name: TemplateName, values: &[(&str, &str)]) -> String {
        let mut out = self.texts[&name].clone();
        for (slot, value) in values {
            out = out.replace(&format!("{{{slot}}}"), value);
        }
        out
    }
}

pub fn bundled_prompts_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("prompts")
}

// ------------------------------------------------------------- http client

#[derive(Debug, Clone, PartialEq)]
pub struct LlmConfig {
    pub endpoint: Option<String>,
    pub timeout: Duration,
    pub max_retries: u32,
    pub embed_endpoint: Option<String>,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            endpoint: None,
            timeout: DEFAULT_TIMEOUT,
            max_retries: DEFAULT_MAX_RETRIES,
            embed_endpoint: None,
        }
    }
}

impl LlmConfig {
    /// Reads `LLM_ENDPOINT`, `LLM_TIMEOUT_S` and `EMBED_ENDPOINT`.
    pub fn from_env() -> Self {
        let non_empty = |k: &str| std::env::var(k).ok().filter(|v| !v.trim().is_empty());
        let timeout = non_empty("LLM_TIMEOUT_S")
            .and_then(|v| v.trim().parse::<f64>().ok())
            .filter(|s| s.is_finite() && *s > 0.0)
            .map(Duration::from_secs_f64)
            .unwrap_or(DEFAULT_TIMEOUT);
        LlmConfig {
            endpoint: non_empty("LLM_ENDPOINT"),
            timeout,
            max_retries: DEFAULT_MAX_RETRIES,
            embed_endpoint: non_empty("EMBED_ENDPOINT"),
        }
    }
}

/// `POST {"prompt", "max_tokens"}` answering `{"text"}`, with retries and
/// exponential backoff (1 s, 2 s, ...).
pub struct HttpCompletionClient {
    endpoint: String,
    max_retries: u32,
    backoff_base: Duration,
    agent: ureq::Agent,
}

#[derive(Deserialize)]
struct CompletionReply {
    text: String,
}

impl HttpCompletionClient {
    pub fn new(endpoint: impl Into<String>, timeout: Duration, max_retries: u32) -> Self {
        HttpCompletionClient::with_backoff(endpoint, timeout, max_retries, Duration::from_secs(1))
    }

    pub fn with_backoff(endpoint: impl Into<String>, timeout: Duration, max_retries: u32, backoff_base: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        HttpCompletionClient {
            endpoint: endpoint.into(),
            max_retries,
            backoff_base,
            agent,
        }
    }

    fn attempt(&self, prompt: &str, max_tokens: u32) -> Result<String, String> {
        let mut response = self
            .agent
            .post(&self.endpoint)
            .send_json(serde_json::json!({ "prompt": prompt, "max_tokens": max_tokens }))
            .map_err(|e| e.to_string())?;
        let reply: CompletionReply = response.body_mut().read_json().map_err(|e| e.to_string())?;
        Ok(reply.text)
    }
}

impl CompletionClient for HttpCompletionClient {
    fn complete(&self, prompt: &str, max_tokens: u32) -> Result<String, LlmError> {
        let mut last = String::new();
        for attempt in 0..=self.max_retries {
            if attempt > 0 {
                std::thread::sleep(self.backoff_base * (1 << (attempt - 1)));
            }
            match self.attempt(prompt, max_tokens) {
                Ok(text) => return Ok(text),
                Err(e) => last = e,
            }
        }
        Err(LlmError::ClientFailure(last))
    }
}

// ----------------------------------------------------------------- parsers

/// Earliest label occurrence wins; no label means casual conversation.
pub fn parse_intent(completion: &str) -> Intent {
    let lower = completion.to_lowercase();
    let ops = lower.find("operations_planning");
    let casual = lower.find("casual_conversation");
    match (ops, casual) {
        (Some(o), Some(c)) if o < c => Intent::OperationsPlanning,
        (Some(_), None) => Intent::OperationsPlanning,
        _ => Intent::CasualConversation,
    }
}

/// The first balanced `{...}` block of `text`, parsed as a JSON object.
pub fn first_json_object(text: &str) -> Option<Map<String, Value>> {
    let bytes = text.as_bytes();
    let mut search = 0;
    while let Some(offset) = text[search..].find('{') {
        let start = search + offset;
        let (mut depth, mut in_string, mut escaped) = (0usize, false, false);
        for (i, &b) in bytes.iter().enumerate().skip(start) {
            if in_string {
                match b {
                    _ if escaped => escaped = false,
                    b'\\' => escaped = true,
                    b'"' => in_string = false,
                    _ => {}
                }
                continue;
            }
            match b {
                b'"' => in_string = true,
                b'{' => depth += 1,
                b'}' => {
                    depth -= 1;
                    if depth == 0 {
                        if let Ok(Value::Object(map)) = serde_json::from_str(&text[start..=i]) {
                            return Some(map);
                        }
                        break;
                    }
                }
                _ => {}
            }
        }
        search = start + 1;
    }
    None
}

// ------------------------------------------------------------ stub helpers

/// Words ignored when deciding whether a query is about planning.
const FUNCTION_WORDS: [&str; 44] = [
    "how", "what", "when", "why", "which", "who", "where", "can", "could", "would", "will", "should", "if", "not",
    "no", "yes", "you", "your", "us", "any", "some", "have", "has", "there", "so", "than", "then", "its", "their",
    "them", "as", "up", "out", "just", "tell", "see", "need", "want", "go", "going", "happens", "get", "give", "s",
];

/// Vocabulary the stub uses to recognize planning requests: content words of
/// every contract example plus the names and ids of the active instance.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    words: BTreeSet<String>,
}

fn words_of(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
}

impl Vocabulary {
    pub fn new<'a>(examples: impl IntoIterator<Item = &'a str>, instance: Option<&PlanningInstance>) -> Self {
        let mut words = BTreeSet::new();
        for ex in examples {
            words.extend(words_of(ex));
        }
        if let Some(inst) = instance {
            for (_, id, name) in inst.entities() {
                words.extend(words_of(id));
                words.extend(words_of(name));
            }
        }
        words.retain(|w| !STOP_WORDS.contains(&w.as_str()) && !FUNCTION_WORDS.contains(&w.as_str()));
        Vocabulary { words }
    }

    pub fn matches(&self, query: &str) -> bool {
        words_of(query).any(|w| self.words.contains(&w))
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

static ISO_DATE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b(\d{4}-\d{2}-\d{2})\b").unwrap());
static RELATIVE_DAY: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\b(today|tomorrow)\b").unwrap());
static PLAN_ID: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\bplan-\d+\b").unwrap());
static NUMBER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)(?:^|[^\w.\-])(\d+(?:\.\d+)?)\s*(?:kg|kgs|kilograms?|hours?|hrs?|h|units?|pcs)?\b").unwrap()
});
static TOKEN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[A-Za-z0-9]+").unwrap());

/// A plan the user may refer to, by id or by its model's id or name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanRef {
    pub plan_id: String,
    pub aliases: Vec<String>,
}

/// What parameter grounding can see besides the text.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExtractionContext<'a> {
    pub instance: Option<&'a PlanningInstance>,
    pub plans: &'a [PlanRef],
    /// The day "today" refers to.
    pub today: Option<NaiveDate>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Extraction {
    pub params: BTreeMap<String, Value>,
    /// Names (schema order) of parameters that are required but absent, or
    /// whose value failed validation.
    pub missing: Vec<String>,
}

fn normalize_alias(s: &str) -> String {
    words_of(s).collect::<Vec<_>>().join(" ")
}

/// Byte offsets of the last mention of `alias` in `text`, by normalized words.
fn last_mention(text: &str, alias: &str) -> Option<usize> {
    let needle = normalize_alias(alias);
    if needle.is_empty() {
        return None;
    }
    let tokens: Vec<(usize, String)> = TOKEN
        .find_iter(text)
        .map(|m| (m.start(), m.as_str().to_lowercase()))
        .collect();
    let n = needle.split(' ').count();
    let mut found = None;
    for i in 0..tokens.len().saturating_sub(n - 1) {
        let window: Vec<&str> = tokens[i..i + n].iter().map(|(_, w)| w.as_str()).collect();
        if window.join(" ") == needle {
            found = Some(tokens[i].0);
        }
    }
    found
}

fn is_function_word(w: &str) -> bool {
    STOP_WORDS.contains(&w) || FUNCTION_WORDS.contains(&w)
}

/// Entities of `kind` mentioned in `text`, in order of appearance, using
/// longest n-grams first. Ambiguous mentions are skipped.
fn entity_mentions(text: &str, instance: &PlanningInstance, kind: EntityKind) -> Vec<String> {
    let tokens: Vec<(usize, String)> = TOKEN
        .find_iter(text)
        .map(|m| (m.start(), m.as_str().to_lowercase()))
        .collect();
    let mut used = vec![false; tokens.len()];
    let mut found: Vec<(usize, String)> = Vec::new();
    for n in (1..=tokens.len().min(4)).rev() {
        for i in 0..=tokens.len() - n {
            if used[i..i + n].iter().any(|u| *u) {
                continue;
            }
            let words: Vec<&str> = tokens[i..i + n].iter().map(|(_, w)| w.as_str()).collect();
            if is_function_word(words[0]) || is_function_word(words[n - 1]) {
                continue;
            }
            let phrase = words.join(" ");
            let mut attempts = vec![(phrase.clone(), false)];
            if let Some(singular) = phrase.strip_suffix('s') {
                attempts.push((singular.to_string(), true));
            }
            for (mention, exact_only) in attempts {
                let resolution = resolve_entity_of(&mention, instance, Some(kind));
                let hit = match resolution {
                    Ok(Resolution::Found(e)) => {
                        let exact = instance.entities().iter().any(|(k, id, name)| {
                            *k == kind
                                && id == &e.id
                                && (normalize_alias(id) == mention || normalize_alias(name) == mention)
                        });
                        // substring matches on short fragments are too loose
                        (exact || (!exact_only && mention.len() >= 4)).then_some(Some(e.id))
                    }
                    Err(_) if mention.len() >= 4 => Some(None),
                    _ => None,
                };
                if let Some(id) = hit {
                    used[i..i + n].iter_mut().for_each(|u| *u = true);
                    if let Some(id) = id {
                        found.push((tokens[i].0, id));
                    }
                    break;
                }
            }
        }
    }
    found.sort_by_key(|(pos, _)| *pos);
    let mut out: Vec<String> = Vec::new();
    for (_, id) in found {
        if !out.contains(&id) {
            out.push(id);
        }
    }
    out
}

/// Rule-based extraction used by the stub.
fn stub_extract(schema: &[ParamSpec], query: &str, ctx: &ExtractionContext<'_>) -> Map<String, Value> {
    let mut dates: Vec<(usize, NaiveDate)> = ISO_DATE
        .captures_iter(query)
        .filter_map(|c| {
            let m = c.get(1).unwrap();
            parse_date(m.as_str()).map(|d| (m.start(), d))
        })
        .collect();
    if let Some(today) = ctx.today {
        for m in RELATIVE_DAY.find_iter(query) {
            let offset = if m.as_str().eq_ignore_ascii_case("tomorrow") { 1 } else { 0 };
            dates.push((m.start(), today + chrono::Days::new(offset)));
        }
    }
    dates.sort_by_key(|(p, _)| *p);

    let mut plans: Vec<(usize, String)> = PLAN_ID
        .find_iter(query)
        .filter_map(|m| {
            let id = m.as_str().to_lowercase();
            ctx.plans.iter().any(|p| p.plan_id == id).then(|| (m.start(), id))
        })
        .collect();
    for p in ctx.plans {
        for alias in &p.aliases {
            if let Some(pos) = last_mention(query, alias) {
                if !plans.iter().any(|(q, id)| *q == pos || *id == p.plan_id) {
                    plans.push((pos, p.plan_id.clone()));
                }
            }
        }
    }
    plans.sort_by_key(|(p, _)| *p);

    let scrubbed = PLAN_ID.replace_all(&ISO_DATE.replace_all(query, " "), " ").into_owned();
    let numbers: Vec<f64> = NUMBER
        .captures_iter(&scrubbed)
        .filter_map(|c| c[1].parse::<f64>().ok())
        .collect();

    let mut out = Map::new();
    let (mut next_date, mut next_number, mut next_plan) = (0, 0, 0);
    let mut taken: BTreeMap<EntityKind, usize> = BTreeMap::new();
    for spec in schema {
        let value = match &spec.ty {
            ParamType::Date => dates.get(next_date).map(|(_, d)| {
                next_date += 1;
                Value::String(d.to_string())
            }),
            ParamType::Number => numbers.get(next_number).map(|n| {
                next_number += 1;
                Value::from(*n)
            }),
            ParamType::Entity { kind } => ctx.instance.and_then(|inst| {
                let mentions = entity_mentions(&scrubbed, inst, *kind);
                let k = taken.entry(*kind).or_default();
                let v = mentions.get(*k).cloned().map(Value::String);
                *k += 1;
                v
            }),
            ParamType::EntityList { kind } => ctx.instance.and_then(|inst| {
                let mentions = entity_mentions(&scrubbed, inst, *kind);
                (!mentions.is_empty()).then(|| Value::from(mentions))
            }),
            ParamType::Enum { values } => {
                let words: Vec<String> = words_of(query).collect();
                values
                    .iter()
                    .find(|v| words.contains(&v.to_lowercase()))
                    .map(|v| Value::String(v.clone()))
            }
            ParamType::Plan => plans.get(next_plan).map(|(_, id)| {
                next_plan += 1;
                Value::String(id.clone())
            }),
            ParamType::String => None,
        };
        if let Some(v) = value {
            out.insert(spec.name.clone(), v);
        }
    }
    out
}

fn resolve_plan(value: &str, ctx: &ExtractionContext<'_>) -> Option<String> {
    let v = value.trim().to_lowercase();
    ctx.plans
        .iter()
        .find(|p| p.plan_id == v)
        .or_else(|| {
            ctx.plans
                .iter()
                .rev()
                .find(|p| p.aliases.iter().any(|a| normalize_alias(a) == normalize_alias(&v)))
        })
        .map(|p| p.plan_id.clone())
}

fn resolve_kind(value: &str, ctx: &ExtractionContext<'_>, kind: EntityKind) -> Option<String> {
    let inst = ctx.instance?;
    match resolve_entity_of(value, inst, Some(kind)) {
        Ok(Resolution::Found(e)) => Some(e.id),
        _ => None,
    }
}

/// Checks one raw value against its spec, returning the grounded value.
pub fn validate_param(spec: &ParamSpec, raw: &Value, ctx: &ExtractionContext<'_>) -> Option<Value> {
    match &spec.ty {
        ParamType::Date => raw.as_str().and_then(|s| parse_date(s.trim())).map(|d| Value::String(d.to_string())),
        ParamType::Number => {
            let n = match raw {
                Value::Number(n) => n.as_f64(),
                Value::String(s) => s.trim().parse::<f64>().ok(),
                _ => None,
            }?;
            n.is_finite().then(|| Value::from(n))
        }
        ParamType::Entity { kind } => raw
            .as_str()
            .and_then(|s| resolve_kind(s, ctx, *kind))
            .map(Value::String),
        ParamType::EntityList { kind } => {
            let items: Vec<&str> = match raw {
                Value::Array(a) => a.iter().map(|v| v.as_str()).collect::<Option<Vec<_>>>()?,
                Value::String(s) => s.split(',').collect(),
                _ => return None,
            };
            let ids = items
                .into_iter()
                .map(|s| resolve_kind(s, ctx, *kind))
                .collect::<Option<Vec<_>>>()?;
            let mut unique: Vec<String> = Vec::new();
            for id in ids {
                if !unique.contains(&id) {
                    unique.push(id);
                }
            }
            (!unique.is_empty()).then(|| Value::from(unique))
        }
        ParamType::Enum { values } => raw.as_str().and_then(|s| {
            values
                .iter()
                .find(|v| v.eq_ignore_ascii_case(s.trim()))
                .map(|v| Value::String(v.clone()))
        }),
        ParamType::Plan => raw.as_str().and_then(|s| resolve_plan(s, ctx)).map(Value::String),
        ParamType::String => raw
            .as_str()
            .filter(|s| !s.trim().is_empty())
            .map(|s| Value::String(s.trim().to_string())),
    }
}

fn validate_all(schema: &[ParamSpec], raw: &Map<String, Value>, ctx: &ExtractionContext<'_>) -> Extraction {
    let mut out = Extraction::default();
    for spec in schema {
        match raw.get(&spec.name).filter(|v| !v.is_null()) {
            Some(v) => match validate_param(spec, v, ctx) {
                Some(ok) => {
                    out.params.insert(spec.name.clone(), ok);
                }
                None => out.missing.push(spec.name.clone()),
            },
            None if spec.required => out.missing.push(spec.name.clone()),
            None => {}
        }
    }
    out
}

/// Tail of the conversation rendered one message per line.
pub fn render_conversation(conversation: &[Message]) -> String {
    let start = conversation.len().saturating_sub(CONVERSATION_TAIL);
    conversation[start..]
        .iter()
        .map(|m| {
            let who = match m.role {
                Role::User => "User",
                Role::Assistant => "Assistant",
            };
            format!("{who}: {}", m.text)
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn last_user_text(conversation: &[Message]) -> &str {
    conversation
        .iter()
        .rev()
        .find(|m| m.role == Role::User)
        .map_or("", |m| m.text.as_str())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelCandidate {
    pub id: String,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelChoice {
    Selected(String),
    Undetermined,
}

pub const STUB_CASUAL_REPLY: &str = "I can answer questions about the operations plan, explain order delays, run what-if and why-not scenarios, compare plans and show plan tables. What would you like to know?";

// ----------------------------------------------------------------- gateway

#[derive(Clone)]
pub enum Backend {
    Stub,
    Client(Arc<dyn CompletionClient>),
}

impl fmt::Debug for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Backend::Stub => f.write_str("Stub"),
            Backend::Client(_) => f.write_str("Client"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LlmGateway {
    pub templates: PromptTemplates,
    pub backend: Backend,
    pub max_tokens: u32,
}

impl LlmGateway {
    pub fn stub() -> Self {
        LlmGateway {
            templates: PromptTemplates::default(),
            backend: Backend::Stub,
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }

    pub fn with_client(client: Arc<dyn CompletionClient>) -> Self {
        LlmGateway {
            templates: PromptTemplates::default(),
            backend: Backend::Client(client),
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }

    /// Stub mode unless `config.endpoint` is set.
    pub fn from_config(config: &LlmConfig) -> Self {
        match &config.endpoint {
            None => LlmGateway::stub(),
            Some(url) => LlmGateway::with_client(Arc::new(HttpCompletionClient::new(
                url.clone(),
                config.timeout,
                config.max_retries,
            ))),
        }
    }

    pub fn is_stub(&self) -> bool {
        matches!(self.backend, Backend::Stub)
    }

    fn complete(&self, client: &Arc<dyn CompletionClient>, prompt: &str) -> Result<String, LlmError> {
        client.complete(prompt, self.max_tokens)
    }

    pub fn classify_intent(&self, conversation: &[Message], query: &str, vocabulary: &Vocabulary) -> Result<Intent, LlmError> {
        match &self.backend {
            Backend::Stub => Ok(stub_classify(query, vocabulary)),
            Backend::Client(client) => {
                let options = format!("{}\n{}", Intent::CasualConversation, Intent::OperationsPlanning);
                let prompt = self.templates.fill(
                    TemplateName::IntentClassification,
                    &[
                        ("conversation", &render_conversation(conversation)),
                        ("query", query),
                        ("options", &options),
                    ],
                );
                Ok(parse_intent(&self.complete(client, &prompt)?))
            }
        }
    }

    /// Rewrites a tool's NL text for the conversation; on client failure the
    /// text is returned unchanged.
    pub fn refine_response(&self, conversation: &[Message], tool_nl_text: &str) -> String {
        match &self.backend {
            Backend::Stub => stub_refine(conversation, tool_nl_text),
            Backend::Client(client) => {
                let prompt = self.templates.fill(
                    TemplateName::RefineResponse,
                    &[
                        ("conversation", &render_conversation(conversation)),
                        ("tool_output", tool_nl_text),
                    ],
                );
                match self.complete(client, &prompt) {
                    Ok(text) if !text.trim().is_empty() => text.trim().to_string(),
                    _ => tool_nl_text.to_string(),
                }
            }
        }
    }

    /// Reply to casual conversation, with no tool output involved.
    pub fn casual_reply(&self, conversation: &[Message]) -> String {
        match &self.backend {
            Backend::Stub => STUB_CASUAL_REPLY.to_string(),
            Backend::Client(client) => {
                let prompt = self.templates.fill(
                    TemplateName::RefineResponse,
                    &[
                        ("conversation", &render_conversation(conversation)),
                        ("tool_output", "(no tool was used; reply conversationally)"),
                    ],
                );
                match self.complete(client, &prompt) {
                    Ok(text) if !text.trim().is_empty() => text.trim().to_string(),
                    _ => STUB_CASUAL_REPLY.to_string(),
                }
            }
        }
    }

    pub fn extract_parameters(
        &self,
        schema: &[ParamSpec],
        conversation: &[Message],
        query: &str,
        ctx: &ExtractionContext<'_>,
    ) -> Result<Extraction, LlmError> {
        let raw = match &self.backend {
            Backend::Stub => stub_extract(schema, query, ctx),
            Backend::Client(client) => {
                let prompt = self.templates.fill(
                    TemplateName::ParameterExtraction,
                    &[
                        ("conversation", &render_conversation(conversation)),
                        ("query", query),
                        ("schema", &describe_schema(schema)),
                    ],
                );
                match first_json_object(&self.complete(client, &prompt)?) {
                    Some(map) => map,
                    None => {
                        return Ok(Extraction {
                            params: BTreeMap::new(),
                            missing: schema.iter().filter(|p| p.required).map(|p| p.name.clone()).collect(),
                        })
                    }
                }
            }
        };
        Ok(validate_all(schema, &raw, ctx))
    }

    /// Picks the model the conversation refers to. A single candidate is
    /// returned without consulting the client.
    pub fn select_model(&self, conversation: &[Message], candidates: &[ModelCandidate]) -> ModelChoice {
        match candidates {
            [] => return ModelChoice::Undetermined,
            [only] => return ModelChoice::Selected(only.id.clone()),
            _ => {}
        }
        match &self.backend {
            Backend::Stub => stub_select_model(conversation, candidates),
            Backend::Client(client) => {
                let listing = candidates
                    .iter()
                    .map(|c| format!("- {} ({})", c.id, c.name))
                    .collect::<Vec<_>>()
                    .join("\n");
                let prompt = self.templates.fill(
                    TemplateName::ModelSelection,
                    &[
                        ("conversation", &render_conversation(conversation)),
                        ("candidates", &listing),
                    ],
                );
                match self.complete(client, &prompt) {
                    Ok(text) => parse_model_choice(&text, candidates),
                    Err(_) => ModelChoice::Undetermined,
                }
            }
        }
    }
}

pub fn describe_schema(schema: &[ParamSpec]) -> String {
    schema
        .iter()
        .map(|p| {
            format!(
                "- {} ({}, {}): {}",
                p.name,
                p.ty.describe(),
                if p.required { "required" } else { "optional" },
                p.description
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Exact id containment first, then case-insensitive name containment.
pub fn parse_model_choice(completion: &str, candidates: &[ModelCandidate]) -> ModelChoice {
    let by_id = candidates
        .iter()
        .filter(|c| completion.contains(&c.id))
        .max_by_key(|c| c.id.len());
    if let Some(c) = by_id {
        return ModelChoice::Selected(c.id.clone());
    }
    let lower = completion.to_lowercase();
    candidates
        .iter()
        .filter(|c| !c.name.is_empty() && lower.contains(&c.name.to_lowercase()))
        .max_by_key(|c| c.name.len())
        .map_or(ModelChoice::Undetermined, |c| ModelChoice::Selected(c.id.clone()))
}

/// Words that on their own make a message small talk.
const SMALL_TALK: [&str; 48] = [
    "hello", "hi", "hey", "hiya", "greetings", "thanks", "thank", "thx", "cheers", "bye", "goodbye", "morning",
    "afternoon", "evening", "night", "good", "great", "nice", "fine", "ok", "okay", "sure", "please", "help", "do",
    "doing", "name", "joke", "weather", "like", "welcome", "sorry", "cool", "awesome", "bot", "assistant", "talk",
    "chat", "day", "well", "i", "me", "my", "am", "m", "re", "ll", "ve",
];

/// Planning words mean planning; otherwise a message made only of small
/// talk is casual. Anything else goes to retrieval, which decides whether a
/// tool fits.
fn stub_classify(query: &str, vocabulary: &Vocabulary) -> Intent {
    if vocabulary.matches(query) {
        return Intent::OperationsPlanning;
    }
    let small_talk = words_of(query)
        .filter(|w| !is_function_word(w))
        .all(|w| SMALL_TALK.contains(&w.as_str()));
    if small_talk {
        Intent::CasualConversation
    } else {
        Intent::OperationsPlanning
    }
}

fn stub_refine(conversation: &[Message], tool_nl_text: &str) -> String {
    format!("Regarding your question: {} — {tool_nl_text}", last_user_text(conversation))
}

fn stub_select_model(conversation: &[Message], candidates: &[ModelCandidate]) -> ModelChoice {
    // Only the planner's own words count: replies routinely name the parent
    // model of a scenario.
    for text in conversation.iter().rev().filter(|m| m.role == Role::User).map(|m| &m.text) {
        let best = candidates
            .iter()
            .filter_map(|c| {
                let pos = [c.id.as_str(), c.name.as_str()]
                    .iter()
                    .filter_map(|alias| last_mention(text, alias))
                    .max()?;
                Some((pos, c))
            })
            .max_by_key(|(pos, _)| *pos);
        if let Some((_, c)) = best {
            return ModelChoice::Selected(c.id.clone());
        }
    }
    ModelChoice::Selected(candidates.last().unwrap().id.clone())
}
