//! Session state and the message pipeline: intent detection, tool retrieval,
//! tool management and response refinement, with the clarification loop,
//! the task log and tool-gap logging.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::contracts::{format_number, Table, ToolContract};
use crate::data::PlanningInstance;
use crate::llm::{Intent, LlmGateway, Message, Role, Vocabulary};
use crate::retriever::{retrieve_with_tau, Embedder, VectorIndex, DEFAULT_TAU};
use crate::tools::{Preparation, ToolError, ToolManager, Workspace, MODEL_PARAM};

/// Follow-ups allowed after the first clarifying question.
pub const MAX_CLARIFICATION_ATTEMPTS: u32 = 2;
const RETRIEVAL_K: usize = 3;

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// Starts at a fixed instant and advances one second per reading.
#[derive(Debug)]
pub struct SteppingClock {
    next: AtomicI64,
}

impl SteppingClock {
    pub fn starting_at(t: DateTime<Utc>) -> Self {
        SteppingClock {
            next: AtomicI64::new(t.timestamp()),
        }
    }
}

impl Clock for SteppingClock {
    fn now(&self) -> DateTime<Utc> {
        let s = self.next.fetch_add(1, Ordering::SeqCst);
        DateTime::from_timestamp(s, 0).expect("timestamp in range")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskStatus {
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub seq: u64,
    pub tool_id: String,
    pub status: TaskStatus,
    pub started: DateTime<Utc>,
    pub finished: Option<DateTime<Utc>>,
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TaskError {
    #[error("task {seq}: invalid transition {from:?} -> {to:?}")]
    InvalidTransition { seq: u64, from: TaskStatus, to: TaskStatus },
    #[error("unknown task {0}")]
    UnknownTask(u64),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TaskLog {
    pub records: Vec<TaskRecord>,
}

impl TaskLog {
    /// Opens a running record with the next sequence number.
    pub fn start(&mut self, tool_id: &str, now: DateTime<Utc>) -> u64 {
        let seq = self.records.last().map_or(1, |r| r.seq + 1);
        self.records.push(TaskRecord {
            seq,
            tool_id: tool_id.to_string(),
            status: TaskStatus::Running,
            started: now,
            finished: None,
            summary: String::new(),
        });
        seq
    }

    /// Only `running -> done | failed` is allowed; finished records are
    /// immutable.
    pub fn transition(
        &mut self,
        seq: u64,
        to: TaskStatus,
        now: DateTime<Utc>,
        summary: &str,
    ) -> Result<&TaskRecord, TaskError> {
        let record = self
            .records
            .iter_mut()
            .find(|r| r.seq == seq)
            .ok_or(TaskError::UnknownTask(seq))?;
        if record.status != TaskStatus::Running || to == TaskStatus::Running {
            return Err(TaskError::InvalidTransition {
                seq,
                from: record.status,
                to,
            });
        }
        record.status = to;
        record.finished = Some(now.max(record.started));
        record.summary = summary.to_string();
        Ok(record)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingClarification {
    pub tool_id: String,
    pub collected: BTreeMap<String, Value>,
    pub missing: Vec<String>,
    pub attempts: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolGapRecord {
    pub query: String,
    pub best_tool_id: String,
    pub best_distance: f64,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Casual,
    Done,
    Failed,
    Clarification,
    Abandoned,
    ToolGap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssistantResponse {
    pub text: String,
    pub renderables: Vec<Table>,
    pub steps: Vec<String>,
    pub tasks: Vec<TaskRecord>,
    pub outcome: Outcome,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub session_id: String,
    pub created: DateTime<Utc>,
    pub messages: Vec<Message>,
    pub workspace: Workspace,
    pub task_log: TaskLog,
    pub pending: Option<PendingClarification>,
    pub gaps: Vec<ToolGapRecord>,
}

impl SessionState {
    pub fn new(session_id: impl Into<String>, created: DateTime<Utc>) -> Self {
        SessionState {
            session_id: session_id.into(),
            created,
            messages: Vec::new(),
            workspace: Workspace::default(),
            task_log: TaskLog::default(),
            pending: None,
            gaps: Vec::new(),
        }
    }
}

/// The parts of the pipeline shared by every session.
pub struct Assistant {
    pub tools: ToolManager,
    pub index: VectorIndex,
    pub embedder: Arc<dyn Embedder>,
    pub gateway: LlmGateway,
    pub clock: Arc<dyn Clock>,
    pub tau: f64,
}

/// Builder for one turn's reply.
struct Turn {
    steps: Vec<String>,
    tasks: Vec<TaskRecord>,
    renderables: Vec<Table>,
}

impl Turn {
    fn step(&mut self, s: impl Into<String>) {
        self.steps.push(s.into());
    }
}

fn describe_params(params: &BTreeMap<String, Value>) -> String {
    if params.is_empty() {
        return "none".to_string();
    }
    params
        .iter()
        .map(|(k, v)| {
            let v = match v {
                Value::String(s) => s.clone(),
                Value::Number(n) => n.as_f64().map_or(n.to_string(), format_number),
                Value::Array(a) => a
                    .iter()
                    .map(|x| x.as_str().map_or(x.to_string(), str::to_string))
                    .collect::<Vec<_>>()
                    .join("+"),
                other => other.to_string(),
            };
            format!("{k}={v}")
        })
        .collect::<Vec<_>>()
        .join(", ")
}

fn failure_stage(e: &ToolError) -> (String, String) {
    match e {
        ToolError::Handler { stage, detail } => (stage.clone(), detail.clone()),
        ToolError::UnknownTool(t) => ("dispatch".into(), format!("unknown tool {t}")),
        ToolError::NoInstanceLoaded => ("model selection".into(), "no planning data has been loaded".into()),
        ToolError::Llm(e) => ("parameter extraction".into(), e.to_string()),
    }
}

/// Question asking for the missing parameters of `pending`, in schema order.
pub fn ask_clarification(pending: &PendingClarification, contract: &ToolContract, ws: &Workspace) -> String {
    let mut lines = vec![format!(
        "I can answer this with the {} tool, but I need a few more details:",
        contract.id
    )];
    if pending.missing.iter().any(|m| m == MODEL_PARAM) {
        let models = ws
            .models
            .iter()
            .map(|m| format!("{} ({})", m.id, m.name))
            .collect::<Vec<_>>()
            .join(", ");
        lines.push(format!("- {MODEL_PARAM}: which planning model to use, one of {models}"));
    }
    for spec in &contract.input_schema {
        if pending.missing.contains(&spec.name) {
            lines.push(format!("- {}: {}", spec.name, spec.description));
        }
    }
    lines.join("\n")
}

impl Assistant {
    pub fn new(tools: ToolManager, index: VectorIndex, embedder: Arc<dyn Embedder>, gateway: LlmGateway) -> Self {
        Assistant {
            tools,
            index,
            embedder,
            gateway,
            clock: Arc::new(SystemClock),
            tau: DEFAULT_TAU,
        }
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn new_session(&self, session_id: impl Into<String>) -> SessionState {
        SessionState::new(session_id, self.clock.now())
    }

    /// Loads an instance into the session and solves its baseline.
    /// Returns `(instance id, model id, plan id)`.
    pub fn ingest(
        &self,
        session: &mut SessionState,
        instance: PlanningInstance,
    ) -> Result<(String, String, String), ToolError> {
        session.workspace.ingest(instance)
    }

    fn vocabulary(&self, ws: &Workspace) -> Vocabulary {
        let examples: Vec<&str> = self
            .tools
            .catalog
            .contracts()
            .flat_map(|c| c.examples.iter().map(String::as_str))
            .collect();
        let newest = ws.models.last().and_then(|m| ws.effective_instance(m).ok());
        Vocabulary::new(examples, newest.as_ref())
    }

    pub fn handle_message(&self, session: &mut SessionState, text: &str) -> AssistantResponse {
        session.messages.push(Message {
            role: Role::User,
            text: text.to_string(),
            timestamp: self.clock.now(),
        });
        let mut turn = Turn {
            steps: Vec::new(),
            tasks: Vec::new(),
            renderables: Vec::new(),
        };
        let (reply, outcome) = self.run_pipeline(session, text, &mut turn);
        let timestamp = self.clock.now();
        session.messages.push(Message {
            role: Role::Assistant,
            text: reply.clone(),
            timestamp,
        });
        AssistantResponse {
            text: reply,
            renderables: turn.renderables,
            steps: turn.steps,
            tasks: turn.tasks,
            outcome,
            timestamp,
        }
    }

    fn run_pipeline(&self, session: &mut SessionState, text: &str, turn: &mut Turn) -> (String, Outcome) {
        if let Some(pending) = session.pending.take() {
            match self.follow_up(session, pending, text, turn) {
                Some(done) => return done,
                None => turn.step("Treated the message as a new request"),
            }
        }

        let vocabulary = self.vocabulary(&session.workspace);
        let intent = match self.gateway.classify_intent(&session.messages, text, &vocabulary) {
            Ok(intent) => intent,
            Err(e) => {
                turn.step(format!("Intent classifier unavailable ({e}); used keyword rules"));
                LlmGateway::stub()
                    .classify_intent(&session.messages, text, &vocabulary)
                    .unwrap_or(Intent::CasualConversation)
            }
        };
        turn.step(format!("Classified intent as {intent}"));
        if intent == Intent::CasualConversation {
            return (self.gateway.casual_reply(&session.messages), Outcome::Casual);
        }

        let retrieval = match retrieve_with_tau(text, &self.index, RETRIEVAL_K, self.embedder.as_ref(), self.tau) {
            Ok(r) => r,
            Err(e) => {
                turn.step(format!("Tool retrieval failed: {e}"));
                let now = self.clock.now();
                let seq = session.task_log.start("tool_retrieval", now);
                if let Ok(r) = session.task_log.transition(seq, TaskStatus::Failed, now, &e.to_string()) {
                    turn.tasks.push(r.clone());
                }
                return (
                    format!("Sorry, something went wrong during tool retrieval: {e}."),
                    Outcome::Failed,
                );
            }
        };
        let (best, distance) = retrieval.best();
        if !retrieval.confident {
            turn.step(format!(
                "No tool within distance {}; nearest is {best} at {distance:.3}",
                format_number(self.tau)
            ));
            session.gaps.push(ToolGapRecord {
                query: text.to_string(),
                best_tool_id: best.to_string(),
                best_distance: distance,
                timestamp: self.clock.now(),
            });
            turn.step("Logged the request as a tool gap");
            let suggestion = self
                .tools
                .contract(best)
                .map_or(String::new(), |c| format!(" The closest tool is {best}: {}", c.description));
            return (
                format!(
                    "I don't have a tool that can answer this request yet, so I have logged it for the team.{suggestion}"
                ),
                Outcome::ToolGap,
            );
        }
        let tool_id = best.to_string();
        turn.step(format!("Retrieved tool {tool_id} (distance {distance:.3})"));
        self.attempt(session, &tool_id, text, BTreeMap::new(), 0, turn)
    }

    /// Continues a pending clarification. `None` means the message does not
    /// look like an answer and should be handled as a fresh request.
    fn follow_up(
        &self,
        session: &mut SessionState,
        pending: PendingClarification,
        text: &str,
        turn: &mut Turn,
    ) -> Option<(String, Outcome)> {
        let progressed = self
            .prepare(session, &pending.tool_id, text, &pending.collected, turn)
            .ok()
            .is_some_and(|p| match p {
                Preparation::Ready(_) => true,
                Preparation::MissingParams { missing, collected } => {
                    collected.len() > pending.collected.len() || missing.len() < pending.missing.len()
                }
            });
        if !progressed {
            if let Ok(r) = retrieve_with_tau(text, &self.index, 1, self.embedder.as_ref(), self.tau) {
                let (best, _) = r.best();
                if r.confident && best != pending.tool_id {
                    turn.step(format!("Dropped the pending {} request", pending.tool_id));
                    return None;
                }
            }
        }
        turn.step(format!("Resumed {} with the clarification", pending.tool_id));
        let tool_id = pending.tool_id.clone();
        Some(self.attempt(session, &tool_id, text, pending.collected, pending.attempts + 1, turn))
    }

    fn prepare(
        &self,
        session: &SessionState,
        tool_id: &str,
        text: &str,
        prior: &BTreeMap<String, Value>,
        turn: &mut Turn,
    ) -> Result<Preparation, ToolError> {
        let ws = &session.workspace;
        match self
            .tools
            .prepare_invocation(tool_id, ws, &session.messages, text, prior, &self.gateway)
        {
            Err(ToolError::Llm(e)) => {
                turn.step(format!("Parameter extraction unavailable ({e}); used rule-based extraction"));
                self.tools
                    .prepare_invocation(tool_id, ws, &session.messages, text, prior, &LlmGateway::stub())
            }
            other => other,
        }
    }

    /// Prepares and runs `tool_id`. `attempts` counts earlier clarification
    /// rounds for this invocation.
    fn attempt(
        &self,
        session: &mut SessionState,
        tool_id: &str,
        text: &str,
        prior: BTreeMap<String, Value>,
        attempts: u32,
        turn: &mut Turn,
    ) -> (String, Outcome) {
        let preparation = self.prepare(session, tool_id, text, &prior, turn);
        let invocation = match preparation {
            Ok(Preparation::Ready(inv)) => inv,
            Ok(Preparation::MissingParams { missing, collected }) => {
                turn.step(format!("Missing parameters: {}", missing.join(", ")));
                let contract = self.tools.contract(tool_id).expect("retrieved tools are bound");
                if attempts >= MAX_CLARIFICATION_ATTEMPTS {
                    turn.step("Abandoned the request after repeated clarification");
                    return (
                        format!(
                            "I still could not work out {} for the {tool_id} tool, so I have cancelled that request. Please ask again with all the details.",
                            missing.join(", ")
                        ),
                        Outcome::Abandoned,
                    );
                }
                let pending = PendingClarification {
                    tool_id: tool_id.to_string(),
                    collected,
                    missing,
                    attempts,
                };
                let question = ask_clarification(&pending, contract, &session.workspace);
                turn.step("Asked for the missing parameters");
                session.pending = Some(pending);
                return (question, Outcome::Clarification);
            }
            Err(e) => return self.fail(session, tool_id, e, turn),
        };
        let model = invocation.model_id.as_deref().unwrap_or("none");
        turn.step(format!(
            "Selected model {model}; parameters: {}",
            describe_params(&invocation.params)
        ));

        let seq = session.task_log.start(tool_id, self.clock.now());
        let plans_before = session.workspace.plans.len();
        match self.tools.execute(&mut session.workspace, &invocation) {
            Ok(output) => {
                let saved = session
                    .workspace
                    .latest_plan_id()
                    .filter(|_| session.workspace.plans.len() > plans_before);
                turn.step(match saved {
                    Some(pid) => format!("Executed {tool_id}; saved {pid}"),
                    None => format!("Executed {tool_id}"),
                });
                let summary = output.nl_text.clone();
                if let Ok(r) = session
                    .task_log
                    .transition(seq, TaskStatus::Done, self.clock.now(), &summary)
                {
                    turn.tasks.push(r.clone());
                }
                let reply = self.gateway.refine_response(&session.messages, &output.nl_text);
                turn.step("Refined the tool output");
                turn.renderables = output.renderables;
                (reply, Outcome::Done)
            }
            Err(e) => {
                let (stage, detail) = failure_stage(&e);
                turn.step(format!("{tool_id} failed during {stage}"));
                if let Ok(r) = session.task_log.transition(
                    seq,
                    TaskStatus::Failed,
                    self.clock.now(),
                    &format!("{stage}: {detail}"),
                ) {
                    turn.tasks.push(r.clone());
                }
                (
                    format!("Sorry, the {tool_id} tool failed during {stage}: {detail}."),
                    Outcome::Failed,
                )
            }
        }
    }

    fn fail(&self, session: &mut SessionState, tool_id: &str, e: ToolError, turn: &mut Turn) -> (String, Outcome) {
        let (stage, detail) = failure_stage(&e);
        turn.step(format!("{tool_id} failed during {stage}"));
        let now = self.clock.now();
        let seq = session.task_log.start(tool_id, now);
        if let Ok(r) = session
            .task_log
            .transition(seq, TaskStatus::Failed, now, &format!("{stage}: {detail}"))
        {
            turn.tasks.push(r.clone());
        }
        let hint = if matches!(e, ToolError::NoInstanceLoaded) {
            " Please upload a planning dataset first."
        } else {
            ""
        };
        (
            format!("Sorry, the {tool_id} tool failed during {stage}: {detail}.{hint}"),
            Outcome::Failed,
        )
    }
}
