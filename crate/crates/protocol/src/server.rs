//! Transport-independent protocol server: turns inbound frames into session
//! commands and acknowledgments, and ticks into publications.

use std::collections::BTreeMap;

use behavior_forge::action::action_from_value;
use behavior_forge::assets;
use behavior_forge::executor::{Edit, StatusEvent};
use behavior_forge::session::Session;
use behavior_forge::sim::{Scene, DT};
use behavior_forge::stance::{DEFAULT_SWING_DURATION, DEFAULT_TRANSFER_DURATION};
use behavior_forge::{ActionSequence, Pose6D, Side};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::envelope::Envelope;

pub type ClientId = u64;

/// Publication rates, Hz. Each is rounded to a whole number of ticks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub robot_state: f64,
    pub detections: f64,
    pub point_cloud: f64,
}

impl Default for Rates {
    fn default() -> Self {
        Self {
            robot_state: 50.0,
            detections: 10.0,
            point_cloud: 5.0,
        }
    }
}

fn period_ticks(hz: f64) -> u64 {
    if !(hz > 0.0) {
        return u64::MAX;
    }
    ((1.0 / (hz * DT)).round() as u64).max(1)
}

/// A message before it is stamped with a connection's sequence number.
#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub kind: &'static str,
    pub timestamp: f64,
    pub payload: Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Client(ClientId),
    All,
}

/// An inbound frame as it arrived, for replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedFrame {
    /// Simulator tick count when the frame was handled.
    pub tick: u64,
    pub client: ClientId,
    pub text: String,
}

#[derive(Debug, Default)]
struct ClientState {
    last_seq: Option<u64>,
}

#[derive(Debug)]
struct CommandError {
    code: String,
    message: String,
}

impl CommandError {
    fn new(code: impl Into<String>, message: impl ToString) -> Self {
        Self {
            code: code.into(),
            message: message.to_string(),
        }
    }

    fn bad_payload(message: impl ToString) -> Self {
        Self::new("InvalidPayload", message)
    }
}

pub struct ServerCore {
    session: Session,
    rates: Rates,
    clients: BTreeMap<ClientId, ClientState>,
    next_client: ClientId,
    log: Vec<LoggedFrame>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SetAutomatic {
    on: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Empty {}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct IkPreview {
    side: Side,
    goal: Pose6D,
    frame: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StancePreview {
    left_foot: Pose6D,
    right_foot: Pose6D,
    frame: String,
    #[serde(default)]
    swing_duration: Option<f64>,
    #[serde(default)]
    transfer_duration: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SequenceEdit {
    op: String,
    index: usize,
    #[serde(default)]
    action: Option<Value>,
}

fn payload<T: for<'de> Deserialize<'de>>(value: &Value) -> Result<T, CommandError> {
    T::deserialize(value).map_err(CommandError::bad_payload)
}

fn bundled_scene(name: &str) -> Option<Scene> {
    match name.trim_end_matches(".json") {
        "door_scene" => Some(assets::door_scene()),
        "table_scene" => Some(assets::table_scene()),
        _ => None,
    }
}

fn bundled_behavior(name: &str) -> Option<ActionSequence> {
    match name.trim_end_matches(".json").trim_end_matches(".behavior") {
        "push_door" => Some(assets::push_door()),
        "pick_place_can" => Some(assets::pick_place_can()),
        _ => None,
    }
}

pub fn status_payload(e: &StatusEvent) -> Value {
    serde_json::to_value(e).expect("status events serialize")
}

impl ServerCore {
    pub fn new(session: Session, rates: Rates) -> Self {
        Self {
            session,
            rates,
            clients: BTreeMap::new(),
            next_client: 1,
            log: Vec::new(),
        }
    }

    pub fn session(&self) -> &Session {
        &self.session
    }

    pub fn rates(&self) -> Rates {
        self.rates
    }

    /// Inbound frames handled so far, in order.
    pub fn frame_log(&self) -> &[LoggedFrame] {
        &self.log
    }

    fn now(&self) -> f64 {
        self.session.world().sim_time()
    }

    fn message(&self, kind: &'static str, payload: Value) -> Message {
        Message {
            kind,
            timestamp: self.now(),
            payload,
        }
    }

    fn executor_state(&self) -> Value {
        let ex = self.session.executor();
        json!({
            "selected": ex.selected(),
            "mode": ex.mode(),
            "statuses": ex.statuses(),
        })
    }

    fn sequence_state(&self) -> Message {
        let mut state = self.executor_state();
        state["sequence"] = self.session.sequence().to_value();
        self.message("sequence_state", state)
    }

    /// Full state snapshot sent first on every connection.
    pub fn hello(&self) -> Message {
        let world = self.session.world();
        let mut payload = self.executor_state();
        payload["sequence"] = self.session.sequence().to_value();
        payload["robot_model"] = serde_json::to_value(world.model().document()).expect("model serializes");
        payload["scene"] = serde_json::to_value(world.scene()).expect("scene serializes");
        payload["frames"] = serde_json::to_value(world.frames().records()).expect("frames serialize");
        payload["world"] = serde_json::to_value(world.snapshot()).expect("snapshot serializes");
        payload["rates"] = serde_json::to_value(self.rates).expect("rates serialize");
        self.message("hello", payload)
    }

    pub fn connect(&mut self) -> (ClientId, Message) {
        let id = self.next_client;
        self.next_client += 1;
        self.clients.insert(id, ClientState::default());
        (id, self.hello())
    }

    pub fn disconnect(&mut self, client: ClientId) {
        self.clients.remove(&client);
    }

    fn status_messages(&mut self) -> Vec<(Target, Message)> {
        self.session
            .take_events()
            .iter()
            .map(|e| {
                (
                    Target::All,
                    Message {
                        kind: "action_status",
                        timestamp: e.sim_time,
                        payload: status_payload(e),
                    },
                )
            })
            .collect()
    }

    /// Handles one inbound text frame from `client`.
    pub fn handle_text(&mut self, client: ClientId, text: &str) -> Vec<(Target, Message)> {
        self.log.push(LoggedFrame {
            tick: self.session.world().ticks(),
            client,
            text: text.to_string(),
        });
        let env = match Envelope::parse(text) {
            Ok(env) => env,
            Err(e) => {
                let payload = json!({ "reason": e.reason, "message": e.message, "seq": e.seq });
                return vec![(Target::Client(client), self.message("protocol_error", payload))];
            }
        };
        let state = self.clients.entry(client).or_default();
        if state.last_seq.is_some_and(|last| env.seq <= last) {
            let payload = json!({
                "reason": "seq_regression",
                "message": format!("seq {} is not greater than {}", env.seq, state.last_seq.unwrap_or(0)),
                "seq": env.seq,
            });
            return vec![(Target::Client(client), self.message("protocol_error", payload))];
        }
        state.last_seq = Some(env.seq);

        let (result, changed, reload) = self.dispatch(&env);
        let ack = match result {
            Ok(result) => json!({ "ack_seq": env.seq, "result": result }),
            Err(e) => json!({ "ack_seq": env.seq, "error": { "code": e.code, "message": e.message } }),
        };
        let mut out = vec![(Target::Client(client), self.message("ack", ack))];
        out.extend(self.status_messages());
        if reload {
            out.push((Target::All, self.hello()));
        } else if changed {
            out.push((Target::All, self.sequence_state()));
        }
        out
    }

    /// Runs a command. Returns the ack result, whether the sequence or
    /// execution state changed, and whether the whole scene was reloaded.
    fn dispatch(&mut self, env: &Envelope) -> (Result<Value, CommandError>, bool, bool) {
        let p = &env.payload;
        match env.kind.as_str() {
            "execute_manual" => {
                let r = payload::<Empty>(p).and_then(|_| {
                    let index = self.session.executor().selected();
                    self.session
                        .execute_manual()
                        .map(|_| json!({ "index": index }))
                        .map_err(|e| CommandError::new(e.code(), e))
                });
                let changed = r.is_ok();
                (r, changed, false)
            }
            "set_automatic" => {
                let r = payload::<SetAutomatic>(p).map(|a| {
                    self.session.set_automatic(a.on);
                    json!({ "mode": self.session.executor().mode() })
                });
                let changed = r.is_ok();
                (r, changed, false)
            }
            "abort" => {
                let r = payload::<Empty>(p).map(|_| {
                    self.session.abort();
                    json!({})
                });
                let changed = r.is_ok();
                (r, changed, false)
            }
            "sequence_replace" => {
                let r = p
                    .get("sequence")
                    .ok_or_else(|| CommandError::bad_payload("missing `sequence`"))
                    .and_then(|v| ActionSequence::from_value(v).map_err(|e| CommandError::new("ValidationFailed", e)))
                    .and_then(|seq| {
                        self.session
                            .replace_sequence(seq)
                            .map_err(|e| CommandError::new(e.code(), e))
                    })
                    .map(|_| json!({ "len": self.session.sequence().len() }));
                let changed = r.is_ok();
                (r, changed, false)
            }
            "sequence_edit" => {
                let r = payload::<SequenceEdit>(p).and_then(|edit| self.apply_edit(edit));
                let changed = r.is_ok();
                (r, changed, false)
            }
            "load_behavior" => {
                let r = self.load_behavior(p);
                let changed = r.is_ok();
                (r, changed, false)
            }
            "load_scene" => {
                let r = self.load_scene(p);
                let reload = r.is_ok();
                (r, false, reload)
            }
            "request_ik_preview" => (self.ik_preview(p), false, false),
            "request_stance_preview" => (self.stance_preview(p), false, false),
            other => (
                Err(CommandError::new("UnknownType", format!("unknown message type `{other}`"))),
                false,
                false,
            ),
        }
    }

    fn apply_edit(&mut self, edit: SequenceEdit) -> Result<Value, CommandError> {
        let action = || {
            let v = edit
                .action
                .as_ref()
                .ok_or_else(|| CommandError::bad_payload("missing `action`"))?;
            action_from_value(v).map_err(|e| CommandError::new("ValidationFailed", e))
        };
        let index = edit.index;
        let edit = match edit.op.as_str() {
            "insert" => Edit::Insert { index, action: action()? },
            "update" => Edit::Update { index, action: action()? },
            "remove" => Edit::Remove { index },
            other => return Err(CommandError::bad_payload(format!("unknown edit op `{other}`"))),
        };
        self.session
            .apply_edit(edit)
            .map_err(|e| CommandError::new(e.code(), e))?;
        Ok(json!({ "len": self.session.sequence().len() }))
    }

    fn load_behavior(&mut self, p: &Value) -> Result<Value, CommandError> {
        let seq = match (p.get("name").and_then(Value::as_str), p.get("behavior")) {
            (Some(name), None) => {
                bundled_behavior(name).ok_or_else(|| CommandError::new("NotFound", format!("no bundled behavior `{name}`")))?
            }
            (None, Some(v)) => ActionSequence::from_value(v).map_err(|e| CommandError::new("ValidationFailed", e))?,
            _ => return Err(CommandError::bad_payload("give exactly one of `name` or `behavior`")),
        };
        self.session
            .replace_sequence(seq)
            .map_err(|e| CommandError::new(e.code(), e))?;
        Ok(json!({ "len": self.session.sequence().len() }))
    }

    fn load_scene(&mut self, p: &Value) -> Result<Value, CommandError> {
        let scene = match (p.get("name").and_then(Value::as_str), p.get("scene")) {
            (Some(name), None) => {
                bundled_scene(name).ok_or_else(|| CommandError::new("NotFound", format!("no bundled scene `{name}`")))?
            }
            (None, Some(v)) => {
                let bytes = serde_json::to_vec(v).expect("values serialize");
                Scene::from_bytes(&bytes).map_err(|e| CommandError::new("InvalidScene", e))?
            }
            _ => return Err(CommandError::bad_payload("give exactly one of `name` or `scene`")),
        };
        self.session
            .load_scene(scene)
            .map_err(|e| CommandError::new(e.code(), e))?;
        Ok(json!({ "frames": self.session.registered_frames() }))
    }

    fn ik_preview(&self, p: &Value) -> Result<Value, CommandError> {
        let req: IkPreview = payload(p)?;
        let sol = self
            .session
            .ik_preview(req.side, &req.goal, &req.frame)
            .map_err(|e| CommandError::new(e.code(), e))?;
        let mut v = serde_json::to_value(&sol).expect("solutions serialize");
        let world = self.session.world().chest_pose().compose(&sol.achieved_pose);
        v["achieved_world_pose"] = serde_json::to_value(world).expect("poses serialize");
        Ok(v)
    }

    fn stance_preview(&self, p: &Value) -> Result<Value, CommandError> {
        let req: StancePreview = payload(p)?;
        let swing = req.swing_duration.unwrap_or(DEFAULT_SWING_DURATION);
        let transfer = req.transfer_duration.unwrap_or(DEFAULT_TRANSFER_DURATION);
        if !(swing > 0.0 && transfer > 0.0) {
            return Err(CommandError::bad_payload("durations must be positive"));
        }
        let plan = self
            .session
            .stance_preview(&req.left_foot, &req.right_foot, &req.frame, swing, transfer)
            .map_err(|e| CommandError::new(e.code(), e))?;
        Ok(json!({
            "steps": plan.steps,
            "final_stance": plan.final_stance(),
            "duration": plan.duration(),
        }))
    }

    /// Advances the session one tick and returns what to publish.
    pub fn tick(&mut self) -> Vec<Message> {
        self.session.step();
        let mut out: Vec<Message> = self.status_messages().into_iter().map(|(_, m)| m).collect();
        let tick = self.session.world().ticks();
        let world = self.session.world();
        if tick % period_ticks(self.rates.robot_state) == 0 {
            let payload = json!({
                "world": world.snapshot(),
                "frames": world.frames().records(),
                "executor": self.executor_state(),
            });
            out.push(self.message("robot_state", payload));
        }
        let det_period = period_ticks(self.rates.detections);
        if tick % det_period == 0 {
            let frame = tick / det_period;
            let payload = json!({
                "camera": world.camera_pose(),
                "detections": world.detect(frame),
            });
            out.push(self.message("detections", payload));
        }
        let cloud_period = period_ticks(self.rates.point_cloud);
        if tick % cloud_period == 0 {
            let cloud = world.point_cloud(tick / cloud_period);
            out.push(self.message("point_cloud", serde_json::to_value(cloud).expect("clouds serialize")));
        }
        out
    }
}

/// Feeds a recorded frame log into `core` at the ticks it was first handled,
/// then runs on to `until_tick`. Returns every message produced, in order.
pub fn replay(core: &mut ServerCore, log: &[LoggedFrame], until_tick: u64) -> Vec<(Target, Message)> {
    let mut out = Vec::new();
    let mut frames = log.iter().peekable();
    loop {
        while let Some(f) = frames.next_if(|f| f.tick <= core.session.world().ticks()) {
            if !core.clients.contains_key(&f.client) {
                core.clients.insert(f.client, ClientState::default());
                core.next_client = core.next_client.max(f.client + 1);
            }
            out.extend(core.handle_text(f.client, &f.text));
        }
        if core.session.world().ticks() >= until_tick && frames.peek().is_none() {
            return out;
        }
        out.extend(core.tick().into_iter().map(|m| (Target::All, m)));
    }
}
