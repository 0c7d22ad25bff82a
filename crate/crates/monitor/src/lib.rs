//! A small embedded web server for watching and steering a running
//! simulation.
//!
//! The server never touches grid data. It reads immutable snapshots that
//! the run loop publishes at iteration boundaries, and it hands requests
//! that need the simulation (steering, control actions, reductions) to the
//! run loop through a queue drained at the next boundary.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::{BTreeMap, VecDeque};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;
use std::sync::{Arc, Condvar, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};
use tapestry_core::driver::ReduceOp;
use tapestry_core::flesh::{FleshError, ParamValue, ParameterSpec, Simulation, SteeringChange};
use tapestry_core::io;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MonitorError {
    #[error("cannot start the monitor on {addr}: {reason}")]
    Bind { addr: String, reason: String },
    #[error(transparent)]
    Flesh(#[from] FleshError),
    #[error(transparent)]
    Io(#[from] io::IoError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunState {
    Running,
    Paused,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatusSnapshot {
    pub iteration: u64,
    pub time: f64,
    pub active_bin: Option<String>,
    pub nranks: usize,
    /// Root-mean-square of every variable over the coarse level.
    pub norms: BTreeMap<String, f64>,
    pub uptime_seconds: f64,
    pub state: RunState,
    /// True once the run loop has stopped for good.
    pub finished: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Pause,
    Resume,
    Checkpoint,
    Terminate,
}

/// An entry of `GET /log`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub seq: u64,
    pub iteration: u64,
    /// `steer`, `reject`, `pause`, `resume`, `checkpoint`, `terminate` or `error`.
    pub kind: String,
    pub message: String,
}

enum Command {
    Steer { name: String, value: ParamValue },
    Control(Action),
    Reduce { var: String, op: ReduceOp, reply: mpsc::Sender<Result<f64, String>> },
}

#[derive(Default)]
struct State {
    status: String,
    timers: String,
    params: String,
    steering: Vec<SteeringChange>,
    log: Vec<LogEntry>,
    queue: VecDeque<Command>,
    paused: bool,
    terminate: bool,
}

/// Request/response core shared by the HTTP thread and the run loop.
pub struct Monitor {
    state: Mutex<State>,
    wake: Condvar,
    specs: BTreeMap<String, ParameterSpec>,
    variables: Vec<String>,
    started: Instant,
    checkpoint_dir: PathBuf,
    reduce_timeout: Duration,
    published: Mutex<Vec<u64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Response {
    pub status: u16,
    pub body: String,
}

impl Response {
    fn json(status: u16, v: Value) -> Self {
        Self {
            status,
            body: v.to_string(),
        }
    }

    fn raw(body: &str) -> Self {
        Self {
            status: 200,
            body: body.to_string(),
        }
    }

    fn error(status: u16, message: impl Into<String>) -> Self {
        Self::json(status, json!({ "error": message.into() }))
    }
}

#[derive(Deserialize)]
struct SteerBody {
    name: String,
    value: Value,
}

#[derive(Deserialize)]
struct ControlBody {
    action: Action,
}

fn param_value(v: &Value) -> Option<ParamValue> {
    match v {
        Value::Bool(b) => Some(ParamValue::Bool(*b)),
        Value::Number(n) => n.as_i64().map(ParamValue::Int).or_else(|| n.as_f64().map(ParamValue::Real)),
        Value::String(s) => Some(ParamValue::Str(s.clone())),
        _ => None,
    }
}

impl Monitor {
    /// A monitor for `sim`; checkpoints requested over HTTP go under
    /// `checkpoint_dir`. The iteration-0 snapshot is published immediately.
    pub fn new(sim: &Simulation, checkpoint_dir: impl Into<PathBuf>) -> Arc<Self> {
        let m = Arc::new(Self {
            state: Mutex::new(State::default()),
            wake: Condvar::new(),
            specs: sim.params().specs().clone(),
            variables: sim.driver().layout().variable_names(),
            started: Instant::now(),
            checkpoint_dir: checkpoint_dir.into(),
            reduce_timeout: Duration::from_secs(30),
            published: Mutex::new(Vec::new()),
        });
        m.publish(sim, false);
        m
    }

    /// Iterations for which a snapshot has been published, in order.
    /// Republishing the same iteration (while paused, or when the run
    /// ends) refreshes the snapshot but is not a new publication.
    pub fn published(&self) -> Vec<u64> {
        self.published.lock().expect("monitor lock").clone()
    }

    pub fn is_paused(&self) -> bool {
        self.state.lock().expect("monitor lock").paused
    }

    pub fn snapshot(&self) -> StatusSnapshot {
        serde_json::from_str(&self.state.lock().expect("monitor lock").status).expect("snapshots are valid json")
    }

    pub fn log(&self) -> Vec<LogEntry> {
        self.state.lock().expect("monitor lock").log.clone()
    }

    /// Record the state of `sim` as the current snapshot.
    pub fn publish(&self, sim: &Simulation, finished: bool) {
        let d = sim.driver();
        let norms = self
            .variables
            .iter()
            .filter_map(|v| d.reduce(v, ReduceOp::L2).ok().map(|x| (v.clone(), x)))
            .collect();
        let mut st = self.state.lock().expect("monitor lock");
        let snap = StatusSnapshot {
            iteration: sim.iteration(),
            time: sim.time(),
            active_bin: sim.active_bin().map(|b| b.to_string()),
            nranks: d.nranks(),
            norms,
            uptime_seconds: self.started.elapsed().as_secs_f64(),
            state: if st.paused { RunState::Paused } else { RunState::Running },
            finished,
        };
        let snap_iteration = snap.iteration;
        st.status = serde_json::to_string(&snap).expect("snapshot serializes");
        st.timers = serde_json::to_string(&sim.timer_report()).expect("timers serialize");
        let params: Vec<Value> = sim
            .params()
            .specs()
            .iter()
            .map(|(name, spec)| {
                json!({
                    "name": name,
                    "kind": spec.kind,
                    "value": sim.params().get(name).ok(),
                    "default": spec.default,
                    "steerable": spec.steerable,
                    "min": spec.min,
                    "max": spec.max,
                    "allowed": spec.allowed,
                    "description": spec.description,
                })
            })
            .collect();
        st.params = Value::Array(params).to_string();
        st.steering = sim.steering_log().to_vec();
        drop(st);
        let mut published = self.published.lock().expect("monitor lock");
        if published.last() != Some(&snap_iteration) {
            published.push(snap_iteration);
        }
    }

    fn push_log(st: &mut State, iteration: u64, kind: &str, message: String) {
        let seq = st.log.len() as u64;
        st.log.push(LogEntry {
            seq,
            iteration,
            kind: kind.to_string(),
            message,
        });
    }

    fn enqueue(&self, c: Command) {
        self.state.lock().expect("monitor lock").queue.push_back(c);
        self.wake.notify_all();
    }

    /// Answer one request. `target` is the path with an optional query.
    pub fn handle_request(&self, method: &str, target: &str, body: &str) -> Response {
        let (path, query) = target.split_once('?').unwrap_or((target, ""));
        let path = path.trim_end_matches('/');
        match (method, path) {
            ("GET", "/status") => Response::raw(&self.state.lock().expect("monitor lock").status),
            ("GET", "/timers") => Response::raw(&self.state.lock().expect("monitor lock").timers),
            ("GET", "/params") => Response::raw(&self.state.lock().expect("monitor lock").params),
            ("GET", "/log") => {
                let st = self.state.lock().expect("monitor lock");
                Response::json(200, json!({ "entries": st.log, "steering": st.steering }))
            }
            ("GET", "/reduce") => self.reduce(query),
            ("POST", "/params") => self.steer(body),
            ("POST", "/control") => match serde_json::from_str::<ControlBody>(body) {
                Ok(c) => {
                    self.enqueue(Command::Control(c.action));
                    Response::json(202, json!({ "queued": c.action }))
                }
                Err(e) => Response::error(400, format!("expected {{\"action\": \"pause|resume|checkpoint|terminate\"}}: {e}")),
            },
            (_, "/status" | "/timers" | "/params" | "/log" | "/reduce" | "/control") => {
                Response::error(405, format!("{method} is not supported on {path}"))
            }
            _ => Response::error(404, format!("no endpoint {path}")),
        }
    }

    fn steer(&self, body: &str) -> Response {
        let req: SteerBody = match serde_json::from_str(body) {
            Ok(r) => r,
            Err(e) => return self.reject(400, format!("expected {{\"name\": ..., \"value\": ...}}: {e}")),
        };
        let Some(spec) = self.specs.get(&req.name) else {
            return self.reject(404, format!("unknown parameter {}", req.name));
        };
        if !spec.steerable {
            return self.reject(403, format!("parameter {} is not steerable", req.name));
        }
        let value = match param_value(&req.value).map(|v| spec.coerce(v)) {
            Some(Ok(v)) => v,
            Some(Err(e)) => return self.reject(400, format!("{} = {}: {e}", req.name, req.value)),
            None => return self.reject(400, format!("value for {} must be a number, boolean or string", req.name)),
        };
        self.enqueue(Command::Steer {
            name: req.name.clone(),
            value: value.clone(),
        });
        Response::json(202, json!({ "queued": { "name": req.name, "value": value } }))
    }

    /// Refuse a steering request, recording the refusal in the log.
    fn reject(&self, status: u16, message: String) -> Response {
        let mut st = self.state.lock().expect("monitor lock");
        let it = serde_json::from_str::<StatusSnapshot>(&st.status).map(|s| s.iteration).unwrap_or(0);
        Self::push_log(&mut st, it, "reject", message.clone());
        drop(st);
        Response::error(status, message)
    }

    fn reduce(&self, query: &str) -> Response {
        let q: BTreeMap<String, String> = form_urlencoded::parse(query.as_bytes()).into_owned().collect();
        let (Some(var), Some(op)) = (q.get("var"), q.get("op")) else {
            return Response::error(400, "expected /reduce?var=<variable>&op=<reduction>");
        };
        let op: ReduceOp = match op.parse() {
            Ok(op) => op,
            Err(e) => return Response::error(400, e),
        };
        let Some(var) = self.resolve(var) else {
            return Response::error(404, format!("unknown variable {var}"));
        };
        let (tx, rx) = mpsc::channel();
        self.enqueue(Command::Reduce {
            var: var.clone(),
            op,
            reply: tx,
        });
        match rx.recv_timeout(self.reduce_timeout) {
            Ok(Ok(value)) => Response::json(200, json!({ "var": var, "op": op, "value": value })),
            Ok(Err(e)) => Response::error(400, e),
            Err(_) => Response::error(503, "the simulation did not reach an iteration boundary in time"),
        }
    }

    fn resolve(&self, var: &str) -> Option<String> {
        if self.variables.iter().any(|v| v == var) {
            return Some(var.to_string());
        }
        let suffix = format!("::{var}");
        let mut hits = self.variables.iter().filter(|v| v.ends_with(&suffix));
        match (hits.next(), hits.next()) {
            (Some(v), None) => Some(v.clone()),
            _ => None,
        }
    }

    /// Drain the queue at an iteration boundary, in arrival order.
    pub fn service(&self, sim: &mut Simulation) {
        let queue = std::mem::take(&mut self.state.lock().expect("monitor lock").queue);
        let it = sim.iteration();
        for c in queue {
            match c {
                Command::Steer { name, value } => {
                    let res = sim.set_parameter(&name, value.clone(), it);
                    let mut st = self.state.lock().expect("monitor lock");
                    match res {
                        Ok(ack) => Self::push_log(&mut st, it, "steer", format!("{} = {} from iteration {}", name, ack.value, it + 1)),
                        Err(e) => Self::push_log(&mut st, it, "reject", format!("{name} = {value}: {e}")),
                    }
                }
                Command::Reduce { var, op, reply } => {
                    let _ = reply.send(sim.driver().reduce(&var, op).map_err(|e| e.to_string()));
                }
                Command::Control(a) => {
                    let mut st = self.state.lock().expect("monitor lock");
                    match a {
                        Action::Pause => {
                            st.paused = true;
                            Self::push_log(&mut st, it, "pause", format!("paused at iteration {it}"));
                        }
                        Action::Resume => {
                            st.paused = false;
                            Self::push_log(&mut st, it, "resume", format!("resumed at iteration {it}"));
                        }
                        Action::Terminate => {
                            st.terminate = true;
                            Self::push_log(&mut st, it, "terminate", format!("terminating at iteration {it}"));
                        }
                        Action::Checkpoint => {
                            drop(st);
                            let dir = self.checkpoint_dir.join(format!("it{it:08}"));
                            let res = io::checkpoint_write(sim.driver(), sim.params(), it, &dir);
                            let mut st = self.state.lock().expect("monitor lock");
                            match res {
                                Ok(_) => Self::push_log(&mut st, it, "checkpoint", dir.display().to_string()),
                                Err(e) => Self::push_log(&mut st, it, "error", format!("checkpoint failed: {e}")),
                            }
                        }
                    }
                }
            }
        }
    }

    fn terminated(&self) -> bool {
        self.state.lock().expect("monitor lock").terminate
    }

    fn wait(&self, timeout: Duration) {
        let st = self.state.lock().expect("monitor lock");
        if st.queue.is_empty() {
            let _ = self.wake.wait_timeout(st, timeout);
        }
    }
}

/// How a monitored run ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunEnd {
    Completed,
    Terminated,
}

/// Evolve `sim` to `flesh::max_iterations`, servicing `monitor` at every
/// iteration boundary. While paused the loop keeps servicing requests and
/// republishing the (unchanged) snapshot. With `linger`, a completed run
/// keeps serving until a terminate request arrives.
pub fn run_monitored(sim: &mut Simulation, monitor: &Monitor, linger: bool) -> Result<RunEnd, MonitorError> {
    let idle = Duration::from_millis(20);
    loop {
        monitor.service(sim);
        if monitor.terminated() {
            monitor.publish(sim, true);
            sim.finish()?;
            return Ok(RunEnd::Terminated);
        }
        let done = sim.iteration() >= sim.params().int("flesh::max_iterations")?.max(0) as u64;
        if monitor.is_paused() || (done && linger) {
            monitor.publish(sim, false);
            monitor.wait(idle);
            continue;
        }
        if done {
            monitor.publish(sim, true);
            sim.finish()?;
            return Ok(RunEnd::Completed);
        }
        sim.step()?;
        monitor.publish(sim, false);
    }
}

/// A running HTTP front end; stopped when dropped.
pub struct Server {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl Server {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

/// Serve `monitor` on `bind:port` (port 0 picks a free port). Each request
/// is answered on its own thread so a pending `/reduce` does not block
/// other readers.
pub fn serve(monitor: Arc<Monitor>, bind: &str, port: u16) -> Result<Server, MonitorError> {
    let addr = format!("{bind}:{port}");
    let server = tiny_http::Server::http(&addr).map_err(|e| MonitorError::Bind {
        addr: addr.clone(),
        reason: e.to_string(),
    })?;
    let local = server.server_addr().to_ip().ok_or_else(|| MonitorError::Bind {
        addr: addr.clone(),
        reason: "not an IP socket".into(),
    })?;
    let stop = Arc::new(AtomicBool::new(false));
    let flag = stop.clone();
    let thread = std::thread::spawn(move || {
        while !flag.load(Ordering::SeqCst) {
            let Ok(Some(mut req)) = server.recv_timeout(Duration::from_millis(50)) else {
                continue;
            };
            let monitor = monitor.clone();
            std::thread::spawn(move || {
                let mut body = String::new();
                let resp = match req.as_reader().read_to_string(&mut body) {
                    Ok(_) => monitor.handle_request(req.method().as_str(), req.url(), &body),
                    Err(e) => Response::error(400, format!("unreadable body: {e}")),
                };
                let headers = [
                    tiny_http::Header::from_bytes("Content-Type", "application/json").expect("static header"),
                    tiny_http::Header::from_bytes("Access-Control-Allow-Origin", "*").expect("static header"),
                ];
                let mut out = tiny_http::Response::from_string(resp.body).with_status_code(resp.status);
                for h in headers {
                    out.add_header(h);
                }
                if let Err(e) = req.respond(out) {
                    log::warn!("monitor: failed to send response: {e}");
                }
            });
        }
    });
    log::info!("monitor listening on http://{local}");
    Ok(Server {
        addr: local,
        stop,
        thread: Some(thread),
    })
}

/// Where HTTP-requested checkpoints go by default for a run.
pub fn default_checkpoint_dir(sim: &Simulation) -> PathBuf {
    match sim.params().str("io::checkpoint_dir") {
        Ok(d) if !d.is_empty() => PathBuf::from(d),
        _ => Path::new("checkpoints").to_path_buf(),
    }
}
