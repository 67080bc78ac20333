//! Live sessions: one browser client at a time drives a session over a
//! websocket while the control loop runs paced to the wall clock.

use std::collections::VecDeque;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Arc};

use anyhow::Context;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::{Html, IntoResponse};
use axum::routing::get;
use axum::Router;
use deepsense::log::SessionLog;
use deepsense::protocol::{Action, Observation, Participant, ParticipantError, Session, WallClock};
use deepsense::SessionConfig;
use tokio::sync::{mpsc as tmpsc, Notify};
use tower_http::services::ServeDir;

use crate::wire::{ClientMsg, ServerMsg, StateMsg};

/// Shown at `/` when no UI bundle directory is given.
const PLACEHOLDER_INDEX: &str = include_str!("placeholder.html");

/// Session time between unchanged state messages, s.
const HEARTBEAT_S: f64 = 0.25;

/// Relays a remote participant: inbound actions arrive on a channel from the
/// socket task, outbound state goes back the same way. Never blocks.
pub struct RemoteParticipant {
    inbox: mpsc::Receiver<Action>,
    outbox: tmpsc::UnboundedSender<ServerMsg>,
    queue: VecDeque<Action>,
    stage_id: u64,
    last_key: Option<(u64, Option<u64>, Option<String>, Option<i64>)>,
    last_sent_t: f64,
}

impl RemoteParticipant {
    pub fn new(inbox: mpsc::Receiver<Action>, outbox: tmpsc::UnboundedSender<ServerMsg>) -> Self {
        Self {
            inbox,
            outbox,
            queue: VecDeque::new(),
            stage_id: 0,
            last_key: None,
            last_sent_t: f64::NEG_INFINITY,
        }
    }
}

impl Participant for RemoteParticipant {
    fn observe(&mut self, obs: &Observation) -> Result<Option<Action>, ParticipantError> {
        loop {
            match self.inbox.try_recv() {
                // safety jumps the queue
                Ok(Action::Safety) => return Ok(Some(Action::Safety)),
                Ok(a) => self.queue.push_back(a),
                Err(mpsc::TryRecvError::Empty) => break,
                Err(mpsc::TryRecvError::Disconnected) => return Err(ParticipantError::Disconnected),
            }
        }

        if obs.stage_started {
            self.stage_id += 1;
        }
        let state = StateMsg::from_observation(obs, self.stage_id);
        // resend on any visible change, on each tenth of a second of
        // countdown, and periodically otherwise
        let key = (
            self.stage_id,
            state.arm_deg.map(f64::to_bits),
            state.prompt.clone(),
            state.countdown_s.map(|c| (c * 10.0).ceil() as i64),
        );
        if self.last_key.as_ref() != Some(&key) || obs.t - self.last_sent_t >= HEARTBEAT_S {
            self.outbox
                .send(ServerMsg::State(state))
                .map_err(|_| ParticipantError::Disconnected)?;
            self.last_key = Some(key);
            self.last_sent_t = obs.t;
        }
        Ok(self.queue.pop_front())
    }
}

pub struct ServeOptions {
    pub cfg: SessionConfig,
    pub addr: SocketAddr,
    pub out_dir: PathBuf,
    pub assets: Option<PathBuf>,
    /// Stop after the first session finishes.
    pub once: bool,
}

struct AppState {
    cfg: SessionConfig,
    out_dir: PathBuf,
    busy: AtomicBool,
    sessions: std::sync::atomic::AtomicUsize,
    done: Notify,
}

/// Clears the busy flag however the connection ends.
struct BusyGuard<'a>(&'a AtomicBool);

impl Drop for BusyGuard<'_> {
    fn drop(&mut self) {
        self.0.store(false, Ordering::SeqCst);
    }
}

pub struct Server {
    listener: tokio::net::TcpListener,
    router: Router,
    state: Arc<AppState>,
    once: bool,
}

impl Server {
    pub async fn bind(opts: ServeOptions) -> anyhow::Result<Self> {
        std::fs::create_dir_all(&opts.out_dir)
            .with_context(|| format!("cannot create output directory {}", opts.out_dir.display()))?;
        if let Some(dir) = &opts.assets {
            anyhow::ensure!(dir.is_dir(), "asset directory {} does not exist", dir.display());
        }
        let listener = tokio::net::TcpListener::bind(opts.addr)
            .await
            .with_context(|| format!("cannot listen on {}", opts.addr))?;
        let state = Arc::new(AppState {
            cfg: opts.cfg,
            out_dir: opts.out_dir,
            busy: AtomicBool::new(false),
            sessions: Default::default(),
            done: Notify::new(),
        });
        let router = router(state.clone(), opts.assets.as_deref());
        Ok(Self {
            listener,
            router,
            state,
            once: opts.once,
        })
    }

    pub fn local_addr(&self) -> std::io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Serve until interrupted, or until one session ends with `once`.
    pub async fn run(self) -> anyhow::Result<()> {
        let state = self.state.clone();
        let once = self.once;
        let shutdown = async move {
            if once {
                state.done.notified().await;
            } else {
                let _ = tokio::signal::ctrl_c().await;
            }
        };
        axum::serve(self.listener, self.router)
            .with_graceful_shutdown(shutdown)
            .await
            .context("server failed")
    }
}

fn router(state: Arc<AppState>, assets: Option<&Path>) -> Router {
    let app = Router::new().route("/ws", get(ws_handler));
    let app = match assets {
        Some(dir) => app.fallback_service(ServeDir::new(dir).append_index_html_on_directories(true)),
        None => app.route("/", get(|| async { Html(PLACEHOLDER_INDEX) })),
    };
    app.with_state(state)
}

async fn ws_handler(ws: WebSocketUpgrade, State(state): State<Arc<AppState>>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| client_session(socket, state))
}

async fn send(socket: &mut WebSocket, msg: &ServerMsg) -> bool {
    socket.send(Message::Text(msg.to_json().into())).await.is_ok()
}

async fn client_session(mut socket: WebSocket, state: Arc<AppState>) {
    if state
        .busy
        .compare_exchange(false, true, Ordering::SeqCst, Ordering::SeqCst)
        .is_err()
    {
        let busy = ServerMsg::Busy {
            message: "a session is already running".into(),
        };
        send(&mut socket, &busy).await;
        let _ = socket.send(Message::Close(None)).await;
        return;
    }
    let guard = BusyGuard(&state.busy);

    let index = state.sessions.fetch_add(1, Ordering::SeqCst);
    let cfg = state.cfg.clone();
    let (in_tx, in_rx) = mpsc::channel::<Action>();
    let (out_tx, mut out_rx) = tmpsc::unbounded_channel::<ServerMsg>();
    let task = tokio::task::spawn_blocking(move || {
        let participant = RemoteParticipant::new(in_rx, out_tx);
        let group = cfg.session.group.resolve(index);
        let pacer = WallClock::new(cfg.device.dt, cfg.serve.time_scale);
        Session::with_pacer(&cfg, &cfg.session.participant_id, group, participant, pacer)?.run()
    });

    let mut in_tx = Some(in_tx);
    loop {
        tokio::select! {
            incoming = socket.recv(), if in_tx.is_some() => match incoming {
                Some(Ok(Message::Text(text))) => match ClientMsg::from_json(&text) {
                    Ok(msg) => {
                        if let Some(tx) = &in_tx {
                            let _ = tx.send(msg.action());
                        }
                    }
                    Err(e) => {
                        send(&mut socket, &ServerMsg::Error { message: e }).await;
                    }
                },
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => {
                    // the session sees the closed channel and ends as disconnected
                    in_tx = None;
                }
                Some(Ok(_)) => {}
            },
            outgoing = out_rx.recv() => match outgoing {
                Some(msg) => {
                    if in_tx.is_some() && !send(&mut socket, &msg).await {
                        in_tx = None;
                    }
                }
                None => break,
            },
        }
    }

    let end = match task.await {
        Ok(Ok(log)) => match write_log(&state.out_dir, &log) {
            Ok(path) => ServerMsg::End {
                status: log.header.status.id().to_string(),
                log_file: path.file_name().map(|f| f.to_string_lossy().into_owned()),
            },
            Err(e) => ServerMsg::Error {
                message: format!("session ended but the log could not be written: {e:#}"),
            },
        },
        Ok(Err(e)) => ServerMsg::Error {
            message: format!("session failed: {e}"),
        },
        Err(e) => ServerMsg::Error {
            message: format!("session task failed: {e}"),
        },
    };
    match &end {
        ServerMsg::Error { message } => eprintln!("{}", crate::error_line("runtime", None, message)),
        ServerMsg::End { status, log_file } => {
            println!("session ended: {status}, log {}", log_file.as_deref().unwrap_or("-"))
        }
        _ => {}
    }
    if in_tx.is_some() {
        send(&mut socket, &end).await;
        let _ = socket.send(Message::Close(None)).await;
    }
    drop(guard);
    state.done.notify_one();
}

/// Write next to earlier sessions without overwriting them.
fn write_log(dir: &Path, log: &SessionLog) -> anyhow::Result<PathBuf> {
    let name = log.file_name();
    let stem = name.trim_end_matches(".csv");
    let mut path = dir.join(&name);
    let mut k = 2;
    while path.exists() {
        path = dir.join(format!("{stem}.{k}.csv"));
        k += 1;
    }
    log.export_csv(&path)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use deepsense::mapping::AngleDeg;
    use deepsense::protocol::{Condition, PhaseKind, Stage};
    use deepsense::{DeviceMode, ForceN, KeyDirection};

    fn obs(t: f64, started: bool) -> Observation {
        Observation {
            t,
            stage: Stage::Trial {
                phase: PhaseKind::Testing,
                condition: Condition::H_NV,
                target: AngleDeg::new(90.0).unwrap(),
                block: 0,
                trial: 0,
            },
            stage_started: started,
            arm: None,
            haptic_active: true,
            felt_force: ForceN::new(1.0).unwrap(),
        }
    }

    #[test]
    fn relays_one_action_per_tick_in_order_and_safety_first() {
        let (in_tx, in_rx) = mpsc::channel();
        let (out_tx, mut out_rx) = tmpsc::unbounded_channel();
        let mut p = RemoteParticipant::new(in_rx, out_tx);
        in_tx.send(Action::Key(KeyDirection::Flex)).unwrap();
        in_tx.send(Action::Confirm).unwrap();
        assert_eq!(p.observe(&obs(0.01, true)).unwrap(), Some(Action::Key(KeyDirection::Flex)));
        in_tx.send(Action::Safety).unwrap();
        assert_eq!(p.observe(&obs(0.02, false)).unwrap(), Some(Action::Safety));
        assert_eq!(p.observe(&obs(0.03, false)).unwrap(), Some(Action::Confirm));
        assert_eq!(p.observe(&obs(0.04, false)).unwrap(), None);
        // one state for the new stage, nothing while unchanged
        assert!(matches!(out_rx.try_recv(), Ok(ServerMsg::State(s)) if s.stage_id == 1));
        assert!(out_rx.try_recv().is_err());
        p.observe(&obs(0.30, false)).unwrap();
        assert!(matches!(out_rx.try_recv(), Ok(ServerMsg::State(_))), "heartbeat");
        drop(in_tx);
        assert_eq!(p.observe(&obs(0.31, false)), Err(ParticipantError::Disconnected));
    }

    #[test]
    fn safety_stops_device_on_the_tick_it_arrives() {
        let mut cfg = SessionConfig::default();
        cfg.serve.time_scale = 1e9;
        let (in_tx, in_rx) = mpsc::channel();
        let (out_tx, _out_rx) = tmpsc::unbounded_channel();
        in_tx.send(Action::Safety).unwrap();
        let mut session = Session::new(&cfg, "p01", deepsense::protocol::Group::HapticFirst, RemoteParticipant::new(in_rx, out_tx)).unwrap();
        let log = session.run().unwrap();
        assert_eq!(log.header.status, deepsense::log::SessionStatus::SafetyStop);
        assert_eq!(session.device().mode(), DeviceMode::EStop);
        assert_eq!(log.samples().len(), 1);
    }

    #[test]
    fn logs_are_not_overwritten() {
        let dir = tempfile::tempdir().unwrap();
        let log = SessionLog::new(deepsense::log::LogHeader {
            schema_version: deepsense::log::SCHEMA_VERSION,
            seed: 4,
            config_hash: String::new(),
            participant_id: "p01".into(),
            group: deepsense::protocol::Group::HapticFirst,
            status: deepsense::log::SessionStatus::Disconnected,
        })
        .unwrap();
        let a = write_log(dir.path(), &log).unwrap();
        let b = write_log(dir.path(), &log).unwrap();
        assert_eq!(a.file_name().unwrap(), "session_p01_4.csv");
        assert_eq!(b.file_name().unwrap(), "session_p01_4.2.csv");
        assert_eq!(SessionLog::import_csv(&b).unwrap(), log);
    }
}
