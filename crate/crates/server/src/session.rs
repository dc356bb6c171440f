//! One simulation per session, owned by a dedicated worker thread.
//!
//! Clients talk to the worker through an ordered queue. Steering commands
//! are validated, then scheduled as timeline events for the step about to
//! run, so they take effect atomically at a step boundary and the world's
//! timeline doubles as a replayable transcript.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use amoeba_core::engine::{self, validate_command, Command, StepStats, TimelineEvent, World};
use amoeba_core::render::render_frame;
use amoeba_core::scenario::{self, ScenarioSpec};
use serde::Serialize;
use tokio::sync::{mpsc, watch};

use crate::protocol::{FrameMessage, ProtocolError, ServerMessage, SessionCommand, StatsSummary};

pub type Reply = mpsc::UnboundedSender<ServerMessage>;

pub(crate) enum Control {
    Command(SessionCommand, Reply),
    Shutdown,
}

/// Serialized frame shared by every subscriber.
#[derive(Debug)]
pub struct SharedFrame {
    pub step_index: u64,
    pub json: String,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
#[serde(rename_all = "camelCase")]
pub struct ParamsInfo {
    #[serde(rename = "pID")]
    pub pid: f64,
    #[serde(rename = "SA")]
    pub sa: f64,
    #[serde(rename = "RA")]
    pub ra: f64,
    #[serde(rename = "SO")]
    pub so: f64,
    pub damping: f64,
    pub oscillatory: bool,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
#[serde(rename_all = "camelCase")]
pub struct SessionStatus {
    pub id: String,
    pub scenario: String,
    pub seed: u64,
    pub step_index: u64,
    pub paused: bool,
    pub frame_cadence: u64,
    pub population: usize,
    pub width: usize,
    pub height: usize,
    pub clients: usize,
    pub params: ParamsInfo,
}

#[derive(Debug, Clone)]
pub struct SessionOptions {
    pub frame_every: u64,
    pub start_paused: bool,
    /// Upper bound on steps per second while running; `None` runs flat out.
    pub max_rate: Option<f64>,
}

impl Default for SessionOptions {
    fn default() -> Self {
        Self {
            frame_every: 1,
            start_paused: false,
            max_rate: Some(60.0),
        }
    }
}

/// Handle held by the registry and by connected clients.
pub struct Session {
    pub id: String,
    control: mpsc::UnboundedSender<Control>,
    frames: watch::Receiver<Option<Arc<SharedFrame>>>,
    status: Arc<Mutex<SessionStatus>>,
    clients: AtomicUsize,
    worker: Mutex<Option<std::thread::JoinHandle<()>>>,
}

impl Session {
    /// Builds the world and starts its worker.
    pub fn start(
        id: String,
        spec: ScenarioSpec,
        options: SessionOptions,
    ) -> Result<Arc<Session>, scenario::ScenarioError> {
        let world = spec.init_world()?;
        let (control, rx) = mpsc::unbounded_channel();
        let (frames_tx, frames) = watch::channel(None);
        let mut worker = Worker {
            spec,
            world,
            stats: Vec::new(),
            paused: options.start_paused,
            pending_steps: 0,
            frame_every: options.frame_every.max(1),
            max_rate: options.max_rate,
            frames: frames_tx,
            status: Arc::new(Mutex::new(placeholder_status(&id))),
            id: id.clone(),
        };
        let status = worker.status.clone();
        worker.publish_status();
        worker.publish_frame();
        let handle = std::thread::Builder::new()
            .name(format!("session-{id}"))
            .spawn(move || worker.run(rx))
            .expect("spawn session worker");
        Ok(Arc::new(Session {
            id,
            control,
            frames,
            status,
            clients: AtomicUsize::new(0),
            worker: Mutex::new(Some(handle)),
        }))
    }

    /// Queues a command; the reply arrives on `reply`.
    pub fn send(&self, command: SessionCommand, reply: Reply) {
        if self
            .control
            .send(Control::Command(command, reply.clone()))
            .is_err()
        {
            let _ = reply.send(ServerMessage::error("session has ended"));
        }
    }

    pub fn frames(&self) -> watch::Receiver<Option<Arc<SharedFrame>>> {
        self.frames.clone()
    }

    pub fn status(&self) -> SessionStatus {
        let mut s = self.status.lock().unwrap().clone();
        s.clients = self.clients();
        s
    }

    pub fn clients(&self) -> usize {
        self.clients.load(Ordering::SeqCst)
    }

    pub(crate) fn attach(&self) -> usize {
        self.clients.fetch_add(1, Ordering::SeqCst) + 1
    }

    pub(crate) fn detach(&self) -> usize {
        self.clients.fetch_sub(1, Ordering::SeqCst) - 1
    }

    /// Stops the worker and waits for it.
    pub fn shutdown(&self) {
        let _ = self.control.send(Control::Shutdown);
        if let Some(h) = self.worker.lock().unwrap().take() {
            let _ = h.join();
        }
    }
}

fn placeholder_status(id: &str) -> SessionStatus {
    SessionStatus {
        id: id.to_string(),
        scenario: String::new(),
        seed: 0,
        step_index: 0,
        paused: false,
        frame_cadence: 1,
        population: 0,
        width: 0,
        height: 0,
        clients: 0,
        params: ParamsInfo {
            pid: 0.0,
            sa: 0.0,
            ra: 0.0,
            so: 0.0,
            damping: 0.0,
            oscillatory: false,
        },
    }
}

struct Worker {
    id: String,
    spec: ScenarioSpec,
    world: World,
    stats: Vec<StepStats>,
    paused: bool,
    pending_steps: u64,
    frame_every: u64,
    max_rate: Option<f64>,
    frames: watch::Sender<Option<Arc<SharedFrame>>>,
    status: Arc<Mutex<SessionStatus>>,
}

impl Worker {
    fn run(mut self, mut rx: mpsc::UnboundedReceiver<Control>) {
        let mut next_due = Instant::now();
        loop {
            let idle = self.paused && self.pending_steps == 0;
            let control = if idle {
                match rx.blocking_recv() {
                    Some(c) => Some(c),
                    None => return,
                }
            } else {
                match rx.try_recv() {
                    Ok(c) => Some(c),
                    Err(mpsc::error::TryRecvError::Empty) => None,
                    Err(mpsc::error::TryRecvError::Disconnected) => return,
                }
            };
            match control {
                Some(Control::Shutdown) => return,
                Some(Control::Command(cmd, reply)) => {
                    let answer = self.handle(cmd);
                    self.publish_status();
                    let _ = reply.send(answer);
                    continue;
                }
                None => {}
            }

            // the queue is drained, so this step sees every command sent before it
            if let Some(rate) = self.max_rate.filter(|_| self.pending_steps == 0) {
                let now = Instant::now();
                if next_due > now {
                    std::thread::sleep((next_due - now).min(Duration::from_millis(50)));
                    continue;
                }
                next_due = now.max(next_due) + Duration::from_secs_f64(1.0 / rate);
            }
            self.step_once();
        }
    }

    fn step_once(&mut self) {
        let stats = self.world.step();
        self.stats.push(stats);
        let batch_done = if self.pending_steps > 0 {
            self.pending_steps -= 1;
            self.pending_steps == 0
        } else {
            false
        };
        if batch_done || self.world.step_index().is_multiple_of(self.frame_every) {
            self.publish_frame();
        }
        self.publish_status();
    }

    fn handle(&mut self, cmd: SessionCommand) -> ServerMessage {
        let kind = cmd.kind();
        let apply_step = self.world.step_index();
        let ack = |stimulus_id| ServerMessage::Ack {
            command: kind.to_string(),
            apply_step,
            stimulus_id,
        };
        match cmd {
            SessionCommand::Pause => {
                self.paused = true;
                self.pending_steps = 0;
                ack(None)
            }
            SessionCommand::Resume => {
                self.paused = false;
                self.pending_steps = 0;
                ack(None)
            }
            SessionCommand::StepN { n } => {
                self.paused = true;
                self.pending_steps += n;
                ack(None)
            }
            SessionCommand::SetFrameCadence { n } => {
                if n == 0 {
                    return ServerMessage::error(ProtocolError::Cadence);
                }
                self.frame_every = n;
                ack(None)
            }
            SessionCommand::Reset {
                seed,
                scenario_name,
            } => match self.reset(seed, scenario_name.as_deref()) {
                Ok(()) => ack(None),
                Err(e) => ServerMessage::error(e),
            },
            SessionCommand::Export => ServerMessage::Exported {
                step_index: self.world.step_index(),
                scenario: self.transcript().to_text(),
                digest: engine::digest(&self.world, &self.stats),
            },
            other => match other.to_engine() {
                Ok(Some(command)) => match validate_command(&command, self.world.habitat()) {
                    Ok(()) => {
                        let id = self.predicted_id(&command);
                        self.world
                            .schedule([TimelineEvent::new(apply_step, command)]);
                        ack(id)
                    }
                    Err(e) => ServerMessage::error(e),
                },
                Ok(None) => unreachable!("every other command maps to the engine"),
                Err(e) => ServerMessage::error(e),
            },
        }
    }

    /// Id the stimulus added by `command` will receive once applied.
    fn predicted_id(&self, command: &Command) -> Option<u32> {
        let pending = &self.world.timeline()[self.applied_events()..];
        let stimuli = self.world.stimuli();
        match command {
            Command::AddAttractant { .. } => Some(
                stimuli.next_attractant_id()
                    + pending
                        .iter()
                        .filter(|e| matches!(e.command, Command::AddAttractant { .. }))
                        .count() as u32,
            ),
            Command::AddIrradiation { .. } => Some(
                stimuli.next_irradiation_id()
                    + pending
                        .iter()
                        .filter(|e| matches!(e.command, Command::AddIrradiation { .. }))
                        .count() as u32,
            ),
            _ => None,
        }
    }

    /// Timeline events already applied: everything dated before the next step.
    fn applied_events(&self) -> usize {
        let now = self.world.step_index();
        self.world
            .timeline()
            .iter()
            .take_while(|e| e.at_step < now)
            .count()
    }

    fn reset(&mut self, seed: Option<u64>, name: Option<&str>) -> Result<(), String> {
        let mut spec = match name {
            Some(n) => scenario::preset(n).ok_or_else(|| format!("unknown scenario {n:?}"))?,
            None => self.spec.clone(),
        };
        if let Some(s) = seed {
            spec.seed = s;
        }
        self.world = spec.init_world().map_err(|e| e.to_string())?;
        self.spec = spec;
        self.stats.clear();
        self.pending_steps = 0;
        self.publish_frame();
        Ok(())
    }

    /// The scenario that replays this session from step 0 to now.
    fn transcript(&self) -> ScenarioSpec {
        let mut spec = self.spec.clone();
        // the onset is already one of the world's timeline events
        spec.oscillation_onset = None;
        spec.timeline = self.world.timeline().to_vec();
        spec.steps = self.world.step_index();
        spec
    }

    fn publish_frame(&mut self) {
        let image = render_frame(self.world.trail(), false);
        let frame = FrameMessage::new(
            self.world.step_index(),
            image.width,
            image.height,
            &image.pixels,
            self.stats.last().map(StatsSummary::from),
            self.world.stimuli().into(),
        );
        let json = ServerMessage::Frame(frame).to_json();
        self.frames.send_replace(Some(Arc::new(SharedFrame {
            step_index: self.world.step_index(),
            json,
        })));
    }

    fn publish_status(&self) {
        let p = self.world.params();
        let habitat = self.world.habitat();
        let mut s = self.status.lock().unwrap();
        *s = SessionStatus {
            id: self.id.clone(),
            scenario: self.spec.name.clone(),
            seed: self.spec.seed,
            step_index: self.world.step_index(),
            paused: self.paused && self.pending_steps == 0,
            frame_cadence: self.frame_every,
            population: self.world.population(),
            width: habitat.width(),
            height: habitat.height(),
            clients: 0,
            params: ParamsInfo {
                pid: p.motor.pid,
                sa: p.sensors.sensor_angle,
                ra: p.sensors.rotation_angle,
                so: p.sensors.sensor_offset,
                damping: p.damping,
                oscillatory: p.motor.kind == amoeba_core::particles::MotorKind::Oscillatory,
            },
        };
    }
}
