use std::net::{TcpListener, TcpStream};
use std::time::Duration;

use super::frame::{MeasureFrame, TARGETS_PER_TURBINE};
use super::session::{EnvSession, SimulatorSession};
use super::transport::{StreamTransport, Transport};
use crate::dynamics::Actuators;
use crate::env::{start_dynamic, measurement_of, Backend, EpisodePlan, EpisodeSampler, Measurement, SimulatorKind};
use crate::error::{Error, Result};
use crate::wake::{FarmLayout, FreeStreamConditions};

/// Runs one episode of the in-repo dynamic simulator behind a session.
///
/// Sends the settled state as measure 0, then answers each command `k` with
/// measure `k + 1` driven by `plan.inflow[k + 1]`, until the environment
/// closes the session. Returns the number of commands served.
pub fn serve_episode<T: Transport>(transport: T, layout: &FarmLayout, plan: &EpisodePlan) -> Result<u64> {
    let mut session = SimulatorSession::new(transport, layout.len());
    let (mut farm, first) = start_dynamic(layout, plan)?;
    session.send_measure(MeasureFrame { step: 0, turbines: first.turbines })?;
    let mut served = 0u64;
    while let Some(cmd) = session.recv_command()? {
        let targets: Vec<Actuators> = cmd.targets.iter().map(|t| Actuators::from_array(*t)).collect();
        farm.set_targets(&targets)?;
        served += 1;
        let inflow = plan.inflow[(served as usize).min(plan.inflow.len() - 1)];
        let out = farm.advance(&inflow)?;
        session.send_measure(MeasureFrame { step: served, turbines: measurement_of(&out).turbines })?;
    }
    Ok(served)
}

/// Serves episodes on a TCP listener, one connection per episode, drawing each
/// episode's wind from `sampler`. Stops after `episodes` connections if given.
pub fn serve_tcp(
    listener: &TcpListener,
    layout: &FarmLayout,
    sampler: &mut EpisodeSampler,
    episodes: Option<usize>,
    timeout: Duration,
) -> Result<usize> {
    let mut count = 0;
    for stream in listener.incoming() {
        let transport = StreamTransport::tcp(stream?, timeout)?;
        let plan = sampler.next_episode();
        let served = serve_episode(transport, layout, &plan)?;
        log::info!("episode {count} finished after {served} steps");
        count += 1;
        if episodes.is_some_and(|n| count >= n) {
            break;
        }
    }
    Ok(count)
}

type Connector = Box<dyn FnMut() -> Result<Box<dyn Transport>> + Send>;

/// Environment backend talking to a remote simulator, one session per episode.
///
/// The remote side owns the wind; the environment uses its own copy of the
/// episode plan for rewards, so both ends must share configuration and seed.
pub struct BridgeBackend {
    connect: Connector,
    turbines: usize,
    buffer_window: usize,
    session: Option<EnvSession<Box<dyn Transport>>>,
}

impl std::fmt::Debug for BridgeBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BridgeBackend").field("turbines", &self.turbines).finish_non_exhaustive()
    }
}

impl BridgeBackend {
    pub fn new(turbines: usize, buffer_window: usize, connect: Connector) -> Self {
        Self { connect, turbines, buffer_window, session: None }
    }

    /// Connects to `endpoint` (host:port) at the start of every episode.
    pub fn connect_tcp(endpoint: &str, turbines: usize, buffer_window: usize, timeout: Duration) -> Result<Self> {
        let endpoint = endpoint.to_string();
        Ok(Self::new(
            turbines,
            buffer_window,
            Box::new(move || {
                let stream = TcpStream::connect(&endpoint)?;
                Ok(Box::new(StreamTransport::tcp(stream, timeout)?) as Box<dyn Transport>)
            }),
        ))
    }

    /// Free-stream estimate of the running session.
    pub fn freestream_estimate(&self) -> Result<(f64, f64)> {
        self.session.as_ref().ok_or(Error::EstimatorNotReady)?.estimator().estimate()
    }

    fn session(&mut self) -> Result<&mut EnvSession<Box<dyn Transport>>> {
        self.session.as_mut().ok_or_else(|| Error::contract("bridge backend used outside an episode"))
    }
}

impl Backend for BridgeBackend {
    fn kind(&self) -> SimulatorKind {
        SimulatorKind::Dynamic
    }

    fn step_seconds(&self) -> f64 {
        crate::dynamics::DT
    }

    fn begin(&mut self, _plan: &EpisodePlan) -> Result<Measurement> {
        if let Some(mut old) = self.session.take() {
            old.close().ok();
        }
        let transport = (self.connect)()?;
        let mut session = EnvSession::new(transport, self.turbines, self.buffer_window);
        let first = session.recv_measure()?.ok_or_else(|| Error::Protocol("simulator closed before step 0".into()))?;
        self.session = Some(session);
        Ok(measurement(first))
    }

    fn advance(&mut self, targets: &[Actuators], _inflow: &FreeStreamConditions) -> Result<Option<Measurement>> {
        let session = self.session()?;
        let t: Vec<[f64; TARGETS_PER_TURBINE]> = targets.iter().map(|a| a.to_array()).collect();
        session.send_command(t)?;
        Ok(session.recv_measure()?.map(measurement))
    }

    fn end(&mut self) -> Result<()> {
        if let Some(mut s) = self.session.take() {
            s.close()?;
        }
        Ok(())
    }
}

fn measurement(frame: MeasureFrame) -> Measurement {
    let load_raw = crate::env::load_from_measures(&frame.turbines);
    Measurement { turbines: frame.turbines, load_raw }
}
