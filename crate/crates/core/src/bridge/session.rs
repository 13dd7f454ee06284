use super::estimator::FreeStreamEstimator;
use super::frame::{CommandFrame, Frame, MeasureFrame, TARGETS_PER_TURBINE};
use super::transport::Transport;
use crate::error::{Error, Result};

/// Simulator end of a lock-step session: sends measures, receives commands.
#[derive(Debug)]
pub struct SimulatorSession<T> {
    transport: T,
    turbines: usize,
    last_sent: Option<u64>,
    awaiting_command: bool,
}

impl<T: Transport> SimulatorSession<T> {
    pub fn new(transport: T, turbines: usize) -> Self {
        Self { transport, turbines, last_sent: None, awaiting_command: false }
    }

    pub fn send_measure(&mut self, frame: MeasureFrame) -> Result<()> {
        if self.awaiting_command {
            return Err(Error::Protocol("measure sent before the previous command arrived".into()));
        }
        if self.last_sent.is_some_and(|s| frame.step <= s) {
            return Err(Error::Protocol(format!("measure step {} not after {:?}", frame.step, self.last_sent)));
        }
        if frame.turbines.len() != self.turbines {
            return Err(Error::Protocol(format!("{} turbines in a {}-turbine session", frame.turbines.len(), self.turbines)));
        }
        self.last_sent = Some(frame.step);
        self.awaiting_command = true;
        self.transport.send(&Frame::Measure(frame))
    }

    /// Next command, or `None` once the environment closes the session.
    pub fn recv_command(&mut self) -> Result<Option<CommandFrame>> {
        match self.transport.recv()? {
            Frame::Close { .. } => Ok(None),
            Frame::Command(c) => {
                if !self.awaiting_command || Some(c.step) != self.last_sent {
                    return Err(Error::Protocol(format!(
                        "command for step {} does not answer measure {:?}",
                        c.step, self.last_sent
                    )));
                }
                if c.targets.len() != self.turbines {
                    return Err(Error::Protocol(format!("{} targets for {} turbines", c.targets.len(), self.turbines)));
                }
                self.awaiting_command = false;
                Ok(Some(c))
            }
            Frame::Measure(_) => Err(Error::Protocol("simulator received a measure frame".into())),
        }
    }

    pub fn close(&mut self) -> Result<()> {
        self.transport.send(&Frame::Close { step: self.last_sent.map_or(0, |s| s + 1) })
    }
}

/// Environment end of a lock-step session: receives measures, sends commands.
///
/// Owns the free-stream estimator, which sees every measure frame.
#[derive(Debug)]
pub struct EnvSession<T> {
    transport: T,
    turbines: usize,
    last_step: Option<u64>,
    pending: bool,
    estimator: FreeStreamEstimator,
}

impl<T: Transport> EnvSession<T> {
    pub fn new(transport: T, turbines: usize, buffer_window: usize) -> Self {
        Self {
            transport,
            turbines,
            last_step: None,
            pending: false,
            estimator: FreeStreamEstimator::new(turbines, buffer_window),
        }
    }

    pub fn estimator(&self) -> &FreeStreamEstimator {
        &self.estimator
    }

    /// Next measure, or `None` once the simulator closes the session.
    pub fn recv_measure(&mut self) -> Result<Option<MeasureFrame>> {
        if self.pending {
            return Err(Error::Protocol("measure requested before answering the previous one".into()));
        }
        match self.transport.recv()? {
            Frame::Close { .. } => Ok(None),
            Frame::Measure(m) => {
                if self.last_step.is_some_and(|s| m.step <= s) {
                    return Err(Error::Protocol(format!("measure step {} not after {:?}", m.step, self.last_step)));
                }
                if m.turbines.len() != self.turbines {
                    return Err(Error::Protocol(format!("{} turbines, expected {}", m.turbines.len(), self.turbines)));
                }
                self.last_step = Some(m.step);
                self.pending = true;
                self.estimator.push(&m.turbines);
                Ok(Some(m))
            }
            Frame::Command(_) => Err(Error::Protocol("environment received a command frame".into())),
        }
    }

    /// Answers the last measure with absolute targets.
    pub fn send_command(&mut self, targets: Vec<[f64; TARGETS_PER_TURBINE]>) -> Result<()> {
        let step = match (self.pending, self.last_step) {
            (true, Some(s)) => s,
            _ => return Err(Error::Protocol("command without a pending measure".into())),
        };
        self.pending = false;
        self.transport.send(&Frame::Command(CommandFrame { step, targets }))
    }

    pub fn close(&mut self) -> Result<()> {
        self.transport.send(&Frame::Close { step: self.last_step.map_or(0, |s| s + 1) })
    }
}
