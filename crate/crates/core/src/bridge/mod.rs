//! Framed lock-step protocol between an environment and a simulator process.
//!
//! The simulator sends a [`MeasureFrame`] for step `k`; the environment answers
//! with a [`CommandFrame`] echoing `k`. Either side may send a close frame to
//! end the episode. [`serve_episode`] hosts the in-repo dynamic simulator and
//! [`BridgeBackend`] plugs a remote simulator into an environment.

mod estimator;
mod frame;
mod host;
mod session;
mod transport;

pub use estimator::{estimate_freestream, FreeStreamEstimator};
pub use frame::{
    decode, encode, read_frame, CommandFrame, Frame, FrameError, FrameKind, MeasureFrame, TurbineMeasures,
    CRC_LEN, HEADER_LEN, MEASURES_PER_TURBINE, TARGETS_PER_TURBINE,
};
pub use host::{serve_episode, serve_tcp, BridgeBackend};
pub use session::{EnvSession, SimulatorSession};
pub use transport::{ChannelTransport, StreamTransport, Transport, DEFAULT_TIMEOUT};
