use std::io::{self, Read, Write};
use std::net::TcpStream;
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::thread;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::frame::{decode, encode, read_frame, Frame};
use crate::error::{Error, Result};

/// Default time to wait for the peer, seconds.
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

/// A duplex channel carrying whole frames.
pub trait Transport: Send {
    fn send(&mut self, frame: &Frame) -> Result<()>;

    /// Blocks until a frame arrives or the timeout expires.
    fn recv(&mut self) -> Result<Frame>;
}

impl<T: Transport + ?Sized> Transport for Box<T> {
    fn send(&mut self, frame: &Frame) -> Result<()> {
        (**self).send(frame)
    }

    fn recv(&mut self) -> Result<Frame> {
        (**self).recv()
    }
}

/// Frames over any byte stream, typically a TCP socket.
#[derive(Debug)]
pub struct StreamTransport<S> {
    stream: S,
    timeout: Duration,
}

impl StreamTransport<TcpStream> {
    pub fn tcp(stream: TcpStream, timeout: Duration) -> Result<Self> {
        stream.set_read_timeout(Some(timeout))?;
        stream.set_nodelay(true)?;
        Ok(Self { stream, timeout })
    }
}

impl<S: Read + Write + Send> StreamTransport<S> {
    /// Wraps a stream whose read timeout the caller already configured.
    pub fn new(stream: S, timeout: Duration) -> Self {
        Self { stream, timeout }
    }
}

impl<S: Read + Write + Send> Transport for StreamTransport<S> {
    fn send(&mut self, frame: &Frame) -> Result<()> {
        self.stream.write_all(&encode(frame)?)?;
        self.stream.flush()?;
        Ok(())
    }

    fn recv(&mut self) -> Result<Frame> {
        match read_frame(&mut self.stream) {
            Ok(frame) => Ok(frame?),
            Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {
                Err(Error::Timeout(self.timeout))
            }
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => Err(Error::Protocol("peer hung up".into())),
            Err(e) => Err(e.into()),
        }
    }
}

/// In-process transport over channels of encoded bytes.
#[derive(Debug)]
pub struct ChannelTransport {
    tx: Sender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
    timeout: Duration,
}

/// Spawns a relay that holds each message for a random time, preserving order.
fn delayed(rx: Receiver<Vec<u8>>, max_delay: Duration, seed: u64) -> Receiver<Vec<u8>> {
    let (tx, out) = mpsc::channel();
    thread::spawn(move || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for msg in rx {
            let micros = rng.random_range(0..=max_delay.as_micros() as u64);
            thread::sleep(Duration::from_micros(micros));
            if tx.send(msg).is_err() {
                break;
            }
        }
    });
    out
}

impl ChannelTransport {
    /// Two connected ends. With `max_delay`, every message is held for a
    /// random time up to that bound before delivery.
    pub fn pair(max_delay: Option<Duration>, seed: u64, timeout: Duration) -> (Self, Self) {
        let (tx_a, rx_b) = mpsc::channel();
        let (tx_b, rx_a) = mpsc::channel();
        let (rx_a, rx_b) = match max_delay {
            Some(d) => (delayed(rx_a, d, seed), delayed(rx_b, d, seed.wrapping_add(1))),
            None => (rx_a, rx_b),
        };
        (Self { tx: tx_a, rx: rx_a, timeout }, Self { tx: tx_b, rx: rx_b, timeout })
    }

    /// Sends raw bytes, bypassing the encoder.
    pub fn send_raw(&mut self, bytes: Vec<u8>) -> Result<()> {
        self.tx.send(bytes).map_err(|_| Error::Protocol("peer hung up".into()))
    }
}

impl Transport for ChannelTransport {
    fn send(&mut self, frame: &Frame) -> Result<()> {
        self.send_raw(encode(frame)?)
    }

    fn recv(&mut self) -> Result<Frame> {
        match self.rx.recv_timeout(self.timeout) {
            Ok(bytes) => Ok(decode(&bytes)?),
            Err(RecvTimeoutError::Timeout) => Err(Error::Timeout(self.timeout)),
            Err(RecvTimeoutError::Disconnected) => Err(Error::Protocol("peer hung up".into())),
        }
    }
}
