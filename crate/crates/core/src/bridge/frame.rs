//! Wire format of the co-simulation bridge.
//!
//! Every frame is
//!
//! ```text
//! magic "WFCB" | version u8 | kind u8 | turbines u16 LE | step u64 LE | payload f64 LE × n | crc32 LE
//! ```
//!
//! where the CRC32 covers the header and the payload. Measure frames carry 12
//! values per turbine, command frames 3, close frames none.

use std::io::Read;

use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"WFCB";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 16;
pub const CRC_LEN: usize = 4;

/// Values per turbine in a measure frame.
pub const MEASURES_PER_TURBINE: usize = 12;
/// Values per turbine in a command frame.
pub const TARGETS_PER_TURBINE: usize = 3;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FrameError {
    #[error("bad magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported protocol version {0}")]
    BadVersion(u8),
    #[error("unknown frame kind {0}")]
    BadKind(u8),
    #[error("frame length {got} does not match the {expected} bytes announced by the header")]
    Length { expected: usize, got: usize },
    #[error("checksum mismatch: frame says {expected:#010x}, computed {computed:#010x}")]
    Crc { expected: u32, computed: u32 },
    #[error("{0} turbines do not fit in a frame")]
    TooManyTurbines(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum FrameKind {
    Measure = 1,
    Command = 2,
    Close = 3,
}

impl FrameKind {
    fn from_u8(b: u8) -> Result<Self, FrameError> {
        match b {
            1 => Ok(FrameKind::Measure),
            2 => Ok(FrameKind::Command),
            3 => Ok(FrameKind::Close),
            other => Err(FrameError::BadKind(other)),
        }
    }

    fn values_per_turbine(self) -> usize {
        match self {
            FrameKind::Measure => MEASURES_PER_TURBINE,
            FrameKind::Command => TARGETS_PER_TURBINE,
            FrameKind::Close => 0,
        }
    }
}

/// The twelve measurements reported for one turbine.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TurbineMeasures {
    pub wind_speed: f64,
    pub wind_direction: f64,
    pub power: f64,
    pub yaw: f64,
    pub pitch: f64,
    pub torque: f64,
    pub moment_out_of_plane: [f64; 3],
    pub moment_in_plane: [f64; 3],
}

impl TurbineMeasures {
    pub fn to_array(&self) -> [f64; MEASURES_PER_TURBINE] {
        let [a, b, c] = self.moment_out_of_plane;
        let [d, e, f] = self.moment_in_plane;
        [self.wind_speed, self.wind_direction, self.power, self.yaw, self.pitch, self.torque, a, b, c, d, e, f]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self {
            wind_speed: v[0],
            wind_direction: v[1],
            power: v[2],
            yaw: v[3],
            pitch: v[4],
            torque: v[5],
            moment_out_of_plane: [v[6], v[7], v[8]],
            moment_in_plane: [v[9], v[10], v[11]],
        }
    }
}

/// Simulator → environment: one record per turbine for step `step`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureFrame {
    pub step: u64,
    pub turbines: Vec<TurbineMeasures>,
}

/// Environment → simulator: yaw, pitch and torque targets per turbine, echoing
/// the step index of the measure frame it answers.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandFrame {
    pub step: u64,
    pub targets: Vec<[f64; TARGETS_PER_TURBINE]>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Frame {
    Measure(MeasureFrame),
    Command(CommandFrame),
    Close { step: u64 },
}

impl Frame {
    pub fn kind(&self) -> FrameKind {
        match self {
            Frame::Measure(_) => FrameKind::Measure,
            Frame::Command(_) => FrameKind::Command,
            Frame::Close { .. } => FrameKind::Close,
        }
    }

    pub fn step(&self) -> u64 {
        match self {
            Frame::Measure(f) => f.step,
            Frame::Command(f) => f.step,
            Frame::Close { step } => *step,
        }
    }

    fn turbine_count(&self) -> usize {
        match self {
            Frame::Measure(f) => f.turbines.len(),
            Frame::Command(f) => f.targets.len(),
            Frame::Close { .. } => 0,
        }
    }

    fn payload(&self) -> Vec<f64> {
        match self {
            Frame::Measure(f) => f.turbines.iter().flat_map(|t| t.to_array()).collect(),
            Frame::Command(f) => f.targets.iter().flatten().copied().collect(),
            Frame::Close { .. } => Vec::new(),
        }
    }
}

/// Serializes a frame. Fails only when the turbine count overflows `u16`.
pub fn encode(frame: &Frame) -> Result<Vec<u8>, FrameError> {
    let m = frame.turbine_count();
    let m16 = u16::try_from(m).map_err(|_| FrameError::TooManyTurbines(m))?;
    let payload = frame.payload();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * payload.len() + CRC_LEN);
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(frame.kind() as u8);
    out.extend_from_slice(&m16.to_le_bytes());
    out.extend_from_slice(&frame.step().to_le_bytes());
    for v in payload {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

struct Header {
    kind: FrameKind,
    turbines: usize,
    step: u64,
}

impl Header {
    fn body_len(&self) -> usize {
        8 * self.kind.values_per_turbine() * self.turbines + CRC_LEN
    }
}

fn parse_header(bytes: &[u8; HEADER_LEN]) -> Result<Header, FrameError> {
    let magic = [bytes[0], bytes[1], bytes[2], bytes[3]];
    if magic != MAGIC {
        return Err(FrameError::BadMagic(magic));
    }
    if bytes[4] != VERSION {
        return Err(FrameError::BadVersion(bytes[4]));
    }
    let kind = FrameKind::from_u8(bytes[5])?;
    let turbines = u16::from_le_bytes([bytes[6], bytes[7]]) as usize;
    let step = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    Ok(Header { kind, turbines, step })
}

/// Parses one complete frame from `bytes`.
pub fn decode(bytes: &[u8]) -> Result<Frame, FrameError> {
    if bytes.len() < HEADER_LEN + CRC_LEN {
        return Err(FrameError::Length { expected: HEADER_LEN + CRC_LEN, got: bytes.len() });
    }
    let header = parse_header(bytes[..HEADER_LEN].try_into().expect("header slice"))?;
    let expected = HEADER_LEN + header.body_len();
    if bytes.len() != expected {
        return Err(FrameError::Length { expected, got: bytes.len() });
    }
    finish(header, bytes)
}

fn finish(header: Header, bytes: &[u8]) -> Result<Frame, FrameError> {
    let (body, crc_bytes) = bytes.split_at(bytes.len() - CRC_LEN);
    let expected = u32::from_le_bytes(crc_bytes.try_into().expect("4 bytes"));
    let computed = crc32fast::hash(body);
    if expected != computed {
        return Err(FrameError::Crc { expected, computed });
    }
    let values: Vec<f64> = body[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok(match header.kind {
        FrameKind::Measure => Frame::Measure(MeasureFrame {
            step: header.step,
            turbines: values.chunks_exact(MEASURES_PER_TURBINE).map(TurbineMeasures::from_slice).collect(),
        }),
        FrameKind::Command => Frame::Command(CommandFrame {
            step: header.step,
            targets: values.chunks_exact(TARGETS_PER_TURBINE).map(|c| [c[0], c[1], c[2]]).collect(),
        }),
        FrameKind::Close => Frame::Close { step: header.step },
    })
}

/// Reads exactly one frame from a byte stream.
///
/// I/O errors (including timeouts and end of stream) are returned as the outer
/// error; malformed frames as the inner one.
pub fn read_frame<R: Read>(reader: &mut R) -> std::io::Result<Result<Frame, FrameError>> {
    let mut header_bytes = [0u8; HEADER_LEN];
    reader.read_exact(&mut header_bytes)?;
    let header = match parse_header(&header_bytes) {
        Ok(h) => h,
        Err(e) => return Ok(Err(e)),
    };
    let mut bytes = vec![0u8; HEADER_LEN + header.body_len()];
    bytes[..HEADER_LEN].copy_from_slice(&header_bytes);
    reader.read_exact(&mut bytes[HEADER_LEN..])?;
    Ok(finish(header, &bytes))
}
