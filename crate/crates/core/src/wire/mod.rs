//! Module-to-host streaming: the GLG1 packet codec, frame sources, the
//! module daemon and the host aggregator.

pub mod daemon;
pub mod host;
pub mod packet;
pub mod source;

use std::io::{self, Read};

use thiserror::Error;

pub use daemon::{run_module_daemon, DaemonConfig, DaemonStats};
pub use host::{run_host, Host, HostConfig, HostState, HostSummary, LogRecord, ModuleState};
pub use packet::{
    decode_packet, encode_packet, Decoder, FrameBlock, FrameEncoding, GuidancePacket, PacketGeometry,
    ProtocolError,
};
pub use source::{DirectorySource, FrameError, SynthSource};

pub const DEFAULT_PORT: u16 = 7420;

#[derive(Debug, Error)]
pub enum WireError {
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Pipeline(#[from] crate::Error),
    #[error("could not reach {addr} after {attempts} attempts: {last}")]
    Unreachable {
        addr: String,
        attempts: u32,
        last: io::Error,
    },
    #[error("invalid setting: {0}")]
    Config(String),
}

/// What the next read from a packet stream produced.
#[derive(Debug)]
pub enum Next {
    Packet(GuidancePacket),
    /// A malformed packet was skipped; the stream is still usable.
    Rejected(ProtocolError),
    /// Peer closed on a packet boundary.
    Eof,
    /// The halt predicate fired while waiting for bytes.
    Halted,
}

/// Blocking packet reader over any byte stream. Read timeouts are treated
/// as a chance to poll the halt predicate, so a socket with a timeout set
/// can be stopped promptly without losing buffered bytes.
pub struct PacketStream<R> {
    inner: R,
    decoder: Decoder,
    chunk: Vec<u8>,
}

impl<R: Read> PacketStream<R> {
    pub fn new(inner: R) -> Self {
        PacketStream {
            inner,
            decoder: Decoder::new(),
            chunk: vec![0; 64 * 1024],
        }
    }

    pub fn get_ref(&self) -> &R {
        &self.inner
    }

    pub fn next(&mut self, halt: impl Fn() -> bool) -> Result<Next, WireError> {
        loop {
            match self.decoder.next_packet() {
                Ok(Some(p)) => return Ok(Next::Packet(p)),
                Ok(None) => {}
                Err(e) if !e.is_fatal() => return Ok(Next::Rejected(e)),
                Err(e) => return Err(e.into()),
            }
            if halt() {
                return Ok(Next::Halted);
            }
            match self.inner.read(&mut self.chunk) {
                Ok(0) => {
                    self.decoder.finish()?;
                    return Ok(Next::Eof);
                }
                Ok(n) => self.decoder.push(&self.chunk[..n]),
                Err(e)
                    if matches!(
                        e.kind(),
                        io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut | io::ErrorKind::Interrupted
                    ) => {}
                Err(e) => return Err(e.into()),
            }
        }
    }
}

pub(crate) fn now_ms() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}
