//! Host aggregator: one reader thread per module connection, one writer
//! thread for the shared guidance log.

use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use log::{error, info, warn};
use serde::Serialize;

use super::packet::{FrameEncoding, GuidancePacket, MAX_MODULE_ID};
use super::{Next, PacketStream, WireError, DEFAULT_PORT};
use crate::guidance::GuidanceStatus;

pub const LOG_FILE: &str = "guidance.log";
const SLOTS: usize = MAX_MODULE_ID as usize + 1;

#[derive(Debug, Clone, PartialEq)]
pub struct HostConfig {
    pub listen: String,
    pub out_dir: PathBuf,
    /// Concurrent module connections accepted.
    pub slots: usize,
    /// Stop once this many frame packets have been received.
    pub exit_after: Option<u64>,
    /// How often blocked threads look at the stop flag.
    pub poll: Duration,
}

impl Default for HostConfig {
    fn default() -> Self {
        HostConfig {
            listen: format!("0.0.0.0:{DEFAULT_PORT}"),
            out_dir: PathBuf::from("host_out"),
            slots: SLOTS,
            exit_after: None,
            poll: Duration::from_millis(50),
        }
    }
}

/// Per-module bookkeeping; the stored packet has its frame stripped.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModuleState {
    pub connected: bool,
    pub connections: u64,
    pub packets: u64,
    /// Sequence numbers skipped between consecutive packets.
    pub gaps: u64,
    pub rejected: u64,
    pub last_seq: Option<u32>,
    pub latest: Option<GuidancePacket>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct HostState {
    pub modules: [ModuleState; SLOTS],
    pub refused: u64,
    pub total_packets: u64,
}

impl HostState {
    fn active(&self) -> usize {
        self.modules.iter().filter(|m| m.connected).count()
    }
}

/// One line of `guidance.log`.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct LogRecord {
    pub module_id: u8,
    pub seq: u32,
    pub timestamp_ms: u64,
    pub status: GuidanceStatus,
    pub corner: Option<[i32; 2]>,
}

impl LogRecord {
    pub fn from_packet(p: &GuidancePacket) -> Self {
        let g = &p.geometry;
        LogRecord {
            module_id: p.module_id,
            seq: p.seq,
            timestamp_ms: p.timestamp_ms,
            status: GuidanceStatus::classify(
                g.horiz.is_some(),
                g.diag.is_some(),
                g.laser.is_some(),
                g.corner.is_some(),
            ),
            corner: g.corner,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HostSummary {
    pub state: HostState,
    pub log_lines: u64,
}

impl HostSummary {
    pub fn total_gaps(&self) -> u64 {
        self.state.modules.iter().map(|m| m.gaps).sum()
    }
}

impl fmt::Display for HostSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (id, m) in self.state.modules.iter().enumerate() {
            writeln!(
                f,
                "module {id}: packets {}, gaps {}, rejected {}, connections {}",
                m.packets, m.gaps, m.rejected, m.connections
            )?;
        }
        write!(
            f,
            "total packets {}, refused connections {}, log lines {}",
            self.state.total_packets, self.state.refused, self.log_lines
        )
    }
}

pub struct Host {
    listener: TcpListener,
    cfg: HostConfig,
}

struct Shared<'a> {
    cfg: &'a HostConfig,
    state: Mutex<HostState>,
    stop: &'a AtomicBool,
    done: AtomicBool,
}

impl Shared<'_> {
    fn halted(&self) -> bool {
        self.stop.load(Ordering::Relaxed) || self.done.load(Ordering::Relaxed)
    }
}

impl Host {
    pub fn bind(cfg: HostConfig) -> Result<Host, WireError> {
        if cfg.slots == 0 || cfg.slots > SLOTS {
            return Err(WireError::Config(format!("slots must be 1..={SLOTS}, got {}", cfg.slots)));
        }
        fs::create_dir_all(&cfg.out_dir)?;
        let listener = TcpListener::bind(&cfg.listen)?;
        listener.set_nonblocking(true)?;
        Ok(Host { listener, cfg })
    }

    pub fn local_addr(&self) -> Result<SocketAddr, WireError> {
        Ok(self.listener.local_addr()?)
    }

    /// Serves until `stop` is raised or the `exit_after` count is reached.
    pub fn run(self, stop: &AtomicBool) -> Result<HostSummary, WireError> {
        let log = OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.cfg.out_dir.join(LOG_FILE))?;
        let shared = Shared {
            cfg: &self.cfg,
            state: Mutex::new(HostState::default()),
            stop,
            done: AtomicBool::new(false),
        };
        info!("host listening on {}", self.listener.local_addr()?);

        let log_lines = thread::scope(|scope| -> Result<u64, WireError> {
            let (tx, rx) = mpsc::channel::<LogRecord>();
            let writer = scope.spawn(move || write_log(log, rx));
            let shared = &shared;
            while !shared.halted() {
                match self.listener.accept() {
                    Ok((sock, peer)) => {
                        let tx = tx.clone();
                        scope.spawn(move || {
                            if let Err(e) = serve(sock, peer, shared, tx) {
                                warn!("connection {peer}: {e}");
                            }
                        });
                    }
                    Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                        thread::sleep(shared.cfg.poll.min(Duration::from_millis(10)));
                    }
                    Err(e) => {
                        error!("accept failed: {e}");
                        thread::sleep(shared.cfg.poll);
                    }
                }
            }
            drop(tx);
            writer.join().expect("log writer panicked")
        })?;

        let summary = HostSummary {
            state: shared.state.into_inner().expect("state lock"),
            log_lines,
        };
        info!("host shutting down\n{summary}");
        Ok(summary)
    }
}

pub fn run_host(cfg: HostConfig, stop: &AtomicBool) -> Result<HostSummary, WireError> {
    Host::bind(cfg)?.run(stop)
}

fn write_log(file: File, rx: mpsc::Receiver<LogRecord>) -> Result<u64, WireError> {
    let mut out = BufWriter::new(file);
    let mut n = 0;
    for rec in rx {
        serde_json::to_writer(&mut out, &rec).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
        out.flush()?;
        n += 1;
    }
    Ok(n)
}

/// Writes a frame so that readers only ever see complete files.
fn write_frame(dir: &Path, p: &GuidancePacket) -> Result<(), WireError> {
    let Some(fb) = &p.frame else { return Ok(()) };
    let png = match fb.encoding {
        FrameEncoding::Png => fb.data.clone(),
        FrameEncoding::Raw => fb.to_image()?.encode_png()?,
    };
    let tmp = dir.join(format!(".{}.png.tmp", p.seq));
    fs::write(&tmp, png)?;
    fs::rename(&tmp, dir.join(format!("{}.png", p.seq)))?;
    Ok(())
}

fn serve(
    sock: TcpStream,
    peer: SocketAddr,
    shared: &Shared<'_>,
    log: mpsc::Sender<LogRecord>,
) -> Result<(), WireError> {
    sock.set_nonblocking(false)?;
    sock.set_read_timeout(Some(shared.cfg.poll))?;
    let mut stream = PacketStream::new(sock);
    let halt = || shared.halted();

    let module_id = match stream.next(halt)? {
        Next::Packet(p) if p.is_hello() => p.module_id,
        Next::Packet(p) => {
            return Err(WireError::Config(format!(
                "expected HELLO, got seq {} from module {}",
                p.seq, p.module_id
            )))
        }
        Next::Rejected(e) => return Err(e.into()),
        Next::Eof | Next::Halted => return Ok(()),
    };
    {
        let mut st = shared.state.lock().expect("state lock");
        let m = usize::from(module_id);
        if st.modules[m].connected || st.active() >= shared.cfg.slots {
            st.refused += 1;
            warn!("refusing {peer}: module {module_id} already connected or no free slot");
            return Ok(());
        }
        st.modules[m].connected = true;
        st.modules[m].connections += 1;
    }
    info!("module {module_id} connected from {peer}");
    let dir = shared.cfg.out_dir.join(module_id.to_string());

    let result = (|| -> Result<(), WireError> {
        fs::create_dir_all(&dir)?;
        let mut conn_last = 0u32;
        loop {
            let p = match stream.next(halt)? {
                Next::Packet(p) => p,
                Next::Rejected(e) => {
                    warn!("module {module_id}: {e}");
                    shared.state.lock().expect("state lock").modules[usize::from(module_id)].rejected += 1;
                    continue;
                }
                Next::Eof => {
                    info!("module {module_id} closed the connection");
                    return Ok(());
                }
                Next::Halted => return Ok(()),
            };
            if p.is_hello() {
                continue;
            }
            if p.module_id != module_id || p.seq <= conn_last {
                warn!(
                    "module {module_id}: dropping packet claiming module {} seq {} after seq {conn_last}",
                    p.module_id, p.seq
                );
                shared.state.lock().expect("state lock").modules[usize::from(module_id)].rejected += 1;
                continue;
            }
            conn_last = p.seq;
            if let Err(e) = write_frame(&dir, &p) {
                error!("module {module_id} seq {}: frame not written: {e}", p.seq);
            }
            let record = LogRecord::from_packet(&p);
            {
                let mut st = shared.state.lock().expect("state lock");
                let m = &mut st.modules[usize::from(module_id)];
                if let Some(last) = m.last_seq {
                    if p.seq > last + 1 {
                        let missing = u64::from(p.seq - last - 1);
                        warn!("module {module_id}: {missing} packet(s) missing before seq {}", p.seq);
                        m.gaps += missing;
                    }
                }
                m.last_seq = Some(p.seq);
                m.packets += 1;
                m.latest = Some(GuidancePacket { frame: None, ..p });
                st.total_packets += 1;
                if shared.cfg.exit_after.is_some_and(|n| st.total_packets >= n) {
                    shared.done.store(true, Ordering::Relaxed);
                }
            }
            // The writer only goes away once every reader has finished.
            let _ = log.send(record);
        }
    })();

    let mut st = shared.state.lock().expect("state lock");
    let m = &mut st.modules[usize::from(module_id)];
    m.connected = false;
    if let Err(e) = &result {
        warn!("module {module_id} disconnected: {e} (last seq {:?})", m.last_seq);
    }
    result
}
