//! Per-module daemon: process each frame, then stream one packet per frame
//! to the host through a bounded queue that favours fresh results.

use std::collections::VecDeque;
use std::io::Write;
use std::net::TcpStream;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use log::{debug, info, warn};

use super::packet::{encode_packet, FrameBlock, FrameEncoding, GuidancePacket, PacketGeometry, MAX_MODULE_ID};
use super::source::FrameError;
use super::{now_ms, WireError, DEFAULT_PORT};
use crate::image::Image;
use crate::pipeline::{process_and_annotate, PipelineParams};

#[derive(Debug, Clone, PartialEq)]
pub struct DaemonConfig {
    /// `host:port` of the aggregator.
    pub host: String,
    pub module_id: u8,
    /// Frames per second ceiling; `None` sends as fast as frames are ready.
    pub fps_cap: Option<f64>,
    pub encoding: FrameEncoding,
    pub queue_depth: usize,
    pub retry_attempts: u32,
    pub retry_delay: Duration,
    pub params: PipelineParams,
}

impl Default for DaemonConfig {
    fn default() -> Self {
        DaemonConfig {
            host: format!("127.0.0.1:{DEFAULT_PORT}"),
            module_id: 0,
            fps_cap: None,
            encoding: FrameEncoding::Png,
            queue_depth: 4,
            retry_attempts: 5,
            retry_delay: Duration::from_secs(1),
            params: PipelineParams::default(),
        }
    }
}

impl DaemonConfig {
    pub fn validate(&self) -> Result<(), WireError> {
        let bad = |m: String| Err(WireError::Config(m));
        if self.module_id > MAX_MODULE_ID {
            return bad(format!("module id {} above {MAX_MODULE_ID}", self.module_id));
        }
        if self.queue_depth == 0 {
            return bad("queue depth must be at least 1".into());
        }
        if self.retry_attempts == 0 {
            return bad("retry attempts must be at least 1".into());
        }
        if let Some(f) = self.fps_cap {
            if !(f.is_finite() && f > 0.0) {
                return bad(format!("fps cap {f} must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DaemonStats {
    pub frames_processed: u64,
    pub frames_skipped: u64,
    pub packets_sent: u64,
    /// Packets evicted from a full send queue.
    pub packets_dropped: u64,
    pub reconnects: u64,
}

#[derive(Default)]
struct Queue {
    items: VecDeque<Vec<u8>>,
    closed: bool,
    failed: bool,
    dropped: u64,
}

struct SendQueue {
    state: Mutex<Queue>,
    ready: Condvar,
    depth: usize,
}

impl SendQueue {
    /// Enqueues, evicting the oldest unsent packet when full.
    fn push(&self, bytes: Vec<u8>) {
        let mut q = self.state.lock().expect("queue lock");
        if q.items.len() >= self.depth {
            q.items.pop_front();
            q.dropped += 1;
            debug!("send queue full, dropped oldest packet");
        }
        q.items.push_back(bytes);
        self.ready.notify_one();
    }

    fn pop(&self) -> Option<Vec<u8>> {
        let mut q = self.state.lock().expect("queue lock");
        loop {
            if let Some(b) = q.items.pop_front() {
                return Some(b);
            }
            if q.closed {
                return None;
            }
            q = self.ready.wait(q).expect("queue lock");
        }
    }

    fn close(&self) {
        self.state.lock().expect("queue lock").closed = true;
        self.ready.notify_all();
    }

    fn fail(&self) {
        self.state.lock().expect("queue lock").failed = true;
    }

    fn failed(&self) -> bool {
        self.state.lock().expect("queue lock").failed
    }
}

/// Connects and greets the host, retrying `cfg.retry_attempts` times.
fn connect(cfg: &DaemonConfig) -> Result<TcpStream, WireError> {
    let hello = encode_packet(&GuidancePacket::hello(cfg.module_id, now_ms()))?;
    let mut last = None;
    for attempt in 1..=cfg.retry_attempts {
        let result = TcpStream::connect(&cfg.host).and_then(|mut s| {
            s.set_nodelay(true)?;
            s.write_all(&hello)?;
            Ok(s)
        });
        match result {
            Ok(s) => {
                info!("module {} connected to {}", cfg.module_id, cfg.host);
                return Ok(s);
            }
            Err(e) => {
                warn!("connect to {} failed (attempt {attempt}/{}): {e}", cfg.host, cfg.retry_attempts);
                last = Some(e);
                if attempt < cfg.retry_attempts {
                    thread::sleep(cfg.retry_delay);
                }
            }
        }
    }
    Err(WireError::Unreachable {
        addr: cfg.host.clone(),
        attempts: cfg.retry_attempts,
        last: last.expect("at least one attempt"),
    })
}

fn sender(mut stream: TcpStream, queue: &SendQueue, cfg: &DaemonConfig) -> Result<(u64, u64), WireError> {
    let (mut sent, mut reconnects) = (0, 0);
    while let Some(bytes) = queue.pop() {
        if let Err(e) = stream.write_all(&bytes) {
            warn!("module {} lost connection: {e}", cfg.module_id);
            stream = connect(cfg)?;
            reconnects += 1;
            stream.write_all(&bytes)?;
        }
        sent += 1;
    }
    stream.flush()?;
    let _ = stream.shutdown(std::net::Shutdown::Write);
    Ok((sent, reconnects))
}

/// Sleeps until `deadline` or until `stop` is raised.
fn wait_until(deadline: Instant, stop: &AtomicBool) {
    loop {
        let now = Instant::now();
        if now >= deadline || stop.load(Ordering::Relaxed) {
            return;
        }
        thread::sleep((deadline - now).min(Duration::from_millis(20)));
    }
}

/// Runs until the source is exhausted or `stop` is raised. The first packet
/// on every connection is a HELLO (seq 0); frames are numbered from 1. Frame
/// `i` (from 0) is released no earlier than `(i + 1) / fps_cap` seconds after
/// start.
pub fn run_module_daemon<S>(source: S, cfg: &DaemonConfig, stop: &AtomicBool) -> Result<DaemonStats, WireError>
where
    S: Iterator<Item = Result<Image, FrameError>>,
{
    cfg.validate()?;
    let stream = connect(cfg)?;
    let queue = SendQueue {
        state: Mutex::new(Queue::default()),
        ready: Condvar::new(),
        depth: cfg.queue_depth,
    };
    let mut stats = DaemonStats::default();
    let start = Instant::now();

    let sent = thread::scope(|scope| {
        let handle = scope.spawn(|| {
            let r = sender(stream, &queue, cfg);
            if r.is_err() {
                queue.fail();
            }
            r
        });

        let produced = (|| -> Result<(), WireError> {
        let mut seq = 0u32;
        for (i, frame) in source.enumerate() {
            if stop.load(Ordering::Relaxed) || queue.failed() {
                break;
            }
            let img = match frame {
                Ok(img) => img.to_rgb8(),
                Err(e) => {
                    warn!("skipping frame: {e}");
                    stats.frames_skipped += 1;
                    continue;
                }
            };
            let timestamp_ms = now_ms();
            let (result, annotated) = match process_and_annotate(&img, &cfg.params) {
                Ok(r) => r,
                Err(e) => {
                    warn!("skipping frame {i}: {e}");
                    stats.frames_skipped += 1;
                    continue;
                }
            };
            stats.frames_processed += 1;
            seq += 1;
            let packet = GuidancePacket {
                module_id: cfg.module_id,
                seq,
                timestamp_ms,
                geometry: PacketGeometry::from_result(&result),
                frame: Some(FrameBlock::from_image(&annotated, cfg.encoding)?),
            };
            let bytes = encode_packet(&packet)?;
            if let Some(fps) = cfg.fps_cap {
                wait_until(start + Duration::from_secs_f64((i + 1) as f64 / fps), stop);
            }
            queue.push(bytes);
        }
        Ok(())
        })();
        queue.close();
        let sent = handle.join().expect("sender thread panicked");
        produced.and(sent)
    })?;

    stats.packets_sent = sent.0;
    stats.reconnects = sent.1;
    stats.packets_dropped = queue.state.lock().expect("queue lock").dropped;
    info!(
        "module {} done: {} processed, {} sent, {} dropped, {} skipped",
        cfg.module_id, stats.frames_processed, stats.packets_sent, stats.packets_dropped, stats.frames_skipped
    );
    Ok(stats)
}
