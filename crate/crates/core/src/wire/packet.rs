//! GLG1 framing. Every packet is a 24-byte header, a 48-byte geometry
//! block and, when flagged, a frame block:
//!
//! ```text
//! 0   magic "GLG1"      4
//! 4   version = 1       u8
//! 5   module_id 0..=2   u8
//! 6   flags             u16
//! 8   seq               u32
//! 12  timestamp_ms      u64
//! 20  payload_len       u32   bytes after the header
//! 24  6 x (i32 x, i32 y)      horiz p0, p1, diag p0, p1, laser, corner
//! 72  width u16, height u16, encoding u8, data_len u32, data
//! ```
//!
//! All integers are big-endian. Absent points are (-1, -1) and their flag
//! bit is clear. `payload_len` lets a reader skip a packet it rejects
//! without losing the stream.

use thiserror::Error;

use crate::geom::Point;
use crate::guidance::GuidanceResult;
use crate::image::{Image, PixelFormat};

pub const MAGIC: [u8; 4] = *b"GLG1";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 24;
pub const GEOMETRY_LEN: usize = 48;
pub const FRAME_HEADER_LEN: usize = 9;
pub const MAX_MODULE_ID: u8 = 2;
/// Largest payload a decoder accepts before declaring the stream corrupt.
pub const MAX_PAYLOAD: u32 = 64 << 20;
pub const ABSENT: [i32; 2] = [-1, -1];

pub const FLAG_FRAME: u16 = 1 << 0;
pub const FLAG_FULL: u16 = 1 << 1;
pub const FLAG_LASER: u16 = 1 << 2;
pub const FLAG_HORIZ: u16 = 1 << 3;
pub const FLAG_DIAG: u16 = 1 << 4;
const KNOWN_FLAGS: u16 = 0x1F;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("bad magic {0:02x?}")]
    BadMagic(Vec<u8>),
    #[error("unsupported protocol version {0}")]
    BadVersion(u8),
    #[error("payload of {0} bytes exceeds limit")]
    Oversized(u32),
    /// The packet was malformed but fully consumed; the stream is still in sync.
    #[error("packet rejected: {0}")]
    Rejected(String),
    #[error("stream ended inside a packet ({0} bytes pending)")]
    Truncated(usize),
    #[error("invalid packet: {0}")]
    Invalid(String),
}

impl ProtocolError {
    /// Whether the connection has to be dropped.
    pub fn is_fatal(&self) -> bool {
        !matches!(self, ProtocolError::Rejected(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum FrameEncoding {
    Raw = 0,
    Png = 1,
}

impl FrameEncoding {
    fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(FrameEncoding::Raw),
            1 => Some(FrameEncoding::Png),
            _ => None,
        }
    }
}

impl std::str::FromStr for FrameEncoding {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "raw" => Ok(FrameEncoding::Raw),
            "png" => Ok(FrameEncoding::Png),
            _ => Err(format!("unknown frame encoding '{s}' (expected raw or png)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameBlock {
    pub width: u16,
    pub height: u16,
    pub encoding: FrameEncoding,
    pub data: Vec<u8>,
}

impl FrameBlock {
    pub fn from_image(img: &Image, encoding: FrameEncoding) -> Result<Self, ProtocolError> {
        let (w, h) = img.dims();
        let (width, height) = match (u16::try_from(w), u16::try_from(h)) {
            (Ok(a), Ok(b)) => (a, b),
            _ => return Err(ProtocolError::Invalid(format!("frame {w}x{h} too large"))),
        };
        let rgb = img.clone().to_rgb8();
        let data = match encoding {
            FrameEncoding::Raw => rgb.into_data(),
            FrameEncoding::Png => rgb
                .encode_png()
                .map_err(|e| ProtocolError::Invalid(e.to_string()))?,
        };
        Ok(FrameBlock { width, height, encoding, data })
    }

    pub fn to_image(&self) -> crate::Result<Image> {
        match self.encoding {
            FrameEncoding::Raw => Image::from_raw(
                self.width.into(),
                self.height.into(),
                PixelFormat::Rgb8,
                self.data.clone(),
            ),
            FrameEncoding::Png => Image::decode(&self.data),
        }
    }

    fn check(&self) -> Result<(), String> {
        if self.encoding == FrameEncoding::Raw {
            let want = usize::from(self.width) * usize::from(self.height) * 3;
            if self.data.len() != want {
                return Err(format!(
                    "raw {}x{} frame needs {want} bytes, has {}",
                    self.width,
                    self.height,
                    self.data.len()
                ));
            }
        }
        Ok(())
    }
}

/// Integer pixel geometry carried by a packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PacketGeometry {
    pub horiz: Option<[[i32; 2]; 2]>,
    pub diag: Option<[[i32; 2]; 2]>,
    pub laser: Option<[i32; 2]>,
    pub corner: Option<[i32; 2]>,
}

fn quantize(p: Point) -> [i32; 2] {
    let q = [p.x.round() as i32, p.y.round() as i32];
    // A real point must never read back as absent.
    if q == ABSENT {
        [-2, -1]
    } else {
        q
    }
}

impl PacketGeometry {
    /// Lines are sent as their chords across the frame; the corner only
    /// accompanies a full result.
    pub fn from_result(r: &GuidanceResult) -> Self {
        let line = |l: &Option<crate::geom::InfiniteLine>, src: &Option<crate::geom::LineSegment>| {
            l.and_then(|l| l.clipped)
                .map(|(a, b)| [quantize(a), quantize(b)])
                .or_else(|| src.map(|s| [quantize(s.p0), quantize(s.p1)]))
        };
        let horiz = line(&r.selection.horizontal, &r.selection.horizontal_source);
        let diag = line(&r.selection.diagonal, &r.selection.diagonal_source);
        let laser = r.laser.map(|s| quantize(s.center));
        let corner = match (horiz, diag, laser) {
            (Some(_), Some(_), Some(_)) => r.corner.map(quantize),
            _ => None,
        };
        PacketGeometry { horiz, diag, laser, corner }
    }

    pub fn is_full(&self) -> bool {
        self.corner.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GuidancePacket {
    pub module_id: u8,
    pub seq: u32,
    pub timestamp_ms: u64,
    pub geometry: PacketGeometry,
    pub frame: Option<FrameBlock>,
}

impl GuidancePacket {
    /// Connection greeting: seq 0, no flags, no frame.
    pub fn hello(module_id: u8, timestamp_ms: u64) -> Self {
        GuidancePacket {
            module_id,
            seq: 0,
            timestamp_ms,
            geometry: PacketGeometry::default(),
            frame: None,
        }
    }

    pub fn is_hello(&self) -> bool {
        self.seq == 0 && self.flags() == 0
    }

    pub fn flags(&self) -> u16 {
        let g = &self.geometry;
        let mut f = 0;
        if self.frame.is_some() {
            f |= FLAG_FRAME;
        }
        if g.corner.is_some() {
            f |= FLAG_FULL;
        }
        if g.laser.is_some() {
            f |= FLAG_LASER;
        }
        if g.horiz.is_some() {
            f |= FLAG_HORIZ;
        }
        if g.diag.is_some() {
            f |= FLAG_DIAG;
        }
        f
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        let bad = |m: String| Err(ProtocolError::Invalid(m));
        if self.module_id > MAX_MODULE_ID {
            return bad(format!("module id {} above {MAX_MODULE_ID}", self.module_id));
        }
        let g = &self.geometry;
        if g.corner.is_some() && !(g.horiz.is_some() && g.diag.is_some() && g.laser.is_some()) {
            return bad("corner without horizontal, diagonal and laser".into());
        }
        let present = g
            .horiz
            .iter()
            .chain(g.diag.iter())
            .flatten()
            .chain(g.laser.iter())
            .chain(g.corner.iter());
        if present.into_iter().any(|p| *p == ABSENT) {
            return bad("present point equals the absent sentinel".into());
        }
        if let Some(fb) = &self.frame {
            fb.check().map_err(ProtocolError::Invalid)?;
            if fb.data.len() > (MAX_PAYLOAD as usize - GEOMETRY_LEN - FRAME_HEADER_LEN) {
                return bad(format!("frame data of {} bytes too large", fb.data.len()));
            }
        }
        Ok(())
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_LEN
            + GEOMETRY_LEN
            + self
                .frame
                .as_ref()
                .map_or(0, |f| FRAME_HEADER_LEN + f.data.len())
    }
}

pub fn encode_packet(p: &GuidancePacket) -> Result<Vec<u8>, ProtocolError> {
    p.validate()?;
    let mut out = Vec::with_capacity(p.encoded_len());
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(p.module_id);
    out.extend_from_slice(&p.flags().to_be_bytes());
    out.extend_from_slice(&p.seq.to_be_bytes());
    out.extend_from_slice(&p.timestamp_ms.to_be_bytes());
    let payload_len = (p.encoded_len() - HEADER_LEN) as u32;
    out.extend_from_slice(&payload_len.to_be_bytes());

    let g = &p.geometry;
    let pair = |s: Option<[[i32; 2]; 2]>| s.unwrap_or([ABSENT, ABSENT]);
    let [h0, h1] = pair(g.horiz);
    let [d0, d1] = pair(g.diag);
    for pt in [h0, h1, d0, d1, g.laser.unwrap_or(ABSENT), g.corner.unwrap_or(ABSENT)] {
        out.extend_from_slice(&pt[0].to_be_bytes());
        out.extend_from_slice(&pt[1].to_be_bytes());
    }

    if let Some(fb) = &p.frame {
        out.extend_from_slice(&fb.width.to_be_bytes());
        out.extend_from_slice(&fb.height.to_be_bytes());
        out.push(fb.encoding as u8);
        out.extend_from_slice(&(fb.data.len() as u32).to_be_bytes());
        out.extend_from_slice(&fb.data);
    }
    debug_assert_eq!(out.len(), p.encoded_len());
    Ok(out)
}

fn be_u16(b: &[u8], at: usize) -> u16 {
    u16::from_be_bytes([b[at], b[at + 1]])
}

fn be_u32(b: &[u8], at: usize) -> u32 {
    u32::from_be_bytes(b[at..at + 4].try_into().expect("4 bytes"))
}

fn be_i32(b: &[u8], at: usize) -> i32 {
    i32::from_be_bytes(b[at..at + 4].try_into().expect("4 bytes"))
}

fn be_u64(b: &[u8], at: usize) -> u64 {
    u64::from_be_bytes(b[at..at + 8].try_into().expect("8 bytes"))
}

enum Step {
    NeedMore,
    Done(Result<GuidancePacket, ProtocolError>, usize),
}

/// Examines the front of `buf`. Fatal errors come back as `Err`; a rejected
/// packet is reported together with its length so it can be skipped.
fn step(buf: &[u8]) -> Result<Step, ProtocolError> {
    let n = buf.len().min(MAGIC.len());
    if buf[..n] != MAGIC[..n] {
        return Err(ProtocolError::BadMagic(buf[..n].to_vec()));
    }
    if buf.len() > 4 && buf[4] != VERSION {
        return Err(ProtocolError::BadVersion(buf[4]));
    }
    if buf.len() < HEADER_LEN {
        return Ok(Step::NeedMore);
    }
    let payload_len = be_u32(buf, 20);
    if payload_len > MAX_PAYLOAD {
        return Err(ProtocolError::Oversized(payload_len));
    }
    let total = HEADER_LEN + payload_len as usize;
    if buf.len() < total {
        return Ok(Step::NeedMore);
    }
    Ok(Step::Done(parse_body(&buf[..total]), total))
}

fn parse_body(b: &[u8]) -> Result<GuidancePacket, ProtocolError> {
    let reject = |m: String| Err(ProtocolError::Rejected(m));
    let module_id = b[5];
    let flags = be_u16(b, 6);
    let seq = be_u32(b, 8);
    let timestamp_ms = be_u64(b, 12);
    let payload = b.len() - HEADER_LEN;

    if module_id > MAX_MODULE_ID {
        return reject(format!("module id {module_id}"));
    }
    if flags & !KNOWN_FLAGS != 0 {
        return reject(format!("unknown flag bits {flags:#06x}"));
    }
    if payload < GEOMETRY_LEN {
        return reject(format!("payload of {payload} bytes shorter than geometry"));
    }

    let mut pts = [[0i32; 2]; 6];
    for (i, pt) in pts.iter_mut().enumerate() {
        let at = HEADER_LEN + i * 8;
        *pt = [be_i32(b, at), be_i32(b, at + 4)];
    }
    // Each flag must agree exactly with the sentinels of its points.
    let group = |bit: u16, ps: &[[i32; 2]]| -> Result<bool, ProtocolError> {
        let set = flags & bit != 0;
        let absent = ps.iter().all(|p| *p == ABSENT);
        let any_absent = ps.contains(&ABSENT);
        match (set, absent, any_absent) {
            (true, _, false) => Ok(true),
            (false, true, _) => Ok(false),
            _ => Err(ProtocolError::Rejected(format!(
                "flag {bit:#x} disagrees with point values {ps:?}"
            ))),
        }
    };
    let horiz = group(FLAG_HORIZ, &pts[0..2])?.then(|| [pts[0], pts[1]]);
    let diag = group(FLAG_DIAG, &pts[2..4])?.then(|| [pts[2], pts[3]]);
    let laser = group(FLAG_LASER, &pts[4..5])?.then_some(pts[4]);
    let corner = group(FLAG_FULL, &pts[5..6])?.then_some(pts[5]);
    if corner.is_some() && (horiz.is_none() || diag.is_none() || laser.is_none()) {
        return reject("full flag without all inputs".into());
    }

    let rest = &b[HEADER_LEN + GEOMETRY_LEN..];
    let frame = if flags & FLAG_FRAME != 0 {
        if rest.len() < FRAME_HEADER_LEN {
            return reject("frame flag without frame header".into());
        }
        let width = be_u16(rest, 0);
        let height = be_u16(rest, 2);
        let Some(encoding) = FrameEncoding::from_u8(rest[4]) else {
            return reject(format!("unknown frame encoding {}", rest[4]));
        };
        let data_len = be_u32(rest, 5) as usize;
        if rest.len() != FRAME_HEADER_LEN + data_len {
            return reject(format!(
                "frame data length {data_len} disagrees with payload length {payload}"
            ));
        }
        let fb = FrameBlock {
            width,
            height,
            encoding,
            data: rest[FRAME_HEADER_LEN..].to_vec(),
        };
        fb.check().map_err(ProtocolError::Rejected)?;
        Some(fb)
    } else {
        if !rest.is_empty() {
            return reject(format!("{} trailing bytes without frame flag", rest.len()));
        }
        None
    };

    Ok(GuidancePacket {
        module_id,
        seq,
        timestamp_ms,
        geometry: PacketGeometry { horiz, diag, laser, corner },
        frame,
    })
}

/// Decodes exactly one packet occupying all of `bytes`.
pub fn decode_packet(bytes: &[u8]) -> Result<GuidancePacket, ProtocolError> {
    if bytes.is_empty() {
        return Err(ProtocolError::Truncated(0));
    }
    match step(bytes)? {
        Step::NeedMore => Err(ProtocolError::Truncated(bytes.len())),
        Step::Done(r, used) if used == bytes.len() => r,
        Step::Done(_, used) => Err(ProtocolError::Invalid(format!(
            "{} bytes after the packet",
            bytes.len() - used
        ))),
    }
}

/// Incremental decoder: feed bytes as they arrive and pull packets out.
#[derive(Debug, Default)]
pub struct Decoder {
    buf: Vec<u8>,
}

impl Decoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    pub fn pending(&self) -> usize {
        self.buf.len()
    }

    /// `Ok(None)` means more bytes are needed. A `Rejected` error consumes
    /// the bad packet; any other error leaves the stream unusable.
    pub fn next_packet(&mut self) -> Result<Option<GuidancePacket>, ProtocolError> {
        if self.buf.is_empty() {
            return Ok(None);
        }
        match step(&self.buf)? {
            Step::NeedMore => Ok(None),
            Step::Done(r, used) => {
                self.buf.drain(..used);
                r.map(Some)
            }
        }
    }

    /// End of stream: clean only on a packet boundary.
    pub fn finish(&self) -> Result<(), ProtocolError> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(ProtocolError::Truncated(self.buf.len()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn minimal() -> GuidancePacket {
        GuidancePacket::hello(0, 0)
    }

    #[test]
    fn minimal_packet_is_72_bytes() {
        let b = encode_packet(&minimal()).unwrap();
        assert_eq!(b.len(), 72);
        assert_eq!(&b[..4], &[0x47, 0x4C, 0x47, 0x31]);
    }

    #[test]
    fn raw_2x2_frame_adds_block() {
        let mut p = minimal();
        p.frame = Some(FrameBlock {
            width: 2,
            height: 2,
            encoding: FrameEncoding::Raw,
            data: vec![7; 12],
        });
        assert_eq!(encode_packet(&p).unwrap().len(), 72 + 9 + 12);
    }

    #[test]
    fn module_id_above_two_is_invalid() {
        let p = GuidancePacket::hello(3, 0);
        assert!(matches!(encode_packet(&p), Err(ProtocolError::Invalid(_))));
    }

    #[test]
    fn bad_magic_is_fatal() {
        let mut b = encode_packet(&minimal()).unwrap();
        b[..4].copy_from_slice(b"XXXX");
        let mut d = Decoder::new();
        d.push(&b);
        let e = d.next_packet().unwrap_err();
        assert!(matches!(e, ProtocolError::BadMagic(_)) && e.is_fatal());
    }

    #[test]
    fn bad_version_is_fatal() {
        let mut b = encode_packet(&minimal()).unwrap();
        b[4] = 2;
        assert_eq!(decode_packet(&b), Err(ProtocolError::BadVersion(2)));
    }

    #[test]
    fn inconsistent_flags_reject_only_that_packet() {
        let good = GuidancePacket { seq: 5, ..minimal() };
        let mut bad = encode_packet(&GuidancePacket { seq: 4, ..minimal() }).unwrap();
        bad[7] |= FLAG_LASER as u8; // laser flagged, point still (-1,-1)
        let mut d = Decoder::new();
        d.push(&bad);
        d.push(&encode_packet(&good).unwrap());
        let e = d.next_packet().unwrap_err();
        assert!(!e.is_fatal(), "{e}");
        assert_eq!(d.next_packet().unwrap(), Some(good));
        d.finish().unwrap();
    }

    #[test]
    fn unknown_flag_bit_rejected() {
        let mut b = encode_packet(&minimal()).unwrap();
        b[6] = 0x80;
        assert!(matches!(decode_packet(&b), Err(ProtocolError::Rejected(_))));
    }

    #[test]
    fn header_split_across_reads() {
        let p = GuidancePacket { seq: 9, timestamp_ms: 123, ..minimal() };
        let b = encode_packet(&p).unwrap();
        let mut d = Decoder::new();
        d.push(&b[..10]);
        assert_eq!(d.next_packet().unwrap(), None);
        d.push(&b[10..]);
        assert_eq!(d.next_packet().unwrap(), Some(p));
    }

    #[test]
    fn truncation_is_clean_only_on_boundary() {
        let b = encode_packet(&minimal()).unwrap();
        let mut d = Decoder::new();
        d.push(&b);
        d.next_packet().unwrap().unwrap();
        d.finish().unwrap();
        d.push(&b[..30]);
        assert_eq!(d.next_packet().unwrap(), None);
        assert_eq!(d.finish(), Err(ProtocolError::Truncated(30)));
    }

    pub(crate) fn arb_point() -> impl Strategy<Value = [i32; 2]> {
        [any::<i32>(), any::<i32>()].prop_filter("not sentinel", |p| *p != ABSENT)
    }

    prop_compose! {
        fn arb_packet()(
            module_id in 0u8..=2,
            seq in any::<u32>(),
            timestamp_ms in any::<u64>(),
            horiz in proptest::option::of([arb_point(), arb_point()]),
            diag in proptest::option::of([arb_point(), arb_point()]),
            laser in proptest::option::of(arb_point()),
            corner in arb_point(),
            with_corner in any::<bool>(),
            frame in proptest::option::of((1u16..6, 1u16..6, any::<bool>(), any::<u8>())),
        ) -> GuidancePacket {
            let corner = (with_corner && horiz.is_some() && diag.is_some() && laser.is_some())
                .then_some(corner);
            let frame = frame.map(|(w, h, raw, v)| FrameBlock {
                width: w,
                height: h,
                encoding: if raw { FrameEncoding::Raw } else { FrameEncoding::Png },
                data: vec![v; if raw { usize::from(w) * usize::from(h) * 3 } else { usize::from(v) }],
            });
            GuidancePacket {
                module_id, seq, timestamp_ms,
                geometry: PacketGeometry { horiz, diag, laser, corner },
                frame,
            }
        }
    }

    proptest! {
        #[test]
        fn round_trip(p in arb_packet()) {
            let b = encode_packet(&p).unwrap();
            prop_assert_eq!(b.len(), p.encoded_len());
            prop_assert_eq!(decode_packet(&b).unwrap(), p);
        }

        #[test]
        fn any_chunking_decodes(p in arb_packet(), cut in 1usize..64) {
            let b = encode_packet(&p).unwrap();
            let mut d = Decoder::new();
            let mut got = None;
            for c in b.chunks(cut) {
                d.push(c);
                if let Some(x) = d.next_packet().unwrap() {
                    got = Some(x);
                }
            }
            prop_assert_eq!(got, Some(p));
            prop_assert!(d.finish().is_ok());
        }
    }
}
