use std::collections::BTreeMap;
use std::sync::atomic::AtomicBool;
use std::thread;
use std::time::{Duration, Instant};

use crane_guide::guidance::GuidanceStatus;
use crane_guide::synth::SweepSpec;
use crane_guide::wire::packet::{encode_packet, FrameBlock, FrameEncoding, GuidancePacket, PacketGeometry};
use crane_guide::wire::{
    decode_packet, run_module_daemon, DaemonConfig, Host, HostConfig, LogRecord, SynthSource, WireError,
};

// Bytes assembled field by field with Python's struct module.
const GOLDEN: &str = "474c47310101000d0000000701020304050607080000003c\
0000000a000001900000027600000192ffffffffffffffffffffffffffffffff\
0000014a000000f0ffffffffffffffff000100010000000003010203";

fn golden_packet() -> GuidancePacket {
    GuidancePacket {
        module_id: 1,
        seq: 7,
        timestamp_ms: 0x0102_0304_0506_0708,
        geometry: PacketGeometry {
            horiz: Some([[10, 400], [630, 402]]),
            diag: None,
            laser: Some([330, 240]),
            corner: None,
        },
        frame: Some(FrameBlock {
            width: 1,
            height: 1,
            encoding: FrameEncoding::Raw,
            data: vec![1, 2, 3],
        }),
    }
}

fn hex(b: &[u8]) -> String {
    b.iter().map(|x| format!("{x:02x}")).collect()
}

#[test]
fn golden_bytes() {
    let b = encode_packet(&golden_packet()).unwrap();
    assert_eq!(hex(&b), GOLDEN);
    assert_eq!(decode_packet(&b).unwrap(), golden_packet());
}

fn host(dir: &std::path::Path, exit_after: Option<u64>) -> Host {
    Host::bind(HostConfig {
        listen: "127.0.0.1:0".into(),
        out_dir: dir.to_path_buf(),
        exit_after,
        ..HostConfig::default()
    })
    .unwrap()
}

fn daemon_cfg(addr: std::net::SocketAddr, module_id: u8) -> DaemonConfig {
    DaemonConfig {
        host: addr.to_string(),
        module_id,
        retry_delay: Duration::from_millis(100),
        ..DaemonConfig::default()
    }
}

fn read_log(dir: &std::path::Path) -> Vec<LogRecord> {
    std::fs::read_to_string(dir.join("guidance.log"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn three_modules_loopback() {
    let out = tempfile::tempdir().unwrap();
    let h = host(out.path(), Some(30));
    let addr = h.local_addr().unwrap();
    let stop = AtomicBool::new(false);
    let t0 = Instant::now();
    let summary = thread::scope(|s| {
        let hh = s.spawn(|| h.run(&stop));
        for id in 0..3u8 {
            let stop = &stop;
            s.spawn(move || {
                let src = SynthSource::new(SweepSpec::default(), vec![1.0, 2.0, 3.0, 4.0, 5.0], u64::from(id), 10);
                let st = run_module_daemon(src, &daemon_cfg(addr, id), stop).unwrap();
                assert_eq!(st.packets_sent, 10);
            });
        }
        hh.join().unwrap().unwrap()
    });
    assert!(t0.elapsed() < Duration::from_secs(30));
    assert_eq!(summary.state.total_packets, 30);
    assert_eq!(summary.total_gaps(), 0);
    assert_eq!(summary.log_lines, 30);

    let log = read_log(out.path());
    assert_eq!(log.len(), 30);
    let mut per: BTreeMap<u8, Vec<u32>> = BTreeMap::new();
    for r in &log {
        per.entry(r.module_id).or_default().push(r.seq);
        assert_eq!(r.status, GuidanceStatus::Full, "{r:?}");
    }
    for id in 0..3u8 {
        assert_eq!(per[&id], (1..=10).collect::<Vec<_>>());
        for seq in 1..=10 {
            let f = out.path().join(id.to_string()).join(format!("{seq}.png"));
            let img = crane_guide::Image::open(&f).unwrap();
            assert_eq!(img.dims(), (640, 480));
        }
    }
}

#[test]
fn duplicate_module_is_refused() {
    let out = tempfile::tempdir().unwrap();
    let h = host(out.path(), None);
    let addr = h.local_addr().unwrap();
    let stop = AtomicBool::new(false);
    thread::scope(|s| {
        let hh = s.spawn(|| h.run(&stop));
        // Hold module 0's slot open with a bare HELLO.
        let mut first = std::net::TcpStream::connect(addr).unwrap();
        std::io::Write::write_all(&mut first, &encode_packet(&GuidancePacket::hello(0, 1)).unwrap()).unwrap();
        thread::sleep(Duration::from_millis(300));
        let second = std::net::TcpStream::connect(addr).unwrap();
        std::io::Write::write_all(&mut &second, &encode_packet(&GuidancePacket::hello(0, 2)).unwrap()).unwrap();
        // The host closes the refused socket: reads hit EOF.
        second.set_read_timeout(Some(Duration::from_secs(5))).unwrap();
        let mut buf = [0u8; 1];
        assert_eq!(std::io::Read::read(&mut &second, &mut buf).unwrap(), 0);
        // The first connection still works.
        let mut g = golden_packet();
        g.module_id = 0;
        g.seq = 1;
        std::io::Write::write_all(&mut first, &encode_packet(&g).unwrap()).unwrap();
        drop(first);
        thread::sleep(Duration::from_millis(300));
        stop.store(true, std::sync::atomic::Ordering::Relaxed);
        let summary = hh.join().unwrap().unwrap();
        assert_eq!(summary.state.refused, 1);
        assert_eq!(summary.state.modules[0].packets, 1);
        assert_eq!(summary.state.modules[0].connections, 1);
    });
    assert!(out.path().join("0").join("1.png").exists());
}

#[test]
fn dead_module_does_not_disturb_others() {
    let out = tempfile::tempdir().unwrap();
    let h = host(out.path(), None);
    let addr = h.local_addr().unwrap();
    let stop = AtomicBool::new(false);
    thread::scope(|s| {
        let hh = s.spawn(|| h.run(&stop));
        let mut a = std::net::TcpStream::connect(addr).unwrap();
        let mut b = std::net::TcpStream::connect(addr).unwrap();
        let send = |s: &mut std::net::TcpStream, p: &GuidancePacket| {
            std::io::Write::write_all(s, &encode_packet(p).unwrap()).unwrap()
        };
        send(&mut a, &GuidancePacket::hello(1, 0));
        send(&mut b, &GuidancePacket::hello(2, 0));
        let pkt = |id, seq| GuidancePacket { module_id: id, seq, ..GuidancePacket::hello(id, 5) };
        send(&mut a, &pkt(1, 1));
        // Module 1 dies halfway through a packet.
        let half = encode_packet(&pkt(1, 2)).unwrap();
        std::io::Write::write_all(&mut a, &half[..30]).unwrap();
        drop(a);
        send(&mut b, &pkt(2, 1));
        send(&mut b, &pkt(2, 3));
        thread::sleep(Duration::from_millis(400));
        stop.store(true, std::sync::atomic::Ordering::Relaxed);
        let summary = hh.join().unwrap().unwrap();
        assert_eq!(summary.state.modules[1].packets, 1);
        assert_eq!(summary.state.modules[2].packets, 2);
        assert_eq!(summary.state.modules[2].gaps, 1);
        assert!(!summary.state.modules[1].connected);
    });
}

#[test]
fn unreachable_host_fails_after_retries() {
    // Grab a free port, then release it so nothing listens there.
    let addr = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap();
    let cfg = DaemonConfig {
        retry_delay: Duration::from_millis(20),
        ..daemon_cfg(addr, 0)
    };
    let stop = AtomicBool::new(false);
    let err = run_module_daemon(std::iter::empty(), &cfg, &stop).unwrap_err();
    assert!(matches!(err, WireError::Unreachable { attempts: 5, .. }), "{err}");
}

#[test]
fn fps_cap_paces_frames() {
    let out = tempfile::tempdir().unwrap();
    let h = host(out.path(), Some(10));
    let addr = h.local_addr().unwrap();
    let stop = AtomicBool::new(false);
    thread::scope(|s| {
        let hh = s.spawn(|| h.run(&stop));
        let frames = (0..10).map(|_| Ok(crane_guide::Image::rgb(32, 24, [90, 90, 90]).unwrap()));
        let cfg = DaemonConfig {
            fps_cap: Some(5.0),
            encoding: FrameEncoding::Raw,
            ..daemon_cfg(addr, 2)
        };
        let t0 = Instant::now();
        let st = run_module_daemon(frames, &cfg, &stop).unwrap();
        assert!(t0.elapsed() >= Duration::from_secs(2), "{:?}", t0.elapsed());
        assert_eq!(st.packets_sent, 10);
        let summary = hh.join().unwrap().unwrap();
        assert_eq!(summary.state.modules[2].packets, 10);
    });
    let log = read_log(out.path());
    assert!(log.iter().all(|r| r.status == GuidanceStatus::Empty));
}
