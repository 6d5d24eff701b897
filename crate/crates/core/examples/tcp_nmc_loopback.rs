// Streaming frames over TCP to the NMC server, including line noise.

use std::time::{Duration, Instant};

use bts_alarm::nmc::server::{self, ServerConfig};
use bts_alarm::nmc::NmcClient;
use bts_alarm::{AlarmFlags, NmcFrame};

fn demo() -> Vec<String> {
    let handle = server::spawn(ServerConfig { listen: "127.0.0.1:0".parse().expect("addr"), ..ServerConfig::default() })
        .expect("bind loopback");
    let mut client = NmcClient::connect(handle.local_addr()).expect("connect");
    let smoke = AlarmFlags::new(AlarmFlags::SMOKE).expect("legal mask");
    for seq in 1..=3 {
        let flags = if seq == 2 { smoke } else { AlarmFlags::default() };
        let frame = NmcFrame { site_id: 9, seq, timestamp_ms: seq as u64 * 1_000, flags, temp_tenths: 250 };
        client.send(&frame).expect("send");
        if seq == 1 {
            client.send_raw(&[0x13, 0x37]).expect("send noise");
        }
    }

    let deadline = Instant::now() + Duration::from_secs(5);
    loop {
        let snap = handle.snapshot().expect("server running");
        if snap.state.site(9).is_some_and(|s| s.last_seq == 3) || Instant::now() > deadline {
            break;
        }
        std::thread::sleep(Duration::from_millis(10));
    }
    let snap = handle.shutdown().expect("clean shutdown");
    let mut lines: Vec<String> = snap.records.iter().map(ToString::to_string).collect();
    lines.push(snap.state.dump().trim_end().to_string());
    lines
}

fn main() {
    for line in demo() {
        println!("{line}");
    }
}
