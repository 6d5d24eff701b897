//! Acceptance suite. Each criterion runs standalone against its stated
//! tolerance and runtime bound and prints one PASS/FAIL line.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use bts_alarm::firmware::{relay, Button, SettingsFsm};
use bts_alarm::nmc::server::{self, ServerConfig};
use bts_alarm::nmc::{AlarmBox, EventKind, NmcClient, DEFAULT_OFFLINE_TIMEOUT_MS};
use bts_alarm::sensors::lm35_output;
use bts_alarm::sim::Site;
use bts_alarm::{
    adc_convert, classify_temperature, decode_temperature, emit_trace, parse_scenario, run_simulation, AdcConfig,
    AlarmFlags, EepromImage, Firmware, NmcFrame, NmcState, TempStatus, Thresholds, TraceFormat,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, Duration);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn temperature_accuracy() -> Outcome {
    let adc = AdcConfig::default();
    let mut worst = 0.0f64;
    for i in 0..=2000u32 {
        let t = f64::from(i) * 0.05;
        let code = adc_convert(lm35_output(t), &adc).map_err(|e| e.to_string())?;
        let decoded = decode_temperature(code, &adc).map_err(|e| e.to_string())?;
        worst = worst.max((decoded - t).abs());
    }
    ensure(worst < 0.49, || format!("worst error {worst:.4} C"))?;
    Ok(format!("2001 points, worst error {worst:.4} C < 0.49 C"))
}

/// Three-way comparator written as a count of thresholds reached.
fn brute_force_status(temp: f64, alert: u8, danger: u8) -> TempStatus {
    match [alert, danger].iter().filter(|&&th| temp >= f64::from(th)).count() {
        0 => TempStatus::Normal,
        1 => TempStatus::Alert,
        _ => TempStatus::Danger,
    }
}

fn classification_oracle() -> Outcome {
    let adc = AdcConfig::default();
    let mut temps: Vec<f64> = (0..=1023u16).map(|c| decode_temperature(c, &adc).unwrap()).collect();
    for deg in -10..=110 {
        let d = f64::from(deg);
        temps.extend([d - 1e-9, d, d + 1e-9]);
    }
    let (mut cases, mut alert_edges, mut danger_edges) = (0u64, 0u64, 0u64);
    for danger in 0..=100u8 {
        for alert in 0..=danger {
            let th = Thresholds::new(alert, danger).map_err(|e| e.to_string())?;
            for &temp in &temps {
                let got = classify_temperature(temp, &th);
                let want = brute_force_status(temp, alert, danger);
                ensure(got == want, || format!("temp={temp} {th}: got {got:?}, want {want:?}"))?;
                alert_edges += u64::from(temp == f64::from(alert));
                danger_edges += u64::from(temp == f64::from(danger));
                cases += 1;
            }
        }
    }
    ensure(cases >= 100_000, || format!("only {cases} cases"))?;
    ensure(alert_edges > 0 && danger_edges > 0, || "boundary equalities not exercised".into())?;
    Ok(format!("{cases} cases, {alert_edges} at alert edge, {danger_edges} at danger edge"))
}

fn settings_fuzz() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5E77);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (mut commits, mut steps) = (0u64, 0u64);
    for seq in 0..100_000u32 {
        // every 1000th sequence goes through a real file
        let mut eeprom = if seq % 1000 == 0 {
            let path = dir.path().join(format!("e{seq}.bin"));
            EepromImage::open_or_create(&path).map_err(|e| e.to_string())?
        } else {
            EepromImage::factory()
        };
        let mut fsm = SettingsFsm::new(Thresholds::from_eeprom(&eeprom).map_err(|e| e.to_string())?);
        let len = rng.gen_range(1..=40);
        for _ in 0..len {
            let button = match rng.gen_range(0..5) {
                0 => Some(Button::Set),
                1 | 2 => Some(Button::Up),
                3 => Some(Button::Down),
                _ => None,
            };
            let outcome = fsm.step(button, &mut eeprom);
            steps += 1;
            let p = fsm.pending();
            ensure(p.alert() <= p.danger(), || format!("sequence {seq}: pending {p}"))?;
            if let Some(committed) = outcome.committed {
                commits += 1;
                let rebooted = eeprom.power_cycle().map_err(|e| e.to_string())?;
                let restored = Thresholds::from_eeprom(&rebooted).map_err(|e| e.to_string())?;
                ensure(restored == committed, || format!("sequence {seq}: {committed} came back as {restored}"))?;
                let fw = Firmware::boot(rebooted, AdcConfig::default());
                ensure(fw.thresholds() == committed && !fw.config_fault(), || {
                    format!("sequence {seq}: reboot used {}", fw.thresholds())
                })?;
            }
        }
    }
    ensure(commits > 1000, || format!("only {commits} commits"))?;
    Ok(format!("100000 sequences, {steps} presses, {commits} commits survived power cycle"))
}

fn bitwise_crc(data: &[u8]) -> u16 {
    let mut crc = 0xFFFFu16;
    for &byte in data {
        for i in (0..8).rev() {
            let bit = (byte >> i) & 1 == 1;
            let top = crc & 0x8000 != 0;
            crc <<= 1;
            if bit != top {
                crc ^= 0x1021;
            }
        }
    }
    crc
}

fn reference_encode(f: &NmcFrame) -> Vec<u8> {
    let mut out = vec![0xB5, 0x7A, 0x01];
    out.extend(f.site_id.to_be_bytes());
    out.extend(f.seq.to_be_bytes());
    out.extend(f.timestamp_ms.to_be_bytes());
    out.push(f.flags.bits());
    out.extend(f.temp_tenths.to_be_bytes());
    let crc = bitwise_crc(&out);
    out.extend(crc.to_be_bytes());
    out
}

fn protocol() -> Outcome {
    let check = bts_alarm::nmc::crc16_ccitt_false(b"123456789");
    ensure(check == 0x29B1 && bitwise_crc(b"123456789") == 0x29B1, || format!("check value {check:04X}"))?;

    let legal: Vec<AlarmFlags> = (0..64u8).filter_map(|b| AlarmFlags::new(b).ok()).collect();
    ensure(legal.len() == 48, || format!("{} legal masks", legal.len()))?;
    let mut round_trips = 0;
    for &flags in &legal {
        for temp_tenths in [-400i16, 0, 245, 1500] {
            for seq in [1u32, 0x8000_0000, u32::MAX] {
                let frame = NmcFrame { site_id: 0xBEEF, seq, timestamp_ms: 0x0102_0304_0506, flags, temp_tenths };
                let raw = frame.encode().map_err(|e| e.to_string())?;
                ensure(raw.as_slice() == reference_encode(&frame), || format!("layout mismatch for {frame:?}"))?;
                ensure(NmcFrame::decode(&raw) == Ok(frame), || format!("round trip failed for {frame:?}"))?;
                round_trips += 1;
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0xC0DE);
    for trial in 0..10_000 {
        let frame = NmcFrame {
            site_id: rng.gen(),
            seq: rng.gen(),
            timestamp_ms: rng.gen(),
            flags: legal[rng.gen_range(0..legal.len())],
            temp_tenths: rng.gen_range(-400..=1500),
        };
        let mut raw = frame.encode().map_err(|e| e.to_string())?;
        let bit = rng.gen_range(0..raw.len() * 8);
        raw[bit / 8] ^= 1 << (bit % 8);
        ensure(NmcFrame::decode(&raw).is_err(), || format!("trial {trial}: flip of bit {bit} accepted"))?;
    }
    Ok(format!("{round_trips} round trips over 48 masks, 10000/10000 bit flips rejected, CRC 29B1"))
}

/// First tick whose decoded temperature reaches `threshold_c` on the
/// 20 to 50 C ramp over 60 s, in integer arithmetic: mV = 200 + t/200,
/// code = floor(mV * 1024 / 5000), decoded >= th iff code * 500 >= th * 1024.
fn ramp_crossing_ms(threshold_c: u64) -> Option<u64> {
    (0..=60_000u64).step_by(10).find(|&t| {
        let code = ((40_000 + t) * 1024 / 1_000_000).min(1023);
        code * 500 >= threshold_c * 1024
    })
}

fn golden_scenario() -> Outcome {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/golden_ramp.scn"))
        .map_err(|e| e.to_string())?;
    let events = parse_scenario(&text).map_err(|e| e.to_string())?;
    let runs: Vec<String> = (0..3)
        .map(|_| run_simulation(&events, 60_000, 0).map(|t| emit_trace(&t, TraceFormat::Plain)))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    ensure(runs[0] == runs[1] && runs[1] == runs[2], || "traces differ between runs".into())?;

    let trace = run_simulation(&events, 60_000, 0).map_err(|e| e.to_string())?;
    let alert_ms = ramp_crossing_ms(30).ok_or("ramp never reaches 30 C")?;
    let danger_ms = ramp_crossing_ms(45).ok_or("ramp never reaches 45 C")?;
    let expected = [
        ("door=ACTIVE", "DOOR_RAISE", 5_030),
        ("temp=ALERT", "TEMP_ALERT_RAISE", alert_ms),
        ("smoke=ACTIVE", "SMOKE_RAISE", 40_000),
        ("temp=DANGER", "TEMP_DANGER_RAISE", danger_ms),
    ];
    let mut previous = 0;
    for (fw, nmc, at) in expected {
        let got = trace.first("firmware", fw);
        ensure(got == Some(at), || format!("{fw} at {got:?}, expected {at}"))?;
        let got = trace.first("nmc", &format!("site=1 event={nmc}"));
        ensure(got == Some(at), || format!("{nmc} at {got:?}, expected {at}"))?;
        ensure(at > previous, || format!("{fw} out of order"))?;
        previous = at;
    }
    Ok(format!(
        "DOOR 5030, ALERT {alert_ms}, SMOKE 40000, DANGER {danger_ms}; 3 runs byte-identical"
    ))
}

/// Replays one randomized silence pattern and checks the liveness log.
fn liveness_pattern(rng: &mut ChaCha8Rng, single: Option<(u64, u64)>) -> Result<(usize, usize), String> {
    let horizon = 400_000u64;
    let gaps: Vec<(u64, u64)> = match single {
        Some(gap) => vec![gap],
        None => {
            let mut gaps = Vec::new();
            let mut t = rng.gen_range(5_000..60_000u64);
            while t < horizon - 10_000 && gaps.len() < 5 {
                let len = rng.gen_range(1_000..90_000u64);
                gaps.push((t, (t + len).min(horizon)));
                t += len + rng.gen_range(1_000..60_000);
            }
            gaps
        }
    };
    let door_toggles: Vec<u64> = (0..rng.gen_range(0..6)).map(|_| rng.gen_range(0..horizon / 10) * 10).collect();

    let mut nmc = NmcState::default();
    let mut alarm_box = AlarmBox::new(4, 0);
    let mut door = false;
    let mut delivered = Vec::new();
    let mut log = Vec::new();
    for t in (0..=horizon).step_by(10) {
        if door_toggles.contains(&t) {
            door = !door;
        }
        let relays = if door { relay::DOOR } else { 0 };
        let frame = alarm_box.poll(relays, TempStatus::Normal, 240, t);
        let silent = gaps.iter().any(|&(a, b)| (a..b).contains(&t));
        if let (Some(frame), false) = (frame, silent) {
            delivered.push(t);
            log.extend(nmc.ingest(&frame.encode().map_err(|e| e.to_string())?, t));
        }
        if t % 1_000 == 0 {
            log.extend(nmc.heartbeat_sweep(t));
        }
    }

    let liveness: Vec<(EventKind, u64)> = log
        .iter()
        .filter(|r| matches!(r.kind, EventKind::SiteUp | EventKind::SiteDown))
        .map(|r| (r.kind, r.ts_ms))
        .collect();
    for (i, (kind, _)) in liveness.iter().enumerate() {
        let want = if i % 2 == 0 { EventKind::SiteUp } else { EventKind::SiteDown };
        ensure(*kind == want, || format!("event {i} is {kind}, alternation broken: {liveness:?}"))?;
    }

    // oracle: an outage exists between deliveries `last` and `next` iff some
    // sweep instant s (a multiple of 1000) has s - last > timeout and s < next
    let mut expected = Vec::new();
    expected.push((EventKind::SiteUp, delivered[0]));
    for (i, &last) in delivered.iter().enumerate() {
        let next = delivered.get(i + 1).copied().unwrap_or(horizon + 1);
        let first_sweep = (last + DEFAULT_OFFLINE_TIMEOUT_MS) / 1_000 * 1_000 + 1_000;
        if first_sweep < next {
            expected.push((EventKind::SiteDown, first_sweep));
            if next <= horizon {
                expected.push((EventKind::SiteUp, next));
            }
        }
    }
    ensure(liveness == expected, || format!("got {liveness:?}, oracle {expected:?}"))?;
    let downs = liveness.iter().filter(|(k, _)| *k == EventKind::SiteDown).count();
    Ok((downs, liveness.len() - downs))
}

fn nmc_liveness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x11FE);
    // heartbeats at 50 s and 130 s bracket a 79 s silence
    let (downs, ups) = liveness_pattern(&mut ChaCha8Rng::seed_from_u64(1), Some((50_010, 130_000)))?;
    ensure(downs == 1 && ups == 2, || format!("single silence: {downs} SITE_DOWN, {ups} SITE_UP"))?;
    let (mut total_downs, mut total_ups) = (0, 0);
    for _ in 0..100 {
        let (d, u) = liveness_pattern(&mut rng, None)?;
        total_downs += d;
        total_ups += u;
    }
    ensure(total_downs > 50, || format!("only {total_downs} outages exercised"))?;
    Ok(format!("single silence 1 DOWN + 1 UP; 100 patterns, {total_downs} DOWN / {total_ups} UP alternate"))
}

fn soak_scenario(rng: &mut ChaCha8Rng) -> String {
    let start = rng.gen_range(18.0..30.0f64);
    let end = rng.gen_range(20.0..55.0f64);
    let mut text = format!("0 temp {start:.1}\n0..60000 ramp temp {start:.1}->{end:.1}\n");
    let mut door = false;
    for _ in 0..rng.gen_range(0..6) {
        door = !door;
        let at = rng.gen_range(0..60_000u64);
        text.push_str(&format!("{at} door {}\n", if door { "open" } else { "closed" }));
    }
    if rng.gen_bool(0.5) {
        text.push_str(&format!("{} smoke 0.2\n", rng.gen_range(0..60_000u64)));
    }
    if rng.gen_bool(0.3) {
        text.push_str(&format!("{} water wet\n", rng.gen_range(0..60_000u64)));
    }
    text
}

fn multi_site_soak() -> Outcome {
    let handle = server::spawn(ServerConfig { listen: "127.0.0.1:0".parse().unwrap(), ..ServerConfig::default() })
        .map_err(|e| e.to_string())?;
    let addr = handle.local_addr();
    let mut rng = ChaCha8Rng::seed_from_u64(0x50A4);
    let scenarios: Vec<String> = (0..50).map(|_| soak_scenario(&mut rng)).collect();

    let sent: Result<BTreeMap<u16, u32>, String> = std::thread::scope(|scope| {
        let workers: Vec<_> = scenarios
            .iter()
            .enumerate()
            .map(|(i, text)| {
                scope.spawn(move || -> Result<(u16, u32), String> {
                    let site_id = 100 + i as u16;
                    let mut events = parse_scenario(text).map_err(|e| e.to_string())?;
                    events.sort_by_key(|e| e.at_ms);
                    let mut client = NmcClient::connect(addr).map_err(|e| e.to_string())?;
                    let mut site = Site::new(site_id, EepromImage::factory());
                    let mut next = 0;
                    let mut frames = 0u32;
                    for t in (0..=60_000u64).step_by(10) {
                        while next < events.len() && bts_alarm::sim::tick_for(events[next].at_ms) <= t {
                            site.apply(&events[next], t, &mut Vec::new());
                            next += 1;
                        }
                        if let Some(frame) = site.step(t).frame {
                            client.send(&frame).map_err(|e| e.to_string())?;
                            frames += 1;
                        }
                    }
                    Ok((site_id, frames))
                })
            })
            .collect();
        workers.into_iter().map(|w| w.join().map_err(|_| "worker panicked".to_string())?).collect()
    });
    let sent = sent?;

    let deadline = Instant::now() + Duration::from_secs(10);
    let snap = loop {
        let snap = handle.snapshot().ok_or("server stopped")?;
        let caught_up = sent.iter().all(|(id, &n)| snap.state.site(*id).is_some_and(|s| s.last_seq == n));
        if caught_up || Instant::now() > deadline {
            break snap;
        }
        std::thread::sleep(Duration::from_millis(10));
    };
    handle.shutdown().map_err(|e| e.to_string())?;

    ensure(snap.state.sites().len() == 50, || format!("{} sites registered", snap.state.sites().len()))?;
    for (id, &n) in &sent {
        let last = snap.state.site(*id).map(|s| s.last_seq);
        ensure(last == Some(n), || format!("site {id}: last_seq {last:?}, sent {n}"))?;
    }
    let rejects = snap.records.iter().filter(|r| matches!(r.kind, EventKind::SeqReject | EventKind::CrcReject)).count();
    ensure(rejects == 0, || format!("{rejects} rejects"))?;
    let replayed = NmcState::replay(snap.state.offline_timeout_ms(), snap.state.accepted());
    ensure(replayed.sites() == snap.state.sites(), || "site table differs from replay of accepted frames".into())?;
    let total: u32 = sent.values().sum();
    Ok(format!("50 sites, {total} frames, table equals replay, 0 SEQ_REJECT"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("temperature accuracy", temperature_accuracy, Duration::from_secs(1)),
        ("classification oracle", classification_oracle, Duration::from_secs(5)),
        ("settings fsm fuzz", settings_fuzz, Duration::from_secs(10)),
        ("protocol", protocol, Duration::from_secs(5)),
        ("golden scenario", golden_scenario, Duration::from_secs(2)),
        ("nmc liveness", nmc_liveness, Duration::from_secs(5)),
        ("multi-site soak", multi_site_soak, Duration::from_secs(30)),
    ];
    let mut failed = 0;
    for (name, run, budget) in criteria {
        let started = Instant::now();
        let outcome = run();
        let elapsed = started.elapsed();
        let verdict = match outcome {
            Ok(detail) if elapsed < budget => Ok(detail),
            Ok(detail) => Err(format!("{detail}; took {elapsed:.2?}, budget {budget:?}")),
            Err(why) => Err(why),
        };
        match verdict {
            Ok(detail) => println!("PASS {name} ({elapsed:.2?} < {budget:?}): {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name} ({elapsed:.2?}): {why}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
