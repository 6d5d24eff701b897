// Three sites reporting to one in-process NMC, one of them going silent.

use bts_alarm::firmware::relay;
use bts_alarm::nmc::AlarmBox;
use bts_alarm::{NmcState, TempStatus};

fn demo() -> Vec<String> {
    let mut nmc = NmcState::default();
    let mut boxes: Vec<AlarmBox> = (1..=3).map(|id| AlarmBox::new(id, 0)).collect();
    let mut lines = Vec::new();
    for t in (0..=90_000u64).step_by(10) {
        for (i, b) in boxes.iter_mut().enumerate() {
            // site 3 loses its link between 20 s and 70 s
            if i == 2 && (20_000..70_000).contains(&t) {
                continue;
            }
            let relays = if i == 1 && t >= 15_000 { relay::DOOR } else { 0 };
            if let Some(frame) = b.poll(relays, TempStatus::Normal, 245, t) {
                let raw = frame.encode().expect("alarm box emits legal flags");
                lines.extend(nmc.ingest(&raw, t).iter().map(ToString::to_string));
            }
        }
        if t % 1_000 == 0 {
            lines.extend(nmc.heartbeat_sweep(t).iter().map(ToString::to_string));
        }
    }
    lines.push(String::from("site table:"));
    lines.push(nmc.dump().trim_end().to_string());
    lines
}

fn main() {
    for line in demo() {
        println!("{line}");
    }
}
