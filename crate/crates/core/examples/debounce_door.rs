// A bouncing door contact through the opto-coupler and the 3-sample debouncer.

use bts_alarm::sensors::{reed_sample, Debouncer, OptoCoupler};

fn demo() -> Vec<String> {
    let contact = [false, true, false, true, true, true, true, false, true, true, true, true];
    let mut opto = OptoCoupler::default();
    let mut debounce = Debouncer::new(3).expect("run length > 0");
    contact
        .iter()
        .enumerate()
        .map(|(tick, &open)| {
            let raw = reed_sample(open);
            let delayed = opto.step(raw);
            let stable = debounce.step(delayed);
            format!("t={:3} ms  contact={raw:?}  opto={delayed:?}  stable={stable:?}", tick * 10)
        })
        .collect()
}

fn main() {
    for line in demo() {
        println!("{line}");
    }
}
