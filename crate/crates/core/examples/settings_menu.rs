// Editing the thresholds with SET/UP/DOWN and committing them to EEPROM.

use bts_alarm::firmware::{Button, SettingsFsm};
use bts_alarm::{EepromImage, Thresholds};

fn demo() -> Vec<String> {
    let mut eeprom = EepromImage::factory();
    let mut fsm = SettingsFsm::new(Thresholds::default());
    let presses = [
        Button::Set,
        Button::Down,
        Button::Down,
        Button::Set,
        Button::Up,
        Button::Up,
        Button::Up,
        Button::Set,
    ];
    let mut lines = Vec::new();
    for b in presses {
        let outcome = fsm.step(Some(b), &mut eeprom);
        let mut line = format!("{b:?} -> mode={} pending {}", fsm.mode().name(), fsm.pending());
        if let Some(th) = outcome.committed {
            line.push_str(&format!("  committed {th}"));
        }
        lines.push(line);
    }
    lines.push(format!("eeprom holds {}", Thresholds::from_eeprom(&eeprom).expect("valid pair")));
    lines
}

fn main() {
    for line in demo() {
        println!("{line}");
    }
}
