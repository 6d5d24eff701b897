// Thresholds stored in a file-backed EEPROM image survive a power cycle.

use bts_alarm::{EepromImage, Firmware, AdcConfig, Thresholds};

fn demo() -> Vec<String> {
    let dir = tempfile::tempdir().expect("temp dir");
    let path = dir.path().join("eeprom.bin");
    let mut lines = Vec::new();

    let mut img = EepromImage::open_or_create(&path).expect("create image");
    lines.push(format!("fresh image: {}", Thresholds::from_eeprom(&img).expect("factory values")));

    Thresholds::new(28, 41).expect("valid pair").store(&mut img).expect("store");
    let reloaded = EepromImage::load(&path).expect("reload");
    lines.push(format!("after store: {}", Thresholds::from_eeprom(&reloaded).expect("stored values")));

    let erased = EepromImage::from_bytes(&[0xFF; 256]).expect("256 octets");
    let fw = Firmware::boot(erased, AdcConfig::default());
    lines.push(format!("erased image boots with {} config_fault={}", fw.thresholds(), fw.config_fault()));
    lines
}

fn main() {
    for line in demo() {
        println!("{line}");
    }
}
