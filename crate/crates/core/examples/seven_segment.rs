// Multiplexing a value over the three seven-segment digits.

use bts_alarm::mcu::{display_multiplex, glyph_of_mask};

fn demo() -> Vec<String> {
    let mut lines = Vec::new();
    for value in [25, -7, 100, 1234] {
        let mut frame = display_multiplex(value, 0);
        let mut masks = Vec::new();
        for subtick in 0..3 {
            frame = display_multiplex(value, subtick);
            let digit = frame.active_digit;
            masks.push(format!(
                "d{digit}={:02X}({:?}) commons={:03b}",
                frame.port_b(),
                glyph_of_mask(frame.port_b()),
                frame.port_d_commons()
            ));
        }
        lines.push(format!("{value:5}: {}  shows {:?}", masks.join("  "), frame.shown_value()));
    }
    lines
}

fn main() {
    for line in demo() {
        println!("{line}");
    }
}
