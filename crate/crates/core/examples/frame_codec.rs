// Encoding, decoding and corrupting a 22-octet NMC frame.

use bts_alarm::nmc::{crc16_ccitt_false, FrameReader};
use bts_alarm::{AlarmFlags, NmcFrame};

fn demo() -> Vec<String> {
    let flags = AlarmFlags::new(AlarmFlags::TEMP_ALERT | AlarmFlags::DOOR).expect("legal mask");
    let frame = NmcFrame { site_id: 7, seq: 12, timestamp_ms: 65_000, flags, temp_tenths: 312 };
    let raw = frame.encode().expect("legal flags");
    let mut lines = vec![
        format!("crc(\"123456789\") = {:04X}", crc16_ccitt_false(b"123456789")),
        format!("frame   = {}", hex::encode_upper(raw)),
        format!("decoded = {:?}", NmcFrame::decode(&raw)),
    ];

    let mut flipped = raw;
    flipped[14] ^= 0x01;
    lines.push(format!("bit flip -> {:?}", NmcFrame::decode(&flipped)));

    let mut reader = FrameReader::new();
    reader.push(&[0x00, 0xFF, 0xB5]);
    reader.push(&raw);
    reader.push(&raw[..10]);
    while let Some(next) = reader.next_frame() {
        lines.push(format!("stream -> {next:?}"));
    }
    lines.push(format!("stream skipped {} octets, {} buffered", reader.skipped(), reader.buffered()));
    lines
}

fn main() {
    for line in demo() {
        println!("{line}");
    }
}
