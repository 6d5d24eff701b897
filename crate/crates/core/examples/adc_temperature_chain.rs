// Room temperature through the LM35, the 10-bit ADC and the firmware decode.

use bts_alarm::sensors::lm35_output;
use bts_alarm::{adc_convert, classify_temperature, decode_temperature, AdcConfig, Thresholds};

fn demo() -> Vec<String> {
    let adc = AdcConfig::default();
    let th = Thresholds::default();
    [-5.0, 0.0, 24.9, 29.9, 30.3, 45.0, 45.5, 99.5, 160.0]
        .iter()
        .map(|&temp| {
            let mv = lm35_output(temp);
            let code = adc_convert(mv, &adc).expect("LM35 output is non-negative");
            let decoded = decode_temperature(code, &adc).expect("code within range");
            let status = classify_temperature(decoded, &th);
            format!("room={temp:7.2} C  lm35={mv:7.1} mV  code={code:4}  decoded={decoded:7.3} C  {}", status.name())
        })
        .collect()
}

fn main() {
    for line in demo() {
        println!("{line}");
    }
}
