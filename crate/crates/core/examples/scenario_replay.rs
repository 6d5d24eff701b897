// Replaying a scenario through the full pipeline and printing the trace.

use bts_alarm::{emit_trace, parse_scenario, run_simulation, TraceFormat};

const SCENARIO: &str = "\
# warm room with a door opened and smoke later
0 temp 26
0..30000 ramp temp 26->47
4000 door open
9000 door closed
20000 smoke 0.12
";

fn demo() -> String {
    let events = parse_scenario(SCENARIO).expect("scenario parses");
    let trace = run_simulation(&events, 30_000, 0).expect("duration on a tick boundary");
    emit_trace(&trace, TraceFormat::Plain)
}

fn main() {
    print!("{}", demo());
}
