//! One BTS room: room physics, sensors, the controller and its alarm box,
//! stepped on the 10 ms firmware tick.

use crate::firmware::{
    pins, relay_bits_from_port_d, AlarmState, Button, Firmware, Mode, Thresholds, TickOutput, TICK_MS,
};
use crate::mcu::{adc_convert, AdcConfig, EepromImage, GpioState};
use crate::nmc::{AlarmBox, NmcFrame};
use crate::sensors::{lm35_output, reed_sample, water_sample, OptoCoupler, SensorFrame, SmokeDetector};

use super::scenario::{Action, ChannelValue, RampChannel, ScenarioEvent};
use super::trace::TraceRecord;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Ramp {
    start_ms: u64,
    end_ms: u64,
    from: f64,
    to: f64,
}

impl Ramp {
    fn value_at(&self, t: u64) -> f64 {
        if t >= self.end_ms || self.end_ms == self.start_ms {
            return self.to;
        }
        let frac = (t - self.start_ms) as f64 / (self.end_ms - self.start_ms) as f64;
        self.from + (self.to - self.from) * frac
    }
}

/// What one site produced during one tick.
#[derive(Debug, Clone, Default)]
pub struct SiteTick {
    pub records: Vec<TraceRecord>,
    pub frame: Option<NmcFrame>,
}

#[derive(Debug, Clone)]
pub struct Site {
    site_id: u16,
    adc: AdcConfig,
    smoke: SmokeDetector,
    world: SensorFrame,
    temp_ramp: Option<Ramp>,
    smoke_ramp: Option<Ramp>,
    door_opto: OptoCoupler,
    firmware: Option<Firmware>,
    /// EEPROM contents while the controller is unpowered.
    parked_eeprom: Option<EepromImage>,
    pending_presses: [u32; 3],
    prev_buttons: u8,
    alarm_box: AlarmBox,
    last_alarm: AlarmState,
    last_relays: u8,
    last_mode: Mode,
    last_pending: Thresholds,
    last_temp_tenths: i16,
    last_output: Option<TickOutput>,
}

const BUTTON_PINS: [(Button, u8); 3] = [(Button::Set, 1), (Button::Up, 2), (Button::Down, 3)];

fn button_index(b: Button) -> usize {
    match b {
        Button::Set => 0,
        Button::Up => 1,
        Button::Down => 2,
    }
}

impl Site {
    pub fn new(site_id: u16, eeprom: EepromImage) -> Self {
        let adc = AdcConfig::default();
        let firmware = Firmware::boot(eeprom, adc);
        let th = firmware.thresholds();
        Self {
            site_id,
            adc,
            smoke: SmokeDetector::default(),
            world: SensorFrame::default(),
            temp_ramp: None,
            smoke_ramp: None,
            door_opto: OptoCoupler::default(),
            firmware: Some(firmware),
            parked_eeprom: None,
            pending_presses: [0; 3],
            prev_buttons: 0,
            alarm_box: AlarmBox::new(site_id, 0),
            last_alarm: AlarmState::default(),
            last_relays: 0,
            last_mode: Mode::Run,
            last_pending: th,
            last_temp_tenths: 0,
            last_output: None,
        }
    }

    pub fn site_id(&self) -> u16 {
        self.site_id
    }

    pub fn world(&self) -> &SensorFrame {
        &self.world
    }

    pub fn firmware(&self) -> Option<&Firmware> {
        self.firmware.as_ref()
    }

    pub fn powered(&self) -> bool {
        self.firmware.is_some()
    }

    pub fn alarm(&self) -> AlarmState {
        self.last_alarm
    }

    pub fn last_output(&self) -> Option<&TickOutput> {
        self.last_output.as_ref()
    }

    /// Persisted thresholds, whether or not the controller is powered.
    pub fn thresholds(&self) -> Thresholds {
        match (&self.firmware, &self.parked_eeprom) {
            (Some(fw), _) => fw.thresholds(),
            (None, Some(img)) => Thresholds::from_eeprom(img).unwrap_or_default(),
            (None, None) => Thresholds::default(),
        }
    }

    pub fn mode(&self) -> Mode {
        self.firmware.as_ref().map(|fw| fw.fsm().mode()).unwrap_or_default()
    }

    pub fn alarm_box(&self) -> &AlarmBox {
        &self.alarm_box
    }

    pub fn boot_record(&self) -> TraceRecord {
        TraceRecord::new(0, "sim", format!("boot site={} {}", self.site_id, self.thresholds()))
    }

    /// Applies a scenario event at tick time `t`.
    pub fn apply(&mut self, event: &ScenarioEvent, t: u64, records: &mut Vec<TraceRecord>) {
        match event.action {
            Action::Set(value) => match value {
                ChannelValue::Temp(v) => {
                    self.temp_ramp = None;
                    self.world.temp_c = v;
                }
                ChannelValue::Smoke(v) => {
                    self.smoke_ramp = None;
                    self.world.smoke_obscuration = v;
                }
                ChannelValue::Door(open) => self.world.door_open = open,
                ChannelValue::Water(wet) => self.world.water_wet = wet,
                ChannelValue::Button(b) if self.firmware.is_some() => self.pending_presses[button_index(b)] += 1,
                // presses on a dead controller go nowhere
                ChannelValue::Button(_) => {}
                ChannelValue::Power(on) => self.set_power(on, t, records),
            },
            Action::Ramp { channel, end_ms, from, to } => {
                let ramp = Some(Ramp { start_ms: event.at_ms, end_ms, from, to });
                match channel {
                    RampChannel::Temp => self.temp_ramp = ramp,
                    RampChannel::Smoke => self.smoke_ramp = ramp,
                }
            }
        }
    }

    fn set_power(&mut self, on: bool, t: u64, records: &mut Vec<TraceRecord>) {
        match (on, self.firmware.take()) {
            (false, Some(fw)) => {
                let img = fw.into_eeprom();
                self.parked_eeprom = Some(img.power_cycle().unwrap_or(img));
                records.push(TraceRecord::new(t, "sim", "power=OFF"));
            }
            (true, None) => {
                let img = self.parked_eeprom.take().unwrap_or_default();
                let fw = Firmware::boot(img, self.adc);
                records.push(TraceRecord::new(t, "sim", format!("power=ON {}", fw.thresholds())));
                self.door_opto = OptoCoupler::default();
                self.prev_buttons = 0;
                self.pending_presses = [0; 3];
                self.firmware = Some(fw);
            }
            (_, fw) => self.firmware = fw,
        }
    }

    fn button_mask(&mut self) -> u8 {
        let mut mask = 0;
        for (button, bit) in BUTTON_PINS {
            let idx = button_index(button);
            let was_high = self.prev_buttons & (1 << bit) != 0;
            if self.pending_presses[idx] > 0 && !was_high {
                self.pending_presses[idx] -= 1;
                mask |= 1 << bit;
            }
        }
        self.prev_buttons = mask;
        mask
    }

    /// Advances the site by one tick at virtual time `t`. Events due at `t`
    /// must already have been applied.
    pub fn step(&mut self, t: u64) -> SiteTick {
        let mut out = SiteTick::default();
        if let Some(r) = self.temp_ramp {
            if t >= r.start_ms {
                self.world.temp_c = r.value_at(t);
            }
        }
        if let Some(r) = self.smoke_ramp {
            if t >= r.start_ms {
                self.world.smoke_obscuration = r.value_at(t).clamp(0.0, 1.0);
            }
        }

        let buttons = if self.pending_presses.iter().any(|&n| n > 0) || self.prev_buttons != 0 {
            self.button_mask()
        } else {
            0
        };
        let (alarm, relays, temp_tenths) = match self.firmware.as_mut() {
            Some(fw) => {
                let mut gpio = GpioState::default();
                // scenario values are validated at parse time
                let smoke = self.smoke.sample(self.world.smoke_obscuration).map(|l| l.is_high()).unwrap_or(false);
                gpio.set_level(pins::SMOKE, smoke);
                let door = self.door_opto.step(reed_sample(self.world.door_open));
                gpio.set_level(pins::DOOR, door.is_high());
                gpio.set_level(pins::WATER, water_sample(self.world.water_wet).is_high());
                let code = adc_convert(lm35_output(self.world.temp_c), &self.adc).unwrap_or(0);
                let tick = fw.tick(gpio.port_c | buttons, code);
                let tenths = (tick.temp_c * 10.0).round() as i16;
                self.record_firmware(t, &tick, &mut out.records);
                self.last_output = Some(tick);
                (tick.alarm, relay_bits_from_port_d(tick.gpio.port_d), tenths)
            }
            None => {
                // relays drop out with the controller
                let alarm = AlarmState::default();
                if self.last_mode != Mode::Run {
                    self.last_mode = Mode::Run;
                    out.records.push(TraceRecord::new(t, "firmware", "mode=RUN"));
                }
                self.last_output = None;
                (alarm, 0, self.last_temp_tenths)
            }
        };

        diff_alarm(t, &self.last_alarm, &alarm, &mut out.records);
        if relays != self.last_relays {
            out.records.push(TraceRecord::new(t, "relay", format!("bits={relays:04b}")));
        }
        self.last_alarm = alarm;
        self.last_relays = relays;
        self.last_temp_tenths = temp_tenths;

        if let Some(frame) = self.alarm_box.poll(relays, alarm.temp_status, temp_tenths, t) {
            let kind = if frame.is_heartbeat() { "HEARTBEAT" } else { "STATUS" };
            out.records.push(TraceRecord::new(
                t,
                "alarmbox",
                format!(
                    "frame kind={kind} seq={} flags={:02x} temp={}",
                    frame.seq, frame.flags, frame.temp_tenths
                ),
            ));
            out.frame = Some(frame);
        }
        out
    }

    fn record_firmware(&mut self, t: u64, tick: &TickOutput, records: &mut Vec<TraceRecord>) {
        let Some(fw) = self.firmware.as_ref() else { return };
        let pending = fw.fsm().pending();
        if tick.mode != self.last_mode {
            records.push(TraceRecord::new(t, "firmware", format!("mode={}", tick.mode.name())));
        }
        if tick.mode != Mode::Run && pending != self.last_pending {
            records.push(TraceRecord::new(t, "firmware", format!("pending {pending}")));
        }
        if let Some(th) = tick.committed {
            records.push(TraceRecord::new(t, "firmware", format!("commit {th}")));
        }
        self.last_mode = tick.mode;
        self.last_pending = pending;
    }
}

fn diff_alarm(t: u64, before: &AlarmState, after: &AlarmState, records: &mut Vec<TraceRecord>) {
    let word = |on: bool| if on { "ACTIVE" } else { "CLEAR" };
    if before.temp_status != after.temp_status {
        records.push(TraceRecord::new(t, "firmware", format!("temp={}", after.temp_status.name())));
    }
    for (name, b, a) in [
        ("smoke", before.smoke_active, after.smoke_active),
        ("door", before.door_active, after.door_active),
        ("water", before.water_active, after.water_active),
    ] {
        if b != a {
            records.push(TraceRecord::new(t, "firmware", format!("{name}={}", word(a))));
        }
    }
    if before.storage_fault != after.storage_fault {
        records.push(TraceRecord::new(
            t,
            "firmware",
            format!("storage_fault={}", if after.storage_fault { "SET" } else { "CLEAR" }),
        ));
    }
}

/// Tick boundary at or after `at_ms`.
pub fn tick_for(at_ms: u64) -> u64 {
    at_ms.div_ceil(TICK_MS) * TICK_MS
}
