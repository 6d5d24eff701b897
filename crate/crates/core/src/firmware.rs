//! The controller program: per-tick sampling, temperature classification,
//! relay and display drive, and the three-button settings menu that edits and
//! persists the thresholds.

use std::fmt;

use thiserror::Error;

use crate::mcu::{
    display_multiplex, AdcConfig, DisplayFrame, EepromImage, GpioState, McuError, Pin, ADC_MAX_CODE,
    EEPROM_ADDR_ALERT, EEPROM_ADDR_DANGER, FACTORY_ALERT_C, FACTORY_DANGER_C,
};
use crate::sensors::{Debouncer, Level};

/// Firmware tick period.
pub const TICK_MS: u64 = 10;
/// Display sub-ticks per firmware tick (5 ms strobe).
pub const SUBTICKS_PER_TICK: u64 = 2;
/// Ticks between blink-phase toggles in edit modes (2 Hz on/off).
pub const BLINK_TICKS: u16 = 25;
/// Highest configurable threshold.
pub const MAX_THRESHOLD_C: u8 = 100;

pub mod pins {
    use crate::mcu::Pin;

    pub const SET: Pin = Pin::C(1);
    pub const UP: Pin = Pin::C(2);
    pub const DOWN: Pin = Pin::C(3);
    pub const SMOKE: Pin = Pin::C(5);
    pub const DOOR: Pin = Pin::C(6);
    pub const WATER: Pin = Pin::C(7);
    /// Relay outputs occupy port D bits 4..=7 in relay-bit order.
    pub const RELAY_SHIFT: u8 = 4;
    pub const DIGIT_COMMON_MASK: u8 = 0x07;
}

#[derive(Debug, Error)]
pub enum FirmwareError {
    #[error("ADC code {0} out of range 0..=1023")]
    Code(u16),
    #[error("thresholds alert={alert} danger={danger} violate 0 <= alert <= danger <= 100")]
    Thresholds { alert: u8, danger: u8 },
    #[error(transparent)]
    Mcu(#[from] McuError),
}

/// Alert and danger set points in whole degrees Celsius.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Thresholds {
    alert: u8,
    danger: u8,
}

impl Thresholds {
    pub fn new(alert: u8, danger: u8) -> Result<Self, FirmwareError> {
        if alert > danger || danger > MAX_THRESHOLD_C {
            return Err(FirmwareError::Thresholds { alert, danger });
        }
        Ok(Self { alert, danger })
    }

    pub fn alert(&self) -> u8 {
        self.alert
    }

    pub fn danger(&self) -> u8 {
        self.danger
    }

    pub fn from_eeprom(img: &EepromImage) -> Result<Self, FirmwareError> {
        Self::new(img.read(EEPROM_ADDR_ALERT)?, img.read(EEPROM_ADDR_DANGER)?)
    }

    pub fn store(&self, img: &mut EepromImage) -> Result<(), McuError> {
        img.write_many(&[(EEPROM_ADDR_ALERT, self.alert), (EEPROM_ADDR_DANGER, self.danger)])
    }
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            alert: FACTORY_ALERT_C,
            danger: FACTORY_DANGER_C,
        }
    }
}

impl fmt::Display for Thresholds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "alert={} danger={}", self.alert, self.danger)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum TempStatus {
    #[default]
    Normal,
    Alert,
    Danger,
}

impl TempStatus {
    pub fn name(self) -> &'static str {
        match self {
            TempStatus::Normal => "NORMAL",
            TempStatus::Alert => "ALERT",
            TempStatus::Danger => "DANGER",
        }
    }
}

/// Inverse of the LM35 + ADC chain: `code * vref / 1024 / 10` °C.
pub fn decode_temperature(code: u16, cfg: &AdcConfig) -> Result<f64, FirmwareError> {
    if code > ADC_MAX_CODE {
        return Err(FirmwareError::Code(code));
    }
    Ok(f64::from(code) * f64::from(cfg.vref_mv()) / 1024.0 / 10.0)
}

/// Three-band compare with inclusive lower edges on Alert and Danger.
pub fn classify_temperature(temp_c: f64, th: &Thresholds) -> TempStatus {
    if temp_c >= f64::from(th.danger) {
        TempStatus::Danger
    } else if temp_c >= f64::from(th.alert) {
        TempStatus::Alert
    } else {
        TempStatus::Normal
    }
}

pub mod relay {
    pub const TEMP: u8 = 1 << 0;
    pub const SMOKE: u8 = 1 << 1;
    pub const DOOR: u8 = 1 << 2;
    pub const WATER: u8 = 1 << 3;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct AlarmState {
    pub temp_status: TempStatus,
    pub smoke_active: bool,
    pub door_active: bool,
    pub water_active: bool,
    /// bit0 temp, bit1 smoke, bit2 door, bit3 water.
    pub relay_bits: u8,
    /// Set when the last settings commit failed to reach the EEPROM.
    pub storage_fault: bool,
}

impl AlarmState {
    fn compose(temp_status: TempStatus, smoke: bool, door: bool, water: bool, storage_fault: bool) -> Self {
        let mut relay_bits = 0;
        if temp_status >= TempStatus::Alert {
            relay_bits |= relay::TEMP;
        }
        if smoke {
            relay_bits |= relay::SMOKE;
        }
        if door {
            relay_bits |= relay::DOOR;
        }
        if water {
            relay_bits |= relay::WATER;
        }
        Self {
            temp_status,
            smoke_active: smoke,
            door_active: door,
            water_active: water,
            relay_bits,
            storage_fault,
        }
    }

    /// Whether the relay mask agrees with the channel statuses.
    pub fn relays_consistent(&self) -> bool {
        let expected = Self::compose(self.temp_status, self.smoke_active, self.door_active, self.water_active, false);
        expected.relay_bits == self.relay_bits
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Button {
    Set,
    Up,
    Down,
}

/// Rising edges seen on the button pins during one tick.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ButtonEdges {
    pub set: bool,
    pub up: bool,
    pub down: bool,
}

impl ButtonEdges {
    /// Simultaneous presses resolve SET > UP > DOWN.
    pub fn resolve(self) -> Option<Button> {
        if self.set {
            Some(Button::Set)
        } else if self.up {
            Some(Button::Up)
        } else if self.down {
            Some(Button::Down)
        } else {
            None
        }
    }

    pub fn from_ports(previous: u8, current: u8) -> Self {
        let rising = |pin: Pin| {
            let Pin::C(bit) = pin else { return false };
            current & (1 << bit) != 0 && previous & (1 << bit) == 0
        };
        Self {
            set: rising(pins::SET),
            up: rising(pins::UP),
            down: rising(pins::DOWN),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Mode {
    #[default]
    Run,
    EditAlert,
    EditDanger,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Run => "RUN",
            Mode::EditAlert => "EDIT_ALERT",
            Mode::EditDanger => "EDIT_DANGER",
        }
    }
}

/// Result of one settings step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SettingsOutcome {
    /// Thresholds written to EEPROM during this step.
    pub committed: Option<Thresholds>,
    /// The commit was attempted but the EEPROM write failed.
    pub storage_fault: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SettingsFsm {
    mode: Mode,
    pending: Thresholds,
    blink_phase: bool,
    blink_count: u16,
}

impl SettingsFsm {
    pub fn new(persisted: Thresholds) -> Self {
        Self {
            mode: Mode::Run,
            pending: persisted,
            blink_phase: true,
            blink_count: 0,
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn pending(&self) -> Thresholds {
        self.pending
    }

    /// `true` while the edited value is lit.
    pub fn blink_phase(&self) -> bool {
        self.blink_phase
    }

    /// Applies one button edge. Leaving `EditDanger` writes both thresholds
    /// to EEPROM addresses 0 and 1. If that write fails the pending edit is
    /// dropped and the previously persisted values are restored.
    pub fn step(&mut self, button: Option<Button>, eeprom: &mut EepromImage) -> SettingsOutcome {
        let mut outcome = SettingsOutcome::default();
        let Some(button) = button else {
            return outcome;
        };
        let Thresholds { alert, danger } = self.pending;
        match (self.mode, button) {
            (Mode::Run, Button::Set) => self.enter(Mode::EditAlert),
            (Mode::Run, _) => {}
            (Mode::EditAlert, Button::Set) => self.enter(Mode::EditDanger),
            (Mode::EditAlert, Button::Up) => self.pending.alert = (alert + 1).min(danger),
            (Mode::EditAlert, Button::Down) => self.pending.alert = alert.saturating_sub(1),
            (Mode::EditDanger, Button::Up) => self.pending.danger = (danger + 1).min(MAX_THRESHOLD_C),
            (Mode::EditDanger, Button::Down) => self.pending.danger = danger.saturating_sub(1).max(alert),
            (Mode::EditDanger, Button::Set) => {
                self.enter(Mode::Run);
                match self.pending.store(eeprom) {
                    Ok(()) => outcome.committed = Some(self.pending),
                    Err(err) => {
                        log::warn!("threshold commit failed: {err}");
                        outcome.storage_fault = true;
                        self.pending = Thresholds::from_eeprom(eeprom).unwrap_or_default();
                    }
                }
            }
        }
        outcome
    }

    fn enter(&mut self, mode: Mode) {
        self.mode = mode;
        self.blink_phase = true;
        self.blink_count = 0;
    }

    fn advance_blink(&mut self) {
        if self.mode == Mode::Run {
            return;
        }
        self.blink_count += 1;
        if self.blink_count >= BLINK_TICKS {
            self.blink_count = 0;
            self.blink_phase = !self.blink_phase;
        }
    }
}

/// Pure form of [`SettingsFsm::step`].
pub fn settings_step(
    fsm: SettingsFsm,
    edges: ButtonEdges,
    eeprom: &EepromImage,
) -> (SettingsFsm, EepromImage, SettingsOutcome) {
    let mut fsm = fsm;
    let mut eeprom = eeprom.clone();
    let outcome = fsm.step(edges.resolve(), &mut eeprom);
    (fsm, eeprom, outcome)
}

/// Everything the firmware produces in one tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickOutput {
    pub alarm: AlarmState,
    /// Display at the first sub-tick of this tick.
    pub display: DisplayFrame,
    /// Output port levels. Port C echoes the sampled inputs.
    pub gpio: GpioState,
    pub mode: Mode,
    pub thresholds: Thresholds,
    pub committed: Option<Thresholds>,
    /// Decoded temperature this tick.
    pub temp_c: f64,
}

/// Whole firmware state. Booting reads the thresholds from EEPROM; an
/// unreadable or invalid pair falls back to the factory values.
#[derive(Debug, Clone, PartialEq)]
pub struct Firmware {
    adc: AdcConfig,
    eeprom: EepromImage,
    thresholds: Thresholds,
    fsm: SettingsFsm,
    door: Debouncer,
    water: Debouncer,
    prev_port_c: u8,
    tick: u64,
    storage_fault: bool,
    config_fault: bool,
}

impl Firmware {
    pub fn boot(eeprom: EepromImage, adc: AdcConfig) -> Self {
        let (thresholds, config_fault) = match Thresholds::from_eeprom(&eeprom) {
            Ok(th) => (th, false),
            Err(err) => {
                log::warn!("invalid thresholds in EEPROM, using factory values: {err}");
                (Thresholds::default(), true)
            }
        };
        Self {
            adc,
            eeprom,
            thresholds,
            fsm: SettingsFsm::new(thresholds),
            door: Debouncer::default(),
            water: Debouncer::default(),
            prev_port_c: 0,
            tick: 0,
            storage_fault: false,
            config_fault,
        }
    }

    pub fn thresholds(&self) -> Thresholds {
        self.thresholds
    }

    pub fn fsm(&self) -> &SettingsFsm {
        &self.fsm
    }

    pub fn eeprom(&self) -> &EepromImage {
        &self.eeprom
    }

    pub fn into_eeprom(self) -> EepromImage {
        self.eeprom
    }

    pub fn tick_count(&self) -> u64 {
        self.tick
    }

    pub fn config_fault(&self) -> bool {
        self.config_fault
    }

    /// Runs one 10 ms tick against the sampled port C levels and ADC code.
    pub fn tick(&mut self, port_c: u8, adc_code: u16) -> TickOutput {
        let inputs = GpioState { port_c, ..GpioState::default() };

        let smoke = inputs.level(pins::SMOKE);
        let door = self.door.step(Level::from(inputs.level(pins::DOOR))).is_high();
        let water = self.water.step(Level::from(inputs.level(pins::WATER))).is_high();

        let code = adc_code.min(ADC_MAX_CODE);
        // in range after the clamp
        let temp_c = decode_temperature(code, &self.adc).unwrap_or(0.0);
        let temp_status = classify_temperature(temp_c, &self.thresholds);

        let edges = ButtonEdges::from_ports(self.prev_port_c, port_c);
        self.prev_port_c = port_c;
        self.fsm.advance_blink();
        let outcome = self.fsm.step(edges.resolve(), &mut self.eeprom);
        if let Some(th) = outcome.committed {
            self.thresholds = th;
            self.storage_fault = false;
        }
        if outcome.storage_fault {
            self.storage_fault = true;
        }

        let alarm = AlarmState::compose(temp_status, smoke, door, water, self.storage_fault);

        let subtick = self.tick * SUBTICKS_PER_TICK;
        let display = match self.fsm.mode() {
            Mode::Run => display_multiplex(temp_c.round() as i32, subtick),
            _ if !self.fsm.blink_phase() => DisplayFrame::blank(subtick),
            Mode::EditAlert => display_multiplex(i32::from(self.fsm.pending().alert()), subtick),
            Mode::EditDanger => display_multiplex(i32::from(self.fsm.pending().danger()), subtick),
        };

        let gpio = GpioState {
            port_b: display.port_b(),
            port_c,
            port_d: (alarm.relay_bits << pins::RELAY_SHIFT) | (display.port_d_commons() & pins::DIGIT_COMMON_MASK),
        };

        self.tick += 1;
        TickOutput {
            alarm,
            display,
            gpio,
            mode: self.fsm.mode(),
            thresholds: self.thresholds,
            committed: outcome.committed,
            temp_c,
        }
    }
}

/// Relay bits as driven on port D.
pub fn relay_bits_from_port_d(port_d: u8) -> u8 {
    port_d >> pins::RELAY_SHIFT
}
