//! Sensor models: LM35 temperature, photoelectric smoke, reed-switch door and
//! a conductive water probe, plus the input debouncer used on contact inputs.

use thiserror::Error;

/// LM35 transfer slope.
pub const LM35_MV_PER_C: f64 = 10.0;
/// Upper end of the LM35 linear output region.
pub const LM35_MAX_MV: f64 = 1500.0;
/// Default smoke alarm point as an obscuration fraction.
pub const DEFAULT_SMOKE_THRESHOLD: f64 = 0.07;
/// Default number of agreeing samples before a contact input changes state.
pub const DEFAULT_DEBOUNCE_RUN: u8 = 3;
/// Simulated temperature envelope.
pub const TEMP_ENVELOPE_C: (f64, f64) = (-40.0, 150.0);

#[derive(Debug, Error, PartialEq)]
pub enum SensorError {
    #[error("smoke obscuration {0} outside [0, 1]")]
    Obscuration(f64),
    #[error("temperature {0} °C outside the simulation envelope")]
    Temperature(f64),
    #[error("debounce run must be in 1..=255")]
    DebounceRun,
}

/// Logic level on an MCU input pin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Level {
    #[default]
    Low,
    High,
}

impl Level {
    pub fn is_high(self) -> bool {
        self == Level::High
    }
}

impl From<bool> for Level {
    fn from(high: bool) -> Self {
        if high {
            Level::High
        } else {
            Level::Low
        }
    }
}

/// Physical truth of the room at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorFrame {
    pub temp_c: f64,
    pub smoke_obscuration: f64,
    pub door_open: bool,
    pub water_wet: bool,
}

impl SensorFrame {
    pub fn validate(&self) -> Result<(), SensorError> {
        check_temperature(self.temp_c)?;
        check_obscuration(self.smoke_obscuration)
    }
}

impl Default for SensorFrame {
    fn default() -> Self {
        Self {
            temp_c: 25.0,
            smoke_obscuration: 0.0,
            door_open: false,
            water_wet: false,
        }
    }
}

pub fn check_temperature(temp_c: f64) -> Result<(), SensorError> {
    let (lo, hi) = TEMP_ENVELOPE_C;
    if (lo..=hi).contains(&temp_c) {
        Ok(())
    } else {
        Err(SensorError::Temperature(temp_c))
    }
}

pub fn check_obscuration(obscuration: f64) -> Result<(), SensorError> {
    if (0.0..=1.0).contains(&obscuration) {
        Ok(())
    } else {
        Err(SensorError::Obscuration(obscuration))
    }
}

/// LM35 output in millivolts. Negative temperatures clamp to 0 mV on a
/// single supply; the top clamps at the end of the linear region.
pub fn lm35_output(temp_c: f64) -> f64 {
    (temp_c * LM35_MV_PER_C).clamp(0.0, LM35_MAX_MV)
}

/// Photoelectric smoke head with a configurable alarm point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmokeDetector {
    threshold: f64,
}

impl SmokeDetector {
    pub fn new(threshold: f64) -> Result<Self, SensorError> {
        check_obscuration(threshold)?;
        Ok(Self { threshold })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// HIGH iff `obscuration >= threshold`.
    pub fn sample(&self, obscuration: f64) -> Result<Level, SensorError> {
        check_obscuration(obscuration)?;
        Ok(Level::from(obscuration >= self.threshold))
    }
}

impl Default for SmokeDetector {
    fn default() -> Self {
        Self { threshold: DEFAULT_SMOKE_THRESHOLD }
    }
}

pub fn smoke_sample(obscuration: f64) -> Result<Level, SensorError> {
    SmokeDetector::default().sample(obscuration)
}

/// Door contact as seen on the MCU pin after the opto-coupler: a closed door
/// holds the reed closed and the pin LOW; an open door reads HIGH.
pub fn reed_sample(door_open: bool) -> Level {
    Level::from(door_open)
}

pub fn water_sample(wet: bool) -> Level {
    Level::from(wet)
}

/// Opto-isolated input stage. The isolated side follows the field side one
/// sample later.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OptoCoupler {
    output: Level,
}

impl OptoCoupler {
    pub fn step(&mut self, field: Level) -> Level {
        std::mem::replace(&mut self.output, field)
    }

    pub fn output(&self) -> Level {
        self.output
    }
}

/// Run-length debouncer: the stable level flips only after `required_run`
/// consecutive samples that disagree with it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Debouncer {
    required_run: u8,
    last_stable: Level,
    run_length: u8,
    candidate: Level,
}

impl Debouncer {
    pub fn new(required_run: u8) -> Result<Self, SensorError> {
        Self::with_initial(required_run, Level::Low)
    }

    pub fn with_initial(required_run: u8, initial: Level) -> Result<Self, SensorError> {
        if required_run == 0 {
            return Err(SensorError::DebounceRun);
        }
        Ok(Self {
            required_run,
            last_stable: initial,
            run_length: 0,
            candidate: initial,
        })
    }

    pub fn required_run(&self) -> u8 {
        self.required_run
    }

    pub fn stable(&self) -> Level {
        self.last_stable
    }

    pub fn run_length(&self) -> u8 {
        self.run_length
    }

    pub fn step(&mut self, raw: Level) -> Level {
        if raw == self.last_stable {
            self.run_length = 0;
            self.candidate = raw;
        } else {
            if self.run_length > 0 && raw == self.candidate {
                self.run_length = self.run_length.saturating_add(1);
            } else {
                self.candidate = raw;
                self.run_length = 1;
            }
            if self.run_length >= self.required_run {
                self.last_stable = raw;
                self.run_length = 0;
            }
        }
        self.last_stable
    }
}

impl Default for Debouncer {
    fn default() -> Self {
        Self {
            required_run: DEFAULT_DEBOUNCE_RUN,
            last_stable: Level::Low,
            run_length: 0,
            candidate: Level::Low,
        }
    }
}

/// Pure form of [`Debouncer::step`].
pub fn debounce_step(d: Debouncer, raw: Level) -> (Debouncer, Level) {
    let mut next = d;
    let stable = next.step(raw);
    (next, stable)
}
