//! Peripheral models for the alarm controller: the 10-bit ADC, the 256-byte
//! data EEPROM, the three GPIO ports and the multiplexed seven-segment display.
//!
//! Everything here is a plain value with deterministic transitions. The only
//! side effect is the optional file backing of [`EepromImage`].

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

/// ADC resolution in bits. Fixed by the part.
pub const ADC_RESOLUTION_BITS: u32 = 10;
/// Largest code the ADC can produce.
pub const ADC_MAX_CODE: u16 = (1 << ADC_RESOLUTION_BITS) - 1;
/// Number of cells in the data EEPROM.
pub const EEPROM_SIZE: usize = 256;
/// EEPROM address of the alert threshold.
pub const EEPROM_ADDR_ALERT: usize = 0;
/// EEPROM address of the danger threshold.
pub const EEPROM_ADDR_DANGER: usize = 1;
/// Factory alert threshold in whole degrees Celsius.
pub const FACTORY_ALERT_C: u8 = 30;
/// Factory danger threshold in whole degrees Celsius.
pub const FACTORY_DANGER_C: u8 = 45;
/// Value of an erased EEPROM cell.
pub const EEPROM_ERASED: u8 = 0xFF;

/// Number of digits on the display.
pub const DISPLAY_DIGITS: usize = 3;
/// Smallest value the display can show ("-9").
pub const DISPLAY_MIN: i32 = -9;
/// Largest value the display can show.
pub const DISPLAY_MAX: i32 = 999;

/// Segment masks for 0..=9 in gfedcba order, active-high.
pub const SEGMENT_DIGITS: [u8; 10] = [0x3F, 0x06, 0x5B, 0x4F, 0x66, 0x6D, 0x7D, 0x07, 0x7F, 0x6F];
/// Segment mask for a dash (segment g only).
pub const SEGMENT_DASH: u8 = 0x40;
/// Segment mask for a blank digit.
pub const SEGMENT_BLANK: u8 = 0x00;

#[derive(Debug, Error)]
pub enum McuError {
    #[error("input voltage {0} mV is outside the ADC input domain")]
    NegativeInput(f64),
    #[error("ADC reference voltage must be positive")]
    InvalidVref,
    #[error("EEPROM address {0} out of range 0..=255")]
    Address(usize),
    #[error("EEPROM storage error: {0}")]
    Storage(#[from] std::io::Error),
    #[error("EEPROM image must be exactly 256 bytes, got {0}")]
    ImageSize(usize),
    #[error("digit value {0} cannot be encoded on a seven-segment display")]
    Encoding(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AdcConfig {
    vref_mv: u32,
}

impl AdcConfig {
    pub fn new(vref_mv: u32) -> Result<Self, McuError> {
        if vref_mv == 0 {
            return Err(McuError::InvalidVref);
        }
        Ok(Self { vref_mv })
    }

    pub fn vref_mv(&self) -> u32 {
        self.vref_mv
    }

    pub fn resolution_bits(&self) -> u32 {
        ADC_RESOLUTION_BITS
    }

    /// Voltage span of one code, in millivolts.
    pub fn lsb_mv(&self) -> f64 {
        f64::from(self.vref_mv) / f64::from(1u32 << ADC_RESOLUTION_BITS)
    }
}

impl Default for AdcConfig {
    fn default() -> Self {
        Self { vref_mv: 5000 }
    }
}

/// Converts an input voltage to a 10-bit code: `floor(vin * 1024 / vref)`,
/// clamped to 1023.
pub fn adc_convert(vin_mv: f64, cfg: &AdcConfig) -> Result<u16, McuError> {
    if vin_mv.is_nan() || vin_mv < 0.0 {
        return Err(McuError::NegativeInput(vin_mv));
    }
    let scaled = (vin_mv * f64::from(1u32 << ADC_RESOLUTION_BITS) / f64::from(cfg.vref_mv)).floor();
    if scaled >= f64::from(ADC_MAX_CODE) {
        Ok(ADC_MAX_CODE)
    } else {
        Ok(scaled as u16)
    }
}

/// The controller's data EEPROM.
///
/// When a backing file is attached every write is flushed to disk before
/// [`EepromImage::write`] returns, so [`EepromImage::power_cycle`] observes
/// exactly what a real part would retain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EepromImage {
    bytes: [u8; EEPROM_SIZE],
    backing_path: Option<PathBuf>,
}

impl EepromImage {
    /// Factory image: alert 30 °C at address 0, danger 45 °C at address 1,
    /// every other cell erased.
    pub fn factory() -> Self {
        let mut bytes = [EEPROM_ERASED; EEPROM_SIZE];
        bytes[EEPROM_ADDR_ALERT] = FACTORY_ALERT_C;
        bytes[EEPROM_ADDR_DANGER] = FACTORY_DANGER_C;
        Self { bytes, backing_path: None }
    }

    pub fn from_bytes(raw: &[u8]) -> Result<Self, McuError> {
        let bytes: [u8; EEPROM_SIZE] = raw.try_into().map_err(|_| McuError::ImageSize(raw.len()))?;
        Ok(Self { bytes, backing_path: None })
    }

    /// Loads an image from `path` and keeps it attached as the backing file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, McuError> {
        let path = path.as_ref();
        let raw = fs::read(path)?;
        let mut img = Self::from_bytes(&raw)?;
        img.backing_path = Some(path.to_path_buf());
        Ok(img)
    }

    /// Opens `path` as backing storage, creating it from the factory image
    /// when it does not exist yet.
    pub fn open_or_create(path: impl AsRef<Path>) -> Result<Self, McuError> {
        let path = path.as_ref();
        if path.exists() {
            return Self::load(path);
        }
        let mut img = Self::factory();
        img.backing_path = Some(path.to_path_buf());
        img.flush()?;
        Ok(img)
    }

    pub fn backing_path(&self) -> Option<&Path> {
        self.backing_path.as_deref()
    }

    pub fn detach(&mut self) {
        self.backing_path = None;
    }

    pub fn as_bytes(&self) -> &[u8; EEPROM_SIZE] {
        &self.bytes
    }

    pub fn read(&self, addr: usize) -> Result<u8, McuError> {
        self.bytes.get(addr).copied().ok_or(McuError::Address(addr))
    }

    pub fn write(&mut self, addr: usize, value: u8) -> Result<(), McuError> {
        self.write_many(&[(addr, value)])
    }

    /// Writes several cells and flushes once. On a storage error the image
    /// keeps its previous contents.
    pub fn write_many(&mut self, cells: &[(usize, u8)]) -> Result<(), McuError> {
        if let Some(&(addr, _)) = cells.iter().find(|(addr, _)| *addr >= EEPROM_SIZE) {
            return Err(McuError::Address(addr));
        }
        let before = self.bytes;
        for &(addr, value) in cells {
            self.bytes[addr] = value;
        }
        self.flush().inspect_err(|_| self.bytes = before)
    }

    /// Persists the raw 256 bytes to the backing file, if any.
    pub fn flush(&self) -> Result<(), McuError> {
        let Some(path) = &self.backing_path else {
            return Ok(());
        };
        let tmp = path.with_extension("tmp");
        {
            let mut f = File::create(&tmp)?;
            f.write_all(&self.bytes)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    /// Simulates removing and restoring power. File-backed images are
    /// reloaded from disk; in-memory images keep their contents since the
    /// EEPROM is non-volatile.
    pub fn power_cycle(&self) -> Result<Self, McuError> {
        match &self.backing_path {
            Some(path) => Self::load(path),
            None => Ok(self.clone()),
        }
    }
}

impl Default for EepromImage {
    fn default() -> Self {
        Self::factory()
    }
}

/// Identifies one GPIO pin by port and bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pin {
    B(u8),
    C(u8),
    D(u8),
}

/// Levels of the three 8-bit ports.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct GpioState {
    /// Seven-segment segment lines.
    pub port_b: u8,
    /// Sensor and button inputs.
    pub port_c: u8,
    /// Digit commons (bits 0..=2) and relay outputs (bits 4..=7).
    pub port_d: u8,
}

impl GpioState {
    pub fn level(&self, pin: Pin) -> bool {
        let (port, bit) = match pin {
            Pin::B(b) => (self.port_b, b),
            Pin::C(b) => (self.port_c, b),
            Pin::D(b) => (self.port_d, b),
        };
        bit < 8 && port & (1 << bit) != 0
    }

    pub fn set_level(&mut self, pin: Pin, high: bool) {
        let (port, bit) = match pin {
            Pin::B(b) => (&mut self.port_b, b),
            Pin::C(b) => (&mut self.port_c, b),
            Pin::D(b) => (&mut self.port_d, b),
        };
        if bit >= 8 {
            return;
        }
        if high {
            *port |= 1 << bit;
        } else {
            *port &= !(1 << bit);
        }
    }
}

/// Something a single seven-segment digit can show.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Glyph {
    Digit(u8),
    Dash,
    Blank,
}

pub fn render_digit(glyph: Glyph) -> Result<u8, McuError> {
    match glyph {
        Glyph::Digit(d) => SEGMENT_DIGITS.get(usize::from(d)).copied().ok_or(McuError::Encoding(d)),
        Glyph::Dash => Ok(SEGMENT_DASH),
        Glyph::Blank => Ok(SEGMENT_BLANK),
    }
}

/// Inverse of [`render_digit`] over the encoding table.
pub fn glyph_of_mask(mask: u8) -> Option<Glyph> {
    match mask {
        SEGMENT_BLANK => Some(Glyph::Blank),
        SEGMENT_DASH => Some(Glyph::Dash),
        _ => SEGMENT_DIGITS.iter().position(|&m| m == mask).map(|d| Glyph::Digit(d as u8)),
    }
}

/// Display contents and the digit strobed during the current 5 ms sub-tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DisplayFrame {
    pub digit_masks: [u8; DISPLAY_DIGITS],
    pub active_digit: u8,
}

impl DisplayFrame {
    pub fn blank(subtick: u64) -> Self {
        Self {
            digit_masks: [SEGMENT_BLANK; DISPLAY_DIGITS],
            active_digit: (subtick % DISPLAY_DIGITS as u64) as u8,
        }
    }

    /// Segment lines driven on port B while the active digit is strobed.
    pub fn port_b(&self) -> u8 {
        self.digit_masks[usize::from(self.active_digit)]
    }

    /// Digit-common lines on port D bits 0..=2, one-hot.
    pub fn port_d_commons(&self) -> u8 {
        1 << self.active_digit
    }

    /// Reads the shown number back from the masks. `None` for "---" or a
    /// blank display.
    pub fn shown_value(&self) -> Option<i32> {
        let glyphs: Vec<Glyph> = self.digit_masks.iter().map(|&m| glyph_of_mask(m)).collect::<Option<_>>()?;
        let mut value: Option<i32> = None;
        let mut negative = false;
        for g in glyphs {
            match g {
                Glyph::Blank if value.is_none() && !negative => {}
                Glyph::Dash if value.is_none() && !negative => negative = true,
                Glyph::Digit(d) => value = Some(value.unwrap_or(0) * 10 + i32::from(d)),
                _ => return None,
            }
        }
        value.map(|v| if negative { -v } else { v })
    }
}

fn glyphs_for(value: i32) -> [Glyph; DISPLAY_DIGITS] {
    if !(DISPLAY_MIN..=DISPLAY_MAX).contains(&value) {
        return [Glyph::Dash; DISPLAY_DIGITS];
    }
    let mut out = [Glyph::Blank; DISPLAY_DIGITS];
    let mut rest = value.unsigned_abs();
    let mut idx = DISPLAY_DIGITS;
    loop {
        idx -= 1;
        out[idx] = Glyph::Digit((rest % 10) as u8);
        rest /= 10;
        if rest == 0 {
            break;
        }
    }
    if value < 0 {
        out[idx - 1] = Glyph::Dash;
    }
    out
}

/// Encodes `value` right-aligned with leading blanks and strobes digit
/// `subtick mod 3`. Values outside -9..=999 render as "---".
pub fn display_multiplex(value: i32, subtick: u64) -> DisplayFrame {
    let glyphs = glyphs_for(value);
    let mut digit_masks = [SEGMENT_BLANK; DISPLAY_DIGITS];
    for (mask, glyph) in digit_masks.iter_mut().zip(glyphs) {
        // glyphs_for only produces digits 0..=9, dashes and blanks
        *mask = render_digit(glyph).unwrap_or(SEGMENT_DASH);
    }
    DisplayFrame {
        digit_masks,
        active_digit: (subtick % DISPLAY_DIGITS as u64) as u8,
    }
}
