//! On-site alarm box: watches the controller's relay contacts and forwards
//! status to the NMC.

use crate::firmware::{relay, TempStatus};

use super::protocol::{AlarmFlags, NmcFrame};

pub const HEARTBEAT_INTERVAL_MS: u64 = 10_000;

/// Maps relay contacts and the temperature band onto frame flags.
pub fn status_flags(relays: u8, temp_status: TempStatus) -> AlarmFlags {
    let mut bits = 0;
    // the temperature relay is binary; severity travels in the band
    if temp_status >= TempStatus::Alert || relays & relay::TEMP != 0 {
        bits |= AlarmFlags::TEMP_ALERT;
    }
    if temp_status == TempStatus::Danger {
        bits |= AlarmFlags::TEMP_DANGER | AlarmFlags::TEMP_ALERT;
    }
    if relays & relay::SMOKE != 0 {
        bits |= AlarmFlags::SMOKE;
    }
    if relays & relay::DOOR != 0 {
        bits |= AlarmFlags::DOOR;
    }
    if relays & relay::WATER != 0 {
        bits |= AlarmFlags::WATER;
    }
    AlarmFlags::from_bits_unchecked(bits)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlarmBox {
    site_id: u16,
    next_seq: u32,
    last_status: AlarmFlags,
    next_heartbeat_ms: u64,
}

impl AlarmBox {
    /// A box powered up at `boot_ms`, assuming a quiet site.
    pub fn new(site_id: u16, boot_ms: u64) -> Self {
        Self {
            site_id,
            next_seq: 1,
            last_status: AlarmFlags::default(),
            next_heartbeat_ms: boot_ms + HEARTBEAT_INTERVAL_MS,
        }
    }

    pub fn site_id(&self) -> u16 {
        self.site_id
    }

    /// Sequence number the next frame will carry.
    pub fn next_seq(&self) -> u32 {
        self.next_seq
    }

    /// Called once per firmware tick. Emits at most one frame: a status
    /// frame when the flags changed, a heartbeat when one is due, or a single
    /// frame with both when they coincide.
    pub fn poll(&mut self, relays: u8, temp_status: TempStatus, temp_tenths: i16, now_ms: u64) -> Option<NmcFrame> {
        let status = status_flags(relays, temp_status);
        let changed = status != self.last_status;
        let heartbeat_due = now_ms >= self.next_heartbeat_ms;
        if !changed && !heartbeat_due {
            return None;
        }
        if heartbeat_due {
            while self.next_heartbeat_ms <= now_ms {
                self.next_heartbeat_ms += HEARTBEAT_INTERVAL_MS;
            }
        }
        self.last_status = status;
        let frame = NmcFrame {
            site_id: self.site_id,
            seq: self.next_seq,
            timestamp_ms: now_ms,
            flags: status.with(AlarmFlags::HEARTBEAT, heartbeat_due),
            temp_tenths,
        };
        self.next_seq = self.next_seq.wrapping_add(1);
        Some(frame)
    }
}

/// Pure form of [`AlarmBox::poll`].
pub fn alarm_box_poll(
    relays: u8,
    temp_status: TempStatus,
    temp_tenths: i16,
    now_ms: u64,
    state: &AlarmBox,
) -> (AlarmBox, Vec<NmcFrame>) {
    let mut next = state.clone();
    let frames = next.poll(relays, temp_status, temp_tenths, now_ms).into_iter().collect();
    (next, frames)
}
