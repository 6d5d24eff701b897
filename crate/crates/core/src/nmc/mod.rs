//! Alarm-box to NMC reporting chain: the binary frame codec, the on-site
//! alarm box, the aggregation service and its TCP transport.

pub mod alarm_box;
pub mod protocol;
pub mod server;
pub mod service;

pub use alarm_box::{alarm_box_poll, AlarmBox, HEARTBEAT_INTERVAL_MS};
pub use protocol::{crc16_ccitt_false, decode_frame, encode_frame, AlarmFlags, FrameReader, NmcFrame, Reject, FRAME_LEN};
pub use server::{NmcClient, ServerConfig, ServerHandle};
pub use service::{nmc_ingest, AlarmLog, AlarmLogRecord, EventKind, NmcState, SiteState, DEFAULT_OFFLINE_TIMEOUT_MS};
