//! Scenario-driven simulation of the whole pipeline on a 10 ms virtual clock:
//! room → sensors → controller → alarm box → NMC.

pub mod scenario;
pub mod site;
pub mod trace;

use std::collections::VecDeque;
use std::io;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::firmware::TICK_MS;
use crate::mcu::EepromImage;
use crate::nmc::service::SWEEP_INTERVAL_MS;
use crate::nmc::{AlarmLogRecord, NmcClient, NmcState, FRAME_LEN};

pub use scenario::{parse_scenario, Action, ChannelValue, ScenarioError, ScenarioEvent};
pub use site::{tick_for, Site, SiteTick};
pub use trace::{emit_trace, Trace, TraceFormat, TraceRecord};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("duration {0} ms is not a multiple of the {TICK_MS} ms tick")]
    Duration(u64),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("NMC link failed: {0}")]
    Link(#[source] io::Error),
}

/// Where alarm frames go.
#[derive(Debug)]
pub enum NmcLink {
    /// An NMC running inside the simulation, on virtual time.
    InProcess(NmcState),
    /// A remote NMC; sends block within the tick.
    Tcp(NmcClient),
}

impl Default for NmcLink {
    fn default() -> Self {
        NmcLink::InProcess(NmcState::default())
    }
}

#[derive(Debug)]
pub struct SimConfig {
    pub duration_ms: u64,
    /// Only drives link jitter; the pipeline itself is seed-independent.
    pub seed: u64,
    /// Maximum extra delivery delay on the in-process link. 0 disables jitter.
    pub jitter_ms: u64,
    pub site_id: u16,
    pub eeprom: Option<EepromImage>,
    pub link: NmcLink,
}

impl SimConfig {
    pub fn new(duration_ms: u64) -> Self {
        Self {
            duration_ms,
            seed: 0,
            jitter_ms: 0,
            site_id: 1,
            eeprom: None,
            link: NmcLink::default(),
        }
    }
}

/// Trace plus the final state of the in-process NMC, if any.
#[derive(Debug)]
pub struct SimOutcome {
    pub trace: Trace,
    pub site: Site,
    pub nmc: Option<NmcState>,
    pub nmc_records: Vec<AlarmLogRecord>,
}

struct Delivery {
    arrival_ms: u64,
    raw: [u8; FRAME_LEN],
}

/// Runs a scenario and returns only the trace.
pub fn run_simulation(events: &[ScenarioEvent], duration_ms: u64, seed: u64) -> Result<Trace, SimError> {
    let cfg = SimConfig { seed, ..SimConfig::new(duration_ms) };
    simulate(events, cfg).map(|o| o.trace)
}

/// Steps the pipeline through ticks `0, 10, ..., duration_ms`.
pub fn simulate(events: &[ScenarioEvent], cfg: SimConfig) -> Result<SimOutcome, SimError> {
    if !cfg.duration_ms.is_multiple_of(TICK_MS) {
        return Err(SimError::Duration(cfg.duration_ms));
    }
    let mut site = Site::new(cfg.site_id, cfg.eeprom.unwrap_or_default());
    let mut link = cfg.link;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut in_flight: VecDeque<Delivery> = VecDeque::new();
    let mut last_arrival = 0u64;
    let mut nmc_records = Vec::new();

    let mut trace = Trace::default();
    trace.records.push(site.boot_record());

    let mut next_event = 0;
    for t in (0..=cfg.duration_ms).step_by(TICK_MS as usize) {
        let mut records = Vec::new();
        while next_event < events.len() && tick_for(events[next_event].at_ms) <= t {
            site.apply(&events[next_event], t, &mut records);
            next_event += 1;
        }
        let tick = site.step(t);
        records.extend(tick.records);

        if let Some(frame) = tick.frame {
            // frames from AlarmBox always carry valid flags
            let raw = frame.encode().expect("alarm box emits valid flags");
            match &mut link {
                NmcLink::Tcp(client) => client.send_raw(&raw).map_err(SimError::Link)?,
                NmcLink::InProcess(_) => {
                    let delay = if cfg.jitter_ms > 0 { rng.gen_range(0..=cfg.jitter_ms) } else { 0 };
                    let arrival_ms = (t + delay).max(last_arrival);
                    last_arrival = arrival_ms;
                    in_flight.push_back(Delivery { arrival_ms, raw });
                }
            }
        }

        if let NmcLink::InProcess(nmc) = &mut link {
            let mut events_now = Vec::new();
            while in_flight.front().is_some_and(|d| d.arrival_ms <= t) {
                let d = in_flight.pop_front().expect("front checked");
                events_now.extend(nmc.ingest(&d.raw, t));
            }
            if t % SWEEP_INTERVAL_MS == 0 {
                events_now.extend(nmc.heartbeat_sweep(t));
            }
            for ev in &events_now {
                records.push(TraceRecord::new(t, "nmc", nmc_transition(ev)));
            }
            nmc_records.extend(events_now);
        }
        trace.records.extend(records);
    }

    let end = cfg.duration_ms;
    let alarm = site.alarm();
    trace.summary.push(TraceRecord::new(
        end,
        "summary",
        format!(
            "alarm temp={} smoke={} door={} water={} relays={:04b} fault={}",
            alarm.temp_status.name(),
            alarm.smoke_active,
            alarm.door_active,
            alarm.water_active,
            alarm.relay_bits,
            alarm.storage_fault,
        ),
    ));
    trace.summary.push(TraceRecord::new(
        end,
        "summary",
        format!("thresholds {} mode={} powered={}", site.thresholds(), site.mode().name(), site.powered()),
    ));
    let nmc = match link {
        NmcLink::InProcess(nmc) => {
            for line in nmc.dump().lines() {
                trace.summary.push(TraceRecord::new(end, "summary", format!("nmc {line}")));
            }
            Some(nmc)
        }
        NmcLink::Tcp(_) => {
            trace.summary.push(TraceRecord::new(
                end,
                "summary",
                format!("nmc remote frames_sent={}", site.alarm_box().next_seq() - 1),
            ));
            None
        }
    };

    Ok(SimOutcome { trace, site, nmc, nmc_records })
}

fn nmc_transition(r: &AlarmLogRecord) -> String {
    let full = r.to_string();
    // drop the ts= prefix, the trace carries its own time column
    match full.split_once(' ') {
        Some((_, rest)) => rest.to_string(),
        None => full,
    }
}
