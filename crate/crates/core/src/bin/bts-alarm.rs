use std::io::{self, BufRead};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use bts_alarm::mcu::EepromImage;
use bts_alarm::nmc::server::{self, ServerConfig};
use bts_alarm::nmc::{AlarmFlags, NmcClient, NmcFrame, DEFAULT_OFFLINE_TIMEOUT_MS};
use bts_alarm::sim::{self, emit_trace, parse_scenario, NmcLink, SimConfig, SimError, TraceFormat};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bts-alarm", version, about = "BTS-room alarm controller simulator and NMC service")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replay a scenario through the full pipeline and print the trace.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// Virtual duration in ms (multiple of 10).
        #[arg(long)]
        duration: u64,
        /// EEPROM image to boot from; commits are written back to it.
        #[arg(long)]
        eeprom: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "plain")]
        format: TraceFormat,
        /// Stream frames to an external NMC instead of the in-process one.
        #[arg(long)]
        connect: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Maximum in-process link delay in ms.
        #[arg(long, default_value_t = 0)]
        jitter_ms: u64,
        #[arg(long, default_value_t = 1)]
        site_id: u16,
    },
    /// Run the NMC aggregation service. Type `dump` on stdin for the site table.
    NmcServe {
        #[arg(long, env = "NMC_LISTEN", default_value = "0.0.0.0:7050")]
        listen: SocketAddr,
        #[arg(long, env = "NMC_LOG")]
        log: PathBuf,
        #[arg(long, env = "NMC_TIMEOUT_MS", default_value_t = DEFAULT_OFFLINE_TIMEOUT_MS)]
        timeout_ms: u64,
    },
    /// Encode one frame and print it as hex.
    EncodeFrame {
        #[arg(long)]
        site: u16,
        #[arg(long)]
        seq: u32,
        #[arg(long, default_value_t = 0)]
        ts: u64,
        /// Flag byte, decimal or 0x-prefixed hex.
        #[arg(long, value_parser = parse_byte, default_value = "0")]
        flags: u8,
        #[arg(long, allow_hyphen_values = true, default_value_t = 0)]
        temp_tenths: i16,
    },
    /// Decode a hex frame and print its fields.
    DecodeFrame { hex: String },
}

fn parse_byte(s: &str) -> Result<u8, String> {
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u8::from_str_radix(hex, 16),
        None => s.parse(),
    };
    parsed.map_err(|e| e.to_string())
}

enum Failure {
    Input(String),
    Connection(String),
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate { scenario, duration, eeprom, out, format, connect, seed, jitter_ms, site_id } => {
            let text = std::fs::read_to_string(&scenario)
                .map_err(|e| Failure::Input(format!("{}: {e}", scenario.display())))?;
            let events = parse_scenario(&text).map_err(|e| Failure::Input(format!("{}: {e}", scenario.display())))?;
            let eeprom = eeprom
                .map(|p| EepromImage::load(&p).map_err(|e| Failure::Input(format!("{}: {e}", p.display()))))
                .transpose()?;
            let link = match connect {
                Some(addr) => NmcLink::Tcp(
                    NmcClient::connect(addr.as_str()).map_err(|e| Failure::Connection(format!("{addr}: {e}")))?,
                ),
                None => NmcLink::default(),
            };
            let cfg = SimConfig { seed, jitter_ms, site_id, eeprom, link, ..SimConfig::new(duration) };
            let outcome = sim::simulate(&events, cfg).map_err(|e| match e {
                SimError::Link(err) => Failure::Connection(err.to_string()),
                other => Failure::Input(other.to_string()),
            })?;
            let text = emit_trace(&outcome.trace, format);
            match out {
                Some(path) => std::fs::write(&path, text).map_err(|e| Failure::Input(format!("{}: {e}", path.display()))),
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }
        Command::NmcServe { listen, log, timeout_ms } => {
            let cfg = ServerConfig { listen, offline_timeout_ms: timeout_ms, log_path: Some(log), journal: false };
            let handle = server::spawn(cfg).map_err(|e| Failure::Connection(format!("{listen}: {e}")))?;
            eprintln!("listening on {}", handle.local_addr());
            for line in io::stdin().lock().lines() {
                match line.as_deref().map(str::trim) {
                    Ok("dump") => print!("{}", handle.dump_sites()),
                    Ok("quit") => {
                        return handle.shutdown().map(|_| ()).map_err(|e| Failure::Input(e.to_string()));
                    }
                    Ok(_) => {}
                    Err(_) => break,
                }
            }
            // stdin closed without `quit`: keep serving
            loop {
                std::thread::park();
            }
        }
        Command::EncodeFrame { site, seq, ts, flags, temp_tenths } => {
            let flags = AlarmFlags::new(flags).map_err(|e| Failure::Input(e.to_string()))?;
            let frame = NmcFrame { site_id: site, seq, timestamp_ms: ts, flags, temp_tenths };
            let raw = frame.encode().map_err(|e| Failure::Input(e.to_string()))?;
            println!("{}", hex::encode_upper(raw));
            Ok(())
        }
        Command::DecodeFrame { hex: text } => {
            let cleaned: String = text.chars().filter(|c| !c.is_whitespace()).collect();
            let raw = hex::decode(&cleaned).map_err(|e| Failure::Input(format!("invalid hex: {e}")))?;
            let frame = NmcFrame::decode(&raw).map_err(|e| Failure::Input(format!("rejected: {e}")))?;
            println!("site_id={}", frame.site_id);
            println!("seq={}", frame.seq);
            println!("timestamp_ms={}", frame.timestamp_ms);
            println!("flags=0x{:02x}", frame.flags);
            println!("temp_tenths={}", frame.temp_tenths);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) if !err.use_stderr() => {
            let _ = err.print();
            return ExitCode::SUCCESS;
        }
        Err(err) => {
            let _ = err.print();
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Connection(msg)) => {
            eprintln!("connection error: {msg}");
            ExitCode::from(2)
        }
    }
}
