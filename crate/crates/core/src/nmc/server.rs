//! TCP front end for [`NmcState`].
//!
//! One thread per connection splits the byte stream into frames; every frame
//! and every liveness sweep is applied by a single writer thread that owns the
//! site table and the log, so the log is totally ordered.

use std::io::{self, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::path::PathBuf;
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::Arc;
use std::sync::atomic::{AtomicBool, Ordering};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use super::protocol::{FrameReader, NmcFrame, Reject};
use super::service::{reject_event, AlarmLog, AlarmLogRecord, NmcState, DEFAULT_OFFLINE_TIMEOUT_MS, SWEEP_INTERVAL_MS};

pub const DEFAULT_PORT: u16 = 7050;

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub listen: SocketAddr,
    pub offline_timeout_ms: u64,
    pub log_path: Option<PathBuf>,
    /// Keep a journal of accepted frames for [`ServerHandle::snapshot`].
    pub journal: bool,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            listen: SocketAddr::from(([0, 0, 0, 0], DEFAULT_PORT)),
            offline_timeout_ms: DEFAULT_OFFLINE_TIMEOUT_MS,
            log_path: None,
            journal: true,
        }
    }
}

/// Consistent copy of the service state taken by the writer thread.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub state: NmcState,
    pub records: Vec<AlarmLogRecord>,
}

enum Command {
    Frame(Result<NmcFrame, Reject>),
    Snapshot(Sender<Snapshot>),
    Stop,
}

pub struct ServerHandle {
    local_addr: SocketAddr,
    commands: Sender<Command>,
    stopping: Arc<AtomicBool>,
    acceptor: Option<JoinHandle<()>>,
    writer: Option<JoinHandle<io::Result<()>>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    pub fn snapshot(&self) -> Option<Snapshot> {
        let (tx, rx) = mpsc::channel();
        self.commands.send(Command::Snapshot(tx)).ok()?;
        rx.recv().ok()
    }

    pub fn dump_sites(&self) -> String {
        self.snapshot().map(|s| s.state.dump()).unwrap_or_default()
    }

    /// Stops accepting, drains queued frames and joins the writer.
    pub fn shutdown(mut self) -> io::Result<Snapshot> {
        let snap = self.snapshot();
        self.stop()?;
        snap.ok_or_else(|| io::Error::other("writer thread exited early"))
    }

    fn stop(&mut self) -> io::Result<()> {
        self.stopping.store(true, Ordering::SeqCst);
        // unblock accept()
        let _ = TcpStream::connect(self.local_addr);
        if let Some(h) = self.acceptor.take() {
            let _ = h.join();
        }
        let _ = self.commands.send(Command::Stop);
        match self.writer.take().map(|h| h.join()) {
            Some(Ok(result)) => result,
            Some(Err(_)) => Err(io::Error::other("writer thread panicked")),
            None => Ok(()),
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        let _ = self.stop();
    }
}

/// Binds and starts serving on background threads.
pub fn spawn(config: ServerConfig) -> io::Result<ServerHandle> {
    let listener = TcpListener::bind(config.listen)?;
    let local_addr = listener.local_addr()?;
    let log = match &config.log_path {
        Some(path) => Some(AlarmLog::open(path)?),
        None => None,
    };
    let mut state = NmcState::new(config.offline_timeout_ms);
    if !config.journal {
        state = state.without_journal();
    }

    let (tx, rx) = mpsc::channel();
    let stopping = Arc::new(AtomicBool::new(false));
    let writer = thread::Builder::new()
        .name("nmc-writer".into())
        .spawn(move || writer_loop(state, log, rx, !config.journal))?;

    let acceptor = {
        let tx = tx.clone();
        let stopping = Arc::clone(&stopping);
        thread::Builder::new()
            .name("nmc-accept".into())
            .spawn(move || accept_loop(listener, tx, stopping))?
    };

    log::info!("NMC listening on {local_addr}");
    Ok(ServerHandle {
        local_addr,
        commands: tx,
        stopping,
        acceptor: Some(acceptor),
        writer: Some(writer),
    })
}

fn accept_loop(listener: TcpListener, tx: Sender<Command>, stopping: Arc<AtomicBool>) {
    let mut readers = Vec::new();
    for conn in listener.incoming() {
        if stopping.load(Ordering::SeqCst) {
            break;
        }
        match conn {
            Ok(stream) => {
                let tx = tx.clone();
                let peer = stream.peer_addr().ok();
                log::debug!("connection from {peer:?}");
                readers.push(thread::spawn(move || connection_loop(stream, tx)));
            }
            Err(err) => log::warn!("accept failed: {err}"),
        }
    }
    for r in readers {
        if r.is_finished() {
            let _ = r.join();
        }
    }
}

fn connection_loop(mut stream: TcpStream, tx: Sender<Command>) {
    let mut reader = FrameReader::new();
    let mut buf = [0u8; 4096];
    loop {
        let n = match stream.read(&mut buf) {
            Ok(0) => break,
            Ok(n) => n,
            Err(err) if err.kind() == io::ErrorKind::Interrupted => continue,
            Err(err) => {
                log::debug!("connection closed: {err}");
                break;
            }
        };
        reader.push(&buf[..n]);
        while let Some(item) = reader.next_frame() {
            if tx.send(Command::Frame(item)).is_err() {
                return;
            }
        }
    }
    let _ = stream.shutdown(Shutdown::Both);
}

fn writer_loop(
    mut state: NmcState,
    mut log: Option<AlarmLog>,
    rx: Receiver<Command>,
    discard_records: bool,
) -> io::Result<()> {
    let started = Instant::now();
    let now_ms = || started.elapsed().as_millis() as u64;
    let mut records: Vec<AlarmLogRecord> = Vec::new();
    let mut next_sweep = SWEEP_INTERVAL_MS;
    loop {
        let wait = next_sweep.saturating_sub(now_ms());
        let batch = match rx.recv_timeout(Duration::from_millis(wait)) {
            Ok(Command::Frame(Ok(frame))) => state.ingest_frame(frame, now_ms()),
            Ok(Command::Frame(Err(reject))) => vec![reject_event(reject, now_ms())],
            Ok(Command::Snapshot(reply)) => {
                let _ = reply.send(Snapshot { state: state.clone(), records: records.clone() });
                continue;
            }
            Ok(Command::Stop) | Err(RecvTimeoutError::Disconnected) => break,
            Err(RecvTimeoutError::Timeout) => Vec::new(),
        };
        let mut batch = batch;
        let now = now_ms();
        if now >= next_sweep {
            batch.extend(state.heartbeat_sweep(now));
            next_sweep = now - now % SWEEP_INTERVAL_MS + SWEEP_INTERVAL_MS;
        }
        if batch.is_empty() {
            continue;
        }
        for r in &batch {
            log::info!("{r}");
        }
        if let Some(log) = log.as_mut() {
            log.append(&batch)?;
        }
        if !discard_records {
            records.extend(batch);
        }
    }
    Ok(())
}

/// Alarm-box side of the link: blocking writes of encoded frames.
#[derive(Debug)]
pub struct NmcClient {
    stream: TcpStream,
}

impl NmcClient {
    pub fn connect(addr: impl ToSocketAddrs) -> io::Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(Self { stream })
    }

    pub fn send(&mut self, frame: &NmcFrame) -> io::Result<()> {
        let raw = frame.encode().map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e))?;
        self.stream.write_all(&raw)
    }

    pub fn send_raw(&mut self, raw: &[u8]) -> io::Result<()> {
        self.stream.write_all(raw)
    }
}
