//! In-process transport over channels, with optional shaping.

use std::time::{Duration, Instant};

use crossbeam_channel::{unbounded, Receiver, Sender};

use super::{ClockMode, LinkShaper, NetError, NetProfile, PeerClock, PeerId, Transport};

struct Envelope {
    bytes: Vec<u8>,
    deliver_at: Duration,
}

pub struct MemoryTransport {
    me: PeerId,
    outbound: Vec<Option<(Sender<Envelope>, LinkShaper)>>,
    inbound: Vec<Option<Receiver<Envelope>>>,
    clock: PeerClock,
}

/// Fully connected in-process mesh for peers `1..=n`; element `i` belongs to peer `i + 1`.
pub fn memory_mesh(n: usize, profile: Option<NetProfile>, mode: ClockMode) -> Vec<MemoryTransport> {
    let epoch = Instant::now();
    let mut outbound: Vec<Vec<Option<(Sender<Envelope>, LinkShaper)>>> =
        (0..n).map(|_| (0..=n).map(|_| None).collect()).collect();
    let mut inbound: Vec<Vec<Option<Receiver<Envelope>>>> =
        (0..n).map(|_| (0..=n).map(|_| None).collect()).collect();
    for from in 1..=n {
        for to in 1..=n {
            if from != to {
                let (tx, rx) = unbounded();
                outbound[from - 1][to] = Some((tx, LinkShaper::new(profile)));
                inbound[to - 1][from] = Some(rx);
            }
        }
    }
    outbound
        .into_iter()
        .zip(inbound)
        .enumerate()
        .map(|(i, (outbound, inbound))| MemoryTransport {
            me: (i + 1) as PeerId,
            outbound,
            inbound,
            clock: PeerClock::new(mode, epoch),
        })
        .collect()
}

impl Transport for MemoryTransport {
    fn me(&self) -> PeerId {
        self.me
    }

    fn send(&mut self, to: PeerId, bytes: Vec<u8>) -> Result<(), NetError> {
        let now = self.clock.now();
        let (tx, shaper) = self
            .outbound
            .get_mut(to as usize)
            .and_then(Option::as_mut)
            .ok_or(NetError::NoLink(to))?;
        let deliver_at = shaper.schedule(now, bytes.len());
        tx.send(Envelope { bytes, deliver_at })
            .map_err(|_| NetError::Disconnected(to))
    }

    fn recv(&mut self, from: PeerId) -> Result<Vec<u8>, NetError> {
        let rx = self
            .inbound
            .get(from as usize)
            .and_then(Option::as_ref)
            .ok_or(NetError::NoLink(from))?;
        let env = rx.recv().map_err(|_| NetError::Disconnected(from))?;
        self.clock.advance_to(env.deliver_at);
        Ok(env.bytes)
    }

    fn elapsed(&mut self) -> Duration {
        self.clock.window()
    }

    fn restart_clock(&mut self) {
        self.clock.restart();
    }

    fn label(&self) -> &'static str {
        match self.clock.mode() {
            ClockMode::RealTime => "inproc-realtime",
            ClockMode::Virtual { include_compute: true } => "inproc-virtual",
            ClockMode::Virtual { include_compute: false } => "inproc-virtual-nocompute",
        }
    }
}
