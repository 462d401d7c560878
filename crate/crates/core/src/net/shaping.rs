//! Latency and bandwidth shaping, and the clocks transports measure time with.
//!
//! Each outbound link owns a [`LinkShaper`]: a token bucket that serializes
//! bytes at the configured bandwidth, followed by a fixed one-way delay.
//! Delivery times are computed on a [`PeerClock`] timeline, which is either
//! real elapsed time (receivers sleep until delivery) or a virtual timeline
//! (receivers jump forward, nothing sleeps).

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetProfile {
    /// One-way delay added to every message.
    pub latency_ms: f64,
    /// Outbound cap; `None` means unlimited.
    pub bandwidth_mbps: Option<f64>,
}

impl NetProfile {
    pub fn new(latency_ms: f64, bandwidth_mbps: Option<f64>) -> Result<Self, String> {
        if !(latency_ms >= 0.0 && latency_ms.is_finite()) {
            return Err(format!("latency must be >= 0, got {latency_ms}"));
        }
        if let Some(b) = bandwidth_mbps {
            if !(b > 0.0 && b.is_finite()) {
                return Err(format!("bandwidth must be > 0, got {b}"));
            }
        }
        Ok(Self {
            latency_ms,
            bandwidth_mbps,
        })
    }

    pub fn latency(&self) -> Duration {
        Duration::from_secs_f64(self.latency_ms / 1e3)
    }

    pub fn transmit_time(&self, bytes: usize) -> Duration {
        match self.bandwidth_mbps {
            Some(mbps) => Duration::from_secs_f64(bytes as f64 * 8.0 / (mbps * 1e6)),
            None => Duration::ZERO,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LinkShaper {
    profile: Option<NetProfile>,
    next_free: Duration,
}

impl LinkShaper {
    pub fn new(profile: Option<NetProfile>) -> Self {
        Self {
            profile,
            next_free: Duration::ZERO,
        }
    }

    /// Delivery time of a message of `bytes` handed to the link at `now`.
    ///
    /// Monotone in `now`, so per-link FIFO order is preserved.
    pub fn schedule(&mut self, now: Duration, bytes: usize) -> Duration {
        match &self.profile {
            None => now,
            Some(p) => {
                let start = now.max(self.next_free);
                self.next_free = start + p.transmit_time(bytes);
                self.next_free + p.latency()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClockMode {
    /// Virtual timeline. With `include_compute`, the thread's CPU time between
    /// communication events is added, so the timeline approximates a shaped
    /// real network without sleeping.
    Virtual { include_compute: bool },
    /// Wall-clock time; shaped messages are held until their delivery time.
    RealTime,
}

#[derive(Debug)]
pub struct PeerClock {
    mode: ClockMode,
    epoch: Instant,
    virtual_now: Duration,
    last_cpu: Duration,
    window_start: Duration,
}

impl PeerClock {
    pub fn new(mode: ClockMode, epoch: Instant) -> Self {
        Self {
            mode,
            epoch,
            virtual_now: Duration::ZERO,
            last_cpu: thread_cpu_time(),
            window_start: Duration::ZERO,
        }
    }

    pub fn mode(&self) -> ClockMode {
        self.mode
    }

    /// Current time on this peer's timeline.
    pub fn now(&mut self) -> Duration {
        match self.mode {
            ClockMode::RealTime => self.epoch.elapsed(),
            ClockMode::Virtual { include_compute } => {
                if include_compute {
                    let cpu = thread_cpu_time();
                    self.virtual_now += cpu.saturating_sub(self.last_cpu);
                    self.last_cpu = cpu;
                }
                self.virtual_now
            }
        }
    }

    /// Waits (or jumps) until `t` on this peer's timeline.
    pub fn advance_to(&mut self, t: Duration) {
        match self.mode {
            ClockMode::RealTime => {
                let now = self.epoch.elapsed();
                if t > now {
                    std::thread::sleep(t - now);
                }
            }
            ClockMode::Virtual { .. } => {
                let now = self.now();
                self.virtual_now = now.max(t);
            }
        }
    }

    /// Starts a measurement window at the current time.
    ///
    /// The timeline itself is never rewound: in-flight messages keep their
    /// delivery times.
    pub fn restart(&mut self) {
        self.window_start = self.now();
    }

    /// Time since the last [`PeerClock::restart`].
    pub fn window(&mut self) -> Duration {
        self.now().saturating_sub(self.window_start)
    }
}

#[cfg(target_os = "linux")]
fn thread_cpu_time() -> Duration {
    let mut ts = libc::timespec {
        tv_sec: 0,
        tv_nsec: 0,
    };
    // SAFETY: valid pointer to a timespec on the stack.
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_THREAD_CPUTIME_ID, &mut ts) };
    if rc != 0 {
        return Duration::ZERO;
    }
    Duration::new(ts.tv_sec as u64, ts.tv_nsec as u32)
}

#[cfg(not(target_os = "linux"))]
fn thread_cpu_time() -> Duration {
    use std::sync::OnceLock;
    static START: OnceLock<Instant> = OnceLock::new();
    START.get_or_init(Instant::now).elapsed()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unshaped_link_is_immediate() {
        let mut s = LinkShaper::new(None);
        assert_eq!(s.schedule(Duration::from_millis(3), 1_000_000), Duration::from_millis(3));
    }

    #[test]
    fn latency_and_token_bucket() {
        // 8 Mbps => 1 MB takes one second on the wire
        let mut s = LinkShaper::new(Some(NetProfile::new(10.0, Some(8.0)).unwrap()));
        let t1 = s.schedule(Duration::ZERO, 1_000_000);
        assert_eq!(t1, Duration::from_secs(1) + Duration::from_millis(10));
        // queued behind the first message
        let t2 = s.schedule(Duration::from_millis(500), 500_000);
        assert_eq!(t2, Duration::from_millis(1500) + Duration::from_millis(10));
        // idle link starts fresh
        let t3 = s.schedule(Duration::from_secs(5), 0);
        assert_eq!(t3, Duration::from_secs(5) + Duration::from_millis(10));
    }

    #[test]
    fn profile_validation() {
        assert!(NetProfile::new(-1.0, None).is_err());
        assert!(NetProfile::new(1.0, Some(0.0)).is_err());
        assert!(NetProfile::new(0.0, None).is_ok());
    }

    #[test]
    fn virtual_clock_jumps() {
        let mut c = PeerClock::new(ClockMode::Virtual { include_compute: false }, Instant::now());
        c.advance_to(Duration::from_secs(100));
        assert_eq!(c.now(), Duration::from_secs(100));
        c.advance_to(Duration::from_secs(50));
        assert_eq!(c.now(), Duration::from_secs(100));
        c.restart();
        assert_eq!(c.window(), Duration::ZERO);
        c.advance_to(Duration::from_secs(130));
        assert_eq!(c.window(), Duration::from_secs(30));
    }
}
