//! MPC runtime and traffic measurements over pool sizes and network profiles.
//!
//! A measurement starts once every computing peer holds its input shares and
//! ends when the peer has its shares of the output ready to send back.

use std::net::TcpListener;
use std::str::FromStr;
use std::time::Duration;

use clap::{Args, ValueEnum};
use kex_core::compat::MedicalRecord;
use kex_core::mpc::{run_local, LocalConfig, MpcError, Session, SessionConfig, TraceStats};
use kex_core::net::{connect_mesh, ClockMode, NetProfile, PeerId};
use kex_core::protocol::ProtocolOptions;
use kex_core::shamir::SharingParams;
use kex_core::sim::GeneratorConfig;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::CliError;
use crate::pipeline::{check_size, compute, share_all};
use crate::wire::RecordShares;
use crate::{open_out, Common};

const SEVEN_DAYS: Duration = Duration::from_secs(7 * 24 * 3600);
const ONE_HOUR: Duration = Duration::from_secs(3600);
const AUTO_REPS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BenchTransport {
    /// In-process links on a virtual clock that adds measured compute time.
    InprocVirtual,
    /// In-process links with real sleeps for shaped delays.
    InprocRealtime,
    /// Loopback TCP sockets with real sleeps for shaped delays.
    Tcp,
}

impl BenchTransport {
    fn label(self) -> &'static str {
        match self {
            BenchTransport::InprocVirtual => "inproc-virtual",
            BenchTransport::InprocRealtime => "inproc-realtime",
            BenchTransport::Tcp => "tcp",
        }
    }
}

/// A bandwidth cap in Mbit/s, or `none` for unlimited.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bandwidth(pub Option<f64>);

impl FromStr for Bandwidth {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("none") {
            return Ok(Bandwidth(None));
        }
        s.parse::<f64>().map(|b| Bandwidth(Some(b))).map_err(|e| format!("bandwidth {s:?}: {e}"))
    }
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "4,8")]
    pub sizes: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1,5,10")]
    pub latencies: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "none")]
    pub bandwidths: Vec<Bandwidth>,
    /// Repetitions per point; by default 10 when a run takes under an hour, else 1.
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long, value_enum, default_value = "inproc-virtual")]
    pub transport: BenchTransport,
    /// Antigen panel length of the generated records.
    #[arg(long, default_value_t = kex_core::compat::DEFAULT_PANEL)]
    pub panel: usize,
}

/// One CSV row; `rep` is a repetition number or `mean`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchResult {
    pub vertices: usize,
    pub latency_ms: f64,
    pub bandwidth_mbps: Option<f64>,
    pub transport: &'static str,
    pub rep: String,
    pub wall_runtime_s: f64,
    /// Bytes sent, summed over all computing peers.
    pub total_bytes: u64,
    pub rounds: u64,
    pub multiplications: u64,
    /// `ok`, `exceeded_7d` (run stopped counting), or `skipped` after a smaller size exceeded it.
    pub status: &'static str,
}

#[derive(Debug, Clone, Copy)]
struct Measurement {
    runtime: Duration,
    total_bytes: u64,
    stats: TraceStats,
}

fn records(n: usize, panel: usize, seed: u64) -> Vec<MedicalRecord> {
    let generator = GeneratorConfig {
        panel,
        incompatible_only: false,
        ..GeneratorConfig::default()
    };
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (1..=n as u64).map(|id| generator.sample(id, &mut rng)).collect()
}

fn peer_body(s: &mut Session, inputs: &[RecordShares], panel: usize) -> Result<(Duration, TraceStats), MpcError> {
    let opts = ProtocolOptions {
        verify_permutations: false,
        ..ProtocolOptions::default()
    };
    s.start_measurement();
    compute(s, inputs, panel, &opts)?;
    Ok((s.elapsed(), s.stats()))
}

fn measure(
    transport: BenchTransport,
    n: usize,
    panel: usize,
    profile: Option<NetProfile>,
    seed: u64,
) -> Result<Measurement, CliError> {
    let params = SharingParams::default();
    let recs = records(n, panel, seed);
    let shares = share_all(&recs, &params, &mut ChaCha20Rng::seed_from_u64(seed ^ 0x5eed));
    let per_peer: Vec<(Duration, TraceStats)> = match transport {
        BenchTransport::InprocVirtual | BenchTransport::InprocRealtime => {
            let clock = if transport == BenchTransport::InprocRealtime {
                ClockMode::RealTime
            } else {
                ClockMode::Virtual { include_compute: true }
            };
            let config = LocalConfig {
                profile,
                clock,
                seed: Some(seed),
                verify_openings: false,
                ..LocalConfig::default()
            };
            run_local(config, |s| peer_body(s, &shares[s.me() as usize - 1], panel))?
        }
        BenchTransport::Tcp => tcp_run(&shares, panel, profile, seed, &params)?,
    };
    Ok(Measurement {
        runtime: per_peer.iter().map(|p| p.0).max().unwrap_or_default(),
        total_bytes: per_peer.iter().map(|p| p.1.bytes_sent).sum(),
        stats: per_peer[0].1,
    })
}

fn tcp_run(
    shares: &[Vec<RecordShares>],
    panel: usize,
    profile: Option<NetProfile>,
    seed: u64,
    params: &SharingParams,
) -> Result<Vec<(Duration, TraceStats)>, CliError> {
    let listeners = (0..params.parties())
        .map(|_| TcpListener::bind("127.0.0.1:0"))
        .collect::<Result<Vec<_>, _>>()?;
    let addrs = listeners
        .iter()
        .enumerate()
        .map(|(i, l)| Ok((i as PeerId + 1, l.local_addr()?)))
        .collect::<Result<Vec<_>, std::io::Error>>()?;
    let results: Vec<Result<(Duration, TraceStats), CliError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = listeners
            .into_iter()
            .enumerate()
            .map(|(i, listener)| {
                let addrs = &addrs;
                scope.spawn(move || -> Result<(Duration, TraceStats), CliError> {
                    let me = i as PeerId + 1;
                    let others: Vec<_> = addrs.iter().copied().filter(|(p, _)| *p != me).collect();
                    let transport = connect_mesh(me, &listener, &others, 1, Duration::from_secs(30), profile, None)?;
                    let config = SessionConfig {
                        verify_openings: false,
                        ..SessionConfig::new(*params).with_seed(seed)
                    };
                    let mut session = Session::new(config, Box::new(transport))?;
                    Ok(peer_body(&mut session, &shares[i], panel)?)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(CliError::Other("peer thread panicked".into()))))
            .collect()
    });
    results.into_iter().collect()
}

fn row(
    args: &BenchArgs,
    n: usize,
    latency: f64,
    bandwidth: Option<f64>,
    rep: String,
    m: Option<&Measurement>,
    status: &'static str,
) -> BenchResult {
    BenchResult {
        vertices: n,
        latency_ms: latency,
        bandwidth_mbps: bandwidth,
        transport: args.transport.label(),
        rep,
        wall_runtime_s: m.map_or(0.0, |m| m.runtime.as_secs_f64()),
        total_bytes: m.map_or(0, |m| m.total_bytes),
        rounds: m.map_or(0, |m| m.stats.rounds),
        multiplications: m.map_or(0, |m| m.stats.multiplications),
        status,
    }
}

/// All rows for one network profile, sizes ascending.
fn sweep_profile(args: &BenchArgs, latency: f64, bandwidth: Option<f64>, seed: u64) -> Result<Vec<BenchResult>, CliError> {
    let profile = NetProfile::new(latency, bandwidth).map_err(CliError::Config)?;
    let mut sizes = args.sizes.clone();
    sizes.sort_unstable();
    let mut rows = Vec::new();
    let mut exceeded = false;
    for n in sizes {
        if exceeded {
            rows.push(row(args, n, latency, bandwidth, "mean".into(), None, "skipped"));
            continue;
        }
        let mut runs = Vec::new();
        let mut planned = args.reps.unwrap_or(1);
        while runs.len() < planned {
            let m = measure(args.transport, n, args.panel, Some(profile), seed.wrapping_add(runs.len() as u64))?;
            if m.runtime > SEVEN_DAYS {
                exceeded = true;
            }
            if args.reps.is_none() && runs.is_empty() && m.runtime < ONE_HOUR {
                planned = AUTO_REPS;
            }
            runs.push(m);
            if exceeded {
                break;
            }
        }
        let status = if exceeded { "exceeded_7d" } else { "ok" };
        for (i, m) in runs.iter().enumerate() {
            rows.push(row(args, n, latency, bandwidth, (i + 1).to_string(), Some(m), status));
        }
        let mean = Measurement {
            runtime: runs.iter().map(|m| m.runtime).sum::<Duration>() / runs.len() as u32,
            ..runs[0]
        };
        rows.push(row(args, n, latency, bandwidth, "mean".into(), Some(&mean), status));
    }
    Ok(rows)
}

pub fn run(args: &BenchArgs, common: &Common) -> Result<(), CliError> {
    for &n in &args.sizes {
        check_size(n)?;
    }
    if args.reps == Some(0) || args.sizes.is_empty() || args.latencies.is_empty() || args.bandwidths.is_empty() {
        return Err(CliError::Config("sizes, latencies, bandwidths and reps must be nonempty".into()));
    }
    let seed = common.seed.unwrap_or(0);
    let points: Vec<(f64, Option<f64>)> = args
        .latencies
        .iter()
        .flat_map(|&l| args.bandwidths.iter().map(move |b| (l, b.0)))
        .collect();
    // Real-time runs would disturb each other's wall clocks.
    let rows: Vec<Vec<BenchResult>> = if args.transport == BenchTransport::InprocVirtual {
        points.par_iter().map(|&(l, b)| sweep_profile(args, l, b, seed)).collect::<Result<_, _>>()?
    } else {
        points.iter().map(|&(l, b)| sweep_profile(args, l, b, seed)).collect::<Result<_, _>>()?
    };
    let mut w = csv::Writer::from_writer(open_out(common)?);
    for r in rows.iter().flatten() {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
