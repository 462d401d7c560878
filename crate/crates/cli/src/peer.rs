//! Computing-peer daemon: joins the peer mesh, collects record shares on the
//! submission port, runs one protocol session and answers every submitter.

use std::io::BufReader;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::Path;
use std::time::Duration;

use clap::Args;
use kex_core::field::FieldElement;
use kex_core::mpc::{ComparisonParams, Session, SessionConfig};
use kex_core::net::{connect_mesh, MacKey, NetProfile, PeerId};
use kex_core::protocol::ProtocolOptions;
use kex_core::shamir::SharingParams;
use kex_core::DEFAULT_PRIME;
use serde::{Deserialize, Serialize};

use crate::error::{read_input, CliError};
use crate::pipeline::{check_size, compute, vector_len};
use crate::wire::{read_submission, write_result, RecordShares};
use crate::Common;

/// Settings from `--config`; command-line flags take precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PeerConfig {
    pub peer_id: Option<PeerId>,
    pub listen: Option<SocketAddr>,
    pub submit: Option<SocketAddr>,
    /// Other peers as `id=host:port`.
    pub connect: Vec<String>,
    pub vertices: Option<usize>,
    pub panel: Option<usize>,
    pub prime: Option<u64>,
    pub latency_ms: Option<f64>,
    pub bandwidth_mbps: Option<f64>,
    pub mac_key: Option<String>,
    pub session: Option<u16>,
    pub timeout_s: Option<u64>,
}

#[derive(Debug, Args)]
pub struct PeerArgs {
    #[arg(long)]
    pub peer_id: Option<PeerId>,
    /// Address for links from other computing peers.
    #[arg(long)]
    pub listen: Option<SocketAddr>,
    /// Address where input peers submit records.
    #[arg(long)]
    pub submit: Option<SocketAddr>,
    /// Other computing peers as `id=host:port`, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub connect: Vec<String>,
    /// Number of pairs in the session.
    #[arg(long)]
    pub vertices: Option<usize>,
    /// Antigen panel length.
    #[arg(long)]
    pub panel: Option<usize>,
    #[arg(long)]
    pub prime: Option<u64>,
    #[arg(long)]
    pub latency_ms: Option<f64>,
    #[arg(long)]
    pub bandwidth_mbps: Option<f64>,
    /// Pre-shared key authenticating peer links.
    #[arg(long)]
    pub mac_key: Option<String>,
    #[arg(long)]
    pub session: Option<u16>,
    /// Seconds to wait for the other computing peers.
    #[arg(long)]
    pub timeout_s: Option<u64>,
}

struct Resolved {
    peer_id: PeerId,
    listen: SocketAddr,
    submit: SocketAddr,
    peers: Vec<(PeerId, SocketAddr)>,
    vertices: usize,
    panel: usize,
    params: SharingParams,
    profile: Option<NetProfile>,
    mac: Option<MacKey>,
    session: u16,
    timeout: Duration,
}

fn parse_peer(s: &str) -> Result<(PeerId, SocketAddr), CliError> {
    let (id, addr) = s
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("peer {s:?} is not of the form id=host:port")))?;
    let id = id.trim().parse().map_err(|_| CliError::Config(format!("bad peer id in {s:?}")))?;
    let addr = addr.trim().parse().map_err(|_| CliError::Config(format!("bad address in {s:?}")))?;
    Ok((id, addr))
}

fn resolve(args: &PeerArgs, config: Option<&Path>) -> Result<Resolved, CliError> {
    let file: PeerConfig = match config {
        Some(p) => toml::from_str(&read_input(p)?).map_err(|e| CliError::Config(e.to_string()))?,
        None => PeerConfig::default(),
    };
    let missing = |name: &str| CliError::Config(format!("--{name} is required"));
    let peer_id = args.peer_id.or(file.peer_id).ok_or_else(|| missing("peer-id"))?;
    let listen = args.listen.or(file.listen).ok_or_else(|| missing("listen"))?;
    let submit = args.submit.or(file.submit).ok_or_else(|| missing("submit"))?;
    let connect = if args.connect.is_empty() { &file.connect } else { &args.connect };
    let peers = connect.iter().map(|s| parse_peer(s)).collect::<Result<Vec<_>, _>>()?;
    let vertices = args.vertices.or(file.vertices).ok_or_else(|| missing("vertices"))?;
    check_size(vertices)?;
    let panel = args.panel.or(file.panel).unwrap_or(kex_core::compat::DEFAULT_PANEL);
    let prime = args.prime.or(file.prime).unwrap_or(DEFAULT_PRIME);
    let params = SharingParams::new(1, 3, prime).map_err(|e| CliError::Config(e.to_string()))?;
    ComparisonParams::default().validate(&params)?;
    if peer_id == 0 || peer_id as usize > params.parties() {
        return Err(CliError::Config(format!("peer id must be in 1..={}", params.parties())));
    }
    let mut ids: Vec<PeerId> = peers.iter().map(|p| p.0).collect();
    ids.push(peer_id);
    ids.sort_unstable();
    if ids != (1..=params.parties() as PeerId).collect::<Vec<_>>() {
        return Err(CliError::Config("--connect must name every other computing peer exactly once".into()));
    }
    let latency = args.latency_ms.or(file.latency_ms);
    let bandwidth = args.bandwidth_mbps.or(file.bandwidth_mbps);
    let profile = if latency.is_some() || bandwidth.is_some() {
        Some(NetProfile::new(latency.unwrap_or(0.0), bandwidth).map_err(CliError::Config)?)
    } else {
        None
    };
    Ok(Resolved {
        peer_id,
        listen,
        submit,
        peers,
        vertices,
        panel,
        params,
        profile,
        mac: args.mac_key.clone().or(file.mac_key).map(|k| MacKey::new(k.into_bytes())),
        session: args.session.or(file.session).unwrap_or(1),
        timeout: Duration::from_secs(args.timeout_s.or(file.timeout_s).unwrap_or(60)),
    })
}

pub fn run(args: &PeerArgs, common: &Common) -> Result<(), CliError> {
    let cfg = resolve(args, common.config.as_deref())?;
    let listener = TcpListener::bind(cfg.listen).map_err(|e| CliError::Transport(format!("{}: {e}", cfg.listen)))?;
    let submissions = TcpListener::bind(cfg.submit).map_err(|e| CliError::Transport(format!("{}: {e}", cfg.submit)))?;
    tracing::info!(peer = cfg.peer_id, listen = %cfg.listen, submit = %cfg.submit, "waiting for peers");
    let transport = connect_mesh(cfg.peer_id, &listener, &cfg.peers, cfg.session, cfg.timeout, cfg.profile, cfg.mac.clone())?;

    let mut inputs: Vec<RecordShares> = Vec::new();
    let mut submitters: Vec<(TcpStream, Vec<u64>)> = Vec::new();
    while inputs.len() < cfg.vertices {
        let (stream, from) = submissions.accept()?;
        let remaining = cfg.vertices - inputs.len();
        let mut reader = BufReader::new(stream.try_clone()?);
        match read_submission(&mut reader, cfg.session, vector_len(cfg.panel), remaining, cfg.params.prime()) {
            Ok(records) => {
                tracing::info!(%from, records = records.len(), "submission received");
                submitters.push((stream, records.iter().map(|r| r.0).collect()));
                inputs.extend(records);
            }
            Err(e) => tracing::warn!(%from, error = %e, "rejected submission"),
        }
    }

    let session_config = SessionConfig {
        session_id: cfg.session,
        params: cfg.params,
        comparison: ComparisonParams::default(),
        seed: common.seed,
        verify_openings: false,
    };
    let mut session = Session::new(session_config, Box::new(transport))?;
    session.start_measurement();
    let opts = ProtocolOptions {
        verify_permutations: false,
        ..ProtocolOptions::default()
    };
    let (ids, mates) = compute(&mut session, &inputs, cfg.panel, &opts)?;
    let by_id: std::collections::HashMap<u64, FieldElement> = ids.into_iter().zip(mates.shares()).collect();
    for (mut stream, wanted) in submitters {
        let rows: Vec<(u64, FieldElement)> = wanted.iter().map(|id| (*id, by_id[id])).collect();
        if let Err(e) = write_result(&mut stream, &rows) {
            tracing::warn!(error = %e, "could not return results to a submitter");
        }
    }
    let elapsed = session.elapsed();
    let stats = session.stats();
    tracing::info!(runtime_s = elapsed.as_secs_f64(), bytes = stats.bytes_sent, rounds = stats.rounds, "session finished");
    if let Some(path) = &common.out {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["peer_id", "vertices", "runtime_s", "bytes_sent", "rounds", "multiplications"])?;
        w.write_record([
            cfg.peer_id.to_string(),
            cfg.vertices.to_string(),
            elapsed.as_secs_f64().to_string(),
            stats.bytes_sent.to_string(),
            stats.rounds.to_string(),
            stats.multiplications.to_string(),
        ])?;
        w.flush()?;
    }
    Ok(())
}
