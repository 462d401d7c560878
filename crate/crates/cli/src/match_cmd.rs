//! One-shot match: in-process for testing, or as an input peer against running daemons.

use std::io::BufReader;
use std::net::{SocketAddr, TcpStream};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use clap::Args;
use kex_core::compat::parse_records;
use kex_core::mpc::{run_local, LocalConfig};
use kex_core::protocol::ProtocolOptions;
use kex_core::shamir::SharingParams;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::error::{read_input, CliError};
use crate::pipeline::{check_records, compute, reconstruct_rows, share_all, write_mates};
use crate::wire::{read_result, write_submission};
use crate::{open_out, Common};

#[derive(Debug, Args)]
pub struct MatchArgs {
    /// Record file, one pair per line.
    #[arg(long)]
    pub records: PathBuf,
    /// Run all three computing peers in this process.
    #[arg(long)]
    pub local: bool,
    /// Submission addresses of computing peers 1, 2, 3, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub peers: Vec<SocketAddr>,
    #[arg(long, default_value_t = 1)]
    pub session: u16,
    /// Seconds to keep retrying unreachable peers.
    #[arg(long, default_value_t = 10)]
    pub connect_timeout_s: u64,
}

pub fn run(args: &MatchArgs, common: &Common) -> Result<(), CliError> {
    let records = parse_records(&read_input(&args.records)?).map_err(|e| CliError::Config(e.to_string()))?;
    let panel = check_records(&records)?;
    let params = SharingParams::default();
    let mut rng = match common.seed {
        Some(s) => ChaCha20Rng::seed_from_u64(s),
        None => ChaCha20Rng::from_entropy(),
    };
    let shares = share_all(&records, &params, &mut rng);
    let rows = if args.local {
        let config = LocalConfig {
            seed: common.seed,
            verify_openings: false,
            ..LocalConfig::default()
        };
        let opts = ProtocolOptions {
            verify_permutations: false,
            ..ProtocolOptions::default()
        };
        let per_peer = run_local(config, |s| {
            let (ids, mates) = compute(s, &shares[s.me() as usize - 1], panel, &opts)?;
            Ok(ids.into_iter().zip(mates.shares()).collect::<Vec<_>>())
        })?;
        reconstruct_rows(&per_peer, &params)?
    } else {
        if args.peers.len() != params.parties() {
            return Err(CliError::Config(format!("--peers needs {} addresses", params.parties())));
        }
        let timeout = Duration::from_secs(args.connect_timeout_s);
        let mut streams = Vec::new();
        for (addr, mine) in args.peers.iter().zip(&shares) {
            let mut stream = connect(*addr, timeout)?;
            write_submission(&mut stream, args.session, mine).map_err(|e| CliError::Transport(e.to_string()))?;
            streams.push(stream);
        }
        let per_peer = streams
            .into_iter()
            .map(|s| read_result(&mut BufReader::new(s), params.prime()))
            .collect::<Result<Vec<_>, _>>()?;
        reconstruct_rows(&per_peer, &params)?
    };
    write_mates(open_out(common)?, &rows)
}

fn connect(addr: SocketAddr, timeout: Duration) -> Result<TcpStream, CliError> {
    let deadline = Instant::now() + timeout;
    loop {
        match TcpStream::connect_timeout(&addr, Duration::from_millis(500)) {
            Ok(s) => return Ok(s),
            Err(e) if Instant::now() >= deadline => return Err(CliError::Transport(format!("{addr}: {e}"))),
            Err(_) => std::thread::sleep(Duration::from_millis(100)),
        }
    }
}
