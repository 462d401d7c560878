//! Runs all computing peers of a protocol in-process, one thread each.

use crate::net::{memory_mesh, ClockMode, NetError, NetProfile};
use crate::shamir::SharingParams;

use super::{ComparisonParams, MpcError, Session, SessionConfig};

#[derive(Debug, Clone, Copy)]
pub struct LocalConfig {
    pub params: SharingParams,
    pub comparison: ComparisonParams,
    pub profile: Option<NetProfile>,
    pub clock: ClockMode,
    pub seed: Option<u64>,
    pub verify_openings: bool,
}

impl Default for LocalConfig {
    fn default() -> Self {
        Self {
            params: SharingParams::default(),
            comparison: ComparisonParams::default(),
            profile: None,
            clock: ClockMode::Virtual { include_compute: false },
            seed: None,
            verify_openings: cfg!(debug_assertions),
        }
    }
}

impl LocalConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }
}

/// Runs `f` on every peer and returns the results in peer order.
///
/// A failing peer drops its links, so the others fail with a disconnect
/// rather than hanging; the root cause is reported in preference to those.
pub fn run_local<R, F>(config: LocalConfig, f: F) -> Result<Vec<R>, MpcError>
where
    R: Send,
    F: Fn(&mut Session) -> Result<R, MpcError> + Sync,
{
    let mesh = memory_mesh(config.params.parties(), config.profile, config.clock);
    let results: Vec<Result<R, MpcError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = mesh
            .into_iter()
            .map(|transport| {
                let f = &f;
                scope.spawn(move || {
                    let session_config = SessionConfig {
                        session_id: 1,
                        params: config.params,
                        comparison: config.comparison,
                        seed: config.seed,
                        verify_openings: config.verify_openings,
                    };
                    let mut session = Session::new(session_config, Box::new(transport))?;
                    f(&mut session)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or(Err(MpcError::PeerPanic)))
            .collect()
    });
    let mut out = Vec::with_capacity(results.len());
    let mut first_err: Option<MpcError> = None;
    for r in results {
        match r {
            Ok(v) => out.push(v),
            Err(e) => {
                let secondary = matches!(e, MpcError::Net(NetError::Disconnected(_)));
                if first_err.is_none() || (!secondary && is_disconnect(first_err.as_ref())) {
                    first_err = Some(e);
                }
            }
        }
    }
    match first_err {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

fn is_disconnect(e: Option<&MpcError>) -> bool {
    matches!(e, Some(MpcError::Net(NetError::Disconnected(_))))
}
