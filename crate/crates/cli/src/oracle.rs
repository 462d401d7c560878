//! Plaintext maximum matching on a graph file.

use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use kex_core::matching::{berge_check, brute_force_max_matching, pape_conradt, Graph, Matching, BRUTE_FORCE_MAX_NODES};

use crate::error::{read_input, CliError};
use crate::{open_out, Common};

#[derive(Debug, Args)]
pub struct OracleArgs {
    /// Graph file: node count, then one `u v` edge per line.
    pub graph: PathBuf,
}

pub fn run(args: &OracleArgs, common: &Common) -> Result<(), CliError> {
    let g = Graph::parse(&read_input(&args.graph)?).map_err(|e| CliError::Config(e.to_string()))?;
    let m = pape_conradt(&g, &Matching::empty(g.node_count())).map_err(|e| CliError::Config(e.to_string()))?;
    if g.node_count() <= BRUTE_FORCE_MAX_NODES {
        let (best, _) = brute_force_max_matching(&g).map_err(|e| CliError::Other(e.to_string()))?;
        if best != m.cardinality() {
            return Err(CliError::Other(format!(
                "oracle disagreement: pape-conradt found {}, brute force {best}",
                m.cardinality()
            )));
        }
    } else if !berge_check(&g, &m).map_err(|e| CliError::Other(e.to_string()))? {
        return Err(CliError::Other("matching admits an augmenting path".into()));
    }
    let mut out = open_out(common)?;
    writeln!(out, "matching size {}", m.cardinality())?;
    for (u, v) in m.pairs() {
        writeln!(out, "{u} {v}")?;
    }
    Ok(())
}
