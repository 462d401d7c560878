//! Acceptance criteria 1-8. Runs without the libtest harness so the verdict
//! lines are always printed; exits non-zero if any criterion fails.

use std::time::Instant;

use kex_core::compat::{plaintext_adjacency, MedicalRecord, SharedRecord};
use kex_core::matching::{berge_check, brute_force_max_matching, fixed_schedule, pape_conradt, Graph, Matching};
use kex_core::mpc::{
    eq_batch, index_vector, lt_batch, run_local, select_batch, vec_read, vec_write, LocalConfig, MpcError,
    SharedMatrix, SharedVector,
};
use kex_core::net::ClockMode;
use kex_core::protocol::{crossover_ke, crossover_ke_on_adjacency, reconstruct_snapshots, ProtocolOptions, Shuffle, StateShares};
use kex_core::shamir::{reconstruct, share, Share};
use kex_core::sim::{
    resolve_offer, run_simulation, run_sweep, Backend, GeneratorConfig, Metrics, OfferOutcome, RuntimeModel, SimConfig,
    SweepConfig,
};
use kex_core::{FieldElement, NetProfile, Session, SharedValue, SharingParams, TraceStats};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

type Verdict = Result<String, String>;

/// Graphs on which the plaintext algorithm is known to disagree with brute
/// force, in `Graph::to_text` form. Anything found outside this list fails.
const COUNTEREXAMPLE_WHITELIST: &[&str] = &[];

fn main() {
    let criteria: [(&str, fn() -> Verdict); 8] = [
        ("plaintext oracle equivalence", oracle_equivalence),
        ("end-to-end MPC correctness", end_to_end),
        ("data-obliviousness", obliviousness),
        ("primitive correctness", primitives),
        ("communication scaling", scaling),
        ("latency sensitivity", latency),
        ("simulator properties", simulator),
        ("offer resolution", offer_resolution),
    ];
    let filter: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let number = k + 1;
        if filter.is_some_and(|only| only != number) {
            continue;
        }
        let start = Instant::now();
        let verdict = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match verdict {
            Ok(detail) => println!("criterion {number} {name}: PASS ({detail}; {secs:.1}s)"),
            Err(detail) => {
                failed += 1;
                println!("criterion {number} {name}: FAIL ({detail}; {secs:.1}s)");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fast_local(seed: u64) -> LocalConfig {
    LocalConfig {
        verify_openings: false,
        ..LocalConfig::default().with_seed(seed)
    }
}

fn fast_opts(shuffle: Shuffle, trace: bool) -> ProtocolOptions {
    ProtocolOptions {
        shuffle,
        verify_permutations: false,
        trace,
    }
}

fn greedy_initial<R: Rng>(g: &Graph, rng: &mut R) -> Matching {
    let mut edges = g.edges();
    edges.shuffle(rng);
    let mut mate = vec![0; g.node_count()];
    for (u, v) in edges {
        if mate[u - 1] == 0 && mate[v - 1] == 0 && rng.gen_bool(0.5) {
            mate[u - 1] = v;
            mate[v - 1] = u;
        }
    }
    Matching::from_mates(mate)
}

fn oracle_equivalence() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let total = 2400;
    let mut registry = Vec::new();
    let mut whitelisted = 0;
    for k in 0..total {
        let n = 1 + k % 10;
        let p = rng.gen_range(0.05..0.9);
        let g = Graph::random(n, p, &mut rng);
        let initial = if k % 2 == 0 { Matching::empty(n) } else { greedy_initial(&g, &mut rng) };
        let m = pape_conradt(&g, &initial).map_err(|e| e.to_string())?;
        let (best, _) = brute_force_max_matching(&g).map_err(|e| e.to_string())?;
        let agrees = m.validate(&g).is_ok()
            && m.cardinality() == best
            && berge_check(&g, &m).map_err(|e| e.to_string())?;
        if !agrees {
            let text = g.to_text();
            if COUNTEREXAMPLE_WHITELIST.contains(&text.as_str()) {
                whitelisted += 1;
            } else {
                registry.push(text);
            }
        }
    }
    if !registry.is_empty() {
        let path = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("counterexamples.txt");
        std::fs::write(&path, registry.join("\n")).map_err(|e| e.to_string())?;
        return Err(format!("{} unlisted counterexamples recorded in {}", registry.len(), path.display()));
    }
    Ok(format!("{total} graphs with |V| <= 10, {whitelisted} whitelisted disagreements"))
}

fn dense_generator() -> GeneratorConfig {
    GeneratorConfig {
        panel: 8,
        antigen_prob: 0.15,
        antibody_prob_sensitized: 0.3,
        antibody_prob_other: 0.05,
        incompatible_only: false,
        ..GeneratorConfig::default()
    }
}

type ProtocolRun = (Vec<usize>, Vec<StateShares>, TraceStats);

/// Peer 1 inputs all records; every peer returns the opened mates (1-based
/// labels), its snapshots and its communication counters.
fn run_records(records: &[MedicalRecord], opts: &ProtocolOptions, seed: u64) -> Result<Vec<ProtocolRun>, MpcError> {
    let panel = records[0].panel_len();
    run_local(fast_local(seed), |s| {
        let flat: Vec<FieldElement> = records.iter().flat_map(|r| r.to_vector()).map(|v| s.element(v)).collect();
        let mine = (s.me() == 1).then_some(flat.as_slice());
        let shared = s.input(&[1], mine, flat.len())?.pop().expect("one owner").into_inner();
        let shared: Vec<SharedRecord> = shared
            .chunks(flat.len() / records.len())
            .map(|c| SharedRecord::from_flat(c, panel))
            .collect::<Result<_, _>>()?;
        let out = crossover_ke(s, &shared, opts)?;
        let mate = s.open_batch(&out.mate)?.iter().map(|f| f.value() as usize).collect();
        Ok((mate, out.snapshots, s.stats()))
    })
}

fn random_perm<R: Rng>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

fn end_to_end() -> Verdict {
    let sizes = [(1, 10), (2, 30), (3, 40), (4, 40), (5, 35), (6, 25), (7, 12), (8, 8)];
    let jobs: Vec<(usize, u64)> = sizes
        .iter()
        .flat_map(|&(n, count)| (0..count).map(move |k| (n, (n * 1000 + k) as u64)))
        .collect();
    let gen = dense_generator();
    let results: Vec<Result<(bool, usize), String>> = jobs
        .par_iter()
        .map(|&(n, seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let records: Vec<MedicalRecord> = (1..=n as u64).map(|id| gen.sample(id, &mut rng)).collect();
            let g = plaintext_adjacency(&records);
            let (best, _) = brute_force_max_matching(&g).map_err(|e| e.to_string())?;
            let fixed = seed % 2 == 0;
            let (shuffle, combined) = if fixed {
                let perms = vec![random_perm(n, &mut rng), random_perm(n, &mut rng)];
                let combined: Vec<usize> = (0..n).map(|i| perms[0][perms[1][i]]).collect();
                (Shuffle::Fixed(perms), combined)
            } else {
                (Shuffle::Random, Vec::new())
            };
            let out = run_records(&records, &fast_opts(shuffle, fixed), seed).map_err(|e| e.to_string())?;
            let m = Matching::from_mates(out[0].0.clone());
            m.validate(&g).map_err(|e| format!("seed {seed}: {e}"))?;
            let (lockstep, lockstep_snaps) = if fixed {
                fixed_schedule(&g.permuted(&combined))
            } else {
                fixed_schedule(&g)
            };
            check(m.cardinality() == lockstep.cardinality() && m.cardinality() == best, || {
                format!("seed {seed}: cardinality {} vs lockstep {} vs maximum {best}", m.cardinality(), lockstep.cardinality())
            })?;
            if fixed {
                check(lockstep.unpermuted(&combined) == m, || format!("seed {seed}: mates differ from lockstep"))?;
                let per_peer: Vec<Vec<StateShares>> = out.iter().map(|o| o.1.clone()).collect();
                let snaps = reconstruct_snapshots(&per_peer, &SharingParams::default()).map_err(|e| e.to_string())?;
                check(snaps == lockstep_snaps, || format!("seed {seed}: tree states differ from lockstep"))?;
            }
            Ok((fixed, g.edges().len()))
        })
        .collect();
    let mut fixed = 0;
    let mut edges = 0;
    for r in results {
        let (f, e) = r?;
        fixed += f as usize;
        edges += e;
    }
    Ok(format!(
        "{} instances with |V| <= 8, {fixed} checked state-by-state under fixed shuffles, {edges} edges total",
        jobs.len()
    ))
}

fn obliviousness() -> Verdict {
    let gen = dense_generator();
    let n = 5;
    let mut reference: Option<Vec<TraceStats>> = None;
    for k in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(5000 + k);
        let x: Vec<MedicalRecord> = (1..=n).map(|id| gen.sample(id, &mut rng)).collect();
        let y: Vec<MedicalRecord> = (1..=n).map(|id| gen.sample(id, &mut rng)).collect();
        check(x != y, || format!("pair {k}: inputs coincide"))?;
        let stats = |records: &[MedicalRecord], seed: u64| -> Result<Vec<TraceStats>, String> {
            let out = run_records(records, &fast_opts(Shuffle::Random, false), seed).map_err(|e| e.to_string())?;
            Ok(out.into_iter().map(|o| o.2).collect())
        };
        let sx = stats(&x, 2 * k)?;
        let sy = stats(&y, 2 * k + 1)?;
        check(sx == sy, || format!("pair {k}: {sx:?} vs {sy:?}"))?;
        match &reference {
            None => reference = Some(sx),
            Some(r) => check(*r == sx, || format!("pair {k} differs from pair 0"))?,
        }
    }
    let r = reference.expect("20 pairs");
    Ok(format!(
        "20 input pairs at |V| = 5 with identical per-peer traces ({} rounds, {} multiplications)",
        r[0].rounds, r[0].multiplications
    ))
}

fn input_values(s: &mut Session, vals: &[u64]) -> Result<Vec<SharedValue>, MpcError> {
    let fe: Vec<FieldElement> = vals.iter().map(|&v| s.element(v)).collect();
    let mine = (s.me() == 1).then_some(fe.as_slice());
    Ok(s.input(&[1], mine, vals.len())?.pop().expect("one owner").into_inner())
}

fn open_u64(s: &mut Session, v: &[SharedValue]) -> Result<Vec<u64>, MpcError> {
    Ok(s.open_batch(v)?.iter().map(|f| f.value()).collect())
}

fn primitives() -> Verdict {
    const DOMAIN: u64 = 16;
    const LEN: usize = 8;
    let base: Vec<u64> = (10..10 + LEN as u64).collect();
    let out = run_local(LocalConfig::default().with_seed(44), |s| {
        let pairs: Vec<(u64, u64)> = (0..DOMAIN).flat_map(|a| (0..DOMAIN).map(move |b| (a, b))).collect();
        let xs = input_values(s, &pairs.iter().map(|p| p.0).collect::<Vec<_>>())?;
        let ys = input_values(s, &pairs.iter().map(|p| p.1).collect::<Vec<_>>())?;
        let lt = lt_batch(s, &xs, &ys)?;
        let lt = open_u64(s, &lt)?;
        let eq = eq_batch(s, &xs, &ys)?;
        let eq = open_u64(s, &eq)?;

        let triples: Vec<(u64, u64, u64)> =
            (0..2).flat_map(|b| (0..4).flat_map(move |x| (0..4).map(move |y| (b, x, y)))).collect();
        let bs = input_values(s, &triples.iter().map(|t| t.0).collect::<Vec<_>>())?;
        let tx = input_values(s, &triples.iter().map(|t| t.1).collect::<Vec<_>>())?;
        let ty = input_values(s, &triples.iter().map(|t| t.2).collect::<Vec<_>>())?;
        let sel = select_batch(s, &bs, &tx, &ty)?;
        let sel = open_u64(s, &sel)?;

        let v = input_values(s, &base)?;
        let idx = input_values(s, &(0..=LEN as u64).collect::<Vec<_>>())?;
        let x = input_values(s, &[99])?[0];
        let mut ind = Vec::new();
        let mut reads = Vec::new();
        let mut writes = Vec::new();
        for &i in &idx {
            let one_hot = index_vector(s, i, LEN)?;
            ind.push(open_u64(s, &one_hot)?);
            reads.push(vec_read(s, &v, i)?);
            let written = vec_write(s, &SharedVector::new(v.clone()), i, x)?;
            writes.push(open_u64(s, &written)?);
        }
        let reads = open_u64(s, &reads)?;
        Ok((pairs, lt, eq, triples, sel, ind, reads, writes))
    })
    .map_err(|e| e.to_string())?;
    let (pairs, lt, eq, triples, sel, ind, reads, writes) = &out[0];
    for (k, &(a, b)) in pairs.iter().enumerate() {
        check(lt[k] == (a < b) as u64, || format!("lt({a}, {b}) = {}", lt[k]))?;
        check(eq[k] == (a == b) as u64, || format!("eq({a}, {b}) = {}", eq[k]))?;
    }
    for (k, &(b, x, y)) in triples.iter().enumerate() {
        let expected = if b == 1 { x } else { y };
        check(sel[k] == expected, || format!("select({b}, {x}, {y}) = {}", sel[k]))?;
    }
    for i in 0..=LEN {
        let one_hot: Vec<u64> = (1..=LEN).map(|j| (j == i) as u64).collect();
        check(ind[i] == one_hot, || format!("index_vector({i}) = {:?}", ind[i]))?;
        let read = if i == 0 { 0 } else { base[i - 1] };
        check(reads[i] == read, || format!("vec_read({i}) = {}", reads[i]))?;
        let mut written = base.clone();
        if i > 0 {
            written[i - 1] = 99;
        }
        check(writes[i] == written, || format!("vec_write({i}) = {:?}", writes[i]))?;
    }

    let params = SharingParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(45);
    let roundtrips = 10_000;
    for _ in 0..roundtrips {
        let secret = params.element(rng.gen_range(0..params.prime()));
        let shares = share(secret, &params, &mut rng);
        let subsets: [&[usize]; 4] = [&[0, 1, 2], &[0, 1], &[0, 2], &[1, 2]];
        for subset in subsets {
            let pick: Vec<Share> = subset.iter().map(|&k| shares[k].clone()).collect();
            let back = reconstruct(&pick, &params).map_err(|e| e.to_string())?;
            check(back == secret, || format!("roundtrip of {} gave {}", secret.value(), back.value()))?;
        }
    }

    let small = SharingParams::new(1, 3, 101).map_err(|e| e.to_string())?;
    let samples = 100_000;
    let secret = small.element(42);
    let mut counts = vec![vec![0u64; 101]; 3];
    for _ in 0..samples {
        for s in share(secret, &small, &mut rng) {
            counts[s.party - 1][s.value.value() as usize] += 1;
        }
    }
    let expected = samples as f64 / 101.0;
    let dist = ChiSquared::new(100.0).map_err(|e| e.to_string())?;
    let mut p_values = Vec::new();
    for (peer, c) in counts.iter().enumerate() {
        let stat: f64 = c.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
        let p = 1.0 - dist.cdf(stat);
        check(p >= 0.01, || format!("peer {} share distribution: chi2 = {stat:.1}, p = {p:.4}", peer + 1))?;
        p_values.push(p);
    }
    // with t = 1 each peer's share is secret + a * i, so all peers see the same
    // histogram up to relabeling
    let p_min = p_values.iter().copied().fold(1.0, f64::min);
    Ok(format!(
        "{} lt/eq, {} select, {} index/read/write cases exact; {roundtrips} roundtrips; single-share chi-square p = {p_min:.3} (p = 101, {samples} samples)",
        pairs.len(),
        triples.len(),
        LEN + 1
    ))
}

fn share_graph(s: &mut Session, g: &Graph) -> Result<SharedMatrix, MpcError> {
    let n = g.node_count();
    let vals: Vec<u64> = g.matrix().iter().map(|&b| b as u64).collect();
    SharedMatrix::new(n, n, input_values(s, &vals)?)
}

/// Counters and virtual runtime (max over peers) of one protocol run on a
/// random graph.
fn measured_run(n: usize, config: LocalConfig) -> Result<(TraceStats, f64), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
    let g = Graph::random(n, 0.3, &mut rng);
    let out = run_local(config, |s| {
        let a = share_graph(s, &g)?;
        let before = s.stats();
        s.start_measurement();
        crossover_ke_on_adjacency(s, &a, &fast_opts(Shuffle::Random, false))?;
        let secs = s.elapsed().as_secs_f64();
        let after = s.stats();
        Ok((
            TraceStats {
                rounds: after.rounds - before.rounds,
                multiplications: after.multiplications - before.multiplications,
                bytes_sent: after.bytes_sent - before.bytes_sent,
                messages_sent: after.messages_sent - before.messages_sent,
            },
            secs,
        ))
    })
    .map_err(|e| e.to_string())?;
    let secs = out.iter().map(|o| o.1).fold(0.0, f64::max);
    Ok((out[0].0, secs))
}

fn scaling() -> Verdict {
    let mut mults = Vec::new();
    for n in [4, 8, 16] {
        mults.push((n, measured_run(n, fast_local(n as u64))?.0.multiplications));
    }
    let mut ratios = Vec::new();
    for w in mults.windows(2) {
        let r = w[1].1 as f64 / w[0].1 as f64;
        check((16.0..=48.0).contains(&r), || format!("M({})/M({}) = {r:.1}", w[1].0, w[0].0))?;
        ratios.push(format!("M({})/M({}) = {r:.1}", w[1].0, w[0].0));
    }
    let counts: Vec<String> = mults.iter().map(|(n, m)| format!("M({n}) = {m}")).collect();
    Ok(format!("{}; {}", counts.join(", "), ratios.join(", ")))
}

fn latency() -> Verdict {
    let latencies = [1.0, 5.0, 10.0];
    let mut ratio_table = Vec::new();
    for n in [4, 8] {
        let mut times = Vec::new();
        for l in latencies {
            let config = LocalConfig {
                profile: Some(NetProfile::new(l, None)?),
                clock: ClockMode::Virtual { include_compute: true },
                ..fast_local(7)
            };
            times.push(measured_run(n, config)?.1);
        }
        check(times[0] < times[1] && times[1] < times[2], || format!("|V| = {n}: runtimes {times:?} not increasing"))?;
        let r5 = times[1] / times[0];
        let r10 = times[2] / times[0];
        check(r10 > r5, || format!("|V| = {n}: ratio 10/1 = {r10:.2} not above 5/1 = {r5:.2}"))?;
        ratio_table.push((n, times[0], r5, r10));
    }
    let (_, _, a5, a10) = ratio_table[0];
    let (_, t8, b5, b10) = ratio_table[1];
    for (name, a, b) in [("5/1", a5, b5), ("10/1", a10, b10)] {
        check((b / a - 1.0).abs() <= 0.25, || format!("ratio {name} moved from {a:.2} at |V| = 4 to {b:.2} at |V| = 8"))?;
    }
    Ok(format!(
        "|V| = 8 at 1 ms takes {t8:.1}s virtual; ratios 5/1 = {b5:.2}, 10/1 = {b10:.2} (|V| = 4: {a5:.2}, {a10:.2})"
    ))
}

struct PointStats {
    arrival: f64,
    interval: f64,
    pct: f64,
    se: f64,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn check_metrics(m: &Metrics, cfg: &SimConfig, model: &RuntimeModel) -> Result<usize, String> {
    check(m.final_states.total() == m.arrivals, || {
        format!("{} pairs accounted for, {} arrived", m.final_states.total(), m.arrivals)
    })?;
    check(m.final_states.transplanted % 2 == 0, || format!("odd transplant count {}", m.final_states.transplanted))?;
    check(m.transplants == m.final_states.transplanted, || "transplant counters disagree".into())?;
    let mut checked = 0;
    if cfg.backend == Backend::PrivacyPreserving {
        let cap = model.cap(cfg.latency_ms, cfg.match_run_interval_days).map_err(|e| e.to_string())?;
        for log in m.match_runs.iter().filter(|l| l.pool_size > 0 && !l.infeasible) {
            let k = log.sub_pools.len();
            let max = log.sub_pools.iter().copied().max().unwrap_or(0);
            let min = log.sub_pools.iter().copied().min().unwrap_or(0);
            check(
                log.sub_pools.iter().sum::<usize>() == log.pool_size
                    && k == log.pool_size.div_ceil(cap)
                    && max <= cap
                    && max - min <= 1,
                || format!("pool {} with cap {cap} split into {:?}", log.pool_size, log.sub_pools),
            )?;
            checked += 1;
        }
    }
    Ok(checked)
}

fn simulator() -> Verdict {
    let start = Instant::now();
    let model = RuntimeModel::default();
    let sweep = SweepConfig::default();
    let seeds: Vec<u64> = (0..sweep.seeds as u64).map(|i| sweep.first_seed + i).collect();
    let jobs: Vec<SimConfig> = sweep
        .points()
        .into_iter()
        .flat_map(|p| Backend::ALL.into_iter().map(move |backend| SimConfig { backend, ..p.clone() }))
        .collect();
    let runs: Vec<Vec<Metrics>> = jobs
        .par_iter()
        .map(|cfg| seeds.iter().map(|&s| run_simulation(cfg, &model, s).map_err(|e| e.to_string())).collect())
        .collect::<Result<_, String>>()?;
    let elapsed = start.elapsed().as_secs_f64();
    check(elapsed < 600.0, || format!("default sweep took {elapsed:.0}s"))?;

    let mut split_checks = 0;
    for (cfg, metrics) in jobs.iter().zip(&runs) {
        for (m, seed) in metrics.iter().zip(&seeds) {
            split_checks += check_metrics(m, cfg, &model).map_err(|e| format!("{cfg:?} seed {seed}: {e}"))?;
        }
    }
    for (cfg, metrics) in jobs.iter().zip(&runs).step_by(7) {
        for (m, &seed) in metrics.iter().zip(&seeds).step_by(10) {
            let again = run_simulation(cfg, &model, seed).map_err(|e| e.to_string())?;
            check(format!("{again:?}") == format!("{m:?}"), || format!("seed {seed} not reproducible"))?;
        }
    }

    let find = |backend: Backend, a: f64, i: f64| -> &Vec<Metrics> {
        let k = jobs
            .iter()
            .position(|c| c.backend == backend && c.arrival_interval_days == a && c.match_run_interval_days == i)
            .expect("grid point");
        &runs[k]
    };
    let transplants = |ms: &[Metrics]| -> Vec<f64> { ms.iter().map(|m| m.transplants as f64).collect() };
    let mut points = Vec::new();
    for &a in &sweep.arrival_interval_days {
        for &i in &sweep.match_run_interval_days {
            let conv = transplants(find(Backend::Conventional, a, i));
            let pp = transplants(find(Backend::PrivacyPreserving, a, i));
            let per_seed: Vec<f64> = pp.iter().zip(&conv).filter(|(_, c)| **c > 0.0).map(|(p, c)| 100.0 * p / c).collect();
            let m = mean(&per_seed);
            let var = per_seed.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (per_seed.len() - 1) as f64;
            points.push(PointStats {
                arrival: a,
                interval: i,
                pct: 100.0 * mean(&pp) / mean(&conv),
                se: (var / per_seed.len() as f64).sqrt(),
            });
        }
    }
    let at = |a: f64, i: f64| points.iter().find(|p| p.arrival == a && p.interval == i).expect("grid point");
    let tolerance = |x: &PointStats, y: &PointStats| 2.0 * (x.se.powi(2) + y.se.powi(2)).sqrt();
    let mut worst: f64 = 0.0;
    for &a in &sweep.arrival_interval_days {
        for w in sweep.match_run_interval_days.windows(2) {
            let (x, y) = (at(a, w[0]), at(a, w[1]));
            let rise = y.pct - x.pct;
            worst = worst.max(rise / tolerance(x, y));
            check(rise <= tolerance(x, y), || {
                format!("arrival {a}: {:.2}% at match {} rises to {:.2}% at match {}", x.pct, w[0], y.pct, w[1])
            })?;
        }
    }
    for &i in &sweep.match_run_interval_days {
        for w in sweep.arrival_interval_days.windows(2) {
            let (x, y) = (at(w[0], i), at(w[1], i));
            let drop = x.pct - y.pct;
            worst = worst.max(drop / tolerance(x, y));
            check(drop <= tolerance(x, y), || {
                format!("match {i}: {:.2}% at arrival {} falls to {:.2}% at arrival {}", x.pct, w[0], y.pct, w[1])
            })?;
        }
    }
    let (daily, rare) = (at(1.0, 1.0), at(1.0, 120.0));
    check(daily.pct > rare.pct, || format!("arrival 1: {:.2}% daily vs {:.2}% at 120 days", daily.pct, rare.pct))?;
    let soft = at(14.0, 1.0).pct;
    check(soft >= 96.0, || format!("arrival 14, daily match runs: {soft:.2}% below 98% - 2 pp"))?;

    let small = SweepConfig {
        arrival_interval_days: vec![1.0, 7.0],
        match_run_interval_days: vec![7.0, 60.0],
        seeds: 5,
        ..SweepConfig::default()
    };
    let rows = run_sweep(&small, &model).map_err(|e| e.to_string())?;
    for row in rows.iter().filter(|r| r.is_mean() && r.backend == Backend::PrivacyPreserving) {
        let conv = transplants(&find(Backend::Conventional, row.arrival_interval, row.match_interval)[..5]);
        let pp = transplants(&find(Backend::PrivacyPreserving, row.arrival_interval, row.match_interval)[..5]);
        let expected = 100.0 * mean(&pp) / mean(&conv);
        let got = row.pct_of_conventional.unwrap_or(f64::NAN);
        check((got - expected).abs() < 1e-9, || format!("sweep mean row {got} vs {expected}"))?;
    }

    Ok(format!(
        "{} runs in {elapsed:.0}s, {split_checks} privacy-preserving match runs checked for minimal balanced splits; trends hold within 2 SE (worst {worst:.2} SE); \
         arrival 1: {:.1}% daily vs {:.1}% at 120 days; arrival 14 daily: {soft:.2}%",
        jobs.len() * seeds.len(),
        daily.pct,
        rare.pct
    ))
}

fn offer_resolution() -> Verdict {
    let trials = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let certain = SimConfig {
        refusal_prob: 0.0,
        ..SimConfig::default()
    };
    let mut rates = Vec::new();
    for (a, b, expected) in [(true, true, 1.0 - 0.65 * 0.65), (true, false, 1.0 - 0.65 * 0.9), (false, false, 1.0 - 0.9 * 0.9)] {
        let failures = (0..trials)
            .filter(|_| resolve_offer(&certain, a, b, &mut rng) == OfferOutcome::CrossmatchFailed)
            .count();
        let rate = failures as f64 / trials as f64;
        check((rate - expected).abs() <= 0.01, || format!("sensitized ({a}, {b}): failure rate {rate:.4}, expected {expected:.4}"))?;
        rates.push(format!("{rate:.4}"));
    }
    let defaults = SimConfig::default();
    let refused = (0..trials)
        .filter(|_| resolve_offer(&defaults, false, false, &mut rng) == OfferOutcome::Refused)
        .count() as f64
        / trials as f64;
    check((refused - defaults.refusal_prob).abs() <= 0.01, || format!("refusal rate {refused:.4}"))?;
    Ok(format!(
        "crossmatch failure rates {} for sensitized/sensitized, mixed, neither over {trials} trials; refusal rate {refused:.4}",
        rates.join(", ")
    ))
}
