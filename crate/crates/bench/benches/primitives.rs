//! Per-operation cost of the MPC building blocks. Each iteration includes
//! spawning the three in-process peers.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use kex_bench::local_config;
use kex_core::mpc::{eq_batch, index_vector, lt_batch, run_local, vec_read, Session, SharedVector};
use kex_core::shamir::{reconstruct, share, SharingParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn inputs(s: &mut Session, len: usize) -> SharedVector {
    let vals: Vec<_> = (0..len as u64).map(|v| s.element(v % 50)).collect();
    let mine = (s.me() == 1).then_some(vals.as_slice());
    s.input(&[1], mine, len).unwrap().pop().unwrap()
}

fn sharing(c: &mut Criterion) {
    let params = SharingParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    c.bench_function("share_reconstruct", |b| {
        b.iter(|| {
            let shares = share(params.element(black_box(123_456)), &params, &mut rng);
            reconstruct(&shares, &params).unwrap()
        })
    });
}

fn protocols(c: &mut Criterion) {
    let mut group = c.benchmark_group("mpc");
    group.sample_size(20);
    group.bench_function("mul_batch_1000", |b| {
        b.iter(|| {
            run_local(local_config(1), |s| {
                let x = inputs(s, 1000);
                s.mul_batch(&x, &x)
            })
            .unwrap()
        })
    });
    group.bench_function("eq_batch_100", |b| {
        b.iter(|| {
            run_local(local_config(2), |s| {
                let x = inputs(s, 100);
                let y: Vec<_> = x.iter().rev().copied().collect();
                eq_batch(s, &x, &y)
            })
            .unwrap()
        })
    });
    group.bench_function("lt_batch_100", |b| {
        b.iter(|| {
            run_local(local_config(3), |s| {
                let x = inputs(s, 100);
                let y: Vec<_> = x.iter().rev().copied().collect();
                lt_batch(s, &x, &y)
            })
            .unwrap()
        })
    });
    group.bench_function("index_read_16", |b| {
        b.iter(|| {
            run_local(local_config(4), |s| {
                let v = inputs(s, 17);
                let i = v[16];
                index_vector(s, v[3], 16)?;
                vec_read(s, &v[..16], i)
            })
            .unwrap()
        })
    });
    group.finish();
}

criterion_group!(benches, sharing, protocols);
criterion_main!(benches);
