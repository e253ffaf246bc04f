use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use lbzero::circle::Sl2Matrix;
use lbzero::cocycle::{furstenberg_families, top_lyapunov};
use lbzero::fbar::{bernoulli_block_law, fbar_measures_exact, lcs_len, lcs_len_naive, JoiningProblem, DEFAULT_COST_CAP};
use lbzero::{BernoulliVector, RngStream};
use rand::Rng;

fn lcs(c: &mut Criterion) {
    let mut r = RngStream::new(1, 0).rng();
    let mut g = c.benchmark_group("lcs");
    for n in [64usize, 1024, 16384] {
        let a: Vec<usize> = (0..n).map(|_| r.gen_range(0..4)).collect();
        let b: Vec<usize> = (0..n).map(|_| r.gen_range(0..4)).collect();
        g.bench_with_input(BenchmarkId::new("bit-parallel", n), &n, |bch, _| bch.iter(|| lcs_len(black_box(&a), black_box(&b))));
        if n <= 1024 {
            g.bench_with_input(BenchmarkId::new("naive", n), &n, |bch, _| bch.iter(|| lcs_len_naive(black_box(&a), black_box(&b))));
        }
    }
    g.finish();
}

fn transport(c: &mut Criterion) {
    let p = BernoulliVector::uniform(2);
    let q = BernoulliVector::new(vec![0.75, 0.25]).unwrap();
    let mut g = c.benchmark_group("transport");
    g.sample_size(10);
    for n in [4usize, 6, 8] {
        let problem = JoiningProblem::new(bernoulli_block_law(&p, n), bernoulli_block_law(&q, n)).unwrap();
        g.bench_with_input(BenchmarkId::new("exact-fbar", n), &n, |bch, _| bch.iter(|| fbar_measures_exact(black_box(&problem), DEFAULT_COST_CAP).unwrap()));
    }
    g.finish();
}

fn lyapunov(c: &mut Criterion) {
    let p = BernoulliVector::uniform(2);
    let mut g = c.benchmark_group("lyapunov");
    for (name, fam) in furstenberg_families() {
        g.bench_function(name, |bch| bch.iter(|| top_lyapunov(black_box(&fam), &p, 100_000, 1, RngStream::new(2, 0)).unwrap()));
    }
    let a = Sl2Matrix::diag(2.0);
    g.bench_function("product-1e5", |bch| {
        bch.iter(|| {
            let mut m = Sl2Matrix::identity();
            for _ in 0..100_000 {
                m = a.mul(&m);
                let s = m.norm();
                m = Sl2Matrix { a: m.a / s, b: m.b / s, c: m.c / s, d: m.d / s };
            }
            m
        })
    });
    g.finish();
}

criterion_group!(benches, lcs, transport, lyapunov);
criterion_main!(benches);
