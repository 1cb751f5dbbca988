use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use phigamma::herr::{herr_complex, HerrParams};
use phigamma::module::twist_module;
use phigamma::padic::Modulus;
use phigamma::par::Exec;
use phigamma::snf::{smith_normal_form_with, Matrix};

const EXECS: [(&str, Exec); 2] = [("parallel", Exec::Parallel), ("sequential", Exec::Sequential)];

fn random_matrix(md: &Modulus, n: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<i64>> = (0..n).map(|_| (0..n).map(|_| rng.gen_range(-1000..1000)).collect()).collect();
    Matrix::from_rows(md, &rows)
}

fn matrices(c: &mut Criterion) {
    let md = Modulus::new(3, 12).unwrap();
    let mut g = c.benchmark_group("matrix");
    for n in [64usize, 192] {
        let (a, b) = (random_matrix(&md, n, 1), random_matrix(&md, n, 2));
        for (name, exec) in EXECS {
            g.bench_with_input(BenchmarkId::new(format!("mul/{name}"), n), &n, |bch, _| bch.iter(|| a.mul(&b, exec)));
            g.bench_with_input(BenchmarkId::new(format!("snf/{name}"), n), &n, |bch, _| {
                bch.iter(|| smith_normal_form_with(&a, false, exec))
            });
        }
    }
    g.finish();
}

fn cohomology(c: &mut Criterion) {
    let params = HerrParams::new(3, 12, 60, 4).unwrap();
    let m = twist_module(&Modulus::new(3, 16).unwrap(), 1);
    let mut g = c.benchmark_group("herr_complex");
    g.sample_size(10);
    for (name, exec) in EXECS {
        g.bench_function(name, |b| b.iter(|| herr_complex(&m, &params, exec).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, matrices, cohomology);
criterion_main!(benches);
