use std::time::Instant;
use hilbert_rwm_core::limit::tilted_moments;

fn main() {
    let t0 = Instant::now();
    let mut acc = 0.0_f64;
    let n = 2_000_000u64;
    for i in 0..n {
        let a = -0.1 + (i % 100) as f64 * 0.002;
        let b = -3.0 + (i % 1000) as f64 * 0.004;
        acc += tilted_moments(a, b, 0.002).m1;
    }
    let dt = t0.elapsed().as_secs_f64();
    println!("tilted_moments: {:.1} ns/call (acc {acc:.3})", dt / n as f64 * 1e9);
}
