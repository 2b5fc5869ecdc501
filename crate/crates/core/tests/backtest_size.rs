//! Monte-Carlo size of the unconditional coverage test.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use varcast_core::backtest::{kupiec_uc, HitSeries};

#[test]
fn kupiec_empirical_size_near_nominal() {
    // correctly sized i.i.d. hit process: the 5% test rejects at close to
    // the nominal rate over 200 replications
    let tau = 0.05;
    let n = 1000;
    let mut rejections = 0;
    for rep in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(90_000 + rep);
        let hits: Vec<u8> = (0..n).map(|_| u8::from(rng.gen::<f64>() < tau)).collect();
        let h = HitSeries { hits, tau };
        let (_, p) = kupiec_uc(&h).unwrap();
        if p < 0.05 {
            rejections += 1;
        }
    }
    let rate = f64::from(rejections) / 200.0;
    assert!(
        (0.02..=0.08).contains(&rate),
        "empirical size {rate} outside the Monte-Carlo band"
    );
}
