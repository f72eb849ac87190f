//! Shared scenario fixtures for the benchmarks.

use autodissect::phantom::generate_phantom;
use autodissect::{NoiseProfile, PhantomConfig, PhantomState, TissueClass, Vec3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Default phantom and its gallbladder mask.
pub fn default_scene() -> (PhantomState, autodissect::BinaryMask) {
    let ph = generate_phantom(PhantomConfig::default()).expect("default config is valid");
    let gb = ph.labels.class_mask(TissueClass::Gallbladder);
    (ph, gb)
}

/// Five noisy snapshots of a gently curved 40 mm boundary.
pub fn boundary_samples(noise: &NoiseProfile) -> Vec<Vec<Vec3>> {
    let mut rng = ChaCha8Rng::seed_from_u64(noise.rng_seed);
    let offset = Normal::new(0.0, 0.25 * noise.boundary_jitter_px).expect("finite jitter");
    (0..5)
        .map(|_| {
            (0..200)
                .map(|i| {
                    let t = i as f64 * 0.2;
                    Vec3::new(t, 2.0 * (t / 8.0).sin() + offset.sample(&mut rng), 100.0)
                })
                .collect()
        })
        .collect()
}
