use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hypothesis::build_test_direction;
use crate::image::ImageVector;
use crate::network::{forward, forward_values, NetworkSpec};

pub const DEFAULT_PERMUTATIONS: usize = 1000;

fn statistic(eta: &[f64], x: &[f64]) -> f64 {
    eta.iter().zip(x).map(|(e, v)| e * v).sum()
}

/// Fraction of pixel permutations whose re-segmented statistic is at least as
/// extreme as the observed one.
///
/// Returns `Ok(None)` when the observed image has no detection. Permutations
/// without a detection count as at least as extreme. Permutation `b` draws from
/// stream `b` of a ChaCha generator seeded with `seed`.
pub fn permutation_test(
    net: &NetworkSpec,
    x_obs: &ImageVector,
    permutations: usize,
    seed: u64,
) -> Result<Option<f64>> {
    if permutations == 0 {
        return Err(Error::Argument("permutation count must be at least 1".into()));
    }
    let mask = forward(net, x_obs)?;
    let Some(eta) = build_test_direction(&mask) else {
        return Ok(None);
    };
    let t_obs = statistic(&eta, x_obs.values()).abs();
    let hits = (0..permutations)
        .into_par_iter()
        .map(|b| -> Result<usize> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let mut x = x_obs.values().to_vec();
            x.shuffle(&mut rng);
            let mask = forward_values(net, &x)?;
            Ok(match build_test_direction(&mask) {
                Some(eta) => (t_obs <= statistic(&eta, &x).abs()) as usize,
                None => 1,
            })
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum::<usize>();
    Ok(Some(hits as f64 / permutations as f64))
}
