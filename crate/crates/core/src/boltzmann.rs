//! Log-domain Boltzmann weights over small cost tables.

use rand::Rng;

/// `ln(f64::MAX)`: the largest exponent whose plain `exp` is representable.
pub const LN_F64_MAX: f64 = 709.782_712_893_384;

/// Minimum of a cost table.
#[inline]
pub fn min_cost(costs: &[f64]) -> f64 {
    costs.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Spread `max - min` of a cost table.
pub fn spread(costs: &[f64]) -> f64 {
    let (lo, hi) = costs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &c| (lo.min(c), hi.max(c)));
    hi - lo
}

/// `ln sum_k exp(x_k)` with max-shift.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

/// Normalised weights `exp(-beta c_k) / Z` written into `out`.
pub fn weights_into(costs: &[f64], beta: f64, out: &mut Vec<f64>) {
    out.clear();
    let m = min_cost(costs);
    let mut z = 0.0;
    for &c in costs {
        let w = (-beta * (c - m)).exp();
        z += w;
        out.push(w);
    }
    for w in out.iter_mut() {
        *w /= z;
    }
}

/// Draw an index with probability proportional to `exp(-beta c_k)`.
pub fn sample_index<R: Rng + ?Sized>(costs: &[f64], beta: f64, rng: &mut R, scratch: &mut Vec<f64>) -> usize {
    scratch.clear();
    let m = min_cost(costs);
    let mut z = 0.0;
    for &c in costs {
        z += (-beta * (c - m)).exp();
        scratch.push(z);
    }
    let u = rng.gen::<f64>() * z;
    // first cumulative weight strictly above u; the minimum-cost entry has
    // weight 1, so z >= 1 and the search always lands in range
    scratch.partition_point(|&acc| acc <= u).min(costs.len() - 1)
}

/// Two-state heat-bath draw: returns 1 with probability
/// `exp(-beta c1) / (exp(-beta c0) + exp(-beta c1))`.
#[inline]
pub fn sample_bit<R: Rng + ?Sized>(c0: f64, c1: f64, beta: f64, rng: &mut R) -> u8 {
    let p1 = logistic(-beta * (c1 - c0));
    u8::from(rng.gen::<f64>() < p1)
}

/// `1 / (1 + exp(-x))` without overflow.
#[inline]
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn weights_survive_huge_costs() {
        let mut w = Vec::new();
        weights_into(&[0.0, 1e6, -1e6], 1.0, &mut w);
        assert_eq!(w, vec![0.0, 0.0, 1.0]);
        weights_into(&[3.0, 3.0], 1.0, &mut w);
        assert_eq!(w, vec![0.5, 0.5]);
    }

    #[test]
    fn zero_beta_is_uniform() {
        let mut w = Vec::new();
        weights_into(&[1.0, 50.0, 400.0, -7.0], 0.0, &mut w);
        assert!(w.iter().all(|&x| (x - 0.25).abs() < 1e-15));
    }

    #[test]
    fn log_sum_exp_matches_direct() {
        let xs = [0.1, -2.0, 3.5];
        let direct = xs.iter().map(|x: &f64| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(&xs) - direct).abs() < 1e-14);
        assert!((log_sum_exp(&[1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn sampling_frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let costs = [0.0, 2f64.ln(), 1e9];
        let mut counts = [0usize; 3];
        let mut scratch = Vec::new();
        for _ in 0..30_000 {
            counts[sample_index(&costs, 1.0, &mut rng, &mut scratch)] += 1;
        }
        assert_eq!(counts[2], 0);
        let ratio = counts[0] as f64 / counts[1] as f64;
        assert!((ratio - 2.0).abs() < 0.1, "{ratio}");
    }

    #[test]
    fn logistic_is_stable() {
        assert_eq!(logistic(-1e4), 0.0);
        assert_eq!(logistic(1e4), 1.0);
        assert!((logistic(0.0) - 0.5).abs() < 1e-16);
    }
}
