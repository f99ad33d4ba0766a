//! Brute-force ground truth for small instances.
//!
//! Everything here recomputes pi from full-state energies — deliberately NOT
//! through the O(d) local-field path used by `dynamics` — so the two code
//! paths verify each other.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{self, Kernel, KernelProfile};
use crate::error::{Error, Result};
use crate::model::IsingModel;
use crate::spins::SpinConfig;

pub const MAX_EXACT_N: usize = 20;
pub const MAX_BALANCE_N: usize = 12;

/// Exact stationary distribution over packed-bit state indices
/// (bit i set = spin +1).
#[derive(Clone, Debug)]
pub struct ExactDistribution {
    n: usize,
    probabilities: Vec<f64>,
}

impl ExactDistribution {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn probability(&self, config: &SpinConfig) -> f64 {
        self.probabilities[config.index()]
    }
}

/// Unnormalized log weight: (1/2) x'Ax + h'x, summed over the full model.
fn log_weight(model: &IsingModel, config: &SpinConfig) -> f64 {
    let mut e = 0.0;
    for (i, j, a) in model.couplings() {
        e += a * f64::from(config.spin(i)) * f64::from(config.spin(j));
    }
    for i in 0..model.n() {
        e += model.field(i) * f64::from(config.spin(i));
    }
    e
}

/// pi(x) ∝ exp((1/2) x'Ax + h'x) with log-sum-exp normalization.
pub fn exact_distribution(model: &IsingModel) -> Result<ExactDistribution> {
    let n = model.n();
    if n > MAX_EXACT_N {
        return Err(Error::TooLarge { n, max: MAX_EXACT_N });
    }
    let weights: Vec<f64> = (0..1usize << n)
        .map(|idx| log_weight(model, &SpinConfig::from_index(n, idx)))
        .collect();
    let max = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_z = max
        + weights
            .iter()
            .map(|w| (w - max).exp())
            .sum::<f64>()
            .ln();
    Ok(ExactDistribution {
        n,
        probabilities: weights.iter().map(|w| (w - log_z).exp()).collect(),
    })
}

fn kernel_from_weights(kernel: &Kernel, x_i: i8, w_here: f64, w_flip: f64) -> f64 {
    match *kernel {
        Kernel::Glauber => {
            // pi(x^flip) / (pi(x) + pi(x^flip)) = sigma(w_flip - w_here)
            dynamics::sigmoid(w_flip - w_here)
        }
        Kernel::Metropolis { r_plus, r_minus } => {
            let (r_cur, r_opp) = if x_i > 0 {
                (r_plus, r_minus)
            } else {
                (r_minus, r_plus)
            };
            let rho = (w_flip - w_here).exp();
            r_opp * (r_cur * rho / r_opp).min(1.0)
        }
    }
}

/// Exact flip probability P_i(x, x^flip_i) via full-state stationary weights.
pub fn exact_kernel(
    model: &IsingModel,
    kernel: &Kernel,
    config: &SpinConfig,
    i: usize,
) -> Result<f64> {
    if model.n() > MAX_EXACT_N {
        return Err(Error::TooLarge {
            n: model.n(),
            max: MAX_EXACT_N,
        });
    }
    if i >= model.n() {
        return Err(Error::IndexOutOfRange {
            index: i,
            n: model.n(),
        });
    }
    kernel.validate()?;
    let w_here = log_weight(model, config);
    let w_flip = log_weight(model, &config.flipped(i));
    Ok(kernel_from_weights(kernel, config.spin(i), w_here, w_flip))
}

/// Max over (x, i) of |pi(x) P_i(x,x') - pi(x') P_i(x',x)|.
pub fn check_detailed_balance(model: &IsingModel, kernel: &Kernel) -> Result<f64> {
    let n = model.n();
    if n > MAX_BALANCE_N {
        return Err(Error::TooLarge { n, max: MAX_BALANCE_N });
    }
    let dist = exact_distribution(model)?;
    let mut worst = 0.0f64;
    for idx in 0..1usize << n {
        let x = SpinConfig::from_index(n, idx);
        for i in 0..n {
            let y = x.flipped(i);
            let p_xy = exact_kernel(model, kernel, &x, i)?;
            let p_yx = exact_kernel(model, kernel, &y, i)?;
            let violation = (dist.probability(&x) * p_xy - dist.probability(&y) * p_yx).abs();
            worst = worst.max(violation);
        }
    }
    Ok(worst)
}

/// Exact pi(X_i = x_i, X_j = x_j) ordered (++, +-, -+, --).
pub fn pair_marginal(model: &IsingModel, i: usize, j: usize) -> Result<[f64; 4]> {
    let n = model.n();
    if i >= n || j >= n {
        return Err(Error::IndexOutOfRange { index: i.max(j), n });
    }
    let dist = exact_distribution(model)?;
    let mut out = [0.0f64; 4];
    for (idx, &p) in dist.probabilities().iter().enumerate() {
        let si = idx >> i & 1 == 1;
        let sj = idx >> j & 1 == 1;
        out[usize::from(!si) * 2 + usize::from(!sj)] += p;
    }
    Ok(out)
}

/// Root of g(z) = g(e^alpha z) by bisection. g rises to a single peak and
/// falls, so the root lies strictly left of the peak; the bracket comes from
/// that shape and a bracket failure signals a profile bug.
pub fn z_star_numeric(profile: &KernelProfile, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::Bracket(format!("alpha must be positive, got {alpha}")));
    }
    let peak = match profile.kernel() {
        Kernel::Glauber => 1.0,
        Kernel::Metropolis { r_plus, r_minus } => r_plus / r_minus,
    };
    let h = |z: f64| profile.g(z) - profile.g(alpha.exp() * z);
    let mut lo = peak * 1e-12;
    let mut hi = peak;
    if !(h(lo) < 0.0 && h(hi) > 0.0) {
        return Err(Error::Bracket(format!(
            "h({lo}) = {}, h({hi}) = {}; expected a sign change",
            h(lo),
            h(hi)
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Monte-Carlo probability of the flip-sequence event from a fixed start:
/// each sub-interval ((k-1) eps, k eps] contains exactly one flip of
/// `pattern[k]` and no flip of the other pattern sites. Returns
/// (estimate, standard error).
pub fn mc_event_probability(
    model: &IsingModel,
    kernel: &Kernel,
    start: &SpinConfig,
    pattern: &[usize],
    eps: f64,
    samples: u64,
    seed: u64,
) -> Result<(f64, f64)> {
    if pattern.is_empty() || samples == 0 || !(eps > 0.0) {
        return Err(Error::InvalidConfig(
            "mc_event_probability needs a pattern, samples and positive eps".into(),
        ));
    }
    kernel.validate()?;
    let n = model.n();
    let horizon = pattern.len() as f64 * eps;
    let mut sites: Vec<usize> = pattern.to_vec();
    sites.sort_unstable();
    sites.dedup();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rate = n as f64;
    let mut hits = 0u64;
    let start_spins = start.to_spins();
    let mut spins_buf = start_spins.clone();
    // flips of pattern sites per sub-interval: (sub-interval index, site)
    let mut flips: Vec<(usize, usize)> = Vec::new();
    for _ in 0..samples {
        spins_buf.copy_from_slice(&start_spins);
        flips.clear();
        let mut t = 0.0f64;
        let mut ok = true;
        loop {
            let u: f64 = rng.gen();
            let dt = -(1.0 - u).ln() / rate;
            let next = t + dt;
            if next <= t {
                continue;
            }
            if next > horizon {
                break;
            }
            t = next;
            let i = rng.gen_range(0..n);
            let s = model.local_field_spins(&spins_buf, i);
            let p = crate::dynamics::flip_probability_from_field(kernel, spins_buf[i], s);
            if rng.gen::<f64>() < p {
                spins_buf[i] = -spins_buf[i];
                if sites.binary_search(&i).is_ok() {
                    // sub-interval index with (a, b] convention
                    let k = (t / eps).ceil() as usize - 1;
                    flips.push((k.min(pattern.len() - 1), i));
                    if flips.len() > pattern.len() {
                        ok = false;
                        break;
                    }
                }
            }
        }
        if ok && flips.len() == pattern.len() {
            let matched = flips
                .iter()
                .enumerate()
                .all(|(k, &(interval, site))| interval == k && site == pattern[k]);
            if matched {
                hits += 1;
            }
        }
    }
    let p = hits as f64 / samples as f64;
    let se = (p * (1.0 - p) / samples as f64).sqrt();
    Ok((p, se))
}

/// Product of the exact transition probabilities along the flip path of a
/// pattern: the comparison target eps^m * prod P for `mc_event_probability`.
pub fn path_product(
    model: &IsingModel,
    kernel: &Kernel,
    start: &SpinConfig,
    pattern: &[usize],
) -> Result<f64> {
    let mut config = start.clone();
    let mut prod = 1.0;
    for &i in pattern {
        prod *= exact_kernel(model, kernel, &config, i)?;
        config.flip(i);
    }
    Ok(prod)
}

/// Spectral gap of the restricted generator on a component of <= 3 sites:
/// second-smallest eigenvalue of -L, where L(x, x^flip_i) = P_i(x, x^flip_i)
/// under unit-rate clocks. Detailed balance lets us symmetrize with
/// D^{1/2} (-L) D^{-1/2} and use a symmetric eigensolver.
pub fn spectral_gap_numeric(
    model: &IsingModel,
    component: &[usize],
    kernel: &Kernel,
) -> Result<f64> {
    let k = component.len();
    if k == 0 || k > 3 {
        return Err(Error::TooLarge { n: k, max: 3 });
    }
    // restrict the model to the component
    let index_of = |site: usize| component.iter().position(|&c| c == site);
    let couplings: Vec<(usize, usize, f64)> = model
        .couplings()
        .filter_map(|(i, j, a)| match (index_of(i), index_of(j)) {
            (Some(a_idx), Some(b_idx)) => Some((a_idx, b_idx, a)),
            _ => None,
        })
        .collect();
    let fields: Vec<f64> = component.iter().map(|&i| model.field(i)).collect();
    let sub = IsingModel::new(k, couplings, fields)?;
    let dist = exact_distribution(&sub)?;
    let m = 1usize << k;
    let mut neg_l = DMatrix::<f64>::zeros(m, m);
    for idx in 0..m {
        let x = SpinConfig::from_index(k, idx);
        let mut diag = 0.0;
        for i in 0..k {
            let p = exact_kernel(&sub, kernel, &x, i)?;
            let jdx = idx ^ (1 << i);
            neg_l[(idx, jdx)] = -p;
            diag += p;
        }
        neg_l[(idx, idx)] = diag;
    }
    let pi = dist.probabilities();
    let mut sym = DMatrix::<f64>::zeros(m, m);
    for r in 0..m {
        for c in 0..m {
            sym[(r, c)] = (pi[r] / pi[c]).sqrt() * neg_l[(r, c)];
        }
    }
    // enforce exact symmetry against rounding
    let sym = (&sym + sym.transpose()) * 0.5;
    let mut eigenvalues: Vec<f64> = sym.symmetric_eigen().eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(f64::total_cmp);
    Ok(eigenvalues[1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelBounds;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exact_distribution_examples() {
        let uniform = exact_distribution(&IsingModel::zero(2)).unwrap();
        for &p in uniform.probabilities() {
            assert_abs_diff_eq!(p, 0.25, epsilon = 1e-14);
        }

        let biased =
            exact_distribution(&IsingModel::new(1, [], vec![0.4]).unwrap()).unwrap();
        // pi(+1) = sigma(0.8)
        assert_abs_diff_eq!(
            biased.probability(&SpinConfig::all_plus(1)),
            0.6899744811276125,
            epsilon = 1e-14
        );

        let edge =
            exact_distribution(&IsingModel::new(2, [(0, 1, 0.5)], vec![0.0; 2]).unwrap()).unwrap();
        assert_abs_diff_eq!(
            edge.probability(&SpinConfig::all_plus(2)),
            0.36552928931500245,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(edge.probabilities().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn exact_kernel_zero_model() {
        let zero = IsingModel::zero(3);
        let x = SpinConfig::from_index(3, 5);
        assert_abs_diff_eq!(
            exact_kernel(&zero, &Kernel::Glauber, &x, 1).unwrap(),
            0.5,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            exact_kernel(
                &zero,
                &Kernel::Metropolis {
                    r_plus: 1.0,
                    r_minus: 1.0
                },
                &x,
                2
            )
            .unwrap(),
            1.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn detailed_balance_holds_and_corruption_is_caught() {
        let m = IsingModel::new(3, [(0, 1, 0.7), (1, 2, -0.4)], vec![0.2, 0.0, -0.1]).unwrap();
        assert!(check_detailed_balance(&m, &Kernel::Glauber).unwrap() <= 1e-12);
        assert!(check_detailed_balance(
            &m,
            &Kernel::Metropolis {
                r_plus: 0.9,
                r_minus: 0.3
            }
        )
        .unwrap()
            <= 1e-12);

        // regression anchor: squaring the flip probability breaks balance
        let dist = exact_distribution(&m).unwrap();
        let mut worst = 0.0f64;
        for idx in 0..8usize {
            let x = SpinConfig::from_index(3, idx);
            for i in 0..3 {
                let y = x.flipped(i);
                let p_xy = exact_kernel(&m, &Kernel::Glauber, &x, i).unwrap().powi(2);
                let p_yx = exact_kernel(&m, &Kernel::Glauber, &y, i).unwrap().powi(2);
                worst =
                    worst.max((dist.probability(&x) * p_xy - dist.probability(&y) * p_yx).abs());
            }
        }
        assert!(worst > 1e-3, "corrupted kernel violation was only {worst}");
    }

    #[test]
    fn pair_marginal_examples() {
        let zero = pair_marginal(&IsingModel::zero(3), 0, 2).unwrap();
        for v in zero {
            assert_abs_diff_eq!(v, 0.25, epsilon = 1e-14);
        }

        let edge = IsingModel::new(2, [(0, 1, 0.5)], vec![0.0; 2]).unwrap();
        let p = pair_marginal(&edge, 0, 1).unwrap();
        assert_abs_diff_eq!(p[0], 0.36552928931500245, epsilon = 1e-12);
        assert_abs_diff_eq!(p[1], 0.13447071068499755, epsilon = 1e-12);
        assert_abs_diff_eq!(p[2], p[1], epsilon = 1e-14);
        assert_abs_diff_eq!(p[3], p[0], epsilon = 1e-14);
        assert_abs_diff_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-12);

        // conditional difference anchoring tau_match
        let diff = p[0] / (p[0] + p[2]) - p[1] / (p[1] + p[3]);
        assert_abs_diff_eq!(diff, 0.46211715726000974, epsilon = 1e-12);
    }

    #[test]
    fn z_star_matches_closed_forms() {
        let bounds = ModelBounds {
            d: 1,
            lambda: 1.0,
            alpha: 0.5,
        };
        let gl = dynamics::kernel_profile(&Kernel::Glauber, &bounds);
        assert_abs_diff_eq!(z_star_numeric(&gl, 1.0).unwrap(), 0.6065306597126334, epsilon = 1e-10);
        assert_abs_diff_eq!(
            z_star_numeric(&gl, 2.0 * 2.0f64.ln()).unwrap(),
            0.5,
            epsilon = 1e-10
        );

        let me = dynamics::kernel_profile(
            &Kernel::Metropolis {
                r_plus: 1.0,
                r_minus: 0.5,
            },
            &bounds,
        );
        assert_abs_diff_eq!(
            z_star_numeric(&me, 1.0).unwrap(),
            1.2130613194252668,
            epsilon = 1e-10
        );
    }

    #[test]
    fn single_site_pattern_probability() {
        // pattern "i" on the zero model: one attempt (prob eps e^{-eps})
        // times flip prob 1/2, plus O(eps^2)
        let zero = IsingModel::zero(1);
        let eps = 0.05;
        let (p, se) = mc_event_probability(
            &zero,
            &Kernel::Glauber,
            &SpinConfig::all_plus(1),
            &[0],
            eps,
            200_000,
            17,
        )
        .unwrap();
        let expected = eps * (-eps as f64).exp() * 0.5;
        assert!(
            (p - expected).abs() <= 3.0 * se + 1e-4,
            "p = {p}, expected ~{expected}, se = {se}"
        );
    }

    #[test]
    fn spectral_gap_examples() {
        // single free site: flip rate 1/2 each way, gap 1
        let gap = spectral_gap_numeric(&IsingModel::zero(1), &[0], &Kernel::Glauber).unwrap();
        assert_abs_diff_eq!(gap, 1.0, epsilon = 1e-10);

        // two independent biased sites: gap of the product chain is the min
        let m = IsingModel::new(2, [], vec![0.6, 0.1]).unwrap();
        let g0 = spectral_gap_numeric(&m, &[0], &Kernel::Glauber).unwrap();
        let g1 = spectral_gap_numeric(&m, &[1], &Kernel::Glauber).unwrap();
        let g01 = spectral_gap_numeric(&m, &[0, 1], &Kernel::Glauber).unwrap();
        assert_abs_diff_eq!(g01, g0.min(g1), epsilon = 1e-9);
    }
}
