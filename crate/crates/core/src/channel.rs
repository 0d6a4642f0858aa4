//! Rayleigh channels, the interference covariance and the MMSE output SIR.

use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// `N` i.i.d. CN(0, 1) channel coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelVector(pub DVector<Complex64>);

impl ChannelVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.norm_squared()
    }
}

fn cn01<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn sample_channel<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ChannelVector {
    ChannelVector(DVector::from_fn(n, |_, _| cn01(rng)))
}

/// An active interferer as seen from the representative base station.
#[derive(Debug, Clone)]
pub struct Interferer {
    pub power: f64,
    pub distance: f64,
    pub channel: ChannelVector,
}

/// Hermitian `N x N` interference covariance `sum_j P_j r_j^-alpha g_j g_j^H`.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceCovariance {
    pub matrix: DMatrix<Complex64>,
    pub actives: usize,
}

impl InterferenceCovariance {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.diagonal().iter().map(|z| z.re).sum()
    }
}

/// Weight `P r^-alpha` of one interferer.
pub fn received_weight(power: f64, distance: f64, alpha: f64) -> Result<f64> {
    if distance <= 0.0 {
        return Err(Error::ZeroDistance);
    }
    Ok(power * distance.powf(-alpha))
}

/// Covariance from scaled channel columns `a_j = sqrt(w_j) g_j`: `R = A A^H`,
/// exactly Hermitian. With `A = X + iY` and `B = [X; Y]`, the blocks of the
/// real product `B B^T` give `Re R = XX^T + YY^T` and `Im R = YX^T - XY^T`.
pub fn covariance_from_columns(scaled: &DMatrix<Complex64>) -> InterferenceCovariance {
    let (n, m) = scaled.shape();
    let stacked = DMatrix::<f64>::from_fn(2 * n, m, |i, j| {
        let z = scaled[(i % n, j)];
        if i < n {
            z.re
        } else {
            z.im
        }
    });
    let gram = &stacked * stacked.transpose();
    let mut r = DMatrix::<Complex64>::zeros(n, n);
    for i in 0..n {
        r[(i, i)] = Complex64::new(gram[(i, i)] + gram[(n + i, n + i)], 0.0);
        for j in 0..i {
            let re = gram[(i, j)] + gram[(n + i, n + j)];
            let im = gram[(n + i, j)] - gram[(i, n + j)];
            r[(i, j)] = Complex64::new(re, im);
            r[(j, i)] = Complex64::new(re, -im);
        }
    }
    InterferenceCovariance { matrix: r, actives: m }
}

pub fn build_covariance(actives: &[Interferer], alpha: f64, n_antennas: usize) -> Result<InterferenceCovariance> {
    let mut scaled = DMatrix::<Complex64>::zeros(n_antennas, actives.len());
    for (j, it) in actives.iter().enumerate() {
        if it.channel.len() != n_antennas {
            return Err(Error::invalid(
                "channel",
                format!("length {} != N = {n_antennas}", it.channel.len()),
            ));
        }
        let w = received_weight(it.power, it.distance, alpha)?.sqrt();
        scaled.set_column(j, &(&it.channel.0 * Complex64::new(w, 0.0)));
    }
    Ok(covariance_from_columns(&scaled))
}

/// SIR at the MMSE receiver output and its normalised form
/// `beta_N = N^(-alpha/2) g0^H R^-1 g0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SirOutput {
    pub sir: f64,
    pub beta_n: f64,
    pub quadratic_form: f64,
}

// Pivots below this fraction of the largest diagonal entry mean R is
// numerically rank deficient.
const PIVOT_FLOOR: f64 = 1e-14;

/// `SIR = P0 r0^-alpha g0^H R^-1 g0` through a Cholesky solve. A singular
/// covariance is an error, never regularised.
pub fn mmse_sir(g0: &ChannelVector, cov: &InterferenceCovariance, p0: f64, r0: f64, alpha: f64) -> Result<SirOutput> {
    let n = cov.dim();
    let singular = || Error::SingularCovariance {
        actives: cov.actives,
        antennas: n,
    };
    let max_diag = cov.matrix.diagonal().iter().map(|z| z.re).fold(0.0, f64::max);
    if !(max_diag > 0.0) {
        return Err(singular());
    }
    let chol = Cholesky::new(cov.matrix.clone()).ok_or_else(singular)?;
    let l = chol.l();
    if l.diagonal().iter().any(|z| z.re * z.re <= PIVOT_FLOOR * max_diag) {
        return Err(singular());
    }
    let y = l.solve_lower_triangular(&g0.0).ok_or_else(singular)?;
    let quadratic_form = y.norm_squared();
    let sir = received_weight(p0, r0, alpha)? * quadratic_form;
    Ok(SirOutput {
        sir,
        beta_n: (n as f64).powf(-alpha / 2.0) * quadratic_form,
        quadratic_form,
    })
}

pub fn spectral_efficiency(sir: f64) -> f64 {
    (1.0 + sir).log2()
}

/// Smallest eigenvalue of `N^(alpha/2 - 1) R`, i.e. of `(1/N) S Psi S^H` with
/// `Psi = diag(N^(alpha/2) P_j r_j^-alpha)`.
pub fn min_eigenvalue_diagnostic(cov: &InterferenceCovariance, alpha: f64) -> f64 {
    let n = cov.dim() as f64;
    let eig = cov.matrix.clone().symmetric_eigenvalues();
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    n.powf(alpha / 2.0 - 1.0) * min
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn interferers(m: usize, n: usize, rng: &mut ChaCha8Rng) -> Vec<Interferer> {
        (0..m)
            .map(|_| Interferer {
                power: 0.5 + rng.random::<f64>(),
                distance: 1.0 + 10.0 * rng.random::<f64>(),
                channel: sample_channel(n, rng),
            })
            .collect()
    }

    #[test]
    fn unit_modulus_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let draws = 1_000_000;
        let mut sum = 0.0;
        let mut sum_re2 = 0.0;
        for _ in 0..draws {
            let g = sample_channel(1, &mut rng);
            sum += g.norm_sq();
            sum_re2 += g.0[0].re * g.0[0].re;
        }
        // |g|^2 ~ Exp(1): mean 1, sd 1.
        let mean = sum / draws as f64;
        assert!((mean - 1.0).abs() < 3.0 / (draws as f64).sqrt());
        assert!((sum_re2 / draws as f64 - 0.5).abs() < 3e-3);
        assert_eq!(sample_channel(64, &mut rng).len(), 64);
    }

    #[test]
    fn empirical_covariance_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 8;
        let draws = 100_000;
        let mut acc = DMatrix::<Complex64>::zeros(n, n);
        for _ in 0..draws {
            let g = sample_channel(n, &mut rng).0;
            acc += &g * g.adjoint();
        }
        acc /= Complex64::new(draws as f64, 0.0);
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((acc[(i, j)] - Complex64::new(target, 0.0)).norm() < 0.02);
            }
        }
    }

    #[test]
    fn covariance_single_and_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = sample_channel(4, &mut rng);
        let cov = build_covariance(
            &[Interferer {
                power: 1.0,
                distance: 1.0,
                channel: g.clone(),
            }],
            4.0,
            4,
        )
        .unwrap();
        let outer = &g.0 * g.0.adjoint();
        assert!((&cov.matrix - outer).norm() < 1e-14);
        let empty = build_covariance(&[], 4.0, 4).unwrap();
        assert_eq!(empty.matrix, DMatrix::zeros(4, 4));
        assert!(matches!(
            mmse_sir(&g, &empty, 1.0, 1.0, 4.0),
            Err(Error::SingularCovariance { .. })
        ));
    }

    #[test]
    fn real_gram_matches_complex_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let a = DMatrix::from_fn(6, 23, |_, _| cn01(&mut rng));
        let cov = covariance_from_columns(&a);
        let direct = &a * a.adjoint();
        assert!((&cov.matrix - &direct).norm() < 1e-12 * direct.norm());
        assert_eq!(cov.matrix, cov.matrix.adjoint());
    }

    #[test]
    fn zero_distance_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let it = Interferer {
            power: 1.0,
            distance: 0.0,
            channel: sample_channel(2, &mut rng),
        };
        assert!(matches!(build_covariance(&[it], 4.0, 2), Err(Error::ZeroDistance)));
    }

    #[test]
    fn trace_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let its = interferers(200, 16, &mut rng);
        let cov = build_covariance(&its, 3.5, 16).unwrap();
        let direct: f64 = its
            .iter()
            .map(|i| i.power * i.distance.powf(-3.5) * i.channel.norm_sq())
            .sum();
        assert!((cov.trace() - direct).abs() < 1e-12 * direct);
        for i in 0..16 {
            for j in 0..16 {
                assert_eq!(cov.matrix[(i, j)], cov.matrix[(j, i)].conj());
            }
        }
    }

    #[test]
    fn identity_covariance_gives_matched_filter_sir() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let g = sample_channel(6, &mut rng);
        let cov = InterferenceCovariance {
            matrix: DMatrix::identity(6, 6),
            actives: 6,
        };
        let out = mmse_sir(&g, &cov, 2.0, 1.5, 4.0).unwrap();
        let expect = 2.0 * 1.5f64.powf(-4.0) * g.norm_sq();
        assert!((out.sir - expect).abs() < 1e-12 * expect);
        assert!((out.beta_n - 6f64.powf(-2.0) * g.norm_sq()).abs() < 1e-12);
    }

    #[test]
    fn scaling_interference_scales_sir() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut its = interferers(30, 8, &mut rng);
        let g0 = sample_channel(8, &mut rng);
        let base = mmse_sir(&g0, &build_covariance(&its, 4.0, 8).unwrap(), 1.0, 2.0, 4.0).unwrap();
        for it in &mut its {
            it.power *= 4.0;
        }
        let scaled = mmse_sir(&g0, &build_covariance(&its, 4.0, 8).unwrap(), 1.0, 2.0, 4.0).unwrap();
        assert!((scaled.sir * 4.0 - base.sir).abs() < 1e-12 * base.sir);
    }

    #[test]
    fn spectral_efficiency_values() {
        assert_eq!(spectral_efficiency(0.0), 0.0);
        assert_eq!(spectral_efficiency(1.0), 1.0);
        assert!((spectral_efficiency(168.2) - 169.2f64.log2()).abs() < 1e-15);
        assert!((spectral_efficiency(168.2) - 7.403).abs() < 1e-3);
    }

    #[test]
    fn eigenvalue_diagnostic_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let one = interferers(1, 4, &mut rng);
        let cov = build_covariance(&one, 4.0, 4).unwrap();
        assert!(min_eigenvalue_diagnostic(&cov, 4.0).abs() < 1e-12);
        let zero = InterferenceCovariance {
            matrix: DMatrix::zeros(3, 3),
            actives: 0,
        };
        assert_eq!(min_eigenvalue_diagnostic(&zero, 4.0), 0.0);
    }

    #[test]
    fn eigenvalue_near_marchenko_pastur_edge() {
        // Unit weights, m = 400 columns, N = 40: the smallest eigenvalue of
        // sum g g^H sits near the Marchenko-Pastur edge m (1 - sqrt(N / m))^2.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (n, m) = (40, 400);
        let its: Vec<Interferer> = (0..m)
            .map(|_| Interferer {
                power: 1.0,
                distance: 1.0,
                channel: sample_channel(n, &mut rng),
            })
            .collect();
        let cov = build_covariance(&its, 2.0, n).unwrap();
        // alpha = 2 makes the diagnostic exactly the spectrum of R.
        let lam = min_eigenvalue_diagnostic(&cov, 2.0);
        let edge = m as f64 * (1.0 - (n as f64 / m as f64).sqrt()).powi(2);
        assert!(lam > 0.0);
        assert!((lam - edge).abs() < 0.2 * edge, "{lam} vs {edge}");
    }
}
