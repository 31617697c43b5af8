use num_complex::Complex64;
use proptest::prelude::*;

use qgauss::gamma::GammaSpec;
use qgauss::matrix::{assemble_s, sample_standard_hermitian, EmbeddingMap, HermitianMatrix, ModelConfig, Sampler};
use qgauss::partition::{crossing_number, PairPartition};
use qgauss::pauli::{factors_anticommute, sample_factor};
use qgauss::rng::RngStream;
use qgauss::spectral::{dense_product, nu_q_density, support_radius, trace_word, SpectrumHistogram};
use qgauss::stats::mean_and_stderr;
use qgauss::subset::Subset;
use qgauss::weights::{c_from_q, q_from_c};
use qgauss::WeightScheme;

fn pair_partition() -> impl Strategy<Value = PairPartition> {
    (1usize..=6).prop_flat_map(|m| {
        Just((1..=2 * m).collect::<Vec<_>>()).prop_shuffle().prop_map(|points| {
            PairPartition::new(points.chunks(2).map(|p| (p[0], p[1]))).unwrap()
        })
    })
}

fn naive_trace(family: &[HermitianMatrix], word: &[usize]) -> Complex64 {
    let dim = family[0].dim();
    let mut acc = family[word[0]].to_faer();
    for &mu in &word[1..] {
        acc = dense_product(acc.as_ref(), family[mu].as_faer());
    }
    (0..dim).map(|i| acc[(i, i)]).sum::<Complex64>() / dim as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn crossing_number_is_bounded(pi in pair_partition()) {
        let m = pi.m() as u32;
        prop_assert!(crossing_number(&pi).0 <= m * (m - 1) / 2);
    }

    #[test]
    fn q_and_c_round_trip(q in 0.01f64..0.99, d in 2usize..5) {
        let c = c_from_q(q, d).unwrap();
        prop_assert!(c >= 0.0);
        prop_assert!((q_from_c(c, d).unwrap() - q).abs() < 1e-12);
    }

    #[test]
    fn brownian_covariance_is_psd(steps in prop::collection::vec(0.01f64..2.0, 1..6)) {
        let times: Vec<f64> = steps.iter().scan(0.0, |t, s| { *t += s; Some(*t) }).collect();
        let gamma = GammaSpec::brownian_min(&times).unwrap();
        for mu in 0..gamma.len() {
            for nu in 0..gamma.len() {
                prop_assert_eq!(gamma.get(mu, nu), gamma.get(nu, mu));
            }
        }
        prop_assert!(gamma.min_eigenvalue().unwrap() >= -1e-9);
    }

    #[test]
    fn embedding_map_round_trips(mask in 0u64..16, index in 0usize..16) {
        let a = Subset::from_mask(4, mask).unwrap();
        let map = EmbeddingMap::new(&a, 2, 4).unwrap();
        let digits = map.digits(index);
        prop_assert_eq!(digits.len(), 4);
        prop_assert_eq!(map.index(&digits), index);
        prop_assert!(map.small_index(index) < map.small_dim());
    }

    #[test]
    fn assembled_matrices_are_hermitian(seed in any::<u64>(), n in 1usize..5, basis in any::<bool>()) {
        let scheme = WeightScheme::bernoulli(n, 2, 0.5).unwrap();
        let sampler = if basis { Sampler::ProductBasis } else { Sampler::Subsets };
        let config = ModelConfig::new(scheme, GammaSpec::identity(2), seed).unwrap().with_sampler(sampler);
        for s in assemble_s(&config, 0).unwrap().matrices {
            prop_assert!(s.hermitian_deviation() <= 1e-12);
            for i in 0..s.dim() {
                prop_assert_eq!(s.get(i, i).im, 0.0);
            }
        }
    }

    #[test]
    fn trace_word_matches_naive_products(seed in any::<u64>(), word in prop::collection::vec(0usize..3, 1..7)) {
        let mut stream = RngStream::new(seed, &[]);
        let family: Vec<HermitianMatrix> = (0..3).map(|_| sample_standard_hermitian(6, &mut stream)).collect();
        let fast = trace_word(&family, &word).unwrap();
        let slow = naive_trace(&family, &word);
        prop_assert!((fast - slow).norm() <= 1e-10 * (1.0 + slow.norm()));
    }

    #[test]
    fn histogram_counts_every_eigenvalue(values in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 4), 1..8)) {
        let mut h = SpectrumHistogram::new(-2.0, 2.0, 7).unwrap();
        for v in &values {
            h.add_sample(v);
        }
        prop_assert_eq!(h.counts.iter().sum::<u64>() + h.out_of_range, (values.len() * 4) as u64);
        prop_assert!(h.edges.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn stderr_is_sd_over_root_n(xs in prop::collection::vec(-10.0f64..10.0, 2..40)) {
        let (mean, se) = mean_and_stderr(&xs);
        let n = xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        prop_assert!(se >= 0.0);
        prop_assert!((se - (var / n).sqrt()).abs() <= 1e-12 * (1.0 + se));
    }

    #[test]
    fn density_is_nonnegative(q in 0.05f64..0.95, t in -1.0f64..1.0) {
        let x = t * support_radius(q).unwrap();
        prop_assert!(nu_q_density(q, x, 1e-12).unwrap() >= 0.0);
    }

    #[test]
    fn pauli_factor_table_is_valid(r in 0.0f64..(1.0 / 3.0), seed in any::<u64>()) {
        let mut stream = RngStream::new(seed, &[]);
        for _ in 0..32 {
            let (a, sign) = sample_factor(r, &mut stream);
            prop_assert!(a < 4);
            prop_assert!(sign == 1 || sign == -1);
        }
        for a in 0..4u8 {
            for b in 0..4u8 {
                prop_assert_eq!(factors_anticommute(a, b), factors_anticommute(b, a));
            }
        }
    }
}
