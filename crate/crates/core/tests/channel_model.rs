use irsbeam::channel_model::{
    composite_channel, effective_gram, generate_channels, grid_angle, nearest_grid_index, AmplitudeMode,
    ChannelModelParams, ChannelSet, FadingModel, PathGains, PhaseMode, PhaseProfile, SystemConfig,
};
use irsbeam::linalg::{hermitian_eigen, max_asymmetry, CVec, C64};
use proptest::prelude::*;
use std::f64::consts::TAU;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn cn(rng: &mut ChaCha8Rng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

#[test]
fn rayleigh_transcript_seed_7() {
    let config = SystemConfig::unicast(2, vec![2], 1);
    let model = ChannelModelParams::rayleigh(PathGains::uniform(&config, 1.0, 1.0, 1.0));
    let ch = generate_channels(&config, &model, 7).unwrap();

    // Documented order: BS→surface row-major, surface→MU, BS→MU.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut expect = Vec::new();
    for _ in 0..(2 * 2 + 2 + 2) {
        expect.push(cn(&mut rng));
    }
    let got = [
        ch.bs_to_irs[0][(0, 0)],
        ch.bs_to_irs[0][(0, 1)],
        ch.bs_to_irs[0][(1, 0)],
        ch.bs_to_irs[0][(1, 1)],
        ch.irs_to_mu[0][0][0][0],
        ch.irs_to_mu[0][0][0][1],
        ch.bs_to_mu[0][0][0],
        ch.bs_to_mu[0][0][1],
    ];
    for (g, e) in got.iter().zip(&expect) {
        assert_eq!(g, e);
    }
}

#[test]
fn zero_gains_and_repeatability() {
    let config = SystemConfig::unicast(3, vec![2, 1], 2);
    let zero = ChannelModelParams::rayleigh(PathGains::uniform(&config, 0.0, 0.0, 0.0));
    assert_eq!(generate_channels(&config, &zero, 1).unwrap(), ChannelSet::zeros(&config));

    let model = ChannelModelParams {
        fading: FadingModel::Rician { k_factor: 2.0 },
        gains: PathGains::uniform(&config, 1.0, 0.5, 0.1),
    };
    let a = generate_channels(&config, &model, 99).unwrap();
    let b = generate_channels(&config, &model, 99).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, generate_channels(&config, &model, 100).unwrap());
}

#[test]
fn scalar_composite() {
    let config = SystemConfig::unicast(1, vec![1], 1);
    let mut ch = ChannelSet::zeros(&config);
    ch.bs_to_mu[0][0][0] = C64::new(1.0, 0.0);
    ch.irs_to_mu[0][0][0][0] = C64::new(2.0, 0.0);
    ch.bs_to_irs[0][(0, 0)] = C64::new(3.0, 0.0);
    let h = composite_channel(&ch, &PhaseProfile::unit(&[1]), 0, 0).unwrap();
    assert_eq!(h[0], C64::new(7.0, 0.0));

    let mut off = PhaseProfile::unit(&[1]);
    off.amplitude_mode = AmplitudeMode::FixedValues;
    off.amplitudes = vec![vec![0.0]];
    assert_eq!(composite_channel(&ch, &off, 0, 0).unwrap()[0], C64::new(1.0, 0.0));
}

#[test]
fn index_errors() {
    let config = SystemConfig::unicast(2, vec![2], 2);
    let ch = ChannelSet::zeros(&config);
    let p = PhaseProfile::unit(&[2]);
    assert!(composite_channel(&ch, &p, 2, 0).is_err());
    assert!(composite_channel(&ch, &p, 0, 1).is_err());
    assert!(effective_gram(&ch, &p, 5).is_err());
}

#[test]
fn grid_projection_examples() {
    use std::f64::consts::PI;
    assert_eq!(nearest_grid_index(0.4 * PI, 2), 0);
    assert_eq!(nearest_grid_index(PI / 4.0, 4), 0);
    assert_eq!(nearest_grid_index(2.0 * PI - 0.01, 4), 0);
    assert_eq!(grid_angle(3, 4), 1.5 * PI);
}

fn arb_instance() -> impl Strategy<Value = (SystemConfig, u64, Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    (1usize..4, prop::collection::vec(1usize..4, 1..4), 1usize..3, 1usize..3, any::<u64>()).prop_flat_map(
        |(m, sizes, k, q, seed)| {
            let amps = sizes.iter().map(|&n| prop::collection::vec(0.0f64..=1.0, n)).collect::<Vec<_>>();
            let phases = sizes.iter().map(|&n| prop::collection::vec(0.0f64..TAU, n)).collect::<Vec<_>>();
            let mut config = SystemConfig::unicast(m, sizes, k);
            config.mu_antennas = vec![q; k];
            (Just(config), Just(seed), amps, phases)
        },
    )
}

fn profile(amps: Vec<Vec<f64>>, phases: Vec<Vec<f64>>) -> PhaseProfile {
    PhaseProfile {
        amplitudes: amps,
        phases,
        amplitude_mode: AmplitudeMode::FixedValues,
        phase_mode: PhaseMode::Continuous,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn composite_matches_direct_sum((config, seed, amps, phases) in arb_instance()) {
        let model = ChannelModelParams::rayleigh(PathGains::uniform(&config, 1.0, 1.0, 1.0));
        let ch = generate_channels(&config, &model, seed).unwrap();
        let p = profile(amps.clone(), phases.clone());
        for i in 0..config.num_mus() {
            for q in 0..config.mu_antennas[i] {
                let h = composite_channel(&ch, &p, i, q).unwrap();
                for m in 0..config.num_bs_antennas {
                    let mut v = ch.bs_to_mu[i][q][m];
                    for (l, n_l) in config.irs_sizes.iter().enumerate() {
                        for n in 0..*n_l {
                            let c = C64::from_polar(amps[l][n], phases[l][n]);
                            v += ch.irs_to_mu[l][i][q][n] * c * ch.bs_to_irs[l][(n, m)];
                        }
                    }
                    prop_assert!((h[m] - v).norm() <= 1e-12 * (1.0 + v.norm()));
                }
            }
        }
    }

    #[test]
    fn gram_is_hermitian_psd_and_sums_antennas((config, seed, amps, phases) in arb_instance(), wseed in any::<u64>()) {
        let model = ChannelModelParams::rayleigh(PathGains::uniform(&config, 1.0, 1.0, 1.0));
        let ch = generate_channels(&config, &model, seed).unwrap();
        let p = profile(amps, phases);
        let mut rng = ChaCha8Rng::seed_from_u64(wseed);
        for i in 0..config.num_mus() {
            let g = effective_gram(&ch, &p, i).unwrap();
            let scale = g.norm().max(1e-300);
            prop_assert!(max_asymmetry(&g) <= 1e-12 * scale);
            let eig = hermitian_eigen(&g);
            prop_assert!(*eig.values.last().unwrap() >= -1e-10 * scale);
            let w = CVec::from_fn(config.num_bs_antennas, |_, _| cn(&mut rng));
            let quad = w.dotc(&(&g * &w)).re;
            let direct: f64 = (0..config.mu_antennas[i])
                .map(|q| composite_channel(&ch, &p, i, q).unwrap().dot(&w).norm_sqr())
                .sum();
            prop_assert!((quad - direct).abs() <= 1e-12 * direct.max(1.0));
        }
    }

    #[test]
    fn fixed_values_of_one_match_fixed_unit(seed in any::<u64>(), thetas in prop::collection::vec(0.0f64..TAU, 3)) {
        let config = SystemConfig::unicast(2, vec![3], 2);
        let model = ChannelModelParams::rayleigh(PathGains::uniform(&config, 1.0, 1.0, 1.0));
        let ch = generate_channels(&config, &model, seed).unwrap();
        let mut unit = PhaseProfile::unit(&[3]);
        unit.phases = vec![thetas.clone()];
        let mut vals = unit.clone();
        vals.amplitude_mode = AmplitudeMode::FixedValues;
        prop_assert_eq!(effective_gram(&ch, &unit, 1).unwrap(), effective_gram(&ch, &vals, 1).unwrap());
    }

    #[test]
    fn affine_in_each_coefficient(seed in any::<u64>(), theta in 0.0f64..TAU) {
        let config = SystemConfig::unicast(2, vec![1], 1);
        let model = ChannelModelParams::rayleigh(PathGains::uniform(&config, 1.0, 1.0, 1.0));
        let ch = generate_channels(&config, &model, seed).unwrap();
        let mut a = PhaseProfile::unit(&[1]);
        a.phases = vec![vec![theta]];
        let mut b = a.clone();
        b.phases = vec![vec![irsbeam::channel_model::wrap_angle(theta + std::f64::consts::PI)]];
        let mut off = a.clone();
        off.amplitude_mode = AmplitudeMode::FixedValues;
        off.amplitudes = vec![vec![0.0]];
        let ha = composite_channel(&ch, &a, 0, 0).unwrap();
        let hb = composite_channel(&ch, &b, 0, 0).unwrap();
        let h0 = composite_channel(&ch, &off, 0, 0).unwrap();
        prop_assert!(((ha + hb) * C64::new(0.5, 0.0) - &h0).norm() <= 1e-12 * (1.0 + h0.norm()));
    }

    #[test]
    fn channel_json_round_trips(seed in any::<u64>()) {
        let mut config = SystemConfig::unicast(2, vec![2, 1], 2);
        config.mu_antennas = vec![1, 2];
        let model = ChannelModelParams::rayleigh(PathGains::uniform(&config, 1.0, 1.0, 1.0));
        let ch = generate_channels(&config, &model, seed).unwrap();
        let text = serde_json::to_string(&ch).unwrap();
        let back: ChannelSet = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, ch);
    }
}
