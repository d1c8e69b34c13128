use cvqkd::gaussian::Quadrature;
use cvqkd::keyrate::{evaluate, secret_key_rate};
use cvqkd::protocol::{
    build_network_covariance, collapse_channel, fiber_transmittance, network_covariance_closed_form,
    network_covariance_from_totals, point_to_point_params, SplitterModel,
};
use cvqkd::{ChannelTotals, ProtocolParams};
use proptest::prelude::*;

fn params_strategy() -> impl Strategy<Value = ProtocolParams> {
    (
        1.1f64..20.0,
        0.5f64..=1.0,
        0.05f64..=1.0,
        0.5f64..=1.0,
        0.0f64..50.0,
        1u32..=64,
        0.0f64..0.3,
    )
        .prop_map(|(v, beta, eta_d, eta_e, d, n, eps)| ProtocolParams {
            v,
            beta,
            eta_d,
            eta_e,
            distance_km: d,
            n_onus: n,
            epsilon_segments: vec![eps],
            ..ProtocolParams::default()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn constructive_and_closed_form_agree(
        v in 1.0f64..100.0,
        eta_d in 0.0f64..=1.0,
        t in 1e-6f64..=1.0,
        eps in 0.0f64..0.5,
    ) {
        let totals = ChannelTotals::new(t, eps).unwrap();
        let built = network_covariance_from_totals(v, eta_d, &totals).unwrap();
        let closed = network_covariance_closed_form(v, eta_d, &totals).unwrap();
        prop_assert_eq!(built.labels(), closed.labels());
        prop_assert!(built.matrix().max_abs_diff(closed.matrix()) <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn network_state_is_physical(p in params_strategy()) {
        let g = build_network_covariance(&p).unwrap();
        let nus = g.symplectic_eigenvalues().unwrap();
        prop_assert!(nus.iter().all(|&nu| nu >= 1.0 - 1e-9), "{:?}", nus);
        let r = secret_key_rate(&p).unwrap();
        prop_assert!(r.holevo_bits >= 0.0 && r.holevo_bits.is_finite());
        prop_assert!(r.mutual_information_bits >= 0.0);
    }

    #[test]
    fn downstream_never_beats_point_to_point(p in params_strategy()) {
        let down = secret_key_rate(&p).unwrap();
        let ptp = secret_key_rate(&point_to_point_params(&p)).unwrap();
        prop_assert!(down.key_rate_clamped <= ptp.key_rate_clamped + 1e-12);
        // Below zero the raw rate rises back toward 0 as loss grows, so the
        // raw comparison is only meaningful where a key exists.
        if ptp.key_rate_bits >= 0.0 {
            prop_assert!(down.key_rate_bits <= ptp.key_rate_bits + 1e-12);
        }
    }

    #[test]
    fn closed_form_key_rate_matches(p in params_strategy()) {
        let totals = collapse_channel(&p).unwrap();
        let closed = network_covariance_closed_form(p.v, p.eta_d, &totals).unwrap();
        let k_closed = evaluate(&closed, p.beta, totals, Quadrature::X).unwrap().key_rate_bits;
        let k = secret_key_rate(&p).unwrap().key_rate_bits;
        prop_assert!((k - k_closed).abs() <= 1e-10);
    }

    #[test]
    fn fiber_loss_is_multiplicative(alpha in 0.0f64..1.0, d1 in 0.0f64..50.0, d2 in 0.0f64..50.0) {
        let split = fiber_transmittance(alpha, d1) * fiber_transmittance(alpha, d2);
        let whole = fiber_transmittance(alpha, d1 + d2);
        prop_assert!((split - whole).abs() <= 1e-12 * whole.max(1e-300));
    }

    #[test]
    fn segment_split_only_matters_through_its_sum(p in params_strategy(), w in 0.0f64..=1.0) {
        let eps = p.epsilon_total();
        let split = ProtocolParams { epsilon_segments: vec![w * eps, 0.0, (1.0 - w) * eps], ..p.clone() };
        let a = collapse_channel(&p).unwrap();
        let b = collapse_channel(&split).unwrap();
        prop_assert!((a.t_tot - b.t_tot).abs() == 0.0);
        prop_assert!((a.epsilon_tot - b.epsilon_tot).abs() <= 1e-15);
    }
}

#[test]
fn transmittance_decreases_with_distance_and_onus() {
    let p = ProtocolParams::default();
    let mut last = f64::INFINITY;
    for d in 0..=50 {
        let t = collapse_channel(&p.clone().with_distance(f64::from(d))).unwrap();
        assert!(t.t_tot < last);
        assert_eq!(t.epsilon_tot, p.epsilon_total());
        last = t.t_tot;
    }
    let mut last = f64::INFINITY;
    for n in 1..=64 {
        let t = collapse_channel(&p.clone().with_onus(n)).unwrap();
        assert!(t.t_tot < last);
        last = t.t_tot;
    }
}

/// Raw key rate over the default operating grid, where it stays positive.
#[test]
fn raw_key_rate_monotone_on_default_grid() {
    let base = ProtocolParams::default();
    let k = |d: f64, n: u32, eps: f64| {
        secret_key_rate(&base.clone().with_distance(d).with_onus(n).with_epsilon_total(eps))
            .unwrap()
            .key_rate_bits
    };
    let ds: Vec<f64> = (0..=30).map(f64::from).collect();
    let ns: Vec<u32> = (2..=64).collect();
    for &d in &ds {
        let row: Vec<f64> = ns.iter().map(|&n| k(d, n, 0.05)).collect();
        assert!(row.windows(2).all(|w| w[1] <= w[0]), "n axis at d={d}");
    }
    for &n in &ns {
        let col: Vec<f64> = ds.iter().map(|&d| k(d, n, 0.05)).collect();
        assert!(col.windows(2).all(|w| w[1] <= w[0]), "d axis at n={n}");
        let e: Vec<f64> = (0..=10).map(|i| k(30.0, n, 0.005 * f64::from(i))).collect();
        assert!(e.windows(2).all(|w| w[1] <= w[0]), "eps axis at n={n}");
    }
}

/// Clamped key rate on a wider grid that reaches the no-key regime.
#[test]
fn clamped_key_rate_monotone_on_wide_grid() {
    let base = ProtocolParams::default();
    let k = |d: f64, n: u32, eps: f64| {
        secret_key_rate(&base.clone().with_distance(d).with_onus(n).with_epsilon_total(eps))
            .unwrap()
            .key_rate_clamped
    };
    let ds: Vec<f64> = (0..=10).map(|i| 5.0 * f64::from(i)).collect();
    let ns = [1u32, 2, 3, 4, 8, 16, 32, 64];
    let epss = [0.0, 0.02, 0.05, 0.1, 0.2, 0.3];
    for &eps in &epss {
        for &d in &ds {
            let row: Vec<f64> = ns.iter().map(|&n| k(d, n, eps)).collect();
            assert!(
                row.windows(2).all(|w| w[1] <= w[0]),
                "n axis at d={d} eps={eps}: {row:?}"
            );
        }
        for &n in &ns {
            let col: Vec<f64> = ds.iter().map(|&d| k(d, n, eps)).collect();
            assert!(
                col.windows(2).all(|w| w[1] <= w[0]),
                "d axis at n={n} eps={eps}: {col:?}"
            );
        }
    }
    for &d in &ds {
        for &n in &ns {
            let e: Vec<f64> = epss.iter().map(|&eps| k(d, n, eps)).collect();
            assert!(e.windows(2).all(|w| w[1] <= w[0]), "eps axis at d={d} n={n}: {e:?}");
        }
    }
}

/// In the no-key regime the raw rate tends to 0 from below as loss grows.
#[test]
fn raw_key_rate_recovers_toward_zero_without_key() {
    let p = ProtocolParams::default().with_epsilon_total(0.3).with_distance(0.0);
    let near = secret_key_rate(&p.clone().with_onus(32)).unwrap().key_rate_bits;
    let far = secret_key_rate(&p.with_onus(64)).unwrap().key_rate_bits;
    assert!(near < 0.0 && far < 0.0);
    assert!(far > near);
}

#[test]
fn explicit_splitter_matches_ideal_at_one_over_n() {
    let ideal = ProtocolParams::default().with_onus(8);
    let explicit = ProtocolParams {
        splitter_model: SplitterModel::Explicit(1.0 / 8.0),
        ..ideal.clone()
    };
    let a = secret_key_rate(&ideal).unwrap().key_rate_bits;
    let b = secret_key_rate(&explicit).unwrap().key_rate_bits;
    assert!((a - b).abs() < 1e-15);
}
