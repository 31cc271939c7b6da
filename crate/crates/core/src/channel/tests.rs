use std::f64::consts::PI;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use super::*;
use crate::analytic::{CylinderEnvironment, Truncation};
use crate::eigenmodes::Wall;

const UM: f64 = 1e-6;
const N: f64 = 5e4;

fn series(wall: Wall, kd: f64) -> CgfSeries {
    let env = CylinderEnvironment::new(5.0 * UM, 1e-9, kd, 65e-6, wall).unwrap();
    CgfSeries::new(env, CylPoint::new(3.0 * UM, 0.0, 0.0), 0.0, Truncation::default()).unwrap()
}

fn channel(wall: Wall, kd: f64, radius: f64, mode: ObservationMode) -> Channel {
    let rx = ReceiverModel::new(CylPoint::new(2.0 * UM, 5.0 * UM, PI / 2.0), radius, mode);
    Channel::new(Field::Bounded(series(wall, kd)), rx).unwrap()
}

fn table1(mode: ObservationMode) -> Channel {
    channel(Wall::REFLECTIVE, 0.0, 0.5 * UM, mode)
}

#[test]
fn exact_over_point_ratio_tends_to_one() {
    // the deviation is the curvature term, O(R^2)
    for &t in &[0.005, 0.02, 0.1] {
        let deviation = |r: f64| {
            let exact = channel(Wall::REFLECTIVE, 0.0, r, ObservationMode::Exact);
            let approx = channel(Wall::REFLECTIVE, 0.0, r, ObservationMode::PointApproximation);
            (exact.p_obs(t).unwrap() / approx.p_obs(t).unwrap() - 1.0).abs()
        };
        let d = [deviation(0.04 * UM), deviation(0.02 * UM), deviation(0.01 * UM)];
        assert!(d[2] < 1e-5, "{d:?}");
        assert!(d[1] < 0.3 * d[0] && d[2] < 0.3 * d[1], "{d:?}");
    }
}

#[test]
fn table1_receiver_exact_close_to_point_near_peak() {
    let approx = table1(ObservationMode::PointApproximation);
    let exact = table1(ObservationMode::Exact);
    let (t_s, _) = approx.sampling_time(0.1, 1e-3).unwrap();
    for &t in &[0.8 * t_s, t_s, 1.2 * t_s] {
        let a = approx.p_obs(t).unwrap();
        let e = exact.p_obs(t).unwrap();
        assert!((e - a).abs() / e < 0.02, "t {t}: {e} vs {a}");
    }
}

#[test]
fn point_mode_is_volume_times_concentration() {
    let ch = table1(ObservationMode::PointApproximation);
    let s = series(Wall::REFLECTIVE, 0.0);
    let t = 0.013;
    let c = s.cgf(&CylPoint::new(2.0 * UM, 5.0 * UM, PI / 2.0), t);
    let expected = 4.0 / 3.0 * PI * (0.5 * UM).powi(3) * c;
    assert!((ch.p_obs(t).unwrap() - expected).abs() <= 1e-13 * expected);
}

#[test]
fn observation_probability_is_a_probability() {
    for wall in [Wall::REFLECTIVE, Wall::Partial(100e-6), Wall::Absorbing] {
        for kd in [0.0, 20.0] {
            let ch = channel(wall, kd, 0.5 * UM, ObservationMode::PointApproximation);
            let pdf = ch.observation_pdf(2.0, 1e-3).unwrap();
            assert!(pdf.values.iter().all(|&p| (0.0..=1.0).contains(&p)));
            assert_eq!(pdf.values[0], 0.0);
        }
    }
    // a receiver filling most of a thin cylinder right on the source
    let env = CylinderEnvironment::new(1.0 * UM, 1e-9, 0.0, 0.0, Wall::REFLECTIVE).unwrap();
    let s = CgfSeries::adaptive(env, CylPoint::new(0.0, 0.0, 0.0), 0.0, 1e-4, 1e-9).unwrap();
    let rx = ReceiverModel::new(CylPoint::new(0.0, 0.0, 0.0), 1.0 * UM, ObservationMode::Exact);
    let ch = Channel::new(Field::Bounded(s), rx).unwrap();
    for &t in &[1e-4, 1e-3, 1e-2] {
        let p = ch.p_obs(t).unwrap();
        assert!(p > 0.0 && p <= 1.0, "{p}");
    }
}

#[test]
fn unbounded_field_uses_free_space_kernel() {
    let field = Field::Unbounded(FreeSpace {
        source: CylPoint::new(3.0 * UM, 0.0, 0.0),
        diffusion: 1e-9,
        degradation: 20.0,
        velocity: 65e-6,
    });
    let rx = ReceiverModel::new(CylPoint::new(2.0 * UM, 5.0 * UM, PI / 2.0), 0.5 * UM, ObservationMode::PointApproximation);
    let ch = Channel::new(field, rx).unwrap();
    let t = 0.01;
    let direct = unbounded_cgf(&rx.center, t, &CylPoint::new(3.0 * UM, 0.0, 0.0), 0.0, 1e-9, 20.0, 65e-6);
    assert!((ch.p_obs(t).unwrap() - rx.volume() * direct).abs() <= 1e-14 * rx.volume() * direct);
}

#[test]
fn receiver_must_fit_inside() {
    let rx = ReceiverModel::new(CylPoint::new(4.8 * UM, 0.0, 0.0), 0.5 * UM, ObservationMode::Exact);
    assert!(Channel::new(Field::Bounded(series(Wall::REFLECTIVE, 0.0)), rx).is_err());
    let rx = ReceiverModel::new(CylPoint::new(2.0 * UM, 0.0, 0.0), 0.0, ObservationMode::Exact);
    assert!(Channel::new(Field::Bounded(series(Wall::REFLECTIVE, 0.0)), rx).is_err());
}

#[test]
fn sampling_time_maximises_and_is_grid_stable() {
    let ch = table1(ObservationMode::PointApproximation);
    let coarse = ch.observation_pdf(0.2, 2e-3).unwrap();
    let fine = ch.observation_pdf(0.2, 1e-3).unwrap();
    assert!((coarse.t_s - fine.t_s).abs() < coarse.step);
    assert!(coarse.values.iter().all(|&p| p <= coarse.peak));
    for &dt in &[-2e-4, 2e-4] {
        assert!(ch.p_obs(fine.t_s + dt).unwrap() <= fine.peak);
    }
}

#[test]
fn mean_received_basic_signals() {
    let ch = table1(ObservationMode::PointApproximation);
    for &t in &[0.0, 0.01, 0.1] {
        assert_eq!(ch.mean_received(&ReleaseSignal::Silent, t).unwrap(), 0.0);
        let impulse = ch.mean_received(&ReleaseSignal::Impulse(N), t).unwrap();
        assert_eq!(impulse, N * ch.p_obs(t).unwrap());
        let zero_rate = ReleaseSignal::Rate { duration: 0.01, rate: Arc::new(|_| 0.0) };
        assert_eq!(ch.mean_received(&zero_rate, t).unwrap(), 0.0);
    }
}

#[test]
fn rectangular_release_matches_refined_riemann_sum() {
    let ch = table1(ObservationMode::PointApproximation);
    let (rate, duration, t) = (5e6, 0.01, 0.02);
    let signal = ReleaseSignal::Rate { duration, rate: Arc::new(move |_| rate) };
    let got = ch.mean_received(&signal, t).unwrap();
    // midpoint Riemann sums at h and h/2, Richardson-free check at the finer one
    let riemann = |h: f64| {
        let n = (duration / h).round() as usize;
        (0..n).map(|j| rate * ch.p_obs(t - (j as f64 + 0.5) * h).unwrap() * h).sum::<f64>()
    };
    let coarse = riemann(2e-5);
    let fine = riemann(1e-5);
    assert!((fine - coarse).abs() / fine < 1e-4);
    assert!((got - fine).abs() / fine < 1e-4, "{got} vs {fine}");
}

#[test]
fn mean_received_is_additive() {
    let ch = table1(ObservationMode::PointApproximation);
    let a = ReleaseSignal::Rate { duration: 0.01, rate: Arc::new(|u| 1e6 * (1.0 + 100.0 * u)) };
    let b = ReleaseSignal::Rate { duration: 0.01, rate: Arc::new(|u| 3e5 * (300.0 * u).sin().abs()) };
    let sum = ReleaseSignal::Rate {
        duration: 0.01,
        rate: Arc::new(|u| 1e6 * (1.0 + 100.0 * u) + 3e5 * (300.0 * u).sin().abs()),
    };
    let t = 0.03;
    let parts = ch.mean_received(&a, t).unwrap() + ch.mean_received(&b, t).unwrap();
    let whole = ch.mean_received(&sum, t).unwrap();
    assert!((parts - whole).abs() / whole < 1e-7);
}

#[test]
fn isi_means_for_impulsive_history() {
    let ch = table1(ObservationMode::PointApproximation);
    let slot = 0.05;
    let (t_s, _) = ch.sampling_time(0.1, 1e-3).unwrap();
    let silent = vec![ReleaseSignal::Silent; 6];
    assert!(ch.isi_means(&silent, slot, t_s).unwrap().iter().all(|&i| i == 0.0));
    let bits = [true, false, true, true, false, true];
    let history: Vec<ReleaseSignal> = bits
        .iter()
        .map(|&b| if b { ReleaseSignal::Impulse(N) } else { ReleaseSignal::Silent })
        .collect();
    let means = ch.isi_means(&history, slot, t_s).unwrap();
    let profile = IsiProfile::with_memory(&ch, slot, t_s, 6).unwrap();
    for (i, (&m, &b)) in means.iter().zip(&bits).enumerate() {
        let expected = if b { N * ch.p_obs((i + 1) as f64 * slot + t_s).unwrap() } else { 0.0 };
        assert_eq!(m, expected);
        assert_eq!(profile.isi_means(N, &bits)[i], expected);
    }
}

#[test]
fn total_isi_matches_poisson_sampling() {
    let ch = table1(ObservationMode::PointApproximation);
    let (t_s, _) = ch.sampling_time(0.1, 1e-3).unwrap();
    let profile = IsiProfile::with_memory(&ch, 0.03, t_s, 8).unwrap();
    let bits = [true, true, false, true, false, false, true, true];
    let means = profile.isi_means(N, &bits);
    let total: f64 = means.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let draws = 100_000;
    let dists: Vec<_> = means.iter().filter(|&&m| m > 0.0).map(|&m| Poisson::new(m).unwrap()).collect();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..draws {
        let y: f64 = dists.iter().map(|d| d.sample(&mut rng)).sum();
        sum += y;
        sum_sq += y * y;
    }
    let mean = sum / draws as f64;
    let var = sum_sq / draws as f64 - mean * mean;
    assert!((mean - total).abs() < 3.0 * (total / draws as f64).sqrt(), "{mean} vs {total}");
    assert!((0.9..=1.1).contains(&(var / mean)), "dispersion {}", var / mean);
}

#[test]
fn received_counts_are_equidispersed() {
    let ch = table1(ObservationMode::PointApproximation);
    let (_, peak) = ch.sampling_time(0.1, 1e-3).unwrap();
    let d = Poisson::new(N * peak).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let ys: Vec<f64> = (0..100_000).map(|_| d.sample(&mut rng)).collect();
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (ys.len() - 1) as f64;
    assert!((0.9..=1.1).contains(&(var / mean)));
}

#[test]
fn degradation_shortens_memory() {
    let slot = 0.05;
    let slow = channel(Wall::REFLECTIVE, 0.0, 0.5 * UM, ObservationMode::PointApproximation);
    let fast = channel(Wall::REFLECTIVE, 20.0, 0.5 * UM, ObservationMode::PointApproximation);
    let (ts_slow, _) = slow.sampling_time(0.1, 1e-3).unwrap();
    let (ts_fast, _) = fast.sampling_time(0.1, 1e-3).unwrap();
    let m_slow = slow.choose_memory(N, slot, ts_slow, DEFAULT_MEMORY_CUTOFF, DEFAULT_MEMORY_CAP).unwrap();
    let m_fast = fast.choose_memory(N, slot, ts_fast, DEFAULT_MEMORY_CUTOFF, DEFAULT_MEMORY_CAP).unwrap();
    assert!(m_fast < m_slow, "{m_fast} vs {m_slow}");
}

#[test]
fn memory_rule_boundaries() {
    let ch = channel(Wall::Absorbing, 20.0, 0.5 * UM, ObservationMode::PointApproximation);
    let (t_s, _) = ch.sampling_time(0.1, 1e-3).unwrap();
    let slot = 0.02;
    let first = N * ch.p_obs(slot + t_s).unwrap();
    assert_eq!(ch.choose_memory(N, slot, t_s, 2.0 * first, 100).unwrap(), 1);
    let m = ch.choose_memory(N, slot, t_s, 1e-3, 100).unwrap();
    assert!(N * ch.p_obs(m as f64 * slot + t_s).unwrap() < 1e-3);
    assert!(N * ch.p_obs((m - 1) as f64 * slot + t_s).unwrap() >= 1e-3);
    assert!(matches!(ch.choose_memory(N, slot, t_s, 1e-300, 3), Err(Error::MemoryCap { cap: 3 })));
    assert!(ch.choose_memory(N, slot, t_s, 0.0, 3).unwrap_err().is_validation());
}

#[test]
fn doubling_slot_never_increases_memory() {
    for (wall, kd) in [(Wall::REFLECTIVE, 20.0), (Wall::Absorbing, 0.0), (Wall::Partial(100e-6), 20.0)] {
        let ch = channel(wall, kd, 0.5 * UM, ObservationMode::PointApproximation);
        let (t_s, _) = ch.sampling_time(0.1, 1e-3).unwrap();
        let mut previous = usize::MAX;
        for k in 0..6 {
            let slot = 0.005 * 2f64.powi(k);
            let m = ch.choose_memory(N, slot, t_s, DEFAULT_MEMORY_CUTOFF, DEFAULT_MEMORY_CAP).unwrap();
            assert!(m <= previous);
            previous = m;
        }
    }
}
