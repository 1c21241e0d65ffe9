use std::f64::consts::PI;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::oracle::{heat_kernel, KernelParams};

fn torus(n: usize) -> Arc<Grid> {
    Grid::new(n, 2.0 * PI).unwrap()
}

fn model(scenario: Scenario, grid: &Grid) -> Model {
    Model::new(scenario, grid, None, 0.0).unwrap()
}

fn fixed(dt: f64, t_end: f64) -> IntegratorConfig {
    IntegratorConfig {
        dt,
        t_end,
        ..IntegratorConfig::default()
    }
}

fn sup(f: &Field) -> f64 {
    f.lp_norm(Lp::Inf)
}

fn random_hall(grid: &Arc<Grid>, band: usize, amp: f64, seed: u64) -> State {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    State {
        t: 0.0,
        fields: vec![
            Field::random_bandlimited(grid, band, amp, &mut rng).unwrap(),
            Field::random_bandlimited(grid, band, amp, &mut rng).unwrap(),
        ],
    }
}

#[test]
fn single_mode_decays_exactly() {
    let g = torus(32);
    let m = model(Scenario::HeatValidation, &g);
    let mut s = State {
        t: 0.0,
        fields: vec![
            Field::from_fn(&g, |x, y| (2.0 * x).sin() * y.cos()),
            Field::from_fn(&g, |_, y| (3.0 * y).cos()),
        ],
    };
    let mut st = Stepper::new(m, Scheme::IfRk4);
    let steps = 10;
    for _ in 0..steps {
        st.step(&mut s, 0.01).unwrap();
    }
    let t = s.t;
    let want0 = Field::from_fn(&g, |x, y| (-5.0 * t).exp() * (2.0 * x).sin() * y.cos());
    let want1 = Field::from_fn(&g, |_, y| (-9.0 * t).exp() * (3.0 * y).cos());
    assert!(sup(&(&s.fields[0] - &want0)) <= 1e-13 * steps as f64);
    assert!(sup(&(&s.fields[1] - &want1)) <= 1e-13 * steps as f64);
}

#[test]
fn heat_run_matches_kernel_oracle() {
    let g = Grid::new(128, 32.0 * PI).unwrap();
    let t0 = 1.0;
    let k = |t| heat_kernel(&g, &KernelParams::centered(&g, t, 1.0)).unwrap();
    let mut s = State {
        t: 0.0,
        fields: vec![k(t0), k(t0).scaled(-0.5)],
    };
    let mut st = Stepper::new(model(Scenario::HeatValidation, &g), Scheme::IfRk4);
    st.advance_to(&mut s, 1.0, &fixed(1e-3, 1.0)).unwrap();
    assert_eq!(s.t, 1.0);
    let want = k(t0 + 1.0);
    assert!(sup(&(&s.fields[0] - &want)) < 1e-8);
    assert!(sup(&(&s.fields[1] - &want.scaled(-0.5))) < 1e-8);
}

fn hall_solution(dt: f64) -> State {
    let g = torus(32);
    let mut s = random_hall(&g, 4, 0.1, 17);
    let mut st = Stepper::new(model(Scenario::Hall, &g), Scheme::IfRk4);
    st.advance_to(&mut s, 0.2, &fixed(dt, 0.2)).unwrap();
    s
}

fn distance(a: &State, b: &State) -> f64 {
    a.fields
        .iter()
        .zip(&b.fields)
        .map(|(x, y)| sup(&(x - y)))
        .fold(0.0, f64::max)
}

#[test]
fn rk4_self_convergence_is_fourth_order() {
    let s1 = hall_solution(0.02);
    let s2 = hall_solution(0.01);
    let s3 = hall_solution(0.005);
    let ratio = distance(&s1, &s2) / distance(&s2, &s3);
    assert!((12.8..=19.2).contains(&ratio), "ratio {ratio}");
}

#[test]
fn euler_self_convergence_is_first_order() {
    let run = |dt: f64| {
        let g = torus(32);
        let mut s = random_hall(&g, 4, 0.1, 17);
        let mut st = Stepper::new(model(Scenario::Hall, &g), Scheme::IfEuler);
        st.advance_to(&mut s, 0.2, &fixed(dt, 0.2)).unwrap();
        s
    };
    let (a, b, c) = (run(0.004), run(0.002), run(0.001));
    let ratio = distance(&a, &b) / distance(&b, &c);
    assert!((1.6..=2.4).contains(&ratio), "ratio {ratio}");
}

#[test]
fn adapt_dt_examples() {
    let cfg = IntegratorConfig {
        adaptive: true,
        cfl: 0.05,
        ..IntegratorConfig::default()
    };
    let g = torus(64);
    let m = model(Scenario::Hall, &g);
    let zero = State {
        t: 0.0,
        fields: vec![Field::zeros(&g), Field::zeros(&g)],
    };
    // The 1e-12 floor on ‖∇ψ‖∞ leaves a relative offset of k²·1e-12.
    assert!((adapt_dt(&zero, &m, &cfg) - 0.05).abs() < 1e-8 * 0.05);

    let s = random_hall(&g, 6, 1.0, 1);
    let dt1 = adapt_dt(&s, &m, &cfg);
    let doubled = State {
        t: 0.0,
        fields: vec![s.fields[0].scaled(2.0), s.fields[1].clone()],
    };
    let dt2 = adapt_dt(&doubled, &m, &cfg);
    let f = dt1 / dt2;
    assert!((1.7..=2.0).contains(&f), "{f}");

    // Same band-limited fields sampled on a grid twice as fine.
    let g2 = torus(128);
    let resample = |f: &Field| {
        let mut spec = ndarray::Array2::zeros(g2.spectral_shape());
        for ((q, p), c) in f.spec().indexed_iter() {
            let m = g.mode_index(p).rem_euclid(128) as usize;
            spec[[q, m]] = c * 4.0;
        }
        Field::from_spectral(&g2, spec).unwrap()
    };
    let fine = State {
        t: 0.0,
        fields: s.fields.iter().map(resample).collect(),
    };
    let f = dt1 / adapt_dt(&fine, &model(Scenario::Hall, &g2), &cfg);
    assert!((3.5..=4.1).contains(&f), "{f}");
}

#[test]
fn zero_length_run_records_once() {
    let g = torus(16);
    let mut s = random_hall(&g, 2, 0.1, 3);
    let before = s.clone();
    let cfg = fixed(1e-3, 0.0);
    let schedule = Schedule::new(0.1, 0.0).unwrap();
    let mut st = Stepper::new(model(Scenario::Hall, &g), Scheme::IfRk4);
    let mut seen = vec![];
    let end = run(&mut st, &mut s, &cfg, &schedule, 0, true, |s, info| {
        seen.push((s.t, info.index));
        Ok(())
    })
    .unwrap();
    assert_eq!(end, Termination::Completed);
    assert_eq!(seen, vec![(0.0, 0)]);
    assert_eq!(s.fields[0].spec(), before.fields[0].spec());
}

#[test]
fn schedule_hits_cadence_and_end() {
    let s = Schedule::new(0.25, 1.1).unwrap();
    let times: Vec<f64> = (0..s.len()).map(|k| s.time(k)).collect();
    assert_eq!(times, vec![0.0, 0.25, 0.5, 0.75, 1.0, 1.1]);
    let s = Schedule::new(0.1, 0.3).unwrap();
    assert_eq!(s.len(), 4);
    assert_eq!(s.time(3), 0.3);
}

#[test]
fn means_are_conserved() {
    let g = torus(32);
    let mut s = random_hall(&g, 4, 0.1, 5);
    for f in &mut s.fields {
        f.spec_mut()[[0, 0]] = num_complex::Complex64::new(0.3 * 1024.0, 0.0);
    }
    let before: Vec<f64> = s.fields.iter().map(Field::mean).collect();
    let mut st = Stepper::new(model(Scenario::Hall, &g), Scheme::IfRk4);
    st.advance_to(&mut s, 0.5, &fixed(0.01, 0.5)).unwrap();
    for (f, m0) in s.fields.iter().zip(before) {
        assert!((f.mean() - m0).abs() <= 1e-10 * m0.abs() * 0.5);
    }
}

#[test]
fn hall_energy_is_non_increasing() {
    let g = torus(32);
    let mut s = random_hall(&g, 4, 0.2, 6);
    let energy = |s: &State| {
        s.fields[0].sobolev_seminorm(1).unwrap().powi(2) + s.fields[1].l2_spectral().powi(2)
    };
    let mut st = Stepper::new(model(Scenario::Hall, &g), Scheme::IfRk4);
    let schedule = Schedule::new(0.05, 1.0).unwrap();
    let mut prev = f64::INFINITY;
    run(&mut st, &mut s, &fixed(0.005, 1.0), &schedule, 0, true, |s, _| {
        let e = energy(s);
        assert!(e <= prev * (1.0 + 1e-12));
        prev = e;
        Ok(())
    })
    .unwrap();
}

#[test]
fn huge_step_signals_blow_up() {
    let g = torus(32);
    let s0 = random_hall(&g, 8, 50.0, 9);
    let mut s = s0.clone();
    let mut st = Stepper::new(model(Scenario::Hall, &g), Scheme::IfRk4);
    let schedule = Schedule::new(1.0, 10.0).unwrap();
    let mut records = 0;
    let end = run(&mut st, &mut s, &fixed(0.5, 10.0), &schedule, 0, true, |_, _| {
        records += 1;
        Ok(())
    })
    .unwrap();
    match end {
        Termination::BlowUp(b) => {
            assert!(b.norm > BLOWUP_THRESHOLD || !b.norm.is_finite());
            assert!(b.t > 0.0);
        }
        Termination::Completed => panic!("expected blow-up"),
    }
    assert!(records >= 1);
}

#[test]
fn adaptive_run_lands_on_record_times() {
    let g = torus(32);
    let mut s = random_hall(&g, 4, 0.1, 12);
    let cfg = IntegratorConfig {
        adaptive: true,
        t_end: 0.3,
        ..IntegratorConfig::default()
    };
    let schedule = Schedule::new(0.1, 0.3).unwrap();
    let mut st = Stepper::new(model(Scenario::Hall, &g), Scheme::IfRk4);
    let mut times = vec![];
    run(&mut st, &mut s, &cfg, &schedule, 0, true, |s, _| {
        times.push(s.t);
        Ok(())
    })
    .unwrap();
    assert_eq!(times, vec![0.0, 0.1, 0.2, 0.3]);
}

#[test]
fn identical_across_thread_counts() {
    let g = Grid::new(128, 32.0 * PI).unwrap();
    let go = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let mut s = random_hall(&g, 20, 0.01, 77);
            let mut st = Stepper::new(model(Scenario::Hall, &g), Scheme::IfRk4);
            st.advance_to(&mut s, 0.05, &fixed(0.01, 0.05)).unwrap();
            s
        })
    };
    let a = go(1);
    let b = go(4);
    for (x, y) in a.fields.iter().zip(&b.fields) {
        assert_eq!(x.spec(), y.spec());
    }
}
