use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use spinread::constants::{DEFAULT_OMEGA, ELECTRON_MASS, ELEMENTARY_CHARGE, MICRON};
use spinread::trap_model::*;

/// Grounded-plane Green's function integrated over the electrode by
/// composite Simpson in both directions.
fn basis_by_quadrature(r: &Rect, p: [f64; 3], n: usize) -> f64 {
    let [x, y, z] = p;
    let (hx, hy) = ((r.x[1] - r.x[0]) / n as f64, (r.y[1] - r.y[0]) / n as f64);
    let w = |i: usize| match i {
        0 => 1.0,
        i if i == n => 1.0,
        i if i % 2 == 1 => 4.0,
        _ => 2.0,
    };
    let mut s = 0.0;
    for i in 0..=n {
        let dx = r.x[0] + hx * i as f64 - x;
        for j in 0..=n {
            let dy = r.y[0] + hy * j as f64 - y;
            let d2 = dx * dx + dy * dy + z * z;
            s += w(i) * w(j) / (d2 * d2.sqrt());
        }
    }
    s * hx * hy / 9.0 * z / (2.0 * std::f64::consts::PI)
}

#[test]
fn basis_matches_surface_integral() {
    let r = Rect::new(-15e-6, 15e-6, -50e-6, 50e-6);
    for p in [[0.0, 0.0, 33e-6], [12e-6, -40e-6, 20e-6], [80e-6, 10e-6, 33e-6]] {
        let exact = electrode_basis_potential(&r, p).unwrap();
        let oracle = basis_by_quadrature(&r, p, 600);
        assert!((exact / oracle - 1.0).abs() < 1e-6, "{exact} vs {oracle}");
    }
}

#[test]
fn tiled_plane_at_one_volt_is_unity() {
    let edges = [-1e5, -20e-6, 5e-6, 1e5];
    let mut total = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let r = Rect::new(edges[i], edges[i + 1], edges[j], edges[j + 1]);
            total += electrode_basis_potential(&r, [3e-6, -7e-6, 40e-6]).unwrap();
        }
    }
    assert!((total - 1.0).abs() < 1e-9);
}

fn toy_layout() -> ElectrodeLayout {
    ElectrodeLayout {
        electrodes: vec![
            Electrode {
                name: "A".into(),
                rect: Rect::new(-50e-6, 50e-6, -200e-6, -20e-6),
            },
            Electrode {
                name: "B".into(),
                rect: Rect::new(-50e-6, 50e-6, 20e-6, 200e-6),
            },
        ],
        groups: None,
        trap_height: 33e-6,
        dac_bits: 16,
        dac_range: 10.0,
        quantize: false,
    }
}

#[test]
fn toy_layout_matches_normal_equations() {
    let layout = toy_layout();
    let omega = 2.0 * std::f64::consts::PI * 50e6;
    let range = (-30e-6, 30e-6);
    let sol = optimize_voltages(&layout, omega, range).unwrap();

    let ys: Vec<f64> = (0..201).map(|i| range.0 + (range.1 - range.0) * i as f64 / 200.0).collect();
    let a = DMatrix::from_fn(ys.len(), 3, |i, j| {
        if j < 2 {
            electrode_basis_potential(&layout.electrodes[j].rect, [0.0, ys[i], 33e-6]).unwrap()
        } else {
            1.0
        }
    });
    let k = -0.5 * ELECTRON_MASS * omega * omega / ELEMENTARY_CHARGE;
    let b = DVector::from_iterator(ys.len(), ys.iter().map(|y| k * y * y));
    let x = (a.transpose() * &a).lu().solve(&(a.transpose() * b)).unwrap();
    for i in 0..2 {
        assert!((sol.voltages[i] / x[i] - 1.0).abs() < 1e-9, "{} vs {}", sol.voltages[i], x[i]);
    }
}

#[test]
fn default_layout_coefficients() {
    let sol = optimize_voltages(&ElectrodeLayout::standard(), DEFAULT_OMEGA, (-10e-6, 10e-6)).unwrap();
    let n = sol.resulting_potential.normalized();
    assert!((n.c2 - 1.0).abs() < 1e-9);
    assert!(n.c4 > 1e-8 && n.c4 < 1e-6, "c4 = {}", n.c4);
    assert!(n.c6 < 0.0 && n.c6.abs() > 2e-10 && n.c6.abs() < 2e-8, "c6 = {}", n.c6);
    assert!(sol.resulting_potential.consistency_error() < 1e-6);
    assert!((sol.resulting_potential.omega / DEFAULT_OMEGA - 1.0).abs() < 1e-3);
    assert!(!sol.resulting_potential.odd_terms_significant());
}

#[test]
fn zero_target_gives_zero_voltages() {
    let sol = optimize_voltages(&ElectrodeLayout::standard(), 0.0, (-10e-6, 10e-6)).unwrap();
    assert!(sol.voltages.iter().all(|v| *v == 0.0));
    assert_eq!(sol.residual, 0.0);
}

#[test]
fn unreachable_target_names_the_electrode() {
    let r = optimize_voltages(&ElectrodeLayout::standard(), 10.0 * DEFAULT_OMEGA, (-10e-6, 10e-6));
    match r {
        Err(TrapError::Infeasible { electrode, voltage, limit }) => {
            assert!(electrode.starts_with("DC"));
            assert!(voltage.abs() > limit);
        }
        other => panic!("expected infeasibility, got {other:?}"),
    }
}

#[test]
fn shift_closed_form_point_value() {
    let pot = TrapPotential::from_normalized(DEFAULT_OMEGA, 1e-7, -2e-9);
    let a: f64 = 2.0;
    let expected = 0.75 * a * a * 1e-7 + 15.0 / 16.0 * a.powi(4) * -2e-9;
    let got = frequency_shift(&pot, 2.0 * MICRON, ShiftMethod::ClosedForm);
    assert!((got / expected - 1.0).abs() < 1e-9, "{got}");
    assert!((got - 2.7e-7).abs() < 1e-12);
    assert_eq!(frequency_shift(&pot, 0.0, ShiftMethod::ClosedForm), 0.0);
    assert_eq!(frequency_shift(&pot, 0.0, ShiftMethod::NumericPeriod), 0.0);
}

#[test]
fn shift_curve_turns_over() {
    let pot = TrapPotential::from_normalized(DEFAULT_OMEGA, 1e-7, -2e-9);
    let curve: Vec<f64> = (1..=100)
        .map(|k| frequency_shift(&pot, 0.1 * k as f64 * MICRON, ShiftMethod::NumericPeriod))
        .collect();
    assert!(curve[9] > 0.0);
    let peak = curve
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap()
        .0;
    assert!(peak > 10 && peak < 99, "peak index {peak}");
    assert!(curve[99] < curve[peak]);
}

#[test]
fn shift_of_optimized_trap_is_small() {
    let sol = optimize_voltages(&ElectrodeLayout::standard(), DEFAULT_OMEGA, (-10e-6, 10e-6)).unwrap();
    for k in 0..=30 {
        let a = 0.1 * k as f64 * MICRON;
        let s = frequency_shift(&sol.resulting_potential, a, ShiftMethod::NumericPeriod);
        assert!(s.abs() < 1e-6, "A = {a}: {s}");
    }
}

#[test]
fn degenerate_layouts_are_rejected() {
    let mut l = toy_layout();
    l.electrodes.pop();
    assert!(optimize_voltages(&l, DEFAULT_OMEGA, (-1e-5, 1e-5)).is_err());
    let l = ElectrodeLayout {
        trap_height: 0.0,
        ..toy_layout()
    };
    assert!(optimize_voltages(&l, DEFAULT_OMEGA, (-1e-5, 1e-5)).is_err());
}

proptest! {
    #[test]
    fn superposition_is_linear(
        v1 in prop::collection::vec(-5.0f64..5.0, 10),
        v2 in prop::collection::vec(-5.0f64..5.0, 10),
        a in -2.0f64..2.0,
        x in -100e-6f64..100e-6,
        y in -300e-6f64..300e-6,
        z in 5e-6f64..100e-6,
    ) {
        let l = ElectrodeLayout::standard();
        let p = [x, y, z];
        let combo: Vec<f64> = v1.iter().zip(&v2).map(|(p, q)| a * p + q).collect();
        let lhs = layout_potential(&l, &combo, p).unwrap();
        let rhs = a * layout_potential(&l, &v1, p).unwrap() + layout_potential(&l, &v2, p).unwrap();
        let basis: f64 = l.electrodes.iter().zip(&combo)
            .map(|(e, v)| v * electrode_basis_potential(&e.rect, p).unwrap())
            .sum();
        prop_assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
        prop_assert!((lhs - basis).abs() < 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn quantization_error_is_at_most_half_a_step(v in -10.0f64..10.0, bits in 4u32..20) {
        let l = ElectrodeLayout { dac_bits: bits, ..ElectrodeLayout::standard() };
        let step = l.dac_step();
        let q = quantize(v, step, l.dac_range);
        prop_assert!((q - v).abs() <= 0.5 * step * (1.0 + 1e-12));
        prop_assert!((q / step - (q / step).round()).abs() < 1e-9);
    }

    #[test]
    fn symmetric_layout_has_no_odd_terms(f in 100e6f64..400e6) {
        let omega = 2.0 * std::f64::consts::PI * f;
        let sol = optimize_voltages(&ElectrodeLayout::standard(), omega, (-10e-6, 10e-6)).unwrap();
        let t = sol.resulting_potential.taylor;
        let s = 10e-6f64;
        // scaled coefficients; the constant term dominates the even set
        let scaled = |n: usize| (t[n] * s.powi(n as i32)).abs();
        let even = [0usize, 2, 4, 6, 8].iter().map(|&n| scaled(n)).fold(0.0, f64::max);
        for n in [1usize, 3, 5, 7] {
            prop_assert!(scaled(n) < 1e-12 * even, "odd term {}", n);
        }
    }

    #[test]
    fn closed_form_tracks_period_quadrature(a_um in 0.2f64..6.0, c4 in 1e-8f64..3e-7, c6 in -4e-9f64..-1e-10) {
        let pot = TrapPotential::from_normalized(DEFAULT_OMEGA, c4, c6);
        let a = a_um * MICRON;
        let closed = frequency_shift(&pot, a, ShiftMethod::ClosedForm);
        let numeric = frequency_shift(&pot, a, ShiftMethod::NumericPeriod);
        prop_assume!(numeric.abs() < 1e-5 && numeric.abs() > 1e-9);
        prop_assert!((closed - numeric).abs() <= 0.1 * numeric.abs(), "{} vs {}", closed, numeric);
    }
}
