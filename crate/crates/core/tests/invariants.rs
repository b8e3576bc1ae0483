use gbeam::beam::{propagate, Mode};
use gbeam::model::{preset_1d, preset_2d, PhaseKind1d, PhaseKind2d, Point};
use gbeam::ode::StepControl;
use proptest::prelude::*;

fn mode(plus: bool) -> Mode {
    if plus {
        Mode::Plus
    } else {
        Mode::Minus
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn one_dimensional_beams_keep_their_invariants(
        z in -4.0..4.0f64, y in 1.5..=2.0f64, t in 0.1..2.0f64, plus: bool, quadratic: bool,
    ) {
        let kind = if quadratic { PhaseKind1d::Quadratic } else { PhaseKind1d::Linear };
        let s = preset_1d(kind, 3.0).unwrap();
        prop_assume!(!quadratic || z.abs() > 0.05);
        let tr = propagate(&Point::<1>::new(z), &[y], &s.data, &s.medium, mode(plus), t, &StepControl::default()).unwrap();
        prop_assert!(tr.max_hamiltonian_drift <= 1e-8);
        // Homogeneous medium: Im M stays at its launch value.
        for st in &tr.states {
            prop_assert!((st.min_imag_eigenvalue() - 1.0).abs() < 1e-9);
        }
        prop_assert!((tr.end_time() - t).abs() < 1e-12);
    }

    #[test]
    fn two_dimensional_beams_stay_admissible(
        x1 in 0.2..2.0f64, x2 in -1.0..1.5f64, left: bool, r in 0.0..=1.0f64, t in 0.1..1.0f64, plus: bool, abs: bool,
    ) {
        let s = preset_2d(if abs { PhaseKind2d::Abs } else { PhaseKind2d::Linear });
        let y = s.diagonal_point(r);
        let z = Point::<2>::new(if left { -x1 } else { x1 }, x2);
        let tr = propagate(&z, &y, &s.data, &s.medium, mode(plus), t, &StepControl::default()).unwrap();
        prop_assert!(tr.max_asymmetry <= 1e-8);
        prop_assert!(tr.min_imag_eigenvalue > 0.0);
        for k in 0..=10 {
            let st = tr.state_at(t * k as f64 / 10.0);
            prop_assert!(st.min_imag_eigenvalue() > 0.0);
            prop_assert!(st.asymmetry() <= 1e-8);
        }
    }
}
