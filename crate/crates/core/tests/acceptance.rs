//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any of them fails.

use std::sync::Arc;
use std::time::{Duration, Instant};

use gbeam::beam::{build_fan, default_z_spacing, propagate, Mode};
use gbeam::exact::{exact_qoi_spacetime, field_l2_error, gb_vs_exact_report, DAlembertField};
use gbeam::field::{CutoffSpec, DerivativeOrder, FieldSpec};
use gbeam::model::{preset_1d, preset_2d, PhaseKind1d, PhaseKind2d, Point, ScenarioPreset};
use gbeam::ode::StepControl;
use gbeam::qoi::{check_admissibility, evaluate_qoi, mode_decomposition, QoIKind, QoISpec};
use gbeam::sweep::{fit_scaling, run_sweep, FdMode, ParamGrid, QoICell, ScalingClass, SweepPlan, SweepTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EPS_1D: [f64; 3] = [1.0 / 40.0, 1.0 / 80.0, 1.0 / 160.0];
const EPS_2D: [f64; 3] = [1.0 / 30.0, 1.0 / 60.0, 1.0 / 120.0];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// The quadratic phase is stationary at the origin, which carries amplitude
/// for s = 1.5, so that combination has no beam fan.
fn presets_1d() -> Vec<ScenarioPreset<1>> {
    vec![
        preset_1d(PhaseKind1d::Linear, 1.5).unwrap(),
        preset_1d(PhaseKind1d::Linear, 3.0).unwrap(),
        preset_1d(PhaseKind1d::Quadratic, 3.0).unwrap(),
    ]
}

/// Integrator defaults, but with the in-flight guards relaxed so that the
/// invariants are measured rather than enforced.
fn measuring_ctrl() -> StepControl {
    StepControl { hamiltonian_tol: f64::INFINITY, symmetry_tol: f64::INFINITY, ..StepControl::default() }
}

fn c1_hamiltonian() -> Outcome {
    let s = preset_2d(PhaseKind2d::Abs);
    let y = s.diagonal_point(0.5);
    let ctrl = measuring_ctrl();
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut n = 0;
    for mode in Mode::BOTH {
        for i in 0..5 {
            for j in 0..10 {
                let x1 = if i < 3 { 0.6 + 0.2 * i as f64 } else { -0.6 - 0.2 * (i - 3) as f64 };
                let z = Point::<2>::new(x1, y[0] - 0.45 + 0.1 * j as f64);
                match propagate(&z, &y, &s.data, &s.medium, mode, 1.0, &ctrl) {
                    Ok(tr) => worst = worst.max(tr.max_hamiltonian_drift),
                    Err(e) => return outcome(false, format!("beam at {z:?} failed: {e}")),
                }
                n += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(worst <= 1e-8 && secs < 5.0, format!("{n} beams, max relative drift {worst:.2e} (limit 1e-8), {secs:.2} s (limit 5 s)"))
}

fn c2_riccati() -> Outcome {
    let ctrl = measuring_ctrl();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut asym, mut lam, mut beams, mut samples): (f64, f64, usize, usize) = (0.0, f64::INFINITY, 0, 0);
    let mut check = |tr: &gbeam::beam::BeamTrajectory<2>| {
        asym = asym.max(tr.max_asymmetry);
        for k in 0..=50 {
            lam = lam.min(tr.state_at(tr.end_time() * k as f64 / 50.0).min_imag_eigenvalue());
        }
        beams += 1;
        samples += 51;
    };
    for kind in [PhaseKind2d::Abs, PhaseKind2d::Linear] {
        let s = preset_2d(kind);
        for _ in 0..40 {
            let y: Vec<f64> = (0..2).map(|k| rng.gen_range(s.params.lo[k]..=s.params.hi[k])).collect();
            let mut z = Point::<2>::new(rng.gen_range(-2.0..2.0), rng.gen_range(-1.0..1.5));
            if !s.keeps_launch_point(&z) {
                z[0] += 0.1_f64.copysign(z[0]);
            }
            let mode = if rng.gen_bool(0.5) { Mode::Plus } else { Mode::Minus };
            let t = [0.5, 1.0, 2.0][rng.gen_range(0..3)];
            match propagate(&z, &y, &s.data, &s.medium, mode, t, &ctrl) {
                Ok(tr) => check(&tr),
                Err(e) => return outcome(false, format!("{} beam at {z:?} failed: {e}", s.name)),
            }
        }
    }
    // 1D presets, widened to D = 2 bookkeeping by tracking the scalars directly.
    let (mut asym1, mut lam1): (f64, f64) = (0.0, f64::INFINITY);
    for s in presets_1d() {
        for _ in 0..20 {
            let y = vec![rng.gen_range(1.5..=2.0)];
            let z = Point::<1>::new(rng.gen_range(-4.0..4.0));
            if z[0].abs() < 0.05 && s.name.contains("quadratic") {
                continue;
            }
            let mode = if rng.gen_bool(0.5) { Mode::Plus } else { Mode::Minus };
            let t = [0.5, 1.0, 2.0][rng.gen_range(0..3)];
            match propagate(&z, &y, &s.data, &s.medium, mode, t, &ctrl) {
                Ok(tr) => {
                    asym1 = asym1.max(tr.max_asymmetry);
                    for k in 0..=50 {
                        lam1 = lam1.min(tr.state_at(tr.end_time() * k as f64 / 50.0).min_imag_eigenvalue());
                    }
                    beams += 1;
                    samples += 51;
                }
                Err(e) => return outcome(false, format!("{} beam at {z:?} failed: {e}", s.name)),
            }
        }
    }
    let (asym, lam) = (asym.max(asym1), lam.min(lam1));
    outcome(
        asym <= 1e-8 && lam >= 1e-3,
        format!("{beams} beams, {samples} samples: max |M - M^T| {asym:.2e} (limit 1e-8), min eig Im M {lam:.3} (limit 1e-3)"),
    )
}

fn c3_reconstruction() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    for s in presets_1d() {
        let f = DAlembertField::from_scenario(&s).unwrap();
        let y = [1.75];
        let mut errs = Vec::new();
        for eps in [1.0 / 40.0, 1.0 / 80.0] {
            let fan = build_fan(&s, &y, 0.0, default_z_spacing(eps), &Mode::BOTH, &StepControl::default()).unwrap();
            let fs = FieldSpec::new(Arc::new(fan), CutoffSpec::NONE, eps, &Mode::BOTH).unwrap();
            errs.push(field_l2_error(&fs, &f, &s.window, 0.0, &y).unwrap());
        }
        let ratio = errs[1] / errs[0];
        pass &= errs[0] <= 0.05 && ratio <= 0.7;
        lines.push(format!("{}: e(1/40) {:.2}%, ratio {ratio:.3}", s.name, 100.0 * errs[0]));
    }
    outcome(pass, format!("{} (limits 5%, 0.7)", lines.join("; ")))
}

fn c4_exact_qoi() -> Outcome {
    let s = preset_1d(PhaseKind1d::Linear, 3.0).unwrap();
    let start = Instant::now();
    let rows = match gb_vs_exact_report(&s, &[1.0 / 80.0], &[1.75], 2.0, &StepControl::default()) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("report failed: {e}")),
    };
    let secs = start.elapsed().as_secs_f64();
    let r = &rows[0];
    outcome(
        r.qoi_space_error <= 0.02 && r.qoi_spacetime_error <= 0.02 && secs < 120.0,
        format!(
            "eps 1/80: one-mode space QoI error {:.2}%, two-mode space-time QoI error {:.2}% (limit 2%), {secs:.1} s (limit 120 s)",
            100.0 * r.qoi_space_error,
            100.0 * r.qoi_spacetime_error
        ),
    )
}

/// One plan per epsilon so that a step proportional to epsilon can be used.
fn sweep_1d(kind: PhaseKind1d, qoi: QoIKind, points: usize, h_y: impl Fn(f64) -> f64) -> SweepTable {
    let s = preset_1d(kind, 3.0).unwrap();
    let grid = ParamGrid::Axis { lo: s.params.lo.clone(), hi: s.params.hi.clone(), counts: vec![points] };
    let cell = QoICell::new(s, qoi, &Mode::BOTH);
    let mut merged: Option<SweepTable> = None;
    for &e in &EPS_1D {
        let plan = SweepPlan {
            grid: grid.clone(),
            epsilons: vec![e],
            sigmas: vec![vec![0], vec![1], vec![2]],
            h_y: h_y(e),
            fd_mode: FdMode::Stencil,
        };
        let t = run_sweep(&plan, &cell).expect("sweep");
        match &mut merged {
            None => merged = Some(t),
            Some(m) => {
                m.plan.epsilons.push(e);
                m.rows.extend(t.rows);
            }
        }
    }
    merged.unwrap()
}

fn fit_line(t: &SweepTable, sigma: usize) -> (gbeam::sweep::ScalingFit, String) {
    let f = fit_scaling(t, &[sigma]).unwrap();
    let ratios: Vec<String> = f.ratios.iter().map(|r| format!("{r:.3}")).collect();
    let line = format!("sigma {sigma}: rho {:.3}, {:?}, ratios [{}]", f.rho, f.class, ratios.join(", "));
    (f, line)
}

fn c5_growing_oscillations() -> Outcome {
    let t = sweep_1d(PhaseKind1d::Linear, QoIKind::Space, 101, |e| e / 50.0);
    let (f1, l1) = fit_line(&t, 1);
    let (f2, l2) = fit_line(&t, 2);
    outcome(
        (0.8..=1.2).contains(&f1.rho) && (1.6..=2.4).contains(&f2.rho),
        format!("{l1} (want [0.8, 1.2]); {l2} (want [1.6, 2.4])"),
    )
}

fn bounded(f: &gbeam::sweep::ScalingFit) -> bool {
    f.class == ScalingClass::Bounded && f.ratios.iter().all(|r| (0.5..=1.5).contains(r))
}

fn c6_quadratic_bounded() -> Outcome {
    let t = sweep_1d(PhaseKind1d::Quadratic, QoIKind::Space, 101, |_| 1e-3);
    let (f1, l1) = fit_line(&t, 1);
    let (f2, l2) = fit_line(&t, 2);
    outcome(bounded(&f1) && bounded(&f2), format!("{l1}; {l2} (ratios within [0.5, 1.5])"))
}

fn c7_time_integrated() -> Outcome {
    // 26 points: the bounded QoI has no epsilon-scale structure in y to miss.
    let t = sweep_1d(PhaseKind1d::Linear, QoIKind::Spacetime, 26, |_| 1e-3);
    let (f1, l1) = fit_line(&t, 1);
    let (f2, l2) = fit_line(&t, 2);
    let s = preset_1d(PhaseKind1d::Linear, 3.0).unwrap();
    let f = DAlembertField::from_scenario(&s).unwrap();
    let mut worst: f64 = 0.0;
    for &e in &EPS_1D {
        for k in 0..5 {
            let y = [1.5 + 0.125 * k as f64];
            let d = exact_qoi_spacetime(&f, &s.spacetime_window, &y, e).unwrap();
            worst = worst.max(d.zero.abs() / d.plus);
        }
    }
    outcome(
        bounded(&f1) && bounded(&f2) && worst <= 1e-5,
        format!("{l1}; {l2}; max exact |Q0|/Q+ {worst:.2e} (limit 1e-5)"),
    )
}

/// Cells a stencil sweep evaluates for one epsilon: the grid values plus
/// both neighbours of every interior point.
fn stencil_cells(points: usize) -> usize {
    points + 2 * (points - 2)
}

fn c8_two_dimensional() -> Outcome {
    // The full plan is far beyond the budget on this hardware, so one cell per
    // (column, epsilon) is timed and the total projected from it.
    let budget = Duration::from_secs(30 * 60);
    let abs = preset_2d(PhaseKind2d::Abs);
    let lin = preset_2d(PhaseKind2d::Linear);
    let y = abs.diagonal_point(0.5);
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get()) as f64;
    let mut projected = 0.0;
    let mut notes = Vec::new();
    let mut cross = Vec::new();
    for &e in &EPS_2D {
        let one = QoICell::new(abs.clone(), QoIKind::Space, &[Mode::Minus]);
        let start = Instant::now();
        let (fs, spec) = one.field(e, &y).unwrap();
        evaluate_qoi(&fs, &spec, 1.0, &y).unwrap();
        let t_one = start.elapsed().as_secs_f64();

        let two = QoICell::new(lin.clone(), QoIKind::Space, &Mode::BOTH);
        let start = Instant::now();
        let (fs, spec) = two.field(e, &y).unwrap();
        let fan_secs = start.elapsed().as_secs_f64();
        let d = mode_decomposition(&fs, &spec, Some(1.0), &y).unwrap();
        let t_two = start.elapsed().as_secs_f64();
        cross.push(2.0 * d.cross_re.abs() / d.total().abs());

        // Space-time cell: one field slice per time node of the window.
        let st = QoICell::new(lin.clone(), QoIKind::Spacetime, &Mode::BOTH).spec(e);
        let (lo, hi) = st.window.time.unwrap();
        let slices = ((hi - lo) / st.h_t).ceil() + 1.0;
        let t_st = fan_secs + slices * (t_two - fan_secs);

        projected += stencil_cells(101) as f64 * (t_one + t_two + t_st);
        notes.push(format!("eps 1/{:.0}: {t_one:.1}+{t_two:.1}+{t_st:.0} s per cell", 1.0 / e));
        if e < 0.02 && projected / cores > budget.as_secs_f64() * 4.0 {
            break;
        }
    }
    let hours = projected / cores / 3600.0;
    let cross: Vec<String> = cross.iter().map(|c| format!("{c:.2}")).collect();
    outcome(
        false,
        format!(
            "projected runtime {hours:.0} h on {cores} core(s) (limit 0.5 h), phenomenology not evaluated; \
             timed cells [{}]; two-mode interference share 2|Q3|/Q at r = 0.5: [{}]",
            notes.join(", "),
            cross.join(", ")
        ),
    )
}

fn c9_cutoff_equivalence() -> Outcome {
    let mut worst: f64 = 0.0;
    for s in presets_1d() {
        let y = [1.75];
        for eps in [1.0 / 40.0, 1.0 / 80.0] {
            let t_end = s.spacetime_window.time.unwrap().1.max(2.0) + eps;
            let fan = Arc::new(build_fan(&s, &y, t_end, default_z_spacing(eps), &Mode::BOTH, &StepControl::default()).unwrap());
            let plain = FieldSpec::new(fan, CutoffSpec::NONE, eps, &Mode::BOTH).unwrap();
            // Plateau wider than the 6-sigma beam truncation radius.
            let cut = plain.with_cutoff(CutoffSpec::finite(2.0).unwrap());
            let h = eps / 8.0;
            for ord in [DerivativeOrder::zero(1), DerivativeOrder::space(0, 1)] {
                let spec = QoISpec::space(s.window.clone(), ord.clone(), h);
                let a = evaluate_qoi(&plain, &spec, 2.0, &y).unwrap().value;
                let b = evaluate_qoi(&cut, &spec, 2.0, &y).unwrap().value;
                worst = worst.max((a - b).abs() / a.abs());
                let spec = QoISpec::spacetime(s.spacetime_window.clone(), ord, h, h);
                let a = evaluate_qoi(&plain, &spec, 0.0, &y).unwrap().value;
                let b = evaluate_qoi(&cut, &spec, 0.0, &y).unwrap().value;
                worst = worst.max((a - b).abs() / a.abs());
            }
        }
    }
    outcome(worst <= 1e-12, format!("max relative difference {worst:.2e} (limit 1e-12)"))
}

fn c10_admissibility() -> Outcome {
    let times: Vec<f64> = (0..=8).map(|k| 0.25 * k as f64).collect();
    let mut worst_1d: f64 = 0.0;
    for s in presets_1d() {
        for y in [1.5, 1.75, 2.0] {
            let fan = build_fan(&s, &[y], 2.0, 0.1, &Mode::BOTH, &StepControl::default()).unwrap();
            let r = check_admissibility(&fan, 1.0, &times, 8).unwrap();
            worst_1d = worst_1d.max((r.delta - 0.5).abs());
        }
    }
    let s = preset_2d(PhaseKind2d::Abs);
    let t2: Vec<f64> = (0..=4).map(|k| 0.25 * k as f64).collect();
    let mut min_2d = f64::INFINITY;
    let mut ys = s.params.grid(3);
    ys.extend([0.25, 0.75].map(|r| s.diagonal_point(r)));
    for y in &ys {
        for kind in [PhaseKind2d::Abs, PhaseKind2d::Linear] {
            let s = preset_2d(kind);
            let fan = build_fan(&s, y, 1.0, 0.2, &Mode::BOTH, &StepControl::default()).unwrap();
            min_2d = min_2d.min(check_admissibility(&fan, 1.0, &t2, 6).unwrap().delta);
        }
    }
    outcome(
        worst_1d <= 1e-9 && min_2d > 0.0,
        format!("1D max |delta - 0.5| {worst_1d:.1e} (limit 1e-9); 2D min delta {min_2d:.3} over {} parameter points", ys.len()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("Hamiltonian conservation along rays", c1_hamiltonian),
        ("Riccati invariants", c2_riccati),
        ("initial data reconstruction", c3_reconstruction),
        ("agreement with the exact QoI", c4_exact_qoi),
        ("growing oscillations, linear phase", c5_growing_oscillations),
        ("bounded derivatives, quadratic phase", c6_quadratic_bounded),
        ("time-integrated QoI is bounded", c7_time_integrated),
        ("two-dimensional sweep", c8_two_dimensional),
        ("cutoff equivalence", c9_cutoff_equivalence),
        ("cutoff admissibility", c10_admissibility),
    ];
    // Optional criterion numbers on the command line restrict the run.
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        if !only.is_empty() && !only.contains(&(k + 1)) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let o = std::panic::catch_unwind(run).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            outcome(false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        failed += usize::from(!o.pass);
        println!(
            "{} criterion {:>2} {name}: {} [{:.1} s]",
            if o.pass { "PASS" } else { "FAIL" },
            k + 1,
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of {} criteria passed", ran - failed, ran);
    if failed > 0 {
        std::process::exit(1);
    }
}
