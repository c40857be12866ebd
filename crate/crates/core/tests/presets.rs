use qme_core::evolve::{propagate, sample_grid, QuenchProtocol};
use qme_core::experiment::{compute_experiment, parse_axis, preset, run_sweep, Model, PRESETS};
use qme_core::linalg::max_abs_diff;
use qme_core::model::Boundary;
use qme_core::observables::{detect_mpemba, Verdict};

#[test]
fn shipped_presets_hold_the_documented_parameters() {
    assert_eq!(PRESETS, ["fig2", "fig3-qme", "fig3-anti"]);

    let f2 = preset("fig2").unwrap();
    assert_eq!(f2.lattice.sites, 20);
    assert_eq!(f2.lattice.bc, Boundary::Open);
    assert_eq!(f2.channels.dephasing, Some(0.01));
    assert!(f2.channels.boundary_loss.is_none());
    let q = f2.quench.as_ref().unwrap();
    assert_eq!((q.rate, q.a, q.range, q.t1, q.t2), (0.01, 1, 1, 45.0, 65.0));
    assert_eq!((f2.run.horizon, f2.run.dt), (300.0, 1.0));
    assert_eq!(f2.run.initial_states.len(), 2);

    for (name, a) in [("fig3-qme", -1), ("fig3-anti", 1)] {
        let f3 = preset(name).unwrap();
        assert_eq!(f3.lattice.sites, 10);
        assert!(f3.channels.dephasing.is_none());
        let loss = f3.channels.boundary_loss.unwrap();
        assert_eq!((loss.left, loss.right), (0.2, 0.2));
        let q = f3.quench.as_ref().unwrap();
        assert_eq!((q.rate, q.a, q.range, q.t1, q.t2), (0.4, a, 2, 0.5, 3.0));
    }
}

#[test]
fn fig3_sweep_over_phase_and_range() {
    let cfg = preset("fig3-qme").unwrap();
    let axes = [parse_axis("a=1,-1").unwrap(), parse_axis("q=1,2").unwrap()];
    let report = run_sweep(&cfg, &axes).unwrap();
    assert_eq!(report.rows.len(), 4 * 2);
    assert_eq!(report.failed_rows(), 0);
    let find = |a: f64, q: f64, state: &str| {
        report
            .rows
            .iter()
            .find(|r| r.params[1] == a && r.params[2] == q && r.state == state)
            .unwrap()
            .outcome
            .clone()
            .unwrap()
    };
    let qme = find(-1.0, 2.0, "rho2");
    assert_eq!(qme.verdict, Verdict::Qme);
    assert_eq!(qme.partner, "rho1_baseline");
    assert!(qme.final_delta_d < 0.0);
    let anti = find(1.0, 2.0, "rho1");
    assert_eq!(anti.verdict, Verdict::AntiQme);
    assert_eq!(anti.partner, "rho1_baseline");
    assert!(anti.final_delta_d > 0.0);
}

#[test]
fn single_cell_sweep_agrees_with_a_full_run() {
    let cfg = preset("fig3-anti").unwrap();
    let run = compute_experiment(&cfg).unwrap();
    let sweep = run_sweep(&cfg, &[parse_axis("a=1").unwrap()]).unwrap();
    for row in &sweep.rows {
        let o = row.outcome.as_ref().unwrap();
        let r = run.report(&format!("{}_quench", row.state), &o.partner).unwrap();
        assert_eq!(o.verdict, r.verdict);
        assert_eq!(o.final_delta_d, r.final_gap());
        assert_eq!(o.crossings, r.crossing_times.len());
    }
}

#[test]
fn zero_length_quench_is_no_quench() {
    let cfg = preset("fig3-qme").unwrap();
    let m = Model::build(&cfg).unwrap();
    let horizon = 4.0;
    let times = sample_grid(horizon, 0.25, &[1.0]).unwrap();
    let rho = m.basis.site_mixture(&[(5, 1.0)]).unwrap();
    let plain = QuenchProtocol::unquenched(m.base.clone(), 1.0, 1.0, horizon).unwrap();
    let empty = QuenchProtocol::quench(m.base.clone(), m.quenched.clone().unwrap(), 1.0, 1.0, horizon).unwrap();
    let x = propagate(&rho, &plain, &times).unwrap();
    let y = propagate(&rho, &empty, &times).unwrap();
    for (p, q) in x.states().iter().zip(y.states()) {
        assert!(max_abs_diff(p, q) < 1e-14);
    }
    let report = detect_mpemba(&y, &x, &m.steady_state).unwrap();
    assert_eq!(report.verdict, Verdict::None);
    assert!(report.crossing_times.is_empty());
}

#[test]
fn fig2_quench_only_acts_after_it_starts() {
    let res = compute_experiment(&preset("fig2").unwrap()).unwrap();
    let t1 = res.config.quench.as_ref().unwrap().t1;
    let base = &res.trajectory("rho1_baseline").unwrap().trajectory;
    let quench = &res.trajectory("rho1_quench").unwrap().trajectory;
    assert_eq!(base.times(), quench.times());
    for (k, &t) in base.times().iter().enumerate() {
        let diff = max_abs_diff(&base.states()[k], &quench.states()[k]);
        if t <= t1 {
            assert!(diff < 1e-12, "t = {t}: {diff:.3e}");
        } else {
            assert!(diff > 1e-8, "t = {t}: {diff:.3e}");
        }
    }
}
