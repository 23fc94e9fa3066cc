use spectralkit::output::{self, list_snapshots, Snapshot};
use spectralkit::params::ParamTree;
use spectralkit::solver_core::{load_sim_for_plot, load_state_phys_file, load_state_phys_file_with};
use spectralkit::{build_simulation, create_default_params, Error};

fn params(root: &std::path::Path, it_end: i64) -> ParamTree {
    let mut p = create_default_params("ns2d").unwrap();
    p.set("oper.nx", 32i64).unwrap();
    p.set("oper.ny", 32i64).unwrap();
    p.set("time_stepping.use_cfl", false).unwrap();
    p.set("time_stepping.deltat0", 0.01).unwrap();
    p.set("time_stepping.use_t_end", false).unwrap();
    p.set("time_stepping.it_end", it_end).unwrap();
    p.set("forcing.enable", true).unwrap();
    p.set("output.has_to_save", true).unwrap();
    p.set("output.period_save", 1.0).unwrap();
    p.set("output.period_print", 0i64).unwrap();
    p.set("output.sim_dir_root", root.to_str().unwrap()).unwrap();
    p
}

#[test]
fn resume_matches_uninterrupted_run() {
    let root = tempfile::tempdir().unwrap();
    let mut first = build_simulation(&params(root.path(), 10)).unwrap();
    first.run().unwrap();
    let dir = first.output.sim_dir.clone().unwrap();

    let mut resumed = load_state_phys_file_with(&dir, None, |p| p.set("time_stepping.it_end", 15i64)).unwrap();
    assert_eq!(resumed.it(), 10);
    resumed.run().unwrap();

    let mut p = params(root.path(), 15);
    p.set("output.has_to_save", false).unwrap();
    let mut straight = build_simulation(&p).unwrap();
    straight.run().unwrap();

    assert_eq!(resumed.it(), 15);
    let (a, b) = (straight.snapshot().unwrap(), resumed.snapshot().unwrap());
    let scale = a.fields[0].iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let err = a.fields[0].iter().zip(&b.fields[0]).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(err <= 1e-12 * scale, "{err}");
}

#[test]
fn reload_for_plot_matches_the_last_snapshot() {
    let root = tempfile::tempdir().unwrap();
    let mut sim = build_simulation(&params(root.path(), 10)).unwrap();
    sim.run().unwrap();
    let dir = sim.output.sim_dir.clone().unwrap();
    let mut plot = load_sim_for_plot(&dir).unwrap();
    assert!(plot.is_read_only());
    assert!(plot.params.subtree("oper").unwrap().bit_eq(sim.params.subtree("oper").unwrap()));
    assert!(plot.params.subtree("forcing").unwrap().bit_eq(sim.params.subtree("forcing").unwrap()));
    assert_eq!(plot.nu(), sim.nu());
    let (_, last) = list_snapshots(&dir).unwrap().pop().unwrap();
    let saved = Snapshot::load(&last).unwrap();
    assert_eq!(plot.snapshot().unwrap().fields, saved.fields);
    assert!(matches!(plot.step(), Err(Error::Config(_))));
}

#[test]
fn truncated_snapshot_is_rejected() {
    let root = tempfile::tempdir().unwrap();
    let mut sim = build_simulation(&params(root.path(), 2)).unwrap();
    sim.run().unwrap();
    let dir = sim.output.sim_dir.clone().unwrap();
    let (_, last) = list_snapshots(&dir).unwrap().pop().unwrap();
    let bytes = std::fs::read(&last).unwrap();
    std::fs::write(&last, &bytes[..bytes.len() - 8]).unwrap();
    match Snapshot::load(&last) {
        Err(Error::Format { message, .. }) => assert!(message.contains("payload"), "{message}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn digest_mismatch_refuses_restart() {
    let root = tempfile::tempdir().unwrap();
    let mut sim = build_simulation(&params(root.path(), 2)).unwrap();
    sim.run().unwrap();
    let dir = sim.output.sim_dir.clone().unwrap();
    let err = match load_state_phys_file_with(&dir, None, |p| p.set("oper.Lx", 3.0)) {
        Err(e) => e,
        Ok(_) => panic!("restart with a different domain was accepted"),
    };
    assert!(matches!(err, Error::Digest { .. }), "{err:?}");
    assert!(load_state_phys_file(&dir, Some(sim.t())).is_ok());
}

#[test]
fn empty_directory_has_no_records() {
    let root = tempfile::tempdir().unwrap();
    assert!(matches!(load_sim_for_plot(root.path()), Err(Error::MissingRecords(_))));
    assert!(!root.path().join(output::PARAMS_FILE).exists());
}
