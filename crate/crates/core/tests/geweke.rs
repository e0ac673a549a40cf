use pyramid_core::gibbs::geweke::{run_geweke, GewekeConfig};

#[test]
fn joint_distribution_agrees_on_toy_model() {
    let cfg = GewekeConfig {
        sweeps: 30_000,
        batch: 500,
        seed: 21,
        ..Default::default()
    };
    let report = run_geweke(&cfg).unwrap();
    for (name, z) in report.names.iter().zip(&report.z) {
        println!("{name:>24} z = {z:+.2}");
    }
    assert_eq!(report.z.len(), 20);
    assert!(report.max_abs_z() < 4.0, "max |z| = {}", report.max_abs_z());
}

#[test]
fn unconstrained_sampler_agrees_too() {
    let cfg = GewekeConfig {
        sweeps: 30_000,
        batch: 500,
        positivity: false,
        seed: 22,
        ..Default::default()
    };
    let report = run_geweke(&cfg).unwrap();
    assert!(report.max_abs_z() < 4.0, "{:?}", report.z);
}
