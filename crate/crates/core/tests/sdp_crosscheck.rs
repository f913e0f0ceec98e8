use netred::network::build_msd_example;
use netred::reduction::{reduce, ReductionOptions};
use netred::SolverStatus;

// Optimal γ for the four-mass example from an independent conic solver.
const REFERENCE: [(usize, f64); 3] = [(1, 0.13800), (2, 0.049197), (3, 0.048101)];

#[test]
fn optimal_gamma_matches_reference_solver() {
    let model = build_msd_example().to_model();
    for (r, gamma) in REFERENCE {
        let red = reduce(&model, r, &ReductionOptions::default()).unwrap();
        let cert = &red.certificate;
        println!(
            "r={r} γ={:.6} status={:?} iters={} gap={:.2e} err²={:.5}",
            cert.gamma,
            cert.solver_status,
            cert.iterations,
            cert.relative_gap,
            red.report.actual_error.powi(2)
        );
        assert!(matches!(cert.solver_status, SolverStatus::Optimal | SolverStatus::NearOptimal));
        assert!((cert.gamma - gamma).abs() <= 1e-3 * gamma, "r={r}: γ={} expected {gamma}", cert.gamma);
    }
}
