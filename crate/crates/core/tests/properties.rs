use nalgebra::{DMatrix, DVector};
use netred::generator::generate_powerlaw_cluster;
use netred::io::{load_network, network_from_str, network_to_string, save_network};
use netred::linalg::{self, EigenOrder};
use netred::network::{split_stiffness, validate, Laplacian, SecondOrderNetwork};
use netred::reconstruct::{assemble_v, ladder_t_factor, realize, EigenPairing};
use netred::reduction::{formulate_sdp, VariableLayout, Variables};
use netred::SecondOrderModel;
use proptest::prelude::*;

fn orthogonal(seed: &[f64], n: usize) -> DMatrix<f64> {
    let m = DMatrix::from_column_slice(n, n, &seed[..n * n]);
    m.qr().q()
}

fn spd(values: &[f64], basis: &[f64]) -> DMatrix<f64> {
    let n = values.len();
    let q = orthogonal(basis, n);
    let k = &q * DMatrix::from_diagonal(&DVector::from_column_slice(values)) * q.transpose();
    linalg::symmetrize(&k)
}

fn weighted_graph(n: usize, weights: &[f64]) -> Laplacian {
    // spanning path plus optional chords
    let mut edges = Vec::new();
    let mut w = weights.iter().copied().cycle();
    for i in 0..n - 1 {
        edges.push((i, i + 1, w.next().unwrap()));
    }
    for i in 0..n {
        for j in i + 2..n {
            let v = w.next().unwrap();
            if v > 1.5 {
                edges.push((i, j, v - 1.5));
            }
        }
    }
    Laplacian::from_edges(n, &edges).unwrap()
}

#[test]
fn generated_graphs_are_connected_laplacians() {
    for n in [10, 50, 100] {
        for seed in 0..50 {
            let l = generate_powerlaw_cluster(n, 2, 0.3, seed).unwrap();
            let m = l.matrix();
            assert_eq!(m.transpose(), *m);
            for i in 0..n {
                assert_eq!(m.row(i).sum(), 0.0, "n={n} seed={seed} row {i}");
                for j in 0..n {
                    assert!(i == j || m[(i, j)] <= 0.0);
                }
            }
            assert!(l.is_connected(), "n={n} seed={seed}");
            assert!(l.algebraic_connectivity() > 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn grounding_recovered_from_stiffness(
        n in 3usize..9,
        weights in prop::collection::vec(0.1f64..3.0, 64),
        grounding in prop::collection::vec(0.0f64..2.0, 9),
    ) {
        let l = weighted_graph(n, &weights);
        let v = DVector::from_column_slice(&grounding[..n]);
        let k = DMatrix::from_diagonal(&v) + l.matrix();
        let (v2, l2) = split_stiffness(&k).unwrap();
        prop_assert!((v2 - &v).amax() <= 1e-12 * k.amax());
        prop_assert!((l2 - l.matrix()).amax() <= 1e-12 * k.amax());
    }

    #[test]
    fn grounded_networks_validate(
        n in 3usize..9,
        weights in prop::collection::vec(0.1f64..3.0, 64),
        alpha in 0.05f64..2.0,
        beta in 0.0f64..1.0,
    ) {
        let l = weighted_graph(n, &weights);
        let net = netred::network::build_grounded_system(&l, alpha, beta).unwrap();
        let report = validate(&net);
        prop_assert!(report.is_valid(), "{}", report);
        let k_min = linalg::sym_eig(&net.k(), EigenOrder::Ascending).unwrap().min();
        let d_min = linalg::sym_eig(&net.d(), EigenOrder::Ascending).unwrap().min();
        prop_assert!(k_min > 0.0 && d_min > 0.0);
    }

    #[test]
    fn network_json_is_bit_exact(
        n in 2usize..7,
        weights in prop::collection::vec(0.1f64..3.0, 64),
        alpha in 0.05f64..2.0,
        beta in 0.0f64..1.0,
        io in prop::collection::vec(-1.0f64..1.0, 14),
    ) {
        let l = weighted_graph(n, &weights);
        let mut v = DVector::zeros(n);
        v[0] = weights[0];
        let f = DMatrix::from_column_slice(n, 1, &io[..n]);
        let h = DMatrix::from_row_slice(1, n, &io[7..7 + n]);
        let net = SecondOrderNetwork::new(v, l.into_matrix(), alpha, beta, f, h).unwrap();
        let back = network_from_str(&network_to_string(&net)).unwrap();
        prop_assert_eq!(back, net);
    }

    #[test]
    fn decision_vector_pack_unpack(n in 2usize..6, data in prop::collection::vec(-5.0f64..5.0, 100)) {
        let r = 1 + (data[0].abs() as usize) % (n - 1);
        let layout = VariableLayout { n, r };
        let x = DVector::from_column_slice(&data[..layout.len()]);
        let vars = Variables::unpack(layout, &x);
        prop_assert_eq!(vars.pack(), x);
        prop_assert_eq!(vars.p11.transpose(), vars.p11.clone());
        prop_assert_eq!(vars.x1.transpose(), vars.x1.clone());
    }

    #[test]
    fn constraint_map_is_affine(data in prop::collection::vec(-2.0f64..2.0, 80), t in 0.0f64..1.0) {
        let model = netred::network::build_msd_example().to_model();
        let prog = formulate_sdp(&model, 2, 1e-7).unwrap();
        let m = prog.program.num_vars();
        let x = DVector::from_column_slice(&data[..m]);
        let y = DVector::from_column_slice(&data[m..2 * m]);
        let mid = &x * t + &y * (1.0 - t);
        let (sx, sy, sm) = (prog.program.slack(&x), prog.program.slack(&y), prog.program.slack(&mid));
        for b in 0..sx.len() {
            let blend = &sx[b] * t + &sy[b] * (1.0 - t);
            prop_assert!((&sm[b] - blend).amax() < 1e-10);
        }
    }

    #[test]
    fn realizations_are_laplacian_and_norm_preserving(
        r in 2usize..=8,
        values in prop::collection::vec(0.2f64..10.0, 8),
        basis in prop::collection::vec(-1.0f64..1.0, 64),
        io in prop::collection::vec(-1.0f64..1.0, 16),
        alpha in 0.1f64..1.5,
        beta in 0.0f64..0.5,
    ) {
        let k = spd(&values[..r], &basis);
        let d = DMatrix::<f64>::identity(r, r) * alpha + &k * beta;
        let f = DMatrix::from_column_slice(r, 1, &io[..r]);
        let h = DMatrix::from_row_slice(1, r, &io[8..8 + r]);
        let model = SecondOrderModel::new(k.clone(), d, f, h).unwrap();
        let real = realize(&model, &ladder_t_factor(r), EigenPairing::Descending).unwrap();

        let eye = DMatrix::<f64>::identity(r, r);
        prop_assert!((&real.ur * real.ur.transpose() - &eye).amax() < 1e-10);
        let mut before: Vec<f64> = k.symmetric_eigenvalues().iter().copied().collect();
        let mut after: Vec<f64> = real.kr.symmetric_eigenvalues().iter().copied().collect();
        before.sort_by(f64::total_cmp);
        after.sort_by(f64::total_cmp);
        for (a, b) in before.iter().zip(&after) {
            prop_assert!((a - b).abs() < 1e-9 * before[r - 1]);
        }
        let ones = DVector::from_element(r, 1.0);
        prop_assert!((&real.kr * &ones - &ones * real.lambda_r).amax() < 1e-9 * before[r - 1]);
        for i in 0..r {
            for j in 0..r {
                prop_assert!(i == j || real.kr[(i, j)] <= 1e-10);
            }
        }
        let (h0, h1) = (model.h2_norm().unwrap(), real.model().h2_norm().unwrap());
        prop_assert!((h0 - h1).abs() <= 1e-8 * h0.max(1e-12));
        let v = assemble_v(&ladder_t_factor(r));
        prop_assert!((&v * v.transpose() - &eye).amax() < 1e-12);
    }
}

#[test]
fn network_file_round_trip() {
    let dir = tempfile::TempDir::new().unwrap();
    let path = dir.path().join("msd.json");
    let net = netred::network::build_msd_example();
    save_network(&net, &path).unwrap();
    assert_eq!(load_network(&path).unwrap(), net);
    assert!(load_network(dir.path().join("missing.json")).is_err());
}
