use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fstress::{fstress_eval, pair_count, sindex, BaseFunction, DissimilarityData, FSpec};
use fstress_cli::{read_tensors, Instance, PairLayout};
use proptest::prelude::*;

fn instance_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("instances").join(name)
}

fn fstress(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fstress"))
        .args(args)
        .output()
        .expect("run fstress")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn field(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(' ')))
        .unwrap_or_else(|| panic!("no `{key}` line in:\n{text}"))
        .parse()
        .unwrap()
}

#[test]
fn value_of_two_point_instance() {
    let out = fstress(&["value", instance_path("two_point.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert_eq!(field(&text, "stress"), 0.5);
    assert_eq!(field(&text, "constant"), 2.0);
    assert_eq!(field(&text, "rho"), 2.0);
    assert_eq!(field(&text, "eta"), 0.5);
    assert!(text.contains("\n2 1 1 2 1 1\n"), "{text}");
}

#[test]
fn derivs_order_zero_matches_value() {
    for name in ["two_point.toml", "lstress_square.toml", "raw_stress_records.toml"] {
        let path = instance_path(name);
        let path = path.to_str().unwrap();
        let value = field(&stdout(&fstress(&["value", path])), "stress");
        let derivs = fstress(&["derivs", "--max-order", "0", path]);
        assert_eq!(derivs.status.code(), Some(0));
        let file = read_tensors(&stdout(&derivs)).unwrap();
        assert_eq!(file.stress, value, "{name}");
        assert_eq!(file.tensors.max_order(), 0);
    }
}

#[test]
fn derivs_file_is_bit_exact_in_both_encodings() {
    let path = instance_path("lstress_square.toml");
    let inst = Instance::read(&path).unwrap();
    let cfg = inst.configuration().unwrap().unwrap();
    let expected = fstress_eval(&cfg, &inst.data, inst.spec, 4).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for hex in [false, true] {
        let out_path = dir.path().join(format!("t{hex}.txt"));
        let mut args = vec!["derivs", "--max-order", "4", "--out", out_path.to_str().unwrap()];
        if hex {
            args.push("--hex");
        }
        args.push(path.to_str().unwrap());
        assert_eq!(fstress(&args).status.code(), Some(0));
        let text = std::fs::read_to_string(&out_path).unwrap();
        assert_eq!(text.contains("encoding hex"), hex);
        let file = read_tensors(&text).unwrap();
        assert_eq!(file.tensors, expected.tensors);
        assert_eq!(file.rho.to_bits(), expected.rho.to_bits());
    }
}

#[test]
fn derivs_refuses_large_order_three_without_force() {
    let path = instance_path("lstress_square.toml");
    let path = path.to_str().unwrap();
    let refused = fstress(&["derivs", "--max-order", "3", "--max-dim", "4", path]);
    assert_eq!(refused.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&refused.stderr).contains("--force"));
    let allowed = fstress(&["derivs", "--max-order", "2", "--max-dim", "4", path]);
    assert_eq!(allowed.status.code(), Some(0));
    let forced = fstress(&["derivs", "--max-order", "3", "--max-dim", "4", "--force", path]);
    assert_eq!(forced.status.code(), Some(0));
}

#[test]
fn check_exits_zero_on_bundled_instances() {
    for name in ["two_point.toml", "lstress_square.toml", "raw_stress_records.toml"] {
        let path = instance_path(name);
        let out = fstress(&[
            "check",
            "--orders",
            "1,2,3,4",
            "--seed",
            "7",
            path.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{name}: {}", stdout(&out));
        let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
        assert_eq!(report["passed"], true);
        assert_eq!(report["items"].as_array().unwrap().len(), 7);
    }
}

#[test]
fn exit_codes_for_errors_and_non_convergence() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(
        &bad,
        "n = 2\np = 1\nfunction = \"sqrt\"\npower = 1.0\ndelta = [1.0]\n",
    )
    .unwrap();
    assert_eq!(fstress(&["value", bad.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(
        fstress(&["value", "/nonexistent/instance.toml"]).status.code(),
        Some(1)
    );

    // Overriding the base to log gives ln 1 = 0 raised to a negative power.
    let two = instance_path("two_point.toml");
    let two = two.to_str().unwrap();
    let out = fstress(&["value", "--function", "log", "--power", "-1", two]);
    assert_eq!(out.status.code(), Some(1));

    let square = instance_path("lstress_square.toml");
    let square = square.to_str().unwrap();
    let out = fstress(&["fit", "--max-iter", "1", square]);
    assert_eq!(out.status.code(), Some(3));
    let out = fstress(&["fit", square]);
    assert_eq!(out.status.code(), Some(0));
    let summary: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(summary["status"], "converged");
}

#[test]
fn spec_flags_override_the_instance() {
    let two = instance_path("two_point.toml");
    let out = fstress(&["value", "--power", "2", two.to_str().unwrap()]);
    // identity^2 at squared distance 1 is 1; (1 - 2)^2 / 2.
    assert_eq!(field(&stdout(&out), "stress"), 0.5);
    let out = fstress(&[
        "value",
        "--function",
        "exp",
        "--power",
        "1",
        two.to_str().unwrap(),
    ]);
    let e = 1f64.exp();
    assert!((field(&stdout(&out), "stress") - 0.5 * (e - 2.0).powi(2)).abs() < 1e-15);
}

#[test]
fn fit_writes_instance_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("fitted.toml");
    let trace = dir.path().join("trace.csv");
    let src = instance_path("raw_stress_records.toml");
    let out = fstress(&[
        "fit",
        "--method",
        "newton",
        "--random-start",
        "--seed",
        "3",
        "--center",
        "--out",
        out_path.to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
        src.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let fitted = Instance::read(&out_path).unwrap();
    let original = Instance::read(&src).unwrap();
    assert_eq!(fitted.layout, PairLayout::Records);
    assert_eq!(fitted.data, original.data);
    let x = fitted.x.unwrap();
    for s in 0..2 {
        let mean: f64 = x[s * 5..(s + 1) * 5].iter().sum::<f64>() / 5.0;
        assert!(mean.abs() < 1e-12);
    }
    let mut reader = csv::Reader::from_path(&trace).unwrap();
    let stresses: Vec<f64> = reader
        .records()
        .map(|r| r.unwrap().get(1).unwrap().parse().unwrap())
        .collect();
    assert!(stresses.len() >= 2);
    assert!(stresses.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn csv_matrix_ingestion() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("d.csv");
    let w = dir.path().join("w.csv");
    std::fs::write(&d, "0, 1, 2, 3\n1, 0, 4, NA\n2, 4, 0, 6\n3, NA, 6, 0\n").unwrap();
    std::fs::write(&w, "0,1,1,2\n1,0,1,0\n1,1,0,1\n2,0,1,0\n").unwrap();
    let out_path = dir.path().join("inst.toml");
    let out = fstress(&[
        "convert",
        "--matrix",
        d.to_str().unwrap(),
        "--weight-matrix",
        w.to_str().unwrap(),
        "-p",
        "2",
        "--function",
        "identity",
        "--power",
        "0.5",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let inst = Instance::read(&out_path).unwrap();
    // pairs (2,1) (3,1) (4,1) (3,2) (4,2) (4,3)
    assert_eq!(inst.data.delta(), &[1.0, 2.0, 3.0, 4.0, 0.0, 6.0]);
    assert_eq!(inst.data.weights(), &[1.0, 1.0, 2.0, 1.0, 0.0, 1.0]);
    assert_eq!(inst.spec, FSpec::new(BaseFunction::Identity, 0.5));
    assert_eq!(inst.p, 2);

    std::fs::write(&d, "0,1\n2,0\n").unwrap();
    let out = fstress(&[
        "convert",
        "--matrix",
        d.to_str().unwrap(),
        "-p",
        "1",
        "--function",
        "log",
        "--power",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(1), "asymmetric matrix is rejected");
}

#[test]
fn dense_arrays_follow_lower_triangle_order() {
    // delta[k] = 1000 i + j, so every slot names its own pair.
    let n = 6;
    let mut delta = vec![0.0; pair_count(n)];
    for j in 1..=n {
        for i in j + 1..=n {
            delta[sindex(i, j, n)] = (1000 * i + j) as f64;
        }
    }
    let text = format!(
        "n = {n}\np = 1\nfunction = \"identity\"\npower = 1.0\ndelta = {:?}\n",
        delta
    );
    let mut inst = Instance::from_toml(&text).unwrap();
    for (pair, _, d) in inst.data.records() {
        assert_eq!(d.to_bits(), ((1000 * pair.i + pair.j) as f64).to_bits());
    }
    inst.layout = PairLayout::Records;
    let records = Instance::from_toml(&inst.to_toml()).unwrap();
    assert_eq!(records.data.delta(), &delta[..]);
}

fn arb_instance() -> impl Strategy<Value = Instance> {
    (2usize..6, 1usize..4, 0usize..5, any::<bool>(), any::<bool>())
        .prop_flat_map(|(n, p, base, with_x, records)| {
            let m = pair_count(n);
            (
                Just((n, p, base, with_x, records)),
                -3.0f64..3.0,
                proptest::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), n * p),
                proptest::collection::vec(prop_oneof![Just(0.0), Just(1.0), 0.0f64..1e6], m),
                proptest::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), m),
            )
        })
        .prop_map(|((n, p, base, with_x, records), q, x, w, d)| Instance {
            spec: FSpec::new(BaseFunction::ALL[base], q),
            p,
            x: with_x.then_some(x),
            data: DissimilarityData::new(n, w, d).unwrap(),
            layout: if records {
                PairLayout::Records
            } else {
                PairLayout::Dense
            },
        })
}

fn same_bits(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

proptest! {
    #[test]
    fn instances_round_trip(inst in arb_instance()) {
        let text = inst.to_toml();
        let back = Instance::from_toml(&text).unwrap();
        prop_assert_eq!(&back, &inst);
        prop_assert_eq!(back.spec.power.to_bits(), inst.spec.power.to_bits());
        prop_assert!(same_bits(back.data.weights(), inst.data.weights()));
        if inst.layout == PairLayout::Dense {
            prop_assert!(same_bits(back.data.delta(), inst.data.delta()));
        }
        if let (Some(a), Some(b)) = (&back.x, &inst.x) {
            prop_assert!(same_bits(a, b));
        }
        prop_assert_eq!(back.to_toml(), text);
    }
}
