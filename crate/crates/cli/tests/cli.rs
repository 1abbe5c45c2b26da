use std::path::Path;
use std::process::{Command, Output};

use acsm_cli::config::RunConfig;
use acsm_core::formats::{parse_pole_csv, read_csv, sample_header_len, write_moment_file, MomentFile, Provenance, SampleHeader};
use acsm_core::fpu_model::{build_chain, FpuParams};
use acsm_core::gibbs::GENERATOR_ID;
use acsm_core::moments::MomentSequence;
use acsm_core::reference::sech_moments;
use tempfile::TempDir;

fn acsm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_acsm")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn config(n: usize, alpha: f64, t: f64, n_samples: usize, observable: &str, max_order: usize, extra: &str) -> String {
    format!(
        r#"{{"model": {{"n_particles": {n}, "alpha": {alpha}, "beta": {alpha}, "temperature": {t}}},
            "seed": 1, "n_samples": {n_samples}, "observable": {observable}, "max_order": {max_order}{extra}}}"#
    )
}

const Q0: &str = r#"{"polynomial": {"terms": [{"coef": 1.0, "factors": [[{"Q": 0}, 1]]}]}}"#;

fn moment_file(dir: &Path, c: Vec<f64>) -> String {
    let p = dir.join("fixture.json");
    write_moment_file(&p, &MomentFile::new(MomentSequence::exact("fixture", c), Provenance::default())).unwrap();
    p.to_str().unwrap().to_string()
}

fn sha(path: &Path) -> String {
    acsm_cli::config::file_digest(path).unwrap()
}

#[test]
fn sample_file_length_and_determinism() {
    let dir = TempDir::new().unwrap();
    let cfg_text = config(40, 0.25, 1e-5, 100_000, "\"etilde\"", 4, "");
    let cfg = write(dir.path(), "c.json", &cfg_text);
    let out = dir.path().join("a");
    let o = acsm(&["sample", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let parsed = RunConfig::parse(&cfg_text).unwrap();
    let header = SampleHeader {
        params: parsed.model,
        seed: 1,
        n_samples: 100_000,
        generator_id: GENERATOR_ID.into(),
        provenance: parsed.provenance(),
    };
    let len = std::fs::metadata(out.join("samples.acsm")).unwrap().len() as usize;
    assert_eq!(len, sample_header_len(&header).unwrap() + 2 * 40 * 100_000 * 8);

    let small = write(dir.path(), "s.json", &config(8, 0.25, 1e-3, 500, "\"e\"", 2, ""));
    let (b, c) = (dir.path().join("b"), dir.path().join("c"));
    for d in [&b, &c] {
        assert_eq!(code(&acsm(&["sample", "--config", &small, "--out", d.to_str().unwrap()])), 0);
    }
    assert_eq!(sha(&b.join("samples.acsm")), sha(&c.join("samples.acsm")));
}

#[test]
fn invalid_configs_exit_two() {
    let dir = TempDir::new().unwrap();
    let zero = write(dir.path(), "z.json", &config(0, 0.25, 1e-3, 100, "\"e\"", 2, ""));
    let o = acsm(&["sample", "--config", &zero, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("n_particles"));
    let unknown = write(dir.path(), "u.json", &config(4, 0.25, 1e-3, 100, "\"e\"", 2, r#", "colour": 1"#));
    assert_eq!(code(&acsm(&["sample", "--config", &unknown])), 2);
    assert_eq!(code(&acsm(&["reproduce", "fig9"])), 2);
    assert_eq!(code(&acsm(&["reproduce", "fig1", "--scale", "huge"])), 2);
}

#[test]
fn harmonic_moments_match_closed_form() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "h.json", &config(1, 0.0, 1.0, 20_000, Q0, 6, ""));
    let out = dir.path().to_str().unwrap();
    assert_eq!(code(&acsm(&["sample", "--config", &cfg, "--out", out])), 0);
    let samples = dir.path().join("samples.acsm");
    let o = acsm(&["moments", "--config", &cfg, "--samples", samples.to_str().unwrap(), "--out", out]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("moments.json")).unwrap();
    let file = acsm_core::formats::parse_moment_file(&text).unwrap();
    let digest = RunConfig::load(Path::new(&cfg)).unwrap().digest();
    assert_eq!(file.provenance.config_digest, digest);
    let w = build_chain(FpuParams::new(1, 0.0, 0.0, 1.0).unwrap()).unwrap().max_frequency();
    for (n, (c, s)) in file.moments.c.iter().zip(&file.moments.stderr).enumerate() {
        let exact = w.powi(2 * n as i32 - 2);
        assert!((c - exact).abs() <= 3.0 * s, "c_{n} = {c} vs {exact} +- {s}");
    }
}

#[test]
fn order_beyond_jet_cap_is_clean_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.json", &config(4, 0.25, 1e-3, 200, "\"e\"", 25, ""));
    let o = acsm(&["moments", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("order cap 24"), "{}", stderr(&o));
}

#[test]
fn malformed_moment_files_are_schema_errors() {
    let dir = TempDir::new().unwrap();
    let bad = write(dir.path(), "bad.json", r#"{"format": "acsm-moments", "version": 1, "moments": {}}"#);
    let out = dir.path().to_str().unwrap();
    assert_eq!(code(&acsm(&["poles", "--moments", &bad, "--out", out])), 2);
    assert_eq!(code(&acsm(&["criteria", "--moments", &bad, "--out", out])), 2);
    let garbage = write(dir.path(), "g.csv", "order,k\n1,x\n");
    assert_eq!(code(&acsm(&["criteria", "--poles", &garbage, "--out", out])), 2);
    assert_eq!(code(&acsm(&["criteria", "--out", out])), 2);
}

#[test]
fn two_atom_poles_are_recovered() {
    let dir = TempDir::new().unwrap();
    let c = (0..4).map(|m| 0.7 + 0.3 * 4f64.powi(m)).collect();
    let m = moment_file(dir.path(), c);
    let o = acsm(&["poles", "--moments", &m, "--order", "2", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let ladder = parse_pole_csv(&std::fs::read_to_string(dir.path().join("poles.csv")).unwrap()).unwrap();
    let top = ladder.last().unwrap();
    assert_eq!(top.order, 2);
    for (at, (w, r)) in top.atoms.iter().zip([(1.0, 0.7), (2.0, 0.3)]) {
        assert!((at.omega - w).abs() < 1e-12 * w);
        assert!((at.rho - r).abs() < 1e-12 * r);
    }
    assert!(dir.path().join("isolation.json").exists());
}

#[test]
fn negative_determinant_exits_three_with_orders() {
    let dir = TempDir::new().unwrap();
    let mut c: Vec<f64> = (0..6).map(|m| 0.7 + 0.3 * 4f64.powi(m)).collect();
    c[2] = 0.5 * c[1] * c[1] / c[0];
    let m = moment_file(dir.path(), c);
    let o = acsm(&["poles", "--moments", &m, "--order", "3", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    let err = stderr(&o);
    assert!(err.contains("first failing order 2"), "{err}");
    assert!(err.contains("maximal valid order 1"), "{err}");
    let ladder = parse_pole_csv(&std::fs::read_to_string(dir.path().join("poles.csv")).unwrap()).unwrap();
    assert_eq!(ladder.len(), 1);
}

#[test]
fn sech_fixture_has_four_poles_at_order_four() {
    let dir = TempDir::new().unwrap();
    let m = moment_file(dir.path(), sech_moments(1.0, 7).unwrap().c);
    let o = acsm(&["poles", "--moments", &m, "--order", "4", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (_, rows) = read_csv(&dir.path().join("poles.csv")).unwrap();
    assert_eq!(rows.iter().filter(|r| r[0] == 4.0).count(), 4);
}

#[test]
fn criteria_signatures() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();
    let atom = moment_file(dir.path(), (0..9).map(|n| 2.25f64.powi(n)).collect());
    let o = acsm(&["criteria", "--moments", &atom, "--out", out]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("signature: atomic"));
    let sech = moment_file(dir.path(), sech_moments(1.0, 8).unwrap().c);
    let o = acsm(&["criteria", "--moments", &sech, "--out", out]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("signature: smooth"));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("criteria.json")).unwrap()).unwrap();
    assert_eq!(json["report"]["signature"], "smooth");
}

#[test]
fn verify_harmonic_and_integrator_errors() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();
    let ok = write(
        dir.path(),
        "v.json",
        &config(1, 0.0, 1.0, 20_000, Q0, 6, r#", "verify": {"t_max": 6.0, "stride": 20, "orders": [0,1,2,3,4,5,6]}"#),
    );
    let o = acsm(&["verify", "--config", &ok, "--out", out]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("truncation bounds: hold"));
    let (header, rows) = read_csv(&dir.path().join("correlation.csv")).unwrap();
    assert_eq!(header[..3], ["t", "C", "stderr"]);
    assert_eq!(rows.len(), 7);
    let bounds: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("bounds.json")).unwrap()).unwrap();
    assert_eq!(bounds["all_hold"], true);

    let drift = write(
        dir.path(),
        "d.json",
        &config(8, 0.25, 1.0, 200, "\"e\"", 2, r#", "verify": {"t_max": 5.0, "drift_bound": 1e-15, "orders": [0,1], "n_samples": 100}"#),
    );
    let o = acsm(&["verify", "--config", &drift, "--out", out]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    assert!(stderr(&o).contains("energy drift"));

    let grid = write(
        dir.path(),
        "g.json",
        &config(8, 0.25, 1.0, 200, "\"e\"", 2, r#", "verify": {"t_grid": [0.0, 0.0123], "dt": 0.01, "orders": [0], "n_samples": 100}"#),
    );
    let o = acsm(&["verify", "--config", &grid, "--out", out]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("not a multiple"));
}

#[test]
fn outputs_embed_digest_and_version() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.json", &config(4, 0.25, 1e-3, 2000, "\"etilde\"", 4, ""));
    let out = dir.path().to_str().unwrap();
    assert_eq!(code(&acsm(&["moments", "--config", &cfg, "--out", out])), 0);
    let moments = dir.path().join("moments.json");
    let _ = acsm(&["poles", "--moments", moments.to_str().unwrap(), "--order", "2", "--out", out]);
    let poles = std::fs::read_to_string(dir.path().join("poles.csv")).unwrap();
    let digest = RunConfig::load(Path::new(&cfg)).unwrap().digest();
    assert!(poles.contains(&format!("# config_digest={digest}")));
    assert!(poles.contains(&format!("# code_version={}", env!("CARGO_PKG_VERSION"))));
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        &config(8, 0.25, 0.01, 3000, "\"etilde\"", 6, r#", "verify": {"t_max": 10.0, "stride": 40, "orders": [0,1,2], "n_samples": 600}"#),
    );
    let mut digests = Vec::new();
    for k in ["1", "3"] {
        let out = dir.path().join(format!("t{k}"));
        let out = out.to_str().unwrap();
        assert_eq!(code(&acsm(&["--threads", k, "--out", out, "moments", "--config", &cfg])), 0);
        assert_eq!(code(&acsm(&["--threads", k, "--out", out, "verify", "--config", &cfg])), 0);
        digests.push(["moments.json", "correlation.csv", "bounds.json"].map(|f| sha(&Path::new(out).join(f))));
    }
    assert_eq!(digests[0], digests[1]);
}
