use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use biphoton::scenario::{read_map, Manifest, MAP_MAGIC};
use sha2::{Digest, Sha256};

fn preset(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join(format!("presets/{name}.toml"))
}

fn biphoton(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_biphoton"))
        .args(args)
        .output()
        .expect("binary starts")
}

fn run_preset(name: &str, dir: &Path, extra: &[&str]) -> Output {
    let config = preset(name);
    let mut args = vec![
        "run",
        config.to_str().unwrap(),
        "--output-dir",
        dir.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    biphoton(&args)
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const SMALL: &str = r#"
name = "small"
[grid]
n = 16
dims = 1
pitch_um = 5.0
[pump]
fwhm_um = 30.0
[crystal]
length_mm = 0.5
slices = 4
pm_type = "type1_degenerate"
wavelength_pump_nm = 355.0
wavelength_down_nm = 710.0
refractive_index = 1.65
[[signal_arm]]
kind = "scatterer"
plane = "nf"
[[signal_arm]]
kind = "lens"
focal_mm = 100.0
[scatterers]
enabled = "nf"
nf_seed = 3
"#;

#[test]
fn fig5a_manifest_lists_checksummed_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_preset("fig5a", dir.path(), &[]);
    assert!(out.status.success(), "{}", stderr(&out));

    let manifest: Manifest =
        serde_json::from_slice(&fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest.name, "fig5a");
    assert!(manifest.total_weight > 0.0);
    assert!((manifest.pairs_ratio["sum"] - 0.999947).abs() < 1e-3);
    assert!((manifest.pairs_ratio["difference"] - 0.161920).abs() < 1e-3);
    assert!(manifest.peak_std.contains_key("sum"));

    let mut listed: Vec<&str> = manifest.files.iter().map(|f| f.path.as_str()).collect();
    listed.sort();
    let mut on_disk: Vec<String> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n != "manifest.json")
        .collect();
    on_disk.sort();
    assert_eq!(listed, on_disk);
    assert_eq!(listed.len(), 9);
    for file in &manifest.files {
        let bytes = fs::read(dir.path().join(&file.path)).unwrap();
        assert_eq!(bytes.len() as u64, file.bytes);
        assert_eq!(
            hex::encode(Sha256::digest(&bytes)),
            file.sha256,
            "{}",
            file.path
        );
    }
}

#[test]
fn map_files_follow_the_documented_layout() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_preset("fig5a", dir.path(), &[]).status.success());

    let header = fs::read_to_string(dir.path().join("fig5a_sum.hdr")).unwrap();
    let mut lines = header.lines();
    assert_eq!(lines.next(), Some(MAP_MAGIC));
    let fields: Vec<&str> = lines.next().unwrap().split_whitespace().collect();
    assert_eq!(fields[..2], ["1", "64"]);
    assert_eq!(fields[3], "sum");
    let pitch: f64 = fields[2].parse().unwrap();
    assert!((pitch - 710e-9 * 0.1 / (64.0 * 4e-6)).abs() < 1e-15);

    let raw = fs::read(dir.path().join("fig5a_sum.bin")).unwrap();
    assert_eq!(raw.len(), 64 * 8);
    let values: Vec<f64> = raw
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect();
    assert!((values.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    let peak = values.iter().cloned().fold(0.0, f64::max);
    assert_eq!(values[32], peak);

    let stored = read_map(&dir.path().join("fig5a_sum.bin")).unwrap();
    assert_eq!(stored.values, values);
    assert_eq!((stored.rows, stored.cols), (1, 64));

    let pgm = fs::read(dir.path().join("fig5a_joint.pgm")).unwrap();
    let head = b"P5\n64 64\n255\n";
    assert_eq!(&pgm[..head.len()], head);
    assert_eq!(pgm.len(), head.len() + 64 * 64);
    assert!(pgm[head.len()..].contains(&255));
}

#[test]
fn serial_runs_are_byte_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(run_preset("fig5c", a.path(), &[]).status.success());
    assert!(run_preset("fig5c", b.path(), &["--serial"])
        .status
        .success());
    for map in ["sum", "difference", "joint"] {
        let file = format!("fig5c_{map}.bin");
        assert_eq!(
            fs::read(a.path().join(&file)).unwrap(),
            fs::read(b.path().join(&file)).unwrap()
        );
    }
}

#[test]
fn seed_override_changes_the_speckle_deterministically() {
    let base = tempfile::tempdir().unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(run_preset("fig5c", base.path(), &[]).status.success());
    assert!(run_preset("fig5c", a.path(), &["--seed-override", "99"])
        .status
        .success());
    assert!(run_preset("fig5c", b.path(), &["--seed-override", "99"])
        .status
        .success());
    let read = |d: &Path| fs::read(d.join("fig5c_sum.bin")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
    assert_ne!(read(a.path()), read(base.path()));
}

#[test]
fn parallel_threads_match_serial_output() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "small.toml", SMALL);
    let serial = dir.path().join("serial");
    let parallel = dir.path().join("parallel");
    let run = |out: &Path, extra: &[&str]| {
        let mut args = vec![
            "run",
            config.to_str().unwrap(),
            "--output-dir",
            out.to_str().unwrap(),
        ];
        args.extend_from_slice(extra);
        biphoton(&args)
    };
    assert!(run(&serial, &["--serial"]).status.success());
    assert!(run(&parallel, &["--threads", "3"]).status.success());
    for map in ["sum", "difference"] {
        let file = format!("small_{map}.bin");
        assert_eq!(
            fs::read(serial.join(&file)).unwrap(),
            fs::read(parallel.join(&file)).unwrap()
        );
    }
}

#[test]
fn missing_pump_width_exits_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "bad.toml",
        &SMALL.replace("fwhm_um = 30.0\n", ""),
    );
    let out = biphoton(&[
        "run",
        config.to_str().unwrap(),
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("fwhm_um"), "{}", stderr(&out));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        SMALL.replace("nf_seed = 3\n", ""),
        SMALL.replace("kind = \"lens\"", "kind = \"prism\""),
        SMALL.replace("enabled = \"nf\"", "enabled = \"ff\"\nff_seed = 4"),
        format!("{SMALL}\nunexpected = 1\n"),
    ];
    for (k, text) in cases.iter().enumerate() {
        let config = write_config(dir.path(), &format!("c{k}.toml"), text);
        let out = biphoton(&[
            "run",
            config.to_str().unwrap(),
            "--output-dir",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(2), "case {k}: {}", stderr(&out));
    }
    let out = biphoton(&["run", "/definitely/not/here.toml"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn assembly_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        // Near-field scatterer placed after the lens.
        SMALL.replace(
            "[[signal_arm]]\nkind = \"scatterer\"\nplane = \"nf\"\n[[signal_arm]]\nkind = \"lens\"\nfocal_mm = 100.0\n",
            "[[signal_arm]]\nkind = \"lens\"\nfocal_mm = 100.0\n[[signal_arm]]\nkind = \"scatterer\"\nplane = \"nf\"\n",
        ),
        SMALL.replace("n = 16", "n = 7"),
        SMALL.replace("slices = 4", "slices = 0"),
    ];
    for (k, text) in cases.iter().enumerate() {
        let config = write_config(dir.path(), &format!("a{k}.toml"), text);
        let out = biphoton(&[
            "run",
            config.to_str().unwrap(),
            "--output-dir",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(3), "case {k}: {}", stderr(&out));
    }
}

#[test]
fn guard_violations_exit_4() {
    let out = biphoton(&["oracle-check", preset("fig5a").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4), "{}", stderr(&out));
    let out = biphoton(&["bench", "--n", "128", "--m", "1", "--repeats", "1"]);
    assert_eq!(out.status.code(), Some(4), "{}", stderr(&out));
    assert!(stderr(&out).contains("GiB"));
}

#[test]
fn zero_pump_exits_5() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "zero.toml",
        &SMALL.replace("fwhm_um = 30.0", "fwhm_um = 30.0\namplitude = 0.0"),
    );
    let out = biphoton(&[
        "run",
        config.to_str().unwrap(),
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(5), "{}", stderr(&out));
}

#[test]
fn oracle_check_reports_agreement() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "tiny.toml", &SMALL.replace("n = 16", "n = 8"));
    let out = biphoton(&["oracle-check", config.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let errors: Vec<f64> = text
        .lines()
        .map(|l| l.split_whitespace().last().unwrap().parse().unwrap())
        .collect();
    assert_eq!(errors.len(), 2);
    assert!(errors[0] < 1e-10 && errors[1] < 1e-12, "{text}");
}

#[test]
fn bench_writes_a_timing_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = biphoton(&[
        "bench",
        "--n",
        "8",
        "12",
        "--m",
        "1",
        "2",
        "--repeats",
        "1",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("bench.json")).unwrap()).unwrap();
    assert_eq!(report["cases"].as_array().unwrap().len(), 4);
    assert!(report["n_slopes"]["1"].as_f64().unwrap().is_finite());
}
