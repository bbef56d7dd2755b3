use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use trackcount::raster::GrayImage;
use trackcount::report::{read_counts_csv, CountRow};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_trackcount"));
    c.env_remove("TRACKCOUNT_CONFIG");
    c
}

fn run(args: &[&str], cwd: &Path) -> Output {
    bin().args(args).current_dir(cwd).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn rows(o: &Output) -> Vec<CountRow> {
    assert!(o.status.success(), "{}", stderr(o));
    read_counts_csv(o.stdout.as_slice()).unwrap()
}

fn write_counts(path: &Path, counts: &[u64]) {
    let mut s = String::from("image,n_tracks,n_regions,elapsed_s\n");
    for (i, c) in counts.iter().enumerate() {
        s.push_str(&format!("img{i:03}.png,{c},{c},0.01\n"));
    }
    fs::write(path, s).unwrap();
}

/// `n` equal per-image counts summing to `total`, spread as evenly as possible.
fn spread(total: u64, n: u64) -> Vec<u64> {
    (0..n).map(|i| total / n + u64::from(i < total % n)).collect()
}

fn synth(dir: &Path, seed: u64) -> PathBuf {
    let o = run(&["synth", "--seed", &seed.to_string(), "--out", "."], dir);
    assert!(o.status.success(), "{}", stderr(&o));
    dir.join(format!("synth_{seed}.png"))
}

#[test]
fn blank_image_counts_zero() {
    let dir = tempfile::tempdir().unwrap();
    GrayImage::filled(64, 64, 200).unwrap().save(&dir.path().join("blank.png")).unwrap();
    let o = run(&["count", "blank.png", "--overlay", "--out", "ov"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let r = read_counts_csv(fs::File::open(dir.path().join("ov/blank.csv")).unwrap()).unwrap();
    assert_eq!(r[0].n_tracks, 0);
    assert!(dir.path().join("ov/blank_overlay.png").exists());
}

#[test]
fn synthetic_seed_7_counts_12() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), 7);
    let truth: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("synth_7.json")).unwrap()).unwrap();
    assert_eq!(truth["n_tracks"], 12);
    assert_eq!(truth["endpoints"].as_array().unwrap().len(), 12);
    let r = rows(&run(&["count", "synth_7.png"], dir.path()));
    assert_eq!((r[0].image.as_str(), r[0].n_tracks), ("synth_7.png", 12));
}

#[test]
fn count_json_report() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), 3);
    let o = run(&["count", "synth_3.png", "--json", "--method", "yen"], dir.path());
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["image"], "synth_3.png");
    assert_eq!(v["config"]["method"], "yen");
    assert_eq!(v["config"]["window"], serde_json::json!([7, 7]));
    let per_region: u64 = v["regions"].as_array().unwrap().iter().map(|r| r["n_tracks"].as_u64().unwrap()).sum();
    assert_eq!(v["total_tracks"].as_u64().unwrap(), per_region);
}

#[test]
fn batch_is_additive_and_ordered() {
    let dir = tempfile::tempdir().unwrap();
    let src = synth(dir.path(), 11);
    let single = rows(&run(&["count", src.to_str().unwrap()], dir.path()))[0].n_tracks;
    let imgs = dir.path().join("imgs");
    fs::create_dir(&imgs).unwrap();
    for name in ["c.png", "a.png", "b.png"] {
        fs::copy(&src, imgs.join(name)).unwrap();
    }
    fs::write(imgs.join("notes.txt"), "ignored").unwrap();
    let o = run(&["batch", "imgs"], dir.path());
    let r = rows(&o);
    let names: Vec<_> = r.iter().map(|r| r.image.as_str()).collect();
    assert_eq!(names, ["a.png", "b.png", "c.png"]);
    assert_eq!(r.iter().map(|r| r.n_tracks).sum::<u64>(), 3 * single);
    assert!(r.iter().all(|r| r.elapsed_s >= 0.0));
    assert!(stderr(&o).contains(&format!("N = {}", 3 * single)));
}

#[test]
fn batch_reports_bad_files_and_fails() {
    let dir = tempfile::tempdir().unwrap();
    let src = synth(dir.path(), 2);
    let imgs = dir.path().join("imgs");
    fs::create_dir(&imgs).unwrap();
    fs::copy(&src, imgs.join("good.png")).unwrap();
    fs::write(imgs.join("broken.png"), b"not a png").unwrap();
    let o = run(&["batch", "imgs", "--out", "res"], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("broken.png"));
    let r = read_counts_csv(fs::File::open(dir.path().join("res/counts.csv")).unwrap()).unwrap();
    assert_eq!(r.len(), 1);
    assert_eq!(r[0].image, "good.png");
}

#[test]
fn empty_directory_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("none")).unwrap();
    let o = run(&["batch", "none"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_image_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["count", "nope.png"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nope.png"));
}

#[test]
fn gqr_identical_tables_give_one() {
    let dir = tempfile::tempdir().unwrap();
    write_counts(&dir.path().join("a.csv"), &[40, 44, 47, 39, 50]);
    let o = run(&["gqr", "--ed", "a.csv", "--is", "a.csv", "--area", "1e-4"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("GQR = 1.00 ±"));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["gqr"], 1.0);
}

#[test]
fn gqr_yen_row() {
    let dir = tempfile::tempdir().unwrap();
    write_counts(&dir.path().join("mica.csv"), &spread(2407, 49));
    write_counts(&dir.path().join("apatite.csv"), &spread(2484, 30));
    let o = run(&["gqr", "--ed", "mica.csv", "--is", "apatite.csv", "--area", "1.2e-4"], dir.path());
    assert!(stderr(&o).contains("GQR = 0.59 ± 0.02"), "{}", stderr(&o));
}

#[test]
fn gqr_needs_area() {
    let dir = tempfile::tempdir().unwrap();
    write_counts(&dir.path().join("a.csv"), &[1, 2, 3, 4, 5]);
    let o = run(&["gqr", "--ed", "a.csv", "--is", "a.csv"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("area"));
}

#[test]
fn schema_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("bad.csv"),
        "image,n_tracks,n_regions,elapsed_s\na,1,1,0.1\nb,x,1,0.1\n",
    )
    .unwrap();
    let o = run(&["kstest", "bad.csv"], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn kstest_ignores_row_order() {
    let dir = tempfile::tempdir().unwrap();
    let counts = [41, 44, 39, 50, 47, 43, 45, 38, 44, 46];
    let mut reversed = counts;
    reversed.reverse();
    write_counts(&dir.path().join("a.csv"), &counts);
    write_counts(&dir.path().join("b.csv"), &reversed);
    let a = run(&["kstest", "a.csv"], dir.path());
    let b = run(&["kstest", "b.csv"], dir.path());
    assert!(a.status.success());
    assert_eq!(stdout(&a), stdout(&b));
    let v: serde_json::Value = serde_json::from_str(&stdout(&a)).unwrap();
    assert!(v["d"].as_f64().unwrap() >= 0.0);
    assert!(v["p_value"].as_f64().unwrap() <= 1.0);
}

#[test]
fn age_echoes_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &["age", "--lambda", "1.55125e-10", "--c238", "0.992745", "--gqr", "0.57", "--rho-s", "0", "--rho-i", "3.7e5"],
        dir.path(),
    );
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["ma"], 0.0);
    assert_eq!(v["params"]["lambda_f"], 8.5e-17);
    assert_eq!(v["params"]["r_u"], 3.2e-8);
}

#[test]
fn age_names_missing_parameter() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["age", "--lambda", "1.55e-10", "--gqr", "0.57", "--rho-s", "1e5", "--rho-i", "3.7e5"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--c238"));
}

#[test]
fn config_file_and_env_with_flags_winning() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), 5);
    fs::write(dir.path().join("tc.toml"), "method = \"otsu\"\nmin_size = 30\n").unwrap();
    let json = |o: Output| -> serde_json::Value {
        assert!(o.status.success(), "{}", stderr(&o));
        serde_json::from_str(&stdout(&o)).unwrap()
    };
    let v = json(run(&["count", "synth_5.png", "--json", "--config", "tc.toml"], dir.path()));
    assert_eq!(v["config"]["method"], "otsu");
    assert_eq!(v["config"]["min_size"], 30);

    let o = bin()
        .args(["count", "synth_5.png", "--json", "--method", "li"])
        .env("TRACKCOUNT_CONFIG", "tc.toml")
        .current_dir(dir.path())
        .output()
        .unwrap();
    let v = json(o);
    assert_eq!(v["config"]["method"], "li");
    assert_eq!(v["config"]["min_size"], 30);
}

#[test]
fn bad_window_flag_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["count", "x.png", "--window", "6x6"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}
