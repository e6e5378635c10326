use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use interreflect::image::write_ppm16;
use interreflect::synthetic::demo_scene;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_interreflect"));
    c.env_remove("INTERREFLECT_DATASET");
    c
}

fn mini() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/mini")
}

fn demo_json() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/demo/demo.json")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn simulate(out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg("simulate")
        .arg("--dataset")
        .arg(mini())
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn stats_row(text: &str) -> Vec<f64> {
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "mean,median,trimean,best25,worst25,p95,max,min,valid,invalid"
    );
    lines
        .next()
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect()
}

#[test]
fn pure_simulation_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--method", "pure", "--trials", "100", "--seed", "7"];
    let a = simulate(&dir.path().join("a"), &args);
    let b = simulate(&dir.path().join("b"), &args);
    assert!(a.status.success(), "{}", stderr(&a));
    assert!(b.status.success());
    for f in ["samples.csv", "stats.csv", "histogram.csv"] {
        let x = fs::read(dir.path().join("a").join(f)).unwrap();
        assert_eq!(x, fs::read(dir.path().join("b").join(f)).unwrap(), "{f}");
        assert!(!x.contains(&b'\r'));
    }
    let samples = fs::read_to_string(dir.path().join("a/samples.csv")).unwrap();
    assert_eq!(samples.lines().count(), 1 + 5 * 100);
}

#[test]
fn colorline_stats_are_ordered_and_printed() {
    let dir = tempfile::tempdir().unwrap();
    let o = simulate(
        dir.path(),
        &["--method", "gm", "--lines", "5", "--trials", "30"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let file = fs::read_to_string(dir.path().join("stats.csv")).unwrap();
    assert_eq!(stdout(&o), file);
    let v = stats_row(&file);
    let (median, max, min) = (v[1], v[6], v[7]);
    assert!(min <= median && median <= max);
    assert_eq!(v[8] + v[9], 150.0);

    let hist = fs::read_to_string(dir.path().join("histogram.csv")).unwrap();
    let total: usize = hist
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse::<usize>().unwrap())
        .sum();
    assert_eq!(total as f64, v[8]);
}

#[test]
fn stats_reproduces_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    assert!(
        simulate(&sim, &["--method", "ls", "--lines", "3", "--trials", "20"])
            .status
            .success()
    );
    let out = dir.path().join("again");
    let o = bin()
        .args(["stats", "--samples"])
        .arg(sim.join("samples.csv"))
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let original = fs::read(sim.join("stats.csv")).unwrap();
    assert_eq!(fs::read(out.join("stats.csv")).unwrap(), original);
    assert_eq!(o.stdout, original);
    assert_eq!(
        fs::read(out.join("histogram.csv")).unwrap(),
        fs::read(sim.join("histogram.csv")).unwrap()
    );
}

#[test]
fn stats_of_hand_written_csv() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s.csv");
    fs::write(
        &p,
        "illuminant,trial,error_deg,resamples,valid\na,0,4,0,true\na,1,1,0,true\nb,0,3,2,true\nb,1,NaN,100,false\nb,2,2,0,true\n",
    )
    .unwrap();
    let o = bin()
        .arg("stats")
        .arg("--samples")
        .arg(&p)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    // mean 2.5, median 2, trimean (1 + 4 + 3)/4, best/worst quarter 1 and 4, p95 4
    assert_eq!(
        stats_row(&stdout(&o)),
        vec![2.5, 2.0, 2.0, 1.0, 4.0, 4.0, 4.0, 1.0, 4.0, 1.0]
    );
}

#[test]
fn malformed_samples_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    for (name, body) in [
        ("header.csv", "a,b\n1,2\n"),
        (
            "value.csv",
            "illuminant,trial,error_deg,resamples,valid\na,0,x,0,true\n",
        ),
        (
            "range.csv",
            "illuminant,trial,error_deg,resamples,valid\na,0,200,0,true\n",
        ),
        ("empty.csv", "illuminant,trial,error_deg,resamples,valid\n"),
    ] {
        let p = dir.path().join(name);
        fs::write(&p, body).unwrap();
        let o = bin()
            .arg("stats")
            .arg("--samples")
            .arg(&p)
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(2), "{name}: {}", stderr(&o));
    }
}

#[test]
fn large_samples_file_is_fast() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("big.csv");
    let mut body = String::from("illuminant,trial,error_deg,resamples,valid\n");
    for i in 0..1_000_000u64 {
        let x = (i.wrapping_mul(2_654_435_761) % 100_000) as f64 / 10_000.0;
        body.push_str(&format!("ill{},{},{x},0,true\n", i % 102, i / 102));
    }
    fs::write(&p, body).unwrap();
    let start = Instant::now();
    let o = bin()
        .arg("stats")
        .arg("--samples")
        .arg(&p)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    // generous: unoptimized builds are several times slower than release
    assert!(start.elapsed().as_secs() < 60, "{:?}", start.elapsed());
    assert_eq!(stats_row(&stdout(&o))[8], 1e6);
}

#[test]
fn dataset_from_env_and_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "method = \"gm\"\nlines = 3\ntrials = 4\nseed = 11\n[solver]\nmax_iterations = 200\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = bin()
        .env("INTERREFLECT_DATASET", mini())
        .arg("simulate")
        .arg("--config")
        .arg(&cfg)
        .args(["--trials", "6", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    // the flag overrides the config's trial count
    let samples = fs::read_to_string(out.join("samples.csv")).unwrap();
    assert_eq!(samples.lines().count(), 1 + 5 * 6);
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin().args(["simulate", "--trials", "3"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("INTERREFLECT_DATASET"));

    let o = simulate(dir.path(), &["--method", "gm", "--lines", "1"]);
    assert_eq!(o.status.code(), Some(2));

    let o = simulate(dir.path(), &["--method", "median"]);
    assert_eq!(o.status.code(), Some(2));

    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "trails = 3\n").unwrap();
    let o = simulate(dir.path(), &["--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let help = bin().arg("--help").output().unwrap();
    assert!(help.status.success());
    assert!(stdout(&help).contains("Exit codes"));
}

#[test]
fn dataset_errors_exit_3_without_leaving_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["simulate", "--dataset", "/nonexistent/dataset", "--out"])
        .arg(dir.path().join("x"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));

    // Broken CSV
    let bad = dir.path().join("bad");
    fs::create_dir(&bad).unwrap();
    for f in ["illuminants.csv", "reflectances.csv", "sensor.csv"] {
        fs::copy(mini().join(f), bad.join(f)).unwrap();
    }
    fs::write(bad.join("sensor.csv"), "wavelength_nm,red,green\n400,1,1\n").unwrap();
    let o = bin()
        .arg("simulate")
        .arg("--dataset")
        .arg(&bad)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));

    // Surfaces that reflect nothing the sensor sees: every trial is invalid,
    // so the run fails after sampling and must not leave a samples file.
    let dark = dir.path().join("dark");
    fs::create_dir(&dark).unwrap();
    fs::copy(mini().join("illuminants.csv"), dark.join("illuminants.csv")).unwrap();
    fs::copy(mini().join("sensor.csv"), dark.join("sensor.csv")).unwrap();
    let mut refl = String::from("wavelength_nm,a,b\n");
    for nm in (380..=780).step_by(4) {
        refl.push_str(&format!("{nm},0,0\n"));
    }
    fs::write(dark.join("reflectances.csv"), refl).unwrap();
    let out = dir.path().join("dark-out");
    let o = bin()
        .args(["simulate", "--method", "pure", "--trials", "2", "--dataset"])
        .arg(&dark)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(!out.join("samples.csv").exists());
    assert!(!out.join("stats.csv").exists());
}

fn estimate(extra: &[&str], out: &Path) -> Output {
    bin()
        .arg("estimate")
        .args(extra)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn field(text: &str, key: &str) -> Vec<f64> {
    let line = text
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}: ")))
        .unwrap_or_else(|| panic!("no {key} in {text}"));
    line.split_whitespace()
        .map(|v| v.parse().unwrap())
        .collect()
}

#[test]
fn estimate_prints_what_it_writes() {
    let dir = tempfile::tempdir().unwrap();
    let o = estimate(&["--annotation", demo_json().to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    let est = &json["estimate"];
    let arr = |v: &serde_json::Value, keys: &[&str]| {
        keys.iter()
            .map(|k| v[k].as_f64().unwrap())
            .collect::<Vec<_>>()
    };
    assert_eq!(
        field(&text, "illuminant"),
        arr(&est["illuminant"], &["r", "g", "b"])
    );
    assert_eq!(
        field(&text, "intersection"),
        arr(&est["intersection"], &["r", "g"])
    );
    let residuals: Vec<f64> = est["per_line_residuals"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert_eq!(field(&text, "residuals"), residuals);
    assert_eq!(
        field(&text, "ground_truth"),
        arr(&json["ground_truth"], &["r", "g", "b"])
    );
    let err = json["angular_error_deg"].as_f64().unwrap();
    assert_eq!(field(&text, "angular_error_deg"), vec![err]);
    assert!(err < 1e-6);
    assert!(text.contains("method: gm"));
}

#[test]
fn two_triples_give_the_same_estimate_for_both_methods() {
    let dir = tempfile::tempdir().unwrap();
    let ann = demo_json();
    let gm = estimate(
        &["--annotation", ann.to_str().unwrap(), "--method", "gm"],
        &dir.path().join("gm"),
    );
    let ls = estimate(
        &["--annotation", ann.to_str().unwrap(), "--method", "ls"],
        &dir.path().join("ls"),
    );
    assert!(gm.status.success() && ls.status.success());
    assert_eq!(
        field(&stdout(&gm), "illuminant"),
        field(&stdout(&ls), "illuminant")
    );
}

#[test]
fn missing_patch_exits_2_with_its_name() {
    let dir = tempfile::tempdir().unwrap();
    let mut ann: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(demo_json()).unwrap()).unwrap();
    ann["interreflections"][1][2] = "nowhere_patch".into();
    ann["image"] = demo_json()
        .with_file_name("demo.ppm")
        .to_str()
        .unwrap()
        .into();
    let p = dir.path().join("ann.json");
    fs::write(&p, serde_json::to_string(&ann).unwrap()).unwrap();
    let o = estimate(
        &["--annotation", p.to_str().unwrap()],
        &dir.path().join("out"),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nowhere_patch"));
}

#[test]
fn estimation_failure_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    // Every patch clips once the exposure is raised.
    let scene = demo_scene("bright.ppm").unwrap();
    let bright = scene.image.scaled(1e4).unwrap();
    write_ppm16(dir.path().join("bright.ppm"), &bright).unwrap();
    let p = dir.path().join("ann.json");
    fs::write(&p, scene.annotation.to_json().unwrap()).unwrap();
    let out = dir.path().join("out");
    let o = estimate(&["--annotation", p.to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(stderr(&o).contains("insufficient"));
    assert!(!out.join("report.json").exists());
}

#[test]
fn unreadable_image_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("broken.ppm");
    fs::write(&img, b"P6\n4 4\n255\n\x01\x02").unwrap();
    let o = estimate(
        &[
            "--annotation",
            demo_json().to_str().unwrap(),
            "--image",
            img.to_str().unwrap(),
        ],
        &dir.path().join("out"),
    );
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}
