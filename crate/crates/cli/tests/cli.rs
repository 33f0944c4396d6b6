use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use levelcurve::harness::gen_synthetic;
use levelcurve::harness::preset;
use levelcurve::netpbm::{read_image, read_mask, Image};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_levelcurve"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn gen_fig4_1_tones() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["gen", "fig4_1", "-o", "img.pgm", "-t", "truth.pgm"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let Image::Gray(img) = read_image(dir.path().join("img.pgm")).unwrap() else {
        panic!("expected a gray image");
    };
    assert_eq!(img.dims(), (123, 80));
    let mut tones: Vec<u8> = img.data().iter().map(|&v| v as u8).collect();
    tones.sort_unstable();
    tones.dedup();
    assert_eq!(tones, vec![0, 100, 150, 200]);
    let truth = read_mask(dir.path().join("truth.pgm")).unwrap();
    assert_eq!(truth, gen_synthetic(&preset("fig4_1").unwrap()).unwrap().1);
}

#[test]
fn score_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(dir.path(), &["gen", "binary64", "-o", "i.pgm", "-t", "t.pgm"])), 0);
    let out = run(dir.path(), &["score", "--mask", "t.pgm", "--truth", "t.pgm"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out).trim(), "1.000000 1.000000 1.000000");
}

#[test]
fn segment_without_init_names_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(dir.path(), &["gen", "binary64", "-o", "i.pgm", "-t", "t.pgm"])), 0);
    let out = run(dir.path(), &["segment", "--model", "gsrpf", "-i", "i.pgm", "-o", "m.pgm"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("--init"), "{}", stderr(&out));
    assert!(!dir.path().join("m.pgm").exists());
}

#[test]
fn validation_and_io_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(dir.path(), &["gen", "binary64", "-o", "i.pgm", "-t", "t.pgm"])), 0);

    let out = run(dir.path(), &["score", "--mask", "missing.pgm", "--truth", "t.pgm"]);
    assert_eq!(code(&out), 2);
    assert_eq!(stderr(&out).lines().count(), 1);

    let bad_rect = ["segment", "--model", "cv", "--init", "60,60,10,10", "-i", "i.pgm", "-o", "m.pgm"];
    assert_eq!(code(&run(dir.path(), &bad_rect)), 1);
    let untrained = ["segment", "--model", "soac", "--init", "20,20,10,10", "-i", "i.pgm", "-o", "m.pgm"];
    assert_eq!(code(&run(dir.path(), &untrained)), 1);
    let bad_model = ["segment", "--model", "snake", "--init", "20,20,10,10", "-i", "i.pgm", "-o", "m.pgm"];
    assert_eq!(code(&run(dir.path(), &bad_model)), 1);
    assert!(!dir.path().join("m.pgm").exists());

    assert_eq!(code(&run(dir.path(), &["gen", "nope", "-o", "x.pgm", "-t", "y.pgm"])), 1);
    assert!(!dir.path().join("x.pgm").exists());

    fs::write(dir.path().join("bad.cfg"), "image = binary64\nmodel = cv\ninit = 1,1,5,5\ncolour = red\n").unwrap();
    let out = run(dir.path(), &["bench", "--config", "bad.cfg", "-o", "r.csv"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("line 4"), "{}", stderr(&out));
    assert!(!dir.path().join("r.csv").exists());
}

#[test]
fn segment_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(dir.path(), &["gen", "binary64", "-o", "i.pgm", "-t", "t.pgm"])), 0);
    for out_name in ["a.pgm", "b.pgm"] {
        let args = [
            "segment", "--model", "somcv", "--init", "25,22,10,10", "-i", "i.pgm", "-o", out_name, "--truth", "t.pgm",
        ];
        let out = run(dir.path(), &args);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        let scores: Vec<f64> = stdout(&out).split_whitespace().map(|s| s.parse().unwrap()).collect();
        assert!(scores[0] >= 0.99 && scores[1] >= 0.99, "{scores:?}");
    }
    let a = fs::read(dir.path().join("a.pgm")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b.pgm")).unwrap());
}

#[test]
fn trained_map_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(dir.path(), &["gen", "binary64", "-o", "i.pgm", "-t", "t.pgm"])), 0);
    let out = run(dir.path(), &["train-som", "--unsup", "-i", "i.pgm", "-o", "map.txt"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = fs::read_to_string(dir.path().join("map.txt")).unwrap();
    assert!(text.starts_with("som 1 5 1 map\n"));

    let common = ["--model", "somcv", "--init", "25,22,10,10", "-i", "i.pgm"];
    let with_map = run(dir.path(), &[&["segment"], &common[..], &["--map", "map.txt", "-o", "a.pgm"]].concat());
    assert_eq!(code(&with_map), 0, "{}", stderr(&with_map));
    let fresh = run(dir.path(), &[&["segment"], &common[..], &["-o", "b.pgm"]].concat());
    assert_eq!(code(&fresh), 0);
    assert_eq!(fs::read(dir.path().join("a.pgm")).unwrap(), fs::read(dir.path().join("b.pgm")).unwrap());

    let wrong = run(dir.path(), &["segment", "--model", "csomcv", "--init", "25,22,10,10", "-i", "i.pgm", "--map", "map.txt", "-o", "c.pgm"]);
    assert_eq!(code(&wrong), 1);
    assert!(stderr(&wrong).contains("fg"), "{}", stderr(&wrong));
}

#[test]
fn supervised_training_from_masks() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(dir.path(), &["gen", "binary64", "-o", "i.pgm", "-t", "t.pgm"])), 0);
    let truth = read_mask(dir.path().join("t.pgm")).unwrap();
    levelcurve::netpbm::write_mask(dir.path().join("bg.pgm"), &truth.complement()).unwrap();
    let out = run(dir.path(), &["train-som", "--fg", "t.pgm", "--bg", "bg.pgm", "-i", "i.pgm", "-o", "maps.txt"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = run(
        dir.path(),
        &["segment", "--model", "csomcv", "--init", "5,5,20,20", "-i", "i.pgm", "--map", "maps.txt", "-o", "m.pgm", "--truth", "t.pgm"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let f: f64 = stdout(&out).split_whitespace().nth(2).unwrap().parse().unwrap();
    assert!(f >= 0.99, "{}", stdout(&out));
}

#[test]
fn bench_writes_csv_in_config_order() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "image = binary64\nmodel = somcv | cv\ninit = 25,22,10,10\ntiming = off\n";
    fs::write(dir.path().join("run.cfg"), cfg).unwrap();
    let out = run(dir.path(), &["bench", "--config", "run.cfg", "-o", "r.csv", "--threads", "2"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = fs::read_to_string(dir.path().join("r.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "model,image,seed,precision,recall,fmeasure,iterations,wall_ms");
    assert!(lines[1].starts_with("somcv,binary64,0,"));
    assert!(lines[2].starts_with("cv,binary64,0,"));
    assert!(lines[1].ends_with(",0.000"));

    let again = run(dir.path(), &["bench", "--config", "run.cfg", "-o", "r2.csv", "--threads", "1"]);
    assert_eq!(code(&again), 0);
    assert_eq!(csv, fs::read_to_string(dir.path().join("r2.csv")).unwrap());
}

#[test]
fn diagnostics_outputs() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(dir.path(), &["gen", "binary64", "-o", "i.pgm", "-t", "t.pgm"])), 0);
    fs::create_dir(dir.path().join("dump")).unwrap();
    let out = run(
        dir.path(),
        &["segment", "--model", "cv", "--init", "25,22,10,10", "-i", "i.pgm", "-o", "m.pgm", "--energy", "e.txt", "--dump-masks", "dump"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let energies: Vec<f64> = fs::read_to_string(dir.path().join("e.txt"))
        .unwrap()
        .lines()
        .map(|l| l.parse().unwrap())
        .collect();
    let dumps = fs::read_dir(dir.path().join("dump")).unwrap().count();
    assert!(dumps >= 1);
    assert_eq!(energies.len(), dumps + 1);
    let last = read_mask(dir.path().join(format!("dump/iter_{dumps:04}.pgm"))).unwrap();
    assert_eq!(last, read_mask(dir.path().join("m.pgm")).unwrap());
}

#[test]
fn gen_from_layout_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("shape.txt"), "width = 30\nheight = 20\nbackground = 10\nrect = 2, 3, 5, 4, 200\n").unwrap();
    let out = run(dir.path(), &["gen", "shape.txt", "-o", "i.pgm", "-t", "t.pgm", "--sd", "5", "--seed", "4"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(read_mask(dir.path().join("t.pgm")).unwrap().count(), 20);
    let again = run(dir.path(), &["gen", "shape.txt", "-o", "j.pgm", "-t", "u.pgm", "--sd", "5", "--seed", "4"]);
    assert_eq!(code(&again), 0);
    assert_eq!(fs::read(dir.path().join("i.pgm")).unwrap(), fs::read(dir.path().join("j.pgm")).unwrap());

    fs::write(dir.path().join("bad.txt"), "width = 30\nheight = 20\nbackground = 10\nrect = 28, 3, 5, 4, 200\n").unwrap();
    let out = run(dir.path(), &["gen", "bad.txt", "-o", "k.pgm", "-t", "v.pgm"]);
    assert_eq!(code(&out), 1);
    assert!(!dir.path().join("k.pgm").exists());
}
