use std::path::Path;
use std::process::{Command, Output};

fn pcs(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pcs")).args(args).current_dir(dir).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(o: Output) -> Output {
    assert!(o.status.success(), "stdout: {}\nstderr: {}", stdout(&o), stderr(&o));
    o
}

#[test]
fn acquire_and_reconstruct_an_image() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(pcs(&["synth", "image", "--seed", "3", "--dims", "32x64", "--out", "im.pgm"], d));
    let out = ok(pcs(&["acquire", "--input", "im.pgm", "--m", "16", "--seed", "5", "--out", "y.bin"], d));
    assert_eq!(
        stdout(&out).trim(),
        "layout=rows2d slices=32 m=16 n=64 compression_ratio=0.250000"
    );
    let first = std::fs::read(d.join("y.bin")).unwrap();
    ok(pcs(&["acquire", "--input", "im.pgm", "--m", "16", "--seed", "5", "--out", "y2.bin"], d));
    assert_eq!(first, std::fs::read(d.join("y2.bin")).unwrap());

    let out = ok(pcs(
        &[
            "reconstruct", "--measurements", "y.bin", "--iters", "3", "--truth", "im.pgm", "--out", "rec.pgm",
            "--report", "report.csv", "--compressibility", "comp.csv",
        ],
        d,
    ));
    assert!(stdout(&out).starts_with("iterations="));
    assert!(d.join("rec.pgm").exists());
    let report = std::fs::read_to_string(d.join("report.csv")).unwrap();
    assert!(report.starts_with("iteration,"));
    assert!(report.lines().count() >= 2);
    assert!(std::fs::read_to_string(d.join("comp.csv")).unwrap().lines().count() >= 2);
}

#[test]
fn acquire_cube_layouts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(pcs(&["synth", "cube", "--dims", "8x6x4", "--format", "u16", "--out", "c.pcs3"], d));
    let out = ok(pcs(&["acquire", "--input", "c.pcs3", "--m", "12", "--out", "y.bin"], d));
    assert!(stdout(&out).starts_with("layout=bands3d slices=4 m=12 n=48 "));
    let out = ok(pcs(
        &["acquire", "--input", "c.pcs3", "--layout", "spectral-rows3d", "--m", "6", "--out", "s.bin"],
        d,
    ));
    assert!(stdout(&out).starts_with("layout=spectral-rows3d slices=8 m=6 n=24 "));
    let out = ok(pcs(
        &[
            "acquire", "--input", "c.pcs3", "--m", "4", "--crop-origin", "1,1,0", "--crop-shape", "4,4,2", "--out",
            "k.bin",
        ],
        d,
    ));
    assert!(stdout(&out).starts_with("layout=bands3d slices=2 m=4 n=16 "));
    ok(pcs(&["reconstruct", "--measurements", "y.bin", "--iters", "2", "--out", "r.pcs3"], d));
}

#[test]
fn refusals_print_one_error_line() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(pcs(&["synth", "image", "--dims", "8x8", "--out", "im.pgm"], d));

    let out = pcs(&["acquire", "--input", "im.pgm", "--m", "8", "--out", "y.bin"], d);
    assert!(!out.status.success());
    let err = stderr(&out);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error\tkind=config\tmessage="), "{err}");
    assert!(!d.join("y.bin").exists());

    ok(pcs(&["acquire", "--input", "im.pgm", "--m", "8", "--non-compressive", "--out", "y.bin"], d));
    let out = pcs(&["reconstruct", "--measurements", "y.bin", "--filter", "blockls", "--out", "r.pgm"], d);
    assert!(!out.status.success());
    assert!(stderr(&out).starts_with("error\tkind=config\t"));

    let out = pcs(&["acquire", "--input", "missing.pgm", "--m", "4", "--out", "z.bin"], d);
    assert!(stderr(&out).starts_with("error\tkind=io\t"));
}

#[test]
fn benchmark_with_an_empty_grid_writes_headers() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("suite.txt"), "name = empty\nsource = synth-image:8x8\nm =\n").unwrap();
    let out = ok(pcs(&["benchmark", "--suite", "suite.txt", "--out-dir", "out"], d));
    assert!(stdout(&out).contains("cells=0 failed=0"));
    let table = std::fs::read_to_string(d.join("out/mse_vs_m.csv")).unwrap();
    assert_eq!(table.lines().count(), 1);
    assert!(d.join("out/manifest.txt").exists());
}

#[test]
fn benchmark_output_does_not_depend_on_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("suite.txt"),
        "source = synth-image:16x16\nm = 6, 8\nfilter = p1, p3\nseeds = 1, 2\nmax_iters = 2\nomp_sparsity = 3\n",
    )
    .unwrap();
    ok(pcs(&["benchmark", "--suite", "suite.txt", "--out-dir", "a", "--jobs", "1"], d));
    ok(pcs(&["benchmark", "--suite", "suite.txt", "--out-dir", "b", "--jobs", "3"], d));
    for name in ["mse_vs_iter.csv", "mse_vs_m.csv", "compressibility_vs_iter.csv", "manifest.txt"] {
        assert_eq!(
            std::fs::read(d.join("a").join(name)).unwrap(),
            std::fs::read(d.join("b").join(name)).unwrap(),
            "{name}"
        );
    }
}
