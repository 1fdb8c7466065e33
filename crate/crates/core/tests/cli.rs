use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use stegosample::distmodel::{train_context_model, DistributionStream};
use stegosample::imageio::{encode_image, parse_image};
use stegosample::{ContextConfig, ContextModel, ImageGrid, PixelDistribution, Shape};

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stegosample"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn train_matches_hand_count() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    fs::create_dir(&corpus).unwrap();
    let zero = ImageGrid::zeros(Shape::gray(2, 2));
    fs::write(corpus.join("a.pgm"), encode_image(&zero)).unwrap();

    let out = run(&["train", "--corpus", "corpus", "--out", "m.pscm"], dir.path());
    assert_eq!(code(&out), 0, "{out:?}");
    assert!(stdout(&out).contains("289 contexts"));
    let model = ContextModel::load(fs::File::open(dir.path().join("m.pscm")).unwrap()).unwrap();
    assert_eq!(model, train_context_model(&[zero], ContextConfig::default()).unwrap());
    assert_eq!(model.row(0, 16, 16)[0], 1);
}

#[test]
fn train_rejects_empty_and_mixed_corpora() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("empty")).unwrap();
    let out = run(&["train", "--corpus", "empty", "--out", "m.pscm"], dir.path());
    assert_eq!(code(&out), 2);

    let mixed = dir.path().join("mixed");
    fs::create_dir(&mixed).unwrap();
    fs::write(mixed.join("a.pgm"), encode_image(&ImageGrid::zeros(Shape::gray(2, 2)))).unwrap();
    fs::write(mixed.join("b.ppm"), encode_image(&ImageGrid::zeros(Shape::rgb(2, 2)))).unwrap();
    let out = run(&["train", "--corpus", "mixed", "--out", "m.pscm"], dir.path());
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("mixes channel counts"));
}

#[test]
fn uniform_raw_embed_passes_bytes_through() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("msg"), [0x0F, 0xF0, 0xAA, 0x55]).unwrap();
    let out = run(
        &[
            "embed", "--uniform", "--message", "msg", "--width", "2", "--height", "2", "--raw",
            "--seed", "1", "--out", "s.pgm", "--report", "r.csv",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{out:?}");
    let img = parse_image(&fs::read(dir.path().join("s.pgm")).unwrap()).unwrap();
    assert_eq!(img.data(), &[15, 240, 170, 85]);
    assert!(stdout(&out).contains("32 bits confirmed"));
    assert!(stdout(&out).contains("padding seed 1"));

    let csv = fs::read_to_string(dir.path().join("r.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("image,steps,bits,er_pixel,er_step,h_p,h_q,kld,jsd"));
    assert!(lines.next().unwrap().contains(",4,32,8.000000,8.000000,"));
    assert!(lines.next().unwrap().starts_with("summary,"));

    let out = run(
        &["extract", "--uniform", "--image", "s.pgm", "--raw", "--out", "back"],
        dir.path(),
    );
    assert_eq!(code(&out), 0);
    assert_eq!(fs::read(dir.path().join("back")).unwrap(), vec![0x0F, 0xF0, 0xAA, 0x55]);
}

fn write_stream(path: &Path, steps: Vec<PixelDistribution>) {
    DistributionStream::new(steps)
        .save(fs::File::create(path).unwrap())
        .unwrap();
}

#[test]
fn zero_entropy_stream_exceeds_capacity() {
    let dir = tempfile::tempdir().unwrap();
    write_stream(&dir.path().join("d.psds"), vec![PixelDistribution::point_mass(7); 16]);
    fs::write(dir.path().join("msg"), b"hi").unwrap();
    let out = run(
        &[
            "embed", "--dist-stream", "d.psds", "--message", "msg", "--width", "4", "--height",
            "4", "--out", "s.pgm",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("increase image size or use --raw"));
}

#[test]
fn short_stream_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    write_stream(&dir.path().join("d.psds"), vec![PixelDistribution::uniform(); 3]);
    fs::write(dir.path().join("msg"), b"").unwrap();
    let out = run(
        &[
            "embed", "--dist-stream", "d.psds", "--message", "msg", "--width", "2", "--height",
            "2", "--raw", "--out", "s.pgm",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("exhausted"));
}

#[test]
fn model_sources_are_exclusive_and_required() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("msg"), b"x").unwrap();
    let both = run(
        &[
            "embed", "--uniform", "--model", "m", "--message", "msg", "--width", "2", "--height",
            "2", "--out", "s.pgm",
        ],
        dir.path(),
    );
    assert_eq!(code(&both), 2);
    let none = run(
        &["embed", "--message", "msg", "--width", "2", "--height", "2", "--out", "s.pgm"],
        dir.path(),
    );
    assert_eq!(code(&none), 2);
    let bad_prc = run(
        &[
            "embed", "--uniform", "--message", "msg", "--width", "2", "--height", "2", "--prc",
            "63", "--out", "s.pgm",
        ],
        dir.path(),
    );
    assert_eq!(code(&bad_prc), 2);
}

#[test]
fn trained_model_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        code(&run(&["corpus", "--out", "corpus", "--count", "200", "--seed", "3"], dir.path())),
        0
    );
    assert_eq!(
        code(&run(&["train", "--corpus", "corpus", "--out", "m.pscm"], dir.path())),
        0
    );
    let payload: Vec<u8> = (0..24u8).map(|i| i.wrapping_mul(37)).collect();
    fs::write(dir.path().join("msg"), &payload).unwrap();
    let out = run(
        &[
            "embed", "--model", "m.pscm", "--message", "msg", "--width", "28", "--height", "28",
            "--seed", "11", "--out", "s.pgm",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let out = run(
        &["extract", "--model", "m.pscm", "--image", "s.pgm", "--out", "back"],
        dir.path(),
    );
    assert_eq!(code(&out), 0);
    assert_eq!(fs::read(dir.path().join("back")).unwrap(), payload);

    // no authentication: a wrong precision either fails extraction or
    // yields something other than the payload
    let out = run(
        &["extract", "--model", "m.pscm", "--image", "s.pgm", "--prc", "16", "--out", "bad"],
        dir.path(),
    );
    match code(&out) {
        4 => {}
        0 => assert_ne!(fs::read(dir.path().join("bad")).unwrap(), payload),
        other => panic!("unexpected exit {other}"),
    }

    // raw extraction returns floor(confirmed / 8) bytes
    let out = run(
        &[
            "embed", "--model", "m.pscm", "--message", "msg", "--width", "28", "--height", "28",
            "--raw", "--seed", "11", "--out", "raw.pgm",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let confirmed: usize = text
        .lines()
        .find(|l| l.contains("bits confirmed"))
        .and_then(|l| l.split_whitespace().next())
        .unwrap()
        .parse()
        .unwrap();
    let out = run(
        &["extract", "--model", "m.pscm", "--image", "raw.pgm", "--raw", "--out", "rawback"],
        dir.path(),
    );
    assert_eq!(code(&out), 0);
    let back = fs::read(dir.path().join("rawback")).unwrap();
    assert_eq!(back.len(), confirmed / 8);
    let n = back.len().min(payload.len());
    assert_eq!(back[..n], payload[..n]);
}

#[test]
fn corrupted_image_fails_extraction() {
    let dir = tempfile::tempdir().unwrap();
    // only value 7 is decodable at every step
    write_stream(&dir.path().join("d.psds"), vec![PixelDistribution::point_mass(7); 4]);
    let img = ImageGrid::new(Shape::gray(2, 2), vec![7, 7, 8, 7]).unwrap();
    fs::write(dir.path().join("s.pgm"), encode_image(&img)).unwrap();
    let out = run(
        &["extract", "--dist-stream", "d.psds", "--image", "s.pgm", "--out", "back"],
        dir.path(),
    );
    assert_eq!(code(&out), 4);
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty subinterval"));
}

#[test]
fn analyze_uniform_reports_eight_bits_per_pixel() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "analyze", "--uniform", "--count", "100", "--width", "8", "--height", "8",
            "--out-csv", "a.csv", "--out-entropy-map", "e.pgm", "--out-bits-map", "b.pgm",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{out:?}");
    let mut reader = csv::Reader::from_path(dir.path().join("a.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 101);
    for row in &rows[..100] {
        assert_eq!(&row[3], "8.000000");
    }
    assert_eq!(&rows[100][0], "summary");
    assert_eq!(&rows[100][3], "8.0000±0.0000");

    let entropy = parse_image(&fs::read(dir.path().join("e.pgm")).unwrap()).unwrap();
    assert_eq!(entropy.shape(), Shape::gray(8, 8));
    assert!(entropy.data().iter().all(|&v| v == 255));
}

#[test]
fn selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["selftest"], dir.path());
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    for v in ["fig3-prc5", "uniform-byte-passthrough", "framed-roundtrip"] {
        assert!(text.contains(&format!("ok   {v}")), "{text}");
    }
}
