use std::path::Path;
use std::process::{Command, Output};

use diffc::gaussian_rd::{diffc_a_star_point, Spectrum};

fn diffc(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_diffc"))
        .args(args)
        .current_dir(dir)
        .env("DIFFC_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

#[test]
fn encode_decode_round_trip_and_framing_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let enc = ["encode", "--source", "pair:2:0.25", "--input", "x.txt", "--seed", "7", "--out", "x.dfc"];
    std::fs::write(d.join("x.txt"), "0.8\n").unwrap();
    let out = diffc(&enc, d);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let ledger = std::fs::read_to_string(d.join("x.dfc.ledger.csv")).unwrap();
    assert!(ledger.starts_with("record,step,kl_bits,info_bits,index,code_bits,candidates,chunk\nprior,100,"));
    let first = std::fs::read(d.join("x.dfc")).unwrap();
    assert_eq!(&first[..4], b"DIFC");

    // Same config and seed give byte-identical files.
    assert_eq!(code(&diffc(&enc, d)), 0);
    assert_eq!(std::fs::read(d.join("x.dfc")).unwrap(), first);

    let z = diffc(&["decode", "--source", "pair:2:0.25", "--input", "x.dfc", "--recon", "z", "--out", "z.txt"], d);
    assert_eq!(code(&z), 0, "{}", String::from_utf8_lossy(&z.stderr));
    let flow = diffc(&["decode", "--source", "pair:2:0.25", "--input", "x.dfc", "--out", "xh.txt"], d);
    assert_eq!(code(&flow), 0);
    let xh: f64 = std::fs::read_to_string(d.join("xh.txt")).unwrap().trim().parse().unwrap();
    assert!(xh.is_finite());

    std::fs::write(d.join("cut.dfc"), &first[..first.len() - 1]).unwrap();
    let cut = diffc(&["decode", "--source", "pair:2:0.25", "--input", "cut.dfc", "--out", "y.txt"], d);
    assert_eq!(code(&cut), 2);
    assert!(String::from_utf8_lossy(&cut.stderr).contains("framing"));
    assert!(!d.join("y.txt").exists());

    let wrong = diffc(&["decode", "--source", "pair:1:0.25", "--input", "x.dfc", "--out", "y.txt"], d);
    assert_eq!(code(&wrong), 2);
}

#[test]
fn stochastic_commands_require_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["verify", "--theorem", "g", "--out", "r"],
        vec!["g", "--out", "g.csv"],
        vec!["encode", "--source", "normal", "--input", "x", "--out", "x.dfc"],
    ] {
        let out = diffc(&args, dir.path());
        assert_eq!(code(&out), 2);
        assert!(String::from_utf8_lossy(&out.stderr).contains("--seed"));
    }
}

#[test]
fn unknown_theorem_and_bad_flags_are_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&diffc(&["verify", "--theorem", "4", "--seed", "1", "--out", "r"], dir.path())), 2);
    assert_eq!(code(&diffc(&["rd-curve", "--chunk-bits", "8", "--out", "r"], dir.path())), 2);
    assert_eq!(code(&diffc(&["encode", "--bogus"], dir.path())), 2);
}

#[test]
fn verify_writes_reports_and_exit_code_tracks_assertions() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let ok = diffc(&["verify", "--theorem", "g", "--source", "normal:2", "--sigma-grid", "0,0.5", "--samples", "20000", "--seed", "3", "--out", "r"], d);
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stdout));
    let report = std::fs::read_to_string(d.join("r/theorem_g.csv")).unwrap();
    let mut lines = report.lines();
    assert_eq!(lines.next(), Some("theorem,condition,n,estimate,stderr,bound,pass"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    for row in &rows {
        assert_eq!(row.len(), 7);
        assert_eq!(row[2], "20000");
        assert_eq!(row[6], "true");
    }

    // Far from the small-noise limit the error ratio leaves the band.
    let fail = diffc(&["verify", "--theorem", "2", "--sigma", "0.9", "--samples", "20000", "--seed", "3", "--out", "r"], d);
    assert_eq!(code(&fail), 1, "{}", String::from_utf8_lossy(&fail.stdout));
    assert!(std::fs::read_to_string(d.join("r/theorem_2.csv")).unwrap().contains(",false"));
}

#[test]
fn config_file_fills_in_missing_flags() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("run.toml"), "seed = 11\nsamples = 2000\nsigma-grid = \"0,0.3\"\nout = \"from_file.csv\"\n").unwrap();
    let out = diffc(&["g", "--config", "run.toml", "--out", "flag.csv"], d);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!d.join("from_file.csv").exists());
    let text = std::fs::read_to_string(d.join("flag.csv")).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().nth(1).unwrap().starts_with("0,2000,1,"));
}

#[test]
fn rd_curve_writes_every_variant() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("lambdas.txt"), "4\n1\n0.25\n").unwrap();
    let out = diffc(&["rd-curve", "--spectrum", "lambdas.txt", "--theta-grid", "0.5,1", "--out", "rd"], d);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for slug in ["diffc_a", "diffc_f", "diffc_a_star", "diffc_f_star", "pink_a", "pink_f", "rd", "rd_half"] {
        assert!(d.join(format!("rd/{slug}.csv")).exists(), "{slug}");
    }
    let star = std::fs::read_to_string(d.join("rd/diffc_a_star.csv")).unwrap();
    let sp = Spectrum::new(vec![4.0, 1.0, 0.25]).unwrap();
    let p = diffc_a_star_point(&sp, 1.0).unwrap();
    let expected = format!("DiffC-A*,{},", diffc::gaussian_rd::format_sig(p.rate_bpd().unwrap()));
    assert!(star.lines().any(|l| l.starts_with(&expected)), "{star}");
    let snr = std::fs::read_to_string(d.join("rd/component_snr.csv")).unwrap();
    assert_eq!(snr.lines().count(), 1 + 6 * 3);

    let missing = diffc(&["rd-curve", "--spectrum", "nope.txt", "--out", "rd"], d);
    assert_eq!(code(&missing), 2);
}
