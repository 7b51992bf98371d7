use std::path::Path;
use std::process::{Command, Output};

fn milac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_milac"))
        .args(args)
        .env("MILAC_WORKERS", "2")
        .output()
        .expect("spawn milac")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write_config(dir: &Path, out: &Path) -> std::path::PathBuf {
    let path = dir.join("campaign.toml");
    std::fs::write(
        &path,
        format!(
            "n_streams = [1, 2]\nn_antennas = [3]\nsnr_db = [0.0, 20.0]\ntrials = 3\nseed = 7\noutput_dir = {:?}\n",
            out.display().to_string()
        ),
    )
    .unwrap();
    path
}

#[test]
fn campaign_outputs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let config = write_config(dir.path(), &a);
    let run_a = milac(&["campaign", config.to_str().unwrap()]);
    assert!(run_a.status.success(), "{}", String::from_utf8_lossy(&run_a.stderr));
    let run_b = milac(&["campaign", config.to_str().unwrap(), "--output-dir", b.to_str().unwrap()]);
    assert!(run_b.status.success());
    for name in ["trials.csv", "summary.csv"] {
        let x = std::fs::read(a.join(name)).unwrap();
        assert_eq!(x, std::fs::read(b.join(name)).unwrap(), "{name}");
        assert!(!x.is_empty());
    }
    assert!(a.join("timing.csv").exists());
}

#[test]
fn verify_passes_for_designed_networks() {
    for arch in ["stem", "fully"] {
        let out = milac(&["verify", "--seed", "11", "--dims", "2,5,4", "--arch", arch]);
        assert!(out.status.success(), "{arch}: {}", stdout(&out));
    }
    let out = milac(&["verify", "--seed", "3", "--dims", "1,4,4"]);
    assert!(out.status.success(), "{}", stdout(&out));
}

#[test]
fn verify_flags_a_tampered_susceptance() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("b");
    let ok = milac(&["verify", "--seed", "5", "--dims", "2,4,4", "--out-dir", out_dir.to_str().unwrap()]);
    assert!(ok.status.success());

    let path = out_dir.join("susceptance_tx.csv");
    let mut b = milac_core::matio::read_real_matrix(&path).unwrap();
    let n = b.nrows();
    // Couple the last two antennas, which no stem edge connects.
    b[(n - 1, n - 2)] = 0.5;
    b[(n - 2, n - 1)] = 0.5;
    std::fs::write(&path, milac_core::matio::real_to_csv(&b)).unwrap();

    let bad = milac(&["verify", "--seed", "5", "--dims", "2,4,4", "--susceptance-tx", path.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(1));
    let text = stdout(&bad);
    assert!(text.contains("\"mask_ok\": false"), "{text}");
}

#[test]
fn bad_arguments_exit_with_two() {
    let out = milac(&["verify", "--seed", "1", "--dims", "2,5"]);
    assert_eq!(out.status.code(), Some(2));
    let out = milac(&["verify", "--seed", "1", "--dims", "6,5,5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn complexity_and_graph_commands() {
    let out = milac(&["complexity", "--streams", "1,4", "--antennas", "100"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("201") && text.contains("5151"), "{text}");
    assert!(text.contains("804") && text.contains("5460"), "{text}");

    let out = milac(&["graph", "--side", "tx", "--streams", "2", "--antennas", "3"]);
    assert!(out.status.success());
    let g = milac_core::archgraph::MilacGraph::from_edge_list(&stdout(&out)).unwrap();
    assert_eq!(g, milac_core::archgraph::tx_stem_graph(2, 3).unwrap());
}
