use std::fs;
use std::path::Path;

use trlsum::run_cli;

fn run(dir: &Path, args: &[&str]) -> i32 {
    let mut argv = vec!["trlsum".to_string()];
    for a in args {
        argv.push(a.replace("{}", dir.to_str().unwrap()));
    }
    run_cli(argv)
}

const CONFIG: &str =
    "batch_size = 8\nhidden = 8\nemb = 4\nmax_enc = 60\nmax_dec = 12\nvocab_k = 41\n\
epochs_pretrain = 1\nepochs_transfer = 1\nepochs_coverage = 0\ninit_scale = 0.1\nbeam = 2\n";

#[test]
fn gen_synthetic_writes_the_requested_lines() {
    let dir = tempfile::tempdir().unwrap();
    let code = run(
        dir.path(),
        &[
            "gen-synthetic",
            "--task",
            "copyfirst",
            "--n",
            "100",
            "--seed",
            "7",
            "--out",
            "{}/d.tsv",
        ],
    );
    assert_eq!(code, 0);
    let text = fs::read_to_string(dir.path().join("d.tsv")).unwrap();
    assert_eq!(text.lines().count(), 100);
    assert!(text.lines().all(|l| l.split('\t').count() == 2));
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["frobnicate"]), 1);
    assert_eq!(
        run(
            dir.path(),
            &["gen-synthetic", "--task", "copyfirst", "--bogus"]
        ),
        1
    );
    assert_eq!(
        run(
            dir.path(),
            &[
                "gen-synthetic",
                "--task",
                "poetry",
                "--n",
                "3",
                "--out",
                "{}/x"
            ]
        ),
        1
    );
    assert_eq!(
        run(
            dir.path(),
            &[
                "transfer",
                "--mode",
                "sideways",
                "--checkpoint",
                "a",
                "--target",
                "b",
                "--out",
                "c"
            ]
        ),
        1
    );
    assert_eq!(run(dir.path(), &["--help"]), 0);
}

#[test]
fn missing_checkpoint_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.cfg"), CONFIG).unwrap();
    assert_eq!(
        run(
            dir.path(),
            &[
                "gen-synthetic",
                "--task",
                "keywords",
                "--n",
                "5",
                "--out",
                "{}/g.tsv"
            ]
        ),
        0
    );
    let code = run(
        dir.path(),
        &[
            "transfer",
            "--mode",
            "trl",
            "--config",
            "{}/c.cfg",
            "--checkpoint",
            "{}/nope.ckpt",
            "--source",
            "{}/g.tsv",
            "--target",
            "{}/g.tsv",
            "--out",
            "{}/o.ckpt",
        ],
    );
    assert_eq!(code, 2);
    assert_eq!(
        run(
            dir.path(),
            &[
                "build-vocab",
                "--data",
                "{}/absent.tsv",
                "--out",
                "{}/v.txt"
            ]
        ),
        2
    );
    fs::write(dir.path().join("bad.tsv"), "no tab here\n").unwrap();
    assert_eq!(
        run(
            dir.path(),
            &["build-vocab", "--data", "{}/bad.tsv", "--out", "{}/v.txt"]
        ),
        2
    );
    fs::write(dir.path().join("bad.cfg"), "hidden = 4\nwidth = 3\n").unwrap();
    assert_eq!(
        run(
            dir.path(),
            &[
                "pretrain",
                "--config",
                "{}/bad.cfg",
                "--data",
                "{}/g.tsv",
                "--out",
                "{}/m.ckpt"
            ]
        ),
        2
    );
}

#[test]
fn full_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("c.cfg"), CONFIG).unwrap();
    assert_eq!(
        run(
            d,
            &[
                "gen-synthetic",
                "--task",
                "copyfirst",
                "--n",
                "40",
                "--seed",
                "1",
                "--out",
                "{}/s.tsv"
            ]
        ),
        0
    );
    assert_eq!(
        run(
            d,
            &[
                "gen-synthetic",
                "--task",
                "keywords",
                "--n",
                "16",
                "--seed",
                "2",
                "--out",
                "{}/g.tsv"
            ]
        ),
        0
    );
    assert_eq!(
        run(
            d,
            &[
                "build-vocab",
                "--data",
                "{}/s.tsv",
                "--k",
                "41",
                "--out",
                "{}/v.txt"
            ]
        ),
        0
    );
    assert_eq!(
        run(
            d,
            &[
                "build-vocab",
                "--data",
                "{}/s.tsv,{}/g.tsv",
                "--k",
                "41",
                "--out",
                "{}/both.txt"
            ]
        ),
        0
    );
    assert_eq!(
        run(
            d,
            &[
                "pretrain",
                "--config",
                "{}/c.cfg",
                "--data",
                "{}/s.tsv",
                "--vocab",
                "{}/v.txt",
                "--out",
                "{}/m.ckpt",
                "--log",
                "{}/log.csv"
            ]
        ),
        0
    );
    let log = fs::read_to_string(d.join("log.csv")).unwrap();
    assert_eq!(
        log.lines().next().unwrap(),
        "epoch,step,loss_ce,loss_rl,zeta,eta,lr"
    );
    assert_eq!(log.lines().count(), 1 + 5);

    for mode in ["tl", "trl"] {
        let out = format!("{{}}/{mode}.ckpt");
        let code = run(
            d,
            &[
                "transfer",
                "--mode",
                mode,
                "--checkpoint",
                "{}/m.ckpt",
                "--source",
                "{}/s.tsv",
                "--target",
                "{}/g.tsv",
                "--vocab",
                "{}/v.txt",
                "--out",
                &out,
                "--seed",
                "5",
            ],
        );
        assert_eq!(code, 0, "{mode}");
    }
    // trl needs a source corpus
    assert_eq!(
        run(
            d,
            &[
                "transfer",
                "--mode",
                "trl",
                "--checkpoint",
                "{}/m.ckpt",
                "--target",
                "{}/g.tsv",
                "--out",
                "{}/x.ckpt"
            ]
        ),
        1
    );

    assert_eq!(
        run(
            d,
            &[
                "decode",
                "--checkpoint",
                "{}/trl.ckpt",
                "--data",
                "{}/g.tsv",
                "--out",
                "{}/dec.txt"
            ]
        ),
        0
    );
    let decoded = fs::read_to_string(d.join("dec.txt")).unwrap();
    assert_eq!(decoded.lines().count(), 16);

    let eval = [
        "evaluate",
        "--checkpoint",
        "{}/trl.ckpt",
        "--test",
        "{}/s.tsv,{}/g.tsv",
        "--weights",
        "994001,287226",
    ];
    assert_eq!(run(d, &eval), 0);
    assert_eq!(
        run(
            d,
            &[
                "evaluate",
                "--checkpoint",
                "{}/trl.ckpt",
                "--test",
                "{}/s.tsv",
                "--weights",
                "1,2"
            ]
        ),
        1
    );
    assert_eq!(
        run(
            d,
            &[
                "evaluate",
                "--checkpoint",
                "{}/trl.ckpt",
                "--test",
                "{}/s.tsv",
                "--weights",
                "0"
            ]
        ),
        1
    );
}

#[test]
fn transfer_rejects_other_vocabulary() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("c.cfg"), CONFIG).unwrap();
    assert_eq!(
        run(
            d,
            &[
                "gen-synthetic",
                "--task",
                "copyfirst",
                "--n",
                "10",
                "--out",
                "{}/s.tsv"
            ]
        ),
        0
    );
    assert_eq!(
        run(
            d,
            &[
                "build-vocab",
                "--data",
                "{}/s.tsv",
                "--k",
                "41",
                "--out",
                "{}/v.txt"
            ]
        ),
        0
    );
    assert_eq!(
        run(
            d,
            &[
                "build-vocab",
                "--data",
                "{}/s.tsv",
                "--k",
                "5",
                "--out",
                "{}/small.txt"
            ]
        ),
        0
    );
    assert_eq!(
        run(
            d,
            &[
                "pretrain",
                "--config",
                "{}/c.cfg",
                "--data",
                "{}/s.tsv",
                "--vocab",
                "{}/v.txt",
                "--out",
                "{}/m.ckpt"
            ]
        ),
        0
    );
    let code = run(
        d,
        &[
            "transfer",
            "--mode",
            "tl",
            "--checkpoint",
            "{}/m.ckpt",
            "--target",
            "{}/s.tsv",
            "--vocab",
            "{}/small.txt",
            "--out",
            "{}/o.ckpt",
        ],
    );
    assert_eq!(code, 2);
}
