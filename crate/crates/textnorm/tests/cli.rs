//! End-to-end runs of the command-line pipeline on a small corpus.

use std::fs;
use std::path::Path;

use textnorm::cli::cli_main;

const TRAIN: &str = "\
PLAIN\tA\t<self>
PLAIN\tbaby\t<self>
PLAIN\tgiraffe\t<self>
PLAIN\tis\t<self>
MEASURE\t6ft\tsix feet
PLAIN\ttall\t<self>
PLAIN\tand\t<self>
PLAIN\tweighs\t<self>
MEASURE\t150lb\tone hundred fifty pounds
PUNCT\t.\tsil
<eos>
PLAIN\tit\t<self>
PLAIN\tcosts\t<self>
MONEY\t£5\tfive pounds
PUNCT\t.\tsil
<eos>
CARDINAL\t12\ttwelve
PLAIN\tgiraffes\t<self>
PUNCT\t.\tsil
<eos>
";

fn run(args: &[&str]) -> i32 {
    cli_main(std::iter::once("textnorm").chain(args.iter().copied()))
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

#[test]
fn pipeline_trains_normalizes_and_evaluates() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    fs::write(dir.join("train.tsv"), TRAIN).unwrap();

    assert_eq!(
        run(&["train-channel", "--train", &path(dir, "train.tsv"), "--out", &path(dir, "channel.tsv")]),
        0
    );
    assert_eq!(
        run(&[
            "train-lm",
            "--train",
            &path(dir, "train.tsv"),
            "--out",
            &path(dir, "lm.tsv"),
            "--order",
            "2",
            "--katz-threshold",
            "1",
            "--min-count",
            "1",
        ]),
        0
    );

    for (mode, pred, filter_flag) in [
        ("exp1", "pred1.tsv", "--no-filter"),
        ("exp2", "pred2.tsv", "--filter"),
    ] {
        assert_eq!(
            run(&[
                "normalize",
                "--mode",
                mode,
                "--in",
                &path(dir, "train.tsv"),
                "--out",
                &path(dir, pred),
                "--channel",
                &path(dir, "channel.tsv"),
                "--lm",
                &path(dir, "lm.tsv"),
                filter_flag,
            ]),
            0
        );
        let report = format!("report_{mode}.tsv");
        assert_eq!(
            run(&[
                "evaluate",
                "--gold",
                &path(dir, "train.tsv"),
                "--pred",
                &path(dir, pred),
                "--report",
                &path(dir, &report),
                "--dump-errors",
                &path(dir, "errors.tsv"),
            ]),
            0
        );
        let text = fs::read_to_string(dir.join(&report)).unwrap();
        assert!(
            text.contains("ALL\t17\t17\t1.0000\t0"),
            "{mode} not perfect on its own training data:\n{text}"
        );
    }

    // predictions carry expanded words for exp1, sentinels for exp2; both
    // evaluate identically
    let pred1 = fs::read_to_string(dir.join("pred1.tsv")).unwrap();
    assert!(pred1.contains("MEASURE\t6ft\tsix feet\tsix feet"));

    assert_eq!(
        run(&[
            "oracle",
            "--channel",
            &path(dir, "channel.tsv"),
            "--test",
            &path(dir, "train.tsv"),
            "--pred",
            &path(dir, "pred1.tsv"),
        ]),
        0
    );

    assert_eq!(
        run(&["overlap", "--train", &path(dir, "train.tsv"), "--test", &path(dir, "train.tsv"), "--pred", &path(dir, "pred2.tsv")]),
        0
    );

    assert_eq!(
        run(&[
            "compare",
            "--a",
            &path(dir, "report_exp1.tsv"),
            "--b",
            &path(dir, "report_exp2.tsv"),
            "--out",
            &path(dir, "deltas.tsv"),
        ]),
        0
    );
    let deltas = fs::read_to_string(dir.join("deltas.tsv")).unwrap();
    assert!(deltas.starts_with("CLASS\tA\tB\tDELTA\tFLAG\nALL\t1.0000\t1.0000\t0.0000\t\n"));
}

#[test]
fn filters_compile_to_text_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    assert_eq!(run(&["build-filters", "--out", &path(dir, "filters")]), 0);
    for name in ["money.fst", "money.isyms", "money.osyms", "measure.fst"] {
        assert!(dir.join("filters").join(name).exists(), "{name} missing");
    }
}

#[test]
fn neural_training_writes_a_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    fs::write(dir.join("train.tsv"), TRAIN).unwrap();
    fs::write(
        dir.join("config.txt"),
        "char_vocab_cap=60\nword_vocab_cap=40\nchar_embed_dim=6\nword_embed_dim=6\nencoder_state_dim=8\nattention_dim=6\ndecoder_layers=1\n",
    )
    .unwrap();
    assert_eq!(
        run(&[
            "train-neural",
            "--train",
            &path(dir, "train.tsv"),
            "--out",
            &path(dir, "model"),
            "--config",
            &path(dir, "config.txt"),
            "--epochs",
            "2",
            "--seed",
            "7",
        ]),
        0
    );
    assert!(dir.join("model.manifest").exists());
    assert!(dir.join("model.bin").exists());
    // the checkpoint drives exp2 decoding
    assert_eq!(
        run(&["train-channel", "--train", &path(dir, "train.tsv"), "--out", &path(dir, "channel.tsv")]),
        0
    );
    assert_eq!(
        run(&[
            "normalize",
            "--mode",
            "exp2",
            "--in",
            &path(dir, "train.tsv"),
            "--out",
            &path(dir, "pred.tsv"),
            "--channel",
            &path(dir, "channel.tsv"),
            "--neural",
            &path(dir, "model"),
            "--no-filter",
        ]),
        0
    );
    assert!(dir.join("pred.tsv").exists());
}

#[test]
fn exit_codes_distinguish_usage_and_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    // unknown flag: usage error
    assert_eq!(run(&["train-channel", "--bogus"]), 1);
    // unknown subcommand: usage error
    assert_eq!(run(&["frobnicate"]), 1);
    // help: success
    assert_eq!(run(&["--help"]), 0);
    // missing input file: data error
    assert_eq!(
        run(&["train-channel", "--train", &path(dir, "nope.tsv"), "--out", &path(dir, "c.tsv")]),
        2
    );
    // malformed corpus: data error
    fs::write(dir.join("bad.tsv"), "NOT_A_CLASS\tx\ty\n<eos>\n").unwrap();
    assert_eq!(
        run(&["train-channel", "--train", &path(dir, "bad.tsv"), "--out", &path(dir, "c.tsv")]),
        2
    );
}
