use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use transtarec::ingest::format_iso;
use transtarec::{chronological_split, load, parse_dataset, DatasetFormat, Task};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_transtarec"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn transtarec")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli");
    fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gen(out: &Path, pattern: &str, seed: &str) {
    let o = run(&[
        "gen-synthetic",
        "--users",
        "50",
        "--pois",
        "20",
        "--pattern",
        pattern,
        "--seed",
        seed,
        "--out",
        s(out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
}

/// A synthetic time-dependent corpus and a model trained long enough to
/// memorize its pattern.
fn memorized() -> &'static (PathBuf, PathBuf) {
    static CELL: OnceLock<(PathBuf, PathBuf)> = OnceLock::new();
    CELL.get_or_init(|| {
        let data = scratch("memorized.tsv");
        let model = scratch("memorized.model");
        gen(&data, "time-dependent", "1");
        let o = run(&[
            "train",
            "--data",
            s(&data),
            "--dim",
            "16",
            "--lr",
            "0.05",
            "--epochs",
            "200",
            "--out",
            s(&model),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        (data, model)
    })
}

fn value(report: &str, key: &str) -> f64 {
    report
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("no `{key}` in\n{report}"))
        .parse()
        .unwrap()
}

#[test]
fn gen_synthetic_is_deterministic_and_reparses() {
    let a = scratch("gen_a.tsv");
    let b = scratch("gen_b.tsv");
    gen(&a, "time-blind", "9");
    gen(&b, "time-blind", "9");
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let (corpus, report) = parse_dataset(&a, DatasetFormat::GenericTsv).unwrap();
    assert_eq!(report.malformed, 0);
    assert_eq!(corpus.n_records(), 5000);
}

#[test]
fn gen_synthetic_rejects_tiny_vocab() {
    let o = run(&[
        "gen-synthetic",
        "--users",
        "3",
        "--pois",
        "2",
        "--pattern",
        "time-blind",
        "--out",
        "/dev/null",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--pois"));
}

#[test]
fn train_smoke_and_determinism() {
    let data = scratch("smoke.tsv");
    gen(&data, "time-dependent", "2");
    let a = scratch("smoke_a.model");
    let b = scratch("smoke_b.model");
    for out in [&a, &b] {
        let o = run(&[
            "train",
            "--data",
            s(&data),
            "--dim",
            "8",
            "--epochs",
            "5",
            "--out",
            s(out),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert_eq!(stderr(&o).matches("epoch ").count(), 5);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let archive = load(&a).unwrap();
    assert_eq!(archive.hyper.dim, 8);
    assert_eq!(archive.meta.epochs_run, 5);
}

#[test]
fn train_rejects_zero_dim() {
    let o = run(&["train", "--data", "x.tsv", "--dim", "0", "--out", "x.model"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--dim"));
}

#[test]
fn train_missing_data_is_runtime_error() {
    let o = run(&[
        "train",
        "--data",
        "/nonexistent/data.tsv",
        "--out",
        s(&scratch("never.model")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("not found"));
}

#[test]
fn help_lists_defaults() {
    let o = run(&["train", "--help"]);
    let help = stdout(&o);
    for flag in [
        "--dim",
        "--margin",
        "--soft-c",
        "--epsilon",
        "--lr",
        "--epochs",
        "--neg",
        "--batch",
        "--seed",
    ] {
        let line = help
            .lines()
            .position(|l| l.trim_start().starts_with(flag))
            .unwrap_or_else(|| panic!("{flag} missing"));
        assert!(
            help.lines().nth(line + 1).unwrap().contains("[default:"),
            "{flag}"
        );
    }
    assert_eq!(help.matches("not from paper").count(), 4);
}

#[test]
fn memorizing_model_scores_high() {
    let (data, model) = memorized();
    let o = run(&["eval", "--model", s(model), "--data", s(data), "--k", "1,5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(value(&stdout(&o), "top@1") > 0.9, "{}", stdout(&o));
}

#[test]
fn eval_gap_task_counts_pairs() {
    let (data, model) = memorized();
    let o = run(&[
        "eval",
        "--model",
        s(model),
        "--data",
        s(data),
        "--task",
        "timespec-gap",
        "--gap-hours",
        "5",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (corpus, _) = parse_dataset(data, DatasetFormat::GenericTsv).unwrap();
    let split = chronological_split(corpus, 0.8).unwrap();
    let expected: usize = split
        .users()
        .iter()
        .map(|c| {
            split
                .test_transitions(c, Task::TimeSpecificMinGap(5.0))
                .len()
        })
        .sum();
    assert_eq!(value(&stdout(&o), "n_samples") as usize, expected);
}

#[test]
fn eval_rejects_unsorted_cutoffs() {
    let (data, model) = memorized();
    let o = run(&[
        "eval",
        "--model",
        s(model),
        "--data",
        s(data),
        "--k",
        "10,5",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn eval_compares_two_models_and_writes_json() {
    let (data, model) = memorized();
    let base = scratch("baseline.model");
    let o = run(&[
        "train",
        "--data",
        s(data),
        "--dim",
        "16",
        "--baseline",
        "--epochs",
        "5",
        "--out",
        s(&base),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let json = scratch("report.json");
    let o = run(&[
        "eval",
        "--model",
        s(model),
        "--model",
        s(&base),
        "--data",
        s(data),
        "--k",
        "1,5",
        "--report",
        s(&json),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains(&format!("vs {}", s(&base))));
    let records: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(records.as_array().unwrap().len(), 4);
}

#[test]
fn eval_unknown_user() {
    let (data, model) = memorized();
    let extended = scratch("extended.tsv");
    let mut text = fs::read_to_string(data).unwrap();
    for day in 1..=5 {
        text.push_str(&format!("stranger\tp01\t2013-01-0{day}T10:00:00Z\n"));
    }
    fs::write(&extended, text).unwrap();
    let o = run(&["eval", "--model", s(model), "--data", s(&extended)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("stranger"));
    let o = run(&[
        "eval",
        "--model",
        s(model),
        "--data",
        s(&extended),
        "--skip-unknown",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(value(&stdout(&o), "skipped"), 1.0);
}

fn recommend(model: &Path, extra: &[&str], next_time: &str) -> Output {
    let mut args = vec![
        "recommend",
        "--model",
        s(model),
        "--user",
        "u00",
        "--prev-poi",
        "p04",
        "--prev-time",
        "2013-01-01T10:00:00Z",
        "--next-time",
        next_time,
    ];
    args.extend_from_slice(extra);
    run(&args)
}

fn top_poi(o: &Output) -> String {
    stdout(o)
        .lines()
        .nth(1)
        .unwrap()
        .split('\t')
        .nth(1)
        .unwrap()
        .to_string()
}

#[test]
fn recommend_full_ranking_is_a_permutation() {
    let (_, model) = memorized();
    let o = recommend(model, &["--top", "20"], "2013-01-02T12:00:00Z");
    assert!(o.status.success(), "{}", stderr(&o));
    let rows: Vec<Vec<String>> = stdout(&o)
        .lines()
        .skip(1)
        .map(|l| l.split('\t').map(String::from).collect())
        .collect();
    assert_eq!(rows.len(), 20);
    let mut ranks: Vec<usize> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    ranks.sort();
    assert_eq!(ranks, (1..=20).collect::<Vec<_>>());
    let mut pois: Vec<&str> = rows.iter().map(|r| r[1].as_str()).collect();
    pois.sort();
    pois.dedup();
    assert_eq!(pois.len(), 20);
    assert_eq!(
        stdout(&o),
        stdout(&recommend(model, &["--top", "20"], "2013-01-02T12:00:00Z"))
    );
}

#[test]
fn recommend_follows_the_hour_pattern() {
    let (data, model) = memorized();
    let (corpus, _) = parse_dataset(data, DatasetFormat::GenericTsv).unwrap();
    let u = corpus.users().get("u00").unwrap();
    let last = *corpus.sequence(u).last().unwrap();
    let neighbourhood = last.poi % 10;
    let prev = corpus.pois().id(last.poi).to_string();
    let midnight = last.timestamp - last.timestamp.rem_euclid(86_400) + 86_400;
    let query = |hour: i64| {
        run(&[
            "recommend",
            "--model",
            s(model),
            "--user",
            "u00",
            "--prev-poi",
            &prev,
            "--prev-time",
            &format_iso(last.timestamp, 0),
            "--next-time",
            &format_iso(midnight + hour * 3600, 0),
            "--top",
            "1",
            "--watch",
            &prev,
        ])
    };
    let noon = query(12);
    let evening = query(20);
    assert!(noon.status.success(), "{}", stderr(&noon));
    assert_eq!(top_poi(&noon), corpus.pois().id(neighbourhood));
    assert_eq!(top_poi(&evening), corpus.pois().id(neighbourhood + 10));
    assert!(stdout(&noon).contains("watched\trank"));
}

#[test]
fn recommend_unknown_ids() {
    let (_, model) = memorized();
    let o = run(&[
        "recommend",
        "--model",
        s(model),
        "--user",
        "nobody",
        "--prev-poi",
        "p01",
        "--prev-time",
        "2013-01-01T10:00:00Z",
        "--next-time",
        "2013-01-01T12:00:00Z",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nobody"));
    let o = recommend(model, &["--watch", "p99"], "2013-01-02T12:00:00Z");
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("p99"));
    let o = recommend(model, &[], "yesterday");
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn inspect_echoes_shapes_and_norms() {
    let (_, model) = memorized();
    let o = run(&["inspect", "--model", s(model)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("dim = 16"));
    assert!(out.contains("shape user_emb = 50x16"));
    assert!(out.contains("shape poi_emb = 20x16"));
    assert!(out.contains("shape g_weight = 16x48"));
    for line in out.lines().filter(|l| l.starts_with("norm ")) {
        let max: f64 = line.rsplit(' ').next().unwrap().parse().unwrap();
        assert!(max <= 1.0 + 1e-6, "{line}");
    }
}

#[test]
fn inspect_reports_corrupt_line() {
    let (_, model) = memorized();
    let text = fs::read_to_string(model).unwrap();
    let corrupt = scratch("corrupt.model");
    let mut lines: Vec<&str> = text.lines().collect();
    let at = lines
        .iter()
        .position(|l| l.starts_with("[hour_emb"))
        .unwrap();
    lines[at + 2] = "not numbers";
    fs::write(&corrupt, lines.join("\n")).unwrap();
    let o = run(&["inspect", "--model", s(&corrupt)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(
        stderr(&o).contains(&format!("line {}", at + 3)),
        "{}",
        stderr(&o)
    );
}

#[test]
fn documented_example_loads() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/example.model");
    let archive = load(&path).unwrap();
    assert_eq!(archive.hyper.dim, 2);
    assert_eq!(archive.users, ["alice"]);
    assert_eq!(archive.pois, ["cafe", "office"]);
    let again = archive.to_text();
    assert_eq!(again, fs::read_to_string(&path).unwrap());
}
