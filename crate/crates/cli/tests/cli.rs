use std::path::Path;
use std::process::{Command, Output};

fn bench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bench"))
        .args(args)
        .output()
        .expect("spawn bench")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn run_prints_csv_to_stdout() {
    let o = bench(&["run", "--kind", "sort", "--impl", "manual", "--n", "256", "--reps", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], obliv_bench::CSV_HEADER.join(","));
    let row: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(&row[..5], &["sort", "manual", "256", "8", "3"]);
    assert_eq!(row[8], "4608");
    let (med, min, max): (f64, f64, f64) = (row[5].parse().unwrap(), row[6].parse().unwrap(), row[7].parse().unwrap());
    assert!(min <= med && med <= max);
}

#[test]
fn run_writes_csv_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.csv");
    let o = bench(&[
        "run", "--kind", "array-access", "--impl", "unprotected", "--n", "1000", "--reps", "3", "--csv",
        path.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().nth(1).unwrap().ends_with(','), "unprotected has no aux count");
}

#[test]
fn bad_arguments_exit_with_two() {
    // Invalid kind/impl pair.
    let o = bench(&["run", "--kind", "sort", "--impl", "oram", "--n", "16"]);
    assert_eq!(o.status.code(), Some(2));
    // Too few repetitions.
    let o = bench(&["run", "--kind", "sort", "--impl", "manual", "--n", "16", "--reps", "2"]);
    assert_eq!(o.status.code(), Some(2));
    // Unknown kind is rejected by the argument parser.
    let o = bench(&["run", "--kind", "quicksort", "--impl", "manual", "--n", "16"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unwritable_csv_exits_with_one() {
    let o = bench(&[
        "run", "--kind", "sort", "--impl", "manual", "--n", "16", "--reps", "3", "--csv",
        "/nonexistent-dir/out.csv",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn check_oblivious_passes_for_edit_distance() {
    let o = bench(&["check-oblivious", "--kind", "edit-distance", "--impl", "manual", "--shape", "30,30"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.lines().filter(|l| l.contains(": identical (")).count() == 20);
    assert!(out.contains("20/20 pairs identical"));
}

#[test]
fn check_oblivious_dump_and_refusal() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("trace.txt");
    let o = bench(&[
        "check-oblivious", "--kind", "sort", "--impl", "manual", "--shape", "4", "--pairs", "2", "--dump",
        dump.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert_eq!(std::fs::read_to_string(&dump).unwrap().lines().count(), 24);

    let o = bench(&["check-oblivious", "--kind", "kmeans", "--impl", "oram-hash", "--shape", "400,5"]);
    assert_eq!(o.status.code(), Some(2));
    let o = bench(&[
        "check-oblivious", "--kind", "kmeans", "--impl", "oram-hash", "--shape", "400,5", "--pairs", "5",
        "--miss-report",
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("miss sequences over 5 runs"));
}

#[test]
fn generated_input_feeds_run() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("points.blk");
    let o = bench(&["gen", "--kind", "kmeans", "--blocks", "20", "--param", "3", "--out", file.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(Path::new(&file).exists());
    let o = bench(&[
        "run", "--kind", "kmeans", "--impl", "manual-cmov", "--k", "3", "--iters", "2", "--reps", "3", "--input",
        file.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let row = stdout(&o).lines().nth(1).unwrap().to_owned();
    assert!(row.starts_with("kmeans,manual-cmov,20,8,"), "{row}");
}
