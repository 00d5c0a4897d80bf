use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bioqa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bioqa")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const QUESTIONS: &str = r#"{"questions": [
  {"id": "f1", "type": "factoid", "body": "Which gene causes X?", "exact_answer": [["BRCA1"]],
   "snippets": [{"text": "BRCA1 causes X. BRCA1 is common.", "document": "http://www.ncbi.nlm.nih.gov/pubmed/1",
                 "beginSection": "abstract", "offsetInBeginSection": 0}]},
  {"id": "y1", "type": "yesno", "body": "Is it?", "exact_answer": "yes",
   "snippets": [{"text": "It is.", "document": "http://www.ncbi.nlm.nih.gov/pubmed/2",
                 "beginSection": "abstract", "offsetInBeginSection": 0}]},
  {"id": "s1", "type": "summary", "body": "Describe it.", "snippets": []}
]}"#;

fn write_questions(dir: &Path) -> String {
    let path = dir.join("q.json");
    fs::write(&path, QUESTIONS).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn convert_reports_counts_and_writes_squad() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_questions(dir.path());
    let out_file = dir.path().join("factoid.json");
    let o = bioqa(&["convert", "--input", &input, "--qtype", "factoid", "--output", out_file.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let row = text.lines().find(|l| l.starts_with("factoid")).unwrap();
    assert_eq!(row.split_whitespace().collect::<Vec<_>>(), ["factoid", "1", "1", "2"]);
    assert!(!text.contains("yesno "));
    let squad: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_file).unwrap()).unwrap();
    assert_eq!(squad["version"], "1.1");
}

#[test]
fn yesno_without_minority_class_needs_no_balance() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_questions(dir.path());
    let out_dir = dir.path().to_str().unwrap();
    let o = bioqa(&["convert", "--input", &input, "--output-dir", out_dir]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("cannot balance yes/no pairs: no \"no\" examples"), "{}", stderr(&o));
    let o = bioqa(&["convert", "--input", &input, "--output-dir", out_dir, "--no-balance"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("yesno pairs before undersampling: 1"));
    assert!(dir.path().join("yesno.json").is_file());
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# predict settings\nmax_seq_len = 64\nthreshold=0.3\nk=5\n").unwrap();
    let o = bioqa(&["predict", "--config", cfg.to_str().unwrap(), "--k", "9", "--show-config"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    for line in ["max-seq-len=64", "threshold=0.3", "k=9", "doc-stride=128", "jobs=1"] {
        assert!(text.lines().any(|l| l == line), "{line} missing from\n{text}");
    }
}

#[test]
fn config_file_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "learning_rate=0.1\n").unwrap();
    let o = bioqa(&["predict", "--config", cfg.to_str().unwrap(), "--show-config"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("unknown key `learning-rate`"), "{}", stderr(&o));
}

#[test]
fn threshold_must_be_inside_unit_interval() {
    for t in ["0", "1", "1.5", "-0.2"] {
        let o = bioqa(&["ensemble", "--nbest", "x.json", "--output", "a.json", &format!("--threshold={t}")]);
        assert!(!o.status.success());
        assert!(stderr(&o).contains("strictly between 0 and 1"), "{}", stderr(&o));
    }
}

#[test]
fn missing_inputs_and_output_dirs_fail_before_work() {
    let o = bioqa(&["evaluate", "--answers", "/nonexistent/a.json", "--gold", "/nonexistent/g.json"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("/nonexistent/a.json"));
    let dir = tempfile::tempdir().unwrap();
    let input = write_questions(dir.path());
    let o = bioqa(&["convert", "--input", &input, "--qtype", "factoid", "--output", "/nonexistent/dir/out.json"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("does not exist"));
}

#[test]
fn offline_full_abstract_names_missing_pmid() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_questions(dir.path());
    let cache = dir.path().join("cache");
    fs::create_dir(&cache).unwrap();
    let out = dir.path().join("f.json");
    let args = [
        "convert", "--input", &input, "--qtype", "factoid", "--output", out.to_str().unwrap(),
        "--strategy", "full_abstract", "--offline", "--cache-dir", cache.to_str().unwrap(),
    ];
    let o = bioqa(&args);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("abstract 1 unavailable"), "{}", stderr(&o));
    let mut keep_going = args.to_vec();
    keep_going.push("--keep-going");
    let o = bioqa(&keep_going);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("questions skipped after errors: 1"));
}

#[test]
fn ensemble_of_one_run_reproduces_its_answers() {
    let dir = tempfile::tempdir().unwrap();
    let nbest = dir.path().join("nbest.json");
    fs::write(
        &nbest,
        r#"{"questions": [
          {"id": "l1", "type": "list", "question": "List 2 genes.", "pairs": ["l1_000_00"],
           "candidates": [{"text": "a", "probability": 0.3}, {"text": "b", "probability": 0.2}, {"text": "c", "probability": 0.1}],
           "yes_probabilities": [], "answer_count": 2},
          {"id": "y1", "type": "yesno", "question": "Is it?", "pairs": ["y1_000_00", "y1_001_00"],
           "candidates": [], "yes_probabilities": [0.4, 0.7]}
        ]}"#,
    )
    .unwrap();
    let out = dir.path().join("answers.json");
    let n = nbest.to_str().unwrap();
    let o = bioqa(&["ensemble", "--nbest", n, "--nbest", n, "--output", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["questions"][0]["exact_answer"], serde_json::json!([["a"], ["b"]]));
    assert_eq!(v["questions"][1]["exact_answer"], "yes");
}
