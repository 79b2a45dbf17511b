use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const FIGURE_ONE: &str = "(((T1:1,T2:1):1,T3:2):1,(T4:2,T5:2):1);";

fn zazou(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zazou")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn correct_args<'a>(tree: &'a Path, p: &'a Path, out: &'a Path, fdr: &'a str) -> Vec<&'a str> {
    vec!["correct", "--tree", s(tree), "--pvalues", s(p), "--out", s(out), "--fdr", fdr]
}

#[test]
fn correct_writes_table_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let tree = write(dir.path(), "t.nwk", FIGURE_ONE);
    let p = write(dir.path(), "p.csv", "feature_id,p_value\nT3,0.02\nT1,0.001\nT2,0.004\nT4,0.6\nT5,0.8\n");
    let out = dir.path().join("q.csv");
    let run = zazou(&correct_args(&tree, &p, &out, "0.1"));
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));

    let mut rdr = csv::Reader::from_path(&out).unwrap();
    assert_eq!(rdr.headers().unwrap(), vec!["feature_id", "p_raw", "z", "p_ss", "q_ss", "rejected"]);
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 5);
    assert_eq!(&rows[0][0], "T3");
    let p_raw: f64 = rows[1][1].parse().unwrap();
    assert_eq!(p_raw, 0.001);

    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("q.json")).unwrap()).unwrap();
    for key in ["t_star", "alpha_hat", "lambda_hat", "bic_trace", "warnings", "alpha_grid"] {
        assert!(report.get(key).is_some(), "report lacks {key}");
    }
}

#[test]
fn label_mismatch_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let tree = write(dir.path(), "t.nwk", FIGURE_ONE);
    let p = write(dir.path(), "p.csv", "feature_id,p_value\nT1,0.1\nT2,0.2\nT9,0.3\nT4,0.4\nT5,0.5\n");
    let run = zazou(&correct_args(&tree, &p, &dir.path().join("q.csv"), "0.1"));
    assert_eq!(run.status.code(), Some(2));
    let err = String::from_utf8_lossy(&run.stderr);
    assert!(err.contains("T9") && err.contains("line 4"), "{err}");

    let missing = write(dir.path(), "m.csv", "feature_id,p_value\nT1,0.1\nT2,0.2\n");
    let run = zazou(&correct_args(&tree, &missing, &dir.path().join("q.csv"), "0.1"));
    assert_eq!(run.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&run.stderr).contains("T3"));

    let bad_fdr = zazou(&correct_args(&tree, &missing, &dir.path().join("q.csv"), "1.5"));
    assert_eq!(bad_fdr.status.code(), Some(2));
}

#[test]
fn q_values_change_with_fdr() {
    let dir = tempfile::tempdir().unwrap();
    let tree = write(dir.path(), "t.nwk", FIGURE_ONE);
    let p = write(dir.path(), "p.csv", "feature_id,p_value\nT1,0.001\nT2,0.004\nT3,0.02\nT4,0.6\nT5,0.8\n");
    let column = |fdr: &str| {
        let out = dir.path().join(format!("q{fdr}.csv"));
        assert!(zazou(&correct_args(&tree, &p, &out, fdr)).status.success());
        let mut rdr = csv::Reader::from_path(&out).unwrap();
        rdr.records().map(|r| r.unwrap()[4].to_string()).collect::<Vec<_>>()
    };
    assert_ne!(column("0.05"), column("0.10"));
}

fn write_counts(dir: &Path, rows: &[(&str, Vec<f64>)], n_b: usize) -> (PathBuf, PathBuf) {
    let n = rows[0].1.len();
    let mut table = String::from("taxon");
    for j in 0..n {
        table += &format!(",S{j}");
    }
    for (name, values) in rows {
        table += &format!("\n{name}");
        for v in values {
            table += &format!(",{v}");
        }
    }
    let mut groups = String::from("sample_id,group\n");
    for j in 0..n {
        groups += &format!("S{j},{}\n", if j < n - n_b { "adult" } else { "child" });
    }
    (write(dir, "ab.csv", &table), write(dir, "g.csv", &groups))
}

#[test]
fn test_then_correct_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (n_a, n_b) = (112, 34);
    let n = n_a + n_b;
    let rows: Vec<(&str, Vec<f64>)> = vec![
        ("T1", (0..n).map(|j| if j >= n_a { 50.0 + j as f64 } else { j as f64 % 7.0 }).collect()),
        ("T2", (0..n).map(|j| if j >= n_a { 40.0 + j as f64 } else { j as f64 % 5.0 }).collect()),
        ("T3", vec![4.0; n]),
        ("T4", (0..n).map(|j| (j * 13 % 17) as f64).collect()),
        ("T5", (0..n).map(|j| (j * 7 % 11) as f64).collect()),
    ];
    let (ab, groups) = write_counts(dir.path(), &rows, n_b);
    let pvals = dir.path().join("p.csv");
    let run = zazou(&["test", "--abundance", s(&ab), "--groups", s(&groups), "--out", s(&pvals)]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let mut rdr = csv::Reader::from_path(&pvals).unwrap();
    assert_eq!(rdr.headers().unwrap(), vec!["feature_id", "p_value"]);
    let p: Vec<(String, f64)> = rdr.records().map(|r| { let r = r.unwrap(); (r[0].to_string(), r[1].parse().unwrap()) }).collect();
    assert_eq!(p[2], ("T3".to_string(), 1.0));
    assert!(p[0].1 < 1e-6);

    let tree = write(dir.path(), "t.nwk", FIGURE_ONE);
    let run = zazou(&correct_args(&tree, &pvals, &dir.path().join("q.csv"), "0.05"));
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
}

#[test]
fn test_rejects_bad_tables() {
    let dir = tempfile::tempdir().unwrap();
    let ab = write(dir.path(), "ab.csv", "taxon,S1,S2,S3\nT1,1,x,3\n");
    let groups = write(dir.path(), "g.csv", "sample_id,group\nS1,a\nS2,b\nS3,b\n");
    let out = dir.path().join("p.csv");
    let run = zazou(&["test", "--abundance", s(&ab), "--groups", s(&groups), "--out", s(&out)]);
    assert_eq!(run.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&run.stderr).contains("line 2"));

    let ab = write(dir.path(), "ab2.csv", "taxon,S1,S2,S3\nT1,1,2,3\n");
    let one_group = write(dir.path(), "g1.csv", "sample_id,group\nS1,a\nS2,a\nS3,a\n");
    let run = zazou(&["test", "--abundance", s(&ab), "--groups", s(&one_group), "--out", s(&out)]);
    assert_eq!(run.status.code(), Some(2));

    let missing = write(dir.path(), "g2.csv", "sample_id,group\nS1,a\nS2,b\n");
    let run = zazou(&["test", "--abundance", s(&ab), "--groups", s(&missing), "--out", s(&out)]);
    assert_eq!(run.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&run.stderr).contains("S3"));
}

#[test]
fn simulate_writes_one_row_per_replicate_and_method() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.csv");
    let run = zazou(&[
        "simulate", "--taxa", "20", "--replicates", "3", "--fc", "10", "--variant", "positive", "--methods",
        "raw,bh,by", "--out", s(&out),
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let mut rdr = csv::Reader::from_path(&out).unwrap();
    assert_eq!(rdr.headers().unwrap(), vec!["fc", "variant", "prop_da", "seed", "method", "tpr", "fdr", "auc"]);
    assert_eq!(rdr.records().count(), 9);
    assert!(dir.path().join("c.json").exists());

    let bad = zazou(&["simulate", "--fc", "0.5", "--out", s(&out)]);
    assert_eq!(bad.status.code(), Some(2));
}
