mod support;

use support::*;

fn fixture(dir: &tempfile::TempDir, seed: u64, n: usize) -> String {
    let mut g = rng(seed);
    let (a, b) = two_groups(&mut g, 80, 60, n);
    let path = dir.path().join("data.csv");
    write_groups(&path, &a, &b);
    path.to_str().unwrap().to_string()
}

fn out(dir: &tempfile::TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_string()
}

fn phi_rows(path: &str) -> Vec<(f64, f64, String)> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].to_string())
        })
        .collect()
}

#[test]
fn pca_writes_basis_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture(&dir, 1, 6);
    let (report, basis) = (out(&dir, "pca.json"), out(&dir, "u.csv"));
    let mut args = vec!["pca"];
    args.extend(group_args(&input, "2"));
    args.extend(["--output", &report, "--basis", &basis]);
    let o = run(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rep = read_json(report.as_ref());
    assert_eq!(rep["method"], "pca");
    assert_eq!(rep["rows_a"], 80);
    let text = std::fs::read_to_string(&basis).unwrap();
    assert_eq!(text.lines().count(), 6);
    assert!(text.lines().all(|l| l.split(',').count() == 2));
}

#[test]
fn fpca_on_identical_groups_reports_zero_losses() {
    let dir = tempfile::tempdir().unwrap();
    let mut g = rng(2);
    let a = gaussian(&mut g, 30, 4);
    let path = dir.path().join("same.csv");
    write_groups(&path, &a, &a);
    let report = out(&dir, "f.json");
    let mut args = vec!["fpca"];
    args.extend(group_args(path.to_str().unwrap(), "2"));
    args.extend(["--output", &report]);
    let o = run(&args);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rep = read_json(report.as_ref());
    let scale = rep["metrics"]["scale"].as_f64().unwrap();
    for key in ["loss_a", "loss_b"] {
        assert!(rep["metrics"][key].as_f64().unwrap() <= 1e-12 * scale);
    }
    assert!(rep["metrics"]["fairness_ratio_error"].is_null());
}

#[test]
fn phi_grid_is_concave_with_zero_endpoints() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture(&dir, 3, 7);
    let csv = out(&dir, "phi.csv");
    let mut args = vec!["phi"];
    args.extend(group_args(&input, "3"));
    args.extend(["--output", &csv]);
    let o = run(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = phi_rows(&csv);
    assert_eq!(rows.len(), 102);
    let grid: Vec<(f64, f64)> = rows.iter().filter(|r| r.2 == "grid").map(|r| (r.0, r.1)).collect();
    let star = rows.iter().find(|r| r.2 == "t_star").unwrap();
    let scale = grid.iter().map(|p| p.1.abs()).fold(star.1.abs(), f64::max).max(1.0);
    assert!(grid[0].1.abs() <= 1e-9 * scale && grid[100].1.abs() <= 1e-9 * scale);
    for w in grid.windows(3) {
        assert!(w[0].1 - 2.0 * w[1].1 + w[2].1 <= 1e-8 * scale);
    }
    let grid_max = grid.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    assert!(grid_max <= star.1 + 1e-9 * scale);
}

#[test]
fn phi_optimum_matches_fine_grid() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture(&dir, 4, 5);
    let csv = out(&dir, "phi.csv");
    let mut args = vec!["phi"];
    args.extend(group_args(&input, "2"));
    args.extend(["--output", &csv, "--grid", "10001"]);
    let o = run(&args);
    assert!(o.status.success());
    let rows = phi_rows(&csv);
    let star = rows.last().unwrap();
    let best = rows[..rows.len() - 1]
        .iter()
        .max_by(|p, q| p.1.partial_cmp(&q.1).unwrap())
        .unwrap();
    assert!((star.0 - best.0).abs() <= 1e-8 + 1e-4, "t* {} grid argmax {}", star.0, best.0);
}

#[test]
fn compare_matches_standalone_runs() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture(&dir, 5, 6);
    let (cmp, f) = (out(&dir, "cmp.json"), out(&dir, "f.json"));
    let mut args = vec!["compare"];
    args.extend(group_args(&input, "2"));
    args.extend(["--output", &cmp]);
    assert!(run(&args).status.success());
    let mut args = vec!["fpca"];
    args.extend(group_args(&input, "2"));
    args.extend(["--output", &f]);
    assert!(run(&args).status.success());
    let c = read_json(cmp.as_ref());
    assert_eq!(c["fpca"], read_json(f.as_ref()));
    let e_pca = c["pca"]["metrics"]["error_overall"].as_f64().unwrap();
    let e_fpca = c["fpca"]["metrics"]["error_overall"].as_f64().unwrap();
    assert!(e_fpca >= e_pca * (1.0 - 1e-12));
    assert!(c["pca_loss_gap"].as_f64().unwrap() > c["fpca_loss_gap"].as_f64().unwrap());
}

#[test]
fn numrange_exports_samples_and_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture(&dir, 6, 5);
    let csv = out(&dir, "range.csv");
    let mut args = vec!["numrange"];
    args.extend(group_args(&input, "2"));
    args.extend(["--output", &csv, "--samples", "4096", "--overlay-fpca"]);
    let o = run(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next(), Some("theta,y1,y2,on_hull"));
    assert_eq!(text.lines().count(), 4097);
    let diag = read_json(&dir.path().join("range.diagnostics.json"));
    let scale = diag["scale"].as_f64().unwrap();
    let dist = diag["overlay"]["distance_to_diagonal"].as_f64().unwrap();
    assert!(dist <= 1e-6 * scale, "{dist} vs scale {scale}: {}", diag["overlay"]);
    assert_ne!(diag["diagonal"]["kind"], "empty");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture(&dir, 7, 4);

    let mut args = vec!["fpca"];
    args.extend(group_args(&input, "4"));
    assert_eq!(run(&args).status.code(), Some(2), "rank >= n");

    let o = run(&["fpca", "--input", &input, "--rank", "1"]);
    assert_eq!(o.status.code(), Some(2), "missing flags");

    let missing = out(&dir, "missing.csv");
    let mut args = vec!["pca"];
    args.extend(group_args(&missing, "1"));
    assert_eq!(run(&args).status.code(), Some(3), "missing file");

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "x0,x1,group\n1,2,a\nfoo,3,b\n").unwrap();
    let mut args = vec!["pca"];
    args.extend(group_args(bad.to_str().unwrap(), "1"));
    let o = run(&args);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("row 2"));

    let mut args = vec!["numrange"];
    args.extend(group_args(&input, "1"));
    args.extend(["--samples", "2"]);
    assert_eq!(run(&args).status.code(), Some(2), "too few samples");
}

#[test]
fn csv_report_format() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture(&dir, 9, 5);
    let report = out(&dir, "r.csv");
    let mut args = vec!["fpca"];
    args.extend(group_args(&input, "2"));
    args.extend(["--output", &report, "--format", "csv"]);
    assert!(run(&args).status.success());
    let text = std::fs::read_to_string(&report).unwrap();
    assert!(text.starts_with("name,value\n"));
    assert!(text.lines().any(|l| l.starts_with("solver.t_star,")));
    assert!(text.lines().any(|l| l.starts_with("phi_profile.100.phi,")));
}
