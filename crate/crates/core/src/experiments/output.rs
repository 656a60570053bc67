use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::studies::Run;
use super::{svg, ExperimentResult};
use crate::error::Result;

pub const VARIANCE_HEADER: &str = "u,T,var_estimate,var_se,replications,predicted_order,predicted_constant";
pub const DISTRIBUTION_HEADER: &str = "u,T,ks_stat,p_value,test_kind,n";

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes through a sibling temporary file and a rename.
fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn variance_csv(result: &ExperimentResult) -> String {
    let mut s = String::from(VARIANCE_HEADER);
    s.push('\n');
    for r in &result.variance {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            format_float(r.u),
            format_float(r.horizon),
            format_float(r.var_estimate),
            format_float(r.var_se),
            r.replications,
            format_float(r.predicted_order),
            format_float(r.predicted_constant)
        );
    }
    s
}

fn distribution_csv(result: &ExperimentResult) -> String {
    let mut s = String::from(DISTRIBUTION_HEADER);
    s.push('\n');
    for r in &result.distribution {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            format_float(r.u),
            format_float(r.horizon),
            format_float(r.ks_stat),
            format_float(r.p_value),
            r.test_kind.as_str(),
            r.n
        );
    }
    s
}

/// Writes `result.json`, the CSV tables that apply and, if asked, SVG plots.
/// Returns the paths written.
pub fn write_outputs(run: &Run, dir: &Path, plots: bool) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let result = &run.result;
    let mut written = Vec::new();
    let mut put = |name: &str, text: &str| -> Result<()> {
        let p = dir.join(name);
        write_atomic(&p, text)?;
        written.push(p);
        Ok(())
    };
    put("result.json", &(serde_json::to_string_pretty(result)? + "\n"))?;
    if !result.variance.is_empty() {
        put("variance.csv", &variance_csv(result))?;
    }
    if !result.distribution.is_empty() {
        put("distribution.csv", &distribution_csv(result))?;
    }
    if plots {
        if !result.slopes.is_empty() {
            let series: Vec<_> = result
                .slopes
                .iter()
                .map(|s| {
                    let pts = result.variance.iter().filter(|r| r.u == s.u).map(|r| (r.horizon, r.var_estimate)).collect();
                    (s.u, pts, s.fit.slope, s.fit.intercept)
                })
                .collect();
            put("scaling.svg", &svg::scaling(&series))?;
        }
        if let Some((x, other)) = &run.histogram {
            put("hist.svg", &svg::histogram(x, other.as_deref()))?;
        }
    }
    Ok(written)
}

pub fn load_result(path: &Path) -> Result<ExperimentResult> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::super::config::tests::reference_json;
    use super::super::{run, ExperimentConfig};
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            let s = format_float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            assert_eq!(s.trim_start_matches('-').split('e').next().unwrap().len(), 18);
        }
    }

    #[test]
    fn outputs_are_reproducible() {
        let cfg = ExperimentConfig::from_json(&reference_json(0.3, 0.8, "variance_scaling")).unwrap();
        let dir1 = tempfile::tempdir().unwrap();
        let dir2 = tempfile::tempdir().unwrap();
        let r = run(&cfg).unwrap();
        let files = write_outputs(&r, dir1.path(), true).unwrap();
        assert_eq!(files.len(), 3);
        write_outputs(&run(&cfg).unwrap(), dir2.path(), false).unwrap();
        for name in ["result.json", "variance.csv"] {
            assert_eq!(fs::read(dir1.path().join(name)).unwrap(), fs::read(dir2.path().join(name)).unwrap());
        }
        let csv = fs::read_to_string(dir1.path().join("variance.csv")).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(VARIANCE_HEADER));
        assert_eq!(lines.count(), cfg.thresholds.len() * cfg.horizons.len());
        let back = load_result(&dir1.path().join("result.json")).unwrap();
        assert_eq!(back, r.result);
        assert!(fs::read_dir(dir1.path()).unwrap().all(|e| !e.unwrap().path().to_string_lossy().ends_with(".tmp")));
    }
}
