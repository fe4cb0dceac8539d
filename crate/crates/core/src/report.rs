//! Structured-text reports: ordered `key = value` lines, with numeric
//! arrays as comma-separated lists. Field names follow the report types.

use crate::eval::{EvalReport, SweepPoint};
use crate::pipeline::{DetectionReport, PurifyReport};
use crate::theory::verify::TheoryCheck;
use std::fmt::Write as _;

#[derive(Clone, Debug, Default)]
pub struct Report {
    lines: Vec<(String, String)>,
}

impl Report {
    pub fn new(kind: &str) -> Self {
        let mut r = Report::default();
        r.push("report", kind);
        r
    }

    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.lines.push((key.to_string(), value.to_string()));
    }

    pub fn push_f64(&mut self, key: &str, value: f64) {
        self.lines.push((key.to_string(), format!("{value:.6}")));
    }

    pub fn push_list(&mut self, key: &str, values: &[f64]) {
        let joined = values.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>().join(",");
        self.lines.push((key.to_string(), joined));
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.lines {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn write(&self, path: &std::path::Path) -> std::io::Result<()> {
        std::fs::write(path, self.render())
    }
}

pub fn purify_report(r: &PurifyReport) -> Report {
    let mut out = Report::new("purify");
    out.push_f64("kld1", r.kld1);
    out.push_f64("kld2", r.kld2);
    out.push_f64("psnr_x0_xhat0", r.psnr_x0_xhat0);
    out.push_f64("psnr_x1_xhat1", r.psnr_x1_xhat1);
    out.push_f64("psnr_x2_xhat2", r.psnr_x2_xhat2);
    for (path, key) in [(&r.p1_path, "p1_path"), (&r.p2_path, "p2_path"), (&r.p3_path, "p3_path")] {
        if let Some(p) = path {
            out.push(key, p);
        }
    }
    for (tag, log) in [("stage1", &r.stage1_log), ("stage2", &r.stage2_log)] {
        out.push_list(&format!("{tag}.distortion"), &log.distortion);
        out.push_list(&format!("{tag}.recover"), &log.recover);
        out.push_list(&format!("{tag}.rate"), &log.rate);
        out.push_list(&format!("{tag}.kld"), &log.kld);
        out.push_list(&format!("{tag}.probe_psnr"), &log.probe_psnr);
    }
    out
}

pub fn detection_report(r: &DetectionReport) -> Report {
    let mut out = Report::new("detection");
    out.push_f64("accuracy", r.accuracy);
    out.push_f64("recall", r.recall);
    out.push_f64("precision", r.precision);
    out.push_f64("f1", r.f1);
    let flags = r.flags.iter().map(|&f| if f { "1" } else { "0" }).collect::<Vec<_>>().join(",");
    out.push("flags", flags);
    out
}

pub fn eval_report(r: &EvalReport) -> Report {
    let mut out = Report::new("disentanglement_validation");
    out.push_f64("accuracy_on_clean_train", r.accuracy_on_clean_train);
    out.push_f64("accuracy_on_clean_test", r.accuracy_on_clean_test);
    out.push_f64("accuracy_on_unlearnable", r.accuracy_on_unlearnable);
    out
}

pub fn sweep_report(points: &[SweepPoint]) -> Report {
    let mut out = Report::new("kld_sweep");
    out.push_list("kld_target", &points.iter().map(|p| p.kld_target).collect::<Vec<_>>());
    out.push_list("probe_psnr", &points.iter().map(|p| p.probe_psnr).collect::<Vec<_>>());
    out.push_list(
        "clean_test_accuracy",
        &points.iter().map(|p| p.clean_test_accuracy).collect::<Vec<_>>(),
    );
    out
}

pub fn theory_report(checks: &[TheoryCheck]) -> Report {
    let mut out = Report::new("theory_verify");
    let all = checks.iter().all(|c| c.passed);
    out.push("all_passed", all);
    for c in checks {
        out.push(&format!("check.{}", c.name), if c.passed { "pass" } else { "FAIL" });
        out.push(&format!("detail.{}", c.name), &c.detail);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_ordered_kv_lines() {
        let mut r = Report::new("test");
        r.push_f64("alpha", 1.25);
        r.push_list("xs", &[1.0, 2.5]);
        let text = r.render();
        assert_eq!(text, "report = test\nalpha = 1.250000\nxs = 1.000000,2.500000\n");
    }
}
