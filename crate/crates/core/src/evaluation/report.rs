use std::fmt::Write;

use super::runner::EvaluationReport;

impl EvaluationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<EvaluationReport, serde_json::Error> {
        serde_json::from_str(s)
    }
}

/// One row per report: mean and std over repeats.
pub fn summary_csv(reports: &[EvaluationReport]) -> String {
    let mut s = String::from(
        "segment,name,ensemble_size,n_subjects,auc_mean,auc_std,bac_sens80_mean,bac_sens80_std,bac_mean,bac_std,\
         gmean_mean,gmean_std,sensitivity_mean,specificity_mean,clinically_relevant_repeats\n",
    );
    for r in reports {
        let m = &r.summary;
        let relevant = r.repeats.iter().filter(|x| x.clinical.relevant).count();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}/{}",
            r.segment.name(),
            r.name,
            r.configs.len(),
            r.n_subjects,
            m.auc.mean,
            m.auc.std,
            m.bac_at_sens.mean,
            m.bac_at_sens.std,
            m.bac.mean,
            m.bac.std,
            m.gmean.mean,
            m.gmean.std,
            m.sensitivity.mean,
            m.specificity.mean,
            relevant,
            r.repeats.len()
        );
    }
    s
}

pub fn predictions_csv(report: &EvaluationReport) -> String {
    let mut s = String::from("seed,subject_id,label,log_odds,probability,decision,threshold\n");
    for rep in &report.repeats {
        for (p, f) in rep.predictions.iter().zip(&rep.folds) {
            let th = f.threshold.map_or(String::new(), |t| t.to_string());
            let _ = writeln!(s, "{},{},{},{},{},{},{}", rep.seed, p.subject_id, p.label, p.log_odds, p.probability, p.decision as u8, th);
        }
    }
    s
}

pub fn roc_csv(report: &EvaluationReport) -> String {
    let mut s = String::from("seed,fpr,tpr,threshold\n");
    for rep in &report.repeats {
        for p in &rep.roc {
            let th = p.threshold.map_or(String::new(), |t| t.to_string());
            let _ = writeln!(s, "{},{},{},{}", rep.seed, p.fpr, p.tpr, th);
        }
    }
    s
}

/// ROC polylines of every repeat over the shaded clinically relevant
/// region, with each repeat's operating point.
pub fn roc_svg(report: &EvaluationReport) -> String {
    const SIZE: f64 = 400.0;
    const PAD: f64 = 40.0;
    let px = |fpr: f64| PAD + fpr * SIZE;
    let py = |tpr: f64| PAD + (1.0 - tpr) * SIZE;
    let mut s = String::new();
    let total = SIZE + 2.0 * PAD;
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total}" height="{total}" viewBox="0 0 {total} {total}">"#);
    let _ = writeln!(s, r#"<rect x="{PAD}" y="{PAD}" width="{SIZE}" height="{SIZE}" fill="white" stroke="black"/>"#);
    if let Some(rep) = report.repeats.first() {
        let slope = rep.clinical.slope;
        // region TPR > slope * FPR inside the unit square
        let corner = if slope >= 1.0 { (1.0 / slope, 1.0) } else { (1.0, slope) };
        let mut poly = vec![(0.0, 0.0), corner];
        if slope < 1.0 {
            poly.push((1.0, 1.0));
        }
        poly.push((0.0, 1.0));
        let pts: Vec<String> = poly.iter().map(|&(f, t)| format!("{:.2},{:.2}", px(f), py(t))).collect();
        let _ = writeln!(s, r##"<polygon points="{}" fill="#9ecae1" fill-opacity="0.4" stroke="none"/>"##, pts.join(" "));
    }
    let _ = writeln!(
        s,
        r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#999" stroke-dasharray="4 4"/>"##,
        px(0.0),
        py(0.0),
        px(1.0),
        py(1.0)
    );
    for rep in &report.repeats {
        let pts: Vec<String> = rep.roc.iter().map(|p| format!("{:.2},{:.2}", px(p.fpr), py(p.tpr))).collect();
        let _ = writeln!(s, r##"<polyline points="{}" fill="none" stroke="#d62728" stroke-opacity="0.7"/>"##, pts.join(" "));
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="black"/>"#,
            px(rep.clinical.fpr),
            py(rep.clinical.tpr)
        );
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">False positive rate</text>"#, PAD + SIZE / 2.0, total - 8.0);
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" font-size="14" transform="rotate(-90 14 {})">True positive rate</text>"#,
        PAD + SIZE / 2.0,
        PAD + SIZE / 2.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{} (AUC {:.3} ± {:.3})</text>"#,
        PAD + SIZE / 2.0,
        escape(&report.name),
        report.summary.auc.mean,
        report.summary.auc.std
    );
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::super::runner::{ClinicalVerdict, MeanStd, RepeatResult, Summary};
    use super::super::RocPoint;
    use super::*;
    use crate::features::{Combiner, Family, FeatureConfig};
    use crate::ingest::SegmentKind;
    use crate::preprocess::MontageKind;

    fn report() -> EvaluationReport {
        let ms = MeanStd { mean: 0.75, std: 0.05 };
        EvaluationReport {
            name: "Spectral-CAR-10s-Mean".into(),
            segment: SegmentKind::Ips,
            configs: vec![FeatureConfig::new(Family::Spectral, MontageKind::Car, 10, Combiner::Mean)],
            n_subjects: 2,
            repeats: vec![RepeatResult {
                seed: 0,
                predictions: vec![],
                folds: vec![],
                roc: vec![
                    RocPoint { fpr: 0.0, tpr: 0.0, threshold: None },
                    RocPoint { fpr: 1.0, tpr: 1.0, threshold: Some(0.1) },
                ],
                auc: 0.75,
                bac_at_sens: 0.7,
                bac: 0.7,
                sensitivity: 0.8,
                specificity: 0.6,
                gmean: 0.7,
                clinical: ClinicalVerdict { slope: 1.5, p1: 0.5, p0: 0.5, fpr: 0.4, tpr: 0.8, relevant: true },
            }],
            summary: Summary { auc: ms, bac_at_sens: ms, bac: ms, gmean: ms, sensitivity: ms, specificity: ms },
        }
    }

    #[test]
    fn csv_has_one_row_per_report() {
        let s = summary_csv(&[report(), report()]);
        assert_eq!(s.lines().count(), 3);
        assert!(s.lines().nth(1).unwrap().starts_with("ips,Spectral-CAR-10s-Mean,1,2,0.75,0.05"));
        assert!(s.lines().nth(1).unwrap().ends_with(",1/1"));
    }

    #[test]
    fn svg_shades_region() {
        let s = roc_svg(&report());
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        // slope 1.5 meets TPR = 1 at FPR = 2/3
        assert!(s.contains("polygon points=\"40.00,440.00 306.67,40.00 40.00,40.00\""), "{s}");
    }

    #[test]
    fn json_roundtrip() {
        let r = report();
        assert_eq!(EvaluationReport::from_json(&r.to_json()).unwrap(), r);
    }
}
