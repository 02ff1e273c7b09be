//! Leaf traces as CSV polylines plus a JSON side file for soul coefficients.

use liact_core::fields::Chart;
use liact_core::flows::LeafSample;
use liact_core::group::Group;
use serde_json::{json, Value};

/// Row indices kept for a stride; the last sample is always included.
pub fn rows(trace: &LeafSample, stride: usize) -> Vec<usize> {
    let n = trace.len();
    let mut out: Vec<usize> = (0..n).step_by(stride.max(1)).collect();
    if out.last() != Some(&(n - 1)) {
        out.push(n - 1);
    }
    out
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Columns `t, g…, m…`; periodic chart coordinates are reduced and only
/// bodies are written.
pub fn csv(group: &Group, chart: &Chart, trace: &LeafSample, rows: &[usize]) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    let mut header = vec!["t".to_string()];
    header.extend(group.coord_names());
    header.extend(chart.names());
    w.write_record(&header).expect("in-memory write");
    for &k in rows {
        let mut body = trace.body(k);
        chart.normalize(&mut body);
        let mut rec = vec![num(trace.times[k])];
        rec.extend(group.coords(&trace.group[k]).into_iter().map(num));
        rec.extend(body.into_iter().map(num));
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("ascii output")
}

/// Soul terms of every point in the kept rows.
pub fn souls_json(chart: &Chart, trace: &LeafSample, rows: &[usize]) -> String {
    let samples: Vec<Value> = rows
        .iter()
        .map(|&k| {
            let coords: serde_json::Map<String, Value> = trace.points[k]
                .iter()
                .enumerate()
                .map(|(i, v)| (chart.name(i).to_string(), serde_json::to_value(v.soul()).expect("supernumber json")))
                .collect();
            json!({ "row": k, "t": trace.times[k], "souls": coords })
        })
        .collect();
    serde_json::to_string_pretty(&Value::Array(samples)).expect("json")
}

#[cfg(test)]
mod tests {
    use liact_core::flows::FlowStatus;
    use liact_core::{GroupElement, Supernumber};

    use super::*;

    fn trace(n: usize) -> LeafSample {
        LeafSample {
            times: (0..n).map(|k| k as f64 * 0.1).collect(),
            group: (0..n).map(|k| GroupElement::Circle((k as f64 * 0.3) % 1.0)).collect(),
            points: (0..n).map(|k| vec![Supernumber::scalar(0, 0.5 + k as f64)]).collect(),
            status: FlowStatus::Completed,
        }
    }

    #[test]
    fn stride_keeps_last_row() {
        assert_eq!(rows(&trace(5), 2), vec![0, 2, 4]);
        assert_eq!(rows(&trace(6), 2), vec![0, 2, 4, 5]);
        assert_eq!(rows(&trace(1), 3), vec![0]);
    }

    #[test]
    fn rfc4180_layout() {
        let chart = Chart::new(&["x"], &[]).unwrap().with_period("x", 1.0).unwrap();
        let g = Group::circle(0);
        let t = trace(3);
        let out = csv(&g, &chart, &t, &rows(&t, 1));
        let lines: Vec<&str> = out.split("\r\n").collect();
        assert_eq!(lines[0], "t,g1,x");
        assert_eq!(lines[1], "0.0000000000000000e0,0.0000000000000000e0,5.0000000000000000e-1");
        // 1.5 reduces to 0.5 on the circle
        assert!(lines[2].ends_with(",5.0000000000000000e-1"));
        assert_eq!(lines.len(), 5);
    }
}
