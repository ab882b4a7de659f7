mod common;

use resonance_core::experiments::{decay_study, h_sweep, SweepConfig};
use resonance_core::io::*;
use resonance_core::spectra::StateKind;

fn attr(tag: &str, name: &str) -> f64 {
    let key = format!("{name}=\"");
    let start = tag.find(&key).unwrap() + key.len();
    let end = start + tag[start..].find('"').unwrap();
    tag[start..end].parse().unwrap()
}

#[test]
fn sweep_outputs_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SweepConfig::new(common::bump_well(), (0.6, 1.6), vec![0.5, 0.25, 1.0 / 6.0]);
    let table = h_sweep(&cfg).unwrap();
    let records: Vec<_> = table.records().copied().collect();
    let expected: usize = table.rows.iter().map(|r| r.states.len()).sum();

    let states = dir.path().join("states.csv");
    emit_states_csv(&states, &records).unwrap();
    let back = read_states_csv(std::fs::File::open(&states).unwrap()).unwrap();
    assert_eq!(back.len(), expected);
    for (a, b) in sorted_states(&records).iter().zip(&back) {
        assert_eq!(fmt_real(a.k), fmt_real(b.k));
        assert_eq!(fmt_real(a.h), fmt_real(b.h));
        assert_eq!(fmt_real(a.residual), fmt_real(b.residual));
    }
    assert!(back.windows(2).all(|w| w[0].h >= w[1].h));

    let study = decay_study(&table, (0.6, 1.6), 0.1);
    let pairs = dir.path().join("pairs.csv");
    emit_pairs_csv(&pairs, &study.pairings).unwrap();
    let n_pairs: usize = study.pairings.iter().map(|(_, r)| r.pairs.len()).sum();
    assert_eq!(
        std::fs::read_to_string(&pairs).unwrap().lines().count(),
        n_pairs + 1
    );

    let fit = dir.path().join("fit.json");
    emit_fit_json(&fit, study.fit.as_ref().unwrap()).unwrap();
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&fit).unwrap()).unwrap();
    for key in ["delta_hat", "logC_hat", "r_squared"] {
        assert!(v[key].is_f64(), "{key}");
    }
}

#[test]
fn svg_markers_match_rows() {
    let cfg = SweepConfig::new(common::bump_well(), (0.6, 1.6), vec![0.5, 0.25]);
    let records: Vec<_> = h_sweep(&cfg).unwrap().records().copied().collect();
    let style = PlotStyle::default();
    let svg = render_scatter_svg(&records, &style);
    let frame = Frame::fit(&records, &style);
    let markers: Vec<&str> = svg
        .lines()
        .filter(|l| l.contains("class=\"marker "))
        .collect();
    assert_eq!(markers.len(), records.len());
    for kind in StateKind::ALL {
        let n = records.iter().filter(|r| r.kind == kind).count();
        let class = format!("class=\"marker {}\"", kind.as_str());
        assert_eq!(markers.iter().filter(|m| m.contains(&class)).count(), n);
    }
    assert_eq!(
        svg.matches("<rect class=\"marker bound\"").count(),
        records
            .iter()
            .filter(|r| r.kind == StateKind::Bound)
            .count()
    );
    assert_eq!(
        svg.matches("<circle class=\"marker antibound\"").count(),
        records
            .iter()
            .filter(|r| r.kind == StateKind::Antibound)
            .count()
    );
    for m in markers.iter().filter(|m| m.contains("<circle")) {
        let (cx, cy) = frame.to_px(attr(m, "data-inv-h"), attr(m, "data-k"));
        assert!((attr(m, "cx") - cx).abs() < 1e-9 && (attr(m, "cy") - cy).abs() < 1e-9);
    }
}

#[test]
fn config_file_parse() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    std::fs::write(
        &path,
        r#"{"potential": {"kind": "pc", "breaks": [0, 0.6, 2], "values": [1, -3], "bump_width": 0.6},
            "band": [0.6, 1.6], "h": [0.5, 0.25], "margin": 0.1}"#,
    )
    .unwrap();
    let cfg = parse_config(&path).unwrap();
    assert_eq!(cfg.potential.build().unwrap(), common::bump_well());
    assert_eq!(cfg.margin(), 0.1);
    assert!(matches!(
        parse_config(&dir.path().join("missing.json")),
        Err(IoError::Read { .. })
    ));
}
