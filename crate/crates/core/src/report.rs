//! Text, CSV, and GeoJSON renderings of fitted models.
//!
//! Text reports use fixed precision (3 decimals for coefficients, t and p,
//! 2 for VIF). CSV files carry full round-trip precision.

use std::fmt::Write as _;

use serde_json::{json, Map, Value};

use crate::data::ObservationTable;
use crate::error::{Error, Result};
use crate::esda::{HotSpotResult, MoranResult};
use crate::gwr::GwrModel;
use crate::mgwr::{MgwrModel, MgwrSummary};
use crate::ols::GlobalFit;
use crate::stats;

/// `0.000***`: three decimals plus significance stars at 0.001/0.01/0.05.
pub fn format_p(p: f64) -> String {
    let stars = if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    };
    format!("{p:.3}{stars}")
}

fn csv_bytes(header: &[&str], rows: Vec<Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))
}

fn table_text(header: &[String], rows: &[Vec<String>]) -> String {
    let ncol = header.len();
    let mut width = vec![0; ncol];
    for r in std::iter::once(header).chain(rows.iter().map(|r| r.as_slice())) {
        for (c, cell) in r.iter().enumerate() {
            width[c] = width[c].max(cell.chars().count());
        }
    }
    let mut out = String::new();
    for r in std::iter::once(header).chain(rows.iter().map(|r| r.as_slice())) {
        let mut line = String::new();
        for (c, cell) in r.iter().enumerate() {
            if c == 0 {
                let _ = write!(line, "{cell:<w$}", w = width[0]);
            } else {
                let _ = write!(line, "  {cell:>w$}", w = width[c]);
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

fn footer(lines: &[(&str, String)]) -> String {
    let w = lines.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    lines
        .iter()
        .map(|(k, v)| format!("{k:<w$}  {v}\n"))
        .collect()
}

/// Global regression table: coefficient, t, p with stars, VIF, and the
/// model footer.
pub fn ols_text(fit: &GlobalFit, dependent: &str) -> String {
    let header: Vec<String> = ["Variable", "Est Coeff", "T-value", "P-Value", "VIF"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows: Vec<Vec<String>> = (0..fit.names.len())
        .map(|j| {
            vec![
                fit.names[j].clone(),
                format!("{:.3}", fit.coefficients[j]),
                format!("{:.3}", fit.t_values[j]),
                format_p(fit.p_values[j]),
                if j == 0 { "-".into() } else { format!("{:.2}", fit.vif[j - 1]) },
            ]
        })
        .collect();
    let mut out = format!("Dependent Variable: {dependent}\n\n");
    out.push_str(&table_text(&header, &rows));
    out.push('\n');
    out.push_str(&footer(&[
        ("r-squared", format!("{:.3}", fit.r_squared)),
        ("adj. r-squared:", format!("{:.3}", fit.adj_r_squared)),
        ("method:", "Least Squares".into()),
        ("No. Observations:", fit.n.to_string()),
        ("Df Residuals:", fit.df_residuals.to_string()),
        ("Df Model:", fit.df_model.to_string()),
        ("AIC:", format!("{:.1}", fit.aic)),
        ("BIC:", format!("{:.1}", fit.bic)),
    ]));
    out
}

/// Per-term CSV: `term,coefficient,std_error,t_value,p_value,vif`.
pub fn ols_coefficients_csv(fit: &GlobalFit) -> Result<Vec<u8>> {
    let rows = (0..fit.names.len())
        .map(|j| {
            vec![
                fit.names[j].clone(),
                fit.coefficients[j].to_string(),
                fit.std_errors[j].to_string(),
                fit.t_values[j].to_string(),
                fit.p_values[j].to_string(),
                if j == 0 { String::new() } else { fit.vif[j - 1].to_string() },
            ]
        })
        .collect();
    csv_bytes(&["term", "coefficient", "std_error", "t_value", "p_value", "vif"], rows)
}

/// Footer statistics as `key,value`.
pub fn ols_summary_csv(fit: &GlobalFit) -> Result<Vec<u8>> {
    let kv = [
        ("r_squared", fit.r_squared.to_string()),
        ("adj_r_squared", fit.adj_r_squared.to_string()),
        ("n", fit.n.to_string()),
        ("df_residuals", fit.df_residuals.to_string()),
        ("df_model", fit.df_model.to_string()),
        ("log_likelihood", fit.log_likelihood.to_string()),
        ("aic", fit.aic.to_string()),
        ("bic", fit.bic.to_string()),
        ("rss", fit.rss.to_string()),
    ];
    csv_bytes(&["key", "value"], kv.into_iter().map(|(k, v)| vec![k.to_string(), v]).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescriptiveRow {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub median: f64,
    /// Sample standard deviation.
    pub sd: f64,
}

/// Min, max, mean, median, and SD of the dependent and every covariate.
pub fn descriptive_stats(table: &ObservationTable) -> Vec<DescriptiveRow> {
    let mut cols: Vec<(String, Vec<f64>)> = vec![(table.y_name().into(), table.y().iter().copied().collect())];
    for (j, n) in table.covariate_names().iter().enumerate() {
        cols.push((n.clone(), table.x().column(j).iter().copied().collect()));
    }
    cols.into_iter()
        .map(|(name, v)| {
            let (mean, sd) = crate::data::mean_std(&v);
            DescriptiveRow {
                name,
                min: v.iter().cloned().fold(f64::INFINITY, f64::min),
                max: v.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                mean,
                median: stats::median(&v),
                sd,
            }
        })
        .collect()
}

pub fn descriptive_text(rows: &[DescriptiveRow]) -> String {
    let header: Vec<String> = ["Variable", "Min", "Max", "Mean", "Median", "SD"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.name.clone(),
                format!("{:.2}", r.min),
                format!("{:.2}", r.max),
                format!("{:.2}", r.mean),
                format!("{:.2}", r.median),
                format!("{:.2}", r.sd),
            ]
        })
        .collect();
    table_text(&header, &body)
}

pub fn descriptive_csv(rows: &[DescriptiveRow]) -> Result<Vec<u8>> {
    csv_bytes(
        &["variable", "min", "max", "mean", "median", "sd"],
        rows.iter()
            .map(|r| {
                vec![
                    r.name.clone(),
                    r.min.to_string(),
                    r.max.to_string(),
                    r.mean.to_string(),
                    r.median.to_string(),
                    r.sd.to_string(),
                ]
            })
            .collect(),
    )
}

fn opt(v: Option<f64>, prec: usize) -> String {
    v.map_or("-".into(), |v| format!("{v:.prec$}"))
}

pub fn moran_text(m: &MoranResult, label: &str) -> String {
    footer(&[
        ("Moran's I:", label.to_string()),
        ("I", format!("{:.4}", m.i)),
        ("E[I]", format!("{:.4}", m.expected_i)),
        ("Var[I] (randomization)", opt(m.variance, 6)),
        ("z", opt(m.z, 3)),
        ("p (analytic, two-sided)", opt(m.p_analytic, 3)),
        ("p (permutation)", opt(m.p_permutation, 3)),
        ("permutations", m.permutations.to_string()),
        ("seed", m.seed.to_string()),
        ("n", m.n.to_string()),
    ])
}

fn summary_cols(v: &[f64]) -> (f64, f64, f64, f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    (
        mean,
        std,
        v.iter().cloned().fold(f64::INFINITY, f64::min),
        stats::median(v),
        v.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    )
}

pub fn gwr_text(m: &GwrModel, cn_threshold: f64) -> String {
    let header: Vec<String> = ["Variable", "Mean", "STD", "Min", "Median", "Max"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows: Vec<Vec<String>> = (0..m.names.len())
        .map(|j| {
            let col: Vec<f64> = m.local_coefficients.column(j).iter().copied().collect();
            let (mean, std, min, med, max) = summary_cols(&col);
            vec![
                m.names[j].clone(),
                format!("{mean:.3}"),
                format!("{std:.3}"),
                format!("{min:.3}"),
                format!("{med:.3}"),
                format!("{max:.3}"),
            ]
        })
        .collect();
    let flagged = m.collinear_locations(cn_threshold).len();
    let mut out = format!("Bandwidth: {} ({:?} {:?})\n\n", m.kernel.bandwidth, m.kernel.family, m.kernel.bandwidth.mode());
    out.push_str(&table_text(&header, &rows));
    out.push('\n');
    out.push_str(&footer(&[
        ("r-squared", format!("{:.3}", m.r_squared)),
        ("adj. r-squared:", format!("{:.3}", m.adj_r_squared)),
        ("No. Observations:", m.n().to_string()),
        ("tr(S):", format!("{:.3}", m.hat_trace)),
        ("AICc:", format!("{:.1}", m.aicc)),
        ("AIC:", format!("{:.1}", m.aic)),
        ("BIC:", format!("{:.1}", m.bic)),
        ("Max local CN:", format!("{:.2}", m.local_cn.iter().cloned().fold(0.0, f64::max))),
        ("Locations over CN threshold:", format!("{flagged} (CN > {cn_threshold})")),
    ]));
    for w in &m.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    out
}

/// Multiscale summary: bandwidth and coefficient STD/Min/Median/Max per
/// term, fit footer, then the adjusted-inference block.
pub fn mgwr_text(s: &MgwrSummary) -> String {
    let header: Vec<String> = ["Variable", "Bandwidth", "STD", "Min", "Median", "Max"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows: Vec<Vec<String>> = s
        .terms
        .iter()
        .map(|t| {
            vec![
                t.term.clone(),
                format_bandwidth(t.bandwidth),
                format!("{:.2}", t.std),
                format!("{:.2}", t.min),
                format!("{:.2}", t.median),
                format!("{:.2}", t.max),
            ]
        })
        .collect();
    let mut out = table_text(&header, &rows);
    out.push('\n');
    out.push_str(&footer(&[
        ("r-squared", format!("{:.3}", s.r_squared)),
        ("adj. r-squared:", format!("{:.3}", s.adj_r_squared)),
        ("AICc:", format!("{:.1}", s.aicc)),
        ("AIC:", format!("{:.1}", s.aic)),
        ("BIC:", format!("{:.1}", s.bic)),
        ("No. Observations:", s.n.to_string()),
        ("tr(S):", format!("{:.3}", s.hat_trace)),
        ("converged:", format!("{} ({} iterations)", s.converged, s.iterations)),
    ]));
    out.push('\n');
    let header: Vec<String> = ["Variable", "ENP", "Adj. alpha", "Adj. t", "Share significant"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows: Vec<Vec<String>> = s
        .terms
        .iter()
        .map(|t| {
            vec![
                t.term.clone(),
                format!("{:.3}", t.enp),
                format!("{:.4}", t.adjusted_alpha),
                format!("{:.3}", t.critical_t),
                format!("{:.3}", t.share_significant),
            ]
        })
        .collect();
    out.push_str(&table_text(&header, &rows));
    out
}

fn format_bandwidth(b: f64) -> String {
    if b.fract() == 0.0 {
        format!("{b:.0}")
    } else {
        format!("{b:.3}")
    }
}

/// Full-precision multiscale summary, one row per term.
pub fn mgwr_summary_csv(s: &MgwrSummary) -> Result<Vec<u8>> {
    csv_bytes(
        &[
            "term",
            "bandwidth",
            "enp",
            "adjusted_alpha",
            "critical_t",
            "mean",
            "std",
            "min",
            "median",
            "max",
            "share_significant",
        ],
        s.terms
            .iter()
            .map(|t| {
                vec![
                    t.term.clone(),
                    t.bandwidth.to_string(),
                    t.enp.to_string(),
                    t.adjusted_alpha.to_string(),
                    t.critical_t.to_string(),
                    t.mean.to_string(),
                    t.std.to_string(),
                    t.min.to_string(),
                    t.median.to_string(),
                    t.max.to_string(),
                    t.share_significant.to_string(),
                ]
            })
            .collect(),
    )
}

/// `iteration,soc,rss,bw_<term>…`.
pub fn convergence_csv(m: &MgwrModel) -> Result<Vec<u8>> {
    let mut header = vec!["iteration".to_string(), "soc".into(), "rss".into()];
    header.extend(m.names.iter().map(|n| format!("bw_{n}")));
    let rows = (0..m.soc_trace.len())
        .map(|it| {
            let mut r = vec![(it + 1).to_string(), m.soc_trace[it].to_string(), m.rss_trace[it].to_string()];
            r.extend(m.bandwidth_trace[it].iter().map(|b| b.value().to_string()));
            r
        })
        .collect();
    let h: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    csv_bytes(&h, rows)
}

/// Named numeric columns for the local GWR layer.
pub fn gwr_columns(m: &GwrModel) -> Vec<(String, Vec<f64>)> {
    let mut cols = Vec::new();
    for (j, n) in m.names.iter().enumerate() {
        cols.push((format!("beta_{n}"), m.local_coefficients.column(j).iter().copied().collect()));
        cols.push((format!("se_{n}"), m.local_se.column(j).iter().copied().collect()));
        cols.push((format!("t_{n}"), m.local_t.column(j).iter().copied().collect()));
    }
    cols.push(("local_cn".into(), m.local_cn.clone()));
    cols.push(("influence".into(), m.influence.clone()));
    cols.push(("residual".into(), m.residuals.clone()));
    cols
}

/// Named columns for the multiscale layer; `sig_<term>` is 1 where the
/// term is significant after the ENP adjustment.
pub fn mgwr_columns(m: &MgwrModel) -> Vec<(String, Vec<f64>)> {
    let n = m.n();
    let mut cols = Vec::new();
    for (j, name) in m.names.iter().enumerate() {
        cols.push((format!("beta_{name}"), m.local_coefficients.column(j).iter().copied().collect()));
        cols.push((format!("se_{name}"), m.local_se.column(j).iter().copied().collect()));
        cols.push((format!("t_{name}"), m.local_t.column(j).iter().copied().collect()));
        cols.push((
            format!("sig_{name}"),
            (0..n).map(|i| if m.is_significant(i, j) { 1.0 } else { 0.0 }).collect(),
        ));
    }
    cols.push(("local_cn".into(), m.local_cn.clone()));
    cols.push(("residual".into(), m.residuals.clone()));
    cols
}

pub fn hotspot_columns(values: &[f64], h: &HotSpotResult) -> (Vec<(String, Vec<f64>)>, Vec<(String, Vec<String>)>) {
    (
        vec![
            ("value".into(), values.to_vec()),
            ("gi_z".into(), h.z.clone()),
            ("gi_p".into(), h.p.clone()),
        ],
        vec![("class".into(), h.class.iter().map(|c| c.label().to_string()).collect())],
    )
}

/// Columns as CSV keyed by area id.
pub fn columns_csv(ids: &[String], cols: &[(String, Vec<f64>)], text: &[(String, Vec<String>)]) -> Result<Vec<u8>> {
    let mut header = vec!["id".to_string()];
    header.extend(cols.iter().map(|c| c.0.clone()));
    header.extend(text.iter().map(|c| c.0.clone()));
    let rows = (0..ids.len())
        .map(|i| {
            let mut r = vec![ids[i].clone()];
            r.extend(cols.iter().map(|c| c.1[i].to_string()));
            r.extend(text.iter().map(|c| c.1[i].clone()));
            r
        })
        .collect();
    let h: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    csv_bytes(&h, rows)
}

fn number(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}

/// GeoJSON FeatureCollection with one feature per unit: polygon geometry
/// when available, else the unit's point location.
pub fn geojson_layer(table: &ObservationTable, cols: &[(String, Vec<f64>)], text: &[(String, Vec<String>)]) -> Result<Vec<u8>> {
    let features: Vec<Value> = table
        .units()
        .iter()
        .enumerate()
        .map(|(i, u)| {
            let geometry = match &u.geometry {
                Some(mp) => json!({
                    "type": "MultiPolygon",
                    "coordinates": mp.0.iter().map(|p| p.rings().map(|r| r.to_vec()).collect::<Vec<_>>()).collect::<Vec<_>>(),
                }),
                None => json!({ "type": "Point", "coordinates": u.location }),
            };
            let mut props = Map::new();
            props.insert("id".into(), Value::String(u.id.clone()));
            for (name, v) in cols {
                props.insert(name.clone(), number(v[i]));
            }
            for (name, v) in text {
                props.insert(name.clone(), Value::String(v[i].clone()));
            }
            json!({ "type": "Feature", "geometry": geometry, "properties": props })
        })
        .collect();
    let fc = json!({ "type": "FeatureCollection", "features": features });
    let mut out = serde_json::to_vec_pretty(&fc)?;
    out.push(b'\n');
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::AreaUnit;
    use nalgebra::{DMatrix, DVector};

    fn fit(p: usize) -> (ObservationTable, GlobalFit) {
        let n = 30;
        let units = (0..n).map(|i| AreaUnit::at(format!("{i:02}"), [i as f64, 0.0])).collect();
        let x = DMatrix::from_fn(n, p, |i, j| ((i * 7 + j * 13) % 11) as f64);
        let y = DVector::from_fn(n, |i, _| (i % 5) as f64 + 0.3 * i as f64);
        let names = (0..p).map(|j| format!("x{j}")).collect();
        let t = ObservationTable::new(units, "y", y, names, x).unwrap();
        let f = crate::ols::fit_ols(&t).unwrap();
        (t, f)
    }

    #[test]
    fn p_stars() {
        assert_eq!(format_p(0.0004), "0.000***");
        assert_eq!(format_p(0.004), "0.004**");
        assert_eq!(format_p(0.02), "0.020*");
        assert_eq!(format_p(0.384), "0.384");
    }

    #[test]
    fn intercept_only_single_row() {
        let (_, f) = fit(0);
        let text = ols_text(&f, "y");
        let body: Vec<&str> = text.lines().skip(3).take_while(|l| !l.is_empty()).collect();
        assert_eq!(body.len(), 1);
        assert!(body[0].starts_with("Intercept"));
        assert!(text.contains("Df Model:"));
    }

    #[test]
    fn csv_round_trip_exact() {
        let (_, f) = fit(2);
        let bytes = ols_coefficients_csv(&f).unwrap();
        let mut rdr = csv::Reader::from_reader(bytes.as_slice());
        for (j, rec) in rdr.records().enumerate() {
            let rec = rec.unwrap();
            assert_eq!(rec[1].parse::<f64>().unwrap(), f.coefficients[j]);
            assert_eq!(rec[3].parse::<f64>().unwrap(), f.t_values[j]);
            assert_eq!(rec[4].parse::<f64>().unwrap(), f.p_values[j]);
        }
    }

    #[test]
    fn geojson_points() {
        let (t, _) = fit(1);
        let bytes = geojson_layer(&t, &[("v".into(), vec![f64::NAN; 30])], &[]).unwrap();
        let v: Value = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(v["features"][3]["geometry"]["type"], "Point");
        assert!(v["features"][3]["properties"]["v"].is_null());
    }
}
