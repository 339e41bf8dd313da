//! JSON and CSV input/output.

use serde::Deserialize;
use serde_json::{json, Map, Value};

use crate::cycle_series::{Classification, RecurrenceClass, ReturnSeries};
use crate::equilibrium::EquilibriumMeasure;
use crate::error::{Error, Result};
use crate::families::{parse_coefficient, FamilyDescriptor, PetalRule};
use crate::graph::LoadedGraph;
use crate::numeric::{fmt17, CertifiedValue};
use crate::sequences::{Exhaustion, SequenceReport};

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Number {
    Float(f64),
    Text(String),
}

impl Number {
    fn value(&self) -> Result<f64> {
        match self {
            Number::Float(x) => Ok(*x),
            Number::Text(t) => parse_coefficient(t),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeEntry {
    from: u64,
    to: u64,
    w: Number,
}

#[derive(Debug, Deserialize)]
struct GraphFile {
    edges: Vec<EdgeEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
enum FamilyFile {
    Chain {
        rho: Number,
        s: Number,
        c: Number,
    },
    Jumpy {
        gamma: Number,
        s: Number,
        #[serde(default)]
        target: Option<String>,
    },
    Petal {
        rho: Option<Number>,
        s: Option<Number>,
        c: Option<Number>,
        q: Option<Vec<Number>>,
    },
}

/// A parsed input file.
#[derive(Debug, Clone)]
pub enum SpecInput {
    Graph(LoadedGraph),
    Family(FamilyDescriptor),
}

pub fn parse_target(text: &str) -> Result<RecurrenceClass> {
    match text.to_ascii_lowercase().as_str() {
        "uplg" | "unstablepositive" => Ok(RecurrenceClass::UnstablePositive),
        "splg" | "stablepositive" => Ok(RecurrenceClass::StablePositive),
        "nrlg" | "nullrecurrent" => Ok(RecurrenceClass::NullRecurrent),
        "transient" => Ok(RecurrenceClass::Transient),
        _ => Err(Error::Parse(format!("unknown target class {text:?}"))),
    }
}

/// Parse `{"edges":[{"from":1,"to":2,"w":0.5}, …]}`.
pub fn parse_graph(text: &str) -> Result<LoadedGraph> {
    let file: GraphFile = serde_json::from_str(text)?;
    let edges = file
        .edges
        .iter()
        .map(|e| Ok((e.from, e.to, e.w.value()?)))
        .collect::<Result<Vec<_>>>()?;
    if edges.is_empty() {
        return Err(Error::EmptyGraph);
    }
    LoadedGraph::from_edges(edges)
}

/// Parse `{"family":"chain","rho":0.5,"s":3.0,"c":"1/zeta(3)"}` and friends.
pub fn parse_family(text: &str) -> Result<FamilyDescriptor> {
    let file: FamilyFile = serde_json::from_str(text)?;
    match file {
        FamilyFile::Chain { rho, s, c } => FamilyDescriptor::chain(rho.value()?, s.value()?, c.value()?),
        FamilyFile::Jumpy { gamma, s, target } => {
            let target = parse_target(target.as_deref().unwrap_or("UPLG"))?;
            FamilyDescriptor::jumpy(gamma.value()?, s.value()?, target)
        }
        FamilyFile::Petal { rho, s, c, q } => {
            let rule = match (q, rho, s, c) {
                (Some(q), None, None, None) => {
                    PetalRule::Finite(q.iter().map(Number::value).collect::<Result<_>>()?)
                }
                (None, Some(rho), Some(s), Some(c)) => PetalRule::ZetaPower {
                    rho: rho.value()?,
                    s: s.value()?,
                    c: c.value()?,
                },
                _ => {
                    return Err(Error::Parse(
                        "petal family needs either \"q\" or all of \"rho\", \"s\", \"c\"".into(),
                    ))
                }
            };
            FamilyDescriptor::petal(rule)
        }
    }
}

/// Parse either kind of input, telling them apart by their keys.
pub fn parse_spec(text: &str) -> Result<SpecInput> {
    let value: Value = serde_json::from_str(text)?;
    let obj = value
        .as_object()
        .ok_or_else(|| Error::Parse("expected a JSON object".into()))?;
    if obj.contains_key("edges") {
        parse_graph(text).map(SpecInput::Graph)
    } else if obj.contains_key("family") {
        parse_family(text).map(SpecInput::Family)
    } else {
        Err(Error::Parse("expected an \"edges\" or a \"family\" key".into()))
    }
}

/// JSON number, or `null` for a non-finite value.
fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn interval(lo: f64, hi: f64) -> Value {
    json!({ "lo": num(lo), "hi": num(hi) })
}

fn certified(c: &CertifiedValue) -> Value {
    json!({ "value": num(c.value), "tail_bound": num(c.tail_bound) })
}

pub fn classification_json(c: &Classification) -> Value {
    let mut obj = Map::new();
    obj.insert("class".into(), json!(c.class.to_string()));
    obj.insert("R".into(), num(c.radius));
    obj.insert("phi_at_R".into(), interval(c.phi_at_radius.lo, c.phi_at_radius.hi));
    obj.insert("dphi_at_R".into(), interval(c.dphi_at_radius.lo, c.dphi_at_radius.hi));
    if let Some(z) = c.unit_root {
        obj.insert("unit_root".into(), num(z));
    }
    if let Some(d) = c.dphi_at_unit_root {
        obj.insert("dphi_at_unit_root".into(), num(d));
    }
    Value::Object(obj)
}

pub fn classification_csv(c: &Classification) -> String {
    format!(
        "class,R,phi_lo,phi_hi,dphi_lo,dphi_hi\n{},{},{},{},{},{}\n",
        c.class,
        fmt17(c.radius),
        fmt17(c.phi_at_radius.lo),
        fmt17(c.phi_at_radius.hi),
        fmt17(c.dphi_at_radius.lo),
        fmt17(c.dphi_at_radius.hi)
    )
}

pub fn series_csv(series: &ReturnSeries) -> String {
    let mut out = String::from("n,q\n");
    for n in 1..=series.order() {
        out.push_str(&format!("{},{}\n", n, fmt17(series.coefficient(n))));
    }
    out
}

pub fn series_json(series: &ReturnSeries) -> Value {
    json!({
        "v": series.base().get(),
        "exact": series.is_exact(),
        "q": series.coefficients().into_iter().map(num).collect::<Vec<_>>(),
    })
}

pub fn measure_json(mu: &EquilibriumMeasure) -> Value {
    let pi: Map<String, Value> = mu.pi.iter().map(|(v, p)| (v.to_string(), num(*p))).collect();
    let transitions: Vec<Value> = mu
        .transitions
        .iter()
        .map(|(&(u, w), &p)| json!({ "from": u.get(), "to": w.get(), "p": num(p) }))
        .collect();
    json!({ "lambda": num(mu.lambda), "pi": pi, "P": transitions })
}

pub fn measure_csv(mu: &EquilibriumMeasure) -> String {
    let mut out = String::from("from,to,p\n");
    for (&(u, w), &p) in &mu.transitions {
        out.push_str(&format!("{},{},{}\n", u, w, fmt17(p)));
    }
    out
}

fn opt(x: Option<usize>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn report_csv(report: &SequenceReport) -> String {
    let mut out = String::from("k,n,m,R_k,dphi_at_Rk,pi_v,delta_n,verdict_running\n");
    for (rec, running) in report.records.iter().zip(report.running_verdicts()) {
        let (n, m) = rec.spec.labels();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            rec.k,
            opt(n),
            opt(m),
            fmt17(rec.root),
            fmt17(rec.dphi_at_root),
            fmt17(rec.pi_v),
            fmt17(rec.delta),
            running
        ));
    }
    out
}

/// Report JSON: the CSV columns plus reference values, thresholds and, for
/// searches, the indices found.
pub fn report_json(report: &SequenceReport, indices: Option<&[usize]>, exhausted: Option<&Exhaustion>) -> Value {
    let records: Vec<Value> = report
        .records
        .iter()
        .zip(report.running_verdicts())
        .map(|(rec, running)| {
            let (n, m) = rec.spec.labels();
            json!({
                "k": rec.k,
                "n": n,
                "m": m,
                "R_k": num(rec.root),
                "dphi_at_Rk": num(rec.dphi_at_root),
                "pi_v": num(rec.pi_v),
                "delta_n": num(rec.delta),
                "phi_at_R": num(rec.phi_at_radius),
                "dphi_at_R": num(rec.dphi_at_radius),
                "kac_residual": rec.kac_residual.map(num),
                "verdict_running": running.to_string(),
            })
        })
        .collect();
    let th = &report.thresholds;
    let mut obj = json!({
        "R": num(report.radius),
        "phi_at_R": certified(&report.phi_at_radius),
        "reference_dphi_at_R": certified(&report.reference),
        "thresholds": {
            "window": th.window,
            "tol_reg": num(th.tol_reg),
            "growth_factor": num(th.growth_factor),
            "tol_osc": num(th.tol_osc),
        },
        "verdict": report.verdict.to_string(),
        "records": records,
    });
    if let Some(ix) = indices {
        obj["indices"] = json!(ix);
    }
    if let Some(e) = exhausted {
        obj["exhausted"] = json!({
            "k": e.k, "n": e.n, "best_m": e.best_m, "best_dphi": num(e.best_dphi)
        });
    }
    obj
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::VertexId;

    #[test]
    fn graph_file_round_trip() {
        let g = parse_graph(r#"{"edges":[{"from":1,"to":1,"w":1.0},{"from":1,"to":2,"w":"0.5"},{"from":2,"to":1,"w":1}]}"#)
            .unwrap();
        assert_eq!(g.edge_count(), 3);
        assert!(g.contains_edge(VertexId::of(1), VertexId::of(2)));
        assert!(matches!(parse_graph(r#"{"edges":[]}"#), Err(Error::EmptyGraph)));
        assert!(matches!(parse_graph("{not json"), Err(Error::Parse(_))));
        assert!(matches!(
            parse_graph(r#"{"edges":[{"from":1,"to":1,"w":-1}]}"#),
            Err(Error::NonPositiveWeight { .. })
        ));
    }

    #[test]
    fn family_files() {
        let f = parse_family(r#"{"family":"chain","rho":0.5,"s":3.0,"c":"1/zeta(3)"}"#).unwrap();
        assert_eq!(f.radius(), 2.0);
        let j = parse_family(r#"{"family":"jumpy","gamma":1.0,"s":3.0,"target":"UPLG"}"#).unwrap();
        assert_eq!(j.radius(), 0.5);
        let p = parse_family(r#"{"family":"petal","q":[0,1]}"#).unwrap();
        assert!(p.radius().is_infinite());
        assert!(parse_family(r#"{"family":"petal","rho":0.5}"#).is_err());
        assert!(parse_family(r#"{"family":"tree"}"#).is_err());
        assert!(matches!(parse_spec(r#"{"x":1}"#), Err(Error::Parse(_))));
    }

    #[test]
    fn non_finite_numbers_become_null() {
        assert_eq!(num(f64::INFINITY), Value::Null);
        assert_eq!(num(0.5), json!(0.5));
    }
}
