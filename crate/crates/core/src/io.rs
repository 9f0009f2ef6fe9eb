//! Text serializations: CSV tables, a static SVG drawing of a slice and the
//! `key=value` report block. Everything here is pure string building so
//! that outputs are byte-identical across runs.

use std::fmt::Write as _;

use crate::capacity::{CapacityTable, Kind};
use crate::homology::{PairKind, RankSweep, Side};
use crate::morse::{CriticalDatum, CriticalKind};
use crate::slice::{ComponentShape, SliceDiagram};

pub const SLICE_HEADER: &str = "height,component,point,x,x_n,y";
pub const CRITICAL_HEADER: &str = "height,kind,half_space,value,index,maslov_index,point,gradient_norm";
pub const RANKS_HEADER: &str = "height,level,pair,side,degree,rank";
pub const CAPACITIES_HEADER: &str = "height,method,degree,c_plus,c_minus,C_plus,C_minus,ambiguous";

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

/// One row per traced point. Multi-valued coordinates (`x` and `y` for
/// `n > 2`) are space-separated inside their column.
pub fn slice_csv(diagrams: &[&SliceDiagram]) -> String {
    let mut s = String::from(SLICE_HEADER);
    s.push('\n');
    for d in diagrams {
        for (ci, c) in d.components.iter().enumerate() {
            for (pi, p) in c.line.points.iter().enumerate() {
                let _ = writeln!(s, "{},{},{},{},{},{}", d.height, ci, pi, join(&p.x), p.x_n, join(&p.y));
            }
        }
    }
    s
}

/// Height, critical points, and the Maslov-derived index of each datum when
/// it was computed.
pub type CriticalRow<'a> = (f64, &'a [CriticalDatum], Vec<Option<i64>>);

pub fn critical_csv(rows: &[CriticalRow]) -> String {
    let mut s = String::from(CRITICAL_HEADER);
    s.push('\n');
    for (h, crit, maslov) in rows {
        for (i, c) in crit.iter().enumerate() {
            let kind = match c.kind {
                CriticalKind::Isolated => "isolated".to_string(),
                CriticalKind::Bott { dim } => format!("bott{dim}"),
            };
            let m = maslov.get(i).copied().flatten().map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                h,
                kind,
                c.half_space.label(),
                c.value,
                c.index,
                m,
                join(&c.point),
                c.gradient_norm
            );
        }
    }
    s
}

pub fn ranks_csv(sweeps: &[&RankSweep]) -> String {
    let mut s = String::from(RANKS_HEADER);
    s.push('\n');
    for sw in sweeps {
        for e in &sw.entries {
            let pair = match e.pair {
                PairKind::Lower => "lower",
                PairKind::Upper => "upper",
            };
            let side = match e.side {
                Side::Plus => "+",
                Side::Minus => "-",
                Side::Whole => "all",
            };
            let _ = writeln!(s, "{},{},{},{},{},{}", sw.height, e.level, pair, side, e.degree, e.rank);
        }
    }
    s
}

pub fn capacities_csv(tables: &[&CapacityTable]) -> String {
    let mut s = String::from(CAPACITIES_HEADER);
    s.push('\n');
    for t in tables {
        for k in 0..t.degrees() {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                t.height,
                t.method.label(),
                k,
                t.get(k, Kind::LowerPlus),
                t.get(k, Kind::LowerMinus),
                t.get(k, Kind::UpperPlus),
                t.get(k, Kind::UpperMinus),
                t.ambiguous
            );
        }
    }
    s
}

/// Ordered `key=value` block.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub entries: Vec<(String, String)>,
}

impl Report {
    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.push((key.into(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k}={}", v.replace('\n', " "));
        }
        s
    }

    pub fn parse(text: &str) -> Report {
        let entries = text
            .lines()
            .filter_map(|l| l.split_once('='))
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        Report { entries }
    }
}

/// Static SVG of the projection `(x_1, y_1)` of one slice: the curves,
/// lobes shaded, crossings marked by sign (red negative, blue positive,
/// grey unsigned).
pub fn diagram_svg(d: &SliceDiagram) -> String {
    let size = 480.0;
    let pad = 24.0;
    let pts: Vec<(f64, f64)> = d
        .components
        .iter()
        .flat_map(|c| c.line.points.iter().map(|p| (p.x[0], p.y[0])))
        .collect();
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{size}\" height=\"{size}\" viewBox=\"0 0 {size} {size}\">"
    );
    let _ = writeln!(s, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let _ = writeln!(s, "<text x=\"8\" y=\"16\" font-family=\"monospace\" font-size=\"12\">y_n = {}</text>", d.height);
    if pts.is_empty() {
        let _ = writeln!(s, "<text x=\"8\" y=\"34\" font-family=\"monospace\" font-size=\"12\">empty slice</text>");
        s.push_str("</svg>\n");
        return s;
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in &pts {
        x0 = x0.min(*x);
        x1 = x1.max(*x);
        y0 = y0.min(*y);
        y1 = y1.max(*y);
    }
    let span = (x1 - x0).max(y1 - y0).max(1e-9);
    let scale = (size - 2.0 * pad) / span;
    let cx = 0.5 * (x0 + x1);
    let cy = 0.5 * (y0 + y1);
    let map = |x: f64, y: f64| (size / 2.0 + (x - cx) * scale, size / 2.0 - (y - cy) * scale);
    let path = |it: &mut dyn Iterator<Item = (f64, f64)>| -> String {
        let mut p = String::new();
        for (i, (x, y)) in it.enumerate() {
            let (u, v) = map(x, y);
            let _ = write!(p, "{}{:.3},{:.3} ", if i == 0 { "M" } else { "L" }, u, v);
        }
        p
    };
    for (i, lobe) in d.lobes.iter().enumerate() {
        let fill = if i % 2 == 0 { "#f4c7a1" } else { "#a8d5e2" };
        let p = path(&mut lobe.arc.points.iter().map(|q| (q.x[0], q.y[0])));
        let _ = writeln!(s, "<path d=\"{p}Z\" fill=\"{fill}\" fill-opacity=\"0.6\" stroke=\"none\"/>");
    }
    for c in &d.components {
        match c.shape {
            ComponentShape::Curve => {
                let p = path(&mut c.line.points.iter().map(|q| (q.x[0], q.y[0])));
                let _ = writeln!(s, "<path d=\"{p}\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"/>");
            }
            ComponentShape::Sphere { .. } => {
                for q in &c.line.points {
                    let (u, v) = map(q.x[0], q.y[0]);
                    let _ = writeln!(s, "<circle cx=\"{u:.3}\" cy=\"{v:.3}\" r=\"0.8\" fill=\"black\"/>");
                }
            }
        }
    }
    for dp in &d.double_points {
        let (u, v) = map(dp.position[0], dp.position[d.base_dim - 1]);
        let color = match dp.sign {
            Some(s) if s < 0 => "#c0392b",
            Some(_) => "#2471a3",
            None => "#7f8c8d",
        };
        let label = match dp.sign {
            Some(s) if s < 0 => "-",
            Some(_) => "+",
            None => "",
        };
        let _ = writeln!(s, "<circle cx=\"{u:.3}\" cy=\"{v:.3}\" r=\"5\" fill=\"{color}\"/>");
        let _ = writeln!(
            s,
            "<text x=\"{:.3}\" y=\"{:.3}\" font-family=\"monospace\" font-size=\"14\" fill=\"{color}\">{label}</text>",
            u + 7.0,
            v - 7.0
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_round_trip() {
        let mut r = Report::default();
        r.push("verdict", "OBSTRUCTED");
        r.push("area", 32.0 / 3.0);
        let back = Report::parse(&r.render());
        assert_eq!(back, r);
        assert_eq!(back.get("verdict"), Some("OBSTRUCTED"));
    }
}
