use std::fmt::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    NotApplicable,
}

impl Status {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::NotApplicable => "NOT-APPLICABLE",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub name: String,
    pub status: Status,
}

impl Verdict {
    pub fn new(name: &str, status: Status) -> Self {
        Verdict { name: name.into(), status }
    }
}

/// A CSV table with a header, rows of numbers and a commented footer.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
    pub verdicts: Vec<Verdict>,
    /// `# key,value` footer lines (tolerances, H^-1 norms, notes)
    pub notes: Vec<(String, String)>,
}

impl Table {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Table { columns, rows: Vec::new(), verdicts: Vec::new(), notes: Vec::new() }
    }

    pub fn column(&self, name: &str) -> Vec<f64> {
        let j = self.columns.iter().position(|c| *c == name).expect("known column");
        self.rows.iter().map(|r| r[j]).collect()
    }

    pub fn note(&mut self, key: &str, value: impl std::fmt::Display) {
        self.notes.push((key.into(), value.to_string()));
    }

    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.status == Status::Pass)
    }

    pub fn verdict(&self, name: &str) -> Option<Status> {
        self.verdicts.iter().find(|v| v.name == name).map(|v| v.status)
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r
                .iter()
                .zip(&self.columns)
                .map(|(v, c)| if *c == "n" { format!("{}", *v as u64) } else { format!("{v:.9e}") })
                .collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        for (k, v) in &self.notes {
            let _ = writeln!(s, "# {k},{v}");
        }
        for v in &self.verdicts {
            let _ = writeln!(s, "# verdict,{},{}", v.name, v.status.as_str());
        }
        s
    }
}

/// True when the last three entries never increase (up to `slack` relative to the largest).
pub fn non_increasing_tail(values: &[f64], slack: f64) -> bool {
    let tail = &values[values.len().saturating_sub(3)..];
    let scale = tail.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    tail.windows(2).all(|w| w[1] <= w[0] + slack * scale)
}

pub fn strictly_decreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] < w[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut t = Table::new(vec!["n", "x"]);
        t.rows.push(vec![3.0, 0.5]);
        t.note("tolerance", 0.1);
        t.verdicts.push(Verdict::new("trend", Status::Pass));
        assert_eq!(t.to_csv(), "n,x\n3,5.000000000e-1\n# tolerance,0.1\n# verdict,trend,PASS\n");
        assert!(t.all_pass());
    }

    #[test]
    fn trend_helpers() {
        assert!(non_increasing_tail(&[5.0, 1.0, 3.0, 2.0, 2.0], 0.0));
        assert!(!non_increasing_tail(&[3.0, 2.0, 2.5], 0.0));
        assert!(strictly_decreasing(&[3.0, 2.0, 1.0]));
        assert!(!strictly_decreasing(&[3.0, 3.0]));
    }
}
