use std::collections::BTreeMap;

/// Mean and sample standard deviation; the deviation of a single value is 0.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Table of per-seed values: rows are `algorithm × training scenario`, columns evaluation scenarios.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultTable {
    pub title: String,
    /// Free-form lines printed above the table, such as evaluation weights.
    pub header: Vec<String>,
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    cells: BTreeMap<(String, String), Vec<f64>>,
}

impl ResultTable {
    pub fn new(title: impl Into<String>) -> Self {
        Self { title: title.into(), ..Default::default() }
    }

    /// Appends one seed's value to a cell, registering new rows and columns in insertion order.
    pub fn push(&mut self, row: &str, col: &str, value: f64) {
        if !self.rows.iter().any(|r| r == row) {
            self.rows.push(row.to_string());
        }
        if !self.cols.iter().any(|c| c == col) {
            self.cols.push(col.to_string());
        }
        self.cells.entry((row.to_string(), col.to_string())).or_default().push(value);
    }

    /// Declares a cell without values; it renders as a gap.
    pub fn declare(&mut self, row: &str, col: &str) {
        if !self.rows.iter().any(|r| r == row) {
            self.rows.push(row.to_string());
        }
        if !self.cols.iter().any(|c| c == col) {
            self.cols.push(col.to_string());
        }
        self.cells.entry((row.to_string(), col.to_string())).or_default();
    }

    pub fn values(&self, row: &str, col: &str) -> &[f64] {
        self.cells.get(&(row.to_string(), col.to_string())).map(Vec::as_slice).unwrap_or(&[])
    }

    /// `None` for a cell with no values.
    pub fn cell(&self, row: &str, col: &str) -> Option<(f64, f64, usize)> {
        let v = self.values(row, col);
        (!v.is_empty()).then(|| {
            let (m, s) = mean_std(v);
            (m, s, v.len())
        })
    }

    /// Aligned text, `mean ± std` per cell and `-` for gaps.
    pub fn render_text(&self) -> String {
        let mut grid = vec![std::iter::once(String::new()).chain(self.cols.iter().cloned()).collect::<Vec<_>>()];
        for r in &self.rows {
            let mut line = vec![r.clone()];
            for c in &self.cols {
                line.push(match self.cell(r, c) {
                    Some((m, s, _)) => format!("{m:.3} ± {s:.3}"),
                    None => "-".into(),
                });
            }
            grid.push(line);
        }
        let widths: Vec<usize> =
            (0..grid[0].len()).map(|k| grid.iter().map(|l| l[k].chars().count()).max().unwrap_or(0)).collect();
        let mut out = format!("{}\n", self.title);
        for h in &self.header {
            out.push_str(&format!("# {h}\n"));
        }
        for line in grid {
            let cells: Vec<String> = line
                .iter()
                .zip(&widths)
                .map(|(s, &w)| format!("{s}{}", " ".repeat(w - s.chars().count())))
                .collect();
            out.push_str(cells.join("  ").trim_end());
            out.push('\n');
        }
        out
    }

    pub const CSV_HEADER: &'static str = "row,col,mean,std,n";

    /// One line per cell; gaps have empty mean and std and `n = 0`.
    pub fn to_csv(&self) -> String {
        let mut s = format!("{}\n", Self::CSV_HEADER);
        for r in &self.rows {
            for c in &self.cols {
                match self.cell(r, c) {
                    Some((m, sd, n)) => s.push_str(&format!("{r},{c},{m},{sd},{n}\n")),
                    None => s.push_str(&format!("{r},{c},,,0\n")),
                }
            }
        }
        s
    }
}
