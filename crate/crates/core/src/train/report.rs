//! Plain-text tables and CSV output for experiment reports.

use std::fmt::{self, Write as _};

use super::experiments::{AblationReport, CrossDomainReport, GridReport, RuntimeReport};
use super::fit::EpochRecord;
use super::metrics::EvalReport;

/// Column-aligned text table; the first column is left-aligned, the rest right-aligned.
#[derive(Clone, Debug, Default)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn row<S: Into<String>>(&mut self, cells: impl IntoIterator<Item = S>) -> &mut Self {
        self.rows.push(cells.into_iter().map(Into::into).collect());
        self
    }
}

impl fmt::Display for Table {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cols = self.header.len();
        let mut widths: Vec<usize> = self.header.iter().map(|h| h.chars().count()).collect();
        for row in &self.rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let line = |f: &mut fmt::Formatter<'_>, cells: &[String]| -> fmt::Result {
            let mut out = String::new();
            for (i, w) in widths.iter().enumerate() {
                let cell = cells.get(i).map_or("", String::as_str);
                let pad = w - cell.chars().count();
                if i > 0 {
                    out.push_str("  ");
                    out.extend(std::iter::repeat_n(' ', pad));
                    out.push_str(cell);
                } else {
                    out.push_str(cell);
                    out.extend(std::iter::repeat_n(' ', pad));
                }
            }
            writeln!(f, "{}", out.trim_end())
        };
        line(f, &self.header)?;
        let total = widths.iter().sum::<usize>() + 2 * cols.saturating_sub(1);
        writeln!(f, "{}", "-".repeat(total))?;
        for row in &self.rows {
            line(f, row)?;
        }
        Ok(())
    }
}

fn num(x: f64) -> String {
    format!("{x:.3}")
}

fn r2(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".to_owned(), num)
}

/// Model / MAE / RMSE / R² rows.
pub fn accuracy_table(rows: &[(&str, &EvalReport)]) -> Table {
    let mut t = Table::new(["Model", "MAE", "RMSE", "R²"]);
    for (name, r) in rows {
        t.row([
            name.to_string(),
            num(r.metrics.mae),
            num(r.metrics.rmse),
            r2(r.metrics.r2),
        ]);
    }
    t
}

pub fn runtime_table(r: &RuntimeReport) -> Table {
    let mut t = Table::new(["Method", "Time (ms)", "Speedup"]);
    for m in &r.methods {
        t.row([m.method.clone(), num(m.mean_ms), format!("{:.1}x", m.speedup)]);
    }
    t
}

pub fn ablation_table(r: &AblationReport) -> Table {
    let mut t = Table::new(["Pooling", "MAE", "RMSE", "R²"]);
    for (name, e) in [("Mean + Add", &r.mean_add), ("Mean Pooling Only", &r.mean_only)] {
        t.row([name.to_string(), num(e.mae()), num(e.metrics.rmse), r2(e.r2())]);
    }
    t
}

pub fn bucket_table(r: &EvalReport) -> Table {
    let mut t = Table::new(["Size range", "Count", "MAE", "R²"]);
    for b in &r.per_bucket {
        t.row([
            format!("{}-{} vertices", b.min_n, b.max_n),
            b.n_eval.to_string(),
            num(b.metrics.mae),
            r2(b.metrics.r2),
        ]);
    }
    t
}

pub fn cross_domain_table(r: &CrossDomainReport) -> Table {
    let mut t = Table::new(["Trained on", "Tested on", "MAE", "RMSE", "R²"]);
    for (i, from) in r.domains.iter().enumerate() {
        for (j, to) in r.domains.iter().enumerate() {
            let e = r.cell(i, j);
            t.row([
                from.to_uppercase(),
                to.to_uppercase(),
                num(e.mae()),
                num(e.metrics.rmse),
                r2(e.r2()),
            ]);
        }
    }
    t
}

pub fn grid_table(r: &GridReport) -> Table {
    let mut t = Table::new(["Hidden", "Pooling", "Best epoch", "Val MAE", "Test MAE", "Test R²", ""]);
    for (i, e) in r.entries.iter().enumerate() {
        t.row([
            e.hidden.to_string(),
            e.pooling.tag().to_owned(),
            e.best_epoch.to_string(),
            num(e.val_mae),
            num(e.test.mae()),
            r2(e.test.r2()),
            if i == r.best { "*".to_owned() } else { String::new() },
        ]);
    }
    t
}

/// `epoch,train_loss,val_mae` with shortest round-trip float formatting.
pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut out = String::from("epoch,train_loss,val_mae\n");
    for r in history {
        writeln!(out, "{},{},{}", r.epoch, r.train_loss, r.val_mae).expect("writing to a String");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_alignment() {
        let mut t = Table::new(["Model", "MAE"]);
        t.row(["GNN", "0.372"]).row(["CNN-long", "10.5"]);
        let text = t.to_string();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "Model       MAE");
        assert_eq!(lines[1], "---------------");
        assert_eq!(lines[2], "GNN       0.372");
        assert_eq!(lines[3], "CNN-long   10.5");
    }

    #[test]
    fn csv_layout() {
        let h = [
            EpochRecord {
                epoch: 1,
                train_loss: 2.5,
                val_mae: 0.1,
            },
            EpochRecord {
                epoch: 2,
                train_loss: 1.0,
                val_mae: 0.05,
            },
        ];
        assert_eq!(history_csv(&h), "epoch,train_loss,val_mae\n1,2.5,0.1\n2,1,0.05\n");
    }
}
