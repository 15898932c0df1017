use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{BawsError, Result};
use crate::scenarios::format_sig;
use crate::scoring::{ForecastTarget, ParamVector};

use super::{ForecastRecord, LossSeries};

/// Which input column holds the data.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum ColumnSpec {
    /// `price` if present, otherwise `loss`.
    #[default]
    Auto,
    Price(String),
    Loss(String),
}

fn find_column(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.trim().eq_ignore_ascii_case(name))
}

fn parse_field(raw: &str, row: usize, what: &str) -> Result<f64> {
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| BawsError::Parse { row, message: format!("cannot parse {what} '{raw}'") })?;
    if !v.is_finite() {
        return Err(BawsError::Parse { row, message: format!("non-finite {what}") });
    }
    Ok(v)
}

/// Reads a price or loss series from CSV text. Rows are numbered from 1,
/// excluding the header. Prices are turned into losses `-log(P_t / P_{t-1})`
/// dated by the later row.
pub fn load_loss_series<R: Read>(input: R, spec: &ColumnSpec) -> Result<LossSeries> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rd.headers()?.clone();
    let (col, is_price) = match spec {
        ColumnSpec::Auto => match (find_column(&headers, "price"), find_column(&headers, "loss")) {
            (Some(c), _) => (c, true),
            (None, Some(c)) => (c, false),
            _ => return Err(BawsError::Config("input needs a 'price' or 'loss' column".into())),
        },
        ColumnSpec::Price(name) | ColumnSpec::Loss(name) => {
            let c = find_column(&headers, name)
                .ok_or_else(|| BawsError::Config(format!("missing column '{name}'")))?;
            (c, matches!(spec, ColumnSpec::Price(_)))
        }
    };
    let date_col = find_column(&headers, "date");

    let mut values = Vec::new();
    let mut dates = Vec::new();
    for (idx, rec) in rd.records().enumerate() {
        let row = idx + 1;
        let rec = rec?;
        let raw = rec
            .get(col)
            .ok_or_else(|| BawsError::Parse { row, message: "missing field".into() })?;
        let v = parse_field(raw, row, if is_price { "price" } else { "loss" })?;
        if is_price && v <= 0.0 {
            return Err(BawsError::Parse { row, message: format!("price {v} must be positive") });
        }
        values.push(v);
        if let Some(dc) = date_col {
            dates.push(rec.get(dc).unwrap_or_default().to_string());
        }
    }

    let losses = if is_price {
        if values.len() < 2 {
            return Err(BawsError::Parse { row: values.len(), message: "need at least two prices".into() });
        }
        if !dates.is_empty() {
            dates.remove(0);
        }
        values.windows(2).map(|w| -(w[1] / w[0]).ln()).collect()
    } else {
        values
    };
    Ok(LossSeries { losses, dates: date_col.map(|_| dates) })
}

/// [`load_loss_series`] from a file.
pub fn load_price_csv(path: impl AsRef<Path>, spec: &ColumnSpec) -> Result<LossSeries> {
    load_loss_series(File::open(path)?, spec)
}

fn param_columns(target: &ForecastTarget) -> &'static [&'static str] {
    match target {
        ForecastTarget::Mean => &["mean_hat"],
        ForecastTarget::Var { .. } => &["var_hat"],
        ForecastTarget::VarEs { .. } => &["var_hat", "es_hat"],
    }
}

/// Writes backtest records:
/// `t, [date,] k_hat, <parameter columns>, realized_loss, realized_score`.
pub fn write_records<W: Write>(records: &[ForecastRecord], target: &ForecastTarget, out: W) -> Result<()> {
    let with_date = records.iter().any(|r| r.date.is_some());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t"];
    if with_date {
        header.push("date");
    }
    header.push("k_hat");
    header.extend_from_slice(param_columns(target));
    header.extend_from_slice(&["realized_loss", "realized_score"]);
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![r.t.to_string()];
        if with_date {
            row.push(r.date.clone().unwrap_or_default());
        }
        row.push(r.k_hat.to_string());
        row.extend(r.theta.components().into_iter().map(format_sig));
        row.push(format_sig(r.realized_loss));
        row.push(format_sig(r.realized_score));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Parses the output of [`write_records`].
pub fn read_records<R: Read>(input: R) -> Result<Vec<ForecastRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    let headers = rd.headers()?.clone();
    let col = |name: &str| find_column(&headers, name);
    let need = |name: &str| col(name).ok_or_else(|| BawsError::Config(format!("missing column '{name}'")));
    let (t_col, k_col) = (need("t")?, need("k_hat")?);
    let (loss_col, score_col) = (need("realized_loss")?, need("realized_score")?);
    let date_col = col("date");
    let first = col("mean_hat").or(col("var_hat")).ok_or_else(|| BawsError::Config("no parameter column".into()))?;
    let es_col = col("es_hat");

    let mut out = Vec::new();
    for (idx, rec) in rd.records().enumerate() {
        let row = idx + 1;
        let rec = rec?;
        let field = |c: usize| rec.get(c).unwrap_or_default();
        let int = |c: usize| {
            field(c).parse::<usize>().map_err(|_| BawsError::Parse { row, message: format!("bad integer '{}'", field(c)) })
        };
        let theta = match es_col {
            Some(e) => ParamVector::Pair(parse_field(field(first), row, "value")?, parse_field(field(e), row, "value")?),
            None => ParamVector::Scalar(parse_field(field(first), row, "value")?),
        };
        out.push(ForecastRecord {
            t: int(t_col)?,
            date: date_col.map(|c| field(c).to_string()),
            k_hat: int(k_col)?,
            theta,
            realized_loss: parse_field(field(loss_col), row, "loss")?,
            realized_score: parse_field(field(score_col), row, "score")?,
        });
    }
    Ok(out)
}

/// Long-format plot data `series, t, value`: the selected window, each
/// parameter component and the realized loss, plus any extra series aligned
/// with the records (for example the true VaR).
pub fn write_plot_csv<W: Write>(
    records: &[ForecastRecord],
    target: &ForecastTarget,
    extra: &[(&str, &[f64])],
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["series", "t", "value"])?;
    for r in records {
        w.write_record(["k_hat", &r.t.to_string(), &r.k_hat.to_string()])?;
    }
    for (c, name) in param_columns(target).iter().enumerate() {
        for r in records {
            w.write_record([name, r.t.to_string().as_str(), &format_sig(r.theta.components()[c])])?;
        }
    }
    for r in records {
        w.write_record(["realized_loss", &r.t.to_string(), &format_sig(r.realized_loss)])?;
    }
    for (name, values) in extra {
        for (r, v) in records.iter().zip(values.iter()) {
            w.write_record([name, r.t.to_string().as_str(), &format_sig(*v)])?;
        }
    }
    w.flush()?;
    Ok(())
}
