use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use super::{fit_logistic5, krocc, plcc, srocc, EvalError};

/// Optional distortion labels of one sample.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroupLabel {
    pub distortion_type: Option<String>,
    pub distortion_level: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scope {
    All,
    Type(String),
    Level(u32),
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scope::All => f.write_str("all"),
            Scope::Type(t) => write!(f, "type:{t}"),
            Scope::Level(l) => write!(f, "level:{l}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlations {
    /// Pearson correlation after the logistic mapping.
    pub plcc: f64,
    pub srocc: f64,
    pub krocc: f64,
}

impl Correlations {
    /// PLCC is computed after a five-parameter logistic fit when there are at
    /// least five samples, and on the raw predictions otherwise.
    pub fn compute(predictions: &[f64], mos: &[f64]) -> Result<Self, EvalError> {
        let srocc = srocc(predictions, mos)?;
        let krocc = krocc(predictions, mos)?;
        let plcc = if predictions.len() >= 5 {
            let fit = fit_logistic5(mos, predictions)?;
            plcc(&fit.apply(predictions), mos)?
        } else {
            plcc(predictions, mos)?
        };
        Ok(Self { plcc, srocc, krocc })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScopeResult {
    pub scope: Scope,
    pub n: usize,
    /// `Err` marks a degenerate group (for example constant MOS).
    pub outcome: Result<Correlations, EvalError>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    /// `all` first, then distortion types, then levels.
    pub scopes: Vec<ScopeResult>,
}

impl EvaluationReport {
    pub fn get(&self, scope: &Scope) -> Option<&ScopeResult> {
        self.scopes.iter().find(|s| &s.scope == scope)
    }

    pub fn overall(&self) -> &ScopeResult {
        &self.scopes[0]
    }

    /// `scope,n,plcc,srocc,krocc`; degenerate groups are written as `nan`.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "scope,n,plcc,srocc,krocc")?;
        for s in &self.scopes {
            let c = s.outcome.as_ref().map_or([f64::NAN; 3], |c| [c.plcc, c.srocc, c.krocc]);
            writeln!(w, "{},{},{},{},{}", s.scope, s.n, fixed(c[0]), fixed(c[1]), fixed(c[2]))?;
        }
        Ok(())
    }
}

/// Correlations overall and per distortion type and level.
pub fn evaluate(
    predictions: &[f64],
    mos: &[f64],
    labels: Option<&[GroupLabel]>,
) -> Result<EvaluationReport, EvalError> {
    if predictions.len() != mos.len() {
        return Err(EvalError::LengthMismatch { left: predictions.len(), right: mos.len() });
    }
    let mut groups: BTreeMap<Scope, Vec<usize>> = BTreeMap::new();
    groups.insert(Scope::All, (0..mos.len()).collect());
    if let Some(labels) = labels {
        if labels.len() != mos.len() {
            return Err(EvalError::LengthMismatch { left: labels.len(), right: mos.len() });
        }
        for (i, l) in labels.iter().enumerate() {
            if let Some(t) = &l.distortion_type {
                groups.entry(Scope::Type(t.clone())).or_default().push(i);
            }
            if let Some(k) = l.distortion_level {
                groups.entry(Scope::Level(k)).or_default().push(i);
            }
        }
    }
    let scopes = groups
        .into_iter()
        .map(|(scope, idx)| {
            let p: Vec<f64> = idx.iter().map(|&i| predictions[i]).collect();
            let m: Vec<f64> = idx.iter().map(|&i| mos[i]).collect();
            ScopeResult { scope, n: idx.len(), outcome: Correlations::compute(&p, &m) }
        })
        .collect();
    Ok(EvaluationReport { scopes })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub scope: Scope,
    /// Samples in this scope per repetition.
    pub n: usize,
    pub mean: Correlations,
    pub std: Correlations,
    /// Evaluations that contributed to the mean.
    pub evaluations: usize,
    /// Evaluations skipped because the group was degenerate.
    pub degenerate: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateReport {
    pub seed: u64,
    pub rows: Vec<AggregateRow>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

/// Mean and sample standard deviation of every scope over a set of
/// evaluations (for example every test fold of every repetition).
/// Degenerate groups are excluded from the statistics and counted.
pub fn aggregate(reports: &[EvaluationReport], repetitions: usize, seed: u64) -> AggregateReport {
    let mut by_scope: BTreeMap<Scope, (usize, Vec<Correlations>, usize)> = BTreeMap::new();
    for r in reports {
        for s in &r.scopes {
            let entry = by_scope.entry(s.scope.clone()).or_default();
            entry.0 += s.n;
            match &s.outcome {
                Ok(c) => entry.1.push(*c),
                Err(_) => entry.2 += 1,
            }
        }
    }
    let rows = by_scope
        .into_iter()
        .map(|(scope, (total, values, degenerate))| {
            let stat = |f: fn(&Correlations) -> f64| mean_std(&values.iter().map(f).collect::<Vec<_>>());
            let (pm, ps) = stat(|c| c.plcc);
            let (sm, ss) = stat(|c| c.srocc);
            let (km, ks) = stat(|c| c.krocc);
            AggregateRow {
                scope,
                n: (total as f64 / repetitions.max(1) as f64).round() as usize,
                mean: Correlations { plcc: pm, srocc: sm, krocc: km },
                std: Correlations { plcc: ps, srocc: ss, krocc: ks },
                evaluations: values.len(),
                degenerate,
            }
        })
        .collect();
    AggregateReport { seed, rows }
}

fn fixed(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v:.6}")
    }
}

pub const REPORT_COLUMNS: [&str; 8] = ["scope", "n", "plcc", "srocc", "krocc", "plcc_std", "srocc_std", "krocc_std"];

impl AggregateReport {
    pub fn get(&self, scope: &Scope) -> Option<&AggregateRow> {
        self.rows.iter().find(|r| &r.scope == scope)
    }

    pub fn overall(&self) -> Option<&AggregateRow> {
        self.get(&Scope::All)
    }

    fn cells(row: &AggregateRow) -> [String; 8] {
        [
            row.scope.to_string(),
            row.n.to_string(),
            fixed(row.mean.plcc),
            fixed(row.mean.srocc),
            fixed(row.mean.krocc),
            fixed(row.std.plcc),
            fixed(row.std.srocc),
            fixed(row.std.krocc),
        ]
    }

    /// CSV with a leading `# seed=<seed>` comment line.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "# seed={}", self.seed)?;
        writeln!(w, "{}", REPORT_COLUMNS.join(","))?;
        for row in &self.rows {
            writeln!(w, "{}", Self::cells(row).join(","))?;
        }
        Ok(())
    }

    pub fn to_table(&self) -> String {
        let mut lines: Vec<[String; 8]> = vec![REPORT_COLUMNS.map(String::from)];
        lines.extend(self.rows.iter().map(Self::cells));
        let widths: Vec<usize> = (0..8).map(|c| lines.iter().map(|l| l[c].len()).max().unwrap_or(0)).collect();
        let mut out = format!("seed {}\n", self.seed);
        for l in &lines {
            let cells: Vec<String> = l
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(c, (s, w))| if c == 0 { format!("{s:<w$}") } else { format!("{s:>w$}") })
                .collect();
            out.push_str(cells.join("  ").trim_end());
            out.push('\n');
        }
        out
    }
}
