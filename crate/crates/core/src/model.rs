//! Data model: aligned endogenous/exogenous series, model orders, the stacked
//! lag design and fitted coefficient blocks.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Result, VarxError};
use crate::linalg;
use crate::scalar::Scalar;

/// A parsed CSV table: one row of `values` per series, columns ascending in time.
#[derive(Debug, Clone)]
pub struct SeriesTable<T> {
    pub names: Vec<String>,
    pub dates: Option<Vec<String>>,
    pub values: Array2<T>,
}

impl<T: Scalar> SeriesTable<T> {
    /// Parses a table with a header of series names and one row per time point.
    /// A leading column named `date` is kept as labels and excluded from the numerics.
    pub fn from_reader<R: Read>(reader: R, source_name: &str) -> Result<Self> {
        let csv_err = |err| VarxError::Csv {
            source_name: source_name.to_string(),
            err,
        };
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header: Vec<String> = rdr
            .headers()
            .map_err(csv_err)?
            .iter()
            .map(str::to_string)
            .collect();
        let has_date = header
            .first()
            .is_some_and(|h| h.eq_ignore_ascii_case("date"));
        let names: Vec<String> = header.iter().skip(usize::from(has_date)).cloned().collect();
        check_unique(&names, source_name)?;

        let mut dates = has_date.then(Vec::new);
        let mut columns: Vec<Vec<T>> = Vec::new();
        for (row_idx, record) in rdr.records().enumerate() {
            let record = record.map_err(csv_err)?;
            // row numbers are reported 1-based counting the header line
            let row = row_idx + 2;
            if record.len() != header.len() {
                return Err(VarxError::Format {
                    source_name: source_name.to_string(),
                    detail: format!(
                        "row {row} has {} fields, header has {}",
                        record.len(),
                        header.len()
                    ),
                });
            }
            let mut fields = record.iter();
            if let Some(d) = dates.as_mut() {
                d.push(fields.next().unwrap_or_default().to_string());
            }
            let mut values = Vec::with_capacity(names.len());
            for (field, name) in fields.zip(&names) {
                if field.is_empty() {
                    return Err(VarxError::EmptyCell {
                        source_name: source_name.to_string(),
                        row,
                        column: name.clone(),
                    });
                }
                let invalid = || VarxError::InvalidCell {
                    source_name: source_name.to_string(),
                    row,
                    column: name.clone(),
                    value: field.to_string(),
                };
                let v: T = field.parse().map_err(|_| invalid())?;
                if !v.is_finite() {
                    return Err(invalid());
                }
                values.push(v);
            }
            columns.push(values);
        }
        let n_time = columns.len();
        let mut out = Array2::zeros((names.len(), n_time));
        for (t, col) in columns.into_iter().enumerate() {
            for (i, v) in col.into_iter().enumerate() {
                out[(i, t)] = v;
            }
        }
        Ok(SeriesTable {
            names,
            dates,
            values: out,
        })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let display = path.display().to_string();
        let file = std::fs::File::open(path).map_err(|err| VarxError::Io {
            path: display.clone(),
            err,
        })?;
        Self::from_reader(std::io::BufReader::new(file), &display)
    }

    /// Writes the table in the same layout it is read from, with
    /// round-trippable decimal values.
    pub fn write<W: Write>(&self, writer: W) -> std::result::Result<(), csv::Error> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = Vec::new();
        if self.dates.is_some() {
            header.push("date");
        }
        header.extend(self.names.iter().map(String::as_str));
        wtr.write_record(&header)?;
        for t in 0..self.values.ncols() {
            let mut record: Vec<String> = Vec::with_capacity(header.len());
            if let Some(d) = &self.dates {
                record.push(d[t].clone());
            }
            record.extend(self.values.column(t).iter().map(|v| format_exact(*v)));
            wtr.write_record(&record)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Decimal rendering with 17 significant digits, exact for `f64` round trips.
pub fn format_exact<T: Scalar>(v: T) -> String {
    format!("{:.16e}", v.to_f64_lossy())
}

fn check_unique(names: &[String], source_name: &str) -> Result<()> {
    let mut seen = HashSet::new();
    for n in names {
        if !seen.insert(n.as_str()) {
            return Err(VarxError::DuplicateName {
                source_name: source_name.to_string(),
                name: n.clone(),
            });
        }
    }
    Ok(())
}

/// Aligned endogenous (k × T) and exogenous (m × T) series, stored mean-centered.
#[derive(Debug, Clone, PartialEq)]
pub struct VarxDataset<T> {
    endo: Array2<T>,
    exog: Array2<T>,
    endo_names: Vec<String>,
    exog_names: Vec<String>,
    endo_means: Array1<T>,
    exog_means: Array1<T>,
    dates: Option<Vec<String>>,
}

impl<T: Scalar> VarxDataset<T> {
    /// Validates raw series and centers every row.
    ///
    /// `exog` may have zero rows, in which case the model is a pure VAR.
    pub fn new(
        endo: Array2<T>,
        exog: Array2<T>,
        endo_names: Vec<String>,
        exog_names: Vec<String>,
    ) -> Result<Self> {
        let src = "dataset";
        if endo.nrows() == 0 {
            return Err(VarxError::DimensionMismatch {
                source_name: src.into(),
                detail: "no endogenous series".into(),
            });
        }
        if endo_names.len() != endo.nrows() || exog_names.len() != exog.nrows() {
            return Err(VarxError::DimensionMismatch {
                source_name: src.into(),
                detail: "series name count does not match row count".into(),
            });
        }
        if exog.nrows() > 0 && exog.ncols() != endo.ncols() {
            return Err(VarxError::DimensionMismatch {
                source_name: src.into(),
                detail: format!(
                    "endogenous has {} time points, exogenous has {}",
                    endo.ncols(),
                    exog.ncols()
                ),
            });
        }
        if endo.ncols() < 2 {
            return Err(VarxError::TooFewObservations(format!(
                "need at least 2 time points, got {}",
                endo.ncols()
            )));
        }
        for (block, names, m) in [("endogenous", &endo_names, &endo), ("exogenous", &exog_names, &exog)] {
            for ((i, t), v) in m.indexed_iter() {
                if !v.is_finite() {
                    return Err(VarxError::InvalidCell {
                        source_name: format!("{block} series"),
                        row: t,
                        column: names[i].clone(),
                        value: format!("{v}"),
                    });
                }
            }
        }
        check_unique(&endo_names, "endogenous series")?;
        check_unique(&exog_names, "exogenous series")?;
        let exog = if exog.nrows() == 0 {
            Array2::zeros((0, endo.ncols()))
        } else {
            exog
        };
        let k = endo.nrows();
        let m = exog.nrows();
        Ok(VarxDataset {
            endo,
            exog,
            endo_names,
            exog_names,
            endo_means: Array1::zeros(k),
            exog_means: Array1::zeros(m),
            dates: None,
        }
        .centered())
    }

    /// Builds a dataset from parsed tables; the exogenous table is optional.
    pub fn from_tables(endo: SeriesTable<T>, exog: Option<SeriesTable<T>>) -> Result<Self> {
        let t_len = endo.values.ncols();
        let (exog_values, exog_names) = match exog {
            Some(x) => {
                if x.values.ncols() != t_len {
                    return Err(VarxError::DimensionMismatch {
                        source_name: "exogenous table".into(),
                        detail: format!(
                            "{} time points, endogenous table has {t_len}",
                            x.values.ncols()
                        ),
                    });
                }
                (x.values, x.names)
            }
            None => (Array2::zeros((0, t_len)), Vec::new()),
        };
        let mut ds = Self::new(endo.values, exog_values, endo.names, exog_names)?;
        ds.dates = endo.dates;
        Ok(ds)
    }

    /// Loads CSV tables from disk and centers them.
    pub fn load_and_center(endo_path: impl AsRef<Path>, exog_path: Option<&Path>) -> Result<Self> {
        let endo = SeriesTable::from_path(endo_path)?;
        let exog = exog_path.map(SeriesTable::from_path).transpose()?;
        Self::from_tables(endo, exog)
    }

    /// Subtracts the current row means and accumulates them into the stored means.
    pub fn centered(mut self) -> Self {
        center_rows(&mut self.endo, &mut self.endo_means);
        center_rows(&mut self.exog, &mut self.exog_means);
        self
    }

    pub fn k(&self) -> usize {
        self.endo.nrows()
    }

    pub fn m(&self) -> usize {
        self.exog.nrows()
    }

    /// Number of time points T.
    pub fn len(&self) -> usize {
        self.endo.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn endo(&self) -> ArrayView2<'_, T> {
        self.endo.view()
    }

    pub fn exog(&self) -> ArrayView2<'_, T> {
        self.exog.view()
    }

    pub fn endo_names(&self) -> &[String] {
        &self.endo_names
    }

    pub fn exog_names(&self) -> &[String] {
        &self.exog_names
    }

    pub fn endo_means(&self) -> ArrayView1<'_, T> {
        self.endo_means.view()
    }

    pub fn exog_means(&self) -> ArrayView1<'_, T> {
        self.exog_means.view()
    }

    pub fn dates(&self) -> Option<&[String]> {
        self.dates.as_deref()
    }

    /// Endogenous series on the original (un-centered) scale.
    pub fn raw_endo(&self) -> Array2<T> {
        &self.endo + &self.endo_means.view().insert_axis(Axis(1))
    }

    /// Exogenous series on the original (un-centered) scale.
    pub fn raw_exog(&self) -> Array2<T> {
        &self.exog + &self.exog_means.view().insert_axis(Axis(1))
    }

    /// Time points `start..end` on the original scale, re-centered with
    /// means estimated from that window only.
    pub fn window(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len() || end - start < 2 {
            return Err(VarxError::TooFewObservations(format!(
                "window {start}..{end} of a series with {} points",
                self.len()
            )));
        }
        let endo = self.raw_endo().slice(s![.., start..end]).to_owned();
        let exog = self.raw_exog().slice(s![.., start..end]).to_owned();
        let mut ds = VarxDataset {
            endo,
            exog,
            endo_names: self.endo_names.clone(),
            exog_names: self.exog_names.clone(),
            endo_means: Array1::zeros(self.k()),
            exog_means: Array1::zeros(self.m()),
            dates: self.dates.as_ref().map(|d| d[start..end].to_vec()),
        }
        .centered();
        ds.dates = self.dates.as_ref().map(|d| d[start..end].to_vec());
        Ok(ds)
    }

    /// Raw-scale tables, e.g. for writing the dataset back to CSV.
    pub fn to_tables(&self) -> (SeriesTable<T>, SeriesTable<T>) {
        (
            SeriesTable {
                names: self.endo_names.clone(),
                dates: self.dates.clone(),
                values: self.raw_endo(),
            },
            SeriesTable {
                names: self.exog_names.clone(),
                dates: self.dates.clone(),
                values: self.raw_exog(),
            },
        )
    }

    pub fn with_dates(mut self, dates: Vec<String>) -> Result<Self> {
        if dates.len() != self.len() {
            return Err(VarxError::DimensionMismatch {
                source_name: "dates".into(),
                detail: format!("{} labels for {} time points", dates.len(), self.len()),
            });
        }
        self.dates = Some(dates);
        Ok(self)
    }
}

fn center_rows<T: Scalar>(values: &mut Array2<T>, means: &mut Array1<T>) {
    if values.ncols() == 0 {
        return;
    }
    let n = T::of_usize(values.ncols());
    for (mut row, acc) in values.rows_mut().into_iter().zip(means.iter_mut()) {
        let mean = row.iter().copied().sum::<T>() / n;
        row.mapv_inplace(|v| v - mean);
        *acc += mean;
    }
}

/// Model orders: endogenous lag order `p` and exogenous lag order `s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct VarxSpec {
    pub p: usize,
    pub s: usize,
}

impl VarxSpec {
    pub fn new(p: usize, s: usize) -> Self {
        VarxSpec { p, s }
    }

    /// Largest lag used anywhere in the model, max(p, s).
    pub fn obar(&self) -> usize {
        self.p.max(self.s)
    }

    /// Default order rule ⌊1.5·√T⌋, floored at 1.
    pub fn default_order(t_len: usize) -> usize {
        ((1.5 * (t_len as f64).sqrt()).floor() as usize).max(1)
    }

    /// Checks the orders against dataset dimensions `m` and `t_len`.
    pub fn validate(&self, m: usize, t_len: usize) -> Result<()> {
        if self.p == 0 {
            return Err(VarxError::InvalidSpec("p must be at least 1".into()));
        }
        if m == 0 && self.s != 0 {
            return Err(VarxError::InvalidSpec(format!(
                "s = {} but there are no exogenous series",
                self.s
            )));
        }
        if m > 0 && self.s == 0 {
            return Err(VarxError::InvalidSpec(
                "s must be at least 1 when exogenous series are present".into(),
            ));
        }
        if self.obar() + 2 > t_len {
            return Err(VarxError::InvalidSpec(format!(
                "max(p, s) = {} leaves fewer than 2 effective samples out of T = {t_len}",
                self.obar()
            )));
        }
        Ok(())
    }
}

/// Stacked regression form `Y = Φ Z + B X + E` over the effective sample.
#[derive(Debug, Clone)]
pub struct CompactForm<T> {
    /// k × N responses.
    pub y: Array2<T>,
    /// kp × N endogenous lags, lag-major blocks `[y_{t-1}; …; y_{t-p}]`.
    pub z: Array2<T>,
    /// ms × N exogenous lags, lag-major blocks `[x_{t-1}; …; x_{t-s}]`.
    pub x: Array2<T>,
    pub spec: VarxSpec,
    pub k: usize,
    pub m: usize,
    pub endo_means: Array1<T>,
    pub exog_means: Array1<T>,
}

impl<T: Scalar> CompactForm<T> {
    /// Effective sample count N = T − max(p, s).
    pub fn n_samples(&self) -> usize {
        self.y.ncols()
    }

    /// Regressors per equation, kp + ms.
    pub fn n_regressors(&self) -> usize {
        self.z.nrows() + self.x.nrows()
    }

    /// The joint design `[Z; X]`, (kp + ms) × N.
    pub fn design(&self) -> Array2<T> {
        ndarray::concatenate(Axis(0), &[self.z.view(), self.x.view()])
            .expect("Z and X share the sample axis")
    }
}

/// Assembles `Y`, `Z`, `X` from a centered dataset.
pub fn build_compact<T: Scalar>(dataset: &VarxDataset<T>, spec: VarxSpec) -> Result<CompactForm<T>> {
    spec.validate(dataset.m(), dataset.len())?;
    let (k, m) = (dataset.k(), dataset.m());
    let obar = spec.obar();
    let n = dataset.len() - obar;
    let endo = dataset.endo();
    let exog = dataset.exog();
    let y = endo.slice(s![.., obar..]).to_owned();
    let mut z = Array2::zeros((k * spec.p, n));
    for lag in 1..=spec.p {
        z.slice_mut(s![(lag - 1) * k..lag * k, ..])
            .assign(&endo.slice(s![.., obar - lag..obar - lag + n]));
    }
    let mut x = Array2::zeros((m * spec.s, n));
    for lag in 1..=spec.s {
        x.slice_mut(s![(lag - 1) * m..lag * m, ..])
            .assign(&exog.slice(s![.., obar - lag..obar - lag + n]));
    }
    Ok(CompactForm {
        y,
        z,
        x,
        spec,
        k,
        m,
        endo_means: dataset.endo_means().to_owned(),
        exog_means: dataset.exog_means().to_owned(),
    })
}

/// Estimated `Φ = [Φ_1 … Φ_p]` (k × kp) and `B = [B_1 … B_s]` (k × ms) with
/// the centering means needed to forecast on the original scale.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet<T> {
    phi: Array2<T>,
    b: Array2<T>,
    spec: VarxSpec,
    endo_means: Array1<T>,
    exog_means: Array1<T>,
}

impl<T: Scalar> CoefficientSet<T> {
    pub fn new(
        phi: Array2<T>,
        b: Array2<T>,
        spec: VarxSpec,
        endo_means: Array1<T>,
        exog_means: Array1<T>,
    ) -> Result<Self> {
        let k = phi.nrows();
        let m = exog_means.len();
        let bad = |detail: String| VarxError::DimensionMismatch {
            source_name: "coefficients".into(),
            detail,
        };
        if phi.ncols() != k * spec.p {
            return Err(bad(format!("Φ is {}×{}, expected {k}×{}", k, phi.ncols(), k * spec.p)));
        }
        if b.nrows() != k || b.ncols() != m * spec.s {
            return Err(bad(format!(
                "B is {}×{}, expected {k}×{}",
                b.nrows(),
                b.ncols(),
                m * spec.s
            )));
        }
        if endo_means.len() != k {
            return Err(bad(format!("{} endogenous means for k = {k}", endo_means.len())));
        }
        if phi.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(bad("non-finite coefficient".into()));
        }
        Ok(CoefficientSet {
            phi,
            b,
            spec,
            endo_means,
            exog_means,
        })
    }

    /// All-zero coefficients for the model described by `data`.
    pub fn zeros_like(data: &CompactForm<T>) -> Self {
        CoefficientSet {
            phi: Array2::zeros((data.k, data.k * data.spec.p)),
            b: Array2::zeros((data.k, data.m * data.spec.s)),
            spec: data.spec,
            endo_means: data.endo_means.clone(),
            exog_means: data.exog_means.clone(),
        }
    }

    pub fn k(&self) -> usize {
        self.phi.nrows()
    }

    pub fn m(&self) -> usize {
        self.exog_means.len()
    }

    pub fn spec(&self) -> VarxSpec {
        self.spec
    }

    pub fn phi(&self) -> ArrayView2<'_, T> {
        self.phi.view()
    }

    pub fn b(&self) -> ArrayView2<'_, T> {
        self.b.view()
    }

    pub fn endo_means(&self) -> ArrayView1<'_, T> {
        self.endo_means.view()
    }

    pub fn exog_means(&self) -> ArrayView1<'_, T> {
        self.exog_means.view()
    }

    /// Φ_ℓ for `lag` in 1..=p.
    pub fn phi_lag(&self, lag: usize) -> ArrayView2<'_, T> {
        assert!((1..=self.spec.p).contains(&lag), "Φ lag {lag} outside 1..={}", self.spec.p);
        let k = self.k();
        self.phi.slice(s![.., (lag - 1) * k..lag * k])
    }

    /// B_j for `lag` in 1..=s.
    pub fn b_lag(&self, lag: usize) -> ArrayView2<'_, T> {
        assert!((1..=self.spec.s).contains(&lag), "B lag {lag} outside 1..={}", self.spec.s);
        let m = self.m();
        self.b.slice(s![.., (lag - 1) * m..lag * m])
    }

    /// Coefficient path `[Φ_1[i,d], …, Φ_p[i,d]]`.
    pub fn phi_path(&self, i: usize, d: usize) -> Vec<T> {
        let k = self.k();
        (0..self.spec.p).map(|l| self.phi[(i, l * k + d)]).collect()
    }

    /// Coefficient path `[B_1[i,r], …, B_s[i,r]]`.
    pub fn b_path(&self, i: usize, r: usize) -> Vec<T> {
        let m = self.m();
        (0..self.spec.s).map(|l| self.b[(i, l * m + r)]).collect()
    }

    /// Joint row `[Φ_i· | B_i·]` of equation `i`.
    pub fn row(&self, i: usize) -> Array1<T> {
        ndarray::concatenate(Axis(0), &[self.phi.row(i), self.b.row(i)]).expect("1-d concat")
    }

    /// Number of nonzero coefficients.
    pub fn nonzero_count(&self) -> usize {
        self.phi
            .iter()
            .chain(self.b.iter())
            .filter(|v| **v != T::zero())
            .count()
    }

    /// Companion-matrix spectral radius of the endogenous block.
    pub fn spectral_radius(&self) -> Result<T> {
        companion_spectral_radius(self.phi.view(), self.spec.p)
    }

    pub(crate) fn from_rows(rows: &[Array1<T>], data: &CompactForm<T>) -> Self {
        let kp = data.z.nrows();
        let mut out = Self::zeros_like(data);
        for (i, r) in rows.iter().enumerate() {
            out.phi.row_mut(i).assign(&r.slice(s![..kp]));
            out.b.row_mut(i).assign(&r.slice(s![kp..]));
        }
        out
    }
}

/// Companion matrix of `[Φ_1 … Φ_p]` (k × kp): first block row holds the
/// coefficient blocks, identity blocks sit on the block sub-diagonal.
pub fn companion_matrix<T: Scalar>(phi: ArrayView2<'_, T>, p: usize) -> Array2<T> {
    let k = phi.nrows();
    let kp = k * p;
    let mut c = Array2::zeros((kp, kp));
    c.slice_mut(s![0..k, ..]).assign(&phi);
    for i in k..kp {
        c[(i, i - k)] = T::one();
    }
    c
}

/// Spectral radius of the companion matrix; below 1 iff the recursion is stable.
pub fn companion_spectral_radius<T: Scalar>(phi: ArrayView2<'_, T>, p: usize) -> Result<T> {
    if p == 0 || phi.ncols() != phi.nrows() * p {
        return Err(VarxError::DimensionMismatch {
            source_name: "Φ".into(),
            detail: format!("{}×{} block with p = {p}", phi.nrows(), phi.ncols()),
        });
    }
    if phi.iter().all(|v| *v == T::zero()) {
        return Ok(T::zero());
    }
    linalg::spectral_radius(companion_matrix(phi, p).view())
}
