//! Reference-date panels of obligors.
//!
//! Dates are integer indices `1..=N`, one every `1/q` years. Each date holds
//! the set of obligors observed on it, their PD estimates and (optionally)
//! whether they defaulted inside the one-year window starting at that date.
//! Dates without obligors stay in the timeline: they still separate the
//! neighbouring windows, but they drop out of every average.

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{is_probability, Real};

/// Ordered grade PDs of a rating master scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "Vec<T>",
    into = "Vec<T>",
    bound = "T: Real + Serialize + for<'a> Deserialize<'a>"
)]
pub struct MasterScale<T> {
    grade_pds: Vec<T>,
}

impl<T: Real> MasterScale<T> {
    pub fn new(grade_pds: Vec<T>) -> Result<Self> {
        if grade_pds.is_empty() {
            return Err(Error::Validation("master scale has no grades".into()));
        }
        for &p in &grade_pds {
            if !is_probability(p) {
                return Err(Error::NotAProbability(p.as_f64()));
            }
        }
        if grade_pds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Validation("master scale PDs must be strictly increasing".into()));
        }
        Ok(Self { grade_pds })
    }

    pub fn grades(&self) -> &[T] {
        &self.grade_pds
    }

    pub fn len(&self) -> usize {
        self.grade_pds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grade_pds.is_empty()
    }

    pub fn pd_min(&self) -> T {
        self.grade_pds[0]
    }

    pub fn pd_max(&self) -> T {
        self.grade_pds[self.grade_pds.len() - 1]
    }

    /// Reads a `grade,pd` CSV. Rows are sorted by PD before validation.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            #[allow(dead_code)]
            grade: String,
            pd: f64,
        }
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut pds = Vec::new();
        for row in rdr.deserialize::<Row>() {
            pds.push(T::lit(row?.pd));
        }
        pds.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        Self::new(pds)
    }
}

impl<T: Real> TryFrom<Vec<T>> for MasterScale<T> {
    type Error = Error;

    fn try_from(v: Vec<T>) -> Result<Self> {
        Self::new(v)
    }
}

impl<T> From<MasterScale<T>> for Vec<T> {
    fn from(m: MasterScale<T>) -> Self {
        m.grade_pds
    }
}

/// One obligor observed at one reference date.
#[derive(Debug, Clone, PartialEq)]
pub struct ObligorRecord<T> {
    pub date_index: usize,
    pub obligor_id: String,
    pub pd_estimate: T,
    /// Default observed in `[RD_t, RD_t + 1)`; `None` when no realization exists yet.
    pub defaulted: Option<bool>,
}

impl<T> ObligorRecord<T> {
    pub fn new(date_index: usize, obligor_id: impl Into<String>, pd_estimate: T, defaulted: Option<bool>) -> Self {
        Self {
            date_index,
            obligor_id: obligor_id.into(),
            pd_estimate,
            defaulted,
        }
    }
}

#[derive(Debug, Clone)]
struct DateSlice<T> {
    /// Dense obligor indices, ascending.
    members: Vec<u32>,
    pd_estimates: Vec<T>,
    defaulted: Vec<Option<bool>>,
}

/// Immutable panel of reference dates and their obligor sets.
#[derive(Debug, Clone)]
pub struct Panel<T> {
    n_dates: usize,
    windows_per_year: usize,
    obligor_ids: Vec<String>,
    dates: Vec<DateSlice<T>>,
    /// `overlaps[lag - 1][t - 1]`: positions `(in Λ_t, in Λ_{t+lag})` of shared obligors.
    overlaps: Vec<Vec<Vec<(u32, u32)>>>,
}

/// Overlap of the windows starting at dates `t` and `s`: `max(0, 1 - |s - t| / q)`.
pub fn overlap_weight<T: Real>(t: usize, s: usize, q: usize) -> T {
    let lag = t.abs_diff(s);
    if lag >= q {
        T::zero()
    } else {
        T::count(q - lag) / T::count(q)
    }
}

/// Builds a panel from a record stream.
pub fn build_panel<T, I>(records: I, n_dates: usize, windows_per_year: usize) -> Result<Panel<T>>
where
    T: Real,
    I: IntoIterator<Item = ObligorRecord<T>>,
{
    if n_dates == 0 {
        return Err(Error::Validation("panel needs at least one reference date".into()));
    }
    if windows_per_year == 0 {
        return Err(Error::Validation("windows per year must be at least 1".into()));
    }

    let mut per_date: Vec<Vec<(String, T, Option<bool>)>> = vec![Vec::new(); n_dates];
    let mut seen: HashSet<(usize, String)> = HashSet::new();
    for rec in records {
        if rec.date_index == 0 || rec.date_index > n_dates {
            return Err(Error::DateOutOfRange {
                index: rec.date_index,
                n_dates,
            });
        }
        if !is_probability(rec.pd_estimate) {
            return Err(Error::Validation(format!(
                "pd_estimate {} of obligor {} at date {} outside (0, 1)",
                rec.pd_estimate, rec.obligor_id, rec.date_index
            )));
        }
        if !seen.insert((rec.date_index, rec.obligor_id.clone())) {
            return Err(Error::Validation(format!(
                "duplicate record for obligor {} at date {}",
                rec.obligor_id, rec.date_index
            )));
        }
        per_date[rec.date_index - 1].push((rec.obligor_id, rec.pd_estimate, rec.defaulted));
    }
    if per_date.iter().all(Vec::is_empty) {
        return Err(Error::Validation("panel has no obligors at any date".into()));
    }

    let mut index_of: BTreeMap<String, u32> = BTreeMap::new();
    for rows in &per_date {
        for (id, _, _) in rows {
            index_of.entry(id.clone()).or_insert(0);
        }
    }
    for (i, v) in index_of.values_mut().enumerate() {
        *v = i as u32;
    }
    let obligor_ids: Vec<String> = index_of.keys().cloned().collect();

    let dates: Vec<DateSlice<T>> = per_date
        .into_iter()
        .map(|rows| {
            let mut rows: Vec<(u32, T, Option<bool>)> =
                rows.into_iter().map(|(id, p, d)| (index_of[&id], p, d)).collect();
            rows.sort_unstable_by_key(|r| r.0);
            DateSlice {
                members: rows.iter().map(|r| r.0).collect(),
                pd_estimates: rows.iter().map(|r| r.1).collect(),
                defaulted: rows.iter().map(|r| r.2).collect(),
            }
        })
        .collect();

    let overlaps = (1..windows_per_year)
        .map(|lag| {
            (0..n_dates)
                .map(|t| {
                    if t + lag < n_dates {
                        intersect_positions(&dates[t].members, &dates[t + lag].members)
                    } else {
                        Vec::new()
                    }
                })
                .collect()
        })
        .collect();

    Ok(Panel {
        n_dates,
        windows_per_year,
        obligor_ids,
        dates,
        overlaps,
    })
}

fn intersect_positions(a: &[u32], b: &[u32]) -> Vec<(u32, u32)> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push((i as u32, j as u32));
                i += 1;
                j += 1;
            }
        }
    }
    out
}

impl<T: Real> Panel<T> {
    /// Number of reference dates `N`.
    pub fn n_dates(&self) -> usize {
        self.n_dates
    }

    /// Reference dates per year `q`.
    pub fn windows_per_year(&self) -> usize {
        self.windows_per_year
    }

    fn check_date(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.n_dates {
            Err(Error::DateOutOfRange {
                index: t,
                n_dates: self.n_dates,
            })
        } else {
            Ok(())
        }
    }

    /// `n_t` for a 1-based date index. Panics on an out-of-range index.
    pub fn n(&self, t: usize) -> usize {
        self.dates[t - 1].members.len()
    }

    pub fn counts(&self) -> Vec<usize> {
        self.dates.iter().map(|d| d.members.len()).collect()
    }

    /// `R_N`: dates with at least one obligor.
    pub fn active_dates(&self) -> Vec<usize> {
        (1..=self.n_dates).filter(|&t| self.n(t) > 0).collect()
    }

    /// `R(N)`.
    pub fn active_count(&self) -> usize {
        self.dates.iter().filter(|d| !d.members.is_empty()).count()
    }

    /// Smallest non-zero `n_t`.
    pub fn n_min(&self) -> usize {
        self.dates
            .iter()
            .map(|d| d.members.len())
            .filter(|&n| n > 0)
            .min()
            .unwrap_or(0)
    }

    pub fn n_max(&self) -> usize {
        self.dates.iter().map(|d| d.members.len()).max().unwrap_or(0)
    }

    /// `M`, the number of distinct obligors over the whole history.
    pub fn distinct_obligors(&self) -> usize {
        self.obligor_ids.len()
    }

    pub fn record_count(&self) -> usize {
        self.dates.iter().map(|d| d.members.len()).sum()
    }

    pub fn obligor_id(&self, index: u32) -> &str {
        &self.obligor_ids[index as usize]
    }

    /// Dense obligor indices in `Λ_t`, ascending.
    pub fn members(&self, t: usize) -> &[u32] {
        &self.dates[t - 1].members
    }

    pub fn pd_estimates(&self, t: usize) -> &[T] {
        &self.dates[t - 1].pd_estimates
    }

    pub fn default_flags(&self, t: usize) -> &[Option<bool>] {
        &self.dates[t - 1].defaulted
    }

    /// `k_{t,s} = |Λ_t ∩ Λ_s|`.
    pub fn persisting_count(&self, t: usize, s: usize) -> Result<usize> {
        self.check_date(t)?;
        self.check_date(s)?;
        let (lo, hi) = if t <= s { (t, s) } else { (s, t) };
        let lag = hi - lo;
        if lag == 0 {
            return Ok(self.n(t));
        }
        if lag < self.windows_per_year {
            return Ok(self.overlaps[lag - 1][lo - 1].len());
        }
        Ok(intersect_positions(self.members(lo), self.members(hi)).len())
    }

    /// Pairs of positions `(in Λ_t, in Λ_{t+lag})` of persisting obligors,
    /// for `1 <= lag < q`. Empty when `t + lag > N`.
    pub fn overlap_pairs(&self, t: usize, lag: usize) -> &[(u32, u32)] {
        debug_assert!(lag >= 1 && lag < self.windows_per_year);
        &self.overlaps[lag - 1][t - 1]
    }

    pub fn overlap_weight(&self, t: usize, s: usize) -> Result<T> {
        self.check_date(t)?;
        self.check_date(s)?;
        Ok(overlap_weight(t, s, self.windows_per_year))
    }

    /// The panel's own PD estimates as a PD table.
    pub fn estimates(&self) -> PdTable<T> {
        PdTable {
            per_date: self.dates.iter().map(|d| d.pd_estimates.clone()).collect(),
        }
    }

    /// Number of recorded defaults at date `t`, or an error if any flag is missing.
    pub fn default_count(&self, t: usize) -> Result<usize> {
        let d = &self.dates[t - 1];
        let mut count = 0;
        for (pos, flag) in d.defaulted.iter().enumerate() {
            match flag {
                Some(true) => count += 1,
                Some(false) => {}
                None => {
                    return Err(Error::MissingDefaultFlag {
                        date: t,
                        obligor: self.obligor_id(d.members[pos]).to_string(),
                    })
                }
            }
        }
        Ok(count)
    }

    pub fn has_realizations(&self) -> bool {
        self.dates.iter().all(|d| d.defaulted.iter().all(Option::is_some))
    }

    /// Same membership and estimates, with the given default flags (laid out like `members`).
    pub fn with_default_flags(&self, flags: Vec<Vec<bool>>) -> Result<Self> {
        if flags.len() != self.n_dates || flags.iter().zip(&self.dates).any(|(f, d)| f.len() != d.members.len()) {
            return Err(Error::Validation("default flags do not match the panel layout".into()));
        }
        let mut out = self.clone();
        for (d, f) in out.dates.iter_mut().zip(flags) {
            d.defaulted = f.into_iter().map(Some).collect();
        }
        Ok(out)
    }

    /// Iterates over all records in date order.
    pub fn records(&self) -> impl Iterator<Item = ObligorRecord<T>> + '_ {
        self.dates.iter().enumerate().flat_map(move |(i, d)| {
            (0..d.members.len()).map(move |pos| ObligorRecord {
                date_index: i + 1,
                obligor_id: self.obligor_ids[d.members[pos] as usize].clone(),
                pd_estimate: d.pd_estimates[pos],
                defaulted: d.defaulted[pos],
            })
        })
    }
}

/// A PD for every `(t, j ∈ Λ_t)`, laid out like the panel's member lists.
#[derive(Debug, Clone, PartialEq)]
pub struct PdTable<T> {
    per_date: Vec<Vec<T>>,
}

impl<T: Real> PdTable<T> {
    pub fn constant(panel: &Panel<T>, p: T) -> Self {
        Self {
            per_date: (1..=panel.n_dates()).map(|t| vec![p; panel.n(t)]).collect(),
        }
    }

    /// Looks up each `(t, obligor_id)` through `f`; `None` is reported as a missing PD.
    pub fn from_fn<F>(panel: &Panel<T>, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, &str) -> Option<T>,
    {
        let mut per_date = Vec::with_capacity(panel.n_dates());
        for t in 1..=panel.n_dates() {
            let mut row = Vec::with_capacity(panel.n(t));
            for &m in panel.members(t) {
                let id = panel.obligor_id(m);
                match f(t, id) {
                    Some(p) => row.push(p),
                    None => {
                        return Err(Error::MissingPd {
                            date: t,
                            obligor: id.to_string(),
                        })
                    }
                }
            }
            per_date.push(row);
        }
        Ok(Self { per_date })
    }

    /// Raw constructor; the layout is validated against a panel on use.
    pub fn from_rows(per_date: Vec<Vec<T>>) -> Self {
        Self { per_date }
    }

    pub fn date(&self, t: usize) -> &[T] {
        &self.per_date[t - 1]
    }

    pub fn iter(&self) -> impl Iterator<Item = T> + '_ {
        self.per_date.iter().flatten().copied()
    }

    /// Checks that every member of every `Λ_t` carries a PD.
    pub fn check_against(&self, panel: &Panel<T>) -> Result<()> {
        if self.per_date.len() != panel.n_dates() {
            return Err(Error::Validation(format!(
                "PD table covers {} dates, panel has {}",
                self.per_date.len(),
                panel.n_dates()
            )));
        }
        for t in 1..=panel.n_dates() {
            let row = &self.per_date[t - 1];
            if row.len() < panel.n(t) {
                return Err(Error::MissingPd {
                    date: t,
                    obligor: panel.obligor_id(panel.members(t)[row.len()]).to_string(),
                });
            }
            if row.len() > panel.n(t) {
                return Err(Error::Validation(format!(
                    "PD table has {} entries at date {t}, panel has {}",
                    row.len(),
                    panel.n(t)
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize, Serialize)]
struct CsvRow {
    date_index: usize,
    obligor_id: String,
    pd_estimate: f64,
    #[serde(default)]
    defaulted: Option<u8>,
}

/// Reads a `date_index,obligor_id,pd_estimate,defaulted` CSV.
///
/// `n_dates` defaults to the largest date index in the file. An empty
/// `defaulted` field means no realization is available for that record.
pub fn read_panel_csv<T: Real, R: Read>(
    reader: R,
    n_dates: Option<usize>,
    windows_per_year: usize,
) -> Result<Panel<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = Vec::new();
    for (line, row) in rdr.deserialize::<CsvRow>().enumerate() {
        let row = row?;
        let defaulted = match row.defaulted {
            None => None,
            Some(0) => Some(false),
            Some(1) => Some(true),
            Some(other) => {
                return Err(Error::Validation(format!(
                    "row {}: defaulted must be 0 or 1, got {other}",
                    line + 1
                )))
            }
        };
        records.push(ObligorRecord::new(
            row.date_index,
            row.obligor_id,
            T::lit(row.pd_estimate),
            defaulted,
        ));
    }
    if records.is_empty() {
        return Err(Error::Validation("panel file contains no records".into()));
    }
    let n_dates = n_dates.unwrap_or_else(|| records.iter().map(|r| r.date_index).max().unwrap_or(0));
    build_panel(records, n_dates, windows_per_year)
}

pub fn write_panel_csv<T: Real, W: Write>(panel: &Panel<T>, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for rec in panel.records() {
        wtr.serialize(CsvRow {
            date_index: rec.date_index,
            obligor_id: rec.obligor_id,
            pd_estimate: rec.pd_estimate.as_f64(),
            defaulted: rec.defaulted.map(u8::from),
        })?;
    }
    wtr.flush()?;
    Ok(())
}
