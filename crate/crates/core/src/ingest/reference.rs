use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::IngestError;

/// Column layout of the published Community Mobility Reports CSV.
pub const CMR_HEADER: [&str; 15] = [
    "country_region_code",
    "country_region",
    "sub_region_1",
    "sub_region_2",
    "metro_area",
    "iso_3166_2_code",
    "census_fips_code",
    "place_id",
    "date",
    "retail_and_recreation_percent_change_from_baseline",
    "grocery_and_pharmacy_percent_change_from_baseline",
    "parks_percent_change_from_baseline",
    "transit_stations_percent_change_from_baseline",
    "workplaces_percent_change_from_baseline",
    "residential_percent_change_from_baseline",
];

const SUB_LEVEL_COLUMNS: [&str; 3] = ["sub_region_1", "sub_region_2", "metro_area"];

/// ISO 3166 alpha-3 to alpha-2 for countries the reference files are keyed on.
const ALPHA3_TO_ALPHA2: [(&str, &str); 17] = [
    ("ARG", "AR"),
    ("CHL", "CL"),
    ("COL", "CO"),
    ("CRI", "CR"),
    ("ECU", "EC"),
    ("GRC", "GR"),
    ("GTM", "GT"),
    ("ITA", "IT"),
    ("MEX", "MX"),
    ("NIC", "NI"),
    ("PAN", "PA"),
    ("PER", "PE"),
    ("PHL", "PH"),
    ("SVN", "SI"),
    ("TUR", "TR"),
    ("USA", "US"),
    ("VEN", "VE"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexCategory {
    TransitStations,
    Residential,
    Workplaces,
}

impl IndexCategory {
    pub const ALL: [IndexCategory; 3] = [Self::TransitStations, Self::Residential, Self::Workplaces];

    pub fn name(self) -> &'static str {
        match self {
            Self::TransitStations => "transit_stations",
            Self::Residential => "residential",
            Self::Workplaces => "workplaces",
        }
    }

    pub fn column(self) -> String {
        format!("{}_percent_change_from_baseline", self.name())
    }
}

impl fmt::Display for IndexCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for IndexCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| format!("unknown index `{s}`"))
    }
}

/// One country-level daily series of percent change from baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceIndexSeries {
    pub country_code: String,
    pub index: IndexCategory,
    pub values: BTreeMap<NaiveDate, f64>,
}

fn code_matches(field: &str, country: &str) -> bool {
    if field.eq_ignore_ascii_case(country) {
        return true;
    }
    ALPHA3_TO_ALPHA2.iter().any(|(a3, a2)| a3.eq_ignore_ascii_case(country) && a2.eq_ignore_ascii_case(field))
}

/// Extracts the country-level transit, residential and workplaces series of
/// `country_code` (alpha-3, alpha-2 or the literal code used in the file).
/// Series are returned in [`IndexCategory::ALL`] order.
pub fn parse_reference_indices<R: Read>(
    reader: R,
    country_code: &str,
) -> Result<Vec<ReferenceIndexSeries>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    let find = |name: &str| header.iter().position(|h| h == name);
    let code_col =
        find("country_region_code").ok_or_else(|| IngestError::MissingColumn("country_region_code".into()))?;
    let date_col = find("date").ok_or_else(|| IngestError::MissingColumn("date".into()))?;
    let index_cols = IndexCategory::ALL
        .iter()
        .map(|c| find(&c.column()).ok_or_else(|| IngestError::MissingColumn(c.column())))
        .collect::<Result<Vec<_>, _>>()?;
    let sub_cols: Vec<usize> = SUB_LEVEL_COLUMNS.iter().filter_map(|c| find(c)).collect();

    let mut series: Vec<ReferenceIndexSeries> = IndexCategory::ALL
        .iter()
        .map(|&index| ReferenceIndexSeries { country_code: country_code.to_owned(), index, values: BTreeMap::new() })
        .collect();
    let mut seen_dates = std::collections::BTreeSet::new();
    let mut found = false;

    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let field = |i: usize| row.get(i).unwrap_or("").trim();
        if !code_matches(field(code_col), country_code) {
            continue;
        }
        if sub_cols.iter().any(|&c| !field(c).is_empty()) {
            continue;
        }
        found = true;
        let date = NaiveDate::parse_from_str(field(date_col), "%Y-%m-%d").map_err(|_| IngestError::BadValue {
            line,
            column: "date".into(),
            value: field(date_col).into(),
        })?;
        if !seen_dates.insert(date) {
            return Err(IngestError::DuplicateDate { country: country_code.to_owned(), date });
        }
        for (s, &col) in series.iter_mut().zip(&index_cols) {
            let raw = field(col);
            if raw.is_empty() {
                continue;
            }
            let v: f64 = raw.parse().map_err(|_| IngestError::BadValue {
                line,
                column: header[col].to_owned(),
                value: raw.to_owned(),
            })?;
            s.values.insert(date, v);
        }
    }
    if !found {
        return Err(IngestError::NoSeries { country: country_code.to_owned() });
    }
    Ok(series)
}

/// One country-level row to be written in the full reference layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceRow {
    pub country_code: String,
    pub country_name: String,
    pub date: NaiveDate,
    pub transit_stations: Option<f64>,
    pub workplaces: Option<f64>,
    pub residential: Option<f64>,
}

/// Writes rows in the published column layout; categories this crate does
/// not model are left empty.
pub fn write_reference_indices<W: Write>(writer: W, rows: &[ReferenceRow]) -> Result<(), IngestError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(CMR_HEADER)?;
    let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        let date = r.date.format("%Y-%m-%d").to_string();
        wtr.write_record([
            r.country_code.as_str(),
            r.country_name.as_str(),
            "",
            "",
            "",
            "",
            "",
            "",
            date.as_str(),
            "",
            "",
            "",
            &cell(r.transit_stations),
            &cell(r.workplaces),
            &cell(r.residential),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    const FULL: &str = "country_region_code,country_region,sub_region_1,sub_region_2,metro_area,iso_3166_2_code,census_fips_code,place_id,date,retail_and_recreation_percent_change_from_baseline,grocery_and_pharmacy_percent_change_from_baseline,parks_percent_change_from_baseline,transit_stations_percent_change_from_baseline,workplaces_percent_change_from_baseline,residential_percent_change_from_baseline
IT,Italy,,,,,,ChIJA9KNRIL-1BIRb15jJFz1LOI,2020-03-15,-94,-46,-90,-85,-63,31
IT,Italy,Lombardy,,,IT-25,,ChIJ,2020-03-15,-95,-50,-91,-86,-70,33
IT,Italy,,,,,,ChIJA9KNRIL-1BIRb15jJFz1LOI,2020-03-16,-90,,-88,-80,-60,
FR,France,,,,,,ChIJ,2020-03-15,-80,-30,-70,-72,-50,20
";

    #[test]
    fn extracts_country_level_rows() {
        let series = parse_reference_indices(FULL.as_bytes(), "ITA").unwrap();
        assert_eq!(series.len(), 3);
        let transit = &series[0];
        assert_eq!(transit.index, IndexCategory::TransitStations);
        assert_eq!(transit.values.get(&d("2020-03-15")), Some(&-85.0));
        assert_eq!(transit.values.len(), 2);
        let residential = &series[1];
        assert_eq!(residential.values.get(&d("2020-03-15")), Some(&31.0));
        // Empty cell becomes a missing date.
        assert_eq!(residential.values.get(&d("2020-03-16")), None);
        assert_eq!(series[2].values.get(&d("2020-03-16")), Some(&-60.0));
    }

    #[test]
    fn reduced_layout() {
        let csv = "country_region_code,sub_region_1,date,transit_stations_percent_change_from_baseline,workplaces_percent_change_from_baseline,residential_percent_change_from_baseline\nIT,,2020-03-15,-60,-50,-72\n";
        let series = parse_reference_indices(csv.as_bytes(), "IT").unwrap();
        assert_eq!(series[1].values.get(&d("2020-03-15")), Some(&-72.0));
    }

    #[test]
    fn absent_country() {
        assert!(matches!(parse_reference_indices(FULL.as_bytes(), "ARG"), Err(IngestError::NoSeries { .. })));
    }

    #[test]
    fn duplicate_date_is_fatal() {
        let mut csv = FULL.to_string();
        csv.push_str("IT,Italy,,,,,,x,2020-03-16,1,1,1,1,1,1\n");
        assert!(matches!(parse_reference_indices(csv.as_bytes(), "ITA"), Err(IngestError::DuplicateDate { .. })));
    }

    #[test]
    fn written_rows_parse_back() {
        let rows = vec![
            ReferenceRow {
                country_code: "SYN".into(),
                country_name: "Synthetia".into(),
                date: d("2020-03-11"),
                transit_stations: Some(-12.0),
                workplaces: None,
                residential: Some(4.0),
            },
            ReferenceRow {
                country_code: "SYN".into(),
                country_name: "Synthetia".into(),
                date: d("2020-03-12"),
                transit_stations: Some(3.0),
                workplaces: Some(-1.0),
                residential: Some(0.0),
            },
        ];
        let mut buf = Vec::new();
        write_reference_indices(&mut buf, &rows).unwrap();
        let series = parse_reference_indices(buf.as_slice(), "SYN").unwrap();
        assert_eq!(series[0].values.len(), 2);
        assert_eq!(series[2].values.len(), 1);
        assert_eq!(series[1].values[&d("2020-03-12")], 0.0);
    }
}
