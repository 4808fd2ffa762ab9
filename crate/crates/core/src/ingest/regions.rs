use std::collections::HashSet;
use std::io::Read;

use serde_json::{json, Value};

use super::IngestError;
use crate::geodesy::GeoPoint;

type Ring = Vec<(f64, f64)>;

/// A polygon in (lon, lat) degrees: one exterior ring and optional holes.
/// Rings are stored open (no repeated closing vertex).
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    exterior: Ring,
    holes: Vec<Ring>,
    bbox: [f64; 4],
}

impl Polygon {
    /// Builds a validated polygon. Rings may be given open or closed.
    pub fn new(exterior: Ring, holes: Vec<Ring>) -> Result<Self, String> {
        let exterior = clean_ring(exterior)?;
        let holes = holes.into_iter().map(clean_ring).collect::<Result<Vec<_>, _>>()?;
        let mut bbox = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
        for &(x, y) in &exterior {
            bbox[0] = bbox[0].min(x);
            bbox[1] = bbox[1].min(y);
            bbox[2] = bbox[2].max(x);
            bbox[3] = bbox[3].max(y);
        }
        Ok(Self { exterior, holes, bbox })
    }

    /// Axis-aligned rectangle, counter-clockwise from the south-west corner.
    pub fn rectangle(lon_min: f64, lat_min: f64, lon_max: f64, lat_max: f64) -> Result<Self, String> {
        Self::new(vec![(lon_min, lat_min), (lon_max, lat_min), (lon_max, lat_max), (lon_min, lat_max)], Vec::new())
    }

    pub fn exterior(&self) -> &[(f64, f64)] {
        &self.exterior
    }

    /// Boundary-inclusive containment. A point on a hole's boundary counts
    /// as inside the polygon.
    pub fn contains(&self, p: GeoPoint) -> bool {
        let (x, y) = (p.lon, p.lat);
        if x < self.bbox[0] || x > self.bbox[2] || y < self.bbox[1] || y > self.bbox[3] {
            return false;
        }
        match ring_location(&self.exterior, x, y) {
            Location::Outside => false,
            Location::Boundary => true,
            Location::Inside => !self.holes.iter().any(|h| ring_location(h, x, y) == Location::Inside),
        }
    }

    fn to_coordinates(&self) -> Value {
        let ring = |r: &Ring| {
            let mut pts: Vec<Value> = r.iter().map(|&(x, y)| json!([x, y])).collect();
            pts.push(json!([r[0].0, r[0].1]));
            Value::Array(pts)
        };
        let mut rings = vec![ring(&self.exterior)];
        rings.extend(self.holes.iter().map(ring));
        Value::Array(rings)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Location {
    Inside,
    Boundary,
    Outside,
}

fn ring_location(ring: &[(f64, f64)], x: f64, y: f64) -> Location {
    let n = ring.len();
    let mut inside = false;
    for i in 0..n {
        let (x1, y1) = ring[i];
        let (x2, y2) = ring[(i + 1) % n];
        if on_segment((x1, y1), (x2, y2), (x, y)) {
            return Location::Boundary;
        }
        if (y1 > y) != (y2 > y) {
            let x_cross = x1 + (y - y1) * (x2 - x1) / (y2 - y1);
            if x < x_cross {
                inside = !inside;
            }
        }
    }
    if inside {
        Location::Inside
    } else {
        Location::Outside
    }
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

fn on_segment(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> bool {
    if p.0 < a.0.min(b.0) || p.0 > a.0.max(b.0) || p.1 < a.1.min(b.1) || p.1 > a.1.max(b.1) {
        return false;
    }
    let scale = (b.0 - a.0).abs() + (b.1 - a.1).abs();
    cross(a, b, p).abs() <= 1e-12 * scale.max(1e-300)
}

fn segments_touch(a: (f64, f64), b: (f64, f64), c: (f64, f64), d: (f64, f64)) -> bool {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    on_segment(c, d, a) || on_segment(c, d, b) || on_segment(a, b, c) || on_segment(a, b, d)
}

fn clean_ring(mut ring: Ring) -> Result<Ring, String> {
    if ring.iter().any(|&(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err("non-finite coordinate".into());
    }
    ring.dedup();
    if ring.len() > 1 && ring.first() == ring.last() {
        ring.pop();
    }
    if ring.len() < 3 {
        return Err(format!("ring has {} distinct vertices, need at least 3", ring.len()));
    }
    let area2: f64 = (0..ring.len())
        .map(|i| {
            let (x1, y1) = ring[i];
            let (x2, y2) = ring[(i + 1) % ring.len()];
            x1 * y2 - x2 * y1
        })
        .sum();
    if let Some((i, j)) = self_intersection(&ring) {
        return Err(format!("ring self-intersects between edges {i} and {j}"));
    }
    if area2 == 0.0 {
        return Err("ring has zero area".into());
    }
    Ok(ring)
}

/// Finds a pair of non-adjacent edges that touch. Edges are swept in order of
/// their minimum x so only overlapping x-intervals are compared.
fn self_intersection(ring: &[(f64, f64)]) -> Option<(usize, usize)> {
    let n = ring.len();
    let edge = |i: usize| (ring[i], ring[(i + 1) % n]);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let (p, q) = edge(a);
        let (r, s) = edge(b);
        p.0.min(q.0).total_cmp(&r.0.min(s.0))
    });
    for (k, &i) in order.iter().enumerate() {
        let (a, b) = edge(i);
        let max_x = a.0.max(b.0);
        for &j in &order[k + 1..] {
            let (c, d) = edge(j);
            if c.0.min(d.0) > max_x {
                break;
            }
            let adjacent = (i + 1) % n == j || (j + 1) % n == i;
            if adjacent {
                // Adjacent edges share a vertex; they only conflict when they fold back.
                let (shared, other_i, other_j) = if (i + 1) % n == j { (b, a, d) } else { (a, b, c) };
                if cross(shared, other_i, other_j) == 0.0
                    && (other_i.0 - shared.0) * (other_j.0 - shared.0) + (other_i.1 - shared.1) * (other_j.1 - shared.1)
                        > 0.0
                {
                    return Some((i.min(j), i.max(j)));
                }
                continue;
            }
            if segments_touch(a, b, c, d) {
                return Some((i.min(j), i.max(j)));
            }
        }
    }
    None
}

/// One first-level administrative region.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub region_id: String,
    pub country_code: String,
    pub population: f64,
    pub polygons: Vec<Polygon>,
}

impl Region {
    pub fn contains(&self, p: GeoPoint) -> bool {
        self.polygons.iter().any(|poly| poly.contains(p))
    }
}

/// Regions of one or more countries, in file order.
#[derive(Debug, Clone, Default)]
pub struct RegionTable {
    regions: Vec<Region>,
}

impl RegionTable {
    pub fn new(regions: Vec<Region>) -> Result<Self, IngestError> {
        let mut seen = HashSet::new();
        for r in &regions {
            if !(r.population >= 0.0 && r.population.is_finite()) {
                return Err(IngestError::InvalidRegion {
                    region_id: r.region_id.clone(),
                    reason: format!("population {} is not a non-negative count", r.population),
                });
            }
            if r.polygons.is_empty() {
                return Err(IngestError::InvalidRegion { region_id: r.region_id.clone(), reason: "no polygon".into() });
            }
            if !seen.insert((r.country_code.as_str(), r.region_id.as_str())) {
                return Err(IngestError::DuplicateRegion {
                    country: r.country_code.clone(),
                    region_id: r.region_id.clone(),
                });
            }
        }
        Ok(Self { regions })
    }

    pub fn from_geojson_reader<R: Read>(mut reader: R) -> Result<Self, IngestError> {
        let mut text = String::new();
        reader.read_to_string(&mut text)?;
        Self::from_geojson_str(&text)
    }

    /// Loads a FeatureCollection whose features carry `region_id`,
    /// `country_code` and `population` properties and Polygon or
    /// MultiPolygon geometries.
    pub fn from_geojson_str(text: &str) -> Result<Self, IngestError> {
        let doc: Value = serde_json::from_str(text).map_err(|e| IngestError::GeoJson(e.to_string()))?;
        if doc.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
            return Err(IngestError::GeoJson("top-level object is not a FeatureCollection".into()));
        }
        let features = doc
            .get("features")
            .and_then(Value::as_array)
            .ok_or_else(|| IngestError::GeoJson("missing `features` array".into()))?;
        let regions = features.iter().enumerate().map(|(i, f)| parse_feature(i, f)).collect::<Result<Vec<_>, _>>()?;
        Self::new(regions)
    }

    pub fn to_geojson(&self) -> String {
        let features: Vec<Value> = self
            .regions
            .iter()
            .map(|r| {
                let geometry = if r.polygons.len() == 1 {
                    json!({ "type": "Polygon", "coordinates": r.polygons[0].to_coordinates() })
                } else {
                    let polys: Vec<Value> = r.polygons.iter().map(Polygon::to_coordinates).collect();
                    json!({ "type": "MultiPolygon", "coordinates": polys })
                };
                let population = if r.population.fract() == 0.0 && r.population < 9.0e15 {
                    json!(r.population as u64)
                } else {
                    json!(r.population)
                };
                json!({
                    "type": "Feature",
                    "properties": {
                        "region_id": r.region_id,
                        "country_code": r.country_code,
                        "population": population,
                    },
                    "geometry": geometry,
                })
            })
            .collect();
        let doc = json!({ "type": "FeatureCollection", "features": features });
        serde_json::to_string_pretty(&doc).expect("GeoJSON serialization")
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn get(&self, index: usize) -> &Region {
        &self.regions[index]
    }

    /// Index of the first region (file order) containing `p`.
    pub fn assign_index(&self, p: GeoPoint) -> Option<usize> {
        self.regions.iter().position(|r| r.contains(p))
    }

    pub fn assign(&self, p: GeoPoint) -> Option<&Region> {
        self.assign_index(p).map(|i| &self.regions[i])
    }

    /// Distinct country codes, sorted.
    pub fn countries(&self) -> Vec<String> {
        let mut codes: Vec<String> = self.regions.iter().map(|r| r.country_code.clone()).collect();
        codes.sort();
        codes.dedup();
        codes
    }

    pub fn country_regions<'a>(&'a self, country: &'a str) -> impl Iterator<Item = &'a Region> + 'a {
        self.regions.iter().filter(move |r| r.country_code == country)
    }

    pub fn country_population(&self, country: &str) -> f64 {
        self.country_regions(country).map(|r| r.population).sum()
    }
}

/// Region id of the first region containing `point`, if any.
pub fn assign_region(point: GeoPoint, table: &RegionTable) -> Option<&str> {
    table.assign(point).map(|r| r.region_id.as_str())
}

fn parse_feature(index: usize, feature: &Value) -> Result<Region, IngestError> {
    let fail = |msg: String| IngestError::GeoJson(format!("feature {index}: {msg}"));
    let props =
        feature.get("properties").and_then(Value::as_object).ok_or_else(|| fail("missing properties".into()))?;
    let region_id = match props.get("region_id") {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        _ => return Err(fail("missing `region_id`".into())),
    };
    let country_code = props
        .get("country_code")
        .and_then(Value::as_str)
        .ok_or_else(|| fail("missing `country_code`".into()))?
        .to_owned();
    let population =
        props.get("population").and_then(Value::as_f64).ok_or_else(|| fail("missing numeric `population`".into()))?;

    let geometry = feature.get("geometry").ok_or_else(|| fail("missing geometry".into()))?;
    let coords = geometry.get("coordinates").ok_or_else(|| fail("missing coordinates".into()))?;
    let raw_polys = match geometry.get("type").and_then(Value::as_str) {
        Some("Polygon") => vec![coords],
        Some("MultiPolygon") => {
            coords.as_array().ok_or_else(|| fail("MultiPolygon coordinates are not an array".into()))?.iter().collect()
        }
        other => return Err(fail(format!("unsupported geometry type {other:?}"))),
    };
    let mut polygons = Vec::with_capacity(raw_polys.len());
    for raw in raw_polys {
        let rings = raw.as_array().ok_or_else(|| fail("polygon is not an array of rings".into()))?;
        let mut parsed = rings.iter().map(|ring| parse_ring(ring).map_err(&fail)).collect::<Result<Vec<_>, _>>()?;
        if parsed.is_empty() {
            return Err(fail("polygon has no rings".into()));
        }
        let exterior = parsed.remove(0);
        let poly = Polygon::new(exterior, parsed)
            .map_err(|reason| IngestError::InvalidRegion { region_id: region_id.clone(), reason })?;
        polygons.push(poly);
    }
    Ok(Region { region_id, country_code, population, polygons })
}

fn parse_ring(ring: &Value) -> Result<Ring, String> {
    ring.as_array()
        .ok_or("ring is not an array")?
        .iter()
        .map(|pos| {
            let pair = pos.as_array().filter(|a| a.len() >= 2).ok_or("position is not [lon, lat]")?;
            match (pair[0].as_f64(), pair[1].as_f64()) {
                (Some(x), Some(y)) => Ok((x, y)),
                _ => Err("position is not numeric".to_string()),
            }
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(id: &str, x0: f64, y0: f64, x1: f64, y1: f64) -> Region {
        Region {
            region_id: id.into(),
            country_code: "TST".into(),
            population: 100.0,
            polygons: vec![Polygon::rectangle(x0, y0, x1, y1).unwrap()],
        }
    }

    #[test]
    fn interior_and_exterior_points() {
        let table = RegionTable::new(vec![square("A", 0.0, 0.0, 1.0, 1.0)]).unwrap();
        assert_eq!(assign_region(GeoPoint::new(0.5, 0.5), &table), Some("A"));
        assert_eq!(assign_region(GeoPoint::new(2.0, 2.0), &table), None);
    }

    #[test]
    fn shared_edge_goes_to_first_region() {
        let table = RegionTable::new(vec![square("A", 0.0, 0.0, 1.0, 1.0), square("B", 1.0, 0.0, 2.0, 1.0)]).unwrap();
        assert_eq!(assign_region(GeoPoint::new(0.5, 1.0), &table), Some("A"));
        let flipped = RegionTable::new(vec![square("B", 1.0, 0.0, 2.0, 1.0), square("A", 0.0, 0.0, 1.0, 1.0)]).unwrap();
        assert_eq!(assign_region(GeoPoint::new(0.5, 1.0), &flipped), Some("B"));
    }

    #[test]
    fn vertices_are_inside() {
        let table = RegionTable::new(vec![square("A", 0.0, 0.0, 1.0, 1.0)]).unwrap();
        for (lat, lon) in [(0.0, 0.0), (0.0, 1.0), (1.0, 1.0), (1.0, 0.0), (0.0, 0.5)] {
            assert_eq!(assign_region(GeoPoint::new(lat, lon), &table), Some("A"), "({lat}, {lon})");
        }
    }

    #[test]
    fn holes_are_excluded() {
        let poly = Polygon::new(
            vec![(0.0, 0.0), (4.0, 0.0), (4.0, 4.0), (0.0, 4.0), (0.0, 0.0)],
            vec![vec![(1.0, 1.0), (1.0, 3.0), (3.0, 3.0), (3.0, 1.0)]],
        )
        .unwrap();
        assert!(!poly.contains(GeoPoint::new(2.0, 2.0)));
        assert!(poly.contains(GeoPoint::new(1.0, 2.0)));
        assert!(poly.contains(GeoPoint::new(0.5, 0.5)));
    }

    #[test]
    fn concave_polygon() {
        // An L shape.
        let poly =
            Polygon::new(vec![(0.0, 0.0), (2.0, 0.0), (2.0, 1.0), (1.0, 1.0), (1.0, 2.0), (0.0, 2.0)], vec![]).unwrap();
        assert!(poly.contains(GeoPoint::new(1.5, 0.5)));
        assert!(!poly.contains(GeoPoint::new(1.5, 1.5)));
    }

    #[test]
    fn invalid_polygons_are_rejected() {
        assert!(Polygon::new(vec![(0.0, 0.0), (1.0, 1.0)], vec![]).is_err());
        assert!(Polygon::new(vec![(0.0, 0.0), (1.0, 1.0), (0.0, 0.0)], vec![]).is_err());
        // Bow tie.
        let err = Polygon::new(vec![(0.0, 0.0), (1.0, 1.0), (1.0, 0.0), (0.0, 1.0)], vec![]).unwrap_err();
        assert!(err.contains("self-intersects"), "{err}");
        // Collinear spike folding back on itself.
        assert!(Polygon::new(vec![(0.0, 0.0), (2.0, 0.0), (1.0, 0.0), (1.0, 1.0)], vec![]).is_err());
    }

    #[test]
    fn geojson_round_trip() {
        let table = RegionTable::new(vec![square("A", 0.0, 0.0, 1.0, 1.0), square("B", 1.0, 0.0, 2.5, 1.0)]).unwrap();
        let text = table.to_geojson();
        let back = RegionTable::from_geojson_str(&text).unwrap();
        assert_eq!(back.regions(), table.regions());
        assert_eq!(back.country_population("TST"), 200.0);
        assert_eq!(back.countries(), vec!["TST".to_string()]);
    }

    #[test]
    fn geojson_errors() {
        let bad_ring = r#"{"type":"FeatureCollection","features":[{"type":"Feature",
            "properties":{"region_id":"A","country_code":"X","population":1},
            "geometry":{"type":"Polygon","coordinates":[[[0,0],[1,1],[1,0],[0,1],[0,0]]]}}]}"#;
        assert!(matches!(RegionTable::from_geojson_str(bad_ring), Err(IngestError::InvalidRegion { .. })));

        let dup = r#"{"type":"FeatureCollection","features":[
            {"type":"Feature","properties":{"region_id":"A","country_code":"X","population":1},
             "geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,0]]]}},
            {"type":"Feature","properties":{"region_id":"A","country_code":"X","population":1},
             "geometry":{"type":"Polygon","coordinates":[[[2,0],[3,0],[3,1],[2,0]]]}}]}"#;
        assert!(matches!(RegionTable::from_geojson_str(dup), Err(IngestError::DuplicateRegion { .. })));

        let no_pop = r#"{"type":"FeatureCollection","features":[{"type":"Feature",
            "properties":{"region_id":"A","country_code":"X"},
            "geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,0]]]}}]}"#;
        assert!(matches!(RegionTable::from_geojson_str(no_pop), Err(IngestError::GeoJson(_))));
    }

    #[test]
    fn multipolygon_regions() {
        let text = r#"{"type":"FeatureCollection","features":[{"type":"Feature",
            "properties":{"region_id":7,"country_code":"X","population":5},
            "geometry":{"type":"MultiPolygon","coordinates":[
                [[[0,0],[1,0],[1,1],[0,1],[0,0]]],
                [[[5,5],[6,5],[6,6],[5,6],[5,5]]]]}}]}"#;
        let table = RegionTable::from_geojson_str(text).unwrap();
        assert_eq!(assign_region(GeoPoint::new(5.5, 5.5), &table), Some("7"));
        assert_eq!(assign_region(GeoPoint::new(3.0, 3.0), &table), None);
    }
}
