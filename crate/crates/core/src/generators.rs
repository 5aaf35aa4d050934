//! Instance families: the adversarial synthetic graphs and the taxi-trip
//! interval construction.
//!
//! Synthetic generators are deterministic in their parameters. All randomness
//! lives in the realization of arrivals and in the strategies, except for the
//! taxi construction, which samples its car locations.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, NaiveDateTime, TimeDelta};
use rand::Rng;

use crate::error::{Error, Result};
use crate::instance::{RngStream, StochasticInstance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    /// Diagonal plus two complete off-diagonal blocks.
    Block,
    /// Type `i` sees resources `i..n`.
    Triangular,
    /// Hidden perfect matching obscured by two complete blocks.
    Bahmani,
    /// Disjoint 6-cycles with two dense side blocks.
    Tsm,
    /// Every type sees every resource.
    Complete,
    /// Type `j` sees only resource `j`.
    Exclusive,
}

impl Family {
    /// The four adversarial benchmark families.
    pub const BENCHMARKS: [Family; 4] = [
        Family::Block,
        Family::Triangular,
        Family::Bahmani,
        Family::Tsm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Block => "block",
            Family::Triangular => "triangular",
            Family::Bahmani => "bahmani",
            Family::Tsm => "tsm",
            Family::Complete => "complete",
            Family::Exclusive => "exclusive",
        }
    }

    /// Builds the benchmark with `n` vertices on each side. For `bahmani`
    /// that means blocks of `n - s` and `s = round(n / (e + 1))`.
    pub fn generate(self, n: usize) -> Result<StochasticInstance> {
        match self {
            Family::Block => gen_partitioned_block(n),
            Family::Triangular => gen_kvv_triangular(n),
            Family::Bahmani => {
                let small = (n as f64 / (std::f64::consts::E + 1.0) + 0.5).floor() as usize;
                gen_bahmani_blocks(n.saturating_sub(small), small)
            }
            Family::Tsm => gen_tsm_tight(n),
            Family::Complete => gen_complete_uniform(n),
            Family::Exclusive => gen_exclusive_pairs(n),
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "block" | "partitioned" => Ok(Family::Block),
            "triangular" | "kvv" => Ok(Family::Triangular),
            "bahmani" => Ok(Family::Bahmani),
            "tsm" => Ok(Family::Tsm),
            "complete" => Ok(Family::Complete),
            "exclusive" => Ok(Family::Exclusive),
            other => Err(Error::Config(format!("unknown family `{other}`"))),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn labels(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

fn uniform_types(compat: Vec<Vec<usize>>) -> Vec<(f64, Vec<usize>)> {
    let p = 1.0 / compat.len() as f64;
    compat.into_iter().map(|c| (p, c)).collect()
}

/// Rows `R_1, R_2, R_3` and columns `C_1, C_2, C_3` of sizes `0.3n, 0.4n, 0.3n`.
/// Columns arrive (types), rows are resources. Edges: the diagonal,
/// `R_1 × C_2` and `R_2 × C_3`.
pub fn gen_partitioned_block(n: usize) -> Result<StochasticInstance> {
    if n == 0 || !n.is_multiple_of(10) {
        return Err(Error::BadSize {
            family: "block",
            n,
            reason: "n must be a positive multiple of 10",
        });
    }
    let (b1, b2) = (3 * n / 10, 4 * n / 10);
    let r1 = 0..b1;
    let r2 = b1..b1 + b2;
    let compat = (0..n)
        .map(|col| {
            let mut c = vec![col];
            if r2.contains(&col) {
                c.extend(r1.clone());
            } else if col >= b1 + b2 {
                c.extend(r2.clone());
            }
            c
        })
        .collect();
    StochasticInstance::new(labels("r", n), uniform_types(compat), n)
}

pub fn gen_kvv_triangular(n: usize) -> Result<StochasticInstance> {
    if n == 0 {
        return Err(Error::BadSize {
            family: "triangular",
            n,
            reason: "n must be positive",
        });
    }
    let compat = (0..n).map(|i| (i..n).collect()).collect();
    StochasticInstance::new(labels("r", n), uniform_types(compat), n)
}

/// `round(n / e)`, halves rounded up.
pub fn bahmani_small_side(n: usize) -> usize {
    (n as f64 / std::f64::consts::E + 0.5).floor() as usize
}

/// Resources `A_1` (size `round(n/e)`) then `A_2` (size `n`); types `I_1`
/// (size `n`) then `I_2` (size `round(n/e)`). `I_1[i]` sees `A_2[i]` and all
/// of `A_1`; every `I_2` type sees all of `A_2`. One arrival per type.
pub fn gen_bahmani(n: usize) -> Result<StochasticInstance> {
    gen_bahmani_blocks(n, bahmani_small_side(n))
}

/// Same layout with explicit block sizes `|A_2| = |I_1| = n` and
/// `|A_1| = |I_2| = small`.
pub fn gen_bahmani_blocks(n: usize, small: usize) -> Result<StochasticInstance> {
    if n < 3 || small == 0 {
        return Err(Error::BadSize {
            family: "bahmani",
            n: n + small,
            reason: "blocks too small",
        });
    }
    let a1: Vec<usize> = (0..small).collect();
    let a2: Vec<usize> = (small..small + n).collect();
    let mut compat: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let mut c = a1.clone();
            c.push(a2[i]);
            c
        })
        .collect();
    compat.extend((0..small).map(|_| a2.clone()));

    let mut resources = labels("a1_", small);
    resources.extend(labels("a2_", n));
    StochasticInstance::new(resources, uniform_types(compat), n + small)
}

/// `n/4` disjoint cycles `u–x–v–y–w–z–u` with online `u, v, w` and offline
/// `x, y, z`, plus `n/4` online types `K` complete to every `x` and `n/4`
/// offline nodes `L` complete to every `w`. Both sides have `n` vertices and
/// `n` requests arrive.
pub fn gen_tsm_tight(n: usize) -> Result<StochasticInstance> {
    if n == 0 || !n.is_multiple_of(4) {
        return Err(Error::BadSize {
            family: "tsm",
            n,
            reason: "n must be a positive multiple of 4",
        });
    }
    let cycles = n / 4;
    let x = |i: usize| 3 * i;
    let y = |i: usize| 3 * i + 1;
    let z = |i: usize| 3 * i + 2;
    let l_block: Vec<usize> = (3 * cycles..4 * cycles).collect();

    let mut compat = Vec::with_capacity(n);
    for i in 0..cycles {
        compat.push(vec![x(i), z(i)]); // u_i
        compat.push(vec![x(i), y(i)]); // v_i
        let mut w = vec![y(i), z(i)];
        w.extend(&l_block);
        compat.push(w);
    }
    compat.extend((0..cycles).map(|_| (0..cycles).map(x).collect()));

    let mut resources = Vec::with_capacity(n);
    for i in 0..cycles {
        resources.extend([format!("x{i}"), format!("y{i}"), format!("z{i}")]);
    }
    resources.extend(labels("l", cycles));
    StochasticInstance::new(resources, uniform_types(compat), n)
}

/// `n` resources, `n` uniform types each compatible with everything.
pub fn gen_complete_uniform(n: usize) -> Result<StochasticInstance> {
    if n == 0 {
        return Err(Error::BadSize {
            family: "complete",
            n,
            reason: "n must be positive",
        });
    }
    let compat = (0..n).map(|_| (0..n).collect()).collect();
    StochasticInstance::new(labels("r", n), uniform_types(compat), n)
}

/// `n` resources, `n` uniform types, type `j` compatible only with `j`.
pub fn gen_exclusive_pairs(n: usize) -> Result<StochasticInstance> {
    if n == 0 {
        return Err(Error::BadSize {
            family: "exclusive",
            n,
            reason: "n must be positive",
        });
    }
    let compat = (0..n).map(|j| vec![j]).collect();
    StochasticInstance::new(labels("r", n), uniform_types(compat), n)
}

pub type ZoneId = u32;

/// Taxi zones and their symmetric adjacency. A zone is always compatible
/// with itself.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ZoneModel {
    zones: BTreeSet<ZoneId>,
    adjacency: HashSet<(ZoneId, ZoneId)>,
}

impl ZoneModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_zone(&mut self, z: ZoneId) {
        self.zones.insert(z);
    }

    pub fn add_adjacency(&mut self, a: ZoneId, b: ZoneId) {
        self.zones.insert(a);
        self.zones.insert(b);
        if a != b {
            self.adjacency.insert((a, b));
            self.adjacency.insert((b, a));
        }
    }

    pub fn contains(&self, z: ZoneId) -> bool {
        self.zones.contains(&z)
    }

    pub fn zones(&self) -> impl Iterator<Item = ZoneId> + '_ {
        self.zones.iter().copied()
    }

    /// Same zone or sharing a boundary.
    pub fn compatible(&self, a: ZoneId, b: ZoneId) -> bool {
        a == b || self.adjacency.contains(&(a, b))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TripRecord {
    pub pickup_time: NaiveDateTime,
    pub dropoff_time: NaiveDateTime,
    pub pickup_zone: ZoneId,
    pub dropoff_zone: ZoneId,
}

#[derive(Debug, Clone)]
pub struct TripData {
    pub trips: Vec<TripRecord>,
    pub zones: ZoneModel,
    /// Rows skipped for unknown zones or unparseable fields.
    pub dropped: usize,
}

const TRIP_COLUMNS: [&str; 4] = [
    "tpep_pickup_datetime",
    "tpep_dropoff_datetime",
    "PULocationID",
    "DOLocationID",
];

/// Accepts `YYYY-MM-DD HH:MM:SS`, the ISO `T` separator, or RFC 3339 (whose
/// offset is discarded in favour of the wall-clock time).
pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S")
        .or_else(|_| NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S"))
        .ok()
        .or_else(|| {
            DateTime::parse_from_rfc3339(s)
                .ok()
                .map(|d| d.naive_local())
        })
}

/// Reads a zone adjacency CSV (`zone_a,zone_b` per row, optional header) and
/// a TLC-schema trip CSV. Trip rows with unknown zones or bad fields are
/// dropped and counted.
pub fn ingest_trips(path: &Path, zone_path: &Path) -> Result<TripData> {
    let zones = read_zones(zone_path)?;

    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let mut columns = [0usize; 4];
    for (slot, name) in columns.iter_mut().zip(TRIP_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Format {
                path: path.to_path_buf(),
                reason: format!("missing column `{name}`"),
            })?;
    }

    let mut trips = Vec::new();
    let mut dropped = 0;
    for row in reader.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let field = |c: usize| row.get(columns[c]).unwrap_or("");
        let parsed = (|| {
            Some(TripRecord {
                pickup_time: parse_timestamp(field(0))?,
                dropoff_time: parse_timestamp(field(1))?,
                pickup_zone: field(2).parse().ok()?,
                dropoff_zone: field(3).parse().ok()?,
            })
        })();
        match parsed {
            Some(t) if zones.contains(t.pickup_zone) && zones.contains(t.dropoff_zone) => {
                trips.push(t)
            }
            _ => dropped += 1,
        }
    }
    if dropped > 0 {
        log::warn!("{}: dropped {dropped} trip rows", path.display());
    }
    Ok(TripData {
        trips,
        zones,
        dropped,
    })
}

fn read_zones(path: &Path) -> Result<ZoneModel> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut zones = ZoneModel::new();
    for (line, row) in reader.records().enumerate() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let ids: std::result::Result<Vec<ZoneId>, _> = row
            .iter()
            .filter(|f| !f.is_empty())
            .map(str::parse)
            .collect();
        match ids.as_deref() {
            Ok([a]) => zones.add_zone(*a),
            Ok([a, b]) => zones.add_adjacency(*a, *b),
            Ok([]) => {}
            _ if line == 0 => {} // header
            _ => {
                return Err(Error::Format {
                    path: path.to_path_buf(),
                    reason: format!("line {}: expected `zone_a,zone_b`", line + 1),
                })
            }
        }
    }
    Ok(zones)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        }
    } else {
        Error::Format {
            path: path.to_path_buf(),
            reason: e.to_string(),
        }
    }
}

/// One simulation interval of the taxi market.
#[derive(Debug, Clone)]
pub struct NycInterval {
    pub time: NaiveDateTime,
    /// Rider types are pick-up zones with positive demand.
    pub instance: StochasticInstance,
    pub rider_zones: Vec<ZoneId>,
    /// Zone of each sampled car, aligned with the instance resources.
    pub car_zones: Vec<ZoneId>,
}

pub const HALF_WINDOW_MINUTES: i64 = 5;

/// Builds the market at time `t`: cars are sampled from drop-offs in
/// `[t - 5m, t)`, riders from pick-ups in `[t, t + 5m)`. The size `n` is the
/// number of drop-offs; `n` cars are drawn with replacement from the drop-off
/// zone distribution, and the rider types carry the pick-up zone distribution
/// with `n` arrivals. A rider and a car are compatible when their zones are
/// equal or adjacent. Rider zones with no compatible car are kept as
/// unservable types.
pub fn build_nyc_instance(
    trips: &[TripRecord],
    zones: &ZoneModel,
    t: NaiveDateTime,
    stream: &RngStream,
) -> Result<NycInterval> {
    let half = TimeDelta::minutes(HALF_WINDOW_MINUTES);
    let mut drops: BTreeMap<ZoneId, usize> = BTreeMap::new();
    let mut picks: BTreeMap<ZoneId, usize> = BTreeMap::new();
    for trip in trips {
        if trip.dropoff_time >= t - half && trip.dropoff_time < t {
            *drops.entry(trip.dropoff_zone).or_default() += 1;
        }
        if trip.pickup_time >= t && trip.pickup_time < t + half {
            *picks.entry(trip.pickup_zone).or_default() += 1;
        }
    }
    let n: usize = drops.values().sum();
    let riders_seen: usize = picks.values().sum();
    if n == 0 || riders_seen == 0 {
        return Err(Error::EmptyWindow(format!(
            "{t}: {n} drop-offs, {riders_seen} pick-ups"
        )));
    }

    let drop_zones: Vec<(ZoneId, usize)> = drops.into_iter().collect();
    let mut rng = stream.rng();
    let car_zones: Vec<ZoneId> = (0..n)
        .map(|_| {
            let mut u = rng.random_range(0..n);
            for &(z, c) in &drop_zones {
                if u < c {
                    return z;
                }
                u -= c;
            }
            unreachable!("counts sum to n")
        })
        .collect();

    let rider_zones: Vec<ZoneId> = picks.keys().copied().collect();
    let types = picks
        .iter()
        .map(|(&rz, &count)| {
            let compat = car_zones
                .iter()
                .enumerate()
                .filter(|(_, &cz)| zones.compatible(cz, rz))
                .map(|(i, _)| i)
                .collect();
            (count as f64 / riders_seen as f64, compat)
        })
        .collect();
    let resources = car_zones
        .iter()
        .enumerate()
        .map(|(i, z)| format!("car{i}@{z}"))
        .collect();
    let instance = StochasticInstance::with_isolated_types(resources, types, n)?;
    Ok(NycInterval {
        time: t,
        instance,
        rider_zones,
        car_zones,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn block_edge_count() {
        let inst = gen_partitioned_block(10).unwrap();
        assert_eq!(inst.edge_count(), 10 + 3 * 4 + 4 * 3);
        assert!(inst.types().iter().all(|t| t.degree() >= 1));
        assert!(matches!(
            gen_partitioned_block(15),
            Err(Error::BadSize { .. })
        ));
    }

    #[test]
    fn closed_form_edge_counts() {
        for n in [20, 100] {
            let b1 = 3 * n / 10;
            let b2 = 4 * n / 10;
            let b3 = n - b1 - b2;
            assert_eq!(
                gen_partitioned_block(n).unwrap().edge_count(),
                n + b1 * b2 + b2 * b3
            );
        }
        for n in [1, 3, 20, 100] {
            assert_eq!(gen_kvv_triangular(n).unwrap().edge_count(), n * (n + 1) / 2);
        }
        for n in [3, 10, 20, 100] {
            let s = bahmani_small_side(n);
            assert_eq!(gen_bahmani(n).unwrap().edge_count(), n + s * n + n * s);
        }
        for n in [4, 20, 100] {
            let c = n / 4;
            assert_eq!(gen_tsm_tight(n).unwrap().edge_count(), 6 * c + 2 * c * c);
        }
    }

    #[test]
    fn triangular_last_type_degree_one() {
        let inst = gen_kvv_triangular(7).unwrap();
        assert_eq!(inst.demand_type(6).compatible, vec![6]);
    }

    #[test]
    fn bahmani_per_side_sizing() {
        let inst = Family::Bahmani.generate(100).unwrap();
        assert_eq!(inst.resource_count(), 100);
        assert_eq!(inst.types().len(), 100);
        assert_eq!(inst.arrivals(), 100);
        assert_eq!(inst, gen_bahmani_blocks(73, 27).unwrap());
        assert!(Family::Bahmani.generate(3).is_err());
    }

    #[test]
    fn bahmani_sizes() {
        assert_eq!(bahmani_small_side(10), 4);
        assert_eq!(bahmani_small_side(100), 37);
        let inst = gen_bahmani(10).unwrap();
        assert_eq!(inst.resource_count(), 14);
        assert_eq!(inst.types().len(), 14);
        assert_eq!(inst.arrivals(), 14);
        assert_eq!(inst.edge_count(), 90);
        for j in 0..10 {
            assert_eq!(inst.demand_type(j).degree(), 1 + 4);
        }
    }

    #[test]
    fn tsm_minimum_size() {
        let inst = gen_tsm_tight(4).unwrap();
        assert_eq!(inst.resource_count(), 4);
        assert_eq!(inst.types().len(), 4);
        assert_eq!(inst.edge_count(), 6 + 1 + 1);
        assert_eq!(inst.arrivals(), 4);
        assert_eq!(inst.demand_type(2).compatible, vec![1, 2, 3]);
        assert!(matches!(gen_tsm_tight(6), Err(Error::BadSize { .. })));
    }

    #[test]
    fn generators_are_deterministic() {
        for f in Family::BENCHMARKS {
            assert_eq!(f.generate(20).unwrap(), f.generate(20).unwrap());
        }
    }

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        let mut f = std::fs::File::create(&p).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        p
    }

    const HEADER: &str =
        "VendorID,tpep_pickup_datetime,tpep_dropoff_datetime,PULocationID,DOLocationID\n";

    #[test]
    fn ingest_well_formed_and_unknown_zone() {
        let dir = tempfile::tempdir().unwrap();
        let zones = write(dir.path(), "z.csv", "zone_a,zone_b\n1,2\n2,3\n");
        let trips = write(
            dir.path(),
            "t.csv",
            &format!(
                "{HEADER}1,2025-05-14 08:00:00,2025-05-14 08:10:00,1,2\n\
                 1,2025-05-14 08:01:00,2025-05-14 08:11:00,2,3\n\
                 1,2025-05-14 08:02:00,2025-05-14 08:12:00,3,1\n"
            ),
        );
        let data = ingest_trips(&trips, &zones).unwrap();
        assert_eq!(data.trips.len(), 3);
        assert_eq!(data.dropped, 0);

        let bad = write(
            dir.path(),
            "b.csv",
            &format!("{HEADER}1,2025-05-14 08:00:00,2025-05-14 08:10:00,1,99\n1,2025-05-14 08:00:00,2025-05-14 08:10:00,1,2\n"),
        );
        let data = ingest_trips(&bad, &zones).unwrap();
        assert_eq!(data.trips.len(), 1);
        assert_eq!(data.dropped, 1);
    }

    #[test]
    fn ingest_header_only_then_empty_window() {
        let dir = tempfile::tempdir().unwrap();
        let zones = write(dir.path(), "z.csv", "1,2\n");
        let trips = write(dir.path(), "t.csv", HEADER);
        let data = ingest_trips(&trips, &zones).unwrap();
        assert!(data.trips.is_empty());
        let t = parse_timestamp("2025-05-14 08:00:00").unwrap();
        assert!(matches!(
            build_nyc_instance(&data.trips, &data.zones, t, &RngStream::new(0, 0)),
            Err(Error::EmptyWindow(_))
        ));
    }

    #[test]
    fn ingest_rejects_missing_columns() {
        let dir = tempfile::tempdir().unwrap();
        let zones = write(dir.path(), "z.csv", "1,2\n");
        let trips = write(dir.path(), "t.csv", "a,b,c\n1,2,3\n");
        assert!(matches!(
            ingest_trips(&trips, &zones),
            Err(Error::Format { .. })
        ));
        assert!(matches!(
            ingest_trips(&dir.path().join("missing.csv"), &zones),
            Err(Error::Io { .. })
        ));
    }

    fn trip(pick: &str, drop: &str, pz: ZoneId, dz: ZoneId) -> TripRecord {
        TripRecord {
            pickup_time: parse_timestamp(pick).unwrap(),
            dropoff_time: parse_timestamp(drop).unwrap(),
            pickup_zone: pz,
            dropoff_zone: dz,
        }
    }

    #[test]
    fn nyc_single_pair() {
        let mut zones = ZoneModel::new();
        zones.add_zone(5);
        let trips = [
            trip("2025-05-14 07:40:00", "2025-05-14 07:57:00", 4, 5),
            trip("2025-05-14 08:02:00", "2025-05-14 08:30:00", 5, 6),
        ];
        let t = parse_timestamp("2025-05-14T08:00:00Z").unwrap();
        let iv = build_nyc_instance(&trips, &zones, t, &RngStream::new(0, 0)).unwrap();
        assert_eq!(iv.instance.arrivals(), 1);
        assert_eq!(iv.instance.resource_count(), 1);
        assert_eq!(iv.instance.edge_count(), 1);
    }

    #[test]
    fn nyc_isolated_rider_zone() {
        let mut zones = ZoneModel::new();
        zones.add_adjacency(1, 2);
        zones.add_zone(9);
        let trips = [
            trip("2025-05-14 07:40:00", "2025-05-14 07:58:00", 3, 1),
            trip("2025-05-14 08:01:00", "2025-05-14 08:20:00", 9, 2),
        ];
        let t = parse_timestamp("2025-05-14 08:00:00").unwrap();
        let iv = build_nyc_instance(&trips, &zones, t, &RngStream::new(0, 0)).unwrap();
        assert_eq!(iv.rider_zones, vec![9]);
        assert_eq!(iv.instance.demand_type(0).degree(), 0);
    }

    #[test]
    fn nyc_balanced_sides() {
        let mut zones = ZoneModel::new();
        zones.add_adjacency(1, 2);
        let trips: Vec<TripRecord> = (0..6)
            .map(|i| {
                trip(
                    &format!("2025-05-14 08:0{i}:00"),
                    &format!("2025-05-14 07:5{}:00", 5 + i % 5),
                    1 + (i % 2) as ZoneId,
                    2 - (i % 2) as ZoneId,
                )
            })
            .collect();
        let t = parse_timestamp("2025-05-14 08:00:00").unwrap();
        let iv = build_nyc_instance(&trips, &zones, t, &RngStream::new(1, 0)).unwrap();
        assert_eq!(iv.instance.arrivals(), iv.instance.resource_count());
        assert_eq!(iv.car_zones.len(), 6);
    }
}
