//! ASCII map export: a header line followed by one `x y z state obs` line
//! per voxel. States are `U`, `F`, `O` (occupied, unseen) and `S` (seen).

use std::io::{BufRead, Write};

use super::{MapError, Occupancy, VoxelMap};
use crate::geometry::{Aabb, Vec3};

const HEADER: &str = "# voxel-map";

/// Writes the map. Unknown voxels are implied by absence unless
/// `include_unknown` is set.
pub fn write_map<W: Write>(map: &VoxelMap, mut out: W, include_unknown: bool) -> std::io::Result<()> {
    let b = map.bounds();
    writeln!(
        out,
        "{HEADER} resolution {} min {} {} {} max {} {} {}",
        map.resolution(),
        b.min.x,
        b.min.y,
        b.min.z,
        b.max.x,
        b.max.y,
        b.max.z
    )?;
    for idx in 0..map.len() {
        let state = map.state(idx);
        let tag = match state.occupancy {
            Occupancy::Unknown if !include_unknown => continue,
            Occupancy::Unknown => 'U',
            Occupancy::Free => 'F',
            Occupancy::Occupied if state.seen_by_camera => 'S',
            Occupancy::Occupied => 'O',
        };
        let c = map.center(idx);
        match state.observation_distance {
            Some(d) => writeln!(out, "{:.4} {:.4} {:.4} {tag} {:.4}", c.x, c.y, c.z, d)?,
            None => writeln!(out, "{:.4} {:.4} {:.4} {tag} -", c.x, c.y, c.z)?,
        }
    }
    Ok(())
}

pub fn read_map<R: BufRead>(input: R) -> Result<VoxelMap, MapError> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or(MapError::Parse {
            line: 1,
            message: "empty input".into(),
        })??;
    let mut map = parse_header(&header)?;
    for (n, line) in lines.enumerate() {
        let line_no = n + 2;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: &str| MapError::Parse {
            line: line_no,
            message: message.to_string(),
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(err("expected `x y z state obs_distance`"));
        }
        let mut p = Vec3::zeros();
        for a in 0..3 {
            p[a] = fields[a].parse().map_err(|_| err("bad coordinate"))?;
        }
        let idx = map.index_of(&p).ok_or_else(|| err("voxel outside header bounds"))?;
        let (state, seen) = match fields[3] {
            "U" => (Occupancy::Unknown, false),
            "F" => (Occupancy::Free, false),
            "O" => (Occupancy::Occupied, false),
            "S" => (Occupancy::Occupied, true),
            _ => return Err(err("state must be one of U F O S")),
        };
        map.set_occupancy_raw(idx, state);
        if seen {
            let d: f64 = fields[4].parse().map_err(|_| err("bad observation distance"))?;
            if !(d > 0.0) {
                return Err(err("observation distance must be positive"));
            }
            map.observe(idx, d);
        } else if fields[4] != "-" {
            return Err(err("only seen voxels carry an observation distance"));
        }
    }
    map.recompute_esdf();
    Ok(map)
}

fn parse_header(line: &str) -> Result<VoxelMap, MapError> {
    let err = |message: &str| MapError::Parse {
        line: 1,
        message: message.to_string(),
    };
    let rest = line
        .strip_prefix(HEADER)
        .ok_or_else(|| err("missing `# voxel-map` header"))?;
    let f: Vec<&str> = rest.split_whitespace().collect();
    if f.len() != 10 || f[0] != "resolution" || f[2] != "min" || f[6] != "max" {
        return Err(err("header must read `resolution r min x y z max x y z`"));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|_| err("bad number in header"));
    let r = num(f[1])?;
    let min = Vec3::new(num(f[3])?, num(f[4])?, num(f[5])?);
    let max = Vec3::new(num(f[7])?, num(f[8])?, num(f[9])?);
    VoxelMap::new(Aabb::new(min, max), r)
}

pub fn export_map(map: &VoxelMap, path: &std::path::Path) -> Result<(), MapError> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_map(map, &mut w, false)?;
    w.flush()?;
    Ok(())
}

pub fn import_map(path: &std::path::Path) -> Result<VoxelMap, MapError> {
    let file = std::fs::File::open(path)?;
    read_map(std::io::BufReader::new(file))
}
