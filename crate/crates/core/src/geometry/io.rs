//! Line-oriented text format for curved meshes.
//!
//! ```text
//! # comment lines start with '#'
//! VERTICES <count>
//! <id> <x> <y>
//! CURVES <count>
//! <id> segment <x0> <y0> <x1> <y1>
//! <id> circle <cx> <cy> <radius> <t0> <t1> <sign>
//! <id> ellipse <cx> <cy> <a11> <a12> <a21> <a22> <t0> <t1>
//! FACES <count>
//! <id> <curve_id> <elem_left> <elem_right> <orient>
//! ELEMENTS <count>
//! <id> <region_tag> <face_id> <face_id> ...
//! ```
//!
//! Missing elements are written as `-1`. An element traverses a face forward
//! when it is the face's `elem_left`. Face end vertices are recovered by
//! matching the curve endpoints against the vertex list. Reals are written
//! with 17 significant digits, which round-trips every `f64` exactly.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::Matrix2;

use super::{Curve, Face, FaceRef, Mesh, Point};
use crate::error::{Error, Result};

fn real(x: f64) -> String {
    format!("{x:.16e}")
}

fn elem_id(e: Option<usize>) -> String {
    e.map_or_else(|| "-1".to_string(), |e| e.to_string())
}

pub fn mesh_to_string(mesh: &Mesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# curved-hho mesh");
    let _ = writeln!(s, "VERTICES {}", mesh.vertices.len());
    for (i, v) in mesh.vertices.iter().enumerate() {
        let _ = writeln!(s, "{i} {} {}", real(v.x), real(v.y));
    }
    let _ = writeln!(s, "CURVES {}", mesh.faces.len());
    for (i, f) in mesh.faces.iter().enumerate() {
        let params = match f.curve {
            Curve::Segment { a, b } => {
                format!("segment {} {} {} {}", real(a.x), real(a.y), real(b.x), real(b.y))
            }
            Curve::CircularArc {
                center,
                radius,
                t0,
                t1,
                sign,
            } => format!(
                "circle {} {} {} {} {} {}",
                real(center.x),
                real(center.y),
                real(radius),
                real(t0),
                real(t1),
                sign
            ),
            Curve::EllipseArc { center, axes, t0, t1 } => format!(
                "ellipse {} {} {} {} {} {} {} {}",
                real(center.x),
                real(center.y),
                real(axes[(0, 0)]),
                real(axes[(0, 1)]),
                real(axes[(1, 0)]),
                real(axes[(1, 1)]),
                real(t0),
                real(t1)
            ),
        };
        let _ = writeln!(s, "{i} {params}");
    }
    let _ = writeln!(s, "FACES {}", mesh.faces.len());
    for (i, f) in mesh.faces.iter().enumerate() {
        let _ = writeln!(
            s,
            "{i} {i} {} {} {}",
            elem_id(f.elem_left),
            elem_id(f.elem_right),
            f.orientation
        );
    }
    let _ = writeln!(s, "ELEMENTS {}", mesh.elements.len());
    for (i, e) in mesh.elements.iter().enumerate() {
        let ids: Vec<String> = e.faces.iter().map(|r| r.face.to_string()).collect();
        let _ = writeln!(s, "{i} {} {}", e.region, ids.join(" "));
    }
    s
}

pub fn write_mesh(mesh: &Mesh, path: &Path) -> Result<()> {
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(mesh_to_string(mesh).as_bytes())
        .map_err(|e| Error::io(path, e))
}

pub fn read_mesh(path: &Path) -> Result<Mesh> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let lines: Vec<String> = std::io::BufReader::new(file)
        .lines()
        .collect::<std::io::Result<_>>()
        .map_err(|e| Error::io(path, e))?;
    parse_mesh(&lines.join("\n"))
}

struct Lines<'a> {
    inner: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next_tokens(&mut self) -> Option<(usize, Vec<&'a str>)> {
        for (no, line) in self.inner.by_ref() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            self.last = no + 1;
            return Some((no + 1, line.split_whitespace().collect()));
        }
        None
    }

    fn section(&mut self, name: &str) -> Result<usize> {
        let (line, toks) = self.next_tokens().ok_or(Error::Parse {
            line: self.last,
            detail: format!("missing {name} section"),
        })?;
        if toks.len() != 2 || toks[0] != name {
            return Err(Error::Parse {
                line,
                detail: format!("expected '{name} <count>'"),
            });
        }
        parse(line, toks[1])
    }

    fn record(&mut self, expected_id: usize, min_len: usize) -> Result<(usize, Vec<&'a str>)> {
        let (line, toks) = self.next_tokens().ok_or(Error::Parse {
            line: self.last,
            detail: "unexpected end of file".into(),
        })?;
        if toks.len() < min_len {
            return Err(Error::Parse {
                line,
                detail: format!("expected at least {min_len} fields"),
            });
        }
        let id: usize = parse(line, toks[0])?;
        if id != expected_id {
            return Err(Error::Parse {
                line,
                detail: format!("expected id {expected_id}, found {id}"),
            });
        }
        Ok((line, toks))
    }
}

fn parse<T: std::str::FromStr>(line: usize, tok: &str) -> Result<T> {
    tok.parse().map_err(|_| Error::Parse {
        line,
        detail: format!("cannot parse '{tok}'"),
    })
}

fn parse_elem(line: usize, tok: &str) -> Result<Option<usize>> {
    let v: i64 = parse(line, tok)?;
    Ok(usize::try_from(v).ok())
}

pub fn parse_mesh(text: &str) -> Result<Mesh> {
    let mut lines = Lines {
        inner: text.lines().enumerate().peekable(),
        last: 0,
    };

    let nv = lines.section("VERTICES")?;
    let mut vertices = Vec::with_capacity(nv);
    for i in 0..nv {
        let (line, t) = lines.record(i, 3)?;
        vertices.push(Point::new(parse(line, t[1])?, parse(line, t[2])?));
    }

    let nc = lines.section("CURVES")?;
    let mut curves = Vec::with_capacity(nc);
    for i in 0..nc {
        let (line, t) = lines.record(i, 2)?;
        let nums: Vec<f64> = t[2..].iter().map(|s| parse(line, s)).collect::<Result<_>>()?;
        let need = |n: usize| -> Result<()> {
            if nums.len() == n {
                Ok(())
            } else {
                Err(Error::Parse {
                    line,
                    detail: format!("{} curve expects {n} parameters", t[1]),
                })
            }
        };
        let c = match t[1] {
            "segment" => {
                need(4)?;
                Curve::segment(Point::new(nums[0], nums[1]), Point::new(nums[2], nums[3]))
            }
            "circle" => {
                need(6)?;
                Curve::CircularArc {
                    center: Point::new(nums[0], nums[1]),
                    radius: nums[2],
                    t0: nums[3],
                    t1: nums[4],
                    sign: nums[5],
                }
            }
            "ellipse" => {
                need(8)?;
                Curve::EllipseArc {
                    center: Point::new(nums[0], nums[1]),
                    axes: Matrix2::new(nums[2], nums[3], nums[4], nums[5]),
                    t0: nums[6],
                    t1: nums[7],
                }
            }
            other => {
                return Err(Error::Parse {
                    line,
                    detail: format!("unknown curve type '{other}'"),
                })
            }
        };
        curves.push(c);
    }

    let scale = vertices.iter().map(|v| v.amax()).fold(1.0f64, f64::max);
    let match_vertex = |p: Point, line: usize| -> Result<usize> {
        vertices
            .iter()
            .enumerate()
            .map(|(i, v)| (i, (v - p).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .filter(|(_, d)| *d <= 1e-9 * scale)
            .map(|(i, _)| i)
            .ok_or(Error::Parse {
                line,
                detail: format!("curve endpoint ({}, {}) matches no vertex", p.x, p.y),
            })
    };

    let nf = lines.section("FACES")?;
    let mut faces = Vec::with_capacity(nf);
    for i in 0..nf {
        let (line, t) = lines.record(i, 5)?;
        let cid: usize = parse(line, t[1])?;
        let curve = curves.get(cid).cloned().ok_or(Error::Parse {
            line,
            detail: format!("unknown curve {cid}"),
        })?;
        let v0 = match_vertex(curve.start(), line)?;
        let v1 = match_vertex(curve.end(), line)?;
        faces.push(Face {
            curve,
            vertices: [v0, v1],
            elem_left: parse_elem(line, t[2])?,
            elem_right: parse_elem(line, t[3])?,
            orientation: parse(line, t[4])?,
        });
    }

    let ne = lines.section("ELEMENTS")?;
    let mut loops = Vec::with_capacity(ne);
    for i in 0..ne {
        let (line, t) = lines.record(i, 3)?;
        let region: u32 = parse(line, t[1])?;
        let refs = t[2..]
            .iter()
            .map(|s| {
                let f: usize = parse(line, s)?;
                let forward = faces.get(f).is_none_or(|face| face.elem_left == Some(i));
                Ok(FaceRef::new(f, forward))
            })
            .collect::<Result<Vec<_>>>()?;
        loops.push((refs, region));
    }
    Mesh::new(vertices, faces, loops)
}
