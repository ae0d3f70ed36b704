//! File outputs: energy traces (CSV), frame snapshots (CSV), per-element
//! curvature/torsion profiles (CSV), and ribbon geometry (Wavefront OBJ).
//!
//! All numbers are written with Rust's shortest round-trip float formatting,
//! so identical runs produce byte-identical files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::energy::element_profile;
use crate::error::{Error, Result};
use crate::flow::StepReport;
use crate::frames::FrameState;
use crate::vec3;

pub const ENERGY_HEADER: &str =
    "k,t,E_total,bend,twist,psi,penalty1,penalty2,E_bend,E_twist,dt_star,dt_dagger,drift_y,drift_b";

/// Streaming writer for the per-step energy trace.
pub struct EnergyTraceWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl EnergyTraceWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut out = BufWriter::new(file);
        writeln!(out, "{ENERGY_HEADER}").map_err(|e| Error::io(path.display().to_string(), e))?;
        Ok(EnergyTraceWriter {
            path: path.to_path_buf(),
            out,
        })
    }

    pub fn write_step(&mut self, r: &StepReport) -> Result<()> {
        let e = &r.energy;
        writeln!(
            self.out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.k,
            r.t,
            e.total,
            e.bend,
            e.twist,
            e.psi,
            e.penalty1,
            e.penalty2,
            e.pure_bend(),
            e.pure_twist(),
            r.dt_star,
            r.dt_dagger,
            r.drift_y,
            r.drift_b
        )
        .map_err(|e| Error::io(self.path.display().to_string(), e))
    }

    pub fn finish(mut self) -> Result<()> {
        self.out
            .flush()
            .map_err(|e| Error::io(self.path.display().to_string(), e))
    }
}

/// Nodal frame snapshot: arclength, position, tangent, director, and the
/// reconstructed normal d = y' x b per node.
pub fn write_snapshot_csv(path: &Path, state: &FrameState) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut out = BufWriter::new(file);
    let io_err = |e: std::io::Error| Error::io(path.display().to_string(), e);
    writeln!(out, "x,y1,y2,y3,dy1,dy2,dy3,b1,b2,b3,d1,d2,d3").map_err(io_err)?;
    let mesh = state.mesh();
    for j in 0..mesh.node_count() {
        let y = state.y.node_value(j);
        let dy = state.y.node_derivative(j);
        let b = state.b.node_value(j);
        let d = vec3::cross(dy, b);
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            mesh.node(j),
            y[0],
            y[1],
            y[2],
            dy[0],
            dy[1],
            dy[2],
            b[0],
            b[1],
            b[2],
            d[0],
            d[1],
            d[2]
        )
        .map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// Per-element curvature |A_h y''|, torsion |b'|, and the
/// torsion-dominates-curvature flag used for snapshot coloring.
pub fn write_elements_csv(path: &Path, state: &FrameState) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut out = BufWriter::new(file);
    let io_err = |e: std::io::Error| Error::io(path.display().to_string(), e);
    writeln!(
        out,
        "elem,x_left,x_right,curvature,torsion,torsion_dominant"
    )
    .map_err(io_err)?;
    let mesh = state.mesh();
    for e in 0..mesh.element_count() {
        let p = element_profile(state, e)?;
        writeln!(
            out,
            "{},{},{},{},{},{}",
            e,
            mesh.node(e),
            mesh.node(e + 1),
            p.curvature,
            p.torsion,
            u8::from(p.torsion_dominant)
        )
        .map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// Ribbon strip with artificial width: vertices y(x_j) +/- (w/2) b(x_j),
/// one quad per element split into two triangles.
pub fn write_obj(path: &Path, state: &FrameState, width: f64) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut out = BufWriter::new(file);
    let io_err = |e: std::io::Error| Error::io(path.display().to_string(), e);
    let mesh = state.mesh();
    let half = 0.5 * width;
    for j in 0..mesh.node_count() {
        let y = state.y.node_value(j);
        let b = state.b.node_value(j);
        let plus = vec3::axpy(y, half, b);
        let minus = vec3::axpy(y, -half, b);
        writeln!(out, "v {:.6} {:.6} {:.6}", plus[0], plus[1], plus[2]).map_err(io_err)?;
        writeln!(out, "v {:.6} {:.6} {:.6}", minus[0], minus[1], minus[2]).map_err(io_err)?;
    }
    for e in 0..mesh.element_count() {
        // 1-indexed: node j contributes vertices 2j+1 (plus side), 2j+2 (minus side)
        let (a, b, c, d) = (2 * e + 1, 2 * e + 2, 2 * e + 3, 2 * e + 4);
        writeln!(out, "f {a} {c} {b}").map_err(io_err)?;
        writeln!(out, "f {b} {c} {d}").map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}
