//! High-level run orchestration behind the command-line interface.

use std::path::{Path, PathBuf};

use crate::config::{Preset, RunConfig};
use crate::energy::energy_quad;
use crate::error::{Error, Result};
use crate::fe::assemble_matrices;
use crate::flow::{run_flow, FlowSummary};
use crate::frames::discretize_initial;
use crate::mesh::Mesh;
use crate::output::{write_elements_csv, write_obj, write_snapshot_csv, EnergyTraceWriter};

/// Everything a `run` invocation leaves on disk, plus the in-memory summary.
pub struct RunArtifacts {
    pub out_dir: PathBuf,
    pub energies_csv: PathBuf,
    pub snapshots: Vec<usize>,
    pub summary: FlowSummary,
}

fn snapshot_paths(dir: &Path, k: usize) -> (PathBuf, PathBuf, PathBuf) {
    (
        dir.join(format!("snapshot_{k:06}.csv")),
        dir.join(format!("elements_{k:06}.csv")),
        dir.join(format!("ribbon_{k:06}.obj")),
    )
}

/// Execute one flow run and write the energy trace, parameter echo, and
/// frame snapshots (CSV + element profile + OBJ) into the output directory.
pub fn cmd_run(config: &RunConfig) -> Result<RunArtifacts> {
    let params = config.flow_params()?;
    let mesh = Mesh::uniform(config.preset.length(), config.n)?;
    let (curve, director) = config.preset.samplers();
    let (initial, bc) = discretize_initial(&curve, &director, &mesh)?;
    let matrices = assemble_matrices(&mesh);

    let out_dir = config.resolved_out_dir();
    std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;
    let snap_dir = out_dir.join("snapshots");
    std::fs::create_dir_all(&snap_dir).map_err(|e| Error::io(snap_dir.display().to_string(), e))?;

    let echo_path = out_dir.join("params.txt");
    std::fs::write(&echo_path, config.echo()?)
        .map_err(|e| Error::io(echo_path.display().to_string(), e))?;

    let planned = params.step_count();
    let snapshots = config.snapshot_indices(planned);

    let write_frame = |k: usize, state: &crate::frames::FrameState| -> Result<()> {
        let (snap, elems, obj) = snapshot_paths(&snap_dir, k);
        write_snapshot_csv(&snap, state)?;
        write_elements_csv(&elems, state)?;
        write_obj(&obj, state, config.w_vis)
    };
    write_frame(0, &initial)?;

    let energies_csv = out_dir.join("energies.csv");
    let mut trace = EnergyTraceWriter::create(&energies_csv)?;
    let mut sink_error: Option<Error> = None;
    let summary = run_flow(&initial, &bc, &params, &matrices, |report, state| {
        if sink_error.is_some() {
            return;
        }
        if let Err(e) = trace.write_step(report) {
            sink_error = Some(e);
            return;
        }
        if snapshots.binary_search(&report.k).is_ok() {
            if let Err(e) = write_frame(report.k, state) {
                sink_error = Some(e);
            }
        }
    })?;
    if let Some(e) = sink_error {
        return Err(e);
    }
    trace.finish()?;

    // when the run stops early the final state still gets its snapshot
    let final_k = summary.steps_completed;
    if snapshots.binary_search(&final_k).is_err() {
        write_frame(final_k, &summary.final_state)?;
    }
    let written: Vec<usize> = snapshots
        .iter()
        .copied()
        .filter(|&k| k <= final_k)
        .chain(if snapshots.binary_search(&final_k).is_err() {
            Some(final_k)
        } else {
            None
        })
        .collect();

    Ok(RunArtifacts {
        out_dir,
        energies_csv,
        snapshots: written,
        summary,
    })
}

/// One row of a mesh-refinement table.
pub struct TableRow {
    pub n: usize,
    pub steps: usize,
    pub final_energy: f64,
    pub echo: String,
}

pub struct TableResult {
    pub preset: Preset,
    pub rows: Vec<TableRow>,
}

/// Run the flow with the default schedule for each resolution and collect
/// the stationary energy values.
pub fn cmd_table(preset: Preset, resolutions: &[usize]) -> Result<TableResult> {
    if resolutions.is_empty() {
        return Err(Error::InvalidParameter(
            "table needs at least one resolution".into(),
        ));
    }
    let mut rows = Vec::with_capacity(resolutions.len());
    for &n in resolutions {
        let config = RunConfig::new(preset, n);
        let params = config.flow_params()?;
        let mesh = Mesh::uniform(preset.length(), n)?;
        let (curve, director) = preset.samplers();
        let (initial, bc) = discretize_initial(&curve, &director, &mesh)?;
        let matrices = assemble_matrices(&mesh);
        let summary = run_flow(&initial, &bc, &params, &matrices, |_, _| {})?;
        debug_assert_eq!(
            summary.final_energy.total,
            energy_quad(&summary.final_state, &params.reg).total
        );
        rows.push(TableRow {
            n,
            steps: summary.steps_completed,
            final_energy: summary.final_energy.total,
            echo: config.echo()?,
        });
    }
    Ok(TableResult { preset, rows })
}

impl TableResult {
    /// Table in the reference layout: one header row of resolutions, one row
    /// of stationary energy values, followed by the per-run parameter echo.
    pub fn render(&self) -> String {
        let mut header = String::from("N           ");
        let mut values = String::from("E_quad      ");
        for row in &self.rows {
            header.push_str(&format!("{:>12}", row.n));
            values.push_str(&format!("{:>12.4}", row.final_energy));
        }
        let mut s = format!("preset: {}\n{header}\n{values}\n", self.preset.name());
        for row in &self.rows {
            s.push_str(&format!("\n# N = {} ({} steps)\n", row.n, row.steps));
            for line in row.echo.lines() {
                s.push_str(&format!("#   {line}\n"));
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Preset;

    fn scratch_out(name: &str) -> PathBuf {
        let dir = std::env::temp_dir()
            .join("ribbonflow-driver-tests")
            .join(name);
        let _ = std::fs::remove_dir_all(&dir);
        dir
    }

    #[test]
    fn run_writes_expected_files() {
        let mut config = RunConfig::new(Preset::Moebius, 16);
        config.steps = Some(30);
        config.snapshot_stride = Some(10);
        config.out_dir = Some(scratch_out("run-files"));
        let artifacts = cmd_run(&config).unwrap();
        assert!(artifacts.energies_csv.is_file());
        assert!(artifacts.out_dir.join("params.txt").is_file());
        let trace = std::fs::read_to_string(&artifacts.energies_csv).unwrap();
        assert_eq!(trace.lines().count(), 1 + 30);
        for k in [0usize, 10, 20, 30] {
            assert!(artifacts
                .out_dir
                .join(format!("snapshots/snapshot_{k:06}.csv"))
                .is_file());
            assert!(artifacts
                .out_dir
                .join(format!("snapshots/elements_{k:06}.csv"))
                .is_file());
            assert!(artifacts
                .out_dir
                .join(format!("snapshots/ribbon_{k:06}.obj"))
                .is_file());
        }
        // final trace row energy equals the summary's final energy exactly
        let last = trace.lines().last().unwrap();
        let total: f64 = last.split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(total, artifacts.summary.final_energy.total);
    }

    #[test]
    fn reruns_are_byte_identical() {
        let make = |tag: &str| {
            let mut config = RunConfig::new(Preset::Helix, 12);
            config.steps = Some(15);
            config.out_dir = Some(scratch_out(tag));
            cmd_run(&config).unwrap()
        };
        let a = make("det-a");
        let b = make("det-b");
        let csv_a = std::fs::read(&a.energies_csv).unwrap();
        let csv_b = std::fs::read(&b.energies_csv).unwrap();
        assert_eq!(csv_a, csv_b);
        let obj_a = std::fs::read(a.out_dir.join("snapshots/ribbon_000015.obj")).unwrap();
        let obj_b = std::fs::read(b.out_dir.join("snapshots/ribbon_000015.obj")).unwrap();
        assert_eq!(obj_a, obj_b);
    }

    #[test]
    fn snapshot_directors_within_drift_band() {
        // |d|^2 = |y'|^2 |b|^2 - (y'.b)^2, so the director norm deviates from
        // one by at most the nodal drifts plus the squared nodal orthogonality
        // defect
        let mut config = RunConfig::new(Preset::Moebius, 16);
        config.steps = Some(30);
        config.out_dir = Some(scratch_out("director-band"));
        let artifacts = cmd_run(&config).unwrap();
        let state = &artifacts.summary.final_state;
        let (dy, db) = state.check_nodal_constraints();
        let mesh = state.mesh();
        let mut p1max: f64 = 0.0;
        for j in 0..mesh.node_count() {
            p1max = p1max
                .max(crate::vec3::dot(state.y.node_derivative(j), state.b.node_value(j)).powi(2));
        }
        let text = std::fs::read_to_string(artifacts.out_dir.join("snapshots/snapshot_000030.csv"))
            .unwrap();
        for line in text.lines().skip(1) {
            let cols: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
            let d = (cols[10] * cols[10] + cols[11] * cols[11] + cols[12] * cols[12]).sqrt();
            assert!(d >= 1.0 - dy - db - p1max - 1e-12, "|d| = {d}");
            assert!(d <= 1.0 + dy + db + 1e-12, "|d| = {d}");
        }
    }

    #[test]
    fn single_entry_table() {
        // tiny resolution so the default horizon stays cheap
        let result = cmd_table(Preset::Moebius, &[8]).unwrap();
        assert_eq!(result.rows.len(), 1);
        let text = result.render();
        assert!(text.contains("preset: moebius"));
        assert!(text.contains("E_quad"));
    }

    #[test]
    fn empty_table_rejected() {
        assert!(cmd_table(Preset::Helix, &[]).is_err());
    }
}
