//! Run artifacts.
//!
//! | file             | contents                                                         |
//! |------------------|------------------------------------------------------------------|
//! | `trajectory.csv` | one row per policy step, columns [`TRAJECTORY_COLUMNS`]          |
//! | `paths.csv`      | `t,true_x,true_y,est_x,est_y` for plotting                       |
//! | `test_ratio.csv` | `t,test_ratio,accepted`                                          |
//! | `gps.log`        | every delivered GPS message, `seq,t,lat,lon,alt,h_acc`           |
//! | `summary.json`   | verdict and run statistics                                       |
//!
//! Floats are written with fixed precision, so identical records give
//! byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write as _};
use std::path::Path;

use super::{HarnessError, RunOutcome, TrajectoryRecord};
use crate::gps::write_log;

pub const TRAJECTORY_COLUMNS: [&str; 22] = [
    "step",
    "t",
    "true_x",
    "true_y",
    "true_yaw",
    "est_x",
    "est_y",
    "nav_x",
    "nav_y",
    "gps_lat",
    "gps_lon",
    "spoof_dx",
    "spoof_dy",
    "test_ratio",
    "accepted",
    "health",
    "d_rel",
    "yaw_rel",
    "speed_cmd",
    "yaw_rate_cmd",
    "min_obstacle_dist",
    "attack_event",
];

pub fn trajectory_header() -> String {
    TRAJECTORY_COLUMNS.join(",")
}

pub fn trajectory_row(r: &TrajectoryRecord) -> String {
    format!(
        "{},{:.3},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.9},{:.9},{:.6},{:.6},{:.6},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{}",
        r.step,
        r.t,
        r.true_pos.x,
        r.true_pos.y,
        r.true_yaw,
        r.est_pos.x,
        r.est_pos.y,
        r.nav_pos.x,
        r.nav_pos.y,
        r.gps.lat_deg,
        r.gps.lon_deg,
        r.spoof_offset.x,
        r.spoof_offset.y,
        r.test_ratio,
        u8::from(r.accepted),
        r.health.label(),
        r.d_rel,
        r.yaw_rel,
        r.action.speed_cmd,
        r.action.yaw_rate_cmd,
        r.min_obstacle_dist,
        r.attack_event.label(),
    )
}

pub fn trajectory_csv(records: &[TrajectoryRecord]) -> String {
    let mut s = trajectory_header();
    s.push('\n');
    for r in records {
        s.push_str(&trajectory_row(r));
        s.push('\n');
    }
    s
}

pub fn paths_csv(records: &[TrajectoryRecord]) -> String {
    let mut s = String::from("t,true_x,true_y,est_x,est_y\n");
    for r in records {
        writeln!(s, "{:.3},{:.6},{:.6},{:.6},{:.6}", r.t, r.true_pos.x, r.true_pos.y, r.est_pos.x, r.est_pos.y).unwrap();
    }
    s
}

pub fn test_ratio_csv(records: &[TrajectoryRecord]) -> String {
    let mut s = String::from("t,test_ratio,accepted\n");
    for r in records {
        writeln!(s, "{:.3},{:.6},{}", r.t, r.test_ratio, u8::from(r.accepted)).unwrap();
    }
    s
}

/// Writes the trajectory table and the two series files.
pub fn export_records(records: &[TrajectoryRecord], out_dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join("trajectory.csv"), trajectory_csv(records))?;
    fs::write(out_dir.join("paths.csv"), paths_csv(records))?;
    fs::write(out_dir.join("test_ratio.csv"), test_ratio_csv(records))?;
    Ok(())
}

/// Writes every artifact of a run.
pub fn export_run(run: &RunOutcome, out_dir: &Path) -> Result<(), HarnessError> {
    export_records(&run.records, out_dir)?;
    let f = fs::File::create(out_dir.join("gps.log"))?;
    let mut w = BufWriter::new(f);
    write_log(&mut w, &run.gps_log)?;
    w.flush()?;
    let json = serde_json::to_string_pretty(&run.summary()).expect("summary serializes");
    fs::write(out_dir.join("summary.json"), json + "\n")?;
    Ok(())
}
