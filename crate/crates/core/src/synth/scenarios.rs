//! Built-in scenes.

use crate::synth::scene::{Primitive, PrimitiveClass, PrimitiveKind, SceneSpec, SensorModel};

/// Stall centers along the two parking rows.
pub const STALL_ROWS: [f64; 2] = [7.5, -7.5];
pub const STALLS_PER_ROW: usize = 10;
pub const CAR_SIZE: [f64; 3] = [1.9, 4.5, 1.5];
/// The wall that appears at session 3 and stays.
pub const NEW_WALL_CENTER: [f64; 3] = [17.0, 0.0, 1.5];
pub const NEW_WALL_SIZE: [f64; 3] = [0.3, 6.0, 3.0];

/// Occupancy runs: (row, stall, sessions the car is parked there).
pub const CAR_SCHEDULE: [(usize, usize, &[usize]); 11] = [
    (0, 0, &[1, 2]),
    (0, 3, &[1]),
    (1, 1, &[1]),
    (0, 5, &[2, 3]),
    (1, 4, &[2, 3]),
    (0, 7, &[3]),
    (1, 6, &[2]),
    (1, 8, &[3, 4]),
    (0, 9, &[4]),
    (0, 2, &[5, 6]),
    (1, 2, &[6]),
];

pub fn stall_center(row: usize, stall: usize) -> [f64; 3] {
    let x = -13.5 + 3.0 * stall as f64;
    [x, STALL_ROWS[row], CAR_SIZE[2] / 2.0]
}

fn static_structure(spec: &mut SceneSpec) {
    let [x0, y0, x1, y1] = spec.bounds;
    let (w, h) = (x1 - x0, y1 - y0);
    let (cx, cy) = ((x0 + x1) / 2.0, (y0 + y1) / 2.0);
    let wall = |name: &str, center: [f64; 3], size: [f64; 3]| {
        Primitive::new(name, PrimitiveKind::Box, PrimitiveClass::Static, center, size)
    };
    spec.primitives.push(Primitive::new(
        "ground",
        PrimitiveKind::Plane,
        PrimitiveClass::Static,
        [cx, cy, 0.0],
        [w, h, 0.0],
    ));
    spec.primitives.push(wall("wall_north", [cx, y1, 1.5], [w + 0.3, 0.3, 3.0]));
    spec.primitives.push(wall("wall_south", [cx, y0, 1.5], [w + 0.3, 0.3, 3.0]));
    spec.primitives.push(wall("wall_east", [x1, cy, 1.5], [0.3, h + 0.3, 3.0]));
    spec.primitives.push(wall("wall_west", [x0, cy, 1.5], [0.3, h + 0.3, 3.0]));
    // Irregular pillar spacing and a ticket booth keep the lot free of mirror symmetry.
    for (i, x) in [-12.0, -4.0, 4.0, 12.0].into_iter().enumerate() {
        spec.primitives.push(wall(&format!("pillar_n{i}"), [x, 4.0, 1.5], [0.6, 0.6, 3.0]));
    }
    for (i, x) in [-9.0, 1.0, 7.0].into_iter().enumerate() {
        spec.primitives.push(wall(&format!("pillar_s{i}"), [x, -4.0, 1.5], [0.6, 0.6, 3.0]));
    }
    spec.primitives.push(wall("booth", [x0 + 2.5, y1 - 2.0, 1.25], [2.0, 2.0, 2.5]));
}

/// Six sessions in a walled lot: cars hop between stalls, a wall appears at
/// session 3, and pedestrians cross the lane in a few scans of every session.
pub fn parking_lot_scenario() -> SceneSpec {
    let mut spec = SceneSpec {
        seed: 7,
        sessions: 6,
        scans_per_session: 12,
        scan_interval: 1.0,
        sensor: SensorModel::default(),
        drift_per_scan: 0.002,
        drift_yaw_per_scan: 0.0,
        session_jitter: 0.3,
        session_jitter_yaw: 3.0,
        trajectory: vec![[-14.0, 0.0], [14.0, 0.0]],
        bounds: [-20.0, -12.0, 20.0, 12.0],
        primitives: Vec::new(),
    };
    static_structure(&mut spec);
    spec.primitives.push(
        Primitive::new("new_wall", PrimitiveKind::Box, PrimitiveClass::Static, NEW_WALL_CENTER, NEW_WALL_SIZE)
            .in_sessions(&[3, 4, 5, 6]),
    );
    for (row, stall, sessions) in CAR_SCHEDULE {
        spec.primitives.push(
            Primitive::new(
                &format!("car_{row}_{stall}"),
                PrimitiveKind::Box,
                PrimitiveClass::Transient,
                stall_center(row, stall),
                CAR_SIZE,
            )
            .in_sessions(sessions),
        );
    }
    for t in 1..=spec.sessions {
        let shift = (t % 3) as f64;
        let first = 1 + t % 4;
        spec.primitives.push(
            Primitive::new(
                &format!("pedestrian_a_{t}"),
                PrimitiveKind::Box,
                PrimitiveClass::Dynamic,
                [-9.0 + 2.0 * shift, 2.2, 0.9],
                [0.5, 0.5, 1.8],
            )
            .in_sessions(&[t])
            .moving([1.3, 0.2, 0.0], (first, first + 2)),
        );
        let first = 6 + t % 3;
        spec.primitives.push(
            Primitive::new(
                &format!("pedestrian_b_{t}"),
                PrimitiveKind::Box,
                PrimitiveClass::Dynamic,
                [9.0 - 2.0 * shift, -2.4, 0.9],
                [0.5, 0.5, 1.8],
            )
            .in_sessions(&[t])
            .moving([-1.1, -0.3, 0.0], (first, first + 2)),
        );
    }
    spec
}

/// Two sessions of a static lot with parked cars along a 60-scan loop; the
/// second session carries 0.01 m of drift per scan.
pub fn alignment_scenario() -> SceneSpec {
    let mut spec = SceneSpec {
        seed: 11,
        sessions: 2,
        scans_per_session: 60,
        scan_interval: 1.0,
        sensor: SensorModel::default(),
        drift_per_scan: 0.01,
        drift_yaw_per_scan: 0.0,
        session_jitter: 0.3,
        session_jitter_yaw: 3.0,
        trajectory: vec![[-14.0, -1.5], [14.0, -1.5], [14.0, 1.5], [-14.0, 1.5]],
        bounds: [-20.0, -12.0, 20.0, 12.0],
        primitives: Vec::new(),
    };
    static_structure(&mut spec);
    for (row, stall) in [(0, 1), (0, 4), (0, 8), (1, 2), (1, 6), (1, 9)] {
        spec.primitives.push(Primitive::new(
            &format!("car_{row}_{stall}"),
            PrimitiveKind::Box,
            PrimitiveClass::Static,
            stall_center(row, stall),
            CAR_SIZE,
        ));
    }
    spec
}
