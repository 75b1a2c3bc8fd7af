//! Passive planar spring-loaded hopper: flight and stance phases with event
//! detection, composed into a full apex-to-apex step.
//!
//! Flight is solved in closed form (ballistic), with events bracketed on a
//! fixed time grid and localized by bisection. Stance has no closed form and
//! is integrated with fixed-step RK4, again with bisected events. Only
//! `apex_step` increments the ODE-call counter, so flight-phase math stays
//! free in the accounting.

use crate::terrain::Terrain;
use serde::{Deserialize, Serialize};

/// Physical and numerical parameters of the hopper.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct HopperParams {
    /// Body mass, kg.
    pub mass: f64,
    /// Leg spring constant, N/m.
    pub spring_k: f64,
    /// Rest leg length, m.
    pub leg_len: f64,
    /// Bottom-out threshold: stance fails when the leg compresses below this.
    pub min_leg_len: f64,
    /// Gravitational acceleration, m/s^2.
    pub gravity: f64,
    /// Fixed integration / event-scan step, s.
    pub dt: f64,
    /// Event bisection tolerance, s.
    pub event_tol: f64,
}

impl Default for HopperParams {
    fn default() -> Self {
        HopperParams {
            mass: 7.0,
            spring_k: 3200.0,
            leg_len: 0.5,
            min_leg_len: 0.1,
            gravity: 9.81,
            dt: 0.01,
            event_tol: 1e-6,
        }
    }
}

impl HopperParams {
    pub fn validate(&self) -> Result<(), String> {
        let pos = [
            self.mass,
            self.spring_k,
            self.leg_len,
            self.min_leg_len,
            self.gravity,
            self.dt,
            self.event_tol,
        ];
        if pos.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err("all hopper parameters must be strictly positive".into());
        }
        if self.min_leg_len >= self.leg_len {
            return Err("min_leg_len must be below leg_len".into());
        }
        if self.dt <= self.event_tol {
            return Err("dt must exceed event_tol".into());
        }
        Ok(())
    }
}

/// Hopper state at the apex of flight. Vertical velocity is zero by
/// definition and is not stored.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApexState {
    /// Horizontal CoM position, m.
    pub x: f64,
    /// CoM height in the world frame, m.
    pub z: f64,
    /// Horizontal velocity, m/s.
    pub xdot: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Flight,
    Stance,
}

/// Full hybrid state: point-mass body, point foot, current mode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FullState {
    pub body_x: f64,
    pub body_z: f64,
    pub body_vx: f64,
    pub body_vz: f64,
    pub foot_x: f64,
    pub foot_z: f64,
    pub mode: Mode,
}

impl FullState {
    /// Current leg length.
    pub fn leg_len(&self) -> f64 {
        let dx = self.body_x - self.foot_x;
        let dz = self.body_z - self.foot_z;
        (dx * dx + dz * dz).sqrt()
    }
}

/// Everything that can go wrong during one hop.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FailureKind {
    /// Body point entered the terrain.
    BodyCollision,
    /// Swung foot hit a vertical terrain face.
    FootCollision,
    /// Leg left the friction cone during stance.
    FrictionViolation,
    /// Spring compressed below `min_leg_len`.
    BottomOut,
    /// Foot already at or below ground when the leg angle was set at apex.
    Trip,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub kind: FailureKind,
    /// Seconds since the start of the phase (or since apex for `apex_step`).
    pub at_time: f64,
}

/// Outcome of one apex-to-apex step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum StepOutcome {
    Success {
        next_apex: ApexState,
        /// Foot x position during the stance phase of this step.
        footstep_x: f64,
    },
    Failure {
        kind: FailureKind,
        at_time: f64,
    },
}

impl StepOutcome {
    pub fn is_success(&self) -> bool {
        matches!(self, StepOutcome::Success { .. })
    }
}

/// Flight-to-stance transition state.
#[derive(Clone, Copy, Debug)]
pub struct Touchdown {
    pub state: FullState,
    pub elapsed: f64,
}

/// Stance-to-flight transition state.
#[derive(Clone, Copy, Debug)]
pub struct Liftoff {
    pub state: FullState,
    pub elapsed: f64,
    /// Shortest leg length seen during the stance, for compression checks.
    pub min_leg_seen: f64,
}

/// Counts forward-model invocations for one planning query. Callers own one
/// counter per query; nothing global is touched.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OdeCalls(pub u64);

// A point moving ballistically: pos(t) = p0 + v0*t + (0, -g/2) t^2.
#[derive(Clone, Copy)]
struct Ballistic {
    x0: f64,
    z0: f64,
    vx: f64,
    vz0: f64,
    g: f64,
}

impl Ballistic {
    fn x(&self, t: f64) -> f64 {
        self.x0 + self.vx * t
    }
    fn z(&self, t: f64) -> f64 {
        self.z0 + self.vz0 * t - 0.5 * self.g * t * t
    }
}

enum ScanEvent {
    /// Point reached the ground surface of a segment.
    Ground { t: f64 },
    /// Point crossed a breakpoint below the far-side ground level.
    Face { t: f64 },
}

/// Walks a ballistic trajectory over `[0, t_end]` on the fixed `dt` grid and
/// returns the earliest terrain contact. Face crossing times are exact
/// (horizontal motion is linear in t); surface contacts are bisected to
/// `event_tol`. Assumes the point starts strictly above ground.
fn scan_ballistic(
    b: &Ballistic,
    t_end: f64,
    terrain: &Terrain,
    dt: f64,
    event_tol: f64,
) -> Option<ScanEvent> {
    let mut t_lo = 0.0;
    while t_lo < t_end {
        let t_hi = (t_lo + dt).min(t_end);
        // Sub-intervals split at breakpoint crossings so the ground height is
        // constant within each piece.
        let mut sub_lo = t_lo;
        let crossings = terrain.crossings(b.x(t_lo), b.x(t_hi));
        let mut boundaries: Vec<(f64, Option<f64>)> = crossings
            .into_iter()
            .map(|bx| ((bx - b.x0) / b.vx, Some(bx)))
            .collect();
        boundaries.push((t_hi, None));
        for (t_b, crossing_x) in boundaries {
            let t_b = t_b.clamp(sub_lo, t_hi);
            // Ground contact inside (sub_lo, t_b]: the segment is the one
            // under the midpoint, and z is monotone within one scan step on
            // the descending branch.
            let seg_h = terrain.height_at(b.x(0.5 * (sub_lo + t_b)));
            if b.z(t_b) <= seg_h {
                let mut lo = sub_lo;
                let mut hi = t_b;
                while hi - lo > event_tol {
                    let mid = 0.5 * (lo + hi);
                    if b.z(mid) > terrain.height_at(b.x(mid)) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                return Some(ScanEvent::Ground { t: hi });
            }
            if let Some(bx) = crossing_x {
                // Entering the far segment: below its ground level means the
                // vertical face was hit.
                let far_h = if b.vx > 0.0 {
                    terrain.height_at(bx)
                } else {
                    terrain.height_at(bx - 1e-12)
                };
                if b.z(t_b) < far_h {
                    return Some(ScanEvent::Face { t: t_b });
                }
            }
            sub_lo = t_b;
        }
        t_lo = t_hi;
    }
    None
}

/// Simulates the descent from an apex with the leg fixed at `leg_angle`
/// (measured from vertical, positive forward) until the foot contacts the
/// ground.
pub fn flight_phase(
    apex: &ApexState,
    leg_angle: f64,
    terrain: &Terrain,
    params: &HopperParams,
) -> Result<Touchdown, Failure> {
    let g = params.gravity;
    let l = params.leg_len;
    let foot_x0 = apex.x + l * leg_angle.sin();
    let foot_z0 = apex.z - l * leg_angle.cos();

    if apex.z <= terrain.height_at(apex.x) {
        return Err(Failure {
            kind: FailureKind::BodyCollision,
            at_time: 0.0,
        });
    }
    if foot_z0 <= terrain.height_at(foot_x0) {
        return Err(Failure {
            kind: FailureKind::Trip,
            at_time: 0.0,
        });
    }

    let foot = Ballistic {
        x0: foot_x0,
        z0: foot_z0,
        vx: apex.xdot,
        vz0: 0.0,
        g,
    };
    let body = Ballistic {
        x0: apex.x,
        z0: apex.z,
        vx: apex.xdot,
        vz0: 0.0,
        g,
    };

    // The foot must land somewhere: it starts above ground and the terrain
    // has a global minimum. Cap the scan generously past that fall time.
    let drop = (foot_z0 - terrain.min_height()).max(0.0);
    let t_cap = (2.0 * (drop + 1.0) / g).sqrt() + 1.0;

    let foot_event = scan_ballistic(&foot, t_cap, terrain, params.dt, params.event_tol)
        .expect("foot ballistic descent always reaches terrain");
    let foot_t = match foot_event {
        ScanEvent::Ground { t } | ScanEvent::Face { t } => t,
    };
    if let Some(ev) = scan_ballistic(&body, foot_t, terrain, params.dt, params.event_tol) {
        let t = match ev {
            ScanEvent::Ground { t } | ScanEvent::Face { t } => t,
        };
        if t < foot_t {
            return Err(Failure {
                kind: FailureKind::BodyCollision,
                at_time: t,
            });
        }
    }
    match foot_event {
        ScanEvent::Face { t } => Err(Failure {
            kind: FailureKind::FootCollision,
            at_time: t,
        }),
        ScanEvent::Ground { t } => Ok(Touchdown {
            state: FullState {
                body_x: body.x(t),
                body_z: body.z(t),
                body_vx: apex.xdot,
                body_vz: -g * t,
                foot_x: foot.x(t),
                foot_z: foot.z(t),
                mode: Mode::Stance,
            },
            elapsed: t,
        }),
    }
}

// Stance dynamics with the foot pinned: gravity plus the spring force
// k (L - l) along the leg, zero once the leg is at rest length.
fn stance_deriv(y: &[f64; 4], foot: (f64, f64), params: &HopperParams) -> [f64; 4] {
    let dx = y[0] - foot.0;
    let dz = y[1] - foot.1;
    let l = (dx * dx + dz * dz).sqrt().max(1e-12);
    let f = params.spring_k * (params.leg_len - l).max(0.0) / params.mass;
    [y[2], y[3], f * dx / l, f * dz / l - params.gravity]
}

fn rk4_step(y: &[f64; 4], h: f64, foot: (f64, f64), params: &HopperParams) -> [f64; 4] {
    let k1 = stance_deriv(y, foot, params);
    let add = |a: &[f64; 4], k: &[f64; 4], s: f64| {
        [a[0] + s * k[0], a[1] + s * k[1], a[2] + s * k[2], a[3] + s * k[3]]
    };
    let k2 = stance_deriv(&add(y, &k1, 0.5 * h), foot, params);
    let k3 = stance_deriv(&add(y, &k2, 0.5 * h), foot, params);
    let k4 = stance_deriv(&add(y, &k3, h), foot, params);
    [
        y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        y[2] + h / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
        y[3] + h / 6.0 * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3]),
    ]
}

fn leg_of(y: &[f64; 4], foot: (f64, f64)) -> f64 {
    let dx = y[0] - foot.0;
    let dz = y[1] - foot.1;
    (dx * dx + dz * dz).sqrt()
}

// Failure checks applied to every accepted stance state.
fn stance_checks(
    y: &[f64; 4],
    prev: Option<&[f64; 4]>,
    foot: (f64, f64),
    terrain: &Terrain,
    params: &HopperParams,
    t: f64,
) -> Result<(), Failure> {
    let dx = y[0] - foot.0;
    let dz = y[1] - foot.1;
    // Leg angle from the (vertical) ground normal; a leg at or past
    // horizontal has slipped long before.
    if dz <= 1e-9 || (dx / dz).abs() > terrain.mu {
        return Err(Failure {
            kind: FailureKind::FrictionViolation,
            at_time: t,
        });
    }
    if (dx * dx + dz * dz).sqrt() < params.min_leg_len {
        return Err(Failure {
            kind: FailureKind::BottomOut,
            at_time: t,
        });
    }
    if y[1] < terrain.height_at(y[0]) {
        return Err(Failure {
            kind: FailureKind::BodyCollision,
            at_time: t,
        });
    }
    if let Some(p) = prev {
        for bx in terrain.crossings(p[0], y[0]) {
            let frac = (bx - p[0]) / (y[0] - p[0]);
            let z_c = p[1] + frac * (y[1] - p[1]);
            let far_h = if y[0] > p[0] {
                terrain.height_at(bx)
            } else {
                terrain.height_at(bx - 1e-12)
            };
            if z_c < far_h {
                return Err(Failure {
                    kind: FailureKind::BodyCollision,
                    at_time: t,
                });
            }
        }
    }
    Ok(())
}

/// Integrates the stance phase from a touchdown until the leg returns to rest
/// length. Friction, bottom-out and body-collision failures are checked at
/// every accepted step; the liftoff event is bisected to `event_tol`.
pub fn stance_phase(
    td: &Touchdown,
    terrain: &Terrain,
    params: &HopperParams,
) -> Result<Liftoff, Failure> {
    let foot = (td.state.foot_x, td.state.foot_z);
    let mut y = [
        td.state.body_x,
        td.state.body_z,
        td.state.body_vx,
        td.state.body_vz,
    ];
    stance_checks(&y, None, foot, terrain, params, 0.0)?;

    // Grazing contact: leg already extending at touchdown means the spring
    // never engages and stance is instantaneous.
    let radial = ((y[0] - foot.0) * y[2] + (y[1] - foot.1) * y[3]) / leg_of(&y, foot);
    if radial >= 0.0 {
        return Ok(Liftoff {
            state: FullState {
                mode: Mode::Flight,
                ..td.state
            },
            elapsed: 0.0,
            min_leg_seen: leg_of(&y, foot),
        });
    }

    let mut t = 0.0;
    let mut min_leg_seen = leg_of(&y, foot);
    // A stance physically terminates: either the spring pushes the body back
    // out or a failure check fires on the way. The cap is a defensive bound.
    while t < 10.0 {
        let y_next = rk4_step(&y, params.dt, foot, params);
        if leg_of(&y_next, foot) >= params.leg_len {
            // Liftoff inside this step: bisect on the sub-step size.
            let mut lo = 0.0;
            let mut hi = params.dt;
            while hi - lo > params.event_tol {
                let mid = 0.5 * (lo + hi);
                if leg_of(&rk4_step(&y, mid, foot, params), foot) < params.leg_len {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let y_lift = rk4_step(&y, hi, foot, params);
            let t_lift = t + hi;
            stance_checks(&y_lift, Some(&y), foot, terrain, params, t_lift)?;
            min_leg_seen = min_leg_seen.min(leg_of(&y_lift, foot));
            return Ok(Liftoff {
                state: FullState {
                    body_x: y_lift[0],
                    body_z: y_lift[1],
                    body_vx: y_lift[2],
                    body_vz: y_lift[3],
                    foot_x: foot.0,
                    foot_z: foot.1,
                    mode: Mode::Flight,
                },
                elapsed: t_lift,
                min_leg_seen,
            });
        }
        t += params.dt;
        stance_checks(&y_next, Some(&y), foot, terrain, params, t)?;
        min_leg_seen = min_leg_seen.min(leg_of(&y_next, foot));
        y = y_next;
    }
    unreachable!("stance exceeded 10 s; the dynamics cannot sustain this");
}

/// One full apex-to-apex step: flight descent, stance, and the ballistic rise
/// to the next apex. Increments `ode` by one per invocation; this is the unit
/// the evaluation harness reports as "ODE calls".
pub fn apex_step(
    apex: &ApexState,
    leg_angle: f64,
    terrain: &Terrain,
    params: &HopperParams,
    ode: &mut OdeCalls,
) -> StepOutcome {
    ode.0 += 1;
    let td = match flight_phase(apex, leg_angle, terrain, params) {
        Ok(td) => td,
        Err(f) => {
            return StepOutcome::Failure {
                kind: f.kind,
                at_time: f.at_time,
            }
        }
    };
    let lift = match stance_phase(&td, terrain, params) {
        Ok(l) => l,
        Err(f) => {
            return StepOutcome::Failure {
                kind: f.kind,
                at_time: td.elapsed + f.at_time,
            }
        }
    };
    let footstep_x = td.state.foot_x;
    let elapsed = td.elapsed + lift.elapsed;
    let s = lift.state;

    let body = Ballistic {
        x0: s.body_x,
        z0: s.body_z,
        vx: s.body_vx,
        vz0: s.body_vz,
        g: params.gravity,
    };
    if s.body_vz > 0.0 {
        // Rising leg: scan for collisions up to the apex time.
        let t_apex = s.body_vz / params.gravity;
        if let Some(ev) = scan_ballistic(&body, t_apex, terrain, params.dt, params.event_tol) {
            let t = match ev {
                ScanEvent::Ground { t } | ScanEvent::Face { t } => t,
            };
            return StepOutcome::Failure {
                kind: FailureKind::BodyCollision,
                at_time: elapsed + t,
            };
        }
        let next_apex = ApexState {
            x: body.x(t_apex),
            z: body.z(t_apex),
            xdot: s.body_vx,
        };
        if next_apex.z <= terrain.height_at(next_apex.x) {
            return StepOutcome::Failure {
                kind: FailureKind::BodyCollision,
                at_time: elapsed + t_apex,
            };
        }
        StepOutcome::Success {
            next_apex,
            footstep_x,
        }
    } else {
        // Left the ground still descending; there is no next apex and the
        // body must come down on the terrain.
        let drop = (s.body_z - terrain.min_height()).max(0.0);
        let t_cap = s.body_vz.abs() / params.gravity + (2.0 * (drop + 1.0) / params.gravity).sqrt() + 1.0;
        let t = match scan_ballistic(&body, t_cap, terrain, params.dt, params.event_tol) {
            Some(ScanEvent::Ground { t }) | Some(ScanEvent::Face { t }) => t,
            None => t_cap,
        };
        StepOutcome::Failure {
            kind: FailureKind::BodyCollision,
            at_time: elapsed + t,
        }
    }
}

/// Kinetic plus gravitational plus (in stance) spring potential energy.
pub fn total_energy(state: &FullState, params: &HopperParams) -> f64 {
    let ke = 0.5 * params.mass * (state.body_vx * state.body_vx + state.body_vz * state.body_vz);
    let pe = params.mass * params.gravity * state.body_z;
    let spring = match state.mode {
        Mode::Stance => {
            let compression = (params.leg_len - state.leg_len()).max(0.0);
            0.5 * params.spring_k * compression * compression
        }
        Mode::Flight => 0.0,
    };
    ke + pe + spring
}

/// Energy of an apex state (no spring term, vertical velocity zero).
pub fn apex_energy(apex: &ApexState, params: &HopperParams) -> f64 {
    params.mass * params.gravity * apex.z + 0.5 * params.mass * apex.xdot * apex.xdot
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::terrain::TerrainKind;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn flat() -> Terrain {
        Terrain::flat(0.8)
    }

    #[test]
    fn fall_time_matches_closed_form() {
        let p = HopperParams::default();
        let apex = ApexState { x: 0.0, z: 0.8, xdot: 0.0 };
        let td = flight_phase(&apex, 0.0, &flat(), &p).unwrap();
        let expected = (2.0 * (0.8 - 0.5) / 9.81f64).sqrt();
        assert!((td.elapsed - expected).abs() < 1e-4, "got {}", td.elapsed);
        assert!((td.state.body_z - 0.5).abs() < 1e-4);
        assert!((td.state.foot_z - 0.0).abs() < 1e-4);
    }

    #[test]
    fn foot_at_ground_level_at_apex_trips() {
        let p = HopperParams::default();
        let apex = ApexState { x: 0.0, z: 0.5, xdot: 1.0 };
        let err = flight_phase(&apex, 0.0, &flat(), &p).unwrap_err();
        assert_eq!(err.kind, FailureKind::Trip);
        assert_eq!(err.at_time, 0.0);
    }

    #[test]
    fn wall_ahead_gives_foot_collision() {
        let p = HopperParams::default();
        let wall = Terrain {
            kind: TerrainKind::Steps,
            mu: 0.8,
            breakpoints: vec![(-5.0, 0.0), (0.3, 1.0)],
        };
        let apex = ApexState { x: 0.0, z: 0.8, xdot: 2.0 };
        let err = flight_phase(&apex, 0.3, &wall, &p).unwrap_err();
        assert_eq!(err.kind, FailureKind::FootCollision);

        // Brute-force oracle: sweep the foot parabola at a fine step and find
        // the first sample inside the terrain.
        let l = p.leg_len;
        let (fx0, fz0) = (0.3f64.sin() * l, 0.8 - 0.3f64.cos() * l);
        let mut oracle_t = None;
        let fine = 1e-6;
        let mut t = 0.0;
        while t < 1.0 {
            let x = fx0 + 2.0 * t;
            let z = fz0 - 0.5 * 9.81 * t * t;
            if z <= wall.height_at(x) {
                oracle_t = Some(t);
                break;
            }
            t += fine;
        }
        let oracle_t = oracle_t.expect("oracle finds the wall");
        assert!(
            (err.at_time - oracle_t).abs() < 1e-3,
            "event at {} vs oracle {}",
            err.at_time,
            oracle_t
        );
    }

    // Energy-balance oracle for the vertical bounce: 1/2 k d^2 = m g (h + d)
    // where h is the CoM drop from apex to touchdown.
    fn compression_oracle(p: &HopperParams, apex_z: f64) -> f64 {
        let h = apex_z - p.leg_len;
        let a = 0.5 * p.spring_k;
        let b = -p.mass * p.gravity;
        let c = -p.mass * p.gravity * h;
        (-b + (b * b - 4.0 * a * c).sqrt()) / (2.0 * a)
    }

    #[test]
    fn symmetric_bounce_compression_matches_energy_balance() {
        let p = HopperParams::default();
        let apex = ApexState { x: 0.0, z: 0.8, xdot: 0.0 };
        let td = flight_phase(&apex, 0.0, &flat(), &p).unwrap();
        let lift = stance_phase(&td, &flat(), &p).unwrap();
        let delta = compression_oracle(&p, 0.8);
        assert!((delta - 0.1369).abs() < 1e-3, "oracle sanity: {delta}");
        let measured = p.leg_len - lift.min_leg_seen;
        assert!(
            (measured - delta).abs() < 1e-3,
            "compression {measured} vs oracle {delta}"
        );
        // Liftoff mirrors touchdown.
        assert!((lift.state.body_vz - (-td.state.body_vz)).abs() < 1e-3);
        assert!((lift.state.body_vx).abs() < 1e-9);
    }

    #[test]
    fn raised_bottom_out_threshold_fails() {
        let p = HopperParams {
            min_leg_len: 0.40,
            ..HopperParams::default()
        };
        let delta = compression_oracle(&p, 0.8);
        assert!(p.leg_len - delta < 0.40);
        let apex = ApexState { x: 0.0, z: 0.8, xdot: 0.0 };
        let td = flight_phase(&apex, 0.0, &flat(), &p).unwrap();
        let err = stance_phase(&td, &flat(), &p).unwrap_err();
        assert_eq!(err.kind, FailureKind::BottomOut);
    }

    #[test]
    fn touchdown_outside_friction_cone_fails_at_contact() {
        let p = HopperParams::default();
        let icy = Terrain {
            mu: 0.3,
            ..Terrain::flat(0.3)
        };
        // tan(0.35) ~ 0.365 > 0.3.
        let apex = ApexState { x: 0.0, z: 0.8, xdot: 1.0 };
        let td = flight_phase(&apex, 0.35, &icy, &p).unwrap();
        let err = stance_phase(&td, &icy, &p).unwrap_err();
        assert_eq!(err.kind, FailureKind::FrictionViolation);
        assert_eq!(err.at_time, 0.0);
    }

    #[test]
    fn fast_vertical_leg_step_fails() {
        let p = HopperParams::default();
        let apex = ApexState { x: 0.0, z: 0.8, xdot: 4.0 };
        let mut ode = OdeCalls::default();
        match apex_step(&apex, 0.0, &flat(), &p, &mut ode) {
            StepOutcome::Failure { kind, .. } => {
                assert!(
                    matches!(kind, FailureKind::FrictionViolation | FailureKind::Trip),
                    "unexpected kind {kind:?}"
                );
            }
            StepOutcome::Success { .. } => panic!("expected a failure"),
        }
        assert_eq!(ode.0, 1);
    }

    #[test]
    fn symmetric_passive_bounce_returns_same_apex() {
        let p = HopperParams::default();
        let apex = ApexState { x: 0.0, z: 0.8, xdot: 0.0 };
        let mut ode = OdeCalls::default();
        match apex_step(&apex, 0.0, &flat(), &p, &mut ode) {
            StepOutcome::Success { next_apex, footstep_x } => {
                assert!((next_apex.z - 0.8).abs() <= 1e-3);
                assert!((next_apex.x).abs() <= 1e-6);
                assert!(footstep_x.abs() <= 1e-6);
            }
            StepOutcome::Failure { kind, .. } => panic!("failed: {kind:?}"),
        }
    }

    #[test]
    fn apex_energy_examples() {
        let p = HopperParams::default();
        let e0 = apex_energy(&ApexState { x: 0.0, z: 0.8, xdot: 0.0 }, &p);
        assert!((e0 - 54.936).abs() < 1e-9);
        let e2 = apex_energy(&ApexState { x: 0.0, z: 0.8, xdot: 2.0 }, &p);
        assert!((e2 - 68.936).abs() < 1e-9);
    }

    #[test]
    fn energy_conserved_through_stance() {
        let p = HopperParams::default();
        let apex = ApexState { x: 0.0, z: 0.8, xdot: 0.0 };
        let td = flight_phase(&apex, 0.0, &flat(), &p).unwrap();
        let e0 = apex_energy(&apex, &p);
        let e_td = total_energy(&td.state, &p);
        assert!((e_td - e0).abs() / e0 < 5e-3, "touchdown drift");
        let lift = stance_phase(&td, &flat(), &p).unwrap();
        let e_lift = total_energy(&lift.state, &p);
        assert!((e_lift - e0).abs() / e0 < 5e-3, "liftoff drift");
    }

    #[test]
    fn random_passive_steps_conserve_energy() {
        let p = HopperParams::default();
        let terrain = flat();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut ode = OdeCalls::default();
        let mut checked = 0;
        for _ in 0..200 {
            let apex = ApexState {
                x: 0.0,
                z: rng.gen_range(0.6..1.1),
                xdot: rng.gen_range(-2.5..2.5),
            };
            let theta = rng.gen_range(-0.6..0.6);
            if let StepOutcome::Success { next_apex, .. } =
                apex_step(&apex, theta, &terrain, &p, &mut ode)
            {
                let drift =
                    (apex_energy(&next_apex, &p) - apex_energy(&apex, &p)).abs() / apex_energy(&apex, &p);
                assert!(drift <= 5e-3, "drift {drift} at z {} xdot {}", apex.z, apex.xdot);
                checked += 1;
            }
        }
        assert!(checked > 50, "only {checked} successful random steps");
    }

    #[test]
    fn identical_inputs_are_bit_identical() {
        let p = HopperParams::default();
        let apex = ApexState { x: 0.3, z: 0.82, xdot: 1.7 };
        let mut ode = OdeCalls::default();
        let a = apex_step(&apex, 0.21, &flat(), &p, &mut ode);
        let b = apex_step(&apex, 0.21, &flat(), &p, &mut ode);
        assert_eq!(a, b);
        assert_eq!(ode.0, 2);
    }

    #[test]
    fn stance_success_never_dips_below_min_leg() {
        let p = HopperParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let apex = ApexState {
                x: 0.0,
                z: rng.gen_range(0.55..1.2),
                xdot: rng.gen_range(0.0..3.0),
            };
            let theta = rng.gen_range(-0.5..0.5);
            if let Ok(td) = flight_phase(&apex, theta, &flat(), &p) {
                if let Ok(lift) = stance_phase(&td, &flat(), &p) {
                    assert!(lift.min_leg_seen >= p.min_leg_len);
                }
            }
        }
    }

    #[test]
    fn halving_dt_at_least_halves_apex_error() {
        // Asymmetric hop so stance integration error is visible above the
        // event-localization floor.
        let reference = HopperParams {
            dt: 1e-4,
            ..HopperParams::default()
        };
        let apex = ApexState { x: 0.0, z: 0.9, xdot: 2.0 };
        let theta = 0.25;
        let apex_z = |p: &HopperParams| {
            let mut ode = OdeCalls::default();
            match apex_step(&apex, theta, &flat(), p, &mut ode) {
                StepOutcome::Success { next_apex, .. } => next_apex.z,
                StepOutcome::Failure { kind, .. } => panic!("failed: {kind:?}"),
            }
        };
        let z_ref = apex_z(&reference);
        let err = |dt: f64| {
            (apex_z(&HopperParams { dt, ..HopperParams::default() }) - z_ref).abs()
        };
        let e1 = err(0.01);
        let e2 = err(0.005);
        assert!(
            e2 <= 0.5 * e1 + 1e-9,
            "no first-order convergence: e(0.01)={e1:.3e} e(0.005)={e2:.3e}"
        );
    }
}
