//! The simulated planar world skills act on.

use ticktree::Pose;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArmState {
    Home,
    Pregrasp,
}

#[derive(Debug, Clone)]
pub struct SimWorld {
    pub robot: Pose,
    pub object: Pose,
    pub counter: Pose,
    pub hand_open: bool,
    pub holding: bool,
    pub arm: ArmState,
    /// When false the navigation server reports that no path exists.
    pub nav_ok: bool,
}

impl SimWorld {
    /// Desk-scale fetch scenario: the robot at the origin, the object in a
    /// customer's hand two meters ahead, the counter two meters to the side.
    pub fn fetch_default() -> SimWorld {
        SimWorld {
            robot: Pose::new(0.0, 0.0, 0.0).unwrap(),
            object: Pose::new(2.0, 0.0, 0.0).unwrap(),
            counter: Pose::new(0.0, 2.0, std::f64::consts::FRAC_PI_2).unwrap(),
            hand_open: true,
            holding: false,
            arm: ArmState::Home,
            nav_ok: true,
        }
    }

    /// holding implies a closed hand.
    pub fn consistent(&self) -> bool {
        !self.holding || !self.hand_open
    }

    /// Moves the base one step toward `target`, carrying a held object.
    pub fn step_toward(&mut self, target: Pose, step: f64) {
        let dx = target.x - self.robot.x;
        let dy = target.y - self.robot.y;
        let dist = (dx * dx + dy * dy).sqrt();
        if dist <= f64::EPSILON {
            self.robot = Pose::new(self.robot.x, self.robot.y, target.theta).unwrap();
        } else {
            let travel = step.min(dist);
            self.robot = Pose::new(
                self.robot.x + dx / dist * travel,
                self.robot.y + dy / dist * travel,
                dy.atan2(dx),
            )
            .unwrap();
        }
        if self.holding {
            self.object = self.robot;
        }
    }

    /// Drops whatever is held at the robot's current position (scenario
    /// fault injection).
    pub fn drop_object(&mut self) {
        self.holding = false;
        self.hand_open = true;
        self.object = self.robot;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_toward_converges_and_carries_object() {
        let mut world = SimWorld::fetch_default();
        world.hand_open = false;
        world.holding = true;
        let target = world.counter;
        for _ in 0..32 {
            world.step_toward(target, 0.25);
        }
        assert!(world.robot.distance_to(&target) < 1e-9);
        assert!(world.object.distance_to(&world.robot) < 1e-9);
        assert!(world.consistent());
    }

    #[test]
    fn drop_restores_consistency() {
        let mut world = SimWorld::fetch_default();
        world.hand_open = false;
        world.holding = true;
        world.drop_object();
        assert!(world.consistent());
        assert!(!world.holding);
    }
}
