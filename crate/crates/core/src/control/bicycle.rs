use super::LateralState;

/// Kinematic bicycle referenced at the rear axle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinematicBicycle {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub v: f64,
    pub wheelbase: f64,
}

impl KinematicBicycle {
    pub fn from_front(front_x: f64, front_y: f64, heading: f64, v: f64, wheelbase: f64) -> Self {
        Self {
            x: front_x - wheelbase * heading.cos(),
            y: front_y - wheelbase * heading.sin(),
            heading,
            v,
            wheelbase,
        }
    }

    pub fn front(&self) -> LateralState {
        LateralState {
            x: self.x + self.wheelbase * self.heading.cos(),
            y: self.y + self.wheelbase * self.heading.sin(),
            heading: self.heading,
            v: self.v,
        }
    }

    /// Semi-implicit Euler step with steering angle `delta` and acceleration `a`.
    pub fn step(&mut self, delta: f64, a: f64, dt: f64) {
        self.v = (self.v + a * dt).max(0.0);
        self.heading += self.v * delta.tan() / self.wheelbase * dt;
        self.x += self.v * self.heading.cos() * dt;
        self.y += self.v * self.heading.sin() * dt;
    }
}
