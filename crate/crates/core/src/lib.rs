pub mod encoding;
pub mod expr;
pub mod kernels;
pub mod noise;
pub mod numerics;
pub mod ode_sim;
pub mod robust_map;
pub mod sphere;
pub mod tm;
pub mod verify;
