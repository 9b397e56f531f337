pub mod alloc;
pub mod amount;
pub mod ids;
pub mod isolation;
pub mod mano;
pub mod resource;
pub mod sdn;
pub mod sim;
pub mod trace;
pub mod scenario;
