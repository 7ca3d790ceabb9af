pub mod entangler;
pub mod inputs;
pub mod qce;
pub mod stqm;
