pub mod design;
pub mod phases;
pub mod simulate;
pub mod sweep;
pub mod verify;
