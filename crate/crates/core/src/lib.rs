pub mod codec;
pub mod imageio;
pub mod metrics;
pub mod nets;
pub mod tensor;
pub mod training;
