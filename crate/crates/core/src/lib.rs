pub mod anstreicher;
pub mod certificate;
pub mod circulant;
pub mod eigen;
pub mod error;
pub mod instance;
pub mod matrix;
pub mod reduced;
pub mod sdp;
pub mod sigfig;
pub mod subtour;

pub use error::{Error, Result};
