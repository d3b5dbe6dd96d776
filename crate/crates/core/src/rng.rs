//! Named random substreams derived from one master seed.
//!
//! Every component draws from its own ChaCha stream so that, for example,
//! changing the exploration policy never perturbs parameter initialization.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Init,
    Env,
    Explore,
    Sample,
    Eval,
    /// Free-form substream index for analysis workloads.
    Indexed(u64),
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Init => 1,
            Stream::Env => 2,
            Stream::Explore => 3,
            Stream::Sample => 4,
            Stream::Eval => 5,
            Stream::Indexed(i) => 1_000 + i,
        }
    }
}

pub fn substream(master: u64, stream: Stream) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream.id());
    rng
}
