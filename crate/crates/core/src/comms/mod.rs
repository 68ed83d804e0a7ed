//! Serial frame protocol: codec, stream integrity analysis and a seeded
//! fault-injecting emulator.

mod analyzer;
mod emulator;
mod frame;

pub use analyzer::{
    analyze_stream, AnalyzeOptions, SequenceGap, StreamAnalyzer, StreamIntegrityReport,
};
pub use emulator::{
    emulate, BurstDrop, EmittedFrame, EmulatedStream, Emulator, EmulatorConfig, FaultKind,
    FaultLedger, FaultPlan, InjectedFault, SignalSource,
};
pub use frame::{xor_checksum, Frame, FrameError, FRAME_CHANNELS, FRAME_LEN, SYNC};
