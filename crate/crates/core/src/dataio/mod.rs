//! Telemetry ingestion, cleaning, partitioning and feature preprocessing.

mod features;
mod preprocess;
mod telemetry;

pub use features::{split, FeatureMatrix, FlowChannel, FEATURE_COLUMNS};
pub use preprocess::{PolyExpansion, Scaler};
pub use telemetry::{
    clean, load_telemetry, read_telemetry, read_telemetry_file, write_telemetry,
    write_telemetry_file, Cleaned, Loaded, RawRecord, RawTelemetry, Reject, TelemetryRecord,
    COL_FLOWRATE, COL_INLET_FLOWRATE, COL_INLET_PRESSURE, COL_INLET_TEMP, COL_OUTLET_PRESSURE,
    COL_OUTLET_TEMP, COL_REFERENCE, REQUIRED_COLUMNS,
};
