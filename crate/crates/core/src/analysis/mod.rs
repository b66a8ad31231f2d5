//! Diagnostics: per-band SNR of the forward process, temporal consistency,
//! low-frequency mixing and FreeInit ablation sweeps.

mod ablation;
mod bands;
mod consistency;
mod mixing;
mod snr;

pub use ablation::{
    ablation_run, iteration_consistency, mean_std, worker_pool, write_rows_csv, AblationGrid, AblationRow,
    AblationSummary, AblationTable, GridPoint, ABLATION_CSV_HEADER,
};
pub use bands::{Band, BandSpec, D_MAX};
pub use consistency::{temporal_consistency, temporal_consistency_detailed, Consistency};
pub use mixing::{keep_ratio_mask, mixing_experiment, MixingResult, MixingRow, MixingSettings};
pub use snr::{band_energies, snr_report, snr_report_pooled, SpectrumReport};
