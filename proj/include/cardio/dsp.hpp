#pragma once

#include <vector>

#include "cardio/data_model.hpp"

namespace cardio::dsp {

// ----------------------------------------------------------------------------
// Configuration
// ----------------------------------------------------------------------------

struct FilterSpec {
    double cutoff_hz = 0.7;
    double sample_rate_hz = 50.0;

    void validate() const {
        require(cutoff_hz > 0.0 && sample_rate_hz > 0.0, "FilterSpec: rates must be positive");
        require(cutoff_hz < sample_rate_hz / 2.0, "FilterSpec: cutoff must be below Nyquist");
    }
};

struct DspConfig {
    double trim_s = 5.0;
    double cutoff_hz = 0.7;
    int target_len = kCycleLen;
    double min_distance_s = 1.5;        // max plausible resting breath rate ~40/min
    double min_prominence_iqr = 0.1;    // absolute threshold = fraction * IQR of filtered gy
};

// ----------------------------------------------------------------------------
// Peaks
// ----------------------------------------------------------------------------

struct PeakSet {
    std::vector<int> maxima;  // strictly increasing
    std::vector<int> minima;  // strictly increasing; alternates with maxima when merged
};

// ----------------------------------------------------------------------------
// Operations
// ----------------------------------------------------------------------------

// Drops the first floor(trim_s * sample_rate) samples from all channels.
RawRecording trim_transient(const RawRecording& rec, double trim_s);

// Brick-wall low-pass: spectrum bins strictly above cutoff are zeroed,
// bins at or below the cutoff pass unchanged.
std::vector<double> lowpass_fft(const std::vector<double>& signal, const FilterSpec& spec);

// Local maxima/minima with plateau tie-breaking, minimum peak distance,
// prominence filtering, and enforced max/min alternation. Input is expected
// to be the low-pass-filtered gyroscope y-axis.
PeakSet detect_peaks(const std::vector<double>& filtered_gy, int min_distance,
                     double min_prominence);

// Fourier resampling: truncate or zero-pad the spectrum, inverse transform,
// rescale amplitude by target_len/n.
std::vector<double> resample_fft(const std::vector<double>& window, int target_len);

// One cycle per consecutive pair of maxima, carrying all six raw channels,
// each window resampled to target_len. `raw` is the trimmed but unfiltered
// recording the peaks were computed from.
std::vector<BreathingCycle> window_cycles(const RawRecording& raw, const PeakSet& peaks,
                                          int target_len = kCycleLen);

// ----------------------------------------------------------------------------
// Per-patient pipeline
// ----------------------------------------------------------------------------

struct PreprocessResult {
    std::vector<PatientExample> examples;
    bool flagged = false;  // some scene yielded no usable cycle
    std::vector<Diagnostic> diagnostics;
    std::array<std::size_t, kSceneCount> cycles_per_scene = {};
};

// Per scene: low-pass the gyro-y over the full recording, drop the transient
// span, detect peaks on the remainder, window the trimmed unfiltered signal
// at maxima-to-maxima. Examples are aligned by cycle ordinal; count = min
// over scenes.
PreprocessResult preprocess_patient(const PatientRecord& patient, const DspConfig& cfg);

struct DatasetPreprocess {
    std::vector<PatientExample> examples;
    std::vector<std::string> flagged_ids;
    std::vector<Diagnostic> diagnostics;
};

// Runs preprocess_patient over every trainable patient.
DatasetPreprocess preprocess_dataset(const Dataset& ds, const DspConfig& cfg);

// Absolute prominence threshold used by the pipeline for one signal.
double prominence_threshold(const std::vector<double>& signal, double iqr_fraction);

}  // namespace cardio::dsp
