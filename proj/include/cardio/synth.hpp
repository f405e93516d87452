#pragma once

#include <cstdint>

#include "cardio/data_model.hpp"

namespace cardio::synth {

inline constexpr double kSceneDurationS = 20.0;
inline constexpr double kSampleRateHz = 50.0;

struct Range {
    double lo = 0.0, hi = 0.0;

    double width() const { return hi - lo; }
};

// ----------------------------------------------------------------------------
// Cohort specification
// ----------------------------------------------------------------------------

struct CohortSpec {
    int n_healthy = 10;
    int n_nonhealthy = 10;

    // Per-class breathing-rate range (Hz). Equal by default so rate carries
    // no class information; lo == hi pins the rate exactly.
    Range rate_h{0.20, 0.30};
    Range rate_nh{0.20, 0.30};

    // Per-scene gyro-y oscillation amplitude ranges (chest scenes weaker than
    // abdominal ones), shared by both classes by default.
    std::array<Range, kSceneCount> amplitude_h{
        {{0.8, 1.2}, {0.8, 1.2}, {0.9, 1.3}, {1.1, 1.6}, {1.1, 1.6}}};
    std::array<Range, kSceneCount> amplitude_nh{
        {{0.8, 1.2}, {0.8, 1.2}, {0.9, 1.3}, {1.1, 1.6}, {1.1, 1.6}}};

    // 0 = classes identically distributed; 1 = full morphology shift
    // (inhale/exhale asymmetry, harmonic content, inter-scene lag).
    double class_separation = 1.0;

    double transient_duration_s = 5.0;
    double noise_std = 0.05;
    std::uint64_t seed = 0;

    void validate() const;
};

// ----------------------------------------------------------------------------
// Waveform internals (exposed for spectral and extremum tests)
// ----------------------------------------------------------------------------

// One respiratory period: skewed fundamental plus two harmonics. kappa skews
// the phase (faster exhale), a2/a3 control harmonic content.
struct WaveParams {
    double kappa = 0.12;
    double a2 = 0.10, phi2 = 0.0;
    double a3 = 0.004, phi3 = 0.0;
};

double wave_eval(const WaveParams& p, double theta);

// Phase in [0, 2*pi) maximizing wave_eval, via dense scan plus golden-section
// refinement.
double wave_argmax(const WaveParams& p);

// ----------------------------------------------------------------------------
// Generation
// ----------------------------------------------------------------------------

struct SynthCohort {
    Dataset dataset;
    GroundTruth ground_truth;
};

// Deterministic in spec.seed. Every patient gets five kSceneDurationS scenes
// at kSampleRateHz; gyro-y carries the dominant respiratory oscillation, the
// other channels correlated attenuated copies; accelerometer channels carry a
// gravity offset; the first transient_duration_s of every channel is buried
// under a high-amplitude band-limited burst.
SynthCohort generate_cohort(const CohortSpec& spec);

}  // namespace cardio::synth
