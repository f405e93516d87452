#include "cardio/synth.hpp"

#include <cmath>
#include <numbers>

#include "cardio/common.hpp"
#include "cardio/dsp.hpp"

namespace cardio::synth {

namespace {

constexpr double kTau = 2.0 * std::numbers::pi;

// NH morphology deltas at class_separation = 1.
constexpr double kKappaShift = 0.45;
constexpr double kA2Shift = 0.20;
constexpr double kA3Shift = 0.10;
constexpr double kSceneLagShift = 0.6;  // radians across the scene sequence

// Respiratory-effort instability: the non-healthy class breathes with a
// slowly wandering amplitude. Mean envelope is 1, so average signal power
// carries no class information; only the cycle-to-cycle variability does.
constexpr double kEnvelopeDepthShift = 0.6;
constexpr double kEnvelopeFreqLoHz = 0.15;
constexpr double kEnvelopeFreqHiHz = 0.25;

// Drift sits exactly on DFT bin 1 of the 20 s session so it cannot leak into
// other bins and blur the ground-truth extrema.
constexpr double kDriftFrequencyHz = 1.0 / kSceneDurationS;
constexpr double kDriftFraction = 0.03;

constexpr double kFilterCutoffHz = 0.7;  // burst content below this is projected out

// Attenuation / phase offset of the respiratory component per channel,
// relative to gyro-y.
struct ChannelMix {
    double gain;
    double phase;
};
constexpr std::array<ChannelMix, kChannelCount> kMix = {{
    {0.35, -0.40},  // gx
    {1.00, 0.00},   // gy (reference)
    {0.20, 0.70},   // gz
    {0.15, -0.20},  // ax
    {0.10, 0.30},   // ay
    {0.25, -0.10},  // az
}};

void check_range(const Range& r, const char* what) {
    require(r.lo > 0.0 && r.hi >= r.lo, std::string("CohortSpec: bad ") + what + " range");
}

}  // namespace

void CohortSpec::validate() const {
    require(n_healthy >= 0 && n_nonhealthy >= 0, "CohortSpec: negative patient count");
    check_range(rate_h, "healthy rate");
    check_range(rate_nh, "non-healthy rate");
    require(rate_h.hi < kSampleRateHz / 2.0 && rate_nh.hi < kSampleRateHz / 2.0,
            "CohortSpec: breathing rate above Nyquist");
    for (std::size_t s = 0; s < kSceneCount; ++s) {
        check_range(amplitude_h[s], "healthy amplitude");
        check_range(amplitude_nh[s], "non-healthy amplitude");
    }
    require(class_separation >= 0.0 && class_separation <= 1.0,
            "CohortSpec: class_separation outside [0, 1]");
    require(transient_duration_s >= 0.0 && transient_duration_s < kSceneDurationS,
            "CohortSpec: transient must fit inside the scene");
    require(noise_std >= 0.0, "CohortSpec: negative noise level");
}

double wave_eval(const WaveParams& p, double theta) {
    return std::sin(theta + p.kappa * std::sin(theta)) + p.a2 * std::sin(2.0 * theta + p.phi2) +
           p.a3 * std::sin(3.0 * theta + p.phi3);
}

double wave_argmax(const WaveParams& p) {
    // Dense scan to bracket the global maximum over one period...
    constexpr int kGrid = 4096;
    int best = 0;
    double best_v = -1e300;
    for (int i = 0; i < kGrid; ++i) {
        const double v = wave_eval(p, kTau * i / kGrid);
        if (v > best_v) {
            best_v = v;
            best = i;
        }
    }
    // ...then golden-section refinement inside the bracketing cell pair.
    double lo = kTau * (best - 1) / kGrid;
    double hi = kTau * (best + 1) / kGrid;
    constexpr double kInvPhi = 0.6180339887498949;
    double x1 = hi - kInvPhi * (hi - lo), x2 = lo + kInvPhi * (hi - lo);
    double f1 = wave_eval(p, x1), f2 = wave_eval(p, x2);
    while (hi - lo > 1e-12) {
        if (f1 < f2) {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + kInvPhi * (hi - lo);
            f2 = wave_eval(p, x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - kInvPhi * (hi - lo);
            f1 = wave_eval(p, x1);
        }
    }
    double theta = 0.5 * (lo + hi);
    theta = std::fmod(theta, kTau);
    if (theta < 0.0) theta += kTau;
    return theta;
}

namespace {

struct PatientDraw {
    double rate_hz;
    double base_phase;
    std::array<double, kSceneCount> amplitude;
    std::array<double, kSceneCount> scene_lag;
    WaveParams wave;
    double drift_phase;
    std::array<double, 3> accel_offset;  // ax, ay, az gravity components
    // Transient burst: a handful of band-limited sinusoids.
    std::array<double, 4> burst_freq, burst_amp, burst_phase;
    // Effort envelope, depth 0 for the healthy class; per-scene phase/rate
    // because the scenes are separate recordings.
    double env_depth;
    std::array<double, kSceneCount> env_freq, env_phase;
};

PatientDraw draw_patient(Rng& rng, bool healthy, const CohortSpec& spec) {
    PatientDraw d;
    const double s = healthy ? 0.0 : spec.class_separation;
    const Range& rate = healthy ? spec.rate_h : spec.rate_nh;
    const auto& amp = healthy ? spec.amplitude_h : spec.amplitude_nh;

    d.rate_hz = rng.uniform(rate.lo, rate.hi);
    d.base_phase = rng.uniform(0.0, kTau);
    for (std::size_t i = 0; i < kSceneCount; ++i) {
        d.amplitude[i] = rng.uniform(amp[i].lo, amp[i].hi);
        const double jitter = rng.uniform(-0.05, 0.05);
        d.scene_lag[i] = jitter + s * kSceneLagShift * static_cast<double>(i) /
                                      static_cast<double>(kSceneCount - 1);
    }
    // Harmonic phases vary in a narrow band (class-independent) so that the
    // class signature lives in kappa/a2/a3 magnitudes, not in phase noise.
    d.wave.kappa = 0.12 + s * kKappaShift;
    d.wave.a2 = 0.10 + s * kA2Shift;
    d.wave.phi2 = rng.uniform(0.0, 0.8);
    d.wave.a3 = 0.004 + s * kA3Shift;
    d.wave.phi3 = rng.uniform(0.0, 0.8);
    d.drift_phase = rng.uniform(0.0, kTau);
    // Mounting offsets stay small next to the respiratory swing on the
    // accelerometer channels; otherwise the DC level alone would identify a
    // patient and reward memorisation over reading the breathing pattern.
    d.accel_offset = {rng.uniform(-0.02, 0.02), rng.uniform(-0.02, 0.02),
                      9.8 + rng.uniform(-0.02, 0.02)};
    for (std::size_t k = 0; k < d.burst_freq.size(); ++k) {
        d.burst_freq[k] = rng.uniform(1.5, 6.0);
        d.burst_amp[k] = rng.uniform(0.5, 1.0);
        d.burst_phase[k] = rng.uniform(0.0, kTau);
    }
    d.env_depth = s * kEnvelopeDepthShift;
    for (std::size_t i = 0; i < kSceneCount; ++i) {
        d.env_freq[i] = rng.uniform(kEnvelopeFreqLoHz, kEnvelopeFreqHiHz);
        d.env_phase[i] = rng.uniform(0.0, kTau);
    }
    return d;
}

RawRecording render_scene(const PatientDraw& d, std::size_t scene_idx, const CohortSpec& spec,
                          Rng& rng) {
    const auto n = static_cast<std::size_t>(kSceneDurationS * kSampleRateHz);
    RawRecording rec;
    rec.scene = kSceneOrder[scene_idx];
    rec.sample_rate_hz = kSampleRateHz;
    rec.times.resize(n);
    for (auto& c : rec.ch) c.resize(n);

    const double amp = d.amplitude[scene_idx];
    const double lag = d.base_phase + d.scene_lag[scene_idx];

    // Tapered sinusoid burst across the transient span. Projecting out its
    // sub-cutoff leakage keeps it strictly band-limited above the respiratory
    // band, so the burst stays invisible to the analysis filter and the
    // recorded ground-truth extrema stay exact.
    std::vector<double> burst(n, 0.0);
    if (spec.transient_duration_s > 0.0) {
        for (std::size_t i = 0; i < n; ++i) {
            const double t = static_cast<double>(i) / kSampleRateHz;
            if (t >= spec.transient_duration_s) break;
            const double taper = 1.0 - t / spec.transient_duration_s;
            double sum = 0.0;
            for (std::size_t k = 0; k < d.burst_freq.size(); ++k)
                sum += d.burst_amp[k] * std::sin(kTau * d.burst_freq[k] * t + d.burst_phase[k]);
            burst[i] = 6.0 * amp * taper * taper * sum;
        }
        const auto low = dsp::lowpass_fft(burst, {kFilterCutoffHz, kSampleRateHz});
        for (std::size_t i = 0; i < n; ++i) burst[i] -= low[i];
    }

    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / kSampleRateHz;
        rec.times[i] = t;

        const double theta = kTau * d.rate_hz * t + lag;
        const double drift =
            kDriftFraction * amp * std::sin(kTau * kDriftFrequencyHz * t + d.drift_phase);
        const double env =
            1.0 + d.env_depth *
                      std::sin(kTau * d.env_freq[scene_idx] * t + d.env_phase[scene_idx]);

        for (std::size_t c = 0; c < kChannelCount; ++c) {
            double v = env * kMix[c].gain * amp * wave_eval(d.wave, theta + kMix[c].phase);
            if (c == kGyroY) v += drift;
            if (c >= 3) v += d.accel_offset[c - 3];
            v += burst[i];
            if (spec.noise_std > 0.0) v += rng.normal(0.0, spec.noise_std);
            rec.ch[c][i] = v;
        }
    }
    return rec;
}

std::vector<int> true_maxima(const PatientDraw& d, std::size_t scene_idx) {
    // Maxima of the pure respiratory carrier of gyro-y: theta(t) = theta*
    // (mod 2*pi). Drift and noise shift the observed peak by well under a
    // sample at the chosen levels. The effort envelope is excluded: it is
    // zero-depth for the healthy class (and at zero separation, where the
    // extremum oracles operate) and only nudges observed peaks elsewhere.
    const double theta_star = wave_argmax(d.wave);
    const double lag = d.base_phase + d.scene_lag[scene_idx];
    const auto n = static_cast<int>(kSceneDurationS * kSampleRateHz);

    // Solve theta(t_k) = theta* + 2*pi*k for the k giving t_k in [0, end).
    std::vector<int> out;
    for (double k = std::ceil((lag - theta_star) / kTau);; k += 1.0) {
        const double t = ((theta_star - lag) + kTau * k) / (kTau * d.rate_hz);
        if (t < 0.0) continue;
        if (t >= kSceneDurationS) break;
        const int idx = static_cast<int>(std::lround(t * kSampleRateHz));
        if (idx >= 0 && idx < n) out.push_back(idx);
    }
    return out;
}

constexpr std::array<DiseaseClass, 4> kDiseaseCycle = {
    DiseaseClass::ValvularInsufficiency, DiseaseClass::CoronaryArteryDisease,
    DiseaseClass::AorticAneurysm, DiseaseClass::Unspecified};

std::string patient_name(bool healthy, int ordinal) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%c%03d", healthy ? 'H' : 'N', ordinal + 1);
    return buf;
}

}  // namespace

SynthCohort generate_cohort(const CohortSpec& spec) {
    spec.validate();
    SynthCohort cohort;

    const int total = spec.n_healthy + spec.n_nonhealthy;
    for (int p = 0; p < total; ++p) {
        const bool healthy = p < spec.n_healthy;
        const int ordinal = healthy ? p : p - spec.n_healthy;
        Rng rng(mix_seed(spec.seed, static_cast<std::uint64_t>(p) + 1));

        PatientRecord rec;
        rec.patient_id = patient_name(healthy, ordinal);
        rec.label = healthy ? Label::H : Label::NH;
        rec.disease_class = healthy ? DiseaseClass::None
                                    : kDiseaseCycle[static_cast<std::size_t>(ordinal) %
                                                    kDiseaseCycle.size()];

        const double s = healthy ? 0.0 : spec.class_separation;
        rec.age = static_cast<int>(rng.uniform(25.0, 75.0) + 10.0 * s);
        rec.sex = rng.below(2) == 0 ? 'F' : 'M';
        rec.height_cm = rng.normal(170.0, 9.0);
        rec.weight_kg = rng.normal(72.0 + 8.0 * s, 11.0);

        const PatientDraw draw = draw_patient(rng, healthy, spec);
        auto& gt = cohort.ground_truth.maxima[rec.patient_id];
        for (std::size_t sc = 0; sc < kSceneCount; ++sc) {
            rec.recordings[kSceneOrder[sc]] = render_scene(draw, sc, spec, rng);
            gt[sc] = true_maxima(draw, sc);
        }
        cohort.dataset.patients.push_back(std::move(rec));
    }
    return cohort;
}

}  // namespace cardio::synth
