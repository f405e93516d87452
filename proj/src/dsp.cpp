#include "cardio/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "cardio/fft.hpp"

namespace cardio::dsp {

using fft::irfft;
using fft::rfft;

// ============================================================================
// Trim
// ============================================================================

RawRecording trim_transient(const RawRecording& rec, double trim_s) {
    require(trim_s >= 0.0, "trim_transient: trim_s must be non-negative");
    const auto drop = static_cast<std::size_t>(trim_s * rec.sample_rate_hz);
    require(drop < rec.samples(), "trim_transient: trim removes the whole recording");

    RawRecording out;
    out.scene = rec.scene;
    out.sample_rate_hz = rec.sample_rate_hz;
    if (!rec.times.empty())
        out.times.assign(rec.times.begin() + static_cast<std::ptrdiff_t>(drop), rec.times.end());
    for (std::size_t c = 0; c < kChannelCount; ++c)
        out.ch[c].assign(rec.ch[c].begin() + static_cast<std::ptrdiff_t>(drop), rec.ch[c].end());
    return out;
}

// ============================================================================
// Brick-wall low-pass
// ============================================================================

std::vector<double> lowpass_fft(const std::vector<double>& signal, const FilterSpec& spec) {
    spec.validate();
    require(!signal.empty(), "lowpass_fft: empty signal");
    const std::size_t n = signal.size();

    auto spectrum = rfft(signal);
    // Keep bin k iff its frequency k*fs/n does not exceed the cutoff. The
    // relative epsilon protects bins that land exactly on the cutoff from
    // rounding of the bin-frequency product.
    const double limit = spec.cutoff_hz * (1.0 + 1e-12);
    for (std::size_t k = 0; k < spectrum.size(); ++k) {
        const double freq = static_cast<double>(k) * spec.sample_rate_hz / static_cast<double>(n);
        if (freq > limit) spectrum[k] = {0.0, 0.0};
    }
    return irfft(spectrum, n);
}

// ============================================================================
// Peak detection
// ============================================================================

namespace {

// Local maxima with plateau handling: a flat run counts once, attributed to
// its first sample, and only when both flanks are strictly lower.
std::vector<int> local_maxima(const std::vector<double>& x) {
    std::vector<int> peaks;
    const int n = static_cast<int>(x.size());
    int i = 1;
    while (i < n - 1) {
        if (x[i] > x[i - 1]) {
            int j = i;
            while (j + 1 < n && x[j + 1] == x[i]) ++j;  // extend plateau
            if (j + 1 < n && x[j + 1] < x[i]) peaks.push_back(i);
            i = j + 1;
        } else {
            ++i;
        }
    }
    return peaks;
}

// Prominence of one peak: walk outward until a higher sample or the edge,
// take the minimum of each interval, base = higher of the two minima.
double peak_prominence(const std::vector<double>& x, int peak) {
    const int n = static_cast<int>(x.size());
    const double v = x[peak];

    double left_min = v;
    for (int i = peak - 1; i >= 0; --i) {
        if (x[i] > v) break;
        left_min = std::min(left_min, x[i]);
    }
    double right_min = v;
    for (int i = peak + 1; i < n; ++i) {
        if (x[i] > v) break;
        right_min = std::min(right_min, x[i]);
    }
    return v - std::max(left_min, right_min);
}

// Greedy distance suppression: accept peaks in order of descending height
// (ties: lower index first); each accepted peak removes unaccepted
// neighbours closer than min_distance.
std::vector<int> enforce_distance(const std::vector<double>& x, std::vector<int> peaks,
                                  int min_distance) {
    if (min_distance <= 1 || peaks.size() < 2) return peaks;

    std::vector<std::size_t> order(peaks.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return x[peaks[a]] > x[peaks[b]];
    });

    std::vector<char> keep(peaks.size(), 1);
    for (std::size_t oi : order) {
        if (!keep[oi]) continue;
        // Suppress lower-priority peaks inside the exclusion zone.
        for (std::size_t j = oi + 1; j < peaks.size() && peaks[j] - peaks[oi] < min_distance; ++j)
            keep[j] = 0;
        for (std::size_t j = oi; j-- > 0 && peaks[oi] - peaks[j] < min_distance;) keep[j] = 0;
    }

    std::vector<int> out;
    for (std::size_t i = 0; i < peaks.size(); ++i)
        if (keep[i]) out.push_back(peaks[i]);
    return out;
}

std::vector<int> select_peaks(const std::vector<double>& x, int min_distance,
                              double min_prominence) {
    auto peaks = local_maxima(x);
    peaks = enforce_distance(x, std::move(peaks), min_distance);
    if (min_prominence > 0.0) {
        std::vector<int> out;
        for (int p : peaks)
            if (peak_prominence(x, p) >= min_prominence) out.push_back(p);
        peaks = std::move(out);
    }
    return peaks;
}

}  // namespace

PeakSet detect_peaks(const std::vector<double>& filtered_gy, int min_distance,
                     double min_prominence) {
    require(min_distance >= 1, "detect_peaks: min_distance must be >= 1");
    require(min_prominence >= 0.0, "detect_peaks: min_prominence must be >= 0");

    PeakSet out;
    if (filtered_gy.size() < 3) return out;
    out.maxima = select_peaks(filtered_gy, min_distance, min_prominence);

    std::vector<double> neg(filtered_gy.size());
    std::transform(filtered_gy.begin(), filtered_gy.end(), neg.begin(),
                   [](double v) { return -v; });
    out.minima = select_peaks(neg, min_distance, min_prominence);

    // Enforce alternation on the merged sequence: of two same-kind neighbours
    // the less extreme one is dropped (ties keep the earlier).
    struct Ext {
        int idx;
        bool is_max;
    };
    std::vector<Ext> merged;
    merged.reserve(out.maxima.size() + out.minima.size());
    std::size_t a = 0, b = 0;
    while (a < out.maxima.size() || b < out.minima.size()) {
        const bool take_max =
            b >= out.minima.size() || (a < out.maxima.size() && out.maxima[a] < out.minima[b]);
        if (take_max)
            merged.push_back({out.maxima[a++], true});
        else
            merged.push_back({out.minima[b++], false});
    }

    std::vector<Ext> alt;
    for (const Ext& e : merged) {
        if (!alt.empty() && alt.back().is_max == e.is_max) {
            const double prev = filtered_gy[alt.back().idx];
            const double cur = filtered_gy[e.idx];
            const bool replace = e.is_max ? cur > prev : cur < prev;
            if (replace) alt.back() = e;
        } else {
            alt.push_back(e);
        }
    }

    out.maxima.clear();
    out.minima.clear();
    for (const Ext& e : alt) (e.is_max ? out.maxima : out.minima).push_back(e.idx);
    return out;
}

// ============================================================================
// Fourier resampling
// ============================================================================

std::vector<double> resample_fft(const std::vector<double>& window, int target_len) {
    require(!window.empty(), "resample_fft: empty window");
    require(target_len >= 1, "resample_fft: target_len must be >= 1");
    const std::size_t n = window.size();
    const auto m = static_cast<std::size_t>(target_len);
    if (m == n) return window;

    const auto src = rfft(window);
    std::vector<std::complex<double>> dst(m / 2 + 1, std::complex<double>{0.0, 0.0});

    const std::size_t shorter = std::min(n, m);
    const std::size_t ncopy = shorter / 2 + 1;
    for (std::size_t k = 0; k < ncopy && k < src.size() && k < dst.size(); ++k) dst[k] = src[k];

    // The Nyquist bin of the shorter length is unpaired there but paired in
    // the longer spectrum; halve or double to conserve that component.
    if (shorter % 2 == 0) {
        const std::size_t nyq = shorter / 2;
        if (m < n)
            dst[nyq] *= 2.0;
        else
            dst[nyq] *= 0.5;
    }

    auto out = irfft(dst, m);
    const double gain = static_cast<double>(m) / static_cast<double>(n);
    for (double& v : out) v *= gain;
    return out;
}

// ============================================================================
// Cycle windowing
// ============================================================================

std::vector<BreathingCycle> window_cycles(const RawRecording& raw, const PeakSet& peaks,
                                          int target_len) {
    std::vector<BreathingCycle> cycles;
    if (peaks.maxima.size() < 2) return cycles;

    for (std::size_t i = 0; i + 1 < peaks.maxima.size(); ++i) {
        const int lo = peaks.maxima[i];
        const int hi = peaks.maxima[i + 1];
        const int len = hi - lo;
        if (len < 2 || hi > static_cast<int>(raw.samples())) continue;

        BreathingCycle cyc;
        cyc.scene = raw.scene;
        cyc.source_window = {lo, hi};
        for (std::size_t c = 0; c < kChannelCount; ++c) {
            std::vector<double> win(raw.ch[c].begin() + lo, raw.ch[c].begin() + hi);
            cyc.ch[c] = resample_fft(win, target_len);
        }
        // Inhale/exhale boundary: the minimum falling inside this window,
        // mapped into resampled coordinates.
        for (int q : peaks.minima) {
            if (q > lo && q < hi) {
                const double scaled = static_cast<double>(q - lo) * target_len / len;
                cyc.phase_bound =
                    std::clamp(static_cast<int>(std::lround(scaled)), 0, target_len - 1);
                break;
            }
        }
        cycles.push_back(std::move(cyc));
    }
    return cycles;
}

// ============================================================================
// Patient pipeline
// ============================================================================

double prominence_threshold(const std::vector<double>& signal, double iqr_fraction) {
    require(!signal.empty(), "prominence_threshold: empty signal");
    std::vector<double> sorted = signal;
    std::sort(sorted.begin(), sorted.end());
    const auto quantile = [&](double p) {
        const double pos = p * static_cast<double>(sorted.size() - 1);
        const auto lo = static_cast<std::size_t>(pos);
        const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
        const double frac = pos - static_cast<double>(lo);
        return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
    };
    return iqr_fraction * (quantile(0.75) - quantile(0.25));
}

PreprocessResult preprocess_patient(const PatientRecord& patient, const DspConfig& cfg) {
    require(patient.has_all_scenes(), "preprocess_patient: patient is missing scenes");

    PreprocessResult result;
    std::array<std::vector<BreathingCycle>, kSceneCount> per_scene;

    for (std::size_t s = 0; s < kSceneCount; ++s) {
        const Scene scene = kSceneOrder[s];
        const RawRecording& rec = patient.recordings.at(scene);
        const RawRecording trimmed = trim_transient(rec, cfg.trim_s);

        // Filter over the full recording, then drop the transient span. A
        // brick-wall filter applied to the shorter slice rings off the slice
        // boundaries hard enough to displace passband peaks by several
        // samples; over the full recording the truncation artifacts are far
        // smaller, and the transient's high-frequency burst is annihilated by
        // the cutoff anyway. Peaks and windows still never touch the trim.
        FilterSpec filt{cfg.cutoff_hz, rec.sample_rate_hz};
        const auto gy_full = lowpass_fft(rec.ch[kGyroY], filt);
        const std::size_t drop = rec.samples() - trimmed.samples();
        const std::vector<double> gy(gy_full.begin() + static_cast<std::ptrdiff_t>(drop),
                                     gy_full.end());

        const int min_dist = std::max(
            1, static_cast<int>(std::lround(cfg.min_distance_s * trimmed.sample_rate_hz)));
        const double min_prom = prominence_threshold(gy, cfg.min_prominence_iqr);

        const PeakSet peaks = detect_peaks(gy, min_dist, min_prom);
        per_scene[s] = window_cycles(trimmed, peaks, cfg.target_len);
        result.cycles_per_scene[s] = per_scene[s].size();

        if (per_scene[s].empty()) {
            result.flagged = true;
            result.diagnostics.push_back({Diagnostic::Severity::Warning, patient.patient_id,
                                          std::string("no breathing cycles in scene ") +
                                              std::string(scene_name(scene))});
        }
    }
    if (result.flagged) return result;

    std::size_t n_examples = per_scene[0].size();
    for (const auto& v : per_scene) n_examples = std::min(n_examples, v.size());

    for (std::size_t i = 0; i < n_examples; ++i) {
        PatientExample ex;
        ex.patient_id = patient.patient_id;
        ex.label = patient.label;
        ex.cycle_index = static_cast<int>(i);
        ex.age = static_cast<double>(patient.age);
        ex.height_cm = patient.height_cm;
        ex.weight_kg = patient.weight_kg;
        for (std::size_t s = 0; s < kSceneCount; ++s) ex.scenes[s] = per_scene[s][i];
        result.examples.push_back(std::move(ex));
    }
    return result;
}

DatasetPreprocess preprocess_dataset(const Dataset& ds, const DspConfig& cfg) {
    DatasetPreprocess out;
    for (const PatientRecord& p : ds.patients) {
        if (!ds.is_trainable(p.patient_id)) continue;
        PreprocessResult r = preprocess_patient(p, cfg);
        for (auto& d : r.diagnostics) out.diagnostics.push_back(std::move(d));
        if (r.flagged || r.examples.empty()) {
            out.flagged_ids.push_back(p.patient_id);
            continue;
        }
        for (auto& ex : r.examples) out.examples.push_back(std::move(ex));
    }
    return out;
}

}  // namespace cardio::dsp
