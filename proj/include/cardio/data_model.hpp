#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cardio/common.hpp"

namespace cardio {

// ----------------------------------------------------------------------------
// Scenes and labels
// ----------------------------------------------------------------------------

// Smartphone placement for one recording: three chest positions, two abdominal.
enum class Scene : int { Lx1 = 0, Rx1 = 1, M1 = 2, T1 = 3, L1 = 4 };

inline constexpr int kSceneCount = 5;
inline constexpr std::array<Scene, kSceneCount> kSceneOrder = {
    Scene::Lx1, Scene::Rx1, Scene::M1, Scene::T1, Scene::L1};

const char* scene_name(Scene s);
std::optional<Scene> parse_scene(const std::string& name);

enum class Label : int { H = 0, NH = 1 };

const char* label_name(Label l);
std::optional<Label> parse_label(const std::string& name);

enum class DiseaseClass : int {
    None = 0,
    ValvularInsufficiency = 1,
    CoronaryArteryDisease = 2,
    AorticAneurysm = 3,
    Unspecified = 4,
};

const char* disease_name(DiseaseClass d);
std::optional<DiseaseClass> parse_disease(const std::string& name);

// Channel layout used everywhere: gyro triplet first, then accel triplet.
inline constexpr int kChannelCount = 6;
inline constexpr std::array<const char*, kChannelCount> kChannelNames = {
    "gx", "gy", "gz", "ax", "ay", "az"};
inline constexpr int kGyroY = 1;

// Fixed cycle length after FFT resampling.
inline constexpr int kCycleLen = 300;

// ----------------------------------------------------------------------------
// Recordings
// ----------------------------------------------------------------------------

// One scene's 6-channel IMU time series. `times` holds the signal file's time
// column verbatim so that save(load(x)) reproduces the file byte for byte.
struct RawRecording {
    Scene scene = Scene::Lx1;
    double sample_rate_hz = 50.0;
    std::vector<double> times;                       // seconds
    std::array<std::vector<double>, kChannelCount> ch;  // gx gy gz ax ay az

    std::size_t samples() const { return ch[0].size(); }
    double duration() const {
        return samples() > 0 ? static_cast<double>(samples()) / sample_rate_hz : 0.0;
    }

    // Throws ContractError on shape/finiteness violations.
    void validate() const;
};

struct PatientRecord {
    std::string patient_id;
    Label label = Label::H;
    DiseaseClass disease_class = DiseaseClass::None;
    int age = 0;
    char sex = 'F';  // 'M' or 'F'
    double height_cm = 0.0;
    double weight_kg = 0.0;
    std::map<Scene, RawRecording> recordings;

    bool has_all_scenes() const { return recordings.size() == kSceneCount; }
};

// ----------------------------------------------------------------------------
// Segmented cycles
// ----------------------------------------------------------------------------

// One respiratory act, resampled to kCycleLen per channel.
struct BreathingCycle {
    Scene scene = Scene::Lx1;
    std::array<std::vector<double>, kChannelCount> ch;  // each length kCycleLen
    int phase_bound = -1;  // inhale/exhale boundary index after resampling; -1 absent
    std::pair<int, int> source_window = {0, 0};  // [start, end) into trimmed recording

    void validate() const;
};

// Aligned 5-scene cycle tuple; the model's input unit.
struct PatientExample {
    std::string patient_id;
    Label label = Label::H;
    int cycle_index = 0;
    std::array<BreathingCycle, kSceneCount> scenes;  // indexed by kSceneOrder
    // Demographics carried for the optional ablation head input.
    double age = 0.0, height_cm = 0.0, weight_kg = 0.0;
};

// ----------------------------------------------------------------------------
// Dataset and diagnostics
// ----------------------------------------------------------------------------

struct Diagnostic {
    enum class Severity { Info, Warning, Error };
    Severity severity = Severity::Info;
    std::string patient_id;
    std::string message;
};

std::string format_diagnostic(const Diagnostic& d);

struct Dataset {
    std::vector<PatientRecord> patients;
    std::vector<Diagnostic> diagnostics;
    std::vector<std::string> non_trainable_ids;  // loaded but excluded from train/eval

    std::size_t size() const { return patients.size(); }
    bool is_trainable(const std::string& id) const;
    std::vector<const PatientRecord*> trainable() const;
    const PatientRecord* find(const std::string& id) const;
};

// ----------------------------------------------------------------------------
// Segmentation ground truth (synthetic cohorts)
// ----------------------------------------------------------------------------

// True respiratory maxima of the noise-free generated waveform, per patient
// and scene, as sample indices into the full (untrimmed) recording.
struct GroundTruth {
    std::map<std::string, std::array<std::vector<int>, kSceneCount>> maxima;

    bool empty() const { return maxima.empty(); }
};

// ----------------------------------------------------------------------------
// Demographic summary (per label and per disease class)
// ----------------------------------------------------------------------------

struct GroupSummary {
    std::size_t count = 0;
    // Absent (nullopt) when the group is empty.
    std::optional<MeanSd> age, height_cm, weight_kg;
};

struct DemographicSummary {
    std::map<Label, GroupSummary> by_label;
    std::map<DiseaseClass, GroupSummary> by_disease;
    std::size_t total = 0;
};

DemographicSummary dataset_summary(const Dataset& ds);
std::string format_summary(const DemographicSummary& s);

}  // namespace cardio
