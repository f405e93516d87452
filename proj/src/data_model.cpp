#include "cardio/data_model.hpp"

#include <algorithm>
#include <sstream>

namespace cardio {

const char* scene_name(Scene s) {
    switch (s) {
        case Scene::Lx1: return "Lx1";
        case Scene::Rx1: return "Rx1";
        case Scene::M1: return "M1";
        case Scene::T1: return "T1";
        case Scene::L1: return "L1";
    }
    return "?";
}

std::optional<Scene> parse_scene(const std::string& name) {
    for (Scene s : kSceneOrder)
        if (name == scene_name(s)) return s;
    return std::nullopt;
}

const char* label_name(Label l) { return l == Label::H ? "H" : "NH"; }

std::optional<Label> parse_label(const std::string& name) {
    if (name == "H") return Label::H;
    if (name == "NH") return Label::NH;
    return std::nullopt;
}

const char* disease_name(DiseaseClass d) {
    switch (d) {
        case DiseaseClass::None: return "None";
        case DiseaseClass::ValvularInsufficiency: return "ValvularInsufficiency";
        case DiseaseClass::CoronaryArteryDisease: return "CoronaryArteryDisease";
        case DiseaseClass::AorticAneurysm: return "AorticAneurysm";
        case DiseaseClass::Unspecified: return "Unspecified";
    }
    return "?";
}

std::optional<DiseaseClass> parse_disease(const std::string& name) {
    for (int i = 0; i <= 4; ++i) {
        auto d = static_cast<DiseaseClass>(i);
        if (name == disease_name(d)) return d;
    }
    return std::nullopt;
}

void RawRecording::validate() const {
    require(sample_rate_hz > 0.0, "RawRecording: sample_rate_hz must be positive");
    const std::size_t n = ch[0].size();
    require(n >= 1, "RawRecording: empty signal");
    for (const auto& c : ch) {
        require(c.size() == n, "RawRecording: channel length mismatch");
        require(all_finite(c), "RawRecording: non-finite sample");
    }
    require(times.size() == n, "RawRecording: time column length mismatch");
}

void BreathingCycle::validate() const {
    for (const auto& c : ch) {
        require(c.size() == static_cast<std::size_t>(kCycleLen),
                "BreathingCycle: channel length must be exactly 300");
        require(all_finite(c), "BreathingCycle: non-finite value");
    }
}

std::string format_diagnostic(const Diagnostic& d) {
    const char* sev = d.severity == Diagnostic::Severity::Error     ? "error"
                      : d.severity == Diagnostic::Severity::Warning ? "warning"
                                                                    : "info";
    std::ostringstream os;
    os << sev << " [" << (d.patient_id.empty() ? "-" : d.patient_id) << "]: " << d.message;
    return os.str();
}

bool Dataset::is_trainable(const std::string& id) const {
    return std::find(non_trainable_ids.begin(), non_trainable_ids.end(), id) ==
           non_trainable_ids.end();
}

std::vector<const PatientRecord*> Dataset::trainable() const {
    std::vector<const PatientRecord*> out;
    for (const auto& p : patients)
        if (is_trainable(p.patient_id)) out.push_back(&p);
    return out;
}

const PatientRecord* Dataset::find(const std::string& id) const {
    for (const auto& p : patients)
        if (p.patient_id == id) return &p;
    return nullptr;
}

namespace {

GroupSummary summarize(const std::vector<const PatientRecord*>& group) {
    GroupSummary g;
    g.count = group.size();
    if (group.empty()) return g;
    std::vector<double> age, h, w;
    for (const auto* p : group) {
        age.push_back(static_cast<double>(p->age));
        h.push_back(p->height_cm);
        w.push_back(p->weight_kg);
    }
    g.age = mean_sd(age);
    g.height_cm = mean_sd(h);
    g.weight_kg = mean_sd(w);
    return g;
}

}  // namespace

DemographicSummary dataset_summary(const Dataset& ds) {
    DemographicSummary s;
    s.total = ds.patients.size();
    std::map<Label, std::vector<const PatientRecord*>> by_label;
    std::map<DiseaseClass, std::vector<const PatientRecord*>> by_disease;
    for (const auto& p : ds.patients) {
        by_label[p.label].push_back(&p);
        by_disease[p.disease_class].push_back(&p);
    }
    for (Label l : {Label::H, Label::NH}) s.by_label[l] = summarize(by_label[l]);
    for (auto& [d, v] : by_disease) s.by_disease[d] = summarize(v);
    return s;
}

std::string format_summary(const DemographicSummary& s) {
    std::ostringstream os;
    auto row = [&os](const std::string& name, const GroupSummary& g) {
        os << "  " << name << ": n=" << g.count;
        if (g.age) {
            os << "  age " << g.age->mean << " +/- " << g.age->sd;
            os << "  height " << g.height_cm->mean << " +/- " << g.height_cm->sd;
            os << "  weight " << g.weight_kg->mean << " +/- " << g.weight_kg->sd;
        }
        os << "\n";
    };
    os << "patients: " << s.total << "\n";
    os << "by label:\n";
    for (const auto& [l, g] : s.by_label) row(label_name(l), g);
    os << "by disease class:\n";
    for (const auto& [d, g] : s.by_disease) row(disease_name(d), g);
    return os.str();
}

}  // namespace cardio
