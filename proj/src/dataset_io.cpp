#include "cardio/dataset_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

#include "json.hpp"

namespace cardio::io {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

// ============================================================================
// Number and CSV primitives
// ============================================================================

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace {

double parse_double(std::string_view field) {
    double v = 0.0;
    const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
    if (res.ec != std::errc{} || res.ptr != field.data() + field.size())
        throw IoError("bad numeric field '" + std::string(field) + "'");
    return v;
}

std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoError("cannot write " + p.string());
    out << text;
    if (!out) throw IoError("write failed for " + p.string());
}

ordered_json read_json(const fs::path& p) {
    ordered_json j = ordered_json::parse(read_text(p), nullptr, false);
    if (j.is_discarded()) throw IoError("invalid JSON in " + p.string());
    return j;
}

// Strips one trailing '\r' so files survive CRLF round trips through careless
// tooling.
std::string_view chomp(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    return line;
}

}  // namespace

// ============================================================================
// Signal files
// ============================================================================

namespace {

constexpr const char* kSignalHeader = "t,gx,gy,gz,ax,ay,az";

RawRecording read_signal_csv(const fs::path& p, Scene scene, double sample_rate_hz) {
    const std::string text = read_text(p);

    RawRecording rec;
    rec.scene = scene;
    rec.sample_rate_hz = sample_rate_hz;

    std::size_t pos = 0;
    bool saw_header = false;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        const std::string_view line = chomp(std::string_view(text).substr(pos, eol - pos));
        pos = eol + 1;
        if (line.empty()) continue;

        if (!saw_header) {
            if (line != kSignalHeader)
                throw IoError("unexpected header in " + p.string() + ": '" + std::string(line) +
                              "'");
            saw_header = true;
            continue;
        }

        const auto fields = split_csv(line);
        if (fields.size() != 1 + kChannelCount)
            throw IoError("expected " + std::to_string(1 + kChannelCount) + " columns in " +
                          p.string());
        rec.times.push_back(parse_double(fields[0]));
        for (std::size_t c = 0; c < kChannelCount; ++c)
            rec.ch[c].push_back(parse_double(fields[c + 1]));
    }
    if (!saw_header) throw IoError("empty signal file " + p.string());
    rec.validate();
    return rec;
}

void write_signal_csv(const fs::path& p, const RawRecording& rec) {
    std::string out;
    out.reserve(rec.samples() * 64);
    out += kSignalHeader;
    out += '\n';
    for (std::size_t i = 0; i < rec.samples(); ++i) {
        const double t = i < rec.times.size()
                             ? rec.times[i]
                             : static_cast<double>(i) / rec.sample_rate_hz;
        out += format_double(t);
        for (std::size_t c = 0; c < kChannelCount; ++c) {
            out += ',';
            out += format_double(rec.ch[c][i]);
        }
        out += '\n';
    }
    write_text(p, out);
}

}  // namespace

// ============================================================================
// Dataset
// ============================================================================

Dataset load_dataset(const fs::path& root) {
    const fs::path manifest_path = root / "manifest.json";
    if (!fs::exists(manifest_path)) throw IoError("manifest not found: " + manifest_path.string());

    Dataset ds;
    ordered_json manifest;
    try {
        manifest = read_json(manifest_path);
    } catch (const IoError& e) {
        throw IoError(std::string("manifest unreadable: ") + e.what());
    }

    const double sample_rate_hz = manifest.value("sample_rate_hz", 50.0);
    if (!manifest.contains("patients") || !manifest["patients"].is_array())
        throw IoError("manifest missing 'patients' array: " + manifest_path.string());

    for (const auto& entry : manifest["patients"]) {
        PatientRecord p;
        try {
            p.patient_id = entry.at("patient_id").get<std::string>();
        } catch (const ordered_json::exception&) {
            ds.diagnostics.push_back(
                {Diagnostic::Severity::Error, "?", "manifest entry without patient_id; skipped"});
            continue;
        }

        try {
            const auto label = parse_label(entry.at("label").get<std::string>());
            if (!label) throw IoError("unknown label");
            p.label = *label;
            const auto disease = parse_disease(entry.at("disease_class").get<std::string>());
            if (!disease) throw IoError("unknown disease_class");
            p.disease_class = *disease;
            p.age = entry.at("age").get<int>();
            const auto sex = entry.at("sex").get<std::string>();
            if (sex != "M" && sex != "F") throw IoError("sex must be M or F");
            p.sex = sex[0];
            p.height_cm = entry.at("height_cm").get<double>();
            p.weight_kg = entry.at("weight_kg").get<double>();
        } catch (const std::exception& e) {
            ds.diagnostics.push_back({Diagnostic::Severity::Error, p.patient_id,
                                      std::string("malformed manifest entry (") + e.what() +
                                          "); skipped"});
            continue;
        }

        bool scene_failed = false;
        if (entry.contains("scenes") && entry["scenes"].is_object()) {
            for (const auto& [key, value] : entry["scenes"].items()) {
                const auto scene = parse_scene(key);
                if (!scene) {
                    ds.diagnostics.push_back({Diagnostic::Severity::Warning, p.patient_id,
                                              "unknown scene key '" + key + "' ignored"});
                    continue;
                }
                try {
                    p.recordings[*scene] = read_signal_csv(root / value.get<std::string>(), *scene,
                                                           sample_rate_hz);
                } catch (const std::exception& e) {
                    scene_failed = true;
                    ds.diagnostics.push_back({Diagnostic::Severity::Error, p.patient_id,
                                              std::string("scene ") + key + ": " + e.what()});
                }
            }
        }

        if (scene_failed || !p.has_all_scenes()) {
            ds.diagnostics.push_back(
                {Diagnostic::Severity::Warning, p.patient_id,
                 "has " + std::to_string(p.recordings.size()) + "/" +
                     std::to_string(kSceneCount) + " usable scenes; flagged non-trainable"});
            ds.non_trainable_ids.push_back(p.patient_id);
        }
        ds.patients.push_back(std::move(p));
    }
    return ds;
}

void save_dataset(const Dataset& ds, const fs::path& root) {
    fs::create_directories(root / "signals");

    ordered_json manifest;
    // All recordings in one dataset share a rate; take it from the first.
    double sample_rate_hz = 50.0;
    for (const auto& p : ds.patients)
        if (!p.recordings.empty()) {
            sample_rate_hz = p.recordings.begin()->second.sample_rate_hz;
            break;
        }
    manifest["sample_rate_hz"] = sample_rate_hz;
    manifest["patients"] = ordered_json::array();

    for (const PatientRecord& p : ds.patients) {
        ordered_json entry;
        entry["patient_id"] = p.patient_id;
        entry["label"] = label_name(p.label);
        entry["disease_class"] = disease_name(p.disease_class);
        entry["age"] = p.age;
        entry["sex"] = std::string(1, p.sex);
        entry["height_cm"] = p.height_cm;
        entry["weight_kg"] = p.weight_kg;

        ordered_json scenes = ordered_json::object();
        for (Scene s : kSceneOrder) {
            const auto it = p.recordings.find(s);
            if (it == p.recordings.end()) continue;
            const std::string rel = std::string("signals/") + p.patient_id + "_" + scene_name(s) +
                                    ".csv";
            write_signal_csv(root / rel, it->second);
            scenes[scene_name(s)] = rel;
        }
        entry["scenes"] = std::move(scenes);
        manifest["patients"].push_back(std::move(entry));
    }
    write_text(root / "manifest.json", manifest.dump(2) + "\n");
}

// ============================================================================
// Ground-truth sidecar
// ============================================================================

void save_ground_truth(const GroundTruth& gt, const fs::path& root) {
    ordered_json j;
    for (const auto& [pid, per_scene] : gt.maxima) {
        ordered_json scenes = ordered_json::object();
        for (std::size_t s = 0; s < kSceneCount; ++s)
            scenes[scene_name(kSceneOrder[s])] = per_scene[s];
        j[pid] = std::move(scenes);
    }
    write_text(root / "ground_truth.json", j.dump(2) + "\n");
}

GroundTruth load_ground_truth(const fs::path& root) {
    GroundTruth gt;
    const fs::path p = root / "ground_truth.json";
    if (!fs::exists(p)) return gt;

    const ordered_json j = read_json(p);
    for (const auto& [pid, scenes] : j.items()) {
        auto& per_scene = gt.maxima[pid];
        for (std::size_t s = 0; s < kSceneCount; ++s) {
            const char* name = scene_name(kSceneOrder[s]);
            if (scenes.contains(name)) per_scene[s] = scenes[name].get<std::vector<int>>();
        }
    }
    return gt;
}

// ============================================================================
// Cycle archive
// ============================================================================

namespace {

std::string cycle_header() {
    std::string h;
    for (std::size_t s = 0; s < kSceneCount; ++s)
        for (std::size_t c = 0; c < kChannelCount; ++c) {
            if (!h.empty()) h += ',';
            h += scene_name(kSceneOrder[s]);
            h += '_';
            h += kChannelNames[c];
        }
    return h;
}

}  // namespace

void save_examples(const std::vector<PatientExample>& examples, const fs::path& root) {
    fs::create_directories(root / "cycles");

    ordered_json index;
    index["cycle_len"] = kCycleLen;
    index["examples"] = ordered_json::array();
    const std::string header = cycle_header();

    for (const PatientExample& ex : examples) {
        const std::string rel = std::string("cycles/") + ex.patient_id + "_c" +
                                std::to_string(ex.cycle_index) + ".csv";

        std::string csv;
        csv.reserve(static_cast<std::size_t>(kCycleLen) * kSceneCount * kChannelCount * 16);
        csv += header;
        csv += '\n';
        for (int row = 0; row < kCycleLen; ++row) {
            bool first = true;
            for (std::size_t s = 0; s < kSceneCount; ++s)
                for (std::size_t c = 0; c < kChannelCount; ++c) {
                    if (!first) csv += ',';
                    first = false;
                    csv += format_double(ex.scenes[s].ch[c][static_cast<std::size_t>(row)]);
                }
            csv += '\n';
        }
        write_text(root / rel, csv);

        ordered_json entry;
        entry["patient_id"] = ex.patient_id;
        entry["label"] = label_name(ex.label);
        entry["cycle_index"] = ex.cycle_index;
        entry["age"] = ex.age;
        entry["height_cm"] = ex.height_cm;
        entry["weight_kg"] = ex.weight_kg;
        entry["file"] = rel;
        ordered_json bounds = ordered_json::array();
        ordered_json windows = ordered_json::array();
        for (std::size_t s = 0; s < kSceneCount; ++s) {
            bounds.push_back(ex.scenes[s].phase_bound);
            windows.push_back({ex.scenes[s].source_window.first,
                               ex.scenes[s].source_window.second});
        }
        entry["phase_bounds"] = std::move(bounds);
        entry["source_windows"] = std::move(windows);
        index["examples"].push_back(std::move(entry));
    }
    write_text(root / "index.json", index.dump(2) + "\n");
}

std::vector<PatientExample> load_examples(const fs::path& root) {
    const fs::path index_path = root / "index.json";
    if (!fs::exists(index_path)) throw IoError("cycle index not found: " + index_path.string());
    const ordered_json index = read_json(index_path);

    const int cycle_len = index.value("cycle_len", kCycleLen);
    require(cycle_len == kCycleLen, "load_examples: unsupported cycle length");

    std::vector<PatientExample> out;
    const std::string expected_header = cycle_header();

    for (const auto& entry : index.at("examples")) {
        PatientExample ex;
        ex.patient_id = entry.at("patient_id").get<std::string>();
        const auto label = parse_label(entry.at("label").get<std::string>());
        if (!label) throw IoError("bad label for " + ex.patient_id);
        ex.label = *label;
        ex.cycle_index = entry.at("cycle_index").get<int>();
        ex.age = entry.at("age").get<double>();
        ex.height_cm = entry.at("height_cm").get<double>();
        ex.weight_kg = entry.at("weight_kg").get<double>();

        const std::string text = read_text(root / entry.at("file").get<std::string>());
        std::size_t pos = 0;
        int row = -1;  // -1 = header pending
        while (pos < text.size()) {
            std::size_t eol = text.find('\n', pos);
            if (eol == std::string::npos) eol = text.size();
            const std::string_view line = chomp(std::string_view(text).substr(pos, eol - pos));
            pos = eol + 1;
            if (line.empty()) continue;
            if (row < 0) {
                if (line != expected_header)
                    throw IoError("unexpected cycle header for " + ex.patient_id);
                for (std::size_t s = 0; s < kSceneCount; ++s) {
                    ex.scenes[s].scene = kSceneOrder[s];
                    for (auto& chv : ex.scenes[s].ch) chv.assign(kCycleLen, 0.0);
                }
                row = 0;
                continue;
            }
            if (row >= kCycleLen) throw IoError("too many rows in cycle file for " + ex.patient_id);
            const auto fields = split_csv(line);
            if (fields.size() != kSceneCount * kChannelCount)
                throw IoError("bad column count in cycle file for " + ex.patient_id);
            for (std::size_t s = 0; s < kSceneCount; ++s)
                for (std::size_t c = 0; c < kChannelCount; ++c)
                    ex.scenes[s].ch[c][static_cast<std::size_t>(row)] =
                        parse_double(fields[s * kChannelCount + c]);
            ++row;
        }
        if (row != kCycleLen) throw IoError("short cycle file for " + ex.patient_id);

        const auto& bounds = entry.at("phase_bounds");
        const auto& windows = entry.at("source_windows");
        require(bounds.size() == kSceneCount && windows.size() == kSceneCount,
                "load_examples: malformed index entry");
        for (std::size_t s = 0; s < kSceneCount; ++s) {
            ex.scenes[s].phase_bound = bounds[s].get<int>();
            ex.scenes[s].source_window = {windows[s][0].get<int>(), windows[s][1].get<int>()};
            ex.scenes[s].validate();
        }
        out.push_back(std::move(ex));
    }
    return out;
}

}  // namespace cardio::io
