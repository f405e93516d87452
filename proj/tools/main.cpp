// cardioscreen: command-line front end for the screening pipeline.
// Orchestrates synthesis, preprocessing, training, cross-validation, and
// report rendering; every run leaves a manifest with the resolved config.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cardio/common.hpp"
#include "cardio/data_model.hpp"
#include "cardio/dataset_io.hpp"
#include "cardio/dsp.hpp"
#include "cardio/eval.hpp"
#include "cardio/hpo.hpp"
#include "cardio/nn.hpp"
#include "cardio/svg.hpp"
#include "cardio/synth.hpp"
#include "cardio/training.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;
using namespace cardio;

namespace {

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

struct GlobalArgs {
    std::uint64_t seed = 0;
    int threads = 0;  // 0 = automatic; execution is sequential for determinism
    bool verbose = false;
    std::string out;
};

void write_text(const fs::path& file, const std::string& content) {
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
    std::ofstream os(file, std::ios::binary);
    if (!os) throw IoError("cannot write " + file.string());
    os << content;
    if (!os) throw IoError("write failed: " + file.string());
}

ordered_json manifest_base(const std::string& subcommand, const GlobalArgs& g) {
    ordered_json j;
    j["tool"] = "cardioscreen";
    j["tool_version"] = kToolVersion;
    j["subcommand"] = subcommand;
    j["seed"] = g.seed;
    j["threads"] = g.threads;
    return j;
}

void write_manifest(const fs::path& file, const ordered_json& j) {
    write_text(file, j.dump(1) + "\n");
}

ordered_json load_json_file(const fs::path& file) {
    std::ifstream is(file, std::ios::binary);
    if (!is) throw IoError("cannot read " + file.string());
    try {
        return ordered_json::parse(is);
    } catch (const std::exception& e) {
        throw IoError("malformed JSON in " + file.string() + ": " + e.what());
    }
}

void note(const GlobalArgs& g, const std::string& line) {
    if (g.verbose) std::cerr << line << "\n";
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthArgs {
    int n_healthy = 10;
    int n_nonhealthy = 10;
    double separation = 1.0;
    double noise = 0.05;
    double rate_lo = 0.20;
    double rate_hi = 0.30;
};

int run_synth(const GlobalArgs& g, const SynthArgs& a) {
    synth::CohortSpec spec;
    spec.n_healthy = a.n_healthy;
    spec.n_nonhealthy = a.n_nonhealthy;
    spec.class_separation = a.separation;
    spec.noise_std = a.noise;
    spec.rate_h = {a.rate_lo, a.rate_hi};
    spec.rate_nh = {a.rate_lo, a.rate_hi};
    spec.seed = g.seed;
    spec.validate();

    const auto cohort = synth::generate_cohort(spec);
    const fs::path out(g.out);
    io::save_dataset(cohort.dataset, out);
    io::save_ground_truth(cohort.ground_truth, out);

    ordered_json m = manifest_base("synth", g);
    m["config"] = {{"n_healthy", a.n_healthy},     {"n_nonhealthy", a.n_nonhealthy},
                   {"separation", a.separation},   {"noise", a.noise},
                   {"rate_lo", a.rate_lo},         {"rate_hi", a.rate_hi},
                   {"out", out.string()}};
    write_manifest(out / "run_manifest.json", m);
    note(g, "synth: wrote " + std::to_string(cohort.dataset.size()) + " patients to " +
                out.string());
    return 0;
}

// ---------------------------------------------------------------------------
// preprocess
// ---------------------------------------------------------------------------

struct PreprocessArgs {
    std::string input;
    std::string output;
    dsp::DspConfig cfg;
};

ordered_json dsp_json(const dsp::DspConfig& cfg) {
    return {{"cutoff_hz", cfg.cutoff_hz},
            {"trim_s", cfg.trim_s},
            {"target_len", cfg.target_len},
            {"min_distance_s", cfg.min_distance_s},
            {"min_prominence", cfg.min_prominence_iqr}};
}

int run_preprocess(const GlobalArgs& g, const PreprocessArgs& a) {
    const Dataset ds = io::load_dataset(a.input);
    for (const auto& d : ds.diagnostics) note(g, "load: " + format_diagnostic(d));

    const auto pre = dsp::preprocess_dataset(ds, a.cfg);
    for (const auto& d : pre.diagnostics) note(g, "preprocess: " + format_diagnostic(d));
    for (const auto& id : pre.flagged_ids)
        std::cerr << "warning: no usable cycles for patient " << id << "\n";

    const fs::path out(a.output);
    io::save_examples(pre.examples, out);

    ordered_json m = manifest_base("preprocess", g);
    m["config"] = dsp_json(a.cfg);
    m["config"]["input"] = a.input;
    m["config"]["output"] = a.output;
    m["flagged_ids"] = pre.flagged_ids;
    write_manifest(out / "run_manifest.json", m);
    note(g, "preprocess: wrote " + std::to_string(pre.examples.size()) + " cycle tuples to " +
                out.string());
    return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string data;
    std::string model_config;
    std::string train_config;
    double val_fraction = 0.25;
};

void read_model_config(const fs::path& file, nn::EncoderConfig& enc, nn::HeadConfig& head) {
    const auto j = load_json_file(file);
    if (j.contains("family")) enc.family = nn::parse_family(j["family"].get<std::string>());
    enc.hidden = j.value("hidden", enc.hidden);
    enc.layers = j.value("layers", enc.layers);
    enc.shared_across_scenes = j.value("shared_across_scenes", enc.shared_across_scenes);
    if (j.contains("head")) head.hidden_sizes = j["head"].get<std::vector<int>>();
}

train::TrainConfig read_train_config(const fs::path& file) {
    train::TrainConfig cfg;
    const auto j = load_json_file(file);
    cfg.max_epochs = j.value("max_epochs", cfg.max_epochs);
    cfg.patience = j.value("patience", cfg.patience);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
    if (j.contains("optimizer"))
        cfg.optimizer = train::parse_optimizer(j["optimizer"].get<std::string>());
    cfg.seed = j.value("seed", cfg.seed);
    cfg.gradient_clip_norm = j.value("gradient_clip_norm", cfg.gradient_clip_norm);
    return cfg;
}

ordered_json encoder_json(const nn::EncoderConfig& enc, const nn::HeadConfig& head) {
    return {{"family", nn::family_name(enc.family)},
            {"hidden", enc.hidden},
            {"layers", enc.layers},
            {"shared_across_scenes", enc.shared_across_scenes},
            {"head", head.hidden_sizes}};
}

ordered_json tcfg_json(const train::TrainConfig& cfg) {
    return {{"max_epochs", cfg.max_epochs},
            {"patience", cfg.patience},
            {"batch_size", cfg.batch_size},
            {"learning_rate", cfg.learning_rate},
            {"optimizer", train::optimizer_name(cfg.optimizer)},
            {"seed", cfg.seed},
            {"gradient_clip_norm", cfg.gradient_clip_norm}};
}

int run_train(const GlobalArgs& g, const TrainArgs& a) {
    const auto examples = io::load_examples(a.data);
    require(!examples.empty(), "train: no cycle tuples under " + a.data);

    nn::EncoderConfig enc;
    nn::HeadConfig head;
    if (!a.model_config.empty()) read_model_config(a.model_config, enc, head);
    train::TrainConfig tcfg;
    if (!a.train_config.empty()) tcfg = read_train_config(a.train_config);
    tcfg.seed = g.seed;

    // Patient-level validation split, stratified by label.
    std::vector<PatientRecord> stubs;
    std::set<std::string> seen;
    for (const auto& ex : examples) {
        if (seen.insert(ex.patient_id).second) {
            PatientRecord p;
            p.patient_id = ex.patient_id;
            p.label = ex.label;
            stubs.push_back(p);
        }
    }
    std::vector<std::string> train_ids, val_ids;
    if (a.val_fraction > 0.0) {
        std::vector<const PatientRecord*> ptrs;
        for (const auto& p : stubs) ptrs.push_back(&p);
        Rng rng(mix_seed(g.seed, 0x73706c69ULL));
        std::tie(train_ids, val_ids) = eval::stratified_split(ptrs, a.val_fraction, rng);
    } else {
        for (const auto& p : stubs) train_ids.push_back(p.patient_id);
    }
    std::vector<PatientExample> tr, vl;
    const std::set<std::string> val_set(val_ids.begin(), val_ids.end());
    for (const auto& ex : examples)
        (val_set.count(ex.patient_id) ? vl : tr).push_back(ex);

    const auto res = train::fit(tr, vl, enc, head, tcfg);
    for (const auto& w : res.history.warnings) std::cerr << "warning: " << w << "\n";

    const fs::path ckpt(g.out);
    nn::save_checkpoint(ckpt, res.net, res.standardizer);

    std::ostringstream hist;
    hist << "epoch  train_loss  train_acc  val_loss  val_acc\n";
    for (const auto& ep : res.history.epochs) {
        hist << ep.epoch << "  " << io::format_double(ep.train_loss) << "  "
             << io::format_double(ep.train_acc) << "  "
             << (ep.val_loss ? io::format_double(*ep.val_loss) : "-") << "  "
             << (ep.val_acc ? io::format_double(*ep.val_acc) : "-") << "\n";
    }
    write_text(fs::path(g.out + ".history.txt"), hist.str());

    ordered_json m = manifest_base("train", g);
    m["config"] = {{"data", a.data},
                   {"val_fraction", a.val_fraction},
                   {"train_patients", train_ids},
                   {"val_patients", val_ids},
                   {"encoder", encoder_json(enc, head)},
                   {"training", tcfg_json(tcfg)},
                   {"out", g.out}};
    write_manifest(fs::path(g.out + ".manifest.json"), m);
    note(g, "train: best epoch " + std::to_string(res.history.best_epoch) + ", checkpoint " +
                g.out);
    return 0;
}

// ---------------------------------------------------------------------------
// loocv
// ---------------------------------------------------------------------------

struct LoocvArgs {
    std::string data;
    std::string model_space;
    int seeds = 4;
    int trials = 5;
    double val_fraction = 0.25;
    int max_epochs = 300;
    int patience = 15;
    int batch_size = 16;
    std::string optimizer = "adam";
};

hpo::SearchSpace read_space(const fs::path& file) {
    hpo::SearchSpace s;
    const auto j = load_json_file(file);
    if (j.contains("hidden")) s.hidden = j["hidden"].get<std::vector<int>>();
    if (j.contains("layers")) s.layers = j["layers"].get<std::vector<int>>();
    if (j.contains("families")) {
        s.families.clear();
        for (const auto& name : j["families"])
            s.families.push_back(nn::parse_family(name.get<std::string>()));
    }
    s.lr_min = j.value("lr_min", s.lr_min);
    s.lr_max = j.value("lr_max", s.lr_max);
    if (j.contains("head_presets"))
        s.head_presets = j["head_presets"].get<std::vector<std::string>>();
    s.shared_across_scenes = j.value("shared_across_scenes", s.shared_across_scenes);
    return s;
}

ordered_json space_json(const hpo::SearchSpace& s) {
    ordered_json families = ordered_json::array();
    for (const auto f : s.families) families.push_back(nn::family_name(f));
    return {{"hidden", s.hidden},
            {"layers", s.layers},
            {"families", families},
            {"lr_min", s.lr_min},
            {"lr_max", s.lr_max},
            {"head_presets", s.head_presets},
            {"shared_across_scenes", s.shared_across_scenes}};
}

int run_loocv(const GlobalArgs& g, const LoocvArgs& a) {
    require(a.seeds >= 1, "loocv: --seeds must be >= 1");
    const Dataset ds = io::load_dataset(a.data);
    for (const auto& d : ds.diagnostics) note(g, "load: " + format_diagnostic(d));

    eval::EvalConfig cfg;
    cfg.seeds.clear();
    for (int i = 1; i <= a.seeds; ++i) cfg.seeds.push_back(g.seed + static_cast<std::uint64_t>(i));
    if (!a.model_space.empty()) cfg.space = read_space(a.model_space);
    cfg.space.validate();
    cfg.trials = a.trials;
    cfg.val_fraction = a.val_fraction;
    cfg.tcfg.max_epochs = a.max_epochs;
    cfg.tcfg.patience = a.patience;
    cfg.tcfg.batch_size = a.batch_size;
    cfg.tcfg.optimizer = train::parse_optimizer(a.optimizer);
    cfg.tcfg.validate();

    ordered_json m = manifest_base("loocv", g);
    m["config"] = {{"data", a.data},
                   {"seeds", cfg.seeds},
                   {"trials", cfg.trials},
                   {"val_fraction", cfg.val_fraction},
                   {"space", space_json(cfg.space)},
                   {"training", tcfg_json(cfg.tcfg)},
                   {"dsp", dsp_json(cfg.dsp)},
                   {"out", g.out}};

    note(g, "loocv: " + std::to_string(ds.size()) + " patients, " +
                std::to_string(cfg.seeds.size()) + " seeds, " + std::to_string(cfg.trials) +
                " trials per fold");
    train::SplitAudit audit;
    const auto report = eval::run_full_eval(ds, cfg, &audit);
    eval::write_report(g.out, report, m.dump(1) + "\n");

    if (g.verbose) {
        for (const auto& sr : report.seeds) {
            std::ostringstream os;
            os << "loocv: seed " << sr.seed << " accuracy "
               << (sr.metrics.accuracy ? io::format_double(*sr.metrics.accuracy) : "absent");
            note(g, os.str());
        }
    }
    return 0;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

struct ReportArgs {
    std::string data;
    std::string summary;
    std::string patient;
};

void render_filter_response(const fs::path& file) {
    const int n = 1000;
    const double sr = 50.0;
    const dsp::FilterSpec spec{0.7, sr};
    std::vector<std::pair<double, double>> gains;
    for (int k = 1; k <= 40; ++k) {
        const double f = static_cast<double>(k) * sr / n;  // bin-aligned sweep
        std::vector<double> sig(n);
        for (int i = 0; i < n; ++i)
            sig[static_cast<std::size_t>(i)] =
                std::sin(2.0 * M_PI * f * static_cast<double>(i) / sr);
        const auto out = dsp::lowpass_fft(sig, spec);
        double in_rms = 0.0, out_rms = 0.0;
        for (int i = 0; i < n; ++i) {
            in_rms += sig[static_cast<std::size_t>(i)] * sig[static_cast<std::size_t>(i)];
            out_rms += out[static_cast<std::size_t>(i)] * out[static_cast<std::size_t>(i)];
        }
        gains.emplace_back(f, std::sqrt(out_rms / in_rms));
    }

    const double w = 640, h = 360, lpad = 56, rpad = 16, tpad = 24, bpad = 44;
    const double fmax = gains.back().first;
    svg::Svg img(w, h);
    img.rect(0, 0, w, h, "#ffffff");
    auto xm = [&](double f) { return lpad + (w - lpad - rpad) * f / fmax; };
    auto ym = [&](double gain) { return h - bpad - (h - tpad - bpad) * gain; };
    img.line(lpad, h - bpad, w - rpad, h - bpad, "#333333", 1.0);
    img.line(lpad, tpad, lpad, h - bpad, "#333333", 1.0);
    for (double f = 0.5; f <= fmax + 1e-9; f += 0.5) {
        img.line(xm(f), h - bpad, xm(f), h - bpad + 4, "#333333", 1.0);
        std::ostringstream lab;
        lab << f;
        img.text(xm(f), h - bpad + 16, lab.str(), 9.0, "middle");
    }
    img.text(lpad - 8, ym(0.0) + 3, "0", 9.0, "end");
    img.text(lpad - 8, ym(1.0) + 3, "1", 9.0, "end");
    img.line(xm(0.7), tpad, xm(0.7), h - bpad, "#cc3333", 1.0);
    img.text(xm(0.7) + 4, tpad + 10, "0.7 Hz cutoff", 9.0);
    std::vector<std::pair<double, double>> pts;
    for (const auto& [f, gain] : gains) pts.emplace_back(xm(f), ym(gain));
    img.polyline(pts, "#2255aa", 1.5);
    img.text(w / 2, h - 8, "frequency (Hz)", 10.0, "middle");
    img.text(w / 2, 14, "measured low-pass magnitude response", 11.0, "middle");
    img.save(file);
}

void render_segmentation(const PatientRecord& patient, const dsp::DspConfig& cfg,
                         const fs::path& file) {
    const RawRecording& rec = patient.recordings.at(Scene::Lx1);
    const RawRecording trimmed = dsp::trim_transient(rec, cfg.trim_s);
    const auto gy_full = dsp::lowpass_fft(rec.ch[kGyroY], {cfg.cutoff_hz, rec.sample_rate_hz});
    const std::size_t drop = rec.samples() - trimmed.samples();
    const std::vector<double> gy(gy_full.begin() + static_cast<std::ptrdiff_t>(drop),
                                 gy_full.end());
    const int min_dist = std::max(
        1, static_cast<int>(std::lround(cfg.min_distance_s * trimmed.sample_rate_hz)));
    const auto peaks =
        dsp::detect_peaks(gy, min_dist, dsp::prominence_threshold(gy, cfg.min_prominence_iqr));

    const auto& raw = trimmed.ch[kGyroY];
    double lo = raw[0], hi = raw[0];
    for (double v : raw) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    for (double v : gy) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (hi - lo < 1e-12) hi = lo + 1.0;

    const double w = 840, h = 320, lpad = 16, rpad = 16, tpad = 28, bpad = 20;
    const double n = static_cast<double>(raw.size());
    svg::Svg img(w, h);
    img.rect(0, 0, w, h, "#ffffff");
    auto xm = [&](double i) { return lpad + (w - lpad - rpad) * i / (n - 1); };
    auto ym = [&](double v) { return tpad + (h - tpad - bpad) * (hi - v) / (hi - lo); };

    // Alternate shading marks the maxima-to-maxima windows.
    for (std::size_t k = 0; k + 1 < peaks.maxima.size(); k += 2)
        img.rect(xm(peaks.maxima[k]), tpad, xm(peaks.maxima[k + 1]) - xm(peaks.maxima[k]),
                 h - tpad - bpad, "#eef3fb");
    std::vector<std::pair<double, double>> raw_pts, filt_pts;
    for (std::size_t i = 0; i < raw.size(); ++i) raw_pts.emplace_back(xm(i), ym(raw[i]));
    for (std::size_t i = 0; i < gy.size(); ++i) filt_pts.emplace_back(xm(i), ym(gy[i]));
    img.polyline(raw_pts, "#bbbbbb", 0.8);
    img.polyline(filt_pts, "#2255aa", 1.5);
    for (int p : peaks.maxima) img.line(xm(p), tpad, xm(p), h - bpad, "#cc3333", 1.0);
    for (int p : peaks.minima) img.line(xm(p), ym(gy[p]) - 4, xm(p), ym(gy[p]) + 4, "#33aa55", 1.5);
    img.text(lpad, 16, patient.patient_id + "  gyro-y  raw (grey), filtered (blue), maxima (red)",
             10.0);
    img.save(file);
}

int run_report(const GlobalArgs& g, const ReportArgs& a) {
    const fs::path out(g.out);
    fs::create_directories(out);
    render_filter_response(out / "filter_response.svg");

    const Dataset ds = io::load_dataset(a.data);
    require(!ds.patients.empty(), "report: dataset is empty");
    const PatientRecord* patient = &ds.patients.front();
    if (!a.patient.empty()) {
        patient = ds.find(a.patient);
        require(patient != nullptr, "report: no such patient " + a.patient);
    }
    dsp::DspConfig dcfg;
    render_segmentation(*patient, dcfg, out / ("segmentation_" + patient->patient_id + ".svg"));

    std::vector<std::string> heatmaps;
    if (!a.summary.empty()) {
        const auto j = load_json_file(fs::path(a.summary) / "summary.json");
        for (const auto& js : j["seeds"]) {
            eval::HeatmapGrid grid;
            for (const auto& jo : js["outcomes"]) {
                grid.patient_ids.push_back(jo["patient_id"].get<std::string>());
                grid.probs.push_back(jo["cycle_probs"].get<std::vector<double>>());
                const auto truth = parse_label(jo["truth"].get<std::string>());
                require(truth.has_value(), "report: bad truth label in summary");
                grid.truth.push_back(*truth);
            }
            const std::string stem = "heatmap_seed" + std::to_string(js["seed"].get<std::uint64_t>());
            eval::export_heatmap(grid, 4, out / (stem + ".csv"), out / (stem + ".svg"));
            heatmaps.push_back(stem + ".svg");
        }
    }

    ordered_json m = manifest_base("report", g);
    m["config"] = {{"data", a.data},
                   {"summary", a.summary},
                   {"patient", patient->patient_id},
                   {"out", g.out}};
    m["artifacts"] = {{"filter_response", "filter_response.svg"},
                      {"segmentation", "segmentation_" + patient->patient_id + ".svg"},
                      {"heatmaps", heatmaps}};
    write_manifest(out / "run_manifest.json", m);
    note(g, "report: artifacts under " + out.string());
    return 0;
}

// ---------------------------------------------------------------------------
// gradcheck
// ---------------------------------------------------------------------------

PatientExample random_example(int m, std::uint64_t seed) {
    Rng rng(seed);
    PatientExample ex;
    ex.patient_id = "G";
    ex.label = seed % 2 ? Label::NH : Label::H;
    for (std::size_t s = 0; s < kSceneCount; ++s) {
        ex.scenes[s].scene = kSceneOrder[s];
        for (int c = 0; c < kChannelCount; ++c) {
            auto& v = ex.scenes[s].ch[static_cast<std::size_t>(c)];
            v.resize(static_cast<std::size_t>(m));
            for (auto& x : v) x = rng.uniform(-1.0, 1.0);
        }
    }
    return ex;
}

double gradcheck_one(std::uint64_t seed, int m, double step) {
    nn::EncoderConfig enc;
    enc.family = nn::Family::BiLstm;
    enc.hidden = 3;
    enc.layers = 2;
    nn::HeadConfig head;
    head.hidden_sizes = {4};
    auto net = nn::init_network(enc, head, seed);
    const auto ex = random_example(m, mix_seed(seed, 0x67636865ULL));
    const double y = seed % 2 ? 1.0 : 0.0;

    const auto analytic = nn::backward(ex, y, net);
    auto grad_views = nn::tensor_views(const_cast<nn::Network&>(analytic.grads));
    auto param_views = nn::tensor_views(net);

    double worst = 0.0;
    for (std::size_t t = 0; t < param_views.size(); ++t) {
        for (std::size_t i = 0; i < param_views[t].n; ++i) {
            double& theta = param_views[t].data[i];
            const double saved = theta;
            theta = saved + step;
            const double up = nn::bce_loss(nn::encode_scenes(ex, net), y);
            theta = saved - step;
            const double down = nn::bce_loss(nn::encode_scenes(ex, net), y);
            theta = saved;
            const double fd = (up - down) / (2.0 * step);
            const double a = grad_views[t].data[i];
            const double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-5});
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

int run_gradcheck(const GlobalArgs& g, int n_seeds) {
    const int m = 12;
    const double step = 1e-5, threshold = 1e-4;
    std::ostringstream os;
    os << "gradcheck  family BiLSTM  hidden 3  layers 2  head [4]  cycle_len " << m
       << "  step " << step << "\n";
    double worst = 0.0;
    for (int s = 1; s <= n_seeds; ++s) {
        const double rel = gradcheck_one(static_cast<std::uint64_t>(s) + g.seed, m, step);
        worst = std::max(worst, rel);
        os << "seed " << s + g.seed << "  worst_rel " << rel << "\n";
    }
    const bool pass = worst < threshold;
    os << "max_relative_error " << worst << "\n";
    os << "threshold " << threshold << "\n";
    os << (pass ? "PASS" : "FAIL") << "\n";
    std::cout << os.str();

    if (!g.out.empty()) {
        const fs::path out(g.out);
        write_text(out / "gradcheck.txt", os.str());
        ordered_json mjson = manifest_base("gradcheck", g);
        mjson["config"] = {{"seeds", n_seeds}, {"cycle_len", m}, {"step", step},
                           {"threshold", threshold}};
        mjson["max_relative_error"] = worst;
        write_manifest(out / "run_manifest.json", mjson);
    }
    return pass ? 0 : 1;
}

}  // namespace

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

int main(int argc, char** argv) {
    CLI::App app{"cardioscreen: synthetic cardiorespiratory screening pipeline"};
    app.set_version_flag("--version", kToolVersion);

    GlobalArgs g;
    app.add_option("--seed", g.seed, "Base seed for all randomness");
    app.add_option("--threads", g.threads,
                   "Fold-parallelism bound (0 = auto); execution is sequential");
    app.add_flag("--verbose", g.verbose, "Progress to stderr");
    app.add_option("--out", g.out, "Output directory or file");

    SynthArgs sa;
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic cohort");
    synth_cmd->fallthrough();
    synth_cmd->add_option("--n-healthy", sa.n_healthy);
    synth_cmd->add_option("--n-nonhealthy", sa.n_nonhealthy);
    synth_cmd->add_option("--separation", sa.separation, "Class separation in [0,1]");
    synth_cmd->add_option("--noise", sa.noise, "Additive noise sd");
    synth_cmd->add_option("--rate-lo", sa.rate_lo, "Breathing-rate range low (Hz)");
    synth_cmd->add_option("--rate-hi", sa.rate_hi, "Breathing-rate range high (Hz)");

    PreprocessArgs pa;
    auto* pre_cmd = app.add_subcommand("preprocess", "Segment a dataset into cycle tuples");
    pre_cmd->fallthrough();
    pre_cmd->add_option("--input", pa.input, "Dataset directory")->required();
    pre_cmd->add_option("--output", pa.output, "Cycle archive directory");
    pre_cmd->add_option("--cutoff-hz", pa.cfg.cutoff_hz);
    pre_cmd->add_option("--trim-s", pa.cfg.trim_s);
    pre_cmd->add_option("--target-len", pa.cfg.target_len);
    pre_cmd->add_option("--min-distance-s", pa.cfg.min_distance_s);
    pre_cmd->add_option("--min-prominence", pa.cfg.min_prominence_iqr);

    TrainArgs ta;
    auto* train_cmd = app.add_subcommand("train", "Train one model on a cycle archive");
    train_cmd->fallthrough();
    train_cmd->add_option("--data", ta.data, "Cycle archive directory")->required();
    train_cmd->add_option("--model-config", ta.model_config, "Encoder/head JSON file");
    train_cmd->add_option("--train-config", ta.train_config, "Training JSON file");
    train_cmd->add_option("--val-fraction", ta.val_fraction,
                          "Patient fraction for validation (0 disables early stopping)");

    LoocvArgs la;
    auto* loocv_cmd = app.add_subcommand("loocv", "Cross-validated evaluation with model search");
    loocv_cmd->fallthrough();
    loocv_cmd->add_option("--data", la.data, "Dataset directory")->required();
    loocv_cmd->add_option("--seeds", la.seeds, "Number of undersampling seeds");
    loocv_cmd->add_option("--trials", la.trials, "Model-selection budget per fold");
    loocv_cmd->add_option("--model-space", la.model_space, "Search-space JSON file");
    loocv_cmd->add_option("--val-fraction", la.val_fraction);
    loocv_cmd->add_option("--max-epochs", la.max_epochs);
    loocv_cmd->add_option("--patience", la.patience);
    loocv_cmd->add_option("--batch-size", la.batch_size);
    loocv_cmd->add_option("--optimizer", la.optimizer, "adam or sgd");

    ReportArgs ra;
    auto* report_cmd = app.add_subcommand("report", "Render pipeline plots");
    report_cmd->fallthrough();
    report_cmd->add_option("--data", ra.data, "Dataset directory")->required();
    report_cmd->add_option("--summary", ra.summary, "Evaluation report directory");
    report_cmd->add_option("--patient", ra.patient, "Patient for the segmentation overlay");

    int gradcheck_seeds = 5;
    auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient audit");
    grad_cmd->fallthrough();
    grad_cmd->add_option("--seeds", gradcheck_seeds, "Number of seeded networks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help() << std::flush;
        return 2;
    }

    try {
        if (*synth_cmd) {
            if (g.out.empty()) {
                std::cerr << "error: synth requires --out\n";
                return 2;
            }
            return run_synth(g, sa);
        }
        if (*pre_cmd) {
            if (pa.output.empty()) pa.output = g.out;  // --output and --out are aliases here
            if (pa.output.empty()) {
                std::cerr << "error: preprocess requires --output\n";
                return 2;
            }
            return run_preprocess(g, pa);
        }
        if (*train_cmd) {
            if (g.out.empty()) {
                std::cerr << "error: train requires --out (checkpoint path)\n";
                return 2;
            }
            return run_train(g, ta);
        }
        if (*loocv_cmd) {
            if (g.out.empty()) {
                std::cerr << "error: loocv requires --out\n";
                return 2;
            }
            return run_loocv(g, la);
        }
        if (*report_cmd) {
            if (g.out.empty()) {
                std::cerr << "error: report requires --out\n";
                return 2;
            }
            return run_report(g, ra);
        }
        if (*grad_cmd) return run_gradcheck(g, gradcheck_seeds);
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
