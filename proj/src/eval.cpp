#include "cardio/eval.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "cardio/dataset_io.hpp"
#include "cardio/svg.hpp"

namespace cardio::eval {

namespace {

using ordered_json = nlohmann::ordered_json;
using io::format_double;

std::optional<double> ratio(std::int64_t num, std::int64_t den) {
    if (den <= 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}

std::set<std::string> as_set(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

void write_text(const std::filesystem::path& file, const std::string& content) {
    std::ofstream os(file, std::ios::binary);
    if (!os) throw IoError("cannot write " + file.string());
    os << content;
    if (!os) throw IoError("write failed: " + file.string());
}

std::string fmt(const std::optional<double>& v) {
    return v ? format_double(*v) : std::string("absent");
}

// Patient-keyed example lookup that preserves a deterministic concatenation
// order (sorted patient id, then cycle order).
std::vector<PatientExample> collect(const std::map<std::string, std::vector<PatientExample>>& by_id,
                                    std::vector<std::string> ids) {
    std::sort(ids.begin(), ids.end());
    std::vector<PatientExample> out;
    for (const auto& id : ids) {
        const auto it = by_id.find(id);
        require(it != by_id.end(), "loocv: no examples for patient " + id);
        out.insert(out.end(), it->second.begin(), it->second.end());
    }
    return out;
}

ordered_json point_json(const hpo::ConfigPoint& pt) {
    return {{"hidden", pt.hidden},
            {"layers", pt.layers},
            {"family", nn::family_name(pt.family)},
            {"learning_rate", pt.learning_rate},
            {"head_preset", pt.head_preset}};
}

}  // namespace

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

Metrics compute_metrics(std::int64_t tp, std::int64_t tn, std::int64_t fp, std::int64_t fn) {
    require(tp >= 0 && tn >= 0 && fp >= 0 && fn >= 0, "compute_metrics: negative count");
    Metrics m;
    m.tp = tp;
    m.tn = tn;
    m.fp = fp;
    m.fn = fn;
    m.sensitivity = ratio(tp, tp + fn);
    m.specificity = ratio(tn, tn + fp);
    m.tnr = m.specificity;
    m.precision = ratio(tp, tp + fp);
    // Harmonic mean of precision and sensitivity, in count form so tp = 0
    // with errors present is a defined zero.
    m.f1 = ratio(2 * tp, 2 * tp + fp + fn);
    m.accuracy = ratio(tp + tn, tp + tn + fp + fn);
    return m;
}

// ---------------------------------------------------------------------------
// Undersampling
// ---------------------------------------------------------------------------

std::pair<Dataset, Dataset> undersample(const Dataset& ds, std::uint64_t seed) {
    std::vector<std::string> h_ids, nh_ids;
    for (const auto& p : ds.patients)
        (p.label == Label::H ? h_ids : nh_ids).push_back(p.patient_id);

    std::set<std::string> removed;
    if (h_ids.size() != nh_ids.size()) {
        auto& majority = h_ids.size() > nh_ids.size() ? h_ids : nh_ids;
        const std::size_t excess =
            majority.size() - std::min(h_ids.size(), nh_ids.size());
        Rng rng(mix_seed(seed, 0xba1a4cedULL));
        rng.shuffle(majority);
        removed.insert(majority.begin(), majority.begin() + static_cast<std::ptrdiff_t>(excess));
    }

    Dataset balanced, holdout;
    for (const auto& p : ds.patients)
        (removed.count(p.patient_id) ? holdout : balanced).patients.push_back(p);
    for (const auto& id : ds.non_trainable_ids) {
        if (removed.count(id))
            holdout.non_trainable_ids.push_back(id);
        else
            balanced.non_trainable_ids.push_back(id);
    }
    return {std::move(balanced), std::move(holdout)};
}

// ---------------------------------------------------------------------------
// Fold planning
// ---------------------------------------------------------------------------

void validate_fold(const FoldPlan& fold, const std::vector<std::string>& balanced_ids) {
    const auto train = as_set(fold.train_ids);
    const auto val = as_set(fold.val_ids);
    const auto hold = as_set(fold.excluded_holdout_ids);
    require(train.size() == fold.train_ids.size(), "fold: duplicate train id");
    require(val.size() == fold.val_ids.size(), "fold: duplicate val id");
    for (const auto& id : train) require(!val.count(id), "fold: train/val overlap at " + id);
    require(!train.count(fold.test_patient_id), "fold: test patient in train split");
    require(!val.count(fold.test_patient_id), "fold: test patient in val split");
    for (const auto& id : hold) {
        require(!train.count(id) && !val.count(id) && id != fold.test_patient_id,
                "fold: holdout patient leaked into the cohort: " + id);
    }
    std::set<std::string> all = train;
    all.insert(val.begin(), val.end());
    all.insert(fold.test_patient_id);
    require(all == as_set(balanced_ids), "fold: splits do not partition the cohort");
    require(all.size() == fold.train_ids.size() + fold.val_ids.size() + 1,
            "fold: split sizes do not add up");
}

std::pair<std::vector<std::string>, std::vector<std::string>> stratified_split(
    const std::vector<const PatientRecord*>& rest, double val_fraction, Rng& rng) {
    require(val_fraction > 0.0 && val_fraction < 1.0, "stratified_split: fraction in (0,1)");
    struct Side {
        std::vector<std::string> ids;
        std::size_t n_val = 0;
    };
    std::array<Side, 2> sides;  // H, NH
    std::size_t largest_n = 0;
    for (std::size_t k = 0; k < sides.size(); ++k) {
        Side& side = sides[k];
        const Label label = k == 0 ? Label::H : Label::NH;
        for (const auto* p : rest)
            if (p->label == label) side.ids.push_back(p->patient_id);
        if (side.ids.empty()) continue;
        const std::size_t n = side.ids.size();
        largest_n = std::max(largest_n, n);
        side.n_val = static_cast<std::size_t>(
            std::lround(val_fraction * static_cast<double>(n)));
        side.n_val = std::min(side.n_val, n - 1);  // never empty a class's train side
        rng.shuffle(side.ids);
    }
    // The training side must not carry a class-prior imbalance: a learner fed a
    // lopsided split drifts toward its majority class even when the classes are
    // indistinguishable, and in leave-one-out rotation that drift always points
    // away from the held-out patient. The over-represented class donates its
    // excess to validation, where imbalance only influences early stopping.
    const auto train_n = [&](std::size_t k) { return sides[k].ids.size() - sides[k].n_val; };
    if (!sides[0].ids.empty() && !sides[1].ids.empty()) {
        while (train_n(0) > train_n(1) && train_n(0) > 1) ++sides[0].n_val;
        while (train_n(1) > train_n(0) && train_n(1) > 1) ++sides[1].n_val;
    }
    std::vector<std::string> train, val;
    for (const Side& side : sides)
        for (std::size_t i = 0; i < side.ids.size(); ++i)
            (i < side.n_val ? val : train).push_back(side.ids[i]);
    if (val.empty() && largest_n >= 2) {
        // Tiny cohorts: move one training patient over so validation exists.
        val.push_back(train.back());
        train.pop_back();
    }
    std::sort(train.begin(), train.end());
    std::sort(val.begin(), val.end());
    return {train, val};
}

// ---------------------------------------------------------------------------
// LOOCV
// ---------------------------------------------------------------------------

SeedReport loocv(const Dataset& balanced, const hpo::SearchSpace& space,
                 const train::TrainConfig& tcfg, const LoocvConfig& cfg,
                 train::SplitAudit* audit) {
    require(balanced.size() >= 4, "loocv: need at least 4 patients to stratify");
    for (const auto& p : balanced.patients)
        require(balanced.is_trainable(p.patient_id),
                "loocv: non-trainable patient in cohort: " + p.patient_id);
    require(cfg.trials >= 1, "loocv: trials must be >= 1");

    const auto pre = dsp::preprocess_dataset(balanced, cfg.dsp);
    if (!pre.flagged_ids.empty()) {
        std::ostringstream os;
        os << "loocv: patients with no usable cycles:";
        for (const auto& id : pre.flagged_ids) os << ' ' << id;
        throw ContractError(os.str());
    }
    std::map<std::string, std::vector<PatientExample>> by_id;
    for (const auto& ex : pre.examples) by_id[ex.patient_id].push_back(ex);

    std::vector<std::string> balanced_ids;
    for (const auto& p : balanced.patients) balanced_ids.push_back(p.patient_id);

    SeedReport sr;
    sr.seed = cfg.seed;
    std::int64_t tp = 0, tn = 0, fp = 0, fn = 0;

    for (std::size_t i = 0; i < balanced.patients.size(); ++i) {
        const PatientRecord& test = balanced.patients[i];
        std::vector<const PatientRecord*> rest;
        for (std::size_t j = 0; j < balanced.patients.size(); ++j)
            if (j != i) rest.push_back(&balanced.patients[j]);

        Rng split_rng(mix_seed(cfg.seed, 0xf01d0000ULL + i));
        auto [train_ids, val_ids] = stratified_split(rest, cfg.val_fraction, split_rng);

        FoldPlan fold;
        fold.seed = cfg.seed;
        fold.test_patient_id = test.patient_id;
        fold.train_ids = train_ids;
        fold.val_ids = val_ids;
        validate_fold(fold, balanced_ids);

        const auto tr_x = collect(by_id, train_ids);
        const auto vl_x = collect(by_id, val_ids);

        // Fresh per-fold audit so the split tags can be checked in isolation.
        train::SplitAudit fold_audit;
        const auto search =
            hpo::run_search(tr_x, vl_x, space, cfg.trials, tcfg,
                            mix_seed(cfg.seed, 0x5eac0000ULL + i), {}, &fold_audit);
        fold_audit.record("test", test.patient_id);
        require(fold_audit.seen("train") == as_set(train_ids),
                "loocv: training accesses do not match the fold plan");
        require(fold_audit.seen("val") == as_set(val_ids),
                "loocv: validation accesses do not match the fold plan");
        require(fold_audit.disjoint("train", "test") && fold_audit.disjoint("val", "test"),
                "loocv: test patient leaked into an inner split");
        const auto fitted_ids = as_set(search.best_standardizer.fitted_patient_ids);
        require(fitted_ids == as_set(train_ids),
                "loocv: standardization statistics drew on the wrong patients");
        if (audit) {
            const std::string tag = "fold" + std::to_string(i);
            for (const auto& id : fold_audit.seen("train")) audit->record(tag + ".train", id);
            for (const auto& id : fold_audit.seen("val")) audit->record(tag + ".val", id);
            audit->record(tag + ".test", test.patient_id);
        }

        const auto preds = train::predict_cycles(search.best_net, search.best_standardizer,
                                                 test, cfg.dsp);
        require(!preds.no_cycles, "loocv: test patient yielded no cycles: " + test.patient_id);
        const auto agg = train::predict_patient(preds.probs);

        PatientOutcome out;
        out.patient_id = test.patient_id;
        out.truth = test.label;
        out.disease = test.disease_class;
        out.predicted = agg.label;
        out.confidence = agg.confidence;
        out.cycle_probs = preds.probs;
        sr.outcomes.push_back(std::move(out));

        if (test.label == Label::NH) {
            auto& row = sr.disease_table[test.disease_class];
            ++row.count;
            if (agg.label == Label::H) ++row.misclassified;
        }
        if (test.label == Label::NH && agg.label == Label::NH) ++tp;
        if (test.label == Label::NH && agg.label == Label::H) ++fn;
        if (test.label == Label::H && agg.label == Label::H) ++tn;
        if (test.label == Label::H && agg.label == Label::NH) ++fp;

        sr.folds.push_back(std::move(fold));
        sr.fold_trials.push_back(search.trials);
        sr.fold_best_trial.push_back(search.best_index);
    }

    sr.metrics = compute_metrics(tp, tn, fp, fn);
    require(sr.metrics.total() == static_cast<std::int64_t>(balanced.size()),
            "loocv: confusion counts do not cover the cohort");
    return sr;
}

std::optional<double> holdout_tnr(const nn::Network& net, const nn::Standardizer& st,
                                  const Dataset& holdout, const dsp::DspConfig& dsp_cfg) {
    if (holdout.patients.empty()) return std::nullopt;
    std::int64_t correct = 0;
    for (const auto& p : holdout.patients) {
        require(p.label == Label::H, "holdout_tnr: non-H patient in holdout: " + p.patient_id);
        const auto preds = train::predict_cycles(net, st, p, dsp_cfg);
        require(!preds.no_cycles, "holdout_tnr: no cycles for " + p.patient_id);
        if (train::predict_patient(preds.probs).label == Label::H) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(holdout.patients.size());
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

std::map<std::string, AggregateEntry> aggregate_metrics(const std::vector<SeedReport>& seeds) {
    const std::vector<std::string> names = {"sensitivity", "specificity", "precision",
                                            "f1",          "accuracy",    "tnr",
                                            "holdout_tnr"};
    std::map<std::string, std::vector<double>> values;
    std::map<std::string, int> absent;
    for (const auto& name : names) absent[name] = 0;
    for (const auto& sr : seeds) {
        // Recompute from the stored matrix rather than trusting cached fields.
        const Metrics m = compute_metrics(sr.metrics.tp, sr.metrics.tn, sr.metrics.fp,
                                          sr.metrics.fn);
        const std::map<std::string, std::optional<double>> row = {
            {"sensitivity", m.sensitivity}, {"specificity", m.specificity},
            {"precision", m.precision},     {"f1", m.f1},
            {"accuracy", m.accuracy},       {"tnr", m.tnr},
            {"holdout_tnr", sr.holdout_tnr}};
        for (const auto& [name, v] : row) {
            if (v)
                values[name].push_back(*v);
            else
                ++absent[name];
        }
    }
    std::map<std::string, AggregateEntry> out;
    for (const auto& name : names) {
        AggregateEntry e;
        e.present = static_cast<int>(values[name].size());
        e.absent = absent[name];
        if (e.present > 0) e.stat = mean_sd(values[name]);
        out[name] = e;
    }
    return out;
}

std::optional<double> median_cycle_sd(const std::vector<SeedReport>& seeds) {
    std::vector<double> sds;
    for (const auto& sr : seeds)
        for (const auto& out : sr.outcomes)
            if (!out.cycle_probs.empty()) sds.push_back(mean_sd(out.cycle_probs).sd);
    if (sds.empty()) return std::nullopt;
    std::sort(sds.begin(), sds.end());
    const std::size_t n = sds.size();
    return n % 2 == 1 ? sds[n / 2] : 0.5 * (sds[n / 2 - 1] + sds[n / 2]);
}

EvalReport run_full_eval(const Dataset& ds, const EvalConfig& cfg, train::SplitAudit* audit) {
    require(!cfg.seeds.empty(), "run_full_eval: need at least one seed");
    EvalReport report;
    for (const std::uint64_t seed : cfg.seeds) {
        auto [balanced, holdout] = undersample(ds, seed);
        LoocvConfig lcfg;
        lcfg.seed = seed;
        lcfg.trials = cfg.trials;
        lcfg.val_fraction = cfg.val_fraction;
        lcfg.dsp = cfg.dsp;
        SeedReport sr = loocv(balanced, cfg.space, cfg.tcfg, lcfg, audit);

        for (const auto& p : holdout.patients) sr.holdout_ids.push_back(p.patient_id);
        for (auto& fold : sr.folds) {
            fold.excluded_holdout_ids = sr.holdout_ids;
            std::vector<std::string> balanced_ids;
            for (const auto& p : balanced.patients) balanced_ids.push_back(p.patient_id);
            validate_fold(fold, balanced_ids);
        }

        if (!holdout.patients.empty()) {
            // One canonical model per seed: the first fold's winning
            // configuration retrained on that fold's TR+VL.
            const FoldPlan& f0 = sr.folds.front();
            const hpo::ConfigPoint best_pt =
                sr.fold_trials.front()[static_cast<std::size_t>(sr.fold_best_trial.front())]
                    .point;
            const auto pre = dsp::preprocess_dataset(balanced, cfg.dsp);
            std::map<std::string, std::vector<PatientExample>> by_id;
            for (const auto& ex : pre.examples) by_id[ex.patient_id].push_back(ex);
            std::vector<std::string> all_ids = f0.train_ids;
            all_ids.insert(all_ids.end(), f0.val_ids.begin(), f0.val_ids.end());
            const auto tr_x = collect(by_id, all_ids);
            train::TrainConfig tcfg2 = cfg.tcfg;
            tcfg2.learning_rate = best_pt.learning_rate;
            tcfg2.seed = mix_seed(seed, 0x401dULL);
            const auto fitres = train::fit(tr_x, {}, hpo::encoder_for(best_pt, cfg.space),
                                           hpo::head_for_preset(best_pt.head_preset), tcfg2);
            sr.holdout_tnr = holdout_tnr(fitres.net, fitres.standardizer, holdout, cfg.dsp);
            sr.holdout_config = best_pt;
        }
        report.seeds.push_back(std::move(sr));
    }

    report.aggregates = aggregate_metrics(report.seeds);
    report.median_cycle_sd = median_cycle_sd(report.seeds);
    for (std::size_t a = 0; a < report.seeds.size() && !report.identical_holdouts; ++a)
        for (std::size_t b = a + 1; b < report.seeds.size(); ++b)
            if (!report.seeds[a].holdout_ids.empty() &&
                as_set(report.seeds[a].holdout_ids) == as_set(report.seeds[b].holdout_ids)) {
                report.identical_holdouts = true;
                break;
            }
    return report;
}

// ---------------------------------------------------------------------------
// Artifacts
// ---------------------------------------------------------------------------

HeatmapGrid heatmap_grid(const SeedReport& sr) {
    HeatmapGrid g;
    for (const auto& out : sr.outcomes) {
        g.patient_ids.push_back(out.patient_id);
        g.probs.push_back(out.cycle_probs);
        g.truth.push_back(out.truth);
    }
    return g;
}

void export_heatmap(const HeatmapGrid& grid, int k, const std::filesystem::path& csv_path,
                    const std::filesystem::path& svg_path) {
    require(k >= 1, "export_heatmap: k must be >= 1");
    require(grid.patient_ids.size() == grid.probs.size() &&
                grid.patient_ids.size() == grid.truth.size(),
            "export_heatmap: ragged grid");
    const std::size_t n = grid.patient_ids.size();

    std::ostringstream csv;
    csv << "row";
    for (const auto& id : grid.patient_ids) csv << ',' << id;
    csv << '\n';
    for (int c = 0; c < k; ++c) {
        csv << "cycle_" << (c + 1);
        for (std::size_t p = 0; p < n; ++p) {
            csv << ',';
            if (static_cast<std::size_t>(c) < grid.probs[p].size())
                csv << format_double(grid.probs[p][static_cast<std::size_t>(c)]);
            else
                csv << "NA";  // explicit gap, not zero
        }
        csv << '\n';
    }
    csv << "truth";
    for (std::size_t p = 0; p < n; ++p) csv << ',' << label_name(grid.truth[p]);
    csv << '\n';
    write_text(csv_path, csv.str());

    const double cell_w = 26.0, cell_h = 20.0, left = 64.0, top = 54.0;
    svg::Svg img(left + cell_w * static_cast<double>(n) + 12.0,
                 top + cell_h * (k + 1) + 12.0);
    img.rect(0, 0, left + cell_w * static_cast<double>(n) + 12.0,
             top + cell_h * (k + 1) + 12.0, "#ffffff");
    for (std::size_t p = 0; p < n; ++p)
        img.text(left + cell_w * (static_cast<double>(p) + 0.5), top - 6.0, grid.patient_ids[p],
                 8.0, "middle");
    for (int c = 0; c < k; ++c)
        img.text(left - 6.0, top + cell_h * (c + 0.68), "cycle " + std::to_string(c + 1), 9.0,
                 "end");
    img.text(left - 6.0, top + cell_h * (k + 0.68), "truth", 9.0, "end");
    for (std::size_t p = 0; p < n; ++p) {
        const double x = left + cell_w * static_cast<double>(p);
        for (int c = 0; c < k; ++c) {
            const double y = top + cell_h * c;
            if (static_cast<std::size_t>(c) < grid.probs[p].size()) {
                const double v = grid.probs[p][static_cast<std::size_t>(c)];
                img.rect(x, y, cell_w, cell_h, svg::prob_color(v), "#dddddd", 0.5);
            } else {
                img.rect(x, y, cell_w, cell_h, "#f0f0f0", "#dddddd", 0.5);
                img.text(x + cell_w / 2, y + cell_h * 0.68, "-", 9.0, "middle");
            }
        }
        const double ty = top + cell_h * k;
        const bool nh = grid.truth[p] == Label::NH;
        img.rect(x, ty, cell_w, cell_h, nh ? svg::prob_color(1.0) : svg::prob_color(0.0),
                 "#999999", 0.8);
        img.text(x + cell_w / 2, ty + cell_h * 0.68, label_name(grid.truth[p]), 8.0, "middle");
    }
    img.save(svg_path);
}

void write_report(const std::filesystem::path& dir, const EvalReport& report,
                  const std::string& manifest_json) {
    std::filesystem::create_directories(dir);
    write_text(dir / "manifest.json", manifest_json);

    ordered_json j;
    j["tool_version"] = kToolVersion;
    ordered_json seeds = ordered_json::array();
    for (const auto& sr : report.seeds) {
        ordered_json js;
        js["seed"] = sr.seed;
        js["confusion"] = {{"tp", sr.metrics.tp},
                           {"tn", sr.metrics.tn},
                           {"fp", sr.metrics.fp},
                           {"fn", sr.metrics.fn}};
        ordered_json metrics;
        const std::vector<std::pair<std::string, std::optional<double>>> rows = {
            {"sensitivity", sr.metrics.sensitivity}, {"specificity", sr.metrics.specificity},
            {"precision", sr.metrics.precision},     {"f1", sr.metrics.f1},
            {"accuracy", sr.metrics.accuracy},       {"tnr", sr.metrics.tnr}};
        for (const auto& [name, v] : rows) metrics[name] = v ? ordered_json(*v) : ordered_json();
        js["metrics"] = metrics;
        js["holdout"] = {{"ids", sr.holdout_ids},
                         {"tnr", sr.holdout_tnr ? ordered_json(*sr.holdout_tnr) : ordered_json()},
                         {"config", sr.holdout_ids.empty() ? ordered_json()
                                                           : point_json(sr.holdout_config)}};
        ordered_json diseases = ordered_json::array();
        for (const auto& [dc, row] : sr.disease_table)
            diseases.push_back({{"disease", disease_name(dc)},
                                {"count", row.count},
                                {"misclassified", row.misclassified}});
        js["disease_table"] = diseases;
        ordered_json outs = ordered_json::array();
        for (const auto& out : sr.outcomes) {
            outs.push_back({{"patient_id", out.patient_id},
                            {"truth", label_name(out.truth)},
                            {"disease", disease_name(out.disease)},
                            {"predicted", label_name(out.predicted)},
                            {"confidence", out.confidence},
                            {"cycle_probs", out.cycle_probs}});
        }
        js["outcomes"] = outs;
        ordered_json folds = ordered_json::array();
        for (std::size_t i = 0; i < sr.folds.size(); ++i) {
            const auto& f = sr.folds[i];
            ordered_json jf = {{"test", f.test_patient_id},
                               {"train", f.train_ids},
                               {"val", f.val_ids}};
            ordered_json trials = ordered_json::array();
            for (const auto& t : sr.fold_trials[i]) {
                ordered_json jt = point_json(t.point);
                jt["index"] = t.index;
                jt["status"] =
                    t.status == hpo::Trial::Status::Completed ? "completed" : "failed";
                if (t.status == hpo::Trial::Status::Completed)
                    jt["objective"] = t.objective;
                else
                    jt["diagnostic"] = t.diagnostic;
                trials.push_back(jt);
            }
            jf["trials"] = trials;
            jf["best_trial"] = sr.fold_best_trial[i];
            folds.push_back(jf);
        }
        js["folds"] = folds;
        seeds.push_back(js);
    }
    j["seeds"] = seeds;
    ordered_json aggs;
    for (const auto& [name, e] : report.aggregates) {
        aggs[name] = {{"mean", e.present ? ordered_json(e.stat.mean) : ordered_json()},
                      {"sd", e.present ? ordered_json(e.stat.sd) : ordered_json()},
                      {"present", e.present},
                      {"absent", e.absent}};
    }
    j["aggregates"] = aggs;
    j["identical_holdouts"] = report.identical_holdouts;
    j["median_cycle_sd"] =
        report.median_cycle_sd ? ordered_json(*report.median_cycle_sd) : ordered_json();
    write_text(dir / "summary.json", j.dump(1) + "\n");

    for (const auto& sr : report.seeds) {
        std::ostringstream os;
        os << "seed " << sr.seed << "\n";
        os << "prediction\\truth  NH  H\n";
        os << "NH                " << sr.metrics.tp << "  " << sr.metrics.fp << "\n";
        os << "H                 " << sr.metrics.fn << "  " << sr.metrics.tn << "\n";
        os << "\n";
        os << "sensitivity " << fmt(sr.metrics.sensitivity) << "\n";
        os << "specificity " << fmt(sr.metrics.specificity) << "\n";
        os << "precision   " << fmt(sr.metrics.precision) << "\n";
        os << "f1          " << fmt(sr.metrics.f1) << "\n";
        os << "accuracy    " << fmt(sr.metrics.accuracy) << "\n";
        os << "holdout_tnr " << fmt(sr.holdout_tnr) << "\n";
        write_text(dir / ("confusion_seed" + std::to_string(sr.seed) + ".txt"), os.str());

        const auto grid = heatmap_grid(sr);
        export_heatmap(grid, 4, dir / ("heatmap_seed" + std::to_string(sr.seed) + ".csv"),
                       dir / ("heatmap_seed" + std::to_string(sr.seed) + ".svg"));
    }

    {
        std::ostringstream os;
        os << "metric  mean  sd  seeds_present  seeds_absent\n";
        for (const auto& [name, e] : report.aggregates) {
            os << name << "  ";
            if (e.present)
                os << format_double(e.stat.mean) << "  " << format_double(e.stat.sd);
            else
                os << "absent  absent";
            os << "  " << e.present << "  " << e.absent << "\n";
        }
        write_text(dir / "aggregate_metrics.txt", os.str());
    }
    {
        std::ostringstream os;
        os << "seed  disease  count  misclassified\n";
        for (const auto& sr : report.seeds)
            for (const auto& [dc, row] : sr.disease_table)
                os << sr.seed << "  " << disease_name(dc) << "  " << row.count << "  "
                   << row.misclassified << "\n";
        write_text(dir / "disease_table.txt", os.str());
    }
}

}  // namespace cardio::eval
