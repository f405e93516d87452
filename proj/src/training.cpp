#include "cardio/training.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

namespace cardio::train {

namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

double target_of(Label l) { return l == Label::NH ? 1.0 : 0.0; }

bool correct(double p, Label l) { return (p >= 0.5) == (l == Label::NH); }

std::vector<std::string> unique_ids(const std::vector<PatientExample>& xs) {
    std::vector<std::string> ids;
    for (const auto& x : xs)
        if (std::find(ids.begin(), ids.end(), x.patient_id) == ids.end())
            ids.push_back(x.patient_id);
    return ids;
}

// Copies all parameters into / out of one flat buffer (tensor_views order).
void snapshot(std::vector<nn::TensorView>& views, std::vector<double>& out) {
    std::size_t off = 0;
    for (const auto& v : views) {
        std::copy(v.data, v.data + v.n, out.begin() + static_cast<std::ptrdiff_t>(off));
        off += v.n;
    }
}

void restore(std::vector<nn::TensorView>& views, const std::vector<double>& in) {
    std::size_t off = 0;
    for (const auto& v : views) {
        std::copy(in.begin() + static_cast<std::ptrdiff_t>(off),
                  in.begin() + static_cast<std::ptrdiff_t>(off + v.n), v.data);
        off += v.n;
    }
}

}  // namespace

const char* optimizer_name(Optimizer o) { return o == Optimizer::Adam ? "adam" : "sgd"; }

Optimizer parse_optimizer(const std::string& name) {
    if (name == "adam") return Optimizer::Adam;
    if (name == "sgd") return Optimizer::Sgd;
    throw ContractError("unknown optimizer: " + name);
}

void TrainConfig::validate() const {
    require(max_epochs >= 1, "TrainConfig: max_epochs must be >= 1");
    require(patience >= 1, "TrainConfig: patience must be >= 1");
    require(patience < max_epochs, "TrainConfig: patience must be < max_epochs");
    require(batch_size >= 1, "TrainConfig: batch_size must be >= 1");
    require(learning_rate > 0.0, "TrainConfig: learning_rate must be positive");
    require(gradient_clip_norm > 0.0, "TrainConfig: gradient_clip_norm must be positive");
}

bool SplitAudit::disjoint(const std::string& a, const std::string& b) const {
    const auto& sa = seen(a);
    const auto& sb = seen(b);
    for (const auto& id : sa)
        if (sb.count(id)) return false;
    return true;
}

std::pair<double, double> evaluate(const nn::Network& net,
                                   const std::vector<PatientExample>& examples) {
    if (examples.empty()) return {0.0, 0.0};
    // Classes contribute equally regardless of their example counts. A split
    // can be lopsided by a patient (and patients differ in cycle counts), and
    // an example-weighted score would then reward leaning toward whichever
    // class happens to dominate — poison for early stopping, which picks the
    // epoch with the best value of this number.
    std::array<double, 2> loss{}, acc{}, n{};
    for (const auto& ex : examples) {
        const std::size_t k = ex.label == Label::NH ? 1 : 0;
        const double p = nn::encode_scenes(ex, net);
        loss[k] += nn::bce_loss(p, target_of(ex.label));
        acc[k] += correct(p, ex.label) ? 1.0 : 0.0;
        n[k] += 1.0;
    }
    double mloss = 0.0, macc = 0.0, classes = 0.0;
    for (std::size_t k = 0; k < 2; ++k) {
        if (n[k] == 0.0) continue;
        mloss += loss[k] / n[k];
        macc += acc[k] / n[k];
        classes += 1.0;
    }
    return {mloss / classes, macc / classes};
}

FitResult fit(const std::vector<PatientExample>& train, const std::vector<PatientExample>& val,
              const nn::EncoderConfig& enc, const nn::HeadConfig& head, const TrainConfig& cfg,
              SplitAudit* audit) {
    cfg.validate();
    require(!train.empty(), "fit: training set is empty");
    for (const auto& t : unique_ids(train))
        for (const auto& v : unique_ids(val))
            require(t != v, "fit: train and validation splits share patient " + t);

    FitResult res;
    res.standardizer.fit(train);
    if (audit) {
        for (const auto& ex : train) audit->record("train", ex.patient_id);
        for (const auto& ex : val) audit->record("val", ex.patient_id);
    }
    const auto strain = res.standardizer.apply_all(train);
    const auto sval = res.standardizer.apply_all(val);

    res.net = nn::init_network(enc, head, cfg.seed);
    auto views = nn::tensor_views(res.net);
    std::size_t total = 0;
    for (const auto& v : views) total += v.n;

    const bool use_val = !sval.empty();
    if (!use_val) {
        res.history.warnings.push_back(
            "validation set is empty; early stopping disabled, final epoch kept");
    }

    // Shuffling draws from its own stream so weight-init and batch order can
    // be varied independently.
    Rng shuffle_rng(mix_seed(cfg.seed, 0x73687566666c65ULL));
    std::vector<double> adam_m, adam_v;
    if (cfg.optimizer == Optimizer::Adam) {
        adam_m.assign(total, 0.0);
        adam_v.assign(total, 0.0);
    }
    std::int64_t adam_t = 0;

    std::vector<double> best_params(total, 0.0);
    snapshot(views, best_params);
    double best_val = std::numeric_limits<double>::infinity();
    int best_epoch = use_val ? -1 : 0;

    std::vector<std::size_t> order(strain.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop =
                std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            nn::Network grads = nn::zeros_like(res.net);
            auto gviews = nn::tensor_views(grads);
            for (std::size_t k = start; k < stop; ++k) {
                auto one = nn::backward(strain[order[k]], target_of(strain[order[k]].label),
                                        res.net);
                auto oviews = nn::tensor_views(one.grads);
                for (std::size_t i = 0; i < gviews.size(); ++i)
                    for (std::size_t j = 0; j < gviews[i].n; ++j)
                        gviews[i].data[j] += oviews[i].data[j];
            }
            const double inv_n = 1.0 / static_cast<double>(stop - start);
            double sq = 0.0;
            for (const auto& g : gviews)
                for (std::size_t j = 0; j < g.n; ++j) {
                    g.data[j] *= inv_n;
                    sq += g.data[j] * g.data[j];
                }
            const double norm = std::sqrt(sq);
            const double scale =
                norm > cfg.gradient_clip_norm ? cfg.gradient_clip_norm / norm : 1.0;

            if (cfg.optimizer == Optimizer::Adam) {
                ++adam_t;
                const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(adam_t));
                const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(adam_t));
                std::size_t off = 0;
                for (std::size_t i = 0; i < views.size(); ++i) {
                    for (std::size_t j = 0; j < views[i].n; ++j, ++off) {
                        const double g = gviews[i].data[j] * scale;
                        adam_m[off] = kAdamBeta1 * adam_m[off] + (1.0 - kAdamBeta1) * g;
                        adam_v[off] = kAdamBeta2 * adam_v[off] + (1.0 - kAdamBeta2) * g * g;
                        views[i].data[j] -= cfg.learning_rate * (adam_m[off] / bc1) /
                                            (std::sqrt(adam_v[off] / bc2) + kAdamEps);
                    }
                }
            } else {
                for (std::size_t i = 0; i < views.size(); ++i)
                    for (std::size_t j = 0; j < views[i].n; ++j)
                        views[i].data[j] -= cfg.learning_rate * gviews[i].data[j] * scale;
            }
        }

        EpochStats stats;
        stats.epoch = epoch;
        const auto tr = evaluate(res.net, strain);
        stats.train_loss = tr.first;
        stats.train_acc = tr.second;
        if (use_val) {
            const auto vl = evaluate(res.net, sval);
            stats.val_loss = vl.first;
            stats.val_acc = vl.second;
            if (vl.first < best_val) {
                best_val = vl.first;
                best_epoch = epoch;
                snapshot(views, best_params);
            }
        } else {
            best_epoch = epoch;
        }
        res.history.epochs.push_back(stats);

        if (use_val && epoch - best_epoch >= cfg.patience) {
            res.history.early_stopped = true;
            break;
        }
    }

    if (use_val) {
        restore(views, best_params);
        res.history.best_val_loss = best_val;
    }
    res.history.best_epoch = best_epoch;
    return res;
}

CyclePredictions predict_cycles(const nn::Network& net, const nn::Standardizer& st,
                                const PatientRecord& patient, const dsp::DspConfig& dsp_cfg) {
    require(patient.has_all_scenes(), "predict_cycles: patient " + patient.patient_id +
                                          " is missing scenes");
    const auto pre = dsp::preprocess_patient(patient, dsp_cfg);
    CyclePredictions out;
    if (pre.examples.empty()) {
        out.no_cycles = true;
        return out;
    }
    out.probs.reserve(pre.examples.size());
    for (const auto& ex : pre.examples) out.probs.push_back(nn::encode_scenes(st.apply(ex), net));
    return out;
}

PatientPrediction predict_patient(const std::vector<double>& cycle_probs) {
    require(!cycle_probs.empty(), "predict_patient: no cycle probabilities");
    const double mean = std::accumulate(cycle_probs.begin(), cycle_probs.end(), 0.0) /
                        static_cast<double>(cycle_probs.size());
    PatientPrediction p;
    p.confidence = mean;
    p.label = mean >= 0.5 ? Label::NH : Label::H;
    return p;
}

}  // namespace cardio::train
