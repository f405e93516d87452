#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cardio/data_model.hpp"
#include "cardio/nn.hpp"
#include "cardio/training.hpp"

namespace cardio::hpo {

// ----------------------------------------------------------------------------
// Search space
// ----------------------------------------------------------------------------

struct SearchSpace {
    std::vector<int> hidden = {32, 64, 128};
    std::vector<int> layers = {2, 4, 6};
    std::vector<nn::Family> families = {nn::Family::Lstm, nn::Family::BiLstm};
    double lr_min = 1e-4, lr_max = 1e-2;  // sampled log-uniformly
    std::vector<std::string> head_presets = {"small", "medium"};
    bool shared_across_scenes = true;  // applied to every point, not searched

    // The space is finite only when the rate is pinned; then exhaustion is
    // observable and suggest() can signal completion.
    bool finite() const { return lr_min == lr_max; }
    std::size_t combo_count() const {
        return hidden.size() * layers.size() * families.size() * head_presets.size();
    }
    void validate() const;
};

// small: one narrow tanh layer; medium: the default two-layer head.
nn::HeadConfig head_for_preset(const std::string& preset);

struct ConfigPoint {
    int hidden = 32;
    int layers = 2;
    nn::Family family = nn::Family::Lstm;
    double learning_rate = 1e-3;
    std::string head_preset = "small";
};

nn::EncoderConfig encoder_for(const ConfigPoint& pt, const SearchSpace& space);
std::int64_t point_parameter_count(const ConfigPoint& pt, const SearchSpace& space);

// ----------------------------------------------------------------------------
// Gaussian-process surrogate (squared-exponential, fixed hyperparameters)
// ----------------------------------------------------------------------------

class Gp {
public:
    Gp(double lengthscale, double noise) : lengthscale_(lengthscale), noise_(noise) {}

    void fit(std::vector<std::vector<double>> x, std::vector<double> y);
    // Posterior mean and variance of the latent function at a point.
    std::pair<double, double> posterior(const std::vector<double>& x) const;
    bool fitted() const { return !x_.empty(); }

private:
    double kernel(const std::vector<double>& a, const std::vector<double>& b) const;
    double lengthscale_, noise_;
    std::vector<std::vector<double>> x_;
    std::vector<double> chol_;   // lower Cholesky factor of K + noise I
    std::vector<double> alpha_;  // (K + noise I)^{-1} y
};

// Expected improvement of a maximization objective at predicted (mean, var)
// over incumbent `best`, with exploration margin `xi`.
double expected_improvement(double mean, double var, double best, double xi);

// Unit-cube encoding: one-hot discrete dimensions plus a log-scaled rate.
std::vector<double> encode_point(const ConfigPoint& pt, const SearchSpace& space);

// ----------------------------------------------------------------------------
// Trials and search
// ----------------------------------------------------------------------------

struct Trial {
    int index = 0;
    ConfigPoint point;
    enum class Status { Completed, Failed } status = Status::Completed;
    double objective = 0.0;  // higher is better; valid only when completed
    std::string diagnostic;  // failure reason
};

// Proposes the next configuration. The first `n_init` calls are space-filling
// random draws; afterwards a GP over completed trials is maximized through
// expected improvement (dense sweep over the discrete grid with a refined
// rate line search). Returns nothing once a finite space is exhausted.
std::optional<ConfigPoint> suggest(const std::vector<Trial>& history, const SearchSpace& space,
                                   Rng& rng, int n_init = 2);

struct SearchResult {
    std::vector<Trial> trials;
    int best_index = -1;  // into trials
    bool exhausted = false;
    // Artifacts of the winning trial (absent under an injected objective).
    nn::Network best_net;
    nn::Standardizer best_standardizer;
    train::TrainHistory best_history;
};

// Scores a candidate configuration; higher is better. Injectable for tests.
using Objective = std::function<double(const ConfigPoint&)>;

// Runs `budget` trials: each suggestion is trained on `tr` and scored on `vl`
// by cycle-level F1 (accuracy when F1 is undefined), unless `rigged` supplies
// the score directly. Ties break toward fewer parameters, then earlier index.
SearchResult run_search(const std::vector<PatientExample>& tr,
                        const std::vector<PatientExample>& vl, const SearchSpace& space,
                        int budget, const train::TrainConfig& tcfg, std::uint64_t seed,
                        const Objective& rigged = {}, train::SplitAudit* audit = nullptr);

}  // namespace cardio::hpo
