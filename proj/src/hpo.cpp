#include "cardio/hpo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace cardio::hpo {

namespace {

constexpr double kXi = 0.01;          // exploration margin in standardized units
constexpr double kLengthscale = 0.5;  // fixed: too few observations to learn it
constexpr double kNoise = 1e-3;

std::string point_key(const ConfigPoint& pt) {
    std::ostringstream os;
    os << pt.hidden << '|' << pt.layers << '|' << nn::family_name(pt.family) << '|'
       << pt.head_preset << '|' << pt.learning_rate;
    return os.str();
}

double lr_of(const SearchSpace& space, double t) {
    return std::exp(std::log(space.lr_min) + t * (std::log(space.lr_max) - std::log(space.lr_min)));
}

std::vector<ConfigPoint> all_combos(const SearchSpace& space, double lr) {
    std::vector<ConfigPoint> out;
    for (int h : space.hidden)
        for (int l : space.layers)
            for (nn::Family f : space.families)
                for (const auto& p : space.head_presets) out.push_back({h, l, f, lr, p});
    return out;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }
double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); }

}  // namespace

// ---------------------------------------------------------------------------
// Search space
// ---------------------------------------------------------------------------

void SearchSpace::validate() const {
    require(!hidden.empty() && !layers.empty() && !families.empty() && !head_presets.empty(),
            "SearchSpace: every discrete dimension needs at least one value");
    for (int h : hidden) require(h >= 1, "SearchSpace: hidden must be >= 1");
    for (int l : layers) require(l >= 1, "SearchSpace: layers must be >= 1");
    require(lr_min > 0.0 && lr_max >= lr_min, "SearchSpace: invalid learning-rate range");
    for (const auto& p : head_presets) head_for_preset(p);
}

nn::HeadConfig head_for_preset(const std::string& preset) {
    nn::HeadConfig head;
    if (preset == "small") {
        head.hidden_sizes = {16};
    } else if (preset == "medium") {
        head.hidden_sizes = {64, 16};
    } else {
        throw ContractError("unknown head preset: " + preset);
    }
    return head;
}

nn::EncoderConfig encoder_for(const ConfigPoint& pt, const SearchSpace& space) {
    nn::EncoderConfig enc;
    enc.family = pt.family;
    enc.hidden = pt.hidden;
    enc.layers = pt.layers;
    enc.input_dim = kChannelCount;
    enc.shared_across_scenes = space.shared_across_scenes;
    return enc;
}

std::int64_t point_parameter_count(const ConfigPoint& pt, const SearchSpace& space) {
    return nn::count_parameters(encoder_for(pt, space), head_for_preset(pt.head_preset));
}

// ---------------------------------------------------------------------------
// Gaussian process
// ---------------------------------------------------------------------------

double Gp::kernel(const std::vector<double>& a, const std::vector<double>& b) const {
    double sq = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sq += (a[i] - b[i]) * (a[i] - b[i]);
    return std::exp(-sq / (2.0 * lengthscale_ * lengthscale_));
}

void Gp::fit(std::vector<std::vector<double>> x, std::vector<double> y) {
    require(!x.empty() && x.size() == y.size(), "Gp: bad training data");
    const std::size_t n = x.size();
    x_ = std::move(x);
    std::vector<double> k(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            const double v = kernel(x_[i], x_[j]) + (i == j ? noise_ : 0.0);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    // Lower Cholesky factor, in place.
    chol_.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = k[i * n + j];
            for (std::size_t m = 0; m < j; ++m) s -= chol_[i * n + m] * chol_[j * n + m];
            if (i == j) {
                require(s > 0.0, "Gp: kernel matrix is not positive definite");
                chol_[i * n + i] = std::sqrt(s);
            } else {
                chol_[i * n + j] = s / chol_[j * n + j];
            }
        }
    }
    // alpha = (K + noise I)^{-1} y via two triangular solves.
    alpha_ = std::move(y);
    for (std::size_t i = 0; i < n; ++i) {
        double s = alpha_[i];
        for (std::size_t m = 0; m < i; ++m) s -= chol_[i * n + m] * alpha_[m];
        alpha_[i] = s / chol_[i * n + i];
    }
    for (std::size_t i = n; i-- > 0;) {
        double s = alpha_[i];
        for (std::size_t m = i + 1; m < n; ++m) s -= chol_[m * n + i] * alpha_[m];
        alpha_[i] = s / chol_[i * n + i];
    }
}

std::pair<double, double> Gp::posterior(const std::vector<double>& x) const {
    require(fitted(), "Gp: posterior before fit");
    const std::size_t n = x_.size();
    std::vector<double> ks(n, 0.0);
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ks[i] = kernel(x, x_[i]);
        mean += ks[i] * alpha_[i];
    }
    // v = L^{-1} k*, var = k(x,x) - |v|^2
    double vv = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double s = ks[i];
        for (std::size_t m = 0; m < i; ++m) s -= chol_[i * n + m] * ks[m];
        ks[i] = s / chol_[i * n + i];
        vv += ks[i] * ks[i];
    }
    return {mean, std::max(0.0, 1.0 - vv)};
}

double expected_improvement(double mean, double var, double best, double xi) {
    const double imp = mean - best - xi;
    if (var <= 1e-18) return imp > 0.0 ? imp : 0.0;
    const double sd = std::sqrt(var);
    const double z = imp / sd;
    return imp * normal_cdf(z) + sd * normal_pdf(z);
}

std::vector<double> encode_point(const ConfigPoint& pt, const SearchSpace& space) {
    std::vector<double> x;
    auto one_hot = [&x](auto value, const auto& values) {
        const auto it = std::find(values.begin(), values.end(), value);
        require(it != values.end(), "encode_point: value outside the search space");
        for (std::size_t i = 0; i < values.size(); ++i)
            x.push_back(it - values.begin() == static_cast<std::ptrdiff_t>(i) ? 1.0 : 0.0);
    };
    one_hot(pt.hidden, space.hidden);
    one_hot(pt.layers, space.layers);
    one_hot(pt.family, space.families);
    one_hot(pt.head_preset, space.head_presets);
    if (space.finite()) {
        x.push_back(0.5);
    } else {
        x.push_back((std::log(pt.learning_rate) - std::log(space.lr_min)) /
                    (std::log(space.lr_max) - std::log(space.lr_min)));
    }
    return x;
}

// ---------------------------------------------------------------------------
// Suggestion
// ---------------------------------------------------------------------------

std::optional<ConfigPoint> suggest(const std::vector<Trial>& history, const SearchSpace& space,
                                   Rng& rng, int n_init) {
    space.validate();
    std::set<std::string> tried;
    for (const auto& t : history) tried.insert(point_key(t.point));

    // In a finite space, only untried grid points are candidates.
    std::vector<ConfigPoint> finite_candidates;
    if (space.finite()) {
        for (const auto& pt : all_combos(space, space.lr_min))
            if (!tried.count(point_key(pt))) finite_candidates.push_back(pt);
        if (finite_candidates.empty()) return std::nullopt;
    }

    std::vector<const Trial*> completed;
    for (const auto& t : history)
        if (t.status == Trial::Status::Completed) completed.push_back(&t);

    if (static_cast<int>(history.size()) < n_init || completed.empty()) {
        if (space.finite())
            return finite_candidates[rng.below(finite_candidates.size())];
        ConfigPoint pt;
        pt.hidden = space.hidden[rng.below(space.hidden.size())];
        pt.layers = space.layers[rng.below(space.layers.size())];
        pt.family = space.families[rng.below(space.families.size())];
        pt.head_preset = space.head_presets[rng.below(space.head_presets.size())];
        pt.learning_rate = lr_of(space, rng.uniform01());
        return pt;
    }

    // Standardize the objective so the fixed kernel scale fits any metric.
    std::vector<double> y;
    std::vector<std::vector<double>> xs;
    for (const Trial* t : completed) {
        y.push_back(t->objective);
        xs.push_back(encode_point(t->point, space));
    }
    const MeanSd ms = mean_sd(y);
    const double scale = ms.sd > 1e-12 ? ms.sd : 1.0;
    double best = -std::numeric_limits<double>::infinity();
    for (auto& v : y) {
        v = (v - ms.mean) / scale;
        best = std::max(best, v);
    }
    Gp gp(kLengthscale, kNoise);
    gp.fit(xs, y);

    auto ei_of = [&](const ConfigPoint& pt) {
        const auto [mean, var] = gp.posterior(encode_point(pt, space));
        return expected_improvement(mean, var, best, kXi);
    };

    ConfigPoint winner;
    double winner_ei = -1.0;
    if (space.finite()) {
        for (const auto& pt : finite_candidates) {
            const double ei = ei_of(pt);
            if (ei > winner_ei) {
                winner_ei = ei;
                winner = pt;
            }
        }
        return winner;
    }

    // Dense sweep over the discrete grid; the rate line gets a coarse scan
    // followed by golden-section refinement around the best bracket.
    constexpr int kScan = 33;
    const double kGolden = (std::sqrt(5.0) - 1.0) / 2.0;
    for (const auto& combo : all_combos(space, space.lr_min)) {
        ConfigPoint pt = combo;
        double best_t = 0.0, best_ei = -1.0;
        for (int i = 0; i < kScan; ++i) {
            const double t = static_cast<double>(i) / (kScan - 1);
            pt.learning_rate = lr_of(space, t);
            const double ei = ei_of(pt);
            if (ei > best_ei) {
                best_ei = ei;
                best_t = t;
            }
        }
        double lo = std::max(0.0, best_t - 1.0 / (kScan - 1));
        double hi = std::min(1.0, best_t + 1.0 / (kScan - 1));
        double a = hi - kGolden * (hi - lo), b = lo + kGolden * (hi - lo);
        auto at = [&](double t) {
            pt.learning_rate = lr_of(space, t);
            return ei_of(pt);
        };
        double fa = at(a), fb = at(b);
        for (int it = 0; it < 60; ++it) {
            if (fa < fb) {
                lo = a;
                a = b;
                fa = fb;
                b = lo + kGolden * (hi - lo);
                fb = at(b);
            } else {
                hi = b;
                b = a;
                fb = fa;
                a = hi - kGolden * (hi - lo);
                fa = at(a);
            }
        }
        double t_final = best_t, ei_final = best_ei;
        if (fa > ei_final) {
            ei_final = fa;
            t_final = a;
        }
        if (fb > ei_final) {
            ei_final = fb;
            t_final = b;
        }
        if (ei_final > winner_ei) {
            winner_ei = ei_final;
            winner = combo;
            winner.learning_rate = lr_of(space, t_final);
        }
    }
    return winner;
}

// ---------------------------------------------------------------------------
// Search loop
// ---------------------------------------------------------------------------

namespace {

// Cycle-level F1 on the validation split; falls back to accuracy when the
// F1 denominator vanishes.
double validation_objective(const train::FitResult& res,
                            const std::vector<PatientExample>& vl) {
    const auto svl = res.standardizer.apply_all(vl);
    std::int64_t tp = 0, fp = 0, fn = 0, correct = 0;
    for (const auto& ex : svl) {
        const double p = nn::encode_scenes(ex, res.net);
        const bool pred_nh = p >= 0.5;
        const bool is_nh = ex.label == Label::NH;
        if (pred_nh && is_nh) ++tp;
        if (pred_nh && !is_nh) ++fp;
        if (!pred_nh && is_nh) ++fn;
        if (pred_nh == is_nh) ++correct;
    }
    if (2 * tp + fp + fn > 0)
        return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
    return static_cast<double>(correct) / static_cast<double>(svl.size());
}

// True when trial a should be preferred over b.
bool better_trial(const Trial& a, std::int64_t params_a, const Trial& b, std::int64_t params_b) {
    if (a.objective != b.objective) return a.objective > b.objective;
    if (params_a != params_b) return params_a < params_b;
    return a.index < b.index;
}

}  // namespace

SearchResult run_search(const std::vector<PatientExample>& tr,
                        const std::vector<PatientExample>& vl, const SearchSpace& space,
                        int budget, const train::TrainConfig& tcfg, std::uint64_t seed,
                        const Objective& rigged, train::SplitAudit* audit) {
    space.validate();
    require(budget >= 1, "run_search: budget must be >= 1");
    if (!rigged) require(!vl.empty(), "run_search: validation split is empty");

    SearchResult out;
    Rng rng(mix_seed(seed, 0x6870ULL));
    std::int64_t best_params = 0;
    for (int idx = 0; idx < budget; ++idx) {
        const auto pt = suggest(out.trials, space, rng);
        if (!pt) {
            out.exhausted = true;
            break;
        }
        Trial trial;
        trial.index = idx;
        trial.point = *pt;
        train::FitResult fitted;
        try {
            if (rigged) {
                trial.objective = rigged(*pt);
            } else {
                train::TrainConfig cfg = tcfg;
                cfg.learning_rate = pt->learning_rate;
                cfg.seed = mix_seed(seed, 0x747269616cULL + static_cast<std::uint64_t>(idx));
                fitted = train::fit(tr, vl, encoder_for(*pt, space),
                                    head_for_preset(pt->head_preset), cfg, audit);
                trial.objective = validation_objective(fitted, vl);
            }
        } catch (const std::exception& e) {
            trial.status = Trial::Status::Failed;
            trial.diagnostic = e.what();
        }
        const std::int64_t params = point_parameter_count(*pt, space);
        const bool take = trial.status == Trial::Status::Completed &&
                          (out.best_index < 0 ||
                           better_trial(trial, params,
                                        out.trials[static_cast<std::size_t>(out.best_index)],
                                        best_params));
        out.trials.push_back(trial);
        if (take) {
            out.best_index = idx;
            best_params = params;
            if (!rigged) {
                out.best_net = std::move(fitted.net);
                out.best_standardizer = std::move(fitted.standardizer);
                out.best_history = std::move(fitted.history);
            }
        }
    }
    if (out.best_index < 0) {
        std::ostringstream os;
        os << "run_search: every trial failed";
        for (const auto& t : out.trials) os << "\n  trial " << t.index << ": " << t.diagnostic;
        throw ContractError(os.str());
    }
    return out;
}

}  // namespace cardio::hpo
