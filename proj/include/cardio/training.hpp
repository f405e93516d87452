#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cardio/data_model.hpp"
#include "cardio/dsp.hpp"
#include "cardio/nn.hpp"

namespace cardio::train {

// ----------------------------------------------------------------------------
// Configuration
// ----------------------------------------------------------------------------

enum class Optimizer : int { Adam = 0, Sgd = 1 };

const char* optimizer_name(Optimizer o);
Optimizer parse_optimizer(const std::string& name);

struct TrainConfig {
    int max_epochs = 300;
    int patience = 15;
    int batch_size = 16;
    double learning_rate = 1e-3;
    Optimizer optimizer = Optimizer::Adam;
    std::uint64_t seed = 0;
    double gradient_clip_norm = 5.0;

    void validate() const;  // throws ContractError
};

// ----------------------------------------------------------------------------
// Split-access audit
// ----------------------------------------------------------------------------

// Tags every patient whose examples a pipeline stage touched with the split it
// was accessed under, so evaluation can assert the splits never mixed.
class SplitAudit {
public:
    void record(const std::string& split, const std::string& patient_id) {
        seen_[split].insert(patient_id);
    }
    const std::set<std::string>& seen(const std::string& split) const {
        static const std::set<std::string> empty;
        const auto it = seen_.find(split);
        return it == seen_.end() ? empty : it->second;
    }
    bool disjoint(const std::string& a, const std::string& b) const;
    void clear() { seen_.clear(); }

private:
    std::map<std::string, std::set<std::string>> seen_;
};

// ----------------------------------------------------------------------------
// Fit
// ----------------------------------------------------------------------------

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double train_acc = 0.0;
    std::optional<double> val_loss;
    std::optional<double> val_acc;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
    int best_epoch = -1;  // epoch whose parameters were restored
    std::optional<double> best_val_loss;
    bool early_stopped = false;
    std::vector<std::string> warnings;
};

struct FitResult {
    nn::Network net;
    nn::Standardizer standardizer;
    TrainHistory history;
};

// Trains from a fresh initialization. Standardization statistics come from
// `train` only; each epoch shuffles mini-batches, updates with the configured
// optimizer under a global gradient-norm clip, then scores both splits with
// the current parameters. The parameters of the best validation epoch are
// restored at the end. An empty validation split disables early stopping and
// leaves a warning in the history.
FitResult fit(const std::vector<PatientExample>& train, const std::vector<PatientExample>& val,
              const nn::EncoderConfig& enc, const nn::HeadConfig& head, const TrainConfig& cfg,
              SplitAudit* audit = nullptr);

// Mean loss and accuracy of a fixed network over a set of examples
// (already standardized).
std::pair<double, double> evaluate(const nn::Network& net,
                                   const std::vector<PatientExample>& examples);

// ----------------------------------------------------------------------------
// Prediction
// ----------------------------------------------------------------------------

struct CyclePredictions {
    std::vector<double> probs;  // one per aligned cycle, in cycle order
    bool no_cycles = false;
};

// Segments the patient's recordings and scores every aligned cycle tuple.
CyclePredictions predict_cycles(const nn::Network& net, const nn::Standardizer& st,
                                const PatientRecord& patient, const dsp::DspConfig& dsp_cfg);

struct PatientPrediction {
    Label label = Label::H;
    double confidence = 0.0;  // mean cycle probability
};

// Aggregates cycle probabilities by mean; ties at 0.5 classify as NH.
PatientPrediction predict_patient(const std::vector<double>& cycle_probs);

}  // namespace cardio::train
