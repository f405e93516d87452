#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cardio/common.hpp"
#include "cardio/data_model.hpp"

namespace cardio::nn {

// ----------------------------------------------------------------------------
// Dense matrix (row-major, 64-bit)
// ----------------------------------------------------------------------------

struct Matrix {
    std::size_t rows = 0, cols = 0;
    std::vector<double> v;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), v(r * c, 0.0) {}

    double& operator()(std::size_t i, std::size_t j) { return v[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return v[i * cols + j]; }
    std::size_t size() const { return v.size(); }
};

// ----------------------------------------------------------------------------
// Configuration
// ----------------------------------------------------------------------------

enum class Family : int { Lstm = 0, BiLstm = 1 };

const char* family_name(Family f);
Family parse_family(const std::string& name);

struct EncoderConfig {
    Family family = Family::BiLstm;
    int hidden = 128;
    int layers = 2;
    int input_dim = kChannelCount;
    // One encoder applied to all five scenes (default), or five independent ones.
    bool shared_across_scenes = true;

    int directions() const { return family == Family::BiLstm ? 2 : 1; }
    // Features contributed per scene: last forward output, plus first backward
    // output for the bidirectional family.
    int scene_feature_dim() const { return hidden * directions(); }

    void validate() const;  // throws ContractError
};

struct HeadConfig {
    // Widths of the tanh layers; a final scalar sigmoid layer is always present.
    std::vector<int> hidden_sizes = {64, 16};

    void validate() const;
};

// ----------------------------------------------------------------------------
// Parameters
// ----------------------------------------------------------------------------

// One direction's cell. Rows of W/U/b are the gate pre-activations stacked in
// the order: input gate, forget gate, cell candidate, output gate.
struct LstmCellParams {
    Matrix W;               // 4h x d
    Matrix U;               // 4h x h
    std::vector<double> b;  // 4h
};

struct LstmLayer {
    LstmCellParams fwd;
    LstmCellParams bwd;  // empty for the unidirectional family
};

struct DenseParams {
    Matrix W;               // out x in
    std::vector<double> b;  // out
};

struct Network {
    EncoderConfig encoder_cfg;
    HeadConfig head_cfg;
    // One stack when shared_across_scenes, otherwise one per scene.
    std::vector<std::vector<LstmLayer>> encoders;
    // Hidden tanh layers followed by the 1-unit output layer.
    std::vector<DenseParams> head;
};

// Fresh network: weights uniform in +-1/sqrt(fan-in), biases zero except the
// forget-gate block, which starts at 1.
Network init_network(const EncoderConfig& enc, const HeadConfig& head, std::uint64_t seed);

// Same shapes as `net`, all values zero. Gradient containers are built this way.
Network zeros_like(const Network& net);

// Flat view over every parameter tensor in a fixed traversal order
// (encoders first, then head). The order defines tensor indices for freezing.
struct TensorView {
    std::string name;
    double* data;
    std::size_t n;
};
std::vector<TensorView> tensor_views(Network& net);

// Analytic parameter count; must equal the summed tensor_views sizes.
std::int64_t count_parameters(const EncoderConfig& enc, const HeadConfig& head);
std::int64_t encoder_parameter_count(const EncoderConfig& enc);
std::int64_t enumerate_parameters(Network& net);

// ----------------------------------------------------------------------------
// Forward pass
// ----------------------------------------------------------------------------

enum class Direction : int { Forward = 0, Backward = 1 };

struct LstmState {
    std::vector<double> h, c;
};

// Cached per-step activations for backpropagation through time.
struct LstmTrace {
    Matrix x;                  // d x m layer input
    Matrix i, f, g, o, c, tc;  // each m x h (tc = tanh of the cell state)
    Matrix y;                  // m x h outputs, row t = hidden state at time t
};

// Runs the recurrence over a d x m input. Backward direction iterates from the
// last time step to the first; row t of the output is still the state at t.
Matrix lstm_forward(const Matrix& cycle, const LstmCellParams& p, Direction dir,
                    LstmState* final_state = nullptr, LstmTrace* trace = nullptr);

struct EncoderTrace {
    std::vector<LstmTrace> fwd, bwd;  // one per layer
    std::vector<Matrix> inputs;       // input fed to each layer
};

// Applies a stacked (Bi)LSTM to one scene; returns the scene feature vector
// (last forward output, then first backward output when bidirectional).
// Layers beyond the first consume the full output sequence of the layer below.
std::vector<double> encode_one_scene(const Matrix& cycle, const std::vector<LstmLayer>& stack,
                                     const EncoderConfig& cfg, EncoderTrace* trace = nullptr);

struct ForwardTrace {
    std::array<EncoderTrace, kSceneCount> scenes;
    std::vector<double> features;                 // concatenated scene features
    std::vector<std::vector<double>> head_in;     // input to each head layer
    double logit = 0.0;
    double p = 0.5;
};

// Full model: per-scene features concatenated in the fixed scene order, passed
// through the head, squashed to a probability. Scenes may have any consistent
// length m >= 1; a missing or ragged scene is an error.
double encode_scenes(const PatientExample& ex, const Network& net, ForwardTrace* trace = nullptr);

double sigmoid(double x);

// ----------------------------------------------------------------------------
// Loss and gradients
// ----------------------------------------------------------------------------

// Binary cross-entropy with p clamped to [1e-7, 1 - 1e-7].
double bce_loss(double p, double y);

struct BackwardResult {
    double p = 0.5;
    double loss = 0.0;
    Network grads;
};

// Forward plus analytic gradients of bce_loss w.r.t. every parameter, by
// backpropagation through the head and through time in both directions.
// `frozen`, when given, holds one flag per tensor (tensor_views order); frozen
// tensors receive exactly-zero gradients.
BackwardResult backward(const PatientExample& ex, double y, const Network& net,
                        const std::vector<bool>* frozen = nullptr);

// ----------------------------------------------------------------------------
// Standardization (fit on the training split only)
// ----------------------------------------------------------------------------

struct Standardizer {
    bool fitted = false;
    // Per (scene, channel) statistics over all training samples.
    std::array<std::array<MeanSd, kChannelCount>, kSceneCount> stats{};
    // Patients the statistics were computed from; used by leakage audits.
    std::vector<std::string> fitted_patient_ids;

    void fit(const std::vector<PatientExample>& train);
    PatientExample apply(const PatientExample& ex) const;
    std::vector<PatientExample> apply_all(const std::vector<PatientExample>& xs) const;
};

// ----------------------------------------------------------------------------
// Checkpoints
// ----------------------------------------------------------------------------

struct Checkpoint {
    Network net;
    Standardizer standardizer;
};

// Structured-text checkpoint: config, 64-bit tensors (round-trip exact), and
// the training-split standardization statistics.
void save_checkpoint(const std::filesystem::path& file, const Network& net,
                     const Standardizer& st);
Checkpoint load_checkpoint(const std::filesystem::path& file);

}  // namespace cardio::nn
