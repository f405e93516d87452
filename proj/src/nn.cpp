#include "cardio/nn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace cardio::nn {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr double kClampEps = 1e-7;

// ---------------------------------------------------------------------------
// Small dense helpers
// ---------------------------------------------------------------------------

// y += A x, with A row-major r x c.
void gemv_acc(const Matrix& A, const double* x, double* y) {
    for (std::size_t r = 0; r < A.rows; ++r) {
        const double* row = &A.v[r * A.cols];
        double acc = 0.0;
        for (std::size_t c = 0; c < A.cols; ++c) acc += row[c] * x[c];
        y[r] += acc;
    }
}

// y += A^T x, with A row-major r x c (so y has c entries, x has r).
void gemv_t_acc(const Matrix& A, const double* x, double* y) {
    for (std::size_t r = 0; r < A.rows; ++r) {
        const double* row = &A.v[r * A.cols];
        const double xr = x[r];
        if (xr == 0.0) continue;
        for (std::size_t c = 0; c < A.cols; ++c) y[c] += xr * row[c];
    }
}

// A += x y^T (outer product accumulate), A row-major |x| x |y|.
void ger_acc(Matrix& A, const double* x, const double* y) {
    for (std::size_t r = 0; r < A.rows; ++r) {
        double* row = &A.v[r * A.cols];
        const double xr = x[r];
        if (xr == 0.0) continue;
        for (std::size_t c = 0; c < A.cols; ++c) row[c] += xr * y[c];
    }
}

void fill_uniform(Matrix& m, double bound, Rng& rng) {
    for (auto& x : m.v) x = rng.uniform(-bound, bound);
}

int stack_input_dim(const EncoderConfig& cfg, int layer) {
    return layer == 0 ? cfg.input_dim : cfg.hidden * cfg.directions();
}

LstmCellParams make_cell(int d, int h) {
    LstmCellParams p;
    p.W = Matrix(static_cast<std::size_t>(4 * h), static_cast<std::size_t>(d));
    p.U = Matrix(static_cast<std::size_t>(4 * h), static_cast<std::size_t>(h));
    p.b.assign(static_cast<std::size_t>(4 * h), 0.0);
    return p;
}

// Allocates an all-zero network with the right shapes.
Network make_network(const EncoderConfig& enc, const HeadConfig& head) {
    enc.validate();
    head.validate();
    Network net;
    net.encoder_cfg = enc;
    net.head_cfg = head;
    const int n_enc = enc.shared_across_scenes ? 1 : kSceneCount;
    for (int e = 0; e < n_enc; ++e) {
        std::vector<LstmLayer> stack;
        for (int l = 0; l < enc.layers; ++l) {
            LstmLayer layer;
            layer.fwd = make_cell(stack_input_dim(enc, l), enc.hidden);
            if (enc.family == Family::BiLstm)
                layer.bwd = make_cell(stack_input_dim(enc, l), enc.hidden);
            stack.push_back(std::move(layer));
        }
        net.encoders.push_back(std::move(stack));
    }
    int in = enc.scene_feature_dim() * kSceneCount;
    for (int s : head.hidden_sizes) {
        DenseParams d;
        d.W = Matrix(static_cast<std::size_t>(s), static_cast<std::size_t>(in));
        d.b.assign(static_cast<std::size_t>(s), 0.0);
        net.head.push_back(std::move(d));
        in = s;
    }
    DenseParams out;
    out.W = Matrix(1, static_cast<std::size_t>(in));
    out.b.assign(1, 0.0);
    net.head.push_back(std::move(out));
    return net;
}

void init_cell(LstmCellParams& p, int h, Rng& rng) {
    fill_uniform(p.W, 1.0 / std::sqrt(static_cast<double>(p.W.cols)), rng);
    fill_uniform(p.U, 1.0 / std::sqrt(static_cast<double>(p.U.cols)), rng);
    std::fill(p.b.begin(), p.b.end(), 0.0);
    // Forget-gate bias starts open so early gradients reach distant steps.
    for (int r = h; r < 2 * h; ++r) p.b[static_cast<std::size_t>(r)] = 1.0;
}

// Shared core of the per-direction BPTT. `dy_ext` carries the external
// gradient on each output row; parameter gradients accumulate into `g`,
// input gradients (when wanted) into `dx`.
void lstm_backward_cell(const LstmTrace& tr, const LstmCellParams& p, Direction dir,
                        const Matrix& dy_ext, Matrix* dx, LstmCellParams& g) {
    const int m = static_cast<int>(tr.y.rows);
    const int h = static_cast<int>(tr.y.cols);
    const int d = static_cast<int>(tr.x.rows);
    std::vector<double> dh(static_cast<std::size_t>(h), 0.0);
    std::vector<double> dc(static_cast<std::size_t>(h), 0.0);
    std::vector<double> da(static_cast<std::size_t>(4 * h), 0.0);
    std::vector<double> xt(static_cast<std::size_t>(d), 0.0);
    std::vector<double> dh_next(static_cast<std::size_t>(h), 0.0);
    for (int k = m - 1; k >= 0; --k) {
        // Position k in traversal order; the forward pass visited `t` here.
        const int t = dir == Direction::Forward ? k : m - 1 - k;
        const int t_prev = dir == Direction::Forward ? t - 1 : t + 1;
        const double* i_t = &tr.i.v[static_cast<std::size_t>(t) * tr.i.cols];
        const double* f_t = &tr.f.v[static_cast<std::size_t>(t) * tr.f.cols];
        const double* g_t = &tr.g.v[static_cast<std::size_t>(t) * tr.g.cols];
        const double* o_t = &tr.o.v[static_cast<std::size_t>(t) * tr.o.cols];
        const double* tc_t = &tr.tc.v[static_cast<std::size_t>(t) * tr.tc.cols];
        const double* c_prev =
            k > 0 ? &tr.c.v[static_cast<std::size_t>(t_prev) * tr.c.cols] : nullptr;
        const double* h_prev =
            k > 0 ? &tr.y.v[static_cast<std::size_t>(t_prev) * tr.y.cols] : nullptr;
        for (int r = 0; r < h; ++r) {
            const std::size_t ur = static_cast<std::size_t>(r);
            const double dht = dy_ext(static_cast<std::size_t>(t), ur) + dh[ur];
            const double dco = dc[ur] + dht * o_t[r] * (1.0 - tc_t[r] * tc_t[r]);
            const double dao = dht * tc_t[r] * o_t[r] * (1.0 - o_t[r]);
            const double dai = dco * g_t[r] * i_t[r] * (1.0 - i_t[r]);
            const double dag = dco * i_t[r] * (1.0 - g_t[r] * g_t[r]);
            const double cp = c_prev ? c_prev[r] : 0.0;
            const double daf = dco * cp * f_t[r] * (1.0 - f_t[r]);
            da[ur] = dai;
            da[ur + static_cast<std::size_t>(h)] = daf;
            da[ur + static_cast<std::size_t>(2 * h)] = dag;
            da[ur + static_cast<std::size_t>(3 * h)] = dao;
            dc[ur] = dco * f_t[r];
        }
        for (int r = 0; r < d; ++r)
            xt[static_cast<std::size_t>(r)] =
                tr.x.v[static_cast<std::size_t>(r) * tr.x.cols + static_cast<std::size_t>(t)];
        ger_acc(g.W, da.data(), xt.data());
        if (h_prev) ger_acc(g.U, da.data(), h_prev);
        for (int r = 0; r < 4 * h; ++r) g.b[static_cast<std::size_t>(r)] += da[static_cast<std::size_t>(r)];
        if (dx) {
            // dx column t += W^T da
            for (std::size_t r = 0; r < p.W.rows; ++r) {
                const double ar = da[r];
                if (ar == 0.0) continue;
                const double* row = &p.W.v[r * p.W.cols];
                for (std::size_t c = 0; c < p.W.cols; ++c)
                    dx->v[c * dx->cols + static_cast<std::size_t>(t)] += ar * row[c];
            }
        }
        std::fill(dh_next.begin(), dh_next.end(), 0.0);
        gemv_t_acc(p.U, da.data(), dh_next.data());
        dh.swap(dh_next);
    }
}

Matrix scene_matrix(const BreathingCycle& cyc, int scene_idx) {
    const std::size_t m = cyc.ch[0].size();
    require(m >= 1, "encode_scenes: scene " + std::string(scene_name(kSceneOrder[static_cast<std::size_t>(scene_idx)])) +
                        " has no samples");
    Matrix x(kChannelCount, m);
    for (int c = 0; c < kChannelCount; ++c) {
        require(cyc.ch[static_cast<std::size_t>(c)].size() == m,
                "encode_scenes: ragged channels in scene input");
        std::copy(cyc.ch[static_cast<std::size_t>(c)].begin(), cyc.ch[static_cast<std::size_t>(c)].end(),
                  x.v.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(c) * m));
    }
    return x;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

const char* family_name(Family f) { return f == Family::BiLstm ? "BiLSTM" : "LSTM"; }

Family parse_family(const std::string& name) {
    if (name == "LSTM") return Family::Lstm;
    if (name == "BiLSTM") return Family::BiLstm;
    throw ContractError("unknown encoder family: " + name);
}

void EncoderConfig::validate() const {
    require(hidden >= 1, "EncoderConfig: hidden must be >= 1");
    require(layers >= 1, "EncoderConfig: layers must be >= 1");
    require(input_dim >= 1, "EncoderConfig: input_dim must be >= 1");
}

void HeadConfig::validate() const {
    for (int s : hidden_sizes) require(s >= 1, "HeadConfig: layer width must be >= 1");
}

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

Network init_network(const EncoderConfig& enc, const HeadConfig& head, std::uint64_t seed) {
    Network net = make_network(enc, head);
    Rng rng(mix_seed(seed, 0x776569676874ULL));
    for (auto& stack : net.encoders)
        for (auto& layer : stack) {
            init_cell(layer.fwd, enc.hidden, rng);
            if (enc.family == Family::BiLstm) init_cell(layer.bwd, enc.hidden, rng);
        }
    for (auto& d : net.head) {
        fill_uniform(d.W, 1.0 / std::sqrt(static_cast<double>(d.W.cols)), rng);
        std::fill(d.b.begin(), d.b.end(), 0.0);
    }
    return net;
}

Network zeros_like(const Network& net) {
    return make_network(net.encoder_cfg, net.head_cfg);
}

std::vector<TensorView> tensor_views(Network& net) {
    std::vector<TensorView> out;
    auto add = [&out](const std::string& name, std::vector<double>& v) {
        out.push_back({name, v.data(), v.size()});
    };
    for (std::size_t e = 0; e < net.encoders.size(); ++e)
        for (std::size_t l = 0; l < net.encoders[e].size(); ++l) {
            const std::string base = "enc" + std::to_string(e) + ".l" + std::to_string(l);
            LstmLayer& layer = net.encoders[e][l];
            add(base + ".fwd.W", layer.fwd.W.v);
            add(base + ".fwd.U", layer.fwd.U.v);
            add(base + ".fwd.b", layer.fwd.b);
            if (net.encoder_cfg.family == Family::BiLstm) {
                add(base + ".bwd.W", layer.bwd.W.v);
                add(base + ".bwd.U", layer.bwd.U.v);
                add(base + ".bwd.b", layer.bwd.b);
            }
        }
    for (std::size_t l = 0; l < net.head.size(); ++l) {
        add("head" + std::to_string(l) + ".W", net.head[l].W.v);
        add("head" + std::to_string(l) + ".b", net.head[l].b);
    }
    return out;
}

std::int64_t encoder_parameter_count(const EncoderConfig& enc) {
    enc.validate();
    const std::int64_t h = enc.hidden;
    std::int64_t per_stack = 0;
    for (int l = 0; l < enc.layers; ++l) {
        const std::int64_t d = stack_input_dim(enc, l);
        per_stack += enc.directions() * 4 * h * (d + h + 1);
    }
    return (enc.shared_across_scenes ? 1 : kSceneCount) * per_stack;
}

std::int64_t count_parameters(const EncoderConfig& enc, const HeadConfig& head) {
    head.validate();
    std::int64_t total = encoder_parameter_count(enc);
    std::int64_t in = static_cast<std::int64_t>(enc.scene_feature_dim()) * kSceneCount;
    for (int s : head.hidden_sizes) {
        total += static_cast<std::int64_t>(s) * in + s;
        in = s;
    }
    total += in + 1;  // scalar output layer
    return total;
}

std::int64_t enumerate_parameters(Network& net) {
    std::int64_t total = 0;
    for (const auto& v : tensor_views(net)) total += static_cast<std::int64_t>(v.n);
    return total;
}

// ---------------------------------------------------------------------------
// Forward pass
// ---------------------------------------------------------------------------

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Matrix lstm_forward(const Matrix& cycle, const LstmCellParams& p, Direction dir,
                    LstmState* final_state, LstmTrace* trace) {
    require(p.U.rows == p.U.cols * 4 && !p.b.empty(), "lstm_forward: malformed cell parameters");
    const std::size_t h = p.U.cols;
    const std::size_t d = p.W.cols;
    require(p.W.rows == 4 * h && p.b.size() == 4 * h, "lstm_forward: gate shape mismatch");
    require(cycle.rows == d, "lstm_forward: input rows do not match the cell input size");
    require(cycle.cols >= 1, "lstm_forward: empty sequence");
    require(all_finite(cycle.v), "lstm_forward: non-finite input");
    const std::size_t m = cycle.cols;

    Matrix y(m, h);
    Matrix mi(m, h), mf(m, h), mg(m, h), mo(m, h), mc(m, h), mtc(m, h);
    std::vector<double> hcur(h, 0.0), ccur(h, 0.0);
    std::vector<double> a(4 * h, 0.0);
    std::vector<double> xt(d, 0.0);

    for (std::size_t k = 0; k < m; ++k) {
        const std::size_t t = dir == Direction::Forward ? k : m - 1 - k;
        for (std::size_t c = 0; c < d; ++c) xt[c] = cycle.v[c * m + t];
        std::copy(p.b.begin(), p.b.end(), a.begin());
        gemv_acc(p.W, xt.data(), a.data());
        gemv_acc(p.U, hcur.data(), a.data());
        for (std::size_t r = 0; r < h; ++r) {
            const double gi = sigmoid(a[r]);
            const double gf = sigmoid(a[r + h]);
            const double gg = std::tanh(a[r + 2 * h]);
            const double go = sigmoid(a[r + 3 * h]);
            const double c_new = gf * ccur[r] + gi * gg;
            const double tc = std::tanh(c_new);
            ccur[r] = c_new;
            hcur[r] = go * tc;
            y(t, r) = hcur[r];
            mi(t, r) = gi;
            mf(t, r) = gf;
            mg(t, r) = gg;
            mo(t, r) = go;
            mc(t, r) = c_new;
            mtc(t, r) = tc;
        }
    }
    if (final_state) {
        final_state->h = hcur;
        final_state->c = ccur;
    }
    if (trace) {
        trace->x = cycle;
        trace->i = std::move(mi);
        trace->f = std::move(mf);
        trace->g = std::move(mg);
        trace->o = std::move(mo);
        trace->c = std::move(mc);
        trace->tc = std::move(mtc);
        trace->y = y;
    }
    return y;
}

std::vector<double> encode_one_scene(const Matrix& cycle, const std::vector<LstmLayer>& stack,
                                     const EncoderConfig& cfg, EncoderTrace* trace) {
    require(!stack.empty(), "encode_one_scene: empty stack");
    const bool bi = cfg.family == Family::BiLstm;
    const std::size_t h = static_cast<std::size_t>(cfg.hidden);
    const std::size_t m = cycle.cols;
    Matrix input = cycle;
    Matrix y_fwd, y_bwd;
    if (trace) {
        trace->fwd.resize(stack.size());
        trace->bwd.resize(bi ? stack.size() : 0);
        trace->inputs.clear();
    }
    for (std::size_t l = 0; l < stack.size(); ++l) {
        if (trace) trace->inputs.push_back(input);
        y_fwd = lstm_forward(input, stack[l].fwd, Direction::Forward, nullptr,
                             trace ? &trace->fwd[l] : nullptr);
        if (bi)
            y_bwd = lstm_forward(input, stack[l].bwd, Direction::Backward, nullptr,
                                 trace ? &trace->bwd[l] : nullptr);
        if (l + 1 < stack.size()) {
            // Next layer consumes the full output sequence, both directions wide.
            Matrix next(bi ? 2 * h : h, m);
            for (std::size_t t = 0; t < m; ++t)
                for (std::size_t r = 0; r < h; ++r) {
                    next.v[r * m + t] = y_fwd(t, r);
                    if (bi) next.v[(h + r) * m + t] = y_bwd(t, r);
                }
            input = std::move(next);
        }
    }
    std::vector<double> feat;
    feat.reserve(bi ? 2 * h : h);
    for (std::size_t r = 0; r < h; ++r) feat.push_back(y_fwd(m - 1, r));
    if (bi)
        for (std::size_t r = 0; r < h; ++r) feat.push_back(y_bwd(0, r));
    return feat;
}

double encode_scenes(const PatientExample& ex, const Network& net, ForwardTrace* trace) {
    const EncoderConfig& cfg = net.encoder_cfg;
    require(net.encoders.size() == (cfg.shared_across_scenes ? 1u : static_cast<std::size_t>(kSceneCount)),
            "encode_scenes: encoder bank does not match the configuration");
    // All five scenes must be present with the same sequence length.
    const std::size_t m = ex.scenes[0].ch[0].size();
    for (const auto& s : ex.scenes)
        for (const auto& c : s.ch)
            require(c.size() == m && m >= 1, "encode_scenes: missing scene or ragged lengths");

    std::vector<double> features;
    features.reserve(static_cast<std::size_t>(cfg.scene_feature_dim()) * kSceneCount);
    for (int j = 0; j < kSceneCount; ++j) {
        const Matrix x = scene_matrix(ex.scenes[static_cast<std::size_t>(j)], j);
        const auto& stack = net.encoders[cfg.shared_across_scenes ? 0 : static_cast<std::size_t>(j)];
        EncoderTrace* et = trace ? &trace->scenes[static_cast<std::size_t>(j)] : nullptr;
        const auto feat = encode_one_scene(x, stack, cfg, et);
        features.insert(features.end(), feat.begin(), feat.end());
    }

    std::vector<double> act = features;
    if (trace) {
        trace->features = features;
        trace->head_in.clear();
    }
    for (std::size_t l = 0; l < net.head.size(); ++l) {
        if (trace) trace->head_in.push_back(act);
        const DenseParams& dp = net.head[l];
        require(dp.W.cols == act.size(), "encode_scenes: head shape mismatch");
        std::vector<double> z = dp.b;
        gemv_acc(dp.W, act.data(), z.data());
        if (l + 1 < net.head.size())
            for (auto& v : z) v = std::tanh(v);
        act = std::move(z);
    }
    require(act.size() == 1, "encode_scenes: head must end in a single unit");
    const double logit = act[0];
    const double p = sigmoid(logit);
    if (trace) {
        trace->logit = logit;
        trace->p = p;
    }
    return p;
}

// ---------------------------------------------------------------------------
// Loss and gradients
// ---------------------------------------------------------------------------

double bce_loss(double p, double y) {
    const double q = std::clamp(p, kClampEps, 1.0 - kClampEps);
    return -(y * std::log(q) + (1.0 - y) * std::log(1.0 - q));
}

BackwardResult backward(const PatientExample& ex, double y, const Network& net,
                        const std::vector<bool>* frozen) {
    ForwardTrace tr;
    BackwardResult res;
    res.p = encode_scenes(ex, net, &tr);
    res.loss = bce_loss(res.p, y);
    res.grads = zeros_like(net);

    // Head: with the sigmoid folded into the loss, d(loss)/d(logit) = p - y.
    std::vector<double> delta = {res.p - y};
    std::vector<double> d_in;
    for (std::size_t li = net.head.size(); li-- > 0;) {
        const DenseParams& dp = net.head[li];
        DenseParams& gp = res.grads.head[li];
        const std::vector<double>& in = tr.head_in[li];
        ger_acc(gp.W, delta.data(), in.data());
        for (std::size_t r = 0; r < delta.size(); ++r) gp.b[r] += delta[r];
        d_in.assign(in.size(), 0.0);
        gemv_t_acc(dp.W, delta.data(), d_in.data());
        if (li > 0)
            // The layer below ended in tanh; fold its derivative in here.
            for (std::size_t r = 0; r < d_in.size(); ++r) d_in[r] *= 1.0 - in[r] * in[r];
        delta = std::move(d_in);
    }
    const std::vector<double>& d_features = delta;

    const EncoderConfig& cfg = net.encoder_cfg;
    const bool bi = cfg.family == Family::BiLstm;
    const std::size_t h = static_cast<std::size_t>(cfg.hidden);
    const std::size_t feat_per_scene = static_cast<std::size_t>(cfg.scene_feature_dim());
    for (int j = 0; j < kSceneCount; ++j) {
        const EncoderTrace& et = tr.scenes[static_cast<std::size_t>(j)];
        const auto& stack = net.encoders[cfg.shared_across_scenes ? 0 : static_cast<std::size_t>(j)];
        auto& gstack = res.grads.encoders[cfg.shared_across_scenes ? 0 : static_cast<std::size_t>(j)];
        const std::size_t m = et.fwd.back().y.rows;
        const double* seg = &d_features[static_cast<std::size_t>(j) * feat_per_scene];

        // Seed the top layer: last forward output and first backward output
        // feed the concatenated feature vector.
        Matrix dy_fwd(m, h), dy_bwd;
        for (std::size_t r = 0; r < h; ++r) dy_fwd(m - 1, r) = seg[r];
        if (bi) {
            dy_bwd = Matrix(m, h);
            for (std::size_t r = 0; r < h; ++r) dy_bwd(0, r) = seg[h + r];
        }
        for (std::size_t l = stack.size(); l-- > 0;) {
            const std::size_t d = et.inputs[l].rows;
            Matrix dx(d, m);
            lstm_backward_cell(et.fwd[l], stack[l].fwd, Direction::Forward, dy_fwd,
                               l > 0 ? &dx : nullptr, gstack[l].fwd);
            if (bi)
                lstm_backward_cell(et.bwd[l], stack[l].bwd, Direction::Backward, dy_bwd,
                                   l > 0 ? &dx : nullptr, gstack[l].bwd);
            if (l > 0) {
                dy_fwd = Matrix(m, h);
                if (bi) dy_bwd = Matrix(m, h);
                for (std::size_t t = 0; t < m; ++t)
                    for (std::size_t r = 0; r < h; ++r) {
                        dy_fwd(t, r) = dx.v[r * m + t];
                        if (bi) dy_bwd(t, r) = dx.v[(h + r) * m + t];
                    }
            }
        }
    }

    if (frozen) {
        auto views = tensor_views(res.grads);
        require(frozen->size() == views.size(), "backward: freeze mask size mismatch");
        for (std::size_t i = 0; i < views.size(); ++i)
            if ((*frozen)[i]) std::fill(views[i].data, views[i].data + views[i].n, 0.0);
    }
    return res;
}

// ---------------------------------------------------------------------------
// Standardization
// ---------------------------------------------------------------------------

void Standardizer::fit(const std::vector<PatientExample>& train) {
    require(!train.empty(), "Standardizer: cannot fit on an empty split");
    fitted_patient_ids.clear();
    for (int j = 0; j < kSceneCount; ++j)
        for (int c = 0; c < kChannelCount; ++c) {
            std::vector<double> all;
            all.reserve(train.size() * train[0].scenes[0].ch[0].size());
            for (const auto& ex : train) {
                const auto& v = ex.scenes[static_cast<std::size_t>(j)].ch[static_cast<std::size_t>(c)];
                all.insert(all.end(), v.begin(), v.end());
            }
            stats[static_cast<std::size_t>(j)][static_cast<std::size_t>(c)] = mean_sd(all);
        }
    for (const auto& ex : train)
        if (std::find(fitted_patient_ids.begin(), fitted_patient_ids.end(), ex.patient_id) ==
            fitted_patient_ids.end())
            fitted_patient_ids.push_back(ex.patient_id);
    fitted = true;
}

PatientExample Standardizer::apply(const PatientExample& ex) const {
    require(fitted, "Standardizer: apply before fit");
    PatientExample out = ex;
    for (int j = 0; j < kSceneCount; ++j)
        for (int c = 0; c < kChannelCount; ++c) {
            const MeanSd& ms = stats[static_cast<std::size_t>(j)][static_cast<std::size_t>(c)];
            const double scale = ms.sd > 1e-12 ? ms.sd : 1.0;
            for (auto& v : out.scenes[static_cast<std::size_t>(j)].ch[static_cast<std::size_t>(c)])
                v = (v - ms.mean) / scale;
        }
    return out;
}

std::vector<PatientExample> Standardizer::apply_all(const std::vector<PatientExample>& xs) const {
    std::vector<PatientExample> out;
    out.reserve(xs.size());
    for (const auto& x : xs) out.push_back(apply(x));
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

void save_checkpoint(const std::filesystem::path& file, const Network& net,
                     const Standardizer& st) {
    ordered_json j;
    j["format"] = "cardio-checkpoint";
    j["tool_version"] = kToolVersion;
    j["encoder"] = {{"family", family_name(net.encoder_cfg.family)},
                    {"hidden", net.encoder_cfg.hidden},
                    {"layers", net.encoder_cfg.layers},
                    {"input_dim", net.encoder_cfg.input_dim},
                    {"shared_across_scenes", net.encoder_cfg.shared_across_scenes}};
    j["head"] = {{"hidden_sizes", net.head_cfg.hidden_sizes}};
    ordered_json tensors = ordered_json::object();
    Network& mut = const_cast<Network&>(net);
    for (const auto& v : tensor_views(mut)) {
        ordered_json a = ordered_json::array();
        for (std::size_t i = 0; i < v.n; ++i) a.push_back(v.data[i]);
        tensors[v.name] = std::move(a);
    }
    j["tensors"] = std::move(tensors);
    ordered_json stj;
    stj["fitted"] = st.fitted;
    ordered_json stats = ordered_json::array();
    for (int s = 0; s < kSceneCount; ++s) {
        ordered_json row = ordered_json::array();
        for (int c = 0; c < kChannelCount; ++c) {
            const MeanSd& ms = st.stats[static_cast<std::size_t>(s)][static_cast<std::size_t>(c)];
            row.push_back({{"mean", ms.mean}, {"sd", ms.sd}});
        }
        stats.push_back(std::move(row));
    }
    stj["stats"] = std::move(stats);
    stj["fitted_patient_ids"] = st.fitted_patient_ids;
    j["standardizer"] = std::move(stj);

    std::ofstream os(file, std::ios::binary);
    if (!os) throw IoError("cannot write checkpoint: " + file.string());
    os << j.dump(1) << "\n";
    if (!os) throw IoError("checkpoint write failed: " + file.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& file) {
    std::ifstream is(file, std::ios::binary);
    if (!is) throw IoError("cannot read checkpoint: " + file.string());
    std::ostringstream buf;
    buf << is.rdbuf();
    ordered_json j = ordered_json::parse(buf.str(), nullptr, false);
    if (j.is_discarded() || !j.is_object() || j.value("format", "") != "cardio-checkpoint")
        throw IoError("not a checkpoint file: " + file.string());

    EncoderConfig enc;
    const auto& je = j.at("encoder");
    enc.family = parse_family(je.at("family").get<std::string>());
    enc.hidden = je.at("hidden").get<int>();
    enc.layers = je.at("layers").get<int>();
    enc.input_dim = je.at("input_dim").get<int>();
    enc.shared_across_scenes = je.at("shared_across_scenes").get<bool>();
    HeadConfig head;
    head.hidden_sizes = j.at("head").at("hidden_sizes").get<std::vector<int>>();

    Checkpoint ck;
    ck.net = make_network(enc, head);
    const auto& tensors = j.at("tensors");
    for (const auto& v : tensor_views(ck.net)) {
        const auto it = tensors.find(v.name);
        require(it != tensors.end(), "checkpoint missing tensor: " + v.name);
        require(it->size() == v.n, "checkpoint tensor size mismatch: " + v.name);
        for (std::size_t i = 0; i < v.n; ++i) v.data[i] = (*it)[i].get<double>();
    }

    const auto& stj = j.at("standardizer");
    ck.standardizer.fitted = stj.at("fitted").get<bool>();
    const auto& stats = stj.at("stats");
    for (int s = 0; s < kSceneCount; ++s)
        for (int c = 0; c < kChannelCount; ++c) {
            const auto& cell = stats.at(static_cast<std::size_t>(s)).at(static_cast<std::size_t>(c));
            ck.standardizer.stats[static_cast<std::size_t>(s)][static_cast<std::size_t>(c)] = {
                cell.at("mean").get<double>(), cell.at("sd").get<double>()};
        }
    ck.standardizer.fitted_patient_ids =
        stj.at("fitted_patient_ids").get<std::vector<std::string>>();
    return ck;
}

}  // namespace cardio::nn
