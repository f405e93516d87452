#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "cardio/common.hpp"
#include "cardio/nn.hpp"

using namespace cardio;
using namespace cardio::nn;

namespace {

PatientExample make_example(std::size_t m, std::uint64_t seed, Label label = Label::H) {
    Rng rng(mix_seed(seed, 0xe9));
    PatientExample ex;
    ex.patient_id = "P" + std::to_string(seed);
    ex.label = label;
    for (int j = 0; j < kSceneCount; ++j) {
        ex.scenes[j].scene = kSceneOrder[j];
        for (int c = 0; c < kChannelCount; ++c) {
            ex.scenes[j].ch[c].resize(m);
            for (auto& v : ex.scenes[j].ch[c]) v = rng.uniform(-1.0, 1.0);
        }
    }
    return ex;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    REQUIRE(a.size() == b.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::fabs(a[i] - b[i]));
    return worst;
}

// ---------------------------------------------------------------------------
// A second, deliberately plain forward implementation used as an oracle.
// Everything is written with index loops and no shared helpers.
// ---------------------------------------------------------------------------

double naive_sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

struct NaiveSeq {
    std::vector<std::vector<double>> h;  // time-indexed hidden states
};

NaiveSeq naive_lstm(const std::vector<std::vector<double>>& x,  // x[t] has d entries
                    const LstmCellParams& p, bool reverse) {
    const std::size_t m = x.size();
    const std::size_t hh = p.U.cols;
    NaiveSeq out;
    out.h.assign(m, std::vector<double>(hh, 0.0));
    std::vector<double> hprev(hh, 0.0), cprev(hh, 0.0);
    for (std::size_t step = 0; step < m; ++step) {
        const std::size_t t = reverse ? m - 1 - step : step;
        std::vector<double> hnew(hh), cnew(hh);
        for (std::size_t r = 0; r < hh; ++r) {
            double zi = p.b[r], zf = p.b[r + hh], zg = p.b[r + 2 * hh], zo = p.b[r + 3 * hh];
            for (std::size_t c = 0; c < p.W.cols; ++c) {
                zi += p.W(r, c) * x[t][c];
                zf += p.W(r + hh, c) * x[t][c];
                zg += p.W(r + 2 * hh, c) * x[t][c];
                zo += p.W(r + 3 * hh, c) * x[t][c];
            }
            for (std::size_t c = 0; c < hh; ++c) {
                zi += p.U(r, c) * hprev[c];
                zf += p.U(r + hh, c) * hprev[c];
                zg += p.U(r + 2 * hh, c) * hprev[c];
                zo += p.U(r + 3 * hh, c) * hprev[c];
            }
            const double gi = naive_sigmoid(zi), gf = naive_sigmoid(zf);
            const double gg = std::tanh(zg), go = naive_sigmoid(zo);
            cnew[r] = gf * cprev[r] + gi * gg;
            hnew[r] = go * std::tanh(cnew[r]);
        }
        out.h[t] = hnew;
        hprev = std::move(hnew);
        cprev = std::move(cnew);
    }
    return out;
}

double naive_predict(const PatientExample& ex, const Network& net) {
    const auto& cfg = net.encoder_cfg;
    const bool bi = cfg.family == Family::BiLstm;
    std::vector<double> feat;
    for (int j = 0; j < kSceneCount; ++j) {
        const std::size_t m = ex.scenes[j].ch[0].size();
        std::vector<std::vector<double>> x(m, std::vector<double>(kChannelCount, 0.0));
        for (std::size_t t = 0; t < m; ++t)
            for (int c = 0; c < kChannelCount; ++c) x[t][c] = ex.scenes[j].ch[c][t];
        const auto& stack = net.encoders[cfg.shared_across_scenes ? 0 : j];
        NaiveSeq f, b;
        for (std::size_t l = 0; l < stack.size(); ++l) {
            f = naive_lstm(x, stack[l].fwd, false);
            if (bi) b = naive_lstm(x, stack[l].bwd, true);
            if (l + 1 < stack.size()) {
                std::vector<std::vector<double>> nx(m);
                for (std::size_t t = 0; t < m; ++t) {
                    nx[t] = f.h[t];
                    if (bi) nx[t].insert(nx[t].end(), b.h[t].begin(), b.h[t].end());
                }
                x = std::move(nx);
            }
        }
        feat.insert(feat.end(), f.h.back().begin(), f.h.back().end());
        if (bi) feat.insert(feat.end(), b.h.front().begin(), b.h.front().end());
    }
    std::vector<double> act = feat;
    for (std::size_t l = 0; l < net.head.size(); ++l) {
        const auto& dp = net.head[l];
        std::vector<double> z(dp.b);
        for (std::size_t r = 0; r < dp.W.rows; ++r)
            for (std::size_t c = 0; c < dp.W.cols; ++c) z[r] += dp.W(r, c) * act[c];
        if (l + 1 < net.head.size())
            for (auto& v : z) v = std::tanh(v);
        act = std::move(z);
    }
    return naive_sigmoid(act[0]);
}

// Central finite differences of the loss w.r.t. every parameter.
double gradcheck_worst_rel(const EncoderConfig& enc, const HeadConfig& head, std::uint64_t seed,
                           std::size_t m, double y) {
    Network net = init_network(enc, head, seed);
    const PatientExample ex = make_example(m, seed ^ 0x5151);
    const BackwardResult res = backward(ex, y, net);

    Network grads = res.grads;
    auto gviews = tensor_views(grads);
    auto pviews = tensor_views(net);
    const double step = 1e-5;
    double worst = 0.0;
    for (std::size_t ti = 0; ti < pviews.size(); ++ti) {
        for (std::size_t i = 0; i < pviews[ti].n; ++i) {
            double& p = pviews[ti].data[i];
            const double keep = p;
            p = keep + step;
            const double lp = bce_loss(encode_scenes(ex, net), y);
            p = keep - step;
            const double lm = bce_loss(encode_scenes(ex, net), y);
            p = keep;
            const double fd = (lp - lm) / (2.0 * step);
            const double an = gviews[ti].data[i];
            const double rel = std::fabs(an - fd) / std::max({std::fabs(an), std::fabs(fd), 1e-5});
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("cardio_nn_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
};

std::string slurp(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

}  // namespace

TEST_CASE("zero network outputs exactly one half") {
    EncoderConfig enc;
    enc.hidden = 4;
    enc.layers = 2;
    HeadConfig head;
    head.hidden_sizes = {8, 3};
    Network z = zeros_like(init_network(enc, head, 7));
    const auto ex = make_example(40, 3);
    CHECK(encode_scenes(ex, z) == 0.5);
}

TEST_CASE("three-step recurrence matches a hand-unrolled computation") {
    // h = 1, d = 1: every gate is a scalar affine function.
    LstmCellParams p;
    p.W = Matrix(4, 1);
    p.U = Matrix(4, 1);
    p.b = {0.10, -0.20, 0.30, 0.05};
    p.W.v = {0.5, -0.3, 0.8, 0.4};   // wi, wf, wg, wo
    p.U.v = {0.2, 0.6, -0.5, 0.25};  // ui, uf, ug, uo
    const std::vector<double> xs = {0.7, -1.1, 0.4};
    Matrix x(1, 3);
    x.v = xs;

    double hh = 0.0, cc = 0.0;
    std::vector<double> expect;
    for (double xt : xs) {
        const double gi = 1.0 / (1.0 + std::exp(-(0.5 * xt + 0.2 * hh + 0.10)));
        const double gf = 1.0 / (1.0 + std::exp(-(-0.3 * xt + 0.6 * hh - 0.20)));
        const double gg = std::tanh(0.8 * xt - 0.5 * hh + 0.30);
        const double go = 1.0 / (1.0 + std::exp(-(0.4 * xt + 0.25 * hh + 0.05)));
        cc = gf * cc + gi * gg;
        hh = go * std::tanh(cc);
        expect.push_back(hh);
    }

    LstmState st;
    const Matrix y = lstm_forward(x, p, Direction::Forward, &st);
    REQUIRE(y.rows == 3);
    for (std::size_t t = 0; t < 3; ++t) CHECK(std::fabs(y(t, 0) - expect[t]) < 1e-12);
    CHECK(std::fabs(st.h[0] - expect[2]) < 1e-12);
    CHECK(std::fabs(st.c[0] - cc) < 1e-12);
}

TEST_CASE("backward direction equals forward on the reversed sequence") {
    Rng rng(11);
    LstmCellParams p;
    p.W = Matrix(12, 4);
    p.U = Matrix(12, 3);
    p.b.assign(12, 0.0);
    for (auto& v : p.W.v) v = rng.uniform(-0.5, 0.5);
    for (auto& v : p.U.v) v = rng.uniform(-0.5, 0.5);
    for (auto& v : p.b) v = rng.uniform(-0.5, 0.5);
    const std::size_t m = 17;
    Matrix x(4, m), xr(4, m);
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t t = 0; t < m; ++t) {
            x(r, t) = rng.uniform(-1.0, 1.0);
        }
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t t = 0; t < m; ++t) xr(r, t) = x(r, m - 1 - t);

    LstmState sb, sf;
    const Matrix yb = lstm_forward(x, p, Direction::Backward, &sb);
    const Matrix yf = lstm_forward(xr, p, Direction::Forward, &sf);
    double worst = 0.0;
    for (std::size_t t = 0; t < m; ++t)
        for (std::size_t r = 0; r < 3; ++r)
            worst = std::max(worst, std::fabs(yb(t, r) - yf(m - 1 - t, r)));
    CHECK(worst == 0.0);
    CHECK(max_abs_diff(sb.h, sf.h) == 0.0);
    // The backward pass ends at t = 0, so its final state is the first row.
    for (std::size_t r = 0; r < 3; ++r) CHECK(sb.h[r] == yb(0, r));
}

TEST_CASE("forward pass matches an independent implementation") {
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        EncoderConfig enc;
        enc.hidden = 2;
        enc.layers = 2;
        enc.family = Family::BiLstm;
        HeadConfig head;
        head.hidden_sizes = {2};
        const Network net = init_network(enc, head, seed);
        const auto ex = make_example(25, seed + 50);
        CHECK(std::fabs(encode_scenes(ex, net) - naive_predict(ex, net)) < 1e-12);
    }
    // Unidirectional and per-scene variants hit the other code paths.
    EncoderConfig enc;
    enc.hidden = 3;
    enc.layers = 1;
    enc.family = Family::Lstm;
    enc.shared_across_scenes = false;
    HeadConfig head;
    head.hidden_sizes = {};
    const Network net = init_network(enc, head, 9);
    const auto ex = make_example(18, 77);
    CHECK(std::fabs(encode_scenes(ex, net) - naive_predict(ex, net)) < 1e-12);
}

TEST_CASE("forward pass is bit deterministic") {
    EncoderConfig enc;
    enc.hidden = 5;
    enc.layers = 2;
    HeadConfig head;
    const Network net = init_network(enc, head, 21);
    const auto ex = make_example(30, 4);
    CHECK(encode_scenes(ex, net) == encode_scenes(ex, net));
    auto g1 = backward(ex, 1.0, net);
    auto g2 = backward(ex, 1.0, net);
    auto v1 = tensor_views(g1.grads);
    auto v2 = tensor_views(g2.grads);
    for (std::size_t i = 0; i < v1.size(); ++i)
        for (std::size_t k = 0; k < v1[i].n; ++k) CHECK(v1[i].data[k] == v2[i].data[k]);
}

TEST_CASE("probabilities stay strictly inside the unit interval") {
    EncoderConfig enc;
    enc.hidden = 3;
    enc.layers = 1;
    HeadConfig head;
    head.hidden_sizes = {4};
    for (std::uint64_t s = 0; s < 20; ++s) {
        const Network net = init_network(enc, head, s);
        const double p = encode_scenes(make_example(15, s), net);
        CHECK(p > 0.0);
        CHECK(p < 1.0);
    }
}

TEST_CASE("scene order is significant") {
    EncoderConfig enc;
    enc.hidden = 3;
    enc.layers = 1;
    HeadConfig head;
    const Network net = init_network(enc, head, 5);
    auto ex = make_example(20, 6);
    const double base = encode_scenes(ex, net);
    std::swap(ex.scenes[0], ex.scenes[3]);
    CHECK(encode_scenes(ex, net) != base);

    // Identical inputs in every scene make the shared encoder permutation
    // invariant.
    auto same = make_example(20, 8);
    for (int j = 1; j < kSceneCount; ++j) same.scenes[j].ch = same.scenes[0].ch;
    const double p1 = encode_scenes(same, net);
    std::swap(same.scenes[1], same.scenes[4]);
    CHECK(encode_scenes(same, net) == p1);
}

TEST_CASE("shape violations are rejected") {
    EncoderConfig enc;
    enc.hidden = 2;
    enc.layers = 1;
    HeadConfig head;
    const Network net = init_network(enc, head, 1);
    auto ex = make_example(10, 2);
    ex.scenes[2].ch[4].resize(9);  // ragged channel
    CHECK_THROWS_AS(encode_scenes(ex, net), ContractError);
    auto empty = make_example(10, 2);
    empty.scenes[4].ch = {};
    CHECK_THROWS_AS(encode_scenes(empty, net), ContractError);

    Matrix bad(5, 10);  // cell expects 6 input rows
    CHECK_THROWS_AS(lstm_forward(bad, net.encoders[0][0].fwd, Direction::Forward), ContractError);
}

TEST_CASE("binary cross entropy against analytic values") {
    CHECK(bce_loss(0.5, 0.0) == doctest::Approx(0.6931471805599453).epsilon(1e-12));
    CHECK(bce_loss(0.5, 1.0) == doctest::Approx(0.6931471805599453).epsilon(1e-12));
    CHECK(bce_loss(0.9, 1.0) == doctest::Approx(0.105360515657826).epsilon(1e-9));
    // Exact predictions are capped by the clamp.
    CHECK(bce_loss(1.0, 1.0) <= -std::log(1.0 - 1e-7) + 1e-15);
    CHECK(bce_loss(0.0, 0.0) <= -std::log(1.0 - 1e-7) + 1e-15);
    CHECK(bce_loss(1.0, 1.0) > 0.0);
}

TEST_CASE("analytic gradients match central finite differences") {
    EncoderConfig enc;
    enc.hidden = 3;
    enc.layers = 2;
    enc.family = Family::BiLstm;
    HeadConfig head;
    head.hidden_sizes = {4};
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const double y = seed % 2 == 0 ? 0.0 : 1.0;
        worst = std::max(worst, gradcheck_worst_rel(enc, head, seed, 12, y));
    }
    MESSAGE("BiLSTM stacked gradcheck worst relative error: ", worst);
    CHECK(worst < 1e-4);

    // Unidirectional, per-scene encoders, bare head.
    EncoderConfig uni;
    uni.hidden = 2;
    uni.layers = 2;
    uni.family = Family::Lstm;
    uni.shared_across_scenes = false;
    HeadConfig bare;
    bare.hidden_sizes = {};
    const double w2 = std::max(gradcheck_worst_rel(uni, bare, 31, 9, 1.0),
                               gradcheck_worst_rel(uni, bare, 32, 9, 0.0));
    MESSAGE("LSTM per-scene gradcheck worst relative error: ", w2);
    CHECK(w2 < 1e-4);
}

TEST_CASE("averaged gradients vanish at the symmetric point") {
    EncoderConfig enc;
    enc.hidden = 3;
    enc.layers = 1;
    HeadConfig head;
    head.hidden_sizes = {4};
    Network z = zeros_like(init_network(enc, head, 3));
    const auto ex = make_example(15, 9);
    const auto g0 = backward(ex, 0.0, z);
    const auto g1 = backward(ex, 1.0, z);
    CHECK(g0.p == 0.5);
    const auto& w0 = g0.grads.head.back();
    const auto& w1 = g1.grads.head.back();
    for (std::size_t i = 0; i < w0.W.v.size(); ++i)
        CHECK(w0.W.v[i] + w1.W.v[i] == 0.0);
    CHECK(w0.b[0] + w1.b[0] == 0.0);
}

TEST_CASE("frozen tensors receive exactly zero gradients") {
    EncoderConfig enc;
    enc.hidden = 3;
    enc.layers = 2;
    HeadConfig head;
    const Network net = init_network(enc, head, 12);
    const auto ex = make_example(14, 13);
    Network plain = backward(ex, 1.0, net).grads;
    auto views = tensor_views(plain);

    std::vector<bool> frozen(views.size(), false);
    frozen[0] = true;                      // first recurrent tensor
    frozen[views.size() - 1] = true;       // head output bias
    Network masked = backward(ex, 1.0, net, &frozen).grads;
    auto mviews = tensor_views(masked);
    for (std::size_t i = 0; i < views.size(); ++i)
        for (std::size_t k = 0; k < views[i].n; ++k) {
            if (frozen[i])
                CHECK(mviews[i].data[k] == 0.0);
            else
                CHECK(mviews[i].data[k] == views[i].data[k]);
        }
}

TEST_CASE("parameter count formula matches tensor enumeration") {
    EncoderConfig tiny;
    tiny.family = Family::Lstm;
    tiny.hidden = 1;
    tiny.layers = 1;
    tiny.input_dim = 1;
    CHECK(encoder_parameter_count(tiny) == 12);

    EncoderConfig full;
    full.family = Family::BiLstm;
    full.hidden = 128;
    full.layers = 2;
    HeadConfig head;  // default [64, 16]
    Network net = init_network(full, head, 0);
    const std::int64_t formula = count_parameters(full, head);
    CHECK(formula == enumerate_parameters(net));

    EncoderConfig per_scene = full;
    per_scene.shared_across_scenes = false;
    Network net5 = init_network(per_scene, head, 0);
    CHECK(count_parameters(per_scene, head) == enumerate_parameters(net5));
    MESSAGE("shared BiLSTM(128,2) parameters: ", formula,
            "; per-scene variant: ", count_parameters(per_scene, head),
            "; reference constant 2683041");

    // Sweep a few shapes so the formula is exercised off the defaults.
    for (int hsz : {1, 3, 8})
        for (int layers : {1, 2, 3})
            for (int fam : {0, 1}) {
                EncoderConfig e;
                e.hidden = hsz;
                e.layers = layers;
                e.family = fam == 0 ? Family::Lstm : Family::BiLstm;
                HeadConfig h;
                h.hidden_sizes = {5, 2};
                Network n = init_network(e, h, 4);
                CHECK(count_parameters(e, h) == enumerate_parameters(n));
            }
}

TEST_CASE("initialization is seeded and opens the forget gate") {
    EncoderConfig enc;
    enc.hidden = 4;
    enc.layers = 2;
    HeadConfig head;
    Network a = init_network(enc, head, 33);
    Network b = init_network(enc, head, 33);
    Network c = init_network(enc, head, 34);
    auto va = tensor_views(a), vb = tensor_views(b), vc = tensor_views(c);
    bool all_equal = true, any_diff = false;
    for (std::size_t i = 0; i < va.size(); ++i)
        for (std::size_t k = 0; k < va[i].n; ++k) {
            all_equal &= va[i].data[k] == vb[i].data[k];
            any_diff |= va[i].data[k] != vc[i].data[k];
        }
    CHECK(all_equal);
    CHECK(any_diff);

    const auto& bias = a.encoders[0][0].fwd.b;
    for (int r = 0; r < 4; ++r) CHECK(bias[4 + r] == 1.0);   // forget block
    for (int r = 0; r < 4; ++r) CHECK(bias[r] == 0.0);       // input block
    // Weight magnitudes respect the fan-in bound.
    const auto& W = a.encoders[0][0].fwd.W;
    const double bound = 1.0 / std::sqrt(6.0);
    for (double w : W.v) CHECK(std::fabs(w) <= bound);
}

TEST_CASE("standardizer uses only its training split") {
    std::vector<PatientExample> train = {make_example(20, 1), make_example(20, 2)};
    train[0].patient_id = "A";
    train[1].patient_id = "B";
    Standardizer st;
    st.fit(train);
    REQUIRE(st.fitted);
    CHECK(st.fitted_patient_ids == std::vector<std::string>{"A", "B"});

    // Transformed training data has mean 0 and unit variance per slot.
    const auto z0 = st.apply(train[0]);
    const auto z1 = st.apply(train[1]);
    for (int j = 0; j < kSceneCount; ++j)
        for (int c = 0; c < kChannelCount; ++c) {
            std::vector<double> all = z0.scenes[j].ch[c];
            all.insert(all.end(), z1.scenes[j].ch[c].begin(), z1.scenes[j].ch[c].end());
            const auto ms = mean_sd(all);
            CHECK(std::fabs(ms.mean) < 1e-12);
            CHECK(ms.sd == doctest::Approx(1.0).epsilon(1e-9));
        }

    Standardizer unfitted;
    CHECK_THROWS_AS(unfitted.apply(train[0]), ContractError);
    CHECK_THROWS_AS(unfitted.fit({}), ContractError);

    // Constant channels standardize to zero rather than dividing by zero.
    auto flat = make_example(20, 3);
    for (auto& c : flat.scenes[0].ch) std::fill(c.begin(), c.end(), 2.5);
    Standardizer st2;
    st2.fit({flat});
    const auto zf = st2.apply(flat);
    for (double v : zf.scenes[0].ch[0]) CHECK(v == 0.0);
}

TEST_CASE("checkpoints round trip bit for bit") {
    TempDir tmp;
    EncoderConfig enc;
    enc.hidden = 3;
    enc.layers = 2;
    enc.family = Family::BiLstm;
    HeadConfig head;
    head.hidden_sizes = {5};
    Network net = init_network(enc, head, 99);
    Standardizer st;
    st.fit({make_example(12, 5), make_example(12, 6)});

    const auto file = tmp.path / "model.ckpt";
    save_checkpoint(file, net, st);
    Checkpoint ck = load_checkpoint(file);

    CHECK(ck.net.encoder_cfg.family == enc.family);
    CHECK(ck.net.encoder_cfg.hidden == enc.hidden);
    CHECK(ck.net.head_cfg.hidden_sizes == head.hidden_sizes);
    auto va = tensor_views(net), vb = tensor_views(ck.net);
    REQUIRE(va.size() == vb.size());
    for (std::size_t i = 0; i < va.size(); ++i) {
        REQUIRE(va[i].n == vb[i].n);
        for (std::size_t k = 0; k < va[i].n; ++k) CHECK(va[i].data[k] == vb[i].data[k]);
    }
    CHECK(ck.standardizer.fitted);
    for (int j = 0; j < kSceneCount; ++j)
        for (int c = 0; c < kChannelCount; ++c) {
            CHECK(ck.standardizer.stats[j][c].mean == st.stats[j][c].mean);
            CHECK(ck.standardizer.stats[j][c].sd == st.stats[j][c].sd);
        }
    CHECK(ck.standardizer.fitted_patient_ids == st.fitted_patient_ids);

    // Saving the loaded model reproduces the file byte for byte.
    const auto file2 = tmp.path / "model2.ckpt";
    save_checkpoint(file2, ck.net, ck.standardizer);
    CHECK(slurp(file) == slurp(file2));

    CHECK_THROWS_AS(load_checkpoint(tmp.path / "absent.ckpt"), IoError);
    std::ofstream bad(tmp.path / "bad.ckpt");
    bad << "{}";
    bad.close();
    CHECK_THROWS_AS(load_checkpoint(tmp.path / "bad.ckpt"), IoError);
}
