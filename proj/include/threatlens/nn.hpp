#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "threatlens/common.hpp"

namespace threatlens::nn {

// ---------------------------------------------------------------------------
// Dense row-major containers. Everything internal runs in double precision;
// persistence converts to float32.
// ---------------------------------------------------------------------------

struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> v;

    Mat() = default;
    Mat(std::size_t r, std::size_t c) : rows(r), cols(c), v(r * c, 0.0) {}

    double& at(std::size_t r, std::size_t c) { return v[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
};

struct Seq {
    std::size_t batch = 0;
    std::size_t steps = 0;
    std::size_t feat = 0;
    std::vector<double> v;

    Seq() = default;
    Seq(std::size_t b, std::size_t t, std::size_t f)
        : batch(b), steps(t), feat(f), v(b * t * f, 0.0) {}

    double& at(std::size_t b, std::size_t t, std::size_t f) {
        return v[(b * steps + t) * feat + f];
    }
    double at(std::size_t b, std::size_t t, std::size_t f) const {
        return v[(b * steps + t) * feat + f];
    }
};

struct TokenBatch {
    std::size_t batch = 0;
    std::size_t steps = 0;
    std::vector<int> v;  // batch-major

    TokenBatch() = default;
    TokenBatch(std::size_t b, std::size_t t) : batch(b), steps(t), v(b * t, 0) {}

    int& at(std::size_t b, std::size_t t) { return v[b * steps + t]; }
    int at(std::size_t b, std::size_t t) const { return v[b * steps + t]; }
};

// Tagged activation passed between layers.
struct Activation {
    enum class Kind { Tokens, Seq, Flat };
    Kind kind = Kind::Flat;
    TokenBatch tokens;
    Seq seq;
    Mat flat;

    static Activation from_tokens(TokenBatch t) {
        Activation a;
        a.kind = Kind::Tokens;
        a.tokens = std::move(t);
        return a;
    }
    static Activation from_seq(Seq s) {
        Activation a;
        a.kind = Kind::Seq;
        a.seq = std::move(s);
        return a;
    }
    static Activation from_flat(Mat m) {
        Activation a;
        a.kind = Kind::Flat;
        a.flat = std::move(m);
        return a;
    }
};

// C (m x n) += A (m x k) * B (k x n)
inline void mm_acc(const Mat& a, const Mat& b, Mat& c) {
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double av = a.at(i, k);
            if (av == 0.0) continue;
            const double* brow = &b.v[k * b.cols];
            double* crow = &c.v[i * c.cols];
            for (std::size_t j = 0; j < b.cols; ++j) crow[j] += av * brow[j];
        }
    }
}

// C (m x n) += A (m x k) * B^T (B is n x k)
inline void mm_acc_bt(const Mat& a, const Mat& b, Mat& c) {
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t j = 0; j < b.rows; ++j) {
            double sum = 0.0;
            const double* arow = &a.v[i * a.cols];
            const double* brow = &b.v[j * b.cols];
            for (std::size_t k = 0; k < a.cols; ++k) sum += arow[k] * brow[k];
            c.at(i, j) += sum;
        }
    }
}

// C (k x n) += A^T (A is m x k) * B (m x n)
inline void mm_acc_at(const Mat& a, const Mat& b, Mat& c) {
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = &a.v[i * a.cols];
        const double* brow = &b.v[i * b.cols];
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double av = arow[k];
            if (av == 0.0) continue;
            double* crow = &c.v[k * c.cols];
            for (std::size_t j = 0; j < b.cols; ++j) crow[j] += av * brow[j];
        }
    }
}

// ---------------------------------------------------------------------------
// Named parameters.
// ---------------------------------------------------------------------------

struct Param {
    std::string name;
    std::size_t rows = 0;  // 1 for biases
    std::size_t cols = 0;
    std::vector<double> value;
    std::vector<double> grad;

    Param() = default;
    Param(std::string n, std::size_t r, std::size_t c)
        : name(std::move(n)), rows(r), cols(c), value(r * c, 0.0), grad(r * c, 0.0) {}

    std::size_t size() const { return value.size(); }

    Mat as_mat() const {
        Mat m(rows, cols);
        m.v = value;
        return m;
    }
};

inline void glorot_init(Param& p, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(p.rows + p.cols));
    for (auto& x : p.value) x = rng.uniform(-limit, limit);
}

// ---------------------------------------------------------------------------
// Layers. Each layer caches what its own backward pass needs; the network
// guarantees one backward per forward.
// ---------------------------------------------------------------------------

class Layer {
public:
    virtual ~Layer() = default;
    virtual Activation forward(const Activation& in, bool train, Rng& dropout_rng) = 0;
    virtual Activation backward(const Activation& grad_out) = 0;
    virtual std::vector<Param*> params() { return {}; }
    virtual void init(Rng&) {}
};

class EmbeddingLayer : public Layer {
public:
    EmbeddingLayer(std::size_t table_rows, std::size_t dim, std::string name = "embedding")
        : table_(name + ".E", table_rows, dim) {}

    void init(Rng& rng) override {
        for (auto& x : table_.value) x = rng.uniform(-0.05, 0.05);
    }

    Activation forward(const Activation& in, bool, Rng&) override {
        if (in.kind != Activation::Kind::Tokens) throw ShapeError("embedding expects token input");
        cached_tokens_ = in.tokens;
        Seq out(in.tokens.batch, in.tokens.steps, table_.cols);
        for (std::size_t b = 0; b < out.batch; ++b)
            for (std::size_t t = 0; t < out.steps; ++t) {
                int row = in.tokens.at(b, t);
                if (row < 0 || static_cast<std::size_t>(row) >= table_.rows)
                    throw ShapeError("token index outside embedding table");
                const double* src = &table_.value[static_cast<std::size_t>(row) * table_.cols];
                for (std::size_t f = 0; f < table_.cols; ++f) out.at(b, t, f) = src[f];
            }
        return Activation::from_seq(std::move(out));
    }

    Activation backward(const Activation& grad_out) override {
        const Seq& g = grad_out.seq;
        for (std::size_t b = 0; b < g.batch; ++b)
            for (std::size_t t = 0; t < g.steps; ++t) {
                std::size_t row = static_cast<std::size_t>(cached_tokens_.at(b, t));
                double* dst = &table_.grad[row * table_.cols];
                for (std::size_t f = 0; f < g.feat; ++f) dst[f] += g.at(b, t, f);
            }
        return Activation{};  // tokens have no gradient
    }

    std::vector<Param*> params() override { return {&table_}; }
    Param& table() { return table_; }

private:
    Param table_;
    TokenBatch cached_tokens_;
};

enum class CellKind { Rnn, Lstm, Gru };

inline const char* to_string(CellKind c) {
    switch (c) {
        case CellKind::Rnn: return "rnn";
        case CellKind::Lstm: return "lstm";
        case CellKind::Gru: return "gru";
    }
    return "?";
}

// Bidirectional recurrent layer. Forward and backward passes run the same
// cell over opposite time orders; their hidden states are concatenated per
// timestep ([fwd ; bwd]). With return_seq off, the output is the
// concatenation of each direction's final state.
class BiRecurrentLayer : public Layer {
public:
    BiRecurrentLayer(CellKind cell, std::size_t in_dim, std::size_t units, bool return_seq,
                     std::string name)
        : cell_(cell), in_dim_(in_dim), units_(units), return_seq_(return_seq) {
        build_dir(fwd_, name + ".fwd");
        build_dir(bwd_, name + ".bwd");
    }

    void init(Rng& rng) override {
        for (auto* p : params())
            if (p->rows > 1) glorot_init(*p, rng);  // biases stay zero
    }

    std::vector<Param*> params() override {
        std::vector<Param*> out;
        for (auto& p : fwd_.params) out.push_back(&p);
        for (auto& p : bwd_.params) out.push_back(&p);
        return out;
    }

    Activation forward(const Activation& in, bool, Rng&) override {
        if (in.kind != Activation::Kind::Seq) throw ShapeError("recurrent layer expects a sequence");
        if (in.seq.feat != in_dim_) throw ShapeError("recurrent input width mismatch");
        x_ = in.seq;
        run_direction(fwd_, /*reverse=*/false);
        run_direction(bwd_, /*reverse=*/true);

        const std::size_t b = x_.batch, t = x_.steps, u = units_;
        if (return_seq_) {
            Seq out(b, t, 2 * u);
            for (std::size_t bi = 0; bi < b; ++bi)
                for (std::size_t ti = 0; ti < t; ++ti)
                    for (std::size_t k = 0; k < u; ++k) {
                        out.at(bi, ti, k) = fwd_.h[ti].at(bi, k);
                        out.at(bi, ti, u + k) = bwd_.h[ti].at(bi, k);
                    }
            return Activation::from_seq(std::move(out));
        }
        Mat out(b, 2 * u);
        for (std::size_t bi = 0; bi < b; ++bi)
            for (std::size_t k = 0; k < u; ++k) {
                out.at(bi, k) = fwd_.h[t - 1].at(bi, k);
                out.at(bi, u + k) = bwd_.h[0].at(bi, k);  // bwd final state sits at t=0
            }
        return Activation::from_flat(std::move(out));
    }

    Activation backward(const Activation& grad_out) override {
        const std::size_t b = x_.batch, t = x_.steps, u = units_;
        // Per-timestep output gradient for each direction.
        std::vector<Mat> dh_f(t), dh_b(t);
        for (std::size_t ti = 0; ti < t; ++ti) {
            dh_f[ti] = Mat(b, u);
            dh_b[ti] = Mat(b, u);
        }
        if (return_seq_) {
            const Seq& g = grad_out.seq;
            for (std::size_t bi = 0; bi < b; ++bi)
                for (std::size_t ti = 0; ti < t; ++ti)
                    for (std::size_t k = 0; k < u; ++k) {
                        dh_f[ti].at(bi, k) = g.at(bi, ti, k);
                        dh_b[ti].at(bi, k) = g.at(bi, ti, u + k);
                    }
        } else {
            const Mat& g = grad_out.flat;
            for (std::size_t bi = 0; bi < b; ++bi)
                for (std::size_t k = 0; k < u; ++k) {
                    dh_f[t - 1].at(bi, k) = g.at(bi, k);
                    dh_b[0].at(bi, k) = g.at(bi, u + k);
                }
        }
        Seq dx(b, t, in_dim_);
        bptt(fwd_, dh_f, /*reverse=*/false, dx);
        bptt(bwd_, dh_b, /*reverse=*/true, dx);
        return Activation::from_seq(std::move(dx));
    }

    std::size_t units() const { return units_; }
    bool returns_sequence() const { return return_seq_; }
    CellKind cell() const { return cell_; }

private:
    struct Direction {
        std::vector<Param> params;
        // Cached per-step activations (indexed by original time position).
        std::vector<Mat> h;
        std::vector<Mat> c, tc;          // LSTM cell state, tanh(c)
        std::vector<Mat> gi, gf, gg, go; // LSTM gates
        std::vector<Mat> gz, gr, gn;     // GRU gates
    };

    void build_dir(Direction& dir, const std::string& prefix) {
        auto add = [&](const std::string& n, std::size_t r, std::size_t c) {
            dir.params.emplace_back(prefix + "." + n, r, c);
        };
        switch (cell_) {
            case CellKind::Rnn:
                add("Wx", in_dim_, units_);
                add("Wh", units_, units_);
                add("b", 1, units_);
                break;
            case CellKind::Lstm:
                for (const char* g : {"i", "f", "g", "o"}) {
                    add(std::string("Wx") + g, in_dim_, units_);
                    add(std::string("Wh") + g, units_, units_);
                    add(std::string("b") + g, 1, units_);
                }
                break;
            case CellKind::Gru:
                for (const char* g : {"z", "r", "n"}) {
                    add(std::string("Wx") + g, in_dim_, units_);
                    add(std::string("Wh") + g, units_, units_);
                    add(std::string("b") + g, 1, units_);
                }
                break;
        }
    }

    Mat step_input(std::size_t t) const {
        Mat x(x_.batch, in_dim_);
        for (std::size_t b = 0; b < x_.batch; ++b)
            for (std::size_t f = 0; f < in_dim_; ++f) x.at(b, f) = x_.at(b, t, f);
        return x;
    }

    static Mat affine(const Mat& x, const Param& wx, const Mat& h, const Param& wh,
                      const Param& bias) {
        Mat z(x.rows, wx.cols);
        for (std::size_t i = 0; i < z.rows; ++i)
            for (std::size_t j = 0; j < z.cols; ++j) z.at(i, j) = bias.value[j];
        Mat wxm = wx.as_mat();
        Mat whm = wh.as_mat();
        mm_acc(x, wxm, z);
        mm_acc(h, whm, z);
        return z;
    }

    static void sigmoid_inplace(Mat& m) {
        for (auto& x : m.v) x = 1.0 / (1.0 + std::exp(-x));
    }
    static void tanh_inplace(Mat& m) {
        for (auto& x : m.v) x = std::tanh(x);
    }

    void run_direction(Direction& dir, bool reverse) {
        const std::size_t b = x_.batch, t = x_.steps, u = units_;
        dir.h.assign(t, Mat());
        if (cell_ == CellKind::Lstm) {
            dir.c.assign(t, Mat());
            dir.tc.assign(t, Mat());
            dir.gi.assign(t, Mat());
            dir.gf.assign(t, Mat());
            dir.gg.assign(t, Mat());
            dir.go.assign(t, Mat());
        } else if (cell_ == CellKind::Gru) {
            dir.gz.assign(t, Mat());
            dir.gr.assign(t, Mat());
            dir.gn.assign(t, Mat());
        }

        Mat h_prev(b, u);
        Mat c_prev(b, u);
        for (std::size_t s = 0; s < t; ++s) {
            const std::size_t ti = reverse ? t - 1 - s : s;
            Mat x = step_input(ti);
            switch (cell_) {
                case CellKind::Rnn: {
                    Mat z = affine(x, dir.params[0], h_prev, dir.params[1], dir.params[2]);
                    tanh_inplace(z);
                    dir.h[ti] = z;
                    h_prev = dir.h[ti];
                    break;
                }
                case CellKind::Lstm: {
                    Mat zi = affine(x, dir.params[0], h_prev, dir.params[1], dir.params[2]);
                    Mat zf = affine(x, dir.params[3], h_prev, dir.params[4], dir.params[5]);
                    Mat zg = affine(x, dir.params[6], h_prev, dir.params[7], dir.params[8]);
                    Mat zo = affine(x, dir.params[9], h_prev, dir.params[10], dir.params[11]);
                    sigmoid_inplace(zi);
                    sigmoid_inplace(zf);
                    tanh_inplace(zg);
                    sigmoid_inplace(zo);
                    Mat c(b, u), tc(b, u), h(b, u);
                    for (std::size_t k = 0; k < b * u; ++k) {
                        c.v[k] = zf.v[k] * c_prev.v[k] + zi.v[k] * zg.v[k];
                        tc.v[k] = std::tanh(c.v[k]);
                        h.v[k] = zo.v[k] * tc.v[k];
                    }
                    dir.gi[ti] = std::move(zi);
                    dir.gf[ti] = std::move(zf);
                    dir.gg[ti] = std::move(zg);
                    dir.go[ti] = std::move(zo);
                    dir.c[ti] = c;
                    dir.tc[ti] = std::move(tc);
                    dir.h[ti] = h;
                    h_prev = dir.h[ti];
                    c_prev = std::move(c);
                    break;
                }
                case CellKind::Gru: {
                    Mat zz = affine(x, dir.params[0], h_prev, dir.params[1], dir.params[2]);
                    Mat zr = affine(x, dir.params[3], h_prev, dir.params[4], dir.params[5]);
                    sigmoid_inplace(zz);
                    sigmoid_inplace(zr);
                    Mat rh(b, u);
                    for (std::size_t k = 0; k < b * u; ++k) rh.v[k] = zr.v[k] * h_prev.v[k];
                    Mat zn = affine(x, dir.params[6], rh, dir.params[7], dir.params[8]);
                    tanh_inplace(zn);
                    Mat h(b, u);
                    for (std::size_t k = 0; k < b * u; ++k)
                        h.v[k] = zz.v[k] * h_prev.v[k] + (1.0 - zz.v[k]) * zn.v[k];
                    dir.gz[ti] = std::move(zz);
                    dir.gr[ti] = std::move(zr);
                    dir.gn[ti] = std::move(zn);
                    dir.h[ti] = h;
                    h_prev = dir.h[ti];
                    break;
                }
            }
        }
    }

    // dh_out: gradient flowing into each timestep's hidden output (original
    // time indexing). Accumulates parameter gradients and input gradients.
    void bptt(Direction& dir, std::vector<Mat>& dh_out, bool reverse, Seq& dx) {
        const std::size_t b = x_.batch, t = x_.steps, u = units_;
        Mat dh_carry(b, u);
        Mat dc_carry(b, u);

        auto prev_h = [&](std::size_t s) -> Mat {
            // Previous state in processing order; zeros at the first step.
            if (s == 0) return Mat(b, u);
            const std::size_t ti_prev = reverse ? t - 1 - (s - 1) : s - 1;
            return dir.h[ti_prev];
        };
        auto prev_c = [&](std::size_t s) -> Mat {
            if (s == 0) return Mat(b, u);
            const std::size_t ti_prev = reverse ? t - 1 - (s - 1) : s - 1;
            return dir.c[ti_prev];
        };

        auto accumulate = [&](Param& wx, Param& wh, Param& bias, const Mat& x, const Mat& hp,
                              const Mat& dz, Mat& dx_step, Mat& dh_prev) {
            Mat wxg(wx.rows, wx.cols), whg(wh.rows, wh.cols);
            mm_acc_at(x, dz, wxg);
            mm_acc_at(hp, dz, whg);
            for (std::size_t k = 0; k < wx.size(); ++k) wx.grad[k] += wxg.v[k];
            for (std::size_t k = 0; k < wh.size(); ++k) wh.grad[k] += whg.v[k];
            for (std::size_t i = 0; i < dz.rows; ++i)
                for (std::size_t j = 0; j < dz.cols; ++j) bias.grad[j] += dz.at(i, j);
            Mat wxm = wx.as_mat(), whm = wh.as_mat();
            mm_acc_bt(dz, wxm, dx_step);
            mm_acc_bt(dz, whm, dh_prev);
        };

        for (std::size_t s = t; s-- > 0;) {
            const std::size_t ti = reverse ? t - 1 - s : s;
            Mat x = step_input(ti);
            Mat hp = prev_h(s);
            Mat dh(b, u);
            for (std::size_t k = 0; k < b * u; ++k)
                dh.v[k] = dh_out[ti].v[k] + dh_carry.v[k];

            Mat dx_step(b, in_dim_);
            Mat dh_prev(b, u);

            switch (cell_) {
                case CellKind::Rnn: {
                    Mat dz(b, u);
                    const Mat& h = dir.h[ti];
                    for (std::size_t k = 0; k < b * u; ++k)
                        dz.v[k] = dh.v[k] * (1.0 - h.v[k] * h.v[k]);
                    accumulate(dir.params[0], dir.params[1], dir.params[2], x, hp, dz, dx_step,
                               dh_prev);
                    break;
                }
                case CellKind::Lstm: {
                    const Mat& gi = dir.gi[ti];
                    const Mat& gf = dir.gf[ti];
                    const Mat& gg = dir.gg[ti];
                    const Mat& go = dir.go[ti];
                    const Mat& tc = dir.tc[ti];
                    Mat cp = prev_c(s);
                    Mat dzi(b, u), dzf(b, u), dzg(b, u), dzo(b, u), dc(b, u);
                    for (std::size_t k = 0; k < b * u; ++k) {
                        const double d_o = dh.v[k] * tc.v[k];
                        dc.v[k] = dc_carry.v[k] + dh.v[k] * go.v[k] * (1.0 - tc.v[k] * tc.v[k]);
                        const double d_i = dc.v[k] * gg.v[k];
                        const double d_f = dc.v[k] * cp.v[k];
                        const double d_g = dc.v[k] * gi.v[k];
                        dzi.v[k] = d_i * gi.v[k] * (1.0 - gi.v[k]);
                        dzf.v[k] = d_f * gf.v[k] * (1.0 - gf.v[k]);
                        dzg.v[k] = d_g * (1.0 - gg.v[k] * gg.v[k]);
                        dzo.v[k] = d_o * go.v[k] * (1.0 - go.v[k]);
                    }
                    accumulate(dir.params[0], dir.params[1], dir.params[2], x, hp, dzi, dx_step,
                               dh_prev);
                    accumulate(dir.params[3], dir.params[4], dir.params[5], x, hp, dzf, dx_step,
                               dh_prev);
                    accumulate(dir.params[6], dir.params[7], dir.params[8], x, hp, dzg, dx_step,
                               dh_prev);
                    accumulate(dir.params[9], dir.params[10], dir.params[11], x, hp, dzo, dx_step,
                               dh_prev);
                    for (std::size_t k = 0; k < b * u; ++k) dc_carry.v[k] = dc.v[k] * gf.v[k];
                    break;
                }
                case CellKind::Gru: {
                    const Mat& gz = dir.gz[ti];
                    const Mat& gr = dir.gr[ti];
                    const Mat& gn = dir.gn[ti];
                    Mat dzz(b, u), dzr(b, u), dzn(b, u), rh(b, u);
                    for (std::size_t k = 0; k < b * u; ++k) {
                        const double dn = dh.v[k] * (1.0 - gz.v[k]);
                        const double dz_gate = dh.v[k] * (hp.v[k] - gn.v[k]);
                        dh_prev.v[k] += dh.v[k] * gz.v[k];
                        dzn.v[k] = dn * (1.0 - gn.v[k] * gn.v[k]);
                        dzz.v[k] = dz_gate * gz.v[k] * (1.0 - gz.v[k]);
                        rh.v[k] = gr.v[k] * hp.v[k];
                    }
                    // n gate: recurrent term uses r .* h_prev.
                    {
                        Param& wx = dir.params[6];
                        Param& wh = dir.params[7];
                        Param& bias = dir.params[8];
                        Mat wxg(wx.rows, wx.cols), whg(wh.rows, wh.cols);
                        mm_acc_at(x, dzn, wxg);
                        mm_acc_at(rh, dzn, whg);
                        for (std::size_t k = 0; k < wx.size(); ++k) wx.grad[k] += wxg.v[k];
                        for (std::size_t k = 0; k < wh.size(); ++k) wh.grad[k] += whg.v[k];
                        for (std::size_t i = 0; i < dzn.rows; ++i)
                            for (std::size_t j = 0; j < dzn.cols; ++j)
                                bias.grad[j] += dzn.at(i, j);
                        Mat wxm = wx.as_mat(), whm = wh.as_mat();
                        mm_acc_bt(dzn, wxm, dx_step);
                        Mat drh(b, u);
                        mm_acc_bt(dzn, whm, drh);
                        for (std::size_t k = 0; k < b * u; ++k) {
                            const double dr = drh.v[k] * hp.v[k];
                            dh_prev.v[k] += drh.v[k] * gr.v[k];
                            dzr.v[k] = dr * gr.v[k] * (1.0 - gr.v[k]);
                        }
                    }
                    accumulate(dir.params[0], dir.params[1], dir.params[2], x, hp, dzz, dx_step,
                               dh_prev);
                    accumulate(dir.params[3], dir.params[4], dir.params[5], x, hp, dzr, dx_step,
                               dh_prev);
                    break;
                }
            }

            for (std::size_t bi = 0; bi < b; ++bi)
                for (std::size_t f = 0; f < in_dim_; ++f) dx.at(bi, ti, f) += dx_step.at(bi, f);
            dh_carry = std::move(dh_prev);
        }
    }

    CellKind cell_;
    std::size_t in_dim_;
    std::size_t units_;
    bool return_seq_;
    Seq x_;
    Direction fwd_;
    Direction bwd_;
};

// Dense layer; applied position-wise (shared weights) to sequence inputs.
class DenseLayer : public Layer {
public:
    DenseLayer(std::size_t in_dim, std::size_t out_dim, bool relu, std::string name)
        : w_(name + ".W", in_dim, out_dim), b_(name + ".b", 1, out_dim), relu_(relu) {}

    void init(Rng& rng) override { glorot_init(w_, rng); }

    std::vector<Param*> params() override { return {&w_, &b_}; }

    Activation forward(const Activation& in, bool, Rng&) override {
        kind_ = in.kind;
        if (in.kind == Activation::Kind::Seq) {
            const Seq& s = in.seq;
            x_ = Mat(s.batch * s.steps, s.feat);
            x_.v = s.v;
            batch_ = s.batch;
            steps_ = s.steps;
        } else if (in.kind == Activation::Kind::Flat) {
            x_ = in.flat;
            batch_ = in.flat.rows;
            steps_ = 1;
        } else {
            throw ShapeError("dense layer cannot consume tokens");
        }
        if (x_.cols != w_.rows) throw ShapeError("dense input width mismatch");
        z_ = Mat(x_.rows, w_.cols);
        for (std::size_t i = 0; i < z_.rows; ++i)
            for (std::size_t j = 0; j < z_.cols; ++j) z_.at(i, j) = b_.value[j];
        Mat wm = w_.as_mat();
        mm_acc(x_, wm, z_);
        Mat a = z_;
        if (relu_)
            for (auto& v : a.v) v = std::max(0.0, v);
        if (kind_ == Activation::Kind::Seq) {
            Seq out(batch_, steps_, w_.cols);
            out.v = std::move(a.v);
            return Activation::from_seq(std::move(out));
        }
        return Activation::from_flat(std::move(a));
    }

    Activation backward(const Activation& grad_out) override {
        Mat da;
        if (kind_ == Activation::Kind::Seq) {
            da = Mat(batch_ * steps_, w_.cols);
            da.v = grad_out.seq.v;
        } else {
            da = grad_out.flat;
        }
        if (relu_) {
            for (std::size_t k = 0; k < da.v.size(); ++k)
                if (z_.v[k] <= 0.0) da.v[k] = 0.0;
        }
        Mat wg(w_.rows, w_.cols);
        mm_acc_at(x_, da, wg);
        for (std::size_t k = 0; k < w_.size(); ++k) w_.grad[k] += wg.v[k];
        for (std::size_t i = 0; i < da.rows; ++i)
            for (std::size_t j = 0; j < da.cols; ++j) b_.grad[j] += da.at(i, j);
        Mat dx(x_.rows, x_.cols);
        Mat wm = w_.as_mat();
        mm_acc_bt(da, wm, dx);
        if (kind_ == Activation::Kind::Seq) {
            Seq out(batch_, steps_, x_.cols);
            out.v = std::move(dx.v);
            return Activation::from_seq(std::move(out));
        }
        return Activation::from_flat(std::move(dx));
    }

private:
    Param w_;
    Param b_;
    bool relu_;
    Activation::Kind kind_ = Activation::Kind::Flat;
    Mat x_;
    Mat z_;
    std::size_t batch_ = 0;
    std::size_t steps_ = 0;
};

// Inverted dropout: training-time mask scaled by 1/(1-rate); identity in
// eval mode.
class DropoutLayer : public Layer {
public:
    DropoutLayer(double rate, const std::string&) : rate_(rate) {
        if (rate_ < 0.0 || rate_ >= 1.0) throw ConfigError("dropout rate must be in [0, 1)");
    }

    Activation forward(const Activation& in, bool train, Rng& rng) override {
        kind_ = in.kind;
        if (kind_ == Activation::Kind::Tokens) throw ShapeError("dropout cannot consume tokens");
        const std::vector<double>& src =
            kind_ == Activation::Kind::Seq ? in.seq.v : in.flat.v;
        if (!train || rate_ == 0.0) {
            mask_.clear();
            return in;
        }
        const double keep = 1.0 - rate_;
        mask_.resize(src.size());
        for (auto& m : mask_) m = rng.uniform() < keep ? 1.0 / keep : 0.0;

        Activation out = in;
        std::vector<double>& dst = kind_ == Activation::Kind::Seq ? out.seq.v : out.flat.v;
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] *= mask_[k];
        return out;
    }

    Activation backward(const Activation& grad_out) override {
        if (mask_.empty()) return grad_out;
        Activation out = grad_out;
        std::vector<double>& dst = kind_ == Activation::Kind::Seq ? out.seq.v : out.flat.v;
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] *= mask_[k];
        return out;
    }

    double rate() const { return rate_; }

private:
    double rate_;
    Activation::Kind kind_ = Activation::Kind::Flat;
    std::vector<double> mask_;
};

// ---------------------------------------------------------------------------
// Network: ordered layers ending in a linear "logits" dense layer; softmax
// and mean sparse categorical cross-entropy live here.
// ---------------------------------------------------------------------------

inline void softmax_rows(Mat& m) {
    for (std::size_t i = 0; i < m.rows; ++i) {
        double mx = m.at(i, 0);
        for (std::size_t j = 1; j < m.cols; ++j) mx = std::max(mx, m.at(i, j));
        double sum = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j) {
            double e = std::exp(m.at(i, j) - mx);
            m.at(i, j) = e;
            sum += e;
        }
        for (std::size_t j = 0; j < m.cols; ++j) m.at(i, j) /= sum;
    }
}

class Network {
public:
    template <typename L, typename... Args>
    L* add(Args&&... args) {
        auto layer = std::make_unique<L>(std::forward<Args>(args)...);
        L* raw = layer.get();
        layers_.push_back(std::move(layer));
        return raw;
    }

    void init(std::uint64_t seed) {
        Rng rng(seed);
        for (auto& l : layers_) l->init(rng);
    }

    std::vector<Param*> params() {
        std::vector<Param*> out;
        for (auto& l : layers_)
            for (auto* p : l->params()) out.push_back(p);
        return out;
    }

    std::size_t param_count() {
        std::size_t n = 0;
        for (auto* p : params()) n += p->size();
        return n;
    }

    void zero_grads() {
        for (auto* p : params()) std::fill(p->grad.begin(), p->grad.end(), 0.0);
    }

    // Returns per-row class probabilities and a cache token consumed by
    // backward(). Dropout masks draw from `dropout_seed` in train mode.
    std::pair<Mat, std::uint64_t> forward(const Activation& input, bool train,
                                          std::uint64_t dropout_seed) {
        Rng rng(dropout_seed);
        Activation act = input;
        for (auto& l : layers_) act = l->forward(act, train, rng);
        if (act.kind != Activation::Kind::Flat)
            throw ShapeError("network must end with a flat activation");
        probs_ = act.flat;
        softmax_rows(probs_);
        last_cache_ = ++cache_counter_;
        cache_train_ = train;
        return {probs_, last_cache_};
    }

    // Mean sparse categorical cross-entropy over the batch; parameter
    // gradients are accumulated into Param::grad (zeroed first).
    double backward(const std::vector<int>& targets, std::uint64_t cache) {
        if (cache != last_cache_ || !cache_train_) throw StaleCache();
        last_cache_ = 0;  // one backward per forward
        if (targets.size() != probs_.rows) throw LengthMismatch(targets.size(), probs_.rows);
        const std::size_t n = probs_.rows, c = probs_.cols;
        double loss = 0.0;
        Mat dlogits(n, c);
        for (std::size_t i = 0; i < n; ++i) {
            int y = targets[i];
            if (y < 0 || static_cast<std::size_t>(y) >= c)
                throw ShapeError("target class outside output width");
            double p = std::max(probs_.at(i, static_cast<std::size_t>(y)), 1e-12);
            loss -= std::log(p);
            for (std::size_t j = 0; j < c; ++j) {
                double delta = (static_cast<int>(j) == y) ? 1.0 : 0.0;
                dlogits.at(i, j) = (probs_.at(i, j) - delta) / static_cast<double>(n);
            }
        }
        zero_grads();
        Activation grad = Activation::from_flat(std::move(dlogits));
        for (std::size_t li = layers_.size(); li-- > 0;) grad = layers_[li]->backward(grad);
        return loss / static_cast<double>(n);
    }

    // Loss without gradients, for evaluation passes.
    static double loss_of(const Mat& probs, const std::vector<int>& targets) {
        if (targets.size() != probs.rows) throw LengthMismatch(targets.size(), probs.rows);
        double loss = 0.0;
        for (std::size_t i = 0; i < probs.rows; ++i) {
            double p = std::max(probs.at(i, static_cast<std::size_t>(targets[i])), 1e-12);
            loss -= std::log(p);
        }
        return loss / static_cast<double>(probs.rows);
    }

    const std::vector<std::unique_ptr<Layer>>& layers() const { return layers_; }

private:
    std::vector<std::unique_ptr<Layer>> layers_;
    Mat probs_;
    std::uint64_t cache_counter_ = 0;
    std::uint64_t last_cache_ = 0;
    bool cache_train_ = false;
};

// One row per completed training epoch.
struct TraceRow {
    int epoch = 0;
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;

    bool operator==(const TraceRow&) const = default;
};

using TrainTrace = std::vector<TraceRow>;

// ---------------------------------------------------------------------------
// Adam optimizer: beta1 0.9, beta2 0.999, eps 1e-8, bias correction.
// ---------------------------------------------------------------------------

struct AdamConfig {
    double learning_rate = 0.005;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

class Adam {
public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    void step(const std::vector<Param*>& params) {
        if (m_.empty()) {
            for (auto* p : params) {
                m_.emplace_back(p->size(), 0.0);
                v_.emplace_back(p->size(), 0.0);
            }
        }
        if (m_.size() != params.size()) throw ShapeError("adam state does not match parameters");
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            Param& p = *params[i];
            if (m_[i].size() != p.size()) throw ShapeError("adam state size mismatch");
            for (std::size_t k = 0; k < p.size(); ++k) {
                const double g = p.grad[k];
                m_[i][k] = cfg_.beta1 * m_[i][k] + (1.0 - cfg_.beta1) * g;
                v_[i][k] = cfg_.beta2 * v_[i][k] + (1.0 - cfg_.beta2) * g * g;
                const double mhat = m_[i][k] / bc1;
                const double vhat = v_[i][k] / bc2;
                p.value[k] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.epsilon);
            }
        }
    }

    long long t() const { return t_; }
    const AdamConfig& config() const { return cfg_; }

private:
    AdamConfig cfg_;
    long long t_ = 0;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
};

}  // namespace threatlens::nn
