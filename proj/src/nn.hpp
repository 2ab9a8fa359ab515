#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "rng.hpp"

namespace sid {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Ordered named tensor collection. Creation order is the initialization draw
// order and the optimizer traversal order, so it is part of the determinism
// contract.
struct ParamSet {
    std::vector<std::pair<std::string, Matrix>> tensors;

    Matrix& add(const std::string& name, int rows, int cols);
    Matrix& at(const std::string& name);
    const Matrix& at(const std::string& name) const;
    bool has(const std::string& name) const;

    std::size_t scalar_count() const;
    bool all_finite() const;
    // FNV over the raw little-endian bytes of every tensor, in order.
    std::uint64_t content_hash() const;
    bool bit_identical(const ParamSet& other) const;
};

// Glorot-uniform fill; every weight draw comes from `rng` in element order.
void glorot_fill(Matrix& m, double fan_in, double fan_out, Rng& rng);

// ---- Adam ------------------------------------------------------------------

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<std::pair<std::string, Matrix>> m;
    std::vector<std::pair<std::string, Matrix>> v;
    long step = 0;

    Matrix& slot(std::vector<std::pair<std::string, Matrix>>& store, const std::string& name,
                 int rows, int cols);
};

// One Adam update over every tensor of `params`, in order. `grads` must hold
// matching names/shapes.
void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state, const AdamConfig& cfg);

// ---- convolutional primitives ----------------------------------------------

// One sample's activation: `chan[c]` is an h x w matrix.
struct FeatureMap {
    int c = 0, h = 0, w = 0;
    std::vector<Matrix> chan;

    static FeatureMap zeros(int c, int h, int w);
};

// 3x3-style same-padding convolution, odd kernel, stride 1.
// W is (c_out) x (c_in * k * k), b is (c_out) x 1.
FeatureMap conv2d_forward(const FeatureMap& in, const Matrix& W, const Matrix& b, int k);
// Accumulates dW/db and returns dIn. `in` is the forward input.
FeatureMap conv2d_backward(const FeatureMap& in, const Matrix& W, int k, const FeatureMap& dout,
                           Matrix& dW, Matrix& db);

void elu_inplace(FeatureMap& x);
// dy -> dx given the forward *output* y (ELU slope is recoverable from y).
void elu_backward_inplace(const FeatureMap& y, FeatureMap& dy);

struct PoolTrace {
    int ph = 0, pw = 0;
    std::vector<Eigen::MatrixXi> argmax;  // per channel, h_out x w_out, index = y*w + x of input
};
FeatureMap maxpool_forward(const FeatureMap& in, int ph, int pw, PoolTrace& trace);
FeatureMap maxpool_backward(const FeatureMap& dout, int in_h, int in_w, const PoolTrace& trace);

struct DropoutTrace {
    double rate = 0.0;
    std::vector<Eigen::MatrixXf> mask;  // per channel; values 0 or 1/keep
};
// Inverted dropout; draws one uniform per element in channel-major order.
void dropout_forward_inplace(FeatureMap& x, double rate, Rng& rng, DropoutTrace& trace);
void dropout_backward_inplace(const DropoutTrace& trace, FeatureMap& dy);

// ---- GRU -------------------------------------------------------------------

// Gate row layout in the 3H-tall weight matrices: [reset; update; candidate].
struct GruTrace {
    Matrix x;       // T x D input sequence
    Matrix r, z, n; // T x H gate activations
    Matrix gn;      // T x H hidden-side candidate preactivation (Wh_n h + bh_n)
    Matrix h_prev;  // T x H hidden state entering each step
    Matrix h;       // T x H outputs
};

// x: T x D. Returns the T x H output sequence and fills the trace.
Matrix gru_forward(const Matrix& x, const Matrix& Wx, const Matrix& Wh, const Matrix& bx,
                   const Matrix& bh, GruTrace& trace);
// dh_seq: T x H gradient on the outputs. Accumulates weight grads, returns dX.
Matrix gru_backward(const Matrix& Wx, const Matrix& Wh, const GruTrace& trace, const Matrix& dh_seq,
                    Matrix& dWx, Matrix& dWh, Matrix& dbx, Matrix& dbh);

// ---- dense / softmax -------------------------------------------------------

// X: B x D, W: K x D, b: K x 1 -> B x K.
Matrix linear_forward(const Matrix& X, const Matrix& W, const Matrix& b);
Matrix linear_backward(const Matrix& X, const Matrix& W, const Matrix& dY, Matrix& dW, Matrix& db);

Matrix softmax_rows(const Matrix& logits);

double sigmoid(double x);
double softplus(double x);

}  // namespace sid
