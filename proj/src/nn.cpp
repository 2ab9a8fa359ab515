#include "nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "error.hpp"

namespace sid {

Matrix& ParamSet::add(const std::string& name, int rows, int cols) {
    if (has(name)) fail(Errc::invalid, "ParamSet: duplicate tensor " + name);
    tensors.emplace_back(name, Matrix::Zero(rows, cols));
    return tensors.back().second;
}

Matrix& ParamSet::at(const std::string& name) {
    for (auto& [n, m] : tensors)
        if (n == name) return m;
    fail(Errc::invalid, "ParamSet: no tensor named " + name);
}

const Matrix& ParamSet::at(const std::string& name) const {
    for (const auto& [n, m] : tensors)
        if (n == name) return m;
    fail(Errc::invalid, "ParamSet: no tensor named " + name);
}

bool ParamSet::has(const std::string& name) const {
    for (const auto& [n, m] : tensors)
        if (n == name) return true;
    return false;
}

std::size_t ParamSet::scalar_count() const {
    std::size_t n = 0;
    for (const auto& [name, m] : tensors) n += static_cast<std::size_t>(m.size());
    return n;
}

bool ParamSet::all_finite() const {
    for (const auto& [name, m] : tensors)
        if (!m.allFinite()) return false;
    return true;
}

std::uint64_t ParamSet::content_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& [name, m] : tensors) {
        h = splitmix64(h ^ fnv1a64(name.data(), name.size()));
        h = splitmix64(h ^ fnv1a64(m.data(), static_cast<std::size_t>(m.size()) * sizeof(double)));
    }
    return h;
}

bool ParamSet::bit_identical(const ParamSet& other) const {
    if (tensors.size() != other.tensors.size()) return false;
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        if (tensors[i].first != other.tensors[i].first) return false;
        const Matrix& a = tensors[i].second;
        const Matrix& b = other.tensors[i].second;
        if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
        if (std::memcmp(a.data(), b.data(), static_cast<std::size_t>(a.size()) * sizeof(double)) != 0)
            return false;
    }
    return true;
}

void glorot_fill(Matrix& m, double fan_in, double fan_out, Rng& rng) {
    double limit = std::sqrt(6.0 / (fan_in + fan_out));
    double* p = m.data();
    for (Eigen::Index i = 0; i < m.size(); ++i) p[i] = rng.uniform(-limit, limit);
}

Matrix& AdamState::slot(std::vector<std::pair<std::string, Matrix>>& store, const std::string& name,
                        int rows, int cols) {
    for (auto& [n, m] : store)
        if (n == name) return m;
    store.emplace_back(name, Matrix::Zero(rows, cols));
    return store.back().second;
}

void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state, const AdamConfig& cfg) {
    state.step += 1;
    double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (auto& [name, p] : params.tensors) {
        const Matrix& g = grads.at(name);
        if (g.rows() != p.rows() || g.cols() != p.cols())
            fail(Errc::invalid, "adam_step: gradient shape mismatch for " + name);
        Matrix& m = state.slot(state.m, name, static_cast<int>(p.rows()), static_cast<int>(p.cols()));
        Matrix& v = state.slot(state.v, name, static_cast<int>(p.rows()), static_cast<int>(p.cols()));
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
        Matrix m_hat = m / bc1;
        Matrix v_hat = v / bc2;
        p.array() -= cfg.lr * m_hat.array() / (v_hat.array().sqrt() + cfg.eps);
    }
}

// ---- conv ------------------------------------------------------------------

FeatureMap FeatureMap::zeros(int c, int h, int w) {
    FeatureMap f;
    f.c = c;
    f.h = h;
    f.w = w;
    f.chan.assign(static_cast<std::size_t>(c), Matrix::Zero(h, w));
    return f;
}

namespace {

// col is (c_in*k*k) x (h*w); column y*w+x holds the receptive field at (y,x).
void im2col(const FeatureMap& in, int k, Matrix& col) {
    const int pad = k / 2;
    const int h = in.h, w = in.w;
    col.setZero();
    for (int ci = 0; ci < in.c; ++ci) {
        const Matrix& src = in.chan[static_cast<std::size_t>(ci)];
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                int row = (ci * k + ky) * k + kx;
                int oy = ky - pad, ox = kx - pad;
                int y0 = std::max(0, -oy), y1 = std::min(h, h - oy);
                int x0 = std::max(0, -ox), x1 = std::min(w, w - ox);
                for (int y = y0; y < y1; ++y)
                    for (int x = x0; x < x1; ++x)
                        col(row, y * w + x) = src(y + oy, x + ox);
            }
        }
    }
}

}  // namespace

FeatureMap conv2d_forward(const FeatureMap& in, const Matrix& W, const Matrix& b, int k) {
    const int c_out = static_cast<int>(W.rows());
    if (W.cols() != static_cast<Eigen::Index>(in.c) * k * k)
        fail(Errc::invalid, "conv2d: weight shape does not match input channels");
    Matrix col(in.c * k * k, in.h * in.w);
    im2col(in, k, col);
    Matrix out_mat = W * col;
    out_mat.colwise() += b.col(0);
    FeatureMap out;
    out.c = c_out;
    out.h = in.h;
    out.w = in.w;
    out.chan.resize(static_cast<std::size_t>(c_out));
    for (int co = 0; co < c_out; ++co) {
        out.chan[static_cast<std::size_t>(co)] =
            Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                out_mat.row(co).data(), in.h, in.w);
    }
    return out;
}

FeatureMap conv2d_backward(const FeatureMap& in, const Matrix& W, int k, const FeatureMap& dout,
                           Matrix& dW, Matrix& db) {
    const int c_out = static_cast<int>(W.rows());
    const int h = in.h, w = in.w;
    Matrix dout_mat(c_out, h * w);
    for (int co = 0; co < c_out; ++co) {
        const Matrix& d = dout.chan[static_cast<std::size_t>(co)];
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) dout_mat(co, y * w + x) = d(y, x);
    }
    Matrix col(in.c * k * k, h * w);
    im2col(in, k, col);
    dW += dout_mat * col.transpose();
    db.col(0) += dout_mat.rowwise().sum();

    Matrix dcol = W.transpose() * dout_mat;  // (c_in*k*k) x (h*w)
    FeatureMap din = FeatureMap::zeros(in.c, h, w);
    const int pad = k / 2;
    for (int ci = 0; ci < in.c; ++ci) {
        Matrix& dst = din.chan[static_cast<std::size_t>(ci)];
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                int row = (ci * k + ky) * k + kx;
                int oy = ky - pad, ox = kx - pad;
                int y0 = std::max(0, -oy), y1 = std::min(h, h - oy);
                int x0 = std::max(0, -ox), x1 = std::min(w, w - ox);
                for (int y = y0; y < y1; ++y)
                    for (int x = x0; x < x1; ++x)
                        dst(y + oy, x + ox) += dcol(row, y * w + x);
            }
        }
    }
    return din;
}

void elu_inplace(FeatureMap& x) {
    for (auto& ch : x.chan)
        ch = ch.unaryExpr([](double v) { return v > 0.0 ? v : std::expm1(v); });
}

void elu_backward_inplace(const FeatureMap& y, FeatureMap& dy) {
    for (std::size_t c = 0; c < dy.chan.size(); ++c) {
        const Matrix& yc = y.chan[c];
        Matrix& dc = dy.chan[c];
        for (Eigen::Index i = 0; i < dc.size(); ++i)
            dc.data()[i] *= yc.data()[i] > 0.0 ? 1.0 : yc.data()[i] + 1.0;
    }
}

FeatureMap maxpool_forward(const FeatureMap& in, int ph, int pw, PoolTrace& trace) {
    if (ph < 1 || pw < 1) fail(Errc::invalid, "maxpool: pool sizes must be >= 1");
    const int ho = in.h / ph, wo = in.w / pw;
    if (ho < 1 || wo < 1) fail(Errc::invalid, "maxpool: input smaller than pool window");
    trace.ph = ph;
    trace.pw = pw;
    trace.argmax.assign(static_cast<std::size_t>(in.c), Eigen::MatrixXi(ho, wo));
    FeatureMap out = FeatureMap::zeros(in.c, ho, wo);
    for (int c = 0; c < in.c; ++c) {
        const Matrix& src = in.chan[static_cast<std::size_t>(c)];
        Matrix& dst = out.chan[static_cast<std::size_t>(c)];
        Eigen::MatrixXi& amax = trace.argmax[static_cast<std::size_t>(c)];
        for (int y = 0; y < ho; ++y) {
            for (int x = 0; x < wo; ++x) {
                double best = -std::numeric_limits<double>::infinity();
                int best_idx = 0;
                for (int dy = 0; dy < ph; ++dy) {
                    for (int dx = 0; dx < pw; ++dx) {
                        int iy = y * ph + dy, ix = x * pw + dx;
                        double v = src(iy, ix);
                        if (v > best) {
                            best = v;
                            best_idx = iy * in.w + ix;
                        }
                    }
                }
                dst(y, x) = best;
                amax(y, x) = best_idx;
            }
        }
    }
    return out;
}

FeatureMap maxpool_backward(const FeatureMap& dout, int in_h, int in_w, const PoolTrace& trace) {
    FeatureMap din = FeatureMap::zeros(dout.c, in_h, in_w);
    for (int c = 0; c < dout.c; ++c) {
        const Matrix& d = dout.chan[static_cast<std::size_t>(c)];
        const Eigen::MatrixXi& amax = trace.argmax[static_cast<std::size_t>(c)];
        Matrix& dst = din.chan[static_cast<std::size_t>(c)];
        for (int y = 0; y < d.rows(); ++y) {
            for (int x = 0; x < d.cols(); ++x) {
                int idx = amax(y, x);
                dst(idx / in_w, idx % in_w) += d(y, x);
            }
        }
    }
    return din;
}

void dropout_forward_inplace(FeatureMap& x, double rate, Rng& rng, DropoutTrace& trace) {
    trace.rate = rate;
    if (rate <= 0.0) {
        trace.mask.clear();
        return;
    }
    if (rate >= 1.0) fail(Errc::invalid, "dropout: rate must be < 1");
    const float keep_inv = static_cast<float>(1.0 / (1.0 - rate));
    trace.mask.assign(static_cast<std::size_t>(x.c), Eigen::MatrixXf(x.h, x.w));
    for (int c = 0; c < x.c; ++c) {
        Matrix& ch = x.chan[static_cast<std::size_t>(c)];
        Eigen::MatrixXf& m = trace.mask[static_cast<std::size_t>(c)];
        for (int y = 0; y < x.h; ++y) {
            for (int xx = 0; xx < x.w; ++xx) {
                float keep = rng.uniform() < rate ? 0.0f : keep_inv;
                m(y, xx) = keep;
                ch(y, xx) *= keep;
            }
        }
    }
}

void dropout_backward_inplace(const DropoutTrace& trace, FeatureMap& dy) {
    if (trace.rate <= 0.0) return;
    for (int c = 0; c < dy.c; ++c)
        dy.chan[static_cast<std::size_t>(c)].array() *=
            trace.mask[static_cast<std::size_t>(c)].cast<double>().array();
}

// ---- GRU -------------------------------------------------------------------

namespace {
inline double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }
}

Matrix gru_forward(const Matrix& x, const Matrix& Wx, const Matrix& Wh, const Matrix& bx,
                   const Matrix& bh, GruTrace& trace) {
    const int T = static_cast<int>(x.rows());
    const int H = static_cast<int>(Wh.cols());
    if (Wx.cols() != x.cols()) fail(Errc::invalid, "gru: input width does not match Wx");

    trace.x = x;
    trace.r.resize(T, H);
    trace.z.resize(T, H);
    trace.n.resize(T, H);
    trace.gn.resize(T, H);
    trace.h_prev.resize(T, H);
    trace.h.resize(T, H);

    Vector h = Vector::Zero(H);
    for (int t = 0; t < T; ++t) {
        Vector a = Wx * x.row(t).transpose() + bx.col(0);
        Vector g = Wh * h + bh.col(0);
        trace.h_prev.row(t) = h.transpose();
        for (int i = 0; i < H; ++i) {
            double r = sig(a(i) + g(i));
            double z = sig(a(H + i) + g(H + i));
            double gn = g(2 * H + i);
            double n = std::tanh(a(2 * H + i) + r * gn);
            trace.r(t, i) = r;
            trace.z(t, i) = z;
            trace.gn(t, i) = gn;
            trace.n(t, i) = n;
            h(i) = (1.0 - z) * n + z * h(i);
        }
        trace.h.row(t) = h.transpose();
    }
    return trace.h;
}

Matrix gru_backward(const Matrix& Wx, const Matrix& Wh, const GruTrace& trace, const Matrix& dh_seq,
                    Matrix& dWx, Matrix& dWh, Matrix& dbx, Matrix& dbh) {
    const int T = static_cast<int>(trace.x.rows());
    const int H = static_cast<int>(trace.r.cols());
    Matrix dx = Matrix::Zero(T, trace.x.cols());
    Vector dh = Vector::Zero(H);
    Vector da(3 * H), dg(3 * H);
    for (int t = T - 1; t >= 0; --t) {
        dh += dh_seq.row(t).transpose();
        for (int i = 0; i < H; ++i) {
            double r = trace.r(t, i), z = trace.z(t, i), n = trace.n(t, i), gn = trace.gn(t, i);
            double hp = trace.h_prev(t, i);
            double d = dh(i);
            double dz = d * (hp - n);
            double dn = d * (1.0 - z);
            double dh_direct = d * z;
            double dn_pre = dn * (1.0 - n * n);
            double dgn = dn_pre * r;
            double dr = dn_pre * gn;
            double dr_pre = dr * r * (1.0 - r);
            double dz_pre = dz * z * (1.0 - z);
            da(i) = dr_pre;
            da(H + i) = dz_pre;
            da(2 * H + i) = dn_pre;
            dg(i) = dr_pre;
            dg(H + i) = dz_pre;
            dg(2 * H + i) = dgn;
            dh(i) = dh_direct;
        }
        dWx += da * trace.x.row(t);
        dWh += dg * trace.h_prev.row(t);
        dbx.col(0) += da;
        dbh.col(0) += dg;
        dx.row(t) = (Wx.transpose() * da).transpose();
        dh += Wh.transpose() * dg;
    }
    return dx;
}

// ---- dense / softmax ---------------------------------------------------------

Matrix linear_forward(const Matrix& X, const Matrix& W, const Matrix& b) {
    Matrix out = X * W.transpose();
    out.rowwise() += b.col(0).transpose();
    return out;
}

Matrix linear_backward(const Matrix& X, const Matrix& W, const Matrix& dY, Matrix& dW, Matrix& db) {
    dW += dY.transpose() * X;
    db.col(0) += dY.colwise().sum().transpose();
    return dY * W;
}

Matrix softmax_rows(const Matrix& logits) {
    Matrix out(logits.rows(), logits.cols());
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        double mx = logits.row(r).maxCoeff();
        Eigen::ArrayXd e = (logits.row(r).array() - mx).exp();
        out.row(r) = (e / e.sum()).matrix();
    }
    return out;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double softplus(double x) {
    // log(1 + e^x) without overflow for large |x|.
    if (x > 30.0) return x;
    if (x < -30.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

}  // namespace sid
