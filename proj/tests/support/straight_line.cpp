#include "straight_line.hpp"

#include <cmath>

namespace dcign::testing {

NetworkConfig tiny_config(std::uint64_t seed) {
    NetworkConfig c;
    c.resolution = 4;
    c.layout = LatentLayout::standard(4);
    c.seed = seed;
    c.encoder = {ConvSpec{2, 3, 1, 1, Activation::relu}, PoolSpec{2}, DenseSpec{5, Activation::relu}};
    c.decoder = {DenseSpec{6, Activation::relu}, DenseSpec{4, Activation::relu}, ReshapeSpec{1, 2, 2}, UnpoolSpec{2},
                 ConvSpec{1, 3, 1, 1, Activation::sigmoid}};
    return c;
}

namespace {

constexpr int N = 4;  // image side
constexpr int D = 4;  // latent size

double relu(double v) { return v > 0.0 ? v : 0.0; }
double step(double v) { return v > 0.0 ? 1.0 : 0.0; }

struct Forward {
    double x[N][N];
    double a1[2][N][N], r1[2][N][N];
    int arg_y[2][2][2], arg_x[2][2][2];
    double f[8];
    double a2[5], h[5];
    double mu[D], lv[D], eps[D], z[D];
    double zc[D];
    double a3[6], g1[6], a4[4], g2[4];
    double u[N][N], a5[N][N], xhat[N][N];
};

} // namespace

StraightLineResult straight_line_step(const std::vector<Tensor>& params, const std::vector<Tensor>& mean_square,
                                      const std::vector<Tensor>& images, const std::vector<std::size_t>& active,
                                      const Tensor& noise, const OptimHyper& hyper, double invariance_scale,
                                      bool clamp) {
    const auto& W0 = params[0];   // [2,1,3,3]
    const auto& b1 = params[1];   // [2]
    const auto& W2 = params[2];   // [5,8]
    const auto& b3 = params[3];   // [5]
    const auto& W4 = params[4];   // [4,5] mu
    const auto& b5 = params[5];
    const auto& W6 = params[6];   // [4,5] logvar
    const auto& b7 = params[7];
    const auto& W8 = params[8];   // [6,4]
    const auto& b9 = params[9];
    const auto& W10 = params[10]; // [4,6]
    const auto& b11 = params[11];
    const auto& W12 = params[12]; // [1,1,3,3]
    const auto& b13 = params[13]; // [1]

    const std::size_t B = images.size();
    std::vector<Forward> fw(B);
    StraightLineResult out;

    for (std::size_t b = 0; b < B; ++b) {
        Forward& s = fw[b];
        for (int y = 0; y < N; ++y)
            for (int x = 0; x < N; ++x) s.x[y][x] = images[b][y * N + x];
        for (int c = 0; c < 2; ++c)
            for (int y = 0; y < N; ++y)
                for (int x = 0; x < N; ++x) {
                    double acc = b1[c];
                    for (int ky = 0; ky < 3; ++ky)
                        for (int kx = 0; kx < 3; ++kx) {
                            const int iy = y + ky - 1, ix = x + kx - 1;
                            if (iy < 0 || iy >= N || ix < 0 || ix >= N) continue;
                            acc += W0[c * 9 + ky * 3 + kx] * s.x[iy][ix];
                        }
                    s.a1[c][y][x] = acc;
                    s.r1[c][y][x] = relu(acc);
                }
        for (int c = 0; c < 2; ++c)
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) {
                    int by = 2 * i, bx = 2 * j;
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx)
                            if (s.r1[c][2 * i + dy][2 * j + dx] > s.r1[c][by][bx]) {
                                by = 2 * i + dy;
                                bx = 2 * j + dx;
                            }
                    s.arg_y[c][i][j] = by;
                    s.arg_x[c][i][j] = bx;
                    s.f[c * 4 + i * 2 + j] = s.r1[c][by][bx];
                }
        for (int k = 0; k < 5; ++k) {
            double acc = b3[k];
            for (int m = 0; m < 8; ++m) acc += W2[k * 8 + m] * s.f[m];
            s.a2[k] = acc;
            s.h[k] = relu(acc);
        }
        for (int d = 0; d < D; ++d) {
            double m = b5[d], l = b7[d];
            for (int k = 0; k < 5; ++k) {
                m += W4[d * 5 + k] * s.h[k];
                l += W6[d * 5 + k] * s.h[k];
            }
            s.mu[d] = m;
            s.lv[d] = l;
            s.eps[d] = noise[b * D + d];
            s.z[d] = m + std::exp(l / 2.0) * s.eps[d];
        }
    }

    bool is_active[D] = {};
    for (auto i : active) is_active[i] = true;
    double mean[D] = {};
    for (int d = 0; d < D; ++d) {
        for (std::size_t b = 0; b < B; ++b) mean[d] += fw[b].z[d];
        mean[d] /= static_cast<double>(B);
    }
    for (auto& s : fw)
        for (int d = 0; d < D; ++d) s.zc[d] = (clamp && !is_active[d]) ? mean[d] : s.z[d];

    std::vector<Tensor> g;
    for (const auto& p : params) g.push_back(Tensor::zeros_like(p));
    std::vector<std::vector<double>> dz(B, std::vector<double>(D, 0.0));

    for (std::size_t b = 0; b < B; ++b) {
        Forward& s = fw[b];
        for (int k = 0; k < 6; ++k) {
            double acc = b9[k];
            for (int d = 0; d < D; ++d) acc += W8[k * D + d] * s.zc[d];
            s.a3[k] = acc;
            s.g1[k] = relu(acc);
        }
        for (int q = 0; q < 4; ++q) {
            double acc = b11[q];
            for (int k = 0; k < 6; ++k) acc += W10[q * 6 + k] * s.g1[k];
            s.a4[q] = acc;
            s.g2[q] = relu(acc);
        }
        for (int y = 0; y < N; ++y)
            for (int x = 0; x < N; ++x) s.u[y][x] = s.g2[(y / 2) * 2 + x / 2];
        for (int y = 0; y < N; ++y)
            for (int x = 0; x < N; ++x) {
                double acc = b13[0];
                for (int ky = 0; ky < 3; ++ky)
                    for (int kx = 0; kx < 3; ++kx) {
                        const int iy = y + ky - 1, ix = x + kx - 1;
                        if (iy < 0 || iy >= N || ix < 0 || ix >= N) continue;
                        acc += W12[ky * 3 + kx] * s.u[iy][ix];
                    }
                s.a5[y][x] = acc;
                s.xhat[y][x] = 1.0 / (1.0 + std::exp(-acc));
            }
        for (int y = 0; y < N; ++y)
            for (int x = 0; x < N; ++x)
                out.reconstruction -= s.x[y][x] * std::log(s.xhat[y][x]) + (1.0 - s.x[y][x]) * std::log(1.0 - s.xhat[y][x]);
        for (int d = 0; d < D; ++d) out.kl += 0.5 * (std::exp(s.lv[d]) + s.mu[d] * s.mu[d] - 1.0 - s.lv[d]);

        // Cross-entropy through the sigmoid collapses to xhat - x.
        double da5[N][N];
        for (int y = 0; y < N; ++y)
            for (int x = 0; x < N; ++x) da5[y][x] = s.xhat[y][x] - s.x[y][x];
        double du[N][N] = {};
        for (int y = 0; y < N; ++y)
            for (int x = 0; x < N; ++x) {
                g[13][0] += da5[y][x];
                for (int ky = 0; ky < 3; ++ky)
                    for (int kx = 0; kx < 3; ++kx) {
                        const int iy = y + ky - 1, ix = x + kx - 1;
                        if (iy < 0 || iy >= N || ix < 0 || ix >= N) continue;
                        g[12][ky * 3 + kx] += da5[y][x] * s.u[iy][ix];
                        du[iy][ix] += da5[y][x] * W12[ky * 3 + kx];
                    }
            }
        double da4[4];
        for (int q = 0; q < 4; ++q) {
            const int qy = q / 2, qx = q % 2;
            const double dg2 = du[2 * qy][2 * qx] + du[2 * qy][2 * qx + 1] + du[2 * qy + 1][2 * qx] +
                               du[2 * qy + 1][2 * qx + 1];
            da4[q] = dg2 * step(s.a4[q]);
        }
        double da3[6];
        for (int k = 0; k < 6; ++k) {
            double dg1 = 0.0;
            for (int q = 0; q < 4; ++q) {
                g[10][q * 6 + k] += da4[q] * s.g1[k];
                dg1 += W10[q * 6 + k] * da4[q];
            }
            da3[k] = dg1 * step(s.a3[k]);
        }
        for (int q = 0; q < 4; ++q) g[11][q] += da4[q];
        for (int k = 0; k < 6; ++k) {
            g[9][k] += da3[k];
            for (int d = 0; d < D; ++d) {
                g[8][k * D + d] += da3[k] * s.zc[d];
                dz[b][d] += W8[k * D + d] * da3[k];
            }
        }
    }

    if (clamp)
        for (std::size_t b = 0; b < B; ++b)
            for (int d = 0; d < D; ++d)
                if (!is_active[d]) dz[b][d] = invariance_scale * (fw[b].z[d] - mean[d]);

    for (std::size_t b = 0; b < B; ++b) {
        Forward& s = fw[b];
        double dmu[D], dlv[D];
        for (int d = 0; d < D; ++d) {
            dmu[d] = dz[b][d] + s.mu[d];
            dlv[d] = dz[b][d] * s.eps[d] * 0.5 * std::exp(s.lv[d] / 2.0) + 0.5 * (std::exp(s.lv[d]) - 1.0);
        }
        double dh[5] = {};
        for (int d = 0; d < D; ++d) {
            g[5][d] += dmu[d];
            g[7][d] += dlv[d];
            for (int k = 0; k < 5; ++k) {
                g[4][d * 5 + k] += dmu[d] * s.h[k];
                g[6][d * 5 + k] += dlv[d] * s.h[k];
                dh[k] += W4[d * 5 + k] * dmu[d] + W6[d * 5 + k] * dlv[d];
            }
        }
        double df[8] = {};
        for (int k = 0; k < 5; ++k) {
            const double da2 = dh[k] * step(s.a2[k]);
            g[3][k] += da2;
            for (int m = 0; m < 8; ++m) {
                g[2][k * 8 + m] += da2 * s.f[m];
                df[m] += W2[k * 8 + m] * da2;
            }
        }
        double dr1[2][N][N] = {};
        for (int c = 0; c < 2; ++c)
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) dr1[c][s.arg_y[c][i][j]][s.arg_x[c][i][j]] += df[c * 4 + i * 2 + j];
        for (int c = 0; c < 2; ++c)
            for (int y = 0; y < N; ++y)
                for (int x = 0; x < N; ++x) {
                    const double da1 = dr1[c][y][x] * step(s.a1[c][y][x]);
                    g[1][c] += da1;
                    for (int ky = 0; ky < 3; ++ky)
                        for (int kx = 0; kx < 3; ++kx) {
                            const int iy = y + ky - 1, ix = x + kx - 1;
                            if (iy < 0 || iy >= N || ix < 0 || ix >= N) continue;
                            g[0][c * 9 + ky * 3 + kx] += da1 * s.x[iy][ix];
                        }
                }
    }

    out.params = params;
    out.mean_square = mean_square;
    for (std::size_t t = 0; t < params.size(); ++t)
        for (std::size_t i = 0; i < params[t].size(); ++i) {
            const double grad = g[t][i] / static_cast<double>(B) + hyper.weight_decay * params[t][i];
            double& ms = out.mean_square[t][i];
            ms = (1.0 - hyper.sq_decay) * ms + hyper.sq_decay * grad * grad;
            out.params[t][i] -= hyper.learning_rate * grad / (std::sqrt(ms) + hyper.epsilon);
        }
    out.reconstruction /= static_cast<double>(B);
    out.kl /= static_cast<double>(B);
    return out;
}

} // namespace dcign::testing
