#pragma once

// Brute-force reference implementations. These are deliberately naive: every
// quantity is recomputed from scratch with explicit loops and no shared
// helpers from the production code paths, so agreement is meaningful.
// Used by the test suite and by `nova verify`.

#include "nova/frame.hpp"

#include <algorithm>
#include <array>
#include <tuple>

namespace nova::oracle {

// Flat grid description independent of RaySampleGrid's accessors.
struct Grid {
    std::size_t fields = 0;
    std::size_t rays = 0;
    std::size_t samples = 0;
    std::vector<double> alpha;   // [n][r][k]
    std::vector<double> beta;    // [n][r][k]
    std::vector<double> color;   // [n][r][k][3]
    std::vector<double> depth;   // [r][k]

    std::size_t at(std::size_t n, std::size_t r, std::size_t k) const { return (n * rays + r) * samples + k; }
};

inline double occupancy(const Grid& g, std::size_t r, std::size_t k) {
    double s = 0.0;
    for (std::size_t n = 0; n < g.fields; ++n) s += g.beta[g.at(n, r, k)] * g.alpha[g.at(n, r, k)];
    if (s < 0.0) return 0.0;
    if (s > 1.0) return 1.0;
    return s;
}

// Transmittance recomputed as an explicit product for every sample.
inline double transmittance(const Grid& g, std::size_t r, std::size_t k) {
    double t = 1.0;
    for (std::size_t j = 0; j < k; ++j) t *= 1.0 - occupancy(g, r, j);
    return t;
}

// Unclamped composed color, channel by channel, term by term.
inline std::vector<std::array<double, 3>> composite(const Grid& g) {
    std::vector<std::array<double, 3>> out(g.rays, {0.0, 0.0, 0.0});
    for (std::size_t r = 0; r < g.rays; ++r) {
        for (int ch = 0; ch < 3; ++ch) {
            double sum = 0.0;
            for (std::size_t k = 0; k < g.samples; ++k) {
                const double t = transmittance(g, r, k);
                for (std::size_t n = 0; n < g.fields; ++n) {
                    const std::size_t i = g.at(n, r, k);
                    sum += t * g.alpha[i] * g.beta[i] * g.color[i * 3 + static_cast<std::size_t>(ch)];
                }
            }
            out[r][static_cast<std::size_t>(ch)] = sum;
        }
    }
    return out;
}

inline std::vector<double> mask(const Grid& g, std::size_t field) {
    std::vector<double> out(g.rays, 0.0);
    for (std::size_t r = 0; r < g.rays; ++r) {
        for (std::size_t k = 0; k < g.samples; ++k) {
            out[r] += transmittance(g, r, k) * occupancy(g, r, k) * g.beta[g.at(field, r, k)];
        }
    }
    return out;
}

inline std::vector<std::array<double, 3>> field_color(const Grid& g, std::size_t field) {
    std::vector<std::array<double, 3>> out(g.rays, {0.0, 0.0, 0.0});
    for (std::size_t r = 0; r < g.rays; ++r) {
        for (std::size_t k = 0; k < g.samples; ++k) {
            double t = 1.0;
            for (std::size_t j = 0; j < k; ++j) t *= 1.0 - g.alpha[g.at(field, r, j)] * g.beta[g.at(field, r, j)];
            const std::size_t i = g.at(field, r, k);
            for (std::size_t ch = 0; ch < 3; ++ch) out[r][ch] += t * g.alpha[i] * g.beta[i] * g.color[i * 3 + ch];
        }
    }
    return out;
}

inline std::vector<double> depth(const Grid& g, double epsilon) {
    std::vector<double> out(g.rays, 0.0);
    for (std::size_t r = 0; r < g.rays; ++r) {
        double num = 0.0;
        double den = 0.0;
        for (std::size_t k = 0; k < g.samples; ++k) {
            const double w = transmittance(g, r, k) * occupancy(g, r, k);
            num += w * g.depth[r * g.samples + k];
            den += w;
        }
        out[r] = num / (den > epsilon ? den : epsilon);
    }
    return out;
}

// Classical single-field quadrature: Σ_k T_k α_k c_k with T_k = Π_{j<k} (1 - α_j).
inline std::vector<Vec3> classical_render(std::size_t rays, std::size_t samples, const std::vector<double>& alpha,
                                          const std::vector<Vec3>& color) {
    std::vector<Vec3> out(rays, Vec3::Zero());
    for (std::size_t r = 0; r < rays; ++r) {
        double t = 1.0;
        Vec3 acc = Vec3::Zero();
        for (std::size_t k = 0; k < samples; ++k) {
            const double a = alpha[r * samples + k];
            acc += (t * a) * color[r * samples + k];
            t *= 1.0 - a;
        }
        out[r] = acc;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Losses. Rays are indexed [r], colors as [r][3], masks as [n][r].

inline double recon(const std::vector<std::array<double, 3>>& pred, const std::vector<std::array<double, 3>>& gt) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t r = 0; r < pred.size(); ++r) {
        for (std::size_t ch = 0; ch < 3; ++ch) {
            sum += (pred[r][ch] - gt[r][ch]) * (pred[r][ch] - gt[r][ch]);
            ++count;
        }
    }
    return sum / static_cast<double>(count);
}

inline double nvcf(const std::vector<std::array<double, 3>>& pred, const std::vector<std::array<double, 3>>& gt,
                   const std::vector<int>& valid) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t r = 0; r < pred.size(); ++r) {
        if (!valid[r]) continue;
        for (std::size_t ch = 0; ch < 3; ++ch) {
            sum += (pred[r][ch] - gt[r][ch]) * (pred[r][ch] - gt[r][ch]);
            ++count;
        }
    }
    return sum / static_cast<double>(count);
}

inline double nvm(const std::vector<std::vector<double>>& pred, const std::vector<std::vector<double>>& gt,
                  const std::vector<int>& valid) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t n = 0; n < pred.size(); ++n) {
        for (std::size_t r = 0; r < valid.size(); ++r) {
            if (!valid[r]) continue;
            sum += (gt[n][r] - pred[n][r]) * (gt[n][r] - pred[n][r]);
            ++count;
        }
    }
    return sum / static_cast<double>(count);
}

inline std::pair<double, double> nvcn(const std::vector<std::vector<std::array<double, 3>>>& pred,
                                      const std::vector<std::array<double, 3>>& gt,
                                      const std::vector<std::vector<double>>& mask, const std::vector<int>& valid) {
    double sum = 0.0;
    double count = 0.0;
    for (std::size_t n = 0; n < pred.size(); ++n) {
        for (std::size_t r = 0; r < gt.size(); ++r) {
            const double w = mask[n][r] * valid[r];
            double e = 0.0;
            for (std::size_t ch = 0; ch < 3; ++ch) e += (gt[r][ch] - pred[n][r][ch]) * (gt[r][ch] - pred[n][r][ch]);
            sum += w * e;
            count += w;
        }
    }
    return {count == 0.0 ? 0.0 : sum / count, count};
}

// beta as [n][r][k] nested vectors.
inline double nvb(const std::vector<std::vector<std::vector<double>>>& beta) {
    const std::size_t rays = beta.front().size();
    const std::size_t samples = beta.front().front().size();
    double sum = 0.0;
    for (std::size_t r = 0; r < rays; ++r) {
        for (std::size_t k = 0; k < samples; ++k) {
            double s = 0.0;
            for (const auto& field : beta) s += field[r][k];
            sum += std::abs(s - 1.0);
        }
    }
    return sum / static_cast<double>(rays * samples);
}

inline std::pair<double, double> nva(const std::vector<std::vector<std::vector<double>>>& alpha,
                                     const std::vector<std::vector<double>>& mask, const std::vector<int>& valid) {
    double sum = 0.0;
    double count = 0.0;
    for (std::size_t n = 0; n < alpha.size(); ++n) {
        for (std::size_t r = 0; r < valid.size(); ++r) {
            const double w = (1.0 - mask[n][r]) * valid[r];
            double s = 0.0;
            for (double a : alpha[n][r]) s += std::abs(a);
            sum += w * s;
            count += w;
        }
    }
    return {count == 0.0 ? 0.0 : sum / count, count};
}

// ---------------------------------------------------------------------------
// Geometry.

// Pinhole projection through an explicit 3x4 matrix K [Rᵀ | -Rᵀ t], with the
// y and z axes flipped into image convention.
inline std::array<double, 3> project(const Vec3& p, const Camera& cam) {
    double P[3][4];
    const Mat3 Rt = cam.pose.rotation.transpose();
    const Vec3 tt = -(Rt * cam.pose.translation);
    double E[3][4];
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) E[i][j] = Rt(i, j);
        E[i][3] = tt[i];
    }
    // Image convention: x right, y down, depth along -z of the camera.
    const double K[3][3] = {{cam.fx, 0.0, cam.cx}, {0.0, -cam.fy, cam.cy}, {0.0, 0.0, 1.0}};
    const double F[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, -1}};
    double KF[3][3] = {};
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            for (int m = 0; m < 3; ++m) KF[i][j] += K[i][m] * F[m][j];
        }
    }
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 4; ++j) {
            P[i][j] = 0.0;
            for (int m = 0; m < 3; ++m) P[i][j] += KF[i][m] * E[m][j];
        }
    }
    const double h[4] = {p.x(), p.y(), p.z(), 1.0};
    double q[3] = {0.0, 0.0, 0.0};
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 4; ++j) q[i] += P[i][j] * h[j];
    }
    return {q[0] / q[2], q[1] / q[2], q[2]};
}

// Forward warp by explicit candidate lists: every source pixel with depth
// becomes a (destination, depth, source index) candidate; candidates are sorted
// and the first per destination wins. Returns validity and per-object masks.
struct WarpOracle {
    MaskImage validity;
    std::vector<MaskImage> masks;
};

inline WarpOracle warp(const Frame& source, const Camera& novel) {
    struct Candidate {
        long dest;
        double z;
        long src;
    };
    std::vector<Candidate> cands;
    for (int y = 0; y < source.height(); ++y) {
        for (int x = 0; x < source.width(); ++x) {
            const double d = source.depth(x, y);
            if (!(d > 0.0) || !std::isfinite(d)) continue;
            const Camera& sc = source.camera;
            // Lift through the pixel center.
            const Vec3 local((x + 0.5 - sc.cx) / sc.fx * d, -(y + 0.5 - sc.cy) / sc.fy * d, -d);
            const Vec3 world = sc.pose.rotation * local + sc.pose.translation;
            const Vec3 nl = novel.pose.rotation.transpose() * (world - novel.pose.translation);
            if (!(-nl.z() > 0.0)) continue;
            const auto uvz = oracle::project(world, novel);
            if (!(uvz[0] >= 0.0 && uvz[1] >= 0.0 && uvz[0] < novel.width && uvz[1] < novel.height)) continue;
            const long dx = static_cast<long>(std::floor(uvz[0]));
            const long dy = static_cast<long>(std::floor(uvz[1]));
            cands.push_back({dy * novel.width + dx, -nl.z(), static_cast<long>(y) * source.width() + x});
        }
    }
    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
        return std::tie(a.dest, a.z, a.src) < std::tie(b.dest, b.z, b.src);
    });
    WarpOracle out{MaskImage(novel.width, novel.height), {}};
    out.masks.assign(source.masks.size(), MaskImage(novel.width, novel.height));
    long last = -1;
    for (const auto& c : cands) {
        if (c.dest == last) continue;
        last = c.dest;
        const int x = static_cast<int>(c.dest % novel.width);
        const int y = static_cast<int>(c.dest / novel.width);
        out.validity(x, y) = 1;
        const int sx = static_cast<int>(c.src % source.width());
        const int sy = static_cast<int>(c.src / source.width());
        for (std::size_t o = 0; o < source.masks.size(); ++o) {
            if (source.masks[o](sx, sy) != 0) {
                out.masks[o](x, y) = 1;
                break;
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Dense network forward pass, one neuron at a time. Weights are stored
// column-major (out x in) at `w`, biases at `b`.
inline std::vector<double> dense(std::span<const double> params, std::size_t w, std::size_t b, std::size_t in,
                                 std::size_t out, const std::vector<double>& x) {
    std::vector<double> y(out, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
        double s = params[b + o];
        for (std::size_t i = 0; i < in; ++i) s += params[w + i * out + o] * x[i];
        y[o] = s;
    }
    return y;
}

}  // namespace nova::oracle
