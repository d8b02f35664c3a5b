#pragma once

// Invariant suite run by `nova verify` and reused by the acceptance tests.
// Each check is self-contained, seeded and returns a named pass/fail record.

#include "nova/autodiff.hpp"
#include "nova/gradcheck.hpp"
#include "nova/metrics.hpp"
#include "nova/oracles.hpp"
#include "nova/synthetic.hpp"
#include "nova/trainer.hpp"

#include <chrono>
#include <functional>
#include <sstream>

namespace nova {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
};

// Fault injection for exercising the harness itself.
struct VerifyOptions {
    bool corrupt_gradient = false;  // scale the analytic pipeline gradient by 1.01
    bool bad_oracle = false;        // oracle for composed color drops the occupancy clamp
    std::uint64_t seed = 20240611;
    int instances = 200;
};

inline double oracle_relative_error(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

namespace verify_detail {

inline CheckResult timed(const std::string& name, const std::function<void(CheckResult&)>& body) {
    CheckResult r;
    r.name = name;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        body(r);
    } catch (const std::exception& e) {
        r.passed = false;
        r.detail = std::string("exception: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

inline std::string fmt(double v) {
    std::ostringstream ss;
    ss.precision(3);
    ss << std::scientific << v;
    return ss.str();
}

struct RandomGrid {
    RaySampleGrid grid;
    oracle::Grid flat;
};

// N in [1,3], K in [1,8], R in [1,16]. When `budget` is set, β columns sum to <= 1.
inline RandomGrid random_grid(std::mt19937_64& rng, bool budget = false) {
    std::uniform_int_distribution<int> pick_n(1, 3);
    std::uniform_int_distribution<int> pick_k(1, 8);
    std::uniform_int_distribution<int> pick_r(1, 16);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto N = static_cast<std::size_t>(pick_n(rng));
    const auto K = static_cast<std::size_t>(pick_k(rng));
    const auto R = static_cast<std::size_t>(pick_r(rng));
    RandomGrid g{RaySampleGrid(N, R, K), {}};
    g.flat.fields = N;
    g.flat.rays = R;
    g.flat.samples = K;
    for (std::size_t r = 0; r < R; ++r) {
        double d = 1.0 + u(rng);
        for (std::size_t k = 0; k < K; ++k) {
            g.grid.depths[r * K + k] = d;
            const double step = 0.05 + u(rng);
            g.grid.deltas[r * K + k] = step;
            d += step;
        }
    }
    for (std::size_t n = 0; n < N; ++n) {
        for (std::size_t r = 0; r < R; ++r) {
            for (std::size_t k = 0; k < K; ++k) {
                g.grid.a(n, r, k) = u(rng);
                g.grid.b(n, r, k) = budget ? u(rng) / static_cast<double>(N) : u(rng);
                g.grid.c(n, r, k) = Vec3(u(rng), u(rng), u(rng));
            }
        }
    }
    g.flat.alpha = g.grid.alpha;
    g.flat.beta = g.grid.beta;
    g.flat.depth = g.grid.depths;
    for (const Vec3& c : g.grid.color) {
        g.flat.color.insert(g.flat.color.end(), {c.x(), c.y(), c.z()});
    }
    return g;
}

}  // namespace verify_detail

// ---------------------------------------------------------------------------

inline std::vector<CheckResult> check_renderer_oracles(const VerifyOptions& opt) {
    using namespace verify_detail;
    std::vector<CheckResult> out;
    const auto run = [&](const std::string& name, std::uint64_t stream, auto&& compare) {
        out.push_back(timed(name, [&](CheckResult& r) {
            std::mt19937_64 rng(mix_seed(opt.seed, stream));
            double worst = 0.0;
            for (int i = 0; i < opt.instances; ++i) {
                const RandomGrid g = random_grid(rng);
                worst = std::max(worst, compare(g));
            }
            r.passed = worst <= 1e-12;
            r.detail = std::to_string(opt.instances) + " instances, worst relative error " + fmt(worst);
        }));
    };
    run("composite_full matches brute-force oracle", 1, [&](const RandomGrid& g) {
        const auto fast = composite_full(g.grid);
        auto flat = g.flat;
        std::vector<std::array<double, 3>> slow;
        if (opt.bad_oracle) {
            // Inconsistent oracle: transmittance from unclamped occupancy.
            slow.assign(flat.rays, {0.0, 0.0, 0.0});
            for (std::size_t r = 0; r < flat.rays; ++r) {
                for (std::size_t k = 0; k < flat.samples; ++k) {
                    double t = 1.0;
                    for (std::size_t j = 0; j < k; ++j) {
                        double s = 0.0;
                        for (std::size_t n = 0; n < flat.fields; ++n) s += flat.beta[flat.at(n, r, j)] * flat.alpha[flat.at(n, r, j)];
                        t *= 1.0 - s;
                    }
                    for (std::size_t n = 0; n < flat.fields; ++n) {
                        const std::size_t i = flat.at(n, r, k);
                        for (std::size_t ch = 0; ch < 3; ++ch) slow[r][ch] += t * flat.alpha[i] * flat.beta[i] * flat.color[i * 3 + ch];
                    }
                }
            }
        } else {
            slow = oracle::composite(flat);
        }
        double worst = 0.0;
        for (std::size_t r = 0; r < g.grid.rays; ++r) {
            for (int ch = 0; ch < 3; ++ch) {
                worst = std::max(worst, oracle_relative_error(fast.color_unclamped[r][ch], slow[r][static_cast<std::size_t>(ch)]));
            }
        }
        return worst;
    });
    run("render_mask matches brute-force oracle", 2, [&](const RandomGrid& g) {
        const auto comp = composite_full(g.grid);
        double worst = 0.0;
        for (std::size_t n = 0; n < g.grid.fields; ++n) {
            const auto fast = render_mask(g.grid, comp, n);
            const auto slow = oracle::mask(g.flat, n);
            for (std::size_t r = 0; r < fast.size(); ++r) worst = std::max(worst, oracle_relative_error(fast[r], slow[r]));
        }
        return worst;
    });
    run("render_rgb_per_field matches brute-force oracle", 3, [&](const RandomGrid& g) {
        double worst = 0.0;
        for (std::size_t n = 0; n < g.grid.fields; ++n) {
            const auto fast = render_rgb_per_field(g.grid, n);
            const auto slow = oracle::field_color(g.flat, n);
            for (std::size_t r = 0; r < fast.size(); ++r) {
                for (int ch = 0; ch < 3; ++ch) {
                    worst = std::max(worst, oracle_relative_error(fast[r][ch], slow[r][static_cast<std::size_t>(ch)]));
                }
            }
        }
        return worst;
    });
    run("render_depth matches brute-force oracle", 4, [&](const RandomGrid& g) {
        const auto comp = composite_full(g.grid);
        const auto fast = render_depth(g.grid, comp);
        const auto slow = oracle::depth(g.flat, kDepthEpsilon);
        double worst = 0.0;
        for (std::size_t r = 0; r < fast.size(); ++r) worst = std::max(worst, oracle_relative_error(fast[r], slow[r]));
        return worst;
    });
    return out;
}

inline CheckResult check_loss_oracles(const VerifyOptions& opt) {
    using namespace verify_detail;
    return timed("losses match brute-force oracles", [&](CheckResult& res) {
        std::mt19937_64 rng(mix_seed(opt.seed, 10));
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::uniform_int_distribution<int> pick_n(1, 3);
        std::uniform_int_distribution<int> pick_k(1, 8);
        std::uniform_int_distribution<int> pick_r(1, 16);
        double worst[6] = {0, 0, 0, 0, 0, 0};
        for (int it = 0; it < opt.instances; ++it) {
            const auto N = static_cast<std::size_t>(pick_n(rng));
            const auto K = static_cast<std::size_t>(pick_k(rng));
            const auto R = static_cast<std::size_t>(pick_r(rng));
            std::vector<Vec3> pred(R), gt(R);
            std::vector<std::array<double, 3>> pred_a(R), gt_a(R);
            std::vector<std::uint8_t> valid(R);
            std::vector<int> valid_i(R);
            for (std::size_t r = 0; r < R; ++r) {
                pred[r] = Vec3(u(rng), u(rng), u(rng));
                gt[r] = Vec3(u(rng), u(rng), u(rng));
                pred_a[r] = {pred[r].x(), pred[r].y(), pred[r].z()};
                gt_a[r] = {gt[r].x(), gt[r].y(), gt[r].z()};
                valid[r] = u(rng) < 0.7 ? 1 : 0;
                valid_i[r] = valid[r];
            }
            valid[0] = 1;  // at least one supervised ray
            valid_i[0] = 1;
            std::vector<double> m_pred(N * R), m_gt(N * R);
            std::vector<Vec3> c_field(N * R);
            std::vector<std::vector<double>> m_pred_n(N, std::vector<double>(R)), m_gt_n(N, std::vector<double>(R));
            std::vector<std::vector<std::array<double, 3>>> c_field_n(N, std::vector<std::array<double, 3>>(R));
            for (std::size_t n = 0; n < N; ++n) {
                for (std::size_t r = 0; r < R; ++r) {
                    m_pred[n * R + r] = m_pred_n[n][r] = u(rng);
                    m_gt[n * R + r] = m_gt_n[n][r] = u(rng) < 0.5 ? 1.0 : 0.0;
                    c_field[n * R + r] = Vec3(u(rng), u(rng), u(rng));
                    c_field_n[n][r] = {c_field[n * R + r].x(), c_field[n * R + r].y(), c_field[n * R + r].z()};
                }
            }
            std::vector<double> cube(N * R * K), cube2(N * R * K);
            std::vector<std::vector<std::vector<double>>> cube_n(N, std::vector<std::vector<double>>(R, std::vector<double>(K)));
            auto cube2_n = cube_n;
            for (std::size_t n = 0; n < N; ++n) {
                for (std::size_t r = 0; r < R; ++r) {
                    for (std::size_t k = 0; k < K; ++k) {
                        cube[(n * R + r) * K + k] = cube_n[n][r][k] = u(rng);
                        cube2[(n * R + r) * K + k] = cube2_n[n][r][k] = u(rng);
                    }
                }
            }
            const FieldRayView<const double> mp(m_pred, N, R), mg(m_gt, N, R);
            worst[0] = std::max(worst[0], oracle_relative_error(loss_recon(pred, gt).value, oracle::recon(pred_a, gt_a)));
            worst[1] = std::max(worst[1], oracle_relative_error(loss_nvm(mp, mg, valid).value, oracle::nvm(m_pred_n, m_gt_n, valid_i)));
            const auto nvcn = loss_nvcn({c_field, N, R}, gt, mg, valid);
            const auto nvcn_o = oracle::nvcn(c_field_n, gt_a, m_gt_n, valid_i);
            worst[2] = std::max({worst[2], oracle_relative_error(nvcn.value, nvcn_o.first),
                                 oracle_relative_error(nvcn.count, nvcn_o.second)});
            worst[3] = std::max(worst[3], oracle_relative_error(loss_nvcf(pred, gt, valid).value, oracle::nvcf(pred_a, gt_a, valid_i)));
            worst[4] = std::max(worst[4], oracle_relative_error(loss_nvb({cube, N, R, K}).value, oracle::nvb(cube_n)));
            const auto nva = loss_nva({cube2, N, R, K}, mg, valid);
            const auto nva_o = oracle::nva(cube2_n, m_gt_n, valid_i);
            worst[5] = std::max({worst[5], oracle_relative_error(nva.value, nva_o.first),
                                 oracle_relative_error(nva.count, nva_o.second)});
        }
        const char* names[6] = {"recon", "nvm", "nvcn", "nvcf", "nvb", "nva"};
        res.passed = true;
        std::ostringstream d;
        d << opt.instances << " instances; worst relative error";
        for (int i = 0; i < 6; ++i) {
            d << ' ' << names[i] << '=' << fmt(worst[i]);
            res.passed = res.passed && worst[i] <= 1e-12;
        }
        res.detail = d.str();
    });
}

// N = 1, β = 1: composite_full against the classical quadrature, bitwise.
inline CheckResult check_single_field_reduction(const VerifyOptions& opt) {
    using namespace verify_detail;
    return timed("single-field composite equals classical render bitwise", [&](CheckResult& res) {
        std::mt19937_64 rng(mix_seed(opt.seed, 20));
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::size_t mismatches = 0;
        std::size_t rays_checked = 0;
        for (int it = 0; it < opt.instances; ++it) {
            const std::size_t R = 1 + rng() % 16;
            const std::size_t K = 1 + rng() % 64;
            RaySampleGrid grid(1, R, K);
            for (std::size_t i = 0; i < R * K; ++i) {
                grid.alpha[i] = u(rng);
                grid.color[i] = Vec3(u(rng), u(rng), u(rng));
                grid.deltas[i] = 0.1;
                grid.depths[i] = 1.0 + 0.1 * static_cast<double>(i % K);
            }
            const auto fast = composite_full(grid);
            const auto slow = oracle::classical_render(R, K, grid.alpha, grid.color);
            for (std::size_t r = 0; r < R; ++r) {
                ++rays_checked;
                if (!(fast.color_unclamped[r].array() == slow[r].array()).all()) ++mismatches;
            }
        }
        res.passed = mismatches == 0;
        res.detail = std::to_string(rays_checked) + " rays, " + std::to_string(mismatches) + " not bitwise equal";
    });
}

// Constant σ and c over [near, far] at K = 256 against c·(1 - exp(-σ·(far - near))).
inline CheckResult check_homogeneous_medium() {
    using namespace verify_detail;
    return timed("homogeneous medium converges to closed form at K=256", [&](CheckResult& res) {
        double worst = 0.0;
        for (const double sigma : {0.1, 0.5, 1.0, 3.0}) {
            const Ray ray{Vec3::Zero(), Vec3(0, 0, -1), 1.0, 3.0};
            const RaySamples s = sample_along_rays(std::span<const Ray>(&ray, 1), 256, false, 0);
            RaySampleGrid grid(1, 1, 256);
            grid.depths = s.depths;
            grid.deltas = s.deltas;
            const Vec3 c(0.8, 0.5, 0.2);
            for (std::size_t k = 0; k < 256; ++k) {
                grid.alpha[k] = -std::expm1(-sigma * s.deltas[k]);
                grid.color[k] = c;
            }
            const auto out = composite_full(grid);
            const Vec3 expected = c * (1.0 - std::exp(-sigma * (ray.far - ray.near)));
            for (int ch = 0; ch < 3; ++ch) {
                worst = std::max(worst, std::abs(out.color[0][ch] - expected[ch]) / expected[ch]);
            }
        }
        res.passed = worst <= 0.01;
        res.detail = "worst relative deviation " + fmt(worst);
    });
}

// Σ_n M^n <= Σ_k T a <= 1 and T non-increasing with T_1 = 1, for Σ_n β <= 1.
inline CheckResult check_reduction_identities(const VerifyOptions& opt) {
    using namespace verify_detail;
    return timed("mask budget and transmittance identities", [&](CheckResult& res) {
        std::mt19937_64 rng(mix_seed(opt.seed, 30));
        std::size_t violations = 0;
        for (int it = 0; it < opt.instances; ++it) {
            const RandomGrid g = random_grid(rng, true);
            const RenderOutput out = render_all(g.grid);
            const std::size_t K = g.grid.samples;
            for (std::size_t r = 0; r < g.grid.rays; ++r) {
                double opacity = 0.0;
                for (std::size_t k = 0; k < K; ++k) {
                    const double T = out.composite.transmittance[r * K + k];
                    opacity += T * out.composite.alpha_full[r * K + k];
                    if (k == 0 && T != 1.0) ++violations;
                    if (k > 0 && T > out.composite.transmittance[r * K + k - 1]) ++violations;
                    if (T < 0.0 || T > 1.0) ++violations;
                }
                double masks = 0.0;
                for (std::size_t n = 0; n < g.grid.fields; ++n) masks += out.mask[n * g.grid.rays + r];
                if (masks > opacity + 1e-12 || opacity > 1.0 + 1e-12) ++violations;
            }
        }
        res.passed = violations == 0;
        res.detail = std::to_string(violations) + " violations over " + std::to_string(opt.instances) + " grids";
    });
}

// ---------------------------------------------------------------------------
// Second route for the renderer backward pass: the scalar tape.

inline CheckResult check_renderer_tape_route(const VerifyOptions& opt) {
    using namespace verify_detail;
    return timed("renderer backward agrees with the autodiff tape", [&](CheckResult& res) {
        std::mt19937_64 rng(mix_seed(opt.seed, 40));
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        double worst = 0.0;
        for (int it = 0; it < 40; ++it) {
            RandomGrid g = random_grid(rng);
            const std::size_t N = g.grid.fields, R = g.grid.rays, K = g.grid.samples;
            // Keep occupancy inside (0, 1) so clamps are inactive on both routes.
            for (double& b : g.grid.beta) b *= 0.9 / static_cast<double>(N);
            std::vector<Vec3> up_c(R), up_cf(N * R);
            std::vector<double> up_m(N * R), up_d(R), up_a(N * R * K), up_b(N * R * K);
            for (auto& v : up_c) v = Vec3(u(rng), u(rng), u(rng));
            for (auto& v : up_cf) v = Vec3(u(rng), u(rng), u(rng));
            for (auto& v : up_m) v = u(rng);
            for (auto& v : up_d) v = u(rng);
            for (auto& v : up_a) v = u(rng);
            for (auto& v : up_b) v = u(rng);
            // Colors above 1 are clamped, so make them small enough to stay inside.
            for (auto& c : g.grid.color) c *= 0.5;

            const RenderOutput fwd = render_all(g.grid);
            RenderUpstream up;
            up.color = up_c;
            up.mask = {up_m, N, R};
            up.color_field = {up_cf, N, R};
            up.depth = up_d;
            up.alpha = {up_a, N, R, K};
            up.beta = {up_b, N, R, K};
            const GridGradient fast = backward_render(g.grid, fwd, up);

            Tape tape;
            std::vector<Var> a, b, cr, cg, cb;
            for (std::size_t i = 0; i < N * R * K; ++i) {
                a.push_back(tape.variable(g.grid.alpha[i]));
                b.push_back(tape.variable(g.grid.beta[i]));
                cr.push_back(tape.variable(g.grid.color[i].x()));
                cg.push_back(tape.variable(g.grid.color[i].y()));
                cb.push_back(tape.variable(g.grid.color[i].z()));
            }
            auto at = [&](std::size_t n, std::size_t r, std::size_t k) { return (n * R + r) * K + k; };
            Var loss(0.0);
            for (std::size_t r = 0; r < R; ++r) {
                Var T(1.0);
                Var C[3] = {Var(0.0), Var(0.0), Var(0.0)};
                std::vector<Var> M(N, Var(0.0));
                Var num(0.0), den(0.0);
                for (std::size_t k = 0; k < K; ++k) {
                    Var occ(0.0);
                    for (std::size_t n = 0; n < N; ++n) occ += b[at(n, r, k)] * a[at(n, r, k)];
                    occ = clamp(occ, 0.0, 1.0);
                    for (std::size_t n = 0; n < N; ++n) {
                        const Var w = T * (a[at(n, r, k)] * b[at(n, r, k)]);
                        C[0] += w * cr[at(n, r, k)];
                        C[1] += w * cg[at(n, r, k)];
                        C[2] += w * cb[at(n, r, k)];
                        M[n] += T * occ * b[at(n, r, k)];
                    }
                    num += T * occ * g.grid.depth(r, k);
                    den += T * occ;
                    T = T * (1.0 - occ);
                }
                for (int ch = 0; ch < 3; ++ch) loss += up_c[r][ch] * clamp(C[ch], 0.0, 1.0);
                for (std::size_t n = 0; n < N; ++n) loss += up_m[n * R + r] * M[n];
                loss += up_d[r] * (den.value() > kDepthEpsilon ? num / den : num / kDepthEpsilon);
                for (std::size_t n = 0; n < N; ++n) {
                    Var Tn(1.0);
                    Var Cn[3] = {Var(0.0), Var(0.0), Var(0.0)};
                    for (std::size_t k = 0; k < K; ++k) {
                        const Var w = a[at(n, r, k)] * b[at(n, r, k)];
                        Cn[0] += Tn * w * cr[at(n, r, k)];
                        Cn[1] += Tn * w * cg[at(n, r, k)];
                        Cn[2] += Tn * w * cb[at(n, r, k)];
                        Tn = Tn * (1.0 - w);
                    }
                    for (int ch = 0; ch < 3; ++ch) loss += up_cf[n * R + r][ch] * Cn[ch];
                }
            }
            for (std::size_t i = 0; i < N * R * K; ++i) loss += up_a[i] * a[i] + up_b[i] * b[i];
            std::vector<Var> params;
            for (std::size_t i = 0; i < N * R * K; ++i) params.insert(params.end(), {a[i], b[i], cr[i], cg[i], cb[i]});
            const auto slow = backward(loss, params);
            for (std::size_t i = 0; i < N * R * K; ++i) {
                const double f[5] = {fast.alpha[i], fast.beta[i], fast.color[i].x(), fast.color[i].y(), fast.color[i].z()};
                for (int j = 0; j < 5; ++j) {
                    worst = std::max(worst, std::abs(f[j] - slow[i * 5 + static_cast<std::size_t>(j)]) /
                                                std::max({std::abs(f[j]), std::abs(slow[i * 5 + static_cast<std::size_t>(j)]), 1.0}));
                }
            }
        }
        res.passed = worst <= 1e-10;
        res.detail = "40 grids, worst discrepancy " + fmt(worst);
    });
}

// ---------------------------------------------------------------------------
// End-to-end gradient: render -> total_loss -> backward against central differences.

struct GradientFixture {
    SceneModel model;
    RayBatch reference;
    RayBatch novel;
    LossWeights weights{1.0, 1.0, 1.0, 1.0, 1.0, 1.0};
    StepSampling sampling;
};

// Static + one dynamic field of width 8; a 4x4 reference image and a 4x4
// perturbed view with random supervision and holes.
inline GradientFixture make_gradient_fixture(std::uint64_t seed) {
    FieldConfig cfg;
    cfg.depth = 2;
    cfg.width = 8;
    cfg.skip = 1;
    cfg.pos_levels = 2;
    cfg.dir_levels = 1;
    cfg.time_levels = 1;
    cfg.position_scale = 0.5;
    GradientFixture fx;
    fx.model = SceneModel::create(cfg, 1, seed);
    std::mt19937_64 rng(mix_seed(seed, 1));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Camera cam;
    cam.fx = cam.fy = 4.0;
    cam.cx = cam.cy = 2.0;
    cam.width = cam.height = 4;
    cam.pose = look_at(Vec3(0.0, 0.0, 0.0), Vec3(0.0, 0.0, -2.0));
    const RayBounds bounds{1.0, 2.0};
    auto fill = [&](RayBatch& b, const Camera& c, bool holes) {
        b.rays = generate_rays(c, bounds);
        b.time = 0.4;
        const std::size_t R = b.rays.size();
        b.rgb.resize(R);
        b.masks.resize(R);
        b.validity.resize(R);
        for (std::size_t r = 0; r < R; ++r) {
            b.rgb[r] = Vec3(u(rng), u(rng), u(rng));
            b.masks[r] = u(rng) < 0.4 ? 1.0 : 0.0;
            b.validity[r] = (!holes || r == 0 || u(rng) < 0.7) ? 1 : 0;
        }
    };
    fill(fx.reference, cam, false);
    fill(fx.novel, perturb_camera(cam, 0.1, 3.0, mix_seed(seed, 2)), true);
    fx.sampling.reference = {8, true, mix_seed(seed, 3)};
    fx.sampling.novel = {8, true, mix_seed(seed, 4)};
    return fx;
}

inline Objective fixture_objective(const GradientFixture& fx, bool corrupt) {
    return [&fx, corrupt](std::span<const double> params, std::span<double> grad) {
        SceneModel m = fx.model;
        std::copy(params.begin(), params.end(), m.parameters().values().begin());
        const LossReport rep =
            evaluate_objective(m, fx.reference, &fx.novel, fx.weights, true, fx.sampling, 1, grad);
        if (corrupt) {
            for (double& g : grad) g *= 1.01;
        }
        return rep.total;
    };
}

inline CheckResult check_pipeline_gradient(const VerifyOptions& opt, std::size_t probes = 100) {
    using namespace verify_detail;
    return timed("end-to-end gradient matches central differences", [&](CheckResult& res) {
        const GradientFixture fx = make_gradient_fixture(mix_seed(opt.seed, 50));
        const auto& values = fx.model.parameters().values();
        const GradCheckReport rep =
            grad_check(fixture_objective(fx, opt.corrupt_gradient), values, probes, 1e-4, 1e-3, mix_seed(opt.seed, 51));
        res.passed = rep.passed;
        res.detail = std::to_string(rep.probes.size()) + " probes of " + std::to_string(values.size()) +
                     " parameters, worst relative error " + fmt(rep.worst_relative_error) + " at index " +
                     std::to_string(rep.worst_index);
    });
}

// ---------------------------------------------------------------------------
// Warp against the candidate-list oracle.

struct WarpCase {
    Frame frame;
    Camera novel;
};

// Random scene (1-2 objects, 16..64 px) and a perturbed target camera.
inline WarpCase random_warp_case(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    SceneSpec spec;
    spec.width = 16 + static_cast<int>(rng() % 49);
    spec.height = 16 + static_cast<int>(rng() % 49);
    spec.focal = 0.9 * spec.width + 0.4 * spec.width * u(rng);
    spec.objects.clear();
    const int count = 1 + static_cast<int>(rng() % 2);
    for (int i = 0; i < count; ++i) {
        ObjectSpec o;
        o.shape = u(rng) < 0.5 ? "sphere" : "box";
        o.radius = 0.2 + 0.4 * u(rng);
        o.half_size = Vec3(0.15 + 0.3 * u(rng), 0.15 + 0.3 * u(rng), 0.15 + 0.3 * u(rng));
        o.start = Vec3(-0.8 + 1.6 * u(rng), -0.6 + 1.2 * u(rng), -1.8 - 1.5 * u(rng));
        o.end = o.start;
        o.arc = 0.0;
        spec.objects.push_back(o);
    }
    const SyntheticScene scene(spec, rng());
    WarpCase c;
    Camera cam = scene.camera_at(u(rng));
    c.frame = scene.render(cam, 0.0);
    c.novel = perturb_camera(cam, 0.3, 5.0, rng());
    return c;
}

// Two spheres at depths 1 and 2 side by side; a sideways camera shift makes
// them overlap in the novel view.
inline WarpCase occlusion_warp_case() {
    SceneSpec spec;
    spec.width = spec.height = 48;
    spec.focal = 48.0;
    spec.wall_depth = 6.0;
    ObjectSpec near_obj;
    near_obj.radius = 0.15;
    near_obj.start = near_obj.end = Vec3(0.2, 0.0, -1.0);
    near_obj.arc = 0.0;
    ObjectSpec far_obj = near_obj;
    far_obj.radius = 0.3;
    far_obj.start = far_obj.end = Vec3(-0.2, 0.0, -2.0);
    spec.objects = {near_obj, far_obj};
    const SyntheticScene scene(spec, 1);
    Camera cam;
    cam.fx = cam.fy = 48.0;
    cam.cx = cam.cy = 24.0;
    cam.width = cam.height = 48;
    WarpCase c;
    c.frame = scene.render(cam, 0.0);
    c.novel = c.frame.camera;
    c.novel.pose.translation = Vec3(0.4, 0.0, 0.0);
    return c;
}

struct WarpComparison {
    double worst_iou = 1.0;
    std::size_t frames = 0;
    std::size_t contested = 0;        // occlusion case: pixels reached by both objects
    std::size_t contested_wrong = 0;  // contested pixels not won by the nearer object
};

inline WarpComparison compare_warps(std::uint64_t seed, int frames) {
    WarpComparison out;
    std::mt19937_64 rng(seed);
    for (int i = 0; i < frames; ++i) {
        const WarpCase c = random_warp_case(rng);
        const auto slow = oracle::warp(c.frame, c.novel);
        for (std::size_t o = 0; o < c.frame.masks.size(); ++o) {
            const WarpResult fast = warp_to_novel_view(c.frame, o, c.novel, false);
            out.worst_iou = std::min({out.worst_iou, mask_iou(fast.mask, slow.masks[o]), mask_iou(fast.validity, slow.validity)});
        }
        ++out.frames;
    }
    // Occlusion: every destination pixel that both objects project into must go to the nearer one.
    const WarpCase occ = occlusion_warp_case();
    const WarpResult near_w = warp_to_novel_view(occ.frame, 0, occ.novel, false);
    const WarpResult far_w = warp_to_novel_view(occ.frame, 1, occ.novel, false);
    MaskImage reach_near(occ.novel.width, occ.novel.height), reach_far(occ.novel.width, occ.novel.height);
    for (int y = 0; y < occ.frame.height(); ++y) {
        for (int x = 0; x < occ.frame.width(); ++x) {
            const int label = occ.frame.label(x, y);
            if (label < 0) continue;
            const Vec3 p = unproject(occ.frame.camera, x + 0.5, y + 0.5, occ.frame.depth(x, y));
            const auto uvz = oracle::project(p, occ.novel);
            if (!(uvz[2] > 0.0 && uvz[0] >= 0.0 && uvz[1] >= 0.0 && uvz[0] < occ.novel.width && uvz[1] < occ.novel.height)) continue;
            auto& reach = label == 0 ? reach_near : reach_far;
            reach(static_cast<int>(std::floor(uvz[0])), static_cast<int>(std::floor(uvz[1]))) = 1;
        }
    }
    for (std::size_t i = 0; i < reach_near.data().size(); ++i) {
        if (reach_near.data()[i] == 0 || reach_far.data()[i] == 0) continue;
        ++out.contested;
        if (near_w.mask.data()[i] == 0 || far_w.mask.data()[i] != 0) ++out.contested_wrong;
    }
    const auto slow = oracle::warp(occ.frame, occ.novel);
    out.worst_iou = std::min({out.worst_iou, mask_iou(near_w.mask, slow.masks[0]), mask_iou(far_w.mask, slow.masks[1])});
    ++out.frames;
    return out;
}

inline CheckResult check_warp_oracle(const VerifyOptions& opt, int frames = 50) {
    using namespace verify_detail;
    return timed("warp matches projection oracle with z-buffer ordering", [&](CheckResult& res) {
        const WarpComparison c = compare_warps(mix_seed(opt.seed, 60), frames);
        res.passed = c.worst_iou >= 0.98 && c.contested > 0 && c.contested_wrong == 0;
        res.detail = std::to_string(c.frames) + " frames, worst IoU " + std::to_string(c.worst_iou) + ", occlusion: " +
                     std::to_string(c.contested) + " contested pixels, " + std::to_string(c.contested_wrong) +
                     " won by the farther object";
    });
}

// ---------------------------------------------------------------------------

inline CheckResult check_optimizer_first_step() {
    using namespace verify_detail;
    return timed("optimizer first step matches closed form", [&](CheckResult& res) {
        std::vector<double> p{0.3};
        const std::vector<double> g{1.0};
        auto st = OptimizerState::for_size(1, {0.1, 0.9, 0.999, 1e-8});
        optimizer_step(p, g, st);
        // m̂ = g, v̂ = g², so the step is lr·g/(|g| + ε).
        const double expected = 0.3 - 0.1 * 1.0 / (1.0 + 1e-8);
        res.passed = std::abs(p[0] - expected) <= 1e-12 && st.step == 1;
        res.detail = "updated value " + fmt(p[0]) + ", expected " + fmt(expected);
    });
}

inline std::vector<CheckResult> run_verify(const VerifyOptions& opt) {
    std::vector<CheckResult> out = check_renderer_oracles(opt);
    out.push_back(check_loss_oracles(opt));
    out.push_back(check_single_field_reduction(opt));
    out.push_back(check_homogeneous_medium());
    out.push_back(check_reduction_identities(opt));
    out.push_back(check_renderer_tape_route(opt));
    out.push_back(check_pipeline_gradient(opt));
    out.push_back(check_warp_oracle(opt));
    out.push_back(check_optimizer_first_step());
    return out;
}

}  // namespace nova
