#include "support.hpp"

#include <random>

using namespace nova;

namespace {

RaySampleGrid grid_from(std::size_t N, std::size_t R, std::size_t K, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    RaySampleGrid g(N, R, K);
    for (std::size_t r = 0; r < R; ++r)
        for (std::size_t k = 0; k < K; ++k) {
            g.depths[r * K + k] = 1.0 + 0.5 * static_cast<double>(k);
            g.deltas[r * K + k] = 0.5;
        }
    for (std::size_t i = 0; i < N * R * K; ++i) {
        g.alpha[i] = u(rng);
        g.beta[i] = u(rng);
        g.color[i] = Vec3(u(rng), u(rng), u(rng));
    }
    return g;
}

oracle::Grid flatten(const RaySampleGrid& g) {
    oracle::Grid o;
    o.fields = g.fields;
    o.rays = g.rays;
    o.samples = g.samples;
    o.alpha = g.alpha;
    o.beta = g.beta;
    o.depth = g.depths;
    for (const Vec3& c : g.color) o.color.insert(o.color.end(), {c.x(), c.y(), c.z()});
    return o;
}

RaySampleGrid single(double alpha, double beta, const Vec3& c) {
    RaySampleGrid g(1, 1, 1);
    g.alpha[0] = alpha;
    g.beta[0] = beta;
    g.color[0] = c;
    g.depths[0] = 2.0;
    g.deltas[0] = 1.0;
    return g;
}

FieldConfig tiny_field() {
    FieldConfig c;
    c.depth = 2;
    c.width = 8;
    c.skip = 1;
    c.pos_levels = 2;
    c.dir_levels = 1;
    c.time_levels = 1;
    return c;
}

}  // namespace

TEST(SampleAlongRays, BinMidpoints) {
    const Ray ray{Vec3::Zero(), Vec3(0, 0, -1), 0.0, 1.0};
    const RaySamples s = sample_along_rays(std::span(&ray, 1), 2, false, 0);
    EXPECT_DOUBLE_EQ(s.depths[0], 0.25);
    EXPECT_DOUBLE_EQ(s.depths[1], 0.75);
    EXPECT_DOUBLE_EQ(s.deltas[0], 0.5);
    EXPECT_DOUBLE_EQ(s.deltas[1], 0.25);
    EXPECT_EQ(s.positions[1], Vec3(0, 0, -0.75));
}

TEST(SampleAlongRays, StratifiedIsDeterministic) {
    std::vector<Ray> rays(10, Ray{Vec3::Zero(), Vec3(0, 0, -1), 1.0, 5.0});
    const auto a = sample_along_rays(rays, 16, true, 42);
    const auto b = sample_along_rays(rays, 16, true, 42);
    EXPECT_EQ(a.depths, b.depths);
    EXPECT_EQ(a.deltas, b.deltas);
    const auto c = sample_along_rays(rays, 16, true, 43);
    EXPECT_NE(a.depths, c.depths);
    // Splitting the batch with the matching offset changes nothing.
    const auto tail = sample_along_rays(std::span(rays).subspan(4), 16, true, 42, 4);
    EXPECT_TRUE(std::equal(tail.depths.begin(), tail.depths.end(), a.depths.begin() + 4 * 16));
}

TEST(SampleAlongRays, StratifiedBinMeans) {
    const std::size_t rays_n = 12500;
    const int K = 8;
    std::vector<Ray> rays(rays_n, Ray{Vec3::Zero(), Vec3(0, 0, -1), 1.0, 9.0});
    const auto s = sample_along_rays(rays, K, true, 7);
    for (int k = 0; k < K; ++k) {
        double sum = 0.0;
        for (std::size_t r = 0; r < rays_n; ++r) {
            const double d = s.depths[r * K + static_cast<std::size_t>(k)];
            EXPECT_GE(d, 1.0 + k);
            EXPECT_LE(d, 2.0 + k);
            sum += d;
        }
        const double center = 1.5 + k;
        EXPECT_NEAR(sum / rays_n, center, 0.01 * center);
    }
}

TEST(SampleAlongRays, Preconditions) {
    const Ray ray{Vec3::Zero(), Vec3(0, 0, -1), 2.0, 2.0};
    EXPECT_THROW(sample_along_rays(std::span(&ray, 1), 4, false, 0), UsageError);
    const Ray ok{Vec3::Zero(), Vec3(0, 0, -1), 1.0, 2.0};
    EXPECT_THROW(sample_along_rays(std::span(&ok, 1), 1, false, 0), UsageError);
}

TEST(CompositeFull, SingleSample) {
    const auto out = composite_full(single(0.5, 1.0, Vec3(1, 0, 0)));
    EXPECT_EQ(out.color[0], Vec3(0.5, 0, 0));
    EXPECT_EQ(out.transmittance[0], 1.0);
}

TEST(CompositeFull, TwoFieldsOneSample) {
    RaySampleGrid g(2, 1, 1);
    g.alpha = {0.5, 0.5};
    g.beta = {0.5, 0.5};
    g.color = {Vec3(1, 0, 0), Vec3(0, 0, 1)};
    g.depths = {1.0};
    g.deltas = {1.0};
    const auto out = composite_full(g);
    EXPECT_NEAR((out.color[0] - Vec3(0.25, 0, 0.25)).norm(), 0.0, 1e-15);
}

TEST(CompositeFull, MatchesTripleLoopOracle) {
    std::mt19937_64 rng(1);
    for (int i = 0; i < 200; ++i) {
        const RaySampleGrid g = grid_from(2, 4, 3, rng);
        const auto fast = composite_full(g);
        const auto slow = oracle::composite(flatten(g));
        for (std::size_t r = 0; r < g.rays; ++r)
            for (int c = 0; c < 3; ++c)
                EXPECT_LE(oracle_relative_error(fast.color_unclamped[r][c], slow[r][static_cast<std::size_t>(c)]), 1e-12);
    }
}

TEST(CompositeFull, ClampsOnlyAtOutput) {
    RaySampleGrid g(2, 1, 1);
    g.alpha = {1.0, 1.0};
    g.beta = {1.0, 1.0};
    g.color = {Vec3(0.9, 0.1, 0.0), Vec3(0.9, 0.1, 0.0)};
    g.depths = {1.0};
    g.deltas = {1.0};
    const auto out = composite_full(g);
    EXPECT_DOUBLE_EQ(out.color_unclamped[0].x(), 1.8);
    EXPECT_DOUBLE_EQ(out.color[0].x(), 1.0);
    EXPECT_DOUBLE_EQ(out.alpha_full[0], 1.0);
    EXPECT_DOUBLE_EQ(out.occupancy[0], 2.0);
}

TEST(CompositeFull, NaNIsReportedWithLocation) {
    std::mt19937_64 rng(2);
    RaySampleGrid g = grid_from(3, 2, 4, rng);
    g.b(2, 1, 3) = std::nan("");
    try {
        composite_full(g);
        FAIL() << "expected an error";
    } catch (const NumericalError& e) {
        const std::string m = e.what();
        EXPECT_NE(m.find("field 2"), std::string::npos) << m;
        EXPECT_NE(m.find("sample 3"), std::string::npos) << m;
    }
}

TEST(RenderMask, OpaqueSingleField) {
    const RaySampleGrid g = single(1.0, 1.0, Vec3(0.2, 0.3, 0.4));
    EXPECT_DOUBLE_EQ(render_mask(g, composite_full(g), 0)[0], 1.0);
}

TEST(RenderMask, ZeroBetaGivesZeroMask) {
    std::mt19937_64 rng(3);
    RaySampleGrid g = grid_from(3, 5, 6, rng);
    for (std::size_t r = 0; r < 5; ++r)
        for (std::size_t k = 0; k < 6; ++k) g.b(1, r, k) = 0.0;
    for (double m : render_mask(g, composite_full(g), 1)) EXPECT_EQ(m, 0.0);
    EXPECT_THROW(render_mask(g, composite_full(g), 3), UsageError);
}

TEST(RenderMask, MatchesOracle) {
    std::mt19937_64 rng(4);
    for (int i = 0; i < 200; ++i) {
        const RaySampleGrid g = grid_from(3, 3, 5, rng);
        const auto comp = composite_full(g);
        for (std::size_t n = 0; n < 3; ++n) {
            const auto fast = render_mask(g, comp, n);
            const auto slow = oracle::mask(flatten(g), n);
            for (std::size_t r = 0; r < 3; ++r) EXPECT_LE(oracle_relative_error(fast[r], slow[r]), 1e-12);
        }
    }
}

TEST(RenderRgbPerField, OpaqueHitAndZeroBeta) {
    const Vec3 c(0.1, 0.7, 0.3);
    RaySampleGrid g(1, 1, 3);
    g.alpha = {1.0, 0.6, 0.9};
    g.beta = {1.0, 1.0, 1.0};
    g.color = {c, Vec3(1, 1, 1), Vec3(1, 0, 0)};
    g.depths = {1, 2, 3};
    g.deltas = {1, 1, 1};
    EXPECT_EQ(render_rgb_per_field(g, 0)[0], c);
    g.beta = {0.0, 0.0, 0.0};
    EXPECT_EQ(render_rgb_per_field(g, 0)[0], Vec3::Zero());
    EXPECT_THROW(render_rgb_per_field(g, 1), UsageError);
}

TEST(RenderRgbPerField, UsesOwnTransmittanceAndMatchesOracle) {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 200; ++i) {
        const RaySampleGrid g = grid_from(2, 3, 4, rng);
        for (std::size_t n = 0; n < 2; ++n) {
            const auto fast = render_rgb_per_field(g, n);
            const auto slow = oracle::field_color(flatten(g), n);
            for (std::size_t r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c)
                    EXPECT_LE(oracle_relative_error(fast[r][c], slow[r][static_cast<std::size_t>(c)]), 1e-12);
        }
    }
    // Another field in front does not occlude this field's own rendering.
    RaySampleGrid g(2, 1, 2);
    g.alpha = {1.0, 0.0, 0.0, 1.0};
    g.beta = {1.0, 1.0, 1.0, 1.0};
    g.color = {Vec3(1, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 1, 0)};
    g.depths = {1, 2};
    g.deltas = {1, 1};
    EXPECT_EQ(render_rgb_per_field(g, 1)[0], Vec3(0, 1, 0));
    EXPECT_EQ(composite_full(g).color[0], Vec3(1, 0, 0));
}

TEST(RenderDepth, OpaqueTransparentAndOracle) {
    const RaySampleGrid g = single(1.0, 1.0, Vec3::Ones());
    EXPECT_DOUBLE_EQ(render_depth(g, composite_full(g))[0], 2.0);
    const RaySampleGrid empty = single(0.0, 1.0, Vec3::Ones());
    EXPECT_EQ(render_depth(empty, composite_full(empty))[0], 0.0);
    std::mt19937_64 rng(6);
    for (int i = 0; i < 200; ++i) {
        const RaySampleGrid r = grid_from(3, 4, 6, rng);
        const auto fast = render_depth(r, composite_full(r));
        const auto slow = oracle::depth(flatten(r), kDepthEpsilon);
        for (std::size_t j = 0; j < fast.size(); ++j) EXPECT_NEAR(fast[j], slow[j], 1e-9);
    }
}

TEST(RendererInvariants, OracleAndIdentityChecks) {
    VerifyOptions opt;
    opt.seed = 77;
    for (const auto& c : check_renderer_oracles(opt)) EXPECT_TRUE(c.passed) << c.name << ": " << c.detail;
    for (const auto& c : {check_single_field_reduction(opt), check_homogeneous_medium(),
                          check_reduction_identities(opt), check_renderer_tape_route(opt)}) {
        EXPECT_TRUE(c.passed) << c.name << ": " << c.detail;
    }
}

TEST(BackwardRender, MatchesFiniteDifferences) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    RaySampleGrid g = grid_from(2, 3, 4, rng);
    for (double& b : g.beta) b *= 0.45;
    for (auto& c : g.color) c *= 0.5;
    const std::size_t R = 3, N = 2, K = 4;
    std::vector<Vec3> uc(R), ucf(N * R);
    std::vector<double> um(N * R), ud(R);
    for (auto& v : uc) v = Vec3(u(rng), u(rng), u(rng));
    for (auto& v : ucf) v = Vec3(u(rng), u(rng), u(rng));
    for (auto& v : um) v = u(rng);
    for (auto& v : ud) v = u(rng);
    auto objective = [&](const RaySampleGrid& x) {
        const RenderOutput o = render_all(x);
        double s = 0.0;
        for (std::size_t r = 0; r < R; ++r) s += uc[r].dot(o.composite.color[r]) + ud[r] * o.depth[r];
        for (std::size_t i = 0; i < N * R; ++i) s += um[i] * o.mask[i] + ucf[i].dot(o.color_field[i]);
        return s;
    };
    const RenderOutput fwd = render_all(g);
    RenderUpstream up;
    up.color = uc;
    up.mask = {um, N, R};
    up.color_field = {ucf, N, R};
    up.depth = ud;
    const GridGradient grad = backward_render(g, fwd, up);
    const double h = 1e-6;
    for (std::size_t i = 0; i < N * R * K; ++i) {
        for (int which = 0; which < 3; ++which) {
            RaySampleGrid p = g, m = g;
            double* pv = which == 0 ? &p.alpha[i] : which == 1 ? &p.beta[i] : &p.color[i].x();
            double* mv = which == 0 ? &m.alpha[i] : which == 1 ? &m.beta[i] : &m.color[i].x();
            *pv += h;
            *mv -= h;
            const double numeric = (objective(p) - objective(m)) / (2 * h);
            const double analytic = which == 0 ? grad.alpha[i] : which == 1 ? grad.beta[i] : grad.color[i].x();
            EXPECT_NEAR(analytic, numeric, 1e-6 * std::max(1.0, std::abs(numeric))) << "cell " << i << " kind " << which;
        }
    }
}

TEST(RenderImage, StaticOnlyEqualsClassicalRender) {
    const SceneModel model = SceneModel::create(tiny_field(), 0, 9);
    const Camera cam = test::simple_camera(6, 5, 6.0);
    const RayBounds bounds{1.0, 4.0};
    const auto out = render_image(model, default_slots(model), cam, bounds, 0.0, {16, false, 0});
    const auto rays = generate_rays(cam, bounds);
    const RaySamples s = sample_along_rays(rays, 16, false, 0);
    std::vector<Vec3> dirs;
    for (const auto& r : rays)
        for (int k = 0; k < 16; ++k) dirs.push_back(r.direction);
    const auto q = query_static(model.view(0), s.positions, dirs);
    std::vector<double> alpha;
    std::vector<Vec3> color;
    for (std::size_t i = 0; i < q.size(); ++i) {
        alpha.push_back(-std::expm1(-q[i].sigma * s.deltas[i]));
        color.push_back(q[i].color);
    }
    const auto classical = oracle::classical_render(rays.size(), 16, alpha, color);
    for (std::size_t r = 0; r < rays.size(); ++r) {
        EXPECT_NEAR((out.composite.color_unclamped[r] - classical[r]).cwiseAbs().maxCoeff(), 0.0, 1e-12);
    }
}

TEST(RenderImage, VacuumIsBlack) {
    SceneModel model = SceneModel::create(tiny_field(), 1, 10);
    for (std::size_t f = 0; f < 2; ++f) {
        auto p = model.parameters().slice(f);
        std::fill(p.begin(), p.end(), 0.0);
        p[model.arch(f).sigma_head().bias_offset] = -1000.0;
    }
    const Camera cam = test::simple_camera(4, 4, 4.0);
    const auto out = render_image(model, default_slots(model), cam, {1.0, 3.0}, 0.5, {8, false, 0});
    for (const auto& c : out.composite.color) EXPECT_EQ(c, Vec3::Zero());
    for (double m : out.mask) EXPECT_EQ(m, 0.0);
}

TEST(RenderImage, TwoFieldSceneMatchesPerOpOraclePipeline) {
    const SceneModel model = SceneModel::create(tiny_field(), 1, 11);
    const Camera cam = test::simple_camera(16, 16, 16.0, look_at(Vec3(0.1, 0.2, 0.0), Vec3(0, 0, -3)));
    const RayBounds bounds{1.0, 5.0};
    const double time = 0.35;
    const auto out = render_image(model, default_slots(model), cam, bounds, time, {32, false, 0});
    const auto rays = generate_rays(cam, bounds);
    oracle::Grid g;
    g.fields = 2;
    g.rays = rays.size();
    g.samples = 32;
    g.alpha.resize(2 * g.rays * 32);
    g.beta.resize(2 * g.rays * 32);
    g.color.resize(2 * g.rays * 32 * 3);
    g.depth.resize(g.rays * 32);
    const double bin = (bounds.far - bounds.near) / 32.0;
    for (std::size_t r = 0; r < rays.size(); ++r) {
        for (std::size_t k = 0; k < 32; ++k) {
            const double t = bounds.near + (static_cast<double>(k) + 0.5) * bin;
            const double delta = k + 1 < 32 ? bin : bounds.far - t;
            const Vec3 p = rays[r].origin + t * rays[r].direction;
            g.depth[r * 32 + k] = t;
            const double tt[1] = {time};
            const auto s0 = query_static(model.view(0), std::span(&p, 1), std::span(&rays[r].direction, 1))[0];
            const auto s1 = query_dynamic(model.view(1), std::span(&p, 1), std::span(&rays[r].direction, 1), tt)[0];
            const FieldSample fs[2] = {s0, s1};
            for (std::size_t n = 0; n < 2; ++n) {
                const std::size_t i = g.at(n, r, k);
                g.alpha[i] = 1.0 - std::exp(-fs[n].sigma * delta);
                g.beta[i] = fs[n].beta;
                for (int c = 0; c < 3; ++c) g.color[i * 3 + static_cast<std::size_t>(c)] = fs[n].color[c];
            }
        }
    }
    const auto color = oracle::composite(g);
    const auto depth = oracle::depth(g, kDepthEpsilon);
    for (std::size_t r = 0; r < rays.size(); ++r) {
        for (int c = 0; c < 3; ++c)
            EXPECT_NEAR(out.composite.color_unclamped[r][c], color[r][static_cast<std::size_t>(c)], 1e-9);
        EXPECT_NEAR(out.depth[r], depth[r], 1e-9);
    }
    for (std::size_t n = 0; n < 2; ++n) {
        const auto m = oracle::mask(g, n);
        const auto fc = oracle::field_color(g, n);
        for (std::size_t r = 0; r < rays.size(); ++r) {
            EXPECT_NEAR(out.mask[n * rays.size() + r], m[r], 1e-9);
            EXPECT_NEAR(out.color_field[n * rays.size() + r].y(), fc[r][1], 1e-9);
        }
    }
}

TEST(RenderImage, WorkerCountDoesNotChangeOutput) {
    const SceneModel model = SceneModel::create(tiny_field(), 2, 12);
    const Camera cam = test::simple_camera(13, 11, 12.0);
    const auto a = render_image(model, default_slots(model), cam, {1.0, 4.0}, 0.2, {8, true, 5}, 1);
    const auto b = render_image(model, default_slots(model), cam, {1.0, 4.0}, 0.2, {8, true, 5}, 3);
    EXPECT_EQ(a.composite.color_unclamped, b.composite.color_unclamped);
    EXPECT_EQ(a.mask, b.mask);
    EXPECT_EQ(a.depth, b.depth);
}
