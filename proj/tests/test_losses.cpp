#include "support.hpp"

#include <algorithm>
#include <random>

using namespace nova;

namespace {

template <class T>
FieldRayView<const T> frv(const std::vector<T>& v, std::size_t n, std::size_t r) {
    return {std::span<const T>(v), n, r};
}

template <class T>
FieldSampleView<const T> fsv(const std::vector<T>& v, std::size_t n, std::size_t r, std::size_t k) {
    return {std::span<const T>(v), n, r, k};
}

std::vector<Vec3> random_colors(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Vec3> out(n);
    for (auto& c : out) c = Vec3(u(rng), u(rng), u(rng));
    return out;
}

std::vector<double> random_values(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> out(n);
    for (auto& v : out) v = u(rng);
    return out;
}

// Reorders a field-major buffer by the given field permutation.
template <class T>
std::vector<T> permute(const std::vector<T>& v, const std::vector<std::size_t>& perm, std::size_t stride) {
    std::vector<T> out(v.size());
    for (std::size_t n = 0; n < perm.size(); ++n)
        std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(perm[n] * stride), stride,
                    out.begin() + static_cast<std::ptrdiff_t>(n * stride));
    return out;
}

}  // namespace

TEST(LossRecon, Examples) {
    const std::vector<Vec3> a(5, Vec3(0.2, 0.4, 0.6));
    EXPECT_EQ(loss_recon(a, a).value, 0.0);
    const std::vector<Vec3> zeros(4, Vec3::Zero()), ones(4, Vec3::Ones());
    EXPECT_DOUBLE_EQ(loss_recon(zeros, ones).value, 1.0);
    EXPECT_EQ(loss_recon(zeros, ones).count, 12.0);
    EXPECT_THROW(loss_recon(zeros, a), UsageError);
}

TEST(LossNvm, Examples) {
    const std::vector<double> m = {0.1, 0.9, 0.5};
    const std::vector<std::uint8_t> valid = {1, 1, 1};
    EXPECT_EQ(loss_nvm(frv(m, 1, 3), frv(m, 1, 3), valid).value, 0.0);
    const std::vector<double> pred = {0.0}, gt = {1.0};
    const std::vector<std::uint8_t> one = {1};
    EXPECT_DOUBLE_EQ(loss_nvm(frv(pred, 1, 1), frv(gt, 1, 1), one).value, 1.0);
}

TEST(LossNvm, AllHolesIsAnError) {
    const std::vector<double> m = {0.1, 0.9};
    const std::vector<std::uint8_t> holes = {0, 0};
    try {
        loss_nvm(frv(m, 1, 2), frv(m, 1, 2), holes);
        FAIL();
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("no supervision available"), std::string::npos);
    }
}

TEST(LossNvm, HolesAreSkipped) {
    std::mt19937_64 rng(1);
    const std::size_t N = 2, R = 40;
    const auto pred = random_values(rng, N * R), gt = random_values(rng, N * R);
    std::vector<std::uint8_t> valid(R);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& v : valid) v = u(rng) < 0.3 ? 0 : 1;
    double sum = 0.0, count = 0.0;
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t r = 0; r < R; ++r)
            if (valid[r] != 0) {
                sum += (pred[n * R + r] - gt[n * R + r]) * (pred[n * R + r] - gt[n * R + r]);
                count += 1.0;
            }
    EXPECT_NEAR(loss_nvm(frv(pred, N, R), frv(gt, N, R), valid).value, sum / count, 1e-12);
}

TEST(LossNvcn, Examples) {
    const std::vector<Vec3> pred(2, Vec3(0.3, 0.3, 0.3)), gt(2, Vec3(0.5, 0.2, 0.1));
    const std::vector<double> none = {0.0, 0.0};
    const std::vector<std::uint8_t> valid = {1, 1};
    const LossValue empty = loss_nvcn(frv(pred, 1, 2), gt, frv(none, 1, 2), valid);
    EXPECT_EQ(empty.value, 0.0);
    EXPECT_EQ(empty.count, 0.0);
    const std::vector<double> one_ray = {1.0, 0.0};
    const std::vector<Vec3> exact = {gt[0], Vec3::Zero()};
    EXPECT_EQ(loss_nvcn(frv(exact, 1, 2), gt, frv(one_ray, 1, 2), valid).value, 0.0);
    EXPECT_EQ(loss_nvcn(frv(exact, 1, 2), gt, frv(one_ray, 1, 2), valid).count, 1.0);
}

TEST(LossNvcf, Examples) {
    const std::vector<Vec3> a(3, Vec3(0.2, 0.4, 0.6));
    const std::vector<std::uint8_t> valid = {1, 0, 1};
    EXPECT_EQ(loss_nvcf(a, a, valid).value, 0.0);
    const std::vector<Vec3> zeros(3, Vec3::Zero()), ones(3, Vec3::Ones());
    EXPECT_DOUBLE_EQ(loss_nvcf(zeros, ones, valid).value, 1.0);
    EXPECT_EQ(loss_nvcf(zeros, ones, valid).count, 6.0);
    const std::vector<std::uint8_t> holes = {0, 0, 0};
    EXPECT_THROW(loss_nvcf(zeros, ones, holes), DataError);
    EXPECT_THROW(loss_nvcf(zeros, ones, std::vector<std::uint8_t>{1}), UsageError);
}

TEST(LossNvb, Examples) {
    const std::vector<double> exact = {0.25, 0.75, 0.75, 0.25};
    EXPECT_EQ(loss_nvb(fsv(exact, 2, 1, 2)).value, 0.0);
    const std::vector<double> off = {0.3, 0.5};
    EXPECT_NEAR(loss_nvb(fsv(off, 2, 1, 1)).value, 0.2, 1e-15);
}

TEST(LossNva, Examples) {
    const std::vector<double> alpha_zero = {0.0, 0.0, 0.7, 0.9};
    const std::vector<double> mask = {0.0, 1.0};
    const std::vector<std::uint8_t> valid = {1, 1};
    EXPECT_EQ(loss_nva(fsv(alpha_zero, 1, 2, 2), frv(mask, 1, 2), valid).value, 0.0);
    const std::vector<double> alpha = {0.25, 0.25};
    const std::vector<double> outside = {0.0};
    const std::vector<std::uint8_t> one = {1};
    EXPECT_DOUBLE_EQ(loss_nva(fsv(alpha, 1, 1, 2), frv(outside, 1, 1), one).value, 0.5);
    const std::vector<double> inside = {1.0};
    const LossValue none = loss_nva(fsv(alpha, 1, 1, 2), frv(inside, 1, 1), one);
    EXPECT_EQ(none.value, 0.0);
    EXPECT_EQ(none.count, 0.0);
}

TEST(Losses, MatchBruteForceOracles) {
    VerifyOptions opt;
    opt.seed = 99;
    opt.instances = 300;
    const CheckResult res = check_loss_oracles(opt);
    EXPECT_TRUE(res.passed) << res.detail;
}

TEST(Losses, NonNegativeOnRandomInputs) {
    std::mt19937_64 rng(2);
    for (int it = 0; it < 50; ++it) {
        const std::size_t N = 3, R = 7, K = 5;
        const auto c1 = random_colors(rng, R), c2 = random_colors(rng, R);
        const auto cf = random_colors(rng, N * R);
        const auto m1 = random_values(rng, N * R), m2 = random_values(rng, N * R);
        const auto beta = random_values(rng, N * R * K), alpha = random_values(rng, N * R * K);
        std::vector<std::uint8_t> valid(R, 1);
        valid[3] = 0;
        EXPECT_GE(loss_recon(c1, c2).value, 0.0);
        EXPECT_GE(loss_nvm(frv(m1, N, R), frv(m2, N, R), valid).value, 0.0);
        EXPECT_GE(loss_nvcn(frv(cf, N, R), c2, frv(m2, N, R), valid).value, 0.0);
        EXPECT_GE(loss_nvcf(c1, c2, valid).value, 0.0);
        EXPECT_GE(loss_nvb(fsv(beta, N, R, K)).value, 0.0);
        EXPECT_GE(loss_nva(fsv(alpha, N, R, K), frv(m2, N, R), valid).value, 0.0);
    }
}

TEST(Losses, FieldPermutationInvariance) {
    std::mt19937_64 rng(3);
    const std::size_t N = 3, R = 9, K = 4;
    const std::vector<std::size_t> perm = {2, 0, 1};
    const auto beta = random_values(rng, N * R * K);
    EXPECT_NEAR(loss_nvb(fsv(beta, N, R, K)).value, loss_nvb(fsv(permute(beta, perm, R * K), N, R, K)).value, 1e-15);

    const auto pred = random_values(rng, N * R), gt = random_values(rng, N * R);
    std::vector<std::uint8_t> valid(R, 1);
    valid[1] = 0;
    EXPECT_NEAR(loss_nvm(frv(pred, N, R), frv(gt, N, R), valid).value,
                loss_nvm(frv(permute(pred, perm, R), N, R), frv(permute(gt, perm, R), N, R), valid).value, 1e-15);

    const auto cf = random_colors(rng, N * R);
    const auto c_gt = random_colors(rng, R);
    EXPECT_NEAR(loss_nvcn(frv(cf, N, R), c_gt, frv(gt, N, R), valid).value,
                loss_nvcn(frv(permute(cf, perm, R), N, R), c_gt, frv(permute(gt, perm, R), N, R), valid).value, 1e-15);
}

TEST(Losses, GradientsMatchFiniteDifferences) {
    std::mt19937_64 rng(4);
    const std::size_t N = 2, R = 6, K = 3;
    const auto gt = random_colors(rng, R);
    auto pred = random_colors(rng, R);
    const auto m_gt = random_values(rng, N * R);
    auto m_pred = random_values(rng, N * R);
    auto cf = random_colors(rng, N * R);
    auto beta = random_values(rng, N * R * K);
    auto alpha = random_values(rng, N * R * K);
    const std::vector<std::uint8_t> valid = {1, 0, 1, 1, 1, 0};
    const double h = 1e-6;
    auto fd = [&](double& x, const auto& f) {
        const double keep = x;
        x = keep + h;
        const double up = f();
        x = keep - h;
        const double down = f();
        x = keep;
        return (up - down) / (2 * h);
    };

    std::vector<Vec3> g(R, Vec3::Zero());
    loss_recon(pred, gt, g);
    for (std::size_t r = 0; r < R; ++r)
        EXPECT_NEAR(g[r].y(), fd(pred[r].y(), [&] { return loss_recon(pred, gt).value; }), 1e-8);

    std::fill(g.begin(), g.end(), Vec3::Zero());
    loss_nvcf(pred, gt, valid, g);
    for (std::size_t r = 0; r < R; ++r)
        EXPECT_NEAR(g[r].z(), fd(pred[r].z(), [&] { return loss_nvcf(pred, gt, valid).value; }), 1e-8);

    std::vector<double> gm(N * R, 0.0);
    loss_nvm(frv(m_pred, N, R), frv(m_gt, N, R), valid, FieldRayView<double>(gm, N, R));
    for (std::size_t i = 0; i < N * R; ++i)
        EXPECT_NEAR(gm[i], fd(m_pred[i], [&] { return loss_nvm(frv(m_pred, N, R), frv(m_gt, N, R), valid).value; }),
                    1e-8);

    std::vector<Vec3> gc(N * R, Vec3::Zero());
    loss_nvcn(frv(cf, N, R), gt, frv(m_gt, N, R), valid, FieldRayView<Vec3>(gc, N, R));
    for (std::size_t i = 0; i < N * R; ++i)
        EXPECT_NEAR(gc[i].x(),
                    fd(cf[i].x(), [&] { return loss_nvcn(frv(cf, N, R), gt, frv(m_gt, N, R), valid).value; }), 1e-8);

    std::vector<double> gb(N * R * K, 0.0);
    loss_nvb(fsv(beta, N, R, K), FieldSampleView<double>(gb, N, R, K));
    for (std::size_t i = 0; i < N * R * K; ++i)
        EXPECT_NEAR(gb[i], fd(beta[i], [&] { return loss_nvb(fsv(beta, N, R, K)).value; }), 1e-8);

    std::vector<double> ga(N * R * K, 0.0);
    loss_nva(fsv(alpha, N, R, K), frv(m_gt, N, R), valid, FieldSampleView<double>(ga, N, R, K));
    for (std::size_t i = 0; i < N * R * K; ++i)
        EXPECT_NEAR(ga[i],
                    fd(alpha[i], [&] { return loss_nva(fsv(alpha, N, R, K), frv(m_gt, N, R), valid).value; }), 1e-8);
}

TEST(TotalLoss, WeightSelection) {
    LossReport ref, novel;
    ref.add("recon", {0.4, 12});
    novel.add("nvm", {0.2, 4});
    novel.add("nvcf", {0.3, 12});
    LossWeights w{1.0, 0.0, 0.0, 0.0, 0.0, 0.0};
    EXPECT_DOUBLE_EQ(total_loss(ref, novel, w).total, 0.4);
    LossReport zero_ref, zero_novel;
    zero_ref.add("recon", {0.0, 3});
    zero_novel.add("nva", {0.0, 0});
    EXPECT_EQ(total_loss(zero_ref, zero_novel, LossWeights{}).total, 0.0);
}

TEST(TotalLoss, EqualsDotProduct) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    const char* names[] = {"recon", "ref_mask", "nvm", "nvcn", "nvcf", "nvb", "nva"};
    for (int it = 0; it < 100; ++it) {
        LossWeights w{u(rng), u(rng), u(rng), u(rng), u(rng), u(rng)};
        LossReport ref, novel;
        double expected = 0.0;
        for (int i = 0; i < 7; ++i) {
            const double v = u(rng);
            (i < 2 ? ref : novel).add(names[i], {v, 1.0});
            expected += w.for_term(names[i]) * v;
        }
        const LossReport total = total_loss(ref, novel, w);
        EXPECT_NEAR(total.total, expected, 1e-12);
        EXPECT_EQ(total.terms.size(), 7u);
        EXPECT_DOUBLE_EQ(total.find("nvb")->weight, w.nvb);
        EXPECT_DOUBLE_EQ(total.find("ref_mask")->weight, w.nvm);
    }
}

TEST(TotalLoss, LogLineCarriesEveryTerm) {
    LossReport ref;
    ref.add("recon", {0.5, 12});
    const LossReport t = total_loss(ref, {}, LossWeights{});
    const auto j = nlohmann::json::parse(t.to_log_line(3));
    EXPECT_EQ(j["step"], 3);
    EXPECT_DOUBLE_EQ(j["recon"].get<double>(), 0.5);
    EXPECT_DOUBLE_EQ(j["recon_count"].get<double>(), 12.0);
    EXPECT_DOUBLE_EQ(j["total"].get<double>(), 0.5);
}

TEST(LossWeights, Validation) {
    EXPECT_NO_THROW(LossWeights{}.validate());
    EXPECT_THROW((LossWeights{-1.0, 0, 0, 0, 0, 0}.validate()), UsageError);
    EXPECT_THROW((LossWeights{0, 0, 0, 0, 0, 0}.validate()), UsageError);
    EXPECT_THROW((LossWeights{1, std::nan(""), 0, 0, 0, 0}.validate()), UsageError);
    EXPECT_FALSE((LossWeights{1, 0, 0, 0, 0, 0}.novel_view_enabled()));
    EXPECT_TRUE(LossWeights{}.novel_view_enabled());
    EXPECT_THROW(LossWeights{}.for_term("bogus"), UsageError);
}
