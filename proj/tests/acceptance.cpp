// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include "nova/nova.hpp"
#include "nova/commands.hpp"
#include "nova/malloc_tuning.hpp"

#include <chrono>
#include <cstdio>
#include <iostream>
#include <map>

#include <unistd.h>

namespace fs = std::filesystem;
using namespace nova;

namespace {

const fs::path kRoot = NOVA_SOURCE_DIR;

struct Line {
    int criterion;
    bool passed;
    std::string detail;
};

std::vector<Line> lines;

void report(int criterion, bool passed, const std::string& detail) {
    lines.push_back({criterion, passed, detail});
    std::cout << (passed ? "PASS" : "FAIL") << " criterion " << criterion << ": " << detail << std::endl;
}

std::string num(double v, int precision = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool all_passed(const std::vector<CheckResult>& checks, std::string& detail) {
    bool ok = true;
    for (const auto& c : checks) {
        ok = ok && c.passed;
        if (!detail.empty()) detail += "; ";
        detail += c.name + " [" + c.detail + "]";
    }
    return ok;
}

struct LegResult {
    std::string name;
    double train_seconds = 0.0;
    double holdout_psnr = 0.0;
    double holdout_iou = 0.0;
    NovelViewSummary novel;
    fs::path checkpoint;
    RunConfig config;
};

constexpr std::size_t kNovelViews = 8;
constexpr std::uint64_t kNovelSeed = 0x6e6f76656cULL;

LegResult run_leg(const std::string& name, const fs::path& config_path, const std::vector<std::string>& overrides,
                  const fs::path& dataset, const fs::path& work) {
    LegResult r;
    r.name = name;
    const LoadedConfig cfg = read_run_config(config_path, overrides);
    r.config = cfg.config;
    const auto t0 = std::chrono::steady_clock::now();
    const auto run = cmd_train(cfg, dataset, work / name);
    r.train_seconds = seconds_since(t0);
    r.checkpoint = work / name / "checkpoint.json";
    const auto frames = load_dataset(dataset);
    const SplitSummary holdout = evaluate_split(run.train.model, frames, Split::Holdout, cfg.config.render);
    r.holdout_psnr = holdout.mean_psnr;
    r.holdout_iou = holdout.mean_iou;
    const SyntheticScene scene(cfg.config.scene, cfg.config.seed);
    r.novel = evaluate_novel_views(run.train.model, scene, frames, cfg.config, kNovelViews, kNovelSeed);
    std::cout << "  leg " << name << ": " << run.train.steps << " steps in " << num(r.train_seconds) << " s, final loss "
              << num(run.train.last.total) << ", holdout psnr " << num(r.holdout_psnr) << " dB, iou "
              << num(r.holdout_iou) << ", novel psnr " << num(r.novel.mean_psnr) << " dB, novel iou "
              << num(r.novel.mean_iou) << ", out-of-support " << num(r.novel.mean_out_of_support) << std::endl;
    return r;
}

}  // namespace

int main() {
    tune_malloc();
    const fs::path work = fs::temp_directory_path() / ("nova_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(work);
    fs::create_directories(work);

    try {
        VerifyOptions opt;

        // Criterion 2: every reduction against its loop oracle, 200 instances each.
        {
            const auto t0 = std::chrono::steady_clock::now();
            auto checks = check_renderer_oracles(opt);
            checks.erase(std::remove_if(checks.begin(), checks.end(),
                                        [](const CheckResult& c) { return c.name.find("depth") != std::string::npos; }),
                         checks.end());
            checks.push_back(check_loss_oracles(opt));
            const double secs = seconds_since(t0);
            std::string detail;
            const bool ok = all_passed(checks, detail) && secs < 10.0;
            report(2, ok, detail + "; " + num(secs) + " s (limit 10 s)");
        }

        // Criterion 3: end-to-end gradient against central differences.
        {
            const auto t0 = std::chrono::steady_clock::now();
            const CheckResult c = check_pipeline_gradient(opt, 100);
            const double secs = seconds_since(t0);
            report(3, c.passed && secs < 60.0, c.detail + "; " + num(secs) + " s (limit 60 s)");
        }

        // Criterion 4: single-field reduction and homogeneous medium.
        {
            std::string detail;
            const bool ok = all_passed({check_single_field_reduction(opt), check_homogeneous_medium()}, detail);
            report(4, ok, detail);
        }

        // Criterion 5: warp against the projection oracle.
        {
            const CheckResult c = check_warp_oracle(opt, 50);
            report(5, c.passed, c.detail);
        }

        // Criterion 8: determinism across runs and worker counts.
        {
            const std::vector<std::string> overrides = {"train.steps=30", "train.log_every=10"};
            const LoadedConfig cfg = read_run_config(kRoot / "configs" / "desk.json", overrides);
            cmd_gen(cfg.config, work / "det_data");
            cmd_train(cfg, work / "det_data", work / "det_a", 1);
            cmd_train(cfg, work / "det_data", work / "det_b", 1);
            cmd_train(cfg, work / "det_data", work / "det_c", 2);
            const std::string a = io::read_binary(work / "det_a" / "checkpoint.json");
            const std::string b = io::read_binary(work / "det_b" / "checkpoint.json");
            const std::string c = io::read_binary(work / "det_c" / "checkpoint.json");
            const bool logs = io::read_binary(work / "det_a" / "train_log.jsonl") ==
                              io::read_binary(work / "det_c" / "train_log.jsonl");
            report(8, a == b && a == c && logs,
                   std::string("30-step desk runs: repeat ") + (a == b ? "identical" : "DIFFERENT") +
                       ", workers 1 vs 2 " + (a == c && logs ? "identical" : "DIFFERENT") + " (" +
                       std::to_string(a.size()) + " checkpoint bytes)");
        }

        // Ablation matrix; the all-losses leg doubles as the desk-scale quality run.
        const auto matrix = nlohmann::json::parse(read_text_file(kRoot / "configs" / "ablation.json"));
        const fs::path base = kRoot / "configs" / matrix.at("base").get<std::string>();
        const LoadedConfig base_cfg = read_run_config(base);
        cmd_gen(base_cfg.config, work / "desk_data");
        std::map<std::string, LegResult> legs;
        for (const auto& leg : matrix.at("legs")) {
            const auto name = leg.at("name").get<std::string>();
            legs[name] = run_leg(name, base, leg.at("overrides").get<std::vector<std::string>>(), work / "desk_data", work);
        }
        const LegResult& all = legs.at("all");
        const LegResult& none = legs.at("none");

        // Criterion 1: desk-scale surrogate quality.
        {
            const bool ok = all.holdout_psnr >= 25.0 && all.holdout_iou >= 0.90 && all.train_seconds <= 1800.0;
            report(1, ok,
                   "held-out psnr " + num(all.holdout_psnr) + " dB (>= 25), mask iou " + num(all.holdout_iou) +
                       " (>= 0.90), training " + num(all.train_seconds) + " s (<= 1800)");
        }

        // Criterion 6: leakage at perturbed cameras and in a duplicated composition.
        {
            const double ratio = none.novel.mean_out_of_support / std::max(all.novel.mean_out_of_support, 1e-12);
            ComposeRequest req;
            req.checkpoint = all.checkpoint;
            req.insertions = load_insertions(kRoot / "samples" / "two_objects.json");
            req.view.time = 0.5;
            req.out_dir = work / "compose";
            const auto composed = cmd_compose(all.config, req);
            const bool ok = ratio >= 3.0 && composed.metrics.mean_out_of_support < 0.05;
            report(6, ok,
                   "out-of-support mask response over " + std::to_string(kNovelViews) + " perturbed views: without " +
                       num(none.novel.mean_out_of_support) + ", with " + num(all.novel.mean_out_of_support) +
                       " (ratio " + num(ratio) + ", need >= 3); duplicated composition " +
                       num(composed.metrics.mean_out_of_support) + " (< 0.05)");
        }

        // Criterion 7: four legs from one matrix, all-losses dominates no-losses.
        {
            const bool four = legs.size() == 4;
            const bool psnr_better = all.novel.mean_psnr > none.novel.mean_psnr;
            const bool leak_better = all.novel.mean_out_of_support < none.novel.mean_out_of_support;
            std::string detail = std::to_string(legs.size()) + " legs;";
            for (const auto& [name, r] : legs) {
                detail += " " + name + " psnr " + num(r.novel.mean_psnr) + " leak " + num(r.novel.mean_out_of_support) + ";";
            }
            detail += psnr_better && leak_better ? " all dominates none" : " all does NOT dominate none";
            report(7, four && psnr_better && leak_better, detail);
        }
    } catch (const std::exception& e) {
        std::cout << "acceptance aborted: " << e.what() << std::endl;
        fs::remove_all(work);
        return 2;
    }
    fs::remove_all(work);

    std::sort(lines.begin(), lines.end(), [](const Line& a, const Line& b) { return a.criterion < b.criterion; });
    bool ok = lines.size() == 8;
    std::cout << "\nsummary\n";
    for (const auto& l : lines) {
        std::cout << (l.passed ? "PASS" : "FAIL") << " criterion " << l.criterion << '\n';
        ok = ok && l.passed;
    }
    return ok ? 0 : 1;
}
