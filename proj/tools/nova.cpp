#include "nova/commands.hpp"
#include "nova/malloc_tuning.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

struct Common {
    std::string config;
    std::vector<std::string> overrides;
    unsigned workers = 1;
};

void add_common(CLI::App* cmd, Common& c, bool config_required = true) {
    auto* opt = cmd->add_option("--config", c.config, "run configuration (JSON)");
    if (config_required) opt->required()->check(CLI::ExistingFile);
    cmd->add_option("--set", c.overrides, "override a config key, e.g. --set train.steps=100")->take_all();
    cmd->add_option("--workers", c.workers, "worker threads (results do not depend on it)")->check(CLI::Range(1u, 256u));
}

void add_view(CLI::App* cmd, std::string& camera, std::string& dataset, long long& frame, double& time) {
    cmd->add_option("--camera", camera, "camera JSON file");
    cmd->add_option("--dataset", dataset, "dataset directory (with --frame)");
    cmd->add_option("--frame", frame, "dataset frame index for camera and time");
    cmd->add_option("--time", time, "normalized time");
}

nova::ViewRequest view_from(const std::string& camera, const std::string& dataset, long long frame, double time,
                            bool time_set) {
    nova::ViewRequest v;
    if (!camera.empty()) v.camera_file = camera;
    if (!dataset.empty()) v.dataset = dataset;
    if (frame >= 0) v.frame = static_cast<std::size_t>(frame);
    if (time_set) v.time = time;
    return v;
}

nova::LoadedConfig load(const Common& c) { return nova::read_run_config(c.config, c.overrides); }

}  // namespace

int main(int argc, char** argv) {
    nova::tune_malloc();
    CLI::App app{"nova: composable dynamic radiance fields with novel-view supervision"};
    app.require_subcommand(1);

    Common gen_c, train_c, render_c, compose_c, eval_c, verify_c;
    std::string out_dir, dataset_dir, checkpoint, insertions, report;

    auto* gen = app.add_subcommand("gen", "generate the synthetic dataset");
    add_common(gen, gen_c);
    gen->add_option("--out", out_dir, "dataset directory")->required();

    auto* train = app.add_subcommand("train", "train a model");
    add_common(train, train_c);
    train->add_option("--dataset", dataset_dir, "dataset directory")->required();
    train->add_option("--out", out_dir, "run directory")->required();

    std::string camera, view_dataset;
    long long frame = -1;
    double time = 0.5;
    double static_beta = 1.0;
    int samples = 0;

    auto* render = app.add_subcommand("render", "render a trained model");
    add_common(render, render_c);
    render->add_option("--checkpoint", checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
    render->add_option("--out", out_dir, "output directory")->required();
    render->add_option("--static-beta", static_beta, "force the static field's blending weight");
    render->add_option("--samples", samples, "samples per ray");
    add_view(render, camera, view_dataset, frame, time);

    auto* compose = app.add_subcommand("compose", "insert trained objects into the static scene");
    add_common(compose, compose_c);
    compose->add_option("--checkpoint", checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
    compose->add_option("--insertions", insertions, "insertion spec (JSON)")->required()->check(CLI::ExistingFile);
    compose->add_option("--out", out_dir, "output directory")->required();
    add_view(compose, camera, view_dataset, frame, time);

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on held-out frames");
    add_common(eval, eval_c);
    eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
    eval->add_option("--dataset", dataset_dir, "dataset directory")->required();
    eval->add_option("--report", report, "report path (JSON)")->required();

    nova::VerifyOptions vopt;
    auto* verify = app.add_subcommand("verify", "run the invariant suite");
    add_common(verify, verify_c, false);
    verify->add_flag("--corrupt-gradient", vopt.corrupt_gradient, "inject a gradient fault");
    verify->add_flag("--bad-oracle", vopt.bad_oracle, "inject an inconsistent compositing oracle");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed()) {
            const auto cfg = load(gen_c);
            const auto ds = nova::cmd_gen(cfg.config, out_dir);
            for (const auto& w : ds.warnings) std::cerr << "warning: " << w << '\n';
            std::cout << "wrote " << ds.frames.size() << " frames to " << out_dir << '\n';
        } else if (train->parsed()) {
            const auto cfg = load(train_c);
            const auto r = nova::cmd_train(cfg, dataset_dir, out_dir, train_c.workers,
                                           [](const std::string& line) { std::cout << line << '\n' << std::flush; });
            std::cout << r.manifest.final_metrics.dump() << '\n';
        } else if (render->parsed()) {
            const auto cfg = load(render_c);
            nova::RenderRequest req;
            req.checkpoint = checkpoint;
            req.out_dir = out_dir;
            req.view = view_from(camera, view_dataset, frame, time, render->count("--time") > 0);
            if (render->count("--static-beta") > 0) req.static_beta = static_beta;
            if (render->count("--samples") > 0) req.samples = samples;
            const auto r = nova::cmd_render(cfg.config, req, render_c.workers);
            if (r.psnr) std::cout << "psnr " << *r.psnr << '\n';
        } else if (compose->parsed()) {
            const auto cfg = load(compose_c);
            nova::ComposeRequest req;
            req.checkpoint = checkpoint;
            req.insertions = nova::load_insertions(insertions);
            req.out_dir = out_dir;
            req.view = view_from(camera, view_dataset, frame, time, compose->count("--time") > 0);
            const auto r = nova::cmd_compose(cfg.config, req, compose_c.workers);
            std::cout << "mean out-of-support mask response " << r.metrics.mean_out_of_support << '\n';
        } else if (eval->parsed()) {
            const auto cfg = load(eval_c);
            const auto rep = nova::cmd_eval(cfg.config, checkpoint, dataset_dir, report, eval_c.workers);
            std::cout << "holdout psnr " << rep.holdout.mean_psnr << " mask iou " << rep.holdout.mean_iou
                      << ", fixed-view psnr " << rep.fixed_view.mean_psnr << '\n';
            if (!rep.train_not_below_holdout) std::cerr << "warning: train PSNR is below held-out PSNR\n";
        } else if (verify->parsed()) {
            if (!verify_c.config.empty()) vopt.seed = nova::load_config(verify_c.config, verify_c.overrides).seed;
            const auto results = nova::cmd_verify(vopt);
            bool ok = true;
            for (const auto& r : results) {
                std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
                ok = ok && r.passed;
            }
            return ok ? 0 : 3;
        }
    } catch (const nova::UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 1;
    } catch (const nova::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    } catch (const nova::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return 3;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
