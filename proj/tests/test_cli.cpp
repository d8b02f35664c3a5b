#include "support.hpp"

#include "nova/commands.hpp"

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>

using namespace nova;
namespace fs = std::filesystem;

namespace {

const fs::path kGolden = fs::path(NOVA_SOURCE_DIR) / "tests" / "data" / "golden";

// Runs the CLI with output captured; returns the exit status.
int run_cli(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string("\"") + NOVA_CLI_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string quoted(const fs::path& p) { return "\"" + p.string() + "\""; }

LoadedConfig write_config(const fs::path& path, const RunConfig& config, std::vector<std::string> overrides = {}) {
    test::write_text(path, to_json(config).dump(2) + "\n");
    return read_run_config(path, overrides);
}

bool same_file(const fs::path& a, const fs::path& b) { return io::read_binary(a) == io::read_binary(b); }

// One default desk run of 500 steps, shared by the tests that need a trained model.
class TrainedDesk : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = new test::TempDir("desk");
        RunConfig cfg;
        cfg.train.steps = 500;
        cfg.train.log_every = 10;
        loaded_ = new LoadedConfig(write_config(dir_->path() / "desk.json", cfg));
        cmd_gen(loaded_->config, dir_->path() / "data");
        result_ = new TrainCommandResult(cmd_train(*loaded_, dir_->path() / "data", dir_->path() / "run"));
    }
    static void TearDownTestSuite() {
        delete result_;
        delete loaded_;
        delete dir_;
    }

    static const RunConfig& config() { return loaded_->config; }
    static fs::path path(const std::string& name) { return dir_->path() / name; }
    static fs::path checkpoint() { return dir_->path() / "run" / "checkpoint.json"; }

    static test::TempDir* dir_;
    static LoadedConfig* loaded_;
    static TrainCommandResult* result_;
};

test::TempDir* TrainedDesk::dir_ = nullptr;
LoadedConfig* TrainedDesk::loaded_ = nullptr;
TrainCommandResult* TrainedDesk::result_ = nullptr;

}  // namespace

TEST(CmdGen, WritesLoadableDataset) {
    test::TempDir dir("gen");
    const RunConfig cfg = test::tiny_config();
    const auto ds = cmd_gen(cfg, dir / "data");
    const auto back = load_dataset(dir / "data");
    ASSERT_EQ(back.size(), ds.frames.size());
    // Synthetic colors are already 8-bit, so ground truth reloads exactly.
    for (std::size_t i = 0; i < back.size(); ++i) EXPECT_EQ(psnr(back[i].rgb, ds.frames[i].rgb), 99.0);
}

TEST(CmdTrain, ZeroStepsWritesInitialCheckpointAndEmptyLog) {
    test::TempDir dir("train0");
    const auto cfg = write_config(dir / "c.json", test::tiny_config(), {"train.steps=0"});
    cmd_gen(cfg.config, dir / "data");
    const auto r = cmd_train(cfg, dir / "data", dir / "run");
    EXPECT_EQ(r.train.steps, 0);
    const auto loaded = load_checkpoint(dir / "run" / "checkpoint.json");
    EXPECT_EQ(loaded.step, 0);
    EXPECT_EQ(loaded.model.parameters().values(), initial_model(cfg.config, 1).parameters().values());
    EXPECT_TRUE(io::read_binary(dir / "run" / "train_log.jsonl").empty());
}

TEST(CmdTrain, ManifestReferencesExistingFilesAndSnapshotIsExact) {
    test::TempDir dir("manifest");
    RunConfig c = test::tiny_config();
    c.train.checkpoint_every = 2;
    const auto cfg = write_config(dir / "c.json", c, {"train.steps=5"});
    cmd_gen(cfg.config, dir / "data");
    cmd_train(cfg, dir / "data", dir / "run");
    const auto manifest = nlohmann::json::parse(io::read_binary(dir / "run" / "run_manifest.json"));
    EXPECT_EQ(manifest["format"], "nova-run");
    EXPECT_EQ(manifest["seed"], c.seed);
    EXPECT_EQ(manifest["overrides"][0], "train.steps=5");
    EXPECT_EQ(manifest["resolved_config"]["train"]["steps"], 5);
    EXPECT_TRUE(same_file(dir / "c.json", dir / "run" / manifest["config_snapshot"].get<std::string>()));
    EXPECT_TRUE(fs::exists(dir / "run" / manifest["log"].get<std::string>()));
    EXPECT_EQ(manifest["checkpoints"].size(), 3u);
    for (const auto& ck : manifest["checkpoints"]) EXPECT_TRUE(fs::exists(dir / "run" / ck.get<std::string>()));
    EXPECT_EQ(manifest["final_metrics"]["steps"], 5);
    EXPECT_TRUE(manifest["final_metrics"].contains("holdout_psnr"));
    // Log lines carry every term and the weighted total.
    std::ifstream log(dir / "run" / "train_log.jsonl");
    std::string line;
    int lines = 0;
    while (std::getline(log, line)) {
        const auto j = nlohmann::json::parse(line);
        for (const char* k : {"step", "recon", "nvm", "nvcn", "nvcf", "nvb", "nva", "total"}) EXPECT_TRUE(j.contains(k)) << k;
        ++lines;
    }
    EXPECT_EQ(lines, 3);
}

TEST(CmdTrain, DeterministicAcrossRunsAndWorkerCounts) {
    test::TempDir dir("determinism");
    const auto cfg = write_config(dir / "c.json", test::tiny_config(), {"train.steps=6"});
    cmd_gen(cfg.config, dir / "data");
    cmd_train(cfg, dir / "data", dir / "a", 1);
    cmd_train(cfg, dir / "data", dir / "b", 1);
    cmd_train(cfg, dir / "data", dir / "c", 3);
    EXPECT_TRUE(same_file(dir / "a" / "checkpoint.json", dir / "b" / "checkpoint.json"));
    EXPECT_TRUE(same_file(dir / "a" / "checkpoint.json", dir / "c" / "checkpoint.json"));
    EXPECT_TRUE(same_file(dir / "a" / "train_log.jsonl", dir / "c" / "train_log.jsonl"));
}

TEST(CmdTrain, ZeroNovelWeightsIgnoreNovelViews) {
    test::TempDir dir("baseline");
    const std::vector<std::string> base = {"train.steps=4", "loss.nvm=0", "loss.nvcn=0",
                                           "loss.nvcf=0",   "loss.nvb=0", "loss.nva=0"};
    auto with_novel = base;
    with_novel.push_back("train.novel_rays=64");
    auto without = base;
    without.push_back("train.novel_rays=0");
    const auto a = write_config(dir / "c.json", test::tiny_config(), with_novel);
    const auto b = read_run_config(dir / "c.json", without);
    cmd_gen(a.config, dir / "data");
    const auto ra = cmd_train(a, dir / "data", dir / "a");
    const auto rb = cmd_train(b, dir / "data", dir / "b");
    EXPECT_EQ(ra.train.model.parameters().values(), rb.train.model.parameters().values());
    for (const auto& t : ra.train.last.terms) EXPECT_TRUE(t.name == "recon" || t.name == "ref_mask") << t.name;
}

TEST(CmdTrain, NonFiniteLossAbortsKeepingLastGoodCheckpoint) {
    test::TempDir dir("nan");
    const auto cfg = write_config(dir / "c.json", test::tiny_config(), {"train.learning_rate=1e300", "train.steps=20"});
    cmd_gen(cfg.config, dir / "data");
    EXPECT_THROW(cmd_train(cfg, dir / "data", dir / "run"), NumericalError);
    const auto kept = load_checkpoint(dir / "run" / "checkpoint.json");
    for (double v : kept.model.parameters().values()) ASSERT_TRUE(std::isfinite(v));
}

TEST(CmdTrain, ObjectCountMismatchIsDataError) {
    test::TempDir dir("mismatch");
    const auto cfg = write_config(dir / "c.json", test::tiny_config());
    cmd_gen(cfg.config, dir / "data");
    RunConfig two = test::tiny_config();
    two.scene.objects.push_back(ObjectSpec{});
    const auto cfg2 = write_config(dir / "c2.json", two);
    EXPECT_THROW(cmd_train(cfg2, dir / "data", dir / "run"), DataError);
}

TEST_F(TrainedDesk, ReconstructionLossDropsTenfold) {
    const auto& logged = result_->train.logged;
    ASSERT_GE(logged.size(), 2u);
    const double first = logged.front().value("recon");
    const double last = result_->train.last.value("recon");
    EXPECT_LT(last * 10.0, first) << "initial " << first << " final " << last;
}

TEST_F(TrainedDesk, RenderAtTrainingFrameMatchesEval) {
    const EvalReport rep = cmd_eval(config(), checkpoint(), path("data"), path("eval.json"));
    EXPECT_TRUE(rep.train_not_below_holdout);
    const auto& f = rep.holdout.frames.front();
    RenderRequest req;
    req.checkpoint = checkpoint();
    req.view.dataset = path("data");
    req.view.frame = f.index;
    req.out_dir = path("render_frame");
    const auto r = cmd_render(config(), req);
    ASSERT_TRUE(r.psnr.has_value());
    EXPECT_EQ(*r.psnr, f.psnr);
    for (const char* name : {"color.ppm", "mask_0.pgm", "mask_1.pgm", "field_1.ppm", "depth.pgm", "render_report.json"})
        EXPECT_TRUE(fs::exists(path("render_frame") / name)) << name;

    req.samples = config().render.samples / 2;
    req.out_dir = path("render_half");
    const auto half = cmd_render(config(), req);
    ASSERT_TRUE(half.psnr.has_value());
    EXPECT_LT(*half.psnr, *r.psnr);
}

TEST_F(TrainedDesk, StaticBetaZeroBlackensBackground) {
    RenderRequest req;
    req.checkpoint = checkpoint();
    req.view.dataset = path("data");
    req.view.frame = 0;
    req.out_dir = path("render_dyn");
    req.static_beta = 0.0;
    const auto r = cmd_render(config(), req);
    const Frame frame = load_dataset(path("data"))[0];
    const MaskImage support = dilate(frame.masks[0], 2);
    double background = 0.0, count = 0.0;
    for (int y = 0; y < frame.height(); ++y)
        for (int x = 0; x < frame.width(); ++x) {
            EXPECT_EQ(r.images.masks[0](x, y), 0.0);
            if (support(x, y) != 0) continue;
            for (int c = 0; c < 3; ++c) background += r.images.color(x, y, c);
            count += 3.0;
        }
    EXPECT_LT(background / count, 0.02);
    EXPECT_THROW(([&] {
                     auto bad = req;
                     bad.static_beta = 1.5;
                     cmd_render(config(), bad);
                 }()),
                 UsageError);
}

TEST_F(TrainedDesk, ComposeEmptyListIsStaticOnly) {
    ComposeRequest req;
    req.checkpoint = checkpoint();
    req.out_dir = path("compose_empty");
    const auto r = cmd_compose(config(), req);
    const SceneModel model = load_checkpoint(checkpoint()).model;
    const std::vector<RenderSlot> static_only = {default_slots(model)[0]};
    const auto cam = SyntheticScene(config().scene, config().seed).fixed_camera();
    const auto expected = render_view(model, static_only, cam, 0.5, config().render);
    EXPECT_EQ(r.images.color, expected.color);
    EXPECT_EQ(r.images.masks.size(), 1u);
}

TEST_F(TrainedDesk, ComposeIdentityInsertionMatchesRender) {
    test::write_text(path("identity.json"), R"({"version": 1, "insertions": [{"object": 0}]})");
    ComposeRequest req;
    req.checkpoint = checkpoint();
    req.insertions = load_insertions(path("identity.json"));
    req.view.time = 0.3;
    req.out_dir = path("compose_identity");
    const auto composed = cmd_compose(config(), req);
    RenderRequest rr;
    rr.checkpoint = checkpoint();
    rr.view.time = 0.3;
    rr.out_dir = path("render_identity");
    const auto rendered = cmd_render(config(), rr);
    for (std::size_t i = 0; i < rendered.images.color.data().size(); ++i)
        EXPECT_NEAR(composed.images.color.data()[i], rendered.images.color.data()[i], 1e-6);
    for (std::size_t i = 0; i < rendered.images.masks[1].data().size(); ++i)
        EXPECT_NEAR(composed.images.masks[1].data()[i], rendered.images.masks[1].data()[i], 1e-6);
}

TEST_F(TrainedDesk, ComposeDuplicatesBothAppear) {
    const auto insertions = load_insertions(fs::path(NOVA_SOURCE_DIR) / "samples" / "two_objects.json");
    ASSERT_EQ(insertions.size(), 2u);
    ComposeRequest req;
    req.checkpoint = checkpoint();
    req.insertions = insertions;
    req.out_dir = path("compose_two");
    const auto r = cmd_compose(config(), req);
    ASSERT_EQ(r.images.masks.size(), 3u);
    std::array<double, 2> cx{};
    for (std::size_t n = 0; n < 2; ++n) {
        const GrayImage& m = r.images.masks[n + 1];
        double sum = 0.0, sx = 0.0;
        for (int y = 0; y < m.height(); ++y)
            for (int x = 0; x < m.width(); ++x) {
                sum += m(x, y);
                sx += m(x, y) * x;
            }
        EXPECT_GT(sum, 20.0) << "insertion " << n;
        cx[n] = sx / sum;
    }
    EXPECT_GT(std::abs(cx[0] - cx[1]), 10.0);
    EXPECT_TRUE(fs::exists(path("compose_two") / "compose_report.json"));
}

TEST(CmdCompose, InvalidInsertionsAreUsageErrors) {
    EXPECT_THROW(parse_insertions(nlohmann::json::parse(R"({"insertions": [{"object": -1}]})")), UsageError);
    EXPECT_THROW(parse_insertions(nlohmann::json::parse(R"({"insertions": [{"object": 0, "translation": [1]}]})")),
                 UsageError);
    EXPECT_THROW(
        parse_insertions(nlohmann::json::parse(R"({"insertions": [{"object": 0, "rotation_deg": 10, "rotation_axis": [0,0,0]}]})")),
        UsageError);
    EXPECT_THROW(parse_insertions(nlohmann::json::parse(R"({"version": 2, "insertions": []})")), UsageError);
    const SceneModel model = SceneModel::create(test::tiny_config().model, 1, 1);
    const std::vector<Insertion> out_of_range = {{3, SE3{}, TimeRemap{}}};
    EXPECT_THROW(composition_slots(model, out_of_range), UsageError);
    Insertion skewed;
    skewed.transform.rotation(0, 1) = 0.5;
    EXPECT_THROW(composition_slots(model, std::vector<Insertion>{skewed}), UsageError);
}

TEST(CmdEval, NoHeldOutFramesIsAnError) {
    test::TempDir dir("eval_none");
    RunConfig c = test::tiny_config();
    c.scene.holdout.clear();
    c.scene.fixed_view_eval = false;
    const auto cfg = write_config(dir / "c.json", c, {"train.steps=0"});
    cmd_gen(cfg.config, dir / "data");
    cmd_train(cfg, dir / "data", dir / "run");
    EXPECT_THROW(cmd_eval(cfg.config, dir / "run" / "checkpoint.json", dir / "data", dir / "r.json"), DataError);
}

TEST(CmdEval, GoldenReport) {
    const auto cfg = read_run_config(kGolden / "config.json");
    test::TempDir dir("golden");
    cmd_gen(cfg.config, dir / "data");
    if (std::getenv("NOVA_UPDATE_GOLDEN") != nullptr) {
        cmd_train(cfg, dir / "data", dir / "run");
        fs::copy_file(dir / "run" / "checkpoint.json", kGolden / "checkpoint.json", fs::copy_options::overwrite_existing);
        cmd_eval(cfg.config, kGolden / "checkpoint.json", dir / "data", kGolden / "report.json");
    }
    ASSERT_TRUE(fs::exists(kGolden / "report.json")) << "golden fixture missing; run with NOVA_UPDATE_GOLDEN=1";
    cmd_eval(cfg.config, kGolden / "checkpoint.json", dir / "data", dir / "report.json");
    EXPECT_EQ(io::read_binary(dir / "report.json"), io::read_binary(kGolden / "report.json"));
}

TEST(CmdVerify, CleanAndFaulted) {
    for (const auto& r : cmd_verify({})) EXPECT_TRUE(r.passed) << r.name << ": " << r.detail;
    VerifyOptions grad_fault;
    grad_fault.corrupt_gradient = true;
    std::vector<std::string> failed;
    for (const auto& r : cmd_verify(grad_fault))
        if (!r.passed) failed.push_back(r.name);
    ASSERT_EQ(failed.size(), 1u);
    EXPECT_NE(failed[0].find("gradient"), std::string::npos);
    VerifyOptions oracle_fault;
    oracle_fault.bad_oracle = true;
    failed.clear();
    for (const auto& r : cmd_verify(oracle_fault))
        if (!r.passed) failed.push_back(r.name);
    ASSERT_EQ(failed.size(), 1u);
    EXPECT_NE(failed[0].find("composit"), std::string::npos);
}

TEST(CliBinary, ExitCodes) {
    test::TempDir dir("exit");
    const fs::path log = dir / "log.txt";
    test::write_text(dir / "c.json", to_json(test::tiny_config()).dump(2));
    const std::string config = "--config " + quoted(dir / "c.json");

    EXPECT_EQ(run_cli("", log), 1);
    EXPECT_EQ(run_cli("bogus", log), 1);
    EXPECT_EQ(run_cli("gen --out " + quoted(dir / "d"), log), 1);
    EXPECT_EQ(run_cli("gen " + config + " --set scene.widht=3 --out " + quoted(dir / "d"), log), 1);
    EXPECT_NE(io::read_binary(log).find("scene.widht"), std::string::npos);

    EXPECT_EQ(run_cli("gen " + config + " --out " + quoted(dir / "data"), log), 0);
    EXPECT_EQ(run_cli("train " + config + " --dataset " + quoted(dir / "absent") + " --out " + quoted(dir / "run"), log),
              2);
    EXPECT_EQ(run_cli("train " + config + " --set train.steps=2 --workers 2 --dataset " + quoted(dir / "data") +
                          " --out " + quoted(dir / "run"),
                      log),
              0);
    const std::string ck = " --checkpoint " + quoted(dir / "run" / "checkpoint.json");

    EXPECT_EQ(run_cli("render " + config + ck + " --out " + quoted(dir / "img") + " --dataset " + quoted(dir / "data") +
                          " --frame 1",
                      log),
              0);
    EXPECT_NE(io::read_binary(log).find("psnr"), std::string::npos);
    test::write_text(dir / "cam.json", R"({"camera": {"fx": 16}})");
    EXPECT_EQ(run_cli("render " + config + ck + " --out " + quoted(dir / "img2") + " --camera " + quoted(dir / "cam.json"),
                      log),
              1);
    test::write_text(dir / "cam.json", camera_to_json(test::simple_camera(8, 6, 8.0)).dump());
    EXPECT_EQ(run_cli("render " + config + ck + " --out " + quoted(dir / "img2") + " --camera " + quoted(dir / "cam.json"),
                      log),
              0);
    EXPECT_EQ(run_cli("render " + config + ck + " --out " + quoted(dir / "img3") + " --static-beta 2", log), 1);

    test::write_text(dir / "ins.json", R"({"insertions": [{"object": 0, "translation": [0.3, 0, 0]}]})");
    EXPECT_EQ(run_cli("compose " + config + ck + " --insertions " + quoted(dir / "ins.json") + " --out " +
                          quoted(dir / "comp"),
                      log),
              0);
    test::write_text(dir / "ins.json", R"({"insertions": [{"object": 4}]})");
    EXPECT_EQ(run_cli("compose " + config + ck + " --insertions " + quoted(dir / "ins.json") + " --out " +
                          quoted(dir / "comp"),
                      log),
              1);

    EXPECT_EQ(run_cli("eval " + config + ck + " --dataset " + quoted(dir / "data") + " --report " +
                          quoted(dir / "report.json"),
                      log),
              0);
    EXPECT_TRUE(fs::exists(dir / "report.json"));
    EXPECT_EQ(run_cli("train " + config + " --set train.learning_rate=1e300 --set train.steps=20 --dataset " +
                          quoted(dir / "data") + " --out " + quoted(dir / "nan"),
                      log),
              3);

    EXPECT_EQ(run_cli("verify", log), 0);
    EXPECT_EQ(run_cli("verify --corrupt-gradient", log), 3);
    EXPECT_NE(io::read_binary(log).find("FAIL"), std::string::npos);
    EXPECT_EQ(run_cli("verify --bad-oracle", log), 3);
}
