#include <set>

#include <gtest/gtest.h>

#include "cli_fixtures.hpp"
#include "jasgan/io.hpp"

using namespace jasgan::testutil;
using nlohmann::json;

namespace {

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        root = fresh_dir(::testing::UnitTest::GetInstance()->current_test_info()->name());
        config = root / "config.json";
        write_file(config, tiny_experiment().dump());
        setenv("JASGAN_CACHE_DIR", (root / "cache").c_str(), 1);
    }
    void TearDown() override { fs::remove_all(root); }

    fs::path root, config;
};

std::map<std::string, std::string> tree(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = slurp(e.path());
    return files;
}

json error_of(const CliResult& r) { return json::parse(r.err); }

} // namespace

TEST_F(Cli, GenerateIsDeterministicAndGuardsOverwrite) {
    const auto a = root / "a", b = root / "b";
    ASSERT_EQ(cli({"generate", "--config", config.string(), "--seed", "7", "--out", a.string()}).code, 0);
    ASSERT_EQ(cli({"generate", "--config", config.string(), "--seed", "7", "--out", b.string()}).code, 0);
    const auto ta = tree(a), tb = tree(b);
    EXPECT_EQ(ta.size(), 1u + 1u + 6u * 8u);  // manifest, config, 4 grids of header+raw per sample
    EXPECT_EQ(ta, tb);

    const auto again = cli({"generate", "--config", config.string(), "--seed", "7", "--out", a.string()});
    EXPECT_EQ(again.code, 10);
    EXPECT_EQ(error_of(again)["error"], "refuse_overwrite");
    EXPECT_EQ(cli({"generate", "--config", config.string(), "--seed", "7", "--out", a.string(), "--force"}).code, 0);

    ASSERT_EQ(cli({"generate", "--config", config.string(), "--seed", "8", "--out", (root / "c").string()}).code, 0);
    EXPECT_NE(slurp(a / "manifest.json"), slurp(root / "c" / "manifest.json"));
    const auto manifest = jasgan::io::read_json(a / "manifest.json");
    EXPECT_EQ(manifest["config_hash"], jasgan::io::read_json(a / "config.json")["config_hash"]);
}

TEST_F(Cli, EvalOfGroundTruthIsPerfect) {
    const auto corpus = root / "corpus";
    ASSERT_EQ(cli({"generate", "--config", config.string(), "--out", corpus.string()}).code, 0);
    const auto r = cli({"eval", "--corpus", corpus.string(), "--pred", corpus.string(), "--out", (root / "eval").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rep = jasgan::io::read_json(root / "eval" / "report.json");
    ASSERT_EQ(rep["scans"].size(), 3u);
    for (const auto& scan : rep["scans"])
        for (const auto* target : {"atrium", "scar"}) {
            const auto& m = scan[target];
            EXPECT_EQ(m["dsc"].get<double>(), 1.0);
            EXPECT_EQ(m["ji"].get<double>(), 1.0);
            EXPECT_NEAR(m["nmi"].get<double>(), 1.0, 1e-12);
            EXPECT_EQ(m["asd"].get<double>(), 0.0);
            EXPECT_EQ(m["usr"].get<double>(), 0.0);
            EXPECT_EQ(m["osr"].get<double>(), 0.0);
        }
    EXPECT_FALSE(rep["config_hash"].get<std::string>().empty());
    EXPECT_NE(slurp(root / "eval" / "metrics.csv").find(rep["config_hash"].get<std::string>()), std::string::npos);
}

TEST_F(Cli, ErrorsMapToDistinctExitCodes) {
    const auto unknown = cli({"frobnicate"});
    EXPECT_EQ(unknown.code, 2);
    EXPECT_EQ(error_of(unknown)["error"], "usage");
    EXPECT_EQ(cli({"generate"}).code, 2);  // --out is required

    write_file(root / "bad.json", R"({"corpus": {"samples": 4, "sample_count": 9}})");
    const auto bad = cli({"generate", "--config", (root / "bad.json").string(), "--out", (root / "x").string()});
    EXPECT_EQ(bad.code, 3);
    EXPECT_EQ(error_of(bad)["error"], "config");
    write_file(root / "broken.json", "{ not json");
    EXPECT_EQ(cli({"generate", "--config", (root / "broken.json").string(), "--out", (root / "x").string()}).code, 3);

    const auto missing = cli({"eval", "--corpus", (root / "nowhere").string(), "--pred", root.string(), "--out", (root / "e").string()});
    EXPECT_EQ(missing.code, 4);
    EXPECT_EQ(error_of(missing)["error"], "missing_input");
    EXPECT_EQ(cli({"generate", "--config", (root / "absent.json").string(), "--out", (root / "x").string()}).code, 4);
    EXPECT_EQ(cli({"eval", "--config", config.string(), "--out", (root / "e").string()}).code, 3);  // no source

    EXPECT_EQ(cli({"--help"}).code, 0);
}

TEST_F(Cli, TrainEvalQuantifyAndAnalyze) {
    const auto run = root / "run";
    const auto t = cli({"train", "--config", config.string(), "--out", run.string(), "--ablation", "full"});
    ASSERT_EQ(t.code, 0) << t.err;
    for (const auto* f : {"config.json", "train_log.jsonl", "run_record.json", "report.json", "metrics.csv"}) EXPECT_TRUE(fs::exists(run / f)) << f;
    for (const auto* ck : {"init", "final"})
        for (const auto* f : {"cascade.pt", "discriminator.pt", "balance.pt", "meta.json"})
            EXPECT_TRUE(fs::exists(run / "checkpoints" / ck / f)) << ck << "/" << f;
    const auto hash = jasgan::io::read_json(run / "config.json")["config_hash"].get<std::string>();
    EXPECT_EQ(jasgan::io::read_json(run / "report.json")["config_hash"], hash);
    EXPECT_EQ(jasgan::io::read_json(run / "checkpoints" / "final" / "meta.json")["config_hash"], hash);
    const auto record = jasgan::io::read_json(run / "run_record.json");
    EXPECT_GT(record["train_patches"].get<int>(), 0);
    EXPECT_GE(record["skipped_slices"].get<int>(), 0);
    EXPECT_EQ(cli({"train", "--config", config.string(), "--out", run.string(), "--ablation", "full"}).code, 10);

    const auto e = cli({"eval", "--config", config.string(), "--run", run.string(), "--out", (root / "eval").string()});
    ASSERT_EQ(e.code, 0) << e.err;
    // Re-evaluating the final checkpoint reproduces the report written at the end of training.
    const auto a = jasgan::io::read_json(run / "report.json"), b = jasgan::io::read_json(root / "eval" / "report.json");
    EXPECT_EQ(a["scans"], b["scans"]);

    const auto q = cli({"quantify", "--config", config.string(), "--run", run.string(), "--out", (root / "quant").string()});
    ASSERT_EQ(q.code, 0) << q.err;
    const auto quant = jasgan::io::read_json(root / "quant" / "quant.json");
    EXPECT_EQ(quant["records"].size(), 3u);
    EXPECT_TRUE(quant["scar_volume"].contains("scatter"));
    EXPECT_TRUE(quant["scar_volume"].contains("ba_points"));
    EXPECT_TRUE(fs::exists(root / "quant" / "quant.csv"));

    const auto bad_ablation = cli({"train", "--config", config.string(), "--out", (root / "r2").string(), "--ablation", "ALL"});
    EXPECT_EQ(bad_ablation.code, 3);
}

TEST_F(Cli, AblateWritesTenRunDirectories) {
    const auto out = root / "ablate";
    const auto r = cli({"ablate", "--config", config.string(), "--out", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    std::set<std::string> dirs;
    for (const auto& e : fs::directory_iterator(out))
        if (e.is_directory()) dirs.insert(e.path().filename().string());
    EXPECT_EQ(dirs, (std::set<std::string>{"EDN", "RN", "RN+LA", "EDN+AC", "RN+AC", "full", "O_a", "O_p", "O_c", "O_ac"}));
    EXPECT_TRUE(fs::exists(out / "RN+AC" / "shared.json"));
    EXPECT_TRUE(fs::exists(out / "O_ac" / "shared.json"));
    EXPECT_FALSE(fs::exists(out / "O_ac" / "checkpoints"));
    EXPECT_TRUE(fs::exists(out / "ablation.json"));

    const auto an = cli({"analyze", "--config", config.string(), "--runs", out.string(), "--out", (root / "analysis").string()});
    ASSERT_EQ(an.code, 0) << an.err;
    const auto a = jasgan::io::read_json(root / "analysis" / "analysis.json");
    EXPECT_TRUE(a["seed_mean"]["scar_dsc"].contains("O_ac"));
    EXPECT_TRUE(a["seed_mean"].contains("pca"));
    EXPECT_TRUE(a["sweeps"][0].contains("pca_points"));
    EXPECT_TRUE(a["baselines"].contains("2SD"));
    EXPECT_TRUE(fs::exists(root / "analysis" / "seed_mean.csv"));
    EXPECT_EQ(cli({"analyze", "--config", config.string(), "--runs", out.string(), "--out", (root / "analysis").string()}).code, 10);
}
