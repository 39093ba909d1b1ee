#include "jasgan/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "jasgan/error.hpp"
#include "jasgan/experiment.hpp"

namespace jasgan::cli {

namespace fs = std::filesystem;
namespace ex = jasgan::experiment;
using nlohmann::json;

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string corpus;
    bool force = false;
};

ex::ExperimentConfig load_config(const Common& c) {
    return c.config.empty() ? ex::desk_preset() : ex::load_experiment_config(c.config);
}

ex::Corpus resolve_corpus(const Common& c, const ex::ExperimentConfig& cfg) {
    if (!c.corpus.empty()) return ex::read_corpus(c.corpus);
    return ex::cached_corpus(cfg.corpus, cfg.seed);
}

/// Refuses to replace `file` when it already records `hash`.
void guard(const fs::path& file, const std::string& hash, bool force) {
    if (force || !fs::exists(file)) return;
    json existing;
    try {
        existing = io::read_json(file);
    } catch (const Error&) {
        return;
    }
    if (existing.value("config_hash", "") == hash)
        throw RefuseOverwriteError(file.string() + " already holds output for config hash " + hash + " (use --force)");
}

void make_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

json report_brief(const ex::RunReport& r) {
    json j = {{"name", r.name}, {"config_hash", r.config_hash}};
    if (r.has_atrium) j["atrium_dsc"] = r.report.atrium.dsc.mean;
    if (r.has_scar) j["scar_dsc"] = r.report.scar.dsc.mean;
    return j;
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
    return out + "\"";
}

int cmd_generate(const Common& c, std::ostream& out) {
    auto cfg = load_config(c);
    if (c.seed) cfg.seed = *c.seed;
    const fs::path root = c.out;
    auto corpus = ex::generate_corpus(cfg.corpus, cfg.seed);
    guard(root / "manifest.json", corpus.config_hash, c.force);
    make_dir(root);
    ex::write_corpus(corpus, root);
    io::write_json(root / "config.json", {{"corpus", ex::to_json(cfg.corpus)}, {"seed", cfg.seed}, {"config_hash", corpus.config_hash}});
    out << json{{"corpus", root.string()},
                {"config_hash", corpus.config_hash},
                {"samples", corpus.samples.size()},
                {"test_samples", corpus.split("test").size()}}
               .dump()
        << "\n";
    return kExitOk;
}

int cmd_train(const Common& c, const std::string& ablation, const std::string& pretrained_edn, std::ostream& out) {
    auto cfg = load_config(c);
    const auto corpus = resolve_corpus(c, cfg);
    ex::RunSpec spec;
    spec.ablation = ablation.empty() ? cfg.train.ablation : trainer::parse_ablation(ablation);
    spec.name = trainer::to_string(spec.ablation);
    spec.net = cfg.net;
    spec.train = cfg.train;
    if (c.seed) spec.train.seed = *c.seed;
    spec.epoch_validation = cfg.epoch_validation;
    if (!pretrained_edn.empty()) {
        if (spec.ablation != trainer::Ablation::RN_LA) throw ConfigError("--pretrained-edn applies to RN+LA only");
        spec.pretrained_edn = fs::path(pretrained_edn);
    }
    const auto r = ex::execute_run(spec, corpus, fs::path(c.out), c.force);
    auto j = report_brief(r.report);
    j["dir"] = c.out;
    j["checkpoints"] = r.record.checkpoints;
    out << j.dump() << "\n";
    return kExitOk;
}

int cmd_eval(const Common& c, const std::string& run, const std::string& checkpoint, const std::string& pred, std::ostream& out) {
    const int modes = int(!run.empty()) + int(!checkpoint.empty()) + int(!pred.empty());
    if (modes != 1) throw ConfigError("eval needs exactly one of --run, --checkpoint or --pred");
    const auto cfg = load_config(c);
    const auto corpus = resolve_corpus(c, cfg);

    ex::RunReport report;
    std::string source;
    if (!pred.empty()) {
        source = fs::absolute(pred).string();
        report = ex::evaluate_masks(pred, corpus);
    } else {
        const fs::path ck = checkpoint.empty() ? fs::path(run) / "checkpoints" / "final" : fs::path(checkpoint);
        source = fs::absolute(ck).string();
        report = ex::evaluate_checkpoint(ck, corpus, ck.parent_path().parent_path().filename().string());
    }
    const auto hash = ex::config_hash({{"source", source}, {"corpus_hash", corpus.config_hash}, {"model_hash", report.config_hash}});
    const fs::path dir = c.out;
    guard(dir / "report.json", hash, c.force);
    make_dir(dir);
    auto j = ex::to_json(report);
    j["model_hash"] = report.config_hash;
    j["config_hash"] = hash;
    j["source"] = source;
    io::write_json(dir / "report.json", j);
    io::write_text(dir / "metrics.csv", "# config_hash " + hash + "\n" + ex::report_csv(report));
    auto brief = report_brief(report);
    brief["config_hash"] = hash;
    out << brief.dump() << "\n";
    return kExitOk;
}

int cmd_ablate(const Common& c, bool tournament, std::ostream& out) {
    auto cfg = load_config(c);
    if (c.seed) cfg.seeds = {*c.seed};
    if (tournament) cfg.tournament = true;
    const auto corpus = resolve_corpus(c, cfg);
    const fs::path root = c.out;
    const auto hash = ex::config_hash(ex::to_json(cfg));
    make_dir(root);
    ex::run_ablation(cfg, corpus, root, c.force);
    auto cj = ex::to_json(cfg);
    cj["config_hash"] = hash;
    io::write_json(root / "config.json", cj);
    auto summary = ex::analyze_runs(root, corpus);
    summary["config_hash"] = hash;
    io::write_json(root / "ablation.json", summary);
    out << json{{"dir", root.string()}, {"config_hash", hash}, {"seed_mean", summary["seed_mean"]}}.dump() << "\n";
    return kExitOk;
}

int cmd_analyze(const Common& c, const std::string& runs, std::ostream& out) {
    if (runs.empty()) throw ConfigError("analyze needs --runs DIR");
    const auto cfg = load_config(c);
    const auto corpus = resolve_corpus(c, cfg);
    auto a = ex::analyze_runs(runs, corpus);
    const auto hash = ex::config_hash({{"runs", fs::absolute(runs).string()}, {"corpus_hash", corpus.config_hash}});
    a["config_hash"] = hash;
    const fs::path dir = c.out;
    guard(dir / "analysis.json", hash, c.force);
    make_dir(dir);
    io::write_json(dir / "analysis.json", a);

    std::ostringstream means;
    means << "# config_hash " << hash << "\ntarget,row,dsc\n";
    for (const auto* target : {"atrium_dsc", "scar_dsc"})
        for (const auto& [row, v] : a["seed_mean"][target].items()) means << target << "," << csv_escape(row) << "," << v.get<double>() << "\n";
    io::write_text(dir / "seed_mean.csv", means.str());

    if (a.contains("tournament")) {
        const auto& t = a["tournament"];
        std::ostringstream m;
        m << "# config_hash " << hash << "\nvariant";
        for (const auto& v : t["variants"]) m << "," << v.get<std::string>();
        m << ",affinity\n";
        for (std::size_t i = 0; i < t["variants"].size(); ++i) {
            m << t["variants"][i].get<std::string>();
            for (const auto& w : t["wins"][i]) m << "," << w.get<double>();
            m << "," << t["affinity"][i].get<double>() << "\n";
        }
        io::write_text(dir / "tournament.csv", m.str());
    }
    out << json{{"dir", dir.string()}, {"config_hash", hash}, {"seed_mean", a["seed_mean"]}}.dump() << "\n";
    return kExitOk;
}

int cmd_quantify(const Common& c, const std::string& run, const std::string& checkpoint, std::optional<int> wall, std::ostream& out) {
    if (run.empty() == checkpoint.empty()) throw ConfigError("quantify needs exactly one of --run or --checkpoint");
    const auto cfg = load_config(c);
    const auto corpus = resolve_corpus(c, cfg);
    const int thickness = wall.value_or(cfg.quant_wall_thickness);
    if (thickness < 1) throw ConfigError("--wall-thickness must be >= 1");

    std::map<std::string, ex::VolumePrediction> preds;
    std::string source;
    if (!run.empty()) {
        source = fs::absolute(run).string();
        preds = ex::read_predictions(run, corpus);
    } else {
        source = fs::absolute(checkpoint).string();
        ex::evaluate_checkpoint(checkpoint, corpus, "quantify", &preds);
    }
    const auto q = ex::quantify_predictions(preds, corpus, thickness);
    const auto hash = ex::config_hash({{"source", source}, {"corpus_hash", corpus.config_hash}, {"wall_thickness", thickness}});
    const fs::path dir = c.out;
    guard(dir / "quant.json", hash, c.force);
    make_dir(dir);
    auto j = ex::to_json(q);
    j["config_hash"] = hash;
    j["wall_thickness"] = thickness;
    io::write_json(dir / "quant.json", j);

    std::ostringstream csv;
    csv << "# config_hash " << hash << "\nid,est_scar_mm3,est_wall_mm3,est_percent,true_scar_mm3,true_wall_mm3,true_percent\n";
    for (const auto& r : q.records)
        csv << r.id << "," << r.estimated.scar_mm3 << "," << r.estimated.wall_mm3 << "," << r.estimated.percent << "," << r.truth.scar_mm3
            << "," << r.truth.wall_mm3 << "," << r.truth.percent << "\n";
    io::write_text(dir / "quant.csv", csv.str());
    out << json{{"dir", dir.string()}, {"config_hash", hash}, {"scar_volume_r", q.scar_volume.pearson_r}, {"scar_volume_bias", q.scar_volume.bland_altman.bias}}
               .dump()
        << "\n";
    return kExitOk;
}

void error_record(std::ostream& err, const std::string& kind, int code, const std::string& message) {
    err << json{{"error", kind}, {"exit_code", code}, {"message", message}}.dump() << "\n";
}

} // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Joint atrium and scar segmentation experiments on synthetic phantoms", "jasgan"};
    app.require_subcommand(1);
    Common c;
    auto add_common = [&](CLI::App* sub, bool out_required) {
        sub->add_option("--config", c.config, "experiment config JSON (default: desk preset)");
        sub->add_option("--seed", c.seed, "seed override");
        auto* o = sub->add_option("--out", c.out, "output directory");
        if (out_required) o->required();
        sub->add_option("--corpus", c.corpus, "corpus directory (default: cached corpus of the config)");
        sub->add_flag("--force", c.force, "overwrite outputs with the same config hash");
    };

    auto* generate = app.add_subcommand("generate", "write a phantom corpus");
    add_common(generate, true);

    std::string ablation, pretrained;
    auto* train = app.add_subcommand("train", "train one ablation row");
    add_common(train, true);
    train->add_option("--ablation", ablation, "EDN, RN, RN+LA, EDN+AC, RN+AC or full (default: from config)");
    train->add_option("--pretrained-edn", pretrained, "RN+LA: checkpoint directory holding a trained EDN");

    std::string run, checkpoint, pred;
    auto* eval = app.add_subcommand("eval", "evaluate a run, a checkpoint or mask predictions on the test split");
    add_common(eval, true);
    eval->add_option("--run", run, "run directory (uses checkpoints/final)");
    eval->add_option("--checkpoint", checkpoint, "checkpoint directory");
    eval->add_option("--pred", pred, "directory of <id>/atrium and <id>/scar masks");

    bool tournament = false;
    auto* ablate = app.add_subcommand("ablate", "train the ablation ladder and the cascade operations");
    add_common(ablate, true);
    ablate->add_flag("--tournament", tournament, "also train the cascade-information variants C2..C6");

    std::string runs;
    auto* analyze = app.add_subcommand("analyze", "tournament, affinity, PCA and baselines from persisted runs");
    add_common(analyze, true);
    analyze->add_option("--runs", runs, "ablation output directory")->required();

    std::optional<int> wall;
    auto* quantify = app.add_subcommand("quantify", "scar burden agreement from a run's predictions");
    add_common(quantify, true);
    quantify->add_option("--run", run, "run directory with predictions/");
    quantify->add_option("--checkpoint", checkpoint, "checkpoint directory");
    quantify->add_option("--wall-thickness", wall, "erosion depth for the derived wall");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        error_record(err, "usage", kExitUsage, e.what());
        return kExitUsage;
    }

    try {
        if (generate->parsed()) return cmd_generate(c, out);
        if (train->parsed()) return cmd_train(c, ablation, pretrained, out);
        if (eval->parsed()) return cmd_eval(c, run, checkpoint, pred, out);
        if (ablate->parsed()) return cmd_ablate(c, tournament, out);
        if (analyze->parsed()) return cmd_analyze(c, runs, out);
        if (quantify->parsed()) return cmd_quantify(c, run, checkpoint, wall, out);
    } catch (const Error& e) {
        const int code = static_cast<int>(e.kind());
        error_record(err, to_string(e.kind()), code, e.what());
        return code;
    } catch (const std::exception& e) {
        error_record(err, "internal", kExitInternal, e.what());
        return kExitInternal;
    }
    error_record(err, "usage", kExitUsage, "no subcommand");
    return kExitUsage;
}

} // namespace jasgan::cli
