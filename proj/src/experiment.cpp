#include "jasgan/experiment.hpp"

#include <algorithm>
#include <cstdlib>
#include <iomanip>
#include <sstream>

namespace jasgan::experiment {

using trainer::Ablation;

// ---------------------------------------------------------------------------------------------
// Configs

namespace {

template <typename T>
json range_json(const Range<T>& r) {
    return json::array({r.min, r.max});
}

template <typename T>
Range<T> range_from(const json& j, const char* key, Range<T> fallback) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (!v.is_array() || v.size() != 2) throw ConfigError(std::string("'") + key + "' must be a [min, max] pair");
    return {v[0].get<T>(), v[1].get<T>()};
}

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const char* where) {
    if (!j.is_object()) throw ConfigError(std::string(where) + " must be a JSON object");
    for (const auto& [k, _] : j.items())
        if (std::none_of(keys.begin(), keys.end(), [&](const char* known) { return k == known; }))
            throw ConfigError(std::string(where) + ": unknown key '" + k + "'");
}

std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

} // namespace

json to_json(const PhantomConfig& c) {
    return {{"dims", {c.dims.depth, c.dims.height, c.dims.width}},
            {"spacing", {c.spacing.z, c.spacing.y, c.spacing.x}},
            {"atrium_radius_mm", range_json(c.atrium_radius_mm)},
            {"atrium_radius_z_mm", range_json(c.atrium_radius_z_mm)},
            {"shape_irregularity", c.shape_irregularity},
            {"wall_thickness_vox", range_json(c.wall_thickness_vox)},
            {"scar_count", range_json(c.scar_count)},
            {"scar_radius_mm", range_json(c.scar_radius_mm)},
            {"scar_fraction", range_json(c.scar_fraction)},
            {"distractor_count", c.distractor_count},
            {"attenuation", c.attenuation},
            {"background_intensity", c.background_intensity},
            {"atrium_contrast", c.atrium_contrast},
            {"scar_intensity", c.scar_intensity},
            {"scar_heterogeneity", c.scar_heterogeneity},
            {"blur_sigma_vox", c.blur_sigma_vox},
            {"noise", c.noise}};
}

PhantomConfig phantom_config_from_json(const json& j) {
    reject_unknown(j,
                   {"dims", "spacing", "atrium_radius_mm", "atrium_radius_z_mm", "shape_irregularity", "wall_thickness_vox",
                    "scar_count", "scar_radius_mm", "scar_fraction", "distractor_count", "attenuation", "background_intensity",
                    "atrium_contrast", "scar_intensity", "scar_heterogeneity", "blur_sigma_vox", "noise"},
                   "phantom config");
    PhantomConfig c;
    try {
        if (j.contains("dims")) {
            const auto& d = j.at("dims");
            c.dims = {d.at(0).get<std::int64_t>(), d.at(1).get<std::int64_t>(), d.at(2).get<std::int64_t>()};
        }
        if (j.contains("spacing")) {
            const auto& s = j.at("spacing");
            c.spacing = {s.at(0).get<double>(), s.at(1).get<double>(), s.at(2).get<double>()};
        }
        c.atrium_radius_mm = range_from(j, "atrium_radius_mm", c.atrium_radius_mm);
        c.atrium_radius_z_mm = range_from(j, "atrium_radius_z_mm", c.atrium_radius_z_mm);
        c.shape_irregularity = j.value("shape_irregularity", c.shape_irregularity);
        c.wall_thickness_vox = range_from(j, "wall_thickness_vox", c.wall_thickness_vox);
        c.scar_count = range_from(j, "scar_count", c.scar_count);
        c.scar_radius_mm = range_from(j, "scar_radius_mm", c.scar_radius_mm);
        c.scar_fraction = range_from(j, "scar_fraction", c.scar_fraction);
        c.distractor_count = j.value("distractor_count", c.distractor_count);
        c.attenuation = j.value("attenuation", c.attenuation);
        c.background_intensity = j.value("background_intensity", c.background_intensity);
        c.atrium_contrast = j.value("atrium_contrast", c.atrium_contrast);
        c.scar_intensity = j.value("scar_intensity", c.scar_intensity);
        c.scar_heterogeneity = j.value("scar_heterogeneity", c.scar_heterogeneity);
        c.blur_sigma_vox = j.value("blur_sigma_vox", c.blur_sigma_vox);
        c.noise = j.value("noise", c.noise);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("phantom config: ") + e.what());
    }
    detail::validate(c);
    return c;
}

json to_json(const CorpusConfig& c) {
    return {{"phantom", to_json(c.phantom)}, {"samples", c.samples}, {"test_samples", c.test_samples}};
}

CorpusConfig corpus_config_from_json(const json& j) {
    reject_unknown(j, {"phantom", "samples", "test_samples"}, "corpus config");
    CorpusConfig c;
    try {
        if (j.contains("phantom")) c.phantom = phantom_config_from_json(j.at("phantom"));
        c.samples = j.value("samples", c.samples);
        c.test_samples = j.value("test_samples", c.test_samples);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("corpus config: ") + e.what());
    }
    if (c.test_samples < 1 || c.test_samples >= c.samples)
        throw ConfigError("corpus needs at least one training and one test sample");
    return c;
}

json to_json(const ExperimentConfig& c) {
    return {{"corpus", to_json(c.corpus)},
            {"net", trainer::to_json(c.net)},
            {"train", trainer::to_json(c.train)},
            {"seed", c.seed},
            {"seeds", c.seeds},
            {"tournament", c.tournament},
            {"quant_wall_thickness", c.quant_wall_thickness},
            {"epoch_validation", c.epoch_validation}};
}

ExperimentConfig experiment_config_from_json(const json& j) {
    reject_unknown(j, {"corpus", "net", "train", "seed", "seeds", "tournament", "quant_wall_thickness", "epoch_validation"},
                   "experiment config");
    ExperimentConfig c;
    try {
        if (j.contains("corpus")) c.corpus = corpus_config_from_json(j.at("corpus"));
        if (j.contains("net")) c.net = trainer::net_config_from_json(j.at("net"));
        if (j.contains("train")) c.train = trainer::train_config_from_json(j.at("train"));
        c.seed = j.value("seed", c.seed);
        c.seeds = j.value("seeds", c.seeds);
        c.tournament = j.value("tournament", c.tournament);
        c.quant_wall_thickness = j.value("quant_wall_thickness", c.quant_wall_thickness);
        c.epoch_validation = j.value("epoch_validation", c.epoch_validation);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("experiment config: ") + e.what());
    }
    if (c.quant_wall_thickness < 1) throw ConfigError("quant_wall_thickness must be >= 1");
    return c;
}

ExperimentConfig load_experiment_config(const fs::path& path) { return experiment_config_from_json(io::read_json(path)); }

std::string config_hash(const json& j) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : j.dump()) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return hex64(h);
}

ExperimentConfig desk_preset() {
    ExperimentConfig c;
    auto& p = c.corpus.phantom;
    p.dims = {16, 48, 48};
    p.atrium_radius_mm = {12.0, 17.0};
    p.atrium_radius_z_mm = {5.0, 6.5};
    p.wall_thickness_vox = {1, 2};
    p.scar_count = {3, 6};
    p.scar_radius_mm = {2.0, 3.5};
    p.distractor_count = 4;
    c.corpus.samples = 30;
    c.corpus.test_samples = 10;
    c.net.patch = 48;
    c.net.edn_base_width = 8;
    c.net.rn_width = 16;
    c.net.disc_base_width = 16;
    c.net.lstm_hidden = 8;
    c.train.epochs = 20;
    c.train.batch_size = 8;
    c.seeds = {0, 1, 2};
    c.tournament = true;
    c.quant_wall_thickness = 1;
    c.epoch_validation = false;
    return c;
}

// ---------------------------------------------------------------------------------------------
// Corpus

std::vector<const Sample*> Corpus::split(const std::string& name) const {
    std::vector<const Sample*> out;
    for (const auto& s : samples)
        if (s.record.split == name) out.push_back(&s);
    return out;
}

Corpus generate_corpus(const CorpusConfig& config, std::uint64_t seed) {
    if (config.test_samples < 1 || config.test_samples >= config.samples)
        throw ConfigError("corpus needs at least one training and one test sample");
    Corpus corpus;
    corpus.config_hash = config_hash({{"corpus", to_json(config)}, {"seed", seed}});
    for (int i = 0; i < config.samples; ++i) {
        PhantomConfig pc = config.phantom;
        pc.seed = corpus_sample_seed(seed, std::uint64_t(i));
        auto ph = generate_phantom(pc);
        std::ostringstream id;
        id << "sample_" << std::setw(3) << std::setfill('0') << i;
        Sample s;
        s.record = {id.str(), i >= config.samples - config.test_samples ? "test" : "train", pc.seed};
        ph.volume.id = s.record.id;
        s.normalized = normalize_volume(ph.volume);
        s.volume = std::move(ph.volume);
        s.labels = std::move(ph.labels);
        corpus.samples.push_back(std::move(s));
    }
    return corpus;
}

void write_corpus(const Corpus& corpus, const fs::path& root) {
    std::vector<io::SampleRecord> records;
    for (const auto& s : corpus.samples) {
        io::write_sample(root, s.record, s.volume, s.labels);
        records.push_back(s.record);
    }
    io::write_json(root / "manifest.json", io::manifest_json(records, corpus.config_hash));
}

Corpus read_corpus(const fs::path& root) {
    if (!fs::exists(root / "manifest.json")) throw MissingInputError("no corpus manifest in " + root.string());
    Corpus corpus;
    const auto records = io::read_manifest(root, &corpus.config_hash);
    std::vector<std::string> train, test;
    for (const auto& rec : records) {
        auto loaded = io::read_sample(root, rec);
        Sample s;
        s.record = rec;
        s.normalized = normalize_volume(loaded.volume);
        s.volume = std::move(loaded.volume);
        s.labels = std::move(loaded.labels);
        (rec.split == "test" ? test : train).push_back(rec.id);
        corpus.samples.push_back(std::move(s));
    }
    trainer::require_disjoint(train, test);
    if (train.empty() || test.empty()) throw ConfigError("corpus in " + root.string() + " lacks a training or a test split");
    return corpus;
}

fs::path cache_dir() {
    if (const char* env = std::getenv("JASGAN_CACHE_DIR"); env && *env) return env;
    return fs::temp_directory_path() / "jasgan-cache";
}

Corpus cached_corpus(const CorpusConfig& config, std::uint64_t seed) {
    const auto hash = config_hash({{"corpus", to_json(config)}, {"seed", seed}});
    const auto root = cache_dir() / ("corpus-" + hash);
    if (fs::exists(root / "manifest.json")) {
        auto c = read_corpus(root);
        if (c.config_hash == hash) return c;
    }
    auto c = generate_corpus(config, seed);
    write_corpus(c, root);
    return c;
}

trainer::PatchTensors patches_for(const Corpus& corpus, const std::string& split, std::int64_t patch) {
    std::vector<Patch> all;
    std::int64_t skipped = 0;
    for (const auto* s : corpus.split(split)) {
        auto set = extract_patches(s->normalized, s->labels, patch);
        skipped += set.skipped;
        for (auto& p : set.patches) {
            p.sample_id = s->record.id;
            all.push_back(std::move(p));
        }
    }
    auto t = trainer::to_tensors(all);
    t.skipped_slices = skipped;
    return t;
}

// ---------------------------------------------------------------------------------------------
// Prediction and evaluation

namespace {

torch::Tensor volume_tensor(const Volume& v) {
    const auto d = v.data.dims();
    auto t = torch::empty({d.depth, 1, d.height, d.width});
    std::copy(v.data.values().begin(), v.data.values().end(), t.data_ptr<float>());
    return t;
}

Grid3<float> to_grid(const torch::Tensor& t, Dims d) {
    const auto c = t.contiguous().to(torch::kFloat);
    Grid3<float> g(d);
    std::copy(c.data_ptr<float>(), c.data_ptr<float>() + g.size(), g.values().begin());
    return g;
}

} // namespace

VolumePrediction predict_volume(trainer::Model& model, const Volume& normalized) {
    const auto d = normalized.data.dims();
    if (d.depth < 2) throw ShapeError("prediction needs at least two slices (batch statistics)");
    const auto pred = model.predict(volume_tensor(normalized));
    VolumePrediction out;
    if (pred.atrium.defined()) out.atrium = to_grid(pred.atrium, d);
    if (pred.scar.defined()) out.scar = to_grid(pred.scar, d);
    return out;
}

EvaluatedScan evaluate_prediction(const VolumePrediction& pred, const LabelPair& truth, const Spacing& spacing, const std::string& id) {
    EvaluatedScan e;
    e.metrics.id = id;
    if (pred.atrium) {
        e.metrics.atrium = metrics::evaluate_target(binarize(*pred.atrium), truth.atrium, spacing);
        e.has_atrium = true;
    }
    if (pred.scar) {
        e.metrics.scar = metrics::evaluate_target(binarize(*pred.scar), truth.scar, spacing);
        e.has_scar = true;
    }
    return e;
}

namespace {

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }
std::optional<double> opt_from(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

json summary_json(const metrics::Summary& s) {
    auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
    return {{"mean", num(s.mean)}, {"std", num(s.std)}, {"count", s.count}};
}

json target_summary_json(const metrics::TargetSummary& t) {
    return {{"dsc", summary_json(t.dsc)}, {"ji", summary_json(t.ji)}, {"asd", summary_json(t.asd)},
            {"nmi", summary_json(t.nmi)}, {"usr", summary_json(t.usr)}, {"osr", summary_json(t.osr)}};
}

json target_json(const metrics::TargetMetrics& m) {
    return {{"dsc", m.dsc},
            {"ji", m.ji},
            {"asd", opt_json(m.asd)},
            {"nmi", opt_json(m.nmi)},
            {"usr", opt_json(m.usr)},
            {"osr", opt_json(m.osr)},
            {"counts", {{"tp", m.counts.tp}, {"fp", m.counts.fp}, {"fn", m.counts.fn}, {"tn", m.counts.tn}}}};
}

metrics::TargetMetrics target_from(const json& j) {
    metrics::TargetMetrics m;
    m.dsc = j.at("dsc").get<double>();
    m.ji = j.at("ji").get<double>();
    m.asd = opt_from(j, "asd");
    m.nmi = opt_from(j, "nmi");
    m.usr = opt_from(j, "usr");
    m.osr = opt_from(j, "osr");
    const auto& c = j.at("counts");
    m.counts = {c.at("tp").get<std::int64_t>(), c.at("fp").get<std::int64_t>(), c.at("fn").get<std::int64_t>(),
                c.at("tn").get<std::int64_t>()};
    return m;
}

RunReport make_run_report(const std::string& name, const std::string& hash, std::vector<EvaluatedScan> scans) {
    std::sort(scans.begin(), scans.end(), [](const auto& a, const auto& b) { return a.metrics.id < b.metrics.id; });
    RunReport r;
    r.name = name;
    r.config_hash = hash;
    r.has_atrium = !scans.empty() && scans.front().has_atrium;
    r.has_scar = !scans.empty() && scans.front().has_scar;
    std::vector<metrics::ScanMetrics> m;
    for (auto& s : scans) m.push_back(std::move(s.metrics));
    r.report = metrics::make_report(std::move(m));
    return r;
}

} // namespace

json to_json(const RunReport& r) {
    json scans = json::array();
    for (const auto& s : r.report.scans) {
        json row = {{"id", s.id}};
        row["atrium"] = r.has_atrium ? target_json(s.atrium) : json(nullptr);
        row["scar"] = r.has_scar ? target_json(s.scar) : json(nullptr);
        scans.push_back(row);
    }
    return {{"name", r.name},
            {"config_hash", r.config_hash},
            {"atrium", r.has_atrium ? target_summary_json(r.report.atrium) : json(nullptr)},
            {"scar", r.has_scar ? target_summary_json(r.report.scar) : json(nullptr)},
            {"scans", scans}};
}

RunReport run_report_from_json(const json& j) {
    try {
        RunReport r;
        r.name = j.at("name").get<std::string>();
        r.config_hash = j.value("config_hash", "");
        r.has_atrium = !j.at("atrium").is_null();
        r.has_scar = !j.at("scar").is_null();
        std::vector<metrics::ScanMetrics> scans;
        for (const auto& s : j.at("scans")) {
            metrics::ScanMetrics m;
            m.id = s.at("id").get<std::string>();
            if (r.has_atrium) m.atrium = target_from(s.at("atrium"));
            if (r.has_scar) m.scar = target_from(s.at("scar"));
            scans.push_back(std::move(m));
        }
        r.report = metrics::make_report(std::move(scans));
        return r;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed report: ") + e.what());
    }
}

std::string report_csv(const RunReport& r) {
    std::ostringstream os;
    os << std::setprecision(10) << "id,target,dsc,ji,asd,nmi,usr,osr,tp,fp,fn,tn\n";
    auto cell = [](const std::optional<double>& v) { return v ? std::to_string(*v) : std::string(); };
    for (const auto& s : r.report.scans)
        for (const auto& [target, m, present] : {std::tuple{"atrium", &s.atrium, r.has_atrium}, std::tuple{"scar", &s.scar, r.has_scar}})
            if (present)
                os << s.id << ',' << target << ',' << m->dsc << ',' << m->ji << ',' << cell(m->asd) << ',' << cell(m->nmi) << ','
                   << cell(m->usr) << ',' << cell(m->osr) << ',' << m->counts.tp << ',' << m->counts.fp << ',' << m->counts.fn
                   << ',' << m->counts.tn << '\n';
    return os.str();
}

// ---------------------------------------------------------------------------------------------
// Runs

namespace {

json run_config_json(const RunSpec& spec, const Corpus& corpus) {
    auto train = spec.train;
    train.ablation = spec.ablation;
    return {{"name", spec.name},
            {"net", trainer::to_json(spec.net)},
            {"train", trainer::to_json(train)},
            {"corpus_hash", corpus.config_hash}};
}

void guard_overwrite(const fs::path& dir, const std::string& hash, bool force) {
    const auto cfg = dir / "config.json";
    if (force || !fs::exists(cfg)) return;
    json existing;
    try {
        existing = io::read_json(cfg);
    } catch (const Error&) {
        return;
    }
    if (existing.value("config_hash", "") == hash)
        throw RefuseOverwriteError(dir.string() + " already holds a run with config hash " + hash + " (use --force)");
}

void write_predictions(const fs::path& dir, const std::map<std::string, VolumePrediction>& preds, const Corpus& corpus) {
    for (const auto* s : corpus.split("test")) {
        const auto it = preds.find(s->record.id);
        if (it == preds.end()) continue;
        const auto base = dir / "predictions" / s->record.id;
        if (it->second.atrium) io::write_grid(base / "atrium_prob", *it->second.atrium, s->volume.spacing, "atrium_prob", s->record.id);
        if (it->second.scar) io::write_grid(base / "scar_prob", *it->second.scar, s->volume.spacing, "scar_prob", s->record.id);
    }
}

RunReport evaluate_model(trainer::Model& model, const Corpus& corpus, const std::string& name, const std::string& hash,
                         std::map<std::string, VolumePrediction>* predictions) {
    std::vector<EvaluatedScan> scans;
    for (const auto* s : corpus.split("test")) {
        auto pred = predict_volume(model, s->normalized);
        scans.push_back(evaluate_prediction(pred, s->labels, s->volume.spacing, s->record.id));
        if (predictions) (*predictions)[s->record.id] = std::move(pred);
    }
    return make_run_report(name, hash, std::move(scans));
}

} // namespace

RunResult execute_run(const RunSpec& spec, const Corpus& corpus, const std::optional<fs::path>& dir, bool force) {
    const json cfg = run_config_json(spec, corpus);
    const auto hash = config_hash(cfg);
    if (dir) guard_overwrite(*dir, hash, force);

    auto train_cfg = spec.train;
    train_cfg.ablation = spec.ablation;
    auto net_cfg = spec.net;
    net_cfg.seed = train_cfg.seed;

    const auto train = patches_for(corpus, "train", net_cfg.patch);
    trainer::PatchTensors test;
    if (spec.epoch_validation) test = patches_for(corpus, "test", net_cfg.patch);

    if (dir) {
        std::error_code ec;
        fs::create_directories(*dir, ec);
        if (ec) throw IoError("cannot create run directory " + dir->string() + ": " + ec.message());
        json c = cfg;
        c["config_hash"] = hash;
        io::write_json(*dir / "config.json", c);
        fs::remove(*dir / "shared.json", ec);
    }

    trainer::Trainer tr(net_cfg, train_cfg);
    trainer::FitOptions opts;
    opts.out_dir = dir;
    opts.config_hash = hash;
    opts.validation = spec.epoch_validation ? &test : nullptr;
    opts.pretrained_edn = spec.pretrained_edn;
    opts.edn_donor = spec.edn_donor.get();

    RunResult r;
    r.spec = spec;
    r.dir = dir;
    r.record = trainer::fit(tr, train, opts);
    r.model = std::make_shared<trainer::Model>(std::move(tr.model()));
    r.report = evaluate_model(*r.model, corpus, spec.name, hash, &r.predictions);
    if (dir) {
        auto rec = r.record.to_json();
        rec["train_patches"] = train.size();
        rec["skipped_slices"] = train.skipped_slices;
        io::write_json(*dir / "run_record.json", rec);
        io::write_json(*dir / "report.json", to_json(r.report));
        io::write_text(*dir / "metrics.csv", report_csv(r.report));
        write_predictions(*dir, r.predictions, corpus);
    }
    return r;
}

RunReport evaluate_checkpoint(const fs::path& checkpoint, const Corpus& corpus, const std::string& name,
                              std::map<std::string, VolumePrediction>* predictions) {
    const auto meta_path = checkpoint / "meta.json";
    if (!fs::exists(meta_path)) throw MissingInputError("no checkpoint metadata at " + meta_path.string());
    const auto meta = io::read_json(meta_path);
    nets::NetConfig net;
    Ablation ablation;
    try {
        net = trainer::net_config_from_json(meta.at("net"));
        ablation = trainer::parse_ablation(meta.at("ablation").get<std::string>());
    } catch (const json::exception& e) {
        throw ConfigError("malformed checkpoint metadata: " + std::string(e.what()));
    }
    trainer::Model model(net, ablation, 0);
    model.load(checkpoint);
    return evaluate_model(model, corpus, name, meta.value("config_hash", ""), predictions);
}

RunReport evaluate_masks(const fs::path& pred_root, const Corpus& corpus) {
    std::vector<EvaluatedScan> scans;
    for (const auto* s : corpus.split("test")) {
        const auto dir = pred_root / s->record.id;
        const bool has_a = fs::exists(dir / "atrium.json"), has_s = fs::exists(dir / "scar.json");
        if (!has_a && !has_s) throw MissingInputError("no predicted masks for " + s->record.id + " in " + pred_root.string());
        VolumePrediction p;
        auto as_prob = [](const Mask& m) {
            Grid3<float> g(m.dims());
            for (std::size_t i = 0; i < m.size(); ++i) g[i] = m[i] ? 1.0f : 0.0f;
            return g;
        };
        if (has_a) p.atrium = as_prob(io::read_mask(dir / "atrium"));
        if (has_s) p.scar = as_prob(io::read_mask(dir / "scar"));
        if ((p.atrium && p.atrium->dims() != s->labels.atrium.dims()) || (p.scar && p.scar->dims() != s->labels.scar.dims()))
            throw ShapeError("predicted masks for " + s->record.id + " do not match the label grid");
        scans.push_back(evaluate_prediction(p, s->labels, s->volume.spacing, s->record.id));
    }
    return make_run_report("masks:" + pred_root.filename().string(), "", std::move(scans));
}

std::map<std::string, VolumePrediction> read_predictions(const fs::path& run_dir, const Corpus& corpus) {
    std::map<std::string, VolumePrediction> out;
    for (const auto* s : corpus.split("test")) {
        const auto base = run_dir / "predictions" / s->record.id;
        VolumePrediction p;
        if (fs::exists(base / "atrium_prob.json")) p.atrium = io::read_grid<float>(base / "atrium_prob");
        if (fs::exists(base / "scar_prob.json")) p.scar = io::read_grid<float>(base / "scar_prob");
        if (!p.atrium && !p.scar) throw MissingInputError("no stored predictions for " + s->record.id + " in " + run_dir.string());
        out[s->record.id] = std::move(p);
    }
    return out;
}

// ---------------------------------------------------------------------------------------------
// Ablation sweep

const std::vector<std::string>& ladder_rows() {
    static const std::vector<std::string> rows{"EDN", "RN", "RN+LA", "EDN+AC", "RN+AC", "full"};
    return rows;
}

const std::vector<std::string>& operation_rows() {
    static const std::vector<std::string> rows{"O_a", "O_p", "O_c", "O_ac"};
    return rows;
}

namespace {

RunResult share(const RunResult& source, const std::string& name, const std::optional<fs::path>& dir, bool force) {
    RunResult r = source;
    r.report.name = name;
    r.dir = dir;
    if (dir) {
        guard_overwrite(*dir, source.report.config_hash, force);
        std::error_code ec;
        fs::create_directories(*dir, ec);
        if (ec) throw IoError("cannot create run directory " + dir->string());
        const auto target = source.dir ? fs::relative(*source.dir, dir->parent_path()).string() : std::string();
        io::write_json(*dir / "shared.json", {{"shared_with", target}, {"config_hash", source.report.config_hash}});
        io::write_json(*dir / "config.json", {{"name", name}, {"shared_with", target}, {"config_hash", source.report.config_hash}});
        io::write_json(*dir / "report.json", to_json(r.report));
        io::write_text(*dir / "metrics.csv", report_csv(r.report));
    }
    return r;
}

std::optional<fs::path> sub(const std::optional<fs::path>& root, const std::string& name) {
    if (!root) return std::nullopt;
    return *root / name;
}

} // namespace

AblationResult run_ablation(const ExperimentConfig& config, const Corpus& corpus, const std::optional<fs::path>& out, bool force) {
    AblationResult result;
    const auto seeds = config.sweep_seeds();
    for (const auto seed : seeds) {
        const auto root = out && seeds.size() > 1 ? std::optional<fs::path>(*out / ("seed_" + std::to_string(seed))) : out;
        SeedSweep sweep;
        sweep.seed = seed;
        auto spec = [&](const std::string& name, Ablation a, nets::CascadeOp op = nets::CascadeOp::AdaptiveAttention) {
            RunSpec s;
            s.name = name;
            s.ablation = a;
            s.net = config.net;
            s.net.op = op;
            s.net.info = nets::CascadeInfo::C1;
            s.train = config.train;
            s.train.seed = seed;
            s.epoch_validation = config.epoch_validation;
            return s;
        };
        auto run = [&](RunSpec s) {
            const auto name = s.name;
            sweep.runs[name] = execute_run(s, corpus, sub(root, name), force);
            return sweep.runs[name];
        };

        const auto edn = run(spec("EDN", Ablation::EDN));
        run(spec("RN", Ablation::RN));
        auto la = spec("RN+LA", Ablation::RN_LA);
        la.edn_donor = edn.model;
        run(la);
        const auto ac = run(spec("EDN+AC", Ablation::EDN_AC));
        sweep.runs["RN+AC"] = share(ac, "RN+AC", sub(root, "RN+AC"), force);
        const auto full = run(spec("full", Ablation::Full));
        run(spec("O_a", Ablation::Full, nets::CascadeOp::Add));
        run(spec("O_p", Ablation::Full, nets::CascadeOp::Product));
        run(spec("O_c", Ablation::Full, nets::CascadeOp::Concat));
        sweep.runs["O_ac"] = share(full, "O_ac", sub(root, "O_ac"), force);
        result.seeds.push_back(std::move(sweep));
    }
    if (config.tournament) {
        const auto& first = result.seeds.front();
        result.tournament = run_tournament(config, corpus, first.runs.at("full"), sub(out, "tournament"), force);
    }
    return result;
}

std::map<std::string, RunResult> run_tournament(const ExperimentConfig& config, const Corpus& corpus,
                                                const std::optional<RunResult>& c1, const std::optional<fs::path>& out, bool force) {
    std::map<std::string, RunResult> runs;
    const auto seed = config.sweep_seeds().front();
    for (int k = 1; k <= 6; ++k) {
        const auto info = static_cast<nets::CascadeInfo>(k);
        const auto name = nets::to_string(info);
        if (info == nets::CascadeInfo::C1 && c1) {
            runs[name] = share(*c1, name, sub(out, name), force);
            continue;
        }
        RunSpec s;
        s.name = name;
        s.ablation = Ablation::Full;
        s.net = config.net;
        s.net.op = nets::CascadeOp::AdaptiveAttention;
        s.net.info = info;
        s.train = config.train;
        s.train.seed = seed;
        s.epoch_validation = config.epoch_validation;
        runs[name] = execute_run(s, corpus, sub(out, name), force);
    }
    return runs;
}

// ---------------------------------------------------------------------------------------------
// Analysis

std::vector<double> per_sample_scar_dsc(const RunReport& r) {
    if (!r.has_scar) throw ConfigError("run '" + r.name + "' has no scar prediction");
    std::vector<double> out;
    for (const auto& s : r.report.scans) out.push_back(s.scar.dsc);
    return out;
}

namespace {

template <typename F>
std::vector<std::vector<double>> collect_rows(const Corpus& corpus, F&& row_of) {
    std::vector<std::vector<double>> rows;
    for (const auto* s : corpus.split("test")) {
        const auto d = s->labels.atrium.dims();
        for (std::int64_t z = 0; z < d.depth; ++z) {
            const auto sl = s->labels.atrium.slice(z);
            if (std::none_of(sl.begin(), sl.end(), [](auto v) { return v != 0; })) continue;
            rows.push_back(row_of(*s, z));
        }
    }
    return rows;
}

} // namespace

std::vector<std::vector<double>> joint_rows(const std::map<std::string, VolumePrediction>& predictions, const Corpus& corpus) {
    return collect_rows(corpus, [&](const Sample& s, std::int64_t z) {
        const auto it = predictions.find(s.record.id);
        if (it == predictions.end() || !it->second.atrium || !it->second.scar)
            throw MissingInputError("joint distribution needs atrium and scar predictions for " + s.record.id);
        const auto a = it->second.atrium->slice(z);
        const auto b = it->second.scar->slice(z);
        std::vector<double> row(a.begin(), a.end());
        row.insert(row.end(), b.begin(), b.end());
        return row;
    });
}

std::vector<std::vector<double>> joint_rows_truth(const Corpus& corpus) {
    return collect_rows(corpus, [](const Sample& s, std::int64_t z) {
        const auto a = s.labels.atrium.slice(z);
        const auto b = s.labels.scar.slice(z);
        std::vector<double> row;
        row.reserve(a.size() + b.size());
        for (auto v : a) row.push_back(v ? 1.0 : 0.0);
        for (auto v : b) row.push_back(v ? 1.0 : 0.0);
        return row;
    });
}

BaselineResult threshold_baseline_report(const Corpus& corpus, analysis::ThresholdMethod method) {
    std::vector<EvaluatedScan> scans;
    for (const auto* s : corpus.split("test")) {
        const auto scar = analysis::threshold_baseline(s->normalized.data, s->labels.wall, method);
        EvaluatedScan e;
        e.metrics.id = s->record.id;
        e.metrics.scar = metrics::evaluate_target(scar, s->labels.scar, s->volume.spacing);
        e.has_scar = true;
        scans.push_back(std::move(e));
    }
    const std::string name = method == analysis::ThresholdMethod::TwoSD ? "2SD" : "Otsu";
    return {name, make_run_report(name, "", std::move(scans))};
}

QuantResult quantify_predictions(const std::map<std::string, VolumePrediction>& predictions, const Corpus& corpus, int wall_thickness) {
    QuantResult q;
    std::vector<double> est_vol, true_vol, est_pct, true_pct;
    for (const auto* s : corpus.split("test")) {
        const auto it = predictions.find(s->record.id);
        if (it == predictions.end() || !it->second.scar || !it->second.atrium)
            throw MissingInputError("quantification needs atrium and scar predictions for " + s->record.id);
        const auto& sp = s->volume.spacing;
        QuantRecord r;
        r.id = s->record.id;
        r.truth = quantify::scar_percentage(s->labels.scar, s->labels.wall, sp);
        const auto scar = binarize(*it->second.scar);
        try {
            const auto wall = quantify::derive_wall(binarize(*it->second.atrium), wall_thickness);
            r.estimated = quantify::scar_percentage(scar, wall, sp);
            est_pct.push_back(r.estimated.percent);
            true_pct.push_back(r.truth.percent);
        } catch (const DegenerateInputError&) {
            r.estimated = {double(count_nonzero(scar)) * sp.voxel_volume(), 0.0, std::numeric_limits<double>::quiet_NaN()};
        } catch (const UndefinedMetricError&) {
            r.estimated = {double(count_nonzero(scar)) * sp.voxel_volume(), 0.0, std::numeric_limits<double>::quiet_NaN()};
        }
        est_vol.push_back(r.estimated.scar_mm3);
        true_vol.push_back(r.truth.scar_mm3);
        q.records.push_back(r);
    }
    q.scar_volume = quantify::correlation_and_agreement(est_vol, true_vol);
    if (est_pct.size() >= 3) q.scar_percent = quantify::correlation_and_agreement(est_pct, true_pct);
    return q;
}

namespace {

json agreement_json(const quantify::AgreementStats& a) {
    json scatter = json::array(), ba = json::array();
    for (const auto& p : a.scatter) scatter.push_back({p.x, p.y});
    for (const auto& p : a.ba_points) ba.push_back({p.x, p.y});
    return {{"pearson_r", a.pearson_r},
            {"slope", a.slope},
            {"intercept", a.intercept},
            {"bland_altman",
             {{"bias", a.bland_altman.bias}, {"sd", a.bland_altman.sd}, {"lower", a.bland_altman.lower}, {"upper", a.bland_altman.upper}}},
            {"scatter", scatter},
            {"ba_points", ba}};
}

json burden_json(const quantify::ScarBurden& b) {
    return {{"scar_mm3", b.scar_mm3}, {"wall_mm3", b.wall_mm3}, {"percent", std::isfinite(b.percent) ? json(b.percent) : json(nullptr)}};
}

} // namespace

json to_json(const QuantResult& q) {
    json recs = json::array();
    for (const auto& r : q.records) recs.push_back({{"id", r.id}, {"estimated", burden_json(r.estimated)}, {"truth", burden_json(r.truth)}});
    return {{"records", recs}, {"scar_volume", agreement_json(q.scar_volume)}, {"scar_percent", agreement_json(q.scar_percent)}};
}

SweepSummary summarize_sweep(const SeedSweep& sweep, const Corpus& corpus) {
    SweepSummary s;
    for (const auto& [name, run] : sweep.runs) {
        if (run.report.has_atrium) s.atrium[name] = run.report.report.atrium;
        if (run.report.has_scar) s.scar[name] = run.report.report.scar;
    }
    auto rates = [](const metrics::TargetSummary& t) {
        return analysis::RateSummary{std::isfinite(t.usr.mean) ? t.usr.mean : 0.0, std::isfinite(t.osr.mean) ? t.osr.mean : 0.0};
    };
    if (s.atrium.contains("EDN") && s.atrium.contains("EDN+AC") && s.scar.contains("RN") && s.scar.contains("RN+AC"))
        s.osr_usr = analysis::osr_usr_ablation({{"EDN", rates(s.atrium.at("EDN"))},
                                                {"EDN+AC", rates(s.atrium.at("EDN+AC"))},
                                                {"RN", rates(s.scar.at("RN"))},
                                                {"RN+AC", rates(s.scar.at("RN+AC"))}});
    if (sweep.runs.contains("full") && sweep.runs.contains("EDN+AC")) {
        const auto real = joint_rows_truth(corpus);
        s.pca_with_t_points = analysis::pca_joint_distance(joint_rows(sweep.runs.at("full").predictions, corpus), real);
        s.pca_without_t_points = analysis::pca_joint_distance(joint_rows(sweep.runs.at("EDN+AC").predictions, corpus), real);
        s.pca_with_t = s.pca_with_t_points->distance;
        s.pca_without_t = s.pca_without_t_points->distance;
    }
    return s;
}

json to_json(const SweepSummary& s) {
    json atrium = json::object(), scar = json::object();
    for (const auto& [k, v] : s.atrium) atrium[k] = target_summary_json(v);
    for (const auto& [k, v] : s.scar) scar[k] = target_summary_json(v);
    json j = {{"atrium", atrium}, {"scar", scar}};
    if (s.osr_usr) {
        json checks = json::array(), rates = json::object();
        for (const auto& c : s.osr_usr->checks) checks.push_back({{"claim", c.claim}, {"delta", c.delta}, {"holds", c.holds}});
        for (const auto& [k, r] : s.osr_usr->rates) rates[k] = {{"usr", r.usr}, {"osr", r.osr}};
        j["osr_usr"] = {{"rates", rates}, {"checks", checks}};
    }
    j["pca_with_t"] = opt_json(s.pca_with_t);
    j["pca_without_t"] = opt_json(s.pca_without_t);
    auto points = [](const analysis::JointDistributionSummary& p) {
        json real = json::array(), est = json::array();
        for (const auto& q : p.real) real.push_back({q[0], q[1]});
        for (const auto& q : p.estimated) est.push_back({q[0], q[1]});
        return json{{"real", real}, {"estimated", est}, {"distance", p.distance}};
    };
    if (s.pca_with_t_points) j["pca_points"] = {{"with_t", points(*s.pca_with_t_points)}, {"without_t", points(*s.pca_without_t_points)}};
    return j;
}

namespace {

/// A persisted run directory, following `shared.json` to the training it reuses.
RunResult load_run(const fs::path& dir, const Corpus& corpus) {
    RunResult r;
    r.dir = dir;
    r.report = run_report_from_json(io::read_json(dir / "report.json"));
    fs::path source = dir;
    if (fs::exists(dir / "shared.json")) {
        const auto target = io::read_json(dir / "shared.json").value("shared_with", "");
        if (!target.empty()) source = dir.parent_path() / target;
    }
    if (fs::exists(source / "predictions")) r.predictions = read_predictions(source, corpus);
    return r;
}

std::map<std::string, RunResult> load_runs(const fs::path& root, const std::vector<std::string>& names, const Corpus& corpus) {
    std::map<std::string, RunResult> runs;
    for (const auto& n : names)
        if (fs::exists(root / n / "report.json")) runs[n] = load_run(root / n, corpus);
    return runs;
}

} // namespace

json analyze_runs(const fs::path& runs, const Corpus& corpus) {
    if (!fs::is_directory(runs)) throw MissingInputError("no run directory at " + runs.string());
    std::vector<fs::path> roots;
    for (const auto& e : fs::directory_iterator(runs))
        if (e.is_directory() && e.path().filename().string().rfind("seed_", 0) == 0) roots.push_back(e.path());
    std::sort(roots.begin(), roots.end());
    if (roots.empty()) roots.push_back(runs);

    std::vector<std::string> rows = ladder_rows();
    rows.insert(rows.end(), operation_rows().begin(), operation_rows().end());

    json out;
    json sweeps = json::array();
    std::map<std::string, std::vector<double>> scar_dsc, atrium_dsc;
    std::vector<double> with_t, without_t;
    for (const auto& root : roots) {
        SeedSweep sweep;
        sweep.runs = load_runs(root, rows, corpus);
        if (sweep.runs.empty()) continue;
        const auto summary = summarize_sweep(sweep, corpus);
        auto j = to_json(summary);
        j["dir"] = root.string();
        sweeps.push_back(j);
        for (const auto& [k, v] : summary.scar) scar_dsc[k].push_back(v.dsc.mean);
        for (const auto& [k, v] : summary.atrium) atrium_dsc[k].push_back(v.dsc.mean);
        if (summary.pca_with_t) with_t.push_back(*summary.pca_with_t), without_t.push_back(*summary.pca_without_t);
    }
    if (sweeps.empty()) throw MissingInputError("no run reports under " + runs.string());
    out["sweeps"] = sweeps;

    auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return v.empty() ? 0.0 : s / double(v.size());
    };
    json seed_mean = {{"atrium_dsc", json::object()}, {"scar_dsc", json::object()}};
    for (const auto& [k, v] : atrium_dsc) seed_mean["atrium_dsc"][k] = mean(v);
    for (const auto& [k, v] : scar_dsc) seed_mean["scar_dsc"][k] = mean(v);
    if (!with_t.empty()) seed_mean["pca"] = {{"with_t", mean(with_t)}, {"without_t", mean(without_t)}};
    out["seed_mean"] = seed_mean;

    const auto tdir = runs / "tournament";
    if (fs::is_directory(tdir)) {
        const std::vector<std::string> variants{"C1", "C2", "C3", "C4", "C5", "C6"};
        const auto truns = load_runs(tdir, variants, corpus);
        if (truns.size() == variants.size()) {
            std::vector<std::vector<double>> scores;
            for (const auto& v : variants) scores.push_back(per_sample_scar_dsc(truns.at(v).report));
            const auto t = analysis::tournament(variants, scores);
            const auto a = analysis::affinity(t);
            out["tournament"] = {{"variants", variants}, {"wins", t.wins}, {"affinity", a.scores}, {"best", a.variants[a.argmax()]}};
        }
    }

    json baselines = json::object();
    for (auto m : {analysis::ThresholdMethod::TwoSD, analysis::ThresholdMethod::Otsu}) {
        const auto b = threshold_baseline_report(corpus, m);
        baselines[b.method] = {{"scar_dsc", b.report.report.scar.dsc.mean}};
    }
    out["baselines"] = baselines;
    return out;
}

} // namespace jasgan::experiment
