#include "jasgan/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "jasgan/io.hpp"

namespace jasgan::trainer {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Ablation a) {
    switch (a) {
    case Ablation::EDN: return "EDN";
    case Ablation::RN: return "RN";
    case Ablation::RN_LA: return "RN+LA";
    case Ablation::EDN_AC: return "EDN+AC";
    case Ablation::RN_AC: return "RN+AC";
    case Ablation::Full: return "full";
    }
    return "?";
}

Ablation parse_ablation(const std::string& s) {
    for (auto a : {Ablation::EDN, Ablation::RN, Ablation::RN_LA, Ablation::EDN_AC, Ablation::RN_AC, Ablation::Full})
        if (s == to_string(a)) return a;
    throw ConfigError("unknown ablation '" + s + "' (expected EDN, RN, RN+LA, EDN+AC, RN+AC or full)");
}

bool uses_cascade(Ablation a) { return a == Ablation::EDN_AC || a == Ablation::RN_AC || a == Ablation::Full; }
bool uses_discriminator(Ablation a) { return a == Ablation::Full; }

void TrainConfig::validate() const {
    if (epochs < 0) throw ConfigError("epochs must be non-negative");
    if (batch_size < 2) throw ConfigError("batch size must be at least 2 (batch statistics)");
    if (!(g_lr > 0.0) || !(t_lr > 0.0)) throw ConfigError("learning rates must be positive");
    if (!(g_decay > 0.0 && g_decay <= 1.0)) throw ConfigError("learning-rate decay must lie in (0, 1]");
    if (!(lambda3 >= 0.0)) throw ConfigError("lambda3 must be non-negative");
    if (!(roi_threshold > 0.0 && roi_threshold < 1.0)) throw ConfigError("ROI threshold must lie in (0, 1)");
}

namespace {

void reject_unknown_keys(const json& j, std::initializer_list<const char*> keys, const char* where) {
    if (!j.is_object()) throw ConfigError(std::string(where) + " must be a JSON object");
    for (const auto& [k, _] : j.items())
        if (std::none_of(keys.begin(), keys.end(), [&](const char* known) { return k == known; }))
            throw ConfigError(std::string(where) + ": unknown key '" + k + "'");
}

} // namespace

json to_json(const TrainConfig& c) {
    return {{"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"g_lr", c.g_lr},
            {"g_decay", c.g_decay},
            {"t_lr", c.t_lr},
            {"lambda3", c.lambda3},
            {"nonsaturating_weight", c.nonsaturating_weight},
            {"adversarial_form", c.adversarial_form == losses::AdversarialForm::Standard ? "standard" : "literal"},
            {"roi_threshold", c.roi_threshold},
            {"ablation", to_string(c.ablation)},
            {"seed", c.seed}};
}

TrainConfig train_config_from_json(const json& j) {
    reject_unknown_keys(j, {"epochs", "batch_size", "g_lr", "g_decay", "t_lr", "lambda3", "nonsaturating_weight", "adversarial_form",
                            "roi_threshold", "ablation", "seed"},
                        "train config");
    TrainConfig c;
    try {
        c.epochs = j.value("epochs", c.epochs);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.g_lr = j.value("g_lr", c.g_lr);
        c.g_decay = j.value("g_decay", c.g_decay);
        c.t_lr = j.value("t_lr", c.t_lr);
        c.lambda3 = j.value("lambda3", c.lambda3);
        c.nonsaturating_weight = j.value("nonsaturating_weight", c.nonsaturating_weight);
        const auto form = j.value("adversarial_form", std::string("standard"));
        if (form == "standard") c.adversarial_form = losses::AdversarialForm::Standard;
        else if (form == "literal") c.adversarial_form = losses::AdversarialForm::Literal;
        else throw ConfigError("adversarial_form must be 'standard' or 'literal'");
        c.roi_threshold = j.value("roi_threshold", c.roi_threshold);
        c.ablation = parse_ablation(j.value("ablation", to_string(c.ablation)));
        c.seed = j.value("seed", c.seed);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("train config: ") + e.what());
    }
    c.validate();
    return c;
}

json to_json(const nets::NetConfig& c) {
    return {{"edn_base_width", c.edn_base_width},
            {"rn_width", c.rn_width},
            {"rn_kernel", c.rn_kernel},
            {"lstm_hidden", c.lstm_hidden},
            {"lstm_kernel", c.lstm_kernel},
            {"disc_base_width", c.disc_base_width},
            {"disc_kernel", c.disc_kernel},
            {"patch", c.patch},
            {"op", nets::to_string(c.op)},
            {"info", nets::to_string(c.info)},
            {"bn_running_stats", c.bn_running_stats},
            {"seed", c.seed}};
}

nets::NetConfig net_config_from_json(const json& j) {
    reject_unknown_keys(j, {"edn_base_width", "rn_width", "rn_kernel", "lstm_hidden", "lstm_kernel", "disc_base_width", "disc_kernel",
                            "patch", "op", "info", "bn_running_stats", "seed"},
                        "net config");
    nets::NetConfig c;
    try {
        c.edn_base_width = j.value("edn_base_width", c.edn_base_width);
        c.rn_width = j.value("rn_width", c.rn_width);
        c.rn_kernel = j.value("rn_kernel", c.rn_kernel);
        c.lstm_hidden = j.value("lstm_hidden", c.lstm_hidden);
        c.lstm_kernel = j.value("lstm_kernel", c.lstm_kernel);
        c.disc_base_width = j.value("disc_base_width", c.disc_base_width);
        c.disc_kernel = j.value("disc_kernel", c.disc_kernel);
        c.patch = j.value("patch", c.patch);
        c.op = nets::parse_cascade_op(j.value("op", nets::to_string(c.op)));
        c.info = nets::parse_cascade_info(j.value("info", nets::to_string(c.info)));
        c.bn_running_stats = j.value("bn_running_stats", c.bn_running_stats);
        c.seed = j.value("seed", c.seed);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("net config: ") + e.what());
    }
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------------------------

Batch PatchTensors::gather(const std::vector<std::int64_t>& rows) const {
    const auto idx = torch::tensor(rows, torch::kLong);
    return {image.index_select(0, idx), atrium.index_select(0, idx), scar.index_select(0, idx)};
}

PatchTensors to_tensors(const std::vector<Patch>& patches) {
    PatchTensors t;
    if (patches.empty()) return t;
    const auto n = std::ssize(patches);
    const auto s = patches.front().size;
    t.image = torch::empty({n, 1, s, s});
    t.atrium = torch::empty({n, 1, s, s});
    t.scar = torch::empty({n, 1, s, s});
    t.wall = torch::empty({n, 1, s, s});
    auto img = t.image.accessor<float, 4>();
    auto atr = t.atrium.accessor<float, 4>();
    auto scr = t.scar.accessor<float, 4>();
    auto wal = t.wall.accessor<float, 4>();
    for (std::int64_t i = 0; i < n; ++i) {
        const auto& p = patches[std::size_t(i)];
        if (p.size != s) throw ShapeError("to_tensors: mixed patch sizes");
        for (std::int64_t y = 0; y < s; ++y)
            for (std::int64_t x = 0; x < s; ++x) {
                const auto k = std::size_t(y * s + x);
                img[i][0][y][x] = p.image[k];
                atr[i][0][y][x] = p.atrium[k] ? 1.0f : 0.0f;
                scr[i][0][y][x] = p.scar[k] ? 1.0f : 0.0f;
                wal[i][0][y][x] = p.wall[k] ? 1.0f : 0.0f;
            }
        t.sample_ids.push_back(p.sample_id);
    }
    return t;
}

// ---------------------------------------------------------------------------------------------

BalanceImpl::BalanceImpl() {
    s1 = register_parameter("s1", torch::zeros({}));
    s2 = register_parameter("s2", torch::zeros({}));
}

namespace {

nets::NetConfig effective_net(nets::NetConfig net, Ablation a) {
    // Single-network variants feed the RN one image channel and use no cascade signal.
    if (!uses_cascade(a)) {
        net.op = nets::CascadeOp::Product;
        net.info = nets::CascadeInfo::C1;
    }
    return net;
}

std::vector<torch::Tensor> params_of(const torch::nn::Module& m) { return m.parameters(); }

} // namespace

Model::Model(const nets::NetConfig& net, Ablation ablation, std::uint64_t seed)
    : net_(effective_net(net, ablation)), ablation_(ablation) {
    torch::manual_seed(seed);
    cascade = nets::Cascade(net_);
    discriminator = nets::JointDiscriminator(net_.disc_base_width, net_.disc_kernel, net_.bn_running_stats);
    balance = Balance();
}

torch::Tensor Model::roi(const torch::Tensor& image, double threshold) {
    torch::NoGradGuard guard;
    return (cascade->edn(image).prob > threshold).to(image.scalar_type());
}

Prediction Model::predict(const torch::Tensor& image) {
    torch::NoGradGuard guard;
    cascade->eval();
    Prediction p;
    switch (ablation_) {
    case Ablation::EDN: p.atrium = cascade->edn(image).prob; break;
    case Ablation::RN: p.scar = torch::sigmoid(cascade->rn(image)); break;
    case Ablation::RN_LA: {
        p.atrium = cascade->edn(image).prob;
        const auto mask = (p.atrium > roi_threshold).to(image.scalar_type());
        p.scar = torch::sigmoid(cascade->rn(image * mask));
        break;
    }
    default: {
        const auto out = cascade->forward(image);
        p.atrium = out.y_hat_l;
        p.scar = out.y_hat_s;
    }
    }
    cascade->train();
    return p;
}

void Model::save(const fs::path& dir, const json& meta) const {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create checkpoint directory " + dir.string() + ": " + ec.message());
    try {
        torch::save(cascade, (dir / "cascade.pt").string());
        torch::save(discriminator, (dir / "discriminator.pt").string());
        torch::save(balance, (dir / "balance.pt").string());
    } catch (const c10::Error& e) {
        throw IoError("checkpoint write failed in " + dir.string() + ": " + e.what_without_backtrace());
    }
    json m = meta;
    m["ablation"] = to_string(ablation_);
    m["net"] = to_json(net_);
    io::write_json(dir / "meta.json", m);
}

json Model::load(const fs::path& dir) {
    for (const char* f : {"cascade.pt", "discriminator.pt", "balance.pt", "meta.json"})
        if (!fs::exists(dir / f)) throw MissingInputError("checkpoint file missing: " + (dir / f).string());
    try {
        torch::load(cascade, (dir / "cascade.pt").string());
        torch::load(discriminator, (dir / "discriminator.pt").string());
        torch::load(balance, (dir / "balance.pt").string());
    } catch (const c10::Error& e) {
        throw IoError("checkpoint read failed in " + dir.string() + ": " + e.what_without_backtrace());
    }
    return io::read_json(dir / "meta.json");
}

std::vector<torch::Tensor> Model::cascade_parameters() const { return params_of(*cascade); }
std::vector<torch::Tensor> Model::edn_parameters() const { return params_of(*cascade->edn); }
std::vector<torch::Tensor> Model::discriminator_parameters() const { return params_of(*discriminator); }

std::vector<torch::Tensor> Model::scar_parameters() const {
    std::vector<torch::Tensor> out;
    for (const auto& p : cascade->named_parameters())
        if (p.key().rfind("edn.", 0) != 0) out.push_back(p.value());
    return out;
}

// ---------------------------------------------------------------------------------------------

json StepRecord::to_json() const {
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    return {{"step", step}, {"epoch", epoch},   {"l_ce", opt(l_ce)}, {"l_dice", opt(l_dice)},
            {"l_adv_g", opt(l_adv_g)}, {"l_fm", opt(l_fm)}, {"l_d", opt(l_d)}, {"s1", s1},
            {"s2", s2},     {"g_lr", g_lr}};
}

json EpochRecord::to_json() const {
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    return {{"epoch", epoch}, {"g_lr", g_lr}, {"val_atrium_dsc", opt(val_atrium_dsc)}, {"val_scar_dsc", opt(val_scar_dsc)}};
}

json RunRecord::to_json() const {
    json s = json::array(), e = json::array();
    for (const auto& r : steps) s.push_back(r.to_json());
    for (const auto& r : epochs) e.push_back(r.to_json());
    return {{"config_hash", config_hash}, {"checkpoints", checkpoints}, {"epochs", e}, {"steps", s}};
}

// ---------------------------------------------------------------------------------------------

Trainer::Trainer(const nets::NetConfig& net, const TrainConfig& train)
    : train_((train.validate(), train)), model_(net, train.ablation, train.seed), g_lr_(train.g_lr) {
    model_.roi_threshold = train_.roi_threshold;
    phase_ = train_.ablation == Ablation::RN ? Phase::Scar : Phase::Atrium;
    rebuild_g_optimizer();
    if (uses_discriminator(train_.ablation))
        t_opt_ = std::make_unique<torch::optim::Adam>(model_.discriminator_parameters(), torch::optim::AdamOptions(train_.t_lr));
}

void Trainer::rebuild_g_optimizer() {
    std::vector<torch::Tensor> params;
    switch (train_.ablation) {
    case Ablation::EDN: params = model_.edn_parameters(); break;
    case Ablation::RN: params = model_.cascade->rn->parameters(); break;
    case Ablation::RN_LA:
        params = phase_ == Phase::Atrium ? model_.edn_parameters() : model_.cascade->rn->parameters();
        break;
    default:
        params = model_.cascade_parameters();
        params.push_back(model_.balance->s1);
        params.push_back(model_.balance->s2);
    }
    g_opt_ = std::make_unique<torch::optim::Adam>(params, torch::optim::AdamOptions(g_lr_));
}

void Trainer::begin_scar_phase() {
    if (train_.ablation != Ablation::RN_LA) throw ConfigError("only RN+LA has a scar phase");
    phase_ = Phase::Scar;
    g_lr_ = train_.g_lr;
    for (auto& p : model_.edn_parameters()) p.set_requires_grad(false);
    rebuild_g_optimizer();
}

void Trainer::end_epoch() {
    ++epoch_;
    g_lr_ *= train_.g_decay;
    for (auto& group : g_opt_->param_groups()) static_cast<torch::optim::AdamOptions&>(group.options()).lr(g_lr_);
}

namespace {

std::optional<double> value_of(const torch::Tensor& t) {
    if (!t.defined()) return std::nullopt;
    return t.item<double>();
}

void require_finite(const losses::LossBundle& b, std::optional<double> l_d, std::int64_t step) {
    json diag = {{"step", step}};
    bool bad = false;
    auto check = [&](const char* name, const torch::Tensor& t) {
        if (!t.defined()) return;
        const double v = t.item<double>();
        diag[name] = std::isfinite(v) ? json(v) : json(std::to_string(v));
        bad |= !std::isfinite(v);
    };
    check("l_ce", b.l_ce);
    check("l_dice", b.l_dice);
    check("l_adv_g", b.l_adv_g);
    check("s1", b.s1);
    check("s2", b.s2);
    if (l_d) {
        diag["l_d"] = std::isfinite(*l_d) ? json(*l_d) : json(std::to_string(*l_d));
        bad |= !std::isfinite(*l_d);
    }
    if (bad) throw DivergedError("non-finite loss: " + diag.dump());
}

} // namespace

StepRecord Trainer::record(const losses::LossBundle& b, std::optional<double> l_d) const {
    StepRecord r;
    r.step = step_;
    r.epoch = epoch_;
    r.l_ce = value_of(b.l_ce);
    r.l_dice = value_of(b.l_dice);
    r.l_adv_g = value_of(b.l_adv_g);
    r.l_fm = value_of(b.l_fm);
    r.l_d = l_d;
    r.s1 = model_.balance->s1.item<double>();
    r.s2 = model_.balance->s2.item<double>();
    r.g_lr = g_lr_;
    return r;
}

std::pair<nets::DiscriminatorOutput, nets::DiscriminatorOutput> Trainer::discriminate(const Batch& batch, const torch::Tensor& atrium,
                                                                                      const torch::Tensor& scar) {
    // Real and estimated pairs share one forward pass so batch normalization sees both.
    const auto n = batch.image.size(0);
    const auto out = model_.discriminator(torch::cat({batch.atrium, atrium}), torch::cat({batch.scar, scar}),
                                          torch::cat({batch.image, batch.image}));
    auto half = [&](std::int64_t from) {
        return nets::DiscriminatorOutput{out.confidence.narrow(0, from, n), out.logits.narrow(0, from, n),
                                         out.features.narrow(0, from, n)};
    };
    return {half(0), half(n)};
}

double Trainer::discriminator_update(const Batch& batch, const nets::CascadeOutput& fake) {
    if (!t_opt_) throw ConfigError("this ablation has no discriminator");
    t_opt_->zero_grad();
    const auto [real, est] = discriminate(batch, fake.y_hat_l.detach(), fake.y_hat_s.detach());
    const auto loss = losses::discriminator_loss(real.confidence, est.confidence, train_.adversarial_form);
    const double value = loss.item<double>();
    if (!std::isfinite(value)) throw DivergedError("non-finite discriminator loss at step " + std::to_string(step_));
    loss.backward();
    t_opt_->step();
    return value;
}

losses::LossBundle Trainer::generator_update(const Batch& batch, const nets::CascadeOutput& out) {
    losses::LossBundle b;
    b.lambda3 = train_.lambda3;
    b.s1 = model_.balance->s1;
    b.s2 = model_.balance->s2;
    b.l_ce = losses::cross_entropy(out.y_hat_l, batch.atrium);
    b.l_dice = losses::dice_loss(out.y_hat_s, batch.scar);
    if (uses_discriminator(train_.ablation)) {
        const auto [real, est] = discriminate(batch, out.y_hat_l, out.y_hat_s);
        const auto real_features = real.features.detach();
        b.l_fm = losses::feature_matching(real_features, est.features);
        b.l_adv_g = losses::generator_adv_loss(est.confidence, real_features, est.features,
                                               {train_.nonsaturating_weight, losses::kLogClamp});
    }
    g_opt_->zero_grad();
    const auto total = losses::total_generator_loss(b);
    require_finite(b, std::nullopt, step_);
    total.backward();
    g_opt_->step();
    if (t_opt_) t_opt_->zero_grad();
    return b;
}

StepRecord Trainer::train_step(const Batch& batch) {
    nets::require_divisible(batch.image, nets::kEdnDownsampling, "train_step");
    StepRecord r;
    auto& cascade = model_.cascade;
    const bool scar_only = train_.ablation == Ablation::RN || (train_.ablation == Ablation::RN_LA && phase_ == Phase::Scar);
    if (train_.ablation == Ablation::EDN || (train_.ablation == Ablation::RN_LA && phase_ == Phase::Atrium)) {
        losses::LossBundle b;
        b.l_ce = losses::cross_entropy(cascade->edn(batch.image).prob, batch.atrium);
        require_finite(b, std::nullopt, step_);
        g_opt_->zero_grad();
        b.l_ce.backward();
        g_opt_->step();
        r = record(b, std::nullopt);
    } else if (scar_only) {
        auto input = batch.image;
        if (train_.ablation == Ablation::RN_LA) input = input * model_.roi(batch.image, train_.roi_threshold);
        losses::LossBundle b;
        b.l_dice = losses::dice_loss(torch::sigmoid(cascade->rn(input)), batch.scar);
        require_finite(b, std::nullopt, step_);
        g_opt_->zero_grad();
        b.l_dice.backward();
        g_opt_->step();
        r = record(b, std::nullopt);
    } else {
        const auto out = cascade->forward(batch.image);
        std::optional<double> l_d;
        if (uses_discriminator(train_.ablation)) l_d = discriminator_update(batch, out.detached());
        const auto b = generator_update(batch, out);
        r = record(b, l_d);
    }
    ++step_;
    return r;
}

// ---------------------------------------------------------------------------------------------

std::pair<std::optional<double>, std::optional<double>> validation_dice(Model& model, const PatchTensors& patches) {
    if (patches.size() < 2) return {std::nullopt, std::nullopt};
    const auto pred = model.predict(patches.image);
    auto dice = [](const torch::Tensor& p, const torch::Tensor& y) -> std::optional<double> {
        if (!p.defined()) return std::nullopt;
        const auto b = (p > 0.5).to(torch::kDouble);
        const auto yd = y.to(torch::kDouble);
        const double inter = (b * yd).sum().item<double>();
        const double denom = b.sum().item<double>() + yd.sum().item<double>();
        return denom == 0.0 ? 1.0 : 2.0 * inter / denom;
    };
    return {dice(pred.atrium, patches.atrium), dice(pred.scar, patches.scar)};
}

void require_disjoint(const std::vector<std::string>& train_ids, const std::vector<std::string>& test_ids) {
    const std::set<std::string> train(train_ids.begin(), train_ids.end());
    for (const auto& id : test_ids)
        if (train.count(id)) throw ConfigError("sample '" + id + "' appears in both the training and the test split");
}

namespace {

std::vector<std::vector<std::int64_t>> epoch_batches(std::int64_t n, int batch_size, std::mt19937_64& rng) {
    std::vector<std::int64_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<std::int64_t>> out;
    for (std::int64_t i = 0; i < n; i += batch_size) {
        const auto end = std::min<std::int64_t>(n, i + batch_size);
        if (end - i < 2) break;  // batch statistics need two samples
        out.emplace_back(order.begin() + i, order.begin() + end);
    }
    return out;
}

} // namespace

RunRecord fit(Trainer& trainer, const PatchTensors& train, const FitOptions& options) {
    if (train.size() < 2) throw ConfigError("training split is empty");
    if (options.validation) require_disjoint(train.sample_ids, options.validation->sample_ids);

    RunRecord rec;
    rec.config_hash = options.config_hash;
    auto& model = trainer.model();
    const auto& cfg = trainer.config();

    std::ofstream log;
    if (options.out_dir) {
        std::error_code ec;
        fs::create_directories(*options.out_dir, ec);
        log.open(*options.out_dir / "train_log.jsonl");
        if (!log) throw IoError("cannot write training log in " + options.out_dir->string());
    }
    auto checkpoint = [&](const std::string& name) {
        if (!options.out_dir) return;
        const auto dir = *options.out_dir / "checkpoints" / name;
        model.save(dir, {{"step", trainer.step()}, {"epoch", trainer.epoch()}, {"config_hash", options.config_hash}, {"seed", cfg.seed}});
        rec.checkpoints.push_back(dir.string());
    };
    checkpoint("init");

    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    auto run_epochs = [&] {
        for (int e = 0; e < cfg.epochs; ++e) {
            for (const auto& rows : epoch_batches(train.size(), cfg.batch_size, rng)) {
                StepRecord r;
                try {
                    r = trainer.train_step(train.gather(rows));
                } catch (const DivergedError& err) {
                    if (log) log << json{{"error", "diverged"}, {"detail", err.what()}}.dump() << "\n";
                    throw;
                }
                if (log) log << r.to_json().dump() << "\n";
                rec.steps.push_back(r);
            }
            EpochRecord er;
            er.epoch = trainer.epoch();
            er.g_lr = trainer.g_learning_rate();
            if (options.validation) std::tie(er.val_atrium_dsc, er.val_scar_dsc) = validation_dice(model, *options.validation);
            if (log) log << json{{"epoch_summary", er.to_json()}}.dump() << "\n";
            rec.epochs.push_back(er);
            trainer.end_epoch();
            if (options.checkpoint_each_epoch) checkpoint("epoch_" + std::to_string(er.epoch));
        }
    };

    if (cfg.ablation == Ablation::RN_LA) {
        auto copy_edn = [&](const Model& donor) {
            torch::NoGradGuard guard;
            auto dst = model.cascade->edn->named_parameters();
            for (const auto& p : donor.cascade->edn->named_parameters()) dst[p.key()].copy_(p.value());
        };
        if (options.edn_donor) {
            copy_edn(*options.edn_donor);
        } else if (options.pretrained_edn) {
            Model donor(model.net_config(), Ablation::EDN, cfg.seed);
            donor.load(*options.pretrained_edn);
            copy_edn(donor);
        } else {
            run_epochs();
        }
        trainer.begin_scar_phase();
    }
    run_epochs();
    if (cfg.epochs > 0) checkpoint("final");
    return rec;
}

} // namespace jasgan::trainer
